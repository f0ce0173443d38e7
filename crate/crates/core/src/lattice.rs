//! Turn-based encodings of lattice walks.
//!
//! A walk is a sequence of absolute turns, each turn selecting one lattice
//! basis vector. Two lattices are supported:
//!
//! * the square lattice, with directions `0 → +x`, `1 → +y`, `2 → −x`, `3 → −y`;
//! * the tetrahedral (diamond) lattice, where turn `k` at an even index moves
//!   along `D_k` and at an odd index along `−D_k`, with `D` the four
//!   `(±1, ±1, ±1)` vectors of even sign parity.
//!
//! Positions are kept in integer lattice units so that site equality is exact.
//! Tetrahedral walks carry the physical length of one lattice unit
//! (`bond_length / √3`) for export.

use std::io::Write;

use crate::error::{Error, Result};

/// Integer lattice site. Square-lattice walks keep `z = 0`.
pub type Site = [i32; 3];

/// Square-lattice basis vectors indexed by absolute turn.
pub const SQUARE_DIRECTIONS: [Site; 4] = [[1, 0, 0], [0, 1, 0], [-1, 0, 0], [0, -1, 0]];

/// Tetrahedral direction tetrad used at even turn indices.
pub const TETRAHEDRAL_DIRECTIONS: [Site; 4] = [[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]];

/// Previous turn assumed when a relative square walk has no prefix, so that
/// relative digit 0 starts along `+x`.
pub const SQUARE_VIRTUAL_PREVIOUS: u8 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LatticeKind {
    Square,
    Tetrahedral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncodingMode {
    Absolute,
    Relative,
}

/// A turn encoding: which lattice, and whether digits name absolute
/// directions (radix 4) or index the non-backtracking successors of the
/// previous turn (radix 3).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct Encoding {
    pub lattice: LatticeKind,
    pub mode: EncodingMode,
}

impl Encoding {
    pub const fn new(lattice: LatticeKind, mode: EncodingMode) -> Self {
        Self { lattice, mode }
    }

    pub const fn radix(&self) -> u8 {
        match self.mode {
            EncodingMode::Absolute => 4,
            EncodingMode::Relative => 3,
        }
    }
}

/// Absolute turns pinned before the free digits.
#[derive(Debug, Clone, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct FixedPrefix(pub Vec<u8>);

impl FixedPrefix {
    /// The two-turn prefix used by every experiment: `+x` then `+y` on the
    /// square lattice, `D_0` then `−D_1` on the tetrahedral lattice.
    pub fn standard() -> Self {
        FixedPrefix(vec![0, 1])
    }

    pub fn empty() -> Self {
        FixedPrefix(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Walk {
    pub lattice: LatticeKind,
    /// `steps + 1` sites starting at the origin.
    pub positions: Vec<Site>,
    /// Absolute turns, prefix included.
    pub turns: Vec<u8>,
    /// Physical length (Å) of one integer lattice unit along an axis.
    pub unit_length: f64,
}

impl Walk {
    pub fn steps(&self) -> usize {
        self.turns.len()
    }

    pub fn last(&self) -> Site {
        *self.positions.last().expect("walk always holds the origin")
    }

    /// Writes `index,x,y[,z]` rows in Å.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        match self.lattice {
            LatticeKind::Square => writeln!(out, "index,x,y")?,
            LatticeKind::Tetrahedral => writeln!(out, "index,x,y,z")?,
        }
        for (i, p) in self.positions.iter().enumerate() {
            let [x, y, z] = p.map(|c| c as f64 * self.unit_length);
            match self.lattice {
                LatticeKind::Square => writeln!(out, "{i},{x},{y}")?,
                LatticeKind::Tetrahedral => writeln!(out, "{i},{x},{y},{z}")?,
            }
        }
        Ok(())
    }
}

/// Relative square-lattice digit to absolute turn: 0 turns left, 1 goes
/// straight, 2 turns right. Reversal is unreachable.
pub fn square_relative_to_absolute(previous: u8, relative: u8) -> u8 {
    (previous + 5 - relative) % 4
}

pub fn square_absolute_to_relative(previous: u8, absolute: u8) -> Option<u8> {
    let rel = (previous + 5 - absolute) % 4;
    (rel < 3).then_some(rel)
}

/// Relative tetrahedral digit to absolute turn. Equal consecutive absolute
/// turns backtrack on the tetrahedral lattice, so the three successors of
/// `previous` are the other three values in cyclic order.
pub fn tetrahedral_relative_to_absolute(previous: u8, relative: u8) -> u8 {
    (previous + 1 + relative) % 4
}

pub fn tetrahedral_absolute_to_relative(previous: u8, absolute: u8) -> Option<u8> {
    let rel = (absolute + 3 - previous) % 4;
    (rel < 3).then_some(rel)
}

fn check_digits(digits: &[u8], radix: u8) -> Result<()> {
    for (position, &digit) in digits.iter().enumerate() {
        if digit >= radix {
            return Err(Error::Encoding {
                digit,
                position,
                radix,
            });
        }
    }
    Ok(())
}

fn check_prefix(prefix: &FixedPrefix) -> Result<()> {
    check_digits(&prefix.0, 4)
}

/// Absolute turn sequence (prefix included) for a digit string.
pub fn absolute_turns(digits: &[u8], encoding: Encoding, prefix: &FixedPrefix) -> Result<Vec<u8>> {
    check_prefix(prefix)?;
    check_digits(digits, encoding.radix())?;
    let mut turns = Vec::with_capacity(prefix.len() + digits.len());
    turns.extend_from_slice(&prefix.0);
    match encoding.mode {
        EncodingMode::Absolute => turns.extend_from_slice(digits),
        EncodingMode::Relative => {
            let mut previous = match (prefix.0.last(), encoding.lattice) {
                (Some(&t), _) => t,
                (None, LatticeKind::Square) => SQUARE_VIRTUAL_PREVIOUS,
                (None, LatticeKind::Tetrahedral) if digits.is_empty() => 0,
                (None, LatticeKind::Tetrahedral) => {
                    return Err(Error::Precondition(
                        "relative tetrahedral digits need a prefix supplying the previous turn"
                            .into(),
                    ))
                }
            };
            for &d in digits {
                let t = match encoding.lattice {
                    LatticeKind::Square => square_relative_to_absolute(previous, d),
                    LatticeKind::Tetrahedral => tetrahedral_relative_to_absolute(previous, d),
                };
                turns.push(t);
                previous = t;
            }
        }
    }
    Ok(turns)
}

pub fn decode_square(digits: &[u8], encoding: Encoding, prefix: &FixedPrefix) -> Result<Walk> {
    if encoding.lattice != LatticeKind::Square {
        return Err(Error::Precondition("decode_square needs a square encoding".into()));
    }
    let turns = absolute_turns(digits, encoding, prefix)?;
    Ok(Walk {
        lattice: LatticeKind::Square,
        positions: square_positions(&turns),
        turns,
        unit_length: 1.0,
    })
}

pub fn decode_tetrahedral(
    digits: &[u8],
    encoding: Encoding,
    prefix: &FixedPrefix,
    bond_length: f64,
) -> Result<Walk> {
    if encoding.lattice != LatticeKind::Tetrahedral {
        return Err(Error::Precondition(
            "decode_tetrahedral needs a tetrahedral encoding".into(),
        ));
    }
    if !(bond_length > 0.0 && bond_length.is_finite()) {
        return Err(Error::Precondition(format!(
            "bond length must be positive, got {bond_length}"
        )));
    }
    let turns = absolute_turns(digits, encoding, prefix)?;
    Ok(Walk {
        lattice: LatticeKind::Tetrahedral,
        positions: tetrahedral_positions(&turns),
        turns,
        unit_length: bond_length / 3f64.sqrt(),
    })
}

pub(crate) fn square_positions(turns: &[u8]) -> Vec<Site> {
    let mut positions = Vec::with_capacity(turns.len() + 1);
    let mut here = [0, 0, 0];
    positions.push(here);
    for &t in turns {
        let d = SQUARE_DIRECTIONS[t as usize];
        here = [here[0] + d[0], here[1] + d[1], 0];
        positions.push(here);
    }
    positions
}

/// Step vector of turn `turn` taken at chain index `index`.
pub fn tetrahedral_step(index: usize, turn: u8) -> Site {
    let d = TETRAHEDRAL_DIRECTIONS[turn as usize];
    if index.is_multiple_of(2) {
        d
    } else {
        [-d[0], -d[1], -d[2]]
    }
}

/// Sites bonded to `site` on the tetrahedral lattice. Sites reached from the
/// origin after an even number of steps take the `D` tetrad outward, the
/// others take `−D`; the sublattice is read off the coordinate parity.
pub fn tetrahedral_neighbors(site: Site) -> [Site; 4] {
    let even = site[0].rem_euclid(2) == 0;
    TETRAHEDRAL_DIRECTIONS.map(|d| {
        if even {
            [site[0] + d[0], site[1] + d[1], site[2] + d[2]]
        } else {
            [site[0] - d[0], site[1] - d[1], site[2] - d[2]]
        }
    })
}

pub(crate) fn tetrahedral_positions(turns: &[u8]) -> Vec<Site> {
    let mut positions = Vec::with_capacity(turns.len() + 1);
    let mut here = [0, 0, 0];
    positions.push(here);
    for (i, &t) in turns.iter().enumerate() {
        let d = tetrahedral_step(i, t);
        here = [here[0] + d[0], here[1] + d[1], here[2] + d[2]];
        positions.push(here);
    }
    positions
}

/// Unordered pairs `i < j` of coinciding sites, not counting the
/// `(0, last)` pair so that closing a loop is free.
pub fn count_self_crossings(walk: &Walk) -> usize {
    crossings_of(&walk.positions)
}

pub(crate) fn crossings_of(positions: &[Site]) -> usize {
    let last = positions.len() - 1;
    let mut count = 0;
    for i in 0..positions.len() {
        for j in i + 1..positions.len() {
            if positions[i] == positions[j] && !(i == 0 && j == last) {
                count += 1;
            }
        }
    }
    count
}

/// Squared distance between the endpoints, in lattice units.
pub fn endpoint_distance_sq(walk: &Walk) -> i64 {
    distance_sq(walk.positions[0], walk.last())
}

pub fn distance_sq(a: Site, b: Site) -> i64 {
    (0..3)
        .map(|k| {
            let d = (a[k] - b[k]) as i64;
            d * d
        })
        .sum()
}

pub fn is_self_avoiding_loop(walk: &Walk) -> bool {
    count_self_crossings(walk) == 0 && endpoint_distance_sq(walk) == 0
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQ_ABS: Encoding = Encoding::new(LatticeKind::Square, EncodingMode::Absolute);
    const SQ_REL: Encoding = Encoding::new(LatticeKind::Square, EncodingMode::Relative);
    const TET_ABS: Encoding = Encoding::new(LatticeKind::Tetrahedral, EncodingMode::Absolute);
    const TET_REL: Encoding = Encoding::new(LatticeKind::Tetrahedral, EncodingMode::Relative);

    fn sq(digits: &[u8]) -> Walk {
        decode_square(digits, SQ_ABS, &FixedPrefix::empty()).unwrap()
    }

    fn xy(walk: &Walk) -> Vec<(i32, i32)> {
        walk.positions.iter().map(|p| (p[0], p[1])).collect()
    }

    #[test]
    fn straight_square_walk() {
        assert_eq!(xy(&sq(&[0, 0])), vec![(0, 0), (1, 0), (2, 0)]);
    }

    #[test]
    fn unit_square_closes() {
        let w = sq(&[0, 1, 2, 3]);
        assert_eq!(w.last(), [0, 0, 0]);
        assert_eq!(count_self_crossings(&w), 0);
        assert!(is_self_avoiding_loop(&w));
    }

    #[test]
    fn relative_zeros_turn_left() {
        let w = decode_square(&[0, 0, 0, 0], SQ_REL, &FixedPrefix::empty()).unwrap();
        assert_eq!(w.turns, vec![0, 1, 2, 3]);
        assert!(is_self_avoiding_loop(&w));
    }

    #[test]
    fn digit_out_of_range() {
        let err = decode_square(&[0, 3], SQ_REL, &FixedPrefix::empty()).unwrap_err();
        assert!(matches!(err, Error::Encoding { digit: 3, position: 1, radix: 3 }));
        assert!(decode_square(&[4], SQ_ABS, &FixedPrefix::empty()).is_err());
    }

    #[test]
    fn back_and_forth_crossings() {
        let w = sq(&[0, 2, 0, 2]);
        assert_eq!(count_self_crossings(&w), 3);
    }

    #[test]
    fn endpoint_distances() {
        assert_eq!(endpoint_distance_sq(&sq(&[0, 0])), 4);
        assert_eq!(endpoint_distance_sq(&sq(&[0, 1])), 2);
        assert_eq!(endpoint_distance_sq(&sq(&[0, 1, 2, 3])), 0);
    }

    #[test]
    fn loop_predicate_rejects() {
        assert!(!is_self_avoiding_loop(&sq(&[0, 0, 2, 2])));
        assert!(!is_self_avoiding_loop(&sq(&[0, 0, 1, 1])));
    }

    #[test]
    fn tetrahedral_table() {
        let expected = [[1, 2, 3], [2, 3, 0], [3, 0, 1], [0, 1, 2]];
        for prev in 0..4u8 {
            for rel in 0..3u8 {
                let abs = tetrahedral_relative_to_absolute(prev, rel);
                assert_eq!(abs, expected[prev as usize][rel as usize]);
                assert_eq!(tetrahedral_absolute_to_relative(prev, abs), Some(rel));
            }
            assert_eq!(tetrahedral_absolute_to_relative(prev, prev), None);
        }
        assert_eq!(tetrahedral_relative_to_absolute(0, 2), 3);
        assert_eq!(tetrahedral_relative_to_absolute(3, 0), 0);
    }

    #[test]
    fn square_table_inverts() {
        for prev in 0..4u8 {
            for rel in 0..3u8 {
                let abs = square_relative_to_absolute(prev, rel);
                assert_ne!(abs, (prev + 2) % 4);
                assert_eq!(square_absolute_to_relative(prev, abs), Some(rel));
            }
            assert_eq!(square_absolute_to_relative(prev, (prev + 2) % 4), None);
        }
    }

    #[test]
    fn tetrahedral_absolute_positions() {
        let w = decode_tetrahedral(&[0, 1], TET_ABS, &FixedPrefix::empty(), 3f64.sqrt()).unwrap();
        assert_eq!(w.positions, vec![[0, 0, 0], [1, 1, 1], [0, 2, 2]]);
        assert!((w.unit_length - 1.0).abs() < 1e-15);
    }

    #[test]
    fn tetrahedral_relative_needs_prefix() {
        let err = decode_tetrahedral(&[0], TET_REL, &FixedPrefix::empty(), 1.5).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
        assert!(decode_tetrahedral(&[0], TET_REL, &FixedPrefix::standard(), 1.5).is_ok());
        assert!(decode_tetrahedral(&[0], TET_REL, &FixedPrefix::standard(), 0.0).is_err());
    }

    #[test]
    fn tetrahedral_bond_lengths_constant() {
        let w = decode_tetrahedral(&[2, 0, 1, 2, 0], TET_REL, &FixedPrefix::standard(), 1.5).unwrap();
        for pair in w.positions.windows(2) {
            assert_eq!(distance_sq(pair[0], pair[1]), 3);
        }
        for (i, p) in w.positions.iter().enumerate().skip(1) {
            assert!(tetrahedral_neighbors(w.positions[i - 1]).contains(p));
        }
    }

    #[test]
    fn exports_csv_in_angstrom() {
        let w = decode_tetrahedral(&[0], TET_ABS, &FixedPrefix::empty(), 3f64.sqrt()).unwrap();
        let mut buf = Vec::new();
        w.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "index,x,y,z\n0,0,0,0\n1,1,1,1\n");
        let mut buf = Vec::new();
        sq(&[1]).write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "index,x,y\n0,0,0\n1,0,1\n");
    }
}
