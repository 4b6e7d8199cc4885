//! Sign sequences: the cell identifiers of the canonical polyhedral complex.
//!
//! A sign sequence records, for every node map of the network, whether the map is
//! negative (`-1`), zero (`0`) or positive (`+1`) on a cell. Entries are packed two
//! bits each, most significant first, with codes `-1 -> 00`, `0 -> 01`, `+1 -> 10`,
//! so comparing the packed words lexicographically is the same as comparing the
//! sequences lexicographically under `-1 < 0 < +1`.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use smallvec::SmallVec;

use crate::error::{Error, Result};

const PER_WORD: usize = 32;
const LOW_BITS: u64 = 0x5555_5555_5555_5555;

#[inline]
fn encode(sign: i8) -> u64 {
    debug_assert!((-1..=1).contains(&sign));
    (sign + 1) as u64
}

#[inline]
fn decode(code: u64) -> i8 {
    code as i8 - 1
}

#[inline]
fn slot(index: usize) -> (usize, u32) {
    (index / PER_WORD, (62 - 2 * (index % PER_WORD)) as u32)
}

/// Mask with both bits set in every slot whose entry is zero.
#[inline]
fn zero_slots(word: u64) -> u64 {
    let lo = word & LOW_BITS;
    let hi = (word >> 1) & LOW_BITS;
    let zero = lo & !hi;
    zero | (zero << 1)
}

/// A vector over `{-1, 0, +1}`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct SignSequence {
    len: usize,
    words: SmallVec<[u64; 2]>,
}

impl SignSequence {
    /// Sequence of the given length with every entry equal to `sign`.
    pub fn filled(len: usize, sign: i8) -> Self {
        let mut seq = SignSequence { len, words: SmallVec::from_elem(0, len.div_ceil(PER_WORD)) };
        for i in 0..len {
            seq.set(i, sign);
        }
        seq
    }

    /// Builds a sequence from explicit entries; every entry must be in `{-1, 0, 1}`.
    pub fn from_signs(signs: &[i8]) -> Result<Self> {
        if let Some(bad) = signs.iter().find(|s| !(-1..=1).contains(*s)) {
            return Err(Error::SignParse(format!("entry {bad} is not a sign")));
        }
        let mut seq = SignSequence::filled(signs.len(), -1);
        for (i, &s) in signs.iter().enumerate() {
            seq.set(i, s);
        }
        Ok(seq)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, index: usize) -> i8 {
        assert!(index < self.len, "sign index {index} out of range {}", self.len);
        let (w, shift) = slot(index);
        decode((self.words[w] >> shift) & 0b11)
    }

    #[inline]
    pub fn set(&mut self, index: usize, sign: i8) {
        assert!(index < self.len, "sign index {index} out of range {}", self.len);
        let (w, shift) = slot(index);
        self.words[w] = (self.words[w] & !(0b11 << shift)) | (encode(sign) << shift);
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = i8> + '_ {
        (0..self.len).map(|i| self.get(i))
    }

    pub fn to_vec(&self) -> Vec<i8> {
        self.iter().collect()
    }

    /// Number of zero entries. For a generic supertransversal network this is the
    /// codimension of the cell.
    pub fn codimension(&self) -> usize {
        self.words.iter().map(|&w| (zero_slots(w) & LOW_BITS).count_ones() as usize).sum()
    }

    /// Indices of the zero entries, ascending.
    pub fn zero_positions(&self) -> Vec<usize> {
        (0..self.len).filter(|&i| self.get(i) == 0).collect()
    }

    /// True when no entry is zero.
    pub fn is_full(&self) -> bool {
        self.codimension() == 0
    }

    fn check_len(&self, other: &SignSequence) -> Result<()> {
        if self.len != other.len {
            return Err(Error::LengthMismatch { left: self.len, right: other.len });
        }
        Ok(())
    }

    /// The face product: take `self` where it is nonzero, otherwise `other`.
    pub fn product(&self, other: &SignSequence) -> Result<SignSequence> {
        self.check_len(other)?;
        Ok(self.compose(other))
    }

    /// [`product`](Self::product) for sequences already known to have equal length.
    pub fn compose(&self, other: &SignSequence) -> SignSequence {
        debug_assert_eq!(self.len, other.len);
        let words = self
            .words
            .iter()
            .zip(&other.words)
            .map(|(&a, &b)| {
                let m = zero_slots(a);
                (a & !m) | (b & m)
            })
            .collect();
        SignSequence { len: self.len, words }
    }

    /// `self` is a face of `other`, i.e. `self · other == other`.
    pub fn is_face(&self, other: &SignSequence) -> Result<bool> {
        self.check_len(other)?;
        Ok(self.is_face_of(other))
    }

    /// [`is_face`](Self::is_face) without the length check.
    pub fn is_face_of(&self, other: &SignSequence) -> bool {
        debug_assert_eq!(self.len, other.len);
        self.words.iter().zip(&other.words).all(|(&a, &b)| {
            let nonzero = !zero_slots(a);
            (a & nonzero) == (b & nonzero)
        })
    }

    /// Every zero of `other` is also a zero of `self`.
    pub fn zeros_contain(&self, other: &SignSequence) -> bool {
        debug_assert_eq!(self.len, other.len);
        self.words.iter().zip(&other.words).all(|(&a, &b)| zero_slots(b) & !zero_slots(a) == 0)
    }

    /// True when some coordinate carries opposite nonzero signs in the two sequences.
    pub fn conflicts_with(&self, other: &SignSequence) -> bool {
        debug_assert_eq!(self.len, other.len);
        self.words.iter().zip(&other.words).any(|(&a, &b)| {
            let both = !zero_slots(a) & !zero_slots(b);
            (a ^ b) & both != 0
        })
    }

    /// All sequences obtained by replacing exactly one zero with `+1` or `-1`.
    pub fn coface_candidates(&self) -> Vec<SignSequence> {
        let mut out = Vec::with_capacity(2 * self.codimension());
        for i in self.zero_positions() {
            for s in [1, -1] {
                let mut c = self.clone();
                c.set(i, s);
                out.push(c);
            }
        }
        out
    }

    /// All sequences obtained by replacing exactly one nonzero entry with zero.
    pub fn facet_candidates(&self) -> impl Iterator<Item = SignSequence> + '_ {
        (0..self.len).filter(|&i| self.get(i) != 0).map(move |i| {
            let mut c = self.clone();
            c.set(i, 0);
            c
        })
    }

    /// The first `len` entries.
    pub fn prefix(&self, len: usize) -> SignSequence {
        assert!(len <= self.len);
        let mut seq = SignSequence::filled(len, -1);
        for i in 0..len {
            seq.set(i, self.get(i));
        }
        seq
    }

    /// A copy with `tail` appended.
    pub fn extended(&self, tail: &[i8]) -> SignSequence {
        let mut seq = SignSequence::filled(self.len + tail.len(), -1);
        for i in 0..self.len {
            seq.set(i, self.get(i));
        }
        for (k, &s) in tail.iter().enumerate() {
            seq.set(self.len + k, s);
        }
        seq
    }
}

impl Ord for SignSequence {
    fn cmp(&self, other: &Self) -> Ordering {
        self.words.iter().cmp(other.words.iter()).then(self.len.cmp(&other.len))
    }
}

impl PartialOrd for SignSequence {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for SignSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, s) in self.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{s}")?;
        }
        f.write_str(")")
    }
}

impl fmt::Debug for SignSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for SignSequence {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let inner = s
            .trim()
            .strip_prefix('(')
            .and_then(|t| t.strip_suffix(')'))
            .ok_or_else(|| Error::SignParse(s.to_string()))?;
        if inner.trim().is_empty() {
            return Ok(SignSequence::filled(0, 0));
        }
        let signs = inner
            .split(',')
            .map(|t| t.trim().parse::<i8>().map_err(|_| Error::SignParse(s.to_string())))
            .collect::<Result<Vec<_>>>()?;
        SignSequence::from_signs(&signs).map_err(|_| Error::SignParse(s.to_string()))
    }
}

impl Serialize for SignSequence {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SignSequence {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
