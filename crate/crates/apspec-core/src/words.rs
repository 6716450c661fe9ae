//! Letters, alphabets and finite words.
//!
//! Letters are small indices into an [`Alphabet`]; words are index vectors.
//! Everything that later modules need from combinatorics on words lives
//! here: prefix/suffix tests, KMP occurrence listing, border tables.

use std::fmt;

use crate::error::{Error, Result};

pub type Letter = u8;

/// An ordered alphabet; the letter order is the lexicographic order used by
/// every "leftmost"/"lexicographically least" rule in the crate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alphabet {
    symbols: Vec<char>,
}

impl Alphabet {
    pub fn new(mut symbols: Vec<char>) -> Result<Self> {
        if symbols.is_empty() {
            return Err(Error::Invalid("alphabet must be nonempty".into()));
        }
        if symbols.len() > 250 {
            return Err(Error::Invalid("alphabet too large".into()));
        }
        let before = symbols.len();
        symbols.sort_unstable();
        symbols.dedup();
        if symbols.len() != before {
            return Err(Error::Invalid("duplicate symbols in alphabet".into()));
        }
        Ok(Alphabet { symbols })
    }

    /// The binary alphabet {a, b}.
    pub fn ab() -> Self {
        Alphabet { symbols: vec!['a', 'b'] }
    }

    pub fn size(&self) -> usize {
        self.symbols.len()
    }

    pub fn symbol(&self, l: Letter) -> char {
        self.symbols[l as usize]
    }

    pub fn letter_of(&self, c: char) -> Option<Letter> {
        self.symbols.iter().position(|&s| s == c).map(|i| i as Letter)
    }

    pub fn letters(&self) -> impl Iterator<Item = Letter> + '_ {
        (0..self.size() as u8).map(|l| l as Letter)
    }

    pub fn render(&self, w: &Word) -> String {
        if w.is_empty() {
            return "ε".to_string();
        }
        w.0.iter().map(|&l| self.symbol(l)).collect()
    }

    pub fn parse_word(&self, s: &str) -> Result<Word> {
        if s == "ε" {
            return Ok(Word::empty());
        }
        let mut letters = Vec::with_capacity(s.len());
        for (i, c) in s.chars().enumerate() {
            match self.letter_of(c) {
                Some(l) => letters.push(l),
                None => {
                    return Err(Error::Parse {
                        line: 1,
                        col: i + 1,
                        msg: format!("symbol '{c}' is not in the alphabet"),
                    })
                }
            }
        }
        Ok(Word(letters))
    }
}

/// A finite word over some alphabet (the alphabet travels separately).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Word(pub Vec<Letter>);

impl Word {
    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn letter(l: Letter) -> Self {
        Word(vec![l])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn push(&mut self, l: Letter) {
        self.0.push(l);
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Word(v)
    }

    pub fn repeat(&self, k: usize) -> Word {
        let mut v = Vec::with_capacity(self.len() * k);
        for _ in 0..k {
            v.extend_from_slice(&self.0);
        }
        Word(v)
    }

    /// The factor self[i..j].
    pub fn factor(&self, i: usize, j: usize) -> Word {
        Word(self.0[i..j].to_vec())
    }

    pub fn prefix(&self, n: usize) -> Word {
        self.factor(0, n)
    }

    pub fn is_prefix_of(&self, other: &Word) -> bool {
        other.0.len() >= self.0.len() && other.0[..self.0.len()] == self.0[..]
    }

    pub fn is_suffix_of(&self, other: &Word) -> bool {
        other.0.len() >= self.0.len() && other.0[other.0.len() - self.0.len()..] == self.0[..]
    }

    /// KMP failure table: fail[i] = length of the longest proper border of
    /// the prefix of length i+1.
    pub fn border_table(&self) -> Vec<usize> {
        let n = self.len();
        let mut fail = vec![0usize; n];
        let w = &self.0;
        let mut k = 0;
        for i in 1..n {
            while k > 0 && w[i] != w[k] {
                k = fail[k - 1];
            }
            if w[i] == w[k] {
                k += 1;
            }
            fail[i] = k;
        }
        fail
    }

    /// Length of the longest proper border (prefix that is also a suffix).
    pub fn longest_border(&self) -> usize {
        if self.is_empty() {
            return 0;
        }
        *self.border_table().last().unwrap()
    }

    /// Start positions of all (possibly overlapping) occurrences of
    /// `needle` in `self`.
    pub fn occurrences(&self, needle: &Word) -> Vec<usize> {
        let mut out = Vec::new();
        let m = needle.len();
        if m == 0 || m > self.len() {
            return out;
        }
        let fail = needle.border_table();
        let mut k = 0;
        for (i, &c) in self.0.iter().enumerate() {
            while k > 0 && c != needle.0[k] {
                k = fail[k - 1];
            }
            if c == needle.0[k] {
                k += 1;
            }
            if k == m {
                out.push(i + 1 - m);
                k = fail[k - 1];
            }
        }
        out
    }

    pub fn count_occurrences(&self, needle: &Word) -> usize {
        self.occurrences(needle).len()
    }
}

impl fmt::Display for Word {
    /// Debug-ish display with letters as indices; user-facing rendering goes
    /// through [`Alphabet::render`].
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return write!(f, "ε");
        }
        for l in &self.0 {
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &str) -> Word {
        Alphabet::ab().parse_word(s).unwrap()
    }

    #[test]
    fn alphabet_roundtrip() {
        let a = Alphabet::ab();
        assert_eq!(a.size(), 2);
        assert_eq!(a.render(&w("abba")), "abba");
        assert_eq!(a.render(&Word::empty()), "ε");
        assert!(a.parse_word("abc").is_err());
    }

    #[test]
    fn occurrences_allow_overlap() {
        let hay = w("baabaab");
        assert_eq!(hay.occurrences(&w("baab")), vec![0, 3]);
        assert_eq!(hay.count_occurrences(&w("aa")), 2);
        assert_eq!(w("aaaa").occurrences(&w("aa")), vec![0, 1, 2]);
    }

    #[test]
    fn borders() {
        assert_eq!(w("abaab").longest_border(), 2); // "ab"
        assert_eq!(w("aaaa").longest_border(), 3);
        assert_eq!(w("ab").longest_border(), 0);
        assert_eq!(w("baabaab").longest_border(), 4); // "baab"
    }

    #[test]
    fn prefix_suffix() {
        assert!(w("ab").is_prefix_of(&w("abaab")));
        assert!(w("ab").is_suffix_of(&w("abaab")));
        assert!(!w("ba").is_prefix_of(&w("abaab")));
    }
}
