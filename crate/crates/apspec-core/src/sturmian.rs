//! Sturmian slopes given by continued-fraction expansions, their standard
//! words, and an independent rotation-coding generator used to cross-check
//! the combinatorial construction.

use crate::error::{Error, Result};
use crate::words::{Alphabet, Letter, Word};

const A: Letter = 0;
const B: Letter = 1;

/// How to continue the partial-quotient list beyond the explicit entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tail {
    /// Repeat the explicit block cyclically (quadratic irrational slopes).
    Cycle,
    /// Repeat the last quotient forever.
    RepeatLast,
}

/// An irrational slope theta = [0; a_1, a_2, ...] in (0, 1); theta is the
/// frequency of the letter 'a'.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SturmianSlope {
    quotients: Vec<u32>,
    tail: Tail,
}

impl SturmianSlope {
    pub fn new(quotients: Vec<u32>, tail: Tail) -> Result<Self> {
        if quotients.is_empty() {
            return Err(Error::Invalid("need at least one partial quotient".into()));
        }
        if quotients.iter().any(|&a| a == 0) {
            return Err(Error::Invalid("partial quotients must be positive".into()));
        }
        Ok(SturmianSlope { quotients, tail })
    }

    /// The golden slope [0; 1, 1, 1, ...], frequency 1/tau.
    pub fn golden() -> Self {
        SturmianSlope { quotients: vec![1], tail: Tail::Cycle }
    }

    /// The slope [0; 2, 2, 2, ...] = sqrt(2) - 1.
    pub fn silver() -> Self {
        SturmianSlope { quotients: vec![2], tail: Tail::Cycle }
    }

    /// The slope [0; 1, 2, 4, 8, ...] with `count` explicit quotients;
    /// the arithmetically long power runs of its standard words are what
    /// the order-divergence tests exercise.
    pub fn powers_of_two(count: usize) -> Self {
        let quotients = (0..count.max(1)).map(|k| 1u32 << k.min(30)).collect();
        SturmianSlope { quotients, tail: Tail::RepeatLast }
    }

    /// a_i for i >= 1.
    pub fn quotient(&self, i: usize) -> u32 {
        debug_assert!(i >= 1);
        let n = self.quotients.len();
        if i <= n {
            self.quotients[i - 1]
        } else {
            match self.tail {
                Tail::Cycle => self.quotients[(i - 1) % n],
                Tail::RepeatLast => self.quotients[n - 1],
            }
        }
    }

    pub fn explicit_quotients(&self) -> &[u32] {
        &self.quotients
    }

    /// Rendering of the quotient list with its tail convention, e.g.
    /// "1, 2, 4, 8, last...".
    pub fn describe_quotients(&self) -> String {
        let body = self
            .quotients
            .iter()
            .map(|a| a.to_string())
            .collect::<Vec<_>>()
            .join(", ");
        match self.tail {
            Tail::Cycle => format!("{body}, cycle..."),
            Tail::RepeatLast => format!("{body}, last..."),
        }
    }

    /// Convergents p_k/q_k of [0; a_1, a_2, ...] until q >= min_q (or until
    /// i128 would overflow, whichever is first). Returns (p, q).
    pub fn convergent(&self, min_q: i128) -> (i128, i128) {
        let (mut p0, mut q0) = (1i128, 0i128); // p_{-1}/q_{-1}
        let (mut p1, mut q1) = (0i128, 1i128); // p_0/q_0
        let mut i = 1;
        loop {
            let a = self.quotient(i) as i128;
            let (Some(ap), Some(aq)) = (a.checked_mul(p1), a.checked_mul(q1)) else {
                return (p1, q1);
            };
            let (Some(p2), Some(q2)) = (ap.checked_add(p0), aq.checked_add(q0)) else {
                return (p1, q1);
            };
            (p0, q0, p1, q1) = (p1, q1, p2, q2);
            if q1 >= min_q {
                return (p1, q1);
            }
            i += 1;
        }
    }

    pub fn theta(&self) -> f64 {
        let (p, q) = self.convergent(1_000_000_000);
        p as f64 / q as f64
    }

    /// Standard words s_{-1} = a, s_0 = b, s_1 = s_0^{a_1 - 1} s_{-1},
    /// s_k = s_{k-1}^{a_k} s_{k-2}; returns s_1 ..= s_count.
    pub fn standard_words(&self, count: usize) -> Vec<Word> {
        let mut out = Vec::with_capacity(count);
        let mut prev = Word::letter(A); // s_{-1}
        let mut cur = Word::letter(B); // s_0
        for k in 1..=count {
            let a = self.quotient(k) as usize;
            let reps = if k == 1 { a - 1 } else { a };
            let mut next = cur.repeat(reps);
            next = next.concat(&prev);
            prev = cur;
            cur = next;
            out.push(cur.clone());
        }
        out
    }

    /// A prefix of the characteristic word of length >= min_len
    /// (truncated to exactly min_len letters). Each s_k with k >= 1 is a
    /// prefix of the limit word, so iterating until the length suffices is
    /// enough; s_0 = "b" is not a prefix, hence the k <= 1 clause.
    pub fn characteristic_prefix(&self, min_len: usize) -> Word {
        let mut prev = Word::letter(A); // s_{-1}
        let mut cur = Word::letter(B); // s_0
        let mut k = 1;
        while k <= 1 || cur.len() < min_len {
            let a = self.quotient(k) as usize;
            let reps = if k == 1 { a - 1 } else { a };
            let next = cur.repeat(reps).concat(&prev);
            prev = std::mem::replace(&mut cur, next);
            k += 1;
        }
        cur.0.truncate(min_len.min(cur.len()));
        cur
    }

    /// Independent generator: the rotation coding c(n) = floor((n+1)theta) -
    /// floor(n theta) for n = 1..len, letter 'a' for 1. Computed twice with
    /// successive convergents p/q (q >= 10^6) in exact integer arithmetic;
    /// the codings must agree, otherwise a deeper convergent is taken.
    pub fn rotation_coding(&self, len: usize) -> Result<Word> {
        let mut min_q = 1_000_000i128.max(100 * len as i128);
        for _ in 0..6 {
            let (p1, q1) = self.convergent(min_q);
            let (p2, q2) = self.convergent(q1 + 1);
            if q2 == q1 {
                // convergents exhausted i128; fall back to a single coding
                return Ok(code_with(p1, q1, len));
            }
            let w1 = code_with(p1, q1, len);
            let w2 = code_with(p2, q2, len);
            if w1 == w2 {
                return Ok(w1);
            }
            min_q = q2 + 1;
        }
        Err(Error::Numeric(
            "rotation coding did not stabilize across convergents".into(),
        ))
    }

    pub fn alphabet(&self) -> Alphabet {
        Alphabet::ab()
    }
}

fn code_with(p: i128, q: i128, len: usize) -> Word {
    // c(n) = floor((n+1)p/q) - floor(np/q)
    let mut w = Vec::with_capacity(len);
    for n in 1..=(len as i128) {
        let c = (n + 1) * p / q - n * p / q;
        w.push(if c == 1 { A } else { B });
    }
    Word(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::substitution::Substitution;

    #[test]
    fn golden_standard_words_are_fibonacci() {
        let s = SturmianSlope::golden();
        let ab = Alphabet::ab();
        let words: Vec<String> = s
            .standard_words(4)
            .iter()
            .map(|w| ab.render(w))
            .collect();
        assert_eq!(words, ["a", "ab", "aba", "abaab"]);
    }

    #[test]
    fn golden_theta_is_inverse_golden_ratio() {
        let tau = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((SturmianSlope::golden().theta() - 1.0 / tau).abs() < 1e-12);
        assert!((SturmianSlope::silver().theta() - (2f64.sqrt() - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn rotation_coding_matches_standard_prefix_on_golden() {
        let s = SturmianSlope::golden();
        let coded = s.rotation_coding(2000).unwrap();
        let built = s.characteristic_prefix(2000);
        assert_eq!(coded, built);
    }

    #[test]
    fn rotation_coding_matches_standard_prefix_on_silver() {
        let s = SturmianSlope::silver();
        let coded = s.rotation_coding(2000).unwrap();
        let built = s.characteristic_prefix(2000);
        assert_eq!(coded, built);
    }

    #[test]
    fn golden_prefix_is_fibonacci_fixed_point() {
        let f = Substitution::fibonacci().expand(0, 14);
        let c = SturmianSlope::golden().characteristic_prefix(300);
        assert_eq!(c.0[..300], f.0[..300]);
    }

    #[test]
    fn powers_of_two_quotients() {
        let s = SturmianSlope::powers_of_two(6);
        assert_eq!(
            (1..=6).map(|i| s.quotient(i)).collect::<Vec<_>>(),
            [1, 2, 4, 8, 16, 32]
        );
        let q2 = s.standard_words(3);
        // s_1 = a, s_2 = a^2 b? no: s_1 = b^0 a = a, s_2 = s_1^2 s_0 = aab,
        // s_3 = s_2^4 s_1 = (aab)^4 a, of length 13
        let ab = Alphabet::ab();
        assert_eq!(ab.render(&q2[0]), "a");
        assert_eq!(ab.render(&q2[1]), "aab");
        assert_eq!(q2[2].len(), 13);
        assert_eq!(ab.render(&q2[2]), "aabaabaabaaba");
    }
}
