//! Language oracles: factor membership, right extensions and complexity
//! counts for substitutive, Sturmian, periodic, full-shift and edge-shift
//! languages.
//!
//! Concrete languages are represented by a long generator prefix indexed by
//! a suffix automaton. The prefix is grown until the per-length distinct
//! factor counts stop changing between two doublings, which for linearly
//! recurrent inputs (primitive substitutions, bounded-quotient Sturmian
//! words) guarantees the counts equal the subshift complexity up to the
//! requested length.

use crate::error::{Error, Result};
use crate::sturmian::SturmianSlope;
use crate::substitution::Substitution;
use crate::words::{Alphabet, Letter, Word};

/// Suffix automaton over letters; linear construction, O(1) amortized
/// transition lookup for tiny alphabets.
#[derive(Debug, Clone)]
pub struct SuffixAutomaton {
    states: Vec<SamState>,
    last: usize,
}

#[derive(Debug, Clone)]
struct SamState {
    len: u32,
    link: i32,
    next: Vec<(Letter, u32)>,
}

impl SuffixAutomaton {
    pub fn from_word(w: &Word) -> Self {
        let mut sam = SuffixAutomaton {
            states: vec![SamState { len: 0, link: -1, next: Vec::new() }],
            last: 0,
        };
        for &c in &w.0 {
            sam.extend(c);
        }
        sam
    }

    fn trans(&self, s: usize, c: Letter) -> Option<usize> {
        self.states[s]
            .next
            .iter()
            .find(|&&(l, _)| l == c)
            .map(|&(_, t)| t as usize)
    }

    fn set_trans(&mut self, s: usize, c: Letter, t: usize) {
        match self.states[s].next.iter_mut().find(|(l, _)| *l == c) {
            Some(entry) => entry.1 = t as u32,
            None => self.states[s].next.push((c, t as u32)),
        }
    }

    fn extend(&mut self, c: Letter) {
        let cur = self.states.len();
        let cur_len = self.states[self.last].len + 1;
        self.states.push(SamState { len: cur_len, link: 0, next: Vec::new() });
        let mut p = self.last as i32;
        while p >= 0 && self.trans(p as usize, c).is_none() {
            self.set_trans(p as usize, c, cur);
            p = self.states[p as usize].link;
        }
        if p < 0 {
            self.states[cur].link = 0;
        } else {
            let q = self.trans(p as usize, c).unwrap();
            if self.states[q].len == self.states[p as usize].len + 1 {
                self.states[cur].link = q as i32;
            } else {
                let clone = self.states.len();
                let mut cl = self.states[q].clone();
                cl.len = self.states[p as usize].len + 1;
                self.states.push(cl);
                while p >= 0 && self.trans(p as usize, c) == Some(q) {
                    self.set_trans(p as usize, c, clone);
                    p = self.states[p as usize].link;
                }
                self.states[q].link = clone as i32;
                self.states[cur].link = clone as i32;
            }
        }
        self.last = cur;
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn step(&self, state: usize, c: Letter) -> Option<usize> {
        self.trans(state, c)
    }

    pub fn walk(&self, w: &Word) -> Option<usize> {
        let mut s = 0;
        for &c in &w.0 {
            s = self.step(s, c)?;
        }
        Some(s)
    }

    pub fn contains(&self, w: &Word) -> bool {
        self.walk(w).is_some()
    }

    /// Letters x such that state has an outgoing x-transition, sorted.
    pub fn extensions(&self, state: usize) -> Vec<Letter> {
        let mut out: Vec<Letter> = self.states[state].next.iter().map(|&(l, _)| l).collect();
        out.sort_unstable();
        out
    }

    /// Number of distinct factors of each length 1..=max_len of the indexed
    /// word, via the [minlen, len] interval decomposition of the states.
    pub fn distinct_counts(&self, max_len: usize) -> Vec<u64> {
        let mut diff = vec![0i64; max_len + 2];
        for (i, st) in self.states.iter().enumerate() {
            if i == 0 {
                continue;
            }
            let hi = st.len as usize;
            let lo = if st.link >= 0 {
                self.states[st.link as usize].len as usize + 1
            } else {
                1
            };
            let lo = lo.min(max_len + 1);
            let hi = hi.min(max_len);
            if lo > hi {
                continue;
            }
            diff[lo] += 1;
            diff[hi + 1] -= 1;
        }
        let mut out = Vec::with_capacity(max_len);
        let mut acc = 0i64;
        for item in diff.iter().take(max_len + 1).skip(1) {
            acc += item;
            out.push(acc as u64);
        }
        out
    }
}

/// Edge-shift data: the subshift of finite type whose letters are edge ids
/// and whose admissible transitions are path compositions. Path spaces of
/// substitution graphs are exactly these.
#[derive(Debug, Clone)]
pub struct EdgeShift {
    pub letters: usize,
    /// can_follow[e][f]: may f come right after e?
    pub can_follow: Vec<Vec<bool>>,
}

#[derive(Debug, Clone)]
enum Source {
    Substitution(Substitution),
    Sturmian(SturmianSlope),
    Periodic(Word),
    FullShift,
    EdgeShift(EdgeShift),
}

/// Membership, extension and counting oracle for a subshift language.
#[derive(Debug, Clone)]
pub struct LanguageOracle {
    source: Source,
    alphabet: Alphabet,
    max_len: usize,
    generator: Option<Word>,
    sam: Option<SuffixAutomaton>,
}

/// Cursor for incremental descent through the language (tree building,
/// first-return searches). Cheap to copy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cursor {
    Sam(u32),
    Edge(Option<Letter>),
    Full,
}

impl LanguageOracle {
    /// Oracle for the subshift of a primitive substitution; factor data is
    /// reliable up to length `max_len`.
    pub fn from_substitution(sub: &Substitution, max_len: usize) -> Result<Self> {
        sub.require_primitive()?;
        let max_len = max_len.max(2);
        // Find a letter l and power m with sigma^m(l) starting with l, so
        // iterating sigma^m yields nested prefixes of a fixed point.
        let (l_star, m) = first_letter_cycle(sub);
        let mut cap = (24 * max_len).max(4096);
        for _round in 0..8 {
            let w1 = grow_prefix(sub, l_star, m, cap);
            let w2 = grow_prefix(sub, l_star, m, 2 * cap);
            let s1 = SuffixAutomaton::from_word(&w1);
            let s2 = SuffixAutomaton::from_word(&w2);
            if s1.distinct_counts(max_len) == s2.distinct_counts(max_len) {
                return Ok(LanguageOracle {
                    source: Source::Substitution(sub.clone()),
                    alphabet: sub.alphabet().clone(),
                    max_len,
                    generator: Some(w2),
                    sam: Some(s2),
                });
            }
            cap *= 2;
        }
        Err(Error::Numeric(
            "factor counts failed to stabilize; substitution may not be linearly recurrent".into(),
        ))
    }

    pub fn from_sturmian(slope: &SturmianSlope, max_len: usize) -> Result<Self> {
        let max_len = max_len.max(2);
        let mut cap = (24 * max_len).max(4096);
        for _round in 0..8 {
            let w1 = slope.characteristic_prefix(cap);
            let w2 = slope.characteristic_prefix(2 * cap);
            let s1 = SuffixAutomaton::from_word(&w1);
            let s2 = SuffixAutomaton::from_word(&w2);
            if s1.distinct_counts(max_len) == s2.distinct_counts(max_len) {
                return Ok(LanguageOracle {
                    source: Source::Sturmian(slope.clone()),
                    alphabet: slope.alphabet(),
                    max_len,
                    generator: Some(w2),
                    sam: Some(s2),
                });
            }
            cap *= 2;
        }
        Err(Error::Numeric("Sturmian factor counts failed to stabilize".into()))
    }

    /// The language of the periodic word w^infinity (all rotations).
    pub fn periodic(alphabet: Alphabet, w: &Word, max_len: usize) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::Invalid("periodic word must be nonempty".into()));
        }
        let max_len = max_len.max(2);
        let reps = (3 * max_len + 10).div_ceil(w.len());
        let gen = w.repeat(reps);
        let sam = SuffixAutomaton::from_word(&gen);
        Ok(LanguageOracle {
            source: Source::Periodic(w.clone()),
            alphabet,
            max_len,
            generator: Some(gen),
            sam: Some(sam),
        })
    }

    pub fn full_shift(alphabet: Alphabet) -> Self {
        LanguageOracle {
            source: Source::FullShift,
            alphabet,
            max_len: usize::MAX,
            generator: None,
            sam: None,
        }
    }

    /// Edge shift over `letters` edge ids with the given follower relation.
    /// The alphabet symbols are synthetic single characters.
    pub fn edge_shift(shift: EdgeShift) -> Result<Self> {
        let symbols: Vec<char> = (0..shift.letters)
            .map(|i| char::from_u32('0' as u32 + i as u32).unwrap_or('?'))
            .collect();
        let alphabet = Alphabet::new(symbols)?;
        Ok(LanguageOracle {
            source: Source::EdgeShift(shift),
            alphabet,
            max_len: usize::MAX,
            generator: None,
            sam: None,
        })
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    /// Human-readable description of the underlying system, for reports.
    pub fn describe(&self) -> String {
        match &self.source {
            Source::Substitution(sub) => format!("substitution {}", sub.render_inline()),
            Source::Sturmian(slope) => {
                format!("sturmian slope [0; {}]", slope.describe_quotients())
            }
            Source::Periodic(w) => format!("periodic word {}", self.alphabet.render(w)),
            Source::FullShift => format!("full shift on {} letters", self.alphabet.size()),
            Source::EdgeShift(es) => format!("edge shift on {} edges", es.letters),
        }
    }

    /// Largest factor length for which counts are certified.
    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn generator(&self) -> Option<&Word> {
        self.generator.as_ref()
    }

    pub fn cursor_root(&self) -> Cursor {
        match &self.source {
            Source::FullShift => Cursor::Full,
            Source::EdgeShift(_) => Cursor::Edge(None),
            _ => Cursor::Sam(self.sam.as_ref().unwrap().root() as u32),
        }
    }

    pub fn cursor_step(&self, cur: Cursor, c: Letter) -> Option<Cursor> {
        match (&self.source, cur) {
            (Source::FullShift, Cursor::Full) => {
                ((c as usize) < self.alphabet.size()).then_some(Cursor::Full)
            }
            (Source::EdgeShift(es), Cursor::Edge(prev)) => {
                if (c as usize) >= es.letters {
                    return None;
                }
                match prev {
                    None => Some(Cursor::Edge(Some(c))),
                    Some(p) => es.can_follow[p as usize][c as usize]
                        .then_some(Cursor::Edge(Some(c))),
                }
            }
            (_, Cursor::Sam(s)) => self
                .sam
                .as_ref()
                .unwrap()
                .step(s as usize, c)
                .map(|t| Cursor::Sam(t as u32)),
            _ => None,
        }
    }

    /// Sorted letters by which the word at `cur` extends in the language.
    pub fn cursor_extensions(&self, cur: Cursor) -> Vec<Letter> {
        match (&self.source, cur) {
            (Source::FullShift, Cursor::Full) => (0..self.alphabet.size() as u8).collect(),
            (Source::EdgeShift(es), Cursor::Edge(prev)) => match prev {
                None => (0..es.letters as u8).collect(),
                Some(p) => (0..es.letters as u8)
                    .filter(|&f| es.can_follow[p as usize][f as usize])
                    .collect(),
            },
            (_, Cursor::Sam(s)) => self.sam.as_ref().unwrap().extensions(s as usize),
            _ => Vec::new(),
        }
    }

    pub fn contains(&self, w: &Word) -> bool {
        let mut cur = self.cursor_root();
        for &c in &w.0 {
            match self.cursor_step(cur, c) {
                Some(next) => cur = next,
                None => return false,
            }
        }
        true
    }

    pub fn right_extensions(&self, w: &Word) -> Vec<Letter> {
        let mut cur = self.cursor_root();
        for &c in &w.0 {
            match self.cursor_step(cur, c) {
                Some(next) => cur = next,
                None => return Vec::new(),
            }
        }
        self.cursor_extensions(cur)
    }

    /// p(1..=n). For concrete languages this requires n <= max_len.
    pub fn complexity(&self, n: usize) -> Result<Vec<u64>> {
        match &self.source {
            Source::FullShift => {
                let k = self.alphabet.size() as u64;
                let mut out = Vec::with_capacity(n);
                let mut acc = 1u64;
                for _ in 0..n {
                    acc = acc.saturating_mul(k);
                    out.push(acc);
                }
                Ok(out)
            }
            Source::EdgeShift(es) => {
                // path counts by boolean-weighted adjacency powers
                let k = es.letters;
                let mut counts = Vec::with_capacity(n);
                let mut cur = vec![1u64; k]; // paths of length 1 ending at edge e
                counts.push(k as u64);
                for _ in 1..n {
                    let mut next = vec![0u64; k];
                    for e in 0..k {
                        for (f, nf) in next.iter_mut().enumerate() {
                            if es.can_follow[e][f] {
                                *nf = nf.saturating_add(cur[e]);
                            }
                        }
                    }
                    counts.push(next.iter().sum());
                    cur = next;
                }
                Ok(counts)
            }
            _ => {
                if n > self.max_len {
                    return Err(Error::InsufficientDepth {
                        what: "complexity".into(),
                        need: n,
                        got: self.max_len,
                    });
                }
                Ok(self.sam.as_ref().unwrap().distinct_counts(n))
            }
        }
    }

    /// All factors of length n, lexicographically sorted.
    pub fn factors(&self, n: usize) -> Result<Vec<Word>> {
        let mut out = Vec::new();
        let mut word = Word::empty();
        self.factors_rec(self.cursor_root(), &mut word, n, &mut out)?;
        Ok(out)
    }

    fn factors_rec(
        &self,
        cur: Cursor,
        word: &mut Word,
        n: usize,
        out: &mut Vec<Word>,
    ) -> Result<()> {
        if word.len() == n {
            out.push(word.clone());
            return Ok(());
        }
        if out.len() > 4_000_000 {
            return Err(Error::Invalid("factor enumeration too large".into()));
        }
        for c in self.cursor_extensions(cur) {
            let next = self.cursor_step(cur, c).expect("extension must step");
            word.push(c);
            self.factors_rec(next, word, n, out)?;
            word.0.pop();
        }
        Ok(())
    }

    /// Factors of length n with at least two right extensions.
    pub fn right_special(&self, n: usize) -> Result<Vec<Word>> {
        Ok(self
            .factors(n)?
            .into_iter()
            .filter(|w| self.right_extensions(w).len() >= 2)
            .collect())
    }
}

/// Follow the first-letter map l -> image(l)[0] from letter 0 into its
/// cycle; returns (cycle letter, cycle length).
fn first_letter_cycle(sub: &Substitution) -> (Letter, usize) {
    let k = sub.alphabet().size();
    let f = |l: Letter| sub.image(l).0[0];
    let mut seen = vec![usize::MAX; k];
    let mut l = 0u8;
    let mut step = 0usize;
    loop {
        if seen[l as usize] != usize::MAX {
            let m = step - seen[l as usize];
            return (l, m.max(1));
        }
        seen[l as usize] = step;
        l = f(l);
        step += 1;
    }
}

/// Iterate sigma^m from l_star, truncating to `cap`; returns a prefix of the
/// sigma^m fixed point starting with l_star, of length cap (or the full
/// fixed word if it is literally finite, i.e. the expansion is length 1).
fn grow_prefix(sub: &Substitution, l_star: Letter, m: usize, cap: usize) -> Word {
    let mut w = Word::letter(l_star);
    loop {
        let before = w.len();
        let mut next = w.clone();
        for _ in 0..m {
            next = sub.apply(&next);
            if next.len() > cap {
                next.0.truncate(cap);
            }
        }
        w = next;
        if w.len() >= cap || w.len() == before {
            // stalled length means a literally periodic fixed word: repeat it
            if w.len() < cap && w.len() == before {
                let reps = cap.div_ceil(w.len());
                let mut rep = w.repeat(reps);
                rep.0.truncate(cap);
                return rep;
            }
            return w;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fib_oracle(n: usize) -> LanguageOracle {
        LanguageOracle::from_substitution(&Substitution::fibonacci(), n).unwrap()
    }

    #[test]
    fn fibonacci_complexity_is_n_plus_one() {
        let o = fib_oracle(50);
        let p = o.complexity(50).unwrap();
        for (i, &pn) in p.iter().enumerate() {
            assert_eq!(pn, (i + 2) as u64, "p({}) should be {}", i + 1, i + 2);
        }
    }

    #[test]
    fn fibonacci_factors_of_length_two() {
        let o = fib_oracle(10);
        let ab = o.alphabet().clone();
        let f: Vec<String> = o.factors(2).unwrap().iter().map(|w| ab.render(w)).collect();
        assert_eq!(f, ["aa", "ab", "ba"]); // no bb in the Fibonacci language
    }

    #[test]
    fn fibonacci_has_one_right_special_factor_per_length() {
        let o = fib_oracle(12);
        for n in 1..=10 {
            let rs = o.right_special(n).unwrap();
            assert_eq!(rs.len(), 1, "length {n}");
        }
    }

    #[test]
    fn membership_and_extensions() {
        let o = fib_oracle(20);
        let ab = o.alphabet().clone();
        assert!(o.contains(&ab.parse_word("abaab").unwrap()));
        assert!(!o.contains(&ab.parse_word("bb").unwrap()));
        assert!(!o.contains(&ab.parse_word("aaa").unwrap()));
        let ext = o.right_extensions(&ab.parse_word("ab").unwrap());
        assert_eq!(ext, vec![0]); // only 'a' may follow "ab": "abb" has bb
    }

    #[test]
    fn sturmian_oracle_agrees_with_substitution_on_golden() {
        let so = LanguageOracle::from_sturmian(&SturmianSlope::golden(), 30).unwrap();
        let fo = fib_oracle(30);
        for n in [1, 2, 3, 5, 8, 13, 21, 30] {
            assert_eq!(so.factors(n).unwrap(), fo.factors(n).unwrap(), "length {n}");
        }
    }

    #[test]
    fn silver_complexity() {
        let o = LanguageOracle::from_sturmian(&SturmianSlope::silver(), 40).unwrap();
        let p = o.complexity(40).unwrap();
        for (i, &pn) in p.iter().enumerate() {
            assert_eq!(pn, (i + 2) as u64);
        }
    }

    #[test]
    fn full_shift_counts() {
        let o = LanguageOracle::full_shift(Alphabet::ab());
        assert_eq!(o.complexity(5).unwrap(), vec![2, 4, 8, 16, 32]);
        assert_eq!(o.factors(2).unwrap().len(), 4);
        assert!(o.contains(&Word(vec![0, 0, 1, 1, 0])));
    }

    #[test]
    fn periodic_language() {
        let ab = Alphabet::ab();
        let w = ab.parse_word("ab").unwrap();
        let o = LanguageOracle::periodic(ab.clone(), &w, 20).unwrap();
        let p = o.complexity(6).unwrap();
        assert_eq!(p, vec![2, 2, 2, 2, 2, 2]);
        assert!(o.contains(&ab.parse_word("abab").unwrap()));
        assert!(!o.contains(&ab.parse_word("aa").unwrap()));
    }

    #[test]
    fn edge_shift_paths() {
        // two letters, 0 may follow anything, 1 may follow only 0
        let es = EdgeShift {
            letters: 2,
            can_follow: vec![vec![true, true], vec![true, false]],
        };
        let o = LanguageOracle::edge_shift(es).unwrap();
        // golden-mean shift: counts are Fibonacci-like
        assert_eq!(o.complexity(6).unwrap(), vec![2, 3, 5, 8, 13, 21]);
        assert!(o.contains(&Word(vec![0, 1, 0, 1])));
        assert!(!o.contains(&Word(vec![1, 1])));
    }

    #[test]
    fn suffix_automaton_distinct_counts_small() {
        let ab = Alphabet::ab();
        let w = ab.parse_word("abaab").unwrap();
        let sam = SuffixAutomaton::from_word(&w);
        // factors: a,b / ab,ba,aa / aba,baa,aab / abaa,baab / abaab
        assert_eq!(sam.distinct_counts(5), vec![2, 3, 3, 2, 1]);
    }
}
