//! Return-word combinatorics: complete first returns, privileged words,
//! repulsiveness and power indices, and the assembled complexity table.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::language::LanguageOracle;
use crate::words::{Letter, Word};

/// KMP matching automaton for one pattern.
struct KmpAuto {
    pat: Vec<Letter>,
    fail: Vec<usize>,
}

impl KmpAuto {
    fn new(pat: &Word) -> Self {
        KmpAuto { fail: pat.border_table(), pat: pat.0.clone() }
    }

    /// Feed one letter; returns (new state, completed a match).
    fn step(&self, mut state: usize, c: Letter) -> (usize, bool) {
        if state == self.pat.len() {
            state = self.fail[state - 1];
        }
        while state > 0 && self.pat[state] != c {
            state = self.fail[state - 1];
        }
        if self.pat[state] == c {
            state += 1;
        }
        (state, state == self.pat.len())
    }
}

/// Complete first returns to a word: the minimal-length factors with the
/// word as proper prefix and suffix and no third occurrence in between.
#[derive(Debug, Clone)]
pub struct CfrSet {
    pub word: Word,
    pub returns: Vec<Word>,
    /// True when some search branch was cut at the length bound, so very
    /// long returns may be missing.
    pub bound_limited: bool,
}

/// Enumerate complete first returns to `u` among factors of length at most
/// `len_bound`. For the empty word the convention is that the single
/// letters of the language are its complete first returns.
pub fn complete_first_returns(
    oracle: &LanguageOracle,
    u: &Word,
    len_bound: usize,
) -> Result<CfrSet> {
    if u.is_empty() {
        let letters: Vec<Word> = oracle
            .cursor_extensions(oracle.cursor_root())
            .into_iter()
            .map(Word::letter)
            .collect();
        return Ok(CfrSet { word: u.clone(), returns: letters, bound_limited: false });
    }
    if !oracle.contains(u) {
        return Err(Error::Invalid(format!(
            "complete first returns requested for a word of length {} outside the language",
            u.len()
        )));
    }
    if len_bound <= u.len() {
        return Ok(CfrSet { word: u.clone(), returns: Vec::new(), bound_limited: true });
    }
    let auto = KmpAuto::new(u);
    let mut cur = oracle.cursor_root();
    for &c in &u.0 {
        cur = oracle.cursor_step(cur, c).expect("u is in the language");
    }
    let mut out = Vec::new();
    let mut bound_limited = false;
    // Stack-based DFS over extensions of u; KMP state after reading u is a
    // full match, so matching continues from its longest border.
    let mut word = u.clone();
    let start_state = auto.fail[u.len() - 1];
    dfs_returns(
        oracle,
        &auto,
        cur,
        start_state,
        &mut word,
        len_bound,
        &mut out,
        &mut bound_limited,
    );
    out.sort();
    Ok(CfrSet { word: u.clone(), returns: out, bound_limited })
}

#[allow(clippy::too_many_arguments)]
fn dfs_returns(
    oracle: &LanguageOracle,
    auto: &KmpAuto,
    cur: crate::language::Cursor,
    state: usize,
    word: &mut Word,
    len_bound: usize,
    out: &mut Vec<Word>,
    bound_limited: &mut bool,
) {
    if word.len() >= len_bound {
        *bound_limited = true;
        return;
    }
    for c in oracle.cursor_extensions(cur) {
        let next_cur = oracle.cursor_step(cur, c).expect("extension must step");
        let (next_state, matched) = auto.step(state, c);
        word.push(c);
        if matched {
            out.push(word.clone());
        } else {
            dfs_returns(oracle, auto, next_cur, next_state, word, len_bound, out, bound_limited);
        }
        word.0.pop();
    }
}

/// Flags `f[l]` marking whether the length-l prefix of w is privileged:
/// the empty word and single letters are, and a longer prefix is exactly
/// when it is a complete first return to some shorter privileged prefix.
pub fn privileged_prefix_flags(w: &Word) -> Vec<bool> {
    let n = w.len();
    let mut flags = vec![false; n + 1];
    flags[0] = true;
    if n >= 1 {
        flags[1] = true;
    }
    // positions[k] = sorted start indices of occurrences of w[0..k] in w,
    // filled in lazily when prefix k is found privileged.
    let mut positions: Vec<Option<Vec<usize>>> = vec![None; n + 1];
    for l in 2..=n {
        'search: for k in 1..l {
            if !flags[k] {
                continue;
            }
            if positions[k].is_none() {
                positions[k] = Some(w.occurrences(&w.factor(0, k)));
            }
            let pos = positions[k].as_ref().unwrap();
            // occurrences of w[0..k] inside w[0..l]: starts p with p+k <= l
            let inside = pos.partition_point(|&p| p + k <= l);
            if inside == 2 && pos[..inside].binary_search(&(l - k)).is_ok() {
                flags[l] = true;
                break 'search;
            }
        }
    }
    flags
}

pub fn is_privileged(w: &Word) -> bool {
    *privileged_prefix_flags(w).last().unwrap()
}

/// Minimal privileged order of each privileged prefix of w (None for
/// non-privileged prefixes): the empty word has order 0, letters order 1,
/// and a longer prefix one more than the least order over the shorter
/// privileged prefixes it is a complete first return to.
pub fn privileged_prefix_orders(w: &Word) -> Vec<Option<u32>> {
    let n = w.len();
    let mut orders: Vec<Option<u32>> = vec![None; n + 1];
    orders[0] = Some(0);
    if n >= 1 {
        orders[1] = Some(1);
    }
    let mut positions: Vec<Option<Vec<usize>>> = vec![None; n + 1];
    for l in 2..=n {
        let mut best: Option<u32> = None;
        for k in 1..l {
            let Some(ord_k) = orders[k] else { continue };
            if positions[k].is_none() {
                positions[k] = Some(w.occurrences(&w.factor(0, k)));
            }
            let pos = positions[k].as_ref().unwrap();
            let inside = pos.partition_point(|&p| p + k <= l);
            if inside == 2 && pos[..inside].binary_search(&(l - k)).is_ok() {
                best = Some(best.map_or(ord_k + 1, |b| b.min(ord_k + 1)));
            }
        }
        orders[l] = best;
    }
    orders
}

/// Privileged words grouped by order: order 0 is the empty word, order 1
/// the letters, and order k+1 the complete first returns to order-k words.
/// A word reachable at several orders is listed at its minimal one.
#[derive(Debug, Clone)]
pub struct PrivilegedSet {
    pub by_order: Vec<Vec<Word>>,
    pub bound_limited: bool,
}

pub fn privileged_words(
    oracle: &LanguageOracle,
    max_order: usize,
    len_bound: usize,
) -> Result<PrivilegedSet> {
    let mut by_order: Vec<Vec<Word>> = vec![vec![Word::empty()]];
    let mut seen: HashSet<Word> = HashSet::new();
    seen.insert(Word::empty());
    let mut bound_limited = false;
    for ord in 1..=max_order {
        let mut level = Vec::new();
        for u in &by_order[ord - 1] {
            let cfr = complete_first_returns(oracle, u, len_bound)?;
            bound_limited |= cfr.bound_limited;
            for w in cfr.returns {
                if seen.insert(w.clone()) {
                    level.push(w);
                }
            }
        }
        level.sort();
        if level.is_empty() {
            break;
        }
        by_order.push(level);
    }
    Ok(PrivilegedSet { by_order, bound_limited })
}

/// Count privileged factors of each length 1..=max_len by closing the
/// letters under complete first returns capped at max_len. Lengths strictly
/// increase along return steps, so the closure is exhaustive.
pub fn privileged_by_length(oracle: &LanguageOracle, max_len: usize) -> Result<Vec<u64>> {
    if max_len > oracle.max_len() {
        return Err(Error::InsufficientDepth {
            what: "privileged factor counts".into(),
            need: max_len,
            got: oracle.max_len(),
        });
    }
    let mut counts = vec![0u64; max_len];
    let mut seen: HashSet<Word> = HashSet::new();
    let mut queue: Vec<Word> = oracle
        .cursor_extensions(oracle.cursor_root())
        .into_iter()
        .map(Word::letter)
        .collect();
    for w in &queue {
        seen.insert(w.clone());
    }
    while let Some(u) = queue.pop() {
        counts[u.len() - 1] += 1;
        if u.len() >= max_len {
            continue;
        }
        let cfr = complete_first_returns(oracle, &u, max_len)?;
        for w in cfr.returns {
            if w.len() <= max_len && seen.insert(w.clone()) {
                queue.push(w);
            }
        }
    }
    Ok(counts)
}

/// Worst-case gap between a factor and its longest proper border, measured
/// as (|w| - |u|) / |u| over factors w of length at most l_max with a
/// nonempty border u. Small values mean long repetitions pile up.
#[derive(Debug, Clone)]
pub struct RepulsivenessReport {
    pub index: f64,
    pub witness_outer: Word,
    pub witness_inner: Word,
    pub checked_up_to: usize,
}

pub fn repulsiveness_index(oracle: &LanguageOracle, l_max: usize) -> Result<RepulsivenessReport> {
    guard_enumeration(oracle, l_max)?;
    let mut best: Option<(f64, Word, usize)> = None;
    for n in 2..=l_max {
        for w in oracle.factors(n)? {
            let b = w.longest_border();
            if b == 0 {
                continue;
            }
            let ratio = (n - b) as f64 / b as f64;
            if best.as_ref().is_none_or(|(r, _, _)| ratio < *r) {
                best = Some((ratio, w, b));
            }
        }
    }
    match best {
        Some((index, w, b)) => Ok(RepulsivenessReport {
            index,
            witness_inner: w.factor(0, b),
            witness_outer: w,
            checked_up_to: l_max,
        }),
        None => Ok(RepulsivenessReport {
            index: f64::INFINITY,
            witness_outer: Word::empty(),
            witness_inner: Word::empty(),
            checked_up_to: l_max,
        }),
    }
}

/// Largest integer power u^p occurring as a factor of length at most
/// len_bound, and whether it stays below the threshold p_max.
#[derive(Debug, Clone)]
pub struct PowersReport {
    pub max_power: u32,
    pub bounded: bool,
    pub witness: Word,
    pub checked_up_to: usize,
}

pub fn bounded_powers(
    oracle: &LanguageOracle,
    p_max: u32,
    len_bound: usize,
) -> Result<PowersReport> {
    guard_enumeration(oracle, len_bound)?;
    let mut max_power = 1u32;
    let mut witness = Word::empty();
    for n in 1..=len_bound {
        for w in oracle.factors(n)? {
            let q = n - w.longest_border();
            if n % q == 0 {
                let p = (n / q) as u32;
                if p > max_power {
                    max_power = p;
                    witness = w;
                }
            }
        }
    }
    Ok(PowersReport { max_power, bounded: max_power < p_max, witness, checked_up_to: len_bound })
}

fn guard_enumeration(oracle: &LanguageOracle, l_max: usize) -> Result<()> {
    if l_max > oracle.max_len() {
        return Err(Error::InsufficientDepth {
            what: "factor enumeration".into(),
            need: l_max,
            got: oracle.max_len(),
        });
    }
    if l_max == 0 {
        return Err(Error::Invalid("enumeration bound must be positive".into()));
    }
    let p = oracle.complexity(l_max)?;
    let total: u64 = p.iter().fold(0u64, |a, &b| a.saturating_add(b));
    if total > 2_000_000 {
        return Err(Error::Invalid(format!(
            "factor enumeration up to length {l_max} would visit {total} words; lower the bound"
        )));
    }
    Ok(())
}

/// Per-length complexity summary: distinct factors, right-special factors
/// and privileged factors.
#[derive(Debug, Clone)]
pub struct ComplexityTable {
    pub n_max: usize,
    pub p: Vec<u64>,
    pub right_special: Vec<u64>,
    pub privileged: Vec<u64>,
}

pub fn complexity_table(oracle: &LanguageOracle, n_max: usize) -> Result<ComplexityTable> {
    guard_enumeration(oracle, n_max)?;
    let p = oracle.complexity(n_max)?;
    let mut right_special = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        right_special.push(oracle.right_special(n)?.len() as u64);
    }
    let privileged = privileged_by_length(oracle, n_max)?;
    Ok(ComplexityTable { n_max, p, right_special, privileged })
}

impl ComplexityTable {
    pub fn render_tsv(&self) -> String {
        let mut s = String::from("n\tfactors\tright_special\tprivileged\n");
        for i in 0..self.n_max {
            s.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                i + 1,
                self.p[i],
                self.right_special[i],
                self.privileged[i]
            ));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::substitution::Substitution;
    use crate::words::Alphabet;

    fn fib_oracle(n: usize) -> LanguageOracle {
        LanguageOracle::from_substitution(&Substitution::fibonacci(), n).unwrap()
    }

    fn parse(ab: &Alphabet, s: &str) -> Word {
        ab.parse_word(s).unwrap()
    }

    #[test]
    fn first_returns_to_single_letter() {
        let o = fib_oracle(30);
        let ab = o.alphabet().clone();
        let cfr = complete_first_returns(&o, &parse(&ab, "a"), 30).unwrap();
        let rendered: Vec<String> = cfr.returns.iter().map(|w| ab.render(w)).collect();
        assert_eq!(rendered, ["aa", "aba"]);
        assert!(!cfr.bound_limited);
    }

    #[test]
    fn first_returns_to_ab() {
        let o = fib_oracle(30);
        let ab = o.alphabet().clone();
        let cfr = complete_first_returns(&o, &parse(&ab, "ab"), 30).unwrap();
        let rendered: Vec<String> = cfr.returns.iter().map(|w| ab.render(w)).collect();
        assert_eq!(rendered, ["abaab", "abab"]);
    }

    #[test]
    fn every_factor_has_two_return_words_in_fibonacci() {
        let o = fib_oracle(40);
        for n in 1..=6 {
            for u in o.factors(n).unwrap() {
                let cfr = complete_first_returns(&o, &u, 40).unwrap();
                assert_eq!(cfr.returns.len(), 2, "factor of length {n}");
                assert!(!cfr.bound_limited);
            }
        }
    }

    #[test]
    fn empty_word_returns_are_letters() {
        let o = fib_oracle(10);
        let cfr = complete_first_returns(&o, &Word::empty(), 10).unwrap();
        assert_eq!(cfr.returns, vec![Word(vec![0]), Word(vec![1])]);
    }

    #[test]
    fn privileged_flags_examples() {
        let ab = Alphabet::ab();
        assert!(is_privileged(&parse(&ab, "aa")));
        assert!(is_privileged(&parse(&ab, "aba")));
        assert!(is_privileged(&parse(&ab, "abaaba")));
        assert!(!is_privileged(&parse(&ab, "ab")));
        assert!(!is_privileged(&parse(&ab, "abaab")));
        let flags = privileged_prefix_flags(&parse(&ab, "abaaba"));
        assert_eq!(flags, vec![true, true, false, true, false, false, true]);
    }

    #[test]
    fn fibonacci_privileged_are_palindromes() {
        let o = fib_oracle(20);
        for n in 1..=12 {
            for w in o.factors(n).unwrap() {
                let mut rev = w.0.clone();
                rev.reverse();
                assert_eq!(is_privileged(&w), w.0 == rev, "length {n}");
            }
        }
    }

    #[test]
    fn fibonacci_privileged_counts_alternate() {
        let o = fib_oracle(20);
        let counts = privileged_by_length(&o, 8).unwrap();
        assert_eq!(counts, vec![2, 1, 2, 1, 2, 1, 2, 1]);
    }

    #[test]
    fn privileged_orders_start_with_letters() {
        let o = fib_oracle(40);
        let ab = o.alphabet().clone();
        let set = privileged_words(&o, 3, 40).unwrap();
        let lvl1: Vec<String> = set.by_order[1].iter().map(|w| ab.render(w)).collect();
        assert_eq!(lvl1, ["a", "b"]);
        let lvl2: Vec<String> = set.by_order[2].iter().map(|w| ab.render(w)).collect();
        assert_eq!(lvl2, ["aa", "aba", "baab", "bab"]);
    }

    #[test]
    fn repulsiveness_of_periodic_single_letter() {
        let ab = Alphabet::ab();
        let o = LanguageOracle::periodic(ab.clone(), &parse(&ab, "a"), 10).unwrap();
        let rep = repulsiveness_index(&o, 4).unwrap();
        assert!((rep.index - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(ab.render(&rep.witness_outer), "aaaa");
        assert_eq!(ab.render(&rep.witness_inner), "aaa");
    }

    #[test]
    fn fibonacci_powers_are_bounded_by_three() {
        let o = fib_oracle(40);
        let rep = bounded_powers(&o, 4, 40).unwrap();
        assert_eq!(rep.max_power, 3);
        assert!(rep.bounded);
    }

    #[test]
    fn full_shift_powers_are_unbounded() {
        let o = LanguageOracle::full_shift(Alphabet::ab());
        let rep = bounded_powers(&o, 4, 12).unwrap();
        assert_eq!(rep.max_power, 12);
        assert!(!rep.bounded);
    }

    #[test]
    fn complexity_table_golden() {
        let o = fib_oracle(20);
        let t = complexity_table(&o, 8).unwrap();
        assert_eq!(t.p, vec![2, 3, 4, 5, 6, 7, 8, 9]);
        assert_eq!(t.right_special, vec![1; 8]);
        assert_eq!(t.privileged, vec![2, 1, 2, 1, 2, 1, 2, 1]);
        let tsv = t.render_tsv();
        assert!(tsv.starts_with("n\tfactors\tright_special\tprivileged\n1\t2\t1\t2\n"));
    }

    #[test]
    fn rich_identity_links_privileged_and_factor_counts() {
        // In the Fibonacci language every factor is rich, and privileged
        // counts satisfy priv(n) + priv(n+1) = p(n+1) - p(n) + 2.
        let o = fib_oracle(24);
        let p = o.complexity(12).unwrap();
        let priv_counts = privileged_by_length(&o, 12).unwrap();
        for n in 1..11 {
            assert_eq!(
                priv_counts[n - 1] + priv_counts[n],
                p[n] - p[n - 1] + 2,
                "length {n}"
            );
        }
    }
}
