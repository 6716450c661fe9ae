//! Rooted trees of words, horizontal edge schemes, length functions, choice
//! functions and boundary paths: the combinatorial skeleton every spectral
//! triple here is built on.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::language::LanguageOracle;
use crate::returns::{complete_first_returns, privileged_prefix_orders};
use crate::words::{Alphabet, Letter, Word};

const MAX_TREE_NODES: usize = 8_000_000;

#[derive(Debug, Clone)]
struct Node {
    parent: u32,
    letter: Letter,
    level: u16,
    first_child: u32,
    n_children: u16,
}

/// Depth-truncated tree of the factors of a language: level n holds the
/// admissible words of length n, each connected to its one-letter
/// extensions. Nodes are indexed breadth-first, children sorted by letter.
#[derive(Debug, Clone)]
pub struct WordTree {
    nodes: Vec<Node>,
    levels: Vec<(u32, u32)>,
    alphabet: Alphabet,
    depth: usize,
}

pub const ROOT: u32 = 0;

pub fn build_tree(oracle: &LanguageOracle, depth: usize) -> Result<WordTree> {
    if depth < 1 {
        return Err(Error::Invalid("tree depth must be at least 1".into()));
    }
    let mut nodes = vec![Node {
        parent: u32::MAX,
        letter: 0,
        level: 0,
        first_child: 1,
        n_children: 0,
    }];
    let mut levels = vec![(0u32, 1u32)];
    // cursors[i] = oracle cursor of node (start + i) on the frontier
    let mut frontier: Vec<crate::language::Cursor> = vec![oracle.cursor_root()];
    let mut start = 0usize;
    for lvl in 1..=depth {
        let level_start = nodes.len() as u32;
        let mut next_frontier = Vec::new();
        for (off, &cur) in frontier.iter().enumerate() {
            let id = start + off;
            let ext = oracle.cursor_extensions(cur);
            nodes[id].first_child = nodes.len() as u32;
            nodes[id].n_children = ext.len() as u16;
            for c in ext {
                nodes.push(Node {
                    parent: id as u32,
                    letter: c,
                    level: lvl as u16,
                    first_child: 0,
                    n_children: 0,
                });
                next_frontier.push(oracle.cursor_step(cur, c).expect("extension must step"));
                if nodes.len() > MAX_TREE_NODES {
                    return Err(Error::Invalid(format!(
                        "tree would exceed {MAX_TREE_NODES} nodes at depth {lvl}; lower the depth"
                    )));
                }
            }
        }
        levels.push((level_start, nodes.len() as u32));
        start = level_start as usize;
        frontier = next_frontier;
    }
    Ok(WordTree { nodes, levels, alphabet: oracle.alphabet().clone(), depth })
}

impl WordTree {
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Node ids of level n.
    pub fn level_range(&self, n: usize) -> std::ops::Range<u32> {
        let (a, b) = self.levels[n];
        a..b
    }

    pub fn level_of(&self, v: u32) -> usize {
        self.nodes[v as usize].level as usize
    }

    pub fn parent(&self, v: u32) -> Option<u32> {
        (v != ROOT).then(|| self.nodes[v as usize].parent)
    }

    pub fn children(&self, v: u32) -> std::ops::Range<u32> {
        let n = &self.nodes[v as usize];
        n.first_child..n.first_child + n.n_children as u32
    }

    pub fn n_children(&self, v: u32) -> usize {
        self.nodes[v as usize].n_children as usize
    }

    /// Branching number (#children - 1) and a flag marking vertices at the
    /// truncation depth, whose true branching is unknown.
    pub fn branching_number(&self, v: u32) -> (usize, bool) {
        let truncated = self.level_of(v) == self.depth;
        (self.n_children(v).saturating_sub(1), truncated)
    }

    pub fn word(&self, v: u32) -> Word {
        let mut letters = Vec::with_capacity(self.level_of(v));
        let mut cur = v;
        while cur != ROOT {
            letters.push(self.nodes[cur as usize].letter);
            cur = self.nodes[cur as usize].parent;
        }
        letters.reverse();
        Word(letters)
    }

    pub fn render(&self, v: u32) -> String {
        self.alphabet.render(&self.word(v))
    }

    pub fn find(&self, w: &Word) -> Option<u32> {
        let mut cur = ROOT;
        for &c in &w.0 {
            cur = self.children(cur).find(|&ch| self.nodes[ch as usize].letter == c)?;
        }
        Some(cur)
    }

    /// TSV dump: level, word, parent, branching.
    pub fn render_tree_tsv(&self) -> String {
        let mut s = String::from("level\tword\tparent\tbranching\n");
        for v in 0..self.nodes.len() as u32 {
            let parent = self
                .parent(v)
                .map_or_else(|| "-".to_string(), |p| self.render(p));
            let (b, _) = self.branching_number(v);
            s.push_str(&format!("{}\t{}\t{}\t{}\n", self.level_of(v), self.render(v), parent, b));
        }
        s
    }
}

/// Edge length assignment by level; strictly decreasing to zero.
#[derive(Debug, Clone)]
pub enum LengthFunction {
    /// delta(l) = 1/l at edge level l >= 1, so a level-n vertex has ball
    /// radius 1/(n+1).
    Reciprocal,
    /// delta(l) = rho^l with 0 < rho < 1.
    Geometric(f64),
    /// Explicit values for levels 1, 2, ...
    Sequence(Vec<f64>),
}

impl LengthFunction {
    /// Length of an edge at level l >= 1 (a level-n vertex's child edges
    /// have level n+1... horizontal edges at level l share this value).
    pub fn eval(&self, level: usize) -> f64 {
        assert!(level >= 1, "edge levels start at 1");
        match self {
            LengthFunction::Reciprocal => 1.0 / level as f64,
            LengthFunction::Geometric(rho) => rho.powi(level as i32),
            LengthFunction::Sequence(v) => v[level - 1],
        }
    }

    /// Check the defining invariants up to max_level: defined, positive,
    /// strictly decreasing.
    pub fn validate(&self, max_level: usize) -> Result<()> {
        match self {
            LengthFunction::Geometric(rho) => {
                if !(*rho > 0.0 && *rho < 1.0) {
                    return Err(Error::Invalid(format!(
                        "geometric length ratio must lie in (0,1), got {rho}"
                    )));
                }
            }
            LengthFunction::Sequence(v) => {
                if v.len() < max_level {
                    return Err(Error::InsufficientDepth {
                        what: "length sequence".into(),
                        need: max_level,
                        got: v.len(),
                    });
                }
            }
            LengthFunction::Reciprocal => {}
        }
        let mut prev = f64::INFINITY;
        for l in 1..=max_level {
            let d = self.eval(l);
            if !(d > 0.0) || d >= prev {
                return Err(Error::Invalid(format!(
                    "length function must be positive and strictly decreasing; level {l} gives {d}"
                )));
            }
            prev = d;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    Positive,
    Negative,
}

/// A horizontal edge between two incomparable vertices. `level` is the
/// scheme level (tree level for sibling schemes, privileged order for the
/// privileged scheme, lift level for self-similar edges); `delta` is the
/// metric length used by spectra and Connes distances.
#[derive(Debug, Clone)]
pub struct HorizontalEdge {
    pub source: u32,
    pub range: u32,
    pub level: u32,
    pub delta: f64,
    pub orientation: Orientation,
    pub multiplicity_id: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeScheme {
    /// All ordered pairs of distinct siblings.
    Maximal,
    /// The lexicographically least sibling pair per branching vertex.
    Minimal,
    /// Pairs of distinct complete first returns to a common privileged
    /// word, leveled by privileged order.
    Privileged,
    /// Lifts of a fundamental edge set; built by the substitution-graph
    /// pipeline, not by `horizontal_edges`.
    SelfSimilar,
}

/// Horizontal edges of the tree under a scheme, both orientations, sorted
/// by (level, source, range). For sibling schemes `level_max` bounds the
/// tree level; for the privileged scheme it bounds the privileged order.
pub fn horizontal_edges(
    tree: &WordTree,
    oracle: &LanguageOracle,
    scheme: EdgeScheme,
    length: &LengthFunction,
    level_max: usize,
) -> Result<Vec<HorizontalEdge>> {
    length.validate(tree.depth + 1)?;
    let mut out = Vec::new();
    match scheme {
        EdgeScheme::Maximal | EdgeScheme::Minimal => {
            let level_max = level_max.min(tree.depth);
            for lvl in 1..=level_max {
                for v in tree.level_range(lvl - 1) {
                    let kids: Vec<u32> = tree.children(v).collect();
                    if kids.len() < 2 {
                        continue;
                    }
                    let delta = length.eval(lvl);
                    let pairs: Vec<(u32, u32)> = match scheme {
                        EdgeScheme::Maximal => {
                            let mut p = Vec::new();
                            for i in 0..kids.len() {
                                for j in i + 1..kids.len() {
                                    p.push((kids[i], kids[j]));
                                }
                            }
                            p
                        }
                        _ => vec![(kids[0], kids[1])],
                    };
                    for (a, b) in pairs {
                        push_pair(&mut out, a, b, lvl as u32, delta);
                    }
                }
            }
        }
        EdgeScheme::Privileged => {
            privileged_edges(tree, oracle, length, level_max, &mut out)?;
        }
        EdgeScheme::SelfSimilar => {
            return Err(Error::Invalid(
                "self-similar edges are built from a substitution graph, not from the word tree"
                    .into(),
            ));
        }
    }
    out.sort_by_key(|e| (e.level, e.source, e.range));
    Ok(out)
}

fn push_pair(out: &mut Vec<HorizontalEdge>, a: u32, b: u32, level: u32, delta: f64) {
    out.push(HorizontalEdge {
        source: a,
        range: b,
        level,
        delta,
        orientation: Orientation::Positive,
        multiplicity_id: 0,
    });
    out.push(HorizontalEdge {
        source: b,
        range: a,
        level,
        delta,
        orientation: Orientation::Negative,
        multiplicity_id: 0,
    });
}

fn privileged_edges(
    tree: &WordTree,
    oracle: &LanguageOracle,
    length: &LengthFunction,
    order_max: usize,
    out: &mut Vec<HorizontalEdge>,
) -> Result<()> {
    // Breadth-first closure of privileged words by order, capped at the
    // tree depth; a word reached at several orders keeps the first.
    let mut current: Vec<Word> = vec![Word::empty()];
    let mut seen: std::collections::HashSet<Word> = current.iter().cloned().collect();
    for ord in 1..=order_max {
        let mut next: Vec<Word> = Vec::new();
        for u in &current {
            let cfr = complete_first_returns(oracle, u, tree.depth)?;
            let ids: Vec<(u32, Word)> = cfr
                .returns
                .iter()
                .filter_map(|w| tree.find(w).map(|id| (id, w.clone())))
                .collect();
            let delta = length.eval(u.len() + 1);
            for i in 0..ids.len() {
                for j in i + 1..ids.len() {
                    push_pair(out, ids[i].0, ids[j].0, ord as u32, delta);
                }
            }
            for (_, w) in ids {
                if seen.insert(w.clone()) {
                    next.push(w);
                }
            }
        }
        next.sort();
        if next.is_empty() {
            break;
        }
        current = next;
    }
    Ok(())
}

/// TSV dump of the positive-orientation edges: level, source, range, length.
pub fn render_edges_tsv(tree: &WordTree, edges: &[HorizontalEdge]) -> String {
    let mut s = String::from("level\tsource\trange\tlength\n");
    for e in edges.iter().filter(|e| e.orientation == Orientation::Positive) {
        s.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            e.level,
            tree.render(e.source),
            tree.render(e.range),
            e.delta
        ));
    }
    s
}

/// A choice function: one distinguished child per vertex, inducing for
/// every vertex v the boundary path that descends from v along `next`.
#[derive(Debug, Clone)]
pub struct ChoiceFunction {
    pub rule_name: String,
    next: Vec<u32>,
}

#[derive(Debug, Clone)]
pub enum ChoiceRule {
    Leftmost,
    Rightmost,
    /// Explicit child-letter assignment per branching vertex.
    Enumerated(Vec<(Word, Letter)>),
    /// One reproducible draw per vertex, children weighted by the given
    /// vertex weights.
    WeightedOnce { seed: u64 },
}

pub fn make_choice(tree: &WordTree, rule: &ChoiceRule) -> Result<ChoiceFunction> {
    make_choice_weighted(tree, rule, |_| 1.0)
}

/// Like `make_choice`, with explicit weights for the WeightedOnce rule:
/// a child c of v is drawn with probability weight(c) / sum over siblings.
pub fn make_choice_weighted(
    tree: &WordTree,
    rule: &ChoiceRule,
    weight_of: impl Fn(&Word) -> f64,
) -> Result<ChoiceFunction> {
    let mut next = vec![u32::MAX; tree.n_nodes()];
    let enumerated: Option<std::collections::HashMap<Word, Letter>> = match rule {
        ChoiceRule::Enumerated(list) => Some(list.iter().cloned().collect()),
        _ => None,
    };
    let mut rng = match rule {
        ChoiceRule::WeightedOnce { seed } => Some(ChaCha8Rng::seed_from_u64(*seed)),
        _ => None,
    };
    for v in 0..tree.n_nodes() as u32 {
        let kids: Vec<u32> = tree.children(v).collect();
        next[v as usize] = match kids.len() {
            0 => v,
            1 => kids[0],
            _ => match rule {
                ChoiceRule::Leftmost => kids[0],
                ChoiceRule::Rightmost => *kids.last().unwrap(),
                ChoiceRule::Enumerated(_) => {
                    let map = enumerated.as_ref().unwrap();
                    let w = tree.word(v);
                    let c = map.get(&w).ok_or_else(|| {
                        Error::Invalid(format!(
                            "enumerated choice rule is missing branching vertex \"{}\"",
                            tree.render(v)
                        ))
                    })?;
                    *kids
                        .iter()
                        .find(|&&ch| tree.word(ch).0.last() == Some(c))
                        .ok_or_else(|| {
                            Error::Invalid(format!(
                                "enumerated choice at \"{}\" names a letter that is not a child",
                                tree.render(v)
                            ))
                        })?
                }
                ChoiceRule::WeightedOnce { .. } => {
                    let rng = rng.as_mut().unwrap();
                    weighted_pick(tree, &kids, &weight_of, rng)
                }
            },
        };
    }
    Ok(ChoiceFunction { rule_name: rule_label(rule), next })
}

/// Choice function from an arbitrary next-child rule; the rule is called
/// once per vertex with children and must return one of them.
pub fn make_custom_choice(
    tree: &WordTree,
    name: &str,
    next_child: impl Fn(&WordTree, u32) -> u32,
) -> Result<ChoiceFunction> {
    let mut next = vec![u32::MAX; tree.n_nodes()];
    for v in 0..tree.n_nodes() as u32 {
        if tree.n_children(v) == 0 {
            next[v as usize] = v;
            continue;
        }
        let chosen = next_child(tree, v);
        if !tree.children(v).contains(&chosen) {
            return Err(Error::Invalid(format!(
                "choice rule \"{name}\" picked a non-child of \"{}\"",
                tree.render(v)
            )));
        }
        next[v as usize] = chosen;
    }
    Ok(ChoiceFunction { rule_name: name.to_string(), next })
}

fn rule_label(rule: &ChoiceRule) -> String {
    match rule {
        ChoiceRule::Leftmost => "leftmost".into(),
        ChoiceRule::Rightmost => "rightmost".into(),
        ChoiceRule::Enumerated(_) => "enumerated".into(),
        ChoiceRule::WeightedOnce { seed } => format!("weighted(seed={seed})"),
    }
}

fn weighted_pick<R: Rng>(
    tree: &WordTree,
    kids: &[u32],
    weight_of: &impl Fn(&Word) -> f64,
    rng: &mut R,
) -> u32 {
    let weights: Vec<f64> = kids.iter().map(|&c| weight_of(&tree.word(c)).max(0.0)).collect();
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return kids[0];
    }
    let mut x = rng.random_range(0.0..total);
    for (i, w) in weights.iter().enumerate() {
        if x < *w {
            return kids[i];
        }
        x -= w;
    }
    *kids.last().unwrap()
}

impl ChoiceFunction {
    pub fn next(&self, v: u32) -> u32 {
        self.next[v as usize]
    }
}

/// A root-based path, one vertex per level up to its current depth.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundaryPath {
    pub nodes: Vec<u32>,
}

impl BoundaryPath {
    pub fn depth(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn at(&self, level: usize) -> u32 {
        self.nodes[level]
    }
}

/// The boundary path through v selected by the choice function, extended
/// downward to `depth` (truncated at the tree depth).
pub fn evaluate_choice(
    tree: &WordTree,
    choice: &ChoiceFunction,
    v: u32,
    depth: usize,
) -> BoundaryPath {
    let mut up = Vec::new();
    let mut cur = v;
    loop {
        up.push(cur);
        match tree.parent(cur) {
            Some(p) => cur = p,
            None => break,
        }
    }
    up.reverse();
    let mut nodes = up;
    let target = depth.min(tree.depth());
    while nodes.len() <= target {
        let last = *nodes.last().unwrap();
        let nxt = choice.next(last);
        if nxt == last {
            break;
        }
        nodes.push(nxt);
    }
    BoundaryPath { nodes }
}

/// One random boundary path from `start`, children drawn with probability
/// proportional to their weights at every step.
pub fn sample_weighted_path<R: Rng>(
    tree: &WordTree,
    weight_of: impl Fn(&Word) -> f64,
    start: u32,
    rng: &mut R,
) -> BoundaryPath {
    let mut up = Vec::new();
    let mut cur = start;
    loop {
        up.push(cur);
        match tree.parent(cur) {
            Some(p) => cur = p,
            None => break,
        }
    }
    up.reverse();
    let mut nodes = up;
    loop {
        let last = *nodes.last().unwrap();
        let kids: Vec<u32> = tree.children(last).collect();
        if kids.is_empty() {
            break;
        }
        nodes.push(weighted_pick(tree, &kids, &weight_of, rng));
    }
    BoundaryPath { nodes }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Meet {
    pub vertex: u32,
    pub level: usize,
    /// True when the paths agree to the full available depth, so the meet
    /// is only a lower bound.
    pub undistinguished: bool,
}

pub fn meet(xi: &BoundaryPath, eta: &BoundaryPath) -> Meet {
    let common = xi.nodes.len().min(eta.nodes.len());
    let mut level = 0;
    while level + 1 < common && xi.nodes[level + 1] == eta.nodes[level + 1] {
        level += 1;
    }
    let undistinguished = level + 1 >= common;
    Meet { vertex: xi.nodes[level], level, undistinguished }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrivilegedMeet {
    pub word: Word,
    pub order: u32,
    pub undistinguished: bool,
}

/// Greatest common privileged prefix of two boundary paths and its order.
pub fn privileged_meet(tree: &WordTree, xi: &BoundaryPath, eta: &BoundaryPath) -> PrivilegedMeet {
    let m = meet(xi, eta);
    let w = tree.word(m.vertex);
    let orders = privileged_prefix_orders(&w);
    let (len, order) = orders
        .iter()
        .enumerate()
        .rev()
        .find_map(|(l, o)| o.map(|ord| (l, ord)))
        .expect("the empty prefix is always privileged");
    PrivilegedMeet { word: w.factor(0, len), order, undistinguished: m.undistinguished }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::substitution::Substitution;

    fn fib_tree(depth: usize) -> (WordTree, LanguageOracle) {
        let o = LanguageOracle::from_substitution(&Substitution::fibonacci(), depth + 2).unwrap();
        let t = build_tree(&o, depth).unwrap();
        (t, o)
    }

    fn words_at(tree: &WordTree, lvl: usize) -> Vec<String> {
        tree.level_range(lvl).map(|v| tree.render(v)).collect()
    }

    #[test]
    fn fibonacci_tree_levels() {
        let (t, _) = fib_tree(4);
        assert_eq!(words_at(&t, 0), ["ε"]);
        assert_eq!(words_at(&t, 1), ["a", "b"]);
        assert_eq!(words_at(&t, 2), ["aa", "ab", "ba"]);
        assert_eq!(words_at(&t, 4), ["aaba", "abaa", "abab", "baab", "baba"]);
    }

    #[test]
    fn branching_numbers_with_truncation_flag() {
        let (t, _) = fib_tree(3);
        let a = t.find(&t.alphabet().parse_word("a").unwrap()).unwrap();
        let b = t.find(&t.alphabet().parse_word("b").unwrap()).unwrap();
        assert_eq!(t.branching_number(ROOT), (1, false));
        assert_eq!(t.branching_number(a), (1, false));
        assert_eq!(t.branching_number(b), (0, false));
        let leaf = t.level_range(3).next().unwrap();
        assert_eq!(t.branching_number(leaf), (0, true));
    }

    #[test]
    fn maximal_edges_to_level_two() {
        let (t, o) = fib_tree(3);
        let edges =
            horizontal_edges(&t, &o, EdgeScheme::Maximal, &LengthFunction::Reciprocal, 2).unwrap();
        let rendered: Vec<(u32, String, String)> = edges
            .iter()
            .map(|e| (e.level, t.render(e.source), t.render(e.range)))
            .collect();
        assert_eq!(
            rendered,
            [
                (1, "a".into(), "b".into()),
                (1, "b".into(), "a".into()),
                (2, "aa".into(), "ab".into()),
                (2, "ab".into(), "aa".into()),
            ]
        );
        assert!((edges[0].delta - 1.0).abs() < 1e-15);
        assert!((edges[2].delta - 0.5).abs() < 1e-15);
    }

    #[test]
    fn maximal_count_matches_branching_formula() {
        let o = LanguageOracle::full_shift(Alphabet::new(vec!['a', 'b', 'c']).unwrap());
        let t = build_tree(&o, 3).unwrap();
        let edges =
            horizontal_edges(&t, &o, EdgeScheme::Maximal, &LengthFunction::Reciprocal, 3).unwrap();
        for lvl in 1..=3usize {
            let expect: usize = t
                .level_range(lvl - 1)
                .map(|v| {
                    let (a, _) = t.branching_number(v);
                    a * (a + 1)
                })
                .sum();
            let got = edges.iter().filter(|e| e.level == lvl as u32).count();
            assert_eq!(got, expect, "level {lvl}");
        }
    }

    #[test]
    fn minimal_scheme_picks_least_pair() {
        let (t, o) = fib_tree(3);
        let edges =
            horizontal_edges(&t, &o, EdgeScheme::Minimal, &LengthFunction::Reciprocal, 3).unwrap();
        let pos: Vec<(u32, String, String)> = edges
            .iter()
            .filter(|e| e.orientation == Orientation::Positive)
            .map(|e| (e.level, t.render(e.source), t.render(e.range)))
            .collect();
        assert_eq!(
            pos,
            [
                (1, "a".into(), "b".into()),
                (2, "aa".into(), "ab".into()),
                (3, "baa".into(), "bab".into()),
            ]
        );
    }

    #[test]
    fn privileged_edges_pair_first_returns() {
        let (t, o) = fib_tree(5);
        let edges =
            horizontal_edges(&t, &o, EdgeScheme::Privileged, &LengthFunction::Reciprocal, 2)
                .unwrap();
        let pos: Vec<(u32, String, String, f64)> = edges
            .iter()
            .filter(|e| e.orientation == Orientation::Positive)
            .map(|e| (e.level, t.render(e.source), t.render(e.range), e.delta))
            .collect();
        // order 1: the two letters (returns to the empty word), delta 1/1;
        // order 2: returns to a (aa, aba) and to b (baab, bab), delta 1/2
        assert_eq!(
            pos,
            [
                (1, "a".into(), "b".into(), 1.0),
                (2, "aa".into(), "aba".into(), 0.5),
                (2, "baab".into(), "bab".into(), 0.5),
            ]
        );
    }

    #[test]
    fn geometric_and_sequence_lengths() {
        let g = LengthFunction::Geometric(0.5);
        assert!((g.eval(3) - 0.125).abs() < 1e-15);
        g.validate(20).unwrap();
        let s = LengthFunction::Sequence(vec![0.5, 0.25, 0.2]);
        s.validate(3).unwrap();
        assert!(s.validate(4).is_err());
        assert!(LengthFunction::Geometric(1.2).validate(2).is_err());
        assert!(LengthFunction::Sequence(vec![0.5, 0.5]).validate(2).is_err());
    }

    #[test]
    fn leftmost_choice_from_b() {
        let (t, _) = fib_tree(4);
        let tau = make_choice(&t, &ChoiceRule::Leftmost).unwrap();
        let b = t.find(&t.alphabet().parse_word("b").unwrap()).unwrap();
        let path = evaluate_choice(&t, &tau, b, 4);
        let rendered: Vec<String> = path.nodes.iter().map(|&v| t.render(v)).collect();
        assert_eq!(rendered, ["ε", "b", "ba", "baa", "baab"]);
    }

    #[test]
    fn choice_consistency_along_selected_paths() {
        // If tau(w) passes through v then tau(w) and tau(v) agree below v.
        let (t, _) = fib_tree(7);
        for rule in [ChoiceRule::Leftmost, ChoiceRule::Rightmost] {
            let tau = make_choice(&t, &rule).unwrap();
            for w in 0..t.n_nodes() as u32 {
                let pw = evaluate_choice(&t, &tau, w, 7);
                for lvl in t.level_of(w)..pw.depth() {
                    let v = pw.at(lvl);
                    let pv = evaluate_choice(&t, &tau, v, 7);
                    assert_eq!(pv.nodes[lvl..], pw.nodes[lvl..]);
                }
            }
        }
    }

    #[test]
    fn enumerated_choice_reports_missing_vertex() {
        let (t, _) = fib_tree(3);
        let ab = t.alphabet().clone();
        let rule = ChoiceRule::Enumerated(vec![(ab.parse_word("").unwrap(), 0)]);
        let err = make_choice(&t, &rule).unwrap_err();
        assert!(err.to_string().contains('a'), "error should name the vertex: {err}");
    }

    #[test]
    fn weighted_sampling_matches_conditional_weights() {
        let (t, _) = fib_tree(6);
        let a = t.find(&t.alphabet().parse_word("a").unwrap()).unwrap();
        let aa = t.alphabet().parse_word("aa").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 20_000;
        let mut hits = 0;
        for _ in 0..n {
            let p = sample_weighted_path(&t, |_| 1.0, a, &mut rng);
            if t.word(p.at(2)) == aa {
                hits += 1;
            }
        }
        let freq = hits as f64 / n as f64;
        assert!((freq - 0.5).abs() < 0.015, "freq {freq}");
    }

    #[test]
    fn meet_of_paths_through_aa_and_ab() {
        let (t, _) = fib_tree(4);
        let tau = make_choice(&t, &ChoiceRule::Leftmost).unwrap();
        let aa = t.find(&t.alphabet().parse_word("aa").unwrap()).unwrap();
        let ab = t.find(&t.alphabet().parse_word("ab").unwrap()).unwrap();
        let xi = evaluate_choice(&t, &tau, aa, 4);
        let eta = evaluate_choice(&t, &tau, ab, 4);
        let m = meet(&xi, &eta);
        assert_eq!((t.render(m.vertex), m.level, m.undistinguished), ("a".into(), 1, false));
        let same = meet(&xi, &xi);
        assert!(same.undistinguished);
        assert_eq!(same.level, 4);
    }

    #[test]
    fn privileged_meet_of_paths() {
        let (t, _) = fib_tree(5);
        let tau = make_choice(&t, &ChoiceRule::Leftmost).unwrap();
        let aba = t.find(&t.alphabet().parse_word("aba").unwrap()).unwrap();
        let aa = t.find(&t.alphabet().parse_word("aa").unwrap()).unwrap();
        let xi = evaluate_choice(&t, &tau, aba, 5);
        let eta = evaluate_choice(&t, &tau, aa, 5);
        let pm = privileged_meet(&t, &xi, &eta);
        assert_eq!(t.alphabet().render(&pm.word), "a");
        assert_eq!(pm.order, 1);
    }

    #[test]
    fn tsv_dumps() {
        let (t, o) = fib_tree(2);
        let tsv = t.render_tree_tsv();
        assert!(tsv.starts_with("level\tword\tparent\tbranching\n0\tε\t-\t1\n"));
        let edges =
            horizontal_edges(&t, &o, EdgeScheme::Maximal, &LengthFunction::Reciprocal, 2).unwrap();
        let etsv = render_edges_tsv(&t, &edges);
        assert_eq!(etsv, "level\tsource\trange\tlength\n1\ta\tb\t1\n2\taa\tab\t0.5\n");
    }

    #[test]
    fn ultrametric_on_sampled_triples() {
        let (t, _) = fib_tree(8);
        let len = LengthFunction::Reciprocal;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let d = |x: &BoundaryPath, y: &BoundaryPath| {
            let m = meet(x, y);
            if m.undistinguished {
                0.0
            } else {
                len.eval(m.level + 1)
            }
        };
        for _ in 0..500 {
            let x = sample_weighted_path(&t, |_| 1.0, ROOT, &mut rng);
            let y = sample_weighted_path(&t, |_| 1.0, ROOT, &mut rng);
            let z = sample_weighted_path(&t, |_| 1.0, ROOT, &mut rng);
            assert!(d(&x, &y) <= d(&x, &z).max(d(&y, &z)) + 1e-15);
        }
    }
}
