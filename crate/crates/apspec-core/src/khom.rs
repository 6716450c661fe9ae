//! The index pairing of the sign-of-Dirac Fredholm module with cylinder
//! indicator functions, and the constructive inverse: realizing any
//! integer homomorphism with total mass zero by a choice function and a
//! horizontal multi-edge set, with exact round-trip verification.

use crate::error::{Error, Result};
use crate::language::LanguageOracle;
use crate::tree::{
    evaluate_choice, horizontal_edges, make_choice, ChoiceFunction, ChoiceRule, EdgeScheme,
    HorizontalEdge, LengthFunction, Orientation, WordTree, ROOT,
};

/// Everything the index pairing needs: an oriented horizontal multi-edge
/// set (both orientations stored, parallel edges distinguished by
/// multiplicity id), a choice function on the same tree, and the depth up
/// to which both are defined.
#[derive(Debug, Clone)]
pub struct PairingInput {
    pub edges: Vec<HorizontalEdge>,
    pub choice: ChoiceFunction,
    pub depth: usize,
}

impl PairingInput {
    /// Same edges with all orientations reversed; the pairing negates.
    pub fn reversed(&self) -> PairingInput {
        let edges = self
            .edges
            .iter()
            .map(|h| HorizontalEdge {
                source: h.range,
                range: h.source,
                level: h.level,
                delta: h.delta,
                orientation: h.orientation,
                multiplicity_id: h.multiplicity_id,
            })
            .collect();
        PairingInput { edges, choice: self.choice.clone(), depth: self.depth }
    }

    /// Check that every positively oriented edge has its opposite with the
    /// same level and multiplicity id, and that the depth fits the tree.
    pub fn validate(&self, tree: &WordTree) -> Result<()> {
        if self.depth < 1 || self.depth > tree.depth() {
            return Err(Error::InsufficientDepth {
                what: "pairing input depth".into(),
                need: self.depth.max(1),
                got: tree.depth(),
            });
        }
        let key = |h: &HorizontalEdge| (h.source, h.range, h.level, h.multiplicity_id);
        let mut pos: Vec<_> = self
            .edges
            .iter()
            .filter(|h| h.orientation == Orientation::Positive)
            .map(key)
            .collect();
        let mut neg: Vec<_> = self
            .edges
            .iter()
            .filter(|h| h.orientation == Orientation::Negative)
            .map(|h| (h.range, h.source, h.level, h.multiplicity_id))
            .collect();
        pos.sort_unstable();
        neg.sort_unstable();
        if pos != neg {
            return Err(Error::Invalid(
                "every horizontal edge needs its oppositely oriented partner".into(),
            ));
        }
        for h in &self.edges {
            if h.source as usize >= tree.n_nodes() || h.range as usize >= tree.n_nodes() {
                return Err(Error::Invalid("edge endpoint outside the tree".into()));
            }
        }
        Ok(())
    }
}

/// Does the boundary path through w extended by the choice pass v?
fn passes(tree: &WordTree, choice: &ChoiceFunction, v: u32, w: u32) -> bool {
    let lv = tree.level_of(v);
    let path = evaluate_choice(tree, choice, w, lv);
    path.nodes.len() > lv && path.at(lv) == v
}

/// The signed sum and the two one-sided counts of the index formula: the
/// pairing is plus - minus, and the signed sum agrees with it term by
/// term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairingBreakdown {
    pub value: i64,
    pub plus: i64,
    pub minus: i64,
}

/// Index pairing of the module with the cylinder indicator of v, exposing
/// both the signed-sum and the kernel/cokernel-count computations.
pub fn pairing_counts(
    tree: &WordTree,
    input: &PairingInput,
    v: u32,
) -> Result<PairingBreakdown> {
    let lv = tree.level_of(v);
    if lv > input.depth {
        return Err(Error::InsufficientDepth {
            what: format!("pairing at level-{lv} vertex \"{}\"", tree.render(v)),
            need: lv,
            got: input.depth,
        });
    }
    let mut signed = 0i64;
    let mut plus = 0i64;
    let mut minus = 0i64;
    for h in &input.edges {
        if h.orientation != Orientation::Positive {
            continue;
        }
        let cs = passes(tree, &input.choice, v, h.source);
        let cr = passes(tree, &input.choice, v, h.range);
        signed += cs as i64 - cr as i64;
        if cs && !cr {
            plus += 1;
        }
        if cr && !cs {
            minus += 1;
        }
    }
    debug_assert_eq!(signed, plus - minus, "index formula self-check");
    Ok(PairingBreakdown { value: signed, plus, minus })
}

/// The integer pairing value.
pub fn pairing(tree: &WordTree, input: &PairingInput, v: u32) -> Result<i64> {
    pairing_counts(tree, input, v).map(|b| b.value)
}

/// An integer vertex function satisfying the sheaf condition
/// value(v) = sum of the children's values for every vertex above the
/// depth. Construct through the validating constructors; the invariant is
/// what makes realization and round trips exact.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Homomorphism {
    values: Vec<i64>,
    depth: usize,
}

impl Homomorphism {
    /// Values indexed by vertex id for all levels up to depth; the sheaf
    /// condition is checked at every vertex above the depth.
    pub fn from_values(tree: &WordTree, depth: usize, values: Vec<i64>) -> Result<Self> {
        if depth > tree.depth() || depth < 1 {
            return Err(Error::InsufficientDepth {
                what: "homomorphism depth".into(),
                need: depth.max(1),
                got: tree.depth(),
            });
        }
        let need = tree.level_range(depth).end as usize;
        if values.len() < need {
            return Err(Error::Invalid(format!(
                "homomorphism needs {need} values for depth {depth}, got {}",
                values.len()
            )));
        }
        for v in 0..tree.level_range(depth - 1).end {
            let children_sum: i64 = tree.children(v).map(|c| values[c as usize]).sum();
            if values[v as usize] != children_sum {
                return Err(Error::SheafViolation {
                    word: tree.render(v),
                    value: values[v as usize],
                    children_sum,
                });
            }
        }
        Ok(Homomorphism { values, depth })
    }

    /// Build from prescribed values on the depth-level vertices; interior
    /// values are the subtree sums, so the sheaf condition holds by
    /// construction.
    pub fn from_leaves(tree: &WordTree, depth: usize, leaves: &[i64]) -> Result<Self> {
        if depth > tree.depth() || depth < 1 {
            return Err(Error::InsufficientDepth {
                what: "homomorphism depth".into(),
                need: depth.max(1),
                got: tree.depth(),
            });
        }
        let range = tree.level_range(depth);
        if leaves.len() != (range.end - range.start) as usize {
            return Err(Error::Invalid(format!(
                "expected one value per depth-{depth} vertex ({}), got {}",
                range.end - range.start,
                leaves.len()
            )));
        }
        let mut values = vec![0i64; range.end as usize];
        for (i, v) in range.clone().enumerate() {
            values[v as usize] = leaves[i];
        }
        for lvl in (0..depth).rev() {
            for v in tree.level_range(lvl) {
                values[v as usize] = tree.children(v).map(|c| values[c as usize]).sum();
            }
        }
        Ok(Homomorphism { values, depth })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn value(&self, v: u32) -> i64 {
        self.values[v as usize]
    }

    pub fn root_value(&self) -> i64 {
        self.values[ROOT as usize]
    }
}

/// Evaluate the pairing on every vertex up to the input depth; the result
/// is rebuilt through the validating constructor, so the additivity of the
/// index over children is re-checked on the way.
pub fn measure_pairings(tree: &WordTree, input: &PairingInput) -> Result<Homomorphism> {
    let mut values = vec![0i64; tree.level_range(input.depth).end as usize];
    for v in 0..values.len() as u32 {
        values[v as usize] = pairing(tree, input, v)?;
    }
    Homomorphism::from_values(tree, input.depth, values)
}

/// One tranche of parallel edges produced by the realization, recorded
/// with the sign of the prefix-sum count before the orientation convention
/// folded it into the edge direction.
#[derive(Debug, Clone)]
pub struct RealizedTranche {
    pub level: usize,
    pub source: u32,
    pub range: u32,
    pub multiplicity: u32,
    pub sign: i64,
}

/// A realization: the pairing input together with the tranche bookkeeping
/// and the flag marking levels that received no edges (the module is then
/// Fredholm-only: it has no spectral-triple metric content).
#[derive(Debug, Clone)]
pub struct Realization {
    pub input: PairingInput,
    pub tranches: Vec<RealizedTranche>,
    pub empty_levels: Vec<usize>,
    pub fredholm_only: bool,
}

/// Realize a target homomorphism with the lexicographically least
/// admissible choice function (leftmost child everywhere).
pub fn realize(tree: &WordTree, target: &Homomorphism) -> Result<Realization> {
    let choice = make_choice(tree, &ChoiceRule::Leftmost)?;
    realize_with_choice(tree, target, choice)
}

/// Realize a target homomorphism against a caller-supplied choice
/// function: at each branching vertex with value m0 and children values
/// m1..mk ordered with the chosen child first, place
/// (m1 + ... + mj) - m0 edges from child j to child j+1, negative counts
/// flipping the direction. The pairing of the result returns the target
/// exactly on all vertices up to its depth.
pub fn realize_with_choice(
    tree: &WordTree,
    target: &Homomorphism,
    choice: ChoiceFunction,
) -> Result<Realization> {
    if target.root_value() != 0 {
        return Err(Error::RootObstruction { value: target.root_value() });
    }
    let depth = target.depth();
    let mut edges = Vec::new();
    let mut tranches = Vec::new();
    let mut empty_levels = Vec::new();
    for level in 1..=depth {
        let mut any = false;
        for u in tree.level_range(level - 1) {
            let kids: Vec<u32> = tree.children(u).collect();
            if kids.len() < 2 {
                continue;
            }
            // Chosen child first, the rest in id (lexicographic) order.
            let first = choice.next(u);
            let mut ordered = vec![first];
            ordered.extend(kids.iter().copied().filter(|&c| c != first));
            let m0 = target.value(u);
            let mut prefix = 0i64;
            for j in 0..ordered.len() - 1 {
                prefix += target.value(ordered[j]);
                let count = prefix - m0;
                if count == 0 {
                    continue;
                }
                any = true;
                let (src, rng) = if count > 0 {
                    (ordered[j], ordered[j + 1])
                } else {
                    (ordered[j + 1], ordered[j])
                };
                tranches.push(RealizedTranche {
                    level,
                    source: src,
                    range: rng,
                    multiplicity: count.unsigned_abs() as u32,
                    sign: count.signum(),
                });
                for m in 0..count.unsigned_abs() as u32 {
                    let delta = LengthFunction::Reciprocal.eval(level);
                    edges.push(HorizontalEdge {
                        source: src,
                        range: rng,
                        level: level as u32,
                        delta,
                        orientation: Orientation::Positive,
                        multiplicity_id: m,
                    });
                    edges.push(HorizontalEdge {
                        source: rng,
                        range: src,
                        level: level as u32,
                        delta,
                        orientation: Orientation::Negative,
                        multiplicity_id: m,
                    });
                }
            }
        }
        if !any {
            empty_levels.push(level);
        }
    }
    let fredholm_only = !empty_levels.is_empty();
    let input = PairingInput { edges, choice, depth };
    input.validate(tree)?;
    Ok(Realization { input, tranches, empty_levels, fredholm_only })
}

/// TSV dump of the realized tranches: level, source, range, multiplicity,
/// sign.
pub fn render_realization_tsv(tree: &WordTree, real: &Realization) -> String {
    let mut s = String::from("level\tsource\trange\tmultiplicity\tsign\n");
    for t in &real.tranches {
        s.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            t.level,
            tree.render(t.source),
            tree.render(t.range),
            t.multiplicity,
            if t.sign >= 0 { "+1" } else { "-1" }
        ));
    }
    s
}

/// TSV dump of a homomorphism: word, value, for all vertices up to its
/// depth in id order.
pub fn render_homomorphism_tsv(tree: &WordTree, hom: &Homomorphism) -> String {
    let mut s = String::from("word\tvalue\n");
    for v in 0..tree.level_range(hom.depth()).end {
        s.push_str(&format!("{}\t{}\n", tree.render(v), hom.value(v)));
    }
    s
}

/// Parse the word/value TSV back into a homomorphism: every vertex up to
/// the deepest mentioned level must be present, and the sheaf condition is
/// re-validated.
pub fn parse_homomorphism_tsv(tree: &WordTree, text: &str) -> Result<Homomorphism> {
    let mut seen: Vec<Option<i64>> = vec![None; tree.n_nodes()];
    let mut depth = 0usize;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line == "word\tvalue" {
            continue;
        }
        let mut parts = line.split('\t');
        let (word_s, value_s) = match (parts.next(), parts.next()) {
            (Some(w), Some(x)) => (w.trim(), x.trim()),
            _ => {
                return Err(Error::Parse {
                    line: lineno + 1,
                    col: 1,
                    msg: "expected word<TAB>value".into(),
                })
            }
        };
        let word = tree.alphabet().parse_word(word_s).map_err(|e| Error::Parse {
            line: lineno + 1,
            col: 1,
            msg: format!("bad word \"{word_s}\": {e}"),
        })?;
        let v = tree.find(&word).ok_or_else(|| Error::Parse {
            line: lineno + 1,
            col: 1,
            msg: format!("\"{word_s}\" is not a vertex of this tree"),
        })?;
        let value: i64 = value_s.parse().map_err(|_| Error::Parse {
            line: lineno + 1,
            col: word_s.len() + 2,
            msg: format!("bad integer \"{value_s}\""),
        })?;
        seen[v as usize] = Some(value);
        depth = depth.max(tree.level_of(v));
    }
    if depth == 0 {
        return Err(Error::Invalid("homomorphism file names no vertex below the root".into()));
    }
    let mut values = vec![0i64; tree.level_range(depth).end as usize];
    for v in 0..values.len() as u32 {
        match seen[v as usize] {
            Some(x) => values[v as usize] = x,
            None => {
                return Err(Error::Invalid(format!(
                    "vertex \"{}\" (level {}) is missing from the homomorphism file",
                    tree.render(v),
                    tree.level_of(v)
                )))
            }
        }
    }
    Homomorphism::from_values(tree, depth, values)
}

/// One sampled choice function checked against the minimal edge set.
#[derive(Debug, Clone)]
pub struct NontrivialitySample {
    pub rule: String,
    pub phi_one: i64,
    /// First vertex (in level, id order) with a nonzero pairing.
    pub witness: Option<(u32, i64)>,
}

/// Nontriviality report over sampled choice functions: with any minimal
/// edge set, the unit pairs to zero while some cylinder pairs nontrivially
/// whenever the tree branches at all.
#[derive(Debug, Clone)]
pub struct NontrivialityReport {
    pub samples: Vec<NontrivialitySample>,
    pub vacuous: bool,
    pub all_nontrivial: bool,
}

pub fn nontriviality_check(
    tree: &WordTree,
    oracle: &LanguageOracle,
    seeds: &[u64],
) -> Result<NontrivialityReport> {
    let edges = horizontal_edges(
        tree,
        oracle,
        EdgeScheme::Minimal,
        &LengthFunction::Reciprocal,
        tree.depth(),
    )?;
    if edges.is_empty() {
        return Ok(NontrivialityReport { samples: Vec::new(), vacuous: true, all_nontrivial: true });
    }
    let mut samples = Vec::new();
    let mut all_nontrivial = true;
    for &seed in seeds {
        let choice = make_choice(tree, &ChoiceRule::WeightedOnce { seed })?;
        let input = PairingInput { edges: edges.clone(), choice, depth: tree.depth() };
        let phi_one = pairing(tree, &input, ROOT)?;
        let mut witness = None;
        'search: for lvl in 1..=tree.depth() {
            for v in tree.level_range(lvl) {
                let val = pairing(tree, &input, v)?;
                if val != 0 {
                    witness = Some((v, val));
                    break 'search;
                }
            }
        }
        all_nontrivial &= phi_one == 0 && witness.is_some();
        samples.push(NontrivialitySample {
            rule: input.choice.rule_name.clone(),
            phi_one,
            witness,
        });
    }
    Ok(NontrivialityReport { samples, vacuous: false, all_nontrivial })
}

pub fn render_nontriviality(tree: &WordTree, report: &NontrivialityReport) -> String {
    if report.vacuous {
        return "nontriviality: vacuous (no branching vertex, minimal edge set is empty)\n"
            .to_string();
    }
    let mut s = String::from("sample\trule\tphi(1)\twitness\tvalue\n");
    for (i, sample) in report.samples.iter().enumerate() {
        let (w, val) = match sample.witness {
            Some((v, x)) => (tree.render(v), x.to_string()),
            None => ("-".into(), "-".into()),
        };
        s.push_str(&format!("{i}\t{}\t{}\t{w}\t{val}\n", sample.rule, sample.phi_one));
    }
    s.push_str(&format!(
        "all samples nontrivial: {}\n",
        if report.all_nontrivial { "yes" } else { "NO" }
    ));
    s
}
