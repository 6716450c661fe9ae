//! Choice-averaged quadratic forms on locally constant functions, their
//! generalized eigenproblems, Weyl counting, boundedness scans, and the
//! self-similar eigenvalue recursion.
//!
//! The form is assembled exactly: averaging the squared differences of a
//! function along a horizontal edge over all choice functions reduces to a
//! closed-form expectation in the cylinder weights, because the choices at
//! incomparable vertices are independent under the product measure. The 1/2
//! in front of the trace form cancels against oriented double counting, so
//! every unoriented edge is summed once.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::measure::{path_tree_measure, TreeMeasure};
use crate::selfsim::{path_tree, self_similar_edges, FundamentalEdges, SubstitutionGraph};
use crate::tree::{HorizontalEdge, LengthFunction, Orientation, WordTree};
use crate::words::Word;

/// How the product measure on choices weights the children of a vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChoiceWeights {
    /// A child c of v is chosen with probability mu[c] / mu[v]; the induced
    /// measure on the boundary is the cylinder measure itselt.
    Conditional,
    /// Every child of v is equally likely; consistent only with the
    /// even-splitting measure.
    Uniform,
}

/// The assembled quadratic form on depth-n cylinder functions: Q is the
/// averaged edge form, M the diagonal mass matrix of cylinder measures.
/// Constants lie exactly in the kernel of Q because every edge term has
/// vanishing row sums.
#[derive(Debug, Clone)]
pub struct FormMatrix {
    pub s: f64,
    pub depth: usize,
    pub weights: ChoiceWeights,
    /// Vertex ids of the depth-n cylinders, in tree order.
    pub basis: Vec<u32>,
    /// The cylinder words, parallel to `basis`.
    pub words: Vec<Word>,
    pub q: DMatrix<f64>,
    pub m: DVector<f64>,
    /// Number of unoriented edges that contributed a term.
    pub edges_used: usize,
}

impl FormMatrix {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// The form value Q(f, f) of a vector in the cylinder basis.
    pub fn quadratic(&self, f: &[f64]) -> f64 {
        let x = DVector::from_column_slice(f);
        (x.transpose() * &self.q * &x)[(0, 0)]
    }
}

fn weight_mode_consistent(
    tree: &WordTree,
    measure: &TreeMeasure,
    weights: ChoiceWeights,
    depth: usize,
) -> Result<()> {
    for v in 0..tree.n_nodes() as u32 {
        if tree.level_of(v) > depth {
            break;
        }
        if measure.mu(v) <= 0.0 {
            return Err(Error::Invalid(format!(
                "cylinder measure must be positive; vertex {v} has mass {}",
                measure.mu(v)
            )));
        }
    }
    if weights == ChoiceWeights::Uniform {
        for v in 0..tree.n_nodes() as u32 {
            if tree.level_of(v) >= depth {
                break;
            }
            let k = tree.n_children(v);
            if k < 2 {
                continue;
            }
            let share = measure.mu(v) / k as f64;
            for c in tree.children(v) {
                if (measure.mu(c) - share).abs() > 1e-9 * measure.mu(v) {
                    return Err(Error::Invalid(
                        "uniform choice weights require the even-splitting measure; \
                         pass conditional weights or the uniform branching measure"
                            .into(),
                    ));
                }
            }
        }
    }
    Ok(())
}

/// Ancestor of `v` at the given level (the vertex itself when already there).
fn ancestor_at(tree: &WordTree, v: u32, level: usize) -> u32 {
    let mut cur = v;
    for _ in level..tree.level_of(v) {
        cur = tree.parent(cur).expect("walking above the root");
    }
    cur
}

/// The distribution of the cylinder at depth `n` reached by a random choice
/// path started at `v`: sparse pairs (basis position, probability). A vertex
/// at or below depth n lands in the cylinder of its ancestor surely.
fn choice_spread(
    tree: &WordTree,
    measure: &TreeMeasure,
    weights: ChoiceWeights,
    index: &HashMap<u32, usize>,
    v: u32,
    n: usize,
) -> Vec<(usize, f64)> {
    let lv = tree.level_of(v);
    if lv >= n {
        let anc = ancestor_at(tree, v, n);
        return vec![(index[&anc], 1.0)];
    }
    let mut frontier: Vec<(u32, f64)> = vec![(v, 1.0)];
    for _ in lv..n {
        let mut next = Vec::with_capacity(frontier.len() * 2);
        for (x, p) in frontier {
            let k = tree.n_children(x);
            for c in tree.children(x) {
                let pc = match weights {
                    ChoiceWeights::Conditional => p * measure.mu(c) / measure.mu(x),
                    ChoiceWeights::Uniform => p / k as f64,
                };
                next.push((c, pc));
            }
        }
        frontier = next;
    }
    frontier.into_iter().map(|(x, p)| (index[&x], p)).collect()
}

/// Assemble the choice-averaged form on depth-`depth` cylinders from an
/// unoriented horizontal edge set. For every edge h = (v1, v2) the averaged
/// term is delta(h)^(s-2) times
///
///   [u = w] (a1(u) + a2(u)) - a1(u) a2(w) - a2(u) a1(w),
///
/// where a_i is the hitting distribution of the choice path from v_i on the
/// depth-n cylinders; the cross terms factor because choices in the disjoint
/// subtrees under v1 and v2 are independent. Edges buried inside a single
/// cylinder contribute zero and are skipped.
pub fn assemble_form(
    tree: &WordTree,
    edges: &[HorizontalEdge],
    measure: &TreeMeasure,
    weights: ChoiceWeights,
    s: f64,
    depth: usize,
) -> Result<FormMatrix> {
    if depth < 1 || depth > tree.depth() {
        return Err(Error::InsufficientDepth {
            what: "tree for the requested form depth".into(),
            need: depth.max(1),
            got: tree.depth(),
        });
    }
    weight_mode_consistent(tree, measure, weights, depth)?;
    let basis: Vec<u32> = tree.level_range(depth).collect();
    let index: HashMap<u32, usize> = basis.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let dim = basis.len();
    let mut q = DMatrix::<f64>::zeros(dim, dim);
    let mut used = 0usize;
    for h in edges.iter().filter(|h| h.orientation == Orientation::Positive) {
        let (l1, l2) = (tree.level_of(h.source), tree.level_of(h.range));
        if l1 >= depth && l2 >= depth {
            if ancestor_at(tree, h.source, depth) == ancestor_at(tree, h.range, depth) {
                continue;
            }
        }
        let w = h.delta.powf(s - 2.0);
        let a1 = choice_spread(tree, measure, weights, &index, h.source, depth);
        let a2 = choice_spread(tree, measure, weights, &index, h.range, depth);
        for &(i, p) in &a1 {
            q[(i, i)] += w * p;
        }
        for &(i, p) in &a2 {
            q[(i, i)] += w * p;
        }
        for &(i, p) in &a1 {
            for &(j, r) in &a2 {
                q[(i, j)] -= w * p * r;
                q[(j, i)] -= w * p * r;
            }
        }
        used += 1;
    }
    let m = DVector::from_iterator(dim, basis.iter().map(|&v| measure.mu(v)));
    let words = basis.iter().map(|&v| tree.word(v)).collect();
    Ok(FormMatrix { s, depth, weights, basis, words, q, m, edges_used: used })
}

/// A difference candidate chi_u / mu[u] - chi_u' / mu[u'] over a sibling
/// pair under a branching vertex, with its Rayleigh quotient and the
/// generalized-eigenproblem residual |Q c - rho M c| / |M c|.
#[derive(Debug, Clone)]
pub struct PhiCheck {
    pub vertex: Word,
    pub pair: (Word, Word),
    pub rayleigh: f64,
    pub residual: f64,
}

fn phi_candidate_vector(
    tree: &WordTree,
    form: &FormMatrix,
    index: &HashMap<u32, usize>,
    u: u32,
    uprime: u32,
) -> DVector<f64> {
    let dim = form.dim();
    let mut c = DVector::<f64>::zeros(dim);
    for (child, sign) in [(u, 1.0), (uprime, -1.0)] {
        let mass: f64 = descendants_at(tree, child, form.depth)
            .iter()
            .map(|&x| form.m[index[&x]])
            .sum();
        for x in descendants_at(tree, child, form.depth) {
            c[index[&x]] = sign / mass;
        }
    }
    c
}

fn descendants_at(tree: &WordTree, v: u32, n: usize) -> Vec<u32> {
    let lv = tree.level_of(v);
    if lv >= n {
        return vec![ancestor_at(tree, v, n)];
    }
    let mut frontier = vec![v];
    for _ in lv..n {
        frontier = frontier.iter().flat_map(|&x| tree.children(x)).collect();
    }
    frontier
}

/// Rayleigh data for every consecutive sibling-pair candidate under every
/// branching vertex above the cylinder depth. For binary branching with one
/// edge per branching vertex these candidates are exact eigenvectors and the
/// residuals vanish to rounding.
pub fn phi_residuals(tree: &WordTree, form: &FormMatrix) -> Result<Vec<PhiCheck>> {
    let index: HashMap<u32, usize> =
        form.basis.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let mut out = Vec::new();
    for v in 0..tree.n_nodes() as u32 {
        if tree.level_of(v) >= form.depth {
            break;
        }
        let kids: Vec<u32> = tree.children(v).collect();
        if kids.len() < 2 {
            continue;
        }
        for pair in kids.windows(2) {
            let c = phi_candidate_vector(tree, form, &index, pair[0], pair[1]);
            let qc = &form.q * &c;
            let mc = c.component_mul(&form.m);
            let num = c.dot(&qc);
            let den = c.dot(&mc);
            let rayleigh = num / den;
            let residual = (&qc - rayleigh * &mc).norm() / mc.norm();
            out.push(PhiCheck {
                vertex: tree.word(v),
                pair: (tree.word(pair[0]), tree.word(pair[1])),
                rayleigh,
                residual,
            });
        }
    }
    Ok(out)
}

/// Solved generalized eigenproblem Q x = lambda M x. Eigenvalues ascend;
/// eigenvectors are M-orthonormal columns. `labels` ties an eigenvalue to
/// the branching vertex whose sibling-difference candidate reproduces it
/// (residual below 1e-6), when one does.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    pub s: f64,
    pub depth: usize,
    pub eigenvalues: Vec<f64>,
    pub vectors: DMatrix<f64>,
    pub labels: Vec<Option<Word>>,
}

pub fn eigensystem(form: &FormMatrix, tree: &WordTree) -> Result<EigenSystem> {
    let dim = form.dim();
    if form.m.iter().any(|&x| x <= 0.0) {
        return Err(Error::Invalid("mass matrix must be positive definite".into()));
    }
    let d_inv_sqrt = DVector::from_iterator(dim, form.m.iter().map(|&x| 1.0 / x.sqrt()));
    let mut b = DMatrix::<f64>::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..dim {
            b[(i, j)] = form.q[(i, j)] * d_inv_sqrt[i] * d_inv_sqrt[j];
        }
    }
    let b = (&b + b.transpose()) * 0.5;
    let se = b.symmetric_eigen();
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&i, &j| se.eigenvalues[i].partial_cmp(&se.eigenvalues[j]).unwrap());
    let eigenvalues: Vec<f64> = order.iter().map(|&i| se.eigenvalues[i]).collect();
    let mut vectors = DMatrix::<f64>::zeros(dim, dim);
    for (col, &i) in order.iter().enumerate() {
        for row in 0..dim {
            vectors[(row, col)] = se.eigenvectors[(row, i)] * d_inv_sqrt[row];
        }
    }
    let mut labels: Vec<Option<Word>> = vec![None; dim];
    for check in phi_residuals(tree, form)? {
        if check.residual > 1e-6 {
            continue;
        }
        let mut best = 0usize;
        for (i, &lv) in eigenvalues.iter().enumerate() {
            if (lv - check.rayleigh).abs() < (eigenvalues[best] - check.rayleigh).abs() {
                best = i;
            }
        }
        if labels[best].is_none() {
            labels[best] = Some(check.vertex);
        }
    }
    Ok(EigenSystem { s: form.s, depth: form.depth, eigenvalues, vectors, labels })
}

impl EigenSystem {
    pub fn max_eigenvalue(&self) -> f64 {
        *self.eigenvalues.last().unwrap()
    }

    /// Rows `depth, index, eigenvalue, branching_vertex_or_none`.
    pub fn render_tsv(&self, tree: &WordTree) -> String {
        let mut out = String::from("depth\tindex\teigenvalue\tbranching_vertex\n");
        for (i, lv) in self.eigenvalues.iter().enumerate() {
            let label = match &self.labels[i] {
                Some(w) => tree.alphabet().render(w),
                None => "none".into(),
            };
            out.push_str(&format!("{}\t{}\t{:.12e}\t{}\n", self.depth, i, lv, label));
        }
        out
    }
}

/// The exact eigenvalue of the sibling-difference eigenvector at a binary
/// branching vertex joined by exactly one unoriented edge: the edge term
/// plus one shift per ancestor that is itself an endpoint of a horizontal
/// edge. Valid for choice weights consistent with the measure; None when
/// the local shape does not match.
pub fn exact_sibling_eigenvalue(
    tree: &WordTree,
    edges: &[HorizontalEdge],
    measure: &TreeMeasure,
    s: f64,
    v: u32,
) -> Option<f64> {
    let kids: Vec<u32> = tree.children(v).collect();
    if kids.len() != 2 {
        return None;
    }
    let positive: Vec<&HorizontalEdge> = edges
        .iter()
        .filter(|h| h.orientation == Orientation::Positive)
        .collect();
    let child_edges: Vec<&&HorizontalEdge> = positive
        .iter()
        .filter(|h| {
            (h.source == kids[0] && h.range == kids[1])
                || (h.source == kids[1] && h.range == kids[0])
        })
        .collect();
    if child_edges.len() != 1 {
        return None;
    }
    let mut lambda = child_edges[0].delta.powf(s - 2.0)
        * (1.0 / measure.mu(kids[0]) + 1.0 / measure.mu(kids[1]));
    let mut cur = v;
    loop {
        if tree.level_of(cur) == 0 {
            break;
        }
        for h in &positive {
            if h.source == cur || h.range == cur {
                lambda += h.delta.powf(s - 2.0) / measure.mu(cur);
            }
        }
        match tree.parent(cur) {
            Some(p) => cur = p,
            None => break,
        }
    }
    Some(lambda)
}

/// Monte-Carlo average of the un-averaged edge form over sampled choice
/// functions, with per-entry standard errors. The estimator samples one
/// child per branching vertex above the cylinder depth (weighted per the
/// mode) and accumulates the sparse edge contributions.
#[derive(Debug, Clone)]
pub struct MonteCarloForm {
    pub samples: usize,
    pub mean: DMatrix<f64>,
    pub stderr: DMatrix<f64>,
}

pub fn monte_carlo_form(
    tree: &WordTree,
    edges: &[HorizontalEdge],
    measure: &TreeMeasure,
    weights: ChoiceWeights,
    s: f64,
    depth: usize,
    samples: usize,
    seed: u64,
) -> Result<MonteCarloForm> {
    if samples < 2 {
        return Err(Error::Invalid("need at least two Monte-Carlo samples".into()));
    }
    if depth < 1 || depth > tree.depth() {
        return Err(Error::InsufficientDepth {
            what: "tree for the requested form depth".into(),
            need: depth.max(1),
            got: tree.depth(),
        });
    }
    weight_mode_consistent(tree, measure, weights, depth)?;
    let basis: Vec<u32> = tree.level_range(depth).collect();
    let index: HashMap<u32, usize> = basis.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let dim = basis.len();

    // Deterministic skeleton plus one weighted draw per branching vertex
    // above the cylinder depth, in vertex order.
    let mut skeleton: Vec<u32> = (0..tree.n_nodes() as u32).collect();
    let mut branching: Vec<(u32, Vec<u32>, Vec<f64>)> = Vec::new();
    for v in 0..tree.n_nodes() as u32 {
        let kids: Vec<u32> = tree.children(v).collect();
        match kids.len() {
            0 => skeleton[v as usize] = v,
            1 => skeleton[v as usize] = kids[0],
            _ => {
                if tree.level_of(v) < depth {
                    let mut cum = Vec::with_capacity(kids.len());
                    let mut acc = 0.0;
                    for &c in &kids {
                        acc += match weights {
                            ChoiceWeights::Conditional => measure.mu(c),
                            ChoiceWeights::Uniform => 1.0,
                        };
                        cum.push(acc);
                    }
                    branching.push((v, kids.clone(), cum));
                }
                skeleton[v as usize] = kids[0];
            }
        }
    }
    let positive: Vec<(&HorizontalEdge, f64)> = edges
        .iter()
        .filter(|h| h.orientation == Orientation::Positive)
        .map(|h| (h, h.delta.powf(s - 2.0)))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut next = skeleton.clone();
    let mut sum = vec![0.0f64; dim * dim];
    let mut sumsq = vec![0.0f64; dim * dim];
    let mut buf = vec![0.0f64; dim * dim];
    let mut touched: Vec<usize> = Vec::new();

    for _ in 0..samples {
        for (v, kids, cum) in &branching {
            let total = *cum.last().unwrap();
            let r = rng.random::<f64>() * total;
            let mut pick = kids.len() - 1;
            for (i, &c) in cum.iter().enumerate() {
                if r < c {
                    pick = i;
                    break;
                }
            }
            next[*v as usize] = kids[pick];
        }
        for (h, w) in &positive {
            let x1 = cylinder_of(tree, &next, &index, h.source, depth);
            let x2 = cylinder_of(tree, &next, &index, h.range, depth);
            if x1 == x2 {
                continue;
            }
            for (i, j, val) in [
                (x1, x1, *w),
                (x2, x2, *w),
                (x1.min(x2), x1.max(x2), -*w),
            ] {
                let cell = i * dim + j;
                if buf[cell] == 0.0 {
                    touched.push(cell);
                }
                buf[cell] += val;
            }
        }
        for &cell in &touched {
            sum[cell] += buf[cell];
            sumsq[cell] += buf[cell] * buf[cell];
            buf[cell] = 0.0;
        }
        touched.clear();
    }

    let n = samples as f64;
    let mut mean = DMatrix::<f64>::zeros(dim, dim);
    let mut stderr = DMatrix::<f64>::zeros(dim, dim);
    for i in 0..dim {
        for j in i..dim {
            let cell = i * dim + j;
            let mu = sum[cell] / n;
            let var = ((sumsq[cell] - sum[cell] * sum[cell] / n) / (n - 1.0)).max(0.0);
            let se = (var / n).sqrt();
            mean[(i, j)] = mu;
            mean[(j, i)] = mu;
            stderr[(i, j)] = se;
            stderr[(j, i)] = se;
        }
    }
    Ok(MonteCarloForm { samples, mean, stderr })
}

fn cylinder_of(
    tree: &WordTree,
    next: &[u32],
    index: &HashMap<u32, usize>,
    v: u32,
    depth: usize,
) -> usize {
    let lv = tree.level_of(v);
    if lv >= depth {
        return index[&ancestor_at(tree, v, depth)];
    }
    let mut cur = v;
    for _ in lv..depth {
        cur = next[cur as usize];
    }
    index[&cur]
}

/// Per-entry comparison of a Monte-Carlo estimate against the closed form:
/// stochastic entries must sit within 3 standard errors, entries with zero
/// empirical variance within a fixed tolerance.
#[derive(Debug, Clone)]
pub struct McAgreement {
    pub pass: bool,
    pub max_sigmas: f64,
    pub worst_entry: (usize, usize),
}

pub fn mc_agreement(mc: &MonteCarloForm, form: &FormMatrix) -> McAgreement {
    let dim = form.dim();
    let mut max_sigmas = 0.0f64;
    let mut worst = (0, 0);
    let mut pass = true;
    for i in 0..dim {
        for j in i..dim {
            let diff = (mc.mean[(i, j)] - form.q[(i, j)]).abs();
            let se = mc.stderr[(i, j)];
            if se > 0.0 {
                let z = diff / se;
                if z > max_sigmas {
                    max_sigmas = z;
                    worst = (i, j);
                }
                if z > 3.0 {
                    pass = false;
                }
            } else if diff > 1e-9 * form.q[(i, j)].abs().max(1.0) {
                pass = false;
                worst = (i, j);
            }
        }
    }
    McAgreement { pass, max_sigmas, worst_entry: worst }
}

/// Merged eigenvalue counting function over a ladder of truncations and its
/// fitted log-log exponent over the central quantile window.
#[derive(Debug, Clone)]
pub struct WeylReport {
    /// The merged spectrum, ascending, zeros included. Truncation spectra
    /// nest (depth stability), so merging takes each eigenvalue once with
    /// the largest multiplicity any single system shows; pooling with
    /// repetition would overweight the shallow part of the spectrum and
    /// flatten the fitted exponent.
    pub lambdas: Vec<f64>,
    pub exponent: f64,
    pub stderr: f64,
    /// The [0.2, 0.9] quantile window of the merged positive eigenvalues
    /// used for the fit.
    pub window: (f64, f64),
    pub n_systems: usize,
    /// Positive eigenvalues summed over the systems before merging; the
    /// refusal threshold guards this sample size.
    pub pooled_positives: usize,
}

impl WeylReport {
    /// N(lambda): how many pooled eigenvalues are at most lambda.
    pub fn count_below(&self, lambda: f64) -> usize {
        self.lambdas.partition_point(|&x| x <= lambda)
    }

    /// Rows `lambda, count` for every distinct positive eigenvalue.
    pub fn render_tsv(&self) -> String {
        let mut out = String::from("lambda\tcount\n");
        let mut last = f64::NEG_INFINITY;
        for &lv in &self.lambdas {
            if lv <= 1e-12 || (lv - last).abs() <= 1e-12 * lv.abs() {
                continue;
            }
            last = lv;
            out.push_str(&format!("{:.12e}\t{}\n", lv, self.count_below(lv)));
        }
        out
    }
}

/// Fit N(lambda) ~ lambda^alpha on the merged spectra of several systems.
/// Refuses thin samples: a stable fit needs at least 30 positive
/// eigenvalues pooled over the input systems.
pub fn weyl_count(systems: &[EigenSystem]) -> Result<WeylReport> {
    let pooled_positives: usize = systems
        .iter()
        .map(|s| s.eigenvalues.iter().filter(|&&x| x > 1e-12).count())
        .sum();
    if pooled_positives < 30 {
        return Err(Error::TooFewEigenvalues { got: pooled_positives, need: 30 });
    }
    let mut tagged: Vec<(f64, usize)> = systems
        .iter()
        .enumerate()
        .flat_map(|(t, s)| s.eigenvalues.iter().map(move |&x| (x, t)))
        .collect();
    tagged.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut lambdas = Vec::new();
    let mut i = 0;
    while i < tagged.len() {
        let anchor = tagged[i].0;
        let mut per = vec![0usize; systems.len()];
        let mut j = i;
        while j < tagged.len() && tagged[j].0 <= anchor + 1e-9 * anchor.abs().max(1.0) {
            per[tagged[j].1] += 1;
            j += 1;
        }
        let multiplicity = per.iter().copied().max().unwrap_or(0);
        let mean = tagged[i..j].iter().map(|t| t.0).sum::<f64>() / (j - i) as f64;
        for _ in 0..multiplicity {
            lambdas.push(mean);
        }
        i = j;
    }
    let positives: Vec<f64> = lambdas.iter().copied().filter(|&x| x > 1e-12).collect();
    if positives.len() < 4 {
        return Err(Error::TooFewEigenvalues { got: positives.len(), need: 4 });
    }
    let k = positives.len();
    let lo = positives[(0.2 * (k - 1) as f64).floor() as usize];
    let hi = positives[(0.9 * (k - 1) as f64).floor() as usize];
    let report = WeylReport {
        lambdas,
        exponent: 0.0,
        stderr: 0.0,
        window: (lo, hi),
        n_systems: systems.len(),
        pooled_positives,
    };
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut last = f64::NEG_INFINITY;
    for &lv in &positives {
        if lv < lo || lv > hi || (lv - last).abs() <= 1e-12 * lv.abs() {
            continue;
        }
        last = lv;
        xs.push(lv.ln());
        ys.push((report.count_below(lv) as f64).ln());
    }
    if xs.len() < 3 {
        return Err(Error::TooFewEigenvalues { got: xs.len(), need: 3 });
    }
    let n = xs.len() as f64;
    let xbar = xs.iter().sum::<f64>() / n;
    let ybar = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - xbar) * (x - xbar)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xbar) * (y - ybar)).sum();
    let slope = sxy / sxx;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let fit = ybar + slope * (x - xbar);
            (y - fit) * (y - fit)
        })
        .sum();
    let stderr = (ss_res / (n - 2.0) / sxx).sqrt();
    Ok(WeylReport { exponent: slope, stderr, ..report })
}

/// Trend of the largest eigenvalue across depths at one exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trend {
    Growing,
    Plateau,
    Indeterminate,
}

impl std::fmt::Display for Trend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Trend::Growing => "growing",
            Trend::Plateau => "plateau",
            Trend::Indeterminate => "indeterminate",
        };
        write!(f, "{s}")
    }
}

#[derive(Debug, Clone)]
pub struct BoundednessReport {
    pub s_values: Vec<f64>,
    pub depths: Vec<usize>,
    /// max_eigenvalue[i][j] is the largest eigenvalue at s_values[i],
    /// depths[j].
    pub max_eigenvalue: Vec<Vec<f64>>,
    pub trends: Vec<Trend>,
}

impl BoundednessReport {
    pub fn render_tsv(&self) -> String {
        let mut out = String::from("s\tdepth\tmax_eigenvalue\ttrend\n");
        for (i, &s) in self.s_values.iter().enumerate() {
            for (j, &d) in self.depths.iter().enumerate() {
                out.push_str(&format!(
                    "{:.6}\t{}\t{:.12e}\t{}\n",
                    s, d, self.max_eigenvalue[i][j], self.trends[i]
                ));
            }
        }
        out
    }
}

fn classify_trend(values: &[f64]) -> Trend {
    let k = values.len();
    if values.iter().all(|&v| v.abs() < 1e-12) {
        return Trend::Plateau;
    }
    let last_change = (values[k - 1] - values[k - 2]).abs() / values[k - 2].abs().max(1e-300);
    if last_change < 0.02 {
        return Trend::Plateau;
    }
    if values.windows(2).all(|w| w[1] > w[0] * (1.0 + 1e-12)) {
        return Trend::Growing;
    }
    Trend::Indeterminate
}

/// Largest-eigenvalue trends over a grid of exponents and a ladder of
/// depths: growth at an exponent is the unbounded regime, a plateau
/// (relative change below 2% over the last two depths) the bounded one.
pub fn boundedness_scan(
    tree: &WordTree,
    edges: &[HorizontalEdge],
    measure: &TreeMeasure,
    weights: ChoiceWeights,
    s_grid: &[f64],
    depths: &[usize],
) -> Result<BoundednessReport> {
    if s_grid.is_empty() || depths.len() < 2 {
        return Err(Error::Invalid(
            "boundedness scan needs an exponent grid and at least two depths".into(),
        ));
    }
    if depths.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Invalid("depths must increase strictly".into()));
    }
    let mut max_eigenvalue = Vec::with_capacity(s_grid.len());
    let mut trends = Vec::with_capacity(s_grid.len());
    for &s in s_grid {
        let mut row = Vec::with_capacity(depths.len());
        for &d in depths {
            let form = assemble_form(tree, edges, measure, weights, s, d)?;
            let sys = eigensystem(&form, tree)?;
            row.push(sys.max_eigenvalue());
        }
        trends.push(classify_trend(&row));
        max_eigenvalue.push(row);
    }
    Ok(BoundednessReport {
        s_values: s_grid.to_vec(),
        depths: depths.to_vec(),
        max_eigenvalue,
        trends,
    })
}

/// One prepending family of the eigenvalue recursion: prepending the level-1
/// edge `eps0` to a branching path multiplies its eigenvalues by the uniform
/// growth factor and adds a correction, nonzero exactly when the one-edge
/// path of `eps0` is itself an endpoint of a level-1 horizontal edge.
#[derive(Debug, Clone)]
pub struct CkFamily {
    pub eps0: u32,
    pub label: String,
    pub correction: f64,
    pub n_pairs: usize,
    pub max_deviation: f64,
}

#[derive(Debug, Clone)]
pub struct CkReport {
    /// Largest absolute violation of the truncated partial-isometry
    /// relation; exact arithmetic, so anything nonzero is a failure.
    pub relation_violation: i64,
    /// The per-level eigenvalue growth factor rho^(s-2) lambda_PF.
    pub growth: f64,
    pub families: Vec<CkFamily>,
    pub n_branching_checked: usize,
}

impl CkReport {
    pub fn pass(&self, tol: f64) -> bool {
        self.relation_violation == 0 && self.families.iter().all(|f| f.max_deviation < tol)
    }

    pub fn render_tsv(&self) -> String {
        let mut out = String::from("eps0\tlabel\tcorrection\tpairs\tmax_deviation\n");
        for f in &self.families {
            out.push_str(&format!(
                "{}\t{}\t{:.12e}\t{}\t{:.3e}\n",
                f.eps0, f.label, f.correction, f.n_pairs, f.max_deviation
            ));
        }
        out
    }
}

/// The spectrum block attached to one branching vertex: solve the edge form
/// among its children against the child masses on the complement of the
/// constants, then add the ancestor shift. The union of these blocks over
/// all branching vertices, plus the zero of the constants, is the full
/// spectrum of the assembled form.
fn local_spectrum(
    tree: &WordTree,
    incident: &HashMap<u32, Vec<(f64, u32)>>,
    measure: &TreeMeasure,
    s: f64,
    v: u32,
) -> Vec<f64> {
    let kids: Vec<u32> = tree.children(v).collect();
    let k = kids.len();
    let pos: HashMap<u32, usize> = kids.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let mut l = DMatrix::<f64>::zeros(k, k);
    if let Some(list) = incident.get(&v) {
        let _ = list;
    }
    for (&c, &i) in &pos {
        if let Some(list) = incident.get(&c) {
            for &(delta, other) in list {
                if let Some(&j) = pos.get(&other) {
                    if i < j {
                        let w = delta.powf(s - 2.0);
                        l[(i, i)] += w;
                        l[(j, j)] += w;
                        l[(i, j)] -= w;
                        l[(j, i)] -= w;
                    }
                }
            }
        }
    }
    let mut shift = 0.0;
    let mut cur = v;
    while tree.level_of(cur) >= 1 {
        if let Some(list) = incident.get(&cur) {
            for &(delta, _) in list {
                shift += delta.powf(s - 2.0) / measure.mu(cur);
            }
        }
        cur = tree.parent(cur).expect("level >= 1 has a parent");
    }
    // Reduce to the mass-orthogonal complement of constants via a
    // Householder basis.
    let d_inv_sqrt = DVector::from_iterator(k, kids.iter().map(|&c| 1.0 / measure.mu(c).sqrt()));
    let mut b = DMatrix::<f64>::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            b[(i, j)] = l[(i, j)] * d_inv_sqrt[i] * d_inv_sqrt[j];
        }
    }
    let mut q0 = DVector::from_iterator(k, kids.iter().map(|&c| measure.mu(c).sqrt()));
    q0 /= q0.norm();
    let mut w = DVector::<f64>::zeros(k);
    w[0] = 1.0;
    w -= &q0;
    let complement: DMatrix<f64> = if w.norm() < 1e-12 {
        DMatrix::identity(k, k).columns(1, k - 1).into()
    } else {
        w /= w.norm();
        let h = DMatrix::identity(k, k) - 2.0 * &w * w.transpose();
        h.columns(1, k - 1).into()
    };
    let c = complement.transpose() * &b * &complement;
    let c = (&c + c.transpose()) * 0.5;
    let mut nu: Vec<f64> = c.symmetric_eigen().eigenvalues.iter().copied().collect();
    nu.sort_by(|a, b| a.partial_cmp(b).unwrap());
    nu.into_iter().map(|x| x + shift).collect()
}

/// Verify the self-similar structure of the spectrum on a substitution path
/// tree: the truncated partial-isometry relation holds exactly, and the
/// per-vertex spectrum blocks transform under prepending a level-1 edge by
/// one uniform growth factor plus an explicit correction. Needs geometric
/// lengths; the recursion is false for any other length profile.
pub fn cuntz_krieger_check(
    graph: &SubstitutionGraph,
    fund: &FundamentalEdges,
    length: &LengthFunction,
    s: f64,
    depth: usize,
) -> Result<CkReport> {
    let rho = match length {
        LengthFunction::Geometric(r) => *r,
        _ => {
            return Err(Error::Invalid(
                "the eigenvalue recursion needs geometric lengths".into(),
            ))
        }
    };
    if depth < 1 {
        return Err(Error::InsufficientDepth {
            what: "path truncation for the relation check".into(),
            need: 1,
            got: depth,
        });
    }
    let lambda_pf = graph.substitution().perron()?.lambda;
    let growth = rho.powf(s - 2.0) * lambda_pf;
    let (tree, _oracle) = path_tree(graph, depth + 1)?;
    let measure = path_tree_measure(&tree, graph)?;
    let edges = self_similar_edges(&tree, graph, fund, length, depth + 1)?;

    // Truncated relation: prepending eps is allowed iff the source of the
    // path matches the range of eps, which must agree with summing the
    // starts-with projections of the followers of eps.
    let paths = graph.paths_of_length(depth);
    let mut violation = 0i64;
    for eps in 0..graph.n_edges() as u32 {
        let r_eps = graph.edge(eps).range;
        for gamma in &paths {
            let lhs = i64::from(graph.path_source(gamma) == Some(r_eps));
            let mut rhs = 0i64;
            for eps2 in 0..graph.n_edges() as u32 {
                if graph.edge(eps2).source == r_eps {
                    rhs += i64::from(gamma.0.first() == Some(&eps2));
                }
            }
            violation = violation.max((lhs - rhs).abs());
        }
    }

    let mut incident: HashMap<u32, Vec<(f64, u32)>> = HashMap::new();
    for h in edges.iter().filter(|h| h.orientation == Orientation::Positive) {
        incident.entry(h.source).or_default().push((h.delta, h.range));
        incident.entry(h.range).or_default().push((h.delta, h.source));
    }

    let mut families: std::collections::BTreeMap<u32, CkFamily> = Default::default();
    let mut n_branching = 0usize;
    for v in 0..tree.n_nodes() as u32 {
        let lv = tree.level_of(v);
        if lv < 1 {
            continue;
        }
        if lv > depth.saturating_sub(1) {
            break;
        }
        if tree.n_children(v) < 2 {
            continue;
        }
        n_branching += 1;
        let base = local_spectrum(&tree, &incident, &measure, s, v);
        let gamma = tree.word(v);
        for eps0 in 0..graph.n_edges() as u32 {
            if graph.edge(eps0).range != graph.edge(gamma.0[0] as u32).source {
                continue;
            }
            let mut prefixed = vec![eps0 as crate::words::Letter];
            prefixed.extend_from_slice(&gamma.0);
            let v2 = tree
                .find(&Word(prefixed))
                .expect("prepended path stays in the tree");
            let lifted = local_spectrum(&tree, &incident, &measure, s, v2);
            let one_edge = tree
                .find(&Word(vec![eps0 as crate::words::Letter]))
                .expect("single edges are level-1 vertices");
            let correction = incident
                .get(&one_edge)
                .map(|list| {
                    list.iter()
                        .map(|&(d, _)| d.powf(s - 2.0) / measure.mu(one_edge))
                        .sum::<f64>()
                })
                .unwrap_or(0.0);
            let mut dev = 0.0f64;
            for (a, b) in base.iter().zip(&lifted) {
                let expected = growth * a + correction;
                dev = dev.max((b - expected).abs() / b.abs().max(1.0));
            }
            let entry = families.entry(eps0).or_insert_with(|| CkFamily {
                eps0,
                label: graph.edge_label(eps0),
                correction,
                n_pairs: 0,
                max_deviation: 0.0,
            });
            entry.n_pairs += 1;
            entry.max_deviation = entry.max_deviation.max(dev);
        }
    }
    Ok(CkReport {
        relation_violation: violation,
        growth,
        families: families.into_values().collect(),
        n_branching_checked: n_branching,
    })
}

/// Convenience bundle for substitution path-space spectra: tree, measure,
/// and lifted edge set at one depth.
pub struct PathSpaceTriple {
    pub tree: WordTree,
    pub measure: TreeMeasure,
    pub edges: Vec<HorizontalEdge>,
}

pub fn path_space_triple(
    graph: &SubstitutionGraph,
    fund: &FundamentalEdges,
    length: &LengthFunction,
    depth: usize,
) -> Result<PathSpaceTriple> {
    let (tree, _oracle) = path_tree(graph, depth)?;
    let measure = path_tree_measure(&tree, graph)?;
    let edges = self_similar_edges(&tree, graph, fund, length, depth)?;
    Ok(PathSpaceTriple { tree, measure, edges })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::language::LanguageOracle;
    use crate::measure::{uniform_branching_measure, word_measure};
    use crate::selfsim::{build_substitution_graph, maximal_fundamental, Flavor};
    use crate::substitution::Substitution;
    use crate::tree::{build_tree, horizontal_edges, EdgeScheme};
    use crate::words::Alphabet;

    fn fibonacci_word_setup(
        depth: usize,
    ) -> (WordTree, Vec<HorizontalEdge>, TreeMeasure) {
        let sub = Substitution::fibonacci();
        let oracle = LanguageOracle::from_substitution(&sub, depth + 3).unwrap();
        let tree = build_tree(&oracle, depth).unwrap();
        let edges =
            horizontal_edges(&tree, &oracle, EdgeScheme::Minimal, &LengthFunction::Reciprocal, depth)
                .unwrap();
        let measure = word_measure(&tree, &sub).unwrap();
        (tree, edges, measure)
    }

    fn fibonacci_path_setup(
        depth: usize,
    ) -> (WordTree, Vec<HorizontalEdge>, TreeMeasure) {
        let sub = Substitution::fibonacci();
        let graph = build_substitution_graph(&sub);
        let fund = maximal_fundamental(&graph, Flavor::Transverse);
        let t = path_space_triple(&graph, &fund, &LengthFunction::Geometric(0.5), depth).unwrap();
        (t.tree, t.edges, t.measure)
    }

    #[test]
    fn depth_two_fibonacci_form_matches_the_hand_sum() {
        let sub = Substitution::fibonacci();
        let oracle = LanguageOracle::from_substitution(&sub, 6).unwrap();
        let tree = build_tree(&oracle, 2).unwrap();
        let edges =
            horizontal_edges(&tree, &oracle, EdgeScheme::Minimal, &LengthFunction::Reciprocal, 2)
                .unwrap();
        let measure = uniform_branching_measure(&tree);
        let form =
            assemble_form(&tree, &edges, &measure, ChoiceWeights::Uniform, 4.0, 2).unwrap();
        let ab = tree.alphabet();
        let words: Vec<String> = form.words.iter().map(|w| ab.render(w)).collect();
        assert_eq!(words, ["aa", "ab", "ba"]);
        let expected = [
            [0.75, -0.25, -0.5],
            [-0.25, 0.75, -0.5],
            [-0.5, -0.5, 1.0],
        ];
        for i in 0..3 {
            for j in 0..3 {
                assert!(
                    (form.q[(i, j)] - expected[i][j]).abs() < 1e-14,
                    "entry ({i},{j}) = {}",
                    form.q[(i, j)]
                );
            }
        }
        let sys = eigensystem(&form, &tree).unwrap();
        assert!(sys.eigenvalues[0].abs() < 1e-13);
        assert!((sys.eigenvalues[1] - 4.0).abs() < 1e-12);
        assert!((sys.eigenvalues[2] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn constants_are_exactly_in_the_kernel() {
        let (tree, edges, measure) = fibonacci_word_setup(6);
        let form =
            assemble_form(&tree, &edges, &measure, ChoiceWeights::Conditional, 4.0, 6).unwrap();
        let ones = vec![1.0; form.dim()];
        let q1 = &form.q * DVector::from_column_slice(&ones);
        assert!(q1.amax() < 1e-12, "row sums {:?}", q1.as_slice());
        let sys = eigensystem(&form, &tree).unwrap();
        assert!(sys.eigenvalues[0].abs() < 1e-12);
        assert!(sys.eigenvalues.iter().all(|&l| l > -1e-12), "form must be psd");
    }

    #[test]
    fn cylinders_without_a_separating_edge_stay_uncoupled() {
        let shift = crate::language::EdgeShift {
            letters: 3,
            can_follow: vec![vec![true; 3]; 3],
        };
        let oracle = LanguageOracle::edge_shift(shift).unwrap();
        let tree = build_tree(&oracle, 2).unwrap();
        let edges =
            horizontal_edges(&tree, &oracle, EdgeScheme::Minimal, &LengthFunction::Reciprocal, 2)
                .unwrap();
        let measure = uniform_branching_measure(&tree);
        let form =
            assemble_form(&tree, &edges, &measure, ChoiceWeights::Uniform, 4.0, 2).unwrap();
        // The minimal edge at the root joins the first two children, so any
        // cylinder under the third letter is never separated from anything.
        let ab = tree.alphabet();
        let under_c: Vec<usize> = form
            .words
            .iter()
            .enumerate()
            .filter(|(_, w)| ab.render(w).starts_with('c'))
            .map(|(i, _)| i)
            .collect();
        let under_b: Vec<usize> = form
            .words
            .iter()
            .enumerate()
            .filter(|(_, w)| ab.render(w).starts_with('b'))
            .map(|(i, _)| i)
            .collect();
        for &i in &under_c {
            for &j in &under_b {
                assert_eq!(form.q[(i, j)], 0.0);
            }
        }
    }

    #[test]
    fn uniform_weights_reject_a_mismatched_measure() {
        let (tree, edges, measure) = fibonacci_word_setup(4);
        let err = assemble_form(&tree, &edges, &measure, ChoiceWeights::Uniform, 4.0, 4);
        assert!(err.is_err(), "fibonacci word measure is not even-splitting");
    }

    #[test]
    fn phi_candidates_are_exact_eigenvectors_with_conditional_weights() {
        let (tree, edges, measure) = fibonacci_word_setup(8);
        let form =
            assemble_form(&tree, &edges, &measure, ChoiceWeights::Conditional, 4.0, 8).unwrap();
        let checks = phi_residuals(&tree, &form).unwrap();
        assert!(!checks.is_empty());
        for c in &checks {
            assert!(
                c.residual < 1e-10,
                "candidate at {:?} has residual {}",
                c.vertex,
                c.residual
            );
        }
        // Second oracle: the closed-form eigenvalue of each candidate.
        for v in 0..tree.n_nodes() as u32 {
            if tree.level_of(v) >= 8 || tree.n_children(v) < 2 {
                continue;
            }
            let exact = exact_sibling_eigenvalue(&tree, &edges, &measure, 4.0, v).unwrap();
            let check = checks
                .iter()
                .find(|c| c.vertex == tree.word(v))
                .expect("every branching vertex has a candidate");
            assert!(
                (check.rayleigh - exact).abs() <= 1e-10 * exact.abs().max(1.0),
                "rayleigh {} vs exact {}",
                check.rayleigh,
                exact
            );
        }
    }

    #[test]
    fn the_aba_candidate_is_an_eigenfunction() {
        let (tree, edges, measure) = fibonacci_word_setup(8);
        let form =
            assemble_form(&tree, &edges, &measure, ChoiceWeights::Conditional, 4.0, 8).unwrap();
        let ab = tree.alphabet();
        let checks = phi_residuals(&tree, &form).unwrap();
        let aba = checks
            .iter()
            .find(|c| ab.render(&c.vertex) == "aba")
            .expect("aba is branching in the fibonacci tree");
        let pair = (ab.render(&aba.pair.0), ab.render(&aba.pair.1));
        assert_eq!(pair, ("abaa".to_string(), "abab".to_string()));
        assert!(aba.residual < 1e-10);
        let sys = eigensystem(&form, &tree).unwrap();
        let idx = sys
            .labels
            .iter()
            .position(|l| l.as_ref().map(|w| ab.render(w)) == Some("aba".into()))
            .expect("aba labels one eigenvalue");
        assert!((sys.eigenvalues[idx] - aba.rayleigh).abs() < 1e-10);
    }

    #[test]
    fn monte_carlo_average_agrees_with_the_closed_form() {
        let (tree, edges, measure) = fibonacci_word_setup(3);
        let s = 4.0;
        let form =
            assemble_form(&tree, &edges, &measure, ChoiceWeights::Conditional, s, 3).unwrap();
        let mc = monte_carlo_form(
            &tree,
            &edges,
            &measure,
            ChoiceWeights::Conditional,
            s,
            3,
            20_000,
            2024,
        )
        .unwrap();
        let verdict = mc_agreement(&mc, &form);
        assert!(
            verdict.pass,
            "worst entry {:?} at {} sigmas",
            verdict.worst_entry, verdict.max_sigmas
        );
    }

    #[test]
    fn eigenvalues_persist_when_the_depth_grows() {
        let (tree, edges, measure) = fibonacci_word_setup(7);
        let shallow =
            assemble_form(&tree, &edges, &measure, ChoiceWeights::Conditional, 4.0, 6).unwrap();
        let deep =
            assemble_form(&tree, &edges, &measure, ChoiceWeights::Conditional, 4.0, 7).unwrap();
        let a = eigensystem(&shallow, &tree).unwrap();
        let b = eigensystem(&deep, &tree).unwrap();
        for &lv in &a.eigenvalues {
            let hit = b
                .eigenvalues
                .iter()
                .any(|&x| (x - lv).abs() <= 1e-10 * lv.abs().max(1.0));
            assert!(hit, "eigenvalue {lv} vanished at the deeper truncation");
        }
    }

    #[test]
    fn clipping_contracts_the_form() {
        let (tree, edges, measure) = fibonacci_word_setup(4);
        let form =
            assemble_form(&tree, &edges, &measure, ChoiceWeights::Conditional, 4.0, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let f: Vec<f64> = (0..form.dim()).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
            let clipped: Vec<f64> = f.iter().map(|&x| x.clamp(0.0, 1.0)).collect();
            assert!(
                form.quadratic(&clipped) <= form.quadratic(&f) + 1e-12,
                "markov property failed"
            );
        }
    }

    #[test]
    fn word_tree_weyl_exponent_matches_half_the_abscissa() {
        // The tree-of-words triple with reciprocal lengths has abscissa 1,
        // so the eigenvalue count at s = 1 must fit lambda^(1/2).
        let (tree, edges, measure) = fibonacci_word_setup(12);
        let mut systems = Vec::new();
        for d in 6..=12 {
            let form =
                assemble_form(&tree, &edges, &measure, ChoiceWeights::Conditional, 1.0, d)
                    .unwrap();
            systems.push(eigensystem(&form, &tree).unwrap());
        }
        let report = weyl_count(&systems).unwrap();
        assert!(report.pooled_positives >= 30);
        assert!(
            (report.exponent - 0.5).abs() <= 0.1,
            "exponent {} is not 0.5 within 20%",
            report.exponent
        );
        assert!(report.render_tsv().starts_with("lambda\tcount\n"));
    }

    #[test]
    fn path_tree_weyl_exponent_matches_half_the_abscissa() {
        // On the substitution path space with lengths 2^-n the abscissa is
        // log2 tau, and the same half-dimension law must come out.
        let (tree, edges, measure) = fibonacci_path_setup(12);
        let s0 = ((1.0 + 5.0f64.sqrt()) / 2.0).log2();
        let mut systems = Vec::new();
        for d in 6..=12 {
            let form =
                assemble_form(&tree, &edges, &measure, ChoiceWeights::Conditional, s0, d).unwrap();
            systems.push(eigensystem(&form, &tree).unwrap());
        }
        let report = weyl_count(&systems).unwrap();
        let target = s0 / 2.0;
        assert!(
            (report.exponent - target).abs() <= 0.2 * target,
            "exponent {} vs {}",
            report.exponent,
            target
        );
    }

    #[test]
    fn weyl_count_refuses_thin_spectra() {
        let (tree, edges, measure) = fibonacci_word_setup(4);
        let form =
            assemble_form(&tree, &edges, &measure, ChoiceWeights::Conditional, 1.0, 4).unwrap();
        let sys = eigensystem(&form, &tree).unwrap();
        match weyl_count(&[sys]) {
            Err(Error::TooFewEigenvalues { need: 30, .. }) => {}
            other => panic!("expected a refusal, got {other:?}"),
        }
    }

    #[test]
    fn below_the_first_positive_eigenvalue_only_the_constant_counts() {
        let (tree, edges, measure) = fibonacci_word_setup(12);
        let mut systems = Vec::new();
        for d in 6..=12 {
            let form =
                assemble_form(&tree, &edges, &measure, ChoiceWeights::Conditional, 1.0, d)
                    .unwrap();
            systems.push(eigensystem(&form, &tree).unwrap());
        }
        let report = weyl_count(&systems).unwrap();
        let first_positive = systems[0]
            .eigenvalues
            .iter()
            .copied()
            .find(|&x| x > 1e-12)
            .unwrap();
        assert_eq!(
            report.count_below(first_positive * 0.5),
            1,
            "merging must not duplicate the constant across depths"
        );
    }

    #[test]
    fn counting_functions_never_decrease_with_depth() {
        let (tree, edges, measure) = fibonacci_path_setup(9);
        let f8 = assemble_form(&tree, &edges, &measure, ChoiceWeights::Conditional, 1.0, 8).unwrap();
        let f9 = assemble_form(&tree, &edges, &measure, ChoiceWeights::Conditional, 1.0, 9).unwrap();
        let a = eigensystem(&f8, &tree).unwrap();
        let b = eigensystem(&f9, &tree).unwrap();
        for &lv in &a.eigenvalues {
            let cut = lv + 1e-9 * lv.abs().max(1.0);
            let na = a.eigenvalues.iter().filter(|&&x| x <= cut).count();
            let nb = b.eigenvalues.iter().filter(|&&x| x <= cut).count();
            assert!(nb >= na, "counting function dropped at {lv}");
        }
    }

    #[test]
    fn boundedness_regimes_split_at_the_critical_exponent() {
        let (tree, edges, measure) = fibonacci_path_setup(12);
        let s0 = (1.0 + 5.0f64.sqrt()).ln() / 2.0f64.ln() - 1.0;
        let depths = [6, 7, 8, 9, 10, 11, 12];
        let report = boundedness_scan(
            &tree,
            &edges,
            &measure,
            ChoiceWeights::Conditional,
            &[s0 + 1.0, s0 + 3.0],
            &depths,
        )
        .unwrap();
        assert_eq!(report.trends[0], Trend::Growing, "{:?}", report.max_eigenvalue[0]);
        assert_eq!(report.trends[1], Trend::Plateau, "{:?}", report.max_eigenvalue[1]);
        assert!(report.render_tsv().starts_with("s\tdepth\tmax_eigenvalue\ttrend\n"));
    }

    #[test]
    fn a_single_branch_tree_is_trivially_bounded() {
        let ab = Alphabet::ab();
        let word = ab.parse_word("a").unwrap();
        let oracle = LanguageOracle::periodic(ab, &word, 16).unwrap();
        let tree = build_tree(&oracle, 8).unwrap();
        let edges =
            horizontal_edges(&tree, &oracle, EdgeScheme::Minimal, &LengthFunction::Reciprocal, 8)
                .unwrap();
        let measure = uniform_branching_measure(&tree);
        let report = boundedness_scan(
            &tree,
            &edges,
            &measure,
            ChoiceWeights::Uniform,
            &[2.0, 4.0],
            &[4, 6, 8],
        )
        .unwrap();
        assert!(report.max_eigenvalue.iter().flatten().all(|&x| x.abs() < 1e-12));
        assert!(report.trends.iter().all(|&t| t == Trend::Plateau));
    }

    #[test]
    fn truncated_relations_hold_exactly_for_the_squared_substitution() {
        let sub = Substitution::parse("a -> baa\nb -> ba").unwrap();
        let graph = build_substitution_graph(&sub);
        let fund = maximal_fundamental(&graph, Flavor::Transverse);
        let report =
            cuntz_krieger_check(&graph, &fund, &LengthFunction::Geometric(0.5), 2.5, 3).unwrap();
        assert_eq!(report.relation_violation, 0);
    }

    #[test]
    fn f2_eigenvalue_families_follow_the_one_step_recursion() {
        let sub = Substitution::parse("a -> baa\nb -> ba").unwrap();
        let graph = build_substitution_graph(&sub);
        let fund = maximal_fundamental(&graph, Flavor::Transverse);
        let report =
            cuntz_krieger_check(&graph, &fund, &LengthFunction::Geometric(0.5), 2.5, 3).unwrap();
        assert!(!report.families.is_empty());
        assert!(report.n_branching_checked > 0);
        for f in &report.families {
            assert!(
                f.max_deviation < 1e-8,
                "family {} deviates by {}",
                f.label,
                f.max_deviation
            );
        }
        assert!(report.pass(1e-8));
        let with_correction = report.families.iter().filter(|f| f.correction > 0.0).count();
        assert!(with_correction > 0, "some one-edge paths carry level-1 edges");
        assert!(report.render_tsv().starts_with("eps0\tlabel\tcorrection\tpairs\tmax_deviation\n"));
    }

    #[test]
    fn fibonacci_recursion_families_stay_few() {
        let sub = Substitution::fibonacci();
        let graph = build_substitution_graph(&sub);
        let fund = maximal_fundamental(&graph, Flavor::Transverse);
        let report =
            cuntz_krieger_check(&graph, &fund, &LengthFunction::Geometric(0.5), 4.0, 4).unwrap();
        assert!(report.pass(1e-8));
        assert!(
            report.families.len() <= graph.n_edges(),
            "one family per level-1 edge at most"
        );
    }

    #[test]
    fn the_recursion_requires_geometric_lengths() {
        let sub = Substitution::fibonacci();
        let graph = build_substitution_graph(&sub);
        let fund = maximal_fundamental(&graph, Flavor::Transverse);
        let err = cuntz_krieger_check(&graph, &fund, &LengthFunction::Reciprocal, 4.0, 3);
        assert!(err.is_err());
    }

    #[test]
    fn eigen_report_lists_the_branching_labels() {
        let (tree, edges, measure) = fibonacci_word_setup(4);
        let form =
            assemble_form(&tree, &edges, &measure, ChoiceWeights::Conditional, 4.0, 4).unwrap();
        let sys = eigensystem(&form, &tree).unwrap();
        let tsv = sys.render_tsv(&tree);
        assert!(tsv.starts_with("depth\tindex\teigenvalue\tbranching_vertex\n"));
        assert!(tsv.contains("\tnone"), "the constant row is unlabeled");
        let labeled = sys.labels.iter().filter(|l| l.is_some()).count();
        assert_eq!(labeled, sys.eigenvalues.len() - 1, "all but the constant");
    }
}
