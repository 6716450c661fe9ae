//! Translation-invariant measures seen from the tree and path pictures: the
//! unique ergodic measure of a primitive substitution evaluated on cylinder
//! vertices of a word tree, its exact quadratic-field form for two-letter
//! rules, the rotation-interval measure of a Sturmian subshift, and the
//! self-similar measure on paths of a substitution graph.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::quad::{Quad, QuadField};
use crate::selfsim::{GraphPath, SubstitutionGraph};
use crate::sturmian::SturmianSlope;
use crate::substitution::Substitution;
use crate::tree::{HorizontalEdge, WordTree, ROOT};
use crate::words::{Letter, Word};

/// Cylinder measures on a word tree, one value per vertex. The root carries
/// mass 1 and every vertex carries the total mass of its children, so the
/// values define a Borel measure on the boundary.
#[derive(Debug, Clone)]
pub struct TreeMeasure {
    mu: Vec<f64>,
    exact: Option<Vec<Quad>>,
}

impl TreeMeasure {
    pub fn mu(&self, v: u32) -> f64 {
        self.mu[v as usize]
    }

    /// Exact field element for `v` when the measure was computed in a real
    /// quadratic field.
    pub fn mu_exact(&self, v: u32) -> Option<Quad> {
        self.exact.as_ref().map(|e| e[v as usize])
    }

    /// Conditional weight mu[child] / mu[parent].
    pub fn conditional(&self, tree: &WordTree, child: u32) -> Result<f64> {
        let p = tree
            .parent(child)
            .ok_or_else(|| Error::Invalid("the root has no conditional weight".into()))?;
        Ok(self.mu(child) / self.mu(p))
    }

    /// Word-keyed weight closure, suitable for weighted choice rules and
    /// path sampling; words outside the tree get weight 0.
    pub fn weight_fn<'a>(&'a self, tree: &'a WordTree) -> impl Fn(&Word) -> f64 + 'a {
        move |w: &Word| tree.find(w).map_or(0.0, |v| self.mu(v))
    }

    /// Check positivity and additivity (each vertex with children carries
    /// exactly their total mass, up to `tol`).
    pub fn validate(&self, tree: &WordTree, tol: f64) -> Result<()> {
        if (self.mu(ROOT) - 1.0).abs() > tol {
            return Err(Error::Numeric(format!("root mass {} is not 1", self.mu(ROOT))));
        }
        for v in 0..tree.n_nodes() as u32 {
            if !(self.mu(v) > 0.0) {
                return Err(Error::Numeric(format!(
                    "vertex \"{}\" has non-positive mass {}",
                    tree.render(v),
                    self.mu(v)
                )));
            }
            if tree.n_children(v) == 0 {
                continue;
            }
            let kids: f64 = tree.children(v).map(|c| self.mu(c)).sum();
            if (self.mu(v) - kids).abs() > tol {
                return Err(Error::Numeric(format!(
                    "mass {} at \"{}\" but children sum to {kids}",
                    self.mu(v),
                    tree.render(v)
                )));
            }
        }
        Ok(())
    }

    pub fn render_measure_tsv(&self, tree: &WordTree) -> String {
        let mut out = String::from("level\tword\tmu\n");
        for v in 0..tree.n_nodes() as u32 {
            out.push_str(&format!("{}\t{}\t{}\n", tree.level_of(v), tree.render(v), self.mu(v)));
        }
        out
    }
}

/// The unique invariant measure of a primitive substitution on the cylinder
/// vertices of `tree`. Frequencies of the words at the deepest level are the
/// Perron eigenvector of the induced block substitution; shallower vertices
/// are filled in by additivity. Two-letter rules with irrational Perron
/// eigenvalue are solved exactly in the quadratic field, everything else
/// numerically.
pub fn word_measure(tree: &WordTree, sub: &Substitution) -> Result<TreeMeasure> {
    let n = tree.depth();
    if n == 0 {
        return Ok(TreeMeasure { mu: vec![1.0], exact: None });
    }
    let (blocks, matrix) = block_matrix(tree, sub, n)?;

    let exact_field = sub.perron_quad().filter(|(f, _)| !is_square(f.discriminant()));
    if let Some((field, theta)) = exact_field {
        let freq = quad_kernel_vector(&matrix, field, theta)?;
        let mut exact = vec![Quad::zero(field); tree.n_nodes()];
        for (b, &v) in blocks.iter().enumerate() {
            exact[v as usize] = freq[b];
        }
        for lvl in (0..n).rev() {
            for v in tree.level_range(lvl) {
                let mut s = Quad::zero(field);
                for c in tree.children(v) {
                    s = s + exact[c as usize];
                }
                exact[v as usize] = s;
            }
        }
        if exact[ROOT as usize] != Quad::one(field) {
            return Err(Error::Numeric("block frequencies do not add up to 1".into()));
        }
        let mu = exact.iter().map(|q| q.to_f64()).collect();
        return Ok(TreeMeasure { mu, exact: Some(exact) });
    }

    let lambda = sub.perron()?.lambda;
    let freq = power_kernel_vector(&matrix, lambda)?;
    let mut mu = vec![0.0; tree.n_nodes()];
    for (b, &v) in blocks.iter().enumerate() {
        mu[v as usize] = freq[b];
    }
    for lvl in (0..n).rev() {
        for v in tree.level_range(lvl) {
            mu[v as usize] = tree.children(v).map(|c| mu[c as usize]).sum();
        }
    }
    Ok(TreeMeasure { mu, exact: None })
}

/// Occurrence matrix of the induced substitution on the deepest-level words
/// of the tree: the image of a block b1..bn is read off as the n-windows of
/// sigma(b1..bn) starting inside sigma(b1). Returns the vertex of each block
/// alongside the matrix (columns indexed like `blocks`).
fn block_matrix(
    tree: &WordTree,
    sub: &Substitution,
    n: usize,
) -> Result<(Vec<u32>, Vec<Vec<i128>>)> {
    let blocks: Vec<u32> = tree.level_range(n).collect();
    let index: HashMap<Word, usize> =
        blocks.iter().enumerate().map(|(i, &v)| (tree.word(v), i)).collect();
    let p = blocks.len();
    let mut matrix = vec![vec![0i128; p]; p];
    for (j, &v) in blocks.iter().enumerate() {
        let block = tree.word(v);
        let img = sub.apply(&block);
        let head = sub.image(block.0[0]).len();
        for t in 0..head {
            let window = Word(img.0[t..t + n].to_vec());
            let i = *index.get(&window).ok_or_else(|| {
                Error::Invalid(format!(
                    "window \"{}\" of the substituted block is not a tree word; \
                     the tree does not list the language of this substitution",
                    sub.alphabet().render(&window)
                ))
            })?;
            matrix[i][j] += 1;
        }
    }
    Ok((blocks, matrix))
}

fn is_square(d: i64) -> bool {
    if d < 0 {
        return false;
    }
    let r = (d as f64).sqrt().round() as i64;
    (r - 1..=r + 1).any(|x| x >= 0 && x * x == d)
}

/// Exact normalized kernel vector of (A - theta I) over the quadratic field:
/// Gauss-Jordan elimination with exact pivots, one free column expected.
fn quad_kernel_vector(matrix: &[Vec<i128>], field: QuadField, theta: Quad) -> Result<Vec<Quad>> {
    let p = matrix.len();
    let zero = Quad::zero(field);
    let mut m: Vec<Vec<Quad>> = (0..p)
        .map(|i| {
            (0..p)
                .map(|j| {
                    let a = Quad::from_ints(field, matrix[i][j], 0);
                    if i == j {
                        a - theta
                    } else {
                        a
                    }
                })
                .collect()
        })
        .collect();

    let mut pivots: Vec<(usize, usize)> = Vec::new();
    let mut free: Vec<usize> = Vec::new();
    let mut rank = 0usize;
    for col in 0..p {
        let Some(r) = (rank..p).find(|&r| m[r][col] != zero) else {
            free.push(col);
            continue;
        };
        m.swap(rank, r);
        let inv = m[rank][col].inv();
        for x in &mut m[rank] {
            *x = *x * inv;
        }
        for r2 in 0..p {
            if r2 != rank && m[r2][col] != zero {
                let f = m[r2][col];
                for c in 0..p {
                    let sub = f * m[rank][c];
                    m[r2][c] = m[r2][c] - sub;
                }
            }
        }
        pivots.push((rank, col));
        rank += 1;
    }
    if free.len() != 1 {
        return Err(Error::Numeric(format!(
            "Perron kernel of the block matrix has dimension {}, expected 1",
            free.len()
        )));
    }
    let fc = free[0];
    let mut x = vec![zero; p];
    x[fc] = Quad::one(field);
    for &(r, c) in &pivots {
        x[c] = zero - m[r][fc];
    }
    let mut sum = zero;
    for v in &x {
        sum = sum + *v;
    }
    if sum == zero {
        return Err(Error::Numeric("Perron kernel vector sums to zero".into()));
    }
    let inv = sum.inv();
    let x: Vec<Quad> = x.iter().map(|v| *v * inv).collect();
    if x.iter().any(|v| v.to_f64() <= 0.0) {
        return Err(Error::Numeric("Perron kernel vector is not positive".into()));
    }
    Ok(x)
}

/// Numeric normalized Perron vector of an irreducible nonnegative matrix by
/// power iteration; `lambda` is the expected eigenvalue and is cross-checked.
fn power_kernel_vector(matrix: &[Vec<i128>], lambda: f64) -> Result<Vec<f64>> {
    let p = matrix.len();
    let a: Vec<Vec<f64>> =
        matrix.iter().map(|row| row.iter().map(|&x| x as f64).collect()).collect();
    let mut x = vec![1.0 / p as f64; p];
    let mut rate = 0.0;
    for it in 0..50_000 {
        let mut y = vec![0.0; p];
        for i in 0..p {
            for j in 0..p {
                y[i] += a[i][j] * x[j];
            }
        }
        let s: f64 = y.iter().sum();
        rate = s;
        for v in &mut y {
            *v /= s;
        }
        let delta = x.iter().zip(&y).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
        x = y;
        if delta < 1e-15 && it > 8 {
            break;
        }
    }
    if (rate - lambda).abs() > 1e-6 * lambda.max(1.0) {
        return Err(Error::Numeric(format!(
            "block matrix Perron eigenvalue {rate} does not match the substitution ({lambda})"
        )));
    }
    if x.iter().any(|&v| v <= 0.0) {
        return Err(Error::Numeric("Perron iteration left a zero coordinate".into()));
    }
    Ok(x)
}

/// Invariant measure of a Sturmian subshift on the cylinder vertices of
/// `tree`: the frequency of a factor w is the length of the arc of rotation
/// orbits that spell w, computed by intersecting rotated copies of the two
/// letter-coding arcs.
pub fn sturmian_word_measure(tree: &WordTree, slope: &SturmianSlope) -> Result<TreeMeasure> {
    let theta = precise_theta(slope);
    let mut mu = vec![0.0; tree.n_nodes()];
    mu[ROOT as usize] = 1.0;
    for v in 1..tree.n_nodes() as u32 {
        mu[v as usize] = arc_measure(&tree.word(v), theta);
    }
    let measure = TreeMeasure { mu, exact: None };
    measure.validate(tree, 1e-9)?;
    Ok(measure)
}

fn precise_theta(slope: &SturmianSlope) -> f64 {
    let (p, q) = slope.convergent(1_000_000_000_000i128);
    p as f64 / q as f64
}

/// Total length of { x : the rotation orbit of x starts by spelling w }.
/// Letter 'a' is coded on [1 - theta, 1), letter 'b' on [0, 1 - theta).
fn arc_measure(w: &Word, theta: f64) -> f64 {
    let base = |l: Letter| -> (f64, f64) {
        if l == 0 {
            (1.0 - theta, 1.0)
        } else {
            (0.0, 1.0 - theta)
        }
    };
    let mut set = vec![base(w.0[0])];
    for (i, &l) in w.0.iter().enumerate().skip(1) {
        let shifted = shift_arc(base(l), -(i as f64) * theta);
        set = intersect_arcs(&set, &shifted);
        if set.is_empty() {
            break;
        }
    }
    set.iter().map(|(lo, hi)| hi - lo).sum()
}

/// Rotate an arc of the unit circle by `delta`, splitting at the wrap point.
fn shift_arc((lo, hi): (f64, f64), delta: f64) -> Vec<(f64, f64)> {
    let frac = |x: f64| x - x.floor();
    let a = frac(lo + delta);
    let len = hi - lo;
    if a + len <= 1.0 {
        vec![(a, a + len)]
    } else {
        vec![(a, 1.0), (0.0, a + len - 1.0)]
    }
}

fn intersect_arcs(xs: &[(f64, f64)], ys: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for &(a, b) in xs {
        for &(c, d) in ys {
            let lo = a.max(c);
            let hi = b.min(d);
            if hi > lo {
                out.push((lo, hi));
            }
        }
    }
    out
}

/// The maximal-entropy style reference measure that splits every vertex mass
/// evenly among its children. On a full shift this is the uniform Bernoulli
/// measure; elsewhere it is merely a convenient positive weight system.
pub fn uniform_branching_measure(tree: &WordTree) -> TreeMeasure {
    let mut mu = vec![0.0; tree.n_nodes()];
    mu[ROOT as usize] = 1.0;
    for v in 0..tree.n_nodes() as u32 {
        let k = tree.n_children(v);
        if k == 0 {
            continue;
        }
        let share = mu[v as usize] / k as f64;
        for c in tree.children(v) {
            mu[c as usize] = share;
        }
    }
    TreeMeasure { mu, exact: None }
}

/// The self-similar measure on paths of a substitution graph: a path of
/// length n ending at vertex w has mass lambda^(-n) f_w, where f is the
/// right Perron eigenvector of the occurrence matrix normalized to sum 1.
#[derive(Debug, Clone)]
pub struct PathMeasure {
    pub lambda: f64,
    freq: Vec<f64>,
    exact: Option<ExactPathMeasure>,
}

#[derive(Debug, Clone)]
struct ExactPathMeasure {
    field: QuadField,
    theta: Quad,
    freq: Vec<Quad>,
}

pub fn path_measure(graph: &SubstitutionGraph) -> Result<PathMeasure> {
    let sub = graph.substitution();
    let perron = sub.perron()?;
    let exact = sub
        .perron_quad()
        .filter(|(f, _)| !is_square(f.discriminant()))
        .map(|(field, theta)| {
            let freq = quad_kernel_vector(&sub.matrix(), field, theta)?;
            Ok::<_, Error>(ExactPathMeasure { field, theta, freq })
        })
        .transpose()?;
    Ok(PathMeasure { lambda: perron.lambda, freq: perron.right, exact })
}

impl PathMeasure {
    pub fn letter_frequency(&self, l: Letter) -> f64 {
        self.freq[l as usize]
    }

    pub fn exact_letter_frequency(&self, l: Letter) -> Option<Quad> {
        self.exact.as_ref().map(|e| e.freq[l as usize])
    }

    /// Mass of the cylinder of all infinite paths extending `path`.
    pub fn mu(&self, graph: &SubstitutionGraph, path: &GraphPath) -> Result<f64> {
        graph.validate_path(path)?;
        if path.0.is_empty() {
            return Ok(1.0);
        }
        let range = graph.path_range(path).expect("non-empty path has a range");
        Ok(self.lambda.powi(-(path.0.len() as i32)) * self.freq[range as usize])
    }

    /// Exact mass in the quadratic field, when available.
    pub fn mu_exact(&self, graph: &SubstitutionGraph, path: &GraphPath) -> Result<Option<Quad>> {
        graph.validate_path(path)?;
        let Some(e) = &self.exact else { return Ok(None) };
        if path.0.is_empty() {
            return Ok(Some(Quad::one(e.field)));
        }
        let range = graph.path_range(path).expect("non-empty path has a range");
        Ok(Some(e.theta.powi(-(path.0.len() as i32)) * e.freq[range as usize]))
    }
}

/// The self-similar path measure written onto a path tree: every vertex of a
/// tree built by `path_tree` gets the mass of its path cylinder. Exact field
/// values are carried along when the Perron data lives in a quadratic field.
pub fn path_tree_measure(tree: &WordTree, graph: &SubstitutionGraph) -> Result<TreeMeasure> {
    let pm = path_measure(graph)?;
    let n = tree.n_nodes();
    let mut mu = vec![0.0; n];
    let mut exact: Option<Vec<Quad>> = pm.exact.as_ref().map(|e| vec![Quad::zero(e.field); n]);
    for v in 0..n as u32 {
        let word = tree.word(v);
        let path = GraphPath(word.0.iter().map(|&l| l as u32).collect());
        mu[v as usize] = pm.mu(graph, &path)?;
        if let (Some(ex), Some(q)) = (exact.as_mut(), pm.mu_exact(graph, &path)?) {
            ex[v as usize] = q;
        }
    }
    let out = TreeMeasure { mu, exact };
    out.validate(tree, 1e-9)?;
    Ok(out)
}

/// One Dirichlet-series quotient estimate of a cylinder mass: the measure of
/// the subtree under `v` is the limit, as s decreases to the abscissa s0, of
/// the edge sum of delta^s below v divided by the full edge sum. The
/// quotient is evaluated along s = s0 + h, h halved `steps - 1` times, and
/// the last two values are Richardson-extrapolated in h.
#[derive(Debug, Clone)]
pub struct DirichletEstimate {
    pub s_values: Vec<f64>,
    pub raw: Vec<f64>,
    pub extrapolated: f64,
}

pub fn dirichlet_measure(
    tree: &WordTree,
    edges: &[HorizontalEdge],
    v: u32,
    s0: f64,
    h: f64,
    steps: usize,
) -> Result<DirichletEstimate> {
    if steps < 2 || h <= 0.0 {
        return Err(Error::Invalid("need at least two steps and a positive offset".into()));
    }
    if edges.is_empty() {
        return Err(Error::Invalid("no horizontal edges to sum over".into()));
    }
    let inside: Vec<bool> = edges.iter().map(|e| is_weak_descendant(tree, e.source, v)).collect();
    let mut s_values = Vec::with_capacity(steps);
    let mut raw = Vec::with_capacity(steps);
    let mut offset = h;
    for _ in 0..steps {
        let s = s0 + offset;
        let mut num = 0.0;
        let mut den = 0.0;
        for (e, &inc) in edges.iter().zip(&inside) {
            let t = e.delta.powf(s);
            den += t;
            if inc {
                num += t;
            }
        }
        s_values.push(s);
        raw.push(num / den);
        offset /= 2.0;
    }
    let extrapolated = 2.0 * raw[steps - 1] - raw[steps - 2];
    Ok(DirichletEstimate { s_values, raw, extrapolated })
}

fn is_weak_descendant(tree: &WordTree, mut w: u32, v: u32) -> bool {
    let lv = tree.level_of(v);
    while tree.level_of(w) > lv {
        w = tree.parent(w).expect("non-root vertices have parents");
    }
    w == v
}
