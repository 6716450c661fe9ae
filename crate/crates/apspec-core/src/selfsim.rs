//! Substitution graphs and their path spaces: fundamental horizontal
//! edges, self-similar choice functions, exact counting of lifted edge
//! sets, and the one-dimensional tile geometry giving return vectors
//! (transverse) and microtile vectors (longitudinal).

use crate::error::{Error, Result};
use crate::language::{EdgeShift, LanguageOracle};
use crate::quad::{Quad, QuadField};
use crate::substitution::Substitution;
use crate::tree::{
    make_custom_choice, ChoiceFunction, HorizontalEdge, LengthFunction, Orientation, WordTree,
};
use crate::words::Letter;

/// One edge per letter occurrence: the tile `source` sits at `position`
/// inside the substituted image of the supertile letter `range`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GraphEdge {
    pub source: Letter,
    pub range: Letter,
    pub position: usize,
}

/// The graph whose length-n paths index tiles in n-fold supertiles. Edge
/// ids are assigned in (source, range, position) order.
#[derive(Debug, Clone)]
pub struct SubstitutionGraph {
    sub: Substitution,
    edges: Vec<GraphEdge>,
    by_source: Vec<Vec<u32>>,
    by_range: Vec<Vec<u32>>,
    matrix: Vec<Vec<i128>>,
}

pub fn build_substitution_graph(sub: &Substitution) -> SubstitutionGraph {
    let k = sub.alphabet().size();
    let mut edges = Vec::new();
    for w in sub.alphabet().letters() {
        for (p, &v) in sub.image(w).0.iter().enumerate() {
            edges.push(GraphEdge { source: v, range: w, position: p });
        }
    }
    edges.sort_by_key(|e| (e.source, e.range, e.position));
    let mut by_source = vec![Vec::new(); k];
    let mut by_range = vec![Vec::new(); k];
    for (id, e) in edges.iter().enumerate() {
        by_source[e.source as usize].push(id as u32);
        by_range[e.range as usize].push(id as u32);
    }
    SubstitutionGraph { sub: sub.clone(), matrix: sub.matrix(), edges, by_source, by_range }
}

impl SubstitutionGraph {
    pub fn substitution(&self) -> &Substitution {
        &self.sub
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn n_vertices(&self) -> usize {
        self.sub.alphabet().size()
    }

    pub fn edge(&self, id: u32) -> GraphEdge {
        self.edges[id as usize]
    }

    pub fn edges_from(&self, v: Letter) -> &[u32] {
        &self.by_source[v as usize]
    }

    pub fn edges_into(&self, v: Letter) -> &[u32] {
        &self.by_range[v as usize]
    }

    /// A[v][w] = number of edges v -> w = occurrences of v in the image
    /// of w; paths v -> w of length n are counted by A^n.
    pub fn matrix(&self) -> &Vec<Vec<i128>> {
        &self.matrix
    }

    /// Label in which the image of the range letter is written out with
    /// the occupied position bracketed, e.g. "b[a]a".
    pub fn edge_label(&self, id: u32) -> String {
        let e = self.edges[id as usize];
        let ab = self.sub.alphabet();
        let img = self.sub.image(e.range);
        let mut s = String::new();
        for (p, &l) in img.0.iter().enumerate() {
            if p == e.position {
                s.push('[');
                s.push(ab.symbol(l));
                s.push(']');
            } else {
                s.push(ab.symbol(l));
            }
        }
        s
    }

    pub fn find_edge(&self, source: Letter, range: Letter, position: usize) -> Option<u32> {
        self.edges
            .binary_search_by_key(&(source, range, position), |e| (e.source, e.range, e.position))
            .ok()
            .map(|i| i as u32)
    }

    /// TSV dump: edge_id, label, source, range, position.
    pub fn render_graph_tsv(&self) -> String {
        let ab = self.sub.alphabet();
        let mut s = String::from("edge_id\tlabel\tsource\trange\tposition\n");
        for (id, e) in self.edges.iter().enumerate() {
            s.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\n",
                id,
                self.edge_label(id as u32),
                ab.symbol(e.source),
                ab.symbol(e.range),
                e.position
            ));
        }
        s
    }
}

/// A composable edge sequence; edge i's range is edge i+1's source, so the
/// path points from a tile out through nested supertiles.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphPath(pub Vec<u32>);

impl GraphPath {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl SubstitutionGraph {
    pub fn validate_path(&self, path: &GraphPath) -> Result<()> {
        for win in path.0.windows(2) {
            let (a, b) = (self.edge(win[0]), self.edge(win[1]));
            if a.range != b.source {
                return Err(Error::Invalid(format!(
                    "path breaks at {} -> {}: range {} is not source {}",
                    self.edge_label(win[0]),
                    self.edge_label(win[1]),
                    self.sub.alphabet().symbol(a.range),
                    self.sub.alphabet().symbol(b.source),
                )));
            }
        }
        Ok(())
    }

    pub fn path_source(&self, path: &GraphPath) -> Option<Letter> {
        path.0.first().map(|&e| self.edge(e).source)
    }

    pub fn path_range(&self, path: &GraphPath) -> Option<Letter> {
        path.0.last().map(|&e| self.edge(e).range)
    }

    /// All composable paths of length n, lexicographic by edge ids.
    pub fn paths_of_length(&self, n: usize) -> Vec<GraphPath> {
        let mut out = vec![GraphPath(Vec::new())];
        for _ in 0..n {
            let mut next = Vec::new();
            for p in &out {
                match p.0.last() {
                    None => {
                        for id in 0..self.n_edges() as u32 {
                            let mut q = p.0.clone();
                            q.push(id);
                            next.push(GraphPath(q));
                        }
                    }
                    Some(&last) => {
                        for &id in self.edges_from(self.edge(last).range) {
                            let mut q = p.0.clone();
                            q.push(id);
                            next.push(GraphPath(q));
                        }
                    }
                }
            }
            out = next;
        }
        out
    }

    /// Exact A^n, with overflow detection.
    pub fn matrix_power(&self, n: usize) -> Result<Vec<Vec<i128>>> {
        let k = self.n_vertices();
        let mut acc: Vec<Vec<i128>> =
            (0..k).map(|i| (0..k).map(|j| i128::from(i == j)).collect()).collect();
        for _ in 0..n {
            acc = mat_mul(&acc, &self.matrix)?;
        }
        Ok(acc)
    }
}

fn mat_mul(a: &[Vec<i128>], b: &[Vec<i128>]) -> Result<Vec<Vec<i128>>> {
    let k = a.len();
    let mut out = vec![vec![0i128; k]; k];
    for i in 0..k {
        for j in 0..k {
            let mut acc = 0i128;
            for (l, bl) in b.iter().enumerate() {
                acc = a[i][l]
                    .checked_mul(bl[j])
                    .and_then(|x| acc.checked_add(x))
                    .ok_or_else(|| Error::Numeric("matrix power overflows i128".into()))?;
            }
            out[i][j] = acc;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flavor {
    /// Pairs of same-source edges: two copies of one tile in supertiles.
    Transverse,
    /// Pairs of same-range edges: two constituents of one supertile.
    Longitudinal,
}

/// Unoriented fundamental pairs (stored with smaller id first) that seed
/// the self-similar horizontal edge sets by lifting.
#[derive(Debug, Clone)]
pub struct FundamentalEdges {
    pub flavor: Flavor,
    pub pairs: Vec<(u32, u32)>,
}

/// All distinct same-source (transverse) or same-range (longitudinal)
/// pairs.
pub fn maximal_fundamental(graph: &SubstitutionGraph, flavor: Flavor) -> FundamentalEdges {
    let mut pairs = Vec::new();
    for v in 0..graph.n_vertices() as u8 {
        let ids = match flavor {
            Flavor::Transverse => graph.edges_from(v),
            Flavor::Longitudinal => graph.edges_into(v),
        };
        for i in 0..ids.len() {
            for j in i + 1..ids.len() {
                pairs.push((ids[i], ids[j]));
            }
        }
    }
    FundamentalEdges { flavor, pairs }
}

/// One spanning chain of pairs per shared vertex: the least set still
/// linking all same-source (or same-range) edges.
pub fn minimal_fundamental(graph: &SubstitutionGraph, flavor: Flavor) -> FundamentalEdges {
    let mut pairs = Vec::new();
    for v in 0..graph.n_vertices() as u8 {
        let ids = match flavor {
            Flavor::Transverse => graph.edges_from(v),
            Flavor::Longitudinal => graph.edges_into(v),
        };
        for w in ids.windows(2) {
            pairs.push((w[0], w[1]));
        }
    }
    FundamentalEdges { flavor, pairs }
}

impl FundamentalEdges {
    /// Unoriented pair count per shared vertex (source letter for the
    /// transverse flavor, range letter for the longitudinal one).
    pub fn pair_count_vector(&self, graph: &SubstitutionGraph) -> Vec<i128> {
        let mut n = vec![0i128; graph.n_vertices()];
        for &(a, _) in &self.pairs {
            let v = match self.flavor {
                Flavor::Transverse => graph.edge(a).source,
                Flavor::Longitudinal => graph.edge(a).range,
            };
            n[v as usize] += 1;
        }
        n
    }

    /// Checks pair well-formedness and, for the transverse flavor, the
    /// chain condition: any two same-source edges must be linked through
    /// the fundamental pairs.
    pub fn validate(&self, graph: &SubstitutionGraph) -> Result<()> {
        let shared = |id: u32| match self.flavor {
            Flavor::Transverse => graph.edge(id).source,
            Flavor::Longitudinal => graph.edge(id).range,
        };
        for &(a, b) in &self.pairs {
            if a == b {
                return Err(Error::Invalid(format!(
                    "fundamental pair repeats edge {}",
                    graph.edge_label(a)
                )));
            }
            if shared(a) != shared(b) {
                return Err(Error::Invalid(format!(
                    "fundamental pair ({}, {}) does not share a {}",
                    graph.edge_label(a),
                    graph.edge_label(b),
                    match self.flavor {
                        Flavor::Transverse => "source",
                        Flavor::Longitudinal => "range",
                    }
                )));
            }
        }
        if self.flavor == Flavor::Transverse {
            // union-find over edges, restricted to each source class
            let mut parent: Vec<u32> = (0..graph.n_edges() as u32).collect();
            fn find(parent: &mut Vec<u32>, x: u32) -> u32 {
                if parent[x as usize] != x {
                    let r = find(parent, parent[x as usize]);
                    parent[x as usize] = r;
                }
                parent[x as usize]
            }
            for &(a, b) in &self.pairs {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                parent[ra as usize] = rb;
            }
            for v in 0..graph.n_vertices() as u8 {
                let ids = graph.edges_from(v);
                for w in ids.windows(2) {
                    if find(&mut parent, w[0]) != find(&mut parent, w[1]) {
                        return Err(Error::Invalid(format!(
                            "chain condition fails at source '{}': edges {} and {} are not linked",
                            graph.substitution().alphabet().symbol(v),
                            graph.edge_label(w[0]),
                            graph.edge_label(w[1])
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Exact number of unoriented horizontal edges at level n >= 1, i.e.
/// fundamental pairs lifted by all composable paths of length n-1.
pub fn count_h_n(graph: &SubstitutionGraph, fund: &FundamentalEdges, n: usize) -> Result<i128> {
    if n < 1 {
        return Err(Error::Invalid("edge sets are counted from level 1".into()));
    }
    let an = graph.matrix_power(n - 1)?;
    let nv = fund.pair_count_vector(graph);
    let mut total = 0i128;
    for (w, &nw) in nv.iter().enumerate() {
        let col: i128 = an.iter().map(|row| row[w]).sum();
        total = col
            .checked_mul(nw)
            .and_then(|x| total.checked_add(x))
            .ok_or_else(|| Error::Numeric("edge count overflows i128".into()))?;
    }
    Ok(total)
}

/// Closed form #H_n = sum_j C_j lambda_j^n in the quadratic field of the
/// graph matrix (two-letter alphabets with distinct real eigenvalues).
#[derive(Debug, Clone)]
pub struct HnClosedForm {
    pub field: QuadField,
    /// (lambda_j, C_j) pairs, spectrally dominant first.
    pub terms: Vec<(Quad, Quad)>,
}

impl HnClosedForm {
    pub fn eval(&self, n: u32) -> Quad {
        let mut acc = Quad::zero(self.field);
        for &(lambda, c) in &self.terms {
            acc = acc + c * lambda.powi(n as i32);
        }
        acc
    }
}

pub fn hn_closed_form(
    graph: &SubstitutionGraph,
    fund: &FundamentalEdges,
) -> Result<HnClosedForm> {
    let k = graph.n_vertices();
    if k != 2 {
        return Err(Error::UnsupportedDegree { degree: k });
    }
    let a = graph.matrix();
    let trace = a[0][0] + a[1][1];
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    let disc = trace * trace - 4 * det;
    if disc == 0 {
        return Err(Error::NotDiagonalizable);
    }
    if disc < 0 {
        return Err(Error::Numeric("graph matrix has complex eigenvalues".into()));
    }
    // field with theta = (trace + sqrt(disc)) / 2, the dominant eigenvalue
    let field = QuadField::new(trace as i64, (-det) as i64);
    let lam1 = Quad::theta(field);
    let lam2 = Quad::from_ints(field, trace, 0) - lam1;
    let nv = fund.pair_count_vector(graph);
    let n0 = Quad::from_ints(field, nv[0], 0);
    let n1 = Quad::from_ints(field, nv[1], 0);
    let aq = |i: usize, j: usize| Quad::from_ints(field, a[i][j], 0);
    // 1^T (A - lambda I) n for each eigenvalue, then C_j = that / (lambda_j
    // - lambda_other) / lambda_j
    let col0 = aq(0, 0) + aq(1, 0);
    let col1 = aq(0, 1) + aq(1, 1);
    let one_t_a_n = col0 * n0 + col1 * n1;
    let one_t_n = n0 + n1;
    let c1 = (one_t_a_n - lam2 * one_t_n) / (lam1 - lam2) / lam1;
    let c2 = (one_t_a_n - lam1 * one_t_n) / (lam2 - lam1) / lam2;
    Ok(HnClosedForm { field, terms: vec![(lam1, c1), (lam2, c2)] })
}

/// Dominant term of #H_n ~ C lambda^n from Perron data; works for any
/// alphabet size.
pub fn hn_dominant_term(
    graph: &SubstitutionGraph,
    fund: &FundamentalEdges,
) -> Result<(f64, f64)> {
    let perron = graph.substitution().perron()?;
    // normalize left so that left . right = 1, then the projector onto the
    // dominant eigenspace is right (outer) left
    let dot: f64 = perron.left.iter().zip(&perron.right).map(|(l, r)| l * r).sum();
    let nv = fund.pair_count_vector(graph);
    let l_dot_n: f64 =
        perron.left.iter().zip(&nv).map(|(l, &n)| l * n as f64).sum::<f64>() / dot;
    let one_dot_r: f64 = perron.right.iter().sum();
    Ok((perron.lambda, l_dot_n * one_dot_r / perron.lambda))
}

/// The path tree of the graph (levels = composable paths), together with
/// the edge-shift oracle it was built from. Path letters are edge ids.
pub fn path_tree(graph: &SubstitutionGraph, depth: usize) -> Result<(WordTree, LanguageOracle)> {
    let k = graph.n_edges();
    if k > 250 {
        return Err(Error::Invalid(format!("too many graph edges for a path tree: {k}")));
    }
    let mut can_follow = vec![vec![false; k]; k];
    for e in 0..k {
        for f in 0..k {
            can_follow[e][f] = graph.edge(e as u32).range == graph.edge(f as u32).source;
        }
    }
    let oracle = LanguageOracle::edge_shift(EdgeShift { letters: k, can_follow })?;
    let tree = crate::tree::build_tree(&oracle, depth)?;
    Ok((tree, oracle))
}

/// Lift the fundamental pairs by all composable paths of length m: pairs
/// (path+edge, path+edge') as horizontal edges of the path tree at level
/// m+1, both orientations, lengths from the length function.
pub fn lift_edges(
    tree: &WordTree,
    graph: &SubstitutionGraph,
    fund: &FundamentalEdges,
    length: &LengthFunction,
    m: usize,
) -> Result<Vec<HorizontalEdge>> {
    if m + 1 > tree.depth() {
        return Err(Error::InsufficientDepth {
            what: "path tree for lifted edges".into(),
            need: m + 1,
            got: tree.depth(),
        });
    }
    length.validate(m + 1)?;
    let delta = length.eval(m + 1);
    let mut out = Vec::new();
    for gamma in graph.paths_of_length(m) {
        let r = graph.path_range(&gamma);
        for &(a, b) in &fund.pairs {
            let s = match fund.flavor {
                Flavor::Transverse => graph.edge(a).source,
                Flavor::Longitudinal => graph.edge(a).range,
            };
            if let Some(rv) = r {
                if rv != s {
                    continue;
                }
            }
            let mut wa: Vec<Letter> = gamma.0.iter().map(|&e| e as Letter).collect();
            let mut wb = wa.clone();
            wa.push(a as Letter);
            wb.push(b as Letter);
            let (na, nb) = match (
                tree.find(&crate::words::Word(wa)),
                tree.find(&crate::words::Word(wb)),
            ) {
                (Some(x), Some(y)) => (x, y),
                _ => {
                    return Err(Error::Invalid(
                        "lifted path missing from the path tree".into(),
                    ))
                }
            };
            out.push(HorizontalEdge {
                source: na,
                range: nb,
                level: (m + 1) as u32,
                delta,
                orientation: Orientation::Positive,
                multiplicity_id: 0,
            });
            out.push(HorizontalEdge {
                source: nb,
                range: na,
                level: (m + 1) as u32,
                delta,
                orientation: Orientation::Negative,
                multiplicity_id: 0,
            });
        }
    }
    out.sort_by_key(|e| (e.level, e.source, e.range));
    Ok(out)
}

/// All lifted levels 1..=level_max in one edge set.
pub fn self_similar_edges(
    tree: &WordTree,
    graph: &SubstitutionGraph,
    fund: &FundamentalEdges,
    length: &LengthFunction,
    level_max: usize,
) -> Result<Vec<HorizontalEdge>> {
    let mut out = Vec::new();
    for m in 0..level_max.min(tree.depth()) {
        out.extend(lift_edges(tree, graph, fund, length, m)?);
    }
    Ok(out)
}

/// The self-similar choice data: a one-edge loop eps*, and tau_hat sending
/// each edge to a following edge that moves toward eps*'s vertex.
#[derive(Debug, Clone)]
pub struct SelfSimilarChoice {
    pub eps_star: u32,
    tau_hat: Vec<u32>,
    /// Seed edge for the empty path (least edge id).
    pub root_seed: u32,
}

impl SelfSimilarChoice {
    pub fn tau_hat(&self, edge: u32) -> u32 {
        self.tau_hat[edge as usize]
    }
}

pub fn self_similar_choice(
    graph: &SubstitutionGraph,
    eps_star: Option<u32>,
) -> Result<SelfSimilarChoice> {
    let loops: Vec<u32> = (0..graph.n_edges() as u32)
        .filter(|&id| graph.edge(id).source == graph.edge(id).range)
        .collect();
    let eps_star = match eps_star {
        Some(e) => {
            if graph.edge(e).source != graph.edge(e).range {
                return Err(Error::Invalid(format!(
                    "edge {} is not a one-edge loop",
                    graph.edge_label(e)
                )));
            }
            e
        }
        None => *loops.first().ok_or(Error::NoOneEdgeLoop)?,
    };
    let star_vertex = graph.edge(eps_star).source;
    // graph distance from each vertex to star_vertex along edge direction
    let k = graph.n_vertices();
    let mut dist = vec![usize::MAX; k];
    dist[star_vertex as usize] = 0;
    let mut frontier = vec![star_vertex];
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for &u in &frontier {
            for id in 0..graph.n_edges() as u32 {
                let e = graph.edge(id);
                if e.range == u && dist[e.source as usize] == usize::MAX {
                    dist[e.source as usize] = dist[u as usize] + 1;
                    next.push(e.source);
                }
            }
        }
        frontier = next;
    }
    if dist.iter().any(|&d| d == usize::MAX) {
        return Err(Error::NotPrimitive {
            detail: "graph is not strongly connected toward the chosen loop".into(),
        });
    }
    let mut tau_hat = Vec::with_capacity(graph.n_edges());
    for id in 0..graph.n_edges() as u32 {
        let r = graph.edge(id).range;
        if r == star_vertex {
            tau_hat.push(eps_star);
            continue;
        }
        let best = graph
            .edges_from(r)
            .iter()
            .copied()
            .min_by_key(|&f| (dist[graph.edge(f).range as usize], f))
            .expect("strongly connected graphs have outgoing edges");
        tau_hat.push(best);
    }
    Ok(SelfSimilarChoice { eps_star, tau_hat, root_seed: 0 })
}

/// Extend a path to `depth` by iterating tau_hat on its last edge; the
/// empty path is seeded with the root seed edge.
pub fn embed(
    graph: &SubstitutionGraph,
    choice: &SelfSimilarChoice,
    gamma: &GraphPath,
    depth: usize,
) -> Result<GraphPath> {
    graph.validate_path(gamma)?;
    let mut edges = gamma.0.clone();
    while edges.len() < depth {
        let next = match edges.last() {
            Some(&e) => choice.tau_hat(e),
            None => choice.root_seed,
        };
        edges.push(next);
    }
    Ok(GraphPath(edges))
}

/// The choice function on the path tree induced by tau_hat.
pub fn self_similar_choice_function(
    tree: &WordTree,
    choice: &SelfSimilarChoice,
) -> Result<ChoiceFunction> {
    make_custom_choice(tree, "self-similar", |t, v| {
        let next_edge = if v == crate::tree::ROOT {
            choice.root_seed
        } else {
            let w = t.word(v);
            choice.tau_hat(*w.0.last().unwrap() as u32)
        };
        t.children(v)
            .find(|&c| {
                let cw = t.word(c);
                *cw.0.last().unwrap() as u32 == next_edge
            })
            .expect("tau-hat always extends by a composable edge")
    })
}

/// Scalars the 1-d geometry can be computed over: exact quadratic numbers
/// or floats.
pub trait GeomScalar:
    Copy
    + PartialEq
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<Output = Self>
    + std::ops::Div<Output = Self>
{
    fn zero_of(sample: Self) -> Self;
    fn one_of(sample: Self) -> Self;
    fn approx(self) -> f64;
    fn render(self) -> String;
}

impl GeomScalar for f64 {
    fn zero_of(_: Self) -> Self {
        0.0
    }
    fn one_of(_: Self) -> Self {
        1.0
    }
    fn approx(self) -> f64 {
        self
    }
    fn render(self) -> String {
        format!("{self}")
    }
}

impl GeomScalar for Quad {
    fn zero_of(sample: Self) -> Self {
        Quad::zero(sample.field)
    }
    fn one_of(sample: Self) -> Self {
        Quad::one(sample.field)
    }
    fn approx(self) -> f64 {
        self.to_f64()
    }
    fn render(self) -> String {
        format!("{self}")
    }
}

fn pow_scalar<T: GeomScalar>(x: T, n: usize) -> T {
    let mut acc = T::one_of(x);
    for _ in 0..n {
        acc = acc * x;
    }
    acc
}

/// Tile lengths (left Perron eigenvector, shortest tile = 1), the
/// expansion theta, and per-edge offsets of tiles inside supertiles.
#[derive(Debug, Clone)]
pub struct TileGeometry1D<T> {
    pub lengths: Vec<T>,
    pub theta: T,
    offsets: Vec<T>,
}

impl<T: GeomScalar> TileGeometry1D<T> {
    pub fn offset(&self, edge: u32) -> T {
        self.offsets[edge as usize]
    }

    /// Every supertile is its constituents laid end to end: the sum of
    /// the image's tile lengths must be theta times the tile length.
    pub fn check_consistency(&self, graph: &SubstitutionGraph) -> Result<()> {
        let sub = graph.substitution();
        for r in sub.alphabet().letters() {
            let mut acc = T::zero_of(self.theta);
            for &l in &sub.image(r).0 {
                acc = acc + self.lengths[l as usize];
            }
            if acc != self.theta * self.lengths[r as usize] {
                return Err(Error::Numeric(format!(
                    "supertile '{}' length mismatch",
                    sub.alphabet().symbol(r)
                )));
            }
        }
        Ok(())
    }
}

fn offsets_from_lengths<T: GeomScalar>(graph: &SubstitutionGraph, lengths: &[T]) -> Vec<T> {
    let sub = graph.substitution();
    (0..graph.n_edges() as u32)
        .map(|id| {
            let e = graph.edge(id);
            let img = sub.image(e.range);
            let mut acc = T::zero_of(lengths[0]);
            for &l in &img.0[..e.position] {
                acc = acc + lengths[l as usize];
            }
            acc
        })
        .collect()
}

/// Exact geometry for two-letter substitutions with quadratic expansion.
pub fn tile_geometry_quad(graph: &SubstitutionGraph) -> Result<TileGeometry1D<Quad>> {
    let (field, theta) = graph
        .substitution()
        .perron_quad()
        .ok_or(Error::UnsupportedDegree { degree: graph.n_vertices() })?;
    let a = graph.matrix();
    // left eigenvector l A = theta l; solve with l normalized at one
    // coordinate, then rescale so the shortest tile has length 1
    let (la, lb) = if a[0][1] != 0 {
        (
            (theta - Quad::from_ints(field, a[1][1], 0)) / Quad::from_ints(field, a[0][1], 0),
            Quad::one(field),
        )
    } else {
        (
            Quad::one(field),
            (theta - Quad::from_ints(field, a[0][0], 0)) / Quad::from_ints(field, a[1][0], 0),
        )
    };
    let min = if la.to_f64() <= lb.to_f64() { la } else { lb };
    let lengths = vec![la / min, lb / min];
    let offsets = offsets_from_lengths(graph, &lengths);
    let geom = TileGeometry1D { lengths, theta, offsets };
    geom.check_consistency(graph)?;
    Ok(geom)
}

/// Floating-point geometry for any primitive substitution.
pub fn tile_geometry_f64(graph: &SubstitutionGraph) -> Result<TileGeometry1D<f64>> {
    let perron = graph.substitution().perron()?;
    if perron.lambda <= 1.0 + 1e-12 {
        return Err(Error::Numeric("expansion factor must exceed 1".into()));
    }
    let lengths = perron.left.clone();
    let offsets = offsets_from_lengths(graph, &lengths);
    Ok(TileGeometry1D { lengths, theta: perron.lambda, offsets })
}

impl TileGeometry1D<f64> {
    /// Consistency up to floating error.
    pub fn check_consistency_approx(&self, graph: &SubstitutionGraph) -> Result<()> {
        let sub = graph.substitution();
        for r in sub.alphabet().letters() {
            let acc: f64 = sub.image(r).0.iter().map(|&l| self.lengths[l as usize]).sum();
            if (acc - self.theta * self.lengths[r as usize]).abs() > 1e-9 {
                return Err(Error::Numeric(format!(
                    "supertile '{}' length mismatch",
                    sub.alphabet().symbol(r)
                )));
            }
        }
        Ok(())
    }
}

/// Merge data of a transverse pair: the level and vertex where the two
/// embedded paths coincide, and the translation between the two tile
/// copies inside that supertile.
#[derive(Debug, Clone)]
pub struct ReturnVector<T> {
    pub n_h: usize,
    pub v_h: Letter,
    pub r_h: T,
}

pub fn return_vector<T: GeomScalar>(
    graph: &SubstitutionGraph,
    geom: &TileGeometry1D<T>,
    choice: &SelfSimilarChoice,
    pair: (u32, u32),
    max_depth: usize,
) -> Result<ReturnVector<T>> {
    let (mut ea, mut eb) = pair;
    if ea == eb {
        return Err(Error::Invalid("a fundamental pair needs two distinct edges".into()));
    }
    if graph.edge(ea).source != graph.edge(eb).source {
        return Err(Error::Invalid("transverse pairs must share their source".into()));
    }
    let mut diff = T::zero_of(geom.theta);
    let mut scale = T::one_of(geom.theta);
    for level in 1..=max_depth {
        if ea == eb {
            return Ok(ReturnVector { n_h: level - 1, v_h: graph.edge(ea).source, r_h: diff });
        }
        diff = diff + scale * (geom.offset(eb) - geom.offset(ea));
        scale = scale * geom.theta;
        ea = choice.tau_hat(ea);
        eb = choice.tau_hat(eb);
    }
    if ea == eb {
        return Ok(ReturnVector { n_h: max_depth, v_h: graph.edge(ea).source, r_h: diff });
    }
    Err(Error::NonMerging { depth: max_depth })
}

/// Return vector of a lifted pair (gamma+edge, gamma+edge'), computed from
/// the full embedded paths; equals theta^{|gamma|} times the fundamental
/// return vector.
pub fn lifted_return_vector<T: GeomScalar>(
    graph: &SubstitutionGraph,
    geom: &TileGeometry1D<T>,
    choice: &SelfSimilarChoice,
    pair: (u32, u32),
    gamma: &GraphPath,
    max_depth: usize,
) -> Result<ReturnVector<T>> {
    graph.validate_path(gamma)?;
    if let Some(r) = graph.path_range(gamma) {
        if r != graph.edge(pair.0).source {
            return Err(Error::Invalid("lift path must end at the pair's source".into()));
        }
    }
    let base = return_vector(graph, geom, choice, pair, max_depth)?;
    Ok(ReturnVector {
        n_h: base.n_h + gamma.len(),
        v_h: base.v_h,
        r_h: pow_scalar(geom.theta, gamma.len()) * base.r_h,
    })
}

/// Per-letter selection of one decomposition position (an edge into each
/// letter), fixing a marked point in every tile.
#[derive(Debug, Clone)]
pub struct LongitudinalChoice {
    into: Vec<u32>,
}

impl LongitudinalChoice {
    pub fn into_tile(&self, v: Letter) -> u32 {
        self.into[v as usize]
    }
}

/// Always descend into the leftmost microtile; marked points are then the
/// left tile endpoints.
pub fn leftmost_longitudinal(graph: &SubstitutionGraph) -> LongitudinalChoice {
    let into = (0..graph.n_vertices() as u8)
        .map(|v| {
            *graph
                .edges_into(v)
                .iter()
                .min_by_key(|&&id| graph.edge(id).position)
                .expect("every letter has an image")
        })
        .collect();
    LongitudinalChoice { into }
}

/// Custom per-letter positions; each entry is an edge id into that letter.
pub fn longitudinal_choice(
    graph: &SubstitutionGraph,
    into: Vec<u32>,
) -> Result<LongitudinalChoice> {
    if into.len() != graph.n_vertices() {
        return Err(Error::Invalid("need one decomposition edge per letter".into()));
    }
    for (v, &id) in into.iter().enumerate() {
        if graph.edge(id).range as usize != v {
            return Err(Error::Invalid(format!(
                "edge {} does not decompose letter '{}'",
                graph.edge_label(id),
                graph.substitution().alphabet().symbol(v as u8)
            )));
        }
    }
    Ok(LongitudinalChoice { into })
}

/// Marked point of each tile: the limit point selected by descending
/// through the chosen microtiles forever. Solved exactly by following the
/// letter chain into its cycle.
pub fn marked_points<T: GeomScalar>(
    graph: &SubstitutionGraph,
    geom: &TileGeometry1D<T>,
    lgc: &LongitudinalChoice,
) -> Vec<T> {
    let k = graph.n_vertices();
    let theta_inv = T::one_of(geom.theta) / geom.theta;
    let next = |v: usize| graph.edge(lgc.into_tile(v as u8)).source as usize;
    let step_offset = |v: usize| geom.offset(lgc.into_tile(v as u8));
    let mut out: Vec<Option<T>> = vec![None; k];
    for start in 0..k {
        if out[start].is_some() {
            continue;
        }
        // follow the chain until hitting a solved letter or a repeat
        let mut seq = vec![start];
        let mut seen = vec![usize::MAX; k];
        seen[start] = 0;
        loop {
            let last = *seq.last().unwrap();
            let nx = next(last);
            if let Some(x) = out[nx] {
                // back-substitute from a solved point
                let mut val = x;
                for &u in seq.iter().rev() {
                    val = theta_inv * (step_offset(u) + val);
                    out[u] = Some(val);
                }
                break;
            }
            if seen[nx] != usize::MAX {
                // cycle: solve the head exactly, then unwind
                let j = seen[nx];
                let cycle = &seq[j..];
                let mut c = T::zero_of(geom.theta);
                let mut scale = theta_inv;
                for &u in cycle {
                    c = c + scale * step_offset(u);
                    scale = scale * theta_inv;
                }
                let head = T::one_of(geom.theta)
                    / (T::one_of(geom.theta) - pow_scalar(theta_inv, cycle.len()))
                    * c;
                out[nx] = Some(head);
                let mut val = head;
                for &u in seq.iter().rev() {
                    val = theta_inv * (step_offset(u) + val);
                    out[u] = Some(val);
                }
                break;
            }
            seen[nx] = seq.len();
            seq.push(nx);
        }
    }
    out.into_iter().map(|x| x.unwrap()).collect()
}

/// Translation between the marked points of the two microtiles of a
/// same-range pair, inside one tile.
pub fn microtile_vector<T: GeomScalar>(
    graph: &SubstitutionGraph,
    geom: &TileGeometry1D<T>,
    lgc: &LongitudinalChoice,
    pair: (u32, u32),
) -> Result<T> {
    let (ea, eb) = pair;
    if ea == eb {
        return Err(Error::Invalid("a fundamental pair needs two distinct edges".into()));
    }
    if graph.edge(ea).range != graph.edge(eb).range {
        return Err(Error::Invalid("longitudinal pairs must share their range".into()));
    }
    let pts = marked_points(graph, geom, lgc);
    let theta_inv = T::one_of(geom.theta) / geom.theta;
    let xa = geom.offset(ea) + pts[graph.edge(ea).source as usize];
    let xb = geom.offset(eb) + pts[graph.edge(eb).source as usize];
    Ok(theta_inv * (xb - xa))
}

/// Microtile vector of a pair seen at the end of a descent chain: each
/// edge decomposes the previous edge's microtile, and the last microtile
/// is the pair's shared range. The vector contracts by one theta factor
/// per descent level.
pub fn lifted_microtile_vector<T: GeomScalar>(
    graph: &SubstitutionGraph,
    geom: &TileGeometry1D<T>,
    lgc: &LongitudinalChoice,
    pair: (u32, u32),
    descent: &[u32],
) -> Result<T> {
    for w in descent.windows(2) {
        if graph.edge(w[1]).range != graph.edge(w[0]).source {
            return Err(Error::Invalid(
                "descent chain must decompose the previous microtile".into(),
            ));
        }
    }
    if let Some(&last) = descent.last() {
        if graph.edge(last).source != graph.edge(pair.0).range {
            return Err(Error::Invalid(
                "descent chain must end at the pair's shared range".into(),
            ));
        }
    }
    let base = microtile_vector(graph, geom, lgc, pair)?;
    Ok(pow_scalar(T::one_of(geom.theta) / geom.theta, descent.len()) * base)
}

/// Table of return vectors for all fundamental transverse pairs: pair,
/// merge level, merge vertex, translation (exact rendering when exact).
pub fn render_return_table<T: GeomScalar>(
    graph: &SubstitutionGraph,
    geom: &TileGeometry1D<T>,
    choice: &SelfSimilarChoice,
    fund: &FundamentalEdges,
    max_depth: usize,
) -> Result<String> {
    let mut s = String::from("pair\tn_h\tv_h\tr_h\n");
    let ab = graph.substitution().alphabet();
    for &(a, b) in &fund.pairs {
        let rv = return_vector(graph, geom, choice, (a, b), max_depth)?;
        s.push_str(&format!(
            "({},{})\t{}\t{}\t{}\n",
            graph.edge_label(a),
            graph.edge_label(b),
            rv.n_h,
            ab.symbol(rv.v_h),
            rv.r_h.render()
        ));
    }
    Ok(s)
}
