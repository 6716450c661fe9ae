//! Dirac spectra and zeta functions of approximation-tree spectral
//! triples: truncated Dirichlet series with tail bounds, the tree zetas
//! counting branching vertices, abscissa-of-convergence estimation, and
//! the exact closed form for self-similar edge sets.

use num::complex::Complex64;

use crate::error::{Error, Result};
use crate::selfsim::{count_h_n, hn_closed_form, FundamentalEdges, HnClosedForm, SubstitutionGraph};
use crate::tree::{HorizontalEdge, LengthFunction, WordTree};

/// One group of Dirac eigenvalues: every edge of length `delta`
/// contributes an eigenvalue 1/delta of |D| with the stated multiplicity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumLevel {
    pub level: u32,
    pub delta: f64,
    pub multiplicity: u64,
}

/// The |D| spectrum of a spectral triple, grouped by edge length in
/// decreasing order. Zero is never an eigenvalue: lengths are finite and
/// positive by construction, which `validate` asserts.
#[derive(Debug, Clone, PartialEq)]
pub struct DiracSpectrum {
    levels: Vec<SpectrumLevel>,
}

impl DiracSpectrum {
    /// Groups an edge set by length (descending). Edge sets carry both
    /// orientations, so multiplicities built this way are oriented counts.
    /// Level indices are re-derived from the length grouping; schemes
    /// whose own level tags mix lengths (privileged orders) are still
    /// grouped correctly.
    pub fn from_edges(edges: &[HorizontalEdge]) -> Result<DiracSpectrum> {
        let mut deltas: Vec<f64> = edges.iter().map(|e| e.delta).collect();
        deltas.sort_by(|a, b| b.partial_cmp(a).expect("finite lengths"));
        deltas.dedup();
        let levels = deltas
            .iter()
            .enumerate()
            .map(|(i, &d)| SpectrumLevel {
                level: (i + 1) as u32,
                delta: d,
                multiplicity: edges.iter().filter(|e| e.delta == d).count() as u64,
            })
            .collect();
        let spectrum = DiracSpectrum { levels };
        spectrum.validate()?;
        Ok(spectrum)
    }

    /// Spectrum with `counts[i]` eigenvalues of length `length.eval(i+1)`.
    /// The caller chooses the orientation convention of the counts.
    pub fn from_level_counts(length: &LengthFunction, counts: &[u64]) -> Result<DiracSpectrum> {
        length.validate(counts.len())?;
        let levels = counts
            .iter()
            .enumerate()
            .map(|(i, &m)| SpectrumLevel {
                level: (i + 1) as u32,
                delta: length.eval(i + 1),
                multiplicity: m,
            })
            .collect();
        let spectrum = DiracSpectrum { levels };
        spectrum.validate()?;
        Ok(spectrum)
    }

    fn validate(&self) -> Result<()> {
        for w in self.levels.windows(2) {
            if w[1].delta >= w[0].delta {
                return Err(Error::Invalid(
                    "spectrum lengths must strictly decrease with level".into(),
                ));
            }
        }
        for l in &self.levels {
            if !(l.delta.is_finite() && l.delta > 0.0) {
                return Err(Error::Invalid(format!(
                    "spectrum length {} at level {} is not a positive real",
                    l.delta, l.level
                )));
            }
        }
        Ok(())
    }

    pub fn levels(&self) -> &[SpectrumLevel] {
        &self.levels
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn total_multiplicity(&self) -> u64 {
        self.levels.iter().map(|l| l.multiplicity).sum()
    }

    /// Halves every multiplicity, converting oriented counts to the
    /// unoriented convention of the closed-form zeta.
    pub fn unoriented(&self) -> Result<DiracSpectrum> {
        let mut levels = self.levels.clone();
        for l in &mut levels {
            if l.multiplicity % 2 != 0 {
                return Err(Error::Invalid(format!(
                    "odd multiplicity {} at level {}: not an oriented edge count",
                    l.multiplicity, l.level
                )));
            }
            l.multiplicity /= 2;
        }
        Ok(DiracSpectrum { levels })
    }

    /// Eigenvalues of |D| as (value, multiplicity), increasing.
    pub fn eigenvalues(&self) -> Vec<(f64, u64)> {
        self.levels.iter().map(|l| (1.0 / l.delta, l.multiplicity)).collect()
    }
}

/// How much the levels beyond the cutoff can still contribute.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailBound {
    /// Rigorous geometric bound from a known growth rate.
    Geometric(f64),
    /// Extrapolated from the last observed term ratio; not rigorous.
    Heuristic(f64),
    /// The series does not converge at this exponent.
    Divergent,
    /// No growth information available.
    Unknown,
}

#[derive(Debug, Clone, Copy)]
pub struct PartialZeta {
    pub value: f64,
    pub levels_used: usize,
    pub tail: TailBound,
}

/// Truncated zeta(s) = sum over levels of multiplicity * delta^s, summed
/// in level order. `growth` is the known multiplicity growth rate
/// (multiplicities ~ C * growth^n), enabling a geometric tail bound when
/// the lengths are geometric.
pub fn partial_zeta(
    spectrum: &DiracSpectrum,
    s: f64,
    n_max: usize,
    growth: Option<f64>,
) -> PartialZeta {
    let used: Vec<&SpectrumLevel> =
        spectrum.levels.iter().take(n_max.min(spectrum.n_levels())).collect();
    let mut value = 0.0;
    for l in &used {
        value += l.multiplicity as f64 * l.delta.powf(s);
    }
    let tail = tail_bound(&used, s, growth);
    PartialZeta { value, levels_used: used.len(), tail }
}

fn tail_bound(used: &[&SpectrumLevel], s: f64, growth: Option<f64>) -> TailBound {
    let n = used.len();
    if n < 3 {
        return TailBound::Unknown;
    }
    let (prev, last) = (used[n - 2], used[n - 1]);
    let r1 = last.delta / prev.delta;
    let r0 = used[n - 2].delta / used[n - 3].delta;
    let geometric_lengths = (r1 - r0).abs() <= 1e-9 * r0;
    if let (Some(lambda), true) = (growth, geometric_lengths) {
        let q = lambda * r1.powf(s);
        if q >= 1.0 - 1e-12 {
            return TailBound::Divergent;
        }
        let last_term = last.multiplicity as f64 * last.delta.powf(s);
        return TailBound::Geometric(last_term * q / (1.0 - q));
    }
    let t_prev = prev.multiplicity as f64 * prev.delta.powf(s);
    let t_last = last.multiplicity as f64 * last.delta.powf(s);
    if t_prev <= 0.0 {
        return TailBound::Unknown;
    }
    let q = t_last / t_prev;
    if q >= 1.0 {
        TailBound::Divergent
    } else {
        TailBound::Heuristic(t_last * q / (1.0 - q))
    }
}

/// Tree zeta of order k: sum over branching vertices v of a(v)^k times
/// (ball radius of v)^s, with the convention 0^0 = 0, over vertex levels
/// 0..=level_max. The radius of a level-n vertex is length.eval(n+1).
pub fn zeta_k_tree(
    tree: &WordTree,
    k: u32,
    length: &LengthFunction,
    s: f64,
    level_max: usize,
) -> Result<f64> {
    if level_max + 1 > tree.depth() {
        return Err(Error::InsufficientDepth {
            what: "tree zeta needs children below every summed vertex".into(),
            need: level_max + 1,
            got: tree.depth(),
        });
    }
    length.validate(level_max + 1)?;
    let mut total = 0.0;
    for level in 0..=level_max {
        let radius = length.eval(level + 1);
        let mut level_sum = 0.0;
        for v in tree.level_range(level) {
            let a = tree.n_children(v).saturating_sub(1) as u64;
            if a == 0 {
                continue; // 0^0 = 0 by convention, and 0^k = 0
            }
            level_sum += (a as f64).powi(k as i32);
        }
        total += level_sum * radius.powf(s);
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy)]
pub struct ZetaExtremes {
    /// zeta_0, the smallest of the tree zetas.
    pub min: f64,
    /// (zeta_1 + zeta_2)/2, the upper envelope.
    pub max: f64,
}

pub fn zeta_extremes(
    tree: &WordTree,
    length: &LengthFunction,
    s: f64,
    level_max: usize,
) -> Result<ZetaExtremes> {
    let z0 = zeta_k_tree(tree, 0, length, s, level_max)?;
    let z1 = zeta_k_tree(tree, 1, length, s, level_max)?;
    let z2 = zeta_k_tree(tree, 2, length, s, level_max)?;
    Ok(ZetaExtremes { min: z0, max: (z1 + z2) / 2.0 })
}

/// Unoriented sibling-pair counts per edge level for a binary subshift,
/// derived from the complexity sequence alone: level n pairs the children
/// of the right-special words of length n-1, of which there are
/// p(n) - p(n-1). Input p[i] = p(i) with p[0] = 1; output pairs
/// (length.eval(n), count) for n = 1..p.len()-1.
pub fn binary_branching_counts(p: &[u64], length: &LengthFunction) -> Result<Vec<(f64, u64)>> {
    if p.len() < 2 {
        return Err(Error::InsufficientDepth {
            what: "complexity sequence for branching counts".into(),
            need: 2,
            got: p.len(),
        });
    }
    length.validate(p.len() - 1)?;
    Ok((1..p.len()).map(|n| (length.eval(n), p[n] - p[n - 1])).collect())
}

#[derive(Debug, Clone, Copy)]
pub struct AbscissaEstimate {
    /// Largest log(cumulative count)/log(1/delta) over the window.
    pub limsup_slope: f64,
    /// Least-squares slope of log(cumulative count) against log(1/delta).
    pub regression: f64,
    /// The two estimators differ by more than 0.05.
    pub disagreement: bool,
    /// Counts grow faster than any power of 1/delta; the abscissa is
    /// effectively infinite and the numbers above are meaningless.
    pub diverging: bool,
}

impl AbscissaEstimate {
    pub fn best(&self) -> f64 {
        if self.diverging {
            f64::INFINITY
        } else {
            self.regression
        }
    }
}

/// Abscissa of convergence of sum multiplicity_n * delta_n^s, estimated as
/// limsup log(C_n)/log(1/delta_n) with C_n the cumulative count, over the
/// final decade of scales (delta within 10x of the smallest). Levels must
/// come in decreasing-delta order.
pub fn estimate_abscissa(samples: &[(f64, u64)]) -> Result<AbscissaEstimate> {
    let mut pts = Vec::new(); // (log(1/delta), log(cumulative))
    let mut cumulative = 0.0;
    for &(delta, count) in samples {
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::Invalid(format!("length {delta} is not a positive real")));
        }
        cumulative += count as f64;
        if cumulative > 0.0 {
            pts.push(((1.0 / delta).ln(), cumulative.ln()));
        }
    }
    let lambda_max = pts.last().map(|p| p.0).unwrap_or(0.0);
    let window: Vec<(f64, f64)> = pts
        .iter()
        .copied()
        .filter(|&(l, _)| l >= lambda_max - std::f64::consts::LN_10 && l > 0.0)
        .collect();
    if window.len() < 3 {
        return Err(Error::InsufficientDepth {
            what: "abscissa estimation window".into(),
            need: 3,
            got: window.len(),
        });
    }
    let slopes: Vec<f64> = window.iter().map(|&(l, c)| c / l).collect();
    let limsup_slope = slopes.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let n = window.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(x, y) in &window {
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    let regression = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let first = slopes[0];
    let last = *slopes.last().unwrap();
    let diverging = last > first + 0.25 * (first.abs() + 1.0);
    let disagreement = (limsup_slope - regression).abs() > 0.05;
    Ok(AbscissaEstimate { limsup_slope, regression, disagreement, diverging })
}

/// The zeta function of a self-similar triple in closed form:
/// zeta(z) = sum_j C_j lambda_j rho^z / (1 - lambda_j rho^z), where
/// #H_n = sum_j C_j lambda_j^n are the unoriented level counts. Simple
/// poles sit on the lattice (log lambda_j + 2 pi i k)/(-log rho) with
/// residue C_j/(-log rho).
#[derive(Debug, Clone)]
pub struct ZetaClosedForm {
    pub rho: f64,
    /// Metric dimension log(lambda_PF)/(-log rho).
    pub s0: f64,
    /// (lambda_j, C_j), spectrally dominant first.
    pub terms: Vec<(Complex64, Complex64)>,
    exact: Option<HnClosedForm>,
}

impl ZetaClosedForm {
    pub fn eval(&self, z: Complex64) -> Complex64 {
        let rho_z = (z * self.rho.ln()).exp();
        let mut acc = Complex64::new(0.0, 0.0);
        for &(lambda, c) in &self.terms {
            acc += c * lambda * rho_z / (Complex64::new(1.0, 0.0) - lambda * rho_z);
        }
        acc
    }

    /// Base pole of term j (k = 0); the rest of the lattice is reached by
    /// adding integer multiples of the imaginary period.
    pub fn pole(&self, j: usize) -> Complex64 {
        self.terms[j].0.ln() / -self.rho.ln()
    }

    /// Imaginary period of the pole lattice: 2 pi / (-log rho).
    pub fn lattice_period(&self) -> f64 {
        2.0 * std::f64::consts::PI / -self.rho.ln()
    }

    pub fn residue(&self, j: usize) -> Complex64 {
        self.terms[j].1 / -self.rho.ln()
    }

    /// Exact (quadratic-field) counting data when the alphabet has two
    /// letters.
    pub fn exact_terms(&self) -> Option<&HnClosedForm> {
        self.exact.as_ref()
    }

    /// Exact tail of the series past level n at real s: the closed form
    /// evaluates the remaining geometric pieces directly. Infinite when
    /// any |lambda_j rho^s| >= 1.
    pub fn tail(&self, s: f64, n: usize) -> f64 {
        let rho_s = self.rho.powf(s);
        let mut acc = Complex64::new(0.0, 0.0);
        for &(lambda, c) in &self.terms {
            let q = lambda * rho_s;
            if q.norm() >= 1.0 {
                return f64::INFINITY;
            }
            acc += c * q.powu((n + 1) as u32) / (Complex64::new(1.0, 0.0) - q);
        }
        acc.norm()
    }

    pub fn render_report(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("zeta closed form at rho = {}\n", self.rho));
        s.push_str("  #H_n = sum_j C_j * lambda_j^n  (unoriented pairs)\n");
        for (j, (lambda, c)) in self.terms.iter().enumerate() {
            let exact = self
                .exact
                .as_ref()
                .map(|e| format!("  [exact: lambda = {}, C = {}]", e.terms[j].0, e.terms[j].1))
                .unwrap_or_default();
            s.push_str(&format!(
                "  term {}: lambda = {}, C = {}{}\n",
                j + 1,
                render_c64(*lambda),
                render_c64(*c),
                exact
            ));
        }
        s.push_str(&format!("  s0 (metric dimension) = {}\n", self.s0));
        s.push_str(&format!(
            "  residue at s0 = {}\n",
            render_c64(self.residue(0))
        ));
        s.push_str(&format!(
            "  poles: (log lambda_j + 2 pi i k)/(-log rho), vertical period {}\n",
            self.lattice_period()
        ));
        s
    }
}

fn render_c64(z: Complex64) -> String {
    if z.im.abs() <= 1e-12 * (1.0 + z.re.abs()) {
        format!("{}", z.re)
    } else {
        format!("{} + {}i", z.re, z.im)
    }
}

/// Closed-form zeta of the self-similar triple on the path space with
/// lengths rho^n and the given fundamental pairs. Two-letter alphabets
/// get exact quadratic-field coefficients; larger alphabets solve for the
/// coefficients from exact counts and the matrix eigenvalues, refusing
/// repeated eigenvalues.
pub fn closed_form_zeta(
    graph: &SubstitutionGraph,
    fund: &FundamentalEdges,
    rho: f64,
) -> Result<ZetaClosedForm> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::Invalid(format!("scale rho = {rho} must lie in (0, 1)")));
    }
    graph.substitution().require_primitive()?;
    let k = graph.n_vertices();
    let (terms, exact) = if k == 2 {
        let cf = hn_closed_form(graph, fund)?;
        let terms = cf
            .terms
            .iter()
            .map(|&(l, c)| (Complex64::new(l.to_f64(), 0.0), Complex64::new(c.to_f64(), 0.0)))
            .collect();
        (terms, Some(cf))
    } else {
        (general_terms(graph, fund)?, None)
    };
    let lambda_pf = graph.substitution().perron()?.lambda;
    let s0 = lambda_pf.ln() / -rho.ln();
    let mut terms: Vec<(Complex64, Complex64)> = terms;
    terms.sort_by(|a, b| b.0.norm().partial_cmp(&a.0.norm()).expect("finite eigenvalues"));
    Ok(ZetaClosedForm { rho, s0, terms, exact })
}

/// Coefficients for general alphabets: eigenvalues of the edge-count
/// matrix plus a Vandermonde solve against the exact counts #H_1..#H_k.
fn general_terms(
    graph: &SubstitutionGraph,
    fund: &FundamentalEdges,
) -> Result<Vec<(Complex64, Complex64)>> {
    let k = graph.n_vertices();
    let a = nalgebra::DMatrix::<f64>::from_fn(k, k, |i, j| graph.matrix()[i][j] as f64);
    let eigen = a.complex_eigenvalues();
    let scale = eigen.iter().map(|l| l.norm()).fold(1.0, f64::max);
    for i in 0..k {
        for j in 0..i {
            if (eigen[i] - eigen[j]).norm() < 1e-9 * scale {
                return Err(Error::NotDiagonalizable);
            }
        }
    }
    // solve sum_j C_j lambda_j^n = #H_n for n = 1..k
    let m = nalgebra::DMatrix::<Complex64>::from_fn(k, k, |n, j| eigen[j].powu(n as u32 + 1));
    let rhs = nalgebra::DVector::<Complex64>::from_fn(k, |n, _| {
        Complex64::new(count_h_n(graph, fund, n + 1).map(|c| c as f64).unwrap_or(f64::NAN), 0.0)
    });
    if rhs.iter().any(|c| c.re.is_nan()) {
        return Err(Error::Numeric("edge counts overflowed while fitting".into()));
    }
    let solved = m
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numeric("eigenvalue system is singular".into()))?;
    Ok((0..k).map(|j| (eigen[j], solved[j])).collect())
}

/// Metric dimension of the tensor-product triple combining transversal
/// and longitudinal parts: d * (log theta/(-log rho_tr) +
/// log theta/(-log rho_lg)).
pub fn full_triple_dimension(d: usize, theta: f64, rho_tr: f64, rho_lg: f64) -> Result<f64> {
    if theta <= 1.0 {
        return Err(Error::Invalid(format!("expansion theta = {theta} must exceed 1")));
    }
    for (name, rho) in [("rho_tr", rho_tr), ("rho_lg", rho_lg)] {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::Invalid(format!("{name} = {rho} must lie in (0, 1)")));
        }
    }
    Ok(d as f64 * (theta.ln() / -rho_tr.ln() + theta.ln() / -rho_lg.ln()))
}

/// Lower and upper complexity exponents of a complexity sequence: min and
/// max of log p(n)/log n over the second half of the data.
pub fn complexity_exponents(p: &[u64]) -> Result<(f64, f64)> {
    if p.len() < 8 {
        return Err(Error::InsufficientDepth {
            what: "complexity exponents".into(),
            need: 8,
            got: p.len(),
        });
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for n in p.len() / 2..p.len() {
        let e = (p[n] as f64).ln() / (n as f64).ln();
        lo = lo.min(e);
        hi = hi.max(e);
    }
    Ok((lo, hi))
}
