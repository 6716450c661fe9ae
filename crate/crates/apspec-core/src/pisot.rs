//! Algebraic data of Pisot substitutions and the eigenvalue formulas of the
//! longitudinal and transversal Dirichlet forms: characteristic polynomial,
//! Galois conjugates, phase condition, tile frequencies, the reduced star
//! map at degree at most 3, the K coefficient, and the per-edge generator
//! eigenvalues with their closability trichotomy.

use std::f64::consts::PI;

use num::complex::Complex64;

use crate::error::{Error, Result};
use crate::quad::{Quad, QuadField};
use crate::selfsim::{
    microtile_vector, FundamentalEdges, Flavor, GeomScalar, LongitudinalChoice,
    SubstitutionGraph, TileGeometry1D,
};
use crate::substitution::Substitution;

/// One Galois conjugate of the expansion, as a point in the plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Conjugate {
    pub re: f64,
    pub im: f64,
}

impl Conjugate {
    pub fn modulus(&self) -> f64 {
        self.re.hypot(self.im)
    }

    /// Phase in [0, 2 pi).
    pub fn phase(&self) -> f64 {
        let a = self.im.atan2(self.re);
        if a < 0.0 {
            a + 2.0 * PI
        } else {
            a
        }
    }

    pub fn is_real(&self) -> bool {
        self.im.abs() < 1e-9 * self.modulus().max(1.0)
    }
}

/// Expansion data of a Pisot substitution: the leading root, the monic
/// integer characteristic polynomial, and the other conjugates in
/// decreasing order of modulus.
#[derive(Debug, Clone)]
pub struct PisotData {
    pub theta: f64,
    /// Monic coefficients, highest power first: x^J + c_1 x^(J-1) + ... + c_J.
    pub char_poly: Vec<i128>,
    /// Conjugates other than theta, decreasing modulus.
    pub conjugates: Vec<Conjugate>,
    /// How many conjugates share the largest conjugate modulus.
    pub subleading: usize,
    /// Determinant of the substitution matrix is +-1.
    pub unimodular: bool,
    pub degree: usize,
    quad: Option<(QuadField, Quad, Quad)>,
}

impl PisotData {
    /// Modulus of the largest conjugate, the transversal threshold.
    pub fn conjugate_modulus(&self) -> f64 {
        self.conjugates.first().map(|c| c.modulus()).unwrap_or(0.0)
    }

    /// Exact field data when the expansion is quadratic: the field, theta,
    /// and its conjugate.
    pub fn quadratic(&self) -> Option<(QuadField, Quad, Quad)> {
        self.quad
    }
}

/// Outcome of the Pisot analysis: failing the Pisot property is a result,
/// not an error, so reports can carry the reason.
#[derive(Debug, Clone)]
pub enum PisotVerdict {
    Pisot(PisotData),
    NotPisot {
        reason: String,
        theta: f64,
        conjugate_moduli: Vec<f64>,
    },
}

impl PisotVerdict {
    pub fn data(&self) -> Option<&PisotData> {
        match self {
            PisotVerdict::Pisot(d) => Some(d),
            PisotVerdict::NotPisot { .. } => None,
        }
    }

    pub fn is_pisot(&self) -> bool {
        matches!(self, PisotVerdict::Pisot(_))
    }
}

/// Characteristic polynomial of an integer matrix by the Faddeev-LeVerrier
/// recurrence, exactly: returns monic coefficients highest power first.
pub fn char_poly(m: &[Vec<i128>]) -> Vec<i128> {
    let n = m.len();
    let mut coeffs = vec![1i128];
    // aux starts as the zero matrix; each round aux <- m*aux + c_k*I and
    // c_{k+1} = -tr(m*aux)/(k+1), an exact integer division.
    let mut aux = vec![vec![0i128; n]; n];
    for k in 1..=n {
        let c_last = *coeffs.last().unwrap();
        let mut next = vec![vec![0i128; n]; n];
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0i128;
                for l in 0..n {
                    acc += m[i][l] * aux[l][j];
                }
                if i == j {
                    acc += c_last;
                }
                next[i][j] = acc;
            }
        }
        aux = next;
        let mut trace = 0i128;
        for i in 0..n {
            let mut acc = 0i128;
            for l in 0..n {
                acc += m[i][l] * aux[l][i];
            }
            trace += acc;
        }
        debug_assert_eq!(trace % k as i128, 0, "Faddeev-LeVerrier division is exact");
        coeffs.push(-trace / k as i128);
    }
    coeffs
}

fn eval_poly_int(coeffs: &[i128], x: i128) -> i128 {
    coeffs.iter().fold(0i128, |acc, &c| acc * x + c)
}

fn eval_poly(coeffs: &[i128], z: Complex64) -> Complex64 {
    coeffs
        .iter()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c as f64)
}

fn eval_poly_derivative(coeffs: &[i128], z: Complex64) -> Complex64 {
    let n = coeffs.len() - 1;
    coeffs[..n]
        .iter()
        .enumerate()
        .fold(Complex64::new(0.0, 0.0), |acc, (i, &c)| {
            acc * z + c as f64 * (n - i) as f64
        })
}

fn perfect_sqrt(n: i128) -> Option<i128> {
    if n < 0 {
        return None;
    }
    let mut r = (n as f64).sqrt() as i128;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    if r * r == n {
        Some(r)
    } else {
        None
    }
}

fn integer_divisors(n: i128) -> Vec<i128> {
    let n = n.abs();
    if n == 0 {
        return vec![0];
    }
    let mut out = Vec::new();
    let mut d = 1;
    while d * d <= n {
        if n % d == 0 {
            out.push(d);
            out.push(-d);
            if d != n / d {
                out.push(n / d);
                out.push(-(n / d));
            }
        }
        d += 1;
    }
    out
}

/// Reducibility witness of a monic integer polynomial, certified for
/// degrees up to 4: integer roots at any degree, plus the exact search for
/// a monic integer quadratic factor at degree 4. Degrees above 4 are only
/// screened for integer roots.
fn reducibility_witness(coeffs: &[i128]) -> Option<String> {
    let degree = coeffs.len() - 1;
    if degree <= 1 {
        return None;
    }
    for d in integer_divisors(coeffs[degree]) {
        if eval_poly_int(coeffs, d) == 0 {
            return Some(format!("integer root {d}"));
        }
    }
    if degree == 4 {
        let (c1, c2, c3, c4) = (coeffs[1], coeffs[2], coeffs[3], coeffs[4]);
        for c in integer_divisors(c4) {
            if c == 0 {
                continue;
            }
            if c4 % c != 0 {
                continue;
            }
            let cp = c4 / c;
            // (x^2+bx+c)(x^2+b'x+c') with b+b' = c1, bb'+c+c' = c2,
            // bc'+b'c = c3, cc' = c4.
            if c == cp {
                // The x^1 equation degenerates to c(b+b') = c3; b is then
                // a root of b^2 - c1 b + (c2 - 2c) = 0, solved exactly.
                if c * c1 != c3 {
                    continue;
                }
                let disc = c1 * c1 - 4 * (c2 - 2 * c);
                if let Some(s) = perfect_sqrt(disc) {
                    if (c1 + s) % 2 == 0 {
                        let b = (c1 + s) / 2;
                        return Some(format!("quadratic factor x^2 + {b} x + {c}"));
                    }
                }
            } else {
                let num = c3 - c1 * c;
                let den = cp - c;
                if num % den == 0 {
                    let b = num / den;
                    let bp = c1 - b;
                    if b * bp + c + cp == c2 && b * cp + bp * c == c3 {
                        return Some(format!("quadratic factor x^2 + {b} x + {c}"));
                    }
                }
            }
        }
    }
    None
}

/// All roots of a monic integer polynomial by simultaneous Weierstrass
/// iteration, polished with Newton steps on the exact coefficients.
pub fn poly_roots(coeffs: &[i128]) -> Result<Vec<Conjugate>> {
    let degree = coeffs.len() - 1;
    if degree == 0 {
        return Ok(Vec::new());
    }
    if degree == 1 {
        return Ok(vec![Conjugate { re: -(coeffs[1] as f64), im: 0.0 }]);
    }
    let mut z: Vec<Complex64> = (0..degree)
        .map(|j| Complex64::new(0.4, 0.9).powu(j as u32 + 1))
        .collect();
    for _ in 0..600 {
        let mut max_step = 0.0f64;
        for j in 0..degree {
            let mut denom = Complex64::new(1.0, 0.0);
            for k in 0..degree {
                if k != j {
                    denom *= z[j] - z[k];
                }
            }
            if denom.norm() == 0.0 {
                z[j] += Complex64::new(1e-6, 1e-6);
                continue;
            }
            let step = eval_poly(coeffs, z[j]) / denom;
            z[j] -= step;
            max_step = max_step.max(step.norm());
        }
        if max_step < 1e-14 {
            break;
        }
    }
    for zj in z.iter_mut() {
        for _ in 0..8 {
            let d = eval_poly_derivative(coeffs, *zj);
            if d.norm() < 1e-300 {
                break;
            }
            *zj -= eval_poly(coeffs, *zj) / d;
        }
        if zj.im.abs() < 1e-12 * zj.norm().max(1.0) {
            zj.im = 0.0;
        }
    }
    for zj in &z {
        let scale: f64 = coeffs.iter().map(|&c| (c as f64).abs()).sum::<f64>()
            * zj.norm().max(1.0).powi(degree as i32);
        if eval_poly(coeffs, *zj).norm() > 1e-10 * scale {
            return Err(Error::Numeric(format!(
                "root finding did not certify {zj}: residual above tolerance"
            )));
        }
    }
    z.sort_by(|a, b| b.norm().partial_cmp(&a.norm()).unwrap());
    Ok(z.into_iter().map(|w| Conjugate { re: w.re, im: w.im }).collect())
}

/// Expansion analysis of a primitive substitution: exact characteristic
/// polynomial, certified roots, and the Pisot verdict. Reducibility of the
/// characteristic polynomial and any conjugate on or outside the unit
/// circle are reported as typed non-Pisot outcomes.
pub fn pisot_data(sub: &Substitution) -> Result<PisotVerdict> {
    sub.perron()?;
    let m = sub.matrix();
    let coeffs = char_poly(&m);
    let degree = coeffs.len() - 1;
    let roots = poly_roots(&coeffs)?;
    let theta = roots[0];
    let conjugate_moduli: Vec<f64> = roots[1..].iter().map(|c| c.modulus()).collect();
    if let Some(witness) = reducibility_witness(&coeffs) {
        return Ok(PisotVerdict::NotPisot {
            reason: format!("characteristic polynomial is reducible ({witness})"),
            theta: theta.re,
            conjugate_moduli,
        });
    }
    if !theta.is_real() || theta.re <= 1.0 {
        return Ok(PisotVerdict::NotPisot {
            reason: "leading root is not a real number above 1".into(),
            theta: theta.re,
            conjugate_moduli,
        });
    }
    if roots[1..].iter().any(|c| c.modulus() >= 1.0 - 1e-9) {
        return Ok(PisotVerdict::NotPisot {
            reason: "a conjugate reaches the unit circle".into(),
            theta: theta.re,
            conjugate_moduli,
        });
    }
    let conjugates: Vec<Conjugate> = roots[1..].to_vec();
    let subleading = match conjugates.first() {
        Some(c) => {
            let top = c.modulus();
            conjugates
                .iter()
                .filter(|c| c.modulus() >= top - 1e-9 * top.max(1.0))
                .count()
        }
        None => 0,
    };
    let unimodular = coeffs[degree].abs() == 1;
    let quad = if degree == 2 {
        sub.perron_quad().map(|(field, th)| (field, th, th.conj()))
    } else {
        None
    };
    Ok(PisotVerdict::Pisot(PisotData {
        theta: theta.re,
        char_poly: coeffs,
        conjugates,
        subleading,
        unimodular,
        degree,
        quad,
    }))
}

/// A failing instance of the phase separation condition.
#[derive(Debug, Clone, Copy)]
pub struct PhaseWitness {
    /// Indices into the subleading conjugate list.
    pub j: usize,
    pub j_prime: usize,
    pub k: i64,
    pub k_prime: i64,
}

/// Result of scanning the phase condition on the subleading conjugates:
/// vacuous when fewer than two share the top conjugate modulus.
#[derive(Debug, Clone)]
pub struct PhaseReport {
    pub vacuous: bool,
    pub holds: bool,
    pub witness: Option<PhaseWitness>,
    /// Smallest absolute value the scanned combination reached.
    pub nearest_miss: f64,
    pub box_limit: i64,
}

/// Scan alpha_j - alpha_j' + 2 pi k + 2 pi ratio k' over |k'| <= box_limit
/// for all ordered pairs of phases; only one k can bring each combination
/// near zero, so k is solved by rounding rather than scanned.
pub fn phase_condition_scan(
    phases: &[f64],
    ratio: f64,
    box_limit: i64,
    tol: f64,
) -> PhaseReport {
    if phases.len() < 2 {
        return PhaseReport {
            vacuous: true,
            holds: true,
            witness: None,
            nearest_miss: f64::INFINITY,
            box_limit,
        };
    }
    let mut nearest = f64::INFINITY;
    let mut witness = None;
    for j in 0..phases.len() {
        for jp in 0..phases.len() {
            if j == jp {
                continue;
            }
            let base = (phases[j] - phases[jp]) / (2.0 * PI);
            for kp in -box_limit..=box_limit {
                let x = base + ratio * kp as f64;
                let k = -x.round();
                let miss = 2.0 * PI * (x + k).abs();
                if miss < nearest {
                    nearest = miss;
                    if miss < tol {
                        witness = Some(PhaseWitness {
                            j,
                            j_prime: jp,
                            k: k as i64,
                            k_prime: kp,
                        });
                    }
                }
            }
        }
    }
    PhaseReport {
        vacuous: false,
        holds: witness.is_none(),
        witness,
        nearest_miss: nearest,
        box_limit,
    }
}

/// The phase separation condition for the data's subleading conjugates,
/// with the ratio log(conjugate modulus)/log(theta), box 10^4, tolerance
/// 1e-9.
pub fn phase_condition(data: &PisotData) -> PhaseReport {
    let phases: Vec<f64> = data.conjugates[..data.subleading]
        .iter()
        .map(|c| c.phase())
        .collect();
    let ratio = data.conjugate_modulus().ln() / data.theta.ln();
    phase_condition_scan(&phases, ratio, 10_000, 1e-9)
}

/// Tile frequencies under both normalizations: `counting` sums to 1
/// (fraction of tiles of each type), `per_length` is tiles of each type
/// per unit length (counting divided by the average tile length).
#[derive(Debug, Clone)]
pub struct FrequencyVector {
    pub counting: Vec<f64>,
    pub per_length: Vec<f64>,
    /// Exact counting frequencies when the expansion is quadratic.
    pub exact_counting: Option<Vec<Quad>>,
}

pub fn frequencies(sub: &Substitution) -> Result<FrequencyVector> {
    let perron = sub.perron()?;
    let counting = perron.right.clone();
    let avg_len: f64 = counting
        .iter()
        .zip(&perron.left)
        .map(|(f, l)| f * l)
        .sum();
    let per_length = counting.iter().map(|f| f / avg_len).collect();
    let exact_counting = sub.perron_quad().map(|(field, theta)| {
        let m = sub.matrix();
        // Eigenvector (m01, theta - m00) of the 2x2 matrix, normalized to
        // sum 1 in the field.
        let v0 = Quad::from_ints(field, m[0][1], 0);
        let v1 = theta - Quad::from_ints(field, m[0][0], 0);
        let sum = v0 + v1;
        vec![v0 / sum, v1 / sum]
    });
    Ok(FrequencyVector { counting, per_length, exact_counting })
}

/// Multiplication by theta on the integer module Z[theta] in the power
/// basis 1, theta, ..., theta^(J-1), reduced by the characteristic
/// polynomial. Exact.
pub fn theta_multiply(data: &PisotData, r: &[i128]) -> Vec<i128> {
    let j = data.degree;
    let mut out = vec![0i128; j];
    for (i, &c) in r.iter().enumerate() {
        if i + 1 < j {
            out[i + 1] += c;
        } else {
            // theta^J = -(c_1 theta^(J-1) + ... + c_J).
            for (l, slot) in out.iter_mut().enumerate() {
                *slot -= c * data.char_poly[j - l];
            }
        }
    }
    out
}

/// Image of a module element under the reduced star map: evaluation at the
/// subleading conjugates. One component for a real subleading conjugate,
/// the coordinate pair for a complex one; degree 2 carries the exact field
/// value.
#[derive(Debug, Clone)]
pub struct StarImage {
    pub components: Vec<f64>,
    pub exact: Option<Quad>,
}

impl StarImage {
    /// Euclidean size of the star image, the scalar entering the
    /// transversal eigenvalue at d = 1.
    pub fn magnitude(&self) -> f64 {
        self.components.iter().map(|c| c * c).sum::<f64>().sqrt()
    }
}

/// The reduced star map on r = sum r_i theta^i: substitute the subleading
/// conjugates for theta. For degree 2 this is Galois conjugation; for
/// degree 3 it is the projection onto the subleading eigenspace of the
/// companion matrix, whose coordinate is the conjugate evaluation.
pub fn reduced_star(data: &PisotData, r: &[i128]) -> Result<StarImage> {
    if data.degree > 3 {
        return Err(Error::UnsupportedDegree { degree: data.degree });
    }
    if r.len() > data.degree.max(1) {
        return Err(Error::Invalid(format!(
            "module element has {} coordinates but the power basis has {}",
            r.len(),
            data.degree
        )));
    }
    if data.degree <= 1 {
        return Ok(StarImage { components: vec![0.0], exact: None });
    }
    let mut components = Vec::new();
    for c in data.conjugates[..data.subleading].iter() {
        if c.is_real() {
            let mut acc = 0.0;
            for &ri in r.iter().rev() {
                acc = acc * c.re + ri as f64;
            }
            components.push(acc);
        } else if c.im > 0.0 {
            let z = Complex64::new(c.re, c.im);
            let mut acc = Complex64::new(0.0, 0.0);
            for &ri in r.iter().rev() {
                acc = acc * z + ri as f64;
            }
            components.push(acc.re);
            components.push(acc.im);
        }
    }
    let exact = data.quad.map(|(field, theta, _)| {
        let mut acc = Quad::zero(field);
        for &ri in r.iter().rev() {
            acc = acc * theta + Quad::from_ints(field, ri, 0);
        }
        acc.conj()
    });
    Ok(StarImage { components, exact })
}

/// Closability trichotomy of a form at scaling parameter rho: only the
/// critical parameter carries a number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FormRegime {
    /// rho at the critical threshold: the eigenvalue.
    Critical(f64),
    /// rho above the threshold: the form vanishes.
    ZeroForm,
    /// rho below the threshold: the form is not closable.
    NotClosable,
}

impl FormRegime {
    pub fn value(&self) -> Option<f64> {
        match self {
            FormRegime::Critical(v) => Some(*v),
            _ => None,
        }
    }
}

fn regime(data: &PisotData, rho: f64, flavor: Flavor) -> Option<FormRegime> {
    let threshold = match flavor {
        Flavor::Longitudinal => 1.0 / data.theta,
        Flavor::Transverse => data.conjugate_modulus(),
    };
    if (rho - threshold).abs() <= 1e-12 * threshold {
        None
    } else if rho > threshold {
        Some(FormRegime::ZeroForm)
    } else {
        Some(FormRegime::NotClosable)
    }
}

/// Per-edge generator eigenvalue at the critical scaling: coupling times
/// (2 pi)^2 freq(t_h) (beta displacement)^2, where displacement is the
/// microtile vector (longitudinal) or the star image of the return vector
/// (transversal). Off-critical rho returns the regime instead of a number.
/// The coupling constant is caller-supplied; results are up to coupling
/// constants.
pub fn laplacian_eigenvalue(
    data: &PisotData,
    freq_t: f64,
    displacement: f64,
    beta: f64,
    coupling: f64,
    rho: f64,
    flavor: Flavor,
) -> FormRegime {
    if let Some(r) = regime(data, rho, flavor) {
        return r;
    }
    let x = beta * displacement;
    FormRegime::Critical(coupling * (2.0 * PI) * (2.0 * PI) * freq_t * x * x)
}

/// Sum of per-edge eigenvalues over a fundamental edge family; entries are
/// (tile frequency, displacement) pairs.
pub fn generator_eigenvalue(
    data: &PisotData,
    entries: &[(f64, f64)],
    beta: f64,
    coupling: f64,
    rho: f64,
    flavor: Flavor,
) -> FormRegime {
    if let Some(r) = regime(data, rho, flavor) {
        return r;
    }
    let total = entries
        .iter()
        .map(|&(f, d)| {
            laplacian_eigenvalue(data, f, d, beta, coupling, rho, flavor)
                .value()
                .expect("critical rho stays critical per entry")
        })
        .sum();
    FormRegime::Critical(total)
}

/// One term of the K coefficient.
#[derive(Debug, Clone)]
pub struct KTerm {
    pub tile: String,
    pub frequency: f64,
    pub a_h: f64,
}

/// The longitudinal coefficient K = sum freq(t) a_h^2 (scalar in one
/// dimension).
#[derive(Debug, Clone)]
pub struct KMatrix {
    pub value: f64,
    pub terms: Vec<KTerm>,
}

pub fn k_matrix(terms: Vec<KTerm>) -> KMatrix {
    let value = terms.iter().map(|t| t.frequency * t.a_h * t.a_h).sum();
    KMatrix { value, terms }
}

/// Assemble K from a longitudinal fundamental edge family: each pair
/// contributes the frequency of its shared containing tile times the
/// squared microtile vector.
pub fn k_matrix_for_graph(
    graph: &SubstitutionGraph,
    fund: &FundamentalEdges,
    geom: &TileGeometry1D<f64>,
    lgc: &LongitudinalChoice,
    freq: &FrequencyVector,
) -> Result<KMatrix> {
    if fund.flavor != Flavor::Longitudinal {
        return Err(Error::Invalid(
            "the K coefficient sums over longitudinal fundamental edges".into(),
        ));
    }
    let sub = graph.substitution();
    let mut terms = Vec::new();
    for &pair in &fund.pairs {
        let tile = graph.edge(pair.0).range;
        let a_h = microtile_vector(graph, geom, lgc, pair)?.approx();
        terms.push(KTerm {
            tile: sub.alphabet().symbol(tile).to_string(),
            frequency: freq.counting[tile as usize],
            a_h,
        });
    }
    Ok(k_matrix(terms))
}

/// A row of the per-edge eigenvalue table.
#[derive(Debug, Clone)]
pub struct EigenRow {
    pub label: String,
    pub tile: String,
    pub frequency: f64,
    pub displacement: f64,
    pub beta: f64,
    pub regime: FormRegime,
}

/// Render the eigenvalue table; the header states the coupling-constant
/// caveat because the global factors are not determined by this analysis.
pub fn render_eigen_rows(rows: &[EigenRow]) -> String {
    let mut out = String::from(
        "# eigenvalues are up to coupling constants (global longitudinal and \
         transversal factors depend only on the substitution matrix and are \
         supplied by the caller, default 1)\n\
         label\ttile\tfrequency\tdisplacement\tbeta\teigenvalue\n",
    );
    for r in rows {
        let val = match r.regime {
            FormRegime::Critical(v) => format!("{v:.12e}"),
            FormRegime::ZeroForm => "zero-form".into(),
            FormRegime::NotClosable => "not-closable".into(),
        };
        out.push_str(&format!(
            "{}\t{}\t{:.9}\t{:.9}\t{:.9}\t{}\n",
            r.label, r.tile, r.frequency, r.displacement, r.beta, val
        ));
    }
    out
}

/// Render the expansion block: roots, verdicts, and the phase condition.
pub fn render_pisot_block(verdict: &PisotVerdict, phase: Option<&PhaseReport>) -> String {
    let mut out = String::new();
    match verdict {
        PisotVerdict::Pisot(d) => {
            out.push_str(&format!("theta = {:.12}\n", d.theta));
            let poly: Vec<String> = d.char_poly.iter().map(|c| c.to_string()).collect();
            out.push_str(&format!("char poly (monic, high to low): {}\n", poly.join(" ")));
            for (i, c) in d.conjugates.iter().enumerate() {
                out.push_str(&format!(
                    "conjugate {}: {:.12} + {:.12} i  modulus {:.12} phase {:.12}\n",
                    i + 2,
                    c.re,
                    c.im,
                    c.modulus(),
                    c.phase()
                ));
            }
            out.push_str(&format!(
                "pisot: yes; unimodular: {}; subleading conjugates: {}\n",
                if d.unimodular { "yes" } else { "no (general lattice case out of scope)" },
                d.subleading
            ));
        }
        PisotVerdict::NotPisot { reason, theta, conjugate_moduli } => {
            out.push_str(&format!("theta = {theta:.12}\n"));
            out.push_str(&format!("pisot: no ({reason})\n"));
            let moduli: Vec<String> =
                conjugate_moduli.iter().map(|m| format!("{m:.6}")).collect();
            out.push_str(&format!("conjugate moduli: {}\n", moduli.join(" ")));
        }
    }
    if let Some(p) = phase {
        if p.vacuous {
            out.push_str("phase condition: vacuously true (single subleading conjugate)\n");
        } else if p.holds {
            out.push_str(&format!(
                "phase condition: holds on |k'| <= {} (nearest miss {:.3e})\n",
                p.box_limit, p.nearest_miss
            ));
        } else {
            let w = p.witness.unwrap();
            out.push_str(&format!(
                "phase condition: fails at k = {}, k' = {} (phases {} and {})\n",
                w.k, w.k_prime, w.j, w.j_prime
            ));
        }
    }
    out.push_str(
        "spectral assumption: pure point dynamical spectrum is assumed, not verified\n",
    );
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::selfsim::{
        build_substitution_graph, leftmost_longitudinal, lifted_microtile_vector,
        lifted_return_vector, maximal_fundamental, return_vector, self_similar_choice,
        tile_geometry_f64, tile_geometry_quad, GraphPath,
    };

    fn fib_data() -> PisotData {
        match pisot_data(&Substitution::fibonacci()).unwrap() {
            PisotVerdict::Pisot(d) => d,
            v => panic!("fibonacci must be pisot, got {v:?}"),
        }
    }

    #[test]
    fn fibonacci_theta_is_golden_and_conjugate_is_negative_inverse() {
        let d = fib_data();
        let tau = (1.0 + 5.0f64.sqrt()) / 2.0;
        assert!((d.theta - tau).abs() < 1e-12);
        assert_eq!(d.char_poly, vec![1, -1, -1]);
        assert_eq!(d.conjugates.len(), 1);
        assert!((d.conjugates[0].re - (1.0 - tau)).abs() < 1e-12);
        assert!(d.conjugates[0].is_real());
        assert!(d.unimodular);
        assert_eq!(d.subleading, 1);
        let (_, theta, conj) = d.quadratic().unwrap();
        let product = theta * conj;
        assert!(product.is_rational());
        assert_eq!(product.to_f64(), -1.0);
    }

    #[test]
    fn equal_images_are_flagged_reducible() {
        let sub = Substitution::parse("a -> ab\nb -> ab").unwrap();
        match pisot_data(&sub).unwrap() {
            PisotVerdict::NotPisot { reason, theta, .. } => {
                assert!(reason.contains("reducible"), "{reason}");
                assert!((theta - 2.0).abs() < 1e-9);
            }
            v => panic!("expected a reducible flag, got {v:?}"),
        }
    }

    #[test]
    fn tribonacci_is_pisot_with_a_complex_pair() {
        let sub = Substitution::parse("a -> ab\nb -> ac\nc -> a").unwrap();
        let d = match pisot_data(&sub).unwrap() {
            PisotVerdict::Pisot(d) => d,
            v => panic!("tribonacci must be pisot, got {v:?}"),
        };
        assert_eq!(d.char_poly, vec![1, -1, -1, -1]);
        assert_eq!(d.degree, 3);
        assert_eq!(d.subleading, 2);
        assert!(d.unimodular);
        assert!(!d.conjugates[0].is_real());
        let m0 = d.conjugates[0].modulus();
        let m1 = d.conjugates[1].modulus();
        assert!((m0 - m1).abs() < 1e-10);
        assert!(m0 < 1.0);
        // Unimodular cubic: the conjugate pair's squared modulus times
        // theta is the absolute constant term, 1.
        assert!((m0 * m0 * d.theta - 1.0).abs() < 1e-10);
    }

    #[test]
    fn a_real_conjugate_outside_the_disc_is_not_pisot() {
        let sub = Substitution::parse("a -> abbb\nb -> a").unwrap();
        match pisot_data(&sub).unwrap() {
            PisotVerdict::NotPisot { reason, .. } => {
                assert!(reason.contains("unit circle"), "{reason}");
            }
            v => panic!("x^2 - x - 3 has conjugate below -1, got {v:?}"),
        }
    }

    #[test]
    fn non_unimodular_pisot_is_flagged_but_accepted() {
        let sub = Substitution::parse("a -> aaba\nb -> ab").unwrap();
        let d = match pisot_data(&sub).unwrap() {
            PisotVerdict::Pisot(d) => d,
            v => panic!("2 + sqrt 2 is pisot, got {v:?}"),
        };
        assert!(!d.unimodular);
        assert!((d.theta - (2.0 + 2.0f64.sqrt())).abs() < 1e-10);
        let block = render_pisot_block(&PisotVerdict::Pisot(d), None);
        assert!(block.contains("unimodular: no"));
    }

    #[test]
    fn roots_are_certified_against_the_exact_polynomial() {
        for text in ["a -> ab\nb -> a", "a -> ab\nb -> ac\nc -> a", "a -> ab\nb -> ac\nc -> ad\nd -> a"] {
            let sub = Substitution::parse(text).unwrap();
            let coeffs = char_poly(&sub.matrix());
            let roots = poly_roots(&coeffs).unwrap();
            let degree = coeffs.len() - 1;
            assert_eq!(roots.len(), degree);
            let mut prod = Complex64::new(1.0, 0.0);
            for r in &roots {
                prod *= Complex64::new(r.re, r.im);
            }
            let expected = if degree % 2 == 0 { coeffs[degree] } else { -coeffs[degree] };
            assert!(
                (prod.re - expected as f64).abs() < 1e-9 && prod.im.abs() < 1e-9,
                "product of roots {prod} vs constant term {expected}"
            );
        }
    }

    #[test]
    fn phase_condition_is_vacuous_for_fibonacci() {
        let report = phase_condition(&fib_data());
        assert!(report.vacuous);
        assert!(report.holds);
        assert!(report.witness.is_none());
    }

    #[test]
    fn coinciding_phases_fail_with_the_zero_witness() {
        let report = phase_condition_scan(&[1.0, 1.0], 0.3711, 100, 1e-9);
        assert!(!report.holds);
        let w = report.witness.unwrap();
        assert_eq!((w.k, w.k_prime), (0, 0));
    }

    #[test]
    fn tribonacci_phases_keep_a_finite_distance() {
        let sub = Substitution::parse("a -> ab\nb -> ac\nc -> a").unwrap();
        let d = pisot_data(&sub).unwrap();
        let report = phase_condition(d.data().unwrap());
        assert!(!report.vacuous);
        assert!(report.holds, "nearest miss {}", report.nearest_miss);
        assert!(report.nearest_miss > 1e-3);
        assert!(report.nearest_miss.is_finite());
    }

    #[test]
    fn fibonacci_frequencies_are_the_golden_proportions() {
        let f = frequencies(&Substitution::fibonacci()).unwrap();
        let tau = (1.0 + 5.0f64.sqrt()) / 2.0;
        assert!((f.counting[0] - (tau - 1.0)).abs() < 1e-12);
        assert!((f.counting[1] - (2.0 - tau)).abs() < 1e-12);
        let exact = f.exact_counting.as_ref().unwrap();
        let (field, theta, _) = fib_data().quadratic().unwrap();
        assert_eq!(exact[0], theta - Quad::one(field));
        let total: f64 = f.counting.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        // Tiles per unit length times tile lengths also sums to one.
        let perron = Substitution::fibonacci().perron().unwrap();
        let volume: f64 = f.per_length.iter().zip(&perron.left).map(|(v, l)| v * l).sum();
        assert!((volume - 1.0).abs() < 1e-12);
    }

    #[test]
    fn expansion_frequencies_converge_at_the_conjugate_rate() {
        let sub = Substitution::fibonacci();
        let f = frequencies(&sub).unwrap();
        let d = fib_data();
        let rate = d.conjugate_modulus() / d.theta;
        let err = |k: usize| {
            let w = sub.expand(0, k);
            let count_a = w.0.iter().filter(|&&l| l == 0).count() as f64;
            (count_a / w.0.len() as f64 - f.counting[0]).abs()
        };
        let (e6, e12) = (err(6), err(12));
        let predicted = rate.powi(6);
        assert!(
            e12 / e6 < predicted * 10.0 && e12 / e6 > predicted * 0.1,
            "error ratio {} vs predicted {}",
            e12 / e6,
            predicted
        );
    }

    #[test]
    fn star_of_one_plus_theta_is_two_minus_tau() {
        let d = fib_data();
        let img = reduced_star(&d, &[1, 1]).unwrap();
        let tau = (1.0 + 5.0f64.sqrt()) / 2.0;
        assert_eq!(img.components.len(), 1);
        assert!((img.components[0] - (2.0 - tau)).abs() < 1e-12);
        let (field, theta, _) = d.quadratic().unwrap();
        let expected = Quad::from_ints(field, 2, 0) - theta;
        assert_eq!(img.exact.unwrap(), expected);
    }

    #[test]
    fn star_is_additive_and_conjugates_theta_multiplication() {
        let d = fib_data();
        let (_, _, conj) = d.quadratic().unwrap();
        for (x, y) in [([1, 2], [3, -1]), ([0, 0], [5, 7]), ([-2, 3], [4, 4])] {
            let sx = reduced_star(&d, &x).unwrap();
            let sy = reduced_star(&d, &y).unwrap();
            let sum: Vec<i128> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
            let s_sum = reduced_star(&d, &sum).unwrap();
            assert!((s_sum.components[0] - sx.components[0] - sy.components[0]).abs() < 1e-12);
            let tx = theta_multiply(&d, &x);
            let s_tx = reduced_star(&d, &tx).unwrap();
            assert_eq!(s_tx.exact.unwrap(), conj * sx.exact.unwrap());
        }
        let zero = reduced_star(&d, &[0, 0]).unwrap();
        assert_eq!(zero.components[0], 0.0);
    }

    #[test]
    fn star_refuses_degree_four() {
        let sub = Substitution::parse("a -> ab\nb -> ac\nc -> ad\nd -> a").unwrap();
        let d = match pisot_data(&sub).unwrap() {
            PisotVerdict::Pisot(d) => d,
            v => panic!("the quartic recurrence root is pisot, got {v:?}"),
        };
        match reduced_star(&d, &[1, 0, 0, 0]) {
            Err(Error::UnsupportedDegree { degree: 4 }) => {}
            other => panic!("expected an unsupported-degree refusal, got {other:?}"),
        }
    }

    #[test]
    fn tribonacci_star_returns_the_conjugate_coordinate_pair() {
        let sub = Substitution::parse("a -> ab\nb -> ac\nc -> a").unwrap();
        let d = pisot_data(&sub).unwrap();
        let d = d.data().unwrap();
        let img = reduced_star(d, &[0, 1, 0]).unwrap();
        assert_eq!(img.components.len(), 2);
        let c = &d.conjugates[0];
        let expected = if c.im > 0.0 { (c.re, c.im) } else { (c.re, -c.im) };
        assert!((img.components[0] - expected.0).abs() < 1e-12);
        assert!((img.components[1] - expected.1).abs() < 1e-12);
        assert!((img.magnitude() - c.modulus()).abs() < 1e-12);
    }

    #[test]
    fn eigenvalue_regimes_follow_the_trichotomy() {
        let d = fib_data();
        let rho_lg = 1.0 / d.theta;
        let crit = laplacian_eigenvalue(&d, 0.618, 0.5, 1.5, 1.0, rho_lg, Flavor::Longitudinal);
        let expected = (2.0 * PI) * (2.0 * PI) * 0.618 * (1.5 * 0.5) * (1.5 * 0.5);
        assert!((crit.value().unwrap() - expected).abs() < 1e-12);
        let zero = laplacian_eigenvalue(&d, 0.618, 0.5, 1.5, 1.0, rho_lg * 1.01, Flavor::Longitudinal);
        assert_eq!(zero, FormRegime::ZeroForm);
        let bad = laplacian_eigenvalue(&d, 0.618, 0.5, 1.5, 1.0, rho_lg * 0.99, Flavor::Longitudinal);
        assert_eq!(bad, FormRegime::NotClosable);
        let rho_tr = d.conjugate_modulus();
        assert!(laplacian_eigenvalue(&d, 0.4, 0.3, 1.0, 1.0, rho_tr, Flavor::Transverse)
            .value()
            .is_some());
        assert_eq!(
            laplacian_eigenvalue(&d, 0.4, 0.3, 1.0, 1.0, rho_tr * 2.0, Flavor::Transverse),
            FormRegime::ZeroForm
        );
    }

    #[test]
    fn eigenvalues_scale_quadratically_in_beta_and_vanish_for_constants() {
        let d = fib_data();
        let rho = 1.0 / d.theta;
        let one = laplacian_eigenvalue(&d, 0.7, 0.9, 1.0, 1.0, rho, Flavor::Longitudinal);
        let two = laplacian_eigenvalue(&d, 0.7, 0.9, 2.0, 1.0, rho, Flavor::Longitudinal);
        assert!((two.value().unwrap() - 4.0 * one.value().unwrap()).abs() < 1e-12);
        let zero = laplacian_eigenvalue(&d, 0.7, 0.9, 0.0, 1.0, rho, Flavor::Longitudinal);
        assert_eq!(zero.value().unwrap(), 0.0);
        let flipped = laplacian_eigenvalue(&d, 0.7, -0.9, 1.0, 1.0, rho, Flavor::Longitudinal);
        assert_eq!(flipped.value(), one.value());
    }

    #[test]
    fn the_k_coefficient_has_one_fibonacci_term() {
        let sub = Substitution::fibonacci();
        let graph = build_substitution_graph(&sub);
        let fund = maximal_fundamental(&graph, Flavor::Longitudinal);
        let geom = tile_geometry_f64(&graph).unwrap();
        let lgc = leftmost_longitudinal(&graph);
        let freq = frequencies(&sub).unwrap();
        let k = k_matrix_for_graph(&graph, &fund, &geom, &lgc, &freq).unwrap();
        assert_eq!(k.terms.len(), 1);
        assert_eq!(k.terms[0].tile, "a");
        let direct = microtile_vector(&graph, &geom, &lgc, fund.pairs[0]).unwrap();
        let expected = freq.counting[0] * direct * direct;
        assert!((k.value - expected).abs() < 1e-12);
        assert!(k.value > 0.0);
    }

    #[test]
    fn the_k_coefficient_is_quadratic_in_the_vectors_and_zero_when_empty() {
        let base = vec![
            KTerm { tile: "a".into(), frequency: 0.6, a_h: 0.5 },
            KTerm { tile: "b".into(), frequency: 0.4, a_h: -1.5 },
        ];
        let k1 = k_matrix(base.clone());
        let doubled: Vec<KTerm> = base
            .iter()
            .map(|t| KTerm { tile: t.tile.clone(), frequency: t.frequency, a_h: 2.0 * t.a_h })
            .collect();
        let k2 = k_matrix(doubled);
        assert!((k2.value - 4.0 * k1.value).abs() < 1e-12);
        assert_eq!(k_matrix(Vec::new()).value, 0.0);
    }

    #[test]
    fn lifted_return_vectors_scale_eigenvalues_by_theta_to_the_two_gamma() {
        let sub = Substitution::fibonacci();
        let graph = build_substitution_graph(&sub);
        let d = fib_data();
        let geom = tile_geometry_quad(&graph).unwrap();
        let choice = self_similar_choice(&graph, None).unwrap();
        let fund = maximal_fundamental(&graph, Flavor::Transverse);
        let pair = fund.pairs[0];
        let base = return_vector(&graph, &geom, &choice, pair, 32).unwrap();
        // A path of length 2 ending at the pair's source letter: the loop
        // on that letter composed with itself.
        let src = graph.edge(pair.0).source;
        let loop_edge = graph.find_edge(src, src, 0).expect("fibonacci has the a-loop");
        let gamma = GraphPath(vec![loop_edge, loop_edge]);
        let lifted = lifted_return_vector(&graph, &geom, &choice, pair, &gamma, 32).unwrap();
        let (_, theta, _) = d.quadratic().unwrap();
        assert_eq!(lifted.r_h, theta.powi(2) * base.r_h, "exact field scaling");
        assert_eq!(lifted.n_h, base.n_h + 2);
        let freq = frequencies(&sub).unwrap();
        let rho = d.conjugate_modulus();
        let ev = |r: Quad| {
            let star = r.conj().to_f64();
            laplacian_eigenvalue(&d, freq.counting[0], star, 1.0, 1.0, rho, Flavor::Transverse)
                .value()
                .unwrap()
        };
        let (e0, e2) = (ev(base.r_h), ev(lifted.r_h));
        let conj = d.conjugates[0].re;
        let expected_ratio = conj.powi(4);
        assert!(
            (e2 / e0 - expected_ratio).abs() < 1e-9 * expected_ratio.abs(),
            "star-side ratio {} vs conjugate^4 {}",
            e2 / e0,
            expected_ratio
        );
        // Before the star map the displacement itself scales by theta^2,
        // so the quadratic form scales by theta^4.
        let raw_ratio =
            (lifted.r_h.to_f64() / base.r_h.to_f64()).powi(2);
        assert!((raw_ratio - d.theta.powi(4)).abs() < 1e-9 * d.theta.powi(4));
    }

    #[test]
    fn lifted_microtile_vectors_scale_eigenvalues_by_theta_to_the_minus_two_gamma() {
        let sub = Substitution::fibonacci();
        let graph = build_substitution_graph(&sub);
        let d = fib_data();
        let geom = tile_geometry_quad(&graph).unwrap();
        let lgc = leftmost_longitudinal(&graph);
        let fund = maximal_fundamental(&graph, Flavor::Longitudinal);
        let pair = fund.pairs[0];
        let base = microtile_vector(&graph, &geom, &lgc, pair).unwrap();
        // Descend twice: the chain ends at an edge whose source is the
        // shared range, and each step contracts the vector by 1/theta.
        let shared = graph.edge(pair.0).range;
        let bottom = *graph.edges_from(shared).first().unwrap();
        let top = *graph.edges_from(graph.edge(bottom).range).first().unwrap();
        let descent = vec![top, bottom];
        let lifted = lifted_microtile_vector(&graph, &geom, &lgc, pair, &descent).unwrap();
        let (_, theta, _) = d.quadratic().unwrap();
        assert_eq!(lifted * theta.powi(2), base, "exact contraction by theta^2");
        let freq = frequencies(&sub).unwrap();
        let rho = 1.0 / d.theta;
        let ev = |a: Quad| {
            laplacian_eigenvalue(
                &d,
                freq.counting[0],
                a.to_f64(),
                1.0,
                1.0,
                rho,
                Flavor::Longitudinal,
            )
            .value()
            .unwrap()
        };
        let ratio = ev(lifted) / ev(base);
        let expected = d.theta.powi(-4);
        assert!((ratio - expected).abs() < 1e-12, "ratio {ratio} vs {expected}");
    }

    #[test]
    fn generator_sums_per_edge_values_and_respects_the_regime() {
        let d = fib_data();
        let rho = 1.0 / d.theta;
        let entries = [(0.618, 0.5), (0.382, -0.25)];
        let total = generator_eigenvalue(&d, &entries, 1.0, 1.0, rho, Flavor::Longitudinal);
        let by_hand: f64 = entries
            .iter()
            .map(|&(f, x)| (2.0 * PI) * (2.0 * PI) * f * x * x)
            .sum();
        assert!((total.value().unwrap() - by_hand).abs() < 1e-12);
        assert_eq!(
            generator_eigenvalue(&d, &entries, 1.0, 1.0, rho * 0.5, Flavor::Longitudinal),
            FormRegime::NotClosable
        );
    }

    #[test]
    fn the_eigen_table_states_the_coupling_caveat() {
        let d = fib_data();
        let rows = vec![EigenRow {
            label: "pair".into(),
            tile: "a".into(),
            frequency: 0.618,
            displacement: 0.4,
            beta: 1.0,
            regime: laplacian_eigenvalue(&d, 0.618, 0.4, 1.0, 1.0, 1.0 / d.theta, Flavor::Longitudinal),
        }];
        let table = render_eigen_rows(&rows);
        assert!(table.contains("up to coupling constants"));
        assert!(table.contains("label\ttile\tfrequency"));
        let block = render_pisot_block(&PisotVerdict::Pisot(d), Some(&phase_condition(&fib_data())));
        assert!(block.contains("pisot: yes"));
        assert!(block.contains("vacuously true"));
        assert!(block.contains("pure point dynamical spectrum is assumed"));
    }
}
