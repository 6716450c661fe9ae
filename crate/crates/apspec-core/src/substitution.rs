//! Substitution rules on finite alphabets: parsing, expansion, occurrence
//! matrices, primitivity and Perron data.
//!
//! File format, one rule per line:
//!
//! ```text
//! # comment lines start with '#'
//! name: fibonacci        (optional header)
//! a -> ab
//! b -> a
//! ```

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::quad::{Quad, QuadField};
use crate::words::{Alphabet, Letter, Word};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Substitution {
    pub name: Option<String>,
    alphabet: Alphabet,
    images: Vec<Word>,
}

/// Numeric Perron-Frobenius data of the occurrence matrix.
#[derive(Debug, Clone)]
pub struct PerronData {
    /// Dominant eigenvalue.
    pub lambda: f64,
    /// Right eigenvector, normalized to sum 1 (letter frequencies).
    pub right: Vec<f64>,
    /// Left eigenvector, normalized so its minimum entry is 1 (tile lengths).
    pub left: Vec<f64>,
}

impl Substitution {
    pub fn new(alphabet: Alphabet, images: Vec<Word>, name: Option<String>) -> Result<Self> {
        if images.len() != alphabet.size() {
            return Err(Error::Invalid(format!(
                "expected {} images, got {}",
                alphabet.size(),
                images.len()
            )));
        }
        for (l, im) in images.iter().enumerate() {
            if im.is_empty() {
                return Err(Error::Invalid(format!(
                    "image of '{}' is empty",
                    alphabet.symbol(l as Letter)
                )));
            }
        }
        Ok(Substitution { name, alphabet, images })
    }

    /// Convenience constructor from symbol strings, e.g.
    /// `Substitution::from_rules(&[('a', "ab"), ('b', "a")])`.
    pub fn from_rules(rules: &[(char, &str)]) -> Result<Self> {
        let alphabet = Alphabet::new(rules.iter().map(|&(c, _)| c).collect())?;
        let mut images = vec![Word::empty(); alphabet.size()];
        for &(c, im) in rules {
            let l = alphabet.letter_of(c).unwrap();
            images[l as usize] = alphabet.parse_word(im)?;
        }
        Substitution::new(alphabet, images, None)
    }

    /// The Fibonacci substitution a -> ab, b -> a.
    pub fn fibonacci() -> Self {
        Substitution::from_rules(&[('a', "ab"), ('b', "a")]).unwrap()
    }

    /// The squared-Fibonacci substitution a -> baa, b -> ba.
    pub fn fibonacci_squared() -> Self {
        Substitution::from_rules(&[('a', "baa"), ('b', "ba")]).unwrap()
    }

    /// Parse the line-oriented rule format described in the module docs.
    pub fn parse(text: &str) -> Result<Self> {
        let mut name = None;
        let mut rules: Vec<(usize, char, String)> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let lno = lineno + 1;
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(rest) = line.strip_prefix("name:") {
                if name.is_some() {
                    return Err(Error::Parse {
                        line: lno,
                        col: 1,
                        msg: "duplicate name header".into(),
                    });
                }
                name = Some(rest.trim().to_string());
                continue;
            }
            let Some(arrow) = line.find("->") else {
                return Err(Error::Parse {
                    line: lno,
                    col: 1,
                    msg: "expected 'letter -> image'".into(),
                });
            };
            let lhs = line[..arrow].trim();
            let rhs = line[arrow + 2..].trim();
            let mut lhs_chars = lhs.chars();
            let (Some(letter), None) = (lhs_chars.next(), lhs_chars.next()) else {
                return Err(Error::Parse {
                    line: lno,
                    col: 1,
                    msg: format!("left-hand side '{lhs}' must be a single letter"),
                });
            };
            if rhs.is_empty() {
                return Err(Error::Parse {
                    line: lno,
                    col: arrow + 3,
                    msg: "empty image".into(),
                });
            }
            if rules.iter().any(|&(_, c, _)| c == letter) {
                return Err(Error::Parse {
                    line: lno,
                    col: 1,
                    msg: format!("duplicate rule for '{letter}'"),
                });
            }
            rules.push((lno, letter, rhs.to_string()));
        }
        if rules.is_empty() {
            return Err(Error::Parse {
                line: 1,
                col: 1,
                msg: "no rules found".into(),
            });
        }
        let alphabet = Alphabet::new(rules.iter().map(|&(_, c, _)| c).collect())?;
        let mut images = vec![Word::empty(); alphabet.size()];
        for (lno, c, im) in &rules {
            let l = alphabet.letter_of(*c).unwrap();
            let mut letters = Vec::with_capacity(im.len());
            for (i, ch) in im.chars().enumerate() {
                match alphabet.letter_of(ch) {
                    Some(l) => letters.push(l),
                    None => {
                        return Err(Error::Parse {
                            line: *lno,
                            col: i + 1,
                            msg: format!("image symbol '{ch}' has no rule of its own"),
                        })
                    }
                }
            }
            images[l as usize] = Word(letters);
        }
        Substitution::new(alphabet, images, name)
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn image(&self, l: Letter) -> &Word {
        &self.images[l as usize]
    }

    pub fn apply(&self, w: &Word) -> Word {
        let mut out = Vec::new();
        for &l in &w.0 {
            out.extend_from_slice(&self.images[l as usize].0);
        }
        Word(out)
    }

    /// sigma^k(seed).
    pub fn expand(&self, seed: Letter, k: usize) -> Word {
        let mut w = Word::letter(seed);
        for _ in 0..k {
            w = self.apply(&w);
        }
        w
    }

    /// Like [`expand`](Self::expand) but truncates intermediate words to
    /// `cap` letters so prefixes of high iterates stay affordable. The
    /// result is a genuine prefix of sigma^k(seed) as long as images are
    /// applied left to right, which `apply` does.
    pub fn expand_prefix(&self, seed: Letter, k: usize, cap: usize) -> Word {
        let mut w = Word::letter(seed);
        for _ in 0..k {
            w = self.apply(&w);
            if w.len() > cap {
                w.0.truncate(cap);
            }
        }
        w
    }

    /// Occurrence matrix A with A[v][w] = number of occurrences of letter v
    /// in the image of w; column sums are the image lengths, and the number
    /// of nested-occurrence chains of length n from v to w is (A^n)[v][w].
    pub fn matrix(&self) -> Vec<Vec<i128>> {
        let k = self.alphabet.size();
        let mut a = vec![vec![0i128; k]; k];
        for w in 0..k {
            for &v in &self.images[w].0 {
                a[v as usize][w] += 1;
            }
        }
        a
    }

    pub fn matrix_f64(&self) -> DMatrix<f64> {
        let a = self.matrix();
        let k = a.len();
        DMatrix::from_fn(k, k, |i, j| a[i][j] as f64)
    }

    /// Wielandt primitivity test on the boolean occurrence pattern.
    pub fn is_primitive(&self) -> bool {
        let a = self.matrix();
        let k = a.len();
        let mut b: Vec<Vec<bool>> = (0..k)
            .map(|i| (0..k).map(|j| a[i][j] > 0).collect())
            .collect();
        let bound = if k == 1 { 1 } else { (k - 1) * (k - 1) + 1 };
        let base = b.clone();
        for _ in 0..bound {
            if b.iter().all(|row| row.iter().all(|&x| x)) {
                return true;
            }
            // b <- b * base over the boolean semiring
            let mut next = vec![vec![false; k]; k];
            for i in 0..k {
                for l in 0..k {
                    if b[i][l] {
                        for j in 0..k {
                            if base[l][j] {
                                next[i][j] = true;
                            }
                        }
                    }
                }
            }
            b = next;
        }
        b.iter().all(|row| row.iter().all(|&x| x))
    }

    /// Diagnostic for non-primitive substitutions: a letter that the orbit
    /// of `seed` never reaches, if any.
    pub fn unreachable_letter(&self, seed: Letter) -> Option<Letter> {
        let k = self.alphabet.size();
        let mut reached = vec![false; k];
        let mut stack = vec![seed];
        reached[seed as usize] = true;
        while let Some(l) = stack.pop() {
            for &m in &self.images[l as usize].0 {
                if !reached[m as usize] {
                    reached[m as usize] = true;
                    stack.push(m);
                }
            }
        }
        (0..k as u8).find(|&l| !reached[l as usize])
    }

    pub fn require_primitive(&self) -> Result<()> {
        if self.is_primitive() {
            return Ok(());
        }
        let detail = match self.unreachable_letter(0) {
            Some(l) => format!(
                "letter '{}' unreachable from '{}'",
                self.alphabet.symbol(l),
                self.alphabet.symbol(0)
            ),
            None => "occurrence pattern never becomes strictly positive".into(),
        };
        Err(Error::NotPrimitive { detail })
    }

    /// Numeric Perron data by power iteration (the matrix is primitive, so
    /// the iteration converges geometrically at the spectral-gap rate).
    pub fn perron(&self) -> Result<PerronData> {
        self.require_primitive()?;
        let a = self.matrix_f64();
        let lambda = power_iterate(&a)?.0;
        let right = power_iterate(&a)?.1;
        let left = power_iterate(&a.transpose())?.1;
        let rsum: f64 = right.iter().sum();
        let right: Vec<f64> = right.iter().map(|x| x / rsum).collect();
        let lmin = left.iter().cloned().fold(f64::INFINITY, f64::min);
        let left: Vec<f64> = left.iter().map(|x| x / lmin).collect();
        Ok(PerronData { lambda, right, left })
    }

    /// Exact Perron eigenvalue for two-letter substitutions, as an element
    /// of the quadratic field defined by the characteristic polynomial
    /// x^2 = t x + u (t = trace, u = -det).
    pub fn perron_quad(&self) -> Option<(QuadField, Quad)> {
        let a = self.matrix();
        if a.len() != 2 {
            return None;
        }
        let t = a[0][0] + a[1][1];
        let d = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        let field = QuadField::new(t as i64, (-d) as i64);
        if field.discriminant() <= 0 {
            return None;
        }
        Some((field, Quad::theta(field)))
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        if let Some(n) = &self.name {
            out.push_str(&format!("name: {n}\n"));
        }
        for l in self.alphabet.letters() {
            out.push_str(&format!(
                "{} -> {}\n",
                self.alphabet.symbol(l),
                self.alphabet.render(self.image(l))
            ));
        }
        out
    }

    /// One-line rendering "a -> ab, b -> a", for report headers.
    pub fn render_inline(&self) -> String {
        self.alphabet
            .letters()
            .map(|l| {
                format!("{} -> {}", self.alphabet.symbol(l), self.alphabet.render(self.image(l)))
            })
            .collect::<Vec<_>>()
            .join(", ")
    }
}

fn power_iterate(a: &DMatrix<f64>) -> Result<(f64, Vec<f64>)> {
    let k = a.nrows();
    let mut v = nalgebra::DVector::from_element(k, 1.0 / k as f64);
    let mut lambda = 0.0;
    for _ in 0..10_000 {
        let w = a * &v;
        let norm = w.amax();
        if norm == 0.0 {
            return Err(Error::Numeric("matrix annihilated the positive cone".into()));
        }
        let w = w / norm;
        let delta = (&w - &v).amax();
        v = w;
        lambda = norm;
        if delta < 1e-15 {
            return Ok((lambda, v.iter().cloned().collect()));
        }
    }
    // Converged slowly; still report the current iterate.
    Ok((lambda, v.iter().cloned().collect()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_fibonacci_file() {
        let s = Substitution::parse("# golden\nname: fib\na -> ab\nb -> a\n").unwrap();
        assert_eq!(s.name.as_deref(), Some("fib"));
        assert_eq!(s.alphabet().render(&s.expand(0, 3)), "abaab");
        assert_eq!(s.render(), "name: fib\na -> ab\nb -> a\n");
    }

    #[test]
    fn parse_errors_carry_positions() {
        match Substitution::parse("a -> ab\nb => a\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
        match Substitution::parse("a -> ax\n") {
            Err(Error::Parse { line: 1, col, .. }) => assert_eq!(col, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn occurrence_matrices() {
        assert_eq!(Substitution::fibonacci().matrix(), vec![vec![1, 1], vec![1, 0]]);
        assert_eq!(
            Substitution::fibonacci_squared().matrix(),
            vec![vec![2, 1], vec![1, 1]]
        );
    }

    #[test]
    fn column_sums_are_image_lengths() {
        for s in [Substitution::fibonacci(), Substitution::fibonacci_squared()] {
            let a = s.matrix();
            for w in s.alphabet().letters() {
                let col: i128 = (0..a.len()).map(|v| a[v][w as usize]).sum();
                assert_eq!(col, s.image(w).len() as i128);
            }
        }
    }

    #[test]
    fn primitivity() {
        assert!(Substitution::fibonacci().is_primitive());
        assert!(Substitution::fibonacci_squared().is_primitive());
        // identity on two letters is not primitive
        let id = Substitution::from_rules(&[('a', "a"), ('b', "b")]).unwrap();
        assert!(!id.is_primitive());
        // pure swap is irreducible but has period 2, hence not primitive
        let swap = Substitution::from_rules(&[('a', "b"), ('b', "a")]).unwrap();
        assert!(!swap.is_primitive());
        // single loop is (trivially) primitive
        let one = Substitution::from_rules(&[('a', "a")]).unwrap();
        assert!(one.is_primitive());
    }

    #[test]
    fn unreachable_letter_diagnostic() {
        let s = Substitution::from_rules(&[('a', "aa"), ('b', "ab")]).unwrap();
        assert!(!s.is_primitive());
        assert_eq!(s.unreachable_letter(0), Some(1));
        let msg = s.require_primitive().unwrap_err().to_string();
        assert!(msg.contains("unreachable"), "{msg}");
    }

    #[test]
    fn perron_fibonacci() {
        let p = Substitution::fibonacci().perron().unwrap();
        let tau = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((p.lambda - tau).abs() < 1e-12);
        // frequencies (tau - 1, 2 - tau)
        assert!((p.right[0] - (tau - 1.0)).abs() < 1e-12);
        assert!((p.right[1] - (2.0 - tau)).abs() < 1e-12);
        // tile lengths (tau, 1) after min-normalization
        assert!((p.left[0] - tau).abs() < 1e-12);
        assert!((p.left[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn perron_quad_f2() {
        let (field, th) = Substitution::fibonacci_squared().perron_quad().unwrap();
        assert_eq!(field, QuadField::new(3, -1));
        // theta = tau^2
        let tau = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((th.to_f64() - tau * tau).abs() < 1e-12);
    }

    #[test]
    fn expand_prefix_truncates_consistently() {
        let s = Substitution::fibonacci();
        let full = s.expand(0, 12);
        let pref = s.expand_prefix(0, 12, 100);
        assert_eq!(pref.0[..], full.0[..100]);
    }
}
