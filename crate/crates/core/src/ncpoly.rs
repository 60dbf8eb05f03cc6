//! Homogeneous noncommutative polynomials in `x_0, ..., x_n`, homogeneous
//! ideals, and the correspondence with standard subproduct systems.
//!
//! Text grammar (whitespace is ignored):
//!
//! ```text
//! poly     := sign? term (('+' | '-') term)*
//! term     := coeff ('*'? monomial)? | monomial
//! monomial := gen ('*'? gen)*
//! gen      := 'x' digits
//! coeff    := number 'i'? | 'i' | '(' sign? part (('+' | '-') part)? ')'
//! part     := number 'i'? | 'i'
//! number   := digits ('.' digits)? ('/' digits)?
//! ```

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::linalg::{
    c, eye, hstack, kron, mul, mul_ah, onb_of_complement, onb_of_span, op_norm, Mat, Scalar,
    RANK_TOL,
};
use crate::system::{BuildConfig, SubproductSystem};

#[derive(Clone, Debug, PartialEq)]
pub struct NcPoly {
    n: usize,
    degree: usize,
    terms: BTreeMap<Vec<usize>, Scalar>,
}

impl NcPoly {
    /// Build from `(word, coefficient)` pairs; zero coefficients are dropped
    /// and repeated words are summed.
    pub fn new(n: usize, terms: impl IntoIterator<Item = (Vec<usize>, Scalar)>) -> Result<Self> {
        let mut map: BTreeMap<Vec<usize>, Scalar> = BTreeMap::new();
        let mut degree = None;
        for (w, coef) in terms {
            if let Some(&bad) = w.iter().find(|&&i| i > n) {
                return Err(Error::GeneratorRange { index: bad, n });
            }
            match degree {
                None => degree = Some(w.len()),
                Some(d) if d != w.len() => return Err(Error::Inhomogeneous(d, w.len())),
                _ => {}
            }
            *map.entry(w).or_insert(c(0.0, 0.0)) += coef;
        }
        map.retain(|_, v| *v != c(0.0, 0.0));
        Ok(NcPoly {
            n,
            degree: degree.unwrap_or(0),
            terms: map,
        })
    }

    pub fn parse(text: &str, n: usize) -> Result<Self> {
        Parser::new(text).poly(n)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn terms(&self) -> &BTreeMap<Vec<usize>, Scalar> {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Coefficient vector in `(C^{n+1})^{⊗d}`, words indexed big-endian.
    pub fn to_vector(&self) -> Mat {
        let h = self.n + 1;
        let mut v = Mat::zeros(h.pow(self.degree as u32), 1);
        for (w, coef) in &self.terms {
            let idx = w.iter().fold(0, |acc, &i| acc * h + i);
            v[(idx, 0)] = *coef;
        }
        v
    }

    /// Inverse of [`NcPoly::to_vector`]; entries with modulus `<= tol` are dropped.
    pub fn from_vector(n: usize, degree: usize, v: &Mat, tol: f64) -> Result<Self> {
        let h = n + 1;
        if v.nrows() != h.pow(degree as u32) || v.ncols() != 1 {
            return Err(Error::Dimension(format!(
                "vector of shape {}x{} for degree {degree}",
                v.nrows(),
                v.ncols()
            )));
        }
        let terms = (0..v.nrows()).filter(|&i| v[(i, 0)].norm() > tol).map(|i| {
            let mut w = vec![0; degree];
            let mut r = i;
            for slot in w.iter_mut().rev() {
                *slot = r % h;
                r /= h;
            }
            (w, v[(i, 0)])
        });
        let mut p = NcPoly::new(n, terms)?;
        p.degree = degree;
        Ok(p)
    }
}

fn fmt_real(x: f64) -> String {
    format!("{x}")
}

fn fmt_coeff(z: Scalar) -> (bool, String) {
    // Returns (negative, magnitude text without trailing '*').
    if z.im == 0.0 {
        let neg = z.re < 0.0;
        let a = z.re.abs();
        return (neg, if a == 1.0 { String::new() } else { fmt_real(a) });
    }
    if z.re == 0.0 {
        let neg = z.im < 0.0;
        let a = z.im.abs();
        return (
            neg,
            if a == 1.0 {
                "i".into()
            } else {
                format!("{}i", fmt_real(a))
            },
        );
    }
    let sign = if z.im < 0.0 { '-' } else { '+' };
    (
        false,
        format!("({}{sign}{}i)", fmt_real(z.re), fmt_real(z.im.abs())),
    )
}

impl fmt::Display for NcPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (idx, (w, z)) in self.terms.iter().enumerate() {
            let (neg, mag) = fmt_coeff(*z);
            match (idx, neg) {
                (0, true) => write!(f, "-")?,
                (0, false) => {}
                (_, true) => write!(f, " - ")?,
                (_, false) => write!(f, " + ")?,
            }
            let mono = w
                .iter()
                .map(|i| format!("x{i}"))
                .collect::<Vec<_>>()
                .join("*");
            match (mag.is_empty(), mono.is_empty()) {
                (true, true) => write!(f, "1")?,
                (true, false) => write!(f, "{mono}")?,
                (false, true) => write!(f, "{mag}")?,
                (false, false) => write!(f, "{mag}*{mono}")?,
            }
        }
        Ok(())
    }
}

struct Parser {
    chars: Vec<(usize, char)>,
    at: usize,
    end: usize,
}

impl Parser {
    fn new(text: &str) -> Self {
        Parser {
            chars: text
                .char_indices()
                .filter(|(_, ch)| !ch.is_whitespace())
                .collect(),
            at: 0,
            end: text.len(),
        }
    }

    fn pos(&self) -> usize {
        self.chars.get(self.at).map_or(self.end, |p| p.0)
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.at).map(|p| p.1)
    }

    fn bump(&mut self) -> Option<char> {
        let ch = self.peek();
        self.at += 1;
        ch
    }

    fn eat(&mut self, ch: char) -> bool {
        if self.peek() == Some(ch) {
            self.at += 1;
            true
        } else {
            false
        }
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::Syntax {
            pos: self.pos(),
            msg: msg.into(),
        })
    }

    fn digits(&mut self) -> String {
        let mut s = String::new();
        while let Some(ch) = self.peek().filter(char::is_ascii_digit) {
            s.push(ch);
            self.at += 1;
        }
        s
    }

    fn number(&mut self) -> Result<f64> {
        let start = self.pos();
        let mut s = self.digits();
        if s.is_empty() {
            return self.err("expected a number");
        }
        if self.eat('.') {
            let frac = self.digits();
            if frac.is_empty() {
                return self.err("expected digits after '.'");
            }
            s = format!("{s}.{frac}");
        }
        let value: f64 = s.parse().map_err(|_| Error::Syntax {
            pos: start,
            msg: format!("bad number '{s}'"),
        })?;
        if self.eat('/') {
            let den = self.digits();
            if den.is_empty() {
                return self.err("expected a denominator after '/'");
            }
            let den: f64 = den.parse().expect("digits parse");
            if den == 0.0 {
                return self.err("zero denominator");
            }
            return Ok(value / den);
        }
        Ok(value)
    }

    /// `number 'i'? | 'i'`
    fn part(&mut self) -> Result<Scalar> {
        if self.eat('i') {
            return Ok(c(0.0, 1.0));
        }
        let v = self.number()?;
        Ok(if self.eat('i') { c(0.0, v) } else { c(v, 0.0) })
    }

    fn starts_coeff(&self) -> bool {
        matches!(self.peek(), Some(ch) if ch.is_ascii_digit() || ch == 'i' || ch == '(')
    }

    fn coeff(&mut self) -> Result<Scalar> {
        if self.eat('(') {
            let neg = if self.eat('-') {
                true
            } else {
                self.eat('+');
                false
            };
            let mut z = self.part()?;
            if neg {
                z = -z;
            }
            match self.peek() {
                Some('+') => {
                    self.bump();
                    z += self.part()?;
                }
                Some('-') => {
                    self.bump();
                    z -= self.part()?;
                }
                _ => {}
            }
            if !self.eat(')') {
                return self.err("expected ')'");
            }
            return Ok(z);
        }
        self.part()
    }

    fn generator(&mut self, n: usize) -> Result<usize> {
        let pos = self.pos();
        if !self.eat('x') {
            return self.err("expected a generator 'x<index>'");
        }
        let d = self.digits();
        if d.is_empty() {
            return self.err("expected a generator index after 'x'");
        }
        let index: usize = d.parse().map_err(|_| Error::Syntax {
            pos,
            msg: "generator index too large".into(),
        })?;
        if index > n {
            return Err(Error::GeneratorRange { index, n });
        }
        Ok(index)
    }

    fn monomial(&mut self, n: usize) -> Result<Vec<usize>> {
        let mut w = vec![self.generator(n)?];
        loop {
            let save = self.at;
            let star = self.eat('*');
            if self.peek() == Some('x') {
                w.push(self.generator(n)?);
            } else {
                if star {
                    self.at = save;
                    return self.err("expected a generator after '*'");
                }
                return Ok(w);
            }
        }
    }

    fn term(&mut self, n: usize) -> Result<(Vec<usize>, Scalar)> {
        if self.starts_coeff() {
            let z = self.coeff()?;
            let star = self.eat('*');
            if self.peek() == Some('x') {
                return Ok((self.monomial(n)?, z));
            }
            if star {
                return self.err("expected a monomial after '*'");
            }
            return Ok((Vec::new(), z));
        }
        if self.peek() == Some('x') {
            return Ok((self.monomial(n)?, c(1.0, 0.0)));
        }
        self.err("expected a term")
    }

    fn poly(&mut self, n: usize) -> Result<NcPoly> {
        if self.chars.is_empty() {
            return self.err("empty polynomial");
        }
        let mut sign = 1.0;
        if self.eat('-') {
            sign = -1.0;
        } else {
            self.eat('+');
        }
        let mut terms = Vec::new();
        let mut degree = None;
        loop {
            let (w, z) = self.term(n)?;
            match degree {
                None => degree = Some(w.len()),
                Some(d) if d != w.len() => return Err(Error::Inhomogeneous(d, w.len())),
                _ => {}
            }
            terms.push((w, z * sign));
            match self.bump() {
                None => break,
                Some('+') => sign = 1.0,
                Some('-') => sign = -1.0,
                Some(ch) => {
                    self.at -= 1;
                    return self.err(format!("unexpected character '{ch}'"));
                }
            }
        }
        let mut p = NcPoly::new(n, terms)?;
        p.degree = degree.unwrap_or(0);
        Ok(p)
    }
}

/// A homogeneous two-sided ideal given by generators.
#[derive(Clone, Debug, PartialEq)]
pub struct Ideal {
    pub n: usize,
    pub generators: Vec<NcPoly>,
}

impl Ideal {
    pub fn new(n: usize, generators: Vec<NcPoly>) -> Result<Self> {
        if let Some(g) = generators.iter().find(|g| g.n() != n) {
            return Err(Error::Dimension(format!(
                "generator over n = {} in an ideal over n = {n}",
                g.n()
            )));
        }
        Ok(Ideal { n, generators })
    }

    /// Parse one generator per line (or per `;`); blank lines and `#` comments
    /// are skipped.
    pub fn parse(text: &str, n: usize) -> Result<Self> {
        let gens = text
            .split(['\n', ';'])
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty())
            .map(|l| NcPoly::parse(l, n))
            .collect::<Result<Vec<_>>>()?;
        Ideal::new(n, gens)
    }
}

/// The ideal generated by `sum_i (-1)^i x_i x_{n-i}`.
pub fn determinant_ideal(n: usize) -> Ideal {
    let terms = (0..=n).map(|i| {
        let s = if i % 2 == 0 { 1.0 } else { -1.0 };
        (vec![i, n - i], c(s, 0.0))
    });
    let g = NcPoly::new(n, terms).expect("indices are in range");
    Ideal {
        n,
        generators: vec![g],
    }
}

/// Orthonormal basis of the degree-`m` component `J^{(m)}`, spanned by all
/// `x^a p x^b` with `p` a generator.
pub fn ideal_component(ideal: &Ideal, m: usize, budget: usize) -> Result<Mat> {
    let h = ideal.n + 1;
    let ambient = h.pow(m as u32);
    let mut spans = Vec::new();
    let mut entries = 0usize;
    for g in ideal.generators.iter().filter(|g| !g.is_zero()) {
        let d = g.degree();
        if d > m {
            continue;
        }
        let v = g.to_vector();
        for i in 0..=m - d {
            let left = eye(h.pow(i as u32));
            let right = eye(h.pow((m - d - i) as u32));
            entries = entries.saturating_add(ambient * h.pow((m - d) as u32));
            if entries > budget {
                return Err(Error::SizeLimit {
                    what: format!("spanning set of J^({m})"),
                    needed: entries,
                    budget,
                });
            }
            spans.push(kron(&kron(&left, &v), &right));
        }
    }
    if spans.is_empty() {
        return Ok(Mat::zeros(ambient, 0));
    }
    Ok(onb_of_span(&hstack(&spans), RANK_TOL))
}

/// `E_m = (J^{(m)})^⊥` for `m <= max_degree`.
pub fn system_from_ideal(
    ideal: &Ideal,
    max_degree: usize,
    cfg: &BuildConfig,
) -> Result<SubproductSystem> {
    let h = ideal.n + 1;
    let mut bases = Vec::new();
    for m in 0..=max_degree {
        let ambient = h.pow(m as u32);
        if ambient.saturating_mul(ambient) > cfg.size_budget {
            return Err(Error::SizeLimit {
                what: format!("complement in degree {m}"),
                needed: ambient.saturating_mul(ambient),
                budget: cfg.size_budget,
            });
        }
        let j = ideal_component(ideal, m, cfg.size_budget)?;
        bases.push(onb_of_complement(&j, ambient, RANK_TOL)?);
    }
    SubproductSystem::from_bases(ideal.n, bases, cfg.tol)
}

/// Minimal generators of the ideal `⊕_m E_m^⊥` up to the system's top degree:
/// in each degree, the part of `E_m^⊥` not generated from lower degrees.
pub fn ideal_from_system(sys: &SubproductSystem, tol: f64) -> Result<Ideal> {
    let n = sys.n();
    let h = n + 1;
    let mut gens = Vec::new();
    let mut prev_j = Mat::zeros(1, 0);
    for m in 1..=sys.max_degree() {
        let ambient = h.pow(m as u32);
        let j = onb_of_complement(sys.basis(m)?, ambient, RANK_TOL)?;
        let generated = if prev_j.ncols() == 0 {
            Mat::zeros(ambient, 0)
        } else {
            onb_of_span(
                &hstack(&[kron(&prev_j, &eye(h)), kron(&eye(h), &prev_j)]),
                RANK_TOL,
            )
        };
        let fresh = if generated.ncols() == 0 {
            j.clone()
        } else {
            let resid = &j - mul(&generated, &mul_ah(&generated, &j));
            // Singular values of the residual are either ~1 or roundoff.
            if op_norm(&resid) <= tol {
                Mat::zeros(ambient, 0)
            } else {
                onb_of_span(&resid, tol.sqrt())
            }
        };
        for col in 0..fresh.ncols() {
            let v = fresh.columns(col, 1).into_owned();
            gens.push(NcPoly::from_vector(n, m, &v, 1e-14)?);
        }
        prev_j = j;
    }
    Ideal::new(n, gens)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{projector_distance, re};
    use crate::su2::determinant_vector;
    use crate::system::build_su2;

    #[test]
    fn parse_and_format() {
        let p = NcPoly::parse("x0*x1 - x1*x0", 1).unwrap();
        assert_eq!(p.degree(), 2);
        assert_eq!(p.to_string(), "x0*x1 - x1*x0");
        let q = NcPoly::parse(" 1/2 x0 x1 + (1-2i)*x1*x1 - i x0*x0 ", 1).unwrap();
        assert_eq!(q.terms()[&vec![0, 1]], c(0.5, 0.0));
        assert_eq!(q.terms()[&vec![1, 1]], c(1.0, -2.0));
        assert_eq!(q.terms()[&vec![0, 0]], c(0.0, -1.0));
        assert_eq!(NcPoly::parse(&q.to_string(), 1).unwrap(), q);
    }

    #[test]
    fn errors_are_specific() {
        assert!(matches!(
            NcPoly::parse("x0*x1 + x2", 2),
            Err(Error::Inhomogeneous(2, 1))
        ));
        assert!(matches!(
            NcPoly::parse("x0*x3", 2),
            Err(Error::GeneratorRange { index: 3, n: 2 })
        ));
        match NcPoly::parse("x0*x1 + * x0", 2) {
            Err(Error::Syntax { pos, .. }) => assert_eq!(pos, 8),
            other => panic!("{other:?}"),
        }
        assert!(matches!(NcPoly::parse("", 1), Err(Error::Syntax { .. })));
        assert!(matches!(
            NcPoly::parse("x0 x1 )", 1),
            Err(Error::Syntax { .. })
        ));
    }

    #[test]
    fn cancellation_drops_terms() {
        let p = NcPoly::parse("x0*x1 - x0*x1", 1).unwrap();
        assert!(p.is_zero());
        assert_eq!(p.degree(), 2);
        assert_eq!(p.to_string(), "0");
    }

    #[test]
    fn determinant_generator_matches_vector() {
        for n in 1..=4 {
            let g = &determinant_ideal(n).generators[0];
            let v = g.to_vector() * re(1.0 / ((n + 1) as f64).sqrt());
            assert!(op_norm(&(v - determinant_vector(n))) < 1e-15);
        }
        let g = &determinant_ideal(2).generators[0];
        assert_eq!(g.to_string(), "x0*x2 - x1*x1 + x2*x0");
    }

    #[test]
    fn determinant_ideal_gives_su2_system() {
        let cfg = BuildConfig::default();
        for (n, mm) in [(1, 5), (2, 4)] {
            let a = system_from_ideal(&determinant_ideal(n), mm, &cfg).unwrap();
            let b = build_su2(n, mm, &cfg).unwrap();
            for m in 0..=mm {
                let d = projector_distance(a.basis(m).unwrap(), b.basis(m).unwrap());
                assert!(d < 1e-9, "n={n} m={m} {d:e}");
            }
        }
    }

    #[test]
    fn recovered_ideal_has_one_quadratic_generator() {
        let sys = build_su2(2, 4, &BuildConfig::default()).unwrap();
        let j = ideal_from_system(&sys, 1e-9).unwrap();
        let degs: Vec<usize> = j.generators.iter().map(|g| g.degree()).collect();
        assert_eq!(
            degs,
            [2],
            "{:?}",
            j.generators
                .iter()
                .map(|g| g.to_string())
                .collect::<Vec<_>>()
        );
        assert_eq!(j.generators[0].degree(), 2);
    }

    #[test]
    fn ideal_text_with_comments() {
        let j = Ideal::parse("# commutator\nx0*x1 - x1*x0\n\n x0*x0 ; x1*x1", 1).unwrap();
        assert_eq!(j.generators.len(), 3);
    }
}
