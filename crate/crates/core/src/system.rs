//! Standard subproduct systems: fibers `E_m ⊆ H^{⊗m}` stored as isometries
//! `B_m`, and the structure coisometries between them.

use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    apply_tensor_power, c, eye, hstack, isometry_defect, kron, mul, mul_ah, onb_of_complement,
    op_norm, Mat, DEFAULT_SIZE_BUDGET, DEFAULT_TOL, RANK_TOL,
};
use crate::report::IdentityReport;
use crate::sequences::DimTable;
use crate::su2::{determinant_vector, irrep_matrix};

#[derive(Clone, Copy, Debug)]
pub struct BuildConfig {
    /// Tolerance for the consistency checks run during construction.
    pub tol: f64,
    /// Largest number of matrix entries any single stored basis may have.
    pub size_budget: usize,
}

impl Default for BuildConfig {
    fn default() -> Self {
        BuildConfig {
            tol: DEFAULT_TOL,
            size_budget: DEFAULT_SIZE_BUDGET,
        }
    }
}

#[derive(Clone)]
pub struct SubproductSystem {
    n: usize,
    bases: Vec<Mat>,
    coisometries: Vec<Vec<OnceLock<Mat>>>,
}

impl fmt::Debug for SubproductSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SubproductSystem")
            .field("n", &self.n)
            .field("dims", &self.dims())
            .finish()
    }
}

fn pow(h: usize, m: usize) -> Result<usize> {
    h.checked_pow(m as u32).ok_or_else(|| Error::SizeLimit {
        what: format!("ambient space of degree {m}"),
        needed: usize::MAX,
        budget: DEFAULT_SIZE_BUDGET,
    })
}

impl SubproductSystem {
    /// Wrap precomputed fiber bases, validating shapes and orthonormality.
    pub fn from_bases(n: usize, bases: Vec<Mat>, tol: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Unsupported("n must be at least 1".into()));
        }
        if bases.is_empty() {
            return Err(Error::Format(
                "a system needs at least the degree-0 fiber".into(),
            ));
        }
        for (m, b) in bases.iter().enumerate() {
            let rows = pow(n + 1, m)?;
            if b.nrows() != rows {
                return Err(Error::Format(format!(
                    "basis of degree {m} has {} rows, expected {rows}",
                    b.nrows()
                )));
            }
            let def = isometry_defect(b);
            if def > tol {
                return Err(Error::Format(format!(
                    "basis of degree {m} is not orthonormal (defect {def:e})"
                )));
            }
        }
        let top = bases.len() - 1;
        let coisometries = (0..=top)
            .map(|k| (0..=top - k).map(|_| OnceLock::new()).collect())
            .collect();
        Ok(SubproductSystem {
            n,
            bases,
            coisometries,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Dimension of the single-particle space `H = E_1`'s ambient, `n + 1`.
    pub fn h_dim(&self) -> usize {
        self.n + 1
    }

    pub fn max_degree(&self) -> usize {
        self.bases.len() - 1
    }

    pub fn dim(&self, m: usize) -> usize {
        self.bases[m].ncols()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.bases.iter().map(|b| b.ncols()).collect()
    }

    fn check_degree(&self, m: usize) -> Result<()> {
        if m > self.max_degree() {
            return Err(Error::DegreeRange {
                requested: m,
                max: self.max_degree(),
            });
        }
        Ok(())
    }

    pub fn basis(&self, m: usize) -> Result<&Mat> {
        self.check_degree(m)?;
        Ok(&self.bases[m])
    }

    pub fn bases(&self) -> &[Mat] {
        &self.bases
    }

    /// `iota*_{k,m} = B_{k+m}^H (B_k ⊗ B_m) : E_k ⊗ E_m -> E_{k+m}`.
    pub fn coisometry(&self, k: usize, m: usize) -> Result<&Mat> {
        self.check_degree(k + m)?;
        Ok(self.coisometries[k][m]
            .get_or_init(|| mul_ah(&self.bases[k + m], &kron(&self.bases[k], &self.bases[m]))))
    }

    /// `iota_{k,m} : E_{k+m} -> E_k ⊗ E_m`.
    pub fn inclusion(&self, k: usize, m: usize) -> Result<Mat> {
        Ok(self.coisometry(k, m)?.adjoint())
    }

    /// `p_{k,m} = iota_{k,m} iota*_{k,m}` on `E_k ⊗ E_m`.
    pub fn range_projector(&self, k: usize, m: usize) -> Result<Mat> {
        let s = self.coisometry(k, m)?;
        Ok(mul_ah(s, s))
    }

    /// `tau_m(g) = B_m^H u^{⊗m} B_m` for a unitary `u` on `H`.
    pub fn fiber_rep(&self, m: usize, u: &Mat) -> Result<Mat> {
        let b = self.basis(m)?;
        Ok(mul_ah(b, &apply_tensor_power(b, u, m)))
    }

    pub fn to_file(&self) -> SystemFile {
        SystemFile {
            n: self.n,
            max_degree: self.max_degree(),
            bases: self
                .bases
                .iter()
                .map(|b| b.iter().map(|z| [z.re, z.im]).collect())
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_file()).expect("system serializes")
    }

    pub fn from_file(file: &SystemFile, tol: f64) -> Result<Self> {
        if file.bases.len() != file.max_degree + 1 {
            return Err(Error::Format(format!(
                "M = {} but {} bases given",
                file.max_degree,
                file.bases.len()
            )));
        }
        let h = file.n + 1;
        let mut bases = Vec::with_capacity(file.bases.len());
        for (m, flat) in file.bases.iter().enumerate() {
            let rows = pow(h, m)?;
            if flat.len() % rows != 0 {
                return Err(Error::Format(format!(
                    "basis of degree {m} has {} entries, not a multiple of {rows}",
                    flat.len()
                )));
            }
            let cols = flat.len() / rows;
            let data: Vec<_> = flat.iter().map(|p| c(p[0], p[1])).collect();
            bases.push(Mat::from_column_slice(rows, cols, &data));
        }
        Self::from_bases(file.n, bases, tol)
    }

    pub fn from_json(text: &str, tol: f64) -> Result<Self> {
        let file: SystemFile = serde_json::from_str(text)?;
        Self::from_file(&file, tol)
    }
}

/// On-disk form: `{ "n", "M", "bases": [[[re, im], ...] column-major per degree] }`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemFile {
    pub n: usize,
    #[serde(rename = "M")]
    pub max_degree: usize,
    pub bases: Vec<Vec<[f64; 2]>>,
}

/// Columns of `(B_{m-1} ⊗ I)^H (I_{h^{m-2}} ⊗ delta)`, i.e. the last
/// determinant insertion expressed in coordinates of `E_{m-1} ⊗ H`.
fn last_insertion(prev: &Mat, delta: &Mat, h: usize) -> Mat {
    let d_prev = prev.ncols();
    let words = prev.nrows() / h;
    let mut out = Mat::zeros(d_prev * h, words);
    let pairs: Vec<(usize, usize, crate::Scalar)> = (0..h * h)
        .filter(|&i| delta[(i, 0)].norm() > 0.0)
        .map(|i| (i / h, i % h, delta[(i, 0)]))
        .collect();
    for alpha in 0..words {
        for &(a, b, w) in &pairs {
            let row = alpha * h + a;
            for i in 0..d_prev {
                out[(i * h + b, alpha)] += w * prev[(row, i)].conj();
            }
        }
    }
    out
}

/// The SU(2)-equivariant system generated by the determinant vector:
/// `E_m` is the orthogonal complement of all determinant insertions in
/// `H^{⊗m}`. Each fiber is found inside `E_{m-1} ⊗ H`, where only the last
/// insertion is not already orthogonal.
pub fn build_su2(n: usize, max_degree: usize, cfg: &BuildConfig) -> Result<SubproductSystem> {
    let table = DimTable::new(n, max_degree)?;
    let h = n + 1;
    let ambient = pow(h, max_degree)?;
    let needed = ambient.saturating_mul(table.dim(max_degree));
    if needed > cfg.size_budget {
        return Err(Error::SizeLimit {
            what: format!("basis of E_{max_degree} for n = {n}"),
            needed,
            budget: cfg.size_budget,
        });
    }
    let delta = determinant_vector(n);
    let mut bases = vec![eye(1)];
    if max_degree >= 1 {
        bases.push(eye(h));
    }
    for m in 2..=max_degree {
        let prev = &bases[m - 1];
        let constraint = last_insertion(prev, &delta, h);
        let local = onb_of_complement(&constraint, prev.ncols() * h, RANK_TOL)?;
        if local.ncols() != table.dim(m) {
            return Err(Error::Consistency(format!(
                "dim E_{m} = {} but d_{m} = {}",
                local.ncols(),
                table.dim(m)
            )));
        }
        let lift = kron(prev, &eye(h));
        bases.push(mul(&lift, &local));
    }
    SubproductSystem::from_bases(n, bases, cfg.tol)
}

/// Degree-`m` fiber computed directly in `H^{⊗m}` from the full spanning set
/// of determinant insertions. Slow; used to cross-check [`build_su2`].
pub fn reference_fiber(n: usize, m: usize) -> Result<Mat> {
    let h = n + 1;
    let ambient = pow(h, m)?;
    if m < 2 {
        return Ok(eye(ambient));
    }
    let delta = determinant_vector(n);
    let spans: Vec<Mat> = (0..=m - 2)
        .map(|i| {
            kron(
                &kron(&eye(h.pow(i as u32)), &delta),
                &eye(h.pow((m - 2 - i) as u32)),
            )
        })
        .collect();
    onb_of_complement(&hstack(&spans), ambient, RANK_TOL)
}

/// `dim E_m = d_m` for every stored degree.
pub fn check_dimensions(sys: &SubproductSystem) -> Result<Vec<IdentityReport>> {
    let table = DimTable::new(sys.n(), sys.max_degree())?;
    Ok((0..=sys.max_degree())
        .map(|m| {
            IdentityReport::exact("sps_dimension", sys.dim(m) == table.dim(m))
                .with("m", m)
                .with("n", sys.n())
        })
        .collect())
}

/// Orthonormality of the bases, `E_{k+m} ⊆ E_k ⊗ E_m`, and coassociativity of
/// the structure maps.
pub fn check_axioms(sys: &SubproductSystem, tol: f64) -> Result<Vec<IdentityReport>> {
    let top = sys.max_degree();
    let n = sys.n();
    let mut out = Vec::new();
    for m in 0..=top {
        out.push(
            IdentityReport::new("sps_isometry", isometry_defect(sys.basis(m)?), tol)
                .with("m", m)
                .with("n", n),
        );
    }
    for k in 1..top {
        for m in 1..=top - k {
            let s = sys.coisometry(k, m)?;
            let inc = kron(sys.basis(k)?, sys.basis(m)?);
            let leak = op_norm(&(mul(&inc, &s.adjoint()) - sys.basis(k + m)?));
            out.push(
                IdentityReport::new("sps_fiber_inclusion", leak, tol)
                    .with("k", k)
                    .with("m", m)
                    .with("n", n),
            );
        }
    }
    for k in 1..top {
        for m in 1..top - k {
            for l in 1..=top - k - m {
                let lhs = mul(
                    sys.coisometry(k + m, l)?,
                    &kron(sys.coisometry(k, m)?, &eye(sys.dim(l))),
                );
                let rhs = mul(
                    sys.coisometry(k, m + l)?,
                    &kron(&eye(sys.dim(k)), sys.coisometry(m, l)?),
                );
                out.push(
                    IdentityReport::new("sps_coassociativity", op_norm(&(lhs - rhs)), tol)
                        .with("k", k)
                        .with("l", l)
                        .with("m", m)
                        .with("n", n),
                );
            }
        }
    }
    Ok(out)
}

/// `rho^{⊗m}(g) E_m ⊆ E_m` for the given group elements.
pub fn check_equivariance(
    sys: &SubproductSystem,
    group: &[Mat],
    tol: f64,
) -> Result<Vec<IdentityReport>> {
    let mut out = Vec::new();
    for m in 1..=sys.max_degree() {
        let b = sys.basis(m)?;
        let mut worst: f64 = 0.0;
        for g in group {
            let rho = irrep_matrix(sys.n(), g)?;
            let x = apply_tensor_power(b, &rho, m);
            let leak = &x - mul(b, &mul_ah(b, &x));
            worst = worst.max(op_norm(&leak));
        }
        out.push(
            IdentityReport::new("sps_equivariance", worst, tol)
                .with("m", m)
                .with("n", sys.n()),
        );
    }
    Ok(out)
}

/// Checks specific to the determinant system: `E_1 = H` and `E_2 = delta^⊥`.
pub fn check_su2_fibers(sys: &SubproductSystem, tol: f64) -> Result<Vec<IdentityReport>> {
    let n = sys.n();
    let mut out = Vec::new();
    if sys.max_degree() >= 1 {
        let d = op_norm(&(sys.basis(1)? - eye(n + 1)));
        out.push(IdentityReport::new("sps_first_fiber", d, tol).with("n", n));
    }
    if sys.max_degree() >= 2 {
        let delta = determinant_vector(n);
        let overlap = op_norm(&mul_ah(sys.basis(2)?, &delta));
        out.push(IdentityReport::new("sps_second_fiber", overlap, tol).with("n", n));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::projector_distance;
    use crate::su2::haar_samples;

    #[test]
    fn dims_match_sequence() {
        for (n, mm) in [(1, 6), (2, 4), (3, 3)] {
            let sys = build_su2(n, mm, &BuildConfig::default()).unwrap();
            for r in check_dimensions(&sys).unwrap() {
                assert!(r.pass, "{r}");
            }
        }
    }

    #[test]
    fn agrees_with_reference_route() {
        for (n, mm) in [(1, 5), (2, 4), (3, 3)] {
            let sys = build_su2(n, mm, &BuildConfig::default()).unwrap();
            for m in 0..=mm {
                let r = reference_fiber(n, m).unwrap();
                let d = projector_distance(sys.basis(m).unwrap(), &r);
                assert!(d < 1e-10, "n={n} m={m} distance {d:e}");
            }
        }
    }

    #[test]
    fn axioms_and_equivariance() {
        let sys = build_su2(2, 4, &BuildConfig::default()).unwrap();
        let mut reps = check_axioms(&sys, 1e-9).unwrap();
        reps.extend(check_equivariance(&sys, &haar_samples(2, 1), 1e-9).unwrap());
        reps.extend(check_su2_fibers(&sys, 1e-9).unwrap());
        assert!(reps.len() > 10);
        for r in reps {
            assert!(r.pass, "{r}");
        }
    }

    #[test]
    fn budget_is_enforced() {
        let cfg = BuildConfig {
            size_budget: 1000,
            ..Default::default()
        };
        assert!(matches!(
            build_su2(2, 5, &cfg),
            Err(Error::SizeLimit { .. })
        ));
    }

    #[test]
    fn degree_out_of_range() {
        let sys = build_su2(1, 2, &BuildConfig::default()).unwrap();
        assert!(matches!(
            sys.coisometry(2, 1),
            Err(Error::DegreeRange { .. })
        ));
    }

    #[test]
    fn json_round_trip_is_exact() {
        let sys = build_su2(2, 3, &BuildConfig::default()).unwrap();
        let back = SubproductSystem::from_json(&sys.to_json(), 1e-9).unwrap();
        assert_eq!(back.bases(), sys.bases());
    }

    #[test]
    fn malformed_file_is_rejected() {
        let bad = r#"{"n":1,"M":1,"bases":[[[1.0,0.0]],[[1.0,0.0],[0.0,0.0],[0.0,0.0]]]}"#;
        assert!(matches!(
            SubproductSystem::from_json(bad, 1e-9),
            Err(Error::Format(_))
        ));
    }
}
