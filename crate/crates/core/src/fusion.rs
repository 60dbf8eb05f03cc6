//! Fusion rules: the lifting maps `G_m`, `G'_m`, the isometries `V_m`, `V'_m`,
//! the maps `sigma_{k,m}` and the equivariant unitaries
//! `W_{k,m} : ⊕_j E_{k+m-2j} -> E_k ⊗ E_m`.
//!
//! All maps are stored in fiber coordinates: a map `E_a -> E_b ⊗ E_c` is a
//! `(d_b d_c) x d_a` matrix with the big-endian Kronecker index. `Side::Right`
//! refers to `G_m : E_{m-1} -> E_m ⊗ E_1`, `Side::Left` to
//! `G'_m : E_{m-1} -> E_1 ⊗ E_m`.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::linalg::{
    block_diag, eye, hstack, id_kron, kron, kron_id, mul, mul_ah, op_norm, re, select_columns,
    unitarity_defect, vstack, Mat,
};
use crate::report::IdentityReport;
use crate::sequences::DimTable;
use crate::su2::{determinant_vector, irrep_matrix};
use crate::system::SubproductSystem;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Side {
    #[default]
    Right,
    Left,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Right => "right",
            Side::Left => "left",
        })
    }
}

impl FromStr for Side {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "right" => Ok(Side::Right),
            "left" => Ok(Side::Left),
            other => Err(Error::Unsupported(format!(
                "side '{other}' (expected left|right)"
            ))),
        }
    }
}

/// Index data for one registry instance; unused fields are ignored.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct IdentityArgs {
    pub k: usize,
    pub m: usize,
    pub j: usize,
    pub side: Side,
}

impl IdentityArgs {
    pub fn m(m: usize, side: Side) -> Self {
        IdentityArgs {
            m,
            side,
            ..Default::default()
        }
    }

    pub fn km(k: usize, m: usize) -> Self {
        IdentityArgs {
            k,
            m,
            ..Default::default()
        }
    }

    pub fn kmj(k: usize, m: usize, j: usize) -> Self {
        IdentityArgs {
            k,
            m,
            j,
            ..Default::default()
        }
    }
}

/// Names accepted by [`FusionMaps::evaluate`].
pub const REGISTRY: &[&str] = &[
    "gee_recursion",
    "gee_norm",
    "gee_pairing",
    "gee_orthogonal",
    "gee_closed_form",
    "iota_star_factorization",
    "pp_star",
    "vee_decomposition",
    "vee_toeplitz_form",
    "iota_v_scalar",
    "sigma_star_sigma",
    "sigma_prop_shift",
    "sigma_prop_kernel",
    "sigma_prop_norm",
];

fn parity(e: usize) -> f64 {
    if e.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

pub struct FusionMaps<'a> {
    sys: &'a SubproductSystem,
    d: DimTable,
    delta: Mat,
    g: Vec<Mat>,
    gp: Vec<Mat>,
    recursion_residual: Vec<(f64, f64)>,
    sigmas: Vec<Vec<OnceLock<Mat>>>,
}

impl<'a> FusionMaps<'a> {
    /// Build `G_m`, `G'_m` for `1 <= m <= max(M - 1, 1)` by the two-sided
    /// recursion; the suppressed inclusions become explicit coisometries.
    pub fn new(sys: &'a SubproductSystem) -> Result<Self> {
        let n = sys.n();
        let top = sys.max_degree();
        if top < 1 {
            return Err(Error::DegreeRange {
                requested: 1,
                max: top,
            });
        }
        let d = DimTable::new(n, 2 * top + 2)?;
        let b1 = sys.basis(1)?;
        let delta = mul_ah(&kron(b1, b1), &determinant_vector(n));
        let d1 = sys.dim(1);
        let mut g = vec![Mat::zeros(0, 0), delta.clone()];
        let mut gp = vec![Mat::zeros(0, 0), delta.clone()];
        let mut recursion_residual = vec![(0.0, 0.0); 2];
        for m in 2..top {
            let s = parity((n + 1) * (m - 1)) * d.d(m as isize - 1);
            let dm1 = sys.dim(m - 1);

            let rhs =
                kron_id(&g[m - 1], d1, &sys.inclusion(m - 2, 1)?) + kron(&eye(dm1), &delta) * re(s);
            let gm = kron_id(sys.coisometry(m - 1, 1)?, d1, &rhs);
            let res_l = op_norm(&(kron_id(&sys.inclusion(m - 1, 1)?, d1, &gm) - &rhs));

            let rhs = id_kron(d1, &gp[m - 1], &sys.inclusion(1, m - 2)?)
                + kron(&delta, &eye(dm1)) * re(s);
            let gpm = id_kron(d1, sys.coisometry(1, m - 1)?, &rhs);
            let res_r = op_norm(&(id_kron(d1, &sys.inclusion(1, m - 1)?, &gpm) - &rhs));

            g.push(gm);
            gp.push(gpm);
            recursion_residual.push((res_l, res_r));
        }
        let sigmas = (0..top)
            .map(|k| (0..top - k).map(|_| OnceLock::new()).collect())
            .collect();
        Ok(FusionMaps {
            sys,
            d,
            delta,
            g,
            gp,
            recursion_residual,
            sigmas,
        })
    }

    pub fn system(&self) -> &SubproductSystem {
        self.sys
    }

    pub fn dims(&self) -> &DimTable {
        &self.d
    }

    pub fn n(&self) -> usize {
        self.sys.n()
    }

    pub fn max_degree(&self) -> usize {
        self.sys.max_degree()
    }

    /// Largest `m` with `G_m` available.
    pub fn max_lift(&self) -> usize {
        self.g.len() - 1
    }

    /// The determinant vector in `E_1 ⊗ E_1` coordinates.
    pub fn delta(&self) -> &Mat {
        &self.delta
    }

    /// `(-1)^{(n+1)(m-1)}`.
    pub fn sign(&self, m: usize) -> f64 {
        parity((self.n() + 1) * (m + 1))
    }

    fn lift_range(&self, m: usize) -> Result<()> {
        if m == 0 || m > self.max_lift() {
            return Err(Error::DegreeRange {
                requested: m,
                max: self.max_lift(),
            });
        }
        Ok(())
    }

    /// `G_m` (right) or `G'_m` (left).
    pub fn gee(&self, m: usize, side: Side) -> Result<&Mat> {
        self.lift_range(m)?;
        Ok(match side {
            Side::Right => &self.g[m],
            Side::Left => &self.gp[m],
        })
    }

    /// `V_m = (-1)^{(n+1)(m-1)} mu_m^{-1/2} G_m`, likewise `V'_m`.
    pub fn vee(&self, m: usize, side: Side) -> Result<Mat> {
        Ok(self.gee(m, side)? * re(self.sign(m) / self.d.mu(m).sqrt()))
    }

    /// `sigma_{k,m} = (1_{k+1} ⊗ iota*_{1,m})(G_{k+1} ⊗ 1_m)`, for
    /// `k + m + 2 <= M`.
    pub fn sigma(&self, k: usize, m: usize) -> Result<&Mat> {
        let top = self.max_degree();
        if k + m + 2 > top {
            return Err(Error::DegreeRange {
                requested: k + m + 2,
                max: top,
            });
        }
        let cell = &self.sigmas[k][m];
        if let Some(s) = cell.get() {
            return Ok(s);
        }
        let lifted = kron(self.gee(k + 1, Side::Right)?, &eye(self.sys.dim(m)));
        let s = id_kron(self.sys.dim(k + 1), self.sys.coisometry(1, m)?, &lifted);
        Ok(cell.get_or_init(|| s))
    }

    /// `sigma^j` from `E_k ⊗ E_m` to `E_{k+j} ⊗ E_{m+j}`.
    pub fn sigma_power(&self, k: usize, m: usize, j: usize) -> Result<Mat> {
        let mut acc = eye(self.sys.dim(k) * self.sys.dim(m));
        for i in 0..j {
            acc = mul(self.sigma(k + i, m + i)?, &acc);
        }
        Ok(acc)
    }

    /// `prod_{i=1}^j mu_{k+i} (1 - d_k d_{m-1} / (d_{k+i} d_{m+i-1}))`.
    pub fn sigma_norm_sq(&self, k: usize, m: usize, j: usize) -> f64 {
        let d = |x: isize| self.d.d(x);
        let (k, m) = (k as isize, m as isize);
        (1..=j as isize)
            .map(|i| {
                self.d.mu((k + i) as usize) * (1.0 - d(k) * d(m - 1) / (d(k + i) * d(m + i - 1)))
            })
            .product()
    }

    /// `W^j_{k,m} : E_{k+m-2j} -> E_k ⊗ E_m`.
    pub fn fusion_component(&self, k: usize, m: usize, j: usize) -> Result<Mat> {
        if j > k.min(m) {
            return Err(Error::Unsupported(format!(
                "fusion component j = {j} for (k, m) = ({k}, {m})"
            )));
        }
        let base = self.sys.inclusion(k - j, m - j)?;
        if j == 0 {
            return Ok(base);
        }
        let scale = 1.0 / self.sigma_norm_sq(k - j, m - j, j).sqrt();
        Ok(mul(&self.sigma_power(k - j, m - j, j)?, &base) * re(scale))
    }

    /// `W_{k,m} = [W^0 W^1 ... W^l]`, square of size `d_k d_m`.
    pub fn fusion_unitary(&self, k: usize, m: usize) -> Result<Mat> {
        let parts = (0..=k.min(m))
            .map(|j| self.fusion_component(k, m, j))
            .collect::<Result<Vec<_>>>()?;
        Ok(hstack(&parts))
    }

    /// `⊕_j tau_{k+m-2j}(u)`, the action on the domain of `W_{k,m}`.
    pub fn fused_rep(&self, k: usize, m: usize, u: &Mat) -> Result<Mat> {
        let blocks = (0..=k.min(m))
            .map(|j| self.sys.fiber_rep(k + m - 2 * j, u))
            .collect::<Result<Vec<_>>>()?;
        Ok(block_diag(&blocks))
    }

    /// Unitarity and equivariance of every `W_{k,m}` with `k + m <= M`, and the
    /// exact dimension count.
    pub fn check_fusion(
        &self,
        group: &[Mat],
        tol: f64,
        equiv_tol: f64,
    ) -> Result<Vec<IdentityReport>> {
        let n = self.n();
        let top = self.max_degree();
        // tau_m(g) for every sample and degree, computed once.
        let taus = group
            .iter()
            .map(|g| {
                let u = irrep_matrix(n, g)?;
                (0..=top)
                    .map(|m| self.sys.fiber_rep(m, &u))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let mut out = Vec::new();
        for k in 0..=top {
            for m in 0..=top - k {
                let w = self.fusion_unitary(k, m)?;
                let tag = |r: IdentityReport| r.with("k", k).with("m", m).with("n", n);
                out.push(tag(IdentityReport::new(
                    "fusion_unitary",
                    unitarity_defect(&w),
                    tol,
                )));
                let mut worst: f64 = 0.0;
                for tau in &taus {
                    let lhs = mul(&kron(&tau[k], &tau[m]), &w);
                    let blocks: Vec<Mat> =
                        (0..=k.min(m)).map(|j| tau[k + m - 2 * j].clone()).collect();
                    let rhs = mul(&w, &block_diag(&blocks));
                    worst = worst.max(op_norm(&(lhs - rhs)));
                }
                out.push(tag(IdentityReport::new(
                    "fusion_equivariance",
                    worst,
                    equiv_tol,
                )));
                let total: usize = (0..=k.min(m)).map(|j| self.d.dim(k + m - 2 * j)).sum();
                out.push(tag(IdentityReport::exact(
                    "fusion_dimension",
                    total == self.d.dim(k) * self.d.dim(m),
                )));
            }
        }
        Ok(out)
    }

    /// Equivariance of `G_m` and `G'_m` under the given group elements.
    pub fn check_lift_equivariance(&self, group: &[Mat], tol: f64) -> Result<Vec<IdentityReport>> {
        let n = self.n();
        let mut out = Vec::new();
        for m in 1..=self.max_lift() {
            for side in [Side::Right, Side::Left] {
                let mut worst: f64 = 0.0;
                for g in group {
                    let u = irrep_matrix(n, g)?;
                    let t1 = self.sys.fiber_rep(1, &u)?;
                    let tm = self.sys.fiber_rep(m, &u)?;
                    let tprev = self.sys.fiber_rep(m - 1, &u)?;
                    let outer = match side {
                        Side::Right => kron(&tm, &t1),
                        Side::Left => kron(&t1, &tm),
                    };
                    let gm = self.gee(m, side)?;
                    worst = worst.max(op_norm(&(mul(&outer, gm) - mul(gm, &tprev))));
                }
                out.push(
                    IdentityReport::new("gee_equivariance", worst, tol)
                        .with("m", m)
                        .with("n", n)
                        .with("side", side.to_string()),
                );
            }
        }
        Ok(out)
    }

    /// Every in-range parameter choice for a registry identity.
    pub fn instances(&self, name: &str) -> Result<Vec<IdentityArgs>> {
        let top = self.max_degree();
        let lift = self.max_lift();
        let sided = |lo: usize, hi: usize| -> Vec<IdentityArgs> {
            (lo..=hi)
                .flat_map(|m| [Side::Right, Side::Left].map(|s| IdentityArgs::m(m, s)))
                .collect()
        };
        let pairs = |extra: usize, lo: usize| -> Vec<IdentityArgs> {
            let mut v = Vec::new();
            for k in lo..=top {
                for m in lo..=top {
                    if k + m + extra <= top {
                        v.push(IdentityArgs::km(k, m));
                    }
                }
            }
            v
        };
        let triples = || -> Vec<IdentityArgs> {
            let mut v = Vec::new();
            for k in 0..=top {
                for m in 0..=top {
                    for j in 1..=top {
                        if k + m + 2 * j <= top {
                            v.push(IdentityArgs::kmj(k, m, j));
                        }
                    }
                }
            }
            v
        };
        Ok(match name {
            "gee_recursion" => sided(2, lift),
            "gee_norm"
            | "gee_pairing"
            | "gee_closed_form"
            | "iota_star_factorization"
            | "vee_toeplitz_form" => sided(1, lift),
            "vee_decomposition" => sided(1, lift.min(top - 1)),
            "gee_orthogonal" => sided(1, lift.saturating_sub(1)),
            "pp_star" => sided(2, (lift + 1).min(top)),
            "iota_v_scalar" => (2..=lift)
                .map(|m| IdentityArgs::m(m, Side::Right))
                .collect(),
            "sigma_star_sigma" => pairs(2, 0),
            "sigma_prop_kernel" => pairs(0, 1),
            "sigma_prop_shift" | "sigma_prop_norm" => triples(),
            other => return Err(Error::Unsupported(format!("unknown identity '{other}'"))),
        })
    }

    /// Evaluate every registry identity over all in-range indices.
    pub fn check_identities(&self, tol: f64) -> Result<Vec<IdentityReport>> {
        let mut out = Vec::new();
        for name in REGISTRY {
            for args in self.instances(name)? {
                out.push(self.evaluate(name, args, tol)?);
            }
        }
        Ok(out)
    }

    /// Evaluate one identity: both sides are formed as matrices in the stored
    /// bases and the residual is the operator norm of their difference.
    pub fn evaluate(&self, name: &str, args: IdentityArgs, tol: f64) -> Result<IdentityReport> {
        let residual = self.residual(name, args)?;
        let mut rep = IdentityReport::new(name, residual, tol).with("n", self.n());
        let IdentityArgs { k, m, j, side } = args;
        match name {
            "sigma_star_sigma" | "sigma_prop_kernel" => rep = rep.with("k", k).with("m", m),
            "sigma_prop_shift" | "sigma_prop_norm" => {
                rep = rep.with("j", j).with("k", k).with("m", m)
            }
            "iota_v_scalar" => rep = rep.with("m", m),
            _ => rep = rep.with("m", m).with("side", side.to_string()),
        }
        Ok(rep)
    }

    fn residual(&self, name: &str, args: IdentityArgs) -> Result<f64> {
        let sys = self.sys;
        let n = self.n();
        let IdentityArgs { k, m, j, side } = args;
        let d = |x: usize| self.d.d(x as isize);
        let dim = |x: usize| sys.dim(x);
        let d1 = dim(1);
        let delta = &self.delta;
        let s_prime = parity((n + 1) * m + 1);
        // Sided building blocks: `on_big` acts on the E_m slot.
        let on_big = |a: &Mat, x: &Mat| match side {
            Side::Right => kron_id(a, d1, x),
            Side::Left => id_kron(d1, a, x),
        };
        let split = |a: usize, b: usize| match side {
            Side::Right => (a, b),
            Side::Left => (b, a),
        };
        let one_delta = |dm: usize| match side {
            Side::Right => kron(&eye(dm), delta),
            Side::Left => kron(delta, &eye(dm)),
        };

        match name {
            "gee_recursion" => {
                self.lift_range(m)?;
                if m < 2 {
                    return Err(Error::DegreeRange {
                        requested: m,
                        max: self.max_lift(),
                    });
                }
                let (l, r) = self.recursion_residual[m];
                Ok(if side == Side::Right { l } else { r })
            }
            "gee_norm" => {
                let g = self.gee(m, side)?;
                Ok(op_norm(
                    &(mul_ah(g, g) - eye(dim(m - 1)) * re(self.d.mu(m))),
                ))
            }
            "gee_pairing" => {
                let g = self.gee(m, side)?;
                let lhs = on_big(&g.adjoint(), &one_delta(dim(m)));
                let (a, b) = split(m - 1, 1);
                let rhs = sys.inclusion(a, b)? * re(s_prime * d(m - 1) / d(1));
                Ok(op_norm(&(lhs - rhs)))
            }
            "gee_orthogonal" => {
                let g = self.gee(m, side)?;
                let (a, b) = split(m, 1);
                let next = on_big(&sys.inclusion(a, b)?, self.gee(m + 1, side)?);
                Ok(op_norm(&on_big(&g.adjoint(), &next)))
            }
            "gee_closed_form" => {
                let g = self.gee(m, side)?;
                let (a, b) = split(m - 1, 1);
                let rhs = on_big(sys.coisometry(a, b)?, &one_delta(dim(m - 1)));
                Ok(op_norm(&(g - rhs * re(self.sign(m) * d(m - 1)))))
            }
            "iota_star_factorization" => {
                let g = self.gee(m, side)?;
                let (a, b) = split(m - 1, 1);
                let rhs = match side {
                    Side::Right => id_kron(dim(m), &delta.adjoint(), &kron(g, &eye(d1))),
                    Side::Left => kron_id(&delta.adjoint(), dim(m), &kron(&eye(d1), g)),
                };
                let c = s_prime * d(1) / d(m - 1);
                Ok(op_norm(&(sys.coisometry(a, b)? - rhs * re(c))))
            }
            "pp_star" => {
                if m < 2 || m > self.max_degree() {
                    return Err(Error::DegreeRange {
                        requested: m,
                        max: self.max_degree(),
                    });
                }
                let g = self.gee(m - 1, side)?;
                let c = s_prime * d(1) / d(m - 1);
                let (corr, p) = match side {
                    Side::Right => {
                        let x = kron(&sys.inclusion(m - 2, 1)?, &eye(d1));
                        let y = id_kron(dim(m - 2), &delta.adjoint(), &x);
                        (kron_id(g, 1, &y), sys.range_projector(m - 1, 1)?)
                    }
                    Side::Left => {
                        let x = kron(&eye(d1), &sys.inclusion(1, m - 2)?);
                        let y = kron_id(&delta.adjoint(), dim(m - 2), &x);
                        (id_kron(1, g, &y), sys.range_projector(1, m - 1)?)
                    }
                };
                let size = p.nrows();
                Ok(op_norm(&(p - eye(size) - corr * re(c))))
            }
            "vee_decomposition" => {
                let (a, b) = split(m, 1);
                let u = hstack(&[sys.inclusion(a, b)?, self.vee(m, side)?]);
                Ok(unitarity_defect(&u))
            }
            "vee_toeplitz_form" => {
                let v = self.vee(m, side)?;
                let c = (d(m - 1) / d(m)).sqrt();
                let rhs = match side {
                    Side::Left => {
                        let blocks = (0..=n)
                            .map(|i| {
                                self.toeplitz_block(n - i, m - 1, Side::Left)
                                    .map(|t| t * re(parity(i)))
                            })
                            .collect::<Result<Vec<_>>>()?;
                        vstack(&blocks)
                    }
                    Side::Right => {
                        let mut out = Mat::zeros(dim(m) * d1, dim(m - 1));
                        for i in 0..=n {
                            let t = self.toeplitz_block(n - i, m - 1, Side::Right)?;
                            let sgn = re(parity(n - i));
                            for a in 0..dim(m) {
                                for col in 0..dim(m - 1) {
                                    out[(a * d1 + i, col)] = t[(a, col)] * sgn;
                                }
                            }
                        }
                        out
                    }
                };
                Ok(op_norm(&(v - rhs * re(c))))
            }
            "iota_v_scalar" => {
                self.lift_range(m)?;
                if m < 2 {
                    return Err(Error::DegreeRange {
                        requested: m,
                        max: self.max_lift(),
                    });
                }
                let x = kron_id(&sys.inclusion(1, m - 1)?, d1, &self.vee(m, Side::Right)?);
                let y = id_kron(d1, &self.vee(m - 1, Side::Right)?.adjoint(), &x);
                let lhs = mul(sys.coisometry(1, m - 2)?, &y);
                let c = (1.0 - 1.0 / (d(m - 1) * d(m - 1))).sqrt();
                Ok(op_norm(&(lhs - eye(dim(m - 1)) * re(c))))
            }
            "sigma_star_sigma" => {
                let s = self.sigma(k, m)?;
                let mut rhs = eye(dim(k) * dim(m)) * re(d(k) * d(k + m + 1) / (d(1) * d(m)));
                if k >= 1 && m >= 1 {
                    let sp = self.sigma(k - 1, m - 1)?;
                    rhs += mul(sp, &sp.adjoint()) * re(d(k) * d(m - 1) / (d(k - 1) * d(m)));
                }
                Ok(op_norm(&(mul_ah(s, s) - rhs)))
            }
            "sigma_prop_shift" => {
                if j == 0 {
                    return Err(Error::Unsupported("sigma_prop_shift needs j >= 1".into()));
                }
                let sj = self.sigma_power(k, m, j)?;
                let lhs = mul_ah(self.sigma(k + j - 1, m + j - 1)?, &sj);
                let c1 = self.d.mu(k + j)
                    * (1.0 - d(k) * self.d.d(m as isize - 1) / (d(k + j) * d(m + j - 1)));
                let mut rhs = self.sigma_power(k, m, j - 1)? * re(c1);
                if k >= 1 && m >= 1 {
                    let c2 = d(m - 1) * d(k + j - 1) / (d(k - 1) * d(m + j - 1));
                    let back = self.sigma(k - 1, m - 1)?.adjoint();
                    rhs += mul(&self.sigma_power(k - 1, m - 1, j)?, &back) * re(c2);
                }
                Ok(op_norm(&(lhs - rhs)))
            }
            "sigma_prop_kernel" => {
                if k == 0 || m == 0 {
                    return Err(Error::Unsupported(
                        "sigma_prop_kernel needs k, m >= 1".into(),
                    ));
                }
                Ok(op_norm(&mul_ah(
                    self.sigma(k - 1, m - 1)?,
                    &sys.inclusion(k, m)?,
                )))
            }
            "sigma_prop_norm" => {
                if j == 0 {
                    return Err(Error::Unsupported("sigma_prop_norm needs j >= 1".into()));
                }
                let inc = sys.inclusion(k, m)?;
                let sj = self.sigma_power(k, m, j)?;
                let lhs = mul_ah(&sj, &mul(&sj, &inc));
                Ok(op_norm(&(lhs - &inc * re(self.sigma_norm_sq(k, m, j)))))
            }
            other => Err(Error::Unsupported(format!("unknown identity '{other}'"))),
        }
    }

    /// See [`toeplitz_block`].
    pub fn toeplitz_block(&self, i: usize, m: usize, side: Side) -> Result<Mat> {
        toeplitz_block(self.sys, i, m, side)
    }
}

/// The degree-`m` block `E_m -> E_{m+1}` of the left creation operator `T_i`
/// (`Side::Left`, `xi -> iota*_{1,m}(e_i ⊗ xi)`) or of the right one `T'_i`
/// (`Side::Right`, `xi -> iota*_{m,1}(xi ⊗ e_i)`).
pub fn toeplitz_block(sys: &SubproductSystem, i: usize, m: usize, side: Side) -> Result<Mat> {
    let d1 = sys.dim(1);
    if i >= d1 {
        return Err(Error::GeneratorRange {
            index: i,
            n: sys.n(),
        });
    }
    let dm = sys.dim(m);
    Ok(match side {
        Side::Left => {
            let cols: Vec<usize> = (0..dm).map(|x| i * dm + x).collect();
            select_columns(sys.coisometry(1, m)?, &cols)
        }
        Side::Right => {
            let cols: Vec<usize> = (0..dm).map(|x| x * d1 + i).collect();
            select_columns(sys.coisometry(m, 1)?, &cols)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::su2::haar_samples;
    use crate::system::{build_su2, BuildConfig};

    #[test]
    fn registry_passes_small_cases() {
        for (n, mm) in [(1, 6), (2, 4), (3, 4)] {
            let sys = build_su2(n, mm, &BuildConfig::default()).unwrap();
            let f = FusionMaps::new(&sys).unwrap();
            let reps = f.check_identities(1e-9).unwrap();
            assert!(reps.len() > 20);
            for r in reps {
                assert!(r.pass, "{r}");
            }
        }
    }

    #[test]
    fn fusion_unitaries_n2() {
        let sys = build_su2(2, 4, &BuildConfig::default()).unwrap();
        let f = FusionMaps::new(&sys).unwrap();
        for r in f.check_fusion(&haar_samples(3, 4), 1e-9, 1e-8).unwrap() {
            assert!(r.pass, "{r}");
        }
        for r in f
            .check_lift_equivariance(&haar_samples(2, 5), 1e-9)
            .unwrap()
        {
            assert!(r.pass, "{r}");
        }
    }

    #[test]
    fn lift_norm_n1() {
        let sys = build_su2(1, 4, &BuildConfig::default()).unwrap();
        let f = FusionMaps::new(&sys).unwrap();
        let g = f.gee(2, Side::Right).unwrap();
        assert!(op_norm(&(mul_ah(g, g) - eye(2) * re(3.0))) < 1e-12);
        assert_eq!(f.gee(1, Side::Left).unwrap(), f.delta());
    }

    #[test]
    fn fusion_block_sizes() {
        let sys = build_su2(2, 3, &BuildConfig::default()).unwrap();
        let f = FusionMaps::new(&sys).unwrap();
        let w = f.fusion_unitary(2, 1).unwrap();
        assert_eq!(w.shape(), (24, 24));
        assert_eq!(f.fusion_component(2, 1, 1).unwrap().ncols(), 3);
        assert!(op_norm(&(f.fusion_unitary(3, 0).unwrap() - eye(21))) < 1e-12);

        let sys = build_su2(1, 4, &BuildConfig::default()).unwrap();
        let f = FusionMaps::new(&sys).unwrap();
        let widths: Vec<usize> = (0..=2)
            .map(|j| f.fusion_component(2, 2, j).unwrap().ncols())
            .collect();
        assert_eq!(widths, [5, 3, 1]);
        assert_eq!(
            f.fusion_component(2, 2, 0).unwrap(),
            sys.inclusion(2, 2).unwrap()
        );
        assert!(f.fusion_component(1, 3, 2).is_err());
    }

    #[test]
    fn unknown_and_out_of_range() {
        let sys = build_su2(1, 4, &BuildConfig::default()).unwrap();
        let f = FusionMaps::new(&sys).unwrap();
        assert!(f
            .evaluate("no_such", IdentityArgs::default(), 1e-9)
            .is_err());
        assert!(f
            .evaluate("gee_norm", IdentityArgs::m(9, Side::Right), 1e-9)
            .is_err());
        assert!(f.sigma(2, 1).is_err());
    }

    #[test]
    fn iota_v_scalar_n1() {
        let sys = build_su2(1, 4, &BuildConfig::default()).unwrap();
        let f = FusionMaps::new(&sys).unwrap();
        let r = f
            .evaluate("iota_v_scalar", IdentityArgs::m(2, Side::Right), 1e-9)
            .unwrap();
        assert!(r.pass, "{r}");
    }
}
