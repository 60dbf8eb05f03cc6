//! The truncated Fock space `F_M = E_0 ⊕ ... ⊕ E_M`, creation operators as
//! graded block operators, and checks of the Toeplitz relations.
//!
//! A [`GradedOperator`] with shift `s` maps `E_m` into `E_{m+s}`. Block `m`
//! is stored only when it is determined by the truncated data; a relation
//! evaluated in a degree where some factor is missing is reported as
//! shadowed instead of being compared. The relation set checked here is the
//! one listed below; it is not claimed to present the Toeplitz algebra.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::fusion::toeplitz_block;
use crate::fusion::{FusionMaps, Side};
use crate::linalg::{
    c, eye, hstack, id_kron, kron, kron_id, mul, op_norm, re, select_columns, vstack, Mat,
};
use crate::report::IdentityReport;
use crate::sequences::{gamma, DimTable};
use crate::su2::irrep_matrix;
use crate::system::SubproductSystem;

/// Block layout of `F_M`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FockTruncation {
    dims: Vec<usize>,
    offsets: Vec<usize>,
}

impl FockTruncation {
    pub fn new(dims: Vec<usize>) -> Self {
        let mut offsets = vec![0];
        for d in &dims {
            offsets.push(offsets.last().unwrap() + d);
        }
        FockTruncation { dims, offsets }
    }

    pub fn of(sys: &SubproductSystem) -> Self {
        Self::new(sys.dims())
    }

    pub fn max_degree(&self) -> usize {
        self.dims.len() - 1
    }

    /// `d_m`, zero for negative `m`.
    pub fn dim(&self, m: isize) -> usize {
        if m < 0 {
            0
        } else {
            self.dims[m as usize]
        }
    }

    pub fn total(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn offset(&self, m: usize) -> usize {
        self.offsets[m]
    }
}

/// Operator on `F_M` of fixed degree shift, stored blockwise by source degree.
#[derive(Clone, Debug, PartialEq)]
pub struct GradedOperator {
    shift: isize,
    trunc: FockTruncation,
    blocks: BTreeMap<usize, Mat>,
}

impl GradedOperator {
    pub fn new(trunc: &FockTruncation, shift: isize, blocks: BTreeMap<usize, Mat>) -> Result<Self> {
        for (&m, b) in &blocks {
            let rows = trunc.dim(m as isize + shift);
            if m > trunc.max_degree() || b.ncols() != trunc.dim(m as isize) || b.nrows() != rows {
                return Err(Error::Dimension(format!(
                    "block {m} of shape {}x{} for shift {shift}",
                    b.nrows(),
                    b.ncols()
                )));
            }
        }
        Ok(GradedOperator {
            shift,
            trunc: trunc.clone(),
            blocks,
        })
    }

    /// Degree-preserving operator acting on `E_m` as `f(m)`.
    pub fn diagonal(trunc: &FockTruncation, f: impl Fn(usize) -> f64) -> Self {
        let blocks = (0..=trunc.max_degree())
            .map(|m| (m, eye(trunc.dim(m as isize)) * re(f(m))))
            .collect();
        GradedOperator {
            shift: 0,
            trunc: trunc.clone(),
            blocks,
        }
    }

    pub fn identity(trunc: &FockTruncation) -> Self {
        Self::diagonal(trunc, |_| 1.0)
    }

    pub fn shift(&self) -> isize {
        self.shift
    }

    pub fn truncation(&self) -> &FockTruncation {
        &self.trunc
    }

    pub fn block(&self, m: usize) -> Option<&Mat> {
        self.blocks.get(&m)
    }

    pub fn blocks(&self) -> &BTreeMap<usize, Mat> {
        &self.blocks
    }

    fn target(&self, m: usize) -> isize {
        m as isize + self.shift
    }

    fn zero_block(&self, m: usize, shift: isize) -> Mat {
        Mat::zeros(
            self.trunc.dim(m as isize + shift),
            self.trunc.dim(m as isize),
        )
    }

    pub fn adjoint(&self) -> Self {
        let top = self.trunc.max_degree();
        let mut blocks = BTreeMap::new();
        for t in 0..=top {
            let src = t as isize - self.shift;
            if src < 0 {
                blocks.insert(t, self.zero_block(t, -self.shift));
            } else if let Some(b) = self.blocks.get(&(src as usize)) {
                blocks.insert(t, b.adjoint());
            }
        }
        GradedOperator {
            shift: -self.shift,
            trunc: self.trunc.clone(),
            blocks,
        }
    }

    /// `self ∘ rhs`; a block exists when every factor it passes through does.
    pub fn compose(&self, rhs: &GradedOperator) -> Self {
        let shift = self.shift + rhs.shift;
        let top = self.trunc.max_degree() as isize;
        let mut blocks = BTreeMap::new();
        for (&m, b) in &rhs.blocks {
            let t = rhs.target(m);
            let end = m as isize + shift;
            if end > top {
                continue;
            }
            if t < 0 || end < 0 {
                blocks.insert(m, rhs.zero_block(m, shift));
            } else if let Some(a) = self.blocks.get(&(t as usize)) {
                blocks.insert(m, mul(a, b));
            }
        }
        GradedOperator {
            shift,
            trunc: self.trunc.clone(),
            blocks,
        }
    }

    fn combine(&self, rhs: &GradedOperator, alpha: f64) -> Result<Self> {
        if self.shift != rhs.shift {
            return Err(Error::Dimension(format!(
                "adding graded operators of shifts {} and {}",
                self.shift, rhs.shift
            )));
        }
        let blocks = self
            .blocks
            .iter()
            .filter_map(|(m, a)| rhs.blocks.get(m).map(|b| (*m, a + b * re(alpha))))
            .collect();
        Ok(GradedOperator {
            shift: self.shift,
            trunc: self.trunc.clone(),
            blocks,
        })
    }

    pub fn add(&self, rhs: &GradedOperator) -> Result<Self> {
        self.combine(rhs, 1.0)
    }

    pub fn sub(&self, rhs: &GradedOperator) -> Result<Self> {
        self.combine(rhs, -1.0)
    }

    pub fn scale(&self, s: f64) -> Self {
        let blocks = self.blocks.iter().map(|(m, b)| (*m, b * re(s))).collect();
        GradedOperator {
            shift: self.shift,
            trunc: self.trunc.clone(),
            blocks,
        }
    }

    /// Largest block operator norm over the stored blocks.
    pub fn norm(&self) -> f64 {
        self.blocks.values().map(op_norm).fold(0.0, f64::max)
    }

    /// Dense matrix on `F_M`; missing blocks are filled with zeros.
    pub fn to_dense(&self) -> Mat {
        let t = &self.trunc;
        let mut out = Mat::zeros(t.total(), t.total());
        for (&m, b) in &self.blocks {
            let r = self.target(m);
            if r < 0 || b.nrows() == 0 {
                continue;
            }
            out.view_mut((t.offset(r as usize), t.offset(m)), b.shape())
                .copy_from(b);
        }
        out
    }
}

fn sum_ops(ops: Vec<GradedOperator>) -> Result<GradedOperator> {
    let mut it = ops.into_iter();
    let first = it
        .next()
        .ok_or_else(|| Error::Dimension("empty operator sum".into()))?;
    it.try_fold(first, |acc, op| acc.add(&op))
}

/// `T_xi : E_m -> E_{m+k}`, `zeta -> iota*_{k,m}(xi ⊗ zeta)` for `xi` given in
/// `E_k` coordinates. Blocks with `m + k > M` are omitted.
pub fn creation_operator(sys: &SubproductSystem, xi: &Mat, k: usize) -> Result<GradedOperator> {
    if xi.nrows() != sys.dim(k) || xi.ncols() != 1 {
        return Err(Error::Dimension(format!(
            "vector of shape {}x{} in E_{k} of dimension {}",
            xi.nrows(),
            xi.ncols(),
            sys.dim(k)
        )));
    }
    let trunc = FockTruncation::of(sys);
    let mut blocks = BTreeMap::new();
    for m in 0..=sys.max_degree().saturating_sub(k) {
        if k + m > sys.max_degree() {
            break;
        }
        let lifted = kron(xi, &eye(sys.dim(m)));
        blocks.insert(m, mul(sys.coisometry(k, m)?, &lifted));
    }
    GradedOperator::new(&trunc, k as isize, blocks)
}

/// Right creation operator `zeta -> iota*_{m,k}(zeta ⊗ xi)`.
pub fn right_creation_operator(
    sys: &SubproductSystem,
    xi: &Mat,
    k: usize,
) -> Result<GradedOperator> {
    if xi.nrows() != sys.dim(k) || xi.ncols() != 1 {
        return Err(Error::Dimension(format!("vector not in E_{k}")));
    }
    let trunc = FockTruncation::of(sys);
    let mut blocks = BTreeMap::new();
    for m in 0..=sys.max_degree().saturating_sub(k) {
        let lifted = kron(&eye(sys.dim(m)), xi);
        blocks.insert(m, mul(sys.coisometry(m, k)?, &lifted));
    }
    GradedOperator::new(&trunc, k as isize, blocks)
}

/// The basis vector `e_j` of `E_1`, in `E_1` coordinates.
pub fn basis_vector(sys: &SubproductSystem, j: usize) -> Result<Mat> {
    let h = sys.h_dim();
    if j >= h {
        return Err(Error::GeneratorRange {
            index: j,
            n: sys.n(),
        });
    }
    Ok(select_columns(&sys.basis(1)?.adjoint(), &[j]))
}

/// `(T_0, ..., T_n)` and `(T'_0, ..., T'_n)`.
pub fn generators(sys: &SubproductSystem) -> Result<(Vec<GradedOperator>, Vec<GradedOperator>)> {
    let mut left = Vec::new();
    let mut right = Vec::new();
    for j in 0..sys.h_dim() {
        let e = basis_vector(sys, j)?;
        left.push(creation_operator(sys, &e, 1)?);
        right.push(right_creation_operator(sys, &e, 1)?);
    }
    Ok((left, right))
}

/// The dimension operator `D` and `Phi = d_m / d_{m+1}` on `F_M`.
pub fn dimension_and_phi(sys: &SubproductSystem) -> Result<(GradedOperator, GradedOperator)> {
    let table = DimTable::new(sys.n(), sys.max_degree() + 1)?;
    let trunc = FockTruncation::of(sys);
    let d = GradedOperator::diagonal(&trunc, |m| table.d(m as isize));
    let phi = GradedOperator::diagonal(&trunc, |m| table.d(m as isize) / table.d(m as isize + 1));
    Ok((d, phi))
}

/// A relation block that could not be evaluated inside the truncation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Shadowed {
    pub name: String,
    pub m: usize,
}

#[derive(Clone, Debug, Default)]
pub struct RelationCheck {
    pub reports: Vec<IdentityReport>,
    pub shadowed: Vec<Shadowed>,
}

impl RelationCheck {
    /// Record `op = 0` blockwise.
    fn zero(
        &mut self,
        name: &str,
        op: &GradedOperator,
        n: usize,
        tol: f64,
        extra: &[(&str, usize)],
    ) {
        for m in 0..=op.truncation().max_degree() {
            match op.block(m) {
                Some(b) => {
                    let mut r = IdentityReport::new(name, op_norm(b), tol)
                        .with("m", m)
                        .with("n", n);
                    for (k, v) in extra {
                        r = r.with(k, *v);
                    }
                    self.reports.push(r);
                }
                None => self.shadowed.push(Shadowed {
                    name: name.to_string(),
                    m,
                }),
            }
        }
    }
}

/// Blockwise checks of the Toeplitz relations on `F_M` (`M >= 3`):
/// the range identity of the left creation operators, the quadratic
/// determinant relation, the adjoint relation, the sphere relation, the block
/// form of `iota*_L` and, for `n = 1`, the commuting row-contraction relations.
pub fn verify_relations(sys: &SubproductSystem, tol: f64) -> Result<RelationCheck> {
    let top = sys.max_degree();
    if top < 3 {
        return Err(Error::DegreeRange {
            requested: 3,
            max: top,
        });
    }
    let n = sys.n();
    let trunc = FockTruncation::of(sys);
    let (t, tp) = generators(sys)?;
    let ts: Vec<GradedOperator> = t.iter().map(|x| x.adjoint()).collect();
    let table = DimTable::new(n, top + 1)?;
    let phi_inv =
        GradedOperator::diagonal(&trunc, |m| table.d(m as isize + 1) / table.d(m as isize));
    let one = GradedOperator::identity(&trunc);
    let q0 = GradedOperator::diagonal(&trunc, |m| if m == 0 { 1.0 } else { 0.0 });
    let mut out = RelationCheck::default();

    let sumcomp = sum_ops(t.iter().zip(&ts).map(|(a, b)| a.compose(b)).collect())?;
    out.zero("toe_sumcomp", &sumcomp.sub(&one.sub(&q0)?)?, n, tol, &[]);

    let non_self = sum_ops(
        (0..=n)
            .map(|i| {
                t[i].compose(&t[n - i])
                    .scale(if i % 2 == 0 { 1.0 } else { -1.0 })
            })
            .collect(),
    )?;
    out.zero("toe_non_self", &non_self, n, tol, &[]);

    let np1 = one.scale((n + 1) as f64).sub(&phi_inv)?;
    for i in 0..=n {
        for j in 0..=n {
            let lhs = ts[i].compose(&t[j]);
            let sign = if (i + j + 1) % 2 == 0 { 1.0 } else { -1.0 };
            let mut rhs = np1.compose(&t[n - i].compose(&ts[n - j])).scale(sign);
            if i == j {
                rhs = rhs.add(&one)?;
            }
            out.zero(
                "toe_adjoint",
                &lhs.sub(&rhs)?,
                n,
                tol,
                &[("i", i), ("j", j)],
            );
        }
    }

    let sphere = sum_ops(ts.iter().zip(&t).map(|(a, b)| a.compose(b)).collect())?;
    out.zero("toe_sphere", &sphere.sub(&phi_inv)?, n, tol, &[]);

    // iota*_L = sum_j <e_j, .> ⊗ T_j and iota*_R = sum_j T'_j ⊗ <e_j, .>.
    for m in 0..top {
        let left = hstack(
            &t.iter()
                .map(|x| x.block(m).unwrap().clone())
                .collect::<Vec<_>>(),
        );
        let r = op_norm(&(left - sys.coisometry(1, m)?));
        out.reports.push(
            IdentityReport::new("toe_iota_star", r, tol)
                .with("m", m)
                .with("n", n)
                .with("side", "left"),
        );
        let d1 = sys.dim(1);
        let dm = sys.dim(m);
        let mut right = Mat::zeros(sys.dim(m + 1), dm * d1);
        for (j, op) in tp.iter().enumerate() {
            let b = op.block(m).unwrap();
            for x in 0..dm {
                right.column_mut(x * d1 + j).copy_from(&b.column(x));
            }
        }
        let r = op_norm(&(right - sys.coisometry(m, 1)?));
        out.reports.push(
            IdentityReport::new("toe_iota_star", r, tol)
                .with("m", m)
                .with("n", n)
                .with("side", "right"),
        );
    }

    // V_L = sum_j (-1)^j e_j ⊗ T_{n-j} Phi^{1/2}, blockwise on E_{m-1}.
    let fm = FusionMaps::new(sys)?;
    let sqrt_phi = GradedOperator::diagonal(&trunc, |m| {
        (table.d(m as isize) / table.d(m as isize + 1)).sqrt()
    });
    for m in 1..=fm.max_lift() {
        let blocks: Vec<Mat> = (0..=n)
            .map(|j| {
                let op = t[n - j].compose(&sqrt_phi);
                op.block(m - 1).unwrap() * re(if j % 2 == 0 { 1.0 } else { -1.0 })
            })
            .collect();
        let r = op_norm(&(fm.vee(m, Side::Left)? - vstack(&blocks)));
        out.reports.push(
            IdentityReport::new("toe_isometry_left", r, tol)
                .with("m", m)
                .with("n", n),
        );
    }

    if n == 1 {
        let comm = t[0].compose(&t[1]).sub(&t[1].compose(&t[0]))?;
        out.zero("toe_fund_commute", &comm, n, tol, &[]);
        let number = GradedOperator::diagonal(&trunc, |m| (m + 2) as f64 / (m + 1) as f64);
        out.zero("toe_fund_sphere", &sphere.sub(&number)?, n, tol, &[]);
        let inv = GradedOperator::diagonal(&trunc, |m| 1.0 / (m + 1) as f64);
        for i in 0..2 {
            for j in 0..2 {
                let tt = t[j].compose(&ts[i]);
                let lhs = ts[i].compose(&t[j]).sub(&tt)?;
                let mut inner = tt.scale(-1.0);
                if i == j {
                    inner = inner.add(&one)?;
                }
                let rhs = inv.compose(&inner);
                out.zero(
                    "toe_fund_adjoint",
                    &lhs.sub(&rhs)?,
                    n,
                    tol,
                    &[("i", i), ("j", j)],
                );
            }
        }
    }
    Ok(out)
}

/// Checks on `D` and `Phi`: `D = N + 1` for `n = 1`, `‖Phi^{-1}‖ = n + 1`,
/// and decay of `Phi - gamma_n` (monotone, below ten times the boundary gap).
pub fn check_dimension_operator(sys: &SubproductSystem, tol: f64) -> Result<Vec<IdentityReport>> {
    let n = sys.n();
    let top = sys.max_degree();
    let table = DimTable::new(n, top + 1)?;
    let mut out = Vec::new();
    let (d, phi) = dimension_and_phi(sys)?;
    if n == 1 {
        let trunc = FockTruncation::of(sys);
        let np1 = GradedOperator::diagonal(&trunc, |m| (m + 1) as f64);
        out.push(
            IdentityReport::new("toe_dimension_number", d.sub(&np1)?.norm(), tol).with("n", n),
        );
    }
    let inv_norm = (0..=top)
        .map(|m| table.d(m as isize + 1) / table.d(m as isize))
        .fold(0.0, f64::max);
    out.push(
        IdentityReport::new(
            "toe_phi_inverse_norm",
            (inv_norm - (n + 1) as f64).abs(),
            tol,
        )
        .with("n", n),
    );
    let g = gamma(n);
    let gaps: Vec<f64> = (0..=top)
        .map(|m| op_norm(&(phi.block(m).unwrap() - eye(sys.dim(m)) * re(g))))
        .collect();
    let monotone = gaps.windows(2).all(|w| w[1] <= w[0] + tol);
    out.push(IdentityReport::exact("toe_phi_decay_monotone", monotone).with("n", n));
    let boundary = table.d(top as isize - 1) / table.d(top as isize) - g;
    out.push(
        IdentityReport::new(
            "toe_phi_decay_boundary",
            gaps[top],
            10.0 * boundary.abs().max(f64::MIN_POSITIVE),
        )
        .with("n", n),
    );
    Ok(out)
}

/// One entry of the commutator decay table.
#[derive(Clone, Debug, PartialEq)]
pub struct DecayEntry {
    pub m: usize,
    pub computed: f64,
    pub closed_form: f64,
}

/// `‖(iota_{1,m-1} ⊗ 1) V_m - (1 ⊗ V_{m-1}) iota_{1,m-2}‖` for `2 <= m <= M - 1`
/// next to `sqrt(2) (1 - (1 - 1/d_{m-1}^2)^{1/2})^{1/2}`.
pub fn commutator_decay(sys: &SubproductSystem) -> Result<Vec<DecayEntry>> {
    let fm = FusionMaps::new(sys)?;
    let table = fm.dims();
    let d1 = sys.dim(1);
    let mut out = Vec::new();
    for m in 2..=fm.max_lift() {
        let a = kron_id(&sys.inclusion(1, m - 1)?, d1, &fm.vee(m, Side::Right)?);
        let b = id_kron(d1, &fm.vee(m - 1, Side::Right)?, &sys.inclusion(1, m - 2)?);
        let dm1 = table.d(m as isize - 1);
        out.push(DecayEntry {
            m,
            computed: op_norm(&(a - b)),
            closed_form: 2f64.sqrt() * (1.0 - (1.0 - 1.0 / (dm1 * dm1)).sqrt()).sqrt(),
        });
    }
    Ok(out)
}

/// Decay table checks plus the weighted bound: on `E_m`,
/// `(D^p ⊗ 1)((T_j^* ⊗ 1) V_R - V_R T_j^*) D^{1-p}` has norm at most `sqrt(2)`
/// for `p` in `{0, 1/2, 1}`.
pub fn check_decay(sys: &SubproductSystem, tol: f64) -> Result<Vec<IdentityReport>> {
    let n = sys.n();
    let entries = commutator_decay(sys)?;
    let mut out = Vec::new();
    for e in &entries {
        out.push(
            IdentityReport::new("toe_normdiff", (e.computed - e.closed_form).abs(), tol)
                .with("m", e.m)
                .with("n", n),
        );
    }
    let monotone = entries
        .windows(2)
        .all(|w| w[1].computed <= w[0].computed + tol);
    out.push(IdentityReport::exact("toe_normdiff_monotone", monotone).with("n", n));

    let fm = FusionMaps::new(sys)?;
    let table = fm.dims();
    let d1 = sys.dim(1);
    let bound = 2f64.sqrt();
    for m in 1..fm.max_lift() {
        let vr_next = fm.vee(m + 1, Side::Right)?;
        let vr = fm.vee(m, Side::Right)?;
        let dm = table.d(m as isize);
        let mut worst: f64 = 0.0;
        for j in 0..d1 {
            let tj = toeplitz_block(sys, j, m - 1, Side::Left)?;
            let tj_next = toeplitz_block(sys, j, m, Side::Left)?;
            let first = kron_id(&tj_next.adjoint(), d1, &vr_next);
            let second = mul(&vr, &tj.adjoint());
            let diff = op_norm(&(first - second));
            for p in [0.0, 0.5, 1.0] {
                worst = worst.max(dm.powf(p) * diff * dm.powf(1.0 - p));
            }
        }
        out.push(
            IdentityReport::new("toe_weighted_commutator", worst, bound + tol)
                .with("m", m)
                .with("n", n),
        );
    }
    Ok(out)
}

fn random_vector(dim: usize, rng: &mut ChaCha8Rng) -> Mat {
    Mat::from_fn(dim, 1, |_, _| {
        c(StandardNormal.sample(rng), StandardNormal.sample(rng))
    })
}

/// `‖T_xi‖ <= ‖xi‖` for `samples` random vectors per degree `1 <= k <= M - 1`,
/// and `tau(g) T_xi tau(g)^* = T_{tau_k(g) xi}` for the given group elements.
pub fn check_creation_bounds(
    sys: &SubproductSystem,
    group: &[Mat],
    samples: usize,
    seed: u64,
    tol: f64,
) -> Result<Vec<IdentityReport>> {
    let n = sys.n();
    let top = sys.max_degree();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let us = group
        .iter()
        .map(|g| irrep_matrix(n, g))
        .collect::<Result<Vec<_>>>()?;
    let taus = us
        .iter()
        .map(|u| {
            (0..=top)
                .map(|m| sys.fiber_rep(m, u))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::new();
    for k in 1..top {
        let mut excess: f64 = f64::NEG_INFINITY;
        let mut equiv: f64 = 0.0;
        for s in 0..samples {
            let xi = random_vector(sys.dim(k), &mut rng);
            let norm = op_norm(&xi);
            let t = creation_operator(sys, &xi, k)?;
            excess = excess.max(t.norm() - norm);
            if s == 0 {
                for tau in &taus {
                    let moved = creation_operator(sys, &mul(&tau[k], &xi), k)?;
                    for (&m, b) in t.blocks() {
                        let lhs = mul(&mul(&tau[m + k], b), &tau[m].adjoint());
                        equiv = equiv.max(op_norm(&(lhs - moved.block(m).unwrap())));
                    }
                }
            }
        }
        out.push(
            IdentityReport::new("toe_creation_norm", excess.max(0.0), tol)
                .with("k", k)
                .with("n", n),
        );
        out.push(
            IdentityReport::new("toe_gauge_equivariance", equiv, 1e-8)
                .with("k", k)
                .with("n", n),
        );
    }
    Ok(out)
}
