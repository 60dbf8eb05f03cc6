//! The doubled operators on `F ⊗ F`: the partial isometry `W` and its four
//! entries, `Gamma`, `Delta`, `Theta`, the homotopy paths, and the Euler class
//! with the resulting K-theory.
//!
//! Every operator here moves `E_k ⊗ E_m` to a single `E_{k'} ⊗ E_{m'}`, or at
//! least preserves the total degree, so all checks are finite matrix
//! identities. Bigraded entries are indexed by `(k, m)`; operators that mix
//! bidegrees are assembled on a total-degree sector
//! `(⊕_{k+m=N} E_k ⊗ E_m) ⊕ (⊕_{k+m=N-2} E_k ⊗ E_m)` (top ⊕ bottom), which
//! `W`, `P`, `p_L`, `p_R` and the flip all preserve.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::{FRAC_PI_2, SQRT_2};
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::{toeplitz_block, FusionMaps, Side};
use crate::linalg::{
    eye, hermitian_fn, kron, mul, mul_ah, onb_of_span, op_norm, projector, re, spectrum, Mat,
    RANK_TOL,
};
use crate::report::IdentityReport;
use crate::sequences::{gamma, DimTable};
use crate::su2::square_invariant_dim;
use crate::system::SubproductSystem;

/// One entry of `W = [[v^TT, v^TB], [v^BT, v^BB]]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Entry {
    TT,
    TB,
    BT,
    BB,
}

impl Entry {
    pub const ALL: [Entry; 4] = [Entry::TT, Entry::TB, Entry::BT, Entry::BB];

    /// Bidegree shift `(s_k, s_m)`.
    pub fn shift(self) -> (isize, isize) {
        match self {
            Entry::TT => (-1, 1),
            Entry::TB => (1, 1),
            Entry::BT => (-1, -1),
            Entry::BB => (1, -1),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Entry::TT => "tt",
            Entry::TB => "tb",
            Entry::BT => "bt",
            Entry::BB => "bb",
        }
    }
}

impl fmt::Display for Entry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// An operator on `F ⊗ F` with a fixed bidegree shift, stored blockwise.
/// Blocks whose target has a negative index are kept with zero rows.
#[derive(Clone, Debug)]
pub struct BiGradedOperator {
    shift: (isize, isize),
    dims: Vec<usize>,
    blocks: BTreeMap<(usize, usize), Mat>,
}

fn target(k: usize, m: usize, s: (isize, isize)) -> Option<(usize, usize)> {
    let (a, b) = (k as isize + s.0, m as isize + s.1);
    (a >= 0 && b >= 0).then_some((a as usize, b as usize))
}

impl BiGradedOperator {
    /// `dims[m] = dim E_m`; every block index and target must lie in range.
    pub fn new(
        dims: Vec<usize>,
        shift: (isize, isize),
        blocks: BTreeMap<(usize, usize), Mat>,
    ) -> Result<Self> {
        let op = BiGradedOperator {
            shift,
            dims,
            blocks: BTreeMap::new(),
        };
        let mut op = op;
        for ((k, m), b) in blocks {
            let rows = op.target_dim(k, m).ok_or(Error::DegreeRange {
                requested: k.max(m) + 1,
                max: op.dims.len().saturating_sub(1),
            })?;
            let cols = op.dims.get(k).zip(op.dims.get(m)).map(|(a, b)| a * b);
            if Some(b.ncols()) != cols || b.nrows() != rows {
                return Err(Error::Dimension(format!(
                    "block ({k},{m}) has shape {}x{}, expected {rows}x{}",
                    b.nrows(),
                    b.ncols(),
                    cols.unwrap_or(0)
                )));
            }
            op.blocks.insert((k, m), b);
        }
        Ok(op)
    }

    fn target_dim(&self, k: usize, m: usize) -> Option<usize> {
        match target(k, m, self.shift) {
            None => Some(0),
            Some((a, b)) => Some(self.dims.get(a)? * self.dims.get(b)?),
        }
    }

    pub fn shift(&self) -> (isize, isize) {
        self.shift
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn block(&self, k: usize, m: usize) -> Option<&Mat> {
        self.blocks.get(&(k, m))
    }

    pub fn blocks(&self) -> &BTreeMap<(usize, usize), Mat> {
        &self.blocks
    }

    pub fn adjoint(&self) -> Self {
        let blocks = self
            .blocks
            .iter()
            .filter_map(|(&(k, m), b)| target(k, m, self.shift).map(|t| (t, b.adjoint())))
            .collect();
        BiGradedOperator {
            shift: (-self.shift.0, -self.shift.1),
            dims: self.dims.clone(),
            blocks,
        }
    }

    /// `self ∘ rhs`; a block is present when both factors are.
    pub fn compose(&self, rhs: &BiGradedOperator) -> Self {
        let shift = (self.shift.0 + rhs.shift.0, self.shift.1 + rhs.shift.1);
        let mut out = BiGradedOperator {
            shift,
            dims: self.dims.clone(),
            blocks: BTreeMap::new(),
        };
        for (&(k, m), b) in &rhs.blocks {
            let block = match target(k, m, rhs.shift) {
                Some((a, c)) => match self.blocks.get(&(a, c)) {
                    Some(l) => mul(l, b),
                    None => continue,
                },
                None => match out.target_dim(k, m) {
                    Some(rows) => Mat::zeros(rows, b.ncols()),
                    None => continue,
                },
            };
            out.blocks.insert((k, m), block);
        }
        out
    }

    pub fn sub(&self, rhs: &BiGradedOperator) -> Result<Self> {
        if self.shift != rhs.shift {
            return Err(Error::Dimension(format!(
                "shift {:?} minus shift {:?}",
                self.shift, rhs.shift
            )));
        }
        let blocks = self
            .blocks
            .iter()
            .filter_map(|(key, a)| rhs.blocks.get(key).map(|b| (*key, a - b)))
            .collect();
        Ok(BiGradedOperator {
            shift: self.shift,
            dims: self.dims.clone(),
            blocks,
        })
    }

    /// Largest block norm.
    pub fn norm(&self) -> f64 {
        self.blocks.values().map(op_norm).fold(0.0, f64::max)
    }
}

/// How an entry of `W` is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Route {
    /// Compositions of `iota`, `iota*` and the isometries `V_R`, `V_L`.
    Structure,
    /// The sums over `T_j ⊗ T'_j` with `Phi^{1/2}` factors.
    Toeplitz,
}

/// `sum_i a_i ⊗ b_i` where `a_i` collects rows `x d1 + i` of `a` and `b_i`
/// columns `i s + y` of `b`; this is `(1 ⊗ b)(a ⊗ 1)` with the shared
/// `E_1` factor contracted.
fn contract(a: &Mat, b: &Mat, d1: usize) -> Mat {
    let p = a.nrows() / d1;
    let s = b.ncols() / d1;
    let mut out = Mat::zeros(p * b.nrows(), a.ncols() * s);
    for i in 0..d1 {
        let ai = Mat::from_fn(p, a.ncols(), |x, c| a[(x * d1 + i, c)]);
        let bi = b.columns(i * s, s).into_owned();
        out += kron(&ai, &bi);
    }
    out
}

/// Top or bottom copy of `F ⊗ F`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Half {
    Top,
    Bottom,
}

#[derive(Clone, Debug)]
pub struct Slot {
    pub half: Half,
    pub k: usize,
    pub m: usize,
    pub offset: usize,
    pub size: usize,
}

/// Coordinates on sector `N`: top blocks `(k, N-k)`, then bottom blocks
/// `(k, N-2-k)`.
#[derive(Clone, Debug)]
pub struct SectorLayout {
    pub total: usize,
    pub slots: Vec<Slot>,
    pub dim: usize,
}

impl SectorLayout {
    pub fn new(total: usize, dim_of: impl Fn(usize) -> usize) -> Self {
        let mut slots = Vec::new();
        let mut offset = 0;
        let mut push = |half, k, m| {
            let size = dim_of(k) * dim_of(m);
            slots.push(Slot {
                half,
                k,
                m,
                offset,
                size,
            });
            offset += size;
        };
        for k in 0..=total {
            push(Half::Top, k, total - k);
        }
        if total >= 2 {
            for k in 0..=total - 2 {
                push(Half::Bottom, k, total - 2 - k);
            }
        }
        SectorLayout {
            total,
            slots,
            dim: offset,
        }
    }

    pub fn find(&self, half: Half, k: usize, m: usize) -> Option<&Slot> {
        self.slots
            .iter()
            .find(|s| s.half == half && s.k == k && s.m == m)
    }
}

/// `1 - d_{k-j} d_{m-j-1} / (d_{k+1} d_m)`, the eigenvalue of `Gamma_{k,m}` on
/// the `j`-th fusion component.
pub fn gamma_eigenvalue(d: &DimTable, k: usize, m: usize, j: usize) -> f64 {
    let (k, m, j) = (k as isize, m as isize, j as isize);
    1.0 - d.d(k - j) * d.d(m - j - 1) / (d.d(k + 1) * d.d(m))
}

/// Eigenvalue of `Delta_{k,m}` on the `j`-th component (zero for `j = 0`).
pub fn delta_eigenvalue(d: &DimTable, k: usize, m: usize, j: usize) -> f64 {
    if j == 0 || k == 0 || m == 0 {
        return 0.0;
    }
    let (k, m, j) = (k as isize, m as isize, j as isize);
    let c = d.d(k) * d.d(m - 1) / (d.d(k - 1) * d.d(m));
    c * (1.0 - d.d(k - j) * d.d(m - j - 1) / (d.d(k) * d.d(m - 1)))
}

/// Closed-form spectrum (ascending, with multiplicities `d_{k+m-2j}`).
fn closed_spectrum(d: &DimTable, k: usize, m: usize, f: impl Fn(usize) -> f64) -> Vec<f64> {
    let mut v = Vec::new();
    for j in 0..=k.min(m) {
        v.extend(std::iter::repeat_n(f(j), d.dim(k + m - 2 * j)));
    }
    v.sort_by(f64::total_cmp);
    v
}

fn spectrum_residual(computed: &[f64], expected: &[f64]) -> f64 {
    if computed.len() != expected.len() {
        return f64::INFINITY;
    }
    computed
        .iter()
        .zip(expected)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

/// Which homotopy path to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Path {
    /// `U_t`, `t ∈ (0, π/2]`.
    U,
    /// `H_t`, `t ∈ [0, π/2]`.
    H,
    /// `y_t`, `t ∈ [0, 1]`.
    Y,
    /// `I_t = y_t |y_t|^{-1}`, `t ∈ [0, 1]`.
    I,
}

impl FromStr for Path {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "U" | "u" => Ok(Path::U),
            "H" | "h" => Ok(Path::H),
            "y" | "Y" => Ok(Path::Y),
            "I" | "i" => Ok(Path::I),
            other => Err(Error::Unsupported(format!("unknown path '{other}'"))),
        }
    }
}

/// A total-degree preserving operator, one dense matrix per sector.
#[derive(Clone, Debug)]
pub struct SectorOperator {
    pub layouts: BTreeMap<usize, SectorLayout>,
    pub blocks: BTreeMap<usize, Mat>,
}

impl SectorOperator {
    pub fn norm(&self) -> f64 {
        self.blocks.values().map(op_norm).fold(0.0, f64::max)
    }
}

/// Entries of `W`, projections and homotopy operators over a fixed system.
pub struct KkBlocks<'a> {
    fm: FusionMaps<'a>,
    d: DimTable,
    cache: Mutex<HashMap<(Entry, usize, usize), Arc<Mat>>>,
    pis: Mutex<HashMap<(usize, usize), Arc<Mat>>>,
}

fn cached<K: std::hash::Hash + Eq + Copy>(
    map: &Mutex<HashMap<K, Arc<Mat>>>,
    key: K,
    f: impl FnOnce() -> Result<Mat>,
) -> Result<Arc<Mat>> {
    if let Some(m) = map.lock().expect("cache lock").get(&key) {
        return Ok(m.clone());
    }
    let v = Arc::new(f()?);
    map.lock().expect("cache lock").insert(key, v.clone());
    Ok(v)
}

fn range_err(requested: usize, max: usize) -> Error {
    Error::DegreeRange { requested, max }
}

fn parity(e: usize) -> f64 {
    if e.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

impl<'a> KkBlocks<'a> {
    pub fn new(sys: &'a SubproductSystem) -> Result<Self> {
        let fm = FusionMaps::new(sys)?;
        let d = DimTable::new(sys.n(), 2 * sys.max_degree() + 4)?;
        Ok(KkBlocks {
            fm,
            d,
            cache: Mutex::new(HashMap::new()),
            pis: Mutex::new(HashMap::new()),
        })
    }

    pub fn system(&self) -> &SubproductSystem {
        self.fm.system()
    }

    pub fn fusion(&self) -> &FusionMaps<'a> {
        &self.fm
    }

    pub fn dims(&self) -> &DimTable {
        &self.d
    }

    fn n(&self) -> usize {
        self.system().n()
    }

    fn top(&self) -> usize {
        self.system().max_degree()
    }

    fn dim(&self, m: usize) -> usize {
        self.system().dim(m)
    }

    /// `Phi` on `E_m`, `d_m / d_{m+1}`.
    pub fn phi(&self, m: usize) -> f64 {
        self.d.d(m as isize) / self.d.d(m as isize + 1)
    }

    /// Whether the structure route can evaluate `entry` on `E_k ⊗ E_m`.
    pub fn available(&self, entry: Entry, k: usize, m: usize) -> bool {
        let top = self.top();
        let lift = self.fm.max_lift();
        match entry {
            Entry::TT => k <= top && m < top,
            Entry::TB => k < lift && m < top,
            Entry::BT => k <= top && m <= lift,
            Entry::BB => k < lift && m <= lift,
        }
    }

    fn target_dim(&self, entry: Entry, k: usize, m: usize) -> usize {
        target(k, m, entry.shift())
            .map(|(a, b)| self.dim(a) * self.dim(b))
            .unwrap_or(0)
    }

    /// `v^XY` on `E_k ⊗ E_m` from the structure maps:
    /// `v^TT = (1 ⊗ iota*_L)(iota_R ⊗ 1)`, `v^TB = (1 ⊗ iota*_L)(V_R ⊗ 1)`,
    /// `v^BT = (1 ⊗ V_L*)(iota_R ⊗ 1)`, `v^BB = (1 ⊗ V_L*)(V_R ⊗ 1)`.
    pub fn block(&self, entry: Entry, k: usize, m: usize) -> Result<Arc<Mat>> {
        if !self.available(entry, k, m) {
            return Err(range_err(k.max(m) + 1, self.top()));
        }
        cached(&self.cache, (entry, k, m), || {
            let sys = self.system();
            let cols = self.dim(k) * self.dim(m);
            let rows = self.target_dim(entry, k, m);
            let left_zero = k == 0 && matches!(entry, Entry::TT | Entry::BT);
            let right_zero = m == 0 && matches!(entry, Entry::BT | Entry::BB);
            if left_zero || right_zero {
                return Ok(Mat::zeros(rows, cols));
            }
            let a = match entry {
                Entry::TT | Entry::BT => sys.inclusion(k - 1, 1)?,
                Entry::TB | Entry::BB => self.fm.vee(k + 1, Side::Right)?,
            };
            let b = match entry {
                Entry::TT | Entry::TB => sys.coisometry(1, m)?.clone(),
                Entry::BT | Entry::BB => self.fm.vee(m, Side::Left)?.adjoint(),
            };
            Ok(contract(&a, &b, sys.dim(1)))
        })
    }

    /// The same entry from the left and right creation operators:
    /// `v^TT = sum_j T'_j* ⊗ T_j`,
    /// `v^TB = sum_j (-1)^{n-j} T'_{n-j} Phi^{1/2} ⊗ T_j`,
    /// `v^BT = sum_j (-1)^j T'_j* ⊗ Phi^{1/2} T*_{n-j}`,
    /// `v^BB = (-1)^n sum_j T'_{n-j} Phi^{1/2} ⊗ Phi^{1/2} T*_{n-j}`.
    pub fn block_via_toeplitz(&self, entry: Entry, k: usize, m: usize) -> Result<Mat> {
        let sys = self.system();
        let n = self.n();
        let cols = self.dim(k) * self.dim(m);
        let rows = self.target_dim(entry, k, m);
        let top = self.top();
        let needs_k = matches!(entry, Entry::TB | Entry::BB);
        let needs_m = matches!(entry, Entry::TT | Entry::TB);
        if (needs_k && k >= top) || (needs_m && m >= top) || k > top || m > top {
            return Err(range_err(k.max(m) + 1, top));
        }
        if (k == 0 && matches!(entry, Entry::TT | Entry::BT))
            || (m == 0 && matches!(entry, Entry::BT | Entry::BB))
        {
            return Ok(Mat::zeros(rows, cols));
        }
        // T'_i on E_k, T'_i* on E_k, T_i on E_m, T_i* on E_m.
        let rp = |i| toeplitz_block(sys, i, k, Side::Right);
        let rp_star = |i| toeplitz_block(sys, i, k - 1, Side::Right).map(|t| t.adjoint());
        let lt = |i| toeplitz_block(sys, i, m, Side::Left);
        let lt_star = |i| toeplitz_block(sys, i, m - 1, Side::Left).map(|t| t.adjoint());
        let sk = self.phi(k).sqrt();
        let sm = if m > 0 { self.phi(m - 1).sqrt() } else { 0.0 };
        let mut out = Mat::zeros(rows, cols);
        for j in 0..=n {
            let term = match entry {
                Entry::TT => kron(&rp_star(j)?, &lt(j)?),
                Entry::TB => kron(&rp(n - j)?, &lt(j)?) * re(parity(n - j) * sk),
                Entry::BT => kron(&rp_star(j)?, &lt_star(n - j)?) * re(parity(j) * sm),
                Entry::BB => kron(&rp(n - j)?, &lt_star(n - j)?) * re(parity(n) * sk * sm),
            };
            out += term;
        }
        Ok(out)
    }

    /// All structure-route blocks with `k <= kmax`, `m <= mmax`.
    pub fn douu(&self, entry: Entry, kmax: usize, mmax: usize) -> Result<BiGradedOperator> {
        let mut blocks = BTreeMap::new();
        for k in 0..=kmax {
            for m in 0..=mmax {
                blocks.insert((k, m), (*self.block(entry, k, m)?).clone());
            }
        }
        let dims = (0..=self.top()).map(|m| self.dim(m)).collect();
        BiGradedOperator::new(dims, entry.shift(), blocks)
    }

    /// Orthogonal projection `Pi` on `E_k ⊗ E_m` onto the complement of
    /// `iota_{k,m}(E_{k+m})`. It is formed without `E_{k+m}`: inside
    /// `E_k ⊗ E_m` that fiber is the kernel of the junction map
    /// `(1 ⊗ delta* ⊗ 1)(iota_{k-1,1} ⊗ iota_{1,m-1})`, so `Pi` projects onto
    /// the range of its adjoint.
    pub fn pi(&self, k: usize, m: usize) -> Result<Arc<Mat>> {
        let top = self.top();
        if k > top || m > top {
            return Err(range_err(k.max(m), top));
        }
        cached(&self.pis, (k, m), || {
            let size = self.dim(k) * self.dim(m);
            if k == 0 || m == 0 {
                return Ok(Mat::zeros(size, size));
            }
            let sys = self.system();
            let d1 = sys.dim(1);
            let a = sys.inclusion(k - 1, 1)?;
            let b = sys.inclusion(1, m - 1)?;
            let delta = self.fm.delta();
            let (p, q) = (self.dim(k - 1), self.dim(m - 1));
            let mut junction = Mat::zeros(p * q, size);
            for i in 0..d1 {
                let ai = Mat::from_fn(p, a.ncols(), |x, c| a[(x * d1 + i, c)]);
                for l in 0..d1 {
                    let w = delta[(i * d1 + l, 0)].conj();
                    if w.norm() == 0.0 {
                        continue;
                    }
                    let bl = b.rows(l * q, q).into_owned();
                    junction += kron(&ai, &bl) * w;
                }
            }
            Ok(projector(&onb_of_span(&junction.adjoint(), RANK_TOL)))
        })
    }

    /// `Gamma_{k,m} = (v^TB)* v^TB`.
    pub fn gamma(&self, k: usize, m: usize) -> Result<Mat> {
        let v = self.block(Entry::TB, k, m)?;
        Ok(mul_ah(&v, &v))
    }

    /// `Delta_{k,m} = (v^BT)* v^BT`.
    pub fn delta(&self, k: usize, m: usize) -> Result<Mat> {
        let v = self.block(Entry::BT, k, m)?;
        Ok(mul_ah(&v, &v))
    }

    /// `Theta = v^TB Gamma^{-1/2} : E_k ⊗ E_m -> E_{k+1} ⊗ E_{m+1}`.
    pub fn theta(&self, k: usize, m: usize) -> Result<Mat> {
        let v = self.block(Entry::TB, k, m)?;
        let g = mul_ah(&v, &v);
        let floor = 1e-12;
        let inv = hermitian_fn(&g, |l| if l > floor { 1.0 / l.sqrt() } else { 0.0 });
        Ok(mul(&v, &inv))
    }

    fn layout(&self, total: usize) -> Result<SectorLayout> {
        if total > self.top() {
            return Err(range_err(total, self.top()));
        }
        Ok(SectorLayout::new(total, |m| self.dim(m)))
    }

    /// Largest sector whose blocks are all available.
    pub fn max_sector(&self) -> usize {
        self.top()
    }

    /// Dense matrix from a slot-to-slot prescription.
    fn assemble(
        &self,
        from: &SectorLayout,
        to: &SectorLayout,
        f: impl Fn(&Slot) -> Result<Vec<(Half, isize, isize, Mat)>>,
    ) -> Result<Mat> {
        let mut out = Mat::zeros(to.dim, from.dim);
        for s in &from.slots {
            for (half, k, m, b) in f(s)? {
                if k < 0 || m < 0 {
                    continue;
                }
                let t = to.find(half, k as usize, m as usize).ok_or_else(|| {
                    Error::Consistency(format!("target ({k},{m}) missing from sector"))
                })?;
                let mut view = out.view_mut((t.offset, s.offset), (t.size, s.size));
                view += b;
            }
        }
        Ok(out)
    }

    fn diagonal(
        &self,
        layout: &SectorLayout,
        f: impl Fn(&Slot) -> Result<Option<Mat>>,
    ) -> Result<Mat> {
        self.assemble(layout, layout, |s| {
            Ok(f(s)?
                .map(|b| vec![(s.half, s.k as isize, s.m as isize, b)])
                .unwrap_or_default())
        })
    }

    /// `[[sqrt(a) v^TT, v^TB], [v^BT, sqrt(a) v^BB]]` on sector `total`;
    /// `a = 1` gives `W`.
    fn sector_w_scaled(&self, total: usize, a: f64) -> Result<Mat> {
        let l = self.layout(total)?;
        let sa = a.sqrt();
        self.assemble(&l, &l, |s| {
            let (k, m) = (s.k as isize, s.m as isize);
            let mut v = Vec::new();
            match s.half {
                Half::Top => {
                    if s.k >= 1 {
                        v.push((
                            Half::Top,
                            k - 1,
                            m + 1,
                            &*self.block(Entry::TT, s.k, s.m)? * re(sa),
                        ));
                        if s.m >= 1 {
                            v.push((
                                Half::Bottom,
                                k - 1,
                                m - 1,
                                (*self.block(Entry::BT, s.k, s.m)?).clone(),
                            ));
                        }
                    }
                }
                Half::Bottom => {
                    v.push((
                        Half::Top,
                        k + 1,
                        m + 1,
                        (*self.block(Entry::TB, s.k, s.m)?).clone(),
                    ));
                    if s.m >= 1 {
                        v.push((
                            Half::Bottom,
                            k + 1,
                            m - 1,
                            &*self.block(Entry::BB, s.k, s.m)? * re(sa),
                        ));
                    }
                }
            }
            Ok(v)
        })
    }

    /// `W` on sector `total`.
    pub fn sector_w(&self, total: usize) -> Result<Mat> {
        self.sector_w_scaled(total, 1.0)
    }

    /// `p_R = (Q_0 ⊗ 1) ⊕ 0` and `p_L = (1 ⊗ Q_0) ⊕ 0`.
    fn sector_p_lr(&self, total: usize) -> Result<(Mat, Mat)> {
        let l = self.layout(total)?;
        let pick = |want: fn(&Slot) -> bool| {
            self.diagonal(&l, |s| {
                Ok((s.half == Half::Top && want(s)).then(|| eye(s.size)))
            })
        };
        Ok((pick(|s| s.k == 0)?, pick(|s| s.m == 0)?))
    }

    /// `1 - P = (1 - Pi) ⊕ 0`.
    fn sector_one_minus_p(&self, total: usize) -> Result<Mat> {
        let l = self.layout(total)?;
        self.diagonal(&l, |s| {
            Ok(match s.half {
                Half::Top => Some(eye(s.size) - &*self.pi(s.k, s.m)?),
                Half::Bottom => None,
            })
        })
    }

    /// `Sigma (Q_0 ⊗ 1) ⊕ 0`: the flip from `E_0 ⊗ E_N` to `E_N ⊗ E_0`.
    fn sector_flip(&self, total: usize) -> Result<Mat> {
        let l = self.layout(total)?;
        self.assemble(&l, &l, |s| {
            Ok(if s.half == Half::Top && s.k == 0 {
                vec![(Half::Top, total as isize, 0, eye(s.size))]
            } else {
                vec![]
            })
        })
    }

    /// `x ⊗ 1` with `x` acting on the first factor of both halves; `shift` is
    /// the degree change of `x` and `blk(p)` its block on `E_p`.
    fn sector_first_factor(
        &self,
        total: usize,
        shift: isize,
        blk: impl Fn(usize) -> Result<Option<Mat>>,
    ) -> Result<Mat> {
        let from = self.layout(total)?;
        let to = self.layout((total as isize + shift) as usize)?;
        self.assemble(&from, &to, |s| {
            Ok(match blk(s.k)? {
                Some(x) => vec![(
                    s.half,
                    s.k as isize + shift,
                    s.m as isize,
                    kron(&x, &eye(self.dim(s.m))),
                )],
                None => vec![],
            })
        })
    }

    /// `psi_+(T_j) ⊗ 1` from sector `total` to `total + 1`.
    fn sector_psi_plus(&self, j: usize, total: usize) -> Result<Mat> {
        let sys = self.system();
        self.sector_first_factor(total, 1, |p| {
            toeplitz_block(sys, j, p, Side::Left).map(Some)
        })
    }

    /// `psi_+(T_j*) ⊗ 1` from sector `total` to `total - 1`.
    fn sector_psi_plus_star(&self, j: usize, total: usize) -> Result<Mat> {
        let sys = self.system();
        self.sector_first_factor(total, -1, |p| {
            if p == 0 {
                Ok(None)
            } else {
                toeplitz_block(sys, j, p - 1, Side::Left).map(|t| Some(t.adjoint()))
            }
        })
    }

    /// `1 ⊗ T_j*` on the second factor, from sector `total` to `total - 1`.
    fn sector_second_star(&self, j: usize, total: usize) -> Result<Mat> {
        let sys = self.system();
        let from = self.layout(total)?;
        let to = self.layout(total - 1)?;
        self.assemble(&from, &to, |s| {
            if s.m == 0 {
                return Ok(vec![]);
            }
            let t = toeplitz_block(sys, j, s.m - 1, Side::Left)?.adjoint();
            Ok(vec![(
                s.half,
                s.k as isize,
                s.m as isize - 1,
                kron(&eye(self.dim(s.k)), &t),
            )])
        })
    }

    /// `psi_-(T_j) ⊗ 1 = W_R (T_j ⊗ 1) W_R* ⊗ 1` from sector `total` to
    /// `total + 1`, with `W_R = [iota_R*; V_R*]`.
    fn sector_psi_minus(&self, j: usize, total: usize) -> Result<Mat> {
        let sys = self.system();
        let d1 = sys.dim(1);
        let from = self.layout(total)?;
        let to = self.layout(total + 1)?;
        // T_j ⊗ 1_{E_1} on E_p ⊗ E_1.
        let tj1 = |p: usize| -> Result<Mat> {
            Ok(kron(&toeplitz_block(sys, j, p, Side::Left)?, &eye(d1)))
        };
        self.assemble(&from, &to, |s| {
            let (k, m) = (s.k, s.m);
            let id = eye(self.dim(m));
            let mut v = Vec::new();
            match s.half {
                Half::Top if k >= 1 => {
                    let lifted = mul(&tj1(k - 1)?, &sys.inclusion(k - 1, 1)?);
                    let tt = mul(sys.coisometry(k, 1)?, &lifted);
                    let bt = mul_ah(&self.fm.vee(k, Side::Right)?, &lifted);
                    v.push((Half::Top, k as isize + 1, m as isize, kron(&tt, &id)));
                    v.push((Half::Bottom, k as isize - 1, m as isize, kron(&bt, &id)));
                }
                Half::Top => {}
                Half::Bottom => {
                    let lifted = mul(&tj1(k + 1)?, &self.fm.vee(k + 1, Side::Right)?);
                    let tb = mul(sys.coisometry(k + 2, 1)?, &lifted);
                    let bb = mul_ah(&self.fm.vee(k + 2, Side::Right)?, &lifted);
                    v.push((Half::Top, k as isize + 3, m as isize, kron(&tb, &id)));
                    v.push((Half::Bottom, k as isize + 1, m as isize, kron(&bb, &id)));
                }
            }
            Ok(v)
        })
    }

    /// `y_t = (1 - P) - A_t P` with `A_t` the entries of `W`, diagonal ones
    /// scaled by `(1-t)^{1/2}`.
    fn sector_y(&self, total: usize, t: f64) -> Result<Mat> {
        let omp = self.sector_one_minus_p(total)?;
        let p = eye(omp.nrows()) - &omp;
        let a = self.sector_w_scaled(total, 1.0 - t)?;
        Ok(&omp - mul(&a, &p))
    }

    /// `U_t` from the dense inverse of `1 - cos(t) W*`.
    fn sector_u(&self, total: usize, t: f64) -> Result<Mat> {
        let w = self.sector_w(total)?;
        let (pr, pl) = self.sector_p_lr(total)?;
        let (c, s) = (t.cos(), t.sin());
        let dim = w.nrows();
        let inv = (eye(dim) - w.adjoint() * re(c))
            .try_inverse()
            .ok_or(Error::Singular(0.0))?;
        let left = &pl + mul(&w, &w.adjoint()) * re(s);
        let right = &pr + mul_ah(&w, &w) * re(s);
        Ok(mul(&left, &mul(&inv, &right)) - &w * re(c))
    }

    /// `U_t (1 - P)` with the inverse replaced by the finite sum
    /// `sum_{j<=N+1} (cos t W*)^j`, exact because `W*` shifts
    /// `iota_{k,m}(xi)` to `iota_{k+1,m-1}(xi)`. At `t = 0` this is the
    /// flip part of `H_0`.
    fn sector_u_range(&self, total: usize, t: f64) -> Result<Mat> {
        let w = self.sector_w(total)?;
        let omp = self.sector_one_minus_p(total)?;
        let (pr, pl) = self.sector_p_lr(total)?;
        let (c, s) = (t.cos(), t.sin());
        let wstar = w.adjoint() * re(c);
        let mut term = mul(&(&pr + mul_ah(&w, &w) * re(s)), &omp);
        let mut acc = term.clone();
        for _ in 0..=total {
            term = mul(&wstar, &term);
            acc += &term;
        }
        let left = &pl + mul(&w, &w.adjoint()) * re(s);
        Ok(mul(&left, &acc) - mul(&w, &omp) * re(c))
    }

    /// `H_t = U_t (1 - P) - W P`; `H_0 = -W + Sigma(Q_0 ⊗ 1) ⊕ 0`.
    fn sector_h(&self, total: usize, t: f64) -> Result<Mat> {
        let w = self.sector_w(total)?;
        let omp = self.sector_one_minus_p(total)?;
        let p = eye(omp.nrows()) - &omp;
        Ok(self.sector_u_range(total, t)? - mul(&w, &p))
    }

    fn sector_h0(&self, total: usize) -> Result<Mat> {
        Ok(self.sector_flip(total)? - self.sector_w(total)?)
    }

    fn sector_i(&self, total: usize, t: f64) -> Result<Mat> {
        let y = self.sector_y(total, t)?;
        let g = mul_ah(&y, &y);
        Ok(mul(&y, &hermitian_fn(&g, |l| 1.0 / l.max(1e-300).sqrt())))
    }

    /// `[[1 - Pi, -Theta], [-Theta*, 0]]`, the polar part of `y_1`.
    fn sector_i1_expected(&self, total: usize) -> Result<Mat> {
        let l = self.layout(total)?;
        let omp = self.sector_one_minus_p(total)?;
        let off = self.assemble(&l, &l, |s| {
            let (k, m) = (s.k as isize, s.m as isize);
            Ok(match s.half {
                Half::Bottom => vec![(Half::Top, k + 1, m + 1, -self.theta(s.k, s.m)?)],
                Half::Top if s.k >= 1 && s.m >= 1 => vec![(
                    Half::Bottom,
                    k - 1,
                    m - 1,
                    -self.theta(s.k - 1, s.m - 1)?.adjoint(),
                )],
                Half::Top => vec![],
            })
        })?;
        Ok(omp + off)
    }

    /// Closed form of `y_t* y_t`:
    /// `[(1 - Pi) + ((1-t) + t Delta) Pi] ⊕ [(1-t) + t Gamma]`.
    fn sector_y_gram_expected(&self, total: usize, t: f64) -> Result<Mat> {
        let l = self.layout(total)?;
        self.diagonal(&l, |s| {
            let id = eye(s.size);
            Ok(Some(match s.half {
                Half::Top => {
                    let pi = self.pi(s.k, s.m)?;
                    let delta = if s.k >= 1 && s.m >= 1 {
                        self.delta(s.k, s.m)?
                    } else {
                        Mat::zeros(s.size, s.size)
                    };
                    let inner = &id * re(1.0 - t) + delta * re(t);
                    &id - &*pi + mul(&inner, &pi)
                }
                Half::Bottom => &id * re(1.0 - t) + self.gamma(s.k, s.m)? * re(t),
            }))
        })
    }

    /// Evaluate a homotopy path on sectors `0..=max_sector`.
    pub fn homotopy_path(&self, which: Path, t: f64, max_sector: usize) -> Result<SectorOperator> {
        let ok = match which {
            Path::U => t > 0.0 && t <= FRAC_PI_2,
            Path::H => (0.0..=FRAC_PI_2).contains(&t),
            Path::Y | Path::I => (0.0..=1.0).contains(&t),
        };
        if !ok {
            return Err(Error::Unsupported(format!(
                "t = {t} outside the parameter interval of {which:?}"
            )));
        }
        let mut layouts = BTreeMap::new();
        let mut blocks = BTreeMap::new();
        for total in 0..=max_sector {
            let m = match which {
                Path::U => self.sector_u(total, t)?,
                Path::H if t == 0.0 => self.sector_h0(total)?,
                Path::H => self.sector_h(total, t)?,
                Path::Y => self.sector_y(total, t)?,
                Path::I => self.sector_i(total, t)?,
            };
            layouts.insert(total, self.layout(total)?);
            blocks.insert(total, m);
        }
        Ok(SectorOperator { layouts, blocks })
    }
}

/// Range and tolerance settings for [`certify`].
#[derive(Clone, Debug)]
pub struct CertifyConfig {
    pub kmax: usize,
    pub mmax: usize,
    /// Largest total-degree sector for the homotopy checks.
    pub max_sector: usize,
    pub tol: f64,
    /// Tolerance for the partial-isometry defects and the exact endpoint
    /// identities.
    pub exact_tol: f64,
    pub lambdas: Vec<f64>,
}

impl CertifyConfig {
    /// Ranges for a system of maximal degree `top`: blocks up to
    /// `(top - 2, top - 2)` and sectors up to `top - 1`.
    pub fn for_degree(top: usize) -> Self {
        let b = top.saturating_sub(2);
        CertifyConfig {
            kmax: b,
            mmax: b,
            max_sector: top.saturating_sub(1),
            tol: 1e-9,
            exact_tol: 1e-10,
            lambdas: lambda_grid(),
        }
    }
}

/// `{10^-6, 10^-5, ..., 1}`.
pub fn lambda_grid() -> Vec<f64> {
    (0..=6).map(|e| 10f64.powi(e - 6)).collect()
}

/// `(W, P)` parameter grids used by the homotopy checks.
const T_ANGLES: [f64; 4] = [0.125, 0.25, 0.375, 0.5];
const T_UNIT: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

fn rep(name: &str, residual: f64, tol: f64, n: usize) -> IdentityReport {
    IdentityReport::new(name, residual, tol).with("n", n)
}

/// Route cross-check and adjoint relations of the entries of `W`, plus the
/// scalar relation between `v^TB` and `sigma_{k,m}`.
pub fn check_douu(
    kb: &KkBlocks,
    kmax: usize,
    mmax: usize,
    tol: f64,
) -> Result<Vec<IdentityReport>> {
    let n = kb.n();
    let sys = kb.system();
    let top = sys.max_degree();
    let mut out = Vec::new();
    for k in 0..=kmax {
        for m in 0..=mmax {
            for e in Entry::ALL {
                let a = kb.block(e, k, m)?;
                let b = kb.block_via_toeplitz(e, k, m)?;
                out.push(
                    rep("kk_w_routes", op_norm(&(&*a - b)), tol, n)
                        .with("entry", e.name())
                        .with("k", k)
                        .with("m", m),
                );
            }
            if k >= 1 && m >= 1 {
                let s = (kb.phi(m - 1) / kb.phi(k - 1)).sqrt();
                let rhs = kb.block(Entry::TB, k - 1, m - 1)?.adjoint() * re(s);
                out.push(
                    rep(
                        "kk_adjoint_bt",
                        op_norm(&(&*kb.block(Entry::BT, k, m)? - rhs)),
                        tol,
                        n,
                    )
                    .with("k", k)
                    .with("m", m),
                );
            }
            if m >= 1 {
                let s = parity(n) * (kb.phi(m - 1) * kb.phi(k)).sqrt();
                let rhs = kb.block(Entry::TT, k + 1, m - 1)?.adjoint() * re(s);
                out.push(
                    rep(
                        "kk_adjoint_bb",
                        op_norm(&(&*kb.block(Entry::BB, k, m)? - rhs)),
                        tol,
                        n,
                    )
                    .with("k", k)
                    .with("m", m),
                );
            }
            if k + m + 2 <= top {
                let sigma = kb.fusion().sigma(k, m)?;
                let s = parity((n + 1) * k) / kb.dims().mu(k + 1).sqrt();
                out.push(
                    rep(
                        "kk_tb_sigma",
                        op_norm(&(&*kb.block(Entry::TB, k, m)? - sigma * re(s))),
                        tol,
                        n,
                    )
                    .with("k", k)
                    .with("m", m),
                );
            }
        }
    }
    // 1 - W_R* W_R is the rank-one projection onto the vacuum of the top
    // copy: V_R is isometric, orthogonal to the range of iota_R, and the two
    // ranges fill E_{k+1} ⊗ E_1.
    for k in 0..=kmax {
        let v = kb.fusion().vee(k + 1, Side::Right)?;
        let mut res = op_norm(&(mul_ah(&v, &v) - eye(v.ncols())));
        if k + 2 <= top {
            res = res.max(op_norm(&mul(sys.coisometry(k + 1, 1)?, &v)));
            let ii = sys.inclusion(k + 1, 1)?;
            let fill = mul(&ii, &ii.adjoint()) + mul(&v, &v.adjoint());
            res = res.max(op_norm(&(fill - eye(v.nrows()))));
        }
        out.push(rep("kk_wr_defect", res, tol, n).with("k", k));
    }
    Ok(out)
}

/// Spectra of `Gamma` and `Delta` against their closed forms, the norm of
/// `Gamma`, the kernel of `Delta` and the inverse bound on `Delta Pi`.
pub fn check_gamma_delta(
    kb: &KkBlocks,
    kmax: usize,
    mmax: usize,
    tol: f64,
) -> Result<Vec<IdentityReport>> {
    let n = kb.n();
    let d = kb.dims();
    let sys = kb.system();
    let mut out = Vec::new();
    for k in 0..=kmax {
        for m in 0..=mmax {
            let g = kb.gamma(k, m)?;
            let spec = spectrum(&g);
            let expect = closed_spectrum(d, k, m, |j| gamma_eigenvalue(d, k, m, j));
            out.push(
                rep(
                    "kk_gamma_spectrum",
                    spectrum_residual(&spec, &expect),
                    tol,
                    n,
                )
                .with("k", k)
                .with("m", m),
            );
            let l = k.min(m);
            out.push(
                rep(
                    "kk_gamma_norm",
                    (op_norm(&g) - gamma_eigenvalue(d, k, m, l)).abs(),
                    tol,
                    n,
                )
                .with("k", k)
                .with("m", m),
            );
            for j in 0..=l {
                if let Ok(w) = kb.fusion().fusion_component(k, m, j) {
                    let res = op_norm(&(mul(&g, &w) - &w * re(gamma_eigenvalue(d, k, m, j))));
                    out.push(
                        rep("kk_gamma_component", res, tol, n)
                            .with("j", j)
                            .with("k", k)
                            .with("m", m),
                    );
                }
            }

            let dl = kb.delta(k, m)?;
            let spec = spectrum(&dl);
            let expect = closed_spectrum(d, k, m, |j| delta_eigenvalue(d, k, m, j));
            out.push(
                rep(
                    "kk_delta_spectrum",
                    spectrum_residual(&spec, &expect),
                    tol,
                    n,
                )
                .with("k", k)
                .with("m", m),
            );
            let pi = kb.pi(k, m)?;
            let comp = eye(pi.nrows()) - &*pi;
            out.push(
                rep("kk_delta_kernel", op_norm(&mul(&dl, &comp)), tol, n)
                    .with("k", k)
                    .with("m", m),
            );
            if k + m <= sys.max_degree() {
                let direct = eye(pi.nrows()) - sys.range_projector(k, m)?;
                out.push(
                    rep("kk_pi_routes", op_norm(&(&*pi - direct)), tol, n)
                        .with("k", k)
                        .with("m", m),
                );
            }
            if k >= 1 && m >= 1 {
                let min = min_on_range(&dl, &pi);
                let (ki, mi) = (k as isize, m as isize);
                let closed = d.d(ki - 1) * d.d(mi)
                    / (d.d(ki) * d.d(mi - 1))
                    / (1.0 - d.d(ki - 1) * d.d(mi - 2) / (d.d(ki) * d.d(mi - 1)));
                out.push(
                    rep(
                        "kk_delta_inverse",
                        (1.0 / min - closed).abs(),
                        tol * closed.max(1.0),
                        n,
                    )
                    .with("k", k)
                    .with("m", m),
                );
                let bound = d.d(1) / (d.d(ki) / d.d(ki - 1) - 1.0);
                out.push(
                    IdentityReport::new("kk_delta_inverse_bound", 1.0 / min, bound + tol)
                        .with("n", n)
                        .with("k", k)
                        .with("m", m),
                );
            }
        }
    }
    Ok(out)
}

/// Smallest eigenvalue of `a` compressed to the range of the projector `p`.
fn min_on_range(a: &Mat, p: &Mat) -> f64 {
    let q = onb_of_span(p, 1e-8);
    if q.ncols() == 0 {
        return f64::INFINITY;
    }
    spectrum(&mul_ah(&q, &mul(a, &q)))[0]
}

/// `Theta* Theta = 1` and `Theta Theta* = Pi`, i.e.
/// `Theta Theta* + iota iota* = 1` on `E_{k+1} ⊗ E_{m+1}`.
pub fn check_theta(
    kb: &KkBlocks,
    kmax: usize,
    mmax: usize,
    tol: f64,
) -> Result<Vec<IdentityReport>> {
    let n = kb.n();
    let mut out = Vec::new();
    for k in 0..=kmax {
        for m in 0..=mmax {
            let th = kb.theta(k, m)?;
            out.push(
                rep(
                    "kk_theta_isometry",
                    op_norm(&(mul_ah(&th, &th) - eye(th.ncols()))),
                    tol,
                    n,
                )
                .with("k", k)
                .with("m", m),
            );
            let pi = kb.pi(k + 1, m + 1)?;
            out.push(
                rep(
                    "kk_theta_range",
                    op_norm(&(mul(&th, &th.adjoint()) - &*pi)),
                    tol,
                    n,
                )
                .with("k", k)
                .with("m", m),
            );
        }
    }
    Ok(out)
}

/// Observed suprema behind the resolvent bounds.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResolventSup {
    pub lambda: f64,
    /// `sup_{k,m} ‖d_k^{-1} (lambda + Gamma_{k,m})^{-1}‖`.
    pub gamma: f64,
    /// `sup_{k,m >= 1} ‖d_k^{-1} (lambda + Delta_{k,m} Pi)^{-1}‖` on `Pi`.
    pub delta: f64,
}

pub fn resolvent_sups(
    kb: &KkBlocks,
    kmax: usize,
    mmax: usize,
    lambdas: &[f64],
) -> Result<Vec<ResolventSup>> {
    let d = kb.dims();
    let mut mins = Vec::new();
    for k in 0..=kmax {
        for m in 0..=mmax {
            let g = spectrum(&kb.gamma(k, m)?)[0];
            let dl = if k >= 1 && m >= 1 {
                Some(min_on_range(&kb.delta(k, m)?, &*kb.pi(k, m)?))
            } else {
                None
            };
            mins.push((d.d(k as isize), g, dl));
        }
    }
    Ok(lambdas
        .iter()
        .map(|&lambda| {
            let mut s = ResolventSup {
                lambda,
                gamma: 0.0,
                delta: 0.0,
            };
            for &(dk, g, dl) in &mins {
                s.gamma = s.gamma.max(1.0 / (dk * (lambda + g)));
                if let Some(dl) = dl {
                    s.delta = s.delta.max(1.0 / (dk * (lambda + dl)));
                }
            }
            s
        })
        .collect())
}

/// The bounds `n + 1` (Gamma) and `(n + 1) gamma_n` (Delta) over the grid,
/// and monotone decay in `lambda`.
pub fn resolvent_bounds(
    kb: &KkBlocks,
    kmax: usize,
    mmax: usize,
    lambdas: &[f64],
) -> Result<Vec<IdentityReport>> {
    let n = kb.n();
    let sups = resolvent_sups(kb, kmax, mmax, lambdas)?;
    let g = sups.iter().map(|s| s.gamma).fold(0.0, f64::max);
    let dl = sups.iter().map(|s| s.delta).fold(0.0, f64::max);
    let nf = (n + 1) as f64;
    let mut sorted = sups.clone();
    sorted.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    let rise = sorted
        .windows(2)
        .map(|w| (w[1].gamma - w[0].gamma).max(w[1].delta - w[0].delta))
        .fold(0.0, f64::max);
    Ok(vec![
        IdentityReport::new("kk_resolvent_gamma", g, nf)
            .with("n", n)
            .with("kmax", kmax)
            .with("mmax", mmax),
        IdentityReport::new("kk_resolvent_delta", dl, nf * gamma(n) + 1e-12)
            .with("n", n)
            .with("kmax", kmax)
            .with("mmax", mmax),
        IdentityReport::new("kk_resolvent_monotone", rise, 0.0).with("n", n),
    ])
}

/// Sector identities: partial-isometry defects, `[W, P] = 0`, the
/// intertwining relation, unitarity along the paths and the endpoint
/// identities.
pub fn check_sectors(
    kb: &KkBlocks,
    max_sector: usize,
    tol: f64,
    exact_tol: f64,
) -> Result<Vec<IdentityReport>> {
    let n = kb.n();
    let top = kb.max_sector();
    if max_sector > top {
        return Err(range_err(max_sector, top));
    }
    let mut out = Vec::new();
    for total in 0..=max_sector {
        let r = |name: &str, res: f64, tol: f64| rep(name, res, tol, n).with("N", total);
        let w = kb.sector_w(total)?;
        let id = eye(w.nrows());
        let (pr, pl) = kb.sector_p_lr(total)?;
        out.push(r(
            "kk_defect_left",
            op_norm(&(&id - mul(&w, &w.adjoint()) - &pl)),
            exact_tol,
        ));
        out.push(r(
            "kk_defect_right",
            op_norm(&(&id - mul_ah(&w, &w) - &pr)),
            exact_tol,
        ));
        let omp = kb.sector_one_minus_p(total)?;
        out.push(r(
            "kk_w_commutes_p",
            op_norm(&(mul(&w, &omp) - mul(&omp, &w))),
            tol,
        ));

        if total < top {
            let w_up = kb.sector_w(total + 1)?;
            for j in 0..=n {
                let lhs = mul_ah(&w_up, &mul(&kb.sector_psi_plus(j, total)?, &w));
                let rhs = kb.sector_psi_minus(j, total)?;
                out.push(r("kk_intertwining", op_norm(&(lhs - rhs)), tol).with("j", j));
            }
        }

        let h0 = kb.sector_h0(total)?;
        out.push(r("kk_h0_unitary", unitarity(&h0), tol));
        out.push(r(
            "kk_h0_limit",
            op_norm(&(kb.sector_h(total, 0.0)? - &h0)),
            tol,
        ));
        for f in T_ANGLES {
            let t = f * std::f64::consts::PI;
            let u = kb.sector_u(total, t)?;
            out.push(r("kk_ut_unitary", unitarity(&u), tol).with("t", t));
            let neumann = kb.sector_u_range(total, t)?;
            out.push(r("kk_ut_neumann", op_norm(&(mul(&u, &omp) - neumann)), tol).with("t", t));
            out.push(r("kk_ht_unitary", unitarity(&kb.sector_h(total, t)?), tol).with("t", t));
        }
        let u = kb.sector_u(total, FRAC_PI_2)?;
        out.push(r("kk_u_half_pi_identity", op_norm(&(u - &id)), exact_tol));

        for t in T_UNIT {
            let y = kb.sector_y(total, t)?;
            let gram = kb.sector_y_gram_expected(total, t)?;
            out.push(r("kk_y_gram", op_norm(&(mul_ah(&y, &y) - gram)), tol).with("t", t));
            out.push(r("kk_it_unitary", unitarity(&kb.sector_i(total, t)?), tol).with("t", t));
        }
        let h_half = kb.sector_h(total, FRAC_PI_2)?;
        let y0 = kb.sector_y(total, 0.0)?;
        let i0 = kb.sector_i(total, 0.0)?;
        out.push(r(
            "kk_i0_h_half_pi",
            op_norm(&(&i0 - &h_half)).max(op_norm(&(&y0 - &h_half))),
            exact_tol,
        ));
        let y1 = kb.sector_y(total, 1.0)?;
        let floor = spectrum(&mul_ah(&y1, &y1)).first().copied().unwrap_or(1.0);
        out.push(
            IdentityReport::new("kk_y1_positive", (tol - floor).max(0.0), 0.0)
                .with("n", n)
                .with("N", total)
                .with("min_eig", floor),
        );
        let i1 = kb.sector_i(total, 1.0)?;
        out.push(r(
            "kk_i1_form",
            op_norm(&(i1 - kb.sector_i1_expected(total)?)),
            tol,
        ));

        if total >= 1 {
            let omp_n = omp.clone();
            let (pr_lo, _) = kb.sector_p_lr(total - 1)?;
            let w_lo = kb.sector_w(total - 1)?;
            for j in 0..=n {
                let x = kb.sector_psi_plus_star(j, total)?;
                let y = kb.sector_second_star(j, total)?;
                for t in [0.0, 0.25 * std::f64::consts::PI, FRAC_PI_2] {
                    let (h_lo, h) = if t == 0.0 {
                        (kb.sector_h0(total - 1)?, kb.sector_h0(total)?)
                    } else {
                        (kb.sector_h(total - 1, t)?, kb.sector_h(total, t)?)
                    };
                    let lhs = mul_ah(&h_lo, &mul(&x, &mul(&h, &omp_n)));
                    let rhs = mul(
                        &(mul_ah(&w_lo, &w_lo) + &pr_lo * re(t.sin())),
                        &mul(&x, &omp_n),
                    ) + mul(&y, &pr) * re(t.cos());
                    out.push(
                        r("kk_cont_op_norm", op_norm(&(lhs - rhs)), tol)
                            .with("j", j)
                            .with("t", t),
                    );
                }
            }
        }
    }
    Ok(out)
}

fn unitarity(u: &Mat) -> f64 {
    let id = eye(u.nrows());
    op_norm(&(mul_ah(u, u) - &id)).max(op_norm(&(mul(u, &u.adjoint()) - &id)))
}

/// Per first-factor degree `k`: the largest block norm of
/// `[psi_+(T_j*) ⊗ 1, W]` and of `[T_j* ⊗ 1, Pi]` over `j` and the sectors
/// up to `max_sector`. Only `k <= max_sector - 2` is reported: larger `k`
/// has no bottom-half slots inside the sector range.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CommutatorEntry {
    pub k: usize,
    pub w_commutator: f64,
    pub pi_commutator: f64,
}

pub fn commutator_profile(kb: &KkBlocks, max_sector: usize) -> Result<Vec<CommutatorEntry>> {
    let n = kb.n();
    let mut w_by_k: BTreeMap<usize, f64> = BTreeMap::new();
    let mut pi_by_k: BTreeMap<usize, f64> = BTreeMap::new();
    for total in 1..=max_sector {
        let from = kb.layout(total)?;
        let to = kb.layout(total - 1)?;
        let w = kb.sector_w(total)?;
        let w_lo = kb.sector_w(total - 1)?;
        let pi = eye(w.nrows()) - kb.sector_one_minus_p(total)?;
        let pi_lo = eye(w_lo.nrows()) - kb.sector_one_minus_p(total - 1)?;
        for j in 0..=n {
            let x = kb.sector_psi_plus_star(j, total)?;
            let cw = mul(&x, &w) - mul(&w_lo, &x);
            let cp = mul(&x, &pi) - mul(&pi_lo, &x);
            for s in &from.slots {
                for t in &to.slots {
                    let bw = op_norm(&cw.view((t.offset, s.offset), (t.size, s.size)).into_owned());
                    let e = w_by_k.entry(s.k).or_insert(0.0);
                    *e = e.max(bw);
                    if s.half == Half::Top && t.half == Half::Top {
                        let bp =
                            op_norm(&cp.view((t.offset, s.offset), (t.size, s.size)).into_owned());
                        let e = pi_by_k.entry(s.k).or_insert(0.0);
                        *e = e.max(bp);
                    }
                }
            }
        }
    }
    let kmax = max_sector.saturating_sub(2);
    Ok(w_by_k
        .into_iter()
        .filter(|&(k, _)| k <= kmax)
        .map(|(k, w)| CommutatorEntry {
            k,
            w_commutator: w,
            pi_commutator: pi_by_k.get(&k).copied().unwrap_or(0.0),
        })
        .collect())
}

/// Decay of the commutators in `k` and the weighted bound
/// `d_k ‖[psi_+(T_j*) ⊗ 1, W]‖ <= sqrt 2`.
pub fn check_commutators(
    kb: &KkBlocks,
    max_sector: usize,
    tol: f64,
) -> Result<Vec<IdentityReport>> {
    let n = kb.n();
    let d = kb.dims();
    let prof = commutator_profile(kb, max_sector)?;
    let mut out = Vec::new();
    let weighted = prof
        .iter()
        .map(|e| d.d(e.k as isize) * e.w_commutator)
        .fold(0.0, f64::max);
    out.push(IdentityReport::new("kk_commutator_weighted", weighted, SQRT_2 + tol).with("n", n));
    let rise = |f: fn(&CommutatorEntry) -> f64| {
        prof.iter()
            .filter(|e| e.k >= 1)
            .collect::<Vec<_>>()
            .windows(2)
            .map(|w| f(w[1]) - f(w[0]))
            .fold(0.0, f64::max)
    };
    out.push(
        IdentityReport::new("kk_commutator_decay", rise(|e| e.w_commutator), tol).with("n", n),
    );
    out.push(
        IdentityReport::new("kk_pi_commutator_decay", rise(|e| e.pi_commutator), tol).with("n", n),
    );
    Ok(out)
}

/// All block certificates for one system.
pub fn certify(sys: &SubproductSystem, cfg: &CertifyConfig) -> Result<Vec<IdentityReport>> {
    let kb = KkBlocks::new(sys)?;
    let mut out = check_douu(&kb, cfg.kmax, cfg.mmax, cfg.tol)?;
    out.extend(check_gamma_delta(&kb, cfg.kmax, cfg.mmax, cfg.tol)?);
    out.extend(check_theta(&kb, cfg.kmax, cfg.mmax, cfg.tol)?);
    out.extend(resolvent_bounds(&kb, cfg.kmax, cfg.mmax, &cfg.lambdas)?);
    out.extend(check_sectors(&kb, cfg.max_sector, cfg.tol, cfg.exact_tol)?);
    out.extend(check_commutators(&kb, cfg.max_sector, cfg.tol)?);
    Ok(out)
}

/// The four entries of `W` on `k <= kmax`, `m <= mmax`, in the order
/// `(v^TT, v^TB, v^BT, v^BB)`.
pub fn douu_blocks(
    sys: &SubproductSystem,
    kmax: usize,
    mmax: usize,
) -> Result<[BiGradedOperator; 4]> {
    let kb = KkBlocks::new(sys)?;
    Ok([
        kb.douu(Entry::TT, kmax, mmax)?,
        kb.douu(Entry::TB, kmax, mmax)?,
        kb.douu(Entry::BT, kmax, mmax)?,
        kb.douu(Entry::BB, kmax, mmax)?,
    ])
}

/// `(Gamma_{k,m}, Delta_{k,m})`.
pub fn gamma_delta(sys: &SubproductSystem, k: usize, m: usize) -> Result<(Mat, Mat)> {
    let kb = KkBlocks::new(sys)?;
    Ok((kb.gamma(k, m)?, kb.delta(k, m)?))
}

pub fn theta_block(sys: &SubproductSystem, k: usize, m: usize) -> Result<Mat> {
    KkBlocks::new(sys)?.theta(k, m)
}

/// `1_C - [L_n] + [det]` as integers.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EulerClass {
    pub terms: [i64; 3],
    pub total: i64,
    /// Dimension of the invariant subspace of `rho_n ⊗ rho_n`.
    pub det_dim: usize,
}

pub fn euler_class(n: usize) -> Result<EulerClass> {
    if n == 0 {
        return Err(Error::Unsupported("n must be at least 1".into()));
    }
    let mut mults = vec![0; n + 1];
    mults[n] = 1;
    let det_dim = square_invariant_dim(&mults, 7)?;
    let terms = [1, -(n as i64 + 1), det_dim as i64];
    Ok(EulerClass {
        terms,
        total: terms.iter().sum(),
        det_dim,
    })
}

/// A finitely generated abelian group `Z^rank ⊕ ⊕ Z/t_i`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbelianGroup {
    #[serde(rename = "rank")]
    pub free_rank: usize,
    /// Invariant factors `> 1`, each dividing the next.
    pub torsion: Vec<u64>,
}

impl AbelianGroup {
    /// Cokernel of the integer matrix `a : Z^cols -> Z^rows`.
    pub fn cokernel(a: &[Vec<i64>], rows: usize) -> Self {
        let diag = smith_diagonal(a, rows);
        let rank = diag.len();
        AbelianGroup {
            free_rank: rows - rank,
            torsion: diag.into_iter().filter(|&x| x > 1).collect(),
        }
    }

    /// Kernel of `a : Z^cols -> Z^rows`, which is free.
    pub fn kernel(a: &[Vec<i64>], rows: usize, cols: usize) -> Self {
        AbelianGroup {
            free_rank: cols - smith_diagonal(a, rows).len(),
            torsion: vec![],
        }
    }

    pub fn is_trivial(&self) -> bool {
        self.free_rank == 0 && self.torsion.is_empty()
    }
}

impl fmt::Display for AbelianGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        match self.free_rank {
            0 => {}
            1 => parts.push("Z".to_string()),
            r => parts.push(format!("Z^{r}")),
        }
        parts.extend(self.torsion.iter().map(|t| format!("Z/{t}")));
        if parts.is_empty() {
            f.write_str("0")
        } else {
            f.write_str(&parts.join(" + "))
        }
    }
}

/// Nonzero diagonal entries (absolute values) of the Smith normal form of an
/// integer matrix given as rows.
pub fn smith_diagonal(a: &[Vec<i64>], rows: usize) -> Vec<u64> {
    let cols = a.first().map_or(0, |r| r.len());
    let mut m: Vec<Vec<i128>> = (0..rows)
        .map(|i| {
            (0..cols)
                .map(|j| a.get(i).and_then(|r| r.get(j)).copied().unwrap_or(0) as i128)
                .collect()
        })
        .collect();
    let mut diag = Vec::new();
    let mut t = 0;
    while t < rows.min(cols) {
        // Pivot: smallest nonzero entry in the remaining block.
        let pivot = (t..rows)
            .flat_map(|i| (t..cols).map(move |j| (i, j)))
            .filter(|&(i, j)| m[i][j] != 0)
            .min_by_key(|&(i, j)| m[i][j].abs());
        let Some((pi, pj)) = pivot else { break };
        m.swap(t, pi);
        for row in m.iter_mut() {
            row.swap(t, pj);
        }
        loop {
            let p = m[t][t];
            let mut clean = true;
            for i in t + 1..rows {
                let q = m[i][t] / p;
                if q != 0 {
                    for j in t..cols {
                        m[i][j] -= q * m[t][j];
                    }
                }
                if m[i][t] != 0 {
                    clean = false;
                }
            }
            for j in t + 1..cols {
                let q = m[t][j] / p;
                if q != 0 {
                    for row in m.iter_mut().skip(t) {
                        row[j] -= q * row[t];
                    }
                }
                if m[t][j] != 0 {
                    clean = false;
                }
            }
            if clean {
                // Divisibility: fold a non-divisible entry into row t.
                let bad = (t + 1..rows)
                    .flat_map(|i| (t + 1..cols).map(move |j| (i, j)))
                    .find(|&(i, j)| m[i][j] % p != 0);
                match bad {
                    Some((i, _)) => {
                        for j in t..cols {
                            m[t][j] += m[i][j];
                        }
                    }
                    None => break,
                }
            }
            // Move the smallest nonzero entry of row/column t to the pivot.
            let best = (t..rows)
                .map(|i| (i, t))
                .chain((t..cols).map(|j| (t, j)))
                .filter(|&(i, j)| m[i][j] != 0)
                .min_by_key(|&(i, j)| m[i][j].abs())
                .expect("pivot row is nonzero");
            if best.0 != t {
                m.swap(t, best.0);
            } else if best.1 != t {
                for row in m.iter_mut() {
                    row.swap(t, best.1);
                }
            }
        }
        diag.push(m[t][t].unsigned_abs() as u64);
        t += 1;
    }
    diag
}

/// `K_0` and `K_1` of the Cuntz-Pimsner algebra: the cokernel and kernel of
/// multiplication by the Euler number `1 - n` on `Z`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GysinKTheory {
    #[serde(rename = "K0")]
    pub k0: AbelianGroup,
    #[serde(rename = "K1")]
    pub k1: AbelianGroup,
    pub euler: i64,
}

pub fn gysin_from_euler(euler: i64) -> GysinKTheory {
    let a = vec![vec![euler]];
    GysinKTheory {
        k0: AbelianGroup::cokernel(&a, 1),
        k1: AbelianGroup::kernel(&a, 1, 1),
        euler,
    }
}

/// Uses `dim det(rho_n) = 1`; [`euler_class`] computes that dimension.
pub fn gysin_k_theory(n: usize) -> Result<GysinKTheory> {
    if n == 0 {
        return Err(Error::Unsupported("n must be at least 1".into()));
    }
    Ok(gysin_from_euler(1 - (n as i64 + 1) + 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{build_su2, BuildConfig};

    fn sys(n: usize, top: usize) -> SubproductSystem {
        build_su2(n, top, &BuildConfig::default()).unwrap()
    }

    fn assert_spectrum(m: &Mat, expected: &[f64]) {
        let s = spectrum(m);
        assert_eq!(s.len(), expected.len());
        for (a, b) in s.iter().zip(expected) {
            assert!((a - b).abs() < 1e-9, "{s:?} vs {expected:?}");
        }
    }

    #[test]
    fn gamma_delta_spectra_n1() {
        let s = sys(1, 6);
        let (g, dl) = gamma_delta(&s, 1, 1).unwrap();
        assert_spectrum(&g, &[2.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0, 1.0]);
        assert_spectrum(&dl, &[0.0, 0.0, 0.0, 1.0]);
        let (g, _) = gamma_delta(&s, 2, 1).unwrap();
        assert_spectrum(&g, &[0.625, 0.625, 0.625, 0.625, 1.0, 1.0]);
        let (g, dl) = gamma_delta(&s, 3, 2).unwrap();
        let mut e = vec![7.0 / 15.0; 6];
        e.extend([0.8; 4]);
        e.extend([1.0; 2]);
        assert_spectrum(&g, &e);
        let mut e = vec![0.0; 6];
        e.extend([5.0 / 9.0; 4]);
        e.extend([8.0 / 9.0; 2]);
        assert_spectrum(&dl, &e);
    }

    #[test]
    fn entries_have_expected_shapes() {
        let s = sys(2, 4);
        let [tt, tb, bt, bb] = douu_blocks(&s, 2, 2).unwrap();
        assert_eq!(tt.shift(), (-1, 1));
        assert_eq!(tb.block(1, 1).unwrap().shape(), (8 * 8, 3 * 3));
        assert_eq!(bt.block(0, 2).unwrap().nrows(), 0);
        assert_eq!(bb.block(2, 0).unwrap().nrows(), 0);
        let adj = tb.adjoint();
        assert_eq!(adj.shift(), (-1, -1));
        assert!(adj.block(2, 2).is_some());
    }

    #[test]
    fn out_of_range_is_an_error() {
        let s = sys(1, 4);
        assert!(douu_blocks(&s, 3, 3).is_err());
        let kb = KkBlocks::new(&s).unwrap();
        assert!(kb.homotopy_path(Path::U, 0.0, 2).is_err());
        assert!(kb.homotopy_path(Path::Y, 1.5, 2).is_err());
        assert!(kb.homotopy_path(Path::H, 0.0, 9).is_err());
    }

    #[test]
    fn bigraded_compose_matches_dense() {
        let s = sys(1, 5);
        let [tt, tb, ..] = douu_blocks(&s, 2, 2).unwrap();
        let gram = tb.adjoint().compose(&tb);
        let kb = KkBlocks::new(&s).unwrap();
        for ((k, m), b) in gram.blocks() {
            assert!(op_norm(&(b - kb.gamma(*k, *m).unwrap())) < 1e-12);
        }
        assert!(tt.sub(&tb).is_err());
        assert!(tt.sub(&tt).unwrap().norm() == 0.0);
    }

    #[test]
    fn endpoints_of_paths() {
        let s = sys(2, 4);
        let kb = KkBlocks::new(&s).unwrap();
        let u = kb.homotopy_path(Path::U, FRAC_PI_2, 3).unwrap();
        for m in u.blocks.values() {
            assert!(op_norm(&(m - eye(m.nrows()))) < 1e-10);
        }
        let h = kb.homotopy_path(Path::H, FRAC_PI_2, 3).unwrap();
        let i = kb.homotopy_path(Path::I, 0.0, 3).unwrap();
        for (a, b) in h.blocks.values().zip(i.blocks.values()) {
            assert!(op_norm(&(a - b)) < 1e-10);
        }
    }

    #[test]
    fn certify_small_systems() {
        for (n, top) in [(1, 5), (2, 4)] {
            let s = sys(n, top);
            let reps = certify(&s, &CertifyConfig::for_degree(top)).unwrap();
            let bad: Vec<_> = reps.iter().filter(|r| !r.pass).collect();
            assert!(bad.is_empty(), "{bad:?}");
        }
    }

    #[test]
    fn commutators_decay_n1() {
        let s = sys(1, 6);
        let kb = KkBlocks::new(&s).unwrap();
        let prof = commutator_profile(&kb, 5).unwrap();
        assert_eq!(prof.len(), 4);
        // d_k ‖[X, W]‖ for n = 1 grows towards 1.
        for e in &prof {
            let w = (e.k + 1) as f64 * e.w_commutator;
            assert!(w > 0.7 && w < 1.0, "{e:?}");
        }
    }

    #[test]
    fn euler_numbers() {
        assert_eq!(euler_class(1).unwrap().total, 0);
        assert_eq!(euler_class(2).unwrap().total, -1);
        let e = euler_class(5).unwrap();
        assert_eq!(e.terms, [1, -6, 1]);
        assert_eq!(e.total, -4);
        assert!(euler_class(0).is_err());
    }

    #[test]
    fn k_theory_small_n() {
        let z = AbelianGroup {
            free_rank: 1,
            torsion: vec![],
        };
        let g = gysin_k_theory(1).unwrap();
        assert_eq!((g.k0.clone(), g.k1.clone()), (z.clone(), z));
        let g = gysin_k_theory(2).unwrap();
        assert!(g.k0.is_trivial() && g.k1.is_trivial());
        let g = gysin_k_theory(3).unwrap();
        assert_eq!(g.k0.torsion, vec![2]);
        assert!(g.k1.is_trivial());
        for n in 2..=10u64 {
            let g = gysin_k_theory(n as usize).unwrap();
            let expect: Vec<u64> = if n == 2 { vec![] } else { vec![n - 1] };
            assert_eq!(g.k0.torsion, expect);
            assert_eq!(g.k0.free_rank, 0);
        }
    }

    #[test]
    fn k_theory_json_shape() {
        let v = serde_json::to_value(gysin_k_theory(3).unwrap()).unwrap();
        assert_eq!(
            v,
            serde_json::json!({"K0": {"rank": 0, "torsion": [2]}, "K1": {"rank": 0, "torsion": []}, "euler": -2})
        );
    }

    #[test]
    fn smith_form_examples() {
        assert_eq!(
            smith_diagonal(&[vec![2, 4, 4], vec![-6, 6, 12], vec![10, -4, -16]], 3),
            vec![2, 6, 12]
        );
        assert_eq!(
            smith_diagonal(&[vec![0, 0], vec![0, 0]], 2),
            Vec::<u64>::new()
        );
        assert_eq!(smith_diagonal(&[vec![2, 0], vec![0, 3]], 2), vec![1, 6]);
        let g = AbelianGroup::cokernel(&[vec![2, 0], vec![0, 3]], 2);
        assert_eq!(g.to_string(), "Z/6");
        assert_eq!(AbelianGroup::kernel(&[vec![0]], 1, 1).to_string(), "Z");
    }
}
