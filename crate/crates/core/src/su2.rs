//! Irreducible SU(2) representations on symmetric tensors and the invariant
//! determinant vector in the square of each irrep.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{
    apply_tensor_power, block_diag, c, eye, isometry_defect, kron, mul, mul_ah, null_space,
    op_dist, op_norm, projector_distance, re, unitarity_defect, vstack, Mat, RANK_TOL,
};
use crate::report::IdentityReport;

/// Largest `n` for which the symmetric basis is realised inside `(C^2)^{⊗n}`.
pub const MAX_IRREP_N: usize = 8;

/// `[[a, -conj(b)], [b, conj(a)]]`, an element of SU(2) when `|a|^2 + |b|^2 = 1`.
pub fn su2(a: crate::Scalar, b: crate::Scalar) -> Mat {
    Mat::from_row_slice(2, 2, &[a, -b.conj(), b, a.conj()])
}

pub fn haar_su2<R: Rng + ?Sized>(rng: &mut R) -> Mat {
    let v: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
    let r = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    su2(c(v[0] / r, v[1] / r), c(v[2] / r, v[3] / r))
}

/// Seeded Haar samples.
pub fn haar_samples(count: usize, seed: u64) -> Vec<Mat> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| haar_su2(&mut rng)).collect()
}

/// Two Haar samples plus one element from each of the diagonal and the real
/// rotation subgroups at irrational angles. Their joint fixed vectors are the
/// invariant vectors of the whole group.
pub fn generic_elements(seed: u64) -> Vec<Mat> {
    let mut out = haar_samples(2, seed);
    let a = 2f64.sqrt();
    out.push(su2(c(a.cos(), a.sin()), re(0.0)));
    let b = 3f64.sqrt();
    out.push(su2(re(b.cos()), re(b.sin())));
    out
}

fn check_irrep_n(n: usize) -> Result<()> {
    if n > MAX_IRREP_N {
        return Err(Error::Unsupported(format!(
            "symmetric basis for n = {n} exceeds the cap n <= {MAX_IRREP_N}"
        )));
    }
    Ok(())
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Orthogonal projection of `(C^2)^{⊗n}` onto symmetric tensors: the average
/// of all permutation operators, evaluated orbit by orbit.
pub fn symmetric_projector(n: usize) -> Result<Mat> {
    check_irrep_n(n)?;
    let dim = 1usize << n;
    Ok(Mat::from_fn(dim, dim, |i, j| {
        let (a, b) = (i.count_ones(), j.count_ones());
        if a == b {
            re(1.0 / binomial(n, a as usize))
        } else {
            re(0.0)
        }
    }))
}

/// Columns `e_0, ..., e_n` in `(C^2)^{⊗n}`, where `e_k` is the normalised
/// symmetrisation of `f_0^{⊗k} ⊗ f_1^{⊗(n-k)}`.
pub fn symmetric_basis(n: usize) -> Result<Mat> {
    check_irrep_n(n)?;
    let dim = 1usize << n;
    Ok(Mat::from_fn(dim, n + 1, |w, k| {
        // `w` is big-endian with bit value 1 meaning f_1; e_k has n-k ones.
        if w.count_ones() as usize == n - k {
            re(1.0 / binomial(n, k).sqrt())
        } else {
            re(0.0)
        }
    }))
}

/// `rho_n(g)` in the basis `e_0, ..., e_n`.
pub fn irrep_matrix(n: usize, g: &Mat) -> Result<Mat> {
    if n == 0 {
        return Ok(eye(1));
    }
    let b = symmetric_basis(n)?;
    Ok(mul_ah(&b, &apply_tensor_power(&b, g, n)))
}

/// `(n+1)^{-1/2} sum_k (-1)^k e_k ⊗ e_{n-k}` as a column of length `(n+1)^2`.
pub fn determinant_vector(n: usize) -> Mat {
    let h = n + 1;
    let s = 1.0 / (h as f64).sqrt();
    let mut v = Mat::zeros(h * h, 1);
    for k in 0..=n {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        v[(k * h + (n - k), 0)] = re(sign * s);
    }
    v
}

/// Orthonormal basis of the common fixed space of the given unitaries.
pub fn invariant_subspace(unitaries: &[Mat], tol: f64) -> Result<Mat> {
    let dim = unitaries
        .first()
        .ok_or_else(|| Error::Dimension("no group elements given".into()))?
        .nrows();
    let stacked = vstack(&unitaries.iter().map(|u| u - eye(dim)).collect::<Vec<_>>());
    null_space(&stacked, tol)
}

/// `⊕_m rho_m^{⊕ mults[m]}` evaluated at `g`.
pub fn multiplicity_rep(mults: &[usize], g: &Mat) -> Result<Mat> {
    let mut blocks = Vec::new();
    for (m, &k) in mults.iter().enumerate() {
        let r = irrep_matrix(m, g)?;
        for _ in 0..k {
            blocks.push(r.clone());
        }
    }
    if blocks.is_empty() {
        return Err(Error::Unsupported("empty multiplicity pattern".into()));
    }
    Ok(block_diag(&blocks))
}

/// Dimension of the invariant subspace of `tau ⊗ tau` for
/// `tau = ⊕_m rho_m^{⊕ mults[m]}`.
pub fn square_invariant_dim(mults: &[usize], seed: u64) -> Result<usize> {
    let us = generic_elements(seed)
        .iter()
        .map(|g| multiplicity_rep(mults, g).map(|t| kron(&t, &t)))
        .collect::<Result<Vec<_>>>()?;
    Ok(invariant_subspace(&us, RANK_TOL.sqrt())?.ncols())
}

/// Checks on `rho_n`: unitarity, multiplicativity, the one-dimensional
/// invariant subspace of `rho_n ⊗ rho_n` and its agreement with the
/// determinant vector.
pub fn check_irrep(n: usize, seed: u64, tol: f64) -> Result<Vec<IdentityReport>> {
    let gs = haar_samples(2, seed);
    let (g, h) = (&gs[0], &gs[1]);
    let (rg, rh) = (irrep_matrix(n, g)?, irrep_matrix(n, h)?);
    let rgh = irrep_matrix(n, &(g * h))?;
    let mut out = vec![
        IdentityReport::new("rep_unitary", unitarity_defect(&rg), tol).with("n", n),
        IdentityReport::new("rep_homomorphism", op_dist(&rgh, &(&rg * &rh)), tol).with("n", n),
        IdentityReport::new(
            "rep_basis_isometry",
            isometry_defect(&symmetric_basis(n)?),
            tol,
        )
        .with("n", n),
    ];
    let us = generic_elements(seed)
        .iter()
        .map(|g| irrep_matrix(n, g).map(|r| kron(&r, &r)))
        .collect::<Result<Vec<_>>>()?;
    let inv = invariant_subspace(&us, RANK_TOL.sqrt())?;
    out.push(IdentityReport::exact("rep_invariant_dim", inv.ncols() == 1).with("n", n));
    let delta = determinant_vector(n);
    out.push(
        IdentityReport::new(
            "rep_determinant_vector",
            projector_distance(&inv, &delta),
            tol,
        )
        .with("n", n),
    );
    let fixed = us
        .iter()
        .map(|u| op_norm(&(mul(u, &delta) - &delta)))
        .fold(0.0, f64::max);
    out.push(IdentityReport::new("rep_determinant_invariant", fixed, tol).with("n", n));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{fro_norm, hermitian_defect, projector};

    fn permutation_matrix(n: usize, perm: &[usize]) -> Mat {
        let dim = 1usize << n;
        let mut p = Mat::zeros(dim, dim);
        for w in 0..dim {
            let mut v = 0;
            for (pos, &src) in perm.iter().enumerate() {
                let bit = (w >> (n - 1 - src)) & 1;
                v |= bit << (n - 1 - pos);
            }
            p[(v, w)] = re(1.0);
        }
        p
    }

    // Independent route: alternate the adjacent-transposition averages until
    // the product stops changing.
    fn iterated_symmetrizer(n: usize) -> Mat {
        let dim = 1usize << n;
        let mut acc = eye(dim);
        for _ in 0..200 {
            let prev = acc.clone();
            for i in 0..n.saturating_sub(1) {
                let mut perm: Vec<usize> = (0..n).collect();
                perm.swap(i, i + 1);
                let avg = (eye(dim) + permutation_matrix(n, &perm)) * re(0.5);
                acc = avg * acc;
            }
            if fro_norm(&(&acc - &prev)) < 1e-15 {
                break;
            }
        }
        acc
    }

    #[test]
    fn projector_matches_iterated_average() {
        for n in 1..=5 {
            let p = symmetric_projector(n).unwrap();
            assert!(op_dist(&p, &iterated_symmetrizer(n)) < 1e-10, "n = {n}");
            assert!(op_dist(&(&p * &p), &p) < 1e-13);
            assert!(hermitian_defect(&p) < 1e-14);
        }
    }

    #[test]
    fn basis_spans_symmetric_tensors() {
        for n in 1..=6 {
            let b = symmetric_basis(n).unwrap();
            assert!(op_dist(&projector(&b), &symmetric_projector(n).unwrap()) < 1e-12);
        }
    }

    #[test]
    fn monomial_norms() {
        // ‖p(f_0^{⊗k} ⊗ f_1^{⊗(n-k)})‖^2 = k!(n-k)!/n!
        let n = 4;
        let p = symmetric_projector(n).unwrap();
        for k in 0..=n {
            let w = (1usize << (n - k)) - 1;
            let col = p.column(w);
            let norm2: f64 = col.iter().map(|z| z.norm_sqr()).sum();
            assert!((norm2 - 1.0 / binomial(n, k)).abs() < 1e-14);
        }
    }

    #[test]
    fn n1_determinant_is_antisymmetric() {
        let d = determinant_vector(1);
        let s = 1.0 / 2f64.sqrt();
        let expect = [0.0, s, -s, 0.0];
        for (i, e) in expect.iter().enumerate() {
            assert!((d[(i, 0)].re - e).abs() < 1e-15);
        }
    }

    #[test]
    fn cap_is_enforced() {
        assert!(matches!(symmetric_basis(9), Err(Error::Unsupported(_))));
    }

    #[test]
    fn irreps_pass_checks() {
        for n in 1..=4 {
            for r in check_irrep(n, 11, 1e-9).unwrap() {
                assert!(r.pass, "{r}");
            }
        }
    }

    #[test]
    fn reducible_patterns() {
        assert_eq!(square_invariant_dim(&[2], 5).unwrap(), 4);
        assert_eq!(square_invariant_dim(&[1, 1], 5).unwrap(), 2);
        assert_eq!(square_invariant_dim(&[0, 2], 5).unwrap(), 4);
        assert_eq!(square_invariant_dim(&[1, 0, 1], 5).unwrap(), 2);
    }
}
