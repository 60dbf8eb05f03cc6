use std::collections::BTreeMap;

use num_bigint::BigInt;
use proptest::prelude::*;

use subproduct::fusion::FusionMaps;
use subproduct::kk::{smith_diagonal, AbelianGroup, BiGradedOperator};
use subproduct::linalg::{
    c, eye, hermitian_fn, isometry_defect, kron, mul, onb_of_span, op_norm, projector, spectrum,
    unitarity_defect, Mat,
};
use subproduct::ncpoly::NcPoly;
use subproduct::sequences;
use subproduct::system::{build_su2, BuildConfig};
use subproduct::toeplitz::{FockTruncation, GradedOperator};

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Mat> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), rows * cols)
        .prop_map(move |v| Mat::from_fn(rows, cols, |i, j| c(v[i * cols + j].0, v[i * cols + j].1)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn kron_mixed_product(
        (a, cc) in (1usize..4, 1usize..4, 1usize..4).prop_flat_map(|(p, q, r)| (matrix(p, q), matrix(q, r))),
        (b, d) in (1usize..3, 1usize..3, 1usize..3).prop_flat_map(|(p, q, r)| (matrix(p, q), matrix(q, r))),
    ) {
        let lhs = mul(&kron(&a, &b), &kron(&cc, &d));
        let rhs = kron(&mul(&a, &cc), &mul(&b, &d));
        prop_assert!(op_norm(&(lhs - rhs)) < 1e-12);
    }

    #[test]
    fn onb_spans_and_is_isometric(rank in 1usize..4, extra in 0usize..3, seed in matrix(6, 3)) {
        // Columns: `rank` independent ones, then combinations of them.
        let base = seed.columns(0, rank).into_owned();
        let mix = Mat::from_fn(rank, extra, |i, j| c(1.0 + i as f64, j as f64 - 0.5));
        let s = if extra > 0 { subproduct::linalg::hstack(&[base.clone(), mul(&base, &mix)]) } else { base.clone() };
        let q = onb_of_span(&s, 1e-12);
        prop_assert_eq!(q.ncols(), rank);
        prop_assert!(isometry_defect(&q) < 1e-12);
        let p = projector(&q);
        prop_assert!(op_norm(&(mul(&p, &s) - &s)) < 1e-10);
    }

    #[test]
    fn hermitian_sqrt_squares_back(a in matrix(5, 3), repeat in 0usize..3) {
        // Low-rank PSD matrix with a repeated nonzero eigenvalue.
        let mut g = mul(&a, &a.adjoint());
        for _ in 0..repeat {
            g = &g + &g;
        }
        let r = hermitian_fn(&g, |x| x.max(0.0).sqrt());
        prop_assert!(op_norm(&(mul(&r, &r) - &g)) < 1e-10 * (1.0 + op_norm(&g)));
        let s = spectrum(&g);
        prop_assert!(s.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn cassini_and_mu(n in 1usize..8, m_max in 1usize..30) {
        let d = sequences::dims(n, m_max + 1).unwrap();
        let mu = sequences::mu(n, m_max).unwrap();
        for m in 1..=m_max {
            prop_assert_eq!(&d[m] * &d[m] - &d[m - 1] * &d[m + 1], BigInt::from(1));
            prop_assert_eq!(&mu[m] * BigInt::from(n + 1), &d[m] * &d[m - 1]);
        }
    }

    #[test]
    fn ncpoly_display_parses_back(
        n in 1usize..3,
        degree in 1usize..4,
        raw in prop::collection::vec((prop::collection::vec(0usize..3, 3), -8i32..8, -8i32..8), 1..5),
    ) {
        let terms: Vec<(Vec<usize>, _)> = raw
            .into_iter()
            .map(|(w, re, im)| {
                let word = w.into_iter().take(degree).map(|i| i % (n + 1)).collect();
                (word, c(re as f64 / 4.0, im as f64 / 2.0))
            })
            .collect();
        let p = NcPoly::new(n, terms).unwrap();
        let q = NcPoly::parse(&p.to_string(), n).unwrap();
        prop_assert_eq!(p, q);
    }

    #[test]
    fn graded_adjoint_reverses_composition(
        dims in prop::collection::vec(1usize..4, 4..6),
        s1 in -1isize..2,
        s2 in -1isize..2,
        seed in any::<u64>(),
    ) {
        let trunc = FockTruncation::new(dims.clone());
        let top = dims.len() - 1;
        let make = |shift: isize, salt: u64| {
            let mut blocks = BTreeMap::new();
            for m in 0..=top {
                let t = m as isize + shift;
                if t < 0 || t > top as isize {
                    continue;
                }
                let (r, cc) = (dims[t as usize], dims[m]);
                let v = Mat::from_fn(r, cc, |i, j| {
                    let h = (seed ^ salt).wrapping_mul(6364136223846793005).wrapping_add((i * 31 + j * 7 + m) as u64);
                    c(((h >> 33) % 17) as f64 / 8.0 - 1.0, ((h >> 13) % 5) as f64 / 4.0 - 0.5)
                });
                blocks.insert(m, v);
            }
            GradedOperator::new(&trunc, shift, blocks).unwrap()
        };
        let a = make(s1, 1);
        let b = make(s2, 2);
        let lhs = a.compose(&b).adjoint();
        let rhs = b.adjoint().compose(&a.adjoint());
        for (m, blk) in lhs.blocks() {
            if let Some(r) = rhs.block(*m) {
                prop_assert!(op_norm(&(blk - r)) < 1e-12);
            }
        }
        prop_assert_eq!(lhs.shift(), -(s1 + s2));
    }

    #[test]
    fn bigraded_adjoint_is_involutive(k in 0usize..3, m in 0usize..3, shift in (-1isize..2, -1isize..2)) {
        let dims = vec![1, 2, 3, 4];
        let t = (k as isize + shift.0, m as isize + shift.1);
        let rows = if t.0 < 0 || t.1 < 0 { 0 } else { dims[t.0 as usize] * dims[t.1 as usize] };
        let block = Mat::from_fn(rows, dims[k] * dims[m], |i, j| c(i as f64 - j as f64, 0.5));
        let op = BiGradedOperator::new(dims.clone(), shift, BTreeMap::from([((k, m), block.clone())])).unwrap();
        let back = op.adjoint().adjoint();
        prop_assert_eq!(back.shift(), shift);
        if rows > 0 {
            prop_assert_eq!(back.block(k, m), Some(&block));
            let gram = op.adjoint().compose(&op);
            prop_assert!(op_norm(&(gram.block(k, m).unwrap() - block.adjoint() * &block)) < 1e-12);
        }
    }

    #[test]
    fn smith_invariants(entries in prop::collection::vec(-6i64..7, 9)) {
        let a: Vec<Vec<i64>> = entries.chunks(3).map(|r| r.to_vec()).collect();
        let diag = smith_diagonal(&a, 3);
        prop_assert!(diag.windows(2).all(|w| w[1] % w[0] == 0));
        let det = {
            let m = |i: usize, j: usize| a[i][j] as i128;
            m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1))
                - m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0))
                + m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0))
        };
        if det != 0 {
            prop_assert_eq!(diag.len(), 3);
            prop_assert_eq!(diag.iter().map(|&x| x as i128).product::<i128>(), det.abs());
        } else {
            prop_assert!(diag.len() < 3);
        }
        let coker = AbelianGroup::cokernel(&a, 3);
        let ker = AbelianGroup::kernel(&a, 3, 3);
        prop_assert_eq!(coker.free_rank, ker.free_rank);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn fusion_unitaries_small(n in 1usize..3, k in 0usize..3, m in 0usize..3) {
        let sys = build_su2(n, (k + m).max(2), &BuildConfig::default()).unwrap();
        let fm = FusionMaps::new(&sys).unwrap();
        let w = fm.fusion_unitary(k, m).unwrap();
        prop_assert!(unitarity_defect(&w) < 1e-9);
        let total: usize = (0..=k.min(m)).map(|j| sys.dim(k + m - 2 * j)).sum();
        prop_assert_eq!(total, sys.dim(k) * sys.dim(m));
        prop_assert!(op_norm(&(mul(&w.adjoint(), &w) - eye(w.ncols()))) < 1e-9);
    }
}
