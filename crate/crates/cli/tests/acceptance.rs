//! The ten acceptance criteria, one line each.

use std::process::Command;
use std::time::{Duration, Instant};

use subproduct::fusion::FusionMaps;
use subproduct::kk::{self, CertifyConfig};
use subproduct::linalg::projector_distance;
use subproduct::ncpoly::{determinant_ideal, system_from_ideal};
use subproduct::sequences;
use subproduct::su2::{self, haar_samples, square_invariant_dim};
use subproduct::system::{build_su2, check_dimensions, BuildConfig, SubproductSystem};
use subproduct::toeplitz;
use subproduct::IdentityReport;

const SEED: u64 = 0;

/// Systems at the sizes of the dimension criterion.
const BUDGETS: [(usize, usize); 3] = [(1, 8), (2, 5), (3, 4)];

struct Outcome {
    pass: bool,
    detail: String,
}

fn reports_outcome(reports: &[IdentityReport]) -> Outcome {
    let failed: Vec<String> = reports
        .iter()
        .filter(|r| !r.pass)
        .take(3)
        .map(|r| {
            format!(
                "{} [{}] residual {:.2e}",
                r.name,
                r.param_string(),
                r.residual
            )
        })
        .collect();
    let worst = reports
        .iter()
        .filter(|r| r.tolerance > 0.0)
        .map(|r| r.residual / r.tolerance)
        .fold(0.0, f64::max);
    Outcome {
        pass: failed.is_empty() && !reports.is_empty(),
        detail: if failed.is_empty() {
            format!("{} checks, worst residual/tol {:.1e}", reports.len(), worst)
        } else {
            format!("{} checks, failures: {}", reports.len(), failed.join("; "))
        },
    }
}

fn within(o: Outcome, elapsed: Duration, limit: Duration) -> Outcome {
    let fast = elapsed <= limit;
    Outcome {
        pass: o.pass && fast,
        detail: format!(
            "{}; {:.3} s (limit {:.3} s)",
            o.detail,
            elapsed.as_secs_f64(),
            limit.as_secs_f64()
        ),
    }
}

fn systems() -> Vec<SubproductSystem> {
    BUDGETS
        .iter()
        .map(|&(n, top)| build_su2(n, top, &BuildConfig::default()).unwrap())
        .collect()
}

fn sequences_exact() -> Outcome {
    let t = Instant::now();
    let mut reps = Vec::new();
    for n in 1..=6 {
        reps.extend(sequences::check_identities(n, 40).unwrap());
    }
    within(reports_outcome(&reps), t.elapsed(), Duration::from_secs(1))
}

fn dimensions(systems: &[SubproductSystem], elapsed: Duration) -> Outcome {
    let mut reps = Vec::new();
    for s in systems {
        reps.extend(check_dimensions(s).unwrap());
    }
    within(reports_outcome(&reps), elapsed, Duration::from_secs(60))
}

fn determinant() -> Outcome {
    let mut reps = Vec::new();
    for n in 1..=3 {
        reps.extend(
            su2::check_irrep(n, SEED, 1e-9)
                .unwrap()
                .into_iter()
                .filter(|r| {
                    r.name.starts_with("rep_invariant") || r.name.starts_with("rep_determinant")
                }),
        );
    }
    for mults in [vec![2], vec![1, 1], vec![0, 2]] {
        let dim = square_invariant_dim(&mults, SEED).unwrap();
        let expect: usize = mults.iter().map(|k| k * k).sum();
        reps.push(IdentityReport::exact("rep_reducible_dim", dim == expect).with("dim", dim));
    }
    reports_outcome(&reps)
}

fn ideal_correspondence() -> Outcome {
    let mut reps = Vec::new();
    let cfg = BuildConfig::default();
    for n in 1..=2 {
        let top = 5;
        let direct = build_su2(n, top, &cfg).unwrap();
        let from_ideal = system_from_ideal(&determinant_ideal(n), top, &cfg).unwrap();
        reps.push(
            IdentityReport::exact("ideal_dims", direct.dims() == from_ideal.dims()).with("n", n),
        );
        for m in 0..=top {
            let d = projector_distance(direct.basis(m).unwrap(), from_ideal.basis(m).unwrap());
            reps.push(
                IdentityReport::new("ideal_fiber", d, 1e-9)
                    .with("n", n)
                    .with("m", m),
            );
        }
    }
    reports_outcome(&reps)
}

fn fusion(systems: &[SubproductSystem]) -> Outcome {
    let group = haar_samples(5, SEED);
    let mut reps = Vec::new();
    for s in systems {
        let fm = FusionMaps::new(s).unwrap();
        reps.extend(fm.check_fusion(&group, 1e-9, 1e-8).unwrap());
    }
    reports_outcome(&reps)
}

fn registry(systems: &[SubproductSystem]) -> Outcome {
    let mut reps = Vec::new();
    for s in systems {
        reps.extend(FusionMaps::new(s).unwrap().check_identities(1e-9).unwrap());
    }
    reports_outcome(&reps)
}

fn toeplitz_relations(systems: &[SubproductSystem]) -> Outcome {
    let mut reps = Vec::new();
    for s in systems {
        reps.extend(toeplitz::verify_relations(s, 1e-9).unwrap().reports);
        reps.extend(toeplitz::check_decay(s, 1e-9).unwrap());
    }
    reports_outcome(&reps)
}

fn kk_certificates() -> Outcome {
    let t = Instant::now();
    let mut reps = Vec::new();
    for (n, kmax) in [(1, 5), (2, 3)] {
        let top = kmax + 2;
        let s = build_su2(n, top, &BuildConfig::default()).unwrap();
        let cfg = CertifyConfig {
            kmax,
            mmax: kmax,
            ..CertifyConfig::for_degree(top)
        };
        reps.extend(kk::certify(&s, &cfg).unwrap());
    }
    within(
        reports_outcome(&reps),
        t.elapsed(),
        Duration::from_secs(300),
    )
}

fn k_theory() -> Outcome {
    let t = Instant::now();
    let groups: Vec<_> = (1..=10).map(|n| kk::gysin_k_theory(n).unwrap()).collect();
    let elapsed = t.elapsed() / 10;
    let mut reps = Vec::new();
    for (i, g) in groups.iter().enumerate() {
        let n = i as u64 + 1;
        let ok = match n {
            1 => g.k0.free_rank == 1 && g.k0.torsion.is_empty() && g.k1.free_rank == 1,
            2 => g.k0.is_trivial() && g.k1.is_trivial(),
            _ => g.k0.free_rank == 0 && g.k0.torsion == vec![n - 1] && g.k1.is_trivial(),
        };
        reps.push(IdentityReport::exact("k_theory", ok).with("n", n as usize));
    }
    within(reports_outcome(&reps), elapsed, Duration::from_millis(1))
}

fn cli_verify() -> Outcome {
    let t = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_subproduct"))
        .args(["verify", "--n", "2", "--max-degree", "4", "--all", "--json"])
        .output()
        .expect("binary runs");
    let elapsed = t.elapsed();
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap_or_default();
    let count = v["reports"].as_array().map_or(0, |a| a.len());
    let o = Outcome {
        pass: out.status.code() == Some(0) && count >= 40,
        detail: format!("exit {:?}, {count} reports", out.status.code()),
    };
    within(o, elapsed, Duration::from_secs(180))
}

#[test]
fn acceptance() {
    let t = Instant::now();
    let systems = systems();
    let build_time = t.elapsed();
    let results = [
        ("sequence identities", sequences_exact()),
        ("fiber dimensions", dimensions(&systems, build_time)),
        ("determinant", determinant()),
        ("ideal correspondence", ideal_correspondence()),
        ("fusion unitaries", fusion(&systems)),
        ("fusion identity registry", registry(&systems)),
        ("toeplitz relations and decay", toeplitz_relations(&systems)),
        ("kk block certificates", kk_certificates()),
        ("k-theory", k_theory()),
        ("cli verify run", cli_verify()),
    ];
    println!();
    for (i, (name, o)) in results.iter().enumerate() {
        println!(
            "{} {:>2} {:<30} {}",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            name,
            o.detail
        );
    }
    let failed: Vec<_> = results
        .iter()
        .filter(|(_, o)| !o.pass)
        .map(|(n, _)| *n)
        .collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
