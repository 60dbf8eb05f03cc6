//! Argument parsing and orchestration for the `subproduct` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use subproduct::fusion::FusionMaps;
use subproduct::kk::{self, CertifyConfig};
use subproduct::linalg::projector_distance;
use subproduct::ncpoly::{determinant_ideal, ideal_from_system, system_from_ideal, Ideal};
use subproduct::report::SectionTiming;
use subproduct::sequences::{self, gamma};
use subproduct::su2::{self, haar_samples, square_invariant_dim};
use subproduct::system::{self, build_su2, BuildConfig, SubproductSystem};
use subproduct::toeplitz;
use subproduct::{Error, IdentityReport, ReportBundle, Result};

/// Haar samples used for equivariance checks.
pub const GROUP_SAMPLES: usize = 5;

#[derive(Parser, Debug, Clone, Serialize)]
#[command(
    name = "subproduct",
    version,
    about = "Checks for SU(2)-equivariant subproduct systems"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct Global {
    /// Residual tolerance for identity checks.
    #[arg(long, global = true, default_value_t = 1e-9)]
    pub tol: f64,
    /// Seed for Haar samples and random vectors.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Print JSON instead of text.
    #[arg(long, global = true)]
    pub json: bool,
    /// Run independent sections on this many threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Include wall time per section in the output.
    #[arg(long, global = true)]
    pub timings: bool,
}

#[derive(Subcommand, Debug, Clone, Serialize)]
#[serde(tag = "command", rename_all = "lowercase")]
pub enum Command {
    /// Dimension sequence, mu and gamma with the exact identities.
    Seq {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 10)]
        max: usize,
    },
    /// The irreducible representation and its determinant.
    Rep {
        #[arg(long)]
        n: usize,
        /// Run the unitarity, multiplicativity and determinant checks.
        #[arg(long)]
        check: bool,
        /// Multiplicities k_0,k_1,... of a reducible representation whose
        /// determinant dimension is compared with sum k_m^2.
        #[arg(long, value_delimiter = ',')]
        mults: Option<Vec<usize>>,
    },
    /// Subproduct system of a homogeneous ideal.
    Ideal {
        #[arg(long)]
        n: usize,
        /// Generators, inline (separated by ';') or a file path. Defaults to
        /// the determinant ideal, which is then compared with the built system.
        #[arg(long)]
        gens: Option<String>,
        #[arg(long, default_value_t = 4)]
        max: usize,
        /// Print the fiber dimensions.
        #[arg(long)]
        dims: bool,
        #[arg(long)]
        system_out: Option<PathBuf>,
    },
    /// Build the determinant system and write it to a file.
    Build {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        max_degree: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fusion unitary W_{k,m}.
    Fusion {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        m: usize,
        /// Also run every fusion check and the identity registry.
        #[arg(long)]
        verify_all: bool,
    },
    /// Toeplitz relations and commutator decay on the truncated Fock space.
    Toeplitz {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        max_degree: usize,
        #[arg(long)]
        relations: bool,
        #[arg(long)]
        decay: bool,
    },
    /// Block certificates on F ⊗ F and the K-theory.
    Kk {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        kmax: usize,
        #[arg(long, default_value_t = 2)]
        mmax: usize,
        #[arg(long)]
        certify: bool,
        #[arg(long)]
        k_theory: bool,
    },
    /// Run the checks on a built or loaded system.
    Verify {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        max_degree: Option<usize>,
        /// System file written by `build`.
        #[arg(long = "in")]
        input: Option<PathBuf>,
        /// Every module, not only the system axioms.
        #[arg(long)]
        all: bool,
    },
}

/// Output of one run.
#[derive(Debug)]
pub struct Outcome {
    pub stdout: String,
    pub code: i32,
}

impl Outcome {
    fn usage(msg: impl Into<String>) -> Self {
        Outcome {
            stdout: format!("error: {}\n", msg.into()),
            code: 2,
        }
    }
}

type Section<'a> = (
    &'static str,
    Box<dyn Fn() -> Result<Vec<IdentityReport>> + Send + Sync + 'a>,
);

/// Parse arguments and run; clap errors exit with status 2.
pub fn main_with_args<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(&cli),
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            Outcome {
                stdout: e.to_string(),
                code,
            }
        }
    }
}

pub fn run(cli: &Cli) -> Outcome {
    let g = &cli.global;
    if g.tol.is_nan() || g.tol <= 0.0 {
        return Outcome::usage("--tol must be positive");
    }
    if let Some(0) = g.threads {
        return Outcome::usage("--threads must be at least 1");
    }
    match dispatch(cli) {
        Ok(o) => o,
        Err(e) => Outcome::usage(e.to_string()),
    }
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Unsupported("n must be at least 1".into()));
    }
    Ok(())
}

/// Construction keeps its own default tolerance; `--tol` applies to checks.
fn build(n: usize, top: usize) -> Result<SubproductSystem> {
    check_n(n)?;
    build_su2(n, top, &BuildConfig::default())
}

fn dispatch(cli: &Cli) -> Result<Outcome> {
    let g = &cli.global;
    let tol = g.tol;
    match &cli.command {
        Command::Seq { n, max } => {
            check_n(*n)?;
            let d = sequences::dims(*n, *max)?;
            let mu = sequences::mu(*n, *max)?;
            let info = json!({
                "d": d.iter().map(|x| x.to_string()).collect::<Vec<_>>(),
                "mu": mu.iter().map(|x| x.to_string()).collect::<Vec<_>>(),
                "gamma": gamma(*n),
            });
            let sections: Vec<Section> = vec![(
                "sequences",
                Box::new(move || sequences::check_identities(*n, *max)),
            )];
            let text = format!(
                "d     = {}\nmu    = {}\ngamma = {}\n",
                join(&info["d"]),
                join(&info["mu"]),
                gamma(*n)
            );
            finish(cli, sections, Some((info, text)))
        }
        Command::Rep { n, check, mults } => {
            check_n(*n)?;
            let seed = g.seed;
            let mut sections: Vec<Section> = Vec::new();
            if *check || mults.is_none() {
                sections.push(("rep", Box::new(move || su2::check_irrep(*n, seed, tol))));
            }
            if let Some(ms) = mults.clone() {
                sections.push((
                    "determinant",
                    Box::new(move || reducible_determinant(&ms, seed)),
                ));
            }
            finish(cli, sections, None)
        }
        Command::Ideal {
            n,
            gens,
            max,
            dims,
            system_out,
        } => {
            check_n(*n)?;
            let ideal = match gens {
                None => determinant_ideal(*n),
                Some(s) => Ideal::parse(&read_inline_or_file(s)?, *n)?,
            };
            let sys = system_from_ideal(&ideal, *max, &BuildConfig::default())?;
            if let Some(path) = system_out {
                write(path, &sys.to_json())?;
            }
            let gens_text: Vec<String> = ideal.generators.iter().map(|p| p.to_string()).collect();
            let info = json!({ "generators": gens_text, "dims": sys.dims() });
            let mut text = format!("generators: {}\n", gens_text.join("; "));
            if *dims {
                text.push_str(&format!("dims: {:?}\n", sys.dims()));
            }
            let mut sections: Vec<Section> = Vec::new();
            if gens.is_none() {
                let n = *n;
                let max = *max;
                let sys = &sys;
                sections.push((
                    "ideal",
                    Box::new(move || ideal_correspondence(sys, n, max, tol)),
                ));
            }
            finish(cli, sections, Some((info, text)))
        }
        Command::Build { n, max_degree, out } => {
            let sys = build(*n, *max_degree)?;
            write(out, &sys.to_json())?;
            let info = json!({ "n": n, "M": max_degree, "dims": sys.dims(), "out": out });
            let text = format!(
                "wrote {} (n = {n}, M = {max_degree}, dims {:?})\n",
                out.display(),
                sys.dims()
            );
            let sys = &sys;
            let sections: Vec<Section> =
                vec![("system", Box::new(move || system::check_dimensions(sys)))];
            finish(cli, sections, Some((info, text)))
        }
        Command::Fusion {
            n,
            k,
            m,
            verify_all,
        } => {
            let top = (k + m).max(2);
            let sys = build(*n, top)?;
            let fm = FusionMaps::new(&sys)?;
            let group = haar_samples(GROUP_SAMPLES, g.seed);
            let (k, m) = (*k, *m);
            let fm = &fm;
            let group = &group;
            let mut sections: Vec<Section> = vec![(
                "fusion",
                Box::new(move || {
                    let reps = fm.check_fusion(group, tol, tol * 10.0)?;
                    Ok(if *verify_all {
                        reps
                    } else {
                        reps.into_iter().filter(|r| is_pair(r, k, m)).collect()
                    })
                }),
            )];
            if *verify_all {
                sections.push((
                    "fusion_registry",
                    Box::new(move || fm.check_identities(tol)),
                ));
                sections.push((
                    "fusion_lift",
                    Box::new(move || fm.check_lift_equivariance(group, tol * 10.0)),
                ));
            }
            finish(cli, sections, None)
        }
        Command::Toeplitz {
            n,
            max_degree,
            relations,
            decay,
        } => {
            let sys = build(*n, *max_degree)?;
            let both = !relations && !decay;
            let sys = &sys;
            let mut sections: Vec<Section> = Vec::new();
            if *relations || both {
                sections.push((
                    "toeplitz_relations",
                    Box::new(move || relation_reports(sys, tol)),
                ));
            }
            if *decay || both {
                sections.push((
                    "toeplitz_decay",
                    Box::new(move || toeplitz::check_decay(sys, tol)),
                ));
            }
            finish(cli, sections, None)
        }
        Command::Kk {
            n,
            kmax,
            mmax,
            certify,
            k_theory,
        } => {
            check_n(*n)?;
            let kt = kk::gysin_k_theory(*n)?;
            if !certify {
                let (info, text) = k_theory_output(&kt);
                return Ok(plain(cli, info, text));
            }
            let top = kmax.max(mmax) + 2;
            let sys = build(*n, top)?;
            let cfg = CertifyConfig {
                kmax: *kmax,
                mmax: *mmax,
                max_sector: top - 1,
                tol,
                exact_tol: tol.min(1e-10),
                lambdas: kk::lambda_grid(),
            };
            let sys = &sys;
            let sections: Vec<Section> = vec![("kk", Box::new(move || kk::certify(sys, &cfg)))];
            let extra = k_theory.then(|| k_theory_output(&kt));
            finish(cli, sections, extra)
        }
        Command::Verify {
            n,
            max_degree,
            input,
            all,
        } => {
            let sys = match (input, n, max_degree) {
                (Some(path), None, None) => {
                    let text = fs::read_to_string(path)?;
                    SubproductSystem::from_json(&text, BuildConfig::default().tol)?
                }
                (None, Some(n), Some(top)) => build(*n, *top)?,
                _ => {
                    return Ok(Outcome::usage(
                        "verify takes either --in <file> or both --n and --max-degree",
                    ))
                }
            };
            let group = haar_samples(GROUP_SAMPLES, g.seed);
            let sections = verify_sections(&sys, &group, *all, tol, g.seed);
            finish(cli, sections, None)
        }
    }
}

fn verify_sections<'a>(
    sys: &'a SubproductSystem,
    group: &'a [subproduct::Mat],
    all: bool,
    tol: f64,
    seed: u64,
) -> Vec<Section<'a>> {
    let n = sys.n();
    let top = sys.max_degree();
    let equiv = tol * 10.0;
    let mut s: Vec<Section<'a>> = vec![
        (
            "system_dimensions",
            Box::new(move || system::check_dimensions(sys)),
        ),
        (
            "system_axioms",
            Box::new(move || system::check_axioms(sys, tol)),
        ),
        (
            "system_equivariance",
            Box::new(move || system::check_equivariance(sys, group, equiv)),
        ),
        (
            "system_fibers",
            Box::new(move || system::check_su2_fibers(sys, tol)),
        ),
    ];
    if !all {
        return s;
    }
    s.push((
        "sequences",
        Box::new(move || sequences::check_identities(n, 40)),
    ));
    s.push(("rep", Box::new(move || su2::check_irrep(n, seed, tol))));
    s.push((
        "ideal",
        Box::new(move || ideal_correspondence(sys, n, top, tol)),
    ));
    s.push((
        "fusion",
        Box::new(move || {
            let fm = FusionMaps::new(sys)?;
            let mut out = fm.check_fusion(group, tol, equiv)?;
            out.extend(fm.check_identities(tol)?);
            out.extend(fm.check_lift_equivariance(group, equiv)?);
            Ok(out)
        }),
    ));
    if top >= 3 {
        s.push((
            "toeplitz_relations",
            Box::new(move || relation_reports(sys, tol)),
        ));
        s.push((
            "toeplitz_operators",
            Box::new(move || {
                let mut out = toeplitz::check_dimension_operator(sys, tol)?;
                out.extend(toeplitz::check_creation_bounds(sys, group, 3, seed, equiv)?);
                Ok(out)
            }),
        ));
    }
    s.push((
        "toeplitz_decay",
        Box::new(move || toeplitz::check_decay(sys, tol)),
    ));
    if top >= 2 {
        s.push((
            "kk",
            Box::new(move || {
                let mut cfg = CertifyConfig::for_degree(top);
                cfg.tol = tol;
                cfg.exact_tol = tol.min(1e-10);
                kk::certify(sys, &cfg)
            }),
        ));
    }
    s.push(("k_theory", Box::new(move || k_theory_reports(n))));
    s
}

fn relation_reports(sys: &SubproductSystem, tol: f64) -> Result<Vec<IdentityReport>> {
    Ok(toeplitz::verify_relations(sys, tol)?.reports)
}

fn is_pair(r: &IdentityReport, k: usize, m: usize) -> bool {
    let get = |key: &str| r.params.get(key).map(|p| p.to_string());
    match (get("k"), get("m")) {
        (Some(a), Some(b)) => a == k.to_string() && b == m.to_string(),
        _ => true,
    }
}

/// `dim` of the invariants of `tau ⊗ tau` against `sum k_m^2`.
fn reducible_determinant(mults: &[usize], seed: u64) -> Result<Vec<IdentityReport>> {
    let dim = square_invariant_dim(mults, seed)?;
    let expect: usize = mults.iter().map(|k| k * k).sum();
    let pattern = mults
        .iter()
        .map(|k| k.to_string())
        .collect::<Vec<_>>()
        .join(",");
    Ok(vec![IdentityReport::exact(
        "rep_determinant_dimension",
        dim == expect,
    )
    .with("mults", pattern)
    .with("dim", dim)])
}

/// The system of the determinant ideal against the directly built one, and
/// the minimal generators recovered from the built system.
fn ideal_correspondence(
    sys: &SubproductSystem,
    n: usize,
    top: usize,
    tol: f64,
) -> Result<Vec<IdentityReport>> {
    let cfg = BuildConfig::default();
    let direct;
    let reference = if sys.max_degree() >= top && sys.n() == n {
        sys
    } else {
        direct = build_su2(n, top, &cfg)?;
        &direct
    };
    let from_ideal = system_from_ideal(&determinant_ideal(n), top, &cfg)?;
    let mut out = Vec::new();
    for m in 0..=top {
        let a = from_ideal.basis(m)?;
        let b = reference.basis(m)?;
        out.push(
            IdentityReport::new("ideal_fiber_distance", projector_distance(a, b), tol)
                .with("m", m)
                .with("n", n),
        );
    }
    out.push(
        IdentityReport::exact(
            "ideal_dimensions",
            from_ideal.dims() == reference.dims()[..=top],
        )
        .with("n", n),
    );
    let recovered = ideal_from_system(reference, tol.sqrt())?;
    let degrees: Vec<usize> = recovered.generators.iter().map(|p| p.degree()).collect();
    out.push(
        IdentityReport::exact("ideal_generators_quadratic", degrees == vec![2])
            .with("n", n)
            .with("count", degrees.len()),
    );
    Ok(out)
}

fn k_theory_reports(n: usize) -> Result<Vec<IdentityReport>> {
    let e = kk::euler_class(n)?;
    let kt = kk::gysin_from_euler(e.total);
    let det_one = e.det_dim == 1;
    // The six-term sequence collapses to 0 -> K1 -> Z --(e)--> Z -> K0 -> 0,
    // so rank K0 = rank K1 and |torsion K0| = |e| when e != 0.
    let order: u64 = kt.k0.torsion.iter().product();
    let consistent =
        kt.k0.free_rank == kt.k1.free_rank && (e.total == 0 || order == e.total.unsigned_abs());
    Ok(vec![
        IdentityReport::exact("kk_det_dimension", det_one).with("n", n),
        IdentityReport::exact("kk_gysin_exactness", consistent)
            .with("n", n)
            .with("K0", kt.k0.to_string())
            .with("K1", kt.k1.to_string()),
    ])
}

fn k_theory_output(kt: &kk::GysinKTheory) -> (serde_json::Value, String) {
    let info = serde_json::to_value(kt).expect("k-theory serializes");
    let text = format!("K0 = {}\nK1 = {}\neuler = {}\n", kt.k0, kt.k1, kt.euler);
    (info, text)
}

fn plain(cli: &Cli, info: serde_json::Value, text: String) -> Outcome {
    Outcome {
        stdout: if cli.global.json {
            format!("{}\n", serde_json::to_string(&info).expect("json"))
        } else {
            text
        },
        code: 0,
    }
}

fn run_sections(
    sections: Vec<Section>,
    threads: Option<usize>,
) -> Result<(Vec<IdentityReport>, Vec<SectionTiming>)> {
    let timed = |(name, f): &Section| -> Result<(Vec<IdentityReport>, SectionTiming)> {
        let t = Instant::now();
        let reps = f()?;
        Ok((
            reps,
            SectionTiming {
                section: name.to_string(),
                wall_ms: t.elapsed().as_secs_f64() * 1e3,
            },
        ))
    };
    let results: Vec<Result<_>> = match threads {
        Some(k) if k > 1 => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| Error::Unsupported(e.to_string()))?;
            pool.install(|| sections.par_iter().map(timed).collect())
        }
        _ => sections.iter().map(timed).collect(),
    };
    let mut reports = Vec::new();
    let mut timings = Vec::new();
    for r in results {
        let (reps, t) = r?;
        reports.extend(reps);
        timings.push(t);
    }
    Ok((reports, timings))
}

/// Run the sections, then render a bundle (with an optional extra payload
/// shown before it).
fn finish(
    cli: &Cli,
    sections: Vec<Section>,
    extra: Option<(serde_json::Value, String)>,
) -> Result<Outcome> {
    let (reports, timings) = run_sections(sections, cli.global.threads)?;
    let config = serde_json::to_value(cli).expect("config serializes");
    let mut bundle = ReportBundle::new(config, reports);
    if cli.global.timings {
        bundle.timings = timings;
    }
    let code = if bundle.pass { 0 } else { 1 };
    let stdout = if cli.global.json {
        match extra {
            Some((info, _)) => {
                let mut v = serde_json::to_value(&bundle).expect("bundle serializes");
                v["result"] = info;
                format!("{}\n", serde_json::to_string_pretty(&v).expect("json"))
            }
            None => format!("{}\n", bundle.to_json()),
        }
    } else {
        let mut s = extra.map(|(_, t)| t).unwrap_or_default();
        s.push_str(&bundle.render_text());
        s
    };
    Ok(Outcome { stdout, code })
}

fn join(v: &serde_json::Value) -> String {
    v.as_array()
        .map(|a| {
            a.iter()
                .map(|x| x.as_str().unwrap_or_default().to_string())
                .collect::<Vec<_>>()
                .join(" ")
        })
        .unwrap_or_default()
}

fn read_inline_or_file(s: &str) -> Result<String> {
    let p = Path::new(s);
    if p.is_file() {
        Ok(fs::read_to_string(p)?)
    } else {
        Ok(s.to_string())
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text)?;
    Ok(())
}
