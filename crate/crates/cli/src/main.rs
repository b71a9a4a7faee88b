//! Command-line front end: certify candidate families, expand vectors in
//! them, sweep truncation levels, generate reference families, and
//! summarize dumped operator matrices.
//!
//! Exit codes: 0 on success (certify: verdict is certified), 2 when a
//! family fails certification or the operator is numerically singular, 1 on
//! every other error. Machine output goes to stdout or `--out`; the human
//! summary goes to stderr with 1-based indices.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use basis_perturb::certification::{certify, Thresholds, Verdict};
use basis_perturb::corpus::{generate, metadata_json};
use basis_perturb::error::{Error, Result};
use basis_perturb::expansion::Expander;
use basis_perturb::hilbert::{biorthogonal, BasisFamily, DualFamily, PerturbedFamily};
use basis_perturb::io;
use basis_perturb::linalg::{max_abs, singular_extremes};
use basis_perturb::operators::build_bundle;
use basis_perturb::sweep::{default_levels, sweep};
use basis_perturb::{DEFAULT_INV_TOL, DEFAULT_PLATEAU_TOL, DEFAULT_RANK_TOL};

#[derive(Parser)]
#[command(
    name = "basis-perturb",
    version,
    about = "Closeness, certification, and expansion for perturbed vector families"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Certify a candidate family against a base family.
    Certify(CertifyArgs),
    /// Expand a vector in the candidate family's coordinates.
    Expand(ExpandArgs),
    /// Report closeness and spectrum across truncation levels.
    Sweep(SweepArgs),
    /// Generate a family pair from a generator spec.
    Gen(GenArgs),
    /// Summarize a dumped operator matrix.
    Report(ReportArgs),
}

#[derive(Args, Clone, Copy)]
struct TolArgs {
    /// Invertibility threshold on sigma_min, relative to sigma_max.
    #[arg(long = "tol-inv", value_name = "TOL", default_value_t = DEFAULT_INV_TOL)]
    tol_inv: f64,

    /// Numerical-rank threshold, relative to the largest singular value.
    #[arg(long = "tol-rank", value_name = "TOL", default_value_t = DEFAULT_RANK_TOL)]
    tol_rank: f64,

    /// Plateau threshold on the relative movement of partial sums.
    #[arg(long = "plateau-tol", value_name = "TOL", default_value_t = DEFAULT_PLATEAU_TOL)]
    plateau_tol: f64,
}

impl TolArgs {
    fn thresholds(&self) -> Thresholds {
        Thresholds {
            rank_tol: self.tol_rank,
            inv_tol: self.tol_inv,
            plateau_tol: self.plateau_tol,
        }
    }
}

#[derive(Args)]
struct CertifyArgs {
    /// Base family file (JSON).
    basis: PathBuf,

    /// Candidate family file (JSON).
    perturbed: PathBuf,

    /// Write the certificate JSON here instead of stdout.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Dump K, A, and A* as binary matrices under this path prefix.
    #[arg(long, value_name = "PREFIX")]
    dump: Option<PathBuf>,

    #[command(flatten)]
    tols: TolArgs,
}

#[derive(Args)]
struct ExpandArgs {
    /// Base family file (JSON).
    basis: PathBuf,

    /// Candidate family file (JSON).
    perturbed: PathBuf,

    /// Vector to expand: a bare JSON array of coordinates.
    vector: PathBuf,

    /// Write the coefficient CSV here instead of stdout.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,

    #[command(flatten)]
    tols: TolArgs,
}

#[derive(Args)]
struct SweepArgs {
    /// Base family file (JSON); omit when --spec is given.
    #[arg(required_unless_present = "spec")]
    basis: Option<PathBuf>,

    /// Candidate family file (JSON); omit when --spec is given.
    #[arg(required_unless_present = "spec")]
    perturbed: Option<PathBuf>,

    /// Generator spec file (JSON) to sweep instead of family files.
    #[arg(long, value_name = "PATH", conflicts_with_all = ["basis", "perturbed"])]
    spec: Option<PathBuf>,

    /// Comma-separated ascending truncation levels (default: powers of two,
    /// then the full count).
    #[arg(long, value_name = "N1,N2,...", value_delimiter = ',')]
    levels: Vec<usize>,

    /// Output format for the report.
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    format: OutputFormat,

    /// Override the generator seed from --spec.
    #[arg(long, value_name = "SEED", requires = "spec")]
    seed: Option<u64>,

    /// Write the report here instead of stdout.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,

    #[command(flatten)]
    tols: TolArgs,
}

#[derive(Args)]
struct GenArgs {
    /// Generator spec file (JSON).
    spec: PathBuf,

    /// Path prefix for the basis, perturbed, and metadata files.
    #[arg(long = "out-prefix", value_name = "PREFIX")]
    out_prefix: PathBuf,

    /// Override the spec's seed.
    #[arg(long, value_name = "SEED")]
    seed: Option<u64>,
}

#[derive(Args)]
struct ReportArgs {
    /// Binary matrix dump to summarize.
    matrix: PathBuf,

    /// Write the summary JSON here instead of stdout.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Json,
    Csv,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are successes; everything else is
            // an input error and exits 1 per the error contract.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(message) = configure_threads() {
        eprintln!("error: {message}");
        return ExitCode::from(1);
    }
    let outcome = match &cli.command {
        Command::Certify(args) => cmd_certify(args),
        Command::Expand(args) => cmd_expand(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Gen(args) => cmd_gen(args),
        Command::Report(args) => cmd_report(args),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::SingularOperator { .. } => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

/// Applies BASIS_PERTURB_THREADS to the global worker pool (0 or unset
/// means automatic).
fn configure_threads() -> std::result::Result<(), String> {
    let raw = match std::env::var("BASIS_PERTURB_THREADS") {
        Ok(raw) => raw,
        Err(std::env::VarError::NotPresent) => return Ok(()),
        Err(e) => return Err(format!("BASIS_PERTURB_THREADS: {e}")),
    };
    let threads: usize = raw
        .trim()
        .parse()
        .map_err(|_| format!("BASIS_PERTURB_THREADS must be a nonnegative integer, got {raw:?}"))?;
    if threads == 0 {
        return Ok(());
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| format!("failed to size the thread pool: {e}"))
}

/// Writes machine output to `--out` or stdout.
fn emit(out: &Option<PathBuf>, payload: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, payload).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        }),
        None => {
            print!("{payload}");
            Ok(())
        }
    }
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut name = prefix.as_os_str().to_os_string();
    name.push(suffix);
    PathBuf::from(name)
}

/// Shortest decimal form that parses back to the same float; integral
/// values keep a trailing `.0` so the column stays visibly numeric.
fn float_cell(x: f64) -> String {
    serde_json::to_string(&x).expect("finite float serialization cannot fail")
}

fn load_families(
    basis_path: &Path,
    perturbed_path: &Path,
    rank_tol: f64,
) -> Result<(BasisFamily, DualFamily, PerturbedFamily)> {
    let base = io::read_family(basis_path)?;
    let basis = BasisFamily::new(base, rank_tol)?;
    let dual = biorthogonal(&basis)?;
    let candidate = io::read_family(perturbed_path)?;
    let perturbed = PerturbedFamily::new(&dual, candidate)?;
    Ok((basis, dual, perturbed))
}

fn cmd_certify(args: &CertifyArgs) -> Result<u8> {
    let (basis, dual, perturbed) =
        load_families(&args.basis, &args.perturbed, args.tols.tol_rank)?;
    let certificate = certify(&basis, &dual, &perturbed, &args.tols.thresholds())?;

    if let Some(prefix) = &args.dump {
        dump_operators(prefix, &basis, &dual, &perturbed)?;
    }

    let json = serde_json::to_string_pretty(&certificate)
        .expect("certificate serialization cannot fail");
    emit(&args.out, &format!("{json}\n"))?;

    eprintln!(
        "family: {} vectors in dimension {}",
        basis.count(),
        basis.dim()
    );
    let quadratic = match certificate.closeness.quadratic_sum {
        Some(q) => format!(", quadratic sum = {q:.6e}"),
        None => String::new(),
    };
    eprintln!(
        "S = {:.6e}{quadratic}, plateau settled: {}",
        certificate.closeness.generalized_sum, certificate.plateau_converged
    );
    let cond = match certificate.cond_a {
        Some(c) => format!("{c:.6e}"),
        None => "infinite".into(),
    };
    eprintln!(
        "sigma_min(A) = {:.6e}, cond(A) = {cond}",
        certificate.sigma_min_a
    );
    let verdict = match &certificate.verdict {
        Verdict::Certified => "certified".to_string(),
        Verdict::NotCertified(reason) => format!("not certified ({reason})"),
    };
    eprintln!("verdict: {verdict}");

    Ok(if certificate.verdict.is_certified() { 0 } else { 2 })
}

/// Dumps K, A, and A* at full level plus a sidecar naming the files.
fn dump_operators(
    prefix: &Path,
    basis: &BasisFamily,
    dual: &DualFamily,
    perturbed: &PerturbedFamily,
) -> Result<()> {
    let bundle = build_bundle(basis, dual, perturbed, basis.count())?;
    let k_path = with_suffix(prefix, ".K.bprt");
    let a_path = with_suffix(prefix, ".A.bprt");
    let a_star_path = with_suffix(prefix, ".A_star.bprt");
    io::write_bprt(&k_path, bundle.k())?;
    io::write_bprt(&a_path, bundle.a())?;
    io::write_bprt(&a_star_path, bundle.a_star())?;
    let sidecar = serde_json::json!({
        "dim": bundle.dim(),
        "level": bundle.level(),
        "K": k_path.display().to_string(),
        "A": a_path.display().to_string(),
        "A_star": a_star_path.display().to_string(),
    });
    let sidecar_path = with_suffix(prefix, ".operators.json");
    let text = serde_json::to_string_pretty(&sidecar).expect("sidecar serialization cannot fail");
    std::fs::write(&sidecar_path, format!("{text}\n")).map_err(|e| Error::Io {
        path: sidecar_path.clone(),
        source: e,
    })
}

fn cmd_expand(args: &ExpandArgs) -> Result<u8> {
    let (basis, dual, perturbed) =
        load_families(&args.basis, &args.perturbed, args.tols.tol_rank)?;
    let y = io::read_vector(&args.vector)?;
    let bundle = build_bundle(&basis, &dual, &perturbed, basis.count())?;
    let expander = Expander::new(&bundle, args.tols.tol_inv)?;
    let expansion = expander.expand(&basis, &perturbed, &y)?;

    let mut csv = String::from("index,coefficient\n");
    for (i, &c) in expansion.coefficients.iter().enumerate() {
        csv.push_str(&format!("{},{}\n", i + 1, float_cell(c)));
    }
    emit(&args.out, &csv)?;

    let summary = serde_json::json!({
        "residual": expansion.residual,
        "cond_A": expander.cond(),
    });
    eprintln!("{summary}");
    Ok(0)
}

fn cmd_sweep(args: &SweepArgs) -> Result<u8> {
    let (basis, dual, perturbed) = match &args.spec {
        Some(spec_path) => {
            let mut spec = io::read_spec(spec_path)?;
            if let Some(seed) = args.seed {
                spec.seed = seed;
            }
            let generated = generate(&spec)?;
            (generated.basis, generated.dual, generated.perturbed)
        }
        None => {
            // clap guarantees both paths are present when --spec is absent.
            let basis_path = args.basis.as_ref().expect("required by clap");
            let perturbed_path = args.perturbed.as_ref().expect("required by clap");
            load_families(basis_path, perturbed_path, args.tols.tol_rank)?
        }
    };

    let levels = if args.levels.is_empty() {
        default_levels(basis.count())
    } else {
        args.levels.clone()
    };
    let report = sweep(&basis, &dual, &perturbed, &levels, &args.tols.thresholds())?;

    let payload = match args.format {
        OutputFormat::Json => {
            let json =
                serde_json::to_string_pretty(&report).expect("report serialization cannot fail");
            format!("{json}\n")
        }
        OutputFormat::Csv => {
            let mut csv = String::from("dim,partial_S,sigma_min,gap_to_full,plateau_flag\n");
            for row in 0..report.levels.len() {
                csv.push_str(&format!(
                    "{},{},{},{},{}\n",
                    report.levels[row],
                    float_cell(report.partial_s[row]),
                    float_cell(report.sigma_min_per_level[row]),
                    float_cell(report.gap_to_full[row]),
                    report.plateau[row]
                ));
            }
            csv
        }
    };
    emit(&args.out, &payload)?;

    eprintln!(
        "swept {} levels up to {}; final S = {:.6e}, plateau settled: {}",
        report.levels.len(),
        report.levels.last().expect("levels are non-empty"),
        report.partial_s.last().expect("levels are non-empty"),
        report.plateau.last().expect("levels are non-empty")
    );
    Ok(0)
}

fn cmd_gen(args: &GenArgs) -> Result<u8> {
    let mut spec = io::read_spec(&args.spec)?;
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let generated = generate(&spec)?;

    let basis_path = with_suffix(&args.out_prefix, ".basis.json");
    let perturbed_path = with_suffix(&args.out_prefix, ".perturbed.json");
    let meta_path = with_suffix(&args.out_prefix, ".meta.json");
    io::write_family(&basis_path, generated.basis.matrix())?;
    io::write_family(&perturbed_path, generated.perturbed.matrix())?;

    let mut meta = metadata_json(&spec);
    meta.as_object_mut()
        .expect("metadata is a JSON object")
        .insert(
            "files".into(),
            serde_json::json!({
                "basis": basis_path.display().to_string(),
                "perturbed": perturbed_path.display().to_string(),
            }),
        );
    let text = serde_json::to_string_pretty(&meta).expect("metadata serialization cannot fail");
    std::fs::write(&meta_path, format!("{text}\n")).map_err(|e| Error::Io {
        path: meta_path.clone(),
        source: e,
    })?;
    println!("{text}");

    eprintln!(
        "wrote {} vectors in dimension {} to {} and {} (metadata: {})",
        generated.basis.count(),
        generated.basis.dim(),
        basis_path.display(),
        perturbed_path.display(),
        meta_path.display()
    );
    Ok(0)
}

fn cmd_report(args: &ReportArgs) -> Result<u8> {
    let matrix = io::read_bprt(&args.matrix)?;
    let (sigma_max, sigma_min) = singular_extremes(&matrix);
    let cond = if sigma_min > 0.0 {
        serde_json::json!(sigma_max / sigma_min)
    } else {
        serde_json::Value::Null
    };
    let summary = serde_json::json!({
        "rows": matrix.nrows(),
        "cols": matrix.ncols(),
        "max_abs": max_abs(&matrix),
        "sigma_max": sigma_max,
        "sigma_min": sigma_min,
        "cond": cond,
    });
    let text = serde_json::to_string_pretty(&summary).expect("summary serialization cannot fail");
    emit(&args.out, &format!("{text}\n"))?;

    eprintln!(
        "matrix {}x{}: max |entry| = {:.6e}, sigma in [{:.6e}, {:.6e}]",
        matrix.nrows(),
        matrix.ncols(),
        max_abs(&matrix),
        sigma_min,
        sigma_max
    );
    Ok(0)
}
