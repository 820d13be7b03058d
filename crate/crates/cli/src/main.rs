//! `levymap`: kernels, triplet mappings and Monte Carlo checks from the
//! command line.
//!
//! Exit codes: 0 ok, 2 schema or usage error, 3 domain or range error,
//! 4 Monte Carlo verification failed.

mod output;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use levymap::idlaw::{default_z_panel, Matrix};
use levymap::mapping::{apply_map_on, invert_map, iterate_map_on, limit_class_check, range_check, LimitClass};
use levymap::montecarlo::{ecf_compare, sample_path_integral, MCConfig};
use levymap::{Error, Family, KernelSpec, LevyMeasure, Triplet, Vector};
use serde_json::{json, Value};

use output::{num, Csv};

#[derive(Parser)]
#[command(name = "levymap", version, about = "Stochastic integral mappings of infinitely divisible laws")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate, invert or integrate a kernel
    #[command(subcommand)]
    Kernel(KernelCommand),
    /// Map a triplet through a kernel (JSON report)
    Map(MapArgs),
    /// Apply the same mapping n times (CSV, one row per step)
    Iterate(IterateArgs),
    /// Distance of each iterate from the limit class (CSV)
    Converge(IterateArgs),
    /// Find the triplet whose image is the given target (JSON)
    Invertmap(MapArgs),
    /// Test membership in the limit class for a given alpha (JSON)
    Classify(ClassifyArgs),
    /// Sample the stochastic integral (CSV, one row per path)
    Simulate(SimArgs),
    /// Compare simulated samples with the analytic image (JSON)
    Verify(VerifyArgs),
}

#[derive(Subcommand)]
enum KernelCommand {
    /// Rows of (s, f(s))
    Eval(KernelEvalArgs),
    /// Rows of (s, t) with t found by root finding on the tail integral
    Invert(KernelEvalArgs),
    /// Rows of (beta, m_plus, m_minus)
    Moment(KernelMomentArgs),
}

#[derive(Args)]
struct FamilyArgs {
    /// psi, phibar, lambda, gstar or exp
    #[arg(long)]
    family: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    q: Option<f64>,
    /// The exponent of the gstar family
    #[arg(long)]
    exponent: Option<f64>,
    #[command(flatten)]
    kernel: KernelSource,
}

#[derive(Args)]
struct KernelSource {
    /// Kernel as inline JSON, or the shorthand `exp`
    #[arg(long)]
    kernel: Option<String>,
    /// Kernel JSON file
    #[arg(long, conflicts_with = "kernel")]
    kernel_file: Option<PathBuf>,
}

#[derive(Args)]
struct KernelEvalArgs {
    #[command(flatten)]
    family: FamilyArgs,
    /// Comma-separated values of s
    #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
    s: Vec<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct KernelMomentArgs {
    #[command(flatten)]
    family: FamilyArgs,
    /// Comma-separated moment orders
    #[arg(long, value_delimiter = ',', required = true)]
    beta: Vec<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MapArgs {
    #[command(flatten)]
    kernel: KernelSource,
    /// Triplet JSON file
    #[arg(long)]
    input: PathBuf,
    /// Panel points `z1;z2;...`, each a comma-separated vector
    #[arg(long, allow_hyphen_values = true)]
    z_panel: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct IterateArgs {
    #[command(flatten)]
    map: MapArgs,
    #[arg(long)]
    n: usize,
    /// Index of the limit class; defaults to the kernel's alpha
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<f64>,
}

#[derive(Args)]
struct ClassifyArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    alpha: f64,
    /// Also test the range of this kernel family (psi or phibar)
    #[command(flatten)]
    kernel: KernelSource,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimArgs {
    #[command(flatten)]
    kernel: KernelSource,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 10_000)]
    paths: usize,
    /// Jumps no larger than this are compensated in the drift
    #[arg(long, default_value_t = 1e-3)]
    eps: f64,
    /// Integration horizon; defaults to the support end or where |f| < 1e-6
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    sim: SimArgs,
    #[arg(long, allow_hyphen_values = true)]
    z_panel: Option<String>,
    /// Test hook: multiply the analytic Gaussian part by this factor
    #[arg(long = "tamper-A", alias = "tamper-a", hide = true)]
    tamper_a: Option<f64>,
}

enum Failure {
    Schema(String),
    Domain(String),
    Verification(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Schema(_) => 2,
            Failure::Domain(_) => 3,
            Failure::Verification(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Schema(m) | Failure::Domain(m) | Failure::Verification(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Schema(_) | Error::Validation(_) | Error::DimensionMismatch { .. } => Failure::Schema(e.to_string()),
            Error::Domain(_) | Error::Unsupported(_) | Error::Divergent(_) | Error::Range(_) => {
                Failure::Domain(e.to_string())
            }
        }
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

fn read_json(path: &PathBuf) -> Outcome<Value> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Schema(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Schema(format!("{} is not valid JSON: {e}", path.display())))
}

fn parse_kernel_text(text: &str) -> Outcome<KernelSpec> {
    let trimmed = text.trim();
    let value = if trimmed.starts_with('{') || trimmed.starts_with('"') {
        serde_json::from_str(trimmed).map_err(|e| Failure::Schema(format!("kernel is not valid JSON: {e}")))?
    } else {
        Value::String(trimmed.to_string())
    };
    Ok(KernelSpec::from_json(&value)?)
}

impl KernelSource {
    fn load(&self) -> Outcome<Option<KernelSpec>> {
        if let Some(text) = &self.kernel {
            return parse_kernel_text(text).map(Some);
        }
        if let Some(path) = &self.kernel_file {
            return Ok(Some(KernelSpec::from_json(&read_json(path)?)?));
        }
        Ok(None)
    }

    fn require(&self) -> Outcome<KernelSpec> {
        self.load()?.ok_or_else(|| Failure::Schema("a kernel is required (--kernel or --kernel-file)".into()))
    }
}

impl FamilyArgs {
    fn spec(&self) -> Outcome<KernelSpec> {
        let Some(name) = &self.family else {
            return self.kernel.require();
        };
        if self.kernel.kernel.is_some() || self.kernel.kernel_file.is_some() {
            return Err(Failure::Schema("give either --family or a kernel JSON, not both".into()));
        }
        let need = |v: Option<f64>, flag: &str| v.ok_or_else(|| Failure::Schema(format!("family `{name}` needs --{flag}")));
        let spec = match name.as_str() {
            "exp" => KernelSpec::exp(),
            "psi" => KernelSpec::psi(need(self.alpha, "alpha")?),
            "phibar" => KernelSpec::phibar(need(self.p, "p")?, need(self.alpha, "alpha")?),
            "lambda" => KernelSpec::lambda(need(self.q, "q")?, need(self.alpha, "alpha")?),
            "gstar" => KernelSpec::gstar(need(self.alpha, "alpha")?, need(self.exponent, "exponent")?),
            other => return Err(Failure::Schema(format!("unknown family `{other}`"))),
        };
        spec.validate()?;
        Ok(spec)
    }
}

fn load_triplet(path: &PathBuf) -> Outcome<Triplet> {
    Ok(Triplet::from_json(&read_json(path)?)?)
}

fn parse_panel(text: Option<&str>, dim: usize) -> Outcome<Vec<Vector>> {
    let Some(text) = text else {
        return Ok(default_z_panel(dim));
    };
    let mut zs = Vec::new();
    for part in text.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let coords = part
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Failure::Schema(format!("bad panel point `{part}`: {e}")))?;
        if coords.len() != dim {
            return Err(Failure::Schema(format!("panel point `{part}` has {} coordinates, expected {dim}", coords.len())));
        }
        zs.push(Vector::from_vec(coords));
    }
    if zs.is_empty() {
        return Err(Failure::Schema("the z panel is empty".into()));
    }
    Ok(zs)
}

fn emit(text: &str, out: &Option<PathBuf>) -> Outcome<()> {
    match out {
        Some(path) => {
            fs::write(path, text).map_err(|e| Failure::Schema(format!("cannot write {}: {e}", path.display())))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn analytic_family(spec: &KernelSpec, command: &str) -> Outcome<Family> {
    spec.family().ok_or_else(|| Failure::Domain(format!("kernel {command} needs one of the analytic families")))
}

fn cmd_kernel(cmd: &KernelCommand) -> Outcome<()> {
    match cmd {
        KernelCommand::Eval(args) => {
            let spec = args.family.spec()?;
            let mut csv = Csv::new(&["s", "f"]);
            for &s in &args.s {
                if !(s >= 0.0) {
                    return Err(Failure::Domain(format!("s must be >= 0, got {s}")));
                }
                csv.row(&[num(s), num(spec.kernel_value(s))]);
            }
            emit(&csv.into_string(), &args.out)
        }
        KernelCommand::Invert(args) => {
            let family = analytic_family(&args.family.spec()?, "invert")?;
            let mut csv = Csv::new(&["s", "t", "residual"]);
            for &s in &args.s {
                if !(s >= 0.0) {
                    return Err(Failure::Domain(format!("s must be >= 0, got {s}")));
                }
                let t = family.invert_numeric(s);
                let residual = if t > 0.0 && t < family.upper() { family.tail(t) - s } else { 0.0 };
                csv.row(&[num(s), num(t), num(residual)]);
            }
            emit(&csv.into_string(), &args.out)
        }
        KernelCommand::Moment(args) => {
            let spec = args.family.spec()?;
            let mut csv = Csv::new(&["beta", "m_plus", "m_minus"]);
            for &beta in &args.beta {
                let (plus, minus) = spec.beta_moment(beta)?;
                csv.row(&[num(beta), num(plus), num(minus)]);
            }
            emit(&csv.into_string(), &args.out)
        }
    }
}

fn cmd_map(args: &MapArgs) -> Outcome<()> {
    let spec = args.kernel.require()?;
    let input = load_triplet(&args.input)?;
    let zs = parse_panel(args.z_panel.as_deref(), input.dim())?;
    let report = apply_map_on(&spec, &input, &zs)?;
    emit(&output::json(&report.to_json()), &args.out)
}

fn cmd_invertmap(args: &MapArgs) -> Outcome<()> {
    let spec = args.kernel.require()?;
    let target = load_triplet(&args.input)?;
    let rho = invert_map(&spec, &target)?;
    emit(&output::json(&json!({"kernel": spec.to_json(), "preimage": rho.to_json()})), &args.out)
}

/// `(status, deviation)` of the centering constraint of the class.
fn centering(alpha: f64, t: &Triplet) -> (&'static str, f64) {
    let (value, constrained) = if alpha > 1.0 {
        (t.mean(), true)
    } else {
        (t.weak_mean(), alpha == 1.0)
    };
    match value {
        None => ("absent", if constrained { f64::INFINITY } else { 0.0 }),
        Some(m) => {
            let size = m.norm();
            let status = if size <= 1e-8 * t.gamma.amax().max(1.0) { "zero" } else { "nonzero" };
            (status, if constrained { size } else { 0.0 })
        }
    }
}

/// Per-step diagnostics of an orbit against the class of index `alpha`.
struct StepSummary {
    atoms: String,
    gamma_mass: f64,
    low_mass: f64,
    status: &'static str,
    deviation: f64,
    member: bool,
}

impl StepSummary {
    fn of(alpha: f64, t: &Triplet) -> Self {
        let (atoms, gamma_mass, low_mass) = match &t.levy {
            LevyMeasure::Polar(rep) => (
                rep.atoms().iter().map(|a| format!("{}:{}", num(a.beta), num(a.weight))).collect::<Vec<_>>().join(" "),
                rep.atoms().iter().map(|a| a.weight).sum::<f64>(),
                rep.atoms().iter().filter(|a| a.beta <= alpha).map(|a| a.weight).sum::<f64>(),
            ),
            LevyMeasure::Zero => (String::new(), 0.0, 0.0),
            _ => (String::new(), f64::NAN, f64::NAN),
        };
        let (status, deviation) = centering(alpha, t);
        let member = LimitClass::for_alpha(alpha).is_some() && limit_class_check(alpha, t).holds();
        StepSummary { atoms, gamma_mass, low_mass, status, deviation, member }
    }

    fn class_distance(&self) -> f64 {
        self.low_mass + self.deviation
    }
}

fn run_orbit(args: &IterateArgs) -> Outcome<(f64, levymap::mapping::Iteration)> {
    let spec = args.map.kernel.require()?;
    let input = load_triplet(&args.map.input)?;
    if args.n == 0 {
        return Err(Failure::Schema("--n must be at least 1".into()));
    }
    let alpha = match args.alpha.or(spec.max_alpha()) {
        Some(a) => a,
        None => return Err(Failure::Schema("the kernel has no alpha; pass --alpha".into())),
    };
    let zs = parse_panel(args.map.z_panel.as_deref(), input.dim())?;
    Ok((alpha, iterate_map_on(&spec, &input, args.n, &zs)?))
}

fn finish_orbit(rows: String, stopped: Option<(usize, Error)>, out: &Option<PathBuf>) -> Outcome<()> {
    emit(&rows, out)?;
    match stopped {
        None => Ok(()),
        Some((step, e)) => Err(Failure::Domain(format!("stopped at step {step}: {e}"))),
    }
}

fn cmd_iterate(args: &IterateArgs) -> Outcome<()> {
    let (alpha, orbit) = run_orbit(args)?;
    let mut csv = Csv::new(&[
        "step",
        "gamma_atoms",
        "a_norm",
        "gamma",
        "weak_mean_status",
        "limit_class",
        "class_distance",
    ]);
    for (i, report) in orbit.reports.iter().enumerate() {
        let t = &report.output;
        let summary = StepSummary::of(alpha, t);
        csv.row(&[
            (i + 1).to_string(),
            summary.atoms.clone(),
            num(t.a.norm()),
            t.gamma.iter().map(|&g| num(g)).collect::<Vec<_>>().join(" "),
            summary.status.to_string(),
            summary.member.to_string(),
            num(summary.class_distance()),
        ]);
    }
    finish_orbit(csv.into_string(), orbit.stopped, &args.map.out)
}

/// Finite-n view of the iterated range: how far each iterate sits from the
/// limit class, and how the Γ mass grows from step to step.
fn cmd_converge(args: &IterateArgs) -> Outcome<()> {
    let (alpha, orbit) = run_orbit(args)?;
    let mut csv = Csv::new(&[
        "step",
        "gamma_mass",
        "mass_ratio",
        "low_beta_mass",
        "centering_deviation",
        "class_distance",
        "limit_class",
    ]);
    let mut previous = f64::NAN;
    for (i, report) in orbit.reports.iter().enumerate() {
        let summary = StepSummary::of(alpha, &report.output);
        let ratio = if previous > 0.0 { summary.gamma_mass / previous } else { f64::NAN };
        previous = summary.gamma_mass;
        csv.row(&[
            (i + 1).to_string(),
            num(summary.gamma_mass),
            if ratio.is_nan() { String::new() } else { num(ratio) },
            num(summary.low_mass),
            num(summary.deviation),
            num(summary.class_distance()),
            summary.member.to_string(),
        ]);
    }
    finish_orbit(csv.into_string(), orbit.stopped, &args.map.out)
}

fn cmd_classify(args: &ClassifyArgs) -> Outcome<()> {
    let t = load_triplet(&args.input)?;
    let class = LimitClass::for_alpha(args.alpha)
        .ok_or_else(|| Failure::Domain(format!("no limit class for alpha = {}", args.alpha)))?;
    let diag = limit_class_check(args.alpha, &t);
    let mut report = json!({
        "alpha": args.alpha,
        "class": class.tag(),
        "member": diag.holds(),
        "diagnostics": diag.to_json(),
    });
    if let Some(spec) = args.kernel.load()? {
        let family = analytic_family(&spec, "range check")?;
        let range = range_check(&family, &t)?;
        report["range"] = json!({"kernel": spec.to_json(), "member": range.holds(), "diagnostics": range.to_json()});
    }
    emit(&output::json(&report), &args.out)
}

fn mc_config(args: &SimArgs) -> MCConfig {
    let mut cfg = MCConfig::new(args.paths, args.seed);
    cfg.jump_cutoff = args.eps;
    cfg.horizon = args.horizon;
    cfg
}

fn cmd_simulate(args: &SimArgs) -> Outcome<()> {
    let spec = args.kernel.require()?;
    let input = load_triplet(&args.input)?;
    let sim = sample_path_integral(&spec, &input, &mc_config(args))?;
    let dim = input.dim();
    let mut header = vec!["path".to_string()];
    header.extend((1..=dim).map(|i| format!("x{i}")));
    let mut csv = Csv::new(&header.iter().map(String::as_str).collect::<Vec<_>>());
    for (i, x) in sim.samples.iter().enumerate() {
        let mut row = vec![i.to_string()];
        row.extend(x.iter().map(|&v| num(v)));
        csv.row(&row);
    }
    emit(&csv.into_string(), &args.out)
}

fn cmd_verify(args: &VerifyArgs) -> Outcome<()> {
    let spec = args.sim.kernel.require()?;
    let input = load_triplet(&args.sim.input)?;
    let zs = parse_panel(args.z_panel.as_deref(), input.dim())?;
    let mut analytic = apply_map_on(&spec, &input, &zs)?.output;
    if let Some(factor) = args.tamper_a {
        let a: Matrix = &analytic.a * factor;
        analytic = Triplet::new(a, analytic.levy.clone(), analytic.gamma.clone())?;
    }
    let sim = sample_path_integral(&spec, &input, &mc_config(&args.sim))?;
    let report = ecf_compare(&sim.samples, &analytic, &zs)?;
    let mut value = report.to_json();
    value["horizon"] = json!(sim.horizon);
    value["jump_rate"] = json!(sim.jump_rate);
    value["seed"] = json!(args.sim.seed);
    emit(&output::json(&value), &args.sim.out)?;
    if report.passed {
        Ok(())
    } else {
        Err(Failure::Verification(format!(
            "max standardized deviation {} exceeds {}",
            num(report.max_deviation),
            num(levymap::montecarlo::ECF_THRESHOLD)
        )))
    }
}

fn configure_threads() -> Outcome<()> {
    let Ok(text) = std::env::var("LEVYMAP_THREADS") else {
        return Ok(());
    };
    let n: usize = text
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::Schema(format!("LEVYMAP_THREADS must be a positive integer, got `{text}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Schema(format!("cannot configure threads: {e}")))
}

fn run(cli: &Cli) -> Outcome<()> {
    configure_threads()?;
    match &cli.command {
        Command::Kernel(cmd) => cmd_kernel(cmd),
        Command::Map(args) => cmd_map(args),
        Command::Iterate(args) => cmd_iterate(args),
        Command::Converge(args) => cmd_converge(args),
        Command::Invertmap(args) => cmd_invertmap(args),
        Command::Classify(args) => cmd_classify(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Verify(args) => cmd_verify(args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("levymap: {}", failure.message());
            ExitCode::from(failure.code())
        }
    }
}
