//! `fq`: simulate samples, select bandwidths and compute conditional
//! quantiles, depth sets and spread profiles from long-format panel files.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use funq::bandwidth::{auto_candidates, select_bandwidth, BandwidthGrid, CvConfig, CvPredictor};
use funq::data_io::{
    fmt_num, load_panel, write_panel, write_results, BundleKind, OutputFormat, Panel, PanelSchema,
    ResultBundle, Series,
};
use funq::depth::{
    covariate_norm_ranks, maximal_depth_set_weighted, spearman_correlation, spread_profile,
};
use funq::simulation::{generate, LocationScale, SimConfig, SimModel};
use funq::{FitStatus, Grid, KernelSpec, LocalModel, SolverConfig, TauSpec};

#[derive(Parser)]
#[command(name = "fq", version, about = "Conditional spatial depth and quantiles for functional data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a simulated sample as a long-format panel.
    Simulate(SimulateArgs),
    /// Conditional spatial quantiles Q(tau), Q(0), Q(-tau) at evaluation points.
    FitQuantiles(FitArgs),
    /// Maximal depth sets and their diameters at evaluation points.
    DepthSet(DepthArgs),
    /// Spread measures D1 and D2 at every covariate, ordered by norm rank.
    SpreadProfile(SpreadArgs),
    /// Leave-one-out cross-validation trace for the bandwidth.
    Cv(CvArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    /// X = U e^t, Y = ||X|| B
    Hetero,
    /// X = U e^t, Y = X + B
    Locscale,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_enum, default_value = "hetero")]
    model: ModelArg,
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    n: u64,
    #[arg(long, default_value_t = 101, value_parser = clap::value_parser!(u64).range(2..))]
    grid_count: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value = "unit,time,x,y")]
    schema: PanelSchema,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelArg {
    Indicator,
    Epanechnikov,
}

impl From<KernelArg> for KernelSpec {
    fn from(k: KernelArg) -> Self {
        match k {
            KernelArg::Indicator => KernelSpec::Indicator,
            KernelArg::Epanechnikov => KernelSpec::Epanechnikov,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PredictorArg {
    SpatialMedian,
    PointwiseMedian,
    Mean,
}

impl From<PredictorArg> for CvPredictor {
    fn from(p: PredictorArg) -> Self {
        match p {
            PredictorArg::SpatialMedian => CvPredictor::SpatialMedian,
            PredictorArg::PointwiseMedian => CvPredictor::PointwiseMedian,
            PredictorArg::Mean => CvPredictor::Mean,
        }
    }
}

#[derive(Clone, Debug)]
enum Bandwidth {
    Fixed(f64),
    Cv,
}

impl FromStr for Bandwidth {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "cv" {
            return Ok(Bandwidth::Cv);
        }
        match s.parse::<f64>() {
            Ok(h) if h > 0.0 && h.is_finite() => Ok(Bandwidth::Fixed(h)),
            _ => Err(format!("expected a positive bandwidth or \"cv\", got {s:?}")),
        }
    }
}

#[derive(Clone, Debug)]
enum CandidateGrid {
    Auto,
    List(Vec<f64>),
}

impl FromStr for CandidateGrid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "auto" {
            return Ok(CandidateGrid::Auto);
        }
        let hs = s
            .split(',')
            .map(|v| match v.trim().parse::<f64>() {
                Ok(h) if h > 0.0 && h.is_finite() => Ok(h),
                _ => Err(format!("bad candidate bandwidth {v:?}")),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(CandidateGrid::List(hs))
    }
}

impl fmt::Display for CandidateGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CandidateGrid::Auto => f.write_str("auto"),
            CandidateGrid::List(hs) => {
                let parts: Vec<String> = hs.iter().map(f64::to_string).collect();
                f.write_str(&parts.join(","))
            }
        }
    }
}

fn parse_tau(s: &str) -> Result<TauSpec, String> {
    let bad = || format!("expected 0, <scale>u1 or a comma list of coefficients, got {s:?}");
    let spec = if s.trim() == "0" {
        TauSpec::Zero
    } else if let Some(scale) = s.trim().strip_suffix("u1") {
        let scale = scale.trim_start_matches('+');
        let v = if scale.is_empty() {
            1.0
        } else if scale == "-" {
            -1.0
        } else {
            scale.parse::<f64>().map_err(|_| bad())?
        };
        TauSpec::FirstComponent(v)
    } else {
        let coefs = s
            .split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<Vec<_>, _>>()?;
        TauSpec::Coefficients(coefs)
    };
    let norm = match &spec {
        TauSpec::Zero => 0.0,
        TauSpec::FirstComponent(v) => v.abs(),
        TauSpec::Coefficients(c) => c.iter().map(|v| v * v).sum::<f64>().sqrt(),
    };
    if !(norm < 1.0) {
        return Err(format!("tau must have norm < 1, got {norm}"));
    }
    Ok(spec)
}

fn parse_p(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(p) if p > 0.0 && p < 1.0 => Ok(p),
        _ => Err(format!("p must lie strictly between 0 and 1, got {s:?}")),
    }
}

#[derive(Args)]
struct InputArgs {
    #[arg(long)]
    input: PathBuf,
    /// Column names: unit,time,covariate,response.
    #[arg(long, default_value = "unit,time,x,y")]
    schema: PanelSchema,
    #[arg(long, value_enum, default_value = "indicator")]
    kernel: KernelArg,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "csv")]
    format: OutputFormat,
}

#[derive(Args)]
struct BandwidthArgs {
    /// Bandwidth value, or "cv" for leave-one-out selection.
    #[arg(long, default_value = "cv")]
    h: Bandwidth,
    /// Candidates for "--h cv": "auto" or a comma list.
    #[arg(long, default_value = "auto")]
    grid: CandidateGrid,
    #[arg(long, default_value_t = 3)]
    min_neighbors: usize,
    #[arg(long, value_enum, default_value = "spatial-median")]
    predictor: PredictorArg,
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u64).range(1..))]
    max_iterations: u64,
    #[arg(long, default_value_t = 1e-8)]
    grad_tol: f64,
    #[arg(long, default_value_t = 1e-8)]
    step_tol: f64,
    #[arg(long, default_value_t = 1e-10)]
    coincidence_tol: f64,
}

impl SolverArgs {
    fn config(&self) -> SolverConfig {
        SolverConfig {
            max_iterations: self.max_iterations as usize,
            step_tol: self.step_tol,
            grad_tol: self.grad_tol,
            coincidence_tol: self.coincidence_tol,
        }
    }
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    bandwidth: BandwidthArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Evaluation points: comma list of unit ids or 0-based indices.
    #[arg(long)]
    x: Option<String>,
    #[arg(long, default_value = "0.5u1", value_parser = parse_tau, allow_hyphen_values = true)]
    tau: TauSpec,
}

#[derive(Args)]
struct DepthArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    bandwidth: BandwidthArgs,
    #[arg(long)]
    x: Option<String>,
    #[arg(long, default_value = "0.5", value_parser = parse_p)]
    p: f64,
}

#[derive(Args)]
struct SpreadArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    bandwidth: BandwidthArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long, default_value = "0.5", value_parser = parse_p)]
    p: f64,
    /// D2 uses tau = s * e_1 and -tau.
    #[arg(long, default_value_t = 0.5)]
    tau_scale: f64,
}

#[derive(Args)]
struct CvArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value = "auto")]
    grid: CandidateGrid,
    #[arg(long, default_value_t = 3)]
    min_neighbors: usize,
    #[arg(long, value_enum, default_value = "spatial-median")]
    predictor: PredictorArg,
    #[command(flatten)]
    solver: SolverArgs,
}

/// Usage problems exit with 2, everything else with 1.
enum Failure {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

type Outcome<T> = Result<T, Failure>;

fn configure_threads() -> Outcome<()> {
    let Ok(raw) = std::env::var("FQ_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| Failure::Usage(format!("FQ_THREADS must be a non-negative integer, got {raw:?}")))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Runtime(anyhow!(e)))?;
    }
    Ok(())
}

fn solver_meta(b: &mut ResultBundle, cfg: &SolverConfig) {
    b.set("solver.max_iterations", cfg.max_iterations);
    b.set("solver.grad_tol", cfg.grad_tol);
    b.set("solver.step_tol", cfg.step_tol);
    b.set("solver.coincidence_tol", cfg.coincidence_tol);
}

fn input_meta(b: &mut ResultBundle, command: &str, input: &InputArgs) {
    b.set("command", command);
    b.set("version", env!("CARGO_PKG_VERSION"));
    b.set("input", input.input.display());
    b.set("schema", &input.schema);
    b.set("kernel", KernelSpec::from(input.kernel).name());
    b.set("format", input.format);
}

fn load(input: &InputArgs) -> Outcome<Panel> {
    load_panel(&input.input, &input.schema)
        .with_context(|| format!("reading {}", input.input.display()))
        .map_err(Failure::Runtime)
}

fn cv_config(min_neighbors: usize, predictor: PredictorArg, solver: SolverConfig) -> CvConfig {
    CvConfig {
        min_neighbors,
        predictor: predictor.into(),
        solver,
    }
}

fn candidates(panel: &Panel, grid: &CandidateGrid) -> Outcome<Vec<f64>> {
    match grid {
        CandidateGrid::Auto => auto_candidates(&panel.sample)
            .context("building the automatic bandwidth grid")
            .map_err(Failure::Runtime),
        CandidateGrid::List(hs) => Ok(hs.clone()),
    }
}

/// Resolves `--h`, recording the rule and the value used.
fn resolve_bandwidth(
    b: &mut ResultBundle,
    panel: &Panel,
    args: &BandwidthArgs,
    spec: KernelSpec,
    solver: SolverConfig,
) -> Outcome<f64> {
    match args.h {
        Bandwidth::Fixed(h) => {
            b.set("h_rule", "fixed");
            b.set("h", h);
            Ok(h)
        }
        Bandwidth::Cv => {
            let hs = candidates(panel, &args.grid)?;
            let cfg = cv_config(args.min_neighbors, args.predictor, solver);
            let cv = select_bandwidth(&panel.sample, &BandwidthGrid::Explicit(hs), spec, &cfg)
                .context("cross-validating the bandwidth")?;
            b.set("h_rule", "cv");
            b.set("cv.grid", &args.grid);
            b.set("cv.min_neighbors", args.min_neighbors);
            b.set("cv.predictor", predictor_name(cfg.predictor));
            b.set("h", cv.h_opt);
            Ok(cv.h_opt)
        }
    }
}

fn predictor_name(p: CvPredictor) -> &'static str {
    match p {
        CvPredictor::SpatialMedian => "spatial-median",
        CvPredictor::PointwiseMedian => "pointwise-median",
        CvPredictor::Mean => "mean",
    }
}

/// `--x` tokens are unit ids first, then 0-based indices; the default is six
/// covariates with equidistant norm ranks.
fn evaluation_points(panel: &Panel, spec: Option<&str>) -> Outcome<Vec<usize>> {
    let n = panel.sample.len();
    let Some(spec) = spec else {
        let ranks = covariate_norm_ranks(&panel.sample);
        let mut by_rank = vec![0; n];
        for (i, r) in ranks.iter().enumerate() {
            by_rank[r - 1] = i;
        }
        let k = n.min(6);
        if k == 1 {
            return Ok(vec![by_rank[0]]);
        }
        return Ok((0..k)
            .map(|j| by_rank[((j * (n - 1)) as f64 / (k - 1) as f64).round() as usize])
            .collect());
    };
    spec.split(',')
        .map(|tok| {
            let tok = tok.trim();
            if let Some(i) = panel.unit_index(tok) {
                return Ok(i);
            }
            match tok.parse::<usize>() {
                Ok(i) if i < n => Ok(i),
                _ => Err(Failure::Usage(format!("--x: no unit or index {tok:?}"))),
            }
        })
        .collect()
}

fn status_name(s: FitStatus) -> String {
    match s {
        FitStatus::CandidatePoint(i) => format!("CandidatePoint({i})"),
        FitStatus::NewtonConverged => "NewtonConverged".into(),
        FitStatus::MaxIterations => "MaxIterations".into(),
    }
}

fn unit_list(panel: &Panel, idx: &[usize]) -> String {
    idx.iter()
        .map(|&i| panel.units[i].as_str())
        .collect::<Vec<_>>()
        .join(",")
}

fn emit(b: &ResultBundle, input: &InputArgs) -> Outcome<()> {
    write_results(b, &input.out, input.format)
        .with_context(|| format!("writing {}", input.out.display()))
        .map_err(Failure::Runtime)
}

fn cmd_simulate(args: &SimulateArgs) -> Outcome<()> {
    let grid = Grid::unit(args.grid_count as usize).map_err(|e| Failure::Usage(e.to_string()))?;
    let model = match args.model {
        ModelArg::Hetero => SimModel::Heteroscedastic,
        ModelArg::Locscale => SimModel::LocationScale(LocationScale::identity_mean_unit_scale()),
    };
    let cfg = SimConfig {
        n: args.n as usize,
        grid,
        seed: args.seed,
        model,
    };
    let sample = generate(&cfg).context("simulating")?;
    let mut panel = Panel::numbered(sample);
    let meta: BTreeMap<String, String> = [
        ("command", "simulate".to_string()),
        ("version", env!("CARGO_PKG_VERSION").to_string()),
        ("model", cfg.model.label().to_string()),
        ("n", args.n.to_string()),
        ("grid_count", args.grid_count.to_string()),
        ("seed", args.seed.to_string()),
        ("schema", args.schema.to_string()),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();
    panel.metadata = meta;
    write_panel(&args.out, &panel, &args.schema)
        .with_context(|| format!("writing {}", args.out.display()))?;
    Ok(())
}

fn cmd_fit_quantiles(args: &FitArgs) -> Outcome<()> {
    let panel = load(&args.input)?;
    let spec = KernelSpec::from(args.input.kernel);
    let solver = args.solver.config();
    let mut b = ResultBundle::new(BundleKind::QuantileCurves);
    input_meta(&mut b, "fit-quantiles", &args.input);
    solver_meta(&mut b, &solver);
    let h = resolve_bandwidth(&mut b, &panel, &args.bandwidth, spec, solver)?;
    let points = evaluation_points(&panel, args.x.as_deref())?;
    b.set("x", unit_list(&panel, &points));
    b.set("tau", &args.tau);

    let taus: Vec<(&str, TauSpec)> = match args.tau {
        TauSpec::Zero => vec![("Q(0)", TauSpec::Zero)],
        ref t => vec![("Q(tau)", t.clone()), ("Q(0)", TauSpec::Zero), ("Q(-tau)", t.negated())],
    };
    for &i in &points {
        let unit = &panel.units[i];
        let x0 = &panel.sample.covariates()[i];
        let model = LocalModel::fit(&panel.sample, x0, h, spec)
            .with_context(|| format!("fitting the local model at evaluation point {unit}"))?;
        b.set(format!("{unit}.neighbors"), model.neighborhood_count());
        b.set(format!("{unit}.dim"), model.dim());
        for (label, tau) in &taus {
            let fit = model
                .quantile(tau, &solver)
                .with_context(|| format!("solving {label} at evaluation point {unit}"))?;
            let key = format!("{unit}/{label}");
            b.set(format!("{key}.status"), status_name(fit.status));
            b.set(format!("{key}.iterations"), fit.iterations);
            b.set(format!("{key}.gradient_norm"), fit.final_gradient_norm);
            b.set(format!("{key}.objective"), fit.objective);
            let curve = fit.curve.expect("local models carry a basis");
            b.push(Series::from_curve(key, &curve));
        }
    }
    emit(&b, &args.input)
}

fn cmd_depth_set(args: &DepthArgs) -> Outcome<()> {
    let panel = load(&args.input)?;
    let spec = KernelSpec::from(args.input.kernel);
    let solver = SolverConfig::default();
    let mut b = ResultBundle::new(BundleKind::DepthSet);
    input_meta(&mut b, "depth-set", &args.input);
    let h = resolve_bandwidth(&mut b, &panel, &args.bandwidth, spec, solver)?;
    let points = evaluation_points(&panel, args.x.as_deref())?;
    b.set("x", unit_list(&panel, &points));
    b.set("p", args.p);

    for &i in &points {
        let unit = &panel.units[i];
        let x0 = &panel.sample.covariates()[i];
        let w = panel
            .sample
            .weights_at(x0, h, spec)
            .with_context(|| format!("kernel weights at evaluation point {unit}"))?;
        let set = maximal_depth_set_weighted(&panel.sample, &w, args.p)
            .with_context(|| format!("depth set at evaluation point {unit}"))?;
        b.set(format!("{unit}.cutoff"), set.cutoff);
        b.set(format!("{unit}.d1"), set.d1);
        b.set(format!("{unit}.members"), unit_list(&panel, set.selected()));
        let order: Vec<f64> = set.ordered_indices.iter().map(|&j| j as f64).collect();
        b.push(Series::new(format!("{unit}/depth"), order, set.depths.clone()).map_err(anyhow::Error::from)?);
        for &j in set.selected() {
            b.push(Series::from_curve(
                format!("{unit}/member/{}", panel.units[j]),
                &panel.sample.responses()[j],
            ));
        }
    }
    emit(&b, &args.input)
}

fn cmd_spread_profile(args: &SpreadArgs) -> Outcome<()> {
    if !(args.tau_scale.abs() < 1.0) {
        return Err(Failure::Usage(format!(
            "--tau-scale must have magnitude < 1, got {}",
            args.tau_scale
        )));
    }
    let panel = load(&args.input)?;
    let spec = KernelSpec::from(args.input.kernel);
    let solver = args.solver.config();
    let mut b = ResultBundle::new(BundleKind::SpreadProfile);
    input_meta(&mut b, "spread-profile", &args.input);
    solver_meta(&mut b, &solver);
    let h = resolve_bandwidth(&mut b, &panel, &args.bandwidth, spec, solver)?;
    b.set("p", args.p);
    b.set("tau", TauSpec::FirstComponent(args.tau_scale));

    let prof = spread_profile(&panel.sample, args.p, args.tau_scale, h, spec, &solver)
        .context("computing the spread profile")?;
    let ranks: Vec<f64> = prof.points.iter().map(|p| p.rank as f64).collect();
    let column = |f: fn(&funq::depth::SpreadPoint) -> f64| -> Vec<f64> {
        prof.points.iter().map(f).collect()
    };
    for (name, values) in [
        ("covariate_norm", column(|p| p.covariate_norm)),
        ("neighbors", column(|p| p.neighbors as f64)),
        ("d1", column(|p| p.d1)),
        ("d2", column(|p| p.d2)),
    ] {
        b.push(Series::new(name, ranks.clone(), values).map_err(anyhow::Error::from)?);
    }
    b.set(
        "units_by_rank",
        prof.points
            .iter()
            .map(|p| panel.units[p.index].as_str())
            .collect::<Vec<_>>()
            .join(","),
    );
    let missing: Vec<String> = prof
        .missing
        .iter()
        .map(|m| format!("{}@{}: {}", panel.units[m.index], m.rank, m.reason))
        .collect();
    b.set("missing_count", prof.missing.len());
    b.set("missing", missing.join("; "));
    for (name, values) in [("d1", prof.d1_values()), ("d2", prof.d2_values())] {
        let rho = spearman_correlation(&ranks, &values).map_or("NaN".to_string(), |r| r.to_string());
        b.set(format!("spearman.{name}"), rho);
    }
    emit(&b, &args.input)
}

fn cmd_cv(args: &CvArgs) -> Outcome<()> {
    let panel = load(&args.input)?;
    let spec = KernelSpec::from(args.input.kernel);
    let solver = args.solver.config();
    let cfg = cv_config(args.min_neighbors, args.predictor, solver);
    let mut b = ResultBundle::new(BundleKind::CvTrace);
    input_meta(&mut b, "cv", &args.input);
    solver_meta(&mut b, &solver);
    b.set("cv.grid", &args.grid);
    b.set("cv.min_neighbors", args.min_neighbors);
    b.set("cv.predictor", predictor_name(cfg.predictor));

    let hs = candidates(&panel, &args.grid)?;
    let cv = select_bandwidth(&panel.sample, &BandwidthGrid::Explicit(hs.clone()), spec, &cfg)
        .context("cross-validating the bandwidth")?;
    let score: Vec<f64> = hs
        .iter()
        .map(|h| {
            cv.scores
                .iter()
                .find(|(c, _)| c == h)
                .map_or(f64::NAN, |(_, v)| *v)
        })
        .collect();
    b.push(Series::new("score", hs, score).map_err(anyhow::Error::from)?);
    b.set("h_opt", cv.h_opt);
    b.set(
        "infeasible",
        cv.infeasible.iter().map(|h| fmt_num(*h)).collect::<Vec<_>>().join(","),
    );
    emit(&b, &args.input)
}

fn run(cli: Cli) -> Outcome<()> {
    configure_threads()?;
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::FitQuantiles(a) => cmd_fit_quantiles(a),
        Command::DepthSet(a) => cmd_depth_set(a),
        Command::SpreadProfile(a) => cmd_spread_profile(a),
        Command::Cv(a) => cmd_cv(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("fq: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("fq: {e:#}");
            ExitCode::from(1)
        }
    }
}
