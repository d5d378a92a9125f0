mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use helmplan::billiards::{classify_regions, fill_survival, sample_phase_space, VolumeWeight};
use helmplan::experiments::{
    adaptive_refine, emit_report, fit_rate, gaussian_beam, k_n, ray_profile, rho_values, run_regime_sweep, RayParams, RhoSource,
    SourceKind, SweepResult,
};
use helmplan::fem::{galerkin, generate_mesh, local_norm, FeSpace, Medium};
use helmplan::graph_paths::{certify_bound, WeightedDigraph};
use helmplan::io::{read_matrix_csv, to_json_string, write_csv, write_json};
use helmplan::planner::{build_matrices, check_conditions, dof_estimate, mesh_budgets, size_field, Regime, RegimeSpec};
use helmplan::pml::{Formulation, PmlProfile};
use helmplan::{RegionTag, Scene, Vec2};

use config::{RunConfig, SceneSource};

/// Failure classes mapped to exit codes 2 and 1.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Domain(helmplan::Error),
}

impl From<helmplan::Error> for CliError {
    fn from(e: helmplan::Error) -> Self {
        CliError::Domain(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Domain(e) => write!(f, "{e}"),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

/// Mesh planning, solving and verification for high-frequency Helmholtz problems.
///
/// The worker count of parallel stages can be set with HELM_THREADS.
#[derive(Parser)]
#[command(name = "helmplan", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Trace billiard rays: trapped-set samples and rho(k) estimates.
    Trace(TraceArgs),
    /// Per-region mesh budget, propagation matrices and mesh conditions.
    Plan(PlanArgs),
    /// Simple-path graph computations.
    #[command(subcommand)]
    Graph(GraphCommand),
    /// Generate a mesh for a planned budget.
    Mesh(MeshArgs),
    /// Solve one PML-truncated Helmholtz problem with a Gaussian-beam source.
    Solve(SolveArgs),
    /// Regime sweeps and the adaptive loop.
    #[command(subcommand)]
    Experiment(ExperimentCommand),
    /// Regenerate CSV tables, plots and the summary from a saved sweep.
    Report(ReportArgs),
}

#[derive(Args)]
struct SceneArgs {
    /// Scene JSON file; the built-in two-wall scene when omitted.
    #[arg(long)]
    scene: Option<PathBuf>,
    /// Use the two-wall scene with the right wall shifted upwards.
    #[arg(long, conflicts_with = "scene")]
    shifted: bool,
}

impl SceneArgs {
    fn source(&self) -> SceneSource {
        match (&self.scene, self.shifted) {
            (Some(p), _) => SceneSource::Path(p.clone()),
            (None, true) => SceneSource::TwoWallShifted,
            (None, false) => SceneSource::TwoWall,
        }
    }
}

#[derive(Args)]
struct RayArgs {
    /// Launch lattice spacing (default L_gap / 20).
    #[arg(long)]
    delta: Option<f64>,
    /// Number of launch directions.
    #[arg(long, default_value_t = 4096)]
    directions: usize,
    /// Survival time horizon.
    #[arg(long, default_value_t = 400.0)]
    t_max: f64,
    /// Phase-space volume weight.
    #[arg(long, value_enum, default_value_t = WeightArg::PhaseCell)]
    weight: WeightArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum WeightArg {
    PhaseCell,
    LatticeCube,
}

impl RayArgs {
    fn params(&self) -> RayParams {
        let d = RayParams::default();
        RayParams {
            delta: self.delta.unwrap_or(d.delta),
            directions: self.directions,
            t_max: self.t_max,
            weight: match self.weight {
                WeightArg::PhaseCell => VolumeWeight::PhaseCell,
                WeightArg::LatticeCube => VolumeWeight::LatticeCube,
            },
        }
    }
}

#[derive(Args)]
struct TraceArgs {
    #[command(flatten)]
    scene: SceneArgs,
    #[command(flatten)]
    rays: RayArgs,
    /// Wavenumber indices n (k = n pi / L_gap) at which rho is reported.
    #[arg(long, value_delimiter = ',', default_values_t = [6u32, 8, 10, 12, 14])]
    ns: Vec<u32>,
    /// Inflation radius of the trapped-set samples (default delta).
    #[arg(long)]
    inflation: Option<f64>,
    /// Directory for trace.json and the sample CSVs.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct WaveArgs {
    /// Wavenumber index, k = n pi / L_gap.
    #[arg(long, conflicts_with = "k", required_unless_present = "k")]
    n: Option<u32>,
    /// Wavenumber.
    #[arg(long)]
    k: Option<f64>,
}

impl WaveArgs {
    fn k(&self) -> CliResult<f64> {
        let k = match (self.n, self.k) {
            (Some(n), _) => k_n(n),
            (None, Some(k)) => k,
            (None, None) => return Err(CliError::Config("give --n or --k".into())),
        };
        if !(k > 0.0 && k.is_finite()) {
            return Err(CliError::Config("wavenumber must be positive".into()));
        }
        Ok(k)
    }
}

#[derive(Args)]
struct BudgetArgs {
    #[command(flatten)]
    wave: WaveArgs,
    /// Regime: U1, QO, QOaway, U2, RE or REaway.
    #[arg(long)]
    regime: String,
    /// Polynomial degree.
    #[arg(long, default_value_t = 2)]
    p: u32,
    /// Threshold constant.
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    /// Fixed h_P k (derived from c when omitted).
    #[arg(long)]
    hp_k: Option<f64>,
    /// rho(k): `conjectured` (k^2), `rays`, or a number a meaning k^a.
    #[arg(long, default_value = "conjectured")]
    rho: String,
    #[command(flatten)]
    scene: SceneArgs,
}

struct Planned {
    scene: Scene,
    k: f64,
    rho: f64,
    spec: RegimeSpec,
}

impl BudgetArgs {
    fn resolve(&self) -> CliResult<Planned> {
        let regime: Regime = self.regime.parse().map_err(|e: helmplan::Error| CliError::Config(e.to_string()))?;
        let source = match self.rho.as_str() {
            "conjectured" => RhoSource::Conjectured,
            "rays" => RhoSource::Rays(RayParams::default()),
            s => RhoSource::Power {
                exponent: s.parse().map_err(|_| CliError::Config(format!("--rho must be conjectured, rays or a number, got {s}")))?,
            },
        };
        let k = self.wave.k()?;
        let scene = self.scene.source().load()?;
        let rho = rho_values(&source, &scene, &[k])?[0];
        Ok(Planned { scene, k, rho, spec: RegimeSpec { hp_k: self.hp_k, ..RegimeSpec::new(regime, self.p, self.c) } })
    }
}

#[derive(Args)]
struct PlanArgs {
    #[command(flatten)]
    budget: BudgetArgs,
    /// Also write the JSON to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum GraphCommand {
    /// Certify the simple-path bound T* <= sum W^m <= T*/(1-c).
    Certify {
        /// Headerless CSV weight matrix.
        #[arg(long)]
        matrix: PathBuf,
        /// Number of Neumann terms.
        #[arg(long, default_value_t = 200)]
        terms: usize,
    },
}

#[derive(Args)]
struct MeshArgs {
    #[command(flatten)]
    budget: BudgetArgs,
    /// Size-field grading.
    #[arg(long, default_value_t = 0.3)]
    grading: f64,
    /// Output mesh file (text format).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    budget: BudgetArgs,
    #[arg(long, default_value_t = 0.3)]
    grading: f64,
    /// Beam source: `in` (cavity centre) or `out` (from outside, aimed at the right wall).
    #[arg(long, value_enum, default_value_t = SourceArg::In)]
    source: SourceArg,
    /// Output directory for solution.csv and solve.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum SourceArg {
    In,
    Out,
}

impl SourceArg {
    fn kind(self) -> SourceKind {
        match self {
            SourceArg::In => SourceKind::In,
            SourceArg::Out => SourceKind::Out,
        }
    }
}

#[derive(Subcommand)]
enum ExperimentCommand {
    /// Run the sweep and/or adaptive loop described by a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides `out_dir` in the config).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ReportArgs {
    /// sweep.json written by `experiment run`.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

/// Writes JSON to stdout; a closed pipe is not an error.
fn print_json<T: Serialize>(value: &T) -> CliResult<()> {
    use std::io::Write;
    match writeln!(std::io::stdout().lock(), "{}", to_json_string(value)?) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(helmplan::Error::from(e).into()),
        _ => Ok(()),
    }
}

fn trace(args: &TraceArgs) -> CliResult<()> {
    #[derive(Serialize)]
    struct Trace {
        params: RayParams,
        k_hat_count: usize,
        v_hat_count: usize,
        ns: Vec<u32>,
        ks: Vec<f64>,
        rho: Vec<f64>,
        rho_exponent: Option<f64>,
    }
    let scene = args.scene.source().load()?;
    let params = args.rays.params();
    if args.ns.contains(&0) {
        return Err(CliError::Config("n must be positive".into()));
    }
    let grid = fill_survival(&scene, sample_phase_space(&scene, params.delta, params.directions)?, params.t_max)?;
    let sets = classify_regions(&scene, &grid, args.inflation.unwrap_or(params.delta))?;
    let profile = ray_profile(&scene, &params)?;
    let ks: Vec<f64> = args.ns.iter().map(|&n| k_n(n)).collect();
    let rho = ks.iter().map(|&k| helmplan::billiards::estimate_rho(&profile, k)).collect::<helmplan::Result<Vec<_>>>()?;
    let rho_exponent = fit_rate(&ks, &rho).ok().map(|f| f.slope);
    let out = Trace { params, k_hat_count: sets.k_hat.len(), v_hat_count: sets.v_hat.len(), ns: args.ns.clone(), ks, rho, rho_exponent };
    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir).map_err(helmplan::Error::from)?;
        write_json(&dir.join("trace.json"), &out)?;
        let pts = |v: &[Vec2]| v.iter().map(|p| vec![helmplan::io::fmt_f64(p.x), helmplan::io::fmt_f64(p.y)]).collect::<Vec<_>>();
        write_csv(&dir.join("k_hat.csv"), &["x", "y"], &pts(&sets.k_hat))?;
        write_csv(&dir.join("v_hat.csv"), &["x", "y"], &pts(&sets.v_hat))?;
    }
    print_json(&out)
}

fn plan(args: &PlanArgs) -> CliResult<()> {
    #[derive(Serialize)]
    struct Plan {
        spec: RegimeSpec,
        k: f64,
        rho: f64,
        budget: helmplan::planner::MeshBudget,
        dof_estimate: f64,
        matrices: helmplan::planner::PropagationMatrices,
        conditions: helmplan::planner::ConditionReport,
    }
    let pl = args.budget.resolve()?;
    let budget = mesh_budgets(&pl.spec, pl.k, pl.rho)?;
    let out = Plan {
        spec: pl.spec,
        k: pl.k,
        rho: pl.rho,
        budget,
        dof_estimate: dof_estimate(&pl.scene, &budget, pl.spec.p)?,
        matrices: build_matrices(&budget, pl.k, pl.rho, pl.spec.p),
        conditions: check_conditions(&budget, pl.k, pl.rho, pl.spec.p, pl.spec.c)?,
    };
    if let Some(path) = &args.out {
        write_json(path, &out)?;
    }
    print_json(&out)
}

fn graph(cmd: &GraphCommand) -> CliResult<()> {
    match cmd {
        GraphCommand::Certify { matrix, terms } => {
            let rows = read_matrix_csv(matrix).map_err(|e| CliError::Config(format!("{}: {e}", matrix.display())))?;
            let g = WeightedDigraph::new(rows).map_err(|e| CliError::Config(e.to_string()))?;
            print_json(&certify_bound(&g, *terms)?)
        }
    }
}

fn build_mesh(pl: &Planned, grading: f64) -> CliResult<(helmplan::planner::MeshBudget, helmplan::fem::Mesh)> {
    let budget = mesh_budgets(&pl.spec, pl.k, pl.rho)?;
    let field = size_field(&pl.scene, &budget, grading)?;
    let mesh = generate_mesh(&pl.scene, &|x| field.eval(x))?;
    Ok((budget, mesh))
}

fn mesh(args: &MeshArgs) -> CliResult<()> {
    #[derive(Serialize)]
    struct MeshInfo {
        budget: helmplan::planner::MeshBudget,
        nodes: usize,
        triangles: usize,
        quality: helmplan::fem::MeshQuality,
    }
    let pl = args.budget.resolve()?;
    let (budget, mesh) = build_mesh(&pl, args.grading)?;
    std::fs::write(&args.out, mesh.to_text()).map_err(helmplan::Error::from)?;
    print_json(&MeshInfo { budget, nodes: mesh.nodes.len(), triangles: mesh.triangles.len(), quality: mesh.quality() })
}

fn solve(args: &SolveArgs) -> CliResult<()> {
    #[derive(Serialize)]
    struct SolveInfo {
        k: f64,
        rho: f64,
        budget: helmplan::planner::MeshBudget,
        dofs: usize,
        elements: usize,
        /// `||u_h||_{H^1_k}` on K, V, I, P and the whole domain.
        norms: [f64; 5],
    }
    let mut pl = args.budget.resolve()?;
    let kind = args.source.kind();
    if matches!(args.budget.scene.source(), SceneSource::TwoWall | SceneSource::TwoWallShifted) {
        pl.scene = kind.scene();
    }
    let (budget, mesh) = build_mesh(&pl, args.grading)?;
    let elements = mesh.triangles.len();
    let medium = Medium::Pml(PmlProfile::new(pl.scene.r_pml_minus, pl.scene.r_tr, Formulation::DivergenceForm)?);
    let beam = gaussian_beam(kind.beam(&pl.scene, pl.k)?)?;
    let f = move |x: Vec2| beam.eval(x);
    let space = Arc::new(FeSpace::new(Arc::new(mesh), pl.spec.p as usize)?);
    let uh = galerkin(space.clone(), &medium, pl.k, &f, None)?;
    let mut norms = [0.0; 5];
    for (i, tag) in [RegionTag::K, RegionTag::V, RegionTag::I, RegionTag::P].into_iter().enumerate() {
        if let Some(r) = pl.scene.cover.get(tag) {
            norms[i] = local_norm(&uh, &|x| r.contains(x), 1, pl.k);
        }
    }
    norms[4] = local_norm(&uh, &|_| true, 1, pl.k);
    std::fs::create_dir_all(&args.out).map_err(helmplan::Error::from)?;
    write_csv(&args.out.join("solution.csv"), &["x", "y", "re", "im"], &uh.vertex_rows())?;
    let info = SolveInfo { k: pl.k, rho: pl.rho, budget, dofs: space.n_dofs, elements, norms };
    write_json(&args.out.join("solve.json"), &info)?;
    print_json(&info)
}

fn experiment(cmd: &ExperimentCommand) -> CliResult<()> {
    let ExperimentCommand::Run { config, out } = cmd;
    let cfg = RunConfig::load(config)?;
    let dir = out.clone().or(cfg.out_dir.clone()).ok_or_else(|| CliError::Config("no output directory (--out or out_dir)".into()))?;
    std::fs::create_dir_all(&dir).map_err(helmplan::Error::from)?;
    write_json(&dir.join("config.json"), &cfg)?;
    #[derive(Serialize)]
    struct RunOutput {
        summary: Option<helmplan::experiments::Summary>,
        adaptive: Option<helmplan::experiments::AdaptiveResult>,
    }
    let mut output = RunOutput { summary: None, adaptive: None };
    if let Some(sweep) = &cfg.sweep {
        let result = run_regime_sweep(sweep)?;
        write_json(&dir.join("sweep.json"), &result)?;
        output.summary = Some(emit_report(&result, &dir)?);
    }
    if let Some(a) = &cfg.adaptive {
        let scene = a.scene.load()?;
        let beam = gaussian_beam(a.source.beam(&scene, a.options.k)?)?;
        let f = move |x: Vec2| beam.eval(x);
        let result = adaptive_refine(&scene, &f, &a.options)?;
        write_json(&dir.join("adaptive.json"), &result)?;
        output.adaptive = Some(result);
    }
    print_json(&output)
}

fn load_sweep(path: &Path) -> CliResult<SweepResult> {
    #[derive(serde::Deserialize)]
    struct Envelope {
        format_version: u32,
        #[serde(flatten)]
        data: SweepResult,
    }
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let env: Envelope = serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    if env.format_version != helmplan::FORMAT_VERSION {
        return Err(CliError::Config(format!("{}: unsupported format_version {}", path.display(), env.format_version)));
    }
    Ok(env.data)
}

fn report(args: &ReportArgs) -> CliResult<()> {
    let result = load_sweep(&args.input)?;
    print_json(&emit_report(&result, &args.out)?)
}

fn dispatch(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Trace(a) => trace(a),
        Command::Plan(a) => plan(a),
        Command::Graph(c) => graph(c),
        Command::Mesh(a) => mesh(a),
        Command::Solve(a) => solve(a),
        Command::Experiment(c) => experiment(c),
        Command::Report(a) => report(a),
    }
}

fn init_threads() -> CliResult<()> {
    if let Ok(v) = std::env::var("HELM_THREADS") {
        let n: usize = v.parse().ok().filter(|n| *n > 0).ok_or_else(|| CliError::Config(format!("HELM_THREADS must be a positive integer, got {v}")))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::Config(e.to_string()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match init_threads().and_then(|_| dispatch(&cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("helmplan: {e}");
            match e {
                CliError::Config(_) => ExitCode::from(2),
                CliError::Domain(_) => ExitCode::from(1),
            }
        }
    }
}
