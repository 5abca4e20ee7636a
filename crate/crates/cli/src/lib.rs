//! Command-line driver: reads measure-spec files, runs one command and
//! writes a `contraction-lab.report.v1` report plus CSV artifacts.
//!
//! Exit status: 0 when no entry fails, 1 on a failed check, 2 on a
//! configuration error (nothing is written), 3 when a solver does not
//! converge (the partial report is still written).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use contraction_lab::grid_ot::{fit_box, solve_entropic, EntropicConfig, BOX_TRUNCATION};
use contraction_lab::heatflow::{
    integrate_flow, inverse_flow_map, logconcavity_probe, pushforward_consistency, FlowConfig,
    FlowPotential, DEFAULT_DT, DEFAULT_GH_ORDER, DEFAULT_T_MAX,
};
use contraction_lab::inequalities::{run_suite, SuiteConfig, CHECKS};
use contraction_lab::map::TransportMap;
use contraction_lab::measures::{
    audit_grid, make_standard_gaussian, MeasureKind, MeasureSpec,
};
use contraction_lab::radial::{contraction_criterion, RadialMap};
use contraction_lab::report::{digest, theorem, CheckEntry, Comparison, VerificationReport};
use contraction_lab::transport1d::{monotone_map, rows_to_csv, MonotoneMap};
use contraction_lab::verify::{
    contraction_claim, entropic_jacobian_sup, entropic_lipschitz, lipschitz_entry,
    lipschitz_pairwise, lp_norm_check, PairSampler,
};
use contraction_lab::Error;

/// Default master seed.
pub const DEFAULT_SEED: u64 = 20_240_917;
/// Slack on 1-D Lipschitz claims (exact derivative, interpolated tables).
pub const LIP_TOL_1D: f64 = 1e-6;
/// Slack on entropic Lipschitz claims: grid spacing plus regularization.
pub const ENTROPIC_BUDGET: f64 = 0.05;
/// Grid of the 1-D derivative sup: 4001 points over `[-8, 8]` (clipped to
/// the map's window).
pub const GRID_1D: (f64, usize) = (8.0, 4001);

#[derive(Parser, Debug, Clone)]
#[command(name = "contraction-lab", version, about = "Transport maps and contraction certificates")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Report path; CSV artifacts are written next to it as `<stem>.<name>.csv`.
    #[arg(long, global = true, default_value = "report.json")]
    pub out: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Master seed of every random stream.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// Build the transport map between two spec files and export it.
    Solve(PairArgs),
    /// Integrate the heat-flow transport towards a target.
    Flow(FlowArgs),
    /// Certify Lipschitz and L^p bounds for a source/target pair.
    Verify(PairArgs),
    /// Monte Carlo and quadrature checks of the Gaussian inequalities.
    Inequalities(IneqArgs),
    /// Re-render an existing JSON report.
    Report(ReportArgs),
}

#[derive(Args, Debug, Clone)]
pub struct PairArgs {
    #[arg(long)]
    pub source: PathBuf,
    #[arg(long)]
    pub target: PathBuf,
    /// Cells per axis of the entropic grids (8..=512).
    #[arg(long, default_value_t = 64)]
    pub grid_n: usize,
    #[arg(long, default_value_t = 1.0)]
    pub eps_start: f64,
    #[arg(long, default_value_t = 5e-3)]
    pub eps_end: f64,
    /// Sinkhorn marginal tolerance, in (0, 1).
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 20_000)]
    pub max_iter: usize,
    /// Random pairs for the 1-D pairwise estimate.
    #[arg(long, default_value_t = 10_000)]
    pub n_pairs: usize,
}

#[derive(Args, Debug, Clone)]
pub struct FlowArgs {
    /// Separable quartic target; the source is the standard Gaussian.
    #[arg(long)]
    pub target: PathBuf,
    #[arg(long, default_value_t = DEFAULT_T_MAX)]
    pub t_max: f64,
    #[arg(long, default_value_t = DEFAULT_DT)]
    pub dt: f64,
    #[arg(long, default_value_t = DEFAULT_GH_ORDER)]
    pub gh_order: usize,
    /// Number of seeds, evenly spaced on [-2.6, 2.6] in every coordinate.
    #[arg(long, default_value_t = 261)]
    pub seeds: usize,
}

#[derive(Args, Debug, Clone)]
pub struct IneqArgs {
    /// Comma list; default all.
    #[arg(long, value_delimiter = ',')]
    pub checks: Option<Vec<String>>,
    #[arg(long, default_value_t = 1_000_000)]
    pub n_samples: usize,
    /// 1-D measure for the profile and concentration checks.
    #[arg(long)]
    pub measure: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct ReportArgs {
    #[arg(long)]
    pub input: PathBuf,
}

/// Outcome of a run: exit status and the files written.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub code: i32,
    pub written: Vec<PathBuf>,
    pub message: Option<String>,
}

/// Errors before any computation (exit 2).
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

struct Run {
    report: VerificationReport,
    artifacts: Vec<(String, String)>,
}

impl Run {
    fn new() -> Self {
        Run {
            report: VerificationReport::new(),
            artifacts: Vec::new(),
        }
    }

    fn meta(&mut self, k: &str, v: impl ToString) {
        self.report.metadata.insert(k.to_string(), v.to_string());
    }
}

fn progress(msg: &str) {
    eprintln!("contraction-lab: {msg}");
}

fn numerical(e: &Error) -> bool {
    matches!(
        e,
        Error::NonConvergence { .. }
            | Error::Quadrature { .. }
            | Error::Underflow(_)
            | Error::NotInvertible(_)
            | Error::EmptyRow(_)
    )
}

fn load(path: &Path) -> Result<(MeasureSpec, String), ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    let m = contraction_lab::measures::parse_spec(&text)
        .map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    Ok((m, digest(&text)))
}

fn check(ok: bool, msg: &str) -> Result<(), ConfigError> {
    if ok {
        Ok(())
    } else {
        Err(ConfigError(msg.to_string()))
    }
}

impl PairArgs {
    fn validate(&self) -> Result<(), ConfigError> {
        check((8..=512).contains(&self.grid_n), "--grid-n must lie in 8..=512")?;
        check(
            self.eps_start.is_finite() && self.eps_end > 0.0 && self.eps_end <= self.eps_start,
            "need 0 < --eps-end <= --eps-start",
        )?;
        check(self.tol > 0.0 && self.tol < 1.0, "--tol must lie in (0, 1)")?;
        check(self.max_iter >= 1, "--max-iter must be positive")?;
        check(self.n_pairs >= 1, "--n-pairs must be positive")
    }
}

impl FlowArgs {
    fn validate(&self) -> Result<(), ConfigError> {
        check(self.t_max > 0.0 && self.t_max <= 100.0, "--t-max must lie in (0, 100]")?;
        check(self.dt > 0.0 && self.dt <= self.t_max, "need 0 < --dt <= --t-max")?;
        check((2..=200).contains(&self.gh_order), "--gh-order must lie in 2..=200")?;
        check((2..=10_000).contains(&self.seeds), "--seeds must lie in 2..=10000")
    }
}

/// Parses, validates and runs one command, writing the report and its
/// artifacts. Never panics on bad input.
pub fn run(cli: &Cli) -> Outcome {
    match execute(cli) {
        Ok(o) => o,
        Err(e) => Outcome {
            code: 2,
            written: Vec::new(),
            message: Some(e.0),
        },
    }
}

fn execute(cli: &Cli) -> Result<Outcome, ConfigError> {
    if let Some(j) = cli.common.jobs {
        check(j >= 1, "--jobs must be positive")?;
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(j).build_global();
    }
    let mut run = Run::new();
    run.meta("seed", cli.common.seed);
    let result = match &cli.command {
        Command::Solve(a) | Command::Verify(a) => {
            a.validate()?;
            let verify = matches!(cli.command, Command::Verify(_));
            let (source, sd) = load(&a.source)?;
            let (target, td) = load(&a.target)?;
            run.meta("command", if verify { "verify" } else { "solve" });
            run.meta("source", &source.name);
            run.meta("source_digest", sd);
            run.meta("target", &target.name);
            run.meta("target_digest", td);
            pair_command(&mut run, a, &source, &target, verify, cli.common.seed)
        }
        Command::Flow(a) => {
            a.validate()?;
            let (target, td) = load(&a.target)?;
            run.meta("command", "flow");
            run.meta("target", &target.name);
            run.meta("target_digest", td);
            flow_command(&mut run, a, &target)
        }
        Command::Inequalities(a) => {
            let checks: Vec<String> = match &a.checks {
                Some(c) => c.iter().map(|s| s.trim().to_string()).collect(),
                None => CHECKS.iter().map(|s| s.to_string()).collect(),
            };
            if let Some(bad) = checks.iter().find(|c| !CHECKS.contains(&c.as_str())) {
                return Err(ConfigError(format!(
                    "unknown check '{bad}' (known: {})",
                    CHECKS.join(", ")
                )));
            }
            check(a.n_samples >= 1000, "--n-samples must be at least 1000")?;
            let measure = match &a.measure {
                Some(p) => {
                    let (m, d) = load(p)?;
                    check(m.dim() == 1, "--measure must be one-dimensional")?;
                    run.meta("measure", &m.name);
                    run.meta("measure_digest", d);
                    Some(m)
                }
                None => None,
            };
            run.meta("command", "inequalities");
            run.meta("checks", checks.join(","));
            run.meta("n_samples", a.n_samples);
            progress(&format!("running {} check(s)", checks.len()));
            let cfg = SuiteConfig {
                n_samples: a.n_samples,
                seed: cli.common.seed,
                measure,
            };
            run_suite(&checks, &cfg).map(|out| {
                for e in out.entries {
                    run.report.push(e);
                }
                run.artifacts.extend(out.artifacts);
            })
        }
        Command::Report(a) => {
            let text = std::fs::read_to_string(&a.input)
                .map_err(|e| ConfigError(format!("{}: {e}", a.input.display())))?;
            run.report = VerificationReport::from_json(&text)
                .map_err(|e| ConfigError(format!("{}: {e}", a.input.display())))?;
            Ok(())
        }
    };
    let (code, message) = match result {
        Ok(()) if run.report.all_passed() => (0, None),
        Ok(()) => (1, Some("one or more checks failed".to_string())),
        Err(e) if numerical(&e) => {
            run.meta("error", &e);
            (3, Some(e.to_string()))
        }
        Err(e) => return Err(ConfigError(e.to_string())),
    };
    let written = write_outputs(&run, &cli.common)?;
    Ok(Outcome {
        code,
        written,
        message,
    })
}

fn artifact_path(out: &Path, name: &str) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "report".into());
    out.with_file_name(format!("{stem}.{name}.csv"))
}

fn write_outputs(run: &Run, common: &Common) -> Result<Vec<PathBuf>, ConfigError> {
    let body = match common.format {
        Format::Json => run.report.to_json(),
        Format::Csv => run.report.to_csv(),
    };
    let mut files = vec![(common.out.clone(), body)];
    for (name, csv) in &run.artifacts {
        files.push((artifact_path(&common.out, name), csv.clone()));
    }
    let mut written = Vec::new();
    for (path, body) in files {
        std::fs::write(&path, body).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        written.push(path);
    }
    Ok(written)
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..n)
        .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
        .collect()
}

fn pair_command(
    run: &mut Run,
    a: &PairArgs,
    source: &MeasureSpec,
    target: &MeasureSpec,
    verify: bool,
    seed: u64,
) -> contraction_lab::Result<()> {
    if source.dim() != target.dim() {
        return Err(Error::InvalidArgument(format!(
            "dimensions differ: {} vs {}",
            source.dim(),
            target.dim()
        )));
    }
    match (source.dim(), &target.kind) {
        (1, _) => one_d(run, a, source, target, verify, seed),
        (d, MeasureKind::Radial { psi, .. }) if d >= 2 => {
            // Lebesgue measure is the radial family with profile one
            let lebesgue = matches!(&source.kind, MeasureKind::Radial { psi, .. } if psi.name() == "const(1)");
            if !lebesgue {
                return Err(Error::Unsupported(
                    "radial targets take Lebesgue measure (radial, profile = one) as source".into(),
                ));
            }
            radial(run, psi, d, target)
        }
        (2, _) => entropic(run, a, source, target, verify),
        (d, _) => Err(Error::Unsupported(format!("transport in dimension {d}"))),
    }
}

fn one_d(
    run: &mut Run,
    a: &PairArgs,
    source: &MeasureSpec,
    target: &MeasureSpec,
    verify: bool,
    seed: u64,
) -> contraction_lab::Result<()> {
    progress("building monotone map");
    let map = monotone_map(source, target)?;
    let (lo, hi) = map.window();
    let grid: Vec<f64> = linspace(-GRID_1D.0, GRID_1D.0, GRID_1D.1)
        .into_iter()
        .filter(|x| *x > lo && *x < hi)
        .collect();
    if grid.is_empty() {
        return Err(Error::EmptySamples);
    }
    run.artifacts.push(("map".into(), rows_to_csv(&map.tabulate(&grid)?)));
    let sup = map.sup_derivative(&grid)?;
    let audit: Vec<Vec<f64>> = linspace(grid[0], grid[grid.len() - 1], 401)
        .into_iter()
        .map(|x| vec![x])
        .collect();
    let claim = contraction_claim(source, target, &audit);
    let inputs = format!("{}|{}|grid={}", source.name, target.name, grid.len());
    run.report.push(
        lipschitz_entry("lipschitz_sup_derivative", sup, claim, LIP_TOL_1D, &inputs)
            .with_detail("inf_derivative", map.inf_derivative(&grid)?),
    );
    if verify {
        pairwise_1d(run, &map, (grid[0], grid[grid.len() - 1]), sup, a.n_pairs, seed)?;
        if let (Some(_), Some(w)) = (source.potential(), target.potential()) {
            match w.convexity_lower_bound {
                Some(k) if k > 0.0 && source.is_probability() => {
                    progress("L^p estimates");
                    for e in lp_norm_check(&map, source, k, &[1.0, 2.0, 4.0, f64::INFINITY])? {
                        run.report.push(e);
                    }
                }
                _ => {}
            }
        }
    }
    Ok(())
}

// the pairwise quotient never exceeds the derivative sup by more than
// interpolation noise
fn pairwise_1d(
    run: &mut Run,
    map: &MonotoneMap,
    window: (f64, f64),
    sup: f64,
    n: usize,
    seed: u64,
) -> contraction_lab::Result<()> {
    let pairs = PairSampler::Local {
        window: vec![window],
        radius: 0.5,
    }
    .sample(n, seed);
    let pw = lipschitz_pairwise(map, &pairs)?;
    run.report.push(
        CheckEntry::compare("lipschitz_pairwise", theorem::AUDIT, pw.value, sup, Comparison::AtMost, 1e-6)
            .with_inputs(&format!("{window:?}|n={n}"))
            .with_seed(seed)
            .with_detail("pairs", pw.pairs as f64),
    );
    Ok(())
}

fn radial(
    run: &mut Run,
    psi: &contraction_lab::measures::ScalarProfile,
    d: usize,
    target: &MeasureSpec,
) -> contraction_lab::Result<()> {
    progress("building radial map");
    let r_grid = linspace(0.01, 4.0, 400);
    let map = RadialMap::to_measure(target, 4.0, 400)?;
    run.artifacts.push(("radial".into(), map.export_csv(&r_grid)));
    run.report.push(contraction_criterion(psi, d, &r_grid)?);
    Ok(())
}

fn entropic(
    run: &mut Run,
    a: &PairArgs,
    source: &MeasureSpec,
    target: &MeasureSpec,
    verify: bool,
) -> contraction_lab::Result<()> {
    let mut cfg = EntropicConfig::new(fit_box(source, BOX_TRUNCATION)?, fit_box(target, BOX_TRUNCATION)?);
    cfg.grid_n = a.grid_n;
    cfg.eps_start = a.eps_start;
    cfg.eps_end = a.eps_end;
    cfg.tol = a.tol;
    cfg.max_iter = a.max_iter;
    run.meta("grid_n", cfg.grid_n);
    run.meta("eps_schedule", format!("{}..{}", cfg.eps_start, cfg.eps_end));
    run.meta("tol", cfg.tol);
    run.meta("max_iter", cfg.max_iter);
    progress(&format!("entropic solve on {0}x{0} grids", cfg.grid_n));
    let (map, stages) = solve_entropic(source, target, &cfg)?;
    let mut st = String::from("epsilon,iterations,marginal_error,converged\n");
    for s in &stages {
        let _ = writeln!(st, "{:e},{},{:e},{}", s.epsilon, s.iterations, s.marginal_error, s.converged as u8);
    }
    run.artifacts.push(("stages".into(), st));
    run.artifacts.push(("map".into(), map.export_csv()?));
    run.artifacts.push(("duals".into(), map.coupling().duals_csv()));
    let audit = audit_grid(&cfg.source_box, 13);
    let claim = contraction_claim(source, target, &audit);
    let inputs = format!("{}|{}|{cfg:?}", source.name, target.name);
    let pw = entropic_lipschitz(&map)?;
    run.report.push(
        lipschitz_entry("lipschitz_pairwise", pw.value, claim, ENTROPIC_BUDGET, &inputs)
            .with_detail("pairs", pw.pairs as f64)
            .with_detail("spacing", cfg.spacing()),
    );
    if verify {
        let jac = entropic_jacobian_sup(&map)?;
        run.report.push(lipschitz_entry(
            "lipschitz_jacobian_sup",
            jac,
            claim,
            ENTROPIC_BUDGET,
            &inputs,
        ));
    }
    Ok(())
}

fn flow_command(run: &mut Run, a: &FlowArgs, target: &MeasureSpec) -> contraction_lab::Result<()> {
    let u = FlowPotential::from_measure(target)?;
    let d = u.dim();
    let seeds: Vec<Vec<f64>> = linspace(-2.6, 2.6, a.seeds).into_iter().map(|x| vec![x; d]).collect();
    let steps = (a.t_max / a.dt).ceil() as usize;
    let cfg = FlowConfig {
        t_max: a.t_max,
        dt: a.dt,
        gh_order: a.gh_order,
        record_every: (steps / 10).max(1),
    };
    run.meta("t_max", a.t_max);
    run.meta("dt", a.dt);
    run.meta("gh_order", a.gh_order);
    run.meta("seeds", a.seeds);
    progress(&format!("integrating {} seeds over {steps} steps", a.seeds));
    let fs = integrate_flow(&u, &seeds, cfg)?;
    run.artifacts.push(("trajectory".into(), fs.trajectory_csv()));
    let ts = [0.0, 0.1, 0.5, 1.0, 2.0];
    let xs = linspace(-4.0, 4.0, 33);
    run.report.push(logconcavity_probe(&u, &ts, &xs, a.gh_order)?);
    let t = inverse_flow_map(&fs)?;
    let probe: Vec<Vec<f64>> = linspace(-4.0, 4.0, 81).into_iter().map(|x| vec![x; d]).collect();
    let mut sup_jac: f64 = 0.0;
    for y in &probe {
        let j = t.jacobian(y)?;
        for i in 0..d {
            sup_jac = sup_jac.max(j[(i, i)]);
        }
    }
    let inputs = format!("{:?}|dt={}|m={}", u.coords, a.dt, a.gh_order);
    run.report.push(
        CheckEntry::compare_abs("flow_sup_derivative", theorem::HEAT_FLOW, sup_jac, 1.0, Comparison::AtMost, 1e-4)
            .with_inputs(&inputs)
            .with_detail("residual_velocity", fs.residual_velocity)
            .with_detail("halved_steps", fs.halved_steps as f64),
    );
    if d == 1 {
        run.report.push(pushforward_consistency(&fs, 9)?);
        progress("cross-check against the monotone map");
        let mono = monotone_map(&make_standard_gaussian(1)?, target)?;
        let mut worst: f64 = 0.0;
        for y in &probe {
            worst = worst.max((t.forward(y)?[0] - mono.apply(y[0])?).abs());
        }
        run.report.push(
            CheckEntry::compare_abs("flow_vs_monotone", theorem::FLOW_TRANSPORT, worst, 0.0, Comparison::AtMost, 1e-4)
                .with_inputs(&inputs),
        );
    }
    Ok(())
}

/// Writes a one-line status summary for `outcome` to standard error.
pub fn summarize(outcome: &Outcome) {
    for p in &outcome.written {
        progress(&format!("wrote {}", p.display()));
    }
    if let Some(m) = &outcome.message {
        progress(m);
    }
}

