//! Settings resolution and execution of each subcommand.

use std::io::Write;
use std::path::PathBuf;

use trustnet_core::dynamics::{self, Direction, InitialCondition, RunSettings, SimError, SweepAxis, SweepResult};
use trustnet_core::master_eq::{self, InnerSolve, MasterEqError, RateClosure, SolveSettings, Truncation};
use trustnet_core::mean_field::{self, MeanFieldError, RhsKind, RootSearch};
use trustnet_core::Params;

use crate::config::{ConfigFile, Resolver};
use crate::output::{real, write_csv, write_csv_file, OutputError, Table};
use crate::{
    AxisArg, BranchArg, Cli, CliError, Command, DirectionArg, InitArg, MasterEqArgs, MeanFieldArgs, ModelArgs,
    PhaseDiagramArgs, RhsArg, RunArgs, SimulateArgs, SweepArgs,
};

pub const SIMULATE_COLUMNS: &[&str] = &[
    "gamma",
    "lambda",
    "nu",
    "b0",
    "c",
    "n",
    "rho_mean",
    "rho_std",
    "default_rate",
    "samples",
];
pub const DEGREE_COLUMNS: &[&str] = &["degree", "in_count", "out_count"];
pub const SWEEP_COLUMNS: &[&str] = &["c", "lambda", "nu", "b0", "direction", "rho_mean", "rho_std", "default_rate"];
pub const MASTER_EQ_COLUMNS: &[&str] = &[
    "c",
    "lambda",
    "nu",
    "b0",
    "init",
    "rho",
    "mean_b",
    "mu",
    "mu_ell",
    "mu_b",
    "iterations",
];
pub const MEAN_FIELD_COLUMNS: &[&str] = &["lambda", "c", "phase", "mu", "stable", "slope", "degenerate", "rho"];
pub const PHASE_COLUMNS: &[&str] = &["lambda", "c", "phase", "mu_roots"];

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Terminal | SimError::Network(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<MasterEqError> for CliError {
    fn from(e: MasterEqError) -> Self {
        match e {
            MasterEqError::Params(_) | MasterEqError::Settings(_) => CliError::Usage(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<MeanFieldError> for CliError {
    fn from(e: MeanFieldError) -> Self {
        match e {
            MeanFieldError::EvenRootCount { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

/// `n` points from `from` to `to`, both ends included.
pub fn linspace(from: f64, to: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![from],
        _ => (0..n).map(|k| from + (to - from) * k as f64 / (n - 1) as f64).collect(),
    }
}

/// `n` geometrically spaced points from `from` to `to`.
pub fn geomspace(from: f64, to: f64, n: usize) -> Vec<f64> {
    linspace(from.ln(), to.ln(), n).into_iter().map(f64::exp).collect()
}

fn resolve_params(r: &mut Resolver, m: &ModelArgs) -> Result<Params, CliError> {
    let d = Params::default();
    let params = Params {
        gamma: r.value("gamma", m.gamma, d.gamma)?,
        lambda: r.value("lambda", m.lambda, d.lambda)?,
        nu: r.value("nu", m.nu, d.nu)?,
        b0: r.value("b0", m.b0, d.b0)?,
        c: r.value("c", m.c, d.c)?,
        n_agents: r.value("n", m.n, d.n_agents)?,
    };
    params.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(params)
}

fn resolve_run(r: &mut Resolver, a: &RunArgs, params: &Params) -> Result<(RunSettings, u64), CliError> {
    if params.lambda <= 0.0 && (a.burn_in.is_none() || a.t_max.is_none()) {
        return Err(CliError::Usage(
            "lambda = 0 has no natural time scale; give --burn-in and --t-max".into(),
        ));
    }
    let defaults = if params.lambda > 0.0 {
        RunSettings::for_params(params)
    } else {
        RunSettings { t_max: 0.0, burn_in: 0.0, sample_interval: dynamics::default_sample_interval(params) }
    };
    let burn_in = r.value("burn-in", a.burn_in, defaults.burn_in)?;
    let t_max = r.value("t-max", a.t_max, 2.0 * burn_in)?;
    let sample_interval = r.value("sample-interval", a.sample_interval, defaults.sample_interval)?;
    let seed = r.value("seed", a.seed, 1)?;
    let settings = RunSettings { t_max, burn_in, sample_interval };
    settings.validate()?;
    Ok((settings, seed))
}

fn resolve_steps(r: &mut Resolver, key: &str, flag: Option<usize>, default: usize) -> Result<usize, CliError> {
    let steps = r.value(key, flag, default)?;
    if steps == 0 {
        return Err(CliError::Usage(format!("{key} must be at least 1")));
    }
    Ok(steps)
}

/// Destination of the main table.
enum Sink {
    Stdout,
    File(PathBuf),
}

fn sink(cli: &Cli, out_dir: Option<PathBuf>) -> Sink {
    match (&cli.out, out_dir) {
        (Some(path), _) => Sink::File(path.clone()),
        (None, Some(dir)) => Sink::File(dir.join(format!("{}.csv", cli.command.name()))),
        (None, None) => Sink::Stdout,
    }
}

pub fn execute(cli: &Cli, out_dir: Option<PathBuf>, stdout: &mut dyn Write) -> Result<(), CliError> {
    let file = cli.config.as_deref().map(ConfigFile::load).transpose()?;
    let mut r = Resolver::new(file);
    let name = cli.command.name();
    let table = match &cli.command {
        Command::Simulate(a) => simulate(&mut r, a, name)?,
        Command::Sweep(a) => sweep(&mut r, a)?,
        Command::MasterEq(a) => master_eq(&mut r, a)?,
        Command::MeanField(a) => mean_field(&mut r, a)?,
        Command::PhaseDiagram(a) => phase_diagram(&mut r, a)?,
    };
    match sink(cli, out_dir) {
        Sink::File(path) => write_csv_file(&path, name, r.resolved(), &table)?,
        Sink::Stdout => write_csv(&mut *stdout, name, r.resolved(), &table).map_err(|source| OutputError {
            path: PathBuf::from("<stdout>"),
            source,
        })?,
    }
    Ok(())
}

fn simulate(r: &mut Resolver, a: &SimulateArgs, name: &str) -> Result<Table, CliError> {
    let params = resolve_params(r, &a.model)?;
    let (settings, seed) = resolve_run(r, &a.run, &params)?;
    let initial = match r.choice("init", a.init, InitArg::Empty)? {
        InitArg::Empty => InitialCondition::Empty,
        InitArg::Dense => InitialCondition::Dense,
    };
    let outcome = dynamics::run(&params, &settings, seed, initial)?;
    let s = outcome.summary;
    let mut table = Table::new(SIMULATE_COLUMNS);
    table.push(vec![
        real(params.gamma),
        real(params.lambda),
        real(params.nu),
        real(params.b0),
        real(params.c),
        params.n_agents.to_string(),
        real(s.rho_mean),
        real(s.rho_std),
        real(s.default_rate),
        s.samples.to_string(),
    ]);
    if let Some(path) = &a.degrees {
        let ins = outcome.network.in_degree_histogram();
        let outs = outcome.network.out_degree_histogram();
        let mut degrees = Table::new(DEGREE_COLUMNS);
        for k in 0..ins.len().max(outs.len()) {
            let count = |h: &[usize]| h.get(k).copied().unwrap_or(0).to_string();
            degrees.push(vec![k.to_string(), count(&ins), count(&outs)]);
        }
        write_csv_file(path, name, r.resolved(), &degrees)?;
    }
    Ok(table)
}

fn sweep(r: &mut Resolver, a: &SweepArgs) -> Result<Table, CliError> {
    let params = resolve_params(r, &a.model)?;
    let (settings, seed) = resolve_run(r, &a.run, &params)?;
    let axis = r.choice("axis", a.axis, AxisArg::C)?;
    let (lo, hi, core_axis) = match axis {
        AxisArg::C => (r.value("c-from", a.c_from, 0.5)?, r.value("c-to", a.c_to, 1.2)?, SweepAxis::Cost),
        AxisArg::B0 => (
            r.value("b0-from", a.b0_from, 0.0)?,
            r.value("b0-to", a.b0_to, 4.0)?,
            SweepAxis::LiquidAssets,
        ),
    };
    if !(lo < hi) {
        return Err(CliError::Usage(format!("sweep range must be increasing, got {lo} .. {hi}")));
    }
    let steps = resolve_steps(r, "steps", a.steps, 15)?;
    let direction = r.choice("direction", a.direction, DirectionArg::Both)?;
    let values = linspace(lo, hi, steps);
    let result: SweepResult = match direction {
        DirectionArg::Both => dynamics::hysteresis_loop(&params, core_axis, &values, &settings, seed)?,
        DirectionArg::Up | DirectionArg::Down => {
            let (dir, vals) = if direction == DirectionArg::Up {
                (Direction::Up, values)
            } else {
                (Direction::Down, values.into_iter().rev().collect())
            };
            dynamics::sweep(&params, core_axis, &vals, dir, &settings, seed, 0, InitialCondition::Empty)?.0
        }
    };
    let mut table = Table::new(SWEEP_COLUMNS);
    for row in result.rows {
        table.push(vec![
            real(row.c),
            real(row.lambda),
            real(row.nu),
            real(row.b0),
            row.direction.as_str().to_string(),
            real(row.rho_mean),
            real(row.rho_std),
            real(row.default_rate),
        ]);
    }
    Ok(table)
}

fn master_eq(r: &mut Resolver, a: &MasterEqArgs) -> Result<Table, CliError> {
    let params = resolve_params(r, &a.model)?;
    params.validate_stationary().map_err(|e| CliError::Usage(e.to_string()))?;
    let branch = r.choice("init", a.init, BranchArg::Dense)?;
    let c_to = r.optional("c-to", a.c_to)?;
    let steps = resolve_steps(r, "steps", a.steps, 1)?;
    let trunc = Truncation::square(r.value("max-ell", a.max_ell, Truncation::for_params(&params).max_ell)?);
    let settings = SolveSettings {
        tol: r.value("tol", a.tol, SolveSettings::default().tol)?,
        damping: r.value("damping", a.damping, SolveSettings::default().damping)?,
        max_iter: r.value("max-iter", a.max_iter, SolveSettings::default().max_iter)?,
        inner: InnerSolve::default(),
    };
    let cs = match (c_to, steps) {
        (None, 1) => vec![params.c],
        (None, _) => return Err(CliError::Usage("--steps needs --c-to".into())),
        (Some(to), n) => linspace(params.c, to, n),
    };
    if a.dump.is_some() && cs.len() != 1 {
        return Err(CliError::Usage("--dump needs a single point".into()));
    }
    let init = match branch {
        BranchArg::Dense => RateClosure::default(),
        BranchArg::Sparse => RateClosure::saturated(params.nu),
    };
    let label = match branch {
        BranchArg::Dense => "dense",
        BranchArg::Sparse => "sparse",
    };
    let mut table = Table::new(MASTER_EQ_COLUMNS);
    let mut push = |p: &Params, rho: f64, mean_b: f64, rates: RateClosure, iterations: usize| {
        table.push(vec![
            real(p.c),
            real(p.lambda),
            real(p.nu),
            real(p.b0),
            label.to_string(),
            real(rho),
            real(mean_b),
            real(rates.mu),
            real(rates.mu_ell),
            real(rates.mu_b),
            iterations.to_string(),
        ]);
    };
    if let Some(path) = &a.dump {
        let solved = master_eq::self_consistent_solve(&params, trunc, init, settings)?;
        let wrap = |source| OutputError { path: path.clone(), source };
        let file = std::fs::File::create(path).map_err(wrap)?;
        solved.dist.write_dump(std::io::BufWriter::new(file)).map_err(wrap)?;
        push(&params, solved.connectivity(), solved.dist.mean_b(), solved.rates, solved.iterations);
    } else {
        let points: Vec<Params> = cs.iter().map(|&c| params.with_c(c)).collect();
        for point in master_eq::sweep(&points, trunc, init, settings)? {
            push(&point.params, point.rho, point.mean_b, point.rates, point.iterations);
        }
    }
    Ok(table)
}

fn rhs_kind(arg: RhsArg) -> RhsKind {
    match arg {
        RhsArg::Gaussian => RhsKind::Gaussian,
        RhsArg::Poisson => RhsKind::Poisson,
    }
}

fn mean_field(r: &mut Resolver, a: &MeanFieldArgs) -> Result<Table, CliError> {
    let params = resolve_params(r, &a.model)?;
    let kind = rhs_kind(r.choice("rhs", a.rhs, RhsArg::Gaussian)?);
    let defaults = RootSearch::default();
    let search = RootSearch {
        grid: r.value("grid", a.grid, defaults.grid)?,
        tol: r.value("tol", a.tol, defaults.tol)?,
    };
    let point = mean_field::classify_phase_with(params.c, params.lambda, &params, kind, search)?;
    let mut table = Table::new(MEAN_FIELD_COLUMNS);
    for root in &point.fixed_points {
        table.push(vec![
            real(point.lambda),
            real(point.c),
            point.phase.label().to_string(),
            real(root.mu),
            root.stable.to_string(),
            real(root.slope),
            root.degenerate.to_string(),
            real(mean_field::connectivity(root.mu, &params)),
        ]);
    }
    Ok(table)
}

fn phase_diagram(r: &mut Resolver, a: &PhaseDiagramArgs) -> Result<Table, CliError> {
    let params = resolve_params(r, &a.model)?;
    let l_from = r.value("lambda-from", a.lambda_from, 0.01)?;
    let l_to = r.value("lambda-to", a.lambda_to, 0.5)?;
    let l_steps = resolve_steps(r, "lambda-steps", a.lambda_steps, 12)?;
    let log = r.value("log-lambda", a.log_lambda, true)?;
    let c_from = r.value("c-from", a.c_from, 0.0)?;
    let c_to = r.value("c-to", a.c_to, 1.5)?;
    let c_steps = resolve_steps(r, "c-steps", a.c_steps, 31)?;
    if !(l_from > 0.0 && l_from <= l_to) || c_from > c_to {
        return Err(CliError::Usage("phase-diagram ranges must be increasing with lambda > 0".into()));
    }
    let lambdas = if log {
        geomspace(l_from, l_to, l_steps)
    } else {
        linspace(l_from, l_to, l_steps)
    };
    let cs = linspace(c_from, c_to, c_steps);
    let mut table = Table::new(PHASE_COLUMNS);
    for point in mean_field::phase_grid(&params, &lambdas, &cs) {
        let point = point?;
        let roots: Vec<String> = point.fixed_points.iter().map(|f| real(f.mu)).collect();
        table.push(vec![
            real(point.lambda),
            real(point.c),
            point.phase.label().to_string(),
            roots.join(";"),
        ]);
    }
    Ok(table)
}
