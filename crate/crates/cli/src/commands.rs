//! The run / verify / rates subcommands.

use crate::config::{Config, ConfigError};
use crate::instances::{build_problem, resolve_alpha, schedule_from, x0_from, PROBLEM_NAMES};
use crate::CliError;
use shuffleopt_core::optim::{
    format_float, run, PermutationSource, Trajectory, TrajectoryIoError, Variant,
};
use shuffleopt_core::problems::{double_well_stationary_point, FiniteSumProblem};
use shuffleopt_core::rates::{estimate_rate, psi_rate, RateReport};
use shuffleopt_core::schedules::{check_conditions, first_valid_iteration, StepSchedule};
use shuffleopt_core::verify::{full_suite, SuiteOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

pub struct CommandIo {
    pub config: PathBuf,
    pub out: PathBuf,
    pub jobs: usize,
    pub seed_override: Option<u64>,
}

fn parse_variant(cfg: &Config, key: &str) -> Result<Variant, ConfigError> {
    cfg.get_string(key)?
        .parse()
        .map_err(|m: String| ConfigError(format!("key '{key}': {m}")))
}

/// Seeds for the run: `--seed-override` wins, then `run.seed`/`run.seeds`.
/// The incremental variant is deterministic and must not carry a seed.
fn seeds_from(
    cfg: &Config,
    variant: Variant,
    seed_override: Option<u64>,
) -> Result<Vec<Option<u64>>, ConfigError> {
    let single = cfg.get_u64_opt("run.seed")?;
    let many = if cfg.has("run.seeds") {
        Some(cfg.get_u64_list("run.seeds")?)
    } else {
        None
    };
    if variant == Variant::Ig {
        if single.is_some() || many.is_some() || seed_override.is_some() {
            return Err(ConfigError(
                "variant 'ig' is deterministic: remove run.seed/run.seeds".into(),
            ));
        }
        return Ok(vec![None]);
    }
    if let Some(s) = seed_override {
        return Ok(vec![Some(s)]);
    }
    match (single, many) {
        (Some(_), Some(_)) => Err(ConfigError(
            "set either run.seed or run.seeds, not both".into(),
        )),
        (Some(s), None) => Ok(vec![Some(s)]),
        (None, Some(list)) if !list.is_empty() => Ok(list.into_iter().map(Some).collect()),
        _ => Err(ConfigError(format!(
            "variant '{variant}' needs run.seed or run.seeds"
        ))),
    }
}

fn reference_from(
    cfg: &Config,
    key: &str,
    problem: &FiniteSumProblem,
) -> Result<Option<Vec<f64>>, ConfigError> {
    match cfg.raw(key) {
        None | Some("none") => Ok(None),
        Some("minimizer") => problem
            .minimizer()
            .map(|m| Some(m.to_vec()))
            .ok_or_else(|| ConfigError(format!("key '{key}': problem has no known minimizer"))),
        Some(raw) => {
            let values: Vec<f64> = raw
                .split(',')
                .map(|p| p.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| ConfigError(format!("key '{key}': bad coordinate list '{raw}'")))?;
            if values.len() != problem.dim() {
                return Err(ConfigError(format!(
                    "key '{key}': expected {} coordinates",
                    problem.dim()
                )));
            }
            Ok(Some(values))
        }
    }
}

fn numerical_error(e: &shuffleopt_core::optim::RunError) -> CliError {
    CliError::Numerical(format!(
        "numerical failure at epoch {} ({}); partial trajectory has {} iterates",
        e.epoch,
        e.failure,
        e.partial.outer.len()
    ))
}

fn execute(
    problem: &FiniteSumProblem,
    x0: &[f64],
    schedule: &StepSchedule,
    epochs: usize,
    variant: Variant,
    seed: Option<u64>,
    record_inner: bool,
) -> Result<Trajectory, CliError> {
    let source = match seed {
        Some(s) => PermutationSource::UniformRandom { seed: s },
        None => PermutationSource::FixedIdentity,
    };
    run(
        problem,
        x0,
        schedule,
        epochs,
        &source,
        variant,
        record_inner,
    )
    .map_err(|e| numerical_error(&e))
}

struct RunSetup {
    problem: FiniteSumProblem,
    schedule: StepSchedule,
    variant: Variant,
    epochs: usize,
    record_inner: bool,
    x0: Vec<f64>,
}

fn run_setup(cfg: &Config, default_record_inner: bool) -> Result<RunSetup, ConfigError> {
    let name = cfg.get_string("problem.name")?;
    let problem = build_problem(cfg, "problem", &name)?;
    let schedule = schedule_from(cfg, "schedule", &problem)?;
    let variant = parse_variant(cfg, "run.variant")?;
    let epochs = cfg.get_usize("run.epochs")?;
    if epochs == 0 {
        return Err(ConfigError("run.epochs must be at least 1".into()));
    }
    let record_inner = cfg.get_bool_or("run.record_inner", default_record_inner)?;
    let x0 = x0_from(cfg, "run.x0", problem.dim())?;
    Ok(RunSetup {
        problem,
        schedule,
        variant,
        epochs,
        record_inner,
        x0,
    })
}

impl RunSetup {
    fn execute(&self, seed: Option<u64>) -> Result<Trajectory, CliError> {
        execute(
            &self.problem,
            &self.x0,
            &self.schedule,
            self.epochs,
            self.variant,
            seed,
            self.record_inner,
        )
    }
}

pub fn cmd_run(io: &CommandIo) -> Result<(), CliError> {
    let cfg = Config::load(&io.config)?;
    let setup = run_setup(&cfg, false)?;
    let seeds = seeds_from(&cfg, setup.variant, io.seed_override)?;
    let reference = reference_from(&cfg, "run.reference", &setup.problem)?;
    cfg.reject_unused()?;

    let multi = seeds.len() > 1;
    for seed in seeds {
        let traj = setup.execute(seed)?;
        let dir = match seed {
            Some(s) if multi => io.out.join(format!("seed_{s}")),
            _ => io.out.clone(),
        };
        traj.write_dir(&dir, reference.as_deref())
            .map_err(|e| CliError::Config(e.to_string()))?;
        println!(
            "wrote {} ({} epochs, final f = {:.6e}, final grad norm = {:.6e})",
            dir.display(),
            traj.epochs(),
            traj.values[traj.epochs()],
            traj.grad_norms[traj.epochs()]
        );
    }
    Ok(())
}

pub fn cmd_verify(io: &CommandIo) -> Result<(), CliError> {
    let cfg = Config::load(&io.config)?;
    let name = cfg.get_string("problem.name")?;
    let problem = build_problem(&cfg, "problem", &name)?;

    let traj = if let Some(dir) = cfg.raw("verify.trajectory") {
        let dir = dir.to_string();
        let stored = Trajectory::read_dir(Path::new(&dir)).map_err(|e| match e {
            TrajectoryIoError::Io(inner) => CliError::Config(format!("{dir}: {inner}")),
            other => CliError::Config(other.to_string()),
        })?;
        if stored.meta.problem != name {
            return Err(CliError::Config(format!(
                "stored trajectory was produced on problem '{}', config says '{name}'",
                stored.meta.problem
            )));
        }
        // schedule comes from the stored metadata; schedule keys in the
        // config, if present, must agree with it
        if cfg.has("schedule.alpha") {
            let declared = schedule_from(&cfg, "schedule", &problem)?;
            if declared != stored.meta.schedule {
                return Err(CliError::Config(
                    "config schedule disagrees with the stored trajectory".into(),
                ));
            }
        }
        stored
    } else {
        let setup = run_setup(&cfg, true)?;
        let seeds = seeds_from(&cfg, setup.variant, io.seed_override)?;
        if seeds.len() != 1 {
            return Err(CliError::Config(
                "verify runs a single seed; use run.seed".into(),
            ));
        }
        // a run config may carry a reference point; verify has no use for it
        let _ = reference_from(&cfg, "run.reference", &setup.problem)?;
        setup.execute(seeds[0])?
    };
    let sample_seed = cfg.get_u64_opt("verify.sample_seed")?.unwrap_or(7);
    cfg.reject_unused()?;

    let schedule = traj.meta.schedule;
    let conditions = check_conditions(&schedule, problem.kl().map(|k| k.theta));
    let start = first_valid_iteration(&schedule, problem.lipschitz(), problem.num_components());
    println!(
        "schedule windows: weak_convergence={} kl={} tail={:?}; recursion checks start at epoch {start}",
        conditions.weak_convergence_window, conditions.kl_window, conditions.tail_window
    );

    let options = SuiteOptions {
        sample_seed,
        ..SuiteOptions::default()
    };
    let reports =
        full_suite(&problem, &traj, &options).map_err(|e| CliError::Config(e.to_string()))?;

    std::fs::create_dir_all(&io.out).map_err(|e| CliError::Config(e.to_string()))?;
    let mut all_pass = true;
    for report in &reports {
        let path = io.out.join(format!("{}.csv", report.name));
        let mut file = std::fs::File::create(&path).map_err(|e| CliError::Config(e.to_string()))?;
        report
            .write_csv(&mut file)
            .map_err(|e| CliError::Config(e.to_string()))?;
        println!("{}", report.summary_line());
        all_pass &= report.passed() || report.is_vacuous();
    }
    if all_pass {
        Ok(())
    } else {
        Err(CliError::Check(
            "one or more non-vacuous checks failed".into(),
        ))
    }
}

/// Reference point for rate fitting: the known minimizer (for the double
/// well, the nearest stationary point) when the run settles into its basin,
/// otherwise the terminal iterate of a ten-times-longer run with the same
/// seed.
fn choose_reference(
    problem: &FiniteSumProblem,
    x0: &[f64],
    schedule: &StepSchedule,
    epochs: usize,
    variant: Variant,
    seed: u64,
    traj: &Trajectory,
) -> Result<Vec<f64>, CliError> {
    const BASIN_RADIUS: f64 = 0.3;
    let terminal = &traj.outer[traj.epochs()];
    if problem.id() == "double_well" {
        let snapped = double_well_stationary_point(terminal);
        if shuffleopt_core::linalg::dist(terminal, &snapped) <= BASIN_RADIUS {
            return Ok(snapped);
        }
    } else if let Some(m) = problem.minimizer() {
        return Ok(m.to_vec());
    }
    let longer = execute(
        problem,
        x0,
        schedule,
        10 * epochs,
        variant,
        Some(seed),
        false,
    )?;
    Ok(longer.outer[longer.epochs()].clone())
}

struct SweepRow {
    problem: String,
    variant: Variant,
    seed: u64,
    alpha: f64,
    beta: f64,
    gamma: f64,
    theta: Option<f64>,
    psi: Option<f64>,
    report: RateReport,
}

pub fn cmd_rates(io: &CommandIo) -> Result<(), CliError> {
    let cfg = Config::load(&io.config)?;
    let problem_names = cfg.get_string_list("sweep.problems")?;
    for name in &problem_names {
        if !PROBLEM_NAMES.contains(&name.as_str()) {
            return Err(CliError::Config(format!(
                "unknown problem '{name}' in sweep.problems"
            )));
        }
    }
    let gammas = cfg.get_f64_list("sweep.gammas")?;
    let seeds: Vec<u64> = match io.seed_override {
        Some(s) => vec![s],
        None => cfg.get_u64_list("sweep.seeds")?,
    };
    let epochs = cfg.get_usize("sweep.epochs")?;
    if epochs == 0 {
        return Err(CliError::Config("sweep.epochs must be at least 1".into()));
    }
    let variant: Variant = match cfg.raw("sweep.variant") {
        Some(v) => v.parse().map_err(CliError::Config)?,
        None => Variant::Rr,
    };
    if variant == Variant::Ig {
        return Err(CliError::Config(
            "rate sweeps need seeded variants (rr or sppm)".into(),
        ));
    }
    let beta = cfg.get_f64_or("sweep.beta", 0.0)?;
    let alpha_raw = cfg.get_string("sweep.alpha")?;
    let window_fraction = cfg.get_f64_or("sweep.window_fraction", 0.5)?;
    let theta_steps = cfg.get_usize_or("psi_grid.theta_steps", 100)?;
    let gamma_steps = cfg.get_usize_or("psi_grid.gamma_steps", 50)?;

    // resolve everything config-dependent before fanning out
    struct ProblemSetup {
        problem: Arc<FiniteSumProblem>,
        alpha: f64,
        x0: Vec<f64>,
    }
    let mut per_problem = Vec::new();
    for name in &problem_names {
        let problem = build_problem(&cfg, name, name)?;
        let alpha = resolve_alpha(&alpha_raw, &problem)
            .map_err(|m| ConfigError(format!("key 'sweep.alpha': {m}")))?;
        let x0 = x0_from(&cfg, "sweep.x0", problem.dim())?;
        per_problem.push(ProblemSetup {
            problem: Arc::new(problem),
            alpha,
            x0,
        });
    }
    cfg.reject_unused()?;

    struct Task {
        name: String,
        setup_index: usize,
        gamma: f64,
        seed: u64,
    }
    let mut tasks = Vec::new();
    for (idx, name) in problem_names.iter().enumerate() {
        for &gamma in &gammas {
            for &seed in &seeds {
                tasks.push(Task {
                    name: name.clone(),
                    setup_index: idx,
                    gamma,
                    seed,
                });
            }
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(io.jobs.max(1))
        .build()
        .map_err(|e| CliError::Config(e.to_string()))?;
    let results: Vec<Result<SweepRow, CliError>> = pool.install(|| {
        use rayon::prelude::*;
        tasks
            .par_iter()
            .map(|task| -> Result<SweepRow, CliError> {
                let setup = &per_problem[task.setup_index];
                let schedule = StepSchedule::new(setup.alpha, beta, task.gamma)
                    .map_err(|e| CliError::Config(e.to_string()))?;
                let traj = execute(
                    &setup.problem,
                    &setup.x0,
                    &schedule,
                    epochs,
                    variant,
                    Some(task.seed),
                    false,
                )?;
                let reference = choose_reference(
                    &setup.problem,
                    &setup.x0,
                    &schedule,
                    epochs,
                    variant,
                    task.seed,
                    &traj,
                )?;
                let report = estimate_rate(&traj, &reference, window_fraction)
                    .map_err(|e| CliError::Check(e.to_string()))?;
                let theta = setup.problem.kl().map(|k| k.theta);
                let psi = theta
                    .and_then(|th| psi_rate(th, task.gamma).ok())
                    .map(|p| p.exponent);
                Ok(SweepRow {
                    problem: task.name.clone(),
                    variant,
                    seed: task.seed,
                    alpha: setup.alpha,
                    beta,
                    gamma: task.gamma,
                    theta,
                    psi,
                    report,
                })
            })
            .collect()
    });

    std::fs::create_dir_all(&io.out).map_err(|e| CliError::Config(e.to_string()))?;
    let sweep_path = io.out.join("sweep.csv");
    let mut sweep =
        std::fs::File::create(&sweep_path).map_err(|e| CliError::Config(e.to_string()))?;
    writeln!(
        sweep,
        "problem,variant,seed,alpha,beta,gamma,theta,psi_theoretical,fitted,residual,window_lo,window_hi"
    )
    .map_err(|e| CliError::Config(e.to_string()))?;
    for result in results {
        let row = result?;
        writeln!(
            sweep,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            row.problem,
            row.variant,
            row.seed,
            format_float(row.alpha),
            format_float(row.beta),
            format_float(row.gamma),
            row.theta.map(format_float).unwrap_or_default(),
            row.psi.map(format_float).unwrap_or_default(),
            format_float(row.report.fitted_exponent),
            format_float(row.report.residual),
            row.report.fit_window.0,
            row.report.fit_window.1
        )
        .map_err(|e| CliError::Config(e.to_string()))?;
    }

    let grid_path = io.out.join("psi_grid.csv");
    write_psi_grid(&grid_path, theta_steps, gamma_steps)?;
    println!("wrote {} and {}", sweep_path.display(), grid_path.display());
    Ok(())
}

/// Dense grid of the theoretical exponent over θ ∈ [0,1) × γ ∈ (½,1].
fn write_psi_grid(path: &Path, theta_steps: usize, gamma_steps: usize) -> Result<(), CliError> {
    let mut file = std::fs::File::create(path).map_err(|e| CliError::Config(e.to_string()))?;
    writeln!(file, "theta,gamma,psi,needs_alpha_condition")
        .map_err(|e| CliError::Config(e.to_string()))?;
    for i in 0..theta_steps {
        let theta = i as f64 / theta_steps as f64;
        for j in 1..=gamma_steps {
            let gamma = 0.5 + 0.5 * j as f64 / gamma_steps as f64;
            let psi = psi_rate(theta, gamma).map_err(|e| CliError::Config(e.to_string()))?;
            writeln!(
                file,
                "{},{},{},{}",
                format_float(theta),
                format_float(gamma),
                format_float(psi.exponent),
                psi.needs_alpha_condition
            )
            .map_err(|e| CliError::Config(e.to_string()))?;
        }
    }
    Ok(())
}

pub fn cmd_list_problems() {
    println!("built-in problems (keys under problem.* for run/verify, <name>.* for sweeps):");
    println!("  quadratic    n, N, eigenvalues | eig_min + eig_max, anchors | anchor_seed + anchor_scale");
    println!("  power        n, N, p (>= 2), radius, offsets | offset_seed + offset_scale");
    println!("  double_well  n, N, radius (> 1), offsets | offset_seed + offset_scale");
}
