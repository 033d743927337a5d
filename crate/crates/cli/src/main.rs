//! `blockplan` command-line front end.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use blockplan::analysis::{
    compare_datasets, default_grid, fit_datasets, grid_risks, parse_grid, select_sigma, dataset_targets, FitReport,
    HumanDataset, DatasetFits,
};
use blockplan::assign::assign_blocks;
use blockplan::physics::{simulate_observed, SimConfig};
use blockplan::pipeline::{read_table, run_suite, TableRow, TrialParams};
use blockplan::risk::{self, PerturbAxes};
use blockplan::scene::{load_scene, load_trials, Scene, TrialSpec};
use blockplan::symplan::plan_symbolic;
use blockplan::trajectory::{self, plan_trajectories, TransportParams};
use blockplan::{stimuli, Error, Result};

#[derive(Parser, Debug)]
#[command(name = "blockplan", version, about = "Effort and risk of block reconfiguration tasks")]
struct Cli {
    /// Worker threads for simulations and trials (default: all cores).
    #[arg(long, global = true, env = "BLOCKPLAN_JOBS", value_parser = clap::value_parser!(u32).range(1..))]
    jobs: Option<u32>,

    /// More log output on stderr; repeat for more detail.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Effort/risk table for every trial of a trial file.
    Estimate {
        trials: PathBuf,
        #[command(flatten)]
        risk: RiskArgs,
        #[command(flatten)]
        effort: EffortArgs,
        /// Output table (default: standard output).
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Fall probability of a single scene.
    Risk {
        scene: PathBuf,
        #[command(flatten)]
        risk: RiskArgs,
        /// Also write one `trial,fell,max_displacement` row per simulation.
        #[arg(long, value_name = "CSV")]
        outcomes: Option<PathBuf>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Assignment, symbolic plan and transport energies of one trial.
    Plan {
        trial: PathBuf,
        /// Trial to plan when the file holds several.
        #[arg(long)]
        id: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        effort: EffortArgs,
        /// Directory for one `time,x,y,z,vx,vy,vz` CSV per transport.
        #[arg(long, value_name = "DIR")]
        traces: Option<PathBuf>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Lets a scene settle under gravity and reports whether it fell.
    Simulate {
        scene: PathBuf,
        /// Perturb block positions with this noise level before simulating.
        #[arg(long, value_parser = parse_sigma)]
        sigma: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = PerturbAxesArg::All, value_enum)]
        axes: PerturbAxesArg,
        #[arg(long, value_name = "SECONDS")]
        sim_time: Option<f64>,
        /// Write `step,time,id,x,y,z,qw,qx,qy,qz` rows to this file.
        #[arg(long, value_name = "CSV")]
        trace: Option<PathBuf>,
        /// Record every k-th step in the trace.
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
        trace_every: u32,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Full and lesioned regression fits of human data on an effort/risk table.
    Fit {
        table: PathBuf,
        #[arg(required = true)]
        humans: Vec<PathBuf>,
        /// Noise level the table was computed with, recorded in the report.
        #[arg(long, value_parser = parse_sigma)]
        sigma: Option<f64>,
        /// Search sigma over `lo:hi:step`, or `default` for 0.05:0.1:0.005.
        /// Needs `--trials` to recompute risk.
        #[arg(long, value_name = "GRID")]
        grid: Option<String>,
        /// Trial file the table was computed from.
        #[arg(long)]
        trials: Option<PathBuf>,
        #[arg(long, default_value_t = risk::DEFAULT_N, value_parser = parse_count)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = PerturbAxesArg::All, value_enum)]
        axes: PerturbAxesArg,
        #[command(flatten)]
        effort: EffortArgs,
        /// Where to write `sigma,dataset,rmse` rows of the grid search.
        #[arg(long, value_name = "CSV")]
        grid_output: Option<PathBuf>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Bootstrap comparison of the models across one or more datasets.
    Compare {
        table: PathBuf,
        #[arg(required = true)]
        humans: Vec<PathBuf>,
        #[arg(long, value_parser = parse_sigma)]
        sigma: Option<f64>,
        #[arg(long, default_value_t = blockplan::analysis::bootstrap::DEFAULT_RESAMPLES, value_parser = parse_count)]
        resamples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Writes the bundled 24-trial stimulus suite.
    GenStimuli { outdir: PathBuf },
}

#[derive(Args, Debug, Clone)]
struct RiskArgs {
    #[arg(long, default_value_t = risk::DEFAULT_SIGMA, value_parser = parse_sigma)]
    sigma: f64,
    /// Perturbed simulations per risk estimate.
    #[arg(long, default_value_t = risk::DEFAULT_N, value_parser = parse_count)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = PerturbAxesArg::All, value_enum)]
    axes: PerturbAxesArg,
    /// Simulated seconds per run.
    #[arg(long, value_name = "SECONDS")]
    sim_time: Option<f64>,
}

#[derive(Args, Debug, Clone)]
struct EffortArgs {
    /// Scatter samples per effort estimate.
    #[arg(long, default_value_t = trajectory::DEFAULT_M, value_parser = parse_count)]
    m: usize,
    /// Discretization intervals per trajectory segment.
    #[arg(long, default_value_t = trajectory::DEFAULT_STEPS)]
    steps: usize,
    /// Duration of one transport.
    #[arg(long, default_value_t = trajectory::DEFAULT_DURATION)]
    duration: f64,
}

#[derive(Args, Debug, Clone)]
struct OutArgs {
    /// Output file (default: standard output).
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long, default_value_t = Format::Json, value_enum)]
    format: Format,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Json,
    Csv,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum PerturbAxesArg {
    All,
    Horizontal,
}

impl From<PerturbAxesArg> for PerturbAxes {
    fn from(a: PerturbAxesArg) -> Self {
        match a {
            PerturbAxesArg::All => PerturbAxes::All,
            PerturbAxesArg::Horizontal => PerturbAxes::Horizontal,
        }
    }
}

fn parse_sigma(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if v > 0.0 && v < 0.5 {
        Ok(v)
    } else {
        Err(format!("sigma must lie in (0, 0.5), got {v}"))
    }
}

fn parse_count(s: &str) -> std::result::Result<usize, String> {
    match s.parse::<usize>() {
        Ok(v) if v >= 1 => Ok(v),
        _ => Err(format!("expected an integer >= 1, got `{s}`")),
    }
}

fn sim_config(sim_time: Option<f64>) -> Result<SimConfig> {
    let mut c = SimConfig::default();
    if let Some(t) = sim_time {
        c.max_sim_time = t;
    }
    c.validate()?;
    Ok(c)
}

fn transport(e: &EffortArgs) -> TransportParams {
    TransportParams {
        duration: e.duration,
        steps: e.steps,
        ..TransportParams::default()
    }
}

fn trial_params(r: &RiskArgs, e: &EffortArgs) -> Result<TrialParams> {
    Ok(TrialParams {
        sigma: r.sigma,
        n: r.n,
        m: e.m,
        axes: r.axes.into(),
        sim: sim_config(r.sim_time)?,
        transport: transport(e),
    })
}

/// Runs `write` against the output file, or standard output when none is given.
fn emit(path: Option<&Path>, write: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match path {
        Some(p) => {
            let file = File::create(p).map_err(|e| io_error(p, e))?;
            let mut w = BufWriter::new(file);
            write(&mut w)?;
            w.flush().map_err(|e| io_error(p, e))
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            write(&mut w)?;
            w.flush().map_err(|e| io_error("<stdout>", e))
        }
    }
}

fn io_error(path: impl Into<PathBuf>, source: io::Error) -> Error {
    Error::Io {
        path: path.into(),
        source,
    }
}

fn write_json(w: &mut dyn Write, v: &Value) -> Result<()> {
    let text = serde_json::to_string_pretty(v).expect("value serializes");
    writeln!(w, "{text}").map_err(|e| io_error("<output>", e))
}

fn vec3<'a>(v: impl IntoIterator<Item = &'a f64>) -> Value {
    Value::from(v.into_iter().copied().collect::<Vec<f64>>())
}

fn json_only(out: &OutArgs, command: &str) -> Result<()> {
    match out.format {
        Format::Json => Ok(()),
        Format::Csv => Err(Error::Validation(format!("`{command}` only writes JSON"))),
    }
}

fn estimate(trials: &Path, r: &RiskArgs, e: &EffortArgs, output: Option<&Path>) -> Result<()> {
    let trials = load_trials(trials)?;
    let params = trial_params(r, e)?;
    let outcome = run_suite(&trials, &params, r.seed)?;
    emit(output, |w| outcome.write_table(w))?;
    if let Some(first) = outcome.failures.into_iter().next() {
        eprintln!(
            "error: {} of {} trials failed; first: {}",
            trials.len() - outcome.results.len(),
            trials.len(),
            first.error
        );
        return Err(first.error);
    }
    Ok(())
}

fn risk_cmd(scene: &Path, r: &RiskArgs, outcomes: Option<&Path>, out: &OutArgs) -> Result<()> {
    json_only(out, "risk")?;
    let scene = load_scene(scene)?;
    let config = sim_config(r.sim_time)?;
    let (est, runs) = risk::estimate_risk_with(&scene, r.sigma, r.n, r.seed, &config, r.axes.into())?;
    if let Some(p) = outcomes {
        let file = File::create(p).map_err(|e| io_error(p, e))?;
        risk::write_outcomes_csv(&runs, BufWriter::new(file))?;
    }
    emit(out.output.as_deref(), |w| {
        write_json(w, &serde_json::to_value(&est).expect("estimate serializes"))
    })
}

fn pick_trial(path: &Path, id: Option<&str>) -> Result<TrialSpec> {
    let trials = load_trials(path)?;
    match id {
        Some(id) => trials
            .into_iter()
            .find(|t| t.id == id)
            .ok_or_else(|| Error::Validation(format!("no trial `{id}` in {}", path.display()))),
        None if trials.len() == 1 => Ok(trials.into_iter().next().expect("one trial")),
        None => Err(Error::Validation(format!(
            "{} holds {} trials; choose one with --id",
            path.display(),
            trials.len()
        ))),
    }
}

fn plan_cmd(path: &Path, id: Option<&str>, seed: u64, e: &EffortArgs, traces: Option<&Path>, out: &OutArgs) -> Result<()> {
    json_only(out, "plan")?;
    let trial = pick_trial(path, id)?;
    let (a, b) = trial.realize(seed)?;
    let assignment = assign_blocks(&a, &b)?;
    let plan = plan_symbolic(&a, &b, &assignment)?;
    let trajectories = plan_trajectories(&a, &b, &plan, &transport(e))?;

    if let Some(dir) = traces {
        fs::create_dir_all(dir).map_err(|err| io_error(dir, err))?;
        for (k, (t, traj)) in plan.transports.iter().zip(&trajectories).enumerate() {
            let p = dir.join(format!("{k:02}_{}.csv", t.subject));
            let file = File::create(&p).map_err(|err| io_error(&p, err))?;
            traj.write_csv(BufWriter::new(file))?;
        }
    }

    let transports: Vec<Value> = plan
        .transports
        .iter()
        .zip(&trajectories)
        .map(|(t, traj)| {
            let mass = a.get(&t.subject).expect("subject in A").mass;
            json!({
                "subject": t.subject,
                "target": t.target,
                "waypoints": traj.waypoints.iter().map(vec3).collect::<Vec<_>>(),
                "peak_speed": traj.peak_speed(),
                "energy": trajectory::action_energy(traj, mass),
            })
        })
        .collect();
    let total: f64 = transports.iter().map(|t| t["energy"].as_f64().expect("number")).sum();
    let report = json!({
        "trial": trial.id,
        "seed": seed,
        "assignment": {
            "pairs": assignment.pairs,
            "total_distance": assignment.total_distance,
        },
        "plan_length": plan.len(),
        "actions": plan.actions,
        "transports": transports,
        "total_energy": total,
    });
    emit(out.output.as_deref(), |w| write_json(w, &report))
}

#[allow(clippy::too_many_arguments)]
fn simulate_cmd(
    path: &Path,
    sigma: Option<f64>,
    seed: u64,
    axes: PerturbAxes,
    sim_time: Option<f64>,
    trace: Option<&Path>,
    every: usize,
    out: &OutArgs,
) -> Result<()> {
    json_only(out, "simulate")?;
    let mut scene: Scene = load_scene(path)?;
    if let Some(sigma) = sigma {
        let mut rng = blockplan::seeds::seeded_rng(seed);
        scene = risk::perturb_scene_with(&scene, sigma, axes, &mut rng)?.0;
    }
    let config = sim_config(sim_time)?;
    let mut writer = match trace {
        Some(p) => {
            let file = File::create(p).map_err(|e| io_error(p, e))?;
            let mut w = csv::Writer::from_writer(BufWriter::new(file));
            w.write_record(["step", "time", "id", "x", "y", "z", "qw", "qx", "qy", "qz"])?;
            Some(w)
        }
        None => None,
    };
    let outcome = simulate_observed(&scene, &config, |step, world| {
        let Some(w) = writer.as_mut() else { return Ok(()) };
        if step % every != 0 {
            return Ok(());
        }
        let time = (step as f64 * config.dt).to_string();
        for b in &world.bodies {
            let (p, q) = (b.position, b.orientation.quaternion());
            w.write_record([
                step.to_string(),
                time.clone(),
                b.id.clone(),
                p.x.to_string(),
                p.y.to_string(),
                p.z.to_string(),
                q.w.to_string(),
                q.i.to_string(),
                q.j.to_string(),
                q.k.to_string(),
            ])?;
        }
        Ok(())
    })?;
    if let Some(mut w) = writer {
        w.flush().map_err(|e| Error::Csv(e.into()))?;
    }
    let poses: Vec<Value> = outcome
        .final_poses
        .iter()
        .map(|p| {
            let q = p.orientation.quaternion();
            json!({"id": p.id, "position": vec3(&p.position), "orientation": [q.w, q.i, q.j, q.k]})
        })
        .collect();
    let report = json!({
        "fell": outcome.fell,
        "max_displacement": outcome.max_displacement,
        "elapsed": outcome.elapsed,
        "steps": outcome.steps,
        "final_poses": poses,
    });
    emit(out.output.as_deref(), |w| write_json(w, &report))
}

/// Trial ids, effort and risk columns of a table file.
fn load_table(path: &Path) -> Result<(Vec<String>, Vec<f64>, Vec<f64>)> {
    let file = File::open(path).map_err(|e| io_error(path, e))?;
    let rows: Vec<TableRow> = read_table(file)?;
    Ok((
        rows.iter().map(|r| r.trial.clone()).collect(),
        rows.iter().map(|r| r.effort_mean).collect(),
        rows.iter().map(|r| r.risk).collect(),
    ))
}

fn load_humans(paths: &[PathBuf]) -> Result<Vec<HumanDataset>> {
    let datasets: Vec<HumanDataset> = paths.iter().map(HumanDataset::load).collect::<Result<_>>()?;
    let mut names: Vec<&str> = datasets.iter().map(|d| d.name.as_str()).collect();
    names.sort_unstable();
    if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::Validation(format!("two datasets are named `{}`", w[0])));
    }
    Ok(datasets)
}

struct FitOptions<'a> {
    sigma: Option<f64>,
    grid: Option<&'a str>,
    trials: Option<&'a Path>,
    params: TrialParams,
    seed: u64,
    grid_output: Option<&'a Path>,
}

fn fit_cmd(table: &Path, humans: &[PathBuf], opts: FitOptions<'_>, out: &OutArgs) -> Result<()> {
    let (ids, effort, risk) = load_table(table)?;
    let datasets = load_humans(humans)?;
    let report = match opts.grid {
        None => FitReport {
            datasets: fit_datasets(&ids, &effort, &risk, &datasets, opts.sigma)?,
            ..FitReport::default()
        },
        Some(spec) => {
            let grid = if spec == "default" { default_grid() } else { parse_grid(spec)? };
            let trials_path = opts
                .trials
                .ok_or_else(|| Error::Validation("`--grid` needs `--trials` to recompute risk".into()))?;
            let trials = load_trials(trials_path)?;
            let trial_ids: Vec<String> = trials.iter().map(|t| t.id.clone()).collect();
            if trial_ids != ids {
                return Err(Error::Validation(format!(
                    "{} and {} list different trials",
                    trials_path.display(),
                    table.display()
                )));
            }
            let (_, risks) = grid_risks(&trials, &grid, &opts.params, opts.seed)?;
            let targets = dataset_targets(&datasets, &ids)?;
            let search = select_sigma(&grid, &effort, &risks, &targets)?;
            let fits = targets
                .iter()
                .map(|(name, y)| {
                    let best = search.best[name];
                    let k = grid.iter().position(|&s| s == best).expect("best sigma is on the grid");
                    blockplan::analysis::fit_dataset(name, &ids, &effort, &risks[k], y, Some(best))
                })
                .collect::<Result<Vec<DatasetFits>>>()?;
            for (name, best) in &search.best {
                eprintln!("{name}: sigma* = {best}");
            }
            FitReport {
                datasets: fits,
                grid: Some(search),
                bootstrap: Vec::new(),
            }
        }
    };
    if let Some(p) = opts.grid_output {
        let file = File::create(p).map_err(|e| io_error(p, e))?;
        report.write_grid_csv(BufWriter::new(file))?;
    }
    emit(out.output.as_deref(), |w| match out.format {
        Format::Json => writeln!(w, "{}", report.to_json()).map_err(|e| io_error("<output>", e)),
        Format::Csv => report.write_fits_csv(w),
    })
}

fn compare_cmd(
    table: &Path,
    humans: &[PathBuf],
    sigma: Option<f64>,
    resamples: usize,
    seed: u64,
    out: &OutArgs,
) -> Result<()> {
    let (ids, effort, risk) = load_table(table)?;
    let datasets = load_humans(humans)?;
    let report = compare_datasets(&ids, &effort, &risk, &datasets, sigma, resamples, seed)?;
    emit(out.output.as_deref(), |w| match out.format {
        Format::Json => writeln!(w, "{}", report.to_json()).map_err(|e| io_error("<output>", e)),
        Format::Csv => report.write_bootstrap_csv(w),
    })
}

fn run(cli: Cli) -> Result<()> {
    if let Some(k) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(k as usize)
            .build_global()
            .map_err(|e| Error::Validation(format!("cannot set up {k} worker threads: {e}")))?;
    }
    match cli.command {
        Command::Estimate {
            trials,
            risk,
            effort,
            output,
        } => estimate(&trials, &risk, &effort, output.as_deref()),
        Command::Risk {
            scene,
            risk,
            outcomes,
            out,
        } => risk_cmd(&scene, &risk, outcomes.as_deref(), &out),
        Command::Plan {
            trial,
            id,
            seed,
            effort,
            traces,
            out,
        } => plan_cmd(&trial, id.as_deref(), seed, &effort, traces.as_deref(), &out),
        Command::Simulate {
            scene,
            sigma,
            seed,
            axes,
            sim_time,
            trace,
            trace_every,
            out,
        } => simulate_cmd(&scene, sigma, seed, axes.into(), sim_time, trace.as_deref(), trace_every as usize, &out),
        Command::Fit {
            table,
            humans,
            sigma,
            grid,
            trials,
            n,
            seed,
            axes,
            effort,
            grid_output,
            out,
        } => {
            let params = TrialParams {
                sigma: sigma.unwrap_or(risk::DEFAULT_SIGMA),
                n,
                m: effort.m,
                axes: axes.into(),
                sim: SimConfig::default(),
                transport: transport(&effort),
            };
            let opts = FitOptions {
                sigma,
                grid: grid.as_deref(),
                trials: trials.as_deref(),
                params,
                seed,
                grid_output: grid_output.as_deref(),
            };
            fit_cmd(&table, &humans, opts, &out)
        }
        Command::Compare {
            table,
            humans,
            sigma,
            resamples,
            seed,
            out,
        } => compare_cmd(&table, &humans, sigma, resamples, seed, &out),
        Command::GenStimuli { outdir } => {
            for p in stimuli::write_bundled(&outdir)? {
                eprintln!("wrote {}", p.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
