//! `graspforge` command line: run studies, replay single trials, build reports.

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};
use graspforge::dynamics::render_svg;
use graspforge::optimizer::{optimize, Completion, StudyError, StudyRecord};
use graspforge::scenario::{run_grasp_trial_observed, ObjectSpec, Termination, TrialResult, CATALOG_NAMES};
use graspforge::study::{grasp_force_csv, report_csv, BestReport, StudyConfig};
use graspforge::{DesignParams, DesignParamsMm};
use std::fs::{self, File, OpenOptions};
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

const STUDY_FILE: &str = "study.jsonl";
const CONFIG_FILE: &str = "config.toml";
const THREADS_ENV: &str = "GRASPFORGE_THREADS";

#[derive(Parser)]
#[command(name = "graspforge", version, about = "Design optimization for a crawler-tipped gripper")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run or resume a design study.
    Optimize {
        /// Study configuration (TOML). Defaults apply to missing keys.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        iters: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; GRASPFORGE_THREADS takes precedence.
        #[arg(long)]
        parallel: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        /// Continue the study already in the output directory.
        #[arg(long)]
        resume: bool,
    },
    /// Run one grasp trial and print its result as JSON.
    Simulate {
        /// Design parameters as JSON: a best.json, or SI or mm keyed values.
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        object: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write SVG frames and trace.csv here.
        #[arg(long)]
        render: Option<PathBuf>,
        /// Simulation steps between frames.
        #[arg(long, default_value_t = 100)]
        frame_every: usize,
        /// Study configuration supplying protocol, world and transmission.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Build report.csv, and optionally grasp_force.csv, from a study.
    Report {
        #[arg(long)]
        study: PathBuf,
        #[arg(long)]
        grasp_force: bool,
    },
}

/// An error with the exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

fn config_err(e: impl Into<anyhow::Error>) -> Failure {
    Failure { code: 1, error: e.into() }
}

fn io_err(e: impl Into<anyhow::Error>) -> Failure {
    Failure { code: 2, error: e.into() }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Optimize {
            config,
            iters,
            seed,
            parallel,
            out,
            resume,
        } => cmd_optimize(config.as_deref(), iters, seed, parallel, &out, resume),
        Command::Simulate {
            params,
            object,
            seed,
            render,
            frame_every,
            config,
        } => cmd_simulate(&params, &object, seed, render.as_deref(), frame_every, config.as_deref()),
        Command::Report { study, grasp_force } => cmd_report(&study, grasp_force),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn load_config(path: &Path) -> Result<StudyConfig, Failure> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))
        .map_err(config_err)?;
    let cfg: StudyConfig = toml::from_str(&text)
        .with_context(|| format!("invalid config {}", path.display()))
        .map_err(config_err)?;
    Ok(cfg)
}

fn threads_from_env() -> Result<Option<usize>, Failure> {
    match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| config_err(anyhow!("{THREADS_ENV} must be a positive integer, got {v:?}"))),
        _ => Ok(None),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents)
        .with_context(|| format!("cannot write {}", path.display()))
        .map_err(io_err)
}

fn read_study(path: &Path) -> Result<StudyRecord, Failure> {
    let file = File::open(path)
        .with_context(|| format!("cannot open {}", path.display()))
        .map_err(io_err)?;
    StudyRecord::from_jsonl(BufReader::new(file)).map_err(|e| match e {
        StudyError::Corrupt { line, message } => {
            config_err(anyhow!("{}: corrupt record on line {line}: {message}", path.display()))
        }
        e => config_err(anyhow!("{}: {e}", path.display())),
    })
}

fn write_summaries(out: &Path, study: &StudyRecord, cfg: &StudyConfig) -> Result<(), Failure> {
    if let Some(best) = BestReport::from_study(study, &cfg.objects) {
        let json = serde_json::to_string_pretty(&best).map_err(io_err)?;
        write_file(&out.join("best.json"), &(json + "\n"))?;
    }
    write_file(&out.join("report.csv"), &report_csv(study))
}

fn cmd_optimize(
    config: Option<&Path>,
    iters: Option<usize>,
    seed: Option<u64>,
    parallel: Option<usize>,
    out: &Path,
    resume: bool,
) -> Result<u8, Failure> {
    let study_path = out.join(STUDY_FILE);
    let stored_config = out.join(CONFIG_FILE);
    let mut cfg = match config {
        Some(p) => load_config(p)?,
        None if resume && stored_config.exists() => load_config(&stored_config)?,
        None => StudyConfig::default(),
    };
    if let Some(n) = iters {
        cfg.n_iter = n;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(k) = threads_from_env()?.or(parallel) {
        cfg.parallelism = k;
    }
    cfg.validate().context("invalid configuration").map_err(config_err)?;

    let mut study = if study_path.exists() {
        if !resume {
            return Err(config_err(anyhow!(
                "{} already exists; pass --resume or choose another --out",
                study_path.display()
            )));
        }
        read_study(&study_path)?
    } else {
        StudyRecord::new()
    };

    fs::create_dir_all(out)
        .with_context(|| format!("cannot create {}", out.display()))
        .map_err(io_err)?;
    let resolved = toml::to_string_pretty(&cfg).context("cannot serialize config").map_err(io_err)?;
    write_file(&stored_config, &resolved)?;

    let mut log = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&study_path)
        .with_context(|| format!("cannot open {}", study_path.display()))
        .map_err(io_err)?;

    let stop = Arc::new(AtomicBool::new(false));
    {
        let stop = stop.clone();
        // A second handler cannot be installed; that only matters to tests
        // running several studies in one process.
        let _ = ctrlc::set_handler(move || stop.store(true, Ordering::SeqCst));
    }

    let objective = cfg.objective();
    let space = cfg.space.to_space();
    let done = optimize(
        &objective,
        &space,
        &cfg.optimize_config(),
        &mut study,
        |t| {
            log.write_all(t.to_json_line().as_bytes())?;
            log.write_all(b"\n")?;
            log.flush()
        },
        || stop.load(Ordering::SeqCst),
    )
    .with_context(|| format!("cannot append to {}", study_path.display()))
    .map_err(io_err)?;

    write_summaries(out, &study, &cfg)?;
    if let Some(best) = study.best() {
        eprintln!("{} trials, best score {} at iteration {}", study.len(), best.score, best.index);
    }
    match done {
        Completion::Finished => Ok(0),
        Completion::Interrupted => {
            eprintln!("interrupted; rerun with --resume to continue");
            Ok(3)
        }
    }
}

/// Reads design parameters from a best.json, SI keyed or mm keyed JSON.
fn load_params(path: &Path) -> Result<DesignParams, Failure> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read params {}", path.display()))
        .map_err(config_err)?;
    let mut value: serde_json::Value = serde_json::from_str(&text)
        .with_context(|| format!("params {} is not JSON", path.display()))
        .map_err(config_err)?;
    if let Some(inner) = value.get("params") {
        value = inner.clone();
    }
    let params = serde_json::from_value::<DesignParams>(value.clone())
        .or_else(|_| serde_json::from_value::<DesignParamsMm>(value).map(DesignParams::from))
        .with_context(|| format!("params {} has neither the SI nor the mm layout", path.display()))
        .map_err(config_err)?;
    params
        .validate()
        .with_context(|| format!("params {} are infeasible", path.display()))
        .map_err(config_err)?;
    Ok(params)
}

fn cmd_simulate(
    params: &Path,
    object: &str,
    seed: u64,
    render: Option<&Path>,
    frame_every: usize,
    config: Option<&Path>,
) -> Result<u8, Failure> {
    let params = load_params(params)?;
    let spec = ObjectSpec::by_name(object).ok_or_else(|| {
        config_err(anyhow!(
            "unknown object {object:?}; known objects: {}",
            CATALOG_NAMES.join(", ")
        ))
    })?;
    let sim = match config {
        Some(p) => load_config(p)?.sim(),
        None => StudyConfig::default().sim(),
    };
    sim.validate(&params).context("invalid configuration").map_err(config_err)?;

    let frames_dir = render.map(|d| d.join("frames"));
    if let Some(dir) = &frames_dir {
        fs::create_dir_all(dir)
            .with_context(|| format!("cannot create {}", dir.display()))
            .map_err(io_err)?;
    }
    let mut trace = String::from(graspforge::scenario::TraceRow::CSV_HEADER);
    trace.push('\n');
    let mut frame = 0usize;
    let mut step = 0usize;
    let mut write_error = None;
    let outcome = run_grasp_trial_observed(&params, &spec, seed, &sim, &mut |v| {
        if render.is_none() {
            return;
        }
        let row = v.trace_row();
        trace.push_str(&row.csv());
        trace.push('\n');
        if step % frame_every.max(1) == 0 {
            let caption = format!("t = {:.3} s  {}  lift {:.3} m", row.time, row.mode, row.lift);
            let path = frames_dir.as_ref().unwrap().join(format!("{frame:05}.svg"));
            if let Err(e) = fs::write(&path, render_svg(v.world, &caption)) {
                write_error.get_or_insert((path, e));
            }
            frame += 1;
        }
        step += 1;
    });
    if let Some((path, e)) = write_error {
        return Err(io_err(anyhow!("cannot write {}: {e}", path.display())));
    }
    if let Some(dir) = render {
        write_file(&dir.join("trace.csv"), &trace)?;
    }

    let result = outcome.unwrap_or_else(|e| TrialResult {
        object: object.to_string(),
        seed,
        h: 0.0,
        mode_trace: vec![],
        termination: Termination::Unstable,
        final_contacts: 0,
        duration: 0.0,
        error: Some(e.to_string()),
    });
    println!("{}", serde_json::to_string_pretty(&result).map_err(io_err)?);
    Ok(if result.termination == Termination::Unstable { 4 } else { 0 })
}

fn cmd_report(dir: &Path, grasp_force: bool) -> Result<u8, Failure> {
    let study = read_study(&dir.join(STUDY_FILE))?;
    if study.is_empty() {
        return Err(config_err(anyhow!("{} holds no trials", dir.join(STUDY_FILE).display())));
    }
    let stored = dir.join(CONFIG_FILE);
    let cfg = if stored.exists() {
        load_config(&stored)?
    } else {
        StudyConfig::default()
    };
    write_file(&dir.join("report.csv"), &report_csv(&study))?;

    let best = BestReport::from_study(&study, &cfg.objects).expect("non-empty study");
    println!("best score {} at iteration {}", best.score, best.index);
    for (name, h) in &best.per_object_h {
        println!("  {name:<12} mean h {h:.4} m");
    }
    if grasp_force {
        let csv = grasp_force_csv(&best.params, &cfg.sim())
            .context("grasp force measurement failed")
            .map_err(|e| Failure { code: 4, error: e })?;
        write_file(&dir.join("grasp_force.csv"), &csv)?;
    }
    Ok(0)
}
