use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use fecap::bench::{measure_speedup, phase_field_preset, project_time, render_projections, Scenario};
use fecap::config::Config;
use fecap::dataset::{load_csv, save_csv, DatasetSplit};
use fecap::inverse::bayes::invert_bayes;
use fecap::inverse::grad::multi_start;
use fecap::inverse::{
    bounds_from_dataset, evaluate_candidate, run_trials, write_traces, Method, OptimizationTrace,
    Outcome, TargetSpec, Timing,
};
use fecap::metrics::FitReport;
use fecap::pipeline::{build_dataset, fit_surrogate};
use fecap::plot::{emit_plot, PlotSeries};
use fecap::surrogate::{load_model, save_model};
use fecap::oracle::simulate_sweep;
use fecap::{DeviceParams, SurrogateModel};

#[derive(Parser)]
#[command(name = "fecap", version, about = "Ferroelectric capacitor compact model and reverse design")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Seed for every random draw; overrides the config file.
    #[arg(long)]
    seed: Option<u64>,
    /// TOML config of namespaced keys (oracle.w, train.epochs, ...).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Config override `key=value`; repeatable, applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Grad,
    Bayes,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Grad => Method::Grad,
            MethodArg::Bayes => Method::Bayes,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the oracle grid and write the dataset CSV.
    GenData {
        #[command(flatten)]
        common: Common,
    },
    /// Train the surrogate and write the model JSON.
    Train {
        #[command(flatten)]
        common: Common,
        /// Dataset CSV; regenerated from the config when absent.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Per-epoch loss CSV.
        #[arg(long)]
        losses: Option<PathBuf>,
    },
    /// Score a model on the held-out devices.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Model JSON written by `train`.
        #[arg(long)]
        model: PathBuf,
        /// Dataset CSV; regenerated from the config when absent.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Find thicknesses that reproduce an oracle target sweep.
    Invert {
        #[command(flatten)]
        common: Common,
        /// Model JSON written by `train`.
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_enum)]
        method: MethodArg,
        /// Target device `t_dl,t_fl` in nm.
        #[arg(long, value_parser = parse_params)]
        target: DeviceParams,
        /// Dataset CSV; regenerated from the config when absent.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Overlay of initial, final and target curves.
        #[arg(long)]
        plot: Option<PathBuf>,
        /// Record wall time in the trace's elapsed_s column.
        #[arg(long)]
        timing: bool,
    },
    /// Run randomized reverse-design trials and write their traces.
    Trials {
        #[command(flatten)]
        common: Common,
        /// Model JSON written by `train`.
        #[arg(long)]
        model: PathBuf,
        /// Defaults to `trials.method`.
        #[arg(long, value_enum)]
        method: Option<MethodArg>,
        /// Trial count; defaults to `trials.n`.
        #[arg(long)]
        n: Option<usize>,
        /// Dataset CSV; regenerated from the config when absent.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Summary text file; printed to stdout when absent.
        #[arg(long)]
        summary: Option<PathBuf>,
        /// Record wall time in the trace's elapsed_s column.
        #[arg(long)]
        timing: bool,
    },
    /// Print run-time projections, and measured speedup given a model.
    Benchmark {
        #[command(flatten)]
        common: Common,
        /// Model JSON to time against the oracle.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Timing repeats; the median is reported.
        #[arg(long, default_value_t = 5)]
        repeats: usize,
        /// Cycle count for the measured projection.
        #[arg(long, default_value_t = 1000)]
        cycles: u64,
    },
    /// Render target and predicted sweeps to SVG.
    Plot {
        #[command(flatten)]
        common: Common,
        /// Model JSON written by `train`.
        #[arg(long)]
        model: PathBuf,
        /// Device `t_dl,t_fl` whose oracle sweep is the target.
        #[arg(long, value_parser = parse_params)]
        target: DeviceParams,
        /// Trace CSV; plots its first and best candidates of `--trial`.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Trial index to read from `--trace`.
        #[arg(long, default_value_t = 0)]
        trial: usize,
    },
}

fn parse_params(s: &str) -> std::result::Result<DeviceParams, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [dl, fl] = parts.as_slice() else {
        return Err(format!("expected t_dl,t_fl, got {s:?}"));
    };
    let dl: f64 = dl.parse().map_err(|e| format!("t_dl: {e}"))?;
    let fl: f64 = fl.parse().map_err(|e| format!("t_fl: {e}"))?;
    DeviceParams::new(dl, fl).map_err(|e| e.to_string())
}

fn load_config(common: &Common) -> Result<Config> {
    let mut cfg = match &common.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    for o in &common.overrides {
        cfg.apply_override(o)?;
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    cfg.train.seed = cfg.seed;
    cfg.validate()?;
    Ok(cfg)
}

fn dataset(cfg: &Config, data: Option<&Path>) -> Result<DatasetSplit> {
    match data {
        Some(p) => load_csv(p).with_context(|| format!("loading {}", p.display())),
        None => Ok(build_dataset(&cfg.oracle, &cfg.data, cfg.seed)?),
    }
}

fn out_path(common: &Common, default: &str) -> PathBuf {
    common.out.clone().unwrap_or_else(|| PathBuf::from(default))
}

fn model_from(path: &Path) -> Result<SurrogateModel> {
    load_model(path).with_context(|| format!("loading {}", path.display()))
}

fn write_trace_file(path: &Path, traces: Vec<(usize, &OptimizationTrace)>, timing: bool) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let timing = if timing { Timing::Record } else { Timing::Omit };
    write_traces(traces, timing, BufWriter::new(file))?;
    Ok(())
}

fn gen_data(common: &Common) -> Result<ExitCode> {
    let cfg = load_config(common)?;
    let split = build_dataset(&cfg.oracle, &cfg.data, cfg.seed)?;
    let out = out_path(common, "dataset.csv");
    save_csv(&split, &out)?;
    println!(
        "wrote {}: train {} val {} test {} samples",
        out.display(),
        split.train.len(),
        split.validation.len(),
        split.test.len()
    );
    for flag in split.flags() {
        println!("warning: {flag}");
    }
    Ok(ExitCode::SUCCESS)
}

fn train_cmd(common: &Common, data: Option<&Path>, losses: Option<&Path>) -> Result<ExitCode> {
    let cfg = load_config(common)?;
    let split = dataset(&cfg, data)?;
    let (model, trace) = fit_surrogate(&split, &cfg.hidden, &cfg.train)?;
    let out = out_path(common, "model.json");
    save_model(&model, &out)?;
    if let Some(p) = losses {
        let mut w = BufWriter::new(File::create(p)?);
        writeln!(w, "epoch,train_loss,val_loss")?;
        for e in &trace {
            let val = e.val_loss.map(|v| v.to_string()).unwrap_or_default();
            writeln!(w, "{},{},{}", e.epoch, e.train_loss, val)?;
        }
        w.flush()?;
    }
    let last = trace.last().expect("trace has the untrained entry");
    println!(
        "wrote {} ({} parameters) after {} epochs; final train loss {:.3e}",
        out.display(),
        model.parameter_count(),
        last.epoch,
        last.train_loss
    );
    Ok(ExitCode::SUCCESS)
}

fn eval_cmd(common: &Common, model: &Path, data: Option<&Path>) -> Result<ExitCode> {
    let cfg = load_config(common)?;
    let split = dataset(&cfg, data)?;
    let model = model_from(model)?;
    if split.holdout_params.is_empty() {
        bail!("dataset has no held-out devices to evaluate");
    }
    let mut report = String::from("t_dl_nm,t_fl_nm,points,r2,rmse\n");
    for &p in &split.holdout_params {
        let curve = split.test_curve(p).expect("holdout params come from the test rows");
        let pred = model.predict_sweep(p, &curve)?;
        let fit = FitReport::compute(&pred.polarization(), &curve.polarization())?;
        report.push_str(&format!("{},{},{},{:.6},{:.6}\n", p.t_dl, p.t_fl, fit.n, fit.r2, fit.rmse));
    }
    emit_text(common.out.as_deref(), &report)
}

fn emit_text(out: Option<&Path>, text: &str) -> Result<ExitCode> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(ExitCode::SUCCESS)
}

struct InvertArgs<'a> {
    model: &'a Path,
    method: Method,
    target: DeviceParams,
    data: Option<&'a Path>,
    plot: Option<&'a Path>,
    timing: bool,
}

fn invert_cmd(common: &Common, a: InvertArgs<'_>) -> Result<ExitCode> {
    let cfg = load_config(common)?;
    let split = dataset(&cfg, a.data)?;
    let bounds = bounds_from_dataset(&split)?;
    let model = model_from(a.model)?;
    let curve = simulate_sweep(a.target, &cfg.oracle, cfg.data.v_step)?;
    let target = TargetSpec::new(curve, Some(a.target))?;
    let trace = match a.method {
        Method::Grad => multi_start(&model, &target, &bounds, &cfg.grad, cfg.grad.starts, cfg.seed)?,
        Method::Bayes => invert_bayes(&model, &target, &bounds, &cfg.bayes, cfg.seed)?,
    };
    let out = out_path(common, "trace.csv");
    write_trace_file(&out, vec![(0, &trace)], a.timing)?;
    let best = trace.best;
    println!(
        "{:?} after {} iterations: t_dl {:.4} nm, t_fl {:.4} nm, R² {:.4}, RMSE {:.4}",
        trace.outcome,
        trace.len(),
        best.theta.t_dl,
        best.theta.t_fl,
        best.r2,
        best.rmse
    );
    for note in &trace.notes {
        println!("note: {note}");
    }
    if let Some(p) = a.plot {
        let first = trace.iterations[0].theta;
        let initial = model.predict_sweep(first, &target.curve)?;
        let fin = evaluate_candidate(&model, best.theta, &target)?;
        let fit = FitReport::compute(&fin.predicted.polarization(), &target.polarization())?;
        emit_plot(
            &[
                PlotSeries { curve: &target.curve, label: "target" },
                PlotSeries { curve: &initial, label: "initial" },
                PlotSeries { curve: &fin.predicted, label: "final" },
            ],
            Some(&fit),
            p,
        )?;
    }
    Ok(match trace.outcome {
        Outcome::Converged => ExitCode::SUCCESS,
        Outcome::MaxIters => ExitCode::from(2),
        Outcome::Aborted => ExitCode::FAILURE,
    })
}

fn trials_cmd(
    common: &Common,
    model: &Path,
    method: Option<MethodArg>,
    n: Option<usize>,
    data: Option<&Path>,
    summary: Option<&Path>,
    timing: bool,
) -> Result<ExitCode> {
    let mut cfg = load_config(common)?;
    if let Some(m) = method {
        cfg.trials.method = m.into();
    }
    if let Some(n) = n {
        cfg.trials.n = n;
    }
    let split = dataset(&cfg, data)?;
    let model = model_from(model)?;
    let report = run_trials(&model, &split, &cfg.trials_config())?;
    let out = out_path(common, "traces.csv");
    write_trace_file(&out, report.traces().collect(), timing)?;
    emit_text(summary, &report.render_summary())
}

fn benchmark_cmd(common: &Common, model: Option<&Path>, repeats: usize, cycles: u64) -> Result<ExitCode> {
    let cfg = load_config(common)?;
    let mut text = String::from("phase-field projection (reference preset)\n");
    text.push_str(&render_projections(&phase_field_preset()));
    if let Some(path) = model {
        let model = model_from(path)?;
        let params: Vec<DeviceParams> = cfg
            .data
            .dl_grid
            .iter()
            .flat_map(|&dl| cfg.data.fl_grid.iter().map(move |&fl| DeviceParams { t_dl: dl, t_fl: fl }))
            .collect();
        let report = measure_speedup(&model, &cfg.oracle, cfg.data.v_step, &params, repeats)?;
        text.push_str("\nmeasured sweep time\n");
        text.push_str(&report.render());
        text.push_str("\ncompact-model projection\n");
        text.push_str(&render_projections(&[project_time(
            report.surrogate_s,
            cycles,
            Scenario::Measured,
        )?]));
    }
    emit_text(common.out.as_deref(), &text)
}

/// Reads `(iter, t_dl, t_fl)` rows of one trial from a trace CSV.
fn read_trial_thetas(path: &Path, trial: usize) -> Result<Vec<DeviceParams>> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let field = |i: usize| row.get(i).unwrap_or_default();
        if field(0).parse::<usize>()? != trial {
            continue;
        }
        out.push(DeviceParams {
            t_dl: field(2).parse()?,
            t_fl: field(3).parse()?,
        });
    }
    Ok(out)
}

fn plot_cmd(common: &Common, model: &Path, target: DeviceParams, trace: Option<&Path>, trial: usize) -> Result<ExitCode> {
    let cfg = load_config(common)?;
    let model = model_from(model)?;
    let curve = simulate_sweep(target, &cfg.oracle, cfg.data.v_step)?;
    let spec = TargetSpec::new(curve, Some(target))?;
    let out = out_path(common, "plot.svg");
    match trace {
        None => {
            let eval = evaluate_candidate(&model, target, &spec)?;
            let fit = FitReport::compute(&eval.predicted.polarization(), &spec.polarization())?;
            emit_plot(
                &[
                    PlotSeries { curve: &spec.curve, label: "oracle" },
                    PlotSeries { curve: &eval.predicted, label: "surrogate" },
                ],
                Some(&fit),
                &out,
            )?;
        }
        Some(path) => {
            let thetas = read_trial_thetas(path, trial)?;
            let Some(&first) = thetas.first() else {
                bail!("trial {trial} has no rows in {}", path.display());
            };
            let mut best = evaluate_candidate(&model, first, &spec)?;
            for &t in &thetas[1..] {
                let e = evaluate_candidate(&model, t, &spec)?;
                if e.r2 > best.r2 {
                    best = e;
                }
            }
            let initial = model.predict_sweep(first, &spec.curve)?;
            let fit = FitReport::compute(&best.predicted.polarization(), &spec.polarization())?;
            emit_plot(
                &[
                    PlotSeries { curve: &spec.curve, label: "target" },
                    PlotSeries { curve: &initial, label: "initial" },
                    PlotSeries { curve: &best.predicted, label: "final" },
                ],
                Some(&fit),
                &out,
            )?;
        }
    }
    println!("wrote {}", out.display());
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::GenData { common } => gen_data(common),
        Command::Train { common, data, losses } => train_cmd(common, data.as_deref(), losses.as_deref()),
        Command::Eval { common, model, data } => eval_cmd(common, model, data.as_deref()),
        Command::Invert {
            common,
            model,
            method,
            target,
            data,
            plot,
            timing,
        } => invert_cmd(
            common,
            InvertArgs {
                model,
                method: (*method).into(),
                target: *target,
                data: data.as_deref(),
                plot: plot.as_deref(),
                timing: *timing,
            },
        ),
        Command::Trials {
            common,
            model,
            method,
            n,
            data,
            summary,
            timing,
        } => trials_cmd(common, model, *method, *n, data.as_deref(), summary.as_deref(), *timing),
        Command::Benchmark {
            common,
            model,
            repeats,
            cycles,
        } => benchmark_cmd(common, model.as_deref(), *repeats, *cycles),
        Command::Plot {
            common,
            model,
            target,
            trace,
            trial,
        } => plot_cmd(common, model, *target, trace.as_deref(), *trial),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::FAILURE } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
