//! Command-line front end for the non-Gaussianity witness protocol.
//!
//! Exit codes: 0 on success (or a certificate), 2 when certification is
//! inconclusive, 1 on any error.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use stellar_witness::certify::{self, Verdict};
use stellar_witness::config::{
    parse_grid, parse_state, parse_windows_str, resolve_windows, ExperimentConfig, OutputFormat,
    WindowSpec, DEFAULT_ANGLES,
};
use stellar_witness::homodyne::{self, fmt17, SampleBatch};
use stellar_witness::oracle;
use stellar_witness::optimize::{self, violation};
use stellar_witness::witness::expectation_set;
use stellar_witness::zeros::{find_real_zeros, locate_zero_angles_full, DEFAULT_TOL_IMAG};
use stellar_witness::{QuadratureAngle, Result, State, WitnessError};

#[derive(Parser)]
#[command(name = "stellar-witness", version, about = "Witness stellar rank from homodyne data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Real zeros of the quadrature wavefunctions.
    Zeros(Flags),
    /// Threshold value of a window set over the feasible states.
    Threshold(Flags),
    /// Violation as a function of window width.
    Scan(Flags),
    /// Simulate or load homodyne data and run the certification test.
    Certify(Flags),
    /// Violation of the lossy single-photon target as loss grows.
    LossSweep(Flags),
    /// Sample sizes for a requested confidence.
    SamplePlan(Flags),
    /// Fock expansion of a state through the independent oracle.
    Oracle(Flags),
    /// Simulated homodyne outcomes at one angle.
    Sample(Flags),
}

#[derive(Args, Clone, Default)]
struct Flags {
    /// JSON config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// vacuum | fock:N | psiT | lossy:P | inline JSON | path to JSON.
    #[arg(long)]
    state: Option<String>,
    /// State to simulate when certifying (defaults to --state).
    #[arg(long)]
    simulate: Option<String>,
    /// Maximal stellar rank k of the feasible set.
    #[arg(long)]
    rank: Option<usize>,
    /// Energy bound E of the feasible set.
    #[arg(long)]
    energy: Option<f64>,
    /// "auto-zeros", inline JSON list, or path to a JSON list of windows.
    #[arg(long)]
    windows: Option<String>,
    #[arg(long)]
    eta: Option<f64>,
    /// Comma-separated angles; restricts auto-zeros, or the angle for `sample`.
    #[arg(long, value_delimiter = ',')]
    theta: Option<Vec<f64>>,
    /// Grid size for the zero-angle search over half a turn.
    #[arg(long)]
    angles: Option<usize>,
    #[arg(long)]
    tol_imag: Option<f64>,
    /// start:stop:count or a comma list.
    #[arg(long)]
    eta_grid: Option<String>,
    /// start:stop:count or a comma list.
    #[arg(long)]
    p_grid: Option<String>,
    /// Samples per angle.
    #[arg(long)]
    samples: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    ftol: Option<f64>,
    /// Predicted violation for the sample planner.
    #[arg(long)]
    violation: Option<f64>,
    /// Fock truncation for the oracle.
    #[arg(long)]
    n_trunc: Option<usize>,
    /// Homodyne batches (CSV) to certify instead of simulating.
    #[arg(long, value_delimiter = ',')]
    batches: Option<Vec<PathBuf>>,
    #[arg(long)]
    out: Option<String>,
    #[arg(long, value_parser = ["json", "csv"])]
    format: Option<String>,
}

impl Flags {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let file = match &self.config {
            Some(p) => ExperimentConfig::from_file(p)?,
            None => ExperimentConfig::default(),
        };
        let cli = ExperimentConfig {
            state: self.state.clone().map(Value::String),
            simulate: self.simulate.clone().map(Value::String),
            rank: self.rank,
            energy: self.energy,
            windows: self.windows.as_deref().map(parse_windows_str).transpose()?,
            eta: self.eta,
            theta: self.theta.clone(),
            angles: self.angles,
            tol_imag: self.tol_imag,
            eta_grid: self.eta_grid.as_deref().map(parse_grid).transpose()?,
            p_grid: self.p_grid.as_deref().map(parse_grid).transpose()?,
            samples: self.samples,
            seed: self.seed,
            epsilon: self.epsilon,
            delta: self.delta,
            restarts: self.restarts,
            max_iters: self.max_iters,
            ftol: self.ftol,
            violation: self.violation,
            n_trunc: self.n_trunc,
            out: self.out.clone(),
            format: self.format.as_deref().map(|f| if f == "csv" { OutputFormat::Csv } else { OutputFormat::Json }),
        };
        let merged = file.overlay(&cli);
        merged.validate()?;
        Ok(merged)
    }
}

struct Output {
    json: Value,
    csv: Option<Csv>,
}

struct Csv {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Csv {
    fn render(&self, hash: &str) -> String {
        let mut s = format!("# config_hash={hash}\n{}\n", self.header.join(","));
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }
}

fn emit(cfg: &ExperimentConfig, out: Output) -> Result<()> {
    let text = match (cfg.format.unwrap_or_default(), out.csv) {
        (OutputFormat::Csv, Some(csv)) => csv.render(&cfg.hash()),
        (OutputFormat::Csv, None) => {
            return Err(WitnessError::Config("this command has no CSV form; use --format json".into()))
        }
        (OutputFormat::Json, _) => serde_json::to_string_pretty(&out.json)? + "\n",
    };
    match &cfg.out {
        Some(path) => std::fs::write(path, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn to_value<T: Serialize>(v: &T) -> Result<Value> {
    Ok(serde_json::to_value(v)?)
}

fn pure_target(state: &State) -> Result<&stellar_witness::StellarState> {
    match state {
        State::Pure(s) => Ok(s),
        State::Mixed(m) if m.components().len() == 1 => Ok(&m.components()[0].1),
        State::Mixed(_) => Err(WitnessError::Config("this command needs a pure state".into())),
    }
}

fn cmd_zeros(cfg: &ExperimentConfig) -> Result<Output> {
    let target = cfg.target()?;
    let s = pure_target(&target)?;
    let tol = cfg.tol_imag.unwrap_or(DEFAULT_TOL_IMAG);
    let sets = match &cfg.theta {
        Some(angles) => angles
            .iter()
            .map(|&t| find_real_zeros(s, t.into(), tol))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .filter(|z| !z.is_empty())
            .collect(),
        None => locate_zero_angles_full(s, cfg.angles.unwrap_or(DEFAULT_ANGLES), tol)?,
    };
    let total: usize = sets.iter().map(|z| z.zeros.len()).sum();
    let rows = sets
        .iter()
        .flat_map(|z| {
            z.zeros
                .iter()
                .zip(&z.multiplicities)
                .map(|(q, m)| vec![fmt17(z.theta.radians()), fmt17(*q), m.to_string()])
        })
        .collect();
    Ok(Output {
        json: json!({
            "zero_bearing_angles": sets.len(),
            "total_zeros": total,
            "sets": to_value(&sets)?,
        }),
        csv: Some(Csv {
            header: vec!["theta", "x", "multiplicity"],
            rows,
        }),
    })
}

fn cmd_threshold(cfg: &ExperimentConfig) -> Result<Output> {
    let spec = cfg.feasible_set()?;
    // Explicit windows need no target; the violation is reported only when one is given.
    if cfg.state.is_none() {
        if let Some(WindowSpec::Explicit(ws)) = &cfg.windows {
            let t = optimize::threshold(ws, &spec, &cfg.optimizer())?;
            return Ok(Output {
                json: json!({ "windows": to_value(ws)?, "threshold": to_value(&t)? }),
                csv: Some(Csv {
                    header: vec!["threshold", "argmin_energy"],
                    rows: vec![vec![fmt17(t.value), fmt17(t.argmin_energy)]],
                }),
            });
        }
    }
    let target = cfg.target()?;
    let ws = resolve_windows(cfg, &target)?;
    let v = violation(&target, &ws, &spec, &cfg.optimizer())?;
    Ok(Output {
        json: json!({
            "windows": to_value(&ws)?,
            "threshold": to_value(&v.threshold)?,
            "target_expectation": v.target_expectation,
            "violation": v.violation,
        }),
        csv: Some(Csv {
            header: vec!["threshold", "target_expectation", "violation", "argmin_energy"],
            rows: vec![vec![
                fmt17(v.threshold.value),
                fmt17(v.target_expectation),
                fmt17(v.violation),
                fmt17(v.threshold.argmin_energy),
            ]],
        }),
    })
}

fn cmd_scan(cfg: &ExperimentConfig) -> Result<Output> {
    let target = cfg.target()?;
    let ws = resolve_windows(cfg, &target)?;
    let grid = cfg.eta_grid.clone().unwrap_or_else(|| (1..=40).map(|i| 0.05 * i as f64).collect());
    let scan = optimize::scan_eta(&target, &ws, &cfg.feasible_set()?, &grid, &cfg.optimizer())?;
    let rows = scan
        .points
        .iter()
        .map(|p| vec![fmt17(p.eta), fmt17(p.threshold), fmt17(p.target_expectation), fmt17(p.violation)])
        .collect();
    Ok(Output {
        json: json!({
            "points": to_value(&scan.points)?,
            "positive_range": scan.positive_range(),
        }),
        csv: Some(Csv {
            header: vec!["eta", "threshold", "target_expectation", "violation"],
            rows,
        }),
    })
}

fn cmd_certify(cfg: &ExperimentConfig, batch_files: Option<&[PathBuf]>) -> Result<(Output, Verdict)> {
    // Recorded batches with explicit windows need no target state.
    let target = match cfg.state {
        Some(_) => Some(cfg.target()?),
        None => None,
    };
    let ws = match (&cfg.windows, &target) {
        (Some(WindowSpec::Explicit(ws)), _) => ws.clone(),
        (_, Some(t)) => resolve_windows(cfg, t)?,
        (_, None) => return Err(cfg.target().unwrap_err()),
    };
    let spec = cfg.feasible_set()?;
    let epsilon = cfg.epsilon.unwrap_or(0.05);
    let delta = cfg.delta.unwrap_or(0.05);
    let thr = optimize::threshold(&ws, &spec, &cfg.optimizer())?;
    let angles = ws.angles();

    let batches: Vec<SampleBatch> = match batch_files {
        Some(files) => files
            .iter()
            .map(|f| homodyne::read_batch_csv(&std::fs::read_to_string(f)?))
            .collect::<Result<_>>()?,
        None => {
            let m = match cfg.samples {
                Some(m) => m,
                None if ws.len() == 1 => certify::required_samples(epsilon, delta)?,
                None => certify::required_samples_multi(epsilon, delta, ws.len())?,
            };
            let sim = match (&cfg.simulate, &target) {
                (Some(v), _) => parse_state(v)?,
                (None, Some(t)) => t.clone(),
                (None, None) => cfg.target()?,
            };
            let seed = cfg.seed.unwrap_or(0);
            angles
                .iter()
                .enumerate()
                .map(|(i, &a)| homodyne::sample(&sim, a, m as usize, homodyne::derive_seed(seed, i as u64)))
                .collect::<Result<_>>()?
        }
    };
    let est = homodyne::estimate_witness(&batches, &ws)?;
    let counts: Vec<u64> = est.samples_used.iter().map(|&m| m as u64).collect();
    let report = certify::certify(thr.value, est.total, epsilon, &counts, &spec)?;
    eprint!("{}", report.to_text());
    let verdict = report.verdict;
    let row = vec![
        format!("{:?}", report.verdict),
        fmt17(report.threshold),
        fmt17(report.estimator),
        fmt17(report.epsilon),
        fmt17(report.violation_margin),
        fmt17(report.confidence),
    ];
    Ok((
        Output {
            json: json!({
                "report": to_value(&report)?,
                "estimator": to_value(&est)?,
                "threshold": to_value(&thr)?,
                "target_expectation": target.as_ref().map(|t| expectation_set(t, &ws)).transpose()?,
            }),
            csv: Some(Csv {
                header: vec!["verdict", "threshold", "estimator", "epsilon", "margin", "confidence"],
                rows: vec![row],
            }),
        },
        verdict,
    ))
}

fn cmd_loss_sweep(cfg: &ExperimentConfig) -> Result<Output> {
    let mut cfg = cfg.clone();
    cfg.eta.get_or_insert(1.0);
    cfg.theta.get_or_insert_with(|| vec![0.0]);
    let single: State = stellar_witness::StellarState::fock(1).into();
    let ws = resolve_windows(&cfg, &single)?;
    let thr = optimize::threshold(&ws, &cfg.feasible_set()?, &cfg.optimizer())?;
    let grid = cfg.p_grid.clone().unwrap_or_else(|| (0..=20).map(|i| 0.05 * i as f64).collect());
    let mut rows = Vec::new();
    let mut points = Vec::new();
    for &p in &grid {
        let rho: State = homodyne::apply_loss_single_photon(p)?.into();
        let t = expectation_set(&rho, &ws)?;
        rows.push(vec![fmt17(p), fmt17(thr.value), fmt17(t), fmt17(thr.value - t)]);
        points.push(json!({"p": p, "target_expectation": t, "violation": thr.value - t}));
    }
    // The violation is linear in p, so its root follows from the endpoints.
    let v0 = thr.value - expectation_set(&single, &ws)?;
    let v1 = thr.value - expectation_set(&State::Pure(stellar_witness::StellarState::vacuum()), &ws)?;
    let p_star = (v0 > 0.0 && v1 < 0.0).then(|| v0 / (v0 - v1));
    Ok(Output {
        json: json!({
            "windows": to_value(&ws)?,
            "threshold": thr.value,
            "points": points,
            "zero_crossing_p": p_star,
        }),
        csv: Some(Csv {
            header: vec!["p", "threshold", "target_expectation", "violation"],
            rows,
        }),
    })
}

fn cmd_sample_plan(cfg: &ExperimentConfig) -> Result<Output> {
    let epsilon = cfg.epsilon.unwrap_or(0.05);
    let delta = cfg.delta.unwrap_or(0.05);
    let (n_windows, predicted) = match &cfg.state {
        Some(_) => {
            let target = cfg.target()?;
            let ws = resolve_windows(cfg, &target)?;
            let predicted = match cfg.violation {
                Some(v) => v,
                None => violation(&target, &ws, &cfg.feasible_set()?, &cfg.optimizer())?.violation,
            };
            (ws.len(), Some(predicted))
        }
        None => (1, cfg.violation),
    };
    let per_window = certify::required_samples_multi(epsilon, delta, n_windows)?;
    let plan = match predicted {
        Some(v) if v > 0.0 => Some(certify::plan(v, delta, n_windows)?),
        _ => None,
    };
    Ok(Output {
        json: json!({
            "epsilon": epsilon,
            "delta": delta,
            "windows": n_windows,
            "required_samples_single": certify::required_samples(epsilon, delta)?,
            "samples_per_window": per_window,
            "predicted_violation": predicted,
            "plan": to_value(&plan)?,
        }),
        csv: plan.map(|rows| Csv {
            header: vec!["epsilon", "samples_per_window", "total_samples", "failure_bound"],
            rows: rows
                .iter()
                .map(|r| {
                    vec![
                        fmt17(r.epsilon),
                        r.samples_per_window.to_string(),
                        r.total_samples.to_string(),
                        fmt17(r.failure_bound),
                    ]
                })
                .collect(),
        }),
    })
}

fn cmd_oracle(cfg: &ExperimentConfig) -> Result<Output> {
    let target = cfg.target()?;
    let s = pure_target(&target)?;
    let v = match cfg.n_trunc {
        Some(n) => oracle::fock_expand(s, n)?,
        None => oracle::fock_expand_auto(s)?,
    };
    let e = oracle::oracle_energy(&v);
    Ok(Output {
        json: json!({
            "n_trunc": v.n_trunc(),
            "amplitudes": v.amplitudes.iter().map(|a| [a.re, a.im]).collect::<Vec<_>>(),
            "truncation_error": v.truncation_error,
            "unreliable": v.unreliable,
            "oracle_energy": e.energy,
            "energy_correction": e.correction,
            "analytic_energy": s.mean_energy(),
        }),
        csv: Some(Csv {
            header: vec!["n", "re", "im"],
            rows: v
                .amplitudes
                .iter()
                .enumerate()
                .map(|(n, a)| vec![n.to_string(), fmt17(a.re), fmt17(a.im)])
                .collect(),
        }),
    })
}

fn cmd_sample(cfg: &ExperimentConfig) -> Result<()> {
    let target = cfg.target()?;
    let theta = cfg.theta.as_ref().and_then(|t| t.first().copied()).unwrap_or(0.0);
    let m = cfg.samples.unwrap_or(1000) as usize;
    let batch = homodyne::sample(&target, QuadratureAngle::new(theta), m, cfg.seed.unwrap_or(0))?;
    let mut buf = Vec::new();
    match cfg.format.unwrap_or_default() {
        OutputFormat::Csv => batch.write_csv(&mut buf)?,
        OutputFormat::Json => {
            serde_json::to_writer_pretty(&mut buf, &batch)?;
            buf.push(b'\n');
        }
    }
    match &cfg.out {
        Some(p) => std::fs::write(p, buf)?,
        None => std::io::stdout().write_all(&buf)?,
    }
    Ok(())
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Certify(f) => {
            let cfg = f.resolve()?;
            let (out, verdict) = cmd_certify(&cfg, f.batches.as_deref())?;
            emit(&cfg, out)?;
            Ok(verdict.exit_code())
        }
        Command::Sample(f) => cmd_sample(&f.resolve()?).map(|_| 0),
        Command::Zeros(f) => with(f, cmd_zeros),
        Command::Threshold(f) => with(f, cmd_threshold),
        Command::Scan(f) => with(f, cmd_scan),
        Command::LossSweep(f) => with(f, cmd_loss_sweep),
        Command::SamplePlan(f) => with(f, cmd_sample_plan),
        Command::Oracle(f) => with(f, cmd_oracle),
    }
}

fn with(f: Flags, cmd: fn(&ExperimentConfig) -> Result<Output>) -> Result<i32> {
    let cfg = f.resolve()?;
    emit(&cfg, cmd(&cfg)?)?;
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
