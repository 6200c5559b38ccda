use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use robust_cooling::analytics::heating_components;
use robust_cooling::dynamics::{
    assemble_liouvillian, dark_state_fidelity, evolve, steady_state, steady_state_residual,
};
use robust_cooling::model::{geometry_eta_ratio, gradient_effective, raman_effective};
use robust_cooling::montecarlo::{ensemble_average, TrajectoryConfig};
use robust_cooling::quantum::{DensityMatrix, Level};
use robust_cooling::scan::{operating_point_report, run_scan, Provenance, ScanSpec, Scenario};
use robust_cooling::{Error, ModelParams, Warning};

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_VALIDITY: u8 = 4;

#[derive(Parser)]
#[command(name = "robcool", version, about = "Interference-enhanced dark-state cooling: rates, dynamics and scans")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Model or scan file (`key = value` lines, `#` comments).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file; standard output when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Worker threads for scans and trajectory ensembles.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for trajectory ensembles.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Run even when `omega_a < eta_a * nu`.
    #[arg(long, global = true)]
    force: bool,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form rate coefficients, or an operating-point report.
    Rates {
        #[arg(long, value_parser = parse_scenario)]
        scenario: Option<Scenario>,
    },
    /// Numeric steady state of the master equation.
    Steady,
    /// Master-equation time series from `|g1⟩ ⊗ thermal`.
    Evolve {
        #[arg(long, default_value_t = 200.0)]
        t_final: f64,
        #[arg(long, default_value_t = 201)]
        samples: usize,
        /// Initial mean phonon number.
        #[arg(long, default_value_t = 3.0)]
        initial_n: f64,
    },
    /// Parameter scan from a scan file or a built-in preset.
    Scan {
        #[arg(long, value_parser = ["stark_deviation", "occupation_map"], conflicts_with = "config")]
        preset: Option<String>,
    },
    /// Quantum-jump trajectory ensemble.
    Mc {
        #[arg(long, default_value_t = 100)]
        n_traj: usize,
        #[arg(long, default_value_t = 100.0)]
        t_final: f64,
        #[arg(long, default_value_t = 101)]
        samples: usize,
        #[arg(long, default_value_t = 3.0)]
        initial_n: f64,
    },
    /// Map physical realizations onto model parameters.
    #[command(subcommand)]
    Derive(Derive),
}

#[derive(Subcommand)]
enum Derive {
    /// Stark-shift drive from an off-resonant Raman pair.
    Raman {
        #[arg(long)]
        omega_p: f64,
        #[arg(long)]
        eta_p: f64,
        #[arg(long, allow_hyphen_values = true)]
        delta: f64,
        #[arg(long, default_value_t = 1.0)]
        nu: f64,
        /// Fock state used for the `2n+1` correction.
        #[arg(long, default_value_t = 0)]
        n: u32,
    },
    /// Stark-shift drive from a magnetic gradient with coupling `lambda`.
    Gradient {
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        omega_d: f64,
        #[arg(long, default_value_t = 1.0)]
        nu: f64,
    },
    /// `eta_b / eta_a` for beam A at `angle` degrees from the trap axis.
    Geometry {
        #[arg(long)]
        angle: f64,
    },
}

fn parse_scenario(s: &str) -> Result<Scenario, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

enum Failure {
    Model(Error),
    Validity(Warning),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Model(e)
    }
}

struct Output {
    provenance: Provenance,
    json: Value,
    /// CSV body without the provenance header.
    csv: String,
    default: Format,
}

impl Output {
    fn render(&self, format: Option<Format>) -> String {
        match format.unwrap_or(self.default) {
            Format::Csv => format!("{}{}", self.provenance.header(), self.csv),
            Format::Json => {
                let mut doc = json!({ "provenance": self.provenance });
                if let (Value::Object(doc), Value::Object(body)) = (&mut doc, &self.json) {
                    doc.extend(body.clone());
                }
                let mut s = serde_json::to_string_pretty(&doc).expect("JSON values serialize");
                s.push('\n');
                s
            }
        }
    }
}

fn key_value_csv(pairs: &[(&str, f64)]) -> String {
    let mut s = String::from("quantity,value\n");
    for (k, v) in pairs {
        s.push_str(&format!("{k},{v}\n"));
    }
    s
}

fn warnings_json(warnings: &[Warning]) -> Value {
    serde_json::to_value(warnings).expect("warnings serialize")
}

fn load_params(global: &Global) -> Result<ModelParams, Failure> {
    let p = match &global.config {
        Some(path) => ModelParams::from_config_file(path)?,
        None => ModelParams::default(),
    };
    gate(&p, global.force)?;
    Ok(p)
}

fn gate(p: &ModelParams, force: bool) -> Result<(), Failure> {
    match p.validity_warning() {
        Some(w) if !force => Err(Failure::Validity(w)),
        Some(w) => {
            log::warn!("{w} (continuing because of --force)");
            Ok(())
        }
        None => Ok(()),
    }
}

fn rates(global: &Global, scenario: Option<Scenario>) -> Result<Output, Failure> {
    if let Some(scenario) = scenario {
        let report = operating_point_report(scenario)?;
        let r = &report.rates;
        let mut csv = key_value_csv(&[
            ("eta_ratio", report.eta_ratio),
            ("resonance_residual", report.resonance_residual),
            ("omega_b_error", report.omega_b_error),
            ("a_plus", r.a_plus),
            ("a_minus", r.a_minus),
            ("W", r.w),
            ("n_final", r.n_final),
            ("n_ss_numeric", report.n_ss_numeric),
            ("n_ss_numeric_nominal", report.n_ss_numeric_nominal),
        ]);
        for g in &report.gamma_sweep {
            csv.push_str(&format!("n_ss_numeric_gamma_{},{}\n", g.gamma, g.n_ss_numeric));
        }
        return Ok(Output {
            provenance: Provenance::new(report.params.to_config_string()),
            json: json!({ "report": report }),
            csv,
            default: Format::Json,
        });
    }
    let p = load_params(global)?;
    let rates = heating_components(&p)?;
    let r = &rates.value;
    let csv = key_value_csv(&[
        ("a_plus_eit", r.a_plus_eit),
        ("a_plus_ssh", r.a_plus_ssh),
        ("a_plus_int", r.a_plus_int),
        ("a_plus", r.a_plus),
        ("a_minus", r.a_minus),
        ("D", r.d),
        ("curly_D", r.curly_d),
        ("W", r.w),
        ("n_final", r.n_final),
    ]);
    Ok(Output {
        provenance: Provenance::new(p.to_config_string()),
        json: json!({ "rates": r, "warnings": warnings_json(&rates.warnings) }),
        csv,
        default: Format::Json,
    })
}

fn steady(global: &Global) -> Result<Output, Failure> {
    let p = load_params(global)?;
    let l = assemble_liouvillian(&p)?;
    let rho = steady_state(&l)?;
    let state = &rho.value;
    let pops = state.populations();
    let values = [
        ("mean_n", state.mean_phonons(0)?),
        ("pop_g1", pops[0]),
        ("pop_g2", pops[1]),
        ("pop_e", pops[2]),
        ("purity", state.purity()),
        ("min_eigenvalue", state.min_eigenvalue()?),
        ("residual", steady_state_residual(&l, state)),
        ("dark_state_fidelity", dark_state_fidelity(&p, state)?),
    ];
    let mut body: serde_json::Map<String, Value> = values.iter().map(|(k, v)| (k.to_string(), json!(v))).collect();
    body.insert("warnings".into(), warnings_json(&rho.warnings));
    Ok(Output {
        provenance: Provenance::new(p.to_config_string()),
        json: Value::Object(body),
        csv: key_value_csv(&values),
        default: Format::Json,
    })
}

fn evolve_cmd(global: &Global, t_final: f64, samples: usize, initial_n: f64) -> Result<Output, Failure> {
    let p = load_params(global)?;
    let l = assemble_liouvillian(&p)?;
    let rho0 = DensityMatrix::internal_times_thermal(l.space(), Level::G1, &[initial_n])?;
    let run = evolve(&l, &rho0, t_final, samples)?;
    let resolved =
        format!("{}t_final = {t_final:?}\nsamples = {samples}\ninitial_n = {initial_n:?}\n", p.to_config_string());
    Ok(Output {
        provenance: Provenance::new(resolved),
        json: json!({ "evolution": run.value, "warnings": warnings_json(&run.warnings) }),
        csv: run.value.to_csv(),
        default: Format::Csv,
    })
}

fn scan(global: &Global, preset: Option<&str>) -> Result<Output, Failure> {
    let spec = match (preset, &global.config) {
        (Some("stark_deviation"), _) => ScanSpec::stark_deviation(),
        (Some(_), _) => ScanSpec::occupation_map(),
        (None, Some(path)) => ScanSpec::from_config_file(path)?,
        (None, None) => return Err(Error::Config("scan needs --config or --preset".into()).into()),
    };
    gate(&spec.base, global.force)?;
    let result = run_scan(&spec)?;
    if result.n_failed() > 0 {
        log::warn!("{} of {} scan cells failed", result.n_failed(), result.cells.len());
    }
    Ok(Output {
        provenance: result.provenance.clone(),
        json: json!({ "quantity": result.quantity, "axes": result.axis_labels, "cells": result.cells }),
        csv: result.data_csv(),
        default: Format::Csv,
    })
}

fn mc(global: &Global, n_traj: usize, t_final: f64, samples: usize, initial_n: f64) -> Result<Output, Failure> {
    let p = load_params(global)?;
    let cfg = TrajectoryConfig {
        n_traj,
        seed: global.seed,
        t_final,
        n_samples: samples,
        initial_mean_n: initial_n,
        ..Default::default()
    };
    let ensemble = ensemble_average(&p, &cfg)?;
    let resolved = format!(
        "{}n_traj = {n_traj}\nseed = {}\nt_final = {t_final:?}\nsamples = {samples}\ninitial_n = {initial_n:?}\n",
        p.to_config_string(),
        global.seed
    );
    Ok(Output {
        provenance: Provenance::new(resolved),
        json: json!({ "ensemble": ensemble.summary_json() }),
        csv: ensemble.to_csv(),
        default: Format::Csv,
    })
}

fn derive(cmd: &Derive) -> Result<Output, Failure> {
    let (resolved, json, csv) = match *cmd {
        Derive::Raman { omega_p, eta_p, delta, nu, n } => {
            let r = raman_effective(omega_p, eta_p, delta, nu, n)?;
            let mut pairs = vec![("omega_b", r.omega_b)];
            if let Some(eta_b) = r.eta_b {
                pairs.push(("eta_b", eta_b));
            }
            (
                format!("omega_p = {omega_p:?}\neta_p = {eta_p:?}\ndelta = {delta:?}\nnu = {nu:?}\nn = {n}\n"),
                json!({ "omega_b": r.omega_b, "eta_b": r.eta_b }),
                key_value_csv(&pairs),
            )
        }
        Derive::Gradient { lambda, omega_d, nu } => {
            let (omega_b, eta_b) = gradient_effective(lambda, nu, omega_d)?;
            (
                format!("lambda = {lambda:?}\nomega_d = {omega_d:?}\nnu = {nu:?}\n"),
                json!({ "omega_b": omega_b, "eta_b": eta_b }),
                key_value_csv(&[("omega_b", omega_b), ("eta_b", eta_b)]),
            )
        }
        Derive::Geometry { angle } => {
            let ratio = geometry_eta_ratio(angle)?;
            (format!("angle = {angle:?}\n"), json!({ "eta_ratio": ratio }), key_value_csv(&[("eta_ratio", ratio)]))
        }
    };
    Ok(Output { provenance: Provenance::new(resolved), json, csv, default: Format::Json })
}

fn write_output(text: &str, out: Option<&Path>) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display()))),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| Failure::Io(e.to_string())),
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    if let Some(n) = cli.global.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Model(Error::Config(format!("--threads: {e}"))))?;
    }
    let g = &cli.global;
    let output = match &cli.command {
        Command::Rates { scenario } => rates(g, *scenario)?,
        Command::Steady => steady(g)?,
        Command::Evolve { t_final, samples, initial_n } => evolve_cmd(g, *t_final, *samples, *initial_n)?,
        Command::Scan { preset } => scan(g, preset.as_deref())?,
        Command::Mc { n_traj, t_final, samples, initial_n } => mc(g, *n_traj, *t_final, *samples, *initial_n)?,
        Command::Derive(d) => derive(d)?,
    };
    write_output(&output.render(g.format), g.out.as_deref())?;
    if let Some(path) = &g.out {
        log::info!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Model(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { EXIT_CONFIG } else { EXIT_NUMERICAL })
        }
        Err(Failure::Validity(w)) => {
            eprintln!("error: {w}; rerun with --force to proceed");
            ExitCode::from(EXIT_VALIDITY)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}
