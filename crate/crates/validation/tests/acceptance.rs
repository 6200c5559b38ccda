//! Acceptance criteria 1 to 9. Prints one `PASS`/`FAIL` line per criterion and exits non-zero
//! when any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use robust_cooling::analytics::*;
use robust_cooling::dynamics::{assemble_liouvillian, dark_state_fidelity, evolve, steady_state};
use robust_cooling::montecarlo::{ensemble_average, TrajectoryConfig};
use robust_cooling::quantum::{DensityMatrix, Level};
use robust_cooling::scan::{n_ss_numeric, run_scan, w_fit, ScanSpec};
use robust_cooling::ModelParams;

type Outcome = Result<(bool, String), robust_cooling::Error>;
type Criterion = (&'static str, fn() -> Outcome);

struct Sample {
    gamma: f64,
    delta: f64,
    omega_a: f64,
    ratio: f64,
}

/// The randomized parameter sample shared by criteria 1 and 3.
fn random_sample() -> Vec<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_601);
    (0..100)
        .map(|_| Sample {
            gamma: rng.random_range(0.2..5.0),
            delta: rng.random_range(-3.0..3.0),
            omega_a: rng.random_range(0.1..1.0),
            ratio: rng.random_range(2.5..8.0),
        })
        .collect()
}

fn resonant_sample(s: &Sample) -> ModelParams {
    let eta_a = 0.05;
    ModelParams {
        gamma: s.gamma,
        delta: s.delta,
        omega_a: s.omega_a,
        eta_a,
        eta_b: s.ratio * eta_a,
        omega_b: resonance_condition(s.ratio, 1.0).expect("ratio above 2"),
        ..Default::default()
    }
}

/// `[A₊ᴱᴵᵀ, A₊ˢˢʰ, A₊]` written out independently, with the detuning sign of the printed formulas.
fn printed_a_plus(p: &ModelParams) -> [f64; 3] {
    let (nu, g, dp) = (p.nu, p.gamma, -p.delta);
    let (oa, ob, ea, eb) = (p.omega_a, p.omega_b, p.eta_a, p.eta_b);
    let inv = 2.0 * oa * oa * g
        / (g * g * (nu + 2.0 * ob).powi(2) + (-2.0 * oa * oa + (nu + 2.0 * ob) * (dp + nu + ob)).powi(2));
    [(ea * (nu + 2.0 * ob)).powi(2) * inv, (eb * ob).powi(2) * inv, (ea * (nu + 2.0 * ob) - eb * ob).powi(2) * inv]
}

fn colinear_optimum(eta_a: f64, cutoff: usize) -> ModelParams {
    let p = ModelParams { eta_a, omega_a: 0.3, omega_b: 0.5, delta: 0.0, gamma: 1.0, cutoff, ..Default::default() };
    with_resonant_eta_b(&p).expect("resonance exists")
}

fn slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    points.iter().map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / points.iter().map(|(x, _)| (x - mx).powi(2)).sum::<f64>()
}

fn criterion_1() -> Outcome {
    let mut worst: f64 = 0.0;
    for s in &random_sample() {
        let r = heating_components(&resonant_sample(s))?.value;
        let scale = r.a_plus_eit.max(r.a_plus_ssh);
        worst = worst.max(r.a_plus.abs() / scale);
    }
    Ok((worst <= 1e-14, format!("max |a_plus| / component scale = {worst:.2e} over 100 sets (bound 1e-14)")))
}

fn criterion_2() -> Outcome {
    let mut logs = Vec::new();
    let mut max_pe: f64 = 0.0;
    for eta_a in [0.02, 0.04, 0.08] {
        let p = colinear_optimum(eta_a, 15);
        let rho = steady_state(&assemble_liouvillian(&p)?)?.value;
        max_pe = max_pe.max(rho.population(Level::E));
        let infidelity = 1.0 - dark_state_fidelity(&p, &rho)?;
        logs.push((eta_a.ln(), infidelity.ln()));
    }
    let s = slope(&logs);
    Ok((
        max_pe <= 1e-4 && s >= 3.5,
        format!("max P_e = {max_pe:.2e} (bound 1e-4), slope of log(1-F) vs log eta_A = {s:.3} (bound >= 3.5)"),
    ))
}

fn criterion_3() -> Outcome {
    let mut worst: f64 = 0.0;
    for s in &random_sample() {
        let on = resonant_sample(s);
        let off = ModelParams { omega_b: on.omega_b * 1.1, ..on.clone() };
        for p in [on, off] {
            let numeric = 2.0 * spectrum_numeric(&p, -p.nu)?.value.re;
            let [eit, ssh, total] = printed_a_plus(&p);
            let scale = total.max(eit + ssh);
            worst = worst.max((numeric - total).abs() / scale);
        }
    }
    Ok((worst <= 1e-6, format!("max relative gap 2Re S(-nu) vs printed A+ = {worst:.2e} over 200 points (bound 1e-6)")))
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let nu = rng.random_range(0.5..2.0);
        let eta_a = rng.random_range(0.005..0.1);
        let p = ModelParams {
            nu,
            gamma: rng.random_range(0.2..5.0),
            delta: rng.random_range(-3.0..3.0),
            omega_a: rng.random_range(0.1..1.0),
            omega_b: nu / 2.0,
            eta_a,
            eta_b: 4.0 * eta_a,
            ..Default::default()
        };
        let w = cooling_rate_closed(&p);
        let identity = p.gamma * (p.eta_b * nu).powi(2) / (8.0 * p.omega_a.powi(2));
        worst = worst.max((w - identity).abs() / identity);
    }
    let bound = 4.0 * f64::EPSILON;
    Ok((
        worst <= bound,
        format!("max relative gap W vs Gamma eta_B^2 nu^2 / (8 Omega_A^2) = {worst:.2e} (bound {bound:.1e})"),
    ))
}

fn criterion_5() -> Outcome {
    let p = colinear_optimum(0.02, 12);
    let closed = cooling_rate_closed(&p);
    let (fit, warnings) = w_fit(&p)?;
    let (n_ss, _) = n_ss_numeric(&p)?;
    let gap = (fit - closed).abs() / closed;
    let n_bound = 2.0 * p.eta_b.powi(2);
    let kinds: Vec<String> = warnings.iter().map(|w| w.to_string()).collect();
    Ok((
        gap <= 0.15 && n_ss <= n_bound,
        format!(
            "W_fit = {fit:.5} vs closed {closed:.5} ({:+.1}%, bound 15%); n_ss = {n_ss:.3e} (bound {n_bound:.1e}); warnings: {kinds:?}",
            100.0 * (fit / closed - 1.0)
        ),
    ))
}

fn criterion_6() -> Outcome {
    let p = colinear_optimum(0.05, 15);
    let offsets: Vec<f64> = (0..7).map(|k| 1e-3 * 10f64.powf(k as f64 / 6.0)).collect();
    let b = robustness_slope(&p, RobustnessAxis::OmegaB, &offsets)?;
    let b_ok = (b - 2.0).abs() <= 0.3;
    let (a_ok, a_text) = match robustness_slope(&p, RobustnessAxis::OmegaA, &offsets) {
        Ok(a) => ((a - 4.0).abs() <= 0.5, format!("{a:.3}")),
        Err(e) => (false, format!("unavailable ({e})")),
    };
    Ok((b_ok && a_ok, format!("slope vs dOmega_B = {b:.3} (2 +- 0.3); slope vs dOmega_A = {a_text} (4 +- 0.5)")))
}

fn criterion_7() -> Outcome {
    let (nu, delta, linewidth) = (1.0, 10.0, 1.0);
    let omega_a = eit_optimal_omega_a(nu, delta)?;
    // the excited level decays at 2Γ, so a full linewidth of ν means Γ = ν/2
    let p = ModelParams {
        nu,
        delta,
        omega_a,
        omega_b: 0.0,
        eta_a: 0.05,
        eta_b: 0.0,
        gamma: linewidth / 2.0,
        ..Default::default()
    };
    let n = heating_components(&p)?.value.n_final;
    let target = eit_limit_occupation(linewidth, delta);
    let ratio = n / target;
    let literal = ModelParams { gamma: linewidth, ..p.clone() };
    let n_literal = heating_components(&literal)?.value.n_final;
    Ok((
        (0.5..=2.0).contains(&ratio),
        format!(
            "n_final = {n:.4e} vs (gamma/4|Delta|)^2 = {target:.4e}, ratio {ratio:.3} (bound [0.5, 2]); \
             with the model's Gamma = nu instead: n_final = {n_literal:.4e}, ratio {:.3}",
            n_literal / target
        ),
    ))
}

fn criterion_8() -> Outcome {
    let p = ModelParams { eta_a: 0.1, eta_b: 0.4, omega_a: 0.3, omega_b: 0.5, cutoff: 10, ..Default::default() };
    let cfg = TrajectoryConfig {
        n_traj: 500,
        seed: 8,
        t_final: 30.0,
        n_samples: 11,
        initial_mean_n: 1.0,
        ..Default::default()
    };
    let ensemble = ensemble_average(&p, &cfg)?;
    let l = assemble_liouvillian(&p)?;
    let rho0 = DensityMatrix::internal_times_thermal(l.space(), Level::G1, &[cfg.initial_mean_n])?;
    let me = evolve(&l, &rho0, cfg.t_final, cfg.n_samples)?.value;
    let worst_z =
        (0..me.len()).map(|k| (ensemble.mean_n[0][k] - me.mean_n[k]).abs() / ensemble.stderr[0][k]).fold(0.0, f64::max);

    let quarter = ensemble_average(&p, &TrajectoryConfig { n_traj: cfg.n_traj / 4, ..cfg.clone() })?;
    let mean_se = |e: &[f64]| e[1..].iter().sum::<f64>() / (e.len() - 1) as f64;
    let se_ratio = mean_se(&quarter.stderr[0]) / mean_se(&ensemble.stderr[0]);
    Ok((
        worst_z <= 3.0 && (se_ratio - 2.0).abs() <= 0.3 * 2.0,
        format!(
            "max |MC - ME| = {worst_z:.2} standard errors over {} times (bound 3); \
             stderr(125) / stderr(500) = {se_ratio:.3} (2 +- 30%)",
            me.len()
        ),
    ))
}

fn criterion_9() -> Outcome {
    let f2 = ScanSpec::stark_deviation();
    let r2 = run_scan(&f2)?;
    let (n_off, n_eta) = (f2.axes[0].values.len(), f2.axes[1].values.len());
    let dev = |i_off: usize, i_eta: usize| r2.cells[i_off * n_eta + i_eta].value;
    let centre = f2.axes[0].values.iter().position(|v| v.abs() < 1e-12).expect("zero offset on the grid");
    let mut argmins = Vec::new();
    for i_eta in 0..n_eta {
        let col: Vec<f64> = (0..n_off).map(|i| dev(i, i_eta)).collect();
        let i_min = (0..n_off).min_by(|&a, &b| col[a].total_cmp(&col[b])).expect("non-empty");
        argmins.push(f2.axes[0].values[i_min]);
    }
    let minimum_at_zero = argmins.iter().all(|v| v.abs() < 1e-12);
    let ordered = (0..n_off).all(|i| (1..n_eta).all(|j| dev(i, j - 1) < dev(i, j)));
    let centre_values: Vec<String> = (0..n_eta).map(|j| format!("{:.2e}", dev(centre, j))).collect();

    let f3 = ScanSpec::occupation_map();
    let r3 = run_scan(&f3)?;
    let (ratios, omegas) = (&f3.axes[0].values, &f3.axes[1].values);
    let step = omegas[1] - omegas[0];
    let mut worst_gap: f64 = 0.0;
    for (i, &ratio) in ratios.iter().enumerate() {
        let row = &r3.cells[i * omegas.len()..(i + 1) * omegas.len()];
        let j = (0..row.len())
            .filter(|&j| row[j].is_ok())
            .min_by(|&a, &b| row[a].value.total_cmp(&row[b].value))
            .expect("row has finite cells");
        worst_gap = worst_gap.max((omegas[j] - resonance_condition(ratio, 1.0)?).abs());
    }
    let valley = worst_gap <= step * (1.0 + 1e-9);
    Ok((
        minimum_at_zero && ordered && valley,
        format!(
            "deviation scan: minimum at dOmega_B = 0 {} (argmin per eta_A {argmins:?}); \
             decreasing with eta_A {} (at 0: {centre_values:?}); \
             occupation map: valley within one grid step of the resonance locus {} (worst gap {worst_gap:.3}, step {step:.3})",
            yes_no(minimum_at_zero),
            yes_no(ordered),
            yes_no(valley)
        ),
    ))
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "NO"
    }
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("interference cancellation on the resonance", criterion_1),
        ("dark steady state and fourth-order purity", criterion_2),
        ("spectrum agrees with the closed-form heating rate", criterion_3),
        ("half-nu cooling-rate identity", criterion_4),
        ("closed-form rate against master-equation dynamics", criterion_5),
        ("robustness exponents", criterion_6),
        ("EIT limit", criterion_7),
        ("Monte Carlo against the master equation", criterion_8),
        ("scan-shape reproduction", criterion_9),
    ];
    let mut failures = 0;
    for (i, (title, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (pass, detail) = check().unwrap_or_else(|e| (false, format!("error: {e}")));
        let secs = start.elapsed().as_secs_f64();
        println!("{} criterion {}: {title}: {detail} [{secs:.1} s]", if pass { "PASS" } else { "FAIL" }, i + 1);
        failures += usize::from(!pass);
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
