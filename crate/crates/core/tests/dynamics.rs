use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use robust_cooling::analytics::{cooling_rate_closed, with_resonant_eta_b};
use robust_cooling::dynamics::*;
use robust_cooling::quantum::*;
use robust_cooling::{Error, ModelParams, Warning};

fn resonant(eta_a: f64, cutoff: usize) -> ModelParams {
    let p = ModelParams { eta_a, omega_a: 0.3, omega_b: 0.5, delta: 0.0, gamma: 1.0, cutoff, ..Default::default() };
    with_resonant_eta_b(&p).unwrap()
}

/// `exp(a)` by scaling and squaring a truncated Taylor series.
fn expm(a: faer::MatRef<'_, C64>) -> Mat<C64> {
    let n = a.nrows();
    let norm = (0..n).map(|j| (0..n).map(|i| a[(i, j)].norm()).sum::<f64>()).fold(0.0, f64::max);
    let squarings = norm.log2().ceil().max(0.0) as i32 + 1;
    let scaled = faer::Scale(C64::new(0.5f64.powi(squarings), 0.0)) * a;
    let mut result = Mat::<C64>::identity(n, n);
    let mut term = Mat::<C64>::identity(n, n);
    for k in 1..=20 {
        term = faer::Scale(C64::new(1.0 / k as f64, 0.0)) * (&term * &scaled);
        result = &result + &term;
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

#[test]
fn excited_population_decays_at_twice_gamma() {
    let p =
        ModelParams { omega_a: 0.0, omega_b: 0.0, eta_a: 0.0, eta_b: 0.0, gamma: 0.7, cutoff: 2, ..Default::default() };
    let l = assemble_liouvillian(&p).unwrap();
    let space = p.space().unwrap();
    let rho0 = DensityMatrix::internal_times_thermal(&space, Level::E, &[0.0]).unwrap();
    let r = evolve(&l, &rho0, 3.0, 31).unwrap().value;
    for (t, pe) in r.times.iter().zip(&r.populations[2]) {
        assert!((pe - (-2.0 * p.gamma * t).exp()).abs() < 1e-8, "t = {t}");
    }
}

#[test]
fn generator_preserves_trace() {
    for p in [ModelParams::default(), resonant(0.1, 6), ModelParams { delta: 2.0, eta_a: 0.2, ..Default::default() }] {
        let l = assemble_liouvillian(&ModelParams { cutoff: 8, ..p }).unwrap();
        assert!(l.trace_residual() <= 1e-10);
    }
}

#[test]
fn oversized_generator_is_a_resource_error() {
    let p = ModelParams { cutoff: 40, ..Default::default() };
    assert!(matches!(assemble_liouvillian(&p), Err(Error::Resource(_))));
}

#[test]
fn internal_eit_steady_state_is_dark() {
    let p = ModelParams { omega_b: 0.0, delta: 1.5, omega_a: 0.8, ..Default::default() };
    let l = internal_liouvillian(&p).unwrap();
    let rho = steady_state(&l).unwrap().value;
    let dark = [C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0), C64::new(-std::f64::consts::FRAC_1_SQRT_2, 0.0), ZERO];
    assert!(1.0 - rho.fidelity_with_pure(&dark).unwrap() < 1e-10);
}

#[test]
fn resonant_steady_state_is_the_dark_state() {
    let p15 = resonant(0.05, 15);
    let l15 = assemble_liouvillian(&p15).unwrap();
    let rho15 = steady_state(&l15).unwrap();
    assert!(rho15.warnings.is_empty());
    let rho15 = rho15.value;
    assert!(steady_state_residual(&l15, &rho15) <= 1e-10);
    let f = dark_state_fidelity(&p15, &rho15).unwrap();
    assert!(f >= 1.0 - 10.0 * p15.eta_b.powi(4), "1 - F = {}", 1.0 - f);

    let p20 = ModelParams { cutoff: 20, ..p15.clone() };
    let rho20 = steady_state(&assemble_liouvillian(&p20).unwrap()).unwrap().value;
    let (n15, n20) = (rho15.mean_phonons(0).unwrap(), rho20.mean_phonons(0).unwrap());
    assert!((n15 - n20).abs() < 1e-8, "{n15} vs {n20}");
}

#[test]
fn resonant_steady_state_scaling() {
    let mut logs = Vec::new();
    for eta_a in [0.02, 0.04, 0.08] {
        let p = resonant(eta_a, 15);
        let l = assemble_liouvillian(&p).unwrap();
        let rho = steady_state(&l).unwrap().value;
        assert!(steady_state_residual(&l, &rho) <= 1e-10);
        assert!(rho.population(Level::E) <= 1e-4);
        let n = rho.mean_phonons(0).unwrap();
        assert!(n > 0.0 && n < 2.0 * p.eta_b.powi(2), "eta_a = {eta_a}: {n}");
        logs.push((eta_a.ln(), n.ln()));
    }
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / 3.0;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / 3.0;
    let slope = logs.iter().map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / logs.iter().map(|(x, _)| (x - mx).powi(2)).sum::<f64>();
    assert!((1.7..=2.3).contains(&slope), "{slope}");
}

#[test]
fn no_pumping_means_no_unique_steady_state() {
    let p = ModelParams { omega_a: 0.0, cutoff: 4, ..Default::default() };
    match steady_state(&assemble_liouvillian(&p).unwrap()) {
        Err(Error::NonUniqueSteadyState { dimension }) => assert!(dimension > 1),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn zero_duration_returns_the_initial_state() {
    let p = ModelParams { cutoff: 5, ..Default::default() };
    let l = assemble_liouvillian(&p).unwrap();
    let rho0 = default_initial_state(l.space()).unwrap();
    let r = evolve(&l, &rho0, 0.0, 10).unwrap().value;
    assert_eq!(r.len(), 1);
    assert_eq!(r.times, vec![0.0]);
    assert_eq!(r.final_state.matrix(), rho0.matrix());
    assert!(matches!(evolve(&l, &rho0, -1.0, 10), Err(Error::Domain(_))));
}

#[test]
fn evolution_matches_the_generator_exponential() {
    let p = ModelParams { eta_a: 0.15, eta_b: 0.3, cutoff: 5, ..Default::default() };
    let l = assemble_liouvillian(&p).unwrap();
    let space = l.space().clone();
    let d = space.dim();
    let rho0 = DensityMatrix::internal_times_thermal(&space, Level::G1, &[1.0]).unwrap();
    let t = 6.0;
    let r = evolve(&l, &rho0, t, 4).unwrap().value;

    let step = expm((faer::Scale(C64::new(t / 3.0, 0.0)) * l.generator()).as_ref());
    let mut v = Mat::from_fn(d * d, 1, |k, _| rho0.matrix()[(k % d, k / d)]);
    let number = embed_mode_op(&space, 0, number_operator(p.cutoff).unwrap().as_ref()).unwrap();
    for k in 0..4 {
        let rho = Mat::from_fn(d, d, |i, j| v[(i + j * d, 0)]);
        let n: C64 =
            (0..d).flat_map(|i| (0..d).map(move |j| (i, j))).map(|(i, j)| number.matrix()[(i, j)] * rho[(j, i)]).sum();
        assert!((n.re - r.mean_n[k]).abs() < 1e-6, "sample {k}: {} vs {}", n.re, r.mean_n[k]);
        v = &step * &v;
    }
}

#[test]
fn long_time_limit_is_the_steady_state() {
    let p = resonant(0.05, 12);
    let w = cooling_rate_closed(&p);
    let l = assemble_liouvillian(&p).unwrap();
    let t_final = 50.0 / w / p.gamma;
    let rho0 = DensityMatrix::internal_times_thermal(l.space(), Level::G1, &[0.2]).unwrap();
    let r = evolve(&l, &rho0, t_final, 50).unwrap().value;
    let ss = steady_state(&l).unwrap().value;
    let (a, b) = (r.final_state.mean_phonons(0).unwrap(), ss.mean_phonons(0).unwrap());
    assert!((a - b).abs() < 1e-6, "{a} vs {b}");
}

#[test]
fn trajectory_invariants_hold_along_a_cooling_run() {
    let p = resonant(0.05, 12);
    let l = assemble_liouvillian(&p).unwrap();
    let rho0 = default_initial_state(l.space()).unwrap();
    let r = evolve(&l, &rho0, 200.0, 41).unwrap().value;
    for k in 0..r.len() {
        assert!(r.min_eigenvalue[k] >= -1e-8);
        assert!((r.trace[k] - 1.0).abs() <= 1e-8);
        let total: f64 = r.populations.iter().map(|p| p[k]).sum();
        assert!((total - 1.0).abs() <= 1e-8);
        assert!(r.mean_n[k] >= -1e-8);
    }
    let csv = r.to_csv();
    assert!(csv.starts_with("t,mean_n,pop_g1,pop_g2,pop_e,purity\n"));
    assert_eq!(csv.lines().count(), r.len() + 1);
}

#[test]
fn fitted_rate_tracks_the_closed_form() {
    let p = resonant(0.02, 12);
    let w = cooling_rate_closed(&p);
    let l = assemble_liouvillian(&p).unwrap();
    let rho0 = DensityMatrix::internal_times_thermal(l.space(), Level::G1, &[0.2]).unwrap();
    let r = evolve(&l, &rho0, 6.0 / w, 301).unwrap().value;
    let fit = fit_cooling_rate(&r, p.gamma).unwrap();
    // the recoil transient of the bright initial state outlasts 10/Γ, so NonMonotone may be attached
    assert!(!fit.warnings.iter().any(|w| matches!(w, Warning::PoorFit { .. })), "{:?}", fit.warnings);
    assert!((fit.value.w - w).abs() <= 0.15 * w, "{} vs {w}", fit.value.w);
}

#[test]
fn heating_run_is_reported_honestly() {
    // blue sideband on the narrow Fano peak
    let p =
        ModelParams { omega_b: 0.0, delta: -3.0, omega_a: 2f64.sqrt(), eta_a: 0.1, cutoff: 10, ..Default::default() };
    let l = assemble_liouvillian(&p).unwrap();
    let rho0 = DensityMatrix::internal_times_thermal(l.space(), Level::G1, &[0.3]).unwrap();
    let r = evolve(&l, &rho0, 400.0, 201).unwrap().value;
    assert!(r.mean_n.last().unwrap() > &r.mean_n[0]);
    let fit = fit_cooling_rate(&r, p.gamma).unwrap();
    let flagged = fit.warnings.iter().any(|w| matches!(w, Warning::PoorFit { .. } | Warning::NonMonotone { .. }));
    assert!(flagged || fit.value.amplitude < 0.0, "{fit:?}");
}

/// Continuous-time birth-death process with rates `(n+1)A₊` up and `nA₋` down.
fn gillespie(a_plus: f64, a_minus: f64, n0: usize, t_end: f64, rng: &mut ChaCha8Rng) -> usize {
    let (mut n, mut t) = (n0, 0.0);
    loop {
        let up = (n + 1) as f64 * a_plus;
        let down = n as f64 * a_minus;
        let total = up + down;
        t += -(1.0 - rng.random::<f64>()).ln() / total;
        if t > t_end {
            return n;
        }
        if rng.random::<f64>() * total < up {
            n += 1;
        } else {
            n -= 1;
        }
    }
}

#[test]
fn rate_equation_matches_birth_death_sampling() {
    let (a_plus, a_minus, t) = (0.3, 1.0, 1.2);
    let mut p0 = vec![0.0; 80];
    p0[2] = 1.0;
    let p = rate_equation_evolve(a_plus, a_minus, &p0, t).unwrap();
    assert!(p.warnings.is_empty());
    let p = p.value;
    assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-10);

    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let samples: Vec<usize> = (0..20_000).map(|_| gillespie(a_plus, a_minus, 2, t, &mut rng)).collect();
    let m = samples.len() as f64;
    for (level, &pl) in p.iter().enumerate().take(4) {
        let freq = samples.iter().filter(|&&n| n == level).count() as f64 / m;
        let sigma = (pl * (1.0 - pl) / m).sqrt();
        assert!((freq - pl).abs() <= 3.0 * sigma, "p_{level}: {freq} vs {pl}");
    }
    let mean = samples.iter().sum::<usize>() as f64 / m;
    let expected: f64 = p.iter().enumerate().map(|(n, p)| n as f64 * p).sum();
    let var: f64 = p.iter().enumerate().map(|(n, p)| (n as f64 - expected).powi(2) * p).sum();
    assert!((mean - expected).abs() <= 3.0 * (var / m).sqrt(), "{mean} vs {expected}");
}

#[test]
fn rate_equation_rejects_bad_input() {
    assert!(rate_equation_evolve(-0.1, 1.0, &[1.0], 1.0).is_err());
    assert!(rate_equation_evolve(0.1, 1.0, &[0.5, 0.4], 1.0).is_err());
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let p0: Vec<f64> = {
        let raw: Vec<f64> = (0..10).map(|_| rng.random::<f64>()).collect();
        let s: f64 = raw.iter().sum();
        raw.into_iter().map(|x| x / s).collect()
    };
    let p = rate_equation_evolve(0.0, 2.0, &p0, 30.0).unwrap().value;
    assert!((p[0] - 1.0).abs() < 1e-8);
}
