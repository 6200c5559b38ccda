//! Quantum-jump unravelling of the master equation, for one mode or a short chain of
//! up to a few modes sharing the same internal levels.
//!
//! Every trajectory draws from its own ChaCha stream `(seed, index)`, and ensembles are
//! reduced in index order, so results do not depend on how work is scheduled.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::effective_hamiltonian;
use crate::error::{Error, Result};
use crate::model::{
    h0_modes, h_eit_modes, h_ssh_modes, jump_channels_modes, CoolingSystem, JumpChannel, ModelParams, Modes,
    DEFAULT_RECOIL_POINTS,
};
use crate::ode::{Stepper, Tolerances};
use crate::quantum::{thermal_distribution, HilbertSpace, Level, Operator, SparseMatrix, C64, I, ZERO};

/// Bisection stops once the jump time is bracketed to this fraction of the step.
const JUMP_TIME_RESOLUTION: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrajectoryConfig {
    pub n_traj: usize,
    pub seed: u64,
    pub t_final: f64,
    pub n_samples: usize,
    /// Upper bound on a single integrator step.
    pub dt_max: f64,
    /// Internal level every trajectory starts in.
    pub initial_level: Level,
    /// Mean phonon number of the thermal distribution the initial Fock state is drawn from.
    pub initial_mean_n: f64,
    #[serde(skip)]
    pub tolerances: Tolerances,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        Self {
            n_traj: 100,
            seed: 0,
            t_final: 100.0,
            n_samples: 101,
            dt_max: 0.5,
            initial_level: Level::G1,
            initial_mean_n: 3.0,
            tolerances: Tolerances::default(),
        }
    }
}

impl TrajectoryConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_traj < 1 {
            return Err(Error::InvalidParams("n_traj must be at least 1".into()));
        }
        if !(self.t_final >= 0.0) || !self.t_final.is_finite() {
            return Err(Error::InvalidParams(format!("t_final must be non-negative, got {}", self.t_final)));
        }
        if self.n_samples < 2 && self.t_final > 0.0 {
            return Err(Error::InvalidParams("n_samples must be at least 2".into()));
        }
        if !(self.dt_max > 0.0) {
            return Err(Error::InvalidParams(format!("dt_max must be positive, got {}", self.dt_max)));
        }
        if !(self.initial_mean_n >= 0.0) || !self.initial_mean_n.is_finite() {
            return Err(Error::InvalidParams(format!(
                "initial_mean_n must be non-negative, got {}",
                self.initial_mean_n
            )));
        }
        Ok(())
    }

    pub fn sample_times(&self) -> Vec<f64> {
        if self.t_final == 0.0 {
            return vec![0.0];
        }
        let n = self.n_samples;
        (0..n).map(|k| self.t_final * k as f64 / (n - 1) as f64).collect()
    }
}

/// Several motional modes driven by the same lasers.
///
/// All modes share `base.cutoff` and the internal parameters of `base`; the per-mode
/// `nu`, `eta_a` and `eta_b` of `base` are ignored.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MultiModeParams {
    pub base: ModelParams,
    pub mode_freqs: Vec<f64>,
    pub eta_a_modes: Vec<f64>,
    pub eta_b_modes: Vec<f64>,
    pub target_mode: usize,
}

impl MultiModeParams {
    /// Sets `eta_b` of the target mode from `eta_a` so that its heating amplitude cancels.
    pub fn with_target_resonance(mut self) -> Result<Self> {
        self.validate()?;
        let m = self.target_mode;
        if !(self.base.omega_b > 0.0) {
            return Err(Error::NoPositiveSolution("resonance needs a positive omega_b".into()));
        }
        self.eta_b_modes[m] = self.eta_a_modes[m] * (self.mode_freqs[m] / self.base.omega_b + 2.0);
        Ok(self)
    }

    pub fn n_modes(&self) -> usize {
        self.mode_freqs.len()
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        let n = self.mode_freqs.len();
        if n == 0 {
            return Err(Error::InvalidParams("at least one mode is required".into()));
        }
        for len in [self.eta_a_modes.len(), self.eta_b_modes.len()] {
            if len != n {
                return Err(Error::DimensionMismatch { expected: n, found: len });
            }
        }
        if self.target_mode >= n {
            return Err(Error::InvalidParams(format!("target_mode {} out of range", self.target_mode)));
        }
        if self.mode_freqs.iter().any(|&f| !(f > 0.0) || !f.is_finite()) {
            return Err(Error::InvalidParams("mode frequencies must be positive".into()));
        }
        for (i, a) in self.mode_freqs.iter().enumerate() {
            if self.mode_freqs[i + 1..].contains(a) {
                return Err(Error::InvalidParams(format!("mode frequency {a} appears twice")));
            }
        }
        if self.eta_a_modes.iter().chain(&self.eta_b_modes).any(|e| !e.is_finite()) {
            return Err(Error::InvalidParams("Lamb-Dicke parameters must be finite".into()));
        }
        Ok(())
    }

    fn modes(&self) -> Modes<'_> {
        Modes { freqs: &self.mode_freqs, eta_a: &self.eta_a_modes, eta_b: &self.eta_b_modes }
    }
}

impl CoolingSystem for MultiModeParams {
    fn space(&self) -> Result<HilbertSpace> {
        self.validate()?;
        HilbertSpace::three_level(&vec![self.base.cutoff; self.n_modes()])
    }

    fn hamiltonian(&self) -> Result<Operator> {
        let space = CoolingSystem::space(self)?;
        let (b, order) = (&self.base, self.base.coupling_order);
        Ok(&(&h0_modes(&space, self.modes(), b.delta)? + &h_eit_modes(&space, self.modes(), b.omega_a, order)?)
            + &h_ssh_modes(&space, self.modes(), b.omega_b, order)?)
    }

    fn jump_channels(&self) -> Result<Vec<JumpChannel>> {
        let space = CoolingSystem::space(self)?;
        let b = &self.base;
        jump_channels_modes(
            &space,
            &self.eta_a_modes,
            b.gamma,
            [b.branch_g1, b.branch_g2],
            b.coupling_order,
            DEFAULT_RECOIL_POINTS,
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct JumpRecord {
    pub time: f64,
    pub channel: usize,
}

/// Observables of one trajectory at the configured sample times.
#[derive(Clone, Debug, Serialize)]
pub struct TrajectoryRecord {
    pub index: usize,
    pub times: Vec<f64>,
    /// `mean_n[mode][sample]`.
    pub mean_n: Vec<Vec<f64>>,
    /// `populations[level][sample]`.
    pub populations: [Vec<f64>; 3],
    /// Norm of the unnormalized state since the last jump.
    pub norm: Vec<f64>,
    pub jumps: Vec<JumpRecord>,
}

/// A system prepared for unravelling: sparse `−iH_eff`, decay operator and jump operators.
///
/// Between jumps the state is kept normalized and the survival probability is carried
/// separately as `s = ln‖ψ‖²`, obeying `ds/dt = −⟨φ|Σ r_k L_k†L_k|φ⟩`.
pub struct Unravelling {
    space: HilbertSpace,
    generator: SparseMatrix,
    decay: SparseMatrix,
    channels: Vec<(f64, SparseMatrix)>,
    levels: Vec<usize>,
    fock: Vec<Vec<usize>>,
}

impl Unravelling {
    pub fn new<S: CoolingSystem + ?Sized>(system: &S) -> Result<Self> {
        let space = system.space()?;
        let channels = system.jump_channels()?;
        let h = system.hamiltonian()?;
        let h_eff = effective_hamiltonian(&h, &channels)?;
        let decay = (&h_eff - &h).scale(I * 2.0).to_sparse();
        let (levels, fock) = (0..space.dim()).map(|i| space.decompose(i)).unzip();
        Ok(Self {
            generator: h_eff.scale(-I).to_sparse(),
            decay,
            channels: channels.iter().map(|ch| (ch.rate, ch.operator.to_sparse())).collect(),
            levels,
            fock,
            space,
        })
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    fn initial_state(&self, cfg: &TrajectoryConfig, rng: &mut ChaCha8Rng) -> Result<Vec<C64>> {
        let mut fock = Vec::with_capacity(self.space.n_modes());
        for &cutoff in self.space.mode_cutoffs() {
            let dist = thermal_distribution(cutoff, cfg.initial_mean_n)?;
            fock.push(sample_index(&dist, rng.random::<f64>()));
        }
        let mut psi = vec![ZERO; self.space.dim()];
        psi[self.space.index(cfg.initial_level.index(), &fock)] = C64::new(1.0, 0.0);
        Ok(psi)
    }

    fn record(&self, rec: &mut TrajectoryRecord, phi: &[C64], log_norm2: f64) {
        let mut pops = [0.0; 3];
        let mut n = vec![0.0; self.space.n_modes()];
        for (i, z) in phi.iter().enumerate() {
            let p = z.norm_sqr();
            pops[self.levels[i]] += p;
            for (acc, &k) in n.iter_mut().zip(&self.fock[i]) {
                *acc += k as f64 * p;
            }
        }
        for (series, v) in rec.populations.iter_mut().zip(pops) {
            series.push(v);
        }
        for (series, v) in rec.mean_n.iter_mut().zip(n) {
            series.push(v);
        }
        rec.norm.push((0.5 * log_norm2).exp());
    }

    /// Picks a channel with probability `∝ rate_k ‖L_k ψ‖²` and applies it.
    fn jump(&self, psi: &mut [C64], u: f64, scratch: &mut [C64]) -> Result<usize> {
        let weights: Vec<f64> = self
            .channels
            .iter()
            .map(|(rate, l)| {
                l.mul_vec_into(psi, scratch);
                rate * norm_sqr(scratch)
            })
            .collect();
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Numerical("jump requested from a state no channel can act on".into()));
        }
        let k = sample_index(&weights.iter().map(|w| w / total).collect::<Vec<_>>(), u);
        self.channels[k].1.mul_vec_into(psi, scratch);
        psi.copy_from_slice(scratch);
        normalize(psi);
        Ok(k)
    }

    /// Runs trajectory `index`; the stream `(cfg.seed, index)` determines it completely.
    pub fn run_trajectory(&self, cfg: &TrajectoryConfig, index: usize) -> Result<TrajectoryRecord> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(index as u64);
        let d = self.space.dim();
        // y = (φ, s) with the log survival probability in the last slot
        let mut y = self.initial_state(cfg, &mut rng)?;
        y.push(ZERO);
        let times = cfg.sample_times();
        let mut rec = TrajectoryRecord {
            index,
            times: times.clone(),
            mean_n: vec![Vec::with_capacity(times.len()); self.space.n_modes()],
            populations: std::array::from_fn(|_| Vec::with_capacity(times.len())),
            norm: Vec::with_capacity(times.len()),
            jumps: Vec::new(),
        };

        let mut decayed = vec![ZERO; d];
        let mut rhs = |_: f64, y: &[C64], dy: &mut [C64]| {
            let (phi, dphi) = (&y[..d], &mut dy[..d]);
            self.generator.mul_vec_into(phi, dphi);
            self.decay.mul_vec_into(phi, &mut decayed);
            let rate = phi.iter().zip(&decayed).map(|(a, b)| (a.conj() * b).re).sum::<f64>() / norm_sqr(phi);
            for (dp, p) in dphi.iter_mut().zip(phi) {
                *dp += *p * (0.5 * rate);
            }
            dy[d] = C64::new(-rate, 0.0);
        };
        let mut stepper = Stepper::new(d + 1, cfg.tolerances, cfg.dt_max.min(1e-2));
        let mut scratch = vec![ZERO; d + 1];
        let mut previous = vec![ZERO; d + 1];
        let mut log_threshold = rng.random::<f64>().ln();
        let mut t = 0.0;
        for &target in &times {
            while t < target {
                previous.copy_from_slice(&y);
                let t_start = t;
                let stop = target.min(t + cfg.dt_max);
                let h = stepper.advance(&mut rhs, &mut t, &mut y, stop, &mut scratch)?;
                normalize(&mut y[..d]);
                if y[d].re > log_threshold {
                    continue;
                }
                // bracket the threshold crossing inside the accepted step
                let (mut lo, mut hi) = (0.0, h);
                while hi - lo > JUMP_TIME_RESOLUTION * h {
                    let mid = 0.5 * (lo + hi);
                    stepper.trial_step(&mut rhs, t_start, &previous, mid, &mut scratch);
                    if scratch[d].re > log_threshold {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                if hi < h {
                    stepper.trial_step(&mut rhs, t_start, &previous, hi, &mut y);
                    t = t_start + hi;
                }
                let channel = self.jump(&mut y[..d], rng.random(), &mut scratch[..d])?;
                y[d] = ZERO;
                rec.jumps.push(JumpRecord { time: t, channel });
                log_threshold = rng.random::<f64>().ln();
            }
            self.record(&mut rec, &y[..d], y[d].re);
        }
        Ok(rec)
    }
}

fn normalize(psi: &mut [C64]) {
    let norm = norm_sqr(psi).sqrt();
    psi.iter_mut().for_each(|z| *z /= norm);
}

fn norm_sqr(psi: &[C64]) -> f64 {
    psi.iter().map(|z| z.norm_sqr()).sum()
}

/// Index `k` with `Σ_{j<k} p_j ≤ u < Σ_{j≤k} p_j`, clamped to the last index.
fn sample_index(p: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (k, &pk) in p.iter().enumerate() {
        acc += pk;
        if u < acc {
            return k;
        }
    }
    p.len() - 1
}

/// Convenience wrapper preparing `system` for a single trajectory.
pub fn run_trajectory<S: CoolingSystem + ?Sized>(
    system: &S,
    cfg: &TrajectoryConfig,
    index: usize,
) -> Result<TrajectoryRecord> {
    Unravelling::new(system)?.run_trajectory(cfg, index)
}

#[derive(Clone, Debug, Serialize)]
pub struct TrajectoryEnsemble {
    pub config: TrajectoryConfig,
    pub times: Vec<f64>,
    /// `mean_n[mode][sample]`.
    pub mean_n: Vec<Vec<f64>>,
    /// Standard errors `s/√n_traj` matching `mean_n`.
    pub stderr: Vec<Vec<f64>>,
    pub populations: [Vec<f64>; 3],
    /// `jump_counts[k]` trajectories had exactly `k` jumps.
    pub jump_counts: Vec<usize>,
}

impl TrajectoryEnsemble {
    pub fn n_modes(&self) -> usize {
        self.mean_n.len()
    }

    /// Columns `t, mean_n_mode_m, stderr_mode_m …, pop_g1, pop_g2, pop_e`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t");
        for m in 0..self.n_modes() {
            s.push_str(&format!(",mean_n_mode_{m},stderr_mode_{m}"));
        }
        s.push_str(",pop_g1,pop_g2,pop_e\n");
        for (k, t) in self.times.iter().enumerate() {
            s.push_str(&t.to_string());
            for m in 0..self.n_modes() {
                s.push_str(&format!(",{},{}", self.mean_n[m][k], self.stderr[m][k]));
            }
            for pop in &self.populations {
                s.push_str(&format!(",{}", pop[k]));
            }
            s.push('\n');
        }
        s
    }

    /// Configuration, final per-mode means and the jump histogram.
    pub fn summary_json(&self) -> serde_json::Value {
        let last = |v: &Vec<f64>| v.last().copied().unwrap_or(f64::NAN);
        serde_json::json!({
            "config": self.config,
            "final_mean_n": self.mean_n.iter().map(last).collect::<Vec<_>>(),
            "final_stderr": self.stderr.iter().map(last).collect::<Vec<_>>(),
            "final_populations": self.populations.iter().map(last).collect::<Vec<_>>(),
            "jump_counts": self.jump_counts,
        })
    }
}

/// Mean and standard error over the records, accumulated in index order.
pub fn reduce(config: &TrajectoryConfig, records: &[TrajectoryRecord]) -> Result<TrajectoryEnsemble> {
    let first = records.first().ok_or_else(|| Error::InvalidParams("no trajectories to reduce".into()))?;
    let (n_modes, n_samples) = (first.mean_n.len(), first.times.len());
    let n = records.len() as f64;
    let mut sum = vec![vec![0.0; n_samples]; n_modes];
    let mut sum_sq = vec![vec![0.0; n_samples]; n_modes];
    let mut pops: [Vec<f64>; 3] = std::array::from_fn(|_| vec![0.0; n_samples]);
    let mut jump_counts = Vec::new();
    for rec in records {
        for m in 0..n_modes {
            for k in 0..n_samples {
                let v = rec.mean_n[m][k];
                sum[m][k] += v;
                sum_sq[m][k] += v * v;
            }
        }
        for (acc, series) in pops.iter_mut().zip(&rec.populations) {
            for (a, v) in acc.iter_mut().zip(series) {
                *a += v;
            }
        }
        if jump_counts.len() <= rec.jumps.len() {
            jump_counts.resize(rec.jumps.len() + 1, 0);
        }
        jump_counts[rec.jumps.len()] += 1;
    }
    let mean: Vec<Vec<f64>> = sum.iter().map(|s| s.iter().map(|v| v / n).collect()).collect();
    let stderr = mean
        .iter()
        .zip(&sum_sq)
        .map(|(mu, sq)| {
            mu.iter()
                .zip(sq)
                .map(|(m, s)| {
                    if records.len() < 2 {
                        0.0
                    } else {
                        let var = ((s - n * m * m) / (n - 1.0)).max(0.0);
                        (var / n).sqrt()
                    }
                })
                .collect()
        })
        .collect();
    for p in &mut pops {
        p.iter_mut().for_each(|v| *v /= n);
    }
    Ok(TrajectoryEnsemble {
        config: config.clone(),
        times: first.times.clone(),
        mean_n: mean,
        stderr,
        populations: pops,
        jump_counts,
    })
}

/// Runs `cfg.n_traj` trajectories in parallel and averages them.
pub fn ensemble_average<S: CoolingSystem + ?Sized>(system: &S, cfg: &TrajectoryConfig) -> Result<TrajectoryEnsemble> {
    cfg.validate()?;
    let prepared = Unravelling::new(system)?;
    let records =
        (0..cfg.n_traj).into_par_iter().map(|i| prepared.run_trajectory(cfg, i)).collect::<Result<Vec<_>>>()?;
    reduce(cfg, &records)
}
