//! Lindblad dynamics on the truncated space: generator assembly, steady state,
//! time evolution and cooling-rate extraction.
//!
//! Density matrices are vectorized by stacking columns, so `vec(AXB) = (Bᵀ ⊗ A) vec(X)`.

use faer::prelude::*;
use faer::{Mat, MatRef};
use serde::Serialize;

use crate::error::{Assessed, Error, Result, Warning};
use crate::model::{
    first_order_dark_state, h0_modes, h_eit_modes, h_ssh_modes, jump_channels_modes, CoolingSystem, CouplingOrder,
    JumpChannel, ModelParams, Modes,
};
use crate::ode::{self, Tolerances};
use crate::quantum::{
    c, hermitian_part, DensityMatrix, HilbertSpace, Level, Operator, SparseMatrix, C64, I, ONE, ZERO,
};

/// Largest Hilbert-space dimension for which the dense generator is assembled.
pub const LIOUVILLIAN_MAX_DIM: usize = 72;

/// Pivot ratio below which the trace-constrained system is treated as rank deficient.
const PIVOT_RATIO: f64 = 1e-13;
const NULLITY_TOL: f64 = 1e-11;

pub struct Liouvillian {
    generator: Mat<C64>,
    space: HilbertSpace,
    params: Option<ModelParams>,
    h_eff: SparseMatrix,
    jumps: Vec<(f64, SparseMatrix)>,
}

impl std::fmt::Debug for Liouvillian {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Liouvillian")
            .field("space", &self.space)
            .field("params", &self.params)
            .field("channels", &self.jumps.len())
            .finish_non_exhaustive()
    }
}

/// `H − (i/2) Σ_k r_k L_k†L_k`.
pub(crate) fn effective_hamiltonian(h: &Operator, channels: &[JumpChannel]) -> Result<Operator> {
    let mut decay = Operator::zeros(h.space());
    for ch in channels {
        decay = &decay + &(&ch.operator.adjoint() * &ch.operator)?.scale(c(ch.rate));
    }
    Ok(h - &decay.scale(I * 0.5))
}

impl Liouvillian {
    /// Assembles `−i[H, ρ] + Σ_k r_k (L_k ρ L_k† − ½{L_k†L_k, ρ})`.
    pub fn from_parts(h: &Operator, channels: &[JumpChannel], params: Option<ModelParams>) -> Result<Self> {
        let space = h.space().clone();
        let d = space.dim();
        if d > LIOUVILLIAN_MAX_DIM {
            return Err(Error::Resource(format!(
                "Liouvillian of a {d}-dimensional space exceeds the dense limit {LIOUVILLIAN_MAX_DIM}"
            )));
        }
        if let Some(ch) = channels.iter().find(|ch| ch.rate < 0.0 || !ch.rate.is_finite()) {
            return Err(Error::InvalidParams(format!("jump rate {} is invalid", ch.rate)));
        }
        let h_eff = effective_hamiltonian(h, channels)?;
        let he = h_eff.matrix();
        let mut gen = Mat::<C64>::zeros(d * d, d * d);
        for q in 0..d {
            for p in 0..d {
                // ρ H_eff† contributes (conj(H_eff) ⊗ 1) scaled by i
                let right = I * he[(p, q)].conj();
                if right != ZERO {
                    for i in 0..d {
                        gen[(p * d + i, q * d + i)] += right;
                    }
                }
            }
        }
        for k in 0..d {
            for i in 0..d {
                let left = -I * he[(i, k)];
                if left != ZERO {
                    for p in 0..d {
                        gen[(p * d + i, p * d + k)] += left;
                    }
                }
            }
        }
        for ch in channels {
            let l = ch.operator.matrix();
            let nz: Vec<(usize, usize, C64)> = (0..d)
                .flat_map(|j| (0..d).map(move |i| (i, j)))
                .map(|(i, j)| (i, j, l[(i, j)]))
                .filter(|&(_, _, v)| v != ZERO)
                .collect();
            for &(p, q, lpq) in &nz {
                let outer = lpq.conj() * ch.rate;
                for &(i, k, lik) in &nz {
                    gen[(p * d + i, q * d + k)] += outer * lik;
                }
            }
        }
        let jumps = channels.iter().map(|ch| (ch.rate, ch.operator.to_sparse())).collect();
        Ok(Self { generator: gen, space, params, h_eff: h_eff.to_sparse(), jumps })
    }

    pub fn from_system<S: CoolingSystem + ?Sized>(system: &S) -> Result<Self> {
        Self::from_parts(&system.hamiltonian()?, &system.jump_channels()?, None)
    }

    pub fn generator(&self) -> MatRef<'_, C64> {
        self.generator.as_ref()
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    pub fn params(&self) -> Option<&ModelParams> {
        self.params.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    /// Largest modulus of `vec(1)ᵀ 𝓛`, which vanishes for a trace-preserving generator.
    pub fn trace_residual(&self) -> f64 {
        let d = self.dim();
        (0..d * d).map(|col| (0..d).map(|i| self.generator[(i * d + i, col)]).sum::<C64>().norm()).fold(0.0, f64::max)
    }

    /// `𝓛(ρ)` as a matrix.
    pub fn apply(&self, rho: MatRef<'_, C64>) -> Mat<C64> {
        let d = self.dim();
        let v = vectorize(rho);
        let out = &self.generator * &v;
        unvectorize(out.as_ref(), d)
    }

    /// Writes `dρ/dt` for the column-major flattened `rho` into `out`, using the sparse
    /// operators; `rho` is assumed Hermitian.
    pub(crate) fn rhs(&self, rho: &[C64], out: &mut [C64], work: &mut RhsWork) {
        let d = self.dim();
        self.h_eff.mul_dense_into(rho, &mut work.k, d);
        for j in 0..d {
            for i in 0..d {
                out[i + j * d] = -I * work.k[i + j * d] + I * work.k[j + i * d].conj();
            }
        }
        for (rate, l) in &self.jumps {
            l.mul_dense_into(rho, &mut work.k, d);
            for j in 0..d {
                for i in 0..d {
                    work.kt[i + j * d] = work.k[j + i * d].conj();
                }
            }
            l.mul_dense_into(&work.kt, &mut work.k, d);
            for (o, v) in out.iter_mut().zip(&work.k) {
                *o += *v * *rate;
            }
        }
    }
}

pub(crate) struct RhsWork {
    k: Vec<C64>,
    kt: Vec<C64>,
}

impl RhsWork {
    pub(crate) fn new(d: usize) -> Self {
        Self { k: vec![ZERO; d * d], kt: vec![ZERO; d * d] }
    }
}

pub fn assemble_liouvillian(p: &ModelParams) -> Result<Liouvillian> {
    p.validate()?;
    Liouvillian::from_parts(&p.hamiltonian()?, &p.jump_channels()?, Some(p.clone()))
}

/// Liouvillian of the internal three-level system alone (all Lamb-Dicke parameters zero).
pub fn internal_liouvillian(p: &ModelParams) -> Result<Liouvillian> {
    p.validate()?;
    let space = HilbertSpace::three_level(&[])?;
    let modes = Modes { freqs: &[], eta_a: &[], eta_b: &[] };
    let order = CouplingOrder::FirstOrder;
    let h = &(&h0_modes(&space, modes, p.delta)? + &h_eit_modes(&space, modes, p.omega_a, order)?)
        + &h_ssh_modes(&space, modes, p.omega_b, order)?;
    let channels = jump_channels_modes(&space, &[], p.gamma, [p.branch_g1, p.branch_g2], order, 1)?;
    Liouvillian::from_parts(&h, &channels, None)
}

pub(crate) fn vectorize(m: MatRef<'_, C64>) -> Mat<C64> {
    let d = m.nrows();
    Mat::from_fn(d * d, 1, |k, _| m[(k % d, k / d)])
}

pub(crate) fn unvectorize(v: MatRef<'_, C64>, d: usize) -> Mat<C64> {
    Mat::from_fn(d, d, |i, j| v[(i + j * d, 0)])
}

/// Number of (numerically) zero pivots of a full-pivot LU of the generator.
fn nullity(gen: MatRef<'_, C64>) -> usize {
    let lu = gen.full_piv_lu();
    let u = lu.U();
    let n = u.nrows().min(u.ncols());
    let max = (0..n).map(|i| u[(i, i)].norm()).fold(0.0, f64::max);
    (0..n).filter(|&i| u[(i, i)].norm() <= NULLITY_TOL * max).count()
}

/// Stationary state of `l`, found by replacing one equation with the trace condition.
pub fn steady_state(l: &Liouvillian) -> Result<Assessed<DensityMatrix>> {
    let d = l.dim();
    let n = d * d;
    let mut a = l.generator.clone();
    for col in 0..n {
        a[(0, col)] = ZERO;
    }
    for i in 0..d {
        a[(0, i + i * d)] = ONE;
    }
    let mut rhs = Mat::<C64>::zeros(n, 1);
    rhs[(0, 0)] = ONE;
    let lu = a.partial_piv_lu();
    let u = lu.U();
    let pivots: Vec<f64> = (0..n).map(|i| u[(i, i)].norm()).collect();
    let max = pivots.iter().copied().fold(0.0, f64::max);
    let min = pivots.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min > PIVOT_RATIO * max) {
        let dimension = nullity(l.generator());
        return Err(if dimension > 1 {
            Error::NonUniqueSteadyState { dimension }
        } else {
            Error::Singular(format!("trace-constrained generator has pivot ratio {:e}", min / max))
        });
    }
    let mut x = lu.solve(&rhs);
    let r = &rhs - &a * &x;
    x = &x + lu.solve(&r);

    let rho = hermitian_part(unvectorize(x.as_ref(), d).as_ref());
    let tr: C64 = (0..d).map(|i| rho[(i, i)]).sum();
    let rho = faer::Scale(ONE / tr) * &rho;
    let residual = max_abs(l.apply(rho.as_ref()).as_ref());
    if residual > 1e-9 {
        return Err(Error::Numerical(format!("steady-state residual {residual:e} is too large")));
    }
    let rho = DensityMatrix::from_matrix_unchecked(l.space.clone(), rho)?;
    rho.validate()?;
    let warnings = rho.tail_warnings();
    Ok(Assessed::new(rho, warnings))
}

fn max_abs(m: MatRef<'_, C64>) -> f64 {
    let mut best = 0.0_f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            best = best.max(m[(i, j)].norm());
        }
    }
    best
}

/// `max ‖𝓛(ρ)‖` entrywise.
pub fn steady_state_residual(l: &Liouvillian, rho: &DensityMatrix) -> f64 {
    max_abs(l.apply(rho.matrix()).as_ref())
}

/// `⟨ψ|ρ|ψ⟩` with the normalized first-order dark state of `p`.
pub fn dark_state_fidelity(p: &ModelParams, rho: &DensityMatrix) -> Result<f64> {
    rho.fidelity_with_pure(&first_order_dark_state(p)?)
}

/// Default cooling initial state `|g1⟩⟨g1| ⊗ thermal(⟨n⟩ = 3)`.
pub fn default_initial_state(space: &HilbertSpace) -> Result<DensityMatrix> {
    DensityMatrix::internal_times_thermal(space, Level::G1, &vec![3.0; space.n_modes()])
}

#[derive(Clone, Debug, Serialize)]
pub struct EvolutionResult {
    pub times: Vec<f64>,
    /// Mean phonon number of mode 0.
    pub mean_n: Vec<f64>,
    /// `populations[level][sample]` in the order `(g1, g2, e)`.
    pub populations: [Vec<f64>; 3],
    pub purity: Vec<f64>,
    pub trace: Vec<f64>,
    pub min_eigenvalue: Vec<f64>,
    #[serde(skip)]
    pub final_state: DensityMatrix,
}

impl EvolutionResult {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// CSV with columns `t, mean_n, pop_g1, pop_g2, pop_e, purity`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,mean_n,pop_g1,pop_g2,pop_e,purity\n");
        for k in 0..self.len() {
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                self.times[k],
                self.mean_n[k],
                self.populations[0][k],
                self.populations[1][k],
                self.populations[2][k],
                self.purity[k]
            ));
        }
        s
    }
}

/// Propagates `rho0` to `t_final`, sampling at `n_samples` uniformly spaced times
/// including both end points.
pub fn evolve(
    l: &Liouvillian,
    rho0: &DensityMatrix,
    t_final: f64,
    n_samples: usize,
) -> Result<Assessed<EvolutionResult>> {
    evolve_with(l, rho0, t_final, n_samples, Tolerances::default())
}

pub fn evolve_with(
    l: &Liouvillian,
    rho0: &DensityMatrix,
    t_final: f64,
    n_samples: usize,
    tol: Tolerances,
) -> Result<Assessed<EvolutionResult>> {
    if !(t_final >= 0.0) || !t_final.is_finite() {
        return Err(Error::Domain(format!("t_final must be non-negative, got {t_final}")));
    }
    if rho0.space() != l.space() {
        return Err(Error::DimensionMismatch { expected: l.dim(), found: rho0.dim() });
    }
    let d = l.dim();
    let times: Vec<f64> = if t_final == 0.0 || n_samples < 2 {
        vec![0.0]
    } else {
        (0..n_samples).map(|k| t_final * k as f64 / (n_samples - 1) as f64).collect()
    };
    if t_final > 0.0 && n_samples < 2 {
        return Err(Error::Domain("at least two samples are needed for a non-zero t_final".into()));
    }
    let y0: Vec<C64> = (0..d * d).map(|k| rho0.matrix()[(k % d, k / d)]).collect();

    let mut samples: Vec<Mat<C64>> = Vec::with_capacity(times.len());
    let mut work = RhsWork::new(d);
    ode::integrate(
        |_, y: &[C64], dy: &mut [C64]| l.rhs(y, dy, &mut work),
        y0,
        &times,
        tol,
        |_, _, y| samples.push(Mat::from_fn(d, d, |i, j| y[i + j * d])),
    )?;

    let n = samples.len();
    let mut result = EvolutionResult {
        times,
        mean_n: Vec::with_capacity(n),
        populations: [Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n)],
        purity: Vec::with_capacity(n),
        trace: Vec::with_capacity(n),
        min_eigenvalue: Vec::with_capacity(n),
        final_state: rho0.clone(),
    };
    for m in samples {
        let rho = DensityMatrix::from_matrix_unchecked(l.space.clone(), hermitian_part(m.as_ref()))?;
        result.mean_n.push(rho.mean_phonons(0)?);
        for (lvl, pop) in rho.populations().into_iter().enumerate().take(3) {
            result.populations[lvl].push(pop);
        }
        result.purity.push(rho.purity());
        result.trace.push(rho.trace().re);
        result.min_eigenvalue.push(rho.min_eigenvalue()?);
        result.final_state = rho;
    }
    let warnings = result.final_state.tail_warnings();
    Ok(Assessed::new(result, warnings))
}

/// Result of fitting `⟨n⟩(t) = n_ss + (n_0 − n_ss) e^{−W t}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoolingFit {
    pub w: f64,
    pub n_ss: f64,
    pub amplitude: f64,
    /// RMS residual divided by `|amplitude|`.
    pub relative_residual: f64,
    pub window_start: f64,
}

/// Fits an exponential to the mean phonon number after the internal relaxation time `10/Γ`.
pub fn fit_cooling_rate(result: &EvolutionResult, gamma: f64) -> Result<Assessed<CoolingFit>> {
    if !(gamma > 0.0) {
        return Err(Error::Domain(format!("linewidth must be positive, got {gamma}")));
    }
    fit_exponential(&result.times, &result.mean_n, 10.0 / gamma)
}

/// Least-squares fit of `a + b e^{−W t}` to the samples with `t ≥ window_start`.
pub fn fit_exponential(times: &[f64], values: &[f64], window_start: f64) -> Result<Assessed<CoolingFit>> {
    if times.len() != values.len() {
        return Err(Error::DimensionMismatch { expected: times.len(), found: values.len() });
    }
    let (t, y): (Vec<f64>, Vec<f64>) =
        times.iter().zip(values).filter(|(t, _)| **t >= window_start).map(|(t, y)| (*t, *y)).unzip();
    if t.len() < 4 {
        return Err(Error::FitWindow(format!(
            "only {} samples after t = {window_start}; at least 4 are required",
            t.len()
        )));
    }
    let mut warnings = Vec::new();
    let scale = y.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let rising = y.windows(2).any(|w| w[1] > w[0] + 1e-9 * scale);
    let falling = y.windows(2).any(|w| w[1] < w[0] - 1e-9 * scale);
    if rising && falling {
        warnings.push(Warning::NonMonotone { window_start }.emit());
    }

    let t0 = t[0];
    let span = t[t.len() - 1] - t0;
    if !(span > 0.0) {
        return Err(Error::FitWindow("fit window has zero length".into()));
    }
    let tau: Vec<f64> = t.iter().map(|x| x - t0).collect();
    let cost = |w: f64| linear_part(&tau, &y, w).2;

    // coarse logarithmic scan, then Brent refinement in ln W
    let (lo, hi) = ((1e-4 / span).ln(), (1e4 / span).ln());
    let n_grid = 241;
    let grid: Vec<f64> = (0..n_grid).map(|k| lo + (hi - lo) * k as f64 / (n_grid - 1) as f64).collect();
    let costs: Vec<f64> = grid.iter().map(|&s| cost(s.exp())).collect();
    let best = (0..n_grid).min_by(|&a, &b| costs[a].total_cmp(&costs[b])).unwrap_or(0);
    let a = grid[best.saturating_sub(1)];
    let b = grid[(best + 1).min(n_grid - 1)];
    let s = brent_minimize(|s| cost(s.exp()), a, b, 1e-13);
    let mut w = s.exp();
    let (mut a0, mut b0, _) = linear_part(&tau, &y, w);
    (a0, b0, w) = gauss_newton(&tau, &y, a0, b0, w);

    let sse = residual_sum(&tau, &y, a0, b0, w);
    let rms = (sse / tau.len() as f64).sqrt();
    let relative_residual = if b0 != 0.0 { rms / b0.abs() } else { f64::INFINITY };
    if relative_residual > 0.1 {
        warnings.push(Warning::PoorFit { relative_residual }.emit());
    }
    // express the amplitude relative to the start of the window
    let fit = CoolingFit { w, n_ss: a0, amplitude: b0 * (w * t0).exp(), relative_residual, window_start };
    Ok(Assessed::new(fit, warnings))
}

fn residual_sum(t: &[f64], y: &[f64], a: f64, b: f64, w: f64) -> f64 {
    t.iter().zip(y).map(|(t, y)| (y - a - b * (-w * t).exp()).powi(2)).sum()
}

/// Optimal `(a, b)` for fixed `W` and the resulting sum of squared residuals.
fn linear_part(t: &[f64], y: &[f64], w: f64) -> (f64, f64, f64) {
    let n = t.len() as f64;
    let (mut se, mut see, mut sy, mut sey) = (0.0, 0.0, 0.0, 0.0);
    for (t, y) in t.iter().zip(y) {
        let e = (-w * t).exp();
        se += e;
        see += e * e;
        sy += y;
        sey += e * y;
    }
    let det = n * see - se * se;
    if det.abs() <= 1e-300 {
        let a = sy / n;
        return (a, 0.0, residual_sum(t, y, a, 0.0, w));
    }
    let a = (see * sy - se * sey) / det;
    let b = (n * sey - se * sy) / det;
    (a, b, residual_sum(t, y, a, b, w))
}

fn gauss_newton(t: &[f64], y: &[f64], mut a: f64, mut b: f64, mut w: f64) -> (f64, f64, f64) {
    let mut sse = residual_sum(t, y, a, b, w);
    for _ in 0..20 {
        let mut jtj = Mat::<f64>::zeros(3, 3);
        let mut jtr = Mat::<f64>::zeros(3, 1);
        for (t, y) in t.iter().zip(y) {
            let e = (-w * t).exp();
            let r = y - a - b * e;
            let j = [1.0, e, -b * t * e];
            for p in 0..3 {
                jtr[(p, 0)] += j[p] * r;
                for q in 0..3 {
                    jtj[(p, q)] += j[p] * j[q];
                }
            }
        }
        let delta = jtj.partial_piv_lu().solve(&jtr);
        let (na, nb, nw) = (a + delta[(0, 0)], b + delta[(1, 0)], w + delta[(2, 0)]);
        if !(nw > 0.0) {
            break;
        }
        let new_sse = residual_sum(t, y, na, nb, nw);
        if !(new_sse <= sse) {
            break;
        }
        let converged = (nw - w).abs() <= 1e-15 * w;
        (a, b, w, sse) = (na, nb, nw, new_sse);
        if converged {
            break;
        }
    }
    (a, b, w)
}

/// Brent's method for a minimum of `f` on `[a, b]`.
pub(crate) fn brent_minimize<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    const GOLD: f64 = 0.381_966_011_250_105_1;
    let mut x = a + GOLD * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = f(x);
    let (mut fw, mut fv) = (fx, fx);
    let (mut d, mut e) = (0.0_f64, 0.0_f64);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        let tol1 = tol * x.abs() + 1e-15;
        let tol2 = 2.0 * tol1;
        if (x - m).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            if p.abs() < (0.5 * q * e).abs() && p > q * (a - x) && p < q * (b - x) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if x < m { tol1 } else { -tol1 };
                }
                golden = false;
            }
        }
        if golden {
            e = if x < m { b - x } else { a - x };
            d = GOLD * e;
        }
        let u = if d.abs() >= tol1 { x + d } else { x + tol1.copysign(d) };
        let fu = f(u);
        if fu <= fx {
            if u < x {
                b = x;
            } else {
                a = x;
            }
            (v, fv, w, fw, x, fx) = (w, fw, x, fx, u, fu);
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                (v, fv, w, fw) = (w, fw, u, fu);
            } else if fu <= fv || v == x || v == w {
                (v, fv) = (u, fu);
            }
        }
    }
    x
}

/// Integrates the phonon birth-death rate equation from `p0` for a time `t`.
///
/// The top level of `p0` reflects, so probability is conserved exactly.
pub fn rate_equation_evolve(a_plus: f64, a_minus: f64, p0: &[f64], t: f64) -> Result<Assessed<Vec<f64>>> {
    if !(a_plus >= 0.0) || !(a_minus >= 0.0) {
        return Err(Error::Domain(format!("rates must be non-negative, got A+ = {a_plus}, A- = {a_minus}")));
    }
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("time must be non-negative, got {t}")));
    }
    let total: f64 = p0.iter().sum();
    if p0.is_empty() || (total - 1.0).abs() > 1e-10 || p0.iter().any(|&p| p < 0.0) {
        return Err(Error::Domain("initial distribution must be normalized and non-negative".into()));
    }
    let mut warnings = Vec::new();
    if a_plus >= a_minus {
        warnings.push(Warning::Heating { a_plus, a_minus }.emit());
    }
    let n = p0.len();
    let rhs = |_: f64, p: &[f64], dp: &mut [f64]| {
        dp.iter_mut().for_each(|x| *x = 0.0);
        for k in 0..n - 1 {
            let m = (k + 1) as f64;
            let flux = m * (a_plus * p[k] - a_minus * p[k + 1]);
            dp[k] -= flux;
            dp[k + 1] += flux;
        }
    };
    let tol = Tolerances { rtol: 1e-10, atol: 1e-13 };
    let p = ode::integrate(rhs, p0.to_vec(), &[0.0, t], tol, |_, _, _| {})?;
    Ok(Assessed::new(p, warnings))
}

/// `⟨n⟩ = A₊/(A₋ − A₊)` of the stationary rate-equation distribution, `None` when heating.
pub fn rate_equation_mean(a_plus: f64, a_minus: f64) -> Option<f64> {
    (a_minus > a_plus).then(|| a_plus / (a_minus - a_plus))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_exponential_is_recovered() {
        let times: Vec<f64> = (0..400).map(|k| k as f64 * 2.5).collect();
        let y: Vec<f64> = times.iter().map(|t| 0.01 + 2.9 * (-0.00731 * t).exp()).collect();
        let fit = fit_exponential(&times, &y, 10.0).unwrap();
        assert!(fit.warnings.is_empty());
        assert!((fit.value.w - 0.00731).abs() < 1e-9 * 0.00731);
        assert!((fit.value.n_ss - 0.01).abs() < 1e-9);
    }

    #[test]
    fn short_window_is_rejected() {
        let r = fit_exponential(&[0.0, 1.0, 2.0], &[1.0, 0.5, 0.2], 0.0);
        assert!(matches!(r, Err(Error::FitWindow(_))));
    }

    #[test]
    fn brent_finds_parabola_minimum() {
        let x = brent_minimize(|x| (x - 0.3).powi(2) + 1.0, -2.0, 5.0, 1e-12);
        assert!((x - 0.3).abs() < 1e-8);
    }

    #[test]
    fn rate_equation_fixed_points() {
        let mut p0 = vec![0.0; 60];
        p0[3] = 1.0;
        let p = rate_equation_evolve(0.0, 1.0, &p0, 40.0).unwrap().value;
        assert!((p[0] - 1.0).abs() < 1e-8);
        let p = rate_equation_evolve(0.5, 1.0, &p0, 200.0).unwrap().value;
        let mean: f64 = p.iter().enumerate().map(|(n, p)| n as f64 * p).sum();
        assert!((mean - 1.0).abs() < 1e-6, "{mean}");
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        assert_eq!(rate_equation_mean(0.5, 1.0), Some(1.0));
        let heated = rate_equation_evolve(1.0, 1.0, &p0, 1.0).unwrap();
        assert!(matches!(heated.warnings[0], Warning::Heating { .. }));
    }
}
