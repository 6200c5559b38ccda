//! Closed-form heating and cooling rates and the numerical fluctuation spectrum.
//!
//! The phonon rate equation has coefficients `A± = 2 Re[D + S(∓ν)]`, where `S` is the
//! spectrum of the force operator multiplying `x̂`, evaluated from the η = 0 internal
//! dynamics. The closed forms below are written for the detuning convention of
//! [`crate::model`]; a printed detuning of the opposite sign maps to `-delta`.

use faer::prelude::*;
use faer::Mat;
use serde::Serialize;

use crate::dynamics::{internal_liouvillian, steady_state, unvectorize, vectorize, Liouvillian};
use crate::error::{Assessed, Error, Result, Warning};
use crate::model::ModelParams;
use crate::quantum::{c, sigma_y, trace_product, HilbertSpace, Level, Operator, C64, I};

/// Second moment of the projected recoil direction, `½∫₋₁¹ u² du`.
pub const RECOIL_SECOND_MOMENT: f64 = 1.0 / 3.0;

/// `Ω_B = ν/(η_B/η_A − 2)`, the Stark-shift drive that cancels heating for a given ratio.
pub fn resonance_condition(eta_ratio: f64, nu: f64) -> Result<f64> {
    if !(eta_ratio > 2.0) {
        return Err(Error::NoPositiveSolution(format!(
            "eta_b/eta_a = {eta_ratio} must exceed 2 for a positive omega_b"
        )));
    }
    Ok(nu / (eta_ratio - 2.0))
}

/// `η_B/η_A = ν/Ω_B + 2`.
pub fn resonance_ratio(omega_b: f64, nu: f64) -> Result<f64> {
    if !(omega_b > 0.0) {
        return Err(Error::Domain(format!("omega_b must be positive, got {omega_b}")));
    }
    Ok(nu / omega_b + 2.0)
}

/// Copy of `p` with `η_B` set so the heating amplitudes cancel.
pub fn with_resonant_eta_b(p: &ModelParams) -> Result<ModelParams> {
    Ok(ModelParams { eta_b: p.eta_a * resonance_ratio(p.omega_b, p.nu)?, ..p.clone() })
}

/// Copy of `p` with `Ω_B` set from the current `η_B/η_A`.
pub fn with_resonant_omega_b(p: &ModelParams) -> Result<ModelParams> {
    if !(p.eta_a > 0.0) {
        return Err(Error::Domain("eta_a must be positive to form eta_b/eta_a".into()));
    }
    Ok(ModelParams { omega_b: resonance_condition(p.eta_b / p.eta_a, p.nu)?, ..p.clone() })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateCoefficients {
    pub a_plus_eit: f64,
    pub a_plus_ssh: f64,
    pub a_plus_int: f64,
    pub a_plus: f64,
    pub a_minus: f64,
    #[serde(rename = "D")]
    pub d: f64,
    #[serde(rename = "curly_D")]
    pub curly_d: f64,
    #[serde(rename = "W")]
    pub w: f64,
    /// `A₊/(A₋ − A₊)`; infinite when heating dominates.
    pub n_final: f64,
}

/// Heating rate coefficients `A₊` split into EIT, Stark-shift and interference parts,
/// together with `A₋`, `W` and the final occupation.
pub fn heating_components(p: &ModelParams) -> Result<Assessed<RateCoefficients>> {
    p.validate()?;
    let mut warnings = Vec::new();
    if let Some(w) = p.validity_warning() {
        warnings.push(w.emit());
    }
    let (nu, g, oa, ob) = (p.nu, p.gamma, p.omega_a, p.omega_b);
    let dp = -p.delta;
    let blue = nu + 2.0 * ob;
    let denom = g * g * blue * blue + (-2.0 * oa * oa + blue * (dp + nu + ob)).powi(2);
    if denom == 0.0 {
        return Err(Error::Degenerate(
            "the heating denominator vanishes (omega_a = 0 on the sideband resonance)".into(),
        ));
    }
    let inv_curly_d = 2.0 * oa * oa * g / denom;
    let eit = p.eta_a * blue;
    let ssh = p.eta_b * ob;
    let a_plus_eit = eit * eit * inv_curly_d;
    let a_plus_ssh = ssh * ssh * inv_curly_d;
    let a_plus_int = -2.0 * eit * ssh * inv_curly_d;
    let d = diffusion(p)?;

    let red = nu - 2.0 * ob;
    let denom_minus = g * g * red * red + (2.0 * oa * oa + red * (dp - nu + ob)).powi(2);
    let a_minus_spec =
        if denom_minus == 0.0 { 0.0 } else { 2.0 * g * oa * oa * (p.eta_a * red + ssh).powi(2) / denom_minus };
    let a_plus = (eit - ssh).powi(2) * inv_curly_d + 2.0 * d;
    let a_minus = a_minus_spec + 2.0 * d;
    let w = a_minus - a_plus;
    let n_final = if w > 0.0 { a_plus / w } else { f64::INFINITY };
    if w <= 0.0 {
        warnings.push(Warning::Heating { a_plus, a_minus }.emit());
    }
    let curly_d = if inv_curly_d == 0.0 { f64::INFINITY } else { 1.0 / inv_curly_d };
    Ok(Assessed::new(
        RateCoefficients { a_plus_eit, a_plus_ssh, a_plus_int, a_plus, a_minus, d, curly_d, w, n_final },
        warnings,
    ))
}

/// Closed-form cooling rate at the resonance condition.
pub fn cooling_rate_closed(p: &ModelParams) -> f64 {
    let (nu, g, oa, ob) = (p.nu, p.gamma, p.omega_a, p.omega_b);
    let red = nu - 2.0 * ob;
    8.0 * g * p.eta_a.powi(2) * nu * nu * oa * oa
        / ((2.0 * oa * oa + red * (-p.delta - nu + ob)).powi(2) + g * g * red * red)
}

/// Cooling rate at `Ω_B = ν/2`, `2Γη_A²ν²/Ω_A²`.
pub fn cooling_rate_half_nu(p: &ModelParams) -> f64 {
    2.0 * p.gamma * (p.eta_a * p.nu / p.omega_a).powi(2)
}

/// Final occupation `(γ/4|Δ|)²` of EIT cooling for a population decay rate `gamma`.
pub fn eit_limit_occupation(gamma: f64, delta: f64) -> f64 {
    (gamma / (4.0 * delta.abs())).powi(2)
}

/// EIT drive placing the red sideband on the narrow absorption peak: `2Ω_A² = ν(Δ + ν)`.
pub fn eit_optimal_omega_a(nu: f64, delta: f64) -> Result<f64> {
    let s = nu * (delta + nu) / 2.0;
    if !(s > 0.0) {
        return Err(Error::NoPositiveSolution(format!(
            "no real omega_a places the sideband on the Fano peak for delta = {delta}"
        )));
    }
    Ok(s.sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectrumPoint {
    pub omega: f64,
    pub value: C64,
}

/// Internal (η = 0) dynamics used by the spectrum and the diffusion coefficient.
struct InternalModel {
    liouvillian: Liouvillian,
    steady: Mat<C64>,
    space: HilbertSpace,
}

impl InternalModel {
    fn new(p: &ModelParams) -> Result<Self> {
        let liouvillian = internal_liouvillian(p)?;
        let space = liouvillian.space().clone();
        let steady = steady_state(&liouvillian)?.value.matrix().to_owned();
        Ok(Self { liouvillian, steady, space })
    }

    fn excited_population(&self) -> f64 {
        self.steady[(Level::E.index(), Level::E.index())].re.max(0.0)
    }

    /// The internal operator that multiplies `x̂` in the first-order Hamiltonian.
    fn force(&self, p: &ModelParams) -> Result<Operator> {
        let eit = &sigma_y(&self.space, Level::G1, Level::E)? - &sigma_y(&self.space, Level::G2, Level::E)?;
        let ssh = sigma_y(&self.space, Level::G1, Level::G2)?;
        let f = &eit.scale(c(p.eta_a * p.omega_a)) + &ssh.scale(c(p.eta_b * p.omega_b));
        Ok(f.scale(c(std::f64::consts::FRAC_1_SQRT_2)))
    }

    /// `Tr[F (−(𝓛₀ + iω))⁻¹ (F ρ_ss)]`.
    fn spectrum(&self, f: &Operator, omega: f64) -> Result<C64> {
        let gen = self.liouvillian.generator();
        let n = gen.nrows();
        let a = Mat::from_fn(n, n, |i, j| -gen[(i, j)] - if i == j { I * omega } else { C64::new(0.0, 0.0) });
        let rhs = vectorize((f.matrix() * self.steady.as_ref()).as_ref());
        let lu = a.partial_piv_lu();
        let u = lu.U();
        let pivots: Vec<f64> = (0..n).map(|i| u[(i, i)].norm()).collect();
        let max = pivots.iter().copied().fold(0.0, f64::max);
        if pivots.iter().any(|&x| !(x > 1e-14 * max)) {
            return Err(Error::Singular(format!("resolvent is singular at omega = {omega}")));
        }
        let x = unvectorize(lu.solve(&rhs).as_ref(), self.space.dim());
        Ok(trace_product(f.matrix(), x.as_ref()))
    }
}

fn diffusion(p: &ModelParams) -> Result<f64> {
    if p.omega_a == 0.0 {
        return Ok(0.0);
    }
    let internal = InternalModel::new(p)?;
    Ok(p.gamma * internal.excited_population() * p.eta_a * p.eta_a * RECOIL_SECOND_MOMENT / 2.0)
}

/// Fluctuation spectrum of the force operator from the internal Liouvillian.
pub fn spectrum_numeric(p: &ModelParams, omega: f64) -> Result<SpectrumPoint> {
    let internal = InternalModel::new(p)?;
    let f = internal.force(p)?;
    Ok(SpectrumPoint { omega, value: internal.spectrum(&f, omega)? })
}

/// Spectrum of an arbitrary internal operator, for checks of bilinearity.
pub fn spectrum_of(p: &ModelParams, f: &Operator, omega: f64) -> Result<SpectrumPoint> {
    let internal = InternalModel::new(p)?;
    if f.space() != &internal.space {
        return Err(Error::DimensionMismatch { expected: internal.space.dim(), found: f.dim() });
    }
    Ok(SpectrumPoint { omega, value: internal.spectrum(f, omega)? })
}

/// Internal force operator used by [`spectrum_numeric`].
pub fn force_operator(p: &ModelParams) -> Result<Operator> {
    InternalModel::new(p)?.force(p)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NumericRates {
    pub a_plus: f64,
    pub a_minus: f64,
    #[serde(rename = "D")]
    pub d: f64,
}

/// `A± = 2 Re[D + S(∓ν)]` from the numerical spectrum.
pub fn rates_numeric(p: &ModelParams) -> Result<NumericRates> {
    let internal = InternalModel::new(p)?;
    let f = internal.force(p)?;
    let d = p.gamma * internal.excited_population() * p.eta_a * p.eta_a * RECOIL_SECOND_MOMENT / 2.0;
    let a_plus = 2.0 * (d + internal.spectrum(&f, -p.nu)?.re);
    let a_minus = 2.0 * (d + internal.spectrum(&f, p.nu)?.re);
    Ok(NumericRates { a_plus, a_minus, d })
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RobustnessAxis {
    OmegaA,
    OmegaB,
}

impl RobustnessAxis {
    pub fn key(self) -> &'static str {
        match self {
            Self::OmegaA => "omega_a",
            Self::OmegaB => "omega_b",
        }
    }
}

/// Slope of `log n_final` against `log ΔΩ` when the drive on `axis` is offset from `p`.
pub fn robustness_slope(p: &ModelParams, axis: RobustnessAxis, offsets: &[f64]) -> Result<f64> {
    if offsets.is_empty() {
        return Err(Error::Domain("no offsets given".into()));
    }
    if offsets.len() < 2 || offsets.iter().any(|&o| !(o > 0.0)) {
        return Err(Error::FitWindow("at least two positive offsets are required".into()));
    }
    let (lo, hi) = offsets.iter().fold((f64::INFINITY, 0.0_f64), |(l, h), &o| (l.min(o), h.max(o)));
    if hi / lo < 10.0 * (1.0 - 1e-12) {
        return Err(Error::FitWindow(format!("offsets span {:.2} decades, less than one", (hi / lo).log10())));
    }
    let mut xs = Vec::with_capacity(offsets.len());
    let mut ys = Vec::with_capacity(offsets.len());
    for &off in offsets {
        let mut q = p.clone();
        q.set_value(axis.key(), p.get_value(axis.key())? + off)?;
        let n = heating_components(&q)?.value.n_final;
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::FitWindow(format!(
                "n_final = {n:e} at {} offset {off}; no power law can be fitted",
                axis.key()
            )));
        }
        xs.push(off.ln());
        ys.push(n.ln());
    }
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let sorted: Vec<f64> = order.iter().map(|&i| ys[i]).collect();
    let up = sorted.windows(2).all(|w| w[1] >= w[0]);
    let down = sorted.windows(2).all(|w| w[1] <= w[0]);
    if !(up || down) {
        return Err(Error::FitWindow(format!("n_final is not monotone in the {} offset", axis.key())));
    }
    Ok(least_squares_slope(&xs, &ys))
}

/// `(slope_A, slope_B)`.
pub fn robustness_exponents(p: &ModelParams, offsets: &[f64]) -> Result<(f64, f64)> {
    Ok((robustness_slope(p, RobustnessAxis::OmegaA, offsets)?, robustness_slope(p, RobustnessAxis::OmegaB, offsets)?))
}

pub(crate) fn least_squares_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = x.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}
