//! Hamiltonians, spontaneous-emission channels and implementation parameter maps.
//!
//! Conventions used throughout the crate:
//!
//! * Every Lamb-Dicke phase multiplies the dimensionless position quadrature
//!   `x̂ = (b + b†)/√2`, so `η` is the recoil phase per unit of `x̂`.
//! * `H0 = Σ_m ν_m b_m†b_m − Δ|e⟩⟨e|`, so `Δ > 0` is a blue single-photon detuning.
//! * The excited-state population decays at `2Γ`; `Γ` is the damping rate of the
//!   optical coherences, which is the linewidth that appears in the closed forms.

use std::fmt;
use std::str::FromStr;

use faer::{Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::config::{self, Entry};
use crate::error::{Error, Result, Warning};
use crate::quantum::{
    c, displacement_phase, embed_mode_op, kron, number_operator, position_quadrature, transition, transition_with,
    HilbertSpace, Level, Operator, C64, I, ZERO,
};

/// Number of Gauss–Legendre nodes used for the recoil angular average.
pub const DEFAULT_RECOIL_POINTS: usize = 3;

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingOrder {
    #[default]
    FirstOrder,
    ExactExponential,
}

impl FromStr for CouplingOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "first_order" => Ok(Self::FirstOrder),
            "exact_exponential" => Ok(Self::ExactExponential),
            other => Err(Error::Config(format!(
                "coupling_order must be `first_order` or `exact_exponential`, got `{other}`"
            ))),
        }
    }
}

impl fmt::Display for CouplingOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::FirstOrder => "first_order",
            Self::ExactExponential => "exact_exponential",
        })
    }
}

/// Physical and effective parameters of the single-mode model (units of `ν` are free).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub nu: f64,
    pub gamma: f64,
    pub delta: f64,
    pub omega_a: f64,
    pub omega_b: f64,
    pub eta_a: f64,
    pub eta_b: f64,
    pub branch_g1: f64,
    pub branch_g2: f64,
    pub cutoff: usize,
    pub coupling_order: CouplingOrder,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            nu: 1.0,
            gamma: 1.0,
            delta: 0.0,
            omega_a: 0.3,
            omega_b: 0.5,
            eta_a: 0.05,
            eta_b: 0.2,
            branch_g1: 0.5,
            branch_g2: 0.5,
            cutoff: 15,
            coupling_order: CouplingOrder::FirstOrder,
        }
    }
}

impl ModelParams {
    pub const KEYS: [&'static str; 11] = [
        "nu",
        "gamma",
        "delta",
        "omega_a",
        "omega_b",
        "eta_a",
        "eta_b",
        "branch_g1",
        "branch_g2",
        "cutoff",
        "coupling_order",
    ];

    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("nu", self.nu),
            ("gamma", self.gamma),
            ("delta", self.delta),
            ("omega_a", self.omega_a),
            ("omega_b", self.omega_b),
            ("eta_a", self.eta_a),
            ("eta_b", self.eta_b),
            ("branch_g1", self.branch_g1),
            ("branch_g2", self.branch_g2),
        ];
        if let Some((k, _)) = finite.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidParams(format!("{k} must be finite")));
        }
        let bad = |msg: &str| Err(Error::InvalidParams(msg.to_owned()));
        if self.nu <= 0.0 {
            return bad("nu must be positive");
        }
        if self.gamma < 0.0 {
            return bad("gamma must be non-negative");
        }
        if self.omega_a < 0.0 {
            return bad("omega_a must be non-negative");
        }
        if self.eta_a < 0.0 || self.eta_b < 0.0 {
            return bad("Lamb-Dicke parameters must be non-negative");
        }
        if self.branch_g1 < 0.0 || self.branch_g2 < 0.0 {
            return bad("branching fractions must be non-negative");
        }
        if (self.branch_g1 + self.branch_g2 - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParams(format!(
                "branch_g1 + branch_g2 = {} must equal 1",
                self.branch_g1 + self.branch_g2
            )));
        }
        if self.cutoff < 1 {
            return bad("cutoff must be at least 1");
        }
        Ok(())
    }

    /// Parses a config, starting from the defaults for any key not present.
    pub fn from_config_str(text: &str) -> Result<Self> {
        let mut p = Self::default();
        for entry in config::parse_entries(text)? {
            p.set(&entry)?;
        }
        p.validate()?;
        Ok(p)
    }

    pub fn from_config_file(path: &std::path::Path) -> Result<Self> {
        Self::from_config_str(&config::read_file(path)?)
    }

    pub(crate) fn set(&mut self, entry: &Entry) -> Result<()> {
        let f = || config::parse_f64(entry);
        match entry.key.as_str() {
            "nu" => self.nu = f()?,
            "gamma" => self.gamma = f()?,
            "delta" => self.delta = f()?,
            "omega_a" => self.omega_a = f()?,
            "omega_b" => self.omega_b = f()?,
            "eta_a" => self.eta_a = f()?,
            "eta_b" => self.eta_b = f()?,
            "branch_g1" => self.branch_g1 = f()?,
            "branch_g2" => self.branch_g2 = f()?,
            "cutoff" => self.cutoff = config::parse_usize(entry)?,
            "coupling_order" => self.coupling_order = entry.value.parse()?,
            other => return Err(Error::UnknownKey(other.to_owned())),
        }
        Ok(())
    }

    /// Sets a parameter by its config key; integer-valued keys reject fractional input.
    pub fn set_value(&mut self, key: &str, value: f64) -> Result<()> {
        match key {
            "cutoff" => {
                if value < 1.0 || value.fract() != 0.0 {
                    return Err(Error::InvalidParams(format!("cutoff must be a positive integer, got {value}")));
                }
                self.cutoff = value as usize;
            }
            "coupling_order" => return Err(Error::InvalidParams("coupling_order is not numeric".into())),
            _ => {
                let entry = Entry { line: 0, key: key.to_owned(), value: value.to_string() };
                self.set(&entry)?;
            }
        }
        Ok(())
    }

    pub fn get_value(&self, key: &str) -> Result<f64> {
        Ok(match key {
            "nu" => self.nu,
            "gamma" => self.gamma,
            "delta" => self.delta,
            "omega_a" => self.omega_a,
            "omega_b" => self.omega_b,
            "eta_a" => self.eta_a,
            "eta_b" => self.eta_b,
            "branch_g1" => self.branch_g1,
            "branch_g2" => self.branch_g2,
            "cutoff" => self.cutoff as f64,
            other => return Err(Error::UnknownKey(other.to_owned())),
        })
    }

    /// Serializes to the config format; `from_config_str` reads it back exactly.
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        for key in Self::KEYS {
            let value = match key {
                "cutoff" => self.cutoff.to_string(),
                "coupling_order" => self.coupling_order.to_string(),
                k => format!("{:?}", self.get_value(k).expect("known key")),
            };
            s.push_str(&format!("{key} = {value}\n"));
        }
        s
    }

    pub fn space(&self) -> Result<HilbertSpace> {
        HilbertSpace::three_level(&[self.cutoff])
    }

    /// The closed-form rates assume `Ω_A ≥ η_A ν`.
    pub fn validity_warning(&self) -> Option<Warning> {
        let bound = self.eta_a * self.nu;
        (self.omega_a < bound).then_some(Warning::ValidityGate { omega_a: self.omega_a, bound })
    }
}

/// Spontaneous-emission channel `rate · (LρL† − ½{L†L, ρ})`.
#[derive(Clone, Debug)]
pub struct JumpChannel {
    pub operator: Operator,
    pub rate: f64,
}

/// A model that can be turned into a Lindblad generator or unravelled into trajectories.
pub trait CoolingSystem: Sync {
    fn space(&self) -> Result<HilbertSpace>;
    fn hamiltonian(&self) -> Result<Operator>;
    fn jump_channels(&self) -> Result<Vec<JumpChannel>>;
}

impl CoolingSystem for ModelParams {
    fn space(&self) -> Result<HilbertSpace> {
        ModelParams::space(self)
    }

    fn hamiltonian(&self) -> Result<Operator> {
        build_hamiltonian(self)
    }

    fn jump_channels(&self) -> Result<Vec<JumpChannel>> {
        build_jump_channels(self, DEFAULT_RECOIL_POINTS)
    }
}

/// Per-mode coupling data for the multi-mode builders.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Modes<'a> {
    pub freqs: &'a [f64],
    pub eta_a: &'a [f64],
    pub eta_b: &'a [f64],
}

impl<'a> Modes<'a> {
    fn single(p: &'a ModelParams) -> Self {
        Self {
            freqs: std::slice::from_ref(&p.nu),
            eta_a: std::slice::from_ref(&p.eta_a),
            eta_b: std::slice::from_ref(&p.eta_b),
        }
    }
}

/// Kronecker product of the per-mode matrices.
fn kron_all(mats: &[Mat<C64>]) -> Mat<C64> {
    mats.iter().fold(Mat::identity(1, 1), |acc, m| kron(acc.as_ref(), m.as_ref()))
}

/// `Σ_m η_m x̂_m` on the motional factor.
fn weighted_position(space: &HilbertSpace, etas: &[f64]) -> Result<Mat<C64>> {
    let dm = space.motional_dim();
    let mut out = Mat::<C64>::zeros(dm, dm);
    for (m, &eta) in etas.iter().enumerate() {
        if eta == 0.0 {
            continue;
        }
        let factors = (0..space.n_modes())
            .map(|k| {
                let n = space.mode_cutoffs()[k];
                if k == m {
                    Ok(faer::Scale(c(eta)) * position_quadrature(n)?)
                } else {
                    Ok(Mat::identity(n + 1, n + 1))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        out = &out + kron_all(&factors);
    }
    Ok(out)
}

/// `exp(i s Σ_m η_m x̂_m)` to the requested order.
fn recoil_phase(space: &HilbertSpace, etas: &[f64], s: f64, order: CouplingOrder) -> Result<Mat<C64>> {
    match order {
        CouplingOrder::FirstOrder => {
            let x = weighted_position(space, etas)?;
            let dm = space.motional_dim();
            Ok(Mat::<C64>::identity(dm, dm) + faer::Scale(I * s) * &x)
        }
        CouplingOrder::ExactExponential => {
            let factors = space
                .mode_cutoffs()
                .iter()
                .zip(etas)
                .map(|(&n, &eta)| displacement_phase(n, s * eta))
                .collect::<Result<Vec<_>>>()?;
            Ok(kron_all(&factors))
        }
    }
}

/// `|j⟩⟨k| ⊗ m + h.c.`
fn coupling_pair(space: &HilbertSpace, j: Level, k: Level, m: MatRef<'_, C64>) -> Result<Operator> {
    let forward = transition_with(space, j, k, m)?;
    Ok(&forward + &forward.adjoint())
}

fn check_modes(space: &HilbertSpace, modes: Modes<'_>) -> Result<()> {
    let n = space.n_modes();
    for len in [modes.freqs.len(), modes.eta_a.len(), modes.eta_b.len()] {
        if len != n {
            return Err(Error::DimensionMismatch { expected: n, found: len });
        }
    }
    Ok(())
}

pub(crate) fn h0_modes(space: &HilbertSpace, modes: Modes<'_>, delta: f64) -> Result<Operator> {
    check_modes(space, modes)?;
    let mut h = transition(space, Level::E, Level::E)?.scale(c(-delta));
    for (m, &freq) in modes.freqs.iter().enumerate() {
        let n = embed_mode_op(space, m, number_operator(space.mode_cutoffs()[m])?.as_ref())?;
        h = &h + &n.scale(c(freq));
    }
    Ok(h)
}

pub(crate) fn h_eit_modes(
    space: &HilbertSpace,
    modes: Modes<'_>,
    omega_a: f64,
    order: CouplingOrder,
) -> Result<Operator> {
    check_modes(space, modes)?;
    let m1 = faer::Scale(c(omega_a)) * recoil_phase(space, modes.eta_a, -1.0, order)?;
    let m2 = faer::Scale(c(omega_a)) * recoil_phase(space, modes.eta_a, 1.0, order)?;
    Ok(&coupling_pair(space, Level::E, Level::G1, m1.as_ref())?
        + &coupling_pair(space, Level::E, Level::G2, m2.as_ref())?)
}

pub(crate) fn h_ssh_modes(
    space: &HilbertSpace,
    modes: Modes<'_>,
    omega_b: f64,
    order: CouplingOrder,
) -> Result<Operator> {
    check_modes(space, modes)?;
    let m = faer::Scale(c(omega_b)) * recoil_phase(space, modes.eta_b, 1.0, order)?;
    coupling_pair(space, Level::G1, Level::G2, m.as_ref())
}

pub(crate) fn jump_channels_modes(
    space: &HilbertSpace,
    eta_a: &[f64],
    gamma: f64,
    branches: [f64; 2],
    order: CouplingOrder,
    n_recoil_points: usize,
) -> Result<Vec<JumpChannel>> {
    if n_recoil_points < 1 {
        return Err(Error::Domain("at least one recoil quadrature point is required".into()));
    }
    if eta_a.len() != space.n_modes() {
        return Err(Error::DimensionMismatch { expected: space.n_modes(), found: eta_a.len() });
    }
    let grounds = [Level::G1, Level::G2];
    let mut channels = Vec::new();
    if eta_a.iter().all(|&e| e == 0.0) {
        for (g, branch) in grounds.into_iter().zip(branches) {
            if branch > 0.0 {
                channels.push(JumpChannel { operator: transition(space, g, Level::E)?, rate: 2.0 * gamma * branch });
            }
        }
        return Ok(channels);
    }
    let (nodes, weights) = gauss_legendre(n_recoil_points)?;
    for (&u, &w) in nodes.iter().zip(&weights) {
        let recoil = recoil_phase(space, eta_a, u, order)?;
        for (g, branch) in grounds.into_iter().zip(branches) {
            if branch > 0.0 {
                channels.push(JumpChannel {
                    operator: transition_with(space, g, Level::E, recoil.as_ref())?,
                    rate: gamma * branch * w,
                });
            }
        }
    }
    Ok(channels)
}

/// `ν b†b − Δ|e⟩⟨e|`.
pub fn build_h0(p: &ModelParams) -> Result<Operator> {
    p.validate()?;
    h0_modes(&p.space()?, Modes::single(p), p.delta)
}

/// EIT Raman pair coupling both ground states to `|e⟩` with opposite recoil phases.
pub fn build_h_eit(p: &ModelParams) -> Result<Operator> {
    p.validate()?;
    h_eit_modes(&p.space()?, Modes::single(p), p.omega_a, p.coupling_order)
}

/// Stark-shift drive between the two ground states.
pub fn build_h_ssh(p: &ModelParams) -> Result<Operator> {
    p.validate()?;
    h_ssh_modes(&p.space()?, Modes::single(p), p.omega_b, p.coupling_order)
}

pub fn build_hamiltonian(p: &ModelParams) -> Result<Operator> {
    Ok(&(&build_h0(p)? + &build_h_eit(p)?) + &build_h_ssh(p)?)
}

/// Emission channels `|g_i⟩⟨e| ⊗ e^{iη_A u_q x̂}` with Gauss–Legendre recoil nodes `u_q`.
///
/// Rates are `Γ · branch_i · w_q`, so the channels together empty `|e⟩` at rate `2Γ`.
/// At `η_A = 0` the recoil nodes are merged into one channel per ground state.
pub fn build_jump_channels(p: &ModelParams, n_recoil_points: usize) -> Result<Vec<JumpChannel>> {
    p.validate()?;
    jump_channels_modes(
        &p.space()?,
        std::slice::from_ref(&p.eta_a),
        p.gamma,
        [p.branch_g1, p.branch_g2],
        p.coupling_order,
        n_recoil_points,
    )
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 {
        return Err(Error::Domain("Gauss–Legendre rule needs at least one node".into()));
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = nf * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    Ok((nodes, weights))
}

/// Normalized first-order dark state `|g1−g2⟩|0⟩ + i(η_A/√2)|g1+g2⟩|1⟩`.
pub fn first_order_dark_state(p: &ModelParams) -> Result<Vec<C64>> {
    let space = p.space()?;
    let mut psi = vec![ZERO; space.dim()];
    let a = I * (p.eta_a * std::f64::consts::FRAC_1_SQRT_2);
    psi[space.index(0, &[0])] = c(1.0);
    psi[space.index(1, &[0])] = c(-1.0);
    psi[space.index(0, &[1])] = a;
    psi[space.index(1, &[1])] = a;
    let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    psi.iter_mut().for_each(|z| *z /= norm);
    Ok(psi)
}

/// Effective Stark-shift drive obtained from an off-resonant Raman pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RamanEffective {
    pub omega_b: f64,
    /// `None` when `Ω_B = 0`, where the effective Lamb-Dicke parameter is undefined.
    pub eta_b: Option<f64>,
}

/// Adiabatic elimination of the upper level of a Raman pair with Rabi frequency
/// `omega_p`, Lamb-Dicke parameter `eta_p` and detuning `delta`, for Fock state `n`.
pub fn raman_effective(omega_p: f64, eta_p: f64, delta: f64, nu: f64, n: u32) -> Result<RamanEffective> {
    let denom = delta * delta - nu * nu;
    if delta == 0.0 || denom == 0.0 {
        return Err(Error::Singular(format!("Raman elimination is singular at delta = {delta}, nu = {nu}")));
    }
    let n_factor = 2.0 * f64::from(n) + 1.0;
    let op2 = omega_p * omega_p;
    let omega_b = op2 * (1.0 / delta - delta / denom * eta_p * eta_p * n_factor);
    let product = op2 * eta_p * (2.0 * delta * delta - nu * nu) / (delta * denom);
    let eta_b = (omega_b != 0.0).then(|| product / omega_b);
    Ok(RamanEffective { omega_b, eta_b })
}

/// Magnetic-gradient realization: after the polaron transformation `Ω_B = Ω_d`, `η_B = λ/ν`.
pub fn gradient_effective(lambda: f64, nu: f64, omega_d: f64) -> Result<(f64, f64)> {
    if !(nu > 0.0) {
        return Err(Error::Domain(format!("trap frequency must be positive, got {nu}")));
    }
    Ok((omega_d, lambda / nu))
}

/// `η_B/η_A` when beam B is colinear with the trap axis and beam A makes angle `theta_a_deg` with it.
pub fn geometry_eta_ratio(theta_a_deg: f64) -> Result<f64> {
    if !(0.0..90.0).contains(&theta_a_deg) {
        return Err(Error::Domain(format!("beam angle must lie in [0°, 90°), got {theta_a_deg}°")));
    }
    Ok(2.0 / theta_a_deg.to_radians().cos())
}
