//! Parameter scans over one or two axes and reports for the beam-geometry operating points.
//!
//! A scan file uses the config syntax. Model keys set the base point, and the scan keys are
//!
//! ```text
//! quantity = deviation          # n_final_closed | n_ss_numeric | w_closed | w_fit | a_plus | deviation
//! axis1 = omega_b               # model key, or eta_ratio / lamb_dicke
//! axis1_mode = resonance_offset # absolute (default) | offset | resonance_offset
//! axis1_min = -0.1
//! axis1_max = 0.1
//! axis1_points = 101
//! axis1_spacing = linear        # linear (default) | log
//! axis2 = lamb_dicke
//! axis2_values = 0.02, 0.05, 0.1
//! ```
//!
//! `eta_ratio` sets `eta_b = ratio * eta_a`; `lamb_dicke` sets `eta_a` and rescales `eta_b`
//! so their ratio is kept. A `resonance_offset` axis (on `omega_b` or `eta_b`) is applied
//! after all other axes, as an offset from the value that cancels the heating amplitude.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::analytics::{
    heating_components, resonance_condition, with_resonant_eta_b, with_resonant_omega_b, RateCoefficients,
};
use crate::config::{self, Entry};
use crate::dynamics::{assemble_liouvillian, evolve, fit_cooling_rate, steady_state};
use crate::error::{Error, Result, Warning};
use crate::model::{geometry_eta_ratio, ModelParams};
use crate::quantum::{DensityMatrix, Level};

pub const MAX_AXES: usize = 2;

/// Samples per run when a cell needs a fitted cooling rate.
const FIT_SAMPLES: usize = 301;
/// Evolution time for fitted rates, in units of the closed-form `1/W`.
const FIT_DURATION: f64 = 6.0;
/// Initial thermal occupation for fitted rates, small enough that the decay stays exponential.
pub const FIT_INITIAL_MEAN_N: f64 = 0.2;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    NFinalClosed,
    NSsNumeric,
    #[serde(rename = "W_closed")]
    WClosed,
    #[serde(rename = "W_fit")]
    WFit,
    APlus,
    /// `|n_ss_numeric − n_final_closed|`.
    Deviation,
}

impl Quantity {
    pub const ALL: [Quantity; 6] = [
        Quantity::NFinalClosed,
        Quantity::NSsNumeric,
        Quantity::WClosed,
        Quantity::WFit,
        Quantity::APlus,
        Quantity::Deviation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Quantity::NFinalClosed => "n_final_closed",
            Quantity::NSsNumeric => "n_ss_numeric",
            Quantity::WClosed => "W_closed",
            Quantity::WFit => "W_fit",
            Quantity::APlus => "a_plus",
            Quantity::Deviation => "deviation",
        }
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Quantity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Quantity::ALL
            .into_iter()
            .find(|q| q.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown quantity `{s}`")))
    }
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisMode {
    #[default]
    Absolute,
    Offset,
    ResonanceOffset,
}

impl FromStr for AxisMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "absolute" => Ok(AxisMode::Absolute),
            "offset" => Ok(AxisMode::Offset),
            "resonance_offset" => Ok(AxisMode::ResonanceOffset),
            other => Err(Error::Config(format!("unknown axis mode `{other}`"))),
        }
    }
}

impl fmt::Display for AxisMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AxisMode::Absolute => "absolute",
            AxisMode::Offset => "offset",
            AxisMode::ResonanceOffset => "resonance_offset",
        })
    }
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    #[default]
    Linear,
    Log,
}

impl FromStr for Spacing {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Spacing::Linear),
            "log" => Ok(Spacing::Log),
            other => Err(Error::Config(format!("unknown spacing `{other}`"))),
        }
    }
}

const PSEUDO_PARAMS: [&str; 2] = ["eta_ratio", "lamb_dicke"];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Axis {
    pub parameter: String,
    pub mode: AxisMode,
    pub values: Vec<f64>,
}

impl Axis {
    pub fn range(
        parameter: &str,
        mode: AxisMode,
        min: f64,
        max: f64,
        n_points: usize,
        spacing: Spacing,
    ) -> Result<Self> {
        if n_points < 1 {
            return Err(Error::Config(format!("axis `{parameter}` needs at least one point")));
        }
        if !min.is_finite() || !max.is_finite() {
            return Err(Error::Config(format!("axis `{parameter}` bounds must be finite")));
        }
        let values = match (n_points, spacing) {
            (1, _) => vec![min],
            (n, Spacing::Linear) => (0..n).map(|k| min + (max - min) * k as f64 / (n - 1) as f64).collect(),
            (n, Spacing::Log) => {
                if !(min > 0.0 && max > 0.0) {
                    return Err(Error::Config(format!("log axis `{parameter}` needs positive bounds")));
                }
                let (a, b) = (min.ln(), max.ln());
                (0..n).map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp()).collect()
            }
        };
        Self::list(parameter, mode, values)
    }

    pub fn list(parameter: &str, mode: AxisMode, values: Vec<f64>) -> Result<Self> {
        let numeric = ModelParams::KEYS.iter().any(|k| *k == parameter && *k != "coupling_order");
        if !numeric && !PSEUDO_PARAMS.contains(&parameter) {
            return Err(Error::UnknownKey(parameter.to_owned()));
        }
        if mode == AxisMode::ResonanceOffset && !matches!(parameter, "omega_b" | "eta_b") {
            return Err(Error::Config(format!("resonance_offset applies to omega_b or eta_b, not `{parameter}`")));
        }
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config(format!("axis `{parameter}` needs finite values")));
        }
        Ok(Self { parameter: parameter.to_owned(), mode, values })
    }

    /// Column name, with the mode when the value is not absolute.
    pub fn label(&self) -> String {
        match self.mode {
            AxisMode::Absolute => self.parameter.clone(),
            AxisMode::Offset => format!("d_{}", self.parameter),
            AxisMode::ResonanceOffset => format!("d_{}_res", self.parameter),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanSpec {
    pub base: ModelParams,
    pub quantity: Quantity,
    pub axes: Vec<Axis>,
}

#[derive(Default)]
struct AxisDraft {
    parameter: Option<String>,
    mode: AxisMode,
    min: Option<f64>,
    max: Option<f64>,
    points: Option<usize>,
    spacing: Spacing,
    values: Option<Vec<f64>>,
}

impl ScanSpec {
    pub fn from_config_str(text: &str) -> Result<Self> {
        let mut base = ModelParams::default();
        let mut quantity = None;
        let mut drafts: [AxisDraft; MAX_AXES] = Default::default();
        for entry in config::parse_entries(text)? {
            if entry.key == "quantity" {
                quantity = Some(entry.value.parse()?);
                continue;
            }
            if let Some((slot, field)) = axis_key(&entry.key) {
                let draft = &mut drafts[slot];
                match field {
                    "" => draft.parameter = Some(entry.value.clone()),
                    "mode" => draft.mode = entry.value.parse()?,
                    "min" => draft.min = Some(config::parse_f64(&entry)?),
                    "max" => draft.max = Some(config::parse_f64(&entry)?),
                    "points" => draft.points = Some(config::parse_usize(&entry)?),
                    "spacing" => draft.spacing = entry.value.parse()?,
                    "values" => draft.values = Some(parse_list(&entry)?),
                    _ => return Err(Error::UnknownKey(entry.key.clone())),
                }
                continue;
            }
            base.set(&entry)?;
        }
        base.validate()?;
        let quantity = quantity.ok_or_else(|| Error::Config("scan needs a `quantity`".into()))?;
        let mut axes = Vec::new();
        for (i, d) in drafts.into_iter().enumerate() {
            let Some(parameter) = d.parameter else {
                if d.min.is_some() || d.max.is_some() || d.points.is_some() || d.values.is_some() {
                    return Err(Error::Config(format!("axis{} settings given without `axis{}`", i + 1, i + 1)));
                }
                continue;
            };
            let axis = match (d.values, d.min, d.max, d.points) {
                (Some(values), None, None, None) => Axis::list(&parameter, d.mode, values)?,
                (None, Some(min), Some(max), Some(points)) => {
                    Axis::range(&parameter, d.mode, min, max, points, d.spacing)?
                }
                _ => {
                    return Err(Error::Config(format!(
                        "axis{} needs either `_values` or all of `_min`, `_max`, `_points`",
                        i + 1
                    )))
                }
            };
            axes.push(axis);
        }
        Self::new(base, quantity, axes)
    }

    pub fn from_config_file(path: &std::path::Path) -> Result<Self> {
        Self::from_config_str(&config::read_file(path)?)
    }

    pub fn new(base: ModelParams, quantity: Quantity, axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() || axes.len() > MAX_AXES {
            return Err(Error::Config(format!("a scan needs 1 to {MAX_AXES} axes, got {}", axes.len())));
        }
        if axes.len() == 2 && axes[0].parameter == axes[1].parameter {
            return Err(Error::Config(format!("both axes scan `{}`", axes[0].parameter)));
        }
        base.validate()?;
        Ok(Self { base, quantity, axes })
    }

    /// Deviation of the numeric steady state from the closed form against the Stark-shift
    /// offset from resonance, for three Lamb-Dicke parameters at `η_B/η_A = 4`.
    pub fn stark_deviation() -> Self {
        let base =
            ModelParams { omega_a: 0.3, omega_b: 0.5, eta_a: 0.05, eta_b: 0.2, cutoff: 10, ..Default::default() };
        let axes = vec![
            Axis::range("omega_b", AxisMode::ResonanceOffset, -0.1, 0.1, 21, Spacing::Linear).expect("valid axis"),
            Axis::list("lamb_dicke", AxisMode::Absolute, vec![0.02, 0.05, 0.1]).expect("valid axis"),
        ];
        Self::new(base, Quantity::Deviation, axes).expect("valid scan")
    }

    /// Numeric steady-state occupation over the `(η_B/η_A, Ω_B)` plane.
    pub fn occupation_map() -> Self {
        let base = ModelParams { omega_a: 0.3, eta_a: 0.02, cutoff: 8, ..Default::default() };
        let axes = vec![
            Axis::range("eta_ratio", AxisMode::Absolute, 2.5, 8.0, 12, Spacing::Linear).expect("valid axis"),
            Axis::range("omega_b", AxisMode::Absolute, 0.1, 2.1, 41, Spacing::Linear).expect("valid axis"),
        ];
        Self::new(base, Quantity::NSsNumeric, axes).expect("valid scan")
    }

    pub fn n_cells(&self) -> usize {
        self.axes.iter().map(|a| a.values.len()).product()
    }

    /// Axis coordinates of cell `k`, with the last axis varying fastest.
    pub fn coordinates(&self, mut k: usize) -> Vec<f64> {
        let mut coords = vec![0.0; self.axes.len()];
        for (i, axis) in self.axes.iter().enumerate().rev() {
            let n = axis.values.len();
            coords[i] = axis.values[k % n];
            k /= n;
        }
        coords
    }

    /// Model parameters at the given axis coordinates.
    pub fn params_at(&self, coords: &[f64]) -> Result<ModelParams> {
        if coords.len() != self.axes.len() {
            return Err(Error::DimensionMismatch { expected: self.axes.len(), found: coords.len() });
        }
        let mut p = self.base.clone();
        let pairs = || self.axes.iter().zip(coords);
        for (axis, &v) in pairs().filter(|(a, _)| a.mode != AxisMode::ResonanceOffset) {
            let value = match axis.mode {
                AxisMode::Absolute => v,
                _ => read_param(&self.base, &axis.parameter)? + v,
            };
            write_param(&mut p, &axis.parameter, value)?;
        }
        for (axis, &v) in pairs().filter(|(a, _)| a.mode == AxisMode::ResonanceOffset) {
            if axis.parameter == "omega_b" {
                p.omega_b = with_resonant_omega_b(&p)?.omega_b + v;
            } else {
                p.eta_b = with_resonant_eta_b(&p)?.eta_b + v;
            }
        }
        p.validate()?;
        Ok(p)
    }

    /// Resolved scan file; parsing it reproduces `self`.
    pub fn to_config_string(&self) -> String {
        let mut s = self.base.to_config_string();
        s.push_str(&format!("quantity = {}\n", self.quantity));
        for (i, axis) in self.axes.iter().enumerate() {
            let n = i + 1;
            let values: Vec<String> = axis.values.iter().map(|v| format!("{v:?}")).collect();
            s.push_str(&format!("axis{n} = {}\naxis{n}_mode = {}\n", axis.parameter, axis.mode));
            s.push_str(&format!("axis{n}_values = {}\n", values.join(", ")));
        }
        s
    }
}

/// `axis2_min` → `(1, "min")`, `axis1` → `(0, "")`.
fn axis_key(key: &str) -> Option<(usize, &str)> {
    let rest = key.strip_prefix("axis")?;
    let (num, field) = match rest.split_once('_') {
        Some((n, f)) => (n, f),
        None => (rest, ""),
    };
    let slot: usize = num.parse().ok()?;
    (1..=MAX_AXES).contains(&slot).then_some((slot - 1, field))
}

fn parse_list(entry: &Entry) -> Result<Vec<f64>> {
    entry
        .value
        .split(',')
        .map(|v| Entry { value: v.trim().to_owned(), ..entry.clone() })
        .map(|e| config::parse_f64(&e))
        .collect()
}

fn read_param(p: &ModelParams, key: &str) -> Result<f64> {
    match key {
        "eta_ratio" => Ok(p.eta_b / p.eta_a),
        "lamb_dicke" => Ok(p.eta_a),
        k => p.get_value(k),
    }
}

fn write_param(p: &mut ModelParams, key: &str, value: f64) -> Result<()> {
    match key {
        "eta_ratio" => p.eta_b = value * p.eta_a,
        "lamb_dicke" => {
            if !(p.eta_a > 0.0) {
                return Err(Error::Domain("lamb_dicke axis needs a positive base eta_a".into()));
            }
            let ratio = p.eta_b / p.eta_a;
            p.eta_a = value;
            p.eta_b = value * ratio;
        }
        k => p.set_value(k, value)?,
    }
    Ok(())
}

/// Numeric steady-state phonon number of mode 0.
pub fn n_ss_numeric(p: &ModelParams) -> Result<(f64, Vec<Warning>)> {
    let rho = steady_state(&assemble_liouvillian(p)?)?;
    Ok((rho.value.mean_phonons(0)?, rho.warnings))
}

/// Cooling rate fitted to a master-equation run from `|g1⟩ ⊗ thermal(FIT_INITIAL_MEAN_N)`.
pub fn w_fit(p: &ModelParams) -> Result<(f64, Vec<Warning>)> {
    let rates = heating_components(p)?.value;
    if !(rates.w > 0.0) {
        return Err(Error::FitWindow(format!("closed-form W = {:e} predicts heating", rates.w)));
    }
    let l = assemble_liouvillian(p)?;
    let rho0 = DensityMatrix::internal_times_thermal(l.space(), Level::G1, &[FIT_INITIAL_MEAN_N])?;
    let run = evolve(&l, &rho0, FIT_DURATION / rates.w, FIT_SAMPLES)?;
    let fit = fit_cooling_rate(&run.value, p.gamma)?;
    let mut warnings = run.warnings;
    warnings.extend(fit.warnings);
    Ok((fit.value.w, warnings))
}

/// Evaluates `quantity` at `p`.
pub fn evaluate(p: &ModelParams, quantity: Quantity) -> Result<(f64, Vec<Warning>)> {
    let closed = || heating_components(p).map(|r| (r.value, r.warnings));
    match quantity {
        Quantity::NFinalClosed => closed().map(|(r, w)| (r.n_final, w)),
        Quantity::WClosed => closed().map(|(r, w)| (r.w, w)),
        Quantity::APlus => closed().map(|(r, w)| (r.a_plus, w)),
        Quantity::NSsNumeric => n_ss_numeric(p),
        Quantity::WFit => w_fit(p),
        Quantity::Deviation => {
            let (r, mut warnings) = closed()?;
            let (n, w) = n_ss_numeric(p)?;
            warnings.extend(w);
            Ok(((n - r.n_final).abs(), warnings))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Cell {
    pub coords: Vec<f64>,
    /// `NaN` when the cell failed.
    pub value: f64,
    /// Error tag and message of a failed cell.
    pub error: Option<(String, String)>,
    pub warnings: Vec<Warning>,
}

impl Cell {
    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }

    pub fn status(&self) -> &str {
        self.error.as_ref().map_or("ok", |(tag, _)| tag.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Provenance {
    pub config_sha256: String,
    pub code_version: String,
    pub timestamp: String,
    pub resolved_config: String,
}

impl Provenance {
    pub fn new(resolved_config: String) -> Self {
        let digest = Sha256::digest(resolved_config.as_bytes());
        Self {
            config_sha256: format!("{digest:x}"),
            code_version: env!("CARGO_PKG_VERSION").to_owned(),
            timestamp: chrono::Utc::now().to_rfc3339(),
            resolved_config,
        }
    }

    /// `#`-prefixed header lines embedding the resolved config.
    pub fn header(&self) -> String {
        let mut s = format!(
            "# robust-cooling {}\n# timestamp = {}\n# config_sha256 = {}\n",
            self.code_version, self.timestamp, self.config_sha256
        );
        for line in self.resolved_config.lines() {
            s.push_str(&format!("# {line}\n"));
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanResult {
    pub quantity: Quantity,
    pub axis_labels: Vec<String>,
    pub cells: Vec<Cell>,
    pub provenance: Provenance,
}

impl ScanResult {
    pub fn values(&self) -> Vec<f64> {
        self.cells.iter().map(|c| c.value).collect()
    }

    pub fn n_failed(&self) -> usize {
        self.cells.iter().filter(|c| !c.is_ok()).count()
    }

    /// Long-format CSV: provenance comments, then `axis…, quantity, status`.
    pub fn to_csv(&self) -> String {
        let mut s = self.provenance.header();
        s.push_str(&self.data_csv());
        s
    }

    /// CSV without the provenance header.
    pub fn data_csv(&self) -> String {
        let mut s = self.axis_labels.join(",");
        s.push_str(&format!(",{},status\n", self.quantity));
        for cell in &self.cells {
            for c in &cell.coords {
                s.push_str(&format!("{c},"));
            }
            s.push_str(&format!("{},{}\n", cell.value, cell.status()));
        }
        s
    }
}

/// Evaluates the scan on every grid cell in parallel. Failed cells are tagged with their
/// error; only a scan in which every cell fails is an error.
pub fn run_scan(spec: &ScanSpec) -> Result<ScanResult> {
    let cells: Vec<Cell> = (0..spec.n_cells())
        .into_par_iter()
        .map(|k| {
            let coords = spec.coordinates(k);
            match spec.params_at(&coords).and_then(|p| evaluate(&p, spec.quantity)) {
                Ok((value, warnings)) => Cell { coords, value, error: None, warnings },
                Err(e) => {
                    log::debug!("scan cell {k} failed: {e}");
                    Cell { coords, value: f64::NAN, error: Some((e.tag().to_owned(), e.to_string())), warnings: vec![] }
                }
            }
        })
        .collect();
    if cells.iter().all(|c| !c.is_ok()) {
        return Err(Error::ScanFailure { cells: cells.len() });
    }
    Ok(ScanResult {
        quantity: spec.quantity,
        axis_labels: spec.axes.iter().map(Axis::label).collect(),
        cells,
        provenance: Provenance::new(spec.to_config_string()),
    })
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// Beam B along the trap axis and beam A at 60° to it: `η_B/η_A = 4`, `Ω_B = ν/2`.
    Colinear60,
    /// 45° geometry tuned for the lowest temperature on the resonance.
    Window45Temperature,
    /// 45° geometry tuned for rate, off resonance, with a 5% Stark-drive error.
    Window45Rate,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::Colinear60, Scenario::Window45Temperature, Scenario::Window45Rate];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Colinear60 => "colinear60",
            Scenario::Window45Temperature => "window45_temperature",
            Scenario::Window45Rate => "window45_rate",
        }
    }

    pub fn beam_angle_deg(self) -> f64 {
        match self {
            Scenario::Colinear60 => 60.0,
            _ => 45.0,
        }
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown scenario `{s}`")))
    }
}

/// Relative Stark-drive error applied in the rate-optimized scenario.
pub const WINDOW45_RATE_OMEGA_B_ERROR: f64 = 0.05;
const REPORT_CUTOFF: usize = 15;
const GAMMA_SWEEP: [f64; 6] = [0.1, 0.25, 0.5, 1.0, 2.0, 4.0];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GammaPoint {
    pub gamma: f64,
    pub n_ss_numeric: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OperatingPointReport {
    pub scenario: Scenario,
    pub beam_angle_deg: f64,
    pub eta_ratio: f64,
    pub params: ModelParams,
    /// `η_B − η_A(ν/Ω_B + 2)` at the nominal drive.
    pub resonance_residual: f64,
    /// Relative offset applied to `Ω_B` for the numeric check.
    pub omega_b_error: f64,
    pub rates: RateCoefficients,
    /// Numeric occupation with the drive error applied.
    pub n_ss_numeric: f64,
    /// Numeric occupation at the nominal drive.
    pub n_ss_numeric_nominal: f64,
    /// `n_ss_numeric` (with the drive error) against the linewidth.
    pub gamma_sweep: Vec<GammaPoint>,
    pub warnings: Vec<Warning>,
}

/// Nominal parameters of a scenario, with `ν = 1` and `Γ = ν`.
pub fn scenario_params(scenario: Scenario) -> Result<ModelParams> {
    let ratio = geometry_eta_ratio(scenario.beam_angle_deg())?;
    let base = ModelParams { eta_a: 0.05, cutoff: REPORT_CUTOFF, ..Default::default() };
    match scenario {
        Scenario::Colinear60 => {
            let p = ModelParams { omega_a: 0.3, delta: 0.0, omega_b: resonance_condition(ratio, base.nu)?, ..base };
            with_resonant_eta_b(&p)
        }
        Scenario::Window45Temperature => {
            let p = ModelParams { omega_a: 0.6, delta: 0.0, omega_b: resonance_condition(ratio, base.nu)?, ..base };
            with_resonant_eta_b(&p)
        }
        // the blue-detuned Raman pair sits at +2ν in this sign convention
        Scenario::Window45Rate => {
            Ok(ModelParams { omega_a: 0.4, omega_b: 0.45, delta: 2.0, eta_b: ratio * base.eta_a, ..base })
        }
    }
}

pub fn operating_point_report(scenario: Scenario) -> Result<OperatingPointReport> {
    let p = scenario_params(scenario)?;
    let rates = heating_components(&p)?;
    let mut warnings = rates.warnings;
    let omega_b_error = if scenario == Scenario::Window45Rate { WINDOW45_RATE_OMEGA_B_ERROR } else { 0.0 };
    let perturbed = ModelParams { omega_b: p.omega_b * (1.0 + omega_b_error), ..p.clone() };
    let (n_ss, w) = n_ss_numeric(&perturbed)?;
    warnings.extend(w);
    let (n_nominal, w) = n_ss_numeric(&p)?;
    warnings.extend(w);
    let gamma_sweep = if scenario == Scenario::Window45Rate {
        GAMMA_SWEEP
            .par_iter()
            .map(|&gamma| {
                let (n, _) = n_ss_numeric(&ModelParams { gamma, ..perturbed.clone() })?;
                Ok(GammaPoint { gamma, n_ss_numeric: n })
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };
    Ok(OperatingPointReport {
        scenario,
        beam_angle_deg: scenario.beam_angle_deg(),
        eta_ratio: p.eta_b / p.eta_a,
        resonance_residual: p.eta_b - p.eta_a * (p.nu / p.omega_b + 2.0),
        omega_b_error,
        rates: rates.value,
        n_ss_numeric: n_ss,
        n_ss_numeric_nominal: n_nominal,
        gamma_sweep,
        params: p,
        warnings,
    })
}
