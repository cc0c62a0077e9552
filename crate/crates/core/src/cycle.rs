//! Quantum Stirling cycle: two isothermal strain strokes joined by two
//! isochoric thermalisations.
//!
//! Stroke heats, net work and bath heats follow the sign convention where a
//! positive heat flows into the working medium and positive work is done on
//! it. The same bookkeeping serves the band-structure medium and the
//! interacting (Monte Carlo) medium.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{band_spectrum, StrainParams};
use crate::thermo::{thermal_point, StatisticsMode, ThermalPoint};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CycleSpec {
    pub theta1: f64,
    pub theta2: f64,
    pub t_hot: f64,
    pub t_cold: f64,
    pub eta_strain: f64,
    pub statistics: StatisticsMode,
}

impl CycleSpec {
    pub fn validate(&self) -> Result<()> {
        StrainParams::new(self.theta1, self.eta_strain)?;
        StrainParams::new(self.theta2, self.eta_strain)?;
        if !(self.t_cold > 0.0) || !(self.t_hot >= self.t_cold) || !self.t_hot.is_finite() {
            return Err(Error::domain(format!(
                "need t_hot >= t_cold > 0, got t_hot = {}, t_cold = {}",
                self.t_hot, self.t_cold
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OperatingMode {
    Engine,
    Refrigerator,
    Accelerator,
    Heater,
    /// At least one of `Q_h`, `Q_c`, `W` is zero within tolerance.
    Boundary,
    /// Sweep cell outside the physical domain (e.g. `T_c > T_h`).
    Invalid,
}

impl OperatingMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            OperatingMode::Engine => "engine",
            OperatingMode::Refrigerator => "refrigerator",
            OperatingMode::Accelerator => "accelerator",
            OperatingMode::Heater => "heater",
            OperatingMode::Boundary => "boundary",
            OperatingMode::Invalid => "invalid",
        }
    }
}

impl fmt::Display for OperatingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CycleResult {
    pub q_ab: f64,
    pub q_bc: f64,
    pub q_cd: f64,
    pub q_da: f64,
    pub work: f64,
    pub q_hot: f64,
    pub q_cold: f64,
    pub mode: OperatingMode,
    /// `eta / eta_max` for an engine, `COP / COP_max` for a refrigerator.
    pub performance: Option<f64>,
}

/// Default mode-boundary tolerance.
pub fn default_tolerance(q_hot: f64, q_cold: f64, work: f64) -> f64 {
    1e-12 * (q_hot.abs() + q_cold.abs() + work.abs() + 1.0)
}

pub fn classify_mode(q_hot: f64, q_cold: f64, work: f64, tol: f64) -> Result<OperatingMode> {
    classify_mode_with(q_hot, q_cold, work, [tol; 3])
}

/// Classification with a separate tolerance for `(Q_h, Q_c, W)`.
pub fn classify_mode_with(q_hot: f64, q_cold: f64, work: f64, tol: [f64; 3]) -> Result<OperatingMode> {
    if tol.iter().any(|t| !(*t >= 0.0)) {
        return Err(Error::domain("mode tolerance must be non-negative"));
    }
    if q_hot.abs() <= tol[0] || q_cold.abs() <= tol[1] || work.abs() <= tol[2] {
        return Ok(OperatingMode::Boundary);
    }
    match (q_hot > 0.0, q_cold > 0.0, work > 0.0) {
        (true, false, false) => Ok(OperatingMode::Engine),
        (false, true, true) => Ok(OperatingMode::Refrigerator),
        (true, false, true) => Ok(OperatingMode::Accelerator),
        (false, false, true) => Ok(OperatingMode::Heater),
        _ => Err(Error::Invariant(format!(
            "sign pattern (Q_h = {q_hot:e}, Q_c = {q_cold:e}, W = {work:e}) violates the second law"
        ))),
    }
}

pub fn engine_efficiency(q_hot: f64, work: f64) -> Result<f64> {
    if !(q_hot > 0.0 && work < 0.0) {
        return Err(Error::domain("efficiency needs Q_h > 0 and W < 0"));
    }
    Ok(work.abs() / q_hot)
}

pub fn refrigerator_cop(q_cold: f64, work: f64) -> Result<f64> {
    if !(q_cold > 0.0 && work > 0.0) {
        return Err(Error::domain("COP needs Q_c > 0 and W > 0"));
    }
    Ok(q_cold / work.abs())
}

/// `(eta_max, COP_max)` of a Carnot machine between the two baths.
pub fn carnot_bounds(t_hot: f64, t_cold: f64) -> Result<(f64, f64)> {
    if !(t_cold > 0.0 && t_hot > t_cold) {
        return Err(Error::domain(format!(
            "Carnot bounds need t_hot > t_cold > 0, got {t_hot}, {t_cold}"
        )));
    }
    Ok((1.0 - t_cold / t_hot, t_cold / (t_hot - t_cold)))
}

/// Minimal equilibrium data the cycle needs at one `(theta, T)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StatePoint {
    pub ln_z: f64,
    pub energy: f64,
}

impl From<&ThermalPoint> for StatePoint {
    fn from(p: &ThermalPoint) -> Self {
        Self {
            ln_z: p.ln_z,
            energy: p.internal_energy,
        }
    }
}

/// The four equilibrium states visited by the cycle.
#[derive(Clone, Copy, Debug)]
pub struct CycleStates {
    pub theta1_hot: StatePoint,
    pub theta2_hot: StatePoint,
    pub theta1_cold: StatePoint,
    pub theta2_cold: StatePoint,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Strokes {
    pub q_ab: f64,
    pub q_bc: f64,
    pub q_cd: f64,
    pub q_da: f64,
    pub work: f64,
    pub q_hot: f64,
    pub q_cold: f64,
}

pub(crate) fn strokes(s: &CycleStates, t_hot: f64, t_cold: f64) -> Result<Strokes> {
    let (h1, h2, c1, c2) = (s.theta1_hot, s.theta2_hot, s.theta1_cold, s.theta2_cold);
    let q_ab = -(h2.energy - h1.energy + t_hot * h2.ln_z - t_hot * h1.ln_z);
    let q_cd = -(c1.energy - c2.energy + t_cold * c1.ln_z - t_cold * c2.ln_z);
    let q_bc = -(c2.energy - h2.energy);
    let q_da = -(h1.energy - c1.energy);
    let work = q_ab + q_bc + q_cd + q_da;
    let q_hot = -(q_ab + q_da);
    let q_cold = -(q_bc + q_cd);

    let closed = -t_hot * (h2.ln_z - h1.ln_z) + t_cold * (c2.ln_z - c1.ln_z);
    let scale = q_hot.abs().max(1.0);
    if (closed - work).abs() > 1e-10 * scale {
        return Err(Error::Invariant(format!(
            "stroke-sum work {work:e} and closed-form work {closed:e} disagree"
        )));
    }
    if (q_hot + q_cold + work).abs() > 1e-10 * scale {
        return Err(Error::Invariant(format!(
            "first law violated: Q_h + Q_c + W = {:e}",
            q_hot + q_cold + work
        )));
    }
    Ok(Strokes {
        q_ab,
        q_bc,
        q_cd,
        q_da,
        work,
        q_hot,
        q_cold,
    })
}

/// Performance relative to the Carnot counterpart for the given mode.
pub(crate) fn relative_performance(
    mode: OperatingMode,
    q_hot: f64,
    q_cold: f64,
    work: f64,
    t_hot: f64,
    t_cold: f64,
) -> Result<Option<f64>> {
    Ok(match mode {
        OperatingMode::Engine => {
            let (eta_max, _) = carnot_bounds(t_hot, t_cold)?;
            Some(engine_efficiency(q_hot, work)? / eta_max)
        }
        OperatingMode::Refrigerator => {
            let (_, cop_max) = carnot_bounds(t_hot, t_cold)?;
            Some(refrigerator_cop(q_cold, work)? / cop_max)
        }
        _ => None,
    })
}

/// Cycle bookkeeping from the four state points, with the default tolerance.
pub fn cycle_from_states(s: &CycleStates, t_hot: f64, t_cold: f64) -> Result<CycleResult> {
    let k = strokes(s, t_hot, t_cold)?;
    let tol = default_tolerance(k.q_hot, k.q_cold, k.work);
    let mode = classify_mode(k.q_hot, k.q_cold, k.work, tol)?;
    let performance = relative_performance(mode, k.q_hot, k.q_cold, k.work, t_hot, t_cold)?;
    if let Some(p) = performance {
        if !(0.0..=1.0 + 1e-9).contains(&p) {
            return Err(Error::Invariant(format!("{mode} performance {p} exceeds the Carnot bound")));
        }
    }
    Ok(CycleResult {
        q_ab: k.q_ab,
        q_bc: k.q_bc,
        q_cd: k.q_cd,
        q_da: k.q_da,
        work: k.work,
        q_hot: k.q_hot,
        q_cold: k.q_cold,
        mode,
        performance,
    })
}

/// Thermal points of one strain value at the two bath temperatures.
pub fn strain_states(
    theta: f64,
    eta_strain: f64,
    temperatures: &[f64],
    mode: StatisticsMode,
    grid_m: usize,
) -> Result<Vec<ThermalPoint>> {
    let p = StrainParams::new(theta, eta_strain)?;
    let spectrum = band_spectrum(&p, grid_m)?;
    temperatures
        .iter()
        .map(|&t| thermal_point(&spectrum, p.theta, t, mode))
        .collect()
}

pub fn run_cycle(spec: &CycleSpec, grid_m: usize) -> Result<CycleResult> {
    spec.validate()?;
    let temps = [spec.t_hot, spec.t_cold];
    let pair = [spec.theta1, spec.theta2];
    let states: Vec<Vec<ThermalPoint>> = pair
        .par_iter()
        .map(|&th| strain_states(th, spec.eta_strain, &temps, spec.statistics, grid_m))
        .collect::<Result<_>>()?;
    let s = CycleStates {
        theta1_hot: (&states[0][0]).into(),
        theta1_cold: (&states[0][1]).into(),
        theta2_hot: (&states[1][0]).into(),
        theta2_cold: (&states[1][1]).into(),
    };
    cycle_from_states(&s, spec.t_hot, spec.t_cold)
}
