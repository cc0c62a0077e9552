//! Parameter sweeps over the cycle and their CSV form.
//!
//! Grids are evaluated as a parallel map whose results are gathered in cell
//! order, so serial and parallel runs emit identical bytes.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::cycle::{cycle_from_states, CycleResult, CycleSpec, CycleStates, OperatingMode, StatePoint};
use crate::error::{Error, Result};
use crate::lattice::{band_spectrum, StrainParams, THETA_KAGOME, THETA_LIEB};
use crate::spa::interacting::{sample_medium, CycleErrors, InteractingSetup};
use crate::spa::mc::{derive_seed, McParams};
use crate::thermo::{thermal_point, StatisticsMode};

pub const GRID_HEADER: &str = "# qtm-grid v1";
pub const USWEEP_HEADER: &str = "# qtm-usweep v1";

/// Default cells per axis of a non-interacting map.
pub const DEFAULT_STEPS: usize = 61;
/// Default cells per axis of an interacting map.
pub const DEFAULT_INTERACTING_STEPS: usize = 13;
/// Default momentum-grid size of the band quadrature in sweeps.
pub const DEFAULT_GRID_M: usize = 200;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Axis {
    pub name: String,
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl Axis {
    pub fn new(name: &str, min: f64, max: f64, steps: usize) -> Result<Self> {
        if steps < 2 {
            return Err(Error::domain(format!("axis {name} needs at least 2 steps")));
        }
        if !(min.is_finite() && max.is_finite() && min <= max) {
            return Err(Error::domain(format!("axis {name} has bad range [{min}, {max}]")));
        }
        Ok(Self { name: name.to_string(), min, max, steps })
    }

    /// Evenly spaced values, endpoints exact.
    pub fn values(&self) -> Vec<f64> {
        let n = self.steps - 1;
        (0..self.steps)
            .map(|i| if i == n { self.max } else { self.min + (self.max - self.min) * i as f64 / n as f64 })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepCell {
    pub coord1: f64,
    pub coord2: f64,
    pub result: CycleResult,
    pub stderr: Option<CycleErrors>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepGrid {
    pub axis1: Axis,
    pub axis2: Axis,
    /// Remaining parameters as `(name, value)`.
    pub fixed: Vec<(String, String)>,
    /// Row-major: `axis1` outer, `axis2` inner.
    pub cells: Vec<SweepCell>,
}

impl SweepGrid {
    pub fn count(&self, mode: OperatingMode) -> usize {
        self.cells.iter().filter(|c| c.result.mode == mode).count()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{GRID_HEADER}");
        for (k, a) in [("axis1", &self.axis1), ("axis2", &self.axis2)] {
            let _ = writeln!(s, "# {k}={} min={} max={} steps={}", a.name, a.min, a.max, a.steps);
        }
        for (k, v) in &self.fixed {
            let _ = writeln!(s, "# {k}={v}");
        }
        let with_err = self.cells.iter().any(|c| c.stderr.is_some());
        s.push_str("coord1,coord2,q_hot,q_cold,work,mode,performance");
        if with_err {
            s.push_str(",stderr_q_hot,stderr_q_cold,stderr_work,stderr_performance");
        }
        s.push('\n');
        for c in &self.cells {
            let r = &c.result;
            let _ = write!(
                s,
                "{},{},{},{},{},{},{}",
                c.coord1,
                c.coord2,
                r.q_hot,
                r.q_cold,
                r.work,
                r.mode,
                opt(r.performance)
            );
            if with_err {
                match &c.stderr {
                    Some(e) => {
                        let _ = write!(s, ",{},{},{},{}", e.q_hot, e.q_cold, e.work, opt(e.performance));
                    }
                    None => s.push_str(",,,,"),
                }
            }
            s.push('\n');
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn invalid_result() -> CycleResult {
    CycleResult {
        q_ab: f64::NAN,
        q_bc: f64::NAN,
        q_cd: f64::NAN,
        q_da: f64::NAN,
        work: f64::NAN,
        q_hot: f64::NAN,
        q_cold: f64::NAN,
        mode: OperatingMode::Invalid,
        performance: None,
    }
}

/// Band-structure state points at every `(theta, T)` pair.
fn band_states(
    thetas: &[f64],
    temps: &[f64],
    eta_strain: f64,
    statistics: StatisticsMode,
    grid_m: usize,
) -> Result<Vec<Vec<StatePoint>>> {
    thetas
        .par_iter()
        .map(|&th| {
            let p = StrainParams::new(th, eta_strain)?;
            let spec = band_spectrum(&p, grid_m)?;
            temps
                .iter()
                .map(|&t| thermal_point(&spec, p.theta, t, statistics).map(|tp| StatePoint::from(&tp)))
                .collect()
        })
        .collect()
}

/// Non-interacting operating-mode map over `(theta1, theta2)` in
/// `[pi/2, 2pi/3]^2` at fixed bath temperatures.
pub fn mode_diagram(
    t_hot: f64,
    t_cold: f64,
    steps: usize,
    eta_strain: f64,
    statistics: StatisticsMode,
    grid_m: usize,
) -> Result<SweepGrid> {
    if !(t_hot > t_cold && t_cold > 0.0) {
        return Err(Error::domain(format!("mode diagram needs t_hot > t_cold > 0, got {t_hot}, {t_cold}")));
    }
    let axis1 = Axis::new("theta1", THETA_LIEB, THETA_KAGOME, steps)?;
    let axis2 = Axis::new("theta2", THETA_LIEB, THETA_KAGOME, steps)?;
    let thetas = axis1.values();
    let states = band_states(&thetas, &[t_hot, t_cold], eta_strain, statistics, grid_m)?;
    let cells = (0..steps * steps)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx / steps, idx % steps);
            let s = CycleStates {
                theta1_hot: states[i][0],
                theta1_cold: states[i][1],
                theta2_hot: states[j][0],
                theta2_cold: states[j][1],
            };
            Ok(SweepCell {
                coord1: thetas[i],
                coord2: thetas[j],
                result: cycle_from_states(&s, t_hot, t_cold)?,
                stderr: None,
            })
        })
        .collect::<Result<_>>()?;
    Ok(SweepGrid {
        axis1,
        axis2,
        fixed: vec![
            ("t_hot".into(), t_hot.to_string()),
            ("t_cold".into(), t_cold.to_string()),
            ("eta_strain".into(), eta_strain.to_string()),
            ("statistics".into(), statistics.to_string()),
            ("grid_m".into(), grid_m.to_string()),
        ],
        cells,
    })
}

/// Non-interacting map over `(T_h, T_c)` in `t_range^2`; cells with
/// `T_c > T_h` are emitted as `invalid`.
pub fn temp_map(
    theta1: f64,
    theta2: f64,
    t_range: (f64, f64),
    steps: usize,
    eta_strain: f64,
    statistics: StatisticsMode,
    grid_m: usize,
) -> Result<SweepGrid> {
    if !(t_range.0 > 0.0) {
        return Err(Error::domain("temperature range must be positive"));
    }
    let axis1 = Axis::new("t_hot", t_range.0, t_range.1, steps)?;
    let axis2 = Axis::new("t_cold", t_range.0, t_range.1, steps)?;
    let temps = axis1.values();
    let states = band_states(&[theta1, theta2], &temps, eta_strain, statistics, grid_m)?;
    let cells = (0..steps * steps)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx / steps, idx % steps);
            let (th, tc) = (temps[i], temps[j]);
            let result = if tc > th {
                invalid_result()
            } else {
                let s = CycleStates {
                    theta1_hot: states[0][i],
                    theta1_cold: states[0][j],
                    theta2_hot: states[1][i],
                    theta2_cold: states[1][j],
                };
                cycle_from_states(&s, th, tc)?
            };
            Ok(SweepCell { coord1: th, coord2: tc, result, stderr: None })
        })
        .collect::<Result<_>>()?;
    Ok(SweepGrid {
        axis1,
        axis2,
        fixed: vec![
            ("theta1".into(), theta1.to_string()),
            ("theta2".into(), theta2.to_string()),
            ("eta_strain".into(), eta_strain.to_string()),
            ("statistics".into(), statistics.to_string()),
            ("grid_m".into(), grid_m.to_string()),
        ],
        cells,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct USweepRow {
    pub u: f64,
    pub mode: OperatingMode,
    /// `eta / eta_max` when the cell is an engine.
    pub performance: Option<f64>,
    pub stderr_performance: Option<f64>,
    pub work: f64,
    pub stderr_work: f64,
    pub q_hot: f64,
    pub stderr_q_hot: f64,
    pub mu: [f64; 2],
}

/// Interacting engine performance as a function of `U`. Each `U` runs
/// independent chains seeded from `mc.seed` and the value's index.
pub fn u_sweep(
    spec: &CycleSpec,
    u_values: &[f64],
    mc: &McParams,
    setup: &InteractingSetup,
) -> Result<Vec<USweepRow>> {
    spec.validate()?;
    let media = u_values
        .par_iter()
        .enumerate()
        .map(|(i, &u)| {
            let p = McParams { seed: derive_seed(mc.seed, i as u64), ..mc.clone() };
            sample_medium(spec.theta1, spec.theta2, spec.eta_strain, u, &p, setup, &[spec.t_hot, spec.t_cold])
        })
        .collect::<Result<Vec<_>>>()?;
    u_values
        .iter()
        .enumerate()
        .map(|(i, &u)| {
            let r = media[i].cycle(spec)?;
            let engine = r.cycle.mode == OperatingMode::Engine;
            Ok(USweepRow {
                u,
                mode: r.cycle.mode,
                performance: r.cycle.performance.filter(|_| engine),
                stderr_performance: r.stderr.performance.filter(|_| engine),
                work: r.cycle.work,
                stderr_work: r.stderr.work,
                q_hot: r.cycle.q_hot,
                stderr_q_hot: r.stderr.q_hot,
                mu: r.mu,
            })
        })
        .collect()
}

pub fn u_sweep_csv(spec: &CycleSpec, rows: &[USweepRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{USWEEP_HEADER}");
    let _ = writeln!(
        s,
        "# theta1={} theta2={} t_hot={} t_cold={} eta_strain={}",
        spec.theta1, spec.theta2, spec.t_hot, spec.t_cold, spec.eta_strain
    );
    s.push_str("u,mode,performance,stderr_performance,work,stderr_work,q_hot,stderr_q_hot,mu1,mu2\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            r.u,
            r.mode,
            opt(r.performance),
            opt(r.stderr_performance),
            r.work,
            r.stderr_work,
            r.q_hot,
            r.stderr_q_hot,
            r.mu[0],
            r.mu[1]
        );
    }
    s
}

/// Interacting map over `(T_h, T_c)`. The medium is sampled once at every
/// axis temperature; every valid cell is then an interacting cycle on those
/// shared runs.
pub fn interacting_mode_diagram(
    theta1: f64,
    theta2: f64,
    u: f64,
    t_range: (f64, f64),
    steps: usize,
    eta_strain: f64,
    mc: &McParams,
    setup: &InteractingSetup,
) -> Result<SweepGrid> {
    if !(t_range.0 > 0.0) {
        return Err(Error::domain("temperature range must be positive"));
    }
    let axis1 = Axis::new("t_hot", t_range.0, t_range.1, steps)?;
    let axis2 = Axis::new("t_cold", t_range.0, t_range.1, steps)?;
    let temps = axis1.values();
    let medium = sample_medium(theta1, theta2, eta_strain, u, mc, setup, &temps)?;
    let cells = (0..steps * steps)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx / steps, idx % steps);
            let (th, tc) = (temps[i], temps[j]);
            if tc > th {
                return Ok(SweepCell { coord1: th, coord2: tc, result: invalid_result(), stderr: None });
            }
            let spec = CycleSpec {
                theta1,
                theta2,
                t_hot: th,
                t_cold: tc,
                eta_strain,
                statistics: StatisticsMode::Fermi,
            };
            let r = medium.cycle(&spec)?;
            Ok(SweepCell { coord1: th, coord2: tc, result: r.cycle, stderr: Some(r.stderr) })
        })
        .collect::<Result<_>>()?;
    Ok(SweepGrid {
        axis1,
        axis2,
        fixed: vec![
            ("theta1".into(), theta1.to_string()),
            ("theta2".into(), theta2.to_string()),
            ("u".into(), u.to_string()),
            ("eta_strain".into(), eta_strain.to_string()),
            ("l".into(), setup.l.to_string()),
            ("estimator".into(), format!("{:?}", setup.estimator)),
            ("mu_policy".into(), format!("{:?}", setup.mu_policy)),
            ("seed".into(), mc.seed.to_string()),
        ],
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_values_hit_endpoints() {
        let a = Axis::new("x", THETA_LIEB, THETA_KAGOME, 61).unwrap();
        let v = a.values();
        assert_eq!(v.len(), 61);
        assert_eq!(v[0], THETA_LIEB);
        assert_eq!(v[60], THETA_KAGOME);
        assert!(Axis::new("x", 0.0, 1.0, 1).is_err());
        assert!(Axis::new("x", 1.0, 0.0, 3).is_err());
    }

    #[test]
    fn diagonal_cells_are_boundary() {
        let g = mode_diagram(0.02, 0.01, 7, 8.0, StatisticsMode::Fermi, 40).unwrap();
        assert_eq!(g.cells.len(), 49);
        for c in g.cells.iter().filter(|c| c.coord1 == c.coord2) {
            assert_eq!(c.result.mode, OperatingMode::Boundary);
            assert_eq!(c.result.work, 0.0);
        }
    }

    #[test]
    fn temp_map_marks_inverted_cells() {
        let g = temp_map(THETA_KAGOME, THETA_LIEB, (0.01, 0.1), 5, 8.0, StatisticsMode::Fermi, 30).unwrap();
        for c in &g.cells {
            assert_eq!(c.result.mode == OperatingMode::Invalid, c.coord2 > c.coord1);
        }
        let csv = g.to_csv();
        assert!(csv.starts_with(GRID_HEADER));
        assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 26);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(mode_diagram(0.01, 0.02, 5, 8.0, StatisticsMode::Fermi, 20).is_err());
        assert!(temp_map(1.8, 2.0, (0.0, 0.1), 5, 8.0, StatisticsMode::Fermi, 20).is_err());
    }

    #[test]
    fn csv_is_deterministic() {
        let a = mode_diagram(0.03, 0.01, 5, 8.0, StatisticsMode::Fermi, 30).unwrap().to_csv();
        let b = mode_diagram(0.03, 0.01, 5, 8.0, StatisticsMode::Fermi, 30).unwrap().to_csv();
        assert_eq!(a, b);
    }
}
