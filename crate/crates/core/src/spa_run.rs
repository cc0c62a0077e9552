//! Single-strain SPA runs driven by a flat `key = value` config.
//!
//! Required keys: `l, theta, eta, u, t_list, n_therm, n_meas, cluster_l,
//! seed, out_dir`. Optional: `mu` (a number, or `half` to tune half filling
//! per temperature; default `U/2`), `m_cap`, `move_width`, `dos_gamma`,
//! `measure_every`. `#` starts a comment. Every temperature is an
//! independent chain seeded from `seed` and its index in `t_list`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::StrainParams;
use crate::spa::geometry::build_geometry;
use crate::spa::hamiltonian::{SpinFermionModel, UpdateScheme};
use crate::spa::interacting::tune_mu_half_filling;
use crate::spa::mc::{derive_seed, McParams};
use crate::spa::observables::{measure_observables, Observables};

pub const SPA_HEADER: &str = "# qtm-spa v1";

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MuSetting {
    Value(f64),
    HalfFilling,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpaRunConfig {
    pub l: usize,
    pub theta: f64,
    pub eta: f64,
    pub u: f64,
    pub t_list: Vec<f64>,
    pub n_therm: usize,
    pub n_meas: usize,
    pub cluster_l: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub mu: MuSetting,
    pub m_cap: f64,
    pub move_width: f64,
    pub dos_gamma: f64,
    pub measure_every: usize,
}

const REQUIRED: [&str; 10] = ["l", "theta", "eta", "u", "t_list", "n_therm", "n_meas", "cluster_l", "seed", "out_dir"];
const OPTIONAL: [&str; 5] = ["mu", "m_cap", "move_width", "dos_gamma", "measure_every"];

fn parse_value<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Config(format!("bad value '{v}' for key '{key}'")))
}

impl SpaRunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut kv = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            let k = k.trim();
            if !REQUIRED.contains(&k) && !OPTIONAL.contains(&k) {
                return Err(Error::Config(format!("line {}: unknown key '{k}'", n + 1)));
            }
            if kv.insert(k.to_string(), v.trim().to_string()).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key '{k}'", n + 1)));
            }
        }
        if let Some(missing) = REQUIRED.iter().find(|k| !kv.contains_key(**k)) {
            return Err(Error::Config(format!("missing key '{missing}'")));
        }
        let get = |k: &str| kv[k].as_str();
        let defaults = McParams::default();
        let opt = |k: &str, d: f64| kv.get(k).map_or(Ok(d), |v| parse_value::<f64>(k, v));
        let t_list = get("t_list")
            .split(',')
            .map(|t| parse_value::<f64>("t_list", t.trim()))
            .collect::<Result<Vec<_>>>()?;
        let u: f64 = parse_value("u", get("u"))?;
        let mu = match kv.get("mu").map(String::as_str) {
            None => MuSetting::Value(0.5 * u),
            Some("half") => MuSetting::HalfFilling,
            Some(v) => MuSetting::Value(parse_value("mu", v)?),
        };
        let cfg = Self {
            l: parse_value("l", get("l"))?,
            theta: parse_value("theta", get("theta"))?,
            eta: parse_value("eta", get("eta"))?,
            u,
            t_list,
            n_therm: parse_value("n_therm", get("n_therm"))?,
            n_meas: parse_value("n_meas", get("n_meas"))?,
            cluster_l: parse_value("cluster_l", get("cluster_l"))?,
            seed: parse_value("seed", get("seed"))?,
            out_dir: PathBuf::from(get("out_dir")),
            mu,
            m_cap: opt("m_cap", defaults.m_cap)?,
            move_width: opt("move_width", defaults.move_width)?,
            dos_gamma: opt("dos_gamma", defaults.dos_gamma)?,
            measure_every: kv
                .get("measure_every")
                .map_or(Ok(defaults.measure_every), |v| parse_value("measure_every", v))?,
        };
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<()> {
        if self.t_list.is_empty() || self.t_list.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
            return Err(Error::Config("t_list must hold positive temperatures".into()));
        }
        if self.n_meas == 0 {
            return Err(Error::Config("n_meas must be positive".into()));
        }
        Ok(())
    }

    fn params(&self, k: usize) -> McParams {
        McParams {
            beta: 1.0 / self.t_list[k],
            u: self.u,
            mu: match self.mu {
                MuSetting::Value(m) => m,
                MuSetting::HalfFilling => 0.5 * self.u,
            },
            n_therm: self.n_therm,
            n_meas: self.n_meas,
            cluster_l: self.cluster_l,
            seed: derive_seed(self.seed, k as u64),
            m_cap: self.m_cap,
            move_width: self.move_width,
            dos_gamma: self.dos_gamma,
            measure_every: self.measure_every,
        }
    }
}

/// Observables of one temperature plus the chemical potential used.
#[derive(Clone, Debug, PartialEq)]
pub struct SpaPoint {
    pub mu: f64,
    pub n_sites: usize,
    pub obs: Observables,
}

pub fn run_spa(cfg: &SpaRunConfig) -> Result<Vec<SpaPoint>> {
    let g = build_geometry(cfg.l, &StrainParams::new(cfg.theta, cfg.eta)?)?;
    let model = SpinFermionModel::from_geometry(&g, UpdateScheme::Cluster { cluster_l: cfg.cluster_l })?;
    (0..cfg.t_list.len())
        .into_par_iter()
        .map(|k| {
            let mut p = cfg.params(k);
            p.validate()?;
            if cfg.mu == MuSetting::HalfFilling {
                let tp = McParams { seed: derive_seed(p.seed, u64::MAX), ..p.clone() };
                p.mu = tune_mu_half_filling(&model, &tp, 0.01)?.mu;
            }
            let obs = measure_observables(&model, &p)?;
            Ok(SpaPoint { mu: p.mu, n_sites: model.n_sites(), obs })
        })
        .collect()
}

/// CSV texts `(file name, contents)`; energies are per site.
pub fn spa_csv(cfg: &SpaRunConfig, points: &[SpaPoint]) -> Vec<(&'static str, String)> {
    let mut header = String::new();
    let _ = writeln!(header, "{SPA_HEADER}");
    let _ = writeln!(
        header,
        "# l={} theta={} eta={} u={} n_therm={} n_meas={} cluster_l={} seed={}",
        cfg.l, cfg.theta, cfg.eta, cfg.u, cfg.n_therm, cfg.n_meas, cfg.cluster_l, cfg.seed
    );
    let mut obs = header.clone();
    obs.push_str("T,energy,stderr,density,acceptance,mu\n");
    let mut sq = header.clone();
    sq.push_str("T,qx,qy,S\n");
    let mut sq_site = header.clone();
    sq_site.push_str("T,qx,qy,S\n");
    let mut peak = header.clone();
    peak.push_str("T,qx,qy,S,stderr\n");
    let mut dos = header;
    dos.push_str("T,omega,rho\n");
    for p in points {
        let o = &p.obs;
        let t = o.temperature;
        let n = p.n_sites as f64;
        let _ = writeln!(
            obs,
            "{t},{},{},{},{},{}",
            o.energy_mean / n,
            o.energy_stderr / n,
            o.density_mean,
            o.acceptance,
            p.mu
        );
        for s in &o.sq {
            let _ = writeln!(sq, "{t},{},{},{}", s.qx, s.qy, s.s);
        }
        for s in &o.sq_site {
            let _ = writeln!(sq_site, "{t},{},{},{}", s.qx, s.qy, s.s);
        }
        if let Some(a) = &o.afm_peak {
            let _ = writeln!(peak, "{t},{},{},{},{}", a.qx, a.qy, a.s, a.stderr);
        }
        for (w, r) in &o.dos {
            let _ = writeln!(dos, "{t},{w},{r}");
        }
    }
    vec![
        ("observables.csv", obs),
        ("sq.csv", sq),
        ("sq_site.csv", sq_site),
        ("afm_peak.csv", peak),
        ("dos.csv", dos),
    ]
}

pub fn write_spa_outputs(dir: &Path, files: &[(&'static str, String)]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (name, text) in files {
        std::fs::write(dir.join(name), text)?;
    }
    Ok(())
}
