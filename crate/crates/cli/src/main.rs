//! `lkqtm`: command-line driver for bands, band thermodynamics, Stirling
//! cycles, parameter sweeps and SPA runs. Every subcommand writes plain text
//! (CSV or JSON) into `--out`.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lkqtm_core::cycle::{run_cycle, CycleSpec};
use lkqtm_core::lattice::{band_spectrum, band_table, StrainParams, THETA_KAGOME, THETA_LIEB};
use lkqtm_core::spa::{CycleEstimator, InteractingSetup, McParams, MuPolicy};
use lkqtm_core::spa_run::{run_spa, spa_csv, write_spa_outputs, SpaRunConfig};
use lkqtm_core::sweep::{
    interacting_mode_diagram, mode_diagram, temp_map, u_sweep, u_sweep_csv, DEFAULT_GRID_M,
    DEFAULT_INTERACTING_STEPS, DEFAULT_STEPS,
};
use lkqtm_core::thermo::{thermal_point, StatisticsMode};
use lkqtm_core::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "lkqtm", version, about = "Stirling-cycle thermal machine on the strained Lieb-kagome lattice")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Base seed of every Monte Carlo chain.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Medium {
    #[arg(long, default_value_t = 8.0)]
    eta: f64,
    /// `fermi` or `boltzmann`.
    #[arg(long, default_value = "fermi")]
    statistics: StatisticsMode,
    /// Brillouin-zone grid size.
    #[arg(long, default_value_t = DEFAULT_GRID_M)]
    grid_m: usize,
}

#[derive(Args, Debug, Clone)]
struct Mc {
    #[arg(long, default_value_t = 8)]
    l: usize,
    #[arg(long, default_value_t = 300)]
    n_therm: usize,
    #[arg(long, default_value_t = 150)]
    n_meas: usize,
    #[arg(long, default_value_t = 2)]
    cluster_l: usize,
    #[arg(long, default_value_t = 1)]
    measure_every: usize,
    /// Lobatto nodes along the strain path.
    #[arg(long, default_value_t = 5)]
    path_nodes: usize,
    /// `particle-hole` (mu = U/2), `half-filling` (tuned) or a number.
    #[arg(long, default_value = "particle-hole")]
    mu: String,
    /// `strain-path` or `temperature-path`.
    #[arg(long, default_value = "strain-path")]
    estimator: String,
}

impl Mc {
    fn setup(&self, seed: u64) -> Result<(McParams, InteractingSetup)> {
        let (mu_policy, mu) = match self.mu.as_str() {
            "particle-hole" => (MuPolicy::ParticleHole, 0.0),
            "half-filling" => (MuPolicy::HalfFilling, 0.0),
            v => (MuPolicy::Fixed, v.parse().map_err(|_| Error::Config(format!("bad --mu '{v}'")))?),
        };
        let estimator = match self.estimator.as_str() {
            "strain-path" => CycleEstimator::StrainPath,
            "temperature-path" => CycleEstimator::TemperaturePath,
            v => return Err(Error::Config(format!("unknown estimator '{v}'"))),
        };
        let mc = McParams {
            mu,
            n_therm: self.n_therm,
            n_meas: self.n_meas,
            cluster_l: self.cluster_l,
            measure_every: self.measure_every,
            seed,
            ..McParams::default()
        };
        let setup = InteractingSetup { l: self.l, estimator, path_nodes: self.path_nodes, mu_policy, ..InteractingSetup::default() };
        Ok((mc, setup))
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Band energies on the Brillouin-zone grid.
    Bands {
        #[arg(long)]
        theta: f64,
        #[command(flatten)]
        medium: Medium,
    },
    /// ln Z, U, S, F of the band medium over a temperature list.
    Thermo {
        #[arg(long)]
        theta: f64,
        /// Comma-separated temperatures.
        #[arg(long, value_delimiter = ',', required = true)]
        temps: Vec<f64>,
        #[command(flatten)]
        medium: Medium,
    },
    /// One Stirling cycle, printed and written as JSON.
    Cycle {
        #[arg(long)]
        theta1: f64,
        #[arg(long)]
        theta2: f64,
        #[arg(long)]
        t_hot: f64,
        #[arg(long)]
        t_cold: f64,
        #[command(flatten)]
        medium: Medium,
    },
    /// Operating modes over (theta1, theta2).
    ModeDiagram {
        #[arg(long)]
        t_hot: f64,
        #[arg(long)]
        t_cold: f64,
        #[arg(long, default_value_t = DEFAULT_STEPS)]
        steps: usize,
        #[command(flatten)]
        medium: Medium,
    },
    /// Operating modes over (T_h, T_c) at fixed strain values.
    TempMap {
        #[arg(long, default_value_t = THETA_KAGOME)]
        theta1: f64,
        #[arg(long, default_value_t = THETA_LIEB)]
        theta2: f64,
        #[arg(long)]
        t_min: f64,
        #[arg(long)]
        t_max: f64,
        #[arg(long, default_value_t = DEFAULT_STEPS)]
        steps: usize,
        #[command(flatten)]
        medium: Medium,
    },
    /// Interacting engine performance against U.
    USweep {
        #[arg(long, default_value_t = THETA_KAGOME)]
        theta1: f64,
        #[arg(long, default_value_t = THETA_LIEB)]
        theta2: f64,
        #[arg(long, default_value_t = 0.5)]
        t_hot: f64,
        #[arg(long, default_value_t = 0.3)]
        t_cold: f64,
        #[arg(long, default_value_t = 8.0)]
        eta: f64,
        /// Comma-separated U values.
        #[arg(long, value_delimiter = ',', required = true)]
        u: Vec<f64>,
        #[command(flatten)]
        mc: Mc,
    },
    /// SPA observables from a key = value config file.
    SpaRun {
        #[arg(long)]
        config: PathBuf,
    },
    /// Interacting operating modes over (T_h, T_c).
    InteractingModeDiagram {
        #[arg(long, default_value_t = THETA_KAGOME)]
        theta1: f64,
        #[arg(long, default_value_t = THETA_LIEB)]
        theta2: f64,
        #[arg(long)]
        u: f64,
        #[arg(long)]
        t_min: f64,
        #[arg(long)]
        t_max: f64,
        #[arg(long, default_value_t = DEFAULT_INTERACTING_STEPS)]
        steps: usize,
        #[arg(long, default_value_t = 8.0)]
        eta: f64,
        #[command(flatten)]
        mc: Mc,
    },
}

fn write(dir: &Path, name: &str, text: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, text)?;
    Ok(path)
}

fn run(cli: Cli) -> Result<()> {
    let out = cli.out.as_path();
    let written = match cli.command {
        Command::Bands { theta, medium } => {
            let p = StrainParams::new(theta, medium.eta)?;
            let mut s = String::from("kx,ky,e1,e2,e3\n");
            for (k, b) in band_table(&p, medium.grid_m)? {
                let [e1, e2, e3] = b.as_array();
                s.push_str(&format!("{},{},{e1},{e2},{e3}\n", k.kx, k.ky));
            }
            write(out, "bands.csv", &s)?
        }
        Command::Thermo { theta, temps, medium } => {
            let spectrum = band_spectrum(&StrainParams::new(theta, medium.eta)?, medium.grid_m)?;
            let mut s = String::from("T,ln_z,internal_energy,entropy,free_energy\n");
            for t in temps {
                let p = thermal_point(&spectrum, theta, t, medium.statistics)?;
                s.push_str(&format!("{t},{},{},{},{}\n", p.ln_z, p.internal_energy, p.entropy, p.free_energy));
            }
            write(out, "thermo.csv", &s)?
        }
        Command::Cycle { theta1, theta2, t_hot, t_cold, medium } => {
            let spec = CycleSpec { theta1, theta2, t_hot, t_cold, eta_strain: medium.eta, statistics: medium.statistics };
            let r = run_cycle(&spec, medium.grid_m)?;
            let text = serde_json::to_string_pretty(&r).map_err(|e| Error::Config(format!("json: {e}")))?;
            println!("{text}");
            write(out, "cycle.json", &text)?
        }
        Command::ModeDiagram { t_hot, t_cold, steps, medium } => {
            let g = mode_diagram(t_hot, t_cold, steps, medium.eta, medium.statistics, medium.grid_m)?;
            write(out, "mode_diagram.csv", &g.to_csv())?
        }
        Command::TempMap { theta1, theta2, t_min, t_max, steps, medium } => {
            let g = temp_map(theta1, theta2, (t_min, t_max), steps, medium.eta, medium.statistics, medium.grid_m)?;
            write(out, "temp_map.csv", &g.to_csv())?
        }
        Command::USweep { theta1, theta2, t_hot, t_cold, eta, u, mc } => {
            let spec = CycleSpec { theta1, theta2, t_hot, t_cold, eta_strain: eta, statistics: StatisticsMode::Fermi };
            let (p, setup) = mc.setup(cli.seed)?;
            let rows = u_sweep(&spec, &u, &p, &setup)?;
            write(out, "u_sweep.csv", &u_sweep_csv(&spec, &rows))?
        }
        Command::SpaRun { config } => {
            let text = fs::read_to_string(&config)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", config.display())))?;
            let cfg = SpaRunConfig::parse(&text)?;
            let points = run_spa(&cfg)?;
            let dir = if cfg.out_dir.is_absolute() { cfg.out_dir.clone() } else { out.join(&cfg.out_dir) };
            write_spa_outputs(&dir, &spa_csv(&cfg, &points))?;
            dir.join("observables.csv")
        }
        Command::InteractingModeDiagram { theta1, theta2, u, t_min, t_max, steps, eta, mc } => {
            let (p, setup) = mc.setup(cli.seed)?;
            let g = interacting_mode_diagram(theta1, theta2, u, (t_min, t_max), steps, eta, &p, &setup)?;
            write(out, "interacting_mode_diagram.csv", &g.to_csv())?
        }
    };
    eprintln!("wrote {}", written.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
