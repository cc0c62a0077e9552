//! Static-path approximation for the repulsive Hubbard model.
//!
//! The interaction is decoupled with a classical vector field `m_i` per site
//! (the charge field is frozen at its saddle point). Field configurations are
//! sampled with weight `e^{-beta F{m}}`, where `F{m}` is the free energy of
//! the fermions moving in that field.

pub mod eigen;
pub mod geometry;
pub mod hamiltonian;
pub mod interacting;
pub mod mc;
pub mod observables;
pub mod strain_path;

pub use geometry::{build_geometry, Bond, BondKind, LatticeGeometry, Site, Sublattice};
pub use hamiltonian::{
    build_h_eff, config_free_energy, field_free_energy, AuxFieldConfig, Couplings, EffectiveHamiltonian,
    SpinFermionModel, UpdateScheme, M_CAP,
};
pub use mc::{acceptance_probability, metropolis_sweep, sweep_rng, derive_seed, Chain, McParams, Proposal, SweepStats};
pub use interacting::{
    default_temperature_grid, interacting_cycle, interacting_thermo, sample_medium, tune_mu_half_filling,
    CycleErrors, CycleEstimator, InteractingCycleResult, InteractingSetup, InteractingThermo, LnZEstimator,
    MediumThermo, MuPolicy, ThermoOptions,
};
pub use strain_path::{strain_path_thermo, StrainPathThermo};
pub use observables::{measure_observables, Observables};
