//! Design and analysis of few-mode-fiber true time delay lines.
//!
//! The pipeline has four stages, each usable on its own:
//!
//! * [`materials`]: Sellmeier glass models and piecewise-constant radial
//!   index profiles.
//! * [`mode_solver`]: guided LP modes of a multilayer profile from a
//!   transfer-matrix characteristic function, plus group delay and chromatic
//!   dispersion by finite differences.
//! * [`designer`]: mode-conversion topologies, the linear constraint system
//!   that fixes grating positions, a small dense LP solver and a robustness
//!   study under perturbed mode data.
//! * [`link`]: per-sample delays versus wavelength, tunability and the RF
//!   response of the resulting tapped delay line.
//!
//! Data-parallel loops (determinant scans, wavelength sweeps, perturbation
//! trials) go through [`exec`], which uses rayon when the `parallel` feature
//! is enabled and always merges results in input order.

pub mod bessel;
pub mod designer;
pub mod diagnostics;
pub mod exec;
pub mod fmt;
pub mod grid;
pub mod link;
pub mod materials;
pub mod mode_solver;
mod textfile;

pub use designer::{
    assemble_constraints, lpg_positions, perturb_and_redesign, solve_placements, ConversionGraph,
    DesignError, DesignTargets, DispersionRule, LinearSystem, LpgPosition, PerturbationSpec,
    PlacementSolution, RobustnessReport,
};
pub use diagnostics::{Diagnostic, Diagnostics};
pub use exec::Execution;
pub use link::{
    rf_response, sample_delays_first_order, sample_delays_numeric, tunability_report, DelayCurve,
    DelayModel, LinkError, LpgBandwidth, RfResponse, TunabilityReport,
};
pub use materials::{
    material_index, FiberProfile, Layer, MaterialError, MaterialKind, MaterialModel, Sellmeier,
};
pub use mode_solver::{
    characteristic_value, dispersion, find_modes, group_delay, mode_table, sweep_modes, ModeId,
    ModeRecord, ModeTable, SolverError, SolverOptions, SweepResult,
};

/// Speed of light in vacuum, km/s.
pub const SPEED_OF_LIGHT_KM_PER_S: f64 = 299_792.458;

/// `1/c` expressed in ps/km.
pub(crate) const PS_PER_KM_PER_UNIT_INDEX: f64 = 1e12 / SPEED_OF_LIGHT_KM_PER_S;

/// Converts `λ · d²n/dλ²` (1/µm) into ps/(km·nm).
pub(crate) const DISPERSION_SCALE: f64 = 1e12 / (SPEED_OF_LIGHT_KM_PER_S * 1e3);
