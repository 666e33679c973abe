//! Guided LP modes of step-wise profiles, with group delay and dispersion.
//!
//! Roots of the transfer-matrix characteristic function are bracketed on a
//! uniform `n_eff` grid and refined by bisection. Derivatives with respect
//! to wavelength split `n_eff = n_clad + (n_eff - n_clad)`: the cladding
//! glass term is differentiated in closed form from its Sellmeier equation,
//! the waveguide term by central differences of solved roots.

mod characteristic;
mod table;

use thiserror::Error;

use crate::exec::{self, Execution};
use crate::materials::{FiberProfile, MaterialError};
use crate::{DISPERSION_SCALE, PS_PER_KM_PER_UNIT_INDEX};

use characteristic::LayerStack;
pub use table::{
    read_mode_tables, write_mode_tables, ModeId, ModeRecord, ModeTable, MODE_TABLE_HEADER,
};

/// Highest azimuthal order scanned before giving up.
const MAX_AZIMUTHAL_ORDER: usize = 200;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error(transparent)]
    Material(#[from] MaterialError),
    #[error("invalid solver options: {0}")]
    Options(String),
    #[error("trial index {n_eff} outside the guided range ({lower}, {upper})")]
    OutOfGuidedRange { n_eff: f64, lower: f64, upper: f64 },
    #[error("l = {l}: sign change in n_eff bracket [{lower}, {upper}] did not refine to a root (residual {residual:e})")]
    BracketFailure {
        l: usize,
        lower: f64,
        upper: f64,
        residual: f64,
    },
    #[error("{mode} is not guided at {wavelength_um} µm")]
    ModeLost { mode: ModeId, wavelength_um: f64 },
    #[error("invalid wavelength grid: {0}")]
    Grid(String),
    #[error("{mode}: finite differences not converged (halving the step moves tau by {tau_change:e} ps/km, D by {d_change:e} ps/(km nm))")]
    NotConverged {
        mode: ModeId,
        tau_change: f64,
        d_change: f64,
    },
}

/// Largest change in group delay (ps/km) and dispersion (ps/(km·nm)) that
/// halving the finite-difference step may cause.
pub const FD_TOLERANCE: (f64, f64) = (0.1, 0.05);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Uniform `n_eff` samples per azimuthal order, at least 500.
    pub scan_points: usize,
    /// Bisection stops once the `n_eff` bracket is narrower than this.
    pub root_tol: f64,
    /// Distance kept from `n_clad` and `n_max` at the scan ends.
    pub edge_margin: f64,
    /// Finite-difference wavelength step, µm.
    pub fd_step_um: f64,
    pub execution: Execution,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            scan_points: 2000,
            root_tol: 1e-14,
            edge_margin: 1e-7,
            fd_step_um: 5e-4,
            execution: Execution::default(),
        }
    }
}

impl SolverOptions {
    fn validate(&self) -> Result<(), SolverError> {
        if self.scan_points < 500 {
            return Err(SolverError::Options(format!(
                "scan_points = {} (need at least 500)",
                self.scan_points
            )));
        }
        if !(self.root_tol > 0.0 && self.root_tol <= 1e-10) {
            return Err(SolverError::Options(format!(
                "root_tol = {} (need 0 < root_tol <= 1e-10)",
                self.root_tol
            )));
        }
        if !(self.edge_margin > 0.0 && self.fd_step_um > 0.0) {
            return Err(SolverError::Options(
                "edge_margin and fd_step_um must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// A solved guided mode at one wavelength.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuidedMode {
    pub id: ModeId,
    pub n_eff: f64,
    /// `n_eff - n_clad`, carried separately at full relative precision.
    pub excess: f64,
}

/// Boundary-matching determinant for azimuthal order `l` at a trial index.
///
/// Zero exactly at guided effective indices and continuous in the trial
/// index over the whole guided range `(n_clad, n_max)`.
pub fn characteristic_value(
    profile: &FiberProfile,
    l: usize,
    n_eff_trial: f64,
    wavelength_um: f64,
) -> Result<f64, SolverError> {
    let stack = LayerStack::new(profile, wavelength_um)?;
    let upper = profile.max_index(wavelength_um)?;
    if !(n_eff_trial > stack.n_clad && n_eff_trial < upper) {
        return Err(SolverError::OutOfGuidedRange {
            n_eff: n_eff_trial,
            lower: stack.n_clad,
            upper,
        });
    }
    Ok(stack.evaluate(l, stack.t_from_n_eff(n_eff_trial)).value)
}

/// All guided modes at `wavelength_um`, sorted by descending `n_eff`.
///
/// Orders `l = 0, 1, …` are scanned until one yields no root. A profile
/// without any raised layer returns an empty list.
pub fn find_modes(
    profile: &FiberProfile,
    wavelength_um: f64,
    options: &SolverOptions,
) -> Result<Vec<GuidedMode>, SolverError> {
    options.validate()?;
    let stack = LayerStack::new(profile, wavelength_um)?;
    let n_max = profile.max_index(wavelength_um)?;
    let lower = stack.n_clad + options.edge_margin;
    let upper = n_max - options.edge_margin;
    if upper <= lower {
        return Ok(Vec::new());
    }
    let grid: Vec<f64> = (0..options.scan_points)
        .map(|i| {
            let n = lower + (upper - lower) * i as f64 / (options.scan_points - 1) as f64;
            stack.t_from_n_eff(n)
        })
        .collect();

    let mut modes = Vec::new();
    for l in 0..MAX_AZIMUTHAL_ORDER {
        let roots = roots_for_order(&stack, l, &grid, options)?;
        if roots.is_empty() {
            break;
        }
        // descending n_eff within l assigns m = 1, 2, ...
        for (i, t) in roots.into_iter().rev().enumerate() {
            modes.push(GuidedMode {
                id: ModeId::new(l as u32, i as u32 + 1),
                n_eff: stack.n_eff(t),
                excess: stack.excess(t),
            });
        }
    }
    modes.sort_by(|a, b| b.n_eff.total_cmp(&a.n_eff));
    Ok(modes)
}

/// Roots in `t` (ascending) for one azimuthal order.
fn roots_for_order(
    stack: &LayerStack,
    l: usize,
    grid: &[f64],
    options: &SolverOptions,
) -> Result<Vec<f64>, SolverError> {
    let values = exec::map(options.execution, grid, |&t| stack.evaluate(l, t).value);
    let t_tol = options.root_tol * 2.0 * stack.n_clad;
    let mut roots = Vec::new();
    let mut i = 0;
    while i + 1 < grid.len() {
        let (a, b) = (values[i], values[i + 1]);
        if a == 0.0 {
            roots.push(grid[i]);
        } else if b != 0.0 && (a < 0.0) != (b < 0.0) {
            roots.push(bisect(stack, l, grid[i], grid[i + 1], a, t_tol)?);
        }
        i += 1;
    }
    if values[grid.len() - 1] == 0.0 {
        roots.push(grid[grid.len() - 1]);
    }
    Ok(roots)
}

fn bisect(
    stack: &LayerStack,
    l: usize,
    mut lo: f64,
    mut hi: f64,
    mut f_lo: f64,
    t_tol: f64,
) -> Result<f64, SolverError> {
    let (t0, t1) = (lo, hi);
    let mut f_hi = stack.evaluate(l, hi).value;
    while hi - lo > t_tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = stack.evaluate(l, mid).value;
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if (f_mid < 0.0) == (f_lo < 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
            f_hi = f_mid;
        }
    }
    // one false-position step inside the final bracket
    let root = (lo - f_lo * (hi - lo) / (f_hi - f_lo)).clamp(lo, hi);
    let eval = stack.evaluate(l, root);
    if !(eval.value.abs() <= 1e-8 * eval.scale) {
        return Err(SolverError::BracketFailure {
            l,
            lower: stack.n_eff(t0),
            upper: stack.n_eff(t1),
            residual: eval.value / eval.scale,
        });
    }
    Ok(root)
}

/// Group delay (ps/km) and dispersion (ps/(km·nm)) of one mode from three
/// solves at `λ0 - δλ`, `λ0`, `λ0 + δλ`.
fn delay_and_dispersion(
    profile: &FiberProfile,
    lambda0_um: f64,
    step_um: f64,
    excess: [f64; 3],
) -> Result<(f64, f64), SolverError> {
    let [_, dn_clad, d2n_clad] = profile.cladding_derivatives(lambda0_um)?;
    let n_clad = profile.cladding_index(lambda0_um)?;
    let [minus, center, plus] = excess;
    let d1 = dn_clad + (plus - minus) / (2.0 * step_um);
    let d2 = d2n_clad + (plus - 2.0 * center + minus) / (step_um * step_um);
    let n_eff = n_clad + center;
    let tau = (n_eff - lambda0_um * d1) * PS_PER_KM_PER_UNIT_INDEX;
    let dispersion = -lambda0_um * d2 * DISPERSION_SCALE;
    Ok((tau, dispersion))
}

/// Follows each reference mode to the nearest same-`l` mode of `other`.
fn continue_modes(reference: &[GuidedMode], other: &[GuidedMode]) -> Vec<Option<GuidedMode>> {
    let mut taken = vec![false; other.len()];
    reference
        .iter()
        .map(|r| {
            let best = other
                .iter()
                .enumerate()
                .filter(|(i, o)| o.id.l == r.id.l && !taken[*i])
                .min_by(|a, b| {
                    (a.1.n_eff - r.n_eff)
                        .abs()
                        .total_cmp(&(b.1.n_eff - r.n_eff).abs())
                })
                .map(|(i, _)| i);
            best.map(|i| {
                taken[i] = true;
                other[i]
            })
        })
        .collect()
}

type Lenient = (ModeTable, Vec<(ModeId, f64)>, Vec<SolverError>);

/// Mode table at `λ0`. Modes that cannot be followed to `λ0 ± δλ`, and
/// failed convergence checks, are returned separately instead of failing
/// the whole table.
fn mode_table_lenient(
    profile: &FiberProfile,
    lambda0_um: f64,
    options: &SolverOptions,
) -> Result<Lenient, SolverError> {
    let h = options.fd_step_um;
    let center = find_modes(profile, lambda0_um, options)?;
    let follow = |lambda: f64| -> Result<Vec<Option<GuidedMode>>, SolverError> {
        Ok(continue_modes(
            &center,
            &find_modes(profile, lambda, options)?,
        ))
    };
    let minus = follow(lambda0_um - h)?;
    let plus = follow(lambda0_um + h)?;
    let half_minus = follow(lambda0_um - 0.5 * h)?;
    let half_plus = follow(lambda0_um + 0.5 * h)?;

    let mut records = Vec::new();
    let mut lost = Vec::new();
    let mut unconverged = Vec::new();
    for (i, c) in center.iter().enumerate() {
        let neighbours = [
            (minus[i], lambda0_um - h),
            (plus[i], lambda0_um + h),
            (half_minus[i], lambda0_um - 0.5 * h),
            (half_plus[i], lambda0_um + 0.5 * h),
        ];
        if let Some((_, wavelength)) = neighbours.iter().find(|(m, _)| m.is_none()) {
            lost.push((c.id, *wavelength));
            continue;
        }
        let [m, p, hm, hp] = neighbours.map(|(m, _)| m.unwrap().excess);
        let (tau, d) = delay_and_dispersion(profile, lambda0_um, h, [m, c.excess, p])?;
        let (tau_half, d_half) =
            delay_and_dispersion(profile, lambda0_um, 0.5 * h, [hm, c.excess, hp])?;
        let (tau_change, d_change) = ((tau - tau_half).abs(), (d - d_half).abs());
        if !(tau_change <= FD_TOLERANCE.0 && d_change <= FD_TOLERANCE.1) {
            unconverged.push(SolverError::NotConverged {
                mode: c.id,
                tau_change,
                d_change,
            });
        }
        records.push(ModeRecord {
            id: c.id,
            n_eff: c.n_eff,
            tau_ps_per_km: tau,
            dispersion_ps_per_km_nm: d,
        });
    }
    let table = ModeTable::new(lambda0_um * 1e3, records).map_err(SolverError::Options)?;
    Ok((table, lost, unconverged))
}

/// Full [`ModeTable`] at `λ0`: effective index, group delay and dispersion
/// of every guided mode. Every mode is also differenced at half the step
/// and must agree within [`FD_TOLERANCE`].
pub fn mode_table(
    profile: &FiberProfile,
    lambda0_um: f64,
    options: &SolverOptions,
) -> Result<ModeTable, SolverError> {
    let (table, lost, unconverged) = mode_table_lenient(profile, lambda0_um, options)?;
    if let Some(&(mode, wavelength_um)) = lost.first() {
        return Err(SolverError::ModeLost {
            mode,
            wavelength_um,
        });
    }
    match unconverged.into_iter().next() {
        Some(e) => Err(e),
        None => Ok(table),
    }
}

fn single_mode(
    profile: &FiberProfile,
    mode: ModeId,
    lambda0_um: f64,
    step_um: f64,
    options: &SolverOptions,
) -> Result<(f64, f64), SolverError> {
    let at = |lambda: f64| -> Result<Vec<GuidedMode>, SolverError> {
        Ok(find_modes(profile, lambda, options)?
            .into_iter()
            .filter(|g| g.id.l == mode.l)
            .collect())
    };
    let center = at(lambda0_um)?;
    let c = *center
        .iter()
        .find(|g| g.id == mode)
        .ok_or(SolverError::ModeLost {
            mode,
            wavelength_um: lambda0_um,
        })?;
    let mut excess = [0.0, c.excess, 0.0];
    for (slot, lambda) in [(0, lambda0_um - step_um), (2, lambda0_um + step_um)] {
        let follow = continue_modes(&[c], &at(lambda)?)[0].ok_or(SolverError::ModeLost {
            mode,
            wavelength_um: lambda,
        })?;
        excess[slot] = follow.excess;
    }
    delay_and_dispersion(profile, lambda0_um, step_um, excess)
}

/// Group delay per unit length of one mode, ps/km.
pub fn group_delay(
    profile: &FiberProfile,
    mode: ModeId,
    lambda0_um: f64,
    step_um: f64,
    options: &SolverOptions,
) -> Result<f64, SolverError> {
    single_mode(profile, mode, lambda0_um, step_um, options).map(|(tau, _)| tau)
}

/// Chromatic dispersion of one mode, ps/(km·nm).
pub fn dispersion(
    profile: &FiberProfile,
    mode: ModeId,
    lambda0_um: f64,
    step_um: f64,
    options: &SolverOptions,
) -> Result<f64, SolverError> {
    single_mode(profile, mode, lambda0_um, step_um, options).map(|(_, d)| d)
}

/// A mode dropped from a sweep because it reached cutoff.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepWarning {
    pub wavelength_nm: f64,
    pub mode: ModeId,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub tables: Vec<ModeTable>,
    pub warnings: Vec<SweepWarning>,
}

/// Mode tables over an inclusive wavelength grid (nm), with mode identity
/// carried from each step to the next by nearest `n_eff`.
pub fn sweep_modes(
    profile: &FiberProfile,
    start_nm: f64,
    stop_nm: f64,
    step_nm: f64,
    options: &SolverOptions,
) -> Result<SweepResult, SolverError> {
    let wavelengths =
        crate::grid::uniform(start_nm, stop_nm, step_nm).map_err(SolverError::Grid)?;
    // each step solves serially inside; the steps themselves run concurrently
    let inner = SolverOptions {
        execution: Execution::Serial,
        ..*options
    };
    let solved = exec::map(options.execution, &wavelengths, |&nm| {
        mode_table_lenient(profile, nm * 1e-3, &inner)
    });

    let mut tables: Vec<ModeTable> = Vec::with_capacity(wavelengths.len());
    let mut warnings = Vec::new();
    for (nm, result) in wavelengths.iter().zip(solved) {
        let (table, lost, unconverged) = result?;
        for (mode, at) in lost {
            warnings.push(SweepWarning {
                wavelength_nm: *nm,
                mode,
                message: format!("{mode} reaches cutoff near {} nm", at * 1e3),
            });
        }
        for e in unconverged {
            if let SolverError::NotConverged { mode, .. } = e {
                warnings.push(SweepWarning {
                    wavelength_nm: *nm,
                    mode,
                    message: e.to_string(),
                });
            }
        }
        let table = match tables.last() {
            None => table,
            Some(previous) => relabel(previous, table, *nm, &mut warnings),
        };
        tables.push(table);
    }
    Ok(SweepResult { tables, warnings })
}

fn relabel(
    previous: &ModeTable,
    current: ModeTable,
    wavelength_nm: f64,
    warnings: &mut Vec<SweepWarning>,
) -> ModeTable {
    let as_guided = |t: &ModeTable| -> Vec<GuidedMode> {
        t.modes()
            .iter()
            .map(|r| GuidedMode {
                id: r.id,
                n_eff: r.n_eff,
                excess: 0.0,
            })
            .collect()
    };
    let prev = as_guided(previous);
    let cur = as_guided(&current);
    let matches = continue_modes(&prev, &cur);
    let mut records = Vec::new();
    let mut used = vec![false; cur.len()];
    for (p, m) in prev.iter().zip(matches) {
        match m {
            Some(m) => {
                let idx = cur.iter().position(|c| c.id == m.id).unwrap();
                used[idx] = true;
                records.push(ModeRecord {
                    id: p.id,
                    ..current.modes()[idx]
                });
            }
            None => warnings.push(SweepWarning {
                wavelength_nm,
                mode: p.id,
                message: format!("{} dropped: no longer guided", p.id),
            }),
        }
    }
    for (idx, r) in current.modes().iter().enumerate() {
        if !used[idx] && !records.iter().any(|x| x.id == r.id) {
            records.push(*r);
        }
    }
    ModeTable::new(current.lambda0_nm, records).unwrap_or(current)
}
