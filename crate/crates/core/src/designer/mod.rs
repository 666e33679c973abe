//! Grating placement for constant differential delay and dispersion.
//!
//! Each sample's delay and dispersion per unit length are length-weighted
//! sums of its modes' values. Requiring equal increments between adjacent
//! samples gives a linear system in the normalized segment lengths, solved
//! here as a small linear program over the box `[0, 1]`.

mod graph;
mod lp;
mod robustness;
mod solution;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::diagnostics::Diagnostics;
use crate::mode_solver::{ModeId, ModeTable};

pub use graph::{ConversionGraph, Junction, Sample, Segment, SegmentLength};
pub use robustness::{perturb_and_redesign, PerturbationSpec, RobustnessReport, TrialOutcome};
pub use solution::{
    lpg_positions, read_lpg_positions, write_lpg_positions, LpgPosition, PlacementSolution,
    SampleDelay, LPG_HEADER,
};

use lp::{Bound, Outcome, Problem};

/// Scaled row residual accepted for a returned placement.
pub const FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DesignError {
    #[error("sample {sample}: mode {mode} is not in the mode table")]
    UnknownMode { sample: u32, mode: ModeId },
    #[error("reference mode {0} is not in the mode table")]
    UnknownReference(ModeId),
    #[error("sample {sample} has no free lengths and its fixed lengths sum to {total}, not 1")]
    InfeasibleConstant { sample: u32, total: f64 },
    #[error("invalid design targets: {0}")]
    Targets(String),
    #[error("no placement satisfies: {}", .constraints.join("; "))]
    Infeasible { constraints: Vec<String> },
    #[error("the dispersion increment is unbounded; the graph is under-constrained")]
    Unbounded,
    #[error("invalid graph: {0}")]
    Graph(String),
    #[error("solution does not match the graph: {0}")]
    Mismatch(String),
    #[error("{0}")]
    Parse(Diagnostics),
}

/// How the dispersion increment between samples is treated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DispersionRule {
    /// Equal increments, as large as possible.
    Maximize,
    /// Equal increments of the given value, ps/(km·nm).
    Fixed(f64),
    /// Only delays and normalization are constrained.
    DelaysOnly,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignTargets {
    /// Differential delay between adjacent samples, ps/km.
    pub delta_tau_ps_per_km: f64,
    pub rule: DispersionRule,
    /// Delays are taken relative to this mode.
    pub reference: ModeId,
}

impl DesignTargets {
    pub fn new(delta_tau_ps_per_km: f64) -> Self {
        DesignTargets {
            delta_tau_ps_per_km,
            rule: DispersionRule::Maximize,
            reference: ModeId::LP01,
        }
    }

    fn validate(&self) -> Result<(), DesignError> {
        if !(self.delta_tau_ps_per_km > 0.0 && self.delta_tau_ps_per_km.is_finite()) {
            return Err(DesignError::Targets(format!(
                "delta tau must be positive, got {}",
                self.delta_tau_ps_per_km
            )));
        }
        if let DispersionRule::Fixed(v) = self.rule {
            if !v.is_finite() {
                return Err(DesignError::Targets(
                    "fixed dispersion increment is not finite".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Relative delay and dispersion of every mode in a table.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ModeData {
    pub lambda0_nm: f64,
    pub reference: ModeId,
    pub reference_tau: f64,
    /// `(τ - τ_ref, D)` per mode, in table order.
    pub modes: Vec<(ModeId, f64, f64)>,
}

impl ModeData {
    pub fn from_table(table: &ModeTable, reference: ModeId) -> Result<Self, DesignError> {
        let reference_tau = table
            .get(reference)
            .ok_or(DesignError::UnknownReference(reference))?
            .tau_ps_per_km;
        Ok(ModeData {
            lambda0_nm: table.lambda0_nm,
            reference,
            reference_tau,
            modes: table
                .modes()
                .iter()
                .map(|r| {
                    (
                        r.id,
                        r.tau_ps_per_km - reference_tau,
                        r.dispersion_ps_per_km_nm,
                    )
                })
                .collect(),
        })
    }

    fn get(&self, id: ModeId) -> Option<(f64, f64)> {
        self.modes.iter().find(|m| m.0 == id).map(|m| (m.1, m.2))
    }
}

/// One sample's delay, dispersion and total length as affine functions of
/// the length variables.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleTerms {
    pub label: u32,
    pub tau: Vec<f64>,
    pub tau_constant: f64,
    pub dispersion: Vec<f64>,
    pub dispersion_constant: f64,
    pub length: Vec<f64>,
    pub length_constant: f64,
}

impl SampleTerms {
    fn eval(coefficients: &[f64], constant: f64, x: &[f64]) -> f64 {
        coefficients.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() + constant
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintKind {
    Normalization { sample: u32 },
    Delay { samples: (u32, u32) },
    Dispersion { samples: (u32, u32) },
}

impl std::fmt::Display for ConstraintKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConstraintKind::Normalization { sample } => {
                write!(f, "sample {sample} lengths sum to 1")
            }
            ConstraintKind::Delay { samples: (a, b) } => {
                write!(f, "delay step from sample {a} to {b}")
            }
            ConstraintKind::Dispersion { samples: (a, b) } => {
                write!(f, "dispersion step from sample {a} to {b}")
            }
        }
    }
}

/// `coefficients · [x, ΔD] = rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub kind: ConstraintKind,
    pub coefficients: Vec<f64>,
    pub rhs: f64,
}

/// Equality constraints over the length variables, plus the `ΔD` column
/// when the rule is [`DispersionRule::Maximize`]. All lengths lie in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    pub variables: Vec<String>,
    pub has_delta_d: bool,
    pub rows: Vec<Constraint>,
    pub samples: Vec<SampleTerms>,
    pub targets: DesignTargets,
    pub lambda0_nm: f64,
    pub reference_tau_ps_per_km: f64,
}

impl LinearSystem {
    pub fn columns(&self) -> usize {
        self.variables.len() + usize::from(self.has_delta_d)
    }

    /// Largest row residual, each row scaled by its largest coefficient.
    pub fn max_scaled_residual(&self, x: &[f64]) -> f64 {
        self.rows
            .iter()
            .map(|r| {
                let scale = r
                    .coefficients
                    .iter()
                    .fold(r.rhs.abs(), |a, v| a.max(v.abs()))
                    .max(1e-300);
                let lhs: f64 = r.coefficients.iter().zip(x).map(|(a, v)| a * v).sum();
                (lhs - r.rhs).abs() / scale
            })
            .fold(0.0, f64::max)
    }
}

/// Builds the placement constraints for `graph` from the delays and
/// dispersions in `table`.
pub fn assemble_constraints(
    graph: &ConversionGraph,
    table: &ModeTable,
    targets: &DesignTargets,
) -> Result<LinearSystem, DesignError> {
    let data = ModeData::from_table(table, targets.reference)?;
    assemble_from(graph, &data, targets)
}

pub(crate) fn assemble_from(
    graph: &ConversionGraph,
    data: &ModeData,
    targets: &DesignTargets,
) -> Result<LinearSystem, DesignError> {
    targets.validate()?;
    let variables = graph.variables();
    let index: BTreeMap<&str, usize> = variables
        .iter()
        .enumerate()
        .map(|(i, v)| (v.as_str(), i))
        .collect();
    let n = variables.len();

    let mut samples = Vec::new();
    for s in graph.samples() {
        let mut t = SampleTerms {
            label: s.label,
            tau: vec![0.0; n],
            tau_constant: 0.0,
            dispersion: vec![0.0; n],
            dispersion_constant: 0.0,
            length: vec![0.0; n],
            length_constant: 0.0,
        };
        for seg in &s.segments {
            let (tau, d) = data.get(seg.mode).ok_or(DesignError::UnknownMode {
                sample: s.label,
                mode: seg.mode,
            })?;
            match &seg.length {
                SegmentLength::Variable(v) => {
                    let j = index[v.as_str()];
                    t.tau[j] += tau;
                    t.dispersion[j] += d;
                    t.length[j] += 1.0;
                }
                SegmentLength::Constant(c) => {
                    t.tau_constant += tau * c;
                    t.dispersion_constant += d * c;
                    t.length_constant += c;
                }
            }
        }
        samples.push(t);
    }

    let has_delta_d = targets.rule == DispersionRule::Maximize && samples.len() > 1;
    let cols = n + usize::from(has_delta_d);
    let widen = |v: &[f64]| {
        let mut row = v.to_vec();
        row.resize(cols, 0.0);
        row
    };
    let mut rows = Vec::new();
    for t in &samples {
        let free = t.length.iter().any(|&c| c != 0.0);
        if !free {
            if (t.length_constant - 1.0).abs() > FEASIBILITY_TOL {
                return Err(DesignError::InfeasibleConstant {
                    sample: t.label,
                    total: t.length_constant,
                });
            }
            continue;
        }
        rows.push(Constraint {
            kind: ConstraintKind::Normalization { sample: t.label },
            coefficients: widen(&t.length),
            rhs: 1.0 - t.length_constant,
        });
    }
    let diff = |a: &[f64], b: &[f64]| -> Vec<f64> { b.iter().zip(a).map(|(y, x)| y - x).collect() };
    for pair in samples.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        rows.push(Constraint {
            kind: ConstraintKind::Delay {
                samples: (a.label, b.label),
            },
            coefficients: widen(&diff(&a.tau, &b.tau)),
            rhs: targets.delta_tau_ps_per_km - (b.tau_constant - a.tau_constant),
        });
    }
    if targets.rule != DispersionRule::DelaysOnly {
        for pair in samples.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            let mut coefficients = widen(&diff(&a.dispersion, &b.dispersion));
            let constant = b.dispersion_constant - a.dispersion_constant;
            let rhs = match targets.rule {
                DispersionRule::Fixed(v) => v - constant,
                _ => {
                    coefficients[n] = -1.0;
                    -constant
                }
            };
            rows.push(Constraint {
                kind: ConstraintKind::Dispersion {
                    samples: (a.label, b.label),
                },
                coefficients,
                rhs,
            });
        }
    }
    Ok(LinearSystem {
        variables,
        has_delta_d,
        rows,
        samples,
        targets: *targets,
        lambda0_nm: data.lambda0_nm,
        reference_tau_ps_per_km: data.reference_tau,
    })
}

/// Solves `rows · x = rhs` when it determines `x` uniquely (rank equal to
/// the number of columns, consistent within tolerance).
fn unique_solution(rows: &[Vec<f64>], rhs: &[f64], cols: usize) -> Option<Vec<f64>> {
    let mut a: Vec<Vec<f64>> = rows
        .iter()
        .zip(rhs)
        .map(|(r, &b)| {
            let scale = r.iter().fold(b.abs(), |m, v| m.max(v.abs())).max(1e-300);
            r.iter()
                .chain(std::iter::once(&b))
                .map(|v| v / scale)
                .collect()
        })
        .collect();
    let m = a.len();
    if m < cols {
        return None;
    }
    for c in 0..cols {
        let p = (c..m).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[p][c].abs() < 1e-12 {
            return None;
        }
        a.swap(c, p);
        for i in 0..m {
            if i != c {
                let f = a[i][c] / a[c][c];
                if f != 0.0 {
                    for k in c..=cols {
                        a[i][k] -= f * a[c][k];
                    }
                }
            }
        }
    }
    if a[cols..].iter().any(|r| r[cols].abs() > FEASIBILITY_TOL) {
        return None;
    }
    Some((0..cols).map(|c| a[c][cols] / a[c][c]).collect())
}

/// Re-solves the variables strictly inside their bounds from the
/// equalities, with the others pinned at the bound they sit on.
fn polish(system: &LinearSystem, x: &[f64]) -> Option<Vec<f64>> {
    let n = system.variables.len();
    let cols = system.columns();
    let pinned: Vec<Option<f64>> = (0..cols)
        .map(|j| {
            if j >= n {
                None
            } else if x[j].abs() < 1e-9 {
                Some(0.0)
            } else if (x[j] - 1.0).abs() < 1e-9 {
                Some(1.0)
            } else {
                None
            }
        })
        .collect();
    let free: Vec<usize> = (0..cols).filter(|&j| pinned[j].is_none()).collect();
    let rows: Vec<Vec<f64>> = system
        .rows
        .iter()
        .map(|r| free.iter().map(|&j| r.coefficients[j]).collect())
        .collect();
    let rhs: Vec<f64> = system
        .rows
        .iter()
        .map(|r| {
            r.rhs
                - (0..cols)
                    .filter_map(|j| pinned[j].map(|v| v * r.coefficients[j]))
                    .sum::<f64>()
        })
        .collect();
    let solved = if free.is_empty() {
        Vec::new()
    } else {
        unique_solution(&rows, &rhs, free.len())?
    };
    let mut out: Vec<f64> = pinned.iter().map(|p| p.unwrap_or(0.0)).collect();
    for (&j, v) in free.iter().zip(solved) {
        if j < n && !(-1e-12..=1.0 + 1e-12).contains(&v) {
            return None;
        }
        out[j] = if j < n { v.clamp(0.0, 1.0) } else { v };
    }
    Some(out)
}

/// Normalized lengths meeting the targets. Under
/// [`DispersionRule::Maximize`] the dispersion increment is maximized; ties
/// go to the lexicographically smallest length vector.
pub fn solve_placements(system: &LinearSystem) -> Result<PlacementSolution, DesignError> {
    let n = system.variables.len();
    let cols = system.columns();
    let mut rows: Vec<Vec<f64>> = system.rows.iter().map(|r| r.coefficients.clone()).collect();
    let mut rhs: Vec<f64> = system.rows.iter().map(|r| r.rhs).collect();
    let bounds: Vec<Bound> = (0..cols)
        .map(|j| {
            if j < n {
                Bound::Boxed(1.0)
            } else {
                Bound::Free
            }
        })
        .collect();

    let run = |rows: &[Vec<f64>], rhs: &[f64], objective: &[f64]| {
        lp::maximize(
            &Problem {
                rows,
                rhs,
                bounds: &bounds,
            },
            objective,
        )
    };

    let mut x = vec![0.0; cols];
    if cols > 0 {
        let mut objective = vec![0.0; cols];
        if system.has_delta_d {
            objective[n] = 1.0;
        }
        x = match run(&rows, &rhs, &objective) {
            Outcome::Optimal(x) => x,
            Outcome::Infeasible(violated) => {
                return Err(DesignError::Infeasible {
                    constraints: violated
                        .iter()
                        .map(|&i| system.rows[i].kind.to_string())
                        .collect(),
                })
            }
            Outcome::Unbounded => return Err(DesignError::Unbounded),
        };
        // lexicographic tie-break, skipped once the point is pinned down
        let mut order: Vec<usize> = Vec::new();
        if system.has_delta_d {
            order.push(n);
        }
        order.extend(0..n);
        for j in order {
            if unique_solution(&rows, &rhs, cols).is_some() {
                break;
            }
            if j < n {
                let mut objective = vec![0.0; cols];
                objective[j] = -1.0;
                if let Outcome::Optimal(y) = run(&rows, &rhs, &objective) {
                    x = y;
                }
            }
            let mut fix = vec![0.0; cols];
            fix[j] = 1.0;
            rows.push(fix);
            rhs.push(x[j]);
        }
        if let Some(p) = polish(system, &x) {
            if system.max_scaled_residual(&p) <= system.max_scaled_residual(&x).max(1e-15) {
                x = p;
            }
        }
    }
    Ok(PlacementSolution::from_system(system, &x))
}

#[cfg(test)]
mod tests;
