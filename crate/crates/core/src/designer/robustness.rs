use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::exec::{self, Execution};
use crate::fmt::num;
use crate::mode_solver::ModeTable;

use super::{
    assemble_from, solve_placements, ConversionGraph, DesignError, DesignTargets, ModeData,
    PlacementSolution,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbationSpec {
    /// Relative standard deviation applied to every mode's relative delay
    /// and dispersion.
    pub sigma: f64,
    pub trials: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    /// `None` when the perturbed design was infeasible.
    pub solution: Option<PlacementSolution>,
    /// Largest change of any normalized length versus the nominal design.
    pub max_abs_dl: Option<f64>,
}

impl TrialOutcome {
    pub fn feasible(&self) -> bool {
        self.solution.is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessReport {
    pub spec: PerturbationSpec,
    pub nominal: PlacementSolution,
    pub trials: Vec<TrialOutcome>,
}

impl RobustnessReport {
    pub fn feasible_fraction(&self) -> f64 {
        let ok = self.trials.iter().filter(|t| t.feasible()).count();
        ok as f64 / self.trials.len().max(1) as f64
    }

    /// Median of the max |Δl| over feasible trials.
    pub fn median_max_dl(&self) -> Option<f64> {
        let mut v: Vec<f64> = self.trials.iter().filter_map(|t| t.max_abs_dl).collect();
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        let k = v.len() / 2;
        Some(if v.len() % 2 == 1 {
            v[k]
        } else {
            0.5 * (v[k - 1] + v[k])
        })
    }

    /// Dispersion increments of the feasible trials, in trial order.
    pub fn delta_d_values(&self) -> Vec<f64> {
        self.trials
            .iter()
            .filter_map(|t| t.solution.as_ref().map(|s| s.delta_d_ps_per_km_nm))
            .collect()
    }

    /// One row per trial: `feasible,max_abs_dl,delta_D,<variables…>`.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec![
            "feasible".to_string(),
            "max_abs_dl".into(),
            "delta_D".into(),
        ];
        header.extend(self.nominal.variables.iter().map(|(n, _)| n.clone()));
        w.write_record(&header)?;
        for t in &self.trials {
            let mut row = Vec::with_capacity(header.len());
            match &t.solution {
                Some(s) => {
                    row.push("true".to_string());
                    row.push(t.max_abs_dl.map(num).unwrap_or_default());
                    row.push(num(s.delta_d_ps_per_km_nm));
                    row.extend(s.variables.iter().map(|(_, v)| num(*v)));
                }
                None => {
                    row.push("false".to_string());
                    row.resize(header.len(), String::new());
                }
            }
            w.write_record(&row)?;
        }
        w.flush()
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("CSV is UTF-8")
    }
}

/// Multiplies every mode's relative delay and dispersion by `1 + σ·z`,
/// drawing `z` for τ then D, mode by mode in table order.
fn perturb(data: &ModeData, sigma: f64, rng: &mut ChaCha8Rng) -> ModeData {
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut out = data.clone();
    for m in &mut out.modes {
        let zt: f64 = normal.sample(rng);
        let zd: f64 = normal.sample(rng);
        if sigma != 0.0 {
            m.1 *= 1.0 + sigma * zt;
            m.2 *= 1.0 + sigma * zd;
        }
    }
    out
}

/// Re-designs the placement under random deviations of the mode data.
/// Trial `k` draws from its own ChaCha stream `k` of `seed`, so the report
/// does not depend on the execution mode.
pub fn perturb_and_redesign(
    graph: &ConversionGraph,
    table: &ModeTable,
    targets: &DesignTargets,
    spec: &PerturbationSpec,
    execution: Execution,
) -> Result<RobustnessReport, DesignError> {
    if !(spec.sigma >= 0.0 && spec.sigma.is_finite()) {
        return Err(DesignError::Targets(format!(
            "sigma must be >= 0, got {}",
            spec.sigma
        )));
    }
    if spec.trials == 0 {
        return Err(DesignError::Targets(
            "at least one trial is required".into(),
        ));
    }
    let data = ModeData::from_table(table, targets.reference)?;
    let nominal = solve_placements(&assemble_from(graph, &data, targets)?)?;
    let trials = exec::map_range(execution, spec.trials, |k| {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(k as u64);
        let perturbed = perturb(&data, spec.sigma, &mut rng);
        let solution = assemble_from(graph, &perturbed, targets)
            .and_then(|s| solve_placements(&s))
            .ok();
        let max_abs_dl = solution.as_ref().map(|s| {
            s.variables
                .iter()
                .zip(&nominal.variables)
                .map(|((_, a), (_, b))| (a - b).abs())
                .fold(0.0, f64::max)
        });
        TrialOutcome {
            solution,
            max_abs_dl,
        }
    });
    Ok(RobustnessReport {
        spec: *spec,
        nominal,
        trials,
    })
}
