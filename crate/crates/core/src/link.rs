//! Evaluation of a designed delay line: sample delays versus wavelength,
//! delay tunability and the RF response of the tapped line.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;

use num_complex::Complex64;
use thiserror::Error;

use crate::designer::{ConversionGraph, DesignError, PlacementSolution};
use crate::exec::{self, Execution};
use crate::fmt::num;
use crate::materials::FiberProfile;
use crate::mode_solver::{sweep_modes, ModeId, ModeTable, SolverError, SolverOptions};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinkError {
    #[error("an FIR filter needs at least 2 taps, got {0}")]
    TooFewTaps(usize),
    #[error("{delays} tap delays but {amplitudes} amplitudes")]
    TapCount { delays: usize, amplitudes: usize },
    #[error("tap delays must be finite and ascending")]
    Unsorted,
    #[error("tap amplitude {0} is negative or not finite")]
    Amplitude(f64),
    #[error("{mode} is not guided at {wavelength_nm} nm")]
    Cutoff { mode: ModeId, wavelength_nm: f64 },
    #[error("invalid wavelength range: {0}")]
    Range(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Design(#[from] DesignError),
}

/// Per-unit-length delays of every sample at `λ` (nm) from the first-order
/// expansion `τ_eq,i + (λ - λ0)·D_eq,i`, relative to the reference mode.
pub fn sample_delays_first_order(solution: &PlacementSolution, wavelength_nm: f64) -> Vec<f64> {
    let dl = wavelength_nm - solution.lambda0_nm;
    solution
        .samples
        .iter()
        .map(|s| s.tau_eq_ps_per_km + dl * s.d_eq_ps_per_km_nm)
        .collect()
}

/// Per-unit-length sample delays computed from the delays in `table`,
/// relative to the reference mode's delay at `λ0`.
pub fn sample_delays_from_table(
    solution: &PlacementSolution,
    graph: &ConversionGraph,
    table: &ModeTable,
) -> Result<Vec<f64>, LinkError> {
    solution
        .samples
        .iter()
        .map(|s| {
            let mut tau = 0.0;
            for (mode, length) in solution.segment_lengths(graph, s.label)? {
                let record = table.get(mode).ok_or(LinkError::Cutoff {
                    mode,
                    wavelength_nm: table.lambda0_nm,
                })?;
                tau += (record.tau_ps_per_km - solution.reference_tau_ps_per_km) * length;
            }
            Ok(tau)
        })
        .collect()
}

/// Per-unit-length sample delays at `λ` (nm) with every mode delay solved
/// at that wavelength.
pub fn sample_delays_numeric(
    solution: &PlacementSolution,
    graph: &ConversionGraph,
    profile: &FiberProfile,
    wavelength_nm: f64,
    options: &SolverOptions,
) -> Result<Vec<f64>, LinkError> {
    let table = crate::mode_solver::mode_table(profile, wavelength_nm * 1e-3, options)?;
    sample_delays_from_table(solution, graph, &table)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DelayModel {
    FirstOrder,
    NumericSweep,
}

impl fmt::Display for DelayModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DelayModel::FirstOrder => "first-order",
            DelayModel::NumericSweep => "numeric-sweep",
        })
    }
}

/// Sample delays (ps/km) on a wavelength grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayCurve {
    pub model: DelayModel,
    pub wavelengths_nm: Vec<f64>,
    /// `delays[k][i]`: sample `i` at wavelength `k`.
    pub delays: Vec<Vec<f64>>,
}

impl DelayCurve {
    pub fn first_order(solution: &PlacementSolution, wavelengths_nm: &[f64]) -> Self {
        DelayCurve {
            model: DelayModel::FirstOrder,
            wavelengths_nm: wavelengths_nm.to_vec(),
            delays: wavelengths_nm
                .iter()
                .map(|&w| sample_delays_first_order(solution, w))
                .collect(),
        }
    }

    /// Solves the mode tables over an inclusive grid (nm) and combines them
    /// with the placement lengths.
    pub fn numeric(
        solution: &PlacementSolution,
        graph: &ConversionGraph,
        profile: &FiberProfile,
        start_nm: f64,
        stop_nm: f64,
        step_nm: f64,
        options: &SolverOptions,
    ) -> Result<Self, LinkError> {
        let sweep = sweep_modes(profile, start_nm, stop_nm, step_nm, options)?;
        let mut wavelengths_nm = Vec::new();
        let mut delays = Vec::new();
        for table in &sweep.tables {
            wavelengths_nm.push(table.lambda0_nm);
            delays.push(sample_delays_from_table(solution, graph, table)?);
        }
        Ok(DelayCurve {
            model: DelayModel::NumericSweep,
            wavelengths_nm,
            delays,
        })
    }

    /// Differential delays `τ_{i+1} - τ_i` at every wavelength.
    pub fn differential(&self) -> Vec<Vec<f64>> {
        self.delays
            .iter()
            .map(|row| row.windows(2).map(|w| w[1] - w[0]).collect())
            .collect()
    }

    pub fn header(samples: usize) -> Vec<String> {
        let mut h = vec!["lambda_nm".to_string()];
        h.extend((1..=samples).map(|i| format!("tau{i}")));
        h.extend((1..samples).map(|i| format!("dtau{}{}", i + 1, i)));
        h
    }

    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let samples = self.delays.first().map_or(0, Vec::len);
        let mut w = csv::Writer::from_writer(out);
        w.write_record(Self::header(samples))?;
        for ((lambda, row), diff) in self
            .wavelengths_nm
            .iter()
            .zip(&self.delays)
            .zip(self.differential())
        {
            let mut rec = vec![num(*lambda)];
            rec.extend(row.iter().map(|v| num(*v)));
            rec.extend(diff.iter().map(|v| num(*v)));
            w.write_record(&rec)?;
        }
        w.flush()
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("CSV is UTF-8")
    }
}

/// Spectral window in which the gratings convert modes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpgBandwidth {
    pub center_nm: f64,
    pub width_nm: f64,
}

impl LpgBandwidth {
    /// 20 nm centered on `λ0`.
    pub fn around(lambda0_nm: f64) -> Self {
        LpgBandwidth {
            center_nm: lambda0_nm,
            width_nm: 20.0,
        }
    }

    pub fn contains(&self, wavelength_nm: f64) -> bool {
        (wavelength_nm - self.center_nm).abs() <= 0.5 * self.width_nm * (1.0 + 1e-12)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TunabilityReport {
    pub start_nm: f64,
    pub stop_nm: f64,
    /// Differential delays of every adjacent pair at the range ends, ps/km.
    pub dtau_start: Vec<f64>,
    pub dtau_stop: Vec<f64>,
    pub min_dtau: f64,
    pub max_dtau: f64,
    /// Slope of the differential delay, ps/(km·nm).
    pub delta_d: f64,
    /// Set when the range leaves the grating bandwidth.
    pub warning: Option<String>,
}

/// First-order differential delays at the ends of `[start_nm, stop_nm]`.
pub fn tunability_report(
    solution: &PlacementSolution,
    start_nm: f64,
    stop_nm: f64,
    bandwidth: &LpgBandwidth,
) -> Result<TunabilityReport, LinkError> {
    if !(start_nm.is_finite() && stop_nm.is_finite() && start_nm <= stop_nm) {
        return Err(LinkError::Range(format!("{start_nm}..{stop_nm}")));
    }
    if solution.samples.len() < 2 {
        return Err(LinkError::TooFewTaps(solution.samples.len()));
    }
    let diff = |w| {
        let t = sample_delays_first_order(solution, w);
        t.windows(2).map(|p| p[1] - p[0]).collect::<Vec<f64>>()
    };
    let dtau_start = diff(start_nm);
    let dtau_stop = diff(stop_nm);
    let all = dtau_start.iter().chain(&dtau_stop);
    let min_dtau = all.clone().copied().fold(f64::INFINITY, f64::min);
    let max_dtau = all.copied().fold(f64::NEG_INFINITY, f64::max);
    let warning = (!bandwidth.contains(start_nm) || !bandwidth.contains(stop_nm)).then(|| {
        format!(
            "range {start_nm}-{stop_nm} nm exceeds the grating bandwidth {}-{} nm",
            bandwidth.center_nm - 0.5 * bandwidth.width_nm,
            bandwidth.center_nm + 0.5 * bandwidth.width_nm
        )
    });
    Ok(TunabilityReport {
        start_nm,
        stop_nm,
        dtau_start,
        dtau_stop,
        min_dtau,
        max_dtau,
        delta_d: solution.delta_d_ps_per_km_nm,
        warning,
    })
}

/// Absolute tap delays (ps) of a link of `length_km` at `λ` (nm).
pub fn tap_delays_ps(solution: &PlacementSolution, wavelength_nm: f64, length_km: f64) -> Vec<f64> {
    sample_delays_first_order(solution, wavelength_nm)
        .into_iter()
        .map(|t| (t + solution.reference_tau_ps_per_km) * length_km)
        .collect()
}

/// Frequency response of an FIR filter with the given taps.
#[derive(Debug, Clone, PartialEq)]
pub struct RfResponse {
    pub frequencies_ghz: Vec<f64>,
    pub response: Vec<Complex64>,
    pub delays_ps: Vec<f64>,
    pub amplitudes: Vec<f64>,
    /// Free spectral range; `None` when the taps are not uniformly spaced.
    pub fsr_ghz: Option<f64>,
}

pub const RF_HEADER: [&str; 4] = ["f_GHz", "re", "im", "mag_db"];

impl RfResponse {
    pub fn magnitude(&self) -> Vec<f64> {
        self.response.iter().map(|h| h.norm()).collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(RF_HEADER)?;
        for (f, h) in self.frequencies_ghz.iter().zip(&self.response) {
            w.write_record([num(*f), num(h.re), num(h.im), num(20.0 * h.norm().log10())])?;
        }
        w.flush()
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("CSV is UTF-8")
    }
}

/// `H(f) = Σ a_i exp(-j 2π f τ_i)` on `frequencies_ghz`, delays in ps.
pub fn rf_response(
    delays_ps: &[f64],
    amplitudes: &[f64],
    frequencies_ghz: &[f64],
    execution: Execution,
) -> Result<RfResponse, LinkError> {
    if delays_ps.len() < 2 {
        return Err(LinkError::TooFewTaps(delays_ps.len()));
    }
    if delays_ps.len() != amplitudes.len() {
        return Err(LinkError::TapCount {
            delays: delays_ps.len(),
            amplitudes: amplitudes.len(),
        });
    }
    if delays_ps.iter().any(|d| !d.is_finite()) || delays_ps.windows(2).any(|w| w[1] < w[0]) {
        return Err(LinkError::Unsorted);
    }
    if let Some(&a) = amplitudes.iter().find(|a| !(**a >= 0.0 && a.is_finite())) {
        return Err(LinkError::Amplitude(a));
    }
    let response = exec::map(execution, frequencies_ghz, |&f| {
        delays_ps
            .iter()
            .zip(amplitudes)
            .map(|(&tau, &a)| Complex64::from_polar(a, -2.0 * PI * f * tau * 1e-3))
            .sum()
    });
    let spacings: Vec<f64> = delays_ps.windows(2).map(|w| w[1] - w[0]).collect();
    let mean = (delays_ps[delays_ps.len() - 1] - delays_ps[0]) / spacings.len() as f64;
    let uniform = mean > 0.0 && spacings.iter().all(|s| (s - mean).abs() <= 1e-6 * mean);
    Ok(RfResponse {
        frequencies_ghz: frequencies_ghz.to_vec(),
        response,
        delays_ps: delays_ps.to_vec(),
        amplitudes: amplitudes.to_vec(),
        fsr_ghz: uniform.then(|| 1e3 / mean),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::designer::{assemble_constraints, solve_placements, DesignTargets};
    use proptest::prelude::*;

    fn design() -> PlacementSolution {
        let table =
            ModeTable::read_csv(include_str!("../data/ring_core_modes.csv").as_bytes()).unwrap();
        let sys = assemble_constraints(
            &ConversionGraph::ring_core_design(),
            &table,
            &DesignTargets::new(100.0),
        )
        .unwrap();
        solve_placements(&sys).unwrap()
    }

    #[test]
    fn first_order_differential_delays() {
        let s = design();
        let diff = |w| {
            let t = sample_delays_first_order(&s, w);
            t.windows(2).map(|p| p[1] - p[0]).collect::<Vec<_>>()
        };
        for d in diff(1550.0) {
            assert!((d - 100.0).abs() < 1e-6);
        }
        for d in diff(1540.0) {
            assert!((d - 48.98).abs() < 0.05, "{d}");
        }
        for d in diff(1560.0) {
            assert!((d - 151.02).abs() < 0.05, "{d}");
        }
    }

    #[test]
    fn tunability() {
        let s = design();
        let r = tunability_report(&s, 1540.0, 1560.0, &LpgBandwidth::around(1550.0)).unwrap();
        assert!((r.min_dtau - 49.0).abs() < 0.1 && (r.max_dtau - 151.0).abs() < 0.1);
        assert!(r.warning.is_none());
        assert!((r.delta_d - 5.10).abs() < 0.01);
        let r = tunability_report(&s, 1550.0, 1550.0, &LpgBandwidth::around(1550.0)).unwrap();
        assert!((r.min_dtau - 100.0).abs() < 1e-6 && (r.max_dtau - 100.0).abs() < 1e-6);
        let r = tunability_report(&s, 1530.0, 1560.0, &LpgBandwidth::around(1550.0)).unwrap();
        assert!(r.warning.is_some());
        assert!(tunability_report(&s, 1560.0, 1540.0, &LpgBandwidth::around(1550.0)).is_err());
    }

    #[test]
    fn curve_csv_layout() {
        let s = design();
        let grid = crate::grid::parse("1540:1560:0.5").unwrap();
        let c = DelayCurve::first_order(&s, &grid);
        let text = c.to_csv_string();
        let mut lines = text.lines();
        assert_eq!(
            lines.next(),
            Some("lambda_nm,tau1,tau2,tau3,tau4,dtau21,dtau32,dtau43")
        );
        assert_eq!(lines.count(), 41);
    }

    #[test]
    fn four_tap_filter() {
        let r = rf_response(
            &[0.0, 200.0, 400.0, 600.0],
            &[1.0; 4],
            &[0.0, 1.25, 2.5, 3.75, 5.0],
            Execution::Serial,
        )
        .unwrap();
        assert_eq!(r.fsr_ghz, Some(5.0));
        let m = r.magnitude();
        assert_eq!(m[0], 4.0);
        for null in &m[1..4] {
            assert!(*null < 1e-12);
        }
        assert!((m[4] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn filter_errors() {
        let f = [0.0];
        assert!(matches!(
            rf_response(&[1.0], &[1.0], &f, Execution::Serial),
            Err(LinkError::TooFewTaps(1))
        ));
        assert!(rf_response(&[2.0, 1.0], &[1.0, 1.0], &f, Execution::Serial).is_err());
        assert!(rf_response(&[1.0, 2.0], &[1.0, -1.0], &f, Execution::Serial).is_err());
        assert!(rf_response(&[1.0, 2.0], &[1.0], &f, Execution::Serial).is_err());
        let r = rf_response(&[0.0, 1.0, 3.0], &[1.0; 3], &f, Execution::Serial).unwrap();
        assert_eq!(r.fsr_ghz, None);
    }

    #[test]
    fn design_taps_at_two_km() {
        let s = design();
        let taps = tap_delays_ps(&s, 1550.0, 2.0);
        let r = rf_response(&taps, &[1.0; 4], &[0.0], Execution::Serial).unwrap();
        assert!((r.fsr_ghz.unwrap() - 5.0).abs() < 1e-9);
        let taps = tap_delays_ps(&s, 1560.0, 2.0);
        let r = rf_response(&taps, &[1.0; 4], &[0.0], Execution::Serial).unwrap();
        assert!((r.fsr_ghz.unwrap() - 3.31).abs() < 0.02 * 3.31);
    }

    proptest! {
        #[test]
        fn conjugate_symmetry(
            gaps in proptest::collection::vec(1.0f64..500.0, 1..6),
            f in 0.0f64..20.0,
        ) {
            let mut delays = vec![0.0];
            for g in &gaps {
                delays.push(delays.last().unwrap() + g);
            }
            let amps: Vec<f64> = (0..delays.len()).map(|i| 1.0 + i as f64 * 0.3).collect();
            let r = rf_response(&delays, &amps, &[f, -f], Execution::Serial).unwrap();
            let (a, b) = (r.response[0], r.response[1]);
            prop_assert!((a - b.conj()).norm() < 1e-9 * amps.iter().sum::<f64>());
        }

        #[test]
        fn uniform_taps_are_periodic(spacing in 10.0f64..1000.0, n in 2usize..8, f in 0.0f64..10.0) {
            let delays: Vec<f64> = (0..n).map(|i| i as f64 * spacing).collect();
            let r = rf_response(&delays, &vec![1.0; n], &[f, f + 1e3 / spacing], Execution::Serial).unwrap();
            let fsr = r.fsr_ghz.unwrap();
            prop_assert!((fsr * spacing * 1e-3 - 1.0).abs() < 1e-9);
            let m = r.magnitude();
            prop_assert!((m[0] - m[1]).abs() < 1e-8 * n as f64);
        }

        #[test]
        fn first_order_pairs_are_affine(w in 1530.0f64..1570.0) {
            let s = design();
            let t = sample_delays_first_order(&s, w);
            let d: Vec<f64> = t.windows(2).map(|p| p[1] - p[0]).collect();
            let expected = 100.0 + (w - 1550.0) * s.delta_d_ps_per_km_nm;
            for v in d {
                prop_assert!((v - expected).abs() < 1e-9);
            }
        }
    }
}
