//! Runs one validated command and writes its artifacts.

use std::fmt::Write as _;
use std::path::PathBuf;

use thiserror::Error;
use ttdl_core::designer::{write_lpg_positions, DispersionRule};
use ttdl_core::mode_solver::write_mode_tables;
use ttdl_core::{
    assemble_constraints, lpg_positions, mode_table, perturb_and_redesign, rf_response,
    solve_placements, sweep_modes, tunability_report, DelayCurve, PlacementSolution,
    TunabilityReport,
};

use crate::config::{Command, EvalModel, RunConfig, Wavelengths};
use crate::output::write_atomic;

/// Failure of one pipeline stage; displays as `<stage>: <message>`.
#[derive(Debug, Error)]
#[error("{stage}: {message}")]
pub struct StageError {
    pub stage: &'static str,
    pub message: String,
}

fn stage_err(stage: &'static str) -> impl Fn(&dyn std::fmt::Display) -> StageError {
    move |e| StageError {
        stage,
        message: e.to_string(),
    }
}

/// What a successful run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    /// Human-readable summary of the results.
    pub report: String,
    /// Files written, in order.
    pub artifacts: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

/// Executes the configured command. Every artifact is computed before the
/// first one is written, and each is written through a temporary file, so
/// a failing stage leaves no partial output behind.
pub fn run_pipeline(config: &RunConfig) -> Result<RunSummary, StageError> {
    let stage = config.command.name();
    let err = stage_err(stage);
    let mut files: Vec<(PathBuf, String)> = Vec::new();
    let mut warnings = Vec::new();

    let report = match &config.command {
        Command::SolveModes {
            profile,
            wavelengths,
            options,
            out,
        } => {
            let tables = match *wavelengths {
                Wavelengths::Single(nm) => {
                    vec![mode_table(profile, nm * 1e-3, options).map_err(|e| err(&e))?]
                }
                Wavelengths::Sweep { start, stop, step } => {
                    let sweep =
                        sweep_modes(profile, start, stop, step, options).map_err(|e| err(&e))?;
                    warnings.extend(
                        sweep
                            .warnings
                            .iter()
                            .map(|w| format!("{} nm: {}: {}", w.wavelength_nm, w.mode, w.message)),
                    );
                    sweep.tables
                }
            };
            let mut csv = Vec::new();
            write_mode_tables(&tables, &mut csv).map_err(|e| err(&e))?;
            files.push((
                config.output_path(out),
                String::from_utf8(csv).expect("CSV is UTF-8"),
            ));
            modes_report(&profile.name, &tables)
        }
        Command::Design {
            table,
            graph,
            targets,
            length_km,
            out,
            lpg_out,
            report,
        } => {
            let system = assemble_constraints(graph, table, targets).map_err(|e| err(&e))?;
            let solution = solve_placements(&system).map_err(|e| err(&e))?;
            let positions = lpg_positions(&solution, graph, *length_km).map_err(|e| err(&e))?;
            let mut lpg = Vec::new();
            write_lpg_positions(&positions, &mut lpg).map_err(|e| err(&e))?;

            let mut text = design_report(&solution, targets.rule);
            writeln!(text, "\ngratings for L = {length_km} km").unwrap();
            for p in &positions {
                writeln!(
                    text,
                    "  {:>2}  {} -> {}  z = {:.6} km",
                    p.junction, p.from_mode, p.to_mode, p.z_km
                )
                .unwrap();
            }
            files.push((config.output_path(out), solution.to_csv_string()));
            files.push((
                config.output_path(lpg_out),
                String::from_utf8(lpg).expect("CSV is UTF-8"),
            ));
            files.push((config.output_path(report), text.clone()));
            text
        }
        Command::Evaluate {
            solution,
            wavelengths_nm,
            range,
            model,
            bandwidth,
            out,
            report,
        } => {
            let curve = match model {
                EvalModel::FirstOrder => DelayCurve::first_order(solution, wavelengths_nm),
                EvalModel::Numeric { graph, profile } => {
                    let options = ttdl_core::SolverOptions {
                        execution: config.execution,
                        ..Default::default()
                    };
                    DelayCurve::numeric(
                        solution, graph, profile, range.0, range.1, range.2, &options,
                    )
                    .map_err(|e| err(&e))?
                }
            };
            let (start, stop) = (wavelengths_nm[0], wavelengths_nm[wavelengths_nm.len() - 1]);
            let tune = tunability_report(solution, start, stop, bandwidth).map_err(|e| err(&e))?;
            warnings.extend(tune.warning.clone());
            let text = tunability_text(&tune, &curve);
            files.push((config.output_path(out), curve.to_csv_string()));
            files.push((config.output_path(report), text.clone()));
            text
        }
        Command::RfResponse {
            solution,
            lambda_nm,
            length_km,
            amplitudes,
            frequencies_ghz,
            out,
        } => {
            let delays = ttdl_core::link::tap_delays_ps(solution, *lambda_nm, *length_km);
            let amps = amplitudes
                .clone()
                .unwrap_or_else(|| vec![1.0; delays.len()]);
            let rf = rf_response(&delays, &amps, frequencies_ghz, config.execution)
                .map_err(|e| err(&e))?;
            let mut text = format!("RF response at {lambda_nm} nm, L = {length_km} km\n");
            for (i, (d, a)) in delays.iter().zip(&amps).enumerate() {
                writeln!(text, "  tap {}  delay {:.3} ps  amplitude {a}", i + 1, d).unwrap();
            }
            match rf.fsr_ghz {
                Some(fsr) => writeln!(text, "  free spectral range {fsr:.6} GHz").unwrap(),
                None => writeln!(
                    text,
                    "  taps are not uniformly spaced, no free spectral range"
                )
                .unwrap(),
            }
            files.push((config.output_path(out), rf.to_csv_string()));
            text
        }
        Command::Perturb {
            table,
            graph,
            targets,
            spec,
            out,
        } => {
            let report = perturb_and_redesign(graph, table, targets, spec, config.execution)
                .map_err(|e| err(&e))?;
            let mut text = format!(
                "robustness: sigma {}, {} trials, seed {}\n  feasible fraction {}\n",
                spec.sigma,
                spec.trials,
                spec.seed,
                report.feasible_fraction()
            );
            match report.median_max_dl() {
                Some(m) => writeln!(text, "  median max |dl| {m:.6}").unwrap(),
                None => writeln!(text, "  no feasible trial").unwrap(),
            }
            files.push((config.output_path(out), report.to_csv_string()));
            text
        }
    };

    let write_err = stage_err("write");
    std::fs::create_dir_all(&config.out_dir)
        .map_err(|e| write_err(&format!("{}: {e}", config.out_dir.display())))?;
    let mut artifacts = Vec::new();
    for (path, content) in files {
        write_atomic(&path, content.as_bytes())
            .map_err(|e| write_err(&format!("{}: {e}", path.display())))?;
        artifacts.push(path);
    }
    Ok(RunSummary {
        report,
        artifacts,
        warnings,
    })
}

fn modes_report(name: &str, tables: &[ttdl_core::ModeTable]) -> String {
    let mut text = format!("guided modes of `{name}`\n");
    for t in tables {
        writeln!(text, "  {} nm: {} modes", t.lambda0_nm, t.len()).unwrap();
        for r in t.modes() {
            writeln!(
                text,
                "    {}  n_eff {:.8}  tau {:.2} ps/km  D {:.3} ps/(km nm)",
                r.id, r.n_eff, r.tau_ps_per_km, r.dispersion_ps_per_km_nm
            )
            .unwrap();
        }
        if let Some(gap) = t.min_separation() {
            writeln!(text, "    smallest n_eff separation {gap:.3e}").unwrap();
        }
    }
    text
}

fn design_report(solution: &PlacementSolution, rule: DispersionRule) -> String {
    let rule = match rule {
        DispersionRule::Maximize => "maximized".to_string(),
        DispersionRule::Fixed(v) => format!("fixed at {v}"),
        DispersionRule::DelaysOnly => "unconstrained".to_string(),
    };
    let mut text = String::from("grating placement\n");
    writeln!(text, "  design wavelength     {} nm", solution.lambda0_nm).unwrap();
    writeln!(
        text,
        "  reference mode        {} (absolute delay {} ps/km)",
        solution.reference, solution.reference_tau_ps_per_km
    )
    .unwrap();
    writeln!(
        text,
        "  differential delay    {:.4} ps/km",
        solution.delta_tau_ps_per_km
    )
    .unwrap();
    writeln!(
        text,
        "  dispersion increment  {:.4} ps/(km nm), {rule}",
        solution.delta_d_ps_per_km_nm
    )
    .unwrap();
    writeln!(text, "\nnormalized lengths").unwrap();
    for (name, v) in &solution.variables {
        writeln!(text, "  {name:<8} {v:.6}").unwrap();
    }
    writeln!(
        text,
        "\nsamples: delay relative to {} (ps/km), dispersion (ps/(km nm))",
        solution.reference
    )
    .unwrap();
    for s in &solution.samples {
        writeln!(
            text,
            "  {:>2}  {:>10.3}  {:>8.4}",
            s.label, s.tau_eq_ps_per_km, s.d_eq_ps_per_km_nm
        )
        .unwrap();
    }
    text
}

fn tunability_text(t: &TunabilityReport, curve: &DelayCurve) -> String {
    let mut text = format!("delay tunability, {} model\n", curve.model);
    writeln!(
        text,
        "  {} nm: differential delays {}",
        t.start_nm,
        join(&t.dtau_start)
    )
    .unwrap();
    writeln!(
        text,
        "  {} nm: differential delays {}",
        t.stop_nm,
        join(&t.dtau_stop)
    )
    .unwrap();
    writeln!(text, "  range {:.3} to {:.3} ps/km", t.min_dtau, t.max_dtau).unwrap();
    writeln!(text, "  slope {:.4} ps/(km nm)", t.delta_d).unwrap();
    if let Some(w) = &t.warning {
        writeln!(text, "  warning: {w}").unwrap();
    }
    text
}

fn join(v: &[f64]) -> String {
    v.iter()
        .map(|x| format!("{x:.3}"))
        .collect::<Vec<_>>()
        .join(", ")
}
