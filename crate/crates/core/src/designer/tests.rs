use super::*;
use crate::exec::Execution;
use crate::mode_solver::ModeRecord;

pub(crate) fn reference_modes() -> ModeTable {
    ModeTable::read_csv(include_str!("../../data/ring_core_modes.csv").as_bytes()).unwrap()
}

fn ring_system(rule: DispersionRule) -> LinearSystem {
    let targets = DesignTargets {
        rule,
        ..DesignTargets::new(100.0)
    };
    assemble_constraints(
        &ConversionGraph::ring_core_design(),
        &reference_modes(),
        &targets,
    )
    .unwrap()
}

fn ring_solution() -> PlacementSolution {
    solve_placements(&ring_system(DispersionRule::Maximize)).unwrap()
}

fn solution_vector(s: &PlacementSolution) -> Vec<f64> {
    let mut x: Vec<f64> = s.variables.iter().map(|v| v.1).collect();
    x.push(s.delta_d_ps_per_km_nm);
    x
}

#[test]
fn ring_system_shape() {
    let sys = ring_system(DispersionRule::Maximize);
    assert_eq!(sys.variables.len(), 8);
    assert!(sys.has_delta_d);
    assert_eq!(sys.rows.len(), 9);
    let count = |f: fn(&ConstraintKind) -> bool| sys.rows.iter().filter(|r| f(&r.kind)).count();
    assert_eq!(
        count(|k| matches!(k, ConstraintKind::Normalization { .. })),
        3
    );
    assert_eq!(count(|k| matches!(k, ConstraintKind::Delay { .. })), 3);
    assert_eq!(count(|k| matches!(k, ConstraintKind::Dispersion { .. })), 3);
}

#[test]
fn delays_only_drops_dispersion_rows() {
    let sys = ring_system(DispersionRule::DelaysOnly);
    assert_eq!(sys.rows.len(), 6);
    assert!(!sys.has_delta_d);
    assert!(sys
        .rows
        .iter()
        .all(|r| !matches!(r.kind, ConstraintKind::Dispersion { .. })));
}

#[test]
fn ring_placements() {
    let s = ring_solution();
    let expected = [
        ("l02", 0.170),
        ("l41_2", 0.239),
        ("l01_2", 0.217),
        ("l12_2", 0.373),
        ("l31_3", 0.385),
        ("l11_3", 0.255),
        ("l12_3", 0.190),
    ];
    for (name, v) in expected {
        let got = s.value(name).unwrap();
        assert!((got - v).abs() < 1.5e-3, "{name}: {got}");
    }
    let tau = s.tau_eq();
    for (t, want) in tau.iter().zip([7882.3, 7982.3, 8082.3, 8182.3]) {
        assert!((t - want).abs() < 0.1, "{t}");
    }
    for (d, want) in s.d_eq().iter().zip([12.10, 17.21, 22.31, 27.41]) {
        assert!((d - want).abs() < 0.01, "{d}");
    }
    assert!((s.delta_d_ps_per_km_nm - 5.1023).abs() < 1e-3);
}

#[test]
fn ring_solution_invariants() {
    let sys = ring_system(DispersionRule::Maximize);
    let s = solve_placements(&sys).unwrap();
    let x = solution_vector(&s);
    assert!(sys.max_scaled_residual(&x) < 1e-12);
    for (_, v) in &s.variables {
        assert!((0.0..=1.0).contains(v));
    }
    let tau = s.tau_eq();
    for w in tau.windows(2) {
        assert!((w[1] - w[0] - 100.0).abs() < 1e-6);
    }
    let d = s.d_eq();
    let steps: Vec<f64> = d.windows(2).map(|w| w[1] - w[0]).collect();
    for st in &steps {
        assert!((st - steps[0]).abs() < 1e-9);
    }
    for t in &sys.samples {
        let sum: f64 = t.length.iter().zip(&x).map(|(a, v)| a * v).sum::<f64>() + t.length_constant;
        assert!((sum - 1.0).abs() < 1e-9);
    }
}

#[test]
fn huge_delay_step_is_infeasible() {
    let targets = DesignTargets::new(1e6);
    let sys = assemble_constraints(
        &ConversionGraph::ring_core_design(),
        &reference_modes(),
        &targets,
    )
    .unwrap();
    match solve_placements(&sys) {
        Err(DesignError::Infeasible { constraints }) => assert!(!constraints.is_empty()),
        other => panic!("{other:?}"),
    }
}

#[test]
fn single_full_length_sample() {
    let g = ConversionGraph::parse("[sample 1]\nsegment = LP21, fixed\n").unwrap();
    let sys = assemble_constraints(&g, &reference_modes(), &DesignTargets::new(100.0)).unwrap();
    assert!(sys.variables.is_empty());
    assert!(sys.rows.is_empty());
    let s = solve_placements(&sys).unwrap();
    assert_eq!(s.tau_eq(), vec![8182.33]);
}

#[test]
fn bad_inputs() {
    let g = ConversionGraph::parse("[sample 1]\nsegment = LP22, a\n").unwrap();
    assert!(matches!(
        assemble_constraints(&g, &reference_modes(), &DesignTargets::new(100.0)),
        Err(DesignError::UnknownMode { .. })
    ));
    let g = ConversionGraph::parse("[sample 1]\nsegment = LP21, 0.5\n").unwrap();
    assert!(matches!(
        assemble_constraints(&g, &reference_modes(), &DesignTargets::new(100.0)),
        Err(DesignError::InfeasibleConstant { .. })
    ));
    let g = ConversionGraph::ring_core_design();
    assert!(assemble_constraints(&g, &reference_modes(), &DesignTargets::new(-1.0)).is_err());
}

#[test]
fn shuffled_sections_give_the_same_design() {
    let text = include_str!("../../data/ring_core.graph");
    let sections: Vec<&str> = text.split("\n[").collect();
    let mut shuffled = String::new();
    for part in [sections[3], sections[1], sections[4], sections[2]] {
        shuffled.push('[');
        shuffled.push_str(part);
        shuffled.push('\n');
    }
    let g = ConversionGraph::parse(&shuffled).unwrap();
    assert_eq!(g, ConversionGraph::ring_core_design());
    let sys = assemble_constraints(&g, &reference_modes(), &DesignTargets::new(100.0)).unwrap();
    assert_eq!(solve_placements(&sys).unwrap(), ring_solution());
}

#[test]
fn delay_only_family_contains_full_solution() {
    let reduced = ring_system(DispersionRule::DelaysOnly);
    let full = ring_solution();
    let x: Vec<f64> = full.variables.iter().map(|v| v.1).collect();
    assert!(reduced.max_scaled_residual(&x) < 1e-12);
    // six independent rows over eight lengths: a two-parameter family
    let rows: Vec<Vec<f64>> = reduced
        .rows
        .iter()
        .map(|r| r.coefficients.clone())
        .collect();
    assert_eq!(rank(&rows), 6);
    let s = solve_placements(&reduced).unwrap();
    let y: Vec<f64> = s.variables.iter().map(|v| v.1).collect();
    assert!(reduced.max_scaled_residual(&y) < 1e-9);
}

fn rank(rows: &[Vec<f64>]) -> usize {
    let mut a: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| {
            let s = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            r.iter().map(|v| v / s).collect()
        })
        .collect();
    let cols = a[0].len();
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..a.len()).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())) else {
            break;
        };
        if a[p][c].abs() < 1e-10 {
            continue;
        }
        a.swap(r, p);
        for i in 0..a.len() {
            if i != r {
                let f = a[i][c] / a[r][c];
                for k in 0..cols {
                    a[i][k] -= f * a[r][k];
                }
            }
        }
        r += 1;
    }
    r
}

#[test]
fn fixed_increment_reproduces_maximum() {
    let full = ring_solution();
    let sys = ring_system(DispersionRule::Fixed(full.delta_d_ps_per_km_nm));
    let s = solve_placements(&sys).unwrap();
    for ((_, a), (_, b)) in s.variables.iter().zip(&full.variables) {
        assert!((a - b).abs() < 1e-9);
    }
    // a larger increment than the maximum cannot be met
    let sys = ring_system(DispersionRule::Fixed(full.delta_d_ps_per_km_nm + 1.0));
    assert!(solve_placements(&sys).is_err());
}

#[test]
fn ties_go_to_the_smallest_lengths() {
    // two samples, each free to mix two modes with equal delays: many optima
    let text =
        "[sample 1]\nsegment = LP01, a\nsegment = LP11, b\n[sample 2]\nsegment = LP21, fixed\n";
    let g = ConversionGraph::parse(text).unwrap();
    let table = reference_modes()
        .map_records(|r| ModeRecord {
            tau_ps_per_km: if r.id == ModeId::new(2, 1) {
                100.0
            } else {
                0.0
            },
            dispersion_ps_per_km_nm: 1.0 + r.n_eff,
            ..*r
        })
        .unwrap();
    let targets = DesignTargets {
        rule: DispersionRule::DelaysOnly,
        ..DesignTargets::new(100.0)
    };
    let s = solve_placements(&assemble_constraints(&g, &table, &targets).unwrap()).unwrap();
    assert_eq!(s.value("a"), Some(0.0));
    assert_eq!(s.value("b"), Some(1.0));
}

#[test]
fn placement_csv_round_trip() {
    let s = ring_solution();
    let text = s.to_csv_string();
    assert!(text.starts_with("variable,value\nl02,"));
    let back = PlacementSolution::read_csv(text.as_bytes()).unwrap();
    assert_eq!(back, s);
    assert_eq!(back.to_csv_string(), text);
    assert!(PlacementSolution::read_csv("variable,value\na,1\n".as_bytes()).is_err());
    assert!(PlacementSolution::read_csv("x,y\n".as_bytes()).is_err());
}

#[test]
fn grating_positions() {
    let s = ring_solution();
    let g = ConversionGraph::ring_core_design();
    let p = lpg_positions(&s, &g, 1.0).unwrap();
    assert_eq!(p.len(), 5);
    assert!(p.windows(2).all(|w| w[0].z_km <= w[1].z_km));
    let first = &p[0];
    assert_eq!(
        (first.from_mode, first.to_mode),
        (ModeId::new(0, 2), ModeId::new(1, 2))
    );
    let l02 = s.value("l02").unwrap();
    assert!((first.z_km - (1.0 - (1.0 - l02))).abs() < 1e-12);
    assert!((first.z_km - 0.170).abs() < 1.5e-3);
    let doubled = lpg_positions(&s, &g, 2.0).unwrap();
    for (a, b) in p.iter().zip(&doubled) {
        assert!((2.0 * a.z_km - b.z_km).abs() < 1e-12);
    }
    assert!(lpg_positions(&s, &g, 0.0).is_err());

    let mut buf = Vec::new();
    write_lpg_positions(&p, &mut buf).unwrap();
    assert_eq!(read_lpg_positions(buf.as_slice()).unwrap(), p);
}

#[test]
fn zero_sigma_reproduces_nominal() {
    let spec = PerturbationSpec {
        sigma: 0.0,
        trials: 5,
        seed: 7,
    };
    let r = perturb_and_redesign(
        &ConversionGraph::ring_core_design(),
        &reference_modes(),
        &DesignTargets::new(100.0),
        &spec,
        Execution::Parallel,
    )
    .unwrap();
    assert_eq!(r.trials.len(), 5);
    for t in &r.trials {
        assert_eq!(t.solution.as_ref(), Some(&r.nominal));
        assert_eq!(t.max_abs_dl, Some(0.0));
    }
    let csv = r.to_csv_string();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert!(rows.iter().all(|row| *row == rows[0]));
}

#[test]
fn perturbation_is_reproducible() {
    let spec = PerturbationSpec {
        sigma: 0.01,
        trials: 100,
        seed: 2024,
    };
    let run = |e| {
        perturb_and_redesign(
            &ConversionGraph::ring_core_design(),
            &reference_modes(),
            &DesignTargets::new(100.0),
            &spec,
            e,
        )
        .unwrap()
    };
    let a = run(Execution::Parallel);
    let b = run(Execution::Serial);
    assert_eq!(a.trials.len(), 100);
    assert_eq!(a.to_csv_string(), b.to_csv_string());
    assert_eq!(a.to_csv_string(), run(Execution::Parallel).to_csv_string());
    // snapshot of the first run
    assert_eq!(a.feasible_fraction(), 1.0);
    let median = a.median_max_dl().unwrap();
    assert!((median - 0.018898222730163894).abs() < 1e-12, "{median}");
}

#[test]
fn negative_sigma_rejected() {
    let spec = PerturbationSpec {
        sigma: -0.1,
        trials: 1,
        seed: 0,
    };
    assert!(perturb_and_redesign(
        &ConversionGraph::ring_core_design(),
        &reference_modes(),
        &DesignTargets::new(100.0),
        &spec,
        Execution::Serial
    )
    .is_err());
}
