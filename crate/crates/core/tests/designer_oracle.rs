mod common;

use ttdl_core::{assemble_constraints, solve_placements, ConversionGraph, DesignTargets};

#[test]
fn simplex_matches_exhaustive_grid() {
    let table = common::reference_modes();
    let mut free_counts = Vec::new();
    for (text, dtau) in common::ORACLE_GRAPHS {
        let g = ConversionGraph::parse(text).unwrap();
        let sys = assemble_constraints(&g, &table, &DesignTargets::new(dtau)).unwrap();
        let lp = solve_placements(&sys).unwrap();
        let (grid_d, grid_x, k) = common::grid_search_delta_d(&sys, 1e-3).unwrap();
        free_counts.push(k);
        let gap = lp.delta_d_ps_per_km_nm - grid_d;
        // the grid can only approach the optimum from below
        assert!(gap > -1e-9, "grid beat the simplex by {}", -gap);
        assert!(
            gap < 2e-3,
            "ΔD {} vs grid {grid_d}",
            lp.delta_d_ps_per_km_nm
        );
        let dx = lp
            .variables
            .iter()
            .zip(&grid_x)
            .map(|((_, a), b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(dx <= 1e-3, "argmax differs by {dx}");
        println!(
            "k={k} ΔD {} grid {grid_d} max|dx| {dx}",
            lp.delta_d_ps_per_km_nm
        );
    }
    free_counts.sort_unstable();
    assert_eq!(free_counts, vec![1, 2, 2, 3]);
}
