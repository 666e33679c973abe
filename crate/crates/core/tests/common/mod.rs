//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use ttdl_core::{LinearSystem, ModeTable};

pub fn reference_modes() -> ModeTable {
    ModeTable::read_csv(include_str!("../../data/ring_core_modes.csv").as_bytes()).unwrap()
}

/// `J_n(x)` from its power series, summed until the terms stop mattering.
/// Keeps full relative precision for small `x`, where `J_n` is tiny; fine
/// for the moderate arguments of the step-index oracle.
pub fn j_series(n: i32, x: f64) -> f64 {
    let half = 0.5 * x;
    let mut term = (1..=n).fold(1.0, |acc, k| acc * half / k as f64);
    let mut sum = term;
    let mut k = 0;
    loop {
        k += 1;
        term *= -half * half / (k as f64 * (k + n) as f64);
        sum += term;
        if term.abs() < 1e-17 * sum.abs() && k > 2 {
            break;
        }
    }
    sum
}

/// `e^x K_n(x)` from `∫ exp(-x cosh t) cosh(nt) dt`.
pub fn k_scaled_integral(n: i32, x: f64) -> f64 {
    let h = 0.01;
    let mut sum = 0.5;
    let mut t: f64 = h;
    loop {
        let term = (-x * (t.cosh() - 1.0)).exp() * (n as f64 * t).cosh();
        sum += term;
        if term < 1e-20 * sum {
            break;
        }
        t += h;
    }
    sum * h
}

/// Guided modes of a step-index fiber from the classical relation
/// `u J_{l-1}(u) K_l(w) + w K_{l-1}(w) J_l(u) = 0`, `u² + w² = V²`.
/// Returns `(l, m, n_eff)`.
pub fn step_index_modes(
    radius_um: f64,
    n_core: f64,
    n_clad: f64,
    lambda_um: f64,
) -> Vec<(u32, u32, f64)> {
    let k0a = 2.0 * PI / lambda_um * radius_um;
    let v = k0a * ((n_core - n_clad) * (n_core + n_clad)).sqrt();
    let mut out = Vec::new();
    for l in 0..100 {
        let g = |u: f64| {
            let w = ((v - u) * (v + u)).sqrt();
            let (jm, km) = if l == 0 {
                (-j_series(1, u), k_scaled_integral(1, w))
            } else {
                (j_series(l - 1, u), k_scaled_integral(l - 1, w))
            };
            u * jm * k_scaled_integral(l, w) + w * km * j_series(l, u)
        };
        let n = 4000;
        let grid: Vec<f64> = (1..n).map(|i| v * i as f64 / n as f64).collect();
        let vals: Vec<f64> = grid.iter().map(|&u| g(u)).collect();
        let mut m = 0;
        for i in 0..grid.len() - 1 {
            if (vals[i] < 0.0) != (vals[i + 1] < 0.0) {
                let (mut lo, mut hi, mut flo) = (grid[i], grid[i + 1], vals[i]);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    let fm = g(mid);
                    if (fm < 0.0) == (flo < 0.0) {
                        lo = mid;
                        flo = fm;
                    } else {
                        hi = mid;
                    }
                }
                let u = 0.5 * (lo + hi);
                m += 1;
                let n_eff = (n_core * n_core - (u / k0a).powi(2)).sqrt();
                out.push((l as u32, m, n_eff));
            }
        }
        if m == 0 {
            break;
        }
    }
    out.sort_by(|a, b| b.2.total_cmp(&a.2));
    out
}

/// Small graphs whose equality systems leave one, two, two and three
/// lengths free.
pub const ORACLE_GRAPHS: [(&str, f64); 4] = [
    (
        "[sample 1]\nsegment = LP02, a\nsegment = LP12, b\n\
         [sample 2]\nsegment = LP01, c\nsegment = LP41, d\n\
         [sample 3]\nsegment = LP11, e\nsegment = LP31, f\nsegment = LP21, g\n",
        100.0,
    ),
    (
        "[sample 1]\nsegment = LP02, l02\nsegment = LP12, l12_1\n\
         [sample 2]\nsegment = LP02, l02\nsegment = LP12, l12_2\nsegment = LP01, l01_2\nsegment = LP41, l41_2\n\
         [sample 3]\nsegment = LP02, l02\nsegment = LP12, l12_3\nsegment = LP11, l11_3\nsegment = LP31, l31_3\n",
        100.0,
    ),
    (
        "[sample 1]\nsegment = LP01, a\nsegment = LP11, b\nsegment = LP21, c\n\
         [sample 2]\nsegment = LP02, d\nsegment = LP12, e\nsegment = LP31, f\n",
        1000.0,
    ),
    (
        "[sample 1]\nsegment = LP02, a\nsegment = LP11, b\n\
         [sample 2]\nsegment = LP01, c\nsegment = LP21, d\nsegment = LP41, e\n",
        2500.0,
    ),
];

/// Best achievable dispersion increment found by exhaustive search over a
/// grid of the free length variables, with the remaining lengths and `ΔD`
/// following from the equalities. Every admissible choice of which lengths
/// are free is searched, so optimal vertices with lengths at 0 or 1 land on
/// grid points. Handles up to three free variables; the third is scanned on
/// its feasible interval, where `ΔD` is affine and the best grid point is
/// at an end. Returns `(ΔD, lengths, free variable count)`.
pub fn grid_search_delta_d(sys: &LinearSystem, step: f64) -> Option<(f64, Vec<f64>, usize)> {
    assert!(sys.has_delta_d);
    let n = sys.variables.len();
    // column 0 is ΔD, columns 1..=n the lengths
    let order: Vec<usize> = std::iter::once(n).chain(0..n).collect();
    let a: Vec<Vec<f64>> = sys
        .rows
        .iter()
        .map(|r| {
            let scale = r
                .coefficients
                .iter()
                .fold(r.rhs.abs(), |m, v| m.max(v.abs()));
            order
                .iter()
                .map(|&c| r.coefficients[c] / scale)
                .chain(std::iter::once(r.rhs / scale))
                .collect()
        })
        .collect();
    let cols = n + 1;
    let rank =
        eliminate(a.clone(), &(0..cols).collect::<Vec<_>>(), cols).map_or(0, |(_, p)| p.len());
    let k = cols - rank;
    assert!(k <= 3, "{k} free variables");

    let mut best: Option<(f64, Vec<f64>)> = None;
    for free in combinations(&(1..cols).collect::<Vec<_>>(), k) {
        let pivot_cols: Vec<usize> = (0..cols).filter(|c| !free.contains(c)).collect();
        let Some((reduced, pivots)) = eliminate(a.clone(), &pivot_cols, cols) else {
            continue;
        };
        if pivots != pivot_cols {
            continue;
        }
        if let Some((d, x)) = search(&reduced, &pivots, &free, cols, step) {
            if best.as_ref().is_none_or(|b| d > b.0) {
                best = Some((d, x));
            }
        }
    }
    let (d, x) = best?;
    Some((d, x, k))
}

fn combinations(items: &[usize], k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for (i, &first) in items.iter().enumerate() {
        for mut rest in combinations(&items[i + 1..], k - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// Gauss-Jordan elimination pivoting only in `candidates`; returns the
/// reduced rows and the columns that received a pivot. `None` if the
/// remaining rows are inconsistent.
fn eliminate(
    mut a: Vec<Vec<f64>>,
    candidates: &[usize],
    cols: usize,
) -> Option<(Vec<Vec<f64>>, Vec<usize>)> {
    let mut pivots = Vec::new();
    let mut r = 0;
    for &c in candidates {
        if r == a.len() {
            break;
        }
        let p = (r..a.len())
            .max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))
            .unwrap();
        if a[p][c].abs() < 1e-10 {
            continue;
        }
        a.swap(r, p);
        let pv = a[r][c];
        for v in a[r].iter_mut() {
            *v /= pv;
        }
        for i in 0..a.len() {
            if i != r {
                let f = a[i][c];
                if f != 0.0 {
                    for k in 0..=cols {
                        a[i][k] -= f * a[r][k];
                    }
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    if a[r..]
        .iter()
        .any(|row| row[..cols].iter().all(|v| v.abs() < 1e-10) && row[cols].abs() > 1e-9)
    {
        return None;
    }
    Some((a, pivots))
}

fn search(
    a: &[Vec<f64>],
    pivots: &[usize],
    free: &[usize],
    cols: usize,
    step: f64,
) -> Option<(f64, Vec<f64>)> {
    let solve = |fv: &[f64]| -> Vec<f64> {
        let mut x = vec![0.0; cols];
        for (f, v) in free.iter().zip(fv) {
            x[*f] = *v;
        }
        for (row, &p) in pivots.iter().enumerate() {
            let mut v = a[row][cols];
            for (f, fvv) in free.iter().zip(fv) {
                v -= a[row][*f] * fvv;
            }
            x[p] = v;
        }
        x
    };
    let tol = 1e-9;
    let feasible = |x: &[f64]| x[1..].iter().all(|v| *v >= -tol && *v <= 1.0 + tol);
    let points = (1.0 / step).round() as usize;
    let at = |i: usize| i as f64 / points as f64;

    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut consider = |x: Vec<f64>| {
        if feasible(&x) && best.as_ref().is_none_or(|b| x[0] > b.0) {
            best = Some((x[0], x[1..].to_vec()));
        }
    };
    match free.len() {
        0 => consider(solve(&[])),
        1 => (0..=points).for_each(|i| consider(solve(&[at(i)]))),
        2 => {
            for i in 0..=points {
                for j in 0..=points {
                    consider(solve(&[at(i), at(j)]));
                }
            }
        }
        _ => {
            for i in 0..=points {
                for j in 0..=points {
                    let base = solve(&[at(i), at(j), 0.0]);
                    let unit = solve(&[at(i), at(j), 1.0]);
                    // every column is affine in the third free value
                    let (mut lo, mut hi) = (0.0f64, 1.0f64);
                    for c in 1..cols {
                        let (a0, b) = (base[c], unit[c] - base[c]);
                        if b.abs() < 1e-15 {
                            if a0 < -tol || a0 > 1.0 + tol {
                                hi = -1.0;
                            }
                            continue;
                        }
                        let (p, q) = ((-tol - a0) / b, (1.0 + tol - a0) / b);
                        lo = lo.max(p.min(q));
                        hi = hi.min(p.max(q));
                    }
                    if hi < lo {
                        continue;
                    }
                    let first = (lo * points as f64 - 1e-9).ceil().max(0.0) as usize;
                    let last = (hi * points as f64 + 1e-9).floor().min(points as f64) as usize;
                    if first > last {
                        continue;
                    }
                    let slope = unit[0] - base[0];
                    let pick = if slope > 0.0 { last } else { first };
                    consider(solve(&[at(i), at(j), at(pick)]));
                }
            }
        }
    }
    best
}
