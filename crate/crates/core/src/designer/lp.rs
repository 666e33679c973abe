//! Dense two-phase simplex for small equality-constrained programs.
//!
//! Variables are either boxed `0 <= x <= upper` or free.
//! Bland's rule is used throughout, which is slow but cannot cycle; the
//! programs solved here have a few dozen columns at most.

const PIVOT_TOL: f64 = 1e-12;
const FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Bound {
    /// `0 <= x <= upper`.
    Boxed(f64),
    Free,
}

pub(crate) struct Problem<'a> {
    pub rows: &'a [Vec<f64>],
    pub rhs: &'a [f64],
    pub bounds: &'a [Bound],
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Outcome {
    Optimal(Vec<f64>),
    /// Equality rows that could not be satisfied.
    Infeasible(Vec<usize>),
    Unbounded,
}

struct Tableau {
    /// `rows × (cols + 1)`, last column is the right-hand side.
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.t[r][c];
        for v in &mut self.t[r] {
            *v /= p;
        }
        let pivot_row = self.t[r].clone();
        for (i, row) in self.t.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                row[c] = 0.0;
            }
        }
        self.basis[r] = c;
    }

    /// Maximizes `cost · x` over columns allowed to enter. Returns `false`
    /// if the objective is unbounded.
    fn optimize(&mut self, cost: &[f64], allowed: &[bool]) -> bool {
        loop {
            let entering = (0..self.cols).find(|&j| {
                if !allowed[j] || self.basis.contains(&j) {
                    return false;
                }
                let reduced: f64 = cost[j]
                    - self
                        .basis
                        .iter()
                        .zip(&self.t)
                        .map(|(&b, row)| cost[b] * row[j])
                        .sum::<f64>();
                reduced > PIVOT_TOL
            });
            let Some(c) = entering else { return true };
            let mut best: Option<(f64, usize, usize)> = None;
            for (i, row) in self.t.iter().enumerate() {
                if row[c] > PIVOT_TOL {
                    let ratio = row[self.cols] / row[c];
                    let better = match best {
                        None => true,
                        Some((r, _, b)) => {
                            ratio < r - 1e-15 || (ratio <= r + 1e-15 && self.basis[i] < b)
                        }
                    };
                    if better {
                        best = Some((ratio, i, self.basis[i]));
                    }
                }
            }
            match best {
                Some((_, r, _)) => self.pivot(r, c),
                None => return false,
            }
        }
    }
}

/// Maximizes `objective · x` subject to `rows · x = rhs` and the bounds.
pub(crate) fn maximize(problem: &Problem, objective: &[f64]) -> Outcome {
    let n = problem.bounds.len();
    // structural columns: one per variable, a second (negative part) for free ones
    let mut columns: Vec<(usize, f64)> = Vec::new();
    for (j, b) in problem.bounds.iter().enumerate() {
        columns.push((j, 1.0));
        if *b == Bound::Free {
            columns.push((j, -1.0));
        }
    }
    let ns = columns.len();
    let boxed: Vec<(usize, f64)> = columns
        .iter()
        .enumerate()
        .filter_map(|(c, &(j, _))| match problem.bounds[j] {
            Bound::Boxed(u) => Some((c, u)),
            _ => None,
        })
        .collect();
    let m_eq = problem.rows.len();
    let m = m_eq + boxed.len();
    let slack0 = ns;
    let art0 = ns + boxed.len();
    let cols = art0 + m_eq;

    let mut t = vec![vec![0.0; cols + 1]; m];
    for (i, (row, &b)) in problem.rows.iter().zip(problem.rhs).enumerate() {
        let scale = row
            .iter()
            .fold(b.abs(), |a, v| a.max(v.abs()))
            .max(f64::MIN_POSITIVE);
        let sign = if b < 0.0 { -1.0 } else { 1.0 };
        for (c, &(j, s)) in columns.iter().enumerate() {
            t[i][c] = sign * s * row[j] / scale;
        }
        t[i][art0 + i] = 1.0;
        t[i][cols] = sign * b / scale;
    }
    for (k, &(c, u)) in boxed.iter().enumerate() {
        let i = m_eq + k;
        t[i][c] = 1.0;
        t[i][slack0 + k] = 1.0;
        t[i][cols] = u;
    }
    let basis: Vec<usize> = (0..m_eq)
        .map(|i| art0 + i)
        .chain((0..boxed.len()).map(|k| slack0 + k))
        .collect();
    let mut tab = Tableau { t, basis, cols };

    // phase 1
    let mut cost = vec![0.0; cols];
    for c in cost.iter_mut().skip(art0) {
        *c = -1.0;
    }
    let all = vec![true; cols];
    tab.optimize(&cost, &all);
    let violated: Vec<usize> = tab
        .basis
        .iter()
        .zip(&tab.t)
        .filter(|(&b, row)| b >= art0 && row[cols] > FEASIBILITY_TOL)
        .map(|(&b, _)| b - art0)
        .collect();
    if !violated.is_empty() {
        let mut v = violated;
        v.sort_unstable();
        return Outcome::Infeasible(v);
    }
    // drive zero-valued artificials out where possible
    for r in 0..m {
        if tab.basis[r] >= art0 {
            if let Some(c) = (0..art0).find(|&c| tab.t[r][c].abs() > 1e-9) {
                tab.pivot(r, c);
            }
        }
    }

    // phase 2
    let mut cost = vec![0.0; cols];
    for (c, &(j, s)) in columns.iter().enumerate() {
        cost[c] = s * objective[j];
    }
    let allowed: Vec<bool> = (0..cols).map(|c| c < art0).collect();
    if !tab.optimize(&cost, &allowed) {
        return Outcome::Unbounded;
    }
    let mut x = vec![0.0; n];
    for (r, &b) in tab.basis.iter().enumerate() {
        if b < ns {
            let (j, s) = columns[b];
            x[j] += s * tab.t[r][cols];
        }
    }
    Outcome::Optimal(x)
}
