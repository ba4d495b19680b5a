//! Dense two-phase simplex for small linear programs with bounded variables.
//!
//! Minimizes `c·p + constant` subject to `g·p <= rhs` rows and per-variable
//! bounds `lo <= p <= hi`. Pivoting follows Bland's rule, so the returned
//! vertex is deterministic even on degenerate problems.

use thiserror::Error;

pub const FEASIBILITY_TOL: f64 = 1e-9;
pub const PIVOT_TOL: f64 = 1e-10;

#[derive(Debug, Error, PartialEq)]
pub enum LpError {
    #[error("constraint {row} has {actual} coefficients, expected {expected}")]
    Dimension {
        row: usize,
        expected: usize,
        actual: usize,
    },
    #[error("non-finite coefficient in {0}")]
    NonFinite(&'static str),
    #[error("variable {var} has bounds [{lo}, {hi}]")]
    Bounds { var: usize, lo: f64, hi: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub constant: f64,
    /// Rows `(g, rhs)` meaning `g·p <= rhs`.
    pub constraints: Vec<(Vec<f64>, f64)>,
    /// `[lo, hi]` per variable; `lo` must be finite, `hi` may be infinite.
    pub bounds: Vec<(f64, f64)>,
}

impl LinearProgram {
    /// Objective `c`, no constraints, every variable in `[0, 1]`.
    pub fn new(objective: Vec<f64>) -> Self {
        let n = objective.len();
        Self {
            objective,
            constant: 0.0,
            constraints: Vec::new(),
            bounds: vec![(0.0, 1.0); n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_constraint(&mut self, g: Vec<f64>, rhs: f64) {
        self.constraints.push((g, rhs));
    }

    /// `|g·p| <= rhs`.
    pub fn add_abs_constraint(&mut self, g: Vec<f64>, rhs: f64) {
        for row in abs_constraint(g, rhs) {
            self.constraints.push(row);
        }
    }

    pub fn value_at(&self, p: &[f64]) -> f64 {
        dot(&self.objective, p) + self.constant
    }

    /// Largest violation of any row or bound at `p` (0 when feasible).
    pub fn max_violation(&self, p: &[f64]) -> f64 {
        let rows = self.constraints.iter().map(|(g, rhs)| dot(g, p) - rhs);
        let bounds = self.bounds.iter().zip(p).flat_map(|(&(lo, hi), &x)| [lo - x, x - hi]);
        rows.chain(bounds).fold(0.0, f64::max)
    }

    fn check(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        if self.objective.iter().any(|c| !c.is_finite()) || !self.constant.is_finite() {
            return Err(LpError::NonFinite("objective"));
        }
        if self.bounds.len() != n {
            return Err(LpError::Dimension {
                row: usize::MAX,
                expected: n,
                actual: self.bounds.len(),
            });
        }
        for (row, (g, rhs)) in self.constraints.iter().enumerate() {
            if g.len() != n {
                return Err(LpError::Dimension {
                    row,
                    expected: n,
                    actual: g.len(),
                });
            }
            if g.iter().any(|c| !c.is_finite()) || !rhs.is_finite() {
                return Err(LpError::NonFinite("constraints"));
            }
        }
        for (var, &(lo, hi)) in self.bounds.iter().enumerate() {
            if !lo.is_finite() || hi.is_nan() || lo > hi {
                return Err(LpError::Bounds { var, lo, hi });
            }
        }
        Ok(())
    }
}

/// `|g·p| <= rhs` as the pair `g·p <= rhs`, `-g·p <= rhs`.
pub fn abs_constraint(g: Vec<f64>, rhs: f64) -> [(Vec<f64>, f64); 2] {
    let neg = g.iter().map(|v| -v).collect();
    [(g, rhs), (neg, rhs)]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Optimal point; empty unless optimal.
    pub p: Vec<f64>,
    /// `c·p + constant`; NaN unless optimal.
    pub value: f64,
}

impl LpSolution {
    fn without_point(status: LpStatus) -> Self {
        Self {
            status,
            p: Vec::new(),
            value: f64::NAN,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    /// Reduced costs, last entry is minus the current objective value.
    cost: Vec<f64>,
    basis: Vec<usize>,
    /// Columns allowed to enter the basis.
    enterable: usize,
}

enum Outcome {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn width(&self) -> usize {
        self.cost.len() - 1
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.width();
        let piv = self.rows[r][c];
        for v in self.rows[r].iter_mut() {
            *v /= piv;
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for j in 0..=w {
                    row[j] -= f * pivot_row[j];
                }
                row[c] = 0.0;
            }
        }
        let f = self.cost[c];
        if f != 0.0 {
            for j in 0..=w {
                self.cost[j] -= f * pivot_row[j];
            }
            self.cost[c] = 0.0;
        }
        self.basis[r] = c;
    }

    fn run(&mut self) -> Outcome {
        let w = self.width();
        loop {
            let Some(c) = (0..self.enterable).find(|&j| self.cost[j] < -FEASIBILITY_TOL) else {
                return Outcome::Optimal;
            };
            let mut best: Option<(usize, f64)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                if row[c] > PIVOT_TOL {
                    let ratio = row[w] / row[c];
                    best = match best {
                        None => Some((i, ratio)),
                        Some((bi, br)) => {
                            if ratio < br - PIVOT_TOL
                                || (ratio <= br + PIVOT_TOL && self.basis[i] < self.basis[bi])
                            {
                                Some((i, ratio))
                            } else {
                                Some((bi, br))
                            }
                        }
                    };
                }
            }
            match best {
                Some((r, _)) => self.pivot(r, c),
                None => return Outcome::Unbounded,
            }
        }
    }
}

/// Solves `lp`. Infeasibility and unboundedness are statuses, not errors.
pub fn solve(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    lp.check()?;
    let n = lp.num_vars();
    let lo: Vec<f64> = lp.bounds.iter().map(|b| b.0).collect();

    // Shift to z = p - lo >= 0; finite upper bounds become rows.
    let mut rows: Vec<(Vec<f64>, f64)> = lp
        .constraints
        .iter()
        .map(|(g, rhs)| (g.clone(), rhs - dot(g, &lo)))
        .collect();
    for (j, &(l, h)) in lp.bounds.iter().enumerate() {
        if h.is_finite() {
            let mut g = vec![0.0; n];
            g[j] = 1.0;
            rows.push((g, h - l));
        }
    }

    let k = rows.len();
    let negative: Vec<usize> = (0..k).filter(|&i| rows[i].1 < 0.0).collect();
    let n_art = negative.len();
    let width = n + k + n_art;
    let mut tab = Vec::with_capacity(k);
    let mut basis = Vec::with_capacity(k);
    let mut art = 0;
    for (i, (g, rhs)) in rows.iter().enumerate() {
        let mut row = vec![0.0; width + 1];
        let sign = if *rhs < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            row[j] = sign * g[j];
        }
        row[n + i] = sign;
        row[width] = sign * rhs;
        if sign < 0.0 {
            row[n + k + art] = 1.0;
            basis.push(n + k + art);
            art += 1;
        } else {
            basis.push(n + i);
        }
        tab.push(row);
    }

    let mut t = Tableau {
        rows: tab,
        cost: vec![0.0; width + 1],
        basis,
        enterable: width,
    };

    if n_art > 0 {
        // Phase 1: minimize the sum of artificials.
        for j in n + k..width {
            t.cost[j] = 1.0;
        }
        for &i in &negative {
            for j in 0..=width {
                t.cost[j] -= t.rows[i][j];
            }
        }
        t.run();
        if -t.cost[width] > FEASIBILITY_TOL {
            return Ok(LpSolution::without_point(LpStatus::Infeasible));
        }
        for r in 0..k {
            if t.basis[r] >= n + k {
                if let Some(c) = (0..n + k).find(|&j| t.rows[r][j].abs() > PIVOT_TOL) {
                    t.pivot(r, c);
                }
            }
        }
        t.enterable = n + k;
    }

    // Phase 2.
    t.cost = vec![0.0; width + 1];
    t.cost[..n].copy_from_slice(&lp.objective);
    for r in 0..k {
        let b = t.basis[r];
        let cb = if b < n { lp.objective[b] } else { 0.0 };
        if cb != 0.0 {
            for j in 0..=width {
                t.cost[j] -= cb * t.rows[r][j];
            }
        }
    }
    if let Outcome::Unbounded = t.run() {
        return Ok(LpSolution::without_point(LpStatus::Unbounded));
    }

    let mut p = lo;
    for (r, &b) in t.basis.iter().enumerate() {
        if b < n {
            p[b] += t.rows[r][width];
        }
    }
    // Snap round-off back into the box.
    for (x, &(l, h)) in p.iter_mut().zip(&lp.bounds) {
        *x = x.clamp(l, h);
    }
    let value = lp.value_at(&p);
    Ok(LpSolution {
        status: LpStatus::Optimal,
        p,
        value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn lower_bound_via_row() {
        let mut lp = LinearProgram::new(vec![1.0]);
        lp.bounds = vec![(0.0, 10.0)];
        lp.add_constraint(vec![-1.0], -1.0);
        let s = solve(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.p[0] - 1.0).abs() < 1e-12);
        assert!((s.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_optimum_value() {
        let mut lp = LinearProgram::new(vec![-1.0, -1.0]);
        lp.add_constraint(vec![1.0, 1.0], 1.0);
        let s = solve(&lp).unwrap();
        assert!((s.value + 1.0).abs() < 1e-12);
        assert!(lp.max_violation(&s.p) <= FEASIBILITY_TOL);
    }

    #[test]
    fn contradictory_rows_infeasible() {
        let mut lp = LinearProgram::new(vec![1.0]);
        lp.bounds = vec![(-5.0, 5.0)];
        lp.add_constraint(vec![1.0], 0.0);
        lp.add_constraint(vec![-1.0], -1.0);
        assert_eq!(solve(&lp).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded_detected() {
        let mut lp = LinearProgram::new(vec![-1.0]);
        lp.bounds = vec![(0.0, f64::INFINITY)];
        assert_eq!(solve(&lp).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn abs_rows() {
        let [a, b] = abs_constraint(vec![1.0], 1.0);
        assert_eq!(a, (vec![1.0], 1.0));
        assert_eq!(b, (vec![-1.0], 1.0));
        let mut lp = LinearProgram::new(vec![-1.0, 0.0]);
        lp.add_abs_constraint(vec![1.0, -1.0], 0.0);
        lp.bounds = vec![(0.0, 1.0), (0.0, 0.4)];
        let s = solve(&lp).unwrap();
        assert!((s.p[0] - 0.4).abs() < 1e-12);
    }

    #[test]
    fn malformed_rejected() {
        let mut lp = LinearProgram::new(vec![1.0, 2.0]);
        lp.add_constraint(vec![1.0], 1.0);
        assert!(matches!(solve(&lp), Err(LpError::Dimension { row: 0, .. })));
        let mut lp = LinearProgram::new(vec![1.0]);
        lp.bounds = vec![(1.0, 0.0)];
        assert!(matches!(solve(&lp), Err(LpError::Bounds { .. })));
    }

    /// Solves the square system `a x = b` by Gaussian elimination with
    /// partial pivoting; `None` when singular.
    fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
        let n = b.len();
        for col in 0..n {
            let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
            if a[piv][col].abs() < 1e-9 {
                return None;
            }
            a.swap(col, piv);
            b.swap(col, piv);
            for r in 0..n {
                if r != col {
                    let f = a[r][col] / a[col][col];
                    for c in col..n {
                        a[r][c] -= f * a[col][c];
                    }
                    b[r] -= f * b[col];
                }
            }
        }
        Some((0..n).map(|i| b[i] / a[i][i]).collect())
    }

    fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut cur = Vec::with_capacity(k);
        fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if cur.len() == k {
                out.push(cur.clone());
                return;
            }
            for i in start..n {
                cur.push(i);
                rec(i + 1, n, k, cur, out);
                cur.pop();
            }
        }
        rec(0, n, k, &mut cur, &mut out);
        out
    }

    fn binomial(n: usize, k: usize) -> f64 {
        (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
    }

    /// Minimum over all vertices of a bounded LP; `None` when infeasible.
    fn vertex_enumeration(lp: &LinearProgram) -> Option<f64> {
        let n = lp.num_vars();
        let mut rows = lp.constraints.clone();
        for (j, &(l, h)) in lp.bounds.iter().enumerate() {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            rows.push((e.clone(), h));
            e[j] = -1.0;
            rows.push((e, -l));
        }
        let mut best: Option<f64> = None;
        for combo in combinations(rows.len(), n) {
            let a = combo.iter().map(|&i| rows[i].0.clone()).collect();
            let b = combo.iter().map(|&i| rows[i].1).collect();
            let Some(x) = solve_square(a, b) else { continue };
            if lp.max_violation(&x) <= 1e-9 {
                let v = lp.value_at(&x);
                best = Some(best.map_or(v, |b: f64| b.min(v)));
            }
        }
        best
    }

    #[test]
    fn random_lps_match_vertex_enumeration() {
        let mut rng = crate::seeded_rng(20);
        let grid = [-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0];
        let mut checked = 0;
        let mut infeasible = 0;
        while checked < 500 {
            let n = rng.random_range(1..=8);
            let k = rng.random_range(0..=12);
            if binomial(k + 2 * n, n) > 60_000.0 {
                continue;
            }
            let pick = |rng: &mut crate::Rng| grid[rng.random_range(0..grid.len())];
            let mut lp = LinearProgram::new((0..n).map(|_| pick(&mut rng)).collect());
            lp.constant = pick(&mut rng);
            lp.bounds = (0..n).map(|_| (rng.random_range(-1..=0) as f64, rng.random_range(1..=2) as f64)).collect();
            for _ in 0..k {
                let g = (0..n).map(|_| pick(&mut rng)).collect();
                lp.add_constraint(g, pick(&mut rng));
            }
            let s = solve(&lp).unwrap();
            match vertex_enumeration(&lp) {
                Some(v) => {
                    assert_eq!(s.status, LpStatus::Optimal, "{lp:?}");
                    assert!((s.value - v).abs() < 1e-7, "{} vs {v}: {lp:?}", s.value);
                    assert!(lp.max_violation(&s.p) <= FEASIBILITY_TOL);
                    assert!((s.value - lp.value_at(&s.p)).abs() <= 1e-9);
                }
                None => {
                    assert_eq!(s.status, LpStatus::Infeasible, "{lp:?}");
                    infeasible += 1;
                }
            }
            checked += 1;
        }
        assert!(infeasible > 0 && infeasible < 500);
    }
}
