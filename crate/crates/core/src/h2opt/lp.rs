//! Solver-neutral LP instance and its HiGHS backend.

use highs::{ColProblem, HighsModelStatus, Sense};

use crate::error::{Error, Result};

/// `min cᵀx  s.t.  row_lo ≤ Ax ≤ row_hi,  col_lo ≤ x ≤ col_hi`, stored by column.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LpInstance {
    pub col_cost: Vec<f64>,
    pub col_lo: Vec<f64>,
    pub col_hi: Vec<f64>,
    pub col_entries: Vec<Vec<(usize, f64)>>,
    pub row_lo: Vec<f64>,
    pub row_hi: Vec<f64>,
}

impl LpInstance {
    pub fn num_cols(&self) -> usize {
        self.col_cost.len()
    }

    pub fn num_rows(&self) -> usize {
        self.row_lo.len()
    }

    pub fn add_row(&mut self, lo: f64, hi: f64) -> usize {
        self.row_lo.push(lo);
        self.row_hi.push(hi);
        self.row_lo.len() - 1
    }

    pub fn add_col(&mut self, cost: f64, lo: f64, hi: f64) -> usize {
        self.col_cost.push(cost);
        self.col_lo.push(lo);
        self.col_hi.push(hi);
        self.col_entries.push(Vec::new());
        self.col_cost.len() - 1
    }

    pub fn set(&mut self, row: usize, col: usize, coef: f64) {
        if coef != 0.0 {
            self.col_entries[col].push((row, coef));
        }
    }

    /// Row activities `Ax`.
    pub fn activities(&self, x: &[f64]) -> Vec<f64> {
        let mut act = vec![0.0; self.num_rows()];
        for (j, entries) in self.col_entries.iter().enumerate() {
            for &(i, a) in entries {
                act[i] += a * x[j];
            }
        }
        act
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.col_cost.iter().zip(x).map(|(c, v)| c * v).sum()
    }
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub row_dual: Vec<f64>,
    pub col_dual: Vec<f64>,
    /// Relative primal-dual objective gap.
    pub gap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub gap_tolerance: f64,
    pub random_seed: i32,
    pub time_limit_s: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            gap_tolerance: 1e-6,
            random_seed: 0,
            time_limit_s: 600.0,
        }
    }
}

enum Attempt {
    Optimal(LpSolution),
    Infeasible,
    Failed(String),
}

fn run_highs(lp: &LpInstance, cost_scale: f64, presolve: bool, opts: &SolverOptions) -> Attempt {
    let mut pb = ColProblem::default();
    let rows: Vec<_> = lp
        .row_lo
        .iter()
        .zip(&lp.row_hi)
        .map(|(&lo, &hi)| pb.add_row(lo..=hi))
        .collect();
    for j in 0..lp.num_cols() {
        let factors: Vec<_> = lp.col_entries[j].iter().map(|&(i, a)| (rows[i], a)).collect();
        pb.add_column(lp.col_cost[j] * cost_scale, lp.col_lo[j]..=lp.col_hi[j], factors);
    }
    let mut model = match pb.try_optimise(Sense::Minimise) {
        Ok(m) => m,
        Err(e) => return Attempt::Failed(format!("model rejected: {e:?}")),
    };
    model.make_quiet();
    model.set_option("threads", 1);
    model.set_option("random_seed", opts.random_seed);
    model.set_option("time_limit", opts.time_limit_s);
    model.set_option("presolve", if presolve { "on" } else { "off" });
    let solved = match model.try_solve() {
        Ok(s) => s,
        Err(e) => return Attempt::Failed(format!("solver error: {e:?}")),
    };
    match solved.status() {
        HighsModelStatus::Optimal => {
            let sol = solved.get_solution();
            let x = sol.columns().to_vec();
            let row_dual: Vec<f64> = sol.dual_rows().iter().map(|d| d / cost_scale).collect();
            let col_dual: Vec<f64> = sol.dual_columns().iter().map(|d| d / cost_scale).collect();
            let objective = lp.objective(&x);
            match dual_objective(lp, &row_dual, &col_dual) {
                Some(dual) => {
                    let gap = (objective - dual).abs() / objective.abs().max(1.0);
                    Attempt::Optimal(LpSolution {
                        x,
                        objective,
                        row_dual,
                        col_dual,
                        gap,
                    })
                }
                None => Attempt::Failed("dual solution is infeasible".into()),
            }
        }
        HighsModelStatus::Infeasible => Attempt::Infeasible,
        other => Attempt::Failed(format!("solver stopped with status {other:?}")),
    }
}

/// Dual objective `Σ yᵢ·bᵢ + Σ zⱼ·lⱼ` picking the bound each multiplier
/// prices. `None` if a multiplier prices an infinite bound.
fn dual_objective(lp: &LpInstance, row_dual: &[f64], col_dual: &[f64]) -> Option<f64> {
    let scale = lp.col_cost.iter().fold(1.0f64, |m, c| m.max(c.abs()));
    let tol = 1e-9 * scale;
    let pick = |d: f64, lo: f64, hi: f64| -> Option<f64> {
        if d.abs() <= tol {
            Some(0.0)
        } else {
            let b = if d > 0.0 { lo } else { hi };
            b.is_finite().then_some(d * b)
        }
    };
    let mut total = 0.0;
    for i in 0..lp.num_rows() {
        total += pick(row_dual[i], lp.row_lo[i], lp.row_hi[i])?;
    }
    for j in 0..lp.num_cols() {
        total += pick(col_dual[j], lp.col_lo[j], lp.col_hi[j])?;
    }
    Some(total)
}

/// Solves the instance deterministically (single thread, fixed seed) and
/// checks the primal-dual gap. Numerical trouble triggers one retry with a
/// rescaled objective and presolve disabled.
pub fn solve(lp: &LpInstance, opts: &SolverOptions) -> Result<LpSolution> {
    let max_cost = lp.col_cost.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let retry_scale = if max_cost > 0.0 { 1.0 / max_cost } else { 1.0 };
    let mut reasons = Vec::new();
    for (scale, presolve) in [(1.0, true), (retry_scale, false)] {
        match run_highs(lp, scale, presolve, opts) {
            Attempt::Optimal(sol) if sol.gap <= opts.gap_tolerance => return Ok(sol),
            Attempt::Optimal(sol) => reasons.push(format!("primal-dual gap {:.3e}", sol.gap)),
            Attempt::Infeasible => return Err(Error::Infeasible("linear program has no feasible point".into())),
            Attempt::Failed(msg) => reasons.push(msg),
        }
    }
    Err(Error::Solver(reasons.join("; ")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_lp() {
        // min x + 2y  s.t.  x + y >= 3,  x <= 2
        let mut lp = LpInstance::default();
        let r = lp.add_row(3.0, f64::INFINITY);
        let x = lp.add_col(1.0, 0.0, 2.0);
        let y = lp.add_col(2.0, 0.0, f64::INFINITY);
        lp.set(r, x, 1.0);
        lp.set(r, y, 1.0);
        let s = solve(&lp, &SolverOptions::default()).unwrap();
        assert!((s.x[0] - 2.0).abs() < 1e-9 && (s.x[1] - 1.0).abs() < 1e-9);
        assert!((s.objective - 4.0).abs() < 1e-9);
        assert!(s.gap < 1e-9);
        assert!((s.row_dual[0] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_is_reported() {
        let mut lp = LpInstance::default();
        let r = lp.add_row(5.0, f64::INFINITY);
        let x = lp.add_col(1.0, 0.0, 1.0);
        lp.set(r, x, 1.0);
        assert!(matches!(solve(&lp, &SolverOptions::default()), Err(Error::Infeasible(_))));
    }
}
