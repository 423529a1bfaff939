//! Dense two-phase simplex with dual extraction.
//!
//! Solves `max c.z` subject to `A_eq z = b_eq`, `A_le z <= b_le`, and
//! per-variable sign restrictions (`z_j >= 0` or free). Free variables are
//! split into differences of nonnegative parts; inequality rows receive
//! slacks; phase 1 drives artificials out of the basis. Pivoting uses
//! largest-reduced-cost pricing with fixed tie-breaking and falls back to
//! lowest-index (Bland) pricing after a run of degenerate steps, which
//! guarantees termination.
//!
//! The final primal and dual vectors are recomputed from the optimal basis
//! against the raw constraint data, not read off the iterated tableau, so
//! accumulated pivot roundoff does not leak into reported solutions. An
//! independent [`verify`] pass re-checks feasibility, complementary
//! slackness, and the duality gap from scratch.

use crate::{Error, Result};

/// `max c.z` with equality rows, inequality rows, and sign restrictions.
#[derive(Debug, Clone, Default)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub a_eq: Vec<Vec<f64>>,
    pub b_eq: Vec<f64>,
    pub a_le: Vec<Vec<f64>>,
    pub b_le: Vec<f64>,
    /// `free[j]` lifts the `z_j >= 0` restriction.
    pub free: Vec<bool>,
}

impl LinearProgram {
    /// All-nonnegative program with the given constraint blocks.
    pub fn new(
        objective: Vec<f64>,
        a_eq: Vec<Vec<f64>>,
        b_eq: Vec<f64>,
        a_le: Vec<Vec<f64>>,
        b_le: Vec<f64>,
    ) -> Self {
        let n = objective.len();
        LinearProgram {
            objective,
            a_eq,
            b_eq,
            a_le,
            b_le,
            free: vec![false; n],
        }
    }

    pub fn var_count(&self) -> usize {
        self.objective.len()
    }

    pub fn row_count(&self) -> usize {
        self.a_eq.len() + self.a_le.len()
    }

    fn validate(&self) -> Result<()> {
        let n = self.var_count();
        if self.free.len() != n {
            return Err(Error::config("free-flag length differs from objective"));
        }
        if self.a_eq.len() != self.b_eq.len() || self.a_le.len() != self.b_le.len() {
            return Err(Error::config("constraint matrix and rhs lengths differ"));
        }
        for row in self.a_eq.iter().chain(&self.a_le) {
            if row.len() != n {
                return Err(Error::config(format!(
                    "constraint row has {} coefficients, expected {n}",
                    row.len()
                )));
            }
        }
        let finite = self
            .objective
            .iter()
            .chain(self.b_eq.iter())
            .chain(self.b_le.iter())
            .chain(self.a_eq.iter().flatten())
            .chain(self.a_le.iter().flatten())
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::config("non-finite coefficient in linear program"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Solver outcome. `primal` and `dual` are meaningful only at
/// [`LpStatus::Optimal`]; duals are ordered equality rows first, then
/// inequality rows.
#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub primal: Vec<f64>,
    pub dual: Vec<f64>,
    pub objective: f64,
}

/// Tolerances and limits for one solve, centralized so every threshold is
/// explicit.
#[derive(Debug, Clone, Copy)]
pub struct LpConfig {
    /// Reduced costs above this enter the basis; pivot elements below it are
    /// treated as zero.
    pub pivot_tol: f64,
    /// Feasibility slack for phase-1 acceptance and verification.
    pub feas_tol: f64,
    /// Consecutive degenerate pivots before switching to Bland pricing.
    pub degeneracy_threshold: usize,
    /// Hard iteration cap; 0 picks a size-based default.
    pub max_iters: usize,
}

impl Default for LpConfig {
    fn default() -> Self {
        LpConfig {
            pivot_tol: 1e-9,
            feas_tol: 1e-8,
            degeneracy_threshold: 40,
            max_iters: 0,
        }
    }
}

/// Solves with default configuration.
pub fn solve(lp: &LinearProgram) -> Result<LpSolution> {
    solve_with(lp, &LpConfig::default())
}

struct Tableau {
    rows: usize,
    cols: usize,
    /// Row-major `rows x cols` constraint block.
    a: Vec<f64>,
    rhs: Vec<f64>,
    basis: Vec<usize>,
    artificial_start: usize,
}

impl Tableau {
    fn at(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.cols + j]
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let piv = self.at(row, col);
        let inv = 1.0 / piv;
        for j in 0..self.cols {
            self.a[row * self.cols + j] *= inv;
        }
        self.rhs[row] *= inv;
        self.a[row * self.cols + col] = 1.0;
        for i in 0..self.rows {
            if i == row {
                continue;
            }
            let factor = self.at(i, col);
            if factor == 0.0 {
                continue;
            }
            for j in 0..self.cols {
                let v = self.at(row, j);
                self.a[i * self.cols + j] -= factor * v;
            }
            self.a[i * self.cols + col] = 0.0;
            self.rhs[i] -= factor * self.rhs[row];
        }
        self.basis[row] = col;
    }
}

/// Reduced costs for objective `c` under the current basis.
fn canonical_costs(t: &Tableau, c: &[f64]) -> Vec<f64> {
    let mut d = c.to_vec();
    for (i, &b) in t.basis.iter().enumerate() {
        let coef = c[b];
        if coef == 0.0 {
            continue;
        }
        for j in 0..t.cols {
            d[j] -= coef * t.at(i, j);
        }
    }
    for &b in &t.basis {
        d[b] = 0.0;
    }
    d
}

enum PhaseOutcome {
    Done,
    Unbounded,
    IterationLimit,
}

/// Runs simplex iterations until no improving column remains.
fn run_phase(
    t: &mut Tableau,
    d: &mut [f64],
    cfg: &LpConfig,
    iters: &mut usize,
    max_iters: usize,
    allow_artificial: bool,
) -> PhaseOutcome {
    let mut degenerate_streak = 0usize;
    loop {
        let limit = if allow_artificial { t.cols } else { t.artificial_start };
        let entering = if degenerate_streak > cfg.degeneracy_threshold {
            // Bland pricing: lowest improvable index; immune to cycling.
            (0..limit).find(|&j| d[j] > cfg.pivot_tol)
        } else {
            let mut best: Option<(usize, f64)> = None;
            for j in 0..limit {
                if d[j] > cfg.pivot_tol && best.map_or(true, |(_, v)| d[j] > v) {
                    best = Some((j, d[j]));
                }
            }
            best.map(|(j, _)| j)
        };
        let Some(col) = entering else {
            return PhaseOutcome::Done;
        };
        let mut leaving: Option<(usize, f64)> = None;
        for i in 0..t.rows {
            let a = t.at(i, col);
            if a > cfg.pivot_tol {
                let ratio = t.rhs[i].max(0.0) / a;
                let better = match leaving {
                    None => true,
                    Some((cur, best)) => {
                        ratio < best - 1e-12
                            || (ratio < best + 1e-12 && t.basis[i] < t.basis[cur])
                    }
                };
                if better {
                    leaving = Some((i, ratio));
                }
            }
        }
        let Some((row, ratio)) = leaving else {
            return PhaseOutcome::Unbounded;
        };
        if ratio <= cfg.pivot_tol {
            degenerate_streak += 1;
        } else {
            degenerate_streak = 0;
        }
        let gain = d[col];
        t.pivot(row, col);
        for j in 0..t.cols {
            let v = t.at(row, j);
            if v != 0.0 {
                d[j] -= gain * v;
            }
        }
        d[col] = 0.0;
        *iters += 1;
        if *iters > max_iters {
            return PhaseOutcome::IterationLimit;
        }
    }
}

/// Gaussian elimination with partial pivoting; `a` is square row-major.
fn dense_solve(mut a: Vec<f64>, mut b: Vec<f64>, n: usize) -> Option<Vec<f64>> {
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&r, &s| a[r * n + col].abs().total_cmp(&a[s * n + col].abs()))?;
        if a[pivot_row * n + col].abs() < 1e-12 {
            return None;
        }
        if pivot_row != col {
            for j in 0..n {
                a.swap(col * n + j, pivot_row * n + j);
            }
            b.swap(col, pivot_row);
        }
        let inv = 1.0 / a[col * n + col];
        for r in col + 1..n {
            let factor = a[r * n + col] * inv;
            if factor == 0.0 {
                continue;
            }
            for j in col..n {
                a[r * n + j] -= factor * a[col * n + j];
            }
            b[r] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        let mut v = b[col];
        for j in col + 1..n {
            v -= a[col * n + j] * x[j];
        }
        x[col] = v / a[col * n + col];
    }
    Some(x)
}

/// Solves with explicit configuration.
pub fn solve_with(lp: &LinearProgram, cfg: &LpConfig) -> Result<LpSolution> {
    lp.validate()?;
    let n = lp.var_count();
    let m_eq = lp.a_eq.len();
    let m_le = lp.a_le.len();
    let m = m_eq + m_le;

    // Standard-form columns: split parts of each variable, then slacks, then
    // artificials. `split[j]` is the column of the negative part of a free
    // variable.
    let mut col_of = vec![0usize; n];
    let mut split = vec![None::<usize>; n];
    let mut next = 0usize;
    for j in 0..n {
        col_of[j] = next;
        next += 1;
        if lp.free[j] {
            split[j] = Some(next);
            next += 1;
        }
    }
    let slack_start = next;
    let artificial_start = slack_start + m_le;
    let total = artificial_start + m;

    // Row data in original orientation; sign[i] flips rows to nonnegative rhs.
    let row_coeff = |i: usize, j: usize| -> f64 {
        if i < m_eq {
            lp.a_eq[i][j]
        } else {
            lp.a_le[i - m_eq][j]
        }
    };
    let rhs_of = |i: usize| -> f64 {
        if i < m_eq {
            lp.b_eq[i]
        } else {
            lp.b_le[i - m_eq]
        }
    };
    let sign: Vec<f64> = (0..m)
        .map(|i| if rhs_of(i) < 0.0 { -1.0 } else { 1.0 })
        .collect();

    let mut a = vec![0.0; m * total];
    let mut rhs = vec![0.0; m];
    for i in 0..m {
        for j in 0..n {
            let v = sign[i] * row_coeff(i, j);
            a[i * total + col_of[j]] = v;
            if let Some(neg) = split[j] {
                a[i * total + neg] = -v;
            }
        }
        if i >= m_eq {
            a[i * total + slack_start + (i - m_eq)] = sign[i];
        }
        a[i * total + artificial_start + i] = 1.0;
        rhs[i] = sign[i] * rhs_of(i);
    }

    let mut t = Tableau {
        rows: m,
        cols: total,
        a,
        rhs,
        basis: Vec::with_capacity(m),
        artificial_start,
    };
    // Start from slack columns where they are identity columns, otherwise
    // artificials.
    for i in 0..m {
        if i >= m_eq && sign[i] > 0.0 {
            t.basis.push(slack_start + (i - m_eq));
        } else {
            t.basis.push(artificial_start + i);
        }
    }

    let max_iters = if cfg.max_iters > 0 {
        cfg.max_iters
    } else {
        2000 + 60 * (m + total)
    };
    let mut iters = 0usize;

    let solver_err = |message: &str, basis: &[usize]| Error::Solver {
        message: message.to_string(),
        last_basis: basis.to_vec(),
    };

    // Phase 1: maximize minus the sum of artificials.
    if t.basis.iter().any(|&b| b >= artificial_start) {
        let mut c1 = vec![0.0; total];
        for j in artificial_start..total {
            c1[j] = -1.0;
        }
        let mut d = canonical_costs(&t, &c1);
        match run_phase(&mut t, &mut d, cfg, &mut iters, max_iters, true) {
            PhaseOutcome::Done => {}
            PhaseOutcome::Unbounded => {
                return Err(solver_err("phase 1 reported unbounded", &t.basis))
            }
            PhaseOutcome::IterationLimit => {
                return Err(solver_err("iteration cap reached in phase 1", &t.basis))
            }
        }
        let infeasibility: f64 = t
            .basis
            .iter()
            .enumerate()
            .filter(|(_, &b)| b >= artificial_start)
            .map(|(i, _)| t.rhs[i].max(0.0))
            .sum();
        if infeasibility > cfg.feas_tol {
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                primal: Vec::new(),
                dual: Vec::new(),
                objective: f64::NAN,
            });
        }
        // Pivot zero-level artificials out where possible; rows with no
        // eligible column are redundant and keep their artificial at zero.
        for i in 0..m {
            if t.basis[i] >= artificial_start {
                if let Some(col) = (0..artificial_start).find(|&j| t.at(i, j).abs() > cfg.pivot_tol)
                {
                    t.pivot(i, col);
                }
            }
        }
    }

    // Phase 2: the real objective over standard-form columns.
    let mut c2 = vec![0.0; total];
    for j in 0..n {
        c2[col_of[j]] = lp.objective[j];
        if let Some(neg) = split[j] {
            c2[neg] = -lp.objective[j];
        }
    }
    let mut d = canonical_costs(&t, &c2);
    match run_phase(&mut t, &mut d, cfg, &mut iters, max_iters, false) {
        PhaseOutcome::Done => {}
        PhaseOutcome::Unbounded => {
            return Ok(LpSolution {
                status: LpStatus::Unbounded,
                primal: Vec::new(),
                dual: Vec::new(),
                objective: f64::INFINITY,
            });
        }
        PhaseOutcome::IterationLimit => {
            return Err(solver_err("iteration cap reached in phase 2", &t.basis))
        }
    }

    // Recompute the solution from the final basis against raw data. Basis
    // column b in original orientation: structural columns as given, slack
    // r is e_{m_eq+r}, artificial i is sign[i]*e_i.
    let column_entry = |i: usize, b: usize| -> f64 {
        if b < slack_start {
            let (j, neg) = (0..n)
                .find_map(|j| {
                    if col_of[j] == b {
                        Some((j, false))
                    } else if split[j] == Some(b) {
                        Some((j, true))
                    } else {
                        None
                    }
                })
                .expect("standard column maps to a variable");
            let v = row_coeff(i, j);
            if neg {
                -v
            } else {
                v
            }
        } else if b < artificial_start {
            let r = b - slack_start;
            f64::from(u8::from(i == m_eq + r))
        } else {
            let r = b - artificial_start;
            if i == r {
                sign[r]
            } else {
                0.0
            }
        }
    };
    let mut bmat = vec![0.0; m * m];
    for i in 0..m {
        for (pos, &b) in t.basis.iter().enumerate() {
            bmat[i * m + pos] = column_entry(i, b);
        }
    }
    let b_orig: Vec<f64> = (0..m).map(rhs_of).collect();
    let basic_values = dense_solve(bmat.clone(), b_orig, m)
        .ok_or_else(|| solver_err("singular final basis", &t.basis))?;

    let mut standard = vec![0.0; total];
    for (pos, &b) in t.basis.iter().enumerate() {
        standard[b] = basic_values[pos];
    }
    let mut primal = vec![0.0; n];
    for j in 0..n {
        primal[j] = standard[col_of[j]] - split[j].map_or(0.0, |neg| standard[neg]);
    }

    // Duals solve B^T y = c_B.
    let mut bt = vec![0.0; m * m];
    for i in 0..m {
        for pos in 0..m {
            bt[pos * m + i] = bmat[i * m + pos];
        }
    }
    let c_b: Vec<f64> = t.basis.iter().map(|&b| c2[b]).collect();
    let dual = dense_solve(bt, c_b, m).ok_or_else(|| solver_err("singular basis transpose", &t.basis))?;

    let objective = lp
        .objective
        .iter()
        .zip(&primal)
        .map(|(c, z)| c * z)
        .sum();
    Ok(LpSolution {
        status: LpStatus::Optimal,
        primal,
        dual,
        objective,
    })
}

/// Outcome of an independent optimality check.
#[derive(Debug, Clone)]
pub struct VerificationReport {
    pub primal_feasible: bool,
    pub dual_feasible: bool,
    pub complementary: bool,
    pub duality_gap: f64,
    pub ok: bool,
}

/// Re-derives feasibility, complementary slackness, and the duality gap from
/// the raw program data; shares no state with the solver beyond the reported
/// vectors.
pub fn verify(lp: &LinearProgram, sol: &LpSolution, tol: f64) -> Result<VerificationReport> {
    lp.validate()?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Precondition(
            "verification applies to optimal solutions".into(),
        ));
    }
    let n = lp.var_count();
    let m_eq = lp.a_eq.len();
    if sol.primal.len() != n || sol.dual.len() != m_eq + lp.a_le.len() {
        return Err(Error::config("solution vectors do not match program shape"));
    }
    let scale = 1.0 + sol.objective.abs();

    let mut primal_feasible = true;
    for (row, &b) in lp.a_eq.iter().zip(&lp.b_eq) {
        let lhs: f64 = row.iter().zip(&sol.primal).map(|(a, z)| a * z).sum();
        if (lhs - b).abs() > tol * (1.0 + b.abs()) {
            primal_feasible = false;
        }
    }
    let mut slacks = Vec::with_capacity(lp.a_le.len());
    for (row, &b) in lp.a_le.iter().zip(&lp.b_le) {
        let lhs: f64 = row.iter().zip(&sol.primal).map(|(a, z)| a * z).sum();
        slacks.push(b - lhs);
        if lhs - b > tol * (1.0 + b.abs()) {
            primal_feasible = false;
        }
    }
    for j in 0..n {
        if !lp.free[j] && sol.primal[j] < -tol {
            primal_feasible = false;
        }
    }

    let mut dual_feasible = true;
    let mut complementary = true;
    for (i, slack) in slacks.iter().enumerate() {
        let y = sol.dual[m_eq + i];
        if y < -tol {
            dual_feasible = false;
        }
        if (y * slack).abs() > tol * scale {
            complementary = false;
        }
    }
    for j in 0..n {
        let mut reduced = lp.objective[j];
        for (i, row) in lp.a_eq.iter().enumerate() {
            reduced -= sol.dual[i] * row[j];
        }
        for (i, row) in lp.a_le.iter().enumerate() {
            reduced -= sol.dual[m_eq + i] * row[j];
        }
        if lp.free[j] {
            if reduced.abs() > tol * scale {
                dual_feasible = false;
            }
        } else {
            if reduced > tol * scale {
                dual_feasible = false;
            }
            if (sol.primal[j] * reduced).abs() > tol * scale {
                complementary = false;
            }
        }
    }

    let dual_objective: f64 = lp
        .b_eq
        .iter()
        .chain(&lp.b_le)
        .zip(&sol.dual)
        .map(|(b, y)| b * y)
        .sum();
    let duality_gap = (sol.objective - dual_objective).abs();
    let ok = primal_feasible
        && dual_feasible
        && complementary
        && duality_gap <= tol * (1.0 + sol.objective.abs());
    Ok(VerificationReport {
        primal_feasible,
        dual_feasible,
        complementary,
        duality_gap,
        ok,
    })
}
