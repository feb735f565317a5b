//! Dense tableau simplex for `min wᵀy  s.t.  D y ≤ q`, with a leading block
//! of free variables and nonnegative remaining variables.
//!
//! Internally every problem is brought to the bounded standard form
//! `min cᵀx  s.t.  A x = b, 0 ≤ x ≤ u` and solved with a two-phase bounded
//! variable tableau method. Either the problem itself or its LP dual is
//! tabulated, whichever gives the smaller tableau; the dual route reads the
//! primal point back from the simplex multipliers and is verified against
//! the original constraints before it is accepted.

use crate::error::{Error, Result};
use crate::linalg::Matrix;

const PIVOT_TOL: f64 = 1e-9;
const OPT_TOL: f64 = 1e-9;
const RATIO_TIE: f64 = 1e-12;
/// Consecutive degenerate pivots tolerated under Dantzig pricing before
/// switching to Bland's rule.
const DEGENERATE_SWITCH: usize = 50;

/// `min wᵀy` subject to `D y ≤ q`; the first `num_free` entries of `y` are
/// free, the rest are nonnegative.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub constraints: Matrix,
    pub rhs: Vec<f64>,
    pub num_free: usize,
}

impl LinearProgram {
    pub fn new(objective: Vec<f64>, constraints: Matrix, rhs: Vec<f64>, num_free: usize) -> Result<Self> {
        if constraints.cols() != objective.len() || constraints.rows() != rhs.len() {
            return Err(Error::dims(
                "LinearProgram::new",
                format!(
                    "D is {:?}, w has {}, q has {}",
                    constraints.shape(),
                    objective.len(),
                    rhs.len()
                ),
            ));
        }
        if num_free > objective.len() {
            return Err(Error::InvalidArgument(format!(
                "num_free {num_free} exceeds {} variables",
                objective.len()
            )));
        }
        Ok(LinearProgram {
            objective,
            constraints,
            rhs,
            num_free,
        })
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    /// Largest violation of `D y ≤ q` and of the sign constraints.
    pub fn max_violation(&self, y: &[f64]) -> f64 {
        let dy = self.constraints.mul_vec(y).expect("y sized to the program");
        let rows = dy.iter().zip(&self.rhs).fold(0.0f64, |m, (a, b)| m.max(a - b));
        let signs = y[self.num_free..].iter().fold(0.0f64, |m, v| m.max(-v));
        rows.max(signs).max(0.0)
    }

    pub fn value(&self, y: &[f64]) -> f64 {
        self.objective.iter().zip(y).map(|(a, b)| a * b).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Optimal point; empty unless `status == Optimal`.
    pub y: Vec<f64>,
    pub objective_value: f64,
    /// Simplex iterations, bound flips included.
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PivotRule {
    /// Lowest eligible index enters, lowest basic index leaves on ties.
    Bland,
    /// Most negative reduced cost enters; falls back to Bland's rule after a
    /// run of degenerate pivots.
    #[default]
    Dantzig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Route {
    #[default]
    Auto,
    Primal,
    Dual,
}

#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    pub pivot_rule: PivotRule,
    pub route: Route,
    /// Iteration cap per phase; `None` picks `50·(rows + cols)`.
    pub max_iterations: Option<usize>,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions {
            pivot_rule: PivotRule::Dantzig,
            route: Route::Auto,
            max_iterations: None,
        }
    }
}

pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution> {
    solve_lp_with(lp, &SimplexOptions::default())
}

pub fn solve_lp_with(lp: &LinearProgram, opts: &SimplexOptions) -> Result<LpSolution> {
    let kept = presolve_rows(lp);
    let route = match opts.route {
        Route::Auto => {
            let primal = primal_size(lp, &kept);
            match dual_size(lp, &kept) {
                Some(dual) if dual < primal => Route::Dual,
                _ => Route::Primal,
            }
        }
        r => r,
    };
    if route == Route::Dual {
        if let Some(sol) = solve_via_dual(lp, &kept, opts)? {
            return Ok(sol);
        }
    }
    solve_primal(lp, &kept, opts)
}

/// Rows that are not implied by the sign constraints. A row `-c·y_j ≤ q`
/// with `c > 0`, `q ≥ 0` and `y_j ≥ 0` is always satisfied.
fn presolve_rows(lp: &LinearProgram) -> Vec<usize> {
    let d = &lp.constraints;
    (0..d.rows())
        .filter(|&i| {
            let row = d.row(i);
            let mut nz = row.iter().enumerate().filter(|(_, v)| **v != 0.0);
            match (nz.next(), nz.next()) {
                (None, _) => lp.rhs[i] < 0.0,
                (Some((j, v)), None) => !(j >= lp.num_free && *v < 0.0 && lp.rhs[i] >= 0.0),
                _ => true,
            }
        })
        .collect()
}

fn primal_size(lp: &LinearProgram, kept: &[usize]) -> usize {
    let cols = 2 * lp.num_free + (lp.num_vars() - lp.num_free) + kept.len();
    let artificials = kept.iter().filter(|&&i| lp.rhs[i] < 0.0).count();
    kept.len() * (cols + artificials)
}

fn dual_size(lp: &LinearProgram, kept: &[usize]) -> Option<usize> {
    let (general, _) = classify_columns(lp, kept)?;
    let rows = lp.num_free + general.len();
    let cols = kept.len() + general.len() + lp.num_free;
    Some(rows * cols)
}

fn solve_primal(lp: &LinearProgram, kept: &[usize], opts: &SimplexOptions) -> Result<LpSolution> {
    let nf = lp.num_free;
    let nn = lp.num_vars() - nf;
    let m = kept.len();
    let n = 2 * nf + nn + m;
    let mut a = Matrix::zeros(m, n);
    let mut b = Vec::with_capacity(m);
    for (r, &i) in kept.iter().enumerate() {
        let src = lp.constraints.row(i);
        let dst = a.row_mut(r);
        dst[..nf].copy_from_slice(&src[..nf]);
        for j in 0..nf {
            dst[nf + j] = -src[j];
        }
        dst[2 * nf..2 * nf + nn].copy_from_slice(&src[nf..]);
        dst[2 * nf + nn + r] = 1.0;
        b.push(lp.rhs[i]);
    }
    let mut c = Vec::with_capacity(n);
    c.extend_from_slice(&lp.objective[..nf]);
    c.extend(lp.objective[..nf].iter().map(|v| -v));
    c.extend_from_slice(&lp.objective[nf..]);
    c.resize(n, 0.0);
    let bounded = BoundedLp {
        a,
        b,
        c,
        upper: vec![f64::INFINITY; n],
    };
    let res = solve_bounded(&bounded, opts)?;
    let mut sol = LpSolution {
        status: res.status,
        y: Vec::new(),
        objective_value: f64::NAN,
        iterations: res.iterations,
    };
    if res.status == LpStatus::Optimal {
        let mut y = Vec::with_capacity(lp.num_vars());
        for j in 0..nf {
            y.push(res.x[j] - res.x[nf + j]);
        }
        y.extend_from_slice(&res.x[2 * nf..2 * nf + nn]);
        sol.objective_value = lp.value(&y);
        sol.y = y;
    }
    Ok(sol)
}

/// How each nonnegative primal column appears in the dual.
#[derive(Debug, Clone, Copy)]
enum ColumnRole {
    /// Single entry `-c` in kept row `k`: bounds the dual `μ_k ≤ w_j / c`.
    Bound { row: usize, coef: f64 },
    /// Dual constraint always slack; the primal variable is zero.
    Inactive,
    /// General dual inequality row.
    General,
}

/// Returns the general-column list and the role of each nonnegative column,
/// or `None` when the dual is trivially infeasible (left to the primal route).
fn classify_columns(lp: &LinearProgram, kept: &[usize]) -> Option<(Vec<usize>, Vec<ColumnRole>)> {
    let d = &lp.constraints;
    let mut general = Vec::new();
    let mut roles = Vec::with_capacity(lp.num_vars() - lp.num_free);
    for j in lp.num_free..lp.num_vars() {
        let w = lp.objective[j];
        let mut nz = kept
            .iter()
            .enumerate()
            .filter(|(_, &i)| d[(i, j)] != 0.0)
            .map(|(k, &i)| (k, d[(i, j)]));
        let role = match (nz.next(), nz.next()) {
            (None, _) => {
                if w < 0.0 {
                    return None;
                }
                ColumnRole::Inactive
            }
            (Some((k, v)), None) => {
                if v < 0.0 {
                    if w < 0.0 {
                        return None;
                    }
                    ColumnRole::Bound { row: k, coef: -v }
                } else if w >= 0.0 {
                    ColumnRole::Inactive
                } else {
                    ColumnRole::General
                }
            }
            _ => ColumnRole::General,
        };
        if matches!(role, ColumnRole::General) {
            general.push(j);
        }
        roles.push(role);
    }
    Some((general, roles))
}

/// Solves the LP dual
/// `min qᵀμ  s.t.  D_freeᵀ μ = -w_free,  -D_jᵀ μ ≤ w_j,  μ ≥ 0`
/// and recovers `y`. Returns `None` when the dual route cannot produce a
/// verified optimum.
fn solve_via_dual(lp: &LinearProgram, kept: &[usize], opts: &SimplexOptions) -> Result<Option<LpSolution>> {
    let Some((general, roles)) = classify_columns(lp, kept) else {
        return Ok(None);
    };
    let d = &lp.constraints;
    let nf = lp.num_free;
    let k = kept.len();
    let g = general.len();
    let m = nf + g;
    let n = k + g;

    let mut upper = vec![f64::INFINITY; n];
    let mut bound_owner: Vec<Option<(usize, f64)>> = vec![None; k];
    for (idx, role) in roles.iter().enumerate() {
        if let ColumnRole::Bound { row, coef } = *role {
            let j = nf + idx;
            let ub = lp.objective[j] / coef;
            if ub < upper[row] {
                upper[row] = ub;
                bound_owner[row] = Some((j, coef));
            }
        }
    }

    let mut a = Matrix::zeros(m, n);
    let mut b = vec![0.0; m];
    for (col, &i) in kept.iter().enumerate() {
        let src = d.row(i);
        for j in 0..nf {
            a[(j, col)] = src[j];
        }
        for (gr, &j) in general.iter().enumerate() {
            a[(nf + gr, col)] = -src[j];
        }
    }
    for (bj, obj) in b.iter_mut().zip(&lp.objective).take(nf) {
        *bj = -obj;
    }
    for (gr, &j) in general.iter().enumerate() {
        a[(nf + gr, k + gr)] = 1.0;
        b[nf + gr] = lp.objective[j];
    }
    let c: Vec<f64> = kept
        .iter()
        .map(|&i| lp.rhs[i])
        .chain(std::iter::repeat_n(0.0, g))
        .collect();

    let bounded = BoundedLp { a, b, c, upper };
    let res = solve_bounded(&bounded, opts)?;
    if res.status != LpStatus::Optimal {
        return Ok(None);
    }

    let mut y = vec![0.0; lp.num_vars()];
    y[..nf].copy_from_slice(&res.duals[..nf]);
    for (gr, &j) in general.iter().enumerate() {
        y[j] = (-res.duals[nf + gr]).max(0.0);
    }
    for (row, owner) in bound_owner.iter().enumerate() {
        if let Some((j, coef)) = owner {
            y[*j] = (-res.reduced_costs[row]).max(0.0) / coef;
        }
    }

    let value = lp.value(&y);
    let dual_value = -res.objective;
    let qscale = lp.rhs.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let ok = lp.max_violation(&y) <= 1e-9 * qscale && (value - dual_value).abs() <= 1e-9 * (1.0 + value.abs());
    if !ok {
        return Ok(None);
    }
    Ok(Some(LpSolution {
        status: LpStatus::Optimal,
        y,
        objective_value: value,
        iterations: res.iterations,
    }))
}

/// `min cᵀx  s.t.  A x = b,  0 ≤ x ≤ upper`.
struct BoundedLp {
    a: Matrix,
    b: Vec<f64>,
    c: Vec<f64>,
    upper: Vec<f64>,
}

struct BoundedResult {
    status: LpStatus,
    x: Vec<f64>,
    /// Multipliers of the equality rows, in the caller's row signs.
    duals: Vec<f64>,
    /// `c - Aᵀπ` for the structural columns.
    reduced_costs: Vec<f64>,
    objective: f64,
    iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarState {
    Basic,
    Lower,
    Upper,
}

struct Tableau {
    m: usize,
    n: usize,
    t: Vec<f64>,
    beta: Vec<f64>,
    basis: Vec<usize>,
    state: Vec<VarState>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    d: Vec<f64>,
    first_artificial: usize,
    scratch: Vec<usize>,
}

enum Outcome {
    Optimal,
    Unbounded,
}

fn solve_bounded(lp: &BoundedLp, opts: &SimplexOptions) -> Result<BoundedResult> {
    let m = lp.a.rows();
    let n_struct = lp.a.cols();

    let sign: Vec<f64> = lp.b.iter().map(|v| if *v < 0.0 { -1.0 } else { 1.0 }).collect();

    // unit columns usable as the starting basis
    let mut start_col: Vec<Option<usize>> = vec![None; m];
    for j in 0..n_struct {
        let mut hit = None;
        let mut unit = true;
        for (i, &s) in sign.iter().enumerate() {
            let v = lp.a[(i, j)];
            if v != 0.0 {
                if hit.is_some() || s * v != 1.0 {
                    unit = false;
                    break;
                }
                hit = Some(i);
            }
        }
        if let (true, Some(i)) = (unit, hit) {
            if start_col[i].is_none() {
                start_col[i] = Some(j);
            }
        }
    }
    let artificial_rows: Vec<usize> = (0..m).filter(|&i| start_col[i].is_none()).collect();
    let n = n_struct + artificial_rows.len();
    let mut t = vec![0.0; m * n];
    for i in 0..m {
        let src = lp.a.row(i);
        let dst = &mut t[i * n..i * n + n_struct];
        for (o, v) in dst.iter_mut().zip(src) {
            *o = sign[i] * v;
        }
    }
    for (k, &i) in artificial_rows.iter().enumerate() {
        t[i * n + n_struct + k] = 1.0;
        start_col[i] = Some(n_struct + k);
    }
    let start_col: Vec<usize> = start_col.into_iter().map(|c| c.expect("assigned")).collect();

    let mut upper = lp.upper.clone();
    upper.resize(n, f64::INFINITY);
    let mut state = vec![VarState::Lower; n];
    for &j in &start_col {
        state[j] = VarState::Basic;
    }
    let beta: Vec<f64> = (0..m).map(|i| sign[i] * lp.b[i]).collect();

    let mut phase1_cost = vec![0.0; n];
    for c in phase1_cost.iter_mut().skip(n_struct) {
        *c = 1.0;
    }
    let mut tab = Tableau {
        m,
        n,
        t,
        beta,
        basis: start_col.clone(),
        state,
        upper,
        cost: phase1_cost,
        d: vec![0.0; n],
        first_artificial: n_struct,
        scratch: Vec::new(),
    };
    let cap = opts.max_iterations.unwrap_or(50 * (m + n));
    let mut iterations = 0;

    let bscale = lp.b.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
    let infeasibility = |tab: &Tableau| -> f64 {
        (0..tab.m)
            .filter(|&r| tab.basis[r] >= tab.first_artificial)
            .map(|r| tab.beta[r])
            .sum()
    };

    if infeasibility(&tab) > 0.0 {
        tab.recompute_reduced_costs();
        match tab.run(opts.pivot_rule, cap, &mut iterations)? {
            Outcome::Optimal => {}
            // phase one is bounded below by zero
            Outcome::Unbounded => unreachable!("phase one objective is bounded"),
        }
        if infeasibility(&tab) > 1e-9 * bscale {
            return Ok(BoundedResult {
                status: LpStatus::Infeasible,
                x: Vec::new(),
                duals: Vec::new(),
                reduced_costs: Vec::new(),
                objective: f64::NAN,
                iterations,
            });
        }
    }

    for j in n_struct..n {
        tab.upper[j] = 0.0;
        if tab.state[j] == VarState::Upper {
            tab.state[j] = VarState::Lower;
        }
    }
    tab.cost = lp.c.clone();
    tab.cost.resize(n, 0.0);
    tab.recompute_reduced_costs();
    let outcome = tab.run(opts.pivot_rule, cap, &mut iterations)?;
    if let Outcome::Unbounded = outcome {
        return Ok(BoundedResult {
            status: LpStatus::Unbounded,
            x: Vec::new(),
            duals: Vec::new(),
            reduced_costs: Vec::new(),
            objective: f64::NAN,
            iterations,
        });
    }

    let mut x = vec![0.0; n_struct];
    for (j, xj) in x.iter_mut().enumerate() {
        *xj = match tab.state[j] {
            VarState::Lower => 0.0,
            VarState::Upper => tab.upper[j],
            VarState::Basic => 0.0,
        };
    }
    for r in 0..m {
        let j = tab.basis[r];
        if j < n_struct {
            x[j] = tab.beta[r];
        }
    }
    let duals: Vec<f64> = (0..m)
        .map(|i| {
            let j = start_col[i];
            sign[i] * (tab.cost[j] - tab.d[j])
        })
        .collect();
    let objective = lp.c.iter().zip(&x).map(|(a, b)| a * b).sum();
    Ok(BoundedResult {
        status: LpStatus::Optimal,
        x,
        duals,
        reduced_costs: tab.d[..n_struct].to_vec(),
        objective,
        iterations,
    })
}

impl Tableau {
    fn recompute_reduced_costs(&mut self) {
        let n = self.n;
        self.d.copy_from_slice(&self.cost);
        for r in 0..self.m {
            let cb = self.cost[self.basis[r]];
            if cb == 0.0 {
                continue;
            }
            let row = &self.t[r * n..(r + 1) * n];
            for (dj, v) in self.d.iter_mut().zip(row) {
                *dj -= cb * v;
            }
        }
        for &j in &self.basis {
            self.d[j] = 0.0;
        }
    }

    fn eligible(&self, j: usize) -> Option<f64> {
        match self.state[j] {
            VarState::Lower if self.upper[j] > 0.0 && self.d[j] < -OPT_TOL => Some(1.0),
            VarState::Upper if self.d[j] > OPT_TOL => Some(-1.0),
            _ => None,
        }
    }

    fn choose_entering(&self, bland: bool) -> Option<(usize, f64)> {
        if bland {
            return (0..self.n).find_map(|j| self.eligible(j).map(|dir| (j, dir)));
        }
        let mut best: Option<(usize, f64)> = None;
        let mut best_score = 0.0;
        for j in 0..self.n {
            if let Some(dir) = self.eligible(j) {
                let score = self.d[j].abs();
                if score > best_score {
                    best_score = score;
                    best = Some((j, dir));
                }
            }
        }
        best
    }

    fn run(&mut self, rule: PivotRule, cap: usize, iterations: &mut usize) -> Result<Outcome> {
        let mut degenerate_run = 0usize;
        let mut local = 0usize;
        loop {
            let bland = rule == PivotRule::Bland || degenerate_run >= DEGENERATE_SWITCH;
            let Some((q, dir)) = self.choose_entering(bland) else {
                return Ok(Outcome::Optimal);
            };
            local += 1;
            *iterations += 1;
            if local > cap {
                return Err(Error::LpStatus("stalled at the iteration limit"));
            }

            let n = self.n;
            // ratio test
            let mut best: Option<(usize, VarState, f64)> = None;
            let mut best_ratio = f64::INFINITY;
            for r in 0..self.m {
                let alpha = self.t[r * n + q];
                let a = dir * alpha;
                let bj = self.basis[r];
                let (ratio, bound) = if a > PIVOT_TOL {
                    (self.beta[r] / a, VarState::Lower)
                } else if a < -PIVOT_TOL && self.upper[bj].is_finite() {
                    ((self.upper[bj] - self.beta[r]) / -a, VarState::Upper)
                } else {
                    continue;
                };
                let ratio = ratio.max(0.0);
                let take = match best {
                    None => true,
                    Some(_) if ratio < best_ratio - RATIO_TIE => true,
                    Some((lr, _, la)) if ratio <= best_ratio + RATIO_TIE => {
                        let lb = self.basis[lr];
                        if bland {
                            bj < lb
                        } else {
                            let art = bj >= self.first_artificial;
                            let lart = lb >= self.first_artificial;
                            (art && !lart) || (art == lart && alpha.abs() > la.abs())
                        }
                    }
                    _ => false,
                };
                if take {
                    best_ratio = best_ratio.min(ratio);
                    best = Some((r, bound, alpha));
                }
            }
            let (theta, leave) = if self.upper[q] <= best_ratio {
                (self.upper[q], None)
            } else {
                (best_ratio, best.map(|(r, b, _)| (r, b)))
            };
            if !theta.is_finite() {
                return Ok(Outcome::Unbounded);
            }

            if theta > 0.0 {
                for r in 0..self.m {
                    let alpha = self.t[r * n + q];
                    if alpha != 0.0 {
                        self.beta[r] -= dir * theta * alpha;
                    }
                }
            }

            let Some((r, bound)) = leave else {
                // bound flip
                self.state[q] = if self.state[q] == VarState::Lower {
                    VarState::Upper
                } else {
                    VarState::Lower
                };
                degenerate_run = 0;
                continue;
            };

            let leaving = self.basis[r];
            let degenerate = theta <= 0.0;
            if degenerate && leaving < self.first_artificial {
                degenerate_run += 1;
            } else if !degenerate {
                degenerate_run = 0;
            }
            let start = if self.state[q] == VarState::Upper {
                self.upper[q]
            } else {
                0.0
            };
            self.beta[r] = start + dir * theta;
            self.state[leaving] = bound;
            self.basis[r] = q;
            self.state[q] = VarState::Basic;
            self.pivot(r, q);
        }
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let n = self.n;
        let piv = self.t[r * n + q];
        let inv = 1.0 / piv;
        {
            let row = &mut self.t[r * n..(r + 1) * n];
            for v in row.iter_mut() {
                *v *= inv;
            }
            row[q] = 1.0;
        }
        self.scratch.clear();
        self.scratch.extend((0..n).filter(|&j| self.t[r * n + j] != 0.0));
        let sparse = self.scratch.len() * 3 < n;

        let (before, rest) = self.t.split_at_mut(r * n);
        let (prow, after) = rest.split_at_mut(n);
        let prow: &[f64] = prow;
        let update = |row: &mut [f64], idx: &[usize]| {
            let f = row[q];
            if f == 0.0 {
                return;
            }
            if sparse {
                for &j in idx {
                    row[j] -= f * prow[j];
                }
            } else {
                for (v, p) in row.iter_mut().zip(prow) {
                    *v -= f * p;
                }
            }
            row[q] = 0.0;
        };
        for row in before.chunks_exact_mut(n) {
            update(row, &self.scratch);
        }
        for row in after.chunks_exact_mut(n) {
            update(row, &self.scratch);
        }

        let dq = self.d[q];
        if dq != 0.0 {
            if sparse {
                for &j in &self.scratch {
                    self.d[j] -= dq * prow[j];
                }
            } else {
                for (v, p) in self.d.iter_mut().zip(prow) {
                    *v -= dq * p;
                }
            }
            self.d[q] = 0.0;
        }
    }
}
