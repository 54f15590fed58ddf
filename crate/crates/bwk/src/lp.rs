//! The linear relaxation of a BwK instance and everything built on it:
//! a dense simplex solver with dual extraction, an exhaustive
//! vertex-enumeration oracle, rescaled and optimistic LP variants,
//! Lagrangian-gap diagnostics, and LP sensitivity experiments.
//!
//! The relaxation maximizes `X . r` over distributions `X` on arms subject to
//! `X . c_j <= B/T` per resource. The dual multipliers are reported in two
//! normalizations: raw row prices from the simplex basis, and the rescaled
//! multipliers for which the dual objective is the sum of the entries and the
//! time entry absorbs the simplex-row price. The latter is what the Lagrangian
//! gap is defined against.

use rand::Rng;

use crate::error::{BwkError, Result};
use crate::model::BwkInstance;
use crate::{LP_TOL, SUPPORT_TOL};

const PIVOT_TOL: f64 = 1e-11;
const RED_COST_TOL: f64 = 1e-10;
const MAX_PIVOTS: usize = 50_000;

// ---------------------------------------------------------------------------
// Dense two-phase simplex on a generic small LP.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum RowKind {
    Le,
    Eq,
    Ge,
}

/// A small dense LP: maximize `objective . x` subject to the rows, `x >= 0`.
pub(crate) struct DenseLp {
    pub n: usize,
    pub objective: Vec<f64>,
    pub rows: Vec<(Vec<f64>, RowKind, f64)>,
}

pub(crate) struct DenseSolution {
    pub x: Vec<f64>,
    pub value: f64,
    /// One dual per row, in the original row orientation.
    pub row_duals: Vec<f64>,
    /// Final basis columns, paired with their values.
    pub basis: Vec<(usize, f64)>,
    /// An artificial variable survived phase II (redundant rows).
    pub artificial_in_basis: bool,
}

/// Two-phase tableau simplex with Bland's rule. Deterministic: entering
/// variable is the lowest index with positive reduced cost, leaving variable
/// breaks ratio ties by lowest basis index.
pub(crate) fn simplex(lp: &DenseLp) -> Result<DenseSolution> {
    let m = lp.rows.len();
    let n = lp.n;
    let n_slack = lp
        .rows
        .iter()
        .filter(|(_, kind, _)| *kind != RowKind::Eq)
        .count();
    let total = n + n_slack + m; // structural + slacks + one artificial per row

    // Build equality system T x = b with b >= 0. Track per-row sign flips.
    let mut a = vec![vec![0.0; total]; m];
    let mut b = vec![0.0; m];
    let mut sign = vec![1.0; m];
    let mut slack_idx = n;
    for (i, (coeffs, kind, rhs)) in lp.rows.iter().enumerate() {
        a[i][..n].copy_from_slice(coeffs);
        b[i] = *rhs;
        match kind {
            RowKind::Le => {
                a[i][slack_idx] = 1.0;
                slack_idx += 1;
            }
            RowKind::Ge => {
                a[i][slack_idx] = -1.0;
                slack_idx += 1;
            }
            RowKind::Eq => {}
        }
        if b[i] < 0.0 {
            for v in a[i].iter_mut() {
                *v = -*v;
            }
            b[i] = -b[i];
            sign[i] = -1.0;
        }
        a[i][n + n_slack + i] = 1.0; // artificial
    }

    let art_start = n + n_slack;
    let mut basis: Vec<usize> = (0..m).map(|i| art_start + i).collect();

    // Phase I: maximize -(sum of artificials).
    let mut phase1_cost = vec![0.0; total];
    for j in art_start..total {
        phase1_cost[j] = -1.0;
    }
    run_simplex(&mut a, &mut b, &mut basis, &phase1_cost, art_start, total)?;
    let infeas: f64 = basis
        .iter()
        .zip(&b)
        .filter(|(j, _)| **j >= art_start)
        .map(|(_, v)| *v)
        .sum();
    if infeas > 1e-8 {
        return Err(BwkError::Infeasible(format!(
            "phase-I residual {infeas:.3e}"
        )));
    }
    // Pivot leftover artificials out of the basis where possible.
    for i in 0..m {
        if basis[i] >= art_start {
            if let Some(j) = (0..art_start).find(|&j| a[i][j].abs() > PIVOT_TOL) {
                pivot(&mut a, &mut b, &mut basis, i, j);
            }
        }
    }

    // Phase II: the real objective; artificials are barred from entering.
    let mut phase2_cost = vec![0.0; total];
    phase2_cost[..n].copy_from_slice(&lp.objective);
    run_simplex(&mut a, &mut b, &mut basis, &phase2_cost, art_start, total)?;

    let mut x = vec![0.0; total];
    for (i, &j) in basis.iter().enumerate() {
        x[j] = b[i];
    }
    let value: f64 = (0..n).map(|j| lp.objective[j] * x[j]).sum();

    // Duals from the final basis: y_i = c_B B^{-1} e_i, read off the
    // artificial column of row i (its reduced cost is -y_i).
    let mut y = vec![0.0; m];
    for i in 0..m {
        let col = art_start + i;
        let z: f64 = basis
            .iter()
            .enumerate()
            .map(|(r, &jb)| phase2_cost[jb] * a[r][col])
            .sum();
        y[i] = sign[i] * z;
    }

    Ok(DenseSolution {
        x: x[..n].to_vec(),
        value,
        row_duals: y,
        basis: basis.iter().map(|&j| (j, x[j])).collect(),
        artificial_in_basis: basis.iter().any(|&j| j >= art_start),
    })
}

fn run_simplex(
    a: &mut [Vec<f64>],
    b: &mut [f64],
    basis: &mut [usize],
    cost: &[f64],
    barred_from: usize,
    total: usize,
) -> Result<()> {
    let m = a.len();
    for _ in 0..MAX_PIVOTS {
        // Reduced costs via the basis multipliers.
        let mut entering = None;
        'cols: for j in 0..total {
            if j >= barred_from || basis.contains(&j) {
                continue;
            }
            let mut red = cost[j];
            for (i, &jb) in basis.iter().enumerate() {
                red -= cost[jb] * a[i][j];
            }
            if red > RED_COST_TOL {
                entering = Some(j);
                break 'cols;
            }
        }
        let Some(j) = entering else {
            return Ok(());
        };
        // Ratio test; Bland tie-break on the leaving basis index.
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..m {
            if a[i][j] > PIVOT_TOL {
                let ratio = b[i] / a[i][j];
                match leave {
                    None => leave = Some((i, ratio)),
                    Some((li, lr)) => {
                        if ratio < lr - PIVOT_TOL
                            || ((ratio - lr).abs() <= PIVOT_TOL && basis[i] < basis[li])
                        {
                            leave = Some((i, ratio));
                        }
                    }
                }
            }
        }
        let Some((i, _)) = leave else {
            return Err(BwkError::Infeasible("objective unbounded".into()));
        };
        pivot(a, b, basis, i, j);
    }
    Err(BwkError::Inconsistent(
        "simplex pivot limit exceeded".into(),
    ))
}

fn pivot(a: &mut [Vec<f64>], b: &mut [f64], basis: &mut [usize], row: usize, col: usize) {
    let m = a.len();
    let p = a[row][col];
    for v in a[row].iter_mut() {
        *v /= p;
    }
    b[row] /= p;
    for i in 0..m {
        if i != row {
            let f = a[i][col];
            if f != 0.0 {
                let pivot_row = a[row].clone();
                for (v, pv) in a[i].iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                b[i] -= f * b[row];
                if b[i].abs() < 1e-14 {
                    b[i] = 0.0;
                }
            }
        }
    }
    basis[row] = col;
}

// ---------------------------------------------------------------------------
// Domain-facing problem and solution types.
// ---------------------------------------------------------------------------

/// The static shape of an instance, enough to build optimistic LPs.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct InstanceShape {
    pub k: usize,
    pub d: usize,
    pub b: f64,
    pub t: u64,
    pub time_index: usize,
    pub null_index: usize,
}

impl BwkInstance {
    pub fn shape(&self) -> InstanceShape {
        InstanceShape {
            k: self.num_arms(),
            d: self.d,
            b: self.b,
            t: self.t,
            time_index: self.time_index,
            null_index: self.null_index,
        }
    }
}

/// A BwK relaxation: maximize `objective . x` over the simplex subject to
/// `rows[j] . x <= rhs[j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
    pub time_row: usize,
    pub null_col: Option<usize>,
}

impl LpProblem {
    pub fn num_arms(&self) -> usize {
        self.objective.len()
    }

    fn to_dense(&self) -> DenseLp {
        let k = self.num_arms();
        let mut rows = vec![(vec![1.0; k], RowKind::Eq, 1.0)];
        for (coeffs, rhs) in self.rows.iter().zip(&self.rhs) {
            rows.push((coeffs.clone(), RowKind::Le, *rhs));
        }
        DenseLp {
            n: k,
            objective: self.objective.clone(),
            rows,
        }
    }

    /// Verifies that a solution is a plausible optimum of this problem:
    /// a distribution, feasible, with matching objective value.
    pub fn check_solution_consistency(&self, sol: &LpSolution) -> Result<()> {
        let k = self.num_arms();
        if sol.x.len() != k {
            return Err(BwkError::Contract("solution dimension mismatch".into()));
        }
        let sum: f64 = sol.x.iter().sum();
        if (sum - 1.0).abs() > LP_TOL || sol.x.iter().any(|&v| v < -LP_TOL) {
            return Err(BwkError::Contract("solution is not a distribution".into()));
        }
        for (row, &rhs) in self.rows.iter().zip(&self.rhs) {
            let used: f64 = row.iter().zip(&sol.x).map(|(c, x)| c * x).sum();
            if used > rhs + LP_TOL {
                return Err(BwkError::Contract(
                    "solution violates a resource row".into(),
                ));
            }
        }
        let value: f64 = self.objective.iter().zip(&sol.x).map(|(c, x)| c * x).sum();
        if (value - sol.value).abs() > LP_TOL {
            return Err(BwkError::Contract("objective value mismatch".into()));
        }
        Ok(())
    }
}

/// A solved relaxation: primal distribution, optimal value, dual prices, and
/// the support at [`SUPPORT_TOL`].
#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub value: f64,
    /// Per-resource-row dual prices (raw simplex normalization, nonnegative).
    pub row_duals: Vec<f64>,
    /// Dual of the simplex (sum-to-one) row.
    pub simplex_dual: f64,
    pub support: Vec<usize>,
    /// The optimal basis is degenerate, so the duals may be non-unique.
    pub degenerate: bool,
}

// ---------------------------------------------------------------------------
// Problem builders.
// ---------------------------------------------------------------------------

/// The linear relaxation of an instance: objective `r`, row `c_j`, rhs `B/T`.
pub fn build_primal(instance: &BwkInstance) -> LpProblem {
    let k = instance.num_arms();
    let rate = instance.budget_rate();
    let objective: Vec<f64> = (0..k).map(|a| instance.mean_reward(a).unwrap()).collect();
    let rows: Vec<Vec<f64>> = (0..instance.d)
        .map(|j| {
            (0..k)
                .map(|a| instance.mean_consumption(a, j).unwrap())
                .collect()
        })
        .collect();
    LpProblem {
        objective,
        rows,
        rhs: vec![rate; instance.d],
        time_row: instance.time_index,
        null_col: Some(instance.null_index),
    }
}

/// The rescaled relaxation: every non-time rhs shrinks to `(B/T)(1 - eta)`;
/// the time row is untouched.
pub fn build_rescaled(instance: &BwkInstance, eta: f64) -> Result<LpProblem> {
    if !(0.0..1.0).contains(&eta) {
        return Err(BwkError::Parameter(format!("eta {eta} outside [0,1)")));
    }
    let mut problem = build_primal(instance);
    let rate = instance.budget_rate();
    for (j, rhs) in problem.rhs.iter_mut().enumerate() {
        if j != instance.time_index {
            *rhs = rate * (1.0 - eta);
        }
    }
    Ok(problem)
}

/// The rescaling parameter with its clamp flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaValue {
    pub value: f64,
    /// The formula produced a value >= 1 and was clamped to `1 - 1e-9`.
    pub clamped: bool,
}

/// `eta = 3 (sqrt(K/B * ln(KdT)) + (K/B) ln(KdT)^2)`, clamped into `[0, 1)`.
pub fn compute_eta(instance: &BwkInstance) -> EtaValue {
    compute_eta_shape(instance.shape())
}

/// [`compute_eta`] from the instance shape alone.
pub fn compute_eta_shape(shape: InstanceShape) -> EtaValue {
    let k = shape.k as f64;
    let log_arg = (k * shape.d as f64 * shape.t as f64).ln();
    let ratio = k / shape.b;
    let raw = 3.0 * ((ratio * log_arg).sqrt() + ratio * log_arg * log_arg);
    if raw >= 1.0 {
        EtaValue {
            value: 1.0 - 1e-9,
            clamped: true,
        }
    } else {
        EtaValue {
            value: raw,
            clamped: false,
        }
    }
}

/// The optimistic relaxation: reward upper bounds as the objective, consumption
/// lower bounds as the non-time rows with rhs `(B/T)(1 - eta)`. The null arm's
/// column is pinned to zero reward and zero non-time consumption.
pub fn build_optimistic(
    shape: InstanceShape,
    ucb_rewards: &[f64],
    lcb_consumptions: &[Vec<f64>],
    eta: f64,
) -> Result<LpProblem> {
    if ucb_rewards.len() != shape.k || lcb_consumptions.len() != shape.d {
        return Err(BwkError::Shape("bound vectors do not match shape".into()));
    }
    if !(0.0..1.0).contains(&eta) {
        return Err(BwkError::Parameter(format!("eta {eta} outside [0,1)")));
    }
    let in_unit = |v: f64| v.is_finite() && (0.0..=1.0).contains(&v);
    if !ucb_rewards.iter().all(|&v| in_unit(v))
        || !lcb_consumptions
            .iter()
            .all(|row| row.len() == shape.k && row.iter().all(|&v| in_unit(v)))
    {
        return Err(BwkError::Parameter(
            "confidence bounds outside [0,1]".into(),
        ));
    }
    let rate = shape.b / shape.t as f64;
    let mut objective = ucb_rewards.to_vec();
    objective[shape.null_index] = 0.0;
    let mut rows = Vec::with_capacity(shape.d);
    let mut rhs = Vec::with_capacity(shape.d);
    for (j, lcb) in lcb_consumptions.iter().enumerate() {
        if j == shape.time_index {
            rows.push(vec![rate; shape.k]);
            rhs.push(rate);
        } else {
            let mut row = lcb.clone();
            row[shape.null_index] = 0.0;
            rows.push(row);
            rhs.push(rate * (1.0 - eta));
        }
    }
    Ok(LpProblem {
        objective,
        rows,
        rhs,
        time_row: shape.time_index,
        null_col: Some(shape.null_index),
    })
}

// ---------------------------------------------------------------------------
// Solvers.
// ---------------------------------------------------------------------------

/// Solves a relaxation with the dense simplex. Deterministic given the problem.
pub fn solve(problem: &LpProblem) -> Result<LpSolution> {
    let dense = problem.to_dense();
    let sol = simplex(&dense)?;
    let k = problem.num_arms();
    let support: Vec<usize> = sol
        .x
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > SUPPORT_TOL)
        .map(|(a, _)| a)
        .collect();
    // The time row duplicates the sum-to-one row, so its slack is zero in
    // every feasible point; that structural tie is resolved by the dual
    // normalization and does not count as degeneracy. Anything else basic at
    // zero (an arm or a non-time slack) makes the duals ambiguous.
    let time_slack = k + problem.time_row;
    let degenerate = sol.artificial_in_basis
        || sol
            .basis
            .iter()
            .any(|&(j, v)| j != time_slack && v.abs() <= SUPPORT_TOL);
    let out = LpSolution {
        x: sol.x,
        value: sol.value,
        simplex_dual: sol.row_duals[0],
        row_duals: sol.row_duals[1..]
            .iter()
            .map(|&v| if v.abs() <= LP_TOL { 0.0 } else { v })
            .collect(),
        support,
        degenerate,
    };
    verify_solution(problem, &out)?;
    Ok(out)
}

/// Internal post-solve checks: distribution, feasibility, strong duality, and
/// complementary slackness, each at the 1e-9 tolerance.
fn verify_solution(problem: &LpProblem, sol: &LpSolution) -> Result<()> {
    problem
        .check_solution_consistency(sol)
        .map_err(|e| BwkError::Inconsistent(format!("primal check failed: {e}")))?;
    let dual_obj = sol.simplex_dual
        + sol
            .row_duals
            .iter()
            .zip(&problem.rhs)
            .map(|(y, r)| y * r)
            .sum::<f64>();
    if (dual_obj - sol.value).abs() > LP_TOL {
        return Err(BwkError::Inconsistent(format!(
            "strong duality residual {:.3e}",
            dual_obj - sol.value
        )));
    }
    for ((row, &rhs), &y) in problem.rows.iter().zip(&problem.rhs).zip(&sol.row_duals) {
        if y < -LP_TOL {
            return Err(BwkError::Inconsistent("negative resource dual".into()));
        }
        let slack = rhs - row.iter().zip(&sol.x).map(|(c, x)| c * x).sum::<f64>();
        if (y * slack).abs() > LP_TOL {
            return Err(BwkError::Inconsistent(format!(
                "complementary slackness residual {:.3e}",
                y * slack
            )));
        }
    }
    Ok(())
}

/// Exhaustively enumerates basic feasible solutions and returns the best, with
/// the same canonical duals as [`solve`]. Ground-truth oracle for small LPs.
pub fn solve_by_vertex_enumeration(problem: &LpProblem) -> Result<LpSolution> {
    let vertices = enumerate_vertices(problem)?;
    let best = vertices
        .iter()
        .map(|(_, v)| *v)
        .fold(f64::NEG_INFINITY, f64::max);
    if best == f64::NEG_INFINITY {
        return Err(BwkError::Infeasible("no basic feasible solution".into()));
    }
    let mut optimal: Vec<&(Vec<f64>, f64)> = vertices
        .iter()
        .filter(|(_, v)| (v - best).abs() <= LP_TOL)
        .collect();
    // Deterministic representative: lexicographically largest coordinates.
    optimal.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal));
    let x = optimal[0].0.clone();
    let distinct = distinct_points(&optimal.iter().map(|p| p.0.clone()).collect::<Vec<_>>());
    let support: Vec<usize> = x
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > SUPPORT_TOL)
        .map(|(a, _)| a)
        .collect();
    // Reuse the simplex for dual prices so both routes report the same duals.
    let via_simplex = solve(problem)?;
    Ok(LpSolution {
        x,
        value: best,
        row_duals: via_simplex.row_duals,
        simplex_dual: via_simplex.simplex_dual,
        support,
        degenerate: distinct.len() > 1 || via_simplex.degenerate,
    })
}

/// All basic feasible solutions (as arm-space points) with their values.
fn enumerate_vertices(problem: &LpProblem) -> Result<Vec<(Vec<f64>, f64)>> {
    let k = problem.num_arms();
    let d = problem.rows.len();
    if k > 12 || d > 4 {
        return Err(BwkError::Capacity(format!(
            "vertex enumeration limited to K <= 12, d <= 4 (got K={k}, d={d})"
        )));
    }
    let n = k + d; // arm weights + slack per resource row
    let m = d + 1; // simplex row + resource rows
    let mut columns = vec![vec![0.0; m]; n];
    for a in 0..k {
        columns[a][0] = 1.0;
        for j in 0..d {
            columns[a][j + 1] = problem.rows[j][a];
        }
    }
    for j in 0..d {
        columns[k + j][j + 1] = 1.0;
    }
    let mut b = vec![1.0];
    b.extend_from_slice(&problem.rhs);

    let mut out = Vec::new();
    let mut subset: Vec<usize> = (0..m).collect();
    loop {
        if let Some(xb) = solve_square(&columns, &subset, &b) {
            if xb.iter().all(|&v| v >= -LP_TOL) {
                let mut x = vec![0.0; k];
                for (&col, &v) in subset.iter().zip(&xb) {
                    if col < k {
                        x[col] = v.max(0.0);
                    }
                }
                let value: f64 = problem.objective.iter().zip(&x).map(|(c, w)| c * w).sum();
                out.push((x, value));
            }
        }
        // next lexicographic m-subset of 0..n
        let mut i = m;
        loop {
            if i == 0 {
                return Ok(out);
            }
            i -= 1;
            if subset[i] != i + n - m {
                subset[i] += 1;
                for l in i + 1..m {
                    subset[l] = subset[l - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Points attaining the optimal value, deduplicated. Exposes degeneracy.
pub fn enumerate_optimal_vertices(problem: &LpProblem) -> Result<Vec<Vec<f64>>> {
    let vertices = enumerate_vertices(problem)?;
    let best = vertices
        .iter()
        .map(|(_, v)| *v)
        .fold(f64::NEG_INFINITY, f64::max);
    let optimal: Vec<Vec<f64>> = vertices
        .into_iter()
        .filter(|(_, v)| (v - best).abs() <= LP_TOL)
        .map(|(x, _)| x)
        .collect();
    Ok(distinct_points(&optimal))
}

/// Deduplicates points that agree componentwise within [`SUPPORT_TOL`].
pub fn distinct_points(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for p in points {
        if !out
            .iter()
            .any(|q| p.iter().zip(q).all(|(a, b)| (a - b).abs() <= SUPPORT_TOL))
        {
            out.push(p.clone());
        }
    }
    out
}

fn solve_square(columns: &[Vec<f64>], subset: &[usize], b: &[f64]) -> Option<Vec<f64>> {
    let m = subset.len();
    let mut mat = vec![vec![0.0; m + 1]; m];
    for (c, &col) in subset.iter().enumerate() {
        for r in 0..m {
            mat[r][c] = columns[col][r];
        }
    }
    for r in 0..m {
        mat[r][m] = b[r];
    }
    for col in 0..m {
        let (pivot_row, pivot_val) = (col..m)
            .map(|r| (r, mat[r][col].abs()))
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap();
        if pivot_val < PIVOT_TOL {
            return None;
        }
        mat.swap(col, pivot_row);
        let p = mat[col][col];
        for r in 0..m {
            if r != col {
                let f = mat[r][col] / p;
                for c2 in col..=m {
                    let upd = mat[col][c2];
                    mat[r][c2] -= f * upd;
                }
            }
        }
    }
    Some((0..m).map(|r| mat[r][m] / mat[r][r]).collect())
}

// ---------------------------------------------------------------------------
// Dual normalization and Lagrangian gaps.
// ---------------------------------------------------------------------------

/// Dual multipliers in the normalization where the dual objective equals the
/// sum of entries: `lambda[j] = (B/T) * row_price[j]` for non-time rows and
/// the time entry absorbs the simplex-row price, so `sum_j lambda[j] = OPT`.
#[derive(Debug, Clone, PartialEq)]
pub struct PaperDuals {
    pub lambda: Vec<f64>,
    /// The primal basis was degenerate; the reported multipliers are the
    /// canonical choice (the dual vertex minimizing the null arm's reduced
    /// cost), matching reduced costs taken at a basis containing the null arm.
    pub degenerate: bool,
}

/// Extracts the canonical dual multipliers for an instance's solved relaxation.
///
/// When the optimal basis is non-degenerate the dual is unique and comes from
/// the simplex basis. Degenerate optima admit several dual vertices; this
/// routine then picks the one minimizing the null arm's reduced cost by
/// solving a secondary LP over the optimal-dual face.
pub fn paper_duals(instance: &BwkInstance, lp: &LpSolution) -> Result<PaperDuals> {
    let rate = instance.budget_rate();
    let d = instance.d;
    let std_duals: Vec<f64> = if !lp.degenerate {
        lp.row_duals.clone()
    } else {
        canonical_row_duals(instance, lp.value)?
    };
    let mut lambda: Vec<f64> = std_duals.iter().map(|&y| rate * y).collect();
    let sum_non_time: f64 = (0..d)
        .filter(|&j| j != instance.time_index)
        .map(|j| lambda[j])
        .sum();
    let time_entry = lp.value - sum_non_time;
    if time_entry < -LP_TOL {
        return Err(BwkError::Inconsistent(format!(
            "dual normalization impossible: time entry {time_entry:.3e}"
        )));
    }
    lambda[instance.time_index] = time_entry.max(0.0);
    Ok(PaperDuals {
        lambda,
        degenerate: lp.degenerate,
    })
}

/// Over the optimal-dual polytope, minimizes the null arm's reduced cost and
/// returns the per-resource row prices of that vertex.
fn canonical_row_duals(instance: &BwkInstance, opt: f64) -> Result<Vec<f64>> {
    let k = instance.num_arms();
    let d = instance.d;
    let rate = instance.budget_rate();
    // Variables: y_s^+ , y_s^- (split free simplex dual), lambda_1..lambda_d.
    let n = 2 + d;
    let mut rows = Vec::new();
    // Dual feasibility: y_s + sum_j lambda_j c_j(a) >= r(a) for every arm.
    for a in 0..k {
        let mut coeffs = vec![1.0, -1.0];
        for j in 0..d {
            coeffs.push(instance.mean_consumption(a, j).unwrap());
        }
        rows.push((coeffs, RowKind::Ge, instance.mean_reward(a).unwrap()));
    }
    // Dual optimality: y_s + (B/T) sum_j lambda_j = OPT.
    let mut coeffs = vec![1.0, -1.0];
    coeffs.extend(std::iter::repeat_n(rate, d));
    rows.push((coeffs, RowKind::Eq, opt));
    // Objective: minimize the null arm's reduced cost y_s + (B/T) lambda_time.
    let mut objective = vec![-1.0, 1.0];
    for j in 0..d {
        objective.push(if j == instance.time_index { -rate } else { 0.0 });
    }
    let sol = simplex(&DenseLp { n, objective, rows })?;
    Ok(sol.x[2..].to_vec())
}

fn point_mass(k: usize, arm: usize) -> Vec<f64> {
    let mut x = vec![0.0; k];
    x[arm] = 1.0;
    x
}

/// The Lagrange function `r(X) + sum_j lambda_j (1 - (T/B) c_j(X))`.
pub fn lagrangian(instance: &BwkInstance, x: &[f64], lambda: &[f64]) -> f64 {
    let t_over_b = instance.t as f64 / instance.b;
    let mut value = instance.mean_reward_of(x);
    for (j, &l) in lambda.iter().enumerate() {
        value += l * (1.0 - t_over_b * instance.mean_consumption_of(x, j));
    }
    value
}

/// Closed form of the gap at fixed multipliers:
/// `(T/B) sum_j lambda_j c_j(a) - r(a)`.
pub(crate) fn closed_form_gap(
    t_over_b: f64,
    lambda: &[f64],
    consumption: &[f64],
    reward: f64,
) -> f64 {
    t_over_b
        * lambda
            .iter()
            .zip(consumption)
            .map(|(l, c)| l * c)
            .sum::<f64>()
        - reward
}

/// Lagrangian gap of an arm: `OPT_LP - L(a, lambda*)`, cross-checked against
/// the closed form. A disagreement signals a broken dual and is surfaced.
pub fn lagrangian_gap(instance: &BwkInstance, lp: &LpSolution, arm: usize) -> Result<f64> {
    let duals = paper_duals(instance, lp)?;
    lagrangian_gap_with(instance, lp, &duals, arm)
}

/// Same as [`lagrangian_gap`] with multipliers already extracted.
pub fn lagrangian_gap_with(
    instance: &BwkInstance,
    lp: &LpSolution,
    duals: &PaperDuals,
    arm: usize,
) -> Result<f64> {
    if arm >= instance.num_arms() {
        return Err(BwkError::Index(format!("arm {arm} out of range")));
    }
    let direct = lp.value
        - lagrangian(
            instance,
            &point_mass(instance.num_arms(), arm),
            &duals.lambda,
        );
    let consumption: Vec<f64> = (0..instance.d)
        .map(|j| instance.mean_consumption(arm, j).unwrap())
        .collect();
    let closed = closed_form_gap(
        instance.t as f64 / instance.b,
        &duals.lambda,
        &consumption,
        instance.mean_reward(arm)?,
    );
    if (direct - closed).abs() > LP_TOL {
        return Err(BwkError::Inconsistent(format!(
            "lagrangian gap routes disagree: direct {direct:.12} vs closed {closed:.12}"
        )));
    }
    Ok(direct)
}

/// Gaps for every arm, one dual extraction.
pub fn lagrangian_gaps(instance: &BwkInstance, lp: &LpSolution) -> Result<Vec<f64>> {
    let duals = paper_duals(instance, lp)?;
    (0..instance.num_arms())
        .map(|a| lagrangian_gap_with(instance, lp, &duals, a))
        .collect()
}

/// Minimum Lagrangian gap over non-null arms outside the LP support; `None`
/// when every non-null arm is already supported.
pub fn dmin(instance: &BwkInstance, lp: &LpSolution) -> Result<Option<f64>> {
    let gaps = lagrangian_gaps(instance, lp)?;
    let mut best: Option<f64> = None;
    for a in 0..instance.num_arms() {
        if a == instance.null_index || lp.support.contains(&a) {
            continue;
        }
        best = Some(best.map_or(gaps[a], |b: f64| b.min(gaps[a])));
    }
    Ok(best)
}

/// Multiplier-free lower bound on the gap via the fixed-distribution value:
/// `proxy/T - r(a)` when the best arm leaves budget slack, else
/// `proxy c(a)/B - r(a)`. Undefined when `c(a*) = B/T`.
pub fn gap_lower_bound(
    instance: &BwkInstance,
    lp: &LpSolution,
    arm: usize,
    opt_fd_proxy: f64,
) -> Result<f64> {
    if instance.d != 2 {
        return Err(BwkError::Shape("gap lower bound needs d = 2".into()));
    }
    let non_null: Vec<usize> = lp
        .support
        .iter()
        .copied()
        .filter(|&a| a != instance.null_index)
        .collect();
    if non_null.len() != 1 {
        return Err(BwkError::Contract(
            "gap lower bound needs a best-arm-optimal solution".into(),
        ));
    }
    let a_star = non_null[0];
    let j = if instance.time_index == 0 { 1 } else { 0 };
    let c_star = instance.mean_consumption(a_star, j)?;
    let rate = instance.budget_rate();
    if (c_star - rate).abs() <= LP_TOL {
        return Err(BwkError::Boundary(format!(
            "c(a*) = B/T = {rate}; the case split is undefined"
        )));
    }
    let r = instance.mean_reward(arm)?;
    Ok(if c_star < rate {
        opt_fd_proxy / instance.t as f64 - r
    } else {
        opt_fd_proxy * instance.mean_consumption(arm, j)? / instance.b - r
    })
}

/// LP-gap of a distribution: `OPT_LP - V(x)` with
/// `V(x) = (B/T) r(x) / max_j c_j(x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpGap {
    pub gap: f64,
    pub value_of_x: f64,
    /// `gap < -1e-9`: the scaled value of `x` exceeded `OPT_LP`. `V` ignores
    /// feasibility, so this flags numerical anomalies rather than valid play.
    pub super_optimal: bool,
}

pub fn lp_gap(instance: &BwkInstance, lp: &LpSolution, x: &[f64]) -> LpGap {
    let max_c = (0..instance.d)
        .map(|j| instance.mean_consumption_of(x, j))
        .fold(f64::NEG_INFINITY, f64::max);
    let v = instance.budget_rate() * instance.mean_reward_of(x) / max_c;
    let gap = lp.value - v;
    LpGap {
        gap,
        value_of_x: v,
        super_optimal: gap < -LP_TOL,
    }
}

/// Result of one optimistic-perturbation trial.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityOutcome {
    /// The perturbed optimum is still supported within `{a*, null}`.
    pub support_preserved: bool,
    pub perturbed_support: Vec<usize>,
    /// Arms that entered the support although their delta did not exceed
    /// their Lagrangian gap; nonempty means the perturbation theorem's
    /// sufficient condition failed empirically.
    pub entrants_within_gap: Vec<usize>,
    /// Gaps used for the check, per arm.
    pub gaps: Vec<f64>,
}

/// Perturbs rewards upward and non-time consumption downward by uniform draws
/// within `deltas`, re-solves, and reports whether the `{a*, null}` support
/// survived. The null arm is never perturbed.
pub fn sensitivity_trial<R: Rng>(
    instance: &BwkInstance,
    lp: &LpSolution,
    deltas: &[f64],
    rng: &mut R,
) -> Result<SensitivityOutcome> {
    if instance.d != 2 {
        return Err(BwkError::Shape("sensitivity trial needs d = 2".into()));
    }
    if deltas.len() != instance.num_arms() || deltas.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
        return Err(BwkError::Parameter(
            "deltas must be in [0,1] per arm".into(),
        ));
    }
    let non_null: Vec<usize> = lp
        .support
        .iter()
        .copied()
        .filter(|&a| a != instance.null_index)
        .collect();
    if non_null.len() != 1 {
        return Err(BwkError::Contract(
            "sensitivity trial needs a best-arm-optimal solution".into(),
        ));
    }
    let a_star = non_null[0];
    let gaps = lagrangian_gaps(instance, lp)?;

    let mut problem = build_primal(instance);
    for a in 0..instance.num_arms() {
        if a == instance.null_index || deltas[a] == 0.0 {
            continue;
        }
        let u = rng.gen_range(0.0..=deltas[a]);
        let v = rng.gen_range(0.0..=deltas[a]);
        problem.objective[a] = (problem.objective[a] + u).min(1.0);
        for j in 0..instance.d {
            if j != instance.time_index {
                problem.rows[j][a] = (problem.rows[j][a] - v).max(0.0);
            }
        }
    }
    let perturbed = solve(&problem)?;
    let support_preserved = perturbed
        .support
        .iter()
        .all(|&a| a == a_star || a == instance.null_index);
    let entrants_within_gap: Vec<usize> = perturbed
        .support
        .iter()
        .copied()
        .filter(|&a| a != a_star && a != instance.null_index && deltas[a] <= gaps[a] + LP_TOL)
        .collect();
    Ok(SensitivityOutcome {
        support_preserved,
        perturbed_support: perturbed.support,
        entrants_within_gap,
        gaps,
    })
}
