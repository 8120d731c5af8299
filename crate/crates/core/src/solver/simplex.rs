//! Revised primal simplex for standard-form problems
//!
//! ```text
//! min c'x   s.t.   A x = b,   x >= 0,
//! ```
//!
//! specialised to bases that are mostly singleton columns. Joint quantile
//! regression LPs have `2TQ` residual columns and `Q-1` slack columns that
//! each touch a single row, so at most `2(K+1)Q` basic columns are ever
//! "dense". The factorisation keeps an explicit inverse only of the small
//! kernel `A[S, V]` (rows not covered by singleton basics x non-singleton
//! basic columns) and represents subsequent pivots as product-form eta
//! vectors, refactorising periodically.
//!
//! Pivoting is deterministic: Dantzig pricing with smallest-index tie breaks,
//! and a switch to Bland's rule after a run of degenerate pivots (stall
//! detection) so cycling terminates. Feasibility starts from a singleton
//! cover of the rows; rows that no singleton can cover feasibly get an
//! artificial column and a phase-1 objective.

use thiserror::Error;

/// Compressed sparse column matrix.
#[derive(Debug, Clone)]
pub struct CscMatrix {
    nrows: usize,
    ncols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CscMatrix {
    pub fn from_columns(nrows: usize, columns: &[Vec<(usize, f64)>]) -> Self {
        let mut col_ptr = Vec::with_capacity(columns.len() + 1);
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        col_ptr.push(0);
        for col in columns {
            debug_assert!(col.windows(2).all(|w| w[0].0 < w[1].0), "rows sorted");
            for &(r, v) in col {
                debug_assert!(r < nrows);
                if v != 0.0 {
                    row_idx.push(r);
                    values.push(v);
                }
            }
            col_ptr.push(row_idx.len());
        }
        CscMatrix {
            nrows,
            ncols: columns.len(),
            col_ptr,
            row_idx,
            values,
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn col(&self, j: usize) -> (&[usize], &[f64]) {
        let lo = self.col_ptr[j];
        let hi = self.col_ptr[j + 1];
        (&self.row_idx[lo..hi], &self.values[lo..hi])
    }

    pub fn nnz(&self) -> usize {
        self.row_idx.len()
    }
}

#[derive(Debug, Clone)]
pub struct SimplexOptions {
    /// Feasibility and optimality tolerance.
    pub tol: f64,
    pub max_iter: usize,
    /// Rebuild the factorisation after this many eta updates.
    pub refactor_every: usize,
    /// Consecutive non-improving pivots before falling back to Bland's rule.
    pub stall_limit: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions {
            tol: 1e-9,
            max_iter: 100_000,
            refactor_every: 64,
            stall_limit: 50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimplexStatus {
    Optimal,
    IterationLimit,
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct SimplexSolution {
    /// Structural variable values (artificials excluded).
    pub x: Vec<f64>,
    pub objective: f64,
    pub status: SimplexStatus,
    pub iterations: usize,
}

#[derive(Debug, Error)]
pub enum SimplexError {
    #[error("problem is unbounded below")]
    Unbounded,
    #[error("basis became singular during refactorisation")]
    SingularBasis,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

struct Eta {
    pos: usize,
    pivot: f64,
    terms: Vec<(usize, f64)>,
}

/// Basis factorisation: singleton basics pinned to their rows plus an explicit
/// inverse of the dense kernel formed by the remaining rows and columns.
struct Factors {
    unit_coeff: Vec<f64>, // by row; meaningful where s_pos is None
    s_rows: Vec<usize>,
    s_pos: Vec<Option<usize>>,
    v_cols: Vec<usize>,
    kinv: Vec<f64>, // k x k row-major
}

impl Factors {
    fn empty(m: usize) -> Self {
        Factors {
            unit_coeff: vec![0.0; m],
            s_rows: Vec::new(),
            s_pos: vec![None; m],
            v_cols: Vec::new(),
            kinv: Vec::new(),
        }
    }
}

struct Engine<'a> {
    a: &'a CscMatrix,
    b: &'a [f64],
    m: usize,
    n_structural: usize,
    /// artificial column j >= n_structural covers row `artificials[j - n_structural].0`
    artificials: Vec<(usize, f64)>,
    singleton: Vec<Option<(usize, f64)>>,
    costs: Vec<f64>,
    basic_cols: Vec<usize>,
    position_of: Vec<Option<usize>>,
    x_basic: Vec<f64>,
    factors: Factors,
    etas: Vec<Eta>,
    opts: SimplexOptions,
    iterations: usize,
    phase_one: bool,
}

const PIVOT_TOL: f64 = 1e-9;
const DROP_TOL: f64 = 1e-12;

impl<'a> Engine<'a> {
    fn n_total(&self) -> usize {
        self.n_structural + self.artificials.len()
    }

    fn for_col(&self, j: usize, mut f: impl FnMut(usize, f64)) {
        if j < self.n_structural {
            let (rows, vals) = self.a.col(j);
            for (&r, &v) in rows.iter().zip(vals) {
                f(r, v);
            }
        } else {
            let (r, v) = self.artificials[j - self.n_structural];
            f(r, v);
        }
    }

    fn col_singleton(&self, j: usize) -> Option<(usize, f64)> {
        if j < self.n_structural {
            self.singleton[j]
        } else {
            Some(self.artificials[j - self.n_structural])
        }
    }

    /// Rebuild the kernel-inverse factorisation from the current basis set and
    /// recompute basic values from scratch.
    fn refactor(&mut self) -> Result<(), SimplexError> {
        self.etas.clear();
        let m = self.m;
        let basis: Vec<usize> = self.basic_cols.clone();
        let mut unit_at_row: Vec<Option<usize>> = vec![None; m];
        let mut unit_coeff = vec![0.0; m];
        let mut v_cols = Vec::new();
        for &col in &basis {
            match self.col_singleton(col) {
                Some((r, a)) => {
                    if unit_at_row[r].is_some() {
                        return Err(SimplexError::SingularBasis);
                    }
                    unit_at_row[r] = Some(col);
                    unit_coeff[r] = a;
                }
                None => v_cols.push(col),
            }
        }
        v_cols.sort_unstable();
        let mut s_rows = Vec::new();
        let mut s_pos = vec![None; m];
        for r in 0..m {
            if unit_at_row[r].is_none() {
                s_pos[r] = Some(s_rows.len());
                s_rows.push(r);
            }
        }
        let k = s_rows.len();
        if k != v_cols.len() {
            return Err(SimplexError::SingularBasis);
        }

        // Dense kernel and its inverse by Gauss-Jordan with partial pivoting.
        let mut kmat = vec![0.0; k * k];
        for (jj, &col) in v_cols.iter().enumerate() {
            self.for_col(col, |r, v| {
                if let Some(si) = s_pos[r] {
                    kmat[si * k + jj] = v;
                }
            });
        }
        let mut kinv = vec![0.0; k * k];
        for i in 0..k {
            kinv[i * k + i] = 1.0;
        }
        let scale = kmat.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        for col in 0..k {
            let pivot_row = (col..k)
                .max_by(|&i, &j| kmat[i * k + col].abs().total_cmp(&kmat[j * k + col].abs()))
                .expect("non-empty range");
            let piv = kmat[pivot_row * k + col];
            if piv.abs() <= 1e-13 * scale {
                return Err(SimplexError::SingularBasis);
            }
            if pivot_row != col {
                for j in 0..k {
                    kmat.swap(pivot_row * k + j, col * k + j);
                    kinv.swap(pivot_row * k + j, col * k + j);
                }
            }
            let inv_piv = 1.0 / piv;
            for j in 0..k {
                kmat[col * k + j] *= inv_piv;
                kinv[col * k + j] *= inv_piv;
            }
            for i in 0..k {
                if i == col {
                    continue;
                }
                let f = kmat[i * k + col];
                if f == 0.0 {
                    continue;
                }
                for j in 0..k {
                    kmat[i * k + j] -= f * kmat[col * k + j];
                    kinv[i * k + j] -= f * kinv[col * k + j];
                }
            }
        }

        // Reassign positions: singleton basics sit at their own row, kernel
        // columns at the remaining rows in sorted order.
        let mut basic_cols = vec![usize::MAX; m];
        for r in 0..m {
            if let Some(col) = unit_at_row[r] {
                basic_cols[r] = col;
            }
        }
        for (i, &col) in v_cols.iter().enumerate() {
            basic_cols[s_rows[i]] = col;
        }
        self.position_of = vec![None; self.n_total()];
        for (pos, &col) in basic_cols.iter().enumerate() {
            self.position_of[col] = Some(pos);
        }
        self.basic_cols = basic_cols;
        self.factors = Factors {
            unit_coeff,
            s_rows,
            s_pos,
            v_cols,
            kinv,
        };
        self.x_basic = self.ftran_dense(self.b.to_vec());
        Ok(())
    }

    /// B0^{-1} rhs via the kernel inverse (no etas).
    fn ftran0(&self, rhs: &mut Vec<f64>) {
        let f = &self.factors;
        let k = f.s_rows.len();
        let mut xv = vec![0.0; k];
        if k > 0 {
            let mut y = vec![0.0; k];
            for (i, &r) in f.s_rows.iter().enumerate() {
                y[i] = rhs[r];
            }
            for i in 0..k {
                let row = &f.kinv[i * k..(i + 1) * k];
                let mut acc = 0.0;
                for (j, yv) in y.iter().enumerate() {
                    acc += row[j] * yv;
                }
                xv[i] = acc;
            }
        }
        // Unit rows: subtract kernel-column contributions, divide by the
        // singleton coefficient.
        let mut acc = vec![0.0; self.m];
        for (i, &col) in f.v_cols.iter().enumerate() {
            let xi = xv[i];
            if xi != 0.0 {
                self.for_col(col, |r, v| {
                    if f.s_pos[r].is_none() {
                        acc[r] += v * xi;
                    }
                });
            }
        }
        for r in 0..self.m {
            match f.s_pos[r] {
                Some(i) => rhs[r] = xv[i],
                None => rhs[r] = (rhs[r] - acc[r]) / f.unit_coeff[r],
            }
        }
    }

    fn apply_etas(&self, x: &mut [f64]) {
        for eta in &self.etas {
            let xp = x[eta.pos] / eta.pivot;
            if xp != 0.0 {
                for &(i, v) in &eta.terms {
                    x[i] -= v * xp;
                }
            }
            x[eta.pos] = xp;
        }
    }

    /// B^{-1} rhs.
    fn ftran_dense(&self, mut rhs: Vec<f64>) -> Vec<f64> {
        self.ftran0(&mut rhs);
        self.apply_etas(&mut rhs);
        rhs
    }

    fn ftran_col(&self, j: usize) -> Vec<f64> {
        let mut rhs = vec![0.0; self.m];
        self.for_col(j, |r, v| rhs[r] = v);
        self.ftran_dense(rhs)
    }

    /// B^{-T} z, with `z` indexed by basis position.
    fn btran(&self, mut z: Vec<f64>) -> Vec<f64> {
        for eta in self.etas.iter().rev() {
            let mut acc = z[eta.pos];
            for &(i, v) in &eta.terms {
                acc -= v * z[i];
            }
            z[eta.pos] = acc / eta.pivot;
        }
        let f = &self.factors;
        let k = f.s_rows.len();
        let mut pi = vec![0.0; self.m];
        for r in 0..self.m {
            if f.s_pos[r].is_none() {
                pi[r] = z[r] / f.unit_coeff[r];
            }
        }
        if k > 0 {
            let mut w = vec![0.0; k];
            for (i, &col) in f.v_cols.iter().enumerate() {
                let mut acc = z[f.s_rows[i]];
                self.for_col(col, |r, v| {
                    if f.s_pos[r].is_none() {
                        acc -= v * pi[r];
                    }
                });
                w[i] = acc;
            }
            // pi_S = K^{-T} w
            for (j, &r) in f.s_rows.iter().enumerate() {
                let mut acc = 0.0;
                for (i, wv) in w.iter().enumerate() {
                    acc += f.kinv[i * k + j] * wv;
                }
                pi[r] = acc;
            }
        }
        pi
    }

    fn reduced_cost(&self, j: usize, pi: &[f64]) -> f64 {
        let mut d = self.costs[j];
        self.for_col(j, |r, v| d -= pi[r] * v);
        d
    }

    /// Entering column: Dantzig rule (most negative reduced cost, smallest
    /// index on ties), or Bland's rule (first eligible index) when stalled.
    fn price(&self, pi: &[f64], bland: bool, d_tol: f64) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        let limit = if self.phase_one {
            self.n_total()
        } else {
            self.n_structural
        };
        for j in 0..limit {
            if self.position_of[j].is_some() {
                continue;
            }
            let d = self.reduced_cost(j, pi);
            if d < -d_tol {
                if bland {
                    return Some((j, d));
                }
                match best {
                    Some((_, bd)) if d >= bd => {}
                    _ => best = Some((j, d)),
                }
            }
        }
        best
    }

    /// Leaving position by minimum ratio. Ties go to the larger pivot element
    /// in normal mode (stability) and to the smallest basic column index under
    /// Bland's rule (anti-cycling). Both rules are deterministic.
    fn ratio_test(&self, delta: &[f64], bland: bool) -> Option<usize> {
        let mut leave: Option<usize> = None;
        let mut best_ratio = f64::INFINITY;
        for i in 0..self.m {
            let d = delta[i];
            if d <= PIVOT_TOL {
                continue;
            }
            let ratio = self.x_basic[i].max(0.0) / d;
            let tie = (ratio - best_ratio).abs() <= 1e-10 * (1.0 + best_ratio.abs());
            let better = if tie {
                match leave {
                    Some(l) => {
                        if bland {
                            self.basic_cols[i] < self.basic_cols[l]
                        } else {
                            d.abs() > delta[l].abs()
                                || (d.abs() == delta[l].abs()
                                    && self.basic_cols[i] < self.basic_cols[l])
                        }
                    }
                    None => true,
                }
            } else {
                ratio < best_ratio
            };
            if better {
                best_ratio = ratio.min(best_ratio);
                leave = Some(i);
            }
        }
        leave
    }

    fn pivot(&mut self, entering: usize, leave_pos: usize, delta: &[f64]) {
        let theta = self.x_basic[leave_pos].max(0.0) / delta[leave_pos];
        for i in 0..self.m {
            if i != leave_pos {
                self.x_basic[i] -= theta * delta[i];
            }
        }
        self.x_basic[leave_pos] = theta;
        let terms: Vec<(usize, f64)> = delta
            .iter()
            .enumerate()
            .filter(|&(i, v)| i != leave_pos && v.abs() > DROP_TOL)
            .map(|(i, &v)| (i, v))
            .collect();
        self.etas.push(Eta {
            pos: leave_pos,
            pivot: delta[leave_pos],
            terms,
        });
        let leaving = self.basic_cols[leave_pos];
        self.position_of[leaving] = None;
        self.position_of[entering] = Some(leave_pos);
        self.basic_cols[leave_pos] = entering;
    }

    fn objective(&self) -> f64 {
        self.basic_cols
            .iter()
            .zip(&self.x_basic)
            .map(|(&c, &x)| self.costs[c] * x)
            .sum()
    }

    fn run(&mut self) -> Result<SimplexStatus, SimplexError> {
        let d_tol = self.opts.tol * (1.0 + self.costs.iter().fold(0.0f64, |a, c| a.max(c.abs())));
        let mut bland = false;
        let mut stall = 0usize;
        let mut obj = self.objective();
        loop {
            if self.iterations >= self.opts.max_iter {
                return Ok(SimplexStatus::IterationLimit);
            }
            if self.etas.len() >= self.opts.refactor_every {
                self.refactor()?;
            }
            let mut c_b = vec![0.0; self.m];
            for (pos, &col) in self.basic_cols.iter().enumerate() {
                c_b[pos] = self.costs[col];
            }
            let pi = self.btran(c_b);
            let Some((entering, d_enter)) = self.price(&pi, bland, d_tol) else {
                return Ok(SimplexStatus::Optimal);
            };
            let mut delta = self.ftran_col(entering);
            let mut leave = self.ratio_test(&delta, bland);
            // Retry a dangerous pivot (or apparent unboundedness) with fresh
            // factors before trusting it.
            let risky = match leave {
                Some(pos) => delta[pos].abs() < 1e-7,
                None => true,
            };
            if risky && !self.etas.is_empty() {
                self.refactor()?;
                delta = self.ftran_col(entering);
                leave = self.ratio_test(&delta, bland);
            }
            let Some(leave_pos) = leave else {
                return Err(SimplexError::Unbounded);
            };
            self.pivot(entering, leave_pos, &delta);
            self.iterations += 1;
            let new_obj = self.objective();
            let improvement = obj - new_obj;
            if improvement <= 1e-12 * (1.0 + obj.abs()) {
                stall += 1;
                if stall > self.opts.stall_limit {
                    bland = true;
                }
            } else {
                stall = 0;
                bland = false;
            }
            obj = new_obj;
            let _ = d_enter;
        }
    }
}

/// Solve `min c'x : Ax = b, x >= 0`.
pub fn solve_standard_form(
    a: &CscMatrix,
    b: &[f64],
    c: &[f64],
    opts: &SimplexOptions,
) -> Result<SimplexSolution, SimplexError> {
    let m = a.nrows();
    let n = a.ncols();
    if b.len() != m || c.len() != n {
        return Err(SimplexError::Dimension(format!(
            "A is {m}x{n}, b has {}, c has {}",
            b.len(),
            c.len()
        )));
    }

    let mut singleton = vec![None; n];
    let mut row_singletons: Vec<Vec<usize>> = vec![Vec::new(); m];
    for j in 0..n {
        let (rows, vals) = a.col(j);
        if rows.len() == 1 {
            singleton[j] = Some((rows[0], vals[0]));
            row_singletons[rows[0]].push(j);
        }
    }

    // Initial basis: for each row the smallest-index singleton column whose
    // basic value would be non-negative; otherwise an artificial column.
    let mut basic_cols = vec![usize::MAX; m];
    let mut artificials: Vec<(usize, f64)> = Vec::new();
    let mut artificial_cols = Vec::new();
    for r in 0..m {
        let pick = row_singletons[r]
            .iter()
            .copied()
            .find(|&j| {
                let (_, aij) = singleton[j].expect("registered singleton");
                b[r] / aij >= 0.0 || b[r] == 0.0
            });
        match pick {
            Some(j) => basic_cols[r] = j,
            None => {
                let sign = if b[r] >= 0.0 { 1.0 } else { -1.0 };
                artificials.push((r, sign));
                let col = n + artificials.len() - 1;
                artificial_cols.push(col);
                basic_cols[r] = col;
            }
        }
    }

    let needs_phase_one = !artificials.is_empty();
    let n_total = n + artificials.len();
    let mut engine = Engine {
        a,
        b,
        m,
        n_structural: n,
        artificials,
        singleton,
        costs: vec![0.0; n_total],
        basic_cols,
        position_of: vec![None; n_total],
        x_basic: vec![0.0; m],
        factors: Factors::empty(m),
        etas: Vec::new(),
        opts: opts.clone(),
        iterations: 0,
        phase_one: needs_phase_one,
    };
    engine.refactor()?;

    if needs_phase_one {
        for k in 0..engine.artificials.len() {
            engine.costs[n + k] = 1.0;
        }
        let status = engine.run()?;
        let infeas = engine.objective();
        if status == SimplexStatus::IterationLimit {
            return Ok(SimplexSolution {
                x: extract(&engine),
                objective: f64::INFINITY,
                status: SimplexStatus::IterationLimit,
                iterations: engine.iterations,
            });
        }
        if infeas > opts.tol * (1.0 + b.iter().fold(0.0f64, |a, v| a.max(v.abs()))) {
            return Ok(SimplexSolution {
                x: vec![0.0; n],
                objective: f64::INFINITY,
                status: SimplexStatus::Infeasible,
                iterations: engine.iterations,
            });
        }
        // Drive remaining artificials (basic at zero) out where a structural
        // pivot exists; dependent rows keep their artificial at zero.
        let still_basic: Vec<usize> = (0..engine.m)
            .filter(|&pos| engine.basic_cols[pos] >= n)
            .collect();
        for pos in still_basic {
            'search: for j in 0..n {
                if engine.position_of[j].is_some() {
                    continue;
                }
                let delta = engine.ftran_col(j);
                if delta[pos].abs() > 1e-7 {
                    engine.pivot(j, pos, &delta);
                    break 'search;
                }
            }
        }
        engine.phase_one = false;
        engine.costs = vec![0.0; n_total];
    }

    engine.costs[..n].copy_from_slice(c);
    let status = engine.run()?;
    let x = extract(&engine);
    let objective = x.iter().zip(c).map(|(xi, ci)| xi * ci).sum();
    Ok(SimplexSolution {
        x,
        objective,
        status,
        iterations: engine.iterations,
    })
}

fn extract(engine: &Engine<'_>) -> Vec<f64> {
    let mut x = vec![0.0; engine.n_structural];
    for (pos, &col) in engine.basic_cols.iter().enumerate() {
        if col < engine.n_structural {
            x[col] = engine.x_basic[pos].max(0.0);
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn dense_to_csc(rows: &[&[f64]]) -> CscMatrix {
        let m = rows.len();
        let n = rows[0].len();
        let cols: Vec<Vec<(usize, f64)>> = (0..n)
            .map(|j| {
                (0..m)
                    .filter(|&i| rows[i][j] != 0.0)
                    .map(|i| (i, rows[i][j]))
                    .collect()
            })
            .collect();
        CscMatrix::from_columns(m, &cols)
    }

    /// `max c'x : Gx <= h, x >= 0` in standard form with slacks appended.
    fn solve_max_ineq(g: &[&[f64]], h: &[f64], c: &[f64]) -> SimplexSolution {
        let m = g.len();
        let n = c.len();
        let mut cols: Vec<Vec<(usize, f64)>> = (0..n)
            .map(|j| {
                (0..m)
                    .filter(|&i| g[i][j] != 0.0)
                    .map(|i| (i, g[i][j]))
                    .collect()
            })
            .collect();
        for i in 0..m {
            cols.push(vec![(i, 1.0)]);
        }
        let a = CscMatrix::from_columns(m, &cols);
        let mut costs: Vec<f64> = c.iter().map(|v| -v).collect();
        costs.extend(std::iter::repeat(0.0).take(m));
        let mut sol = solve_standard_form(&a, h, &costs, &SimplexOptions::default()).unwrap();
        sol.objective = -sol.objective;
        sol.x.truncate(n);
        sol
    }

    #[test]
    fn textbook_maximisation() {
        // max 5x1 + 4x2 + 3x3 : 2x1+3x2+x3 <= 5, 4x1+x2+2x3 <= 11,
        // 3x1+4x2+2x3 <= 8 -> optimum 13 at (2, 0, 1).
        let sol = solve_max_ineq(
            &[&[2.0, 3.0, 1.0], &[4.0, 1.0, 2.0], &[3.0, 4.0, 2.0]],
            &[5.0, 11.0, 8.0],
            &[5.0, 4.0, 3.0],
        );
        assert_eq!(sol.status, SimplexStatus::Optimal);
        assert_abs_diff_eq!(sol.objective, 13.0, epsilon = 1e-9);
        assert_abs_diff_eq!(sol.x[0], 2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(sol.x[1], 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(sol.x[2], 1.0, epsilon = 1e-9);
    }

    #[test]
    fn degenerate_and_symmetric() {
        // max 10x1 + 12x2 + 12x3 with symmetric constraints -> 136 at (4,4,4).
        let sol = solve_max_ineq(
            &[
                &[1.0, 2.0, 2.0],
                &[2.0, 1.0, 2.0],
                &[2.0, 2.0, 1.0],
            ],
            &[20.0, 20.0, 20.0],
            &[10.0, 12.0, 12.0],
        );
        assert_abs_diff_eq!(sol.objective, 136.0, epsilon = 1e-8);
        for v in &sol.x {
            assert_abs_diff_eq!(*v, 4.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn unbounded_detected() {
        // max x : -x <= 1 has no upper bound.
        let a = dense_to_csc(&[&[-1.0, 1.0]]);
        let err = solve_standard_form(&a, &[1.0], &[-1.0, 0.0], &SimplexOptions::default());
        assert!(matches!(err, Err(SimplexError::Unbounded)));
    }

    #[test]
    fn infeasible_detected_via_phase_one() {
        // x1 + x2 = -1 with x >= 0 is infeasible; no singleton can cover the
        // row feasibly so an artificial is used.
        let a = dense_to_csc(&[&[1.0, 1.0]]);
        let sol =
            solve_standard_form(&a, &[-1.0], &[1.0, 1.0], &SimplexOptions::default()).unwrap();
        assert_eq!(sol.status, SimplexStatus::Infeasible);
    }

    #[test]
    fn equality_with_artificials() {
        // min x1 + 2x2 : x1 + x2 = 4, x1 - x2 = 0 -> x = (2, 2), objective 6.
        let a = dense_to_csc(&[&[1.0, 1.0], &[1.0, -1.0]]);
        let sol =
            solve_standard_form(&a, &[4.0, 0.0], &[1.0, 2.0], &SimplexOptions::default()).unwrap();
        assert_eq!(sol.status, SimplexStatus::Optimal);
        assert_abs_diff_eq!(sol.objective, 6.0, epsilon = 1e-9);
        assert_abs_diff_eq!(sol.x[0], 2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(sol.x[1], 2.0, epsilon = 1e-9);
    }

    /// Brute-force LP oracle: enumerate all bases, keep feasible vertex
    /// solutions, return the minimum objective. Only for tiny instances.
    fn brute_force_min(a: &CscMatrix, b: &[f64], c: &[f64]) -> Option<f64> {
        let m = a.nrows();
        let n = a.ncols();
        let mut dense = vec![vec![0.0; n]; m];
        for j in 0..n {
            let (rows, vals) = a.col(j);
            for (&r, &v) in rows.iter().zip(vals) {
                dense[r][j] = v;
            }
        }
        let mut best: Option<f64> = None;
        let mut combo: Vec<usize> = (0..m).collect();
        loop {
            // Solve the m x m system for this basis by Gaussian elimination.
            let mut mat = vec![vec![0.0; m + 1]; m];
            for i in 0..m {
                for (jj, &col) in combo.iter().enumerate() {
                    mat[i][jj] = dense[i][col];
                }
                mat[i][m] = b[i];
            }
            let mut ok = true;
            for col in 0..m {
                let piv = (col..m).max_by(|&i, &j| mat[i][col].abs().total_cmp(&mat[j][col].abs()));
                let piv = piv.unwrap();
                if mat[piv][col].abs() < 1e-10 {
                    ok = false;
                    break;
                }
                mat.swap(piv, col);
                for i in 0..m {
                    if i != col {
                        let f = mat[i][col] / mat[col][col];
                        for j in col..=m {
                            mat[i][j] -= f * mat[col][j];
                        }
                    }
                }
            }
            if ok {
                let x: Vec<f64> = (0..m).map(|i| mat[i][m] / mat[i][i]).collect();
                if x.iter().all(|&v| v >= -1e-9) {
                    let obj: f64 = combo.iter().zip(&x).map(|(&col, &v)| c[col] * v).sum();
                    best = Some(match best {
                        Some(b) => b.min(obj),
                        None => obj,
                    });
                }
            }
            // next combination
            let mut i = m;
            loop {
                if i == 0 {
                    return best;
                }
                i -= 1;
                if combo[i] != i + n - m {
                    combo[i] += 1;
                    for j2 in (i + 1)..m {
                        combo[j2] = combo[j2 - 1] + 1;
                    }
                    break;
                }
            }
        }
    }

    #[test]
    fn random_small_lps_match_brute_force() {
        use rand::rngs::StdRng;
        use rand::{Rng, SeedableRng};
        let mut rng = StdRng::seed_from_u64(42);
        let mut solved = 0;
        for _ in 0..60 {
            let m = rng.gen_range(1..=3);
            let n_struct = rng.gen_range(1..=4);
            // structural columns plus slack columns so feasibility is easy
            let mut cols: Vec<Vec<(usize, f64)>> = Vec::new();
            for _ in 0..n_struct {
                let mut col = Vec::new();
                for r in 0..m {
                    if rng.gen_bool(0.7) {
                        col.push((r, rng.gen_range(-3.0..3.0f64).round()));
                    }
                }
                col.retain(|&(_, v)| v != 0.0);
                cols.push(col);
            }
            for r in 0..m {
                cols.push(vec![(r, 1.0)]);
            }
            let a = CscMatrix::from_columns(m, &cols);
            let b: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..5.0f64).round()).collect();
            let mut c: Vec<f64> = (0..n_struct)
                .map(|_| rng.gen_range(-2.0..4.0f64).round())
                .collect();
            c.extend(std::iter::repeat(0.0).take(m));
            // keep the LP bounded: slacks cost zero, structurals may be negative
            // only when their column has a positive entry in some row
            for j in 0..n_struct {
                if cols[j].iter().all(|&(_, v)| v <= 0.0) && c[j] < 0.0 {
                    c[j] = 0.0;
                }
            }
            let Some(oracle) = brute_force_min(&a, &b, &c) else {
                continue;
            };
            let sol = solve_standard_form(&a, &b, &c, &SimplexOptions::default());
            match sol {
                Ok(sol) => {
                    if sol.status == SimplexStatus::Optimal {
                        assert_abs_diff_eq!(sol.objective, oracle, epsilon = 1e-7);
                        solved += 1;
                    }
                }
                Err(SimplexError::Unbounded) => {
                    // brute force found a vertex but the LP may still be
                    // unbounded in a ray direction; skip
                }
                Err(e) => panic!("solver error: {e}"),
            }
        }
        assert!(solved >= 30, "only {solved} instances checked");
    }

    #[test]
    fn deterministic_replay() {
        let sol1 = solve_max_ineq(
            &[&[2.0, 3.0, 1.0], &[4.0, 1.0, 2.0], &[3.0, 4.0, 2.0]],
            &[5.0, 11.0, 8.0],
            &[5.0, 4.0, 3.0],
        );
        let sol2 = solve_max_ineq(
            &[&[2.0, 3.0, 1.0], &[4.0, 1.0, 2.0], &[3.0, 4.0, 2.0]],
            &[5.0, 11.0, 8.0],
            &[5.0, 4.0, 3.0],
        );
        assert_eq!(sol1.x, sol2.x);
        assert_eq!(sol1.objective.to_bits(), sol2.objective.to_bits());
        assert_eq!(sol1.iterations, sol2.iterations);
    }
}
