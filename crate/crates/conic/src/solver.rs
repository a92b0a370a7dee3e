//! Infeasible-start primal-dual path-following interior-point method.
//!
//! The problem is brought into the standard form
//!
//! ```text
//! min  Σ_b Re Tr(C_b X_b) + c·s
//! s.t. Σ_b Re Tr(A_cb X_b) + a_c·s = b_c,   X_b ⪰ 0,  s ≥ 0
//! ```
//!
//! where `s` collects nonnegative scalars, both halves of split free scalars
//! and one slack per inequality. Search directions use the HKM scaling with a
//! Mehrotra predictor-corrector step; the Schur complement is dense.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::linalg::{frobenius, hermitize, hpd_inverse, max_psd_step, re_trace_prod, CMat, C64};
use crate::problem::{Coeff, SdpProblem, Sense};
use crate::ConicError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    MaxIter,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Relative tolerance on primal residual, dual residual and duality gap.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            max_iter: 100,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub status: SolveStatus,
    /// One Hermitian PSD matrix per block, in declaration order.
    pub blocks: Vec<CMat>,
    pub scalars: Vec<f64>,
    /// Primal objective value.
    pub objective: f64,
    pub dual_objective: f64,
    /// `‖b − A(X)‖ / (1 + ‖b‖)`
    pub primal_residual: f64,
    /// `‖C − A*(y) − Z‖ / (1 + ‖C‖)`
    pub dual_residual: f64,
    /// `|p − d| / (1 + |p| + |d|)`
    pub relative_gap: f64,
    /// Constraint multipliers in declaration order.
    pub multipliers: Vec<f64>,
    pub iterations: usize,
}

impl SdpSolution {
    pub fn block(&self, id: crate::BlockId) -> &CMat {
        &self.blocks[id.0]
    }

    pub fn scalar(&self, id: crate::ScalarId) -> f64 {
        self.scalars[id.0]
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

/// Solve with the given tolerance and iteration cap.
pub fn solve(problem: &SdpProblem, tol: f64, max_iter: usize) -> Result<SdpSolution, ConicError> {
    solve_with(problem, &SolveOptions { tol, max_iter })
}

pub fn solve_with(problem: &SdpProblem, opts: &SolveOptions) -> Result<SdpSolution, ConicError> {
    problem.validate()?;
    let standard = Standard::build(problem);
    let mut ipm = Ipm::new(standard);
    let status = ipm.run(opts);
    Ok(ipm.into_solution(problem, status))
}

/// How a standard-form LP coordinate maps back to the user's scalars.
#[derive(Debug, Clone, Copy)]
enum LpOrigin {
    Scalar { index: usize, sign: f64 },
    Slack,
}

#[derive(Debug, Clone)]
struct Standard {
    dims: Vec<usize>,
    c_blocks: Vec<Option<Coeff>>,
    c_lp: DVector<f64>,
    /// Per block: (constraint row, coefficient).
    a_blocks: Vec<Vec<(usize, Coeff)>>,
    /// Dense `m × n_lp`.
    a_lp: DMatrix<f64>,
    b: DVector<f64>,
    lp_origin: Vec<LpOrigin>,
    /// Maps standard rows back to user constraint indices.
    row_origin: Vec<usize>,
    /// User constraints that are structurally `0 = rhs` with rhs ≠ 0.
    trivially_infeasible: bool,
    num_user_constraints: usize,
    // scaling
    row_scale: Vec<f64>,
    b_scale: f64,
    c_scale: f64,
    b_norm_orig: f64,
    c_norm_orig: f64,
}

impl Standard {
    fn build(p: &SdpProblem) -> Self {
        let dims: Vec<usize> = p.blocks.iter().map(|b| b.dim).collect();
        let nb = dims.len();

        let mut lp_origin = Vec::new();
        let mut scalar_cols: Vec<Vec<(usize, f64)>> = Vec::with_capacity(p.scalars.len());
        for (i, s) in p.scalars.iter().enumerate() {
            let mut cols = vec![(lp_origin.len(), 1.0)];
            lp_origin.push(LpOrigin::Scalar {
                index: i,
                sign: 1.0,
            });
            if !s.nonnegative {
                cols.push((lp_origin.len(), -1.0));
                lp_origin.push(LpOrigin::Scalar {
                    index: i,
                    sign: -1.0,
                });
            }
            scalar_cols.push(cols);
        }
        let mut slack_col = vec![None; p.constraints.len()];
        for (k, c) in p.constraints.iter().enumerate() {
            if c.sense == Sense::Le {
                slack_col[k] = Some(lp_origin.len());
                lp_origin.push(LpOrigin::Slack);
            }
        }
        let n_lp = lp_origin.len();

        let mut c_blocks: Vec<Option<Coeff>> = vec![None; nb];
        for (id, coeff) in &p.objective.blocks {
            c_blocks[id.0] = Some(merge(c_blocks[id.0].take(), coeff));
        }
        let mut c_lp: DVector<f64> = DVector::zeros(n_lp);
        for &(id, w) in &p.objective.scalars {
            for &(col, sign) in &scalar_cols[id.0] {
                c_lp[col] += sign * w;
            }
        }

        // Rows, skipping structurally empty constraints.
        let mut rows: Vec<Row> = Vec::new();
        let mut trivially_infeasible = false;
        for (k, c) in p.constraints.iter().enumerate() {
            let mut blocks: Vec<Option<Coeff>> = vec![None; nb];
            for (id, coeff) in &c.blocks {
                blocks[id.0] = Some(merge(blocks[id.0].take(), coeff));
            }
            let mut lp = vec![0.0; n_lp];
            for &(id, w) in &c.scalars {
                for &(col, sign) in &scalar_cols[id.0] {
                    lp[col] += sign * w;
                }
            }
            if let Some(col) = slack_col[k] {
                lp[col] = 1.0;
            }
            let norm2: f64 = blocks
                .iter()
                .flatten()
                .map(|a| a.frobenius().powi(2))
                .sum::<f64>()
                + lp.iter().map(|v| v * v).sum::<f64>();
            if norm2 == 0.0 {
                if c.rhs != 0.0 {
                    trivially_infeasible = true;
                }
                continue;
            }
            rows.push((k, blocks, lp, c.rhs));
        }

        if !drop_dependent_rows(&mut rows) {
            trivially_infeasible = true;
        }

        let m = rows.len();
        let b_orig = DVector::from_iterator(m, rows.iter().map(|r| r.3));
        let c_norm_orig = (c_blocks
            .iter()
            .flatten()
            .map(|a| a.frobenius().powi(2))
            .sum::<f64>()
            + c_lp.norm_squared())
        .sqrt();

        let mut a_blocks: Vec<Vec<(usize, Coeff)>> = vec![Vec::new(); nb];
        let mut a_lp = DMatrix::zeros(m, n_lp);
        let mut b = DVector::zeros(m);
        let mut row_scale = Vec::with_capacity(m);
        let mut row_origin = Vec::with_capacity(m);
        for (r, (k, blocks, lp, rhs)) in rows.into_iter().enumerate() {
            let norm = (blocks
                .iter()
                .flatten()
                .map(|a| a.frobenius().powi(2))
                .sum::<f64>()
                + lp.iter().map(|v| v * v).sum::<f64>())
            .sqrt();
            let inv = 1.0 / norm;
            for (bi, coeff) in blocks.into_iter().enumerate() {
                if let Some(mut a) = coeff {
                    a.scale(inv);
                    a_blocks[bi].push((r, a));
                }
            }
            for (l, v) in lp.into_iter().enumerate() {
                a_lp[(r, l)] = v * inv;
            }
            b[r] = rhs * inv;
            row_scale.push(norm);
            row_origin.push(k);
        }

        let b_scale = b.norm().max(1.0);
        b /= b_scale;
        let c_scale = (c_blocks
            .iter()
            .flatten()
            .map(|a| a.frobenius().powi(2))
            .sum::<f64>()
            + c_lp.norm_squared())
        .sqrt()
        .max(1.0);
        for c in c_blocks.iter_mut().flatten() {
            c.scale(1.0 / c_scale);
        }
        c_lp /= c_scale;

        Self {
            dims,
            c_blocks,
            c_lp,
            a_blocks,
            a_lp,
            b,
            lp_origin,
            row_origin,
            trivially_infeasible,
            num_user_constraints: p.constraints.len(),
            row_scale,
            b_scale,
            c_scale,
            b_norm_orig: b_orig.norm(),
            c_norm_orig,
        }
    }

    fn rows(&self) -> usize {
        self.b.len()
    }

    /// Factors `A A*`; positive definite once dependent rows are removed.
    fn gram_factor(&self) -> Option<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
        let m = self.rows();
        let mut gram = DMatrix::zeros(m, m);
        for i in 0..m {
            let e = DVector::from_fn(m, |r, _| if r == i { 1.0 } else { 0.0 });
            let x: Vec<CMat> = (0..self.dims.len())
                .map(|bi| self.adjoint_block(bi, &e))
                .collect();
            let s = self.a_lp.transpose() * &e;
            gram.set_column(i, &self.apply(&x, &s));
        }
        let sym = (&gram + gram.transpose()) * 0.5;
        nalgebra::Cholesky::new(sym)
    }

    fn n_lp(&self) -> usize {
        self.lp_origin.len()
    }

    /// `A(X, s)`
    fn apply(&self, x: &[CMat], s: &DVector<f64>) -> DVector<f64> {
        let mut out = &self.a_lp * s;
        for (bi, list) in self.a_blocks.iter().enumerate() {
            for (r, a) in list {
                out[*r] += a.re_inner(&x[bi]);
            }
        }
        out
    }

    /// `Σ_c y_c A_cb`
    fn adjoint_block(&self, bi: usize, y: &DVector<f64>) -> CMat {
        let n = self.dims[bi];
        let mut out = CMat::zeros(n, n);
        for (r, a) in &self.a_blocks[bi] {
            a.add_scaled_to(y[*r], &mut out);
        }
        out
    }

    fn objective(&self, x: &[CMat], s: &DVector<f64>) -> f64 {
        let mut v = self.c_lp.dot(s);
        for (bi, c) in self.c_blocks.iter().enumerate() {
            if let Some(c) = c {
                v += c.re_inner(&x[bi]);
            }
        }
        v
    }

    fn c_dense(&self, bi: usize) -> CMat {
        match &self.c_blocks[bi] {
            Some(c) => c.to_dense(),
            None => CMat::zeros(self.dims[bi], self.dims[bi]),
        }
    }
}

type Row = (usize, Vec<Option<Coeff>>, Vec<f64>, f64);

/// Squared residual norm below which a normalized row counts as a linear
/// combination of the rows kept before it.
const DEPENDENCE_TOL: f64 = 1e-13;

/// Removes equality rows that are linear combinations of other rows, so the
/// Schur complement stays nonsingular. Returns `false` when a removed row's
/// right-hand side contradicts the rows it depends on (the constraints are
/// then inconsistent and the problem is infeasible).
fn drop_dependent_rows(rows: &mut Vec<Row>) -> bool {
    let m = rows.len();
    if m < 2 {
        return true;
    }
    let norms: Vec<f64> = rows
        .iter()
        .map(|(_, blocks, lp, _)| {
            (blocks
                .iter()
                .flatten()
                .map(|a| a.frobenius().powi(2))
                .sum::<f64>()
                + lp.iter().map(|v| v * v).sum::<f64>())
            .sqrt()
        })
        .collect();
    let dense: Vec<Vec<Option<CMat>>> = rows
        .iter()
        .map(|(_, blocks, _, _)| {
            blocks
                .iter()
                .map(|c| match c {
                    Some(Coeff::Dense(a)) => Some(a.clone()),
                    Some(sparse) => Some(sparse.to_dense()),
                    None => None,
                })
                .collect()
        })
        .collect();
    let is_sparse = |c: &Coeff| matches!(c, Coeff::Sparse { .. });
    // Gram matrix of the normalized rows.
    let mut gram = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let mut v: f64 = rows[i].2.iter().zip(&rows[j].2).map(|(a, b)| a * b).sum();
            for (bi, (ci, cj)) in rows[i].1.iter().zip(&rows[j].1).enumerate() {
                if let (Some(ci), Some(cj)) = (ci, cj) {
                    v += if is_sparse(ci) || !is_sparse(cj) {
                        ci.re_inner(dense[j][bi].as_ref().expect("dense copy exists"))
                    } else {
                        cj.re_inner(dense[i][bi].as_ref().expect("dense copy exists"))
                    };
                }
            }
            v /= norms[i] * norms[j];
            gram[(i, j)] = v;
            gram[(j, i)] = v;
        }
    }
    // Diagonally pivoted Cholesky: rows whose residual vanishes are dependent.
    let mut residual: Vec<f64> = (0..m).map(|i| gram[(i, i)]).collect();
    let mut factor = DMatrix::<f64>::zeros(m, m);
    let mut chosen = vec![false; m];
    for k in 0..m {
        let Some(p) = (0..m)
            .filter(|&i| !chosen[i])
            .max_by(|&a, &b| residual[a].total_cmp(&residual[b]))
        else {
            break;
        };
        if residual[p] <= DEPENDENCE_TOL {
            break;
        }
        chosen[p] = true;
        let pivot = residual[p].sqrt();
        for i in 0..m {
            if chosen[i] && i != p {
                continue;
            }
            let dot: f64 = (0..k).map(|j| factor[(i, j)] * factor[(p, j)]).sum();
            factor[(i, k)] = (gram[(i, p)] - dot) / pivot;
            if i != p {
                residual[i] -= factor[(i, k)].powi(2);
            }
        }
    }
    if chosen.iter().all(|&c| c) {
        return true;
    }
    let kept: Vec<usize> = (0..m).filter(|&i| chosen[i]).collect();
    let dropped: Vec<usize> = (0..m).filter(|&i| !chosen[i]).collect();
    let rhs: Vec<f64> = (0..m).map(|i| rows[i].3 / norms[i]).collect();
    let g_kk = DMatrix::from_fn(kept.len(), kept.len(), |a, b| gram[(kept[a], kept[b])]);
    let b_k = DVector::from_iterator(kept.len(), kept.iter().map(|&i| rhs[i]));
    let scale = 1.0 + b_k.amax();
    let lu = g_kk.lu();
    let mut consistent = true;
    for &d in &dropped {
        let g_kd = DVector::from_iterator(kept.len(), kept.iter().map(|&i| gram[(i, d)]));
        match lu.solve(&g_kd) {
            Some(c) => {
                if (rhs[d] - c.dot(&b_k)).abs() > 1e-7 * (scale + rhs[d].abs()) {
                    consistent = false;
                }
            }
            None => consistent = false,
        }
    }
    let mut index = 0;
    rows.retain(|_| {
        let keep = chosen[index];
        index += 1;
        keep
    });
    consistent
}

fn merge(prev: Option<Coeff>, next: &Coeff) -> Coeff {
    match prev {
        None => next.clone(),
        Some(p) => Coeff::Dense(p.to_dense() + next.to_dense()),
    }
}

struct Direction {
    dx: Vec<CMat>,
    ds: DVector<f64>,
    dy: DVector<f64>,
    dz: Vec<CMat>,
    dzl: DVector<f64>,
}

struct Residuals {
    rp: DVector<f64>,
    rd: Vec<CMat>,
    rd_lp: DVector<f64>,
}

/// Factorization of the Schur complement. Solves are refined against the
/// original matrix: near the optimum the matrix is badly conditioned (and
/// may need regularization to factor), and an inexact Newton direction
/// shows up as a primal residual that stops decreasing.
struct SchurFactor {
    kind: SchurKind,
    matrix: DMatrix<f64>,
}

enum SchurKind {
    Cholesky(nalgebra::Cholesky<f64, nalgebra::Dyn>),
    Lu(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
    Empty,
}

/// Maximum iterative-refinement passes per Schur solve.
const REFINEMENT_STEPS: usize = 5;

impl SchurFactor {
    fn new(matrix: DMatrix<f64>) -> Option<Self> {
        if matrix.nrows() == 0 {
            return Some(Self {
                kind: SchurKind::Empty,
                matrix,
            });
        }
        if let Some(c) = nalgebra::Cholesky::new(matrix.clone()) {
            return Some(Self {
                kind: SchurKind::Cholesky(c),
                matrix,
            });
        }
        let max_diag = (0..matrix.nrows())
            .map(|i| matrix[(i, i)].abs())
            .fold(0.0, f64::max);
        let mut m = matrix.clone();
        let mut reg = 1e-14 * max_diag.max(1e-300);
        for _ in 0..6 {
            for i in 0..m.nrows() {
                m[(i, i)] += reg;
            }
            if let Some(c) = nalgebra::Cholesky::new(m.clone()) {
                return Some(Self {
                    kind: SchurKind::Cholesky(c),
                    matrix,
                });
            }
            reg *= 100.0;
        }
        let lu = matrix.clone().lu();
        if lu.is_invertible() {
            Some(Self {
                kind: SchurKind::Lu(lu),
                matrix,
            })
        } else {
            None
        }
    }

    fn solve_raw(&self, rhs: &DVector<f64>) -> Option<DVector<f64>> {
        match &self.kind {
            SchurKind::Cholesky(c) => Some(c.solve(rhs)),
            SchurKind::Lu(lu) => lu.solve(rhs),
            SchurKind::Empty => Some(DVector::zeros(0)),
        }
    }

    fn solve(&self, rhs: &DVector<f64>) -> Option<DVector<f64>> {
        let mut x = self.solve_raw(rhs)?;
        let mut r = rhs - &self.matrix * &x;
        let mut r_norm = r.norm();
        for _ in 0..REFINEMENT_STEPS {
            if r_norm <= 1e-15 * rhs.norm() {
                break;
            }
            let candidate = &x + self.solve_raw(&r)?;
            let r_next = rhs - &self.matrix * &candidate;
            let next_norm = r_next.norm();
            if next_norm.is_nan() || next_norm >= r_norm {
                break;
            }
            x = candidate;
            r = r_next;
            r_norm = next_norm;
        }
        Some(x)
    }
}

struct Ipm {
    data: Standard,
    x: Vec<CMat>,
    s: DVector<f64>,
    y: DVector<f64>,
    z: Vec<CMat>,
    zl: DVector<f64>,
    iterations: usize,
    /// Cholesky factor of the constraint Gram matrix `A A*`, used to project
    /// primal directions back onto `A(ΔX) = r_p`.
    gram: Option<nalgebra::Cholesky<f64, nalgebra::Dyn>>,
}

impl Ipm {
    fn new(data: Standard) -> Self {
        let n_max = data.dims.iter().copied().max().unwrap_or(1).max(1) as f64;
        let mut xi: f64 = 10.0f64.max(n_max.sqrt());
        for r in 0..data.rows() {
            xi = xi.max((1.0 + data.b[r].abs()) * n_max.sqrt());
        }
        let mut eta: f64 = 10.0f64.max(n_max.sqrt());
        for c in data.c_blocks.iter().flatten() {
            eta = eta.max(c.frobenius() * n_max.sqrt());
        }
        eta = eta.max(data.c_lp.amax());
        let x = data
            .dims
            .iter()
            .map(|&n| CMat::identity(n, n) * C64::new(xi, 0.0))
            .collect();
        let z = data
            .dims
            .iter()
            .map(|&n| CMat::identity(n, n) * C64::new(eta, 0.0))
            .collect();
        let n_lp = data.n_lp();
        let m = data.rows();
        let gram = data.gram_factor();
        Self {
            x,
            s: DVector::from_element(n_lp, xi),
            y: DVector::zeros(m),
            z,
            zl: DVector::from_element(n_lp, eta),
            data,
            iterations: 0,
            gram,
        }
    }

    fn barrier_dim(&self) -> f64 {
        (self.data.dims.iter().sum::<usize>() + self.data.n_lp()) as f64
    }

    fn residuals(&self) -> Residuals {
        let d = &self.data;
        let rp = &d.b - d.apply(&self.x, &self.s);
        let rd = (0..d.dims.len())
            .map(|bi| d.c_dense(bi) - d.adjoint_block(bi, &self.y) - &self.z[bi])
            .collect();
        let rd_lp = &d.c_lp - d.a_lp.transpose() * &self.y - &self.zl;
        Residuals { rp, rd, rd_lp }
    }

    fn complementarity(&self) -> f64 {
        self.x
            .iter()
            .zip(&self.z)
            .map(|(x, z)| re_trace_prod(x, z))
            .sum::<f64>()
            + self.s.dot(&self.zl)
    }

    /// (primal residual, dual residual, gap, pobj, dobj) in original units.
    fn metrics(&self, res: &Residuals) -> (f64, f64, f64, f64, f64) {
        let d = &self.data;
        let rp_orig: f64 = res
            .rp
            .iter()
            .zip(&d.row_scale)
            .map(|(r, s)| (r * s).powi(2))
            .sum::<f64>()
            .sqrt()
            * d.b_scale;
        let rd_norm = (res.rd.iter().map(|m| frobenius(m).powi(2)).sum::<f64>()
            + res.rd_lp.norm_squared())
        .sqrt();
        let relp = rp_orig / (1.0 + d.b_norm_orig);
        let reld = rd_norm * d.c_scale / (1.0 + d.c_norm_orig);
        let scale = d.b_scale * d.c_scale;
        let pobj = d.objective(&self.x, &self.s) * scale;
        let dobj = d.b.dot(&self.y) * scale;
        let gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
        (relp, reld, gap, pobj, dobj)
    }

    fn run(&mut self, opts: &SolveOptions) -> SolveStatus {
        if self.data.trivially_infeasible {
            return SolveStatus::Infeasible;
        }
        let nb = self.data.dims.len();
        let big_n = self.barrier_dim();
        let mut tau = 0.9;
        for iter in 0..=opts.max_iter {
            self.iterations = iter;
            let res = self.residuals();
            let (relp, reld, gap, _, _) = self.metrics(&res);
            if relp <= opts.tol && reld <= opts.tol && gap <= opts.tol {
                return SolveStatus::Optimal;
            }
            if let Some(status) = self.infeasibility(&res) {
                return status;
            }
            if iter == opts.max_iter {
                break;
            }
            let mu = self.complementarity() / big_n;

            let Some(zinv) = self.z.iter().map(hpd_inverse).collect::<Option<Vec<_>>>() else {
                break;
            };
            let Some(schur) = SchurFactor::new(self.schur(&zinv)) else {
                break;
            };
            // X Rd Z^{-1}, shared by predictor and corrector.
            let x_rd_zinv: Vec<CMat> = (0..nb)
                .map(|bi| &self.x[bi] * &res.rd[bi] * &zinv[bi])
                .collect();

            // Predictor.
            let zero_t: Vec<CMat> = self.data.dims.iter().map(|&n| CMat::zeros(n, n)).collect();
            let zero_tl = DVector::zeros(self.data.n_lp());
            let Some(pred) = self.direction(&res, &zinv, &x_rd_zinv, &schur, &zero_t, &zero_tl)
            else {
                break;
            };
            let Some((ap, ad)) = self.step_lengths(&pred) else {
                break;
            };
            let (ap, ad) = (ap.min(1.0), ad.min(1.0));
            let mu_aff = self.trial_complementarity(&pred, ap, ad) / big_n;
            let sigma = if mu > 0.0 {
                (mu_aff / mu).max(0.0).powi(3).min(1.0)
            } else {
                0.0
            };

            // Corrector.
            let target = sigma * mu;
            let t: Vec<CMat> = (0..nb)
                .map(|bi| {
                    let n = self.data.dims[bi];
                    let k =
                        CMat::identity(n, n) * C64::new(target, 0.0) - &pred.dx[bi] * &pred.dz[bi];
                    k * &zinv[bi]
                })
                .collect();
            let tl = DVector::from_iterator(
                self.data.n_lp(),
                (0..self.data.n_lp()).map(|l| (target - pred.ds[l] * pred.dzl[l]) / self.zl[l]),
            );
            let Some(dir) = self.direction(&res, &zinv, &x_rd_zinv, &schur, &t, &tl) else {
                break;
            };
            let Some((ap_max, ad_max)) = self.step_lengths(&dir) else {
                break;
            };
            let ap = (tau * ap_max).min(1.0);
            let ad = (tau * ad_max).min(1.0);
            if ap.max(ad) < 1e-12 {
                break;
            }
            self.apply_step(&dir, ap, ad);
            tau = 0.9 + 0.09 * ap.min(ad);
        }
        SolveStatus::MaxIter
    }

    fn infeasibility(&self, res: &Residuals) -> Option<SolveStatus> {
        let d = &self.data;
        let dobj = d.b.dot(&self.y);
        if dobj > 1e3 {
            // ‖A*(y) + Z‖ = ‖C − Rd‖
            let norm = ((0..d.dims.len())
                .map(|bi| frobenius(&(d.c_dense(bi) - &res.rd[bi])).powi(2))
                .sum::<f64>()
                + (&d.c_lp - &res.rd_lp).norm_squared())
            .sqrt();
            if norm / dobj < 1e-8 {
                return Some(SolveStatus::Infeasible);
            }
        }
        let pobj = d.objective(&self.x, &self.s);
        if -pobj > 1e3 {
            let ax = (&d.b - &res.rp).norm();
            if ax / -pobj < 1e-8 {
                return Some(SolveStatus::Unbounded);
            }
        }
        None
    }

    fn schur(&self, zinv: &[CMat]) -> DMatrix<f64> {
        let d = &self.data;
        let m = d.rows();
        let mut out = DMatrix::zeros(m, m);
        for (bi, list) in d.a_blocks.iter().enumerate() {
            for (jj, (j, aj)) in list.iter().enumerate() {
                let g = aj.sandwich(&self.x[bi], &zinv[bi]);
                for (i, ai) in list.iter().take(jj + 1).map(|(i, a)| (*i, a)) {
                    let v = ai.re_inner(&g);
                    out[(i, *j)] += v;
                    if i != *j {
                        out[(*j, i)] += v;
                    }
                }
            }
        }
        for l in 0..d.n_lp() {
            let w = self.s[l] / self.zl[l];
            let col = d.a_lp.column(l);
            for i in 0..m {
                if col[i] == 0.0 {
                    continue;
                }
                for j in 0..m {
                    out[(i, j)] += col[i] * col[j] * w;
                }
            }
        }
        out
    }

    /// Solves the Newton system for a complementarity target whose
    /// `K Z^{-1}` term is `t` (blocks) and `k / z` is `tl` (LP part).
    fn direction(
        &self,
        res: &Residuals,
        zinv: &[CMat],
        x_rd_zinv: &[CMat],
        schur: &SchurFactor,
        t: &[CMat],
        tl: &DVector<f64>,
    ) -> Option<Direction> {
        let d = &self.data;
        let nb = d.dims.len();
        let h: Vec<CMat> = (0..nb)
            .map(|bi| &t[bi] - &self.x[bi] - &x_rd_zinv[bi])
            .collect();
        let hl = DVector::from_iterator(
            d.n_lp(),
            (0..d.n_lp()).map(|l| tl[l] - self.s[l] - self.s[l] * res.rd_lp[l] / self.zl[l]),
        );
        let rhs = &res.rp - d.apply(&h, &hl);
        let dy = schur.solve(&rhs)?;
        if dy.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let dz: Vec<CMat> = (0..nb)
            .map(|bi| {
                let mut m = &res.rd[bi] - d.adjoint_block(bi, &dy);
                hermitize(&mut m);
                m
            })
            .collect();
        let dzl = &res.rd_lp - d.a_lp.transpose() * &dy;
        let mut dx: Vec<CMat> = (0..nb)
            .map(|bi| {
                let mut m = &t[bi] - &self.x[bi] - &self.x[bi] * &dz[bi] * &zinv[bi];
                hermitize(&mut m);
                m
            })
            .collect();
        let mut ds = DVector::from_iterator(
            d.n_lp(),
            (0..d.n_lp()).map(|l| tl[l] - self.s[l] - self.s[l] * dzl[l] / self.zl[l]),
        );
        // Near the optimum X and Z⁻¹ are badly conditioned and forming ΔX
        // loses the linear constraint to roundoff; restore it by the
        // minimum-norm correction.
        if let Some(gram) = &self.gram {
            let err = &res.rp - d.apply(&dx, &ds);
            let c = gram.solve(&err);
            if c.iter().all(|v| v.is_finite()) {
                for (bi, m) in dx.iter_mut().enumerate() {
                    *m += d.adjoint_block(bi, &c);
                    hermitize(m);
                }
                ds += d.a_lp.transpose() * &c;
            }
        }
        Some(Direction {
            dx,
            ds,
            dy,
            dz,
            dzl,
        })
    }

    fn step_lengths(&self, dir: &Direction) -> Option<(f64, f64)> {
        let mut ap = f64::INFINITY;
        let mut ad = f64::INFINITY;
        for bi in 0..self.data.dims.len() {
            ap = ap.min(max_psd_step(&self.x[bi], &dir.dx[bi])?);
            ad = ad.min(max_psd_step(&self.z[bi], &dir.dz[bi])?);
        }
        for l in 0..self.data.n_lp() {
            if dir.ds[l] < 0.0 {
                ap = ap.min(-self.s[l] / dir.ds[l]);
            }
            if dir.dzl[l] < 0.0 {
                ad = ad.min(-self.zl[l] / dir.dzl[l]);
            }
        }
        Some((ap, ad))
    }

    fn trial_complementarity(&self, dir: &Direction, ap: f64, ad: f64) -> f64 {
        let mut acc = 0.0;
        for bi in 0..self.data.dims.len() {
            let x = &self.x[bi] + &dir.dx[bi] * C64::new(ap, 0.0);
            let z = &self.z[bi] + &dir.dz[bi] * C64::new(ad, 0.0);
            acc += re_trace_prod(&x, &z);
        }
        for l in 0..self.data.n_lp() {
            acc += (self.s[l] + ap * dir.ds[l]) * (self.zl[l] + ad * dir.dzl[l]);
        }
        acc
    }

    fn apply_step(&mut self, dir: &Direction, ap: f64, ad: f64) {
        for bi in 0..self.data.dims.len() {
            self.x[bi] += &dir.dx[bi] * C64::new(ap, 0.0);
            self.z[bi] += &dir.dz[bi] * C64::new(ad, 0.0);
            hermitize(&mut self.x[bi]);
            hermitize(&mut self.z[bi]);
        }
        self.s += &dir.ds * ap;
        self.zl += &dir.dzl * ad;
        self.y += &dir.dy * ad;
    }

    fn into_solution(self, problem: &SdpProblem, status: SolveStatus) -> SdpSolution {
        let res = self.residuals();
        let (relp, reld, gap, pobj_std, dobj) = self.metrics(&res);
        let d = &self.data;
        let blocks: Vec<CMat> = self
            .x
            .iter()
            .map(|x| x * C64::new(d.b_scale, 0.0))
            .collect();
        let mut scalars = vec![0.0; problem.scalars.len()];
        for (l, origin) in d.lp_origin.iter().enumerate() {
            if let LpOrigin::Scalar { index, sign } = origin {
                scalars[*index] += sign * self.s[l] * d.b_scale;
            }
        }
        let mut multipliers = vec![0.0; d.num_user_constraints];
        for (r, &k) in d.row_origin.iter().enumerate() {
            multipliers[k] = self.y[r] * d.c_scale / d.row_scale[r];
        }
        let objective = if blocks.is_empty() && scalars.is_empty() {
            pobj_std
        } else {
            problem.objective_value(&blocks, &scalars)
        };
        SdpSolution {
            status,
            blocks,
            scalars,
            objective,
            dual_objective: dobj,
            primal_residual: relp,
            dual_residual: reld,
            relative_gap: gap,
            multipliers,
            iterations: self.iterations,
        }
    }
}
