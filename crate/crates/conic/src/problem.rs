use serde::{Deserialize, Serialize};

use crate::linalg::{frobenius, hermitian_defect, CMat, C64};
use crate::ConicError;

/// Handle to a PSD matrix block of a problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BlockId(pub usize);

/// Handle to a scalar variable of a problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ScalarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    /// `lhs <= rhs`
    Le,
    /// `lhs == rhs`
    Eq,
}

/// A Hermitian coefficient matrix.
///
/// The sparse form lists every stored entry explicitly (both triangles);
/// unlisted entries are zero.
#[derive(Debug, Clone, PartialEq)]
pub enum Coeff {
    Dense(CMat),
    Sparse {
        dim: usize,
        entries: Vec<(usize, usize, C64)>,
    },
}

impl Coeff {
    /// `E_pp` scaled by `value`.
    pub fn diagonal_unit(dim: usize, p: usize, value: f64) -> Self {
        Coeff::Sparse {
            dim,
            entries: vec![(p, p, C64::new(value, 0.0))],
        }
    }

    /// Identity scaled by `value`.
    pub fn scaled_identity(dim: usize, value: f64) -> Self {
        Coeff::Sparse {
            dim,
            entries: (0..dim).map(|p| (p, p, C64::new(value, 0.0))).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Coeff::Dense(m) => m.nrows(),
            Coeff::Sparse { dim, .. } => *dim,
        }
    }

    pub fn to_dense(&self) -> CMat {
        match self {
            Coeff::Dense(m) => m.clone(),
            Coeff::Sparse { dim, entries } => {
                let mut m = CMat::zeros(*dim, *dim);
                for &(p, q, v) in entries {
                    m[(p, q)] += v;
                }
                m
            }
        }
    }

    /// `Re Tr(A X)`.
    pub fn re_inner(&self, x: &CMat) -> f64 {
        match self {
            Coeff::Dense(a) => crate::linalg::re_trace_prod(a, x),
            Coeff::Sparse { entries, .. } => entries
                .iter()
                .map(|&(p, q, a)| {
                    let v = x[(q, p)];
                    a.re * v.re - a.im * v.im
                })
                .sum(),
        }
    }

    /// `out += alpha * A`.
    pub fn add_scaled_to(&self, alpha: f64, out: &mut CMat) {
        match self {
            Coeff::Dense(a) => {
                for (o, v) in out.iter_mut().zip(a.iter()) {
                    *o += v * alpha;
                }
            }
            Coeff::Sparse { entries, .. } => {
                for &(p, q, a) in entries {
                    out[(p, q)] += a * alpha;
                }
            }
        }
    }

    /// `L A R`.
    pub(crate) fn sandwich(&self, left: &CMat, right: &CMat) -> CMat {
        match self {
            Coeff::Dense(a) => left * a * right,
            Coeff::Sparse { dim, entries } => {
                let n = *dim;
                let mut out = CMat::zeros(n, n);
                for &(p, q, a) in entries {
                    for j in 0..n {
                        let r = a * right[(q, j)];
                        if r == C64::new(0.0, 0.0) {
                            continue;
                        }
                        for i in 0..n {
                            out[(i, j)] += left[(i, p)] * r;
                        }
                    }
                }
                out
            }
        }
    }

    pub fn frobenius(&self) -> f64 {
        match self {
            Coeff::Dense(a) => frobenius(a),
            Coeff::Sparse { .. } => frobenius(&self.to_dense()),
        }
    }

    pub(crate) fn scale(&mut self, factor: f64) {
        match self {
            Coeff::Dense(a) => a.iter_mut().for_each(|v| *v *= factor),
            Coeff::Sparse { entries, .. } => entries.iter_mut().for_each(|e| e.2 *= factor),
        }
    }

    fn validate(&self, expected_dim: usize, context: &str) -> Result<(), ConicError> {
        match self {
            Coeff::Dense(a) if a.nrows() != expected_dim || a.ncols() != expected_dim => {
                return Err(ConicError::DimensionMismatch {
                    context: context.to_string(),
                    expected: expected_dim,
                    found: a.nrows().max(a.ncols()),
                })
            }
            Coeff::Sparse { dim, entries } => {
                if *dim != expected_dim {
                    return Err(ConicError::DimensionMismatch {
                        context: context.to_string(),
                        expected: expected_dim,
                        found: *dim,
                    });
                }
                if let Some(&(p, q, _)) = entries.iter().find(|e| e.0 >= *dim || e.1 >= *dim) {
                    return Err(ConicError::DimensionMismatch {
                        context: format!("{context}: entry ({p}, {q})"),
                        expected: *dim,
                        found: p.max(q) + 1,
                    });
                }
            }
            _ => {}
        }
        if self
            .iter_values()
            .any(|v| !v.re.is_finite() || !v.im.is_finite())
        {
            return Err(ConicError::NonFinite(context.to_string()));
        }
        let defect = hermitian_defect(&self.to_dense());
        if defect > 1e-10 {
            return Err(ConicError::NotHermitian {
                context: context.to_string(),
                defect,
            });
        }
        Ok(())
    }

    fn iter_values(&self) -> Box<dyn Iterator<Item = C64> + '_> {
        match self {
            Coeff::Dense(a) => Box::new(a.iter().copied()),
            Coeff::Sparse { entries, .. } => Box::new(entries.iter().map(|e| e.2)),
        }
    }
}

impl From<CMat> for Coeff {
    fn from(m: CMat) -> Self {
        Coeff::Dense(m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockSpec {
    pub name: String,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarSpec {
    pub name: String,
    pub nonnegative: bool,
}

/// One linear constraint `Σ_b Re Tr(A_b X_b) + Σ_s a_s x_s (≤|=) rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub blocks: Vec<(BlockId, Coeff)>,
    pub scalars: Vec<(ScalarId, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Constraint {
    pub fn new(sense: Sense, rhs: f64) -> Self {
        Self {
            blocks: Vec::new(),
            scalars: Vec::new(),
            sense,
            rhs,
        }
    }

    pub fn block(mut self, id: BlockId, coeff: impl Into<Coeff>) -> Self {
        self.blocks.push((id, coeff.into()));
        self
    }

    pub fn scalar(mut self, id: ScalarId, weight: f64) -> Self {
        self.scalars.push((id, weight));
        self
    }
}

/// Linear objective over PSD blocks and scalars, minimized.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Objective {
    pub blocks: Vec<(BlockId, Coeff)>,
    pub scalars: Vec<(ScalarId, f64)>,
}

/// A semidefinite program over Hermitian PSD blocks and scalar variables.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SdpProblem {
    pub blocks: Vec<BlockSpec>,
    pub scalars: Vec<ScalarSpec>,
    pub objective: Objective,
    pub constraints: Vec<Constraint>,
}

impl SdpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_block(&mut self, name: impl Into<String>, dim: usize) -> BlockId {
        self.blocks.push(BlockSpec {
            name: name.into(),
            dim,
        });
        BlockId(self.blocks.len() - 1)
    }

    pub fn add_scalar(&mut self, name: impl Into<String>, nonnegative: bool) -> ScalarId {
        self.scalars.push(ScalarSpec {
            name: name.into(),
            nonnegative,
        });
        ScalarId(self.scalars.len() - 1)
    }

    pub fn set_block_objective(&mut self, id: BlockId, coeff: impl Into<Coeff>) {
        self.objective.blocks.retain(|(b, _)| *b != id);
        self.objective.blocks.push((id, coeff.into()));
    }

    pub fn set_scalar_objective(&mut self, id: ScalarId, weight: f64) {
        self.objective.scalars.retain(|(s, _)| *s != id);
        self.objective.scalars.push((id, weight));
    }

    pub fn add_constraint(&mut self, c: Constraint) {
        self.constraints.push(c);
    }

    pub fn block_dim(&self, id: BlockId) -> usize {
        self.blocks[id.0].dim
    }

    /// Structural checks: ids in range, dimensions consistent, coefficient
    /// matrices Hermitian and finite.
    pub fn validate(&self) -> Result<(), ConicError> {
        if self.blocks.is_empty() && self.scalars.is_empty() {
            return Err(ConicError::Empty);
        }
        if let Some(b) = self.blocks.iter().find(|b| b.dim == 0) {
            return Err(ConicError::DimensionMismatch {
                context: format!("block `{}`", b.name),
                expected: 1,
                found: 0,
            });
        }
        let check_block = |id: BlockId, coeff: &Coeff, ctx: &str| -> Result<(), ConicError> {
            let spec = self
                .blocks
                .get(id.0)
                .ok_or_else(|| ConicError::UnknownVariable(format!("{ctx}: block #{}", id.0)))?;
            coeff.validate(spec.dim, &format!("{ctx}: block `{}`", spec.name))
        };
        let check_scalar = |id: ScalarId, w: f64, ctx: &str| -> Result<(), ConicError> {
            if id.0 >= self.scalars.len() {
                return Err(ConicError::UnknownVariable(format!(
                    "{ctx}: scalar #{}",
                    id.0
                )));
            }
            if !w.is_finite() {
                return Err(ConicError::NonFinite(format!("{ctx}: scalar #{}", id.0)));
            }
            Ok(())
        };
        for (id, coeff) in &self.objective.blocks {
            check_block(*id, coeff, "objective")?;
        }
        for &(id, w) in &self.objective.scalars {
            check_scalar(id, w, "objective")?;
        }
        for (k, c) in self.constraints.iter().enumerate() {
            let ctx = format!("constraint {k}");
            for (id, coeff) in &c.blocks {
                check_block(*id, coeff, &ctx)?;
            }
            for &(id, w) in &c.scalars {
                check_scalar(id, w, &ctx)?;
            }
            if !c.rhs.is_finite() {
                return Err(ConicError::NonFinite(format!("{ctx}: rhs")));
            }
        }
        Ok(())
    }

    /// Objective value at a given point.
    pub fn objective_value(&self, blocks: &[CMat], scalars: &[f64]) -> f64 {
        let b: f64 = self
            .objective
            .blocks
            .iter()
            .map(|(id, c)| c.re_inner(&blocks[id.0]))
            .sum();
        let s: f64 = self
            .objective
            .scalars
            .iter()
            .map(|&(id, w)| w * scalars[id.0])
            .sum();
        b + s
    }

    /// Left-hand side of constraint `k` at a given point.
    pub fn constraint_lhs(&self, k: usize, blocks: &[CMat], scalars: &[f64]) -> f64 {
        let c = &self.constraints[k];
        let b: f64 = c
            .blocks
            .iter()
            .map(|(id, a)| a.re_inner(&blocks[id.0]))
            .sum();
        let s: f64 = c.scalars.iter().map(|&(id, w)| w * scalars[id.0]).sum();
        b + s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sparse_and_dense_agree() {
        let n = 3;
        let sparse = Coeff::Sparse {
            dim: n,
            entries: vec![
                (0, 2, C64::new(1.0, 2.0)),
                (2, 0, C64::new(1.0, -2.0)),
                (1, 1, C64::new(-3.0, 0.0)),
            ],
        };
        let dense = Coeff::Dense(sparse.to_dense());
        let x = CMat::from_fn(n, n, |i, j| {
            C64::new((i + 2 * j) as f64, i as f64 - j as f64)
        });
        let r = CMat::from_fn(n, n, |i, j| {
            C64::new(1.0 / (1 + i + j) as f64, 0.3 * j as f64)
        });
        assert!((sparse.re_inner(&x) - dense.re_inner(&x)).abs() < 1e-12);
        let diff = sparse.sandwich(&x, &r) - dense.sandwich(&x, &r);
        assert!(frobenius(&diff) < 1e-12);
    }

    #[test]
    fn rejects_non_hermitian_coefficients() {
        let mut p = SdpProblem::new();
        let b = p.add_block("X", 2);
        let mut a = CMat::identity(2, 2);
        a[(0, 1)] = C64::new(1.0, 0.0);
        p.set_block_objective(b, a);
        assert!(matches!(p.validate(), Err(ConicError::NotHermitian { .. })));
    }

    #[test]
    fn rejects_dimension_mismatch() {
        let mut p = SdpProblem::new();
        let b = p.add_block("X", 2);
        p.add_constraint(Constraint::new(Sense::Eq, 1.0).block(b, CMat::identity(3, 3)));
        assert!(matches!(
            p.validate(),
            Err(ConicError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn rejects_empty_problem() {
        assert!(matches!(
            SdpProblem::new().validate(),
            Err(ConicError::Empty)
        ));
    }
}
