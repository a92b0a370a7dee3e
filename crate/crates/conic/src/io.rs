//! Self-describing JSON layout for problems, used for debugging and for
//! cross-checking against external solvers.
//!
//! Coefficient matrices are stored dense, row-major, as `[re, im]` pairs.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::linalg::{CMat, C64};
use crate::problem::{
    BlockId, BlockSpec, Coeff, Constraint, Objective, ScalarId, ScalarSpec, SdpProblem, Sense,
};
use crate::ConicError;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MatrixTerm {
    block: usize,
    dim: usize,
    data: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ScalarTerm {
    scalar: usize,
    weight: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ObjectiveFile {
    blocks: Vec<MatrixTerm>,
    scalars: Vec<ScalarTerm>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ConstraintFile {
    sense: Sense,
    rhs: f64,
    blocks: Vec<MatrixTerm>,
    scalars: Vec<ScalarTerm>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ProblemFile {
    format: String,
    blocks: Vec<BlockSpec>,
    scalars: Vec<ScalarSpec>,
    objective: ObjectiveFile,
    constraints: Vec<ConstraintFile>,
}

const FORMAT_TAG: &str = "hermitian-sdp/1";

fn term(id: BlockId, coeff: &Coeff) -> MatrixTerm {
    let m = coeff.to_dense();
    let n = m.nrows();
    let mut data = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let v = m[(i, j)];
            data.push([v.re, v.im]);
        }
    }
    MatrixTerm {
        block: id.0,
        dim: n,
        data,
    }
}

fn untangle(t: &MatrixTerm) -> Result<(BlockId, Coeff), ConicError> {
    if t.data.len() != t.dim * t.dim {
        return Err(ConicError::DimensionMismatch {
            context: format!("serialized matrix for block #{}", t.block),
            expected: t.dim * t.dim,
            found: t.data.len(),
        });
    }
    let m = CMat::from_fn(t.dim, t.dim, |i, j| {
        let [re, im] = t.data[i * t.dim + j];
        C64::new(re, im)
    });
    Ok((BlockId(t.block), Coeff::Dense(m)))
}

pub fn to_json(problem: &SdpProblem) -> Result<String, ConicError> {
    let file = ProblemFile {
        format: FORMAT_TAG.to_string(),
        blocks: problem.blocks.clone(),
        scalars: problem.scalars.clone(),
        objective: ObjectiveFile {
            blocks: problem
                .objective
                .blocks
                .iter()
                .map(|(id, c)| term(*id, c))
                .collect(),
            scalars: problem
                .objective
                .scalars
                .iter()
                .map(|&(id, w)| ScalarTerm {
                    scalar: id.0,
                    weight: w,
                })
                .collect(),
        },
        constraints: problem
            .constraints
            .iter()
            .map(|c| ConstraintFile {
                sense: c.sense,
                rhs: c.rhs,
                blocks: c.blocks.iter().map(|(id, a)| term(*id, a)).collect(),
                scalars: c
                    .scalars
                    .iter()
                    .map(|&(id, w)| ScalarTerm {
                        scalar: id.0,
                        weight: w,
                    })
                    .collect(),
            })
            .collect(),
    };
    Ok(serde_json::to_string_pretty(&file)?)
}

pub fn from_json(text: &str) -> Result<SdpProblem, ConicError> {
    let file: ProblemFile = serde_json::from_str(text)?;
    if file.format != FORMAT_TAG {
        return Err(ConicError::Format(format!(
            "unknown format tag `{}` (expected `{FORMAT_TAG}`)",
            file.format
        )));
    }
    let mut objective = Objective::default();
    for t in &file.objective.blocks {
        objective.blocks.push(untangle(t)?);
    }
    objective.scalars = file
        .objective
        .scalars
        .iter()
        .map(|s| (ScalarId(s.scalar), s.weight))
        .collect();
    let mut constraints = Vec::with_capacity(file.constraints.len());
    for c in &file.constraints {
        let mut out = Constraint::new(c.sense, c.rhs);
        for t in &c.blocks {
            out.blocks.push(untangle(t)?);
        }
        out.scalars = c
            .scalars
            .iter()
            .map(|s| (ScalarId(s.scalar), s.weight))
            .collect();
        constraints.push(out);
    }
    let problem = SdpProblem {
        blocks: file.blocks,
        scalars: file.scalars,
        objective,
        constraints,
    };
    problem.validate()?;
    Ok(problem)
}

pub fn dump(problem: &SdpProblem, path: &Path) -> Result<(), ConicError> {
    std::fs::write(path, to_json(problem)?).map_err(|e| ConicError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

pub fn load(path: &Path) -> Result<SdpProblem, ConicError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConicError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    from_json(&text)
}
