//! JSON serialization of a QP and optionally its solution, for debugging and
//! regression fixtures. Infinite bounds are written as `null`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::admm::QpSolution;
use super::problem::{QuadraticProgram, RowKind};
use super::sparse::CsrMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QpDump {
    pub n: usize,
    /// (row, col, value) of the full symmetric P.
    pub p: Vec<(usize, usize, f64)>,
    pub q: Vec<f64>,
    pub a: Vec<(usize, usize, f64)>,
    pub l: Vec<Option<f64>>,
    pub u: Vec<Option<f64>>,
    pub kinds: Vec<RowKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<Vec<f64>>,
}

fn triplets(m: &CsrMatrix) -> Vec<(usize, usize, f64)> {
    (0..m.nrows)
        .flat_map(|r| {
            let (idx, val) = m.row(r);
            idx.iter().zip(val).map(move |(&c, &v)| (r, c, v)).collect::<Vec<_>>()
        })
        .collect()
}

impl QpDump {
    pub fn new(qp: &QuadraticProgram, solution: Option<&QpSolution>) -> Self {
        let finite = |v: &f64| v.is_finite().then_some(*v);
        QpDump {
            n: qp.n,
            p: triplets(&qp.p),
            q: qp.q.clone(),
            a: triplets(&qp.a),
            l: qp.l.iter().map(finite).collect(),
            u: qp.u.iter().map(finite).collect(),
            kinds: qp.kinds.clone(),
            x: solution.map(|s| s.x.clone()),
            y: solution.map(|s| s.y.clone()),
        }
    }

    pub fn to_problem(&self) -> Result<QuadraticProgram> {
        let m = self.l.len();
        if self.u.len() != m || self.kinds.len() != m || self.q.len() != self.n {
            return Err(Error::Dimension("inconsistent QP dump".into()));
        }
        let oob = |t: &[(usize, usize, f64)], rows: usize| t.iter().any(|&(r, c, _)| r >= rows || c >= self.n);
        if oob(&self.p, self.n) || oob(&self.a, m) {
            return Err(Error::Dimension("QP dump entry out of range".into()));
        }
        Ok(QuadraticProgram {
            n: self.n,
            p: CsrMatrix::from_triplets(self.n, self.n, self.p.clone()),
            q: self.q.clone(),
            a: CsrMatrix::from_triplets(m, self.n, self.a.clone()),
            l: self.l.iter().map(|v| v.unwrap_or(f64::NEG_INFINITY)).collect(),
            u: self.u.iter().map(|v| v.unwrap_or(f64::INFINITY)).collect(),
            kinds: self.kinds.clone(),
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}
