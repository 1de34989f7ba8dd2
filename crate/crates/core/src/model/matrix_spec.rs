use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A p×p matrix as written in a config file.
///
/// Accepted forms: `"identity"`, `"scaled_identity: 0.3"`,
/// `{ scaled_identity = 0.3 }`, or an explicit row-major list of rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixSpec {
    Named(String),
    Scaled { scaled_identity: f64 },
    Explicit(Vec<Vec<f64>>),
}

impl MatrixSpec {
    pub fn identity() -> Self {
        MatrixSpec::Named("identity".into())
    }

    pub fn scaled(s: f64) -> Self {
        MatrixSpec::Scaled { scaled_identity: s }
    }

    pub fn to_matrix(&self, p: usize) -> Result<DMatrix<f64>> {
        match self {
            MatrixSpec::Named(name) => {
                let name = name.trim();
                if name == "identity" {
                    return Ok(DMatrix::identity(p, p));
                }
                if let Some(rest) = name.strip_prefix("scaled_identity") {
                    let rest = rest.trim_start().trim_start_matches(':').trim();
                    let s: f64 = rest
                        .parse()
                        .map_err(|_| Error::domain(format!("bad scale in matrix spec {name:?}")))?;
                    return Ok(DMatrix::identity(p, p) * s);
                }
                Err(Error::domain(format!("unknown matrix spec {name:?}")))
            }
            MatrixSpec::Scaled { scaled_identity } => Ok(DMatrix::identity(p, p) * *scaled_identity),
            MatrixSpec::Explicit(rows) => {
                if rows.len() != p || rows.iter().any(|r| r.len() != p) {
                    return Err(Error::Dimension(format!("explicit matrix is not {p}x{p}")));
                }
                Ok(DMatrix::from_fn(p, p, |i, j| rows[i][j]))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forms() {
        assert_eq!(MatrixSpec::identity().to_matrix(2).unwrap(), DMatrix::identity(2, 2));
        let m = MatrixSpec::Named("scaled_identity: 0.5".into()).to_matrix(3).unwrap();
        assert_eq!(m, DMatrix::identity(3, 3) * 0.5);
        assert_eq!(MatrixSpec::scaled(0.5).to_matrix(3).unwrap(), m);
        let e = MatrixSpec::Explicit(vec![vec![1.0, 2.0], vec![3.0, 4.0]]).to_matrix(2).unwrap();
        assert_eq!(e[(0, 1)], 2.0);
        assert_eq!(e[(1, 0)], 3.0);
        assert!(MatrixSpec::Named("diag".into()).to_matrix(2).is_err());
        assert!(MatrixSpec::Explicit(vec![vec![1.0]]).to_matrix(2).is_err());
    }
}
