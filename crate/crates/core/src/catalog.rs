//! Built-in benchmark geometries and scenario validation.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::{AlgebraError, LieAlgebraSpec};
use crate::geometry::{dj_bundle, levi_civita, nijenhuis, omega_derivatives};
use crate::hermitian::{j_from_images, standard_j, AlmostHermitianPair, PairError};
use crate::tensor::{frame_norm, TensorError};

/// Tolerance for the class claims checked at load time.
pub const CLASS_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpectedClass {
    Kahler,
    AlmostKahler,
    HermitianPluriclosed,
    Generic,
}

impl ExpectedClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExpectedClass::Kahler => "kahler",
            ExpectedClass::AlmostKahler => "almost_kahler",
            ExpectedClass::HermitianPluriclosed => "hermitian_pluriclosed",
            ExpectedClass::Generic => "generic",
        }
    }

    fn needs_closed(&self) -> bool {
        matches!(self, ExpectedClass::Kahler | ExpectedClass::AlmostKahler)
    }

    fn needs_integrable(&self) -> bool {
        matches!(self, ExpectedClass::Kahler | ExpectedClass::HermitianPluriclosed)
    }
}

impl fmt::Display for ExpectedClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExpectedClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "kahler" => Ok(ExpectedClass::Kahler),
            "almost_kahler" => Ok(ExpectedClass::AlmostKahler),
            "hermitian_pluriclosed" => Ok(ExpectedClass::HermitianPluriclosed),
            "generic" => Ok(ExpectedClass::Generic),
            other => Err(format!("unknown class '{other}'")),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("JACOBI: {0}")]
    Algebra(#[from] AlgebraError),
    #[error("{}: {0}", pair_code(.0))]
    Pair(#[from] PairError),
    #[error("CLASS_MISMATCH: class {class} requires |{quantity}| <= {CLASS_TOL:e}, got {value:e}")]
    ClassMismatch {
        class: ExpectedClass,
        quantity: &'static str,
        value: f64,
    },
    #[error("DIMENSION: algebra has dimension {algebra}, pair has dimension {pair}")]
    Dimension { algebra: usize, pair: usize },
    #[error("UNKNOWN_SCENARIO: '{name}'; available: {}", .available.join(", "))]
    Unknown { name: String, available: Vec<String> },
}

fn pair_code(e: &PairError) -> &'static str {
    match e {
        PairError::JSquared { .. } => "J_SQUARED",
        PairError::Incompatible { .. } => "INCOMPATIBLE",
        PairError::Metric(TensorError::NotPositiveDefinite) => "NOT_SPD",
        PairError::Metric(_) | PairError::Shape { .. } => "METRIC",
    }
}

impl ScenarioError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            ScenarioError::Algebra(AlgebraError::Jacobi(_)) => "JACOBI",
            ScenarioError::Algebra(_) => "ALGEBRA",
            ScenarioError::Pair(p) => pair_code(p),
            ScenarioError::ClassMismatch { .. } => "CLASS_MISMATCH",
            ScenarioError::Dimension { .. } => "DIMENSION",
            ScenarioError::Unknown { .. } => "UNKNOWN_SCENARIO",
        }
    }
}

/// Initial data for a flow run.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub label: String,
    pub algebra: LieAlgebraSpec,
    pub pair: AlmostHermitianPair,
    pub expected_class: ExpectedClass,
}

impl Scenario {
    /// Validate and build; checks the class claim against `|d omega|` and `|N|`.
    pub fn new(
        label: impl Into<String>,
        algebra: LieAlgebraSpec,
        g0: DMatrix<f64>,
        j0: DMatrix<f64>,
        expected_class: ExpectedClass,
    ) -> Result<Self, ScenarioError> {
        if g0.nrows() != algebra.dim() {
            return Err(ScenarioError::Dimension {
                algebra: algebra.dim(),
                pair: g0.nrows(),
            });
        }
        let pair = AlmostHermitianPair::new(g0, j0)?;
        let s = Scenario {
            label: label.into(),
            algebra,
            pair,
            expected_class,
        };
        let (d_omega, n) = s.structure_norms();
        if expected_class.needs_closed() && !(d_omega <= CLASS_TOL) {
            return Err(ScenarioError::ClassMismatch {
                class: expected_class,
                quantity: "d omega",
                value: d_omega,
            });
        }
        if expected_class.needs_integrable() && !(n <= CLASS_TOL) {
            return Err(ScenarioError::ClassMismatch {
                class: expected_class,
                quantity: "N",
                value: n,
            });
        }
        Ok(s)
    }

    /// `(|d omega|, |N|)` at the initial data.
    pub fn structure_norms(&self) -> (f64, f64) {
        let m = self.pair.metric();
        let conn = levi_civita(&self.algebra, m);
        let dj = dj_bundle(&self.pair, &conn, 1);
        let od = omega_derivatives(&self.pair, &self.algebra, dj.dj());
        let nj = nijenhuis(&self.pair, &self.algebra);
        (frame_norm(&od.d_omega, m), frame_norm(&nj.low, m))
    }
}

type Builder = fn() -> Scenario;

const BUILTINS: &[(&str, Builder)] = &[
    ("flat_torus_4", flat_torus_4),
    ("kodaira_thurston", kodaira_thurston),
    ("hopf_s3s1", hopf_s3s1),
];

pub fn builtin_names() -> Vec<&'static str> {
    BUILTINS.iter().map(|(n, _)| *n).collect()
}

pub fn builtin(name: &str) -> Result<Scenario, ScenarioError> {
    BUILTINS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, b)| b())
        .ok_or_else(|| ScenarioError::Unknown {
            name: name.to_string(),
            available: builtin_names().into_iter().map(String::from).collect(),
        })
}

fn flat_torus_4() -> Scenario {
    Scenario::new(
        "flat_torus_4",
        LieAlgebraSpec::abelian(4),
        DMatrix::identity(4, 4),
        standard_j(4),
        ExpectedClass::Kahler,
    )
    .expect("builtin is valid")
}

/// Heisenberg times a line with `J e1 = e3`, `J e2 = e4`.
fn kodaira_thurston() -> Scenario {
    let j = j_from_images(&[
        vec![0.0, 0.0, 1.0, 0.0],
        vec![0.0, 0.0, 0.0, 1.0],
        vec![-1.0, 0.0, 0.0, 0.0],
        vec![0.0, -1.0, 0.0, 0.0],
    ]);
    Scenario::new(
        "kodaira_thurston",
        LieAlgebraSpec::heisenberg_r(),
        DMatrix::identity(4, 4),
        j,
        ExpectedClass::AlmostKahler,
    )
    .expect("builtin is valid")
}

/// `su(2) + R` with `J e1 = e2`, `J e3 = e4`.
fn hopf_s3s1() -> Scenario {
    Scenario::new(
        "hopf_s3s1",
        LieAlgebraSpec::su2_r(),
        DMatrix::identity(4, 4),
        standard_j(4),
        ExpectedClass::HermitianPluriclosed,
    )
    .expect("builtin is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_load_with_tight_class_residuals() {
        for name in builtin_names() {
            let s = builtin(name).unwrap();
            let (d_omega, n) = s.structure_norms();
            match name {
                "flat_torus_4" => assert!(d_omega <= 1e-13 && n <= 1e-13),
                "kodaira_thurston" => {
                    assert!(d_omega <= 1e-13);
                    assert!(n > 1.0);
                }
                "hopf_s3s1" => {
                    assert!(n <= 1e-13);
                    assert!(d_omega > 1.0);
                }
                _ => unreachable!(),
            }
        }
    }

    #[test]
    fn unknown_builtin_lists_names() {
        let err = builtin("iwasawa").unwrap_err();
        assert_eq!(err.code(), "UNKNOWN_SCENARIO");
        let msg = err.to_string();
        for n in builtin_names() {
            assert!(msg.contains(n), "{msg}");
        }
    }

    #[test]
    fn class_claim_is_checked() {
        let err = Scenario::new(
            "bad",
            LieAlgebraSpec::su2_r(),
            DMatrix::identity(4, 4),
            standard_j(4),
            ExpectedClass::Kahler,
        )
        .unwrap_err();
        assert_eq!(err.code(), "CLASS_MISMATCH");
    }

    #[test]
    fn class_names_round_trip() {
        for c in [
            ExpectedClass::Kahler,
            ExpectedClass::AlmostKahler,
            ExpectedClass::HermitianPluriclosed,
            ExpectedClass::Generic,
        ] {
            assert_eq!(c.as_str().parse::<ExpectedClass>().unwrap(), c);
        }
    }
}
