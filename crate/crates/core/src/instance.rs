//! JSON problem instances shared by interpolation and regularization.
//!
//! ```json
//! {
//!   "space": "lp",
//!   "p": 3.0,
//!   "rows": [[[0, 1.0], [2, 0.5]], [[1, 1.0]]],
//!   "y": [1.0, -0.5],
//!   "loss": {"kind": "eps_insensitive", "eps": 0.1},
//!   "regularizer": {"kind": "square"},
//!   "lambda": 0.3,
//!   "config": {"tol": 1e-10, "max_iter": 50000}
//! }
//! ```
//!
//! `space` is `"hilbert"`, `"lp"` (with `p`) or `"l1"`. Rows are sparse
//! sequences written as `[index, value]` pairs. An instance with both
//! `loss` and `lambda` is a regularization problem, one with neither is an
//! interpolation problem; exactly one of them is a schema error. The
//! regularizer defaults to `t` in l1 and `t^2` elsewhere. `config`
//! overrides fields of [`IterationConfig`].

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{mismatch, Error, Result};
use crate::mni::IterationConfig;
use crate::prox::{LossKind, LossSpec};
use crate::reg::{RegProblem, Regularizer};
use crate::sampling::SamplingOperator;
use crate::seq::{SpaceTag, SparseSeq};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum SpaceName {
    Hilbert,
    Lp,
    L1,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInstance {
    space: SpaceName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    p: Option<f64>,
    rows: Vec<SparseSeq>,
    y: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    loss: Option<LossKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    regularizer: Option<Regularizer>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    config: Option<IterationConfig>,
}

/// What to solve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Mode {
    Interpolation,
    Regularization {
        loss: LossKind,
        regularizer: Regularizer,
        lambda: f64,
    },
}

/// A validated problem instance.
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemInstance {
    pub space: SpaceTag,
    pub op: SamplingOperator,
    pub y: Vec<f64>,
    pub mode: Mode,
    pub config: Option<IterationConfig>,
}

fn schema(path: &str, message: impl Into<String>) -> Error {
    Error::Schema {
        path: path.into(),
        message: message.into(),
    }
}

fn default_regularizer(space: SpaceTag) -> Regularizer {
    match space {
        SpaceTag::L1 => Regularizer::Identity,
        _ => Regularizer::Square,
    }
}

impl ProblemInstance {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let raw: RawInstance = serde_path_to_error::deserialize(de).map_err(|err| {
            let path = err.path().to_string();
            let inner = err.into_inner();
            if inner.is_data() {
                schema(&path, inner.to_string())
            } else {
                Error::Parse(inner.to_string())
            }
        })?;
        Self::from_raw(raw)
    }

    fn from_raw(raw: RawInstance) -> Result<Self> {
        let space = match (raw.space, raw.p) {
            (SpaceName::Lp, Some(p)) => SpaceTag::Lp(p),
            (SpaceName::Lp, None) => return Err(schema("p", "space \"lp\" needs an exponent p")),
            (_, Some(_)) => return Err(schema("p", "an exponent is only allowed with space \"lp\"")),
            (SpaceName::Hilbert, None) => SpaceTag::Hilbert,
            (SpaceName::L1, None) => SpaceTag::L1,
        };
        space.validate()?;
        if raw.rows.is_empty() {
            return Err(schema("rows", "at least one functional is required"));
        }
        let op = SamplingOperator::new(raw.rows)?;
        if raw.y.len() != op.m() {
            return Err(mismatch(op.m(), raw.y.len(), "y vs rows"));
        }
        op.check_data(&raw.y)?;
        let mode = match (raw.loss, raw.lambda) {
            (Some(loss), Some(lambda)) => {
                let regularizer = raw.regularizer.unwrap_or_else(|| default_regularizer(space));
                RegProblem::new(
                    op.clone(),
                    space,
                    LossSpec::new(loss, raw.y.clone())?,
                    regularizer,
                    lambda,
                )?;
                Mode::Regularization {
                    loss,
                    regularizer,
                    lambda,
                }
            }
            (None, None) if raw.regularizer.is_none() => Mode::Interpolation,
            (None, None) => return Err(schema("regularizer", "a regularizer needs loss and lambda")),
            (Some(_), None) => return Err(schema("lambda", "a loss needs lambda")),
            (None, Some(_)) => return Err(schema("loss", "lambda needs a loss")),
        };
        if let Some(cfg) = &raw.config {
            cfg.validate()?;
        }
        Ok(ProblemInstance {
            space,
            op,
            y: raw.y,
            mode,
            config: raw.config,
        })
    }

    fn to_raw(&self) -> RawInstance {
        let (space, p) = match self.space {
            SpaceTag::Hilbert => (SpaceName::Hilbert, None),
            SpaceTag::Lp(p) => (SpaceName::Lp, Some(p)),
            SpaceTag::L1 => (SpaceName::L1, None),
        };
        let (loss, regularizer, lambda) = match self.mode {
            Mode::Interpolation => (None, None, None),
            Mode::Regularization {
                loss,
                regularizer,
                lambda,
            } => (Some(loss), Some(regularizer), Some(lambda)),
        };
        RawInstance {
            space,
            p,
            rows: self.op.rows().to_vec(),
            y: self.y.clone(),
            loss,
            regularizer,
            lambda,
            config: self.config,
        }
    }

    pub fn to_json_string(&self) -> Result<String> {
        serde_json::to_string_pretty(&self.to_raw()).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Solver settings: the instance overrides on top of the defaults.
    pub fn iteration_config(&self) -> IterationConfig {
        self.config.unwrap_or_default()
    }

    /// The regularization problem, if this instance describes one.
    pub fn reg_problem(&self) -> Result<RegProblem> {
        match self.mode {
            Mode::Regularization {
                loss,
                regularizer,
                lambda,
            } => RegProblem::new(
                self.op.clone(),
                self.space,
                LossSpec::new(loss, self.y.clone())?,
                regularizer,
                lambda,
            ),
            Mode::Interpolation => Err(Error::InvalidParameter("instance has no loss and lambda".into())),
        }
    }
}

/// Reads and validates an instance file.
pub fn load_problem(path: impl AsRef<Path>) -> Result<ProblemInstance> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    ProblemInstance::from_json_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_interpolation_instance() {
        let inst = ProblemInstance::from_json_str(r#"{"space": "l1", "rows": [[[0, 1.0]]], "y": [1.0]}"#).unwrap();
        assert_eq!(inst.mode, Mode::Interpolation);
        assert_eq!(inst.space, SpaceTag::L1);
        assert_eq!(inst.op.m(), 1);
    }

    #[test]
    fn error_kinds_are_distinct() {
        let e = ProblemInstance::from_json_str(r#"{"space": "l1", "rows": [[[0, 1.0]]], "y": [1.0, 2.0]}"#);
        assert!(matches!(e, Err(Error::DimensionMismatch { .. })));

        let e = ProblemInstance::from_json_str(r#"{"space": "lp", "p": 1.0, "rows": [[[0, 1.0]]], "y": [1.0]}"#);
        assert!(matches!(e, Err(Error::InvalidParameter(_))));

        let e = ProblemInstance::from_json_str(r#"{"space": "l1", "rows": [[[0, 1.0]]], "y": [1.0"#);
        assert!(matches!(e, Err(Error::Parse(_))));

        let e = ProblemInstance::from_json_str(r#"{"space": "l1", "rows": [[[0, 1.0]], [[0, "x"]]], "y": [1.0, 2.0]}"#);
        match e {
            Err(Error::Schema { path, .. }) => assert!(path.starts_with("rows[1]"), "{path}"),
            other => panic!("{other:?}"),
        }

        let e = ProblemInstance::from_json_str(r#"{"space": "l1", "rows": [[[0, 1.0], [0, 2.0]]], "y": [1.0]}"#);
        assert!(matches!(e, Err(Error::Schema { .. })));

        let e = ProblemInstance::from_json_str(r#"{"space": "l1", "rows": [[[0, 1.0]]], "y": [1.0], "lambda": 1.0}"#);
        assert!(matches!(e, Err(Error::Schema { ref path, .. }) if path == "loss"));

        let e = ProblemInstance::from_json_str(r#"{"space": "lp", "rows": [[[0, 1.0]]], "y": [1.0]}"#);
        assert!(matches!(e, Err(Error::Schema { ref path, .. }) if path == "p"));

        let e = ProblemInstance::from_json_str(r#"{"space": "l2", "rows": [[[0, 1.0]]], "y": [1.0]}"#);
        assert!(matches!(e, Err(Error::Schema { ref path, .. }) if path == "space"));
    }

    #[test]
    fn regularization_instance_round_trips() {
        let text = r#"{"space": "lp", "p": 3.0, "rows": [[[0, 1.0], [2, 0.5]], [[1, 1.0]]], "y": [1.0, -1.0],
                       "loss": {"kind": "hinge"}, "lambda": 0.25, "config": {"tol": 1e-10}}"#;
        let inst = ProblemInstance::from_json_str(text).unwrap();
        assert!(matches!(
            inst.mode,
            Mode::Regularization {
                regularizer: Regularizer::Square,
                ..
            }
        ));
        assert_eq!(inst.iteration_config().tol, 1e-10);
        assert_eq!(inst.iteration_config().max_iter, IterationConfig::default().max_iter);
        let back = ProblemInstance::from_json_str(&inst.to_json_string().unwrap()).unwrap();
        assert_eq!(back, inst);
    }

    #[test]
    fn hinge_labels_validated() {
        let e = ProblemInstance::from_json_str(
            r#"{"space": "l1", "rows": [[[0, 1.0]]], "y": [0.5], "loss": {"kind": "hinge"}, "lambda": 1.0}"#,
        );
        assert!(matches!(e, Err(Error::InvalidParameter(_))));
    }
}
