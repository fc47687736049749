//! Accuracies, confusion matrices and confidence intervals.

mod confusion;
mod report;

pub use confusion::{confusion, ConfusionMatrix};
pub use report::{render_report, ReportRow};

use serde::{Deserialize, Serialize};
use tch::{Kind, Tensor};

use crate::dataset::{decode_joint_label, Action, TensorSet, Tool};
use crate::error::{Error, Result};
use crate::model::{HeadKind, HeadMode, Logits, Model, ModelConfig};

/// z multiplier of a two-sided 95% normal interval.
pub const Z_95: f64 = 1.96;

/// Argmax decisions of a model, with ground truth. Joint-16 outputs are
/// decoded into a tool and an action decision.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Predictions {
    pub tool: Option<Vec<usize>>,
    pub action: Option<Vec<usize>>,
    pub truth: Vec<(Tool, Action)>,
}

fn argmax(t: &Tensor) -> Result<Vec<usize>> {
    let idx = Vec::<i64>::try_from(t.argmax(-1, false).to_kind(Kind::Int64))?;
    Ok(idx.into_iter().map(|i| i as usize).collect())
}

impl Predictions {
    pub fn len(&self) -> usize {
        self.truth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.truth.is_empty()
    }

    /// Appends the decisions encoded by one batch of logits.
    pub fn extend_from_logits(&mut self, logits: &Logits, head: HeadMode, truth: &[(Tool, Action)]) -> Result<()> {
        let mut tool = None;
        let mut action = None;
        for &kind in head.heads() {
            let t = logits
                .get(kind)
                .ok_or_else(|| Error::Eval(format!("missing {} logits", kind.name())))?;
            let decided = argmax(t)?;
            match kind {
                HeadKind::Tool => tool = Some(decided),
                HeadKind::Action => action = Some(decided),
                HeadKind::Joint => {
                    let (ts, as_): (Vec<_>, Vec<_>) = decided
                        .iter()
                        .map(|&j| {
                            let (t, a) = decode_joint_label(j).expect("16-way argmax");
                            (t.code(), a.code())
                        })
                        .unzip();
                    tool = Some(ts);
                    action = Some(as_);
                }
            }
        }
        append(&mut self.tool, tool, self.truth.len())?;
        append(&mut self.action, action, self.truth.len())?;
        self.truth.extend_from_slice(truth);
        Ok(())
    }

    fn correct(&self, i: usize) -> (Option<bool>, Option<bool>) {
        let (t, a) = self.truth[i];
        (
            self.tool.as_ref().map(|p| p[i] == t.code()),
            self.action.as_ref().map(|p| p[i] == a.code()),
        )
    }
}

fn append(dst: &mut Option<Vec<usize>>, src: Option<Vec<usize>>, existing: usize) -> Result<()> {
    match (dst.as_mut(), src) {
        (Some(d), Some(s)) => d.extend(s),
        (None, Some(s)) if existing == 0 => *dst = Some(s),
        (None, None) => {}
        _ => return Err(Error::Eval("head layout changed between batches".into())),
    }
    Ok(())
}

/// Per-class precision and recall.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub precision: f64,
    pub recall: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadReport {
    pub accuracy: f64,
    pub classes: Vec<ClassStats>,
    pub confusion: ConfusionMatrix,
}

impl HeadReport {
    fn new(pred: &[usize], truth: &[usize]) -> Result<HeadReport> {
        let confusion = confusion(pred, truth, Tool::COUNT, true)?;
        Ok(HeadReport {
            accuracy: confusion.accuracy(),
            classes: confusion.class_stats(),
            confusion,
        })
    }
}

/// Scores of one evaluation pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: ModelConfig,
    pub samples: usize,
    pub tool: Option<HeadReport>,
    pub action: Option<HeadReport>,
    /// Fraction of samples on which every head present is right.
    pub joint_accuracy: f64,
    /// 16×16 confusion over (tool, action) pairs when both are predicted.
    pub joint_confusion: Option<ConfusionMatrix>,
}

impl EvalReport {
    pub fn tool_accuracy(&self) -> Option<f64> {
        self.tool.as_ref().map(|h| h.accuracy)
    }

    pub fn action_accuracy(&self) -> Option<f64> {
        self.action.as_ref().map(|h| h.accuracy)
    }

    /// The accuracy used for model selection and headline reporting.
    pub fn headline(&self) -> f64 {
        self.joint_accuracy
    }
}

/// Accuracies, per-class statistics and confusion matrices for `pred`.
pub fn score(model: ModelConfig, pred: &Predictions) -> Result<EvalReport> {
    if pred.is_empty() {
        return Err(Error::Eval("nothing to evaluate".into()));
    }
    if pred.tool.is_none() && pred.action.is_none() {
        return Err(Error::Eval("no head predictions".into()));
    }
    let tool_truth: Vec<usize> = pred.truth.iter().map(|(t, _)| t.code()).collect();
    let action_truth: Vec<usize> = pred.truth.iter().map(|(_, a)| a.code()).collect();
    let tool = pred
        .tool
        .as_deref()
        .map(|p| HeadReport::new(p, &tool_truth))
        .transpose()?;
    let action = pred
        .action
        .as_deref()
        .map(|p| HeadReport::new(p, &action_truth))
        .transpose()?;
    let joint_correct = (0..pred.len())
        .filter(|&i| {
            let (t, a) = pred.correct(i);
            t.unwrap_or(true) && a.unwrap_or(true)
        })
        .count();
    let joint_confusion = match (&pred.tool, &pred.action) {
        (Some(t), Some(a)) => {
            let p: Vec<usize> = t.iter().zip(a).map(|(t, a)| t * 4 + a).collect();
            let y: Vec<usize> = tool_truth.iter().zip(&action_truth).map(|(t, a)| t * 4 + a).collect();
            Some(confusion(&p, &y, 16, true)?)
        }
        _ => None,
    };
    Ok(EvalReport {
        model,
        samples: pred.len(),
        tool,
        action,
        joint_accuracy: joint_correct as f64 / pred.len() as f64,
        joint_confusion,
    })
}

const EVAL_BATCH: usize = 64;

/// Runs `model` in inference mode over every sample of `set`.
pub fn predict(model: &Model, set: &TensorSet) -> Result<Predictions> {
    predict_indices(model, set, &(0..set.len()).collect::<Vec<_>>())
}

pub fn predict_indices(model: &Model, set: &TensorSet, indices: &[usize]) -> Result<Predictions> {
    let cfg = *model.config();
    let mut out = Predictions::default();
    tch::no_grad(|| {
        for chunk in indices.chunks(EVAL_BATCH) {
            let batch = set.batch(chunk, cfg.variant, cfg.head)?;
            let logits = model.forward(&batch, false)?;
            let truth: Vec<(Tool, Action)> = chunk.iter().map(|&i| set.pairs()[i]).collect();
            out.extend_from_logits(&logits, cfg.head, &truth)?;
        }
        Ok(out)
    })
}

/// Evaluates `model` on `set`; an empty set is an error.
pub fn evaluate(model: &Model, set: &TensorSet) -> Result<EvalReport> {
    if set.is_empty() {
        return Err(Error::Eval("empty evaluation set".into()));
    }
    score(*model.config(), &predict(model, set)?)
}

/// Mean and normal-approximation half-width `z·s/√n`, with `s` the sample
/// standard deviation.
pub fn confidence_interval_z(values: &[f64], z: f64) -> Result<(f64, f64)> {
    if values.len() < 2 {
        return Err(Error::Eval(format!(
            "a confidence interval needs at least 2 values, got {}",
            values.len()
        )));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, z * var.sqrt() / n.sqrt()))
}

/// 95% interval with the normal multiplier.
pub fn confidence_interval(values: &[f64]) -> Result<(f64, f64)> {
    confidence_interval_z(values, Z_95)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Depth, FusionVariant};
    use proptest::prelude::*;

    fn cfg(head: HeadMode) -> ModelConfig {
        ModelConfig::new(Depth::R18, FusionVariant::SharedCentral1C1N, head)
    }

    fn truth(n: usize) -> Vec<(Tool, Action)> {
        (0..n).map(|i| (Tool::ALL[i % 4], Action::ALL[(i / 4) % 4])).collect()
    }

    #[test]
    fn perfect_predictions_score_one() {
        let t = truth(32);
        let p = Predictions {
            tool: Some(t.iter().map(|(t, _)| t.code()).collect()),
            action: Some(t.iter().map(|(_, a)| a.code()).collect()),
            truth: t,
        };
        let r = score(cfg(HeadMode::Dual), &p).unwrap();
        assert_eq!(r.tool_accuracy(), Some(1.0));
        assert_eq!(r.action_accuracy(), Some(1.0));
        assert_eq!(r.joint_accuracy, 1.0);
        assert_eq!(r.joint_confusion.unwrap().total(), 32);
    }

    #[test]
    fn joint_needs_both_heads() {
        let t = truth(16);
        let p = Predictions {
            tool: Some(t.iter().map(|(t, _)| t.code()).collect()),
            action: Some(t.iter().map(|(_, a)| (a.code() + 1) % 4).collect()),
            truth: t,
        };
        let r = score(cfg(HeadMode::Dual), &p).unwrap();
        assert_eq!(r.tool_accuracy(), Some(1.0));
        assert_eq!(r.action_accuracy(), Some(0.0));
        assert_eq!(r.joint_accuracy, 0.0);
    }

    #[test]
    fn joint16_logits_decode_into_both_heads() {
        // logits favour class t*4+a for the true pair
        let t = truth(8);
        let mut v = vec![0f32; 8 * 16];
        for (i, (tool, action)) in t.iter().enumerate() {
            v[i * 16 + tool.code() * 4 + action.code()] = 5.0;
        }
        let logits = Logits {
            tool: None,
            action: None,
            joint: Some(Tensor::from_slice(&v).view([8, 16])),
        };
        let mut p = Predictions::default();
        p.extend_from_logits(&logits, HeadMode::Joint16, &t).unwrap();
        let r = score(cfg(HeadMode::Joint16), &p).unwrap();
        assert_eq!(r.joint_accuracy, 1.0);
        assert_eq!(r.tool_accuracy(), Some(1.0));
    }

    #[test]
    fn empty_predictions_are_an_error() {
        assert!(score(cfg(HeadMode::Tool), &Predictions::default()).is_err());
    }

    #[test]
    fn interval_examples() {
        let (m, h) = confidence_interval(&[0.5, 0.5, 0.5]).unwrap();
        assert_eq!((m, h), (0.5, 0.0));
        let (m, h) = confidence_interval(&[0.0, 1.0]).unwrap();
        assert!((m - 0.5).abs() < 1e-12);
        assert!((h - 0.98).abs() < 1e-9, "{h}");
        assert!(confidence_interval(&[0.7]).is_err());
        // t multiplier for n = 5
        let (_, h) = confidence_interval_z(&[0.1, 0.2, 0.3, 0.4, 0.5], 2.776).unwrap();
        let s = (0.025f64).sqrt();
        assert!((h - 2.776 * s / 5f64.sqrt()).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn joint_never_exceeds_either_head(
            rows in proptest::collection::vec((0usize..4, 0usize..4, 0usize..4, 0usize..4), 1..64)
        ) {
            let truth: Vec<(Tool, Action)> = rows.iter().map(|r| (Tool::ALL[r.0], Action::ALL[r.1])).collect();
            let p = Predictions {
                tool: Some(rows.iter().map(|r| r.2).collect()),
                action: Some(rows.iter().map(|r| r.3).collect()),
                truth,
            };
            let r = score(cfg(HeadMode::Dual), &p).unwrap();
            prop_assert!(r.joint_accuracy <= r.tool_accuracy().unwrap());
            prop_assert!(r.joint_accuracy <= r.action_accuracy().unwrap());
        }

        #[test]
        fn interval_shrinks_with_root_n(values in proptest::collection::vec(0.0f64..1.0, 2..10)) {
            let (_, h1) = confidence_interval(&values).unwrap();
            let mut quad = values.clone();
            for _ in 0..3 { quad.extend_from_slice(&values); }
            // same mean, sample std changes only through the n-1 factor
            let n = values.len() as f64;
            let (_, h4) = confidence_interval(&quad).unwrap();
            let expected = h1 / 2.0 * ((n - 1.0) / n * 4.0 * n / (4.0 * n - 1.0)).sqrt();
            prop_assert!((h4 - expected).abs() < 1e-9);
        }
    }
}
