//! Accuracy of measured gait parameters against simulator ground truth.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::params::{GaitReport, Stat};
use crate::sim::GroundTruth;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidationError {
    #[error("reference value for {0} is zero")]
    ZeroReference(&'static str),
    #[error("report trial {report} does not match ground truth trial {truth}")]
    TrialMismatch { report: String, truth: String },
    #[error("no trials to summarize")]
    Empty,
}

/// `100 (1 - |measured - reference| / reference)`. Can go negative for
/// errors above 100 %.
pub fn accuracy_pct(measured: f64, reference: f64) -> Option<f64> {
    (reference != 0.0).then(|| 100.0 * (1.0 - (measured - reference).abs() / reference.abs()))
}

/// Validated parameters, in report order: group, row label.
pub const VALIDATED_PARAMETERS: [(&str, &str); 5] = [
    ("Temporal", "Stance Phase Duration"),
    ("Temporal", "Swing Phase Duration"),
    ("Temporal", "Cycle Phase Duration"),
    ("Spatial", "Step Length"),
    ("Spatial", "Cycle Length"),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterComparison {
    pub parameter: String,
    pub measured: f64,
    pub reference: f64,
    pub accuracy_pct: f64,
}

/// One trial: trial-mean measured value against trial-mean truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialComparison {
    pub trial_id: String,
    pub parameters: Vec<ParameterComparison>,
}

pub fn compare_trial(report: &GaitReport, truth: &GroundTruth) -> Result<TrialComparison, ValidationError> {
    if report.trial_id != truth.trial_id {
        return Err(ValidationError::TrialMismatch {
            report: report.trial_id.clone(),
            truth: truth.trial_id.clone(),
        });
    }
    let s = &report.summary;
    let pairs = [
        (s.stance_duration_s.mean, truth.mean(|c| c.stance_s)),
        (s.swing_duration_s.mean, truth.mean(|c| c.swing_s)),
        (s.cycle_duration_s.mean, truth.mean(|c| c.cycle_s)),
        (s.step_length_m.mean, truth.mean(|c| c.step_length_m)),
        (s.cycle_length_m.mean, truth.mean(|c| c.cycle_length_m)),
    ];
    let parameters = VALIDATED_PARAMETERS
        .iter()
        .zip(pairs)
        .map(|(&(_, name), (measured, reference))| {
            Ok(ParameterComparison {
                parameter: name.to_string(),
                measured,
                reference,
                accuracy_pct: accuracy_pct(measured, reference).ok_or(ValidationError::ZeroReference(name))?,
            })
        })
        .collect::<Result<_, _>>()?;
    Ok(TrialComparison {
        trial_id: report.trial_id.clone(),
        parameters,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyRow {
    pub parameter_type: String,
    pub parameter: String,
    pub mean_accuracy_pct: f64,
    /// Sample SD across trials; 0 for a single trial.
    pub sd_accuracy_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracySummary {
    pub trials: usize,
    pub definition: String,
    pub rows: Vec<AccuracyRow>,
}

impl AccuracySummary {
    pub fn row(&self, parameter: &str) -> Option<&AccuracyRow> {
        self.rows.iter().find(|r| r.parameter == parameter)
    }
}

/// Per-parameter accuracy averaged across trials.
pub fn summarize(trials: &[TrialComparison]) -> Result<AccuracySummary, ValidationError> {
    if trials.is_empty() {
        return Err(ValidationError::Empty);
    }
    let rows = VALIDATED_PARAMETERS
        .iter()
        .enumerate()
        .map(|(i, &(group, name))| {
            let values: Vec<f64> = trials.iter().map(|t| t.parameters[i].accuracy_pct).collect();
            let stat = Stat::of(&values);
            AccuracyRow {
                parameter_type: group.to_string(),
                parameter: name.to_string(),
                mean_accuracy_pct: stat.mean,
                sd_accuracy_pct: stat.sd,
            }
        })
        .collect();
    Ok(AccuracySummary {
        trials: trials.len(),
        definition:
            "accuracy = 100 * (1 - |measured - truth| / truth) on trial means; mean and sample SD across trials".into(),
        rows,
    })
}

impl fmt::Display for AccuracySummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<10} {:<22} {:>17} {:>16}",
            "Type", "Parameter", "Mean Accuracy (%)", "SD Accuracy (%)"
        )?;
        for r in &self.rows {
            writeln!(
                f,
                "{:<10} {:<22} {:>17.2} {:>16.2}",
                r.parameter_type, r.parameter, r.mean_accuracy_pct, r.sd_accuracy_pct
            )?;
        }
        write!(f, "trials: {}", self.trials)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn trial(acc: [f64; 5]) -> TrialComparison {
        TrialComparison {
            trial_id: "t".into(),
            parameters: VALIDATED_PARAMETERS
                .iter()
                .zip(acc)
                .map(|(&(_, name), a)| ParameterComparison {
                    parameter: name.into(),
                    measured: 0.0,
                    reference: 0.0,
                    accuracy_pct: a,
                })
                .collect(),
        }
    }

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy_pct(1.0, 1.0), Some(100.0));
        assert_relative_eq!(accuracy_pct(1.1, 1.0).unwrap(), 90.0, epsilon = 1e-12);
        assert_relative_eq!(accuracy_pct(0.9, 1.0).unwrap(), 90.0, epsilon = 1e-12);
        assert_eq!(accuracy_pct(1.0, 0.0), None);
    }

    #[test]
    fn exact_trial_is_perfect() {
        let s = summarize(&[trial([100.0; 5])]).unwrap();
        assert!(s
            .rows
            .iter()
            .all(|r| r.mean_accuracy_pct == 100.0 && r.sd_accuracy_pct == 0.0));
    }

    #[test]
    fn batch_mean_and_sample_sd() {
        // Stance accuracies 90, 92, 94, 96, 98: mean 94, sample SD sqrt(10).
        let trials: Vec<_> = [90.0, 92.0, 94.0, 96.0, 98.0].iter().map(|&a| trial([a; 5])).collect();
        let s = summarize(&trials).unwrap();
        let r = s.row("Stance Phase Duration").unwrap();
        assert_relative_eq!(r.mean_accuracy_pct, 94.0, epsilon = 1e-12);
        assert_relative_eq!(r.sd_accuracy_pct, 10f64.sqrt(), epsilon = 1e-12);
        assert_eq!(s.trials, 5);
    }

    #[test]
    fn empty_batch_errors() {
        assert_eq!(summarize(&[]), Err(ValidationError::Empty));
    }

    #[test]
    fn table_renders_every_row() {
        let text = summarize(&[trial([99.0; 5])]).unwrap().to_string();
        for (_, name) in VALIDATED_PARAMETERS {
            assert!(text.contains(name));
        }
    }
}
