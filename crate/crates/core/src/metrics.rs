//! Scale-free forecast accuracy scores.
//!
//! Test errors are scaled by the mean absolute one-step naive error on the
//! training series, so values are comparable across instruments with very
//! different price levels. A score of 1 means "as good as repeating
//! yesterday's value"; below 1 beats that baseline.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("training series needs at least two points, got {0}")]
    TrainTooShort(usize),
    #[error("scaled errors are undefined: training series is constant")]
    UndefinedScaledError,
    #[error("actual and predicted lengths differ: {actual} vs {predicted}")]
    LengthMismatch { actual: usize, predicted: usize },
    #[error("test window is empty")]
    EmptyTest,
}

/// Scaled error summary for one forecast against one training series.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledErrorReport {
    pub mase: f64,
    pub rmsse: f64,
    /// Mean absolute one-step naive error over the training series.
    pub naive_denominator: f64,
    /// Signed test errors, actual minus predicted.
    pub test_errors: Vec<f64>,
}

impl ScaledErrorReport {
    /// True when the forecast beats the naive baseline on MASE.
    pub fn favourable(&self) -> bool {
        self.mase < 1.0
    }
}

/// Mean absolute first difference of the training series,
/// `sum(|y_t - y_(t-1)|) / (T - 1)`.
pub fn naive_denominator(train: &[f64]) -> Result<f64, MetricsError> {
    if train.len() < 2 {
        return Err(MetricsError::TrainTooShort(train.len()));
    }
    let sum: f64 = train.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
    let d = sum / (train.len() - 1) as f64;
    if d == 0.0 {
        return Err(MetricsError::UndefinedScaledError);
    }
    Ok(d)
}

fn scaled_errors(
    actual: &[f64],
    predicted: &[f64],
    train: &[f64],
) -> Result<(Vec<f64>, f64), MetricsError> {
    if actual.len() != predicted.len() {
        return Err(MetricsError::LengthMismatch {
            actual: actual.len(),
            predicted: predicted.len(),
        });
    }
    if actual.is_empty() {
        return Err(MetricsError::EmptyTest);
    }
    let d = naive_denominator(train)?;
    let errors = actual
        .iter()
        .zip(predicted)
        .map(|(a, p)| a - p)
        .collect();
    Ok((errors, d))
}

/// Mean absolute scaled error over the test window.
pub fn mase(actual: &[f64], predicted: &[f64], train: &[f64]) -> Result<f64, MetricsError> {
    let (errors, d) = scaled_errors(actual, predicted, train)?;
    Ok(errors.iter().map(|e| (e / d).abs()).sum::<f64>() / errors.len() as f64)
}

/// Root mean squared scaled error over the test window.
pub fn rmsse(actual: &[f64], predicted: &[f64], train: &[f64]) -> Result<f64, MetricsError> {
    let (errors, d) = scaled_errors(actual, predicted, train)?;
    let msse = errors.iter().map(|e| (e / d) * (e / d)).sum::<f64>() / errors.len() as f64;
    Ok(msse.sqrt())
}

/// Both scores plus the pieces they are built from.
pub fn scaled_error_report(
    actual: &[f64],
    predicted: &[f64],
    train: &[f64],
) -> Result<ScaledErrorReport, MetricsError> {
    let (test_errors, naive_denominator) = scaled_errors(actual, predicted, train)?;
    let n = test_errors.len() as f64;
    let mase = test_errors
        .iter()
        .map(|e| (e / naive_denominator).abs())
        .sum::<f64>()
        / n;
    let rmsse = (test_errors
        .iter()
        .map(|e| {
            let q = e / naive_denominator;
            q * q
        })
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(ScaledErrorReport {
        mase,
        rmsse,
        naive_denominator,
        test_errors,
    })
}
