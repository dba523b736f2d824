//! Accuracy and spread of generated ensembles against reference solutions.

use serde::{Deserialize, Serialize};

use crate::error::{FloralError, Result};
use crate::grid::{mean_square_norm, GridFunction};

pub const METRICS_HEADER: &str = "sample_index,rmse,nrmse,crmse,l2_error,pred_std";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleMetrics {
    pub index: usize,
    pub rmse: f64,
    /// RMSE over the RMS of the truth (the RMSE itself when the truth is zero).
    pub nrmse: f64,
    /// Absolute error of the spatial mean.
    pub crmse: f64,
    pub l2_error: f64,
    pub pred_std: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rmse: f64,
    pub nrmse: f64,
    pub crmse: f64,
    pub mean_l2_error: f64,
    pub mean_predictive_std: f64,
    pub per_sample: Vec<SampleMetrics>,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Metrics of one ensemble, with the ensemble mean as the point prediction.
pub fn sample_metrics(index: usize, ensemble: &[GridFunction], truth: &GridFunction) -> Result<SampleMetrics> {
    let n = ensemble.len();
    if n == 0 {
        return Err(FloralError::Data(format!("sample {index}: empty ensemble")));
    }
    if ensemble.iter().any(|m| !m.same_grid(truth)) {
        return Err(FloralError::Shape(format!("sample {index}: ensemble and truth grids differ")));
    }
    let len = truth.len();
    // centred on the first member so identical members give an exact mean
    let base = &ensemble[0].values;
    let mut shift = vec![0.0; len];
    for m in &ensemble[1..] {
        shift.iter_mut().zip(m.values.iter().zip(base)).for_each(|(a, (v, b))| *a += v - b);
    }
    let mu: Vec<f64> = base.iter().zip(&shift).map(|(b, d)| b + d / n as f64).collect();
    let mut var = vec![0.0; len];
    for m in ensemble {
        var.iter_mut().zip(m.values.iter().zip(&mu)).for_each(|(s, (v, u))| *s += (v - u).powi(2) / n as f64);
    }
    let err: Vec<f64> = mu.iter().zip(&truth.values).map(|(p, t)| p - t).collect();
    let rmse = mean_square_norm(&err);
    let scale = mean_square_norm(&truth.values);
    Ok(SampleMetrics {
        index,
        rmse,
        nrmse: if scale > 0.0 { rmse / scale } else { rmse },
        crmse: (mean(&mu) - mean(&truth.values)).abs(),
        l2_error: rmse,
        pred_std: mean(&var.iter().map(|v| v.sqrt()).collect::<Vec<_>>()),
    })
}

/// Aggregates per-sample metrics.
///
/// RMSE and CRMSE pool squared errors over samples; NRMSE, the L2 error and
/// the predictive std are plain means over samples.
pub fn aggregate(per_sample: Vec<SampleMetrics>) -> Result<EvalReport> {
    if per_sample.is_empty() {
        return Err(FloralError::Data("no samples to aggregate".into()));
    }
    let col = |f: fn(&SampleMetrics) -> f64| per_sample.iter().map(f).collect::<Vec<f64>>();
    let rmse = mean(&col(|s| s.rmse * s.rmse)).sqrt();
    let crmse = mean(&col(|s| s.crmse * s.crmse)).sqrt();
    let report = EvalReport {
        rmse,
        nrmse: mean(&col(|s| s.nrmse)),
        crmse,
        mean_l2_error: mean(&col(|s| s.l2_error)),
        mean_predictive_std: mean(&col(|s| s.pred_std)),
        per_sample,
    };
    let all = [report.rmse, report.nrmse, report.crmse, report.mean_l2_error, report.mean_predictive_std];
    if all.iter().any(|v| !v.is_finite()) {
        return Err(FloralError::Data("non-finite metric".into()));
    }
    Ok(report)
}

/// Metrics for `ensembles[i]` against `truths[i]`; all truths must share a grid.
pub fn compute_metrics(ensembles: &[Vec<GridFunction>], truths: &[GridFunction]) -> Result<EvalReport> {
    if ensembles.len() != truths.len() {
        return Err(FloralError::Shape(format!("{} ensembles for {} truths", ensembles.len(), truths.len())));
    }
    if truths.iter().any(|t| t.len() != truths[0].len()) {
        return Err(FloralError::Shape("all test samples must share a grid".into()));
    }
    let per = ensembles
        .iter()
        .zip(truths)
        .enumerate()
        .map(|(i, (e, t))| sample_metrics(i, e, t))
        .collect::<Result<Vec<_>>>()?;
    aggregate(per)
}

impl EvalReport {
    /// Per-sample rows followed by an `aggregate` row.
    pub fn to_csv(&self) -> String {
        let mut s = String::from(METRICS_HEADER);
        s.push('\n');
        for m in &self.per_sample {
            s.push_str(&format!("{},{},{},{},{},{}\n", m.index, m.rmse, m.nrmse, m.crmse, m.l2_error, m.pred_std));
        }
        s.push_str(&format!(
            "aggregate,{},{},{},{},{}\n",
            self.rmse, self.nrmse, self.crmse, self.mean_l2_error, self.mean_predictive_std
        ));
        s
    }
}
