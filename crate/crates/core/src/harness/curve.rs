//! Learning curves and their CSV form.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use crate::error::{argument, Result};

/// Per-trial curve: `(episode index, batch mean return)` pairs.
pub type TrialCurve = Vec<(usize, f64)>;

#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub episode: usize,
    /// In trial order.
    pub trial_returns: Vec<f64>,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LearningCurve {
    pub points: Vec<CurvePoint>,
}

/// Pointwise mean, min and max across trials. Values are sorted before
/// summation so the result does not depend on trial order.
pub fn aggregate_curves(trials: &[TrialCurve]) -> Result<LearningCurve> {
    let Some(first) = trials.first() else {
        return Err(argument("no trial curves to aggregate"));
    };
    if trials.iter().any(|c| c.len() != first.len()) {
        return Err(argument("trial curves have different lengths"));
    }
    let mut points = Vec::with_capacity(first.len());
    for k in 0..first.len() {
        let episode = first[k].0;
        if trials.iter().any(|c| c[k].0 != episode) {
            return Err(argument(format!("trial curves disagree on the episode index of point {k}")));
        }
        if k > 0 && episode <= first[k - 1].0 {
            return Err(argument("episode indices must be strictly increasing"));
        }
        let trial_returns: Vec<f64> = trials.iter().map(|c| c[k].1).collect();
        let mut sorted = trial_returns.clone();
        sorted.sort_by(f64::total_cmp);
        // Rounding can push the mean of equal values just outside them.
        let mean = (sorted.iter().sum::<f64>() / sorted.len() as f64).clamp(sorted[0], sorted[sorted.len() - 1]);
        points.push(CurvePoint { episode, mean, min: sorted[0], max: sorted[sorted.len() - 1], trial_returns });
    }
    Ok(LearningCurve { points })
}

/// Nine significant digits.
pub fn format_float(x: f64) -> String {
    format!("{x:.8e}")
}

pub const TRIAL_HEADER: [&str; 3] = ["episode", "trial", "mean_return"];
pub const AGGREGATE_HEADER: [&str; 4] = ["episode", "agg_mean", "agg_min", "agg_max"];

/// Appends rows to a per-trial curve file, flushing each row so partial
/// logs survive an abort.
pub struct TrialCurveWriter {
    inner: csv::Writer<File>,
    trial: usize,
}

impl TrialCurveWriter {
    pub fn create(path: &Path, trial: usize) -> Result<Self> {
        let mut inner = csv::Writer::from_path(path)?;
        inner.write_record(TRIAL_HEADER)?;
        inner.flush()?;
        Ok(Self { inner, trial })
    }

    pub fn push(&mut self, episode: usize, mean_return: f64) -> Result<()> {
        self.inner
            .write_record([episode.to_string(), self.trial.to_string(), format_float(mean_return)])?;
        self.inner.flush()?;
        Ok(())
    }
}

pub fn read_trial_curve(path: &Path) -> Result<TrialCurve> {
    let mut reader = csv::Reader::from_path(path)?;
    if reader.headers()?.iter().collect::<Vec<_>>() != TRIAL_HEADER {
        return Err(argument(format!("{} is not a per-trial curve file", path.display())));
    }
    reader
        .records()
        .map(|r| {
            let r = r?;
            let episode = r[0].parse().map_err(|_| argument(format!("bad episode '{}'", &r[0])))?;
            let value = r[2].parse().map_err(|_| argument(format!("bad return '{}'", &r[2])))?;
            Ok((episode, value))
        })
        .collect()
}

pub fn write_aggregate(path: &Path, curve: &LearningCurve) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(AGGREGATE_HEADER)?;
    for p in &curve.points {
        w.write_record([p.episode.to_string(), format_float(p.mean), format_float(p.min), format_float(p.max)])?;
    }
    w.flush()?;
    Ok(())
}

/// Plain-text file writer used for logs that are not curves.
pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = File::create(path)?;
    f.write_all(text.as_bytes())?;
    Ok(())
}
