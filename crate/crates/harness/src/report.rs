//! Evaluation reports: per-horizon mean squared errors, summary tables with
//! published reference rows, and error-distribution statistics.

use std::fmt::Write as _;

use crate::error::HarnessError;
use crate::reference::{HORIZON_REFERENCES, REFERENCE_LABEL};

/// Per-window, per-horizon squared errors for one evaluation run.
#[derive(Debug, Clone)]
pub struct HorizonErrors {
    /// Sample interval, seconds.
    pub dt: f64,
    /// `velocity[w][i]`: squared error of window `w` at horizon step `i+1`,
    /// averaged over the three velocity channels.
    pub velocity: Vec<Vec<f64>>,
    /// Same for the three body-rate channels.
    pub body_rate: Vec<Vec<f64>>,
}

impl HorizonErrors {
    pub fn windows(&self) -> usize {
        self.velocity.len()
    }

    pub fn steps(&self) -> usize {
        self.velocity.first().map(Vec::len).unwrap_or(0)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.velocity.is_empty() {
            return Err(HarnessError::Data("evaluation saw no windows".into()));
        }
        let steps = self.steps();
        for (w, (v, r)) in self.velocity.iter().zip(&self.body_rate).enumerate() {
            if v.len() != steps || r.len() != steps {
                return Err(HarnessError::Data(format!(
                    "window {w}: ragged horizon lengths"
                )));
            }
            if v.iter().chain(r.iter()).any(|x| !x.is_finite()) {
                return Err(HarnessError::Numeric(format!(
                    "window {w}: non-finite error"
                )));
            }
        }
        Ok(())
    }

    /// Mean over windows at each horizon step: `(velocity, body rate)`.
    pub fn mse_curves(&self) -> (Vec<f64>, Vec<f64>) {
        let steps = self.steps();
        let n = self.windows() as f64;
        let mut vel = vec![0.0; steps];
        let mut rate = vec![0.0; steps];
        for (v, r) in self.velocity.iter().zip(&self.body_rate) {
            for i in 0..steps {
                vel[i] += v[i];
                rate[i] += r[i];
            }
        }
        for i in 0..steps {
            vel[i] /= n;
            rate[i] /= n;
        }
        (vel, rate)
    }

    /// Combined (velocity + body rate mean) squared error per window at one
    /// horizon step (1-based).
    pub fn combined_at(&self, step: usize) -> Vec<f64> {
        self.velocity
            .iter()
            .zip(&self.body_rate)
            .map(|(v, r)| 0.5 * (v[step - 1] + r[step - 1]))
            .collect()
    }
}

/// Linear-interpolation percentile of an unsorted sample; `q` in [0, 100].
pub fn percentile(values: &[f64], q: f64) -> f64 {
    assert!(!values.is_empty());
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let rank = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let frac = rank - lo as f64;
        sorted[lo] * (1.0 - frac) + sorted[hi] * frac
    }
}

/// `step,t,velocity_mse,body_rate_mse` rows.
pub fn horizon_csv(errors: &HorizonErrors) -> String {
    let (vel, rate) = errors.mse_curves();
    let mut out = String::from("step,t,velocity_mse,body_rate_mse\n");
    for i in 0..vel.len() {
        let t = (i + 1) as f64 * errors.dt;
        writeln!(out, "{},{},{},{}", i + 1, t, vel[i], rate[i]).unwrap();
    }
    out
}

/// `step,t,p50,p75,p90,p99,max` of the combined error over windows.
pub fn percentile_csv(errors: &HorizonErrors) -> String {
    let mut out = String::from("step,t,p50,p75,p90,p99,max\n");
    for step in 1..=errors.steps() {
        let sample = errors.combined_at(step);
        let t = step as f64 * errors.dt;
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            step,
            t,
            percentile(&sample, 50.0),
            percentile(&sample, 75.0),
            percentile(&sample, 90.0),
            percentile(&sample, 99.0),
            sample.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        )
        .unwrap();
    }
    out
}

/// Horizon steps reported in the summary table: 1 plus the steps closest to
/// 0.45 s and 0.90 s that the horizon covers.
pub fn summary_steps(steps: usize, dt: f64) -> Vec<usize> {
    let mut out = vec![1];
    for target in [0.45, 0.90] {
        let step = (target / dt).round() as usize;
        let clamped = step.clamp(1, steps);
        if !out.contains(&clamped) {
            out.push(clamped);
        }
    }
    out
}

fn fmt_val(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e-3 && v.abs() < 1e4 {
        format!("{v:.6}")
    } else {
        format!("{v:.4e}")
    }
}

/// Aligned text table: one measured row plus the published reference rows.
pub fn summary_table(model_label: &str, errors: &HorizonErrors) -> String {
    let (vel, rate) = errors.mse_curves();
    let steps = summary_steps(vel.len(), errors.dt);
    let mut header = vec!["model".to_string(), "source".to_string()];
    for &s in &steps {
        let t = s as f64 * errors.dt;
        header.push(format!("vel@{t:.2}s"));
        header.push(format!("rate@{t:.2}s"));
    }
    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut measured = vec![model_label.to_string(), "measured".to_string()];
    for &s in &steps {
        measured.push(fmt_val(vel[s - 1]));
        measured.push(fmt_val(rate[s - 1]));
    }
    rows.push(measured);
    // The published table fixes its columns at 0.01/0.45/0.90 s; quote the
    // columns matching the steps we printed (by target order).
    for r in HORIZON_REFERENCES {
        let quoted = [r.t001, r.t045, r.t090];
        let mut row = vec![r.model.to_string(), REFERENCE_LABEL.to_string()];
        for (i, _) in steps.iter().enumerate() {
            let (v, b) = quoted[i.min(2)];
            row.push(v.to_string());
            row.push(b.to_string());
        }
        rows.push(row);
    }
    render_aligned(&header, &rows)
}

/// Renders rows as a space-aligned text table.
pub fn render_aligned(header: &[String], rows: &[Vec<String>]) -> String {
    let cols = header.len();
    let mut widths: Vec<usize> = header.iter().map(String::len).collect();
    for row in rows {
        for (i, cell) in row.iter().enumerate() {
            widths[i] = widths[i].max(cell.len());
        }
    }
    let mut out = String::new();
    let emit = |out: &mut String, cells: &[String]| {
        for i in 0..cols {
            if i > 0 {
                out.push_str("  ");
            }
            let cell = cells.get(i).map(String::as_str).unwrap_or("");
            write!(out, "{cell:<width$}", width = widths[i]).unwrap();
        }
        while out.ends_with(' ') {
            out.pop();
        }
        out.push('\n');
    };
    emit(&mut out, header);
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    emit(&mut out, &rule);
    for row in rows {
        emit(&mut out, row);
    }
    out
}

/// Box-plot statistics per horizon: median, quartiles, whiskers at 1.5 IQR
/// (clamped to observed values), max.
pub fn box_stats_csv(errors: &HorizonErrors) -> String {
    let mut out = String::from("step,t,whisker_low,q1,median,q3,whisker_high,max\n");
    for step in 1..=errors.steps() {
        let sample = errors.combined_at(step);
        let q1 = percentile(&sample, 25.0);
        let q2 = percentile(&sample, 50.0);
        let q3 = percentile(&sample, 75.0);
        let iqr = q3 - q1;
        let lo_fence = q1 - 1.5 * iqr;
        let hi_fence = q3 + 1.5 * iqr;
        let lo = sample
            .iter()
            .cloned()
            .filter(|v| *v >= lo_fence)
            .fold(f64::INFINITY, f64::min);
        let hi = sample
            .iter()
            .cloned()
            .filter(|v| *v <= hi_fence)
            .fold(f64::NEG_INFINITY, f64::max);
        let max = sample.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let t = step as f64 * errors.dt;
        writeln!(out, "{},{},{},{},{},{},{},{}", step, t, lo, q1, q2, q3, hi, max).unwrap();
    }
    out
}
