//! Step-response quality metrics: rise time, overshoot, steady-state error,
//! settling time, and peak count, plus disturbance-rejection measures.
//!
//! Conventions: rise time is 10% to 90% of the achieved final value; the
//! final value is the mean of the trailing 5% of samples; overshoot is
//! measured against the final value (not the reference) so it stays
//! meaningful when steady-state error is nonzero. Band widths: 2% for
//! settling, 1% for peak detection.

use std::fmt;

use thiserror::Error;

use crate::simloop::SimulationTrace;

/// Settling band around the final value.
pub const SETTLING_BAND: f64 = 0.02;
/// Excursions above the final value smaller than this fraction do not count
/// as peaks or overshoot.
pub const PEAK_BAND: f64 = 0.01;
/// Fraction of trailing samples averaged into the final value.
pub const TRAILING_WINDOW: f64 = 0.05;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("trace is empty")]
    EmptyTrace,
    #[error("times and values have different lengths ({0} vs {1})")]
    MismatchedLengths(usize, usize),
    #[error("step target must be nonzero")]
    ZeroTarget,
    #[error("no samples at or after the step time")]
    NoSamplesAfterStep,
}

/// Step-response quality summary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepMetrics {
    /// Mean of the trailing window of samples.
    pub final_value: f64,
    /// |target - final| / |target| * 100.
    pub steady_state_error_pct: f64,
    /// 10%-to-90% rise time, seconds. None when the response is degenerate.
    pub rise_time: Option<f64>,
    /// Peak excursion beyond the final value, percent of |final value|;
    /// excursions within the peak band report 0.
    pub overshoot_pct: f64,
    /// Time of the last departure from the settling band, measured from the
    /// step, seconds. 0 when the response never leaves the band.
    pub settling_time: f64,
    /// Local maxima above the final value plus the peak band.
    pub peak_count: usize,
    /// Set when the final value is indistinguishable from zero against a
    /// nonzero target; the ratio-based fields are meaningless then.
    pub degenerate: bool,
}

/// Computes step metrics from raw (time, value) series. `step_time` marks
/// where the commanded step occurs; only samples at or after it are
/// analyzed.
pub fn analyze_step(
    times: &[f64],
    values: &[f64],
    step_time: f64,
    step_target: f64,
) -> Result<StepMetrics, MetricsError> {
    if times.is_empty() {
        return Err(MetricsError::EmptyTrace);
    }
    if times.len() != values.len() {
        return Err(MetricsError::MismatchedLengths(times.len(), values.len()));
    }
    if step_target == 0.0 {
        return Err(MetricsError::ZeroTarget);
    }
    let start = times
        .iter()
        .position(|&t| t >= step_time)
        .ok_or(MetricsError::NoSamplesAfterStep)?;
    let t = &times[start..];
    let y = &values[start..];
    let n = y.len();

    let tail = ((n as f64 * TRAILING_WINDOW).ceil() as usize).clamp(1, n);
    let final_value = y[n - tail..].iter().sum::<f64>() / tail as f64;

    if final_value.abs() < 1e-9 {
        return Ok(StepMetrics {
            final_value,
            steady_state_error_pct: 100.0,
            rise_time: None,
            overshoot_pct: 0.0,
            settling_time: 0.0,
            peak_count: 0,
            degenerate: true,
        });
    }

    let steady_state_error_pct = (step_target - final_value).abs() / step_target.abs() * 100.0;

    // Normalized response: 1.0 at the final value, sign-corrected.
    let psi: Vec<f64> = y.iter().map(|&v| v / final_value).collect();

    let rise_time = psi.iter().position(|&p| p >= 0.1).and_then(|i10| {
        psi[i10..]
            .iter()
            .position(|&p| p >= 0.9)
            .map(|off| t[i10 + off] - t[i10])
    });

    let peak = psi.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let excess = peak - 1.0;
    let overshoot_pct = if excess > PEAK_BAND {
        excess * 100.0
    } else {
        0.0
    };

    let settling_time = psi
        .iter()
        .rposition(|&p| (p - 1.0).abs() > SETTLING_BAND)
        .map(|i| t[i] - step_time)
        .unwrap_or(0.0);

    let mut peak_count = 0;
    for i in 1..n.saturating_sub(1) {
        if psi[i] > psi[i - 1] && psi[i] >= psi[i + 1] && psi[i] > 1.0 + PEAK_BAND {
            peak_count += 1;
        }
    }

    Ok(StepMetrics {
        final_value,
        steady_state_error_pct,
        rise_time,
        overshoot_pct,
        settling_time,
        peak_count,
        degenerate: false,
    })
}

/// Convenience wrapper extracting the pitch channel from a trace.
pub fn analyze_trace(
    trace: &SimulationTrace,
    step_time: f64,
    step_target: f64,
) -> Result<StepMetrics, MetricsError> {
    analyze_step(&trace.times(), &trace.outputs(), step_time, step_target)
}

/// Deviation of the output from the reference over a window, for
/// disturbance-rejection comparisons.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisturbanceMetrics {
    pub peak_deviation: f64,
    pub rms_deviation: f64,
}

pub fn disturbance_rejection(
    times: &[f64],
    outputs: &[f64],
    references: &[f64],
    window_start: f64,
) -> Result<DisturbanceMetrics, MetricsError> {
    if times.is_empty() {
        return Err(MetricsError::EmptyTrace);
    }
    if times.len() != outputs.len() || times.len() != references.len() {
        return Err(MetricsError::MismatchedLengths(times.len(), outputs.len()));
    }
    let mut peak = 0.0f64;
    let mut sq_sum = 0.0;
    let mut count = 0usize;
    for i in 0..times.len() {
        if times[i] >= window_start {
            let dev = outputs[i] - references[i];
            peak = peak.max(dev.abs());
            sq_sum += dev * dev;
            count += 1;
        }
    }
    if count == 0 {
        return Err(MetricsError::NoSamplesAfterStep);
    }
    Ok(DisturbanceMetrics {
        peak_deviation: peak,
        rms_deviation: (sq_sum / count as f64).sqrt(),
    })
}

/// Side-by-side report of two step-metric sets. Percentage improvements are
/// relative to `a` (the baseline); `None` marks not-computable deltas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsComparison {
    pub rise_time: (Option<f64>, Option<f64>),
    /// (a - b) / a * 100; positive means `b` is faster.
    pub speed_improvement_pct: Option<f64>,
    pub overshoot_pct: (f64, f64),
    /// a - b, percentage points.
    pub overshoot_reduction_pp: f64,
    pub steady_state_error_pct: (f64, f64),
    pub sse_reduction_pp: f64,
    pub settling_time: (f64, f64),
    pub settling_improvement_pct: Option<f64>,
    pub peak_count: (usize, usize),
}

/// Compares two metric sets taken against the same step target.
pub fn compare(a: &StepMetrics, b: &StepMetrics) -> MetricsComparison {
    let speed_improvement_pct = match (a.rise_time, b.rise_time) {
        (Some(ra), Some(rb)) if ra != 0.0 => Some((ra - rb) / ra * 100.0),
        _ => None,
    };
    let settling_improvement_pct = if a.settling_time != 0.0 {
        Some((a.settling_time - b.settling_time) / a.settling_time * 100.0)
    } else {
        None
    };
    MetricsComparison {
        rise_time: (a.rise_time, b.rise_time),
        speed_improvement_pct,
        overshoot_pct: (a.overshoot_pct, b.overshoot_pct),
        overshoot_reduction_pp: a.overshoot_pct - b.overshoot_pct,
        steady_state_error_pct: (a.steady_state_error_pct, b.steady_state_error_pct),
        sse_reduction_pp: a.steady_state_error_pct - b.steady_state_error_pct,
        settling_time: (a.settling_time, b.settling_time),
        settling_improvement_pct,
        peak_count: (a.peak_count, b.peak_count),
    }
}

impl fmt::Display for StepMetrics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "  final_value             {:.6}", self.final_value)?;
        writeln!(
            f,
            "  steady_state_error_pct  {:.3}",
            self.steady_state_error_pct
        )?;
        match self.rise_time {
            Some(rt) => writeln!(f, "  rise_time_s             {rt:.4}")?,
            None => writeln!(f, "  rise_time_s             undefined")?,
        }
        writeln!(f, "  overshoot_pct           {:.3}", self.overshoot_pct)?;
        writeln!(f, "  settling_time_s         {:.4}", self.settling_time)?;
        writeln!(f, "  peak_count              {}", self.peak_count)?;
        writeln!(f, "  degenerate              {}", self.degenerate)
    }
}

impl fmt::Display for MetricsComparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.rise_time, self.speed_improvement_pct) {
            ((Some(ra), Some(rb)), Some(imp)) => writeln!(
                f,
                "  rise_time      {ra:.3} s -> {rb:.3} s ({imp:+.1}% speed)"
            )?,
            _ => writeln!(f, "  rise_time      not comparable")?,
        }
        writeln!(
            f,
            "  overshoot      {:.2}% -> {:.2}% ({:+.2} pp)",
            self.overshoot_pct.0, self.overshoot_pct.1, -self.overshoot_reduction_pp
        )?;
        writeln!(
            f,
            "  steady_state   {:.2}% -> {:.2}% ({:+.2} pp)",
            self.steady_state_error_pct.0, self.steady_state_error_pct.1, -self.sse_reduction_pp
        )?;
        match self.settling_improvement_pct {
            Some(imp) => writeln!(
                f,
                "  settling_time  {:.2} s -> {:.2} s ({imp:+.1}%)",
                self.settling_time.0, self.settling_time.1
            )?,
            None => writeln!(
                f,
                "  settling_time  {:.2} s -> {:.2} s",
                self.settling_time.0, self.settling_time.1
            )?,
        }
        writeln!(
            f,
            "  peak_count     {} -> {}",
            self.peak_count.0, self.peak_count.1
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sample(f: impl Fn(f64) -> f64, dt: f64, t_end: f64) -> (Vec<f64>, Vec<f64>) {
        let n = (t_end / dt).round() as usize;
        let times: Vec<f64> = (0..=n).map(|k| k as f64 * dt).collect();
        let values = times.iter().map(|&t| f(t)).collect();
        (times, values)
    }

    #[test]
    fn ideal_instant_step() {
        let (t, y) = sample(|t| if t >= 1.0 { 2.0 } else { 0.0 }, 0.01, 5.0);
        let m = analyze_step(&t, &y, 1.0, 2.0).unwrap();
        assert_eq!(m.rise_time, Some(0.0));
        assert_eq!(m.overshoot_pct, 0.0);
        assert!(m.steady_state_error_pct < 1e-9);
        assert_eq!(m.peak_count, 0);
        assert!(!m.degenerate);
    }

    #[test]
    fn underdamped_second_order_overshoot() {
        // Oracle: closed-form percent overshoot exp(-pi zeta / sqrt(1 -
        // zeta^2)) for zeta = 0.5.
        let zeta: f64 = 0.5;
        let wd = (1.0 - zeta * zeta).sqrt();
        let phi = zeta.acos();
        let (t, y) = sample(
            |t| 1.0 - (-zeta * t).exp() / wd * (wd * t + phi).sin(),
            1e-3,
            20.0,
        );
        let m = analyze_step(&t, &y, 0.0, 1.0).unwrap();
        let expected = 100.0 * (-std::f64::consts::PI * zeta / wd).exp();
        assert!(
            (m.overshoot_pct - expected).abs() < 2.0,
            "overshoot {} vs {expected}",
            m.overshoot_pct
        );
        assert!(m.peak_count >= 1);
    }

    #[test]
    fn first_order_rise_time() {
        // Oracle: analytic 10%/90% crossings of 1 - e^(-10 t).
        let (t, y) = sample(|t| 1.0 - (-10.0 * t).exp(), 1e-3, 1.0);
        let m = analyze_step(&t, &y, 0.0, 1.0).unwrap();
        let expected = (9.0f64).ln() / 10.0;
        let rise = m.rise_time.expect("rise defined");
        assert!(
            (rise - expected).abs() <= 2e-3,
            "rise {rise} vs {expected}"
        );
        assert_eq!(m.overshoot_pct, 0.0);
        assert_eq!(m.peak_count, 0);
    }

    #[test]
    fn amplitude_invariance() {
        let (t, y) = sample(
            |t| 1.0 - (-0.5 * t).exp() / 0.866 * (0.866 * t + 1.047).sin(),
            1e-2,
            20.0,
        );
        let scaled: Vec<f64> = y.iter().map(|v| v * 37.5).collect();
        let a = analyze_step(&t, &y, 0.0, 1.0).unwrap();
        let b = analyze_step(&t, &scaled, 0.0, 37.5).unwrap();
        assert_eq!(a.rise_time, b.rise_time);
        assert_eq!(a.settling_time, b.settling_time);
        assert_eq!(a.peak_count, b.peak_count);
        assert_relative_eq!(a.overshoot_pct, b.overshoot_pct, epsilon = 1e-9);
        assert_relative_eq!(
            a.steady_state_error_pct,
            b.steady_state_error_pct,
            epsilon = 1e-9
        );
    }

    #[test]
    fn time_shift_invariance() {
        let (t, y) = sample(|t| 1.0 - (-2.0 * t).exp(), 1e-2, 10.0);
        let shifted_t: Vec<f64> = t.iter().map(|v| v + 5.0).collect();
        let a = analyze_step(&t, &y, 0.0, 1.0).unwrap();
        let b = analyze_step(&shifted_t, &y, 5.0, 1.0).unwrap();
        assert_relative_eq!(
            a.rise_time.unwrap(),
            b.rise_time.unwrap(),
            epsilon = 1e-9
        );
        assert_relative_eq!(a.settling_time, b.settling_time, epsilon = 1e-9);
        assert_eq!(a.overshoot_pct, b.overshoot_pct);
    }

    #[test]
    fn monotone_response_has_no_overshoot_or_peaks() {
        let (t, y) = sample(|t| 1.0 - (-3.0 * t).exp(), 1e-2, 5.0);
        let m = analyze_step(&t, &y, 0.0, 1.0).unwrap();
        assert_eq!(m.overshoot_pct, 0.0);
        assert_eq!(m.peak_count, 0);
    }

    #[test]
    fn degenerate_flat_zero_response() {
        let (t, y) = sample(|_| 0.0, 0.01, 2.0);
        let m = analyze_step(&t, &y, 0.0, 1.0).unwrap();
        assert!(m.degenerate);
        assert_eq!(m.rise_time, None);
    }

    #[test]
    fn zero_target_rejected() {
        let (t, y) = sample(|t| t, 0.1, 1.0);
        assert!(matches!(
            analyze_step(&t, &y, 0.0, 0.0),
            Err(MetricsError::ZeroTarget)
        ));
    }

    #[test]
    fn comparison_reports_paper_style_deltas() {
        let base = StepMetrics {
            final_value: 1.0,
            steady_state_error_pct: 2.0,
            rise_time: Some(2.3),
            overshoot_pct: 6.2,
            settling_time: 8.0,
            peak_count: 2,
            degenerate: false,
        };
        let better = StepMetrics {
            rise_time: Some(1.09),
            overshoot_pct: 3.3,
            steady_state_error_pct: 0.0,
            settling_time: 4.0,
            peak_count: 1,
            ..base
        };
        let cmp = compare(&base, &better);
        assert_relative_eq!(cmp.speed_improvement_pct.unwrap(), 52.6, epsilon = 0.1);
        assert_relative_eq!(cmp.overshoot_reduction_pp, 2.9, epsilon = 1e-9);

        let same = compare(&base, &base);
        assert_eq!(same.speed_improvement_pct, Some(0.0));
        assert_eq!(same.overshoot_reduction_pp, 0.0);
        assert_eq!(same.sse_reduction_pp, 0.0);
    }

    #[test]
    fn comparison_with_undefined_rise_time() {
        let mut a = StepMetrics {
            final_value: 1.0,
            steady_state_error_pct: 0.0,
            rise_time: None,
            overshoot_pct: 0.0,
            settling_time: 0.0,
            peak_count: 0,
            degenerate: true,
        };
        let b = StepMetrics {
            rise_time: Some(1.0),
            ..a
        };
        assert_eq!(compare(&a, &b).speed_improvement_pct, None);
        a.rise_time = Some(2.0);
        assert!(compare(&a, &b).speed_improvement_pct.is_some());
    }

    #[test]
    fn disturbance_window_deviation() {
        let t: Vec<f64> = (0..100).map(|k| k as f64 * 0.1).collect();
        let r: Vec<f64> = t.iter().map(|_| 1.0).collect();
        let y: Vec<f64> = t
            .iter()
            .map(|&t| if t >= 5.0 { 1.0 + 0.2 } else { 1.0 })
            .collect();
        let d = disturbance_rejection(&t, &y, &r, 5.0).unwrap();
        assert_relative_eq!(d.peak_deviation, 0.2, epsilon = 1e-12);
        assert_relative_eq!(d.rms_deviation, 0.2, epsilon = 1e-12);
        let before = disturbance_rejection(&t, &y, &r, 0.0).unwrap();
        assert!(before.rms_deviation < 0.2);
    }
}
