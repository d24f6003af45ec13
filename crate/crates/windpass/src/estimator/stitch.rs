//! Stitching per-edge measurement windows into one continuous signal.
//!
//! Each new window is rescaled so its first value continues the running
//! series, then concatenated; normalizing the result by its running maximum
//! magnitude recovers the shape of the shared pressure gradient up to scale.
//! The noiseless path anchors the scale on a backward-difference prediction
//! of the next sample; the noisy path anchors on quadratic least-squares fits
//! of both windows evaluated at the half-step seam.

use serde::{Deserialize, Serialize};

use crate::traversal::EdgeWindow;
use crate::{Error, Result};

/// Seam anchor magnitude below which a window cannot be rescaled; the window
/// is then shifted to continue the previous value instead.
pub const UNSCALABLE_GUARD: f64 = 1e-12;

/// Series-tail length (steps) used to predict the level of the next window
/// in the noisy stitch.
pub const TREND_TAIL: usize = 400;

/// The agent's running stitched signal.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct StitchedSeries {
    start_step: u64,
    values: Vec<f64>,
    max_abs: f64,
    sum: f64,
    last_window: Option<(u64, u64)>,
}

impl StitchedSeries {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn start_step(&self) -> u64 {
        self.start_step
    }

    pub fn last_window(&self) -> Option<(u64, u64)> {
        self.last_window
    }

    /// Raw (unnormalized) stitched values.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Orientation applied on top of max-normalization, chosen so the
    /// normalized signal has nonnegative mean. The gradient model is
    /// nonnegative by construction, so this pins the sign that pure
    /// max-magnitude normalization leaves free.
    fn orientation(&self) -> f64 {
        if self.sum < 0.0 {
            -1.0
        } else {
            1.0
        }
    }

    /// Normalized series: values / max |values|, oriented to nonnegative mean.
    pub fn edpx2(&self) -> Vec<f64> {
        let scale = self.orientation() / self.max_abs.max(f64::MIN_POSITIVE);
        self.values.iter().map(|v| v * scale).collect()
    }

    /// Normalized values over global steps `n..=m`.
    pub fn edpx2_window(&self, n: u64, m: u64) -> Vec<f64> {
        let scale = self.orientation() / self.max_abs.max(f64::MIN_POSITIVE);
        let a = (n - self.start_step) as usize;
        let b = (m - self.start_step) as usize;
        self.values[a..=b].iter().map(|v| v * scale).collect()
    }

    fn append(&mut self, window: &EdgeWindow, scaled: Vec<f64>) {
        if self.is_empty() {
            self.start_step = window.entry_step;
        }
        for v in &scaled {
            self.max_abs = self.max_abs.max(v.abs());
            self.sum += v;
        }
        self.values.extend_from_slice(&scaled);
        self.last_window = Some((window.entry_step, window.exit_step));
    }

    fn check_contiguity(&self, window: &EdgeWindow) {
        assert_eq!(
            window.entry_step,
            self.start_step + self.values.len() as u64,
            "windows must tile the step axis without gaps"
        );
    }

    /// Backward-difference derivative at the series end: second order when
    /// three points exist, first order with two, zero otherwise.
    fn end_derivative(&self, dt: f64) -> f64 {
        let n = self.values.len();
        if n >= 3 {
            (3.0 * self.values[n - 1] - 4.0 * self.values[n - 2] + self.values[n - 3]) / (2.0 * dt)
        } else if n == 2 {
            (self.values[n - 1] - self.values[n - 2]) / dt
        } else {
            0.0
        }
    }

    /// Appends a noiseless window (time-varying case without noise).
    ///
    /// The scale factor r = (w(n-1) + w'(n-1) dt) / sample(n) matches the new
    /// window to the predicted continuation of the series. A near-zero anchor
    /// sample makes the window unscalable; it is then shifted to continue the
    /// previous value instead.
    pub fn stitch_window(&mut self, window: &EdgeWindow, dt: f64) -> Result<()> {
        assert!(!window.samples.is_empty());
        if self.is_empty() {
            self.append(window, window.samples.clone());
            return Ok(());
        }
        self.check_contiguity(window);

        let last = *self.values.last().unwrap();
        let predicted = last + self.end_derivative(dt) * dt;
        let anchor = window.samples[0];
        let scaled = if anchor.abs() < UNSCALABLE_GUARD {
            window.samples.iter().map(|s| s - anchor + last).collect()
        } else {
            let r = predicted / anchor;
            window.samples.iter().map(|s| r * s).collect()
        };
        self.append(window, scaled);
        Ok(())
    }

    /// Appends a noisy window (time-varying case with noise).
    ///
    /// The new window and a tail of the series get quadratic least-squares
    /// fits, and the fitted values — not the raw samples — are appended. The
    /// scale factor matches levels over the whole span of the new window:
    /// the tail trend continued across it, divided by the new fit's mean.
    /// Anchoring on window means rather than a seam endpoint keeps the
    /// ratio's noise bounded by the window average even where the signal
    /// passes near zero; an endpoint anchor lets a single trough seam
    /// corrupt the running scale.
    pub fn stitch_window_noisy(&mut self, window: &EdgeWindow, dt: f64) -> Result<()> {
        let _ = dt;
        let fit = QuadFit::fit(&window.samples)?;
        let len = window.samples.len();
        let fitted: Vec<f64> = (0..len).map(|u| fit.eval(u as f64)).collect();
        if self.is_empty() {
            self.append(window, fitted);
            return Ok(());
        }
        self.check_contiguity(window);

        let last = *self.values.last().unwrap();
        // Trend of the series over a tail long enough to span several
        // windows: a fit over one short window would hand its coefficient
        // noise a long extrapolation lever arm.
        let tail_len = self.values.len().min(TREND_TAIL);
        let tail = &self.values[self.values.len() - tail_len..];
        let tail_fit = QuadFit::fit(tail).ok();

        let residual_rms = {
            let ss: f64 = window
                .samples
                .iter()
                .enumerate()
                .map(|(u, s)| (s - fitted[u]).powi(2))
                .sum();
            (ss / len as f64).sqrt()
        };
        let mean_se = residual_rms / (len as f64).sqrt();
        let window_mean: f64 = fitted.iter().sum::<f64>() / len as f64;

        // A window mean buried in its own fit noise (a zero-coefficient edge,
        // in practice) cannot be rescaled; shift it to continue the series.
        let scaled: Vec<f64> = if window_mean.abs() < UNSCALABLE_GUARD.max(3.0 * mean_se) {
            fitted.iter().map(|v| v - fitted[0] + last).collect()
        } else {
            // Predicted series level at the center of the new window: linear
            // continuation from the tail's end. The tail fit's curvature is
            // not extrapolated — its coefficient noise grows quadratically
            // with the lever arm, while the neglected true curvature of the
            // slow gradient costs around a percent.
            let predicted = match tail_fit {
                Some(f) => {
                    let end = tail_len as f64 - 1.0;
                    f.eval(end) + f.slope(end) * (len as f64 + 1.0) / 2.0
                }
                None => last,
            };
            let r = predicted / window_mean;
            fitted.iter().map(|v| r * v).collect()
        };
        self.append(window, scaled);
        Ok(())
    }
}

/// Quadratic least-squares fit y = c0 + c1 u + c2 u^2 over local indices
/// u = 0..len-1, solved on centered coordinates.
#[derive(Debug, Clone, Copy)]
pub struct QuadFit {
    center: f64,
    c0: f64,
    c1: f64,
    c2: f64,
}

impl QuadFit {
    pub fn fit(samples: &[f64]) -> Result<Self> {
        let n = samples.len();
        if n < 3 {
            return Err(Error::DegenerateWindow);
        }
        let center = (n as f64 - 1.0) / 2.0;
        let (mut s1, mut s2, mut s3, mut s4) = (0.0, 0.0, 0.0, 0.0);
        let (mut t0, mut t1, mut t2) = (0.0, 0.0, 0.0);
        for (k, &y) in samples.iter().enumerate() {
            let u = k as f64 - center;
            let u2 = u * u;
            s1 += u;
            s2 += u2;
            s3 += u2 * u;
            s4 += u2 * u2;
            t0 += y;
            t1 += u * y;
            t2 += u2 * y;
        }
        let s0 = n as f64;
        // 3x3 normal equations by Cramer's rule.
        let det = s0 * (s2 * s4 - s3 * s3) - s1 * (s1 * s4 - s2 * s3) + s2 * (s1 * s3 - s2 * s2);
        if det.abs() < 1e-12 {
            return Err(Error::DegenerateWindow);
        }
        let c0 = (t0 * (s2 * s4 - s3 * s3) - s1 * (t1 * s4 - t2 * s3) + s2 * (t1 * s3 - t2 * s2))
            / det;
        let c1 = (s0 * (t1 * s4 - t2 * s3) - t0 * (s1 * s4 - s2 * s3) + s2 * (s1 * t2 - s2 * t1))
            / det;
        let c2 = (s0 * (s2 * t2 - s3 * t1) - s1 * (s1 * t2 - s3 * t0) + t0 * (s1 * s3 - s2 * s2))
            / det;
        Ok(QuadFit { center, c0, c1, c2 })
    }

    /// Evaluates the fit at local index `u` (may be fractional or outside the
    /// fitted range).
    pub fn eval(&self, u: f64) -> f64 {
        let x = u - self.center;
        self.c0 + self.c1 * x + self.c2 * x * x
    }

    /// Derivative of the fit at local index `u`, per index step.
    pub fn slope(&self, u: f64) -> f64 {
        self.c1 + 2.0 * self.c2 * (u - self.center)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn window(entry: u64, samples: Vec<f64>) -> EdgeWindow {
        let exit = entry + samples.len() as u64 - 1;
        EdgeWindow {
            edge: (1, 2),
            entry_step: entry,
            exit_step: exit,
            samples,
            exact_crossing_time: 0.0,
        }
    }

    /// Synthesizes contiguous windows from edges with the given coefficients,
    /// all observing dpx2(t) = 0.5 + 0.5 cos(2 pi t / period + phase).
    fn synth_windows(
        coeffs: &[f64],
        lens: &[usize],
        dt: f64,
        period: f64,
        phase: f64,
        noise: f64,
        seed: u64,
    ) -> (Vec<EdgeWindow>, Vec<f64>) {
        assert_eq!(coeffs.len(), lens.len());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut truth = Vec::new();
        let mut windows = Vec::new();
        let mut step = 0u64;
        for (&c, &len) in coeffs.iter().zip(lens) {
            let mut samples = Vec::with_capacity(len);
            for k in 0..len {
                let t = (step + k as u64) as f64 * dt;
                let d = 0.5 + 0.5 * (2.0 * std::f64::consts::PI * t / period + phase).cos();
                truth.push(d);
                let v = if noise > 0.0 {
                    noise.sqrt() * rng.sample::<f64, _>(rand_distr::StandardNormal)
                } else {
                    0.0
                };
                samples.push(c * (d + v));
            }
            windows.push(window(step, samples));
            step += len as u64;
        }
        (windows, truth)
    }

    #[test]
    fn noiseless_stitch_tracks_signal_up_to_scale() {
        let dt = 0.1;
        let (windows, truth) =
            synth_windows(&[2.0, 4.0, 1.5], &[120, 90, 150], dt, 400.0, 0.9, 0.0, 0);
        let mut series = StitchedSeries::new();
        for w in &windows {
            series.stitch_window(w, dt).unwrap();
        }
        let est = series.edpx2();
        let max_truth = truth.iter().fold(0.0_f64, |m, v| m.max(*v));
        for (e, d) in est.iter().zip(&truth) {
            let rel = (e - d / max_truth).abs() / (d / max_truth).abs().max(1e-6);
            assert!(rel < 0.001, "estimate {e} vs scaled truth {}", d / max_truth);
        }
    }

    #[test]
    fn constant_signal_normalizes_to_one() {
        let dt = 0.1;
        let mut series = StitchedSeries::new();
        series.stitch_window(&window(0, vec![3.0; 50]), dt).unwrap();
        series.stitch_window(&window(50, vec![7.0; 40]), dt).unwrap();
        series.stitch_window(&window(90, vec![0.5; 30]), dt).unwrap();
        for v in series.edpx2() {
            assert!((v - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn single_window_is_pure_normalization() {
        let mut series = StitchedSeries::new();
        let samples = vec![1.0, 2.0, 4.0, 3.0];
        series.stitch_window(&window(0, samples.clone()), 0.1).unwrap();
        let est = series.edpx2();
        for (e, s) in est.iter().zip(&samples) {
            assert_eq!(*e, s / 4.0);
        }
        assert_eq!(series.last_window(), Some((0, 3)));
    }

    #[test]
    fn negative_first_coefficient_is_reoriented() {
        // A headwind edge stitched first would leave the normalized signal
        // globally negated; orientation flips it back.
        let dt = 0.1;
        let (windows, truth) =
            synth_windows(&[-2.0, 4.0], &[100, 100], dt, 400.0, 0.3, 0.0, 0);
        let mut series = StitchedSeries::new();
        for w in &windows {
            series.stitch_window(w, dt).unwrap();
        }
        let est = series.edpx2();
        let max_truth = truth.iter().fold(0.0_f64, |m, v| m.max(*v));
        for (e, d) in est.iter().zip(&truth) {
            assert!((e - d / max_truth).abs() < 0.001);
        }
    }

    #[test]
    fn quadratic_fit_is_exact_on_quadratics() {
        let samples: Vec<f64> =
            (0..200).map(|u| 1.5 - 0.3 * u as f64 + 0.002 * (u as f64).powi(2)).collect();
        let fit = QuadFit::fit(&samples).unwrap();
        for (u, s) in samples.iter().enumerate() {
            assert!((fit.eval(u as f64) - s).abs() < 1e-9);
        }
        assert!(matches!(QuadFit::fit(&[1.0, 2.0]), Err(Error::DegenerateWindow)));
    }

    #[test]
    fn noisy_fit_recovers_constant_level() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let sigma = (0.025_f64).sqrt();
        let samples: Vec<f64> = (0..200)
            .map(|_| 3.0 + sigma * rng.sample::<f64, _>(rand_distr::StandardNormal))
            .collect();
        let fit = QuadFit::fit(&samples).unwrap();
        let fitted_mean: f64 =
            (0..200).map(|u| fit.eval(u as f64)).sum::<f64>() / 200.0;
        let se = sigma / (200.0_f64).sqrt();
        assert!((fitted_mean - 3.0).abs() < 3.0 * se);
    }

    #[test]
    fn noisy_stitch_shrinks_seam_jumps() {
        // Paired comparison on 100 seeds: the fitted seam discontinuity should
        // beat the raw-sample discontinuity most of the time.
        let dt = 0.1;
        let mut fitted_wins = 0;
        for seed in 0..100 {
            let (windows, _) =
                synth_windows(&[2.0, 4.0], &[120, 90], dt, 400.0, 1.1, 0.025, seed);
            let mut series = StitchedSeries::new();
            for w in &windows {
                series.stitch_window_noisy(w, dt).unwrap();
            }
            let seam = windows[1].entry_step as usize;
            let vals = series.values();
            let stitched_jump = (vals[seam] - vals[seam - 1]).abs();

            // Raw comparison: scale the second window by the raw anchor ratio.
            let raw_r = windows[0].samples.last().unwrap() / windows[1].samples[0];
            let raw_jump =
                (raw_r * windows[1].samples[0] - windows[0].samples.last().unwrap()).abs();
            // The raw anchor forces a zero jump at the seam sample itself, so
            // compare one step past the seam where raw noise resurfaces.
            let raw_next = raw_r * windows[1].samples[1];
            let raw_jump = raw_jump.max((raw_next - windows[0].samples.last().unwrap()).abs());
            let stitched_next = (vals[seam + 1] - vals[seam - 1]).abs();
            if stitched_jump.max(stitched_next) <= raw_jump {
                fitted_wins += 1;
            }
        }
        assert!(fitted_wins >= 90, "fitted seam won only {fitted_wins}/100");
    }

    #[test]
    fn noisy_stitch_tracks_signal() {
        let dt = 0.1;
        let (windows, truth) =
            synth_windows(&[2.0, 4.0, 1.5, 3.0], &[120, 90, 150, 110], dt, 400.0, 0.9, 0.025, 7);
        let mut series = StitchedSeries::new();
        for w in &windows {
            series.stitch_window_noisy(w, dt).unwrap();
        }
        let est = series.edpx2();
        let max_truth = truth.iter().fold(0.0_f64, |m, v| m.max(*v));
        let mean_err: f64 = est
            .iter()
            .zip(&truth)
            .map(|(e, d)| (e - d / max_truth).abs())
            .sum::<f64>()
            / est.len() as f64;
        assert!(mean_err < 0.05, "mean abs error {mean_err}");
    }

    #[test]
    fn unscalable_window_falls_back_to_continuity() {
        let dt = 0.1;
        let mut series = StitchedSeries::new();
        series.stitch_window(&window(0, vec![2.0; 30]), dt).unwrap();
        // Zero-coefficient edge: all samples identically zero.
        series.stitch_window(&window(30, vec![0.0; 20]), dt).unwrap();
        let vals = series.values();
        for v in &vals[30..] {
            assert_eq!(*v, 2.0);
        }
    }
}

