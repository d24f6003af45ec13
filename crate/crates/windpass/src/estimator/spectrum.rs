//! Dominant-component extraction from the stitched series.

use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One spectral line of the analyzed series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralComponent {
    /// Hertz.
    pub frequency: f64,
    pub amplitude: f64,
    /// Radians, the cosine-series phase of this bin.
    pub phase: f64,
}

/// Discrete Fourier transform of the mean-removed series, returning the
/// `n_modes` non-DC bins of largest magnitude ordered by dominance, ties
/// broken toward lower frequency.
pub fn fft_dominant_components(
    series: &[f64],
    dt: f64,
    n_modes: usize,
) -> Result<Vec<SpectralComponent>> {
    let len = series.len();
    let needed = 2 * n_modes + 1;
    if len < needed {
        return Err(Error::SeriesTooShort { len, needed });
    }
    let mean = series.iter().sum::<f64>() / len as f64;
    let mut buf: Vec<Complex<f64>> =
        series.iter().map(|v| Complex::new(v - mean, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(len).process(&mut buf);

    let mut bins: Vec<(usize, f64)> = (1..=len / 2)
        .map(|b| (b, buf[b].norm()))
        .collect();
    bins.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));

    Ok(bins
        .into_iter()
        .take(n_modes)
        .map(|(b, mag)| SpectralComponent {
            frequency: b as f64 / (len as f64 * dt),
            amplitude: 2.0 * mag / len as f64,
            phase: buf[b].arg(),
        })
        .collect())
}
