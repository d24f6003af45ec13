//! Kalman filtering of the normalized gradient signal.
//!
//! The default state models the signal as the displacement of the last of N
//! fictitious mass-spring systems: state (y_1..y_N, y'_1..y'_N, y''_1..y''_N),
//! position and velocity rows integrate forward with step dt, acceleration
//! rows couple back to the positions through a tridiagonal stiffness block,
//! and the observation picks out y_N. Stiffness values are the square roots
//! of the dominant angular frequencies of the series.
//!
//! An alternative `OscillatorBank` model keeps one exact rotation pair per
//! dominant component and observes their sum; it is not the default but
//! tracks multi-tone periodic signals much more faithfully.

use nalgebra::{DMatrix, DVector, RowDVector};
use serde::{Deserialize, Serialize};

use super::spectrum::SpectralComponent;
use crate::{Error, Result};

/// Which state-space construction backs the filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KfModel {
    /// Coupled mass-spring chain observing the last displacement.
    MassSpringChain,
    /// Independent rotation pair per component, observation sums them.
    OscillatorBank,
}

#[derive(Debug, Clone)]
pub struct KfState {
    pub model: KfModel,
    pub n_modes: usize,
    pub xhat: DVector<f64>,
    pub p: DMatrix<f64>,
    pub a: DMatrix<f64>,
    pub c: RowDVector<f64>,
    pub q_scale: f64,
    pub r: f64,
    /// Stiffness values of the mass-spring chain (empty for the bank model).
    pub stiffness: Vec<f64>,
}

/// Builds the default mass-spring-chain filter from dominant components,
/// most dominant first.
pub fn build_kf(
    components: &[SpectralComponent],
    dt: f64,
    q_scale: f64,
    r_var: f64,
) -> Result<KfState> {
    build_kf_with_model(KfModel::MassSpringChain, components, dt, q_scale, r_var)
}

pub fn build_kf_with_model(
    model: KfModel,
    components: &[SpectralComponent],
    dt: f64,
    q_scale: f64,
    r_var: f64,
) -> Result<KfState> {
    if components.is_empty() {
        return Err(Error::EmptyFilter);
    }
    if !(dt > 0.0) {
        return Err(Error::NonpositiveTimeStep);
    }
    match model {
        KfModel::MassSpringChain => build_chain(components, dt, q_scale, r_var),
        KfModel::OscillatorBank => build_bank(components, dt, q_scale, r_var),
    }
}

fn build_chain(
    components: &[SpectralComponent],
    dt: f64,
    q_scale: f64,
    r_var: f64,
) -> Result<KfState> {
    let n = components.len();
    let dim = 3 * n;
    // Stiffness: square roots of the dominant angular frequencies.
    let stiffness: Vec<f64> =
        components.iter().map(|c| (2.0 * std::f64::consts::PI * c.frequency).sqrt()).collect();

    let mut a = DMatrix::zeros(dim, dim);
    // Positions and velocities integrate into the next partition.
    for i in 0..2 * n {
        a[(i, i)] = 1.0;
        a[(i, i + n)] = dt;
    }
    // Acceleration rows: tridiagonal stiffness coupling over the positions,
    // with the asymmetric last row kept as printed; the remaining
    // acceleration columns stay zero.
    if n == 1 {
        a[(2 * n, 0)] = -stiffness[0];
    } else {
        a[(2 * n, 0)] = -(stiffness[0] + stiffness[1]);
        a[(2 * n, 1)] = stiffness[1];
        for l in 2..n {
            let row = 2 * n + l - 1;
            a[(row, l - 2)] = -stiffness[l - 1];
            a[(row, l - 1)] = -(stiffness[l - 1] + stiffness[l]);
            a[(row, l)] = stiffness[l];
        }
        let last = 3 * n - 1;
        a[(last, n - 2)] = stiffness[n - 2];
        a[(last, n - 1)] = -stiffness[n - 1];
    }

    let mut c = RowDVector::zeros(dim);
    c[n - 1] = 1.0;

    // Prior from the FFT lines: each hidden mode starts on its component.
    let mut xhat = DVector::zeros(dim);
    let mut p = DMatrix::zeros(dim, dim);
    for (l, comp) in components.iter().enumerate() {
        let omega = 2.0 * std::f64::consts::PI * comp.frequency;
        xhat[l] = comp.amplitude * comp.phase.cos();
        xhat[n + l] = -comp.amplitude * omega * comp.phase.sin();
        xhat[2 * n + l] = -comp.amplitude * omega * omega * comp.phase.cos();
        p[(l, l)] = comp.amplitude.powi(2) + 1e-2;
        p[(n + l, n + l)] = (comp.amplitude * omega).powi(2) + 1e-2;
        p[(2 * n + l, 2 * n + l)] = (comp.amplitude * omega * omega).powi(2) + 1e-2;
    }

    Ok(KfState {
        model: KfModel::MassSpringChain,
        n_modes: n,
        xhat,
        p,
        a,
        c,
        q_scale,
        r: r_var,
        stiffness,
    })
}

fn build_bank(
    components: &[SpectralComponent],
    dt: f64,
    q_scale: f64,
    r_var: f64,
) -> Result<KfState> {
    let n = components.len();
    let dim = 2 * n;
    let mut a = DMatrix::zeros(dim, dim);
    let mut c = RowDVector::zeros(dim);
    let mut xhat = DVector::zeros(dim);
    let mut p = DMatrix::zeros(dim, dim);
    for (l, comp) in components.iter().enumerate() {
        let theta = 2.0 * std::f64::consts::PI * comp.frequency * dt;
        let (s, co) = theta.sin_cos();
        a[(2 * l, 2 * l)] = co;
        a[(2 * l, 2 * l + 1)] = -s;
        a[(2 * l + 1, 2 * l)] = s;
        a[(2 * l + 1, 2 * l + 1)] = co;
        c[2 * l] = 1.0;
        xhat[2 * l] = comp.amplitude * comp.phase.cos();
        xhat[2 * l + 1] = comp.amplitude * comp.phase.sin();
        let v = comp.amplitude.powi(2) + 1e-2;
        p[(2 * l, 2 * l)] = v;
        p[(2 * l + 1, 2 * l + 1)] = v;
    }
    Ok(KfState {
        model: KfModel::OscillatorBank,
        n_modes: n,
        xhat,
        p,
        a,
        c,
        q_scale,
        r: r_var,
        stiffness: Vec::new(),
    })
}

impl KfState {
    pub fn set_q_scale(&mut self, q_scale: f64) {
        self.q_scale = q_scale;
    }

    /// Current estimate of the observed signal.
    pub fn estimate(&self) -> f64 {
        (&self.c * &self.xhat)[0]
    }

    /// One predict-update cycle on measurement `z`; returns the posterior
    /// estimate of the observed signal.
    pub fn step(&mut self, z: f64) -> Result<f64> {
        // Predict.
        self.xhat = &self.a * &self.xhat;
        self.p = &self.a * &self.p * self.a.transpose();
        for i in 0..self.p.nrows() {
            self.p[(i, i)] += self.q_scale;
        }

        // Update with innovation gain; Joseph form keeps P symmetric PSD.
        let s = (&self.c * &self.p * self.c.transpose())[0] + self.r;
        if !(s > 0.0) {
            return Err(Error::CovarianceCollapse);
        }
        let gain = (&self.p * self.c.transpose()) / s;
        let innovation = z - (&self.c * &self.xhat)[0];
        self.xhat += &gain * innovation;
        let identity = DMatrix::identity(self.p.nrows(), self.p.ncols());
        let ikc = identity - &gain * &self.c;
        self.p = &ikc * &self.p * ikc.transpose() + &gain * self.r * gain.transpose();
        self.p = (&self.p + self.p.transpose()) * 0.5;
        Ok(self.estimate())
    }

    /// Runs the filter over a whole series, returning the per-step estimates.
    pub fn filter_series(&mut self, series: &[f64]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(series.len());
        for &z in series {
            out.push(self.step(z)?);
        }
        Ok(out)
    }
}

/// Process-noise schedule: large while the stitched series spans fewer than
/// `periods_required` of the estimated fundamental period, small afterwards.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct QSchedule {
    pub q_large: f64,
    pub q_small: f64,
    pub periods_required: f64,
}

impl Default for QSchedule {
    fn default() -> Self {
        QSchedule { q_large: 1.0, q_small: 1e-4, periods_required: 3.0 }
    }
}

impl QSchedule {
    /// `dominant_period` comes from the latest FFT analysis; a nonpositive
    /// value means no usable estimate yet.
    pub fn q_scale(&self, series_len: usize, dt: f64, dominant_period: f64) -> f64 {
        if dominant_period > 0.0 && series_len as f64 * dt >= self.periods_required * dominant_period
        {
            self.q_small
        } else {
            self.q_large
        }
    }
}
