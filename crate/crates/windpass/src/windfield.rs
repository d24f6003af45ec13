//! Ground-truth wind synthesis.
//!
//! The environment is driven by a single scalar pressure-gradient signal
//! dpx2(t): every edge's wind speed is coeff(i,j) * dpx2(t). The per-edge
//! coefficients come from a resistor-network analogy: vertical edges carry
//! random resistances in [0.5, 1], horizontal edges have zero resistance
//! (each row is equipotential), and a unit pressure difference between the
//! top and bottom boundary rows drives a mass-conserving flow. A final common
//! scale factor caps the fastest wind anywhere at w_max.

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::grid::{Axis, EdgeId, GridGraph};
use crate::{Error, Result};

/// Number of points used when a maximum over time must be sampled densely.
pub const DENSE_SAMPLES: usize = 10_000;

/// One periodic component of the gradient signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalTerm {
    /// Amplitude (dimensionless).
    pub amplitude: f64,
    /// Frequency in hertz.
    pub frequency: f64,
    /// Phase in radians, in [0, 2*pi).
    pub phase: f64,
}

/// Parameters of the pressure-gradient signal dpx2(t).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalParams {
    /// Constant offset.
    pub d0: f64,
    /// Periodic components; empty for a constant (static-wind) signal.
    pub terms: Vec<SignalTerm>,
    /// Variance of the additive Gaussian term; 0 disables noise.
    pub noise_variance: f64,
}

/// How the frequency draw is interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FreqMode {
    /// Draw frequencies directly in hertz from the range.
    Literal,
    /// Draw periods in seconds from the range; frequencies are their inverses.
    Period,
}

impl SignalParams {
    /// Constant signal dpx2 = 1 for the static-wind cases.
    pub fn constant(noise_variance: f64) -> Self {
        SignalParams { d0: 1.0, terms: Vec::new(), noise_variance }
    }

    /// Noiseless signal value at time `t`.
    pub fn eval(&self, t: f64) -> f64 {
        let mut v = self.d0;
        for term in &self.terms {
            v += term.amplitude * (2.0 * std::f64::consts::PI * term.frequency * t + term.phase).cos();
        }
        v
    }

    /// Signal value at time `t` with the Gaussian term included when
    /// `include_noise` is set and the variance is nonzero.
    pub fn eval_noisy<R: Rng>(&self, t: f64, include_noise: bool, rng: &mut R) -> f64 {
        let mut v = self.eval(t);
        if include_noise && self.noise_variance > 0.0 {
            let normal = Normal::new(0.0, self.noise_variance.sqrt()).expect("valid std dev");
            v += normal.sample(rng);
        }
        v
    }

    /// Time average of the noiseless signal (the cosine terms average out).
    pub fn mean(&self) -> f64 {
        self.d0
    }

    /// Window length covering one fundamental period of the slowest component.
    pub fn fundamental_window(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| 1.0 / t.frequency)
            .fold(1.0_f64, f64::max)
    }

    /// Max of |dpx2| over a dense time sample of one fundamental window.
    pub fn dense_max_abs(&self) -> f64 {
        if self.terms.is_empty() {
            return self.d0.abs();
        }
        let window = self.fundamental_window();
        (0..DENSE_SAMPLES)
            .map(|k| self.eval(window * k as f64 / DENSE_SAMPLES as f64).abs())
            .fold(0.0_f64, f64::max)
    }
}

/// Draws a random periodic signal: amplitudes uniform on [0, 1] then
/// normalized to sum to 1/2, frequencies per `mode` over `freq_range`,
/// phases uniform on [0, 2*pi), offset fixed at 1/2.
pub fn generate_signal<R: Rng>(
    n_terms: usize,
    mode: FreqMode,
    freq_range: (f64, f64),
    noise_variance: f64,
    rng: &mut R,
) -> SignalParams {
    assert!(n_terms >= 1, "need at least one term");
    assert!(freq_range.0 > 0.0 && freq_range.1 >= freq_range.0, "bad frequency range");
    let raw: Vec<f64> = (0..n_terms).map(|_| rng.random_range(0.0..1.0)).collect();
    let sum: f64 = raw.iter().sum();
    let mut terms = Vec::with_capacity(n_terms);
    for a in raw {
        let frequency = match mode {
            FreqMode::Literal => rng.random_range(freq_range.0..=freq_range.1),
            FreqMode::Period => 1.0 / rng.random_range(freq_range.0..=freq_range.1),
        };
        let phase = rng.random_range(0.0..2.0 * std::f64::consts::PI);
        terms.push(SignalTerm { amplitude: 0.5 * a / sum, frequency, phase });
    }
    SignalParams { d0: 0.5, terms, noise_variance }
}

/// Ground-truth wind field over a grid.
#[derive(Debug, Clone)]
pub struct WindField {
    graph: Arc<GridGraph>,
    /// Per directed edge; vertical edges share one undirected value,
    /// horizontal edges are zero.
    resistances: Vec<f64>,
    /// Proportionality constant per directed edge (m/s per unit gradient);
    /// antisymmetric between an edge and its reverse.
    coeffs: Vec<f64>,
    signal: SignalParams,
    w_max: f64,
}

impl WindField {
    /// Full synthesis pipeline: sample resistances, solve the network, scale.
    pub fn synthesize<R: Rng>(
        graph: Arc<GridGraph>,
        signal: SignalParams,
        w_max: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let resistances = sample_resistances(&graph, rng);
        let coeffs = solve_network(&graph, &resistances)?;
        let coeffs = scale_to_wmax(coeffs, &signal, w_max)?;
        Ok(WindField { graph, resistances, coeffs, signal, w_max })
    }

    /// Assembles a field from stored parts (scenario replay, tests).
    pub fn from_parts(
        graph: Arc<GridGraph>,
        resistances: Vec<f64>,
        coeffs: Vec<f64>,
        signal: SignalParams,
        w_max: f64,
    ) -> Self {
        WindField { graph, resistances, coeffs, signal, w_max }
    }

    pub fn graph(&self) -> &GridGraph {
        &self.graph
    }

    pub fn graph_arc(&self) -> Arc<GridGraph> {
        Arc::clone(&self.graph)
    }

    pub fn signal(&self) -> &SignalParams {
        &self.signal
    }

    pub fn w_max(&self) -> f64 {
        self.w_max
    }

    pub fn coeff(&self, id: EdgeId) -> f64 {
        self.coeffs[id.0]
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn resistances(&self) -> &[f64] {
        &self.resistances
    }

    /// True (noiseless) wind speed along `edge` at time `t`; positive means
    /// tailwind for travel in the edge's direction.
    pub fn true_wind(&self, edge: EdgeId, t: f64) -> f64 {
        self.coeffs[edge.0] * self.signal.eval(t)
    }

    /// Measured wind at discrete step `k`: the Gaussian term inside dpx2 is
    /// included whenever the scenario's noise variance is nonzero.
    pub fn measure_wind<R: Rng>(&self, edge: EdgeId, k: u64, dt: f64, rng: &mut R) -> f64 {
        self.coeffs[edge.0] * self.signal.eval_noisy(k as f64 * dt, true, rng)
    }
}

/// Draws one Uniform[0.5, 1] resistance per undirected vertical edge;
/// horizontal edges get zero. Draw order follows the canonical edge list, so
/// equal seeds give identical maps.
pub fn sample_resistances<R: Rng>(graph: &GridGraph, rng: &mut R) -> Vec<f64> {
    let mut resist = vec![0.0; graph.edge_count()];
    for (id, e) in graph.edges() {
        if matches!(e.axis, Axis::X2) && e.from < e.to {
            let r = rng.random_range(0.5..=1.0);
            resist[id.0] = r;
            resist[graph.reverse(id).0] = r;
        }
    }
    resist
}

/// Solves the resistor network under a unit pressure difference between the
/// bottom and top boundary rows.
///
/// Zero-resistance horizontal edges make every row equipotential, so each row
/// gap is a parallel bundle of its vertical edges and the gaps are in series.
/// Vertical coefficients are the per-edge flows; horizontal coefficients
/// follow from nodal mass conservation, accumulated left to right with zero
/// net horizontal flow entering each row's left end.
pub fn solve_network(graph: &GridGraph, resistances: &[f64]) -> Result<Vec<f64>> {
    let n1 = graph.n1();
    let n2 = graph.n2();

    // Per row gap g (between rows g and g+1): parallel conductance.
    let mut gap_conductance = vec![0.0_f64; n2 - 1];
    for gap in 1..n2 {
        for col in 1..=n1 {
            let v = graph.vertex_at(gap, col);
            let u = graph.vertex_at(gap + 1, col);
            let id = graph.edge_id(v, u)?;
            let r = resistances[id.0];
            if !(r > 0.0) {
                return Err(Error::SingularNetwork);
            }
            gap_conductance[gap - 1] += 1.0 / r;
        }
    }
    let total_resistance: f64 = gap_conductance.iter().map(|c| 1.0 / c).sum();
    let total_flow = 1.0 / total_resistance;

    let mut coeffs = vec![0.0_f64; graph.edge_count()];

    // Vertical edges: flow = (gap pressure drop) / edge resistance, positive
    // in the upward direction.
    for gap in 1..n2 {
        let drop = total_flow / gap_conductance[gap - 1];
        for col in 1..=n1 {
            let v = graph.vertex_at(gap, col);
            let u = graph.vertex_at(gap + 1, col);
            let up = graph.edge_id(v, u)?;
            let flow = drop / resistances[up.0];
            coeffs[up.0] = flow;
            coeffs[graph.reverse(up).0] = -flow;
        }
    }

    // Horizontal edges: cumulative sum of net vertical inflow across each
    // traversable row, anchored at zero on the left end.
    for row in 2..n2 {
        let mut carry = 0.0_f64;
        for col in 1..=n1 {
            let v = graph.vertex_at(row, col);
            let below = graph.edge_id(graph.vertex_at(row - 1, col), v)?;
            let above = graph.edge_id(v, graph.vertex_at(row + 1, col))?;
            carry += coeffs[below.0] - coeffs[above.0];
            if col < n1 {
                let right = graph.edge_id(v, graph.vertex_at(row, col + 1))?;
                coeffs[right.0] = carry;
                coeffs[graph.reverse(right).0] = -carry;
            }
        }
        debug_assert!(carry.abs() < 1e-9, "row conservation residual {carry}");
    }

    Ok(coeffs)
}

/// Multiplies all coefficients by one common factor so that the densely
/// sampled maximum of |coeff * dpx2(t)| equals `w_max`.
pub fn scale_to_wmax(mut coeffs: Vec<f64>, signal: &SignalParams, w_max: f64) -> Result<Vec<f64>> {
    let max_coeff = coeffs.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
    if max_coeff == 0.0 {
        return Err(Error::AllZeroCoeffs);
    }
    let factor = w_max / (max_coeff * signal.dense_max_abs());
    for c in &mut coeffs {
        *c *= factor;
    }
    Ok(coeffs)
}
