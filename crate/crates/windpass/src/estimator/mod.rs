//! The agent's estimation stack.
//!
//! Edge costs start from the optimistic full-tailwind bound and are refreshed
//! after every pass. Static cases use the measured wind directly (one value,
//! or the window mean under noise). Time-varying cases go through the
//! stitched-gradient machinery: windows are concatenated into one continuous
//! normalized signal, each edge's proportionality constant is estimated from
//! time averages, and the cost uses that constant as a static wind value.

mod kalman;
mod spectrum;
mod stitch;

pub use kalman::{build_kf, build_kf_with_model, KfModel, KfState, QSchedule};
pub use spectrum::{fft_dominant_components, SpectralComponent};
pub use stitch::StitchedSeries;

use serde::{Deserialize, Serialize};

use crate::grid::{EdgeId, GridGraph};
use crate::traversal::EdgeWindow;
use crate::{Error, Result};

/// Gradient-average magnitude below which a resistance estimate is skipped.
pub const RESISTANCE_GUARD: f64 = 1e-9;

/// Per-directed-edge travel-time estimates, seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostTable {
    costs: Vec<f64>,
}

impl CostTable {
    /// Table with every entry infinite (non-traversable placeholder).
    pub fn infinite(edge_count: usize) -> Self {
        CostTable { costs: vec![f64::INFINITY; edge_count] }
    }

    pub fn get(&self, id: EdgeId) -> f64 {
        self.costs[id.0]
    }

    pub fn set(&mut self, id: EdgeId, cost: f64) {
        self.costs[id.0] = cost;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.costs
    }
}

/// Optimistic initialization: every traversable edge assumes the highest
/// possible tailwind, a lower bound on its true cost.
pub fn init_costs(graph: &GridGraph, u0: f64, w_max: f64) -> CostTable {
    assert!(u0 + w_max > 0.0);
    let mut table = CostTable::infinite(graph.edge_count());
    for (id, e) in graph.edges() {
        if e.traversable {
            table.set(id, graph.distance(id) / (u0 + w_max));
        }
    }
    table
}

/// Travel time from one constant measured wind value.
pub fn case1_cost(distance: f64, u0: f64, measured: f64) -> Result<f64> {
    let ground = u0 + measured;
    if ground <= 0.0 {
        return Err(Error::NonpositiveGroundSpeed(ground));
    }
    Ok(distance / ground)
}

/// Travel time from the mean of the window's measured wind values.
pub fn case2_cost(distance: f64, u0: f64, samples: &[f64]) -> Result<f64> {
    assert!(!samples.is_empty(), "window must hold at least one sample");
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    case1_cost(distance, u0, mean)
}

/// Static travel-time approximation from an estimated proportionality
/// constant (used as a wind value).
pub fn case34_cost(distance: f64, u0: f64, rhat: f64) -> Result<f64> {
    case1_cost(distance, u0, rhat)
}

/// Updates the table from a static noiseless window.
pub fn update_case1(
    table: &mut CostTable,
    graph: &GridGraph,
    window: &EdgeWindow,
    u0: f64,
) -> Result<f64> {
    let id = graph.edge_id(window.edge.0, window.edge.1)?;
    let measured = window.samples[0];
    let cost = case1_cost(graph.distance(id), u0, measured)?;
    table.set(id, cost);
    Ok(measured)
}

/// Updates the table from a static noisy window (window-mean wind).
pub fn update_case2(
    table: &mut CostTable,
    graph: &GridGraph,
    window: &EdgeWindow,
    u0: f64,
) -> Result<f64> {
    let id = graph.edge_id(window.edge.0, window.edge.1)?;
    let mean = window.samples.iter().sum::<f64>() / window.samples.len() as f64;
    let cost = case1_cost(graph.distance(id), u0, mean)?;
    table.set(id, cost);
    Ok(mean)
}

/// Ratio of time-averaged measured wind to the time-averaged normalized
/// gradient estimate over the same steps.
pub fn estimate_resistance(samples: &[f64], edpx2_window: &[f64]) -> Result<f64> {
    assert_eq!(samples.len(), edpx2_window.len(), "window/estimate length mismatch");
    let wind_mean = samples.iter().sum::<f64>() / samples.len() as f64;
    let grad_mean = edpx2_window.iter().sum::<f64>() / edpx2_window.len() as f64;
    if grad_mean.abs() < RESISTANCE_GUARD {
        return Err(Error::IndeterminateResistance);
    }
    Ok(wind_mean / grad_mean)
}

/// Spec-shaped wrapper: estimate against the stitched series itself.
pub fn estimate_resistance_from_series(
    series: &StitchedSeries,
    window: &EdgeWindow,
) -> Result<f64> {
    let est = series.edpx2_window(window.entry_step, window.exit_step);
    estimate_resistance(&window.samples, &est)
}

/// Updates the table from an estimated proportionality constant.
pub fn update_cost_case34(
    table: &mut CostTable,
    graph: &GridGraph,
    edge: (u32, u32),
    rhat: f64,
    u0: f64,
) -> Result<()> {
    let id = graph.edge_id(edge.0, edge.1)?;
    let cost = case34_cost(graph.distance(id), u0, rhat)?;
    table.set(id, cost);
    Ok(())
}

/// The agent's per-edge proportionality-constant estimates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResistanceEstimates {
    rhat: Vec<Option<f64>>,
    last_update_pass: Vec<Option<u32>>,
}

impl ResistanceEstimates {
    pub fn new(edge_count: usize) -> Self {
        ResistanceEstimates {
            rhat: vec![None; edge_count],
            last_update_pass: vec![None; edge_count],
        }
    }

    pub fn record(&mut self, id: EdgeId, value: f64, pass: u32) {
        self.rhat[id.0] = Some(value);
        self.last_update_pass[id.0] = Some(pass);
    }

    pub fn get(&self, id: EdgeId) -> Option<f64> {
        self.rhat[id.0]
    }

    pub fn last_update(&self, id: EdgeId) -> Option<u32> {
        self.last_update_pass[id.0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;
    use crate::traversal::EdgeWindow;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn window(edge: (u32, u32), samples: Vec<f64>) -> EdgeWindow {
        let m = samples.len() as u64 - 1;
        EdgeWindow { edge, entry_step: 0, exit_step: m, samples, exact_crossing_time: 1.0 }
    }

    #[test]
    fn optimistic_init_values() {
        let g = build_grid(5, 7, 100.0, 250.0).unwrap();
        let table = init_costs(&g, 15.0, 10.0);
        assert_eq!(table.get(g.edge_id(6, 11).unwrap()), 10.0);
        assert_eq!(table.get(g.edge_id(6, 7).unwrap()), 4.0);
        let no_wind = init_costs(&g, 15.0, 0.0);
        assert!((no_wind.get(g.edge_id(6, 11).unwrap()) - 250.0 / 15.0).abs() < 1e-12);
        // Non-traversable boundary edges stay infinite.
        assert!(table.get(g.edge_id(1, 6).unwrap()).is_infinite());
    }

    #[test]
    fn case1_arithmetic() {
        assert_eq!(case1_cost(250.0, 15.0, 5.0).unwrap(), 12.5);
        assert_eq!(case1_cost(250.0, 15.0, -10.0).unwrap(), 50.0);
        assert!((case1_cost(250.0, 15.0, 0.0).unwrap() - 250.0 / 15.0).abs() < 1e-12);
        assert!(matches!(
            case1_cost(250.0, 15.0, -15.0),
            Err(Error::NonpositiveGroundSpeed(_))
        ));
    }

    #[test]
    fn case2_means() {
        assert_eq!(case2_cost(250.0, 15.0, &[5.0, 5.0, 5.0]).unwrap(), 12.5);
        assert_eq!(case2_cost(250.0, 15.0, &[4.0, 6.0]).unwrap(), 12.5);
        // Concentration: 1e4 noisy samples of true wind 5 land within 0.5%.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sigma = (0.025_f64).sqrt() * 5.0;
        let samples: Vec<f64> = (0..10_000)
            .map(|_| 5.0 + sigma * rng.sample::<f64, _>(rand_distr::StandardNormal))
            .collect();
        let cost = case2_cost(250.0, 15.0, &samples).unwrap();
        assert!((cost - 12.5).abs() / 12.5 < 0.005, "cost {cost}");
    }

    #[test]
    fn case_updates_write_table() {
        let g = build_grid(5, 7, 100.0, 250.0).unwrap();
        let mut table = init_costs(&g, 15.0, 10.0);
        let w = window((6, 11), vec![5.0; 4]);
        let measured = update_case1(&mut table, &g, &w, 15.0).unwrap();
        assert_eq!(measured, 5.0);
        assert_eq!(table.get(g.edge_id(6, 11).unwrap()), 12.5);
        // The reverse edge is untouched here; the harness decides that.
        assert_eq!(table.get(g.edge_id(11, 6).unwrap()), 10.0);

        let w = window((6, 7), vec![1.0, 3.0]);
        let mean = update_case2(&mut table, &g, &w, 15.0).unwrap();
        assert_eq!(mean, 2.0);
        assert!((table.get(g.edge_id(6, 7).unwrap()) - 100.0 / 17.0).abs() < 1e-12);
    }

    #[test]
    fn resistance_ratio() {
        let rhat = estimate_resistance(&[4.0; 10], &[0.5; 10]).unwrap();
        assert_eq!(rhat, 8.0);
        // Constant gradient: the estimate equals the measured wind and the
        // cost reduces to the static update.
        let samples = [6.0, 6.0, 6.0];
        let rhat = estimate_resistance(&samples, &[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(case34_cost(250.0, 15.0, rhat).unwrap(), case2_cost(250.0, 15.0, &samples).unwrap());
        assert!(matches!(
            estimate_resistance(&[4.0, 4.0], &[1e-12, -1e-12]),
            Err(Error::IndeterminateResistance)
        ));
    }

    #[test]
    fn case34_arithmetic() {
        assert!((case34_cost(250.0, 15.0, 8.0).unwrap() - 250.0 / 23.0).abs() < 1e-12);
        assert!((case34_cost(250.0, 15.0, 0.0).unwrap() - 250.0 / 15.0).abs() < 1e-12);
        assert_eq!(case34_cost(250.0, 15.0, -5.0).unwrap(), 25.0);
    }

    #[test]
    fn noiseless_updates_never_undershoot_optimism() {
        // Any bounded measured wind keeps costs at or above the init value,
        // with equality only at full tailwind.
        let g = build_grid(5, 7, 100.0, 250.0).unwrap();
        let init = init_costs(&g, 15.0, 10.0);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let id = g.edge_id(6, 11).unwrap();
        for _ in 0..200 {
            let wind: f64 = rng.random_range(-10.0..=10.0);
            let cost = case1_cost(250.0, 15.0, wind).unwrap();
            assert!(cost >= init.get(id) - 1e-12);
        }
        assert_eq!(case1_cost(250.0, 15.0, 10.0).unwrap(), init.get(id));
    }
}
