//! Discrete-time simulation of one SUAV pass.
//!
//! The vehicle flies at a fixed air-relative speed u0; its ground speed on an
//! edge is u0 plus the true (noiseless) wind at each step. Position is
//! integrated with piecewise-constant speed per step; the crossing instant is
//! interpolated inside the final step for cost accounting, but the next edge
//! always starts at the next integer step and the fractional remainder is
//! dropped.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::windfield::WindField;
use crate::{Error, Result};

/// Measurement window recorded while crossing one edge.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EdgeWindow {
    pub edge: (u32, u32),
    /// Global step at which the vehicle enters the edge.
    pub entry_step: u64,
    /// Global step during which the crossing completes.
    pub exit_step: u64,
    /// Measured wind at every step entry..=exit (noisy when the scenario is).
    pub samples: Vec<f64>,
    /// Interpolated crossing time in seconds.
    pub exact_crossing_time: f64,
}

/// One full start-to-goal flight.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PassRecord {
    pub pass_index: u32,
    pub path: Vec<u32>,
    pub windows: Vec<EdgeWindow>,
    /// Sum of exact crossing times, seconds.
    pub incurred_cost: f64,
    /// Planner's path cost at plan time, seconds; filled in by the harness.
    pub expected_cost: f64,
    pub start_step: u64,
}

/// Integrates the crossing of a single edge starting at `entry_step`.
pub fn traverse_edge<R: Rng>(
    field: &WindField,
    edge: (u32, u32),
    entry_step: u64,
    u0: f64,
    dt: f64,
    rng: &mut R,
) -> Result<EdgeWindow> {
    if !(u0 > field.w_max()) {
        return Err(Error::PossibleStall { u0, w_max: field.w_max() });
    }
    if !(dt > 0.0) {
        return Err(Error::NonpositiveTimeStep);
    }
    let id = field.graph().edge_id(edge.0, edge.1)?;
    let distance = field.graph().distance(id);

    let mut samples = Vec::new();
    let mut covered = 0.0_f64;
    let mut k = entry_step;
    loop {
        let t = k as f64 * dt;
        let ground = u0 + field.true_wind(id, t);
        if ground <= 0.0 {
            return Err(Error::NonpositiveGroundSpeed(ground));
        }
        samples.push(field.measure_wind(id, k, dt, rng));
        let next = covered + ground * dt;
        if next >= distance {
            let within = (distance - covered) / ground;
            let exact = (k - entry_step) as f64 * dt + within;
            return Ok(EdgeWindow {
                edge,
                entry_step,
                exit_step: k,
                samples,
                exact_crossing_time: exact,
            });
        }
        covered = next;
        k += 1;
    }
}

/// Chains [`traverse_edge`] over a path; each edge starts at the step after
/// the previous exit. `pass_index` and `expected_cost` are left for the
/// caller to fill.
pub fn execute_pass<R: Rng>(
    field: &WindField,
    path: &[u32],
    u0: f64,
    dt: f64,
    start_step: u64,
    rng: &mut R,
) -> Result<PassRecord> {
    if path.len() < 2 {
        return Err(Error::DegenerateQuery);
    }
    let mut windows = Vec::with_capacity(path.len() - 1);
    let mut step = start_step;
    let mut incurred = 0.0;
    for hop in path.windows(2) {
        let (i, j) = (hop[0], hop[1]);
        field
            .graph()
            .edge_id(i, j)
            .map_err(|_| Error::DisconnectedPath(i, j))?;
        let window = traverse_edge(field, (i, j), step, u0, dt, rng)?;
        step = window.exit_step + 1;
        incurred += window.exact_crossing_time;
        windows.push(window);
    }
    Ok(PassRecord {
        pass_index: 0,
        path: path.to_vec(),
        windows,
        incurred_cost: incurred,
        expected_cost: 0.0,
        start_step,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;
    use crate::windfield::{SignalParams, SignalTerm, WindField};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    /// Field with one hand-set coefficient map over a 5x7 lattice.
    fn field_with(coeff_map: &[((u32, u32), f64)], signal: SignalParams) -> WindField {
        let g = Arc::new(build_grid(5, 7, 100.0, 250.0).unwrap());
        let mut coeffs = vec![0.0; g.edge_count()];
        for &((i, j), c) in coeff_map {
            let id = g.edge_id(i, j).unwrap();
            coeffs[id.0] = c;
            coeffs[g.reverse(id).0] = -c;
        }
        let resist = vec![0.0; g.edge_count()];
        WindField::from_parts(g, resist, coeffs, signal, 10.0)
    }

    #[test]
    fn zero_wind_crossing_time() {
        let field = field_with(&[], SignalParams::constant(0.0));
        let w = traverse_edge(&field, (6, 11), 0, 15.0, 0.1, &mut rng(1)).unwrap();
        assert!((w.exact_crossing_time - 250.0 / 15.0).abs() < 1e-9);
        assert_eq!(w.exit_step - w.entry_step, 166);
        assert_eq!(w.samples.len(), 167);
    }

    #[test]
    fn constant_tailwind_crossing_time() {
        let field = field_with(&[((6, 11), 10.0)], SignalParams::constant(0.0));
        let w = traverse_edge(&field, (6, 11), 0, 15.0, 0.1, &mut rng(1)).unwrap();
        assert!((w.exact_crossing_time - 10.0).abs() < 1e-9);
        assert!(w.samples.iter().all(|&s| s == 10.0));
    }

    #[test]
    fn sinusoidal_wind_matches_fine_integration() {
        let signal = SignalParams {
            d0: 0.5,
            terms: vec![SignalTerm { amplitude: 0.5, frequency: 1.0 / 40.0, phase: 0.7 }],
            noise_variance: 0.0,
        };
        let field = field_with(&[((6, 11), 8.0)], signal);
        let coarse = traverse_edge(&field, (6, 11), 0, 15.0, 0.1, &mut rng(1)).unwrap();
        let fine = traverse_edge(&field, (6, 11), 0, 15.0, 0.001, &mut rng(1)).unwrap();
        let rel = (coarse.exact_crossing_time - fine.exact_crossing_time).abs()
            / fine.exact_crossing_time;
        assert!(rel < 0.01, "relative error {rel}");
    }

    #[test]
    fn stall_and_bad_step_rejected() {
        let field = field_with(&[], SignalParams::constant(0.0));
        assert!(matches!(
            traverse_edge(&field, (6, 11), 0, 9.0, 0.1, &mut rng(1)),
            Err(Error::PossibleStall { .. })
        ));
        assert!(matches!(
            traverse_edge(&field, (6, 11), 0, 15.0, 0.0, &mut rng(1)),
            Err(Error::NonpositiveTimeStep)
        ));
    }

    #[test]
    fn pass_chains_windows_consecutively() {
        let field = field_with(&[((6, 11), 4.0), ((11, 16), 2.0)], SignalParams::constant(0.0));
        let single = execute_pass(&field, &[6, 11], 15.0, 0.1, 0, &mut rng(1)).unwrap();
        assert_eq!(single.windows.len(), 1);
        assert_eq!(single.incurred_cost, single.windows[0].exact_crossing_time);

        let two = execute_pass(&field, &[6, 11, 16], 15.0, 0.1, 5, &mut rng(1)).unwrap();
        assert_eq!(two.windows[0].entry_step, 5);
        assert_eq!(two.windows[1].entry_step, two.windows[0].exit_step + 1);
        let total: f64 = two.windows.iter().map(|w| w.exact_crossing_time).sum();
        assert_eq!(two.incurred_cost, total);
        let count: usize = two.windows.iter().map(|w| w.samples.len()).sum();
        let expect: u64 =
            two.windows.iter().map(|w| w.exit_step - w.entry_step + 1).sum();
        assert_eq!(count as u64, expect);
    }

    #[test]
    fn seam_discontinuity_for_differing_coefficients() {
        // Two edges observing the same smooth signal with coefficient ratio 2:
        // the jump at the seam is about half the signal value there, far above
        // any dt-sized quantity.
        let signal = SignalParams {
            d0: 0.5,
            terms: vec![SignalTerm { amplitude: 0.5, frequency: 1.0 / 400.0, phase: 0.3 }],
            noise_variance: 0.0,
        };
        let field = field_with(&[((6, 11), 4.0), ((11, 16), 2.0)], signal);
        let rec = execute_pass(&field, &[6, 11, 16], 15.0, 0.1, 0, &mut rng(1)).unwrap();
        let last_of_first = *rec.windows[0].samples.last().unwrap();
        let first_of_second = rec.windows[1].samples[0];
        let jump = (last_of_first - first_of_second).abs();
        assert!((jump - last_of_first / 2.0).abs() / (last_of_first / 2.0) < 0.02);
        assert!(jump > 0.5);
    }

    #[test]
    fn disconnected_path_rejected() {
        let field = field_with(&[], SignalParams::constant(0.0));
        assert!(matches!(
            execute_pass(&field, &[6, 16], 15.0, 0.1, 0, &mut rng(1)),
            Err(Error::DisconnectedPath(6, 16))
        ));
    }

    #[test]
    fn halving_dt_barely_moves_incurred_cost() {
        let mut r = rng(17);
        for seed in 0..5u64 {
            let g = Arc::new(build_grid(5, 7, 100.0, 250.0).unwrap());
            let mut sr = rng(seed);
            let signal = crate::windfield::generate_signal(
                6,
                crate::windfield::FreqMode::Period,
                (300.0, 500.0),
                0.0,
                &mut sr,
            );
            let field = WindField::synthesize(g, signal, 10.0, &mut sr).unwrap();
            let path = [6, 7, 12, 17, 22, 27, 28, 29, 30];
            let a = execute_pass(&field, &path, 15.0, 0.1, 0, &mut r).unwrap();
            let b = execute_pass(&field, &path, 15.0, 0.05, 0, &mut r).unwrap();
            let rel = (a.incurred_cost - b.incurred_cost).abs() / b.incurred_cost;
            assert!(rel < 0.01, "seed {seed}: refinement moved cost by {rel}");
        }
    }
}
