//! Experiment orchestration: reproducible trials, sweeps, and reports.
//!
//! A trial builds a scenario from its seed, initializes optimistic costs, and
//! loops plan -> fly -> update for a fixed number of passes. The global clock
//! never pauses: each pass departs at the step after the previous arrival, so
//! the stitched series indexes a gapless timeline. Convergence is the first
//! pass from which every remaining pass plans exactly the oracle-optimal path.

mod report;

pub use report::{emit_reports, emit_summary, fmt_sig};

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::estimator::{
    build_kf_with_model, case1_cost, estimate_resistance, fft_dominant_components, init_costs,
    update_case1, update_case2, update_cost_case34, CostTable, KfModel, QSchedule,
    ResistanceEstimates, StitchedSeries,
};
use crate::grid::{build_grid, EdgeId, GridGraph};
use crate::planner::{oracle_plan, plan};
use crate::traversal::{execute_pass, PassRecord};
use crate::windfield::{generate_signal, FreqMode, SignalParams, WindField};
use crate::{Error, Result};

/// Which estimate feeds the Case-3/4 cost updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    /// Stitched series alone.
    Stitch,
    /// Kalman-refined stitched series.
    Kf,
}

impl std::fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EstimatorKind::Stitch => write!(f, "stitch"),
            EstimatorKind::Kf => write!(f, "kf"),
        }
    }
}

/// Full description of one trial; identical configs give identical outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TrialConfig {
    /// Lattice columns (includes no extra rows; boundary rows live in `n2`).
    pub n1: usize,
    /// Lattice rows including the two boundary rows.
    pub n2: usize,
    pub dx1: f64,
    pub dx2: f64,
    /// 1 static, 2 static+noise, 3 time-varying, 4 time-varying+noise.
    pub case: u8,
    pub estimator: EstimatorKind,
    pub kf_model: KfModel,
    pub u0: f64,
    pub w_max: f64,
    pub dt: f64,
    pub n_terms: usize,
    pub freq_mode: FreqMode,
    pub freq_lo: f64,
    pub freq_hi: f64,
    pub noise_variance: f64,
    pub max_passes: u32,
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    /// Also update each reverse edge from the antisymmetric wind value.
    pub antisymmetric_updates: bool,
    pub kf_modes: usize,
    pub kf_r: f64,
    pub q_large: f64,
    pub q_small: f64,
    pub q_periods: f64,
}

impl Default for TrialConfig {
    fn default() -> Self {
        TrialConfig {
            n1: 5,
            n2: 7,
            dx1: 100.0,
            dx2: 250.0,
            case: 1,
            estimator: EstimatorKind::Stitch,
            kf_model: KfModel::MassSpringChain,
            u0: 15.0,
            w_max: 10.0,
            dt: 0.1,
            n_terms: 6,
            freq_mode: FreqMode::Period,
            freq_lo: 300.0,
            freq_hi: 500.0,
            noise_variance: 0.025,
            max_passes: 30,
            seed: 1,
            output_dir: None,
            antisymmetric_updates: true,
            kf_modes: 6,
            kf_r: 1e-3,
            q_large: 1.0,
            q_small: 1e-4,
            q_periods: 3.0,
        }
    }
}

impl TrialConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if self.n1 < 3 || self.n2 < 3 {
            return fail("grid must be at least 3x3 including boundary rows");
        }
        if !(self.dx1 > 0.0 && self.dx2 > 0.0) {
            return fail("edge lengths must be positive");
        }
        if !(1..=4).contains(&self.case) {
            return fail("case must be 1, 2, 3, or 4");
        }
        if self.estimator == EstimatorKind::Kf && !(self.case == 3 || self.case == 4) {
            return fail("the kf estimator is only meaningful for cases 3 and 4");
        }
        if !(self.u0 > self.w_max) {
            return fail("airspeed u0 must exceed w_max");
        }
        if !(self.dt > 0.0) {
            return fail("dt must be positive");
        }
        if self.max_passes < 1 {
            return fail("max_passes must be at least 1");
        }
        if self.n_terms < 1 {
            return fail("n_terms must be at least 1");
        }
        if !(self.freq_lo > 0.0 && self.freq_hi >= self.freq_lo) {
            return fail("frequency range must be positive and ordered");
        }
        if self.noise_variance < 0.0 {
            return fail("noise variance must be nonnegative");
        }
        if self.kf_modes < 1 {
            return fail("kf_modes must be at least 1");
        }
        Ok(())
    }

    /// Measurement noise is defined by the case, not the raw config value.
    pub fn effective_noise(&self) -> f64 {
        match self.case {
            2 | 4 => self.noise_variance,
            _ => 0.0,
        }
    }

    /// Traversable-block label in the common WxH form, e.g. "5x5" for a 5x7
    /// lattice.
    pub fn grid_label(&self) -> String {
        format!("{}x{}", self.n1, self.n2 - 2)
    }
}

/// Replayable scenario snapshot; vectors follow the canonical edge order of
/// the lattice rebuilt from the stored dimensions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub n1: usize,
    pub n2: usize,
    pub dx1: f64,
    pub dx2: f64,
    pub w_max: f64,
    pub resistances: Vec<f64>,
    pub coeffs: Vec<f64>,
    pub signal: SignalParams,
}

impl Scenario {
    pub fn rebuild_field(&self) -> Result<WindField> {
        let graph = Arc::new(build_grid(self.n1, self.n2, self.dx1, self.dx2)?);
        Ok(WindField::from_parts(
            graph,
            self.resistances.clone(),
            self.coeffs.clone(),
            self.signal.clone(),
            self.w_max,
        ))
    }
}

/// Cost table (and Kalman schedule state) right after each pass's updates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PassSnapshot {
    /// Non-traversable entries are infinite; JSON stores them as null.
    #[serde(with = "infinite_as_null")]
    pub cost_table: Vec<f64>,
    pub q_scale: Option<f64>,
}

mod infinite_as_null {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let opts: Vec<Option<f64>> =
            v.iter().map(|x| if x.is_finite() { Some(*x) } else { None }).collect();
        opts.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let opts: Vec<Option<f64>> = Vec::deserialize(d)?;
        Ok(opts.into_iter().map(|x| x.unwrap_or(f64::INFINITY)).collect())
    }
}

/// Final estimator trace over the trial's gapless step axis.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstTrace {
    pub start_step: u64,
    /// The active estimator's normalized-gradient estimate per step.
    pub estimate: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialResult {
    pub config: TrialConfig,
    pub scenario: Scenario,
    pub oracle_path: Vec<u32>,
    pub oracle_cost: f64,
    pub passes: Vec<PassRecord>,
    pub snapshots: Vec<PassSnapshot>,
    pub convergence_pass: Option<u32>,
    pub est_trace: Option<EstTrace>,
}

/// Synthesizes the scenario from the seed and runs the pass loop.
pub fn run_trial(config: &TrialConfig) -> Result<TrialResult> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let graph = Arc::new(build_grid(config.n1, config.n2, config.dx1, config.dx2)?);
    let signal = match config.case {
        1 | 2 => SignalParams::constant(config.effective_noise()),
        _ => generate_signal(
            config.n_terms,
            config.freq_mode,
            (config.freq_lo, config.freq_hi),
            config.effective_noise(),
            &mut rng,
        ),
    };
    let field = WindField::synthesize(graph, signal, config.w_max, &mut rng)?;
    run_passes(config, &field, rng)
}

/// Runs the pass loop on an externally supplied field (overrides, replays).
pub fn run_trial_on_field(config: &TrialConfig, field: &WindField) -> Result<TrialResult> {
    config.validate()?;
    let rng = ChaCha8Rng::seed_from_u64(config.seed);
    run_passes(config, field, rng)
}

fn run_passes(
    config: &TrialConfig,
    field: &WindField,
    mut rng: ChaCha8Rng,
) -> Result<TrialResult> {
    let graph = field.graph_arc();
    let oracle = oracle_plan(&graph, field, config.u0)?;
    let mut table = init_costs(&graph, config.u0, config.w_max);
    let mut series = StitchedSeries::new();
    let mut estimates = ResistanceEstimates::new(graph.edge_count());
    let schedule = QSchedule {
        q_large: config.q_large,
        q_small: config.q_small,
        periods_required: config.q_periods,
    };

    let mut passes: Vec<PassRecord> = Vec::with_capacity(config.max_passes as usize);
    let mut snapshots = Vec::with_capacity(config.max_passes as usize);
    let mut trace: Option<Vec<f64>> = None;
    let mut window_store: BTreeMap<EdgeId, Vec<StoredWindow>> = BTreeMap::new();
    let mut step = 0u64;

    for pass in 1..=config.max_passes {
        let planned = plan(&graph, &table, graph.start(), graph.goal(), &mut rng)?;
        let mut record =
            execute_pass(field, &planned.vertices, config.u0, config.dt, step, &mut rng)?;
        record.pass_index = pass;
        record.expected_cost = planned.expected_cost;
        step = record.windows.last().expect("paths have edges").exit_step + 1;

        // Wind values feeding cost updates are clamped to the known physical
        // bound; this keeps every cost at or above its optimistic
        // initialization.
        let clamp = |w: f64| w.clamp(-config.w_max, config.w_max);
        let mut q_used = None;
        match config.case {
            1 => {
                for w in &record.windows {
                    let measured = update_case1(&mut table, &graph, w, config.u0)?;
                    if config.antisymmetric_updates {
                        let rev = graph.edge_id(w.edge.1, w.edge.0)?;
                        table.set(rev, case1_cost(graph.distance(rev), config.u0, -measured)?);
                    }
                }
            }
            2 => {
                for w in &record.windows {
                    let mean = clamp(update_case2(&mut table, &graph, w, config.u0)?);
                    let id = graph.edge_id(w.edge.0, w.edge.1)?;
                    table.set(id, case1_cost(graph.distance(id), config.u0, mean)?);
                    if config.antisymmetric_updates {
                        let rev = graph.edge_id(w.edge.1, w.edge.0)?;
                        table.set(rev, case1_cost(graph.distance(rev), config.u0, -mean)?);
                    }
                }
            }
            _ => {
                for w in &record.windows {
                    if config.case == 3 {
                        series.stitch_window(w, config.dt)?;
                    } else {
                        series.stitch_window_noisy(w, config.dt)?;
                    }
                    // The constants are time-invariant, so every stored
                    // window of an edge stays valid; the reverse direction
                    // inherits the negated measurements.
                    let id = graph.edge_id(w.edge.0, w.edge.1)?;
                    window_store.entry(id).or_default().push(StoredWindow {
                        entry: w.entry_step,
                        exit: w.exit_step,
                        samples: w.samples.clone(),
                        pass,
                    });
                    if config.antisymmetric_updates {
                        window_store.entry(graph.reverse(id)).or_default().push(StoredWindow {
                            entry: w.entry_step,
                            exit: w.exit_step,
                            samples: w.samples.iter().map(|s| -s).collect(),
                            pass,
                        });
                    }
                }
                let estimate = refine_estimate(config, &series, &schedule, &mut q_used)?;
                // The normalized gradient is only defined up to its running
                // maximum; multiplying each constant by the series mean turns
                // it into the edge's average wind, the quantity the static
                // cost needs. Each edge is re-estimated against the current
                // series over the union of all its windows, so the whole
                // table shares one scale and repeated visits average the
                // stitching noise down.
                let grad_mean =
                    estimate.iter().sum::<f64>() / estimate.len().max(1) as f64;
                let mut samples = Vec::new();
                let mut grads = Vec::new();
                for (&id, stored) in &window_store {
                    samples.clear();
                    grads.clear();
                    for w in stored {
                        let a = (w.entry - series.start_step()) as usize;
                        let b = (w.exit - series.start_step()) as usize;
                        samples.extend_from_slice(&w.samples);
                        grads.extend_from_slice(&estimate[a..=b]);
                    }
                    match estimate_resistance(&samples, &grads) {
                        Ok(rhat) => {
                            let e = graph.edge(id);
                            let wind = clamp(rhat * grad_mean);
                            if apply_case34(&mut table, &graph, (e.from, e.to), wind, config.u0)? {
                                estimates.record(id, rhat, stored.last().expect("nonempty").pass);
                            }
                        }
                        // Gradient averaged to zero over this window: skip the
                        // update, the cost stays as it was.
                        Err(Error::IndeterminateResistance) => {}
                        Err(e) => return Err(e),
                    }
                }
                trace = Some(estimate);
            }
        }

        snapshots.push(PassSnapshot { cost_table: table.as_slice().to_vec(), q_scale: q_used });
        passes.push(record);
    }

    let convergence_pass = convergence_pass(&passes, &oracle.vertices);
    Ok(TrialResult {
        config: config.clone(),
        scenario: Scenario {
            n1: graph.n1(),
            n2: graph.n2(),
            dx1: graph.dx1(),
            dx2: graph.dx2(),
            w_max: field.w_max(),
            resistances: field.resistances().to_vec(),
            coeffs: field.coeffs().to_vec(),
            signal: field.signal().clone(),
        },
        oracle_path: oracle.vertices,
        oracle_cost: oracle.expected_cost,
        passes,
        snapshots,
        convergence_pass,
        est_trace: trace.map(|estimate| EstTrace { start_step: series.start_step(), estimate }),
    })
}

/// The normalized-gradient estimate for this pass: the stitched series, or
/// its causal Kalman refinement when the kf estimator is active and enough
/// data has accumulated for the spectral analysis.
fn refine_estimate(
    config: &TrialConfig,
    series: &StitchedSeries,
    schedule: &QSchedule,
    q_used: &mut Option<f64>,
) -> Result<Vec<f64>> {
    let edpx2 = series.edpx2();
    if config.estimator != EstimatorKind::Kf {
        return Ok(edpx2);
    }
    let components = match fft_dominant_components(&edpx2, config.dt, config.kf_modes) {
        Ok(c) => c,
        Err(Error::SeriesTooShort { .. }) => return Ok(edpx2),
        Err(e) => return Err(e),
    };
    let dominant_period = 1.0 / components[0].frequency;
    let q = schedule.q_scale(series.len(), config.dt, dominant_period);
    *q_used = Some(q);
    let mean = edpx2.iter().sum::<f64>() / edpx2.len() as f64;
    let centered: Vec<f64> = edpx2.iter().map(|v| v - mean).collect();
    let mut kf = build_kf_with_model(config.kf_model, &components, config.dt, q, config.kf_r)?;
    let filtered = kf.filter_series(&centered)?;
    Ok(filtered.into_iter().map(|v| v + mean).collect())
}

/// Applies a Case-3/4 cost update; a constant that would drive the ground
/// speed nonpositive is treated like an indeterminate estimate and skipped.
fn apply_case34(
    table: &mut CostTable,
    graph: &GridGraph,
    edge: (u32, u32),
    rhat: f64,
    u0: f64,
) -> Result<bool> {
    match update_cost_case34(table, graph, edge, rhat, u0) {
        Ok(()) => Ok(true),
        Err(Error::NonpositiveGroundSpeed(_)) => Ok(false),
        Err(e) => Err(e),
    }
}

/// Latest measurement window recorded for one directed edge.
struct StoredWindow {
    entry: u64,
    exit: u64,
    samples: Vec<f64>,
    pass: u32,
}

/// Smallest pass index from which every remaining pass took the oracle path.
fn convergence_pass(passes: &[PassRecord], oracle: &[u32]) -> Option<u32> {
    let mut first = None;
    for rec in passes.iter().rev() {
        if rec.path == oracle {
            first = Some(rec.pass_index);
        } else {
            break;
        }
    }
    first
}

/// One aggregated sweep cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub grid: String,
    pub case: u8,
    pub estimator: EstimatorKind,
    /// Median convergence pass; non-converged trials count as +infinity, so
    /// `None` means over half the trials never converged.
    pub median_passes: Option<f64>,
    pub min_passes: Option<u32>,
    pub max_passes: Option<u32>,
    pub converged: usize,
    pub trials: usize,
}

/// Runs `n_seeds` trials (seeds 1..=n_seeds) for every (grid, case) cell.
/// Grids are (label, n1, n2) with lattice dimensions.
pub fn run_sweep(
    template: &TrialConfig,
    grids: &[(String, usize, usize)],
    cases: &[u8],
    n_seeds: u64,
) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for (label, n1, n2) in grids {
        for &case in cases {
            let results: Vec<Option<u32>> = (1..=n_seeds)
                .into_par_iter()
                .map(|seed| {
                    let config = TrialConfig {
                        n1: *n1,
                        n2: *n2,
                        case,
                        seed,
                        output_dir: None,
                        ..template.clone()
                    };
                    run_trial(&config).map(|r| r.convergence_pass)
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(summarize_cell(label, case, template.estimator, &results));
        }
    }
    Ok(rows)
}

fn summarize_cell(
    label: &str,
    case: u8,
    estimator: EstimatorKind,
    results: &[Option<u32>],
) -> SweepRow {
    let mut sorted: Vec<Option<u32>> = results.to_vec();
    // None sorts last: treat as +infinity.
    sorted.sort_by_key(|v| v.map_or(u64::MAX, |p| p as u64));
    let n = sorted.len();
    let median_passes = if n == 0 {
        None
    } else if n % 2 == 1 {
        sorted[n / 2].map(|p| p as f64)
    } else {
        match (sorted[n / 2 - 1], sorted[n / 2]) {
            (Some(a), Some(b)) => Some((a as f64 + b as f64) / 2.0),
            _ => None,
        }
    };
    let converged: Vec<u32> = sorted.iter().flatten().copied().collect();
    SweepRow {
        grid: label.to_string(),
        case,
        estimator,
        median_passes,
        min_passes: converged.first().copied(),
        max_passes: converged.last().copied(),
        converged: converged.len(),
        trials: n,
    }
}
