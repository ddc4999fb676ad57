use rayon::prelude::*;

use crate::bathfn;
use crate::dynamics::{NoiseModel, Simulator};
use crate::error::{Error, Result};
use crate::protocols::{bell_from_singlet, prepare_initial, spinlock_purify, BellTarget, PreparationForm};
use crate::sequence::{cpmg_times, udd_times, PulseParams, Scheme, SequenceSpec, Timeline};
use crate::spinops::{correlation, CanonicalState, DensityMatrix, StateVector};

use super::config::{ExperimentConfig, Preparation};
use super::trace::{CorrelationTrace, TracePoint};

/// Sequence label of the no-decoupling control.
pub const CONTROL_LABEL: &str = "none";

/// Initial density matrix for the configured state and preparation.
///
/// Bell targets under a mixture preparation are synthesized from the singlet
/// with noise-free ideal pulses.
pub fn initial_state(cfg: &ExperimentConfig) -> Result<DensityMatrix> {
    let label = cfg.state.label();
    let form = match cfg.preparation {
        Preparation::Pure => return Ok(DensityMatrix::pure(&cfg.state.vector(), label)),
        Preparation::Form(form) => form,
    };
    let singlet = DensityMatrix::from_deviation(&prepare_initial(form), label)?;
    if cfg.state == CanonicalState::Singlet {
        return Ok(singlet);
    }
    let target = BellTarget::from_state(cfg.state).ok_or_else(|| {
        Error::Config(format!(
            "state `{label}` cannot be prepared from singlet order; use preparation = \"pure\""
        ))
    })?;
    let timeline = bell_from_singlet(target, &cfg.molecule, &PulseParams::ideal_pi())?;
    let sim = Simulator::new(cfg.molecule, NoiseModel::noiseless());
    Ok(sim.run(&singlet, &timeline, &[])?.final_state)
}

/// Correlation traces for every configured sequence plus the control, in
/// configuration order. A sequence that cannot be compiled or propagated
/// yields a failed trace and the scan moves on.
pub fn run_scan(cfg: &ExperimentConfig) -> Result<Vec<CorrelationTrace>> {
    cfg.validate()?;
    let rho0 = initial_state(cfg)?;
    let target = cfg.state.vector();
    let label = cfg.state.label();
    let mut traces = Vec::with_capacity(cfg.sequences.len() + 1);
    if cfg.include_control {
        traces.push(
            control_trace(cfg, &rho0, &target)
                .unwrap_or_else(|e| CorrelationTrace::failed(label, CONTROL_LABEL, e.to_string())),
        );
    }
    for spec in &cfg.sequences {
        traces.push(
            sequence_trace(cfg, spec, &rho0, &target)
                .unwrap_or_else(|e| CorrelationTrace::failed(label, spec.label(), e.to_string())),
        );
    }
    Ok(traces)
}

/// Grid times rounded to whole blocks of length `block`; duplicates dropped.
pub fn snap_to_blocks(grid: &[f64], block: f64) -> Vec<usize> {
    let mut counts: Vec<usize> = grid.iter().map(|t| (t / block).round() as usize).collect();
    counts.dedup();
    counts
}

fn simulator(cfg: &ExperimentConfig) -> Simulator {
    Simulator::new(cfg.molecule, cfg.noise.clone()).with_hamiltonian(cfg.hamiltonian)
}

fn sequence_trace(
    cfg: &ExperimentConfig,
    spec: &SequenceSpec,
    rho0: &DensityMatrix,
    target: &StateVector,
) -> Result<CorrelationTrace> {
    let single = SequenceSpec { repeats: 1, ..spec.clone() }.compile()?;
    let block = single.block_duration();
    let counts = snap_to_blocks(&cfg.grid, block);
    let n_max = counts.last().copied().unwrap_or(0).max(1);
    let timeline = single.with_repeats(n_max)?;
    let times: Vec<f64> = counts.iter().map(|&n| n as f64 * block).collect();
    sampled_trace(cfg, spec.label(), &timeline, &times, rho0, target)
}

fn control_trace(cfg: &ExperimentConfig, rho0: &DensityMatrix, target: &StateVector) -> Result<CorrelationTrace> {
    let end = *cfg.grid.last().expect("validated grid");
    let timeline = Timeline::from_segments(vec![crate::sequence::Segment::delay(end)], 1)?;
    sampled_trace(cfg, CONTROL_LABEL.to_string(), &timeline, &cfg.grid, rho0, target)
}

/// Runs one sequence for its configured number of repeats and samples at
/// every block boundary.
pub fn run_single(cfg: &ExperimentConfig, spec: &SequenceSpec) -> Result<CorrelationTrace> {
    cfg.validate()?;
    let rho0 = initial_state(cfg)?;
    let timeline = spec.compile()?;
    let block = timeline.block_duration();
    let times: Vec<f64> = (0..=timeline.repeats()).map(|n| n as f64 * block).collect();
    sampled_trace(cfg, spec.label(), &timeline, &times, &rho0, &cfg.state.vector())
}

fn sampled_trace(
    cfg: &ExperimentConfig,
    sequence: String,
    timeline: &Timeline,
    times: &[f64],
    rho0: &DensityMatrix,
    target: &StateVector,
) -> Result<CorrelationTrace> {
    let result = simulator(cfg).run(rho0, timeline, times)?;
    let points = times
        .iter()
        .zip(result.samples.iter().zip(&result.member_samples))
        .map(|(&time, ((_, mean), members))| {
            Ok(TracePoint {
                time,
                correlation: correlation(&mean.matrix, target)?,
                std_error: standard_error(members, target)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CorrelationTrace::new(cfg.state.label(), sequence, points))
}

/// Standard error of the mean of the per-member correlations.
fn standard_error(members: &[crate::spinops::Matrix4c], target: &StateVector) -> Result<f64> {
    let m = members.len();
    if m < 2 {
        return Ok(0.0);
    }
    let values = members
        .iter()
        .map(|rho| correlation(rho, target))
        .collect::<Result<Vec<_>>>()?;
    let mean = values.iter().sum::<f64>() / m as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
    Ok((var / m as f64).sqrt())
}

/// Spin-lock purification of the configured singlet preparation.
pub fn run_spinlock(cfg: &ExperimentConfig) -> Result<CorrelationTrace> {
    let form = match cfg.preparation {
        Preparation::Form(form) => form,
        Preparation::Pure => PreparationForm::default(),
    };
    spinlock_purify(&prepare_initial(form), &cfg.spinlock, &cfg.grid)
}

/// Number of points whose correlation strictly exceeds `threshold`.
pub fn count_above_threshold(trace: &CorrelationTrace, threshold: f64) -> usize {
    trace.points.iter().filter(|p| p.correlation > threshold).count()
}

/// One cell of the sequence x bath comparison.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterRow {
    pub sequence: String,
    pub bath: String,
    pub chi: f64,
    pub coherence: f64,
    pub error_estimate: f64,
    /// 1 for the highest coherence within the bath; 0 for failed cells.
    pub rank: usize,
    /// `None` when the cell was computed.
    pub failure: Option<String>,
}

/// `chi` and `W` for every (scheme, order) and bath at the configured
/// period, ranked by coherence within each bath.
pub fn run_filter_comparison(cfg: &ExperimentConfig) -> Result<Vec<FilterRow>> {
    cfg.validate()?;
    let fc = &cfg.filter;
    let mut cells = Vec::new();
    for bath in &fc.baths {
        for &order in &fc.orders {
            for &scheme in &fc.schemes {
                cells.push((bath, scheme, order));
            }
        }
    }
    let mut rows: Vec<FilterRow> = cells
        .par_iter()
        .map(|&(bath, scheme, order)| {
            let label = match scheme {
                Scheme::Cpmg => format!("CPMG-{order}"),
                _ => format!("UDD-{order}"),
            };
            let timing = match scheme {
                Scheme::Cpmg => cpmg_times(order, fc.period),
                Scheme::Udd => udd_times(order, fc.period),
                other => Err(Error::Config(format!("{} is not a pulse scheme", other.keyword()))),
            };
            match timing.and_then(|t| bathfn::chi(&t, &bath.spectrum)) {
                Ok(r) => FilterRow {
                    sequence: label,
                    bath: bath.name.clone(),
                    chi: r.chi,
                    coherence: r.coherence,
                    error_estimate: r.error_estimate,
                    rank: 0,
                    failure: None,
                },
                Err(e) => FilterRow {
                    sequence: label,
                    bath: bath.name.clone(),
                    chi: f64::NAN,
                    coherence: f64::NAN,
                    error_estimate: f64::NAN,
                    rank: 0,
                    failure: Some(e.to_string()),
                },
            }
        })
        .collect();
    for bath in &fc.baths {
        let mut idx: Vec<usize> = (0..rows.len())
            .filter(|&i| rows[i].bath == bath.name && rows[i].failure.is_none())
            .collect();
        // stable: ties keep configuration order
        idx.sort_by(|&a, &b| rows[b].coherence.total_cmp(&rows[a].coherence));
        for (rank, i) in idx.into_iter().enumerate() {
            rows[i].rank = rank + 1;
        }
    }
    Ok(rows)
}
