//! Density-matrix propagation through decoupling timelines.
//!
//! Each segment of a timeline has a constant Hamiltonian and is propagated with
//! an exact exponential (a 4x4 unitary, or a 16x16 Lindblad superoperator when
//! relaxation is on). Ensemble members draw a static common offset, an RF scale
//! factor and, optionally, Ornstein-Uhlenbeck frequency noise; the reported
//! state is the ensemble mean, reduced in member order.

pub mod noise;
pub mod propagator;

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::sequence::{PulseParams, SegmentKind, Timeline};
use crate::spinops::{hermitian_defect, DensityMatrix, Matrix4c, SpinOperator, POSITIVITY_SLACK};

pub use noise::{sample_ou_trajectory, DephasingMode, Distribution, NoiseModel, OuProcess, OuSampler};
pub use propagator::Propagator;

/// Chemical-shift difference and scalar coupling of the spin pair, in Hz.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MoleculeParams {
    pub delta_nu: f64,
    pub j_coupling: f64,
}

impl MoleculeParams {
    pub fn new(delta_nu: f64, j_coupling: f64) -> Result<Self> {
        if !delta_nu.is_finite() || !(j_coupling >= 0.0 && j_coupling.is_finite()) {
            return Err(Error::domain("need finite delta_nu and J >= 0"));
        }
        Ok(MoleculeParams {
            delta_nu,
            j_coupling,
        })
    }

    /// The proton pair used in the storage experiments: 270.4 Hz apart, J = 4.1 Hz.
    pub fn proton_pair() -> Self {
        MoleculeParams {
            delta_nu: 270.4,
            j_coupling: 4.1,
        }
    }
}

/// Per-spin longitudinal and transverse relaxation times, seconds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RelaxationParams {
    pub t1: [f64; 2],
    pub t2: [f64; 2],
}

impl RelaxationParams {
    pub fn new(t1: f64, t2: f64) -> Result<Self> {
        let r = RelaxationParams {
            t1: [t1, t1],
            t2: [t2, t2],
        };
        r.validate()?;
        Ok(r)
    }

    /// Measured proton values: T1 = 6.3 s, T2 = 2.3 s.
    pub fn proton_pair() -> Self {
        RelaxationParams {
            t1: [6.3, 6.3],
            t2: [2.3, 2.3],
        }
    }

    pub fn validate(&self) -> Result<()> {
        for k in 0..2 {
            let (t1, t2) = (self.t1[k], self.t2[k]);
            if !(t1 > 0.0) || !(t2 > 0.0) {
                return Err(Error::domain("relaxation times must be positive"));
            }
            if t2 > 2.0 * t1 {
                return Err(Error::domain(format!(
                    "T2 = {t2} s exceeds 2 T1 = {} s (negative dephasing rate)",
                    2.0 * t1
                )));
            }
        }
        Ok(())
    }
}

/// Which internal Hamiltonian acts during delays.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum HamiltonianKind {
    /// Chemical shift difference plus scalar coupling.
    #[default]
    Free,
    /// Spin-locked pair: scalar coupling only.
    Equivalence,
}

const TWO_PI: f64 = 2.0 * PI;

/// `2 pi [ (dnu/2)(Iz1 - Iz2) + J I1.I2 + offset (Iz1 + Iz2) ]` in rad/s, rotating frame at the mean frequency.
pub fn free_hamiltonian(mol: &MoleculeParams, common_offset: f64) -> SpinOperator {
    use crate::spinops::Spin;
    let shift = (SpinOperator::iz(Spin::First) - SpinOperator::iz(Spin::Second)) * (mol.delta_nu / 2.0);
    let coupling = SpinOperator::scalar_coupling() * mol.j_coupling;
    let offset = SpinOperator::iz(Spin::Both) * common_offset;
    (shift + coupling + offset) * TWO_PI
}

/// `2 pi J I1.I2`, the pair under a spin-lock.
pub fn equivalence_hamiltonian(mol: &MoleculeParams) -> SpinOperator {
    SpinOperator::scalar_coupling() * (TWO_PI * mol.j_coupling)
}

/// RF term `2 pi kappa nu (cos phi Ix + sin phi Iy)` on the pulse's spins.
pub fn drive_term(pulse: &PulseParams, kappa: f64) -> SpinOperator {
    let axis = transverse_axis(pulse);
    axis * (TWO_PI * kappa * pulse.nominal_amplitude())
}

fn transverse_axis(pulse: &PulseParams) -> SpinOperator {
    SpinOperator::ix(pulse.selectivity) * pulse.phase.cos() + SpinOperator::iy(pulse.selectivity) * pulse.phase.sin()
}

/// Free Hamiltonian plus the RF drive; shift and coupling stay on during the pulse.
pub fn pulse_hamiltonian(pulse: &PulseParams, kappa: f64, mol: &MoleculeParams) -> SpinOperator {
    free_hamiltonian(mol, 0.0) + drive_term(pulse, kappa)
}

/// Instantaneous rotation by `kappa * flip_angle` about the pulse axis.
pub fn ideal_rotation(pulse: &PulseParams, kappa: f64) -> Matrix4c {
    propagator::unitary(&transverse_axis(pulse), kappa * pulse.flip_angle)
}

/// `U rho U^dag` with `U = exp(-i H dt)`.
pub fn propagate_unitary(rho: &DensityMatrix, h: &SpinOperator, dt: f64) -> Result<DensityMatrix> {
    propagator::check_step(dt)?;
    let u = propagator::unitary(h, dt);
    Ok(DensityMatrix::new(
        propagator::apply_unitary(&u, &rho.matrix),
        rho.label.clone(),
    ))
}

/// One exact step of the Lindblad equation with per-spin T1 (infinite
/// temperature amplitude damping) and pure dephasing at `1/T2 - 1/(2 T1)`.
pub fn lindblad_step(rho: &DensityMatrix, h: &SpinOperator, relax: &RelaxationParams, dt: f64) -> Result<DensityMatrix> {
    relax.validate()?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::domain(format!("time step {dt} must be > 0")));
    }
    let s = propagator::lindblad_superop(h, Some(relax), dt);
    Ok(DensityMatrix::new(
        propagator::apply_superop(&s, &rho.matrix),
        rho.label.clone(),
    ))
}

/// Worst-case physicality figures over the recorded states.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Diagnostics {
    pub min_eigenvalue: f64,
    pub max_trace_drift: f64,
    pub max_hermitian_defect: f64,
}

impl Diagnostics {
    fn new() -> Self {
        Diagnostics {
            min_eigenvalue: f64::INFINITY,
            max_trace_drift: 0.0,
            max_hermitian_defect: 0.0,
        }
    }

    fn observe(&mut self, rho: &Matrix4c, initial_trace: Complex64) {
        let ev = crate::spinops::hermitian_eigenvalues(rho);
        self.min_eigenvalue = self.min_eigenvalue.min(ev[0]);
        self.max_trace_drift = self.max_trace_drift.max((rho.trace() - initial_trace).norm());
        self.max_hermitian_defect = self.max_hermitian_defect.max(hermitian_defect(rho));
    }
}

pub const TRACE_DRIFT_LIMIT: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct PropagationResult {
    pub final_state: DensityMatrix,
    /// Ensemble-mean state at each requested time.
    pub samples: Vec<(f64, DensityMatrix)>,
    /// Per-member states, indexed `[sample][member]`.
    pub member_samples: Vec<Vec<Matrix4c>>,
    pub member_finals: Vec<Matrix4c>,
    pub diagnostics: Diagnostics,
}

/// Molecule, free-evolution Hamiltonian and noise for a propagation run.
#[derive(Clone, Debug, PartialEq)]
pub struct Simulator {
    pub molecule: MoleculeParams,
    pub hamiltonian: HamiltonianKind,
    pub noise: NoiseModel,
}

struct Member {
    kappa: f64,
    base: SpinOperator,
    noise_ops: Vec<SpinOperator>,
    ou: Vec<OuSampler>,
    rng: rand_chacha::ChaCha8Rng,
}

impl Simulator {
    pub fn new(molecule: MoleculeParams, noise: NoiseModel) -> Self {
        Simulator {
            molecule,
            hamiltonian: HamiltonianKind::Free,
            noise,
        }
    }

    pub fn with_hamiltonian(mut self, kind: HamiltonianKind) -> Self {
        self.hamiltonian = kind;
        self
    }

    pub fn base_hamiltonian(&self, common_offset: f64) -> SpinOperator {
        match self.hamiltonian {
            HamiltonianKind::Free => free_hamiltonian(&self.molecule, common_offset),
            HamiltonianKind::Equivalence => {
                equivalence_hamiltonian(&self.molecule)
                    + SpinOperator::iz(crate::spinops::Spin::Both) * (TWO_PI * common_offset)
            }
        }
    }

    fn member(&self, index: usize) -> Member {
        use crate::spinops::Spin;
        let mut rng = self.noise.member_rng(index);
        let offset = self.noise.static_offset.sample(&mut rng);
        let kappa = self.noise.rf_scale.sample(&mut rng);
        let noise_ops = match self.noise.dephasing_mode {
            DephasingMode::Collective => vec![SpinOperator::iz(Spin::Both)],
            DephasingMode::Independent => vec![SpinOperator::iz(Spin::First), SpinOperator::iz(Spin::Second)],
        };
        let ou = match self.noise.dephasing {
            Some(p) => noise_ops.iter().map(|_| OuSampler::new(p, &mut rng)).collect(),
            None => Vec::new(),
        };
        Member {
            kappa,
            base: self.base_hamiltonian(offset),
            noise_ops,
            ou,
            rng,
        }
    }

    /// Propagates `rho0` through `timeline` for every ensemble member and
    /// averages. `sample_at` must be ascending and within the timeline.
    pub fn run(&self, rho0: &DensityMatrix, timeline: &Timeline, sample_at: &[f64]) -> Result<PropagationResult> {
        self.noise.validate()?;
        let total = timeline.total_duration();
        let tol = 1e-12 * total.max(1e-9);
        if sample_at.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::domain("sample times must be ascending"));
        }
        if sample_at.iter().any(|&s| !(s >= -tol && s <= total + tol)) {
            return Err(Error::domain(format!("sample times must lie in [0, {total}] s")));
        }

        let runs: Vec<(Vec<Matrix4c>, Matrix4c)> = (0..self.noise.ensemble_size)
            .into_par_iter()
            .map(|k| self.run_member(k, &rho0.matrix, timeline, sample_at, tol))
            .collect();

        let n = runs.len() as f64;
        let scale = Complex64::new(1.0 / n, 0.0);
        let mean = |states: &mut dyn Iterator<Item = &Matrix4c>| {
            states.fold(Matrix4c::zeros(), |acc, m| acc + m) * scale
        };
        let mut member_samples = vec![Vec::with_capacity(runs.len()); sample_at.len()];
        for (states, _) in &runs {
            for (slot, st) in member_samples.iter_mut().zip(states) {
                slot.push(*st);
            }
        }
        let member_finals: Vec<Matrix4c> = runs.iter().map(|(_, f)| *f).collect();

        let initial_trace = rho0.matrix.trace();
        let mut diagnostics = Diagnostics::new();
        let samples: Vec<(f64, DensityMatrix)> = sample_at
            .iter()
            .zip(&member_samples)
            .map(|(&t, ms)| {
                let m = mean(&mut ms.iter());
                diagnostics.observe(&m, initial_trace);
                (t, DensityMatrix::new(m, rho0.label.clone()))
            })
            .collect();
        let final_matrix = mean(&mut member_finals.iter());
        diagnostics.observe(&final_matrix, initial_trace);

        if diagnostics.max_trace_drift > TRACE_DRIFT_LIMIT {
            return Err(Error::Integrator(format!("trace drift {:e}", diagnostics.max_trace_drift)));
        }
        if rho0.eigenvalues()[0] >= -POSITIVITY_SLACK && diagnostics.min_eigenvalue < -POSITIVITY_SLACK {
            return Err(Error::Integrator(format!(
                "eigenvalue {:e} below positivity slack",
                diagnostics.min_eigenvalue
            )));
        }

        Ok(PropagationResult {
            final_state: DensityMatrix::new(final_matrix, rho0.label.clone()),
            samples,
            member_samples,
            member_finals,
            diagnostics,
        })
    }

    fn segment_generator(&self, member: &Member, kind: &SegmentKind) -> SpinOperator {
        match kind {
            SegmentKind::Delay => member.base,
            SegmentKind::Pulse(p) => member.base + drive_term(p, member.kappa),
        }
    }

    fn segment_relaxation(&self, kind: &SegmentKind) -> Option<&RelaxationParams> {
        match kind {
            SegmentKind::Pulse(_) if !self.noise.relax_during_pulses => None,
            _ => self.noise.relaxation.as_ref(),
        }
    }

    fn run_member(
        &self,
        index: usize,
        rho0: &Matrix4c,
        timeline: &Timeline,
        samples: &[f64],
        tol: f64,
    ) -> (Vec<Matrix4c>, Matrix4c) {
        let mut member = self.member(index);
        let segments = timeline.segments();
        let block = timeline.block_duration();
        let has_ou = !member.ou.is_empty();
        let dissipative = self.noise.relaxation.is_some();

        // full-segment maps without stochastic noise
        let seg_maps: Vec<Propagator> = segments
            .iter()
            .map(|seg| match seg.kind {
                SegmentKind::Pulse(p) if p.is_instantaneous() => {
                    Propagator::Unitary(ideal_rotation(&p, member.kappa))
                }
                kind => propagator::propagator(
                    &self.segment_generator(&member, &kind),
                    self.segment_relaxation(&kind),
                    seg.duration,
                ),
            })
            .collect();
        let block_map = (!has_ou).then(|| {
            seg_maps
                .iter()
                .fold(Propagator::identity(dissipative), |acc, m| acc.then(m))
        });

        let mut rho = *rho0;
        let mut out = Vec::with_capacity(samples.len());
        let mut next = 0;
        let mut record = |t: f64, rho: &Matrix4c, next: &mut usize| {
            while *next < samples.len() && samples[*next] <= t + tol {
                out.push(*rho);
                *next += 1;
            }
        };

        for b in 0..timeline.repeats() {
            let t_block = b as f64 * block;
            record(t_block, &rho, &mut next);
            let inside = next < samples.len() && samples[next] < t_block + block - tol;
            if let (Some(map), false) = (&block_map, inside) {
                rho = map.apply(&rho);
                continue;
            }
            let mut t = t_block;
            for (seg, map) in segments.iter().zip(&seg_maps) {
                record(t, &rho, &mut next);
                let end = t + seg.duration;
                let mut cursor = t;
                while cursor < end - tol {
                    let stop = if next < samples.len() && samples[next] < end - tol {
                        samples[next].max(cursor)
                    } else {
                        end
                    };
                    let length = stop - cursor;
                    let whole = (cursor - t).abs() <= tol && (stop - end).abs() <= tol;
                    rho = self.evolve_piece(&mut member, seg, map, length, whole, &rho);
                    cursor = stop;
                    record(cursor, &rho, &mut next);
                }
                if seg.duration == 0.0 {
                    rho = map.apply(&rho);
                }
                t = end;
            }
        }
        record(timeline.total_duration(), &rho, &mut next);
        // tolerance slack can leave trailing samples; they sit at the end
        while out.len() < samples.len() {
            out.push(rho);
        }
        (out, rho)
    }

    fn evolve_piece(
        &self,
        member: &mut Member,
        seg: &crate::sequence::Segment,
        full_map: &Propagator,
        length: f64,
        whole: bool,
        rho: &Matrix4c,
    ) -> Matrix4c {
        let relax = self.segment_relaxation(&seg.kind);
        let h = self.segment_generator(member, &seg.kind);
        if member.ou.is_empty() {
            if whole {
                return full_map.apply(rho);
            }
            return propagator::propagator(&h, relax, length).apply(rho);
        }

        let process = self.noise.dephasing.expect("OU samplers imply a process");
        let max_step = (process.correlation_time / 20.0).min(seg.duration / 4.0);
        let steps = ((length / max_step).ceil() as usize).max(1);
        let dt = length / steps as f64;
        let commuting = member.noise_ops.iter().all(|op| commutes(&h, op));

        if commuting {
            // the noise term commutes with the segment generator and the dissipator
            // is covariant under z rotations, so the accumulated phase factors out
            let mut phases = vec![0.0; member.ou.len()];
            for _ in 0..steps {
                for (phi, s) in phases.iter_mut().zip(member.ou.iter_mut()) {
                    *phi += s.value() * dt;
                    s.advance(dt, &mut member.rng);
                }
            }
            let coherent = if whole {
                full_map.apply(rho)
            } else {
                propagator::propagator(&h, relax, length).apply(rho)
            };
            let rotation = member
                .noise_ops
                .iter()
                .zip(&phases)
                .fold(SpinOperator::zero(), |acc, (op, &phi)| acc + *op * phi);
            let u = propagator::unitary(&rotation, 1.0);
            return propagator::apply_unitary(&u, &coherent);
        }

        let mut rho = *rho;
        for _ in 0..steps {
            let noisy = member
                .noise_ops
                .iter()
                .zip(&member.ou)
                .fold(h, |acc, (op, s)| acc + *op * s.value());
            rho = propagator::propagator(&noisy, relax, dt).apply(&rho);
            for s in member.ou.iter_mut() {
                s.advance(dt, &mut member.rng);
            }
        }
        rho
    }
}

fn commutes(a: &SpinOperator, b: &SpinOperator) -> bool {
    let scale = a.frobenius_norm() * b.frobenius_norm();
    a.commutator(b).frobenius_norm() <= 1e-12 * scale.max(1e-300)
}

/// Convenience wrapper over [`Simulator::run`].
pub fn run_timeline(
    rho0: &DensityMatrix,
    timeline: &Timeline,
    molecule: &MoleculeParams,
    model: &NoiseModel,
    sample_at: &[f64],
) -> Result<PropagationResult> {
    Simulator::new(*molecule, model.clone()).run(rho0, timeline, sample_at)
}
