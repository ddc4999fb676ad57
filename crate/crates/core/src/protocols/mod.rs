//! State pipelines around the storage experiment: initial singlet order,
//! spin-lock purification, Bell-state synthesis from the singlet and the
//! singlet-to-magnetization readout.

mod kinetics;

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;

use num_complex::Complex64;

use crate::dynamics::{free_hamiltonian, ideal_rotation, propagator, pulse_hamiltonian, MoleculeParams};
use crate::error::{Error, Result};
use crate::sequence::{PulseParams, Segment, Timeline};
use crate::spinops::{deviation, CanonicalState, Matrix4c, Spin, SpinOperator};

pub use kinetics::{spinlock_purify, SpinLockKinetics};

/// Two readings of the singlet-triplet mixture the experiment starts from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum PreparationForm {
    /// `-I1.I2`.
    OperatorForm,
    /// `P_S0 - P_T0`.
    #[default]
    ProjectorForm,
}

impl PreparationForm {
    pub fn keyword(self) -> &'static str {
        match self {
            PreparationForm::OperatorForm => "operator",
            PreparationForm::ProjectorForm => "projector",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Self> {
        match s {
            "operator" => Some(PreparationForm::OperatorForm),
            "projector" => Some(PreparationForm::ProjectorForm),
            _ => None,
        }
    }
}

/// Traceless deviation matrix of the selected form.
pub fn prepare_initial(form: PreparationForm) -> Matrix4c {
    match form {
        PreparationForm::OperatorForm => -SpinOperator::scalar_coupling().0,
        PreparationForm::ProjectorForm => {
            let s = SpinOperator::projector(&CanonicalState::Singlet.vector()).0;
            let t0 = SpinOperator::projector(&CanonicalState::TripletZero.vector()).0;
            s - t0
        }
    }
}

/// Bell states reachable from the singlet by one z rotation and/or one
/// selective x rotation of spin 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BellTarget {
    PsiPlus,
    PhiMinus,
    PhiPlus,
}

impl BellTarget {
    pub const ALL: [BellTarget; 3] = [BellTarget::PsiPlus, BellTarget::PhiMinus, BellTarget::PhiPlus];

    pub fn state(self) -> CanonicalState {
        match self {
            BellTarget::PsiPlus => CanonicalState::PsiPlus,
            BellTarget::PhiMinus => CanonicalState::PhiMinus,
            BellTarget::PhiPlus => CanonicalState::PhiPlus,
        }
    }

    pub fn from_state(state: CanonicalState) -> Option<Self> {
        Self::ALL.into_iter().find(|b| b.state() == state)
    }
}

impl fmt::Display for BellTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.state().label())
    }
}

/// Free-evolution time that rotates spin 1 by pi about z relative to spin 2.
pub fn z_rotation_delay(mol: &MoleculeParams) -> Result<f64> {
    if mol.delta_nu == 0.0 {
        return Err(Error::domain(
            "chemical shift difference is zero; z rotation cannot be synthesized",
        ));
    }
    Ok(1.0 / (2.0 * mol.delta_nu.abs()))
}

/// Timeline taking the singlet to `target`. `pulse` supplies the width of the
/// selective pi pulse; its angle, phase and selectivity are overridden.
pub fn bell_from_singlet(target: BellTarget, mol: &MoleculeParams, pulse: &PulseParams) -> Result<Timeline> {
    let flip = PulseParams {
        duration: pulse.duration,
        flip_angle: PI,
        phase: 0.0,
        selectivity: Spin::First,
    };
    let segments = match target {
        BellTarget::PsiPlus => vec![Segment::delay(z_rotation_delay(mol)?)],
        BellTarget::PhiMinus => vec![Segment::pulse(flip)],
        BellTarget::PhiPlus => vec![Segment::delay(z_rotation_delay(mol)?), Segment::pulse(flip)],
    };
    Timeline::from_segments(segments, 1)
}

/// Magnetization after the readout block.
///
/// Singlet order carries no net transverse magnetization: the readout turns it
/// into antiphase magnetization, which is what the spectrum shows.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReadoutSignal {
    /// `tr[rho' 2 (Ix1 Iz2 - Iz1 Ix2)]`.
    pub amplitude: f64,
    /// `tr[rho' (Ix1 + Ix2)]`.
    pub in_phase_x: f64,
    /// `tr[rho' (Iy1 + Iy2)]`.
    pub in_phase_y: f64,
}

/// Free evolution for `1/(4 dnu)` followed by the hard `pulse` (normally a
/// pi/2), applied to the deviation of `rho`.
pub fn singlet_readout(rho: &Matrix4c, mol: &MoleculeParams, pulse: &PulseParams) -> Result<ReadoutSignal> {
    pulse.validate()?;
    let delay = z_rotation_delay(mol)? / 2.0;
    let free = propagator::unitary(&free_hamiltonian(mol, 0.0), delay);
    let kick = if pulse.is_instantaneous() {
        ideal_rotation(pulse, 1.0)
    } else {
        propagator::unitary(&pulse_hamiltonian(pulse, 1.0, mol), pulse.duration)
    };
    let u = kick * free;
    let out = u * deviation(rho) * u.adjoint();
    let measure = |op: &Matrix4c| (out * op).trace().re;
    let two = Complex64::new(2.0, 0.0);
    let antiphase = (SpinOperator::ix(Spin::First).0 * SpinOperator::iz(Spin::Second).0
        - SpinOperator::iz(Spin::First).0 * SpinOperator::ix(Spin::Second).0)
        * two;
    Ok(ReadoutSignal {
        amplitude: measure(&antiphase),
        in_phase_x: measure(&SpinOperator::ix(Spin::Both).0),
        in_phase_y: measure(&SpinOperator::iy(Spin::Both).0),
    })
}

/// The hard pi/2 pulse about x on both spins.
pub fn readout_pulse(duration: f64) -> PulseParams {
    PulseParams {
        duration,
        flip_angle: FRAC_PI_2,
        phase: 0.0,
        selectivity: Spin::Both,
    }
}
