//! Two-spin operator algebra in the product basis `{|00>, |01>, |10>, |11>}`.
//!
//! Spin 1 is the left tensor factor and `|0>` is the `+1/2` eigenstate of `I_z`.
//! Angular momentum is in units of hbar.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{Matrix2, Matrix4, SymmetricEigen, Vector4};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type Matrix4c = Matrix4<Complex64>;
pub type Vector4c = Vector4<Complex64>;
type Matrix2c = Matrix2<Complex64>;

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-12;
pub const POSITIVITY_SLACK: f64 = 1e-10;
/// Below this Frobenius norm a deviation matrix is treated as zero.
pub const DEGENERATE_NORM: f64 = 1e-14;

const fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Which spins an operator (or pulse) acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum Spin {
    #[default]
    Both,
    First,
    Second,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Axis {
    X,
    Y,
    Z,
}

fn pauli(axis: Option<Axis>) -> Matrix2c {
    let (o, l, i) = (c(0.0, 0.0), c(1.0, 0.0), c(0.0, 1.0));
    match axis {
        None => Matrix2c::new(l, o, o, l),
        Some(Axis::X) => Matrix2c::new(o, l, l, o),
        Some(Axis::Y) => Matrix2c::new(o, -i, i, o),
        Some(Axis::Z) => Matrix2c::new(l, o, o, -l),
    }
}

pub(crate) fn kron(a: &Matrix2c, b: &Matrix2c) -> Matrix4c {
    Matrix4c::from_fn(|r, col| a[(r / 2, col / 2)] * b[(r % 2, col % 2)])
}


pub(crate) fn frobenius_inner(a: &Matrix4c, b: &Matrix4c) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

pub(crate) fn hermitian_defect(m: &Matrix4c) -> f64 {
    (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Eigenvalues of the Hermitian part of `m`, ascending.
pub fn hermitian_eigenvalues(m: &Matrix4c) -> [f64; 4] {
    let h = (m + m.adjoint()) * c(0.5, 0.0);
    let eig = SymmetricEigen::new(h);
    let mut v = [
        eig.eigenvalues[0],
        eig.eigenvalues[1],
        eig.eigenvalues[2],
        eig.eigenvalues[3],
    ];
    v.sort_by(f64::total_cmp);
    v
}

/// A 4x4 operator on the spin pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpinOperator(pub Matrix4c);

impl SpinOperator {
    pub fn zero() -> Self {
        SpinOperator(Matrix4c::zeros())
    }

    pub fn identity() -> Self {
        SpinOperator(Matrix4c::identity())
    }

    fn single(axis: Axis, spin: Spin) -> Self {
        let half = c(0.5, 0.0);
        let p = pauli(Some(axis)) * half;
        let id = pauli(None);
        match spin {
            Spin::First => SpinOperator(kron(&p, &id)),
            Spin::Second => SpinOperator(kron(&id, &p)),
            Spin::Both => SpinOperator(kron(&p, &id) + kron(&id, &p)),
        }
    }

    pub fn ix(spin: Spin) -> Self {
        Self::single(Axis::X, spin)
    }

    pub fn iy(spin: Spin) -> Self {
        Self::single(Axis::Y, spin)
    }

    pub fn iz(spin: Spin) -> Self {
        Self::single(Axis::Z, spin)
    }

    /// Scalar coupling `I^1 . I^2`.
    pub fn scalar_coupling() -> Self {
        let quarter = c(0.25, 0.0);
        let m = [Axis::X, Axis::Y, Axis::Z]
            .iter()
            .map(|&a| kron(&pauli(Some(a)), &pauli(Some(a))) * quarter)
            .fold(Matrix4c::zeros(), |acc, x| acc + x);
        SpinOperator(m)
    }

    /// Projector `|psi><psi|`.
    pub fn projector(psi: &StateVector) -> Self {
        SpinOperator(psi.0 * psi.0.adjoint())
    }

    pub fn matrix(&self) -> &Matrix4c {
        &self.0
    }

    pub fn commutator(&self, other: &SpinOperator) -> SpinOperator {
        SpinOperator(self.0 * other.0 - other.0 * self.0)
    }

    pub fn apply(&self, psi: &StateVector) -> Vector4c {
        self.0 * psi.0
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        hermitian_defect(&self.0) <= tol
    }

    pub fn eigenvalues(&self) -> [f64; 4] {
        hermitian_eigenvalues(&self.0)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }
}

impl Add for SpinOperator {
    type Output = SpinOperator;
    fn add(self, rhs: SpinOperator) -> SpinOperator {
        SpinOperator(self.0 + rhs.0)
    }
}

impl Sub for SpinOperator {
    type Output = SpinOperator;
    fn sub(self, rhs: SpinOperator) -> SpinOperator {
        SpinOperator(self.0 - rhs.0)
    }
}

impl Neg for SpinOperator {
    type Output = SpinOperator;
    fn neg(self) -> SpinOperator {
        SpinOperator(-self.0)
    }
}

impl Mul<f64> for SpinOperator {
    type Output = SpinOperator;
    fn mul(self, rhs: f64) -> SpinOperator {
        SpinOperator(self.0 * c(rhs, 0.0))
    }
}

/// Normalized pure state of the spin pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StateVector(Vector4c);

impl StateVector {
    /// Accepts amplitudes already normalized to 1e-12.
    pub fn new(amplitudes: Vector4c) -> Result<Self> {
        let n = amplitudes.norm();
        if (n - 1.0).abs() > 1e-12 {
            return Err(Error::domain(format!("state vector norm {n} is not 1")));
        }
        Ok(StateVector(amplitudes))
    }

    /// Normalizes and fixes the global phase so the first nonzero amplitude is real positive.
    pub fn normalized(amplitudes: Vector4c) -> Result<Self> {
        let n = amplitudes.norm();
        if n < 1e-300 || !n.is_finite() {
            return Err(Error::domain("cannot normalize a zero state vector"));
        }
        let mut v = amplitudes / c(n, 0.0);
        if let Some(first) = v.iter().find(|z| z.norm() > 1e-15).copied() {
            let phase = first.conj() / c(first.norm(), 0.0);
            v *= phase;
        }
        Ok(StateVector(v))
    }

    pub fn amplitudes(&self) -> &Vector4c {
        &self.0
    }

    pub fn inner(&self, other: &StateVector) -> Complex64 {
        self.0.dotc(&other.0)
    }
}

/// The named states used throughout the crate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CanonicalState {
    Singlet,
    TripletPlus,
    TripletZero,
    TripletMinus,
    PsiPlus,
    PhiPlus,
    PhiMinus,
    Up00,
    Up01,
    Up10,
    Up11,
}

impl CanonicalState {
    pub const ALL: [CanonicalState; 11] = [
        CanonicalState::Singlet,
        CanonicalState::TripletPlus,
        CanonicalState::TripletZero,
        CanonicalState::TripletMinus,
        CanonicalState::PsiPlus,
        CanonicalState::PhiPlus,
        CanonicalState::PhiMinus,
        CanonicalState::Up00,
        CanonicalState::Up01,
        CanonicalState::Up10,
        CanonicalState::Up11,
    ];

    pub fn label(self) -> &'static str {
        match self {
            CanonicalState::Singlet => "singlet",
            CanonicalState::TripletPlus => "triplet_plus",
            CanonicalState::TripletZero => "triplet_zero",
            CanonicalState::TripletMinus => "triplet_minus",
            CanonicalState::PsiPlus => "psi_plus",
            CanonicalState::PhiPlus => "phi_plus",
            CanonicalState::PhiMinus => "phi_minus",
            CanonicalState::Up00 => "00",
            CanonicalState::Up01 => "01",
            CanonicalState::Up10 => "10",
            CanonicalState::Up11 => "11",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|s| s.label() == label)
    }

    pub fn vector(self) -> StateVector {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let (a, b, cc, d) = match self {
            CanonicalState::Singlet => (0.0, r, -r, 0.0),
            CanonicalState::TripletPlus | CanonicalState::Up00 => (1.0, 0.0, 0.0, 0.0),
            CanonicalState::TripletZero | CanonicalState::PsiPlus => (0.0, r, r, 0.0),
            CanonicalState::TripletMinus | CanonicalState::Up11 => (0.0, 0.0, 0.0, 1.0),
            CanonicalState::PhiPlus => (r, 0.0, 0.0, r),
            CanonicalState::PhiMinus => (r, 0.0, 0.0, -r),
            CanonicalState::Up01 => (0.0, 1.0, 0.0, 0.0),
            CanonicalState::Up10 => (0.0, 0.0, 1.0, 0.0),
        };
        StateVector(Vector4c::new(c(a, 0.0), c(b, 0.0), c(cc, 0.0), c(d, 0.0)))
    }
}

impl fmt::Display for CanonicalState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

pub fn canonical_states() -> Vec<(CanonicalState, StateVector)> {
    CanonicalState::ALL.iter().map(|&s| (s, s.vector())).collect()
}

/// Ensemble density matrix with a free-form label.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    pub matrix: Matrix4c,
    pub label: String,
}

impl DensityMatrix {
    pub fn new(matrix: Matrix4c, label: impl Into<String>) -> Self {
        DensityMatrix {
            matrix,
            label: label.into(),
        }
    }

    pub fn maximally_mixed() -> Self {
        DensityMatrix::new(Matrix4c::identity() * c(0.25, 0.0), "identity/4")
    }

    pub fn pure(psi: &StateVector, label: impl Into<String>) -> Self {
        DensityMatrix::new(psi.0 * psi.0.adjoint(), label)
    }

    /// Physical state `1/4 + s * dev` for a traceless Hermitian `dev`, with `s` as
    /// large as positivity allows. Linear unital dynamics act on `dev` alone, so
    /// this embedding lets deviation matrices travel through physical propagators.
    pub fn from_deviation(dev: &Matrix4c, label: impl Into<String>) -> Result<Self> {
        let ev = hermitian_eigenvalues(dev);
        let most_negative = -ev[0];
        if ev.iter().all(|x| x.abs() < DEGENERATE_NORM) {
            return Err(Error::DegenerateState {
                norm: dev.norm(),
                threshold: DEGENERATE_NORM,
            });
        }
        let scale = if most_negative > 0.0 {
            0.25 / most_negative
        } else {
            1.0
        };
        let m = Matrix4c::identity() * c(0.25, 0.0) + dev * c(scale, 0.0);
        Ok(DensityMatrix::new(m, label))
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    pub fn purity(&self) -> f64 {
        (self.matrix * self.matrix).trace().re
    }

    pub fn hermitian_defect(&self) -> f64 {
        hermitian_defect(&self.matrix)
    }

    pub fn eigenvalues(&self) -> [f64; 4] {
        hermitian_eigenvalues(&self.matrix)
    }

    pub fn expectation(&self, op: &SpinOperator) -> f64 {
        (self.matrix * op.0).trace().re
    }

    /// Checks Hermiticity, unit trace and positivity at the crate tolerances.
    pub fn validate(&self) -> Result<()> {
        let h = self.hermitian_defect();
        if h > HERMITIAN_TOL {
            return Err(Error::domain(format!("not Hermitian (defect {h:e})")));
        }
        let t = self.trace();
        if (t.re - 1.0).abs() > TRACE_TOL || t.im.abs() > TRACE_TOL {
            return Err(Error::domain(format!("trace {t} is not 1")));
        }
        let min = self.eigenvalues()[0];
        if min < -POSITIVITY_SLACK {
            return Err(Error::domain(format!("negative eigenvalue {min:e}")));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PseudopureParams {
    epsilon: f64,
}

impl PseudopureParams {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(Error::domain(format!(
                "purity fraction {epsilon} outside (0, 1]"
            )));
        }
        Ok(PseudopureParams { epsilon })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

/// `(1 - eps)/4 * 1 + eps |psi><psi|`.
pub fn pseudopure(psi: &StateVector, params: PseudopureParams) -> DensityMatrix {
    let eps = params.epsilon;
    let m = Matrix4c::identity() * c((1.0 - eps) / 4.0, 0.0) + psi.0 * psi.0.adjoint() * c(eps, 0.0);
    DensityMatrix::new(m, format!("pseudopure(eps={eps})"))
}

/// Traceless part `rho - tr(rho)/4`.
pub fn deviation(rho: &Matrix4c) -> Matrix4c {
    let t = rho.trace() * c(0.25, 0.0);
    rho - Matrix4c::identity() * t
}

/// Normalized Frobenius overlap between the traceless parts of `rho` and `|target><target|`.
///
/// Scale invariant, so it accepts either a density matrix or a bare deviation.
pub fn correlation(rho: &Matrix4c, target: &StateVector) -> Result<f64> {
    let a = deviation(rho);
    let na = a.norm();
    if na < DEGENERATE_NORM {
        return Err(Error::DegenerateState {
            norm: na,
            threshold: DEGENERATE_NORM,
        });
    }
    let b = deviation(&(target.0 * target.0.adjoint()));
    let r = frobenius_inner(&a, &b) / (na * b.norm());
    Ok(r.clamp(-1.0, 1.0))
}

const PAULI_AXES: [Option<Axis>; 4] = [None, Some(Axis::X), Some(Axis::Y), Some(Axis::Z)];

fn axis_char(a: Option<Axis>) -> char {
    match a {
        None => 'I',
        Some(Axis::X) => 'X',
        Some(Axis::Y) => 'Y',
        Some(Axis::Z) => 'Z',
    }
}

fn pauli_products() -> impl Iterator<Item = (String, Matrix4c)> {
    PAULI_AXES.into_iter().flat_map(|a| {
        PAULI_AXES.into_iter().filter_map(move |b| {
            if a.is_none() && b.is_none() {
                None
            } else {
                let label: String = [axis_char(a), axis_char(b)].iter().collect();
                Some((label, kron(&pauli(a), &pauli(b))))
            }
        })
    })
}

/// Expectation values `<sigma_a (x) sigma_b>` of the 15 traceless Pauli products.
#[derive(Clone, Debug, PartialEq)]
pub struct PauliExpectations {
    pub labels: Vec<String>,
    pub values: Vec<f64>,
}

impl PauliExpectations {
    pub fn get(&self, label: &str) -> Option<f64> {
        self.labels
            .iter()
            .position(|l| l == label)
            .map(|i| self.values[i])
    }

    /// Rebuilds the unit-trace density matrix `(1 + sum v_ab sigma_a sigma_b)/4`.
    pub fn reconstruct(&self) -> Matrix4c {
        pauli_products()
            .zip(&self.values)
            .fold(Matrix4c::identity(), |acc, ((_, p), &v)| acc + p * c(v, 0.0))
            * c(0.25, 0.0)
    }
}

pub fn pauli_expectations(rho: &DensityMatrix) -> PauliExpectations {
    let (labels, values) = pauli_products()
        .map(|(l, p)| (l, (rho.matrix * p).trace().re))
        .unzip();
    PauliExpectations { labels, values }
}
