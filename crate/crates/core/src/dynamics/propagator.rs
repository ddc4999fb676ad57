//! Exact propagators for piecewise-constant generators.

use nalgebra::{SMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spinops::{Matrix4c, SpinOperator};

use super::RelaxationParams;

/// Superoperator acting on column-stacked 4x4 matrices.
pub type Superop = SMatrix<Complex64, 16, 16>;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// `exp(-i H t)` for Hermitian `H` through its eigenbasis.
pub fn unitary(h: &SpinOperator, dt: f64) -> Matrix4c {
    if dt == 0.0 {
        return Matrix4c::identity();
    }
    let eig = SymmetricEigen::new(*h.matrix());
    let v = eig.eigenvectors;
    let phases = Matrix4c::from_diagonal(&eig.eigenvalues.map(|l| (-I * (l * dt)).exp()));
    v * phases * v.adjoint()
}

/// `A (x) B` with `A` as the outer block index.
fn kron4(a: &Matrix4c, b: &Matrix4c) -> Superop {
    Superop::from_fn(|r, c| a[(r / 4, c / 4)] * b[(r % 4, c % 4)])
}

/// `vec(A X B) = (B^T (x) A) vec(X)` for column-major `vec`.
fn sandwich(a: &Matrix4c, b: &Matrix4c) -> Superop {
    kron4(&b.transpose(), a)
}

pub fn unitary_superop(u: &Matrix4c) -> Superop {
    sandwich(u, &u.adjoint())
}

fn collapse_operators(relax: &RelaxationParams) -> Vec<(Matrix4c, f64)> {
    let z = Complex64::new(0.0, 0.0);
    let o = Complex64::new(1.0, 0.0);
    let lower = nalgebra::Matrix2::new(z, z, o, z);
    let raise = lower.adjoint();
    let sz = nalgebra::Matrix2::new(o, z, z, -o);
    let id = nalgebra::Matrix2::identity();
    let mut ops = Vec::with_capacity(6);
    for spin in 0..2 {
        let embed = |m: &nalgebra::Matrix2<Complex64>| {
            if spin == 0 {
                crate::spinops::kron(m, &id)
            } else {
                crate::spinops::kron(&id, m)
            }
        };
        let t1 = relax.t1[spin];
        let t2 = relax.t2[spin];
        // infinite-temperature amplitude damping: populations relax to 1/2 at 1/T1
        ops.push((embed(&lower), 0.5 / t1));
        ops.push((embed(&raise), 0.5 / t1));
        // D[sz] at rate g/2 damps coherences at g
        let dephasing = 1.0 / t2 - 0.5 / t1;
        ops.push((embed(&sz), 0.5 * dephasing));
    }
    ops
}

/// Lindblad generator `-i[H, .] + sum_k g_k D[L_k]`.
pub fn lindblad_generator(h: &SpinOperator, relax: Option<&RelaxationParams>) -> Superop {
    let id = Matrix4c::identity();
    let hm = h.matrix();
    let mut gen = (sandwich(hm, &id) - sandwich(&id, hm)) * (-I);
    if let Some(relax) = relax {
        for (l, rate) in collapse_operators(relax) {
            if rate == 0.0 {
                continue;
            }
            let ldl = l.adjoint() * l;
            let d = sandwich(&l, &l.adjoint())
                - sandwich(&ldl, &id) * Complex64::new(0.5, 0.0)
                - sandwich(&id, &ldl) * Complex64::new(0.5, 0.0);
            gen += d * Complex64::new(rate, 0.0);
        }
    }
    gen
}

pub fn lindblad_superop(h: &SpinOperator, relax: Option<&RelaxationParams>, dt: f64) -> Superop {
    if dt == 0.0 {
        return Superop::identity();
    }
    (lindblad_generator(h, relax) * Complex64::new(dt, 0.0)).exp()
}

pub fn apply_superop(s: &Superop, rho: &Matrix4c) -> Matrix4c {
    let v = nalgebra::SVector::<Complex64, 16>::from_column_slice(rho.as_slice());
    let out = s * v;
    let m = Matrix4c::from_column_slice(out.as_slice());
    // project out the anti-Hermitian rounding the exponential leaves behind
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

pub fn apply_unitary(u: &Matrix4c, rho: &Matrix4c) -> Matrix4c {
    u * rho * u.adjoint()
}

/// Either a unitary or a general (Lindblad) map on density matrices.
#[derive(Clone, Debug)]
pub enum Propagator {
    Unitary(Matrix4c),
    Super(Box<Superop>),
}

impl Propagator {
    pub fn identity(dissipative: bool) -> Self {
        if dissipative {
            Propagator::Super(Box::new(Superop::identity()))
        } else {
            Propagator::Unitary(Matrix4c::identity())
        }
    }

    pub fn apply(&self, rho: &Matrix4c) -> Matrix4c {
        match self {
            Propagator::Unitary(u) => apply_unitary(u, rho),
            Propagator::Super(s) => apply_superop(s, rho),
        }
    }

    /// `self` followed by `next`.
    pub fn then(&self, next: &Propagator) -> Propagator {
        match (self, next) {
            (Propagator::Unitary(a), Propagator::Unitary(b)) => Propagator::Unitary(b * a),
            (a, b) => Propagator::Super(Box::new(b.superop() * a.superop())),
        }
    }

    fn superop(&self) -> Superop {
        match self {
            Propagator::Unitary(u) => unitary_superop(u),
            Propagator::Super(s) => **s,
        }
    }
}

/// Builds the map for a constant generator over `dt`.
pub fn propagator(h: &SpinOperator, relax: Option<&RelaxationParams>, dt: f64) -> Propagator {
    match relax {
        None => Propagator::Unitary(unitary(h, dt)),
        Some(r) => Propagator::Super(Box::new(lindblad_superop(h, Some(r), dt))),
    }
}

pub(crate) fn check_step(dt: f64) -> Result<()> {
    if !(dt >= 0.0 && dt.is_finite()) {
        return Err(Error::domain(format!("time step {dt} must be >= 0")));
    }
    Ok(())
}
