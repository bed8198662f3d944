//! Qubit states as Bloch vectors and as 2×2 density operators.
//!
//! Conventions: `ρ = (I + x σx + y σy + z σz) / 2`, so `|H⟩ = |0⟩` sits at
//! `+z`, `|+⟩` at `+x` and `|L⟩ = (|0⟩ + i|1⟩)/√2` at `+y`.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Slack allowed on `|r| ≤ 1` before a vector stops counting as a state.
pub const PHYS_EPS: f64 = 1e-9;

/// A real 3-vector in Bloch coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BlochVector<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Scalar> BlochVector<T> {
    pub fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    /// Unit vector in the ZX plane at angle `phi` from `+z` towards `+x`.
    pub fn in_zx_plane(phi: T) -> Self {
        Self::new(phi.sin(), T::zero(), phi.cos())
    }

    /// Unit vector from polar angle `theta` (from `+z`) and azimuth `phi` (from `+x`).
    pub fn from_spherical(theta: T, phi: T) -> Self {
        let s = theta.sin();
        Self::new(s * phi.cos(), s * phi.sin(), theta.cos())
    }

    pub fn from_array(a: [T; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [T; 3] {
        [self.x, self.y, self.z]
    }

    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Self) -> Self {
        Self::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm_sq(self) -> T {
        self.dot(self)
    }

    pub fn norm(self) -> T {
        self.norm_sq().sqrt()
    }

    /// Unit vector along `self`, or `None` for (numerically) zero vectors.
    pub fn normalized(self) -> Option<Self> {
        let n = self.norm();
        if n <= T::epsilon() {
            None
        } else {
            Some(self * (T::one() / n))
        }
    }

    /// Drops the `y` component (projection onto the ZX plane).
    pub fn project_zx(self) -> Self {
        Self::new(self.x, T::zero(), self.z)
    }

    /// Rotation about the `y` axis by `angle`, positive from `+z` towards `+x`.
    pub fn rotate_about_y(self, angle: T) -> Self {
        let (s, c) = angle.sin_cos();
        Self::new(c * self.x + s * self.z, self.y, c * self.z - s * self.x)
    }

    pub fn max_abs_diff(self, o: Self) -> T {
        (self.x - o.x)
            .abs()
            .max((self.y - o.y).abs())
            .max((self.z - o.z).abs())
    }

    /// True when `|r| ≤ 1 + ε_phys`.
    pub fn is_physical(self) -> bool {
        self.norm() <= T::one() + T::tol(PHYS_EPS)
    }

    pub fn cast<U: Scalar>(self) -> BlochVector<U> {
        BlochVector::new(
            U::lit(self.x.to_f64_lossy()),
            U::lit(self.y.to_f64_lossy()),
            U::lit(self.z.to_f64_lossy()),
        )
    }
}

impl<T: Scalar> Add for BlochVector<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl<T: Scalar> AddAssign for BlochVector<T> {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<T: Scalar> Sub for BlochVector<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl<T: Scalar> Neg for BlochVector<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

impl<T: Scalar> Mul<T> for BlochVector<T> {
    type Output = Self;
    fn mul(self, s: T) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }
}

/// `n` nearly uniform unit vectors on the golden-angle spiral.
pub fn fibonacci_sphere<T: Scalar>(n: usize) -> Vec<BlochVector<T>> {
    let golden = T::PI() * (T::lit(3.0) - T::lit(5.0).sqrt());
    let nf = T::of_usize(n);
    (0..n)
        .map(|i| {
            let z = T::one() - (T::lit(2.0) * T::of_usize(i) + T::one()) / nf;
            let rho = (T::one() - z * z).max(T::zero()).sqrt();
            let phi = golden * T::of_usize(i);
            BlochVector::new(rho * phi.cos(), rho * phi.sin(), z)
        })
        .collect()
}

/// Dense complex 2×2 matrix, row major.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mat2<T> {
    pub m: [[Complex<T>; 2]; 2],
}

impl<T: Scalar> Mat2<T> {
    pub fn identity() -> Self {
        let one = Complex::new(T::one(), T::zero());
        let zero = Complex::new(T::zero(), T::zero());
        Self {
            m: [[one, zero], [zero, one]],
        }
    }

    pub fn scaled_identity(s: T) -> Self {
        Self::identity().scale(s)
    }

    /// `s (I + v·σ)`; with `s = w` this is a POVM element, with `s = 1/2` a state.
    pub fn from_bloch_affine(s: T, v: BlochVector<T>) -> Self {
        Self {
            m: [
                [
                    Complex::new(s * (T::one() + v.z), T::zero()),
                    Complex::new(s * v.x, -s * v.y),
                ],
                [
                    Complex::new(s * v.x, s * v.y),
                    Complex::new(s * (T::one() - v.z), T::zero()),
                ],
            ],
        }
    }

    pub fn scale(self, s: T) -> Self {
        let mut out = self;
        for row in out.m.iter_mut() {
            for e in row.iter_mut() {
                *e = *e * s;
            }
        }
        out
    }

    pub fn plus(self, o: Self) -> Self {
        let mut out = self;
        for i in 0..2 {
            for j in 0..2 {
                out.m[i][j] = self.m[i][j] + o.m[i][j];
            }
        }
        out
    }

    pub fn matmul(self, o: Self) -> Self {
        let mut out = self;
        for i in 0..2 {
            for j in 0..2 {
                out.m[i][j] = self.m[i][0] * o.m[0][j] + self.m[i][1] * o.m[1][j];
            }
        }
        out
    }

    pub fn trace(self) -> Complex<T> {
        self.m[0][0] + self.m[1][1]
    }

    /// `Tr[self · o]`.
    pub fn trace_product(self, o: Self) -> Complex<T> {
        self.m[0][0] * o.m[0][0]
            + self.m[0][1] * o.m[1][0]
            + self.m[1][0] * o.m[0][1]
            + self.m[1][1] * o.m[1][1]
    }

    pub fn frobenius_norm(self) -> T {
        self.m
            .iter()
            .flat_map(|r| r.iter())
            .map(|e| e.norm_sqr())
            .sum::<T>()
            .sqrt()
    }

    /// Bloch components `(Tr[σx M], Tr[σy M], Tr[σz M])`.
    pub fn pauli_components(self) -> BlochVector<T> {
        let x = (self.m[0][1] + self.m[1][0]).re;
        let y = (self.m[1][0] - self.m[0][1]).im;
        let z = (self.m[0][0] - self.m[1][1]).re;
        BlochVector::new(x, y, z)
    }
}

/// A qubit density operator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QubitState<T> {
    rho: Mat2<T>,
}

impl<T: Scalar> QubitState<T> {
    /// Maximally mixed state `I/2`.
    pub fn maximally_mixed() -> Self {
        Self::from_bloch_unchecked(BlochVector::zero())
    }

    pub fn from_bloch(r: BlochVector<T>) -> Result<Self> {
        if !r.is_physical() {
            return Err(Error::UnphysicalState {
                norm: r.norm().to_f64_lossy(),
            });
        }
        Ok(Self::from_bloch_unchecked(r))
    }

    pub(crate) fn from_bloch_unchecked(r: BlochVector<T>) -> Self {
        Self {
            rho: Mat2::from_bloch_affine(T::lit(0.5), r),
        }
    }

    /// Pure state `α|0⟩ + β|1⟩` (normalized here).
    pub fn pure(alpha: Complex<T>, beta: Complex<T>) -> Result<Self> {
        let n = (alpha.norm_sqr() + beta.norm_sqr()).sqrt();
        if n <= T::epsilon() {
            return Err(Error::Domain("zero state vector".into()));
        }
        let (a, b) = (alpha / n, beta / n);
        Ok(Self {
            rho: Mat2 {
                m: [[a * a.conj(), a * b.conj()], [b * a.conj(), b * b.conj()]],
            },
        })
    }

    /// Validates hermiticity, unit trace and positivity of a raw matrix.
    pub fn from_matrix(m: [[Complex<T>; 2]; 2]) -> Result<Self> {
        let tol = T::tol(1e-12);
        let herm = (m[1][0] - m[0][1].conj()).norm();
        if herm > tol || m[0][0].im.abs() > tol || m[1][1].im.abs() > tol {
            return Err(Error::Domain(format!(
                "matrix is not Hermitian (deviation {:.3e})",
                herm.to_f64_lossy()
            )));
        }
        let st = Self { rho: Mat2 { m } };
        let tr = st.rho.trace().re;
        if (tr - T::one()).abs() > tol {
            return Err(Error::Domain(format!(
                "trace {} differs from one",
                tr.to_f64_lossy()
            )));
        }
        let (lo, _) = st.eigenvalues();
        if lo < -T::tol(1e-9) {
            return Err(Error::UnphysicalState {
                norm: st.bloch().norm().to_f64_lossy(),
            });
        }
        Ok(st)
    }

    pub fn matrix(&self) -> &Mat2<T> {
        &self.rho
    }

    pub fn bloch(&self) -> BlochVector<T> {
        self.rho.pauli_components()
    }

    pub fn trace(&self) -> T {
        self.rho.trace().re
    }

    /// Eigenvalues `(λ_min, λ_max)` of the Hermitian matrix.
    pub fn eigenvalues(&self) -> (T, T) {
        let half = T::lit(0.5);
        let tr = self.trace();
        let r = self.bloch().norm();
        (half * (tr - r), half * (tr + r))
    }

    pub fn purity(&self) -> T {
        self.rho.trace_product(self.rho).re
    }

    /// Trace distance `½‖ρ − σ‖₁`, which for qubits is `|r_ρ − r_σ|/2`.
    pub fn trace_distance(&self, other: &Self) -> T {
        (self.bloch() - other.bloch()).norm() * T::lit(0.5)
    }
}
