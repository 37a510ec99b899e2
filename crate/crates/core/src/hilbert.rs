//! Dense operators and states on a truncated Hilbert space.
//!
//! Everything is in units with ħ = 1 unless a caller explicitly threads an ħ
//! through a phase. Matrices are `nalgebra` dense complex matrices wrapped in
//! [`OperatorMatrix`], which additionally remembers whether it was certified
//! Hermitian or unitary on construction.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const I: C64 = C64::new(0.0, 1.0);

/// Relative tolerance for the Hermitian flag.
pub const HERMITIAN_RTOL: f64 = 1e-12;

/// Structure certified on an operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Structure {
    General,
    Hermitian,
    Unitary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    data: DMatrix<C64>,
    structure: Structure,
}

impl OperatorMatrix {
    pub fn from_matrix(data: DMatrix<C64>) -> Result<Self> {
        if data.nrows() != data.ncols() {
            return Err(Error::DimMismatch {
                left: data.nrows(),
                right: data.ncols(),
            });
        }
        if data.nrows() == 0 {
            return Err(Error::InvalidArgument(
                "operator dimension must be >= 1".into(),
            ));
        }
        if !data.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::NonFinite("operator entries"));
        }
        Ok(Self {
            data,
            structure: Structure::General,
        })
    }

    /// Builds from a row-major closure. Panics on dim = 0.
    pub fn from_fn(dim: usize, f: impl FnMut(usize, usize) -> C64) -> Self {
        assert!(dim > 0);
        Self {
            data: DMatrix::from_fn(dim, dim, f),
            structure: Structure::General,
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            data: DMatrix::identity(dim, dim),
            structure: Structure::Unitary,
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            data: DMatrix::zeros(dim, dim),
            structure: Structure::Hermitian,
        }
    }

    pub fn from_diagonal(diag: &[C64]) -> Self {
        let d = DVector::from_column_slice(diag);
        Self {
            data: DMatrix::from_diagonal(&d),
            structure: Structure::General,
        }
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let d: Vec<C64> = diag.iter().map(|&x| C64::new(x, 0.0)).collect();
        Self::from_diagonal(&d).tagged(Structure::Hermitian)
    }

    pub(crate) fn tagged(mut self, structure: Structure) -> Self {
        self.structure = structure;
        self
    }

    /// Certifies the matrix as Hermitian, failing if the residual exceeds
    /// `1e-12 * ‖A‖_F`.
    pub fn into_hermitian(self) -> Result<Self> {
        if self.is_hermitian() {
            Ok(self.tagged(Structure::Hermitian))
        } else {
            Err(Error::InvalidArgument(format!(
                "matrix is not Hermitian (residual {:e})",
                self.hermiticity_residual()
            )))
        }
    }

    /// Certifies the matrix as unitary under `tol`.
    pub fn into_unitary(self, tol: f64) -> Result<Self> {
        let defect = self.unitarity_defect();
        if defect <= tol {
            Ok(self.tagged(Structure::Unitary))
        } else {
            Err(Error::NotUnitary {
                defect,
                at: Vec::new(),
            })
        }
    }

    /// Returns `(A + A†)/2`, tagged Hermitian.
    pub fn hermitian_part(&self) -> Self {
        let data = (&self.data + self.data.adjoint()) * C64::new(0.5, 0.0);
        Self {
            data,
            structure: Structure::Hermitian,
        }
    }

    pub fn structure(&self) -> Structure {
        self.structure
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<C64> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.data
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[(i, j)]
    }

    pub fn adjoint(&self) -> Self {
        Self {
            data: self.data.adjoint(),
            structure: self.structure,
        }
    }

    pub fn scale(&self, s: C64) -> Self {
        let structure = match self.structure {
            Structure::Hermitian if s.im == 0.0 => Structure::Hermitian,
            _ => Structure::General,
        };
        Self {
            data: &self.data * s,
            structure,
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    pub fn trace(&self) -> C64 {
        self.data.trace()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest singular value.
    pub fn spectral_norm(&self) -> f64 {
        self.data
            .clone()
            .singular_values()
            .iter()
            .fold(0.0_f64, |m, &s| m.max(s))
    }

    /// Maximum absolute column sum.
    pub fn one_norm(&self) -> f64 {
        one_norm(&self.data)
    }

    /// ‖A − A†‖_F
    pub fn hermiticity_residual(&self) -> f64 {
        (&self.data - self.data.adjoint())
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermiticity_residual() <= HERMITIAN_RTOL * self.frobenius_norm()
    }

    /// ‖A†A − I‖_F
    pub fn unitarity_defect(&self) -> f64 {
        let n = self.dim();
        let prod = self.data.adjoint() * &self.data;
        (prod - DMatrix::<C64>::identity(n, n))
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// ‖A − I‖_F
    pub fn distance_from_identity(&self) -> f64 {
        let n = self.dim();
        (&self.data - DMatrix::<C64>::identity(n, n))
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn checked_mul(&self, rhs: &Self) -> Result<Self> {
        self.check_dims(rhs)?;
        let structure =
            if self.structure == Structure::Unitary && rhs.structure == Structure::Unitary {
                Structure::Unitary
            } else {
                Structure::General
            };
        Ok(Self {
            data: &self.data * &rhs.data,
            structure,
        })
    }

    pub fn checked_add(&self, rhs: &Self) -> Result<Self> {
        self.check_dims(rhs)?;
        Ok(add_tagged(self, rhs, &self.data + &rhs.data))
    }

    pub fn checked_sub(&self, rhs: &Self) -> Result<Self> {
        self.check_dims(rhs)?;
        Ok(add_tagged(self, rhs, &self.data - &rhs.data))
    }

    fn check_dims(&self, rhs: &Self) -> Result<()> {
        if self.dim() != rhs.dim() {
            return Err(Error::DimMismatch {
                left: self.dim(),
                right: rhs.dim(),
            });
        }
        Ok(())
    }

    pub fn powi(&self, n: u32) -> Self {
        let mut out = Self::identity(self.dim());
        for _ in 0..n {
            out = &out * self;
        }
        if self.structure == Structure::Hermitian {
            out.structure = Structure::Hermitian;
        }
        out
    }

    /// Evaluates `Σ_k coeffs[k] A^k`.
    pub fn polynomial(&self, coeffs: &[f64]) -> Self {
        let n = self.dim();
        let mut acc = DMatrix::<C64>::zeros(n, n);
        for &c in coeffs.iter().rev() {
            acc = &acc * &self.data;
            for i in 0..n {
                acc[(i, i)] += C64::new(c, 0.0);
            }
        }
        let structure = if self.structure == Structure::Hermitian {
            Structure::Hermitian
        } else {
            Structure::General
        };
        Self {
            data: acc,
            structure,
        }
    }

    pub fn apply(&self, psi: &StateVector) -> Result<StateVector> {
        if psi.dim() != self.dim() {
            return Err(Error::DimMismatch {
                left: self.dim(),
                right: psi.dim(),
            });
        }
        Ok(StateVector::from_vector(&self.data * psi.as_vector()))
    }

    /// Conjugation `U A U†`.
    pub fn conjugate_by(&self, u: &Self) -> Self {
        let data = &u.data * &self.data * u.data.adjoint();
        Self {
            data,
            structure: if self.structure == Structure::Hermitian {
                Structure::Hermitian
            } else {
                Structure::General
            },
        }
    }
}

fn add_tagged(a: &OperatorMatrix, b: &OperatorMatrix, data: DMatrix<C64>) -> OperatorMatrix {
    let structure = if a.structure == Structure::Hermitian && b.structure == Structure::Hermitian {
        Structure::Hermitian
    } else {
        Structure::General
    };
    OperatorMatrix { data, structure }
}

impl<'a> Mul<&'a OperatorMatrix> for &'a OperatorMatrix {
    type Output = OperatorMatrix;
    fn mul(self, rhs: &'a OperatorMatrix) -> OperatorMatrix {
        self.checked_mul(rhs).expect("operator dimension mismatch")
    }
}

impl<'a> Add<&'a OperatorMatrix> for &'a OperatorMatrix {
    type Output = OperatorMatrix;
    fn add(self, rhs: &'a OperatorMatrix) -> OperatorMatrix {
        self.checked_add(rhs).expect("operator dimension mismatch")
    }
}

impl<'a> Sub<&'a OperatorMatrix> for &'a OperatorMatrix {
    type Output = OperatorMatrix;
    fn sub(self, rhs: &'a OperatorMatrix) -> OperatorMatrix {
        self.checked_sub(rhs).expect("operator dimension mismatch")
    }
}

impl Neg for &OperatorMatrix {
    type Output = OperatorMatrix;
    fn neg(self) -> OperatorMatrix {
        self.scale_real(-1.0)
    }
}

/// A state on the truncated space; its norm is cached on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amplitudes: DVector<C64>,
    norm: f64,
}

impl StateVector {
    pub fn from_vector(amplitudes: DVector<C64>) -> Self {
        let norm = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        Self { amplitudes, norm }
    }

    pub fn from_slice(amps: &[C64]) -> Self {
        Self::from_vector(DVector::from_column_slice(amps))
    }

    /// Unit vector `|index⟩`.
    pub fn basis(dim: usize, index: usize) -> Self {
        let mut v = DVector::zeros(dim);
        v[index] = C64::new(1.0, 0.0);
        Self::from_vector(v)
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn as_vector(&self) -> &DVector<C64> {
        &self.amplitudes
    }

    pub fn amplitudes(&self) -> &[C64] {
        self.amplitudes.as_slice()
    }

    pub fn normalized(&self) -> Result<Self> {
        if self.norm == 0.0 || !self.norm.is_finite() {
            return Err(Error::InvalidArgument(
                "cannot normalise a zero or non-finite state".into(),
            ));
        }
        Ok(Self::from_vector(
            &self.amplitudes / C64::new(self.norm, 0.0),
        ))
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm - 1.0).abs() <= 1e-12
    }

    /// Euclidean distance ‖self − other‖.
    pub fn distance(&self, other: &Self) -> f64 {
        (&self.amplitudes - &other.amplitudes)
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self::from_vector(&self.amplitudes - &other.amplitudes)
    }

    pub fn scale(&self, s: C64) -> Self {
        Self::from_vector(&self.amplitudes * s)
    }

    pub fn add_scaled(&self, other: &Self, s: C64) -> Self {
        Self::from_vector(&self.amplitudes + &other.amplitudes * s)
    }
}

/// Returns `AB − BA`.
pub fn commutator(a: &OperatorMatrix, b: &OperatorMatrix) -> Result<OperatorMatrix> {
    let ab = a.checked_mul(b)?;
    let ba = b.checked_mul(a)?;
    let data = ab.data - ba.data;
    Ok(OperatorMatrix {
        data,
        structure: Structure::General,
    })
}

fn one_norm(m: &DMatrix<C64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `exp(scalar · A)` by nalgebra's Padé scaling and squaring. Unitary
/// output is tagged when `A` is Hermitian and `scalar` is purely imaginary.
pub fn matexp(a: &OperatorMatrix, scalar: C64) -> Result<OperatorMatrix> {
    if !a.is_finite() || !scalar.re.is_finite() || !scalar.im.is_finite() {
        return Err(Error::NonFinite("matexp input"));
    }
    let out = (&a.data * scalar).exp();
    if !out.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::NonFinite("matexp output"));
    }
    let structure = if a.structure == Structure::Hermitian && scalar.re == 0.0 {
        Structure::Unitary
    } else {
        Structure::General
    };
    Ok(OperatorMatrix {
        data: out,
        structure,
    })
}

/// Uniform periodic position grid with the matching spectral momentum.
#[derive(Debug, Clone)]
pub struct GridOperators {
    pub position: OperatorMatrix,
    pub momentum: OperatorMatrix,
    /// Grid points `x_j = −L/2 + j·L/d`.
    pub points: Vec<f64>,
    /// Signed angular wavenumbers in DFT order.
    pub wavenumbers: Vec<f64>,
    pub spacing: f64,
    pub length: f64,
}

impl GridOperators {
    pub fn dim(&self) -> usize {
        self.points.len()
    }

    /// Normalised Gaussian packet `exp(−(x−x0)²/(4σ²) + i k0 x)` sampled on
    /// the grid and normalised in the discrete ℓ² sense.
    pub fn gaussian_packet(&self, center: f64, width: f64, momentum: f64) -> StateVector {
        let amps: Vec<C64> = self
            .points
            .iter()
            .map(|&x| {
                let env = (-(x - center).powi(2) / (4.0 * width * width)).exp();
                C64::from_polar(env, momentum * x)
            })
            .collect();
        StateVector::from_slice(&amps)
            .normalized()
            .expect("gaussian packet has nonzero norm")
    }

    /// Discrete Fourier matrix `F_{jk} = e^{−2πi jk/d}/√d`.
    pub fn dft_matrix(&self) -> OperatorMatrix {
        dft_matrix(self.dim())
    }
}

pub fn dft_matrix(d: usize) -> OperatorMatrix {
    let norm = 1.0 / (d as f64).sqrt();
    OperatorMatrix::from_fn(d, |j, k| {
        let phase = -2.0 * PI * ((j * k) % d) as f64 / d as f64;
        C64::from_polar(norm, phase)
    })
    .tagged(Structure::Unitary)
}

/// Signed integer frequency index in DFT order (Nyquist mapped to −d/2).
pub fn signed_frequency(j: usize, d: usize) -> i64 {
    if 2 * j < d {
        j as i64
    } else {
        j as i64 - d as i64
    }
}

/// Position and spectral momentum on a periodic grid over `[−L/2, L/2)`.
pub fn build_grid_operators(d: usize, length: f64) -> Result<GridOperators> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!("grid dimension {d} < 2")));
    }
    if !(length > 0.0 && length.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "grid length {length} must be positive"
        )));
    }
    let spacing = length / d as f64;
    let points: Vec<f64> = (0..d).map(|j| -length / 2.0 + j as f64 * spacing).collect();
    let wavenumbers: Vec<f64> = (0..d)
        .map(|j| 2.0 * PI / length * signed_frequency(j, d) as f64)
        .collect();
    // p = F† diag(k) F is circulant: p_{ab} = (1/d) Σ_j k_j e^{2πi j(a−b)/d}.
    let column: Vec<C64> = (0..d)
        .map(|m| {
            wavenumbers
                .iter()
                .enumerate()
                .map(|(j, &k)| C64::from_polar(k, 2.0 * PI * ((j * m) % d) as f64 / d as f64))
                .sum::<C64>()
                / d as f64
        })
        .collect();
    let momentum = OperatorMatrix::from_fn(d, |a, b| column[(a + d - b) % d]).hermitian_part();
    let position = OperatorMatrix::from_real_diagonal(&points);
    Ok(GridOperators {
        position,
        momentum,
        points,
        wavenumbers,
        spacing,
        length,
    })
}

/// Truncated ladder operator `a` with `a|n⟩ = √n |n−1⟩`.
pub fn annihilation(d: usize) -> OperatorMatrix {
    OperatorMatrix::from_fn(d, |i, j| {
        if j == i + 1 {
            C64::new((j as f64).sqrt(), 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

/// `q = (a + a†)/√2`, `p = i(a† − a)/√2` on the lowest `d` oscillator states.
pub fn build_oscillator_operators(d: usize) -> Result<(OperatorMatrix, OperatorMatrix)> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!(
            "oscillator dimension {d} < 2"
        )));
    }
    let a = annihilation(d);
    let ad = a.adjoint();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let q = (&a + &ad).scale_real(s).hermitian_part();
    let p = (&ad - &a).scale(C64::new(0.0, s)).hermitian_part();
    Ok((q, p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(d: usize, rng: &mut ChaCha8Rng) -> OperatorMatrix {
        let m = OperatorMatrix::from_fn(d, |_, _| {
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        m.hermitian_part()
    }

    // Eigendecomposition oracle: exp(−iHT) = V diag(e^{−iλT}) V†.
    fn eig_exp(h: &OperatorMatrix, t: f64) -> DMatrix<C64> {
        let eig = nalgebra::SymmetricEigen::new(h.as_matrix().clone());
        let v = &eig.eigenvectors;
        let diag = DVector::from_iterator(
            h.dim(),
            eig.eigenvalues
                .iter()
                .map(|&l| C64::from_polar(1.0, -l * t)),
        );
        v * DMatrix::from_diagonal(&diag) * v.adjoint()
    }

    #[test]
    fn matexp_zero_is_identity() {
        let z = OperatorMatrix::zeros(4);
        let e = matexp(&z, C64::new(3.0, -2.0)).unwrap();
        assert_eq!(e.distance_from_identity(), 0.0);
    }

    #[test]
    fn matexp_diagonal() {
        let a = OperatorMatrix::from_real_diagonal(&[1.0, 2.0]);
        let e = matexp(&a, C64::new(1.0, 0.0)).unwrap();
        let e1 = 1f64.exp();
        let e2 = 2f64.exp();
        assert!((e.get(0, 0).re - e1).abs() / e1 < 1e-14);
        assert!((e.get(1, 1).re - e2).abs() / e2 < 1e-14);
        assert!(e.get(0, 1).norm() < 1e-16);
    }

    #[test]
    fn matexp_matches_eigendecomposition() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &t in &[0.01, 0.7, 3.0] {
            let h = random_hermitian(8, &mut rng);
            let e = matexp(&h, C64::new(0.0, -t)).unwrap();
            assert_eq!(e.structure(), Structure::Unitary);
            let oracle = eig_exp(&h, t);
            let gap = (e.as_matrix() - &oracle).norm();
            assert!(gap < 1e-11, "gap {gap} at t={t}");
        }
    }

    #[test]
    fn matexp_relative_accuracy_at_norm_50() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = random_hermitian(16, &mut rng);
        let t = 50.0 / h.one_norm();
        let e = matexp(&h, C64::new(0.0, -t)).unwrap();
        let oracle = eig_exp(&h, t);
        let rel = (e.as_matrix() - &oracle).norm() / oracle.norm();
        assert!(rel < 1e-12, "relative error {rel}");
        assert!(e.unitarity_defect() < 1e-11);
    }

    #[test]
    fn matexp_overflow_is_reported() {
        let a = OperatorMatrix::from_real_diagonal(&[800.0, 1.0]);
        assert_eq!(
            matexp(&a, C64::new(1.0, 0.0)).unwrap_err(),
            Error::NonFinite("matexp output")
        );
    }

    #[test]
    fn commutator_of_self_vanishes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_hermitian(6, &mut rng);
        assert_eq!(commutator(&a, &a).unwrap().frobenius_norm(), 0.0);
    }

    #[test]
    fn commutator_dim_mismatch() {
        let a = OperatorMatrix::identity(3);
        let b = OperatorMatrix::identity(4);
        assert!(matches!(commutator(&a, &b), Err(Error::DimMismatch { .. })));
    }

    #[test]
    fn grid_commutator_is_not_canonical() {
        let g = build_grid_operators(32, 10.0).unwrap();
        let c = commutator(&g.position, &g.momentum).unwrap();
        let canonical = OperatorMatrix::identity(32).scale(I);
        let gap = (&c - &canonical).frobenius_norm();
        assert!(gap > 1.0, "grid [q,p] unexpectedly close to i·I: {gap}");
    }

    #[test]
    fn ladder_commutator_has_top_corner_defect() {
        for d in [2usize, 5, 16] {
            let a = annihilation(d);
            let c = commutator(&a, &a.adjoint()).unwrap();
            for i in 0..d {
                for j in 0..d {
                    let expected = if i != j {
                        0.0
                    } else if i == d - 1 {
                        -((d - 1) as f64)
                    } else {
                        1.0
                    };
                    assert!((c.get(i, j) - C64::new(expected, 0.0)).norm() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn grid_momentum_two_points() {
        let length = 3.0;
        let g = build_grid_operators(2, length).unwrap();
        let eig = nalgebra::SymmetricEigen::new(g.momentum.as_matrix().clone());
        let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((ev[0] + 2.0 * PI / length).abs() < 1e-13);
        assert!(ev[1].abs() < 1e-13);
    }

    #[test]
    fn grid_momentum_hermitian_and_dft_diagonal() {
        let g = build_grid_operators(64, 20.0).unwrap();
        assert!(g.momentum.hermiticity_residual() < 1e-13);
        let f = g.dft_matrix();
        let diag = f.as_matrix() * g.momentum.as_matrix() * f.as_matrix().adjoint();
        let expected = DMatrix::from_diagonal(&DVector::from_iterator(
            64,
            g.wavenumbers.iter().map(|&k| C64::new(k, 0.0)),
        ));
        assert!((diag - expected).norm() < 1e-12);
    }

    #[test]
    fn grid_translation_shifts_delta() {
        let d = 16;
        let g = build_grid_operators(d, 8.0).unwrap();
        let shift = 3;
        let s = shift as f64 * g.spacing;
        let u = matexp(&g.momentum, C64::new(0.0, -s)).unwrap();
        let out = u.apply(&StateVector::basis(d, 4)).unwrap();
        let expected = StateVector::basis(d, 4 + shift);
        assert!(out.distance(&expected) < 1e-12);
    }

    #[test]
    fn oscillator_operators_small() {
        let (q, p) = build_oscillator_operators(2).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((q.get(0, 1).re - s).abs() < 1e-16 && (q.get(1, 0).re - s).abs() < 1e-16);
        assert_eq!(q.get(0, 0), C64::new(0.0, 0.0));
        assert!(q.hermiticity_residual() < 1e-13 && p.hermiticity_residual() < 1e-13);
    }

    #[test]
    fn oscillator_spectrum() {
        let d = 64;
        let (q, p) = build_oscillator_operators(d).unwrap();
        let h = (&(&p * &p) + &(&q * &q)).scale_real(0.5);
        let eig = nalgebra::SymmetricEigen::new(h.as_matrix().clone());
        // The truncated (p² + q²)/2 also carries one spurious level (d−1)/2
        // from the top corner; every physical level n ≤ d/2 must be present.
        for n in 0..=d / 2 {
            let target = n as f64 + 0.5;
            let best = eig
                .eigenvalues
                .iter()
                .map(|e| (e - target).abs())
                .fold(f64::INFINITY, f64::min);
            assert!(best < 1e-10, "level {n}: closest gap {best}");
        }
    }

    #[test]
    fn state_normalisation() {
        let g = build_grid_operators(32, 10.0).unwrap();
        let psi = g.gaussian_packet(0.5, 1.0, 0.3);
        assert!(psi.is_normalized());
        assert!(StateVector::from_slice(&[C64::new(0.0, 0.0)])
            .normalized()
            .is_err());
    }

    #[test]
    fn non_finite_entries_rejected() {
        let m = DMatrix::from_element(2, 2, C64::new(f64::NAN, 0.0));
        assert!(OperatorMatrix::from_matrix(m).is_err());
    }
}
