//! Symmetric second- and fourth-order tensors in Voigt storage.
//!
//! Components are ordered (11, 22, 33, 23, 13, 12). Shear entries hold the
//! tensor component, not the engineering strain, so contractions carry the
//! factor 2 for off-diagonal pairs explicitly:
//!
//! ```text
//! (C : e)_I = sum_J C_IJ w_J e_J        w = (1, 1, 1, 2, 2, 2)
//! a : b     = sum_I w_I a_I b_I
//! ```

use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use nalgebra::Matrix6;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tensor index pair of each Voigt slot.
pub const VOIGT_PAIRS: [(usize, usize); 6] = [(0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1)];

/// Multiplicity of each Voigt slot in a full double contraction.
pub const VOIGT_WEIGHTS: [f64; 6] = [1.0, 1.0, 1.0, 2.0, 2.0, 2.0];

const VOIGT_INDEX: [[usize; 3]; 3] = [[0, 5, 4], [5, 1, 3], [4, 3, 2]];

/// Voigt slot of the tensor index pair `(i, j)` (zero based).
#[inline]
pub fn voigt_index(i: usize, j: usize) -> usize {
    VOIGT_INDEX[i][j]
}

/// Symmetric second-order tensor.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VoigtTensor2(pub [f64; 6]);

impl VoigtTensor2 {
    pub const ZERO: Self = Self([0.0; 6]);

    pub fn new(c: [f64; 6]) -> Self {
        Self(c)
    }

    pub fn identity() -> Self {
        Self([1.0, 1.0, 1.0, 0.0, 0.0, 0.0])
    }

    pub fn hydrostatic(p: f64) -> Self {
        Self([p, p, p, 0.0, 0.0, 0.0])
    }

    /// Builds from a full 3x3 matrix, symmetrizing the off-diagonal pairs.
    pub fn from_matrix(m: [[f64; 3]; 3]) -> Self {
        let mut c = [0.0; 6];
        for (slot, &(i, j)) in VOIGT_PAIRS.iter().enumerate() {
            c[slot] = 0.5 * (m[i][j] + m[j][i]);
        }
        Self(c)
    }

    pub fn to_matrix(&self) -> [[f64; 3]; 3] {
        let mut m = [[0.0; 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.0[voigt_index(i, j)];
            }
        }
        m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[voigt_index(i, j)]
    }

    pub fn trace(&self) -> f64 {
        self.0[0] + self.0[1] + self.0[2]
    }

    /// Full double contraction `a : b`.
    pub fn ddot(&self, other: &Self) -> f64 {
        (0..6).map(|k| VOIGT_WEIGHTS[k] * self.0[k] * other.0[k]).sum()
    }

    /// Frobenius norm over all nine entries.
    pub fn frobenius_norm(&self) -> f64 {
        self.ddot(self).sqrt()
    }

    pub fn deviator(&self) -> Self {
        let p = self.trace() / 3.0;
        let mut c = self.0;
        for v in &mut c[..3] {
            *v -= p;
        }
        Self(c)
    }

    pub fn von_mises(&self) -> f64 {
        let s = self.deviator();
        (1.5 * s.ddot(&s)).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl Index<usize> for VoigtTensor2 {
    type Output = f64;
    fn index(&self, k: usize) -> &f64 {
        &self.0[k]
    }
}

impl IndexMut<usize> for VoigtTensor2 {
    fn index_mut(&mut self, k: usize) -> &mut f64 {
        &mut self.0[k]
    }
}

impl Add for VoigtTensor2 {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        self += rhs;
        self
    }
}

impl AddAssign for VoigtTensor2 {
    fn add_assign(&mut self, rhs: Self) {
        for k in 0..6 {
            self.0[k] += rhs.0[k];
        }
    }
}

impl Sub for VoigtTensor2 {
    type Output = Self;
    fn sub(mut self, rhs: Self) -> Self {
        self -= rhs;
        self
    }
}

impl SubAssign for VoigtTensor2 {
    fn sub_assign(&mut self, rhs: Self) {
        for k in 0..6 {
            self.0[k] -= rhs.0[k];
        }
    }
}

impl Neg for VoigtTensor2 {
    type Output = Self;
    fn neg(self) -> Self {
        self * -1.0
    }
}

impl Mul<f64> for VoigtTensor2 {
    type Output = Self;
    fn mul(mut self, s: f64) -> Self {
        for v in &mut self.0 {
            *v *= s;
        }
        self
    }
}

/// Fourth-order tensor with minor symmetries, stored as
/// `C[I][J] = C_ijkl` for `I ~ (ij)`, `J ~ (kl)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VoigtTensor4(pub [[f64; 6]; 6]);

impl Default for VoigtTensor4 {
    fn default() -> Self {
        Self::ZERO
    }
}

impl VoigtTensor4 {
    pub const ZERO: Self = Self([[0.0; 6]; 6]);

    pub fn new(m: [[f64; 6]; 6]) -> Self {
        Self(m)
    }

    /// Symmetric fourth-order identity, `I : e = e`.
    pub fn identity() -> Self {
        let mut m = [[0.0; 6]; 6];
        for (k, row) in m.iter_mut().enumerate() {
            row[k] = 1.0 / VOIGT_WEIGHTS[k];
        }
        Self(m)
    }

    /// Isotropic stiffness from the Lamé constants.
    pub fn isotropic_lame(lambda: f64, mu: f64) -> Self {
        let mut m = [[0.0; 6]; 6];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] = lambda;
            }
            m[i][i] += 2.0 * mu;
            m[i + 3][i + 3] = mu;
        }
        Self(m)
    }

    /// Cubic stiffness aligned with the grid axes.
    pub fn cubic(c11: f64, c12: f64, c44: f64) -> Self {
        let mut m = [[0.0; 6]; 6];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] = if i == j { c11 } else { c12 };
            }
            m[i + 3][i + 3] = c44;
        }
        Self(m)
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().flatten().all(|&v| v == 0.0)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.0[voigt_index(i, j)][voigt_index(k, l)]
    }

    /// `C : e`.
    #[inline]
    pub fn contract(&self, e: &VoigtTensor2) -> VoigtTensor2 {
        let mut we = e.0;
        for k in 3..6 {
            we[k] *= 2.0;
        }
        let mut out = [0.0; 6];
        for (o, row) in out.iter_mut().zip(&self.0) {
            *o = row.iter().zip(&we).map(|(a, b)| a * b).sum();
        }
        VoigtTensor2(out)
    }

    /// `C : e` for a complex tensor.
    #[inline]
    pub fn contract_complex(&self, e: &[Complex64; 6]) -> [Complex64; 6] {
        let mut we = *e;
        for v in &mut we[3..] {
            *v *= 2.0;
        }
        let mut out = [Complex64::new(0.0, 0.0); 6];
        for (o, row) in out.iter_mut().zip(&self.0) {
            for (a, b) in row.iter().zip(&we) {
                *o += b * *a;
            }
        }
        out
    }

    /// `A : B`.
    pub fn compose(&self, other: &Self) -> Self {
        let mut m = [[0.0; 6]; 6];
        for i in 0..6 {
            for j in 0..6 {
                m[i][j] = (0..6).map(|k| self.0[i][k] * VOIGT_WEIGHTS[k] * other.0[k][j]).sum();
            }
        }
        Self(m)
    }

    /// Inverse with respect to `:`, so that `inverse : C = I`. `None` when
    /// the tensor is singular (void phases included).
    pub fn inverse(&self) -> Option<Self> {
        let w = Matrix6::from_diagonal(&nalgebra::Vector6::from_row_slice(&VOIGT_WEIGHTS));
        let c = Matrix6::from_fn(|i, j| self.0[i][j]);
        let wcw = w * c * w;
        let scale = wcw.abs().max();
        if scale == 0.0 {
            return None;
        }
        let lu = wcw.lu();
        let det = lu.determinant();
        if !det.is_finite() || det.abs() <= 1e-13 * scale.powi(6) {
            return None;
        }
        let inv = lu.try_inverse()?;
        let mut m = [[0.0; 6]; 6];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = inv[(i, j)];
            }
        }
        Some(Self(m))
    }

    pub fn is_major_symmetric(&self, tol: f64) -> bool {
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        (0..6).all(|i| (0..6).all(|j| (self.0[i][j] - self.0[j][i]).abs() <= tol * scale))
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Lamé constants `(lambda, mu)` if the tensor is isotropic.
    pub fn isotropic_moduli(&self) -> Option<(f64, f64)> {
        let lambda = self.0[0][1];
        let mu = self.0[3][3];
        let candidate = Self::isotropic_lame(lambda, mu);
        let scale = self.max_abs();
        if scale == 0.0 {
            return None;
        }
        let close = (0..6).all(|i| (0..6).all(|j| (self.0[i][j] - candidate.0[i][j]).abs() <= 1e-10 * scale));
        close.then_some((lambda, mu))
    }

    /// Bulk modulus `(C_11 + 2 C_12) / 3` averaged over the normal block.
    pub fn bulk_modulus(&self) -> f64 {
        let s: f64 = (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).map(|(i, j)| self.0[i][j]).sum();
        s / 9.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|v| v.is_finite())
    }
}

impl Add for VoigtTensor4 {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        for i in 0..6 {
            for j in 0..6 {
                self.0[i][j] += rhs.0[i][j];
            }
        }
        self
    }
}

impl Sub for VoigtTensor4 {
    type Output = Self;
    fn sub(mut self, rhs: Self) -> Self {
        for i in 0..6 {
            for j in 0..6 {
                self.0[i][j] -= rhs.0[i][j];
            }
        }
        self
    }
}

impl Mul<f64> for VoigtTensor4 {
    type Output = Self;
    fn mul(mut self, s: f64) -> Self {
        for v in self.0.iter_mut().flatten() {
            *v *= s;
        }
        self
    }
}

/// Isotropic elastic constants in one of the common parametrizations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum IsotropicConstants {
    /// Shear modulus and Poisson ratio.
    MuNu { mu: f64, nu: f64 },
    /// Young modulus and Poisson ratio.
    ENu { e: f64, nu: f64 },
    /// Bulk and shear moduli.
    KMu { k: f64, mu: f64 },
    /// Lamé constants.
    Lame { lambda: f64, mu: f64 },
}

impl IsotropicConstants {
    /// Lamé constants `(lambda, mu)`; rejects non-positive-definite input.
    pub fn lame(&self) -> Result<(f64, f64)> {
        let bad = |what: &str| Err(Error::Material(format!("{what} in {self:?}")));
        let check_nu = |nu: f64| nu > -1.0 && nu < 0.5;
        let (lambda, mu) = match *self {
            Self::MuNu { mu, nu } => {
                if !(mu > 0.0) || !check_nu(nu) {
                    return bad("need mu > 0 and -1 < nu < 0.5");
                }
                (2.0 * mu * nu / (1.0 - 2.0 * nu), mu)
            }
            Self::ENu { e, nu } => {
                if !(e > 0.0) || !check_nu(nu) {
                    return bad("need E > 0 and -1 < nu < 0.5");
                }
                let mu = e / (2.0 * (1.0 + nu));
                (2.0 * mu * nu / (1.0 - 2.0 * nu), mu)
            }
            Self::KMu { k, mu } => {
                if !(k > 0.0) || !(mu > 0.0) {
                    return bad("need k > 0 and mu > 0");
                }
                (k - 2.0 * mu / 3.0, mu)
            }
            Self::Lame { lambda, mu } => {
                if !(mu > 0.0) || !(3.0 * lambda + 2.0 * mu > 0.0) {
                    return bad("need mu > 0 and 3 lambda + 2 mu > 0");
                }
                (lambda, mu)
            }
        };
        if !lambda.is_finite() || !mu.is_finite() {
            return bad("non-finite moduli");
        }
        Ok((lambda, mu))
    }
}

/// Isotropic stiffness tensor; fails for non-positive-definite constants.
pub fn isotropic_stiffness(constants: IsotropicConstants) -> Result<VoigtTensor4> {
    let (lambda, mu) = constants.lame()?;
    Ok(VoigtTensor4::isotropic_lame(lambda, mu))
}

/// `C : e`.
pub fn double_contract_42(c: &VoigtTensor4, e: &VoigtTensor2) -> VoigtTensor2 {
    c.contract(e)
}

/// Von Mises equivalent stress.
pub fn von_mises(s: &VoigtTensor2) -> f64 {
    s.von_mises()
}

/// Complex Voigt helpers used per frequency.
pub(crate) mod cplx {
    use super::VOIGT_PAIRS;
    use num_complex::Complex64;

    pub type C = Complex64;
    pub const ZERO: C = C::new(0.0, 0.0);

    /// `sym(a ⊗ b)`.
    #[inline]
    pub fn sym_outer(a: &[C; 3], b: &[C; 3]) -> [C; 6] {
        let mut out = [ZERO; 6];
        for (o, &(i, j)) in out.iter_mut().zip(VOIGT_PAIRS.iter()) {
            *o = 0.5 * (a[i] * b[j] + a[j] * b[i]);
        }
        out
    }

    /// `s · v` with `s` symmetric.
    #[inline]
    pub fn sym_dot(s: &[C; 6], v: &[C; 3]) -> [C; 3] {
        [
            s[0] * v[0] + s[5] * v[1] + s[4] * v[2],
            s[5] * v[0] + s[1] * v[1] + s[3] * v[2],
            s[4] * v[0] + s[3] * v[1] + s[2] * v[2],
        ]
    }

    /// Symmetric 3x3 real matrix (packed like Voigt) times a complex vector.
    #[inline]
    pub fn sym3_apply(m: &[f64; 6], v: &[C; 3]) -> [C; 3] {
        [
            v[0] * m[0] + v[1] * m[5] + v[2] * m[4],
            v[0] * m[5] + v[1] * m[1] + v[2] * m[3],
            v[0] * m[4] + v[1] * m[3] + v[2] * m[2],
        ]
    }

    #[inline]
    pub fn conj3(v: &[C; 3]) -> [C; 3] {
        [v[0].conj(), v[1].conj(), v[2].conj()]
    }

    #[inline]
    pub fn norm_sqr3(v: &[C; 3]) -> f64 {
        v.iter().map(|c| c.norm_sqr()).sum()
    }
}
