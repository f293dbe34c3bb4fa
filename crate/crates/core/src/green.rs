//! Discrete Green operators of the reference medium.
//!
//! For a finite-difference scheme with gradient symbol `D(q)` the
//! displacement Green matrix `Omega(q)` inverts
//!
//! ```text
//! tetrahedral:  [Omega^-1]_jl = sum_ik l0_ijkl (conj(D_i) D_k + D_i conj(D_k))
//! rotated:      [Omega^-1]_jl = sum_ik l0_ijkl  conj(D_i) D_k
//! ```
//!
//! and is set to zero where `D(q) = 0`. The strain-based forms follow:
//!
//! ```text
//! Gamma_ijk  = 1/2 (D_i Omega_jk + D_j Omega_ik)
//! Gd_ijkl    = 1/4 (D_i Omega_jk D*_l + D_j Omega_ik D*_l + D_i Omega_jl D*_k + D_j Omega_il D*_k)
//! Gnd_ijkl   = -1/4 (same with D*_l, D*_k replaced by D_l, D_k)
//! ```

use nalgebra::Matrix6;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{FreqVector, Grid};
use crate::stencil::{Scheme, StencilTable};
use crate::tensor::{cplx, voigt_index, IsotropicConstants, VoigtTensor4, VOIGT_PAIRS, VOIGT_WEIGHTS};

type C = Complex64;

/// Relative threshold under which a 3x3 Green matrix counts as singular.
pub const SINGULAR_TOL: f64 = 1e-12;

/// Per-frequency Green data for a finite-difference scheme.
#[derive(Clone, Debug)]
pub struct GreenTable {
    scheme: Scheme,
    grid: Grid,
    lam0: VoigtTensor4,
    omega: Vec<[f64; 6]>,
    gamma: Option<Vec<[[C; 3]; 6]>>,
    strain_green: Option<StrainGreenTable>,
}

/// Fourth-order strain Green operators, in Voigt layout `G[I][J] = G_ijkl`.
#[derive(Clone, Debug)]
pub struct StrainGreenTable {
    pub gd: Vec<[[C; 6]; 6]>,
    /// Only present for the tetrahedral scheme.
    pub gnd: Option<Vec<[[C; 6]; 6]>>,
}

impl GreenTable {
    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn reference(&self) -> &VoigtTensor4 {
        &self.lam0
    }

    /// `Omega(q)` packed as (11, 22, 33, 23, 13, 12).
    #[inline]
    pub fn omega(&self, idx: usize) -> &[f64; 6] {
        &self.omega[idx]
    }

    pub fn gamma(&self) -> Option<&[[[C; 3]; 6]]> {
        self.gamma.as_deref()
    }

    pub fn strain_green(&self) -> Option<&StrainGreenTable> {
        self.strain_green.as_ref()
    }
}

/// `[Omega^-1](q)` as a complex 3x3 matrix.
pub fn omega_inverse(scheme: Scheme, lam0: &VoigtTensor4, d: &[C; 3]) -> [[C; 3]; 3] {
    let dc = cplx::conj3(d);
    let mut m = [[cplx::ZERO; 3]; 3];
    for (j, row) in m.iter_mut().enumerate() {
        for (l, v) in row.iter_mut().enumerate() {
            let mut acc = cplx::ZERO;
            for i in 0..3 {
                for k in 0..3 {
                    let lam = lam0.get(i, j, k, l);
                    if lam == 0.0 {
                        continue;
                    }
                    let mut t = dc[i] * d[k];
                    if scheme == Scheme::Tetrahedral {
                        t += d[i] * dc[k];
                    }
                    acc += t * lam;
                }
            }
            *v = acc;
        }
    }
    m
}

/// `Omega(q)` for one frequency, packed symmetric; zero where `D = 0`.
///
/// `index` and `q` only label the error.
pub fn omega_at(scheme: Scheme, lam0: &VoigtTensor4, d: &[C; 3], index: usize, q: [f64; 3]) -> Result<[f64; 6]> {
    if d.iter().all(|v| *v == cplx::ZERO) {
        return Ok([0.0; 6]);
    }
    let m = omega_inverse(scheme, lam0, d);
    let scale = m.iter().flatten().fold(0.0f64, |a, v| a.max(v.norm()));
    let imag = m.iter().flatten().fold(0.0f64, |a, v| a.max(v.im.abs()));
    if imag > 1e-12 * scale {
        return Err(Error::ComplexGreen { index, imag });
    }
    let r = m.map(|row| row.map(|v| v.re));
    let a = [
        r[0][0],
        r[1][1],
        r[2][2],
        0.5 * (r[1][2] + r[2][1]),
        0.5 * (r[0][2] + r[2][0]),
        0.5 * (r[0][1] + r[1][0]),
    ];
    invert_sym3(&a, scale).ok_or(Error::SingularGreen { index, q })
}

/// Adjugate inverse of a packed symmetric 3x3 matrix.
fn invert_sym3(a: &[f64; 6], scale: f64) -> Option<[f64; 6]> {
    let [xx, yy, zz, yz, xz, xy] = *a;
    let c_xx = yy * zz - yz * yz;
    let c_yy = xx * zz - xz * xz;
    let c_zz = xx * yy - xy * xy;
    let c_yz = xy * xz - xx * yz;
    let c_xz = xy * yz - yy * xz;
    let c_xy = xz * yz - zz * xy;
    let det = xx * c_xx + xy * c_xy + xz * c_xz;
    if !det.is_finite() || det.abs() <= SINGULAR_TOL * scale.powi(3) {
        return None;
    }
    let s = 1.0 / det;
    Some([c_xx * s, c_yy * s, c_zz * s, c_yz * s, c_xz * s, c_xy * s])
}

#[inline]
pub(crate) fn sym3_get(m: &[f64; 6], i: usize, j: usize) -> f64 {
    m[voigt_index(i, j)]
}

/// Tabulates `Omega(q)` over the stencil's grid.
pub fn assemble_omega(stencil: &StencilTable, lam0: &VoigtTensor4) -> Result<GreenTable> {
    validate_reference(lam0)?;
    let grid = *stencil.grid();
    let scheme = stencil.scheme();
    let omega = (0..grid.len())
        .map(|i| omega_at(scheme, lam0, stencil.d(i), i, grid.frequency(i).q))
        .collect::<Result<Vec<_>>>()?;
    Ok(GreenTable { scheme, grid, lam0: *lam0, omega, gamma: None, strain_green: None })
}

/// `Gamma_ijk(q)` in layout `[I][k]`.
#[inline]
pub fn gamma_entry(d: &[C; 3], omega: &[f64; 6]) -> [[C; 3]; 6] {
    let mut g = [[cplx::ZERO; 3]; 6];
    for (slot, &(i, j)) in VOIGT_PAIRS.iter().enumerate() {
        for (k, v) in g[slot].iter_mut().enumerate() {
            *v = 0.5 * (d[i] * sym3_get(omega, j, k) + d[j] * sym3_get(omega, i, k));
        }
    }
    g
}

/// Adds `Gamma(q)` to the table.
pub fn assemble_gamma(mut table: GreenTable, stencil: &StencilTable) -> GreenTable {
    let gamma = (0..table.grid.len()).map(|i| gamma_entry(stencil.d(i), &table.omega[i])).collect();
    table.gamma = Some(gamma);
    table
}

/// `(Gd, Gnd)` at one frequency.
pub fn strain_green_entry(d: &[C; 3], omega: &[f64; 6]) -> ([[C; 6]; 6], [[C; 6]; 6]) {
    let dc = cplx::conj3(d);
    let mut gd = [[cplx::ZERO; 6]; 6];
    let mut gnd = [[cplx::ZERO; 6]; 6];
    for (ii, &(i, j)) in VOIGT_PAIRS.iter().enumerate() {
        for (jj, &(k, l)) in VOIGT_PAIRS.iter().enumerate() {
            let o = |a, b| sym3_get(omega, a, b);
            let t_l = d[i] * o(j, k) + d[j] * o(i, k);
            let t_k = d[i] * o(j, l) + d[j] * o(i, l);
            gd[ii][jj] = 0.25 * (t_l * dc[l] + t_k * dc[k]);
            gnd[ii][jj] = -0.25 * (t_l * d[l] + t_k * d[k]);
        }
    }
    (gd, gnd)
}

/// Adds the fourth-order strain Green operators to the table.
///
/// Memory grows as 72 complex numbers per voxel; meant for small grids.
pub fn assemble_strain_green(mut table: GreenTable, stencil: &StencilTable) -> GreenTable {
    let n = table.grid.len();
    let mut gd = Vec::with_capacity(n);
    let mut gnd = Vec::with_capacity(n);
    for i in 0..n {
        let (a, b) = strain_green_entry(stencil.d(i), &table.omega[i]);
        gd.push(a);
        gnd.push(b);
    }
    let gnd = (table.scheme == Scheme::Tetrahedral).then_some(gnd);
    table.strain_green = Some(StrainGreenTable { gd, gnd });
    table
}

/// Strain Green operator used for real-space analysis at an arbitrary `q`:
/// `Re(Gd + Gnd)` for the tetrahedral scheme, `Gd` for the rotated one.
pub fn analysis_green(scheme: Scheme, lam0: &VoigtTensor4, q: &FreqVector) -> Result<[[C; 6]; 6]> {
    let d = crate::stencil::gradient_symbol(scheme, q)
        .ok_or_else(|| Error::InvalidArgument("no discrete Green operator for the continuum scheme".into()))?;
    let omega = omega_at(scheme, lam0, &d, 0, q.q)?;
    let (gd, gnd) = strain_green_entry(&d, &omega);
    Ok(match scheme {
        Scheme::Tetrahedral => {
            let mut g = [[cplx::ZERO; 6]; 6];
            for a in 0..6 {
                for b in 0..6 {
                    g[a][b] = C::new((gd[a][b] + gnd[a][b]).re, 0.0);
                }
            }
            g
        }
        _ => gd,
    })
}

/// `G : s` with Voigt weights.
#[inline]
pub fn apply_voigt4(g: &[[C; 6]; 6], s: &[C; 6]) -> [C; 6] {
    let mut out = [cplx::ZERO; 6];
    for (o, row) in out.iter_mut().zip(g) {
        for k in 0..6 {
            *o += row[k] * s[k] * VOIGT_WEIGHTS[k];
        }
    }
    out
}

/// Continuum Green operator of an isotropic reference medium, as a Voigt
/// matrix acting like a stiffness (`(G:s)_I = sum_J G_IJ w_J s_J`).
///
/// Zero at `q = 0`; the reference compliance at frequencies with a
/// component equal to `pi` (even axes only reach it). Non-Nyquist
/// frequencies use the representative of `q` in `(-pi, pi]`.
pub fn ms_gamma0(lambda0: f64, mu0: f64, q: &FreqVector) -> [[f64; 6]; 6] {
    if q.is_zero() {
        return [[0.0; 6]; 6];
    }
    if is_nyquist(q) {
        return VoigtTensor4::isotropic_lame(lambda0, mu0).inverse().map(|s| s.0).unwrap_or([[0.0; 6]; 6]);
    }
    let xi = q.centered();
    let n2: f64 = xi.iter().map(|v| v * v).sum();
    let n = xi.map(|v| v / n2.sqrt());
    let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    let c2 = (lambda0 + mu0) / (mu0 * (lambda0 + 2.0 * mu0));
    let mut g = [[0.0; 6]; 6];
    for (ii, &(i, j)) in VOIGT_PAIRS.iter().enumerate() {
        for (jj, &(k, l)) in VOIGT_PAIRS.iter().enumerate() {
            let first = delta(k, i) * n[l] * n[j] + delta(l, i) * n[k] * n[j] + delta(k, j) * n[l] * n[i] + delta(l, j) * n[k] * n[i];
            g[ii][jj] = first / (4.0 * mu0) - c2 * n[i] * n[j] * n[k] * n[l];
        }
    }
    g
}

#[inline]
fn is_nyquist(q: &FreqVector) -> bool {
    q.q.iter().any(|v| (v - std::f64::consts::PI).abs() < 1e-12)
}

/// Fast `Gamma0(q) : s` with the same conventions as [`ms_gamma0`];
/// `compliance` must be the inverse of the reference stiffness.
#[inline]
pub fn ms_apply(lambda0: f64, mu0: f64, compliance: &VoigtTensor4, q: &FreqVector, s: &[C; 6]) -> [C; 6] {
    if q.is_zero() {
        return [cplx::ZERO; 6];
    }
    if is_nyquist(q) {
        return compliance.contract_complex(s);
    }
    let xi = q.centered();
    let n2: f64 = xi.iter().map(|v| v * v).sum();
    let inv = 1.0 / n2.sqrt();
    let n = xi.map(|v| C::new(v * inv, 0.0));
    let t = cplx::sym_dot(s, &n);
    let nt = n[0] * t[0] + n[1] * t[1] + n[2] * t[2];
    let c2 = (lambda0 + mu0) / (mu0 * (lambda0 + 2.0 * mu0));
    let mut out = [cplx::ZERO; 6];
    for (o, &(i, j)) in out.iter_mut().zip(VOIGT_PAIRS.iter()) {
        *o = (n[i] * t[j] + n[j] * t[i]) / (2.0 * mu0) - n[i] * n[j] * nt * c2;
    }
    out
}

/// Reference stiffness must be major-symmetric and positive definite.
pub fn validate_reference(lam0: &VoigtTensor4) -> Result<()> {
    if !lam0.is_finite() || !lam0.is_major_symmetric(1e-10) {
        return Err(Error::Config("reference stiffness must be finite and major-symmetric".into()));
    }
    let w = Matrix6::from_diagonal(&nalgebra::Vector6::from_row_slice(&VOIGT_WEIGHTS));
    let c = Matrix6::from_fn(|i, j| lam0.0[i][j]);
    let m = w.map(f64::sqrt) * c * w.map(f64::sqrt);
    if m.cholesky().is_none() {
        return Err(Error::Config("reference stiffness must be positive definite".into()));
    }
    Ok(())
}

/// How the reference stiffness `lambda0` is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ReferenceRule {
    /// `alpha * lambda_matrix`.
    ScaleMatrix(f64),
    /// Arithmetic mean over the phase palette.
    MeanPhases,
    /// Isotropic with bulk modulus `alpha k_m + (1 - alpha) k_inc` and the
    /// matrix Poisson ratio. Needs an isotropic matrix and one inclusion phase.
    BulkInterp(f64),
    /// Isotropic constants given directly.
    Isotropic(IsotropicConstants),
    /// Full Voigt matrix given directly.
    Explicit(VoigtTensor4),
}

impl ReferenceRule {
    /// Resolves the rule. `phases[0]` is the matrix.
    pub fn resolve(&self, phases: &[VoigtTensor4]) -> Result<VoigtTensor4> {
        let matrix = phases.first().ok_or_else(|| Error::Config("empty phase palette".into()))?;
        let lam0 = match *self {
            Self::ScaleMatrix(alpha) => *matrix * alpha,
            Self::MeanPhases => {
                let sum = phases.iter().fold(VoigtTensor4::ZERO, |acc, c| acc + *c);
                sum * (1.0 / phases.len() as f64)
            }
            Self::BulkInterp(alpha) => {
                let (lm, mm) = matrix
                    .isotropic_moduli()
                    .ok_or_else(|| Error::Config("bulk_interp needs an isotropic matrix phase".into()))?;
                if phases.len() != 2 {
                    return Err(Error::Config(format!("bulk_interp needs exactly one inclusion phase, got {}", phases.len() - 1)));
                }
                let k_inc = phases[1].bulk_modulus();
                let k_m = lm + 2.0 * mm / 3.0;
                let nu = lm / (2.0 * (lm + mm));
                let k0 = alpha * k_m + (1.0 - alpha) * k_inc;
                let mu0 = 3.0 * k0 * (1.0 - 2.0 * nu) / (2.0 * (1.0 + nu));
                crate::tensor::isotropic_stiffness(IsotropicConstants::KMu { k: k0, mu: mu0 })?
            }
            Self::Isotropic(c) => crate::tensor::isotropic_stiffness(c)?,
            Self::Explicit(c) => c,
        };
        validate_reference(&lam0)?;
        Ok(lam0)
    }
}
