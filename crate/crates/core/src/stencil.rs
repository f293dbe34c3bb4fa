//! Frequency symbols of the discrete gradient stencils.
//!
//! The tetrahedral stencil places the strain at voxel centers and the
//! displacement at the corners; each voxel uses four corners of one FCC
//! sub-lattice. With `E(a,b,c) = exp(i/2 (a q1 + b q2 + c q3))`:
//!
//! ```text
//! D1 = 1/2 [E(+,+,+) + E(+,-,-) - E(-,+,-) - E(-,-,+)]
//! D2 = 1/2 [E(+,+,+) - E(+,-,-) + E(-,+,-) - E(-,-,+)]
//! D3 = 1/2 [E(+,+,+) - E(+,-,-) - E(-,+,-) + E(-,-,+)]
//! ```
//!
//! The rotated (staggered) stencil averages forward differences over the
//! eight voxel corners, without the half-voxel phase factor:
//!
//! ```text
//! D1 = 1/4 (e^{i q1} - 1)(e^{i q2} + 1)(e^{i q3} + 1)   and cyclic
//! ```

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::grid::{exact_cis, FreqVector, Grid};

/// Discretization scheme.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Tetrahedral finite differences on two interleaved FCC sub-lattices.
    Tetrahedral,
    /// Rotated staggered-grid finite differences.
    Rotated,
    /// Continuum Green operator with the classical fixed-point iteration.
    MoulinecSuquet,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Tetrahedral => "tetrahedral",
            Self::Rotated => "rotated",
            Self::MoulinecSuquet => "moulinec_suquet",
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Scheme {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "tetrahedral" | "tetra" => Ok(Self::Tetrahedral),
            "rotated" | "willot" => Ok(Self::Rotated),
            "moulinec_suquet" | "ms" => Ok(Self::MoulinecSuquet),
            other => Err(format!("unknown scheme `{other}`")),
        }
    }
}

/// Tetrahedral gradient symbol `D(q)`.
pub fn tetrahedral_d(q: &FreqVector) -> [Complex64; 3] {
    let e = q.q.map(|v| exact_cis(0.5 * v));
    let c = e.map(|v| v.conj());
    let t0 = e[0] * e[1] * e[2];
    let t1 = e[0] * c[1] * c[2];
    let t2 = c[0] * e[1] * c[2];
    let t3 = c[0] * c[1] * e[2];
    [
        0.5 * (t0 + t1 - t2 - t3),
        0.5 * (t0 - t1 + t2 - t3),
        0.5 * (t0 - t1 - t2 + t3),
    ]
}

/// Rotated-scheme gradient symbol `D(q)`.
pub fn rotated_d(q: &FreqVector) -> [Complex64; 3] {
    let p = q.q.map(exact_cis);
    let one = Complex64::new(1.0, 0.0);
    let minus = p.map(|v| v - one);
    let plus = p.map(|v| v + one);
    [
        0.25 * minus[0] * plus[1] * plus[2],
        0.25 * plus[0] * minus[1] * plus[2],
        0.25 * plus[0] * plus[1] * minus[2],
    ]
}

/// Gradient symbol of a finite-difference scheme, `None` for the continuum one.
pub fn gradient_symbol(scheme: Scheme, q: &FreqVector) -> Option<[Complex64; 3]> {
    match scheme {
        Scheme::Tetrahedral => Some(tetrahedral_d(q)),
        Scheme::Rotated => Some(rotated_d(q)),
        Scheme::MoulinecSuquet => None,
    }
}

/// `D(q)` tabulated over a grid.
#[derive(Clone, Debug)]
pub struct StencilTable {
    scheme: Scheme,
    grid: Grid,
    d: Vec<[Complex64; 3]>,
}

impl StencilTable {
    /// Tabulates the tetrahedral symbol; the grid must have even dimensions.
    pub fn tetrahedral(grid: &Grid) -> Result<Self> {
        grid.require_even()?;
        Ok(Self::build(Scheme::Tetrahedral, grid, tetrahedral_d))
    }

    pub fn rotated(grid: &Grid) -> Self {
        Self::build(Scheme::Rotated, grid, rotated_d)
    }

    /// Table for a finite-difference scheme; `None` for Moulinec-Suquet.
    pub fn for_scheme(scheme: Scheme, grid: &Grid) -> Result<Option<Self>> {
        match scheme {
            Scheme::Tetrahedral => Self::tetrahedral(grid).map(Some),
            Scheme::Rotated => Ok(Some(Self::rotated(grid))),
            Scheme::MoulinecSuquet => Ok(None),
        }
    }

    fn build(scheme: Scheme, grid: &Grid, f: fn(&FreqVector) -> [Complex64; 3]) -> Self {
        let d = (0..grid.len()).map(|i| f(&grid.frequency(i))).collect();
        Self { scheme, grid: *grid, d }
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn d(&self, idx: usize) -> &[Complex64; 3] {
        &self.d[idx]
    }

    pub fn values(&self) -> &[[Complex64; 3]] {
        &self.d
    }
}

/// The eight shifts `Q = pi (s1, s2, s3)`, `s_i = +-1`, with their phases
/// `C1(Q) = exp(-i/2 pi (s1 + s2 + s3))`.
#[derive(Clone, Debug)]
pub struct OmegaSet {
    pub shifts: [[i8; 3]; 8],
}

impl Default for OmegaSet {
    fn default() -> Self {
        let mut shifts = [[0i8; 3]; 8];
        for (k, s) in shifts.iter_mut().enumerate() {
            for (a, v) in s.iter_mut().enumerate() {
                *v = if (k >> a) & 1 == 0 { 1 } else { -1 };
            }
        }
        Self { shifts }
    }
}

impl OmegaSet {
    pub fn vector(s: &[i8; 3]) -> [f64; 3] {
        s.map(|v| PI * v as f64)
    }

    pub fn phase(s: &[i8; 3]) -> Complex64 {
        let sum = s.iter().map(|&v| v as i32).sum::<i32>() as f64;
        exact_cis(-0.5 * PI * sum)
    }

    /// Image of every shift after reduction into `[0, 2 pi)^3`.
    pub fn reduced(&self) -> Vec<[f64; 3]> {
        self.shifts.iter().map(|s| Self::vector(s).map(|v| v.rem_euclid(2.0 * PI))).collect()
    }
}

/// The unique `Q` in [`OmegaSet`] with `q + Q` inside the enumeration window,
/// and the flat index of `q + Q`. All dimensions must be even.
pub fn shift_partner(grid: &Grid, idx: usize) -> (usize, [i8; 3]) {
    let h = grid.coords(idx);
    let dims = grid.dims();
    let mut s = [0i8; 3];
    let mut h2 = [0usize; 3];
    for a in 0..3 {
        let half = dims[a] / 2;
        if h[a] < half {
            s[a] = 1;
            h2[a] = h[a] + half;
        } else {
            s[a] = -1;
            h2[a] = h[a] - half;
        }
    }
    (grid.index(h2), s)
}
