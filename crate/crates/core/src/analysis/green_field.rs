//! Real-space strain Green functions and their decay.
//!
//! `G(r) = (1/N) sum_q G(q) exp(i q.r)` is sampled in the plane `l1 = 0`.
//! Near a line where two frequency components equal `pi`, the rotated
//! operator tends to a direction-dependent limit for the Voigt pairs in the
//! index set of that line, so those components decay only as `~1/r^2` in
//! the matching real-space plane. Other pairs tend to zero there. The
//! tetrahedral operator has no such lines. The index sets are
//!
//! ```text
//! S100 = {22, 23, 24, 33, 34, 44, 55, 56, 66}
//! S010 = {11, 13, 15, 33, 35, 44, 46, 55, 66}
//! S001 = {11, 12, 16, 22, 26, 44, 45, 55, 66}
//! ```

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::green::analysis_green;
use crate::grid::{Fft3, Grid};
use crate::stencil::Scheme;
use crate::tensor::VoigtTensor4;

/// Lines `L100`, `L010`, `L001` of the frequency cube.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum IndexSet {
    S100,
    S010,
    S001,
}

const S100: [(u8, u8); 9] = [(2, 2), (2, 3), (2, 4), (3, 3), (3, 4), (4, 4), (5, 5), (5, 6), (6, 6)];
const S010: [(u8, u8); 9] = [(1, 1), (1, 3), (1, 5), (3, 3), (3, 5), (4, 4), (4, 6), (5, 5), (6, 6)];
const S001: [(u8, u8); 9] = [(1, 1), (1, 2), (1, 6), (2, 2), (2, 6), (4, 4), (4, 5), (5, 5), (6, 6)];

/// Index sets containing the unordered Voigt pair `(a, b)` (1-based).
pub fn classify_voigt_pair(a: u8, b: u8) -> Result<Vec<IndexSet>> {
    if !(1..=6).contains(&a) || !(1..=6).contains(&b) {
        return Err(Error::InvalidArgument(format!("Voigt indices must be in 1..=6, got ({a}, {b})")));
    }
    let key = (a.min(b), a.max(b));
    let mut out = Vec::new();
    for (set, members) in [(IndexSet::S100, &S100), (IndexSet::S010, &S010), (IndexSet::S001, &S001)] {
        if members.contains(&key) {
            out.push(set);
        }
    }
    Ok(out)
}

/// Parses a two-digit Voigt pair such as `24`.
pub fn parse_pair(s: &str) -> Result<(u8, u8)> {
    let d: Vec<u8> = s.trim().bytes().map(|c| c.wrapping_sub(b'0')).collect();
    match d.as_slice() {
        [a, b] if (1..=6).contains(a) && (1..=6).contains(b) => Ok((*a, *b)),
        _ => Err(Error::InvalidArgument(format!("Voigt pair must be two digits in 1..=6, got `{s}`"))),
    }
}

/// `G_IJ(q)` for the 1-based Voigt pair.
pub fn green_component(scheme: Scheme, lam0: &VoigtTensor4, q: &crate::grid::FreqVector, pair: (u8, u8)) -> Result<Complex64> {
    let g = analysis_green(scheme, lam0, q)?;
    Ok(g[pair.0 as usize - 1][pair.1 as usize - 1])
}

/// Real-space `G_IJ(r)` over the whole grid.
pub fn green_real_space(scheme: Scheme, lam0: &VoigtTensor4, grid: &Grid, pair: (u8, u8)) -> Result<Vec<f64>> {
    classify_voigt_pair(pair.0, pair.1)?;
    if scheme == Scheme::Tetrahedral {
        grid.require_even()?;
    }
    let mut buf = (0..grid.len())
        .map(|i| green_component(scheme, lam0, &grid.frequency(i), pair))
        .collect::<Result<Vec<_>>>()?;
    Fft3::new(*grid).inverse(&mut buf);
    let inv_n = 1.0 / grid.len() as f64;
    let max_re = buf.iter().fold(0.0f64, |m, z| m.max(z.re.abs()));
    let max_im = buf.iter().fold(0.0f64, |m, z| m.max(z.im.abs()));
    if max_im > 1e-12 * max_re.max(f64::MIN_POSITIVE) {
        return Err(Error::InvalidArgument(format!("real-space Green function has imaginary part {:e}", max_im * inv_n)));
    }
    Ok(buf.iter().map(|z| z.re * inv_n).collect())
}

/// Minimum-image offset of index `l` on an axis of size `n`.
#[inline]
fn signed(l: usize, n: usize) -> f64 {
    if 2 * l >= n {
        l as f64 - n as f64
    } else {
        l as f64
    }
}

/// Largest `|G|` in each unit-width annulus `[k, k+1)` of the plane
/// `l1 = 0`, with the radius where it is attained.
pub fn shell_maxima(grid: &Grid, field: &[f64]) -> Result<Vec<(f64, f64)>> {
    crate::grid::check_len(grid, field.len())?;
    let [_, n2, n3] = grid.dims();
    let kmax = n2.min(n3) / 2;
    let mut best: Vec<Option<(f64, f64)>> = vec![None; kmax + 1];
    for l2 in 0..n2 {
        for l3 in 0..n3 {
            let (y, z) = (signed(l2, n2), signed(l3, n3));
            let r = (y * y + z * z).sqrt();
            let k = r.floor() as usize;
            if k == 0 || k > kmax {
                continue;
            }
            let v = field[grid.index([0, l2, l3])].abs();
            if best[k].map_or(true, |(_, m)| v > m) {
                best[k] = Some((r, v));
            }
        }
    }
    Ok(best.into_iter().flatten().collect())
}

/// Power-law fit `max|G| ~ A r^-p` over shells.
#[derive(Clone, Debug, PartialEq)]
pub struct DecayFit {
    pub exponent: f64,
    pub prefactor: f64,
    /// RMS residual of the log-log fit.
    pub residual: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub shells: Vec<(f64, f64)>,
}

/// Least-squares fit of `log max|G|` against `log r` for shells with
/// `r_min <= r <= r_max`.
pub fn fit_decay(grid: &Grid, field: &[f64], window: (f64, f64)) -> Result<DecayFit> {
    let shells = shell_maxima(grid, field)?;
    let pts: Vec<(f64, f64)> = shells
        .iter()
        .filter(|(r, v)| *r >= window.0 && *r <= window.1 && *v > 0.0)
        .map(|(r, v)| (r.ln(), v.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "fit window [{}, {}] holds {} usable shells; need 3",
            window.0,
            window.1,
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum::<f64>() / n).sqrt();
    Ok(DecayFit { exponent: -slope, prefactor: intercept.exp(), residual, r_min: window.0, r_max: window.1, shells })
}
