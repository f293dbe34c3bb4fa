//! Voxel grid, frequency enumeration and 3D transforms.
//!
//! Voxels are stored row-major over `(l1, l2, l3)` with `l3` fastest. The
//! discrete frequencies are `q_i = 2 pi h_i / n_i` with `h_i = 0..n_i-1`:
//!
//! ```text
//! forward:  f(q) = (1/N) sum_r f(r) exp(-i q.r)
//! inverse:  f(r) =       sum_q f(q) exp(+i q.r)
//! ```
//!
//! With this normalization `(1/N) sum_r |f(r)|^2 = sum_q |f(q)|^2`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Regular voxel grid with spacing `d`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    dims: [usize; 3],
    spacing: f64,
}

impl Grid {
    pub fn new(dims: [usize; 3]) -> Result<Self> {
        Self::with_spacing(dims, 1.0)
    }

    pub fn cubic(n: usize) -> Result<Self> {
        Self::new([n, n, n])
    }

    pub fn with_spacing(dims: [usize; 3], spacing: f64) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::InvalidArgument(format!("grid dimensions must be positive, got {dims:?}")));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::InvalidArgument(format!("grid spacing must be positive, got {spacing}")));
        }
        Ok(Self { dims, spacing })
    }

    #[inline]
    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Number of voxels.
    #[inline]
    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, l: [usize; 3]) -> usize {
        (l[0] * self.dims[1] + l[1]) * self.dims[2] + l[2]
    }

    /// Index of `l` after wrapping each coordinate periodically.
    #[inline]
    pub fn index_wrapped(&self, l: [isize; 3]) -> usize {
        let w = |x: isize, n: usize| x.rem_euclid(n as isize) as usize;
        self.index([w(l[0], self.dims[0]), w(l[1], self.dims[1]), w(l[2], self.dims[2])])
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let l3 = idx % self.dims[2];
        let rest = idx / self.dims[2];
        [rest / self.dims[1], rest % self.dims[1], l3]
    }

    pub fn all_even(&self) -> bool {
        self.dims.iter().all(|n| n % 2 == 0)
    }

    /// Fails with [`Error::OddDimension`] unless every dimension is even.
    pub fn require_even(&self) -> Result<()> {
        match self.dims.iter().position(|n| n % 2 != 0) {
            Some(axis) => Err(Error::OddDimension { axis, size: self.dims[axis] }),
            None => Ok(()),
        }
    }

    /// Frequency at flat index `idx`.
    #[inline]
    pub fn frequency(&self, idx: usize) -> FreqVector {
        let h = self.coords(idx);
        FreqVector::new([
            2.0 * PI * h[0] as f64 / self.dims[0] as f64,
            2.0 * PI * h[1] as f64 / self.dims[1] as f64,
            2.0 * PI * h[2] as f64 / self.dims[2] as f64,
        ])
    }

    /// Flat index of `-q` (reduced into the enumeration window).
    #[inline]
    pub fn conjugate_index(&self, idx: usize) -> usize {
        let h = self.coords(idx);
        let c = |h: usize, n: usize| (n - h) % n;
        self.index([c(h[0], self.dims[0]), c(h[1], self.dims[1]), c(h[2], self.dims[2])])
    }

    /// True when some component sits at `pi` on an even axis.
    #[inline]
    pub fn is_nyquist(&self, idx: usize) -> bool {
        let h = self.coords(idx);
        (0..3).any(|a| 2 * h[a] == self.dims[a])
    }
}

/// Discrete wave vector.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FreqVector {
    pub q: [f64; 3],
}

impl FreqVector {
    pub fn new(q: [f64; 3]) -> Self {
        Self { q }
    }

    pub fn is_zero(&self) -> bool {
        self.q.iter().all(|&v| v == 0.0)
    }

    /// Representative in `(-pi, pi]`.
    pub fn centered(&self) -> [f64; 3] {
        self.q.map(|v| if v > PI + 1e-12 { v - 2.0 * PI } else { v })
    }
}

/// All frequencies of `grid` in storage order.
pub fn enumerate_frequencies(grid: &Grid) -> Vec<FreqVector> {
    (0..grid.len()).map(|i| grid.frequency(i)).collect()
}

/// `exp(i x)`, exact at multiples of `pi/2`.
///
/// The stencils rely on `exp(i pi) + 1` being exactly zero.
#[inline]
pub fn exact_cis(x: f64) -> Complex64 {
    let quarter = x / (0.5 * PI);
    let k = quarter.round();
    if (quarter - k).abs() < 1e-12 {
        return match (k as i64).rem_euclid(4) {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        };
    }
    Complex64::from_polar(1.0, x)
}

/// Planned 3D complex transform for one grid.
pub struct Fft3 {
    grid: Grid,
    forward: [Arc<dyn Fft<f64>>; 3],
    inverse: [Arc<dyn Fft<f64>>; 3],
}

impl std::fmt::Debug for Fft3 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft3").field("grid", &self.grid).finish()
    }
}

impl Fft3 {
    pub fn new(grid: Grid) -> Self {
        let mut planner = FftPlanner::new();
        let dims = grid.dims();
        let forward = dims.map(|n| planner.plan_fft_forward(n));
        let inverse = dims.map(|n| planner.plan_fft_inverse(n));
        Self { grid, forward, inverse }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// In-place forward transform, including the `1/N` factor.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, &self.forward);
        let scale = 1.0 / self.grid.len() as f64;
        data.par_iter_mut().for_each(|v| *v *= scale);
    }

    /// In-place inverse transform (plain sum).
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inverse);
    }

    fn transform(&self, data: &mut [Complex64], plans: &[Arc<dyn Fft<f64>>; 3]) {
        let [n1, n2, n3] = self.grid.dims();
        assert_eq!(data.len(), self.grid.len(), "buffer length does not match the grid");

        // Axis 3 is contiguous.
        process_rows(data, n3, &plans[2]);

        // Axis 2: transpose each l1 slab so that l2 becomes contiguous.
        if n2 > 1 {
            data.par_chunks_mut(n2 * n3).for_each(|slab| {
                let mut t = vec![Complex64::default(); n2 * n3];
                transpose(slab, &mut t, n2, n3);
                process_rows_serial(&mut t, n2, &plans[1]);
                transpose(&t, slab, n3, n2);
            });
        }

        // Axis 1: transpose the whole array as an n1 x (n2 n3) matrix.
        if n1 > 1 {
            let m = n2 * n3;
            let mut t = vec![Complex64::default(); data.len()];
            transpose(data, &mut t, n1, m);
            process_rows(&mut t, n1, &plans[0]);
            transpose(&t, data, m, n1);
        }
    }
}

fn process_rows(data: &mut [Complex64], n: usize, plan: &Arc<dyn Fft<f64>>) {
    if n == 1 {
        return;
    }
    // Batches of rows keep the per-task scratch allocation amortized.
    let rows_per_task = (4096 / n).max(1);
    data.par_chunks_mut(n * rows_per_task).for_each(|chunk| process_rows_serial(chunk, n, plan));
}

fn process_rows_serial(data: &mut [Complex64], n: usize, plan: &Arc<dyn Fft<f64>>) {
    if n == 1 {
        return;
    }
    let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
    plan.process_with_scratch(data, &mut scratch);
}

/// `dst (cols x rows) = src (rows x cols)^T`.
fn transpose(src: &[Complex64], dst: &mut [Complex64], rows: usize, cols: usize) {
    const B: usize = 16;
    for rb in (0..rows).step_by(B) {
        for cb in (0..cols).step_by(B) {
            for r in rb..(rb + B).min(rows) {
                for c in cb..(cb + B).min(cols) {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
}

/// Scalar field in real space.
pub type RealField = Vec<f64>;
/// Scalar field in frequency space.
pub type SpectralField = Vec<Complex64>;

/// Symmetric tensor field in real space, one buffer per Voigt slot.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorField {
    pub comps: [RealField; 6],
}

impl TensorField {
    pub fn zeros(n: usize) -> Self {
        Self { comps: std::array::from_fn(|_| vec![0.0; n]) }
    }

    pub fn len(&self) -> usize {
        self.comps[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn at(&self, idx: usize) -> crate::tensor::VoigtTensor2 {
        crate::tensor::VoigtTensor2(std::array::from_fn(|k| self.comps[k][idx]))
    }

    pub fn set(&mut self, idx: usize, t: &crate::tensor::VoigtTensor2) {
        for k in 0..6 {
            self.comps[k][idx] = t.0[k];
        }
    }

    pub fn mean(&self) -> crate::tensor::VoigtTensor2 {
        let n = self.len() as f64;
        crate::tensor::VoigtTensor2(std::array::from_fn(|k| self.comps[k].iter().sum::<f64>() / n))
    }

    /// Largest absolute component difference to `other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.comps
            .iter()
            .zip(&other.comps)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.comps.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Symmetric tensor field in frequency space.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorFieldQ {
    pub comps: [SpectralField; 6],
}

impl TensorFieldQ {
    pub fn zeros(n: usize) -> Self {
        Self { comps: std::array::from_fn(|_| vec![Complex64::default(); n]) }
    }

    pub fn len(&self) -> usize {
        self.comps[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn at(&self, idx: usize) -> [Complex64; 6] {
        std::array::from_fn(|k| self.comps[k][idx])
    }

    #[inline]
    pub fn set(&mut self, idx: usize, v: &[Complex64; 6]) {
        for k in 0..6 {
            self.comps[k][idx] = v[k];
        }
    }
}

/// Vector field in frequency space.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorFieldQ {
    pub comps: [SpectralField; 3],
}

impl VectorFieldQ {
    pub fn zeros(n: usize) -> Self {
        Self { comps: std::array::from_fn(|_| vec![Complex64::default(); n]) }
    }

    #[inline]
    pub fn at(&self, idx: usize) -> [Complex64; 3] {
        std::array::from_fn(|k| self.comps[k][idx])
    }

    #[inline]
    pub fn set(&mut self, idx: usize, v: &[Complex64; 3]) {
        for k in 0..3 {
            self.comps[k][idx] = v[k];
        }
    }
}

impl Fft3 {
    /// Forward transform of a real scalar field.
    pub fn forward_real(&self, f: &[f64]) -> SpectralField {
        let mut buf: Vec<Complex64> = f.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward(&mut buf);
        buf
    }

    /// Inverse transform keeping the full complex result.
    pub fn inverse_complex(&self, f: &[Complex64]) -> SpectralField {
        let mut buf = f.to_vec();
        self.inverse(&mut buf);
        buf
    }

    /// Forward transforms of two real fields with one complex transform.
    ///
    /// `buf` is scratch of grid length; `out_a`/`out_b` receive the spectra.
    pub fn forward_real_pair(
        &self,
        a: &[f64],
        b: &[f64],
        buf: &mut [Complex64],
        out_a: &mut [Complex64],
        out_b: &mut [Complex64],
    ) {
        buf.par_iter_mut()
            .zip(a.par_iter().zip(b.par_iter()))
            .for_each(|(z, (&x, &y))| *z = Complex64::new(x, y));
        self.forward(buf);
        let grid = self.grid;
        let buf: &[Complex64] = buf;
        out_a
            .par_iter_mut()
            .zip(out_b.par_iter_mut())
            .enumerate()
            .for_each(|(i, (oa, ob))| {
                let z = buf[i];
                let zc = buf[grid.conjugate_index(i)].conj();
                *oa = 0.5 * (z + zc);
                // (z - zc) / (2i)
                let d = z - zc;
                *ob = Complex64::new(0.5 * d.im, -0.5 * d.re);
            });
    }

    /// Inverse transforms of two Hermitian spectra with one complex transform.
    ///
    /// Any non-Hermitian part of the inputs is discarded.
    pub fn inverse_real_pair(
        &self,
        a: &[Complex64],
        b: &[Complex64],
        buf: &mut [Complex64],
        out_a: &mut [f64],
        out_b: &mut [f64],
    ) {
        buf.par_iter_mut()
            .zip(a.par_iter().zip(b.par_iter()))
            .for_each(|(z, (&x, &y))| *z = x + Complex64::new(-y.im, y.re));
        self.inverse(buf);
        out_a
            .par_iter_mut()
            .zip(out_b.par_iter_mut())
            .zip(buf.par_iter())
            .for_each(|((oa, ob), z)| {
                *oa = z.re;
                *ob = z.im;
            });
    }

    /// Forward transform of a real tensor field.
    pub fn forward_tensor(&self, field: &TensorField) -> TensorFieldQ {
        let n = self.grid.len();
        let mut out = TensorFieldQ::zeros(n);
        let mut buf = vec![Complex64::default(); n];
        for p in 0..3 {
            let (lo, hi) = out.comps.split_at_mut(2 * p + 1);
            self.forward_real_pair(&field.comps[2 * p], &field.comps[2 * p + 1], &mut buf, &mut lo[2 * p], &mut hi[0]);
        }
        out
    }

    /// Inverse transform of a Hermitian tensor spectrum.
    pub fn inverse_tensor(&self, field: &TensorFieldQ) -> TensorField {
        let n = self.grid.len();
        let mut out = TensorField::zeros(n);
        let mut buf = vec![Complex64::default(); n];
        for p in 0..3 {
            let (lo, hi) = out.comps.split_at_mut(2 * p + 1);
            self.inverse_real_pair(&field.comps[2 * p], &field.comps[2 * p + 1], &mut buf, &mut lo[2 * p], &mut hi[0]);
        }
        out
    }
}

/// Forward transform of a tensor field (`1/N` normalized).
pub fn forward_fft(grid: &Grid, field: &TensorField) -> Result<TensorFieldQ> {
    check_len(grid, field.len())?;
    Ok(Fft3::new(*grid).forward_tensor(field))
}

/// Inverse transform of a Hermitian tensor spectrum.
pub fn inverse_fft(grid: &Grid, field: &TensorFieldQ) -> Result<TensorField> {
    check_len(grid, field.len())?;
    Ok(Fft3::new(*grid).inverse_tensor(field))
}

pub(crate) fn check_len(grid: &Grid, len: usize) -> Result<()> {
    if len != grid.len() {
        return Err(Error::DimensionMismatch { expected: grid.len(), got: len });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Direct O(N^2) transform used as the reference.
    fn naive_dft(grid: &Grid, f: &[Complex64], sign: f64) -> Vec<Complex64> {
        let n = grid.len();
        (0..n)
            .map(|iq| {
                let q = grid.frequency(iq).q;
                (0..n)
                    .map(|ir| {
                        let r = grid.coords(ir);
                        let phase = sign * (q[0] * r[0] as f64 + q[1] * r[1] as f64 + q[2] * r[2] as f64);
                        f[ir] * Complex64::from_polar(1.0, phase)
                    })
                    .sum()
            })
            .collect()
    }

    fn random_complex(n: usize, seed: u64) -> Vec<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()
    }

    #[test]
    fn matches_naive_dft_on_mixed_dims() {
        for dims in [[4, 6, 2], [3, 5, 4], [1, 4, 7], [8, 1, 1]] {
            let grid = Grid::new(dims).unwrap();
            let fft = Fft3::new(grid);
            let f = random_complex(grid.len(), 7);
            let mut fwd = f.clone();
            fft.forward(&mut fwd);
            let reference: Vec<_> = naive_dft(&grid, &f, -1.0).iter().map(|v| v / grid.len() as f64).collect();
            for (a, b) in fwd.iter().zip(&reference) {
                assert!((a - b).norm() < 1e-12, "{dims:?}");
            }
            let mut inv = f.clone();
            fft.inverse(&mut inv);
            for (a, b) in inv.iter().zip(naive_dft(&grid, &f, 1.0)) {
                assert!((a - b).norm() < 1e-11, "{dims:?}");
            }
        }
    }

    #[test]
    fn single_plane_wave_lands_in_one_bin() {
        let grid = Grid::new([8, 4, 6]).unwrap();
        let fft = Fft3::new(grid);
        let target = grid.index([3, 1, 5]);
        let q = grid.frequency(target).q;
        let mut f: Vec<Complex64> = (0..grid.len())
            .map(|i| {
                let r = grid.coords(i);
                Complex64::from_polar(1.0, q[0] * r[0] as f64 + q[1] * r[1] as f64 + q[2] * r[2] as f64)
            })
            .collect();
        fft.forward(&mut f);
        for (i, v) in f.iter().enumerate() {
            let expected = if i == target { 1.0 } else { 0.0 };
            assert!((v - expected).norm() < 1e-12);
        }
    }

    #[test]
    fn exact_cis_hits_quarter_turns() {
        assert_eq!(exact_cis(PI), Complex64::new(-1.0, 0.0));
        assert_eq!(exact_cis(0.5 * PI), Complex64::new(0.0, 1.0));
        assert_eq!(exact_cis(-0.5 * PI), Complex64::new(0.0, -1.0));
        assert_eq!(exact_cis(2.0 * PI * 22.0 / 44.0), Complex64::new(-1.0, 0.0));
        assert!((exact_cis(0.3) - Complex64::from_polar(1.0, 0.3)).norm() < 1e-16);
    }

    #[test]
    fn nyquist_and_conjugate_indices() {
        let grid = Grid::new([4, 5, 2]).unwrap();
        assert!(grid.is_nyquist(grid.index([2, 0, 0])));
        assert!(grid.is_nyquist(grid.index([0, 3, 1])));
        assert!(!grid.is_nyquist(grid.index([1, 2, 0])));
        assert_eq!(grid.conjugate_index(grid.index([1, 2, 1])), grid.index([3, 3, 1]));
        assert_eq!(grid.conjugate_index(0), 0);
        assert!(Grid::new([4, 5, 2]).unwrap().require_even().is_err());
        assert!(Grid::new([0, 5, 2]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn round_trip_and_parseval(n1 in 1usize..7, n2 in 1usize..7, n3 in 1usize..7, seed in 0u64..1000) {
            let grid = Grid::new([n1, n2, n3]).unwrap();
            let fft = Fft3::new(grid);
            let f = random_complex(grid.len(), seed);
            let mut g = f.clone();
            fft.forward(&mut g);
            let energy_r: f64 = f.iter().map(|v| v.norm_sqr()).sum::<f64>() / grid.len() as f64;
            let energy_q: f64 = g.iter().map(|v| v.norm_sqr()).sum();
            prop_assert!((energy_r - energy_q).abs() < 1e-12 * energy_r.max(1.0));
            fft.inverse(&mut g);
            for (a, b) in f.iter().zip(&g) {
                prop_assert!((a - b).norm() < 1e-12);
            }
        }

        #[test]
        fn packed_real_pair_matches_separate(n1 in 1usize..6, n2 in 1usize..6, n3 in 1usize..6, seed in 0u64..1000) {
            let grid = Grid::new([n1, n2, n3]).unwrap();
            let fft = Fft3::new(grid);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a: Vec<f64> = (0..grid.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let b: Vec<f64> = (0..grid.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut buf = vec![Complex64::default(); grid.len()];
            let mut sa = vec![Complex64::default(); grid.len()];
            let mut sb = vec![Complex64::default(); grid.len()];
            fft.forward_real_pair(&a, &b, &mut buf, &mut sa, &mut sb);
            let ra = fft.forward_real(&a);
            let rb = fft.forward_real(&b);
            for i in 0..grid.len() {
                prop_assert!((sa[i] - ra[i]).norm() < 1e-13);
                prop_assert!((sb[i] - rb[i]).norm() < 1e-13);
            }
            let mut a2 = vec![0.0; grid.len()];
            let mut b2 = vec![0.0; grid.len()];
            fft.inverse_real_pair(&sa, &sb, &mut buf, &mut a2, &mut b2);
            for i in 0..grid.len() {
                prop_assert!((a2[i] - a[i]).abs() < 1e-12);
                prop_assert!((b2[i] - b[i]).abs() < 1e-12);
            }
        }
    }
}
