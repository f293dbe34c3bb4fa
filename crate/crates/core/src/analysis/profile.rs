//! Line profiles through tensor fields and an oscillation measure.

use crate::error::{Error, Result};
use crate::grid::{Grid, TensorField};

/// Quantity sampled along a profile.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProfileComponent {
    /// Voigt slot 0..6.
    Voigt(usize),
    VonMises,
}

impl ProfileComponent {
    pub fn name(&self, prefix: &str) -> String {
        const NAMES: [&str; 6] = ["11", "22", "33", "23", "13", "12"];
        match self {
            Self::Voigt(k) => format!("{prefix}{}", NAMES[*k]),
            Self::VonMises => "von_mises".to_string(),
        }
    }

    /// Parses `s11`..`s12` (or `e11`.., or plain `11`) and `vm`/`von_mises`.
    pub fn parse(s: &str) -> Option<Self> {
        let t = s.trim().trim_start_matches(['s', 'e']);
        match t {
            "11" => Some(Self::Voigt(0)),
            "22" => Some(Self::Voigt(1)),
            "33" => Some(Self::Voigt(2)),
            "23" | "32" => Some(Self::Voigt(3)),
            "13" | "31" => Some(Self::Voigt(4)),
            "12" | "21" => Some(Self::Voigt(5)),
            _ if s == "vm" || s == "von_mises" => Some(Self::VonMises),
            _ => None,
        }
    }
}

/// Samples along one grid axis.
#[derive(Clone, Debug, PartialEq)]
pub struct LineProfile {
    pub axis: usize,
    /// Indices on the two other axes, in increasing axis order.
    pub fixed: [usize; 2],
    /// Voxel indices along `axis`.
    pub positions: Vec<usize>,
    pub components: Vec<ProfileComponent>,
    /// `values[c][p]`.
    pub values: Vec<Vec<f64>>,
}

/// Flat voxel indices of the line along `axis` through `fixed`.
pub fn line_indices(grid: &Grid, axis: usize, fixed: [usize; 2]) -> Result<Vec<usize>> {
    if axis > 2 {
        return Err(Error::InvalidArgument(format!("axis must be 0, 1 or 2, got {axis}")));
    }
    let dims = grid.dims();
    let others: Vec<usize> = (0..3).filter(|&a| a != axis).collect();
    for (k, &a) in others.iter().enumerate() {
        if fixed[k] >= dims[a] {
            return Err(Error::InvalidArgument(format!("index {} outside axis {a} of size {}", fixed[k], dims[a])));
        }
    }
    Ok((0..dims[axis])
        .map(|p| {
            let mut l = [0; 3];
            l[axis] = p;
            l[others[0]] = fixed[0];
            l[others[1]] = fixed[1];
            grid.index(l)
        })
        .collect())
}

/// Extracts `components` of `field` along a grid line.
pub fn extract_profile(
    grid: &Grid,
    field: &TensorField,
    axis: usize,
    fixed: [usize; 2],
    components: &[ProfileComponent],
) -> Result<LineProfile> {
    crate::grid::check_len(grid, field.len())?;
    let idx = line_indices(grid, axis, fixed)?;
    let values = components
        .iter()
        .map(|c| {
            idx.iter()
                .map(|&i| match *c {
                    ProfileComponent::Voigt(k) => field.comps[k][i],
                    ProfileComponent::VonMises => field.at(i).von_mises(),
                })
                .collect()
        })
        .collect();
    Ok(LineProfile { axis, fixed, positions: (0..idx.len()).collect(), components: components.to_vec(), values })
}

/// Maximal runs `(start, len)` of equal phase along a periodic line. A run
/// may wrap around the end; a single-phase line is one run starting at 0.
pub fn phase_runs(phases: &[u16]) -> Vec<(usize, usize)> {
    let n = phases.len();
    if n == 0 {
        return Vec::new();
    }
    let Some(first_change) = (0..n).find(|&i| phases[i] != phases[(i + n - 1) % n]) else {
        return vec![(0, n)];
    };
    let mut runs = Vec::new();
    let mut start = first_change;
    let mut len = 1;
    for k in 1..n {
        let i = (first_change + k) % n;
        if phases[i] == phases[(i + n - 1) % n] {
            len += 1;
        } else {
            runs.push((start, len));
            start = i;
            len = 1;
        }
    }
    runs.push((start, len));
    runs
}

/// Oscillation of the samples selected by `mask`:
///
/// ```text
/// (total variation - |last - first|) / (max - min)
/// ```
///
/// Monotone data gives 0. The selected samples must form one connected run
/// of the periodic line.
pub fn oscillation_index(values: &[f64], mask: &[bool]) -> Result<f64> {
    if values.len() != mask.len() {
        return Err(Error::DimensionMismatch { expected: values.len(), got: mask.len() });
    }
    let run = connected_run(mask)?;
    let samples: Vec<f64> = run.iter().map(|&i| values[i]).collect();
    Ok(oscillation_of(&samples))
}

/// Oscillation of an ordered sample sequence.
pub fn oscillation_of(samples: &[f64]) -> f64 {
    if samples.len() < 2 {
        return 0.0;
    }
    let tv: f64 = samples.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
    let net = (samples[samples.len() - 1] - samples[0]).abs();
    let (lo, hi) = samples.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let range = hi - lo;
    if range <= 0.0 {
        return 0.0;
    }
    (tv - net).max(0.0) / range
}

/// Indices of the single connected run selected by `mask`, in order.
fn connected_run(mask: &[bool]) -> Result<Vec<usize>> {
    let n = mask.len();
    let count = mask.iter().filter(|&&m| m).count();
    if count == 0 {
        return Err(Error::InvalidArgument("mask selects no samples".into()));
    }
    if count == n {
        return Ok((0..n).collect());
    }
    let start = (0..n).find(|&i| mask[i] && !mask[(i + n - 1) % n]).expect("run start");
    let run: Vec<usize> = (0..count).map(|k| (start + k) % n).collect();
    if run.iter().any(|&i| !mask[i]) {
        return Err(Error::InvalidArgument("mask must select one connected run".into()));
    }
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn alternating_sequence_index() {
        for k in 1..8 {
            let v: Vec<f64> = (0..2 * k).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
            let idx = oscillation_index(&v, &vec![true; v.len()]).unwrap();
            assert!((idx - 2.0 * (k as f64 - 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn wrapped_run_and_disconnected_mask() {
        let v = [3.0, 4.0, 0.0, 0.0, 1.0, 2.0];
        let mask = [true, true, false, false, true, true];
        assert_eq!(oscillation_index(&v, &mask).unwrap(), 0.0);
        assert!(oscillation_index(&v, &[true, false, true, false, false, false]).is_err());
    }

    #[test]
    fn runs_of_a_periodic_line() {
        assert_eq!(phase_runs(&[0, 0, 1, 1, 1, 0]), vec![(2, 3), (5, 3)]);
        assert_eq!(phase_runs(&[2, 2, 2]), vec![(0, 3)]);
    }

    #[test]
    fn profile_of_a_linear_field() {
        let grid = Grid::new([4, 5, 6]).unwrap();
        let mut f = TensorField::zeros(grid.len());
        for i in 0..grid.len() {
            let l = grid.coords(i);
            f.comps[2][i] = l[1] as f64 + 10.0 * l[0] as f64;
        }
        let p = extract_profile(&grid, &f, 1, [2, 3], &[ProfileComponent::Voigt(2)]).unwrap();
        assert_eq!(p.values[0], vec![20.0, 21.0, 22.0, 23.0, 24.0]);
        assert!(extract_profile(&grid, &f, 1, [4, 0], &[ProfileComponent::Voigt(2)]).is_err());
        assert_eq!(ProfileComponent::parse("s33"), Some(ProfileComponent::Voigt(2)));
        assert_eq!(ProfileComponent::parse("vm"), Some(ProfileComponent::VonMises));
    }

    proptest! {
        #[test]
        fn monotone_data_scores_zero(mut v in prop::collection::vec(-1e3f64..1e3, 2..40)) {
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            prop_assert!(oscillation_of(&v) < 1e-12);
            v.reverse();
            prop_assert!(oscillation_of(&v) < 1e-12);
        }

        #[test]
        fn index_is_scale_and_shift_invariant(v in prop::collection::vec(-1.0f64..1.0, 3..30), a in 0.1f64..10.0, b in -5.0f64..5.0) {
            let w: Vec<f64> = v.iter().map(|x| a * x + b).collect();
            prop_assert!((oscillation_of(&v) - oscillation_of(&w)).abs() < 1e-9);
        }
    }
}
