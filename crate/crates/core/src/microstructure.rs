//! Voxel microstructures: a phase palette plus one phase id per voxel.
//!
//! Geometry helpers place inclusions symmetrically: a cube of edge `e`
//! occupies indices `[floor((n-e)/2), floor((n-e)/2) + e)` on each axis, and a
//! sphere holds the voxels whose centers `l + 1/2` lie strictly inside the
//! radius around the box center `n/2`.

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::tensor::{VoigtTensor2, VoigtTensor4};

/// One material of the palette. A void has zero stiffness and eigenstrain.
#[derive(Clone, Debug, PartialEq)]
pub struct Phase {
    pub name: String,
    pub stiffness: VoigtTensor4,
    pub eigenstrain: VoigtTensor2,
}

impl Phase {
    /// Elastic phase; the stiffness must be major-symmetric and positive definite.
    pub fn elastic(name: impl Into<String>, stiffness: VoigtTensor4) -> Result<Self> {
        let name = name.into();
        if crate::green::validate_reference(&stiffness).is_err() {
            return Err(Error::Material(format!("phase `{name}` stiffness is not symmetric positive definite")));
        }
        Ok(Self { name, stiffness, eigenstrain: VoigtTensor2::ZERO })
    }

    pub fn void(name: impl Into<String>) -> Self {
        Self { name: name.into(), stiffness: VoigtTensor4::ZERO, eigenstrain: VoigtTensor2::ZERO }
    }

    pub fn is_void(&self) -> bool {
        self.stiffness.is_zero()
    }
}

#[derive(Clone, Debug)]
struct DenseFields {
    stiffness: Vec<VoigtTensor4>,
    eigenstrain: Vec<VoigtTensor2>,
}

/// Stiffness and eigenstrain per voxel.
#[derive(Clone, Debug)]
pub struct MaterialFields {
    grid: Grid,
    phases: Vec<Phase>,
    ids: Vec<u16>,
    dense: Option<DenseFields>,
}

impl MaterialFields {
    /// Every voxel in `matrix`, which becomes phase 0.
    pub fn homogeneous(grid: &Grid, matrix: Phase) -> Self {
        Self { grid: *grid, phases: vec![matrix], ids: vec![0; grid.len()], dense: None }
    }

    /// Phase ids given per voxel.
    pub fn from_voxels(grid: &Grid, phases: Vec<Phase>, ids: Vec<u16>) -> Result<Self> {
        crate::grid::check_len(grid, ids.len())?;
        if phases.is_empty() {
            return Err(Error::Material("empty phase palette".into()));
        }
        if let Some(&bad) = ids.iter().find(|&&id| id as usize >= phases.len()) {
            return Err(Error::Material(format!("phase id {bad} outside palette of {}", phases.len())));
        }
        Ok(Self { grid: *grid, phases, ids, dense: None })
    }

    /// Arbitrary per-voxel tensors; phase ids are kept for reporting only.
    pub fn with_dense(mut self, stiffness: Vec<VoigtTensor4>, eigenstrain: Vec<VoigtTensor2>) -> Result<Self> {
        crate::grid::check_len(&self.grid, stiffness.len())?;
        crate::grid::check_len(&self.grid, eigenstrain.len())?;
        self.dense = Some(DenseFields { stiffness, eigenstrain });
        Ok(self)
    }

    /// Appends a phase to the palette and returns its id.
    pub fn add_phase(&mut self, phase: Phase) -> Result<u16> {
        if self.phases.len() >= u16::MAX as usize {
            return Err(Error::Material("phase palette is full".into()));
        }
        self.phases.push(phase);
        Ok((self.phases.len() - 1) as u16)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn phases(&self) -> &[Phase] {
        &self.phases
    }

    pub fn phase_ids(&self) -> &[u16] {
        &self.ids
    }

    pub fn phase_index(&self, name: &str) -> Option<u16> {
        self.phases.iter().position(|p| p.name == name).map(|i| i as u16)
    }

    pub fn is_dense(&self) -> bool {
        self.dense.is_some()
    }

    #[inline]
    pub fn stiffness(&self, idx: usize) -> &VoigtTensor4 {
        match &self.dense {
            Some(d) => &d.stiffness[idx],
            None => &self.phases[self.ids[idx] as usize].stiffness,
        }
    }

    #[inline]
    pub fn eigenstrain(&self, idx: usize) -> &VoigtTensor2 {
        match &self.dense {
            Some(d) => &d.eigenstrain[idx],
            None => &self.phases[self.ids[idx] as usize].eigenstrain,
        }
    }

    /// Voxel count per palette entry.
    pub fn phase_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.phases.len()];
        for &id in &self.ids {
            counts[id as usize] += 1;
        }
        counts
    }

    /// `<lambda>` over the cell.
    pub fn mean_stiffness(&self) -> VoigtTensor4 {
        let n = self.grid.len() as f64;
        let sum = match &self.dense {
            Some(d) => d.stiffness.iter().fold(VoigtTensor4::ZERO, |a, c| a + *c),
            None => self
                .phase_counts()
                .iter()
                .zip(&self.phases)
                .fold(VoigtTensor4::ZERO, |a, (&k, p)| a + p.stiffness * k as f64),
        };
        sum * (1.0 / n)
    }

    /// `<lambda : eps0>` over the cell.
    pub fn mean_eigenstress(&self) -> VoigtTensor2 {
        let n = self.grid.len() as f64;
        let sum = match &self.dense {
            Some(d) => d
                .stiffness
                .iter()
                .zip(&d.eigenstrain)
                .fold(VoigtTensor2::ZERO, |a, (c, e)| a + c.contract(e)),
            None => self
                .phase_counts()
                .iter()
                .zip(&self.phases)
                .fold(VoigtTensor2::ZERO, |a, (&k, p)| a + p.stiffness.contract(&p.eigenstrain) * k as f64),
        };
        sum * (1.0 / n)
    }

    /// `<eps0>` over the cell.
    pub fn mean_eigenstrain(&self) -> VoigtTensor2 {
        let n = self.grid.len() as f64;
        let sum = (0..self.grid.len()).fold(VoigtTensor2::ZERO, |a, i| a + *self.eigenstrain(i));
        sum * (1.0 / n)
    }

    /// Phase ids as floating point, for export.
    pub fn phase_map(&self) -> Vec<f64> {
        self.ids.iter().map(|&v| v as f64).collect()
    }

    /// Sets `phase` wherever `mask` is true.
    pub fn paint(mut self, mask: &[bool], phase: u16) -> Result<Self> {
        crate::grid::check_len(&self.grid, mask.len())?;
        self.check_phase(phase)?;
        for (id, &m) in self.ids.iter_mut().zip(mask) {
            if m {
                *id = phase;
            }
        }
        Ok(self)
    }

    fn check_phase(&self, phase: u16) -> Result<()> {
        if phase as usize >= self.phases.len() {
            return Err(Error::Material(format!("phase id {phase} outside palette of {}", self.phases.len())));
        }
        Ok(())
    }
}

/// Voxels of a centered box with the given edges.
pub fn box_mask(grid: &Grid, edges: [usize; 3]) -> Result<Vec<bool>> {
    let dims = grid.dims();
    for a in 0..3 {
        if edges[a] > dims[a] {
            return Err(Error::InvalidArgument(format!("box edge {} exceeds grid size {} on axis {a}", edges[a], dims[a])));
        }
    }
    let lo: [usize; 3] = std::array::from_fn(|a| (dims[a] - edges[a]) / 2);
    Ok((0..grid.len())
        .map(|i| {
            let l = grid.coords(i);
            (0..3).all(|a| l[a] >= lo[a] && l[a] < lo[a] + edges[a])
        })
        .collect())
}

/// Voxels whose centers lie strictly inside a centered sphere.
pub fn sphere_mask(grid: &Grid, radius: f64) -> Result<Vec<bool>> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidArgument(format!("sphere radius must be positive, got {radius}")));
    }
    let dims = grid.dims();
    let r2 = radius * radius;
    Ok((0..grid.len())
        .map(|i| {
            let l = grid.coords(i);
            let d2: f64 = (0..3)
                .map(|a| {
                    let x = l[a] as f64 + 0.5 - 0.5 * dims[a] as f64;
                    x * x
                })
                .sum();
            d2 < r2
        })
        .collect())
}

/// Paints a centered cube of `edge` voxels with `phase`.
pub fn gen_centered_cube(fields: MaterialFields, edge: usize, phase: u16) -> Result<MaterialFields> {
    let mask = box_mask(fields.grid(), [edge; 3])?;
    fields.paint(&mask, phase)
}

/// Paints a centered sphere of `radius` voxels with `phase`.
pub fn gen_centered_sphere(fields: MaterialFields, radius: f64, phase: u16) -> Result<MaterialFields> {
    let mask = sphere_mask(fields.grid(), radius)?;
    fields.paint(&mask, phase)
}

/// Sets the eigenstrain of a palette entry; voids cannot carry one.
pub fn assign_eigenstrain(mut fields: MaterialFields, phase: u16, eps0: VoigtTensor2) -> Result<MaterialFields> {
    fields.check_phase(phase)?;
    if fields.dense.is_some() {
        return Err(Error::Material("eigenstrain of dense fields is set per voxel".into()));
    }
    let p = &mut fields.phases[phase as usize];
    if p.is_void() && eps0 != VoigtTensor2::ZERO {
        return Err(Error::Material(format!("void phase `{}` cannot carry an eigenstrain", p.name)));
    }
    p.eigenstrain = eps0;
    Ok(fields)
}
