//! Dense real-space reference solver for the tetrahedral discretization.
//!
//! The discrete energy of a cell with corner displacements `u` is
//!
//! ```text
//! E = 1/4 sum_l sum_{T in T1,T2} (E + de_T(l) - eps0(l)) : lambda(l) : (E + de_T(l) - eps0(l))
//! ```
//!
//! where `de_T1(l)` uses the corners `l + v/2` and `de_T2(l)` the corners
//! `l - v/2`, `v in {(1,1,1), (1,-1,-1), (-1,1,-1), (-1,-1,1)}`. The
//! equilibrium system `dE/du = 0` is assembled densely and solved directly
//! after fixing the six rigid translations (one per sub-lattice and axis).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::grid::{Grid, TensorField};
use crate::microstructure::MaterialFields;
use crate::solver::Loading;
use crate::tensor::{VoigtTensor2, VoigtTensor4, VOIGT_PAIRS, VOIGT_WEIGHTS};

/// Largest grid the dense solver accepts.
pub const ORACLE_MAX_VOXELS: usize = 1000;

const V: [[i32; 3]; 4] = [[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]];

/// Corner index and gradient weights of one tetrahedron vertex.
#[derive(Clone, Copy, Debug)]
struct Vertex {
    corner: usize,
    g: [f64; 3],
}

/// The four vertices used by voxel `l` for sub-lattice `t` (0 or 1).
///
/// Corner `c` sits at `c + (1/2, 1/2, 1/2)`.
fn vertices(grid: &Grid, l: [usize; 3], t: usize) -> [Vertex; 4] {
    std::array::from_fn(|a| {
        let v = V[a];
        let (offset, sign) = if t == 0 {
            (v.map(|x| (x - 1) / 2), 0.5)
        } else {
            (v.map(|x| (-x - 1) / 2), -0.5)
        };
        let c = [0, 1, 2].map(|k| l[k] as isize + offset[k] as isize);
        Vertex { corner: grid.index_wrapped(c), g: v.map(|x| sign * x as f64) }
    })
}

/// Strain (tensor components) of sub-lattice `t` at voxel `l`.
pub fn local_strain(grid: &Grid, u: &[Vec<f64>; 3], l: [usize; 3], t: usize) -> VoigtTensor2 {
    let vs = vertices(grid, l, t);
    let mut grad = [[0.0; 3]; 3];
    for vx in &vs {
        for i in 0..3 {
            for j in 0..3 {
                grad[i][j] += vx.g[i] * u[j][vx.corner];
            }
        }
    }
    VoigtTensor2::from_matrix(grad)
}

/// Reference solution of the discrete problem.
#[derive(Clone, Debug)]
pub struct OracleSolution {
    /// Corner displacements, orthogonal to the rigid translations.
    pub displacement: [Vec<f64>; 3],
    pub mean_strain: VoigtTensor2,
    /// Stress per sub-lattice.
    pub stress_t1: TensorField,
    pub stress_t2: TensorField,
    /// Average of the two.
    pub stress: TensorField,
    pub energy: f64,
}

/// Stresses of both sub-lattices for given corner displacements.
pub fn stresses(materials: &MaterialFields, u: &[Vec<f64>; 3], mean_strain: &VoigtTensor2) -> [TensorField; 2] {
    let grid = materials.grid();
    let n = grid.len();
    let mut out = [TensorField::zeros(n), TensorField::zeros(n)];
    for idx in 0..n {
        let l = grid.coords(idx);
        for (t, field) in out.iter_mut().enumerate() {
            let e = *mean_strain + local_strain(grid, u, l, t) - *materials.eigenstrain(idx);
            field.set(idx, &materials.stiffness(idx).contract(&e));
        }
    }
    out
}

/// Discrete energy (unit voxel volume).
pub fn discrete_energy(materials: &MaterialFields, u: &[Vec<f64>; 3], mean_strain: &VoigtTensor2) -> f64 {
    let grid = materials.grid();
    let mut e = 0.0;
    for idx in 0..grid.len() {
        let l = grid.coords(idx);
        for t in 0..2 {
            let x = *mean_strain + local_strain(grid, u, l, t) - *materials.eigenstrain(idx);
            e += 0.25 * materials.stiffness(idx).contract(&x).ddot(&x);
        }
    }
    e
}

/// Force density `dE/du(c)` at every corner from the sub-lattice stresses.
pub fn force_density(grid: &Grid, stress_t1: &TensorField, stress_t2: &TensorField) -> [Vec<f64>; 3] {
    let n = grid.len();
    let mut f = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for idx in 0..n {
        let l = grid.coords(idx);
        for (t, s) in [stress_t1, stress_t2].into_iter().enumerate() {
            let sig = s.at(idx);
            for vx in vertices(grid, l, t) {
                for (m, fm) in f.iter_mut().enumerate() {
                    let v: f64 = (0..3).map(|i| vx.g[i] * sig.get(i, m)).sum();
                    fm[vx.corner] += 0.5 * v;
                }
            }
        }
    }
    f
}

/// `sqrt((1/N) sum_c |dE/du(c)|^2)`.
pub fn force_density_norm(grid: &Grid, stress_t1: &TensorField, stress_t2: &TensorField) -> f64 {
    let f = force_density(grid, stress_t1, stress_t2);
    let s: f64 = f.iter().flatten().map(|v| v * v).sum();
    (s / grid.len() as f64).sqrt()
}

/// Strain-displacement matrix in engineering form: `gamma = B u_local`.
fn b_matrix(vs: &[Vertex; 4]) -> [[f64; 12]; 6] {
    let mut b = [[0.0; 12]; 6];
    for (a, vx) in vs.iter().enumerate() {
        for (slot, &(i, j)) in VOIGT_PAIRS.iter().enumerate() {
            if i == j {
                b[slot][3 * a + i] += vx.g[i];
            } else {
                b[slot][3 * a + j] += vx.g[i];
                b[slot][3 * a + i] += vx.g[j];
            }
        }
    }
    b
}

fn engineering(e: &VoigtTensor2) -> [f64; 6] {
    std::array::from_fn(|k| VOIGT_WEIGHTS[k] * e.0[k])
}

/// Solves the discrete equilibrium directly. Tetrahedral scheme only; all
/// dimensions even and at most [`ORACLE_MAX_VOXELS`] voxels.
pub fn oracle_solve(materials: &MaterialFields, loading: &Loading) -> Result<OracleSolution> {
    let grid = *materials.grid();
    grid.require_even()?;
    let n = grid.len();
    if n > ORACLE_MAX_VOXELS {
        return Err(Error::OracleTooLarge { voxels: n, limit: ORACLE_MAX_VOXELS });
    }
    let stress_mode = matches!(loading, Loading::Stress(_));
    let nu = 3 * n;
    let ndof = nu + if stress_mode { 6 } else { 0 };
    let mut k = DMatrix::<f64>::zeros(ndof, ndof);
    let mut rhs = DVector::<f64>::zeros(ndof);
    let fixed_strain = match loading {
        Loading::Strain(e) => Some(engineering(e)),
        Loading::Stress(_) => None,
    };

    for idx in 0..n {
        let c: &VoigtTensor4 = materials.stiffness(idx);
        if c.is_zero() {
            continue;
        }
        let g0 = engineering(materials.eigenstrain(idx));
        let l = grid.coords(idx);
        for t in 0..2 {
            let vs = vertices(&grid, l, t);
            let b = b_matrix(&vs);
            // cb = C B (6 x 12)
            let mut cb = [[0.0; 12]; 6];
            for r in 0..6 {
                for col in 0..12 {
                    cb[r][col] = (0..6).map(|s| c.0[r][s] * b[s][col]).sum();
                }
            }
            let dof = |col: usize| 3 * vs[col / 3].corner + col % 3;
            for r in 0..12 {
                for col in 0..12 {
                    let v: f64 = (0..6).map(|s| b[s][r] * cb[s][col]).sum();
                    k[(dof(r), dof(col))] += 0.5 * v;
                }
            }
            // Load from the mean strain (if fixed) and the eigenstrain.
            let mut drive = [0.0; 6];
            for s in 0..6 {
                drive[s] = -g0[s] + fixed_strain.map_or(0.0, |e| e[s]);
            }
            let cd: [f64; 6] = std::array::from_fn(|r| (0..6).map(|s| c.0[r][s] * drive[s]).sum());
            for r in 0..12 {
                let v: f64 = (0..6).map(|s| b[s][r] * cd[s]).sum();
                rhs[dof(r)] -= 0.5 * v;
            }
            if stress_mode {
                for r in 0..6 {
                    for col in 0..12 {
                        k[(nu + r, dof(col))] += 0.5 * cb[r][col];
                        k[(dof(col), nu + r)] += 0.5 * cb[r][col];
                    }
                    for s in 0..6 {
                        k[(nu + r, nu + s)] += 0.5 * c.0[r][s];
                    }
                    rhs[nu + r] -= 0.5 * cd[r];
                }
            }
        }
    }
    if let Loading::Stress(s) = loading {
        for r in 0..6 {
            rhs[nu + r] += n as f64 * s.0[r];
        }
    }

    // Rigid translations of each sub-lattice.
    let diag_scale = (0..nu).map(|i| k[(i, i)]).sum::<f64>() / nu as f64;
    let modes = translation_modes(&grid);
    for m in &modes {
        for (i, &a) in m.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for (j, &b) in m.iter().enumerate() {
                if b != 0.0 {
                    k[(i, j)] += diag_scale * a * b;
                }
            }
        }
    }

    let chol = k.cholesky().ok_or(Error::OracleSingular)?;
    let x = chol.solve(&rhs);
    let displacement: [Vec<f64>; 3] = std::array::from_fn(|m| (0..n).map(|c| x[3 * c + m]).collect());
    let mean_strain = match loading {
        Loading::Strain(e) => *e,
        Loading::Stress(_) => VoigtTensor2(std::array::from_fn(|r| x[nu + r] / VOIGT_WEIGHTS[r])),
    };
    let [s1, s2] = stresses(materials, &displacement, &mean_strain);
    let mut stress = TensorField::zeros(n);
    for kk in 0..6 {
        for i in 0..n {
            stress.comps[kk][i] = 0.5 * (s1.comps[kk][i] + s2.comps[kk][i]);
        }
    }
    let energy = discrete_energy(materials, &displacement, &mean_strain);
    Ok(OracleSolution { displacement, mean_strain, stress_t1: s1, stress_t2: s2, stress, energy })
}

/// Orthonormal basis of the six rigid translations in the `3N` dof vector.
fn translation_modes(grid: &Grid) -> Vec<Vec<f64>> {
    let n = grid.len();
    let mut modes = Vec::with_capacity(6);
    for parity in 0..2 {
        let members: Vec<usize> = (0..n)
            .filter(|&c| {
                let l = grid.coords(c);
                (l[0] + l[1] + l[2]) % 2 == parity
            })
            .collect();
        let w = 1.0 / (members.len() as f64).sqrt();
        for m in 0..3 {
            let mut v = vec![0.0; 3 * n];
            for &c in &members {
                v[3 * c + m] = w;
            }
            modes.push(v);
        }
    }
    modes
}
