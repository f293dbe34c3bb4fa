//! Fixtures shared by the benchmarks.

use tetrafft_core::microstructure::{gen_centered_sphere, MaterialFields, Phase};
use tetrafft_core::{Grid, IsotropicConstants, VoigtTensor4};

/// Stiff sphere in a softer matrix on an `n^3` grid.
pub fn sphere_fixture(n: usize) -> MaterialFields {
    let grid = Grid::cubic(n).expect("grid");
    let matrix = Phase::elastic(
        "matrix",
        tetrafft_core::tensor::isotropic_stiffness(IsotropicConstants::ENu { e: 2100.0, nu: 0.3 }).expect("matrix"),
    )
    .expect("matrix phase");
    let glass = Phase::elastic(
        "glass",
        tetrafft_core::tensor::isotropic_stiffness(IsotropicConstants::ENu { e: 72000.0, nu: 0.22 }).expect("glass"),
    )
    .expect("glass phase");
    let mut fields = MaterialFields::homogeneous(&grid, matrix);
    let id = fields.add_phase(glass).expect("palette");
    gen_centered_sphere(fields, 0.3 * n as f64, id).expect("sphere")
}

/// Mean of the two phase stiffnesses.
pub fn mean_reference(fields: &MaterialFields) -> VoigtTensor4 {
    let p = fields.phases();
    (p[0].stiffness + p[1].stiffness) * 0.5
}
