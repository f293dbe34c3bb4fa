//! Fixed-point solvers of the periodic Lippmann-Schwinger equation.
//!
//! Each iteration evaluates the current strain in real space, applies the
//! local constitutive law, transforms the stress back and corrects the
//! unknowns with the reference-medium Green operator. The tetrahedral
//! scheme carries two strain fields, one per FCC sub-lattice:
//!
//! ```text
//! de1(q) = D (x)s u,   de2(q) = -conj(D) (x)s u
//! s_k(r) = lambda(r) : (E + de_k(r) - eps0(r))
//! R(q)   = s1(q) . conj(D) - s2(q) . D
//! u     <- u - Omega R
//! ```
//!
//! The strain-based form updates the two strain fields directly with
//! `de1 <- de1 - Gamma R`, `de2 <- de2 + conj(Gamma) R`, which reproduces the
//! displacement-based iterates exactly. The rotated scheme uses a single
//! field with `R = s . conj(D)`, and the continuum baseline updates
//! `de <- de - Gamma0 : s`.
//!
//! Under applied stress the mean strain follows after every iteration:
//!
//! ```text
//! E <- l0^-1 : { S + (l0 - <lambda>) : E - <lambda : de> + <lambda : eps0> }
//! ```

use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::green::{self, GreenTable};
use crate::grid::{Fft3, Grid, TensorField, TensorFieldQ, VectorFieldQ};
use crate::microstructure::MaterialFields;
use crate::stencil::{Scheme, StencilTable};
use crate::tensor::{cplx, VoigtTensor2, VoigtTensor4, VOIGT_WEIGHTS};

type C = Complex64;

/// Which unknown the fixed point iterates on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// Displacement in frequency space.
    Displacement,
    /// Strain fields, corrected with `Gamma`.
    Strain,
    /// Strain fields, corrected with the fourth-order `Gd`/`Gnd` operators.
    StrainFull,
}

/// Macroscopic loading.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loading {
    /// Prescribed mean strain.
    Strain(VoigtTensor2),
    /// Prescribed mean stress; the mean strain is iterated.
    Stress(VoigtTensor2),
}

/// Denominator of the relative residual.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidualNorm {
    /// Frobenius norm of the mean stress.
    #[default]
    MeanStress,
    /// Root mean square of the local stress Frobenius norm. Stays finite when
    /// the mean stress vanishes, e.g. eigenstrain under zero applied stress.
    RmsStress,
}

/// Stopping rules.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub residual_norm: ResidualNorm,
    /// Stop when the best residual improves by less than
    /// `1 - stagnation_ratio` over this many iterations.
    pub stagnation_window: usize,
    pub stagnation_ratio: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 1000, residual_norm: ResidualNorm::MeanStress, stagnation_window: 200, stagnation_ratio: 0.99 }
    }
}

/// Everything the solver needs besides the microstructure.
#[derive(Clone, Debug)]
pub struct SolverSetup {
    pub scheme: Scheme,
    /// Defaults to displacement for the finite-difference schemes and strain
    /// for the continuum one.
    pub algorithm: Option<Algorithm>,
    pub reference: VoigtTensor4,
    pub loading: Loading,
    pub options: SolverOptions,
}

/// Why the iteration stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIterations,
    Stagnated,
}

/// One row of the convergence history.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    #[serde(rename = "L2")]
    pub l2: f64,
    pub epsilon: f64,
    pub seconds: f64,
}

/// Convergence history with the stopping reason.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub records: Vec<IterationRecord>,
    pub termination: Termination,
}

impl ConvergenceReport {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }

    pub fn final_epsilon(&self) -> f64 {
        self.records.last().map_or(f64::INFINITY, |r| r.epsilon)
    }
}

/// Equilibrium residual of one evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Residual {
    pub l2: f64,
    pub epsilon: f64,
    pub mean_stress: VoigtTensor2,
    /// Denominator used for `epsilon`.
    pub norm: f64,
}

/// Iterated unknowns.
#[derive(Clone, Debug)]
pub struct SolverState {
    /// `u(q)` for the displacement algorithm.
    pub displacement: Option<VectorFieldQ>,
    /// Strain fluctuations `de(q)`; two fields for the tetrahedral scheme.
    pub strain: Vec<TensorFieldQ>,
    pub mean_strain: VoigtTensor2,
}

/// Converged or final fields.
#[derive(Clone, Debug)]
pub struct SolveOutput {
    /// Stress averaged over the discretizations of the scheme.
    pub stress: TensorField,
    /// Total strain averaged the same way.
    pub strain: TensorField,
    pub mean_strain: VoigtTensor2,
    pub mean_stress: VoigtTensor2,
    pub report: ConvergenceReport,
    pub state: SolverState,
}

/// Equilibrium residual from the stress spectra.
///
/// `stress` holds one field per discretization (two for the tetrahedral
/// scheme). With `ResidualNorm::MeanStress` and a zero mean stress the
/// relative residual is `+inf` and a warning is logged.
pub fn residual(
    scheme: Scheme,
    grid: &Grid,
    stencil: Option<&StencilTable>,
    stress: &[TensorFieldQ],
    norm: ResidualNorm,
) -> Result<Residual> {
    let nf = fields_for(scheme);
    if stress.len() != nf {
        return Err(Error::DimensionMismatch { expected: nf, got: stress.len() });
    }
    for s in stress {
        crate::grid::check_len(grid, s.len())?;
    }
    let mut sum = 0.0;
    let mut rms = 0.0;
    for i in 0..grid.len() {
        let r = force(scheme, grid, stencil, stress, i);
        let scale = if scheme == Scheme::Tetrahedral { 0.25 } else { 1.0 };
        sum += scale * cplx::norm_sqr3(&r);
        if norm == ResidualNorm::RmsStress {
            let s = averaged_at(stress, i);
            rms += (0..6).map(|k| VOIGT_WEIGHTS[k] * s[k].norm_sqr()).sum::<f64>();
        }
    }
    let l2 = sum.sqrt();
    let s0 = averaged_at(stress, 0);
    let mean_stress = VoigtTensor2(s0.map(|v| v.re));
    let denom = match norm {
        ResidualNorm::MeanStress => mean_stress.frobenius_norm(),
        ResidualNorm::RmsStress => rms.sqrt(),
    };
    let epsilon = if denom > 0.0 {
        l2 / denom
    } else {
        log::warn!("stress normalization is zero; relative residual set to +inf");
        f64::INFINITY
    };
    Ok(Residual { l2, epsilon, mean_stress, norm: denom })
}

#[inline]
fn fields_for(scheme: Scheme) -> usize {
    if scheme == Scheme::Tetrahedral {
        2
    } else {
        1
    }
}

#[inline]
fn averaged_at(stress: &[TensorFieldQ], i: usize) -> [C; 6] {
    match stress {
        [a, b] => std::array::from_fn(|k| 0.5 * (a.comps[k][i] + b.comps[k][i])),
        [a] => a.at(i),
        _ => [cplx::ZERO; 6],
    }
}

/// Unscaled out-of-balance force at one frequency.
#[inline]
fn force(scheme: Scheme, grid: &Grid, stencil: Option<&StencilTable>, stress: &[TensorFieldQ], i: usize) -> [C; 3] {
    match scheme {
        Scheme::Tetrahedral => {
            let d = stencil.expect("tetrahedral residual needs a stencil").d(i);
            let a = cplx::sym_dot(&stress[0].at(i), &cplx::conj3(d));
            let b = cplx::sym_dot(&stress[1].at(i), d);
            [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
        }
        Scheme::Rotated => {
            let d = stencil.expect("rotated residual needs a stencil").d(i);
            cplx::sym_dot(&stress[0].at(i), &cplx::conj3(d))
        }
        Scheme::MoulinecSuquet => {
            let xi = grid.frequency(i).centered().map(|v| C::new(0.0, v));
            cplx::sym_dot(&stress[0].at(i), &xi)
        }
    }
}

/// Mean-strain update under applied stress.
pub fn update_mean_strain(
    lam0: &VoigtTensor4,
    compliance0: &VoigtTensor4,
    mean_stiffness: &VoigtTensor4,
    applied: &VoigtTensor2,
    mean_strain: &VoigtTensor2,
    mean_lambda_de: &VoigtTensor2,
    mean_eigenstress: &VoigtTensor2,
) -> VoigtTensor2 {
    let rhs = *applied + (*lam0 - *mean_stiffness).contract(mean_strain) - *mean_lambda_de + *mean_eigenstress;
    compliance0.contract(&rhs)
}

/// Buffers and tables for one microstructure and setup.
pub struct Solver<'a> {
    materials: &'a MaterialFields,
    grid: Grid,
    scheme: Scheme,
    algorithm: Algorithm,
    loading: Loading,
    options: SolverOptions,
    fft: Fft3,
    stencil: Option<StencilTable>,
    green: Option<GreenTable>,
    lam0: VoigtTensor4,
    compliance0: VoigtTensor4,
    ms_lame: Option<(f64, f64)>,
    mean_stiffness: VoigtTensor4,
    mean_eigenstress: VoigtTensor2,
    eps_q: Vec<TensorFieldQ>,
    eps_r: Vec<TensorField>,
    sig_r: Vec<TensorField>,
    sig_q: Vec<TensorFieldQ>,
    buf: Vec<C>,
    mean_lambda_de: VoigtTensor2,
}

impl std::fmt::Debug for Solver<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Solver")
            .field("grid", &self.grid)
            .field("scheme", &self.scheme)
            .field("algorithm", &self.algorithm)
            .finish_non_exhaustive()
    }
}

impl<'a> Solver<'a> {
    /// Builds the tables for `setup`; fails on incompatible choices.
    pub fn new(materials: &'a MaterialFields, setup: &SolverSetup) -> Result<Self> {
        let grid = *materials.grid();
        let scheme = setup.scheme;
        let algorithm = setup.algorithm.unwrap_or(match scheme {
            Scheme::MoulinecSuquet => Algorithm::Strain,
            _ => Algorithm::Displacement,
        });
        if scheme == Scheme::MoulinecSuquet && algorithm != Algorithm::Strain {
            return Err(Error::Config("the continuum scheme only iterates on strain".into()));
        }
        if !(setup.options.tol > 0.0) {
            return Err(Error::Config(format!("tolerance must be positive, got {}", setup.options.tol)));
        }
        if setup.options.max_iter == 0 {
            return Err(Error::Config("max_iter must be at least 1".into()));
        }
        let lam0 = setup.reference;
        green::validate_reference(&lam0)?;
        let compliance0 = lam0.inverse().ok_or_else(|| Error::Config("reference stiffness is singular".into()))?;
        let ms_lame = if scheme == Scheme::MoulinecSuquet {
            Some(
                lam0.isotropic_moduli()
                    .ok_or_else(|| Error::Config("the continuum scheme needs an isotropic reference medium".into()))?,
            )
        } else {
            None
        };
        let stencil = StencilTable::for_scheme(scheme, &grid)?;
        let green = match &stencil {
            Some(st) => {
                let table = green::assemble_omega(st, &lam0)?;
                Some(match algorithm {
                    Algorithm::Displacement => table,
                    Algorithm::Strain => green::assemble_gamma(table, st),
                    Algorithm::StrainFull => green::assemble_strain_green(table, st),
                })
            }
            None => None,
        };
        let n = grid.len();
        let nf = fields_for(scheme);
        Ok(Self {
            materials,
            grid,
            scheme,
            algorithm,
            loading: setup.loading,
            options: setup.options,
            fft: Fft3::new(grid),
            stencil,
            green,
            lam0,
            compliance0,
            ms_lame,
            mean_stiffness: materials.mean_stiffness(),
            mean_eigenstress: materials.mean_eigenstress(),
            eps_q: if algorithm == Algorithm::Displacement { (0..nf).map(|_| TensorFieldQ::zeros(n)).collect() } else { Vec::new() },
            eps_r: (0..nf).map(|_| TensorField::zeros(n)).collect(),
            sig_r: (0..nf).map(|_| TensorField::zeros(n)).collect(),
            sig_q: (0..nf).map(|_| TensorFieldQ::zeros(n)).collect(),
            buf: vec![C::default(); n],
            mean_lambda_de: VoigtTensor2::ZERO,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn algorithm(&self) -> Algorithm {
        self.algorithm
    }

    pub fn stencil(&self) -> Option<&StencilTable> {
        self.stencil.as_ref()
    }

    pub fn green(&self) -> Option<&GreenTable> {
        self.green.as_ref()
    }

    /// Zero fluctuations; the mean strain starts at `l0^-1 : S` under applied stress.
    pub fn initial_state(&self) -> SolverState {
        let n = self.grid.len();
        let nf = fields_for(self.scheme);
        let mean_strain = match self.loading {
            Loading::Strain(e) => e,
            Loading::Stress(s) => self.compliance0.contract(&s),
        };
        match self.algorithm {
            Algorithm::Displacement => SolverState { displacement: Some(VectorFieldQ::zeros(n)), strain: Vec::new(), mean_strain },
            _ => SolverState { displacement: None, strain: (0..nf).map(|_| TensorFieldQ::zeros(n)).collect(), mean_strain },
        }
    }

    /// Strain spectra implied by the current state.
    pub fn strain_spectra<'s>(&'s mut self, state: &'s SolverState) -> &'s [TensorFieldQ] {
        match &state.displacement {
            Some(u) => {
                fill_strain_from_displacement(self.scheme, self.stencil.as_ref(), u, &mut self.eps_q);
                &self.eps_q
            }
            None => &state.strain,
        }
    }

    /// Steps 1-4 of an iteration plus the residual: strain to real space,
    /// constitutive law, stress back to frequency space.
    pub fn evaluate(&mut self, state: &SolverState) -> Result<Residual> {
        if let Some(u) = &state.displacement {
            fill_strain_from_displacement(self.scheme, self.stencil.as_ref(), u, &mut self.eps_q);
        }
        let spectra: &[TensorFieldQ] = if state.displacement.is_some() { &self.eps_q } else { &state.strain };
        inverse_fields(&self.fft, spectra, &mut self.eps_r, &mut self.buf);

        let want_lde = matches!(self.loading, Loading::Stress(_));
        let mut lde = VoigtTensor2::ZERO;
        for (eps, sig) in self.eps_r.iter().zip(self.sig_r.iter_mut()) {
            lde += constitutive(self.materials, &state.mean_strain, eps, sig, want_lde);
        }
        let nf = self.eps_r.len() as f64;
        self.mean_lambda_de = lde * (1.0 / (nf * self.grid.len() as f64));

        forward_fields(&self.fft, &self.sig_r, &mut self.sig_q, &mut self.buf);
        residual(self.scheme, &self.grid, self.stencil.as_ref(), &self.sig_q, self.options.residual_norm)
    }

    /// Step 5 (and 6 under applied stress), using the last evaluation.
    pub fn update(&self, state: &mut SolverState) {
        match (self.scheme, self.algorithm) {
            (Scheme::MoulinecSuquet, _) => self.update_ms(state),
            (_, Algorithm::Displacement) => self.update_displacement(state),
            (_, Algorithm::Strain) => self.update_strain_gamma(state),
            (_, Algorithm::StrainFull) => self.update_strain_full(state),
        }
        if let Loading::Stress(s) = self.loading {
            state.mean_strain = update_mean_strain(
                &self.lam0,
                &self.compliance0,
                &self.mean_stiffness,
                &s,
                &state.mean_strain,
                &self.mean_lambda_de,
                &self.mean_eigenstress,
            );
        }
    }

    /// One displacement-based iteration; returns the residual of the state
    /// before the update.
    pub fn step_displacement(&mut self, state: &mut SolverState) -> Result<Residual> {
        self.check_algorithm(state, true)?;
        let r = self.evaluate(state)?;
        self.update(state);
        Ok(r)
    }

    /// One strain-based iteration.
    pub fn step_strain(&mut self, state: &mut SolverState) -> Result<Residual> {
        self.check_algorithm(state, false)?;
        let r = self.evaluate(state)?;
        self.update(state);
        Ok(r)
    }

    /// One continuum fixed-point iteration.
    pub fn step_ms(&mut self, state: &mut SolverState) -> Result<Residual> {
        if self.scheme != Scheme::MoulinecSuquet {
            return Err(Error::InvalidArgument("solver was not built for the continuum scheme".into()));
        }
        self.step_strain(state)
    }

    fn check_algorithm(&self, state: &SolverState, displacement: bool) -> Result<()> {
        if state.displacement.is_some() != displacement || (self.algorithm == Algorithm::Displacement) != displacement {
            return Err(Error::InvalidArgument(format!("state does not match the {:?} algorithm", self.algorithm)));
        }
        Ok(())
    }

    fn update_displacement(&self, state: &mut SolverState) {
        let u = state.displacement.as_mut().expect("displacement state");
        let st = self.stencil.as_ref().expect("stencil");
        let g = self.green.as_ref().expect("green table");
        for i in 0..self.grid.len() {
            let om = g.omega(i);
            if om.iter().all(|&v| v == 0.0) {
                continue;
            }
            let r = force(self.scheme, &self.grid, Some(st), &self.sig_q, i);
            let du = cplx::sym3_apply(om, &r);
            for k in 0..3 {
                u.comps[k][i] -= du[k];
            }
        }
    }

    fn update_strain_gamma(&self, state: &mut SolverState) {
        let st = self.stencil.as_ref().expect("stencil");
        let gamma = self.green.as_ref().and_then(|g| g.gamma()).expect("gamma table");
        for i in 0..self.grid.len() {
            let r = force(self.scheme, &self.grid, Some(st), &self.sig_q, i);
            let gm = &gamma[i];
            for slot in 0..6 {
                let v = gm[slot][0] * r[0] + gm[slot][1] * r[1] + gm[slot][2] * r[2];
                state.strain[0].comps[slot][i] -= v;
                if self.scheme == Scheme::Tetrahedral {
                    let vc = gm[slot][0].conj() * r[0] + gm[slot][1].conj() * r[1] + gm[slot][2].conj() * r[2];
                    state.strain[1].comps[slot][i] += vc;
                }
            }
        }
    }

    fn update_strain_full(&self, state: &mut SolverState) {
        let sg = self.green.as_ref().and_then(|g| g.strain_green()).expect("strain Green table");
        for i in 0..self.grid.len() {
            let gd = &sg.gd[i];
            let s1 = self.sig_q[0].at(i);
            match &sg.gnd {
                Some(gnd_all) => {
                    let gnd = &gnd_all[i];
                    let s2 = self.sig_q[1].at(i);
                    let a = green::apply_voigt4(gd, &s1);
                    let b = green::apply_voigt4(gnd, &s2);
                    let gnd_c = gnd.map(|row| row.map(|v| v.conj()));
                    let gd_c = gd.map(|row| row.map(|v| v.conj()));
                    let c = green::apply_voigt4(&gnd_c, &s1);
                    let d = green::apply_voigt4(&gd_c, &s2);
                    for k in 0..6 {
                        state.strain[0].comps[k][i] -= a[k] + b[k];
                        state.strain[1].comps[k][i] -= c[k] + d[k];
                    }
                }
                None => {
                    let a = green::apply_voigt4(gd, &s1);
                    for k in 0..6 {
                        state.strain[0].comps[k][i] -= a[k];
                    }
                }
            }
        }
    }

    fn update_ms(&self, state: &mut SolverState) {
        let (l0, m0) = self.ms_lame.expect("isotropic reference");
        let de = &mut state.strain[0];
        for i in 0..self.grid.len() {
            if i == 0 {
                de.set(0, &[cplx::ZERO; 6]);
                continue;
            }
            let q = self.grid.frequency(i);
            let v = green::ms_apply(l0, m0, &self.compliance0, &q, &self.sig_q[0].at(i));
            for k in 0..6 {
                de.comps[k][i] -= v[k];
            }
        }
    }

    /// Stress of the last evaluation, averaged over the discretizations.
    pub fn averaged_stress(&self) -> TensorField {
        average_fields(&self.sig_r, None)
    }

    /// Total strain of the last evaluation.
    pub fn averaged_strain(&self, mean_strain: &VoigtTensor2) -> TensorField {
        average_fields(&self.eps_r, Some(mean_strain))
    }

    /// Per-discretization stress of the last evaluation.
    pub fn stress_fields(&self) -> &[TensorField] {
        &self.sig_r
    }

    pub fn stress_spectra(&self) -> &[TensorFieldQ] {
        &self.sig_q
    }

    /// Per-discretization strain fluctuation of the last evaluation.
    pub fn strain_fluctuation_fields(&self) -> &[TensorField] {
        &self.eps_r
    }

    /// Iterates from `state` until a stopping rule fires. `observer` sees
    /// every evaluation before the corresponding update.
    pub fn run<F>(&mut self, state: &mut SolverState, mut observer: F) -> Result<ConvergenceReport>
    where
        F: FnMut(&IterationRecord, &Residual, &Solver<'_>),
    {
        let start = Instant::now();
        let mut records = Vec::new();
        let mut best: Vec<f64> = Vec::new();
        let opts = self.options;
        let termination = loop {
            let iter = records.len() + 1;
            let r = self.evaluate(state)?;
            if !r.l2.is_finite() || !r.mean_stress.is_finite() {
                return Err(Error::Divergence { iteration: iter });
            }
            let rec = IterationRecord { iter, l2: r.l2, epsilon: r.epsilon, seconds: start.elapsed().as_secs_f64() };
            records.push(rec);
            observer(&rec, &r, self);
            log::debug!("iter {iter}: L2 = {:e}, epsilon = {:e}", r.l2, r.epsilon);

            let prev_best = best.last().copied().unwrap_or(f64::INFINITY);
            best.push(prev_best.min(r.epsilon));
            if r.epsilon <= opts.tol && self.macroscopic_ok(&r) {
                break Termination::Converged;
            }
            if iter >= opts.max_iter {
                break Termination::MaxIterations;
            }
            let w = opts.stagnation_window;
            if w > 0 && iter > w && best[iter - 1] > opts.stagnation_ratio * best[iter - 1 - w] {
                break Termination::Stagnated;
            }
            self.update(state);
        };
        Ok(ConvergenceReport { records, termination })
    }

    /// Under applied stress the mean stress must also match the target.
    fn macroscopic_ok(&self, r: &Residual) -> bool {
        match self.loading {
            Loading::Strain(_) => true,
            Loading::Stress(s) => (r.mean_stress - s).frobenius_norm() <= self.options.tol * r.norm,
        }
    }

    /// Runs to termination and collects the final fields.
    pub fn solve(&mut self) -> Result<SolveOutput> {
        let mut state = self.initial_state();
        let report = self.run(&mut state, |_, _, _| {})?;
        Ok(self.output(state, report))
    }

    /// Packages the fields of the last evaluation.
    pub fn output(&self, state: SolverState, report: ConvergenceReport) -> SolveOutput {
        let stress = self.averaged_stress();
        let strain = self.averaged_strain(&state.mean_strain);
        let mean_stress = stress.mean();
        SolveOutput { stress, strain, mean_strain: state.mean_strain, mean_stress, report, state }
    }

    /// Real-space displacement at the voxel corners, indexed like the voxels:
    /// entry `l` sits at `l + (1/2, 1/2, 1/2)`.
    pub fn displacement_field(&self, state: &SolverState) -> Option<[Vec<f64>; 3]> {
        let u = state.displacement.as_ref()?;
        let shift = self.scheme == Scheme::Tetrahedral;
        Some(std::array::from_fn(|k| {
            let mut buf: Vec<C> = (0..self.grid.len())
                .map(|i| {
                    if shift {
                        let q = self.grid.frequency(i).q;
                        u.comps[k][i] * crate::grid::exact_cis(0.5 * (q[0] + q[1] + q[2]))
                    } else {
                        u.comps[k][i]
                    }
                })
                .collect();
            self.fft.inverse(&mut buf);
            buf.iter().map(|z| z.re).collect()
        }))
    }
}

/// `de1 = D (x)s u`, `de2 = -conj(D) (x)s u` (tetrahedral) or `de = D (x)s u`.
fn fill_strain_from_displacement(scheme: Scheme, stencil: Option<&StencilTable>, u: &VectorFieldQ, out: &mut [TensorFieldQ]) {
    let st = stencil.expect("finite-difference scheme");
    let n = u.comps[0].len();
    for i in 0..n {
        let d = st.d(i);
        let ui = u.at(i);
        out[0].set(i, &cplx::sym_outer(d, &ui));
        if scheme == Scheme::Tetrahedral {
            let e2 = cplx::sym_outer(&cplx::conj3(d), &ui).map(|v| -v);
            out[1].set(i, &e2);
        }
    }
}

fn inverse_fields(fft: &Fft3, spectra: &[TensorFieldQ], out: &mut [TensorField], buf: &mut [C]) {
    match (spectra, out) {
        ([a, b], [oa, ob]) => {
            for k in 0..6 {
                fft.inverse_real_pair(&a.comps[k], &b.comps[k], buf, &mut oa.comps[k], &mut ob.comps[k]);
            }
        }
        ([a], [oa]) => {
            for p in 0..3 {
                let (lo, hi) = oa.comps.split_at_mut(2 * p + 1);
                fft.inverse_real_pair(&a.comps[2 * p], &a.comps[2 * p + 1], buf, &mut lo[2 * p], &mut hi[0]);
            }
        }
        _ => unreachable!("one or two fields"),
    }
}

fn forward_fields(fft: &Fft3, fields: &[TensorField], out: &mut [TensorFieldQ], buf: &mut [C]) {
    match (fields, out) {
        ([a, b], [oa, ob]) => {
            for k in 0..6 {
                fft.forward_real_pair(&a.comps[k], &b.comps[k], buf, &mut oa.comps[k], &mut ob.comps[k]);
            }
        }
        ([a], [oa]) => {
            for p in 0..3 {
                let (lo, hi) = oa.comps.split_at_mut(2 * p + 1);
                fft.forward_real_pair(&a.comps[2 * p], &a.comps[2 * p + 1], buf, &mut lo[2 * p], &mut hi[0]);
            }
        }
        _ => unreachable!("one or two fields"),
    }
}

/// `s = lambda : (E + de - eps0)`; returns `sum lambda : de` when asked.
fn constitutive(materials: &MaterialFields, mean_strain: &VoigtTensor2, eps: &TensorField, sig: &mut TensorField, want_lde: bool) -> VoigtTensor2 {
    let mut lde = VoigtTensor2::ZERO;
    for idx in 0..eps.len() {
        let c = materials.stiffness(idx);
        let de = eps.at(idx);
        let total = *mean_strain + de - *materials.eigenstrain(idx);
        let s = c.contract(&total);
        sig.set(idx, &s);
        if want_lde {
            lde += c.contract(&de);
        }
    }
    lde
}

fn average_fields(fields: &[TensorField], offset: Option<&VoigtTensor2>) -> TensorField {
    let n = fields[0].len();
    let w = 1.0 / fields.len() as f64;
    let mut out = TensorField::zeros(n);
    for k in 0..6 {
        let base = offset.map_or(0.0, |e| e.0[k]);
        for i in 0..n {
            out.comps[k][i] = base + w * fields.iter().map(|f| f.comps[k][i]).sum::<f64>();
        }
    }
    out
}

/// Builds a solver and runs it to termination.
pub fn solve(materials: &MaterialFields, setup: &SolverSetup) -> Result<SolveOutput> {
    Solver::new(materials, setup)?.solve()
}
