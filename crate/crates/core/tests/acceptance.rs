//! Acceptance suite: criteria 1 to 9, one PASS/FAIL line each.
//!
//! Run all with `cargo test -p tetrafft-core --test acceptance --release`,
//! or pass criterion numbers to run a subset (`-- 5 9`). Criteria listed in
//! `KNOWN_FAILURES` print FAIL without failing the target.

use std::path::Path;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tetrafft_core::analysis::green_field::{fit_decay, green_real_space};
use tetrafft_core::analysis::oracle::{force_density_norm, oracle_solve};
use tetrafft_core::analysis::profile::{extract_profile, line_indices, oscillation_of, phase_runs, ProfileComponent};
use tetrafft_core::config::{Contrast, RunConfig};
use tetrafft_core::green::{apply_voigt4, assemble_omega, assemble_strain_green, omega_inverse};
use tetrafft_core::microstructure::{assign_eigenstrain, gen_centered_cube};
use tetrafft_core::stencil::{shift_partner, tetrahedral_d, OmegaSet, StencilTable};
use tetrafft_core::tensor::isotropic_stiffness;
use tetrafft_core::*;

type C = Complex64;

/// Criteria expected to fail, with the reason.
const KNOWN_FAILURES: &[(usize, &str)] = &[(
    3,
    "tetrahedral iteration count grows about 1.6x from C=1e2 to C=1e4 under the mean-stress residual normalization",
)];

const MU_STEEL: f64 = 132300.0;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: String) -> Self {
        Self { pass, detail }
    }
}

fn main() {
    let selected: Vec<usize> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).filter_map(|a| a.parse().ok()).collect();
    let wanted = |c: usize| selected.is_empty() || selected.contains(&c);

    let mut void_runs = None;
    let mut results = Vec::new();
    for c in 1..=9 {
        if !wanted(c) {
            continue;
        }
        let t = Instant::now();
        let outcome = match c {
            1 => criterion_1(void_runs.get_or_insert_with(CubicVoidRuns::compute)),
            2 => criterion_2(void_runs.get_or_insert_with(CubicVoidRuns::compute)),
            3 => criterion_3(),
            4 => criterion_4(void_runs.get_or_insert_with(CubicVoidRuns::compute)),
            5 => criterion_5(),
            6 => criterion_6(),
            7 => criterion_7(),
            8 => criterion_8(),
            _ => criterion_9(),
        };
        let tag = if outcome.pass { "PASS" } else { "FAIL" };
        let line = format!("{tag} criterion {c}: {} [{:.1} s]", outcome.detail, t.elapsed().as_secs_f64());
        println!("{line}");
        results.push((c, outcome.pass, line));
    }

    println!();
    let mut unexpected = 0;
    for (c, pass, line) in &results {
        let known = KNOWN_FAILURES.iter().find(|(k, _)| k == c);
        match (pass, known) {
            (false, Some((_, why))) => println!("known failure, criterion {c}: {why}"),
            (false, None) => {
                unexpected += 1;
                println!("unexpected failure: {line}");
            }
            (true, Some(_)) => println!("criterion {c} passed; remove it from KNOWN_FAILURES"),
            (true, None) => {}
        }
    }
    if unexpected > 0 {
        std::process::exit(1);
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn build(cfg: &RunConfig) -> MaterialFields {
    cfg.build_materials(Path::new(".")).expect("materials")
}

// Criteria 1, 2, 4: cubic void under hydrostatic pressure.

fn cubic_void_config(scheme: &str, max_iter: usize) -> RunConfig {
    RunConfig::from_json(&format!(
        r#"{{
        "grid": {{ "dims": [64, 64, 64] }},
        "scheme": "{scheme}",
        "phases": [
            {{ "name": "matrix", "elastic": {{ "isotropic": {{ "mu_nu": {{ "mu": {MU_STEEL}, "nu": 0.26 }} }} }} }},
            {{ "name": "pore", "elastic": "void" }}
        ],
        "geometry": {{ "cube": {{ "edge": 31, "phase": "pore" }} }},
        "reference": {{ "scale_matrix": 0.8 }},
        "loading": {{ "stress": [-300.0, -300.0, -300.0, 0.0, 0.0, 0.0] }},
        "tol": 1e-10,
        "max_iter": {max_iter}
    }}"#
    ))
    .expect("cubic void config")
}

struct SchemeRun {
    out: SolveOutput,
    best_epsilon: f64,
    seconds: f64,
}

struct CubicVoidRuns {
    materials: MaterialFields,
    tetra: SchemeRun,
    rotated: SchemeRun,
    ms: SchemeRun,
}

impl CubicVoidRuns {
    fn compute() -> Self {
        let run = |scheme: &str, max_iter: usize| {
            let cfg = cubic_void_config(scheme, max_iter);
            let m = build(&cfg);
            let t = Instant::now();
            let out = solver::solve(&m, &cfg.solver_setup().unwrap()).expect("cubic void run");
            let best_epsilon = out.report.records.iter().map(|r| r.epsilon).fold(f64::INFINITY, f64::min);
            (m, SchemeRun { out, best_epsilon, seconds: t.elapsed().as_secs_f64() })
        };
        let (materials, tetra) = run("tetrahedral", 1000);
        let (_, rotated) = run("rotated", 1000);
        let (_, ms) = run("moulinec_suquet", 2000);
        Self { materials, tetra, rotated, ms }
    }
}

/// Smallest ratio `eps(k) / eps(k + 25)` over the history before the last
/// 25 records.
fn worst_decade_ratio(report: &ConvergenceReport) -> f64 {
    let eps: Vec<f64> = report.records.iter().map(|r| r.epsilon).collect();
    (0..eps.len().saturating_sub(25)).map(|k| eps[k] / eps[k + 25]).fold(f64::INFINITY, f64::min)
}

fn criterion_1(runs: &CubicVoidRuns) -> Outcome {
    let t = &runs.tetra;
    let r = &runs.rotated;
    let ms = &runs.ms;
    let tetra_ok = t.out.report.converged() && t.out.report.iterations() < 100 && t.seconds < 120.0;
    let decade = worst_decade_ratio(&t.out.report);
    let rotated_ok = r.out.report.converged() && r.out.report.iterations() < 150;
    let ms_ok = !ms.out.report.converged() && ms.out.report.iterations() <= 2000 && ms.best_epsilon > 1e-5;
    Outcome::new(
        tetra_ok && decade >= 10.0 && rotated_ok && ms_ok,
        format!(
            "tetrahedral {} iterations ({:.1} s, worst 25-iteration decrease {:.1}x), rotated {} iterations, \
             MS {:?} after {} iterations with best epsilon {:.2e}",
            t.out.report.iterations(),
            t.seconds,
            decade,
            r.out.report.iterations(),
            ms.out.report.termination,
            ms.out.report.iterations(),
            ms.best_epsilon
        ),
    )
}

fn criterion_2(runs: &CubicVoidRuns) -> Outcome {
    let reference = &runs.tetra.out.stress;
    let cfg = cubic_void_config("tetrahedral", 1000);
    let mut solver = Solver::new(&runs.materials, &cfg.solver_setup().unwrap()).unwrap();
    let mut state = solver.initial_state();
    let mut first = None;
    let mut history = Vec::new();
    solver
        .run(&mut state, |rec, _, s| {
            let d = s.averaged_stress().max_abs_diff(reference);
            history.push(d);
            if first.is_none() && d < 1.0 {
                first = Some(rec.iter);
            }
        })
        .unwrap();
    match first {
        Some(k) => Outcome::new(
            (10..=30).contains(&k),
            format!("max stress error first below 1 MPa after {k} iterations ({:.3} MPa there)", history[k - 1]),
        ),
        None => Outcome::new(false, "stress error never dropped below 1 MPa".into()),
    }
}

fn criterion_4(runs: &CubicVoidRuns) -> Outcome {
    let grid = *runs.materials.grid();
    let fixed = [31, 31];
    let idx = line_indices(&grid, 0, fixed).unwrap();
    let phases: Vec<u16> = idx.iter().map(|&i| runs.materials.phase_ids()[i]).collect();
    let Some(&(start, len)) = phase_runs(&phases).iter().find(|(s, _)| phases[*s] == 0) else {
        return Outcome::new(false, "mid-line has no matrix run".into());
    };
    // Half of the matrix run, from the void face to the cell boundary.
    let half: Vec<usize> = (0..len.div_ceil(2)).map(|k| (start + k) % grid.dims()[0]).collect();
    let osc = |out: &SolveOutput| {
        let p = extract_profile(&grid, &out.stress, 0, fixed, &[ProfileComponent::Voigt(0)]).unwrap();
        let v: Vec<f64> = half.iter().map(|&i| p.values[0][i]).collect();
        oscillation_of(&v)
    };
    let (t, r, m) = (osc(&runs.tetra.out), osc(&runs.rotated.out), osc(&runs.ms.out));
    Outcome::new(
        t < 0.05 * m && t < 0.2 * r,
        format!(
            "s11 oscillation on matrix samples {}..={}: tetrahedral {t:.4}, rotated {r:.4}, MS {m:.4}",
            half[0],
            half[half.len() - 1]
        ),
    )
}

// Criterion 3: contrast sweep on a spherical inclusion.

fn sphere_config(scheme: &str) -> RunConfig {
    RunConfig::from_json(&format!(
        r#"{{
        "grid": {{ "dims": [44, 44, 44] }},
        "scheme": "{scheme}",
        "phases": [
            {{ "name": "matrix", "elastic": {{ "isotropic": {{ "mu_nu": {{ "mu": 1.0, "nu": 0.125 }} }} }} }},
            {{ "name": "sphere", "elastic": {{ "isotropic": {{ "mu_nu": {{ "mu": 1.0, "nu": 0.125 }} }} }} }}
        ],
        "geometry": {{ "sphere": {{ "radius": 17.6, "phase": "sphere" }} }},
        "reference": "mean_phases",
        "loading": {{ "strain": [0.01, 0.0, 0.0, 0.0, 0.0, 0.0] }},
        "tol": 1e-10,
        "max_iter": 20000
    }}"#
    ))
    .expect("sphere config")
}

fn sweep(scheme: &str, contrasts: &[Contrast]) -> Vec<Option<usize>> {
    let base = sphere_config(scheme);
    contrasts
        .iter()
        .map(|&c| {
            let cfg = base.with_contrast(c).unwrap();
            let m = build(&cfg);
            let out = solver::solve(&m, &cfg.solver_setup().unwrap()).ok()?;
            out.report.converged().then(|| out.report.iterations())
        })
        .collect()
}

fn criterion_3() -> Outcome {
    let fmt = |v: &[Option<usize>]| v.iter().map(|c| c.map_or("-".into(), |n| n.to_string())).collect::<Vec<_>>().join("/");
    let tetra = sweep("tetrahedral", &[Contrast::Ratio(1e2), Contrast::Ratio(1e3), Contrast::Ratio(1e4), Contrast::Void]);
    let ms = sweep("moulinec_suquet", &[Contrast::Ratio(10.0), Contrast::Ratio(100.0)]);
    let tetra_ratio = match tetra.iter().copied().collect::<Option<Vec<_>>>() {
        Some(v) => v.iter().map(|&n| n as f64 / v[0] as f64).fold(0.0f64, f64::max),
        None => f64::INFINITY,
    };
    let ms_ratio = match (ms[0], ms[1]) {
        (Some(a), Some(b)) => b as f64 / a as f64,
        _ => f64::NAN,
    };
    Outcome::new(
        tetra_ratio <= 1.5 && (8.0..=12.0).contains(&ms_ratio),
        format!(
            "tetrahedral iterations at C=1e2/1e3/1e4/void: {} (max ratio {tetra_ratio:.2}, limit 1.5); \
             MS at C=10/100: {} (ratio {ms_ratio:.1}, expected 8 to 12)",
            fmt(&tetra),
            fmt(&ms)
        ),
    )
}

// Criterion 5: real-space decay of G24.

fn criterion_5() -> Outcome {
    let lam0 = isotropic_stiffness(IsotropicConstants::MuNu { mu: 1.0, nu: 0.26 }).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for (n, rmax) in [(64usize, 16.0), (128, 32.0)] {
        let grid = Grid::cubic(n).unwrap();
        for (scheme, expected) in [(Scheme::Rotated, 2.0), (Scheme::Tetrahedral, 3.0)] {
            let g = green_real_space(scheme, &lam0, &grid, (2, 4)).unwrap();
            let fit = fit_decay(&grid, &g, (4.0, rmax)).unwrap();
            pass &= (fit.exponent - expected).abs() <= 0.3;
            parts.push(format!("{} {n}^3 window [4, {rmax}]: {:.2}", scheme.name(), fit.exponent));
        }
    }
    Outcome::new(pass, format!("G24 decay exponents: {}", parts.join(", ")))
}

// Criterion 6: dense oracle on random small instances.

/// Random two-phase instance, its reference medium and the loading.
fn random_instance(rng: &mut ChaCha8Rng, contrast: Contrast, stress: bool) -> (MaterialFields, VoigtTensor4, Loading) {
    let dims = [0; 3].map(|_| if rng.random_bool(0.5) { 4 } else { 6 });
    let grid = Grid::new(dims).unwrap();
    let c_m = VoigtTensor4::isotropic_lame(rng.random_range(0.5..2.0), rng.random_range(0.5..1.5));
    let mut m = MaterialFields::homogeneous(&grid, Phase::elastic("matrix", c_m).unwrap());
    let (incl, reference) = match contrast {
        Contrast::Ratio(k) => (Phase::elastic("inclusion", c_m * k).unwrap(), c_m * (0.5 * (1.0 + k))),
        // Half the matrix stiffness leaves the mean-strain update marginally stable.
        Contrast::Void => (Phase::void("pore"), c_m * 0.55),
    };
    let id = m.add_phase(incl).unwrap();
    let mut mask = vec![false; grid.len()];
    if contrast == Contrast::Void {
        for _ in 0..rng.random_range(1..=3) {
            mask[rng.random_range(0..grid.len())] = true;
        }
    } else {
        for v in mask.iter_mut() {
            *v = rng.random_bool(0.3);
        }
        mask[0] = true;
    }
    let mut m = m.paint(&mask, id).unwrap();
    if contrast != Contrast::Void {
        let e0 = VoigtTensor2::new([0; 6].map(|_| rng.random_range(-1e-3..1e-3)));
        m = assign_eigenstrain(m, id, e0).unwrap();
    }
    let target = VoigtTensor2::new([0; 6].map(|_| rng.random_range(-1.0..1.0)));
    let loading = if stress { Loading::Stress(target) } else { Loading::Strain(target * 0.01) };
    (m, reference, loading)
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6c0ffee);
    let contrasts = [Contrast::Ratio(0.1), Contrast::Ratio(1.0), Contrast::Ratio(10.0), Contrast::Void];
    let mut worst_u = 0.0f64;
    let mut worst_s = 0.0f64;
    let mut failures = Vec::new();
    for i in 0..20 {
        let contrast = contrasts[i % 4];
        let stress = (i / 4) % 2 == 1;
        let (m, reference, loading) = random_instance(&mut rng, contrast, stress);
        let oracle = oracle_solve(&m, &loading).expect("oracle");
        let setup = SolverSetup {
            scheme: Scheme::Tetrahedral,
            algorithm: Some(Algorithm::Displacement),
            reference,
            loading,
            options: SolverOptions { tol: 1e-13, max_iter: 50_000, stagnation_window: 2000, ..Default::default() },
        };
        let mut solver = Solver::new(&m, &setup).unwrap();
        let mut state = solver.initial_state();
        let report = solver.run(&mut state, |_, _, _| {}).unwrap();
        if !report.converged() {
            failures.push(format!("instance {i} ({contrast}): {:?} after {} at {:.1e}", report.termination, report.iterations(), report.final_epsilon()));
            continue;
        }
        let u = solver.displacement_field(&state).unwrap();
        let u_scale = oracle.displacement.iter().map(|c| max_abs(c)).fold(0.0f64, f64::max);
        let du = (0..3).map(|k| u[k].iter().zip(&oracle.displacement[k]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)).fold(0.0, f64::max);
        let s_scale = oracle.stress_t1.max_abs().max(oracle.stress_t2.max_abs());
        let ds = solver.stress_fields()[0].max_abs_diff(&oracle.stress_t1).max(solver.stress_fields()[1].max_abs_diff(&oracle.stress_t2));
        let (ru, rs) = (du / u_scale, ds / s_scale);
        worst_u = worst_u.max(ru);
        worst_s = worst_s.max(rs);
        if ru > 1e-8 || rs > 1e-8 {
            failures.push(format!("instance {i} ({contrast}): u {ru:.1e}, stress {rs:.1e}"));
        }
    }
    Outcome::new(
        failures.is_empty(),
        format!(
            "20 instances, worst relative error u {worst_u:.1e}, stress {worst_s:.1e} (limit 1e-8){}",
            if failures.is_empty() { String::new() } else { format!("; {}", failures.join("; ")) }
        ),
    )
}

// Criterion 7: displacement and strain algorithms share iterates.

/// Per-iteration sub-lattice stress and strain fluctuation fields.
fn iterates(m: &MaterialFields, reference: VoigtTensor4, loading: Loading, alg: Algorithm, iters: usize) -> Vec<Vec<TensorField>> {
    let setup = SolverSetup {
        scheme: Scheme::Tetrahedral,
        algorithm: Some(alg),
        reference,
        loading,
        options: SolverOptions { tol: 1e-300, max_iter: iters, stagnation_window: 0, ..Default::default() },
    };
    let mut solver = Solver::new(m, &setup).unwrap();
    let mut state = solver.initial_state();
    let mut out = Vec::new();
    solver
        .run(&mut state, |_, _, s| {
            let mut fields = s.stress_fields().to_vec();
            fields.extend_from_slice(s.strain_fluctuation_fields());
            out.push(fields);
        })
        .unwrap();
    out
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let grid = Grid::cubic(8).unwrap();
    let c_m = VoigtTensor4::isotropic_lame(1.2, 0.8);
    let mut m = MaterialFields::homogeneous(&grid, Phase::elastic("matrix", c_m).unwrap());
    let stiff = m.add_phase(Phase::elastic("stiff", VoigtTensor4::cubic(9.0, 3.0, 4.0)).unwrap()).unwrap();
    let soft = m.add_phase(Phase::elastic("soft", c_m * 0.2).unwrap()).unwrap();
    let draw: Vec<f64> = (0..grid.len()).map(|_| rng.random()).collect();
    let m = m.paint(&draw.iter().map(|&x| x < 0.3).collect::<Vec<_>>(), stiff).unwrap();
    let m = m.paint(&draw.iter().map(|&x| x > 0.8).collect::<Vec<_>>(), soft).unwrap();
    let m = assign_eigenstrain(m, stiff, VoigtTensor2::new([0; 6].map(|_| rng.random_range(-1e-3..1e-3)))).unwrap();
    let reference = VoigtTensor4::cubic(9.0, 3.0, 4.0) * 0.6;
    let target = VoigtTensor2::new([0; 6].map(|_| rng.random_range(-1.0..1.0)));

    let mut worst = 0.0f64;
    let mut count = 0;
    for loading in [Loading::Stress(target), Loading::Strain(target * 0.01)] {
        let a = iterates(&m, reference, loading, Algorithm::Displacement, 50);
        for alg in [Algorithm::Strain, Algorithm::StrainFull] {
            let b = iterates(&m, reference, loading, alg, 50);
            count = count.max(a.len().min(b.len()));
            if a.len() != 50 || b.len() != 50 {
                return Outcome::new(false, format!("{alg:?}: {} vs {} iterations", a.len(), b.len()));
            }
            for (fa, fb) in a.iter().zip(&b) {
                for (x, y) in fa.iter().zip(fb) {
                    worst = worst.max(x.max_abs_diff(y) / x.max_abs().max(f64::MIN_POSITIVE));
                }
            }
        }
    }
    Outcome::new(
        worst <= 1e-12,
        format!("{count} iterations on 8^3, worst relative deviation of stress and strain iterates {worst:.1e} (limit 1e-12)"),
    )
}

// Criterion 8: eigenstrained cube under zero applied stress.

fn eigen_cube_config(n: usize, edge: usize) -> RunConfig {
    RunConfig::from_json(&format!(
        r#"{{
        "grid": {{ "dims": [{n}, {n}, {n}] }},
        "scheme": "tetrahedral",
        "phases": [
            {{ "name": "matrix", "elastic": {{ "isotropic": {{ "mu_nu": {{ "mu": {MU_STEEL}, "nu": 0.26 }} }} }} }},
            {{ "name": "cube", "elastic": {{ "isotropic": {{ "mu_nu": {{ "mu": {MU_STEEL}, "nu": 0.26 }} }} }},
               "eigenstrain": [0.0, 0.0, 1.0, 0.0, 0.0, 0.0] }}
        ],
        "geometry": {{ "cube": {{ "edge": {edge}, "phase": "cube" }} }},
        "reference": {{ "scale_matrix": 0.8 }},
        "loading": {{ "stress": [0.0, 0.0, 0.0, 0.0, 0.0, 0.0] }},
        "residual_norm": "rms_stress",
        "tol": 1e-10,
        "max_iter": 1000
    }}"#
    ))
    .expect("eigenstrain config")
}

fn criterion_8() -> Outcome {
    let cfg = eigen_cube_config(64, 15);
    let m = build(&cfg);
    let out = solver::solve(&m, &cfg.solver_setup().unwrap()).unwrap();
    let mean = out.mean_stress.frobenius_norm() / MU_STEEL;
    let grid = *m.grid();
    let p = extract_profile(&grid, &out.stress, 0, [31, 31], &[ProfileComponent::Voigt(2)]).unwrap();
    let v = &p.values[0];
    let asym = (1..32).map(|k| (v[31 + k] - v[(31 + 64 - k) % 64]).abs()).fold(0.0f64, f64::max) / MU_STEEL;

    // Self-convergence: coarse line against the 2x2x2 block average of the
    // next finer run, cube edge n/4.
    let fields: Vec<(usize, Vec<f64>)> = [16usize, 32, 64]
        .iter()
        .map(|&n| {
            let c = eigen_cube_config(n, n / 4);
            let out = solver::solve(&build(&c), &c.solver_setup().unwrap()).unwrap();
            (n, out.stress.comps[2].clone())
        })
        .collect();
    let diffs: Vec<f64> = fields
        .windows(2)
        .map(|w| {
            let (nc, sc) = (&w[0].0, &w[0].1);
            let sf = &w[1].1;
            let (gc, gf) = (Grid::cubic(*nc).unwrap(), Grid::cubic(2 * nc).unwrap());
            let j = nc / 2 - 1;
            (0..*nc)
                .map(|i| {
                    let mut avg = 0.0;
                    for a in 0..2 {
                        for b in 0..2 {
                            for c in 0..2 {
                                avg += sf[gf.index([2 * i + a, 2 * j + b, 2 * j + c])];
                            }
                        }
                    }
                    (sc[gc.index([i, j, j])] - avg / 8.0).abs()
                })
                .fold(0.0f64, f64::max)
                / MU_STEEL
        })
        .collect();
    Outcome::new(
        out.report.converged() && mean <= 1e-6 && asym <= 1e-8 && diffs[1] < diffs[0],
        format!(
            "{:?} after {} iterations, |<s>|/mu = {mean:.1e}, s33 profile asymmetry/mu = {asym:.1e}, \
             refinement differences/mu 16-32 {:.4}, 32-64 {:.4}",
            out.report.termination,
            out.report.iterations(),
            diffs[0],
            diffs[1]
        ),
    )
}

// Criterion 9: operator and Green invariants, exhaustive on 8^3.

fn sym_outer(a: &[C; 3], b: &[C; 3]) -> [C; 6] {
    const PAIRS: [(usize, usize); 6] = [(0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1)];
    PAIRS.map(|(i, j)| 0.5 * (a[i] * b[j] + a[j] * b[i]))
}

fn sym_dot(s: &[C; 6], v: &[C; 3]) -> [C; 3] {
    let m = [[s[0], s[5], s[4]], [s[5], s[1], s[3]], [s[4], s[3], s[2]]];
    std::array::from_fn(|i| m[i][0] * v[0] + m[i][1] * v[1] + m[i][2] * v[2])
}

fn sym3_apply(o: &[f64; 6], v: &[C; 3]) -> [C; 3] {
    let m = [[o[0], o[5], o[4]], [o[5], o[1], o[3]], [o[4], o[3], o[2]]];
    std::array::from_fn(|i| v[0] * m[i][0] + v[1] * m[i][1] + v[2] * m[i][2])
}

fn random_c3(rng: &mut ChaCha8Rng) -> [C; 3] {
    std::array::from_fn(|_| C::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

fn criterion_9() -> Outcome {
    let grid = Grid::cubic(8).unwrap();
    let st = StencilTable::tetrahedral(&grid).unwrap();
    let lam0 = VoigtTensor4::cubic(3.0, 1.2, 0.8);
    let table = assemble_strain_green(assemble_omega(&st, &lam0).unwrap(), &st);
    let sg = table.strain_green().unwrap();
    let gnd_all = sg.gnd.as_ref().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);

    let (mut shift, mut real, mut period, mut inverse, mut sym, mut ident, mut recover) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for i in 0..grid.len() {
        let q = grid.frequency(i);
        let (j, s) = shift_partner(&grid, i);
        let phase = OmegaSet::phase(&s).conj();
        let d = tetrahedral_d(&q);
        let d2 = tetrahedral_d(&grid.frequency(j));
        shift = shift.max((0..3).map(|a| (d2[a] - phase * d[a]).norm()).fold(0.0, f64::max));

        let m = omega_inverse(Scheme::Tetrahedral, &lam0, &d);
        let scale = m.iter().flatten().fold(0.0f64, |a, v| a.max(v.norm())).max(f64::MIN_POSITIVE);
        for a in 0..3 {
            for b in 0..3 {
                real = real.max(m[a][b].im.abs() / scale).max((m[a][b] - m[b][a]).norm() / scale);
            }
        }

        let o = table.omega(i);
        let o2 = table.omega(j);
        let oscale = max_abs(o).max(f64::MIN_POSITIVE);
        period = period.max((0..6).map(|k| (o[k] - o2[k]).abs()).fold(0.0, f64::max) / oscale);
        if o.iter().all(|&v| v == 0.0) {
            continue;
        }
        for a in 0..3 {
            let e: [C; 3] = std::array::from_fn(|b| C::new(if a == b { 1.0 } else { 0.0 }, 0.0));
            let col = sym3_apply(o, &e);
            let back: [C; 3] = std::array::from_fn(|r| (0..3).map(|k| m[r][k] * col[k]).sum());
            inverse = inverse.max((0..3).map(|r| (back[r] - e[r]).norm()).fold(0.0, f64::max));
        }

        let gd = &sg.gd[i];
        let gnd = &gnd_all[i];
        let gscale = gd.iter().chain(gnd.iter()).flatten().fold(0.0f64, |a, v| a.max(v.norm()));
        for a in 0..6 {
            for b in 0..6 {
                sym = sym.max((gd[a][b] - gd[b][a].conj()).norm() / gscale).max((gnd[a][b] - gnd[b][a]).norm() / gscale);
            }
        }

        let dc = d.map(|v| v.conj());
        let u = random_c3(&mut rng);
        let e1 = sym_outer(&d, &u);
        let e2 = sym_outer(&dc, &u).map(|v| -v);
        let g1 = apply_voigt4(gd, &lam0.contract_complex(&e1));
        let g2 = apply_voigt4(gnd, &lam0.contract_complex(&e2));
        let escale = e1.iter().fold(0.0f64, |a, v| a.max(v.norm()));
        ident = ident.max((0..6).map(|k| (g1[k] + g2[k] - e1[k]).norm()).fold(0.0, f64::max) / escale);

        let f1 = sym_dot(&lam0.contract_complex(&e1), &dc);
        let f2 = sym_dot(&lam0.contract_complex(&sym_outer(&dc, &u)), &d);
        let back = sym3_apply(o, &[f1[0] + f2[0], f1[1] + f2[1], f1[2] + f2[2]]);
        let uscale = u.iter().fold(0.0f64, |a, v| a.max(v.norm()));
        recover = recover.max((0..3).map(|k| (back[k] - u[k]).norm()).fold(0.0, f64::max) / uscale);
    }

    // Residual in frequency space against the real-space force density.
    let mut m = MaterialFields::homogeneous(&grid, Phase::elastic("matrix", VoigtTensor4::isotropic_lame(1.0, 1.0)).unwrap());
    let p = m.add_phase(Phase::elastic("cube", VoigtTensor4::cubic(6.0, 2.0, 3.0)).unwrap()).unwrap();
    let m = gen_centered_cube(m, 4, p).unwrap();
    let setup = SolverSetup {
        scheme: Scheme::Tetrahedral,
        algorithm: Some(Algorithm::Displacement),
        reference: m.mean_stiffness(),
        loading: Loading::Strain(VoigtTensor2::new([0.01, 0.0, -0.004, 0.0, 0.003, 0.002])),
        options: SolverOptions { tol: 1e-300, max_iter: 5, ..Default::default() },
    };
    let mut solver = Solver::new(&m, &setup).unwrap();
    let mut state = solver.initial_state();
    let mut parseval = 0.0f64;
    solver
        .run(&mut state, |_, r, s| {
            let f = s.stress_fields();
            let direct = force_density_norm(s.grid(), &f[0], &f[1]);
            parseval = parseval.max((direct - r.l2).abs() / r.l2);
        })
        .unwrap();

    let checks = [
        ("shift identity", shift, 1e-13),
        ("Omega^-1 real symmetric", real, 1e-12),
        ("Omega shift periodicity", period, 1e-12),
        ("Omega Omega^-1 = I", inverse, 1e-13),
        ("Gd/Gnd symmetries", sym, 1e-14),
        ("Gd/Gnd identity", ident, 1e-12),
        ("displacement recovery", recover, 1e-12),
        ("Parseval residual", parseval, 1e-12),
    ];
    let pass = checks.iter().all(|(_, v, tol)| v <= tol);
    let detail = checks.iter().map(|(name, v, tol)| format!("{name} {v:.1e} (<= {tol:.0e})")).collect::<Vec<_>>().join(", ");
    Outcome::new(pass, detail)
}
