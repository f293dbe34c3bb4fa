use std::path::{Path, PathBuf};

use serde::Serialize;
use tetrafft_core::analysis::green_field::{classify_voigt_pair, fit_decay, green_component, green_real_space, parse_pair, shell_maxima};
use tetrafft_core::analysis::oracle::{oracle_solve, ORACLE_MAX_VOXELS};
use tetrafft_core::analysis::profile::{extract_profile, oscillation_of, ProfileComponent};
use tetrafft_core::config::{Contrast, RunConfig};
use tetrafft_core::io::{self, FieldSet, RunSummary};
use tetrafft_core::{Algorithm, Error, Grid, MaterialFields, Result, Scheme, SolveOutput, Solver, TensorField};

use crate::GlobalOpts;

pub const EXIT_OK: u8 = 0;
pub const EXIT_OTHER: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_DIVERGED: u8 = 3;
pub const EXIT_NOT_CONVERGED: u8 = 4;

pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_)
        | Error::OddDimension { .. }
        | Error::InvalidArgument(_)
        | Error::Material(_)
        | Error::OracleTooLarge { .. }
        | Error::Json(_) => EXIT_CONFIG,
        Error::Divergence { .. } => EXIT_DIVERGED,
        _ => EXIT_OTHER,
    }
}

fn load_config(g: &GlobalOpts, path: &Path) -> Result<RunConfig> {
    let mut cfg = RunConfig::from_path(path)?;
    if let Some(tol) = g.tol {
        cfg.tol = tol;
    }
    if let Some(n) = g.max_iter {
        cfg.max_iter = n;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn config_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn algorithm_name(cfg: &RunConfig) -> &'static str {
    let alg = cfg.algorithm.unwrap_or(if cfg.scheme == Scheme::MoulinecSuquet { Algorithm::Strain } else { Algorithm::Displacement });
    match alg {
        Algorithm::Displacement => "displacement",
        Algorithm::Strain => "strain",
        Algorithm::StrainFull => "strain_full",
    }
}

fn von_mises(t: &TensorField) -> Vec<f64> {
    (0..t.len()).map(|i| t.at(i).von_mises()).collect()
}

fn write_set(dir: &Path, stem: &str, set: &FieldSet, cfg: &RunConfig) -> Result<()> {
    if cfg.output.vtk {
        io::write_vtk(&dir.join(format!("{stem}.vtk")), set, &format!("tetrafft {stem}"))?;
    }
    if cfg.output.raw {
        io::write_raw(&dir.join(format!("{stem}.raw")), set)?;
    }
    Ok(())
}

fn write_fields(dir: &Path, cfg: &RunConfig, m: &MaterialFields, out: &SolveOutput, u: Option<[Vec<f64>; 3]>) -> Result<()> {
    let grid = *m.grid();
    let mut stress = FieldSet::new(grid);
    stress.push_tensor("s", &out.stress)?;
    stress.push("von_mises", von_mises(&out.stress))?;
    write_set(dir, "stress", &stress, cfg)?;

    let mut strain = FieldSet::new(grid);
    strain.push_tensor("e", &out.strain)?;
    write_set(dir, "strain", &strain, cfg)?;

    let mut phase = FieldSet::new(grid);
    phase.push("phase", m.phase_map())?;
    write_set(dir, "phase", &phase, cfg)?;

    if let Some(u) = u {
        let mut disp = FieldSet::new(grid);
        for (k, c) in u.into_iter().enumerate() {
            disp.push(format!("u{}", k + 1), c)?;
        }
        write_set(dir, "displacement", &disp, cfg)?;
    }
    Ok(())
}

pub fn solve(g: &GlobalOpts, config: &Path) -> Result<u8> {
    let cfg = load_config(g, config)?;
    let m = cfg.build_materials(&config_dir(config))?;
    let mut solver = Solver::new(&m, &cfg.solver_setup()?)?;
    let mut state = solver.initial_state();
    let report = solver.run(&mut state, |rec, _, _| log::info!("iter {}: epsilon = {:e}", rec.iter, rec.epsilon))?;
    let u = if cfg.output.displacement { solver.displacement_field(&state) } else { None };
    if cfg.output.displacement && u.is_none() {
        log::warn!("displacement output needs the displacement algorithm; skipped");
    }
    let out = solver.output(state, report);

    let dir = &g.output_dir;
    io::write_convergence_csv(&dir.join("convergence.csv"), &out.report)?;
    let summary = RunSummary::new(cfg.scheme.name(), algorithm_name(&cfg), m.grid(), &out);
    io::write_json(&dir.join("summary.json"), &summary)?;
    write_fields(dir, &cfg, &m, &out, u)?;

    println!(
        "{} after {} iterations, epsilon = {:e}",
        if out.report.converged() { "converged" } else { "not converged" },
        out.report.iterations(),
        out.report.final_epsilon()
    );
    Ok(if out.report.converged() { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

#[derive(Serialize)]
struct SweepRow {
    contrast: String,
    iterations: Option<usize>,
    converged: bool,
    termination: String,
    final_epsilon: Option<f64>,
    error: String,
}

pub fn sweep_contrast(g: &GlobalOpts, config: &Path, contrasts: &[String]) -> Result<u8> {
    let base = load_config(g, config)?;
    let parsed = contrasts.iter().map(|s| s.parse::<Contrast>()).collect::<Result<Vec<_>>>()?;
    let dir = config_dir(config);
    let mut rows = Vec::new();
    for c in parsed {
        let run = || -> Result<SolveOutput> {
            let cfg = base.with_contrast(c)?;
            let m = cfg.build_materials(&dir)?;
            Solver::new(&m, &cfg.solver_setup()?)?.solve()
        };
        let row = match run() {
            Ok(out) => SweepRow {
                contrast: c.to_string(),
                iterations: Some(out.report.iterations()),
                converged: out.report.converged(),
                termination: format!("{:?}", out.report.termination).to_lowercase(),
                final_epsilon: Some(out.report.final_epsilon()),
                error: String::new(),
            },
            Err(e) => SweepRow {
                contrast: c.to_string(),
                iterations: None,
                converged: false,
                termination: "error".into(),
                final_epsilon: None,
                error: e.to_string(),
            },
        };
        println!("C = {}: {}", row.contrast, row.iterations.map_or_else(|| format!("error: {}", row.error), |n| format!("{n} iterations ({})", row.termination)));
        rows.push(row);
    }
    io::write_csv(&g.output_dir.join("sweep.csv"), &rows)?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct SliceRow {
    h2: usize,
    h3: usize,
    q2: f64,
    q3: f64,
    re: f64,
    im: f64,
    abs: f64,
}

#[derive(Serialize)]
struct PlaneRow {
    y: i64,
    z: i64,
    value: f64,
}

#[derive(Serialize)]
struct ShellRow {
    r: f64,
    max_abs: f64,
}

#[derive(Serialize)]
struct FitRecord {
    scheme: String,
    pair: String,
    /// Space-separated, empty when the pair is in no set.
    index_sets: String,
    dims: String,
    exponent: f64,
    prefactor: f64,
    residual: f64,
    r_min: f64,
    r_max: f64,
}

fn minimum_image(l: usize, n: usize) -> i64 {
    if 2 * l >= n {
        l as i64 - n as i64
    } else {
        l as i64
    }
}

pub fn green_analyze(g: &GlobalOpts, config: &Path, pair: &str, window: Option<(f64, f64)>) -> Result<u8> {
    let cfg = load_config(g, config)?;
    let pair = parse_pair(pair)?;
    let lam0 = cfg.reference_stiffness()?;
    if lam0.isotropic_moduli().is_none() {
        return Err(Error::Config("green-analyze needs an isotropic reference medium".into()));
    }
    if cfg.scheme == Scheme::MoulinecSuquet {
        return Err(Error::Config("green-analyze needs a finite-difference scheme".into()));
    }
    let grid = cfg.grid()?;
    let [n1, n2, n3] = grid.dims();
    let tag = format!("G{}{}", pair.0, pair.1);
    let sets = classify_voigt_pair(pair.0, pair.1)?;

    // Frequency slices through q1 = 0 and q1 = pi.
    for (h1, name) in [(0, "q1_0"), (n1 / 2, "q1_pi")] {
        let mut rows = Vec::with_capacity(n2 * n3);
        for h2 in 0..n2 {
            for h3 in 0..n3 {
                let q = grid.frequency(grid.index([h1, h2, h3]));
                let v = green_component(cfg.scheme, &lam0, &q, pair)?;
                rows.push(SliceRow { h2, h3, q2: q.q[1], q3: q.q[2], re: v.re, im: v.im, abs: v.norm() });
            }
        }
        io::write_csv(&g.output_dir.join(format!("{tag}_{name}.csv")), &rows)?;
    }

    let field = green_real_space(cfg.scheme, &lam0, &grid, pair)?;
    let plane: Vec<PlaneRow> = (0..n2)
        .flat_map(|l2| (0..n3).map(move |l3| (l2, l3)))
        .map(|(l2, l3)| PlaneRow { y: minimum_image(l2, n2), z: minimum_image(l3, n3), value: field[grid.index([0, l2, l3])] })
        .collect();
    io::write_csv(&g.output_dir.join(format!("{tag}_r_plane.csv")), &plane)?;

    let shells: Vec<ShellRow> = shell_maxima(&grid, &field)?.into_iter().map(|(r, max_abs)| ShellRow { r, max_abs }).collect();
    io::write_csv(&g.output_dir.join(format!("{tag}_shells.csv")), &shells)?;

    let window = window.unwrap_or((4.0, (n2.min(n3) / 4) as f64));
    let fit = fit_decay(&grid, &field, window)?;
    let record = FitRecord {
        scheme: cfg.scheme.name().into(),
        pair: format!("{}{}", pair.0, pair.1),
        index_sets: sets.iter().map(|s| format!("{s:?}")).collect::<Vec<_>>().join(" "),
        dims: format!("{n1}x{n2}x{n3}"),
        exponent: fit.exponent,
        prefactor: fit.prefactor,
        residual: fit.residual,
        r_min: fit.r_min,
        r_max: fit.r_max,
    };
    io::write_csv(&g.output_dir.join(format!("{tag}_fit.csv")), std::slice::from_ref(&record))?;
    println!(
        "{tag} ({}): index sets [{}], decay exponent {:.3} over r in [{}, {}]",
        record.scheme,
        record.index_sets,
        fit.exponent,
        fit.r_min,
        fit.r_max
    );
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct OracleReport {
    voxels: usize,
    iterations: usize,
    converged: bool,
    max_rel_displacement: f64,
    max_rel_stress: f64,
    threshold: f64,
    pass: bool,
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn relative(diff: f64, scale: f64) -> f64 {
    if diff == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

pub fn oracle_check(g: &GlobalOpts, config: &Path, threshold: f64) -> Result<u8> {
    let mut cfg = load_config(g, config)?;
    if cfg.scheme != Scheme::Tetrahedral {
        return Err(Error::Config("oracle-check needs the tetrahedral scheme".into()));
    }
    let grid: Grid = cfg.grid()?;
    if grid.len() > ORACLE_MAX_VOXELS {
        return Err(Error::OracleTooLarge { voxels: grid.len(), limit: ORACLE_MAX_VOXELS });
    }
    cfg.algorithm = Some(Algorithm::Displacement);
    let m = cfg.build_materials(&config_dir(config))?;
    let oracle = oracle_solve(&m, &cfg.loading)?;
    let mut solver = Solver::new(&m, &cfg.solver_setup()?)?;
    let mut state = solver.initial_state();
    let report = solver.run(&mut state, |_, _, _| {})?;
    let u = solver.displacement_field(&state).expect("displacement algorithm");

    // Floor the displacement scale by what the strain scale gives over the
    // cell, so noise-level fields of a homogeneous cell are not amplified.
    let cell = grid.dims().into_iter().max().unwrap_or(1) as f64 * grid.spacing();
    let strain_scale = solver.averaged_strain(&state.mean_strain).max_abs();
    let u_scale = oracle.displacement.iter().map(|c| max_abs(c)).fold(strain_scale * cell, f64::max);
    let du = (0..3)
        .flat_map(|k| u[k].iter().zip(&oracle.displacement[k]).map(|(a, b)| (a - b).abs()))
        .fold(0.0f64, f64::max);
    let s = solver.stress_fields();
    let s_scale = oracle.stress_t1.max_abs().max(oracle.stress_t2.max_abs());
    let ds = s[0].max_abs_diff(&oracle.stress_t1).max(s[1].max_abs_diff(&oracle.stress_t2));
    let (ru, rs) = (relative(du, u_scale), relative(ds, s_scale));
    let pass = report.converged() && ru <= threshold && rs <= threshold;
    let rec = OracleReport {
        voxels: grid.len(),
        iterations: report.iterations(),
        converged: report.converged(),
        max_rel_displacement: ru,
        max_rel_stress: rs,
        threshold,
        pass,
    };
    io::write_json(&g.output_dir.join("oracle_check.json"), &rec)?;
    println!(
        "{}: max relative discrepancy u {ru:.3e}, stress {rs:.3e} (threshold {threshold:e}, {} iterations)",
        if pass { "PASS" } else { "FAIL" },
        report.iterations()
    );
    Ok(if pass { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

pub fn profile(
    g: &GlobalOpts,
    field: &Path,
    prefix: &str,
    axis: usize,
    at: [usize; 2],
    components: &[String],
    range: Option<(usize, usize)>,
) -> Result<u8> {
    let set = io::read_raw(field)?;
    let tensor = set
        .tensor(prefix)
        .ok_or_else(|| Error::InvalidArgument(format!("{} has no components {prefix}11 .. {prefix}12", field.display())))?;
    let comps = components
        .iter()
        .map(|c| ProfileComponent::parse(c).ok_or_else(|| Error::InvalidArgument(format!("unknown component `{c}`"))))
        .collect::<Result<Vec<_>>>()?;
    let p = extract_profile(&set.grid, &tensor, axis, at, &comps)?;
    let stem = field.file_stem().and_then(|s| s.to_str()).unwrap_or("field");
    let path = g.output_dir.join(format!("{stem}_profile_axis{axis}_{}_{}.csv", at[0], at[1]));
    io::write_profile_csv(&path, &p, prefix)?;
    println!("wrote {}", path.display());
    if let Some((a, b)) = range {
        if a > b || b >= p.positions.len() {
            return Err(Error::InvalidArgument(format!("range {a},{b} outside 0..{}", p.positions.len())));
        }
        for (c, v) in comps.iter().zip(&p.values) {
            println!("oscillation index of {} on {a}..={b}: {:.6}", c.name(prefix), oscillation_of(&v[a..=b]));
        }
    }
    Ok(EXIT_OK)
}
