//! Field and report files.
//!
//! * VTK legacy ASCII `STRUCTURED_POINTS` with one `CELL_DATA` scalar per
//!   component. Values are written in shortest round-trip exponent form, so
//!   reading a file back gives the exact doubles.
//! * Raw dumps: little-endian `f64`, one full grid per component in the
//!   order listed by a JSON sidecar next to the data file (`x.raw` and
//!   `x.json`). Within a component the last grid axis runs fastest.
//! * CSV tables written through serde, e.g. the convergence history with
//!   columns `iter,L2,epsilon,seconds`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::profile::LineProfile;
use crate::error::{Error, Result};
use crate::grid::{Grid, TensorField};
use crate::solver::{ConvergenceReport, SolveOutput, Termination};
use crate::tensor::VoigtTensor2;

/// Named scalar fields over one grid.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldSet {
    pub grid: Grid,
    pub fields: Vec<(String, Vec<f64>)>,
}

impl FieldSet {
    pub fn new(grid: Grid) -> Self {
        Self { grid, fields: Vec::new() }
    }

    pub fn push(&mut self, name: impl Into<String>, values: Vec<f64>) -> Result<()> {
        crate::grid::check_len(&self.grid, values.len())?;
        let name = name.into();
        if name.is_empty() || name.contains(char::is_whitespace) {
            return Err(Error::InvalidArgument(format!("field name `{name}` must be non-empty without whitespace")));
        }
        self.fields.push((name, values));
        Ok(())
    }

    /// Six components named `{prefix}11` .. `{prefix}12`.
    pub fn push_tensor(&mut self, prefix: &str, t: &TensorField) -> Result<()> {
        const NAMES: [&str; 6] = ["11", "22", "33", "23", "13", "12"];
        for (k, name) in NAMES.iter().enumerate() {
            self.push(format!("{prefix}{name}"), t.comps[k].clone())?;
        }
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&[f64]> {
        self.fields.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }

    /// Reassembles a tensor from `{prefix}11` .. `{prefix}12`.
    pub fn tensor(&self, prefix: &str) -> Option<TensorField> {
        const NAMES: [&str; 6] = ["11", "22", "33", "23", "13", "12"];
        let mut t = TensorField::zeros(self.grid.len());
        for (k, name) in NAMES.iter().enumerate() {
            t.comps[k] = self.get(&format!("{prefix}{name}"))?.to_vec();
        }
        Some(t)
    }
}

fn format_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Format { path: path.display().to_string(), reason: reason.into() }
}

/// Writes a VTK legacy ASCII file. Voxel `(l1, l2, l3)` maps to VTK cell
/// `(x, y, z)`; VTK orders cells with `x` fastest.
pub fn write_vtk(path: &Path, set: &FieldSet, title: &str) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let [n1, n2, n3] = set.grid.dims();
    let h = set.grid.spacing();
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "{}", title.lines().next().unwrap_or(""))?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET STRUCTURED_POINTS")?;
    writeln!(w, "DIMENSIONS {} {} {}", n1 + 1, n2 + 1, n3 + 1)?;
    writeln!(w, "ORIGIN 0 0 0")?;
    writeln!(w, "SPACING {h:e} {h:e} {h:e}")?;
    writeln!(w, "CELL_DATA {}", set.grid.len())?;
    for (name, values) in &set.fields {
        writeln!(w, "SCALARS {name} double 1")?;
        writeln!(w, "LOOKUP_TABLE default")?;
        for l3 in 0..n3 {
            for l2 in 0..n2 {
                for l1 in 0..n1 {
                    writeln!(w, "{:e}", values[set.grid.index([l1, l2, l3])])?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads files written by [`write_vtk`].
pub fn read_vtk(path: &Path) -> Result<FieldSet> {
    let reader = BufReader::new(File::open(path)?);
    let mut tokens = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        // header line 0 and title line 1 are free text
        if i >= 2 {
            tokens.extend(line.split_whitespace().map(str::to_owned));
        }
    }
    let mut it = tokens.into_iter();
    let mut next = |what: &str| it.next().ok_or_else(|| format_err(path, format!("unexpected end of file, wanted {what}")));
    let expect = |tok: String, want: &str| if tok.eq_ignore_ascii_case(want) { Ok(()) } else { Err(format_err(path, format!("expected `{want}`, found `{tok}`"))) };
    expect(next("ASCII")?, "ASCII")?;
    expect(next("DATASET")?, "DATASET")?;
    expect(next("STRUCTURED_POINTS")?, "STRUCTURED_POINTS")?;
    let mut dims = None;
    let mut spacing = 1.0;
    let parse_usize = |t: String| t.parse::<usize>().map_err(|_| format_err(path, format!("bad integer `{t}`")));
    let parse_f64 = |t: String| t.parse::<f64>().map_err(|_| format_err(path, format!("bad number `{t}`")));
    let cells = loop {
        let key = next("a keyword")?;
        match key.to_ascii_uppercase().as_str() {
            "DIMENSIONS" => {
                let d = [parse_usize(next("nx")?)?, parse_usize(next("ny")?)?, parse_usize(next("nz")?)?];
                if d.contains(&0) || d.contains(&1) {
                    return Err(format_err(path, "cell data needs at least 2 points per axis"));
                }
                dims = Some([d[0] - 1, d[1] - 1, d[2] - 1]);
            }
            "ORIGIN" => {
                for _ in 0..3 {
                    parse_f64(next("origin")?)?;
                }
            }
            "SPACING" => {
                let s = [parse_f64(next("sx")?)?, parse_f64(next("sy")?)?, parse_f64(next("sz")?)?];
                if s[0] != s[1] || s[1] != s[2] {
                    return Err(format_err(path, "only isotropic spacing is supported"));
                }
                spacing = s[0];
            }
            "CELL_DATA" => break parse_usize(next("cell count")?)?,
            other => return Err(format_err(path, format!("unsupported keyword `{other}`"))),
        }
    };
    let dims = dims.ok_or_else(|| format_err(path, "missing DIMENSIONS"))?;
    let grid = Grid::with_spacing(dims, spacing)?;
    if cells != grid.len() {
        return Err(format_err(path, format!("CELL_DATA {cells} does not match {} cells", grid.len())));
    }
    let mut set = FieldSet::new(grid);
    while let Some(tok) = it.next() {
        expect(tok, "SCALARS")?;
        let name = it.next().ok_or_else(|| format_err(path, "missing scalar name"))?;
        let _dtype = it.next().ok_or_else(|| format_err(path, "missing scalar type"))?;
        let mut tok = it.next().ok_or_else(|| format_err(path, "missing LOOKUP_TABLE"))?;
        if tok.parse::<usize>().is_ok() {
            tok = it.next().ok_or_else(|| format_err(path, "missing LOOKUP_TABLE"))?;
        }
        expect(tok, "LOOKUP_TABLE")?;
        it.next().ok_or_else(|| format_err(path, "missing table name"))?;
        let [n1, n2, n3] = dims;
        let mut values = vec![0.0; grid.len()];
        for l3 in 0..n3 {
            for l2 in 0..n2 {
                for l1 in 0..n1 {
                    let t = it.next().ok_or_else(|| format_err(path, format!("field `{name}` is truncated")))?;
                    values[grid.index([l1, l2, l3])] = t.parse().map_err(|_| format_err(path, format!("bad number `{t}`")))?;
                }
            }
        }
        set.push(name, values)?;
    }
    Ok(set)
}

/// JSON header describing a raw dump.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawHeader {
    pub dims: [usize; 3],
    pub spacing: f64,
    pub dtype: String,
    pub endianness: String,
    /// Component names in file order.
    pub components: Vec<String>,
}

/// Sidecar path for a raw data file.
pub fn sidecar_path(data: &Path) -> PathBuf {
    data.with_extension("json")
}

/// Writes `data` and its sidecar.
pub fn write_raw(data: &Path, set: &FieldSet) -> Result<()> {
    let header = RawHeader {
        dims: set.grid.dims(),
        spacing: set.grid.spacing(),
        dtype: "float64".into(),
        endianness: "little".into(),
        components: set.fields.iter().map(|(n, _)| n.clone()).collect(),
    };
    let mut w = BufWriter::new(File::create(data)?);
    for (_, values) in &set.fields {
        for v in values {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    let mut side = serde_json::to_string_pretty(&header)?;
    side.push('\n');
    std::fs::write(sidecar_path(data), side)?;
    Ok(())
}

/// Reads a raw dump through its sidecar.
pub fn read_raw(data: &Path) -> Result<FieldSet> {
    let side = sidecar_path(data);
    let header: RawHeader = serde_json::from_str(&std::fs::read_to_string(&side)?)
        .map_err(|e| format_err(&side, e.to_string()))?;
    if header.dtype != "float64" || header.endianness != "little" {
        return Err(format_err(&side, format!("unsupported layout {} / {}", header.dtype, header.endianness)));
    }
    let grid = Grid::with_spacing(header.dims, header.spacing)?;
    let mut bytes = Vec::new();
    File::open(data)?.read_to_end(&mut bytes)?;
    let expected = 8 * grid.len() * header.components.len();
    if bytes.len() != expected {
        return Err(format_err(data, format!("{} bytes, sidecar implies {expected}", bytes.len())));
    }
    let mut set = FieldSet::new(grid);
    for (c, name) in header.components.iter().enumerate() {
        let chunk = &bytes[8 * grid.len() * c..8 * grid.len() * (c + 1)];
        let values = chunk.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes"))).collect();
        set.push(name.clone(), values)?;
    }
    Ok(set)
}

/// Phase ids from a raw dump with a single component (or one named `phase`).
pub fn read_phase_ids(data: &Path, grid: &Grid) -> Result<Vec<u16>> {
    let set = read_raw(data)?;
    if set.grid.dims() != grid.dims() {
        return Err(format_err(data, format!("grid {:?} does not match the configured {:?}", set.grid.dims(), grid.dims())));
    }
    let values = match (set.get("phase"), set.fields.as_slice()) {
        (Some(v), _) => v,
        (None, [(_, v)]) => v.as_slice(),
        _ => return Err(format_err(data, "expected one component or one named `phase`")),
    };
    values
        .iter()
        .map(|&v| {
            if v >= 0.0 && v.fract() == 0.0 && v <= u16::MAX as f64 {
                Ok(v as u16)
            } else {
                Err(format_err(data, format!("phase id {v} is not a small non-negative integer")))
            }
        })
        .collect()
}

/// Serializes `rows` as CSV with a header from the field names.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_convergence_csv(path: &Path, report: &ConvergenceReport) -> Result<()> {
    if report.records.is_empty() {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["iter", "L2", "epsilon", "seconds"])?;
        w.flush()?;
        return Ok(());
    }
    write_csv(path, &report.records)
}

pub fn read_convergence_csv(path: &Path) -> Result<Vec<crate::solver::IterationRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<Vec<_>, _>>()?)
}

/// Profile samples as `position,<component>...`.
pub fn write_profile_csv(path: &Path, profile: &LineProfile, prefix: &str) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["position".to_string()];
    header.extend(profile.components.iter().map(|c| c.name(prefix)));
    w.write_record(&header)?;
    for (p, pos) in profile.positions.iter().enumerate() {
        let mut row = vec![pos.to_string()];
        row.extend(profile.values.iter().map(|v| format!("{:e}", v[p])));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Run summary written next to the fields. Excludes wall-clock time so that
/// identical runs give identical files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub scheme: String,
    pub algorithm: String,
    pub dims: [usize; 3],
    pub iterations: usize,
    pub converged: bool,
    pub termination: Termination,
    pub final_epsilon: f64,
    pub final_l2: f64,
    pub mean_stress: VoigtTensor2,
    pub mean_strain: VoigtTensor2,
}

impl RunSummary {
    pub fn new(scheme: &str, algorithm: &str, grid: &Grid, out: &SolveOutput) -> Self {
        let last = out.report.records.last();
        Self {
            scheme: scheme.into(),
            algorithm: algorithm.into(),
            dims: grid.dims(),
            iterations: out.report.iterations(),
            converged: out.report.converged(),
            termination: out.report.termination,
            final_epsilon: last.map_or(f64::NAN, |r| r.epsilon),
            final_l2: last.map_or(f64::NAN, |r| r.l2),
            mean_stress: out.mean_stress,
            mean_strain: out.strain.mean(),
        }
    }
}

/// Pretty JSON with a trailing newline. Non-finite numbers become `null`.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    std::fs::write(path, s)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::IterationRecord;
    use proptest::prelude::*;

    fn sample_set(dims: [usize; 3], seed: u64) -> FieldSet {
        let grid = Grid::with_spacing(dims, 0.5).unwrap();
        let mut set = FieldSet::new(grid);
        let mut x = seed;
        let mut next = || {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            f64::from_bits((x >> 12) | 0x3ff0_0000_0000_0000) - 1.5
        };
        set.push("a", (0..grid.len()).map(|_| next() * 1e-7).collect()).unwrap();
        set.push("b", (0..grid.len()).map(|_| next() * 3e5).collect()).unwrap();
        set
    }

    #[test]
    fn vtk_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.vtk");
        let set = sample_set([3, 4, 2], 7);
        write_vtk(&path, &set, "test").unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("DIMENSIONS 4 5 3"));
        assert!(text.contains("CELL_DATA 24"));
        assert_eq!(read_vtk(&path).unwrap(), set);
    }

    #[test]
    fn vtk_cells_run_x_fastest() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.vtk");
        let grid = Grid::new([2, 1, 3]).unwrap();
        let mut set = FieldSet::new(grid);
        set.push("id", (0..6).map(|i| i as f64).collect()).unwrap();
        write_vtk(&path, &set, "order").unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let vals: Vec<&str> = text.lines().skip_while(|l| !l.starts_with("LOOKUP_TABLE")).skip(1).collect();
        // index = 3*l1 + l3 for dims (2, 1, 3)
        assert_eq!(vals, ["0e0", "3e0", "1e0", "4e0", "2e0", "5e0"]);
    }

    #[test]
    fn raw_round_trip_and_phase_ids() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.raw");
        let set = sample_set([2, 3, 4], 11);
        write_raw(&path, &set).unwrap();
        assert_eq!(std::fs::metadata(&path).unwrap().len(), 2 * 24 * 8);
        assert_eq!(read_raw(&path).unwrap(), set);

        let grid = Grid::new([2, 2, 2]).unwrap();
        let mut ids = FieldSet::new(grid);
        ids.push("phase", vec![0.0, 1.0, 1.0, 0.0, 2.0, 0.0, 0.0, 1.0]).unwrap();
        let p = dir.path().join("ids.raw");
        write_raw(&p, &ids).unwrap();
        assert_eq!(read_phase_ids(&p, &grid).unwrap(), vec![0, 1, 1, 0, 2, 0, 0, 1]);
        assert!(read_phase_ids(&p, &Grid::new([2, 2, 4]).unwrap()).is_err());
        ids.fields[0].1[3] = 0.5;
        write_raw(&p, &ids).unwrap();
        assert!(read_phase_ids(&p, &grid).is_err());
    }

    #[test]
    fn truncated_raw_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.raw");
        write_raw(&path, &sample_set([2, 2, 2], 1)).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 8]).unwrap();
        assert!(matches!(read_raw(&path), Err(Error::Format { .. })));
    }

    #[test]
    fn convergence_csv_header_and_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        let report = ConvergenceReport {
            records: vec![
                IterationRecord { iter: 1, l2: 3.5, epsilon: 0.25, seconds: 0.01 },
                IterationRecord { iter: 2, l2: 1e-12, epsilon: 1.5e-14, seconds: 0.02 },
            ],
            termination: Termination::Converged,
        };
        write_convergence_csv(&path, &report).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().next().unwrap(), "iter,L2,epsilon,seconds");
        assert_eq!(read_convergence_csv(&path).unwrap(), report.records);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn random_fields_round_trip(
            dims in (1usize..4, 1usize..4, 1usize..4),
            values in prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO, 64),
        ) {
            let grid = Grid::new([dims.0, dims.1, dims.2]).unwrap();
            let mut set = FieldSet::new(grid);
            set.push("v", values[..grid.len()].to_vec()).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let vtk = dir.path().join("v.vtk");
            let raw = dir.path().join("v.raw");
            write_vtk(&vtk, &set, "p").unwrap();
            write_raw(&raw, &set).unwrap();
            let a = read_vtk(&vtk).unwrap();
            let b = read_raw(&raw).unwrap();
            prop_assert_eq!(&a.fields[0].1.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), &set.fields[0].1.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
            prop_assert_eq!(b, set);
        }
    }
}
