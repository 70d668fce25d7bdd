//! Field snapshots (raw little-endian `f64` plus a JSON sidecar), CSV series
//! and JSON reports.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::EvolutionReport;
use crate::grid::{build_grid, ComplexField, Field, GridSpec, NkgState, RealField};
use crate::hylomorphy::SweepPoint;
use crate::minimize::TraceEntry;
use crate::state::State;

pub const SNAPSHOT_FORMAT: &str = "hylomorph-snapshot";
pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SnapshotKind {
    Real,
    Complex,
    /// `ψ` then `ψ̂`, each complex.
    Nkg,
}

impl SnapshotKind {
    fn values_per_node(self) -> usize {
        match self {
            SnapshotKind::Real => 1,
            SnapshotKind::Complex => 2,
            SnapshotKind::Nkg => 4,
        }
    }
}

/// Sidecar describing the raw data file. Values are stored row-major (last
/// axis fastest); complex values as interleaved `(re, im)`; NKG states as the
/// whole `ψ` block followed by the whole `ψ̂` block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotHeader {
    pub format: String,
    pub version: u32,
    pub kind: SnapshotKind,
    pub grid: GridSpec,
    pub shape: Vec<usize>,
    pub layout: String,
    pub endianness: String,
    pub values_per_node: usize,
    pub time: Option<f64>,
    pub label: Option<String>,
}

fn push_complex(out: &mut Vec<u8>, f: &ComplexField) {
    for z in f.values() {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
}

/// Writes `<dir>/<name>.snap` and `<dir>/<name>.snap.json`; returns the
/// data path.
pub fn write_snapshot(dir: &Path, name: &str, state: &State, time: Option<f64>) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let grid = state.grid();
    let (kind, bytes) = match state {
        State::Real(u) => {
            let mut out = Vec::with_capacity(8 * u.len());
            for v in u.values() {
                out.extend_from_slice(&v.to_le_bytes());
            }
            (SnapshotKind::Real, out)
        }
        State::Complex(z) => {
            let mut out = Vec::with_capacity(16 * z.len());
            push_complex(&mut out, z);
            (SnapshotKind::Complex, out)
        }
        State::Nkg(s) => {
            let mut out = Vec::with_capacity(32 * s.psi.len());
            push_complex(&mut out, &s.psi);
            push_complex(&mut out, &s.psi_hat);
            (SnapshotKind::Nkg, out)
        }
    };
    let header = SnapshotHeader {
        format: SNAPSHOT_FORMAT.into(),
        version: SNAPSHOT_VERSION,
        kind,
        grid: grid.spec().clone(),
        shape: grid.shape().to_vec(),
        layout: "row-major".into(),
        endianness: "little".into(),
        values_per_node: kind.values_per_node(),
        time,
        label: Some(name.into()),
    };
    let data = dir.join(format!("{name}.snap"));
    fs::write(&data, bytes)?;
    write_json(&sidecar_path(&data), &header)?;
    Ok(data)
}

fn sidecar_path(data: &Path) -> PathBuf {
    let mut s = data.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn read_snapshot_header(data: &Path) -> Result<SnapshotHeader> {
    let side = sidecar_path(data);
    let text = fs::read_to_string(&side)
        .map_err(|e| Error::Config(format!("cannot read snapshot sidecar {}: {e}", side.display())))?;
    let header: SnapshotHeader = serde_json::from_str(&text)?;
    if header.format != SNAPSHOT_FORMAT || header.version != SNAPSHOT_VERSION {
        return Err(Error::Config(format!(
            "{} is not a version {SNAPSHOT_VERSION} {SNAPSHOT_FORMAT} sidecar",
            side.display()
        )));
    }
    if header.layout != "row-major" || header.endianness != "little" {
        return Err(Error::Config("unsupported snapshot layout or endianness".into()));
    }
    Ok(header)
}

/// Reads a snapshot written by [`write_snapshot`], bit for bit.
pub fn read_snapshot(data: &Path) -> Result<State> {
    let header = read_snapshot_header(data)?;
    let grid = build_grid(header.grid.clone())?;
    if grid.shape() != header.shape.as_slice() || header.values_per_node != header.kind.values_per_node() {
        return Err(Error::Config("snapshot shape does not match its grid".into()));
    }
    let bytes = fs::read(data).map_err(|e| Error::Config(format!("cannot read snapshot {}: {e}", data.display())))?;
    let n = grid.len();
    if bytes.len() != 8 * n * header.values_per_node {
        return Err(Error::Config(format!(
            "snapshot {} has {} bytes, expected {}",
            data.display(),
            bytes.len(),
            8 * n * header.values_per_node
        )));
    }
    let floats: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    let complex = |block: &[f64]| -> Result<ComplexField> {
        Field::from_values(
            &grid,
            block.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect(),
        )
    };
    Ok(match header.kind {
        SnapshotKind::Real => State::Real(RealField::from_values(&grid, floats)?),
        SnapshotKind::Complex => State::Complex(complex(&floats)?),
        SnapshotKind::Nkg => State::Nkg(NkgState::new(complex(&floats[..2 * n])?, complex(&floats[2 * n..])?)?),
    })
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn write_csv(path: &Path, header: &str, rows: impl Iterator<Item = String>) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(f, "{header}")?;
    for r in rows {
        writeln!(f, "{r}")?;
    }
    f.flush()?;
    Ok(())
}

/// `iter,objective,gradnorm`.
pub fn write_trace_csv(path: &Path, trace: &[TraceEntry]) -> Result<()> {
    write_csv(
        path,
        "iter,objective,gradnorm",
        trace
            .iter()
            .map(|t| format!("{},{:e},{:e}", t.iter, t.objective, t.grad_norm)),
    )
}

/// `t,E,C,V,orbital_distance`.
pub fn write_series_csv(path: &Path, rep: &EvolutionReport) -> Result<()> {
    write_csv(
        path,
        "t,E,C,V,orbital_distance",
        (0..rep.times.len()).map(|i| {
            format!(
                "{:e},{:e},{:e},{:e},{:e}",
                rep.times[i], rep.e_series[i], rep.c_series[i], rep.v_series[i], rep.orbital_distance_series[i]
            )
        }),
    )
}

/// `parameter,lambda,winding_term`.
pub fn write_sweep_csv(path: &Path, sweep: &[SweepPoint]) -> Result<()> {
    write_csv(
        path,
        "parameter,lambda,winding_term",
        sweep.iter().map(|s| {
            let w = s.winding_term.map(|w| format!("{w:e}")).unwrap_or_default();
            format!("{:e},{:e},{w}", s.parameter, s.lambda)
        }),
    )
}

/// Two-column CSV of a 1D real field, for plotting.
pub fn write_profile_csv(path: &Path, u: &RealField) -> Result<()> {
    if u.grid().ndim() != 1 {
        return Err(Error::Usage("profile CSV needs a 1D field".into()));
    }
    let x = &u.grid().axis(0).coords;
    write_csv(
        path,
        "x,u",
        x.iter().zip(u.values()).map(|(x, v)| format!("{x:e},{v:e}")),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::AxisSpec;

    #[test]
    fn snapshot_roundtrip_is_bit_exact() {
        let g = build_grid(GridSpec::cylindrical(3.0, 8, AxisSpec::periodic(-1.0, 1.0, 6))).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let psi = ComplexField::from_fn(&g, |x| Complex64::new(x[0].sin() / 3.0, x[1].exp()));
        let hat = psi.map(|z| z * Complex64::new(0.1, -0.7));
        let states = [
            State::Real(psi.real_part()),
            State::Complex(psi.clone()),
            State::Nkg(NkgState::new(psi, hat).unwrap()),
        ];
        for (k, s) in states.iter().enumerate() {
            let path = write_snapshot(dir.path(), &format!("s{k}"), s, Some(0.5)).unwrap();
            let back = read_snapshot(&path).unwrap();
            assert_eq!(&back, s);
            let again = write_snapshot(dir.path(), &format!("t{k}"), &back, Some(0.5)).unwrap();
            assert_eq!(fs::read(&path).unwrap(), fs::read(&again).unwrap());
        }
    }

    #[test]
    fn truncated_data_is_rejected() {
        let g = build_grid(GridSpec::cartesian(vec![AxisSpec::periodic(0.0, 1.0, 8)])).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = write_snapshot(dir.path(), "u", &State::Real(RealField::zeros(&g)), None).unwrap();
        fs::write(&path, [0u8; 12]).unwrap();
        assert!(matches!(read_snapshot(&path), Err(Error::Config(_))));
    }
}
