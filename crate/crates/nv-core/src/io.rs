//! On-disk formats: a JSON sidecar next to a raw binary of row-major
//! little-endian f64 (re, im) pairs, plus CSV exports for plotting.

use crate::error::{Error, Result};
use crate::field::{Field, Grid};
use crate::scatter::{KGrid, RaySpec, ScatteringData};
use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridKind {
    X,
    K,
}

impl GridKind {
    fn tag(self) -> &'static str {
        match self {
            GridKind::X => "x",
            GridKind::K => "k",
        }
    }
}

#[derive(Serialize, Deserialize)]
struct FieldHeader {
    n: usize,
    #[serde(rename = "L")]
    l: f64,
    kind: String,
    dtype: String,
}

#[derive(Serialize, Deserialize)]
struct RayHeader {
    k_lo: f64,
    k_hi: f64,
    count: usize,
    theta: f64,
}

#[derive(Serialize, Deserialize)]
struct ScatteringHeader {
    n: usize,
    #[serde(rename = "L")]
    l: f64,
    kind: String,
    dtype: String,
    tau: f64,
    k_min: f64,
    mask: Vec<Vec<u8>>,
    exceptional: Vec<Vec<u8>>,
    #[serde(default)]
    ray_spec: Option<RayHeader>,
    #[serde(default)]
    ray_k: Vec<[f64; 2]>,
    #[serde(default)]
    ray_t: Vec<[f64; 2]>,
    #[serde(default)]
    ray_exceptional: Vec<u8>,
}

fn sidecar_path(base: &Path) -> PathBuf {
    base.with_extension("json")
}

fn binary_path(base: &Path) -> PathBuf {
    base.with_extension("bin")
}

fn write_values(path: &Path, values: &Array2<Complex64>) -> Result<()> {
    let mut buf = Vec::with_capacity(16 * values.len());
    for v in values.iter() {
        buf.extend_from_slice(&v.re.to_le_bytes());
        buf.extend_from_slice(&v.im.to_le_bytes());
    }
    fs::write(path, buf)?;
    Ok(())
}

fn read_values(path: &Path, n: usize) -> Result<Array2<Complex64>> {
    let bytes = fs::read(path)?;
    let want = 16 * n * n;
    if bytes.len() != want {
        return Err(Error::Format(format!(
            "{}: expected {} bytes for {}x{} complex values, found {}",
            path.display(),
            want,
            n,
            n,
            bytes.len()
        )));
    }
    let mut values = Array2::from_elem((n, n), Complex64::ZERO);
    for (idx, v) in values.iter_mut().enumerate() {
        let off = 16 * idx;
        let re = f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
        let im = f64::from_le_bytes(bytes[off + 8..off + 16].try_into().unwrap());
        *v = Complex64::new(re, im);
    }
    Ok(values)
}

fn read_header<T: serde::de::DeserializeOwned>(base: &Path) -> Result<T> {
    let path = sidecar_path(base);
    let text = fs::read_to_string(&path)?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Format(format!("{}: {}", path.display(), e)))
}

/// Write `base`.json + `base`.bin for a field on its grid.
pub fn write_field(base: &Path, field: &Field, kind: GridKind) -> Result<()> {
    let header = FieldHeader {
        n: field.grid.n(),
        l: field.grid.half_width(),
        kind: kind.tag().to_string(),
        dtype: "c128".to_string(),
    };
    let text = serde_json::to_string_pretty(&header).expect("header serializes");
    fs::write(sidecar_path(base), text + "\n")?;
    write_values(&binary_path(base), &field.values)
}

pub fn read_field(base: &Path) -> Result<(Field, GridKind)> {
    let header: FieldHeader = read_header(base)?;
    if header.dtype != "c128" {
        return Err(Error::Format(format!(
            "unsupported dtype {:?}",
            header.dtype
        )));
    }
    let kind = match header.kind.as_str() {
        "x" => GridKind::X,
        "k" => GridKind::K,
        other => return Err(Error::Format(format!("unknown grid kind {other:?}"))),
    };
    let grid = Grid::new(header.l, header.n)?;
    let values = read_values(&binary_path(base), header.n)?;
    Ok((Field { grid, values }, kind))
}

fn flags_to_rows(flags: &Array2<bool>) -> Vec<Vec<u8>> {
    flags
        .rows()
        .into_iter()
        .map(|row| row.iter().map(|&b| b as u8).collect())
        .collect()
}

fn rows_to_flags(rows: &[Vec<u8>], m: usize, what: &str) -> Result<Array2<bool>> {
    if rows.len() != m || rows.iter().any(|r| r.len() != m) {
        return Err(Error::Format(format!("{what} array is not {m}x{m}")));
    }
    Ok(Array2::from_shape_fn((m, m), |(i, j)| rows[i][j] != 0))
}

/// Scattering data mirrors the field layout with kind "k"; the sidecar
/// carries the mask, the exceptional flags, the time tag and the ray.
pub fn write_scattering(base: &Path, sd: &ScatteringData) -> Result<()> {
    let header = ScatteringHeader {
        n: sd.kgrid.m(),
        l: sd.kgrid.k_max(),
        kind: "k".to_string(),
        dtype: "c128".to_string(),
        tau: sd.tau,
        k_min: sd.kgrid.k_min(),
        mask: flags_to_rows(&sd.mask),
        exceptional: flags_to_rows(&sd.exceptional),
        ray_spec: sd.kgrid.ray.as_ref().map(|r| RayHeader {
            k_lo: r.k_lo,
            k_hi: r.k_hi,
            count: r.count,
            theta: r.theta,
        }),
        ray_k: sd.ray_k.iter().map(|k| [k.re, k.im]).collect(),
        ray_t: sd.ray_t.iter().map(|t| [t.re, t.im]).collect(),
        ray_exceptional: sd.ray_exceptional.iter().map(|&b| b as u8).collect(),
    };
    let text = serde_json::to_string_pretty(&header).expect("header serializes");
    fs::write(sidecar_path(base), text + "\n")?;
    write_values(&binary_path(base), &sd.t)
}

pub fn read_scattering(base: &Path) -> Result<ScatteringData> {
    let header: ScatteringHeader = read_header(base)?;
    if header.dtype != "c128" {
        return Err(Error::Format(format!(
            "unsupported dtype {:?}",
            header.dtype
        )));
    }
    if header.kind != "k" {
        return Err(Error::Format(format!(
            "scattering data requires kind \"k\", found {:?}",
            header.kind
        )));
    }
    let m = header.n;
    if m == 0 {
        return Err(Error::Format("empty lattice".to_string()));
    }
    let dk = 2.0 * header.l / m as f64;
    let ray = header.ray_spec.as_ref().map(|r| RaySpec {
        k_lo: r.k_lo,
        k_hi: r.k_hi,
        count: r.count,
        theta: r.theta,
    });
    let kgrid = KGrid::from_parts(m, dk, header.k_min, ray)?;
    let t = read_values(&binary_path(base), m)?;
    let n_ray = header.ray_k.len();
    if header.ray_t.len() != n_ray || header.ray_exceptional.len() != n_ray {
        return Err(Error::Format("inconsistent ray array lengths".to_string()));
    }
    Ok(ScatteringData {
        kgrid,
        t,
        mask: rows_to_flags(&header.mask, m, "mask")?,
        exceptional: rows_to_flags(&header.exceptional, m, "exceptional")?,
        ray_k: header.ray_k.iter().map(|p| Complex64::new(p[0], p[1])).collect(),
        ray_t: header.ray_t.iter().map(|p| Complex64::new(p[0], p[1])).collect(),
        ray_exceptional: header.ray_exceptional.iter().map(|&b| b != 0).collect(),
        tau: header.tau,
    })
}

/// 1-D slice along the x1 axis at x2 = 0, columns x1,x2,re,im.
pub fn field_csv_slice(field: &Field) -> String {
    let n = field.grid.n();
    let j = n / 2;
    let mut out = String::from("x1,x2,re,im\n");
    for i in 0..n {
        let x = field.grid.point(i, j);
        let v = field.values[[i, j]];
        writeln!(out, "{},{},{:.17e},{:.17e}", x.re, x.im, v.re, v.im).unwrap();
    }
    out
}

/// Full lattice dump, columns k1,k2,re_t,im_t,masked.
pub fn scattering_csv(sd: &ScatteringData) -> String {
    let m = sd.kgrid.m();
    let mut out = String::from("k1,k2,re_t,im_t,masked\n");
    for i in 0..m {
        for j in 0..m {
            let k = sd.kgrid.k(i, j);
            let v = sd.t[[i, j]];
            writeln!(
                out,
                "{},{},{:.17e},{:.17e},{}",
                k.re,
                k.im,
                v.re,
                v.im,
                sd.mask[[i, j]] as u8
            )
            .unwrap();
        }
    }
    out
}
