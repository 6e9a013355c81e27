//! Run configuration: defaults, INI-style parsing, validation.
//!
//! The file format is one `key = value` per line under sections [xgrid],
//! [kgrid], [potential], [tolerances], [run]. Unknown sections and keys are
//! rejected so typos cannot silently fall back to defaults. `#` and `;`
//! start comments.

use crate::cgo::CgoParams;
use crate::dbar::DbarOptions;
use crate::error::{Error, Result};
use crate::field::Grid;
use crate::potentials::{PotentialFamily, PotentialSpec};
use crate::reconstruct::ReconstructOptions;
use crate::scatter::{KGrid, RaySpec};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy)]
pub struct XGridConfig {
    pub half_width: f64,
    pub n: usize,
}

#[derive(Debug, Clone)]
pub struct KGridConfig {
    pub k_max: f64,
    pub m: usize,
    pub k_min_cells: usize,
    pub ray: RaySpec,
}

#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    pub cgo_tol: f64,
    pub dbar_tol: f64,
    pub tol_eig: f64,
    pub reality_tol: f64,
    pub sym_tol: f64,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub xgrid: XGridConfig,
    pub kgrid: KGridConfig,
    pub potential: PotentialSpec,
    pub tolerances: Tolerances,
    pub tau_schedule: Vec<f64>,
    pub dtau: f64,
    pub subk_model: bool,
    /// worker threads; 0 picks the runtime default
    pub parallelism: usize,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            xgrid: XGridConfig {
                half_width: 4.0,
                n: 128,
            },
            kgrid: KGridConfig {
                k_max: 6.0,
                m: 64,
                k_min_cells: 2,
                ray: RaySpec::default(),
            },
            potential: PotentialSpec::default(),
            tolerances: Tolerances {
                cgo_tol: 1e-8,
                dbar_tol: 1e-8,
                tol_eig: 1e-9,
                reality_tol: 1e-3,
                sym_tol: 1e-6,
            },
            tau_schedule: vec![0.0],
            dtau: 1e-3,
            subk_model: false,
            parallelism: 0,
            output_dir: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        RunConfig::parse(&text)
    }

    pub fn parse(text: &str) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        let mut section = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = strip_comment(raw).trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| bad_line(lineno, raw, "unterminated section header"))?;
                section = name.trim().to_string();
                match section.as_str() {
                    "xgrid" | "kgrid" | "potential" | "tolerances" | "run" => {}
                    other => {
                        return Err(Error::config(format!(
                            "line {}: unknown section [{}]",
                            lineno + 1,
                            other
                        )))
                    }
                }
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad_line(lineno, raw, "expected key = value"))?;
            let key = key.trim();
            let value = value.trim();
            cfg.apply(&section, key, value)
                .map_err(|e| Error::config(format!("line {}: {}", lineno + 1, e)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(&mut self, section: &str, key: &str, value: &str) -> std::result::Result<(), String> {
        match (section, key) {
            ("xgrid", "L") => self.xgrid.half_width = parse_num(key, value)?,
            ("xgrid", "n") => self.xgrid.n = parse_count(key, value)?,
            ("kgrid", "k_max") => self.kgrid.k_max = parse_num(key, value)?,
            ("kgrid", "m") => self.kgrid.m = parse_count(key, value)?,
            ("kgrid", "k_min_cells") => self.kgrid.k_min_cells = parse_count(key, value)?,
            ("kgrid", "ray_k_lo") => self.kgrid.ray.k_lo = parse_num(key, value)?,
            ("kgrid", "ray_k_hi") => self.kgrid.ray.k_hi = parse_num(key, value)?,
            ("kgrid", "ray_count") => self.kgrid.ray.count = parse_count(key, value)?,
            ("kgrid", "ray_theta") => self.kgrid.ray.theta = parse_num(key, value)?,
            ("potential", "family") => {
                self.potential.family = match value {
                    "conductivity" => PotentialFamily::Conductivity,
                    "perturbed" => PotentialFamily::Perturbed,
                    other => return Err(format!("unknown potential family {other:?}")),
                }
            }
            ("potential", "beta") => self.potential.beta = parse_num(key, value)?,
            ("potential", "center_x") => self.potential.center.re = parse_num(key, value)?,
            ("potential", "center_y") => self.potential.center.im = parse_num(key, value)?,
            ("potential", "radius") => self.potential.radius = parse_num(key, value)?,
            ("potential", "eps") => self.potential.eps = parse_num(key, value)?,
            ("tolerances", "cgo_tol") => self.tolerances.cgo_tol = parse_num(key, value)?,
            ("tolerances", "dbar_tol") => self.tolerances.dbar_tol = parse_num(key, value)?,
            ("tolerances", "tol_eig") => self.tolerances.tol_eig = parse_num(key, value)?,
            ("tolerances", "reality_tol") => self.tolerances.reality_tol = parse_num(key, value)?,
            ("tolerances", "sym_tol") => self.tolerances.sym_tol = parse_num(key, value)?,
            ("run", "tau_schedule") => {
                let mut taus = Vec::new();
                for part in value.split(',') {
                    let part = part.trim();
                    if part.is_empty() {
                        continue;
                    }
                    taus.push(
                        part.parse::<f64>()
                            .map_err(|_| format!("bad time value {part:?}"))?,
                    );
                }
                self.tau_schedule = taus;
            }
            ("run", "dtau") => self.dtau = parse_num(key, value)?,
            ("run", "subk_model") => self.subk_model = parse_flag(key, value)?,
            ("run", "workers") => self.parallelism = parse_count_or_zero(key, value)?,
            ("run", "output_dir") => self.output_dir = PathBuf::from(value),
            ("", k) => return Err(format!("key {k:?} appears before any section")),
            (s, k) => return Err(format!("unknown key {k:?} in section [{s}]")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let t = &self.tolerances;
        for (name, v) in [
            ("cgo_tol", t.cgo_tol),
            ("dbar_tol", t.dbar_tol),
            ("tol_eig", t.tol_eig),
            ("reality_tol", t.reality_tol),
            ("sym_tol", t.sym_tol),
            ("dtau", self.dtau),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.tau_schedule.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::config("tau_schedule must be sorted"));
        }
        if self.tau_schedule.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(Error::config("tau_schedule entries must be finite and nonnegative"));
        }
        // constructing the grids runs their own validation
        self.grid()?;
        self.kgrid()?;
        if self.xgrid.n < 32 {
            return Err(Error::config(
                "x-grid must have at least 32 points so the delivered half-resolution grid is valid",
            ));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.xgrid.half_width, self.xgrid.n)
    }

    pub fn kgrid(&self) -> Result<KGrid> {
        KGrid::snapped_with_min_cells(
            self.xgrid.half_width,
            self.kgrid.m,
            self.kgrid.k_max,
            self.kgrid.k_min_cells,
            Some(self.kgrid.ray.clone()),
        )
    }

    pub fn cgo_params(&self) -> CgoParams {
        CgoParams {
            tol: self.tolerances.cgo_tol,
            ..CgoParams::default()
        }
    }

    pub fn dbar_options(&self) -> DbarOptions {
        DbarOptions {
            tol: self.tolerances.dbar_tol,
            subk_model: self.subk_model,
            ..DbarOptions::default()
        }
    }

    pub fn reconstruct_options(&self) -> ReconstructOptions {
        ReconstructOptions {
            dbar: self.dbar_options(),
            half_width: self.xgrid.half_width,
            n_sub: self.xgrid.n / 2,
            reality_tol: self.tolerances.reality_tol,
        }
    }
}

fn strip_comment(line: &str) -> &str {
    match line.find(['#', ';']) {
        Some(pos) => &line[..pos],
        None => line,
    }
}

fn bad_line(lineno: usize, raw: &str, what: &str) -> Error {
    Error::config(format!("line {}: {} ({:?})", lineno + 1, what, raw.trim()))
}

fn parse_num(key: &str, value: &str) -> std::result::Result<f64, String> {
    value
        .parse::<f64>()
        .map_err(|_| format!("{key} expects a number, got {value:?}"))
}

fn parse_count(key: &str, value: &str) -> std::result::Result<usize, String> {
    match value.parse::<usize>() {
        Ok(v) if v > 0 => Ok(v),
        _ => Err(format!("{key} expects a positive integer, got {value:?}")),
    }
}

fn parse_count_or_zero(key: &str, value: &str) -> std::result::Result<usize, String> {
    value
        .parse::<usize>()
        .map_err(|_| format!("{key} expects a nonnegative integer, got {value:?}"))
}

fn parse_flag(key: &str, value: &str) -> std::result::Result<bool, String> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(format!("{key} expects true/false, got {other:?}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn defaults_are_valid() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        let kg = cfg.kgrid().unwrap();
        assert!((kg.dk() - std::f64::consts::PI / 16.0).abs() < 1e-15);
        assert_eq!(cfg.reconstruct_options().n_sub, 64);
    }

    #[test]
    fn full_file_parses() {
        let text = r#"
# sample configuration
[xgrid]
L = 4.0
n = 64

[kgrid]
k_max = 6.0
m = 32
k_min_cells = 2
ray_k_lo = 1e-3
ray_k_hi = 1e-1
ray_count = 24

[potential]
family = perturbed
beta = 0.5
eps = -0.1
radius = 1.0
center_x = 0.5 ; off-center bump
center_y = -0.25

[tolerances]
cgo_tol = 1e-9
dbar_tol = 1e-8
tol_eig = 1e-9
reality_tol = 1e-3
sym_tol = 1e-6

[run]
tau_schedule = 0.0, 0.05, 0.1
dtau = 1e-3
subk_model = true
workers = 2
output_dir = results
"#;
        let cfg = RunConfig::parse(text).unwrap();
        assert_eq!(cfg.xgrid.n, 64);
        assert_eq!(cfg.kgrid.m, 32);
        assert_eq!(cfg.potential.family, PotentialFamily::Perturbed);
        assert_eq!(cfg.potential.center, Complex64::new(0.5, -0.25));
        assert_eq!(cfg.tau_schedule, vec![0.0, 0.05, 0.1]);
        assert!(cfg.subk_model);
        assert_eq!(cfg.parallelism, 2);
        assert_eq!(cfg.output_dir, PathBuf::from("results"));
        assert_eq!(cfg.tolerances.cgo_tol, 1e-9);
    }

    #[test]
    fn unknown_keys_and_sections_are_rejected() {
        assert!(matches!(
            RunConfig::parse("[xgrid]\nL = 4\nnn = 128\n"),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            RunConfig::parse("[grids]\nL = 4\n"),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            RunConfig::parse("L = 4\n"),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn invariants_are_enforced() {
        assert!(RunConfig::parse("[tolerances]\ncgo_tol = 0\n").is_err());
        assert!(RunConfig::parse("[run]\ntau_schedule = 0.1, 0.0\n").is_err());
        assert!(RunConfig::parse("[kgrid]\nk_min_cells = 1\n").is_err());
        assert!(RunConfig::parse("[run]\ndtau = -1\n").is_err());
        assert!(RunConfig::parse("[xgrid]\nn = 20\n").is_err());
    }

    #[test]
    fn malformed_lines_are_reported_with_numbers() {
        let err = RunConfig::parse("[xgrid]\nL 4\n").unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("line 2"), "{msg}");
    }
}
