//! TOML run configuration.

use std::fs;
use std::path::{Path, PathBuf};

use bps_vortex::{Grid, PlanarTruncation, SolveOptions, TorusGeometry, VortexSpec};
use serde::Deserialize;

use crate::Failure;

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Torus,
    Plane,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TorusSection {
    #[serde(rename = "Lx")]
    pub lx: f64,
    #[serde(rename = "Ly")]
    pub ly: f64,
    pub nx: usize,
    pub ny: usize,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlaneSection {
    #[serde(rename = "R")]
    pub r: f64,
    pub nx: usize,
    pub ny: usize,
    /// Starting regularization scale; escalated automatically when too small.
    pub mu: Option<f64>,
}

/// Vortex lists given inline (one array of `[x, y]` pairs per component) or
/// as the path of a TOML file holding a `vortices` key of the same shape.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum Vortices {
    Inline(Vec<Vec<[f64; 2]>>),
    File(PathBuf),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct VortexFile {
    vortices: Vec<Vec<[f64; 2]>>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub tol: f64,
    pub residual_tol: f64,
    pub max_outer: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolveOptions::default();
        Self {
            tol: d.tol,
            residual_tol: d.residual_tol,
            max_outer: d.max_outer,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnosticsSection {
    pub flux: bool,
    #[serde(rename = "K")]
    pub k: bool,
    /// Number of random starts; 0 disables the check.
    pub uniqueness: usize,
    /// Fit window `[r1, r2]` for the planar decay rate.
    pub decay: Option<[f64; 2]>,
    pub symmetric: bool,
}

impl Default for DiagnosticsSection {
    fn default() -> Self {
        Self {
            flux: true,
            k: true,
            uniqueness: 0,
            decay: None,
            symmetric: false,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    pub l: usize,
    pub vortices: Vortices,
    pub torus: Option<TorusSection>,
    pub plane: Option<PlaneSection>,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub diagnostics: DiagnosticsSection,
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    /// Directory of the config file; relative paths resolve against it.
    #[serde(skip)]
    pub base: PathBuf,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::parse(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text).map_err(|m| Failure::parse(format!("{}: {m}", path.display())))?;
        cfg.base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses without validation; errors carry line and key context.
    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn validate(&self) -> Result<(), Failure> {
        match self.mode {
            Mode::Torus if self.torus.is_none() => {
                return Err(Failure::parse("mode = \"torus\" requires a [torus] table with Lx, Ly, nx, ny"))
            }
            Mode::Plane if self.plane.is_none() => {
                return Err(Failure::parse("mode = \"plane\" requires a [plane] table with R, nx, ny"))
            }
            _ => {}
        }
        if self.mode == Mode::Torus && self.diagnostics.decay.is_some() {
            return Err(Failure::parse("key `diagnostics.decay` applies to plane mode only"));
        }
        if self.diagnostics.uniqueness == 1 {
            return Err(Failure::parse("key `diagnostics.uniqueness` needs at least 2 trials (0 disables)"));
        }
        let spec = self.spec()?;
        if self.diagnostics.symmetric && spec.points.windows(2).any(|p| p[0] != p[1]) {
            return Err(Failure::parse(
                "key `diagnostics.symmetric` needs the same vortex list in every component",
            ));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid, Failure> {
        let bad = |key: &str, e: bps_vortex::VortexError| Failure::parse(format!("table `{key}`: {e}"));
        match self.mode {
            Mode::Torus => {
                let t = self.torus.as_ref().expect("validated");
                Ok(Grid::Torus(TorusGeometry::new(t.lx, t.ly, t.nx, t.ny).map_err(|e| bad("torus", e))?))
            }
            Mode::Plane => {
                let p = self.plane.as_ref().expect("validated");
                Ok(Grid::Plane(PlanarTruncation::new(p.r, p.nx, p.ny).map_err(|e| bad("plane", e))?))
            }
        }
    }

    pub fn points(&self) -> Result<Vec<Vec<[f64; 2]>>, Failure> {
        match &self.vortices {
            Vortices::Inline(v) => Ok(v.clone()),
            Vortices::File(rel) => {
                let path = self.base.join(rel);
                let text = fs::read_to_string(&path).map_err(|e| {
                    Failure::parse(format!("key `vortices`: cannot read {}: {e}", path.display()))
                })?;
                let file: VortexFile = toml::from_str(&text)
                    .map_err(|e| Failure::parse(format!("{}: {e}", path.display())))?;
                Ok(file.vortices)
            }
        }
    }

    pub fn spec(&self) -> Result<VortexSpec, Failure> {
        VortexSpec::new(self.l, self.points()?, self.grid()?)
            .map_err(|e| Failure::parse(format!("keys `l`/`vortices`: {e}")))
    }

    pub fn solve_options(&self, force: bool) -> SolveOptions {
        SolveOptions {
            tol: self.solver.tol,
            residual_tol: self.solver.residual_tol,
            max_outer: self.solver.max_outer,
            force,
        }
    }

    pub fn mu(&self) -> Option<f64> {
        self.plane.as_ref().and_then(|p| p.mu)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TORUS: &str = r#"
mode = "torus"
l = 2
vortices = [[[3.0, 3.0]], [[1.5, 1.5]]]
seed = 9

[torus]
Lx = 6.0
Ly = 6.0
nx = 32
ny = 32
"#;

    #[test]
    fn parses_torus_config_with_defaults() {
        let c = RunConfig::parse(TORUS).unwrap();
        assert_eq!(c.mode, Mode::Torus);
        assert_eq!(c.seed, 9);
        assert!(c.diagnostics.flux && c.diagnostics.k);
        assert_eq!(c.solver.max_outer, SolveOptions::default().max_outer);
        c.validate().unwrap();
        assert_eq!(c.spec().unwrap().counts(), vec![1, 1]);
    }

    #[test]
    fn unknown_key_reports_its_name_and_line() {
        let text = TORUS.replace("seed = 9", "sead = 9");
        let err = RunConfig::parse(&text).unwrap_err();
        assert!(err.contains("sead") && err.contains("line"), "{err}");
    }

    #[test]
    fn missing_mode_table_is_a_parse_failure() {
        let text = TORUS.replace("mode = \"torus\"", "mode = \"plane\"");
        let c = RunConfig::parse(&text).unwrap();
        let f = c.validate().unwrap_err();
        assert_eq!(f.code, crate::EXIT_PARSE);
        assert!(f.message.contains("[plane]"));
    }

    #[test]
    fn vortices_from_file() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("v.toml"), "vortices = [[], [[1.0, 2.0]]]").unwrap();
        let text = TORUS.replace("vortices = [[[3.0, 3.0]], [[1.5, 1.5]]]", "vortices = \"v.toml\"");
        let cfg_path = dir.path().join("run.toml");
        fs::write(&cfg_path, text).unwrap();
        let c = RunConfig::load(&cfg_path).unwrap();
        assert_eq!(c.spec().unwrap().counts(), vec![0, 1]);
    }
}
