//! Run configuration, read from TOML.
//!
//! ```toml
//! experiment = "validate"        # modal | scatter | validate | nmodes
//! wavelength = 1.55
//! order = 4
//!
//! [geometry]
//! core_width = 1.0
//! cladding = 2.5
//! length = 2.0
//! h = 0.13333333333333333
//!
//! [materials]
//! core = 2.5
//! cladding = 1.5
//!
//! [ports.in]
//! nmodes = 3
//! incident = [[0, 0.5, 0.0], [1, 2.0, 0.0], [2, 2.5, 0.0]]
//! ```
//!
//! The full list of keys is given in the README.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{PortLayout, SlabGeometry, CLADDING, CORE};
use crate::pml::PmlParams;
use crate::sparse::GmresOptions;
use crate::wpbc::PatchGrouping;
use crate::Materials;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Modal,
    Scatter,
    Validate,
    Nmodes,
}

/// Number of modes at a port: a count or every mode of the trace space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeCount {
    N(usize),
    Full,
}

impl ModeCount {
    pub fn resolve(self, dim: usize) -> usize {
        match self {
            ModeCount::N(n) => n,
            ModeCount::Full => dim,
        }
    }
}

impl fmt::Display for ModeCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModeCount::N(n) => write!(f, "{n}"),
            ModeCount::Full => f.write_str("full"),
        }
    }
}

impl std::str::FromStr for ModeCount {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("full") {
            return Ok(ModeCount::Full);
        }
        s.parse::<usize>()
            .map(ModeCount::N)
            .map_err(|_| Error::Config(format!("mode count must be a positive integer or \"full\", got `{s}`")))
    }
}

impl<'de> Deserialize<'de> for ModeCount {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = ModeCount;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a positive integer or \"full\"")
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<ModeCount, E> {
                usize::try_from(v).map(ModeCount::N).map_err(|_| E::custom(format!("negative mode count {v}")))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<ModeCount, E> {
                Ok(ModeCount::N(v as usize))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<ModeCount, E> {
                v.parse().map_err(|e: Error| E::custom(e.to_string()))
            }
        }
        d.deserialize_any(V)
    }
}

impl Serialize for ModeCount {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ModeCount::N(n) => s.serialize_u64(*n as u64),
            ModeCount::Full => s.serialize_str("full"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub core_width: f64,
    #[serde(default)]
    pub second_core_width: Option<f64>,
    #[serde(default)]
    pub discontinuity_z: Option<f64>,
    pub cladding: f64,
    pub length: f64,
    /// Defaults to one element size.
    #[serde(default)]
    pub eval_offset: Option<f64>,
    pub h: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PmlConfig {
    #[serde(default = "default_m")]
    pub m: f64,
    #[serde(rename = "R", alias = "r", default = "default_r")]
    pub r: f64,
    #[serde(default)]
    pub alpha_max_x: Option<f64>,
    #[serde(default)]
    pub alpha_max_z: Option<f64>,
    #[serde(default = "default_width")]
    pub width_x: f64,
    #[serde(default = "default_width_z")]
    pub width_z: f64,
    /// Index entering the absorption formula; defaults to the cladding.
    #[serde(default)]
    pub n_ref: Option<f64>,
}

fn default_m() -> f64 {
    2.0
}

fn default_r() -> f64 {
    1e-70
}

fn default_width() -> f64 {
    1.0
}

/// Gives `α_max,z / α_max,x = 1.5` at equal index.
fn default_width_z() -> f64 {
    2.0 / 3.0
}

impl Default for PmlConfig {
    fn default() -> Self {
        PmlConfig {
            m: default_m(),
            r: default_r(),
            alpha_max_x: None,
            alpha_max_z: None,
            width_x: default_width(),
            width_z: default_width_z(),
            n_ref: None,
        }
    }
}

impl PmlConfig {
    pub fn params(&self) -> PmlParams {
        PmlParams {
            m: self.m,
            r: self.r,
            alpha_max_x: self.alpha_max_x,
            alpha_max_z: self.alpha_max_z,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PortConfig {
    #[serde(default = "default_port_modes")]
    pub nmodes: ModeCount,
    /// `[mode, re, im]` triples. Absent means "experiment default".
    #[serde(default)]
    pub incident: Option<Vec<(usize, f64, f64)>>,
}

fn default_port_modes() -> ModeCount {
    ModeCount::N(3)
}

impl Default for PortConfig {
    fn default() -> Self {
        PortConfig {
            nmodes: default_port_modes(),
            incident: None,
        }
    }
}

impl PortConfig {
    /// Dense incident vector, or `None` when none was configured.
    pub fn incident_vector(&self) -> Result<Option<Vec<Complex64>>> {
        let Some(list) = &self.incident else { return Ok(None) };
        let n = list.iter().map(|(k, _, _)| k + 1).max().unwrap_or(0);
        let mut v = vec![Complex64::new(0.0, 0.0); n];
        for &(k, re, im) in list {
            if v[k] != Complex64::new(0.0, 0.0) {
                return Err(Error::Config(format!("incident amplitude of mode {k} given twice")));
            }
            v[k] = Complex64::new(re, im);
        }
        Ok(Some(v))
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PortsConfig {
    #[serde(default, rename = "in")]
    pub input: PortConfig,
    #[serde(default)]
    pub out: PortConfig,
}

impl Default for PortsConfig {
    fn default() -> Self {
        PortsConfig {
            input: PortConfig::default(),
            out: PortConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    #[default]
    Direct,
    Gmres,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default)]
    pub kind: SolverKind,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_restart")]
    pub restart: usize,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_true")]
    pub jacobi: bool,
    #[serde(default)]
    pub condense: bool,
    #[serde(default)]
    pub grouping: PatchGrouping,
}

fn default_tol() -> f64 {
    1e-10
}

fn default_restart() -> usize {
    200
}

fn default_max_iter() -> usize {
    20_000
}

fn default_true() -> bool {
    true
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            kind: SolverKind::Direct,
            tol: default_tol(),
            restart: default_restart(),
            max_iter: default_max_iter(),
            jacobi: true,
            condense: false,
            grouping: PatchGrouping::default(),
        }
    }
}

impl SolverConfig {
    pub fn gmres(&self) -> GmresOptions {
        GmresOptions {
            restart: self.restart,
            max_iter: self.max_iter,
            tol: self.tol,
            jacobi: self.jacobi,
        }
    }
}

/// Homogeneous strip with conducting walls, as a modal test case.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StripConfig {
    pub width: f64,
    pub elements: usize,
    pub material: String,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModalConfig {
    #[serde(default = "default_modal_modes")]
    pub nmodes: ModeCount,
    /// Height of the slab cross-section.
    #[serde(default)]
    pub z: f64,
    #[serde(default)]
    pub strip: Option<StripConfig>,
}

fn default_modal_modes() -> ModeCount {
    ModeCount::N(10)
}

impl Default for ModalConfig {
    fn default() -> Self {
        ModalConfig {
            nmodes: default_modal_modes(),
            z: 0.0,
            strip: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default = "default_grid")]
    pub grid: Vec<ModeCount>,
    /// Pair every input count with every output count instead of
    /// sweeping `n_in = n_out`.
    #[serde(default)]
    pub cartesian: bool,
}

fn default_grid() -> Vec<ModeCount> {
    vec![
        ModeCount::N(3),
        ModeCount::N(10),
        ModeCount::N(30),
        ModeCount::N(100),
        ModeCount::Full,
    ]
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            grid: default_grid(),
            cartesian: false,
        }
    }
}

/// Optional h/p sweep of the validation errors.
#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateConfig {
    /// Element sizes; each must divide every line offset.
    #[serde(default)]
    pub sizes: Vec<f64>,
    #[serde(default)]
    pub orders: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Used by `run`; the named subcommands ignore it.
    #[serde(default)]
    pub experiment: Option<Experiment>,
    pub wavelength: f64,
    #[serde(default = "default_order")]
    pub order: usize,
    #[serde(default)]
    pub output: Option<PathBuf>,
    pub geometry: GeometryConfig,
    pub materials: BTreeMap<String, f64>,
    #[serde(default)]
    pub pml: PmlConfig,
    #[serde(default)]
    pub ports: PortsConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub modal: ModalConfig,
    #[serde(default)]
    pub nmodes: SweepConfig,
    #[serde(default)]
    pub validate: ValidateConfig,
}

fn default_order() -> usize {
    4
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn read(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        RunConfig::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    fn check(&self) -> Result<()> {
        if !(self.wavelength > 0.0) || !self.wavelength.is_finite() {
            return Err(Error::Config(format!("wavelength must be positive, got {}", self.wavelength)));
        }
        if self.order == 0 {
            return Err(Error::Config("order must be >= 1".into()));
        }
        for (name, n) in &self.materials {
            if !(*n > 0.0) || !n.is_finite() {
                return Err(Error::Config(format!("materials.{name}: index must be positive, got {n}")));
            }
        }
        if self.modal.strip.is_none() {
            for tag in [CORE, CLADDING] {
                if !self.materials.contains_key(tag) {
                    return Err(Error::Config(format!("materials.{tag} is not defined")));
                }
            }
        }
        if let Some(s) = &self.modal.strip {
            if !self.materials.contains_key(&s.material) {
                return Err(Error::Config(format!(
                    "modal.strip.material refers to undefined material `{}`",
                    s.material
                )));
            }
        }
        if self.ports.out.incident.as_ref().is_some_and(|v| !v.is_empty()) {
            return Err(Error::Config("ports.out.incident: the output port takes no incident field".into()));
        }
        self.ports.input.incident_vector()?;
        if self.validate.orders.contains(&0) {
            return Err(Error::Config("validate.orders: order must be >= 1".into()));
        }
        if self.nmodes.grid.is_empty() {
            return Err(Error::Config("nmodes.grid is empty".into()));
        }
        for count in self.nmodes.grid.iter().chain([&self.ports.input.nmodes, &self.ports.out.nmodes]) {
            if *count == ModeCount::N(0) {
                return Err(Error::Config("mode counts must be >= 1".into()));
            }
        }
        Ok(())
    }

    pub fn materials(&self) -> Materials {
        self.materials.clone()
    }

    /// Index used in the absorption formula.
    pub fn n_ref(&self) -> f64 {
        self.pml.n_ref.or_else(|| self.materials.get(CLADDING).copied()).unwrap_or(1.0)
    }

    pub fn slab(&self, layout: PortLayout) -> SlabGeometry {
        let g = &self.geometry;
        SlabGeometry {
            core_width: g.core_width,
            second_core_width: g.second_core_width,
            discontinuity_z: g.discontinuity_z,
            cladding: g.cladding,
            pml_width_x: self.pml.width_x,
            length: g.length,
            eval_offset: g.eval_offset.unwrap_or(g.h),
            h: g.h,
            layout,
        }
    }

    pub fn pml_backed_layout(&self) -> PortLayout {
        PortLayout::PmlBacked {
            pml_width_z: self.pml.width_z,
        }
    }

    pub fn output_dir(&self, cli: Option<&Path>) -> PathBuf {
        cli.map(Path::to_path_buf)
            .or_else(|| self.output.clone())
            .unwrap_or_else(|| PathBuf::from("out"))
    }
}
