//! Run configuration in sectioned `key = value` text.
//!
//! Sections: `[meshes]`, `[material]`, `[coupling]`, `[bc.<tag>.flow]`,
//! `[bc.<tag>.mech]`, `[probes]`, `[output]`, plus an optional top-level
//! `preset = mandel` that supplies every value before the file's own keys are
//! applied on top. [`RunConfig::to_text`] writes the fully materialized form,
//! which parses back to the same configuration.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ini::{Ini, ParseOption, Properties};
use nalgebra::{Point3, Vector3};
use thiserror::Error;
use twogrid::mandel::{MandelConfig, MandelParams};
use twogrid::mesh::{box_tet_mesh, load_mesh};
use twogrid::{
    Axis, BiotModulus, CouplingConfig, FlowBcSpec, FlowBoundary, MechBcSpec, MechBoundary,
    PoroelasticMaterial, Probe, TetMesh, TimeSchedule,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid `{field}`: {constraint}")]
    Validation { field: String, constraint: String },
    #[error("cannot read `{path}`: {message}")]
    Io { path: String, message: String },
}

fn invalid(field: impl Into<String>, constraint: impl Into<String>) -> ConfigError {
    ConfigError::Validation {
        field: field.into(),
        constraint: constraint.into(),
    }
}

// ---------------------------------------------------------------------------
// Document access with line numbers
// ---------------------------------------------------------------------------

/// Parsed INI document plus the line of every section header and key, so that
/// value errors can point at the offending line.
struct Doc {
    ini: Ini,
    lines: HashMap<(Option<String>, String), usize>,
    headers: HashMap<String, usize>,
}

impl Doc {
    fn parse(text: &str) -> Result<Self, ConfigError> {
        let opt = ParseOption {
            enabled_quote: false,
            enabled_escape: false,
            ..Default::default()
        };
        let ini = Ini::load_from_str_opt(text, opt).map_err(|e| ConfigError::Parse {
            line: e.line,
            message: e.msg.to_string(),
        })?;

        let mut lines = HashMap::new();
        let mut headers = HashMap::new();
        let mut section: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let s = raw.trim();
            if s.is_empty() || s.starts_with(';') || s.starts_with('#') {
                continue;
            }
            if let Some(name) = s.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
                let name = name.trim().to_string();
                if headers.insert(name.clone(), line).is_some() {
                    return Err(ConfigError::Parse {
                        line,
                        message: format!("section [{name}] appears twice"),
                    });
                }
                section = Some(name);
                continue;
            }
            let split = s.find(['=', ':']).unwrap_or(s.len());
            let key = s[..split].trim().to_string();
            if lines.insert((section.clone(), key.clone()), line).is_some() {
                return Err(ConfigError::Parse {
                    line,
                    message: format!("duplicate key `{key}`"),
                });
            }
        }
        Ok(Self {
            ini,
            lines,
            headers,
        })
    }

    fn section(&self, name: Option<&str>) -> Option<Sect<'_>> {
        self.ini.section(name).map(|props| Sect {
            doc: self,
            name: name.map(str::to_string),
            props,
        })
    }

    fn sections(&self) -> impl Iterator<Item = Sect<'_>> {
        self.ini.iter().map(move |(name, props)| Sect {
            doc: self,
            name: name.map(str::to_string),
            props,
        })
    }

    fn header_line(&self, name: &str) -> usize {
        self.headers.get(name).copied().unwrap_or(0)
    }
}

struct Sect<'a> {
    doc: &'a Doc,
    name: Option<String>,
    props: &'a Properties,
}

impl<'a> Sect<'a> {
    fn line(&self, key: &str) -> usize {
        self.doc
            .lines
            .get(&(self.name.clone(), key.to_string()))
            .copied()
            .unwrap_or(0)
    }

    fn err(&self, key: &str, message: impl Into<String>) -> ConfigError {
        ConfigError::Parse {
            line: self.line(key),
            message: message.into(),
        }
    }

    fn keys(&self) -> impl Iterator<Item = (&'a str, &'a str)> {
        self.props.iter()
    }

    fn raw(&self, key: &str) -> Option<&'a str> {
        self.props.get(key)
    }

    fn only(&self, allowed: &[&str]) -> Result<(), ConfigError> {
        for (k, _) in self.keys() {
            if !allowed.contains(&k) {
                let sect = self
                    .name
                    .as_deref()
                    .map_or("top level".to_string(), |n| format!("[{n}]"));
                return Err(self.err(k, format!("unknown key `{k}` in {sect}")));
            }
        }
        Ok(())
    }

    fn parse_with<T>(
        &self,
        key: &str,
        f: impl Fn(&str) -> Result<T, String>,
    ) -> Result<Option<T>, ConfigError> {
        self.raw(key)
            .map(|v| f(v).map_err(|m| self.err(key, format!("`{key}`: {m}"))))
            .transpose()
    }

    fn f64(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        self.parse_with(key, parse_f64)
    }

    fn usize(&self, key: &str) -> Result<Option<usize>, ConfigError> {
        self.parse_with(key, |v| {
            v.parse::<usize>()
                .map_err(|_| format!("expected a non-negative integer, got `{v}`"))
        })
    }

    fn bool(&self, key: &str) -> Result<Option<bool>, ConfigError> {
        self.parse_with(key, |v| match v {
            "true" => Ok(true),
            "false" => Ok(false),
            _ => Err(format!("expected `true` or `false`, got `{v}`")),
        })
    }

    fn vec3(&self, key: &str) -> Result<Option<[f64; 3]>, ConfigError> {
        self.parse_with(key, parse_vec3)
    }

    fn set_f64(&self, key: &str, slot: &mut f64) -> Result<(), ConfigError> {
        if let Some(v) = self.f64(key)? {
            *slot = v;
        }
        Ok(())
    }

    fn set_usize(&self, key: &str, slot: &mut usize) -> Result<(), ConfigError> {
        if let Some(v) = self.usize(key)? {
            *slot = v;
        }
        Ok(())
    }
}

fn parse_f64(v: &str) -> Result<f64, String> {
    match v.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        _ => Err(format!("expected a finite number, got `{v}`")),
    }
}

fn parse_list(v: &str) -> Result<Vec<f64>, String> {
    v.split_whitespace().map(parse_f64).collect()
}

fn parse_vec3(v: &str) -> Result<[f64; 3], String> {
    let xs = parse_list(v)?;
    <[f64; 3]>::try_from(xs.as_slice()).map_err(|_| format!("expected three numbers, got `{v}`"))
}

fn parse_count(tok: &str) -> Result<usize, String> {
    tok.parse::<usize>()
        .map_err(|_| format!("expected a non-negative integer, got `{tok}`"))
}

/// Shortest text that parses back to the same `f64`.
fn num(x: f64) -> String {
    format!("{x:?}")
}

fn nums(xs: &[f64]) -> String {
    xs.iter().map(|&x| num(x)).collect::<Vec<_>>().join(" ")
}

// ---------------------------------------------------------------------------
// Value grammars shared by `run` and `mandel` configurations
// ---------------------------------------------------------------------------

/// `uniform DT N`, `geometric DT_FIRST DT_MAX RATIO N` or `explicit DT...`.
pub fn parse_schedule(v: &str) -> Result<TimeSchedule, String> {
    let mut toks = v.split_whitespace();
    let kind = toks.next().unwrap_or("");
    let rest: Vec<&str> = toks.collect();
    let floats = |xs: &[&str]| {
        xs.iter()
            .map(|t| parse_f64(t))
            .collect::<Result<Vec<f64>, String>>()
    };
    match (kind, rest.as_slice()) {
        ("uniform", [dt, n]) => Ok(TimeSchedule::Uniform {
            dt: parse_f64(dt)?,
            n_steps: parse_count(n)?,
        }),
        ("geometric", [a, b, r, n]) => Ok(TimeSchedule::Geometric {
            dt_first: parse_f64(a)?,
            dt_max: parse_f64(b)?,
            ratio: parse_f64(r)?,
            n_steps: parse_count(n)?,
        }),
        ("explicit", xs) if !xs.is_empty() => Ok(TimeSchedule::Explicit(floats(xs)?)),
        _ => Err(format!(
            "expected `uniform DT N`, `geometric DT_FIRST DT_MAX RATIO N` or `explicit DT...`, got `{v}`"
        )),
    }
}

pub fn schedule_text(s: &TimeSchedule) -> String {
    match s {
        TimeSchedule::Uniform { dt, n_steps } => format!("uniform {} {n_steps}", num(*dt)),
        TimeSchedule::Geometric {
            dt_first,
            dt_max,
            ratio,
            n_steps,
        } => format!(
            "geometric {} {} {} {n_steps}",
            num(*dt_first),
            num(*dt_max),
            num(*ratio)
        ),
        TimeSchedule::Explicit(v) => format!("explicit {}", nums(v)),
    }
}

const MATERIAL_KEYS: &[&str] = &[
    "youngs_modulus",
    "poisson_ratio",
    "biot_coefficient",
    "biot_modulus",
    "fluid_compressibility",
    "solid_bulk_modulus",
    "porosity",
    "permeability",
    "viscosity",
    "fluid_density",
    "solid_density",
    "gravity",
];

/// Applies a `[material]` section on top of `base`. The Biot modulus is set
/// either directly (`biot_modulus`) or from constituents
/// (`fluid_compressibility` and `solid_bulk_modulus`); a section that names
/// any of these three keys replaces the base choice entirely. `base = None`
/// means no defaults exist for that choice.
fn apply_material(
    sect: Option<&Sect<'_>>,
    base: Option<&PoroelasticMaterial>,
) -> Result<PoroelasticMaterial, ConfigError> {
    let mut m = base.cloned().unwrap_or_default();
    let mut biot = base.map(|b| b.biot_modulus);
    if let Some(s) = sect {
        s.only(MATERIAL_KEYS)?;
        s.set_f64("youngs_modulus", &mut m.youngs_modulus)?;
        s.set_f64("poisson_ratio", &mut m.poisson_ratio)?;
        s.set_f64("biot_coefficient", &mut m.biot_coefficient)?;
        s.set_f64("porosity", &mut m.porosity)?;
        s.set_f64("permeability", &mut m.permeability)?;
        s.set_f64("viscosity", &mut m.viscosity)?;
        s.set_f64("fluid_density", &mut m.fluid_density)?;
        s.set_f64("solid_density", &mut m.solid_density)?;
        if let Some(g) = s.vec3("gravity")? {
            m.gravity = Vector3::from(g);
        }
        let direct = s.f64("biot_modulus")?;
        let cf = s.f64("fluid_compressibility")?;
        let ks = s.f64("solid_bulk_modulus")?;
        match (direct, cf, ks) {
            (None, None, None) => {}
            (Some(mv), None, None) => {
                biot = Some(BiotModulus::Direct(mv));
                m.fluid_compressibility = 0.0;
            }
            (None, Some(cf), Some(ks)) => {
                biot = Some(BiotModulus::Constituents {
                    fluid_compressibility: cf,
                    solid_bulk_modulus: ks,
                });
                m.fluid_compressibility = cf;
            }
            (Some(_), _, _) => return Err(invalid(
                "material.biot_modulus",
                "give either biot_modulus or (fluid_compressibility, solid_bulk_modulus), not both",
            )),
            (None, _, _) => {
                return Err(invalid(
                    "material.solid_bulk_modulus",
                    "fluid_compressibility and solid_bulk_modulus must be given together",
                ))
            }
        }
    }
    m.biot_modulus = biot.ok_or_else(|| {
        invalid(
            "material.biot_modulus",
            "exactly one of biot_modulus or (fluid_compressibility, solid_bulk_modulus) is required",
        )
    })?;
    m.validate().map_err(|e| {
        invalid(
            format!("material.{}", e.field),
            format!("{} (got {})", e.constraint, e.value),
        )
    })?;
    Ok(m)
}

fn material_text(out: &mut String, m: &PoroelasticMaterial) {
    let _ = writeln!(out, "[material]");
    let _ = writeln!(out, "youngs_modulus = {}", num(m.youngs_modulus));
    let _ = writeln!(out, "poisson_ratio = {}", num(m.poisson_ratio));
    let _ = writeln!(out, "biot_coefficient = {}", num(m.biot_coefficient));
    match m.biot_modulus {
        BiotModulus::Direct(v) => {
            let _ = writeln!(out, "biot_modulus = {}", num(v));
        }
        BiotModulus::Constituents {
            fluid_compressibility,
            solid_bulk_modulus,
        } => {
            let _ = writeln!(
                out,
                "fluid_compressibility = {}",
                num(fluid_compressibility)
            );
            let _ = writeln!(out, "solid_bulk_modulus = {}", num(solid_bulk_modulus));
        }
    }
    let _ = writeln!(out, "porosity = {}", num(m.porosity));
    let _ = writeln!(out, "permeability = {}", num(m.permeability));
    let _ = writeln!(out, "viscosity = {}", num(m.viscosity));
    let _ = writeln!(out, "fluid_density = {}", num(m.fluid_density));
    let _ = writeln!(out, "solid_density = {}", num(m.solid_density));
    let _ = writeln!(out, "gravity = {}", nums(m.gravity.as_slice()));
}

// ---------------------------------------------------------------------------
// Run configuration
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Mandel,
}

/// Where a mesh comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum MeshSource {
    /// `box NX NY NZ LX LY LZ`: structured box split into tets.
    Box {
        cells: [usize; 3],
        lengths: [f64; 3],
    },
    /// tetmesh v1 file, relative paths resolved against the config file.
    File(String),
}

impl MeshSource {
    fn parse(v: &str) -> Result<Self, String> {
        let toks: Vec<&str> = v.split_whitespace().collect();
        match toks.as_slice() {
            ["box", rest @ ..] => {
                if rest.len() != 6 {
                    return Err(format!("expected `box NX NY NZ LX LY LZ`, got `{v}`"));
                }
                Ok(MeshSource::Box {
                    cells: [
                        parse_count(rest[0])?,
                        parse_count(rest[1])?,
                        parse_count(rest[2])?,
                    ],
                    lengths: [
                        parse_f64(rest[3])?,
                        parse_f64(rest[4])?,
                        parse_f64(rest[5])?,
                    ],
                })
            }
            [] => Err("empty mesh specification".into()),
            _ => Ok(MeshSource::File(v.trim().to_string())),
        }
    }

    fn text(&self) -> String {
        match self {
            MeshSource::Box { cells, lengths } => {
                format!(
                    "box {} {} {} {}",
                    cells[0],
                    cells[1],
                    cells[2],
                    nums(lengths)
                )
            }
            MeshSource::File(p) => p.clone(),
        }
    }

    fn load(&self, field: &str, base: &Path) -> Result<TetMesh, ConfigError> {
        match self {
            MeshSource::Box { cells, lengths } => {
                if cells.iter().any(|&c| c == 0) {
                    return Err(invalid(field, "box cell counts must be >= 1"));
                }
                if lengths.iter().any(|&l| !(l > 0.0)) {
                    return Err(invalid(field, "box lengths must be > 0"));
                }
                Ok(box_tet_mesh(
                    cells[0], cells[1], cells[2], lengths[0], lengths[1], lengths[2],
                ))
            }
            MeshSource::File(p) => {
                let path = base.join(p);
                let text = std::fs::read_to_string(&path).map_err(|e| ConfigError::Io {
                    path: path.display().to_string(),
                    message: e.to_string(),
                })?;
                load_mesh(&text)
                    .map(|(m, _)| m)
                    .map_err(|e| invalid(field, e.to_string()))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    /// Output directory, relative to the config file unless absolute.
    pub directory: String,
    /// Snapshot every `cadence` steps; the initial and final states are
    /// always written.
    pub cadence: usize,
    pub vtk: bool,
    pub csv: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: "output".into(),
            cadence: 1,
            vtk: true,
            csv: true,
        }
    }
}

/// Fully materialized and validated run description.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub preset: Option<Preset>,
    pub mesh_flow: MeshSource,
    pub mesh_mech: MeshSource,
    pub flow_mesh: TetMesh,
    pub mech_mesh: TetMesh,
    pub material: PoroelasticMaterial,
    pub coupling: CouplingConfig,
    pub initial_pressure: f64,
    pub flow_bc: FlowBcSpec,
    pub mech_bc: MechBcSpec,
    pub probes: Vec<Probe>,
    pub output: OutputConfig,
    /// Directory against which relative paths are resolved.
    pub base_dir: PathBuf,
}

impl PartialEq for RunConfig {
    /// Compares the described configuration; loaded meshes and the base
    /// directory are derived data.
    fn eq(&self, o: &Self) -> bool {
        self.preset == o.preset
            && self.mesh_flow == o.mesh_flow
            && self.mesh_mech == o.mesh_mech
            && self.material == o.material
            && self.coupling == o.coupling
            && self.initial_pressure == o.initial_pressure
            && self.flow_bc == o.flow_bc
            && self.mech_bc == o.mech_bc
            && self.probes == o.probes
            && self.output == o.output
    }
}

/// Per-tag mechanics conditions while sections are being merged.
#[derive(Debug, Clone, Default)]
struct MechTag {
    fixed: [Option<f64>; 3],
    plate: [Option<f64>; 3],
    traction: Option<[f64; 3]>,
}

const MECH_KEYS: &[&str] = &[
    "fixed_x", "fixed_y", "fixed_z", "plate_x", "plate_y", "plate_z", "traction",
];
const AXES: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

impl MechTag {
    fn from_bcs(list: &[MechBoundary]) -> Self {
        let mut t = MechTag::default();
        for bc in list {
            match *bc {
                MechBoundary::Fixed { axis, value } => t.fixed[axis.index()] = Some(value),
                MechBoundary::RigidPlate { axis, force } => t.plate[axis.index()] = Some(force),
                MechBoundary::Traction(v) => t.traction = Some([v.x, v.y, v.z]),
            }
        }
        t
    }

    fn apply(&mut self, s: &Sect<'_>) -> Result<(), ConfigError> {
        s.only(MECH_KEYS)?;
        for (i, key) in ["fixed_x", "fixed_y", "fixed_z"].iter().enumerate() {
            if let Some(v) = s.f64(key)? {
                self.fixed[i] = Some(v);
            }
        }
        for (i, key) in ["plate_x", "plate_y", "plate_z"].iter().enumerate() {
            if let Some(v) = s.f64(key)? {
                self.plate[i] = Some(v);
            }
        }
        if let Some(v) = s.vec3("traction")? {
            self.traction = Some(v);
        }
        Ok(())
    }

    /// Canonical order: fixed components, plates, traction.
    fn to_bcs(&self) -> Vec<MechBoundary> {
        let mut out = Vec::new();
        for (i, v) in self.fixed.iter().enumerate() {
            if let Some(value) = *v {
                out.push(MechBoundary::Fixed {
                    axis: AXES[i],
                    value,
                });
            }
        }
        for (i, v) in self.plate.iter().enumerate() {
            if let Some(force) = *v {
                out.push(MechBoundary::RigidPlate {
                    axis: AXES[i],
                    force,
                });
            }
        }
        if let Some(t) = self.traction {
            out.push(MechBoundary::Traction(Vector3::from(t)));
        }
        out
    }
}

#[derive(Debug, Clone, Default)]
struct FlowTag {
    kind: Option<String>,
    value: Option<f64>,
}

impl FlowTag {
    fn from_bcs(bc: &FlowBoundary) -> Self {
        match *bc {
            FlowBoundary::NoFlow => FlowTag {
                kind: Some("no_flow".into()),
                value: None,
            },
            FlowBoundary::FixedPressure(v) => FlowTag {
                kind: Some("fixed_pressure".into()),
                value: Some(v),
            },
        }
    }

    fn apply(&mut self, s: &Sect<'_>) -> Result<(), ConfigError> {
        s.only(&["type", "value"])?;
        if let Some(k) = s.raw("type") {
            if k != "fixed_pressure" && k != "no_flow" {
                return Err(s.err(
                    "type",
                    format!("expected `fixed_pressure` or `no_flow`, got `{k}`"),
                ));
            }
            self.kind = Some(k.to_string());
            self.value = None;
        }
        if let Some(v) = s.f64("value")? {
            self.value = Some(v);
        }
        Ok(())
    }

    fn resolve(&self, tag: &str) -> Result<FlowBoundary, ConfigError> {
        let field = format!("bc.{tag}.flow");
        match (self.kind.as_deref(), self.value) {
            (Some("fixed_pressure"), Some(v)) => Ok(FlowBoundary::FixedPressure(v)),
            (Some("fixed_pressure"), None) => Err(invalid(field, "fixed_pressure needs a `value`")),
            (Some("no_flow"), None) => Ok(FlowBoundary::NoFlow),
            (Some(_), Some(_)) => Err(invalid(field, "`value` only applies to fixed_pressure")),
            _ => Err(invalid(field, "missing `type`")),
        }
    }
}

/// Values collected while sections are merged over the preset.
#[derive(Debug, Clone)]
struct Draft {
    preset: Option<Preset>,
    mesh_flow: Option<MeshSource>,
    mesh_mech: Option<MeshSource>,
    material: Option<PoroelasticMaterial>,
    coupling: CouplingConfig,
    schedule: Option<TimeSchedule>,
    initial_pressure: f64,
    flow: BTreeMap<String, FlowTag>,
    mech: BTreeMap<String, MechTag>,
    probes: Vec<Probe>,
    output: OutputConfig,
}

impl Draft {
    fn empty() -> Self {
        Draft {
            preset: None,
            mesh_flow: None,
            mesh_mech: None,
            material: None,
            coupling: CouplingConfig::default(),
            schedule: None,
            initial_pressure: 0.0,
            flow: BTreeMap::new(),
            mech: BTreeMap::new(),
            probes: Vec::new(),
            output: OutputConfig::default(),
        }
    }

    /// The benchmark defaults: fine flow box, coarse mechanics box, drained
    /// top edge, rigid plate on `xmax`, probe at the no-flow corner.
    fn mandel() -> Self {
        let mc = MandelConfig::default();
        let boxed = |c: (usize, usize)| MeshSource::Box {
            cells: [c.0, c.1, 1],
            lengths: [mc.a_x, mc.b_y, mc.t_z],
        };
        let probe = mc.probe();
        let coupling = mc.coupling();
        Draft {
            preset: Some(Preset::Mandel),
            mesh_flow: Some(boxed(mc.fine_cells)),
            mesh_mech: Some(boxed(mc.coarse_cells)),
            material: Some(mc.material.clone()),
            schedule: Some(coupling.schedule.clone()),
            coupling,
            initial_pressure: mc.initial_pressure,
            flow: mc
                .flow_bc()
                .tags
                .iter()
                .map(|(k, v)| (k.clone(), FlowTag::from_bcs(v)))
                .collect(),
            mech: mc
                .mech_bc()
                .tags
                .iter()
                .map(|(k, v)| (k.clone(), MechTag::from_bcs(v)))
                .collect(),
            probes: vec![probe],
            output: OutputConfig {
                cadence: 8,
                ..OutputConfig::default()
            },
        }
    }
}

fn check_name(kind: &str, name: &str) -> Result<(), ConfigError> {
    let ok = !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
    if ok {
        Ok(())
    } else {
        Err(invalid(
            kind,
            format!("`{name}` must use only letters, digits, `_` or `-`"),
        ))
    }
}

fn mesh_bounds(mesh: &TetMesh) -> (Point3<f64>, Point3<f64>) {
    let mut lo = Point3::from([f64::INFINITY; 3]);
    let mut hi = Point3::from([f64::NEG_INFINITY; 3]);
    for p in mesh.nodes() {
        for i in 0..3 {
            lo[i] = lo[i].min(p[i]);
            hi[i] = hi[i].max(p[i]);
        }
    }
    (lo, hi)
}

impl RunConfig {
    /// Parses and validates a configuration; relative paths resolve against
    /// `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let doc = Doc::parse(text)?;

        let mut draft = Draft::empty();
        if let Some(top) = doc.section(None::<&str>) {
            top.only(&["preset"])?;
            match top.raw("preset") {
                None => {}
                Some("mandel") => draft = Draft::mandel(),
                Some(other) => {
                    return Err(top.err(
                        "preset",
                        format!("unknown preset `{other}` (known: mandel)"),
                    ))
                }
            }
        }
        let base_material = draft.material.clone();

        for s in doc.sections() {
            let Some(name) = s.name.clone() else { continue };
            let parts: Vec<&str> = name.split('.').collect();
            match parts.as_slice() {
                ["meshes"] => {
                    s.only(&["flow", "mech"])?;
                    if let Some(v) = s.parse_with("flow", MeshSource::parse)? {
                        draft.mesh_flow = Some(v);
                    }
                    if let Some(v) = s.parse_with("mech", MeshSource::parse)? {
                        draft.mesh_mech = Some(v);
                    }
                }
                ["material"] => {
                    draft.material = Some(apply_material(Some(&s), base_material.as_ref())?);
                }
                ["coupling"] => apply_coupling(&s, &mut draft)?,
                ["bc", tag, "flow"] => {
                    check_name("bc tag", tag)?;
                    draft.flow.entry(tag.to_string()).or_default().apply(&s)?;
                }
                ["bc", tag, "mech"] => {
                    check_name("bc tag", tag)?;
                    draft.mech.entry(tag.to_string()).or_default().apply(&s)?;
                }
                ["probes"] => {
                    for (k, _) in s.keys() {
                        check_name("probes", k)?;
                        let p = Point3::from(s.vec3(k)?.expect("key exists"));
                        match draft.probes.iter_mut().find(|pr| pr.name == k) {
                            Some(pr) => pr.point = p,
                            None => draft.probes.push(Probe {
                                name: k.to_string(),
                                point: p,
                            }),
                        }
                    }
                }
                ["output"] => {
                    s.only(&["directory", "cadence", "formats"])?;
                    if let Some(d) = s.raw("directory") {
                        draft.output.directory = d.to_string();
                    }
                    s.set_usize("cadence", &mut draft.output.cadence)?;
                    if let Some(f) = s.raw("formats") {
                        draft.output.vtk = false;
                        draft.output.csv = false;
                        for tok in f.split_whitespace() {
                            match tok {
                                "vtk" => draft.output.vtk = true,
                                "csv" => draft.output.csv = true,
                                _ => {
                                    return Err(s.err(
                                        "formats",
                                        format!("unknown format `{tok}` (known: vtk, csv)"),
                                    ))
                                }
                            }
                        }
                    }
                }
                _ => {
                    return Err(ConfigError::Parse {
                        line: doc.header_line(&name),
                        message: format!("unknown section [{name}]"),
                    })
                }
            }
        }
        if draft.material.is_none() {
            // Reports the missing Biot modulus choice.
            apply_material(None, None)?;
        }
        Self::finish(draft, base_dir)
    }

    fn finish(d: Draft, base_dir: &Path) -> Result<Self, ConfigError> {
        let mesh_flow = d
            .mesh_flow
            .ok_or_else(|| invalid("meshes.flow", "is required"))?;
        let mesh_mech = d
            .mesh_mech
            .ok_or_else(|| invalid("meshes.mech", "is required"))?;
        let material = d.material.expect("checked by the caller");

        let mut coupling = d.coupling;
        coupling.schedule = d.schedule.ok_or_else(|| {
            invalid(
                "coupling.schedule",
                "give `schedule` or both `dt` and `n_steps`",
            )
        })?;
        if coupling.schedule.n_steps() == 0 {
            return Err(invalid("coupling.schedule", "needs at least one step"));
        }
        coupling
            .validate()
            .map_err(|e| invalid("coupling", e.to_string()))?;
        if d.output.cadence == 0 {
            return Err(invalid("output.cadence", "must be >= 1"));
        }

        let flow_mesh = mesh_flow.load("meshes.flow", base_dir)?;
        let mech_mesh = mesh_mech.load("meshes.mech", base_dir)?;

        let mut flow_bc = FlowBcSpec::default();
        for (tag, ft) in &d.flow {
            if !flow_mesh.has_tag(tag) {
                return Err(invalid(
                    format!("bc.{tag}.flow"),
                    "tag does not exist in the flow mesh",
                ));
            }
            flow_bc.tags.insert(tag.clone(), ft.resolve(tag)?);
        }
        let mut mech_bc = MechBcSpec::default();
        for (tag, mt) in &d.mech {
            if !mech_mesh.has_tag(tag) {
                return Err(invalid(
                    format!("bc.{tag}.mech"),
                    "tag does not exist in the mechanics mesh",
                ));
            }
            let list = mt.to_bcs();
            if !list.is_empty() {
                mech_bc.tags.insert(tag.clone(), list);
            }
        }
        for p in &d.probes {
            if flow_mesh
                .locate(&p.point, twogrid::geometry::DEFAULT_CONTAINMENT_TOL)
                .is_none()
            {
                return Err(invalid(
                    format!("probes.{}", p.name),
                    "point lies outside the flow mesh",
                ));
            }
        }

        let cfg = RunConfig {
            preset: d.preset,
            mesh_flow,
            mesh_mech,
            flow_mesh,
            mech_mesh,
            material,
            coupling,
            initial_pressure: d.initial_pressure,
            flow_bc,
            mech_bc,
            probes: d.probes,
            output: d.output,
            base_dir: base_dir.to_path_buf(),
        };
        cfg.analytic()?;
        Ok(cfg)
    }

    /// Analytic reference for the probes when the Mandel preset is active:
    /// half-width from the flow mesh's y extent and the plate force on
    /// `xmax` spread over the z extent.
    pub fn analytic(&self) -> Result<Option<MandelParams>, ConfigError> {
        if self.preset != Some(Preset::Mandel) {
            return Ok(None);
        }
        let plate = self
            .mech_bc
            .tags
            .values()
            .flatten()
            .find_map(|bc| match *bc {
                MechBoundary::RigidPlate {
                    axis: Axis::X,
                    force,
                } => Some(force),
                _ => None,
            });
        let Some(plate) = plate else {
            return Ok(None);
        };
        let (lo, hi) = mesh_bounds(&self.flow_mesh);
        let a = hi.y - lo.y;
        let thickness = hi.z - lo.z;
        MandelParams::new(
            &self.material,
            a,
            -plate / thickness,
            MandelConfig::default().n_terms,
        )
        .map(Some)
        .map_err(|e| invalid("preset", e.to_string()))
    }

    pub fn output_dir(&self) -> PathBuf {
        self.base_dir.join(&self.output.directory)
    }

    /// Materialized configuration text; parsing it yields `self` again.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if self.preset == Some(Preset::Mandel) {
            out.push_str("preset = mandel\n\n");
        }
        let _ = writeln!(out, "[meshes]");
        let _ = writeln!(out, "flow = {}", self.mesh_flow.text());
        let _ = writeln!(out, "mech = {}", self.mesh_mech.text());
        out.push('\n');
        material_text(&mut out, &self.material);
        out.push('\n');
        let c = &self.coupling;
        let _ = writeln!(out, "[coupling]");
        let _ = writeln!(out, "schedule = {}", schedule_text(&c.schedule));
        let _ = writeln!(out, "fs_tol = {}", num(c.fs_tol));
        let _ = writeln!(out, "fs_maxiter = {}", c.fs_maxiter);
        let _ = writeln!(out, "p_scale = {}", num(c.p_scale));
        let _ = writeln!(
            out,
            "continue_on_nonconvergence = {}",
            c.continue_on_nonconvergence
        );
        let _ = writeln!(out, "initial_pressure = {}", num(self.initial_pressure));
        for (tag, bc) in &self.flow_bc.tags {
            let _ = writeln!(out, "\n[bc.{tag}.flow]");
            match bc {
                FlowBoundary::NoFlow => {
                    let _ = writeln!(out, "type = no_flow");
                }
                FlowBoundary::FixedPressure(v) => {
                    let _ = writeln!(out, "type = fixed_pressure\nvalue = {}", num(*v));
                }
            }
        }
        for (tag, list) in &self.mech_bc.tags {
            let _ = writeln!(out, "\n[bc.{tag}.mech]");
            for bc in list {
                let axis = |a: Axis| ["x", "y", "z"][a.index()];
                let _ = match *bc {
                    MechBoundary::Fixed { axis: a, value } => {
                        writeln!(out, "fixed_{} = {}", axis(a), num(value))
                    }
                    MechBoundary::RigidPlate { axis: a, force } => {
                        writeln!(out, "plate_{} = {}", axis(a), num(force))
                    }
                    MechBoundary::Traction(t) => writeln!(out, "traction = {}", nums(t.as_slice())),
                };
            }
        }
        if !self.probes.is_empty() {
            let _ = writeln!(out, "\n[probes]");
            for p in &self.probes {
                let _ = writeln!(out, "{} = {}", p.name, nums(p.point.coords.as_slice()));
            }
        }
        let o = &self.output;
        let formats: Vec<&str> = [(o.vtk, "vtk"), (o.csv, "csv")]
            .iter()
            .filter(|(on, _)| *on)
            .map(|(_, n)| *n)
            .collect();
        let _ = writeln!(out, "\n[output]");
        let _ = writeln!(out, "directory = {}", o.directory);
        let _ = writeln!(out, "cadence = {}", o.cadence);
        let _ = writeln!(out, "formats = {}", formats.join(" ").trim_end());
        out
    }
}

fn apply_coupling(s: &Sect<'_>, d: &mut Draft) -> Result<(), ConfigError> {
    s.only(&[
        "dt",
        "n_steps",
        "schedule",
        "fs_tol",
        "fs_maxiter",
        "p_scale",
        "continue_on_nonconvergence",
        "initial_pressure",
    ])?;
    let sched = s.parse_with("schedule", parse_schedule)?;
    let dt = s.f64("dt")?;
    let n = s.usize("n_steps")?;
    match (sched, dt, n) {
        (Some(sc), None, None) => d.schedule = Some(sc),
        (None, Some(dt), Some(n_steps)) => d.schedule = Some(TimeSchedule::Uniform { dt, n_steps }),
        (None, None, None) => {}
        (Some(_), _, _) => {
            return Err(invalid(
                "coupling.schedule",
                "give `schedule` or `dt` + `n_steps`, not both",
            ))
        }
        _ => {
            return Err(invalid(
                "coupling.dt",
                "`dt` and `n_steps` must be given together",
            ))
        }
    }
    s.set_f64("fs_tol", &mut d.coupling.fs_tol)?;
    s.set_usize("fs_maxiter", &mut d.coupling.fs_maxiter)?;
    s.set_f64("p_scale", &mut d.coupling.p_scale)?;
    if let Some(b) = s.bool("continue_on_nonconvergence")? {
        d.coupling.continue_on_nonconvergence = b;
    }
    s.set_f64("initial_pressure", &mut d.initial_pressure)?;
    Ok(())
}

/// Convenience wrapper around [`RunConfig::parse`].
pub fn parse_config(text: &str, base_dir: &Path) -> Result<RunConfig, ConfigError> {
    RunConfig::parse(text, base_dir)
}

// ---------------------------------------------------------------------------
// Benchmark configuration for `mandel --config`
// ---------------------------------------------------------------------------

const MANDEL_KEYS: &[&str] = &[
    "a_x",
    "b_y",
    "t_z",
    "fine_cells",
    "coarse_cells",
    "mean_stress",
    "schedule",
    "fs_tol",
    "fs_maxiter",
    "p_scale",
    "n_terms",
    "initial_pressure",
    "dt_first",
    "dt_max",
    "dt_ratio",
    "end_time",
];

fn parse_cells(v: &str) -> Result<(usize, usize), String> {
    match v.split_whitespace().collect::<Vec<_>>().as_slice() {
        [a, b] => Ok((parse_count(a)?, parse_count(b)?)),
        _ => Err(format!("expected `NX NY`, got `{v}`")),
    }
}

/// `[mandel]` and `[material]` sections over the benchmark defaults.
pub fn parse_mandel_config(text: &str) -> Result<MandelConfig, ConfigError> {
    let doc = Doc::parse(text)?;
    let mut cfg = MandelConfig::default();
    let mut material = None;
    for s in doc.sections() {
        match s.name.as_deref() {
            None => s.only(&[])?,
            Some("mandel") => {
                s.only(MANDEL_KEYS)?;
                s.set_f64("a_x", &mut cfg.a_x)?;
                s.set_f64("b_y", &mut cfg.b_y)?;
                s.set_f64("t_z", &mut cfg.t_z)?;
                if let Some(c) = s.parse_with("fine_cells", parse_cells)? {
                    cfg.fine_cells = c;
                }
                if let Some(c) = s.parse_with("coarse_cells", parse_cells)? {
                    cfg.coarse_cells = c;
                }
                s.set_f64("mean_stress", &mut cfg.mean_stress)?;
                if let Some(sc) = s.parse_with("schedule", parse_schedule)? {
                    cfg.schedule = Some(sc);
                }
                s.set_f64("fs_tol", &mut cfg.fs_tol)?;
                s.set_usize("fs_maxiter", &mut cfg.fs_maxiter)?;
                s.set_f64("p_scale", &mut cfg.p_scale)?;
                s.set_usize("n_terms", &mut cfg.n_terms)?;
                s.set_f64("initial_pressure", &mut cfg.initial_pressure)?;
                s.set_f64("dt_first", &mut cfg.dt_first)?;
                s.set_f64("dt_max", &mut cfg.dt_max)?;
                s.set_f64("dt_ratio", &mut cfg.dt_ratio)?;
                s.set_f64("end_time", &mut cfg.end_time)?;
            }
            Some("material") => material = Some(apply_material(Some(&s), Some(&cfg.material))?),
            Some(other) => {
                return Err(ConfigError::Parse {
                    line: doc.header_line(other),
                    message: format!("unknown section [{other}] (expected [mandel] or [material])"),
                })
            }
        }
    }
    if let Some(m) = material {
        cfg.material = m;
    }
    for (field, v) in [
        ("mandel.a_x", cfg.a_x),
        ("mandel.b_y", cfg.b_y),
        ("mandel.t_z", cfg.t_z),
    ] {
        if !(v > 0.0) {
            return Err(invalid(field, "must be > 0"));
        }
    }
    for (field, c) in [
        ("mandel.fine_cells", cfg.fine_cells),
        ("mandel.coarse_cells", cfg.coarse_cells),
    ] {
        if c.0 == 0 || c.1 == 0 {
            return Err(invalid(field, "cell counts must be >= 1"));
        }
    }
    if !(cfg.dt_first > 0.0
        && cfg.dt_max >= cfg.dt_first
        && cfg.dt_ratio >= 1.0
        && cfg.end_time > 0.0)
    {
        return Err(invalid(
            "mandel.dt_first",
            "need dt_first > 0, dt_max >= dt_first, dt_ratio >= 1 and end_time > 0",
        ));
    }
    cfg.params().map_err(|e| invalid("mandel", e.to_string()))?;
    cfg.coupling()
        .validate()
        .map_err(|e| invalid("mandel", e.to_string()))?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_text_round_trips() {
        for s in [
            TimeSchedule::Uniform {
                dt: 0.1,
                n_steps: 3,
            },
            TimeSchedule::Geometric {
                dt_first: 1e-3,
                dt_max: 2.5,
                ratio: 1.25,
                n_steps: 40,
            },
            TimeSchedule::Explicit(vec![1.0, 0.3, 1e-9]),
        ] {
            assert_eq!(parse_schedule(&schedule_text(&s)).unwrap(), s);
        }
        assert!(parse_schedule("uniform 1").is_err());
        assert!(parse_schedule("explicit").is_err());
    }

    #[test]
    fn key_lines_are_tracked() {
        let text = "[meshes]\nflow = box 1 1 1 1 1 1\n\n[material]\nporosity = abc\n";
        let err = RunConfig::parse(text, Path::new(".")).unwrap_err();
        assert!(matches!(err, ConfigError::Parse { line: 5, .. }), "{err}");
    }

    #[test]
    fn duplicate_keys_are_rejected() {
        let err = Doc::parse("[a]\nx = 1\nx = 2\n").err().unwrap();
        assert_eq!(
            err,
            ConfigError::Parse {
                line: 3,
                message: "duplicate key `x`".into()
            }
        );
    }

    #[test]
    fn mesh_source_grammar() {
        let b = MeshSource::parse("box 2 3 4 1.0 2 3e1").unwrap();
        assert_eq!(
            b,
            MeshSource::Box {
                cells: [2, 3, 4],
                lengths: [1.0, 2.0, 30.0]
            }
        );
        assert_eq!(MeshSource::parse(&b.text()).unwrap(), b);
        assert_eq!(
            MeshSource::parse("meshes/a.tet").unwrap(),
            MeshSource::File("meshes/a.tet".into())
        );
        assert!(MeshSource::parse("box 1 2 3").is_err());
    }
}
