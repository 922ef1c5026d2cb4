//! Scenario description, the flat `section.key = value` format, built-in
//! templates and conversion into an assembled [`Problem`].

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::Vector2;

use crate::contact::{ConstraintMode, GammaScaling};
use crate::elasticity::{assemble_load, assemble_traction, Material};
use crate::error::{Error, Result};
use crate::geometry::{BodyMesh, FacetTag, InterfaceMesh, Orientation, Point};
use crate::hybrid::{HybridModel, HybridSpace, HybridSpaceKind};
use crate::meshgen::{graded_axis, half_disc, rect_mesh, structured_block, HalfDiscParams, Side};
use crate::mesh_io::{read_interface, read_mesh};
use crate::solver::{BodyProblem, HybridProblem, NewtonOptions, Problem};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Components {
    X,
    Y,
    XY,
}

impl Components {
    pub fn as_str(self) -> &'static str {
        match self {
            Components::X => "x",
            Components::Y => "y",
            Components::XY => "xy",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "x" => Some(Components::X),
            "y" => Some(Components::Y),
            "xy" => Some(Components::XY),
            _ => None,
        }
    }

    pub fn indices(self) -> &'static [usize] {
        match self {
            Components::X => &[0],
            Components::Y => &[1],
            Components::XY => &[0, 1],
        }
    }

    fn directions(self) -> Vec<Point> {
        self.indices()
            .iter()
            .map(|&c| if c == 0 { Vector2::new(1.0, 0.0) } else { Vector2::new(0.0, 1.0) })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MeshSpec {
    /// Lower half-disc; arc facets with `|x - cx| <= contact` are contact.
    HalfDisc {
        center: [f64; 2],
        radius: f64,
        h_min: f64,
        h_max: f64,
        r_fine: f64,
        growth: f64,
        contact: f64,
    },
    /// Graded Q1 block, fine near `contact_side` over the x-range `fine` and
    /// `depth` into the block.
    Block {
        bounds: [f64; 4],
        h_min: f64,
        h_max: f64,
        ratio: f64,
        fine: [f64; 2],
        depth: f64,
        contact: [f64; 2],
        contact_side: Side,
    },
    /// Uniform Q1 rectangle.
    Rect {
        bounds: [f64; 4],
        cells: [usize; 2],
        contact: [f64; 2],
        contact_side: Side,
    },
    File(PathBuf),
}

impl MeshSpec {
    fn kind(&self) -> &'static str {
        match self {
            MeshSpec::HalfDisc { .. } => "halfdisc",
            MeshSpec::Block { .. } => "block",
            MeshSpec::Rect { .. } => "rect",
            MeshSpec::File(_) => "file",
        }
    }

    fn refined(&self, k: usize) -> Self {
        let f = k as f64;
        match self.clone() {
            MeshSpec::HalfDisc {
                center,
                radius,
                h_min,
                h_max,
                r_fine,
                growth,
                contact,
            } => MeshSpec::HalfDisc {
                center,
                radius,
                h_min: h_min / f,
                h_max: h_max / f,
                r_fine,
                growth: growth / f,
                contact,
            },
            MeshSpec::Block {
                bounds,
                h_min,
                h_max,
                ratio,
                fine,
                depth,
                contact,
                contact_side,
            } => MeshSpec::Block {
                bounds,
                h_min: h_min / f,
                h_max: h_max / f,
                // keeps the graded zone width so the size field scales as h/k
                ratio: ratio.powf(1.0 / f),
                fine,
                depth,
                contact,
                contact_side,
            },
            MeshSpec::Rect {
                bounds,
                cells,
                contact,
                contact_side,
            } => MeshSpec::Rect {
                bounds,
                cells: [cells[0] * k, cells[1] * k],
                contact,
                contact_side,
            },
            other => other,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BodySpec {
    pub mesh: MeshSpec,
    pub young: f64,
    pub poisson: f64,
    pub mode: ConstraintMode,
    pub gamma_mult: f64,
    /// Constant body force.
    pub force: [f64; 2],
    /// Total force spread uniformly over the facets of a boundary part.
    pub loads: Vec<(String, [f64; 2])>,
    /// Zero displacement components on a boundary part.
    pub dirichlet: Vec<(String, Components)>,
    /// Zero displacement components at the node located at a point.
    pub pins: Vec<([f64; 2], Components)>,
    /// Zero-mean displacement multipliers.
    pub mean: Option<Components>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum HybridGeometry {
    Line {
        start: [f64; 2],
        end: [f64; 2],
        count: usize,
        orient: Orientation,
    },
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct HybridSpec {
    pub space: HybridSpaceKind,
    pub geometry: HybridGeometry,
    pub model: HybridModel,
    pub mean: Option<Components>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub bodies: [BodySpec; 2],
    pub hybrid: HybridSpec,
    pub n_gauss: usize,
    pub subdivisions: Option<usize>,
    pub gamma_scaling: GammaScaling,
    pub tol: f64,
    pub max_iter: usize,
}

// ---------------------------------------------------------------- templates

impl Scenario {
    /// Half-disc pressed onto a block through a piecewise-constant hybrid
    /// layer on (-0.4, 0.4) tied to the block.
    pub fn hertz(constants: usize) -> Self {
        Self::hertz_with(constants, 0.008)
    }

    /// Hertz setup with contact-zone mesh size `h_min`.
    pub fn hertz_with(constants: usize, h_min: f64) -> Self {
        let disc = BodySpec {
            mesh: MeshSpec::HalfDisc {
                center: [0.0, 1.0],
                radius: 1.0,
                h_min,
                h_max: 0.1,
                r_fine: 0.25,
                growth: 0.25,
                contact: 0.45,
            },
            young: 2000.0,
            poisson: 0.3,
            mode: ConstraintMode::Inequality,
            gamma_mult: 10.0,
            force: [0.0, 0.0],
            loads: vec![("top".into(), [0.0, -50.0])],
            dirichlet: vec![],
            pins: vec![],
            mean: Some(Components::X),
        };
        let block = BodySpec {
            mesh: MeshSpec::Block {
                bounds: [-2.5, 2.5, -1.0, 0.0],
                h_min,
                h_max: 0.1,
                ratio: 1.15,
                fine: [-0.4, 0.4],
                depth: 0.25,
                contact: [-0.4, 0.4],
                contact_side: Side::Top,
            },
            young: 7000.0,
            poisson: 0.3,
            mode: ConstraintMode::Equality,
            gamma_mult: 10.0,
            force: [0.0, 0.0],
            loads: vec![],
            dirichlet: vec![("bottom".into(), Components::Y)],
            pins: vec![([0.0, -1.0], Components::X)],
            mean: None,
        };
        Scenario {
            bodies: [disc, block],
            hybrid: HybridSpec {
                space: HybridSpaceKind::P0Normal,
                geometry: HybridGeometry::Line {
                    start: [-0.4, 0.0],
                    end: [0.4, 0.0],
                    count: constants,
                    orient: Orientation::Left,
                },
                model: HybridModel::None,
                mean: None,
            },
            n_gauss: 2,
            subdivisions: None,
            gamma_scaling: GammaScaling::Facet,
            tol: 1e-8,
            max_iter: 50,
        }
    }

    /// Hertz geometry with a vector P1 hybrid layer carrying a taut string of
    /// stiffness `k_s` (`None` gives the stiffness-free layer on the same space).
    pub fn string_layer(k_s: Option<f64>, segments: usize, h_min: f64) -> Self {
        let mut s = Self::hertz_with(segments, h_min);
        s.hybrid.space = HybridSpaceKind::P1Vector;
        s.hybrid.model = match k_s {
            Some(k) => HybridModel::String { stiffness: k },
            None => HybridModel::None,
        };
        s.hybrid.mean = Some(Components::X);
        s
    }

    /// Two stacked unit blocks with matched `n x n` meshes; uniform pressure
    /// `p` on top. The upper block couples in `mode`, the lower one is tied.
    pub fn patch(mode: ConstraintMode, pressure: f64, n: usize) -> Self {
        let material = |mode, side| BodySpec {
            mesh: MeshSpec::Rect {
                bounds: if side == Side::Bottom {
                    [0.0, 1.0, 0.0, 1.0]
                } else {
                    [0.0, 1.0, -1.0, 0.0]
                },
                cells: [n, n],
                contact: [0.0, 1.0],
                contact_side: side,
            },
            young: 1000.0,
            poisson: 0.3,
            mode,
            gamma_mult: 10.0,
            force: [0.0, 0.0],
            loads: vec![],
            dirichlet: vec![],
            pins: vec![],
            mean: None,
        };
        let mut top = material(mode, Side::Bottom);
        top.loads = vec![("top".into(), [0.0, -pressure])];
        top.mean = Some(Components::X);
        let mut bottom = material(ConstraintMode::Equality, Side::Top);
        bottom.dirichlet = vec![("bottom".into(), Components::Y)];
        bottom.pins = vec![([0.0, -1.0], Components::X)];
        Scenario {
            bodies: [top, bottom],
            hybrid: HybridSpec {
                space: HybridSpaceKind::P0Normal,
                geometry: HybridGeometry::Line {
                    start: [0.0, 0.0],
                    end: [1.0, 0.0],
                    count: n,
                    orient: Orientation::Left,
                },
                model: HybridModel::None,
                mean: None,
            },
            n_gauss: 2,
            subdivisions: None,
            gamma_scaling: GammaScaling::Facet,
            tol: 1e-10,
            max_iter: 10,
        }
    }

    pub fn template(name: &str) -> Option<Self> {
        match name {
            "hertz" => Some(Self::hertz(1000)),
            "patch" => Some(Self::patch(ConstraintMode::Inequality, 1.0, 4)),
            "string" => Some(Self::string_layer(Some(20.0), 100, 0.02)),
            _ => None,
        }
    }

    /// Body meshes refined by `k` (mesh sizes divided, cell counts multiplied).
    pub fn refined(&self, k: usize) -> Self {
        let mut s = self.clone();
        for b in &mut s.bodies {
            b.mesh = b.mesh.refined(k.max(1));
        }
        s
    }

    pub fn set_hybrid_count(&mut self, count: usize) {
        if let HybridGeometry::Line { count: c, .. } = &mut self.hybrid.geometry {
            *c = count;
        }
    }

    pub fn newton_options(&self) -> NewtonOptions {
        NewtonOptions {
            tol_rel: self.tol,
            max_iter: self.max_iter,
        }
    }
}

// ---------------------------------------------------------------- writing

fn fmt_pair(p: [f64; 2]) -> String {
    format!("{} {}", p[0], p[1])
}

fn side_name(s: Side) -> &'static str {
    match s {
        Side::Bottom => "bottom",
        Side::Right => "right",
        Side::Top => "top",
        Side::Left => "left",
    }
}

fn parse_side(s: &str) -> Option<Side> {
    match s {
        "bottom" => Some(Side::Bottom),
        "right" => Some(Side::Right),
        "top" => Some(Side::Top),
        "left" => Some(Side::Left),
        _ => None,
    }
}

impl Scenario {
    pub fn write(&self) -> String {
        let mut s = String::new();
        for (i, b) in self.bodies.iter().enumerate() {
            let p = format!("body{}", i + 1);
            let mut kv = |k: &str, v: String| {
                let _ = writeln!(s, "{p}.{k} = {v}");
            };
            kv("mesh", b.mesh.kind().into());
            match &b.mesh {
                MeshSpec::HalfDisc {
                    center,
                    radius,
                    h_min,
                    h_max,
                    r_fine,
                    growth,
                    contact,
                } => {
                    kv("center", fmt_pair(*center));
                    kv("radius", radius.to_string());
                    kv("h_min", h_min.to_string());
                    kv("h_max", h_max.to_string());
                    kv("r_fine", r_fine.to_string());
                    kv("growth", growth.to_string());
                    kv("contact", contact.to_string());
                }
                MeshSpec::Block {
                    bounds,
                    h_min,
                    h_max,
                    ratio,
                    fine,
                    depth,
                    contact,
                    contact_side,
                } => {
                    kv("bounds", format!("{} {} {} {}", bounds[0], bounds[1], bounds[2], bounds[3]));
                    kv("h_min", h_min.to_string());
                    kv("h_max", h_max.to_string());
                    kv("ratio", ratio.to_string());
                    kv("fine", fmt_pair(*fine));
                    kv("depth", depth.to_string());
                    kv("contact", fmt_pair(*contact));
                    kv("contact_side", side_name(*contact_side).into());
                }
                MeshSpec::Rect {
                    bounds,
                    cells,
                    contact,
                    contact_side,
                } => {
                    kv("bounds", format!("{} {} {} {}", bounds[0], bounds[1], bounds[2], bounds[3]));
                    kv("cells", format!("{} {}", cells[0], cells[1]));
                    kv("contact", fmt_pair(*contact));
                    kv("contact_side", side_name(*contact_side).into());
                }
                MeshSpec::File(path) => kv("file", path.display().to_string()),
            }
            kv("young", b.young.to_string());
            kv("poisson", b.poisson.to_string());
            kv("mode", b.mode.as_str().into());
            kv("gamma_mult", b.gamma_mult.to_string());
            kv("force", fmt_pair(b.force));
            if !b.loads.is_empty() {
                let v: Vec<String> = b
                    .loads
                    .iter()
                    .map(|(side, f)| format!("{side} {}", fmt_pair(*f)))
                    .collect();
                kv("load", v.join(", "));
            }
            if !b.dirichlet.is_empty() {
                let v: Vec<String> = b
                    .dirichlet
                    .iter()
                    .map(|(side, c)| format!("{side}:{}", c.as_str()))
                    .collect();
                kv("dirichlet", v.join(", "));
            }
            if !b.pins.is_empty() {
                let v: Vec<String> = b
                    .pins
                    .iter()
                    .map(|(p, c)| format!("{} {}", fmt_pair(*p), c.as_str()))
                    .collect();
                kv("pin", v.join(", "));
            }
            if let Some(m) = b.mean {
                kv("mean", m.as_str().into());
            }
        }
        let h = &self.hybrid;
        let _ = writeln!(s, "hybrid.space = {}", h.space.as_str());
        match &h.geometry {
            HybridGeometry::Line {
                start,
                end,
                count,
                orient,
            } => {
                let _ = writeln!(s, "hybrid.start = {}", fmt_pair(*start));
                let _ = writeln!(s, "hybrid.end = {}", fmt_pair(*end));
                let _ = writeln!(s, "hybrid.count = {count}");
                let _ = writeln!(s, "hybrid.orient = {}", orient.as_str());
            }
            HybridGeometry::File(p) => {
                let _ = writeln!(s, "hybrid.file = {}", p.display());
            }
        }
        let _ = writeln!(s, "hybrid.model = {}", h.model.name());
        if h.model.is_case2() {
            let _ = writeln!(s, "hybrid.stiffness = {}", h.model.stiffness());
        }
        if let Some(m) = h.mean {
            let _ = writeln!(s, "hybrid.mean = {}", m.as_str());
        }
        let _ = writeln!(s, "quadrature.gauss = {}", self.n_gauss);
        let _ = writeln!(
            s,
            "quadrature.subdivisions = {}",
            self.subdivisions.map_or("auto".to_string(), |n| n.to_string())
        );
        let _ = writeln!(s, "nitsche.scaling = {}", self.gamma_scaling.as_str());
        let _ = writeln!(s, "solver.tol = {}", self.tol);
        let _ = writeln!(s, "solver.max_iter = {}", self.max_iter);
        s
    }
}

// ---------------------------------------------------------------- parsing

struct Entries {
    map: BTreeMap<String, (String, usize)>,
    used: HashSet<String>,
    errors: Vec<String>,
}

impl Entries {
    fn raw(&mut self, key: &str) -> Option<(String, usize)> {
        self.used.insert(key.to_string());
        self.map.get(key).cloned()
    }

    fn has(&self, key: &str) -> bool {
        self.map.contains_key(key)
    }

    fn required<T>(&mut self, key: &str, f: impl Fn(&str) -> Option<T>) -> Option<T> {
        match self.raw(key) {
            None => {
                self.errors.push(format!("missing required key `{key}`"));
                None
            }
            Some((v, line)) => {
                let r = f(&v);
                if r.is_none() {
                    self.errors
                        .push(format!("line {line}: invalid value `{v}` for `{key}`"));
                }
                r
            }
        }
    }

    fn optional<T>(&mut self, key: &str, f: impl Fn(&str) -> Option<T>) -> Option<Option<T>> {
        match self.raw(key) {
            None => Some(None),
            Some((v, line)) => match f(&v) {
                Some(x) => Some(Some(x)),
                None => {
                    self.errors
                        .push(format!("line {line}: invalid value `{v}` for `{key}`"));
                    None
                }
            },
        }
    }
}

fn f64s<const N: usize>(s: &str) -> Option<[f64; N]> {
    let v: Vec<f64> = s
        .split_whitespace()
        .map(|t| t.parse().ok())
        .collect::<Option<_>>()?;
    v.try_into().ok()
}

fn real(s: &str) -> Option<f64> {
    s.trim().parse().ok().filter(|x: &f64| x.is_finite())
}

fn count(s: &str) -> Option<usize> {
    s.trim().parse().ok()
}

fn list<T>(s: &str, f: impl Fn(&str) -> Option<T>) -> Option<Vec<T>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(f)
        .collect()
}

fn parse_body(e: &mut Entries, i: usize) -> Option<BodySpec> {
    let p = |k: &str| format!("body{i}.{k}");
    let kind = e.required(&p("mesh"), |s| Some(s.trim().to_string()));
    let mesh = match kind.as_deref() {
        Some("halfdisc") => {
            let center = e.required(&p("center"), f64s::<2>);
            let radius = e.required(&p("radius"), real);
            let h_min = e.required(&p("h_min"), real);
            let h_max = e.required(&p("h_max"), real);
            let r_fine = e.required(&p("r_fine"), real);
            let growth = e.required(&p("growth"), real);
            let contact = e.required(&p("contact"), real);
            Some(MeshSpec::HalfDisc {
                center: center?,
                radius: radius?,
                h_min: h_min?,
                h_max: h_max?,
                r_fine: r_fine?,
                growth: growth?,
                contact: contact?,
            })
        }
        Some("block") => {
            let bounds = e.required(&p("bounds"), f64s::<4>);
            let h_min = e.required(&p("h_min"), real);
            let h_max = e.required(&p("h_max"), real);
            let ratio = e.required(&p("ratio"), real);
            let fine = e.required(&p("fine"), f64s::<2>);
            let depth = e.required(&p("depth"), real);
            let contact = e.required(&p("contact"), f64s::<2>);
            let side = e.required(&p("contact_side"), |s| parse_side(s.trim()));
            Some(MeshSpec::Block {
                bounds: bounds?,
                h_min: h_min?,
                h_max: h_max?,
                ratio: ratio?,
                fine: fine?,
                depth: depth?,
                contact: contact?,
                contact_side: side?,
            })
        }
        Some("rect") => {
            let bounds = e.required(&p("bounds"), f64s::<4>);
            let cells = e.required(&p("cells"), |s| {
                let v: Vec<usize> = s.split_whitespace().map(|t| t.parse().ok()).collect::<Option<_>>()?;
                v.try_into().ok()
            });
            let contact = e.required(&p("contact"), f64s::<2>);
            let side = e.required(&p("contact_side"), |s| parse_side(s.trim()));
            Some(MeshSpec::Rect {
                bounds: bounds?,
                cells: cells?,
                contact: contact?,
                contact_side: side?,
            })
        }
        Some("file") => e
            .required(&p("file"), |s| Some(PathBuf::from(s.trim())))
            .map(MeshSpec::File),
        Some(other) => {
            e.errors.push(format!(
                "unknown mesh kind `{other}` for `{}` (halfdisc, block, rect, file)",
                p("mesh")
            ));
            None
        }
        None => None,
    };
    let young = e.required(&p("young"), real);
    let poisson = e.required(&p("poisson"), real);
    let mode = e.required(&p("mode"), ConstraintMode::parse);
    let gamma_mult = e.optional(&p("gamma_mult"), real).map(|v| v.unwrap_or(10.0));
    let force = e.optional(&p("force"), f64s::<2>).map(|v| v.unwrap_or([0.0, 0.0]));
    let loads = e
        .optional(&p("load"), |s| {
            list(s, |t| {
                let (side, rest) = t.split_once(char::is_whitespace)?;
                Some((side.to_string(), f64s::<2>(rest)?))
            })
        })
        .map(Option::unwrap_or_default);
    let dirichlet = e
        .optional(&p("dirichlet"), |s| {
            list(s, |t| {
                let (side, c) = t.split_once(':')?;
                Some((side.trim().to_string(), Components::parse(c)?))
            })
        })
        .map(Option::unwrap_or_default);
    let pins = e
        .optional(&p("pin"), |s| {
            list(s, |t| {
                let toks: Vec<&str> = t.split_whitespace().collect();
                if toks.len() != 3 {
                    return None;
                }
                Some(([real(toks[0])?, real(toks[1])?], Components::parse(toks[2])?))
            })
        })
        .map(Option::unwrap_or_default);
    let mean = e.optional(&p("mean"), Components::parse);
    Some(BodySpec {
        mesh: mesh?,
        young: young?,
        poisson: poisson?,
        mode: mode?,
        gamma_mult: gamma_mult?,
        force: force?,
        loads: loads?,
        dirichlet: dirichlet?,
        pins: pins?,
        mean: mean?,
    })
}

fn parse_hybrid(e: &mut Entries) -> Option<HybridSpec> {
    let space = e.required("hybrid.space", HybridSpaceKind::parse);
    let geometry = if e.has("hybrid.file") {
        e.required("hybrid.file", |s| Some(PathBuf::from(s.trim())))
            .map(HybridGeometry::File)
    } else {
        let start = e.required("hybrid.start", f64s::<2>);
        let end = e.required("hybrid.end", f64s::<2>);
        let count = e.required("hybrid.count", count);
        let orient = e.required("hybrid.orient", Orientation::parse);
        Some(HybridGeometry::Line {
            start: start?,
            end: end?,
            count: count?,
            orient: orient?,
        })
    };
    let model_name = e
        .optional("hybrid.model", |s| Some(s.trim().to_string()))
        .map(|m| m.unwrap_or_else(|| "none".into()));
    let stiffness = e.optional("hybrid.stiffness", real);
    let model = match (model_name.as_deref(), stiffness) {
        (Some("none"), Some(None)) => Some(HybridModel::None),
        (Some("none"), Some(Some(_))) => {
            e.errors
                .push("`hybrid.stiffness` given but `hybrid.model = none`".into());
            None
        }
        (Some("string"), Some(k)) => Some(HybridModel::String {
            stiffness: k.unwrap_or(0.0),
        }),
        (Some("beam"), Some(k)) => Some(HybridModel::Beam {
            stiffness: k.unwrap_or(0.0),
        }),
        (Some(other), Some(_)) => {
            e.errors.push(format!(
                "unknown hybrid model `{other}` (none, string, beam)"
            ));
            None
        }
        _ => None,
    };
    let mean = e.optional("hybrid.mean", Components::parse);
    Some(HybridSpec {
        space: space?,
        geometry: geometry?,
        model: model?,
        mean: mean?,
    })
}

impl Scenario {
    /// Parses and validates; every problem found is reported.
    pub fn parse(text: &str) -> Result<Self> {
        let mut e = Entries {
            map: BTreeMap::new(),
            used: HashSet::new(),
            errors: Vec::new(),
        };
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            match line.split_once('=') {
                Some((k, v)) => {
                    let k = k.trim().to_string();
                    if e.map.insert(k.clone(), (v.trim().to_string(), i + 1)).is_some() {
                        e.errors.push(format!("line {}: duplicate key `{k}`", i + 1));
                    }
                }
                None => e
                    .errors
                    .push(format!("line {}: expected `section.key = value`", i + 1)),
            }
        }
        let b1 = parse_body(&mut e, 1);
        let b2 = parse_body(&mut e, 2);
        let hybrid = parse_hybrid(&mut e);
        let n_gauss = e.optional("quadrature.gauss", count).map(|v| v.unwrap_or(2));
        let subdivisions = e
            .optional("quadrature.subdivisions", |s| match s.trim() {
                "auto" => Some(None),
                t => t.parse().ok().map(Some),
            })
            .map(|v| v.unwrap_or(None));
        let scaling = e
            .optional("nitsche.scaling", GammaScaling::parse)
            .map(Option::unwrap_or_default);
        let tol = e.optional("solver.tol", real).map(|v| v.unwrap_or(1e-8));
        let max_iter = e.optional("solver.max_iter", count).map(|v| v.unwrap_or(50));

        let mut unknown: Vec<String> = e
            .map
            .iter()
            .filter(|(k, _)| !e.used.contains(*k))
            .map(|(k, (_, line))| format!("line {line}: unknown key `{k}`"))
            .collect();
        unknown.sort();
        e.errors.extend(unknown);

        let parsed = (|| {
            Some(Scenario {
                bodies: [b1?, b2?],
                hybrid: hybrid?,
                n_gauss: n_gauss?,
                subdivisions: subdivisions?,
                gamma_scaling: scaling?,
                tol: tol?,
                max_iter: max_iter?,
            })
        })();
        match parsed {
            Some(s) => {
                let mut errors = e.errors;
                errors.extend(s.validation_errors());
                if errors.is_empty() {
                    Ok(s)
                } else {
                    Err(Error::Validation(errors))
                }
            }
            None => Err(Error::Validation(e.errors)),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut s = Self::parse(&text)?;
        // relative mesh paths resolve against the scenario file
        let base = path.parent().unwrap_or(Path::new("."));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for b in &mut s.bodies {
            if let MeshSpec::File(p) = &mut b.mesh {
                fix(p);
            }
        }
        if let HybridGeometry::File(p) = &mut s.hybrid.geometry {
            fix(p);
        }
        let errors = s.validation_errors();
        if errors.is_empty() {
            Ok(s)
        } else {
            Err(Error::Validation(errors))
        }
    }

    /// All consistency problems, including file existence and singularity
    /// risks that can be seen without assembling.
    pub fn validation_errors(&self) -> Vec<String> {
        let mut errs = Vec::new();
        for (i, b) in self.bodies.iter().enumerate() {
            let n = i + 1;
            if let Err(e) = Material::new(b.young, b.poisson) {
                errs.push(format!("body{n}: {e}"));
            }
            if !(b.gamma_mult > 0.0) {
                errs.push(format!("body{n}: gamma_mult must be positive"));
            }
            match &b.mesh {
                MeshSpec::HalfDisc {
                    radius,
                    h_min,
                    h_max,
                    r_fine,
                    growth,
                    contact,
                    ..
                } => {
                    if !(*radius > 0.0 && *h_min > 0.0 && *h_max >= *h_min && *r_fine >= 0.0 && *growth >= 0.0) {
                        errs.push(format!("body{n}: half-disc needs radius > 0, 0 < h_min <= h_max, r_fine >= 0, growth >= 0"));
                    }
                    if !(*contact > 0.0) {
                        errs.push(format!("body{n}: contact half-width must be positive"));
                    }
                }
                MeshSpec::Block {
                    bounds,
                    h_min,
                    h_max,
                    ratio,
                    fine,
                    depth,
                    contact,
                    contact_side,
                } => {
                    if !(bounds[0] < bounds[1] && bounds[2] < bounds[3]) {
                        errs.push(format!("body{n}: bounds must be `x0 x1 y0 y1` with x0 < x1, y0 < y1"));
                    }
                    if !(*h_min > 0.0 && *h_max >= *h_min && *ratio >= 1.0) {
                        errs.push(format!("body{n}: block needs 0 < h_min <= h_max and ratio >= 1"));
                    }
                    if !(bounds[0] <= fine[0] && fine[0] < fine[1] && fine[1] <= bounds[1]) {
                        errs.push(format!("body{n}: fine range must lie inside the block"));
                    }
                    if !(*depth > 0.0 && *depth <= bounds[3] - bounds[2]) {
                        errs.push(format!("body{n}: depth must be in (0, height]"));
                    }
                    if !(bounds[0] <= contact[0] && contact[0] < contact[1] && contact[1] <= bounds[1]) {
                        errs.push(format!("body{n}: contact range must lie inside the block"));
                    }
                    if !matches!(contact_side, Side::Top | Side::Bottom) {
                        errs.push(format!("body{n}: contact_side must be top or bottom"));
                    }
                }
                MeshSpec::Rect {
                    bounds,
                    cells,
                    contact,
                    contact_side,
                } => {
                    if !(bounds[0] < bounds[1] && bounds[2] < bounds[3]) {
                        errs.push(format!("body{n}: bounds must be `x0 x1 y0 y1` with x0 < x1, y0 < y1"));
                    }
                    if cells[0] == 0 || cells[1] == 0 {
                        errs.push(format!("body{n}: cells must be positive"));
                    }
                    if !(contact[0] < contact[1]) {
                        errs.push(format!("body{n}: contact range is empty"));
                    }
                    if !matches!(contact_side, Side::Top | Side::Bottom) {
                        errs.push(format!("body{n}: contact_side must be top or bottom"));
                    }
                }
                MeshSpec::File(p) => {
                    if !p.is_file() {
                        errs.push(format!("body{n}: mesh file {} does not exist", p.display()));
                    }
                }
            }
            let parts = self.part_names(i);
            for (side, _) in &b.loads {
                if !parts.contains(&side.as_str()) {
                    errs.push(format!("body{n}: unknown boundary part `{side}` in load (one of {})", parts.join(", ")));
                }
            }
            for (side, _) in &b.dirichlet {
                if !parts.contains(&side.as_str()) {
                    errs.push(format!("body{n}: unknown boundary part `{side}` in dirichlet (one of {})", parts.join(", ")));
                }
                let contact_side = match &b.mesh {
                    MeshSpec::Block { contact_side, .. } | MeshSpec::Rect { contact_side, .. } => {
                        Some(side_name(*contact_side))
                    }
                    _ => None,
                };
                if Some(side.as_str()) == contact_side || side == "contact" {
                    errs.push(format!("body{n}: the contact side cannot carry Dirichlet conditions"));
                }
            }
            if b.dirichlet.is_empty() && b.pins.is_empty() && b.mean.is_none() {
                errs.push(format!(
                    "body{n} has no Dirichlet part, pin or mean-value constraint; its rigid-body modes make the system singular"
                ));
            }
        }
        let h = &self.hybrid;
        match &h.geometry {
            HybridGeometry::Line { start, end, count, .. } => {
                if *count == 0 {
                    errs.push("hybrid.count must be at least 1".into());
                }
                if start == end {
                    errs.push("hybrid.start and hybrid.end coincide".into());
                }
            }
            HybridGeometry::File(p) => {
                if !p.is_file() {
                    errs.push(format!("hybrid interface file {} does not exist", p.display()));
                }
            }
        }
        match (h.model, h.space) {
            (HybridModel::String { .. }, s) if s != HybridSpaceKind::P1Vector => {
                errs.push(format!("hybrid model string needs space p1, got {s}"))
            }
            (HybridModel::Beam { .. }, s) if s != HybridSpaceKind::HermiteBeam => {
                errs.push(format!("hybrid model beam needs space beam, got {s}"))
            }
            _ => {}
        }
        if h.model.stiffness() < 0.0 {
            errs.push("hybrid.stiffness must be non-negative".into());
        }
        if h.mean.is_some() && h.space != HybridSpaceKind::P1Vector {
            errs.push("hybrid.mean needs the p1 space".into());
        }
        if !h.model.is_case2() && self.bodies.iter().all(|b| b.mode == ConstraintMode::Inequality) {
            errs.push(
                "hybrid model none with both bodies in inequality mode leaves the hybrid layer unsupported (singular system)"
                    .into(),
            );
        }
        if !(1..=3).contains(&self.n_gauss) {
            errs.push("quadrature.gauss must be 1, 2 or 3".into());
        }
        if self.subdivisions == Some(0) {
            errs.push("quadrature.subdivisions must be positive or auto".into());
        }
        if !(self.tol > 0.0) {
            errs.push("solver.tol must be positive".into());
        }
        if self.max_iter == 0 {
            errs.push("solver.max_iter must be at least 1".into());
        }
        errs
    }

    fn part_names(&self, body: usize) -> Vec<&'static str> {
        let mut v = match self.bodies[body].mesh {
            MeshSpec::HalfDisc { .. } => vec!["top", "arc"],
            MeshSpec::Block { .. } | MeshSpec::Rect { .. } => vec!["top", "bottom", "left", "right"],
            MeshSpec::File(_) => vec![],
        };
        v.extend(["dirichlet", "neumann", "contact"]);
        v
    }
}

// ---------------------------------------------------------------- building

/// Boundary parts a facet belongs to: its geometric side and its tag name.
fn facet_parts(spec: &MeshSpec, mesh: &BodyMesh, f: usize) -> Vec<&'static str> {
    let mut parts = vec![mesh.facets()[f].tag.as_str()];
    let m = mesh.facet_midpoint(f);
    match spec {
        MeshSpec::HalfDisc { center, radius, .. } => {
            let [a, b] = mesh.facets()[f].nodes;
            let tol = 1e-9 * radius;
            let flat = (mesh.nodes()[a].y - center[1]).abs() < tol && (mesh.nodes()[b].y - center[1]).abs() < tol;
            parts.push(if flat { "top" } else { "arc" });
        }
        MeshSpec::Block { bounds, .. } | MeshSpec::Rect { bounds, .. } => {
            let tol = 1e-9 * (bounds[1] - bounds[0]).max(bounds[3] - bounds[2]);
            if (m.y - bounds[2]).abs() < tol {
                parts.push("bottom");
            } else if (m.y - bounds[3]).abs() < tol {
                parts.push("top");
            } else if (m.x - bounds[0]).abs() < tol {
                parts.push("left");
            } else if (m.x - bounds[1]).abs() < tol {
                parts.push("right");
            }
        }
        MeshSpec::File(_) => {}
    }
    parts
}

fn in_range(x: f64, r: [f64; 2]) -> bool {
    let tol = 1e-12 * (1.0 + r[0].abs().max(r[1].abs()));
    x >= r[0] - tol && x <= r[1] + tol
}

fn build_mesh(spec: &BodySpec) -> Result<BodyMesh> {
    let dirichlet_side = |name: &str| spec.dirichlet.iter().any(|(s, _)| s == name);
    let block_tag = |contact: [f64; 2], contact_side: Side| {
        move |side: Side, mid: Point| {
            if side == contact_side && in_range(mid.x, contact) {
                FacetTag::Contact
            } else if dirichlet_side(side_name(side)) {
                FacetTag::Dirichlet
            } else {
                FacetTag::Neumann
            }
        }
    };
    match &spec.mesh {
        MeshSpec::HalfDisc {
            center,
            radius,
            h_min,
            h_max,
            r_fine,
            growth,
            contact,
        } => {
            let m = half_disc(&HalfDiscParams {
                center: Vector2::new(center[0], center[1]),
                radius: *radius,
                h_min: *h_min,
                h_max: *h_max,
                r_fine: *r_fine,
                growth: *growth,
                contact_halfwidth: *contact,
            })?;
            let parts: Vec<Vec<&str>> = (0..m.facets().len())
                .map(|f| facet_parts(&spec.mesh, &m, f))
                .collect();
            m.retagged(|f, b| {
                if b.tag == FacetTag::Contact {
                    FacetTag::Contact
                } else if dirichlet_side(parts[f][1]) {
                    FacetTag::Dirichlet
                } else {
                    FacetTag::Neumann
                }
            })
        }
        MeshSpec::Block {
            bounds,
            h_min,
            h_max,
            ratio,
            fine,
            depth,
            contact,
            contact_side,
        } => {
            let mut breaks = vec![fine[0], fine[1]];
            for x in [contact[0], contact[1]]
                .into_iter()
                .chain(spec.pins.iter().map(|p| p.0[0]))
            {
                if x > fine[0] && x < fine[1] {
                    breaks.push(x);
                }
            }
            breaks.sort_by(f64::total_cmp);
            breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
            let xs = graded_axis(bounds[0], bounds[1], &breaks, *h_min, *ratio, *h_max);
            let yb = if *contact_side == Side::Top {
                [bounds[3] - depth, bounds[3]]
            } else {
                [bounds[2], bounds[2] + depth]
            };
            let ys = graded_axis(bounds[2], bounds[3], &yb, *h_min, *ratio, *h_max);
            structured_block(&xs, &ys, block_tag(*contact, *contact_side))
        }
        MeshSpec::Rect {
            bounds,
            cells,
            contact,
            contact_side,
        } => rect_mesh(
            bounds[0],
            bounds[1],
            bounds[2],
            bounds[3],
            cells[0],
            cells[1],
            block_tag(*contact, *contact_side),
        ),
        MeshSpec::File(p) => read_mesh(p),
    }
}

fn build_body(spec: &BodySpec, n: usize) -> Result<BodyProblem> {
    let mesh = build_mesh(spec)?;
    let material = Material::new(spec.young, spec.poisson)?;
    let parts: Vec<Vec<&str>> = (0..mesh.facets().len())
        .map(|f| facet_parts(&spec.mesh, &mesh, f))
        .collect();
    let mut load = assemble_load(&mesh, &Vector2::new(spec.force[0], spec.force[1]));
    for (side, total) in &spec.loads {
        let on = |f: usize| parts[f].contains(&side.as_str());
        let length: f64 = (0..mesh.facets().len()).filter(|&f| on(f)).map(|f| mesh.facet_length(f)).sum();
        if length <= 0.0 {
            return Err(Error::Validation(vec![format!("body{n}: boundary part `{side}` is empty")]));
        }
        let traction = Vector2::new(total[0], total[1]) / length;
        let mut idx = 0;
        let add = assemble_traction(&mesh, &traction, |_| {
            let hit = on(idx);
            idx += 1;
            hit
        });
        for (l, a) in load.iter_mut().zip(add) {
            *l += a;
        }
    }
    let mut fixed = std::collections::BTreeSet::new();
    for (side, comps) in &spec.dirichlet {
        let mut any = false;
        for (f, facet) in mesh.facets().iter().enumerate() {
            if parts[f].contains(&side.as_str()) {
                any = true;
                for &node in &facet.nodes {
                    for &c in comps.indices() {
                        fixed.insert(2 * node + c);
                    }
                }
            }
        }
        if !any {
            return Err(Error::Validation(vec![format!("body{n}: boundary part `{side}` is empty")]));
        }
    }
    for (p, comps) in &spec.pins {
        let target = Vector2::new(p[0], p[1]);
        let (node, d) = mesh
            .nodes()
            .iter()
            .enumerate()
            .map(|(i, q)| (i, (q - target).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("mesh has nodes");
        if d > 1e-9 * (1.0 + target.norm()) {
            return Err(Error::Validation(vec![format!(
                "body{n}: no mesh node at pin ({}, {}); nearest is {d:.3e} away",
                p[0], p[1]
            )]));
        }
        for &c in comps.indices() {
            fixed.insert(2 * node + c);
        }
    }
    Ok(BodyProblem {
        mesh,
        material,
        mode: spec.mode,
        gamma_mult: spec.gamma_mult,
        load,
        fixed: fixed.into_iter().collect(),
        mean: spec.mean.map(Components::directions).unwrap_or_default(),
    })
}

impl Scenario {
    pub fn interface(&self) -> Result<InterfaceMesh> {
        match &self.hybrid.geometry {
            HybridGeometry::Line {
                start,
                end,
                count,
                orient,
            } => InterfaceMesh::subdivide(
                Vector2::new(start[0], start[1]),
                Vector2::new(end[0], end[1]),
                *count,
                *orient,
            ),
            HybridGeometry::File(p) => read_interface(p),
        }
    }

    /// Generates meshes and boundary data.
    pub fn build_problem(&self) -> Result<Problem> {
        let errors = self.validation_errors();
        if !errors.is_empty() {
            return Err(Error::Validation(errors));
        }
        let b1 = build_body(&self.bodies[0], 1)?;
        let b2 = build_body(&self.bodies[1], 2)?;
        Ok(Problem {
            bodies: [b1, b2],
            hybrid: HybridProblem {
                space: HybridSpace::new(self.hybrid.space, self.interface()?),
                model: self.hybrid.model,
                mean: self.hybrid.mean.map(Components::directions).unwrap_or_default(),
            },
            n_gauss: self.n_gauss,
            subdivisions: self.subdivisions,
            gamma_scaling: self.gamma_scaling,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn templates_roundtrip() {
        for name in ["hertz", "patch", "string"] {
            let s = Scenario::template(name).unwrap();
            let text = s.write();
            assert_eq!(Scenario::parse(&text).unwrap(), s, "{name}:\n{text}");
        }
    }

    #[test]
    fn hertz_template_values() {
        let s = Scenario::hertz(1000);
        assert_eq!(s.bodies[0].young, 2000.0);
        assert_eq!(s.bodies[1].young, 7000.0);
        assert_eq!(s.bodies[0].poisson, 0.3);
        assert_eq!(s.bodies[0].gamma_mult, 10.0);
        assert_eq!(s.bodies[1].gamma_mult, 10.0);
        assert_eq!(s.bodies[0].loads, vec![("top".to_string(), [0.0, -50.0])]);
        assert_eq!(
            s.hybrid.geometry,
            HybridGeometry::Line {
                start: [-0.4, 0.0],
                end: [0.4, 0.0],
                count: 1000,
                orient: Orientation::Left
            }
        );
        assert_eq!(s.hybrid.space, HybridSpaceKind::P0Normal);
    }

    #[test]
    fn all_errors_reported() {
        let text = Scenario::patch(ConstraintMode::Equality, 1.0, 2)
            .write()
            .replace("body1.young = 1000", "body1.young = -3")
            .replace("body2.poisson = 0.3", "body2.poisson = 0.7")
            + "body1.colour = red\n";
        match Scenario::parse(&text) {
            Err(Error::Validation(errs)) => {
                assert_eq!(errs.len(), 3, "{errs:?}");
                assert!(errs.iter().any(|e| e.contains("body1.colour")));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_key_reported() {
        let text = Scenario::patch(ConstraintMode::Equality, 1.0, 2)
            .write()
            .replace("body2.mode = equality\n", "");
        match Scenario::parse(&text) {
            Err(Error::Validation(errs)) => {
                assert!(errs.iter().any(|e| e.contains("body2.mode")), "{errs:?}")
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn singular_configuration_rejected() {
        let mut s = Scenario::patch(ConstraintMode::Equality, 1.0, 2);
        for b in &mut s.bodies {
            b.dirichlet.clear();
            b.pins.clear();
            b.mean = None;
        }
        let errs = s.validation_errors();
        assert_eq!(errs.iter().filter(|e| e.contains("singular")).count(), 2);
        let mut s = Scenario::patch(ConstraintMode::Inequality, 1.0, 2);
        s.bodies[1].mode = ConstraintMode::Inequality;
        assert!(s.validation_errors().iter().any(|e| e.contains("singular")));
    }

    #[test]
    fn string_without_stiffness_is_case_one_shape() {
        let mut s = Scenario::string_layer(Some(0.0), 10, 0.05);
        let text = s.write().replace("hybrid.stiffness = 0\n", "");
        let parsed = Scenario::parse(&text).unwrap();
        assert_eq!(parsed, s);
        s.hybrid.space = HybridSpaceKind::P0Normal;
        assert!(s.validation_errors().iter().any(|e| e.contains("needs space p1")));
    }

    #[test]
    fn patch_problem_boundary_data() {
        let p = Scenario::patch(ConstraintMode::Equality, 2.0, 3).build_problem().unwrap();
        let fy: f64 = p.bodies[0].load.iter().skip(1).step_by(2).sum();
        assert!((fy + 2.0).abs() < 1e-14);
        // bottom row y dofs plus one x pin
        assert_eq!(p.bodies[1].fixed.len(), 4 + 1);
        assert!(p.bodies[0].fixed.is_empty());
        assert_eq!(p.bodies[0].mean.len(), 1);
    }
}
