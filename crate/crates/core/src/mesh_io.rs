//! Plain-text mesh and interface files.
//!
//! ```text
//! nodes N elements M type {tri|quad}
//! x y                      (N lines)
//! n0 n1 n2 [n3]            (M lines, zero-based)
//! facets K
//! n0 n1 {dirichlet|neumann|contact}   (K lines)
//! ```
//!
//! Interface files hold `interface V`, `V` lines `x y` and `orient {left|right}`.
//! Blank lines and `#` comments are ignored.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Vector2;

use crate::error::{Error, Result};
use crate::geometry::{BodyMesh, ElementKind, FacetTag, InterfaceMesh, Orientation, Point};

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            inner: text.lines().enumerate(),
            last: 0,
        }
    }

    fn next_tokens(&mut self, what: &str) -> Result<Vec<&'a str>> {
        for (i, line) in self.inner.by_ref() {
            self.last = i + 1;
            let line = line.split('#').next().unwrap_or("").trim();
            if !line.is_empty() {
                return Ok(line.split_whitespace().collect());
            }
        }
        Err(Error::Parse {
            line: self.last + 1,
            message: format!("unexpected end of file, expected {what}"),
        })
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            line: self.last,
            message: message.into(),
        }
    }

    fn rest_is_empty(&mut self) -> Result<()> {
        match self.next_tokens("") {
            Ok(t) => Err(self.err(format!("unexpected trailing content `{}`", t.join(" ")))),
            Err(_) => Ok(()),
        }
    }
}

fn num<T: std::str::FromStr>(lines: &Lines, tok: &str, what: &str) -> Result<T> {
    tok.parse()
        .map_err(|_| lines.err(format!("invalid {what} `{tok}`")))
}

fn point(lines: &Lines, toks: &[&str]) -> Result<Point> {
    if toks.len() != 2 {
        return Err(lines.err(format!("expected `x y`, got {} values", toks.len())));
    }
    Ok(Vector2::new(
        num(lines, toks[0], "coordinate")?,
        num(lines, toks[1], "coordinate")?,
    ))
}

pub fn parse_mesh(text: &str) -> Result<BodyMesh> {
    let mut lines = Lines::new(text);
    let head = lines.next_tokens("mesh header")?;
    if head.len() != 6 || head[0] != "nodes" || head[2] != "elements" || head[4] != "type" {
        return Err(lines.err("expected `nodes N elements M type {tri|quad}`"));
    }
    let n: usize = num(&lines, head[1], "node count")?;
    let m: usize = num(&lines, head[3], "element count")?;
    let kind = match head[5] {
        "tri" => ElementKind::Tri,
        "quad" => ElementKind::Quad,
        other => return Err(lines.err(format!("unknown element type `{other}`"))),
    };
    let mut nodes = Vec::with_capacity(n);
    for _ in 0..n {
        let t = lines.next_tokens("node coordinates")?;
        nodes.push(point(&lines, &t)?);
    }
    let npe = kind.nodes_per_element();
    let mut elements = Vec::with_capacity(m);
    for _ in 0..m {
        let t = lines.next_tokens("element connectivity")?;
        if t.len() != npe {
            return Err(lines.err(format!("expected {npe} node indices, got {}", t.len())));
        }
        elements.push(
            t.iter()
                .map(|s| num(&lines, s, "node index"))
                .collect::<Result<Vec<usize>>>()?,
        );
    }
    let t = lines.next_tokens("facet header")?;
    if t.len() != 2 || t[0] != "facets" {
        return Err(lines.err("expected `facets K`"));
    }
    let k: usize = num(&lines, t[1], "facet count")?;
    let mut facets = Vec::with_capacity(k);
    for _ in 0..k {
        let t = lines.next_tokens("facet")?;
        if t.len() != 3 {
            return Err(lines.err("expected `n0 n1 tag`"));
        }
        let tag = FacetTag::parse(t[2]).ok_or_else(|| lines.err(format!("unknown tag `{}`", t[2])))?;
        facets.push((
            [num(&lines, t[0], "node index")?, num(&lines, t[1], "node index")?],
            tag,
        ));
    }
    lines.rest_is_empty()?;
    BodyMesh::new(nodes, kind, elements, facets)
}

pub fn write_mesh(mesh: &BodyMesh) -> String {
    let mut s = String::new();
    let kind = match mesh.kind() {
        ElementKind::Tri => "tri",
        ElementKind::Quad => "quad",
    };
    let _ = writeln!(
        s,
        "nodes {} elements {} type {kind}",
        mesh.num_nodes(),
        mesh.elements().len()
    );
    for p in mesh.nodes() {
        let _ = writeln!(s, "{} {}", p.x, p.y);
    }
    for e in mesh.elements() {
        let idx: Vec<String> = e.iter().map(|i| i.to_string()).collect();
        let _ = writeln!(s, "{}", idx.join(" "));
    }
    let _ = writeln!(s, "facets {}", mesh.facets().len());
    for f in mesh.facets() {
        let _ = writeln!(s, "{} {} {}", f.nodes[0], f.nodes[1], f.tag.as_str());
    }
    s
}

pub fn parse_interface(text: &str) -> Result<InterfaceMesh> {
    let mut lines = Lines::new(text);
    let t = lines.next_tokens("interface header")?;
    if t.len() != 2 || t[0] != "interface" {
        return Err(lines.err("expected `interface V`"));
    }
    let v: usize = num(&lines, t[1], "vertex count")?;
    let mut vertices = Vec::with_capacity(v);
    for _ in 0..v {
        let t = lines.next_tokens("vertex")?;
        vertices.push(point(&lines, &t)?);
    }
    let t = lines.next_tokens("orientation")?;
    if t.len() != 2 || t[0] != "orient" {
        return Err(lines.err("expected `orient {left|right}`"));
    }
    let orient =
        Orientation::parse(t[1]).ok_or_else(|| lines.err(format!("unknown orientation `{}`", t[1])))?;
    lines.rest_is_empty()?;
    InterfaceMesh::new(vertices, orient, false)
}

pub fn write_interface(iface: &InterfaceMesh) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "interface {}", iface.vertices().len());
    for p in iface.vertices() {
        let _ = writeln!(s, "{} {}", p.x, p.y);
    }
    let _ = writeln!(s, "orient {}", iface.orientation().as_str());
    s
}

pub fn read_mesh(path: &Path) -> Result<BodyMesh> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_mesh(&text)
}

pub fn read_interface(path: &Path) -> Result<InterfaceMesh> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_interface(&text)
}
