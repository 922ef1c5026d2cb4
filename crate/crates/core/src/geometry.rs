//! Body meshes, the hybrid interface polyline, closest-point projection and
//! boundary quadrature.

use std::collections::HashMap;

use nalgebra::Vector2;

use crate::error::{Error, Result};

pub type Point = Vector2<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FacetTag {
    Dirichlet,
    Neumann,
    Contact,
}

impl FacetTag {
    pub fn as_str(self) -> &'static str {
        match self {
            FacetTag::Dirichlet => "dirichlet",
            FacetTag::Neumann => "neumann",
            FacetTag::Contact => "contact",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "dirichlet" => Some(FacetTag::Dirichlet),
            "neumann" => Some(FacetTag::Neumann),
            "contact" => Some(FacetTag::Contact),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementKind {
    Tri,
    Quad,
}

impl ElementKind {
    pub fn nodes_per_element(self) -> usize {
        match self {
            ElementKind::Tri => 3,
            ElementKind::Quad => 4,
        }
    }
}

/// A boundary facet, stored in the counter-clockwise order of its element so
/// that the outward normal is the right-hand normal of `nodes[0] -> nodes[1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryFacet {
    pub nodes: [usize; 2],
    pub tag: FacetTag,
    pub element: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BodyMesh {
    nodes: Vec<Point>,
    kind: ElementKind,
    elements: Vec<Vec<usize>>,
    facets: Vec<BoundaryFacet>,
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

pub(crate) fn cross(a: &Point, b: &Point) -> f64 {
    a.x * b.y - a.y * b.x
}

impl BodyMesh {
    /// Builds and validates a mesh. Facets may be given in either orientation;
    /// they are reoriented to match their element. Every boundary edge must
    /// carry exactly one tag.
    pub fn new(
        nodes: Vec<Point>,
        kind: ElementKind,
        elements: Vec<Vec<usize>>,
        facets: Vec<([usize; 2], FacetTag)>,
    ) -> Result<Self> {
        let npe = kind.nodes_per_element();
        let mut edge_owner: HashMap<(usize, usize), Vec<(usize, usize, usize)>> = HashMap::new();
        for (e, conn) in elements.iter().enumerate() {
            if conn.len() != npe {
                return Err(Error::InvalidMesh(format!(
                    "element {e} has {} nodes, expected {npe}",
                    conn.len()
                )));
            }
            if let Some(&bad) = conn.iter().find(|&&n| n >= nodes.len()) {
                return Err(Error::InvalidMesh(format!(
                    "element {e} references node {bad} but the mesh has {} nodes",
                    nodes.len()
                )));
            }
            let area = polygon_area(conn.iter().map(|&n| nodes[n]));
            if area <= 0.0 {
                return Err(Error::DegenerateElement {
                    element: e,
                    jacobian: area,
                });
            }
            if kind == ElementKind::Quad {
                // convexity: every corner turns left
                for k in 0..4 {
                    let p0 = nodes[conn[(k + 3) % 4]];
                    let p1 = nodes[conn[k]];
                    let p2 = nodes[conn[(k + 1) % 4]];
                    let turn = cross(&(p1 - p0), &(p2 - p1));
                    if turn <= 0.0 {
                        return Err(Error::DegenerateElement {
                            element: e,
                            jacobian: turn,
                        });
                    }
                }
            }
            for k in 0..npe {
                let a = conn[k];
                let b = conn[(k + 1) % npe];
                edge_owner.entry(edge_key(a, b)).or_default().push((e, a, b));
            }
        }

        let mut boundary: HashMap<(usize, usize), (usize, usize, usize)> = HashMap::new();
        for (key, owners) in &edge_owner {
            match owners.len() {
                1 => {
                    boundary.insert(*key, owners[0]);
                }
                2 => {}
                n => {
                    return Err(Error::InvalidMesh(format!(
                        "edge {key:?} is shared by {n} elements"
                    )))
                }
            }
        }

        let mut seen: HashMap<(usize, usize), FacetTag> = HashMap::new();
        let mut out = Vec::with_capacity(facets.len());
        for ([a, b], tag) in facets {
            let key = edge_key(a, b);
            let Some(&(element, ea, eb)) = boundary.get(&key) else {
                return Err(Error::InvalidMesh(format!(
                    "facet ({a}, {b}) is not a boundary edge of the mesh"
                )));
            };
            if let Some(prev) = seen.insert(key, tag) {
                return Err(Error::InvalidMesh(format!(
                    "facet ({a}, {b}) tagged twice ({} and {})",
                    prev.as_str(),
                    tag.as_str()
                )));
            }
            out.push(BoundaryFacet {
                nodes: [ea, eb],
                tag,
                element,
            });
        }
        if seen.len() != boundary.len() {
            let mut missing: Vec<_> = boundary
                .keys()
                .filter(|k| !seen.contains_key(k))
                .copied()
                .collect();
            missing.sort_unstable();
            return Err(Error::InvalidMesh(format!(
                "{} boundary edges carry no tag, e.g. {:?}",
                missing.len(),
                missing[0]
            )));
        }

        Ok(Self {
            nodes,
            kind,
            elements,
            facets: out,
        })
    }

    /// Same mesh with each boundary facet retagged by `f(facet index, facet)`.
    pub fn retagged(&self, mut f: impl FnMut(usize, &BoundaryFacet) -> FacetTag) -> Result<Self> {
        let facets = self
            .facets
            .iter()
            .enumerate()
            .map(|(i, b)| (b.nodes, f(i, b)))
            .collect();
        Self::new(self.nodes.clone(), self.kind, self.elements.clone(), facets)
    }

    /// Midpoint of boundary facet `f`.
    pub fn facet_midpoint(&self, f: usize) -> Point {
        let [a, b] = self.facets[f].nodes;
        (self.nodes[a] + self.nodes[b]) * 0.5
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn kind(&self) -> ElementKind {
        self.kind
    }

    pub fn elements(&self) -> &[Vec<usize>] {
        &self.elements
    }

    pub fn facets(&self) -> &[BoundaryFacet] {
        &self.facets
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_dofs(&self) -> usize {
        2 * self.nodes.len()
    }

    pub fn element_coords(&self, e: usize) -> Vec<Point> {
        self.elements[e].iter().map(|&n| self.nodes[n]).collect()
    }

    pub fn facet_length(&self, f: usize) -> f64 {
        let [a, b] = self.facets[f].nodes;
        (self.nodes[b] - self.nodes[a]).norm()
    }

    /// Outward unit normal of a boundary facet.
    pub fn facet_normal(&self, f: usize) -> Point {
        let [a, b] = self.facets[f].nodes;
        let t = self.nodes[b] - self.nodes[a];
        Vector2::new(t.y, -t.x) / t.norm()
    }

    pub fn area(&self) -> f64 {
        self.elements
            .iter()
            .map(|c| polygon_area(c.iter().map(|&n| self.nodes[n])))
            .sum()
    }

    /// Smallest interior angle over all elements, in degrees.
    pub fn min_angle_deg(&self) -> f64 {
        let mut min = f64::INFINITY;
        for conn in &self.elements {
            let n = conn.len();
            for k in 0..n {
                let p0 = self.nodes[conn[(k + n - 1) % n]];
                let p1 = self.nodes[conn[k]];
                let p2 = self.nodes[conn[(k + 1) % n]];
                let u = p0 - p1;
                let v = p2 - p1;
                let ang = (u.dot(&v) / (u.norm() * v.norm())).clamp(-1.0, 1.0).acos();
                min = min.min(ang.to_degrees());
            }
        }
        min
    }
}

pub(crate) fn polygon_area(points: impl Iterator<Item = Point>) -> f64 {
    let pts: Vec<Point> = points.collect();
    let n = pts.len();
    0.5 * (0..n).map(|k| cross(&pts[k], &pts[(k + 1) % n])).sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    /// Normal is the left-hand normal of the vertex ordering.
    Left,
    Right,
}

impl Orientation {
    pub fn as_str(self) -> &'static str {
        match self {
            Orientation::Left => "left",
            Orientation::Right => "right",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "left" => Some(Orientation::Left),
            "right" => Some(Orientation::Right),
            _ => None,
        }
    }
}

/// Polyline discretization of the hybrid layer. Each segment carries a unit
/// normal that points into the designated body (body 1 in a scenario).
#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceMesh {
    vertices: Vec<Point>,
    closed: bool,
    orientation: Orientation,
    normals: Vec<Point>,
    lengths: Vec<f64>,
}

impl InterfaceMesh {
    pub fn new(vertices: Vec<Point>, orientation: Orientation, closed: bool) -> Result<Self> {
        let min_vertices = if closed { 3 } else { 2 };
        if vertices.len() < min_vertices {
            return Err(Error::InvalidInterface(format!(
                "need at least {min_vertices} vertices, got {}",
                vertices.len()
            )));
        }
        let nseg = if closed {
            vertices.len()
        } else {
            vertices.len() - 1
        };
        let mut normals = Vec::with_capacity(nseg);
        let mut lengths = Vec::with_capacity(nseg);
        for s in 0..nseg {
            let a = vertices[s];
            let b = vertices[(s + 1) % vertices.len()];
            let t = b - a;
            let len = t.norm();
            if len <= 0.0 || !len.is_finite() {
                return Err(Error::InvalidInterface(format!(
                    "segment {s} has zero length"
                )));
            }
            let left = Vector2::new(-t.y, t.x) / len;
            normals.push(match orientation {
                Orientation::Left => left,
                Orientation::Right => -left,
            });
            lengths.push(len);
        }
        let mesh = Self {
            vertices,
            closed,
            orientation,
            normals,
            lengths,
        };
        if let Some((i, j)) = mesh.find_self_intersection() {
            return Err(Error::InvalidInterface(format!(
                "segments {i} and {j} intersect"
            )));
        }
        Ok(mesh)
    }

    /// `n` equal segments from `a` to `b`.
    pub fn subdivide(a: Point, b: Point, n: usize, orientation: Orientation) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInterface("zero segments requested".into()));
        }
        let vertices = (0..=n)
            .map(|k| a + (b - a) * (k as f64 / n as f64))
            .collect();
        Self::new(vertices, orientation, false)
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn num_segments(&self) -> usize {
        self.normals.len()
    }

    pub fn segment(&self, s: usize) -> (usize, usize) {
        (s, (s + 1) % self.vertices.len())
    }

    pub fn segment_points(&self, s: usize) -> (Point, Point) {
        let (a, b) = self.segment(s);
        (self.vertices[a], self.vertices[b])
    }

    pub fn normal(&self, s: usize) -> Point {
        self.normals[s]
    }

    pub fn length(&self, s: usize) -> f64 {
        self.lengths[s]
    }

    pub fn total_length(&self) -> f64 {
        self.lengths.iter().sum()
    }

    pub fn min_segment_length(&self) -> f64 {
        self.lengths.iter().copied().fold(f64::INFINITY, f64::min)
    }

    fn find_self_intersection(&self) -> Option<(usize, usize)> {
        let n = self.num_segments();
        let nv = self.vertices.len();
        for i in 0..n {
            let (a, b) = self.segment_points(i);
            for j in (i + 1)..n {
                let adjacent = j == i + 1 || (self.closed && i == 0 && j == nv - 1);
                if adjacent {
                    continue;
                }
                let (c, d) = self.segment_points(j);
                if segments_intersect(a, b, c, d) {
                    return Some((i, j));
                }
            }
        }
        None
    }
}

fn segments_intersect(a: Point, b: Point, c: Point, d: Point) -> bool {
    let d1 = cross(&(b - a), &(c - a));
    let d2 = cross(&(b - a), &(d - a));
    let d3 = cross(&(d - c), &(a - c));
    let d4 = cross(&(d - c), &(b - c));
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    let on = |p: Point, q: Point, r: Point, o: f64| {
        o == 0.0
            && r.x >= p.x.min(q.x)
            && r.x <= p.x.max(q.x)
            && r.y >= p.y.min(q.y)
            && r.y <= p.y.max(q.y)
    };
    on(a, b, c, d1) || on(a, b, d, d2) || on(c, d, a, d3) || on(c, d, b, d4)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosestPointResult {
    pub p0: Point,
    pub segment: usize,
    /// Position along the segment, 0 at its first vertex.
    pub t: f64,
    /// Interface normal of the segment (toward the designated body).
    pub normal: Point,
    /// Signed distance `normal · (z - p0)`.
    pub distance: f64,
}

/// Closest point on the interface polyline. Equidistant candidates resolve to
/// the lowest segment index.
pub fn closest_point(z: &Point, interface: &InterfaceMesh) -> ClosestPointResult {
    let mut best: Option<(f64, usize, f64, Point)> = None;
    for s in 0..interface.num_segments() {
        let (a, b) = interface.segment_points(s);
        let ab = b - a;
        let t = ((z - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
        let p = if t == 1.0 { b } else { a + ab * t };
        let d2 = (z - p).norm_squared();
        let better = match best {
            None => true,
            Some((bd2, ..)) => d2 < bd2 - 1e-14 * bd2.max(f64::MIN_POSITIVE),
        };
        if better {
            best = Some((d2, s, t, p));
        }
    }
    let (_, segment, t, p0) = best.expect("interface has at least one segment");
    let normal = interface.normal(segment);
    ClosestPointResult {
        p0,
        segment,
        t,
        normal,
        distance: normal.dot(&(z - p0)),
    }
}

/// Signed gap to the interface; positive on the designated body's side.
pub fn gap(z: &Point, interface: &InterfaceMesh) -> f64 {
    closest_point(z, interface).distance
}

/// Gauss-Legendre nodes and weights on [0, 1].
pub fn gauss_legendre_unit(n: usize) -> Option<Vec<(f64, f64)>> {
    match n {
        1 => Some(vec![(0.5, 1.0)]),
        2 => {
            let d = 0.5 / 3f64.sqrt();
            Some(vec![(0.5 - d, 0.5), (0.5 + d, 0.5)])
        }
        3 => {
            let d = 0.5 * 0.6f64.sqrt();
            Some(vec![(0.5 - d, 5.0 / 18.0), (0.5, 8.0 / 18.0), (0.5 + d, 5.0 / 18.0)])
        }
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FacetQuadPoint {
    pub point: Point,
    pub weight: f64,
    pub facet: usize,
    /// Length of the facet the point lies on.
    pub h: f64,
}

/// Composite Gauss-Legendre quadrature on every facet carrying `tag`. Each
/// facet is split into `subdivisions` equal pieces with `n_gauss` points each;
/// `h` stays the full facet length.
pub fn contact_quadrature(
    mesh: &BodyMesh,
    tag: FacetTag,
    n_gauss: usize,
    subdivisions: usize,
) -> Result<Vec<FacetQuadPoint>> {
    contact_quadrature_by(mesh, tag, n_gauss, |_| subdivisions)
}

/// As [`contact_quadrature`], with the number of pieces chosen per facet
/// from its length.
pub fn contact_quadrature_by(
    mesh: &BodyMesh,
    tag: FacetTag,
    n_gauss: usize,
    pieces: impl Fn(f64) -> usize,
) -> Result<Vec<FacetQuadPoint>> {
    let rule = gauss_legendre_unit(n_gauss).ok_or_else(|| {
        Error::InvalidMesh(format!("unsupported Gauss order {n_gauss} (use 1, 2 or 3)"))
    })?;
    let mut out = Vec::new();
    for (f, facet) in mesh.facets().iter().enumerate() {
        if facet.tag != tag {
            continue;
        }
        let a = mesh.nodes()[facet.nodes[0]];
        let b = mesh.nodes()[facet.nodes[1]];
        let h = (b - a).norm();
        let sub = pieces(h).max(1);
        for k in 0..sub {
            for &(xi, w) in &rule {
                let s = (k as f64 + xi) / sub as f64;
                out.push(FacetQuadPoint {
                    point: a + (b - a) * s,
                    weight: w * h / sub as f64,
                    facet: f,
                    h,
                });
            }
        }
    }
    Ok(out)
}
