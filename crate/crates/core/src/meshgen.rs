//! Built-in mesh generators: graded structured quad blocks and an unstructured
//! triangulated half-disc refined toward its lowest point.

use nalgebra::Vector2;
use spade::{DelaunayTriangulation, Point2, Triangulation};

use crate::error::{Error, Result};
use crate::geometry::{BodyMesh, ElementKind, FacetTag, Point};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Bottom,
    Right,
    Top,
    Left,
}

/// Uniform spacing of at most `h` between consecutive `breaks`.
fn uniform_pieces(breaks: &[f64], h: f64) -> Vec<f64> {
    let mut out = vec![breaks[0]];
    for w in breaks.windows(2) {
        let n = ((w[1] - w[0]) / h - 1e-9).ceil().max(1.0) as usize;
        for k in 1..=n {
            out.push(w[0] + (w[1] - w[0]) * k as f64 / n as f64);
        }
    }
    out
}

/// Steps growing geometrically from `h0` (capped at `h_max`), rescaled to
/// cover exactly `len`.
fn growing_steps(len: f64, h0: f64, ratio: f64, h_max: f64) -> Vec<f64> {
    if len <= 0.0 {
        return Vec::new();
    }
    let mut steps = Vec::new();
    let mut h = h0;
    let mut sum = 0.0;
    while sum < len {
        h = (h * ratio).min(h_max);
        steps.push(h);
        sum += h;
    }
    // drop the overshooting step if that lands closer
    if steps.len() > 1 && sum - len > 0.5 * steps[steps.len() - 1] {
        sum -= steps.pop().unwrap();
    }
    steps.iter().map(|s| s * len / sum).collect()
}

/// Graded 1D grid on `[lo, hi]`: uniform spacing `h_fine` between the sorted
/// `fine_breaks` (which must lie inside `[lo, hi]`), geometric growth outside.
pub fn graded_axis(lo: f64, hi: f64, fine_breaks: &[f64], h_fine: f64, ratio: f64, h_max: f64) -> Vec<f64> {
    let fine = uniform_pieces(fine_breaks, h_fine);
    let h_max = h_max.max(h_fine);
    let mut out: Vec<f64> = Vec::new();
    let left = growing_steps(fine[0] - lo, h_fine, ratio, h_max);
    let mut x = fine[0];
    let mut rev = vec![];
    for s in &left {
        x -= s;
        rev.push(x);
    }
    if let Some(last) = rev.last_mut() {
        *last = lo;
    }
    out.extend(rev.iter().rev());
    out.extend(&fine);
    let right = growing_steps(hi - fine[fine.len() - 1], h_fine, ratio, h_max);
    let mut x = fine[fine.len() - 1];
    for s in &right {
        x += s;
        out.push(x);
    }
    if !right.is_empty() {
        *out.last_mut().unwrap() = hi;
    }
    out
}

/// Tensor-product Q1 mesh over grid lines `xs` x `ys`. `tag` receives the
/// side and the facet midpoint.
pub fn structured_block(
    xs: &[f64],
    ys: &[f64],
    mut tag: impl FnMut(Side, Point) -> FacetTag,
) -> Result<BodyMesh> {
    if xs.len() < 2 || ys.len() < 2 {
        return Err(Error::InvalidMesh("block needs at least one cell per direction".into()));
    }
    let nx = xs.len() - 1;
    let ny = ys.len() - 1;
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for &y in ys {
        for &x in xs {
            nodes.push(Vector2::new(x, y));
        }
    }
    let mut elements = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            elements.push(vec![id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    let mut facets = Vec::new();
    let mid = |a: usize, b: usize| (nodes[a] + nodes[b]) * 0.5;
    for i in 0..nx {
        let (a, b) = (id(i, 0), id(i + 1, 0));
        facets.push(([a, b], tag(Side::Bottom, mid(a, b))));
        let (a, b) = (id(i + 1, ny), id(i, ny));
        facets.push(([a, b], tag(Side::Top, mid(a, b))));
    }
    for j in 0..ny {
        let (a, b) = (id(nx, j), id(nx, j + 1));
        facets.push(([a, b], tag(Side::Right, mid(a, b))));
        let (a, b) = (id(0, j + 1), id(0, j));
        facets.push(([a, b], tag(Side::Left, mid(a, b))));
    }
    BodyMesh::new(nodes, ElementKind::Quad, elements, facets)
}

/// Uniform `nx` x `ny` Q1 mesh of a rectangle.
pub fn rect_mesh(
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    nx: usize,
    ny: usize,
    tag: impl FnMut(Side, Point) -> FacetTag,
) -> Result<BodyMesh> {
    let xs: Vec<f64> = (0..=nx).map(|i| x0 + (x1 - x0) * i as f64 / nx as f64).collect();
    let ys: Vec<f64> = (0..=ny).map(|j| y0 + (y1 - y0) * j as f64 / ny as f64).collect();
    structured_block(&xs, &ys, tag)
}

/// Mesh density for the half-disc: `h_min` within `r_fine` of the lowest
/// point, growing linearly with slope `growth` beyond, capped at `h_max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfDiscParams {
    pub center: Point,
    pub radius: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub r_fine: f64,
    pub growth: f64,
    /// Arc facets with `|x - center.x| <=` this are tagged contact.
    pub contact_halfwidth: f64,
}

impl HalfDiscParams {
    fn size(&self, p: &Point) -> f64 {
        let tip = self.center - Vector2::new(0.0, self.radius);
        let d = (p - tip).norm();
        if d <= self.r_fine {
            self.h_min
        } else {
            (self.h_min + self.growth * (d - self.r_fine)).min(self.h_max)
        }
    }
}

/// Points along a parametrized curve `c(s)`, `s` in [0, 1], spaced by the
/// size function (equal quantiles of the cumulative density `|c'| / h`).
fn march(curve: impl Fn(f64) -> Point, size: impl Fn(&Point) -> f64) -> Vec<Point> {
    let samples = 4000;
    let mut cum = vec![0.0];
    for k in 0..samples {
        let s0 = k as f64 / samples as f64;
        let s1 = (k + 1) as f64 / samples as f64;
        let (p0, p1) = (curve(s0), curve(s1));
        let m = curve(0.5 * (s0 + s1));
        cum.push(cum[k] + (p1 - p0).norm() / size(&m));
    }
    let total = cum[samples];
    let n = total.round().max(1.0) as usize;
    let mut out = Vec::with_capacity(n + 1);
    let mut k = 0;
    for i in 0..=n {
        let target = total * i as f64 / n as f64;
        while k + 1 < samples && cum[k + 1] < target {
            k += 1;
        }
        let frac = if cum[k + 1] > cum[k] {
            ((target - cum[k]) / (cum[k + 1] - cum[k])).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let s = (k as f64 + frac) / samples as f64;
        out.push(curve(if i == n { 1.0 } else { s }));
    }
    out
}

/// Lower half of the disc `|p - center| <= radius`, `p.y <= center.y`, as
/// Delaunay triangles. The straight top edge and the arc outside the contact
/// zone are tagged Neumann.
pub fn half_disc(params: &HalfDiscParams) -> Result<BodyMesh> {
    let HalfDiscParams {
        center: c,
        radius: r,
        h_min,
        h_max,
        ..
    } = *params;
    if !(r > 0.0 && h_min > 0.0 && h_max >= h_min && params.r_fine >= 0.0 && params.growth >= 0.0) {
        return Err(Error::InvalidMesh(format!("invalid half-disc parameters {params:?}")));
    }
    let size = |p: &Point| params.size(p);
    let pi = std::f64::consts::PI;
    let arc = march(|s| c + Vector2::new((pi * (1.0 + s)).cos(), (pi * (1.0 + s)).sin()) * r, size);
    let mut arc = arc;
    let last = arc.len() - 1;
    arc[0] = c - Vector2::new(r, 0.0);
    arc[last] = c + Vector2::new(r, 0.0);
    let top = march(|s| c + Vector2::new(r * (1.0 - 2.0 * s), 0.0), size);
    let mut points: Vec<Point> = arc.clone();
    points.extend(&top[1..top.len() - 1]);
    let n_boundary = points.len();

    // staggered rings around the lowest point
    let tip = c - Vector2::new(0.0, r);
    let mut rho = 0.0;
    let mut ring = 0usize;
    loop {
        let h = params.size(&(tip + Vector2::new(0.0, rho)));
        rho += h * 0.866;
        if rho > 2.0 * r {
            break;
        }
        let h = params.size(&(tip + Vector2::new(0.0, rho)));
        let n = ((2.0 * pi * rho) / h).ceil().max(3.0) as usize;
        let shift = if ring % 2 == 0 { 0.0 } else { 0.5 };
        for k in 0..n {
            let phi = 2.0 * pi * (k as f64 + shift) / n as f64;
            let p = tip + Vector2::new(phi.cos(), phi.sin()) * rho;
            let to_boundary = (r - (p - c).norm()).min(c.y - p.y);
            if to_boundary >= 0.6 * params.size(&p) {
                points.push(p);
            }
        }
        ring += 1;
    }

    let mut dt: DelaunayTriangulation<Point2<f64>> = DelaunayTriangulation::new();
    for p in &points {
        dt.insert(Point2::new(p.x, p.y))
            .map_err(|e| Error::InvalidMesh(format!("triangulation failed: {e:?}")))?;
    }
    // spade keeps vertex order; duplicates would have merged
    if dt.num_vertices() != points.len() {
        return Err(Error::InvalidMesh("duplicate points in half-disc cloud".into()));
    }
    let nodes: Vec<Point> = dt
        .vertices()
        .map(|v| Vector2::new(v.position().x, v.position().y))
        .collect();
    let mut elements = Vec::new();
    for f in dt.inner_faces() {
        let v = f.vertices().map(|h| h.fix().index());
        let (a, b, cc) = (nodes[v[0]], nodes[v[1]], nodes[v[2]]);
        let area = crate::geometry::cross(&(b - a), &(cc - a));
        if area.abs() < 1e-14 * h_min * h_min {
            continue;
        }
        if area > 0.0 {
            elements.push(vec![v[0], v[1], v[2]]);
        } else {
            elements.push(vec![v[0], v[2], v[1]]);
        }
    }
    let mut count = std::collections::HashMap::new();
    for e in &elements {
        for k in 0..3 {
            let (a, b) = (e[k], e[(k + 1) % 3]);
            *count.entry((a.min(b), a.max(b))).or_insert(0) += 1;
        }
    }
    let on_top = |i: usize| i >= arc.len() || i == 0 || i == arc.len() - 1;
    let mut facets = Vec::new();
    for e in &elements {
        for k in 0..3 {
            let (a, b) = (e[k], e[(k + 1) % 3]);
            if count[&(a.min(b), a.max(b))] != 1 {
                continue;
            }
            if a >= n_boundary || b >= n_boundary {
                return Err(Error::InvalidMesh("interior point on the half-disc hull".into()));
            }
            let mid = (nodes[a] + nodes[b]) * 0.5;
            let tag = if on_top(a) && on_top(b) {
                FacetTag::Neumann
            } else if (mid.x - c.x).abs() <= params.contact_halfwidth {
                FacetTag::Contact
            } else {
                FacetTag::Neumann
            };
            facets.push(([a, b], tag));
        }
    }
    BodyMesh::new(nodes, ElementKind::Tri, elements, facets)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graded_axis_hits_breaks() {
        let xs = graded_axis(-2.5, 2.5, &[-0.4, 0.0, 0.4], 0.05, 1.2, 0.3);
        assert_eq!(xs[0], -2.5);
        assert_eq!(*xs.last().unwrap(), 2.5);
        for b in [-0.4, 0.0, 0.4] {
            assert!(xs.iter().any(|x| (x - b).abs() < 1e-14), "missing {b}");
        }
        for w in xs.windows(2) {
            assert!(w[1] > w[0]);
            assert!(w[1] - w[0] <= 0.3 * 1.5);
        }
    }

    #[test]
    fn block_tags_partition() {
        let m = rect_mesh(0.0, 2.0, -1.0, 0.0, 4, 2, |side, _| match side {
            Side::Bottom => FacetTag::Dirichlet,
            Side::Top => FacetTag::Contact,
            _ => FacetTag::Neumann,
        })
        .unwrap();
        assert_eq!(m.num_nodes(), 15);
        assert_eq!(m.facets().len(), 12);
        assert!((m.area() - 2.0).abs() < 1e-14);
        let top = m.facets().iter().filter(|f| f.tag == FacetTag::Contact).count();
        assert_eq!(top, 4);
        for (i, f) in m.facets().iter().enumerate() {
            if f.tag == FacetTag::Contact {
                assert!((m.facet_normal(i) - Vector2::new(0.0, 1.0)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn half_disc_area_and_quality() {
        let p = HalfDiscParams {
            center: Vector2::new(0.0, 1.0),
            radius: 1.0,
            h_min: 0.04,
            h_max: 0.2,
            r_fine: 0.25,
            growth: 0.5,
            contact_halfwidth: 0.45,
        };
        let m = half_disc(&p).unwrap();
        let exact = 0.5 * std::f64::consts::PI;
        assert!((m.area() - exact).abs() < 0.01 * exact);
        assert!(m.min_angle_deg() > 15.0, "min angle {}", m.min_angle_deg());
        let contact: Vec<usize> = (0..m.facets().len())
            .filter(|&i| m.facets()[i].tag == FacetTag::Contact)
            .collect();
        assert!(!contact.is_empty());
        for i in contact {
            let n = m.facet_normal(i);
            assert!(n.y < -0.8);
            let [a, b] = m.facets()[i].nodes;
            if (m.nodes()[a].x + m.nodes()[b].x).abs() < 0.4 {
                assert!(m.facet_length(i) < 0.042);
            }
        }
    }
}
