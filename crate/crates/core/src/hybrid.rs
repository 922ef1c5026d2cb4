//! Discrete spaces and stiffness forms on the hybrid interface layer.

use std::fmt;

use crate::error::{Error, Result};
use crate::geometry::{ClosestPointResult, InterfaceMesh, Point};
use crate::sparse::{SparseMatrix, SparseRow, TripletBuilder};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HybridSpaceKind {
    /// One normal displacement per segment.
    P0Normal,
    /// Continuous piecewise linear displacement vector, two dofs per vertex.
    P1Vector,
    /// Cubic Hermite normal deflection: value and arclength slope per vertex.
    HermiteBeam,
}

impl HybridSpaceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            HybridSpaceKind::P0Normal => "p0",
            HybridSpaceKind::P1Vector => "p1",
            HybridSpaceKind::HermiteBeam => "beam",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "p0" => Some(HybridSpaceKind::P0Normal),
            "p1" => Some(HybridSpaceKind::P1Vector),
            "beam" | "hermite" => Some(HybridSpaceKind::HermiteBeam),
            _ => None,
        }
    }
}

impl fmt::Display for HybridSpaceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HybridSpace {
    kind: HybridSpaceKind,
    interface: InterfaceMesh,
}

impl HybridSpace {
    pub fn new(kind: HybridSpaceKind, interface: InterfaceMesh) -> Self {
        Self { kind, interface }
    }

    pub fn kind(&self) -> HybridSpaceKind {
        self.kind
    }

    pub fn interface(&self) -> &InterfaceMesh {
        &self.interface
    }

    pub fn dof_count(&self) -> usize {
        match self.kind {
            HybridSpaceKind::P0Normal => self.interface.num_segments(),
            HybridSpaceKind::P1Vector | HybridSpaceKind::HermiteBeam => {
                2 * self.interface.vertices().len()
            }
        }
    }

    /// Row `r` with `r · dofs` = normal displacement of the hybrid field at
    /// the closest point, measured along the segment normal.
    pub fn normal_disp_row(&self, cp: &ClosestPointResult) -> SparseRow {
        let s = cp.segment;
        let t = cp.t;
        let (a, b) = self.interface.segment(s);
        match self.kind {
            HybridSpaceKind::P0Normal => SparseRow::new(vec![s], vec![1.0]),
            HybridSpaceKind::P1Vector => {
                let n = self.interface.normal(s);
                SparseRow::new(
                    vec![2 * a, 2 * a + 1, 2 * b, 2 * b + 1],
                    vec![(1.0 - t) * n.x, (1.0 - t) * n.y, t * n.x, t * n.y],
                )
            }
            HybridSpaceKind::HermiteBeam => {
                let l = self.interface.length(s);
                let h = hermite_basis(t);
                SparseRow::new(
                    vec![2 * a, 2 * a + 1, 2 * b, 2 * b + 1],
                    vec![h[0], l * h[1], h[2], l * h[3]],
                )
            }
        }
    }

    pub fn eval_normal_disp(&self, dofs: &[f64], cp: &ClosestPointResult) -> f64 {
        self.normal_disp_row(cp).dot(dofs)
    }

    /// Row computing the mean of `direction · u0` along the interface.
    /// Only the vector space carries tangential information.
    pub fn mean_row(&self, direction: &Point) -> Option<SparseRow> {
        if self.kind != HybridSpaceKind::P1Vector {
            return None;
        }
        let total = self.interface.total_length();
        let mut coeffs = vec![0.0; self.dof_count()];
        for s in 0..self.interface.num_segments() {
            let (a, b) = self.interface.segment(s);
            let w = 0.5 * self.interface.length(s) / total;
            for v in [a, b] {
                coeffs[2 * v] += w * direction.x;
                coeffs[2 * v + 1] += w * direction.y;
            }
        }
        Some(SparseRow::from_dense(&coeffs))
    }
}

/// Cubic Hermite basis on [0, 1]: value at 0, slope at 0, value at 1, slope at 1.
pub fn hermite_basis(t: f64) -> [f64; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    [
        1.0 - 3.0 * t2 + 2.0 * t3,
        t - 2.0 * t2 + t3,
        3.0 * t2 - 2.0 * t3,
        -t2 + t3,
    ]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HybridModel {
    /// Auxiliary layer with no stiffness of its own.
    None,
    /// Taut string: `k_s ∫ u0' · v0' ds` on the vector field.
    String { stiffness: f64 },
    /// Euler-Bernoulli beam: `D_b ∫ w'' v'' ds` on the normal deflection.
    Beam { stiffness: f64 },
}

impl HybridModel {
    pub fn name(&self) -> &'static str {
        match self {
            HybridModel::None => "none",
            HybridModel::String { .. } => "string",
            HybridModel::Beam { .. } => "beam",
        }
    }

    pub fn stiffness(&self) -> f64 {
        match *self {
            HybridModel::None => 0.0,
            HybridModel::String { stiffness } | HybridModel::Beam { stiffness } => stiffness,
        }
    }

    /// True when the model contributes an a0 block.
    pub fn is_case2(&self) -> bool {
        !matches!(self, HybridModel::None)
    }
}

/// 4x4 Hermite bending matrix of one beam element.
pub fn beam_element_stiffness(length: f64, stiffness: f64) -> [[f64; 4]; 4] {
    let l = length;
    let c = stiffness / (l * l * l);
    let k = [
        [12.0, 6.0 * l, -12.0, 6.0 * l],
        [6.0 * l, 4.0 * l * l, -6.0 * l, 2.0 * l * l],
        [-12.0, -6.0 * l, 12.0, -6.0 * l],
        [6.0 * l, 2.0 * l * l, -6.0 * l, 4.0 * l * l],
    ];
    k.map(|row| row.map(|v| v * c))
}

pub fn assemble_a0(model: &HybridModel, space: &HybridSpace) -> Result<SparseMatrix> {
    let n = space.dof_count();
    let iface = space.interface();
    let incompatible = || Error::IncompatibleHybrid {
        model: model.name().to_string(),
        space: space.kind().to_string(),
    };
    let mut t = TripletBuilder::square(n);
    match *model {
        HybridModel::None => {}
        HybridModel::String { stiffness } => {
            if space.kind() != HybridSpaceKind::P1Vector {
                return Err(incompatible());
            }
            if stiffness < 0.0 {
                return Err(Error::InvalidInterface(format!(
                    "string stiffness must be non-negative, got {stiffness}"
                )));
            }
            for s in 0..iface.num_segments() {
                let (a, b) = iface.segment(s);
                let k = stiffness / iface.length(s);
                for c in 0..2 {
                    let (i, j) = (2 * a + c, 2 * b + c);
                    t.add(i, i, k);
                    t.add(j, j, k);
                    t.add(i, j, -k);
                    t.add(j, i, -k);
                }
            }
        }
        HybridModel::Beam { stiffness } => {
            if space.kind() != HybridSpaceKind::HermiteBeam {
                return Err(incompatible());
            }
            if stiffness < 0.0 {
                return Err(Error::InvalidInterface(format!(
                    "beam stiffness must be non-negative, got {stiffness}"
                )));
            }
            for s in 0..iface.num_segments() {
                let (a, b) = iface.segment(s);
                let ke = beam_element_stiffness(iface.length(s), stiffness);
                let dofs = [2 * a, 2 * a + 1, 2 * b, 2 * b + 1];
                for (r, &gi) in dofs.iter().enumerate() {
                    for (c, &gj) in dofs.iter().enumerate() {
                        t.add(gi, gj, ke[r][c]);
                    }
                }
            }
        }
    }
    Ok(t.build())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{closest_point, Orientation};
    use nalgebra::Vector2;

    fn line(n: usize, len: f64) -> InterfaceMesh {
        InterfaceMesh::subdivide(
            Vector2::new(0.0, 0.0),
            Vector2::new(len, 0.0),
            n,
            Orientation::Left,
        )
        .unwrap()
    }

    #[test]
    fn dof_counts() {
        let iface = line(4, 1.0);
        assert_eq!(HybridSpace::new(HybridSpaceKind::P0Normal, iface.clone()).dof_count(), 4);
        assert_eq!(HybridSpace::new(HybridSpaceKind::P1Vector, iface.clone()).dof_count(), 10);
        assert_eq!(HybridSpace::new(HybridSpaceKind::HermiteBeam, iface).dof_count(), 10);
    }

    #[test]
    fn none_model_is_zero() {
        let space = HybridSpace::new(HybridSpaceKind::P0Normal, line(3, 1.0));
        let a0 = assemble_a0(&HybridModel::None, &space).unwrap();
        assert_eq!(a0.nrows(), 3);
        assert_eq!(a0.nnz(), 0);
    }

    #[test]
    fn incompatible_pairings() {
        let p0 = HybridSpace::new(HybridSpaceKind::P0Normal, line(3, 1.0));
        let p1 = HybridSpace::new(HybridSpaceKind::P1Vector, line(3, 1.0));
        assert!(matches!(
            assemble_a0(&HybridModel::String { stiffness: 1.0 }, &p0),
            Err(Error::IncompatibleHybrid { .. })
        ));
        assert!(matches!(
            assemble_a0(&HybridModel::Beam { stiffness: 1.0 }, &p1),
            Err(Error::IncompatibleHybrid { .. })
        ));
    }

    #[test]
    fn p1_constant_normal_field() {
        let space = HybridSpace::new(HybridSpaceKind::P1Vector, line(1, 2.0));
        let dofs = [0.0, 1.0, 0.0, 1.0];
        for x in [0.0, 0.3, 1.7, 2.0] {
            let cp = closest_point(&Vector2::new(x, 0.4), space.interface());
            assert!((space.eval_normal_disp(&dofs, &cp) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn p0_row_is_unit() {
        let space = HybridSpace::new(HybridSpaceKind::P0Normal, line(4, 1.0));
        let cp = closest_point(&Vector2::new(0.6, 0.1), space.interface());
        let row = space.normal_disp_row(&cp);
        assert_eq!(row.indices(), &[2]);
        assert_eq!(row.values(), &[1.0]);
    }

    #[test]
    fn mean_row_of_translation_is_one() {
        let iface = InterfaceMesh::new(
            vec![
                Vector2::new(0.0, 0.0),
                Vector2::new(0.1, 0.0),
                Vector2::new(0.5, 0.2),
                Vector2::new(1.0, 0.2),
            ],
            Orientation::Left,
            false,
        )
        .unwrap();
        let space = HybridSpace::new(HybridSpaceKind::P1Vector, iface);
        let row = space.mean_row(&Vector2::new(1.0, 0.0)).unwrap();
        let tx: Vec<f64> = (0..space.dof_count()).map(|i| if i % 2 == 0 { 1.0 } else { 0.0 }).collect();
        assert!((row.dot(&tx) - 1.0).abs() < 1e-14);
        assert!(HybridSpace::new(HybridSpaceKind::P0Normal, line(2, 1.0))
            .mean_row(&Vector2::new(1.0, 0.0))
            .is_none());
    }
}
