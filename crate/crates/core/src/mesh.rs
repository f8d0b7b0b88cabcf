//! Structured triangulation of the PML-extended cell and the periodic/Dirichlet
//! degree-of-freedom map.
//!
//! The cell is `(-Λ/2, Λ/2) × (-H-δ, H+δ)`. Every axis-aligned grid cell is
//! split along its lower-left → upper-right diagonal, so grid lines (and hence
//! all material interfaces and the PML boundaries) are never crossed by a
//! triangle.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used when deciding whether a coordinate sits on a grid line.
const ALIGN_TOL: f64 = 1e-9;

/// Geometry of one periodic cell together with the lines the grid must resolve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub period: f64,
    pub half_height: f64,
    pub pml_thickness: f64,
    pub medium_half_height: f64,
    #[serde(default)]
    pub interface_x1: Vec<f64>,
    #[serde(default)]
    pub interface_x2: Vec<f64>,
}

impl DomainSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.period > 0.0) {
            return Err(Error::invalid(format!("period must be positive, got {}", self.period)));
        }
        if !(self.pml_thickness > 0.0) {
            return Err(Error::invalid(format!(
                "pml_thickness must be positive, got {}",
                self.pml_thickness
            )));
        }
        if !(self.medium_half_height > 0.0 && self.medium_half_height <= self.half_height) {
            return Err(Error::invalid(format!(
                "need 0 < medium_half_height <= half_height, got {} and {}",
                self.medium_half_height, self.half_height
            )));
        }
        let half = self.period / 2.0;
        if let Some(&x) = self.interface_x1.iter().find(|x| x.abs() > half * (1.0 + ALIGN_TOL)) {
            return Err(Error::invalid(format!("interface abscissa {x} outside the cell")));
        }
        let outer = self.outer_half_height();
        if let Some(&y) = self.interface_x2.iter().find(|y| y.abs() > outer * (1.0 + ALIGN_TOL)) {
            return Err(Error::invalid(format!("interface ordinate {y} outside the cell")));
        }
        Ok(())
    }

    /// `H + δ`, the ordinate of the Dirichlet boundaries.
    pub fn outer_half_height(&self) -> f64 {
        self.half_height + self.pml_thickness
    }

    /// Area of the PML-extended cell.
    pub fn area(&self) -> f64 {
        self.period * 2.0 * self.outer_half_height()
    }
}

/// Which slab a triangle belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    Interior,
    PmlPlus,
    PmlMinus,
}

impl Region {
    pub fn as_str(self) -> &'static str {
        match self {
            Region::Interior => "interior",
            Region::PmlPlus => "pml_plus",
            Region::PmlMinus => "pml_minus",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct NodeTags {
    pub left_edge: bool,
    pub right_edge: bool,
    pub dirichlet: bool,
}

/// Tensor grid lines of a structured mesh, kept for point location.
#[derive(Debug, Clone, PartialEq)]
pub struct GridLines {
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub nodes: Vec<[f64; 2]>,
    /// Counter-clockwise node triples.
    pub triangles: Vec<[usize; 3]>,
    pub regions: Vec<Region>,
    pub tags: Vec<NodeTags>,
    pub grid: Option<GridLines>,
}

impl Mesh {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn vertices(&self, t: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.triangles[t];
        [self.nodes[a], self.nodes[b], self.nodes[c]]
    }

    /// Signed area (positive for counter-clockwise orientation).
    pub fn signed_area(&self, t: usize) -> f64 {
        let [p0, p1, p2] = self.vertices(t);
        0.5 * ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]))
    }

    /// Locates the triangle containing `(x1, x2)` and returns it with the
    /// barycentric coordinates of the point.
    pub fn locate(&self, x1: f64, x2: f64) -> Option<(usize, [f64; 3])> {
        if let Some(grid) = &self.grid {
            let nx = grid.x1.len() - 1;
            let i = bracket(&grid.x1, x1)?;
            let j = bracket(&grid.x2, x2)?;
            // cell (i, j) owns triangles 2*(j*nx+i) (lower) and +1 (upper)
            let cell = j * nx + i;
            for t in [2 * cell, 2 * cell + 1] {
                let b = self.barycentric(t, x1, x2);
                if b.iter().all(|&l| l >= -1e-12) {
                    return Some((t, b));
                }
            }
            None
        } else {
            (0..self.n_triangles()).find_map(|t| {
                let b = self.barycentric(t, x1, x2);
                b.iter().all(|&l| l >= -1e-12).then_some((t, b))
            })
        }
    }

    pub fn barycentric(&self, t: usize, x1: f64, x2: f64) -> [f64; 3] {
        let [p0, p1, p2] = self.vertices(t);
        let det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
        let l1 = ((x1 - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (x2 - p0[1])) / det;
        let l2 = ((p1[0] - p0[0]) * (x2 - p0[1]) - (x1 - p0[0]) * (p1[1] - p0[1])) / det;
        [1.0 - l1 - l2, l1, l2]
    }
}

fn bracket(lines: &[f64], x: f64) -> Option<usize> {
    let n = lines.len();
    let (lo, hi) = (lines[0], lines[n - 1]);
    let tol = 1e-12 * (hi - lo).abs().max(1.0);
    if x < lo - tol || x > hi + tol {
        return None;
    }
    let idx = lines.partition_point(|&g| g <= x);
    Some(idx.saturating_sub(1).min(n - 2))
}

/// Number of uniform intervals of width `spacing` in `[origin, origin + n·spacing]`
/// needed to put `value` on a grid line, or `None` when it falls between lines.
fn grid_index(value: f64, origin: f64, spacing: f64) -> Option<usize> {
    let r = (value - origin) / spacing;
    let k = r.round();
    ((r - k).abs() <= ALIGN_TOL * r.abs().max(1.0) && k >= 0.0).then_some(k as usize)
}

/// Builds a structured triangulation with `nx` cells across the period and
/// `ny_per_unit` cells per unit length in `x₂`.
pub fn build_structured_mesh(spec: &DomainSpec, nx: usize, ny_per_unit: usize) -> Result<Mesh> {
    spec.validate()?;
    if nx < 2 {
        return Err(Error::invalid(format!("nx must be at least 2, got {nx}")));
    }
    if ny_per_unit == 0 {
        return Err(Error::invalid("ny_per_unit must be positive"));
    }
    let half = spec.period / 2.0;
    let outer = spec.outer_half_height();
    let dx = spec.period / nx as f64;
    let dy = 1.0 / ny_per_unit as f64;

    let ny = grid_index(2.0 * outer, 0.0, dy).ok_or(Error::InterfaceMisaligned {
        coordinate: "x2",
        value: outer,
        spacing: dy,
    })?;
    if ny < 2 {
        return Err(Error::invalid("mesh needs at least two rows"));
    }
    for &x in &spec.interface_x1 {
        grid_index(x, -half, dx).ok_or(Error::InterfaceMisaligned {
            coordinate: "x1",
            value: x,
            spacing: dx,
        })?;
    }
    let mut ordinates = vec![
        spec.medium_half_height,
        -spec.medium_half_height,
        spec.half_height,
        -spec.half_height,
    ];
    ordinates.extend_from_slice(&spec.interface_x2);
    for &y in &ordinates {
        grid_index(y, -outer, dy).ok_or(Error::InterfaceMisaligned {
            coordinate: "x2",
            value: y,
            spacing: dy,
        })?;
    }

    // snap grid lines exactly onto the special ordinates so region tests are exact
    let xs: Vec<f64> = (0..=nx)
        .map(|i| if i == nx { half } else { -half + i as f64 * dx })
        .collect();
    let mut ys: Vec<f64> = (0..=ny).map(|j| -outer + j as f64 * dy).collect();
    ys[ny] = outer;
    for &y in ordinates.iter().chain([outer, -outer].iter()) {
        if let Some(j) = grid_index(y, -outer, dy) {
            ys[j] = y;
        }
    }
    let mut xs = xs;
    for &x in &spec.interface_x1 {
        if let Some(i) = grid_index(x, -half, dx) {
            xs[i] = x;
        }
    }

    let node = |i: usize, j: usize| j * (nx + 1) + i;
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    let mut tags = Vec::with_capacity(nodes.capacity());
    for (j, &y) in ys.iter().enumerate() {
        for (i, &x) in xs.iter().enumerate() {
            nodes.push([x, y]);
            tags.push(NodeTags {
                left_edge: i == 0,
                right_edge: i == nx,
                dirichlet: j == 0 || j == ny,
            });
        }
    }

    let mut triangles = Vec::with_capacity(2 * nx * ny);
    let mut regions = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        let yc = 0.5 * (ys[j] + ys[j + 1]);
        let region = if yc > spec.half_height {
            Region::PmlPlus
        } else if yc < -spec.half_height {
            Region::PmlMinus
        } else {
            Region::Interior
        };
        for i in 0..nx {
            let (n00, n10, n01, n11) = (node(i, j), node(i + 1, j), node(i, j + 1), node(i + 1, j + 1));
            // diagonals mirror across x₂ = 0 so the mesh is symmetric in x₂
            if yc >= 0.0 {
                triangles.push([n00, n10, n11]);
                triangles.push([n00, n11, n01]);
            } else {
                triangles.push([n00, n10, n01]);
                triangles.push([n10, n11, n01]);
            }
            regions.push(region);
            regions.push(region);
        }
    }

    Ok(Mesh {
        nodes,
        triangles,
        regions,
        tags,
        grid: Some(GridLines { x1: xs, x2: ys }),
    })
}

/// Map from mesh nodes to global unknowns after periodic identification and
/// Dirichlet elimination.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    pub node_to_dof: Vec<Option<usize>>,
    pub n_dofs: usize,
    /// Node index each node is identified with (itself unless it is a
    /// right-edge node).
    pub canonical: Vec<usize>,
}

impl DofMap {
    /// Node this node is identified with.
    pub fn canonical_node(&self, node: usize) -> usize {
        self.canonical[node]
    }

    /// Expands a DOF vector to per-node values (eliminated nodes get zero).
    pub fn expand<T: Copy + Default>(&self, dofs: &[T]) -> Vec<T> {
        self.node_to_dof
            .iter()
            .map(|d| d.map_or(T::default(), |d| dofs[d]))
            .collect()
    }
}

/// Identifies right-edge nodes with their left-edge partners and removes
/// Dirichlet nodes.
pub fn build_dof_map(mesh: &Mesh) -> Result<DofMap> {
    let n = mesh.n_nodes();
    let mut left: Vec<(f64, usize)> = (0..n)
        .filter(|&i| mesh.tags[i].left_edge)
        .map(|i| (mesh.nodes[i][1], i))
        .collect();
    left.sort_by(|a, b| a.0.total_cmp(&b.0));
    let right: Vec<usize> = (0..n).filter(|&i| mesh.tags[i].right_edge).collect();
    if left.len() != right.len() {
        let x2 = right.first().map_or(f64::NAN, |&r| mesh.nodes[r][1]);
        return Err(Error::NonmatchingEdges { x2 });
    }

    let mut canonical: Vec<usize> = (0..n).collect();
    for &r in &right {
        let y = mesh.nodes[r][1];
        let tol = 1e-12 * y.abs().max(1.0);
        let pos = left.partition_point(|&(ly, _)| ly < y - tol);
        match left.get(pos) {
            Some(&(ly, l)) if (ly - y).abs() <= tol => canonical[r] = l,
            _ => return Err(Error::NonmatchingEdges { x2: y }),
        }
    }

    let mut node_to_dof = vec![None; n];
    let mut n_dofs = 0;
    for i in 0..n {
        if canonical[i] == i && !mesh.tags[i].dirichlet {
            node_to_dof[i] = Some(n_dofs);
            n_dofs += 1;
        }
    }
    for i in 0..n {
        if canonical[i] != i {
            node_to_dof[i] = if mesh.tags[i].dirichlet { None } else { node_to_dof[canonical[i]] };
        }
    }
    Ok(DofMap {
        node_to_dof,
        n_dofs,
        canonical,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshStats {
    pub hmax: f64,
    pub n_nodes: usize,
    pub n_triangles: usize,
    /// Smallest interior angle, in degrees.
    pub min_angle: f64,
}

pub fn mesh_statistics(mesh: &Mesh) -> MeshStats {
    let mut hmax: f64 = 0.0;
    let mut min_angle = f64::INFINITY;
    for t in 0..mesh.n_triangles() {
        let p = mesh.vertices(t);
        for k in 0..3 {
            let (a, b, c) = (p[k], p[(k + 1) % 3], p[(k + 2) % 3]);
            let e = [b[0] - a[0], b[1] - a[1]];
            let f = [c[0] - a[0], c[1] - a[1]];
            let le = e[0].hypot(e[1]);
            let lf = f[0].hypot(f[1]);
            hmax = hmax.max(le);
            let cos = ((e[0] * f[0] + e[1] * f[1]) / (le * lf)).clamp(-1.0, 1.0);
            min_angle = min_angle.min(cos.acos().to_degrees());
        }
    }
    MeshStats {
        hmax,
        n_nodes: mesh.n_nodes(),
        n_triangles: mesh.n_triangles(),
        min_angle,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn rect(period: f64, h: f64, delta: f64) -> DomainSpec {
        DomainSpec {
            period,
            half_height: h,
            pml_thickness: delta,
            medium_half_height: h,
            interface_x1: vec![],
            interface_x2: vec![],
        }
    }

    #[test]
    fn node_and_triangle_counts() {
        // H + δ = 1.5, 2 cells per unit → 6 rows
        let mesh = build_structured_mesh(&rect(4.0, 1.0, 0.5), 4, 2).unwrap();
        assert_eq!(mesh.n_nodes(), 35);
        assert_eq!(mesh.n_triangles(), 48);
        for t in 0..mesh.n_triangles() {
            assert!(mesh.signed_area(t) > 0.0);
        }
    }

    #[test]
    fn grid_contains_interface_lines() {
        let spec = DomainSpec {
            interface_x2: vec![-0.5, 0.5],
            medium_half_height: 0.5,
            ..rect(1.0, 1.0, 0.5)
        };
        let mesh = build_structured_mesh(&spec, 4, 4).unwrap();
        let ys = &mesh.grid.as_ref().unwrap().x2;
        for y in [-1.5, -1.0, -0.5, 0.5, 1.0, 1.5] {
            assert!(ys.contains(&y), "missing grid line {y}");
        }
    }

    #[test]
    fn misaligned_interface_is_rejected() {
        let spec = DomainSpec {
            interface_x2: vec![0.3],
            medium_half_height: 0.5,
            ..rect(1.0, 1.0, 0.5)
        };
        assert!(matches!(
            build_structured_mesh(&spec, 4, 4),
            Err(Error::InterfaceMisaligned { .. })
        ));
        let spec = DomainSpec {
            interface_x1: vec![0.1],
            ..rect(1.0, 1.0, 0.5)
        };
        assert!(matches!(
            build_structured_mesh(&spec, 4, 4),
            Err(Error::InterfaceMisaligned { coordinate: "x1", .. })
        ));
    }

    #[test]
    fn invalid_domain() {
        let mut spec = rect(1.0, 1.0, 0.5);
        spec.medium_half_height = 2.0;
        assert!(build_structured_mesh(&spec, 4, 4).is_err());
        assert!(build_structured_mesh(&rect(1.0, 1.0, 0.5), 1, 4).is_err());
    }

    #[test]
    fn dof_count_after_identification() {
        let mesh = build_structured_mesh(&rect(4.0, 1.0, 0.5), 4, 2).unwrap();
        let dofs = build_dof_map(&mesh).unwrap();
        assert_eq!(dofs.n_dofs, 20);
        for (i, d) in dofs.node_to_dof.iter().enumerate() {
            if mesh.tags[i].dirichlet {
                assert!(d.is_none());
            }
            if mesh.tags[i].right_edge && !mesh.tags[i].dirichlet {
                let l = dofs.canonical_node(i);
                assert!(mesh.tags[l].left_edge);
                assert_eq!(mesh.nodes[l][1], mesh.nodes[i][1]);
                assert_eq!(dofs.node_to_dof[l], *d);
            }
        }
        // idempotent identification
        for i in 0..mesh.n_nodes() {
            let c = dofs.canonical_node(i);
            assert_eq!(dofs.canonical_node(c), c);
        }
    }

    #[test]
    fn untagged_mesh_is_identity() {
        let mesh = Mesh {
            nodes: vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            triangles: vec![[0, 1, 2]],
            regions: vec![Region::Interior],
            tags: vec![NodeTags::default(); 3],
            grid: None,
        };
        let dofs = build_dof_map(&mesh).unwrap();
        assert_eq!(dofs.n_dofs, 3);
        assert_eq!(dofs.node_to_dof, vec![Some(0), Some(1), Some(2)]);
    }

    #[test]
    fn perturbed_right_edge_is_rejected() {
        let mut mesh = build_structured_mesh(&rect(4.0, 1.0, 0.5), 4, 2).unwrap();
        let r = (0..mesh.n_nodes())
            .find(|&i| mesh.tags[i].right_edge && !mesh.tags[i].dirichlet)
            .unwrap();
        mesh.nodes[r][1] += 1e-3;
        assert!(matches!(build_dof_map(&mesh), Err(Error::NonmatchingEdges { .. })));
    }

    #[test]
    fn statistics() {
        let mesh = build_structured_mesh(&rect(2.0, 1.0, 0.5), 8, 4).unwrap();
        let s = mesh_statistics(&mesh);
        assert_relative_eq!(s.hmax, 0.25 * 2f64.sqrt(), max_relative = 1e-12);
        assert_relative_eq!(s.min_angle, 45.0, max_relative = 1e-9);

        let single = Mesh {
            nodes: vec![[0.0, 0.0], [3.0, 0.0], [0.0, 4.0]],
            triangles: vec![[0, 1, 2]],
            regions: vec![Region::Interior],
            tags: vec![NodeTags::default(); 3],
            grid: None,
        };
        assert_relative_eq!(mesh_statistics(&single).hmax, 5.0);
    }

    #[test]
    fn triangulation_is_mirror_symmetric_in_x2() {
        let mesh = build_structured_mesh(&rect(2.0, 1.0, 0.5), 6, 4).unwrap();
        let key = |mut v: [[f64; 2]; 3]| {
            v.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
            v.map(|p| [(p[0] * 1e9).round() as i64, (p[1] * 1e9).round() as i64])
        };
        let all: std::collections::HashSet<_> = (0..mesh.n_triangles()).map(|t| key(mesh.vertices(t))).collect();
        for t in 0..mesh.n_triangles() {
            let mirrored = mesh.vertices(t).map(|p| [p[0], -p[1]]);
            assert!(all.contains(&key(mirrored)));
        }
    }

    #[test]
    fn locate_returns_containing_triangle() {
        let mesh = build_structured_mesh(&rect(2.0, 1.0, 0.5), 8, 4).unwrap();
        for &(x, y) in &[(0.1, 0.2), (-0.99, 1.49), (0.9999, -1.5), (0.3, 0.05)] {
            let (t, b) = mesh.locate(x, y).unwrap();
            assert!(b.iter().all(|&l| l >= -1e-12));
            let p = mesh.vertices(t);
            let rx = b[0] * p[0][0] + b[1] * p[1][0] + b[2] * p[2][0];
            let ry = b[0] * p[0][1] + b[1] * p[1][1] + b[2] * p[2][1];
            assert_relative_eq!(rx, x, epsilon = 1e-12);
            assert_relative_eq!(ry, y, epsilon = 1e-12);
        }
        assert!(mesh.locate(0.0, 2.0).is_none());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn area_and_region_consistency(nx in 2usize..12, per_unit in 1usize..6, period in 0.5f64..7.0) {
                let spec = DomainSpec {
                    period,
                    half_height: 1.0,
                    pml_thickness: 0.5,
                    medium_half_height: 0.5,
                    interface_x1: vec![],
                    interface_x2: vec![],
                };
                let mesh = build_structured_mesh(&spec, nx, 2 * per_unit).unwrap();
                let total: f64 = (0..mesh.n_triangles()).map(|t| mesh.signed_area(t)).sum();
                prop_assert!((total - spec.area()).abs() <= 1e-12 * spec.area());
                for t in 0..mesh.n_triangles() {
                    let ys = mesh.vertices(t).map(|p| p[1]);
                    let ok = match mesh.regions[t] {
                        Region::Interior => ys.iter().all(|y| y.abs() <= 1.0),
                        Region::PmlPlus => ys.iter().all(|&y| y >= 1.0),
                        Region::PmlMinus => ys.iter().all(|&y| y <= -1.0),
                    };
                    prop_assert!(ok);
                }
            }
        }
    }
}
