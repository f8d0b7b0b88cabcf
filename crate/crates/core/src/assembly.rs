//! P1 finite element matrices of the quadratic pencil.
//!
//! For hat functions `ψ` on the identified DOFs,
//!
//! ```text
//! A[i][j] = ∫ s ∂₁ψⱼ ∂₁ψᵢ + s⁻¹ ∂₂ψⱼ ∂₂ψᵢ − k² γ s ψⱼ ψᵢ
//! B[i][j] = −2i ∫ s ∂₁ψⱼ ψᵢ
//! C[i][j] = ∫ s ψⱼ ψᵢ
//! ```
//!
//! and `P` is the unweighted `H¹` Gram matrix.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{DofMap, Mesh};
use crate::pml::PmlProfile;
use crate::quadrature::QuadratureRule;
use crate::sparse::SparseMatrix;

const MIN_AREA: f64 = 1e-14;

/// Axis-aligned rectangle `[x1₀, x1₁] × [x2₀, x2₁]` of constant index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexRegion {
    pub x1: [f64; 2],
    pub x2: [f64; 2],
    pub gamma: f64,
}

impl IndexRegion {
    fn contains(&self, x1: f64, x2: f64) -> bool {
        x1 >= self.x1[0] && x1 <= self.x1[1] && x2 >= self.x2[0] && x2 <= self.x2[1]
    }
}

/// Piecewise constant refractive index; `γ = 1` outside every rectangle.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RefractiveIndexMap {
    pub regions: Vec<IndexRegion>,
}

impl RefractiveIndexMap {
    pub fn homogeneous() -> Self {
        Self::default()
    }

    /// Single layer `|x₂| < h` of index `gamma` across the whole period.
    pub fn slab(period: f64, h: f64, gamma: f64) -> Self {
        Self {
            regions: vec![IndexRegion {
                x1: [-period / 2.0, period / 2.0],
                x2: [-h, h],
                gamma,
            }],
        }
    }

    /// Checks `γ ≥ 1`, that rectangles are proper and pairwise disjoint, and that
    /// they stay inside `|x₂| ≤ medium_half_height`.
    pub fn validate(&self, medium_half_height: f64) -> Result<()> {
        let tol = 1e-12 * medium_half_height.max(1.0);
        for (i, r) in self.regions.iter().enumerate() {
            if !(r.gamma >= 1.0) {
                return Err(Error::invalid(format!("index region {i} has γ = {} < 1", r.gamma)));
            }
            if !(r.x1[0] < r.x1[1] && r.x2[0] < r.x2[1]) {
                return Err(Error::invalid(format!("index region {i} is empty")));
            }
            if r.x2[0] < -medium_half_height - tol || r.x2[1] > medium_half_height + tol {
                return Err(Error::invalid(format!(
                    "index region {i} leaves the layer |x2| <= {medium_half_height}"
                )));
            }
            for (j, o) in self.regions.iter().enumerate().skip(i + 1) {
                let w = r.x1[1].min(o.x1[1]) - r.x1[0].max(o.x1[0]);
                let h = r.x2[1].min(o.x2[1]) - r.x2[0].max(o.x2[0]);
                if w > tol && h > tol {
                    return Err(Error::invalid(format!("index regions {i} and {j} overlap")));
                }
            }
        }
        Ok(())
    }

    pub fn gamma_at(&self, x1: f64, x2: f64) -> f64 {
        self.regions
            .iter()
            .find(|r| r.contains(x1, x2))
            .map_or(1.0, |r| r.gamma)
    }

    /// Rectangle edges the mesh must resolve, as `(x1 lines, x2 lines)`.
    pub fn interfaces(&self) -> (Vec<f64>, Vec<f64>) {
        let mut xs: Vec<f64> = self.regions.iter().flat_map(|r| r.x1).collect();
        let mut ys: Vec<f64> = self.regions.iter().flat_map(|r| r.x2).collect();
        for v in [&mut xs, &mut ys] {
            v.sort_by(f64::total_cmp);
            v.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        }
        (xs, ys)
    }
}

#[derive(Debug, Clone)]
pub struct AssembledSystem {
    pub a: SparseMatrix,
    pub b: SparseMatrix,
    pub c: SparseMatrix,
    pub p: SparseMatrix,
    pub n_dofs: usize,
}

type Local = [[Complex64; 3]; 3];

struct ElementMatrices {
    a: Local,
    b: Local,
    c: Local,
    p: Local,
}

// gradients of the barycentric coordinates and the (positive) area
fn p1_gradients(v: &[[f64; 2]; 3]) -> ([[f64; 2]; 3], f64) {
    let det = (v[1][0] - v[0][0]) * (v[2][1] - v[0][1]) - (v[2][0] - v[0][0]) * (v[1][1] - v[0][1]);
    let mut g = [[0.0; 2]; 3];
    for i in 0..3 {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        g[i] = [(v[j][1] - v[k][1]) / det, (v[k][0] - v[j][0]) / det];
    }
    (g, 0.5 * det.abs())
}

fn element(
    mesh: &Mesh,
    t: usize,
    pml: &PmlProfile,
    index: &RefractiveIndexMap,
    k: f64,
    quad: &QuadratureRule,
) -> Result<ElementMatrices> {
    let v = mesh.vertices(t);
    let (g, area) = p1_gradients(&v);
    if !(area >= MIN_AREA) {
        return Err(Error::SingularElement { index: t, area });
    }
    let centroid = [
        (v[0][0] + v[1][0] + v[2][0]) / 3.0,
        (v[0][1] + v[1][1] + v[2][1]) / 3.0,
    ];
    let gamma = index.gamma_at(centroid[0], centroid[1]);
    let kk = k * k * gamma;
    let zero = Complex64::new(0.0, 0.0);
    let mut e = ElementMatrices {
        a: [[zero; 3]; 3],
        b: [[zero; 3]; 3],
        c: [[zero; 3]; 3],
        p: [[zero; 3]; 3],
    };
    let minus_2i = Complex64::new(0.0, -2.0);
    for (lam, &w) in quad.points.iter().zip(&quad.weights) {
        let x2 = lam[0] * v[0][1] + lam[1] * v[1][1] + lam[2] * v[2][1];
        let s = pml.stretch(x2);
        let inv_s = s.inv();
        let wa = w * area;
        for i in 0..3 {
            for j in 0..3 {
                let gx = g[j][0] * g[i][0];
                let gy = g[j][1] * g[i][1];
                let m = lam[j] * lam[i];
                e.a[i][j] += (s * gx + inv_s * gy - s * (kk * m)) * wa;
                e.b[i][j] += minus_2i * s * (g[j][0] * lam[i] * wa);
                e.c[i][j] += s * (m * wa);
                e.p[i][j] += Complex64::new((gx + gy + m) * wa, 0.0);
            }
        }
    }
    Ok(e)
}

fn scatter(
    mesh: &Mesh,
    dofs: &DofMap,
    locals: &[Local],
    triplets: &mut Vec<(usize, usize, Complex64)>,
) {
    for (t, loc) in locals.iter().enumerate() {
        let tri = mesh.triangles[t];
        for (i, &ni) in tri.iter().enumerate() {
            let Some(di) = dofs.node_to_dof[ni] else { continue };
            for (j, &nj) in tri.iter().enumerate() {
                if let Some(dj) = dofs.node_to_dof[nj] {
                    triplets.push((di, dj, loc[i][j]));
                }
            }
        }
    }
}

fn check_dofs(mesh: &Mesh, dofs: &DofMap) -> Result<()> {
    if dofs.node_to_dof.len() != mesh.n_nodes() {
        return Err(Error::invalid("DOF map does not belong to this mesh"));
    }
    Ok(())
}

pub fn assemble_forms(
    mesh: &Mesh,
    dofs: &DofMap,
    pml: &PmlProfile,
    index: &RefractiveIndexMap,
    k: f64,
    quad: &QuadratureRule,
) -> Result<AssembledSystem> {
    check_dofs(mesh, dofs)?;
    pml.validate()?;
    if !(k >= 0.0) {
        return Err(Error::invalid(format!("wavenumber must be non-negative, got {k}")));
    }
    let elements: Vec<ElementMatrices> = (0..mesh.n_triangles())
        .into_par_iter()
        .map(|t| element(mesh, t, pml, index, k, quad))
        .collect::<Result<_>>()?;

    let n = dofs.n_dofs;
    let build = |pick: fn(&ElementMatrices) -> Local| -> Result<SparseMatrix> {
        let locals: Vec<Local> = elements.iter().map(pick).collect();
        let mut trip = Vec::with_capacity(9 * locals.len());
        scatter(mesh, dofs, &locals, &mut trip);
        SparseMatrix::from_triplets(n, n, &trip)
    };
    Ok(AssembledSystem {
        a: build(|e| e.a)?,
        b: build(|e| e.b)?,
        c: build(|e| e.c)?,
        p: build(|e| e.p)?,
        n_dofs: n,
    })
}

/// Stiffness plus mass with unit coefficients, exact for P1.
pub fn assemble_h1_gram(mesh: &Mesh, dofs: &DofMap) -> Result<SparseMatrix> {
    check_dofs(mesh, dofs)?;
    let locals: Vec<Local> = (0..mesh.n_triangles())
        .into_par_iter()
        .map(|t| {
            let v = mesh.vertices(t);
            let (g, area) = p1_gradients(&v);
            if !(area >= MIN_AREA) {
                return Err(Error::SingularElement { index: t, area });
            }
            let mut loc = [[Complex64::new(0.0, 0.0); 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    let stiff = (g[i][0] * g[j][0] + g[i][1] * g[j][1]) * area;
                    let mass = if i == j { area / 6.0 } else { area / 12.0 };
                    loc[i][j] = Complex64::new(stiff + mass, 0.0);
                }
            }
            Ok(loc)
        })
        .collect::<Result<_>>()?;
    let mut trip = Vec::with_capacity(9 * locals.len());
    scatter(mesh, dofs, &locals, &mut trip);
    SparseMatrix::from_triplets(dofs.n_dofs, dofs.n_dofs, &trip)
}

/// Smallest `Re(x*Ax) / (x*Px)` over `trials` seeded i.i.d. complex vectors.
pub fn garding_probe(sys: &AssembledSystem, trials: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = f64::INFINITY;
    for _ in 0..trials {
        let x: Vec<Complex64> = (0..sys.n_dofs)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let ax = sys.a.matvec(&x);
        let px = sys.p.matvec(&x);
        let num: Complex64 = x.iter().zip(&ax).map(|(xi, yi)| xi.conj() * yi).sum();
        let den: Complex64 = x.iter().zip(&px).map(|(xi, yi)| xi.conj() * yi).sum();
        best = best.min(num.re / den.re);
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_dof_map, build_structured_mesh, DomainSpec, NodeTags, Region};
    use approx::assert_relative_eq;

    fn unit_triangle() -> Mesh {
        Mesh {
            nodes: vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            triangles: vec![[0, 1, 2]],
            regions: vec![Region::Interior],
            tags: vec![NodeTags::default(); 3],
            grid: None,
        }
    }

    fn flat_pml() -> PmlProfile {
        PmlProfile::standard(10.0, 1.0).with_strength(0.0)
    }

    fn domain() -> DomainSpec {
        DomainSpec {
            period: 2.0 * std::f64::consts::PI,
            half_height: 1.0,
            pml_thickness: 0.5,
            medium_half_height: 0.5,
            interface_x1: vec![],
            interface_x2: vec![],
        }
    }

    fn system(nx: usize, ny: usize, k: f64, quad: &QuadratureRule) -> (Mesh, AssembledSystem) {
        let mesh = build_structured_mesh(&domain(), nx, ny).unwrap();
        let dofs = build_dof_map(&mesh).unwrap();
        let index = RefractiveIndexMap::slab(domain().period, 0.5, 9.0);
        let sys = assemble_forms(&mesh, &dofs, &PmlProfile::standard(1.0, 0.5), &index, k, quad).unwrap();
        (mesh, sys)
    }

    #[test]
    fn unit_triangle_stiffness_and_mass() {
        let mesh = unit_triangle();
        let dofs = build_dof_map(&mesh).unwrap();
        let idx = RefractiveIndexMap::homogeneous();
        let sys = assemble_forms(&mesh, &dofs, &flat_pml(), &idx, 0.0, &QuadratureRule::degree4()).unwrap();
        let k = [[2.0, -1.0, -1.0], [-1.0, 1.0, 0.0], [-1.0, 0.0, 1.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert_relative_eq!(sys.a.get(i, j).re, 0.5 * k[i][j], epsilon = 1e-14);
                assert_eq!(sys.a.get(i, j).im, 0.0);
                let mass = if i == j { 2.0 } else { 1.0 } * 0.5 / 12.0;
                assert_relative_eq!(sys.c.get(i, j).re, mass, epsilon = 1e-14);
                let p = assemble_h1_gram(&mesh, &dofs).unwrap();
                assert_relative_eq!(p.get(i, j).re, 0.5 * k[i][j] + mass, epsilon = 1e-14);
                assert_relative_eq!(sys.p.get(i, j).re, p.get(i, j).re, epsilon = 1e-14);
            }
        }
        // B = −2i ∫ ∂₁ψⱼ ψᵢ = −2i · (area/3) · ∂₁ψⱼ
        let gx = [-1.0, 1.0, 0.0];
        for i in 0..3 {
            for j in 0..3 {
                assert_relative_eq!(sys.b.get(i, j).im, -2.0 * gx[j] / 6.0, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn degenerate_triangle_rejected() {
        let mut mesh = unit_triangle();
        mesh.nodes[2] = [2.0, 0.0];
        let dofs = build_dof_map(&mesh).unwrap();
        let r = assemble_forms(&mesh, &dofs, &flat_pml(), &RefractiveIndexMap::homogeneous(), 1.0, &QuadratureRule::degree4());
        assert!(matches!(r, Err(Error::SingularElement { index: 0, .. })));
        assert!(matches!(assemble_h1_gram(&mesh, &dofs), Err(Error::SingularElement { .. })));
    }

    #[test]
    fn stiffness_kills_constants_away_from_dirichlet() {
        let mesh = build_structured_mesh(&domain(), 8, 4).unwrap();
        let dofs = build_dof_map(&mesh).unwrap();
        let sys = assemble_forms(&mesh, &dofs, &flat_pml(), &RefractiveIndexMap::homogeneous(), 0.0, &QuadratureRule::degree4())
            .unwrap();
        let ones = vec![Complex64::new(1.0, 0.0); sys.n_dofs];
        let r = sys.a.matvec(&ones);
        let outer = domain().outer_half_height();
        for (node, d) in dofs.node_to_dof.iter().enumerate() {
            let Some(d) = *d else { continue };
            if mesh.nodes[node][1].abs() < outer - 0.3 {
                assert!(r[d].norm() < 1e-13, "row {d}: {}", r[d]);
            }
        }
    }

    #[test]
    fn symmetry_structure() {
        let (_, sys) = system(32, 8, 1.6, &QuadratureRule::degree4());
        assert!(sys.a.transpose_defect(-1.0) <= 1e-12 * sys.a.max_abs());
        assert!(sys.c.transpose_defect(-1.0) <= 1e-12 * sys.c.max_abs());
        assert!(sys.b.transpose_defect(1.0) <= 1e-12 * sys.b.max_abs());
        assert!(sys.p.transpose_defect(-1.0) == 0.0);
        for (_, _, v) in sys.p.triplets() {
            assert_eq!(v.im, 0.0);
        }
    }

    fn real_part_spd(m: &SparseMatrix) -> bool {
        let mut d = nalgebra::DMatrix::<f64>::zeros(m.nrows(), m.ncols());
        for (i, j, v) in m.triplets() {
            d[(i, j)] += v.re;
        }
        nalgebra::Cholesky::new(d).is_some()
    }

    #[test]
    fn re_c_and_p_positive_definite() {
        let (_, sys) = system(16, 8, 1.6, &QuadratureRule::degree4());
        assert!(real_part_spd(&sys.c));
        assert!(real_part_spd(&sys.p));
        let neg = sys.c.linear_combination(Complex64::new(-1.0, 0.0), &SparseMatrix::identity(sys.n_dofs), Complex64::new(0.0, 0.0)).unwrap();
        assert!(!real_part_spd(&neg));
    }

    #[test]
    fn quadrature_degree_consistency() {
        let (_, s4) = system(101, 16, 1.6, &QuadratureRule::degree4());
        let (_, s6) = system(101, 16, 1.6, &QuadratureRule::degree6());
        for (m4, m6) in [(&s4.a, &s6.a), (&s4.b, &s6.b), (&s4.c, &s6.c)] {
            let floor = 1e-12 * m4.max_abs();
            for (i, j, v) in m4.triplets() {
                let w = m6.get(i, j);
                if v.norm() > floor {
                    assert!((v - w).norm() < 1e-3 * v.norm(), "({i},{j}): {v} vs {w}");
                }
            }
        }
    }

    #[test]
    fn no_absorption_gives_helmholtz_pencil() {
        let mesh = build_structured_mesh(&domain(), 12, 4).unwrap();
        let dofs = build_dof_map(&mesh).unwrap();
        let idx = RefractiveIndexMap::slab(domain().period, 0.5, 9.0);
        let q = QuadratureRule::degree4();
        let off = PmlProfile::standard(1.0, 0.5).with_strength(0.0);
        let sys = assemble_forms(&mesh, &dofs, &off, &idx, 1.6, &q).unwrap();
        let sys_far = assemble_forms(&mesh, &dofs, &flat_pml(), &idx, 1.6, &q).unwrap();
        for (x, y) in [(&sys.a, &sys_far.a), (&sys.b, &sys_far.b), (&sys.c, &sys_far.c)] {
            for (i, j, v) in x.triplets() {
                assert!((v - y.get(i, j)).norm() <= 1e-14 * x.max_abs());
                assert!(v.im.abs() <= 1e-14 * x.max_abs() || std::ptr::eq(x, &sys.b));
            }
        }
    }

    #[test]
    fn shuffled_element_order() {
        use rand::seq::SliceRandom;
        let mesh = build_structured_mesh(&domain(), 16, 4).unwrap();
        let dofs = build_dof_map(&mesh).unwrap();
        let idx = RefractiveIndexMap::slab(domain().period, 0.5, 9.0);
        let pml = PmlProfile::standard(1.0, 0.5);
        let q = QuadratureRule::degree4();
        let base = assemble_forms(&mesh, &dofs, &pml, &idx, 1.6, &q).unwrap();
        let mut perm: Vec<usize> = (0..mesh.n_triangles()).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(1));
        let mut shuffled = mesh.clone();
        shuffled.triangles = perm.iter().map(|&t| mesh.triangles[t]).collect();
        shuffled.regions = perm.iter().map(|&t| mesh.regions[t]).collect();
        shuffled.grid = None;
        let other = assemble_forms(&shuffled, &dofs, &pml, &idx, 1.6, &q).unwrap();
        for (x, y) in [(&base.a, &other.a), (&base.b, &other.b), (&base.c, &other.c), (&base.p, &other.p)] {
            let scale = x.max_abs();
            for (i, j, v) in x.triplets() {
                assert!((v - y.get(i, j)).norm() <= 1e-14 * scale);
            }
        }
    }

    #[test]
    fn garding_quotient() {
        let mesh = build_structured_mesh(&domain(), 16, 4).unwrap();
        let dofs = build_dof_map(&mesh).unwrap();
        let idx = RefractiveIndexMap::homogeneous();
        let q = QuadratureRule::degree4();
        let pure = assemble_forms(&mesh, &dofs, &flat_pml(), &idx, 0.0, &q).unwrap();
        let g = garding_probe(&pure, 20, 7);
        assert!(g >= 0.0);
        assert_eq!(g, garding_probe(&pure, 20, 7));

        // smooth vectors see the −k² mass term
        let loud = assemble_forms(&mesh, &dofs, &flat_pml(), &idx, 20.0, &q).unwrap();
        let ones = vec![Complex64::new(1.0, 0.0); loud.n_dofs];
        let num: Complex64 = loud.a.matvec(&ones).iter().sum();
        assert!(num.re < 0.0);
    }

    #[test]
    fn index_map_rules() {
        let idx = RefractiveIndexMap {
            regions: vec![
                IndexRegion { x1: [-3.0, 0.0], x2: [-0.5, 0.5], gamma: 6.0 },
                IndexRegion { x1: [0.0, 3.0], x2: [-0.5, 0.5], gamma: 10.0 },
            ],
        };
        idx.validate(0.5).unwrap();
        assert_eq!(idx.gamma_at(-1.0, 0.0), 6.0);
        assert_eq!(idx.gamma_at(1.0, 0.0), 10.0);
        assert_eq!(idx.gamma_at(1.0, 0.7), 1.0);
        assert_eq!(idx.interfaces(), (vec![-3.0, 0.0, 3.0], vec![-0.5, 0.5]));
        assert!(idx.validate(0.4).is_err());
        let overlap = RefractiveIndexMap {
            regions: vec![
                IndexRegion { x1: [-3.0, 0.5], x2: [-0.5, 0.5], gamma: 6.0 },
                IndexRegion { x1: [0.0, 3.0], x2: [-0.5, 0.5], gamma: 10.0 },
            ],
        };
        assert!(overlap.validate(0.5).is_err());
        let dim = RefractiveIndexMap { regions: vec![IndexRegion { x1: [0.0, 1.0], x2: [0.0, 0.1], gamma: 0.5 }] };
        assert!(dim.validate(0.5).is_err());
    }
}
