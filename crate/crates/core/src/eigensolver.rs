//! Linearization of the quadratic pencil and a shift-invert Krylov–Schur
//! eigensolver.
//!
//! The pencil `Q(α) = A + αB + α²C` is linearized as `M0 x = α M1 x` with
//!
//! ```text
//! M0 = [ A  0 ]     M1 = [ −B  −C ]     x = [ φ ; η ],  η = αφ.
//!      [ 0  I ]          [  I   0 ]
//! ```
//!
//! Near a shift `s` the iteration runs on `T = (M0 − sM1)⁻¹ M1`, whose
//! eigenvalues are `θ = 1 / (α − s)`. Applying `T` only needs a factorization of
//! the `n × n` matrix `Q(s)`: solving `(M0 − sM1)[u; v] = [f; g]` gives
//! `Q(s) u = f − sCg` and `v = g + su`.

use std::f64::consts::PI;

use faer::prelude::*;
use faer::sparse::linalg::solvers::Lu;
use faer::MatMut;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembly::AssembledSystem;
use crate::dense::{sorted_schur, triangular_eigenvector};
use crate::error::{Error, Result};
use crate::mesh::{DofMap, Mesh};
use crate::sparse::SparseMatrix;

type C = Complex64;

const ZERO: C = C::new(0.0, 0.0);

fn default_max_arg() -> f64 {
    0.1f64.atan()
}

fn default_tol() -> f64 {
    1e-9
}

fn default_subspace() -> usize {
    40
}

fn default_nev() -> usize {
    12
}

fn default_restarts() -> usize {
    300
}

fn default_seed() -> u64 {
    2024
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub shifts: Vec<Complex64>,
    #[serde(default = "default_nev")]
    pub n_requested: usize,
    #[serde(default = "default_subspace")]
    pub subspace: usize,
    #[serde(default = "default_restarts")]
    pub max_restarts: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_arg")]
    pub max_arg: f64,
    pub re_window: [f64; 2],
    #[serde(default = "default_seed")]
    pub seed: u64,
}

impl SolverConfig {
    /// Five real shifts spread over `(0, π/Λ)` and the window `[0, π/Λ]`.
    /// For `Λ = 2π` the shifts are `{0.05, 0.15, 0.25, 0.35, 0.45}`.
    pub fn for_period(period: f64) -> Self {
        let edge = PI / period;
        Self {
            shifts: (0..5).map(|j| C::new(edge * (2 * j + 1) as f64 / 10.0, 0.0)).collect(),
            n_requested: default_nev(),
            subspace: default_subspace(),
            max_restarts: default_restarts(),
            tol: default_tol(),
            max_arg: default_max_arg(),
            re_window: [0.0, edge],
            seed: default_seed(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::invalid("solver tolerance must be positive"));
        }
        if self.n_requested == 0 || self.subspace <= self.n_requested {
            return Err(Error::invalid(format!(
                "need 0 < n_requested < subspace, got {} and {}",
                self.n_requested, self.subspace
            )));
        }
        if self.shifts.is_empty() {
            return Err(Error::invalid("at least one shift is required"));
        }
        if !(self.re_window[0] <= self.re_window[1]) {
            return Err(Error::invalid("real-part window is reversed"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct LinearizedPencil {
    pub a: SparseMatrix,
    pub b: SparseMatrix,
    pub c: SparseMatrix,
    pub m0: SparseMatrix,
    pub m1: SparseMatrix,
    /// Gram matrix used to normalize eigenvectors; Euclidean when absent.
    pub gram: Option<SparseMatrix>,
    pub n: usize,
}

impl LinearizedPencil {
    pub fn from_blocks(a: SparseMatrix, b: SparseMatrix, c: SparseMatrix) -> Result<Self> {
        let n = a.nrows();
        for m in [&a, &b, &c] {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::invalid("pencil blocks must be square of equal size"));
            }
        }
        let one = C::new(1.0, 0.0);
        let mut t0: Vec<_> = a.triplets().collect();
        t0.extend((0..n).map(|i| (n + i, n + i, one)));
        let mut t1: Vec<_> = b.triplets().map(|(i, j, v)| (i, j, -v)).collect();
        t1.extend(c.triplets().map(|(i, j, v)| (i, n + j, -v)));
        t1.extend((0..n).map(|i| (n + i, i, one)));
        let m0 = SparseMatrix::from_triplets(2 * n, 2 * n, &t0)?;
        let m1 = SparseMatrix::from_triplets(2 * n, 2 * n, &t1)?;
        Ok(Self { a, b, c, m0, m1, gram: None, n })
    }

    /// `A + sB + s²C`.
    pub fn quadratic_at(&self, s: C) -> Result<SparseMatrix> {
        self.a
            .linear_combination(C::new(1.0, 0.0), &self.b, s)?
            .linear_combination(C::new(1.0, 0.0), &self.c, s * s)
    }

    /// `‖Q(α)φ‖₂ / ((‖A‖₁ + |α|‖B‖₁ + |α|²‖C‖₁) ‖φ‖₂)`.
    pub fn relative_residual(&self, alpha: C, phi: &[C]) -> f64 {
        let mut r = self.a.matvec(phi);
        self.b.mul_add(alpha, phi, &mut r);
        self.c.mul_add(alpha * alpha, phi, &mut r);
        let la = alpha.norm();
        let scale = self.a.norm_1() + la * self.b.norm_1() + la * la * self.c.norm_1();
        norm2(&r) / (scale * norm2(phi))
    }
}

pub fn linearize(sys: &AssembledSystem) -> LinearizedPencil {
    let mut p = LinearizedPencil::from_blocks(sys.a.clone(), sys.b.clone(), sys.c.clone())
        .expect("assembled blocks share one size");
    p.gram = Some(sys.p.clone());
    p
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenPair {
    pub alpha: Complex64,
    pub phi: Vec<Complex64>,
    pub residual: f64,
    /// `‖η − αφ‖ / ‖φ‖` of the linearized eigenvector.
    pub aux_defect: f64,
    /// Shift whose iteration produced this pair.
    pub shift: Complex64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropagatingValue {
    pub pair: EigenPair,
    pub argument: f64,
}

fn norm2(x: &[C]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

fn dot(x: &[C], y: &[C]) -> C {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

struct ShiftedOperator<'a> {
    pencil: &'a LinearizedPencil,
    shift: C,
    lu: Lu<usize, C>,
}

impl<'a> ShiftedOperator<'a> {
    fn new(pencil: &'a LinearizedPencil, shift: C) -> Result<Self> {
        let q = pencil.quadratic_at(shift)?;
        let lu = q.as_faer().sp_lu().map_err(|_| Error::FactorizationFailed { shift })?;
        let op = Self { pencil, shift, lu };
        // a singular pivot shows up as a non-finite solve
        let probe: Vec<C> = (0..pencil.n).map(|i| C::new(1.0, (i % 7) as f64 * 0.1)).collect();
        let mut y = probe.clone();
        op.solve(&mut y);
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::FactorizationFailed { shift });
        }
        Ok(op)
    }

    fn solve(&self, rhs: &mut [C]) {
        let n = rhs.len();
        self.lu.solve_in_place(MatMut::from_column_major_slice_mut(rhs, n, 1));
    }

    /// `y = (M0 − sM1)⁻¹ M1 x`.
    fn apply(&self, x: &[C]) -> Vec<C> {
        let n = self.pencil.n;
        let (x1, x2) = x.split_at(n);
        let mut u = vec![ZERO; n];
        self.pencil.b.mul_add(C::new(-1.0, 0.0), x1, &mut u);
        self.pencil.c.mul_add(C::new(-1.0, 0.0), x2, &mut u);
        self.pencil.c.mul_add(-self.shift, x1, &mut u);
        self.solve(&mut u);
        let mut y = Vec::with_capacity(2 * n);
        y.extend_from_slice(&u);
        y.extend(x1.iter().zip(&u).map(|(a, b)| a + self.shift * b));
        y
    }
}

/// Orthogonalizes `w` against `basis` (two MGS passes); returns the coefficients.
fn orthogonalize(basis: &[Vec<C>], w: &mut [C]) -> Vec<C> {
    let mut h = vec![ZERO; basis.len()];
    for _ in 0..2 {
        for (j, v) in basis.iter().enumerate() {
            let c = dot(v, w);
            h[j] += c;
            for (wi, vi) in w.iter_mut().zip(v) {
                *wi -= c * vi;
            }
        }
    }
    h
}

struct Ritz {
    theta: C,
    vector: Vec<C>,
}

fn combine(basis: &[Vec<C>], coeffs: &DVector<C>) -> Vec<C> {
    let mut out = vec![ZERO; basis[0].len()];
    for (v, &c) in basis.iter().zip(coeffs.iter()) {
        if c != ZERO {
            for (o, vi) in out.iter_mut().zip(v) {
                *o += c * vi;
            }
        }
    }
    out
}

/// Krylov–Schur iteration for the `nev` largest-magnitude eigenvalues of `op`.
fn krylov_schur(
    op: &ShiftedOperator,
    dim: usize,
    nev: usize,
    subspace: usize,
    max_restarts: usize,
    tol: f64,
    seed: u64,
) -> Result<Vec<Ritz>> {
    let m = subspace.min(dim);
    let nev = nev.min(m);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v0: Vec<C> = (0..dim)
        .map(|_| C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let nrm = norm2(&v0);
    v0.iter_mut().for_each(|x| *x /= nrm);

    let mut basis: Vec<Vec<C>> = vec![v0];
    // A V_k = V_k S + v_{k} bᵀ is stored as the (m+1) × m matrix `h`
    let mut h = DMatrix::<C>::zeros(m + 1, m);
    let mut k = 0;
    for restart in 0..=max_restarts {
        let mut size = m;
        for j in k..m {
            let mut w = op.apply(&basis[j]);
            let coeffs = orthogonalize(&basis, &mut w);
            for (i, c) in coeffs.into_iter().enumerate() {
                h[(i, j)] = c;
            }
            let beta = norm2(&w);
            let scale = h.column(j).iter().map(|v| v.norm()).fold(beta, f64::max);
            if beta <= 1e-14 * scale || basis.len() == dim {
                // invariant subspace: the decomposition is exact
                h[(j + 1, j)] = ZERO;
                size = j + 1;
                break;
            }
            h[(j + 1, j)] = C::new(beta, 0.0);
            w.iter_mut().for_each(|x| *x /= beta);
            basis.push(w);
        }

        let s = h.view((0, 0), (size, size)).into_owned();
        let b = h.view((size, 0), (1, size)).into_owned();
        let (q, t) = sorted_schur(&s, |z| z.norm());
        let bq = &b * &q;
        let want = nev.min(size);
        let mut converged = 0;
        for i in 0..want {
            let y = triangular_eigenvector(&t, i);
            let est = (bq.row(0) * &y)[0].norm();
            if est <= tol * t[(i, i)].norm().max(f64::MIN_POSITIVE) {
                converged += 1;
            }
        }
        log::trace!("shift {}: restart {restart}, {converged}/{want} converged", op.shift);

        if converged == want || size < m {
            let qt = &q;
            return Ok((0..want)
                .map(|i| {
                    let y = qt * triangular_eigenvector(&t, i);
                    Ritz { theta: t[(i, i)], vector: combine(&basis[..size], &y) }
                })
                .collect());
        }
        if restart == max_restarts {
            break;
        }

        let keep = (nev + (m - nev) / 2).min(m - 1).max(want);
        let mut new_basis: Vec<Vec<C>> = (0..keep)
            .map(|i| combine(&basis[..m], &q.column(i).into_owned()))
            .collect();
        new_basis.push(basis[m].clone());
        basis = new_basis;
        h.fill(ZERO);
        for i in 0..keep {
            for j in i..keep {
                h[(i, j)] = t[(i, j)];
            }
            h[(keep, i)] = bq[(0, i)];
        }
        k = keep;
    }
    Err(Error::NoConvergence { shift: op.shift, restarts: max_restarts })
}

fn normalize(pencil: &LinearizedPencil, x: &mut [C]) {
    let n = pencil.n;
    let phi = &x[..n];
    let nrm = match &pencil.gram {
        Some(p) => dot(phi, &p.matvec(phi)).re.max(0.0).sqrt(),
        None => norm2(phi),
    };
    // gauge: largest component of φ real positive
    let big = phi.iter().copied().max_by(|a, b| a.norm().total_cmp(&b.norm())).unwrap_or(ZERO);
    let phase = if big.norm() > 0.0 { big.conj() / big.norm() } else { C::new(1.0, 0.0) };
    let f = phase / nrm;
    x.iter_mut().for_each(|v| *v *= f);
}

fn solve_one_shift(pencil: &LinearizedPencil, cfg: &SolverConfig, index: usize) -> Result<Vec<EigenPair>> {
    let shift = cfg.shifts[index];
    let op = ShiftedOperator::new(pencil, shift)?;
    let arnoldi_tol = (cfg.tol * 1e-3).max(1e-14);
    let ritz = krylov_schur(
        &op,
        2 * pencil.n,
        cfg.n_requested,
        cfg.subspace,
        cfg.max_restarts,
        arnoldi_tol,
        cfg.seed.wrapping_add(index as u64),
    )?;
    let n = pencil.n;
    let mut out = Vec::new();
    for r in ritz {
        if r.theta.norm() == 0.0 {
            continue;
        }
        let alpha = shift + r.theta.inv();
        let mut x = r.vector;
        normalize(pencil, &mut x);
        let (phi, eta) = x.split_at(n);
        let residual = pencil.relative_residual(alpha, phi);
        let aux: Vec<C> = eta.iter().zip(phi).map(|(e, p)| e - alpha * p).collect();
        let aux_defect = norm2(&aux) / norm2(phi);
        if !(residual <= cfg.tol) || !(aux_defect <= 1e-8) {
            log::debug!("dropping α = {alpha} from shift {shift}: residual {residual:e}, aux {aux_defect:e}");
            continue;
        }
        out.push(EigenPair { alpha, phi: phi.to_vec(), residual, aux_defect, shift });
    }
    Ok(out)
}

fn canonical_order(a: &EigenPair, b: &EigenPair) -> std::cmp::Ordering {
    b.alpha.re.total_cmp(&a.alpha.re).then(b.alpha.im.total_cmp(&a.alpha.im))
}

pub fn solve_shift_invert(pencil: &LinearizedPencil, cfg: &SolverConfig) -> Result<Vec<EigenPair>> {
    cfg.validate()?;
    // per-shift results must not depend on the thread count
    faer::set_global_parallelism(faer::Par::Seq);
    let per_shift: Vec<Result<Vec<EigenPair>>> =
        (0..cfg.shifts.len()).into_par_iter().map(|i| solve_one_shift(pencil, cfg, i)).collect();

    let mut all = Vec::new();
    let mut first_failure = None;
    let mut any_ok = false;
    for r in per_shift {
        match r {
            Ok(v) => {
                any_ok = true;
                all.extend(v);
            }
            Err(e @ Error::FactorizationFailed { .. }) => {
                log::warn!("{e}; shift skipped");
                first_failure.get_or_insert(e);
            }
            Err(e) => return Err(e),
        }
    }
    if !any_ok {
        return Err(first_failure.expect("some shift failed"));
    }

    // merge duplicates, keeping the smaller residual
    all.sort_by(canonical_order);
    let mut merged: Vec<EigenPair> = Vec::with_capacity(all.len());
    for p in all {
        let dup = merged
            .iter_mut()
            .find(|q| (q.alpha - p.alpha).norm() < 1e-8 * (1.0 + q.alpha.norm()));
        match dup {
            Some(q) if p.residual < q.residual => *q = p,
            Some(_) => {}
            None => merged.push(p),
        }
    }
    merged.sort_by(canonical_order);
    Ok(merged)
}

/// Keeps pairs with `|arg α| ≤ max_arg` and `Re α` in the window, sorted by
/// `Re α` descending.
pub fn filter_propagating(pairs: &[EigenPair], cfg: &SolverConfig) -> Vec<PropagatingValue> {
    let mut out: Vec<PropagatingValue> = pairs
        .iter()
        .filter(|p| {
            let re = p.alpha.re;
            p.alpha.arg().abs() <= cfg.max_arg && re >= cfg.re_window[0] && re <= cfg.re_window[1]
        })
        .map(|p| PropagatingValue { pair: p.clone(), argument: p.alpha.arg() })
        .collect();
    out.sort_by(|a, b| canonical_order(&a.pair, &b.pair));
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymmetryEntry {
    pub alpha: Complex64,
    pub partner: Option<Complex64>,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SymmetryReport {
    pub entries: Vec<SymmetryEntry>,
}

impl SymmetryReport {
    pub fn unmatched(&self) -> Vec<Complex64> {
        self.entries.iter().filter(|e| e.partner.is_none()).map(|e| e.alpha).collect()
    }

    pub fn all_matched(&self) -> bool {
        self.entries.iter().all(|e| e.partner.is_some())
    }
}

/// For every value with `|Re α| > tol`, looks for an eigenvalue within `tol`
/// of `−α`. Values with `|Re α| ≤ tol` are self-paired.
pub fn check_value_symmetry(values: &[Complex64], tol: f64) -> SymmetryReport {
    let entries = values
        .iter()
        .map(|&a| {
            if a.re.abs() <= tol {
                return SymmetryEntry { alpha: a, partner: Some(a), distance: 0.0 };
            }
            let best = values
                .iter()
                .map(|&b| (b, (b + a).norm()))
                .min_by(|x, y| x.1.total_cmp(&y.1));
            match best {
                Some((b, d)) if d <= tol => SymmetryEntry { alpha: a, partner: Some(b), distance: d },
                Some((_, d)) => SymmetryEntry { alpha: a, partner: None, distance: d },
                None => SymmetryEntry { alpha: a, partner: None, distance: f64::INFINITY },
            }
        })
        .collect();
    SymmetryReport { entries }
}

pub fn check_pair_symmetry(pairs: &[EigenPair], tol: f64) -> SymmetryReport {
    let values: Vec<C> = pairs.iter().map(|p| p.alpha).collect();
    check_value_symmetry(&values, tol)
}

/// `u = φ e^{iαx₁}` with `φ` the periodic P1 interpolant of a mode.
#[derive(Debug, Clone)]
pub struct ModeField<'m> {
    pub alpha: Complex64,
    /// Nodal values of `φ` on every mesh node (zero on Dirichlet nodes).
    pub phi_nodes: Vec<Complex64>,
    mesh: &'m Mesh,
    x1_range: [f64; 2],
}

impl<'m> ModeField<'m> {
    pub fn new(alpha: Complex64, phi: &[Complex64], mesh: &'m Mesh, dofs: &DofMap) -> Self {
        let x1_range = mesh
            .nodes
            .iter()
            .fold([f64::INFINITY, f64::NEG_INFINITY], |r, p| [r[0].min(p[0]), r[1].max(p[0])]);
        Self { alpha, phi_nodes: dofs.expand(phi), mesh, x1_range }
    }

    pub fn from_pair(pair: &EigenPair, mesh: &'m Mesh, dofs: &DofMap) -> Self {
        Self::new(pair.alpha, &pair.phi, mesh, dofs)
    }

    pub fn mesh(&self) -> &Mesh {
        self.mesh
    }

    pub fn period(&self) -> f64 {
        self.x1_range[1] - self.x1_range[0]
    }

    /// Periodic part `φ(x₁, x₂)`; `None` outside the cell in `x₂`.
    pub fn phi(&self, x1: f64, x2: f64) -> Option<Complex64> {
        let period = self.period();
        let mut t = (x1 - self.x1_range[0]).rem_euclid(period) + self.x1_range[0];
        if t > self.x1_range[1] {
            t = self.x1_range[1];
        }
        let (tri, bary) = self.mesh.locate(t, x2)?;
        let nodes = self.mesh.triangles[tri];
        Some((0..3).map(|i| self.phi_nodes[nodes[i]] * bary[i]).sum())
    }

    pub fn eval(&self, x1: f64, x2: f64) -> Option<Complex64> {
        self.phi(x1, x2).map(|p| p * (C::new(0.0, 1.0) * self.alpha * x1).exp())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSample {
    pub x1: f64,
    pub x2: f64,
    pub u: Complex64,
}

/// Samples `u` on a uniform `n1 × n2` grid covering the mesh bounding box,
/// rows ordered by `x₂` then `x₁`.
pub fn mode_field(pair: &EigenPair, mesh: &Mesh, dofs: &DofMap, grid: [usize; 2]) -> Vec<FieldSample> {
    let field = ModeField::from_pair(pair, mesh, dofs);
    let (lo, hi) = mesh.nodes.iter().fold(
        ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]),
        |(lo, hi), p| ([lo[0].min(p[0]), lo[1].min(p[1])], [hi[0].max(p[0]), hi[1].max(p[1])]),
    );
    let coord = |i: usize, n: usize, a: f64, b: f64| if n < 2 { 0.5 * (a + b) } else { a + (b - a) * i as f64 / (n - 1) as f64 };
    let mut out = Vec::with_capacity(grid[0] * grid[1]);
    for j in 0..grid[1] {
        let x2 = coord(j, grid[1], lo[1], hi[1]);
        for i in 0..grid[0] {
            let x1 = coord(i, grid[0], lo[0], hi[0]);
            let u = field.eval(x1, x2).unwrap_or(ZERO);
            out.push(FieldSample { x1, x2, u });
        }
    }
    out
}

/// Dense reference: every finite eigenvalue of the pencil by a full QZ solve.
/// Intended for small systems only.
pub fn dense_eigenvalues(pencil: &LinearizedPencil) -> Result<Vec<Complex64>> {
    let n2 = 2 * pencil.n;
    if n2 > 2000 {
        return Err(Error::invalid(format!("dense solve refused for {n2} unknowns")));
    }
    let to_dense = |m: &SparseMatrix| {
        let mut d = faer::Mat::<C>::zeros(n2, n2);
        for (i, j, v) in m.triplets() {
            d[(i, j)] += v;
        }
        d
    };
    let (m0, m1) = (to_dense(&pencil.m0), to_dense(&pencil.m1));
    let g = m0
        .generalized_eigen(&m1)
        .map_err(|e| Error::invalid(format!("dense QZ failed: {e:?}")))?;
    let (sa, sb) = (g.S_a(), g.S_b());
    let scale = m0.norm_max().max(m1.norm_max());
    let mut out = Vec::new();
    for i in 0..n2 {
        let (a, b) = (sa[i], sb[i]);
        if b.norm() > 1e-12 * scale.max(a.norm()) {
            out.push(a / b);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::c64;

    fn scalar() -> LinearizedPencil {
        let one = |v: f64| SparseMatrix::from_triplets(1, 1, &[(0, 0, c64(v, 0.0))]).unwrap();
        LinearizedPencil::from_blocks(one(2.0), one(-3.0), one(1.0)).unwrap()
    }

    fn scalar_cfg(shift: f64) -> SolverConfig {
        SolverConfig {
            shifts: vec![c64(shift, 0.0)],
            n_requested: 1,
            subspace: 2,
            ..SolverConfig::for_period(2.0 * PI)
        }
    }

    #[test]
    fn scalar_pencil_blocks() {
        let p = scalar();
        assert_eq!(p.m0.nrows(), 2);
        assert_eq!(p.m0.nnz(), p.a.nnz() + 1);
        assert_eq!(p.m1.nnz(), p.b.nnz() + p.c.nnz() + 1);
        let mut ev = dense_eigenvalues(&p).unwrap();
        ev.sort_by(|a, b| a.re.total_cmp(&b.re));
        assert!((ev[0] - c64(1.0, 0.0)).norm() < 1e-12);
        assert!((ev[1] - c64(2.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn scalar_nearest_root() {
        let pairs = solve_shift_invert(&scalar(), &scalar_cfg(0.9)).unwrap();
        assert!((pairs[0].alpha - c64(1.0, 0.0)).norm() < 1e-12);
        assert!(pairs[0].residual <= 1e-12);
        let far = solve_shift_invert(&scalar(), &scalar_cfg(2.2)).unwrap();
        assert!((far[0].alpha - c64(2.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn singular_shift_is_rejected() {
        let r = solve_shift_invert(&scalar(), &scalar_cfg(1.0));
        assert!(matches!(r, Err(Error::FactorizationFailed { .. })));
        let mut cfg = scalar_cfg(1.0);
        cfg.shifts.push(c64(2.1, 0.0));
        let pairs = solve_shift_invert(&scalar(), &cfg).unwrap();
        assert!((pairs[0].alpha - c64(2.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn zero_c_block_has_infinite_eigenvalues() {
        let d = |v: [f64; 2]| SparseMatrix::from_triplets(2, 2, &[(0, 0, c64(v[0], 0.0)), (1, 1, c64(v[1], 0.0))]).unwrap();
        let zero = SparseMatrix::from_triplets(2, 2, &[]).unwrap();
        let p = LinearizedPencil::from_blocks(d([2.0, 3.0]), d([-1.0, -1.0]), zero).unwrap();
        // only the roots of the linear part remain finite
        let ev = dense_eigenvalues(&p).unwrap();
        assert_eq!(ev.len(), 2);
    }

    #[test]
    fn random_pencil_matches_dense() {
        let n = 30;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut rand = |sym: f64| {
            let mut t = Vec::new();
            for i in 0..n {
                for j in i..n {
                    if (i == j && sym > 0.0) || (i != j && rng.gen_bool(0.2)) {
                        let v = c64(rng.gen_range(-1.0..1.0), rng.gen_range(-0.1..0.1));
                        t.push((i, j, v));
                        if i != j {
                            t.push((j, i, v * sym));
                        }
                    }
                }
            }
            SparseMatrix::from_triplets(n, n, &t).unwrap()
        };
        let (a, b, c) = (rand(1.0), rand(-1.0), rand(1.0));
        let p = LinearizedPencil::from_blocks(a, b, c).unwrap();
        let cfg = SolverConfig {
            shifts: vec![c64(0.1, 0.05)],
            n_requested: 6,
            subspace: 20,
            tol: 1e-9,
            max_arg: PI,
            re_window: [-1e3, 1e3],
            ..SolverConfig::for_period(2.0 * PI)
        };
        let pairs = solve_shift_invert(&p, &cfg).unwrap();
        assert_eq!(pairs.len(), 6);
        let dense = dense_eigenvalues(&p).unwrap();
        for q in &pairs {
            let d = dense.iter().map(|z| (z - q.alpha).norm()).fold(f64::INFINITY, f64::min);
            assert!(d < 1e-8 * (1.0 + q.alpha.norm()), "α = {}: {d:e}", q.alpha);
            assert!(q.aux_defect <= 1e-8);
        }
        // the six dense eigenvalues nearest the shift are the ones returned
        let mut near: Vec<C> = dense.clone();
        near.sort_by(|x, y| (x - cfg.shifts[0]).norm().total_cmp(&(y - cfg.shifts[0]).norm()));
        for z in &near[..6] {
            assert!(pairs.iter().any(|q| (q.alpha - z).norm() < 1e-8 * (1.0 + z.norm())));
        }
        // B skew-symmetric ⇒ spectrum closed under α ↦ −α
        let rep = check_value_symmetry(&dense, 1e-8);
        assert!(rep.all_matched(), "{:?}", rep.unmatched());
    }

    #[test]
    fn filter_rules() {
        let mk = |a: C| EigenPair { alpha: a, phi: vec![], residual: 0.0, aux_defect: 0.0, shift: ZERO };
        let pairs = vec![mk(c64(0.4371, 3e-5)), mk(c64(-0.4371, -3e-5)), mk(c64(0.9, 0.5))];
        let cfg = SolverConfig::for_period(2.0 * PI);
        let f = filter_propagating(&pairs, &cfg);
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].pair.alpha, c64(0.4371, 3e-5));
        assert!(filter_propagating(&[], &cfg).is_empty());
        let sorted = filter_propagating(&[mk(c64(0.2, 0.0)), mk(c64(0.3, 0.001))], &cfg);
        assert!(sorted[0].pair.alpha.re > sorted[1].pair.alpha.re);
    }

    #[test]
    fn symmetry_report() {
        let vals = vec![c64(0.3, 0.01), c64(-0.3, -0.01), c64(0.0, 0.0), c64(0.7, 0.0)];
        let rep = check_value_symmetry(&vals, 1e-6);
        assert_eq!(rep.unmatched(), vec![c64(0.7, 0.0)]);
        assert_eq!(rep.entries[2].partner, Some(c64(0.0, 0.0)));
    }

    #[test]
    fn config_validation() {
        let mut cfg = SolverConfig::for_period(2.0 * PI);
        assert!((cfg.shifts[0].re - 0.05).abs() < 1e-15 && (cfg.shifts[4].re - 0.45).abs() < 1e-15);
        assert_eq!(cfg.re_window, [0.0, 0.5]);
        cfg.validate().unwrap();
        cfg.subspace = cfg.n_requested;
        assert!(cfg.validate().is_err());
        let mut cfg = SolverConfig::for_period(1.0);
        cfg.tol = 0.0;
        assert!(cfg.validate().is_err());
    }
}
