//! Small dense kernels for the Krylov–Schur restart: sorted complex Schur form
//! and eigenvectors of triangular matrices.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

type C = Complex64;

/// Plane rotation `[c s; −s̄ c]` with real `c` mapping `(f, g)` to `(r, 0)`.
fn lartg(f: C, g: C) -> (f64, C) {
    let (fa, ga) = (f.norm(), g.norm());
    if ga == 0.0 {
        return (1.0, C::new(0.0, 0.0));
    }
    if fa == 0.0 {
        return (0.0, g.conj() / ga);
    }
    let nrm = fa.hypot(ga);
    (fa / nrm, (f / fa) * g.conj() / nrm)
}

// x ← c·x + s·y,  y ← c·y − s̄·x
fn rot(x: &mut C, y: &mut C, c: f64, s: C) {
    let (a, b) = (*x, *y);
    *x = a * c + s * b;
    *y = b * c - s.conj() * a;
}

/// Swaps diagonal entries `k` and `k + 1` of the upper triangular `t`, updating `q`.
fn swap_adjacent(t: &mut DMatrix<C>, q: &mut DMatrix<C>, k: usize) {
    let n = t.nrows();
    let (t11, t22) = (t[(k, k)], t[(k + 1, k + 1)]);
    let (c, s) = lartg(t[(k, k + 1)], t22 - t11);
    for j in k + 2..n {
        let (mut x, mut y) = (t[(k, j)], t[(k + 1, j)]);
        rot(&mut x, &mut y, c, s);
        t[(k, j)] = x;
        t[(k + 1, j)] = y;
    }
    let sc = s.conj();
    for i in 0..k {
        let (mut x, mut y) = (t[(i, k)], t[(i, k + 1)]);
        rot(&mut x, &mut y, c, sc);
        t[(i, k)] = x;
        t[(i, k + 1)] = y;
    }
    t[(k, k)] = t22;
    t[(k + 1, k + 1)] = t11;
    for i in 0..n {
        let (mut x, mut y) = (q[(i, k)], q[(i, k + 1)]);
        rot(&mut x, &mut y, c, sc);
        q[(i, k)] = x;
        q[(i, k + 1)] = y;
    }
}

/// Complex Schur form `s = q t qᴴ` with the diagonal of `t` ordered by
/// descending `key`.
pub(crate) fn sorted_schur(s: &DMatrix<C>, key: impl Fn(C) -> f64) -> (DMatrix<C>, DMatrix<C>) {
    let (mut q, mut t) = nalgebra::linalg::Schur::new(s.clone()).unpack();
    let n = t.nrows();
    // clear rounding below the diagonal
    for j in 0..n {
        for i in j + 1..n {
            t[(i, j)] = C::new(0.0, 0.0);
        }
    }
    // bubble sort: stable, n is small
    for pass in 0..n {
        let mut swapped = false;
        for k in (pass..n.saturating_sub(1)).rev() {
            if key(t[(k + 1, k + 1)]) > key(t[(k, k)]) {
                swap_adjacent(&mut t, &mut q, k);
                swapped = true;
            }
        }
        if !swapped {
            break;
        }
    }
    (q, t)
}

/// Eigenvector of upper triangular `t` for the diagonal entry `k`, normalized to
/// unit 2-norm. Components past `k` vanish.
pub(crate) fn triangular_eigenvector(t: &DMatrix<C>, k: usize) -> DVector<C> {
    let n = t.nrows();
    let lambda = t[(k, k)];
    let scale = t.iter().map(|v| v.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let small = scale * f64::EPSILON;
    let mut y = DVector::zeros(n);
    y[k] = C::new(1.0, 0.0);
    for i in (0..k).rev() {
        let mut acc = C::new(0.0, 0.0);
        for j in i + 1..=k {
            acc += t[(i, j)] * y[j];
        }
        let mut d = t[(i, i)] - lambda;
        if d.norm() < small {
            d = C::new(small, 0.0);
        }
        y[i] = -acc / d;
    }
    let nrm = y.norm();
    y / C::new(nrm, 0.0)
}
