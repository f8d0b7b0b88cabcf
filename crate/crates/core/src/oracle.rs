//! Closed-form guided modes of a symmetric dielectric slab.
//!
//! In a core `|x₂| < d` of index `γ` surrounded by vacuum, a guided mode with
//! propagation constant `β = α + 2πm/Λ` has the transverse profile
//!
//! ```text
//! odd:   sin(q x₂)                 |x₂| < d
//!        sign(x₂) sin(q d) e^{−p(|x₂| − d)}   |x₂| > d
//! even:  cos(q x₂)                 |x₂| < d
//!        cos(q d) e^{−p(|x₂| − d)}            |x₂| > d
//! ```
//!
//! with `q = √(γk² − β²)` and `p = √(β² − k²)`. Continuity of `∂₂u` at
//! `|x₂| = d` gives the dispersion relations `q cos(qd) + p sin(qd) = 0` (odd)
//! and `q sin(qd) − p cos(qd) = 0` (even).

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::eigensolver::ModeField;
use crate::error::{Error, Result};
use crate::mesh::Region;
use crate::quadrature::QuadratureRule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    /// `sin` profile, antisymmetric in `x₂`.
    Odd,
    /// `cos` profile, symmetric in `x₂`.
    Even,
}

fn default_half_width() -> f64 {
    0.5
}

fn default_period() -> f64 {
    2.0 * PI
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlabModeSpec {
    pub k: f64,
    pub gamma_core: f64,
    /// Fourier order `m` in `β = α + 2πm/Λ`.
    pub branch_shift: i64,
    pub parity: Parity,
    #[serde(default = "default_period")]
    pub period: f64,
    #[serde(default = "default_half_width")]
    pub core_half_width: f64,
}

impl SlabModeSpec {
    pub fn new(k: f64, gamma_core: f64, branch_shift: i64, parity: Parity) -> Self {
        Self {
            k,
            gamma_core,
            branch_shift,
            parity,
            period: default_period(),
            core_half_width: default_half_width(),
        }
    }

    pub fn beta(&self, alpha: f64) -> f64 {
        alpha + 2.0 * PI * self.branch_shift as f64 / self.period
    }

    /// `(q, p)` for a propagation constant `β`; `None` outside `k < |β| < √γ k`.
    pub fn wavenumbers(&self, beta: f64) -> Option<(f64, f64)> {
        let b2 = beta * beta;
        let (k2, g) = (self.k * self.k, self.gamma_core);
        (b2 > k2 && b2 < g * k2).then(|| ((g * k2 - b2).sqrt(), (b2 - k2).sqrt()))
    }

    /// Mismatch of `∂₂u` across the core boundary; zero at a guided mode.
    pub fn dispersion(&self, beta: f64) -> Option<f64> {
        let d = self.core_half_width;
        self.wavenumbers(beta).map(|(q, p)| match self.parity {
            Parity::Odd => q * (q * d).cos() + p * (q * d).sin(),
            Parity::Even => q * (q * d).sin() - p * (q * d).cos(),
        })
    }
}

/// Scans `α ∈ [0, π/Λ]` for a sign change of the dispersion function and
/// refines it by bisection to `1e−12`.
pub fn dispersion_solve(spec: &SlabModeSpec) -> Result<f64> {
    if !(spec.k > 0.0 && spec.period > 0.0 && spec.core_half_width > 0.0) {
        return Err(Error::invalid("slab parameters must be positive"));
    }
    let hi = PI / spec.period;
    let f = |a: f64| spec.dispersion(spec.beta(a));
    let n = 4000;
    let mut prev: Option<(f64, f64)> = None;
    for i in 0..=n {
        let a = hi * i as f64 / n as f64;
        let Some(v) = f(a) else {
            prev = None;
            continue;
        };
        if v == 0.0 {
            return Ok(a);
        }
        if let Some((a0, v0)) = prev {
            if v0.signum() != v.signum() {
                let (mut lo, mut up, mut flo) = (a0, a, v0);
                while up - lo > 1e-12 {
                    let mid = 0.5 * (lo + up);
                    let fm = f(mid).expect("bracket lies in the admissible interval");
                    if fm.signum() == flo.signum() {
                        lo = mid;
                        flo = fm;
                    } else {
                        up = mid;
                    }
                }
                return Ok(0.5 * (lo + up));
            }
        }
        prev = Some((a, v));
    }
    Err(Error::NoGuidedMode)
}

/// Number of sign changes of the dispersion function on `samples` points of
/// the admissible `|β|` interval `(k, √γ k)`.
pub fn count_sign_changes(spec: &SlabModeSpec, samples: usize) -> usize {
    let (lo, hi) = (spec.k, spec.gamma_core.sqrt() * spec.k);
    let mut count = 0;
    let mut prev: Option<f64> = None;
    for i in 1..samples {
        let b = lo + (hi - lo) * i as f64 / samples as f64;
        if let Some(v) = spec.dispersion(b) {
            if let Some(p) = prev {
                if p.signum() != v.signum() {
                    count += 1;
                }
            }
            prev = Some(v);
        }
    }
    count
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticMode {
    pub spec: SlabModeSpec,
    pub alpha: f64,
    /// Factor making the mode unit in `L²` over `|x₂| ≤ half_height`.
    pub normalization: f64,
    pub half_height: f64,
}

impl AnalyticMode {
    pub fn new(spec: SlabModeSpec, alpha: f64, half_height: f64) -> Result<Self> {
        let beta = spec.beta(alpha);
        let (q, p) = spec.wavenumbers(beta).ok_or(Error::NoGuidedMode)?;
        let d = spec.core_half_width;
        if !(half_height >= d) {
            return Err(Error::invalid("half height must contain the core"));
        }
        let (inner, edge) = match spec.parity {
            Parity::Odd => (d - (2.0 * q * d).sin() / (2.0 * q), (q * d).sin()),
            Parity::Even => (d + (2.0 * q * d).sin() / (2.0 * q), (q * d).cos()),
        };
        let outer = edge * edge * (1.0 - (-2.0 * p * (half_height - d)).exp()) / p;
        let total = spec.period * (inner + outer);
        Ok(Self { spec, alpha, normalization: total.sqrt().recip(), half_height })
    }

    pub fn solve(spec: SlabModeSpec, half_height: f64) -> Result<Self> {
        Self::new(spec, dispersion_solve(&spec)?, half_height)
    }

    /// Transverse profile, unnormalized.
    pub fn profile(&self, x2: f64) -> f64 {
        let (q, p) = self.spec.wavenumbers(self.spec.beta(self.alpha)).expect("guided mode");
        let d = self.spec.core_half_width;
        let a = x2.abs();
        match self.spec.parity {
            Parity::Odd if a <= d => (q * x2).sin(),
            Parity::Odd => x2.signum() * (q * d).sin() * (-p * (a - d)).exp(),
            Parity::Even if a <= d => (q * x2).cos(),
            Parity::Even => (q * d).cos() * (-p * (a - d)).exp(),
        }
    }

    /// `∂₂` of the profile, one-sided limits taken from the side of `x₂`.
    pub fn profile_derivative(&self, x2: f64, inside: bool) -> f64 {
        let (q, p) = self.spec.wavenumbers(self.spec.beta(self.alpha)).expect("guided mode");
        let d = self.spec.core_half_width;
        let s = x2.signum();
        match (self.spec.parity, inside) {
            (Parity::Odd, true) => q * (q * x2).cos(),
            (Parity::Odd, false) => -p * (q * d).sin() * (-p * (x2.abs() - d)).exp(),
            (Parity::Even, true) => -q * (q * x2).sin(),
            (Parity::Even, false) => -s * p * (q * d).cos() * (-p * (x2.abs() - d)).exp(),
        }
    }

    pub fn eval(&self, x1: f64, x2: f64) -> Complex64 {
        let beta = self.spec.beta(self.alpha);
        Complex64::from_polar(self.normalization * self.profile(x2), beta * x1)
    }
}

/// Gauge-invariant `L²` distance over the interior triangles between a mesh
/// field and another field: both are scaled to unit norm, the mesh field is
/// rotated by the phase maximizing `Re⟨u, v⟩`, and `‖u − v‖` is returned.
pub fn aligned_l2_distance(
    field: &ModeField,
    other: impl Fn(f64, f64) -> Complex64,
    quad: &QuadratureRule,
) -> Result<f64> {
    let mesh = field.mesh();
    let i_unit = Complex64::new(0.0, 1.0);
    let mut samples: Vec<(f64, Complex64, Complex64)> = Vec::new();
    for t in 0..mesh.n_triangles() {
        if mesh.regions[t] != Region::Interior {
            continue;
        }
        let tri = mesh.triangles[t];
        let v = mesh.vertices(t);
        let area = mesh.signed_area(t).abs();
        for (lam, &w) in quad.points.iter().zip(&quad.weights) {
            let x1 = lam[0] * v[0][0] + lam[1] * v[1][0] + lam[2] * v[2][0];
            let x2 = lam[0] * v[0][1] + lam[1] * v[1][1] + lam[2] * v[2][1];
            let phi: Complex64 = (0..3).map(|i| field.phi_nodes[tri[i]] * lam[i]).sum();
            let u = phi * (i_unit * field.alpha * x1).exp();
            samples.push((w * area, u, other(x1, x2)));
        }
    }
    let (mut nu, mut nv, mut cross) = (0.0, 0.0, Complex64::new(0.0, 0.0));
    for &(w, u, v) in &samples {
        nu += w * u.norm_sqr();
        nv += w * v.norm_sqr();
        cross += u.conj() * v * w;
    }
    let (nu, nv) = (nu.sqrt(), nv.sqrt());
    if nu < 1e-14 {
        return Err(Error::DegenerateField { norm: nu });
    }
    if nv < 1e-14 {
        return Err(Error::DegenerateField { norm: nv });
    }
    let phase = if cross.norm() > 0.0 { cross / cross.norm() } else { Complex64::new(1.0, 0.0) };
    let err2: f64 = samples
        .iter()
        .map(|&(w, u, v)| w * (u * phase / nu - v / nv).norm_sqr())
        .sum();
    Ok(err2.sqrt())
}

pub fn l2_mode_error(field: &ModeField, analytic: &AnalyticMode, quad: &QuadratureRule) -> Result<f64> {
    aligned_l2_distance(field, |x1, x2| analytic.eval(x1, x2), quad)
}
