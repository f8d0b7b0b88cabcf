//! Complex coordinate stretching in `x₂` and the PML decay diagnostics.
//!
//! Inside `|x₂| ≤ H` the stretching is the identity. In the layers it ramps up
//! polynomially,
//!
//! ```text
//! s(x₂) = 1 + σ₀ · phase · ((|x₂| − H) / δ)^m ,
//! ```
//!
//! so `Re s ≥ 1`, `Im s ≥ 0` and `s` is continuous at `|x₂| = H`.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn default_phase() -> Complex64 {
    Complex64::new(1.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PmlProfile {
    pub half_height: f64,
    pub thickness: f64,
    pub strength: f64,
    pub power: u32,
    #[serde(default = "default_phase")]
    pub phase: Complex64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Plus,
    Minus,
}

impl PmlProfile {
    /// Cubic profile of strength 40 with phase `1 + i`.
    pub fn standard(half_height: f64, thickness: f64) -> Self {
        Self {
            half_height,
            thickness,
            strength: 40.0,
            power: 3,
            phase: default_phase(),
        }
    }

    pub fn with_strength(mut self, strength: f64) -> Self {
        self.strength = strength;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.thickness > 0.0 && self.half_height > 0.0) {
            return Err(Error::invalid("PML half height and thickness must be positive"));
        }
        if self.power == 0 {
            return Err(Error::invalid("PML power must be at least 1"));
        }
        if self.strength < 0.0 || self.phase.re < 0.0 || self.phase.im < 0.0 {
            return Err(Error::invalid(
                "PML strength and phase components must be non-negative",
            ));
        }
        Ok(())
    }

    pub fn outer(&self) -> f64 {
        self.half_height + self.thickness
    }

    pub fn eval_s(&self, x2: f64) -> Result<Complex64> {
        let limit = self.outer();
        if x2.abs() > limit * (1.0 + 1e-12) {
            return Err(Error::OutOfDomain { x2, limit });
        }
        Ok(self.stretch(x2))
    }

    /// Unchecked evaluation; callers guarantee `|x₂| ≤ H + δ`.
    pub(crate) fn stretch(&self, x2: f64) -> Complex64 {
        let d = x2.abs() - self.half_height;
        if d <= 0.0 {
            return Complex64::new(1.0, 0.0);
        }
        let ramp = (d / self.thickness).min(1.0).powi(self.power as i32);
        Complex64::new(1.0, 0.0) + self.phase * (self.strength * ramp)
    }

    /// `∫ s dx₂` over one layer, in closed form.
    pub fn sigma_integral(&self, side: Side) -> Complex64 {
        // both layers carry the same profile in |x₂|
        let _ = side;
        let ramp_integral = self.thickness / (self.power as f64 + 1.0);
        Complex64::new(self.thickness, 0.0) + self.phase * (self.strength * ramp_integral)
    }
}

/// Square root with the branch cut on the negative imaginary axis, so the
/// result has argument in `(-π/4, 3π/4]`.
pub fn sqrt_cut(w: Complex64) -> Complex64 {
    let mut arg = w.arg();
    if arg <= -FRAC_PI_2 {
        arg += 2.0 * PI;
    }
    Complex64::from_polar(w.norm().sqrt(), arg / 2.0)
}

/// Rayleigh exponents of Fourier order `n` for quasimomentum `α`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeExponents {
    pub k: f64,
    pub alpha: Complex64,
    pub n: i64,
    pub period: f64,
}

impl ModeExponents {
    pub fn alpha_n(&self) -> Complex64 {
        self.alpha + 2.0 * PI * self.n as f64 / self.period
    }

    pub fn beta_n(&self) -> Complex64 {
        let a = self.alpha_n();
        sqrt_cut(Complex64::new(self.k * self.k, 0.0) - a * a)
    }
}

/// `|β_n (coth(−iβ_n σ) − 1)|`: the per-order error of the PML
/// Dirichlet-to-Neumann map.
pub fn dtn_coth_deviation(exp: &ModeExponents, sigma: Complex64) -> Result<f64> {
    let beta = exp.beta_n();
    if beta.norm() <= 1e-14 * exp.k.max(1.0) {
        return Err(Error::CutoffMode { n: exp.n });
    }
    let w = Complex64::new(0.0, -1.0) * beta * sigma;
    // coth(w) − 1 = 2 / (e^{2w} − 1)
    let denom = (2.0 * w).exp() - 1.0;
    Ok((beta * 2.0 / denom).norm())
}

/// Outcome of the pointwise decay bound `|h(z)| ≥ exp(γ √δ |σ| √(|Re z| + k))`
/// with `h(z) = exp(−2i √(k² − z²) σ)`. Magnitudes are kept in log form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayBound {
    pub ln_lhs: f64,
    pub ln_rhs: f64,
    pub gamma: f64,
    pub gamma_near: f64,
    pub gamma_far: f64,
    /// Whether `arg σ` lies in the interval where both case constants are positive.
    pub phase_admissible: bool,
    pub ok: bool,
}

impl DecayBound {
    pub fn lhs(&self) -> f64 {
        self.ln_lhs.exp()
    }

    pub fn rhs(&self) -> f64 {
        self.ln_rhs.exp()
    }
}

/// Interval of admissible `arg σ` for the decay bound with parameter `m`.
pub fn admissible_phase_interval(m: f64) -> (f64, f64) {
    let (near, far) = half_angles(m);
    (near, FRAC_PI_2 - far)
}

// half-widths of the angular sectors that contain arg √(k² − z²) in the two cases
fn half_angles(m: f64) -> (f64, f64) {
    let near = (1.0 / (m - 1.0)).atan() / 2.0;
    let c = 3.0 * m - 1.0;
    let far = (2.0 * c / (c * (m - 1.0) - 1.0)).atan() / 2.0;
    (near, far)
}

pub fn hz_lower_bound_check(k: f64, z: Complex64, sigma: Complex64, delta_pml: f64, m: f64) -> Result<DecayBound> {
    if !(m > 3.0) {
        return Err(Error::invalid(format!("decay bound needs M > 3, got {m}")));
    }
    if !(delta_pml > 0.0 && m * delta_pml < k) {
        return Err(Error::invalid(format!(
            "need 0 < M·δ_pml < k, got δ_pml = {delta_pml}, M = {m}, k = {k}"
        )));
    }
    let (a, b) = (z.re.abs(), z.im.abs());
    let near = a < k - (m - 1.0) * delta_pml;
    let far = a > k + (m - 1.0) * delta_pml;
    if b >= delta_pml || !(near || far) {
        return Err(Error::RegionViolation { z });
    }

    let tau = sigma.arg();
    let (half_near, half_far) = half_angles(m);
    let gamma_near = (tau - half_near).sin().min((tau + half_near).sin());
    let gamma_far = (tau - half_far).cos().min((tau + half_far).cos());
    let gamma = gamma_near.min(gamma_far);
    let (lo, hi) = admissible_phase_interval(m);

    let root = sqrt_cut(Complex64::new(k * k, 0.0) - z * z);
    let ln_lhs = (Complex64::new(0.0, -2.0) * root * sigma).re;
    let ln_rhs = gamma * delta_pml.sqrt() * sigma.norm() * (a + k).sqrt();
    Ok(DecayBound {
        ln_lhs,
        ln_rhs,
        gamma,
        gamma_near,
        gamma_far,
        phase_admissible: tau > lo && tau < hi,
        ok: ln_lhs >= ln_rhs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_PI_4;

    fn profile() -> PmlProfile {
        PmlProfile::standard(1.0, 0.5)
    }

    #[test]
    fn stretching_values() {
        let p = profile();
        assert_eq!(p.eval_s(0.3).unwrap(), Complex64::new(1.0, 0.0));
        assert_relative_eq!(p.eval_s(1.5).unwrap().re, 41.0, epsilon = 1e-12);
        assert_relative_eq!(p.eval_s(1.5).unwrap().im, 40.0, epsilon = 1e-12);
        let s = p.eval_s(1.25).unwrap();
        assert_relative_eq!(s.re, 6.0, epsilon = 1e-12);
        assert_relative_eq!(s.im, 5.0, epsilon = 1e-12);
        assert_eq!(p.eval_s(-1.25).unwrap(), s);
        assert!(matches!(p.eval_s(1.6), Err(Error::OutOfDomain { .. })));
    }

    #[test]
    fn layer_integrals() {
        let p = profile();
        let sp = p.sigma_integral(Side::Plus);
        assert_relative_eq!(sp.re, 5.5, epsilon = 1e-12);
        assert_relative_eq!(sp.im, 5.0, epsilon = 1e-12);
        assert_eq!(sp, p.sigma_integral(Side::Minus));
        let flat = p.with_strength(0.0).sigma_integral(Side::Plus);
        assert_eq!(flat, Complex64::new(0.5, 0.0));

        // Simpson cross-check of the closed form
        let n = 2000;
        let h = p.thickness / n as f64;
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..=n {
            let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += p.stretch(1.0 + i as f64 * h) * w;
        }
        acc *= h / 3.0;
        assert_relative_eq!(acc.re, sp.re, epsilon = 1e-10);
        assert_relative_eq!(acc.im, sp.im, epsilon = 1e-10);
    }

    #[test]
    fn branch_of_beta() {
        // propagating order: real non-negative
        let e = ModeExponents { k: 1.6, alpha: Complex64::new(0.3, 0.0), n: 0, period: 2.0 * PI };
        let b = e.beta_n();
        assert!(b.im.abs() < 1e-15 && b.re > 0.0);
        // evanescent order: positive imaginary
        let e = ModeExponents { n: 3, ..e };
        let b = e.beta_n();
        assert!(b.re.abs() < 1e-15 && b.im > 0.0);
        assert_relative_eq!(b.im, (3.3f64 * 3.3 - 1.6 * 1.6).sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn sqrt_cut_range() {
        for &w in &[Complex64::new(-1.0, -1e-9), Complex64::new(-1.0, 1e-9), Complex64::new(0.0, -2.0)] {
            let r = sqrt_cut(w);
            assert_relative_eq!((r * r - w).norm(), 0.0, epsilon = 1e-12);
            assert!(r.arg() > -FRAC_PI_4 - 1e-12 && r.arg() <= 3.0 * FRAC_PI_4 + 1e-12);
        }
    }

    #[test]
    fn dtn_deviation_evanescent() {
        // β = i  ⇒  −iβσ = σ
        let e = ModeExponents { k: 1.0, alpha: Complex64::new(2f64.sqrt(), 0.0), n: 0, period: 2.0 * PI };
        assert_relative_eq!(e.beta_n().im, 1.0, epsilon = 1e-12);
        let sigma = Complex64::new(5.5, 5.0);
        let d = dtn_coth_deviation(&e, sigma).unwrap();
        let expected = (2.0 / ((2.0 * sigma).exp() - 1.0)).norm();
        assert_relative_eq!(d, expected, max_relative = 1e-12);
        assert_relative_eq!(d, 2.0 * (-11f64).exp(), max_relative = 1e-3);
        assert!((d - 3.3e-5).abs() < 0.1e-5);
    }

    #[test]
    fn dtn_deviation_propagating_and_cutoff() {
        let e = ModeExponents { k: 1.6, alpha: Complex64::new(0.3, 0.0), n: 0, period: 2.0 * PI };
        let d = dtn_coth_deviation(&e, profile().sigma_integral(Side::Plus)).unwrap();
        assert!(d.is_finite() && d > 0.0);
        let cut = ModeExponents { k: 1.0, alpha: Complex64::new(1.0, 0.0), n: 0, period: 2.0 * PI };
        assert!(matches!(dtn_coth_deviation(&cut, Complex64::new(1.0, 1.0)), Err(Error::CutoffMode { .. })));
    }

    #[test]
    fn dtn_deviation_doubling_strength() {
        let e = ModeExponents { k: 1.6, alpha: Complex64::new(0.4368, 0.0), n: -1, period: 2.0 * PI };
        let p = profile();
        let s1 = p.with_strength(20.0).sigma_integral(Side::Plus);
        let s2 = p.with_strength(40.0).sigma_integral(Side::Plus);
        let w = |s: Complex64| (Complex64::new(0.0, -1.0) * e.beta_n() * s).re;
        let (d1, d2) = (dtn_coth_deviation(&e, s1).unwrap(), dtn_coth_deviation(&e, s2).unwrap());
        let (x1, x2) = ((2.0 * w(s1)).exp(), (2.0 * w(s2)).exp());
        assert!(d2 <= d1 * (x1 + 1.0) / (x2 - 1.0));
        assert!(d2 < d1);
    }

    #[test]
    fn decay_bound_near_case_purely_imaginary_sigma() {
        // σ = i|σ| turns h(z) into a real exponential exp(2|σ|√(k² − z²))
        let (k, z, mag) = (1.6, Complex64::new(0.2, 0.0), 3.0);
        let r = hz_lower_bound_check(k, z, Complex64::new(0.0, mag), 0.1, 4.0).unwrap();
        assert_relative_eq!(r.ln_lhs, 2.0 * mag * (k * k - 0.04f64).sqrt(), max_relative = 1e-12);
        assert!(r.ok);
    }

    #[test]
    fn decay_bound_at_origin_with_quarter_phase() {
        let sigma = Complex64::from_polar(5.0, FRAC_PI_4);
        let r = hz_lower_bound_check(1.6, Complex64::new(0.0, 0.0), sigma, 0.1, 4.0).unwrap();
        assert!(r.phase_admissible);
        assert!(r.gamma > 0.0);
        assert!(r.ok);
    }

    #[test]
    fn decay_bound_region_violation() {
        // |Re z| inside the excluded annulus around k
        let e = hz_lower_bound_check(1.6, Complex64::new(1.6, 0.0), Complex64::from_polar(5.0, FRAC_PI_4), 0.1, 4.0);
        assert!(matches!(e, Err(Error::RegionViolation { .. })));
        let e = hz_lower_bound_check(1.6, Complex64::new(0.1, 0.2), Complex64::from_polar(5.0, FRAC_PI_4), 0.1, 4.0);
        assert!(matches!(e, Err(Error::RegionViolation { .. })));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn profile_is_even_and_dominates_one(x in -1.5f64..1.5) {
                let p = profile();
                let s = p.eval_s(x).unwrap();
                prop_assert_eq!(s, p.eval_s(-x).unwrap());
                prop_assert!(s.re >= 1.0 && s.im >= 0.0);
            }

            #[test]
            fn deviation_non_increasing_in_sigma_scale(n in 1i64..6, alpha in 0.0f64..0.5, base in 1.0f64..6.0) {
                let e = ModeExponents { k: 1.6, alpha: Complex64::new(alpha, 0.0), n, period: 2.0 * PI };
                let sigma = Complex64::new(base, base);
                let mut prev = f64::INFINITY;
                for i in 0..20 {
                    let t = 1.0 + 0.25 * i as f64;
                    let d = dtn_coth_deviation(&e, sigma * t).unwrap();
                    prop_assert!(d <= prev * (1.0 + 1e-12));
                    prev = d;
                }
            }
        }
    }
}
