//! Symmetric quadrature rules on triangles (Dunavant).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Points in barycentric coordinates; weights sum to one and are scaled by the
/// triangle area on use.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub degree: u32,
}

fn orbit3(w: f64, a: f64, b: f64, pts: &mut Vec<[f64; 3]>, wts: &mut Vec<f64>) {
    for p in [[a, a, b], [a, b, a], [b, a, a]] {
        pts.push(p);
        wts.push(w);
    }
}

fn orbit6(w: f64, a: f64, b: f64, c: f64, pts: &mut Vec<[f64; 3]>, wts: &mut Vec<f64>) {
    for p in [[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]] {
        pts.push(p);
        wts.push(w);
    }
}

impl QuadratureRule {
    /// Six-point rule, exact for polynomials of degree 4.
    pub fn degree4() -> Self {
        let (mut points, mut weights) = (Vec::new(), Vec::new());
        orbit3(0.223381589678011, 0.445948490915965, 0.108103018168070, &mut points, &mut weights);
        orbit3(0.109951743655322, 0.091576213509771, 0.816847572980459, &mut points, &mut weights);
        Self { points, weights, degree: 4 }
    }

    /// Twelve-point rule, exact for polynomials of degree 6.
    pub fn degree6() -> Self {
        let (mut points, mut weights) = (Vec::new(), Vec::new());
        orbit3(0.116786275726379, 0.249286745170910, 0.501426509658179, &mut points, &mut weights);
        orbit3(0.050844906370207, 0.063089014491502, 0.873821971016996, &mut points, &mut weights);
        orbit6(
            0.082851075618374,
            0.053145049844817,
            0.310352451033784,
            0.636502499121399,
            &mut points,
            &mut weights,
        );
        Self { points, weights, degree: 6 }
    }

    pub fn with_degree(degree: u32) -> Result<Self> {
        match degree {
            0..=4 => Ok(Self::degree4()),
            5 | 6 => Ok(Self::degree6()),
            _ => Err(Error::invalid(format!("no quadrature rule of degree {degree}"))),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

impl Default for QuadratureRule {
    fn default() -> Self {
        Self::degree4()
    }
}
