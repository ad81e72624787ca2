//! Perfectly matched layers as complex coordinate stretching.
//!
//! A strip of width `d` starting at a coordinate `c0` and extending in the
//! direction `outward` stretches its coordinate with
//! `s(ρ) = 1 - j α_max (ρ / d)^m`, `ρ = (c - c0)·outward ∈ [0, d]`.
//! In the scalar TE form the stretches enter as
//! `c_xx = s_z / s_x`, `c_zz = s_x / s_z`, `c_mass = s_x s_z`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Z,
}

/// One absorbing strip.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PmlSpec {
    pub axis: Axis,
    /// Coordinate of the PML interface.
    pub start: f64,
    pub width: f64,
    /// `+1.0` if the strip extends towards increasing coordinate, `-1.0` otherwise.
    pub outward: f64,
    pub m: f64,
    pub alpha_max: f64,
}

/// `α_max = -(m + 1) λ ln R / (4 π n d)`.
pub fn alpha_max(m: f64, wavelength: f64, n: f64, d: f64, r: f64) -> Result<f64> {
    if !(m >= 1.0) || !(wavelength > 0.0) || !(n > 0.0) || !(d > 0.0) {
        return Err(Error::InvalidInput(format!(
            "PML parameters must satisfy m >= 1 and λ, n, d > 0 (m={m}, λ={wavelength}, n={n}, d={d})"
        )));
    }
    if !(r > 0.0 && r <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "PML reflection target must lie in (0, 1], got {r}"
        )));
    }
    Ok(-(m + 1.0) * wavelength * r.ln() / (4.0 * std::f64::consts::PI * n * d))
}

impl PmlSpec {
    pub fn new(axis: Axis, start: f64, width: f64, outward: f64, m: f64, alpha_max: f64) -> Result<Self> {
        if !(width > 0.0) {
            return Err(Error::InvalidInput(format!("PML width must be positive, got {width}")));
        }
        if !(m >= 1.0) {
            return Err(Error::InvalidInput(format!("PML exponent must be >= 1, got {m}")));
        }
        if outward != 1.0 && outward != -1.0 {
            return Err(Error::InvalidInput("PML direction must be +1 or -1".into()));
        }
        Ok(PmlSpec {
            axis,
            start,
            width,
            outward,
            m,
            alpha_max,
        })
    }

    /// Depth into the strip, or `None` outside it.
    pub fn depth(&self, coord: f64) -> Option<f64> {
        let rho = (coord - self.start) * self.outward;
        let tol = 1e-12 * self.width.max(1.0);
        if rho < -tol || rho > self.width + tol {
            None
        } else {
            Some(rho.clamp(0.0, self.width))
        }
    }

    /// Stretch coefficient at coordinate `coord` along this strip's axis.
    pub fn stretch_at(&self, coord: f64) -> Complex64 {
        match self.depth(coord) {
            Some(rho) => stretch_coeff(self.alpha_max, rho / self.width, self.m),
            None => Complex64::new(1.0, 0.0),
        }
    }
}

/// `1 - j α_max ξ^m` for normalised depth `ξ ∈ [0, 1]`.
pub fn stretch_coeff(alpha_max: f64, xi: f64, m: f64) -> Complex64 {
    Complex64::new(1.0, -alpha_max * xi.powf(m))
}

/// Diffusion and mass coefficients of the stretched scalar operator.
pub fn scalar_coeffs(sx: Complex64, sz: Complex64) -> Result<(Complex64, Complex64, Complex64)> {
    if sx == Complex64::new(0.0, 0.0) || sz == Complex64::new(0.0, 0.0) {
        return Err(Error::InvalidInput("zero PML stretch".into()));
    }
    Ok((sz / sx, sx / sz, sx * sz))
}

/// Set of strips evaluated together; at most one strip per axis is active
/// at a point for the layouts built here, and overlapping strips multiply.
#[derive(Debug, Clone, Default)]
pub struct Stretch {
    pub strips: Vec<PmlSpec>,
}

impl Stretch {
    pub fn none() -> Self {
        Stretch::default()
    }

    pub fn new(strips: Vec<PmlSpec>) -> Self {
        Stretch { strips }
    }

    pub fn sx(&self, x: f64) -> Complex64 {
        self.along(Axis::X, x)
    }

    pub fn sz(&self, z: f64) -> Complex64 {
        self.along(Axis::Z, z)
    }

    fn along(&self, axis: Axis, c: f64) -> Complex64 {
        self.strips
            .iter()
            .filter(|s| s.axis == axis)
            .fold(Complex64::new(1.0, 0.0), |acc, s| {
                let v = s.stretch_at(c);
                if v == Complex64::new(1.0, 0.0) {
                    acc
                } else {
                    acc * v
                }
            })
    }

    /// Only the x-directed strips, as seen by a port cross-section.
    pub fn transverse(&self) -> Stretch {
        Stretch {
            strips: self.strips.iter().copied().filter(|s| s.axis == Axis::X).collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.strips.is_empty()
    }

    /// No strip absorbs, so every coefficient is 1.
    pub fn is_trivial(&self) -> bool {
        self.strips.iter().all(|s| s.alpha_max == 0.0)
    }
}

/// Quadrature degree added in PML cells, where the stretched coefficients
/// are rational rather than polynomial.
pub const PML_EXTRA_DEGREE: usize = 8;

/// Absorption parameters shared by all strips of a layout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PmlParams {
    #[serde(default = "default_m")]
    pub m: f64,
    #[serde(rename = "R", alias = "r", default = "default_r")]
    pub r: f64,
    #[serde(default)]
    pub alpha_max_x: Option<f64>,
    #[serde(default)]
    pub alpha_max_z: Option<f64>,
}

fn default_m() -> f64 {
    2.0
}

fn default_r() -> f64 {
    1e-70
}

impl Default for PmlParams {
    fn default() -> Self {
        PmlParams {
            m: default_m(),
            r: default_r(),
            alpha_max_x: None,
            alpha_max_z: None,
        }
    }
}

impl PmlParams {
    /// Strength of a strip of width `d` in a medium of index `n`, unless
    /// overridden for its axis.
    pub fn alpha_for(&self, axis: Axis, wavelength: f64, n: f64, d: f64) -> Result<f64> {
        let over = match axis {
            Axis::X => self.alpha_max_x,
            Axis::Z => self.alpha_max_z,
        };
        match over {
            Some(a) if a >= 0.0 => Ok(a),
            Some(a) => Err(Error::InvalidInput(format!("alpha_max override must be >= 0, got {a}"))),
            None => alpha_max(self.m, wavelength, n, d, self.r),
        }
    }

    pub fn stretch(&self, strips: &[crate::mesh::PmlStrip], wavelength: f64, n: f64) -> Result<Stretch> {
        let specs = strips
            .iter()
            .map(|s| {
                let a = self.alpha_for(s.axis, wavelength, n, s.width)?;
                PmlSpec::new(s.axis, s.start, s.width, s.outward, self.m, a)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Stretch::new(specs))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn alpha_max_reference_value() {
        let a = alpha_max(2.0, 1.55, 1.5, 1.0, 1e-70).unwrap();
        // 3 · 1.55 · 70 ln 10 / (6π)
        let hand = 3.0 * 1.55 * 70.0 * 10f64.ln() / (4.0 * std::f64::consts::PI * 1.5);
        assert!((a - hand).abs() < 1e-12);
        assert!((a - 39.76).abs() / 39.76 < 5e-3);
    }

    #[test]
    fn alpha_max_limits() {
        assert_eq!(alpha_max(2.0, 1.55, 1.5, 1.0, 1.0).unwrap(), 0.0);
        let a1 = alpha_max(2.0, 1.55, 1.5, 1.0, 1e-70).unwrap();
        let a2 = alpha_max(2.0, 1.55, 1.5, 2.0, 1e-70).unwrap();
        assert!((a1 - 2.0 * a2).abs() < 1e-12);
        assert!(alpha_max(2.0, 1.55, 1.5, 1.0, 1.5).is_err());
        assert!(alpha_max(2.0, -1.0, 1.5, 1.0, 0.5).is_err());
        assert!(alpha_max(0.5, 1.55, 1.5, 1.0, 0.5).is_err());
    }

    #[test]
    fn stretch_profile() {
        let p = PmlSpec::new(Axis::X, 4.0, 1.0, 1.0, 2.0, 39.76).unwrap();
        assert_eq!(p.stretch_at(4.0), c(1.0, 0.0));
        assert!((p.stretch_at(5.0) - c(1.0, -39.76)).norm() < 1e-12);
        assert_eq!(p.stretch_at(3.0), c(1.0, 0.0));
        assert_eq!(p.stretch_at(5.5), c(1.0, 0.0));
        let q = PmlSpec::new(Axis::X, -4.0, 1.0, -1.0, 2.0, 39.76).unwrap();
        assert!((q.stretch_at(-4.5) - c(1.0, -39.76 * 0.25)).norm() < 1e-12);
    }

    #[test]
    fn scalar_coefficients() {
        let one = c(1.0, 0.0);
        assert_eq!(scalar_coeffs(one, one).unwrap(), (one, one, one));
        let s = c(1.0, -39.76);
        let (cxx, czz, cm) = scalar_coeffs(s, one).unwrap();
        assert!((cxx - one / s).norm() < 1e-15);
        assert_eq!(czz, s);
        assert_eq!(cm, s);
        let s = c(1.0, -1.0);
        let (cxx, czz, cm) = scalar_coeffs(s, s).unwrap();
        assert_eq!(cxx, one);
        assert_eq!(czz, one);
        assert_eq!(cm, c(0.0, -2.0));
        assert!(scalar_coeffs(c(0.0, 0.0), one).is_err());
    }

    #[test]
    fn corner_multiplies_axes() {
        let st = Stretch::new(vec![
            PmlSpec::new(Axis::X, 1.0, 1.0, 1.0, 2.0, 10.0).unwrap(),
            PmlSpec::new(Axis::Z, 0.0, 1.0, -1.0, 2.0, 20.0).unwrap(),
        ]);
        assert!((st.sx(2.0) - c(1.0, -10.0)).norm() < 1e-14);
        assert!((st.sz(-1.0) - c(1.0, -20.0)).norm() < 1e-14);
        assert_eq!(st.sz(0.5), c(1.0, 0.0));
        assert_eq!(st.transverse().strips.len(), 1);
    }
}
