//! Finite-element solver for scalar TE scattering in planar slab waveguides
//! with waveguide port boundary conditions imposed by restricting the
//! approximation space on the port lines.

pub mod basis;
pub mod config;
pub mod dofs;
pub mod error;
pub mod mesh;
pub mod modal1d;
pub mod pipeline;
pub mod pml;
pub mod postproc;
pub mod quadrature;
pub mod scatter2d;
pub mod sparse;
pub mod vtk;
pub mod wpbc;

pub use error::{Error, Result};

use std::collections::BTreeMap;

/// Refractive index per material name.
pub type Materials = BTreeMap<String, f64>;

/// Looks up the index of a region's material.
pub fn refractive_index(materials: &Materials, region: &mesh::Region) -> Result<f64> {
    materials
        .get(&region.material)
        .copied()
        .ok_or_else(|| Error::MissingMaterial {
            material: region.material.clone(),
            region: region.name.clone(),
        })
}

/// Free-space wavenumber for a wavelength in µm.
pub fn wavenumber(wavelength: f64) -> Result<f64> {
    if !(wavelength > 0.0) || !wavelength.is_finite() {
        return Err(Error::InvalidInput(format!("wavelength must be positive, got {wavelength}")));
    }
    Ok(2.0 * std::f64::consts::PI / wavelength)
}
