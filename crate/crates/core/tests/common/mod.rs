//! Independent reference solutions shared by the integration tests.

#![allow(dead_code)]

use std::f64::consts::PI;

/// Guided TE propagation constants of a symmetric slab (core index `n1`,
/// cladding `n2`, width `w`), from bisection on
/// `tan(u - mπ/2) = sqrt(V² - u²) / u` with `u = κ w / 2`.
pub fn slab_te_betas(k0: f64, n1: f64, n2: f64, w: f64) -> Vec<f64> {
    let v = 0.5 * k0 * w * (n1 * n1 - n2 * n2).sqrt();
    let mut out = Vec::new();
    let mut m = 0usize;
    while (m as f64) * PI / 2.0 < v {
        let g = |u: f64| (u - m as f64 * PI / 2.0).tan() - (v * v - u * u).sqrt() / u;
        let mut lo = m as f64 * PI / 2.0 + 1e-15;
        let mut hi = ((m + 1) as f64 * PI / 2.0 - 1e-15).min(v);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let u = 0.5 * (lo + hi);
        let kappa = 2.0 * u / w;
        out.push((k0 * k0 * n1 * n1 - kappa * kappa).sqrt());
        m += 1;
    }
    out
}

/// `(k0² - (mπ/L)²)^{1/2}` for the first `n` modes of a PEC strip.
pub fn pec_strip_betas(k0: f64, l: f64, n: usize) -> Vec<f64> {
    (1..=n).map(|m| (k0 * k0 - (m as f64 * PI / l).powi(2)).sqrt()).collect()
}

use ndarray::{Array1, Array2};
use ndarray_linalg::{Inverse, Solve};
use num_complex::Complex64;
use wpbc_core::mesh::{extract_trace, PortLayout, SlabGeometry};
use wpbc_core::modal1d::ModeSet;
use wpbc_core::scatter2d::ScatterSystem;
use wpbc_core::Materials;

pub fn materials(core: f64, clad: f64) -> Materials {
    [("core".to_string(), core), ("cladding".to_string(), clad)].into_iter().collect()
}

pub fn slab(core_width: f64, cladding: f64, length: f64, h: f64) -> SlabGeometry {
    SlabGeometry {
        core_width,
        second_core_width: None,
        discontinuity_z: None,
        cladding,
        pml_width_x: 1.0,
        length,
        eval_offset: h,
        h,
        layout: PortLayout::Wpbc,
    }
}

/// Port data for [`unrestricted_port_solve`]: line, full mode basis and
/// incident amplitudes.
pub struct OraclePort<'a> {
    pub line: &'a str,
    pub modes: &'a ModeSet,
    pub incident: Vec<Complex64>,
}

/// Solves the port problem without restricting the trace space: with a
/// square, invertible `D` the restricted system `Dᴴ K D a + M a = g` is
/// the same as `K t + D⁻ᴴ M D⁻¹ t = D⁻ᴴ g` for `t = D a`. `M` and `g` are
/// built here from the mode vectors. Returns every global coefficient.
pub fn unrestricted_port_solve(volume: &ScatterSystem, ports: &[OraclePort]) -> Vec<Complex64> {
    let j = Complex64::i();
    let mut k = volume.matrix.to_dense();
    let mut rhs = Array1::from(volume.rhs.clone());
    for p in ports {
        let trace = extract_trace(&volume.mesh, p.line).unwrap();
        let rows: Vec<usize> = volume.dofs.trace_dofs(&trace).unwrap().iter().map(|&g| volume.reduced_of[g]).collect();
        let d = p.modes.vectors.clone();
        let n = d.ncols();
        assert_eq!(d.nrows(), n, "oracle needs the full mode basis");
        let b = p.modes.b.to_dense();
        let be = b.dot(&d);
        let mut m = Array2::<Complex64>::zeros((n, n));
        for i in 0..n {
            for c in 0..n {
                let s: Complex64 = (0..n).map(|r| d[[r, i]].conj() * be[[r, c]]).sum();
                m[[i, c]] = j * p.modes.beta[c] * s;
            }
        }
        let mut alpha = Array1::<Complex64>::zeros(n);
        for (i, a) in p.incident.iter().enumerate() {
            alpha[i] = *a;
        }
        let g = m.dot(&alpha).mapv(|z| 2.0 * z);
        let dinv = d.inv().unwrap();
        let dinv_h = dinv.t().mapv(|z| z.conj());
        let t = dinv_h.dot(&m).dot(&dinv);
        let gt = dinv_h.dot(&g);
        for (a, &ra) in rows.iter().enumerate() {
            rhs[ra] += gt[a];
            for (c, &rc) in rows.iter().enumerate() {
                k[[ra, rc]] += t[[a, c]];
            }
        }
    }
    let x = k.solve(&rhs).unwrap();
    volume.reduced_of.iter().map(|&r| if r == usize::MAX { Complex64::new(0.0, 0.0) } else { x[r] }).collect()
}

/// `‖a - b‖ / ‖b‖` in the Euclidean norm.
pub fn rel_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    (num / den).sqrt()
}
