mod common;

use wpbc_core::mesh::{slab_cross_section, PortLayout, SlabGeometry};
use wpbc_core::modal1d::*;
use wpbc_core::pml::{PmlParams, Stretch};
use common::materials;
use wpbc_core::wavenumber;

fn slab(h: f64) -> SlabGeometry {
    SlabGeometry {
        core_width: 1.0,
        second_core_width: None,
        discontinuity_z: None,
        cladding: 2.5,
        pml_width_x: 1.0,
        length: 2.0,
        eval_offset: h,
        h,
        layout: PortLayout::Wpbc,
    }
}

#[test]
fn oracle_sanity() {
    let k0 = wavenumber(1.55).unwrap();
    let b = common::slab_te_betas(k0, 2.5, 1.5, 1.0);
    assert_eq!(b.len(), 3);
    for x in &b {
        assert!(*x > k0 * 1.5 && *x < k0 * 2.5);
    }
}

#[test]
fn slab_guided_modes_match_dispersion() {
    let lambda = 1.55;
    let k0 = wavenumber(lambda).unwrap();
    let g = slab(lambda / 16.0);
    let mesh = slab_cross_section(&g, 0.0).unwrap();
    let mats = materials(2.5, 1.5);
    let stretch = PmlParams::default().stretch(&mesh.pml_strips, lambda, 1.5).unwrap();
    let sys = assemble_modal(&mesh, &mats, k0, 4, &stretch).unwrap();
    let ms = solve_modes(&sys, 10, &ModeOptions::default()).unwrap();
    let oracle = common::slab_te_betas(k0, 2.5, 1.5, 1.0);
    for (i, b) in oracle.iter().enumerate() {
        let rel = (ms.beta[i] - b).norm() / b;
        println!("mode {i}: {} vs {b} rel {rel:.3e}", ms.beta[i]);
        assert!(rel < 1e-7);
        assert!(ms.beta[i].im.abs() < 1e-8 * b);
    }
    let guided = ms
        .beta
        .iter()
        .filter(|b| b.im.abs() < 1e-8 * b.norm() && b.re > k0 * 1.5 && b.re < k0 * 2.5)
        .count();
    assert_eq!(guided, 3);
}

#[test]
fn pml_off_matches_no_stretch() {
    let lambda = 1.55;
    let k0 = wavenumber(lambda).unwrap();
    let g = slab(2.0 / 15.0);
    let mesh = slab_cross_section(&g, 0.0).unwrap();
    let mats = materials(2.5, 1.5);
    let p = PmlParams {
        alpha_max_x: Some(0.0),
        ..PmlParams::default()
    };
    let stretch = p.stretch(&mesh.pml_strips, lambda, 1.5).unwrap();
    let a = assemble_modal(&mesh, &mats, k0, 3, &stretch).unwrap();
    let b = assemble_modal(&mesh, &mats, k0, 3, &Stretch::none()).unwrap();
    assert_eq!(a.a.to_dense(), b.a.to_dense());
    assert_eq!(a.b.to_dense(), b.b.to_dense());
}

#[test]
fn lossless_conjugated_products_diagonal() {
    let lambda = 1.55;
    let k0 = wavenumber(lambda).unwrap();
    let g = slab(2.0 / 15.0);
    let mesh = slab_cross_section(&g, 0.0).unwrap();
    let mats = materials(2.5, 1.5);
    let sys = assemble_modal(&mesh, &mats, k0, 4, &Stretch::none()).unwrap();
    let ms = port_modes(&sys, 20, &ModeOptions::default()).unwrap();
    assert!(max_off_diagonal(&biorthogonality_matrix(&ms, true).unwrap()) < 1e-10);
    assert!(max_off_diagonal(&biorthogonality_matrix(&ms, false).unwrap()) < 1e-10);
}

#[test]
fn full_spectrum_residuals() {
    let lambda = 1.55;
    let k0 = wavenumber(lambda).unwrap();
    let g = slab(0.5);
    let mesh = slab_cross_section(&g, 0.0).unwrap();
    let mats = materials(2.5, 1.5);
    let stretch = PmlParams::default().stretch(&mesh.pml_strips, lambda, 1.5).unwrap();
    let sys = assemble_modal(&mesh, &mats, k0, 2, &stretch).unwrap();
    let n = sys.dim();
    let ms = solve_modes(&sys, n, &ModeOptions::default()).unwrap();
    assert_eq!(ms.len(), n);
    for r in &ms.residuals {
        assert!(*r <= 1e-10, "residual {r}");
    }
}

#[test]
fn pml_modes_biorthogonal() {
    let lambda = 1.55;
    let k0 = wavenumber(lambda).unwrap();
    let g = slab(2.0 / 15.0);
    let mesh = slab_cross_section(&g, 0.0).unwrap();
    let mats = materials(2.5, 1.5);
    let stretch = PmlParams::default().stretch(&mesh.pml_strips, lambda, 1.5).unwrap();
    let sys = assemble_modal(&mesh, &mats, k0, 4, &stretch).unwrap();
    let t = std::time::Instant::now();
    let ms = port_modes(&sys, 50, &ModeOptions::default()).unwrap();
    let nc = biorthogonality_matrix(&ms, false).unwrap();
    let c = biorthogonality_matrix(&ms, true).unwrap();
    println!("N = {}, off nc {:.3e}, off c {:.3e}, {:?}", sys.dim(), max_off_diagonal(&nc), max_off_diagonal(&c), t.elapsed());
    assert!(max_off_diagonal(&nc) < 1e-10);
    assert!(max_off_diagonal(&c) > 1e-3);
}
