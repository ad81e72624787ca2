mod common;

use std::f64::consts::PI;

use common::{materials, rel_diff, slab, unrestricted_port_solve, OraclePort};
use ndarray::Array2;
use num_complex::Complex64;
use proptest::prelude::*;
use wpbc_core::config::ModeCount;
use wpbc_core::mesh::{build_slab_mesh, extract_trace, Mesh2D, PortLayout, SlabGeometry};
use wpbc_core::pipeline::{assemble_wpbc_volume, run_pml_backed, run_wpbc, solve_with_ports, Setup, WALLS_PML};
use wpbc_core::pml::Stretch;
use wpbc_core::postproc::{line_trace, outgoing_amplitudes, sample_field};
use wpbc_core::scatter2d::{add_loads, assemble_scatter, solve, AssemblyOptions, DofStatus, LinearSolver, Unknown};
use wpbc_core::sparse::GmresOptions;
use wpbc_core::wpbc::{current_plane_source, port_boundary_matrix, PatchGrouping};
use wpbc_core::Materials;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn setup(order: usize) -> Setup {
    Setup::new(1.55, order, materials(2.5, 1.5), 1.5).unwrap()
}

fn small() -> SlabGeometry {
    SlabGeometry {
        pml_width_x: 0.5,
        ..slab(0.4, 0.5, 1.0, 0.25)
    }
}

#[test]
fn restricted_matches_unrestricted_with_full_basis() {
    let s = setup(2);
    let g = small();
    let alpha = [c(1.0), Complex64::new(0.3, -0.2)];
    let (volume, stretch) = assemble_wpbc_volume(&s, &g).unwrap();
    let mi = s.line_modes(&volume.mesh, &stretch, "in", ModeCount::Full).unwrap();
    let mo = s.line_modes(&volume.mesh, &stretch, "out", ModeCount::Full).unwrap();
    let run = solve_with_ports(&s, &volume, mi.clone(), mo.clone(), &alpha).unwrap();
    let oracle = unrestricted_port_solve(
        &volume,
        &[
            OraclePort {
                line: "in",
                modes: &mi,
                incident: alpha.to_vec(),
            },
            OraclePort {
                line: "out",
                modes: &mo,
                incident: vec![],
            },
        ],
    );
    let e = rel_diff(&run.solution.full, &oracle);
    assert!(e < 1e-9, "restricted vs unrestricted: {e:.3e}");
}

#[test]
fn straight_guide_is_reflectionless() {
    let s = setup(4);
    let g = slab(1.0, 1.0, 1.0, 0.125);
    let alpha = [c(1.0)];
    let run = run_wpbc(&s, &g, ModeCount::N(6), ModeCount::N(6), &alpha).unwrap();
    let refl = outgoing_amplitudes(&run.system, &run.solution, "in").unwrap();
    let trans = outgoing_amplitudes(&run.system, &run.solution, "out").unwrap();
    let worst = refl.iter().map(|a| a.norm()).fold(0.0, f64::max);
    let expect = (-Complex64::i() * run.modes_out.as_ref().unwrap().beta[0] * g.length).exp();
    assert!(worst < 1e-4, "reflection {worst:.3e}");
    assert!((trans[0] - expect).norm() < 1e-4, "{} vs {expect}", trans[0]);
    assert!(trans[1..].iter().all(|a| a.norm() < 1e-4));
}

#[test]
fn zero_incident_gives_zero_field() {
    let s = setup(2);
    let run = run_wpbc(&s, &small(), ModeCount::N(3), ModeCount::N(3), &[c(0.0)]).unwrap();
    assert!(run.solution.full.iter().all(|z| *z == c(0.0)));
    assert!(run.solution.amplitudes.iter().flatten().all(|z| *z == c(0.0)));
}

#[test]
fn dirichlet_dofs_are_exactly_zero() {
    let s = setup(3);
    let run = run_wpbc(&s, &small(), ModeCount::N(4), ModeCount::N(4), &[c(1.0)]).unwrap();
    let sys = &run.system;
    let fixed: Vec<usize> = (0..sys.dofs.n_dofs()).filter(|&g| sys.status[g] == DofStatus::Dirichlet).collect();
    assert!(!fixed.is_empty());
    for g in fixed {
        assert_eq!(run.solution.full[g], c(0.0));
        let r = sys.reduced_of[g];
        let (cols, vals) = sys.matrix.row(r);
        assert_eq!(cols, &[r]);
        assert_eq!(vals, &[c(1.0)]);
    }
    // Master unknowns are the total amplitudes on each port.
    let a_in = &run.solution.amplitudes[0];
    assert!(matches!(sys.unknowns[sys.master_offset[0]], Unknown::Mode { port: 0, mode: 0 }));
    let refl = outgoing_amplitudes(sys, &run.solution, "in").unwrap();
    assert!((a_in[0] - c(1.0) - refl[0]).norm() < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]
    #[test]
    fn response_is_linear_in_the_incident_amplitudes(
        a in prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 3),
        b in prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 3),
    ) {
        let s = setup(2);
        let (volume, stretch) = assemble_wpbc_volume(&s, &small()).unwrap();
        let mi = s.line_modes(&volume.mesh, &stretch, "in", ModeCount::N(4)).unwrap();
        let mo = s.line_modes(&volume.mesh, &stretch, "out", ModeCount::N(4)).unwrap();
        let to_c = |v: &Vec<(f64, f64)>| v.iter().map(|&(r, i)| Complex64::new(r, i)).collect::<Vec<_>>();
        let (a, b) = (to_c(&a), to_c(&b));
        let sum: Vec<Complex64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        let run = |al: &[Complex64]| solve_with_ports(&s, &volume, mi.clone(), mo.clone(), al).unwrap().solution.full;
        let (ua, ub, us) = (run(&a), run(&b), run(&sum));
        let combined: Vec<Complex64> = ua.iter().zip(&ub).map(|(x, y)| x + y).collect();
        prop_assert!(rel_diff(&combined, &us) < 1e-10);
    }
}

#[test]
fn patch_grouping_leaves_the_matrix_unchanged() {
    let mut s = setup(3);
    let g = small();
    let systems: Vec<_> = [PatchGrouping::PerElement, PatchGrouping::Grouped(3), PatchGrouping::PerPort]
        .into_iter()
        .map(|grouping| {
            s.grouping = grouping;
            run_wpbc(&s, &g, ModeCount::N(5), ModeCount::N(5), &[c(1.0)]).unwrap().system
        })
        .collect();
    let base = systems[0].matrix.recompress();
    for other in &systems[1..] {
        let m = other.matrix.recompress();
        assert_eq!(m.nnz(), base.nnz());
        for i in 0..base.nrows {
            let (ca, va) = base.row(i);
            let (cb, vb) = m.row(i);
            assert_eq!(ca, cb, "row {i} pattern");
            for (x, y) in va.iter().zip(vb) {
                assert!((x - y).norm() <= 1e-13 * base.max_abs(), "row {i}: {x} vs {y}");
            }
        }
        assert_eq!(other.rhs.len(), systems[0].rhs.len());
        assert!(rel_diff(&other.rhs, &systems[0].rhs) < 1e-14);
    }
    assert!(base.is_pattern_symmetric());
}

/// Rectangle `[0, 1]²` with conducting walls and no absorption.
fn box_problem(n: usize, order: usize, k0: f64, src: &(dyn Fn(f64, f64) -> Complex64 + Sync)) -> (Mesh2D, wpbc_core::scatter2d::ScatterSystem) {
    let mesh = Mesh2D::rectangle(1.0, 1.0, n, n, "air").unwrap();
    let mats: Materials = [("air".to_string(), 1.0)].into_iter().collect();
    let opts = AssemblyOptions {
        source: Some(src),
        ..Default::default()
    };
    let sys = assemble_scatter(&mesh, &mats, k0, order, &Stretch::none(), &WALLS_PML, opts).unwrap();
    (mesh, sys)
}

#[test]
fn manufactured_solution_converges_at_order_p_plus_one() {
    let k0 = 2.0;
    let exact = |x: f64, z: f64| (PI * x).sin() * (PI * z).sin();
    let src = move |x: f64, z: f64| c((2.0 * PI * PI - k0 * k0) * exact(x, z));
    for order in [1, 2, 3] {
        let errors: Vec<f64> = [4, 8]
            .iter()
            .map(|&n| {
                let (_, sys) = box_problem(n, order, k0, &src);
                let sol = solve(&sys, LinearSolver::Direct).unwrap();
                let (pts, _, vals) = sample_field(&sys, &sol.full, order + 2).unwrap();
                let num: f64 = pts.iter().zip(&vals).map(|(p, v)| (v - c(exact(p[0], p[1]))).norm_sqr()).sum();
                let den: f64 = pts.iter().map(|p| exact(p[0], p[1]).powi(2)).sum();
                (num / den).sqrt()
            })
            .collect();
        let rate = (errors[0] / errors[1]).log2();
        assert!(rate > order as f64 + 0.6, "p = {order}: errors {errors:?}, rate {rate:.2}");
    }
}

#[test]
fn gmres_matches_direct_on_a_lossless_system() {
    let src = |x: f64, z: f64| Complex64::new(x * (1.0 - x), z);
    let (_, sys) = box_problem(6, 3, 3.0, &src);
    let direct = solve(&sys, LinearSolver::Direct).unwrap();
    let opts = GmresOptions {
        tol: 1e-13,
        ..Default::default()
    };
    let iter = solve(&sys, LinearSolver::Gmres(opts)).unwrap();
    assert!(iter.iterations.is_some());
    let e = rel_diff(&iter.full, &direct.full);
    assert!(e < 1e-9, "{e:.3e}");
}

#[test]
fn lossless_port_matrix_is_diagonal() {
    let mut s = setup(3);
    s.pml.alpha_max_x = Some(0.0);
    let run = run_wpbc(&s, &small(), ModeCount::N(6), ModeCount::N(6), &[c(1.0)]).unwrap();
    for port in &run.system.ports {
        let m: Array2<Complex64> = port_boundary_matrix(port).unwrap();
        let big = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
        for ((i, k), v) in m.indexed_iter() {
            if i != k {
                assert!(v.norm() < 1e-10 * big, "M[{i},{k}] = {v}");
            }
        }
        let pattern = m.mapv(|z| z.norm() > 1e-10 * big);
        assert_eq!(pattern, pattern.t());
    }
}

#[test]
fn current_sheet_radiates_equally_both_ways() {
    let s = setup(3);
    let h = 0.25;
    let g = SlabGeometry {
        layout: PortLayout::PmlBacked { pml_width_z: 0.5 },
        ..slab(1.0, 1.0, 2.0, h)
    };
    let mut mesh = build_slab_mesh(&g).unwrap();
    mesh.add_line_at_z("mid", 1.0).unwrap();
    mesh.add_line_at_z("below", 1.0 - 2.0 * h).unwrap();
    mesh.add_line_at_z("above", 1.0 + 2.0 * h).unwrap();
    let stretch = s.stretch(&mesh).unwrap();
    let sys = assemble_scatter(&mesh, &s.materials, s.k0, s.order, &stretch, &WALLS_PML, Default::default()).unwrap();
    let modes = s.line_modes(&mesh, &stretch, "mid", ModeCount::N(2)).unwrap();
    let trace = extract_trace(&mesh, "mid").unwrap();
    let tdofs = sys.dofs.trace_dofs(&trace).unwrap();
    let loads = current_plane_source(&modes, &[c(1.0)], &tdofs).unwrap();
    let support: std::collections::BTreeSet<usize> = tdofs.iter().copied().collect();
    assert!(loads.iter().all(|(g, _)| support.contains(g)));
    let sys = add_loads(sys, loads, "sheet").unwrap();
    let sol = solve(&sys, LinearSolver::Direct).unwrap();
    let below = line_trace(&sys, &sol.full, "below", &modes).unwrap();
    let above = line_trace(&sys, &sol.full, "above", &modes).unwrap();
    let (pb, pa) = (below.norm().powi(2), above.norm().powi(2));
    assert!(((pa - pb) / pa).abs() < 1e-6, "power above {pa}, below {pb}");
}

#[test]
fn pml_backed_run_reports_layout_errors() {
    let s = setup(2);
    let err = run_pml_backed(&s, &small(), &[c(1.0)]).unwrap_err();
    assert!(err.to_string().contains("PML-backed"));
}
