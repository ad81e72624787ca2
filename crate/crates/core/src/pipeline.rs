//! End-to-end runs on slab geometries: WPBC-terminated and PML-backed
//! scattering, the straight-guide validation and the mode-count sweep.

use std::time::{Duration, Instant};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::config::{ModeCount, RunConfig, SolverKind};
use crate::error::{Error, Result};
use crate::mesh::{build_slab_mesh, extract_trace, Mesh2D, PortLayout, SlabGeometry};
use crate::modal1d::{assemble_modal, port_modes, ModeOptions, ModeSet, TraceSpace};
use crate::pml::{PmlParams, Stretch};
use crate::postproc::{line_relative_error, line_trace, mode_projection_residual, reference_field};
use crate::scatter2d::{
    add_loads, apply_wpbc, assemble_scatter, solve, AssemblyOptions, LinearSolver, ScatterSolution, ScatterSystem,
};
use crate::wpbc::{current_plane_source, PatchGrouping, Port};
use crate::{wavenumber, Materials};

/// Boundaries closed by conducting walls in each layout.
pub const WALLS_WPBC: [&str; 2] = ["left", "right"];
pub const WALLS_PML: [&str; 4] = ["left", "right", "bottom", "top"];

/// Incident amplitudes of the straight-guide validation.
pub fn validation_amplitudes() -> Vec<Complex64> {
    [0.5, 2.0, 2.5].iter().map(|&a| Complex64::new(a, 0.0)).collect()
}

/// Physical and numerical parameters shared by all runs.
#[derive(Debug, Clone)]
pub struct Setup {
    pub wavelength: f64,
    pub k0: f64,
    pub order: usize,
    pub materials: Materials,
    pub pml: PmlParams,
    /// Index entering the absorption formula.
    pub n_ref: f64,
    pub solver: LinearSolver,
    pub grouping: PatchGrouping,
    pub condense: bool,
    pub modes: ModeOptions,
}

impl Setup {
    pub fn new(wavelength: f64, order: usize, materials: Materials, n_ref: f64) -> Result<Setup> {
        Ok(Setup {
            wavelength,
            k0: wavenumber(wavelength)?,
            order,
            materials,
            pml: PmlParams::default(),
            n_ref,
            solver: LinearSolver::Direct,
            grouping: PatchGrouping::default(),
            condense: false,
            modes: ModeOptions::default(),
        })
    }

    pub fn from_config(cfg: &RunConfig) -> Result<Setup> {
        let mut s = Setup::new(cfg.wavelength, cfg.order, cfg.materials(), cfg.n_ref())?;
        s.pml = cfg.pml.params();
        s.solver = match cfg.solver.kind {
            SolverKind::Direct => LinearSolver::Direct,
            SolverKind::Gmres => LinearSolver::Gmres(cfg.solver.gmres()),
        };
        s.grouping = cfg.solver.grouping;
        s.condense = cfg.solver.condense;
        Ok(s)
    }

    pub fn stretch(&self, mesh: &Mesh2D) -> Result<Stretch> {
        self.pml.stretch(&mesh.pml_strips, self.wavelength, self.n_ref)
    }

    fn assembly(&self) -> AssemblyOptions<'static> {
        AssemblyOptions {
            condense: self.condense,
            grouping: self.grouping,
            source: None,
        }
    }

    /// Normalised modes on the trace of `line`.
    pub fn line_modes(&self, mesh: &Mesh2D, stretch: &Stretch, line: &str, count: ModeCount) -> Result<ModeSet> {
        let trace = extract_trace(mesh, line)?;
        let sys = assemble_modal(&trace, &self.materials, self.k0, self.order, &stretch.transverse())?;
        let n = count.resolve(sys.dim());
        if n == 0 || n > sys.dim() {
            return Err(Error::InvalidInput(format!(
                "{n} modes requested on line `{line}` whose trace space has dimension {}",
                sys.dim()
            )));
        }
        port_modes(&sys, n, &self.modes)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Timings {
    pub modes: Duration,
    pub assembly: Duration,
    pub solve: Duration,
}

/// A solved scattering problem.
#[derive(Debug, Clone)]
pub struct Run {
    pub system: ScatterSystem,
    pub solution: ScatterSolution,
    /// Modes of the input line (port or source plane).
    pub modes_in: ModeSet,
    /// Modes of the output port, if any.
    pub modes_out: Option<ModeSet>,
    pub timings: Timings,
}

impl Run {
    pub fn dofs(&self) -> usize {
        self.system.dim()
    }
}

/// Volume system of a WPBC-terminated slab, before ports are applied.
pub fn assemble_wpbc_volume(setup: &Setup, geom: &SlabGeometry) -> Result<(ScatterSystem, Stretch)> {
    if geom.layout != PortLayout::Wpbc {
        return Err(Error::InvalidInput("WPBC run needs the WPBC layout".into()));
    }
    let mesh = build_slab_mesh(geom)?;
    let stretch = setup.stretch(&mesh)?;
    let sys = assemble_scatter(&mesh, &setup.materials, setup.k0, setup.order, &stretch, &WALLS_WPBC, setup.assembly())?;
    Ok((sys, stretch))
}

/// Solves with ports on `in` (incident `alpha`) and `out` using the given
/// mode sets.
pub fn solve_with_ports(setup: &Setup, volume: &ScatterSystem, modes_in: ModeSet, modes_out: ModeSet, alpha: &[Complex64]) -> Result<Run> {
    let t = Instant::now();
    let mesh = &volume.mesh;
    let pin = Port::new(mesh, &volume.dofs, "in", -1.0, modes_in.clone(), Some(alpha.to_vec()))?;
    let pout = Port::new(mesh, &volume.dofs, "out", 1.0, modes_out.clone(), None)?;
    let sys = apply_wpbc(volume.clone(), vec![pin, pout])?;
    let assembly = t.elapsed();
    let t = Instant::now();
    let solution = solve(&sys, setup.solver)?;
    Ok(Run {
        system: sys,
        solution,
        modes_in,
        modes_out: Some(modes_out),
        timings: Timings {
            modes: Duration::ZERO,
            assembly,
            solve: t.elapsed(),
        },
    })
}

/// Slab with waveguide ports on both ends and `alpha` incident at `in`.
pub fn run_wpbc(setup: &Setup, geom: &SlabGeometry, n_in: ModeCount, n_out: ModeCount, alpha: &[Complex64]) -> Result<Run> {
    let t = Instant::now();
    let (volume, stretch) = assemble_wpbc_volume(setup, geom)?;
    let assembly = t.elapsed();
    let t = Instant::now();
    let (mi, mo) = rayon::join(
        || setup.line_modes(&volume.mesh, &stretch, "in", n_in),
        || setup.line_modes(&volume.mesh, &stretch, "out", n_out),
    );
    let modes = t.elapsed();
    let mut run = solve_with_ports(setup, &volume, mi?, mo?, alpha)?;
    run.timings.modes = modes;
    run.timings.assembly += assembly;
    Ok(run)
}

/// Slab extended by z-PML strips, excited by a current sheet on `in`
/// carrying `alpha` in the first modes of that line.
pub fn run_pml_backed(setup: &Setup, geom: &SlabGeometry, alpha: &[Complex64]) -> Result<Run> {
    if !matches!(geom.layout, PortLayout::PmlBacked { .. }) {
        return Err(Error::InvalidInput("PML-backed run needs the PML-backed layout".into()));
    }
    let t = Instant::now();
    let mesh = build_slab_mesh(geom)?;
    let stretch = setup.stretch(&mesh)?;
    let sys = assemble_scatter(&mesh, &setup.materials, setup.k0, setup.order, &stretch, &WALLS_PML, setup.assembly())?;
    let assembly = t.elapsed();
    let t = Instant::now();
    let n = alpha.len().max(1);
    let modes_in = setup.line_modes(&mesh, &stretch, "in", ModeCount::N(n))?;
    let modes = t.elapsed();
    let t = Instant::now();
    let trace = extract_trace(&mesh, "in")?;
    let loads = current_plane_source(&modes_in, alpha, &sys.dofs.trace_dofs(&trace)?)?;
    let sys = add_loads(sys, loads, "current sheet on `in`")?;
    let assembly = assembly + t.elapsed();
    let t = Instant::now();
    let solution = solve(&sys, setup.solver)?;
    Ok(Run {
        system: sys,
        solution,
        modes_in,
        modes_out: None,
        timings: Timings {
            modes,
            assembly,
            solve: t.elapsed(),
        },
    })
}

/// Relative error on `in_e` against `Σ α_k e^{-jβ_k d} e_k`; `None` when
/// the reference vanishes.
pub fn eval_line_error(run: &Run, alpha: &[Complex64], d: f64) -> Result<Option<f64>> {
    let reference = reference_field(&run.modes_in, alpha, d)?;
    if reference.norm() == 0.0 {
        return Ok(None);
    }
    let u = line_trace(&run.system, &run.solution.full, "in_e", &run.modes_in)?;
    line_relative_error(&u, &reference).map(Some)
}

#[derive(Debug, Clone)]
pub struct Validation {
    pub alpha: Vec<Complex64>,
    pub err_wpbc: Option<f64>,
    pub err_pml: Option<f64>,
    pub dofs_wpbc: usize,
    pub dofs_pml: usize,
    pub wpbc: Run,
    pub pml: Run,
}

impl Validation {
    /// Both errors defined and the WPBC one strictly smaller.
    pub fn wpbc_wins(&self) -> bool {
        matches!((self.err_wpbc, self.err_pml), (Some(w), Some(p)) if w < p)
    }
}

/// Straight guide solved once with ports and once PML-backed, both
/// compared with analytic propagation on `in_e`.
pub fn validate(setup: &Setup, geom: &SlabGeometry, pml_width_z: f64, n_ports: ModeCount, alpha: &[Complex64]) -> Result<Validation> {
    if geom.second_core_width.is_some() {
        return Err(Error::InvalidInput("validation needs a straight guide".into()));
    }
    let wg = SlabGeometry {
        layout: PortLayout::Wpbc,
        ..geom.clone()
    };
    let pg = SlabGeometry {
        layout: PortLayout::PmlBacked { pml_width_z },
        ..geom.clone()
    };
    let n_needed = ModeCount::N(alpha.len().max(1));
    let n_ports = match n_ports {
        ModeCount::N(n) if n < alpha.len() => n_needed,
        other => other,
    };
    let (wpbc, pml) = rayon::join(
        || run_wpbc(setup, &wg, n_ports, n_ports, alpha),
        || run_pml_backed(setup, &pg, alpha),
    );
    let (wpbc, pml) = (wpbc?, pml?);
    let d = geom.eval_offset;
    Ok(Validation {
        alpha: alpha.to_vec(),
        err_wpbc: eval_line_error(&wpbc, alpha, d)?,
        err_pml: eval_line_error(&pml, alpha, d)?,
        dofs_wpbc: wpbc.dofs(),
        dofs_pml: pml.dofs(),
        wpbc,
        pml,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct SweepRow {
    pub n_in: usize,
    pub n_out: usize,
    /// Residual on `in_e` with the input port's modes.
    pub r_in: f64,
    /// Residual on `out_e` with the output port's modes.
    pub r_out: f64,
    pub solve: Duration,
}

/// Solves the slab for every `(n_in, n_out)` pair and records the
/// mode-projection residual on both evaluation lines. Mode sets are
/// computed once with the largest count and truncated.
pub fn nmodes_sweep(setup: &Setup, geom: &SlabGeometry, pairs: &[(ModeCount, ModeCount)], alpha: &[Complex64]) -> Result<Vec<SweepRow>> {
    if pairs.is_empty() {
        return Err(Error::InvalidInput("empty mode-count grid".into()));
    }
    let (volume, stretch) = assemble_wpbc_volume(setup, geom)?;
    let dim = TraceSpace::new(&extract_trace(&volume.mesh, "in")?, setup.order)?.n_free();
    let largest = |pick: fn(&(ModeCount, ModeCount)) -> ModeCount| {
        let n = pairs.iter().map(|p| pick(p).resolve(dim)).max().unwrap_or(1);
        ModeCount::N(n.max(alpha.len()).min(dim))
    };
    let (mi, mo) = rayon::join(
        || setup.line_modes(&volume.mesh, &stretch, "in", largest(|p| p.0)),
        || setup.line_modes(&volume.mesh, &stretch, "out", largest(|p| p.1)),
    );
    let (mi, mo) = (mi?, mo?);
    pairs
        .par_iter()
        .map(|&(ci, co)| {
            let (ni, no) = (ci.resolve(mi.dim()), co.resolve(mo.dim()));
            if ni < alpha.len() {
                return Err(Error::InvalidInput(format!(
                    "{ni} input modes cannot carry {} incident amplitudes",
                    alpha.len()
                )));
            }
            let run = solve_with_ports(setup, &volume, mi.truncated(ni)?, mo.truncated(no)?, alpha)?;
            let ui = line_trace(&run.system, &run.solution.full, "in_e", &run.modes_in)?;
            let mout = run.modes_out.as_ref().expect("ports run has output modes");
            let uo = line_trace(&run.system, &run.solution.full, "out_e", mout)?;
            Ok(SweepRow {
                n_in: ni,
                n_out: no,
                r_in: mode_projection_residual(&ui, &run.modes_in)?,
                r_out: mode_projection_residual(&uo, mout)?,
                solve: run.timings.solve,
            })
        })
        .collect()
}
