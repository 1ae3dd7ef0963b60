//! The six subcommands. Each resolves its parameters, records the ones it
//! used, and returns its output for the writer.

use std::sync::Arc;

use anyhow::{anyhow, bail, Result};
use cmc_core::delaunay::{period_row, solve_profile_with, PeriodRow, DEFAULT_NODES_PER_PERIOD, DEFAULT_TOL};
use cmc_core::gluing::{
    assemble, curvature_deviation, curvature_sweep, empirical_n_min, euler_characteristic, extend_jacobi_field,
    extension_sweep, genus, orbit_check, solve_matching, CurvatureDeviation, CurvatureSweep, ExtensionKind,
    ExtensionSweep, MatchingSolution, NeckGrid, NeckKind, NeckResidual,
};
use cmc_core::io::{fmt_f64, neck_mesh, surface_mesh, Mesh};
use cmc_core::{make_type1, make_type2, monodromy, DelaunayParameter, DelaunaySurface, FloquetData, GraphModel};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{n_values, positive, tau_values, Format, RunConfig};

pub const MATCH_TOL: f64 = 1e-12;
/// θ resolution of profile meshes.
const PROFILE_MESH_NTHETA: usize = 32;

pub enum Payload {
    Table { header: Vec<&'static str>, rows: Vec<Vec<String>> },
    Json(serde_json::Value),
    Mesh(Mesh),
}

pub struct Output {
    pub config: RunConfig,
    pub format: Format,
    pub payload: Payload,
}

fn format_of(cfg: &RunConfig, default: Format, allowed: &[Format], command: &str) -> Result<Format> {
    let f = cfg.format.unwrap_or(default);
    if !allowed.contains(&f) {
        bail!("`{command}` cannot write {}", f.extension());
    }
    Ok(f)
}

fn json<T: Serialize>(v: &T) -> Result<Payload> {
    Ok(Payload::Json(serde_json::to_value(v)?))
}

fn int(v: impl ToString) -> String {
    v.to_string()
}

fn neck_grid(cfg: &RunConfig, used: &mut RunConfig) -> Result<NeckGrid> {
    let d = NeckGrid::default();
    let grid = NeckGrid {
        nodes_per_period: positive("grid-s", cfg.grid_s.unwrap_or(d.nodes_per_period))?,
        ntheta: positive("grid-theta", cfg.grid_theta.unwrap_or(d.ntheta))?,
        ..d
    };
    used.grid_s = Some(grid.nodes_per_period);
    used.grid_theta = Some(grid.ntheta);
    Ok(grid)
}

fn models(cfg: &RunConfig, used: &mut RunConfig) -> Result<(cmc_core::DFunctions, GraphModel)> {
    let d = cfg.d_functions()?;
    let g = cfg.graph.clone().unwrap_or_default();
    used.d_model = Some(crate::config::DModel::Inline(d.clone()));
    used.graph = Some(g.clone());
    Ok((d, g))
}

pub fn profile(cfg: &RunConfig) -> Result<Output> {
    let format = format_of(cfg, Format::Csv, &[Format::Csv, Format::Json, Format::Obj, Format::Ply], "profile")?;
    let tau = DelaunayParameter::new(cfg.tau.unwrap_or(0.5))?;
    let periods = positive("periods", cfg.periods.unwrap_or(1))?;
    let npp = cfg.grid_s.unwrap_or(DEFAULT_NODES_PER_PERIOD);
    let tol = cfg.tolerance(DEFAULT_TOL)?;
    let mut used = RunConfig {
        tau: Some(tau.value()),
        periods: Some(periods),
        grid_s: Some(npp),
        tol: Some(tol),
        format: Some(format),
        ..Default::default()
    };
    let prof = solve_profile_with(tau, periods, npp, tol)?;
    let payload = match format {
        Format::Csv => Payload::Table {
            header: vec!["s", "sigma", "dsigma", "kappa", "energy_residual"],
            rows: (0..prof.s_grid.len())
                .map(|i| {
                    let (s, ds) = (prof.sigma[i], prof.dsigma[i]);
                    [prof.s_grid[i], s, ds, prof.kappa[i], tau.energy_residual(s, ds)]
                        .iter()
                        .map(|&x| fmt_f64(x))
                        .collect()
                })
                .collect(),
        },
        Format::Json => {
            #[derive(Serialize)]
            struct Summary<'a> {
                period: f64,
                kappa_period: f64,
                max_energy_residual: f64,
                profile: &'a cmc_core::DelaunayProfile,
            }
            json(&Summary {
                period: prof.period(),
                kappa_period: prof.kappa_period(),
                max_energy_residual: prof.max_energy_residual(),
                profile: &prof,
            })?
        }
        Format::Obj | Format::Ply => {
            let ntheta = positive("grid-theta", cfg.grid_theta.unwrap_or(PROFILE_MESH_NTHETA))?;
            used.grid_theta = Some(ntheta);
            let len = periods as f64 * prof.period();
            let surface = DelaunaySurface::canonical(Arc::new(prof));
            Payload::Mesh(surface_mesh(&surface, 0.0, len, npp * periods + 1, ntheta)?)
        }
    };
    Ok(Output {
        config: used,
        format,
        payload,
    })
}

/// Step for the central difference of T_τ, kept inside the branch of τ.
fn derivative_step(t: f64) -> f64 {
    let mut h = 1e-4f64.min(0.5 * t.abs());
    if t < 1.0 {
        h = h.min(0.5 * (1.0 - t));
    }
    h
}

pub fn periods(cfg: &RunConfig) -> Result<Output> {
    let format = format_of(cfg, Format::Csv, &[Format::Csv, Format::Json], "periods")?;
    let (taus, mut used) = tau_values(cfg, (0.1, 0.9, 9))?;
    let tol = cfg.tolerance(DEFAULT_TOL)?;
    (used.tol, used.format) = (Some(tol), Some(format));
    let rows = taus
        .par_iter()
        .map(|&t| Ok(period_row(DelaunayParameter::new(t)?, tol, derivative_step(t))?))
        .collect::<Result<Vec<PeriodRow>>>()?;
    let payload = match format {
        Format::Csv => Payload::Table {
            header: vec!["tau", "sigma_star", "s_half", "t_phys", "dt_dtau"],
            rows: rows
                .iter()
                .map(|r| [r.tau, r.sigma_star, r.s_half, r.t_phys, r.dt_dtau].iter().map(|&x| fmt_f64(x)).collect())
                .collect(),
        },
        _ => json(&rows)?,
    };
    Ok(Output {
        config: used,
        format,
        payload,
    })
}

pub fn indicial(cfg: &RunConfig) -> Result<Output> {
    let format = format_of(cfg, Format::Csv, &[Format::Csv, Format::Json], "indicial")?;
    let default_tau = cfg.tau.unwrap_or(0.5);
    let (taus, mut used) = tau_values(
        &RunConfig {
            tau: Some(default_tau),
            ..cfg.clone()
        },
        (0.2, 0.8, 7),
    )?;
    let j_max = cfg.j_max.unwrap_or(4);
    let tol = cfg.tolerance(DEFAULT_TOL)?;
    (used.j_max, used.tol, used.format) = (Some(j_max), Some(tol), Some(format));
    let pairs: Vec<(f64, u32)> = taus.iter().flat_map(|&t| (0..=j_max).map(move |j| (t, j))).collect();
    let data = pairs
        .par_iter()
        .map(|&(t, j)| Ok(monodromy(DelaunayParameter::new(t)?, j, tol)?))
        .collect::<Result<Vec<FloquetData>>>()?;
    let payload = match format {
        Format::Csv => Payload::Table {
            header: vec!["tau", "j", "trace", "det", "zeta_raw", "gamma", "periodic"],
            rows: data
                .iter()
                .map(|f| {
                    vec![
                        fmt_f64(f.tau.value()),
                        int(f.j),
                        fmt_f64(f.trace),
                        fmt_f64(f.det),
                        fmt_f64(f.zeta_raw),
                        fmt_f64(f.zeta_real),
                        int(u8::from(f.periodic_case)),
                    ]
                })
                .collect(),
        },
        _ => json(&data)?,
    };
    Ok(Output {
        config: used,
        format,
        payload,
    })
}

fn interval(cfg: &RunConfig, used: &mut RunConfig) -> (f64, f64) {
    let (lo, hi) = (cfg.tau_lo.unwrap_or(0.2), cfg.tau_hi.unwrap_or(0.8));
    (used.tau_lo, used.tau_hi) = (Some(lo), Some(hi));
    (lo, hi)
}

pub fn matching(cfg: &RunConfig) -> Result<Output> {
    let format = format_of(cfg, Format::Json, &[Format::Csv, Format::Json], "match")?;
    let (ns, mut used) = n_values(cfg, (1, 20))?;
    let k = cfg.k_value()?;
    let tol = cfg.tolerance(MATCH_TOL)?;
    let (lo, hi) = interval(cfg, &mut used);
    let (d, _) = models(cfg, &mut used)?;
    used.graph = None;
    (used.k, used.tol, used.format) = (Some(k), Some(tol), Some(format));
    let per_n = ns
        .par_iter()
        .map(|&n| Ok(solve_matching(n, k, lo, hi, &d, tol)?))
        .collect::<Result<Vec<_>>>()?;
    let solutions: Vec<MatchingSolution> = per_n.into_iter().flatten().collect();
    let payload = match format {
        Format::Csv => Payload::Table {
            header: vec!["k", "n", "m", "tau", "tau_bar", "residual"],
            rows: solutions
                .iter()
                .map(|s| {
                    vec![
                        int(s.k),
                        int(s.n),
                        int(s.m),
                        fmt_f64(s.tau),
                        fmt_f64(s.tau_bar),
                        fmt_f64(s.residual),
                    ]
                })
                .collect(),
        },
        _ => {
            let (n_min, n_guaranteed) = empirical_n_min(k, lo, hi, &d, tol)?;
            #[derive(Serialize)]
            struct MatchResult {
                k: usize,
                tau_lo: f64,
                tau_hi: f64,
                tol: f64,
                n_min: usize,
                n_guaranteed: usize,
                solutions: Vec<MatchingSolution>,
            }
            json(&MatchResult {
                k,
                tau_lo: lo,
                tau_hi: hi,
                tol,
                n_min,
                n_guaranteed,
                solutions,
            })?
        }
    };
    Ok(Output {
        config: used,
        format,
        payload,
    })
}

#[derive(Serialize)]
struct NeckSummary {
    kind: NeckKind,
    index: usize,
    label: String,
    tau: f64,
    half_window: f64,
    half_periods: usize,
    model_mismatch: f64,
}

#[derive(Serialize)]
struct ExtensionSummary {
    kind: ExtensionKind,
    orbit: usize,
    t: Option<f64>,
    p_tau: Option<f64>,
    field_sup: f64,
    residual: NeckResidual,
}

#[derive(Serialize)]
struct GlueResult {
    solution: MatchingSolution,
    delta: f64,
    genus: usize,
    euler_characteristic: i64,
    orbit_check: bool,
    symmetry_order: usize,
    necks: Vec<NeckSummary>,
    curvature: Vec<CurvatureDeviation>,
    extensions: Vec<ExtensionSummary>,
}

pub fn glue(cfg: &RunConfig) -> Result<Output> {
    let format = format_of(cfg, Format::Json, &[Format::Json, Format::Obj, Format::Ply], "glue")?;
    let mut used = RunConfig::default();
    let n = positive("n", cfg.n.unwrap_or(4))?;
    let k = cfg.k_value()?;
    let tol = cfg.tolerance(MATCH_TOL)?;
    let (lo, hi) = interval(cfg, &mut used);
    let grid = neck_grid(cfg, &mut used)?;
    let (d, graph) = models(cfg, &mut used)?;
    (used.n, used.k, used.tol, used.tau, used.format) = (Some(n), Some(k), Some(tol), cfg.tau, Some(format));
    let sols = solve_matching(n, k, lo, hi, &d, tol)?;
    let sol = match cfg.tau {
        Some(t) => sols.iter().min_by(|a, b| (a.tau - t).abs().total_cmp(&(b.tau - t).abs())),
        None => sols.first(),
    }
    .ok_or_else(|| anyhow!("no matching solution for k = {k}, n = {n} on [{lo}, {hi}]"))?;
    let t1 = make_type1(sol.tau, k, &d, &graph)?;
    let t2 = make_type2(sol.tau, k, &d, &graph)?;
    let asm = assemble(k, sol, &t1, &t2, &d)?;
    let payload = match format {
        Format::Obj | Format::Ply => {
            let mut mesh = Mesh::default();
            for e in &asm.necks {
                mesh.append(&neck_mesh(&e.neck, grid.nodes_per_period + 1, grid.ntheta)?);
            }
            Payload::Mesh(mesh)
        }
        _ => {
            let first = |kind| asm.necks.iter().find(|e| e.kind == kind && e.index == 0).map(|e| &e.neck);
            let heads: Vec<_> = [NeckKind::Y, NeckKind::Z].into_iter().filter_map(first).collect();
            let kinds = [
                ExtensionKind::TranslationBar,
                ExtensionKind::Delaunay,
                ExtensionKind::TranslationA,
                ExtensionKind::TranslationAPerp,
            ];
            let (curvature, extensions) = rayon::join(
                || {
                    heads
                        .par_iter()
                        .map(|neck| Ok(curvature_deviation(neck, &grid)?))
                        .collect::<Result<Vec<_>>>()
                },
                || {
                    kinds
                        .par_iter()
                        .map(|&kind| {
                            let r = extend_jacobi_field(&asm, kind, &grid, None)?;
                            Ok(ExtensionSummary {
                                kind: r.kind,
                                orbit: r.orbit,
                                t: r.t,
                                p_tau: r.p_tau,
                                field_sup: r.field_sup,
                                residual: r.residual,
                            })
                        })
                        .collect::<Result<Vec<_>>>()
                },
            );
            json(&GlueResult {
                solution: *sol,
                delta: asm.delta,
                genus: genus(&asm)?,
                euler_characteristic: euler_characteristic(&asm)?,
                orbit_check: orbit_check(&asm),
                symmetry_order: asm.symmetry.order(),
                necks: asm
                    .necks
                    .iter()
                    .map(|e| NeckSummary {
                        kind: e.kind,
                        index: e.index,
                        label: e.neck.label.clone(),
                        tau: e.neck.tau(),
                        half_window: e.neck.half_window,
                        half_periods: e.neck.half_periods,
                        model_mismatch: e.neck.model_mismatch,
                    })
                    .collect(),
                curvature: curvature?,
                extensions: extensions?,
            })?
        }
    };
    Ok(Output {
        config: used,
        format,
        payload,
    })
}

pub fn report(cfg: &RunConfig) -> Result<Output> {
    let format = format_of(cfg, Format::Json, &[Format::Csv, Format::Json], "report")?;
    let (ns, mut used) = n_values(
        &RunConfig {
            n: None,
            ..cfg.clone()
        },
        (4, 12),
    )?;
    if ns.len() < 3 {
        bail!("report fits need at least three values of n");
    }
    let tau = cfg.tau.unwrap_or(0.5);
    let k = cfg.k_value()?;
    let grid = neck_grid(cfg, &mut used)?;
    let (d, graph) = models(cfg, &mut used)?;
    (used.tau, used.k, used.format) = (Some(tau), Some(k), Some(format));
    let (cs, es) = rayon::join(
        || curvature_sweep(tau, k, &d, &graph, &ns, &grid),
        || extension_sweep(tau, k, &d, &graph, &ns, &grid, None),
    );
    let (cs, es): (CurvatureSweep, ExtensionSweep) = (cs?, es?);
    let payload = match format {
        Format::Csv => Payload::Table {
            header: vec!["n", "log_curvature_deviation", "log_t_bar_residual", "d_sup", "log_d_residual"],
            rows: ns
                .iter()
                .enumerate()
                .map(|(i, &n)| {
                    vec![
                        int(n),
                        fmt_f64(cs.deviations[i].1.log_sup_annulus),
                        fmt_f64(es.t_bar[i].1.log_glue_residual),
                        fmt_f64(es.d_sup[i].1),
                        fmt_f64(es.d_residual[i].1.log_glue_residual),
                    ]
                })
                .collect(),
        },
        _ => {
            #[derive(Serialize)]
            struct Report {
                curvature: CurvatureSweep,
                extension: ExtensionSweep,
            }
            json(&Report {
                curvature: cs,
                extension: es,
            })?
        }
    };
    Ok(Output {
        config: used,
        format,
        payload,
    })
}
