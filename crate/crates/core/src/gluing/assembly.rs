//! Assembly of one Type-2 block and k rotated Type-1 blocks into a
//! compact surface: necks, gluing graph, partition of unity, symmetry
//! and genus; plus the n-sweeps of the curvature and extension decays.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::blocks::{
    alpha_k, reflection_s1, rotation_z, truncate, BlockKind, BuildingBlock, DFunctions, EndDescriptor,
    GraphModel, SymmetryGroup, TruncatedBlock,
};
use crate::error::{invalid, CmcError, Result};
use crate::gluing::cutoff::{cutoff_xi, CutoffProfile};
use crate::gluing::extension::{
    decay_fit, delaunay_shift_parameter, growth_exponent, neck_field_samples, neck_residual, neck_variation,
    DecayFit, NeckField, NeckResidual,
};
use crate::gluing::matching::{delta_offset, MatchingSolution};
use crate::gluing::neck::{annulus_deviation, glue_neck, CurvatureDeviation, GluedNeck, NeckGrid};
use crate::numerics::LinearFit;
use crate::patch::ScalarField;

/// Largest |matching residual| accepted by `assemble`.
pub const MATCH_TOL: f64 = 1e-8;

fn rot(k: usize, l: usize) -> Matrix3<f64> {
    rotation_z(2.0 * PI * l as f64 / k as f64)
}

fn type1_params(block: &BuildingBlock) -> Result<(f64, f64, f64)> {
    match block.kind {
        BlockKind::Type1 { tau, tau_bar, alpha } => Ok((tau, tau_bar, alpha)),
        _ => Err(invalid("expected a Type-1 block")),
    }
}

fn type2_params(block: &BuildingBlock) -> Result<(usize, f64)> {
    match block.kind {
        BlockKind::Type2 { k, tau } => Ok((k, tau)),
        _ => Err(invalid("expected a Type-2 block")),
    }
}

/// End `label` of the ℓ-th Type-1 copy, x ↦ R_ℓ(x + δe₂).
fn copy_end(type1: &BuildingBlock, label: &str, k: usize, l: usize, delta: f64) -> Result<EndDescriptor> {
    let r = rot(k, l);
    let e = type1
        .end(label)
        .ok_or_else(|| invalid(format!("Type-1 block has no end {label}")))?;
    let mut out = e.transformed(&r, &(r * Vector3::y() * delta));
    out.label = format!("{label}@{l}");
    Ok(out)
}

/// Y-neck ℓ: Type-2 end ℓ joined to E⁰ of the ℓ-th Type-1 copy over
/// (−n s_τ, n s_τ).
pub fn y_neck(type1: &BuildingBlock, type2: &BuildingBlock, n: usize, l: usize, d: &DFunctions) -> Result<GluedNeck> {
    let (tau, _, _) = type1_params(type1)?;
    let (k, tau2) = type2_params(type2)?;
    if tau != tau2 {
        return Err(invalid("Type-1 and Type-2 blocks have different τ"));
    }
    if l >= k {
        return Err(invalid(format!("neck index {l} out of range for k = {k}")));
    }
    let delta = delta_offset(n, tau, d)?;
    let a = type2
        .end(&l.to_string())
        .ok_or_else(|| invalid("Type-2 block is missing an end"))?;
    let b = copy_end(type1, "E0", k, l, delta)?;
    let half = n as f64 * a.model.profile.s_half;
    let mut neck = glue_neck(a, &b, half, cutoff_xi())?;
    neck.label = format!("Y{l}");
    Ok(neck)
}

/// Z-neck ℓ: E¹ of copy ℓ joined to E⁻¹ of copy ℓ+1 over (−m s_τ̄, m s_τ̄).
/// The end models coincide only when the matching condition holds.
pub fn z_neck(type1: &BuildingBlock, k: usize, sol: &MatchingSolution, l: usize, d: &DFunctions) -> Result<GluedNeck> {
    let (tau, _, _) = type1_params(type1)?;
    if (tau - sol.tau).abs() > 1e-15 {
        return Err(invalid("Type-1 block was not built at the matching τ"));
    }
    let delta = delta_offset(sol.n, tau, d)?;
    let a = copy_end(type1, "E1", k, l, delta)?;
    let b = copy_end(type1, "E-1", k, (l + 1) % k, delta)?;
    let half = sol.m as f64 * a.model.profile.s_half;
    let mut neck = glue_neck(&a, &b, half, cutoff_xi())?;
    neck.label = format!("Z{l}");
    Ok(neck)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeckKind {
    Y,
    Z,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PlacedPiece {
    pub label: String,
    pub piece: TruncatedBlock,
    /// x ↦ rotation·x + translation places the block.
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NeckEdge {
    pub kind: NeckKind,
    pub index: usize,
    /// (piece index, end label) on each side.
    pub side_a: (usize, String),
    pub side_b: (usize, String),
    pub neck: GluedNeck,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GluingGraph {
    pub nodes: usize,
    pub edges: Vec<(usize, usize)>,
}

impl GluingGraph {
    pub fn components(&self) -> usize {
        let mut parent: Vec<usize> = (0..self.nodes).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while p[r] != r {
                r = p[r];
            }
            let mut y = x;
            while p[y] != r {
                let next = p[y];
                p[y] = r;
                y = next;
            }
            r
        }
        for &(a, b) in &self.edges {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            parent[ra] = rb;
        }
        (0..self.nodes).filter(|&x| find(&mut parent, x) == x).count()
    }

    /// First Betti number E − V + C.
    pub fn cycle_rank(&self) -> usize {
        self.edges.len() + self.components() - self.nodes
    }
}

/// Piece 0 is the Type-2 block, piece 1 + ℓ the ℓ-th Type-1 copy. Neck
/// edges 0..k are the Y-necks, k..2k the Z-necks.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GluedAssembly {
    pub k: usize,
    pub solution: MatchingSolution,
    pub delta: f64,
    pub pieces: Vec<PlacedPiece>,
    pub necks: Vec<NeckEdge>,
    pub gluing_graph: GluingGraph,
    pub symmetry: SymmetryGroup,
    pub xi: CutoffProfile,
}

pub fn assemble(
    k: usize,
    solution: &MatchingSolution,
    type1: &BuildingBlock,
    type2: &BuildingBlock,
    d: &DFunctions,
) -> Result<GluedAssembly> {
    if k < 3 {
        return Err(invalid(format!("k = {k}: assemblies need at least 3 Type-1 copies")));
    }
    if solution.k != k {
        return Err(invalid("matching solution was computed for another k"));
    }
    if !(solution.residual.abs() <= MATCH_TOL) {
        return Err(CmcError::ModelMismatch(format!(
            "matching residual {:e} exceeds {MATCH_TOL:e}",
            solution.residual
        )));
    }
    let (tau, tau_bar, alpha) = type1_params(type1)?;
    let (k2, tau2) = type2_params(type2)?;
    if k2 != k || tau2 != tau || tau != solution.tau || (tau_bar - solution.tau_bar).abs() > 1e-14 {
        return Err(invalid("blocks do not match the solution parameters"));
    }
    if (alpha - alpha_k(k)).abs() > 1e-15 {
        return Err(invalid("Type-1 block was built for another α"));
    }
    let delta = delta_offset(solution.n, tau, d)?;
    let s_half = type2.ends[0].model.profile.s_half;
    let s_half_bar = type1
        .end("E1")
        .ok_or_else(|| invalid("Type-1 block has no end E1"))?
        .model
        .profile
        .s_half;
    let (ly, lz) = (solution.n as f64 * s_half, solution.m as f64 * s_half_bar);
    let mut pieces = vec![PlacedPiece {
        label: "type2".into(),
        piece: truncate(type2, ly - 1.0, ly - 1.0)?,
        rotation: Matrix3::identity(),
        translation: Vector3::zeros(),
    }];
    let t1 = truncate(type1, ly - 1.0, lz - 1.0)?;
    for l in 0..k {
        let r = rot(k, l);
        pieces.push(PlacedPiece {
            label: format!("type1@{l}"),
            piece: t1.clone(),
            rotation: r,
            translation: r * Vector3::y() * delta,
        });
    }
    let mut necks = Vec::with_capacity(2 * k);
    for l in 0..k {
        necks.push(NeckEdge {
            kind: NeckKind::Y,
            index: l,
            side_a: (0, l.to_string()),
            side_b: (1 + l, "E0".into()),
            neck: y_neck(type1, type2, solution.n, l, d)?,
        });
    }
    for l in 0..k {
        necks.push(NeckEdge {
            kind: NeckKind::Z,
            index: l,
            side_a: (1 + l, "E1".into()),
            side_b: (1 + (l + 1) % k, "E-1".into()),
            neck: z_neck(type1, k, solution, l, d)?,
        });
    }
    let gluing_graph = GluingGraph {
        nodes: pieces.len(),
        edges: necks.iter().map(|e| (e.side_a.0, e.side_b.0)).collect(),
    };
    Ok(GluedAssembly {
        k,
        solution: *solution,
        delta,
        pieces,
        necks,
        gluing_graph,
        symmetry: SymmetryGroup::new(vec![rot(k, 1)])?,
        xi: cutoff_xi(),
    })
}

/// Checks that every boundary circle is used by exactly one neck.
pub fn check_boundaries(asm: &GluedAssembly) -> Result<()> {
    for (p, piece) in asm.pieces.iter().enumerate() {
        for c in &piece.piece.boundary_circles {
            let uses = asm
                .necks
                .iter()
                .filter(|e| (e.side_a.0 == p && e.side_a.1 == c.end) || (e.side_b.0 == p && e.side_b.1 == c.end))
                .count();
            if uses != 1 {
                return Err(invalid(format!(
                    "boundary circle {} of piece {} is matched by {uses} necks",
                    c.end, piece.label
                )));
            }
        }
    }
    let circles: usize = asm.pieces.iter().map(|p| p.piece.boundary_circles.len()).sum();
    if circles != 2 * asm.necks.len() {
        return Err(invalid("some neck ends do not land on a boundary circle"));
    }
    Ok(())
}

/// χ = Σ χ(pieces) + Σ χ(annuli), the annuli contributing 0.
pub fn euler_characteristic(asm: &GluedAssembly) -> Result<i64> {
    check_boundaries(asm)?;
    Ok(asm.pieces.iter().map(|p| p.piece.euler_characteristic).sum())
}

/// g = (2 − χ)/2, cross-checked against the cycle rank of the gluing
/// graph (all pieces have genus zero).
pub fn genus(asm: &GluedAssembly) -> Result<usize> {
    let chi = euler_characteristic(asm)?;
    if asm.gluing_graph.components() != 1 {
        return Err(CmcError::Degenerate("the gluing graph is disconnected".into()));
    }
    if chi > 2 || (2 - chi) % 2 != 0 {
        return Err(CmcError::Degenerate(format!("χ = {chi} is not that of a closed orientable surface")));
    }
    let g = ((2 - chi) / 2) as usize;
    let rank = asm.gluing_graph.cycle_rank();
    if g != rank {
        return Err(CmcError::CrossCheck {
            what: "genus vs cycle rank".into(),
            primary: g as f64,
            check: rank as f64,
        });
    }
    Ok(g)
}

/// Where a point of the assembly lies: on a core or on a neck with its
/// neck coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Location {
    Type2Core,
    Type1Core(usize),
    YNeck(usize, f64),
    ZNeck(usize, f64),
}

impl Location {
    /// Image under R_{2πj/k}.
    pub fn rotated(self, k: usize, j: usize) -> Self {
        match self {
            Location::Type2Core => Location::Type2Core,
            Location::Type1Core(l) => Location::Type1Core((l + j) % k),
            Location::YNeck(l, s) => Location::YNeck((l + j) % k, s),
            Location::ZNeck(l, s) => Location::ZNeck((l + j) % k, s),
        }
    }
}

/// χ̄: 1 on the Type-2 core, ξ(s) on the Y-necks.
pub fn chi_bar(asm: &GluedAssembly, p: Location) -> f64 {
    match p {
        Location::Type2Core => 1.0,
        Location::YNeck(_, s) => asm.xi.chi_bar(s),
        _ => 0.0,
    }
}

/// χ of the 0-th Type-1 copy: 1 on its core, ξ(−s) on Y-neck 0, ξ(s) on
/// Z-neck 0 and ξ(−s) on Z-neck k−1.
pub fn chi(asm: &GluedAssembly, p: Location) -> f64 {
    let k = asm.k;
    match p {
        Location::Type1Core(0) => 1.0,
        Location::YNeck(0, s) => asm.xi.chi(s),
        Location::ZNeck(0, s) => asm.xi.chi_bar(s),
        Location::ZNeck(l, s) if l == k - 1 => asm.xi.chi(s),
        _ => 0.0,
    }
}

/// χ̄ + Σ_ℓ χ∘R_ℓ⁻¹ at a point.
pub fn partition_sum(asm: &GluedAssembly, p: Location) -> f64 {
    let k = asm.k;
    chi_bar(asm, p) + (0..k).map(|l| chi(asm, p.rotated(k, k - l))).sum::<f64>()
}

/// Rotation by 2π/k maps every piece and every neck of the assembly onto
/// one of the same kind.
pub fn orbit_check(asm: &GluedAssembly) -> bool {
    let k = asm.k;
    let r = rot(k, 1);
    let neck_key = |n: &GluedNeck| {
        let mut v = vec![n.end_a.canonical_key(), n.end_b.canonical_key()];
        v.sort();
        v
    };
    let necks_ok = asm.necks.iter().all(|e| {
        let img = neck_key(&GluedNeck {
            end_a: e.neck.end_a.transformed(&r, &Vector3::zeros()),
            end_b: e.neck.end_b.transformed(&r, &Vector3::zeros()),
            ..e.neck.clone()
        });
        asm.necks
            .iter()
            .any(|f| f.kind == e.kind && f.index == (e.index + 1) % k && neck_key(&f.neck) == img)
    });
    let pieces_ok = asm.pieces.iter().skip(1).enumerate().all(|(l, p)| {
        let q = &asm.pieces[1 + (l + 1) % k];
        (r * p.rotation - q.rotation).abs().max() < 1e-12 && (r * p.translation - q.translation).norm() < 1e-9
    });
    necks_ok && pieces_ok
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtensionKind {
    /// Ψ^{T,a} across the Z-necks, a the neck axis.
    TranslationA,
    /// Ψ^{T,a⊥} across the Z-necks, a⊥ horizontal and orthogonal to a.
    TranslationAPerp,
    /// Ψ̄^T across the Y-necks.
    TranslationBar,
    /// Ψ^D across the Y-necks.
    Delaunay,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExtensionReport {
    pub kind: ExtensionKind,
    /// Residual on neck 0 of the relevant kind; the others are its
    /// images under G_k.
    pub residual: NeckResidual,
    pub orbit: usize,
    pub t: Option<f64>,
    pub p_tau: Option<f64>,
    pub field_sup: f64,
    pub samples: ScalarField,
}

/// Extends a Jacobi field across the necks of the assembly and measures
/// its residual. For Ψ^D the parameter t defaults to n·p_τ.
pub fn extend_jacobi_field(
    asm: &GluedAssembly,
    kind: ExtensionKind,
    grid: &NeckGrid,
    t_override: Option<f64>,
) -> Result<ExtensionReport> {
    let k = asm.k;
    let pick = |nk: NeckKind| {
        asm.necks
            .iter()
            .find(|e| e.kind == nk && e.index == 0)
            .map(|e| &e.neck)
            .ok_or_else(|| invalid("assembly has no neck 0"))
    };
    match kind {
        ExtensionKind::TranslationBar => {
            let neck = pick(NeckKind::Y)?;
            let e = neck.model.axis;
            let field = NeckField::Translation { a: e, b: e };
            finish(kind, neck, &field, grid, k, None, None)
        }
        ExtensionKind::Delaunay => {
            let neck = pick(NeckKind::Y)?;
            let var = neck_variation(neck)?;
            let t = t_override.unwrap_or_else(|| delaunay_shift_parameter(neck.half_periods, var.p_tau));
            let field = NeckField::Delaunay { variation: &var, t };
            finish(kind, neck, &field, grid, k, Some(t), Some(var.p_tau))
        }
        ExtensionKind::TranslationA | ExtensionKind::TranslationAPerp => {
            let neck = pick(NeckKind::Z)?;
            let a = neck.model.axis;
            let b = if kind == ExtensionKind::TranslationA {
                a
            } else {
                Vector3::z().cross(&a).normalize()
            };
            // The second side is the mirror image of the first across Π_k.
            let mirror = rot(k, 1) * reflection_s1();
            let field = NeckField::Translation { a: b, b: mirror * b };
            finish(kind, neck, &field, grid, k, None, None)
        }
    }
}

fn finish(
    kind: ExtensionKind,
    neck: &GluedNeck,
    field: &NeckField,
    grid: &NeckGrid,
    orbit: usize,
    t: Option<f64>,
    p_tau: Option<f64>,
) -> Result<ExtensionReport> {
    let residual = neck_residual(neck, field, grid)?;
    let samples = neck_field_samples(neck, field, grid)?;
    Ok(ExtensionReport {
        kind,
        residual,
        orbit,
        t,
        p_tau,
        field_sup: samples.sup(),
        samples,
    })
}

/// Curvature deviation on the Y-neck annulus A⁰ for each n, at fixed τ
/// (no matching needed), fitted against the predicted −γ_{τ,2}s_τ.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CurvatureSweep {
    pub tau: f64,
    pub k: usize,
    pub gamma2: f64,
    pub s_half: f64,
    pub deviations: Vec<(usize, CurvatureDeviation)>,
    pub fit: DecayFit,
}

pub fn curvature_sweep(
    tau: f64,
    k: usize,
    d: &DFunctions,
    graph: &GraphModel,
    ns: &[usize],
    grid: &NeckGrid,
) -> Result<CurvatureSweep> {
    let t1 = crate::blocks::make_type1(tau, k, d, graph)?;
    let t2 = crate::blocks::make_type2(tau, k, d, graph)?;
    let end = &t2.ends[0];
    let (gamma2, s_half) = (end.decay_rate, end.model.profile.s_half);
    let deviations = ns
        .iter()
        .map(|&n| Ok((n, annulus_deviation(&y_neck(&t1, &t2, n, 0, d)?, grid)?)))
        .collect::<Result<Vec<_>>>()?;
    let pts: Vec<(usize, f64)> = deviations.iter().map(|(n, c)| (*n, c.log_sup_annulus)).collect();
    Ok(CurvatureSweep {
        tau,
        k,
        gamma2,
        s_half,
        fit: decay_fit(&pts, -gamma2 * s_half)?,
        deviations,
    })
}

/// Ψ̄^T residual decay on A⁰ and Ψ^D growth along the same n-sweep.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExtensionSweep {
    pub tau: f64,
    pub k: usize,
    pub gamma2: f64,
    pub s_half: f64,
    pub p_tau: f64,
    pub t_bar: Vec<(usize, NeckResidual)>,
    pub t_bar_fit: DecayFit,
    /// (n, sup|Ψ^D| over the Y-neck window).
    pub d_sup: Vec<(usize, f64)>,
    pub d_growth: LinearFit,
    pub d_residual: Vec<(usize, NeckResidual)>,
    /// μ in the Ψ^D bound e^{−μ n s_τ}; defaults to −γ_{τ,2}/2.
    pub mu: f64,
    /// Fitted slope of log |LΨ^D| against n and the bound's slope −μ s_τ.
    pub d_residual_slope: f64,
    pub d_bound_slope: f64,
}

pub fn extension_sweep(
    tau: f64,
    k: usize,
    d: &DFunctions,
    graph: &GraphModel,
    ns: &[usize],
    grid: &NeckGrid,
    mu: Option<f64>,
) -> Result<ExtensionSweep> {
    let t1 = crate::blocks::make_type1(tau, k, d, graph)?;
    let t2 = crate::blocks::make_type2(tau, k, d, graph)?;
    let end = &t2.ends[0];
    let (gamma2, s_half) = (end.decay_rate, end.model.profile.s_half);
    let mu = mu.unwrap_or(-0.5 * gamma2);
    if !(mu > -gamma2 && mu < 0.0) {
        return Err(invalid(format!("μ = {mu} must lie in (−γ_τ,2, 0)")));
    }
    let mut var = None;
    let (mut t_bar, mut d_sup, mut d_res) = (Vec::new(), Vec::new(), Vec::new());
    for &n in ns {
        let neck = y_neck(&t1, &t2, n, 0, d)?;
        if var.is_none() {
            var = Some(neck_variation(&neck)?);
        }
        let v = var.as_ref().expect("set above");
        let e = neck.model.axis;
        t_bar.push((n, neck_residual(&neck, &NeckField::Translation { a: e, b: e }, grid)?));
        let field = NeckField::Delaunay {
            variation: v,
            t: delaunay_shift_parameter(neck.half_periods, v.p_tau),
        };
        d_sup.push((n, neck_field_samples(&neck, &field, grid)?.sup()));
        d_res.push((n, neck_residual(&neck, &field, grid)?));
    }
    let p_tau = var.map(|v| v.p_tau).unwrap_or(f64::NAN);
    let tb_pts: Vec<(usize, f64)> = t_bar.iter().map(|(n, r)| (*n, r.log_glue_residual)).collect();
    let d_pts: Vec<(usize, f64)> = d_res.iter().map(|(n, r)| (*n, r.log_glue_residual)).collect();
    let d_fit = decay_fit(&d_pts, mu * s_half)?;
    Ok(ExtensionSweep {
        tau,
        k,
        gamma2,
        s_half,
        p_tau,
        t_bar_fit: decay_fit(&tb_pts, -gamma2 * s_half)?,
        t_bar,
        d_growth: growth_exponent(&d_sup)?,
        d_sup,
        d_residual: d_res,
        mu,
        d_residual_slope: d_fit.fit.slope,
        d_bound_slope: -mu * s_half,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cycle_rank_of_a_theta_graph() {
        let g = GluingGraph {
            nodes: 2,
            edges: vec![(0, 1), (0, 1), (0, 1)],
        };
        assert_eq!(g.components(), 1);
        assert_eq!(g.cycle_rank(), 2);
    }

    #[test]
    fn location_rotation_wraps() {
        assert_eq!(Location::ZNeck(2, 0.5).rotated(3, 2), Location::ZNeck(1, 0.5));
        assert_eq!(Location::Type2Core.rotated(5, 3), Location::Type2Core);
    }
}
