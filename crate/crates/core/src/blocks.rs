//! Type-1 and Type-2 building blocks described through their Delaunay
//! ends and symmetry groups, the balancing formula, truncation and the
//! weighted C^r norms used on ends.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::delaunay::{solve_profile, DelaunayParameter, DelaunaySurface, DEFAULT_TOL};
use crate::error::{invalid, CmcError, Result};
use crate::jacobi::indicial_root;
use crate::numerics::fd::{diff_s, FdOrder};
use crate::numerics::PeriodicDiff;
use crate::patch::{theta_derivs, ScalarField};

/// A rational function of τ with ascending polynomial coefficients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Rational {
    Constant(f64),
    Ratio { num: Vec<f64>, den: Vec<f64> },
}

impl Rational {
    pub fn eval(&self, tau: f64) -> f64 {
        let horner = |c: &[f64]| c.iter().rev().fold(0.0, |acc, &a| acc * tau + a);
        match self {
            Rational::Constant(c) => *c,
            Rational::Ratio { num, den } => horner(num) / horner(den),
        }
    }
}

/// Axial offsets d⁰_τ, d̄⁰_τ, d¹_τ of the block ends, as functions of τ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DFunctions {
    pub d0: Rational,
    pub d0_bar: Rational,
    pub d1: Rational,
}

impl Default for DFunctions {
    fn default() -> Self {
        Self {
            d0: Rational::Constant(1.0),
            d0_bar: Rational::Constant(1.0),
            d1: Rational::Constant(0.5),
        }
    }
}

impl DFunctions {
    pub fn zero() -> Self {
        Self {
            d0: Rational::Constant(0.0),
            d0_bar: Rational::Constant(0.0),
            d1: Rational::Constant(0.0),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierMode {
    pub j: u32,
    pub cos: f64,
    pub sin: f64,
}

/// Angular content and amplitude of a synthetic end graph; the decay rate
/// is filled in from the indicial root when a block is built.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphModel {
    pub amplitude: f64,
    pub modes: Vec<FourierMode>,
}

impl Default for GraphModel {
    fn default() -> Self {
        Self {
            amplitude: 0.01,
            modes: vec![FourierMode {
                j: 2,
                cos: 1.0,
                sin: 0.0,
            }],
        }
    }
}

/// w(s, θ) = amplitude · e^{−rate·s} · Σ (a_j cos jθ + b_j sin jθ).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EndGraph {
    pub amplitude: f64,
    pub rate: f64,
    pub modes: Vec<FourierMode>,
}

impl EndGraph {
    pub fn new(model: &GraphModel, rate: f64) -> Result<Self> {
        if !(rate > 0.0) {
            return Err(invalid("end graph decay rate must be positive"));
        }
        if model.modes.iter().any(|m| m.j < 2) {
            return Err(invalid("end graphs carry no angular modes below 2"));
        }
        Ok(Self {
            amplitude: model.amplitude,
            rate,
            modes: model.modes.clone(),
        })
    }

    pub fn zero(rate: f64) -> Self {
        Self {
            amplitude: 0.0,
            rate,
            modes: Vec::new(),
        }
    }

    pub fn angular(&self, theta: f64) -> f64 {
        self.modes
            .iter()
            .map(|m| {
                let (s, c) = (m.j as f64 * theta).sin_cos();
                m.cos * c + m.sin * s
            })
            .sum()
    }

    pub fn eval(&self, s: f64, theta: f64) -> f64 {
        if self.amplitude == 0.0 {
            return 0.0;
        }
        self.amplitude * (-self.rate * s).exp() * self.angular(theta)
    }

    /// eval(s, θ)·e^{−c}, computed without forming e^{−rate·s} alone.
    pub fn eval_scaled(&self, s: f64, theta: f64, c: f64) -> f64 {
        if self.amplitude == 0.0 {
            return 0.0;
        }
        self.amplitude.signum() * (self.log_envelope(s) - c).exp() * self.angular(theta)
    }

    /// log of the envelope amplitude·e^{−rate·s}; −∞ for a zero graph.
    pub fn log_envelope(&self, s: f64) -> f64 {
        if self.amplitude == 0.0 || self.modes.is_empty() {
            return f64::NEG_INFINITY;
        }
        self.amplitude.abs().ln() - self.rate * s
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EndDescriptor {
    pub label: String,
    pub model: DelaunaySurface,
    /// Signed offset d of the model neck along the end direction.
    pub axial_offset: f64,
    /// Unit vector pointing into the end.
    pub direction: Vector3<f64>,
    pub graph: EndGraph,
    pub decay_rate: f64,
}

impl EndDescriptor {
    pub fn tau(&self) -> f64 {
        self.model.tau().value()
    }

    /// Image under x ↦ m·x + t.
    pub fn transformed(&self, m: &Matrix3<f64>, t: &Vector3<f64>) -> Self {
        Self {
            label: self.label.clone(),
            model: self.model.transformed(m, t),
            axial_offset: self.axial_offset,
            direction: (m * self.direction).normalize(),
            graph: self.graph.clone(),
            decay_rate: self.decay_rate,
        }
    }

    /// Geometric key used to compare end sets up to permutation.
    pub fn canonical_key(&self) -> String {
        let r = |v: f64| {
            let x = (v * 1e9).round() / 1e9;
            if x == 0.0 {
                0.0
            } else {
                x
            }
        };
        let v = |x: &Vector3<f64>| format!("{:.9},{:.9},{:.9}", r(x.x), r(x.y), r(x.z));
        let axis = if self.model.axis.dot(&self.direction) < 0.0 {
            -self.model.axis
        } else {
            self.model.axis
        };
        format!(
            "tau={:.12};dir={};axis={};offset={};d={:.12};rate={:.12}",
            self.tau(),
            v(&self.direction),
            v(&axis),
            v(&self.model.offset),
            self.axial_offset,
            self.decay_rate
        )
    }
}

/// Finite group of orthogonal maps given by generators.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SymmetryGroup {
    pub generators: Vec<Matrix3<f64>>,
}

pub fn reflection_s1() -> Matrix3<f64> {
    Matrix3::from_diagonal(&Vector3::new(-1.0, 1.0, 1.0))
}

pub fn reflection_s3() -> Matrix3<f64> {
    Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0))
}

/// Rotation by `angle` about e₃.
pub fn rotation_z(angle: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

impl SymmetryGroup {
    pub fn new(generators: Vec<Matrix3<f64>>) -> Result<Self> {
        for g in &generators {
            if (g.transpose() * g - Matrix3::identity()).abs().max() > 1e-12 {
                return Err(invalid("symmetry generators must be orthogonal"));
            }
        }
        Ok(Self { generators })
    }

    /// All group elements, by closing the generators under products.
    pub fn elements(&self) -> Vec<Matrix3<f64>> {
        let mut out = vec![Matrix3::identity()];
        let mut frontier = out.clone();
        while let Some(a) = frontier.pop() {
            for g in &self.generators {
                let p = g * a;
                if !out.iter().any(|q| (q - p).abs().max() < 1e-9) {
                    out.push(p);
                    frontier.push(p);
                }
                if out.len() > 10_000 {
                    return out;
                }
            }
        }
        out
    }

    pub fn order(&self) -> usize {
        self.elements().len()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum BlockKind {
    Type1 { tau: f64, tau_bar: f64, alpha: f64 },
    Type2 { k: usize, tau: f64 },
}

/// A block described by its ends (labeled E⁻¹, E⁰, E¹ for Type 1 and
/// 0..k for Type 2) and its symmetry group.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BuildingBlock {
    pub kind: BlockKind,
    pub ends: Vec<EndDescriptor>,
    pub symmetry: SymmetryGroup,
}

impl BuildingBlock {
    pub fn end(&self, label: &str) -> Option<&EndDescriptor> {
        self.ends.iter().find(|e| e.label == label)
    }

    pub fn balancing_residual(&self) -> Result<Vector3<f64>> {
        let pairs: Vec<_> = self.ends.iter().map(|e| (e.tau(), e.direction)).collect();
        check_balancing(&pairs)
    }

    /// Sorted canonical keys of the end set.
    pub fn end_keys(&self) -> Vec<String> {
        let mut k: Vec<_> = self.ends.iter().map(|e| e.canonical_key()).collect();
        k.sort();
        k
    }

    /// Whether `g` permutes the ends.
    pub fn is_invariant_under(&self, g: &Matrix3<f64>) -> bool {
        let mut img: Vec<_> = self
            .ends
            .iter()
            .map(|e| e.transformed(g, &Vector3::zeros()).canonical_key())
            .collect();
        img.sort();
        img == self.end_keys()
    }
}

pub fn alpha_k(k: usize) -> f64 {
    PI / 2.0 - PI / k as f64
}

/// τ̄ solving τ|τ| + 2cos α · τ̄|τ̄| = 0 with sign opposite to τ.
pub fn solve_balancing(tau: f64, alpha: f64) -> Result<f64> {
    if tau == 0.0 || !tau.is_finite() {
        return Err(invalid("τ must be finite and nonzero"));
    }
    if !(alpha > 0.0 && alpha < PI / 2.0) {
        return Err(invalid(format!(
            "α = {alpha} must lie in (0, π/2); α = π/2 makes balancing degenerate"
        )));
    }
    Ok(-tau.signum() * tau.abs() / (2.0 * alpha.cos()).sqrt())
}

/// Σ τ_ℓ|τ_ℓ| a_ℓ.
pub fn check_balancing(ends: &[(f64, Vector3<f64>)]) -> Result<Vector3<f64>> {
    if ends.is_empty() {
        return Err(invalid("balancing needs at least one end"));
    }
    let mut sum = Vector3::zeros();
    for (t, a) in ends {
        if (a.norm() - 1.0).abs() > 1e-12 {
            return Err(invalid("end directions must be unit vectors"));
        }
        sum += a * (t * t.abs());
    }
    Ok(sum)
}

fn check_k_tau(k: usize, tau: f64) -> Result<DelaunayParameter> {
    if k < 3 {
        return Err(invalid(format!("k = {k}: at least 3 ends are required")));
    }
    let t = DelaunayParameter::new(tau)?;
    if tau == 1.0 {
        return Err(invalid("blocks need τ ≠ 1"));
    }
    Ok(t)
}

fn end(
    label: &str,
    profile: Arc<crate::delaunay::DelaunayProfile>,
    axis: Vector3<f64>,
    d: f64,
    model: &GraphModel,
    rate: f64,
) -> Result<EndDescriptor> {
    Ok(EndDescriptor {
        label: label.into(),
        model: DelaunaySurface::new(profile, axis, axis * d)?,
        axial_offset: d,
        direction: axis,
        graph: EndGraph::new(model, rate)?,
        decay_rate: rate,
    })
}

/// Type-1 block Σ_{τ,α_k}: E⁰ along −e₂ over D_τ^{e₂} − d⁰e₂, E¹ along
/// a_α = −sin α e₁ − cos α e₂ over D_τ̄^{a_α} + d¹a_α, and E⁻¹ = S₁E¹.
pub fn make_type1(tau: f64, k: usize, d: &DFunctions, graph: &GraphModel) -> Result<BuildingBlock> {
    let t = check_k_tau(k, tau)?;
    let alpha = alpha_k(k);
    let tau_bar = solve_balancing(tau, alpha)?;
    let tb = DelaunayParameter::new(tau_bar)?;
    let p = Arc::new(solve_profile(t, 1, DEFAULT_TOL)?);
    let pb = Arc::new(solve_profile(tb, 1, DEFAULT_TOL)?);
    let g = indicial_root(t, 2, DEFAULT_TOL)?;
    let gb = indicial_root(tb, 2, DEFAULT_TOL)?;
    let a = Vector3::new(-alpha.sin(), -alpha.cos(), 0.0);
    let e0 = EndDescriptor {
        label: "E0".into(),
        model: DelaunaySurface::new(p, -Vector3::y(), Vector3::y() * -d.d0.eval(tau))?,
        axial_offset: d.d0.eval(tau),
        direction: -Vector3::y(),
        graph: EndGraph::new(graph, g)?,
        decay_rate: g,
    };
    let e1 = end("E1", pb, a, d.d1.eval(tau), graph, gb)?;
    let mut em1 = e1.transformed(&reflection_s1(), &Vector3::zeros());
    em1.label = "E-1".into();
    Ok(BuildingBlock {
        kind: BlockKind::Type1 {
            tau,
            tau_bar,
            alpha,
        },
        ends: vec![em1, e0, e1],
        symmetry: SymmetryGroup::new(vec![reflection_s1(), reflection_s3()])?,
    })
}

/// Type-2 block Σ̄_τ: end ℓ over R_{2πℓ/k}(D_τ^{e₂} + d̄⁰e₂).
pub fn make_type2(tau: f64, k: usize, d: &DFunctions, graph: &GraphModel) -> Result<BuildingBlock> {
    let t = check_k_tau(k, tau)?;
    let p = Arc::new(solve_profile(t, 1, DEFAULT_TOL)?);
    let g = indicial_root(t, 2, DEFAULT_TOL)?;
    let base = end("0", p, Vector3::y(), d.d0_bar.eval(tau), graph, g)?;
    let ends = (0..k)
        .map(|l| {
            let mut e = base.transformed(&rotation_z(2.0 * PI * l as f64 / k as f64), &Vector3::zeros());
            e.label = l.to_string();
            e
        })
        .collect();
    Ok(BuildingBlock {
        kind: BlockKind::Type2 { k, tau },
        ends,
        symmetry: SymmetryGroup::new(vec![rotation_z(2.0 * PI / k as f64)])?,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundaryCircle {
    pub end: String,
    pub s_cut: f64,
    pub center: Vector3<f64>,
    pub normal: Vector3<f64>,
}

/// Compact block obtained by cutting every end at a parameter value.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TruncatedBlock {
    pub kind: BlockKind,
    pub windows: Vec<(String, f64)>,
    pub boundary_circles: Vec<BoundaryCircle>,
    /// χ = 2 − b for a genus-zero core with b boundary circles.
    pub euler_characteristic: i64,
}

/// Cuts E⁰ (Type 1) or every end (Type 2) at `s0`, E^{±1} at `s1`.
pub fn truncate(block: &BuildingBlock, s0: f64, s1: f64) -> Result<TruncatedBlock> {
    if !(s0 > 0.0 && s1 > 0.0) {
        return Err(invalid("truncation parameters must be positive"));
    }
    let mut windows = Vec::new();
    let mut circles = Vec::new();
    for e in &block.ends {
        let cut = match (&block.kind, e.label.as_str()) {
            (BlockKind::Type1 { .. }, "E0") | (BlockKind::Type2 { .. }, _) => s0,
            _ => s1,
        };
        let sign = e.model.axis.dot(&e.direction).signum();
        let p = e.model.profile.eval(sign * cut);
        let on_axis = e.model.offset + e.model.axis * (0.5 * p.kappa);
        windows.push((e.label.clone(), cut));
        circles.push(BoundaryCircle {
            end: e.label.clone(),
            s_cut: cut,
            center: on_axis,
            normal: e.direction,
        });
    }
    let b = circles.len() as i64;
    Ok(TruncatedBlock {
        kind: block.kind.clone(),
        windows,
        boundary_circles: circles,
        euler_characteristic: 2 - b,
    })
}

/// sup over unit bands [s, s+1] of e^{−μs}·max(|∂^β f|, |β| ≤ r), for a
/// field sampled on s ≥ 0. Returns `f64::INFINITY` when the weighted band
/// sups still grow at the end of the window, i.e. f ∉ E_μ.
pub fn weighted_norm(field: &ScalarField, mu: f64, r: usize) -> Result<f64> {
    if r > 2 {
        return Err(invalid("weighted norms are implemented for r ≤ 2"));
    }
    let g = &field.grid;
    if g.ns < 4 {
        return Err(CmcError::CoarseGrid("weighted norm needs at least 4 s-nodes".into()));
    }
    let sp = PeriodicDiff::new(g.ntheta);
    let mut parts: Vec<Vec<f64>> = vec![field.values.clone()];
    if r >= 1 {
        let (ds, dss) = diff_s(&field.values, g.ns, g.ntheta, g.hs, FdOrder::Second);
        let (dt, dtt) = theta_derivs(&sp, &field.values, g, true);
        parts.push(ds.clone());
        parts.push(dt);
        if r == 2 {
            let (dst, _) = theta_derivs(&sp, &ds, g, false);
            parts.extend([dss, dst, dtt]);
        }
    }
    let s_end = g.s(g.ns - 1);
    let nbands = ((s_end - g.s0).floor() as usize).max(1);
    let mut bands = vec![0.0f64; nbands];
    for i in 0..g.ns {
        let s = g.s(i);
        let b = ((s - g.s0).floor() as usize).min(nbands - 1);
        let w = (-mu * s).exp();
        for j in 0..g.ntheta {
            let k = g.idx(i, j);
            let m = parts.iter().fold(0.0f64, |m, p| m.max(p[k].abs()));
            bands[b] = bands[b].max(w * m);
        }
    }
    let norm = bands.iter().cloned().fold(0.0, f64::max);
    if nbands >= 3 {
        let tail = &bands[nbands - 3..];
        if tail.iter().all(|&v| v > 0.0) {
            let slope = (tail[2].ln() - tail[0].ln()) / 2.0;
            if slope > 1e-6 {
                return Ok(f64::INFINITY);
            }
        }
    }
    Ok(norm)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_evaluates() {
        let r = Rational::Ratio {
            num: vec![1.0, 2.0],
            den: vec![1.0, 0.0, 1.0],
        };
        assert!((r.eval(0.5) - 2.0 / 1.25).abs() < 1e-15);
        let d: DFunctions = serde_json::from_str(r#"{"d0":1.0,"d0_bar":{"num":[0,1],"den":[1]},"d1":0.5}"#).unwrap();
        assert_eq!(d.d0_bar.eval(0.3), 0.3);
    }

    #[test]
    fn low_modes_rejected() {
        let m = GraphModel {
            amplitude: 0.01,
            modes: vec![FourierMode { j: 1, cos: 1.0, sin: 0.0 }],
        };
        assert!(EndGraph::new(&m, 1.0).is_err());
    }

    #[test]
    fn degenerate_alpha_rejected() {
        assert!(solve_balancing(0.3, PI / 2.0).is_err());
        assert!(solve_balancing(0.0, 0.3).is_err());
    }

    #[test]
    fn closure_of_type1_generators_has_four_elements() {
        let g = SymmetryGroup::new(vec![reflection_s1(), reflection_s3()]).unwrap();
        assert_eq!(g.order(), 4);
        let r = SymmetryGroup::new(vec![rotation_z(2.0 * PI / 5.0)]).unwrap();
        assert_eq!(r.order(), 5);
    }

    #[test]
    fn bad_cuts_and_orders_rejected() {
        assert!(make_type2(0.3, 2, &DFunctions::default(), &GraphModel::default()).is_err());
        let b = make_type2(0.3, 3, &DFunctions::default(), &GraphModel::default()).unwrap();
        assert!(truncate(&b, -1.0, 1.0).is_err());
        let f = ScalarField::zeros(&crate::patch::Grid::new(0.0, 0.1, 10, 8).unwrap());
        assert!(weighted_norm(&f, 0.0, 3).is_err());
    }
}
