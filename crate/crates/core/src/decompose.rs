//! Factorization into small-step universal sets, checked by recomposition.
//!
//! Factors are listed outermost first: `factors[0]` is applied last, so the
//! plan denotes `Φ = F_0 ∘ F_1 ∘ … ∘ F_{n-1}`.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::canonical::{to_canonical, AxisOrdering};
use crate::channel::{compose, extremal_angles_from_uv, make_generator, AffineChannel, GeneratorSpec};
use crate::cp::{fac_unital, Verdict};
use crate::error::{Error, Result};
use crate::geometry::{class_from_angles, extremal_form, ExtremalClass};
use crate::rotation::{axis_angle, inverse_permutation};
use crate::tol;

/// Which universal set the factors are drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanKind {
    Edge,
    Unital,
    Extremal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionPlan {
    pub kind: PlanKind,
    pub target: Option<AffineChannel>,
    pub epsilon: f64,
    pub factors: Vec<GeneratorSpec>,
    pub recomposition_error: f64,
}

impl DecompositionPlan {
    fn finish(kind: PlanKind, target: AffineChannel, epsilon: f64, factors: Vec<GeneratorSpec>) -> Result<Self> {
        let mut plan = Self { kind, target: Some(target), epsilon, factors, recomposition_error: 0.0 };
        plan.recomposition_error = recompose(&plan)?.1;
        Ok(plan)
    }

    pub fn count(&self, kind: &str) -> usize {
        self.factors.iter().filter(|f| f.kind_name() == kind).count()
    }
}

/// Left fold of `compose` over the factors, and the transfer-matrix distance
/// to the target (0 without a target).
pub fn recompose(plan: &DecompositionPlan) -> Result<(AffineChannel, f64)> {
    let mut acc = AffineChannel::identity();
    for f in &plan.factors {
        acc = compose(&acc, &make_generator(f)?);
    }
    let err = plan.target.map_or(0.0, |t| acc.distance(&t));
    Ok((acc, err))
}

fn check_epsilon(eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 0.5 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("epsilon {eps} outside (0, 1/2)")))
    }
}

fn z_half_turn() -> GeneratorSpec {
    GeneratorSpec::Unitary { axis: [0.0, 0.0, 1.0], half_angle: std::f64::consts::FRAC_PI_2 }
}

/// Phase-flip chain for `PF(t)`.
fn edge_factors(t: f64, eps: f64) -> Vec<GeneratorSpec> {
    if t <= 0.0 {
        return Vec::new();
    }
    if t == 0.5 {
        return vec![GeneratorSpec::PhaseFlip { t: 0.5 }];
    }
    if t <= eps {
        return vec![GeneratorSpec::PhaseFlip { t }];
    }
    if t > 0.5 {
        // PF(t) = Rz(π) ∘ PF(1 - t)
        let mut f = vec![z_half_turn()];
        f.extend(edge_factors(1.0 - t, eps));
        return f;
    }
    let log_target = (-2.0 * t).ln_1p();
    let mut n = ((log_target / (-2.0 * eps).ln_1p()).ceil() as usize).max(1);
    let step = |n: usize| -0.5 * (log_target / n as f64).exp_m1();
    while step(n) > eps {
        n += 1;
    }
    vec![GeneratorSpec::PhaseFlip { t: step(n) }; n]
}

/// `PF(t)` as `n` phase flips of strength at most `ε`, the atomic `PF(1/2)`,
/// or a z half turn followed by the chain for `1 - t` when `t > 1/2`.
pub fn decompose_edge(t: f64, eps: f64) -> Result<DecompositionPlan> {
    check_epsilon(eps)?;
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidParameter(format!("phase flip probability {t} outside [0, 1]")));
    }
    let target = make_generator(&GeneratorSpec::PhaseFlip { t })?;
    DecompositionPlan::finish(PlanKind::Edge, target, eps, edge_factors(t, eps))
}

fn rotation_factor(r: &Matrix3<f64>) -> Option<GeneratorSpec> {
    let (_, angle) = axis_angle(r);
    (angle > 1e-15).then(|| GeneratorSpec::from_rotation(r))
}

fn wrap(r1: &Matrix3<f64>, core: Vec<GeneratorSpec>, r2: &Matrix3<f64>) -> Vec<GeneratorSpec> {
    let mut f: Vec<GeneratorSpec> = rotation_factor(r1).into_iter().collect();
    f.extend(core);
    f.extend(rotation_factor(r2));
    f
}

/// Cyclic permutation carrying `e_2` to `e_k`.
fn cyclic_to(k: usize) -> [usize; 3] {
    [[1, 2, 0], [2, 0, 1], [0, 1, 2]][k]
}

/// `diag(d)` on an edge of the tetrahedron (some `|d_k| = 1`, the other two
/// equal up to a shared sign flip): sign flip, permuted phase-flip chain.
fn edge_core(d: &Vector3<f64>, eps: f64) -> Option<Vec<GeneratorSpec>> {
    const EDGE: f64 = 1e-12;
    for k in (0..3).rev() {
        if (d[k].abs() - 1.0).abs() > EDGE {
            continue;
        }
        let others: Vec<usize> = (0..3).filter(|&i| i != k).collect();
        // flip options that leave d_k = +1
        let flips: Vec<Option<[usize; 2]>> = if d[k] > 0.0 {
            vec![None, Some([others[0], others[1]])]
        } else {
            vec![Some([k.min(others[0]), k.max(others[0])]), Some([k.min(others[1]), k.max(others[1])])]
        };
        for flip in flips {
            let mut e = *d;
            if let Some([i, j]) = flip {
                e[i] = -e[i];
                e[j] = -e[j];
            }
            if (e[others[0]] - e[others[1]]).abs() > EDGE {
                continue;
            }
            let a = 0.5 * (e[others[0]] + e[others[1]]);
            let t = (0.5 * (1.0 - a)).clamp(0.0, 1.0);
            let sigma = cyclic_to(k);
            let mut f: Vec<GeneratorSpec> = flip.map(|axes| GeneratorSpec::SignFlip { axes }).into_iter().collect();
            let chain = edge_factors(t, eps);
            if sigma == [0, 1, 2] || chain.is_empty() {
                f.extend(chain);
            } else {
                f.push(GeneratorSpec::Permutation { sigma });
                f.extend(chain);
                f.push(GeneratorSpec::Permutation { sigma: inverse_permutation(sigma) });
            }
            return Some(f);
        }
    }
    None
}

fn snap_unit(x: f64) -> Option<f64> {
    const SLACK: f64 = 1e-12;
    (-SLACK..=1.0 + SLACK).contains(&x).then(|| x.clamp(0.0, 1.0))
}

/// Bow-tie parameters `(s, t, half)` with `diag(λ) = M(s, z) · PF(t)`.
///
/// From `M(s, z) = diag(1 + s(z-1), z + s(1-z), z)` and
/// `M_PF(t) = diag(1-2t, 1-2t, 1)`: on half 1, `λ1 + λ2 = (1-2t)(1+z)` and
/// `λ1 - λ2 = (1-2t)(1-z)(1-2s)`. On half 2,
/// `M(s, z) = diag(z - s(1+z), 1 - s(1+z), z)` gives
/// `λ2 - λ1 = (1-2t)(1-z)` and `λ1 + λ2 = (1-2t)(1+z)(1-2s)`.
pub fn bow_tie_parameters(l: &Vector3<f64>) -> Option<(f64, f64, u8)> {
    let (l1, l2, z) = (l[0], l[1], l[2]);
    if z.abs() >= 1.0 {
        return None;
    }
    let sum = l1 + l2;
    let diff = l1 - l2;
    let tiny = 1e-14;
    if sum.abs() <= tiny && diff.abs() <= tiny {
        return Some((0.5, 0.5, 1));
    }
    if sum.abs() > tiny {
        let a = sum / (1.0 + z);
        let t = 0.5 * (1.0 - a);
        let s = 0.5 * (1.0 - diff / (a * (1.0 - z)));
        if let (Some(s), Some(t)) = (snap_unit(s), snap_unit(t)) {
            return Some((s, t, 1));
        }
    }
    if diff.abs() > tiny {
        let a = -diff / (1.0 - z);
        let t = 0.5 * (1.0 - a);
        let s = 0.5 * (1.0 - sum / (a * (1.0 + z)));
        if let (Some(s), Some(t)) = (snap_unit(s), snap_unit(t)) {
            return Some((s, t, 2));
        }
    }
    None
}

fn unital_core(l: &Vector3<f64>, eps: f64) -> Result<Vec<GeneratorSpec>> {
    let q = crate::cp::q_values(l);
    if q.iter().filter(|&&x| x > 1e-12).count() <= 2 {
        if let Some(f) = edge_core(l, eps) {
            return Ok(f);
        }
    }
    // keep λ1 + λ2 ≥ 0 so half 1 is reached with t ≤ 1/2 where possible
    let (flip, l) = if l[0] + l[1] < 0.0 {
        (Some(GeneratorSpec::SignFlip { axes: [0, 1] }), Vector3::new(-l[0], -l[1], l[2]))
    } else {
        (None, *l)
    };
    let (s, t, half) = bow_tie_parameters(&l)
        .ok_or_else(|| Error::Consistency(format!("no bow-tie parameters for λ = {:?}", l.as_slice())))?;
    let mut f: Vec<GeneratorSpec> = flip.into_iter().collect();
    let face = GeneratorSpec::FaceChannel { s, z: l[2], half };
    let edge_tol = 1e-12;
    if s <= edge_tol || s >= 1.0 - edge_tol {
        let d = make_generator(&face)?.m().diagonal();
        f.extend(edge_core(&d, eps).ok_or_else(|| Error::Consistency("face channel is not on an edge".into()))?);
    } else {
        f.push(face);
    }
    f.extend(edge_factors(t, eps));
    Ok(f)
}

/// Unital CP channel as rotations around a face channel and a phase-flip chain.
pub fn decompose_unital(phi: &AffineChannel, eps: f64) -> Result<DecompositionPlan> {
    check_epsilon(eps)?;
    if !phi.is_unital(tol::ALGEBRAIC) {
        return Err(Error::Precondition("channel is not unital".into()));
    }
    // diagonal input keeps its own axes, so its third entry is the z of the bow tie
    let (r1, lambda, r2) = if phi.is_diagonal(0.0) {
        (Matrix3::identity(), phi.m().diagonal(), Matrix3::identity())
    } else {
        let c = to_canonical(phi, AxisOrdering::MagnitudeDescending);
        (c.post_rotation, c.lambda, c.pre_rotation)
    };
    let report = fac_unital(&lambda, tol::PHYSICAL);
    if report.verdict == Verdict::NotCP {
        return Err(Error::NotCompletelyPositive { min_eigenvalue: 2.0 * report.margin });
    }
    let factors = wrap(&r1, unital_core(&lambda, eps)?, &r2);
    DecompositionPlan::finish(PlanKind::Unital, *phi, eps, factors)
}

fn two_po_chain(theta: f64, omega: f64, eps: f64) -> Vec<GeneratorSpec> {
    let n = ((omega - theta) / eps).floor() as usize + 1;
    let h = (omega - theta) / n as f64;
    let grid: Vec<f64> = (0..=n).map(|k| if k == n { omega } else { theta + k as f64 * h }).collect();
    (0..n).rev().map(|k| GeneratorSpec::ExtremalAngles { theta: grid[k], omega: grid[k + 1] }).collect()
}

fn one_po_chain(lambda: f64, eps: f64) -> Vec<GeneratorSpec> {
    let log_target = lambda.ln();
    let mut n = ((log_target / (-eps).ln_1p()).ceil() as usize).max(1);
    let gap = |n: usize| -(log_target / n as f64).exp_m1();
    while gap(n) >= eps {
        n += 1;
    }
    // cos u = 1 - gap, u = 2 asin(√(gap/2))
    let u = 2.0 * (0.5 * gap(n)).sqrt().asin();
    vec![GeneratorSpec::Extremal { u, v: u }; n]
}

/// Extremal channel as rotations around a chain of small extremal steps.
pub fn decompose_extremal(phi: &AffineChannel, eps: f64) -> Result<DecompositionPlan> {
    check_epsilon(eps)?;
    let (c, u, v) =
        extremal_form(phi, tol::EXTREMAL).ok_or_else(|| Error::Classification("channel is not extremal".into()))?;
    let factors = match class_from_angles(u, v) {
        ExtremalClass::Unitary => rotation_factor(phi.m()).into_iter().collect(),
        ExtremalClass::OnePODeg => {
            let t = phi.t() / phi.t().norm();
            vec![GeneratorSpec::Constant { state: [t.x, t.y, t.z] }]
        }
        ExtremalClass::OnePONonDeg { lambda } => wrap(&c.post_rotation, one_po_chain(lambda, eps), &c.pre_rotation),
        ExtremalClass::TwoPONonDeg { theta, omega } => {
            wrap(&c.post_rotation, two_po_chain(theta, omega, eps), &c.pre_rotation)
        }
        ExtremalClass::TwoPODeg { omega } => {
            let x = (0.5 * eps).min(0.5 * omega);
            let mut core = two_po_chain(x, omega, eps);
            core.push(GeneratorSpec::ExtremalAngles { theta: 0.0, omega: x });
            wrap(&c.post_rotation, core, &c.pre_rotation)
        }
    };
    DecompositionPlan::finish(PlanKind::Extremal, *phi, eps, factors)
}

/// Unital input goes to [`decompose_unital`], extremal input to
/// [`decompose_extremal`]; anything else is unsupported.
pub fn decompose(phi: &AffineChannel, eps: f64) -> Result<DecompositionPlan> {
    if phi.is_unital(tol::ALGEBRAIC) {
        return decompose_unital(phi, eps);
    }
    if extremal_form(phi, tol::EXTREMAL).is_some() {
        return decompose_extremal(phi, eps);
    }
    Err(Error::Unsupported("channel is neither unital nor extremal".into()))
}

/// Every factor that violates the membership rules of the plan's universal set.
pub fn membership_violations(plan: &DecompositionPlan) -> Vec<String> {
    let eps = plan.epsilon;
    let mut bad = Vec::new();
    for (i, f) in plan.factors.iter().enumerate() {
        let ok = match (*f, plan.kind) {
            (GeneratorSpec::Unitary { .. } | GeneratorSpec::Permutation { .. } | GeneratorSpec::SignFlip { .. }, _) => {
                true
            }
            (GeneratorSpec::PhaseFlip { t }, PlanKind::Edge | PlanKind::Unital) => t <= eps || t == 0.5,
            (GeneratorSpec::FaceChannel { s, z, .. }, PlanKind::Unital) => s > 0.0 && s < 1.0 && z > -1.0 && z < 1.0,
            (GeneratorSpec::Constant { state }, PlanKind::Extremal) => {
                (Vector3::from(state).norm() - 1.0).abs() <= tol::BLOCH_NORM
            }
            (GeneratorSpec::Extremal { u, v }, PlanKind::Extremal) => {
                if u == v {
                    let l = u.cos();
                    (l > 1.0 - eps && l < 1.0) || l.abs() <= tol::ALGEBRAIC
                } else {
                    let (theta, omega) = extremal_angles_from_uv(u, v);
                    omega - theta < eps || (theta == 0.0 && omega < eps)
                }
            }
            (GeneratorSpec::ExtremalAngles { theta, omega }, PlanKind::Extremal) => {
                omega - theta < eps || (theta == 0.0 && omega < eps)
            }
            _ => false,
        };
        if !ok {
            bad.push(format!("factor {i} ({}) is not in the universal set: {f:?}", f.kind_name()));
        }
    }
    bad
}

pub fn check_membership(plan: &DecompositionPlan) -> Result<()> {
    let bad = membership_violations(plan);
    if bad.is_empty() {
        Ok(())
    } else {
        Err(Error::Consistency(bad.join("; ")))
    }
}
