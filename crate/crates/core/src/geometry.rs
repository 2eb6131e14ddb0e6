//! Geometric classification: Kraus rank, pure outputs, extremality.

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

use crate::canonical::{extremal_frame, normalize_extremal_signs, to_canonical, AxisOrdering, CanonicalChannel};
use crate::channel::{extremal_angles_from_uv, AffineChannel, BlochVector, C64};
use crate::cp::{choi, kraus_decomposition, q_values};
use crate::error::{Error, Result};
use crate::rotation::frame_with_third_axis;
use crate::{par, tol};

/// Pure states in the image of a channel.
#[derive(Debug, Clone, PartialEq)]
pub enum PureOutputClass {
    Zero,
    One(BlochVector),
    Two(BlochVector, BlochVector),
    All,
}

impl PureOutputClass {
    pub fn count_label(&self) -> &'static str {
        match self {
            Self::Zero => "zero",
            Self::One(_) => "one",
            Self::Two(..) => "two",
            Self::All => "all",
        }
    }

    pub fn same_class(&self, other: &Self) -> bool {
        self.count_label() == other.count_label()
    }

    pub fn points(&self) -> Vec<BlochVector> {
        match self {
            Self::One(p) => vec![*p],
            Self::Two(p, q) => vec![*p, *q],
            _ => Vec::new(),
        }
    }
}

/// Extremal channels by number and shape of pure outputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum ExtremalClass {
    Unitary,
    /// Constant channel onto a pure state.
    OnePODeg,
    OnePONonDeg {
        lambda: f64,
    },
    TwoPODeg {
        omega: f64,
    },
    TwoPONonDeg {
        theta: f64,
        omega: f64,
    },
}

fn require_cp(phi: &AffineChannel, tol: f64) -> Result<[f64; 4]> {
    let e = choi(phi).eigenvalues();
    if e[0] < -tol {
        return Err(Error::NotCompletelyPositive { min_eigenvalue: e[0] });
    }
    Ok(e)
}

/// Number of Choi eigenvalues above `rank_tol`.
pub fn kraus_rank(phi: &AffineChannel, rank_tol: f64) -> Result<usize> {
    let e = require_cp(phi, tol::PHYSICAL)?;
    let rank = e.iter().filter(|&&x| x > rank_tol).count();
    if phi.t().norm() == 0.0 {
        let c = to_canonical(phi, AxisOrdering::MagnitudeDescending);
        let by_q = q_values(&c.lambda).iter().filter(|&&q| 2.0 * q > rank_tol).count();
        if by_q != rank {
            return Err(Error::Consistency(format!("Kraus rank {rank} but {by_q} positive q_i")));
        }
    }
    Ok(rank)
}

fn is_unitary(phi: &AffineChannel) -> bool {
    phi.t().norm() <= tol::ALGEBRAIC && crate::rotation::is_rotation(phi.m(), 1e-10)
}

/// Non-unitary with Kraus rank 3.
pub fn is_indivisible(phi: &AffineChannel) -> Result<bool> {
    Ok(!is_unitary(phi) && kraus_rank(phi, tol::RANK)? == 3)
}

fn bloch_unit(v: Vector3<f64>) -> BlochVector {
    let n = v.norm();
    BlochVector::from_vec(if n > 0.0 { v / n } else { v })
}

/// Group distinct output points (closer than `radius` counts as one).
fn cluster(points: &[Vector3<f64>], radius: f64) -> Vec<Vector3<f64>> {
    let mut out: Vec<Vector3<f64>> = Vec::new();
    for p in points {
        if out.iter().all(|q| (q - p).norm() > radius) {
            out.push(*p);
        }
    }
    out
}

fn classify_points(points: Vec<Vector3<f64>>, radius: f64) -> Result<PureOutputClass> {
    let pts = cluster(&points, radius);
    match pts.len() {
        0 => Ok(PureOutputClass::Zero),
        1 => Ok(PureOutputClass::One(bloch_unit(pts[0]))),
        2 => Ok(PureOutputClass::Two(bloch_unit(pts[0]), bloch_unit(pts[1]))),
        n => Err(Error::Consistency(format!("{n} separate pure outputs: contact along a curve"))),
    }
}

fn is_all(phi: &AffineChannel) -> bool {
    phi.t().norm() <= tol::ALGEBRAIC && (phi.m().transpose() * phi.m() - Matrix3::identity()).norm() <= 1e-10
}

/// Pure outputs from the stationarity conditions of `max ‖Λr + t‖²` on the
/// unit sphere, solved in the canonical frame.
///
/// Stationary points satisfy `r_i = λ_i t_i / (μ - λ_i²)`; the global maximum
/// has `μ ≥ max λ²`. When the translation has no component along the axes of
/// largest `|λ|`, the maximum can sit exactly at `μ = max λ²` and is then
/// attained on a symmetric set (two points, a circle, or the sphere).
pub fn pure_outputs(phi: &AffineChannel, tol: f64) -> Result<PureOutputClass> {
    require_cp(phi, tol)?;
    if is_all(phi) {
        return Ok(PureOutputClass::All);
    }
    let c = to_canonical(phi, AxisOrdering::MagnitudeDescending);
    let l = c.lambda;
    let t = c.t_canonical;
    let to_output = |r: &Vector3<f64>| l.component_mul(r) + t;
    let l2 = l.component_mul(&l);
    let lmax2 = l2.max();
    if lmax2 <= 1e-30 {
        let pts = if t.norm() >= 1.0 - tol::CONTACT { vec![t] } else { vec![] };
        return finish(&c, pts);
    }

    let group: Vec<usize> = (0..3).filter(|&i| lmax2 - l2[i] <= 1e-9 * lmax2).collect();
    let lt = l.component_mul(&t);
    let mut candidates: Vec<Vector3<f64>> = Vec::new();

    // regular branch: μ > max λ²
    if group.iter().any(|&i| lt[i].abs() > 1e-10) {
        let g = |mu: f64| (0..3).map(|i| (lt[i] / (mu - l2[i])).powi(2)).sum::<f64>();
        let mut lo = lmax2;
        let mut hi = lmax2 + lt.norm() + 1e-300;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if g(mid) > 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mu = hi;
        let r = Vector3::from_fn(|i, _| lt[i] / (mu - l2[i]));
        if r.norm() > 0.0 {
            candidates.push(r.normalize());
        }
    }

    // boundary branch: μ = max λ², group components free on a sphere of radius ρ
    if group.iter().all(|&i| lt[i].abs() <= 1e-10) {
        let mut base = Vector3::zeros();
        let mut s = 0.0;
        for i in (0..3).filter(|i| !group.contains(i)) {
            base[i] = lt[i] / (lmax2 - l2[i]);
            s += base[i] * base[i];
        }
        if s <= 1.0 + 1e-12 {
            let rho2 = (1.0 - s).max(0.0);
            let contact = |r: &Vector3<f64>| to_output(r).norm() >= 1.0 - tol::CONTACT;
            if rho2 <= 1e-8 {
                candidates.push(base);
            } else {
                let rho = rho2.sqrt();
                match group.len() {
                    1 => {
                        let mut p = base;
                        p[group[0]] = rho;
                        let mut q = base;
                        q[group[0]] = -rho;
                        candidates.push(p);
                        candidates.push(q);
                    }
                    _ => {
                        let mut p = base;
                        p[group[0]] = rho;
                        if contact(&p) {
                            return Err(Error::Consistency(format!(
                                "pure outputs form a circle of radius {:.3e} for a channel that passed the CP test",
                                rho * l[group[0]].abs()
                            )));
                        }
                    }
                }
            }
        }
    }

    let pts: Vec<Vector3<f64>> = candidates.iter().map(to_output).filter(|o| o.norm() >= 1.0 - tol::CONTACT).collect();
    finish(&c, pts)
}

fn finish(c: &CanonicalChannel, canonical_points: Vec<Vector3<f64>>) -> Result<PureOutputClass> {
    classify_points(canonical_points.iter().map(|p| c.post_rotation * p).collect(), tol::PO_CLUSTER)
}

/// Points of a Fibonacci lattice on the unit sphere.
pub fn fibonacci_sphere(n: usize, i: usize) -> Vector3<f64> {
    let golden = PI * (3.0 - 5f64.sqrt());
    let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
    let rad = (1.0 - z * z).max(0.0).sqrt();
    let (s, c) = (golden * i as f64).sin_cos();
    Vector3::new(rad * c, rad * s, z)
}

fn objective(phi: &AffineChannel, r: &Vector3<f64>) -> f64 {
    (phi.m() * r + phi.t()).norm_squared()
}

fn tangent_gradient(phi: &AffineChannel, r: &Vector3<f64>) -> (Vector3<f64>, Vector2<f64>, Matrix3<f64>) {
    let g = 2.0 * phi.m().transpose() * (phi.m() * r + phi.t());
    let basis = frame_with_third_axis(r);
    let grad = Vector2::new(basis.column(0).dot(&g), basis.column(1).dot(&g));
    (g, grad, basis)
}

/// Riemannian Hessian of `‖Mr + t‖²` at `r` in the tangent frame `e1, e2`.
fn tangent_hessian(
    phi: &AffineChannel,
    r: &Vector3<f64>,
    g: &Vector3<f64>,
    e1: &Vector3<f64>,
    e2: &Vector3<f64>,
) -> Matrix2<f64> {
    let h_full = 2.0 * phi.m().transpose() * phi.m();
    let rg = r.dot(g);
    Matrix2::new(
        e1.dot(&(h_full * e1)) - rg,
        e1.dot(&(h_full * e2)),
        e2.dot(&(h_full * e1)),
        e2.dot(&(h_full * e2)) - rg,
    )
}

/// False at saddles, where some tangent direction still curves upward.
fn is_local_max(phi: &AffineChannel, r: &Vector3<f64>) -> bool {
    let (g, _, basis) = tangent_gradient(phi, r);
    let hess = tangent_hessian(phi, r, &g, &basis.column(0).into_owned(), &basis.column(1).into_owned());
    hess.symmetric_eigenvalues().max() <= 1e-8
}

/// Safeguarded Riemannian Newton ascent of `‖Mr + t‖²` on the sphere. Once
/// function values stop resolving progress (flat maxima), steps are still
/// accepted while they shrink the tangent gradient.
fn refine(phi: &AffineChannel, start: Vector3<f64>) -> Vector3<f64> {
    let h_norm = 2.0 * (phi.m().transpose() * phi.m()).norm();
    let mut r = start.normalize();
    let mut f = objective(phi, &r);
    for _ in 0..300 {
        let (g, grad, basis) = tangent_gradient(phi, &r);
        let (e1, e2) = (basis.column(0).into_owned(), basis.column(1).into_owned());
        let gn = grad.norm();
        if gn < 1e-16 {
            break;
        }
        let hess = tangent_hessian(phi, &r, &g, &e1, &e2);
        let newton = (hess.trace() < 0.0 && hess.determinant() > 0.0)
            .then(|| hess.try_inverse().map(|hi| -(hi * grad)))
            .flatten();
        let mut step = newton.unwrap_or(grad * (0.5 / h_norm.max(1e-3)));
        let mut moved = false;
        for _ in 0..40 {
            let cand = (r + e1 * step[0] + e2 * step[1]).normalize();
            let fc = objective(phi, &cand);
            let flat = fc >= f - 4.0 * f64::EPSILON * f.max(1.0);
            if fc > f || (flat && tangent_gradient(phi, &cand).1.norm() < gn) {
                moved = cand != r;
                r = cand;
                f = f.max(fc);
                break;
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
    }
    r
}

/// Brute-force pure-output search: evaluate on an `n`-point sphere lattice,
/// refine the best separated seeds locally, then cluster contact points.
pub fn pure_outputs_oracle(phi: &AffineChannel, n: usize) -> Result<PureOutputClass> {
    let n = n.max(16);
    let values = par::map_range(n, |i| objective(phi, &fibonacci_sphere(n, i)));
    let contact_sq = (1.0 - tol::CONTACT).powi(2);
    let touching: Vec<usize> = (0..n).filter(|&i| values[i] >= contact_sq).collect();
    if touching.len() as f64 > 0.99 * n as f64 {
        // the whole sphere only if the touching outputs are spread out, not a
        // single constant output
        let first = phi.m() * fibonacci_sphere(n, touching[0]) + phi.t();
        let spread =
            touching.iter().map(|&i| (phi.m() * fibonacci_sphere(n, i) + phi.t() - first).norm()).fold(0.0, f64::max);
        if spread > 1.0 {
            return Ok(PureOutputClass::All);
        }
    }
    let fmax = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut order: Vec<usize> = (0..n).filter(|&i| values[i] >= fmax - 0.1).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let spacing = (4.0 * PI / n as f64).sqrt();
    // well separated seeds cover every basin, the best lattice points resolve
    // maxima closer together than the seed spacing
    let mut seeds: Vec<Vector3<f64>> = Vec::new();
    for &i in &order {
        let p = fibonacci_sphere(n, i);
        if seeds.iter().all(|s| (s - p).norm() > 3.0 * spacing) {
            seeds.push(p);
            if seeds.len() == 16 {
                break;
            }
        }
    }
    seeds.extend(order.iter().take(128).map(|&i| fibonacci_sphere(n, i)));
    let outputs: Vec<Vector3<f64>> = par::map_range(seeds.len(), |k| refine(phi, seeds[k]))
        .into_iter()
        .filter(|r| is_local_max(phi, r))
        .map(|r| phi.m() * r + phi.t())
        .filter(|o| o.norm() >= 1.0 - tol::CONTACT)
        .collect();
    classify_points(outputs, tol::PO_CLUSTER)
}

/// True if the two pure outputs are antipodal; checks that this coincides
/// with unitality.
pub fn po_unitality_check(po: &PureOutputClass, phi: &AffineChannel, tol: f64) -> Result<bool> {
    let PureOutputClass::Two(p, q) = po else {
        return Err(Error::Precondition("unitality test needs exactly two pure outputs".into()));
    };
    let cos = p.vec().dot(q.vec()) / (p.norm() * q.norm());
    let angle = cos.clamp(-1.0, 1.0).acos();
    let antipodal = PI - angle <= tol::ANTIPODAL;
    let unital = phi.is_unital(tol);
    if antipodal != unital {
        return Err(Error::Consistency(format!(
            "pure outputs {} antipodal but channel is {} unital",
            if antipodal { "are" } else { "are not" },
            if unital { "" } else { "not" }
        )));
    }
    Ok(antipodal)
}

/// Normalized extremal form with its angles `(u, v)`, or `None`.
pub fn extremal_form(phi: &AffineChannel, tol: f64) -> Option<(CanonicalChannel, f64, f64)> {
    if phi.t().norm() == 0.0 {
        return is_unitary(phi).then(|| (to_canonical(phi, AxisOrdering::MagnitudeDescending), 0.0, 0.0));
    }
    let (c, residual) = extremal_frame(phi)?;
    if residual > tol {
        return None;
    }
    let (c, _, _) = normalize_extremal_signs(&c).ok()?;
    let [l1, l2, l3] = [c.lambda[0], c.lambda[1], c.lambda[2]];
    let t3 = c.t_canonical[2];
    if (l3 - l1 * l2).abs() > tol || (t3 * t3 - (1.0 - l1 * l1) * (1.0 - l2 * l2)).abs() > tol {
        return None;
    }
    if l1 > 1.0 + tol || l2 > 1.0 + tol {
        return None;
    }
    let sv = ((1.0 - l2) * (1.0 + l2)).max(0.0).sqrt();
    let v = sv.atan2(l2.min(1.0));
    let u = if sv > 1e-8 {
        (t3 / sv).min(1.0).atan2(l1.min(1.0))
    } else {
        ((1.0 - l1) * (1.0 + l1)).max(0.0).sqrt().atan2(l1.min(1.0))
    };
    let u = u.min(v);
    if u <= tol && v > tol {
        return None;
    }
    Some((c, u, v.min(FRAC_PI_2)))
}

/// Angles `(u, v)`, `u ≤ v`, if `phi` is extremal.
pub fn extremal_test(phi: &AffineChannel, tol: f64) -> Option<(f64, f64)> {
    extremal_form(phi, tol).map(|(_, u, v)| (u, v))
}

/// Extremality via linear independence of `{A_i† A_j}`.
pub fn landau_streater_extremal(phi: &AffineChannel) -> Result<bool> {
    let ops = kraus_decomposition(phi, tol::PHYSICAL, tol::RANK)?;
    let prods: Vec<Matrix2<C64>> = ops.iter().flat_map(|a| ops.iter().map(move |b| a.adjoint() * b)).collect();
    let k = prods.len();
    if k > 4 {
        return Ok(false);
    }
    let gram = nalgebra::DMatrix::from_fn(k, k, |i, j| (prods[i].adjoint() * prods[j]).trace());
    let eig = gram.symmetric_eigen().eigenvalues;
    let max = eig.max();
    Ok(eig.min() > 1e-9 * max.max(1.0))
}

/// Taxonomy of an extremal channel by its angles.
pub fn extremal_class(phi: &AffineChannel, tol: f64) -> Result<ExtremalClass> {
    let (u, v) = extremal_test(phi, tol).ok_or_else(|| Error::Classification("channel is not extremal".into()))?;
    Ok(class_from_angles(u, v))
}

pub fn class_from_angles(u: f64, v: f64) -> ExtremalClass {
    let eps = tol::EXTREMAL;
    if u <= eps && v <= eps {
        ExtremalClass::Unitary
    } else if FRAC_PI_2 - u <= eps {
        ExtremalClass::OnePODeg
    } else if (v - u).abs() <= eps {
        ExtremalClass::OnePONonDeg { lambda: u.cos() }
    } else if FRAC_PI_2 - v <= eps {
        ExtremalClass::TwoPODeg { omega: u }
    } else {
        let (theta, omega) = extremal_angles_from_uv(u, v);
        ExtremalClass::TwoPONonDeg { theta, omega }
    }
}

/// Shift `t3` that makes a flat ellipsoid with half-axes `(a, a, c)` touch the
/// sphere in a circle, and the two inequality margins `(c ± 1)² - 4a² - t3²`.
pub fn pancake_margin(a: f64, c: f64) -> Result<(f64, (f64, f64))> {
    if !(a > 0.0 && a <= 1.0 && c > 0.0 && c < a * a) {
        return Err(Error::InvalidParameter(format!("need 0 < c < a² and 0 < a ≤ 1, got a = {a}, c = {c}")));
    }
    let a2 = a * a;
    let t3 = ((1.0 - a2) * (a2 - c * c)).sqrt() / a;
    let plus = (c * c + 2.0 * c * a2 - 3.0 * a2 * a2) / a2;
    let minus = (c * c - 2.0 * c * a2 - 3.0 * a2 * a2) / a2;
    Ok((t3, (plus, minus)))
}

/// One row of the pancake sweep table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PancakeRow {
    pub a: f64,
    pub c: f64,
    pub t3: f64,
    pub margin_plus: f64,
    pub margin_minus: f64,
}

/// All grid points `a = k·step ≤ 1`, `c = j·step < a²`.
pub fn pancake_grid(step: f64) -> Vec<PancakeRow> {
    let na = (1.0 / step).round() as usize;
    let rows = par::map_range(na, |k| {
        let a = ((k + 1) as f64 * step).min(1.0);
        let mut out = Vec::new();
        let mut j = 1;
        loop {
            let c = j as f64 * step;
            if c >= a * a {
                break;
            }
            if let Ok((t3, (p, m))) = pancake_margin(a, c) {
                out.push(PancakeRow { a, c, t3, margin_plus: p, margin_minus: m });
            }
            j += 1;
        }
        out
    });
    rows.into_iter().flatten().collect()
}

/// Radius of curvature of the output ellipsoid's meridian at a pure output
/// of a two-pure-output extremal channel.
pub fn meridian_curvature_radius(phi: &AffineChannel, tol: f64) -> Result<f64> {
    let (c, u, v) = extremal_form(phi, tol).ok_or_else(|| Error::Classification("channel is not extremal".into()))?;
    if !matches!(class_from_angles(u, v), ExtremalClass::TwoPONonDeg { .. }) {
        return Err(Error::Precondition("curvature radius needs two non-degenerate pure outputs".into()));
    }
    let po = pure_outputs(phi, tol::PHYSICAL)?;
    let p = po.points().first().copied().ok_or_else(|| Error::Consistency("no pure output found".into()))?;
    let local = c.post_rotation.transpose() * p.vec();
    let a = c.lambda[0];
    let b = c.lambda[2];
    let t3 = c.t_canonical[2];
    let angle = ((local[2] - t3) / b).atan2(local[0] / a);
    let (s, co) = angle.sin_cos();
    Ok((a * a * s * s + b * b * co * co).powf(1.5) / (a * b))
}
