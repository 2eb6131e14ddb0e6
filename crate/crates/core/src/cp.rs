//! Complete positivity: Choi spectrum, Kraus operators and the closed-form
//! Fujiwara–Algoet inequalities (unital and general).

use nalgebra::{Matrix2, Matrix4, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::canonical::{to_canonical, AxisOrdering};
use crate::channel::{pauli, AffineChannel, C64};
use crate::error::{Error, Result};
use crate::{par, sample, tol};

/// Choi matrix with trace 2: entry `((a,i),(b,j))` is the conjugate of
/// `Φ(|i⟩⟨j|)_{ab}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChoiMatrix(Matrix4<C64>);

impl ChoiMatrix {
    pub fn matrix(&self) -> &Matrix4<C64> {
        &self.0
    }

    /// Trace-1 version (the state `(Φ ⊗ id)(|Ω⟩⟨Ω|)`).
    pub fn normalized(&self) -> Matrix4<C64> {
        self.0 * C64::new(0.5, 0.0)
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> [f64; 4] {
        let mut e: Vec<f64> = self.0.symmetric_eigen().eigenvalues.iter().copied().collect();
        e.sort_by(f64::total_cmp);
        [e[0], e[1], e[2], e[3]]
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }
}

/// `Φ(X)` for a 2×2 matrix, using `Φ(I) = I + t·σ`, `Φ(σ_k) = Σ_j M_jk σ_j`.
pub fn act_on_matrix(phi: &AffineChannel, x: &Matrix2<C64>) -> Matrix2<C64> {
    let s = pauli();
    let half = C64::new(0.5, 0.0);
    let tr = x.trace();
    let mut out = Matrix2::identity() * tr;
    for j in 0..3 {
        let mut coeff = tr * phi.t()[j];
        for k in 0..3 {
            coeff += (s[k] * x).trace() * phi.m()[(j, k)];
        }
        out += s[j] * coeff;
    }
    out * half
}

pub fn choi(phi: &AffineChannel) -> ChoiMatrix {
    let mut c = Matrix4::zeros();
    for i in 0..2 {
        for j in 0..2 {
            let mut e = Matrix2::zeros();
            e[(i, j)] = C64::new(1.0, 0.0);
            let y = act_on_matrix(phi, &e);
            for a in 0..2 {
                for b in 0..2 {
                    c[(2 * a + i, 2 * b + j)] = y[(a, b)].conj();
                }
            }
        }
    }
    ChoiMatrix(c)
}

fn bell_change() -> Matrix4<C64> {
    let r = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let o = C64::new(0.0, 0.0);
    let l = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    #[rustfmt::skip]
    let m = Matrix4::new(
        l, o, o, l,
        o, l, l, o,
        o, -i, i, o,
        l, o, o, -l,
    );
    m * r
}

/// Choi matrix in the Bell basis, `R C R†`. Requires diagonal `M`; then the
/// diagonal is `(2q0, 2q1, 2q2, 2q3)`.
pub fn choi_rotated(phi: &AffineChannel) -> Result<ChoiMatrix> {
    if !phi.is_diagonal(tol::ALGEBRAIC) {
        return Err(Error::Precondition("choi_rotated needs a diagonal M".into()));
    }
    let r = bell_change();
    Ok(ChoiMatrix(r * choi(phi).0 * r.adjoint()))
}

/// Kraus operators from the Choi eigenvectors with eigenvalue above `rank_tol`.
pub fn kraus_decomposition(phi: &AffineChannel, tol: f64, rank_tol: f64) -> Result<Vec<Matrix2<C64>>> {
    let c = choi(phi);
    let eig = c.0.symmetric_eigen();
    let min = eig.eigenvalues.min();
    if min < -tol {
        return Err(Error::NotCompletelyPositive { min_eigenvalue: min });
    }
    let mut order: Vec<usize> = (0..4).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let ops = order
        .into_iter()
        .filter(|&k| eig.eigenvalues[k] > rank_tol)
        .map(|k| {
            let mu = eig.eigenvalues[k].sqrt();
            let v = eig.eigenvectors.column(k);
            Matrix2::from_fn(|a, i| v[2 * a + i].conj() * mu)
        })
        .collect();
    Ok(ops)
}

/// `Σ A ρ A†`.
pub fn apply_kraus(ops: &[Matrix2<C64>], rho: &Matrix2<C64>) -> Matrix2<C64> {
    ops.iter().fold(Matrix2::zeros(), |acc, a| acc + a * rho * a.adjoint())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    CP,
    NotCP,
    Boundary,
}

impl Verdict {
    /// `margin > tol` → CP, `margin < -tol` → NotCP, otherwise Boundary.
    pub fn from_margin(margin: f64, tol: f64) -> Self {
        if margin > tol {
            Self::CP
        } else if margin < -tol {
            Self::NotCP
        } else {
            Self::Boundary
        }
    }

    pub fn is_cp(self) -> bool {
        self != Self::NotCP
    }
}

/// Intermediate quantities of the complete-positivity test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CPReport {
    pub lambda: [f64; 3],
    pub t: [f64; 3],
    pub q: [f64; 4],
    /// `r = 1 - Σλ² + 2Σλ²u²`; absent for unital input.
    pub r: Option<f64>,
    /// `q = 256 ∏ q_i`.
    pub q_prod: f64,
    /// `r - √(r² - q)`; absent for unital input.
    pub bound: Option<f64>,
    pub t_squared: f64,
    pub a: f64,
    pub b: f64,
    #[serde(rename = "detC")]
    pub det_c: f64,
    pub choi_eigs: [f64; 4],
    /// Signed distance to the CP boundary used for the verdict.
    pub margin: f64,
    pub verdict: Verdict,
    pub unital: bool,
    /// `‖t‖²` sits on the upper root `r + √(r² - q)`, which no CP channel with
    /// `t ≠ 0` attains.
    pub upper_root: bool,
    /// `|√(r² - q) - 2|λ3 - λ1λ2||` when `t1 = t2 = 0`.
    pub special_case_residual: Option<f64>,
}

/// Eigenvalues `q0..q3` of the normalized Choi matrix of `diag(λ)`.
pub fn q_values(l: &Vector3<f64>) -> [f64; 4] {
    [
        (1.0 + l[0] + l[1] + l[2]) / 4.0,
        (1.0 + l[0] - l[1] - l[2]) / 4.0,
        (1.0 - l[0] + l[1] - l[2]) / 4.0,
        (1.0 - l[0] - l[1] + l[2]) / 4.0,
    ]
}

fn r_value(l: &Vector3<f64>, u: &Vector3<f64>) -> f64 {
    let l2 = l.component_mul(l);
    1.0 - l2.sum() + 2.0 * l2.dot(&u.component_mul(u))
}

fn q_prod(q: &[f64; 4]) -> f64 {
    256.0 * q.iter().product::<f64>()
}

/// `r² - q`, expanded as `4 Σ aᵢ² uᵢ² - 4 Σ_{i<j} (λᵢ² - λⱼ²)² uᵢ² uⱼ²` with
/// `a₁ = λ1 - λ2λ3` and cyclic. Exact up to rounding when `u` is an axis.
fn discriminant(l: &Vector3<f64>, u: &Vector3<f64>) -> f64 {
    let a = Vector3::new(l[0] - l[1] * l[2], l[1] - l[0] * l[2], l[2] - l[0] * l[1]);
    let w = u.component_mul(u);
    let l2 = l.component_mul(l);
    let mut d = a.component_mul(&a).dot(&w);
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        d -= (l2[i] - l2[j]).powi(2) * w[i] * w[j];
    }
    4.0 * d
}

/// `r - √(r² - q)` for canonical `λ` and unit translation direction `u`,
/// in the cancellation-free form `q / (r + √(r² - q))` when `r > 0`.
pub fn gfa_bound(l: &Vector3<f64>, u: &Vector3<f64>) -> f64 {
    let r = r_value(l, u);
    let q = q_prod(&q_values(l));
    let s = discriminant(l, u).max(0.0).sqrt();
    if r > 0.0 && r + s > 0.0 {
        q / (r + s)
    } else {
        r - s
    }
}

fn poly_coefficients(l: &Vector3<f64>, t2: f64, r: f64, q: f64) -> (f64, f64, f64) {
    let sl2 = l.norm_squared();
    let a = 3.0 - sl2 - t2;
    let b = 1.0 - sl2 - t2 + 2.0 * l.product();
    let det_c = (t2 * t2 - 2.0 * r * t2 + q) / 16.0;
    (a, b, det_c)
}

/// Unital test: CP iff all `q_i ≥ 0` (equivalently `1 ± λ3 ≥ |λ1 ± λ2|`).
pub fn fac_unital(lambda: &Vector3<f64>, tol: f64) -> CPReport {
    let q = q_values(lambda);
    let margin = q.iter().copied().fold(f64::INFINITY, f64::min);
    let qp = q_prod(&q);
    let (a, b, det_c) = poly_coefficients(lambda, 0.0, 0.0, qp);
    CPReport {
        lambda: (*lambda).into(),
        t: [0.0; 3],
        q,
        r: None,
        q_prod: qp,
        bound: None,
        t_squared: 0.0,
        a,
        b,
        det_c,
        choi_eigs: choi(&AffineChannel::diagonal(*lambda, Vector3::zeros())).eigenvalues(),
        margin,
        verdict: Verdict::from_margin(margin, tol),
        unital: true,
        upper_root: false,
        special_case_residual: None,
    }
}

/// General test in the canonical frame: CP iff all `q_i ≥ 0` and
/// `‖t‖² ≤ r - √(r² - q)`. Unital input is delegated to [`fac_unital`].
pub fn gfa_general(lambda: &Vector3<f64>, t: &Vector3<f64>, tol: f64) -> CPReport {
    let tn = t.norm();
    if tn == 0.0 {
        return fac_unital(lambda, tol);
    }
    let u = t / tn;
    let t2 = tn * tn;
    let q = q_values(lambda);
    let qp = q_prod(&q);
    let r = r_value(lambda, &u);
    let disc = discriminant(lambda, &u).max(0.0).sqrt();
    let bound = gfa_bound(lambda, &u);
    let (a, b, det_c) = poly_coefficients(lambda, t2, r, qp);
    let qmin = q.iter().copied().fold(f64::INFINITY, f64::min);
    let margin = qmin.min(bound - t2);
    let upper_root = disc > tol && (t2 - (r + disc)).abs() <= tol;
    let special_case_residual = (t[0].abs() <= 1e-15 * tn && t[1].abs() <= 1e-15 * tn)
        .then(|| (disc - 2.0 * (lambda[2] - lambda[0] * lambda[1]).abs()).abs());
    CPReport {
        lambda: (*lambda).into(),
        t: (*t).into(),
        q,
        r: Some(r),
        q_prod: qp,
        bound: Some(bound),
        t_squared: t2,
        a,
        b,
        det_c,
        choi_eigs: choi(&AffineChannel::diagonal(*lambda, *t)).eigenvalues(),
        margin,
        verdict: Verdict::from_margin(margin, tol),
        unital: false,
        upper_root,
        special_case_residual,
    }
}

/// Closed-form report for an arbitrary channel, cross-checked against the
/// Choi spectrum. A disagreement outside `10·tol` is an internal error.
pub fn verify(phi: &AffineChannel, tol: f64) -> Result<CPReport> {
    let c = to_canonical(phi, AxisOrdering::MagnitudeDescending);
    let mut report =
        if phi.t().norm() == 0.0 { fac_unital(&c.lambda, tol) } else { gfa_general(&c.lambda, &c.t_canonical, tol) };
    report.choi_eigs = choi(phi).eigenvalues();
    let eig_min = report.choi_eigs[0];
    let band = 10.0 * tol;
    if (report.margin > band && eig_min < -band) || (report.margin < -band && eig_min > band) {
        return Err(Error::Consistency(format!(
            "closed-form margin {:e} disagrees with minimum Choi eigenvalue {:e}",
            report.margin, eig_min
        )));
    }
    Ok(report)
}

pub fn is_cp(phi: &AffineChannel, tol: f64) -> Result<Verdict> {
    verify(phi, tol).map(|r| r.verdict)
}

/// `x⁴ - 2x³ + (a/2)x² - (b/2)x + det C`, the characteristic polynomial of
/// the trace-2 Choi matrix.
pub fn char_poly(report: &CPReport, x: f64) -> f64 {
    (((x - 2.0) * x + 0.5 * report.a) * x - 0.5 * report.b) * x + report.det_c
}

/// Outcome of comparing the closed-form verdict with the Choi spectrum.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SweepStats {
    pub agree: usize,
    /// At least one side inside the `±tol` band.
    pub band: usize,
    pub hard_disagreements: usize,
}

/// Compare both verdicts on `n` diagonal channels with `λ ∈ [-1,1]³` and `t`
/// uniform in the ball of radius 1.2.
pub fn equivalence_sweep(seed: u64, n: usize, tol: f64) -> SweepStats {
    equivalence_counts(par::map_range(n, |i| equivalence_trial(seed, i, tol)))
}

/// Single-threaded [`equivalence_sweep`].
pub fn equivalence_sweep_sequential(seed: u64, n: usize, tol: f64) -> SweepStats {
    equivalence_counts(par::map_range_sequential(n, |i| equivalence_trial(seed, i, tol)))
}

fn equivalence_trial(seed: u64, i: usize, tol: f64) -> (Verdict, Verdict) {
    let mut rng = sample::indexed_rng(seed, i);
    let lambda = Vector3::from_fn(|_, _| rng.gen_range(-1.0..=1.0));
    let t = loop {
        let x = Vector3::from_fn(|_, _| rng.gen_range(-1.2..=1.2));
        if x.norm() <= 1.2 {
            break x;
        }
    };
    let closed = gfa_general(&lambda, &t, tol);
    (closed.verdict, Verdict::from_margin(closed.choi_eigs[0], tol))
}

fn equivalence_counts(pairs: Vec<(Verdict, Verdict)>) -> SweepStats {
    let mut s = SweepStats::default();
    for (a, b) in pairs {
        match (a, b) {
            (Verdict::Boundary, _) | (_, Verdict::Boundary) => s.band += 1,
            (x, y) if x == y => s.agree += 1,
            _ => s.hard_disagreements += 1,
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{make_generator, BlochVector, GeneratorSpec};
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn identity_choi_is_twice_the_bell_projector() {
        let ch = choi(&AffineChannel::identity());
        let one = c(1.0, 0.0);
        for (i, j) in [(0, 0), (0, 3), (3, 0), (3, 3)] {
            assert_relative_eq!(ch.matrix()[(i, j)].re, one.re, epsilon = 1e-15);
        }
        assert_relative_eq!(ch.matrix().trace().re, 2.0, epsilon = 1e-15);
        let e = ch.eigenvalues();
        assert_relative_eq!(e[3], 2.0, epsilon = 1e-14);
        assert!(e[..3].iter().all(|x| x.abs() < 1e-14));
    }

    #[test]
    fn discriminant_matches_direct_form() {
        let l = Vector3::new(0.3, -0.7, 0.45);
        let u = Vector3::new(0.2, -0.5, 0.8).normalize();
        let r = r_value(&l, &u);
        let q = q_prod(&q_values(&l));
        assert_relative_eq!(discriminant(&l, &u), r * r - q, epsilon = 1e-14);
        // on an axis nothing cancels
        let l = Vector3::new(0.5, 0.4, 0.2 + 1e-9);
        let d = discriminant(&l, &Vector3::z());
        assert_relative_eq!(d.sqrt(), 2e-9, max_relative = 1e-6);
    }

    #[test]
    fn diagonal_choi_entries() {
        // λ = (1,1,1): (1+λ3)/2 on the corners of the outer block, (λ1+λ2)/2 across
        let ch = choi(&AffineChannel::diagonal(Vector3::new(1.0, 1.0, 1.0), Vector3::zeros()));
        assert_relative_eq!(ch.matrix()[(0, 0)].re, 1.0, epsilon = 1e-15);
        assert_relative_eq!(ch.matrix()[(0, 3)].re, 1.0, epsilon = 1e-15);
        assert_relative_eq!(ch.matrix()[(1, 1)].re, 0.0, epsilon = 1e-15);

        let ch = choi(&AffineChannel::diagonal(Vector3::new(0.6, 0.4, 0.2), Vector3::zeros()));
        let e = ch.eigenvalues();
        for (x, y) in e.iter().zip([0.1, 0.3, 0.5, 1.1]) {
            assert_relative_eq!(*x, y, epsilon = 1e-14);
        }
    }

    #[test]
    fn rotated_choi_pattern() {
        let l = Vector3::new(0.6, 0.4, 0.2);
        let q = q_values(&l);
        let rc = choi_rotated(&AffineChannel::diagonal(l, Vector3::zeros())).unwrap();
        for k in 0..4 {
            assert_relative_eq!(rc.matrix()[(k, k)].re, 2.0 * q[k], epsilon = 1e-14);
        }
        let rc =
            choi_rotated(&AffineChannel::diagonal(Vector3::new(0.5, 0.5, 0.25), Vector3::new(0.0, 0.0, 0.75))).unwrap();
        assert_relative_eq!(rc.matrix()[(0, 3)].re, 0.375, epsilon = 1e-15);
        assert_relative_eq!(rc.matrix()[(0, 3)].im, 0.0, epsilon = 1e-15);

        // full pattern with a generic translation
        let t = Vector3::new(0.1, -0.2, 0.15);
        let l = Vector3::new(0.3, -0.2, 0.4);
        let q = q_values(&l);
        let rc = choi_rotated(&AffineChannel::diagonal(l, t)).unwrap();
        let h = |x: f64| c(0.5 * x, 0.0);
        let hi = |x: f64| c(0.0, 0.5 * x);
        #[rustfmt::skip]
        let expected = Matrix4::new(
            c(2.0 * q[0], 0.0), h(t[0]), h(t[1]), h(t[2]),
            h(t[0]), c(2.0 * q[1], 0.0), hi(t[2]), -hi(t[1]),
            h(t[1]), -hi(t[2]), c(2.0 * q[2], 0.0), hi(t[0]),
            h(t[2]), hi(t[1]), -hi(t[0]), c(2.0 * q[3], 0.0),
        );
        assert!((rc.matrix() - expected).norm() < 1e-14);

        let off =
            AffineChannel::new(nalgebra::Matrix3::new(0.5, 0.1, 0.0, 0.0, 0.5, 0.0, 0.0, 0.0, 0.5), Vector3::zeros())
                .unwrap();
        assert!(choi_rotated(&off).is_err());
    }

    fn frame() -> Vec<BlochVector> {
        vec![
            BlochVector::new(1.0, 0.0, 0.0),
            BlochVector::new(-1.0, 0.0, 0.0),
            BlochVector::new(0.0, 1.0, 0.0),
            BlochVector::new(0.0, -1.0, 0.0),
            BlochVector::new(0.0, 0.0, 1.0),
            BlochVector::new(0.0, 0.0, -1.0),
        ]
    }

    fn check_kraus(phi: &AffineChannel) -> Vec<Matrix2<C64>> {
        let ops = kraus_decomposition(phi, 1e-10, tol::RANK).unwrap();
        let sum = ops.iter().fold(Matrix2::zeros(), |acc, a| acc + a.adjoint() * a);
        assert!((sum - Matrix2::identity()).norm() < 1e-10);
        for r in frame() {
            let rho = crate::channel::density_from_bloch(&r, 1e-12).unwrap();
            let out = apply_kraus(&ops, rho.matrix());
            let want = crate::channel::density_from_bloch(&phi.apply(&r), 1e-9).unwrap();
            assert!((out - want.matrix()).norm() < 1e-10);
        }
        ops
    }

    #[test]
    fn kraus_examples() {
        let ops = check_kraus(&make_generator(&GeneratorSpec::PhaseFlip { t: 0.3 }).unwrap());
        assert_eq!(ops.len(), 2);
        // {√0.7 I, √0.3 σ_z} up to phases
        let w: Vec<f64> = ops.iter().map(|a| a.norm_squared()).collect();
        assert_relative_eq!(w[0], 1.4, epsilon = 1e-12);
        assert_relative_eq!(w[1], 0.6, epsilon = 1e-12);
        assert!(ops[1][(0, 1)].norm() < 1e-12 && (ops[1][(0, 0)] + ops[1][(1, 1)]).norm() < 1e-12);

        let ops = check_kraus(&AffineChannel::identity());
        assert_eq!(ops.len(), 1);
        assert!((ops[0] * ops[0][(0, 0)].conj() - Matrix2::identity()).norm() < 1e-12);

        let e =
            make_generator(&GeneratorSpec::Extremal { u: std::f64::consts::FRAC_PI_4, v: std::f64::consts::FRAC_PI_3 })
                .unwrap();
        assert_eq!(check_kraus(&e).len(), 2);

        let bad = AffineChannel::diagonal(Vector3::new(-1.0, -1.0, -1.0), Vector3::zeros());
        assert!(matches!(kraus_decomposition(&bad, 1e-10, 1e-9), Err(Error::NotCompletelyPositive { .. })));
    }

    #[test]
    fn fac_examples() {
        let r = fac_unital(&Vector3::new(1.0, 1.0, 1.0), 1e-10);
        assert_eq!(r.q, [1.0, 0.0, 0.0, 0.0]);
        assert_eq!(r.verdict, Verdict::Boundary);

        let r = fac_unital(&Vector3::new(-1.0, -1.0, -1.0), 1e-10);
        assert_relative_eq!(r.q[0], -0.5, epsilon = 1e-15);
        assert_eq!(r.verdict, Verdict::NotCP);

        let third = 1.0 / 3.0;
        let r = fac_unital(&Vector3::new(-third, -third, -third), 1e-10);
        assert!(r.q[0].abs() < 1e-16);
        for k in 1..4 {
            assert_relative_eq!(r.q[k], third, epsilon = 1e-15);
        }
        assert!(r.verdict.is_cp());
    }

    #[test]
    fn fac_matches_absolute_value_form() {
        let mut rng = sample::indexed_rng(3, 0);
        for _ in 0..2000 {
            let l: Vector3<f64> = Vector3::from_fn(|_, _| rng.gen_range(-1.0..=1.0));
            let abs_form = 1.0 + l[2] >= (l[0] + l[1]).abs() && 1.0 - l[2] >= (l[0] - l[1]).abs();
            assert_eq!(abs_form, fac_unital(&l, 0.0).margin >= 0.0);
        }
    }

    #[test]
    fn gfa_examples() {
        let r = gfa_general(&Vector3::new(0.5, 0.5, 0.25), &Vector3::new(0.0, 0.0, 0.75), 1e-10);
        assert_relative_eq!(r.r.unwrap(), 0.5625, epsilon = 1e-15);
        assert_relative_eq!(r.q_prod, 0.316_406_25, epsilon = 1e-15);
        assert_relative_eq!(r.bound.unwrap(), 0.5625, epsilon = 1e-15);
        assert_eq!(r.verdict, Verdict::Boundary);
        assert!(r.choi_eigs[0].abs() < 1e-12);

        let r = gfa_general(&Vector3::new(0.6, 0.4, 0.2), &Vector3::new(0.0, 0.0, 0.67), 1e-10);
        assert_relative_eq!(r.r.unwrap(), 0.52, epsilon = 1e-15);
        assert_relative_eq!(r.q_prod, 0.264, epsilon = 1e-14);
        assert_relative_eq!(r.bound.unwrap(), 0.44, epsilon = 1e-14);
        assert!(r.special_case_residual.unwrap() < 1e-14);
        assert_eq!(r.verdict, Verdict::NotCP);
        assert!(r.choi_eigs[0] < 0.0);

        let r = gfa_general(&Vector3::zeros(), &Vector3::new(0.0, 0.0, 0.5), 1e-10);
        assert_eq!(r.q, [0.25; 4]);
        assert_relative_eq!(r.r.unwrap(), 1.0);
        assert_relative_eq!(r.bound.unwrap(), 1.0);
        assert_eq!(r.verdict, Verdict::CP);
    }

    #[test]
    fn upper_root_is_flagged() {
        // r² - q > 0 so the two roots differ; sit on the upper one
        let l = Vector3::new(0.6, 0.4, 0.2);
        let u = Vector3::new(0.0, 0.0, 1.0);
        let upper: f64 = 0.52 + 0.08;
        let r = gfa_general(&l, &(u * upper.sqrt()), 1e-10);
        assert!(r.upper_root);
        assert_eq!(r.verdict, Verdict::NotCP);
    }

    #[test]
    fn char_poly_vanishes_on_spectrum() {
        let mut rng = sample::indexed_rng(8, 0);
        for _ in 0..500 {
            let l = Vector3::from_fn(|_, _| rng.gen_range(-1.0..=1.0));
            let t = Vector3::from_fn(|_, _| rng.gen_range(-0.7..=0.7));
            let r = gfa_general(&l, &t, 1e-10);
            for x in r.choi_eigs {
                assert!(char_poly(&r, x).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn is_cp_examples() {
        let u = make_generator(&GeneratorSpec::Unitary { axis: [1.0, 2.0, -0.5], half_angle: 0.8 }).unwrap();
        assert_eq!(is_cp(&u, 1e-10).unwrap(), Verdict::Boundary);
        let phi = AffineChannel::diagonal(Vector3::new(0.9, 0.9, 0.9), Vector3::new(0.3, 0.0, 0.0));
        let report = verify(&phi, 1e-10).unwrap();
        assert_eq!(report.verdict, Verdict::from_margin(report.choi_eigs[0], 1e-10));
        assert_eq!(report.verdict, Verdict::NotCP);
    }

    #[test]
    fn small_sweep_has_no_hard_disagreements() {
        let s = equivalence_sweep(1, 5000, 1e-10);
        assert_eq!(s.hard_disagreements, 0);
        assert_eq!(s, equivalence_sweep_sequential(1, 5000, 1e-10));
    }
}
