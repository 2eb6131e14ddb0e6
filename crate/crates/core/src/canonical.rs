//! Signed singular value normal form `M = R1 · diag(λ) · R2` with `R1, R2 ∈ SO(3)`.

use nalgebra::{DMatrix, Matrix2, Matrix3, Vector3};

use crate::channel::{AffineChannel, GeneratorSpec};
use crate::error::{Error, Result};
use crate::rotation::{self, frame_with_third_axis, inverse_permutation, permutation_rotation, rot_z, sign_flip};

/// Relative gap below which two singular values are treated as equal.
const DEGENERATE: f64 = 1e-12;

/// Axis order of the canonical λ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AxisOrdering {
    /// `|λ1| ≥ |λ2| ≥ |λ3|`.
    #[default]
    MagnitudeDescending,
    /// `λ[i] = λ_desc[p[i]]`.
    Permuted([usize; 3]),
    /// The extremal-channel layout: translation along the third axis,
    /// `λ3 = λ1 λ2`, `|λ1| ≥ |λ2|`, signs normalized when possible.
    Extremal,
}

/// `Φ = Φ_{R1} ∘ Φ_Λ ∘ Φ_{R2}` with `Φ_Λ(r) = diag(λ) r + t_canonical`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CanonicalChannel {
    pub lambda: Vector3<f64>,
    /// Translation in the rotated frame, `R1ᵀ t`.
    pub t_canonical: Vector3<f64>,
    /// Applied last (`R_{U1}`).
    pub post_rotation: Matrix3<f64>,
    /// Applied first (`R_{U2}`).
    pub pre_rotation: Matrix3<f64>,
}

impl CanonicalChannel {
    /// The diagonal core `diag(λ) r + t_canonical`.
    pub fn diagonal_channel(&self) -> AffineChannel {
        AffineChannel::diagonal(self.lambda, self.t_canonical)
    }

    pub fn recompose(&self) -> AffineChannel {
        let m = self.post_rotation * Matrix3::from_diagonal(&self.lambda) * self.pre_rotation;
        AffineChannel::from_parts(m, self.post_rotation * self.t_canonical)
    }

    /// Reorder the axes so that `λ_new[sigma[j]] = λ[j]`.
    fn permute(&self, sigma: [usize; 3]) -> Self {
        let p = permutation_rotation(sigma);
        let mut lambda = Vector3::zeros();
        let mut t = Vector3::zeros();
        for j in 0..3 {
            lambda[sigma[j]] = self.lambda[j];
        }
        // P diag(λ) Pᵀ = diag(λ_new) up to squared signs; t moves with P
        let tp = p * self.t_canonical;
        t.copy_from(&tp);
        Self {
            lambda,
            t_canonical: t,
            post_rotation: self.post_rotation * p.transpose(),
            pre_rotation: p * self.pre_rotation,
        }
    }

    /// Compose a diagonal sign flip on both sides: `Φ = F_post ∘ Φ' ∘ F_pre`.
    fn flipped(&self, pre: Option<[usize; 2]>, post: Option<[usize; 2]>) -> Self {
        let fpre = pre.map_or_else(Matrix3::identity, |[i, j]| sign_flip(i, j));
        let fpost = post.map_or_else(Matrix3::identity, |[i, j]| sign_flip(i, j));
        let lambda = Vector3::from_fn(|k, _| fpost[(k, k)] * self.lambda[k] * fpre[(k, k)] + 0.0);
        Self {
            lambda,
            t_canonical: fpost * self.t_canonical,
            post_rotation: self.post_rotation * fpost,
            pre_rotation: fpre * self.pre_rotation,
        }
    }
}

/// `M = R1 · diag(λ) · R2` with proper rotations.
///
/// Singular values come out in descending magnitude. If the factors have
/// opposite orientation the sign is carried by the smallest axis. Repeated
/// singular values are resolved by taking the rotations closest to the
/// identity, so diagonal input gives `R1 = R2 = I` up to the sign flip.
pub fn signed_svd(m: &Matrix3<f64>) -> (Matrix3<f64>, Vector3<f64>, Matrix3<f64>) {
    let (u0, sv, vt0) = rotation::svd3(m);
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));

    let mut u = Matrix3::from_columns(&[u0.column(idx[0]), u0.column(idx[1]), u0.column(idx[2])]);
    let mut v =
        Matrix3::from_columns(&[vt0.row(idx[0]).transpose(), vt0.row(idx[1]).transpose(), vt0.row(idx[2]).transpose()]);
    let mut s = Vector3::new(sv[idx[0]], sv[idx[1]], sv[idx[2]]);

    // pair signs: lean both factors toward the identity
    for k in 0..3 {
        let lean = u[(k, k)] + v[(k, k)];
        let flip = if lean.abs() > 1e-12 { lean < 0.0 } else { v[(k, k)] < 0.0 };
        if flip {
            u.column_mut(k).neg_mut();
            v.column_mut(k).neg_mut();
        }
    }
    if v.determinant() < 0.0 {
        u.column_mut(2).neg_mut();
        v.column_mut(2).neg_mut();
    }
    if u.determinant() < 0.0 {
        u.column_mut(2).neg_mut();
        s[2] = -s[2] + 0.0;
    }

    let scale = s[0].abs().max(1.0);
    let mut start = 0;
    while start < 3 {
        let mut end = start + 1;
        while end < 3 && (s[end] - s[start]).abs() <= DEGENERATE * scale {
            end += 1;
        }
        if end - start >= 2 {
            align_group(&mut u, &mut v, start, end, s[start].abs() <= DEGENERATE * scale);
        }
        start = end;
    }
    (u, s, v.transpose())
}

/// Rotate the singular vectors of one degenerate block toward the identity.
/// `M = U Λ Vᵀ` is unchanged by `U → U G`, `V → V G` on the block; for a
/// zero block `U` and `V` can be rotated independently.
fn align_group(u: &mut Matrix3<f64>, v: &mut Matrix3<f64>, start: usize, end: usize, zero: bool) {
    let k = end - start;
    let block = |a: &Matrix3<f64>| DMatrix::from_fn(k, k, |i, j| a[(start + i, start + j)]);
    let apply = |a: &mut Matrix3<f64>, g: &DMatrix<f64>| {
        let cols: Vec<Vector3<f64>> =
            (0..k).map(|j| (0..k).fold(Vector3::zeros(), |acc, i| acc + a.column(start + i) * g[(i, j)])).collect();
        for (j, c) in cols.into_iter().enumerate() {
            a.set_column(start + j, &c);
        }
    };
    // tr(U G) and tr(V G) are linear in G with coefficients given by the
    // transposed diagonal blocks
    if zero {
        let gu = rotation::kabsch(&block(u).transpose());
        let gv = rotation::kabsch(&block(v).transpose());
        apply(u, &gu);
        apply(v, &gv);
    } else {
        let g = rotation::kabsch(&(block(u).transpose() + block(v).transpose()));
        apply(u, &g);
        apply(v, &g);
    }
}

/// Normal form of `phi` in the requested axis order.
pub fn to_canonical(phi: &AffineChannel, ordering: AxisOrdering) -> CanonicalChannel {
    let (r1, lambda, r2) = signed_svd(phi.m());
    let base = CanonicalChannel { lambda, t_canonical: r1.transpose() * phi.t(), post_rotation: r1, pre_rotation: r2 };
    match ordering {
        AxisOrdering::MagnitudeDescending => base,
        AxisOrdering::Permuted(p) => base.permute(inverse_permutation(p)),
        AxisOrdering::Extremal => extremal_frame(phi).map(|(c, _)| c).unwrap_or_else(|| extremal_axis_choice(&base)),
    }
}

/// Of the three axis assignments pick the one that best fits `|λ3| = |λ1 λ2|`
/// and `t3² = (1-λ1²)(1-λ2²)`, then normalize signs if possible.
fn extremal_axis_choice(base: &CanonicalChannel) -> CanonicalChannel {
    let misfit = |c: &CanonicalChannel| {
        let l = c.lambda;
        let t = c.t_canonical;
        (l[2].abs() - (l[0] * l[1]).abs()).abs()
            + (t[2] * t[2] - (1.0 - l[0] * l[0]) * (1.0 - l[1] * l[1])).abs()
            + t[0].abs()
            + t[1].abs()
    };
    let candidates = [[0, 1, 2], [0, 2, 1], [1, 2, 0]].map(|p| base.permute(inverse_permutation(p)));
    let best = candidates.iter().min_by(|a, b| misfit(a).total_cmp(&misfit(b))).copied().expect("three candidates");
    normalize_extremal_signs(&best).map(|(c, _, _)| c).unwrap_or(best)
}

/// Extremal layout computed directly from the translation direction.
///
/// For an extremal channel `t = t3 R1 e3` and `Mᵀ t̂ = λ3 R2ᵀ e3`, so frames
/// built on those two directions block-diagonalize `M`; the remaining 2×2
/// block is handled by a rotation-only signed SVD. Returns the canonical form
/// (nonnegative `λ3` and `t3`) and the reconstruction residual, or `None` when
/// `t = 0`.
pub fn extremal_frame(phi: &AffineChannel) -> Option<(CanonicalChannel, f64)> {
    let m = phi.m();
    let tn = phi.t().norm();
    if tn == 0.0 {
        return None;
    }
    let p = frame_with_third_axis(&(phi.t() / tn));
    let w = m.transpose() * p.column(2);
    let q = if w.norm() > 1e-12 * m.norm().max(1.0) {
        frame_with_third_axis(&w)
    } else {
        // λ3 = 0: any null direction of M works as the third axis
        let (_, sv, vt) = rotation::svd3(m);
        let k = sv.imin();
        frame_with_third_axis(&vt.row(k).transpose())
    };
    let k = p.transpose() * m * q;
    let (phi_angle, s1, s2, theta) =
        rotation::signed_svd_2x2(&Matrix2::new(k[(0, 0)], k[(0, 1)], k[(1, 0)], k[(1, 1)]));
    // rounding noise around zero would otherwise carry a sign no flip can fix
    let snap = |x: f64| if x.abs() <= 1e-12 { 0.0 } else { x };
    let canon = CanonicalChannel {
        lambda: Vector3::new(s1, snap(s2), snap(k[(2, 2)])),
        t_canonical: Vector3::new(0.0, 0.0, tn),
        post_rotation: p * rot_z(phi_angle),
        pre_rotation: rot_z(theta) * q.transpose(),
    };
    let residual = canon.recompose().distance(phi);
    Some((canon, residual))
}

/// Sign flips applied after and before the diagonal.
type FlipPair = (Option<[usize; 2]>, Option<[usize; 2]>);

fn flip_candidates() -> Vec<FlipPair> {
    let flips = [[0, 1], [0, 2], [1, 2]];
    let mut out = vec![(None, None)];
    // (i) t3 ≥ 0 with two negative λ: z-flip after, or a flip before that keeps t3
    out.push((None, Some([0, 1])));
    out.push((Some([0, 2]), None));
    out.push((Some([1, 2]), None));
    // (ii) t3 < 0, λ3 and one of λ1, λ2 negative: flip after about x or y
    out.push((None, Some([1, 2])));
    out.push((None, Some([0, 2])));
    // (iii) a flip before reduces to (ii)
    for pre in flips {
        for post in [[1, 2], [0, 2]] {
            out.push((Some(pre), Some(post)));
        }
    }
    out
}

/// Bring an extremal-shaped canonical channel to the form with all `λ_j ≥ 0`
/// and `t3 ≥ 0`, returning `(c', pre, post)` with `c = post ∘ c' ∘ pre`.
pub fn normalize_extremal_signs(c: &CanonicalChannel) -> Result<(CanonicalChannel, GeneratorSpec, GeneratorSpec)> {
    let t = c.t_canonical;
    let scale = t.norm().max(1.0);
    if t[0].abs() > 1e-9 * scale || t[1].abs() > 1e-9 * scale {
        return Err(Error::Classification("translation is not along the third canonical axis".into()));
    }
    let ok = |x: &CanonicalChannel| x.lambda.iter().all(|&l| l >= 0.0) && x.t_canonical[2] >= 0.0;
    for (pre, post) in flip_candidates() {
        let out = c.flipped(pre, post);
        if ok(&out) {
            let spec = |f: Option<[usize; 2]>| match f {
                Some(axes) => GeneratorSpec::SignFlip { axes },
                None => GeneratorSpec::Unitary { axis: [0.0, 0.0, 1.0], half_angle: 0.0 },
            };
            return Ok((out, spec(pre), spec(post)));
        }
    }
    Err(Error::Classification(format!(
        "signs of λ = {:?}, t3 = {} cannot be normalized by axis flips",
        c.lambda.as_slice(),
        t[2]
    )))
}
