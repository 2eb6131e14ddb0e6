//! SO(3) helpers: Rodrigues construction, axis-angle extraction, signed
//! permutations, frame alignment and orthogonal Procrustes.

use nalgebra::{DMatrix, DVector, Matrix2, Matrix3, Rotation3, Unit, UnitQuaternion, Vector3};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Rotation by `angle` about `axis` (need not be normalized, must be nonzero).
pub fn rodrigues(axis: &Vector3<f64>, angle: f64) -> Matrix3<f64> {
    let n = axis.normalize();
    let k = n.cross_matrix();
    let (s, c) = angle.sin_cos();
    Matrix3::identity() + k * s + k * k * (1.0 - c)
}

/// Axis and angle (in `[0, π]`) of a proper rotation.
///
/// Goes through the unit quaternion so that angles near π stay accurate.
/// For the identity the axis is `e_z` and the angle is 0.
pub fn axis_angle(r: &Matrix3<f64>) -> (Vector3<f64>, f64) {
    let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(*r));
    let w = q.w;
    let v = q.imag();
    let s = v.norm();
    if s == 0.0 {
        return (Vector3::z(), 0.0);
    }
    let (axis, w) = if w < 0.0 { (-v / s, -w) } else { (v / s, w) };
    (axis, 2.0 * s.atan2(w))
}

/// True if `r` is orthogonal with determinant +1 within `tol`.
pub fn is_rotation(r: &Matrix3<f64>, tol: f64) -> bool {
    (r.transpose() * r - Matrix3::identity()).abs().max() <= tol && (r.determinant() - 1.0).abs() <= tol
}

/// Haar-random rotation from a normalized Gaussian quaternion.
pub fn random_rotation<R: Rng + ?Sized>(rng: &mut R) -> Matrix3<f64> {
    let mut g = [0.0f64; 4];
    for x in &mut g {
        *x = StandardNormal.sample(rng);
    }
    let q = nalgebra::Quaternion::new(g[0], g[1], g[2], g[3]);
    UnitQuaternion::from_quaternion(q).to_rotation_matrix().into_inner()
}

/// Proper rotation carrying `e_j` to `e_{sigma[j]}`.
///
/// For odd permutations the column of `e_2` is negated so the matrix stays
/// in SO(3); conjugating a diagonal matrix with it still only permutes the
/// diagonal.
pub fn permutation_rotation(sigma: [usize; 3]) -> Matrix3<f64> {
    let mut p = Matrix3::zeros();
    for (j, &i) in sigma.iter().enumerate() {
        p[(i, j)] = 1.0;
    }
    if p.determinant() < 0.0 {
        p[(sigma[2], 2)] = -1.0;
    }
    p
}

pub fn is_permutation(sigma: [usize; 3]) -> bool {
    let mut seen = [false; 3];
    for &i in &sigma {
        if i > 2 || seen[i] {
            return false;
        }
        seen[i] = true;
    }
    true
}

pub fn inverse_permutation(sigma: [usize; 3]) -> [usize; 3] {
    let mut inv = [0; 3];
    for (j, &i) in sigma.iter().enumerate() {
        inv[i] = j;
    }
    inv
}

/// Diagonal π-rotation that negates axes `i` and `j`.
pub fn sign_flip(i: usize, j: usize) -> Matrix3<f64> {
    let mut d = Matrix3::identity();
    d[(i, i)] = -1.0;
    d[(j, j)] = -1.0;
    d
}

/// Rotation about `e_z` embedded in 3D.
pub fn rot_z(angle: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// A right-handed orthonormal frame whose third column is `dir` (unit).
pub fn frame_with_third_axis(dir: &Vector3<f64>) -> Matrix3<f64> {
    let w = dir.normalize();
    // pick the coordinate axis least aligned with w
    let a = if w.x.abs() <= w.y.abs() && w.x.abs() <= w.z.abs() {
        Vector3::x()
    } else if w.y.abs() <= w.z.abs() {
        Vector3::y()
    } else {
        Vector3::z()
    };
    let e1 = (a - w * w.dot(&a)).normalize();
    let e2 = w.cross(&e1);
    Matrix3::from_columns(&[e1, e2, w])
}

/// Rotation `Q` with `Q from = to` for unit vectors, minimal angle.
pub fn rotation_between(from: &Vector3<f64>, to: &Vector3<f64>) -> Matrix3<f64> {
    let f = Unit::new_normalize(*from);
    let t = Unit::new_normalize(*to);
    match UnitQuaternion::rotation_between_axis(&f, &t) {
        Some(q) => q.to_rotation_matrix().into_inner(),
        None => {
            // antiparallel: half turn about any axis perpendicular to `from`
            let p = frame_with_third_axis(&f).column(0).into_owned();
            rodrigues(&p, std::f64::consts::PI)
        }
    }
}

/// `A = U diag(s) Vᵀ` for a small square matrix by one-sided Jacobi
/// rotations, with `s` sorted descending. nalgebra's SVD loses accuracy on
/// rank-deficient input (errors up to 1e-8 for 3×3, worse for dynamic
/// sizes); Jacobi stays at rounding level.
pub fn jacobi_svd(a: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>) {
    let n = a.ncols();
    let mut w = a.clone();
    let mut v = DMatrix::identity(n, n);
    for _ in 0..60 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = w.column(p).norm_squared();
                let beta = w.column(q).norm_squared();
                let gamma = w.column(p).dot(&w.column(q));
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let sn = c * t;
                for m in [&mut w, &mut v] {
                    for i in 0..m.nrows() {
                        let (x, y) = (m[(i, p)], m[(i, q)]);
                        m[(i, p)] = c * x - sn * y;
                        m[(i, q)] = sn * x + c * y;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = (0..n).map(|k| w.column(k).norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]));
    let top = norms[order[0]];
    let mut u = DMatrix::zeros(a.nrows(), n);
    let mut vs = DMatrix::zeros(n, n);
    let mut sv = DVector::zeros(n);
    for (j, &k) in order.iter().enumerate() {
        vs.set_column(j, &v.column(k));
        sv[j] = norms[k];
        // Gram-Schmidt against earlier columns, a unit direction for null columns
        let mut col = if norms[k] > 0.0 && norms[k] > 1e-3 * f64::EPSILON * top {
            w.column(k) / norms[k]
        } else {
            DVector::zeros(a.nrows())
        };
        for _ in 0..2 {
            for i in 0..j {
                let d = u.column(i).dot(&col);
                col -= u.column(i) * d;
            }
        }
        if col.norm() < 0.5 {
            col = (0..a.nrows())
                .map(|e| {
                    let mut c = DVector::from_fn(a.nrows(), |i, _| if i == e { 1.0 } else { 0.0 });
                    for _ in 0..2 {
                        for i in 0..j {
                            let d = u.column(i).dot(&c);
                            c -= u.column(i) * d;
                        }
                    }
                    c
                })
                .reduce(|best, c| if c.norm() > best.norm() + 1e-12 { c } else { best })
                .expect("nonempty basis");
        }
        let nc = col.norm();
        u.set_column(j, &(col / nc));
    }
    (u, sv, vs)
}

/// [`jacobi_svd`] of a 3×3 matrix: `(U, s, Vᵀ)`.
pub fn svd3(m: &Matrix3<f64>) -> (Matrix3<f64>, Vector3<f64>, Matrix3<f64>) {
    let (u, s, v) = jacobi_svd(&DMatrix::from_column_slice(3, 3, m.as_slice()));
    (
        Matrix3::from_column_slice(u.as_slice()),
        Vector3::from_column_slice(s.as_slice()),
        Matrix3::from_column_slice(v.as_slice()).transpose(),
    )
}

/// Proper orthogonal `Q` maximizing `tr(Qᵀ X)` (Kabsch).
pub fn kabsch(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    let (u, _, v) = jacobi_svd(x);
    let vt = v.transpose();
    let mut d = DMatrix::identity(n, n);
    if (&u * &vt).determinant() < 0.0 {
        // singular values are sorted descending; flip the weakest direction
        d[(n - 1, n - 1)] = -1.0;
    }
    u * d * vt
}

/// Closed-form signed SVD of a real 2×2 matrix using rotations only:
/// `b = R(phi) · diag(s1, s2) · R(theta)` with `s1 ≥ |s2|`.
pub fn signed_svd_2x2(b: &Matrix2<f64>) -> (f64, f64, f64, f64) {
    let e = 0.5 * (b[(0, 0)] + b[(1, 1)]);
    let f = 0.5 * (b[(0, 0)] - b[(1, 1)]);
    let g = 0.5 * (b[(1, 0)] + b[(0, 1)]);
    let h = 0.5 * (b[(1, 0)] - b[(0, 1)]);
    let q = e.hypot(h);
    let r = f.hypot(g);
    let a1 = g.atan2(f);
    let a2 = h.atan2(e);
    let theta = 0.5 * (a2 - a1);
    let phi = 0.5 * (a2 + a1);
    (phi, q + r, q - r, theta)
}

pub fn rot2(angle: f64) -> Matrix2<f64> {
    let (s, c) = angle.sin_cos();
    Matrix2::new(c, -s, s, c)
}
