//! Qubit channels in affine Bloch-ball form `r ↦ M r + t`.
//!
//! A channel is stored as the pair `(M, t)`; the 4×4 transfer matrix
//! `T = [[1, 0], [t, M]]` is only materialized for I/O and error metrics.

use nalgebra::{Complex, Matrix2, Matrix3, Matrix4, Vector3};
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};
use crate::rotation;
use crate::tol;

pub type C64 = Complex<f64>;

/// Bloch coordinates `(r1, r2, r3)` of a qubit state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochVector(Vector3<f64>);

impl BlochVector {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self(Vector3::new(x, y, z))
    }

    /// Rejects non-finite components.
    pub fn try_from_vec(v: Vector3<f64>) -> Result<Self> {
        if v.iter().all(|x| x.is_finite()) {
            Ok(Self(v))
        } else {
            Err(Error::InvalidParameter("Bloch vector has non-finite components".into()))
        }
    }

    /// Rejects vectors outside the Bloch ball by more than `tol`.
    pub fn physical(v: Vector3<f64>, tol: f64) -> Result<Self> {
        let b = Self::try_from_vec(v)?;
        let norm = b.norm();
        if norm > 1.0 + tol {
            return Err(Error::Unphysical { norm });
        }
        Ok(b)
    }

    pub fn from_vec(v: Vector3<f64>) -> Self {
        Self(v)
    }

    pub fn vec(&self) -> &Vector3<f64> {
        &self.0
    }

    pub fn to_array(&self) -> [f64; 3] {
        [self.0.x, self.0.y, self.0.z]
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }
}

/// A trace-preserving affine map on the Bloch ball. No CP guarantee.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineChannel {
    m: Matrix3<f64>,
    t: Vector3<f64>,
}

impl AffineChannel {
    pub fn new(m: Matrix3<f64>, t: Vector3<f64>) -> Result<Self> {
        if m.iter().chain(t.iter()).all(|x| x.is_finite()) {
            Ok(Self { m, t })
        } else {
            Err(Error::InvalidParameter("channel has non-finite entries".into()))
        }
    }

    pub(crate) fn from_parts(m: Matrix3<f64>, t: Vector3<f64>) -> Self {
        Self { m, t }
    }

    pub fn identity() -> Self {
        Self { m: Matrix3::identity(), t: Vector3::zeros() }
    }

    /// Channel with diagonal `M = diag(lambda)`.
    pub fn diagonal(lambda: Vector3<f64>, t: Vector3<f64>) -> Self {
        Self { m: Matrix3::from_diagonal(&lambda), t }
    }

    pub fn m(&self) -> &Matrix3<f64> {
        &self.m
    }

    pub fn t(&self) -> &Vector3<f64> {
        &self.t
    }

    pub fn is_unital(&self, tol: f64) -> bool {
        self.t.norm() <= tol
    }

    /// True if `M` has no off-diagonal entries above `tol`.
    pub fn is_diagonal(&self, tol: f64) -> bool {
        (0..3).all(|i| (0..3).all(|j| i == j || self.m[(i, j)].abs() <= tol))
    }

    /// The 4×4 transfer matrix acting on `(1, r1, r2, r3)`.
    pub fn transfer_matrix(&self) -> Matrix4<f64> {
        let mut tm = Matrix4::zeros();
        tm[(0, 0)] = 1.0;
        for i in 0..3 {
            tm[(i + 1, 0)] = self.t[i];
            for j in 0..3 {
                tm[(i + 1, j + 1)] = self.m[(i, j)];
            }
        }
        tm
    }

    /// Inverse of [`transfer_matrix`](Self::transfer_matrix); the first row
    /// must be `(1, 0, 0, 0)` within `tol`.
    pub fn from_transfer_matrix(tm: &Matrix4<f64>, tol: f64) -> Result<Self> {
        let row = [tm[(0, 0)] - 1.0, tm[(0, 1)], tm[(0, 2)], tm[(0, 3)]];
        if row.iter().any(|x| x.abs() > tol) {
            return Err(Error::InvalidParameter("transfer matrix is not trace preserving".into()));
        }
        let m = tm.fixed_view::<3, 3>(1, 1).into_owned();
        let t = tm.fixed_view::<3, 1>(1, 0).into_owned();
        Self::new(m, t)
    }

    /// Frobenius distance between the transfer matrices.
    pub fn distance(&self, other: &Self) -> f64 {
        ((self.m - other.m).norm_squared() + (self.t - other.t).norm_squared()).sqrt()
    }

    /// `self ∘ inner`.
    pub fn after(&self, inner: &Self) -> Self {
        compose(self, inner)
    }

    pub fn apply(&self, r: &BlochVector) -> BlochVector {
        apply(self, r)
    }
}

/// `outer ∘ inner`: `M = M_o M_i`, `t = M_o t_i + t_o`.
pub fn compose(outer: &AffineChannel, inner: &AffineChannel) -> AffineChannel {
    AffineChannel { m: outer.m * inner.m, t: outer.m * inner.t + outer.t }
}

pub fn apply(phi: &AffineChannel, r: &BlochVector) -> BlochVector {
    BlochVector(phi.m * r.0 + phi.t)
}

/// Fold `channels` as `c[0] ∘ c[1] ∘ … ∘ c[n-1]`.
pub fn compose_all<'a, I>(channels: I) -> AffineChannel
where
    I: IntoIterator<Item = &'a AffineChannel>,
{
    channels.into_iter().fold(AffineChannel::identity(), |acc, c| compose(&acc, c))
}

pub fn pauli() -> [Matrix2<C64>; 3] {
    let o = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    [Matrix2::new(o, one, one, o), Matrix2::new(o, -i, i, o), Matrix2::new(one, o, o, -one)]
}

/// A qubit density matrix (Hermitian, unit trace, positive semidefinite).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix(Matrix2<C64>);

impl DensityMatrix {
    /// Validates hermiticity, trace and positivity within 1e-12.
    pub fn new(rho: Matrix2<C64>) -> Result<Self> {
        let eps = tol::ALGEBRAIC;
        if (rho - rho.adjoint()).iter().any(|z| z.norm() > eps) {
            return Err(Error::InvalidParameter("density matrix is not Hermitian".into()));
        }
        if (rho.trace() - C64::new(1.0, 0.0)).norm() > eps {
            return Err(Error::InvalidParameter("density matrix trace is not 1".into()));
        }
        // eigenvalues of a unit-trace 2×2 Hermitian matrix are (1 ± |r|)/2
        let r = bloch_components(&rho).norm();
        if 0.5 * (1.0 - r) < -eps {
            return Err(Error::InvalidParameter("density matrix has a negative eigenvalue".into()));
        }
        Ok(Self(rho))
    }

    pub fn matrix(&self) -> &Matrix2<C64> {
        &self.0
    }
}

fn bloch_components(rho: &Matrix2<C64>) -> Vector3<f64> {
    let s = pauli();
    Vector3::new((s[0] * rho).trace().re, (s[1] * rho).trace().re, (s[2] * rho).trace().re)
}

/// `ρ = (I + r·σ)/2`. Rejects `‖r‖ > 1 + tol`.
pub fn density_from_bloch(r: &BlochVector, tol: f64) -> Result<DensityMatrix> {
    let n = r.norm();
    if n > 1.0 + tol {
        return Err(Error::Unphysical { norm: n });
    }
    let s = pauli();
    let half = C64::new(0.5, 0.0);
    let mut rho = Matrix2::identity() * half;
    for k in 0..3 {
        rho += s[k] * C64::new(0.5 * r.0[k], 0.0);
    }
    Ok(DensityMatrix(rho))
}

/// `r_k = tr(σ_k ρ)`; inverse of [`density_from_bloch`].
pub fn bloch_from_density(rho: &DensityMatrix) -> BlochVector {
    BlochVector(bloch_components(&rho.0))
}

/// Named generator families. Angles are in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorSpec {
    /// Conjugation by `exp(iφ n·σ)`: rotation by `2φ` about `n`.
    Unitary { axis: [f64; 3], half_angle: f64 },
    /// Axis permutation `e_j ↦ e_{sigma[j]}` (odd permutations carry one sign).
    Permutation { sigma: [usize; 3] },
    /// π-rotation negating the two listed axes.
    SignFlip { axes: [usize; 2] },
    /// `ρ ↦ (1-t)ρ + t σ_z ρ σ_z`.
    PhaseFlip { t: f64 },
    /// `ρ ↦ tr(ρ) ρ₀`.
    Constant { state: [f64; 3] },
    /// `M = diag(cos u, cos v, cos u cos v)`, `t = (0, 0, sin u sin v)`.
    Extremal { u: f64, v: f64 },
    /// Extremal channel given by input/output latitudes `θ < ω`.
    ExtremalAngles { theta: f64, omega: f64 },
    /// Face channel `M(s, z)` of one of the two bow-tie halves.
    FaceChannel { s: f64, z: f64, half: u8 },
}

impl GeneratorSpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Self::Unitary { .. } => "unitary",
            Self::Permutation { .. } => "permutation",
            Self::SignFlip { .. } => "sign_flip",
            Self::PhaseFlip { .. } => "phase_flip",
            Self::Constant { .. } => "constant",
            Self::Extremal { .. } => "extremal",
            Self::ExtremalAngles { .. } => "extremal_angles",
            Self::FaceChannel { .. } => "face_channel",
        }
    }

    /// Unitary conjugations (including permutations and sign flips).
    pub fn is_unitary(&self) -> bool {
        matches!(self, Self::Unitary { .. } | Self::Permutation { .. } | Self::SignFlip { .. })
    }

    /// The unitary generator realizing a proper rotation.
    pub fn from_rotation(r: &Matrix3<f64>) -> Self {
        let (axis, angle) = rotation::axis_angle(r);
        Self::Unitary { axis: [axis.x, axis.y, axis.z], half_angle: 0.5 * angle }
    }
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

/// Affine form of a generator.
pub fn make_generator(g: &GeneratorSpec) -> Result<AffineChannel> {
    match *g {
        GeneratorSpec::Unitary { axis, half_angle } => {
            let n = Vector3::from(axis);
            if n.norm().partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) || !half_angle.is_finite() {
                return Err(invalid("unitary axis must be nonzero and angle finite"));
            }
            Ok(AffineChannel::from_parts(rotation::rodrigues(&n, 2.0 * half_angle), Vector3::zeros()))
        }
        GeneratorSpec::Permutation { sigma } => {
            if !rotation::is_permutation(sigma) {
                return Err(invalid(format!("{sigma:?} is not a permutation of (0, 1, 2)")));
            }
            Ok(AffineChannel::from_parts(rotation::permutation_rotation(sigma), Vector3::zeros()))
        }
        GeneratorSpec::SignFlip { axes: [i, j] } => {
            if i > 2 || j > 2 || i == j {
                return Err(invalid("sign flip needs two distinct axes in 0..3"));
            }
            Ok(AffineChannel::from_parts(rotation::sign_flip(i, j), Vector3::zeros()))
        }
        GeneratorSpec::PhaseFlip { t } => {
            if !(0.0..=1.0).contains(&t) {
                return Err(invalid(format!("phase flip probability {t} outside [0, 1]")));
            }
            let a = 1.0 - 2.0 * t;
            Ok(AffineChannel::diagonal(Vector3::new(a, a, 1.0), Vector3::zeros()))
        }
        GeneratorSpec::Constant { state } => {
            let r = BlochVector::physical(Vector3::from(state), tol::BLOCH_NORM)?;
            Ok(AffineChannel::from_parts(Matrix3::zeros(), *r.vec()))
        }
        GeneratorSpec::Extremal { u, v } => {
            let both_zero = u == 0.0 && v == 0.0;
            let in_range = u > 0.0 && v > 0.0 && u <= FRAC_PI_2 && v <= FRAC_PI_2 && u <= v;
            if u == 0.0 && v != 0.0 {
                return Err(invalid("u = 0 with v ≠ 0 is a phase flip, not an extremal channel"));
            }
            if !(both_zero || in_range) {
                return Err(invalid(format!("extremal angles (u, v) = ({u}, {v}) outside 0 < u ≤ v ≤ π/2")));
            }
            Ok(extremal_channel(u, v))
        }
        GeneratorSpec::ExtremalAngles { theta, omega } => {
            let (u, v) = extremal_uv_from_angles(theta, omega)?;
            Ok(extremal_channel(u, v))
        }
        GeneratorSpec::FaceChannel { s, z, half } => {
            if !(0.0..=1.0).contains(&s) || !(-1.0..=1.0).contains(&z) {
                return Err(invalid(format!("face channel (s, z) = ({s}, {z}) out of range")));
            }
            let d = match half {
                1 => Vector3::new(1.0 + s * (z - 1.0), z + s * (1.0 - z), z),
                2 => Vector3::new(z - s * (1.0 + z), 1.0 - s * (1.0 + z), z),
                _ => return Err(invalid("face channel half must be 1 or 2")),
            };
            Ok(AffineChannel::diagonal(d, Vector3::zeros()))
        }
    }
}

pub(crate) fn extremal_channel(u: f64, v: f64) -> AffineChannel {
    let (su, cu) = u.sin_cos();
    let (sv, cv) = v.sin_cos();
    AffineChannel::diagonal(Vector3::new(cu, cv, cu * cv), Vector3::new(0.0, 0.0, su * sv))
}

/// Solve `sin θ = tan u / tan v`, `sin ω = sin u / sin v` for `(u, v)`.
///
/// Requires `0 ≤ θ < ω < π/2`. Uses half-angle forms so that narrow gaps
/// `ω - θ` keep full relative precision.
pub fn extremal_uv_from_angles(theta: f64, omega: f64) -> Result<(f64, f64)> {
    if !(theta >= 0.0 && omega < FRAC_PI_2 && theta < omega) {
        return Err(invalid(format!("latitudes (θ, ω) = ({theta}, {omega}) need 0 ≤ θ < ω < π/2")));
    }
    // 1 - cos u = (cos θ - cos ω)/cos θ,  1 - cos v = sin(ω - θ)/(sin ω cos θ)
    let one_minus_cu = 2.0 * (0.5 * (omega + theta)).sin() * (0.5 * (omega - theta)).sin() / theta.cos();
    let one_minus_cv = (omega - theta).sin() / (omega.sin() * theta.cos());
    let u = 2.0 * (0.5 * one_minus_cu).sqrt().min(1.0).asin();
    let v = 2.0 * (0.5 * one_minus_cv).sqrt().min(1.0).asin();
    Ok((u.min(v), v))
}

/// Latitudes `(θ, ω)` of the pure inputs/outputs of `Extremal{u, v}`, `u < v`.
pub fn extremal_angles_from_uv(u: f64, v: f64) -> (f64, f64) {
    let theta = (u.tan() / v.tan()).clamp(-1.0, 1.0).asin();
    let omega = (u.sin() / v.sin()).clamp(-1.0, 1.0).asin();
    (theta, omega)
}

/// Which region a random channel is drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    Unital,
    General,
    Extremal,
}

impl std::str::FromStr for ChannelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unital" => Ok(Self::Unital),
            "general" => Ok(Self::General),
            "extremal" => Ok(Self::Extremal),
            other => Err(invalid(format!("unknown channel kind '{other}'"))),
        }
    }
}
