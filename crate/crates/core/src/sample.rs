//! Random channels for tests, sweeps and the CLI.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use std::f64::consts::FRAC_PI_2;

use crate::channel::{compose, extremal_channel, AffineChannel, ChannelKind};
use crate::cp::gfa_bound;
use crate::par;
use crate::rotation::random_rotation;

fn rotation_channel<R: Rng + ?Sized>(rng: &mut R) -> AffineChannel {
    AffineChannel::from_parts(random_rotation(rng), Vector3::zeros())
}

/// Uniform point of the 3-simplex (normalized exponentials).
fn simplex4<R: Rng + ?Sized>(rng: &mut R) -> [f64; 4] {
    let mut q = [0.0; 4];
    for x in &mut q {
        *x = Exp1.sample(rng);
    }
    let s: f64 = q.iter().sum();
    q.map(|x| x / s)
}

/// Tetrahedron point with the given barycentric weights.
pub fn lambda_from_q(q: [f64; 4]) -> Vector3<f64> {
    Vector3::new(q[0] + q[1] - q[2] - q[3], q[0] - q[1] + q[2] - q[3], q[0] - q[1] - q[2] + q[3])
}

fn unit_vector<R: Rng + ?Sized>(rng: &mut R) -> Vector3<f64> {
    loop {
        let g = Vector3::new(StandardNormal.sample(rng), StandardNormal.sample(rng), StandardNormal.sample(rng));
        let n: f64 = g.norm();
        if n > 1e-8 {
            return g / n;
        }
    }
}

/// Extremal angles with `0 < u ≤ v ≤ π/2`.
fn extremal_angles<R: Rng + ?Sized>(rng: &mut R) -> (f64, f64) {
    let a = (1.0 - rng.gen::<f64>()) * FRAC_PI_2;
    let b = (1.0 - rng.gen::<f64>()) * FRAC_PI_2;
    (a.min(b), a.max(b))
}

/// Random rotated extremal channel together with its angles `(u, v)`.
pub fn sample_extremal<R: Rng + ?Sized>(rng: &mut R) -> (AffineChannel, f64, f64) {
    let (u, v) = extremal_angles(rng);
    let pre = rotation_channel(rng);
    let post = rotation_channel(rng);
    let phi = compose(&post, &compose(&extremal_channel(u, v), &pre));
    (phi, u, v)
}

/// Draw a CP channel of the requested kind.
pub fn sample_channel<R: Rng + ?Sized>(rng: &mut R, kind: ChannelKind) -> AffineChannel {
    match kind {
        ChannelKind::Extremal => sample_extremal(rng).0,
        ChannelKind::Unital | ChannelKind::General => {
            let lambda = lambda_from_q(simplex4(rng));
            let post = random_rotation(rng);
            let pre = random_rotation(rng);
            let m = post * nalgebra::Matrix3::from_diagonal(&lambda) * pre;
            if kind == ChannelKind::Unital {
                return AffineChannel::from_parts(m, Vector3::zeros());
            }
            let u = unit_vector(rng);
            let bound = gfa_bound(&lambda, &u).max(0.0);
            let t_canonical = u * (rng.gen::<f64>() * bound).sqrt();
            AffineChannel::from_parts(m, post * t_canonical)
        }
    }
}

pub fn sample_channel_seeded(seed: u64, kind: ChannelKind) -> AffineChannel {
    sample_channel(&mut ChaCha8Rng::seed_from_u64(seed), kind)
}

/// `n` channels, item `i` drawn from its own ChaCha stream of `seed`, so the
/// batch does not depend on thread scheduling.
pub fn sample_batch(seed: u64, kind: ChannelKind, n: usize) -> Vec<AffineChannel> {
    par::map_range(n, |i| sample_channel(&mut indexed_rng(seed, i), kind))
}

pub fn indexed_rng(seed: u64, i: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i as u64);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cp::{choi, fac_unital, Verdict};

    #[test]
    fn unital_draws_lie_in_the_tetrahedron() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let phi = sample_channel(&mut rng, ChannelKind::Unital);
            assert_eq!(*phi.t(), Vector3::zeros());
            let sv = phi.m().singular_values();
            // singular values alone do not fix signs; check via the Choi spectrum
            assert!(choi(&phi).min_eigenvalue() >= -1e-12, "{sv}");
        }
        let q = simplex4(&mut rng);
        let r = fac_unital(&lambda_from_q(q), 1e-10);
        for k in 0..4 {
            assert!((r.q[k] - q[k]).abs() < 1e-15);
        }
        assert_ne!(r.verdict, Verdict::NotCP);
    }

    #[test]
    fn general_draws_are_cp() {
        for phi in sample_batch(9, ChannelKind::General, 300) {
            assert!(choi(&phi).min_eigenvalue() >= -1e-10);
        }
    }

    #[test]
    fn batches_are_reproducible() {
        let a = sample_batch(42, ChannelKind::Extremal, 50);
        let b = sample_batch(42, ChannelKind::Extremal, 50);
        assert_eq!(a, b);
        assert_eq!(sample_channel_seeded(5, ChannelKind::General), sample_channel_seeded(5, ChannelKind::General));
    }
}
