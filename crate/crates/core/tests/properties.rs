use nalgebra::{Matrix2, Matrix3, Vector3};
use proptest::prelude::*;
use qchan_core::canonical::extremal_frame;
use qchan_core::cp::{char_poly, gfa_bound};
use qchan_core::decompose::membership_violations;
use qchan_core::rotation::{is_rotation, rodrigues};
use qchan_core::sample::{indexed_rng, lambda_from_q, sample_extremal};
use qchan_core::{
    apply, bloch_from_density, choi, compose, decompose_edge, decompose_extremal, decompose_unital, density_from_bloch,
    extremal_test, gfa_general, make_generator, normalize_extremal_signs, pure_outputs, recompose,
    sample_channel_seeded, to_canonical, AffineChannel, AxisOrdering, BlochVector, ChannelKind, DensityMatrix,
    GeneratorSpec, PureOutputClass, Verdict,
};
use std::f64::consts::{FRAC_PI_2, PI};

fn unit() -> impl Strategy<Value = f64> {
    -1.0..=1.0f64
}

fn vec3(r: f64) -> impl Strategy<Value = Vector3<f64>> {
    (-r..=r, -r..=r, -r..=r).prop_map(|(x, y, z)| Vector3::new(x, y, z))
}

fn any_affine() -> impl Strategy<Value = AffineChannel> {
    (prop::array::uniform9(unit()), vec3(1.0))
        .prop_map(|(m, t)| AffineChannel::new(Matrix3::from_row_slice(&m), t).unwrap())
}

fn axis() -> impl Strategy<Value = Vector3<f64>> {
    vec3(1.0).prop_filter("nonzero axis", |v| v.norm() > 1e-3)
}

fn rotation() -> impl Strategy<Value = Matrix3<f64>> {
    (axis(), -PI..PI).prop_map(|(n, a)| rodrigues(&n, a))
}

fn rotation_channel(r: Matrix3<f64>) -> AffineChannel {
    AffineChannel::new(r, Vector3::zeros()).unwrap()
}

/// Unital CP channel, with a share of the draws on the faces, edges and
/// vertices of the tetrahedron.
fn unital_cp() -> impl Strategy<Value = AffineChannel> {
    (prop::array::uniform4(0.0..1.0f64), 0usize..4, prop::array::uniform4(any::<bool>()), rotation(), rotation())
        .prop_map(|(mut q, zeros, mask, post, pre)| {
            for k in 0..4 {
                if mask[k] && k < zeros {
                    q[k] = 0.0;
                }
            }
            if q.iter().sum::<f64>() == 0.0 {
                q[0] = 1.0;
            }
            let s: f64 = q.iter().sum();
            let l = lambda_from_q(q.map(|x| x / s));
            compose(
                &rotation_channel(post),
                &compose(&AffineChannel::diagonal(l, Vector3::zeros()), &rotation_channel(pre)),
            )
        })
}

fn generator() -> impl Strategy<Value = GeneratorSpec> {
    let perms = [[0, 1, 2], [1, 2, 0], [2, 0, 1], [1, 0, 2], [0, 2, 1], [2, 1, 0]];
    prop_oneof![
        (axis(), -PI..PI).prop_map(|(n, h)| GeneratorSpec::Unitary { axis: [n.x, n.y, n.z], half_angle: h }),
        prop::sample::select(perms.to_vec()).prop_map(|sigma| GeneratorSpec::Permutation { sigma }),
        prop::sample::select(vec![[0, 1], [0, 2], [1, 2]]).prop_map(|axes| GeneratorSpec::SignFlip { axes }),
        (0.0..=1.0f64).prop_map(|t| GeneratorSpec::PhaseFlip { t }),
        vec3(1.0)
            .prop_filter("inside the ball", |v| v.norm() <= 1.0)
            .prop_map(|v| GeneratorSpec::Constant { state: [v.x, v.y, v.z] }),
        (1e-6..=FRAC_PI_2, 1e-6..=FRAC_PI_2).prop_map(|(a, b)| GeneratorSpec::Extremal { u: a.min(b), v: a.max(b) }),
        (0.0..1.5f64, 1e-6..0.07f64)
            .prop_map(|(theta, gap)| GeneratorSpec::ExtremalAngles { theta, omega: theta + gap }),
        (0.0..=1.0f64, -1.0..=1.0f64, 1u8..=2).prop_map(|(s, z, half)| GeneratorSpec::FaceChannel { s, z, half }),
    ]
}

fn max_abs(a: &AffineChannel, b: &AffineChannel) -> f64 {
    (a.m() - b.m()).amax().max((a.t() - b.t()).amax())
}

proptest! {
    #[test]
    fn compose_is_associative(a in any_affine(), b in any_affine(), c in any_affine()) {
        let left = compose(&compose(&a, &b), &c);
        let right = compose(&a, &compose(&b, &c));
        prop_assert!(max_abs(&left, &right) <= 1e-13);
    }

    #[test]
    fn rotations_compose_like_so3(r1 in rotation(), r2 in rotation()) {
        let g = |r: &Matrix3<f64>| make_generator(&GeneratorSpec::from_rotation(r)).unwrap();
        let composed = compose(&g(&r1), &g(&r2));
        prop_assert!((composed.m() - r1 * r2).amax() <= 1e-12);
        prop_assert!(is_rotation(composed.m(), 1e-12));
        prop_assert_eq!(composed.t(), &Vector3::zeros());
    }

    #[test]
    fn apply_commutes_with_compose(a in any_affine(), b in any_affine(), r in vec3(1.0)) {
        let r = BlochVector::from_vec(r / r.norm().max(1.0));
        let once = apply(&compose(&a, &b), &r);
        let twice = apply(&a, &apply(&b, &r));
        prop_assert!((once.vec() - twice.vec()).amax() <= 1e-13);
    }

    #[test]
    fn density_round_trip(r in vec3(1.0).prop_filter("ball", |v| v.norm() <= 1.0)) {
        let rho = density_from_bloch(&BlochVector::from_vec(r), 1e-12).unwrap();
        let back = density_from_bloch(&bloch_from_density(&rho), 1e-12).unwrap();
        prop_assert!((rho.matrix() - back.matrix()).norm() <= 1e-13);
        prop_assert!(DensityMatrix::new(*rho.matrix()).is_ok());
    }

    #[test]
    fn generators_are_cp(g in generator()) {
        let phi = make_generator(&g).unwrap();
        prop_assert!(choi(&phi).min_eigenvalue() >= -1e-10, "{:?}", g);
    }

    #[test]
    fn canonical_form_recomposes(phi in any_affine()) {
        let c = to_canonical(&phi, AxisOrdering::MagnitudeDescending);
        prop_assert!(max_abs(&c.recompose(), &phi) <= 1e-12);
        prop_assert!(is_rotation(&c.post_rotation, 1e-12) && is_rotation(&c.pre_rotation, 1e-12));
        prop_assert!((c.lambda.product() - phi.m().determinant()).abs() <= 1e-12);
        let mut mags: Vec<f64> = c.lambda.iter().map(|l| l.abs()).collect();
        let mut sv: Vec<f64> = phi.m().singular_values().iter().copied().collect();
        mags.sort_by(f64::total_cmp);
        sv.sort_by(f64::total_cmp);
        for (a, b) in mags.iter().zip(&sv) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
        let before = choi(&phi).min_eigenvalue();
        let after = choi(&c.diagonal_channel()).min_eigenvalue();
        prop_assert!((before - after).abs() < 1e-10);
    }

    #[test]
    fn extremal_normal_form(seed in any::<u64>()) {
        let (phi, u, v) = sample_extremal(&mut indexed_rng(seed, 0));
        let (c, _) = extremal_frame(&phi).unwrap();
        let (n, pre, post) = normalize_extremal_signs(&c).unwrap();
        let l = n.lambda;
        let t3 = n.t_canonical[2];
        prop_assert!(l.iter().all(|&x| x >= 0.0) && t3 >= 0.0);
        prop_assert!((l[2] - l[0] * l[1]).abs() <= 1e-10);
        prop_assert!((t3 * t3 - (1.0 - l[0] * l[0]) * (1.0 - l[1] * l[1])).abs() <= 1e-10);
        let back = compose(&make_generator(&post).unwrap(), &compose(&n.diagonal_channel(), &make_generator(&pre).unwrap()));
        prop_assert!(max_abs(&back, &c.diagonal_channel()) <= 1e-15);
        let (u2, v2) = extremal_test(&phi, 1e-9).unwrap();
        prop_assert!((u - u2).abs() < 1e-8 && (v - v2).abs() < 1e-8);
    }

    #[test]
    fn closed_form_quantities(l in vec3(1.0), t in vec3(1.0)) {
        let report = gfa_general(&l, &t, 1e-10);
        prop_assert!((report.q.iter().sum::<f64>() - 1.0).abs() <= 1e-15);
        let eigs = report.choi_eigs;
        prop_assert!((eigs.iter().sum::<f64>() - 2.0).abs() <= 1e-12);
        for x in eigs {
            prop_assert!(char_poly(&report, x).abs() < 1e-10, "p({}) = {}", x, char_poly(&report, x));
        }
    }

    #[test]
    fn axial_translation_identity(l in vec3(1.0), t3 in 1e-9..1.2f64) {
        let report = gfa_general(&l, &Vector3::new(0.0, 0.0, t3), 1e-10);
        prop_assert!(report.special_case_residual.unwrap() < 1e-12);
    }

    #[test]
    fn r_is_bounded_below(q in prop::array::uniform4(0.0..1.0f64), u in axis()) {
        let s: f64 = q.iter().sum();
        prop_assume!(s > 0.0);
        let l = lambda_from_q(q.map(|x| x / s));
        let u = u.normalize();
        let report = gfa_general(&l, &(u * 0.1), 1e-10);
        let r = report.r.unwrap();
        let mut l2: Vec<f64> = l.iter().map(|x| x * x).collect();
        l2.sort_by(|a, b| b.total_cmp(a));
        let r_min = 1.0 - l2[0] - l2[1] + l2[2];
        prop_assert!(r >= r_min - 1e-14);
        prop_assert!(r * r - report.q_prod >= -1e-14);
        prop_assert!(gfa_bound(&l, &u) <= r + 1e-14);
    }

    #[test]
    fn unital_pure_outputs_are_centrally_symmetric(phi in unital_cp()) {
        let po = pure_outputs(&phi, 1e-10).unwrap();
        let pts = po.points();
        for p in &pts {
            prop_assert!(pts.iter().any(|q| (p.vec() + q.vec()).norm() <= 1e-9), "{:?}", po);
        }
        prop_assert!(!matches!(po, PureOutputClass::One(_)));
    }

    #[test]
    fn unital_plans_round_trip(phi in unital_cp(), eps in 0.01..0.45f64) {
        let plan = decompose_unital(&phi, eps).unwrap();
        prop_assert!(plan.recomposition_error < 1e-9);
        prop_assert!(membership_violations(&plan).is_empty(), "{:?}", plan.factors);
    }

    #[test]
    fn extremal_intermediates_stay_extremal(seed in any::<u64>(), eps in 0.02..0.45f64) {
        let (phi, _, _) = sample_extremal(&mut indexed_rng(seed, 1));
        let plan = decompose_extremal(&phi, eps).unwrap();
        prop_assert!(plan.recomposition_error < 1e-9);
        prop_assert!(membership_violations(&plan).is_empty());
        let factors: Vec<AffineChannel> = plan.factors.iter().map(|f| make_generator(f).unwrap()).collect();
        // every contiguous run of factors composes to a CP extremal channel
        for i in 0..factors.len() {
            let mut acc = AffineChannel::identity();
            for f in &factors[i..] {
                acc = compose(&acc, f);
                prop_assert!(choi(&acc).min_eigenvalue() >= -1e-10);
                prop_assert!(extremal_test(&acc, 1e-9).is_some(), "run from {} of {:?}", i, plan.factors);
            }
        }
    }

    #[test]
    fn degenerate_two_po_split_has_one_degenerate_factor(u in 0.01..1.56f64, eps in 0.02..0.45f64) {
        let phi = make_generator(&GeneratorSpec::Extremal { u, v: FRAC_PI_2 }).unwrap();
        let plan = decompose_extremal(&phi, eps).unwrap();
        prop_assert!(plan.recomposition_error < 1e-9);
        let thetas: Vec<f64> = plan
            .factors
            .iter()
            .filter_map(|f| match f {
                GeneratorSpec::ExtremalAngles { theta, .. } => Some(*theta),
                _ => None,
            })
            .collect();
        prop_assert_eq!(thetas.iter().filter(|&&t| t == 0.0).count(), 1, "{:?}", plan.factors);
        prop_assert!(thetas.iter().all(|&t| t == 0.0 || t > 1e-12));
    }

    #[test]
    fn small_phase_flips_need_small_factors(t in 1e-4..0.5f64, eps in 0.01..0.45f64) {
        let plan = decompose_edge(t, eps).unwrap();
        let small = plan.factors.iter().any(|f| matches!(f, GeneratorSpec::PhaseFlip { t: p } if *p <= t));
        prop_assert!(small);
        prop_assert!(plan.recomposition_error < 1e-9);
    }

    #[test]
    fn half_phase_flip_is_atomic(eps in 0.001..0.499f64) {
        let plan = decompose_edge(0.5, eps).unwrap();
        prop_assert_eq!(plan.factors, vec![GeneratorSpec::PhaseFlip { t: 0.5 }]);
    }

    #[test]
    fn constant_pure_channels_keep_a_constant_factor(n in axis(), eps in 0.01..0.45f64) {
        let n = n.normalize();
        let phi = make_generator(&GeneratorSpec::Constant { state: [n.x, n.y, n.z] }).unwrap();
        let plan = decompose_extremal(&phi, eps).unwrap();
        prop_assert!(plan.count("constant") >= 1);
        prop_assert!(recompose(&plan).unwrap().1 < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn sampled_general_channels_are_cp(seed in any::<u64>()) {
        let phi = sample_channel_seeded(seed, ChannelKind::General);
        let c = to_canonical(&phi, AxisOrdering::MagnitudeDescending);
        let report = gfa_general(&c.lambda, &c.t_canonical, 1e-10);
        prop_assert!(report.verdict.is_cp());
        prop_assert!(choi(&phi).min_eigenvalue() >= -1e-10);
    }

    #[test]
    fn cp_is_closed_under_compose(a in any::<u64>(), b in any::<u64>(), ka in 0usize..3, kb in 0usize..3) {
        let kinds = [ChannelKind::Unital, ChannelKind::General, ChannelKind::Extremal];
        let phi = compose(&sample_channel_seeded(a, kinds[ka]), &sample_channel_seeded(b, kinds[kb]));
        prop_assert!(Verdict::from_margin(choi(&phi).min_eigenvalue(), 1e-10).is_cp());
    }
}

#[test]
fn kraus_operators_reproduce_the_channel() {
    use qchan_core::cp::apply_kraus;
    use qchan_core::kraus_decomposition;
    for i in 0..200 {
        let phi = sample_channel_seeded(i, ChannelKind::General);
        let ops = kraus_decomposition(&phi, 1e-10, 1e-9).unwrap();
        let sum: Matrix2<_> = ops.iter().map(|a| a.adjoint() * a).sum();
        assert!((sum - Matrix2::identity()).norm() < 1e-12);
        let r = BlochVector::new(0.3, -0.2, 0.5);
        let rho = density_from_bloch(&r, 1e-12).unwrap();
        let out = DensityMatrix::new(apply_kraus(&ops, rho.matrix())).unwrap();
        assert!((bloch_from_density(&out).vec() - apply(&phi, &r).vec()).amax() < 1e-12);
    }
}
