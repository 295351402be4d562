use funnel_core::mechanisms::{grr, ldp_of, lip_grr, lip_of, Protocol};
use funnel_core::prob::sample_jeffreys;
use funnel_core::{Channel, JointDistribution};
use proptest::prelude::*;

fn joint() -> impl Strategy<Value = JointDistribution> {
    (2usize..=4, 2usize..=5, any::<u64>()).prop_map(|(c, a, seed)| sample_jeffreys(c, a, seed).unwrap())
}

/// A random column-stochastic matrix with `b` outputs.
fn channel(a: usize, b: usize) -> impl Strategy<Value = Channel> {
    prop::collection::vec(prop::collection::vec(0.01f64..1.0, b), a).prop_map(move |cols| {
        let q = (0..b)
            .map(|y| cols.iter().map(|col| col[y] / col.iter().sum::<f64>()).collect())
            .collect();
        Channel::new(q).unwrap()
    })
}

fn joint_and_channel() -> impl Strategy<Value = (JointDistribution, Channel, Channel)> {
    joint().prop_flat_map(|j| {
        let a = j.a();
        (Just(j), channel(a, 3), channel(3, 2))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn lip_never_exceeds_ldp((j, q, _) in joint_and_channel()) {
        prop_assert!(lip_of(&q, &j).unwrap().value <= ldp_of(&q, &j).unwrap().value + 1e-12);
    }

    #[test]
    fn post_processing_cannot_increase_leakage((j, q, post) in joint_and_channel()) {
        // compose: (post . q)[z][x] = sum_y post[z][y] q[y][x]
        let composed: Vec<Vec<f64>> = (0..post.b())
            .map(|z| (0..q.a()).map(|x| (0..q.b()).map(|y| post.get(z, y) * q.get(y, x)).sum()).collect())
            .collect();
        let composed = Channel::new(composed).unwrap();
        prop_assert!(lip_of(&composed, &j).unwrap().value <= lip_of(&q, &j).unwrap().value + 1e-12);
        prop_assert!(ldp_of(&composed, &j).unwrap().value <= ldp_of(&q, &j).unwrap().value + 1e-12);
        prop_assert!(composed.mutual_information(j.p_x()) <= q.mutual_information(j.p_x()) + 1e-12);
    }

    #[test]
    fn grr_leakage_grows_with_alpha(j in joint(), a1 in 0.0f64..6.0, da in 0.0f64..3.0) {
        prop_assert!(lip_grr(a1, &j).unwrap() <= lip_grr(a1 + da, &j).unwrap() + 1e-12);
        let explicit = lip_of(&grr(a1, j.a()).unwrap(), &j).unwrap().value;
        prop_assert!((explicit - lip_grr(a1, &j).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn calibrated_protocols_respect_the_target(j in joint(), eps in 0.0f64..3.0) {
        for p in [Protocol::Grr, Protocol::Oue, Protocol::Cr] {
            let sol = p.solve(eps, &j).unwrap();
            prop_assert!(sol.leakage <= eps + 1e-9, "{} leaked {} at {}", p.name(), sol.leakage, eps);
            prop_assert!((p.leakage(sol.alpha, &j).unwrap() - sol.leakage).abs() < 1e-9);
            let u = p.utility(sol.alpha, &j).unwrap();
            prop_assert!(u >= -1e-12 && u <= j.entropy_x() + 1e-9);
        }
    }
}
