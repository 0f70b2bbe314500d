use nalgebra::DVector;
use nslift_core::constraint_system::{build_system, pointwise_solvable, reconstruct_X};
use proptest::prelude::*;

fn forcing_rhs(rows: usize, f: [f64; 3]) -> DVector<f64> {
    let mut v = DVector::zeros(rows);
    for j in 0..3 {
        v[1 + j] = f[j];
    }
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn reconstructed_state_satisfies_the_linear_system(
        z in prop::collection::vec(-3.0f64..3.0, 55),
        f in prop::array::uniform3(-5.0f64..5.0),
    ) {
        let mats = build_system(0.5, 1.0).unwrap();
        let x = reconstruct_X(&DVector::from_vec(z), f, &mats);
        let err = (&mats.a * x - forcing_rhs(mats.a.nrows(), f)).amax();
        prop_assert!(err <= 1e-12, "{err}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn solvability_is_invariant_under_row_scaling(
        scale in prop::collection::vec(prop_oneof![-1e3f64..-1e-3, 1e-3f64..1e3], 1..=64),
        f in prop::array::uniform3(-5.0f64..5.0),
        perturb in any::<bool>(),
    ) {
        let mats = build_system(0.37, 1.3).unwrap();
        // Repeat the first row; a nonzero offset in its target makes the system inconsistent.
        let n = mats.a.nrows();
        let mut a = mats.a.clone().insert_row(n, 0.0);
        a.set_row(n, &mats.a.row(0));
        let mut beta = forcing_rhs(n, f).push(0.0);
        beta[n] = beta[0];
        if perturb {
            beta[n] = beta[0] + 1.0;
        }
        let base = pointwise_solvable(&a, &beta);
        prop_assert_eq!(base, !perturb);
        for (i, s) in scale.iter().cycle().take(n + 1).enumerate() {
            a.row_mut(i).scale_mut(*s);
            beta[i] *= s;
        }
        prop_assert_eq!(pointwise_solvable(&a, &beta), base);
    }
}
