use bilap::conditions::{
    cb_to_yr, certify, conditions_equal, krein_lambda0, preset_conditions, yr_to_cb, Condition, ConditionPreset,
    OuterBoundary,
};
use bilap::graph::{preset_graph, MetricGraph, PresetKind};
use nalgebra::DVector;
use proptest::prelude::*;

fn star(lengths: [f64; 3]) -> MetricGraph {
    MetricGraph::new(preset_graph(PresetKind::Star, 3).unwrap(), lengths.to_vec()).unwrap()
}

fn outer() -> impl Strategy<Value = OuterBoundary> {
    prop_oneof![Just(OuterBoundary::Clamped), Just(OuterBoundary::Hinged), Just(OuterBoundary::Sliding)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn kiik_conditions_roundtrip(alpha in 0.1f64..3.0, beta in 0.1f64..3.0, gamma in 0.1f64..3.0, outer in outer()) {
        let g = star([1.0, 1.5, 0.7]);
        let yr = preset_conditions(&g, &ConditionPreset::Kiik { alpha, beta, gamma, outer }).unwrap();
        let cb = yr_to_cb(&yr);
        cb.check_self_adjoint(1e-10).unwrap();
        let back = cb_to_yr(&cb).unwrap();
        prop_assert!(conditions_equal(&Condition::YR(yr.clone()), &Condition::YR(back)));
        prop_assert!(certify(&yr).unwrap().passes(1e-9, 1e-9));
    }

    #[test]
    fn krein_lambda_quadratic_form(lengths in proptest::collection::vec(0.2f64..3.0, 1..5), seed in proptest::collection::vec(-2.0f64..2.0, 8)) {
        let e = lengths.len();
        let w = DVector::from_column_slice(&seed[..2 * e]);
        let form = (w.transpose() * krein_lambda0(&lengths) * &w)[(0, 0)];
        let expected: f64 = (0..e).map(|k| (w[k] + w[e + k]).powi(2) / lengths[k]).sum();
        prop_assert!((form - expected).abs() < 1e-12 * (1.0 + expected));
    }
}

#[test]
fn all_presets_certify_on_unequal_star() {
    let g = star([0.6, 1.0, 1.9]);
    for preset in ConditionPreset::standard() {
        let yr = preset_conditions(&g, &preset).unwrap();
        let cert = certify(&yr).unwrap();
        assert!(cert.passes(1e-9, 1e-9), "{}: {cert:?}", preset.name());
    }
}
