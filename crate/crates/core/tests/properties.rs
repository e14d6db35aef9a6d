mod common;

use std::collections::BTreeMap;

use proptest::prelude::*;

use eisenhart::cli::format::g17;
use eisenhart::cloud;
use eisenhart::dynamics::{homogeneity_residual, lift_state, null_residual, ReducedState};
use eisenhart::expr::Field;
use eisenhart::geometry::BrinkmannMetric;
use eisenhart::scalar::{seed, Dual};
use eisenhart::systems::{closed_form_damped, ClosedForm};

/// Random expressions over `x1, x2, u, w` built only from operations that
/// stay smooth on the sampling box, so central differences are meaningful.
fn expression() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        Just("x1".to_string()),
        Just("x2".to_string()),
        Just("u".to_string()),
        Just("w".to_string()),
        (-3.0f64..3.0).prop_map(|c| format!("{c:.3}")),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} + {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} - {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} * {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} / (2 + sin({b})))")),
            inner.clone().prop_map(|a| format!("sin({a})")),
            inner.clone().prop_map(|a| format!("cos({a})")),
            inner.clone().prop_map(|a| format!("tanh({a})")),
            inner.clone().prop_map(|a| format!("exp(0.3*tanh({a}))")),
            inner.clone().prop_map(|a| format!("sqrt(1 + {a}^2)")),
            inner.clone().prop_map(|a| format!("log(2 + cos({a}))")),
            inner.clone().prop_map(|a| format!("-{a}")),
            inner.prop_map(|a| format!("{a}^2")),
        ]
    })
}

fn point() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, 4)
}

fn compile(text: &str) -> Field {
    Field::compile("f", text, 2, &BTreeMap::new()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn autodiff_matches_central_differences(text in expression(), p in point()) {
        let f = compile(&text);
        let d: Dual = f.eval_at(&seed(&p).unwrap()).unwrap();
        let h = 1e-6;
        for k in 0..4 {
            let (mut a, mut b) = (p.clone(), p.clone());
            a[k] += h;
            b[k] -= h;
            let fd = (f.eval_at(&a).unwrap() - f.eval_at(&b).unwrap()) / (2.0 * h);
            let ad = d.partial(k);
            prop_assert!((ad - fd).abs() <= 1e-6 * ad.abs().max(1.0), "{text}: d/d{k} {ad} vs {fd}");
        }
    }

    #[test]
    fn dual_value_is_bit_identical_to_real_evaluation(text in expression(), p in point()) {
        let f = compile(&text);
        let d: Dual = f.eval_at(&seed(&p).unwrap()).unwrap();
        let r: f64 = f.eval_at(&p).unwrap();
        prop_assert_eq!(d.value().to_bits(), r.to_bits());
    }

    #[test]
    fn homogeneity_holds_at_random_states(
        which in 0usize..5,
        x in prop::collection::vec(-2.0f64..2.0, 2),
        xp in prop::collection::vec(-2.0f64..2.0, 2),
        u in -2.0f64..2.0,
        w in -2.0f64..2.0,
        udot in 0.05f64..4.0,
    ) {
        let (_, entry) = common::catalog().swap_remove(which);
        let n = entry.system.n();
        let rs = ReducedState::new(x[..n].to_vec(), xp[..n].to_vec(), u, w);
        prop_assert!(homogeneity_residual(&entry.system, &rs, udot).unwrap() <= 1e-12);
    }

    #[test]
    fn lifted_states_are_null(
        which in 0usize..5,
        x in prop::collection::vec(-2.0f64..2.0, 2),
        xp in prop::collection::vec(-2.0f64..2.0, 2),
        u in -2.0f64..2.0,
        w in -2.0f64..2.0,
        udot in 0.05f64..4.0,
    ) {
        let (_, entry) = common::catalog().swap_remove(which);
        let n = entry.system.n();
        let rs = ReducedState::new(x[..n].to_vec(), xp[..n].to_vec(), u, w);
        let gs = lift_state(&entry.system, &rs, udot).unwrap();
        let metric = BrinkmannMetric::new(entry.system.clone());
        let l = null_residual(&metric, &gs).unwrap();
        prop_assert!(l.abs() <= 1e-12 * udot * udot, "L = {l}");
    }

    #[test]
    fn g17_round_trips(bits in any::<u64>()) {
        let v = f64::from_bits(bits);
        prop_assume!(v.is_finite());
        let back: f64 = g17(v).parse().unwrap();
        prop_assert_eq!(back.to_bits(), v.to_bits());
    }

    #[test]
    fn damped_closed_form_reduces_to_harmonic(x0 in -2.0f64..2.0, v0 in -2.0f64..2.0, u in 0.0f64..10.0) {
        let harmonic = ClosedForm::Harmonic { omega: 1.0 }.x(x0, v0, 0.0, u).unwrap();
        prop_assert!((closed_form_damped(x0, v0, 0.0, u).unwrap() - harmonic).abs() < 1e-12);
    }

    #[test]
    fn halton_points_stay_in_bounds(n in 1usize..6, lo in -5.0f64..0.0, width in 0.1f64..5.0) {
        for p in cloud::points(n, lo, lo + width, 100) {
            for c in p.coords() {
                prop_assert!(c >= lo && c <= lo + width);
            }
        }
    }
}
