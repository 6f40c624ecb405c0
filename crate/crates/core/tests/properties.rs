use proptest::prelude::*;

use thermovisco::analysis::gn_bound;
use thermovisco::cli::config::{canonical_text, parse_config};
use thermovisco::cli::csv::{parse_series, series_to_csv};
use thermovisco::functionals::{DiagnosticsRow, DiagnosticsSeries};
use thermovisco::gamma::{admissible_b, check_al, check_g2_on_domain, check_g2_sampled, GammaModel, Verdict};

const H: f64 = 1e-5;

fn family() -> impl Strategy<Value = GammaModel> {
    prop_oneof![
        (0.01f64..10.0).prop_map(|c| GammaModel::constant(c).unwrap()),
        (0.1f64..10.0, 0.01f64..0.99, 0.01f64..5.0)
            .prop_map(|(a, frac, alpha)| GammaModel::saturating_exp(a, frac * a, alpha).unwrap()),
        (0.1f64..10.0, 0.01f64..5.0).prop_map(|(a, b)| GammaModel::logarithmic(a, b).unwrap()),
        (0.1f64..5.0, 0.0f64..4.0).prop_map(|(c, p)| GammaModel::power(c, p).unwrap()),
    ]
}

// |fd - exact| <= 1e-6 |exact|, with roundoff of the difference quotient
// (eps |f| / h ~ 1e-11 |f|) absorbed by a floor tied to the differenced quantity.
fn close(fd: f64, exact: f64, differenced: f64) -> bool {
    (fd - exact).abs() <= 1e-6 * exact.abs() + 1e-9 * differenced.abs()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn derivatives_match_central_differences(
        model in family(),
        xis in proptest::collection::vec(H..50.0, 100),
    ) {
        for xi in xis {
            let e = model.eval(xi).unwrap();
            let (lo, hi) = (model.eval(xi - H).unwrap(), model.eval(xi + H).unwrap());
            let d1 = (hi.value - lo.value) / (2.0 * H);
            let d2 = (hi.d1 - lo.d1) / (2.0 * H);
            prop_assert!(close(d1, e.d1, e.value), "{model:?} xi={xi}: d1 {} vs {d1}", e.d1);
            prop_assert!(close(d2, e.d2, e.d1), "{model:?} xi={xi}: d2 {} vs {d2}", e.d2);
        }
    }

    #[test]
    fn analytic_and_sampled_structural_verdicts_agree(model in family(), d in 0.01f64..5.0) {
        let analytic = check_g2_on_domain(&model, d, 100.0).unwrap();
        let sampled = check_g2_sampled(&model, d, 100.0, 10_000).unwrap();
        if analytic.margin.unwrap().abs() > 1e-9 {
            let expect = if analytic.passed() { Verdict::Pass } else { Verdict::Fail };
            prop_assert_eq!(sampled.verdict, expect, "{:?} D={}", model, d);
        }
    }

    #[test]
    fn smallness_condition_is_monotone(
        a in 0.01f64..10.0, len in 0.1f64..3.0, g0 in 0.1f64..5.0, d in 0.1f64..5.0,
        shrink in 0.0f64..1.0, grow in 1.0f64..3.0,
    ) {
        let pass = |a: f64, len: f64, g0: f64| check_al(a, len, &GammaModel::constant(g0).unwrap(), d).unwrap().passed();
        if pass(a, len, g0) {
            prop_assert!(pass(a * shrink.max(1e-3), len, g0));
            prop_assert!(pass(a, len * shrink.max(1e-3), g0));
            prop_assert!(pass(a, len, g0 * grow));
        }
    }

    #[test]
    fn admissible_weight_gives_positive_constants(
        a in 0.01f64..5.0, d in 0.05f64..5.0, g0 in 0.05f64..5.0, len in 0.2f64..3.0,
    ) {
        let lambda1 = std::f64::consts::PI.powi(2) / (len * len);
        if let Ok(adm) = admissible_b(a, d, g0, lambda1) {
            let b = adm.b_chosen;
            prop_assert!(adm.interval.0 < b && b < adm.interval.1);
            let (eta1, eta2) = (((g0 + d) / d).sqrt(), 0.5);
            let c1 = 2.0 * (1.0 - eta2) * a * b - a.powi(3) / (eta1 * d);
            let x = 2.0 * g0 * lambda1 / (g0 + d);
            let y = (2.0 + eta1) * a / (g0 + d) + b / (2.0 * eta2 * a);
            let delta = 0.5 * (1.0 - y / x).min(1.0);
            let c2 = (1.0 - delta) * x - y;
            prop_assert!(c1 > 0.0 && c2 > 0.0 && delta > 0.0, "c1={c1} c2={c2} delta={delta}");
        }
    }

    #[test]
    fn interpolation_bound_on_piecewise_linear(
        knots in proptest::collection::vec(-5.0f64..5.0, 2..12),
        n in 16usize..400,
        alpha in 0.05f64..0.95,
        p in 1.0f64..8.0,
        len in 0.2f64..4.0,
    ) {
        let m = knots.len() - 1;
        let phi: Vec<f64> = (0..n).map(|i| {
            let s = (i as f64 + 0.5) / n as f64 * m as f64;
            let k = (s.floor() as usize).min(m - 1);
            knots[k] + (knots[k + 1] - knots[k]) * (s - k as f64)
        }).collect();
        let r = gn_bound(&phi, alpha, p, len).unwrap();
        prop_assert!(r.holds, "lhs {} rhs {}", r.lhs, r.rhs);
    }

    #[test]
    fn config_parsing_never_panics(text in "\\PC{0,200}") {
        let _ = parse_config(&text);
    }

    #[test]
    fn config_parsing_never_panics_on_plausible_lines(
        lines in proptest::collection::vec(
            (prop_oneof![
                Just("gamma.family"), Just("gamma.A"), Just("gamma.B"), Just("a"), Just("D"),
                Just("grid.n_cells"), Just("grid.length"), Just("time.t_end"), Just("initial.u0.kind"),
                Just("initial.theta0.values"), Just("preset"), Just("mms.target"), Just("bogus"),
            ], "[-0-9a-z_.\"\\[\\], ]{0,12}"),
            0..12,
        )
    ) {
        let text: String = lines.iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
        let _ = parse_config(&text);
    }

    #[test]
    fn csv_round_trip_is_exact(rows in proptest::collection::vec(proptest::array::uniform14(any::<f64>()), 0..20)) {
        let series = DiagnosticsSeries { rows: rows.iter().map(|v| DiagnosticsRow::from_values(*v)).collect() };
        let back = parse_series(&series_to_csv(&series)).unwrap();
        prop_assert_eq!(back.len(), series.len());
        for (a, b) in back.rows.iter().zip(&series.rows) {
            prop_assert_eq!(a.values().map(f64::to_bits), b.values().map(f64::to_bits));
        }
    }

    #[test]
    fn canonical_config_round_trips(
        family_pick in 0usize..4,
        p1 in 0.1f64..5.0, frac in 0.01f64..0.99, p3 in 0.01f64..3.0,
        a in 0.01f64..5.0, d in 0.01f64..5.0, n in 8usize..300, t_end in 0.01f64..50.0,
        amp in -3.0f64..3.0, mode in 0u32..6, scheme in prop_oneof![Just("rk4"), Just("imex")],
        b in proptest::option::of(0.01f64..10.0),
    ) {
        let gamma = match family_pick {
            0 => format!("gamma.family = constant\ngamma.c = {p1:?}\n"),
            1 => format!("gamma.family = saturating_exp\ngamma.A = {p1:?}\ngamma.B = {:?}\ngamma.alpha = {p3:?}\n", frac * p1),
            2 => format!("gamma.family = logarithmic\ngamma.A = {p1:?}\ngamma.B = {p3:?}\n"),
            _ => format!("gamma.family = power\ngamma.c = {p1:?}\ngamma.p = {p3:?}\n"),
        };
        let mut text = format!(
            "{gamma}a = {a:?}\nD = {d:?}\ngrid.length = 1\ngrid.n_cells = {n}\ntime.t_end = {t_end:?}\n\
             time.scheme = {scheme}\ninitial.ut0.kind = cosine_bump\ninitial.ut0.amplitude = {amp:?}\ninitial.ut0.mode = {mode}\n"
        );
        if let Some(b) = b {
            text.push_str(&format!("functional.B = {b:?}\n"));
        }
        let c = parse_config(&text).unwrap().config;
        let canon = canonical_text(&c);
        let again = parse_config(&canon).unwrap().config;
        prop_assert_eq!(canonical_text(&again), canon);
        prop_assert_eq!(again.a, a);
        prop_assert_eq!(again.functional_b, b);
    }
}
