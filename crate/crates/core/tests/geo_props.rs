use std::f64::consts::PI;

use geotraj::geo::{
    bloch_coordinates, geometric_phase, phase_accumulation, synth_five_segment,
    synth_five_segment_with, synth_n_segment, trace_waypoints, wrap_angle, GateParams,
    SynthOptions,
};
use geotraj::numkit::distance_up_to_phase;
use geotraj::pulse::{propagate_schedule, Envelope, SegmentStepping};
use geotraj::robustness::ErrorModel;
use proptest::prelude::*;

const MARGIN: f64 = 0.02 * PI;

/// `(p, χ₁, χ₃)` with both parallels kept away from the equator and the loop
/// kept away from zero height.
fn loop_params() -> impl Strategy<Value = (GateParams, f64, f64)> {
    (0.0..=PI, -PI..PI, -PI..PI, 0.0..1.0f64, 0.0..1.0f64)
        .prop_map(|(chi0, xi0, gamma, u1, u3)| {
            let chi1 = u1 * chi0;
            let chi3 = chi0 + u3 * (PI - chi0);
            (GateParams::new(chi0, xi0, gamma).unwrap(), chi1, chi3)
        })
        .prop_filter("parallel near equator or flat loop", |(_, c1, c3)| {
            (c1 - PI / 2.0).abs() >= MARGIN
                && (c3 - PI / 2.0).abs() >= MARGIN
                && c1.cos() - c3.cos() >= 0.2
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn synthesized_loop_matches_gate((p, c1, c3) in loop_params()) {
        let (s, _) = synth_five_segment(&p, c1, c3, 1.0).unwrap();
        let u = propagate_schedule(&s, &ErrorModel::default(), &SegmentStepping::default()).unwrap();
        let d = distance_up_to_phase(&u, &p.unitary()).unwrap().value;
        prop_assert!(d < 1e-6, "distance {d:e}");
    }

    #[test]
    fn propagation_visits_waypoints((p, c1, c3) in loop_params()) {
        let (s, t) = synth_five_segment(&p, c1, c3, 1.0).unwrap();
        let seen = trace_waypoints(&s, t.start(), &SegmentStepping::default()).unwrap();
        for (&(chi, xi), &(wc, wx)) in seen.iter().zip(&t.waypoints) {
            prop_assert!((chi - wc).abs() < 1e-4, "chi {chi} vs {wc}");
            if wc.sin().abs() > 1e-3 {
                prop_assert!(wrap_angle(xi - wx).abs() < 1e-4, "xi {xi} vs {wx}");
            }
        }
    }

    #[test]
    fn overall_phase_is_geometric((p, c1, c3) in loop_params()) {
        let (s, t) = synth_five_segment(&p, c1, c3, 1.0).unwrap();
        let acc = phase_accumulation(&s, &t, &SegmentStepping::default()).unwrap();
        prop_assert!(acc.gamma_d.abs() < 1e-6, "gamma_d {}", acc.gamma_d);
        prop_assert!(acc.residual().abs() < 1e-6, "residual {}", acc.residual());
    }

    #[test]
    fn envelope_swap_keeps_phase((p, c1, c3) in loop_params()) {
        let sq = SynthOptions { envelope: Envelope::Square, ..Default::default() };
        let (s_sine, t) = synth_five_segment(&p, c1, c3, 1.0).unwrap();
        let (s_sq, t_sq) = synth_five_segment_with(&p, c1, c3, 1.0, sq).unwrap();
        prop_assert_eq!(geometric_phase(&t).unwrap(), geometric_phase(&t_sq).unwrap());
        prop_assert!((s_sine.total_area() - s_sq.total_area()).abs() < 1e-12);
        let a = phase_accumulation(&s_sq, &t_sq, &SegmentStepping::default()).unwrap();
        prop_assert!(a.residual().abs() < 1e-6);
        let resynth = synth_n_segment(&t, 1.0, Envelope::Square).unwrap();
        prop_assert_eq!(resynth, s_sq);
    }

    #[test]
    fn bloch_round_trip(chi in 0.01..(PI - 0.01), xi in -3.1..3.1f64) {
        let (c, x) = bloch_coordinates(geotraj::geo::bloch_state(chi, xi)).unwrap();
        prop_assert!((c - chi).abs() < 1e-12 && (x - xi).abs() < 1e-12);
    }
}
