//! A point feasible for the unscaled step problem, scaled by
//! `φ = 1/(‖W‖² + P_0)`, must be feasible for the fractional cone program.

use proptest::prelude::*;
use satee_core::channel::{generate_channel, ChannelMatrix, GeometryConfig, UserLayout};
use satee_core::metrics::{interference, total_power, PrecodingMatrix, SystemParams};
use satee_core::precoder::initial_precoder;
use satee_core::subproblem::{build_ee_subproblem, taylor_lower_bound, ExpansionPoint};

fn desk(seed: u64, beams: usize, q: usize) -> ChannelMatrix {
    let mut g = GeometryConfig::ka_band_geo(beams);
    g.rng_seed = seed;
    let layout = UserLayout::uniform_in_beams(&g, q, None).unwrap();
    generate_channel(&g, &layout, seed).unwrap()
}

fn transferred_violation(h: &ChannelMatrix, params: &SystemParams, point: &ExpansionPoint, w: &PrecodingMatrix) -> f64 {
    let sp = build_ee_subproblem(h, params, point).unwrap();
    let layout = &sp.layout;
    let phi = 1.0 / (total_power(w) + params.static_power);
    let mut x = vec![0.0; layout.variable_count()];
    layout.put_precoder(&mut x, w, phi);
    x[layout.scale().unwrap()] = phi;
    let mut rates = vec![f64::INFINITY; h.num_beams()];
    for (j, &(n, q)) in layout.active_users().iter().enumerate() {
        // β^(t) still covers the (smaller) interference of a shrunk precoder
        let beta = point.beta().get(n, q);
        assert!(beta >= interference(h, w, n, q) + params.noise_power);
        let bound = taylor_lower_bound(h.row(n, q), &point.w().column(n), point.beta().get(n, q)).unwrap();
        let gamma = bound.evaluate(&w.column(n), beta).max(params.sinr_thresholds[n]);
        x[layout.beta(j)] = phi * beta;
        x[layout.gamma(j)] = phi * gamma;
        rates[n] = rates[n].min(params.log_base.rate(gamma));
    }
    for (n, r) in rates.iter().enumerate() {
        x[layout.rate(n)] = if r.is_finite() { phi * r } else { 0.0 };
    }
    sp.program.max_violation(&x)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn feasible_points_transfer(seed in 0u64..1000, beams in 1usize..5, q in 1usize..3, shrink in 0.5f64..1.0) {
        let h = desk(seed, beams, q);
        let params = SystemParams::for_channel(&h, 25.1, 10.0);
        let w0 = initial_precoder(&h, &params);
        let point = ExpansionPoint::tight(&h, w0.clone(), params.noise_power, 1.1).unwrap();
        // φ^(t)(s·w_t, β_t) = (2s − 1)|h w_t|²/β_t ≥ 0 for s ≥ 1/2
        let mut w = w0;
        w.scale(shrink);
        let v = transferred_violation(&h, &params, &point, &w);
        prop_assert!(v <= 1e-8, "violation {v:e}");
    }
}
