use proptest::prelude::*;
use superrad::oracle::{steady_state_moments, ExactMoments};
use superrad::operators::build_adiabatic_model;
use superrad::semiclassical::{
    closed_form_steady_state, cumulant_rhs, g2_zero_semiclassical, log_grid, PairCorrelations,
};
use superrad::SystemParams;

#[test]
fn pair_correlation_peaks_at_half_the_collective_rate() {
    let n = 1000;
    let grid: Vec<f64> = (0..=20_000).map(|i| 1.0 + i as f64 * (n as f64 - 1.0) / 20_000.0).collect();
    let (w_max, p_max) = grid
        .iter()
        .map(|&w| (w, closed_form_steady_state(n, w, 1.0).unwrap().p))
        .fold((0.0, f64::MIN), |a, b| if b.1 > a.1 { b } else { a });
    assert!((w_max - 500.0).abs() <= 0.02 * 500.0, "peak at {w_max}");
    assert!((p_max - 0.125).abs() < 0.01);
    assert!(closed_form_steady_state(n, 0.9, 1.0).unwrap().p < 0.0);
}

#[test]
fn large_ensembles_factorize() {
    for w in log_grid(1.01, 999.0, 200) {
        let c = closed_form_steady_state(1000, w, 1.0).unwrap();
        assert!((c.z2 - c.s * c.s).abs() <= 0.01, "w = {w}: {c:?}");
    }
}

#[test]
fn strong_pumping_approaches_thermal_from_below() {
    let g: Vec<f64> = [10usize, 100, 1000]
        .iter()
        .map(|&n| {
            let c = closed_form_steady_state(n, 10.0 * n as f64, 1.0).unwrap();
            g2_zero_semiclassical(&c).unwrap()
        })
        .collect();
    assert!(g.windows(2).all(|w| w[1] > w[0]), "{g:?}");
    assert!(g.iter().all(|&x| x < 2.0));
}

fn exact(n: usize, w: f64) -> ExactMoments {
    steady_state_moments(&build_adiabatic_model(&SystemParams::with_gamma_c(n, 1.0, 1.0, w)).unwrap())
        .unwrap()
        .1
}

#[test]
fn closure_tracks_the_exact_three_atom_state() {
    let m = exact(3, 5.0);
    let c = closed_form_steady_state(3, 5.0, 1.0).unwrap();
    let semi = g2_zero_semiclassical(&c).unwrap();
    let g = m.g2_zero.unwrap();
    assert!((semi - g).abs() / g < 0.10, "semiclassical {semi} vs exact {g}");
    let residual = (m.triple.unwrap() - m.s * m.p.unwrap()).abs();
    assert!(residual < 0.05, "triple-moment factorization residual {residual}");
}

#[test]
fn exact_small_ensembles_approach_thermal_statistics() {
    let g = exact(2, 100.0).g2_zero.unwrap();
    assert!((g - 1.0).abs() < 0.05, "{g}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn closed_form_satisfies_the_equations(n in 3usize..1500, frac in 0.0f64..1.0) {
        // Pumps between 1.1 Γc and 10 N Γc.
        let hi = 10.0 * n as f64;
        let w = 1.1 * (hi / 1.1).powf(frac);
        let c = closed_form_steady_state(n, w, 1.0).unwrap();
        let r = cumulant_rhs(&c);
        prop_assert!(r.iter().map(|v| v * v).sum::<f64>().sqrt() < 1e-8 * (w + 1.0));
        prop_assert!(c.p >= 0.0);
    }

    #[test]
    fn rhs_vanishes_on_uncorrelated_inversion(n in 3usize..100, w in 0.01f64..100.0) {
        let d = (w - 1.0) / (w + 1.0);
        let c = PairCorrelations::new(n, w, 1.0, d, 0.0, d * d);
        let r = cumulant_rhs(&c);
        prop_assert!(r[0].abs() < 1e-12 && r[2].abs() < 1e-12);
    }
}
