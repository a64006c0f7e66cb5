use nalgebra::{DMatrix, DVector};
use superrad::correlation::{g2_histogram, g2_zero_from_states};
use superrad::ensemble::{run_ensemble, EnsembleConfig};
use superrad::operators::{build_adiabatic_model, CAVITY_CHANNEL};
use superrad::oracle::{build_liouvillian, steady_state};
use superrad::sparse::C64;
use superrad::{OperatorSet, SystemParams};

/// Exact `g²(τ)` by the quantum regression theorem on the dense Liouvillian.
fn exact_g2(ops: &OperatorSet, taus: &[f64]) -> Vec<f64> {
    let l = build_liouvillian(ops).unwrap();
    let rho = steady_state(&l).unwrap();
    let (jm, jp) = (ops.j_minus.to_dense(), ops.j_plus.to_dense());
    let jpjm = &jp * &jm;
    let seed = &jm * &rho.entries * &jp;
    let flux = (&jpjm * &rho.entries).trace().re;
    let gen = l.matrix.to_dense();
    let d = ops.dimension;
    taus.iter()
        .map(|&t| {
            let v = (&gen * C64::new(t, 0.0)).exp() * DVector::from_column_slice(seed.as_slice());
            let x = DMatrix::from_column_slice(d, d, v.as_slice());
            (&jpjm * x).trace().re / (flux * flux)
        })
        .collect()
}

/// Bin average of `g²` over `(a, b]` by Simpson's rule.
fn bin_average(ops: &OperatorSet, a: f64, b: f64) -> f64 {
    let g = exact_g2(ops, &[a, 0.5 * (a + b), b]);
    (g[0] + 4.0 * g[1] + g[2]) / 6.0
}

#[test]
fn histogram_agrees_with_state_estimate_at_zero_lag() {
    let (n, w) = (3, 2.0);
    let ops = build_adiabatic_model(&SystemParams::with_gamma_c(n, 1.0, 1.0, w)).unwrap();
    let cfg = EnsembleConfig::new(16, 1010.0, 77).with_burn_in(10.0).with_moments(&ops, 0.1);
    let res = run_ensemble(&ops, &cfg).unwrap();
    let bw = 0.05 / n as f64;
    let hist = g2_histogram(&res.records, CAVITY_CHANNEL, bw, 1).unwrap();
    let states = g2_zero_from_states(&res, &ops).unwrap();
    let se = hist.std_errors[0].hypot(states.std_error);
    assert!(
        (hist.values[0] - states.value).abs() <= 3.0 * se,
        "histogram {} ± {} vs states {} ± {}",
        hist.values[0],
        hist.std_errors[0],
        states.value,
        states.std_error
    );
}

#[test]
fn histogram_follows_exact_two_time_correlation() {
    let (n, w) = (3, 5.0);
    let ops = build_adiabatic_model(&SystemParams::with_gamma_c(n, 1.0, 1.0, w)).unwrap();
    let cfg = EnsembleConfig::new(8, 1010.0, 4242).with_burn_in(10.0);
    let res = run_ensemble(&ops, &cfg).unwrap();
    let bw = 0.1;
    let hist = g2_histogram(&res.records, CAVITY_CHANNEL, bw, 8).unwrap();
    for (j, (v, e)) in hist.values.iter().zip(&hist.std_errors).enumerate() {
        let exact = bin_average(&ops, j as f64 * bw, (j + 1) as f64 * bw);
        assert!((v - exact).abs() <= 4.0 * e, "bin {j}: {v} ± {e} vs exact {exact}");
    }
}

#[test]
fn long_lags_are_uncorrelated() {
    let (n, w) = (3, 2.0);
    let ops = build_adiabatic_model(&SystemParams::with_gamma_c(n, 1.0, 1.0, w)).unwrap();
    let res = run_ensemble(&ops, &EnsembleConfig::new(8, 1010.0, 5150).with_burn_in(10.0)).unwrap();
    // Lags from 5 to 10, far beyond max(1/w, 1/(NΓc)).
    let hist = g2_histogram(&res.records, CAVITY_CHANNEL, 0.5, 20).unwrap();
    for (v, e) in hist.values.iter().zip(&hist.std_errors).skip(10) {
        assert!((v - 1.0).abs() <= 3.5 * e, "{v} ± {e}");
    }
}

#[test]
fn records_with_different_windows_are_rejected() {
    let ops = build_adiabatic_model(&SystemParams::with_gamma_c(2, 1.0, 1.0, 2.0)).unwrap();
    let a = run_ensemble(&ops, &EnsembleConfig::new(1, 20.0, 1).with_burn_in(1.0)).unwrap();
    let b = run_ensemble(&ops, &EnsembleConfig::new(1, 30.0, 1).with_burn_in(1.0)).unwrap();
    let both = [a.records[0].clone(), b.records[0].clone()];
    assert!(matches!(
        g2_histogram(&both, CAVITY_CHANNEL, 0.1, 2),
        Err(superrad::Error::Argument(_))
    ));
}

#[test]
fn single_atom_light_is_antibunched() {
    let ops = build_adiabatic_model(&SystemParams::with_gamma_c(1, 1.0, 1.0, 2.0)).unwrap();
    let cfg = EnsembleConfig::new(4, 110.0, 8).with_burn_in(10.0).with_moments(&ops, 0.1);
    let res = run_ensemble(&ops, &cfg).unwrap();
    assert_eq!(g2_zero_from_states(&res, &ops).unwrap().value, 0.0);
}
