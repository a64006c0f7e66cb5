//! Second-order cumulant model of identical atoms.
//!
//! The state is the moment triple `s = ⟨σz⟩`, `p = ⟨σ₊¹σ₋²⟩`,
//! `z2 = ⟨σz¹σz²⟩`, closed by `⟨σz¹σ₊²σ₋³⟩ ≈ s·p`. Rates are in units where
//! `Γ = Γc`, and `W = w + Γ`, `d0 = (w − Γ)/W`.

use std::io::Write;

use crate::error::{Error, Result};

pub const SWEEP_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairCorrelations {
    pub s: f64,
    pub p: f64,
    pub z2: f64,
    pub d0: f64,
    pub n_atoms: usize,
    pub pump: f64,
    pub gamma_c: f64,
    /// Set when `w < Γc`, where the closure is unreliable.
    pub below_threshold: bool,
}

impl PairCorrelations {
    /// Moments `(s, p, z2)` for `n_atoms` atoms at pump `w`.
    pub fn new(n_atoms: usize, pump: f64, gamma_c: f64, s: f64, p: f64, z2: f64) -> Self {
        PairCorrelations {
            s,
            p,
            z2,
            d0: d0(pump, gamma_c),
            n_atoms,
            pump,
            gamma_c,
            below_threshold: pump < gamma_c,
        }
    }

    /// All atoms in the ground state.
    pub fn ground(n_atoms: usize, pump: f64, gamma_c: f64) -> Self {
        Self::new(n_atoms, pump, gamma_c, -1.0, 0.0, 1.0)
    }

    pub fn triple(&self) -> [f64; 3] {
        [self.s, self.p, self.z2]
    }

    /// Whether the physicality bounds `|s|, |p|, |z2| ≤ 1` hold.
    pub fn is_physical(&self) -> bool {
        self.triple().iter().all(|v| v.abs() <= 1.0 + 1e-12)
    }

    fn with_triple(&self, t: [f64; 3]) -> Self {
        PairCorrelations {
            s: t[0],
            p: t[1],
            z2: t[2],
            ..*self
        }
    }
}

pub fn d0(pump: f64, gamma_c: f64) -> f64 {
    (pump - gamma_c) / (pump + gamma_c)
}

/// Time derivatives `(ds/dt, dp/dt, dz2/dt)`.
pub fn cumulant_rhs(c: &PairCorrelations) -> [f64; 3] {
    rhs(c.n_atoms as f64, c.pump, c.gamma_c, c.triple())
}

fn rhs(n: f64, w: f64, g: f64, [s, p, z2]: [f64; 3]) -> [f64; 3] {
    let big_w = w + g;
    let d0 = (w - g) / big_w;
    [
        -big_w * (s - d0) - 2.0 * g * (n - 1.0) * p,
        -big_w * p + 0.5 * g * (z2 + s) + g * (n - 2.0) * s * p,
        -2.0 * big_w * (z2 - d0 * s) + 4.0 * g * (p - (n - 2.0) * s * p),
    ]
}

fn norm(v: [f64; 3]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Default step budget of [`integrate_to_steady_state`].
pub const DEFAULT_MAX_STEPS: usize = 2_000_000;

/// Integrates the cumulant equations with RK4 until `‖rhs‖ < tolerance·W`.
///
/// The step starts at `0.1/(W + NΓ)`; a step is accepted when it agrees with
/// two half steps to `1e-10` (relative), otherwise it is halved. The step
/// grows again after accepted steps up to the initial size.
pub fn integrate_to_steady_state(init: &PairCorrelations, tolerance: f64) -> Result<PairCorrelations> {
    integrate_with_budget(init, tolerance, DEFAULT_MAX_STEPS)
}

pub fn integrate_with_budget(
    init: &PairCorrelations,
    tolerance: f64,
    max_steps: usize,
) -> Result<PairCorrelations> {
    if !(tolerance > 0.0) {
        return Err(Error::Argument(format!("tolerance must be positive, got {tolerance}")));
    }
    let (n, w, g) = (init.n_atoms as f64, init.pump, init.gamma_c);
    if !(g > 0.0) || !(w >= 0.0) {
        return Err(Error::InvalidParameter(format!("need gamma_c > 0 and w >= 0, got {g}, {w}")));
    }
    let big_w = w + g;
    let h_max = 0.1 / (big_w + n * g);
    let mut h = h_max;
    let mut y = init.triple();
    let f = |y: [f64; 3]| rhs(n, w, g, y);
    let step = |y: [f64; 3], h: f64| -> [f64; 3] {
        let add = |a: [f64; 3], b: [f64; 3], k: f64| [a[0] + k * b[0], a[1] + k * b[1], a[2] + k * b[2]];
        let k1 = f(y);
        let k2 = f(add(y, k1, h / 2.0));
        let k3 = f(add(y, k2, h / 2.0));
        let k4 = f(add(y, k3, h));
        let mut out = y;
        for i in 0..3 {
            out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        out
    };
    for _ in 0..max_steps {
        if norm(f(y)) < tolerance * big_w {
            return Ok(init.with_triple(y));
        }
        let full = step(y, h);
        let half = step(step(y, h / 2.0), h / 2.0);
        let err = (0..3).map(|i| (full[i] - half[i]).abs()).fold(0.0, f64::max);
        if err <= 1e-10 * (1.0 + norm(half)) {
            y = half;
            h = (h * 1.5).min(h_max);
        } else {
            h /= 2.0;
            if h < 1e-300 {
                break;
            }
        }
        if !y.iter().all(|v| v.is_finite()) {
            break;
        }
    }
    Err(Error::NonConvergence {
        steps: max_steps,
        last: y,
    })
}

/// Closed-form steady state of the cumulant equations.
pub fn closed_form_steady_state(n_atoms: usize, pump: f64, gamma_c: f64) -> Result<PairCorrelations> {
    if n_atoms < 3 {
        return Err(Error::UnsupportedSize(format!(
            "closed form needs N >= 3 (got {n_atoms}); use the dense steady-state solver"
        )));
    }
    if pump == 0.0 {
        return Err(Error::DivisionByZero("closed form divides by the pump rate w = 0".into()));
    }
    if !(pump > 0.0) || !(gamma_c > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need w > 0 and gamma_c > 0, got {pump}, {gamma_c}"
        )));
    }
    let (n, w, g) = (n_atoms as f64, pump, gamma_c);
    let big_w = w + g;
    let d0 = (w - g) / big_w;
    let b = w * w + (2.0 - (n - 2.0) * d0) * w * g + (n - 1.0) * (1.0 + d0) * g * g;
    let disc = 4.0 * d0 * (1.0 + d0) * (n - 1.0) * (n - 2.0) * w * g.powi(3) + b * b;
    let p = -big_w / (4.0 * (n - 1.0) * (n - 2.0) * w * g * g) * (b - disc.sqrt());
    let s = d0 - 2.0 * g * (n - 1.0) * p / big_w;
    let z2 = d0 * s + 2.0 * g / big_w * p * (1.0 - (n - 2.0) * s);
    Ok(PairCorrelations::new(n_atoms, pump, gamma_c, s, p, z2))
}

/// Which form of the two-atom diagonal term enters the `⟨J₊J₊J₋J₋⟩` numerator.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DiagonalTerm {
    /// `(1 + 2s + z2)/2`, from the exact ladder-operator algebra.
    #[default]
    Exact,
    /// `(1 + z2 + 2s²)/2`, kept for comparison only.
    Printed,
}

/// `g²(0)` from the pair moments with four-atom factorization.
pub fn g2_zero_semiclassical(c: &PairCorrelations) -> Result<f64> {
    g2_zero_semiclassical_with(c, DiagonalTerm::Exact)
}

pub fn g2_zero_semiclassical_with(c: &PairCorrelations, term: DiagonalTerm) -> Result<f64> {
    let n = c.n_atoms as f64;
    let (s, p, z2) = (c.s, c.p, c.z2);
    let den = n * (s + 1.0) / 2.0 + n * (n - 1.0) * p;
    if den == 0.0 {
        return Err(Error::DivisionByZero("g2(0) undefined: <J+J-> = 0".into()));
    }
    let diag = match term {
        DiagonalTerm::Exact => (1.0 + 2.0 * s + z2) / 2.0,
        DiagonalTerm::Printed => (1.0 + z2 + 2.0 * s * s) / 2.0,
    };
    let num = n * (n - 1.0) * (2.0 * (n - 2.0) * (s + 1.0) * p + diag + (n - 2.0) * (n - 3.0) * p * p);
    Ok(num / (den * den))
}

/// `1 + exp(−τw/π)`.
pub fn thermal_g2(tau: f64, pump: f64) -> f64 {
    1.0 + (-tau * pump / std::f64::consts::PI).exp()
}

/// `2(1 − 1/N)`.
pub fn thermal_g2_zero(n_atoms: usize) -> f64 {
    2.0 * (1.0 - 1.0 / n_atoms as f64)
}

/// One row of a pump sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepPoint {
    pub w_over_gc: f64,
    pub corr: PairCorrelations,
    pub g2_zero: f64,
}

/// Closed-form steady states on a pump grid given in units of `Γc`.
pub fn pump_sweep(n_atoms: usize, gamma_c: f64, w_over_gc: &[f64]) -> Result<Vec<SweepPoint>> {
    w_over_gc
        .iter()
        .map(|&x| {
            let corr = closed_form_steady_state(n_atoms, x * gamma_c, gamma_c)?;
            let g2_zero = g2_zero_semiclassical(&corr).unwrap_or(f64::NAN);
            Ok(SweepPoint {
                w_over_gc: x,
                corr,
                g2_zero,
            })
        })
        .collect()
}

/// `n` points spaced logarithmically in `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Writes `w_over_gc,s,p,z2,g2_zero,flag`; `flag` is `below_threshold` or `ok`.
pub fn write_sweep_csv<W: Write>(out: &mut W, n_atoms: usize, points: &[SweepPoint]) -> Result<()> {
    writeln!(out, "# superrad semiclassical sweep")?;
    writeln!(out, "# schema_version = {SWEEP_SCHEMA_VERSION}")?;
    writeln!(out, "# n_atoms = {n_atoms}")?;
    writeln!(out, "w_over_gc,s,p,z2,g2_zero,flag")?;
    for pt in points {
        let flag = if pt.corr.below_threshold { "below_threshold" } else { "ok" };
        writeln!(
            out,
            "{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{flag}",
            pt.w_over_gc, pt.corr.s, pt.corr.p, pt.corr.z2, pt.g2_zero
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rhs_examples() {
        let c = PairCorrelations::new(10, 1.0, 1.0, 0.0, 0.0, 0.0);
        assert_eq!(cumulant_rhs(&c), [0.0, 0.0, 0.0]);
        let c = PairCorrelations::new(10, 5.0, 1.0, 0.0, 0.0, 0.0);
        let r = cumulant_rhs(&c);
        assert!((r[0] - 4.0).abs() < 1e-14 && r[1] == 0.0 && r[2] == 0.0);
        let d = d0(3.0, 1.0);
        let c = PairCorrelations::new(7, 3.0, 1.0, d, 0.0, d * d);
        let r = cumulant_rhs(&c);
        assert!(r[0].abs() < 1e-15 && r[2].abs() < 1e-15);
        assert!((r[1] - 0.5 * d * (d + 1.0)).abs() < 1e-15);
    }

    #[test]
    fn closed_form_examples() {
        let c = closed_form_steady_state(10, 1.0, 1.0).unwrap();
        assert_eq!(c.d0, 0.0);
        assert!(c.p.abs() < 1e-15 && c.s.abs() < 1e-15);
        let c = closed_form_steady_state(1000, 1e6, 1.0).unwrap();
        assert!(c.s > 0.99 && c.p.abs() < 1e-3, "{c:?}");
        let c = closed_form_steady_state(1000, 500.0, 1.0).unwrap();
        assert!((c.p - 0.125).abs() < 0.05 * 0.125);
        assert!(matches!(closed_form_steady_state(2, 1.0, 1.0), Err(Error::UnsupportedSize(_))));
        assert!(matches!(closed_form_steady_state(5, 0.0, 1.0), Err(Error::DivisionByZero(_))));
        assert!(closed_form_steady_state(5, 0.5, 1.0).unwrap().below_threshold);
    }

    #[test]
    fn integration_matches_closed_form() {
        let cf = closed_form_steady_state(10, 5.0, 1.0).unwrap();
        let ode = integrate_to_steady_state(&PairCorrelations::ground(10, 5.0, 1.0), 1e-12).unwrap();
        for (a, b) in cf.triple().iter().zip(ode.triple()) {
            assert!((a - b).abs() < 1e-8, "{cf:?} vs {ode:?}");
        }
        let at = integrate_to_steady_state(&PairCorrelations::ground(10, 1.0, 1.0), 1e-12).unwrap();
        assert!(at.p.abs() < 1e-9);
    }

    #[test]
    fn non_convergence_reports_state() {
        match integrate_with_budget(&PairCorrelations::ground(10, 5.0, 1.0), 1e-12, 3) {
            Err(Error::NonConvergence { steps: 3, last }) => assert!(last[0] > -1.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn thermal_examples() {
        assert_eq!(thermal_g2(0.0, 3.0), 2.0);
        assert!((thermal_g2(1e6, 3.0) - 1.0).abs() < 1e-15);
        let w = 7.0;
        assert!((thermal_g2(std::f64::consts::PI / w, w) - 1.0 - (-1.0f64).exp()).abs() < 1e-15);
        assert!((thermal_g2_zero(10) - 1.8).abs() < 1e-15);
    }

    #[test]
    fn g2_examples() {
        let c = closed_form_steady_state(10, 100.0, 1.0).unwrap();
        assert!((g2_zero_semiclassical(&c).unwrap() - 1.8).abs() < 0.05);
        let c = closed_form_steady_state(1000, 500.0, 1.0).unwrap();
        assert!((g2_zero_semiclassical(&c).unwrap() - 1.0).abs() < 0.05);
        let mut dark = PairCorrelations::ground(5, 1.0, 1.0);
        dark.p = 0.0;
        assert!(g2_zero_semiclassical(&dark).is_err());
        let c = closed_form_steady_state(10, 5.0, 1.0).unwrap();
        let exact = g2_zero_semiclassical(&c).unwrap();
        let printed = g2_zero_semiclassical_with(&c, DiagonalTerm::Printed).unwrap();
        assert!(exact != printed);
    }

    #[test]
    fn sweep_csv_columns() {
        let pts = pump_sweep(10, 1.0, &[0.5, 2.0]).unwrap();
        let mut buf = Vec::new();
        write_sweep_csv(&mut buf, 10, &pts).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(rows[0], "w_over_gc,s,p,z2,g2_zero,flag");
        assert!(rows[1].ends_with(",below_threshold"));
        assert!(rows[2].ends_with(",ok"));
    }

    proptest! {
        #[test]
        fn closed_form_is_a_fixed_point(n in 3usize..2000, x in 1.01f64..20.0) {
            let w = x * n as f64 / 2.0;
            let w = w.max(1.01);
            let c = closed_form_steady_state(n, w, 1.0).unwrap();
            prop_assert!(norm(cumulant_rhs(&c)) < 1e-8 * (w + 1.0));
            prop_assert!(c.is_physical());
            prop_assert!(c.d0 >= -1.0 && c.d0 < 1.0);
        }

        #[test]
        fn superradiant_window(x in 0.0f64..1.0) {
            // For N = 1000, p > 0 strictly inside Γc < w < NΓc.
            let w = 1.0 + 1e-3 + x * (1000.0 - 2e-3 - 1.0);
            prop_assert!(closed_form_steady_state(1000, w, 1.0).unwrap().p > 0.0);
        }
    }
}
