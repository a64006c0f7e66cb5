//! Intensity-correlation estimators.
//!
//! The histogram estimator works on photon records the way a counting
//! experiment would: every valid trigger photon `t_i` contributes a histogram
//! `n_{i,j}` of later photons in `(t_i + jΔt, t_i + (j+1)Δt]`, normalized by
//! the mean number of photons per bin. A trigger is valid only when its full
//! lag window `t_i + n_lags·Δt` fits inside the analysis window. Error bars are
//! one standard error, treating per-trigger histograms as independent.

use std::io::Write;

use crate::ensemble::{batch_means, EnsembleResult};
use crate::error::{Error, Result};
use crate::operators::{obs, ModelKind, OperatorSet};
use crate::params::Regime;
use crate::record::JumpRecord;
use crate::state::{expectation, StateVector};

pub const G2_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct G2Estimate {
    pub bin_width: f64,
    /// `values[j]` estimates `g²` on bin `j`, i.e. lags in `(jΔt, (j+1)Δt]`.
    pub values: Vec<f64>,
    pub std_errors: Vec<f64>,
    /// Number of valid trigger photons.
    pub n_phot: usize,
    /// Whole bins in the analysis window.
    pub n_bins: usize,
    pub window: (f64, f64),
}

impl G2Estimate {
    /// Lag `jΔt` labelling bin `j`.
    pub fn lags(&self) -> Vec<f64> {
        (0..self.values.len()).map(|j| j as f64 * self.bin_width).collect()
    }

    /// Bin centres `(j + 1/2)Δt`.
    pub fn bin_centres(&self) -> Vec<f64> {
        (0..self.values.len())
            .map(|j| (j as f64 + 0.5) * self.bin_width)
            .collect()
    }
}

/// `g²` histogram of the events on `channel`, pooled over `records`.
///
/// All records must share the same analysis window `[burn_in, total_time]`.
/// Each record is normalized by its own photon rate; pooling per-trigger
/// values then weights records by their photon numbers.
pub fn g2_histogram(
    records: &[JumpRecord],
    channel: &str,
    bin_width: f64,
    n_lags: usize,
) -> Result<G2Estimate> {
    let first = records
        .first()
        .ok_or_else(|| Error::Argument("no records given".into()))?;
    let window = first.analysis_window();
    if records.iter().any(|r| r.analysis_window() != window) {
        return Err(Error::Argument("records have different analysis windows".into()));
    }
    let series: Vec<Vec<f64>> = records.iter().map(|r| r.times(channel)).collect();
    g2_from_times(&series, window, bin_width, n_lags)
}

/// `g²` histogram from raw, sorted event times sharing one window.
pub fn g2_from_times(
    series: &[Vec<f64>],
    window: (f64, f64),
    bin_width: f64,
    n_lags: usize,
) -> Result<G2Estimate> {
    let (t0, t1) = window;
    let length = t1 - t0;
    if !(bin_width > 0.0) || !bin_width.is_finite() {
        return Err(Error::Argument(format!("bin width must be positive, got {bin_width}")));
    }
    if !(length > 0.0) {
        return Err(Error::Argument(format!("empty analysis window [{t0}, {t1}]")));
    }
    if bin_width > length {
        return Err(Error::Argument(format!(
            "bin width {bin_width} exceeds window length {length}"
        )));
    }
    if n_lags == 0 {
        return Err(Error::Argument("n_lags must be at least 1".into()));
    }
    let span = n_lags as f64 * bin_width;

    let mut sum = vec![0.0; n_lags];
    let mut sum_sq = vec![0.0; n_lags];
    let mut n_phot = 0usize;
    let mut counts = vec![0u32; n_lags];
    for times in series {
        let lo = times.partition_point(|&t| t < t0);
        let hi = times.partition_point(|&t| t <= t1);
        let events = &times[lo..hi];
        if events.is_empty() {
            continue;
        }
        let per_bin = events.len() as f64 * bin_width / length;
        for (i, &ti) in events.iter().enumerate() {
            if ti + span > t1 {
                break;
            }
            counts.iter_mut().for_each(|c| *c = 0);
            for &tk in &events[i + 1..] {
                let d = tk - ti;
                if d > span {
                    break;
                }
                if d > 0.0 {
                    let j = (d / bin_width).ceil() as usize - 1;
                    if j < n_lags {
                        counts[j] += 1;
                    }
                }
            }
            for j in 0..n_lags {
                let x = counts[j] as f64 / per_bin;
                sum[j] += x;
                sum_sq[j] += x * x;
            }
            n_phot += 1;
        }
    }
    if n_phot == 0 {
        return Err(Error::EmptyEstimate("no valid trigger photons in the window".into()));
    }
    let n = n_phot as f64;
    let values: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let std_errors = values
        .iter()
        .zip(&sum_sq)
        .map(|(m, s2)| {
            if n_phot < 2 {
                f64::INFINITY
            } else {
                ((s2 - n * m * m).max(0.0) / (n - 1.0) / n).sqrt()
            }
        })
        .collect();
    Ok(G2Estimate {
        bin_width,
        values,
        std_errors,
        n_phot,
        n_bins: (length / bin_width).floor() as usize,
        window,
    })
}

/// Default bin width for a pumping regime, in units of `1/Γc`.
pub fn default_bin_width(regime: Regime, pump: f64, gamma_c: f64) -> f64 {
    match regime {
        Regime::Subradiant | Regime::LowerThreshold => 0.1 / gamma_c,
        Regime::Superradiant => 0.02 / gamma_c,
        Regime::UpperThreshold | Regime::StrongPumping => 0.1 / pump,
    }
}

/// Ratio estimate with a delta-method standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct G2Zero {
    pub value: f64,
    pub std_error: f64,
    pub numerator: f64,
    pub denominator: f64,
}

/// `g²(0)` from ensemble- and time-averaged normally ordered moments:
/// `⟨a†a†aa⟩/⟨a†a⟩²` (full model) or `⟨J₊J₊J₋J₋⟩/⟨J₊J₋⟩²` (adiabatic model).
pub fn g2_zero_from_states(ensemble: &EnsembleResult, ops: &OperatorSet) -> Result<G2Zero> {
    let (num, den) = match ops.model {
        ModelKind::Full => (obs::ADADAA, obs::ADA),
        ModelKind::Adiabatic => (obs::JPP_JMM, obs::JP_JM),
    };
    let b = batch_means(ensemble, &[num, den])?;
    let m = b.len() as f64;
    let mn = b.iter().map(|v| v[0]).sum::<f64>() / m;
    let md = b.iter().map(|v| v[1]).sum::<f64>() / m;
    if !(md > 0.0) {
        return Err(Error::DivisionByZero(
            "g2(0) undefined: zero mean photon flux (dark ensemble)".into(),
        ));
    }
    let value = mn / (md * md);
    let std_error = if b.len() < 2 {
        f64::INFINITY
    } else {
        let (mut vn, mut vd, mut c) = (0.0, 0.0, 0.0);
        for v in &b {
            vn += (v[0] - mn).powi(2);
            vd += (v[1] - md).powi(2);
            c += (v[0] - mn) * (v[1] - md);
        }
        let k = (m - 1.0) * m;
        let (vn, vd, c) = (vn / k, vd / k, c / k);
        let gn = 1.0 / (md * md);
        let gd = -2.0 * mn / (md * md * md);
        (gn * gn * vn + gd * gd * vd + 2.0 * gn * gd * c).max(0.0).sqrt()
    };
    Ok(G2Zero {
        value,
        std_error,
        numerator: mn,
        denominator: md,
    })
}

/// Instantaneous `g²(0)` of a single pure state.
pub fn g2_zero_of_state(state: &StateVector, ops: &OperatorSet) -> Result<f64> {
    let moments = ops.moment_observables();
    let (num, den) = match ops.model {
        ModelKind::Full => (obs::ADADAA, obs::ADA),
        ModelKind::Adiabatic => (obs::JPP_JMM, obs::JP_JM),
    };
    let get = |name: &str| -> Result<f64> {
        let op = &moments.iter().find(|(n, _)| n == name).expect("standard observable").1;
        Ok(expectation(state, op)?.re)
    };
    let d = get(den)?;
    if !(d > 0.0) {
        return Err(Error::DivisionByZero("g2(0) undefined: zero photon flux".into()));
    }
    Ok(get(num)? / (d * d))
}

/// Intensity variance `ΔI² = I²(g²(0) − 1) + B·I` seen by a detector of
/// bandwidth `B`.
pub fn intensity_variance(mean_flux: f64, g2_zero: f64, bandwidth: f64) -> f64 {
    mean_flux * mean_flux * (g2_zero - 1.0) + bandwidth * mean_flux
}

/// Writes `tau,g2,g2_err` with a `#` header.
pub fn write_g2_csv<W: Write>(out: &mut W, est: &G2Estimate) -> Result<()> {
    write_g2_csv_with(out, est, &[])
}

/// As [`write_g2_csv`], with extra named columns evaluated at each lag.
pub fn write_g2_csv_with<W: Write>(out: &mut W, est: &G2Estimate, extra: &[(&str, &dyn Fn(f64) -> f64)]) -> Result<()> {
    writeln!(out, "# superrad g2 estimate")?;
    writeln!(out, "# schema_version = {G2_SCHEMA_VERSION}")?;
    writeln!(out, "# bin_width = {:e}", est.bin_width)?;
    writeln!(out, "# window = {:e} {:e}", est.window.0, est.window.1)?;
    writeln!(out, "# n_phot = {}", est.n_phot)?;
    writeln!(out, "# n_bins = {}", est.n_bins)?;
    writeln!(out, "# error_bars = 1sigma")?;
    write!(out, "tau,g2,g2_err")?;
    for (name, _) in extra {
        write!(out, ",{name}")?;
    }
    writeln!(out)?;
    for ((tau, g), e) in est.lags().iter().zip(&est.values).zip(&est.std_errors) {
        write!(out, "{tau:.10e},{g:.10e},{e:.10e}")?;
        for (_, f) in extra {
            write!(out, ",{:.10e}", f(*tau))?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Result of fitting `g²(τ) = 1 + A·exp(−τ/τc)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExponentialFit {
    pub amplitude: f64,
    pub tau_c: f64,
    pub amplitude_err: f64,
    pub tau_c_err: f64,
    pub reduced_chi_sq: f64,
}

/// Weighted least-squares fit of `1 + A·exp(−τ/τc)` to the histogram,
/// evaluated at bin centres (Levenberg–Marquardt in `(A, ln τc)`).
pub fn fit_exponential_decay(est: &G2Estimate) -> Result<ExponentialFit> {
    let xs = est.bin_centres();
    let pts: Vec<(f64, f64, f64)> = xs
        .iter()
        .zip(&est.values)
        .zip(&est.std_errors)
        .filter(|(_, e)| e.is_finite() && **e > 0.0)
        .map(|((x, y), e)| (*x, *y, 1.0 / (e * e)))
        .collect();
    if pts.len() < 3 {
        return Err(Error::EmptyEstimate("too few bins with finite errors to fit".into()));
    }

    let chi = |a: f64, lt: f64| -> f64 {
        let tc = lt.exp();
        pts.iter()
            .map(|(x, y, w)| w * (y - 1.0 - a * (-x / tc).exp()).powi(2))
            .sum()
    };
    // Initial guess from the first bin and the 1/e crossing.
    let a0 = (est.values[0] - 1.0).abs().max(1e-3) * (est.values[0] - 1.0).signum();
    let a0 = if a0 == 0.0 { 1e-3 } else { a0 };
    let target = 1.0 + a0 / std::f64::consts::E;
    let guess_tc = xs
        .iter()
        .zip(&est.values)
        .find(|(_, v)| (a0 > 0.0 && **v < target) || (a0 < 0.0 && **v > target))
        .map(|(x, _)| *x)
        .unwrap_or(xs[xs.len() / 2]);
    let (mut a, mut lt) = (a0, guess_tc.max(est.bin_width * 0.5).ln());
    let mut cur = chi(a, lt);
    let mut lambda = 1e-3;
    let mut jtj = [[0.0; 2]; 2];
    for _ in 0..500 {
        let tc = lt.exp();
        let mut g = [0.0; 2];
        jtj = [[0.0; 2]; 2];
        for (x, y, w) in &pts {
            let e = (-x / tc).exp();
            let r = y - 1.0 - a * e;
            let d = [e, a * e * x / tc];
            for i in 0..2 {
                g[i] += w * d[i] * r;
                for k in 0..2 {
                    jtj[i][k] += w * d[i] * d[k];
                }
            }
        }
        let mut improved = false;
        while lambda < 1e12 {
            let m = [
                [jtj[0][0] * (1.0 + lambda), jtj[0][1]],
                [jtj[1][0], jtj[1][1] * (1.0 + lambda)],
            ];
            let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
            if det.abs() < f64::MIN_POSITIVE {
                lambda *= 10.0;
                continue;
            }
            let da = (g[0] * m[1][1] - g[1] * m[0][1]) / det;
            let dl = (m[0][0] * g[1] - m[1][0] * g[0]) / det;
            let next = chi(a + da, lt + dl);
            if next.is_finite() && next <= cur {
                let rel = (cur - next) / cur.max(f64::MIN_POSITIVE);
                a += da;
                lt += dl;
                cur = next;
                lambda = (lambda / 10.0).max(1e-12);
                improved = rel > 1e-12;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    let tau_c = lt.exp();
    let det = jtj[0][0] * jtj[1][1] - jtj[0][1] * jtj[1][0];
    let dof = (pts.len() - 2) as f64;
    let (amplitude_err, tau_c_err) = if det > 0.0 {
        ((jtj[1][1] / det).sqrt(), tau_c * (jtj[0][0] / det).sqrt())
    } else {
        (f64::INFINITY, f64::INFINITY)
    };
    if !tau_c.is_finite() || !a.is_finite() {
        return Err(Error::NonConvergence {
            steps: 500,
            last: [a, tau_c, cur],
        });
    }
    Ok(ExponentialFit {
        amplitude: a,
        tau_c,
        amplitude_err,
        tau_c_err,
        reduced_chi_sq: cur / dof.max(1.0),
    })
}
