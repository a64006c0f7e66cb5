//! Reproducible ensembles of independent trajectories and ensemble statistics.
//!
//! Trajectory `i` is seeded with [`trajectory_seed`]`(master_seed, i)`, a
//! splitmix64 finalizer applied to `master_seed` and the counter `i + 1`.
//! Results are collected in index order, so output does not depend on the
//! number of worker threads.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::operators::{obs, ModelKind, OperatorSet};
use crate::propagator::Integrator;
use crate::record::JumpRecord;
use crate::sparse::CsrMatrix;
use crate::state::StateVector;
use crate::trajectory::{ObservableTrace, Sampling, TrajectoryRunner};

/// Default transient discarded before statistics, in units of `1/Γc`.
pub const DEFAULT_BURN_IN: f64 = 10.0;
/// Largest tolerated top-Fock population in the full model.
pub const DEFAULT_CUTOFF_POPULATION_LIMIT: f64 = 1e-6;
/// Minimum number of batches used for error estimates.
pub const MIN_BATCHES: usize = 16;

#[derive(Clone, Debug)]
pub struct EnsembleConfig {
    pub n_trajectories: usize,
    pub duration: f64,
    pub burn_in: f64,
    pub master_seed: u64,
    /// Observables are sampled every `sample_stride` after `burn_in`.
    pub sample_stride: Option<f64>,
    pub observables: Vec<(String, CsrMatrix)>,
    pub integrator: Integrator,
    /// Defaults to all atoms in the ground state and the cavity in vacuum.
    pub initial_state: Option<StateVector>,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
    pub cutoff_population_limit: f64,
}

impl EnsembleConfig {
    pub fn new(n_trajectories: usize, duration: f64, master_seed: u64) -> Self {
        EnsembleConfig {
            n_trajectories,
            duration,
            burn_in: DEFAULT_BURN_IN.min(0.5 * duration),
            master_seed,
            sample_stride: None,
            observables: Vec::new(),
            integrator: Integrator::Auto,
            initial_state: None,
            threads: None,
            cutoff_population_limit: DEFAULT_CUTOFF_POPULATION_LIMIT,
        }
    }

    pub fn with_burn_in(mut self, burn_in: f64) -> Self {
        self.burn_in = burn_in;
        self
    }

    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = Some(threads);
        self
    }

    pub fn with_integrator(mut self, integrator: Integrator) -> Self {
        self.integrator = integrator;
        self
    }

    pub fn with_initial_state(mut self, state: StateVector) -> Self {
        self.initial_state = Some(state);
        self
    }

    pub fn with_sampling(mut self, stride: f64, observables: Vec<(String, CsrMatrix)>) -> Self {
        self.sample_stride = Some(stride);
        self.observables = observables;
        self
    }

    /// Samples the standard moment observables of `ops`.
    pub fn with_moments(self, ops: &OperatorSet, stride: f64) -> Self {
        self.with_sampling(stride, ops.moment_observables())
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_trajectories == 0 {
            return Err(Error::Argument("n_trajectories must be at least 1".into()));
        }
        if !(self.duration > 0.0) || !self.duration.is_finite() {
            return Err(Error::Argument(format!("duration must be positive, got {}", self.duration)));
        }
        if !(self.burn_in >= 0.0) || self.burn_in >= self.duration {
            return Err(Error::Argument(format!(
                "burn_in must lie in [0, duration), got {}",
                self.burn_in
            )));
        }
        if let Some(s) = self.sample_stride {
            if !(s > 0.0) {
                return Err(Error::Argument(format!("sample_stride must be positive, got {s}")));
            }
        }
        if self.threads == Some(0) {
            return Err(Error::Argument("threads must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleResult {
    pub records: Vec<JumpRecord>,
    pub observable_traces: Option<Vec<ObservableTrace>>,
    pub master_seed: u64,
    pub n_trajectories: usize,
    pub burn_in: f64,
    pub max_top_fock_population: f64,
}

/// Seed of trajectory `index`: splitmix64 mixing of
/// `master_seed + (index + 1) · 0x9E3779B97F4A7C15`.
pub fn trajectory_seed(master_seed: u64, index: u64) -> u64 {
    let mut z = master_seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn run_ensemble(ops: &OperatorSet, config: &EnsembleConfig) -> Result<EnsembleResult> {
    config.validate()?;
    let init = match &config.initial_state {
        Some(s) => s.clone(),
        None => StateVector::basis(ops.dimension, ops.ground_index()),
    };
    let runner = TrajectoryRunner::new(ops, config.integrator)?;
    let sampling = config.sample_stride.map(|stride| Sampling {
        stride,
        start: config.burn_in,
        observables: config.observables.clone(),
    });

    let job = || {
        (0..config.n_trajectories)
            .into_par_iter()
            .map(|i| {
                runner
                    .run(
                        &init,
                        config.duration,
                        config.burn_in,
                        trajectory_seed(config.master_seed, i as u64),
                        sampling.as_ref(),
                    )
                    .map_err(|e| Error::Trajectory {
                        index: i,
                        source: Box::new(e),
                    })
            })
            .collect::<Vec<_>>()
    };
    let outputs = match config.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::Internal(format!("cannot build thread pool: {e}")))?
            .install(job),
        None => job(),
    };

    let mut records = Vec::with_capacity(outputs.len());
    let mut traces = Vec::with_capacity(outputs.len());
    let mut max_top = 0.0f64;
    for out in outputs {
        let out = out?;
        max_top = max_top.max(out.max_top_fock_population);
        records.push(out.record);
        if let Some(t) = out.trace {
            traces.push(t);
        }
    }
    if ops.model == ModelKind::Full && max_top > config.cutoff_population_limit {
        return Err(Error::CutoffExceeded {
            population: max_top,
            limit: config.cutoff_population_limit,
        });
    }
    Ok(EnsembleResult {
        records,
        observable_traces: sampling.map(|_| traces),
        master_seed: config.master_seed,
        n_trajectories: config.n_trajectories,
        burn_in: config.burn_in,
        max_top_fock_population: max_top,
    })
}

/// Sample mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeanEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_samples: usize,
}

impl MeanEstimate {
    /// Mean and standard error of independent samples. A single sample has
    /// infinite standard error.
    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        let n = samples.len();
        if n == 0 {
            return Err(Error::EmptyEstimate("no samples".into()));
        }
        let mean = samples.iter().sum::<f64>() / n as f64;
        let std_error = if n < 2 {
            f64::INFINITY
        } else {
            let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        };
        Ok(MeanEstimate {
            mean,
            std_error,
            n_samples: n,
        })
    }

    /// Whether `value` lies within `k` standard errors of the mean.
    pub fn agrees_with(&self, value: f64, k: f64) -> bool {
        (self.mean - value).abs() <= k * self.std_error
    }
}

/// Number of batches each trajectory is cut into so that the whole ensemble
/// yields at least [`MIN_BATCHES`] sampling units.
pub fn batches_per_trajectory(n_trajectories: usize) -> usize {
    MIN_BATCHES.div_ceil(n_trajectories.max(1)).max(1)
}

/// Batch means of the named observables: `out[b][k]` is the time average of
/// observable `names[k]` over batch `b`. Batches are contiguous sample blocks
/// of each trajectory, in trajectory order.
pub fn batch_means(result: &EnsembleResult, names: &[&str]) -> Result<Vec<Vec<f64>>> {
    let traces = result
        .observable_traces
        .as_ref()
        .ok_or_else(|| Error::EmptyEstimate("ensemble has no observable traces".into()))?;
    let per = batches_per_trajectory(traces.len());
    let mut out = Vec::new();
    for tr in traces {
        let series: Vec<&[f64]> = names
            .iter()
            .map(|n| {
                tr.series(n)
                    .ok_or_else(|| Error::Argument(format!("observable {n:?} was not sampled")))
            })
            .collect::<Result<_>>()?;
        let len = tr.times.len();
        let batches = per.min(len);
        for b in 0..batches {
            let (lo, hi) = (b * len / batches, (b + 1) * len / batches);
            out.push(
                series
                    .iter()
                    .map(|s| s[lo..hi].iter().sum::<f64>() / (hi - lo) as f64)
                    .collect(),
            );
        }
    }
    if out.is_empty() {
        return Err(Error::EmptyEstimate("no samples after burn-in".into()));
    }
    Ok(out)
}

/// Ensemble- and time-averaged expectation of a sampled observable.
pub fn observable_mean(result: &EnsembleResult, name: &str) -> Result<MeanEstimate> {
    let b = batch_means(result, &[name])?;
    MeanEstimate::from_samples(&b.iter().map(|v| v[0]).collect::<Vec<_>>())
}

/// Steady-state rate of events on `channel`, counted after burn-in.
pub fn event_rate(result: &EnsembleResult, channel: &str) -> Result<MeanEstimate> {
    let per = batches_per_trajectory(result.records.len());
    let mut rates = Vec::with_capacity(per * result.records.len());
    for rec in &result.records {
        let (t0, t1) = rec.analysis_window();
        if !(t1 > t0) {
            return Err(Error::EmptyEstimate("empty analysis window".into()));
        }
        let times = rec.times(channel);
        let width = (t1 - t0) / per as f64;
        let mut counts = vec![0usize; per];
        for t in times.into_iter().filter(|&t| t >= t0 && t <= t1) {
            counts[(((t - t0) / width) as usize).min(per - 1)] += 1;
        }
        rates.extend(counts.iter().map(|&c| c as f64 / width));
    }
    MeanEstimate::from_samples(&rates)
}

/// Single-atom moments `s = ⟨σz⟩`, `p = ⟨σ₊¹σ₋²⟩`, `z2 = ⟨σz¹σz²⟩` recovered
/// from the collective observables under permutation symmetry.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MomentEstimates {
    pub s: MeanEstimate,
    pub p: MeanEstimate,
    pub z2: MeanEstimate,
}

pub fn moment_estimates(result: &EnsembleResult, n_atoms: usize) -> Result<MomentEstimates> {
    if n_atoms < 2 {
        return Err(Error::UnsupportedSize("pair moments need at least two atoms".into()));
    }
    let b = batch_means(result, &[obs::SZ, obs::JP_JM, obs::SZ_SZ])?;
    let n = n_atoms as f64;
    let pairs = n * (n - 1.0);
    let s: Vec<f64> = b.iter().map(|v| v[0] / n).collect();
    let p: Vec<f64> = b
        .iter()
        .zip(&s)
        .map(|(v, s)| (v[1] - n * (s + 1.0) / 2.0) / pairs)
        .collect();
    let z2: Vec<f64> = b.iter().map(|v| (v[2] - n) / pairs).collect();
    Ok(MomentEstimates {
        s: MeanEstimate::from_samples(&s)?,
        p: MeanEstimate::from_samples(&p)?,
        z2: MeanEstimate::from_samples(&z2)?,
    })
}

/// Ensemble average of `⟨σz^(j)⟩` for every atom, from samples of the
/// individual `σz^(j)` observables named `sz-{j+1}`.
pub fn per_atom_inversion(result: &EnsembleResult, n_atoms: usize) -> Result<Vec<MeanEstimate>> {
    (0..n_atoms)
        .map(|j| observable_mean(result, &per_atom_sz_name(j)))
        .collect()
}

pub fn per_atom_sz_name(atom: usize) -> String {
    format!("sz-{}", atom + 1)
}

/// `σz^(j)` observables named for [`per_atom_inversion`].
pub fn per_atom_sz_observables(ops: &OperatorSet) -> Vec<(String, CsrMatrix)> {
    ops.sigma_z
        .iter()
        .enumerate()
        .map(|(j, m)| (per_atom_sz_name(j), m.clone()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{build_adiabatic_model, CAVITY_CHANNEL};
    use crate::params::SystemParams;
    use crate::trajectory::run_trajectory;

    fn ops(n: usize, w: f64) -> OperatorSet {
        build_adiabatic_model(&SystemParams::with_gamma_c(n, 1.0, 1.0, w)).unwrap()
    }

    #[test]
    fn seeds_are_distinct_and_stable() {
        let seeds: Vec<u64> = (0..1000).map(|i| trajectory_seed(42, i)).collect();
        let mut sorted = seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), seeds.len());
        assert_eq!(trajectory_seed(42, 7), seeds[7]);
        assert_ne!(trajectory_seed(0, 0), 0);
    }

    #[test]
    fn single_trajectory_ensemble_wraps_run_trajectory() {
        let o = ops(2, 1.0);
        let cfg = EnsembleConfig::new(1, 5.0, 9).with_burn_in(1.0);
        let res = run_ensemble(&o, &cfg).unwrap();
        let (rec, _) = run_trajectory(
            &o,
            &StateVector::basis(o.dimension, 0),
            5.0,
            trajectory_seed(9, 0),
        )
        .unwrap();
        assert_eq!(res.records.len(), 1);
        assert_eq!(res.records[0].events, rec.events);
        assert_eq!(res.records[0].burn_in, 1.0);
    }

    #[test]
    fn config_is_validated() {
        let o = ops(2, 1.0);
        assert!(run_ensemble(&o, &EnsembleConfig::new(0, 5.0, 1)).is_err());
        assert!(run_ensemble(&o, &EnsembleConfig::new(1, 5.0, 1).with_burn_in(5.0)).is_err());
        assert!(run_ensemble(&o, &EnsembleConfig::new(1, 5.0, 1).with_threads(0)).is_err());
    }

    #[test]
    fn errors_carry_trajectory_index() {
        let o = ops(2, 1.0);
        let cfg = EnsembleConfig::new(3, 5.0, 1).with_initial_state(StateVector::basis(2, 0));
        match run_ensemble(&o, &cfg) {
            Err(Error::Trajectory { index: 0, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn mean_estimate_basics() {
        let m = MeanEstimate::from_samples(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(m.mean, 2.5);
        assert!((m.std_error - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
        assert!(MeanEstimate::from_samples(&[]).is_err());
        assert!(MeanEstimate::from_samples(&[1.0]).unwrap().std_error.is_infinite());
        assert_eq!(batches_per_trajectory(1), 16);
        assert_eq!(batches_per_trajectory(5), 4);
        assert_eq!(batches_per_trajectory(100), 1);
    }

    #[test]
    fn single_atom_rate_and_inversion() {
        // One pumped two-level atom: P_e = w/(w+Γ), emission rate Γ·P_e.
        let o = ops(1, 1.0);
        let cfg = EnsembleConfig::new(4, 400.0, 3)
            .with_burn_in(5.0)
            .with_sampling(0.1, vec![(obs::SZ.into(), o.sigma_z[0].clone())]);
        let res = run_ensemble(&o, &cfg).unwrap();
        let rate = event_rate(&res, CAVITY_CHANNEL).unwrap();
        assert!(rate.agrees_with(0.5, 4.0), "{rate:?}");
        let sz = observable_mean(&res, obs::SZ).unwrap();
        assert!(sz.agrees_with(0.0, 4.0), "{sz:?}");
    }
}
