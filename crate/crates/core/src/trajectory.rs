//! Single quantum-jump trajectories.
//!
//! Between jumps the state follows `H_eff`; a jump happens when the no-jump
//! survival probability falls to a uniform random threshold `r ∈ (0, 1)`.
//! Channel `k` is then chosen with probability `‖L_k ψ‖² / Σ_j ‖L_j ψ‖²` and
//! the state replaced by the normalized `L_k ψ`. Per jump the generator draws
//! exactly two uniforms, threshold first, so every backend consumes the same
//! random stream.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::operators::OperatorSet;
use crate::propagator::{Advance, EvolutionPlan, Integrator};
use crate::record::{JumpEvent, JumpRecord};
use crate::sparse::{CsrMatrix, C64};
use crate::state::{norm_sqr, StateVector};

/// Observable sampling on the grid `t = k · stride`, `t ≥ start`.
#[derive(Clone, Debug)]
pub struct Sampling {
    pub stride: f64,
    pub start: f64,
    pub observables: Vec<(String, CsrMatrix)>,
}

/// Sampled expectation values of one trajectory.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ObservableTrace {
    pub names: Vec<String>,
    pub times: Vec<f64>,
    /// `values[k][i]` is observable `k` at `times[i]`.
    pub values: Vec<Vec<f64>>,
}

impl ObservableTrace {
    pub fn series(&self, name: &str) -> Option<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|k| self.values[k].as_slice())
    }
}

#[derive(Clone, Debug)]
pub struct TrajectoryOutput {
    pub record: JumpRecord,
    pub final_state: StateVector,
    pub trace: Option<ObservableTrace>,
    /// Largest population of the top Fock level seen at jumps and samples.
    pub max_top_fock_population: f64,
}

/// Runs one trajectory with the automatically chosen integrator.
pub fn run_trajectory(
    ops: &OperatorSet,
    init: &StateVector,
    duration: f64,
    seed: u64,
) -> Result<(JumpRecord, StateVector)> {
    let runner = TrajectoryRunner::new(ops, Integrator::Auto)?;
    let out = runner.run(init, duration, 0.0, seed, None)?;
    Ok((out.record, out.final_state))
}

/// Reusable trajectory driver; the evolution plan is built once and shared.
pub struct TrajectoryRunner<'a> {
    ops: &'a OperatorSet,
    plan: EvolutionPlan,
}

impl<'a> TrajectoryRunner<'a> {
    pub fn new(ops: &'a OperatorSet, integrator: Integrator) -> Result<Self> {
        Ok(TrajectoryRunner {
            ops,
            plan: EvolutionPlan::new(ops, integrator)?,
        })
    }

    pub fn integrator(&self) -> Integrator {
        self.plan.integrator()
    }

    pub fn ops(&self) -> &OperatorSet {
        self.ops
    }

    pub fn run(
        &self,
        init: &StateVector,
        duration: f64,
        burn_in: f64,
        seed: u64,
        sampling: Option<&Sampling>,
    ) -> Result<TrajectoryOutput> {
        let ops = self.ops;
        let dim = ops.dimension;
        if init.dimension() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: init.dimension(),
            });
        }
        if !(duration > 0.0) || !duration.is_finite() {
            return Err(Error::Argument(format!("duration must be positive, got {duration}")));
        }
        let n0 = init.norm_sqr();
        if (n0 - 1.0).abs() > 1e-10 {
            return Err(Error::Argument(format!("initial state is not normalized (|psi|^2 = {n0})")));
        }
        if let Some(s) = sampling {
            if !(s.stride > 0.0) {
                return Err(Error::Argument("sample stride must be positive".into()));
            }
        }

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut prop = self.plan.propagator();
        let mut psi = init.amplitudes.clone();
        let mut branches = vec![vec![C64::new(0.0, 0.0); dim]; ops.jump_channels.len()];
        let mut weights = vec![0.0; ops.jump_channels.len()];
        let mut events = Vec::new();
        let mut max_top = ops.top_fock_population(&psi);

        let mut trace = sampling.map(|s| ObservableTrace {
            names: s.observables.iter().map(|(n, _)| n.clone()).collect(),
            times: Vec::new(),
            values: vec![Vec::new(); s.observables.len()],
        });
        let mut sample_index =
            sampling.map_or(0, |s| (s.start.max(init.time) / s.stride).ceil().max(0.0) as u64);
        let sample_time = |k: u64| sampling.map_or(f64::INFINITY, |s| k as f64 * s.stride);

        let mut t_ref = init.time;
        let end = init.time + duration;
        prop.load(&psi);
        let mut threshold = draw_open_unit(&mut rng);

        loop {
            let target = sample_time(sample_index).min(end);
            match prop.advance(target - t_ref, threshold)? {
                Advance::Reached => {
                    if target == sample_time(sample_index) {
                        prop.write_state(&mut psi);
                        max_top = max_top.max(ops.top_fock_population(&psi));
                        if let (Some(tr), Some(s)) = (trace.as_mut(), sampling) {
                            tr.times.push(target);
                            for (k, (_, op)) in s.observables.iter().enumerate() {
                                tr.values[k].push(op.quadratic_form(&psi).re);
                            }
                        }
                        sample_index += 1;
                    }
                    if target >= end {
                        break;
                    }
                }
                Advance::Crossed => {
                    let mut t_jump = t_ref + prop.elapsed();
                    if let Some(last) = events.last().map(|e: &JumpEvent| e.time) {
                        if t_jump <= last {
                            t_jump = last.next_up();
                        }
                    }
                    prop.write_state(&mut psi);
                    max_top = max_top.max(ops.top_fock_population(&psi));
                    for (k, ch) in ops.jump_channels.iter().enumerate() {
                        ch.operator.mul_vec_into(&psi, &mut branches[k]);
                        weights[k] = norm_sqr(&branches[k]);
                    }
                    let total: f64 = weights.iter().sum();
                    if !(total > 0.0) {
                        return Err(Error::Internal(format!(
                            "zero total jump weight at t = {t_jump}"
                        )));
                    }
                    let pick = rng.random::<f64>() * total;
                    let mut acc = 0.0;
                    let mut chosen = weights.len() - 1;
                    for (k, w) in weights.iter().enumerate() {
                        acc += w;
                        if pick < acc && *w > 0.0 {
                            chosen = k;
                            break;
                        }
                    }
                    if weights[chosen] == 0.0 {
                        chosen = weights.iter().rposition(|w| *w > 0.0).unwrap_or(chosen);
                    }
                    let inv = weights[chosen].sqrt().recip();
                    for (p, b) in psi.iter_mut().zip(&branches[chosen]) {
                        *p = b * inv;
                    }
                    max_top = max_top.max(ops.top_fock_population(&psi));
                    events.push(JumpEvent {
                        time: t_jump,
                        channel: chosen,
                    });
                    t_ref = t_jump;
                    prop.load(&psi);
                    threshold = draw_open_unit(&mut rng);
                }
            }
        }

        prop.write_state(&mut psi);
        let record = JumpRecord {
            events,
            channels: ops.jump_channels.iter().map(|c| c.label.clone()).collect(),
            total_time: end,
            burn_in,
            seed,
            model: ops.model,
            params: ops.params.clone(),
        };
        Ok(TrajectoryOutput {
            record,
            final_state: StateVector {
                amplitudes: psi,
                time: end,
            },
            trace,
            max_top_fock_population: max_top,
        })
    }
}

fn draw_open_unit(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{build_adiabatic_model, build_full_model, CAVITY_CHANNEL};
    use crate::params::SystemParams;

    fn single_atom(pump: f64) -> OperatorSet {
        build_adiabatic_model(&SystemParams::with_gamma_c(1, 1.0, 1.0, pump)).unwrap()
    }

    #[test]
    fn excited_atom_decays_exactly_once() {
        let ops = single_atom(0.0);
        let init = StateVector::basis(2, 1);
        for seed in 0..20 {
            let (rec, fin) = run_trajectory(&ops, &init, 50.0, seed).unwrap();
            assert_eq!(rec.events.len(), 1);
            assert_eq!(rec.label(&rec.events[0]), CAVITY_CHANNEL);
            assert!((fin.amplitudes[0].norm() - 1.0).abs() < 1e-12);
            rec.validate().unwrap();
        }
    }

    #[test]
    fn ground_atom_without_pump_stays_dark() {
        let ops = single_atom(0.0);
        let (rec, _) = run_trajectory(&ops, &StateVector::basis(2, 0), 50.0, 3).unwrap();
        assert!(rec.events.is_empty());
    }

    #[test]
    fn decoupled_cavity_never_emits() {
        let mut p = SystemParams::with_gamma_c(2, 1.0, 10.0, 2.0).with_photon_cutoff(1);
        p.coupling = 0.0;
        let ops = build_full_model(&p).unwrap();
        let (rec, _) = run_trajectory(&ops, &StateVector::basis(ops.dimension, 0), 20.0, 11).unwrap();
        assert_eq!(rec.count(CAVITY_CHANNEL), 0);
        assert!(rec.count("pump-1") + rec.count("pump-2") > 0);
    }

    #[test]
    fn same_seed_same_record_and_backends_agree() {
        let ops = build_adiabatic_model(&SystemParams::with_gamma_c(2, 1.0, 1.0, 1.5)).unwrap();
        let init = StateVector::basis(ops.dimension, 0);
        let run = |i| {
            TrajectoryRunner::new(&ops, i)
                .unwrap()
                .run(&init, 5.0, 0.0, 77, None)
                .unwrap()
                .record
        };
        let a = run(Integrator::Spectral);
        assert_eq!(a, run(Integrator::Spectral));
        assert!(!a.events.is_empty());
        for other in [run(Integrator::Exponential), run(Integrator::RungeKutta)] {
            assert_eq!(other.events.len(), a.events.len());
            for (x, y) in other.events.iter().zip(&a.events) {
                assert_eq!(x.channel, y.channel);
                assert!((x.time - y.time).abs() < 1e-7 * x.time.max(1.0));
            }
        }
    }

    #[test]
    fn samples_follow_the_grid() {
        let ops = single_atom(1.0);
        let sampling = Sampling {
            stride: 0.5,
            start: 1.2,
            observables: vec![("sz".into(), ops.sigma_z[0].clone())],
        };
        let runner = TrajectoryRunner::new(&ops, Integrator::Auto).unwrap();
        let out = runner
            .run(&StateVector::basis(2, 0), 3.0, 1.0, 5, Some(&sampling))
            .unwrap();
        let tr = out.trace.unwrap();
        assert_eq!(tr.times, vec![1.5, 2.0, 2.5, 3.0]);
        assert!(tr.series("sz").unwrap().iter().all(|v| v.abs() <= 1.0 + 1e-12));
    }

    #[test]
    fn rejects_bad_arguments() {
        let ops = single_atom(1.0);
        assert!(run_trajectory(&ops, &StateVector::basis(2, 0), 0.0, 1).is_err());
        assert!(run_trajectory(&ops, &StateVector::basis(4, 0), 1.0, 1).is_err());
        let mut unnormalized = StateVector::basis(2, 0);
        unnormalized.amplitudes[1] = C64::new(1.0, 0.0);
        assert!(run_trajectory(&ops, &unnormalized, 1.0, 1).is_err());
    }
}
