//! No-jump evolution under `H_eff = H − (i/2) Σ_k L_k† L_k`.
//!
//! The state between jumps is kept normalized while a cumulative survival
//! probability (the squared norm the unnormalized state would have) is
//! tracked separately. A propagator advances until either a requested time
//! is reached or the survival probability falls to the trajectory's random
//! threshold, in which case the crossing time is located by bisection.
//!
//! Three backends share that contract:
//!
//! * [`Integrator::Spectral`]: exact, for `H = 0`. `K = Σ L†L` is
//!   diagonalized once per invariant block; the survival probability is then
//!   a sum of decaying exponentials and no time stepping is needed.
//! * [`Integrator::Exponential`]: exact within a step. Each invariant block
//!   of `H_eff` gets a ladder of propagators `exp(−i H_eff h / 2^l)`; the
//!   crossing is bisected on the dyadic grid.
//! * [`Integrator::RungeKutta`]: fixed-step RK4 on the sparse generator with
//!   `h = 0.01 / max(‖K‖, ‖H‖)`, bisection on the sub-step length.
//!
//! Invariant blocks are the connected components of the sparsity graph of
//! `H` and `K`; a state supported on a set of blocks stays there between
//! jumps.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::operators::OperatorSet;
use crate::sparse::{CsrMatrix, C64};

/// Relative tolerance on located jump times.
pub const JUMP_TIME_RTOL: f64 = 1e-9;
/// Largest admissible growth of the squared norm in one step.
pub const NORM_GROWTH_TOL: f64 = 1e-9;

const LADDER_LEVELS: usize = 30;
const RK4_STEP_FACTOR: f64 = 0.01;
const EXPONENTIAL_STEP_FACTOR: f64 = 10.0;
const MAX_SPECTRAL_BLOCK: usize = 4096;
const MAX_LADDER_ENTRIES: usize = 100_000;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Integrator {
    /// Spectral when `H = 0`, exponential ladder for small blocks, RK4 otherwise.
    #[default]
    Auto,
    Spectral,
    Exponential,
    RungeKutta,
}

#[derive(Clone, Debug)]
struct Blocks {
    members: Vec<Vec<usize>>,
    /// block id of every basis index
    block_of: Vec<usize>,
}

impl Blocks {
    fn new(dim: usize, mats: &[&CsrMatrix]) -> Self {
        let mut parent: Vec<usize> = (0..dim).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for m in mats {
            for (r, c, _) in m.triplets() {
                let (a, b) = (find(&mut parent, r), find(&mut parent, c));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
        let mut id_of_root = vec![usize::MAX; dim];
        let mut members: Vec<Vec<usize>> = Vec::new();
        let mut block_of = vec![0; dim];
        for i in 0..dim {
            let root = find(&mut parent, i);
            if id_of_root[root] == usize::MAX {
                id_of_root[root] = members.len();
                members.push(Vec::new());
            }
            block_of[i] = id_of_root[root];
            members[id_of_root[root]].push(i);
        }
        Blocks { members, block_of }
    }

    fn dense_block(&self, m: &CsrMatrix, b: usize) -> DMatrix<C64> {
        let idx = &self.members[b];
        let mut local = vec![usize::MAX; 0];
        local.resize(m.nrows(), usize::MAX);
        for (k, &i) in idx.iter().enumerate() {
            local[i] = k;
        }
        let mut out = DMatrix::zeros(idx.len(), idx.len());
        for (k, &i) in idx.iter().enumerate() {
            for (j, v) in m.row(i) {
                debug_assert_ne!(local[j], usize::MAX, "entry couples two blocks");
                out[(k, local[j])] += v;
            }
        }
        out
    }

    fn active(&self, psi: &[C64]) -> Vec<usize> {
        let mut seen = vec![false; self.members.len()];
        for (i, a) in psi.iter().enumerate() {
            if a.norm_sqr() > 0.0 {
                seen[self.block_of[i]] = true;
            }
        }
        (0..seen.len()).filter(|&b| seen[b]).collect()
    }

    fn gather(&self, b: usize, psi: &[C64]) -> DVector<C64> {
        DVector::from_iterator(self.members[b].len(), self.members[b].iter().map(|&i| psi[i]))
    }
}

/// Precomputed, immutable data for no-jump evolution of one operator set.
#[derive(Debug)]
pub struct EvolutionPlan {
    dimension: usize,
    kind: PlanKind,
}

#[derive(Debug)]
enum PlanKind {
    Spectral(SpectralPlan),
    Exponential(ExponentialPlan),
    RungeKutta(RkPlan),
}

impl EvolutionPlan {
    pub fn new(ops: &OperatorSet, integrator: Integrator) -> Result<Self> {
        let decay = ops.total_decay();
        let h = &ops.h_coherent;
        let blocks = Blocks::new(ops.dimension, &[h, &decay]);
        let largest = blocks.members.iter().map(Vec::len).max().unwrap_or(0);
        let ladder_entries: usize = blocks.members.iter().map(|m| m.len() * m.len()).sum();
        let resolved = match integrator {
            Integrator::Auto if h.is_zero() && largest <= MAX_SPECTRAL_BLOCK => Integrator::Spectral,
            Integrator::Auto if ladder_entries <= MAX_LADDER_ENTRIES => Integrator::Exponential,
            Integrator::Auto => Integrator::RungeKutta,
            other => other,
        };
        let kind = match resolved {
            Integrator::Spectral => {
                if !h.is_zero() {
                    return Err(Error::Argument(
                        "spectral propagation requires a vanishing coherent Hamiltonian".into(),
                    ));
                }
                PlanKind::Spectral(SpectralPlan::new(blocks, &decay))
            }
            Integrator::Exponential => PlanKind::Exponential(ExponentialPlan::new(blocks, h, &decay)),
            Integrator::RungeKutta | Integrator::Auto => PlanKind::RungeKutta(RkPlan::new(h, &decay)),
        };
        Ok(EvolutionPlan {
            dimension: ops.dimension,
            kind,
        })
    }

    pub fn integrator(&self) -> Integrator {
        match self.kind {
            PlanKind::Spectral(_) => Integrator::Spectral,
            PlanKind::Exponential(_) => Integrator::Exponential,
            PlanKind::RungeKutta(_) => Integrator::RungeKutta,
        }
    }

    pub(crate) fn propagator(&self) -> Box<dyn Propagate + '_> {
        match &self.kind {
            PlanKind::Spectral(p) => Box::new(SpectralProp::new(p)),
            PlanKind::Exponential(p) => Box::new(LadderProp::new(p, self.dimension)),
            PlanKind::RungeKutta(p) => Box::new(RkProp::new(p, self.dimension)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Advance {
    Reached,
    Crossed,
}

pub(crate) trait Propagate {
    /// Starts a new no-jump segment from the normalized state `psi`.
    fn load(&mut self, psi: &[C64]);
    /// Evolves until `until` (time since `load`) or until the survival
    /// probability drops to `threshold`.
    fn advance(&mut self, until: f64, threshold: f64) -> Result<Advance>;
    /// Time elapsed since `load`.
    fn elapsed(&self) -> f64;
    /// Normalized state at the current elapsed time.
    fn write_state(&self, out: &mut [C64]);
}

// ---------------------------------------------------------------------------
// Spectral

#[derive(Debug)]
struct SpectralPlan {
    blocks: Blocks,
    rates: Vec<Vec<f64>>,
    vectors: Vec<DMatrix<C64>>,
}

impl SpectralPlan {
    fn new(blocks: Blocks, decay: &CsrMatrix) -> Self {
        let mut rates = Vec::with_capacity(blocks.members.len());
        let mut vectors = Vec::with_capacity(blocks.members.len());
        for b in 0..blocks.members.len() {
            let k = blocks.dense_block(decay, b);
            let eig = SymmetricEigen::new(k);
            rates.push(eig.eigenvalues.iter().map(|&l| l.max(0.0)).collect());
            vectors.push(eig.eigenvectors);
        }
        SpectralPlan {
            blocks,
            rates,
            vectors,
        }
    }
}

struct SpectralProp<'a> {
    plan: &'a SpectralPlan,
    /// (block, |c_k|², c) for blocks carrying amplitude
    active: Vec<(usize, Vec<f64>, DVector<C64>)>,
    elapsed: f64,
}

impl<'a> SpectralProp<'a> {
    fn new(plan: &'a SpectralPlan) -> Self {
        SpectralProp {
            plan,
            active: Vec::new(),
            elapsed: 0.0,
        }
    }

    fn survival(&self, tau: f64) -> f64 {
        self.active
            .iter()
            .map(|(b, weights, _)| {
                weights
                    .iter()
                    .zip(&self.plan.rates[*b])
                    .map(|(w, l)| w * (-l * tau).exp())
                    .sum::<f64>()
            })
            .sum()
    }

    fn initial_rate(&self) -> f64 {
        self.active
            .iter()
            .map(|(b, w, _)| w.iter().zip(&self.plan.rates[*b]).map(|(w, l)| w * l).sum::<f64>())
            .sum()
    }
}

impl Propagate for SpectralProp<'_> {
    fn load(&mut self, psi: &[C64]) {
        self.elapsed = 0.0;
        let blocks = &self.plan.blocks;
        self.active = blocks
            .active(psi)
            .into_iter()
            .map(|b| {
                let c = self.plan.vectors[b].ad_mul(&blocks.gather(b, psi));
                let w = c.iter().map(|z| z.norm_sqr()).collect();
                (b, w, c)
            })
            .collect();
    }

    fn advance(&mut self, until: f64, threshold: f64) -> Result<Advance> {
        if until <= self.elapsed {
            return Ok(Advance::Reached);
        }
        if self.survival(until) > threshold {
            self.elapsed = until;
            return Ok(Advance::Reached);
        }
        // Bracket the crossing, starting from the first-order guess.
        let mut lo = self.elapsed;
        let rate = self.initial_rate().max(f64::MIN_POSITIVE);
        let mut hi = (lo + (-threshold.ln()) / rate).min(until);
        while hi < until && self.survival(hi) > threshold {
            lo = hi;
            hi = (lo + 2.0 * (hi - self.elapsed).max(f64::MIN_POSITIVE)).min(until);
        }
        while hi - lo > JUMP_TIME_RTOL * hi {
            let mid = 0.5 * (lo + hi);
            if self.survival(mid) > threshold {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        self.elapsed = 0.5 * (lo + hi);
        Ok(Advance::Crossed)
    }

    fn elapsed(&self) -> f64 {
        self.elapsed
    }

    fn write_state(&self, out: &mut [C64]) {
        out.iter_mut().for_each(|a| *a = C64::new(0.0, 0.0));
        let tau = self.elapsed;
        let scale = self.survival(tau).sqrt().recip();
        for (b, _, c) in &self.active {
            let damped = DVector::from_iterator(
                c.len(),
                c.iter()
                    .zip(&self.plan.rates[*b])
                    .map(|(z, l)| z * (-0.5 * l * tau).exp()),
            );
            let local = &self.plan.vectors[*b] * damped;
            for (k, &i) in self.plan.blocks.members[*b].iter().enumerate() {
                out[i] = local[k] * scale;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Exponential ladder

#[derive(Debug)]
struct ExponentialPlan {
    blocks: Blocks,
    step: f64,
    /// ladder[b][l] = exp(−i H_eff step / 2^l) on block b
    ladder: Vec<Vec<DMatrix<C64>>>,
}

impl ExponentialPlan {
    fn new(blocks: Blocks, h: &CsrMatrix, decay: &CsrMatrix) -> Self {
        let bound = decay.max_row_abs_sum().max(h.max_row_abs_sum());
        let step = if bound > 0.0 {
            EXPONENTIAL_STEP_FACTOR / bound
        } else {
            1.0
        };
        let minus_i = C64::new(0.0, -1.0);
        let ladder = (0..blocks.members.len())
            .map(|b| {
                let hb = blocks.dense_block(h, b);
                let kb = blocks.dense_block(decay, b);
                let generator = hb * minus_i - kb * C64::new(0.5, 0.0);
                (0..=LADDER_LEVELS)
                    .map(|l| (&generator * C64::new(step / (1u64 << l) as f64, 0.0)).exp())
                    .collect()
            })
            .collect();
        ExponentialPlan {
            blocks,
            step,
            ladder,
        }
    }

    fn level_length(&self, level: usize) -> f64 {
        self.step / (1u64 << level) as f64
    }
}

struct LadderProp<'a> {
    plan: &'a ExponentialPlan,
    dimension: usize,
    active: Vec<(usize, DVector<C64>)>,
    survival: f64,
    elapsed: f64,
}

impl<'a> LadderProp<'a> {
    fn new(plan: &'a ExponentialPlan, dimension: usize) -> Self {
        LadderProp {
            plan,
            dimension,
            active: Vec::new(),
            survival: 1.0,
            elapsed: 0.0,
        }
    }

    fn apply(&self, level: usize) -> (Vec<DVector<C64>>, f64) {
        let next: Vec<DVector<C64>> = self
            .active
            .iter()
            .map(|(b, v)| &self.plan.ladder[*b][level] * v)
            .collect();
        let norm = next.iter().map(|v| v.norm_squared()).sum();
        (next, norm)
    }

    fn accept(&mut self, next: Vec<DVector<C64>>, norm: f64, dt: f64) {
        let inv = norm.sqrt().recip();
        for ((_, v), n) in self.active.iter_mut().zip(next) {
            *v = n * C64::new(inv, 0.0);
        }
        self.survival *= norm;
        self.elapsed += dt;
    }

    fn check_growth(&self, norm: f64) -> Result<()> {
        if norm > 1.0 + NORM_GROWTH_TOL {
            return Err(Error::IntegratorInstability {
                time: self.elapsed,
                growth: norm - 1.0,
            });
        }
        Ok(())
    }

    /// Takes one substep of the given ladder level; on a crossing, bisects
    /// on the finer levels and returns `true`.
    fn substep(&mut self, level: usize, threshold: f64) -> Result<bool> {
        let (next, norm) = self.apply(level);
        self.check_growth(norm)?;
        if self.survival * norm > threshold {
            self.accept(next, norm, self.plan.level_length(level));
            return Ok(false);
        }
        for finer in level + 1..=LADDER_LEVELS {
            let (next, norm) = self.apply(finer);
            if self.survival * norm > threshold {
                self.accept(next, norm, self.plan.level_length(finer));
            }
        }
        self.elapsed += 0.5 * self.plan.level_length(LADDER_LEVELS);
        Ok(true)
    }
}

impl Propagate for LadderProp<'_> {
    fn load(&mut self, psi: &[C64]) {
        let blocks = &self.plan.blocks;
        self.active = blocks
            .active(psi)
            .into_iter()
            .map(|b| (b, blocks.gather(b, psi)))
            .collect();
        self.survival = 1.0;
        self.elapsed = 0.0;
    }

    fn advance(&mut self, until: f64, threshold: f64) -> Result<Advance> {
        let finest = self.plan.level_length(LADDER_LEVELS);
        while until - self.elapsed >= self.plan.step {
            if self.substep(0, threshold)? {
                return Ok(Advance::Crossed);
            }
        }
        for level in 1..=LADDER_LEVELS {
            if until - self.elapsed >= self.plan.level_length(level) && self.substep(level, threshold)? {
                return Ok(Advance::Crossed);
            }
        }
        debug_assert!(until - self.elapsed < 2.0 * finest);
        self.elapsed = self.elapsed.max(until);
        Ok(Advance::Reached)
    }

    fn elapsed(&self) -> f64 {
        self.elapsed
    }

    fn write_state(&self, out: &mut [C64]) {
        debug_assert_eq!(out.len(), self.dimension);
        out.iter_mut().for_each(|a| *a = C64::new(0.0, 0.0));
        for (b, v) in &self.active {
            for (k, &i) in self.plan.blocks.members[*b].iter().enumerate() {
                out[i] = v[k];
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Runge–Kutta

#[derive(Debug)]
struct RkPlan {
    /// −i H − K/2
    generator: CsrMatrix,
    step: f64,
}

impl RkPlan {
    fn new(h: &CsrMatrix, decay: &CsrMatrix) -> Self {
        let generator = &h.scale(C64::new(0.0, -1.0)) + &decay.scale_real(-0.5);
        let bound = decay.max_row_abs_sum().max(h.max_row_abs_sum());
        let step = if bound > 0.0 { RK4_STEP_FACTOR / bound } else { 1.0 };
        RkPlan { generator, step }
    }
}

struct RkProp<'a> {
    plan: &'a RkPlan,
    psi: Vec<C64>,
    k: [Vec<C64>; 4],
    tmp: Vec<C64>,
    out: Vec<C64>,
    survival: f64,
    elapsed: f64,
}

impl<'a> RkProp<'a> {
    fn new(plan: &'a RkPlan, dim: usize) -> Self {
        let z = vec![C64::new(0.0, 0.0); dim];
        RkProp {
            plan,
            psi: z.clone(),
            k: [z.clone(), z.clone(), z.clone(), z.clone()],
            tmp: z.clone(),
            out: z,
            survival: 1.0,
            elapsed: 0.0,
        }
    }

    /// Writes the RK4 step of length `dt` from `psi` into `out`; returns its squared norm.
    fn rk4(&mut self, dt: f64) -> f64 {
        let g = &self.plan.generator;
        let [k1, k2, k3, k4] = &mut self.k;
        g.mul_vec_into(&self.psi, k1);
        for ((t, p), k) in self.tmp.iter_mut().zip(&self.psi).zip(k1.iter()) {
            *t = p + k * (0.5 * dt);
        }
        g.mul_vec_into(&self.tmp, k2);
        for ((t, p), k) in self.tmp.iter_mut().zip(&self.psi).zip(k2.iter()) {
            *t = p + k * (0.5 * dt);
        }
        g.mul_vec_into(&self.tmp, k3);
        for ((t, p), k) in self.tmp.iter_mut().zip(&self.psi).zip(k3.iter()) {
            *t = p + k * dt;
        }
        g.mul_vec_into(&self.tmp, k4);
        let mut norm = 0.0;
        for i in 0..self.psi.len() {
            let v = self.psi[i] + (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (dt / 6.0);
            norm += v.norm_sqr();
            self.out[i] = v;
        }
        norm
    }

    fn accept(&mut self, norm: f64, dt: f64) {
        let inv = norm.sqrt().recip();
        for (p, o) in self.psi.iter_mut().zip(&self.out) {
            *p = o * inv;
        }
        self.survival *= norm;
        self.elapsed += dt;
    }
}

impl Propagate for RkProp<'_> {
    fn load(&mut self, psi: &[C64]) {
        self.psi.copy_from_slice(psi);
        self.survival = 1.0;
        self.elapsed = 0.0;
    }

    fn advance(&mut self, until: f64, threshold: f64) -> Result<Advance> {
        while self.elapsed < until {
            let dt = self.plan.step.min(until - self.elapsed);
            let norm = self.rk4(dt);
            if norm > 1.0 + NORM_GROWTH_TOL {
                return Err(Error::IntegratorInstability {
                    time: self.elapsed,
                    growth: norm - 1.0,
                });
            }
            if self.survival * norm > threshold {
                self.accept(norm, dt);
                continue;
            }
            let (mut lo, mut hi) = (0.0, dt);
            while hi - lo > JUMP_TIME_RTOL * (self.elapsed + hi) {
                let mid = 0.5 * (lo + hi);
                if self.survival * self.rk4(mid) > threshold {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let mid = 0.5 * (lo + hi);
            let norm = self.rk4(mid);
            self.accept(norm, mid);
            return Ok(Advance::Crossed);
        }
        Ok(Advance::Reached)
    }

    fn elapsed(&self) -> f64 {
        self.elapsed
    }

    fn write_state(&self, out: &mut [C64]) {
        out.copy_from_slice(&self.psi);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{build_adiabatic_model, build_full_model};
    use crate::params::SystemParams;
    use crate::state::norm_sqr;

    fn survival_after(plan: &EvolutionPlan, psi: &[C64], t: f64) -> (f64, Vec<C64>) {
        let mut prop = plan.propagator();
        prop.load(psi);
        // threshold 0: never crosses
        assert_eq!(prop.advance(t, 0.0).unwrap(), Advance::Reached);
        let mut out = vec![C64::new(0.0, 0.0); psi.len()];
        prop.write_state(&mut out);
        (prop.elapsed(), out)
    }

    fn mixed_state(dim: usize) -> Vec<C64> {
        let v: Vec<C64> = (0..dim)
            .map(|i| C64::new(((i * 7 + 3) % 5) as f64 - 2.0, ((i * 3) % 4) as f64 * 0.5))
            .collect();
        let n = norm_sqr(&v).sqrt();
        v.into_iter().map(|a| a / n).collect()
    }

    #[test]
    fn block_decomposition_of_adiabatic_model_is_by_excitation_number() {
        let ops = build_adiabatic_model(&SystemParams::with_gamma_c(4, 1.0, 1.0, 0.5)).unwrap();
        let k = ops.total_decay();
        let blocks = Blocks::new(ops.dimension, &[&ops.h_coherent, &k]);
        let mut sizes: Vec<usize> = blocks.members.iter().map(Vec::len).collect();
        sizes.sort();
        assert_eq!(sizes, vec![1, 1, 4, 4, 6]);
    }

    #[test]
    fn backends_agree_on_no_jump_evolution() {
        let ops = build_adiabatic_model(&SystemParams::with_gamma_c(3, 1.0, 1.0, 0.8)).unwrap();
        let psi = mixed_state(ops.dimension);
        let t = 0.37;
        let results: Vec<_> = [Integrator::Spectral, Integrator::Exponential, Integrator::RungeKutta]
            .into_iter()
            .map(|i| survival_after(&EvolutionPlan::new(&ops, i).unwrap(), &psi, t).1)
            .collect();
        for r in &results[1..] {
            let diff: f64 = r.iter().zip(&results[0]).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            assert!(diff < 1e-9, "diff {diff}");
        }
    }

    #[test]
    fn full_model_ladder_matches_rk4() {
        let p = SystemParams::with_gamma_c(2, 1.0, 5.0, 0.6).with_photon_cutoff(2);
        let ops = build_full_model(&p).unwrap();
        let psi = mixed_state(ops.dimension);
        let (_, a) = survival_after(&EvolutionPlan::new(&ops, Integrator::Exponential).unwrap(), &psi, 0.9);
        let (_, b) = survival_after(&EvolutionPlan::new(&ops, Integrator::RungeKutta).unwrap(), &psi, 0.9);
        let diff: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        assert!(diff < 1e-9, "diff {diff}");
        assert!(EvolutionPlan::new(&ops, Integrator::Spectral).is_err());
        assert_eq!(EvolutionPlan::new(&ops, Integrator::Auto).unwrap().integrator(), Integrator::Exponential);
    }

    #[test]
    fn crossing_times_agree_across_backends() {
        let ops = build_adiabatic_model(&SystemParams::with_gamma_c(2, 1.0, 1.0, 0.3)).unwrap();
        let psi = mixed_state(ops.dimension);
        let times: Vec<f64> = [Integrator::Spectral, Integrator::Exponential, Integrator::RungeKutta]
            .into_iter()
            .map(|i| {
                let plan = EvolutionPlan::new(&ops, i).unwrap();
                let mut prop = plan.propagator();
                prop.load(&psi);
                assert_eq!(prop.advance(100.0, 0.42).unwrap(), Advance::Crossed);
                prop.elapsed()
            })
            .collect();
        for t in &times[1..] {
            assert!((t - times[0]).abs() < 1e-8 * times[0], "{times:?}");
        }
    }

    #[test]
    fn survival_is_monotone_between_jumps() {
        let p = SystemParams::with_gamma_c(2, 1.0, 5.0, 0.6).with_photon_cutoff(2);
        let ops = build_full_model(&p).unwrap();
        let plan = EvolutionPlan::new(&ops, Integrator::RungeKutta).unwrap();
        let mut prop = RkProp::new(match &plan.kind {
            PlanKind::RungeKutta(p) => p,
            _ => unreachable!(),
        }, ops.dimension);
        prop.load(&mixed_state(ops.dimension));
        let mut last = 1.0;
        for k in 1..50 {
            prop.advance(k as f64 * 0.05, 0.0).unwrap();
            assert!(prop.survival <= last);
            last = prop.survival;
        }
    }
}
