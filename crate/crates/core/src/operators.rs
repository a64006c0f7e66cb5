//! Operator sets for the two models.
//!
//! # Basis convention
//!
//! Atoms are numbered `0..N` in code (`1..=N` in channel labels). An atomic
//! configuration is the integer `c = Σ_j b_j 2^j` where bit `b_j = 1` means
//! atom `j` is excited. The full model orders its basis as
//! (atom configuration) ⊗ (Fock index):
//!
//! ```text
//! index = c * (photon_cutoff + 1) + n
//! ```
//!
//! so the all-ground vacuum is index 0. The adiabatic model uses `index = c`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::SystemParams;
use crate::sparse::{CsrMatrix, C64};

/// Default ceiling on Hilbert-space dimension when building operators.
pub const DEFAULT_MAX_DIMENSION: usize = 1 << 20;

pub const CAVITY_CHANNEL: &str = "cavity";

pub fn pump_channel_label(atom: usize) -> String {
    format!("pump-{}", atom + 1)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Full,
    Adiabatic,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Full => "full",
            ModelKind::Adiabatic => "adiabatic",
        })
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(ModelKind::Full),
            "adiabatic" => Ok(ModelKind::Adiabatic),
            other => Err(Error::Config(format!("unknown model tag '{other}'"))),
        }
    }
}

/// A jump operator with its rate already folded in (`L = √rate · O`).
#[derive(Clone, Debug)]
pub struct JumpChannel {
    pub label: String,
    pub operator: CsrMatrix,
}

/// Immutable operator set of a built model; safe to share across threads.
#[derive(Clone, Debug)]
pub struct OperatorSet {
    pub model: ModelKind,
    pub params: SystemParams,
    pub n_atoms: usize,
    /// Fock cutoff of the full model, `None` for the adiabatic model.
    pub photon_cutoff: Option<usize>,
    pub dimension: usize,
    /// Cavity annihilation operator; absent in the adiabatic model.
    pub annihilate: Option<CsrMatrix>,
    pub j_plus: CsrMatrix,
    pub j_minus: CsrMatrix,
    pub j_z: CsrMatrix,
    pub sigma_plus: Vec<CsrMatrix>,
    pub sigma_minus: Vec<CsrMatrix>,
    pub sigma_z: Vec<CsrMatrix>,
    pub h_coherent: CsrMatrix,
    pub jump_channels: Vec<JumpChannel>,
}

#[derive(Clone, Copy)]
enum SpinOp {
    Lower,
    Raise,
    Z,
}

fn atom_operator(n_atoms: usize, atom: usize, op: SpinOp) -> CsrMatrix {
    let dim = 1usize << n_atoms;
    let bit = 1usize << atom;
    let one = C64::new(1.0, 0.0);
    let triplets = (0..dim).filter_map(move |c| match op {
        // σ₋ = |g⟩⟨e|: column c has the bit set, row c without it.
        SpinOp::Lower => (c & bit != 0).then_some((c ^ bit, c, one)),
        SpinOp::Raise => (c & bit == 0).then_some((c | bit, c, one)),
        SpinOp::Z => Some((c, c, if c & bit != 0 { one } else { -one })),
    });
    CsrMatrix::from_triplets(dim, dim, triplets)
}

fn fock_annihilation(cutoff: usize) -> CsrMatrix {
    let dim = cutoff + 1;
    CsrMatrix::from_triplets(
        dim,
        dim,
        (1..dim).map(|n| (n - 1, n, C64::new((n as f64).sqrt(), 0.0))),
    )
}

fn atomic_dimension(n_atoms: usize) -> Result<usize> {
    u32::try_from(n_atoms)
        .ok()
        .and_then(|n| 1usize.checked_shl(n))
        .filter(|_| n_atoms < usize::BITS as usize)
        .ok_or(Error::Capacity {
            what: "atomic Hilbert space 2^N",
            required: u128::MAX,
            limit: usize::MAX as u128,
        })
}

fn check_dimension(dim: u128, limit: usize) -> Result<usize> {
    if dim > limit as u128 {
        return Err(Error::Capacity {
            what: "Hilbert-space dimension",
            required: dim,
            limit: limit as u128,
        });
    }
    Ok(dim as usize)
}

struct AtomicOps {
    sigma_plus: Vec<CsrMatrix>,
    sigma_minus: Vec<CsrMatrix>,
    sigma_z: Vec<CsrMatrix>,
}

impl AtomicOps {
    fn new(n_atoms: usize, lift: impl Fn(CsrMatrix) -> CsrMatrix) -> Self {
        let build = |op| (0..n_atoms).map(|j| lift(atom_operator(n_atoms, j, op))).collect();
        AtomicOps {
            sigma_plus: build(SpinOp::Raise),
            sigma_minus: build(SpinOp::Lower),
            sigma_z: build(SpinOp::Z),
        }
    }

    fn collective(&self, dim: usize) -> (CsrMatrix, CsrMatrix, CsrMatrix) {
        let sum = |ops: &[CsrMatrix]| {
            ops.iter()
                .fold(CsrMatrix::zeros(dim, dim), |acc, op| &acc + op)
        };
        let j_plus = sum(&self.sigma_plus);
        let j_minus = sum(&self.sigma_minus);
        let j_z = sum(&self.sigma_z).scale_real(0.5);
        (j_plus, j_minus, j_z)
    }

    fn pump_channels(&self, pump: f64) -> impl Iterator<Item = JumpChannel> + '_ {
        let amp = pump.sqrt();
        self.sigma_plus
            .iter()
            .enumerate()
            .map(move |(j, sp)| JumpChannel {
                label: pump_channel_label(j),
                operator: sp.scale_real(amp),
            })
    }
}

/// Full atom–cavity model in the frame rotating at the atomic frequency:
/// `H = δ a†a + (g/2)(a†J₋ + J₊a)`, channels `√κ a` and `√w σ₊⁽ʲ⁾`.
pub fn build_full_model(params: &SystemParams) -> Result<OperatorSet> {
    build_full_model_bounded(params, DEFAULT_MAX_DIMENSION)
}

pub fn build_full_model_bounded(params: &SystemParams, max_dimension: usize) -> Result<OperatorSet> {
    params.validate_full()?;
    let atom_dim = atomic_dimension(params.n_atoms)?;
    let fock_dim = params.photon_cutoff + 1;
    let dim = check_dimension(atom_dim as u128 * fock_dim as u128, max_dimension)?;

    let id_field = CsrMatrix::identity(fock_dim);
    let atoms = AtomicOps::new(params.n_atoms, |op| op.kron(&id_field));
    let (j_plus, j_minus, j_z) = atoms.collective(dim);
    let a = CsrMatrix::identity(atom_dim).kron(&fock_annihilation(params.photon_cutoff));
    let a_dag = a.adjoint();

    let number = &a_dag * &a;
    let exchange = &(&a_dag * &j_minus) + &(&j_plus * &a);
    let h_coherent = &number.scale_real(params.detuning) + &exchange.scale_real(params.coupling / 2.0);

    let mut jump_channels = vec![JumpChannel {
        label: CAVITY_CHANNEL.to_string(),
        operator: a.scale_real(params.kappa.sqrt()),
    }];
    jump_channels.extend(atoms.pump_channels(params.pump));

    Ok(OperatorSet {
        model: ModelKind::Full,
        params: params.clone(),
        n_atoms: params.n_atoms,
        photon_cutoff: Some(params.photon_cutoff),
        dimension: dim,
        annihilate: Some(a),
        j_plus,
        j_minus,
        j_z,
        sigma_plus: atoms.sigma_plus,
        sigma_minus: atoms.sigma_minus,
        sigma_z: atoms.sigma_z,
        h_coherent,
        jump_channels,
    })
}

/// Atoms-only model after adiabatic elimination of the field: `H = 0`,
/// channels `√Γ_c J₋` (the photon record) and `√w σ₊⁽ʲ⁾`.
pub fn build_adiabatic_model(params: &SystemParams) -> Result<OperatorSet> {
    build_adiabatic_model_bounded(params, DEFAULT_MAX_DIMENSION)
}

pub fn build_adiabatic_model_bounded(
    params: &SystemParams,
    max_dimension: usize,
) -> Result<OperatorSet> {
    params.validate()?;
    let gamma_c = params.gamma_c()?;
    let dim = check_dimension(atomic_dimension(params.n_atoms)? as u128, max_dimension)?;
    let atoms = AtomicOps::new(params.n_atoms, |op| op);
    let (j_plus, j_minus, j_z) = atoms.collective(dim);

    let mut jump_channels = vec![JumpChannel {
        label: CAVITY_CHANNEL.to_string(),
        operator: j_minus.scale_real(gamma_c.sqrt()),
    }];
    jump_channels.extend(atoms.pump_channels(params.pump));

    Ok(OperatorSet {
        model: ModelKind::Adiabatic,
        params: params.clone(),
        n_atoms: params.n_atoms,
        photon_cutoff: None,
        dimension: dim,
        annihilate: None,
        j_plus,
        j_minus,
        j_z,
        sigma_plus: atoms.sigma_plus,
        sigma_minus: atoms.sigma_minus,
        sigma_z: atoms.sigma_z,
        h_coherent: CsrMatrix::zeros(dim, dim),
        jump_channels,
    })
}

pub fn build_model(kind: ModelKind, params: &SystemParams) -> Result<OperatorSet> {
    match kind {
        ModelKind::Full => build_full_model(params),
        ModelKind::Adiabatic => build_adiabatic_model(params),
    }
}

impl OperatorSet {
    fn fock_dim(&self) -> usize {
        self.photon_cutoff.map_or(1, |c| c + 1)
    }

    /// Basis index of atomic configuration `config` with `photons` photons.
    pub fn basis_index(&self, config: usize, photons: usize) -> usize {
        config * self.fock_dim() + photons
    }

    /// All atoms in the ground state, cavity in vacuum.
    pub fn ground_index(&self) -> usize {
        0
    }

    pub fn all_excited_index(&self) -> usize {
        self.basis_index((1 << self.n_atoms) - 1, 0)
    }

    /// Photon number of a basis index (0 in the adiabatic model).
    pub fn photons_of(&self, index: usize) -> usize {
        index % self.fock_dim()
    }

    pub fn config_of(&self, index: usize) -> usize {
        index / self.fock_dim()
    }

    pub fn channel(&self, label: &str) -> Option<&JumpChannel> {
        self.jump_channels.iter().find(|c| c.label == label)
    }

    /// `Σ_k L_k† L_k`.
    pub fn total_decay(&self) -> CsrMatrix {
        self.jump_channels.iter().fold(
            CsrMatrix::zeros(self.dimension, self.dimension),
            |acc, ch| &acc + &(&ch.operator.adjoint() * &ch.operator),
        )
    }

    /// `a†a` for the full model.
    pub fn photon_number(&self) -> Option<CsrMatrix> {
        self.annihilate.as_ref().map(|a| &a.adjoint() * a)
    }

    /// Population of the highest Fock level kept.
    pub fn top_fock_population(&self, amplitudes: &[C64]) -> f64 {
        match self.photon_cutoff {
            None => 0.0,
            Some(c) => amplitudes
                .iter()
                .skip(c)
                .step_by(c + 1)
                .map(|a| a.norm_sqr())
                .sum(),
        }
    }

    /// Observables needed for moment estimates from trajectories, by name:
    /// `JpJm`, `JppJmm`, `Sz` (= Σσ_z), `SzSz` (= (Σσ_z)²) and for the full
    /// model `ada`, `adadaa`.
    pub fn moment_observables(&self) -> Vec<(String, CsrMatrix)> {
        let jpjm = &self.j_plus * &self.j_minus;
        let jppjmm = &(&self.j_plus * &jpjm) * &self.j_minus;
        let sz = self.j_z.scale_real(2.0);
        let szsz = &sz * &sz;
        let mut out = vec![
            (obs::JP_JM.to_string(), jpjm),
            (obs::JPP_JMM.to_string(), jppjmm),
            (obs::SZ.to_string(), sz),
            (obs::SZ_SZ.to_string(), szsz),
        ];
        if let Some(a) = &self.annihilate {
            let ad = a.adjoint();
            let n = &ad * a;
            let nn = &(&ad * &n) * a;
            out.push((obs::ADA.to_string(), n));
            out.push((obs::ADADAA.to_string(), nn));
        }
        out
    }
}

/// Names of the standard moment observables.
pub mod obs {
    pub const JP_JM: &str = "JpJm";
    pub const JPP_JMM: &str = "JppJmm";
    pub const SZ: &str = "Sz";
    pub const SZ_SZ: &str = "SzSz";
    pub const ADA: &str = "ada";
    pub const ADADAA: &str = "adadaa";
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{expectation, StateVector};

    fn full(n: usize, cutoff: usize) -> OperatorSet {
        build_full_model(&SystemParams::with_gamma_c(n, 1.0, 4.0, 0.7).with_photon_cutoff(cutoff))
            .unwrap()
    }

    fn adiabatic(n: usize, pump: f64) -> OperatorSet {
        build_adiabatic_model(&SystemParams::with_gamma_c(n, 1.0, 1.0, pump)).unwrap()
    }

    fn assert_zero(m: &CsrMatrix) {
        assert!(m.is_zero() || m.max_row_abs_sum() < 1e-14, "nonzero: {m:?}");
    }

    #[test]
    fn single_atom_full_model() {
        let ops = full(1, 1);
        assert_eq!(ops.dimension, 4);
        let e0 = ops.basis_index(1, 0);
        let jz = ops.j_z.mul_vec(&StateVector::basis(4, e0).amplitudes);
        assert_eq!(jz[e0], C64::new(0.5, 0.0));
        assert_eq!(jz.iter().filter(|v| v.norm() > 0.0).count(), 1);
    }

    #[test]
    fn all_excited_jz() {
        let ops = full(2, 1);
        let psi = StateVector::basis(ops.dimension, ops.all_excited_index());
        assert_eq!(expectation(&psi, &ops.j_z).unwrap().re, 1.0);
    }

    #[test]
    fn angular_momentum_commutator() {
        for ops in [full(3, 2), adiabatic(4, 1.0)] {
            let comm = ops.j_plus.commutator(&ops.j_minus);
            assert_eq!(comm.max_abs_diff(&ops.j_z.scale_real(2.0)), 0.0);
        }
    }

    #[test]
    fn collective_operators_are_sums() {
        let ops = full(3, 1);
        let sum_minus = ops.sigma_minus.iter().fold(CsrMatrix::zeros(16, 16), |a, s| &a + s);
        assert_eq!(sum_minus.max_abs_diff(&ops.j_minus), 0.0);
        let sum_z = ops.sigma_z.iter().fold(CsrMatrix::zeros(16, 16), |a, s| &a + s);
        assert_eq!(sum_z.scale_real(0.5).max_abs_diff(&ops.j_z), 0.0);
        assert_eq!(ops.j_plus.max_abs_diff(&ops.j_minus.adjoint()), 0.0);
    }

    #[test]
    fn hamiltonian_is_hermitian() {
        let mut p = SystemParams::with_gamma_c(3, 1.0, 4.0, 0.7).with_photon_cutoff(3);
        p.detuning = 0.3;
        let ops = build_full_model(&p).unwrap();
        assert!(ops.h_coherent.is_hermitian(1e-15));
        assert!(!ops.h_coherent.is_zero());
    }

    #[test]
    fn ladder_annihilation() {
        for ops in [full(3, 2), adiabatic(3, 1.0)] {
            let ground = StateVector::basis(ops.dimension, ops.ground_index());
            let top = StateVector::basis(ops.dimension, ops.all_excited_index());
            assert!(ops.j_minus.mul_vec(&ground.amplitudes).iter().all(|v| v.norm() == 0.0));
            assert!(ops.j_plus.mul_vec(&top.amplitudes).iter().all(|v| v.norm() == 0.0));
            if let Some(a) = &ops.annihilate {
                assert!(a.mul_vec(&ground.amplitudes).iter().all(|v| v.norm() == 0.0));
            }
            let mut power = ops.j_minus.clone();
            for _ in 0..ops.n_atoms {
                power = &power * &ops.j_minus;
            }
            assert_zero(&power);
        }
    }

    #[test]
    fn distinct_atoms_commute() {
        let ops = adiabatic(3, 1.0);
        let families = [&ops.sigma_plus, &ops.sigma_minus, &ops.sigma_z];
        for fa in families {
            for fb in families {
                for i in 0..3 {
                    for j in 0..3 {
                        if i != j {
                            assert_zero(&fa[i].commutator(&fb[j]));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn adiabatic_single_atom_channels() {
        let p = SystemParams::with_gamma_c(1, 0.5, 1.0, 2.0);
        let ops = build_adiabatic_model(&p).unwrap();
        assert_eq!(ops.dimension, 2);
        assert!(ops.h_coherent.is_zero());
        let cav = &ops.jump_channels[0];
        assert_eq!(cav.label, "cavity");
        assert!((cav.operator.get(0, 1).re - 0.5f64.sqrt()).abs() < 1e-15);
        let pump = &ops.jump_channels[1];
        assert_eq!(pump.label, "pump-1");
        assert!((pump.operator.get(1, 0).re - 2.0f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn collective_jump_lands_in_triplet() {
        let ops = adiabatic(2, 1.0);
        let ee = StateVector::basis(4, 3);
        let out = ops.jump_channels[0].operator.mul_vec(&ee.amplitudes);
        // |ge⟩ and |eg⟩ are configurations 1 and 2.
        assert_eq!(out[1], out[2]);
        assert!(out[1].norm() > 0.0);
        assert_eq!(out[0].norm() + out[3].norm(), 0.0);
    }

    #[test]
    fn dimension_and_capacity() {
        assert_eq!(adiabatic(10, 1.0).dimension, 1024);
        let p = SystemParams::with_gamma_c(12, 1.0, 1.0, 1.0);
        let err = build_adiabatic_model_bounded(&p, 1024).unwrap_err();
        assert!(matches!(err, Error::Capacity { .. }));
        let p = SystemParams::with_gamma_c(70, 1.0, 1.0, 1.0);
        assert!(matches!(build_adiabatic_model(&p).unwrap_err(), Error::Capacity { .. }));
    }

    #[test]
    fn full_model_channels_and_cutoff_checks() {
        let ops = full(2, 2);
        let labels: Vec<_> = ops.jump_channels.iter().map(|c| c.label.as_str()).collect();
        assert_eq!(labels, ["cavity", "pump-1", "pump-2"]);
        let p = SystemParams::with_gamma_c(2, 1.0, 4.0, 0.7);
        assert!(build_full_model(&p).is_err());
        let mut top = vec![C64::new(0.0, 0.0); ops.dimension];
        top[ops.basis_index(1, 2)] = C64::new(1.0, 0.0);
        assert_eq!(ops.top_fock_population(&top), 1.0);
    }
}
