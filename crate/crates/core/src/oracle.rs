//! Exact dense reference for small systems.
//!
//! Density matrices are vectorized by stacking columns,
//! `vec(ρ)[i + j·D] = ρ_ij`, so that `vec(AρB) = (Bᵀ ⊗ A) vec(ρ)` and
//!
//! `L = −i(I⊗H − Hᵀ⊗I) + Σ_k [L̄_k⊗L_k − ½ I⊗L_k†L_k − ½ (L_k†L_k)ᵀ⊗I]`.
//!
//! The Liouvillian splits into blocks that never mix (connected components of
//! its sparsity graph). The null space is found blockwise from dense SVDs.

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::operators::{ModelKind, OperatorSet};
use crate::semiclassical::d0;
use crate::sparse::{CsrMatrix, C64};

/// Largest superoperator dimension `D²` accepted by [`build_liouvillian`].
pub const DEFAULT_MAX_SUPEROPERATOR_DIM: usize = 1 << 16;
/// Largest dense block handed to the SVD.
pub const MAX_DENSE_BLOCK: usize = 2048;
/// Singular values below this fraction of `‖L‖_F` count as zero.
pub const NULL_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct Liouvillian {
    pub matrix: CsrMatrix,
    /// Hilbert-space dimension `D`.
    pub dimension: usize,
    pub model: ModelKind,
}

impl Liouvillian {
    pub fn norm(&self) -> f64 {
        self.matrix.frobenius_norm()
    }

    /// `L vec(ρ)` reshaped as a `D×D` matrix.
    pub fn apply(&self, rho: &DMatrix<C64>) -> DMatrix<C64> {
        let d = self.dimension;
        let v = self.matrix.mul_vec(rho.as_slice());
        DMatrix::from_column_slice(d, d, &v)
    }
}

pub fn build_liouvillian(ops: &OperatorSet) -> Result<Liouvillian> {
    build_liouvillian_bounded(ops, DEFAULT_MAX_SUPEROPERATOR_DIM)
}

pub fn build_liouvillian_bounded(ops: &OperatorSet, max_dim: usize) -> Result<Liouvillian> {
    let d = ops.dimension;
    let required = d as u128 * d as u128;
    if required > max_dim as u128 {
        return Err(Error::Capacity {
            what: "superoperator dimension",
            required,
            limit: max_dim as u128,
        });
    }
    let id = CsrMatrix::identity(d);
    let minus_i = C64::new(0.0, -1.0);
    let h = &ops.h_coherent;
    let mut l = (&id.kron(h) - &h.transpose().kron(&id)).scale(minus_i);
    for ch in &ops.jump_channels {
        let op = &ch.operator;
        let ldl = &op.adjoint() * op;
        let term = &(&op.conj().kron(op) - &id.kron(&ldl).scale_real(0.5))
            - &ldl.transpose().kron(&id).scale_real(0.5);
        l = &l + &term;
    }
    Ok(Liouvillian {
        matrix: l,
        dimension: d,
        model: ops.model,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    pub entries: DMatrix<C64>,
    pub model: ModelKind,
}

impl DensityMatrix {
    pub fn dimension(&self) -> usize {
        self.entries.nrows()
    }

    /// Pure state `|i⟩⟨i|`.
    pub fn basis(dimension: usize, index: usize, model: ModelKind) -> Self {
        let mut entries = DMatrix::zeros(dimension, dimension);
        entries[(index, index)] = C64::new(1.0, 0.0);
        DensityMatrix { entries, model }
    }

    pub fn trace(&self) -> C64 {
        self.entries.trace()
    }

    /// `tr(ρ O)`.
    pub fn expect(&self, op: &CsrMatrix) -> Result<C64> {
        let d = self.dimension();
        if op.nrows() != d || op.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: op.nrows(),
            });
        }
        Ok(op
            .triplets()
            .map(|(r, c, v)| v * self.entries[(c, r)])
            .sum())
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let herm = (&self.entries + self.entries.adjoint()) * C64::new(0.5, 0.0);
        herm.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Checks the density-matrix invariants to `tol`.
    pub fn validate(&self, tol: f64) -> Result<()> {
        let herm = (&self.entries - self.entries.adjoint()).camax();
        let tr = self.trace();
        let min = self.min_eigenvalue();
        if herm > tol || (tr - C64::new(1.0, 0.0)).norm() > tol || min < -tol {
            return Err(Error::Internal(format!(
                "invalid density matrix: hermiticity defect {herm:e}, trace {tr}, min eigenvalue {min:e}"
            )));
        }
        Ok(())
    }
}

/// Connected components of the sparsity graph of a square matrix.
fn components(m: &CsrMatrix) -> Vec<Vec<usize>> {
    let n = m.nrows();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for (r, c, _) in m.triplets() {
        let (a, b) = (find(&mut parent, r), find(&mut parent, c));
        if a != b {
            parent[a.max(b)] = a.min(b);
        }
    }
    let mut label = vec![usize::MAX; n];
    let mut out: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        let root = find(&mut parent, i);
        if label[root] == usize::MAX {
            label[root] = out.len();
            out.push(Vec::new());
        }
        out[label[root]].push(i);
    }
    out
}

/// Unique steady state `Lρ = 0`, normalized to unit trace.
pub fn steady_state(l: &Liouvillian) -> Result<DensityMatrix> {
    let d = l.dimension;
    let norm = l.norm();
    let scale = if norm > 0.0 { norm } else { 1.0 };
    let mut nulls: Vec<(Vec<usize>, DVector<C64>)> = Vec::new();
    let mut position = vec![0usize; d * d];
    for block in components(&l.matrix) {
        if block.len() > MAX_DENSE_BLOCK {
            return Err(Error::Capacity {
                what: "dense Liouvillian block",
                required: block.len() as u128,
                limit: MAX_DENSE_BLOCK as u128,
            });
        }
        for (k, &i) in block.iter().enumerate() {
            position[i] = k;
        }
        let mut dense = DMatrix::<C64>::zeros(block.len(), block.len());
        for (k, &i) in block.iter().enumerate() {
            for (c, v) in l.matrix.row(i) {
                dense[(k, position[c])] = v;
            }
        }
        let svd = dense.svd(false, true);
        let v_t = svd.v_t.as_ref().expect("right singular vectors requested");
        for (k, sigma) in svd.singular_values.iter().enumerate() {
            if *sigma <= NULL_TOLERANCE * scale {
                let v = v_t.row(k).transpose().map(|z| z.conj());
                nulls.push((block.clone(), v));
            }
        }
    }
    if nulls.len() != 1 {
        return Err(Error::DegenerateSteadyState {
            multiplicity: nulls.len(),
        });
    }
    let (block, v) = nulls.pop().expect("one null vector");
    let mut vec_rho = vec![C64::new(0.0, 0.0); d * d];
    for (k, &i) in block.iter().enumerate() {
        vec_rho[i] = v[k];
    }
    let mut rho = DMatrix::from_column_slice(d, d, &vec_rho);
    let tr = rho.trace();
    if tr.norm() < 1e-12 {
        return Err(Error::Internal("steady-state null vector has zero trace".into()));
    }
    rho /= tr;
    let rho = (&rho + rho.adjoint()) * C64::new(0.5, 0.0);
    let residual = l.apply(&rho).norm();
    if residual > NULL_TOLERANCE * scale {
        return Err(Error::Internal(format!(
            "steady-state residual {residual:e} exceeds {:e}",
            NULL_TOLERANCE * scale
        )));
    }
    let out = DensityMatrix {
        entries: rho,
        model: l.model,
    };
    out.validate(1e-10)?;
    Ok(out)
}

/// `ρ(t) = exp(L t) ρ(0)` with a dense matrix exponential.
pub fn propagate(l: &Liouvillian, rho: &DensityMatrix, t: f64) -> Result<DensityMatrix> {
    let d = l.dimension;
    if d * d > 4096 {
        return Err(Error::Capacity {
            what: "dense superoperator exponential",
            required: (d * d) as u128,
            limit: 4096,
        });
    }
    let gen = l.matrix.to_dense() * C64::new(t, 0.0);
    let v = gen.exp() * DVector::from_column_slice(rho.entries.as_slice());
    Ok(DensityMatrix {
        entries: DMatrix::from_column_slice(d, d, v.as_slice()),
        model: rho.model,
    })
}

/// Exact expectation values in a density matrix. Atom indices are 0-based;
/// `p = ⟨σ₊⁰σ₋¹⟩`, `triple = ⟨σz⁰σ₊¹σ₋²⟩`, `quad = ⟨σ₊⁰σ₊¹σ₋²σ₋³⟩`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExactMoments {
    pub n_atoms: usize,
    pub s: f64,
    pub p: Option<f64>,
    pub z2: Option<f64>,
    pub triple: Option<f64>,
    pub quad: Option<f64>,
    pub jp_jm: f64,
    pub jpp_jmm: f64,
    /// `⟨J₊J₊J₋J₋⟩/⟨J₊J₋⟩²`; `None` when the collective flux vanishes.
    pub g2_zero: Option<f64>,
    pub photon_number: Option<f64>,
    pub field_g2_zero: Option<f64>,
}

impl ExactMoments {
    /// Photon emission rate `Γc⟨J₊J₋⟩` (adiabatic) or `κ⟨a†a⟩` (full).
    pub fn emission_rate(&self, gamma_c: f64, kappa: f64) -> f64 {
        match self.photon_number {
            Some(n) => kappa * n,
            None => gamma_c * self.jp_jm,
        }
    }
}

pub fn exact_moments(rho: &DensityMatrix, ops: &OperatorSet) -> Result<ExactMoments> {
    if rho.dimension() != ops.dimension || rho.model != ops.model {
        return Err(Error::DimensionMismatch {
            expected: ops.dimension,
            found: rho.dimension(),
        });
    }
    let n = ops.n_atoms;
    let ev = |op: &CsrMatrix| -> Result<f64> { Ok(rho.expect(op)?.re) };
    let (sp, sm, sz) = (&ops.sigma_plus, &ops.sigma_minus, &ops.sigma_z);
    let s = ev(&sz[0])?;
    let p = if n >= 2 { Some(ev(&(&sp[0] * &sm[1]))?) } else { None };
    let z2 = if n >= 2 { Some(ev(&(&sz[0] * &sz[1]))?) } else { None };
    let triple = if n >= 3 {
        Some(ev(&(&(&sz[0] * &sp[1]) * &sm[2]))?)
    } else {
        None
    };
    let quad = if n >= 4 {
        Some(ev(&(&(&(&sp[0] * &sp[1]) * &sm[2]) * &sm[3]))?)
    } else {
        None
    };
    let jpjm = &ops.j_plus * &ops.j_minus;
    let jp_jm = ev(&jpjm)?;
    let jpp_jmm = ev(&(&(&ops.j_plus * &jpjm) * &ops.j_minus))?;
    let ratio = |num: f64, den: f64| if den > 1e-14 { Some(num / (den * den)) } else { None };
    let (photon_number, field_g2_zero) = match &ops.annihilate {
        Some(a) => {
            let ad = a.adjoint();
            let na = &ad * a;
            let nn = ev(&(&(&ad * &na) * a))?;
            let n1 = ev(&na)?;
            (Some(n1), ratio(nn, n1))
        }
        None => (None, None),
    };
    Ok(ExactMoments {
        n_atoms: n,
        s,
        p,
        z2,
        triple,
        quad,
        jp_jm,
        jpp_jmm,
        g2_zero: ratio(jpp_jmm, jp_jm),
        photon_number,
        field_g2_zero,
    })
}

/// Steady state and its moments in one call.
pub fn steady_state_moments(ops: &OperatorSet) -> Result<(DensityMatrix, ExactMoments)> {
    let l = build_liouvillian(ops)?;
    let rho = steady_state(&l)?;
    let m = exact_moments(&rho, ops)?;
    Ok((rho, m))
}

/// `⟨J₊J₊J₋J₋⟩` assembled from single-, two-, three- and four-atom moments.
pub fn numerator_expansion(m: &ExactMoments) -> Option<f64> {
    let n = m.n_atoms as f64;
    let s = m.s;
    let two = (1.0 + 2.0 * s + m.z2?) / 2.0;
    let three = if m.n_atoms >= 3 { m.p? + m.triple? } else { 0.0 };
    let four = if m.n_atoms >= 4 { m.quad? } else { 0.0 };
    Some(n * (n - 1.0) * two + 2.0 * n * (n - 1.0) * (n - 2.0) * three + n * (n - 1.0) * (n - 2.0) * (n - 3.0) * four)
}

/// Single-atom inversion `d0 = (w − Γc)/(w + Γc)` for reference.
pub fn single_atom_inversion(pump: f64, gamma_c: f64) -> f64 {
    d0(pump, gamma_c)
}

/// Writes `N,w_over_gc,s,p,z2,triple,JpJm,JppJmm,g2_zero`; missing values are
/// left empty.
pub fn write_moments_csv<W: Write>(out: &mut W, rows: &[(f64, ExactMoments)]) -> Result<()> {
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.15e}")).unwrap_or_default();
    writeln!(out, "N,w_over_gc,s,p,z2,triple,JpJm,JppJmm,g2_zero")?;
    for (w, m) in rows {
        writeln!(
            out,
            "{},{w:.10e},{:.15e},{},{},{},{:.15e},{:.15e},{}",
            m.n_atoms,
            m.s,
            opt(m.p),
            opt(m.z2),
            opt(m.triple),
            m.jp_jm,
            m.jpp_jmm,
            opt(m.g2_zero)
        )?;
    }
    Ok(())
}
