//! Physical parameters of the atom–cavity model, regime classification and
//! validity checks for the approximations used elsewhere in the crate.
//!
//! Units: ħ = 1. The library works with absolute rates; callers that think in
//! units of the collective decay rate Γ_c should use [`SystemParams::with_gamma_c`].

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Current version of the parameter-file schema.
pub const PARAMS_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemParams {
    /// Number of two-level atoms N.
    pub n_atoms: usize,
    /// Atom–cavity coupling g.
    pub coupling: f64,
    /// Cavity intensity decay rate κ.
    pub kappa: f64,
    /// Incoherent repump rate w.
    pub pump: f64,
    /// Free-space spontaneous emission rate γ. Only enters validity checks.
    #[serde(default)]
    pub gamma_free: f64,
    /// Cavity–atom detuning δ = ω_c − ω_a.
    #[serde(default)]
    pub detuning: f64,
    /// Largest Fock index kept in the full model.
    #[serde(default)]
    pub photon_cutoff: usize,
}

impl SystemParams {
    /// Parameters with coupling chosen so that g²/κ equals `gamma_c`.
    pub fn with_gamma_c(n_atoms: usize, gamma_c: f64, kappa: f64, pump: f64) -> Self {
        SystemParams {
            n_atoms,
            coupling: (gamma_c * kappa).sqrt(),
            kappa,
            pump,
            gamma_free: 0.0,
            detuning: 0.0,
            photon_cutoff: 0,
        }
    }

    pub fn with_photon_cutoff(mut self, cutoff: usize) -> Self {
        self.photon_cutoff = cutoff;
        self
    }

    pub fn with_pump(mut self, pump: f64) -> Self {
        self.pump = pump;
        self
    }

    /// Checks the invariants shared by both models.
    pub fn validate(&self) -> Result<()> {
        if self.n_atoms == 0 {
            return Err(Error::InvalidParameter("n_atoms must be at least 1".into()));
        }
        let rates = [
            ("coupling", self.coupling),
            ("kappa", self.kappa),
            ("pump", self.pump),
            ("gamma_free", self.gamma_free),
        ];
        for (name, value) in rates {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be a finite non-negative rate, got {value}"
                )));
            }
        }
        if !self.detuning.is_finite() {
            return Err(Error::InvalidParameter("detuning must be finite".into()));
        }
        Ok(())
    }

    /// Additional invariants of the full atom–cavity model.
    pub fn validate_full(&self) -> Result<()> {
        self.validate()?;
        if self.kappa <= 0.0 {
            return Err(Error::InvalidParameter(
                "kappa must be positive for the full model".into(),
            ));
        }
        if self.photon_cutoff < 1 {
            return Err(Error::InvalidParameter(
                "photon_cutoff must be at least 1 for the full model".into(),
            ));
        }
        Ok(())
    }

    pub fn gamma_c(&self) -> Result<f64> {
        gamma_c(self)
    }
}

/// Collective decay rate Γ_c = g²/κ.
pub fn gamma_c(params: &SystemParams) -> Result<f64> {
    if params.kappa == 0.0 {
        return Err(Error::DivisionByZero(
            "kappa = 0: the collective rate g^2/kappa assumes a bad (fast-decaying) cavity".into(),
        ));
    }
    Ok(params.coupling * params.coupling / params.kappa)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    /// w < Γ_c: atoms are pumped into dark states.
    Subradiant,
    /// w = Γ_c exactly.
    LowerThreshold,
    /// Γ_c < w < NΓ_c.
    Superradiant,
    /// w = NΓ_c exactly.
    UpperThreshold,
    /// w > NΓ_c: thermal emission.
    StrongPumping,
}

impl Regime {
    pub fn is_threshold(self) -> bool {
        matches!(self, Regime::LowerThreshold | Regime::UpperThreshold)
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Regime::Subradiant => "subradiant",
            Regime::LowerThreshold => "lower-threshold",
            Regime::Superradiant => "superradiant",
            Regime::UpperThreshold => "upper-threshold",
            Regime::StrongPumping => "strong-pumping",
        };
        f.write_str(name)
    }
}

/// Classifies a pump rate against the collective rate of `params`.
pub fn classify_regime(pump: f64, params: &SystemParams) -> Result<Regime> {
    let gc = gamma_c(params)?;
    classify(pump, params.n_atoms, gc)
}

/// Same as [`classify_regime`] with Γ_c given directly.
pub fn classify(pump: f64, n_atoms: usize, gamma_c: f64) -> Result<Regime> {
    if !(gamma_c > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "regime classification needs gamma_c > 0, got {gamma_c}"
        )));
    }
    let upper = n_atoms as f64 * gamma_c;
    let regime = if pump < gamma_c {
        Regime::Subradiant
    } else if pump == gamma_c {
        Regime::LowerThreshold
    } else if pump < upper {
        Regime::Superradiant
    } else if pump == upper {
        Regime::UpperThreshold
    } else {
        Regime::StrongPumping
    };
    Ok(regime)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidityReport {
    /// Single-atom cooperativity C = g²/(κγ); infinite when γ = 0.
    pub cooperativity: f64,
    /// N·C.
    pub collective_cooperativity: f64,
    /// κ/(N·C·γ) = κ/(NΓ_c).
    pub bad_cavity_ratio: f64,
    /// N·C ≥ margin.
    pub collective_ok: bool,
    /// κ/(NCγ) ≥ margin.
    pub bad_cavity_ok: bool,
    pub margin: f64,
    /// γ = 0: free-space decay neglected.
    pub free_space_neglected: bool,
}

pub const DEFAULT_VALIDITY_MARGIN: f64 = 10.0;

pub fn validity_report(params: &SystemParams) -> ValidityReport {
    validity_report_with_margin(params, DEFAULT_VALIDITY_MARGIN)
}

pub fn validity_report_with_margin(params: &SystemParams, margin: f64) -> ValidityReport {
    let n = params.n_atoms as f64;
    let g2 = params.coupling * params.coupling;
    let free_space_neglected = params.gamma_free == 0.0;
    let cooperativity = if free_space_neglected {
        f64::INFINITY
    } else {
        g2 / (params.kappa * params.gamma_free)
    };
    let collective_cooperativity = n * cooperativity;
    // C·γ = Γ_c, which stays finite when γ = 0.
    let collective_rate = n * g2 / params.kappa;
    let bad_cavity_ratio = params.kappa / collective_rate;
    ValidityReport {
        cooperativity,
        collective_cooperativity,
        bad_cavity_ratio,
        collective_ok: collective_cooperativity >= margin,
        bad_cavity_ok: bad_cavity_ratio >= margin,
        margin,
        free_space_neglected,
    }
}

#[derive(Serialize, Deserialize)]
struct ParamFile {
    schema_version: u32,
    system: SystemParams,
}

/// Parses a TOML parameter file:
///
/// ```toml
/// schema_version = 1
/// [system]
/// n_atoms = 10
/// coupling = 1.0
/// kappa = 100.0
/// pump = 0.05
/// gamma_free = 0.0     # optional
/// detuning = 0.0       # optional
/// photon_cutoff = 3    # optional, full model only
/// ```
pub fn parse_params(text: &str) -> Result<SystemParams> {
    let file: ParamFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    if file.schema_version != PARAMS_SCHEMA_VERSION {
        return Err(Error::Config(format!(
            "unsupported schema_version {} (expected {PARAMS_SCHEMA_VERSION})",
            file.schema_version
        )));
    }
    file.system.validate()?;
    Ok(file.system)
}

pub fn render_params(params: &SystemParams) -> String {
    let file = ParamFile {
        schema_version: PARAMS_SCHEMA_VERSION,
        system: params.clone(),
    };
    toml::to_string(&file).expect("parameter struct always serializes")
}

pub fn load_params(path: impl AsRef<Path>) -> Result<SystemParams> {
    parse_params(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(g: f64, kappa: f64) -> SystemParams {
        SystemParams {
            n_atoms: 10,
            coupling: g,
            kappa,
            pump: 0.0,
            gamma_free: 0.0,
            detuning: 0.0,
            photon_cutoff: 0,
        }
    }

    #[test]
    fn gamma_c_examples() {
        assert_eq!(gamma_c(&params(1.0, 100.0)).unwrap(), 0.01);
        assert_eq!(gamma_c(&params(0.0, 5.0)).unwrap(), 0.0);
        assert_eq!(gamma_c(&params(2.0, 2.0)).unwrap(), 2.0);
    }

    #[test]
    fn gamma_c_rejects_zero_kappa() {
        let err = gamma_c(&params(1.0, 0.0)).unwrap_err();
        assert!(matches!(err, Error::DivisionByZero(_)));
        assert!(err.to_string().contains("bad"));
    }

    #[test]
    fn validity_examples() {
        let mut p = params(1.0, 100.0);
        p.gamma_free = 0.01;
        let r = validity_report(&p);
        assert!((r.cooperativity - 1.0).abs() < 1e-12);
        assert!((r.collective_cooperativity - 10.0).abs() < 1e-12);
        assert!((r.bad_cavity_ratio - 1000.0).abs() < 1e-9);
        assert!(r.collective_ok && r.bad_cavity_ok);

        let p = SystemParams {
            n_atoms: 1,
            coupling: 1.0,
            kappa: 1.0,
            gamma_free: 1.0,
            ..params(1.0, 1.0)
        };
        let r = validity_report(&p);
        assert_eq!(r.cooperativity, 1.0);
        assert!(!r.collective_ok && !r.bad_cavity_ok);

        let r = validity_report(&params(1.0, 100.0));
        assert!(r.cooperativity.is_infinite());
        assert!(r.free_space_neglected);
        assert!(r.collective_ok && r.bad_cavity_ok);
    }

    #[test]
    fn regime_examples() {
        let p = SystemParams::with_gamma_c(10, 1.0, 1.0, 0.0);
        assert_eq!(classify_regime(0.25, &p).unwrap(), Regime::Subradiant);
        assert_eq!(classify_regime(5.0, &p).unwrap(), Regime::Superradiant);
        assert_eq!(classify_regime(100.0, &p).unwrap(), Regime::StrongPumping);
        assert_eq!(classify_regime(1.0, &p).unwrap(), Regime::LowerThreshold);
        assert_eq!(classify_regime(10.0, &p).unwrap(), Regime::UpperThreshold);
        assert!(classify(1.0, 10, 0.0).is_err());
    }

    #[test]
    fn param_file_round_trip_and_schema() {
        let p = SystemParams::with_gamma_c(3, 1.0, 300.0, 2.0).with_photon_cutoff(3);
        let text = render_params(&p);
        assert_eq!(parse_params(&text).unwrap(), p);
        assert!(parse_params("[system]\nn_atoms = 1\ncoupling = 1.0\nkappa = 1.0\npump = 1.0\n").is_err());
        let wrong = text.replace("schema_version = 1", "schema_version = 7");
        assert!(parse_params(&wrong).is_err());
    }

    #[test]
    fn full_model_invariants() {
        let p = SystemParams::with_gamma_c(2, 1.0, 10.0, 1.0);
        assert!(p.validate().is_ok());
        assert!(p.validate_full().is_err());
        assert!(p.clone().with_photon_cutoff(1).validate_full().is_ok());
        let mut bad = p.clone();
        bad.pump = -1.0;
        assert!(bad.validate().is_err());
        bad = p;
        bad.n_atoms = 0;
        assert!(bad.validate().is_err());
    }

    proptest! {
        #[test]
        fn regime_is_scale_invariant(
            ratio in prop_oneof![0.01f64..0.999, 1.001f64..9.99, 10.01f64..1e4],
            gc in 1e-3f64..1e3,
            lambda in 1e-3f64..1e3,
        ) {
            let a = classify(ratio * gc, 10, gc).unwrap();
            let b = classify(lambda * ratio * gc, 10, lambda * gc).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
