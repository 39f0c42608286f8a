//! Experiment configuration: a TOML file resolved against defaults, with a
//! canonical JSON form for hashing.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::averaging::{AveragingParams, ResonanceZone};
use crate::dynamics::{EvolveParams, PerturbationKind, PerturbationSpec};
use crate::measures::{sample, MeasureKind, MeasureSpec};
use crate::spectral::Field;

use super::LabError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Simulate,
    Spectrum,
    Average,
    TheoremI,
    TheoremIi,
    QuasiInvariance,
    GalerkinConvergence,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Simulate => "simulate",
            ExperimentKind::Spectrum => "spectrum",
            ExperimentKind::Average => "average",
            ExperimentKind::TheoremI => "theorem-i",
            ExperimentKind::TheoremIi => "theorem-ii",
            ExperimentKind::QuasiInvariance => "quasi-invariance",
            ExperimentKind::GalerkinConvergence => "galerkin-convergence",
        }
    }

    /// Experiments whose output depends on the angle variables and so on
    /// the linearisation staying accurate.
    pub fn uses_angles(self) -> bool {
        matches!(self, ExperimentKind::Average | ExperimentKind::TheoremIi)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialSource {
    GaussianH,
    EtaP,
    GibbsP,
    Zero,
    Pairs,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialConfig {
    pub source: InitialSource,
    /// Number of retained modes.
    pub m: usize,
    /// Measure regularity index.
    pub p: f64,
    pub zeta0_prime: f64,
    pub sigma_scale: f64,
    /// Ensemble index of the first draw; members of an ensemble follow it.
    pub index: u64,
    /// Rescale the draw to this `||u||_{norm_order}`.
    pub amplitude: Option<f64>,
    pub norm_order: f64,
    /// Explicit `(û_k, û_{-k})` pairs for `source = "pairs"`.
    pub pairs: Vec<[f64; 2]>,
}

impl Default for InitialConfig {
    fn default() -> Self {
        Self {
            source: InitialSource::GaussianH,
            m: 16,
            p: 3.0,
            zeta0_prime: 2.0,
            sigma_scale: 1.0,
            index: 0,
            amplitude: Some(0.1),
            norm_order: 3.0,
            pairs: Vec::new(),
        }
    }
}

impl InitialConfig {
    pub fn measure(&self) -> Option<MeasureSpec> {
        let kind = match self.source {
            InitialSource::GaussianH => MeasureKind::GaussianH,
            InitialSource::EtaP => MeasureKind::EtaP,
            InitialSource::GibbsP => MeasureKind::GibbsP,
            InitialSource::Zero | InitialSource::Pairs => return None,
        };
        let mut spec = MeasureSpec::new(kind, self.p, self.m);
        spec.zeta0_prime = self.zeta0_prime;
        spec.sigma_scale = self.sigma_scale;
        Some(spec)
    }

    /// Member `member` of the initial ensemble.
    pub fn field(&self, seed: u64, member: u64) -> Result<Field, LabError> {
        let u = match self.source {
            InitialSource::Zero => return Ok(Field::zeros(self.m)),
            InitialSource::Pairs => {
                Field::from_pairs(self.pairs.clone()).map_err(|e| LabError::Config(format!("initial.pairs: {e}")))?
            }
            _ => {
                let spec = self.measure().expect("measure source");
                sample(&spec, seed, self.index + member)
                    .map_err(|e| LabError::Config(format!("initial: {e}")))?
                    .field
            }
        };
        Ok(match self.amplitude {
            Some(a) if !u.is_zero() => u.scale(a / u.sobolev_norm(self.norm_order)),
            _ => u,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PerturbationConfig {
    pub kind: PerturbationKind,
    /// Smoothing order; `None` takes the value fixed by `kind` (2 for the
    /// quadratic kind).
    pub zeta0: Option<f64>,
    pub scale: f64,
}

impl Default for PerturbationConfig {
    fn default() -> Self {
        Self {
            kind: PerturbationKind::DoubleAntiderivative,
            zeta0: None,
            scale: 1.0,
        }
    }
}

impl PerturbationConfig {
    pub fn spec(&self) -> Result<PerturbationSpec, LabError> {
        let zeta0 = self.zeta0.unwrap_or(match self.kind {
            PerturbationKind::None | PerturbationKind::Derivative => 0.0,
            PerturbationKind::Antiderivative => 1.0,
            PerturbationKind::DoubleAntiderivative | PerturbationKind::SmoothingQuadratic => 2.0,
        });
        let spec = PerturbationSpec::new(self.kind, zeta0).map_err(|e| LabError::Config(format!("perturbation: {e}")))?;
        Ok(if self.scale == 1.0 { spec } else { spec.with_scale(self.scale) })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// The `ε` sweep.
    pub eps: Vec<f64>,
    /// Horizon in slow time (fast time when `ε = 0`).
    pub tau_end: f64,
    /// Clock interval between stored samples.
    pub stride: f64,
    pub dt: Option<f64>,
    pub dt_max: f64,
    pub tail_tol: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            eps: vec![1e-1, 1e-2, 1e-3],
            tau_end: 1.0,
            stride: 0.05,
            dt: None,
            dt_max: 1e-3,
            tail_tol: None,
        }
    }
}

impl RunConfig {
    pub fn params(&self, eps: f64, tau_end: f64) -> EvolveParams {
        let mut p = if eps > 0.0 {
            EvolveParams::slow(eps, tau_end)
        } else {
            EvolveParams::fast(0.0, tau_end)
        };
        p.dt = self.dt;
        p.dt_max = self.dt_max;
        p.tail_tol = self.tail_tol;
        p
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldModel {
    /// Closed form where known, otherwise time averages.
    Auto,
    Zero,
    Linear,
    Estimated,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AveragingConfig {
    /// Number of tracked actions.
    pub k_max: usize,
    pub field: FieldModel,
    pub estimate: AveragingParams,
    /// Weight exponent of the reported action distance.
    pub q: f64,
    /// Pass threshold on the observed deviation.
    pub rho: f64,
    /// Weight exponent of the admissible ball.
    pub p: f64,
    /// Radius of the admissible ball; `None` never stops.
    pub ball_radius: Option<f64>,
    /// Relative offset of the averaged initial actions, `J(0) = (1 + δ)I(0)`.
    pub delta: f64,
}

impl Default for AveragingConfig {
    fn default() -> Self {
        Self {
            k_max: 3,
            field: FieldModel::Auto,
            estimate: AveragingParams::default(),
            q: 0.0,
            rho: 1e-6,
            p: 1.0,
            ball_radius: None,
            delta: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeylConfig {
    pub members: usize,
    /// Number of leading angles.
    pub angles: usize,
    /// Largest `|s|₁`.
    pub order: usize,
    /// Slow-time interval between samples.
    pub stride: f64,
    /// Also measure occupation of the resonance zone.
    pub resonance: bool,
    pub alpha: f64,
    pub resonance_order: usize,
}

impl Default for WeylConfig {
    fn default() -> Self {
        Self {
            members: 50,
            angles: 3,
            order: 2,
            stride: 0.01,
            resonance: false,
            alpha: 0.2,
            resonance_order: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuasiInvarianceConfig {
    /// The measure weight is `e^{-𝒥_{p+1}}`.
    pub p: usize,
    pub stride: f64,
}

impl Default for QuasiInvarianceConfig {
    fn default() -> Self {
        Self { p: 1, stride: 0.01 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergenceConfig {
    /// Each `m` is compared with `2m`.
    pub ms: Vec<usize>,
    pub eps: f64,
    pub tau_end: f64,
    pub stride: f64,
    pub norm_order: f64,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        Self {
            ms: vec![8, 16, 32],
            eps: 1e-2,
            tau_end: 0.1,
            stride: 0.005,
            norm_order: 3.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumConfig {
    pub gaps: usize,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self { gaps: 8 }
    }
}

fn default_cap() -> f64 {
    0.25
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub seed: u64,
    /// Output directory; not part of the digest.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Largest `||u||_3` for experiments that read angles.
    #[serde(default = "default_cap")]
    pub amplitude_cap: f64,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default)]
    pub perturbation: PerturbationConfig,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub averaging: AveragingConfig,
    #[serde(default)]
    pub weyl: WeylConfig,
    #[serde(default)]
    pub quasi_invariance: QuasiInvarianceConfig,
    #[serde(default)]
    pub convergence: ConvergenceConfig,
    #[serde(default)]
    pub spectrum: SpectrumConfig,
}

impl ExperimentConfig {
    /// A config with every section at its default.
    pub fn new(experiment: ExperimentKind) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            experiment,
            seed: 0,
            out: None,
            amplitude_cap: default_cap(),
            initial: InitialConfig::default(),
            perturbation: PerturbationConfig::default(),
            run: RunConfig::default(),
            averaging: AveragingConfig::default(),
            weyl: WeylConfig::default(),
            quasi_invariance: QuasiInvarianceConfig::default(),
            convergence: ConvergenceConfig::default(),
            spectrum: SpectrumConfig::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, LabError> {
        let cfg: Self = toml::from_str(text).map_err(|e| LabError::Config(e.to_string()))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(LabError::Config(format!(
                "schema_version = {} is not supported (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, LabError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LabError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            LabError::Config(m) => LabError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// The resolved config as TOML, every default written out.
    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serialises")
    }

    /// Compact JSON of the resolved config without the output directory.
    pub fn canonical_json(&self) -> String {
        let mut c = self.clone();
        c.out = None;
        serde_json::to_string(&c).expect("config serialises")
    }

    /// SHA-256 of [`Self::canonical_json`], hex encoded.
    pub fn digest(&self) -> String {
        let hash = Sha256::digest(self.canonical_json().as_bytes());
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Schema and cross-field checks that need no integration.
    pub fn validate(&self) -> Result<(), LabError> {
        let bad = |m: String| Err(LabError::Config(m));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!("schema_version = {} is not supported", self.schema_version));
        }
        let init = &self.initial;
        if init.m == 0 {
            return bad("initial.m must be positive".into());
        }
        if let Some(spec) = init.measure() {
            spec.validate().map_err(|e| LabError::Config(format!("initial: {e}")))?;
        }
        if init.source == InitialSource::Pairs && init.pairs.is_empty() {
            return bad("initial.pairs is empty".into());
        }
        if let Some(a) = init.amplitude {
            if !(a >= 0.0) || !a.is_finite() {
                return bad(format!("initial.amplitude = {a} must be finite and nonnegative"));
            }
        }
        self.perturbation.spec()?;
        let run = &self.run;
        if run.eps.is_empty() {
            return bad("run.eps is empty".into());
        }
        for &e in &run.eps {
            if !(0.0..=1.0).contains(&e) {
                return bad(format!("run.eps entry {e} must lie in [0, 1]"));
            }
            if e == 0.0 && self.experiment != ExperimentKind::Simulate {
                return bad(format!("{} needs eps > 0", self.experiment.name()));
            }
        }
        for (name, v) in [("run.tau_end", run.tau_end), ("run.stride", run.stride), ("run.dt_max", run.dt_max)] {
            if !(v > 0.0) || !v.is_finite() {
                return bad(format!("{name} = {v} must be positive"));
            }
        }
        if let Some(dt) = run.dt {
            if !(dt > 0.0) {
                return bad(format!("run.dt = {dt} must be positive"));
            }
        }
        let avg = &self.averaging;
        if avg.k_max == 0 {
            return bad("averaging.k_max must be positive".into());
        }
        avg.estimate
            .validate()
            .map_err(|e| LabError::Config(format!("averaging.estimate: {e}")))?;
        if !(avg.rho >= 0.0) {
            return bad("averaging.rho must be nonnegative".into());
        }
        if let Some(r) = avg.ball_radius {
            if !(r > 0.0) {
                return bad("averaging.ball_radius must be positive".into());
            }
        }
        if !(avg.delta > -1.0) || !avg.delta.is_finite() {
            return bad("averaging.delta must exceed -1".into());
        }
        let w = &self.weyl;
        if w.members == 0 || w.angles == 0 {
            return bad("weyl.members and weyl.angles must be positive".into());
        }
        if w.angles > init.m {
            return bad(format!("weyl.angles = {} exceeds initial.m = {}", w.angles, init.m));
        }
        if !(w.stride > 0.0) {
            return bad("weyl.stride must be positive".into());
        }
        ResonanceZone::new(init.m, w.resonance_order, w.alpha, run.eps[0].max(f64::MIN_POSITIVE))
            .validate()
            .map_err(|e| LabError::Config(format!("weyl: {e}")))?;
        if !(self.quasi_invariance.stride > 0.0) {
            return bad("quasi_invariance.stride must be positive".into());
        }
        let c = &self.convergence;
        if c.ms.is_empty() || c.ms.contains(&0) {
            return bad("convergence.ms must list positive mode counts".into());
        }
        if !(c.eps > 0.0 && c.eps <= 1.0) || !(c.tau_end > 0.0) || !(c.stride > 0.0) {
            return bad("convergence.eps, tau_end and stride must be positive".into());
        }
        if self.spectrum.gaps == 0 {
            return bad("spectrum.gaps must be positive".into());
        }
        if self.experiment.uses_angles() {
            let u = init.field(self.seed, 0)?;
            let n = u.sobolev_norm(3.0);
            if n > self.amplitude_cap {
                return bad(format!(
                    "||u||_3 = {n:.4} exceeds amplitude_cap = {} for the angle experiment {}",
                    self.amplitude_cap,
                    self.experiment.name()
                ));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal(kind: &str) -> String {
        format!("schema_version = 1\nexperiment = \"{kind}\"\n")
    }

    #[test]
    fn minimal_config_resolves_defaults() {
        let c = ExperimentConfig::from_toml(&minimal("theorem-i")).unwrap();
        assert_eq!(c, ExperimentConfig::new(ExperimentKind::TheoremI));
        c.validate().unwrap();
        let again = ExperimentConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = ExperimentConfig::from_toml(&(minimal("simulate") + "colour = 3\n")).unwrap_err();
        assert!(err.to_string().contains("colour"), "{err}");
        let err = ExperimentConfig::from_toml(&(minimal("simulate") + "[run]\nepsilon = [0.1]\n")).unwrap_err();
        assert!(err.to_string().contains("epsilon"), "{err}");
    }

    #[test]
    fn schema_version_must_match() {
        let err = ExperimentConfig::from_toml("schema_version = 2\nexperiment = \"spectrum\"\n").unwrap_err();
        assert!(matches!(err, LabError::Config(_)));
    }

    #[test]
    fn alpha_above_a_quarter_is_rejected() {
        let c = ExperimentConfig::from_toml(&(minimal("theorem-ii") + "[weyl]\nalpha = 0.3\n")).unwrap();
        let err = c.validate().unwrap_err();
        assert!(err.to_string().contains("1/4"), "{err}");
    }

    #[test]
    fn summable_sigma_is_required() {
        let c = ExperimentConfig::from_toml(&(minimal("simulate") + "[initial]\nzeta0_prime = 0.5\n")).unwrap();
        let err = c.validate().unwrap_err();
        assert!(err.to_string().contains("zeta0_prime"), "{err}");
    }

    #[test]
    fn amplitude_cap_applies_to_angle_experiments() {
        let big = "[initial]\namplitude = 0.5\n";
        let c = ExperimentConfig::from_toml(&(minimal("theorem-ii") + big)).unwrap();
        assert!(c.validate().unwrap_err().to_string().contains("amplitude_cap"));
        let c = ExperimentConfig::from_toml(&(minimal("simulate") + big)).unwrap();
        c.validate().unwrap();
    }

    #[test]
    fn digest_ignores_the_output_directory() {
        let mut a = ExperimentConfig::new(ExperimentKind::Spectrum);
        let d = a.digest();
        a.out = Some("elsewhere".into());
        assert_eq!(a.digest(), d);
        a.seed = 9;
        assert_ne!(a.digest(), d);
        assert_eq!(d.len(), 64);
    }
}
