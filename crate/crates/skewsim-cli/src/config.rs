//! Experiment configuration: JSON in, validated model out.
//!
//! Exactly one of `lambda` / `alpha` is given; the other is derived from the
//! medium and echoed into the manifest. Unknown keys are rejected so a typo
//! fails loudly instead of silently running defaults.

use serde::{Deserialize, Serialize};
use skewsim::model::{
    alpha_of_lambda, lambda_of_alpha, physical_alpha, physical_lambda, residence_critical_lambda,
    stroock_varadhan_alpha, InterfaceModel, MediumSpec, SkewParam,
};
use skewsim::path::Scheme;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    SignProb,
    Occupation,
    ResidenceThreshold,
    Breakthrough,
    LocalTimeRatio,
    ContinuityGap,
    Martingale,
    PdeValidate,
    SamplerEquivalence,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::SignProb => "sign-prob",
            Experiment::Occupation => "occupation",
            Experiment::ResidenceThreshold => "residence-threshold",
            Experiment::Breakthrough => "breakthrough",
            Experiment::LocalTimeRatio => "local-time-ratio",
            Experiment::ContinuityGap => "continuity-gap",
            Experiment::Martingale => "martingale",
            Experiment::PdeValidate => "pde-validate",
            Experiment::SamplerEquivalence => "sampler-equivalence",
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MediumConfig {
    pub d_minus: f64,
    pub d_plus: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeConfig {
    ExactStep,
    SkewWalk,
    ExcursionFlip,
}

impl From<SchemeConfig> for Scheme {
    fn from(s: SchemeConfig) -> Scheme {
        match s {
            SchemeConfig::ExactStep => Scheme::ExactStep,
            SchemeConfig::SkewWalk => Scheme::SkewWalk,
            SchemeConfig::ExcursionFlip => Scheme::ExcursionFlip,
        }
    }
}

fn default_scheme() -> SchemeConfig {
    SchemeConfig::ExactStep
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub medium: MediumConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Time horizon of the experiment.
    pub t: f64,
    pub dt: f64,
    pub n_paths: u64,
    pub seed: u64,
    #[serde(default = "default_scheme")]
    pub scheme: SchemeConfig,
    /// Worker count; 0 or absent means the library default pool.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    /// Output directory; overridden by `--out`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,

    /// One-sided window width for local-time experiments.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    /// Interface weights scanned by `residence-threshold`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_grid: Option<Vec<f64>>,
    /// Injection/retrieval offset for `breakthrough`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<f64>,
    /// Survival-curve grid points for `breakthrough`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_grid: Option<usize>,
    /// Probe points for `pde-validate`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probes: Option<Vec<f64>>,
    /// Half-width of the symmetric solver domain for `pde-validate`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_width: Option<f64>,
    /// Cells per side for `pde-validate`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_per_side: Option<usize>,
}

/// Parameters derived from the config, echoed into every manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DerivedParameters {
    pub alpha: f64,
    pub lambda: f64,
    pub physical_alpha: f64,
    pub physical_lambda: f64,
    pub stroock_varadhan_alpha: f64,
    pub critical_lambda: f64,
    pub named_diffusion: String,
}

pub fn classify(medium: MediumSpec, lambda: f64) -> &'static str {
    if (lambda - physical_lambda(medium)).abs() <= 1e-12 {
        "physical"
    } else if (lambda - 0.5).abs() <= 1e-12 {
        "stroock-varadhan"
    } else {
        "none"
    }
}

pub fn derive_parameters(
    d_minus: f64,
    d_plus: f64,
    lambda: Option<f64>,
    alpha: Option<f64>,
) -> Result<DerivedParameters, String> {
    let medium = MediumSpec::new(d_minus, d_plus).map_err(|e| format!("medium: {e}"))?;
    let (l, a) = match (lambda, alpha) {
        (Some(l), None) => {
            let a = alpha_of_lambda(medium, l).map_err(|e| format!("lambda: {e}"))?;
            (l, a)
        }
        (None, Some(a)) => {
            let a = SkewParam::new(a).map_err(|e| format!("alpha: {e}"))?;
            (lambda_of_alpha(medium, a), a)
        }
        (Some(_), Some(_)) => {
            return Err("give exactly one of lambda / alpha, got both".into());
        }
        (None, None) => {
            return Err("give exactly one of lambda / alpha, got neither".into());
        }
    };
    Ok(DerivedParameters {
        alpha: a.value(),
        lambda: l,
        physical_alpha: physical_alpha(medium).value(),
        physical_lambda: physical_lambda(medium),
        stroock_varadhan_alpha: stroock_varadhan_alpha(medium).value(),
        critical_lambda: residence_critical_lambda(medium),
        named_diffusion: classify(medium, l).to_string(),
    })
}

/// A config checked against the field invariants, with the model built.
pub struct ValidatedConfig {
    pub config: ExperimentConfig,
    pub medium: MediumSpec,
    pub model: InterfaceModel,
    pub derived: DerivedParameters,
}

pub fn parse_config(text: &str) -> Result<ValidatedConfig, String> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let config: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        // a missing field is reported at the enclosing struct; splice the
        // field name onto the path so the error names the full dotted path
        let path = e.path().to_string();
        let inner = e.inner().to_string();
        let full_path = inner
            .strip_prefix("missing field `")
            .and_then(|rest| rest.split('`').next())
            .map(|field| if path == "." { field.to_string() } else { format!("{path}.{field}") })
            .unwrap_or(path);
        format!("config field {full_path}: {inner}")
    })?;
    validate(config)
}

pub fn validate(mut config: ExperimentConfig) -> Result<ValidatedConfig, String> {
    let derived = derive_parameters(
        config.medium.d_minus,
        config.medium.d_plus,
        config.lambda,
        config.alpha,
    )?;
    let medium = MediumSpec::new(config.medium.d_minus, config.medium.d_plus)
        .expect("validated by derive_parameters");
    // echo the derived half so the archived config is self-contained
    config.lambda = Some(derived.lambda);
    config.alpha = Some(derived.alpha);
    for (path, v) in [("t", config.t), ("dt", config.dt)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(format!("config field {path}: must be finite and > 0, got {v}"));
        }
    }
    if config.n_paths == 0 {
        return Err("config field n_paths: must be positive".into());
    }
    for (path, v) in [
        ("eps", config.eps),
        ("y", config.y),
        ("half_width", config.half_width),
    ] {
        if let Some(v) = v {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("config field {path}: must be finite and > 0, got {v}"));
            }
        }
    }
    let model = InterfaceModel::from_lambda(medium, derived.lambda)
        .map_err(|e| format!("config field lambda: {e}"))?;
    Ok(ValidatedConfig {
        config,
        medium,
        model,
        derived,
    })
}
