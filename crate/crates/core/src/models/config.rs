//! Declarative model configuration.
//!
//! ```toml
//! type = "soft_power"
//! n = 1
//! beta = 1.75
//! ```
//!
//! Recognized keys: `type` (`soft_power`, `anisotropic`, `nonautonomous`,
//! `quadratic_plus`, `quadratic`, `expression`), `n`, `beta`, `sigma`,
//! `omega`, `mu`, `upsilon`, `lambda`, `b0`, `c1`, `c2`, `c3`, `period`,
//! `expression`, `profile`, `b`, `bhat` and `base`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::coefficient::CoefficientSpec;
use crate::error::{Error, Result};
use crate::models::expr::{Expr, ExpressionModel};
use crate::models::{
    anisotropic_model, nonautonomous_model, quadratic_model, quadratic_plus_model, soft_power_model, Hamiltonian,
    ModelParams, TimeProfile,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    SoftPower,
    Anisotropic,
    Nonautonomous,
    QuadraticPlus,
    Quadratic,
    Expression,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(rename = "type")]
    pub kind: ModelKind,
    #[serde(default = "one")]
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c3: Option<f64>,
    /// Period of an explicitly time-dependent model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<f64>,
    /// `H(t, z)` for `expression` models.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expression: Option<String>,
    /// `a(t)` for `nonautonomous` models.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<String>,
    /// Coefficient of the `quadratic` test model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bhat: Option<CoefficientSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<Box<ModelConfig>>,
}

fn one() -> usize {
    1
}

impl ModelConfig {
    pub fn soft_power(n: usize, beta: f64) -> Self {
        Self {
            kind: ModelKind::SoftPower,
            n,
            beta: Some(beta),
            sigma: None,
            omega: None,
            mu: None,
            upsilon: None,
            lambda: None,
            b0: None,
            c1: None,
            c2: None,
            c3: None,
            period: None,
            expression: None,
            profile: None,
            b: None,
            bhat: None,
            base: None,
        }
    }

    fn declared_params(&self) -> ModelParams {
        let beta = self.beta.unwrap_or(1.75);
        ModelParams {
            sigma: self.sigma.unwrap_or(1.0),
            omega: self.omega.unwrap_or(1.0),
            mu: self.mu.unwrap_or(2.0),
            upsilon: self.upsilon.unwrap_or(2.0),
            beta,
            lambda: self.lambda.unwrap_or(1.0),
            b0: self.b0.unwrap_or(beta),
            c1: self.c1.unwrap_or(1.0),
            c2: self.c2.unwrap_or(0.5 * (1.0 - 0.5 * beta)),
            c3: self.c3.unwrap_or(1.0),
        }
    }

    fn require<T: Clone>(v: &Option<T>, key: &str, kind: &str) -> Result<T> {
        v.clone().ok_or_else(|| Error::Config(format!("model type '{kind}' needs '{key}'")))
    }
}

/// Build a model from its configuration.
pub fn build_model(cfg: &ModelConfig) -> Result<Arc<dyn Hamiltonian>> {
    let beta = cfg.beta.unwrap_or(1.75);
    Ok(match cfg.kind {
        ModelKind::SoftPower => Arc::new(soft_power_model(cfg.n, beta)?),
        ModelKind::Anisotropic => {
            Arc::new(anisotropic_model(cfg.n, cfg.sigma.unwrap_or(1.0), cfg.omega.unwrap_or(1.0), beta)?)
        }
        ModelKind::Quadratic => Arc::new(quadratic_model(cfg.n, ModelConfig::require(&cfg.b, "b", "quadratic")?)?),
        ModelKind::Expression => {
            let src = ModelConfig::require(&cfg.expression, "expression", "expression")?;
            let expr = Expr::parse(&src, cfg.n)?;
            Arc::new(ExpressionModel::new(expr, cfg.period, cfg.declared_params())?)
        }
        ModelKind::Nonautonomous => {
            let base = build_model(&*ModelConfig::require(&cfg.base, "base", "nonautonomous")?)?;
            let src = ModelConfig::require(&cfg.profile, "profile", "nonautonomous")?;
            let period = ModelConfig::require(&cfg.period, "period", "nonautonomous")?;
            let expr = Expr::parse(&src, 0)?;
            let label = src.clone();
            let profile = TimeProfile::new(period, label, move |t| expr.value(t, &[]).unwrap_or(f64::NAN))?;
            Arc::new(nonautonomous_model(base, profile)?)
        }
        ModelKind::QuadraticPlus => {
            let base = build_model(&*ModelConfig::require(&cfg.base, "base", "quadratic_plus")?)?;
            let spec = ModelConfig::require(&cfg.bhat, "bhat", "quadratic_plus")?;
            Arc::new(quadratic_plus_model(Arc::new(spec.build()?), base)?)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_nested_configs() {
        let src = r#"
type = "quadratic_plus"
n = 1
[bhat]
n = 1
period = 6.0
constant = [[0.1, 0.0], [0.0, 0.1]]
[base]
type = "nonautonomous"
period = 6.0
profile = "1 + 0.2 * cos(2 * pi * t / 6)"
[base.base]
type = "soft_power"
beta = 1.8
"#;
        let cfg: ModelConfig = toml::from_str(src).unwrap();
        let m = build_model(&cfg).unwrap();
        assert_eq!(m.period(), Some(6.0));
        assert!(m.quadratic_split().is_some());
        let v = m.value(0.0, &[1.0, 0.0]).unwrap();
        let want = 0.05 + 1.2 * (2f64.powf(0.9) - 1.0);
        assert!((v - want).abs() < 1e-12);
    }

    #[test]
    fn expression_model_from_config() {
        let cfg: ModelConfig = toml::from_str("type = \"expression\"\nexpression = \"(1 + r2)^0.875 - 1\"").unwrap();
        let m = build_model(&cfg).unwrap();
        assert_eq!(m.half_dim(), 1);
        assert!(m.params().validate().is_ok());
    }

    #[test]
    fn missing_and_unknown_keys() {
        let cfg: ModelConfig = toml::from_str("type = \"quadratic\"").unwrap();
        assert!(matches!(build_model(&cfg), Err(Error::Config(_))));
        assert!(toml::from_str::<ModelConfig>("type = \"soft_power\"\nbogus = 1").is_err());
        assert!(toml::from_str::<ModelConfig>("type = \"cubic\"").is_err());
    }
}
