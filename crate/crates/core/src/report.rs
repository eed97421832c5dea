//! A common JSON shape for Bayesian and maximum-likelihood fits.

use serde::{Deserialize, Serialize};

use crate::mle::MlEstimate;
use crate::sampler::{Chain, PosteriorSummary};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterReport {
    pub name: String,
    pub estimate: f64,
    /// Posterior sd, or the observed-information standard error.
    pub std: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub q025: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub q50: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub q975: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub method: String,
    pub n: usize,
    pub k: usize,
    /// `β_1 … β_k`, `σ²`, `ρ`.
    pub parameters: Vec<ParameterReport>,
    pub log_likelihood: f64,
    pub bic: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub acceptance_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub final_tuning: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub n_draws: Option<usize>,
}

fn param_names(k: usize) -> impl Iterator<Item = String> {
    (1..=k)
        .map(|j| format!("beta_{j}"))
        .chain(["sigma2".to_string(), "rho".to_string()])
}

impl FitReport {
    pub fn bayes(method: &str, n: usize, summary: &PosteriorSummary, chain: &Chain) -> Self {
        let parameters = summary
            .params
            .iter()
            .map(|p| ParameterReport {
                name: p.name.clone(),
                estimate: p.mean,
                std: Some(p.std),
                q025: Some(p.q025),
                q50: Some(p.q50),
                q975: Some(p.q975),
            })
            .collect();
        Self {
            method: method.to_string(),
            n,
            k: chain.k(),
            parameters,
            log_likelihood: summary.log_likelihood,
            bic: summary.bic,
            acceptance_rate: Some(summary.acceptance_rate),
            final_tuning: Some(chain.final_tuning()),
            n_draws: Some(summary.n_draws),
        }
    }

    pub fn ml(n: usize, fit: &MlEstimate) -> Self {
        let k = fit.theta.beta.len();
        let estimates = fit.theta.to_vec();
        let errors = fit.std_errors.as_ref().map(|s| s.to_vec());
        let parameters = param_names(k)
            .enumerate()
            .map(|(i, name)| ParameterReport {
                name,
                estimate: estimates[i],
                std: errors.as_ref().map(|e| e[i]),
                q025: None,
                q50: None,
                q975: None,
            })
            .collect();
        Self {
            method: "ml".to_string(),
            n,
            k,
            parameters,
            log_likelihood: fit.log_likelihood,
            bic: fit.bic,
            acceptance_rate: None,
            final_tuning: None,
            n_draws: None,
        }
    }

    pub fn estimate(&self, name: &str) -> Option<f64> {
        self.parameters.iter().find(|p| p.name == name).map(|p| p.estimate)
    }

    /// Point estimates in `β_1 … β_k, σ², ρ` order.
    pub fn estimates(&self) -> Vec<f64> {
        self.parameters.iter().map(|p| p.estimate).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Theta;
    use nalgebra::DVector;

    #[test]
    fn ml_report_omits_acceptance() {
        let fit = MlEstimate {
            theta: Theta::new(DVector::from_vec(vec![1.0, 2.0]), 0.5, 0.3).unwrap(),
            log_likelihood: -10.0,
            bic: 25.0,
            std_errors: None,
            multimodal: false,
        };
        let report = FitReport::ml(30, &fit);
        let names: Vec<_> = report.parameters.iter().map(|p| p.name.as_str()).collect();
        assert_eq!(names, ["beta_1", "beta_2", "sigma2", "rho"]);
        assert_eq!(report.estimate("rho"), Some(0.3));
        let json = serde_json::to_string(&report).unwrap();
        assert!(!json.contains("acceptance_rate"));
        assert!(!json.contains("q025"));
        let back: FitReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, report);
    }
}
