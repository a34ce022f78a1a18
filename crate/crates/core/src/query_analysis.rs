//! Turns the Local/Global level probabilities of a query into the global
//! weight `r_q` used when combining node scores.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::providers::{LevelProbabilityProvider, LevelProbs, ProviderError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScopeMode {
    /// Softmax over the raw probabilities: `e^pg / (e^pl + e^pg)`. Output lies
    /// in roughly (0.269, 0.731).
    #[default]
    Probabilities,
    /// Softmax over log-probabilities, which reduces to `pg / (pl + pg)`.
    LogProbs,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueryAnalysis {
    pub p_local: f64,
    pub p_global: f64,
    pub r_q: f64,
}

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("query is empty")]
    EmptyQuery,
    #[error("probabilities out of range: local {0}, global {1}")]
    OutOfRange(f64, f64),
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

/// Global weight for the given level probabilities. Both probabilities being
/// zero carries no signal and yields 0.5.
pub fn global_weight(p_local: f64, p_global: f64, mode: ScopeMode) -> f64 {
    if p_local == 0.0 && p_global == 0.0 {
        tracing::warn!("both level probabilities are zero; using r_q = 0.5");
        return 0.5;
    }
    match mode {
        // 1 / (1 + e^(pl - pg)) is the same softmax without overflow
        ScopeMode::Probabilities => 1.0 / (1.0 + (p_local - p_global).exp()),
        ScopeMode::LogProbs => p_global / (p_local + p_global),
    }
}

impl QueryAnalysis {
    pub fn from_probs(probs: LevelProbs, mode: ScopeMode) -> Result<Self, AnalysisError> {
        let LevelProbs { p_local, p_global } = probs;
        let ok = |p: f64| (0.0..=1.0).contains(&p);
        if !ok(p_local) || !ok(p_global) {
            return Err(AnalysisError::OutOfRange(p_local, p_global));
        }
        Ok(Self { p_local, p_global, r_q: global_weight(p_local, p_global, mode) })
    }
}

pub fn analyze(query: &str, provider: &dyn LevelProbabilityProvider, mode: ScopeMode) -> Result<QueryAnalysis, AnalysisError> {
    if query.trim().is_empty() {
        return Err(AnalysisError::EmptyQuery);
    }
    QueryAnalysis::from_probs(provider.level_probs(query)?, mode)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::providers::StubLevelProvider;
    use proptest::prelude::*;

    #[test]
    fn equal_probabilities_give_one_half() {
        assert_eq!(global_weight(0.3, 0.3, ScopeMode::Probabilities), 0.5);
        assert_eq!(global_weight(0.7, 0.7, ScopeMode::LogProbs), 0.5);
    }

    #[test]
    fn certain_local_gives_closed_form() {
        let e = std::f64::consts::E;
        assert!((global_weight(1.0, 0.0, ScopeMode::Probabilities) - 1.0 / (1.0 + e)).abs() < 1e-15);
        assert!((global_weight(0.0, 1.0, ScopeMode::Probabilities) - e / (1.0 + e)).abs() < 1e-15);
    }

    #[test]
    fn log_prob_mode_is_the_probability_ratio() {
        assert!((global_weight(0.25, 0.75, ScopeMode::LogProbs) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn zero_probabilities_fall_back() {
        assert_eq!(global_weight(0.0, 0.0, ScopeMode::Probabilities), 0.5);
        assert_eq!(global_weight(0.0, 0.0, ScopeMode::LogProbs), 0.5);
    }

    #[test]
    fn fact_query_leans_local_under_stub() {
        let a = analyze("who wrote Hamlet", &StubLevelProvider, ScopeMode::default()).unwrap();
        assert!(a.r_q < 0.5);
        let g = analyze("summarize the article", &StubLevelProvider, ScopeMode::default()).unwrap();
        assert!(g.r_q > 0.5);
    }

    #[test]
    fn empty_query_is_rejected() {
        assert!(matches!(analyze("  ", &StubLevelProvider, ScopeMode::default()), Err(AnalysisError::EmptyQuery)));
    }

    #[test]
    fn out_of_range_is_rejected() {
        let bad = LevelProbs { p_local: 1.5, p_global: 0.0 };
        assert!(QueryAnalysis::from_probs(bad, ScopeMode::default()).is_err());
    }

    proptest! {
        #[test]
        fn increasing_in_global_decreasing_in_local(pl in 0.0f64..1.0, pg in 0.0f64..0.99, d in 0.001f64..0.01) {
            let base = global_weight(pl, pg, ScopeMode::Probabilities);
            prop_assert!(global_weight(pl, pg + d, ScopeMode::Probabilities) > base);
            if pl + d <= 1.0 {
                prop_assert!(global_weight(pl + d, pg, ScopeMode::Probabilities) < base);
            }
        }
    }
}
