//! Cluster-pair logistic regressions on baseline items, significance tiers
//! and cross-cohort common factors.

mod design;
mod logistic;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use design::{build_design, reduce_variables, DesignMatrix, Removal, RemovalReason};
pub use logistic::{
    fit_logistic, log_likelihood, log_likelihood_gradient, logistic_mle, Coefficient, LogisticFit,
    LogisticOptions, RIDGE_FALLBACK, SEPARATION_BOUND,
};

use crate::data_model::Manifest;
use crate::error::{Error, Result};
use crate::screening::csv_field;
use crate::trend::ArchetypeLabel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default)]
pub enum Tier {
    #[default]
    None,
    /// p < .10
    Dagger,
    /// p < .05
    One,
    /// p < .01
    Two,
}

impl Tier {
    pub fn from_p(p: f64) -> Tier {
        if p < 0.01 {
            Tier::Two
        } else if p < 0.05 {
            Tier::One
        } else if p < 0.10 {
            Tier::Dagger
        } else {
            Tier::None
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Tier::None => "",
            Tier::Dagger => "†",
            Tier::One => "*",
            Tier::Two => "**",
        }
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl Serialize for Tier {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.symbol())
    }
}

impl<'de> Deserialize<'de> for Tier {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match String::deserialize(d)?.as_str() {
            "" => Ok(Tier::None),
            "†" => Ok(Tier::Dagger),
            "*" => Ok(Tier::One),
            "**" => Ok(Tier::Two),
            other => Err(serde::de::Error::custom(format!("unknown tier `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TieredItem {
    pub item_id: String,
    pub topic: String,
    pub coef: f64,
    pub se: f64,
    pub p: f64,
    pub tier: Tier,
}

/// Annotate every fitted item with its tier and manifest topic.
pub fn significance_tiers(fit: &LogisticFit, manifest: &Manifest, test_id: &str) -> Result<Vec<TieredItem>> {
    fit.names
        .iter()
        .enumerate()
        .map(|(j, item)| {
            let topic = manifest.topic(test_id, item).ok_or_else(|| {
                Error::ManifestMismatch(format!("item {item} of test {test_id} is not in the manifest"))
            })?;
            Ok(TieredItem {
                item_id: item.clone(),
                topic: topic.to_string(),
                coef: fit.coef[j],
                se: fit.se[j],
                p: fit.p_wald[j],
                tier: Tier::from_p(fit.p_wald[j]),
            })
        })
        .collect()
}

/// One cohort's regression for one cluster pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortRegression {
    pub cohort_id: String,
    pub baseline_test: String,
    pub positive: ArchetypeLabel,
    pub negative: ArchetypeLabel,
    pub n: usize,
    pub n_positive: usize,
    pub intercept: Coefficient,
    pub mcfadden_r2: f64,
    pub lr_test_p: f64,
    /// Set when the ridge fallback was used.
    pub ridge: f64,
    pub converged: bool,
    pub removal_log: Vec<Removal>,
    pub items: Vec<TieredItem>,
}

impl CohortRegression {
    pub fn new(design: &DesignMatrix, fit: &LogisticFit, items: Vec<TieredItem>) -> Self {
        CohortRegression {
            cohort_id: design.cohort_id.clone(),
            baseline_test: design.baseline_test.clone(),
            positive: design.positive.clone(),
            negative: design.negative.clone(),
            n: fit.n,
            n_positive: fit.n_positive,
            intercept: fit.intercept,
            mcfadden_r2: fit.mcfadden_r2,
            lr_test_p: fit.lr_test_p,
            ridge: fit.ridge,
            converged: fit.converged,
            removal_log: design.removal_log.clone(),
            items,
        }
    }
}

/// `regression_*.csv`: item_id, topic, coef, se, p, tier.
pub fn regression_csv(items: &[TieredItem]) -> String {
    let mut out = String::from("item_id,topic,coef,se,p,tier\n");
    for it in items {
        out.push_str(&format!(
            "{},{},{:.6},{:.6},{:.6},{}\n",
            csv_field(&it.item_id),
            csv_field(&it.topic),
            it.coef,
            it.se,
            it.p,
            it.tier
        ));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorEvidence {
    pub cohort_id: String,
    pub item_id: String,
    pub coef: f64,
    pub p: f64,
    pub tier: Tier,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommonFactor {
    pub topic: String,
    /// Significant items carrying this topic, grouped by cohort in input order.
    pub evidence: Vec<FactorEvidence>,
    /// All evidence coefficients share one sign.
    pub sign_agrees: bool,
    /// +1, -1, or 0 when signs disagree.
    pub sign: i8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorReport {
    pub alpha: f64,
    pub cohorts: Vec<String>,
    pub common_factors: Vec<CommonFactor>,
}

/// Topics with at least one item at p < `alpha` in every cohort, matched by
/// exact topic string. Ordered by first appearance in the first cohort.
pub fn extract_common_factors(reports: &[(&str, &[TieredItem])], alpha: f64) -> FactorReport {
    let mut common = Vec::new();
    if let Some((_, first)) = reports.first() {
        let mut seen: Vec<&str> = Vec::new();
        for it in first.iter().filter(|it| it.p < alpha) {
            if seen.contains(&it.topic.as_str()) {
                continue;
            }
            seen.push(&it.topic);
            let mut evidence = Vec::new();
            let mut everywhere = true;
            for (cohort, items) in reports {
                let hits: Vec<&TieredItem> = items.iter().filter(|o| o.p < alpha && o.topic == it.topic).collect();
                if hits.is_empty() {
                    everywhere = false;
                    break;
                }
                evidence.extend(hits.into_iter().map(|h| FactorEvidence {
                    cohort_id: cohort.to_string(),
                    item_id: h.item_id.clone(),
                    coef: h.coef,
                    p: h.p,
                    tier: h.tier,
                }));
            }
            if everywhere {
                let pos = evidence.iter().all(|e| e.coef > 0.0);
                let neg = evidence.iter().all(|e| e.coef < 0.0);
                common.push(CommonFactor {
                    topic: it.topic.clone(),
                    evidence,
                    sign_agrees: pos || neg,
                    sign: if pos { 1 } else if neg { -1 } else { 0 },
                });
            }
        }
    }
    FactorReport {
        alpha,
        cohorts: reports.iter().map(|(c, _)| c.to_string()).collect(),
        common_factors: common,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tiers_are_strict() {
        assert_eq!(Tier::from_p(0.02), Tier::One);
        assert_eq!(Tier::from_p(0.005), Tier::Two);
        assert_eq!(Tier::from_p(0.10), Tier::None);
        assert_eq!(Tier::from_p(0.0999), Tier::Dagger);
        assert_eq!(Tier::from_p(0.05), Tier::Dagger);
        assert_eq!(Tier::from_p(0.01), Tier::One);
    }

    fn item(id: &str, topic: &str, coef: f64, p: f64) -> TieredItem {
        TieredItem { item_id: id.into(), topic: topic.into(), coef, se: 1.0, p, tier: Tier::from_p(p) }
    }

    #[test]
    fn disjoint_topics_give_nothing() {
        let a = vec![item("1", "x", 1.0, 0.01)];
        let b = vec![item("1", "y", 1.0, 0.01)];
        let r = extract_common_factors(&[("g1", &a), ("g2", &b)], 0.10);
        assert!(r.common_factors.is_empty());
    }

    #[test]
    fn sign_disagreement_is_reported() {
        let a = vec![item("1", "x", 1.0, 0.01)];
        let b = vec![item("7", "x", -1.0, 0.05)];
        let r = extract_common_factors(&[("g1", &a), ("g2", &b)], 0.10);
        assert_eq!(r.common_factors.len(), 1);
        assert!(!r.common_factors[0].sign_agrees);
        assert_eq!(r.common_factors[0].sign, 0);
    }
}
