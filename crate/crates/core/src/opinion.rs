//! Subjective-logic opinions over a finite domain.
//!
//! An [`Opinion`] carries a belief mass per outcome, an uncertainty mass and
//! a base-rate (prior) distribution. Opinions correspond one-to-one with
//! Dirichlet evidence ([`EvidenceVector`]) through
//!
//! ```text
//! b(x) = r(x) / (W + Σr)        u = W / (W + Σr)
//! r(x) = W · b(x) / u
//! ```
//!
//! where `W` is the non-informative prior weight. All masses are `f64`.
//! Invariants are checked with an absolute tolerance of [`TOLERANCE`]; after
//! every operation the total mass `u + Σb` is renormalized if it drifted by
//! more than `1e-12`, and rejected if it drifted by more than `1e-6`.

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Absolute tolerance for opinion and distribution invariants.
pub const TOLERANCE: f64 = 1e-9;

/// Default prior weight (binomial / multinomial convention).
pub const DEFAULT_PRIOR_WEIGHT: f64 = 2.0;

const RENORMALIZE_DRIFT: f64 = 1e-12;
const MAX_DRIFT: f64 = 1e-6;

fn check_unit(value: f64, what: &str) -> Result<f64> {
    if !value.is_finite() || !(-TOLERANCE..=1.0 + TOLERANCE).contains(&value) {
        return Err(Error::InvalidOpinion(format!(
            "{what} = {value} is outside [0, 1]"
        )));
    }
    Ok(value.clamp(0.0, 1.0))
}

/// Validates a probability distribution (components in `[0,1]`, sum 1).
pub(crate) fn check_distribution(values: &[f64], what: &str) -> Result<Vec<f64>> {
    let out = values
        .iter()
        .map(|&v| check_unit(v, what))
        .collect::<Result<Vec<_>>>()?;
    let sum: f64 = out.iter().sum();
    if (sum - 1.0).abs() > TOLERANCE {
        return Err(Error::InvalidOpinion(format!(
            "{what} sums to {sum}, expected 1"
        )));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Opinion {
    belief: Vec<f64>,
    uncertainty: f64,
    base_rate: Vec<f64>,
}

impl Opinion {
    pub fn new(belief: Vec<f64>, uncertainty: f64, base_rate: Vec<f64>) -> Result<Self> {
        let k = belief.len();
        if k < 2 {
            return Err(Error::InvalidOpinion(format!("domain cardinality {k} < 2")));
        }
        if base_rate.len() != k {
            return Err(Error::Cardinality {
                expected: k,
                found: base_rate.len(),
            });
        }
        let base_rate = check_distribution(&base_rate, "base rate")?;
        let belief = belief
            .iter()
            .map(|&b| check_unit(b, "belief"))
            .collect::<Result<Vec<_>>>()?;
        let uncertainty = check_unit(uncertainty, "uncertainty")?;
        let total = uncertainty + belief.iter().sum::<f64>();
        if (total - 1.0).abs() > TOLERANCE {
            return Err(Error::InvalidOpinion(format!(
                "u + Σb = {total}, expected 1"
            )));
        }
        Ok(Opinion {
            belief,
            uncertainty,
            base_rate,
        })
    }

    /// The opinion with no evidence: zero belief, `u = 1`.
    pub fn vacuous(base_rate: Vec<f64>) -> Result<Self> {
        let k = base_rate.len();
        Opinion::new(vec![0.0; k], 1.0, base_rate)
    }

    /// Builds the result of an algebraic operation, applying the
    /// renormalization policy.
    fn from_parts(mut belief: Vec<f64>, mut uncertainty: f64, base_rate: Vec<f64>) -> Result<Self> {
        let total = uncertainty + belief.iter().sum::<f64>();
        let drift = (total - 1.0).abs();
        if !drift.is_finite() || drift > MAX_DRIFT {
            return Err(Error::InvalidOpinion(format!(
                "mass drifted to u + Σb = {total}"
            )));
        }
        if drift > RENORMALIZE_DRIFT {
            belief.iter_mut().for_each(|b| *b /= total);
            uncertainty /= total;
        }
        Opinion::new(belief, uncertainty, base_rate)
    }

    pub fn cardinality(&self) -> usize {
        self.belief.len()
    }

    pub fn belief(&self) -> &[f64] {
        &self.belief
    }

    pub fn uncertainty(&self) -> f64 {
        self.uncertainty
    }

    pub fn base_rate(&self) -> &[f64] {
        &self.base_rate
    }

    pub fn is_vacuous(&self) -> bool {
        self.uncertainty >= 1.0
    }

    /// Projected probability `P(x) = b(x) + a(x)·u`.
    pub fn project(&self) -> Vec<f64> {
        self.belief
            .iter()
            .zip(&self.base_rate)
            .map(|(b, a)| (b + a * self.uncertainty).clamp(0.0, 1.0))
            .collect()
    }

    pub fn from_evidence(evidence: &EvidenceVector) -> Opinion {
        let total = evidence.prior_weight + evidence.total();
        let belief = evidence.evidence.iter().map(|r| r / total).collect();
        let uncertainty = evidence.prior_weight / total;
        // EvidenceVector invariants make every component a valid mass.
        Opinion {
            belief,
            uncertainty,
            base_rate: evidence.base_rate.clone(),
        }
    }

    /// Inverse of [`Opinion::from_evidence`] for prior weight `prior_weight`.
    pub fn to_evidence(&self, prior_weight: f64) -> Result<EvidenceVector> {
        if self.uncertainty <= 0.0 {
            return Err(Error::DogmaticOpinion);
        }
        let evidence = self
            .belief
            .iter()
            .map(|b| prior_weight * b / self.uncertainty)
            .collect();
        EvidenceVector::new(evidence, prior_weight, self.base_rate.clone())
    }

    /// Aleatory cumulative belief fusion. Both operands need `0 < u < 1`.
    ///
    /// When the operands share a base rate (within [`TOLERANCE`]) that base
    /// rate is carried over unchanged.
    pub fn cumulative_fuse(&self, other: &Opinion) -> Result<Opinion> {
        if other.cardinality() != self.cardinality() {
            return Err(Error::Cardinality {
                expected: self.cardinality(),
                found: other.cardinality(),
            });
        }
        let (ua, ub) = (self.uncertainty, other.uncertainty);
        if !(ua > 0.0 && ua < 1.0 && ub > 0.0 && ub < 1.0) {
            return Err(Error::FusionDomain {
                left: ua,
                right: ub,
            });
        }
        let denom = ua + ub - ua * ub;
        let belief = self
            .belief
            .iter()
            .zip(&other.belief)
            .map(|(ba, bb)| (ba * ub + bb * ua) / denom)
            .collect();
        let uncertainty = ua * ub / denom;

        let shared = self
            .base_rate
            .iter()
            .zip(&other.base_rate)
            .all(|(a, b)| (a - b).abs() <= TOLERANCE);
        let base_rate = if shared {
            self.base_rate.clone()
        } else {
            let denom = ua + ub - 2.0 * ua * ub;
            self.base_rate
                .iter()
                .zip(&other.base_rate)
                .map(|(aa, ab)| (aa * ub + ab * ua - (aa + ab) * ua * ub) / denom)
                .collect()
        };
        Opinion::from_parts(belief, uncertainty, base_rate)
    }

    /// Trust discounting by probability `discount ∈ [0,1]`: belief is scaled,
    /// the removed mass moves into uncertainty.
    pub fn trust_discount(&self, discount: f64) -> Result<Opinion> {
        if !(0.0..=1.0).contains(&discount) {
            return Err(Error::Parameter(format!(
                "discount probability {discount} outside [0, 1]"
            )));
        }
        let belief: Vec<f64> = self.belief.iter().map(|b| discount * b).collect();
        let uncertainty = self.uncertainty + (1.0 - discount) * self.belief.iter().sum::<f64>();
        Opinion::from_parts(belief, uncertainty, self.base_rate.clone())
    }

    /// Degree of conflict: half the L1 distance of the projected
    /// probabilities, attenuated by both opinions' certainty `(1 - u)`.
    pub fn degree_of_conflict(&self, other: &Opinion) -> Result<f64> {
        if other.cardinality() != self.cardinality() {
            return Err(Error::Cardinality {
                expected: self.cardinality(),
                found: other.cardinality(),
            });
        }
        let distance: f64 = self
            .project()
            .iter()
            .zip(other.project())
            .map(|(p, q)| (p - q).abs())
            .sum::<f64>()
            / 2.0;
        let dc = distance * (1.0 - self.uncertainty) * (1.0 - other.uncertainty);
        Ok(dc.clamp(0.0, 1.0))
    }
}

/// Dirichlet evidence: per-outcome counts `r`, prior weight `W`, base rate `a`.
#[derive(Debug, Clone, PartialEq)]
pub struct EvidenceVector {
    evidence: Vec<f64>,
    prior_weight: f64,
    base_rate: Vec<f64>,
}

impl EvidenceVector {
    pub fn new(evidence: Vec<f64>, prior_weight: f64, base_rate: Vec<f64>) -> Result<Self> {
        let k = evidence.len();
        if k < 2 {
            return Err(Error::InvalidEvidence(format!(
                "domain cardinality {k} < 2"
            )));
        }
        if base_rate.len() != k {
            return Err(Error::Cardinality {
                expected: k,
                found: base_rate.len(),
            });
        }
        if let Some(r) = evidence.iter().find(|r| !(r.is_finite() && **r >= 0.0)) {
            return Err(Error::InvalidEvidence(format!(
                "evidence component {r} < 0"
            )));
        }
        if !(prior_weight.is_finite() && prior_weight > 0.0) {
            return Err(Error::InvalidEvidence(format!(
                "prior weight {prior_weight} must be > 0"
            )));
        }
        let base_rate = check_distribution(&base_rate, "base rate")
            .map_err(|e| Error::InvalidEvidence(e.to_string()))?;
        Ok(EvidenceVector {
            evidence,
            prior_weight,
            base_rate,
        })
    }

    /// Evidence with `W = 2` and a uniform base rate.
    pub fn with_uniform_prior(evidence: Vec<f64>) -> Result<Self> {
        let k = evidence.len().max(1);
        EvidenceVector::new(evidence, DEFAULT_PRIOR_WEIGHT, vec![1.0 / k as f64; k])
    }

    pub fn evidence(&self) -> &[f64] {
        &self.evidence
    }

    pub fn prior_weight(&self) -> f64 {
        self.prior_weight
    }

    pub fn base_rate(&self) -> &[f64] {
        &self.base_rate
    }

    pub fn total(&self) -> f64 {
        self.evidence.iter().sum()
    }

    /// Dirichlet parameters `α(x) = r(x) + a(x)·W`.
    pub fn alpha(&self) -> Vec<f64> {
        self.evidence
            .iter()
            .zip(&self.base_rate)
            .map(|(r, a)| r + a * self.prior_weight)
            .collect()
    }

    /// Dirichlet density at the probability vector `p`.
    pub fn dirichlet_pdf(&self, p: &[f64]) -> Result<f64> {
        if p.len() != self.evidence.len() {
            return Err(Error::Cardinality {
                expected: self.evidence.len(),
                found: p.len(),
            });
        }
        let p =
            check_distribution(p, "probability").map_err(|e| Error::Parameter(e.to_string()))?;
        let alpha = self.alpha();
        if let Some(a) = alpha.iter().find(|a| **a <= 0.0) {
            return Err(Error::Parameter(format!("Dirichlet parameter {a} <= 0")));
        }

        let mut log_density = ln_gamma(alpha.iter().sum());
        for (&a, &x) in alpha.iter().zip(&p) {
            log_density -= ln_gamma(a);
            if x > 0.0 {
                log_density += (a - 1.0) * x.ln();
            } else if a < 1.0 {
                return Err(Error::Parameter(format!(
                    "density unbounded at p = 0 for parameter {a} < 1"
                )));
            } else if a > 1.0 {
                return Ok(0.0);
            }
        }
        Ok(log_density.exp())
    }
}
