//! Hoeffding sample planning, failure bounds and verdicts.

use serde::{Deserialize, Serialize};

use crate::error::{Result, WitnessError};
use crate::optimize::FeasibleSetSpec;

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(WitnessError::InvalidEpsilon(epsilon));
    }
    Ok(())
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(WitnessError::InvalidArgument(format!("delta must lie in (0, 1), got {delta}")));
    }
    Ok(())
}

/// `ceil(-ln(delta) / (2 epsilon^2))`.
pub fn required_samples(epsilon: f64, delta: f64) -> Result<u64> {
    check_epsilon(epsilon)?;
    check_delta(delta)?;
    let m = (-delta.ln() / (2.0 * epsilon * epsilon)).ceil();
    if !m.is_finite() || m > u64::MAX as f64 {
        return Err(WitnessError::InvalidEpsilon(epsilon));
    }
    Ok(m as u64)
}

/// `min(1, exp(-2 m epsilon^2))`.
pub fn failure_bound_single(m: u64, epsilon: f64) -> f64 {
    (-2.0 * m as f64 * epsilon * epsilon).exp().min(1.0)
}

/// `min(1, sum_j exp(-2 M_j (epsilon / N)^2))`, one term per window.
pub fn failure_bound_multi(ms: &[u64], epsilon: f64, n_windows: usize) -> f64 {
    let e = epsilon / n_windows as f64;
    ms.iter().map(|&m| (-2.0 * m as f64 * e * e).exp()).sum::<f64>().min(1.0)
}

/// Per-window batch size making the multi-window bound at most `delta`.
pub fn required_samples_multi(epsilon: f64, delta: f64, n_windows: usize) -> Result<u64> {
    check_epsilon(epsilon)?;
    check_delta(delta)?;
    if n_windows == 0 {
        return Err(WitnessError::InvalidArgument("need at least one window".into()));
    }
    let n = n_windows as f64;
    Ok((n * n * (n / delta).ln() / (2.0 * epsilon * epsilon)).ceil() as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    CertifiedNonGaussianOrEnergyExceeded,
    CertifiedRankGeKOrEnergyExceeded,
    Inconclusive,
}

impl Verdict {
    pub fn is_certified(self) -> bool {
        !matches!(self, Verdict::Inconclusive)
    }

    pub fn exit_code(self) -> i32 {
        if self.is_certified() {
            0
        } else {
            2
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificationReport {
    pub threshold: f64,
    pub estimator: f64,
    pub epsilon: f64,
    /// `threshold - estimator - epsilon`.
    pub violation_margin: f64,
    pub failure_bound: f64,
    pub confidence: f64,
    pub verdict: Verdict,
    pub energy_bound: f64,
    pub rank_tested: usize,
    /// Smallest stellar rank implied by a certificate, unless the energy bound is broken.
    pub certified_min_rank: Option<usize>,
    pub samples_per_window: Vec<u64>,
}

impl CertificationReport {
    pub fn to_text(&self) -> String {
        let claim = match self.verdict {
            Verdict::CertifiedNonGaussianOrEnergyExceeded => format!(
                "the state is non-Gaussian or its mean photon number exceeds {}",
                self.energy_bound
            ),
            Verdict::CertifiedRankGeKOrEnergyExceeded => format!(
                "the state has stellar rank at least {} or mean photon number above {}",
                self.rank_tested + 1,
                self.energy_bound
            ),
            Verdict::Inconclusive => "no conclusion".to_string(),
        };
        format!(
            "verdict: {:?}\nclaim: {claim}\nthreshold (upper bound): {:.10}\nestimator: {:.10}\nepsilon: {}\nmargin: {:.10}\nfailure bound: {:.6e}\nconfidence: {:.6}\n",
            self.verdict,
            self.threshold,
            self.estimator,
            self.epsilon,
            self.violation_margin,
            self.failure_bound,
            self.confidence
        )
    }
}

/// Compares the estimator with the epsilon-deflated threshold. Strictly
/// below certifies, anything else is inconclusive.
pub fn certify(
    threshold: f64,
    estimator: f64,
    epsilon: f64,
    samples_per_window: &[u64],
    spec: &FeasibleSetSpec,
) -> Result<CertificationReport> {
    check_epsilon(epsilon)?;
    if samples_per_window.is_empty() {
        return Err(WitnessError::InvalidArgument("no sample counts supplied".into()));
    }
    let failure_bound = if samples_per_window.len() == 1 {
        failure_bound_single(samples_per_window[0], epsilon)
    } else {
        failure_bound_multi(samples_per_window, epsilon, samples_per_window.len())
    };
    let margin = threshold - estimator - epsilon;
    let verdict = if estimator < threshold - epsilon && margin > 0.0 {
        if spec.max_rank == 0 {
            Verdict::CertifiedNonGaussianOrEnergyExceeded
        } else {
            Verdict::CertifiedRankGeKOrEnergyExceeded
        }
    } else {
        Verdict::Inconclusive
    };
    Ok(CertificationReport {
        threshold,
        estimator,
        epsilon,
        violation_margin: margin,
        failure_bound,
        confidence: 1.0 - failure_bound,
        verdict,
        energy_bound: spec.max_energy,
        rank_tested: spec.max_rank,
        certified_min_rank: verdict.is_certified().then_some(spec.max_rank + 1),
        samples_per_window: samples_per_window.to_vec(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanRow {
    pub epsilon: f64,
    pub samples_per_window: u64,
    pub total_samples: u64,
    pub failure_bound: f64,
}

/// Candidate `(epsilon, M)` pairs for a predicted violation: epsilon is a
/// fraction of the violation, so the expected margin stays positive.
pub fn plan(predicted_violation: f64, delta: f64, n_windows: usize) -> Result<Vec<PlanRow>> {
    if !(predicted_violation > 0.0) {
        return Err(WitnessError::InvalidArgument(
            "planning needs a positive predicted violation".into(),
        ));
    }
    [0.25, 0.5, 0.75, 0.9]
        .iter()
        .map(|f| {
            let epsilon = f * predicted_violation;
            let m = required_samples_multi(epsilon, delta, n_windows)?;
            let ms = vec![m; n_windows];
            Ok(PlanRow {
                epsilon,
                samples_per_window: m,
                total_samples: m * n_windows as u64,
                failure_bound: if n_windows == 1 {
                    failure_bound_single(m, epsilon)
                } else {
                    failure_bound_multi(&ms, epsilon, n_windows)
                },
            })
        })
        .collect()
}
