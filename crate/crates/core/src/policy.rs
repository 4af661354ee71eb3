//! Allocation policies: EA, AOA, and DAM.
//!
//! Each policy maps the current information state to the next pair to
//! sample. EA cycles through the pairs; AOA maximizes a variance-only
//! lookahead score; DAM maximizes the tangent-inner-ball value function
//! approximation, which additionally weights every variance by the
//! sensitivity of the ranked stationary-probability differences. All three
//! are deterministic functions of their inputs, with argmax ties broken by
//! the lexicographically smallest pair.

use std::collections::BTreeSet;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::pair::Pair;
use crate::posterior::PosteriorState;
use crate::sensitivity::PosteriorSummary;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PolicyKind {
    Ea,
    Aoa,
    Dam,
}

impl PolicyKind {
    pub fn name(&self) -> &'static str {
        match self {
            PolicyKind::Ea => "EA",
            PolicyKind::Aoa => "AOA",
            PolicyKind::Dam => "DAM",
        }
    }
}

impl std::fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "EA" => Ok(PolicyKind::Ea),
            "AOA" => Ok(PolicyKind::Aoa),
            "DAM" => Ok(PolicyKind::Dam),
            other => Err(Error::Config(format!(
                "unknown policy `{other}` (expected EA, AOA, or DAM)"
            ))),
        }
    }
}

/// Subset size, comparison shift, and policy selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyConfig {
    pub m: usize,
    pub epsilon: f64,
    pub policy_kind: PolicyKind,
    /// Experimental: weight the AOA denominator by the difference
    /// sensitivities (making it coincide with the DAM score). Off by
    /// default.
    pub aoa_weighted: bool,
}

impl PolicyConfig {
    pub const DEFAULT_EPSILON: f64 = 1e-4;

    pub fn new(m: usize, policy_kind: PolicyKind) -> Self {
        PolicyConfig {
            m,
            epsilon: Self::DEFAULT_EPSILON,
            policy_kind,
            aoa_weighted: false,
        }
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.m == 0 || self.m >= n {
            return Err(Error::InvalidSubsetSize { m: self.m, n });
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidEpsilon(self.epsilon));
        }
        Ok(())
    }
}

/// One allocation step: the chosen pair, the 1-based step number it will
/// occupy, and the policy score of the chosen pair (absent for EA).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AllocationDecision {
    pub pair: Pair,
    pub step: u64,
    pub score: Option<f64>,
}

/// Equal allocation: pair number (t mod n(n-1)/2) in lexicographic order,
/// so all pair counts stay within one of each other.
pub fn ea_next(t: u64, n: usize) -> AllocationDecision {
    let pairs = Pair::count(n) as u64;
    let pair = Pair::from_index((t % pairs) as usize, n);
    AllocationDecision {
        pair,
        step: t + 1,
        score: None,
    }
}

/// Per-comparison scratch shared by the DAM and weighted-AOA scorers.
struct ComparisonTerms {
    /// Ranked comparison (k, l), k <= m < l.
    comparisons: Vec<(usize, usize)>,
    /// eta_{kl} at the current state.
    eta: Vec<f64>,
    /// S_{kl} = sum over pairs of d_rq(k,l)^2 sigma_rq^2 (current
    /// variances, no lookahead).
    weighted_var: Vec<f64>,
}

fn comparison_terms(summary: &PosteriorSummary, config: &PolicyConfig) -> ComparisonTerms {
    let n = summary.n();
    let m = config.m;
    let mut comparisons = Vec::with_capacity(m * (n - m));
    let mut eta = Vec::with_capacity(m * (n - m));
    for k in 1..=m {
        for l in m + 1..=n {
            comparisons.push((k, l));
            let shifted = summary.pi_at_rank(k) - summary.pi_at_rank(l) + config.epsilon;
            eta.push(shifted * shifted);
        }
    }
    let mut weighted_var = vec![0.0; comparisons.len()];
    for pair in Pair::all(n) {
        let var = summary.sigma_sq[pair.index(n)];
        for (c, &(k, l)) in comparisons.iter().enumerate() {
            let d = summary.d(pair, k, l);
            weighted_var[c] += d * d * var;
        }
    }
    ComparisonTerms {
        comparisons,
        eta,
        weighted_var,
    }
}

/// DAM score for one candidate given precomputed comparison terms. The
/// candidate only changes one variance term per denominator: its variance
/// is replaced by the lookahead (+2) form, i.e. the denominator shrinks by
/// d_cand(k,l)^2 (sigma^2 - lookahead sigma^2).
fn dam_score(
    state: &PosteriorState,
    summary: &PosteriorSummary,
    terms: &ComparisonTerms,
    candidate: Pair,
) -> Result<f64> {
    let reduction = state.variance(candidate) - state.lookahead_variance(candidate, candidate)?;
    let mut best: Option<f64> = None;
    for (c, &(k, l)) in terms.comparisons.iter().enumerate() {
        let d = summary.d(candidate, k, l);
        let denom = terms.weighted_var[c] - d * d * reduction;
        if denom > 0.0 {
            let ratio = terms.eta[c] / denom;
            best = Some(best.map_or(ratio, |b: f64| b.min(ratio)));
        }
    }
    best.ok_or(Error::DegenerateState)
}

/// Value function approximation for sampling one candidate pair: the
/// minimum over ranked comparisons (k <= m < l) of
///
/// ```text
/// eta_kl / sum_{r<q} d_rq(k,l)^2 * (sigma_rq^2 with the candidate's
///                                    variance in lookahead form)
/// ```
pub fn dam_vfa(
    state: &PosteriorState,
    summary: &PosteriorSummary,
    candidate: Pair,
    config: &PolicyConfig,
) -> Result<f64> {
    candidate.validate(summary.n())?;
    config.validate(summary.n())?;
    let terms = comparison_terms(summary, config);
    dam_score(state, summary, &terms, candidate)
}

/// DAM allocation: the candidate pair maximizing [`dam_vfa`], ties broken
/// by the lexicographically smallest pair.
pub fn dam_next(
    state: &PosteriorState,
    summary: &PosteriorSummary,
    config: &PolicyConfig,
) -> Result<AllocationDecision> {
    config.validate(summary.n())?;
    let terms = comparison_terms(summary, config);
    let mut best: Option<(Pair, f64)> = None;
    for candidate in Pair::all(summary.n()) {
        let score = dam_score(state, summary, &terms, candidate)?;
        if best.map_or(true, |(_, b)| score > b) {
            best = Some((candidate, score));
        }
    }
    let (pair, score) = best.expect("at least one candidate pair");
    Ok(AllocationDecision {
        pair,
        step: state.total() + 1,
        score: Some(score),
    })
}

/// AOA allocation: maximizes min_kl eta_kl / sum_{r<q} lookahead-variance,
/// the printed form without sensitivity weights. The denominator does not
/// depend on (k,l), so the minimum is min eta over the total lookahead
/// variance; the candidate enters only through its own variance reduction.
pub fn aoa_next(
    state: &PosteriorState,
    summary: &PosteriorSummary,
    config: &PolicyConfig,
) -> Result<AllocationDecision> {
    config.validate(summary.n())?;
    if config.aoa_weighted {
        return dam_next(state, summary, config);
    }
    let n = summary.n();
    let mut min_eta = f64::INFINITY;
    for k in 1..=config.m {
        for l in config.m + 1..=n {
            let shifted = summary.pi_at_rank(k) - summary.pi_at_rank(l) + config.epsilon;
            min_eta = min_eta.min(shifted * shifted);
        }
    }
    let total_var: f64 = summary.sigma_sq.iter().sum();
    let mut best: Option<(Pair, f64)> = None;
    for candidate in Pair::all(n) {
        let reduction =
            state.variance(candidate) - state.lookahead_variance(candidate, candidate)?;
        let score = min_eta / (total_var - reduction);
        if best.map_or(true, |(_, b)| score > b) {
            best = Some((candidate, score));
        }
    }
    let (pair, score) = best.expect("at least one candidate pair");
    Ok(AllocationDecision {
        pair,
        step: state.total() + 1,
        score: Some(score),
    })
}

/// The first m entries of the ranking, as a node-id set.
pub fn select_top_m(summary: &PosteriorSummary, m: usize) -> Result<BTreeSet<usize>> {
    if m == 0 || m >= summary.n() {
        return Err(Error::InvalidSubsetSize { m, n: summary.n() });
    }
    Ok(summary.ranking[..m].iter().copied().collect())
}
