//! Posterior summary consumed by the allocation policies.
//!
//! A summary is the full first-order picture of the posterior at the
//! current mean point: plug-in stationary probabilities, the descending
//! ranking, the propagated variances tau_k^2, the per-pair posterior
//! variances, and the sensitivities of every stationary probability with
//! respect to every interaction parameter. The summary is recomputed from
//! scratch at each allocation step (fresh solves at the new posterior
//! mean); the chain module's factorization reuse keeps that cheap.

use crate::chain::{build_transition, stationary, stationary_derivatives, StationarySolution};
use crate::error::{Error, Result};
use crate::pair::Pair;
use crate::posterior::PosteriorState;

/// Plug-in stationary estimates, ranking, and sensitivity data for one
/// posterior state.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSummary {
    n: usize,
    /// Stationary probabilities at the posterior mean; entry k is node k+1.
    pub pi_hat: Vec<f64>,
    /// Node ids sorted by descending pi_hat, ties broken by ascending id.
    pub ranking: Vec<usize>,
    /// Normal-approximation variance of each pi_k.
    pub tau_sq: Vec<f64>,
    /// Posterior variance of each interaction parameter, pair order.
    pub sigma_sq: Vec<f64>,
    derivatives: StationarySolution,
}

impl PosteriorSummary {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Derivative vector of pi with respect to x for one pair.
    pub fn dpi(&self, pair: Pair) -> &[f64] {
        self.derivatives.dpi(pair)
    }

    /// Sensitivity of the difference between the k-th and l-th ranked
    /// stationary probabilities with respect to one interaction parameter:
    /// d_rq(k,l) = dpi_{<k>}/dx_rq - dpi_{<l>}/dx_rq (ranked positions are
    /// 1-based).
    pub fn d(&self, pair: Pair, k: usize, l: usize) -> f64 {
        let row = self.derivatives.dpi(pair);
        row[self.ranking[k - 1] - 1] - row[self.ranking[l - 1] - 1]
    }

    /// pi_hat at the k-th ranked position (1-based).
    pub fn pi_at_rank(&self, k: usize) -> f64 {
        self.pi_hat[self.ranking[k - 1] - 1]
    }
}

/// Node ids 1..=n sorted by descending score, ties by ascending id.
pub(crate) fn rank_nodes(pi: &[f64]) -> Vec<usize> {
    let mut ids: Vec<usize> = (1..=pi.len()).collect();
    ids.sort_by(|&a, &b| pi[b - 1].total_cmp(&pi[a - 1]).then(a.cmp(&b)));
    ids
}

/// Build the posterior summary for a state: solve the chain at the
/// posterior means and assemble ranking, tau^2, sigma^2 and sensitivities.
/// Deterministic; propagates solver failures from the chain module.
pub fn summarize(state: &PosteriorState) -> Result<PosteriorSummary> {
    let n = state.n();
    let x = state.mean_vector();
    let p = build_transition(&x);
    let pi = stationary(&p)?;
    let derivatives = stationary_derivatives(&p, &pi, &x)?;

    let sigma_sq: Vec<f64> = Pair::all(n).map(|pair| state.variance(pair)).collect();
    let mut tau_sq = vec![0.0; n];
    for pair in Pair::all(n) {
        let var = sigma_sq[pair.index(n)];
        let row = derivatives.dpi(pair);
        for k in 0..n {
            tau_sq[k] += row[k] * row[k] * var;
        }
    }

    let ranking = rank_nodes(&pi);
    Ok(PosteriorSummary {
        n,
        pi_hat: pi,
        ranking,
        tau_sq,
        sigma_sq,
        derivatives,
    })
}

/// Squared shifted mean (eta) and variance (zeta) of the approximate
/// posterior of the difference pi_{<k>} - pi_{<l>}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonMoments {
    /// (pi_{<k>} - pi_{<l>} + epsilon)^2
    pub eta: f64,
    /// sum over pairs of [d_rq(k,l) * sigma_rq]^2
    pub zeta: f64,
}

/// Moments of the ranked difference (k,l) with sigma taken from the
/// current state (no lookahead). Requires 1 <= k < l <= n.
pub fn comparison_moments(
    summary: &PosteriorSummary,
    k: usize,
    l: usize,
    epsilon: f64,
) -> Result<ComparisonMoments> {
    let n = summary.n;
    if k == 0 || k >= l || l > n {
        return Err(Error::InvalidRankPair { k, l, n });
    }
    if !(epsilon > 0.0) {
        return Err(Error::InvalidEpsilon(epsilon));
    }
    let diff = summary.pi_at_rank(k) - summary.pi_at_rank(l);
    let shifted = diff + epsilon;
    let mut zeta = 0.0;
    for pair in Pair::all(n) {
        let term = summary.d(pair, k, l) * summary.sigma_sq[pair.index(n)].sqrt();
        zeta += term * term;
    }
    Ok(ComparisonMoments {
        eta: shifted * shifted,
        zeta,
    })
}

/// Squared radius of the maximal tangent inner ball for selecting the top
/// m nodes: the minimum of eta/zeta over ranked comparisons (k <= m < l).
///
/// Comparisons with zeta = 0 have no posterior uncertainty left and are
/// excluded from the minimum; if every comparison is excluded the state is
/// reported as degenerate.
pub fn ball_radius_sq(summary: &PosteriorSummary, m: usize, epsilon: f64) -> Result<f64> {
    let n = summary.n;
    if m == 0 || m >= n {
        return Err(Error::InvalidSubsetSize { m, n });
    }
    let mut best: Option<f64> = None;
    for k in 1..=m {
        for l in m + 1..=n {
            let moments = comparison_moments(summary, k, l, epsilon)?;
            if moments.zeta > 0.0 {
                let ratio = moments.eta / moments.zeta;
                best = Some(best.map_or(ratio, |b: f64| b.min(ratio)));
            }
        }
    }
    best.ok_or(Error::DegenerateState)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::pair::Pair;
    use crate::posterior::PosteriorState;

    fn prior(n: usize) -> PosteriorState {
        PosteriorState::new(n).unwrap()
    }

    /// Posterior state whose means are exactly the Table-1 parameters
    /// (0.7, 0.35, 0.6).
    pub(crate) fn table1_state() -> PosteriorState {
        let mut state = prior(3);
        let feed = |state: &mut PosteriorState, i, j, ones: usize, zeros: usize| {
            let pair = Pair::new(i, j).unwrap();
            for _ in 0..ones {
                state.update(pair, true).unwrap();
            }
            for _ in 0..zeros {
                state.update(pair, false).unwrap();
            }
        };
        feed(&mut state, 1, 2, 6, 2); // Beta(7,3)  -> 0.70
        feed(&mut state, 1, 3, 6, 12); // Beta(7,13) -> 0.35
        feed(&mut state, 2, 3, 2, 1); // Beta(3,2)  -> 0.60
        state
    }

    #[test]
    fn two_node_prior_summary() {
        let summary = summarize(&prior(2)).unwrap();
        assert_eq!(summary.pi_hat, vec![0.5, 0.5]);
        assert_eq!(summary.ranking, vec![1, 2]);
        for k in 0..2 {
            assert!((summary.tau_sq[k] - 1.0 / 12.0).abs() < 1e-12);
        }
    }

    #[test]
    fn table1_ranking() {
        let summary = summarize(&table1_state()).unwrap();
        assert_eq!(summary.ranking, vec![3, 1, 2]);
    }

    #[test]
    fn pi_hat_sums_to_one() {
        let summary = summarize(&table1_state()).unwrap();
        let s: f64 = summary.pi_hat.iter().sum();
        assert!((s - 1.0).abs() < 1e-10);
    }

    #[test]
    fn summarize_is_pure() {
        let state = table1_state();
        let a = summarize(&state).unwrap();
        let b = summarize(&state).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn eta_with_tied_probabilities() {
        let summary = summarize(&prior(2)).unwrap();
        let moments = comparison_moments(&summary, 1, 2, 1e-4).unwrap();
        assert!((moments.eta - 1e-8).abs() < 1e-22);
    }

    #[test]
    fn two_node_prior_zeta() {
        // d(1,2) = 1 - (-1) = 2 and sigma^2 = 1/12, so zeta = 4/12 = 1/3.
        let summary = summarize(&prior(2)).unwrap();
        let moments = comparison_moments(&summary, 1, 2, 1e-4).unwrap();
        assert!((moments.zeta - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn two_node_prior_ball_radius() {
        let summary = summarize(&prior(2)).unwrap();
        let r = ball_radius_sq(&summary, 1, 1e-4).unwrap();
        assert!((r - 3e-8).abs() < 1e-18);
    }

    #[test]
    fn ball_radius_is_minimum() {
        let mut state = prior(4);
        let obs = [
            (1, 2, true),
            (1, 3, false),
            (2, 4, true),
            (3, 4, true),
            (1, 4, false),
            (2, 3, true),
            (1, 2, true),
        ];
        for (i, j, o) in obs {
            state.update(Pair::new(i, j).unwrap(), o).unwrap();
        }
        let summary = summarize(&state).unwrap();
        let m = 2;
        let r = ball_radius_sq(&summary, m, 1e-4).unwrap();
        for k in 1..=m {
            for l in m + 1..=4 {
                let mom = comparison_moments(&summary, k, l, 1e-4).unwrap();
                if mom.zeta > 0.0 {
                    assert!(r <= mom.eta / mom.zeta + 1e-18);
                }
            }
        }
    }

    #[test]
    fn tau_matches_independent_loop_order() {
        let state = table1_state();
        let summary = summarize(&state).unwrap();
        let n = state.n();
        for k in 0..n {
            let mut acc = 0.0;
            for pair in Pair::all(n) {
                let d = summary.dpi(pair)[k];
                acc += d * d * state.variance(pair);
            }
            assert!((acc - summary.tau_sq[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn eta_at_least_epsilon_squared() {
        let summary = summarize(&table1_state()).unwrap();
        let eps = 1e-4;
        for k in 1..=2 {
            for l in k + 1..=3 {
                let mom = comparison_moments(&summary, k, l, eps).unwrap();
                assert!(mom.eta >= eps * eps);
                assert!(mom.zeta >= 0.0);
            }
        }
    }

    #[test]
    fn rejects_bad_rank_pairs_and_epsilon() {
        let summary = summarize(&prior(3)).unwrap();
        assert!(comparison_moments(&summary, 0, 2, 1e-4).is_err());
        assert!(comparison_moments(&summary, 2, 2, 1e-4).is_err());
        assert!(comparison_moments(&summary, 1, 4, 1e-4).is_err());
        assert!(comparison_moments(&summary, 1, 2, 0.0).is_err());
        assert!(ball_radius_sq(&summary, 0, 1e-4).is_err());
        assert!(ball_radius_sq(&summary, 3, 1e-4).is_err());
    }
}
