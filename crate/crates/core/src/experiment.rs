//! Seeded Monte Carlo replications of the sample-allocate-select loop.
//!
//! A replication starts from the uniform prior and repeats
//! summarize -> policy decision -> draw observation -> update, recording at
//! each checkpoint budget whether the selected subset equals the true
//! top-m set. Replication r draws its observations from a ChaCha8 stream
//! seeded with `base_seed + r`, so results are reproducible bit-for-bit
//! across platforms and across worker counts; aggregation is a plain
//! order-insensitive count.
//!
//! With the `parallel` feature (the default) replications are distributed
//! over a rayon thread pool; without it the same loop runs sequentially.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::chain::{build_transition, stationary, InteractionVector};
use crate::error::{Error, Result};
use crate::pair::Pair;
use crate::policy::{aoa_next, dam_next, ea_next, select_top_m, PolicyConfig, PolicyKind};
use crate::posterior::{draw_observation, PosteriorState};
use crate::sensitivity::{rank_nodes, summarize, PosteriorSummary};

/// Minimal gap between the stationary probabilities at consecutive ranks
/// for a truth to define a unique correct answer.
pub const SEPARATION_TOL: f64 = 1e-6;

/// Ground-truth network: interaction parameters plus the solved stationary
/// vector and its descending ranking.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionTruth {
    x: InteractionVector,
    pi: Vec<f64>,
    ranking: Vec<usize>,
}

impl InteractionTruth {
    /// Solve the chain once and cache the true ranking.
    pub fn from_vector(x: InteractionVector) -> Result<Self> {
        let pi = stationary(&build_transition(&x))?;
        let ranking = rank_nodes(&pi);
        Ok(InteractionTruth { x, pi, ranking })
    }

    pub fn x(&self) -> &InteractionVector {
        &self.x
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    pub fn ranking(&self) -> &[usize] {
        &self.ranking
    }

    pub fn interaction(&self, pair: Pair) -> f64 {
        self.x.get(pair)
    }

    /// The true top-m node set.
    pub fn top_set(&self, m: usize) -> Result<BTreeSet<usize>> {
        if m == 0 || m >= self.x.n() {
            return Err(Error::InvalidSubsetSize { m, n: self.x.n() });
        }
        Ok(self.ranking[..m].iter().copied().collect())
    }

    /// Gap between the stationary probabilities at ranks m and m+1.
    pub fn separation(&self, m: usize) -> f64 {
        self.pi[self.ranking[m - 1] - 1] - self.pi[self.ranking[m] - 1]
    }

    fn min_separation(&self) -> f64 {
        (1..self.x.n())
            .map(|m| self.separation(m))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Truth with x_ij = base + slope * (j - i); all values must land in [0,1].
pub fn make_truth_linear_gap(n: usize, base: f64, slope: f64) -> Result<InteractionTruth> {
    if n < 2 {
        return Err(Error::NodeCount(n));
    }
    let x = InteractionVector::from_fn(n, |p| base + slope * (p.j() - p.i()) as f64)?;
    InteractionTruth::from_vector(x)
}

/// The 10-node benchmark network: x_ij = 0.5 + 0.03 (j - i). Nodes 1, 2, 3
/// are the top-3 nodes and the true stationary vector strictly decreases
/// in the node index.
pub fn make_truth_example1() -> InteractionTruth {
    make_truth_linear_gap(10, 0.5, 0.03).expect("linear-gap parameters are in range")
}

/// Truth with every x_ij drawn i.i.d. uniform on [0,1] from a seeded
/// stream. Redrawn (up to 100 attempts) until all consecutive ranking gaps
/// are at least [`SEPARATION_TOL`], so the truth has a unique top-m set
/// for every m.
pub fn make_truth_uniform(n: usize, seed: u64) -> Result<InteractionTruth> {
    if n < 2 {
        return Err(Error::NodeCount(n));
    }
    const ATTEMPTS: usize = 100;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..ATTEMPTS {
        let x = InteractionVector::from_fn(n, |_| rng.random::<f64>())?;
        let truth = InteractionTruth::from_vector(x)?;
        if truth.min_separation() >= SEPARATION_TOL {
            return Ok(truth);
        }
    }
    Err(Error::TruthGeneration { attempts: ATTEMPTS })
}

/// Full experiment description: truth, policies to compare, checkpoint
/// budgets, replication count, and the base seed.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub truth: InteractionTruth,
    pub policies: Vec<PolicyKind>,
    pub m: usize,
    pub epsilon: f64,
    pub budgets: Vec<u64>,
    pub replications: u64,
    pub base_seed: u64,
    pub aoa_weighted: bool,
}

impl ExperimentConfig {
    pub fn new(truth: InteractionTruth, policies: Vec<PolicyKind>, m: usize) -> Self {
        ExperimentConfig {
            truth,
            policies,
            m,
            epsilon: PolicyConfig::DEFAULT_EPSILON,
            budgets: Vec::new(),
            replications: 1,
            base_seed: 0,
            aoa_weighted: false,
        }
    }

    pub fn policy_config(&self, kind: PolicyKind) -> PolicyConfig {
        PolicyConfig {
            m: self.m,
            epsilon: self.epsilon,
            policy_kind: kind,
            aoa_weighted: self.aoa_weighted,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.truth.x().n();
        if self.m == 0 || self.m >= n {
            return Err(Error::InvalidSubsetSize { m: self.m, n });
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidEpsilon(self.epsilon));
        }
        if self.policies.is_empty() {
            return Err(Error::Config("at least one policy is required".into()));
        }
        if self.budgets.is_empty() {
            return Err(Error::Config("at least one budget checkpoint is required".into()));
        }
        if self.budgets[0] == 0 {
            return Err(Error::Config("budgets must be positive".into()));
        }
        if !self.budgets.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Config("budgets must be strictly ascending".into()));
        }
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        // Ties at the subset boundary make the correct answer ill-defined.
        if self.truth.separation(self.m) < SEPARATION_TOL {
            return Err(Error::Config(format!(
                "true stationary probabilities at ranks {} and {} are separated by {:.3e} < {SEPARATION_TOL:.0e}",
                self.m,
                self.m + 1,
                self.truth.separation(self.m),
            )));
        }
        Ok(())
    }
}

/// Per-replication result: correctness at each checkpoint plus the final
/// pair allocation counts.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationOutcome {
    /// One entry per checkpoint budget, in budget order.
    pub correct: Vec<bool>,
    /// Observations allocated to each pair (lexicographic order) at the
    /// final budget.
    pub pair_counts: Vec<u64>,
}

/// One traced allocation step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    /// 1-based step number.
    pub step: u64,
    pub pair: Pair,
    pub obs: bool,
    /// Top-m selection given the information after this observation.
    pub selection: BTreeSet<usize>,
    /// Policy score of the chosen pair (absent for EA).
    pub score: Option<f64>,
}

/// Run one replication; see the module docs for the loop structure.
/// Checkpoints are evaluated after exactly b samples, before sample b+1.
pub fn run_replication<R: Rng + ?Sized>(
    truth: &InteractionTruth,
    config: &PolicyConfig,
    budgets: &[u64],
    rng: &mut R,
) -> Result<ReplicationOutcome> {
    run_impl(truth, config, budgets, rng, None)
}

/// Same loop, additionally recording every step (pair, observation, and
/// the post-update selection) into `trace`.
pub fn run_replication_traced<R: Rng + ?Sized>(
    truth: &InteractionTruth,
    config: &PolicyConfig,
    budgets: &[u64],
    rng: &mut R,
    trace: &mut Vec<StepRecord>,
) -> Result<ReplicationOutcome> {
    run_impl(truth, config, budgets, rng, Some(trace))
}

fn run_impl<R: Rng + ?Sized>(
    truth: &InteractionTruth,
    config: &PolicyConfig,
    budgets: &[u64],
    rng: &mut R,
    mut trace: Option<&mut Vec<StepRecord>>,
) -> Result<ReplicationOutcome> {
    let n = truth.x().n();
    if !budgets.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::Config("budgets must be strictly ascending".into()));
    }
    let target = truth.top_set(config.m)?;
    let max_budget = budgets.last().copied().unwrap_or(0);

    let mut state = PosteriorState::new(n)?;
    let mut correct = Vec::with_capacity(budgets.len());
    let mut next_checkpoint = 0;
    // The summary is pure in the state, so one computation serves both the
    // checkpoint evaluation and a summary-driven policy at the same step.
    // EA ignores it and only forces a solve at checkpoints.
    let mut cached: Option<PosteriorSummary> = None;

    for t in 0..=max_budget {
        while next_checkpoint < budgets.len() && budgets[next_checkpoint] == t {
            if cached.is_none() {
                cached = Some(summarize(&state)?);
            }
            let selection = select_top_m(cached.as_ref().unwrap(), config.m)?;
            correct.push(selection == target);
            next_checkpoint += 1;
        }
        if t == max_budget {
            break;
        }

        let decision = match config.policy_kind {
            PolicyKind::Ea => ea_next(t, n),
            PolicyKind::Dam | PolicyKind::Aoa => {
                if cached.is_none() {
                    cached = Some(summarize(&state)?);
                }
                let summary = cached.as_ref().unwrap();
                match config.policy_kind {
                    PolicyKind::Dam => dam_next(&state, summary, config)?,
                    _ => aoa_next(&state, summary, config)?,
                }
            }
        };
        let obs = draw_observation(truth, decision.pair, rng)?;
        state.update(decision.pair, obs)?;
        cached = None;

        if let Some(sink) = trace.as_deref_mut() {
            let summary = summarize(&state)?;
            let selection = select_top_m(&summary, config.m)?;
            cached = Some(summary);
            sink.push(StepRecord {
                step: decision.step,
                pair: decision.pair,
                obs,
                selection,
                score: decision.score,
            });
        }
    }

    let pair_counts = Pair::all(n).map(|p| state.count(p)).collect();
    Ok(ReplicationOutcome {
        correct,
        pair_counts,
    })
}

/// PCS estimate for one (policy, budget) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct PcsCell {
    pub policy: PolicyKind,
    pub budget: u64,
    pub pcs: f64,
    /// sqrt(p (1-p) / replications)
    pub std_error: f64,
    pub replications: u64,
}

/// Estimated PCS per (policy, budget).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PcsCurve {
    pub cells: Vec<PcsCell>,
}

impl PcsCurve {
    pub fn get(&self, policy: PolicyKind, budget: u64) -> Option<&PcsCell> {
        self.cells
            .iter()
            .find(|c| c.policy == policy && c.budget == budget)
    }
}

/// Worker-count selection for [`estimate_pcs`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Workers {
    /// Use the rayon default (all cores) when the `parallel` feature is
    /// enabled; sequential otherwise.
    #[default]
    Default,
    /// Run on the calling thread without touching rayon.
    Serial,
    /// A rayon pool with exactly this many threads (sequential when the
    /// `parallel` feature is disabled).
    Count(usize),
}

/// Estimate the PCS curve: `replications` independent replications per
/// policy, replication r seeded with `base_seed + r`. The per-budget
/// correctness counts are aggregated in replication order, so the output
/// is identical for any worker count.
pub fn estimate_pcs(config: &ExperimentConfig, workers: Workers) -> Result<PcsCurve> {
    config.validate()?;
    let reps = config.replications;
    let mut cells = Vec::with_capacity(config.policies.len() * config.budgets.len());
    for &policy in &config.policies {
        let policy_config = config.policy_config(policy);
        let run_one = |r: u64| -> Result<Vec<bool>> {
            let seed = config.base_seed.wrapping_add(r);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            run_replication(&config.truth, &policy_config, &config.budgets, &mut rng)
                .map(|outcome| outcome.correct)
                .map_err(|e| Error::Replication {
                    replication: r,
                    seed,
                    source: Box::new(e),
                })
        };
        let outcomes = run_replications(reps, &run_one, workers)?;

        let mut hits = vec![0u64; config.budgets.len()];
        for outcome in outcomes {
            let outcome = outcome?;
            for (h, ok) in hits.iter_mut().zip(outcome.iter()) {
                *h += u64::from(*ok);
            }
        }
        for (bi, &budget) in config.budgets.iter().enumerate() {
            let p = hits[bi] as f64 / reps as f64;
            cells.push(PcsCell {
                policy,
                budget,
                pcs: p,
                std_error: (p * (1.0 - p) / reps as f64).sqrt(),
                replications: reps,
            });
        }
    }
    Ok(PcsCurve { cells })
}

#[cfg(feature = "parallel")]
fn run_replications<F>(reps: u64, run_one: &F, workers: Workers) -> Result<Vec<Result<Vec<bool>>>>
where
    F: Fn(u64) -> Result<Vec<bool>> + Sync,
{
    use rayon::prelude::*;
    match workers {
        Workers::Serial | Workers::Count(1) => Ok((0..reps).map(run_one).collect()),
        Workers::Default => Ok((0..reps).into_par_iter().map(run_one).collect()),
        Workers::Count(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| Error::Config(format!("could not build thread pool: {e}")))?;
            Ok(pool.install(|| (0..reps).into_par_iter().map(run_one).collect()))
        }
    }
}

#[cfg(not(feature = "parallel"))]
fn run_replications<F>(reps: u64, run_one: &F, _workers: Workers) -> Result<Vec<Result<Vec<bool>>>>
where
    F: Fn(u64) -> Result<Vec<bool>> + Sync,
{
    Ok((0..reps).map(run_one).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example1_parameters() {
        let truth = make_truth_example1();
        assert_eq!(truth.x().n(), 10);
        assert!((truth.interaction(Pair::new(1, 2).unwrap()) - 0.53).abs() < 1e-15);
        assert!((truth.interaction(Pair::new(1, 10).unwrap()) - 0.77).abs() < 1e-15);
        assert_eq!(truth.top_set(3).unwrap(), BTreeSet::from([1, 2, 3]));
        // strictly decreasing stationary vector
        for k in 1..10 {
            assert!(truth.pi()[k - 1] > truth.pi()[k]);
        }
        assert_eq!(truth.ranking(), (1..=10).collect::<Vec<_>>());
    }

    #[test]
    fn uniform_truth_is_deterministic_and_separated() {
        let a = make_truth_uniform(20, 42).unwrap();
        let b = make_truth_uniform(20, 42).unwrap();
        assert_eq!(a, b);
        assert!(a.min_separation() >= SEPARATION_TOL);
        let c = make_truth_uniform(20, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn budget_zero_checkpoint_is_recorded() {
        let truth = make_truth_example1();
        let config = PolicyConfig::new(3, PolicyKind::Ea);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let outcome = run_replication(&truth, &config, &[0, 5], &mut rng).unwrap();
        assert_eq!(outcome.correct.len(), 2);
        assert_eq!(outcome.pair_counts.iter().sum::<u64>(), 5);
    }

    #[test]
    fn certain_truth_is_learned_quickly() {
        let truth =
            InteractionTruth::from_vector(InteractionVector::new(2, vec![1.0]).unwrap()).unwrap();
        for kind in [PolicyKind::Ea, PolicyKind::Aoa, PolicyKind::Dam] {
            let config = PolicyConfig::new(1, kind);
            let mut hits = 0;
            for seed in 0..100 {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let outcome = run_replication(&truth, &config, &[50], &mut rng).unwrap();
                hits += u64::from(outcome.correct[0]);
            }
            assert!(hits >= 99, "{kind}: only {hits}/100 correct");
        }
    }

    #[test]
    fn dam_trace_is_deterministic() {
        let truth = make_truth_linear_gap(4, 0.5, 0.05).unwrap();
        let config = PolicyConfig::new(2, PolicyKind::Dam);
        let run = |seed: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut trace = Vec::new();
            let outcome =
                run_replication_traced(&truth, &config, &[40], &mut rng, &mut trace).unwrap();
            (outcome, trace)
        };
        assert_eq!(run(7), run(7));
    }

    #[test]
    fn traced_and_untraced_runs_agree() {
        let truth = make_truth_linear_gap(4, 0.5, 0.05).unwrap();
        let config = PolicyConfig::new(2, PolicyKind::Dam);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let plain = run_replication(&truth, &config, &[30], &mut rng).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut trace = Vec::new();
        let traced =
            run_replication_traced(&truth, &config, &[30], &mut rng, &mut trace).unwrap();
        assert_eq!(plain, traced);
        assert_eq!(trace.len(), 30);
    }

    #[test]
    fn ea_trace_matches_round_robin_closed_form() {
        let truth = make_truth_example1();
        let config = PolicyConfig::new(3, PolicyKind::Ea);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut trace = Vec::new();
        let budget = 100;
        let outcome =
            run_replication_traced(&truth, &config, &[budget], &mut rng, &mut trace).unwrap();
        for (t, record) in trace.iter().enumerate() {
            assert_eq!(record.pair, ea_next(t as u64, 10).pair);
        }
        let pairs = Pair::count(10) as u64;
        for (k, &count) in outcome.pair_counts.iter().enumerate() {
            let expected = budget / pairs + u64::from((k as u64) < budget % pairs);
            assert_eq!(count, expected);
        }
        let max = outcome.pair_counts.iter().max().unwrap();
        let min = outcome.pair_counts.iter().min().unwrap();
        assert!(max - min <= 1);
    }

    fn small_config() -> ExperimentConfig {
        let truth = make_truth_linear_gap(4, 0.5, 0.06).unwrap();
        let mut config = ExperimentConfig::new(
            truth,
            vec![PolicyKind::Ea, PolicyKind::Dam],
            2,
        );
        config.budgets = vec![10, 30];
        config.replications = 16;
        config.base_seed = 500;
        config
    }

    #[test]
    fn single_replication_pcs_is_binary() {
        let mut config = small_config();
        config.replications = 1;
        let curve = estimate_pcs(&config, Workers::Serial).unwrap();
        for cell in &curve.cells {
            assert!(cell.pcs == 0.0 || cell.pcs == 1.0);
            assert_eq!(cell.std_error, 0.0);
        }
    }

    #[test]
    fn serial_and_parallel_agree() {
        let config = small_config();
        let serial = estimate_pcs(&config, Workers::Serial).unwrap();
        let parallel = estimate_pcs(&config, Workers::Default).unwrap();
        let two = estimate_pcs(&config, Workers::Count(2)).unwrap();
        assert_eq!(serial, parallel);
        assert_eq!(serial, two);
    }

    #[test]
    fn config_validation_rejects_bad_inputs() {
        let mut config = small_config();
        config.budgets = vec![10, 10];
        assert!(config.validate().is_err());
        let mut config = small_config();
        config.budgets = vec![0, 10];
        assert!(config.validate().is_err());
        let mut config = small_config();
        config.replications = 0;
        assert!(config.validate().is_err());
        let mut config = small_config();
        config.policies.clear();
        assert!(config.validate().is_err());
        let mut config = small_config();
        config.m = 4;
        assert!(config.validate().is_err());
    }

    #[test]
    fn config_rejects_truth_with_tied_boundary() {
        // x = 0.5 on two nodes gives pi = (0.5, 0.5): no unique top-1 set.
        let x = InteractionVector::new(2, vec![0.5]).unwrap();
        let truth = InteractionTruth::from_vector(x).unwrap();
        let mut config = ExperimentConfig::new(truth, vec![PolicyKind::Ea], 1);
        config.budgets = vec![5];
        let err = estimate_pcs(&config, Workers::Serial).unwrap_err();
        assert!(matches!(err, Error::Config(_)), "{err}");
    }
}
