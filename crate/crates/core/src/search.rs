//! Offline search over one period of channel allocations.
//!
//! A schedule of period `T₀` is a sequence of `T₀` actions, each action being
//! one of the `C(N, M)` subsets of plants that transmit in that slot.
//! [`exhaustive_search`] enumerates every sequence; [`mcts_search`] grows a
//! UCT tree over slot prefixes and scores completed sequences with the exact
//! average loss.

use std::ops::RangeInclusive;

use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{AnalysisError, Loss, LossEvaluator};
use crate::model::{Instance, Schedule};
use crate::riccati::SteadyState;

/// Default cap on the number of sequences [`exhaustive_search`] will enumerate.
pub const DEFAULT_EVAL_CAP: u64 = 100_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SearchError {
    #[error(
        "exhaustive search over period {period} needs {actions}^{period} = {} evaluations, cap is {cap}",
        required.map_or_else(|| "overflow".to_string(), |r| r.to_string())
    )]
    SearchSpaceTooLarge {
        actions: usize,
        period: usize,
        required: Option<u128>,
        cap: u64,
    },
    #[error("period must be at least 1")]
    ZeroPeriod,
    #[error("MCTS needs at least one iteration and c_uct > 0")]
    BadConfig,
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

/// All `M`-subsets of `0..N`, in lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionSet {
    plants: usize,
    actions: Vec<Vec<usize>>,
}

impl ActionSet {
    pub fn new(plants: usize, channels: usize) -> Self {
        ActionSet {
            plants,
            actions: (0..plants).combinations(channels).collect(),
        }
    }

    pub fn for_instance(instance: &Instance) -> Self {
        ActionSet::new(instance.num_plants(), instance.channels())
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn get(&self, a: usize) -> &[usize] {
        &self.actions[a]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[usize]> {
        self.actions.iter().map(Vec::as_slice)
    }

    pub fn index_of(&self, members: &[usize]) -> Option<usize> {
        let mut sorted = members.to_vec();
        sorted.sort_unstable();
        self.actions.iter().position(|a| *a == sorted)
    }

    /// The allocation table for a sequence of actions, one per slot.
    pub fn to_schedule(&self, seq: &[usize]) -> Schedule {
        let mut alloc = vec![vec![false; seq.len()]; self.plants];
        for (slot, &a) in seq.iter().enumerate() {
            for &i in &self.actions[a] {
                alloc[i][slot] = true;
            }
        }
        Schedule::new(alloc).expect("non-empty action sequence")
    }

    /// Inverse of [`ActionSet::to_schedule`]; `None` if a slot is not a valid action.
    pub fn from_schedule(&self, sched: &Schedule) -> Option<Vec<usize>> {
        (0..sched.period())
            .map(|slot| {
                let members: Vec<usize> = (0..sched.num_rows())
                    .filter(|&i| sched.row(i)[slot])
                    .collect();
                self.index_of(&members)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub period: usize,
    pub best_schedule: Schedule,
    pub best_actions: Vec<usize>,
    pub best_loss: Loss,
    /// Full-sequence loss evaluations performed.
    pub evaluations: u64,
}

fn required_count(actions: usize, period: usize) -> Option<u128> {
    (actions as u128).checked_pow(period as u32)
}

/// Minimum-loss sequence by brute force. Ties go to the lexicographically
/// smallest action sequence.
pub fn exhaustive_search(
    instance: &Instance,
    steady: &[SteadyState],
    period: usize,
    cap: u64,
) -> Result<SearchResult, SearchError> {
    if period == 0 {
        return Err(SearchError::ZeroPeriod);
    }
    let actions = ActionSet::for_instance(instance);
    let k = actions.len();
    let required = required_count(k, period);
    if required.is_none_or(|r| r > cap as u128) {
        return Err(SearchError::SearchSpaceTooLarge {
            actions: k,
            period,
            required,
            cap,
        });
    }
    let mut eval = LossEvaluator::new(instance, steady)?;
    let mut seq = vec![0usize; period];
    let mut best_seq = seq.clone();
    let mut best = eval.total(&actions.to_schedule(&seq));
    loop {
        // odometer increment, last slot fastest
        let mut pos = period;
        loop {
            if pos == 0 {
                return Ok(SearchResult {
                    period,
                    best_schedule: actions.to_schedule(&best_seq),
                    best_actions: best_seq,
                    best_loss: best,
                    evaluations: eval.evaluations(),
                });
            }
            pos -= 1;
            seq[pos] += 1;
            if seq[pos] < k {
                break;
            }
            seq[pos] = 0;
        }
        let l = eval.total(&actions.to_schedule(&seq));
        if l < best {
            best = l;
            best_seq.copy_from_slice(&seq);
        }
    }
}

/// Statistics for one tree node: a prefix of `depth` assigned slots.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    pub depth: usize,
    pub children: Vec<Option<usize>>,
    /// `N(s, a)`.
    pub child_visits: Vec<u64>,
    /// `W(s, a)`.
    pub child_returns: Vec<f64>,
}

impl TreeNode {
    pub fn new(depth: usize, n_actions: usize, terminal: bool) -> Self {
        let k = if terminal { 0 } else { n_actions };
        TreeNode {
            depth,
            children: vec![None; k],
            child_visits: vec![0; k],
            child_returns: vec![0.0; k],
        }
    }

    /// `N(s) = Σ_a N(s, a)`.
    pub fn visits(&self) -> u64 {
        self.child_visits.iter().sum()
    }

    pub fn is_terminal(&self) -> bool {
        self.children.is_empty()
    }

    fn first_untried(&self) -> Option<usize> {
        self.children.iter().position(Option::is_none)
    }
}

/// UCT child choice. Unvisited actions win outright, lowest index first;
/// ties among finite scores go to the lowest index.
pub fn uct_select(node: &TreeNode, c_uct: f64) -> usize {
    if let Some(a) = node.child_visits.iter().position(|&n| n == 0) {
        return a;
    }
    let ln_n = (node.visits() as f64).ln();
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (a, (&n, &w)) in node.child_visits.iter().zip(&node.child_returns).enumerate() {
        let n = n as f64;
        let score = w / n + c_uct * (ln_n / n).sqrt();
        if score > best_score {
            best_score = score;
            best = a;
        }
    }
    best
}

/// Extends `prefix` to length `period` with uniformly random actions.
pub fn rollout<R: Rng>(prefix: &[usize], n_actions: usize, period: usize, rng: &mut R) -> Vec<usize> {
    let mut seq = prefix.to_vec();
    while seq.len() < period {
        seq.push(rng.random_range(0..n_actions));
    }
    seq
}

/// Backed-up return: `1 − loss/j_max` clamped to `[0, 1]`, zero for a divergent loss.
pub fn reward(loss: Loss, j_max: f64) -> f64 {
    match loss {
        Loss::Finite(v) => (1.0 - v / j_max).clamp(0.0, 1.0),
        Loss::Divergent => 0.0,
    }
}

/// How the reward normalizer `J_max` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum JMaxPolicy {
    /// `factor` times the best finite loss among the round-robin schedule and
    /// `random_rollouts` random sequences.
    Baseline { factor: f64, random_rollouts: usize },
    Fixed(f64),
}

impl Default for JMaxPolicy {
    fn default() -> Self {
        JMaxPolicy::Baseline {
            factor: 1.1,
            random_rollouts: 32,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MctsConfig {
    pub iterations: u64,
    pub c_uct: f64,
    pub seed: u64,
    pub j_max_policy: JMaxPolicy,
}

impl Default for MctsConfig {
    fn default() -> Self {
        MctsConfig {
            iterations: 40_000,
            c_uct: 1.2,
            seed: 0,
            j_max_policy: JMaxPolicy::default(),
        }
    }
}

/// Search tree over slot prefixes; node 0 is the empty prefix.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchTree {
    pub nodes: Vec<TreeNode>,
    pub period: usize,
    pub n_actions: usize,
}

impl SearchTree {
    pub fn new(period: usize, n_actions: usize) -> Self {
        SearchTree {
            nodes: vec![TreeNode::new(0, n_actions, period == 0)],
            period,
            n_actions,
        }
    }

    pub fn root(&self) -> &TreeNode {
        &self.nodes[0]
    }

    fn add_child(&mut self, parent: usize, action: usize) -> usize {
        let depth = self.nodes[parent].depth + 1;
        let id = self.nodes.len();
        self.nodes
            .push(TreeNode::new(depth, self.n_actions, depth == self.period));
        self.nodes[parent].children[action] = Some(id);
        id
    }

    fn reset_stats(&mut self) {
        for node in &mut self.nodes {
            node.child_visits.iter_mut().for_each(|n| *n = 0);
            node.child_returns.iter_mut().for_each(|w| *w = 0.0);
        }
    }
}

/// Adds one visit and `reward(loss, j_max)` to every `(node, action)` on `path`.
pub fn backup(tree: &mut SearchTree, path: &[(usize, usize)], loss: Loss, j_max: f64) {
    let r = reward(loss, j_max);
    for &(node, a) in path {
        let n = &mut tree.nodes[node];
        n.child_visits[a] += 1;
        n.child_returns[a] += r;
    }
}

fn round_robin(actions: &ActionSet, n: usize, m: usize, period: usize) -> Vec<usize> {
    (0..period)
        .map(|slot| {
            let members: Vec<usize> = (0..m).map(|k| (slot * m + k) % n).collect();
            actions.index_of(&members).expect("round-robin slot is an M-subset")
        })
        .collect()
}

/// An MCTS run that can be advanced incrementally.
pub struct Mcts<'a> {
    eval: LossEvaluator<'a>,
    actions: ActionSet,
    cfg: MctsConfig,
    tree: SearchTree,
    rng: ChaCha8Rng,
    j_max: Option<f64>,
    best: Option<(Vec<usize>, Loss)>,
    iterations_done: u64,
}

impl<'a> Mcts<'a> {
    pub fn new(
        instance: &'a Instance,
        steady: &'a [SteadyState],
        period: usize,
        cfg: MctsConfig,
    ) -> Result<Self, SearchError> {
        if period == 0 {
            return Err(SearchError::ZeroPeriod);
        }
        if cfg.c_uct.is_nan() || cfg.c_uct <= 0.0 {
            return Err(SearchError::BadConfig);
        }
        let mut eval = LossEvaluator::new(instance, steady)?;
        let actions = ActionSet::for_instance(instance);
        let j_max = match cfg.j_max_policy {
            JMaxPolicy::Fixed(v) => Some(v),
            JMaxPolicy::Baseline {
                factor,
                random_rollouts,
            } => {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x6A09_E667_F3BC_C908);
                let mut candidates = vec![round_robin(
                    &actions,
                    instance.num_plants(),
                    instance.channels(),
                    period,
                )];
                candidates.extend(
                    (0..random_rollouts).map(|_| rollout(&[], actions.len(), period, &mut rng)),
                );
                candidates
                    .iter()
                    .filter_map(|seq| eval.total(&actions.to_schedule(seq)).value())
                    .min_by(f64::total_cmp)
                    .map(|v| v * factor)
            }
        };
        Ok(Mcts {
            tree: SearchTree::new(period, actions.len()),
            actions,
            cfg,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            j_max,
            best: None,
            iterations_done: 0,
            eval,
        })
    }

    pub fn tree(&self) -> &SearchTree {
        &self.tree
    }

    pub fn j_max(&self) -> Option<f64> {
        self.j_max
    }

    pub fn iterations_done(&self) -> u64 {
        self.iterations_done
    }

    pub fn best_loss(&self) -> Option<Loss> {
        self.best.as_ref().map(|(_, l)| *l)
    }

    /// One select → expand → roll-out → backup pass.
    pub fn iterate(&mut self) {
        let period = self.tree.period;
        let mut node = 0;
        let mut path: Vec<(usize, usize)> = Vec::with_capacity(period);
        loop {
            if self.tree.nodes[node].is_terminal() {
                break;
            }
            if let Some(a) = self.tree.nodes[node].first_untried() {
                self.tree.add_child(node, a);
                path.push((node, a));
                break;
            }
            let a = uct_select(&self.tree.nodes[node], self.cfg.c_uct);
            path.push((node, a));
            node = self.tree.nodes[node].children[a].expect("fully expanded node");
        }
        let prefix: Vec<usize> = path.iter().map(|&(_, a)| a).collect();
        let seq = rollout(&prefix, self.actions.len(), period, &mut self.rng);
        let loss = self.eval.total(&self.actions.to_schedule(&seq));

        let improved = match &self.best {
            None => true,
            Some((_, b)) => loss < *b,
        };
        if improved {
            self.best = Some((seq, loss));
        }
        if self.j_max.is_none() {
            if let Loss::Finite(v) = loss {
                let factor = match self.cfg.j_max_policy {
                    JMaxPolicy::Baseline { factor, .. } => factor,
                    JMaxPolicy::Fixed(_) => 1.1,
                };
                self.j_max = Some(v * factor);
                self.tree.reset_stats();
            }
        }
        // with no finite loss seen yet every reward is zero
        backup(&mut self.tree, &path, loss, self.j_max.unwrap_or(1.0));
        self.iterations_done += 1;
    }

    pub fn run(&mut self, iterations: u64) {
        for _ in 0..iterations {
            self.iterate();
        }
    }

    /// Best sequence seen so far, re-evaluated exactly.
    pub fn result(&mut self) -> Option<SearchResult> {
        let (seq, _) = self.best.clone()?;
        let sched = self.actions.to_schedule(&seq);
        let loss = self.eval.total(&sched);
        Some(SearchResult {
            period: self.tree.period,
            best_schedule: sched,
            best_actions: seq,
            best_loss: loss,
            evaluations: self.eval.evaluations(),
        })
    }
}

pub fn mcts_search(
    instance: &Instance,
    steady: &[SteadyState],
    period: usize,
    cfg: &MctsConfig,
) -> Result<SearchResult, SearchError> {
    if cfg.iterations == 0 {
        return Err(SearchError::BadConfig);
    }
    let mut m = Mcts::new(instance, steady, period, *cfg)?;
    m.run(cfg.iterations);
    Ok(m.result().expect("at least one iteration ran"))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SearchMethod {
    Exhaustive { cap: u64 },
    Mcts(MctsConfig),
}

/// Best schedule for every period in `periods`, searched in parallel.
pub fn sweep_periods(
    instance: &Instance,
    steady: &[SteadyState],
    periods: RangeInclusive<usize>,
    method: SearchMethod,
) -> Result<Vec<SearchResult>, SearchError> {
    let periods: Vec<usize> = periods.collect();
    periods
        .par_iter()
        .map(|&t0| match method {
            SearchMethod::Exhaustive { cap } => exhaustive_search(instance, steady, t0, cap),
            SearchMethod::Mcts(cfg) => mcts_search(instance, steady, t0, &cfg),
        })
        .collect()
}

/// Index of the minimizing entry; first one on ties.
pub fn argmin_period(results: &[SearchResult]) -> Option<usize> {
    results
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.best_loss.total_cmp(&b.1.best_loss).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn action_set_is_lexicographic() {
        let a = ActionSet::new(4, 2);
        let got: Vec<Vec<usize>> = a.iter().map(<[usize]>::to_vec).collect();
        assert_eq!(
            got,
            vec![
                vec![0, 1],
                vec![0, 2],
                vec![0, 3],
                vec![1, 2],
                vec![1, 3],
                vec![2, 3]
            ]
        );
        let s = a.to_schedule(&[0, 5]);
        assert_eq!(a.from_schedule(&s), Some(vec![0, 5]));
    }

    fn node(stats: &[(f64, u64)]) -> TreeNode {
        let mut n = TreeNode::new(0, stats.len(), false);
        for (a, &(w, v)) in stats.iter().enumerate() {
            n.child_returns[a] = w;
            n.child_visits[a] = v;
        }
        n
    }

    #[test]
    fn uct_prefers_higher_mean() {
        let n = node(&[(2.0, 4), (1.0, 4)]);
        // 0.5 + 1.2√(ln 8 / 4) ≈ 1.3653 vs 1.1153
        let explore = 1.2 * ((8f64).ln() / 4.0).sqrt();
        assert!((0.5 + explore - 1.3653).abs() < 1e-4);
        assert_eq!(uct_select(&n, 1.2), 0);
    }

    #[test]
    fn uct_unvisited_first() {
        let n = node(&[(4.0, 4), (0.0, 0), (0.0, 0)]);
        assert_eq!(uct_select(&n, 1.2), 1);
        assert_eq!(uct_select(&node(&[(0.3, 1)]), 1.2), 0);
    }

    #[test]
    fn uct_ties_to_lowest_index() {
        let n = node(&[(1.0, 2), (1.0, 2), (1.0, 2)]);
        assert_eq!(uct_select(&n, 0.7), 0);
    }

    #[test]
    fn rollout_appends_to_full_length() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = rollout(&[2, 1], 3, 3, &mut rng);
        assert_eq!(&s[..2], &[2, 1]);
        assert_eq!(s.len(), 3);
        let a = rollout(&[], 3, 8, &mut ChaCha8Rng::seed_from_u64(9));
        let b = rollout(&[], 3, 8, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }

    #[test]
    fn reward_boundaries() {
        assert_eq!(reward(Loss::Finite(10.0), 10.0), 0.0);
        assert_eq!(reward(Loss::Finite(0.0), 10.0), 1.0);
        assert_eq!(reward(Loss::Finite(25.0), 10.0), 0.0);
        assert_eq!(reward(Loss::Divergent, 10.0), 0.0);
    }

    #[test]
    fn backup_counts_divergent_visits() {
        let mut t = SearchTree::new(2, 2);
        let c = t.add_child(0, 1);
        backup(&mut t, &[(0, 1), (c, 0)], Loss::Divergent, 5.0);
        assert_eq!(t.nodes[0].child_visits, vec![0, 1]);
        assert_eq!(t.nodes[0].child_returns, vec![0.0, 0.0]);
        assert_eq!(t.nodes[c].child_visits, vec![1, 0]);
        backup(&mut t, &[(0, 1)], Loss::Finite(1.0), 5.0);
        assert!((t.nodes[0].child_returns[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn round_robin_is_feasible() {
        let a = ActionSet::new(5, 2);
        let seq = round_robin(&a, 5, 2, 7);
        let s = a.to_schedule(&seq);
        for slot in 0..7 {
            assert_eq!(s.rows().iter().filter(|r| r[slot]).count(), 2);
        }
    }
}
