//! Clique functions: partition a workload into groups of at most `l` prompts.
//!
//! Every strategy works on [`PromptFeatures`] (token lengths, concept labels
//! and a pairwise cosine matrix) so that tests can inject hand-built
//! similarity matrices. The argmin objectives are exposed through
//! [`objective_of`] and an exhaustive [`brute_force_on`] oracle exists for
//! small instances.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{classify_question, Workload};
use crate::text::{cosine_similarity, tokenize_count, Embedder, HashingEmbedder};

/// Largest workload the brute-force oracle accepts.
pub const BRUTE_FORCE_MAX_PROMPTS: usize = 10;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CliqueError {
    #[error("prompt {0:?} has no concept label and the classifier is disabled")]
    MissingConcept(String),
    #[error("batch size must be at least 1, got {0}")]
    InvalidBatchSize(usize),
    #[error("brute force is limited to {BRUTE_FORCE_MAX_PROMPTS} prompts, got {0}")]
    InstanceTooLarge(usize),
    #[error("brute force is not defined for {0}")]
    UnsupportedOracleMethod(CliqueMethod),
    #[error("unknown clique method {0:?}")]
    UnknownMethod(String),
    #[error("plan is not a partition of the workload: {0}")]
    NotAPartition(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CliqueMethod {
    #[serde(rename = "SEPARATE")]
    Separate,
    #[serde(rename = "CC")]
    Concept,
    #[serde(rename = "RC")]
    Random,
    #[serde(rename = "SSC")]
    SemanticSimilarity,
    #[serde(rename = "CpSC")]
    ConceptPlusSemantic,
    #[serde(rename = "ALC")]
    AverageLength,
    #[serde(rename = "MDC")]
    MaximumDifference,
    #[serde(rename = "RpALC")]
    RandomPlusAverageLength,
}

impl CliqueMethod {
    pub const ALL: [CliqueMethod; 8] = [
        CliqueMethod::Separate,
        CliqueMethod::Concept,
        CliqueMethod::Random,
        CliqueMethod::SemanticSimilarity,
        CliqueMethod::ConceptPlusSemantic,
        CliqueMethod::AverageLength,
        CliqueMethod::MaximumDifference,
        CliqueMethod::RandomPlusAverageLength,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            CliqueMethod::Separate => "SEPARATE",
            CliqueMethod::Concept => "CC",
            CliqueMethod::Random => "RC",
            CliqueMethod::SemanticSimilarity => "SSC",
            CliqueMethod::ConceptPlusSemantic => "CpSC",
            CliqueMethod::AverageLength => "ALC",
            CliqueMethod::MaximumDifference => "MDC",
            CliqueMethod::RandomPlusAverageLength => "RpALC",
        }
    }

    pub fn needs_similarity(self) -> bool {
        matches!(
            self,
            CliqueMethod::SemanticSimilarity | CliqueMethod::ConceptPlusSemantic | CliqueMethod::MaximumDifference
        )
    }

    pub fn needs_concepts(self) -> bool {
        matches!(self, CliqueMethod::Concept | CliqueMethod::ConceptPlusSemantic)
    }

    pub fn is_randomized(self) -> bool {
        matches!(self, CliqueMethod::Random | CliqueMethod::RandomPlusAverageLength)
    }

    /// Whether the method's objective is what it optimizes, as opposed to the
    /// length-variance diagnostic reported for unoptimized methods.
    pub fn objective_is_optimized(self) -> bool {
        !matches!(
            self,
            CliqueMethod::Separate | CliqueMethod::Random | CliqueMethod::RandomPlusAverageLength
        )
    }
}

impl fmt::Display for CliqueMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for CliqueMethod {
    type Err = CliqueError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        CliqueMethod::ALL
            .into_iter()
            .find(|m| m.tag().eq_ignore_ascii_case(s))
            .ok_or_else(|| CliqueError::UnknownMethod(s.to_string()))
    }
}

impl PartialOrd for CliqueMethod {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Methods order lexicographically by tag.
impl Ord for CliqueMethod {
    fn cmp(&self, other: &Self) -> Ordering {
        self.tag().cmp(other.tag())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptGroup {
    #[serde(rename = "k")]
    pub clique_id: usize,
    #[serde(rename = "members")]
    pub member_ids: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub concept: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupingPlan {
    pub method: CliqueMethod,
    #[serde(rename = "l")]
    pub batch_size: usize,
    pub seed: u64,
    pub groups: Vec<PromptGroup>,
}

impl GroupingPlan {
    pub fn group_count(&self) -> usize {
        self.groups.len()
    }

    /// Checks that the groups partition `workload` and respect the capacity.
    pub fn validate(&self, workload: &Workload) -> Result<(), CliqueError> {
        let known: HashSet<&str> = workload.prompts.iter().map(|p| p.id.as_str()).collect();
        let mut seen = HashSet::new();
        for g in &self.groups {
            if g.member_ids.is_empty() || g.member_ids.len() > self.batch_size {
                return Err(CliqueError::NotAPartition(format!(
                    "group {} has {} members with l = {}",
                    g.clique_id,
                    g.member_ids.len(),
                    self.batch_size
                )));
            }
            for id in &g.member_ids {
                if !known.contains(id.as_str()) {
                    return Err(CliqueError::NotAPartition(format!("unknown prompt {id:?}")));
                }
                if !seen.insert(id.as_str()) {
                    return Err(CliqueError::NotAPartition(format!("prompt {id:?} appears twice")));
                }
            }
        }
        if seen.len() != known.len() {
            return Err(CliqueError::NotAPartition(format!("{} of {} prompts assigned", seen.len(), known.len())));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plan serializes")
    }
}

/// Row-major symmetric matrix of pairwise cosine similarities.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    n: usize,
    values: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            values[i * n + i] = f(i, i);
            for j in i + 1..n {
                let v = f(i, j);
                values[i * n + j] = v;
                values[j * n + i] = v;
            }
        }
        Self { n, values }
    }

    pub fn from_texts<'a>(texts: impl IntoIterator<Item = &'a str>, embedder: &dyn Embedder) -> Self {
        let vectors: Vec<_> = texts.into_iter().map(|t| embedder.embed(t)).collect();
        Self::from_fn(vectors.len(), |i, j| cosine_similarity(&vectors[i], &vectors[j]).expect("same embedder"))
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }
}

/// What the clique functions see of a workload.
#[derive(Debug, Clone)]
pub struct PromptFeatures {
    pub ids: Vec<String>,
    pub lengths: Vec<u64>,
    pub concepts: Vec<Option<String>>,
    pub similarity: Option<SimilarityMatrix>,
}

impl PromptFeatures {
    pub fn new(ids: Vec<String>, lengths: Vec<u64>) -> Self {
        let n = ids.len();
        assert_eq!(n, lengths.len());
        Self { ids, lengths, concepts: vec![None; n], similarity: None }
    }

    pub fn with_concepts(mut self, concepts: Vec<Option<String>>) -> Self {
        assert_eq!(concepts.len(), self.ids.len());
        self.concepts = concepts;
        self
    }

    pub fn with_similarity(mut self, sim: SimilarityMatrix) -> Self {
        assert_eq!(sim.len(), self.ids.len());
        self.similarity = Some(sim);
        self
    }

    /// Extracts lengths and concept labels, classifying unlabeled prompts
    /// when `options.concept_classifier` is set. The similarity matrix is
    /// only computed when `with_similarity` is true.
    pub fn from_workload(workload: &Workload, options: &GroupingOptions, with_similarity: bool) -> Self {
        let ids = workload.prompts.iter().map(|p| p.id.clone()).collect();
        let lengths = workload.prompts.iter().map(|p| tokenize_count(&p.text).get()).collect();
        let concepts = workload
            .prompts
            .iter()
            .map(|p| match &p.concept {
                Some(c) => Some(c.clone()),
                None if options.concept_classifier => Some(classify_question(p.question()).to_string()),
                None => None,
            })
            .collect();
        let mut features = Self::new(ids, lengths).with_concepts(concepts);
        if with_similarity {
            let embedder = HashingEmbedder::new(options.embedding_dim);
            features.similarity =
                Some(SimilarityMatrix::from_texts(workload.prompts.iter().map(|p| p.text.as_str()), &embedder));
        }
        features
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    fn sim(&self) -> &SimilarityMatrix {
        self.similarity.as_ref().expect("similarity matrix required for this method")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct GroupingOptions {
    /// Assign question-type labels to prompts without a concept.
    pub concept_classifier: bool,
    pub embedding_dim: usize,
}

impl Default for GroupingOptions {
    fn default() -> Self {
        Self { concept_classifier: true, embedding_dim: crate::text::DEFAULT_EMBEDDING_DIM }
    }
}

pub fn make_grouping(
    method: CliqueMethod,
    workload: &Workload,
    batch_size: usize,
    seed: u64,
) -> Result<GroupingPlan, CliqueError> {
    make_grouping_with(method, workload, batch_size, seed, &GroupingOptions::default())
}

pub fn make_grouping_with(
    method: CliqueMethod,
    workload: &Workload,
    batch_size: usize,
    seed: u64,
    options: &GroupingOptions,
) -> Result<GroupingPlan, CliqueError> {
    if batch_size < 1 {
        return Err(CliqueError::InvalidBatchSize(batch_size));
    }
    let features = PromptFeatures::from_workload(workload, options, method.needs_similarity());
    group_features(method, &features, batch_size, seed)
}

/// Runs a clique function over precomputed features.
pub fn group_features(
    method: CliqueMethod,
    features: &PromptFeatures,
    batch_size: usize,
    seed: u64,
) -> Result<GroupingPlan, CliqueError> {
    if batch_size < 1 {
        return Err(CliqueError::InvalidBatchSize(batch_size));
    }
    let all: Vec<usize> = (0..features.len()).collect();
    let labeled: Vec<(Vec<usize>, Option<String>)> = match method {
        CliqueMethod::Separate => all.iter().map(|&i| (vec![i], None)).collect(),
        CliqueMethod::Random => chunk(&shuffled(&all, seed), batch_size).into_iter().map(|g| (g, None)).collect(),
        CliqueMethod::SemanticSimilarity => {
            similarity_fill(&all, features.sim(), batch_size).into_iter().map(|g| (g, None)).collect()
        }
        CliqueMethod::MaximumDifference => {
            difference_fill(&all, features.sim(), batch_size).into_iter().map(|g| (g, None)).collect()
        }
        CliqueMethod::AverageLength => {
            let mut order = all.clone();
            order.sort_by(|&a, &b| features.lengths[b].cmp(&features.lengths[a]));
            balance_lengths(&order, &features.lengths, batch_size).into_iter().map(|g| (g, None)).collect()
        }
        CliqueMethod::RandomPlusAverageLength => {
            let order = shuffled(&all, seed);
            balance_lengths(&order, &features.lengths, batch_size).into_iter().map(|g| (g, None)).collect()
        }
        CliqueMethod::Concept | CliqueMethod::ConceptPlusSemantic => {
            let mut out = Vec::new();
            for (label, members) in concept_buckets(features)? {
                let groups = if method == CliqueMethod::Concept {
                    chunk(&members, batch_size)
                } else {
                    similarity_fill(&members, features.sim(), batch_size)
                };
                out.extend(groups.into_iter().map(|g| (g, Some(label.clone()))));
            }
            out
        }
    };
    Ok(GroupingPlan {
        method,
        batch_size,
        seed,
        groups: labeled
            .into_iter()
            .enumerate()
            .map(|(k, (members, concept))| PromptGroup {
                clique_id: k + 1,
                member_ids: members.into_iter().map(|i| features.ids[i].clone()).collect(),
                concept,
            })
            .collect(),
    })
}

fn shuffled(indices: &[usize], seed: u64) -> Vec<usize> {
    let mut out = indices.to_vec();
    out.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    out
}

fn chunk(indices: &[usize], l: usize) -> Vec<Vec<usize>> {
    indices.chunks(l).map(<[usize]>::to_vec).collect()
}

/// Buckets in order of first appearance.
fn concept_buckets(features: &PromptFeatures) -> Result<Vec<(String, Vec<usize>)>, CliqueError> {
    let mut order: Vec<String> = Vec::new();
    let mut buckets: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, c) in features.concepts.iter().enumerate() {
        let c = c.as_deref().ok_or_else(|| CliqueError::MissingConcept(features.ids[i].clone()))?;
        let entry = buckets.entry(c).or_default();
        if entry.is_empty() {
            order.push(c.to_string());
        }
        entry.push(i);
    }
    Ok(order
        .into_iter()
        .map(|c| {
            let members = buckets.remove(c.as_str()).unwrap_or_default();
            (c, members)
        })
        .collect())
}

fn argmin_by(candidates: &[usize], mut key: impl FnMut(usize) -> f64) -> usize {
    let mut best = 0;
    let mut best_key = f64::INFINITY;
    for (pos, &c) in candidates.iter().enumerate() {
        let k = key(c);
        if k < best_key {
            best_key = k;
            best = pos;
        }
    }
    best
}

/// Capacity-constrained nearest-neighbour grouping. Each new group is seeded
/// by the unassigned prompt least similar on average to everything already
/// assigned, then filled with the seed's `l - 1` most similar unassigned
/// prompts.
fn similarity_fill(indices: &[usize], sim: &SimilarityMatrix, l: usize) -> Vec<Vec<usize>> {
    let mut unassigned: Vec<usize> = indices.to_vec();
    let mut sim_to_assigned: HashMap<usize, f64> = indices.iter().map(|&i| (i, 0.0)).collect();
    let mut assigned_count = 0usize;
    let mut groups = Vec::new();
    while !unassigned.is_empty() {
        let seed_pos = if assigned_count == 0 {
            0
        } else {
            argmin_by(&unassigned, |c| sim_to_assigned[&c] / assigned_count as f64)
        };
        let seed = unassigned.remove(seed_pos);
        let mut ranked: Vec<(usize, usize)> = unassigned.iter().copied().enumerate().collect();
        // stable: equal similarity keeps workload order
        ranked.sort_by(|a, b| sim.get(seed, b.1).partial_cmp(&sim.get(seed, a.1)).unwrap_or(Ordering::Equal));
        let mut take: Vec<usize> = ranked.iter().take(l - 1).map(|&(pos, _)| pos).collect();
        let mut group = vec![seed];
        group.extend(take.iter().map(|&pos| unassigned[pos]));
        take.sort_unstable_by(|a, b| b.cmp(a));
        for pos in take {
            unassigned.remove(pos);
        }
        for &g in &group {
            for &u in &unassigned {
                *sim_to_assigned.get_mut(&u).expect("tracked") += sim.get(u, g);
            }
        }
        assigned_count += group.len();
        groups.push(group);
    }
    groups
}

/// Greedy complement of [`similarity_fill`]. A construction pass seeds each
/// group with a chosen prompt and repeatedly adds the unassigned prompt with
/// the lowest summed similarity to the group's current members; a pairwise
/// swap pass then removes improving exchanges between groups. The pass is
/// restarted from up to [`MDC_RESTARTS`] first seeds (the prompts most
/// similar in total to the rest, i.e. the hardest to place) and the lowest
/// objective wins, earliest restart on ties.
fn difference_fill(indices: &[usize], sim: &SimilarityMatrix, l: usize) -> Vec<Vec<usize>> {
    let mut by_crowding: Vec<(usize, f64)> = indices
        .iter()
        .enumerate()
        .map(|(pos, &c)| (pos, indices.iter().filter(|&&u| u != c).map(|&u| sim.get(c, u)).sum()))
        .collect();
    by_crowding.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal));
    let mut best: Option<(f64, Vec<Vec<usize>>)> = None;
    for &(first, _) in by_crowding.iter().take(MDC_RESTARTS) {
        let mut groups = difference_pass(indices, first, sim, l);
        refine_by_swaps(&mut groups, sim);
        let value = pairwise_similarity_sum(&groups, sim);
        if best.as_ref().map_or(true, |(bv, _)| value < bv - 1e-12) {
            best = Some((value, groups));
        }
    }
    best.map(|(_, g)| g).unwrap_or_default()
}

/// Restart budget for [`difference_fill`].
pub const MDC_RESTARTS: usize = 16;

fn difference_pass(indices: &[usize], first_pos: usize, sim: &SimilarityMatrix, l: usize) -> Vec<Vec<usize>> {
    let mut unassigned: Vec<usize> = indices.to_vec();
    let mut groups = Vec::new();
    let mut seed_pos = Some(first_pos);
    while !unassigned.is_empty() {
        let pos = seed_pos.take().unwrap_or_else(|| {
            argmin_by(&unassigned, |c| -unassigned.iter().filter(|&&u| u != c).map(|&u| sim.get(c, u)).sum::<f64>())
        });
        let mut group = vec![unassigned.remove(pos)];
        while group.len() < l && !unassigned.is_empty() {
            let pos = argmin_by(&unassigned, |c| group.iter().map(|&g| sim.get(c, g)).sum());
            group.push(unassigned.remove(pos));
        }
        groups.push(group);
    }
    groups
}

/// First-improvement member swaps between groups, lowering the summed
/// within-group similarity until no swap helps. Group sizes are unchanged.
fn refine_by_swaps(groups: &mut [Vec<usize>], sim: &SimilarityMatrix) {
    let affinity = |group: &[usize], skip: usize, x: usize| -> f64 {
        group.iter().enumerate().filter(|&(p, _)| p != skip).map(|(_, &g)| sim.get(x, g)).sum()
    };
    // each applied swap strictly lowers a bounded objective
    let max_rounds = 64 * groups.len().max(1);
    for _ in 0..max_rounds {
        let mut improved = false;
        for a in 0..groups.len() {
            for b in a + 1..groups.len() {
                for pa in 0..groups[a].len() {
                    for pb in 0..groups[b].len() {
                        let (i, j) = (groups[a][pa], groups[b][pb]);
                        let before = affinity(&groups[a], pa, i) + affinity(&groups[b], pb, j);
                        let after = affinity(&groups[a], pa, j) + affinity(&groups[b], pb, i);
                        if after < before - 1e-12 {
                            groups[a][pa] = j;
                            groups[b][pb] = i;
                            improved = true;
                        }
                    }
                }
            }
        }
        if !improved {
            break;
        }
    }
}

/// Longest-processing-time style balancing over `c = ceil(n / l)` groups:
/// items are taken in the given order and each goes to the group with the
/// smallest current total among groups that still have room (ties: fewer
/// members, then lower group index).
fn balance_lengths(order: &[usize], lengths: &[u64], l: usize) -> Vec<Vec<usize>> {
    let c = order.len().div_ceil(l);
    let mut groups: Vec<Vec<usize>> = vec![Vec::with_capacity(l); c];
    let mut totals = vec![0u64; c];
    for &item in order {
        let k = (0..c)
            .filter(|&k| groups[k].len() < l)
            .min_by_key(|&k| (totals[k], groups[k].len(), k))
            .expect("capacity c * l >= n");
        groups[k].push(item);
        totals[k] += lengths[item];
    }
    groups
}

/// Objective value of a partition given as index groups; lower is better.
///
/// * CC: summed within-group variance of one-hot concept vectors.
/// * MDC: `sum_k sum_i sum_{j != i} cos(p_ki, p_kj)`, each unordered pair
///   counted twice.
/// * SSC and CpSC: the negated MDC sum.
/// * ALC, and as a diagnostic for RC, RpALC and SEPARATE: squared deviation
///   of group token totals from their mean.
pub fn objective_of(method: CliqueMethod, groups: &[Vec<usize>], features: &PromptFeatures) -> f64 {
    match method {
        CliqueMethod::Concept => groups
            .iter()
            .map(|g| {
                let mut counts: BTreeMap<Option<&str>, usize> = BTreeMap::new();
                for &i in g {
                    *counts.entry(features.concepts[i].as_deref()).or_default() += 1;
                }
                let n = g.len() as f64;
                n - counts.values().map(|&c| (c * c) as f64).sum::<f64>() / n
            })
            .sum(),
        CliqueMethod::MaximumDifference => pairwise_similarity_sum(groups, features.sim()),
        CliqueMethod::SemanticSimilarity | CliqueMethod::ConceptPlusSemantic => {
            -pairwise_similarity_sum(groups, features.sim())
        }
        CliqueMethod::AverageLength
        | CliqueMethod::Random
        | CliqueMethod::RandomPlusAverageLength
        | CliqueMethod::Separate => {
            let totals: Vec<f64> =
                groups.iter().map(|g| g.iter().map(|&i| features.lengths[i] as f64).sum()).collect();
            let mean = totals.iter().sum::<f64>() / totals.len() as f64;
            totals.iter().map(|t| (t - mean).powi(2)).sum()
        }
    }
}

fn pairwise_similarity_sum(groups: &[Vec<usize>], sim: &SimilarityMatrix) -> f64 {
    groups
        .iter()
        .map(|g| {
            let mut s = 0.0;
            for (a, &i) in g.iter().enumerate() {
                for (b, &j) in g.iter().enumerate() {
                    if a != b {
                        s += sim.get(i, j);
                    }
                }
            }
            s
        })
        .sum()
}

fn plan_indices(plan: &GroupingPlan, features: &PromptFeatures) -> Result<Vec<Vec<usize>>, CliqueError> {
    let index: HashMap<&str, usize> = features.ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    plan.groups
        .iter()
        .map(|g| {
            g.member_ids
                .iter()
                .map(|id| index.get(id.as_str()).copied().ok_or_else(|| CliqueError::NotAPartition(format!("unknown prompt {id:?}"))))
                .collect()
        })
        .collect()
}

pub fn grouping_objective(method: CliqueMethod, plan: &GroupingPlan, workload: &Workload) -> Result<f64, CliqueError> {
    let features = PromptFeatures::from_workload(workload, &GroupingOptions::default(), method.needs_similarity());
    plan_objective(method, plan, &features)
}

pub fn plan_objective(method: CliqueMethod, plan: &GroupingPlan, features: &PromptFeatures) -> Result<f64, CliqueError> {
    Ok(objective_of(method, &plan_indices(plan, features)?, features))
}

/// All partitions of `0..n` into exactly `ceil(n / l)` non-empty blocks of
/// size at most `l`, blocks ordered by their smallest element.
pub fn enumerate_partitions(n: usize, l: usize) -> Vec<Vec<Vec<usize>>> {
    fn rec(i: usize, n: usize, l: usize, c: usize, blocks: &mut Vec<Vec<usize>>, out: &mut Vec<Vec<Vec<usize>>>) {
        if i == n {
            if blocks.len() == c {
                out.push(blocks.clone());
            }
            return;
        }
        // blocks still to open must fit in the remaining elements
        if c - blocks.len() > n - i {
            return;
        }
        for b in 0..blocks.len() {
            if blocks[b].len() < l {
                blocks[b].push(i);
                rec(i + 1, n, l, c, blocks, out);
                blocks[b].pop();
            }
        }
        if blocks.len() < c {
            blocks.push(vec![i]);
            rec(i + 1, n, l, c, blocks, out);
            blocks.pop();
        }
    }
    let mut out = Vec::new();
    if n == 0 || l == 0 {
        return out;
    }
    rec(0, n, l, n.div_ceil(l), &mut Vec::new(), &mut out);
    out
}

pub fn brute_force_grouping(method: CliqueMethod, workload: &Workload, batch_size: usize) -> Result<GroupingPlan, CliqueError> {
    if workload.len() > BRUTE_FORCE_MAX_PROMPTS {
        return Err(CliqueError::InstanceTooLarge(workload.len()));
    }
    let features = PromptFeatures::from_workload(workload, &GroupingOptions::default(), method.needs_similarity());
    brute_force_on(method, &features, batch_size)
}

/// Exhaustive argmin of [`objective_of`] for ALC, MDC and SSC. Ties (within
/// 1e-12) go to the lexicographically smallest plan, comparing groups as
/// sorted lists of member ids.
pub fn brute_force_on(method: CliqueMethod, features: &PromptFeatures, batch_size: usize) -> Result<GroupingPlan, CliqueError> {
    if !matches!(
        method,
        CliqueMethod::AverageLength | CliqueMethod::MaximumDifference | CliqueMethod::SemanticSimilarity
    ) {
        return Err(CliqueError::UnsupportedOracleMethod(method));
    }
    if batch_size < 1 {
        return Err(CliqueError::InvalidBatchSize(batch_size));
    }
    if features.len() > BRUTE_FORCE_MAX_PROMPTS {
        return Err(CliqueError::InstanceTooLarge(features.len()));
    }
    let id_key = |groups: &[Vec<usize>]| -> Vec<Vec<&str>> {
        let mut key: Vec<Vec<&str>> = groups
            .iter()
            .map(|g| {
                let mut ids: Vec<&str> = g.iter().map(|&i| features.ids[i].as_str()).collect();
                ids.sort_unstable();
                ids
            })
            .collect();
        key.sort();
        key
    };
    let mut best: Option<(f64, Vec<Vec<usize>>)> = None;
    for candidate in enumerate_partitions(features.len(), batch_size) {
        let value = objective_of(method, &candidate, features);
        let better = match &best {
            None => true,
            Some((bv, bg)) => value < bv - 1e-12 || ((value - bv).abs() <= 1e-12 && id_key(&candidate) < id_key(bg)),
        };
        if better {
            best = Some((value, candidate));
        }
    }
    let (_, groups) = best.expect("at least one partition of a non-empty workload");
    Ok(GroupingPlan {
        method,
        batch_size,
        seed: 0,
        groups: groups
            .into_iter()
            .enumerate()
            .map(|(k, g)| PromptGroup {
                clique_id: k + 1,
                member_ids: g.into_iter().map(|i| features.ids[i].clone()).collect(),
                concept: None,
            })
            .collect(),
    })
}
