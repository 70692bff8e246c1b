//! Merging per-agent rankings and measuring how consistent they are.
//!
//! Rankings are compared with a Kendall distance that counts a pair as half
//! discordant when one ranking ties it and the other orders it. The modal
//! ranking is the exact rank map produced most often; when every ranking is
//! unique the Kemeny ranking (minimum total Kendall distance) stands in.

use std::collections::{BTreeMap, BTreeSet};

use num_rational::Rational64;
use num_traits::Zero;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Rank, StoryId};
use crate::prioritization::ranks_by_key;

/// Largest story count searched exhaustively for the Kemeny ranking (8! = 40,320).
pub const KEMENY_EXHAUSTIVE_LIMIT: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AggregationError {
    #[error("no ranking vectors supplied")]
    Empty,
    #[error("need at least {needed} ranking vectors, got {got}")]
    TooFew { needed: usize, got: usize },
    #[error("coverage mismatch between '{a}' and '{b}'")]
    CoverageMismatch { a: String, b: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankingVector {
    /// (agent, technique, model) label.
    pub source: String,
    pub ranks: BTreeMap<StoryId, Rank>,
}

impl RankingVector {
    pub fn new(
        source: impl Into<String>,
        ranks: impl IntoIterator<Item = (StoryId, Rank)>,
    ) -> Self {
        Self {
            source: source.into(),
            ranks: ranks.into_iter().collect(),
        }
    }

    /// Strict ranking from an ordered list of ids, best first.
    pub fn from_order(source: impl Into<String>, order: &[&str]) -> Self {
        Self::new(
            source,
            order
                .iter()
                .enumerate()
                .map(|(i, id)| (StoryId::from(*id), Rank::from_integer(i as i64 + 1))),
        )
    }

    pub fn story_ids(&self) -> BTreeSet<&StoryId> {
        self.ranks.keys().collect()
    }

    fn rank_list(&self) -> Vec<Rank> {
        self.ranks.values().copied().collect()
    }
}

fn check_coverage(vectors: &[RankingVector]) -> Result<(), AggregationError> {
    let first = vectors.first().ok_or(AggregationError::Empty)?;
    let ids = first.story_ids();
    for v in &vectors[1..] {
        if v.story_ids() != ids {
            return Err(AggregationError::CoverageMismatch {
                a: first.source.clone(),
                b: v.source.clone(),
            });
        }
    }
    Ok(())
}

/// Mean rank per story, re-ranked ascending with average-rank ties.
pub fn merge_borda(vectors: &[RankingVector]) -> Result<RankingVector, AggregationError> {
    check_coverage(vectors)?;
    let k = Rational64::from_integer(vectors.len() as i64);
    let means: BTreeMap<StoryId, Rational64> = vectors[0]
        .ranks
        .keys()
        .map(|id| {
            let total: Rational64 = vectors.iter().map(|v| v.ranks[id].0).sum();
            (id.clone(), total / k)
        })
        .collect();
    Ok(RankingVector::new("borda", ranks_by_key(&means, false)))
}

/// Number of discordant pairs; a pair tied in exactly one ranking counts ½.
pub fn kendall_distance(
    a: &RankingVector,
    b: &RankingVector,
) -> Result<Rational64, AggregationError> {
    if a.story_ids() != b.story_ids() {
        return Err(AggregationError::CoverageMismatch {
            a: a.source.clone(),
            b: b.source.clone(),
        });
    }
    Ok(Rational64::new(
        half_discordances(&a.rank_list(), &b.rank_list()) as i64,
        2,
    ))
}

/// Discordance counted in half-units over rank lists aligned by story.
fn half_discordances(a: &[Rank], b: &[Rank]) -> u64 {
    let n = a.len();
    let mut halves = 0;
    for i in 0..n {
        for j in (i + 1)..n {
            let sa = a[i].cmp(&a[j]);
            let sb = b[i].cmp(&b[j]);
            halves += match (sa.is_eq(), sb.is_eq()) {
                (true, true) => 0,
                (true, false) | (false, true) => 1,
                (false, false) if sa != sb => 2,
                _ => 0,
            };
        }
    }
    halves
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModalMethod {
    /// The most frequent exact ranking.
    Frequency,
    /// Every ranking was unique; exhaustive Kemeny minimizer.
    Kemeny,
    /// Every ranking was unique and too many stories to search; Borda merge.
    BordaApproximation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModalRanking {
    pub ranking: RankingVector,
    /// How many input vectors equal `ranking` exactly.
    pub support: usize,
    pub method: ModalMethod,
    /// Total Kendall distance from `ranking` to all inputs.
    pub total_distance: Rational64,
}

fn total_distance(candidate: &[Rank], vectors: &[RankingVector]) -> u64 {
    vectors
        .iter()
        .map(|v| half_discordances(candidate, &v.rank_list()))
        .sum()
}

pub fn modal_ranking(vectors: &[RankingVector]) -> Result<ModalRanking, AggregationError> {
    check_coverage(vectors)?;
    let ids: Vec<StoryId> = vectors[0].ranks.keys().cloned().collect();

    let mut frequency: BTreeMap<Vec<Rank>, usize> = BTreeMap::new();
    for v in vectors {
        *frequency.entry(v.rank_list()).or_default() += 1;
    }
    let max_freq = frequency.values().copied().max().unwrap_or(0);

    let (ranks, method) = if max_freq >= 2 || vectors.len() == 1 {
        // BTreeMap iteration is lexicographic, so min_by_key keeps the
        // lexicographically smallest rank list among equal distances.
        let best = frequency
            .iter()
            .filter(|(_, &c)| c == max_freq)
            .min_by_key(|(ranks, _)| total_distance(ranks, vectors))
            .map(|(ranks, _)| ranks.clone())
            .expect("non-empty");
        (best, ModalMethod::Frequency)
    } else if ids.len() <= KEMENY_EXHAUSTIVE_LIMIT {
        (kemeny_exhaustive(ids.len(), vectors), ModalMethod::Kemeny)
    } else {
        let merged = merge_borda(vectors)?;
        (merged.rank_list(), ModalMethod::BordaApproximation)
    };

    let support = frequency.get(&ranks).copied().unwrap_or(0);
    let distance = total_distance(&ranks, vectors);
    Ok(ModalRanking {
        ranking: RankingVector::new("modal", ids.into_iter().zip(ranks)),
        support,
        method,
        total_distance: Rational64::new(distance as i64, 2),
    })
}

/// Strict ranking minimizing total Kendall distance; ties on distance go to
/// the lexicographically smallest rank list (ranks listed in story-id order).
fn kemeny_exhaustive(n: usize, vectors: &[RankingVector]) -> Vec<Rank> {
    // cost[i][j]: half-unit penalty for placing story i ahead of story j
    let lists: Vec<Vec<Rank>> = vectors.iter().map(|v| v.rank_list()).collect();
    let mut cost = vec![vec![0u64; n]; n];
    for list in &lists {
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    cost[i][j] += match list[i].cmp(&list[j]) {
                        std::cmp::Ordering::Less => 0,
                        std::cmp::Ordering::Equal => 1,
                        std::cmp::Ordering::Greater => 2,
                    };
                }
            }
        }
    }

    // Enumerate rank assignments in lexicographic order; the first minimum wins.
    let mut ranks: Vec<usize> = (1..=n).collect();
    let mut best: Option<(u64, Vec<usize>)> = None;
    loop {
        let mut total = 0;
        for i in 0..n {
            for j in 0..n {
                if ranks[i] < ranks[j] {
                    total += cost[i][j];
                }
            }
        }
        if best.as_ref().is_none_or(|(b, _)| total < *b) {
            best = Some((total, ranks.clone()));
        }
        if !next_permutation(&mut ranks) {
            break;
        }
    }
    best.expect("at least one permutation")
        .1
        .into_iter()
        .map(|r| Rank::from_integer(r as i64))
        .collect()
}

fn next_permutation(v: &mut [usize]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// Pairwise Kendall distances; symmetric with a zero diagonal.
pub fn consistency_matrix(
    vectors: &[RankingVector],
) -> Result<Vec<Vec<Rational64>>, AggregationError> {
    if vectors.len() < 2 {
        return Err(AggregationError::TooFew {
            needed: 2,
            got: vectors.len(),
        });
    }
    check_coverage(vectors)?;
    let k = vectors.len();
    let mut m = vec![vec![Rational64::zero(); k]; k];
    for i in 0..k {
        for j in (i + 1)..k {
            let d = kendall_distance(&vectors[i], &vectors[j])?;
            m[i][j] = d;
            m[j][i] = d;
        }
    }
    Ok(m)
}

/// Both steps of the ranking evaluation: pairwise comparison, then the modal ranking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub sources: Vec<String>,
    pub distances: Vec<Vec<f64>>,
    pub modal: ModalRanking,
}

pub fn consistency_report(
    vectors: &[RankingVector],
) -> Result<ConsistencyReport, AggregationError> {
    let matrix = consistency_matrix(vectors)?;
    let modal = modal_ranking(vectors)?;
    Ok(ConsistencyReport {
        sources: vectors.iter().map(|v| v.source.clone()).collect(),
        distances: matrix
            .iter()
            .map(|row| row.iter().map(crate::numeric::to_f64).collect())
            .collect(),
        modal,
    })
}
