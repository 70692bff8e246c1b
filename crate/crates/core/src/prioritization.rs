//! Hundred-Dollar, WSJF and AHP scoring, plus average-rank tie handling.
//!
//! Every technique turns one or more agent score sheets into a per-story
//! score; [`ranks_from_scores`] then turns scores into fractional ranks where
//! tied stories share the mean of the positions they occupy.

use std::collections::{BTreeMap, BTreeSet};

use num_rational::Rational64;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{AgentRole, PrioritizationTechnique, Rank, StoryId};
use crate::numeric::{format_rational, mean, serde_rational, to_f64};

/// Saaty's random consistency index for n = 1..=10.
pub const RANDOM_INDEX: [f64; 10] = [0.0, 0.0, 0.58, 0.90, 1.12, 1.24, 1.32, 1.41, 1.45, 1.49];

/// Matrices with a consistency ratio above this are flagged inconsistent.
pub const CONSISTENCY_THRESHOLD: f64 = 0.10;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PrioritizationError {
    #[error("no score sheets supplied")]
    NoSheets,
    #[error("sheets mix techniques: expected {expected}, found {found}")]
    MixedTechnique {
        expected: PrioritizationTechnique,
        found: PrioritizationTechnique,
    },
    #[error("coverage mismatch: {0}")]
    CoverageMismatch(String),
    #[error("allocation sum violation: sum={0}≠100")]
    SumViolation(String),
    #[error("constraint violation: {0}")]
    ConstraintViolation(String),
    #[error("job size is zero for {0}")]
    ZeroJobSize(StoryId),
    #[error("need at least 2 items, got {0}")]
    InsufficientItems(usize),
    #[error("invalid pairwise matrix: {0}")]
    InvalidMatrix(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WsjfInput {
    #[serde(with = "serde_rational")]
    pub cod_value: Rational64,
    #[serde(with = "serde_rational")]
    pub time_criticality: Rational64,
    #[serde(with = "serde_rational")]
    pub risk_reduction: Rational64,
    #[serde(with = "serde_rational")]
    pub job_size: Rational64,
}

impl WsjfInput {
    pub fn from_integers(
        cod_value: i64,
        time_criticality: i64,
        risk_reduction: i64,
        job_size: i64,
    ) -> Self {
        Self {
            cod_value: Rational64::from_integer(cod_value),
            time_criticality: Rational64::from_integer(time_criticality),
            risk_reduction: Rational64::from_integer(risk_reduction),
            job_size: Rational64::from_integer(job_size),
        }
    }

    pub fn cost_of_delay(&self) -> Rational64 {
        self.cod_value + self.time_criticality + self.risk_reduction
    }
}

/// Technique-specific numeric judgment for one story.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScorePayload {
    Allocation(#[serde(with = "serde_rational")] Rational64),
    Wsjf(WsjfInput),
    Importance(#[serde(with = "serde_rational")] Rational64),
}

impl ScorePayload {
    pub fn technique(&self) -> PrioritizationTechnique {
        match self {
            ScorePayload::Allocation(_) => PrioritizationTechnique::HundredDollar,
            ScorePayload::Wsjf(_) => PrioritizationTechnique::Wsjf,
            ScorePayload::Importance(_) => PrioritizationTechnique::Ahp,
        }
    }
}

/// One agent's per-story judgments under one technique.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreSheet {
    pub agent: AgentRole,
    pub technique: PrioritizationTechnique,
    pub entries: BTreeMap<StoryId, ScorePayload>,
    #[serde(default)]
    pub justifications: BTreeMap<StoryId, String>,
}

impl ScoreSheet {
    pub fn new(agent: AgentRole, technique: PrioritizationTechnique) -> Self {
        Self {
            agent,
            technique,
            entries: BTreeMap::new(),
            justifications: BTreeMap::new(),
        }
    }

    pub fn with_entry(
        mut self,
        id: impl Into<StoryId>,
        payload: ScorePayload,
        why: impl Into<String>,
    ) -> Self {
        let id = id.into();
        self.justifications.insert(id.clone(), why.into());
        self.entries.insert(id, payload);
        self
    }

    pub fn story_ids(&self) -> BTreeSet<StoryId> {
        self.entries.keys().cloned().collect()
    }

    /// Checks the technique's numeric constraints.
    pub fn validate(&self) -> Result<(), PrioritizationError> {
        let one = Rational64::from_integer(1);
        for (id, payload) in &self.entries {
            if payload.technique() != self.technique {
                return Err(PrioritizationError::MixedTechnique {
                    expected: self.technique,
                    found: payload.technique(),
                });
            }
            match payload {
                ScorePayload::Allocation(v) => {
                    if *v < Rational64::zero() || !v.is_integer() {
                        return Err(PrioritizationError::ConstraintViolation(format!(
                            "{id}: allocation {} must be a non-negative integer",
                            format_rational(v)
                        )));
                    }
                }
                ScorePayload::Wsjf(w) => {
                    let ten = Rational64::from_integer(10);
                    for (name, v) in [
                        ("cod_value", w.cod_value),
                        ("time_criticality", w.time_criticality),
                        ("risk_reduction", w.risk_reduction),
                        ("job_size", w.job_size),
                    ] {
                        if v < one || v > ten {
                            return Err(PrioritizationError::ConstraintViolation(format!(
                                "{id}: {name}={} outside 1–10",
                                format_rational(&v)
                            )));
                        }
                    }
                }
                ScorePayload::Importance(v) => {
                    if *v < one || *v > Rational64::from_integer(9) {
                        return Err(PrioritizationError::ConstraintViolation(format!(
                            "{id}: importance={} outside 1–9",
                            format_rational(v)
                        )));
                    }
                }
            }
        }
        if self.technique == PrioritizationTechnique::HundredDollar {
            let sum = self.allocation_sum();
            if sum != Rational64::from_integer(100) {
                return Err(PrioritizationError::SumViolation(format_rational(&sum)));
            }
        }
        Ok(())
    }

    fn allocation_sum(&self) -> Rational64 {
        self.entries
            .values()
            .filter_map(|p| match p {
                ScorePayload::Allocation(v) => Some(*v),
                _ => None,
            })
            .sum()
    }
}

/// Checks that all sheets use `technique` and cover the same story set.
fn check_sheets(
    sheets: &[ScoreSheet],
    technique: PrioritizationTechnique,
) -> Result<BTreeSet<StoryId>, PrioritizationError> {
    let first = sheets.first().ok_or(PrioritizationError::NoSheets)?;
    let ids = first.story_ids();
    for sheet in sheets {
        if sheet.technique != technique {
            return Err(PrioritizationError::MixedTechnique {
                expected: technique,
                found: sheet.technique,
            });
        }
        if sheet.story_ids() != ids {
            return Err(PrioritizationError::CoverageMismatch(format!(
                "{} sheet covers {:?}, expected {:?}",
                sheet.agent,
                sheet.story_ids(),
                ids
            )));
        }
    }
    Ok(ids)
}

/// Mean allocation per story across sheets. Scores sum to exactly 100.
pub fn score_hundred_dollar(
    sheets: &[ScoreSheet],
) -> Result<BTreeMap<StoryId, Rational64>, PrioritizationError> {
    let ids = check_sheets(sheets, PrioritizationTechnique::HundredDollar)?;
    for sheet in sheets {
        sheet.validate()?;
    }
    Ok(ids
        .into_iter()
        .map(|id| {
            let values: Vec<Rational64> = sheets
                .iter()
                .map(|s| match s.entries[&id] {
                    ScorePayload::Allocation(v) => v,
                    _ => unreachable!("validated"),
                })
                .collect();
            (id, mean(&values))
        })
        .collect())
}

pub fn wsjf_score(input: &WsjfInput) -> Option<Rational64> {
    if input.job_size.is_zero() {
        return None;
    }
    Some(input.cost_of_delay() / input.job_size)
}

/// CoD / job size. With several sheets each component is averaged before the division.
pub fn score_wsjf(
    sheets: &[ScoreSheet],
) -> Result<BTreeMap<StoryId, Rational64>, PrioritizationError> {
    let ids = check_sheets(sheets, PrioritizationTechnique::Wsjf)?;
    for sheet in sheets {
        sheet.validate()?;
    }
    let mut out = BTreeMap::new();
    for id in ids {
        let inputs: Vec<WsjfInput> = sheets
            .iter()
            .map(|s| match s.entries[&id] {
                ScorePayload::Wsjf(w) => w,
                _ => unreachable!("validated"),
            })
            .collect();
        let avg = |f: fn(&WsjfInput) -> Rational64| mean(&inputs.iter().map(f).collect::<Vec<_>>());
        let averaged = WsjfInput {
            cod_value: avg(|w| w.cod_value),
            time_criticality: avg(|w| w.time_criticality),
            risk_reduction: avg(|w| w.risk_reduction),
            job_size: avg(|w| w.job_size),
        };
        let score =
            wsjf_score(&averaged).ok_or_else(|| PrioritizationError::ZeroJobSize(id.clone()))?;
        out.insert(id, score);
    }
    Ok(out)
}

/// Reciprocal pairwise-comparison matrix on the Saaty scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseMatrix {
    pub n: usize,
    pub cells: Vec<Vec<f64>>,
    /// Row/column labels when the matrix was built from story importances.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub items: Vec<StoryId>,
}

impl PairwiseMatrix {
    pub fn from_cells(cells: Vec<Vec<f64>>) -> Result<Self, PrioritizationError> {
        let m = Self {
            n: cells.len(),
            cells,
            items: Vec::new(),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), PrioritizationError> {
        const TOL: f64 = 1e-9;
        if self.n == 0 || self.cells.len() != self.n {
            return Err(PrioritizationError::InvalidMatrix(
                "empty or wrong row count".into(),
            ));
        }
        for (i, row) in self.cells.iter().enumerate() {
            if row.len() != self.n {
                return Err(PrioritizationError::InvalidMatrix(format!(
                    "row {i} has {} cells",
                    row.len()
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() || !(1.0 / 9.0 - TOL..=9.0 + TOL).contains(&v) {
                    return Err(PrioritizationError::InvalidMatrix(format!(
                        "cell ({i},{j})={v} outside [1/9, 9]"
                    )));
                }
                if i == j && (v - 1.0).abs() > TOL {
                    return Err(PrioritizationError::InvalidMatrix(format!(
                        "diagonal ({i},{i})={v}"
                    )));
                }
                if (v * self.cells[j][i] - 1.0).abs() > 1e-6 {
                    return Err(PrioritizationError::InvalidMatrix(format!(
                        "cells ({i},{j}) and ({j},{i}) not reciprocal"
                    )));
                }
            }
        }
        Ok(())
    }

    /// True when cells[i][j]·cells[j][k] = cells[i][k] for all i, j, k (within `tol`).
    pub fn is_consistent(&self, tol: f64) -> bool {
        let n = self.n;
        (0..n).all(|i| {
            (0..n).all(|j| {
                (0..n)
                    .all(|k| (self.cells[i][j] * self.cells[j][k] - self.cells[i][k]).abs() <= tol)
            })
        })
    }
}

/// cells[i][j] = clamp(importance_i / importance_j, 1/9, 9).
pub fn build_pairwise(
    importance: &BTreeMap<StoryId, f64>,
) -> Result<PairwiseMatrix, PrioritizationError> {
    if importance.len() < 2 {
        return Err(PrioritizationError::InsufficientItems(importance.len()));
    }
    if let Some((id, v)) = importance
        .iter()
        .find(|(_, v)| !v.is_finite() || **v <= 0.0)
    {
        return Err(PrioritizationError::ConstraintViolation(format!(
            "{id}: importance {v} must be positive"
        )));
    }
    let items: Vec<StoryId> = importance.keys().cloned().collect();
    let values: Vec<f64> = importance.values().copied().collect();
    let n = values.len();
    let mut cells = vec![vec![1.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let ratio = (values[i] / values[j]).clamp(1.0 / 9.0, 9.0);
            cells[i][j] = ratio;
            cells[j][i] = 1.0 / ratio;
        }
    }
    Ok(PairwiseMatrix { n, cells, items })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AhpResult {
    pub weights: Vec<f64>,
    pub lambda_max: f64,
    pub consistency_index: f64,
    pub consistency_ratio: f64,
    /// CR ≤ 0.10.
    pub consistent: bool,
}

pub fn random_index(n: usize) -> f64 {
    match n {
        0 => 0.0,
        1..=10 => RANDOM_INDEX[n - 1],
        // the table stops at 10; larger matrices reuse its last value
        _ => RANDOM_INDEX[9],
    }
}

/// Geometric-mean priority weights with the principal-eigenvalue estimate and
/// Saaty consistency ratio.
pub fn ahp_weights(m: &PairwiseMatrix) -> Result<AhpResult, PrioritizationError> {
    m.validate()?;
    let n = m.n;
    let row_gm: Vec<f64> = m
        .cells
        .iter()
        .map(|row| (row.iter().map(|v| v.ln()).sum::<f64>() / n as f64).exp())
        .collect();
    let total: f64 = row_gm.iter().sum();
    let weights: Vec<f64> = row_gm.iter().map(|g| g / total).collect();

    let lambda_max = (0..n)
        .map(|i| {
            let mw: f64 = (0..n).map(|j| m.cells[i][j] * weights[j]).sum();
            mw / weights[i]
        })
        .sum::<f64>()
        / n as f64;
    let (ci, cr) = if n >= 3 {
        let ci = (lambda_max - n as f64) / (n as f64 - 1.0);
        (ci, ci / random_index(n))
    } else {
        (0.0, 0.0)
    };
    Ok(AhpResult {
        weights,
        lambda_max,
        consistency_index: ci,
        consistency_ratio: cr,
        consistent: cr <= CONSISTENCY_THRESHOLD,
    })
}

/// AHP weights from the mean importance per story across sheets.
pub fn score_ahp(
    sheets: &[ScoreSheet],
) -> Result<(BTreeMap<StoryId, f64>, AhpResult), PrioritizationError> {
    let importance: BTreeMap<StoryId, f64> = mean_importance(sheets)?
        .into_iter()
        .map(|(id, v)| (id, to_f64(&v)))
        .collect();
    if importance.len() == 1 {
        let (id, _) = importance.into_iter().next().expect("one item");
        let result = AhpResult {
            weights: vec![1.0],
            lambda_max: 1.0,
            consistency_index: 0.0,
            consistency_ratio: 0.0,
            consistent: true,
        };
        return Ok((BTreeMap::from([(id, 1.0)]), result));
    }
    let matrix = build_pairwise(&importance)?;
    let result = ahp_weights(&matrix)?;
    let scores = matrix
        .items
        .iter()
        .cloned()
        .zip(result.weights.iter().copied())
        .collect();
    Ok((scores, result))
}

/// Per-story scores for any technique; higher is more important.
pub fn technique_scores(
    technique: PrioritizationTechnique,
    sheets: &[ScoreSheet],
) -> Result<BTreeMap<StoryId, f64>, PrioritizationError> {
    let exact_to_f64 = |m: BTreeMap<StoryId, Rational64>| {
        m.into_iter()
            .map(|(k, v)| (k, v.to_f64().unwrap_or(f64::NAN)))
            .collect()
    };
    match technique {
        PrioritizationTechnique::HundredDollar => score_hundred_dollar(sheets).map(exact_to_f64),
        PrioritizationTechnique::Wsjf => score_wsjf(sheets).map(exact_to_f64),
        PrioritizationTechnique::Ahp => score_ahp(sheets).map(|(s, _)| s),
    }
}

fn mean_importance(
    sheets: &[ScoreSheet],
) -> Result<BTreeMap<StoryId, Rational64>, PrioritizationError> {
    let ids = check_sheets(sheets, PrioritizationTechnique::Ahp)?;
    for sheet in sheets {
        sheet.validate()?;
    }
    Ok(ids
        .into_iter()
        .map(|id| {
            let values: Vec<Rational64> = sheets
                .iter()
                .filter_map(|s| match s.entries[&id] {
                    ScorePayload::Importance(v) => Some(v),
                    _ => None,
                })
                .collect();
            (id, mean(&values))
        })
        .collect())
}

/// Exact keys whose descending order is the technique's ranking. AHP weights
/// increase strictly with mean importance, so the rational mean stands in for
/// them and ties stay exact.
pub fn technique_rank_keys(
    technique: PrioritizationTechnique,
    sheets: &[ScoreSheet],
) -> Result<BTreeMap<StoryId, Rational64>, PrioritizationError> {
    match technique {
        PrioritizationTechnique::HundredDollar => score_hundred_dollar(sheets),
        PrioritizationTechnique::Wsjf => score_wsjf(sheets),
        PrioritizationTechnique::Ahp => mean_importance(sheets),
    }
}

/// Average-rank ordering of stories under `technique`, best first.
pub fn technique_ranking(
    technique: PrioritizationTechnique,
    sheets: &[ScoreSheet],
) -> Result<Vec<(StoryId, Rank)>, PrioritizationError> {
    Ok(ranks_by_key(&technique_rank_keys(technique, sheets)?, true))
}

/// Average-rank ordering. With `descending` the highest score gets rank 1.
/// Scores that compare exactly equal are tied and share the mean position.
/// Output is sorted by rank then story id.
pub fn ranks_from_scores(
    scores: &BTreeMap<StoryId, f64>,
    descending: bool,
) -> Vec<(StoryId, Rank)> {
    let mut items: Vec<(&StoryId, f64)> = scores.iter().map(|(k, v)| (k, *v)).collect();
    items.sort_by(|a, b| {
        let ord = a.1.total_cmp(&b.1);
        let ord = if descending { ord.reverse() } else { ord };
        ord.then_with(|| a.0.cmp(b.0))
    });
    let mut out = Vec::with_capacity(items.len());
    let mut i = 0;
    while i < items.len() {
        let mut j = i;
        while j + 1 < items.len() && items[j + 1].1 == items[i].1 {
            j += 1;
        }
        let rank = Rank(Rational64::new((i + 1 + j + 1) as i64, 2));
        for item in &items[i..=j] {
            out.push((item.0.clone(), rank));
        }
        i = j + 1;
    }
    out
}

/// Average-rank ordering over any totally ordered key (exact ties).
pub fn ranks_by_key<K: Ord>(keys: &BTreeMap<StoryId, K>, descending: bool) -> Vec<(StoryId, Rank)> {
    let mut items: Vec<(&StoryId, &K)> = keys.iter().collect();
    items.sort_by(|a, b| {
        let ord = if descending {
            b.1.cmp(a.1)
        } else {
            a.1.cmp(b.1)
        };
        ord.then_with(|| a.0.cmp(b.0))
    });
    let mut out = Vec::with_capacity(items.len());
    let mut i = 0;
    while i < items.len() {
        let mut j = i;
        while j + 1 < items.len() && items[j + 1].1 == items[i].1 {
            j += 1;
        }
        let rank = Rank(Rational64::new((i + 1 + j + 1) as i64, 2));
        for item in &items[i..=j] {
            out.push((item.0.clone(), rank));
        }
        i = j + 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn id(s: &str) -> StoryId {
        StoryId::from(s)
    }

    fn dollars(agent: AgentRole, alloc: &[(&str, i64)]) -> ScoreSheet {
        alloc.iter().fold(
            ScoreSheet::new(agent, PrioritizationTechnique::HundredDollar),
            |s, (k, v)| {
                s.with_entry(
                    *k,
                    ScorePayload::Allocation(Rational64::from_integer(*v)),
                    "",
                )
            },
        )
    }

    fn wsjf(agent: AgentRole, rows: &[(&str, [i64; 4])]) -> ScoreSheet {
        rows.iter().fold(
            ScoreSheet::new(agent, PrioritizationTechnique::Wsjf),
            |s, (k, v)| {
                s.with_entry(
                    *k,
                    ScorePayload::Wsjf(WsjfInput::from_integers(v[0], v[1], v[2], v[3])),
                    "",
                )
            },
        )
    }

    fn r(n: i64, d: i64) -> Rank {
        Rank(Rational64::new(n, d))
    }

    #[test]
    fn hundred_dollar_examples() {
        let one = score_hundred_dollar(&[dollars(
            AgentRole::ProductOwner,
            &[("A", 50), ("B", 30), ("C", 20)],
        )])
        .unwrap();
        assert_eq!(one[&id("A")], Rational64::from_integer(50));
        assert_eq!(one[&id("C")], Rational64::from_integer(20));

        let two = score_hundred_dollar(&[
            dollars(AgentRole::ProductOwner, &[("A", 60), ("B", 40)]),
            dollars(AgentRole::SeniorDeveloper, &[("A", 40), ("B", 60)]),
        ])
        .unwrap();
        assert_eq!(two[&id("A")], Rational64::from_integer(50));
        assert_eq!(two[&id("B")], Rational64::from_integer(50));

        let err =
            score_hundred_dollar(&[dollars(AgentRole::ProductOwner, &[("A", 50), ("B", 49)])])
                .unwrap_err();
        assert_eq!(err, PrioritizationError::SumViolation("99".into()));
    }

    #[test]
    fn hundred_dollar_rejects_mixed_and_uncovered() {
        let err = score_hundred_dollar(&[
            dollars(AgentRole::ProductOwner, &[("A", 50), ("B", 50)]),
            wsjf(
                AgentRole::SeniorDeveloper,
                &[("A", [1, 1, 1, 1]), ("B", [1, 1, 1, 1])],
            ),
        ])
        .unwrap_err();
        assert!(matches!(err, PrioritizationError::MixedTechnique { .. }));
        let err = score_hundred_dollar(&[
            dollars(AgentRole::ProductOwner, &[("A", 50), ("B", 50)]),
            dollars(AgentRole::SeniorDeveloper, &[("A", 100)]),
        ])
        .unwrap_err();
        assert!(matches!(err, PrioritizationError::CoverageMismatch(_)));
        assert_eq!(
            score_hundred_dollar(&[]).unwrap_err(),
            PrioritizationError::NoSheets
        );
    }

    #[test]
    fn wsjf_examples() {
        let s = score_wsjf(&[wsjf(
            AgentRole::ProductOwner,
            &[("A", [10, 6, 4, 5]), ("B", [1, 1, 1, 3])],
        )])
        .unwrap();
        assert_eq!(s[&id("A")], Rational64::from_integer(4));
        assert_eq!(s[&id("B")], Rational64::from_integer(1));

        // CoD 12 in both, sizes 2 and 4 average to 3
        let s = score_wsjf(&[
            wsjf(AgentRole::ProductOwner, &[("A", [4, 4, 4, 2])]),
            wsjf(AgentRole::SeniorDeveloper, &[("A", [6, 3, 3, 4])]),
        ])
        .unwrap();
        assert_eq!(s[&id("A")], Rational64::from_integer(4));
    }

    #[test]
    fn wsjf_rejects_out_of_range_components() {
        let err =
            score_wsjf(&[wsjf(AgentRole::ProductOwner, &[("A", [11, 1, 1, 1])])]).unwrap_err();
        assert!(matches!(err, PrioritizationError::ConstraintViolation(_)));
        let err = score_wsjf(&[wsjf(AgentRole::ProductOwner, &[("A", [1, 1, 1, 0])])]).unwrap_err();
        assert!(matches!(err, PrioritizationError::ConstraintViolation(_)));
        assert!(wsjf_score(&WsjfInput::from_integers(1, 1, 1, 0)).is_none());
    }

    #[test]
    fn pairwise_examples() {
        let m = build_pairwise(&BTreeMap::from([(id("A"), 3.0), (id("B"), 1.0)])).unwrap();
        assert_eq!(m.cells, vec![vec![1.0, 3.0], vec![1.0 / 3.0, 1.0]]);

        let m = build_pairwise(&BTreeMap::from([
            (id("A"), 4.0),
            (id("B"), 4.0),
            (id("C"), 4.0),
        ]))
        .unwrap();
        assert!(m.cells.iter().flatten().all(|&v| v == 1.0));

        let m = build_pairwise(&BTreeMap::from([
            (id("A"), 9.0),
            (id("B"), 1.0),
            (id("C"), 3.0),
        ]))
        .unwrap();
        assert_eq!(m.cells[0][1], 9.0);
        assert!((m.cells[1][2] - 1.0 / 3.0).abs() < 1e-15);

        assert_eq!(
            build_pairwise(&BTreeMap::from([(id("A"), 1.0)])).unwrap_err(),
            PrioritizationError::InsufficientItems(1)
        );
    }

    #[test]
    fn pairwise_clamps_to_saaty_scale() {
        let m = build_pairwise(&BTreeMap::from([(id("A"), 100.0), (id("B"), 1.0)])).unwrap();
        assert_eq!(m.cells[0][1], 9.0);
        assert!((m.cells[1][0] - 1.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn ahp_two_by_two() {
        let m = PairwiseMatrix::from_cells(vec![vec![1.0, 3.0], vec![1.0 / 3.0, 1.0]]).unwrap();
        let res = ahp_weights(&m).unwrap();
        assert!((res.weights[0] - 0.75).abs() < 1e-12);
        assert!((res.weights[1] - 0.25).abs() < 1e-12);
        assert_eq!(res.consistency_ratio, 0.0);
    }

    #[test]
    fn ahp_consistent_three_by_three() {
        let m = PairwiseMatrix::from_cells(vec![
            vec![1.0, 2.0, 4.0],
            vec![0.5, 1.0, 2.0],
            vec![0.25, 0.5, 1.0],
        ])
        .unwrap();
        let res = ahp_weights(&m).unwrap();
        for (w, e) in res.weights.iter().zip([4.0 / 7.0, 2.0 / 7.0, 1.0 / 7.0]) {
            assert!((w - e).abs() < 1e-12);
        }
        assert!((res.lambda_max - 3.0).abs() < 1e-9);
        assert!(res.consistency_ratio.abs() < 1e-9);
        assert!(res.consistent);
    }

    #[test]
    fn ahp_flags_inconsistent_matrix() {
        // A>B, B>C but C≫A
        let m = PairwiseMatrix::from_cells(vec![
            vec![1.0, 9.0, 1.0 / 9.0],
            vec![1.0 / 9.0, 1.0, 9.0],
            vec![9.0, 1.0 / 9.0, 1.0],
        ])
        .unwrap();
        let res = ahp_weights(&m).unwrap();
        assert!(res.consistency_ratio > CONSISTENCY_THRESHOLD);
        assert!(!res.consistent);
    }

    #[test]
    fn invalid_matrices_rejected() {
        assert!(PairwiseMatrix::from_cells(vec![vec![1.0, 2.0], vec![2.0, 1.0]]).is_err());
        assert!(PairwiseMatrix::from_cells(vec![vec![2.0]]).is_err());
        assert!(PairwiseMatrix::from_cells(vec![vec![1.0, 10.0], vec![0.1, 1.0]]).is_err());
        assert!(PairwiseMatrix::from_cells(vec![]).is_err());
    }

    #[test]
    fn random_index_table() {
        assert_eq!(random_index(1), 0.0);
        assert_eq!(random_index(2), 0.0);
        assert_eq!(random_index(3), 0.58);
        assert_eq!(random_index(7), 1.32);
        assert_eq!(random_index(10), 1.49);
    }

    #[test]
    fn ranks_examples() {
        let scores = |v: &[(&str, f64)]| {
            v.iter()
                .map(|(k, x)| (id(k), *x))
                .collect::<BTreeMap<_, _>>()
        };
        assert_eq!(
            ranks_from_scores(&scores(&[("A", 50.0), ("B", 30.0), ("C", 20.0)]), true),
            vec![(id("A"), r(1, 1)), (id("B"), r(2, 1)), (id("C"), r(3, 1))]
        );
        assert_eq!(
            ranks_from_scores(&scores(&[("A", 40.0), ("B", 40.0), ("C", 20.0)]), true),
            vec![(id("A"), r(3, 2)), (id("B"), r(3, 2)), (id("C"), r(3, 1))]
        );
        let all = ranks_from_scores(
            &scores(&[("A", 1.0), ("B", 1.0), ("C", 1.0), ("D", 1.0)]),
            true,
        );
        assert!(all.iter().all(|(_, rank)| *rank == r(5, 2)));
        assert_eq!(
            ranks_from_scores(&scores(&[("A", 1.0), ("B", 2.0)]), false),
            vec![(id("A"), r(1, 1)), (id("B"), r(2, 1))]
        );
    }

    #[test]
    fn technique_scores_dispatch() {
        let sheet = ScoreSheet::new(AgentRole::Manager, PrioritizationTechnique::Ahp)
            .with_entry(
                "A",
                ScorePayload::Importance(Rational64::from_integer(3)),
                "",
            )
            .with_entry(
                "B",
                ScorePayload::Importance(Rational64::from_integer(1)),
                "",
            );
        let s = technique_scores(PrioritizationTechnique::Ahp, &[sheet]).unwrap();
        assert!((s[&id("A")] - 0.75).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn hundred_dollar_scores_sum_to_100(
            sheets in proptest::collection::vec(proptest::collection::vec(0u32..50, 4), 1..5)
        ) {
            let sheets: Vec<ScoreSheet> = sheets.iter().map(|raw| {
                let mut alloc: Vec<i64> = raw.iter().map(|v| *v as i64).collect();
                let partial: i64 = alloc[..3].iter().sum();
                if partial > 100 {
                    alloc = vec![25, 25, 25, 25];
                } else {
                    alloc[3] = 100 - partial;
                }
                dollars(AgentRole::ProductOwner, &[("A", alloc[0]), ("B", alloc[1]), ("C", alloc[2]), ("D", alloc[3])])
            }).collect();
            let scores = score_hundred_dollar(&sheets).unwrap();
            prop_assert_eq!(scores.values().sum::<Rational64>(), Rational64::from_integer(100));
        }

        #[test]
        fn rank_sum_is_triangular(values in proptest::collection::vec(0u8..6, 1..12)) {
            let scores: BTreeMap<StoryId, f64> = values.iter().enumerate().map(|(i, v)| (StoryId::ordinal(i + 1), *v as f64)).collect();
            let ranks = ranks_from_scores(&scores, true);
            let n = values.len() as i64;
            let total: Rational64 = ranks.iter().map(|(_, r)| r.0).sum();
            prop_assert_eq!(total, Rational64::new(n * (n + 1), 2));
        }
    }
}
