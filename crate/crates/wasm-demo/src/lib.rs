//! Browser bindings for the prioritization math.
//!
//! Each operation takes and returns JSON text. The plain functions are what
//! the tests call; the `#[wasm_bindgen]` wrappers turn errors into JS
//! exceptions.

use std::collections::BTreeMap;

use reqagent_core::aggregation::{consistency_report, merge_borda, RankingVector};
use reqagent_core::numeric::serde_rational::from_json as rational;
use reqagent_core::prioritization::{
    ahp_weights, build_pairwise, ranks_from_scores, score_hundred_dollar, technique_ranking,
    PairwiseMatrix, ScorePayload, ScoreSheet,
};
use reqagent_core::{AgentRole, PrioritizationTechnique, Rank, StoryId};
use serde_json::{json, Map, Value};
use wasm_bindgen::prelude::*;

fn parse(input: &str) -> Result<Value, String> {
    serde_json::from_str(input).map_err(|e| format!("invalid JSON: {e}"))
}

fn object<'a>(value: &'a Value, key: &str) -> Result<&'a Map<String, Value>, String> {
    value
        .get(key)
        .and_then(Value::as_object)
        .ok_or_else(|| format!("'{key}' must be an object"))
}

fn array<'a>(value: &'a Value, key: &str) -> Result<&'a Vec<Value>, String> {
    value
        .get(key)
        .and_then(Value::as_array)
        .ok_or_else(|| format!("'{key}' must be an array"))
}

fn ranks_json(ranks: &[(StoryId, Rank)]) -> Value {
    ranks
        .iter()
        .map(|(id, r)| json!({"story_id": id, "rank": r}))
        .collect()
}

/// `{"importance": {"US-001": 5, ...}}` or `{"cells": [[1, 3], [0.333, 1]]}`.
pub fn ahp_explore(input: &str) -> Result<String, String> {
    let value = parse(input)?;
    let matrix = if let Some(cells) = value.get("cells") {
        let cells: Vec<Vec<f64>> =
            serde_json::from_value(cells.clone()).map_err(|e| format!("cells: {e}"))?;
        PairwiseMatrix::from_cells(cells).map_err(|e| e.to_string())?
    } else {
        let importance = object(&value, "importance")?
            .iter()
            .map(|(id, v)| {
                v.as_f64()
                    .map(|v| (StoryId::from(id.as_str()), v))
                    .ok_or(format!("{id}: not a number"))
            })
            .collect::<Result<BTreeMap<_, _>, _>>()?;
        build_pairwise(&importance).map_err(|e| e.to_string())?
    };
    let result = ahp_weights(&matrix).map_err(|e| e.to_string())?;
    let labels: Vec<String> = if matrix.items.is_empty() {
        (1..=matrix.n).map(|i| format!("item {i}")).collect()
    } else {
        matrix.items.iter().map(|id| id.to_string()).collect()
    };
    let scores: BTreeMap<StoryId, f64> = labels
        .iter()
        .zip(&result.weights)
        .map(|(l, w)| (StoryId::from(l.as_str()), *w))
        .collect();
    Ok(json!({
        "items": labels,
        "cells": matrix.cells,
        "weights": result.weights,
        "lambda_max": result.lambda_max,
        "consistency_index": result.consistency_index,
        "consistency_ratio": result.consistency_ratio,
        "consistent": result.consistent,
        "ranking": ranks_json(&ranks_from_scores(&scores, true)),
    })
    .to_string())
}

/// `{"sheets": [{"agent": "product_owner", "allocations": {"US-001": 40, ...}}]}`.
/// Each sheet must spend exactly 100.
pub fn hundred_dollar(input: &str) -> Result<String, String> {
    let value = parse(input)?;
    let mut sheets = Vec::new();
    for (i, sheet) in array(&value, "sheets")?.iter().enumerate() {
        let agent: AgentRole = match sheet.get("agent").and_then(Value::as_str) {
            Some(a) => a
                .parse()
                .map_err(|e: reqagent_core::DomainError| e.to_string())?,
            None => AgentRole::ProductOwner,
        };
        let mut s = ScoreSheet::new(agent, PrioritizationTechnique::HundredDollar);
        for (id, amount) in object(sheet, "allocations").map_err(|e| format!("sheet {i}: {e}"))? {
            let amount = rational(amount).ok_or(format!("sheet {i}: {id} is not a number"))?;
            s = s.with_entry(id.as_str(), ScorePayload::Allocation(amount), "");
        }
        sheets.push(s);
    }
    let scores = score_hundred_dollar(&sheets).map_err(|e| e.to_string())?;
    let ranks = technique_ranking(PrioritizationTechnique::HundredDollar, &sheets)
        .map_err(|e| e.to_string())?;
    let scores: Map<String, Value> = scores
        .iter()
        .map(|(id, s)| {
            (
                id.to_string(),
                json!(reqagent_core::numeric::format_rational(s)),
            )
        })
        .collect();
    Ok(json!({"scores": scores, "ranking": ranks_json(&ranks)}).to_string())
}

/// `{"rankings": [{"source": "PO", "order": ["US-002", "US-001"]}, ...]}`;
/// a ranking may give `"ranks": {"US-001": 1.5, ...}` instead of an order.
pub fn merge_rankings(input: &str) -> Result<String, String> {
    let value = parse(input)?;
    let mut vectors = Vec::new();
    for (i, r) in array(&value, "rankings")?.iter().enumerate() {
        let source = r
            .get("source")
            .and_then(Value::as_str)
            .map_or(format!("ranking {}", i + 1), str::to_string);
        let vector = if let Some(order) = r.get("order").and_then(Value::as_array) {
            let order: Vec<&str> = order.iter().filter_map(Value::as_str).collect();
            RankingVector::from_order(source, &order)
        } else {
            let ranks = object(r, "ranks")
                .map_err(|e| format!("{source}: {e}"))?
                .iter()
                .map(|(id, v)| {
                    rational(v)
                        .map(|v| (StoryId::from(id.as_str()), Rank(v)))
                        .ok_or(format!("{source}: bad rank for {id}"))
                })
                .collect::<Result<Vec<_>, _>>()?;
            RankingVector::new(source, ranks)
        };
        vectors.push(vector);
    }
    let merged = merge_borda(&vectors).map_err(|e| e.to_string())?;
    let mut borda: Vec<(StoryId, Rank)> = merged.ranks.into_iter().collect();
    borda.sort_by(|a, b| a.1.cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    let mut out = json!({"borda": ranks_json(&borda)});
    if vectors.len() >= 2 {
        let report = consistency_report(&vectors).map_err(|e| e.to_string())?;
        out["consistency"] = serde_json::to_value(report).map_err(|e| e.to_string())?;
    }
    Ok(out.to_string())
}

#[wasm_bindgen(js_name = ahpExplore)]
pub fn ahp_explore_js(input: &str) -> Result<String, JsError> {
    ahp_explore(input).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = hundredDollar)]
pub fn hundred_dollar_js(input: &str) -> Result<String, JsError> {
    hundred_dollar(input).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = mergeRankings)]
pub fn merge_rankings_js(input: &str) -> Result<String, JsError> {
    merge_rankings(input).map_err(|e| JsError::new(&e))
}
