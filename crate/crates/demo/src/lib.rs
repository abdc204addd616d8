//! Browser bindings: quadratic-form explorer, random-graph rate curve and
//! exact Kolmogorov distance of a weighted sum.
//!
//! Each binding wraps a plain function returning a JSON string, so the
//! logic is testable without a browser.

use be_core::chaos::{dki_bounds, OutcomeSpace, RandomFunctional, MAX_OUTCOMES};
use be_core::dist::{Distribution, LawSpec};
use be_core::graphweigh::{min_subgraph_scale, rg_rate};
use be_core::io::{read_matrix_csv, GraphFile};
use be_core::mc::exact_kdist_atoms;
use be_core::qform::{analyze, ChainLink};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Largest support kept while convolving a weighted sum.
const MAX_ATOMS: usize = 1 << 18;

type Res<T> = std::result::Result<T, String>;

fn law(text: &str) -> Res<Distribution> {
    let spec: LawSpec = serde_json::from_str(text).map_err(|e| format!("law: {e}"))?;
    spec.build().map_err(|e| e.to_string())
}

fn to_json(v: &impl Serialize) -> String {
    serde_json::to_string(v).expect("plain data serializes")
}

#[derive(Serialize)]
struct QformView {
    n: usize,
    sigma2: f64,
    fourth_moment: f64,
    tr_a4: f64,
    lambda1: f64,
    influence: f64,
    rate_r1: f64,
    rate_r2: f64,
    rate_gt: f64,
    fourth_gap: f64,
    chain: Vec<ChainLink>,
}

pub fn quadratic_form(matrix_csv: &str, law_json: &str) -> Res<String> {
    let a = read_matrix_csv(matrix_csv.as_bytes()).map_err(|e| e.to_string())?;
    let law = law(law_json)?;
    let q = analyze(&a, &law.moments()).map_err(|e| e.to_string())?;
    let err = |e: be_core::Error| e.to_string();
    Ok(to_json(&QformView {
        n: q.n,
        sigma2: q.sigma2,
        fourth_moment: q.eq4,
        tr_a4: q.tr_a4,
        lambda1: q.lambda1,
        influence: q.influence,
        rate_r1: q.bound_r1().map_err(err)?,
        rate_r2: q.bound_r2().map_err(err)?,
        rate_gt: q.rate_gt().map_err(err)?,
        fourth_gap: q.fourth_gap().map_err(err)?,
        chain: q.chain(),
    }))
}

#[derive(Serialize)]
struct RatePoint {
    n: u32,
    min_subgraph_scale: f64,
    rate: f64,
}

pub fn graph_rate_curve(graph_json: &str, law_json: &str, p: f64, sizes: &[u32]) -> Res<String> {
    let g: GraphFile = serde_json::from_str(graph_json).map_err(|e| format!("graph: {e}"))?;
    let g = g.build().map_err(|e| e.to_string())?;
    let law = law(law_json)?;
    let points = sizes
        .iter()
        .map(|&n| {
            Ok(RatePoint {
                n,
                min_subgraph_scale: min_subgraph_scale(&g, n as usize, p)
                    .map_err(|e| e.to_string())?,
                rate: rg_rate(&g, n as usize, p, &law).map_err(|e| e.to_string())?,
            })
        })
        .collect::<Res<Vec<_>>>()?;
    Ok(to_json(&points))
}

#[derive(Serialize)]
struct LinearView {
    kdist: f64,
    support: usize,
    /// Single-integral bounds, present when the outcome space is small
    /// enough to enumerate.
    bound_sharp: Option<f64>,
    bound_simple: Option<f64>,
}

/// Law of `sum_k w_k (X_k - EX) / sd` by repeated convolution.
fn standardized_sum(weights: &[f64], law: &Distribution) -> Res<(Vec<f64>, Vec<f64>)> {
    let mean = law.mean();
    let sd = (law.variance() * weights.iter().map(|w| w * w).sum::<f64>()).sqrt();
    if sd <= 0.0 {
        return Err("the weighted sum has zero variance".into());
    }
    let mut atoms = vec![(0.0f64, 1.0f64)];
    for &w in weights {
        let mut next = Vec::with_capacity(atoms.len() * law.len());
        for &(v, p) in &atoms {
            for (x, q) in law.atoms() {
                next.push((v + w * (x - mean) / sd, p * q));
            }
        }
        next.sort_by(|a, b| a.0.total_cmp(&b.0));
        atoms.clear();
        for (v, p) in next {
            match atoms.last_mut() {
                Some(last) if (last.0 - v).abs() <= 1e-12 * (1.0 + v.abs()) => last.1 += p,
                _ => atoms.push((v, p)),
            }
        }
        if atoms.len() > MAX_ATOMS {
            return Err(format!("support exceeds {MAX_ATOMS} points"));
        }
    }
    Ok(atoms.into_iter().unzip())
}

pub fn linear_form(weights: &[f64], law_json: &str) -> Res<String> {
    if weights.is_empty() {
        return Err("at least one weight is needed".into());
    }
    let law = law(law_json)?;
    let (values, probs) = standardized_sum(weights, &law)?;
    let kdist = exact_kdist_atoms(&values, &probs).map_err(|e| e.to_string())?;
    let fits = (law.len() as f64).powi(weights.len() as i32) <= MAX_OUTCOMES as f64;
    let (bound_sharp, bound_simple) = if fits {
        let space = OutcomeSpace::iid(&law, weights.len()).map_err(|e| e.to_string())?;
        let x =
            RandomFunctional::from_fn(&space, |v| v.iter().zip(weights).map(|(a, w)| a * w).sum())
                .centered()
                .standardized()
                .map_err(|e| e.to_string())?;
        let b = dki_bounds(&x).map_err(|e| e.to_string())?;
        (Some(b.sharp), Some(b.simple))
    } else {
        (None, None)
    };
    Ok(to_json(&LinearView {
        kdist,
        support: values.len(),
        bound_sharp,
        bound_simple,
    }))
}

#[wasm_bindgen(js_name = quadraticForm)]
pub fn quadratic_form_js(matrix_csv: &str, law_json: &str) -> Result<String, JsError> {
    quadratic_form(matrix_csv, law_json).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = graphRateCurve)]
pub fn graph_rate_curve_js(
    graph_json: &str,
    law_json: &str,
    p: f64,
    sizes: Vec<u32>,
) -> Result<String, JsError> {
    graph_rate_curve(graph_json, law_json, p, &sizes).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = linearForm)]
pub fn linear_form_js(weights: Vec<f64>, law_json: &str) -> Result<String, JsError> {
    linear_form(&weights, law_json).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    const RAD: &str = r#"{"type":"rademacher"}"#;

    #[test]
    fn exchange_matrix() {
        let v: Value = serde_json::from_str(&quadratic_form("0,1\n1,0", RAD).unwrap()).unwrap();
        assert_eq!(v["sigma2"], 4.0);
        assert!((v["rate_r2"].as_f64().unwrap() - 2f64.sqrt() / 4.0).abs() < 1e-12);
        assert!(quadratic_form("1,0\n0,1", RAD)
            .unwrap_err()
            .contains("variance"));
    }

    #[test]
    fn triangle_curve() {
        let g = r#"{"vertices":3,"edges":[[0,1],[1,2],[2,0]]}"#;
        let one = r#"{"type":"finite","atoms":[[1,1]]}"#;
        let v: Value =
            serde_json::from_str(&graph_rate_curve(g, one, 0.5, &[10, 20]).unwrap()).unwrap();
        assert_eq!(v[0]["min_subgraph_scale"], 50.0);
        assert!((v[0]["rate"].as_f64().unwrap() - 0.2).abs() < 1e-14);
        assert!(v[1]["rate"].as_f64().unwrap() < 0.2);
    }

    #[test]
    fn single_sign() {
        let v: Value = serde_json::from_str(&linear_form(&[1.0], RAD).unwrap()).unwrap();
        let phi1 = 0.841_344_746_068_542_9;
        assert!((v["kdist"].as_f64().unwrap() - (phi1 - 0.5)).abs() < 1e-12);
        assert!(v["bound_simple"].as_f64().unwrap() >= v["kdist"].as_f64().unwrap());
    }

    #[test]
    fn sum_matches_engine() {
        // Convolution against enumeration of the same sum.
        let w = [1.0, 0.5, -2.0, 0.25];
        let law = Distribution::three_point();
        let (vals, probs) = standardized_sum(&w, &law).unwrap();
        let space = OutcomeSpace::iid(&law, w.len()).unwrap();
        let x = RandomFunctional::from_fn(&space, |v| v.iter().zip(&w).map(|(a, b)| a * b).sum())
            .standardized()
            .unwrap();
        let exact = be_core::mc::exact_kdist(&x).unwrap().value;
        assert!((exact_kdist_atoms(&vals, &probs).unwrap() - exact).abs() < 1e-12);
        let big: Vec<f64> = (1..=40).map(|k| 1.0 + k as f64 * 1e-3).collect();
        let v: Value = serde_json::from_str(&linear_form(&big, RAD).unwrap()).unwrap();
        assert!(v["bound_simple"].is_null());
    }
}
