//! Function tables, accuracy measures, and weight tensors.
//!
//! A target function is an explicit truth table over all `2^k` inputs with
//! values in a finite ordered label alphabet. An accuracy measure scores a
//! decision `y'` against the true value `y`. The two combine into a weight
//! tensor holding one real vector over inputs per candidate label, which is
//! the only form the accuracy and optimality machinery consumes.

use std::collections::BTreeMap;

use serde::Deserialize;

use crate::bits;
use crate::{Error, Result};

/// Truth table of a function `{0,1}^k -> labels`.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionTable {
    k: usize,
    labels: Vec<String>,
    /// `table[x]` is the label index of `f(x)`.
    table: Vec<usize>,
}

impl FunctionTable {
    pub fn new(k: usize, labels: Vec<String>, table: Vec<usize>) -> Result<Self> {
        bits::check_party_count(k)?;
        if labels.is_empty() {
            return Err(Error::config("label alphabet is empty"));
        }
        let mut seen = labels.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != labels.len() {
            return Err(Error::config("label alphabet has duplicates"));
        }
        if table.len() != bits::domain_size(k) {
            return Err(Error::config(format!(
                "table has {} entries, expected {}",
                table.len(),
                bits::domain_size(k)
            )));
        }
        if let Some(&bad) = table.iter().find(|&&v| v >= labels.len()) {
            return Err(Error::config(format!("table value {bad} outside alphabet")));
        }
        Ok(FunctionTable { k, labels, table })
    }

    /// Table from a closure over input indices; values are label indices.
    pub fn from_fn(k: usize, labels: Vec<String>, f: impl Fn(usize) -> usize) -> Result<Self> {
        bits::check_party_count(k)?;
        let table = (0..bits::domain_size(k)).map(f).collect();
        FunctionTable::new(k, labels, table)
    }

    /// Parity of all `k` bits, labels `0`/`1`.
    pub fn xor(k: usize) -> Result<Self> {
        FunctionTable::from_fn(k, binary_labels(), |x| bits::weight(x) as usize % 2)
    }

    /// Conjunction of all `k` bits, labels `0`/`1`.
    pub fn and(k: usize) -> Result<Self> {
        let all = bits::domain_size(k) - 1;
        FunctionTable::from_fn(k, binary_labels(), |x| usize::from(x == all))
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Label index of `f(x)`.
    pub fn value(&self, x: usize) -> usize {
        self.table[x]
    }

    pub fn label(&self, x: usize) -> &str {
        &self.labels[self.table[x]]
    }
}

fn binary_labels() -> Vec<String> {
    vec!["0".into(), "1".into()]
}

/// Score `w(y, y')` of deciding `y'` when the truth is `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyMeasure {
    labels: Vec<String>,
    /// `w[y][y']` indexed by label positions.
    w: Vec<Vec<f64>>,
}

impl AccuracyMeasure {
    pub fn new(labels: Vec<String>, w: Vec<Vec<f64>>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::config("label alphabet is empty"));
        }
        if w.len() != labels.len() || w.iter().any(|row| row.len() != labels.len()) {
            return Err(Error::config(format!(
                "measure matrix is not {n}x{n}",
                n = labels.len()
            )));
        }
        if w.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::config("measure matrix has non-finite entries"));
        }
        Ok(AccuracyMeasure { labels, w })
    }

    /// One if correct, zero otherwise.
    pub fn indicator(labels: Vec<String>) -> Result<Self> {
        let n = labels.len();
        let w = (0..n)
            .map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect())
            .collect();
        AccuracyMeasure::new(labels, w)
    }

    /// Span minus absolute difference of numeric labels; `{0,1,2}` yields
    /// `w(y,y') = 2 - |y - y'|`.
    pub fn graded(labels: Vec<String>) -> Result<Self> {
        let values: Vec<f64> = labels
            .iter()
            .map(|l| {
                l.parse::<f64>()
                    .map_err(|_| Error::config(format!("label {l:?} is not numeric")))
            })
            .collect::<Result<_>>()?;
        let span = values
            .iter()
            .flat_map(|a| values.iter().map(move |b| (a - b).abs()))
            .fold(0.0, f64::max);
        let w = values
            .iter()
            .map(|a| values.iter().map(|b| span - (a - b).abs()).collect())
            .collect();
        AccuracyMeasure::new(labels, w)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// `w(labels[truth], labels[decided])`.
    pub fn score(&self, truth: usize, decided: usize) -> f64 {
        self.w[truth][decided]
    }
}

/// Per-label weight vectors `W^(y)_x = w(f(x), y)` over all inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightTensor {
    k: usize,
    labels: Vec<String>,
    /// `per_label[y][x]`.
    per_label: Vec<Vec<f64>>,
}

impl WeightTensor {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label_count(&self) -> usize {
        self.labels.len()
    }

    /// Weight vector of label `y` over all inputs.
    pub fn vector(&self, y: usize) -> &[f64] {
        &self.per_label[y]
    }

    pub fn weight(&self, y: usize, x: usize) -> f64 {
        self.per_label[y][x]
    }
}

/// Combines a function table with an accuracy measure.
pub fn build_weight_tensor(f: &FunctionTable, w: &AccuracyMeasure) -> Result<WeightTensor> {
    if f.labels() != w.labels() {
        return Err(Error::config(
            "function and measure alphabets differ".to_string(),
        ));
    }
    let n = bits::domain_size(f.k());
    let per_label = (0..f.labels().len())
        .map(|y| (0..n).map(|x| w.score(f.value(x), y)).collect())
        .collect();
    Ok(WeightTensor {
        k: f.k(),
        labels: f.labels().to_vec(),
        per_label,
    })
}

/// Convenience: indicator measure over a table's own alphabet.
pub fn indicator_measure(f: &FunctionTable) -> AccuracyMeasure {
    AccuracyMeasure::indicator(f.labels().to_vec()).expect("alphabet validated on construction")
}

#[derive(Deserialize)]
struct FunctionDoc {
    k: usize,
    labels: Vec<serde_json::Value>,
    table: BTreeMap<String, serde_json::Value>,
    #[serde(default)]
    w: Option<Vec<Vec<f64>>>,
}

fn canonical_label(v: &serde_json::Value) -> Result<String> {
    match v {
        serde_json::Value::String(s) => Ok(s.clone()),
        serde_json::Value::Number(n) => Ok(n.to_string()),
        other => Err(Error::Parse(format!("label {other} is not scalar"))),
    }
}

/// Loads a function table, and the measure if a `w` matrix is present, from
/// a JSON document `{"k":…, "labels":[…], "table":{"bitstring":label},
/// "w":[[…]]}`.
pub fn from_json(doc: &str) -> Result<(FunctionTable, Option<AccuracyMeasure>)> {
    let doc: FunctionDoc =
        serde_json::from_str(doc).map_err(|e| Error::Parse(format!("function document: {e}")))?;
    let labels: Vec<String> = doc
        .labels
        .iter()
        .map(canonical_label)
        .collect::<Result<_>>()?;
    let n = bits::domain_size(doc.k);
    if doc.table.len() != n {
        return Err(Error::Parse(format!(
            "table has {} entries, expected {n}",
            doc.table.len()
        )));
    }
    let mut table = vec![usize::MAX; n];
    for (key, value) in &doc.table {
        let x = bits::parse_bitstring(key, doc.k)?;
        let label = canonical_label(value)?;
        table[x] = labels
            .iter()
            .position(|l| *l == label)
            .ok_or_else(|| Error::Parse(format!("table value {label:?} not in labels")))?;
    }
    let f = FunctionTable::new(doc.k, labels.clone(), table)?;
    let measure = doc.w.map(|w| AccuracyMeasure::new(labels, w)).transpose()?;
    Ok((f, measure))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn xor_and_truth_tables() {
        let xor = FunctionTable::xor(2).unwrap();
        assert_eq!((0..4).map(|x| xor.value(x)).collect::<Vec<_>>(), [0, 1, 1, 0]);
        let and = FunctionTable::and(2).unwrap();
        assert_eq!((0..4).map(|x| and.value(x)).collect::<Vec<_>>(), [0, 0, 0, 1]);
    }

    #[test]
    fn xor_indicator_weight_vectors() {
        let f = FunctionTable::xor(2).unwrap();
        let w = indicator_measure(&f);
        let t = build_weight_tensor(&f, &w).unwrap();
        assert_eq!(t.vector(0), [1.0, 0.0, 0.0, 1.0]);
        assert_eq!(t.vector(1), [0.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn and_indicator_weight_vector() {
        let f = FunctionTable::and(2).unwrap();
        let t = build_weight_tensor(&f, &indicator_measure(&f)).unwrap();
        assert_eq!(t.vector(1), [0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn indicator_three_labels_is_identity() {
        let labels: Vec<String> = ["0", "1", "2"].map(String::from).to_vec();
        let m = AccuracyMeasure::indicator(labels).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(m.score(i, j), f64::from(u8::from(i == j)));
            }
        }
    }

    #[test]
    fn indicator_vectors_sum_to_ones() {
        let f = FunctionTable::xor(3).unwrap();
        let t = build_weight_tensor(&f, &indicator_measure(&f)).unwrap();
        for x in 0..8 {
            let total: f64 = (0..2).map(|y| t.weight(y, x)).sum();
            assert_eq!(total, 1.0);
        }
    }

    #[test]
    fn graded_measure_matches_distance_form() {
        let labels: Vec<String> = ["0", "1", "2"].map(String::from).to_vec();
        let m = AccuracyMeasure::graded(labels).unwrap();
        for y in 0..3i64 {
            for d in 0..3i64 {
                assert_eq!(m.score(y as usize, d as usize), 2.0 - (y - d).abs() as f64);
            }
        }
    }

    #[test]
    fn alphabet_mismatch_rejected() {
        let f = FunctionTable::xor(2).unwrap();
        let labels: Vec<String> = ["0", "1", "2"].map(String::from).to_vec();
        let w = AccuracyMeasure::indicator(labels).unwrap();
        assert!(build_weight_tensor(&f, &w).is_err());
    }

    #[test]
    fn json_round_trip_with_measure() {
        let doc = r#"{
            "k": 2,
            "labels": [0, 1],
            "table": {"00": 0, "01": 1, "10": 1, "11": 0},
            "w": [[1.0, 0.0], [0.0, 1.0]]
        }"#;
        let (f, m) = from_json(doc).unwrap();
        assert_eq!(f, FunctionTable::xor(2).unwrap());
        let m = m.unwrap();
        assert_eq!(m, AccuracyMeasure::indicator(f.labels().to_vec()).unwrap());
    }

    #[test]
    fn json_missing_entry_rejected() {
        let doc = r#"{"k": 1, "labels": ["a"], "table": {"0": "a"}}"#;
        assert!(from_json(doc).is_err());
        let doc = r#"{"k": 1, "labels": ["a"], "table": {"0": "a", "1": "b"}}"#;
        assert!(from_json(doc).is_err());
    }
}
