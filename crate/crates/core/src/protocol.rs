//! Protocol matrices, randomized response, and validation.
//!
//! A protocol over `k` single-bit parties is a row-stochastic matrix
//! `P[x][t] = P(transcript t | inputs x)`. Per-party privacy at level
//! `lambda_i` bounds the ratio of transcript probabilities when party `i`
//! flips its bit and everything else stays fixed. Randomized response is the
//! protocol in which each party independently keeps its bit with probability
//! `lambda_i / (1 + lambda_i)` and publishes the flip otherwise.

use serde::{Deserialize, Serialize};

use crate::bits;
use crate::{Error, Result, ROW_SUM_TOL, VALIDATION_TOL};

/// Budgets below `1 + DEGENERATE_TOL` are treated as fully private.
pub const DEGENERATE_TOL: f64 = 1e-12;

/// Per-party privacy levels `lambda_i = exp(eps_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrivacyBudget {
    lambdas: Vec<f64>,
}

impl PrivacyBudget {
    pub fn new(lambdas: Vec<f64>) -> Result<Self> {
        bits::check_party_count(lambdas.len())?;
        for (i, &l) in lambdas.iter().enumerate() {
            if !l.is_finite() || l < 1.0 {
                return Err(Error::config(format!(
                    "lambda_{} = {l} is not a finite value >= 1",
                    i + 1
                )));
            }
        }
        Ok(PrivacyBudget { lambdas })
    }

    pub fn homogeneous(k: usize, lambda: f64) -> Result<Self> {
        PrivacyBudget::new(vec![lambda; k])
    }

    pub fn from_epsilons(eps: &[f64]) -> Result<Self> {
        for (i, &e) in eps.iter().enumerate() {
            if !e.is_finite() || e < 0.0 {
                return Err(Error::config(format!(
                    "eps_{} = {e} is not a finite value >= 0",
                    i + 1
                )));
            }
        }
        PrivacyBudget::new(eps.iter().map(|e| e.exp()).collect())
    }

    pub fn k(&self) -> usize {
        self.lambdas.len()
    }

    pub fn lambda(&self, i: usize) -> f64 {
        self.lambdas[i]
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn epsilons(&self) -> Vec<f64> {
        self.lambdas.iter().map(|l| l.ln()).collect()
    }

    /// Parties whose level is 1 within [`DEGENERATE_TOL`]; their bits are
    /// perfectly hidden.
    pub fn degenerate_parties(&self) -> Vec<usize> {
        (0..self.k())
            .filter(|&i| self.lambdas[i] <= 1.0 + DEGENERATE_TOL)
            .collect()
    }

    pub fn is_degenerate(&self) -> bool {
        !self.degenerate_parties().is_empty()
    }
}

/// Row-stochastic transcript distribution per input assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct Protocol {
    k: usize,
    transcripts: Vec<String>,
    /// `rows[x][t]`.
    rows: Vec<Vec<f64>>,
}

impl Protocol {
    pub fn new(k: usize, transcripts: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        bits::check_party_count(k)?;
        if transcripts.is_empty() {
            return Err(Error::config("protocol has no transcripts"));
        }
        for id in &transcripts {
            if id.is_empty() || id.contains([',', '"', '\n', '\r']) {
                return Err(Error::config(format!("transcript id {id:?} is not plain text")));
            }
        }
        let mut unique = transcripts.clone();
        unique.sort();
        unique.dedup();
        if unique.len() != transcripts.len() {
            return Err(Error::config("duplicate transcript ids"));
        }
        if rows.len() != bits::domain_size(k) {
            return Err(Error::config(format!(
                "{} rows for k={k}, expected {}",
                rows.len(),
                bits::domain_size(k)
            )));
        }
        for (x, row) in rows.iter().enumerate() {
            if row.len() != transcripts.len() {
                return Err(Error::config(format!(
                    "row {x} has {} entries, expected {}",
                    row.len(),
                    transcripts.len()
                )));
            }
            if row.iter().any(|&v| !v.is_finite() || v < 0.0) {
                return Err(Error::config(format!("row {x} has a negative or non-finite entry")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::config(format!("row {x} sums to {sum}, expected 1")));
            }
        }
        Ok(Protocol { k, transcripts, rows })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn transcripts(&self) -> &[String] {
        &self.transcripts
    }

    pub fn transcript_count(&self) -> usize {
        self.transcripts.len()
    }

    pub fn input_count(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.rows[x]
    }

    pub fn prob(&self, x: usize, t: usize) -> f64 {
        self.rows[x][t]
    }

    pub fn column(&self, t: usize) -> Vec<f64> {
        self.rows.iter().map(|row| row[t]).collect()
    }

    pub fn transcript_index(&self, id: &str) -> Result<usize> {
        self.transcripts
            .iter()
            .position(|t| t == id)
            .ok_or_else(|| Error::lookup(format!("transcript {id:?}")))
    }

    /// Same matrix with columns reordered by `perm[new] = old`.
    pub fn permute_columns(&self, perm: &[usize]) -> Result<Protocol> {
        if perm.len() != self.transcript_count() {
            return Err(Error::config("permutation length mismatch"));
        }
        let mut seen = vec![false; perm.len()];
        for &p in perm {
            if p >= perm.len() || seen[p] {
                return Err(Error::config("not a permutation"));
            }
            seen[p] = true;
        }
        let transcripts = perm.iter().map(|&p| self.transcripts[p].clone()).collect();
        let rows = self
            .rows
            .iter()
            .map(|row| perm.iter().map(|&p| row[p]).collect())
            .collect();
        Protocol::new(self.k, transcripts, rows)
    }

    /// CSV rendering: header of transcript ids, one row per input
    /// bit-string, shortest round-trip decimals.
    pub fn to_csv(&self) -> String {
        use std::fmt::Write;
        let mut out = String::from("input");
        for t in &self.transcripts {
            out.push(',');
            out.push_str(t);
        }
        out.push('\n');
        for (x, row) in self.rows.iter().enumerate() {
            out.push_str(&bits::bitstring(x, self.k));
            for v in row {
                write!(out, ",{v}").expect("string write");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty protocol CSV".into()))?;
        let mut fields = header.split(',');
        if fields.next() != Some("input") {
            return Err(Error::Parse("protocol CSV header must start with \"input\"".into()));
        }
        let transcripts: Vec<String> = fields.map(String::from).collect();
        let body: Vec<&str> = lines.filter(|l| !l.is_empty()).collect();
        let k = (usize::BITS - 1 - body.len().leading_zeros()) as usize;
        if body.is_empty() || bits::domain_size(k) != body.len() {
            return Err(Error::Parse(format!(
                "protocol CSV has {} data rows, expected a power of two",
                body.len()
            )));
        }
        let mut rows = Vec::with_capacity(body.len());
        for (x, line) in body.iter().enumerate() {
            let mut fields = line.split(',');
            let id = fields.next().unwrap_or_default();
            if id != bits::bitstring(x, k) {
                return Err(Error::Parse(format!(
                    "row {x} is labeled {id:?}, expected {:?}",
                    bits::bitstring(x, k)
                )));
            }
            let row: Vec<f64> = fields
                .map(|f| {
                    f.parse::<f64>()
                        .map_err(|_| Error::Parse(format!("bad number {f:?} in row {x}")))
                })
                .collect::<Result<_>>()?;
            rows.push(row);
        }
        Protocol::new(k, transcripts, rows)
    }

    pub fn to_json(&self) -> String {
        let doc = ProtocolDoc {
            k: self.k,
            transcripts: self.transcripts.clone(),
            rows: self.rows.clone(),
        };
        serde_json::to_string(&doc).expect("protocol serialization")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ProtocolDoc =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("protocol document: {e}")))?;
        Protocol::new(doc.k, doc.transcripts, doc.rows)
    }
}

#[derive(Serialize, Deserialize)]
struct ProtocolDoc {
    k: usize,
    transcripts: Vec<String>,
    rows: Vec<Vec<f64>>,
}

/// One protocol column reshaped as an order-`k` tensor over `{0,1}^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnTensor {
    k: usize,
    /// `data[x]` under the global indexing convention.
    data: Vec<f64>,
}

impl ColumnTensor {
    pub fn new(k: usize, data: Vec<f64>) -> Result<Self> {
        bits::check_party_count(k)?;
        if data.len() != bits::domain_size(k) {
            return Err(Error::config(format!(
                "{} entries for k={k}, expected {}",
                data.len(),
                bits::domain_size(k)
            )));
        }
        if data.iter().any(|&v| !v.is_finite() || v < 0.0) {
            return Err(Error::config("column tensor entries must be finite and >= 0"));
        }
        Ok(ColumnTensor { k, data })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn entry(&self, x: usize) -> f64 {
        self.data[x]
    }
}

/// The independent bit-flipping protocol at the given budget.
pub fn randomized_response(budget: &PrivacyBudget) -> Protocol {
    let k = budget.k();
    let n = bits::domain_size(k);
    let stay: Vec<f64> = budget.lambdas().iter().map(|l| l / (1.0 + l)).collect();
    let flip: Vec<f64> = budget.lambdas().iter().map(|l| 1.0 / (1.0 + l)).collect();
    let transcripts = (0..n).map(|t| bits::bitstring(t, k)).collect();
    let rows = (0..n)
        .map(|x| {
            (0..n)
                .map(|t| {
                    (0..k)
                        .map(|i| {
                            if bits::bit(x, i, k) == bits::bit(t, i, k) {
                                stay[i]
                            } else {
                                flip[i]
                            }
                        })
                        .product()
                })
                .collect()
        })
        .collect();
    Protocol::new(k, transcripts, rows).expect("randomized response is row-stochastic")
}

/// Worst transcript-probability ratio for one party, and the verdict.
#[derive(Debug, Clone, PartialEq)]
pub struct DpPartyReport {
    pub max_ratio: f64,
    pub pass: bool,
}

/// Outcome of [`check_dp`]; `pass` is the conjunction over parties.
#[derive(Debug, Clone, PartialEq)]
pub struct DpReport {
    pub parties: Vec<DpPartyReport>,
    pub pass: bool,
}

/// Checks every per-party likelihood ratio against the budget, with
/// tolerance `tol` on the comparison. Ratios `0/0` count as 1; a positive
/// numerator over a zero denominator is an infinite ratio.
pub fn check_dp_with_tol(p: &Protocol, budget: &PrivacyBudget, tol: f64) -> Result<DpReport> {
    if budget.k() != p.k() {
        return Err(Error::config(format!(
            "budget has {} parties, protocol has {}",
            budget.k(),
            p.k()
        )));
    }
    let k = p.k();
    let mut parties = Vec::with_capacity(k);
    for i in 0..k {
        let mut max_ratio: f64 = 1.0;
        for x in 0..p.input_count() {
            if bits::bit(x, i, k) {
                continue;
            }
            let y = bits::flip(x, i, k);
            for t in 0..p.transcript_count() {
                let (a, b) = (p.prob(x, t), p.prob(y, t));
                max_ratio = max_ratio.max(side_ratio(a, b)).max(side_ratio(b, a));
            }
        }
        let pass = max_ratio <= budget.lambda(i) + tol;
        parties.push(DpPartyReport { max_ratio, pass });
    }
    let pass = parties.iter().all(|r| r.pass);
    Ok(DpReport { parties, pass })
}

/// [`check_dp_with_tol`] at the default validation tolerance.
pub fn check_dp(p: &Protocol, budget: &PrivacyBudget) -> Result<DpReport> {
    check_dp_with_tol(p, budget, VALIDATION_TOL)
}

fn side_ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else if num > 0.0 {
        f64::INFINITY
    } else {
        1.0
    }
}

/// Extracts one column as an order-`k` tensor.
pub fn column_tensor(p: &Protocol, transcript: &str) -> Result<ColumnTensor> {
    let t = p.transcript_index(transcript)?;
    ColumnTensor::new(p.k(), p.column(t))
}

/// Result of a rank-1 factorization attempt.
#[derive(Debug, Clone, PartialEq)]
pub enum Rank1Outcome {
    /// Tensor equals `scale * [1,s_1] x ... x [1,s_k]` within tolerance.
    Factors { scale: f64, s: Vec<f64> },
    /// No rank-1 fit within tolerance.
    NotRank1,
    /// All-zero tensor; factorization is meaningless.
    Degenerate,
}

impl Rank1Outcome {
    pub fn factors(&self) -> Option<(f64, &[f64])> {
        match self {
            Rank1Outcome::Factors { scale, s } => Some((*scale, s)),
            _ => None,
        }
    }
}

/// Fits `scale * [1,s_1] x ... x [1,s_k]` to the tensor, normalizing so the
/// all-zeros entry carries the scale: `s_i` is the ratio of the `x_i = 1`
/// slice to the `x_i = 0` slice.
pub fn rank1_factorize(t: &ColumnTensor, tol: f64) -> Rank1Outcome {
    let k = t.k();
    let c = t.entry(0);
    if t.data().iter().all(|&v| v == 0.0) {
        return Rank1Outcome::Degenerate;
    }
    if c == 0.0 {
        // Nonzero tensor but zero reference entry: the normalized form
        // cannot represent it.
        return Rank1Outcome::NotRank1;
    }
    let s: Vec<f64> = (0..k).map(|i| t.entry(bits::flip(0, i, k)) / c).collect();
    for x in 0..t.data().len() {
        let predicted: f64 = c * (0..k)
            .filter(|&i| bits::bit(x, i, k))
            .map(|i| s[i])
            .product::<f64>();
        if (t.entry(x) - predicted).abs() > tol {
            return Rank1Outcome::NotRank1;
        }
    }
    Rank1Outcome::Factors { scale: c, s }
}
