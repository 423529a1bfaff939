//! Decision rules and optimal-accuracy machinery.
//!
//! A decision rule maps transcripts to distributions over output labels,
//! optionally conditioned on the deciding party's own bit. Average accuracy
//! weighs all inputs uniformly; worst-case accuracy takes the minimum over
//! inputs. The optimal average rule is a per-transcript argmax; the optimal
//! worst-case rule solves a small linear program and may randomize.

use serde::{Deserialize, Serialize};

use crate::bits;
use crate::function::WeightTensor;
use crate::lp::{self, LinearProgram, LpStatus};
use crate::protocol::Protocol;
use crate::{Error, Result, ROW_SUM_TOL};

/// Accuracy aggregation over inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Average,
    WorstCase,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Average => "average",
            Mode::WorstCase => "worst-case",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "average" | "ave" => Ok(Mode::Average),
            "worst-case" | "worstcase" | "wc" => Ok(Mode::WorstCase),
            other => Err(Error::config(format!("unknown mode {other:?}"))),
        }
    }
}

/// Row-stochastic map from transcripts to labels, with an optional extra
/// conditioning axis on one party's own bit.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionRule {
    labels: Vec<String>,
    transcripts: Vec<String>,
    /// `matrices[v][t][y]`; a single entry when unconditioned, else one per
    /// value of the conditioning party's bit.
    matrices: Vec<Vec<Vec<f64>>>,
    conditioning: Option<usize>,
}

impl DecisionRule {
    pub fn central(
        labels: Vec<String>,
        transcripts: Vec<String>,
        q: Vec<Vec<f64>>,
    ) -> Result<Self> {
        DecisionRule::build(labels, transcripts, vec![q], None)
    }

    pub fn conditioned(
        labels: Vec<String>,
        transcripts: Vec<String>,
        party: usize,
        q0: Vec<Vec<f64>>,
        q1: Vec<Vec<f64>>,
    ) -> Result<Self> {
        DecisionRule::build(labels, transcripts, vec![q0, q1], Some(party))
    }

    fn build(
        labels: Vec<String>,
        transcripts: Vec<String>,
        matrices: Vec<Vec<Vec<f64>>>,
        conditioning: Option<usize>,
    ) -> Result<Self> {
        if labels.is_empty() || transcripts.is_empty() {
            return Err(Error::config("decision rule needs labels and transcripts"));
        }
        for q in &matrices {
            if q.len() != transcripts.len() {
                return Err(Error::config(format!(
                    "rule has {} rows, expected {}",
                    q.len(),
                    transcripts.len()
                )));
            }
            for (t, row) in q.iter().enumerate() {
                if row.len() != labels.len() {
                    return Err(Error::config(format!(
                        "rule row {t} has {} entries, expected {}",
                        row.len(),
                        labels.len()
                    )));
                }
                if row.iter().any(|&v| !v.is_finite() || v < 0.0) {
                    return Err(Error::config(format!("rule row {t} has a negative entry")));
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > ROW_SUM_TOL {
                    return Err(Error::config(format!("rule row {t} sums to {sum}")));
                }
            }
        }
        Ok(DecisionRule {
            labels,
            transcripts,
            matrices,
            conditioning,
        })
    }

    /// Deterministic rule from per-(condition, transcript) label choices.
    pub fn deterministic(
        labels: Vec<String>,
        transcripts: Vec<String>,
        conditioning: Option<usize>,
        choices: &[Vec<usize>],
    ) -> Result<Self> {
        let matrices = choices
            .iter()
            .map(|per_t| {
                per_t
                    .iter()
                    .map(|&y| {
                        let mut row = vec![0.0; labels.len()];
                        if y >= labels.len() {
                            return Err(Error::config(format!("label index {y} out of range")));
                        }
                        row[y] = 1.0;
                        Ok(row)
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        DecisionRule::build(labels, transcripts, matrices, conditioning)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn transcripts(&self) -> &[String] {
        &self.transcripts
    }

    pub fn conditioning(&self) -> Option<usize> {
        self.conditioning
    }

    /// Matrix for one value of the conditioning bit (0 when unconditioned).
    pub fn matrix(&self, own_bit: usize) -> &Vec<Vec<f64>> {
        match self.conditioning {
            Some(_) => &self.matrices[own_bit],
            None => &self.matrices[0],
        }
    }

    /// `Q(y | t)` given the full input assignment `x` (which fixes the
    /// conditioning bit if any).
    pub fn prob_given_input(&self, x: usize, k: usize, t: usize, y: usize) -> f64 {
        let v = match self.conditioning {
            Some(i) => usize::from(bits::bit(x, i, k)),
            None => 0,
        };
        self.matrices[v][t][y]
    }

    /// CSV rows = transcripts, columns = labels; conditioned rules carry a
    /// leading own-bit column and name the party in the header.
    pub fn to_csv(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        match self.conditioning {
            Some(i) => {
                write!(out, "own_bit[{}]", i + 1).expect("string write");
            }
            None => out.push_str("transcript"),
        }
        if self.conditioning.is_some() {
            out.push_str(",transcript");
        }
        for l in &self.labels {
            out.push(',');
            out.push_str(l);
        }
        out.push('\n');
        for (v, q) in self.matrices.iter().enumerate() {
            for (t, row) in q.iter().enumerate() {
                if self.conditioning.is_some() {
                    write!(out, "{v},").expect("string write");
                }
                out.push_str(&self.transcripts[t]);
                for val in row {
                    write!(out, ",{val}").expect("string write");
                }
                out.push('\n');
            }
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty decision-rule CSV".into()))?;
        let mut fields = header.split(',');
        let first = fields.next().unwrap_or_default();
        let conditioning = if first == "transcript" {
            None
        } else if let Some(body) = first.strip_prefix("own_bit[").and_then(|s| s.strip_suffix(']')) {
            let party: usize = body
                .parse()
                .map_err(|_| Error::Parse(format!("bad own-bit header {first:?}")))?;
            if party == 0 {
                return Err(Error::Parse("party numbers start at 1".into()));
            }
            if fields.next() != Some("transcript") {
                return Err(Error::Parse("expected transcript column after own_bit".into()));
            }
            Some(party - 1)
        } else {
            return Err(Error::Parse(format!("bad decision-rule header {first:?}")));
        };
        let labels: Vec<String> = fields.map(String::from).collect();
        let values = conditioning.map_or(1, |_| 2);
        let mut transcripts = Vec::new();
        let mut matrices = vec![Vec::new(); values];
        for line in lines {
            let mut fields = line.split(',');
            let v = if conditioning.is_some() {
                let tag = fields.next().unwrap_or_default();
                tag.parse::<usize>()
                    .ok()
                    .filter(|&v| v < 2)
                    .ok_or_else(|| Error::Parse(format!("bad own-bit value {tag:?}")))?
            } else {
                0
            };
            let id = fields
                .next()
                .ok_or_else(|| Error::Parse("missing transcript id".into()))?;
            if v == 0 {
                transcripts.push(id.to_string());
            } else if transcripts.get(matrices[v].len()).map(String::as_str) != Some(id) {
                return Err(Error::Parse(format!("transcript {id:?} out of order")));
            }
            let row: Vec<f64> = fields
                .map(|f| {
                    f.parse::<f64>()
                        .map_err(|_| Error::Parse(format!("bad number {f:?}")))
                })
                .collect::<Result<_>>()?;
            matrices[v].push(row);
        }
        DecisionRule::build(labels, transcripts, matrices, conditioning)
    }

    pub fn to_json(&self) -> String {
        let doc = RuleDoc {
            labels: self.labels.clone(),
            transcripts: self.transcripts.clone(),
            conditioning: self.conditioning,
            matrices: self.matrices.clone(),
        };
        serde_json::to_string(&doc).expect("rule serialization")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: RuleDoc = serde_json::from_str(text)
            .map_err(|e| Error::Parse(format!("decision-rule document: {e}")))?;
        if doc.conditioning.is_some() != (doc.matrices.len() == 2) {
            return Err(Error::Parse("conditioning flag and matrix count disagree".into()));
        }
        DecisionRule::build(doc.labels, doc.transcripts, doc.matrices, doc.conditioning)
    }
}

#[derive(Serialize, Deserialize)]
struct RuleDoc {
    labels: Vec<String>,
    transcripts: Vec<String>,
    conditioning: Option<usize>,
    matrices: Vec<Vec<Vec<f64>>>,
}

/// Accuracy of one (protocol, rule, weights) triple.
#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyReport {
    pub value: f64,
    pub kind: Mode,
    /// Minimizing input, worst-case only.
    pub argmin: Option<usize>,
}

fn check_shapes(p: &Protocol, q: &DecisionRule, weights: &WeightTensor) -> Result<()> {
    if p.k() != weights.k() {
        return Err(Error::config(format!(
            "protocol is over {} parties, weights over {}",
            p.k(),
            weights.k()
        )));
    }
    if q.transcripts() != p.transcripts() {
        return Err(Error::config("rule and protocol transcripts differ"));
    }
    if q.labels() != weights.labels() {
        return Err(Error::config("rule and weight alphabets differ"));
    }
    if let Some(i) = q.conditioning() {
        if i >= p.k() {
            return Err(Error::config(format!("conditioning party {} out of range", i + 1)));
        }
    }
    Ok(())
}

/// Expected score of deciding via `q` on input `x`.
fn input_score(p: &Protocol, q: &DecisionRule, weights: &WeightTensor, x: usize) -> f64 {
    let k = p.k();
    (0..p.transcript_count())
        .map(|t| {
            let pt = p.prob(x, t);
            if pt == 0.0 {
                return 0.0;
            }
            let dec: f64 = (0..weights.label_count())
                .map(|y| q.prob_given_input(x, k, t, y) * weights.weight(y, x))
                .sum();
            pt * dec
        })
        .sum()
}

/// Uniform-average accuracy `2^-k sum_x E[w]`.
pub fn acc_average(p: &Protocol, q: &DecisionRule, weights: &WeightTensor) -> Result<AccuracyReport> {
    check_shapes(p, q, weights)?;
    let n = p.input_count();
    let value = (0..n).map(|x| input_score(p, q, weights, x)).sum::<f64>() / n as f64;
    Ok(AccuracyReport {
        value,
        kind: Mode::Average,
        argmin: None,
    })
}

/// Worst-case accuracy `min_x E[w]` with a minimizing input.
pub fn acc_worstcase(
    p: &Protocol,
    q: &DecisionRule,
    weights: &WeightTensor,
) -> Result<AccuracyReport> {
    check_shapes(p, q, weights)?;
    let mut best: Option<(f64, usize)> = None;
    for x in 0..p.input_count() {
        let v = input_score(p, q, weights, x);
        if best.map_or(true, |(cur, _)| v < cur) {
            best = Some((v, x));
        }
    }
    let (value, argmin) = best.expect("protocol has inputs");
    Ok(AccuracyReport {
        value,
        kind: Mode::WorstCase,
        argmin: Some(argmin),
    })
}

/// Accuracy in either mode.
pub fn accuracy(
    p: &Protocol,
    q: &DecisionRule,
    weights: &WeightTensor,
    mode: Mode,
) -> Result<AccuracyReport> {
    match mode {
        Mode::Average => acc_average(p, q, weights),
        Mode::WorstCase => acc_worstcase(p, q, weights),
    }
}

fn conditioning_inputs(k: usize, conditioning: Option<usize>, v: usize) -> Vec<usize> {
    (0..bits::domain_size(k))
        .filter(|&x| match conditioning {
            Some(i) => usize::from(bits::bit(x, i, k)) == v,
            None => true,
        })
        .collect()
}

/// Per-transcript argmax rule maximizing average accuracy; conditioning
/// restricts the inner sum to inputs matching the party's own bit. Ties go
/// to the lowest label index.
pub fn optimal_average_decision(
    p: &Protocol,
    weights: &WeightTensor,
    conditioning: Option<usize>,
) -> Result<DecisionRule> {
    if p.k() != weights.k() {
        return Err(Error::config("protocol and weight party counts differ"));
    }
    if let Some(i) = conditioning {
        if i >= p.k() {
            return Err(Error::config(format!("conditioning party {} out of range", i + 1)));
        }
    }
    let values = conditioning.map_or(1, |_| 2);
    let mut choices = Vec::with_capacity(values);
    for v in 0..values {
        let inputs = conditioning_inputs(p.k(), conditioning, v);
        let per_t = (0..p.transcript_count())
            .map(|t| {
                let mut best = 0usize;
                let mut best_score = f64::NEG_INFINITY;
                for y in 0..weights.label_count() {
                    let score: f64 = inputs
                        .iter()
                        .map(|&x| p.prob(x, t) * weights.weight(y, x))
                        .sum();
                    if score > best_score {
                        best = y;
                        best_score = score;
                    }
                }
                best
            })
            .collect();
        choices.push(per_t);
    }
    DecisionRule::deterministic(
        weights.labels().to_vec(),
        p.transcripts().to_vec(),
        conditioning,
        &choices,
    )
}

/// One max-min LP: maximize `xi` over stochastic `Q` subject to
/// `xi <= sum_t,y P(t|x) W^(y)_x Q(t,y)` for each listed input.
fn worstcase_matrix(
    p: &Protocol,
    weights: &WeightTensor,
    inputs: &[usize],
) -> Result<(Vec<Vec<f64>>, f64)> {
    let nt = p.transcript_count();
    let ny = weights.label_count();
    let vars = 1 + nt * ny;
    let mut a_le = Vec::with_capacity(inputs.len());
    for &x in inputs {
        let mut row = vec![0.0; vars];
        row[0] = 1.0;
        for t in 0..nt {
            for y in 0..ny {
                row[1 + t * ny + y] = -p.prob(x, t) * weights.weight(y, x);
            }
        }
        a_le.push(row);
    }
    let mut a_eq = Vec::with_capacity(nt);
    for t in 0..nt {
        let mut row = vec![0.0; vars];
        for y in 0..ny {
            row[1 + t * ny + y] = 1.0;
        }
        a_eq.push(row);
    }
    let mut objective = vec![0.0; vars];
    objective[0] = 1.0;
    let mut lp = LinearProgram::new(
        objective,
        a_eq,
        vec![1.0; nt],
        a_le,
        vec![0.0; inputs.len()],
    );
    lp.free[0] = true;
    let sol = lp::solve(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Solver {
            message: format!("worst-case decision LP reported {:?}", sol.status),
            last_basis: Vec::new(),
        });
    }
    let mut q = vec![vec![0.0; ny]; nt];
    for t in 0..nt {
        for y in 0..ny {
            // Basic solutions carry harmless roundoff; clamp and renormalize
            // to meet the strict row-sum contract.
            q[t][y] = sol.primal[1 + t * ny + y].max(0.0);
        }
        let sum: f64 = q[t].iter().sum();
        if sum <= 0.0 {
            return Err(Error::Solver {
                message: format!("worst-case decision LP left transcript {t} unassigned"),
                last_basis: Vec::new(),
            });
        }
        for y in 0..ny {
            q[t][y] /= sum;
        }
    }
    Ok((q, sol.objective))
}

/// Possibly randomized rule maximizing worst-case accuracy, via one LP per
/// value of the conditioning bit.
pub fn optimal_worstcase_decision(
    p: &Protocol,
    weights: &WeightTensor,
    conditioning: Option<usize>,
) -> Result<DecisionRule> {
    if p.k() != weights.k() {
        return Err(Error::config("protocol and weight party counts differ"));
    }
    if let Some(i) = conditioning {
        if i >= p.k() {
            return Err(Error::config(format!("conditioning party {} out of range", i + 1)));
        }
    }
    let labels = weights.labels().to_vec();
    let transcripts = p.transcripts().to_vec();
    match conditioning {
        None => {
            let inputs = conditioning_inputs(p.k(), None, 0);
            let (q, _) = worstcase_matrix(p, weights, &inputs)?;
            DecisionRule::central(labels, transcripts, q)
        }
        Some(i) => {
            let (q0, _) = worstcase_matrix(p, weights, &conditioning_inputs(p.k(), Some(i), 0))?;
            let (q1, _) = worstcase_matrix(p, weights, &conditioning_inputs(p.k(), Some(i), 1))?;
            DecisionRule::conditioned(labels, transcripts, i, q0, q1)
        }
    }
}
