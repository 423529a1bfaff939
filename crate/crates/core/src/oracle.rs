//! Brute-force and sampling oracles.
//!
//! Nothing here trusts the optimizers: the brute-force search enumerates
//! every deterministic decision rule, and the sampler draws random feasible
//! protocols to compare against randomized response. Both exist to catch
//! the main solvers being wrong, so they share as little code with them as
//! possible.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bits;
use crate::decision::{
    accuracy, optimal_average_decision, optimal_worstcase_decision, Mode,
};
use crate::function::{AccuracyMeasure, FunctionTable, WeightTensor};
use crate::geometry::{extremal_signatures, kronecker_corner_solve, Signature};
use crate::protocol::{
    check_dp, column_tensor, randomized_response, rank1_factorize, PrivacyBudget, Protocol,
};
use crate::{function, Error, Result};

/// Enumeration ceiling for [`brute_force_average_optimum`].
pub const ENUMERATION_BUDGET: f64 = 1e7;

/// Max average accuracy over every deterministic decision rule, found by
/// exhaustive enumeration.
pub fn brute_force_average_optimum(p: &Protocol, weights: &WeightTensor) -> Result<f64> {
    if p.k() != weights.k() {
        return Err(Error::config("protocol and weight party counts differ"));
    }
    let nt = p.transcript_count();
    let ny = weights.label_count();
    if (ny as f64).powi(nt as i32) > ENUMERATION_BUDGET {
        return Err(Error::Precondition(format!(
            "{ny}^{nt} deterministic rules exceed the enumeration budget"
        )));
    }
    let n = bits::domain_size(p.k());
    // score[t][y] = sum_x P(t|x) w(y, f(x)); a rule's value is the mean of
    // its per-transcript picks.
    let score: Vec<Vec<f64>> = (0..nt)
        .map(|t| {
            (0..ny)
                .map(|y| (0..n).map(|x| p.prob(x, t) * weights.weight(y, x)).sum())
                .collect()
        })
        .collect();
    let mut digits = vec![0usize; nt];
    let mut best = f64::NEG_INFINITY;
    'all: loop {
        let total: f64 = (0..nt).map(|t| score[t][digits[t]]).sum();
        best = best.max(total);
        let mut t = 0;
        loop {
            if t == nt {
                break 'all;
            }
            digits[t] += 1;
            if digits[t] < ny {
                break;
            }
            digits[t] = 0;
            t += 1;
        }
    }
    Ok(best / n as f64)
}

/// A feasible protocol remembered together with the signature and mass of
/// every column, plus the seed that produced it.
#[derive(Debug, Clone)]
pub struct SampledProtocol {
    protocol: Protocol,
    signatures: Vec<Signature>,
    weights: Vec<f64>,
    seed: u64,
}

impl SampledProtocol {
    pub fn new(
        protocol: Protocol,
        signatures: Vec<Signature>,
        weights: Vec<f64>,
        seed: u64,
        budget: &PrivacyBudget,
    ) -> Result<Self> {
        if signatures.len() != protocol.transcript_count()
            || weights.len() != signatures.len()
        {
            return Err(Error::config("one signature and mass per column required"));
        }
        if weights.iter().any(|&w| !w.is_finite() || w < 0.0) {
            return Err(Error::config("column masses must be nonnegative"));
        }
        for (j, (sig, &mass)) in signatures.iter().zip(&weights).enumerate() {
            for (x, &sv) in sig.vectorized().iter().enumerate() {
                if (protocol.prob(x, j) - mass * sv).abs() > 1e-9 {
                    return Err(Error::config(format!(
                        "column {j} does not match its signature"
                    )));
                }
            }
        }
        let report = check_dp(&protocol, budget)?;
        if !report.pass {
            return Err(Error::config("sampled protocol violates the budget"));
        }
        for id in protocol.transcripts() {
            let tensor = column_tensor(&protocol, id)?;
            let outcome = rank1_factorize(&tensor, 1e-9);
            if let Some((_, s)) = outcome.factors() {
                Signature::new(s.to_vec(), budget)?;
            } else {
                return Err(Error::config(format!("column {id} is not rank-1 in the box")));
            }
        }
        Ok(SampledProtocol {
            protocol,
            signatures,
            weights,
            seed,
        })
    }

    pub fn protocol(&self) -> &Protocol {
        &self.protocol
    }

    pub fn signatures(&self) -> &[Signature] {
        &self.signatures
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// Draws a random feasible protocol with `m` columns: `m - 2^k` interior
/// signatures sampled log-uniformly in the box with small random masses,
/// completed to row-stochasticity by corner columns. Attempts whose corner
/// completion needs negative mass are rejected and redrawn from the same
/// stream; the draw is deterministic per seed.
pub fn sample_feasible_protocol(
    budget: &PrivacyBudget,
    m: usize,
    seed: u64,
) -> Result<SampledProtocol> {
    let k = budget.k();
    let n = bits::domain_size(k);
    if m < n {
        return Err(Error::config(format!("need at least {n} columns, got {m}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let degenerate = budget.degenerate_parties();
    let nd: Vec<usize> = (0..k).filter(|i| !degenerate.contains(i)).collect();
    let nd_lambdas: Vec<f64> = nd.iter().map(|&i| budget.lambda(i)).collect();
    let dup = 1usize << degenerate.len();
    // Interior masses scale with the smallest corner mass of randomized
    // response, which keeps most draws feasible without pinning them to it.
    let base: f64 = (0..k).map(|i| 1.0 / (1.0 + budget.lambda(i))).product();
    let corners = extremal_signatures(budget);

    for _attempt in 0..1000 {
        let mut interior: Vec<(Signature, f64)> = Vec::with_capacity(m - n);
        for _ in 0..m - n {
            let s: Vec<f64> = (0..k)
                .map(|i| {
                    if degenerate.contains(&i) {
                        1.0
                    } else {
                        let half = budget.lambda(i).ln();
                        ((2.0 * rng.random::<f64>() - 1.0) * half).exp()
                    }
                })
                .collect();
            let mass = rng.random::<f64>() * base;
            interior.push((Signature::new(s, budget)?, mass));
        }
        let mut residual = vec![1.0; n];
        for (sig, mass) in &interior {
            for (x, &sv) in sig.vectorized().iter().enumerate() {
                residual[x] -= mass * sv;
            }
        }
        // The residual is constant along degenerate axes; solve on the
        // subcube where those bits are zero.
        let reduced: Vec<f64> = (0..bits::domain_size(nd.len()))
            .map(|r| {
                let mut x = 0usize;
                for (j, &axis) in nd.iter().enumerate() {
                    if bits::bit(r, j, nd.len()) {
                        x |= 1 << (k - 1 - axis);
                    }
                }
                residual[x]
            })
            .collect();
        let alpha = if nd.is_empty() {
            vec![reduced[0]]
        } else {
            kronecker_corner_solve(&reduced, &nd_lambdas)
        };
        if alpha.iter().any(|&a| a < 0.0) {
            continue;
        }

        let mut signatures = Vec::with_capacity(m);
        let mut masses = Vec::with_capacity(m);
        let mut ids = Vec::with_capacity(m);
        for a in 0..n {
            let mut r = 0usize;
            for (j, &axis) in nd.iter().enumerate() {
                if bits::bit(a, axis, k) {
                    r |= 1 << (nd.len() - 1 - j);
                }
            }
            signatures.push(corners.corner(a).clone());
            masses.push(alpha[r] / dup as f64);
            ids.push(format!("c{a}"));
        }
        for (j, (sig, mass)) in interior.into_iter().enumerate() {
            signatures.push(sig);
            masses.push(mass);
            ids.push(format!("i{j}"));
        }
        let mut rows = vec![Vec::with_capacity(m); n];
        for (sig, &mass) in signatures.iter().zip(&masses) {
            for (x, &sv) in sig.vectorized().iter().enumerate() {
                rows[x].push(mass * sv);
            }
        }
        for row in rows.iter_mut() {
            let sum: f64 = row.iter().sum();
            for v in row.iter_mut() {
                *v /= sum;
            }
        }
        let protocol = Protocol::new(k, ids, rows)?;
        return SampledProtocol::new(protocol, signatures, masses, seed, budget);
    }
    Err(Error::Sampling(
        "1000 consecutive corner completions were infeasible".into(),
    ))
}

/// Accuracy of randomized response minus the sampled protocol's, both under
/// their own optimal rules. Nonnegative whenever randomized response is
/// optimal.
pub fn optimality_gap(
    sp: &SampledProtocol,
    weights: &WeightTensor,
    budget: &PrivacyBudget,
    mode: Mode,
) -> Result<f64> {
    let rr = randomized_response(budget);
    let best = |p: &Protocol| -> Result<f64> {
        let rule = match mode {
            Mode::Average => optimal_average_decision(p, weights, None)?,
            Mode::WorstCase => optimal_worstcase_decision(p, weights, None)?,
        };
        Ok(accuracy(p, &rule, weights, mode)?.value)
    };
    Ok(best(&rr)? - best(sp.protocol())?)
}

/// Function named in a manifest: a built-in name or an explicit table.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FunctionSpec {
    Named(String),
    Table { labels: Vec<String>, table: Vec<usize> },
}

impl FunctionSpec {
    pub fn resolve(&self, k: usize) -> Result<FunctionTable> {
        let fixed_k = |name: &str, want: usize, f: FunctionTable| {
            if k == want {
                Ok(f)
            } else {
                Err(Error::config(format!("{name} requires k={want}, got {k}")))
            }
        };
        match self {
            FunctionSpec::Named(name) => match name.as_str() {
                "xor" => FunctionTable::xor(k),
                "and" => FunctionTable::and(k),
                "selector" => fixed_k("selector", 3, crate::multibit::selector_function()),
                "hamming" => fixed_k("hamming", 4, crate::multibit::hamming_distance_function()),
                other => Err(Error::lookup(format!("unknown function {other:?}"))),
            },
            FunctionSpec::Table { labels, table } => {
                FunctionTable::new(k, labels.clone(), table.clone())
            }
        }
    }
}

/// Accuracy measure named in a manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MeasureSpec {
    Named(String),
    Matrix { labels: Vec<String>, w: Vec<Vec<f64>> },
}

impl MeasureSpec {
    pub fn resolve(&self, labels: &[String]) -> Result<AccuracyMeasure> {
        match self {
            MeasureSpec::Named(name) => match name.as_str() {
                "indicator" => AccuracyMeasure::indicator(labels.to_vec()),
                "graded" => AccuracyMeasure::graded(labels.to_vec()),
                other => Err(Error::lookup(format!("unknown measure {other:?}"))),
            },
            MeasureSpec::Matrix { labels, w } => {
                AccuracyMeasure::new(labels.clone(), w.clone())
            }
        }
    }
}

/// Everything needed to reproduce one sampling run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentManifest {
    pub k: usize,
    pub lambdas: Vec<f64>,
    pub function: FunctionSpec,
    pub measure: MeasureSpec,
    pub mode: String,
    pub samples: usize,
    pub seed: u64,
}

impl ExperimentManifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serialization")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("manifest: {e}")))
    }
}

/// Columns the sampler uses when a manifest does not pin one: all corners
/// plus two interior signatures.
pub fn default_column_count(k: usize) -> usize {
    bits::domain_size(k) + 2
}

/// Runs the manifest: per-sample seeds derive from the manifest seed by
/// offset, so runs are reproducible and samples are independent.
pub fn run_experiment(man: &ExperimentManifest) -> Result<Vec<f64>> {
    let budget = PrivacyBudget::new(man.lambdas.clone())?;
    if budget.k() != man.k {
        return Err(Error::config(format!(
            "manifest k={} but {} budgets given",
            man.k,
            budget.k()
        )));
    }
    let f = man.function.resolve(man.k)?;
    let measure = man.measure.resolve(f.labels())?;
    let weights = function::build_weight_tensor(&f, &measure)?;
    let mode: Mode = man.mode.parse()?;
    let m = default_column_count(man.k);
    (0..man.samples)
        .map(|i| {
            let sp = sample_feasible_protocol(&budget, m, man.seed.wrapping_add(i as u64))?;
            optimality_gap(&sp, &weights, &budget, mode)
        })
        .collect()
}

/// One row per sample, suitable for appending across runs.
pub fn gaps_to_csv(gaps: &[f64]) -> String {
    let mut out = String::from("sample,gap\n");
    for (i, g) in gaps.iter().enumerate() {
        out.push_str(&format!("{i},{g}\n"));
    }
    out
}
