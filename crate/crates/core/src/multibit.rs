//! Interactive two-round protocols for parties holding several bits.
//!
//! With one bit per party, adaptivity buys nothing; with several, it does.
//! The two counterexamples here let party 1 publish a privatized view
//! first, after which party 2 chooses what to randomize based on it. Both
//! beat plain per-bit randomized response on the right functions.

use crate::bits;
use crate::decision::{accuracy, optimal_average_decision, optimal_worstcase_decision, Mode};
use crate::function::{build_weight_tensor, AccuracyMeasure, FunctionTable, WeightTensor};
use crate::protocol::Protocol;
use crate::{Error, Result};

/// A first-round channel for party 1 and a family of second-round channels
/// for party 2, one per first-round message, plus the induced one-shot
/// protocol over joint transcripts.
#[derive(Debug, Clone)]
pub struct TwoRoundProtocol {
    first_round: Vec<Vec<f64>>,
    second_round: Vec<Vec<Vec<f64>>>,
    induced: Protocol,
}

impl TwoRoundProtocol {
    /// `first_round[u][m]`: probability party 1 publishes `m` on input `u`.
    pub fn first_round(&self) -> &[Vec<f64>] {
        &self.first_round
    }

    /// `second_round[m][v][z]`: probability party 2 publishes `z` on input
    /// `v` after seeing `m`.
    pub fn second_round(&self) -> &[Vec<Vec<f64>>] {
        &self.second_round
    }

    pub fn induced(&self) -> &Protocol {
        &self.induced
    }
}

fn rr_bit(lambda: f64, kept: bool) -> f64 {
    if kept {
        lambda / (1.0 + lambda)
    } else {
        1.0 / (1.0 + lambda)
    }
}

/// Truth table of the selector: party 1's bit picks whether the answer is
/// the XOR or the AND of party 2's two bits. Input bits are (x, y1, y2).
pub fn selector_function() -> FunctionTable {
    let labels = vec!["0".to_string(), "1".to_string()];
    FunctionTable::from_fn(3, labels, |x| {
        let (s, y1, y2) = (x >> 2 & 1, x >> 1 & 1, x & 1);
        if s == 0 {
            y1 ^ y2
        } else {
            y1 & y2
        }
    })
    .expect("fixed table")
}

/// Two-round protocol for the selector: party 1 randomizes its bit, party 2
/// evaluates the branch chosen by the *published* bit and randomizes the
/// one-bit result. Flipping either of party 2's bits flips that result at
/// most once, so each bit is protected at the same level.
pub fn selector_interactive_protocol(lambda: f64) -> TwoRoundProtocol {
    let first: Vec<Vec<f64>> = (0..2)
        .map(|x| (0..2).map(|m| rr_bit(lambda, m == x)).collect())
        .collect();
    let branch = |m: usize, v: usize| -> usize {
        let (y1, y2) = (v >> 1 & 1, v & 1);
        if m == 0 {
            y1 ^ y2
        } else {
            y1 & y2
        }
    };
    let second: Vec<Vec<Vec<f64>>> = (0..2)
        .map(|m| {
            (0..4)
                .map(|v| (0..2).map(|z| rr_bit(lambda, z == branch(m, v))).collect())
                .collect()
        })
        .collect();
    let transcripts = (0..4).map(|t| bits::bitstring(t, 2)).collect();
    let rows = (0..8)
        .map(|x| {
            let (s, v) = (x >> 2, x & 3);
            (0..4)
                .map(|t| {
                    let (m, z) = (t >> 1, t & 1);
                    first[s][m] * second[m][v][z]
                })
                .collect()
        })
        .collect();
    let induced = Protocol::new(3, transcripts, rows).expect("stochastic by construction");
    TwoRoundProtocol {
        first_round: first,
        second_round: second,
        induced,
    }
}

/// Truth table of the two-bit Hamming distance between the parties' pairs.
/// Input bits are (x1, x2, y1, y2); labels are the distances 0, 1, 2.
pub fn hamming_distance_function() -> FunctionTable {
    let labels = vec!["0".to_string(), "1".to_string(), "2".to_string()];
    FunctionTable::from_fn(4, labels, |x| {
        bits::weight((x >> 2) ^ (x & 3)) as usize
    })
    .expect("fixed table")
}

/// Accuracy measure for distance estimates: two points minus how far off
/// the estimate is.
pub fn hamming_measure() -> AccuracyMeasure {
    AccuracyMeasure::graded(vec!["0".into(), "1".into(), "2".into()]).expect("numeric labels")
}

/// Two-round protocol for the Hamming distance: party 1 randomizes both
/// bits; party 2 publishes a three-letter estimate whose distribution
/// depends on its pair only through the distance to the published pair.
pub fn hamming_interactive_protocol(lambda: f64) -> Result<TwoRoundProtocol> {
    if lambda < 1.0 {
        return Err(Error::config(format!("budget ratio {lambda} is below 1")));
    }
    let first: Vec<Vec<f64>> = (0..4)
        .map(|u: usize| {
            (0..4)
                .map(|m: usize| {
                    let agree = !(u ^ m) & 3;
                    rr_bit(lambda, agree & 2 != 0) * rr_bit(lambda, agree & 1 != 0)
                })
                .collect()
        })
        .collect();
    let den = lambda * (1.0 + lambda);
    let by_distance = [
        vec![lambda * lambda / den, (lambda - 1.0) / den, 1.0 / den],
        vec![lambda / den, (lambda * lambda - lambda) / den, lambda / den],
        vec![1.0 / den, (lambda - 1.0) / den, lambda * lambda / den],
    ];
    let second: Vec<Vec<Vec<f64>>> = (0..4)
        .map(|m: usize| {
            (0..4)
                .map(|v: usize| by_distance[bits::weight(m ^ v) as usize].clone())
                .collect()
        })
        .collect();
    let transcripts = (0..4)
        .flat_map(|m| (0..3).map(move |z| format!("{}{z}", bits::bitstring(m, 2))))
        .collect();
    let rows = (0..16)
        .map(|x| {
            let (u, v) = (x >> 2, x & 3);
            (0..12)
                .map(|t| first[u][t / 3] * second[t / 3][v][t % 3])
                .collect()
        })
        .collect();
    let induced = Protocol::new(4, transcripts, rows)?;
    Ok(TwoRoundProtocol {
        first_round: first,
        second_round: second,
        induced,
    })
}

/// One comparison point: accuracies of two protocols at the same budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveRow {
    pub eps: f64,
    pub acc_a: f64,
    pub acc_b: f64,
}

/// Evaluates two protocol families over an epsilon grid, each under its own
/// optimal decision rule for the given mode.
pub fn compare_curves<A, B>(
    protocol_a: A,
    protocol_b: B,
    f: &FunctionTable,
    measure: &AccuracyMeasure,
    grid: &[f64],
    mode: Mode,
) -> Result<Vec<CurveRow>>
where
    A: Fn(f64) -> Result<Protocol>,
    B: Fn(f64) -> Result<Protocol>,
{
    if grid.is_empty() {
        return Err(Error::config("empty epsilon grid"));
    }
    let weights = build_weight_tensor(f, measure)?;
    let best = |p: &Protocol, w: &WeightTensor| -> Result<f64> {
        let rule = match mode {
            Mode::Average => optimal_average_decision(p, w, None)?,
            Mode::WorstCase => optimal_worstcase_decision(p, w, None)?,
        };
        Ok(accuracy(p, &rule, w, mode)?.value)
    };
    grid.iter()
        .map(|&eps| {
            let lambda = eps.exp();
            Ok(CurveRow {
                eps,
                acc_a: best(&protocol_a(lambda)?, &weights)?,
                acc_b: best(&protocol_b(lambda)?, &weights)?,
            })
        })
        .collect()
}

/// Plot-ready rows, interactive curve first.
pub fn curves_to_csv(rows: &[CurveRow]) -> String {
    let mut out = String::from("epsilon,acc_interactive,acc_rr\n");
    for r in rows {
        out.push_str(&format!("{},{},{}\n", r.eps, r.acc_a, r.acc_b));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::function::indicator_measure;
    use crate::oracle::brute_force_average_optimum;
    use crate::protocol::{
        check_dp, column_tensor, randomized_response, rank1_factorize, PrivacyBudget,
        Rank1Outcome,
    };

    fn blind_optimum(weights: &WeightTensor) -> f64 {
        let k = weights.k();
        let blind = Protocol::new(
            k,
            vec!["t".into()],
            vec![vec![1.0]; bits::domain_size(k)],
        )
        .unwrap();
        brute_force_average_optimum(&blind, weights).unwrap()
    }

    #[test]
    fn selector_truth_table() {
        let f = selector_function();
        assert_eq!(f.label(0b011), "0");
        assert_eq!(f.label(0b111), "1");
        assert_eq!(f.label(0b001), "1");
        assert_eq!(f.label(0b101), "0");
        let w = build_weight_tensor(&f, &indicator_measure(&f)).unwrap();
        assert!((blind_optimum(&w) - 0.625).abs() < 1e-15);
    }

    #[test]
    fn selector_protocol_is_private_per_bit() {
        for lambda in [1.0, 2.0, 5.0] {
            let p = selector_interactive_protocol(lambda);
            let budget = PrivacyBudget::homogeneous(3, lambda).unwrap();
            let report = check_dp(p.induced(), &budget).unwrap();
            assert!(report.pass, "lambda={lambda}: {report:?}");
        }
    }

    #[test]
    fn selector_endpoints() {
        let f = selector_function();
        let w = build_weight_tensor(&f, &indicator_measure(&f)).unwrap();
        let p = selector_interactive_protocol(1.0);
        let rule = optimal_average_decision(p.induced(), &w, None).unwrap();
        let acc = accuracy(p.induced(), &rule, &w, Mode::Average).unwrap().value;
        assert!((acc - 0.625).abs() < 1e-12);

        let p = selector_interactive_protocol(10f64.exp());
        let rule = optimal_average_decision(p.induced(), &w, None).unwrap();
        let acc = accuracy(p.induced(), &rule, &w, Mode::Average).unwrap().value;
        assert!(acc > 0.999);
    }

    #[test]
    fn selector_beats_per_bit_randomization() {
        let f = selector_function();
        let m = indicator_measure(&f);
        let grid: Vec<f64> = (0..8).map(|i| 0.5 * f64::from(i)).collect();
        let rows = compare_curves(
            |l| Ok(selector_interactive_protocol(l).induced().clone()),
            |l| Ok(randomized_response(&PrivacyBudget::homogeneous(3, l)?)),
            &f,
            &m,
            &grid,
            Mode::Average,
        )
        .unwrap();
        let mut strict = 0.0f64;
        for r in &rows {
            assert!(r.acc_a >= r.acc_b - 1e-9, "eps={}", r.eps);
            strict = strict.max(r.acc_a - r.acc_b);
        }
        assert!(strict > 1e-9, "interactivity never helped: {strict}");
    }

    #[test]
    fn selector_columns_split_by_round_not_by_bit() {
        let p = selector_interactive_protocol(2.0);
        // Across the x-vs-(y1,y2) bipartition every column factorizes: the
        // x-dependence is the first-round factor alone.
        for t in 0..4 {
            let ratio = p.induced().prob(0, t) / p.induced().prob(4, t);
            for v in 1..4 {
                let r = p.induced().prob(v, t) / p.induced().prob(4 + v, t);
                assert!((r - ratio).abs() < 1e-9);
            }
        }
        // As a full order-3 tensor, the AND-branch column is not rank-1.
        let ids: Vec<String> = p.induced().transcripts().to_vec();
        let mut non_rank1 = 0;
        for id in &ids {
            let tensor = column_tensor(p.induced(), id).unwrap();
            if matches!(rank1_factorize(&tensor, 1e-9), Rank1Outcome::NotRank1) {
                non_rank1 += 1;
            }
        }
        assert!(non_rank1 > 0);
    }

    #[test]
    fn hamming_tables_match_distances() {
        let p = hamming_interactive_protocol(2.0).unwrap();
        // Distance-zero row opens with lambda/(1+lambda).
        assert!((p.second_round()[0][0][0] - 2.0 / 3.0).abs() < 1e-15);
        for lambda in [1.0, 1.7, 3.0, 8.5] {
            let p = hamming_interactive_protocol(lambda).unwrap();
            for m in 0..4 {
                for v in 0..4 {
                    let row = &p.second_round()[m][v];
                    let sum: f64 = row.iter().sum();
                    assert!((sum - 1.0).abs() < 1e-12);
                    assert!(row.iter().all(|&q| q >= 0.0));
                }
                // Adjacent inputs (one bit apart) stay within ratio lambda.
                for v in 0..4usize {
                    for bit in [1usize, 2] {
                        let a = &p.second_round()[m][v];
                        let b = &p.second_round()[m][v ^ bit];
                        for z in 0..3 {
                            assert!(a[z] <= lambda * b[z] + 1e-12);
                        }
                    }
                }
            }
        }
        assert!(hamming_interactive_protocol(0.9).is_err());
    }

    #[test]
    fn hamming_protocol_is_private_per_bit() {
        for lambda in [1.0, 2.0, 4.0] {
            let p = hamming_interactive_protocol(lambda).unwrap();
            let budget = PrivacyBudget::homogeneous(4, lambda).unwrap();
            assert!(check_dp(p.induced(), &budget).unwrap().pass);
        }
    }

    #[test]
    fn hamming_blind_point_and_dominance() {
        let f = hamming_distance_function();
        let m = hamming_measure();
        let w = build_weight_tensor(&f, &m).unwrap();
        assert!((blind_optimum(&w) - 1.5).abs() < 1e-12);
        let grid = [0.0, 0.8, 1.6, 2.4];
        let rows = compare_curves(
            |l| Ok(hamming_interactive_protocol(l)?.induced().clone()),
            |l| Ok(randomized_response(&PrivacyBudget::homogeneous(4, l)?)),
            &f,
            &m,
            &grid,
            Mode::Average,
        )
        .unwrap();
        assert!((rows[0].acc_a - rows[0].acc_b).abs() < 1e-9);
        assert!((rows[0].acc_a - 1.5).abs() < 1e-9);
        for r in &rows {
            assert!(r.acc_a >= r.acc_b - 1e-9, "eps={}", r.eps);
        }
    }

    #[test]
    fn curve_csv_shape() {
        let f = selector_function();
        let m = indicator_measure(&f);
        let rows = compare_curves(
            |l| Ok(selector_interactive_protocol(l).induced().clone()),
            |l| Ok(randomized_response(&PrivacyBudget::homogeneous(3, l)?)),
            &f,
            &m,
            &[0.0, 10.0],
            Mode::Average,
        )
        .unwrap();
        assert!((rows[0].acc_a - 0.625).abs() < 1e-12);
        assert!((rows[0].acc_b - 0.625).abs() < 1e-12);
        assert!(rows[1].acc_a > 0.999 && rows[1].acc_b > 0.999);
        let csv = curves_to_csv(&rows);
        assert!(csv.starts_with("epsilon,acc_interactive,acc_rr\n"));
        assert_eq!(csv.lines().count(), 3);
        assert!(compare_curves(
            |l| Ok(selector_interactive_protocol(l).induced().clone()),
            |l| Ok(randomized_response(&PrivacyBudget::homogeneous(3, l)?)),
            &f,
            &m,
            &[],
            Mode::Average,
        )
        .is_err());
    }
}
