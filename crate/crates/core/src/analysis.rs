//! Closed-form accuracies and the hypothesis-testing region calculus.
//!
//! The region of achievable (miss, false-alarm) pairs characterizes a
//! binary-input mechanism up to post-processing: one mechanism can simulate
//! another exactly when its region contains the other's. The privacy
//! constraint itself is such a region (a triangle), randomized response
//! attains it, and therefore randomized response simulates every private
//! mechanism. The closed forms here are the accuracies that fall out of
//! that reduction for XOR and AND.

use crate::decision::DecisionRule;
use crate::{Error, Result};

fn binom(n: usize, r: usize) -> f64 {
    let r = r.min(n - r);
    let mut v = 1.0;
    for j in 0..r {
        v = v * (n - j) as f64 / (j + 1) as f64;
    }
    v
}

/// Best accuracy of the k-party XOR under per-party budget `lambda`:
/// `sum_{2i <= k} C(k,2i) lambda^(k-2i) / (1+lambda)^k`.
pub fn xor_accuracy(k: usize, lambda: f64) -> f64 {
    let mut total = 0.0;
    let mut i = 0;
    while 2 * i <= k {
        total += binom(k, 2 * i) * lambda.powi((k - 2 * i) as i32);
        i += 1;
    }
    total / (1.0 + lambda).powi(k as i32)
}

/// Leading small-budget expansion of [`xor_accuracy`] at `lambda = e^eps`:
/// `1/2 + eps^k / 2^(k+1)`.
pub fn xor_asymptotic_gap(k: usize, eps: f64) -> f64 {
    0.5 + eps.powi(k as i32) / 2f64.powi(k as i32 + 1)
}

/// Best worst-case accuracy of the two-party AND: `lambda (lambda^2 +
/// lambda + 2) / (1+lambda)^3`.
pub fn and_accuracy_two_party(lambda: f64) -> f64 {
    lambda * (lambda * lambda + lambda + 2.0) / (1.0 + lambda).powi(3)
}

/// Accuracy of the interactive baseline where parties pool the XOR in the
/// clear and one party randomizes the result: `lambda / (1+lambda)`.
pub fn collaborative_xor_accuracy(lambda: f64) -> f64 {
    lambda / (1.0 + lambda)
}

/// Binary-input channel over a finite output alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct Mechanism {
    rows: [Vec<f64>; 2],
}

impl Mechanism {
    pub fn new(row0: Vec<f64>, row1: Vec<f64>) -> Result<Self> {
        if row0.len() != row1.len() || row0.is_empty() {
            return Err(Error::config("mechanism rows must share a nonempty alphabet"));
        }
        for row in [&row0, &row1] {
            if row.iter().any(|&v| !v.is_finite() || v < 0.0) {
                return Err(Error::config("mechanism entries must be nonnegative"));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                return Err(Error::config(format!("mechanism row sums to {sum}")));
            }
        }
        Ok(Mechanism { rows: [row0, row1] })
    }

    /// Two-letter randomized response: keep the bit w.p. `lambda/(1+lambda)`.
    pub fn randomized_response(lambda: f64) -> Self {
        let p = lambda / (1.0 + lambda);
        Mechanism {
            rows: [vec![p, 1.0 - p], vec![1.0 - p, p]],
        }
    }

    pub fn output_count(&self) -> usize {
        self.rows[0].len()
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.rows[x]
    }

    pub fn prob(&self, x: usize, z: usize) -> f64 {
        self.rows[x][z]
    }

    /// Entrywise privacy check: both likelihood ratios bounded by `lambda`.
    pub fn is_dp(&self, lambda: f64, tol: f64) -> bool {
        self.rows[0].iter().zip(&self.rows[1]).all(|(&p0, &p1)| {
            p1 <= lambda * p0 + tol && p0 <= lambda * p1 + tol
        })
    }
}

/// Lower-left boundary of a hypothesis-testing region in the (miss,
/// false-alarm) plane, as a vertex chain from (0,1) to (1,0). The region is
/// everything on or above the chain.
#[derive(Debug, Clone, PartialEq)]
pub struct TradeoffRegion {
    vertices: Vec<(f64, f64)>,
}

impl TradeoffRegion {
    pub fn new(vertices: Vec<(f64, f64)>) -> Result<Self> {
        if vertices.len() < 2
            || vertices[0] != (0.0, 1.0)
            || *vertices.last().unwrap() != (1.0, 0.0)
        {
            return Err(Error::config("boundary must run from (0,1) to (1,0)"));
        }
        let mut prev_slope = f64::NEG_INFINITY;
        for pair in vertices.windows(2) {
            let (md0, fa0) = pair[0];
            let (md1, fa1) = pair[1];
            if md1 < md0 - 1e-12 || fa1 > fa0 + 1e-12 {
                return Err(Error::config("boundary vertices must move down-right"));
            }
            let slope = if md1 > md0 {
                (fa1 - fa0) / (md1 - md0)
            } else {
                f64::NEG_INFINITY
            };
            if slope < prev_slope - 1e-9 {
                return Err(Error::config("boundary must be convex"));
            }
            prev_slope = prev_slope.max(slope);
        }
        Ok(TradeoffRegion { vertices })
    }

    pub fn vertices(&self) -> &[(f64, f64)] {
        &self.vertices
    }

    /// Boundary false-alarm rate at the given miss rate, by linear
    /// interpolation along the vertex chain.
    pub fn boundary_at(&self, p_md: f64) -> f64 {
        let p_md = p_md.clamp(0.0, 1.0);
        for pair in self.vertices.windows(2) {
            let (md0, fa0) = pair[0];
            let (md1, fa1) = pair[1];
            if p_md <= md1 {
                if md1 == md0 {
                    return fa1;
                }
                return fa0 + (fa1 - fa0) * (p_md - md0) / (md1 - md0);
            }
        }
        0.0
    }
}

/// Achievable-region boundary of a mechanism: outputs sorted by likelihood
/// ratio, rejection sets accumulated along that order.
pub fn tradeoff_region(m: &Mechanism) -> TradeoffRegion {
    // (ratio, mass under x=0, mass under x=1); never-emitted outputs dropped.
    let mut classes: Vec<(f64, f64, f64)> = Vec::new();
    for z in 0..m.output_count() {
        let (p0, p1) = (m.prob(0, z), m.prob(1, z));
        if p0 == 0.0 && p1 == 0.0 {
            continue;
        }
        let ratio = if p0 == 0.0 { f64::INFINITY } else { p1 / p0 };
        match classes.iter_mut().find(|(r, _, _)| {
            (r.is_infinite() && ratio.is_infinite())
                || (*r - ratio).abs() <= 1e-9 * r.abs().max(1.0)
        }) {
            Some(class) => {
                class.1 += p0;
                class.2 += p1;
            }
            None => classes.push((ratio, p0, p1)),
        }
    }
    classes.sort_by(|a, b| b.0.total_cmp(&a.0));
    // Rejecting the top-j classes trades miss mass for false-alarm mass.
    let mut chain = vec![(1.0, 0.0)];
    let (mut md, mut fa) = (1.0, 0.0);
    for (i, &(_, m0, m1)) in classes.iter().enumerate() {
        md -= m1;
        fa += m0;
        if i + 1 == classes.len() {
            chain.push((0.0, 1.0));
        } else {
            chain.push((md.max(0.0), fa.min(1.0)));
        }
    }
    chain.reverse();
    TradeoffRegion { vertices: chain }
}

/// Region carved out by the privacy constraint alone: the triangle over
/// `fa + lambda * md >= 1` and `md + lambda * fa >= 1`.
pub fn dp_region(lambda: f64) -> TradeoffRegion {
    let mid = 1.0 / (1.0 + lambda);
    TradeoffRegion {
        vertices: vec![(0.0, 1.0), (mid, mid), (1.0, 0.0)],
    }
}

/// True iff `inner`'s region is contained in `outer`'s, i.e. the inner
/// boundary never dips below the outer one.
pub fn region_contains(outer: &TradeoffRegion, inner: &TradeoffRegion) -> bool {
    inner
        .vertices()
        .iter()
        .all(|&(md, fa)| fa >= outer.boundary_at(md) - 1e-9)
}

/// Mutual containment.
pub fn region_equal(a: &TradeoffRegion, b: &TradeoffRegion) -> bool {
    region_contains(a, b) && region_contains(b, a)
}

/// Post-processing channel `T` with `target = T o RR(lambda)`, if one
/// exists. The target must satisfy the budget (checked by region
/// inclusion). At `lambda = 1` randomized response is non-invertible, so a
/// simulator exists only for constant targets.
pub fn simulate_mechanism(target: &Mechanism, lambda: f64) -> Result<Option<Mechanism>> {
    if !region_contains(&dp_region(lambda), &tradeoff_region(target)) {
        return Err(Error::Precondition(
            "target mechanism exceeds the privacy budget".into(),
        ));
    }
    let nz = target.output_count();
    if lambda <= 1.0 + 1e-12 {
        let constant = (0..nz)
            .all(|z| (target.prob(0, z) - target.prob(1, z)).abs() <= 1e-12);
        if !constant {
            return Ok(None);
        }
        let row = target.row(0).to_vec();
        return Ok(Some(Mechanism::new(row.clone(), row)?));
    }
    let mut t0 = Vec::with_capacity(nz);
    let mut t1 = Vec::with_capacity(nz);
    for z in 0..nz {
        let (m0, m1) = (target.prob(0, z), target.prob(1, z));
        let a = (lambda * m0 - m1) / (lambda - 1.0);
        let b = (lambda * m1 - m0) / (lambda - 1.0);
        if a < -1e-12 || b < -1e-12 {
            return Ok(None);
        }
        t0.push(a.max(0.0));
        t1.push(b.max(0.0));
    }
    for row in [&mut t0, &mut t1] {
        let sum: f64 = row.iter().sum();
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    Ok(Some(Mechanism::new(t0, t1)?))
}

/// Three-letter AND mechanism for party 2: forward the bit honestly when
/// possible, hedge otherwise.
pub fn gmps_and_mechanism(lambda: f64) -> Mechanism {
    let d = 1.0 + lambda;
    Mechanism {
        rows: [
            vec![lambda / d, lambda / (d * d), 1.0 / (d * d)],
            vec![1.0 / d, lambda * lambda / (d * d), lambda / (d * d)],
        ],
    }
}

/// Decision rule turning a pair of randomized-response bits into the AND
/// estimate that matches the three-letter mechanism: unanimous pairs are
/// taken at face value, mixed pairs answer 0 w.p. `lambda/(1+lambda)`.
pub fn rr_simulation_decision(lambda: f64) -> DecisionRule {
    let p = lambda / (1.0 + lambda);
    let labels = vec!["0".to_string(), "1".to_string()];
    let transcripts = vec!["00".into(), "01".into(), "10".into(), "11".into()];
    let matrices = vec![
        vec![1.0, 0.0],
        vec![p, 1.0 - p],
        vec![p, 1.0 - p],
        vec![0.0, 1.0],
    ];
    DecisionRule::central(labels, transcripts, matrices).expect("stochastic rows")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decision::{acc_average, acc_worstcase};
    use crate::function::{build_weight_tensor, indicator_measure, FunctionTable};
    use crate::protocol::{randomized_response, PrivacyBudget};

    #[test]
    fn xor_closed_form_values() {
        assert!((xor_accuracy(2, 2.0) - 5.0 / 9.0).abs() < 1e-15);
        assert!((xor_accuracy(3, 2.0) - 14.0 / 27.0).abs() < 1e-15);
        for k in 1..=5 {
            assert!((xor_accuracy(k, 1.0) - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn xor_closed_form_matches_protocol_evaluation() {
        for k in 1..=3 {
            for &lambda in &[1.0, 1.7, 2.0, 3.5] {
                let budget = PrivacyBudget::homogeneous(k, lambda).unwrap();
                let rr = randomized_response(&budget);
                let f = FunctionTable::xor(k).unwrap();
                let w = build_weight_tensor(&f, &indicator_measure(&f)).unwrap();
                let choices: Vec<usize> =
                    (0..rr.transcripts().len()).map(|t| f.value(t)).collect();
                let rule = DecisionRule::deterministic(
                    f.labels().to_vec(),
                    rr.transcripts().to_vec(),
                    None,
                    &[choices],
                )
                .unwrap();
                let expect = xor_accuracy(k, lambda);
                let ave = acc_average(&rr, &rule, &w).unwrap();
                let wc = acc_worstcase(&rr, &rule, &w).unwrap();
                assert!((ave.value - expect).abs() < 1e-12, "k={k} lambda={lambda}");
                assert!((wc.value - expect).abs() < 1e-12, "k={k} lambda={lambda}");
            }
        }
    }

    #[test]
    fn asymptotic_gap_values() {
        assert_eq!(xor_asymptotic_gap(3, 0.0), 0.5);
        assert!((xor_asymptotic_gap(2, 0.01) - 0.5000125).abs() < 1e-15);
        // Expansion error decays at least cubically for k = 2.
        let err = |eps: f64| (xor_accuracy(2, eps.exp()) - xor_asymptotic_gap(2, eps)).abs();
        assert!(err(0.02) / err(0.01) > 6.0);
        // k = 1 reduces to lambda/(1+lambda) to first order.
        let eps = 1e-3f64;
        assert!((xor_accuracy(1, eps.exp()) - (0.5 + eps / 4.0)).abs() < 1e-6);
    }

    #[test]
    fn and_closed_form_values() {
        assert!((and_accuracy_two_party(2.0) - 16.0 / 27.0).abs() < 1e-15);
        assert!((and_accuracy_two_party(1.0) - 0.5).abs() < 1e-15);
        assert!((and_accuracy_two_party(1e6) - 1.0).abs() < 1e-5);
        let mut prev = 0.0;
        for i in 0..50 {
            let v = and_accuracy_two_party(1.0 + 0.2 * f64::from(i));
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn collaborative_dominates_local_xor() {
        assert!((collaborative_xor_accuracy(2.0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((collaborative_xor_accuracy(1.0) - 0.5).abs() < 1e-15);
        for k in 1..=4 {
            for i in 0..30 {
                let lambda = 1.0 + 0.3 * f64::from(i);
                assert!(collaborative_xor_accuracy(lambda) >= xor_accuracy(k, lambda) - 1e-12);
            }
        }
    }

    #[test]
    fn rr_region_at_lambda_two() {
        let r = tradeoff_region(&Mechanism::randomized_response(2.0));
        let expect = [(0.0, 1.0), (1.0 / 3.0, 1.0 / 3.0), (1.0, 0.0)];
        assert_eq!(r.vertices().len(), 3);
        for (got, want) in r.vertices().iter().zip(expect) {
            assert!((got.0 - want.0).abs() < 1e-12 && (got.1 - want.1).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_channel_region_hugs_axes() {
        let m = Mechanism::new(vec![1.0, 0.0], vec![0.0, 1.0]).unwrap();
        let r = tradeoff_region(&m);
        assert_eq!(r.vertices(), [(0.0, 1.0), (0.0, 0.0), (1.0, 0.0)]);
    }

    #[test]
    fn three_letter_mechanism_matches_dp_triangle() {
        let m = gmps_and_mechanism(2.0);
        assert!((m.prob(0, 0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.prob(0, 1) - 2.0 / 9.0).abs() < 1e-15);
        assert!((m.prob(1, 1) - 4.0 / 9.0).abs() < 1e-15);
        assert!(m.is_dp(2.0, 1e-12));
        for lambda in [1.0, 1.5, 1.5f64.exp(), 4.0] {
            let gmps = tradeoff_region(&gmps_and_mechanism(lambda));
            let rr = tradeoff_region(&Mechanism::randomized_response(lambda));
            let dp = dp_region(lambda);
            for (a, b) in [(&gmps, &rr), (&gmps, &dp)] {
                assert!(region_equal(a, b), "lambda={lambda}");
            }
            if lambda > 1.0 {
                // At lambda = 1 the triangle's middle vertex is collinear and
                // the mechanism boundaries drop it, so only compare vertex
                // chains away from that degenerate point.
                for (a, b) in [(&gmps, &rr), (&gmps, &dp)] {
                    assert_eq!(a.vertices().len(), b.vertices().len(), "lambda={lambda}");
                    for (u, v) in a.vertices().iter().zip(b.vertices()) {
                        assert!((u.0 - v.0).abs() < 1e-9 && (u.1 - v.1).abs() < 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn containment_orders_budgets() {
        assert!(region_contains(&dp_region(3.0), &dp_region(2.0)));
        assert!(!region_contains(&dp_region(2.0), &dp_region(3.0)));
        let r = dp_region(2.5);
        assert!(region_contains(&r, &r));
        let m = gmps_and_mechanism(2.0);
        assert!(region_contains(&dp_region(2.0), &tradeoff_region(&m)));
    }

    #[test]
    fn simulation_reconstructs_targets() {
        for lambda in [1.5, 2.0, 4.0] {
            let target = gmps_and_mechanism(lambda);
            let t = simulate_mechanism(&target, lambda).unwrap().unwrap();
            let rr = Mechanism::randomized_response(lambda);
            for x in 0..2 {
                for z in 0..3 {
                    let composed: f64 =
                        (0..2).map(|u| rr.prob(x, u) * t.prob(u, z)).sum();
                    assert!((composed - target.prob(x, z)).abs() < 1e-9);
                }
            }
        }
        let rr = Mechanism::randomized_response(2.0);
        let t = simulate_mechanism(&rr, 2.0).unwrap().unwrap();
        assert!((t.prob(0, 0) - 1.0).abs() < 1e-12 && t.prob(0, 1).abs() < 1e-12);
        assert!((t.prob(1, 1) - 1.0).abs() < 1e-12 && t.prob(1, 0).abs() < 1e-12);
    }

    #[test]
    fn simulation_edge_cases() {
        let constant = Mechanism::new(vec![0.3, 0.7], vec![0.3, 0.7]).unwrap();
        let t = simulate_mechanism(&constant, 1.0).unwrap().unwrap();
        assert_eq!(t.row(0), t.row(1));
        let identity = Mechanism::new(vec![1.0, 0.0], vec![0.0, 1.0]).unwrap();
        assert!(matches!(
            simulate_mechanism(&identity, 2.0),
            Err(Error::Precondition(_))
        ));
        let skewed = Mechanism::new(vec![0.6, 0.4], vec![0.4, 0.6]).unwrap();
        assert!(matches!(
            simulate_mechanism(&skewed, 1.0),
            Err(Error::Precondition(_))
        ));
        // Within region tolerance of constant but not constant: the
        // non-invertible branch answers none.
        let nearly = Mechanism::new(
            vec![0.5 + 5e-11, 0.5 - 5e-11],
            vec![0.5 - 5e-11, 0.5 + 5e-11],
        )
        .unwrap();
        assert!(simulate_mechanism(&nearly, 1.0).unwrap().is_none());
    }

    #[test]
    fn simulation_decision_recovers_and_optimum() {
        let f = FunctionTable::and(2).unwrap();
        let w = build_weight_tensor(&f, &indicator_measure(&f)).unwrap();
        for lambda in [1.0, 2.0, 3.5] {
            let budget = PrivacyBudget::homogeneous(2, lambda).unwrap();
            let rr = randomized_response(&budget);
            let rule = rr_simulation_decision(lambda);
            let wc = acc_worstcase(&rr, &rule, &w).unwrap();
            assert!((wc.value - and_accuracy_two_party(lambda)).abs() < 1e-12);
        }
        let rule = rr_simulation_decision(1.0);
        assert_eq!(rule.matrix(0)[1], vec![0.5, 0.5]);
        let rule = rr_simulation_decision(2.0);
        let mixed = &rule.matrix(0)[2];
        assert!((mixed[0] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn xor_rule_beats_complement_per_transcript() {
        for (k, lambda) in [(2usize, 2.3f64), (3, 2.3)] {
            let budget = PrivacyBudget::homogeneous(k, lambda).unwrap();
            let rr = randomized_response(&budget);
            let f = FunctionTable::xor(k).unwrap();
            let w = build_weight_tensor(&f, &indicator_measure(&f)).unwrap();
            let expect = ((lambda - 1.0) / (1.0 + lambda)).powi(k as i32);
            for t in 0..rr.transcripts().len() {
                let y = f.value(t);
                let diff: f64 = (0..1 << k)
                    .map(|x| {
                        rr.prob(x, t) * (w.weight(y, x) - w.weight(1 - y, x))
                    })
                    .sum();
                assert!((diff - expect).abs() < 1e-12, "k={k} t={t}");
            }
        }
    }
}
