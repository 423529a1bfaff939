//! End-to-end acceptance checks. Each test covers one numbered criterion and
//! prints a single PASS line; tolerances and runtime caps are pinned inline.

use std::time::Instant;

use dpmpc::analysis::{self, Mechanism};
use dpmpc::decision::{self, DecisionRule, Mode};
use dpmpc::function::{build_weight_tensor, indicator_measure, FunctionTable, WeightTensor};
use dpmpc::geometry::{self, Signature};
use dpmpc::lp::{self, LinearProgram, LpStatus};
use dpmpc::multibit;
use dpmpc::oracle;
use dpmpc::protocol::{randomized_response, PrivacyBudget};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn binom(n: usize, r: usize) -> f64 {
    let r = r.min(n - r);
    (0..r).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn and_closed_form(l: f64) -> f64 {
    l * (l * l + l + 2.0) / (1.0 + l).powi(3)
}

fn xor_closed_form(k: usize, l: f64) -> f64 {
    let mut num = 0.0;
    for i in 0..=(k / 2) {
        num += binom(k, 2 * i) * l.powi((k - 2 * i) as i32);
    }
    num / (1.0 + l).powi(k as i32)
}

/// Log-uniform point of the signature box.
fn random_box_signature(budget: &PrivacyBudget, rng: &mut ChaCha8Rng) -> Signature {
    let s = budget
        .lambdas()
        .iter()
        .map(|&l| (l * l).powf(rng.random::<f64>()) / l)
        .collect();
    Signature::new(s, budget).unwrap()
}

fn random_three_label(k: usize) -> FunctionTable {
    let mut rng = ChaCha8Rng::seed_from_u64(1105);
    let labels: Vec<String> = ["0", "1", "2"].map(String::from).to_vec();
    let table = (0..1usize << k).map(|_| rng.random_range(0..3)).collect();
    FunctionTable::new(k, labels, table).unwrap()
}

/// The shared grid for criteria 3 and 4: k up to 3, three functions, one
/// homogeneous and one heterogeneous budget.
fn for_each_config(mut visit: impl FnMut(&str, &PrivacyBudget, &WeightTensor)) {
    for k in 1..=3usize {
        for fname in ["xor", "and", "rand3"] {
            let f = match fname {
                "xor" => FunctionTable::xor(k).unwrap(),
                "and" => FunctionTable::and(k).unwrap(),
                _ => random_three_label(k),
            };
            let w = build_weight_tensor(&f, &indicator_measure(&f)).unwrap();
            for bname in ["hom", "het"] {
                let b = match bname {
                    "hom" => PrivacyBudget::homogeneous(k, 2.0).unwrap(),
                    _ => PrivacyBudget::new(vec![1.3, 2.0, 3.5][..k].to_vec()).unwrap(),
                };
                visit(&format!("k={k} f={fname} budget={bname}"), &b, &w);
            }
        }
    }
}

#[test]
fn criterion_1_and_worstcase_closed_form() {
    let start = Instant::now();
    let f = FunctionTable::and(2).unwrap();
    let w = build_weight_tensor(&f, &indicator_measure(&f)).unwrap();
    for l in [1.0, 1.5, 2.0, (1.5f64).exp(), 5.0] {
        let b = PrivacyBudget::homogeneous(2, l).unwrap();
        let rr = randomized_response(&b);
        let rule = decision::optimal_worstcase_decision(&rr, &w, None).unwrap();
        let lp_value = decision::acc_worstcase(&rr, &rule, &w).unwrap().value;
        let expect = and_closed_form(l);
        assert!((lp_value - expect).abs() <= 1e-9, "lambda {l}: {lp_value} vs {expect}");
        let cert = geometry::certify_worstcase_optimality(&w, &b).unwrap();
        assert!((cert.certificate.optimum - expect).abs() <= 1e-9, "lambda {l} certificate");
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 1.0, "took {elapsed:.3}s");
    println!("criterion 1 (two-party AND worst-case closed form): PASS");
}

#[test]
fn criterion_2_parity_closed_form() {
    let start = Instant::now();
    for k in 1..=4usize {
        let f = FunctionTable::xor(k).unwrap();
        let w = build_weight_tensor(&f, &indicator_measure(&f)).unwrap();
        for l in [1.0, 2.0, 3.0] {
            let b = PrivacyBudget::homogeneous(k, l).unwrap();
            let rr = randomized_response(&b);
            let parity: Vec<usize> = (0..rr.transcript_count())
                .map(|t| (t.count_ones() % 2) as usize)
                .collect();
            let rule = DecisionRule::deterministic(
                f.labels().to_vec(),
                rr.transcripts().to_vec(),
                None,
                &[parity],
            )
            .unwrap();
            let expect = xor_closed_form(k, l);
            let ave = decision::acc_average(&rr, &rule, &w).unwrap().value;
            let wc = decision::acc_worstcase(&rr, &rule, &w).unwrap().value;
            assert!((ave - expect).abs() <= 1e-12, "k={k} lambda={l}: average {ave}");
            assert!((wc - expect).abs() <= 1e-12, "k={k} lambda={l}: worst-case {wc}");
            assert!((analysis::xor_accuracy(k, l) - expect).abs() <= 1e-12);
            if k <= 3 {
                let brute = oracle::brute_force_average_optimum(&rr, &w).unwrap();
                assert!((brute - expect).abs() <= 1e-12, "k={k} lambda={l}: brute {brute}");
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 10.0, "took {elapsed:.3}s");
    println!("criterion 2 (parity closed form vs brute force): PASS");
}

#[test]
fn criterion_3_sampled_protocols_never_beat_rr() {
    let start = Instant::now();
    let mut base_seed = 0u64;
    let mut checked = 0usize;
    for_each_config(|name, b, w| {
        let columns = oracle::default_column_count(b.k());
        for mode in [Mode::Average, Mode::WorstCase] {
            for i in 0..1000 {
                let sp = oracle::sample_feasible_protocol(b, columns, base_seed + i).unwrap();
                let gap = oracle::optimality_gap(&sp, w, b, mode).unwrap();
                assert!(
                    gap >= -1e-9,
                    "{name} {} sample {i}: sampled protocol wins by {}",
                    mode.as_str(),
                    -gap
                );
                checked += 1;
            }
            base_seed += 1000;
        }
    });
    assert_eq!(checked, 36_000);
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 120.0, "took {elapsed:.1}s");
    println!("criterion 3 (sampled protocols never beat randomized response): PASS");
}

#[test]
fn criterion_4_dual_certificates() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xcafe);
    for_each_config(|name, b, w| {
        let average = geometry::certify_average_optimality(w, b).unwrap();
        let worstcase = geometry::certify_worstcase_optimality(w, b).unwrap();
        for (which, cert) in [
            ("average", &average.certificate),
            ("worst-case", &worstcase.certificate),
        ] {
            assert!(
                cert.min_margin >= -1e-7,
                "{name} {which}: corner margin {}",
                cert.min_margin
            );
            let corners = geometry::extremal_signatures(b);
            let mut corner_min = f64::INFINITY;
            for sig in corners.corners() {
                for y in 0..w.label_count() {
                    corner_min = corner_min.min(geometry::certificate_slack(cert, w, sig, y));
                }
            }
            for _ in 0..1000 {
                let sig = random_box_signature(b, &mut rng);
                for y in 0..w.label_count() {
                    let slack = geometry::certificate_slack(cert, w, &sig, y);
                    assert!(slack >= corner_min - 1e-9, "{name} {which}: interior slack dips");
                }
            }
        }
    });
    println!("criterion 4 (dual certificates with corner margins): PASS");
}

#[test]
fn criterion_5_corner_polytope_geometry() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x9e0);
    for k in 1..=4usize {
        let b = PrivacyBudget::new(vec![1.5, 2.0, 3.0, 2.5][..k].to_vec()).unwrap();
        let corners = geometry::extremal_signatures(&b);
        let matrix = corners.matrix();
        for a in 0..corners.len() {
            let va = corners.corner(a).vectorized();
            for pat in 0..corners.len() {
                let v = geometry::halfspace_value(&va, pat, &b).unwrap();
                if pat == a {
                    assert!(v > 1e-9, "corner {a}: own half-space value {v}");
                } else {
                    assert!(v.abs() <= 1e-9, "corner {a} face {pat}: {v}");
                }
            }
        }
        for _ in 0..1000 {
            // strictly interior draw: the log coordinate stays off the walls
            let s: Vec<f64> = b
                .lambdas()
                .iter()
                .map(|&l| (l * l).powf(0.02 + 0.96 * rng.random::<f64>()) / l)
                .collect();
            let v = Signature::new(s, &b).unwrap().vectorized();
            assert!(geometry::polytope_member(&v, &b, 1e-9).unwrap());
            for pat in 0..corners.len() {
                assert!(geometry::halfspace_value(&v, pat, &b).unwrap() > 0.0);
            }
        }
        for _ in 0..1000 {
            let sig = random_box_signature(&b, &mut rng);
            let alpha = geometry::corner_decomposition(&sig, &b).unwrap();
            let v = sig.vectorized();
            for (x, &vx) in v.iter().enumerate() {
                let rebuilt: f64 = alpha.iter().zip(&matrix[x]).map(|(al, c)| al * c).sum();
                assert!((rebuilt - vx).abs() <= 1e-9, "k={k} entry {x}: {rebuilt} vs {vx}");
            }
        }
    }
    println!("criterion 5 (corner polytope geometry): PASS");
}

#[test]
fn criterion_6_tradeoff_region_identity() {
    for l in [1.5, (1.5f64).exp(), 4.0] {
        let gmps = analysis::gmps_and_mechanism(l);
        let rr = Mechanism::randomized_response(l);
        let reference = analysis::tradeoff_region(&gmps);
        for region in [analysis::tradeoff_region(&rr), analysis::dp_region(l)] {
            assert_eq!(region.vertices().len(), reference.vertices().len(), "lambda {l}");
            for (a, b) in reference.vertices().iter().zip(region.vertices()) {
                assert!(
                    (a.0 - b.0).abs() <= 1e-9 && (a.1 - b.1).abs() <= 1e-9,
                    "lambda {l}: vertex {a:?} vs {b:?}"
                );
            }
        }
        let t = analysis::simulate_mechanism(&gmps, l)
            .unwrap()
            .expect("three-letter mechanism is simulatable from randomized response");
        for x in 0..2 {
            for z in 0..gmps.output_count() {
                let got: f64 = (0..2).map(|u| rr.prob(x, u) * t.prob(u, z)).sum();
                assert!((got - gmps.prob(x, z)).abs() <= 1e-9, "lambda {l} x={x} z={z}");
            }
        }
    }
    println!("criterion 6 (tradeoff region identity): PASS");
}

#[test]
fn criterion_7_small_budget_parity_asymptotics() {
    for k in [2usize, 3] {
        let eps = [0.1f64, 0.05, 0.025];
        let dev: Vec<f64> = eps
            .iter()
            .map(|&e| {
                let gap = analysis::xor_accuracy(k, e.exp()) - 0.5;
                let predicted = e.powi(k as i32) / 2f64.powi(k as i32 + 1);
                (gap / predicted - 1.0).abs()
            })
            .collect();
        assert!(dev[2] < 1e-3, "k={k}: ratio still off by {}", dev[2]);
        // each halving of eps must at least halve the deviation, 20% slack
        assert!(dev[1] <= 0.5 * 1.2 * dev[0], "k={k}: deviations {dev:?}");
        assert!(dev[2] <= 0.5 * 1.2 * dev[1], "k={k}: deviations {dev:?}");
    }
    println!("criterion 7 (small-budget parity asymptotics): PASS");
}

#[test]
fn criterion_8_interactive_selector_dominance() {
    let f = multibit::selector_function();
    let measure = indicator_measure(&f);
    let grid: Vec<f64> = (0..20).map(|i| 5.0 * i as f64 / 19.0).collect();
    let rows = multibit::compare_curves(
        |l| Ok(multibit::selector_interactive_protocol(l).induced().clone()),
        |l| Ok(randomized_response(&PrivacyBudget::homogeneous(3, l)?)),
        &f,
        &measure,
        &grid,
        Mode::Average,
    )
    .unwrap();
    assert!((rows[0].acc_a - 0.625).abs() <= 1e-12, "interactive at eps 0: {}", rows[0].acc_a);
    assert!((rows[0].acc_b - 0.625).abs() <= 1e-12, "one-shot at eps 0: {}", rows[0].acc_b);
    for r in &rows {
        assert!(r.acc_a >= r.acc_b - 1e-9, "eps {}: {} < {}", r.eps, r.acc_a, r.acc_b);
    }
    assert!(
        rows.iter().any(|r| r.acc_a > r.acc_b + 1e-9),
        "no strict improvement anywhere on the grid"
    );
    println!("criterion 8 (interactive selector dominance): PASS");
}

#[test]
fn criterion_9_lp_solver_self_test() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x10);
    for case in 0..50 {
        let n = rng.random_range(2..=6);
        let me = rng.random_range(0..=1);
        let ml = rng.random_range(1..=3);
        // x0 >= 0 witnesses feasibility; per-variable caps keep it bounded
        let x0: Vec<f64> = (0..n).map(|_| 2.0 * rng.random::<f64>()).collect();
        let a_eq: Vec<Vec<f64>> = (0..me)
            .map(|_| (0..n).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect())
            .collect();
        let b_eq = a_eq
            .iter()
            .map(|row| row.iter().zip(&x0).map(|(a, x)| a * x).sum())
            .collect();
        let mut a_le: Vec<Vec<f64>> = (0..ml)
            .map(|_| (0..n).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect())
            .collect();
        let mut b_le: Vec<f64> = a_le
            .iter()
            .map(|row| {
                row.iter().zip(&x0).map(|(a, x)| a * x).sum::<f64>() + rng.random::<f64>()
            })
            .collect();
        for j in 0..n {
            let mut cap = vec![0.0; n];
            cap[j] = 1.0;
            a_le.push(cap);
            b_le.push(4.0);
        }
        let c = (0..n).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
        let lp = LinearProgram::new(c, a_eq, b_eq, a_le, b_le);
        let sol = lp::solve(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal, "case {case}");
        let report = lp::verify(&lp, &sol, 1e-8).unwrap();
        assert!(report.ok, "case {case}: {report:?}");
    }
    let infeasible = LinearProgram::new(vec![1.0], vec![], vec![], vec![vec![1.0]], vec![-1.0]);
    assert_eq!(lp::solve(&infeasible).unwrap().status, LpStatus::Infeasible);
    let infeasible_eq =
        LinearProgram::new(vec![1.0, 1.0], vec![vec![1.0, 1.0]], vec![-1.0], vec![], vec![]);
    assert_eq!(lp::solve(&infeasible_eq).unwrap().status, LpStatus::Infeasible);
    let unbounded = LinearProgram::new(vec![1.0], vec![], vec![], vec![], vec![]);
    assert_eq!(lp::solve(&unbounded).unwrap().status, LpStatus::Unbounded);
    println!("criterion 9 (lp solver self-test): PASS");
}
