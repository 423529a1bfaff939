//! Signature geometry and optimality certificates.
//!
//! Every rank-1 protocol column normalizes to a signature vector
//! `[1,s_1] x ... x [1,s_k]` with `s_i` in the box `[1/lambda_i, lambda_i]`.
//! The convex hull of that manifold is a polytope whose `2^k` corners are
//! the extremal signatures with every `s_i` at a box end, cut out by `2^k`
//! half-spaces. Optimal protocols are found by a linear program over the
//! corner columns; the dual multipliers certify that no protocol in the
//! whole box does better, which only requires checking corner margins
//! because the dual slack is multilinear in `s`.

use serde::{Deserialize, Serialize};

use crate::bits;
use crate::function::WeightTensor;
use crate::lp::{self, LinearProgram, LpStatus};
use crate::protocol::{Protocol, PrivacyBudget};
use crate::{Error, Result, CERTIFICATE_MARGIN_TOL};

/// Per-party column ratios `s_i` inside the budget box.
#[derive(Debug, Clone, PartialEq)]
pub struct Signature {
    s: Vec<f64>,
}

impl Signature {
    pub fn new(s: Vec<f64>, budget: &PrivacyBudget) -> Result<Self> {
        if s.len() != budget.k() {
            return Err(Error::config(format!(
                "signature has {} coordinates, budget has {}",
                s.len(),
                budget.k()
            )));
        }
        for (i, &v) in s.iter().enumerate() {
            let l = budget.lambda(i);
            let slack = 1e-12 * l;
            if !v.is_finite() || v < 1.0 / l - slack || v > l + slack {
                return Err(Error::config(format!(
                    "s_{} = {v} outside [{}, {l}]",
                    i + 1,
                    1.0 / l
                )));
            }
        }
        Ok(Signature { s })
    }

    pub fn k(&self) -> usize {
        self.s.len()
    }

    pub fn s(&self) -> &[f64] {
        &self.s
    }

    /// Length-`2^k` vector with entry `prod_{i: x_i=1} s_i` at input `x`.
    pub fn vectorized(&self) -> Vec<f64> {
        let k = self.k();
        (0..bits::domain_size(k))
            .map(|x| {
                (0..k)
                    .filter(|&i| bits::bit(x, i, k))
                    .map(|i| self.s[i])
                    .product()
            })
            .collect()
    }
}

/// Sign of coordinate `i` in pattern `a`: bit 0 encodes `+1` (the upper box
/// end `lambda_i`), bit 1 encodes `-1` (the lower end `1/lambda_i`).
pub fn pattern_sign(a: usize, i: usize, k: usize) -> i8 {
    if bits::bit(a, i, k) {
        -1
    } else {
        1
    }
}

/// The `2^k` extremal signatures, ordered by sign pattern under the global
/// indexing (pattern 0 puts every coordinate at `lambda_i`).
#[derive(Debug, Clone)]
pub struct CornerSet {
    budget: PrivacyBudget,
    corners: Vec<Signature>,
}

impl CornerSet {
    pub fn k(&self) -> usize {
        self.budget.k()
    }

    pub fn len(&self) -> usize {
        self.corners.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn corner(&self, a: usize) -> &Signature {
        &self.corners[a]
    }

    pub fn corners(&self) -> &[Signature] {
        &self.corners
    }

    /// `matrix[x][a]`: vectorized corner `a` stacked as column `a`.
    pub fn matrix(&self) -> Vec<Vec<f64>> {
        let n = bits::domain_size(self.k());
        let cols: Vec<Vec<f64>> = self.corners.iter().map(Signature::vectorized).collect();
        (0..n)
            .map(|x| (0..self.len()).map(|a| cols[a][x]).collect())
            .collect()
    }

    /// Degenerate budgets collapse corners onto each other.
    pub fn is_degenerate(&self) -> bool {
        self.budget.is_degenerate()
    }
}

/// Corner signatures of the budget box.
pub fn extremal_signatures(budget: &PrivacyBudget) -> CornerSet {
    let k = budget.k();
    let corners = (0..bits::domain_size(k))
        .map(|a| {
            let s = (0..k)
                .map(|i| {
                    let l = budget.lambda(i);
                    if pattern_sign(a, i, k) > 0 {
                        l
                    } else {
                        1.0 / l
                    }
                })
                .collect();
            Signature { s }
        })
        .collect();
    CornerSet {
        budget: budget.clone(),
        corners,
    }
}

/// Half-space functional for pattern `a`:
/// `(-1)^k (prod_j a_j) sum_x T_x prod_i (-lambda_i)^(a_i x_i)`.
/// Membership in the half-space means a nonnegative value.
pub fn halfspace_value(t: &[f64], a: usize, budget: &PrivacyBudget) -> Result<f64> {
    let k = budget.k();
    if t.len() != bits::domain_size(k) {
        return Err(Error::config(format!(
            "tensor has {} entries, expected {}",
            t.len(),
            bits::domain_size(k)
        )));
    }
    // prod_j a_j = (-1)^(minus count); each x contributes sign (-1)^|x|
    // because (-lambda)^(+1) and (-lambda)^(-1) are both negative.
    let lead = if (k + bits::weight(a) as usize) % 2 == 0 {
        1.0
    } else {
        -1.0
    };
    let pow: Vec<f64> = (0..k)
        .map(|i| {
            let l = budget.lambda(i);
            if pattern_sign(a, i, k) > 0 {
                l
            } else {
                1.0 / l
            }
        })
        .collect();
    let mut total = 0.0;
    for (x, &tx) in t.iter().enumerate() {
        if tx == 0.0 {
            continue;
        }
        let mut term = tx;
        for i in 0..k {
            if bits::bit(x, i, k) {
                term *= -pow[i];
            }
        }
        total += term;
    }
    Ok(lead * total)
}

/// True iff `t` lies in all `2^k` half-spaces within `tol`. Requires the
/// all-zeros entry to be 1 within `tol` (the normalization every signature
/// vectorization satisfies).
pub fn polytope_member(t: &[f64], budget: &PrivacyBudget, tol: f64) -> Result<bool> {
    if t.is_empty() || (t[0] - 1.0).abs() > tol {
        return Err(Error::Precondition(format!(
            "tensor is not normalized: leading entry {}",
            t.first().copied().unwrap_or(f64::NAN)
        )));
    }
    for a in 0..bits::domain_size(budget.k()) {
        if halfspace_value(t, a, budget)? < -tol {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Solves `M alpha = v` where `M` is the corner matrix for `lambdas`, using
/// its Kronecker factorization into `k` two-by-two systems. All budgets must
/// be non-degenerate.
pub(crate) fn kronecker_corner_solve(v: &[f64], lambdas: &[f64]) -> Vec<f64> {
    let k = lambdas.len();
    debug_assert_eq!(v.len(), bits::domain_size(k));
    let mut out = v.to_vec();
    for (i, &l) in lambdas.iter().enumerate() {
        // Inverse of [[1, 1], [l, 1/l]] applied along axis i.
        let det = 1.0 / l - l;
        let (m00, m01) = (1.0 / l / det, -1.0 / det);
        let (m10, m11) = (-l / det, 1.0 / det);
        let stride = 1 << (k - 1 - i);
        for base in 0..out.len() {
            if base & stride != 0 {
                continue;
            }
            let (u0, u1) = (out[base], out[base + stride]);
            out[base] = m00 * u0 + m01 * u1;
            out[base + stride] = m10 * u0 + m11 * u1;
        }
    }
    out
}

/// Convex weights over the corner set reconstructing `sig.vectorized`.
pub fn corner_decomposition(sig: &Signature, budget: &PrivacyBudget) -> Result<Vec<f64>> {
    if sig.k() != budget.k() {
        return Err(Error::config("signature and budget party counts differ"));
    }
    if budget.is_degenerate() {
        return Err(Error::Degenerate(
            "corner matrix is singular at lambda = 1; drop those coordinates".into(),
        ));
    }
    let mut alpha = kronecker_corner_solve(&sig.vectorized(), budget.lambdas());
    for a in alpha.iter_mut() {
        if *a < 0.0 {
            if *a < -1e-9 {
                return Err(Error::Precondition(format!(
                    "corner weight {a} is negative beyond roundoff"
                )));
            }
            *a = 0.0;
        }
    }
    Ok(alpha)
}

/// Columns of a protocol in signature form: each entry pairs a signature
/// with its per-label masses `theta^(y)`.
#[derive(Debug, Clone)]
pub struct SignatureProtocol {
    entries: Vec<(Signature, Vec<f64>)>,
    label_count: usize,
    k: usize,
}

impl SignatureProtocol {
    /// Tolerance on the all-ones completeness constraint.
    pub const COMPLETENESS_TOL: f64 = 1e-9;

    pub fn new(
        entries: Vec<(Signature, Vec<f64>)>,
        budget: &PrivacyBudget,
        label_count: usize,
    ) -> Result<Self> {
        let k = budget.k();
        let mut total = vec![0.0; bits::domain_size(k)];
        for (sig, theta) in &entries {
            if sig.k() != k {
                return Err(Error::config("signature arity mismatch"));
            }
            if theta.len() != label_count {
                return Err(Error::config("per-label weight count mismatch"));
            }
            if theta.iter().any(|&v| !v.is_finite() || v < -1e-12) {
                return Err(Error::config("negative signature mass"));
            }
            let mass: f64 = theta.iter().sum();
            for (x, v) in sig.vectorized().iter().enumerate() {
                total[x] += mass * v;
            }
        }
        if total.iter().any(|&v| (v - 1.0).abs() > Self::COMPLETENESS_TOL) {
            return Err(Error::config(
                "signature masses do not complete to the all-ones vector",
            ));
        }
        Ok(SignatureProtocol {
            entries,
            label_count,
            k,
        })
    }

    pub fn entries(&self) -> &[(Signature, Vec<f64>)] {
        &self.entries
    }

    pub fn label_count(&self) -> usize {
        self.label_count
    }

    /// Explicit protocol matrix with one column per signature; column `j`
    /// carries the signature's total mass.
    pub fn assemble(&self) -> Result<Protocol> {
        let n = bits::domain_size(self.k);
        let mut rows = vec![Vec::with_capacity(self.entries.len()); n];
        for (sig, theta) in &self.entries {
            let mass: f64 = theta.iter().sum();
            for (x, v) in sig.vectorized().iter().enumerate() {
                rows[x].push((mass * v).max(0.0));
            }
        }
        // Clamp roundoff in the row sums before validation.
        for row in rows.iter_mut() {
            let sum: f64 = row.iter().sum();
            for v in row.iter_mut() {
                *v /= sum;
            }
        }
        let ids = (0..self.entries.len()).map(|j| format!("c{j}")).collect();
        Protocol::new(self.k, ids, rows)
    }
}

/// Numerical optimality certificate: dual multipliers plus the worst corner
/// margin observed while re-checking dual feasibility.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DualCertificate {
    pub optimum: f64,
    pub mu: Vec<f64>,
    /// Present for worst-case certificates only.
    pub nu: Option<Vec<f64>>,
    pub min_margin: f64,
    pub corners_checked: usize,
}

impl DualCertificate {
    /// Margins at or above `-1e-7` certify optimality.
    pub fn is_valid(&self) -> bool {
        self.min_margin >= -CERTIFICATE_MARGIN_TOL
    }

    /// Valid but with a slightly negative margin (simplex roundoff).
    pub fn has_warning(&self) -> bool {
        self.is_valid() && self.min_margin < 0.0
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serialization")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("certificate: {e}")))
    }
}

/// Certificate plus the primal solution it was extracted from.
#[derive(Debug, Clone)]
pub struct Certification {
    pub certificate: DualCertificate,
    pub primal: SignatureProtocol,
    /// Corners whose best label is not unique within 1e-12; a positive
    /// count means the optimal protocol-decision pair is not unique.
    pub tied_corners: usize,
}

/// Dual slack of a certificate at one signature and label; nonnegative
/// everywhere in the box when the certificate is exact. Average-case slacks
/// use the same `2^-k` weight scale the certificate was built with.
pub fn certificate_slack(
    cert: &DualCertificate,
    weights: &WeightTensor,
    sig: &Signature,
    label: usize,
) -> f64 {
    let v = sig.vectorized();
    let lhs: f64 = v.iter().zip(&cert.mu).map(|(a, b)| a * b).sum();
    let rhs: f64 = match &cert.nu {
        Some(nu) => v
            .iter()
            .enumerate()
            .map(|(x, sv)| weights.weight(label, x) * sv * nu[x])
            .sum(),
        None => {
            let scale = bits::domain_size(weights.k()) as f64;
            v.iter()
                .enumerate()
                .map(|(x, sv)| sv * weights.weight(label, x))
                .sum::<f64>()
                / scale
        }
    };
    lhs - rhs
}

fn corner_scores(corners: &CornerSet, weights: &WeightTensor, scale: f64) -> Vec<Vec<f64>> {
    // scores[a][y] = <S_a, W^(y)> / scale.
    corners
        .corners()
        .iter()
        .map(|sig| {
            let v = sig.vectorized();
            (0..weights.label_count())
                .map(|y| {
                    v.iter()
                        .enumerate()
                        .map(|(x, sv)| sv * weights.weight(y, x))
                        .sum::<f64>()
                        / scale
                })
                .collect()
        })
        .collect()
}

fn count_ties(scores: &[Vec<f64>]) -> usize {
    scores
        .iter()
        .filter(|per_label| {
            let mut sorted = per_label.to_vec();
            sorted.sort_by(|a, b| b.total_cmp(a));
            sorted.len() > 1 && (sorted[0] - sorted[1]).abs() <= 1e-12
        })
        .count()
}

struct ColumnBasis {
    signatures: Vec<Signature>,
    /// `columns[j]` is the vectorization of `signatures[j]`.
    columns: Vec<Vec<f64>>,
}

fn column_basis(budget: &PrivacyBudget, extra: &[Signature]) -> Result<ColumnBasis> {
    let corners = extremal_signatures(budget);
    let mut signatures = corners.corners().to_vec();
    for sig in extra {
        if sig.k() != budget.k() {
            return Err(Error::config("extra signature arity mismatch"));
        }
        signatures.push(sig.clone());
    }
    let columns = signatures.iter().map(Signature::vectorized).collect();
    Ok(ColumnBasis {
        signatures,
        columns,
    })
}

fn check_inputs(weights: &WeightTensor, budget: &PrivacyBudget) -> Result<()> {
    if weights.k() != budget.k() {
        return Err(Error::config("weights and budget party counts differ"));
    }
    Ok(())
}

/// Builds and solves the average-case LP over the given columns. Returns the
/// per-(signature,label) masses and the equality duals.
fn solve_average(
    weights: &WeightTensor,
    budget: &PrivacyBudget,
    basis: &ColumnBasis,
) -> Result<(Vec<Vec<f64>>, Vec<f64>, f64)> {
    let n = bits::domain_size(budget.k());
    let ny = weights.label_count();
    let cols = basis.columns.len();
    let scale = n as f64;
    let mut objective = vec![0.0; cols * ny];
    for (j, col) in basis.columns.iter().enumerate() {
        for y in 0..ny {
            objective[j * ny + y] = col
                .iter()
                .enumerate()
                .map(|(x, sv)| sv * weights.weight(y, x))
                .sum::<f64>()
                / scale;
        }
    }
    let mut a_eq = vec![vec![0.0; cols * ny]; n];
    for (j, col) in basis.columns.iter().enumerate() {
        for (x, &sv) in col.iter().enumerate() {
            for y in 0..ny {
                a_eq[x][j * ny + y] = sv;
            }
        }
    }
    let lp = LinearProgram::new(objective, a_eq, vec![1.0; n], vec![], vec![]);
    let sol = lp::solve(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Solver {
            message: format!("average-case LP reported {:?}", sol.status),
            last_basis: Vec::new(),
        });
    }
    let theta = (0..cols)
        .map(|j| (0..ny).map(|y| sol.primal[j * ny + y].max(0.0)).collect())
        .collect();
    Ok((theta, sol.dual, sol.objective))
}

/// Certifies the best average accuracy over all protocols at this budget:
/// solves the corner-restricted LP on the `2^-k`-scaled weights and checks
/// the dual margin at every corner and label.
pub fn certify_average_optimality(
    weights: &WeightTensor,
    budget: &PrivacyBudget,
) -> Result<Certification> {
    check_inputs(weights, budget)?;
    let basis = column_basis(budget, &[])?;
    let (theta, mu, optimum) = solve_average(weights, budget, &basis)?;
    let corners = extremal_signatures(budget);
    let n = bits::domain_size(budget.k());
    let scores = corner_scores(&corners, weights, n as f64);
    let mut min_margin = f64::INFINITY;
    for (a, sig) in corners.corners().iter().enumerate() {
        let lhs: f64 = sig.vectorized().iter().zip(&mu).map(|(s, m)| s * m).sum();
        for y in 0..weights.label_count() {
            min_margin = min_margin.min(lhs - scores[a][y]);
        }
    }
    let entries = basis.signatures.into_iter().zip(theta).collect();
    let primal = SignatureProtocol::new(entries, budget, weights.label_count())?;
    Ok(Certification {
        certificate: DualCertificate {
            optimum,
            mu,
            nu: None,
            min_margin,
            corners_checked: corners.len(),
        },
        primal,
        tied_corners: count_ties(&scores),
    })
}

/// Best average accuracy over corner columns plus optional extra interior
/// columns; adding columns can never improve the optimum.
pub fn restricted_average_optimum(
    weights: &WeightTensor,
    budget: &PrivacyBudget,
    extra: &[Signature],
) -> Result<f64> {
    check_inputs(weights, budget)?;
    let basis = column_basis(budget, extra)?;
    let (_, _, optimum) = solve_average(weights, budget, &basis)?;
    Ok(optimum)
}

fn solve_worstcase(
    weights: &WeightTensor,
    budget: &PrivacyBudget,
    basis: &ColumnBasis,
) -> Result<(Vec<Vec<f64>>, Vec<f64>, Vec<f64>, f64)> {
    let n = bits::domain_size(budget.k());
    let ny = weights.label_count();
    let cols = basis.columns.len();
    let vars = 1 + cols * ny;
    let mut objective = vec![0.0; vars];
    objective[0] = 1.0;
    let mut a_eq = vec![vec![0.0; vars]; n];
    let mut a_le = vec![vec![0.0; vars]; n];
    for x in 0..n {
        a_le[x][0] = 1.0;
    }
    for (j, col) in basis.columns.iter().enumerate() {
        for (x, &sv) in col.iter().enumerate() {
            for y in 0..ny {
                a_eq[x][1 + j * ny + y] = sv;
                a_le[x][1 + j * ny + y] = -sv * weights.weight(y, x);
            }
        }
    }
    let mut lp = LinearProgram::new(objective, a_eq, vec![1.0; n], a_le, vec![0.0; n]);
    lp.free[0] = true;
    let sol = lp::solve(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Solver {
            message: format!("worst-case LP reported {:?}", sol.status),
            last_basis: Vec::new(),
        });
    }
    let theta: Vec<Vec<f64>> = (0..cols)
        .map(|j| (0..ny).map(|y| sol.primal[1 + j * ny + y].max(0.0)).collect())
        .collect();
    let mu = sol.dual[..n].to_vec();
    let mut nu: Vec<f64> = sol.dual[n..].iter().map(|&v| v.max(0.0)).collect();
    let total: f64 = nu.iter().sum();
    if total > 0.0 {
        for v in nu.iter_mut() {
            *v /= total;
        }
    }
    Ok((theta, mu, nu, sol.objective))
}

/// Certifies the best worst-case accuracy over all protocols at this budget.
pub fn certify_worstcase_optimality(
    weights: &WeightTensor,
    budget: &PrivacyBudget,
) -> Result<Certification> {
    check_inputs(weights, budget)?;
    let basis = column_basis(budget, &[])?;
    let (theta, mu, nu, optimum) = solve_worstcase(weights, budget, &basis)?;
    let corners = extremal_signatures(budget);
    let mut min_margin = f64::INFINITY;
    for sig in corners.corners() {
        let v = sig.vectorized();
        let lhs: f64 = v.iter().zip(&mu).map(|(s, m)| s * m).sum();
        for y in 0..weights.label_count() {
            let rhs: f64 = v
                .iter()
                .enumerate()
                .map(|(x, sv)| weights.weight(y, x) * sv * nu[x])
                .sum();
            min_margin = min_margin.min(lhs - rhs);
        }
    }
    let scores = corner_scores(&corners, weights, 1.0);
    let entries = basis.signatures.into_iter().zip(theta).collect();
    let primal = SignatureProtocol::new(entries, budget, weights.label_count())?;
    Ok(Certification {
        certificate: DualCertificate {
            optimum,
            mu,
            nu: Some(nu),
            min_margin,
            corners_checked: corners.len(),
        },
        primal,
        tied_corners: count_ties(&scores),
    })
}

/// Worst-case analogue of [`restricted_average_optimum`].
pub fn restricted_worstcase_optimum(
    weights: &WeightTensor,
    budget: &PrivacyBudget,
    extra: &[Signature],
) -> Result<f64> {
    check_inputs(weights, budget)?;
    let basis = column_basis(budget, extra)?;
    let (_, _, _, optimum) = solve_worstcase(weights, budget, &basis)?;
    Ok(optimum)
}
