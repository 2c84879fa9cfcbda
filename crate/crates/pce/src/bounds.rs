//! Cover-based upper bounds: the fractional edge cover bound over relation
//! cardinalities, the chain bound over max-degree statistics, its integral
//! restriction computed as a shortest path over the variable-subset lattice,
//! and the PTIME single-ordering case for acyclic statistics.

use crate::lp::{self, Cmp, Direction, LinearProgram, Status};
use crate::model::{statistics_topological_order, ConjunctiveQuery, VariableOrdering};
use crate::{Error, Result};

/// A max-degree statistic bound to one atom occurrence: the pair (V|U)
/// mapped through the atom's argument positions into query variables.
/// Cardinalities are the special case U = ∅, V = the atom's variables.
#[derive(Debug, Clone)]
pub struct CoverStatistic {
    pub atom: usize,
    pub u_mask: u64,
    pub v_mask: u64,
    pub p: f64,
    pub value: f64,
    pub label: String,
}

impl CoverStatistic {
    pub fn new(
        atom: usize,
        u_mask: u64,
        v_mask: u64,
        p: f64,
        value: f64,
        label: impl Into<String>,
    ) -> CoverStatistic {
        CoverStatistic {
            atom,
            u_mask,
            // conditioning variables are never generated by the statistic
            v_mask: v_mask & !u_mask,
            p,
            value,
            label: label.into(),
        }
    }

    pub fn ln_value(&self) -> f64 {
        self.value.ln()
    }
}

/// Method-specific certificate that re-evaluates to the bound.
#[derive(Debug, Clone)]
pub enum Witness {
    /// Per-atom fractional edge cover weights.
    EdgeCover { weights: Vec<f64> },
    /// A variable ordering plus per-statistic cover weights.
    ChainCover {
        order: VariableOrdering,
        weights: Vec<f64>,
    },
    /// Statistic indices applied along the subset-lattice path.
    LatticePath { stats: Vec<usize> },
    /// The optimal vector over all variable subsets (index = bitmask).
    Entropy { h: Vec<f64> },
    /// Closed-form evaluation; recomputing the formula is the certificate.
    Direct,
}

/// An upper bound in both scales plus its certificate.
#[derive(Debug, Clone)]
pub struct BoundResult {
    pub log_bound: f64,
    pub bound: f64,
    pub witness: Witness,
}

impl BoundResult {
    pub fn from_log(log_bound: f64, witness: Witness) -> BoundResult {
        BoundResult {
            log_bound,
            bound: log_bound.exp(),
            witness,
        }
    }

    pub fn from_linear(bound: f64, witness: Witness) -> BoundResult {
        BoundResult {
            log_bound: bound.ln(),
            bound,
            witness,
        }
    }
}

/// Fractional edge cover bound from per-atom cardinalities: minimize
/// Σ w_i·ln|R_i| subject to every variable's incident weights summing to
/// at least one.
pub fn agm_bound(q: &ConjunctiveQuery, cardinalities: &[f64]) -> Result<BoundResult> {
    let m = q.atoms().len();
    if cardinalities.len() != m {
        return Err(Error::MissingStat(format!(
            "expected {m} cardinalities, got {}",
            cardinalities.len()
        )));
    }
    if let Some(i) = cardinalities.iter().position(|&c| !(c >= 0.0)) {
        return Err(Error::Input(format!(
            "cardinality for atom {i} is negative or NaN"
        )));
    }
    if let Some(i) = cardinalities.iter().position(|&c| c == 0.0) {
        let mut weights = vec![0.0; m];
        weights[i] = 1.0;
        return Ok(BoundResult::from_log(
            f64::NEG_INFINITY,
            Witness::EdgeCover { weights },
        ));
    }

    let n = q.num_vars();
    let mut prog = LinearProgram::new(Direction::Minimize, m);
    prog.objective = cardinalities.iter().map(|c| c.ln()).collect();
    for v in 0..n {
        let name = &q.vars()[v];
        let coeffs: Vec<f64> = q
            .atoms()
            .iter()
            .map(|a| if a.args.contains(name) { 1.0 } else { 0.0 })
            .collect();
        prog.constrain(coeffs, Cmp::Ge, 1.0);
    }
    let sol = lp::solve(&prog)?;
    match sol.status {
        Status::Optimal => Ok(BoundResult::from_log(
            sol.value,
            Witness::EdgeCover { weights: sol.point },
        )),
        Status::Infeasible | Status::Unbounded => Err(Error::Numeric(
            "edge cover program failed to reach an optimum".into(),
        )),
    }
}

/// Recompute Σ w_i·ln|R_i| along an edge cover witness.
pub fn reevaluate_edge_cover(weights: &[f64], cardinalities: &[f64]) -> f64 {
    weights
        .iter()
        .zip(cardinalities)
        .map(|(w, c)| if *w == 0.0 { 0.0 } else { w * c.ln() })
        .sum()
}

/// Recompute Σ w_i·ln(value_i) along a chain cover witness.
pub fn reevaluate_chain_cover(weights: &[f64], stats: &[CoverStatistic]) -> f64 {
    weights
        .iter()
        .zip(stats)
        .map(|(w, s)| if *w == 0.0 { 0.0 } else { w * s.ln_value() })
        .sum()
}

/// Recompute the log-product along a lattice path witness.
pub fn reevaluate_lattice_path(path: &[usize], stats: &[CoverStatistic]) -> f64 {
    path.iter().map(|&i| stats[i].ln_value()).sum()
}

/// For a fixed ordering, which variables each statistic covers: X is covered
/// by (V|U) when X ∈ V and all of U strictly precedes X.
fn coverage_for_order(stats: &[CoverStatistic], order: &[usize]) -> Vec<u64> {
    let mut before = 0u64;
    let mut covers = vec![0u64; stats.len()];
    for &v in order {
        let bit = 1u64 << v;
        for (i, s) in stats.iter().enumerate() {
            if s.v_mask & bit != 0 && s.u_mask & !before == 0 {
                covers[i] |= bit;
            }
        }
        before |= bit;
    }
    covers
}

/// Minimize Σ w_i·ln(value_i) over fractional covers of the per-statistic
/// coverage sets. Returns None when some variable is covered by nothing.
fn cover_lp(
    stats: &[CoverStatistic],
    covers: &[u64],
    full: u64,
) -> Result<Option<(f64, Vec<f64>)>> {
    let mut reachable = 0u64;
    for &c in covers {
        reachable |= c;
    }
    if reachable & full != full {
        return Ok(None);
    }
    let mut prog = LinearProgram::new(Direction::Minimize, stats.len());
    prog.objective = stats.iter().map(|s| s.ln_value()).collect();
    let mut v = 0;
    while full >> v != 0 {
        if full >> v & 1 == 1 {
            let coeffs: Vec<f64> = covers
                .iter()
                .map(|&c| if c >> v & 1 == 1 { 1.0 } else { 0.0 })
                .collect();
            prog.constrain(coeffs, Cmp::Ge, 1.0);
        }
        v += 1;
    }
    let sol = lp::solve(&prog)?;
    match sol.status {
        Status::Optimal => Ok(Some((sol.value, sol.point))),
        Status::Infeasible => Ok(None),
        Status::Unbounded => Err(Error::Numeric(
            "cover program unbounded; a statistic value below one".into(),
        )),
    }
}

fn zero_stat_short_circuit(stats: &[CoverStatistic], n: usize) -> Option<BoundResult> {
    stats.iter().position(|s| s.value == 0.0).map(|i| {
        let mut weights = vec![0.0; stats.len()];
        weights[i] = 1.0;
        BoundResult::from_log(
            f64::NEG_INFINITY,
            Witness::ChainCover {
                order: VariableOrdering((0..n).collect()),
                weights,
            },
        )
    })
}

/// Chain bound: the minimum over variable orderings of the per-ordering
/// fractional cover optimum. Enumeration prunes prefixes in which the next
/// variable cannot be covered, and identical coverage structures are solved
/// once.
pub fn chain_bound(
    q: &ConjunctiveQuery,
    stats: &[CoverStatistic],
    max_vars: usize,
) -> Result<BoundResult> {
    let n = q.num_vars();
    if n > max_vars {
        return Err(Error::Unsupported(format!(
            "query has {n} variables, over the ordering-enumeration cap of {max_vars}"
        )));
    }
    if let Some(r) = zero_stat_short_circuit(stats, n) {
        return Ok(r);
    }
    let full = q.full_mask();

    let mut best: Option<(f64, VariableOrdering, Vec<f64>)> = None;
    let mut seen = std::collections::HashSet::new();
    let mut order: Vec<usize> = Vec::with_capacity(n);
    enumerate_orders(stats, n, &mut order, 0, &mut |order| {
        let covers = coverage_for_order(stats, order);
        if !seen.insert(covers.clone()) {
            return Ok(());
        }
        if let Some((value, weights)) = cover_lp(stats, &covers, full)? {
            let better = best.as_ref().map_or(true, |(b, _, _)| value < *b);
            if better {
                best = Some((value, VariableOrdering(order.to_vec()), weights));
            }
        }
        Ok(())
    })?;

    match best {
        Some((log_bound, order, weights)) => Ok(BoundResult::from_log(
            log_bound,
            Witness::ChainCover { order, weights },
        )),
        None => Err(Error::Unbounded(
            "some variable is not covered by any statistic under any ordering".into(),
        )),
    }
}

/// Recursively extend `order` with variables that are coverable given the
/// prefix; calls `visit` on every complete ordering.
fn enumerate_orders(
    stats: &[CoverStatistic],
    n: usize,
    order: &mut Vec<usize>,
    placed: u64,
    visit: &mut impl FnMut(&[usize]) -> Result<()>,
) -> Result<()> {
    if order.len() == n {
        return visit(order);
    }
    for v in 0..n {
        let bit = 1u64 << v;
        if placed & bit != 0 {
            continue;
        }
        let coverable = stats
            .iter()
            .any(|s| s.v_mask & bit != 0 && s.u_mask & !placed == 0);
        if !coverable {
            continue;
        }
        order.push(v);
        enumerate_orders(stats, n, order, placed | bit, visit)?;
        order.pop();
    }
    Ok(())
}

/// Integral-cover restriction of the chain bound, computed as the shortest
/// multiplicative path from ∅ to all variables: an edge applies statistic
/// (V|U) at any node W ⊇ U and leads to W ∪ V. Ties break toward the
/// lexicographically smallest node sequence.
pub fn bound_sketch(q: &ConjunctiveQuery, stats: &[CoverStatistic]) -> Result<BoundResult> {
    let n = q.num_vars();
    if n > 20 {
        return Err(Error::Unsupported(format!(
            "query has {n} variables, over the subset-lattice cap of 20"
        )));
    }
    if let Some(i) = stats.iter().position(|s| s.value == 0.0) {
        return Ok(BoundResult::from_log(
            f64::NEG_INFINITY,
            Witness::LatticePath { stats: vec![i] },
        ));
    }
    let full = q.full_mask() as usize;
    let size = full + 1;
    let mut dist = vec![f64::INFINITY; size];
    let mut path: Vec<Vec<u64>> = vec![Vec::new(); size];
    let mut edges: Vec<Vec<usize>> = vec![Vec::new(); size];
    dist[0] = 0.0;
    // masks grow along every edge, so ascending mask order is topological
    for w in 0..size {
        if !dist[w].is_finite() {
            continue;
        }
        for (i, s) in stats.iter().enumerate() {
            if s.u_mask & !(w as u64) != 0 {
                continue;
            }
            let next = w | s.v_mask as usize;
            if next == w {
                continue;
            }
            let cand = dist[w] + s.ln_value();
            let tol = 1e-12 * (1.0 + cand.abs());
            let take = if cand < dist[next] - tol {
                true
            } else if cand < dist[next] + tol {
                let mut p = path[w].clone();
                p.push(next as u64);
                p < path[next]
            } else {
                false
            };
            if take {
                dist[next] = dist[next].min(cand);
                let mut p = path[w].clone();
                p.push(next as u64);
                path[next] = p;
                let mut e = edges[w].clone();
                e.push(i);
                edges[next] = e;
            }
        }
    }
    if !dist[full].is_finite() {
        return Err(Error::Unbounded(
            "statistics cannot cover all query variables".into(),
        ));
    }
    Ok(BoundResult::from_log(
        dist[full],
        Witness::LatticePath {
            stats: edges[full].clone(),
        },
    ))
}

/// When the statistics admit a dependency-compatible variable ordering, a
/// single cover LP computes the chain bound exactly; `None` signals that the
/// statistics are cyclic and the caller should fall back to enumeration.
pub fn acyclic_chain_bound(
    q: &ConjunctiveQuery,
    stats: &[CoverStatistic],
) -> Result<Option<BoundResult>> {
    let n = q.num_vars();
    let pairs: Vec<(u64, u64)> = stats.iter().map(|s| (s.u_mask, s.v_mask)).collect();
    let Some(order) = statistics_topological_order(&pairs, n) else {
        return Ok(None);
    };
    if let Some(r) = zero_stat_short_circuit(stats, n) {
        return Ok(Some(r));
    }
    let covers = coverage_for_order(stats, &order.0);
    match cover_lp(stats, &covers, q.full_mask())? {
        Some((log_bound, weights)) => Ok(Some(BoundResult::from_log(
            log_bound,
            Witness::ChainCover { order, weights },
        ))),
        None => Err(Error::Unbounded(
            "some variable is not covered by any statistic".into(),
        )),
    }
}

/// Ordering-soundness check on a chain witness: under the returned ordering,
/// every variable's covering weights sum to at least one.
pub fn chain_witness_covers(
    q: &ConjunctiveQuery,
    stats: &[CoverStatistic],
    order: &VariableOrdering,
    weights: &[f64],
    tol: f64,
) -> bool {
    let covers = coverage_for_order(stats, &order.0);
    let n = q.num_vars();
    (0..n).all(|v| {
        let total: f64 = covers
            .iter()
            .zip(weights)
            .filter(|(c, _)| *c >> v & 1 == 1)
            .map(|(_, w)| w)
            .sum();
        total >= 1.0 - tol
    })
}
