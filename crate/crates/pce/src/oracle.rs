//! Ground truth: exact join evaluation, empirical entropy vectors over query
//! outputs, and numeric verification of every inequality the bounds rely on.

use std::collections::{BTreeSet, HashMap};

use serde::Serialize;

use crate::catalog::Database;
use crate::model::{ConjunctiveQuery, Value};
use crate::polymatroid::{elemental_inequalities, EntropyVector};
use crate::stats::degree_sequence;
use crate::{Error, Result};

pub const DEFAULT_JOIN_CAP: usize = 10_000_000;

/// The materialized output of a query: distinct rows over `vars()` order.
#[derive(Debug, Clone)]
pub struct JoinOutput {
    pub vars: Vec<String>,
    pub rows: BTreeSet<Vec<Value>>,
}

impl JoinOutput {
    pub fn count(&self) -> usize {
        self.rows.len()
    }

    /// Number of distinct projections onto the masked variables.
    pub fn distinct_projection(&self, mask: u64) -> usize {
        let idx: Vec<usize> = (0..self.vars.len()).filter(|i| mask >> i & 1 == 1).collect();
        let mut seen: BTreeSet<Vec<&Value>> = BTreeSet::new();
        for row in &self.rows {
            seen.insert(idx.iter().map(|&i| &row[i]).collect());
        }
        seen.len()
    }
}

/// Evaluate the query exactly: left-to-right joins with a hash index on the
/// next atom's already-bound positions, set semantics over the full variable
/// tuple. Fails once the number of partial assignments exceeds `cap`.
pub fn exact_join(db: &Database, q: &ConjunctiveQuery, cap: usize) -> Result<JoinOutput> {
    let n = q.num_vars();
    let mut partials: Vec<Vec<Option<Value>>> = vec![vec![None; n]];
    for atom in q.atoms() {
        let rel = db.get(&atom.relation)?;
        if rel.attributes().len() != atom.args.len() {
            return Err(Error::Input(format!(
                "atom {}({}) does not match the relation's arity {}",
                atom.relation,
                atom.args.join(","),
                rel.attributes().len()
            )));
        }
        let arg_vars: Vec<usize> = atom
            .args
            .iter()
            .map(|v| q.var_index(v).expect("atom variable is a query variable"))
            .collect();

        // positions of the atom's arguments that are already bound in every
        // partial assignment (identical across partials by construction)
        let bound_pos: Vec<usize> = match partials.first() {
            Some(first) => (0..arg_vars.len())
                .filter(|&i| first[arg_vars[i]].is_some())
                .collect(),
            None => break,
        };
        let mut index: HashMap<Vec<&Value>, Vec<&Vec<Value>>> = HashMap::new();
        for tuple in rel.tuples() {
            index
                .entry(bound_pos.iter().map(|&i| &tuple[i]).collect())
                .or_default()
                .push(tuple);
        }

        let mut next: Vec<Vec<Option<Value>>> = Vec::new();
        for partial in &partials {
            let key: Vec<&Value> = bound_pos
                .iter()
                .map(|&i| partial[arg_vars[i]].as_ref().unwrap())
                .collect();
            let Some(matches) = index.get(&key) else {
                continue;
            };
            for tuple in matches {
                let mut extended = partial.clone();
                for (i, &var) in arg_vars.iter().enumerate() {
                    extended[var] = Some(tuple[i].clone());
                }
                next.push(extended);
                if next.len() > cap {
                    return Err(Error::CapExceeded { cap });
                }
            }
        }
        partials = next;
    }
    let rows: BTreeSet<Vec<Value>> = partials
        .into_iter()
        .map(|p| p.into_iter().map(|v| v.expect("all variables bound")).collect())
        .collect();
    Ok(JoinOutput {
        vars: q.vars().to_vec(),
        rows,
    })
}

/// Entropies of every subset marginal of the uniform distribution over the
/// query output, in nats. The full-set entropy is exactly ln of the output
/// size.
pub fn empirical_entropy(output: &JoinOutput) -> Result<EntropyVector> {
    let n = output.vars.len();
    let total = output.count();
    if total == 0 {
        return Err(Error::Input(
            "entropy of an empty query output is undefined".into(),
        ));
    }
    let mut h = vec![0.0; 1 << n];
    for mask in 1u64..(1 << n) {
        let idx: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        let mut counts: HashMap<Vec<&Value>, usize> = HashMap::new();
        for row in &output.rows {
            *counts
                .entry(idx.iter().map(|&i| &row[i]).collect())
                .or_insert(0) += 1;
        }
        // h = ln N − (1/N)·Σ c·ln c, exact 0 · ln 0 handling included
        let nf = total as f64;
        let sum: f64 = counts.values().map(|&c| (c as f64) * (c as f64).ln()).sum();
        let mut value = nf.ln() - sum / nf;
        if value < 0.0 {
            value = 0.0; // guard against -0 noise on deterministic marginals
        }
        h[mask as usize] = value;
    }
    // h(full) = ln N holds exactly under uniformity; pin it against drift
    h[(1usize << n) - 1] = (total as f64).ln();
    Ok(EntropyVector { n, h })
}

/// One line of a verification report.
#[derive(Debug, Clone, Serialize)]
pub struct SlackReport {
    pub check: String,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub pass: bool,
}

impl SlackReport {
    pub fn new(check: impl Into<String>, lhs: f64, rhs: f64, tol: f64) -> SlackReport {
        let slack = rhs - lhs;
        SlackReport {
            check: check.into(),
            lhs,
            rhs,
            slack,
            pass: slack >= -tol,
        }
    }
}

/// Check the norm constraint for (relation, V|U, p) against the empirical
/// entropy of a query output whose atom `atom_index` binds the relation:
/// (1/p)·h(U) + h(V|U) must not exceed the log-norm computed from the data.
pub fn verify_norm_constraint(
    db: &Database,
    q: &ConjunctiveQuery,
    atom_index: usize,
    h: &EntropyVector,
    u: &[String],
    v: &[String],
    p: f64,
) -> Result<SlackReport> {
    let atom = &q.atoms()[atom_index];
    let rel = db.get(&atom.relation)?;
    let attr_var = |attr: &String| -> Result<u64> {
        let pos = rel.attr_index(attr)?;
        Ok(1u64 << q.var_index(&atom.args[pos])?)
    };
    let mut u_mask = 0u64;
    for a in u {
        u_mask |= attr_var(a)?;
    }
    let mut uv_mask = u_mask;
    for a in v {
        uv_mask |= attr_var(a)?;
    }
    let hu = h.get(u_mask);
    let huv = h.get(uv_mask);
    let inv_p = if p.is_infinite() { 0.0 } else { 1.0 / p };
    let lhs = inv_p * hu + (huv - hu);
    let rhs = degree_sequence(rel, u, v)?.ln_lp_norm(p)?;
    let p_label = if p.is_infinite() { "inf".into() } else { format!("{p}") };
    Ok(SlackReport::new(
        format!(
            "norm-constraint {} deg({}|{}) p={}",
            atom.relation,
            v.join(","),
            u.join(","),
            p_label
        ),
        lhs,
        rhs,
        1e-9,
    ))
}

/// Check that an empirical entropy vector satisfies every elemental
/// inequality (it must: entropy vectors are polymatroids).
pub fn verify_shannon(h: &EntropyVector) -> Result<Vec<SlackReport>> {
    let ineqs = elemental_inequalities(h.n)?;
    Ok(ineqs
        .iter()
        .enumerate()
        .map(|(i, ineq)| SlackReport::new(format!("elemental-{i}"), 0.0, ineq.eval(h), 1e-9))
        .collect())
}

/// The closed-form inequality families checked numerically against exact
/// join sizes. The three-path family is parameterized by p ≥ 2; the triangle
/// families use squared, cubed, and cardinality norms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClosedForm {
    /// R(X,Y) ⋈ S(Y,Z) ⋈ T(Z,U) against
    /// (|R|^(p−2)·‖deg_R(X|Y)‖₂²·‖deg_S(Z|Y)‖_(p−1)^(p−1)·‖deg_T(U|Z)‖_p^p)^(1/p).
    PathMixedNorm { p: f64 },
    /// Triangle against (|R|·|S|·|T|)^(1/2).
    TriangleCards,
    /// Triangle against the product of the three squared ℓ2 norms, cube-rooted.
    TriangleQuadratic,
    /// Triangle against (‖deg_R(Y|X)‖₃³·‖deg_S(Y|Z)‖₃³·|T|⁵)^(1/6).
    TriangleCubicCard,
}

impl ClosedForm {
    pub fn name(&self) -> String {
        match self {
            ClosedForm::PathMixedNorm { p } => format!("path-mixed-norm(p={p})"),
            ClosedForm::TriangleCards => "triangle-cards".into(),
            ClosedForm::TriangleQuadratic => "triangle-quadratic".into(),
            ClosedForm::TriangleCubicCard => "triangle-cubic-card".into(),
        }
    }

    pub fn query(&self) -> ConjunctiveQuery {
        let text = match self {
            ClosedForm::PathMixedNorm { .. } => "J3(X,Y,Z,U) :- R(X,Y), S(Y,Z), T(Z,U).",
            _ => "C3(X,Y,Z) :- R(X,Y), S(Y,Z), T(Z,X).",
        };
        ConjunctiveQuery::parse(text).expect("fixed query shape parses")
    }
}

/// Evaluate one closed-form inequality on a database holding R, S, T of the
/// family's shape: the left side is the exact join size, the right side the
/// formula over true statistics. Comparison is in log space at 1e-9.
pub fn verify_closed_form(db: &Database, family: ClosedForm, cap: usize) -> Result<SlackReport> {
    let q = family.query();
    let lhs_count = exact_join(db, &q, cap)?.count() as f64;
    let lhs = lhs_count.ln();

    let r = db.get("R")?;
    let s = db.get("S")?;
    let t = db.get("T")?;
    let a0 = |rel: &crate::model::Relation, i: usize| rel.attributes()[i].to_string();

    let rhs = match family {
        ClosedForm::PathMixedNorm { p } => {
            if p < 2.0 {
                return Err(Error::Input("the mixed-norm family needs p >= 2".into()));
            }
            // deg_R(X|Y), deg_S(Z|Y), deg_T(U|Z) through attribute positions
            let r_xy = degree_sequence(r, &[a0(r, 1)], &[a0(r, 0)])?;
            let s_zy = degree_sequence(s, &[a0(s, 0)], &[a0(s, 1)])?;
            let t_uz = degree_sequence(t, &[a0(t, 0)], &[a0(t, 1)])?;
            let ln_card_r = (r.len() as f64).ln();
            ((p - 2.0) * ln_card_r
                + 2.0 * r_xy.ln_lp_norm(2.0)?
                + (p - 1.0) * s_zy.ln_lp_norm(p - 1.0)?
                + p * t_uz.ln_lp_norm(p)?)
                / p
        }
        ClosedForm::TriangleCards => {
            ((r.len() as f64).ln() + (s.len() as f64).ln() + (t.len() as f64).ln()) / 2.0
        }
        ClosedForm::TriangleQuadratic => {
            let r_yx = degree_sequence(r, &[a0(r, 0)], &[a0(r, 1)])?;
            let s_zy = degree_sequence(s, &[a0(s, 0)], &[a0(s, 1)])?;
            let t_xz = degree_sequence(t, &[a0(t, 0)], &[a0(t, 1)])?;
            (2.0 * r_yx.ln_lp_norm(2.0)?
                + 2.0 * s_zy.ln_lp_norm(2.0)?
                + 2.0 * t_xz.ln_lp_norm(2.0)?)
                / 3.0
        }
        ClosedForm::TriangleCubicCard => {
            let r_yx = degree_sequence(r, &[a0(r, 0)], &[a0(r, 1)])?;
            let s_yz = degree_sequence(s, &[a0(s, 1)], &[a0(s, 0)])?;
            (3.0 * r_yx.ln_lp_norm(3.0)?
                + 3.0 * s_yz.ln_lp_norm(3.0)?
                + 5.0 * (t.len() as f64).ln())
                / 6.0
        }
    };
    // empty joins hold trivially; avoid -inf arithmetic on the left
    let (lhs, rhs) = if lhs_count == 0.0 { (0.0, rhs.max(0.0)) } else { (lhs, rhs) };
    Ok(SlackReport::new(family.name(), lhs, rhs, 1e-9))
}
