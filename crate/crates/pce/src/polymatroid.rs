//! The entropy-based upper bound: a linear program over vectors indexed by
//! variable subsets, constrained by the elemental monotonicity and
//! submodularity inequalities plus one norm constraint per statistic.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::bounds::{BoundResult, Witness};
use crate::lp::{self, Cmp, Direction, LinearProgram, Status};
use crate::model::{Atom, ConjunctiveQuery};
use crate::{Error, Result};

/// A value per subset of query variables, indexed by bitmask; `h[0] = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyVector {
    pub n: usize,
    pub h: Vec<f64>,
}

impl EntropyVector {
    pub fn get(&self, mask: u64) -> f64 {
        self.h[mask as usize]
    }
}

/// One statistic constraint: (1/p)·h(U) + h(V|U) ≤ log_norm, with the
/// conditional term h(V|U) = h(U∪V) − h(U). For p = ∞ the h(U)/p term
/// vanishes.
#[derive(Debug, Clone)]
pub struct NormConstraint {
    pub u_mask: u64,
    pub v_mask: u64,
    pub p: f64,
    pub log_norm: f64,
    pub label: String,
}

impl NormConstraint {
    pub fn new(
        u_mask: u64,
        v_mask: u64,
        p: f64,
        log_norm: f64,
        label: impl Into<String>,
    ) -> NormConstraint {
        NormConstraint {
            u_mask,
            v_mask,
            p,
            log_norm,
            label: label.into(),
        }
    }

    /// Left-hand side of the constraint evaluated on a concrete vector.
    pub fn lhs(&self, h: &EntropyVector) -> f64 {
        let hu = h.get(self.u_mask);
        let huv = h.get(self.u_mask | self.v_mask);
        let inv_p = if self.p.is_infinite() { 0.0 } else { 1.0 / self.p };
        inv_p * hu + huv - hu
    }
}

/// A sparse inequality Σ coeff·h(mask) ≥ 0 over subset-indexed vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearInequality {
    pub terms: Vec<(u64, f64)>,
}

impl LinearInequality {
    pub fn eval(&self, h: &EntropyVector) -> f64 {
        self.terms.iter().map(|&(m, c)| c * h.get(m)).sum()
    }
}

/// The elemental inequalities over n variables: n monotonicity constraints
/// h(Ω) − h(Ω∖{Xi}) ≥ 0 and n(n−1)·2^(n−3) submodularity constraints
/// h(W∪{Xi}) + h(W∪{Xj}) − h(W∪{Xi,Xj}) − h(W) ≥ 0 for i < j and
/// W ⊆ Ω∖{Xi,Xj}. Lists are memoized per n since they depend on nothing
/// else.
pub fn elemental_inequalities(n: usize) -> Result<Arc<Vec<LinearInequality>>> {
    if n == 0 || n > 14 {
        return Err(Error::Unsupported(format!(
            "elemental inequalities are generated for 1..=14 variables, got {n}"
        )));
    }
    static CACHE: OnceLock<Mutex<BTreeMap<usize, Arc<Vec<LinearInequality>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(BTreeMap::new()));
    let mut guard = cache.lock().expect("inequality cache poisoned");
    if let Some(list) = guard.get(&n) {
        return Ok(Arc::clone(list));
    }
    let full = (1u64 << n) - 1;
    let mut out = Vec::new();
    for i in 0..n {
        out.push(LinearInequality {
            terms: vec![(full, 1.0), (full & !(1 << i), -1.0)],
        });
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let rest = full & !(1 << i) & !(1 << j);
            let mut w = 0u64;
            loop {
                let mut terms = vec![
                    (w | (1 << i), 1.0),
                    (w | (1 << j), 1.0),
                    (w | (1 << i) | (1 << j), -1.0),
                ];
                if w != 0 {
                    terms.push((w, -1.0));
                }
                out.push(LinearInequality { terms });
                if w == rest {
                    break;
                }
                // next subset of `rest`
                w = (w.wrapping_sub(rest)) & rest;
            }
        }
    }
    let arc = Arc::new(out);
    guard.insert(n, Arc::clone(&arc));
    Ok(arc)
}

/// Entropy-LP upper bound: maximize h(objective) subject to the elemental
/// inequalities and the statistics constraints. The default objective is the
/// full variable set; a subset implements the group-by estimate.
pub fn polyb(
    q: &ConjunctiveQuery,
    constraints: &[NormConstraint],
    objective_mask: u64,
) -> Result<BoundResult> {
    let n = q.num_vars();
    if n > 14 {
        return Err(Error::Unsupported(format!(
            "query has {n} variables, over the entropy-LP cap of 14"
        )));
    }
    let full = q.full_mask();
    if objective_mask & !full != 0 {
        return Err(Error::Input("objective variables outside the query".into()));
    }
    if objective_mask == 0 {
        return Ok(BoundResult::from_log(
            0.0,
            Witness::Entropy {
                h: vec![0.0; 1 << n],
            },
        ));
    }
    // an empty relation forces an empty output
    if constraints.iter().any(|c| c.log_norm == f64::NEG_INFINITY) {
        return Ok(BoundResult::from_log(
            f64::NEG_INFINITY,
            Witness::Entropy {
                h: vec![0.0; 1 << n],
            },
        ));
    }

    // h(∅) is identically zero and is eliminated: variable index = mask − 1
    let num_vars = (1usize << n) - 1;
    let mut prog = LinearProgram::new(Direction::Maximize, num_vars);
    prog.objective[objective_mask as usize - 1] = 1.0;

    for c in constraints {
        let u = c.u_mask;
        let uv = c.u_mask | c.v_mask;
        let mut coeffs = vec![0.0; num_vars];
        let inv_p = if c.p.is_infinite() { 0.0 } else { 1.0 / c.p };
        if uv != 0 {
            coeffs[uv as usize - 1] += 1.0;
        }
        if u != 0 {
            coeffs[u as usize - 1] += inv_p - 1.0;
        }
        if coeffs.iter().all(|&x| x == 0.0) {
            continue; // vacuous, e.g. p = ∞ with V ⊆ U
        }
        prog.constrain(coeffs, Cmp::Le, c.log_norm);
    }
    for ineq in elemental_inequalities(n)?.iter() {
        let mut coeffs = vec![0.0; num_vars];
        for &(mask, coeff) in &ineq.terms {
            if mask != 0 {
                coeffs[mask as usize - 1] += coeff;
            }
        }
        prog.constrain(coeffs, Cmp::Ge, 0.0);
    }

    let sol = lp::solve(&prog)?;
    match sol.status {
        Status::Optimal => {
            let mut h = vec![0.0; 1 << n];
            for (i, &x) in sol.point.iter().enumerate() {
                h[i + 1] = x;
            }
            Ok(BoundResult::from_log(sol.value, Witness::Entropy { h }))
        }
        Status::Unbounded => Err(Error::Unbounded(
            "statistics do not bound the query: some variable set is unconstrained".into(),
        )),
        Status::Infeasible => Err(Error::Numeric(
            "entropy program reported infeasible; statistics are inconsistent".into(),
        )),
    }
}

/// Per atom, fuse every variable that appears in no other atom into a single
/// representative, shrinking the entropy LP. Returns the reduced query and
/// the old-name → new-name mapping.
pub fn drop_nonjoin_vars(q: &ConjunctiveQuery) -> (ConjunctiveQuery, BTreeMap<String, String>) {
    let mut occurrences: BTreeMap<&str, usize> = BTreeMap::new();
    for atom in q.atoms() {
        for v in &atom.args {
            *occurrences.entry(v).or_insert(0) += 1;
        }
    }
    let mut mapping: BTreeMap<String, String> = BTreeMap::new();
    let mut atoms = Vec::with_capacity(q.atoms().len());
    for atom in q.atoms() {
        let exclusive: Vec<&String> = atom
            .args
            .iter()
            .filter(|v| occurrences[v.as_str()] == 1)
            .collect();
        let rep = exclusive.first().map(|v| (*v).clone());
        let mut args = Vec::new();
        for v in &atom.args {
            if occurrences[v.as_str()] == 1 {
                let rep = rep.as_ref().unwrap();
                mapping.insert(v.clone(), rep.clone());
                if v == rep {
                    args.push(v.clone());
                }
            } else {
                mapping.insert(v.clone(), v.clone());
                args.push(v.clone());
            }
        }
        atoms.push(Atom {
            relation: atom.relation.clone(),
            args,
        });
    }
    let mut head = Vec::new();
    for v in q.head_vars() {
        let mapped = mapping[v].clone();
        if !head.contains(&mapped) {
            head.push(mapped);
        }
    }
    let reduced = ConjunctiveQuery::new(q.name(), head, atoms)
        .expect("reduction preserves query well-formedness");
    (reduced, mapping)
}

/// Translate a variable mask of `from` into the corresponding mask of `to`
/// through a fusion mapping.
pub fn remap_mask(
    from: &ConjunctiveQuery,
    to: &ConjunctiveQuery,
    mapping: &BTreeMap<String, String>,
    mask: u64,
) -> Result<u64> {
    let mut out = 0u64;
    for (i, v) in from.vars().iter().enumerate() {
        if mask >> i & 1 == 1 {
            let target = mapping
                .get(v)
                .ok_or_else(|| Error::Input(format!("variable {v} missing from mapping")))?;
            out |= 1u64 << to.var_index(target)?;
        }
    }
    Ok(out)
}

/// Remap norm constraints through a fusion mapping.
pub fn remap_constraints(
    from: &ConjunctiveQuery,
    to: &ConjunctiveQuery,
    mapping: &BTreeMap<String, String>,
    constraints: &[NormConstraint],
) -> Result<Vec<NormConstraint>> {
    constraints
        .iter()
        .map(|c| {
            Ok(NormConstraint {
                u_mask: remap_mask(from, to, mapping, c.u_mask)?,
                v_mask: remap_mask(from, to, mapping, c.v_mask)?,
                p: c.p,
                log_norm: c.log_norm,
                label: c.label.clone(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(text: &str) -> ConjunctiveQuery {
        ConjunctiveQuery::parse(text).unwrap()
    }

    fn nc(q: &ConjunctiveQuery, u: &[&str], v: &[&str], p: f64, norm: f64) -> NormConstraint {
        NormConstraint::new(
            q.var_mask(u.iter().copied()).unwrap(),
            q.var_mask(v.iter().copied()).unwrap(),
            p,
            norm.ln(),
            format!("deg({}|{})_{p}", v.join(""), u.join("")),
        )
    }

    #[test]
    fn elemental_counts_match_the_formula() {
        assert_eq!(elemental_inequalities(1).unwrap().len(), 1);
        assert_eq!(elemental_inequalities(2).unwrap().len(), 3);
        assert_eq!(elemental_inequalities(3).unwrap().len(), 9);
        assert_eq!(elemental_inequalities(4).unwrap().len(), 28);
        assert_eq!(elemental_inequalities(5).unwrap().len(), 85);
        assert!(elemental_inequalities(0).is_err());
        assert!(elemental_inequalities(15).is_err());
        // memoized lists are shared
        let a = elemental_inequalities(3).unwrap();
        let b = elemental_inequalities(3).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
    }

    #[test]
    fn two_way_join_with_quadratic_norms() {
        // both sides constrain through their ℓ2 norms: bound (√18)² = 18
        let j2 = q("J2(X,Y,Z) :- R(X,Y), S(Y,Z).");
        let constraints = vec![
            nc(&j2, &["Y"], &["X"], 2.0, 18f64.sqrt()),
            nc(&j2, &["Y"], &["Z"], 2.0, 18f64.sqrt()),
        ];
        let r = polyb(&j2, &constraints, j2.full_mask()).unwrap();
        assert!((r.bound - 18.0).abs() < 1e-6, "got {}", r.bound);
    }

    #[test]
    fn triangle_with_cardinalities_only() {
        let c3 = q("C3(X,Y,Z) :- R(X,Y), S(Y,Z), T(Z,X).");
        let constraints = vec![
            nc(&c3, &[], &["X", "Y"], 1.0, 4.0),
            nc(&c3, &[], &["Y", "Z"], 1.0, 4.0),
            nc(&c3, &[], &["Z", "X"], 1.0, 4.0),
        ];
        let r = polyb(&c3, &constraints, c3.full_mask()).unwrap();
        assert!((r.bound - 8.0).abs() < 1e-6, "got {}", r.bound);
        if let Witness::Entropy { h } = &r.witness {
            assert!((h[c3.full_mask() as usize] - 8f64.ln()).abs() < 1e-9);
        } else {
            panic!("expected entropy witness");
        }
    }

    #[test]
    fn unbounded_when_statistics_are_missing() {
        let single = q("Q(X) :- R(X).");
        assert!(matches!(
            polyb(&single, &[], single.full_mask()),
            Err(Error::Unbounded(_))
        ));
    }

    #[test]
    fn group_by_objective_and_zero_statistics() {
        let j2 = q("J2(X,Y,Z) :- R(X,Y), S(Y,Z).");
        let constraints = vec![
            nc(&j2, &[], &["X", "Y"], 1.0, 10.0),
            nc(&j2, &[], &["Y", "Z"], 1.0, 30.0),
        ];
        // projecting onto one atom's variables cannot exceed that cardinality
        let r = polyb(&j2, &constraints, j2.var_mask(["X", "Y"]).unwrap()).unwrap();
        assert!(r.bound <= 10.0 + 1e-6);
        // empty objective set is the trivially single empty tuple
        let r = polyb(&j2, &constraints, 0).unwrap();
        assert!((r.bound - 1.0).abs() < 1e-12);
        // a zero statistic collapses everything
        let mut zeroed = constraints;
        zeroed.push(NormConstraint::new(
            j2.var_mask(["Y"]).unwrap(),
            j2.var_mask(["Z"]).unwrap(),
            1.0,
            f64::NEG_INFINITY,
            "empty",
        ));
        let r = polyb(&j2, &zeroed, j2.full_mask()).unwrap();
        assert_eq!(r.bound, 0.0);
    }

    #[test]
    fn polyb_never_exceeds_the_cover_bounds() {
        use crate::bounds::{agm_bound, chain_bound, CoverStatistic};
        let j2 = q("J2(X,Y,Z) :- R(X,Y), S(Y,Z).");
        let (card_r, card_s, a, b) = (20.0, 12.0, 4.0, 3.0);
        let cover = vec![
            CoverStatistic::new(0, 0, j2.var_mask(["X", "Y"]).unwrap(), f64::INFINITY, card_r, "|R|"),
            CoverStatistic::new(1, 0, j2.var_mask(["Y", "Z"]).unwrap(), f64::INFINITY, card_s, "|S|"),
            CoverStatistic::new(
                0,
                j2.var_mask(["Y"]).unwrap(),
                j2.var_mask(["X"]).unwrap(),
                f64::INFINITY,
                a,
                "a",
            ),
            CoverStatistic::new(
                1,
                j2.var_mask(["Y"]).unwrap(),
                j2.var_mask(["Z"]).unwrap(),
                f64::INFINITY,
                b,
                "b",
            ),
        ];
        let constraints: Vec<NormConstraint> = cover
            .iter()
            .map(|s| NormConstraint::new(s.u_mask, s.v_mask, s.p, s.value.ln(), s.label.clone()))
            .collect();
        let pb = polyb(&j2, &constraints, j2.full_mask()).unwrap();
        let cb = chain_bound(&j2, &cover, 8).unwrap();
        let agm = agm_bound(&j2, &[card_r, card_s]).unwrap();
        assert!(pb.log_bound <= cb.log_bound + 1e-6);
        assert!(cb.log_bound <= agm.log_bound + 1e-6);
    }

    #[test]
    fn fusing_exclusive_variables_preserves_the_bound() {
        let wide = q("Q(V) :- R(X,Y,Z,U,V), S(V,W,K,L).");
        let (reduced, mapping) = drop_nonjoin_vars(&wide);
        assert_eq!(reduced.to_string(), "Q(V) :- R(X,V), S(V,W).");
        assert_eq!(mapping["Y"], "X");
        assert_eq!(mapping["K"], "W");
        assert_eq!(mapping["V"], "V");

        // statistics over full atoms remap exactly
        let constraints = vec![
            nc(&wide, &[], &["X", "Y", "Z", "U", "V"], 1.0, 100.0),
            nc(&wide, &[], &["V", "W", "K", "L"], 1.0, 50.0),
            nc(&wide, &["V"], &["W", "K", "L"], f64::INFINITY, 5.0),
        ];
        let remapped = remap_constraints(&wide, &reduced, &mapping, &constraints).unwrap();
        let before = polyb(&wide, &constraints, wide.full_mask()).unwrap();
        let after = polyb(&reduced, &remapped, reduced.full_mask()).unwrap();
        assert!(
            (before.log_bound - after.log_bound).abs() < 1e-9,
            "{} vs {}",
            before.log_bound,
            after.log_bound
        );

        // every variable joining: unchanged
        let c3 = q("C3(X,Y,Z) :- R(X,Y), S(Y,Z), T(Z,X).");
        let (reduced, _) = drop_nonjoin_vars(&c3);
        assert_eq!(reduced, c3);

        // single atom: everything fuses into the first variable
        let single = q("Q(X,Y,Z) :- R(X,Y,Z).");
        let (reduced, mapping) = drop_nonjoin_vars(&single);
        assert_eq!(reduced.to_string(), "Q(X) :- R(X).");
        let constraints = vec![nc(&single, &[], &["X", "Y", "Z"], 1.0, 42.0)];
        let remapped = remap_constraints(&single, &reduced, &mapping, &constraints).unwrap();
        let before = polyb(&single, &constraints, single.full_mask()).unwrap();
        let after = polyb(&reduced, &remapped, reduced.full_mask()).unwrap();
        assert!((before.log_bound - after.log_bound).abs() < 1e-9);
    }

    #[test]
    fn adding_statistics_never_hurts() {
        let j2 = q("J2(X,Y,Z) :- R(X,Y), S(Y,Z).");
        let base = vec![
            nc(&j2, &[], &["X", "Y"], 1.0, 30.0),
            nc(&j2, &[], &["Y", "Z"], 1.0, 40.0),
        ];
        let with_extra = {
            let mut v = base.clone();
            v.push(nc(&j2, &["Y"], &["Z"], f64::INFINITY, 2.0));
            v
        };
        let b0 = polyb(&j2, &base, j2.full_mask()).unwrap();
        let b1 = polyb(&j2, &with_extra, j2.full_mask()).unwrap();
        assert!(b1.log_bound <= b0.log_bound + 1e-9);
    }
}
