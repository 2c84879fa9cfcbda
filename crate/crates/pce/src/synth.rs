//! Seeded random instances (small databases plus conjunctive queries) and
//! exact statistics computed from their data. The verification suites and
//! the acceptance tests both draw from here.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::bounds::CoverStatistic;
use crate::catalog::Database;
use crate::dsb::JoinBoundInput;
use crate::model::{Atom, ConjunctiveQuery, Relation, Value};
use crate::polymatroid::NormConstraint;
use crate::stats::degree_sequence;
use crate::Result;

#[derive(Debug, Clone)]
pub struct SynthOptions {
    pub max_vars: usize,
    pub max_atoms: usize,
    pub max_tuples: usize,
    /// Attribute values are drawn from 0..domain.
    pub domain: i64,
    /// Chance that a relation comes out empty.
    pub empty_chance: f64,
}

impl Default for SynthOptions {
    fn default() -> Self {
        SynthOptions {
            max_vars: 4,
            max_atoms: 3,
            max_tuples: 50,
            domain: 4,
            empty_chance: 0.05,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub db: Database,
    pub query: ConjunctiveQuery,
}

/// Draw a random query over a small variable pool and a random database for
/// it. Atom shapes share variables freely, so joins, cross products, and
/// self-joins all occur.
pub fn random_instance(rng: &mut impl Rng, opts: &SynthOptions) -> Instance {
    loop {
        if let Some(inst) = try_instance(rng, opts) {
            return inst;
        }
    }
}

fn try_instance(rng: &mut impl Rng, opts: &SynthOptions) -> Option<Instance> {
    let pool: Vec<String> = (0..rng.random_range(1..=opts.max_vars))
        .map(|i| format!("V{i}"))
        .collect();
    let n_atoms = rng.random_range(1..=opts.max_atoms);
    let mut atoms: Vec<Atom> = Vec::new();
    let mut arities: Vec<(String, usize)> = Vec::new();
    for k in 0..n_atoms {
        let (name, arity) = if !arities.is_empty() && rng.random_bool(0.2) {
            arities[rng.random_range(0..arities.len())].clone()
        } else {
            let arity = rng.random_range(1..=pool.len().min(3));
            let name = format!("R{k}");
            arities.push((name.clone(), arity));
            (name, arity)
        };
        let mut vars = pool.clone();
        vars.shuffle(rng);
        vars.truncate(arity);
        atoms.push(Atom {
            relation: name,
            args: vars,
        });
    }
    let query = ConjunctiveQuery::new("Q", Vec::new(), atoms).ok()?;

    let mut db = Database::new();
    for (name, arity) in &arities {
        let rows = if rng.random_bool(opts.empty_chance) {
            0
        } else {
            rng.random_range(1..=opts.max_tuples)
        };
        let tuples: Vec<Vec<Value>> = (0..rows)
            .map(|_| {
                (0..*arity)
                    .map(|_| Value::Int(rng.random_range(0..opts.domain)))
                    .collect()
            })
            .collect();
        let attrs: Vec<String> = (1..=*arity).map(|i| format!("A{i}")).collect();
        db.insert(Relation::new(name.clone(), attrs, tuples).ok()?).ok()?;
    }
    Some(Instance { db, query })
}

/// A random database for a fixed two-column query shape (path or triangle):
/// relations named R, S, T with two attributes each.
pub fn random_shape_db(rng: &mut impl Rng, max_tuples: usize, domain: i64) -> Database {
    let mut db = Database::new();
    for name in ["R", "S", "T"] {
        let rows = rng.random_range(1..=max_tuples);
        let tuples: Vec<Vec<Value>> = (0..rows)
            .map(|_| {
                vec![
                    Value::Int(rng.random_range(0..domain)),
                    Value::Int(rng.random_range(0..domain)),
                ]
            })
            .collect();
        db.insert(Relation::new(name, vec!["A1".into(), "A2".into()], tuples).unwrap())
            .unwrap();
    }
    db
}

fn attr_subsets(arity: usize, max_u: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for mask in 0u32..(1 << arity) {
        let subset: Vec<usize> = (0..arity).filter(|&i| mask >> i & 1 == 1).collect();
        if subset.len() <= max_u {
            out.push(subset);
        }
    }
    out
}

fn positions_to_attrs(rel: &Relation, positions: &[usize]) -> Vec<String> {
    positions.iter().map(|&i| rel.attributes()[i].clone()).collect()
}

fn positions_to_mask(q: &ConjunctiveQuery, atom: &Atom, positions: &[usize]) -> u64 {
    positions
        .iter()
        .map(|&i| 1u64 << q.var_index(&atom.args[i]).unwrap())
        .fold(0, |m, b| m | b)
}

/// Exact per-atom cardinalities.
pub fn true_cardinalities(db: &Database, q: &ConjunctiveQuery) -> Result<Vec<f64>> {
    q.atoms()
        .iter()
        .map(|a| Ok(db.get(&a.relation)?.len() as f64))
        .collect()
}

/// Cover statistics computed exactly from the data: per atom occurrence the
/// cardinality, plus (optionally) every max degree deg(rest|U) with
/// 1 ≤ |U| ≤ 2.
pub fn true_cover_stats(
    db: &Database,
    q: &ConjunctiveQuery,
    include_max_degrees: bool,
) -> Result<Vec<CoverStatistic>> {
    let mut out = Vec::new();
    for (ai, atom) in q.atoms().iter().enumerate() {
        let rel = db.get(&atom.relation)?;
        let arity = atom.args.len();
        let all: Vec<usize> = (0..arity).collect();
        out.push(CoverStatistic::new(
            ai,
            0,
            positions_to_mask(q, atom, &all),
            f64::INFINITY,
            rel.len() as f64,
            format!("|{}#{ai}|", atom.relation),
        ));
        if !include_max_degrees {
            continue;
        }
        for u in attr_subsets(arity, 2) {
            if u.is_empty() || u.len() == arity {
                continue;
            }
            let v: Vec<usize> = (0..arity).filter(|i| !u.contains(i)).collect();
            let ds = degree_sequence(rel, &positions_to_attrs(rel, &u), &positions_to_attrs(rel, &v))?;
            out.push(CoverStatistic::new(
                ai,
                positions_to_mask(q, atom, &u),
                positions_to_mask(q, atom, &v),
                f64::INFINITY,
                ds.lp_norm(f64::INFINITY)?,
                format!(
                    "deg_{}#{ai}({}|{})inf",
                    atom.relation,
                    q.mask_vars(positions_to_mask(q, atom, &v)).join(""),
                    q.mask_vars(positions_to_mask(q, atom, &u)).join("")
                ),
            ));
        }
    }
    Ok(out)
}

/// Norm constraints computed exactly from the data: for each atom occurrence
/// and each conditioning set U with |U| ≤ 2 (including the empty set), the
/// full-target sequence deg(rest|U) at every requested p.
pub fn true_norm_constraints(
    db: &Database,
    q: &ConjunctiveQuery,
    ps: &[f64],
) -> Result<Vec<NormConstraint>> {
    let mut out = Vec::new();
    for (ai, atom) in q.atoms().iter().enumerate() {
        let rel = db.get(&atom.relation)?;
        let arity = atom.args.len();
        for u in attr_subsets(arity, 2.min(arity)) {
            let v: Vec<usize> = (0..arity).filter(|i| !u.contains(i)).collect();
            let ds = degree_sequence(rel, &positions_to_attrs(rel, &u), &positions_to_attrs(rel, &v))?;
            for &p in ps {
                // deg(∅|U) only matters through finite p (distinct counts)
                if v.is_empty() && p.is_infinite() {
                    continue;
                }
                out.push(NormConstraint::new(
                    positions_to_mask(q, atom, &u),
                    positions_to_mask(q, atom, &v),
                    p,
                    ds.ln_lp_norm(p)?,
                    format!(
                        "deg_{}#{ai}({}|{})_{p}",
                        atom.relation,
                        q.mask_vars(positions_to_mask(q, atom, &v)).join(""),
                        q.mask_vars(positions_to_mask(q, atom, &u)).join("")
                    ),
                ));
            }
        }
    }
    Ok(out)
}

/// Restate cover statistics as norm constraints so the entropy bound sees
/// exactly the same information.
pub fn norm_constraints_from_cover(stats: &[CoverStatistic]) -> Vec<NormConstraint> {
    stats
        .iter()
        .map(|s| NormConstraint::new(s.u_mask, s.v_mask, s.p, s.value.ln(), s.label.clone()))
        .collect()
}

/// One more true statistic drawn at random, for monotonicity checks.
pub fn random_extra_constraint(
    rng: &mut impl Rng,
    db: &Database,
    q: &ConjunctiveQuery,
) -> Result<NormConstraint> {
    let ai = rng.random_range(0..q.atoms().len());
    let atom = &q.atoms()[ai];
    let rel = db.get(&atom.relation)?;
    let arity = atom.args.len();
    let subsets = attr_subsets(arity, arity);
    let u = subsets[rng.random_range(0..subsets.len())].clone();
    let v: Vec<usize> = (0..arity).filter(|i| !u.contains(i)).collect();
    let ps = [1.0, 1.5, 2.0, 3.0, 4.0, f64::INFINITY];
    let p = ps[rng.random_range(0..ps.len())];
    let ds = degree_sequence(rel, &positions_to_attrs(rel, &u), &positions_to_attrs(rel, &v))?;
    Ok(NormConstraint::new(
        positions_to_mask(q, atom, &u),
        positions_to_mask(q, atom, &v),
        p,
        ds.ln_lp_norm(p)?,
        "extra",
    ))
}

/// Full degree sequences over the shared variables of a two-atom query,
/// exact from the data; `None` for other shapes.
pub fn dsb_input(db: &Database, q: &ConjunctiveQuery) -> Result<Option<JoinBoundInput>> {
    if q.atoms().len() != 2 {
        return Ok(None);
    }
    let a0 = &q.atoms()[0];
    let a1 = &q.atoms()[1];
    let shared: Vec<&String> = a0.args.iter().filter(|v| a1.args.contains(v)).collect();
    let mut seqs = Vec::new();
    for atom in [a0, a1] {
        let rel = db.get(&atom.relation)?;
        let u_attrs: Vec<String> = atom
            .args
            .iter()
            .enumerate()
            .filter(|(_, v)| shared.contains(v))
            .map(|(i, _)| rel.attributes()[i].clone())
            .collect();
        seqs.push(degree_sequence(rel, &u_attrs, &rel.attributes().to_vec())?);
    }
    let join_var = shared
        .iter()
        .map(|v| v.as_str())
        .collect::<Vec<_>>()
        .join(",");
    Ok(Some(JoinBoundInput::from_sequences(
        &seqs[0], &seqs[1], join_var,
    )))
}
