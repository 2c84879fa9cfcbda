//! Wires a statistics catalog to a parsed query: resolves predicates,
//! instantiates per-atom statistics, runs the requested bounding methods,
//! and renders the combined report.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::bounds::{
    agm_bound, bound_sketch, chain_bound, BoundResult, CoverStatistic, Witness,
};
use crate::catalog::{RelationMeta, StatisticsCatalog};
use crate::dsb::{dsb_join_bound, JoinBoundInput};
use crate::model::ConjunctiveQuery;
use crate::polymatroid::{polyb, NormConstraint};
use crate::stats::{select_stat, PredicateExpr};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Agm,
    Cb,
    BoundSketch,
    PolyB,
    Dsb,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Agm,
        Method::Cb,
        Method::BoundSketch,
        Method::PolyB,
        Method::Dsb,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Agm => "agm",
            Method::Cb => "cb",
            Method::BoundSketch => "boundsketch",
            Method::PolyB => "polyb",
            Method::Dsb => "dsb",
        }
    }

    pub fn parse_list(text: &str) -> Result<Vec<Method>> {
        text.split(',')
            .map(|tok| match tok.trim() {
                "agm" => Ok(Method::Agm),
                "cb" => Ok(Method::Cb),
                "boundsketch" => Ok(Method::BoundSketch),
                "polyb" => Ok(Method::PolyB),
                "dsb" => Ok(Method::Dsb),
                other => Err(Error::Input(format!(
                    "unknown method `{other}`; expected agm,cb,boundsketch,polyb,dsb"
                ))),
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct EstimateOptions {
    pub methods: Vec<Method>,
    pub pred: PredicateExpr,
    pub max_vars: usize,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        EstimateOptions {
            methods: Method::ALL.to_vec(),
            pred: PredicateExpr::None,
            max_vars: 8,
        }
    }
}

/// Numbers in reports are decimal strings with 12 significant digits, shared
/// verbatim between the text and JSON renderings.
pub fn fmt_sig12(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{:.11e}", x)
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodStatus {
    Ok,
    Unavailable,
    Failed,
}

#[derive(Debug, Clone, Serialize)]
pub struct MethodReport {
    pub method: &'static str,
    pub status: MethodStatus,
    /// Bound as a count, 12 significant digits.
    pub bound: Option<String>,
    /// Base-2 log of the bound, for readability.
    pub log2: Option<String>,
    pub witness: Option<String>,
    pub reason: Option<String>,
    #[serde(skip)]
    pub log_bound: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimateReport {
    pub query: String,
    pub methods: Vec<MethodReport>,
    /// (method name, bound) of the smallest successful bound.
    pub minimum: Option<MinimumReport>,
    /// Relations whose source files changed since the catalog was built.
    pub stale: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MinimumReport {
    pub method: &'static str,
    pub bound: String,
    pub log2: String,
}

impl EstimateReport {
    pub fn any_ok(&self) -> bool {
        self.methods
            .iter()
            .any(|m| matches!(m.status, MethodStatus::Ok))
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "query: {}", self.query);
        for warn in &self.stale {
            let _ = writeln!(out, "warning: statistics for {warn} are stale (source file changed)");
        }
        let _ = writeln!(out, "{:<12} {:<22} {:<18} note", "method", "bound", "log2");
        for m in &self.methods {
            match m.status {
                MethodStatus::Ok => {
                    let _ = writeln!(
                        out,
                        "{:<12} {:<22} {:<18} {}",
                        m.method,
                        m.bound.as_deref().unwrap_or("-"),
                        m.log2.as_deref().unwrap_or("-"),
                        m.witness.as_deref().unwrap_or("")
                    );
                }
                MethodStatus::Unavailable => {
                    let _ = writeln!(
                        out,
                        "{:<12} {:<22} {:<18} unavailable: {}",
                        m.method,
                        "-",
                        "-",
                        m.reason.as_deref().unwrap_or("")
                    );
                }
                MethodStatus::Failed => {
                    let _ = writeln!(
                        out,
                        "{:<12} {:<22} {:<18} failed: {}",
                        m.method,
                        "-",
                        "-",
                        m.reason.as_deref().unwrap_or("")
                    );
                }
            }
        }
        match &self.minimum {
            Some(min) => {
                let _ = writeln!(
                    out,
                    "{:<12} {:<22} {:<18} via {}",
                    "minimum", min.bound, min.log2, min.method
                );
            }
            None => {
                let _ = writeln!(out, "minimum      -                      -                  no method produced a bound");
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Split a (possibly relation-qualified) predicate into one tree per
/// relation. Conjunctions may span relations; disjunctions must stay within
/// one relation, since a cross-relation OR does not restrict any single
/// relation's statistics.
pub fn resolve_predicate(
    pred: &PredicateExpr,
    metas: &[&RelationMeta],
) -> Result<BTreeMap<String, PredicateExpr>> {
    fn leaf_relation(attr: &str, metas: &[&RelationMeta]) -> Result<(String, String)> {
        if let Some((rel, a)) = attr.split_once('.') {
            let meta = metas
                .iter()
                .find(|m| m.name == rel)
                .ok_or_else(|| Error::Input(format!("predicate references unknown relation {rel}")))?;
            if !meta.attributes.iter().any(|x| x == a) {
                return Err(Error::Input(format!("relation {rel} has no attribute {a}")));
            }
            return Ok((rel.to_string(), a.to_string()));
        }
        let owners: Vec<&&RelationMeta> = metas
            .iter()
            .filter(|m| m.attributes.iter().any(|x| x == attr))
            .collect();
        match owners.len() {
            0 => Err(Error::Input(format!(
                "predicate attribute {attr} does not appear in any query relation"
            ))),
            1 => Ok((owners[0].name.clone(), attr.to_string())),
            _ => Err(Error::Input(format!(
                "predicate attribute {attr} is ambiguous; qualify it as Relation.{attr}"
            ))),
        }
    }

    fn rec(
        pred: &PredicateExpr,
        metas: &[&RelationMeta],
    ) -> Result<BTreeMap<String, PredicateExpr>> {
        let mut out: BTreeMap<String, PredicateExpr> = BTreeMap::new();
        match pred {
            PredicateExpr::None => {}
            PredicateExpr::Eq { attr, value } => {
                let (rel, a) = leaf_relation(attr, metas)?;
                out.insert(
                    rel,
                    PredicateExpr::Eq {
                        attr: a,
                        value: value.clone(),
                    },
                );
            }
            PredicateExpr::In { attr, values } => {
                let (rel, a) = leaf_relation(attr, metas)?;
                out.insert(
                    rel,
                    PredicateExpr::In {
                        attr: a,
                        values: values.clone(),
                    },
                );
            }
            PredicateExpr::And(children) => {
                for ch in children {
                    for (rel, tree) in rec(ch, metas)? {
                        match out.remove(&rel) {
                            Some(PredicateExpr::And(mut items)) => {
                                items.push(tree);
                                out.insert(rel, PredicateExpr::And(items));
                            }
                            Some(existing) => {
                                out.insert(rel, PredicateExpr::And(vec![existing, tree]));
                            }
                            None => {
                                out.insert(rel, tree);
                            }
                        }
                    }
                }
            }
            PredicateExpr::Or(children) => {
                let mut rel: Option<String> = None;
                let mut items = Vec::new();
                for ch in children {
                    let m = rec(ch, metas)?;
                    if m.len() != 1 {
                        return Err(Error::Input(
                            "a disjunction must reference exactly one relation".into(),
                        ));
                    }
                    let (r, tree) = m.into_iter().next().unwrap();
                    match &rel {
                        None => rel = Some(r),
                        Some(prev) if *prev == r => {}
                        Some(prev) => {
                            return Err(Error::Input(format!(
                                "a disjunction may not mix relations ({prev} and {r})"
                            )))
                        }
                    }
                    items.push(tree);
                }
                if let Some(r) = rel {
                    out.insert(r, PredicateExpr::Or(items));
                }
            }
        }
        Ok(out)
    }

    rec(pred, metas)
}

struct Binder<'a> {
    catalog: &'a StatisticsCatalog,
    q: &'a ConjunctiveQuery,
    preds: BTreeMap<String, PredicateExpr>,
}

impl<'a> Binder<'a> {
    fn new(
        catalog: &'a StatisticsCatalog,
        q: &'a ConjunctiveQuery,
        pred: &PredicateExpr,
    ) -> Result<Binder<'a>> {
        let metas: Vec<&RelationMeta> = q
            .atoms()
            .iter()
            .map(|a| {
                catalog.meta.relation(&a.relation).ok_or_else(|| {
                    Error::MissingStat(format!("catalog has no relation {}", a.relation))
                })
            })
            .collect::<Result<_>>()?;
        for (atom, meta) in q.atoms().iter().zip(&metas) {
            if atom.args.len() != meta.attributes.len() {
                return Err(Error::Input(format!(
                    "atom {}({}) does not match the relation's arity {}",
                    atom.relation,
                    atom.args.join(","),
                    meta.attributes.len()
                )));
            }
        }
        let preds = resolve_predicate(pred, &metas)?;
        Ok(Binder { catalog, q, preds })
    }

    fn meta(&self, relation: &str) -> &RelationMeta {
        self.catalog
            .meta
            .relation(relation)
            .expect("checked at construction")
    }

    fn pred_for(&self, relation: &str) -> &PredicateExpr {
        self.preds.get(relation).unwrap_or(&PredicateExpr::None)
    }

    fn attrs_to_mask(&self, atom_index: usize, attrs: &[String]) -> Result<u64> {
        let atom = &self.q.atoms()[atom_index];
        let meta = self.meta(&atom.relation);
        let mut mask = 0u64;
        for a in attrs {
            let pos = meta
                .attributes
                .iter()
                .position(|x| x == a)
                .ok_or_else(|| Error::Input(format!("unknown attribute {a}")))?;
            mask |= 1u64 << self.q.var_index(&atom.args[pos])?;
        }
        Ok(mask)
    }

    fn cardinalities(&self) -> Result<Vec<f64>> {
        self.q
            .atoms()
            .iter()
            .map(|atom| {
                let meta = self.meta(&atom.relation);
                select_stat(
                    self.catalog,
                    &atom.relation,
                    &[],
                    &meta.attributes,
                    1.0,
                    self.pred_for(&atom.relation),
                )
            })
            .collect()
    }

    /// Max-degree statistics for every ∞-norm catalog key, instantiated per
    /// atom occurrence, plus cardinalities recast as max degrees.
    fn cover_stats(&self) -> Result<Vec<CoverStatistic>> {
        let mut out: BTreeMap<(usize, u64, u64), CoverStatistic> = BTreeMap::new();
        for (ai, atom) in self.q.atoms().iter().enumerate() {
            let pred = self.pred_for(&atom.relation);
            for (u, v, p) in self.catalog.global_keys(&atom.relation) {
                let is_card = u.is_empty() && p == 1.0 && {
                    let meta = self.meta(&atom.relation);
                    let mut sv = v.clone();
                    sv.sort();
                    let mut sa = meta.attributes.clone();
                    sa.sort();
                    sv == sa
                };
                if !p.is_infinite() && !is_card {
                    continue;
                }
                let value = select_stat(self.catalog, &atom.relation, &u, &v, p, pred)?;
                let stat = CoverStatistic::new(
                    ai,
                    self.attrs_to_mask(ai, &u)?,
                    self.attrs_to_mask(ai, &v)?,
                    f64::INFINITY,
                    value,
                    format!(
                        "deg_{}#{ai}({}|{})",
                        atom.relation,
                        v.join(","),
                        u.join(",")
                    ),
                );
                out.entry((ai, stat.u_mask, stat.v_mask))
                    .and_modify(|existing| {
                        if stat.value < existing.value {
                            *existing = stat.clone();
                        }
                    })
                    .or_insert(stat);
            }
        }
        Ok(out.into_values().collect())
    }

    /// Every global catalog key as a norm constraint for the entropy bound.
    fn norm_constraints(&self) -> Result<Vec<NormConstraint>> {
        let mut out = Vec::new();
        for (ai, atom) in self.q.atoms().iter().enumerate() {
            let pred = self.pred_for(&atom.relation);
            for (u, v, p) in self.catalog.global_keys(&atom.relation) {
                let value = select_stat(self.catalog, &atom.relation, &u, &v, p, pred)?;
                out.push(NormConstraint::new(
                    self.attrs_to_mask(ai, &u)?,
                    self.attrs_to_mask(ai, &v)?,
                    p,
                    value.ln(),
                    format!(
                        "deg_{}#{ai}({}|{})_{}",
                        atom.relation,
                        v.join(","),
                        u.join(","),
                        if p.is_infinite() { "inf".into() } else { p.to_string() }
                    ),
                ));
            }
        }
        Ok(out)
    }

    /// Stored full sequences over the join attributes of a two-atom query.
    fn dsb_input(&self) -> Result<JoinBoundInput> {
        if self.q.atoms().len() != 2 {
            return Err(Error::Unsupported("requires a 2-atom query".into()));
        }
        let a0 = &self.q.atoms()[0];
        let a1 = &self.q.atoms()[1];
        let shared: Vec<&String> = a0.args.iter().filter(|v| a1.args.contains(v)).collect();
        let mut seqs = Vec::new();
        for atom in [a0, a1] {
            let meta = self.meta(&atom.relation);
            let u_attrs: Vec<String> = atom
                .args
                .iter()
                .enumerate()
                .filter(|(_, v)| shared.contains(v))
                .map(|(i, _)| meta.attributes[i].clone())
                .collect();
            let entry = self
                .catalog
                .lookup_sequence(&atom.relation, &u_attrs)
                .filter(|e| {
                    let mut all: Vec<String> = e.cond_attrs.clone();
                    all.extend(e.tgt_attrs.iter().cloned());
                    all.sort();
                    all.dedup();
                    let mut want = meta.attributes.clone();
                    want.sort();
                    all == want
                })
                .ok_or_else(|| {
                    Error::MissingStat(format!(
                        "no stored degree sequence for {} over ({})",
                        atom.relation,
                        u_attrs.join(",")
                    ))
                })?;
            seqs.push(entry.sequence.clone());
        }
        let join_var = shared
            .iter()
            .map(|v| v.as_str())
            .collect::<Vec<_>>()
            .join(",");
        Ok(JoinBoundInput {
            left: seqs[0].clone(),
            right: seqs[1].clone(),
            join_var,
        })
    }
}

fn witness_summary(
    q: &ConjunctiveQuery,
    stats: &[CoverStatistic],
    result: &BoundResult,
) -> String {
    match &result.witness {
        Witness::EdgeCover { weights } => {
            let parts: Vec<String> = weights
                .iter()
                .enumerate()
                .filter(|(_, w)| **w > 1e-12)
                .map(|(i, w)| format!("{}:{w:.4}", q.atoms()[i].relation))
                .collect();
            format!("cover {}", parts.join(" "))
        }
        Witness::ChainCover { order, weights } => {
            let vars: Vec<&str> = order.0.iter().map(|&i| q.vars()[i].as_str()).collect();
            let parts: Vec<String> = weights
                .iter()
                .enumerate()
                .filter(|(_, w)| **w > 1e-12)
                .map(|(i, w)| format!("{}:{w:.4}", stats[i].label))
                .collect();
            format!("order {} cover {}", vars.join(","), parts.join(" "))
        }
        Witness::LatticePath { stats: path } => {
            let parts: Vec<&str> = path.iter().map(|&i| stats[i].label.as_str()).collect();
            format!("path {}", parts.join(" * "))
        }
        Witness::Entropy { h } => {
            format!("entropy vector over {} subsets", h.len())
        }
        Witness::Direct => "rank-aligned product of stored sequences".into(),
    }
}

fn ok_report(
    method: Method,
    q: &ConjunctiveQuery,
    stats: &[CoverStatistic],
    result: &BoundResult,
) -> MethodReport {
    MethodReport {
        method: method.name(),
        status: MethodStatus::Ok,
        bound: Some(fmt_sig12(result.bound)),
        log2: Some(fmt_sig12(result.log_bound / std::f64::consts::LN_2)),
        witness: Some(witness_summary(q, stats, result)),
        reason: None,
        log_bound: result.log_bound,
    }
}

fn failed_report(method: Method, err: &Error) -> MethodReport {
    let status = match err {
        Error::Unsupported(_) => MethodStatus::Unavailable,
        _ => MethodStatus::Failed,
    };
    MethodReport {
        method: method.name(),
        status,
        bound: None,
        log2: None,
        witness: None,
        reason: Some(err.to_string()),
        log_bound: f64::INFINITY,
    }
}

/// Run the requested methods against the catalog and assemble the report.
pub fn estimate(
    catalog: &StatisticsCatalog,
    q: &ConjunctiveQuery,
    opts: &EstimateOptions,
) -> Result<EstimateReport> {
    let binder = Binder::new(catalog, q, &opts.pred)?;
    let mut methods = Vec::new();
    for &method in &opts.methods {
        let report = match method {
            Method::Agm => binder
                .cardinalities()
                .and_then(|cards| agm_bound(q, &cards))
                .map(|r| ok_report(method, q, &[], &r))
                .unwrap_or_else(|e| failed_report(method, &e)),
            Method::Cb => binder
                .cover_stats()
                .and_then(|stats| chain_bound(q, &stats, opts.max_vars).map(|r| (stats, r)))
                .map(|(stats, r)| ok_report(method, q, &stats, &r))
                .unwrap_or_else(|e| failed_report(method, &e)),
            Method::BoundSketch => binder
                .cover_stats()
                .and_then(|stats| bound_sketch(q, &stats).map(|r| (stats, r)))
                .map(|(stats, r)| ok_report(method, q, &stats, &r))
                .unwrap_or_else(|e| failed_report(method, &e)),
            Method::PolyB => binder
                .norm_constraints()
                .and_then(|cons| polyb(q, &cons, q.full_mask()))
                .map(|r| ok_report(method, q, &[], &r))
                .unwrap_or_else(|e| failed_report(method, &e)),
            Method::Dsb => binder
                .dsb_input()
                .map(|inp| dsb_join_bound(&inp))
                .map(|r| ok_report(method, q, &[], &r))
                .unwrap_or_else(|e| failed_report(method, &e)),
        };
        methods.push(report);
    }
    let minimum = methods
        .iter()
        .filter(|m| matches!(m.status, MethodStatus::Ok))
        .min_by(|a, b| a.log_bound.total_cmp(&b.log_bound))
        .map(|m| MinimumReport {
            method: m.method,
            bound: m.bound.clone().expect("ok methods carry bounds"),
            log2: m.log2.clone().expect("ok methods carry bounds"),
        });
    Ok(EstimateReport {
        query: q.to_string(),
        methods,
        minimum,
        stale: Vec::new(),
    })
}

/// Compare the catalog's recorded file digests against the data directory.
pub fn stale_relations(
    catalog: &StatisticsCatalog,
    data_dir: &std::path::Path,
) -> Vec<String> {
    let mut out = Vec::new();
    for meta in &catalog.meta.relations {
        let path = data_dir.join(&meta.file);
        match crate::catalog::file_digest(&path) {
            Ok(d) if d == meta.digest => {}
            _ => out.push(meta.name.clone()),
        }
    }
    out
}
