//! Degree sequences, their ℓp-norms, lossy compression, and
//! predicate-driven statistic selection.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::catalog::{Condition, StatEntry, StatisticsCatalog};
use crate::model::{Relation, Value};
use crate::{Error, Result};

/// A sorted degree vector: for each distinct value of the conditioning
/// attributes U, the number of distinct (U ∪ V)-projections it appears in,
/// sorted non-increasing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DegreeSequence {
    relation: String,
    cond: Vec<String>,
    target: Vec<String>,
    degrees: Vec<u64>,
}

impl DegreeSequence {
    /// Build from raw degrees (test and synthetic inputs). Degrees must be
    /// positive and sorted non-increasing.
    pub fn from_degrees(degrees: Vec<u64>) -> Result<DegreeSequence> {
        for w in degrees.windows(2) {
            if w[1] > w[0] {
                return Err(Error::Input("degrees must be sorted non-increasing".into()));
            }
        }
        if degrees.iter().any(|&d| d == 0) {
            return Err(Error::Input("degrees must be positive".into()));
        }
        Ok(DegreeSequence {
            relation: String::new(),
            cond: Vec::new(),
            target: Vec::new(),
            degrees,
        })
    }

    pub fn source(&self) -> (&str, &[String], &[String]) {
        (&self.relation, &self.cond, &self.target)
    }

    pub fn degrees(&self) -> &[u64] {
        &self.degrees
    }

    pub fn len(&self) -> usize {
        self.degrees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.degrees.is_empty()
    }

    /// Prefix sums of the degrees.
    pub fn cdf(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.degrees
            .iter()
            .map(|&d| {
                acc += d as f64;
                acc
            })
            .collect()
    }

    /// ℓp-norm in linear scale. `p` must be positive; `f64::INFINITY`
    /// returns the maximum degree and `1.0` the exact sum.
    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        norm_of_runs(self.runs_iter(), p)
    }

    /// Natural log of the ℓp-norm; `-inf` for an empty sequence.
    pub fn ln_lp_norm(&self, p: f64) -> Result<f64> {
        ln_norm_of_runs(self.runs_iter(), p)
    }

    fn runs_iter(&self) -> impl Iterator<Item = (f64, u64)> + '_ {
        RunIter {
            degrees: &self.degrees,
            pos: 0,
        }
    }
}

struct RunIter<'a> {
    degrees: &'a [u64],
    pos: usize,
}

impl Iterator for RunIter<'_> {
    type Item = (f64, u64);

    fn next(&mut self) -> Option<(f64, u64)> {
        if self.pos >= self.degrees.len() {
            return None;
        }
        let d = self.degrees[self.pos];
        let start = self.pos;
        while self.pos < self.degrees.len() && self.degrees[self.pos] == d {
            self.pos += 1;
        }
        Some((d as f64, (self.pos - start) as u64))
    }
}

/// A run-length encoded degree sequence. Run values may be fractional and,
/// after CDF-dominating compression, need not be monotone; the cumulative
/// sums are what carry the upper-bound guarantee.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressedDegreeSequence {
    runs: Vec<(f64, u64)>,
}

impl CompressedDegreeSequence {
    pub fn from_runs(runs: Vec<(f64, u64)>) -> Result<CompressedDegreeSequence> {
        for &(v, len) in &runs {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Input("run values must be finite and nonnegative".into()));
            }
            if len == 0 {
                return Err(Error::Input("run lengths must be positive".into()));
            }
        }
        Ok(CompressedDegreeSequence { runs })
    }

    pub fn runs(&self) -> &[(f64, u64)] {
        &self.runs
    }

    pub fn num_runs(&self) -> usize {
        self.runs.len()
    }

    pub fn total_len(&self) -> u64 {
        self.runs.iter().map(|&(_, l)| l).sum()
    }

    pub fn expand(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.total_len() as usize);
        for &(v, len) in &self.runs {
            for _ in 0..len {
                out.push(v);
            }
        }
        out
    }

    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        norm_of_runs(self.runs.iter().copied(), p)
    }

    pub fn ln_lp_norm(&self, p: f64) -> Result<f64> {
        ln_norm_of_runs(self.runs.iter().copied(), p)
    }
}

fn check_p(p: f64) -> Result<()> {
    if p.is_nan() || p <= 0.0 {
        return Err(Error::Input(format!("norm order p must be positive, got {p}")));
    }
    Ok(())
}

/// Norm in linear scale. Maximum and sum are returned exactly; general p
/// goes through the log-space form.
fn norm_of_runs(runs: impl Iterator<Item = (f64, u64)>, p: f64) -> Result<f64> {
    check_p(p)?;
    if p.is_infinite() {
        return Ok(runs.map(|(v, _)| v).fold(0.0, f64::max));
    }
    if p == 1.0 {
        return Ok(runs.map(|(v, l)| v * l as f64).sum());
    }
    ln_norm_general(runs, p).map(f64::exp)
}

/// Norm computation over (value, run length) pairs, in log space for
/// overflow safety on large degrees and large p.
fn ln_norm_of_runs(runs: impl Iterator<Item = (f64, u64)>, p: f64) -> Result<f64> {
    check_p(p)?;
    if p.is_infinite() {
        let max = runs.map(|(v, _)| v).fold(0.0, f64::max);
        return Ok(if max > 0.0 { max.ln() } else { f64::NEG_INFINITY });
    }
    if p == 1.0 {
        let sum: f64 = runs.map(|(v, l)| v * l as f64).sum();
        return Ok(sum.ln());
    }
    ln_norm_general(runs, p)
}

/// logsumexp of ln(len) + p·ln(value), divided by p.
fn ln_norm_general(runs: impl Iterator<Item = (f64, u64)>, p: f64) -> Result<f64> {
    let terms: Vec<f64> = runs
        .filter(|&(v, _)| v > 0.0)
        .map(|(v, l)| (l as f64).ln() + p * v.ln())
        .collect();
    if terms.is_empty() {
        return Ok(f64::NEG_INFINITY);
    }
    let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = terms.iter().map(|t| (t - m).exp()).sum();
    Ok((m + sum.ln()) / p)
}

/// deg_r(V|U): group the distinct (U ∪ V)-projections of `r` by their
/// U-part and return the group sizes sorted non-increasing.
pub fn degree_sequence(r: &Relation, u: &[String], v: &[String]) -> Result<DegreeSequence> {
    let u_idx: Vec<usize> = u.iter().map(|a| r.attr_index(a)).collect::<Result<_>>()?;
    let mut uv_idx = u_idx.clone();
    for a in v {
        let i = r.attr_index(a)?;
        if !uv_idx.contains(&i) {
            uv_idx.push(i);
        }
    }
    let mut projected: Vec<Vec<&Value>> = r
        .tuples()
        .iter()
        .map(|t| uv_idx.iter().map(|&i| &t[i]).collect())
        .collect();
    projected.sort();
    projected.dedup();

    let nu = u_idx.len();
    let mut counts: BTreeMap<&[&Value], u64> = BTreeMap::new();
    for row in &projected {
        *counts.entry(&row[..nu]).or_insert(0) += 1;
    }
    let mut degrees: Vec<u64> = counts.into_values().collect();
    degrees.sort_unstable_by(|a, b| b.cmp(a));
    Ok(DegreeSequence {
        relation: r.name().to_string(),
        cond: u.to_vec(),
        target: v.to_vec(),
        degrees,
    })
}

/// Lossless run-length encoding.
pub fn run_length_compress(ds: &DegreeSequence) -> CompressedDegreeSequence {
    CompressedDegreeSequence {
        runs: ds.runs_iter().collect(),
    }
}

/// True iff the cumulative sums of `comp` dominate those of `base` at every
/// rank, out to the longer of the two (missing ranks count as zero mass).
pub fn cdf_dominates(comp: &CompressedDegreeSequence, base: &DegreeSequence) -> bool {
    let tol = 1e-9;
    let mut comp_cdf = 0.0;
    let mut base_cdf = 0.0;
    let mut comp_runs = comp.runs.iter().copied().peekable();
    let mut base_runs = base.runs_iter().peekable();
    let mut comp_left = 0u64;
    let mut comp_val = 0.0;
    let mut base_left = 0u64;
    let mut base_val = 0.0;
    let total = comp.total_len().max(ds_len(base));
    let mut rank = 0u64;
    while rank < total {
        if comp_left == 0 {
            (comp_val, comp_left) = comp_runs.next().unwrap_or((0.0, total - rank));
        }
        if base_left == 0 {
            (base_val, base_left) = base_runs.next().unwrap_or((0.0, total - rank));
        }
        let step = comp_left.min(base_left).min(total - rank);
        // within the step both CDFs are linear, so checking the step's end
        // and the first index suffices
        let first_comp = comp_cdf + comp_val;
        let first_base = base_cdf + base_val;
        if first_comp < first_base - tol {
            return false;
        }
        comp_cdf += comp_val * step as f64;
        base_cdf += base_val * step as f64;
        if comp_cdf < base_cdf - tol {
            return false;
        }
        comp_left -= step;
        base_left -= step;
        rank += step;
    }
    true
}

fn ds_len(ds: &DegreeSequence) -> u64 {
    ds.len() as u64
}

/// Compress to at most `max_runs` runs whose cumulative sums dominate the
/// input's everywhere.
///
/// If the exact run-length encoding already fits, it is returned unchanged.
/// Otherwise the top degree keeps its own run (preserving the maximum) and
/// the remaining ranks are split into near-equal segments, each assigned the
/// smallest constant that keeps its cumulative sums above the input's.
pub fn cdf_upper_compress(ds: &DegreeSequence, max_runs: usize) -> Result<CompressedDegreeSequence> {
    if max_runs == 0 {
        return Err(Error::Input("max_runs must be at least 1".into()));
    }
    let exact = run_length_compress(ds);
    if exact.num_runs() <= max_runs {
        return Ok(exact);
    }
    let n = ds.len();
    let cdf = ds.cdf();
    let mut runs: Vec<(f64, u64)> = Vec::with_capacity(max_runs);
    let mut covered = 0usize; // ranks already assigned
    let mut acc = 0.0; // compressed CDF so far
    if max_runs > 1 {
        let d1 = ds.degrees()[0] as f64;
        runs.push((d1, 1));
        covered = 1;
        acc = d1;
    }
    let segments = max_runs - runs.len();
    let remaining = n - covered;
    let base = remaining / segments;
    let extra = remaining % segments;
    for s in 0..segments {
        let len = base + usize::from(s < extra);
        if len == 0 {
            continue;
        }
        let mut v: f64 = 0.0;
        for i in 0..len {
            let need = (cdf[covered + i] - acc) / (i + 1) as f64;
            v = v.max(need);
        }
        runs.push((v, len as u64));
        acc += v * len as f64;
        covered += len;
    }
    let out = CompressedDegreeSequence { runs };
    debug_assert_eq!(out.total_len(), n as u64);
    assert!(
        cdf_dominates(&out, ds),
        "compressed cumulative sums failed to dominate the input"
    );
    Ok(out)
}

/// A Boolean filter over one relation's attributes; used to select which
/// statistics apply, never to evaluate data.
#[derive(Debug, Clone, PartialEq)]
pub enum PredicateExpr {
    None,
    Eq { attr: String, value: Value },
    In { attr: String, values: Vec<Value> },
    And(Vec<PredicateExpr>),
    Or(Vec<PredicateExpr>),
}

impl PredicateExpr {
    pub fn is_none(&self) -> bool {
        matches!(self, PredicateExpr::None)
    }

    /// Attribute names mentioned anywhere in the tree.
    pub fn attrs(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_attrs(&mut out);
        out
    }

    fn collect_attrs<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            PredicateExpr::None => {}
            PredicateExpr::Eq { attr, .. } | PredicateExpr::In { attr, .. } => {
                out.push(attr);
            }
            PredicateExpr::And(cs) | PredicateExpr::Or(cs) => {
                for c in cs {
                    c.collect_attrs(out);
                }
            }
        }
    }
}

/// Parse the predicate mini-grammar: `A=5 and (B=3 or B=4)`,
/// `C in (1,2,3)`, with optional `Rel.Attr` qualification and
/// single-quoted string literals.
pub fn parse_predicate(text: &str) -> Result<PredicateExpr> {
    let mut p = PredParser {
        text,
        pos: 0,
    };
    p.skip_ws();
    if p.pos == text.len() {
        return Ok(PredicateExpr::None);
    }
    let expr = p.or_expr()?;
    p.skip_ws();
    if p.pos != text.len() {
        return Err(Error::Parse {
            pos: p.pos,
            msg: "trailing input after predicate".into(),
        });
    }
    Ok(expr)
}

struct PredParser<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> PredParser<'a> {
    fn error(&self, msg: impl Into<String>) -> Error {
        Error::Parse {
            pos: self.pos,
            msg: msg.into(),
        }
    }

    fn skip_ws(&mut self) {
        let bytes = self.text.as_bytes();
        while self.pos < bytes.len() && bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek_word(&mut self) -> Option<&'a str> {
        self.skip_ws();
        let bytes = self.text.as_bytes();
        let start = self.pos;
        let mut end = start;
        while end < bytes.len() && (bytes[end].is_ascii_alphanumeric() || bytes[end] == b'_') {
            end += 1;
        }
        if end == start {
            None
        } else {
            Some(&self.text[start..end])
        }
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        if let Some(word) = self.peek_word() {
            if word.eq_ignore_ascii_case(kw) {
                self.pos += word.len();
                return true;
            }
        }
        false
    }

    fn or_expr(&mut self) -> Result<PredicateExpr> {
        let mut children = vec![self.and_expr()?];
        while self.eat_keyword("or") {
            children.push(self.and_expr()?);
        }
        Ok(if children.len() == 1 {
            children.pop().unwrap()
        } else {
            PredicateExpr::Or(children)
        })
    }

    fn and_expr(&mut self) -> Result<PredicateExpr> {
        let mut children = vec![self.factor()?];
        while self.eat_keyword("and") {
            children.push(self.factor()?);
        }
        Ok(if children.len() == 1 {
            children.pop().unwrap()
        } else {
            PredicateExpr::And(children)
        })
    }

    fn factor(&mut self) -> Result<PredicateExpr> {
        self.skip_ws();
        if self.text[self.pos..].starts_with('(') {
            self.pos += 1;
            let inner = self.or_expr()?;
            self.skip_ws();
            if !self.text[self.pos..].starts_with(')') {
                return Err(self.error("expected `)`"));
            }
            self.pos += 1;
            return Ok(inner);
        }
        let attr = self.qualified_name()?;
        self.skip_ws();
        if self.text[self.pos..].starts_with('=') {
            self.pos += 1;
            let value = self.value()?;
            return Ok(PredicateExpr::Eq { attr, value });
        }
        if self.eat_keyword("in") {
            self.skip_ws();
            if !self.text[self.pos..].starts_with('(') {
                return Err(self.error("expected `(` after `in`"));
            }
            self.pos += 1;
            let mut values = Vec::new();
            loop {
                values.push(self.value()?);
                self.skip_ws();
                if self.text[self.pos..].starts_with(',') {
                    self.pos += 1;
                } else if self.text[self.pos..].starts_with(')') {
                    self.pos += 1;
                    break;
                } else {
                    return Err(self.error("expected `,` or `)` in value list"));
                }
            }
            return Ok(PredicateExpr::In { attr, values });
        }
        Err(self.error("expected `=` or `in`"))
    }

    fn qualified_name(&mut self) -> Result<String> {
        let first = self
            .peek_word()
            .ok_or_else(|| self.error("expected an attribute name"))?;
        if first.eq_ignore_ascii_case("and")
            || first.eq_ignore_ascii_case("or")
            || first.eq_ignore_ascii_case("in")
        {
            return Err(self.error("expected an attribute name"));
        }
        self.pos += first.len();
        if self.text[self.pos..].starts_with('.') {
            self.pos += 1;
            let second = self
                .peek_word()
                .ok_or_else(|| self.error("expected an attribute after `.`"))?;
            self.pos += second.len();
            Ok(format!("{first}.{second}"))
        } else {
            Ok(first.to_string())
        }
    }

    fn value(&mut self) -> Result<Value> {
        self.skip_ws();
        let bytes = self.text.as_bytes();
        if self.pos < bytes.len() && bytes[self.pos] == b'\'' {
            let start = self.pos + 1;
            let mut end = start;
            while end < bytes.len() && bytes[end] != b'\'' {
                end += 1;
            }
            if end == bytes.len() {
                return Err(self.error("unterminated string literal"));
            }
            let s = self.text[start..end].to_string();
            self.pos = end + 1;
            return Ok(Value::Str(s));
        }
        // bare token: signed integer or word
        let start = self.pos;
        let mut end = self.pos;
        if end < bytes.len() && (bytes[end] == b'-' || bytes[end] == b'+') {
            end += 1;
        }
        while end < bytes.len() && (bytes[end].is_ascii_alphanumeric() || bytes[end] == b'_') {
            end += 1;
        }
        if end == start {
            return Err(self.error("expected a value"));
        }
        self.pos = end;
        Ok(Value::parse(&self.text[start..end]))
    }
}

/// Conditional statistics for equality predicates on `cond_attr`: dedicated
/// entries for the most common values, a max-over-the-rest entry, and
/// equi-depth bucket entries over the remaining values.
pub fn build_conditional_stats(
    r: &Relation,
    cond_attr: &str,
    u: &[String],
    v: &[String],
    ps: &[f64],
    mcv_count: usize,
    buckets: usize,
) -> Result<Vec<StatEntry>> {
    let a_idx = r.attr_index(cond_attr)?;
    for attr in u.iter().chain(v.iter()) {
        r.attr_index(attr)?;
    }
    for &p in ps {
        check_p(p)?;
    }
    // bucket counts beyond the usual histogram ceiling add no resolution
    let buckets = buckets.min(200);

    let mut groups: BTreeMap<&Value, Vec<Vec<Value>>> = BTreeMap::new();
    for t in r.tuples() {
        groups.entry(&t[a_idx]).or_default().push(t.clone());
    }
    let mut ranked: Vec<(&Value, usize)> = groups.iter().map(|(k, v)| (*k, v.len())).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));

    let norm_for = |rows: Vec<Vec<Value>>, p: f64| -> Result<f64> {
        let sub = Relation::new(r.name(), r.attributes().to_vec(), rows)?;
        degree_sequence(&sub, u, v)?.lp_norm(p)
    };

    let mut entries = Vec::new();
    let mcvs: Vec<&Value> = ranked.iter().take(mcv_count).map(|&(val, _)| val).collect();
    for &val in &mcvs {
        for &p in ps {
            entries.push(StatEntry {
                relation: r.name().to_string(),
                cond_attrs: u.to_vec(),
                tgt_attrs: v.to_vec(),
                p,
                value: norm_for(groups[val].clone(), p)?,
                condition: Condition::Mcv {
                    attr: cond_attr.to_string(),
                    value: val.clone(),
                },
            });
        }
    }

    let rest: Vec<&Value> = ranked.iter().skip(mcv_count).map(|&(val, _)| val).collect();
    for &p in ps {
        let mut worst: f64 = 0.0;
        for &val in &rest {
            worst = worst.max(norm_for(groups[val].clone(), p)?);
        }
        entries.push(StatEntry {
            relation: r.name().to_string(),
            cond_attrs: u.to_vec(),
            tgt_attrs: v.to_vec(),
            p,
            value: worst,
            condition: Condition::Common {
                attr: cond_attr.to_string(),
            },
        });
    }

    if buckets > 0 && !rest.is_empty() {
        // equi-depth over the non-MCV values, ascending value order
        let mut by_value: Vec<&Value> = rest.clone();
        by_value.sort();
        let total: usize = by_value.iter().map(|val| groups[*val].len()).sum();
        let nb = buckets.min(by_value.len());
        let target = (total as f64 / nb as f64).ceil() as usize;
        let mut chunks: Vec<Vec<&Value>> = Vec::new();
        let mut current: Vec<&Value> = Vec::new();
        let mut filled = 0usize;
        for val in by_value {
            current.push(val);
            filled += groups[val].len();
            if filled >= target && chunks.len() + 1 < nb {
                chunks.push(std::mem::take(&mut current));
                filled = 0;
            }
        }
        if !current.is_empty() {
            chunks.push(current);
        }
        for chunk in chunks {
            let lo = (*chunk.first().unwrap()).clone();
            let hi = (*chunk.last().unwrap()).clone();
            for &p in ps {
                let mut worst: f64 = 0.0;
                let mut all_rows: Vec<Vec<Value>> = Vec::new();
                for &val in &chunk {
                    worst = worst.max(norm_for(groups[val].clone(), p)?);
                    all_rows.extend(groups[val].iter().cloned());
                }
                entries.push(StatEntry {
                    relation: r.name().to_string(),
                    cond_attrs: u.to_vec(),
                    tgt_attrs: v.to_vec(),
                    p,
                    value: worst,
                    condition: Condition::BucketMax {
                        attr: cond_attr.to_string(),
                        lo: lo.clone(),
                        hi: hi.clone(),
                    },
                });
                entries.push(StatEntry {
                    relation: r.name().to_string(),
                    cond_attrs: u.to_vec(),
                    tgt_attrs: v.to_vec(),
                    p,
                    value: norm_for(all_rows, p)?,
                    condition: Condition::BucketAll {
                        attr: cond_attr.to_string(),
                        lo: lo.clone(),
                        hi: hi.clone(),
                    },
                });
            }
        }
    }

    Ok(entries)
}

/// Resolve the statistic value for (relation, V|U, p) under a predicate.
///
/// Equality predicates pick the most specific conditional entry available
/// (MCV, then common, then enclosing bucket, then global); conjunction takes
/// the minimum over children and disjunction their sum, which for p ≥ 1 is
/// an upper bound on the norm of the merged sequence.
pub fn select_stat(
    c: &StatisticsCatalog,
    relation: &str,
    u: &[String],
    v: &[String],
    p: f64,
    pred: &PredicateExpr,
) -> Result<f64> {
    check_p(p)?;
    let global = c
        .lookup(relation, u, v, p, &Condition::Global)
        .ok_or_else(|| {
            Error::MissingStat(format!(
                "no global entry for {relation} deg({}|{}) at p={}",
                v.join(","),
                u.join(","),
                fmt_p(p)
            ))
        })?;
    select_rec(c, relation, u, v, p, pred, global)
}

fn fmt_p(p: f64) -> String {
    if p.is_infinite() {
        "inf".to_string()
    } else {
        format!("{p}")
    }
}

fn select_rec(
    c: &StatisticsCatalog,
    relation: &str,
    u: &[String],
    v: &[String],
    p: f64,
    pred: &PredicateExpr,
    global: f64,
) -> Result<f64> {
    match pred {
        PredicateExpr::None => Ok(global),
        PredicateExpr::Eq { attr, value } => {
            if let Some(val) = c.lookup(
                relation,
                u,
                v,
                p,
                &Condition::Mcv {
                    attr: attr.clone(),
                    value: value.clone(),
                },
            ) {
                return Ok(val);
            }
            if let Some(val) = c.lookup_common(relation, u, v, p, attr) {
                return Ok(val);
            }
            if let Some(val) = c.lookup_bucket_max(relation, u, v, p, attr, value) {
                return Ok(val);
            }
            Ok(global)
        }
        PredicateExpr::In { attr, values } => {
            let children: Vec<PredicateExpr> = values
                .iter()
                .map(|val| PredicateExpr::Eq {
                    attr: attr.clone(),
                    value: val.clone(),
                })
                .collect();
            select_rec(c, relation, u, v, p, &PredicateExpr::Or(children), global)
        }
        PredicateExpr::And(children) => {
            let mut best = f64::INFINITY;
            for ch in children {
                best = best.min(select_rec(c, relation, u, v, p, ch, global)?);
            }
            if best.is_infinite() {
                best = global;
            }
            Ok(best)
        }
        PredicateExpr::Or(children) => {
            if p < 1.0 {
                return Err(Error::Unsupported(format!(
                    "or-combination of statistics requires p >= 1, got p={}",
                    fmt_p(p)
                )));
            }
            let mut sum = 0.0;
            for ch in children {
                sum += select_rec(c, relation, u, v, p, ch, global)?;
            }
            Ok(sum)
        }
    }
}
