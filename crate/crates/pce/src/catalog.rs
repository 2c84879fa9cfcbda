//! CSV ingestion and durable persistence of the statistics catalog.
//!
//! The catalog is a single JSON document with a version field. Norm values
//! are stored as decimal strings (Rust's shortest round-trip formatting) so
//! that save/load is bit-exact.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::model::{Relation, Value};
use crate::stats::{
    build_conditional_stats, cdf_upper_compress, degree_sequence, run_length_compress,
    CompressedDegreeSequence,
};
use crate::{Error, Result};

pub const CATALOG_VERSION: u32 = 1;

/// Named relations, loaded from CSV files.
#[derive(Debug, Clone, Default)]
pub struct Database {
    relations: BTreeMap<String, Relation>,
}

impl Database {
    pub fn new() -> Database {
        Database::default()
    }

    pub fn insert(&mut self, r: Relation) -> Result<()> {
        if self.relations.contains_key(r.name()) {
            return Err(Error::Input(format!("duplicate relation name {}", r.name())));
        }
        self.relations.insert(r.name().to_string(), r);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&Relation> {
        self.relations
            .get(name)
            .ok_or_else(|| Error::Input(format!("unbound relation name {name}")))
    }

    pub fn relations(&self) -> impl Iterator<Item = &Relation> {
        self.relations.values()
    }
}

/// Which slice of the data a statistic describes.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Condition {
    /// The whole relation.
    Global,
    /// One most-common value of `attr`.
    Mcv { attr: String, value: Value },
    /// Max over all non-MCV values of `attr`.
    Common { attr: String },
    /// Max over the values of `attr` falling in [lo, hi].
    BucketMax { attr: String, lo: Value, hi: Value },
    /// The whole slice where `attr` falls in [lo, hi].
    BucketAll { attr: String, lo: Value, hi: Value },
}

/// One persisted norm statistic: the ℓp-norm of deg(V|U) on `relation`,
/// possibly restricted by a condition.
#[derive(Debug, Clone, PartialEq)]
pub struct StatEntry {
    pub relation: String,
    pub cond_attrs: Vec<String>,
    pub tgt_attrs: Vec<String>,
    pub p: f64,
    pub value: f64,
    pub condition: Condition,
}

impl StatEntry {
    fn key(&self) -> EntryKey {
        EntryKey {
            relation: self.relation.clone(),
            cond: sorted(&self.cond_attrs),
            tgt: sorted(&self.tgt_attrs),
            p_bits: self.p.to_bits(),
            condition: self.condition.clone(),
        }
    }
}

fn sorted(v: &[String]) -> Vec<String> {
    let mut out = v.to_vec();
    out.sort();
    out
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct EntryKey {
    relation: String,
    cond: Vec<String>,
    tgt: Vec<String>,
    p_bits: u64,
    condition: Condition,
}

/// A stored (possibly lossily compressed) full degree sequence, kept for the
/// pairwise join bound.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceEntry {
    pub relation: String,
    pub cond_attrs: Vec<String>,
    pub tgt_attrs: Vec<String>,
    pub sequence: CompressedDegreeSequence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationMeta {
    pub name: String,
    pub attributes: Vec<String>,
    pub file: String,
    pub digest: String,
    pub cardinality: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CatalogMeta {
    pub built_unix_secs: u64,
    pub relations: Vec<RelationMeta>,
}

impl CatalogMeta {
    pub fn relation(&self, name: &str) -> Option<&RelationMeta> {
        self.relations.iter().find(|r| r.name == name)
    }
}

/// The persisted collection of statistics.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StatisticsCatalog {
    entries: Vec<StatEntry>,
    sequences: Vec<SequenceEntry>,
    pub meta: CatalogMeta,
    index: BTreeMap<EntryKey, usize>,
}

impl StatisticsCatalog {
    pub fn new(
        entries: Vec<StatEntry>,
        sequences: Vec<SequenceEntry>,
        meta: CatalogMeta,
    ) -> Result<StatisticsCatalog> {
        let mut index = BTreeMap::new();
        for (i, e) in entries.iter().enumerate() {
            if e.p.is_nan() || e.p <= 0.0 {
                return Err(Error::Input(format!(
                    "catalog entry for {} has non-positive p",
                    e.relation
                )));
            }
            if !(e.value >= 0.0) {
                return Err(Error::Input(format!(
                    "catalog entry for {} has negative or NaN value",
                    e.relation
                )));
            }
            if index.insert(e.key(), i).is_some() {
                return Err(Error::Input(format!(
                    "duplicate catalog entry for {} deg({}|{}) p={} {:?}",
                    e.relation,
                    e.tgt_attrs.join(","),
                    e.cond_attrs.join(","),
                    e.p,
                    e.condition
                )));
            }
        }
        Ok(StatisticsCatalog {
            entries,
            sequences,
            meta,
            index,
        })
    }

    pub fn entries(&self) -> &[StatEntry] {
        &self.entries
    }

    pub fn sequences(&self) -> &[SequenceEntry] {
        &self.sequences
    }

    pub fn lookup(
        &self,
        relation: &str,
        u: &[String],
        v: &[String],
        p: f64,
        condition: &Condition,
    ) -> Option<f64> {
        let key = EntryKey {
            relation: relation.to_string(),
            cond: sorted(u),
            tgt: sorted(v),
            p_bits: p.to_bits(),
            condition: condition.clone(),
        };
        self.index.get(&key).map(|&i| self.entries[i].value)
    }

    pub fn lookup_common(
        &self,
        relation: &str,
        u: &[String],
        v: &[String],
        p: f64,
        attr: &str,
    ) -> Option<f64> {
        self.lookup(
            relation,
            u,
            v,
            p,
            &Condition::Common {
                attr: attr.to_string(),
            },
        )
    }

    /// Max-over-bucket entry whose [lo, hi] range contains `value`.
    pub fn lookup_bucket_max(
        &self,
        relation: &str,
        u: &[String],
        v: &[String],
        p: f64,
        attr: &str,
        value: &Value,
    ) -> Option<f64> {
        let (su, sv) = (sorted(u), sorted(v));
        self.entries.iter().find_map(|e| match &e.condition {
            Condition::BucketMax { attr: a, lo, hi }
                if e.relation == relation
                    && a == attr
                    && e.p.to_bits() == p.to_bits()
                    && sorted(&e.cond_attrs) == su
                    && sorted(&e.tgt_attrs) == sv
                    && lo <= value
                    && value <= hi =>
            {
                Some(e.value)
            }
            _ => None,
        })
    }

    /// Stored full sequence deg(*|U) for the given conditioning attributes.
    pub fn lookup_sequence(
        &self,
        relation: &str,
        u: &[String],
    ) -> Option<&SequenceEntry> {
        let su = sorted(u);
        self.sequences.iter().find(|s| {
            s.relation == relation
                && sorted(&s.cond_attrs) == su
        })
    }

    /// Distinct (U, V, p) triples with a global entry for `relation`.
    pub fn global_keys(&self, relation: &str) -> Vec<(Vec<String>, Vec<String>, f64)> {
        self.entries
            .iter()
            .filter(|e| e.relation == relation && e.condition == Condition::Global)
            .map(|e| (e.cond_attrs.clone(), e.tgt_attrs.clone(), e.p))
            .collect()
    }
}

// ---------------------------------------------------------------------------
// CSV ingestion

/// Load a relation from CSV. With `header` the first row names the
/// attributes; otherwise they are called A1..Ak. Duplicate rows collapse
/// (set semantics) and integer-looking fields become integers.
pub fn load_csv(path: &Path, name: &str, header: bool) -> Result<Relation> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(header)
        .flexible(false)
        .from_path(path)
        .map_err(|e| Error::Input(format!("cannot read {}: {e}", path.display())))?;
    let attributes: Vec<String> = if header {
        let hs = reader.headers()?;
        if hs.is_empty() {
            return Err(Error::Input(format!("{} is empty", path.display())));
        }
        hs.iter().map(|h| h.trim().to_string()).collect()
    } else {
        Vec::new()
    };
    let mut rows: Vec<Vec<Value>> = Vec::new();
    for record in reader.records() {
        let record = record?;
        rows.push(record.iter().map(|f| Value::parse(f.trim())).collect());
    }
    let attributes = if header {
        if attributes.is_empty() {
            return Err(Error::Input(format!("{} is empty", path.display())));
        }
        attributes
    } else {
        let arity = match rows.first() {
            Some(r) => r.len(),
            None => {
                return Err(Error::Input(format!(
                    "{} is empty and has no header to fix the arity",
                    path.display()
                )))
            }
        };
        (1..=arity).map(|i| format!("A{i}")).collect()
    };
    Relation::new(name, attributes, rows)
}

/// Write a relation back out as CSV with a header row.
pub fn save_csv(r: &Relation, path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)
        .map_err(|e| Error::Input(format!("cannot write {}: {e}", path.display())))?;
    writer.write_record(r.attributes())?;
    for t in r.tuples() {
        writer.write_record(t.iter().map(|v| v.to_string()))?;
    }
    writer.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Catalog persistence

#[derive(Serialize, Deserialize)]
struct CatalogDoc {
    version: u32,
    meta: CatalogMeta,
    entries: Vec<EntryDoc>,
    #[serde(default)]
    sequences: Vec<SequenceDoc>,
}

#[derive(Serialize, Deserialize)]
struct EntryDoc {
    relation: String,
    cond: Vec<String>,
    target: Vec<String>,
    p: String,
    value: String,
    condition: Condition,
}

#[derive(Serialize, Deserialize)]
struct SequenceDoc {
    relation: String,
    cond: Vec<String>,
    target: Vec<String>,
    runs: Vec<(String, u64)>,
}

fn f64_to_token(x: f64) -> String {
    if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x}")
    }
}

fn f64_from_token(s: &str) -> Result<f64> {
    match s {
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        other => other
            .parse::<f64>()
            .map_err(|_| Error::Input(format!("malformed number token `{other}`"))),
    }
}

pub fn save_catalog(c: &StatisticsCatalog, path: &Path) -> Result<()> {
    let doc = CatalogDoc {
        version: CATALOG_VERSION,
        meta: c.meta.clone(),
        entries: c
            .entries
            .iter()
            .map(|e| EntryDoc {
                relation: e.relation.clone(),
                cond: e.cond_attrs.clone(),
                target: e.tgt_attrs.clone(),
                p: f64_to_token(e.p),
                value: f64_to_token(e.value),
                condition: e.condition.clone(),
            })
            .collect(),
        sequences: c
            .sequences
            .iter()
            .map(|s| SequenceDoc {
                relation: s.relation.clone(),
                cond: s.cond_attrs.clone(),
                target: s.tgt_attrs.clone(),
                runs: s
                    .sequence
                    .runs()
                    .iter()
                    .map(|&(v, l)| (f64_to_token(v), l))
                    .collect(),
            })
            .collect(),
    };
    fs::write(path, serde_json::to_string_pretty(&doc)?)?;
    Ok(())
}

pub fn load_catalog(path: &Path) -> Result<StatisticsCatalog> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Input(format!("cannot read {}: {e}", path.display())))?;
    let doc: CatalogDoc = serde_json::from_str(&text)?;
    if doc.version != CATALOG_VERSION {
        return Err(Error::Input(format!(
            "catalog version {} does not match supported version {CATALOG_VERSION}",
            doc.version
        )));
    }
    let entries = doc
        .entries
        .into_iter()
        .map(|e| {
            Ok(StatEntry {
                relation: e.relation,
                cond_attrs: e.cond,
                tgt_attrs: e.target,
                p: f64_from_token(&e.p)?,
                value: f64_from_token(&e.value)?,
                condition: e.condition,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let sequences = doc
        .sequences
        .into_iter()
        .map(|s| {
            let runs = s
                .runs
                .iter()
                .map(|(v, l)| Ok((f64_from_token(v)?, *l)))
                .collect::<Result<Vec<_>>>()?;
            Ok(SequenceEntry {
                relation: s.relation,
                cond_attrs: s.cond,
                tgt_attrs: s.target,
                sequence: CompressedDegreeSequence::from_runs(runs)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    StatisticsCatalog::new(entries, sequences, doc.meta)
}

// ---------------------------------------------------------------------------
// Catalog build from a statistics config

fn default_true() -> bool {
    true
}

fn default_ps() -> Vec<f64> {
    vec![1.0, 2.0, 3.0, 4.0, f64::INFINITY]
}

mod ps_serde {
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(ps: &[f64], ser: S) -> Result<S::Ok, S::Error> {
        ser.collect_seq(ps.iter().map(|&p| {
            if p.is_infinite() {
                serde_json::Value::String("inf".into())
            } else {
                serde_json::json!(p)
            }
        }))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Vec<f64>, D::Error> {
        let raw: Vec<serde_json::Value> = Vec::deserialize(de)?;
        raw.into_iter()
            .map(|v| match v {
                serde_json::Value::Number(n) => n
                    .as_f64()
                    .ok_or_else(|| D::Error::custom("p out of range")),
                serde_json::Value::String(s) if s == "inf" => Ok(f64::INFINITY),
                serde_json::Value::String(s) => {
                    s.parse::<f64>().map_err(|_| D::Error::custom("bad p token"))
                }
                other => Err(D::Error::custom(format!("bad p value {other}"))),
            })
            .collect()
    }
}

/// One requested statistic family: norms of deg(target|cond) for every p,
/// optional conditional statistics on `cond_attr`, and an optional stored
/// compressed sequence for the pairwise join bound.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StatRequest {
    #[serde(default)]
    pub cond: Vec<String>,
    /// Target attributes; `["*"]` means all attributes of the relation.
    pub target: Vec<String>,
    #[serde(default = "default_ps", with = "ps_serde")]
    pub ps: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cond_attr: Option<String>,
    #[serde(default)]
    pub mcv_count: usize,
    #[serde(default)]
    pub buckets: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_runs: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RelationStatsConfig {
    pub name: String,
    /// CSV file relative to the data directory; defaults to `<name>.csv`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
    #[serde(default = "default_true")]
    pub header: bool,
    #[serde(default)]
    pub statistics: Vec<StatRequest>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StatsConfig {
    pub relations: Vec<RelationStatsConfig>,
}

impl StatsConfig {
    pub fn from_path(path: &Path) -> Result<StatsConfig> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Input(format!("cannot read {}: {e}", path.display())))?;
        Ok(serde_json::from_str(&text)?)
    }
}

pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = fs::read(path)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

struct RelationBuild {
    relation: Relation,
    entries: Vec<StatEntry>,
    sequences: Vec<SequenceEntry>,
    meta: RelationMeta,
}

fn build_relation(data_dir: &Path, rc: &RelationStatsConfig) -> Result<RelationBuild> {
    let file = rc.file.clone().unwrap_or_else(|| format!("{}.csv", rc.name));
    let path = data_dir.join(&file);
    let relation = load_csv(&path, &rc.name, rc.header)?;
    let digest = file_digest(&path)?;

    let mut entries = Vec::new();
    let mut sequences = Vec::new();
    for req in &rc.statistics {
        let target: Vec<String> = if req.target == ["*"] {
            relation.attributes().to_vec()
        } else {
            req.target.clone()
        };
        let ds = degree_sequence(&relation, &req.cond, &target)?;
        for &p in &req.ps {
            entries.push(StatEntry {
                relation: rc.name.clone(),
                cond_attrs: req.cond.clone(),
                tgt_attrs: target.clone(),
                p,
                value: ds.lp_norm(p)?,
                condition: Condition::Global,
            });
        }
        if let Some(attr) = &req.cond_attr {
            entries.extend(build_conditional_stats(
                &relation,
                attr,
                &req.cond,
                &target,
                &req.ps,
                req.mcv_count,
                req.buckets,
            )?);
        }
        if let Some(max_runs) = req.max_runs {
            let exact = run_length_compress(&ds);
            let sequence = if exact.num_runs() <= max_runs {
                exact
            } else {
                cdf_upper_compress(&ds, max_runs)?
            };
            sequences.push(SequenceEntry {
                relation: rc.name.clone(),
                cond_attrs: req.cond.clone(),
                tgt_attrs: target.clone(),
                sequence,
            });
        }
    }
    let meta = RelationMeta {
        name: rc.name.clone(),
        attributes: relation.attributes().to_vec(),
        file,
        digest,
        cardinality: relation.len() as u64,
    };
    Ok(RelationBuild {
        relation,
        entries,
        sequences,
        meta,
    })
}

/// Build the catalog described by `config`, reading CSVs from `data_dir`.
/// Relations are processed in parallel, one worker each; the catalog itself
/// is assembled in config order.
pub fn build_catalog(
    data_dir: &Path,
    config: &StatsConfig,
) -> Result<(StatisticsCatalog, Database)> {
    let results: Vec<Result<RelationBuild>> = std::thread::scope(|scope| {
        let handles: Vec<_> = config
            .relations
            .iter()
            .map(|rc| scope.spawn(move || build_relation(data_dir, rc)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("statistics worker panicked"))
            .collect()
    });

    let mut entries = Vec::new();
    let mut sequences = Vec::new();
    let mut metas = Vec::new();
    let mut db = Database::new();
    for res in results {
        let built = res?;
        entries.extend(built.entries);
        sequences.extend(built.sequences);
        metas.push(built.meta);
        db.insert(built.relation)?;
    }
    let meta = CatalogMeta {
        built_unix_secs: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        relations: metas,
    };
    Ok((StatisticsCatalog::new(entries, sequences, meta)?, db))
}
