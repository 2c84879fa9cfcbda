//! Seeded property suites behind the `verify` command: bound soundness
//! against the exact-join oracle, dominance ordering between the methods,
//! entropy-vector checks, and compression safety. Reports are deterministic
//! functions of the seed, so identical invocations are byte-identical.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bounds::{
    acyclic_chain_bound, agm_bound, bound_sketch, chain_bound, chain_witness_covers, Witness,
};
use crate::catalog::Database;
use crate::dsb::{dsb_join_bound, rank_product_sum};
use crate::oracle::{
    empirical_entropy, exact_join, verify_closed_form, verify_norm_constraint, verify_shannon,
    ClosedForm, SlackReport, DEFAULT_JOIN_CAP,
};
use crate::polymatroid::polyb;
use crate::stats::{
    cdf_dominates, cdf_upper_compress, run_length_compress, CompressedDegreeSequence,
    DegreeSequence,
};
use crate::synth::{
    dsb_input, norm_constraints_from_cover, random_extra_constraint, random_instance,
    random_shape_db, true_cardinalities, true_cover_stats, true_norm_constraints, SynthOptions,
};
use crate::Result;

pub const SUITES: [&str; 4] = ["soundness", "dominance", "shannon", "compression"];

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub seed: u64,
    pub trials: usize,
    pub checks: usize,
    pub violations: usize,
    pub skipped: usize,
    /// First few failing checks, for diagnosis.
    pub failures: Vec<SlackReport>,
}

impl SuiteReport {
    fn new(suite: &str, seed: u64, trials: usize) -> SuiteReport {
        SuiteReport {
            suite: suite.to_string(),
            seed,
            trials,
            checks: 0,
            violations: 0,
            skipped: 0,
            failures: Vec::new(),
        }
    }

    fn record(&mut self, report: SlackReport) {
        self.checks += 1;
        if !report.pass {
            self.violations += 1;
            if self.failures.len() < 10 {
                self.failures.push(report);
            }
        }
    }

    fn record_bool(&mut self, check: impl Into<String>, pass: bool) {
        self.record(SlackReport {
            check: check.into(),
            lhs: f64::NAN,
            rhs: f64::NAN,
            slack: if pass { 0.0 } else { -1.0 },
            pass,
        });
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "suite={} seed={} trials={} checks={} violations={} skipped={}\n",
            self.suite, self.seed, self.trials, self.checks, self.violations, self.skipped
        );
        for f in &self.failures {
            out.push_str(&format!(
                "  FAIL {} lhs={:.6e} rhs={:.6e} slack={:.6e}\n",
                f.check, f.lhs, f.rhs, f.slack
            ));
        }
        out
    }
}

/// Soundness in log space: bound ≥ count up to 1e-9 relative slack.
fn sound(count: usize, log_bound: f64) -> bool {
    if count == 0 {
        return true;
    }
    log_bound >= (count as f64).ln() - 1e-9
}

/// Every available method's bound is at least the exact join size, on random
/// instances with statistics computed exactly from the data; plus the
/// closed-form inequality families on random path and triangle instances.
pub fn run_soundness(seed: u64, trials: usize) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = SuiteReport::new("soundness", seed, trials);
    let opts = SynthOptions::default();
    for trial in 0..trials {
        let inst = random_instance(&mut rng, &opts);
        let q = &inst.query;
        let db = &inst.db;
        let count = match exact_join(db, q, DEFAULT_JOIN_CAP) {
            Ok(out) => out.count(),
            Err(_) => {
                report.skipped += 1;
                continue;
            }
        };
        let tag = |m: &str| format!("t{trial} {m} >= exact({count}) on {q}");

        let cards = true_cardinalities(db, q)?;
        let agm = agm_bound(q, &cards)?;
        report.record_bool(tag("agm"), sound(count, agm.log_bound));

        let stats = true_cover_stats(db, q, true)?;
        let cb = chain_bound(q, &stats, 8)?;
        report.record_bool(tag("cb"), sound(count, cb.log_bound));
        if let Witness::ChainCover { order, weights } = &cb.witness {
            if cb.log_bound.is_finite() {
                report.record_bool(
                    format!("t{trial} chain witness coverage on {q}"),
                    chain_witness_covers(q, &stats, order, weights, 1e-9),
                );
            }
        }

        let bs = bound_sketch(q, &stats)?;
        report.record_bool(tag("boundsketch"), sound(count, bs.log_bound));

        if let Some(acb) = acyclic_chain_bound(q, &stats)? {
            report.record_bool(tag("acyclic-cb"), sound(count, acb.log_bound));
        }

        let cons = true_norm_constraints(db, q, &[1.0, 2.0, 3.0, f64::INFINITY])?;
        let pb = polyb(q, &cons, q.full_mask())?;
        report.record_bool(tag("polyb"), sound(count, pb.log_bound));

        // group-by objective against the exact projection size
        if count > 0 && q.num_vars() > 1 {
            let mask = rng.random_range(1..q.full_mask() + 1);
            let out = exact_join(db, q, DEFAULT_JOIN_CAP)?;
            let proj = out.distinct_projection(mask);
            let pb = polyb(q, &cons, mask)?;
            report.record_bool(
                format!("t{trial} polyb group-by >= exact({proj})"),
                sound(proj, pb.log_bound),
            );
        }

        if let Some(inp) = dsb_input(db, q)? {
            let r = dsb_join_bound(&inp);
            report.record_bool(tag("dsb"), sound(count, r.log_bound));
        }
    }

    // closed-form families on dedicated shapes
    for trial in 0..trials {
        let db = random_shape_db(&mut rng, 30, 4);
        for family in [
            ClosedForm::PathMixedNorm { p: 2.0 },
            ClosedForm::PathMixedNorm { p: 3.0 },
        ] {
            let mut r = verify_closed_form(&db, family, DEFAULT_JOIN_CAP)?;
            r.check = format!("t{trial} {}", r.check);
            report.record(r);
        }
        let db = random_shape_db(&mut rng, 30, 4);
        for family in [ClosedForm::TriangleQuadratic, ClosedForm::TriangleCubicCard] {
            let mut r = verify_closed_form(&db, family, DEFAULT_JOIN_CAP)?;
            r.check = format!("t{trial} {}", r.check);
            report.record(r);
        }
    }
    Ok(report)
}

/// Ordering between the methods on shared statistics: the entropy bound is
/// never above the chain bound, the chain bound never above the integral
/// one, and never above the edge-cover bound; with cardinalities only the
/// chain and edge-cover bounds coincide.
pub fn run_dominance(seed: u64, trials: usize) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = SuiteReport::new("dominance", seed, trials);
    let opts = SynthOptions {
        empty_chance: 0.0,
        ..SynthOptions::default()
    };
    let tol = |x: f64| 1e-6 * (1.0 + x.abs());
    for trial in 0..trials {
        let inst = random_instance(&mut rng, &opts);
        let q = &inst.query;
        let db = &inst.db;

        let cards = true_cardinalities(db, q)?;
        let agm = agm_bound(q, &cards)?;

        let stats = true_cover_stats(db, q, true)?;
        let cb = chain_bound(q, &stats, 8)?;
        let bs = bound_sketch(q, &stats)?;
        let pb = polyb(q, &norm_constraints_from_cover(&stats), q.full_mask())?;

        report.record(SlackReport::new(
            format!("t{trial} polyb <= cb on {q}"),
            pb.log_bound,
            cb.log_bound,
            tol(cb.log_bound),
        ));
        report.record(SlackReport::new(
            format!("t{trial} cb <= boundsketch on {q}"),
            cb.log_bound,
            bs.log_bound,
            tol(bs.log_bound),
        ));
        report.record(SlackReport::new(
            format!("t{trial} cb <= agm on {q}"),
            cb.log_bound,
            agm.log_bound,
            tol(agm.log_bound),
        ));

        let cards_only = true_cover_stats(db, q, false)?;
        let cb_cards = chain_bound(q, &cards_only, 8)?;
        let gap = (cb_cards.log_bound - agm.log_bound).abs();
        report.record(SlackReport {
            check: format!("t{trial} cb == agm with cardinalities only on {q}"),
            lhs: cb_cards.log_bound,
            rhs: agm.log_bound,
            slack: -gap,
            pass: gap <= tol(agm.log_bound),
        });

        // one extra true statistic never makes the entropy bound worse
        let mut extended = norm_constraints_from_cover(&stats);
        extended.push(random_extra_constraint(&mut rng, db, q)?);
        let pb2 = polyb(q, &extended, q.full_mask())?;
        report.record(SlackReport::new(
            format!("t{trial} polyb monotone in statistics on {q}"),
            pb2.log_bound,
            pb.log_bound + 1e-9,
            1e-9,
        ));
    }
    Ok(report)
}

/// Empirical entropy vectors from query outputs satisfy every elemental
/// inequality and every norm constraint the statistics imply.
pub fn run_shannon(seed: u64, trials: usize) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = SuiteReport::new("shannon", seed, trials);
    let opts = SynthOptions::default();
    for trial in 0..trials {
        let inst = random_instance(&mut rng, &opts);
        let q = &inst.query;
        let db = &inst.db;
        let out = match exact_join(db, q, DEFAULT_JOIN_CAP) {
            Ok(out) if out.count() > 0 => out,
            _ => {
                report.skipped += 1;
                continue;
            }
        };
        let h = empirical_entropy(&out)?;
        let shannon_ok = verify_shannon(&h)?.iter().all(|r| r.pass);
        report.record_bool(format!("t{trial} elemental inequalities on {q}"), shannon_ok);
        report.record_bool(
            format!("t{trial} h(all) = ln(count) on {q}"),
            (h.get(q.full_mask()) - (out.count() as f64).ln()).abs() < 1e-9,
        );

        for (ai, atom) in q.atoms().iter().enumerate() {
            let rel = db.get(&atom.relation)?;
            let attrs = rel.attributes().to_vec();
            let k = attrs.len();
            for u_mask in 0u32..(1 << k) {
                for v_mask in 0u32..(1 << k) {
                    if v_mask == 0 || u_mask & v_mask != 0 {
                        continue;
                    }
                    let u: Vec<String> = (0..k)
                        .filter(|i| u_mask >> i & 1 == 1)
                        .map(|i| attrs[i].clone())
                        .collect();
                    let v: Vec<String> = (0..k)
                        .filter(|i| v_mask >> i & 1 == 1)
                        .map(|i| attrs[i].clone())
                        .collect();
                    for p in [1.0, 2.0, 3.0, f64::INFINITY] {
                        let mut r = verify_norm_constraint(db, q, ai, &h, &u, &v, p)?;
                        r.check = format!("t{trial} atom{ai} {}", r.check);
                        report.record(r);
                    }
                }
            }
        }
    }
    Ok(report)
}

fn random_degrees(rng: &mut impl Rng, max_len: usize, max_deg: u64) -> Vec<u64> {
    let len = rng.random_range(1..=max_len);
    let mut d: Vec<u64> = (0..len).map(|_| rng.random_range(1..=max_deg)).collect();
    d.sort_unstable_by(|a, b| b.cmp(a));
    d
}

/// Compression safety: run-length codes are lossless, CDF compression
/// dominates everywhere at any run budget, and rank products only grow when
/// the left CDF grows (the summation-by-parts lemma).
pub fn run_compression(seed: u64, trials: usize) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = SuiteReport::new("compression", seed, trials);
    for trial in 0..trials {
        let degrees = random_degrees(&mut rng, 30, 9);
        let ds = DegreeSequence::from_degrees(degrees.clone()).unwrap();

        let rle = run_length_compress(&ds);
        let lossless = rle.expand() == degrees.iter().map(|&d| d as f64).collect::<Vec<_>>();
        report.record_bool(format!("t{trial} run-length round trip"), lossless);

        let max_runs = rng.random_range(1..=degrees.len());
        let comp = cdf_upper_compress(&ds, max_runs)?;
        report.record_bool(
            format!("t{trial} compression dominates at {max_runs} runs"),
            cdf_dominates(&comp, &ds)
                && comp.num_runs() <= max_runs
                && comp.total_len() == degrees.len() as u64
                && comp.expand()[0] >= degrees[0] as f64 - 1e-12,
        );

        // summation by parts: Σ a''·b >= Σ a·b whenever A'' >= A pointwise
        let a: Vec<f64> = {
            let mut v: Vec<f64> = (0..rng.random_range(1..=20))
                .map(|_| rng.random_range(0.0..8.0))
                .collect();
            v.sort_by(|x, y| y.total_cmp(x));
            v
        };
        let b: Vec<f64> = {
            let mut v: Vec<f64> = (0..a.len())
                .map(|_| rng.random_range(0.0..8.0))
                .collect();
            v.sort_by(|x, y| y.total_cmp(x));
            v
        };
        let mut cdf = 0.0;
        let mut a2: Vec<f64> = Vec::with_capacity(a.len());
        let mut prev = 0.0;
        for &x in &a {
            cdf += x;
            let bumped = cdf + rng.random_range(0.0..4.0);
            a2.push(bumped - prev);
            prev = bumped;
        }
        let sum_ab: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        let sum_a2b: f64 = a2.iter().zip(&b).map(|(x, y)| x * y).sum();
        report.record(SlackReport::new(
            format!("t{trial} rank products grow with the CDF"),
            sum_ab,
            sum_a2b,
            1e-9 * (1.0 + sum_ab.abs()),
        ));

        // the same lemma through the run-aligned evaluator
        let comp_b = CompressedDegreeSequence::from_runs(
            b.iter().map(|&x| (x, 1)).collect(),
        )?;
        let comp_a2 = CompressedDegreeSequence::from_runs(
            a2.iter().map(|&x| (x.max(0.0), 1)).collect(),
        )?;
        let comp_a = CompressedDegreeSequence::from_runs(
            a.iter().map(|&x| (x, 1)).collect(),
        )?;
        // clamping negatives can only raise the CDF, preserving dominance
        let aligned = rank_product_sum(&comp_a2, &comp_b);
        let exact = rank_product_sum(&comp_a, &comp_b);
        report.record(SlackReport::new(
            format!("t{trial} run-aligned product respects dominance"),
            exact,
            aligned,
            1e-9 * (1.0 + exact.abs()),
        ));
    }
    Ok(report)
}

/// Closed-form families against a fixture database with R, S, T present.
pub fn run_fixture_checks(db: &Database) -> Result<SuiteReport> {
    let mut report = SuiteReport::new("fixtures", 0, 0);
    for family in [
        ClosedForm::TriangleCards,
        ClosedForm::TriangleQuadratic,
        ClosedForm::TriangleCubicCard,
    ] {
        report.record(verify_closed_form(db, family, DEFAULT_JOIN_CAP)?);
    }
    Ok(report)
}

/// Run the named suite (or all of them) with per-suite seeds derived from
/// the base seed.
pub fn run_suites(suite: &str, seed: u64, trials: usize) -> Result<Vec<SuiteReport>> {
    let selected: Vec<&str> = if suite == "all" {
        SUITES.to_vec()
    } else {
        vec![suite]
    };
    let mut out = Vec::new();
    for name in selected {
        let report = match name {
            "soundness" => run_soundness(seed, trials)?,
            "dominance" => run_dominance(seed, trials)?,
            "shannon" => run_shannon(seed, trials)?,
            "compression" => run_compression(seed, trials)?,
            other => {
                return Err(crate::Error::Input(format!(
                    "unknown suite `{other}`; expected one of soundness, dominance, shannon, compression, all"
                )))
            }
        };
        out.push(report);
    }
    Ok(out)
}
