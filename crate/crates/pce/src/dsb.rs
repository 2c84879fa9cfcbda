//! The pairwise degree-sequence join bound: align the two sides' sorted
//! degree sequences by rank and sum the products. Sound for exact sequences
//! and for lossy compressions whose cumulative sums dominate the original's.

use crate::bounds::{BoundResult, Witness};
use crate::stats::{cdf_dominates, run_length_compress, CompressedDegreeSequence, DegreeSequence};
use crate::{Error, Result};

/// The two full degree sequences over the join variable(s).
#[derive(Debug, Clone)]
pub struct JoinBoundInput {
    pub left: CompressedDegreeSequence,
    pub right: CompressedDegreeSequence,
    pub join_var: String,
}

impl JoinBoundInput {
    pub fn from_sequences(left: &DegreeSequence, right: &DegreeSequence, join_var: impl Into<String>) -> JoinBoundInput {
        JoinBoundInput {
            left: run_length_compress(left),
            right: run_length_compress(right),
            join_var: join_var.into(),
        }
    }
}

/// Σ over ranks of left_i · right_i, evaluated run-by-run without
/// expansion; the shorter side is zero-padded, so unmatched ranks
/// contribute nothing.
pub fn rank_product_sum(a: &CompressedDegreeSequence, b: &CompressedDegreeSequence) -> f64 {
    let mut total = 0.0;
    let mut ai = a.runs().iter().copied();
    let mut bi = b.runs().iter().copied();
    let (mut av, mut alen) = (0.0, 0u64);
    let (mut bv, mut blen) = (0.0, 0u64);
    loop {
        if alen == 0 {
            match ai.next() {
                Some((v, l)) => (av, alen) = (v, l),
                None => return total,
            }
        }
        if blen == 0 {
            match bi.next() {
                Some((v, l)) => (bv, blen) = (v, l),
                None => return total,
            }
        }
        let overlap = alen.min(blen);
        total += av * bv * overlap as f64;
        alen -= overlap;
        blen -= overlap;
    }
}

/// Rank-aligned product bound Σ aᵢ·bᵢ on the two-way join size.
pub fn dsb_join_bound(inp: &JoinBoundInput) -> BoundResult {
    BoundResult::from_linear(rank_product_sum(&inp.left, &inp.right), Witness::Direct)
}

/// The same bound with a lossily compressed left side. The compression must
/// dominate the original CDF; summation by parts then guarantees
/// Σ a''ᵢ·bᵢ ≥ Σ aᵢ·bᵢ, so the result is still an upper bound.
pub fn dsb_join_bound_compressed(
    a_orig: &DegreeSequence,
    a_comp: &CompressedDegreeSequence,
    b: &DegreeSequence,
) -> Result<BoundResult> {
    if !cdf_dominates(a_comp, a_orig) {
        return Err(Error::Input(
            "compressed sequence does not dominate the original cumulative sums".into(),
        ));
    }
    Ok(BoundResult::from_linear(
        rank_product_sum(a_comp, &run_length_compress(b)),
        Witness::Direct,
    ))
}
