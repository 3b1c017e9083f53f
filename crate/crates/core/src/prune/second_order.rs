//! Second-order V:N:M mask search.
//!
//! Per VxM block the search picks the 4-column subset and per-row keep
//! patterns that minimize the summed saliency of the pruned weights. Rows
//! are scored independently (cross-row correlations inside a block are
//! discarded), so a block's cost factorizes into per-row minima over the
//! keep patterns admitted by the column subset.
//!
//! Column subsets are enumerated exhaustively while `C(M,4)` stays at or
//! under [`EXHAUSTIVE_SUBSET_LIMIT`]; wider blocks fall back to a greedy
//! ranking of columns by the singleton saliency their strongest entries
//! contribute per row.

use std::collections::HashMap;

use crate::config::{validate_config, VnmConfig, SELECTED_COLUMNS};
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::exec;
use crate::mask::SparsityMask;
use crate::prune::fisher::FisherInverse;
use crate::prune::saliency::{saliency_exact, saliency_pairwise, CandidateSet};
use crate::prune::spd::SymMatrix;

/// Which saliency composition scores a pruned set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SaliencyMode {
    Exact,
    Pairwise,
}

/// How the 4-column subset of a block is searched.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnSearch {
    Exhaustive,
    Greedy,
}

impl ColumnSearch {
    pub fn as_str(&self) -> &'static str {
        match self {
            ColumnSearch::Exhaustive => "exhaustive",
            ColumnSearch::Greedy => "greedy",
        }
    }
}

/// Largest `C(M,4)` for which the exhaustive column-subset search runs.
pub const EXHAUSTIVE_SUBSET_LIMIT: u64 = 20_000;

fn subsets_of_four(m: usize) -> u64 {
    if m < SELECTED_COLUMNS {
        return 0;
    }
    let m = m as u128;
    let c = m * (m - 1) * (m - 2) * (m - 3) / 24;
    u64::try_from(c).unwrap_or(u64::MAX)
}

/// Search strategy engaged for a block width of `m` columns.
pub fn column_search_strategy(m: usize) -> ColumnSearch {
    if subsets_of_four(m) <= EXHAUSTIVE_SUBSET_LIMIT {
        ColumnSearch::Exhaustive
    } else {
        ColumnSearch::Greedy
    }
}

fn check_fisher(r: usize, k: usize, m: usize, fisher: &FisherInverse) -> Result<()> {
    if fisher.block_size() != m {
        return Err(Error::FisherShapeMismatch {
            context: format!(
                "fisher block size {} vs group width {m}",
                fisher.block_size()
            ),
        });
    }
    let expected = r * (k / m);
    if fisher.num_blocks() != expected {
        return Err(Error::FisherShapeMismatch {
            context: format!(
                "fisher has {} blocks, matrix needs {expected}",
                fisher.num_blocks()
            ),
        });
    }
    Ok(())
}

/// Scores pruned sets for one row of one block, memoizing by kept set.
struct RowScorer<'a> {
    w: Vec<f64>,
    finv: &'a SymMatrix,
    mode: SaliencyMode,
    m: usize,
    memo: HashMap<u128, f64>,
}

impl<'a> RowScorer<'a> {
    fn new(w: Vec<f64>, finv: &'a SymMatrix, mode: SaliencyMode) -> Self {
        let m = w.len();
        Self {
            w,
            finv,
            mode,
            m,
            memo: HashMap::new(),
        }
    }

    /// Saliency of pruning everything except `kept` (ascending block-relative
    /// columns).
    fn score_kept(&mut self, kept: &[u16]) -> Result<f64> {
        let key = if self.m <= 128 {
            let mut bits: u128 = 0;
            for &c in kept {
                bits |= 1u128 << c;
            }
            Some(bits)
        } else {
            None
        };
        if let Some(k) = key {
            if let Some(&s) = self.memo.get(&k) {
                return Ok(s);
            }
        }
        let pruned: Vec<usize> = (0..self.m)
            .filter(|&c| !kept.iter().any(|&kc| kc as usize == c))
            .collect();
        let score = match self.mode {
            SaliencyMode::Exact => {
                let wq: Vec<f64> = pruned.iter().map(|&c| self.w[c]).collect();
                saliency_exact(&wq, &self.finv.submatrix(&pruned))?
            }
            SaliencyMode::Pairwise => saliency_pairwise(&self.w, self.finv, &pruned)?,
        };
        if let Some(k) = key {
            self.memo.insert(k, score);
        }
        Ok(score)
    }

    /// Singleton saliency of one column, used by the greedy ranking and the
    /// relaxed scheduler steps.
    fn singleton(&self, c: usize) -> Result<f64> {
        let fcc = self.finv.at(c, c);
        if fcc <= 0.0 {
            return Err(Error::SingularSubmatrix);
        }
        Ok(0.5 * self.w[c] * self.w[c] / fcc)
    }
}

/// Best keep pattern of size `min(budget, |candidates|)` for one row; returns
/// (kept columns, pruned-set saliency). Ties resolve to the first pattern in
/// lexicographic order.
fn best_row_pattern(
    scorer: &mut RowScorer<'_>,
    candidates: &[u16],
    budget: usize,
) -> Result<(Vec<u16>, f64)> {
    let q = budget.min(candidates.len());
    let patterns = CandidateSet::keep_patterns(candidates.len(), q);
    let mut best: Option<(Vec<u16>, f64)> = None;
    for subset in patterns.subsets() {
        let kept: Vec<u16> = subset.iter().map(|&i| candidates[i]).collect();
        let score = scorer.score_kept(&kept)?;
        match &best {
            Some((_, s)) if score >= *s => {}
            _ => best = Some((kept, score)),
        }
    }
    Ok(best.expect("keep_patterns yields at least the empty pattern"))
}

/// Greedy 4-column pick: each row contributes the singleton saliency of its
/// `budget` strongest admissible entries to their columns; the 4 columns
/// with the largest accumulated score win (ties to the lower index).
fn greedy_columns(
    scorers: &[RowScorer<'_>],
    admissible: &[Vec<u16>],
    budget: usize,
    m: usize,
) -> Result<[u16; SELECTED_COLUMNS]> {
    let mut col_score = vec![0.0f64; m];
    for (scorer, adm) in scorers.iter().zip(admissible) {
        let mut scored: Vec<(f64, u16)> = Vec::with_capacity(adm.len());
        for &c in adm {
            scored.push((scorer.singleton(c as usize)?, c));
        }
        scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
        for &(s, c) in scored.iter().take(budget) {
            col_score[c as usize] += s;
        }
    }
    let mut order: Vec<u16> = (0..m as u16).collect();
    order.sort_by(|&a, &b| {
        col_score[b as usize]
            .partial_cmp(&col_score[a as usize])
            .unwrap()
            .then(a.cmp(&b))
    });
    let mut picked: Vec<u16> = order[..SELECTED_COLUMNS].to_vec();
    picked.sort_unstable();
    Ok(picked.try_into().expect("exactly four columns"))
}

fn lexicographic_four_subsets(m: usize) -> Vec<[u16; SELECTED_COLUMNS]> {
    let mut out = Vec::with_capacity(subsets_of_four(m) as usize);
    for a in 0..m {
        for b in a + 1..m {
            for c in b + 1..m {
                for d in c + 1..m {
                    out.push([a as u16, b as u16, c as u16, d as u16]);
                }
            }
        }
    }
    out
}

/// One block's chosen keep columns per row (block-relative).
fn prune_block(
    d: &DenseMatrix,
    fisher: &FisherInverse,
    v: usize,
    budget: usize,
    m: usize,
    mode: SaliencyMode,
    prev: Option<&SparsityMask>,
    br: usize,
    bc: usize,
    subsets: Option<&[[u16; SELECTED_COLUMNS]]>,
) -> Result<Vec<Vec<u16>>> {
    let groups = d.cols() / m;
    let col_base = bc * m;

    let mut scorers: Vec<RowScorer<'_>> = Vec::with_capacity(v);
    let mut admissible: Vec<Vec<u16>> = Vec::with_capacity(v);
    for rv in 0..v {
        let row = br * v + rv;
        let w: Vec<f64> = d.row(row)[col_base..col_base + m]
            .iter()
            .map(|&x| x as f64)
            .collect();
        scorers.push(RowScorer::new(w, fisher.block(row * groups + bc), mode));
        let adm: Vec<u16> = (0..m as u16)
            .filter(|&c| {
                prev.map_or(true, |p| p.is_kept(row, col_base + c as usize))
            })
            .collect();
        admissible.push(adm);
    }

    let chosen: Vec<[u16; SELECTED_COLUMNS]> = match subsets {
        Some(all) => all.to_vec(),
        None => vec![greedy_columns(&scorers, &admissible, budget, m)?],
    };

    let mut best_cols: Option<([u16; SELECTED_COLUMNS], f64)> = None;
    for cols in &chosen {
        let mut total = 0.0f64;
        for rv in 0..v {
            let cand: Vec<u16> = cols
                .iter()
                .copied()
                .filter(|c| admissible[rv].contains(c))
                .collect();
            let (_, score) = best_row_pattern(&mut scorers[rv], &cand, budget)?;
            total += score;
        }
        match &best_cols {
            Some((_, s)) if total >= *s => {}
            _ => best_cols = Some((*cols, total)),
        }
    }
    let (cols, _) = best_cols.expect("at least one column subset");

    let mut kept_rows = Vec::with_capacity(v);
    for rv in 0..v {
        let cand: Vec<u16> = cols
            .iter()
            .copied()
            .filter(|c| admissible[rv].contains(c))
            .collect();
        let (kept, _) = best_row_pattern(&mut scorers[rv], &cand, budget)?;
        kept_rows.push(kept);
    }
    Ok(kept_rows)
}

/// Structured pruning step: selects 4 columns per block and keeps up to
/// `budget` entries per row inside them. Used directly by [`so_prune_vnm`]
/// (budget = N) and by the scheduler once the decayed N reaches 4.
pub(crate) fn structured_prune(
    d: &DenseMatrix,
    fisher: &FisherInverse,
    v: usize,
    budget: usize,
    m: usize,
    mode: SaliencyMode,
    prev: Option<&SparsityMask>,
) -> Result<SparsityMask> {
    let (r, k) = (d.rows(), d.cols());
    check_fisher(r, k, m, fisher)?;
    let groups = k / m;
    let nblocks = (r / v) * groups;

    let subsets = match column_search_strategy(m) {
        ColumnSearch::Exhaustive => Some(lexicographic_four_subsets(m)),
        ColumnSearch::Greedy => None,
    };
    let subsets_ref = subsets.as_deref();

    let per_block = exec::map_indexed(nblocks, |b| {
        prune_block(
            d,
            fisher,
            v,
            budget,
            m,
            mode,
            prev,
            b / groups,
            b % groups,
            subsets_ref,
        )
    });

    let mut mask = SparsityMask::empty(r, k);
    for (b, rows) in per_block.into_iter().enumerate() {
        let rows = rows?;
        let (br, bc) = (b / groups, b % groups);
        for (rv, kept) in rows.into_iter().enumerate() {
            for c in kept {
                mask.set(br * v + rv, bc * m + c as usize, true);
            }
        }
    }
    Ok(mask)
}

/// Relaxed scheduler step: while the decayed N exceeds 4 the 4-column
/// constraint is not yet enforceable, so each row keeps its `budget`
/// highest-singleton-saliency admissible entries per M-group.
pub(crate) fn relaxed_row_prune(
    d: &DenseMatrix,
    fisher: &FisherInverse,
    budget: usize,
    m: usize,
    prev: Option<&SparsityMask>,
) -> Result<SparsityMask> {
    let (r, k) = (d.rows(), d.cols());
    check_fisher(r, k, m, fisher)?;
    let groups = k / m;

    let rows = exec::map_indexed(r, |row| -> Result<Vec<bool>> {
        let mut keep_row = vec![false; k];
        for g in 0..groups {
            let base = g * m;
            let w: Vec<f64> = d.row(row)[base..base + m]
                .iter()
                .map(|&x| x as f64)
                .collect();
            let scorer = RowScorer::new(w, fisher.block(row * groups + g), SaliencyMode::Exact);
            let mut scored: Vec<(f64, u16)> = Vec::new();
            for c in 0..m as u16 {
                let allowed = prev.map_or(true, |p| p.is_kept(row, base + c as usize));
                if allowed {
                    scored.push((scorer.singleton(c as usize)?, c));
                }
            }
            scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
            for &(_, c) in scored.iter().take(budget) {
                keep_row[base + c as usize] = true;
            }
        }
        Ok(keep_row)
    });

    let mut mask = SparsityMask::empty(r, k);
    for (row, bits) in rows.into_iter().enumerate() {
        let bits = bits?;
        for (c, b) in bits.into_iter().enumerate() {
            if b {
                mask.set(row, c, true);
            }
        }
    }
    Ok(mask)
}

/// Second-order V:N:M pruning: returns the valid mask minimizing, per block,
/// the summed saliency of the pruned weights.
///
/// When `prev` is given, only positions it keeps are candidates, so the
/// result nests inside `prev`. Every row M-group of `prev` must retain at
/// least `n` entries, otherwise the pattern's keep budget is unreachable
/// and the call fails with `InfeasibleNesting`.
pub fn so_prune_vnm(
    d: &DenseMatrix,
    fisher: &FisherInverse,
    cfg: &VnmConfig,
    mode: SaliencyMode,
    prev: Option<&SparsityMask>,
) -> Result<SparsityMask> {
    validate_config(d.rows(), d.cols(), cfg)?;
    if let Some(p) = prev {
        if p.rows() != d.rows() || p.cols() != d.cols() {
            return Err(Error::ShapeMismatch {
                context: format!(
                    "prev mask {}x{} vs matrix {}x{}",
                    p.rows(),
                    p.cols(),
                    d.rows(),
                    d.cols()
                ),
            });
        }
        for row in 0..p.rows() {
            for g in 0..p.cols() / cfg.m {
                let kept = (0..cfg.m)
                    .filter(|&c| p.is_kept(row, g * cfg.m + c))
                    .count();
                if kept < cfg.n {
                    return Err(Error::InfeasibleNesting {
                        context: format!(
                            "row {row} group {g} keeps {kept} < n={}",
                            cfg.n
                        ),
                    });
                }
            }
        }
    }
    structured_prune(d, fisher, cfg.v, cfg.n, cfg.m, mode, prev)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prune::fisher::FisherInverse;

    fn dense(rows: usize, cols: usize, data: &[f32]) -> DenseMatrix {
        DenseMatrix::new(rows, cols, data.to_vec()).unwrap()
    }

    #[test]
    fn search_strategy_threshold() {
        assert_eq!(column_search_strategy(8), ColumnSearch::Exhaustive);
        assert_eq!(column_search_strategy(20), ColumnSearch::Exhaustive);
        // C(27,4) = 17550, C(28,4) = 20475.
        assert_eq!(column_search_strategy(27), ColumnSearch::Exhaustive);
        assert_eq!(column_search_strategy(28), ColumnSearch::Greedy);
        assert_eq!(column_search_strategy(64), ColumnSearch::Greedy);
    }

    #[test]
    fn single_block_keeps_largest_pair_under_diagonal_fisher() {
        // w = [3,1,2,0.5], m=4: all columns selected, keep {0,2}.
        let d = dense(1, 4, &[3.0, 1.0, 2.0, 0.5]);
        let fisher = FisherInverse::scaled_identity(1, 4, 1.0);
        let cfg = VnmConfig::new(1, 2, 4);
        let mask = so_prune_vnm(&d, &fisher, &cfg, SaliencyMode::Exact, None).unwrap();
        assert_eq!(mask.keep(), &[true, false, true, false]);
    }

    #[test]
    fn nesting_restricts_candidates() {
        let d = dense(1, 4, &[3.0, 1.0, 2.0, 0.5]);
        let fisher = FisherInverse::scaled_identity(1, 4, 1.0);
        let cfg = VnmConfig::new(1, 2, 4);
        // prev forbids column 0; best admissible pair becomes {2,1}.
        let prev = SparsityMask::new(1, 4, vec![false, true, true, true]).unwrap();
        let mask = so_prune_vnm(&d, &fisher, &cfg, SaliencyMode::Exact, Some(&prev)).unwrap();
        assert_eq!(mask.keep(), &[false, true, true, false]);
        assert!(mask.is_subset_of(&prev));
    }

    #[test]
    fn infeasible_nesting_detected() {
        let d = dense(1, 4, &[3.0, 1.0, 2.0, 0.5]);
        let fisher = FisherInverse::scaled_identity(1, 4, 1.0);
        let cfg = VnmConfig::new(1, 2, 4);
        let prev = SparsityMask::new(1, 4, vec![false, false, true, false]).unwrap();
        assert!(matches!(
            so_prune_vnm(&d, &fisher, &cfg, SaliencyMode::Exact, Some(&prev)),
            Err(Error::InfeasibleNesting { .. })
        ));
    }

    #[test]
    fn fisher_shape_must_match() {
        let d = dense(1, 8, &[1.0; 8]);
        let cfg = VnmConfig::new(1, 2, 8);
        let wrong_width = FisherInverse::scaled_identity(1, 4, 1.0);
        assert!(matches!(
            so_prune_vnm(&d, &wrong_width, &cfg, SaliencyMode::Exact, None),
            Err(Error::FisherShapeMismatch { .. })
        ));
        let wrong_count = FisherInverse::scaled_identity(3, 8, 1.0);
        assert!(matches!(
            so_prune_vnm(&d, &wrong_count, &cfg, SaliencyMode::Exact, None),
            Err(Error::FisherShapeMismatch { .. })
        ));
    }

    #[test]
    fn greedy_path_produces_valid_mask() {
        // m=64 engages the greedy column search.
        let data: Vec<f32> = (0..2 * 64).map(|i| ((i * 37 % 101) as f32) - 50.0).collect();
        let d = dense(2, 64, &data);
        let cfg = VnmConfig::new(2, 2, 64);
        let fisher = FisherInverse::scaled_identity(2, 64, 1.0);
        let mask = so_prune_vnm(&d, &fisher, &cfg, SaliencyMode::Exact, None).unwrap();
        assert!(mask.vnm_valid(&cfg));
        assert_eq!(mask.popcount(), 2 * 2);
    }
}
