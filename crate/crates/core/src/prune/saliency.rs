//! Saliency scores over the inverse empirical Fisher.
//!
//! The exact score of a weight set Q is the quadratic form
//! `1/2 * w_Q^T (Finv_QQ)^-1 w_Q`, where `Finv_QQ` is the Q-submatrix of
//! the inverse Fisher block. The pair-wise variant composes the score from
//! singleton terms plus second-order interaction corrections, trading
//! fidelity for the cost of large-set inversions.

use crate::error::{Error, Result};
use crate::prune::spd::SymMatrix;

/// Canonical selector sets over a weight group: each entry names the index
/// subset a candidate pattern keeps (or scores) within the group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateSet {
    group_size: usize,
    subsets: Vec<Vec<usize>>,
}

impl CandidateSet {
    pub fn new(group_size: usize, subsets: Vec<Vec<usize>>) -> Result<Self> {
        for s in &subsets {
            if s.iter().any(|&i| i >= group_size) {
                return Err(Error::DimensionMismatch {
                    context: format!("selector index out of group bounds {group_size}"),
                });
            }
        }
        for i in 0..subsets.len() {
            for j in i + 1..subsets.len() {
                if subsets[i] == subsets[j] {
                    return Err(Error::DimensionMismatch {
                        context: "duplicate selector subset".to_string(),
                    });
                }
            }
        }
        Ok(Self {
            group_size,
            subsets,
        })
    }

    /// All `C(group_size, keep)` subsets in lexicographic order.
    pub fn keep_patterns(group_size: usize, keep: usize) -> Self {
        let mut subsets = Vec::new();
        let mut current = Vec::with_capacity(keep);
        fn rec(start: usize, group: usize, keep: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if cur.len() == keep {
                out.push(cur.clone());
                return;
            }
            for i in start..group {
                cur.push(i);
                rec(i + 1, group, keep, cur, out);
                cur.pop();
            }
        }
        rec(0, group_size, keep, &mut current, &mut subsets);
        Self {
            group_size,
            subsets,
        }
    }

    /// The six ways of keeping 2 weights in a group of 4 - every pairing of
    /// 2 weights the hardware pattern admits.
    pub fn two_of_four() -> Self {
        Self::keep_patterns(4, 2)
    }

    /// The pair-group selectors `{0}, {1}, {0,1}` behind the pair-wise
    /// composition.
    pub fn pairwise_selectors() -> Self {
        Self {
            group_size: 2,
            subsets: vec![vec![0], vec![1], vec![0, 1]],
        }
    }

    pub fn group_size(&self) -> usize {
        self.group_size
    }

    pub fn subsets(&self) -> &[Vec<usize>] {
        &self.subsets
    }
}

/// Exact saliency of a pruned set: `1/2 * w_Q^T (Finv_QQ)^-1 w_Q`.
///
/// `finv_qq` is the Q-submatrix of the inverse Fisher block, already
/// extracted; it must be SPD (guaranteed under dampening).
pub fn saliency_exact(w_q: &[f64], finv_qq: &SymMatrix) -> Result<f64> {
    if w_q.len() != finv_qq.dim() {
        return Err(Error::DimensionMismatch {
            context: format!("weights {} vs submatrix {}", w_q.len(), finv_qq.dim()),
        });
    }
    if w_q.is_empty() {
        return Ok(0.0);
    }
    let x = finv_qq.solve_spd(w_q)?;
    let mut dot = 0.0;
    for i in 0..w_q.len() {
        dot += w_q[i] * x[i];
    }
    Ok(0.5 * dot)
}

fn singleton(w: &[f64], finv: &SymMatrix, i: usize) -> Result<f64> {
    let fii = finv.at(i, i);
    if fii <= 0.0 {
        return Err(Error::SingularSubmatrix);
    }
    Ok(0.5 * w[i] * w[i] / fii)
}

/// Pair-wise approximate saliency of set Q within one Fisher block:
/// singleton scores plus pair interaction corrections,
/// `sum_i rho_i + sum_{i<j} (rho_ij - rho_i - rho_j)`.
///
/// For |Q| <= 2 the composition telescopes to the exact score, so it is
/// evaluated directly.
pub fn saliency_pairwise(w: &[f64], finv_block: &SymMatrix, q: &[usize]) -> Result<f64> {
    if w.len() != finv_block.dim() {
        return Err(Error::DimensionMismatch {
            context: format!("weights {} vs block {}", w.len(), finv_block.dim()),
        });
    }
    if q.iter().any(|&i| i >= w.len()) {
        return Err(Error::DimensionMismatch {
            context: "saliency index out of group bounds".to_string(),
        });
    }
    if q.len() <= 2 {
        let wq: Vec<f64> = q.iter().map(|&i| w[i]).collect();
        return saliency_exact(&wq, &finv_block.submatrix(q));
    }
    let mut total = 0.0;
    for &i in q {
        total += singleton(w, finv_block, i)?;
    }
    for (a, &i) in q.iter().enumerate() {
        for &j in &q[a + 1..] {
            let pair = [w[i], w[j]];
            let rho_ij = saliency_exact(&pair, &finv_block.submatrix(&[i, j]))?;
            let corr = rho_ij - singleton(w, finv_block, i)? - singleton(w, finv_block, j)?;
            total += corr;
        }
    }
    Ok(total)
}
