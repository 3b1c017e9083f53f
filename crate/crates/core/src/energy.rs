//! Energy metric: kept absolute mass over total absolute mass.
//!
//! Energy quantifies how much of a matrix's magnitude a selection policy
//! preserves at a given sparsity, which makes policies of very different
//! granularity comparable on one axis.

use serde::Serialize;

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::mask::SparsityMask;
use crate::prune::{
    keep_budget, magnitude_keep_count, magnitude_prune_vectorwise, magnitude_prune_vnm,
};
use crate::config::VnmConfig;

/// One sweep point: a policy evaluated at one sparsity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyReport {
    pub policy: String,
    pub sparsity: f64,
    pub energy: f64,
}

/// Ratio of kept absolute mass to total absolute mass, in `[0, 1]`.
/// Sums run in f64, in linear index order.
pub fn energy(d: &DenseMatrix, mask: &SparsityMask) -> Result<f64> {
    if mask.rows() != d.rows() || mask.cols() != d.cols() {
        return Err(Error::ShapeMismatch {
            context: format!(
                "mask {}x{} vs matrix {}x{}",
                mask.rows(),
                mask.cols(),
                d.rows(),
                d.cols()
            ),
        });
    }
    let mut kept = 0.0f64;
    let mut total = 0.0f64;
    for (i, &w) in d.data().iter().enumerate() {
        let a = w.abs() as f64;
        total += a;
        if mask.keep()[i] {
            kept += a;
        }
    }
    if total == 0.0 {
        return Err(Error::ZeroDenominator);
    }
    Ok(kept / total)
}

/// Weight-selection policy for the energy sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepPolicy {
    /// Top-k by magnitude, the ideal selection.
    Unstructured,
    /// Magnitude V:N:M at the given block height; the N:M ratio comes from
    /// the sweep's sparsity grid.
    Vnm { v: usize },
    /// Vector-wise pruning with vertical vectors of the given length.
    VectorWise { l: usize },
}

impl SweepPolicy {
    pub fn name(&self) -> String {
        match self {
            SweepPolicy::Unstructured => "unstructured".to_string(),
            SweepPolicy::Vnm { v } => format!("vnm_v{v}"),
            SweepPolicy::VectorWise { l } => format!("vw_{l}"),
        }
    }
}

/// Maps a grid sparsity back to the block width `m` with `s = 1 - 2/m`.
fn grid_m(s: f64) -> Option<usize> {
    if !(0.0..1.0).contains(&s) {
        return None;
    }
    let mf = 2.0 / (1.0 - s);
    let m = mf.round();
    if (mf - m).abs() > 1e-6 || m < 4.0 {
        return None;
    }
    Some(m as usize)
}

/// Evaluates each (policy, sparsity) pair and reports one energy value per
/// pair, policies outer, sparsities inner.
///
/// V:N:M sparsities must sit on the `1 - 2/m` grid and divide the matrix
/// shape. The unstructured policy at a grid point keeps exactly the same
/// entry count as the V:N:M policy there, so the comparison is at equal
/// kept-count.
pub fn energy_sweep(
    d: &DenseMatrix,
    policies: &[SweepPolicy],
    sparsities: &[f64],
) -> Result<Vec<EnergyReport>> {
    let mut out = Vec::with_capacity(policies.len() * sparsities.len());
    for policy in policies {
        for &s in sparsities {
            let mask = match policy {
                SweepPolicy::Unstructured => {
                    if !(s > 0.0 && s <= 1.0) {
                        return Err(Error::UnrealizableSparsity {
                            policy: policy.name(),
                            sparsity: s,
                        });
                    }
                    magnitude_keep_count(d, keep_budget(d.rows() * d.cols(), s))
                }
                SweepPolicy::Vnm { v } => {
                    let m = grid_m(s).ok_or_else(|| Error::UnrealizableSparsity {
                        policy: policy.name(),
                        sparsity: s,
                    })?;
                    if d.cols() % m != 0 || *v == 0 || d.rows() % v != 0 {
                        return Err(Error::UnrealizableSparsity {
                            policy: policy.name(),
                            sparsity: s,
                        });
                    }
                    magnitude_prune_vnm(d, &VnmConfig::new(*v, 2, m))?
                }
                SweepPolicy::VectorWise { l } => {
                    if !(s > 0.0 && s <= 1.0) || *l == 0 || d.rows() % l != 0 {
                        return Err(Error::UnrealizableSparsity {
                            policy: policy.name(),
                            sparsity: s,
                        });
                    }
                    magnitude_prune_vectorwise(d, *l, s)?
                }
            };
            out.push(EnergyReport {
                policy: policy.name(),
                sparsity: s,
                energy: energy(d, &mask)?,
            });
        }
    }
    Ok(out)
}

/// CSV export with the exact columns `policy,sparsity,energy`.
pub fn reports_to_csv(reports: &[EnergyReport]) -> String {
    let mut s = String::from("policy,sparsity,energy\n");
    for r in reports {
        s.push_str(&format!("{},{},{}\n", r.policy, r.sparsity, r.energy));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense(rows: usize, cols: usize, data: &[f32]) -> DenseMatrix {
        DenseMatrix::new(rows, cols, data.to_vec()).unwrap()
    }

    #[test]
    fn full_and_empty_masks() {
        let d = dense(1, 4, &[1.0, -2.0, 3.0, -4.0]);
        assert_eq!(energy(&d, &SparsityMask::full(1, 4)).unwrap(), 1.0);
        assert_eq!(energy(&d, &SparsityMask::empty(1, 4)).unwrap(), 0.0);
    }

    #[test]
    fn hand_value() {
        let d = dense(1, 4, &[1.0, 2.0, 3.0, 4.0]);
        let mask = SparsityMask::new(1, 4, vec![false, false, true, true]).unwrap();
        assert_eq!(energy(&d, &mask).unwrap(), 0.7);
    }

    #[test]
    fn zero_matrix_is_rejected() {
        let d = DenseMatrix::zeros(2, 2);
        assert!(matches!(
            energy(&d, &SparsityMask::full(2, 2)),
            Err(Error::ZeroDenominator)
        ));
    }

    #[test]
    fn grid_mapping() {
        assert_eq!(grid_m(0.75), Some(8));
        assert_eq!(grid_m(1.0 - 2.0 / 20.0), Some(20));
        assert_eq!(grid_m(0.6), Some(5)); // on-grid but m=5
        assert_eq!(grid_m(0.63), None);
        assert_eq!(grid_m(0.5), Some(4));
        assert_eq!(grid_m(0.3), None);
    }

    #[test]
    fn single_point_sweep_equals_direct_energy() {
        let data: Vec<f32> = (0..64).map(|i| ((i * 23 % 31) as f32) - 15.0).collect();
        let d = dense(8, 8, &data);
        let s = 0.75;
        let reports = energy_sweep(&d, &[SweepPolicy::Vnm { v: 4 }], &[s]).unwrap();
        assert_eq!(reports.len(), 1);
        let cfg = VnmConfig::new(4, 2, 8);
        let mask = magnitude_prune_vnm(&d, &cfg).unwrap();
        assert_eq!(reports[0].energy, energy(&d, &mask).unwrap());
        assert_eq!(reports[0].policy, "vnm_v4");
    }

    #[test]
    fn unrealizable_sparsity_is_rejected() {
        let d = dense(8, 8, &[1.0; 64]);
        assert!(matches!(
            energy_sweep(&d, &[SweepPolicy::Vnm { v: 4 }], &[0.63]),
            Err(Error::UnrealizableSparsity { .. })
        ));
        // Grid point whose m does not divide the column count.
        assert!(matches!(
            energy_sweep(&d, &[SweepPolicy::Vnm { v: 4 }], &[1.0 - 2.0 / 20.0]),
            Err(Error::UnrealizableSparsity { .. })
        ));
        assert!(matches!(
            energy_sweep(&d, &[SweepPolicy::VectorWise { l: 3 }], &[0.5]),
            Err(Error::UnrealizableSparsity { .. })
        ));
    }

    #[test]
    fn csv_shape() {
        let reports = vec![EnergyReport {
            policy: "unstructured".to_string(),
            sparsity: 0.75,
            energy: 0.5,
        }];
        let csv = reports_to_csv(&reports);
        assert_eq!(csv, "policy,sparsity,energy\nunstructured,0.75,0.5\n");
    }
}
