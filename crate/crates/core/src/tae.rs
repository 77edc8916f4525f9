//! Trimmed angular embedding.
//!
//! Every unit sample is tried as a stand-in for the leading component: its
//! outlier count `τᵢ` is the number of samples whose absolute cosine to it is
//! strictly below `cos η`. The sample with the smallest count (first index on
//! ties) is the pivot, and exactly the samples it flags are removed before the
//! angular embedding fit.

use std::f64::consts::FRAC_PI_2;
use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{center, leading_subspace, normalize_columns, DataMatrix, SphereData};
use crate::model::{FitConfig, FitModel, FitStats, Method};

/// Rows of the pairwise cosine matrix materialized at once.
pub const DEFAULT_BLOCK: usize = 256;

/// Outcome of the trimming pass. Indices refer to the columns of the unit
/// sample set that was trimmed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrimReport {
    pub eta_theta: f64,
    pub cos_threshold: f64,
    pub tau: Vec<usize>,
    pub tau_min: usize,
    pub pivot: usize,
    pub outliers: Vec<usize>,
    pub inliers: Vec<usize>,
}

impl TrimReport {
    /// Rebuilds a report from its persisted summary; `tau` is not stored and
    /// comes back empty.
    pub(crate) fn from_summary(
        eta_theta: f64,
        tau_min: usize,
        pivot: usize,
        outliers: Vec<usize>,
        n_inliers: usize,
    ) -> Result<Self> {
        check_threshold(eta_theta)?;
        let m = n_inliers + outliers.len();
        if outliers.len() != tau_min
            || pivot >= m
            || outliers.windows(2).any(|w| w[0] >= w[1])
            || outliers.iter().any(|&o| o >= m)
        {
            return Err(Error::InvalidData("inconsistent trim summary".into()));
        }
        let inliers = complement(&outliers, m);
        Ok(TrimReport {
            eta_theta,
            cos_threshold: eta_theta.cos(),
            tau: Vec::new(),
            tau_min,
            pivot,
            outliers,
            inliers,
        })
    }
}

fn complement(sorted: &[usize], m: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(m - sorted.len());
    let mut it = sorted.iter().peekable();
    for j in 0..m {
        if it.peek() == Some(&&j) {
            it.next();
        } else {
            out.push(j);
        }
    }
    out
}

fn check_threshold(eta_theta: f64) -> Result<()> {
    if eta_theta.is_finite() && eta_theta > 0.0 && eta_theta < FRAC_PI_2 {
        Ok(())
    } else {
        Err(Error::InvalidThreshold(eta_theta))
    }
}

/// One horizontal slice of `C = Uᵀ U`: rows `start..start + rows.nrows()`.
#[derive(Debug, Clone)]
pub struct CosineBlock {
    pub start: usize,
    pub rows: DMatrix<f64>,
}

/// Iterator over row blocks of the pairwise cosine matrix.
pub struct CosineBlocks<'a> {
    units: &'a DMatrix<f64>,
    block: usize,
    next: usize,
}

impl Iterator for CosineBlocks<'_> {
    type Item = CosineBlock;

    fn next(&mut self) -> Option<CosineBlock> {
        let m = self.units.ncols();
        if self.next >= m {
            return None;
        }
        let start = self.next;
        let len = self.block.min(m - start);
        self.next += len;
        Some(CosineBlock {
            start,
            rows: cosine_rows(self.units, start, len),
        })
    }
}

fn cosine_rows(units: &DMatrix<f64>, start: usize, len: usize) -> DMatrix<f64> {
    units.columns(start, len).tr_mul(units)
}

/// Pairwise cosines in slices of at most `block` rows, so only
/// `block x m` values are live at a time.
pub fn cosine_gram(u: &SphereData, block: usize) -> Result<CosineBlocks<'_>> {
    if block == 0 {
        return Err(Error::InvalidData("block size must be at least 1".into()));
    }
    Ok(CosineBlocks {
        units: u.units(),
        block,
        next: 0,
    })
}

/// `τᵢ = #{ j : |uᵢᵀ uⱼ| < cos η }`. Blocks are counted in parallel.
pub fn outlier_counts(u: &SphereData, eta_theta: f64, block: usize) -> Result<Vec<usize>> {
    check_threshold(eta_theta)?;
    if block == 0 {
        return Err(Error::InvalidData("block size must be at least 1".into()));
    }
    let threshold = eta_theta.cos();
    let units = u.units();
    let m = units.ncols();
    let starts: Vec<usize> = (0..m).step_by(block).collect();
    let counts: Vec<Vec<usize>> = starts
        .par_iter()
        .map(|&start| {
            let len = block.min(m - start);
            let rows = cosine_rows(units, start, len);
            (0..len)
                .map(|i| rows.row(i).iter().filter(|c| c.abs() < threshold).count())
                .collect()
        })
        .collect();
    Ok(counts.into_iter().flatten().collect())
}

/// Picks the pivot (smallest index attaining `min τ`) and splits the samples
/// by their absolute cosine to it. Returns the report and the inlier columns
/// in their original order.
pub fn select_inliers(
    u: &SphereData,
    tau: &[usize],
    eta_theta: f64,
) -> Result<(TrimReport, SphereData)> {
    check_threshold(eta_theta)?;
    let m = u.n_units();
    if tau.len() != m {
        return Err(Error::InvalidData(format!(
            "{} outlier counts for {m} samples",
            tau.len()
        )));
    }
    let (pivot, &tau_min) = tau
        .iter()
        .enumerate()
        .min_by(|(i, a), (j, b)| a.cmp(b).then(i.cmp(j)))
        .expect("non-empty");
    let threshold = eta_theta.cos();
    let pivot_row = cosine_rows(u.units(), pivot, 1);
    let (outliers, inliers): (Vec<usize>, Vec<usize>) =
        (0..m).partition(|&j| pivot_row[j].abs() < threshold);
    if outliers.len() != tau_min {
        return Err(Error::InvalidData(format!(
            "outlier counts do not match the samples: pivot {pivot} flags {} samples, tau says {tau_min}",
            outliers.len()
        )));
    }
    let kept = u.select(&inliers)?;
    let report = TrimReport {
        eta_theta,
        cos_threshold: threshold,
        tau: tau.to_vec(),
        tau_min,
        pivot,
        outliers,
        inliers,
    };
    Ok((report, kept))
}

/// Trims, then fits angular embedding on the survivors. The model mean is
/// the mean of all input samples.
pub fn fit_tae(x: &DataMatrix, d: usize, eta_theta: f64, config: &FitConfig) -> Result<FitModel> {
    let start = Instant::now();
    check_threshold(eta_theta)?;
    if d == 0 {
        return Err(Error::InvalidRank {
            requested: d,
            max: x.dim().min(x.n_samples()),
        });
    }
    let (mean, xc) = center(x);
    let units = normalize_columns(&xc, config.zero_tol)?;
    let tau = outlier_counts(&units, eta_theta, config.block)?;
    let (report, kept) = select_inliers(&units, &tau, eta_theta)?;
    let (subspace, path) = leading_subspace(kept.units(), d, config.strategy, config.seed)?;
    Ok(FitModel {
        mean,
        subspace,
        method: Method::Tae,
        trim: Some(report),
        stats: FitStats {
            samples_used: kept.n_units(),
            dropped_zero_norm: units.dropped().len(),
            wall_time_s: start.elapsed().as_secs_f64(),
            iterations: None,
            path: Some(path),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;
    use std::f64::consts::FRAC_PI_3;

    fn units(m: DMatrix<f64>) -> SphereData {
        SphereData::new(m).unwrap()
    }

    #[test]
    fn gram_blocks_small_cases() {
        let u = units(dmatrix![1.0, 0.0; 0.0, 1.0]);
        let blocks: Vec<_> = cosine_gram(&u, 1).unwrap().collect();
        assert_eq!(blocks.len(), 2);
        assert_eq!(blocks[0].rows, dmatrix![1.0, 0.0]);
        assert_eq!(blocks[1].start, 1);
        assert_eq!(blocks[1].rows, dmatrix![0.0, 1.0]);

        let u = units(dmatrix![1.0, 1.0; 0.0, 0.0]);
        let blocks: Vec<_> = cosine_gram(&u, 8).unwrap().collect();
        assert_eq!(blocks.len(), 1);
        assert_eq!(blocks[0].rows, dmatrix![1.0, 1.0; 1.0, 1.0]);
        assert!(cosine_gram(&u, 0).is_err());
    }

    #[test]
    fn counts_and_selection_examples() {
        let u = units(dmatrix![1.0, 1.0, 0.0; 0.0, 0.0, 1.0]);
        let tau = outlier_counts(&u, FRAC_PI_3, 256).unwrap();
        assert_eq!(tau, vec![1, 1, 2]);
        let (report, kept) = select_inliers(&u, &tau, FRAC_PI_3).unwrap();
        assert_eq!(report.pivot, 0);
        assert_eq!(report.tau_min, 1);
        assert_eq!(report.outliers, vec![2]);
        assert_eq!(report.inliers, vec![0, 1]);
        assert_eq!(kept.units(), &dmatrix![1.0, 1.0; 0.0, 0.0]);
    }

    #[test]
    fn antipodal_samples_are_not_outliers() {
        let u = units(dmatrix![1.0, -1.0, 0.0; 0.0, 0.0, 1.0]);
        assert_eq!(outlier_counts(&u, FRAC_PI_3, 2).unwrap(), vec![1, 1, 2]);
    }

    #[test]
    fn identical_columns_have_no_outliers() {
        let u = units(DMatrix::from_fn(3, 5, |r, _| if r == 1 { 1.0 } else { 0.0 }));
        let tau = outlier_counts(&u, FRAC_PI_3, 2).unwrap();
        assert_eq!(tau, vec![0; 5]);
        let (report, kept) = select_inliers(&u, &tau, FRAC_PI_3).unwrap();
        assert!(report.outliers.is_empty());
        assert_eq!(kept.units(), u.units());
    }

    #[test]
    fn threshold_validated() {
        let u = units(dmatrix![1.0; 0.0]);
        for eta in [0.0, FRAC_PI_2, -0.1, 2.0, f64::NAN] {
            assert!(matches!(
                outlier_counts(&u, eta, 4),
                Err(Error::InvalidThreshold(_))
            ));
        }
    }

    #[test]
    fn boundary_cosine_is_not_an_outlier() {
        // |cos| equal to the threshold stays an inlier (strict comparison)
        let eta: f64 = FRAC_PI_3;
        let c = eta.cos();
        let s = (1.0 - c * c).sqrt();
        let u = units(dmatrix![1.0, c; 0.0, s]);
        let threshold = eta.cos();
        let dot = u.units().column(0).dot(&u.units().column(1));
        let tau = outlier_counts(&u, eta, 4).unwrap();
        let expected = usize::from(dot.abs() < threshold);
        assert_eq!(tau, vec![expected, expected]);
    }

    #[test]
    fn mismatched_tau_rejected() {
        let u = units(dmatrix![1.0, 0.0; 0.0, 1.0]);
        assert!(select_inliers(&u, &[0], FRAC_PI_3).is_err());
        assert!(select_inliers(&u, &[0, 0], FRAC_PI_3).is_err());
    }

    #[test]
    fn summary_rebuilds_inliers() {
        let r = TrimReport::from_summary(1.0, 2, 0, vec![1, 4], 3).unwrap();
        assert_eq!(r.inliers, vec![0, 2, 3]);
        assert!(TrimReport::from_summary(1.0, 3, 0, vec![1, 4], 3).is_err());
        assert!(TrimReport::from_summary(2.0, 2, 0, vec![1, 4], 3).is_err());
    }
}
