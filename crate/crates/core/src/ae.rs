//! Angular embedding: fit the subspace that maximizes the summed squared
//! cosines between the centered, unit-normalized samples and the basis.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{center, leading_subspace, normalize_columns, DataMatrix, SphereData, Subspace};
use crate::model::{FitConfig, FitModel, FitStats, Method};

/// Centers `x`, maps each sample onto the unit sphere and keeps the top-`d`
/// eigenvectors of `U Uᵀ`.
pub fn fit_ae(x: &DataMatrix, d: usize, config: &FitConfig) -> Result<FitModel> {
    let start = Instant::now();
    let max = x.dim().min(x.n_samples());
    if d == 0 || d > max {
        return Err(Error::InvalidRank { requested: d, max });
    }
    let (mean, xc) = center(x);
    let units = normalize_columns(&xc, config.zero_tol)?;
    let (subspace, path) = leading_subspace(units.units(), d, config.strategy, config.seed)?;
    Ok(FitModel {
        mean,
        subspace,
        method: Method::Ae,
        trim: None,
        stats: FitStats {
            samples_used: units.n_units(),
            dropped_zero_norm: units.dropped().len(),
            wall_time_s: start.elapsed().as_secs_f64(),
            iterations: None,
            path: Some(path),
        },
    })
}

/// `trace(Qᵀ U Uᵀ Q)`, the sum over samples and basis vectors of `cos²`.
pub fn objective(u: &SphereData, q: &Subspace) -> Result<f64> {
    if u.dim() != q.dim() {
        return Err(Error::InvalidData(format!(
            "samples have dimension {}, subspace {}",
            u.dim(),
            q.dim()
        )));
    }
    let cosines = q.basis().tr_mul(u.units());
    Ok(cosines.norm_squared())
}

fn check_features(model: &FitModel, x: &DataMatrix) -> Result<()> {
    if model.dim() != x.dim() {
        return Err(Error::InvalidData(format!(
            "model has {} features, data has {}",
            model.dim(),
            x.dim()
        )));
    }
    Ok(())
}

fn centered_by(mean: &DVector<f64>, x: &DataMatrix) -> DMatrix<f64> {
    let mut out = x.values().clone();
    for mut col in out.column_iter_mut() {
        col -= mean;
    }
    out
}

/// Coordinates `Qᵀ (X - mean 1ᵀ)`, `d x n`.
pub fn project(model: &FitModel, x: &DataMatrix) -> Result<DMatrix<f64>> {
    check_features(model, x)?;
    Ok(model.subspace.basis().tr_mul(&centered_by(&model.mean, x)))
}

/// `mean 1ᵀ + Q Qᵀ (X - mean 1ᵀ)` in the original data scale.
pub fn reconstruct(model: &FitModel, x: &DataMatrix) -> Result<DataMatrix> {
    let coords = project(model, x)?;
    let mut out = model.subspace.basis() * coords;
    for mut col in out.column_iter_mut() {
        col += &model.mean;
    }
    DataMatrix::new(out)
}

/// Extremes of `φ(q) = cos²(q, uᵢ) + cos²(q, uⱼ)` over directions `q` in the
/// plane of the pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiRange {
    pub max: f64,
    pub min: f64,
}

impl PhiRange {
    pub fn spread(&self) -> f64 {
        self.max - self.min
    }
}

/// Sweeps `sweep` evenly spaced directions over a half turn of the plane
/// spanned by `ui` and `uj` (`φ(-q) = φ(q)`, so this covers every line).
pub fn pair_phi_range(ui: &DVector<f64>, uj: &DVector<f64>, sweep: usize) -> Result<PhiRange> {
    if ui.len() != uj.len() {
        return Err(Error::InvalidData("vectors differ in length".into()));
    }
    if sweep == 0 {
        return Err(Error::InvalidData("sweep must be positive".into()));
    }
    for v in [ui, uj] {
        if (v.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidData("inputs must be unit vectors".into()));
        }
    }
    let e1 = ui.clone();
    let mut e2 = uj - &e1 * e1.dot(uj);
    let off = e2.norm();
    if off <= 1e-12 {
        return Err(Error::InvalidData("inputs are parallel".into()));
    }
    e2 /= off;

    let mut max = f64::NEG_INFINITY;
    let mut min = f64::INFINITY;
    for k in 0..sweep {
        let t = std::f64::consts::PI * k as f64 / sweep as f64;
        let q = &e1 * t.cos() + &e2 * t.sin();
        let phi = q.dot(ui).powi(2) + q.dot(uj).powi(2);
        max = max.max(phi);
        min = min.min(phi);
    }
    Ok(PhiRange { max, min })
}
