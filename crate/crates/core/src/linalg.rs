//! Dense building blocks: centering, projection onto the unit sphere,
//! dominant eigenspaces of `A Aᵀ` and subspace comparison.
//!
//! Samples are stored as columns. Every eigen-solve here is symmetric: either
//! the `D x D` scatter `A Aᵀ` or the `m x m` Gram matrix `Aᵀ A`, whichever is
//! smaller, or a sketched `l x l` problem for the randomized range finder.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Columns with norm at or below this are treated as zero after centering.
pub const DEFAULT_ZERO_TOL: f64 = 1e-12;

/// Eigenvalues at or below this are discarded on the Gram path.
pub const EIGEN_FLOOR: f64 = 1e-12;

/// `Strategy::Auto` switches to the randomized range finder above this size.
pub const RANDOMIZED_MIN_DIM: usize = 1024;

pub const DEFAULT_OVERSAMPLE: usize = 10;
pub const DEFAULT_POWER_ITERS: usize = 2;

const UNIT_NORM_TOL: f64 = 1e-12;

/// A `D x n` sample matrix, one sample per column.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: DMatrix<f64>,
    mean: DVector<f64>,
}

impl DataMatrix {
    /// Wraps `values`, rejecting empty shapes and non-finite entries.
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::InvalidData(format!(
                "matrix must be non-empty, got {}x{}",
                values.nrows(),
                values.ncols()
            )));
        }
        for col in 0..values.ncols() {
            for row in 0..values.nrows() {
                if !values[(row, col)].is_finite() {
                    return Err(Error::NonFinite { row, col });
                }
            }
        }
        let mean = DVector::zeros(values.nrows());
        Ok(DataMatrix { values, mean })
    }

    /// Builds the matrix from samples given as rows (the usual CSV layout).
    pub fn from_samples<S: AsRef<[f64]>>(samples: &[S]) -> Result<Self> {
        let n = samples.len();
        let dim = samples.first().map(|s| s.as_ref().len()).unwrap_or(0);
        if let Some((i, s)) = samples
            .iter()
            .enumerate()
            .find(|(_, s)| s.as_ref().len() != dim)
        {
            return Err(Error::InvalidData(format!(
                "sample {i} has {} features, expected {dim}",
                s.as_ref().len()
            )));
        }
        let values = DMatrix::from_fn(dim, n, |r, c| samples[c].as_ref()[r]);
        DataMatrix::new(values)
    }

    /// Feature count `D`.
    pub fn dim(&self) -> usize {
        self.values.nrows()
    }

    /// Sample count `n`.
    pub fn n_samples(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// The mean that was subtracted; all zeros unless produced by [`center`].
    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn into_values(self) -> DMatrix<f64> {
        self.values
    }
}

/// Subtracts the per-feature mean. Returns the mean and the centered data.
pub fn center(x: &DataMatrix) -> (DVector<f64>, DataMatrix) {
    let values = x.values();
    let n = values.ncols() as f64;
    let mut mean: DVector<f64> = values.column_sum() / n;
    // second pass absorbs the rounding error of the first
    let correction = DVector::from_fn(values.nrows(), |r, _| {
        values.row(r).iter().map(|v| v - mean[r]).sum::<f64>() / n
    });
    mean += correction;

    let mut centered = values.clone();
    for mut col in centered.column_iter_mut() {
        col -= &mean;
    }
    let centered = DataMatrix {
        values: centered,
        mean: mean.clone(),
    };
    (mean, centered)
}

/// Unit-norm samples on the `(D-1)`-sphere.
///
/// `kept[j]` is the source column of `units[:, j]`; `dropped` lists the source
/// columns that are absent. Together they partition `0..source_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereData {
    units: DMatrix<f64>,
    kept: Vec<usize>,
    dropped: Vec<usize>,
    source_n: usize,
}

impl SphereData {
    /// Wraps columns that are already unit norm (within `1e-12`).
    pub fn new(units: DMatrix<f64>) -> Result<Self> {
        if units.nrows() == 0 || units.ncols() == 0 {
            return Err(Error::InvalidData("empty unit matrix".into()));
        }
        for (j, col) in units.column_iter().enumerate() {
            let norm = col.norm();
            if !norm.is_finite() || (norm - 1.0).abs() > UNIT_NORM_TOL {
                return Err(Error::InvalidData(format!(
                    "column {j} has norm {norm}, expected 1"
                )));
            }
        }
        let m = units.ncols();
        Ok(SphereData {
            units,
            kept: (0..m).collect(),
            dropped: Vec::new(),
            source_n: m,
        })
    }

    pub fn units(&self) -> &DMatrix<f64> {
        &self.units
    }

    pub fn dim(&self) -> usize {
        self.units.nrows()
    }

    /// Number of unit columns `m`.
    pub fn n_units(&self) -> usize {
        self.units.ncols()
    }

    pub fn kept(&self) -> &[usize] {
        &self.kept
    }

    pub fn dropped(&self) -> &[usize] {
        &self.dropped
    }

    pub fn source_n(&self) -> usize {
        self.source_n
    }

    /// Keeps the listed columns (strictly increasing). The result's source is
    /// `self`: its `kept` and `dropped` index into this set's columns.
    pub fn select(&self, columns: &[usize]) -> Result<SphereData> {
        let m = self.n_units();
        if columns.windows(2).any(|w| w[0] >= w[1]) || columns.iter().any(|&c| c >= m) {
            return Err(Error::InvalidData(
                "selection must be strictly increasing and in range".into(),
            ));
        }
        if columns.is_empty() {
            return Err(Error::InvalidData("selection is empty".into()));
        }
        let units = self.units.select_columns(columns);
        let mut dropped = Vec::with_capacity(m - columns.len());
        let mut next = columns.iter().peekable();
        for j in 0..m {
            if next.peek() == Some(&&j) {
                next.next();
            } else {
                dropped.push(j);
            }
        }
        Ok(SphereData {
            units,
            kept: columns.to_vec(),
            dropped,
            source_n: m,
        })
    }
}

/// Scales every column to unit length. Columns whose norm is at most
/// `zero_tol` are recorded in `dropped` and left out.
pub fn normalize_columns(xc: &DataMatrix, zero_tol: f64) -> Result<SphereData> {
    let values = xc.values();
    let mut kept = Vec::with_capacity(values.ncols());
    let mut dropped = Vec::new();
    for (j, col) in values.column_iter().enumerate() {
        if col.norm() > zero_tol {
            kept.push(j);
        } else {
            dropped.push(j);
        }
    }
    if kept.is_empty() {
        return Err(Error::EmptyAfterNormalization);
    }
    let mut units = values.select_columns(&kept);
    for mut col in units.column_iter_mut() {
        let norm = col.norm();
        col /= norm;
    }
    Ok(SphereData {
        units,
        kept,
        dropped,
        source_n: values.ncols(),
    })
}

/// Orthonormal basis with its eigenvalues, in nonincreasing order.
///
/// Every basis produced by this crate is sign-canonical: in each column the
/// entry of largest magnitude (first one on ties) is positive.
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    basis: DMatrix<f64>,
    eigenvalues: Vec<f64>,
}

impl Subspace {
    /// Validates orthonormality (`1e-10`) and eigenvalue order, then
    /// canonicalizes signs.
    pub fn new(mut basis: DMatrix<f64>, eigenvalues: Vec<f64>) -> Result<Self> {
        let d = basis.ncols();
        if d == 0 || basis.nrows() < d {
            return Err(Error::InvalidData(format!(
                "basis shape {}x{d} is not a subspace",
                basis.nrows()
            )));
        }
        if eigenvalues.len() != d {
            return Err(Error::InvalidData(format!(
                "{} eigenvalues for {d} basis vectors",
                eigenvalues.len()
            )));
        }
        if eigenvalues.windows(2).any(|w| w[0] < w[1]) || eigenvalues.iter().any(|&l| l < -1e-12)
        {
            return Err(Error::InvalidData(
                "eigenvalues must be nonincreasing and nonnegative".into(),
            ));
        }
        let gram = basis.tr_mul(&basis);
        let err = (gram - DMatrix::<f64>::identity(d, d)).amax();
        if err > 1e-10 {
            return Err(Error::InvalidData(format!(
                "basis is not orthonormal (max deviation {err:e})"
            )));
        }
        canonicalize_signs(&mut basis);
        Ok(Subspace { basis, eigenvalues })
    }

    /// Orthonormalizes the columns of `spanning` (full column rank) and
    /// attaches zero eigenvalues.
    pub fn from_span(spanning: &DMatrix<f64>) -> Result<Self> {
        let d = spanning.ncols();
        if d == 0 || spanning.nrows() < d {
            return Err(Error::InvalidData("cannot span a subspace".into()));
        }
        let qr = spanning.clone().qr();
        let r = qr.r();
        let scale = spanning.amax().max(f64::MIN_POSITIVE);
        if (0..d).any(|i| r[(i, i)].abs() <= 1e-12 * scale) {
            return Err(Error::InvalidData("spanning set is rank deficient".into()));
        }
        Subspace::new(qr.q(), vec![0.0; d])
    }

    pub(crate) fn from_parts(mut basis: DMatrix<f64>, eigenvalues: Vec<f64>) -> Self {
        canonicalize_signs(&mut basis);
        Subspace { basis, eigenvalues }
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Ambient dimension `D`.
    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }

    /// Number of basis vectors `d`.
    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    /// `Q Qᵀ`
    pub fn projector(&self) -> DMatrix<f64> {
        &self.basis * self.basis.transpose()
    }
}

/// Flips each column so its largest-magnitude entry is positive.
pub fn canonicalize_signs(basis: &mut DMatrix<f64>) {
    for mut col in basis.column_iter_mut() {
        let mut best = 0;
        let mut best_abs = -1.0;
        for (i, v) in col.iter().enumerate() {
            if v.abs() > best_abs {
                best_abs = v.abs();
                best = i;
            }
        }
        if col[best] < 0.0 {
            col.neg_mut();
        }
    }
}

/// How the dominant eigenspace is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// `DPath` when `D <= m`, else `NPath`; `Randomized` for large problems
    /// with few components.
    #[default]
    Auto,
    DPath,
    NPath,
    Randomized,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Auto => "auto",
            Strategy::DPath => "d-path",
            Strategy::NPath => "n-path",
            Strategy::Randomized => "randomized",
        })
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Strategy::Auto),
            "d-path" | "d_path" => Ok(Strategy::DPath),
            "n-path" | "n_path" => Ok(Strategy::NPath),
            "randomized" => Ok(Strategy::Randomized),
            other => Err(Error::InvalidData(format!("unknown strategy {other:?}"))),
        }
    }
}

/// The route actually taken by a fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EigenPath {
    DPath,
    NPath,
    Randomized,
}

impl fmt::Display for EigenPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EigenPath::DPath => "d-path",
            EigenPath::NPath => "n-path",
            EigenPath::Randomized => "randomized",
        })
    }
}

/// Resolves `strategy` for a `dim x m` matrix and `d` components.
pub fn resolve_path(dim: usize, m: usize, d: usize, strategy: Strategy) -> EigenPath {
    match strategy {
        Strategy::DPath => EigenPath::DPath,
        Strategy::NPath => EigenPath::NPath,
        Strategy::Randomized => EigenPath::Randomized,
        Strategy::Auto => {
            let small = dim.min(m);
            if small > RANDOMIZED_MIN_DIM && d <= small / 10 {
                EigenPath::Randomized
            } else if dim <= m {
                EigenPath::DPath
            } else {
                EigenPath::NPath
            }
        }
    }
}

/// Top-`d` eigenvectors of `U Uᵀ` for unit-column data.
pub fn dominant_subspace(u: &SphereData, d: usize, strategy: Strategy, seed: u64) -> Result<Subspace> {
    leading_subspace(u.units(), d, strategy, seed).map(|(s, _)| s)
}

/// Top-`d` eigenvectors of `A Aᵀ` for an arbitrary `D x m` matrix, together
/// with the path that produced them.
pub fn leading_subspace(
    a: &DMatrix<f64>,
    d: usize,
    strategy: Strategy,
    seed: u64,
) -> Result<(Subspace, EigenPath)> {
    let max = a.nrows().min(a.ncols());
    if d == 0 || d > max {
        return Err(Error::InvalidRank { requested: d, max });
    }
    let path = resolve_path(a.nrows(), a.ncols(), d, strategy);
    let subspace = match path {
        EigenPath::DPath => scatter_path(a, d),
        EigenPath::NPath => gram_path(a, d)?,
        EigenPath::Randomized => {
            let oversample = DEFAULT_OVERSAMPLE.min(max - d);
            sketch_path(a, d, oversample, DEFAULT_POWER_ITERS, seed)?
        }
    };
    Ok((subspace, path))
}

fn scatter_path(a: &DMatrix<f64>, d: usize) -> Subspace {
    let scatter = a * a.transpose();
    let (vectors, values) = top_eigenpairs(scatter, d);
    Subspace::from_parts(vectors, values)
}

fn gram_path(a: &DMatrix<f64>, d: usize) -> Result<Subspace> {
    let gram = a.transpose() * a;
    let m = gram.nrows();
    let (vectors, values) = top_eigenpairs(gram, m);
    let available = values.iter().filter(|&&l| l > EIGEN_FLOOR).count();
    if available < d {
        return Err(Error::RankDeficient {
            requested: d,
            available,
        });
    }
    let mut basis = DMatrix::zeros(a.nrows(), d);
    for j in 0..d {
        let mut mapped = a * vectors.column(j);
        let norm = mapped.norm();
        mapped /= norm;
        basis.set_column(j, &mapped);
    }
    Ok(Subspace::from_parts(basis, values[..d].to_vec()))
}

/// Eigenpairs of a symmetric matrix, largest first; the first `count` are
/// returned. Negative round-off in the eigenvalues is clamped to zero.
pub(crate) fn top_eigenpairs(sym: DMatrix<f64>, count: usize) -> (DMatrix<f64>, Vec<f64>) {
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    order.truncate(count);
    let vectors = eig.eigenvectors.select_columns(&order);
    let values = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    (vectors, values)
}

/// Randomized range finder on the unit columns of `u`.
///
/// Draws a seeded Gaussian `D x (d + oversample)` test matrix, runs
/// `power_iters` passes of `U Uᵀ` with re-orthonormalization, then solves the
/// small projected eigenproblem. Same seed, same bits.
pub fn randomized_range(
    u: &SphereData,
    d: usize,
    oversample: usize,
    power_iters: usize,
    seed: u64,
) -> Result<Subspace> {
    sketch_path(u.units(), d, oversample, power_iters, seed)
}

pub(crate) fn sketch_path(
    a: &DMatrix<f64>,
    d: usize,
    oversample: usize,
    power_iters: usize,
    seed: u64,
) -> Result<Subspace> {
    let max = a.nrows().min(a.ncols());
    let width = d + oversample;
    if d == 0 || width > max {
        return Err(Error::InvalidRank {
            requested: width,
            max,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let omega = DMatrix::from_fn(a.nrows(), width, |_, _| rng.sample::<f64, _>(StandardNormal));

    let at = a.transpose();
    let mut q = orthonormalize(a * (&at * omega));
    for _ in 0..power_iters {
        q = orthonormalize(a * (&at * q));
    }
    let projected = q.transpose() * a;
    let small = &projected * projected.transpose();
    let (vectors, values) = top_eigenpairs(small, d);
    Ok(Subspace::from_parts(q * vectors, values))
}

/// Thin-QR orthonormal basis of the columns of `m`.
pub(crate) fn orthonormalize(m: DMatrix<f64>) -> DMatrix<f64> {
    m.qr().q()
}

/// Principal angles between two subspaces of equal rank, ascending, in
/// radians.
///
/// Angles come from the singular values `σ` of `Q1ᵀ Q2` (`acos σ`). Below
/// `π/4` they are taken from the sines instead, i.e. the singular values of
/// `Q2 - Q1 Q1ᵀ Q2`, since `acos` cannot resolve angles much below `1e-8`.
pub fn principal_angles(q1: &Subspace, q2: &Subspace) -> Result<Vec<f64>> {
    if q1.dim() != q2.dim() || q1.rank() != q2.rank() {
        return Err(Error::InvalidData(format!(
            "subspaces {}x{} and {}x{} are not comparable",
            q1.dim(),
            q1.rank(),
            q2.dim(),
            q2.rank()
        )));
    }
    let cross = q1.basis().tr_mul(q2.basis());
    let mut cosines: Vec<f64> = cross
        .clone()
        .svd(false, false)
        .singular_values
        .iter()
        .map(|s| s.clamp(0.0, 1.0))
        .collect();
    cosines.sort_by(|a, b| b.total_cmp(a));

    let residual = q2.basis() - q1.basis() * cross;
    let mut sines: Vec<f64> = residual
        .svd(false, false)
        .singular_values
        .iter()
        .map(|s| s.clamp(0.0, 1.0))
        .collect();
    sines.sort_by(|a, b| a.total_cmp(b));

    let mut angles: Vec<f64> = cosines
        .iter()
        .zip(&sines)
        .map(|(&c, &s)| {
            if c * c >= 0.5 {
                s.asin()
            } else {
                c.acos()
            }
        })
        .collect();
    angles.sort_by(|a, b| a.total_cmp(b));
    Ok(angles)
}

/// Largest principal angle.
pub fn max_principal_angle(q1: &Subspace, q2: &Subspace) -> Result<f64> {
    Ok(principal_angles(q1, q2)?
        .last()
        .copied()
        .unwrap_or(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;
    use std::f64::consts::FRAC_PI_2;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
    }

    fn random_units(rows: usize, cols: usize, seed: u64) -> SphereData {
        let x = DataMatrix::new(random_matrix(rows, cols, seed)).unwrap();
        normalize_columns(&x, DEFAULT_ZERO_TOL).unwrap()
    }

    #[test]
    fn center_two_samples() {
        let x = DataMatrix::new(dmatrix![1.0, 3.0]).unwrap();
        let (mean, xc) = center(&x);
        assert_eq!(mean.as_slice(), &[2.0]);
        assert_eq!(xc.values(), &dmatrix![-1.0, 1.0]);
        assert_eq!(xc.mean(), &mean);
    }

    #[test]
    fn center_zero_mean_is_identity() {
        let x = DataMatrix::new(dmatrix![1.0, -1.0, 0.0; 2.0, -3.0, 1.0]).unwrap();
        let (mean, xc) = center(&x);
        assert!(mean.amax() < 1e-12);
        assert!((xc.values() - x.values()).amax() < 1e-12);
    }

    #[test]
    fn center_matches_naive_mean() {
        let raw = random_matrix(5, 40, 11).map(|v| 3.0 * v + 7.0);
        let x = DataMatrix::new(raw.clone()).unwrap();
        let (mean, xc) = center(&x);
        for r in 0..5 {
            // naive two-pass oracle
            let naive: f64 = (0..40).map(|c| raw[(r, c)]).sum::<f64>() / 40.0;
            let naive = naive + (0..40).map(|c| raw[(r, c)] - naive).sum::<f64>() / 40.0;
            assert!((mean[r] - naive).abs() < 1e-12);
            let row_sum: f64 = xc.values().row(r).iter().sum();
            assert!(row_sum.abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_non_finite_with_location() {
        let err = DataMatrix::new(dmatrix![1.0, 2.0; 3.0, f64::NAN]).unwrap_err();
        assert!(matches!(err, Error::NonFinite { row: 1, col: 1 }));
        let err = DataMatrix::new(dmatrix![1.0, f64::INFINITY]).unwrap_err();
        assert!(matches!(err, Error::NonFinite { row: 0, col: 1 }));
    }

    #[test]
    fn from_samples_transposes() {
        let x = DataMatrix::from_samples(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap();
        assert_eq!(x.dim(), 2);
        assert_eq!(x.n_samples(), 3);
        assert_eq!(x.values()[(1, 2)], 6.0);
        assert!(DataMatrix::from_samples(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn normalize_examples() {
        let x = DataMatrix::new(dmatrix![3.0, 1.0; 4.0, 0.0]).unwrap();
        let u = normalize_columns(&x, DEFAULT_ZERO_TOL).unwrap();
        assert!((u.units()[(0, 0)] - 0.6).abs() < 1e-15);
        assert!((u.units()[(1, 0)] - 0.8).abs() < 1e-15);
        assert_eq!(u.units().column(1).as_slice(), &[1.0, 0.0]);

        let x = DataMatrix::new(dmatrix![0.0, 0.0; 0.0, 2.0]).unwrap();
        let u = normalize_columns(&x, 1e-12).unwrap();
        assert_eq!(u.units(), &dmatrix![0.0; 1.0]);
        assert_eq!(u.dropped(), &[0]);
        assert_eq!(u.kept(), &[1]);
        assert_eq!(u.source_n(), 2);
    }

    #[test]
    fn normalize_all_zero_fails() {
        let x = DataMatrix::new(DMatrix::zeros(3, 4)).unwrap();
        assert!(matches!(
            normalize_columns(&x, DEFAULT_ZERO_TOL),
            Err(Error::EmptyAfterNormalization)
        ));
    }

    #[test]
    fn axis_units_leading_direction() {
        let u = SphereData::new(dmatrix![1.0, -1.0, 0.0; 0.0, 0.0, 1.0]).unwrap();
        for strategy in [Strategy::DPath, Strategy::NPath] {
            let q = dominant_subspace(&u, 1, strategy, 0).unwrap();
            assert!((q.basis()[(0, 0)] - 1.0).abs() < 1e-12);
            assert!(q.basis()[(1, 0)].abs() < 1e-12);
            assert!((q.eigenvalues()[0] - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn full_rank_spans_everything() {
        let u = random_units(4, 4, 3);
        for strategy in [Strategy::DPath, Strategy::NPath] {
            let q = dominant_subspace(&u, 4, strategy, 0).unwrap();
            let err = (q.projector() - DMatrix::<f64>::identity(4, 4)).amax();
            assert!(err < 1e-10, "{strategy}: {err}");
        }
    }

    #[test]
    fn gram_and_scatter_paths_agree() {
        let u = random_units(20, 200, 5);
        let a = dominant_subspace(&u, 3, Strategy::DPath, 0).unwrap();
        let b = dominant_subspace(&u, 3, Strategy::NPath, 0).unwrap();
        assert!(max_principal_angle(&a, &b).unwrap() < 1e-8);
        for (x, y) in a.eigenvalues().iter().zip(b.eigenvalues()) {
            assert!((x - y).abs() < 1e-9 * x.abs().max(1.0));
        }
    }

    #[test]
    fn rank_out_of_range() {
        let u = random_units(3, 5, 1);
        assert!(matches!(
            dominant_subspace(&u, 0, Strategy::Auto, 0),
            Err(Error::InvalidRank { .. })
        ));
        assert!(matches!(
            dominant_subspace(&u, 4, Strategy::Auto, 0),
            Err(Error::InvalidRank { requested: 4, max: 3 })
        ));
    }

    #[test]
    fn gram_path_reports_rank_deficiency() {
        // three copies of one direction in R^5: rank 1
        let u = SphereData::new(DMatrix::from_fn(5, 3, |r, _| if r == 2 { 1.0 } else { 0.0 })).unwrap();
        assert!(matches!(
            dominant_subspace(&u, 2, Strategy::NPath, 0),
            Err(Error::RankDeficient { requested: 2, available: 1 })
        ));
    }

    #[test]
    fn auto_path_selection() {
        assert_eq!(resolve_path(10, 200, 3, Strategy::Auto), EigenPath::DPath);
        assert_eq!(resolve_path(200, 10, 3, Strategy::Auto), EigenPath::NPath);
        assert_eq!(resolve_path(20480, 633, 5, Strategy::Auto), EigenPath::NPath);
        assert_eq!(resolve_path(25344, 3584, 5, Strategy::Auto), EigenPath::Randomized);
        assert_eq!(resolve_path(25344, 3584, 400, Strategy::Auto), EigenPath::NPath);
        assert_eq!(resolve_path(10, 10, 3, Strategy::NPath), EigenPath::NPath);
    }

    #[test]
    fn sign_canon_picks_first_of_ties() {
        let mut b = dmatrix![-0.5, 0.0; 0.5, -1.0; 0.0, 0.0];
        canonicalize_signs(&mut b);
        assert_eq!(b, dmatrix![0.5, 0.0; -0.5, 1.0; 0.0, 0.0]);
    }

    #[test]
    fn exact_rank_three_recovered_by_sketch() {
        let basis = orthonormalize(random_matrix(30, 3, 8));
        let coords = random_matrix(3, 60, 9);
        let x = DataMatrix::new(&basis * coords).unwrap();
        let u = normalize_columns(&x, DEFAULT_ZERO_TOL).unwrap();
        let truth = Subspace::from_span(&basis).unwrap();
        let q = randomized_range(&u, 3, 10, 2, 17).unwrap();
        assert!(max_principal_angle(&q, &truth).unwrap() < 1e-10);
    }

    #[test]
    fn sketch_is_deterministic_per_seed() {
        let u = random_units(40, 80, 2);
        let a = randomized_range(&u, 2, 10, 2, 99).unwrap();
        let b = randomized_range(&u, 2, 10, 2, 99).unwrap();
        assert_eq!(a.basis().as_slice(), b.basis().as_slice());
        assert_eq!(a.eigenvalues(), b.eigenvalues());
    }

    #[test]
    fn sketch_width_checked() {
        let u = random_units(8, 30, 2);
        assert!(matches!(
            randomized_range(&u, 2, 10, 2, 0),
            Err(Error::InvalidRank { requested: 12, max: 8 })
        ));
    }

    #[test]
    fn principal_angle_examples() {
        let q = Subspace::from_span(&random_matrix(6, 2, 4)).unwrap();
        assert!(principal_angles(&q, &q).unwrap().iter().all(|a| a.abs() < 1e-10));

        let e1 = Subspace::from_span(&dmatrix![1.0; 0.0; 0.0]).unwrap();
        let e2 = Subspace::from_span(&dmatrix![0.0; 1.0; 0.0]).unwrap();
        let angles = principal_angles(&e1, &e2).unwrap();
        assert!((angles[0] - FRAC_PI_2).abs() < 1e-15);

        // Q2 = Q1 R for a 2x2 rotation spans the same plane
        let t: f64 = 0.7;
        let rot = dmatrix![t.cos(), -t.sin(); t.sin(), t.cos()];
        let q2 = Subspace::from_span(&(q.basis() * rot)).unwrap();
        assert!(principal_angles(&q, &q2).unwrap().iter().all(|a| *a < 1e-8));

        let bad = Subspace::from_span(&random_matrix(5, 2, 1)).unwrap();
        assert!(principal_angles(&q, &bad).is_err());
    }

    #[test]
    fn principal_angle_of_tilted_line() {
        for &theta in &[1e-9f64, 1e-4, 0.3, 1.2] {
            let a = Subspace::from_span(&dmatrix![1.0; 0.0]).unwrap();
            let b = Subspace::from_span(&dmatrix![theta.cos(); theta.sin()]).unwrap();
            let got = principal_angles(&a, &b).unwrap()[0];
            assert!((got - theta).abs() < 1e-12 * theta.max(1.0), "{theta}: {got}");
        }
    }

    #[test]
    fn sphere_select_tracks_source() {
        let u = random_units(3, 5, 6);
        let s = u.select(&[0, 2, 3]).unwrap();
        assert_eq!(s.kept(), &[0, 2, 3]);
        assert_eq!(s.dropped(), &[1, 4]);
        assert_eq!(s.source_n(), 5);
        assert!(u.select(&[2, 1]).is_err());
        assert!(u.select(&[]).is_err());
    }
}
