use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::baselines::{fit_em_pca, EmConfig};
use crate::error::{Error, Result};
use crate::linalg::{DataMatrix, EigenPath, Strategy, Subspace, DEFAULT_ZERO_TOL};
use crate::tae::{TrimReport, DEFAULT_BLOCK};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Pca,
    EmPca,
    Ae,
    Tae,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Pca => "pca",
            Method::EmPca => "em_pca",
            Method::Ae => "ae",
            Method::Tae => "tae",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pca" => Ok(Method::Pca),
            "em_pca" | "em-pca" => Ok(Method::EmPca),
            "ae" => Ok(Method::Ae),
            "tae" => Ok(Method::Tae),
            other => Err(Error::InvalidData(format!("unknown method {other:?}"))),
        }
    }
}

/// Settings shared by every fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub strategy: Strategy,
    pub zero_tol: f64,
    pub seed: u64,
    /// Row block for the pairwise cosine pass of TAE.
    pub block: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            strategy: Strategy::Auto,
            zero_tol: DEFAULT_ZERO_TOL,
            seed: 0,
            block: DEFAULT_BLOCK,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitStats {
    /// Columns that entered the final eigen-solve.
    pub samples_used: usize,
    pub dropped_zero_norm: usize,
    pub wall_time_s: f64,
    /// EM iterations; `None` for the closed-form methods.
    pub iterations: Option<usize>,
    pub path: Option<EigenPath>,
}

/// A fitted model: the full-data mean plus an orthonormal basis.
///
/// Models loaded from JSON carry default [`FitStats`] and a trim report with
/// an empty `tau` vector, since neither is persisted.
#[derive(Debug, Clone, PartialEq)]
pub struct FitModel {
    pub mean: DVector<f64>,
    pub subspace: Subspace,
    pub method: Method,
    pub trim: Option<TrimReport>,
    pub stats: FitStats,
}

impl FitModel {
    pub fn dim(&self) -> usize {
        self.subspace.dim()
    }

    pub fn rank(&self) -> usize {
        self.subspace.rank()
    }

    /// Number of samples removed by trimming.
    pub fn n_trimmed(&self) -> usize {
        self.trim.as_ref().map_or(0, |t| t.outliers.len())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ModelFile::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<FitModel> {
        let file: ModelFile = serde_json::from_str(text)?;
        file.into_model()
    }
}

/// Which method to run, with its method-specific knobs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub method: Method,
    /// Angular threshold in radians; only read by TAE.
    pub eta_theta: f64,
    pub em: EmConfig,
    pub config: FitConfig,
}

impl FitOptions {
    pub fn new(method: Method) -> Self {
        FitOptions {
            method,
            eta_theta: std::f64::consts::FRAC_PI_3,
            em: EmConfig::default(),
            config: FitConfig::default(),
        }
    }
}

/// Dispatches to the fit routine for `options.method`.
pub fn fit(x: &DataMatrix, d: usize, options: &FitOptions) -> Result<FitModel> {
    match options.method {
        Method::Pca => crate::baselines::fit_pca(x, d, &options.config),
        Method::EmPca => fit_em_pca(x, d, &options.em, &options.config),
        Method::Ae => crate::ae::fit_ae(x, d, &options.config),
        Method::Tae => crate::tae::fit_tae(x, d, options.eta_theta, &options.config),
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    method: Method,
    d: usize,
    #[serde(rename = "D")]
    dim: usize,
    mean: Vec<f64>,
    /// One inner array per basis column.
    basis: Vec<Vec<f64>>,
    eigenvalues: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    trim: Option<TrimFile>,
}

#[derive(Serialize, Deserialize)]
struct TrimFile {
    eta_theta: f64,
    tau_min: usize,
    pivot: usize,
    outliers: Vec<usize>,
    n_inliers: usize,
}

impl From<&FitModel> for ModelFile {
    fn from(model: &FitModel) -> Self {
        let basis = model.subspace.basis();
        ModelFile {
            method: model.method,
            d: basis.ncols(),
            dim: basis.nrows(),
            mean: model.mean.iter().copied().collect(),
            basis: basis
                .column_iter()
                .map(|c| c.iter().copied().collect())
                .collect(),
            eigenvalues: model.subspace.eigenvalues().to_vec(),
            trim: model.trim.as_ref().map(|t| TrimFile {
                eta_theta: t.eta_theta,
                tau_min: t.tau_min,
                pivot: t.pivot,
                outliers: t.outliers.clone(),
                n_inliers: t.inliers.len(),
            }),
        }
    }
}

impl ModelFile {
    fn into_model(self) -> Result<FitModel> {
        let bad = |msg: String| Error::InvalidData(msg);
        if self.mean.len() != self.dim {
            return Err(bad(format!("mean has {} entries, D = {}", self.mean.len(), self.dim)));
        }
        if self.basis.len() != self.d || self.basis.iter().any(|c| c.len() != self.dim) {
            return Err(bad(format!("basis is not {} columns of length {}", self.d, self.dim)));
        }
        let flat: Vec<f64> = self.basis.into_iter().flatten().collect();
        let basis = DMatrix::from_vec(self.dim, self.d, flat);
        let subspace = Subspace::new(basis, self.eigenvalues)?;
        let trim = match (self.method, self.trim) {
            (Method::Tae, Some(t)) => Some(TrimReport::from_summary(
                t.eta_theta,
                t.tau_min,
                t.pivot,
                t.outliers,
                t.n_inliers,
            )?),
            (Method::Tae, None) => return Err(bad("tae model without trim report".into())),
            (_, Some(_)) => return Err(bad(format!("{} model with trim report", self.method))),
            (_, None) => None,
        };
        Ok(FitModel {
            mean: DVector::from_vec(self.mean),
            subspace,
            method: self.method,
            trim,
            stats: FitStats::default(),
        })
    }
}
