//! Robust principal component analysis on the unit hypersphere.
//!
//! Samples are the columns of a `D x n` matrix. Angular embedding (AE)
//! centers the data, maps every sample onto the unit sphere and takes the
//! dominant eigenvectors of `U Uᵀ`, i.e. the directions that maximize the
//! summed squared cosines to the samples. Trimmed angular embedding (TAE)
//! first removes the samples whose absolute cosine to a pivot sample falls
//! below `cos η`, then fits AE on the rest.
//!
//! Standard PCA and EM-PCA share the same [`FitModel`] so that the imaging
//! pipelines and the command-line front end are method agnostic.

pub mod ae;
pub mod baselines;
pub mod error;
pub mod imaging;
pub mod linalg;
pub mod model;
pub mod synth;
pub mod tae;

pub use ae::{fit_ae, objective, project, reconstruct, pair_phi_range, PhiRange};
pub use baselines::{fit_em_pca, fit_em_pca_traced, fit_pca, EmConfig, EmTrace};
pub use error::{Error, Result};
pub use imaging::{
    background_model, load_frames, shadow_removal, write_frames, BackgroundResult, FrameStack,
    ShadowResult,
};
pub use linalg::{
    center, dominant_subspace, normalize_columns, principal_angles, randomized_range,
    DataMatrix, EigenPath, SphereData, Strategy, Subspace,
};
pub use model::{fit, FitConfig, FitModel, FitOptions, FitStats, Method};
pub use synth::{generate, subspace_recovery_error, trim_metrics, SynthResult, SynthSpec};
pub use tae::{cosine_gram, fit_tae, outlier_counts, select_inliers, TrimReport};
