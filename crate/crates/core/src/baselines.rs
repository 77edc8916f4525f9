//! Reference estimators: ordinary PCA on the centered data and Roweis-style
//! EM-PCA. Both return the same [`FitModel`] as the angular methods.

use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{center, leading_subspace, orthonormalize, top_eigenpairs, DataMatrix, Subspace};
use crate::model::{FitConfig, FitModel, FitStats, Method};

/// PCA: the top-`d` eigenvectors of the scatter of the centered samples.
pub fn fit_pca(x: &DataMatrix, d: usize, config: &FitConfig) -> Result<FitModel> {
    let start = Instant::now();
    let (mean, xc) = center(x);
    let (subspace, path) = leading_subspace(xc.values(), d, config.strategy, config.seed)?;
    Ok(FitModel {
        mean,
        subspace,
        method: Method::Pca,
        trim: None,
        stats: FitStats {
            samples_used: x.n_samples(),
            dropped_zero_norm: 0,
            wall_time_s: start.elapsed().as_secs_f64(),
            iterations: None,
            path: Some(path),
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmConfig {
    /// Stop once `‖C_new - C‖_F / ‖C‖_F` drops below this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig {
            tol: 1e-4,
            max_iter: 1000,
        }
    }
}

/// Per-iteration record of an EM-PCA run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EmTrace {
    /// `‖Xc - C Y‖_F` for each loading matrix visited, with `Y` the
    /// least-squares coordinates for that `C`.
    pub errors: Vec<f64>,
    pub iterations: usize,
    pub restarts: usize,
}

/// EM-PCA with a seeded random start. See [`fit_em_pca_traced`].
pub fn fit_em_pca(x: &DataMatrix, d: usize, em: &EmConfig, config: &FitConfig) -> Result<FitModel> {
    fit_em_pca_traced(x, d, em, config).map(|(model, _)| model)
}

/// Alternates `Y = (CᵀC)⁻¹ Cᵀ Xc` and `C = Xc Yᵀ (Y Yᵀ)⁻¹` until the loading
/// matrix settles, then orthonormalizes `C` and rotates it onto the
/// eigenvectors of `Qᵀ Xc Xcᵀ Q` so components come out ordered.
///
/// A singular inner solve restarts once from a fresh start before failing
/// with [`Error::SingularStep`].
pub fn fit_em_pca_traced(
    x: &DataMatrix,
    d: usize,
    em: &EmConfig,
    config: &FitConfig,
) -> Result<(FitModel, EmTrace)> {
    let start = Instant::now();
    let max = x.dim().min(x.n_samples());
    if d == 0 || d > max {
        return Err(Error::InvalidRank { requested: d, max });
    }
    let (mean, xc) = center(x);
    let xc = xc.into_values();

    let mut trace = EmTrace::default();
    let loadings = match em_iterate(&xc, d, em, config.seed, 0, &mut trace) {
        Err(Error::SingularStep) => {
            trace = EmTrace {
                restarts: 1,
                ..EmTrace::default()
            };
            em_iterate(&xc, d, em, config.seed, 1, &mut trace)?
        }
        other => other?,
    };

    let q = orthonormalize(loadings);
    let coords = q.tr_mul(&xc);
    let (rotation, values) = top_eigenpairs(&coords * coords.transpose(), d);
    let subspace = Subspace::from_parts(q * rotation, values);

    let model = FitModel {
        mean,
        subspace,
        method: Method::EmPca,
        trim: None,
        stats: FitStats {
            samples_used: x.n_samples(),
            dropped_zero_norm: 0,
            wall_time_s: start.elapsed().as_secs_f64(),
            iterations: Some(trace.iterations),
            path: None,
        },
    };
    Ok((model, trace))
}

fn em_iterate(
    xc: &DMatrix<f64>,
    d: usize,
    em: &EmConfig,
    seed: u64,
    attempt: u64,
    trace: &mut EmTrace,
) -> Result<DMatrix<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(attempt);
    let mut c = DMatrix::from_fn(xc.nrows(), d, |_, _| rng.sample::<f64, _>(StandardNormal));

    let mut y = e_step(xc, &c)?;
    trace.errors.push((xc - &c * &y).norm());
    while trace.iterations < em.max_iter {
        let next = m_step(xc, &y)?;
        let change = (&next - &c).norm() / c.norm();
        c = next;
        trace.iterations += 1;
        y = e_step(xc, &c)?;
        trace.errors.push((xc - &c * &y).norm());
        if change < em.tol {
            break;
        }
    }
    Ok(c)
}

fn e_step(xc: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = c.tr_mul(c).cholesky().ok_or(Error::SingularStep)?;
    Ok(chol.solve(&c.tr_mul(xc)))
}

fn m_step(xc: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let yyt = y * y.transpose();
    let chol = yyt.cholesky().ok_or(Error::SingularStep)?;
    // C = Xc Yᵀ (Y Yᵀ)⁻¹  <=>  (Y Yᵀ) Cᵀ = Y Xcᵀ
    Ok(chol.solve(&(y * xc.transpose())).transpose())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_principal_angle;
    use nalgebra::{dvector, DVector};

    fn gaussian(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
    }

    /// Gaussian samples with the given per-axis standard deviations.
    fn axis_scaled(stds: &[f64], n: usize, seed: u64) -> DataMatrix {
        let mut g = gaussian(stds.len(), n, seed);
        for (r, s) in stds.iter().enumerate() {
            g.row_mut(r).scale_mut(*s);
        }
        DataMatrix::new(g).unwrap()
    }

    #[test]
    fn pca_on_sphere_matches_ae() {
        // antipodal unit pairs: zero mean and already normalized
        let mut g = gaussian(5, 20, 4);
        for mut c in g.column_iter_mut() {
            c.normalize_mut();
        }
        let mut both = DMatrix::zeros(5, 40);
        for j in 0..20 {
            both.set_column(2 * j, &g.column(j));
            both.set_column(2 * j + 1, &(-g.column(j)));
        }
        let x = DataMatrix::new(both).unwrap();
        let pca = fit_pca(&x, 2, &FitConfig::default()).unwrap();
        let ae = crate::ae::fit_ae(&x, 2, &FitConfig::default()).unwrap();
        assert!(max_principal_angle(&pca.subspace, &ae.subspace).unwrap() < 1e-10);
    }

    #[test]
    fn pca_leading_axis() {
        let x = axis_scaled(&[3.0, 1.0], 10_000, 7);
        let model = fit_pca(&x, 1, &FitConfig::default()).unwrap();
        let q = model.subspace.basis().column(0);
        let angle = q[0].abs().clamp(0.0, 1.0).acos();
        assert!(angle < 2f64.to_radians(), "{angle}");
    }

    #[test]
    fn pca_matches_direct_scatter() {
        let x = axis_scaled(&[4.0, 3.0, 2.0, 1.0, 0.5, 0.2], 300, 12);
        let model = fit_pca(&x, 3, &FitConfig::default()).unwrap();
        let (_, xc) = center(&x);
        let scatter = xc.values() * xc.values().transpose();
        let eig = scatter.symmetric_eigen();
        let mut order: Vec<usize> = (0..6).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
        let direct = Subspace::from_span(&eig.eigenvectors.select_columns(&order[..3])).unwrap();
        assert!(max_principal_angle(&model.subspace, &direct).unwrap() < 1e-8);
    }

    #[test]
    fn huge_pair_drags_pca_not_ae() {
        let mut g = gaussian(3, 200, 31);
        for c in 0..200 {
            g[(0, c)] *= 3.0;
        }
        let spike = dvector![0.0, 0.6, 0.8];
        // a ± pair leaves the mean alone
        g.set_column(0, &(&spike * 1000.0));
        g.set_column(1, &(&spike * -1000.0));
        let x = DataMatrix::new(g).unwrap();
        let angle_to = |m: &FitModel, v: &DVector<f64>| {
            m.subspace.basis().column(0).dot(v).abs().clamp(0.0, 1.0).acos()
        };
        let pca = fit_pca(&x, 1, &FitConfig::default()).unwrap();
        let ae = crate::ae::fit_ae(&x, 1, &FitConfig::default()).unwrap();
        assert!(angle_to(&pca, &spike) < 1f64.to_radians());
        assert!(angle_to(&ae, &spike) > 10f64.to_radians());
    }

    #[test]
    fn em_recovers_exact_line() {
        let dir = dvector![1.0, 2.0, -2.0] / 3.0;
        let offset = dvector![5.0, -1.0, 2.0];
        let t = gaussian(1, 50, 3);
        let cols: Vec<DVector<f64>> = t.iter().map(|s| &offset + &dir * *s).collect();
        let x = DataMatrix::new(DMatrix::from_columns(&cols)).unwrap();
        let model = fit_em_pca(&x, 1, &EmConfig::default(), &FitConfig::default()).unwrap();
        let cos = model.subspace.basis().column(0).dot(&dir).abs();
        assert!(cos.clamp(0.0, 1.0).acos() < 1e-6);
    }

    #[test]
    fn em_matches_pca_with_gap() {
        let x = axis_scaled(&[10.0, 8.0, 6.0, 1.0, 0.8, 0.5, 0.3], 500, 9);
        let config = FitConfig::default();
        let (em, trace) = fit_em_pca_traced(&x, 3, &EmConfig::default(), &config).unwrap();
        let pca = fit_pca(&x, 3, &config).unwrap();
        assert!(max_principal_angle(&em.subspace, &pca.subspace).unwrap() < 1e-3);
        for w in trace.errors.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-9), "{} -> {}", w[0], w[1]);
        }
        assert_eq!(em.stats.iterations, Some(trace.iterations));
        for (a, b) in em.subspace.eigenvalues().iter().zip(pca.subspace.eigenvalues()) {
            assert!((a - b).abs() < 1e-3 * b);
        }
    }

    #[test]
    fn zero_tol_runs_every_iteration() {
        let x = axis_scaled(&[3.0, 2.0, 1.0, 0.5], 80, 2);
        let em = EmConfig { tol: 0.0, max_iter: 25 };
        let (model, trace) = fit_em_pca_traced(&x, 2, &em, &FitConfig::default()).unwrap();
        assert_eq!(trace.iterations, 25);
        assert_eq!(trace.errors.len(), 26);
        let q = model.subspace.basis();
        let err = (q.tr_mul(q) - DMatrix::<f64>::identity(2, 2)).amax();
        assert!(err < 1e-10);
    }

    #[test]
    fn em_is_seeded() {
        let x = axis_scaled(&[3.0, 2.0, 1.0], 60, 5);
        let a = fit_em_pca(&x, 2, &EmConfig::default(), &FitConfig::default()).unwrap();
        let b = fit_em_pca(&x, 2, &EmConfig::default(), &FitConfig::default()).unwrap();
        assert_eq!(a.subspace, b.subspace);
    }

    #[test]
    fn em_singular_data_fails() {
        // all samples identical: the centered data is zero and Y Yᵀ vanishes
        let x = DataMatrix::new(DMatrix::from_element(3, 10, 2.5)).unwrap();
        assert!(matches!(
            fit_em_pca(&x, 1, &EmConfig::default(), &FitConfig::default()),
            Err(Error::SingularStep)
        ));
    }
}
