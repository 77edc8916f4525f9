//! Seeded synthetic data: planted subspaces with outliers, a small 3-D
//! class layout, a moving-square video and low-rank face images.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::FrameStack;
use crate::linalg::{max_principal_angle, DataMatrix, Subspace};
use crate::tae::TrimReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OutlierMode {
    /// Directions orthogonal to the true subspace, drawn as `±v` pairs.
    #[default]
    Orthogonal,
    /// Uniform directions on the sphere.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub dim: usize,
    pub d_true: usize,
    pub n_inliers: usize,
    /// Outlier count is `round(outlier_fraction * n_inliers)`.
    pub outlier_fraction: f64,
    pub outlier_magnitude: f64,
    pub outlier_mode: OutlierMode,
    pub inlier_noise: f64,
    pub seed: u64,
}

impl SynthSpec {
    /// 10-D ambient space, a 1-D subspace, 500 inliers and 50 orthogonal
    /// outliers of norm 10.
    pub fn canonical() -> Self {
        SynthSpec {
            dim: 10,
            d_true: 1,
            n_inliers: 500,
            outlier_fraction: 0.1,
            outlier_magnitude: 10.0,
            outlier_mode: OutlierMode::Orthogonal,
            inlier_noise: 1e-3,
            seed: 42,
        }
    }

    pub fn n_outliers(&self) -> usize {
        (self.outlier_fraction * self.n_inliers as f64).round() as usize
    }
}

#[derive(Debug, Clone)]
pub struct SynthResult {
    pub data: DataMatrix,
    /// Sorted column indices of the planted outliers.
    pub outlier_indices: Vec<usize>,
    pub true_basis: Subspace,
}

fn normal_vector(rng: &mut ChaCha8Rng, len: usize) -> DVector<f64> {
    DVector::from_fn(len, |_, _| rng.sample(StandardNormal))
}

/// A uniformly random `rank`-dimensional subspace of `R^dim`.
pub fn random_subspace(dim: usize, rank: usize, seed: u64) -> Result<Subspace> {
    if rank == 0 || rank > dim {
        return Err(Error::InvalidRank { requested: rank, max: dim });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::from_fn(dim, rank, |_, _| rng.sample(StandardNormal));
    Subspace::from_span(&g)
}

/// Inliers are `Q c + noise` with standard normal `c`; outliers have norm
/// `outlier_magnitude` plus the same noise. Columns are shuffled.
pub fn generate(spec: &SynthSpec) -> Result<SynthResult> {
    if spec.d_true == 0 || spec.d_true >= spec.dim {
        return Err(Error::InvalidRank {
            requested: spec.d_true,
            max: spec.dim.saturating_sub(1),
        });
    }
    if spec.n_inliers == 0 {
        return Err(Error::InvalidData("at least one inlier is required".into()));
    }
    let scalars = [spec.outlier_fraction, spec.outlier_magnitude, spec.inlier_noise];
    if scalars.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidData(
            "fraction, magnitude and noise must be finite and non-negative".into(),
        ));
    }
    let true_basis = random_subspace(spec.dim, spec.d_true, spec.seed)?;
    let q = true_basis.basis();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(1);

    let n_out = spec.n_outliers();
    let total = spec.n_inliers + n_out;
    let mut columns = Vec::with_capacity(total);
    for _ in 0..spec.n_inliers {
        let c = normal_vector(&mut rng, spec.d_true);
        let noise = normal_vector(&mut rng, spec.dim) * spec.inlier_noise;
        columns.push(q * c + noise);
    }
    let mut previous = DVector::zeros(spec.dim);
    for k in 0..n_out {
        let direction = match spec.outlier_mode {
            OutlierMode::Orthogonal if k % 2 == 1 => -&previous,
            OutlierMode::Orthogonal => loop {
                let g = normal_vector(&mut rng, spec.dim);
                let g = &g - q * q.tr_mul(&g);
                let norm = g.norm();
                if norm > 1e-8 {
                    break g / norm;
                }
            },
            OutlierMode::Random => loop {
                let g = normal_vector(&mut rng, spec.dim);
                let norm = g.norm();
                if norm > 1e-8 {
                    break g / norm;
                }
            },
        };
        let noise = normal_vector(&mut rng, spec.dim) * spec.inlier_noise;
        columns.push(&direction * spec.outlier_magnitude + noise);
        previous = direction;
    }

    let mut order: Vec<usize> = (0..total).collect();
    order.shuffle(&mut rng);
    let outlier_indices = order
        .iter()
        .enumerate()
        .filter(|&(_, &src)| src >= spec.n_inliers)
        .map(|(j, _)| j)
        .collect();
    let shuffled: Vec<DVector<f64>> = order.iter().map(|&src| columns[src].clone()).collect();
    Ok(SynthResult {
        data: DataMatrix::new(DMatrix::from_columns(&shuffled))?,
        outlier_indices,
        true_basis,
    })
}

/// Largest principal angle between the estimate and the truth, in radians.
pub fn subspace_recovery_error(estimate: &Subspace, truth: &Subspace) -> Result<f64> {
    max_principal_angle(estimate, truth)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrimQuality {
    pub precision: f64,
    pub recall: f64,
}

/// Precision and recall of flagged outliers against the planted ones. An
/// empty prediction has precision 1 when nothing was planted, 0 otherwise;
/// an empty truth has recall 1.
pub fn trim_metrics(report: &TrimReport, truth: &[usize]) -> TrimQuality {
    let flagged: BTreeSet<usize> = report.outliers.iter().copied().collect();
    let planted: BTreeSet<usize> = truth.iter().copied().collect();
    let hits = flagged.intersection(&planted).count() as f64;
    let precision = if flagged.is_empty() {
        if planted.is_empty() { 1.0 } else { 0.0 }
    } else {
        hits / flagged.len() as f64
    };
    let recall = if planted.is_empty() { 1.0 } else { hits / planted.len() as f64 };
    TrimQuality { precision, recall }
}

/// Four classes strung along the x axis in 3-D. A tenth of every class is
/// lifted far along z, so the largest spread is not the separating axis.
#[derive(Debug, Clone)]
pub struct FourClass {
    pub data: DataMatrix,
    pub labels: Vec<usize>,
    /// Columns that were lifted.
    pub shifted: Vec<usize>,
    /// The class-separating axis `e1`.
    pub true_basis: Subspace,
}

pub fn four_class_3d(per_class: usize, seed: u64) -> Result<FourClass> {
    if per_class < 10 {
        return Err(Error::InvalidData("need at least 10 samples per class".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers = [-4.5, -1.5, 1.5, 4.5];
    let lifted = per_class / 10;
    let mut columns = Vec::with_capacity(4 * per_class);
    let mut labels = Vec::with_capacity(4 * per_class);
    let mut shifted = Vec::new();
    for (label, cx) in centers.iter().enumerate() {
        for k in 0..per_class {
            let x = cx + 0.5 * rng.sample::<f64, _>(StandardNormal);
            let y = 0.3 * rng.sample::<f64, _>(StandardNormal);
            let mut z = 0.3 * rng.sample::<f64, _>(StandardNormal);
            if k < lifted {
                z += 12.0;
                shifted.push(columns.len());
            }
            columns.push(DVector::from_column_slice(&[x, y, z]));
            labels.push(label);
        }
    }
    Ok(FourClass {
        data: DataMatrix::new(DMatrix::from_columns(&columns))?,
        labels,
        shifted,
        true_basis: Subspace::from_span(&DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]))?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoSpec {
    pub width: usize,
    pub height: usize,
    pub n_frames: usize,
    pub n_intruded: usize,
    pub square: usize,
    pub square_value: f64,
    pub noise: f64,
    pub seed: u64,
}

impl Default for VideoSpec {
    fn default() -> Self {
        VideoSpec {
            width: 64,
            height: 48,
            n_frames: 100,
            n_intruded: 20,
            square: 10,
            square_value: 250.0,
            noise: 1.0,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticVideo {
    pub frames: FrameStack,
    /// Noise-free background, one value per pixel.
    pub background: DVector<f64>,
    /// Frames containing the square.
    pub intruded: Vec<usize>,
    /// Per intruded frame, the pixel rows covered by the square.
    pub masks: Vec<Vec<usize>>,
}

/// Gradient background with a bright square crossing left to right during a
/// contiguous run of frames. Pixels are rounded to integers in `[0, 255]`.
pub fn moving_square_video(spec: &VideoSpec) -> Result<SyntheticVideo> {
    let VideoSpec {
        width: w,
        height: h,
        n_frames,
        n_intruded,
        square,
        ..
    } = *spec;
    if w < 2 || h < 2 || square == 0 || square > w || square > h {
        return Err(Error::InvalidData("square must fit inside a frame of at least 2x2".into()));
    }
    if n_frames == 0 || n_intruded > n_frames {
        return Err(Error::InvalidData("intruded frames exceed the sequence".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let background = DVector::from_fn(w * h, |p, _| {
        let (r, c) = (p / w, p % w);
        30.0 + 150.0 * c as f64 / (w - 1) as f64 + 40.0 * r as f64 / (h - 1) as f64
    });
    let first = rng.random_range(0..=n_frames - n_intruded);
    let intruded: Vec<usize> = (first..first + n_intruded).collect();
    let top = (h - square) / 2;
    let mut masks = Vec::with_capacity(n_intruded);
    let mut values = DMatrix::zeros(w * h, n_frames);
    for f in 0..n_frames {
        let mut frame = background.clone();
        if let Some(k) = f.checked_sub(first).filter(|&k| k < n_intruded) {
            let travel = (w - square) as f64;
            let left = if n_intruded > 1 {
                (travel * k as f64 / (n_intruded - 1) as f64).round() as usize
            } else {
                0
            };
            let mut mask = Vec::with_capacity(square * square);
            for r in top..top + square {
                for c in left..left + square {
                    frame[r * w + c] = spec.square_value;
                    mask.push(r * w + c);
                }
            }
            masks.push(mask);
        }
        for (p, v) in frame.iter().enumerate() {
            let noisy = v + spec.noise * rng.sample::<f64, _>(StandardNormal);
            values[(p, f)] = noisy.round().clamp(0.0, 255.0);
        }
    }
    let names = (0..n_frames).map(|f| format!("frame_{f:03}")).collect();
    Ok(SyntheticVideo {
        frames: FrameStack::new(w, h, DataMatrix::new(values)?, names)?,
        background,
        intruded,
        masks,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaceSpec {
    pub width: usize,
    pub height: usize,
    pub n_faces: usize,
    pub seed: u64,
}

impl Default for FaceSpec {
    fn default() -> Self {
        FaceSpec {
            width: 32,
            height: 32,
            n_faces: 64,
            seed: 42,
        }
    }
}

/// Number of lighting harmonics in [`synthetic_faces`].
pub const FACE_RANK: usize = 9;

#[derive(Debug, Clone)]
pub struct SyntheticFaces {
    pub faces: FrameStack,
    /// Span of the nine harmonic images every face is built from.
    pub harmonic_basis: Subspace,
}

/// Images of one Lambertian shape under random lighting. Every face is a
/// fixed base image plus a random combination of the nine harmonic images,
/// each orthonormal lighting direction getting a comparable spread, so the
/// stack has rank at most 9. Values are not clamped or rounded.
pub fn synthetic_faces(spec: &FaceSpec) -> Result<SyntheticFaces> {
    let FaceSpec { width: w, height: h, n_faces, .. } = *spec;
    if w < 2 || h < 2 || n_faces == 0 {
        return Err(Error::InvalidData("faces need at least 2x2 pixels and one face".into()));
    }
    let d = w * h;
    let mut harmonics = DMatrix::zeros(d, FACE_RANK);
    for p in 0..d {
        let (r, c) = (p / w, p % w);
        let x = 2.0 * c as f64 / (w - 1) as f64 - 1.0;
        let y = 2.0 * r as f64 / (h - 1) as f64 - 1.0;
        let (ex, ey) = (x / 0.8, y / 0.95);
        let rho2 = ex * ex + ey * ey;
        let (n, albedo) = if rho2 < 1.0 {
            let nz = (1.0 - rho2).sqrt();
            let albedo = 0.75 + 0.2 * (3.0 * x).cos() * (2.0 * y).cos();
            ([ex, ey, nz], albedo)
        } else {
            ([0.0, 0.0, 1.0], 0.35)
        };
        let [nx, ny, nz] = n;
        let y_k = [
            1.0,
            nx,
            ny,
            nz,
            nx * ny,
            nx * nz,
            ny * nz,
            nx * nx - ny * ny,
            3.0 * nz * nz - 1.0,
        ];
        for (k, v) in y_k.iter().enumerate() {
            harmonics[(p, k)] = albedo * v;
        }
    }
    let basis = Subspace::from_span(&harmonics)?;
    let q = basis.basis();
    let base = &harmonics.column(0) * 170.0 + &harmonics.column(3) * 20.0;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let spread = |k: usize| 160.0 - 6.0 * k as f64;
    let coeffs = DMatrix::from_fn(FACE_RANK, n_faces, |k, _| spread(k) * rng.sample::<f64, _>(StandardNormal));
    let mut values = q * coeffs;
    for mut col in values.column_iter_mut() {
        col += &base;
    }
    let names = (0..n_faces).map(|f| format!("face_{f:02}")).collect();
    Ok(SyntheticFaces {
        faces: FrameStack::new(w, h, DataMatrix::new(values)?, names)?,
        harmonic_basis: basis,
    })
}

/// Multiplies image rows `rows` of face `index` by `factor`, imitating a
/// cast shadow. Returns the affected pixel indices.
pub fn darken_band(stack: &FrameStack, index: usize, rows: std::ops::Range<usize>, factor: f64) -> Result<(FrameStack, Vec<usize>)> {
    if index >= stack.len() || rows.end > stack.height() || rows.is_empty() {
        return Err(Error::InvalidData("band outside the image stack".into()));
    }
    let w = stack.width();
    let pixels: Vec<usize> = (rows.start * w..rows.end * w).collect();
    let mut values = stack.frames().values().clone();
    for &p in &pixels {
        values[(p, index)] *= factor;
    }
    let out = FrameStack::new(w, stack.height(), DataMatrix::new(values)?, stack.names().to_vec())?;
    Ok((out, pixels))
}

/// Named `(D, n)` shapes used for timing runs.
pub const TIMING_SHAPES: [(&str, usize, usize); 4] = [
    ("yale", 32256, 64),
    ("water", 20480, 633),
    ("hall", 25344, 3584),
    ("caviar", 110592, 1675),
];

/// Looks up a timing shape by name.
pub fn timing_shape(name: &str) -> Option<(usize, usize)> {
    TIMING_SHAPES
        .iter()
        .find(|(n, _, _)| *n == name)
        .map(|&(_, d, n)| (d, n))
}

/// A `dim x n` matrix of rank `rank` plus small Gaussian noise.
pub fn timing_matrix(dim: usize, n: usize, rank: usize, seed: u64) -> Result<DataMatrix> {
    if dim == 0 || n == 0 {
        return Err(Error::InvalidData("timing matrix must be non-empty".into()));
    }
    let rank = rank.clamp(1, dim.min(n));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let left = DMatrix::from_fn(dim, rank, |_, _| rng.sample::<f64, _>(StandardNormal));
    let right = DMatrix::from_fn(rank, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mut values = left * right;
    for v in values.iter_mut() {
        *v += 0.01 * rng.sample::<f64, _>(StandardNormal);
    }
    DataMatrix::new(values)
}
