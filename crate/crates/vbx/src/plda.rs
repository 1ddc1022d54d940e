//! Two-covariance PLDA estimation and the discriminative transform that
//! maps embeddings into the space where the within-speaker covariance is
//! identity and the between-speaker covariance is diagonal.

use nalgebra::DMatrix;
use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::{Error, Result};

/// Smallest eigenvalue kept in the transformed between-speaker spectrum.
pub const PHI_FLOOR: f64 = 1e-10;

/// Global mean plus within- and between-speaker covariances of the
/// embedding space.
#[derive(Debug, Clone)]
pub struct PldaModel {
    pub dim: usize,
    pub mean: Array1<f64>,
    pub within_cov: Array2<f64>,
    pub between_cov: Array2<f64>,
}

/// The transformed diarization space: projection columns, the diagonal
/// between-speaker variances `phi` (descending), and the retained dimension.
#[derive(Debug, Clone)]
pub struct DiarSpace {
    pub source_dim: usize,
    pub dim: usize,
    pub mean: Array1<f64>,
    /// D x R projection; column r pairs with `phi[r]`.
    pub projection: Array2<f64>,
    pub phi: Array1<f64>,
}

/// Training-data container: one row per embedding with a speaker label.
#[derive(Debug, Clone)]
pub struct LabeledEmbeddings {
    pub vectors: Array2<f64>,
    pub speaker_ids: Vec<String>,
}

impl LabeledEmbeddings {
    pub fn new(vectors: Array2<f64>, speaker_ids: Vec<String>) -> Result<Self> {
        if vectors.nrows() != speaker_ids.len() {
            return Err(Error::invalid(format!(
                "{} vectors but {} speaker labels",
                vectors.nrows(),
                speaker_ids.len()
            )));
        }
        Ok(LabeledEmbeddings {
            vectors,
            speaker_ids,
        })
    }
}

/// Estimates the two-covariance model by within/between scatter.
///
/// The within covariance is the maximum-likelihood average of squared
/// deviations around speaker means (divide by N); the between covariance
/// averages squared speaker-mean deviations around the grand mean (divide
/// by the number of speakers). A singular within covariance gets a ridge
/// of `1e-6 * trace / D` (or `1e-6` when the scatter is exactly zero).
pub fn estimate_plda(data: &LabeledEmbeddings) -> Result<PldaModel> {
    let n = data.vectors.nrows();
    let d = data.vectors.ncols();
    if n == 0 || d == 0 {
        return Err(Error::EmptyInput("no training vectors".into()));
    }

    let mut speakers: Vec<(&str, Vec<usize>)> = Vec::new();
    for (i, id) in data.speaker_ids.iter().enumerate() {
        match speakers.iter_mut().find(|(s, _)| *s == id.as_str()) {
            Some((_, idx)) => idx.push(i),
            None => speakers.push((id.as_str(), vec![i])),
        }
    }
    if speakers.len() < 2 {
        return Err(Error::invalid(format!(
            "PLDA estimation requires at least 2 speakers, got {}",
            speakers.len()
        )));
    }

    let mean = data
        .vectors
        .mean_axis(Axis(0))
        .expect("non-empty checked above");

    let mut within = Array2::<f64>::zeros((d, d));
    let mut between = Array2::<f64>::zeros((d, d));
    for (_, idx) in &speakers {
        let mut spk_mean = Array1::<f64>::zeros(d);
        for &i in idx {
            spk_mean += &data.vectors.row(i);
        }
        spk_mean /= idx.len() as f64;

        for &i in idx {
            let dev = &data.vectors.row(i) - &spk_mean;
            accumulate_outer(&mut within, &dev);
        }
        let dev = &spk_mean - &mean;
        accumulate_outer(&mut between, &dev);
    }
    within /= n as f64;
    between /= speakers.len() as f64;

    if to_nalgebra(&within).cholesky().is_none() {
        let trace: f64 = within.diag().sum();
        let mut eps = 1e-6 * trace / d as f64;
        if eps <= 0.0 {
            eps = 1e-6;
        }
        for i in 0..d {
            within[(i, i)] += eps;
        }
    }

    Ok(PldaModel {
        dim: d,
        mean,
        within_cov: within,
        between_cov: between,
    })
}

fn accumulate_outer(acc: &mut Array2<f64>, v: &Array1<f64>) {
    let d = v.len();
    for i in 0..d {
        let vi = v[i];
        for j in 0..d {
            acc[(i, j)] += vi * v[j];
        }
    }
}

/// Solves the generalized symmetric eigenproblem `between * E = within * E * diag(phi)`
/// through Cholesky whitening of the within covariance, keeping the `r`
/// largest eigenpairs. Returns the space and how many eigenvalues were
/// clamped up to [`PHI_FLOOR`].
pub fn derive_space(model: &PldaModel, r: usize) -> Result<(DiarSpace, usize)> {
    let d = model.dim;
    if r == 0 || r > d {
        return Err(Error::invalid(format!(
            "retained dimension must be in 1..={d}, got {r}"
        )));
    }

    let sw = to_nalgebra(&model.within_cov);
    let sb = to_nalgebra(&model.between_cov);
    let chol = sw
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Model("within covariance is not positive definite".into()))?;
    let g = chol.l();

    // M = G^-1 Sb G^-T, symmetrized against round-off.
    let y = g
        .solve_lower_triangular(&sb)
        .ok_or_else(|| Error::Model("singular Cholesky factor".into()))?;
    let z = g
        .solve_lower_triangular(&y.transpose())
        .ok_or_else(|| Error::Model("singular Cholesky factor".into()))?;
    let m = (&z + z.transpose()) * 0.5;

    let eig = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let gt = g.transpose();
    let mut projection = Array2::<f64>::zeros((d, r));
    let mut phi = Array1::<f64>::zeros(r);
    let mut clamped = 0;
    for (k, &src) in order.iter().take(r).enumerate() {
        let mut ev = eig.eigenvalues[src];
        if ev < PHI_FLOOR {
            ev = PHI_FLOOR;
            clamped += 1;
        }
        phi[k] = ev;

        let u = eig.eigenvectors.column(src).into_owned();
        let e = gt
            .solve_upper_triangular(&u)
            .ok_or_else(|| Error::Model("singular Cholesky factor".into()))?;
        // Fix the sign so the largest-magnitude entry is positive.
        let mut pivot = 0;
        for i in 1..d {
            if e[i].abs() > e[pivot].abs() {
                pivot = i;
            }
        }
        let flip = if e[pivot] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..d {
            projection[(i, k)] = flip * e[i];
        }
    }

    Ok((
        DiarSpace {
            source_dim: d,
            dim: r,
            mean: model.mean.clone(),
            projection,
            phi,
        },
        clamped,
    ))
}

impl DiarSpace {
    /// Elementwise square root of `phi`: the diagonal that maps latent
    /// speaker vectors to speaker means in the transformed space.
    pub fn sqrt_phi(&self) -> Array1<f64> {
        self.phi.mapv(f64::sqrt)
    }

    /// Infinity-norm residuals of the two defining identities against a
    /// source model: (`|E' Sw E - I|`, `|Sb E - Sw E diag(phi)|`).
    pub fn residuals(&self, model: &PldaModel) -> (f64, f64) {
        let e = &self.projection;
        let sw_e = model.within_cov.dot(e);
        let sb_e = model.between_cov.dot(e);

        let ortho = e.t().dot(&sw_e);
        let mut ortho_res = 0.0_f64;
        for i in 0..self.dim {
            for j in 0..self.dim {
                let target = if i == j { 1.0 } else { 0.0 };
                ortho_res = ortho_res.max((ortho[(i, j)] - target).abs());
            }
        }

        let mut pair_res = 0.0_f64;
        for i in 0..self.source_dim {
            for j in 0..self.dim {
                pair_res = pair_res.max((sb_e[(i, j)] - sw_e[(i, j)] * self.phi[j]).abs());
            }
        }
        (ortho_res, pair_res)
    }
}

/// Centers rows by the space mean and projects into the retained dimensions.
pub fn project(space: &DiarSpace, raw: ArrayView2<f64>) -> Result<Array2<f64>> {
    if raw.ncols() != space.source_dim {
        return Err(Error::invalid(format!(
            "raw vectors have dimension {}, space expects {}",
            raw.ncols(),
            space.source_dim
        )));
    }
    let centered = &raw - &space.mean.view().insert_axis(ndarray::Axis(0));
    Ok(centered.dot(&space.projection))
}

/// Scales every row to Euclidean norm sqrt(K), keeping per-coordinate
/// variance near one.
pub fn length_normalize(vectors: ArrayView2<f64>) -> Result<Array2<f64>> {
    let k = vectors.ncols();
    let target = (k as f64).sqrt();
    let mut out = vectors.to_owned();
    for (index, mut row) in out.axis_iter_mut(Axis(0)).enumerate() {
        let norm = row.dot(&row).sqrt();
        if norm == 0.0 {
            return Err(Error::DegenerateRow { index });
        }
        row *= target / norm;
    }
    Ok(out)
}

fn to_nalgebra(a: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_row_iterator(a.nrows(), a.ncols(), a.iter().copied())
}
