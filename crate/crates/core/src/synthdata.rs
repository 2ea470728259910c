//! Synthetic and semi-synthetic datasets with known cluster labels and
//! covariate relevance.
//!
//! The base design draws labels from a three-component weight vector and
//! places relevant covariates at per-cluster centres with unit spherical
//! noise; irrelevant covariates are i.i.d. standard Gaussian. Relevant
//! covariates always occupy the leading columns.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, Normal, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{Result, VbError};
use crate::model::{standardize, DataMatrix};

/// Within-cluster correlation of the relevant block.
///
/// Correlation is introduced through one shared latent factor per
/// observation: covariate `j` of an observation in cluster `k` loads on it
/// with weight `sqrt(rho_kj)`, so every covariate keeps unit variance and the
/// covariance is positive definite whenever each `rho_kj` lies in `[0, 1)`.
/// Equal loadings give an equicorrelated block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Correlation {
    None,
    /// The same ρ for every cluster and covariate.
    FixedAll {
        rho: f64,
    },
    /// One ρ_k ~ U[lo, hi] per cluster.
    PerCluster {
        lo: f64,
        hi: f64,
    },
    /// One ρ_kj ~ U[lo, hi] per cluster and relevant covariate.
    PerClusterAndCovariate {
        lo: f64,
        hi: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Misspecification {
    None,
    /// Student-t noise added to every entry, degrees of freedom chosen by the
    /// observation's cluster. Output is not standardized.
    StudentTNoise {
        dof: Vec<f64>,
    },
    /// Relevant block drawn from a multivariate Student-t with identity scale
    /// at the cluster centres. Output is standardized.
    StudentTComponents {
        dof: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub j_total: usize,
    pub frac_relevant: f64,
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    pub correlation: Correlation,
    pub noise_sd: f64,
    pub misspecification: Misspecification,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub data: DataMatrix,
    pub labels: Vec<usize>,
    pub relevant: Vec<bool>,
    /// Sampled correlations (clusters x relevant covariates) for the
    /// correlated variants.
    pub correlations: Option<Array2<f64>>,
}

impl SyntheticSpec {
    /// Weights 0.5/0.3/0.2 at centres 0, 2 and −2.
    pub fn base(n: usize, j_total: usize, frac_relevant: f64, seed: u64) -> Self {
        Self {
            n,
            j_total,
            frac_relevant,
            weights: vec![0.5, 0.3, 0.2],
            means: vec![0.0, 2.0, -2.0],
            correlation: Correlation::None,
            noise_sd: 0.0,
            misspecification: Misspecification::None,
            seed,
        }
    }

    pub fn n_relevant(&self) -> usize {
        (self.frac_relevant * self.j_total as f64).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(VbError::InvalidSpec(m));
        if self.n < 2 || self.j_total < 1 {
            return bad(format!(
                "need n >= 2 and j_total >= 1, got {} and {}",
                self.n, self.j_total
            ));
        }
        if !(self.frac_relevant > 0.0 && self.frac_relevant <= 1.0) {
            return bad(format!(
                "frac_relevant must lie in (0, 1], got {}",
                self.frac_relevant
            ));
        }
        if self.n_relevant() == 0 {
            return bad("frac_relevant * j_total rounds to zero relevant covariates".into());
        }
        if self.weights.is_empty() || self.weights.len() != self.means.len() {
            return bad("weights and means must be non-empty and of equal length".into());
        }
        if self.weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return bad("weights must be finite and non-negative".into());
        }
        if (self.weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return bad("weights must sum to 1".into());
        }
        if self.means.iter().any(|m| !m.is_finite()) {
            return bad("means must be finite".into());
        }
        if !(self.noise_sd.is_finite() && self.noise_sd >= 0.0) {
            return bad(format!(
                "noise_sd must be finite and >= 0, got {}",
                self.noise_sd
            ));
        }
        let rho_ok = |r: f64| r.is_finite() && (0.0..1.0).contains(&r);
        match self.correlation {
            Correlation::None => {}
            Correlation::FixedAll { rho } => {
                if !rho_ok(rho) {
                    return Err(VbError::NotPositiveDefinite(format!(
                        "rho {rho} outside [0, 1)"
                    )));
                }
            }
            Correlation::PerCluster { lo, hi } | Correlation::PerClusterAndCovariate { lo, hi } => {
                if !(rho_ok(lo) && rho_ok(hi)) {
                    return Err(VbError::NotPositiveDefinite(format!(
                        "bounds [{lo}, {hi}] outside [0, 1)"
                    )));
                }
                if lo > hi {
                    return bad(format!("correlation bounds reversed: [{lo}, {hi}]"));
                }
            }
        }
        match &self.misspecification {
            Misspecification::None => {}
            Misspecification::StudentTNoise { dof } => {
                if dof.len() != self.weights.len() {
                    return bad("one degrees-of-freedom value per cluster required".into());
                }
                if let Some(d) = dof.iter().find(|d| !(**d > 1.0)) {
                    return bad(format!("degrees of freedom must exceed 1, got {d}"));
                }
            }
            Misspecification::StudentTComponents { dof } => {
                if !(*dof > 1.0) {
                    return bad(format!("degrees of freedom must exceed 1, got {dof}"));
                }
            }
        }
        Ok(())
    }

    /// Runs whichever generator the spec describes, then adds Gaussian noise
    /// when `noise_sd > 0`.
    pub fn generate(&self) -> Result<SyntheticDataset> {
        self.validate()?;
        let base = match (&self.misspecification, &self.correlation) {
            (Misspecification::None, Correlation::None) => generate_base(self)?,
            (Misspecification::None, _) => generate_correlated(self)?,
            _ => generate_misspecified(self)?,
        };
        if self.noise_sd > 0.0 {
            add_gaussian_noise(&base, self.noise_sd, self.seed.wrapping_add(0x9e37_79b9))
        } else {
            Ok(base)
        }
    }
}

fn draw_labels(rng: &mut ChaCha8Rng, weights: &[f64], n: usize) -> Vec<usize> {
    (0..n)
        .map(|_| {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            for (k, w) in weights.iter().enumerate() {
                acc += w;
                if u < acc {
                    return k;
                }
            }
            weights.len() - 1
        })
        .collect()
}

fn relevance_mask(spec: &SyntheticSpec) -> Vec<bool> {
    let n_rel = spec.n_relevant();
    (0..spec.j_total).map(|j| j < n_rel).collect()
}

fn into_dataset(
    values: Array2<f64>,
    labels: Vec<usize>,
    relevant: Vec<bool>,
    correlations: Option<Array2<f64>>,
) -> Result<SyntheticDataset> {
    Ok(SyntheticDataset {
        data: DataMatrix::new(values)?,
        labels,
        relevant,
        correlations,
    })
}

fn fill_irrelevant(rng: &mut ChaCha8Rng, values: &mut Array2<f64>, n_rel: usize) {
    for n in 0..values.nrows() {
        for j in n_rel..values.ncols() {
            values[[n, j]] = rng.sample(StandardNormal);
        }
    }
}

/// Spherical unit-variance clusters on the relevant block.
pub fn generate_base(spec: &SyntheticSpec) -> Result<SyntheticDataset> {
    spec.validate()?;
    if spec.correlation != Correlation::None
        || spec.misspecification != Misspecification::None
        || spec.noise_sd != 0.0
    {
        return Err(VbError::InvalidSpec(
            "base generator takes no correlation, noise or misspecification".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let labels = draw_labels(&mut rng, &spec.weights, spec.n);
    let n_rel = spec.n_relevant();
    let mut values = Array2::zeros((spec.n, spec.j_total));
    for (n, &k) in labels.iter().enumerate() {
        for j in 0..n_rel {
            let z: f64 = rng.sample(StandardNormal);
            values[[n, j]] = spec.means[k] + z;
        }
    }
    fill_irrelevant(&mut rng, &mut values, n_rel);
    into_dataset(values, labels, relevance_mask(spec), None)
}

/// Relevant block with within-cluster correlation; see [`Correlation`].
pub fn generate_correlated(spec: &SyntheticSpec) -> Result<SyntheticDataset> {
    spec.validate()?;
    if spec.correlation == Correlation::None {
        return Err(VbError::InvalidSpec(
            "correlated generator needs a correlation variant".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let labels = draw_labels(&mut rng, &spec.weights, spec.n);
    let n_rel = spec.n_relevant();
    let n_clusters = spec.weights.len();
    let mut rho = Array2::zeros((n_clusters, n_rel));
    match spec.correlation {
        Correlation::None => unreachable!(),
        Correlation::FixedAll { rho: r } => rho.fill(r),
        Correlation::PerCluster { lo, hi } => {
            for k in 0..n_clusters {
                let r = rng.random_range(lo..=hi);
                rho.row_mut(k).fill(r);
            }
        }
        Correlation::PerClusterAndCovariate { lo, hi } => {
            for v in rho.iter_mut() {
                *v = rng.random_range(lo..=hi);
            }
        }
    }
    let mut values = Array2::zeros((spec.n, spec.j_total));
    for (n, &k) in labels.iter().enumerate() {
        let shared: f64 = rng.sample(StandardNormal);
        for j in 0..n_rel {
            let own: f64 = rng.sample(StandardNormal);
            let r = rho[[k, j]];
            values[[n, j]] = spec.means[k] + r.sqrt() * shared + (1.0 - r).sqrt() * own;
        }
    }
    fill_irrelevant(&mut rng, &mut values, n_rel);
    into_dataset(values, labels, relevance_mask(spec), Some(rho))
}

/// Adds i.i.d. N(0, sd²) noise to every entry.
pub fn add_gaussian_noise(
    dataset: &SyntheticDataset,
    sd: f64,
    seed: u64,
) -> Result<SyntheticDataset> {
    if !(sd.is_finite() && sd >= 0.0) {
        return Err(VbError::InvalidSpec(format!(
            "noise sd must be finite and >= 0, got {sd}"
        )));
    }
    if sd == 0.0 {
        return Ok(dataset.clone());
    }
    let normal = Normal::new(0.0, sd).map_err(|e| VbError::InvalidSpec(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = dataset.data.values().clone();
    values.mapv_inplace(|v| v + normal.sample(&mut rng));
    Ok(SyntheticDataset {
        data: DataMatrix::new(values)?.with_names_from(&dataset.data),
        ..dataset.clone()
    })
}

/// Student-t departures from the base design; see [`Misspecification`].
pub fn generate_misspecified(spec: &SyntheticSpec) -> Result<SyntheticDataset> {
    spec.validate()?;
    let t_err = |e: rand_distr::ChiSquaredError| VbError::InvalidSpec(e.to_string());
    match &spec.misspecification {
        Misspecification::None => Err(VbError::InvalidSpec("no misspecification requested".into())),
        Misspecification::StudentTNoise { dof } => {
            let base_spec = SyntheticSpec {
                misspecification: Misspecification::None,
                correlation: Correlation::None,
                noise_sd: 0.0,
                ..spec.clone()
            };
            let base = generate_base(&base_spec)?;
            let dists = dof
                .iter()
                .map(|&d| StudentT::new(d).map_err(t_err))
                .collect::<Result<Vec<_>>>()?;
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed.wrapping_add(0x5851_f42d));
            let mut values = base.data.values().clone();
            for (n, mut row) in values.rows_mut().into_iter().enumerate() {
                let dist = &dists[base.labels[n]];
                row.mapv_inplace(|v| v + dist.sample(&mut rng));
            }
            into_dataset(values, base.labels, base.relevant, None)
        }
        Misspecification::StudentTComponents { dof } => {
            let chi = ChiSquared::new(*dof).map_err(|e| VbError::InvalidSpec(e.to_string()))?;
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            let labels = draw_labels(&mut rng, &spec.weights, spec.n);
            let n_rel = spec.n_relevant();
            let mut values = Array2::zeros((spec.n, spec.j_total));
            for (n, &k) in labels.iter().enumerate() {
                let w: f64 = chi.sample(&mut rng);
                let scale = (dof / w).sqrt();
                for j in 0..n_rel {
                    let z: f64 = rng.sample(StandardNormal);
                    values[[n, j]] = spec.means[k] + scale * z;
                }
            }
            fill_irrelevant(&mut rng, &mut values, n_rel);
            let data = standardize(&DataMatrix::new(values)?)?;
            Ok(SyntheticDataset {
                data,
                labels,
                relevant: relevance_mask(spec),
                correlations: None,
            })
        }
    }
}

/// Shuffles each listed column independently over rows, breaking its link
/// to the cluster labels while keeping its marginal distribution.
pub fn permute_covariates(data: &DataMatrix, columns: &[usize], seed: u64) -> Result<DataMatrix> {
    let mut values = data.values().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for &j in columns {
        if j >= data.j() {
            return Err(VbError::ColumnOutOfRange {
                index: j,
                cols: data.j(),
            });
        }
        let mut column: Vec<f64> = values.column(j).to_vec();
        column.shuffle(&mut rng);
        for (n, v) in column.into_iter().enumerate() {
            values[[n, j]] = v;
        }
    }
    Ok(DataMatrix::new(values)?.with_names_from(data))
}
