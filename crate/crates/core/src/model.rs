//! Domain types shared by the inference engine: the data matrix, prior
//! hyperparameters, the per-covariate null model and the variational state.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Result, VbError};
use crate::schedule::TemperatureSchedule;

/// N observations by J covariates, all finite.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: Array2<f64>,
    column_names: Option<Vec<String>>,
}

impl DataMatrix {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        let (rows, cols) = values.dim();
        if rows < 2 || cols < 1 {
            return Err(VbError::InvalidShape { rows, cols });
        }
        for ((row, col), v) in values.indexed_iter() {
            if !v.is_finite() {
                return Err(VbError::NonFinite { row, col });
            }
        }
        Ok(Self {
            values,
            column_names: None,
        })
    }

    pub fn with_column_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.j() {
            return Err(VbError::ColumnNameMismatch {
                expected: self.j(),
                got: names.len(),
            });
        }
        self.column_names = Some(names);
        Ok(self)
    }

    /// Builds a matrix from row-major nested vectors.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let j = rows.first().map_or(0, Vec::len);
        let mut values = Array2::zeros((n, j));
        for (i, row) in rows.iter().enumerate() {
            if row.len() != j {
                return Err(VbError::InvalidShape {
                    rows: n,
                    cols: row.len(),
                });
            }
            for (c, &v) in row.iter().enumerate() {
                values[[i, c]] = v;
            }
        }
        Self::new(values)
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn j(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn column(&self, j: usize) -> ArrayView1<'_, f64> {
        self.values.column(j)
    }

    pub fn column_names(&self) -> Option<&[String]> {
        self.column_names.as_deref()
    }

    /// Name of column `j`, falling back to its index.
    pub fn column_label(&self, j: usize) -> String {
        match &self.column_names {
            Some(names) => names[j].clone(),
            None => j.to_string(),
        }
    }

    /// Returns a new matrix whose column `i` is column `order[i]` of `self`.
    pub fn select_columns(&self, order: &[usize]) -> Result<Self> {
        for &index in order {
            if index >= self.j() {
                return Err(VbError::ColumnOutOfRange {
                    index,
                    cols: self.j(),
                });
            }
        }
        let values = self.values.select(Axis(1), order);
        let column_names = self
            .column_names
            .as_ref()
            .map(|names| order.iter().map(|&i| names[i].clone()).collect());
        Ok(Self {
            values,
            column_names,
        })
    }

    /// Copies column names from `other` when the widths agree.
    pub fn with_names_from(mut self, other: &DataMatrix) -> Self {
        if other.j() == self.j() {
            self.column_names = other.column_names.clone();
        }
        self
    }

    pub(crate) fn from_parts_unchecked(
        values: Array2<f64>,
        column_names: Option<Vec<String>>,
    ) -> Self {
        Self {
            values,
            column_names,
        }
    }
}

/// Mean and biased (divide-by-N) variance of a column.
fn mean_and_variance(column: ArrayView1<'_, f64>) -> (f64, f64) {
    let n = column.len() as f64;
    let mean = column.iter().sum::<f64>() / n;
    let var = column.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var)
}

/// Per-covariate null model: a single Gaussian fitted by maximum likelihood.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullParams {
    pub mu0: Vec<f64>,
    pub tau0: Vec<f64>,
}

impl NullParams {
    /// Log density of `x` under the null Gaussian of covariate `j`.
    pub fn ln_density(&self, j: usize, x: f64) -> f64 {
        let d = x - self.mu0[j];
        -0.5 * LN_2PI + 0.5 * self.tau0[j].ln() - 0.5 * self.tau0[j] * d * d
    }
}

pub(crate) const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Column means and reciprocal biased variances.
pub fn fit_null_params(data: &DataMatrix) -> Result<NullParams> {
    let mut mu0 = Vec::with_capacity(data.j());
    let mut tau0 = Vec::with_capacity(data.j());
    for j in 0..data.j() {
        let (mean, var) = mean_and_variance(data.column(j));
        let tau = 1.0 / var;
        if var <= 0.0 || !tau.is_finite() {
            return Err(VbError::ZeroVarianceColumn(j));
        }
        mu0.push(mean);
        tau0.push(tau);
    }
    Ok(NullParams { mu0, tau0 })
}

/// Centres every column and scales it to unit biased variance.
pub fn standardize(data: &DataMatrix) -> Result<DataMatrix> {
    let mut values = data.values().clone();
    for (j, mut column) in values.axis_iter_mut(Axis(1)).enumerate() {
        let (mean, var) = mean_and_variance(column.view());
        let sd = var.sqrt();
        if var <= 0.0 || !(1.0 / var).is_finite() {
            return Err(VbError::ZeroVarianceColumn(j));
        }
        column.mapv_inplace(|x| (x - mean) / sd);
    }
    Ok(DataMatrix::from_parts_unchecked(
        values,
        data.column_names.clone(),
    ))
}

/// Fixed prior and engine constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    /// Maximum number of mixture components K.
    pub k_max: usize,
    /// Symmetric Dirichlet concentration.
    pub alpha0: f64,
    /// Prior means, one per covariate, in the space the model is fitted in
    /// (after standardization when `standardize` is set).
    pub m0: Vec<f64>,
    pub beta0: f64,
    pub a0: f64,
    /// Gamma scale, one per covariate.
    pub b0: Vec<f64>,
    /// Symmetric Beta shape on the selection probabilities.
    pub d0: f64,
    /// Initial selection weight for every covariate.
    pub c_init: f64,
    pub max_iterations: usize,
    /// Absolute ELBO-improvement threshold.
    pub epsilon: f64,
    pub standardize: bool,
    /// Number of opening sweeps during which the selection weights stay at
    /// `c_init`. Responsibilities computed from the random start carry no
    /// cluster signal yet, and scoring covariates against them deselects
    /// nearly everything; deselection is then self-reinforcing because the
    /// deselected component parameters revert to the vague prior.
    pub selection_warmup: usize,
    /// Independent random starts per fit. The start with the highest final
    /// ELBO is returned.
    pub restarts: usize,
}

impl Hyperparameters {
    /// Defaults for simulated data with `j` covariates: the "Synthetic" row of
    /// the usual prior table with `m0` at the (standardized) column mean 0.
    pub fn synthetic(j: usize) -> Self {
        Self {
            k_max: 3,
            alpha0: 0.1,
            m0: vec![0.0; j],
            beta0: 1e-3,
            a0: 3.0,
            b0: vec![1.0; j],
            d0: 0.9,
            c_init: 0.5,
            max_iterations: 200,
            epsilon: 1e-5,
            standardize: true,
            selection_warmup: 1,
            restarts: 10,
        }
    }

    /// Sets every `m0` entry to the mean of the matching column as the model
    /// will see it.
    pub fn with_data_mean_prior(mut self, data: &DataMatrix) -> Result<Self> {
        self.m0 = if self.standardize {
            vec![0.0; data.j()]
        } else {
            (0..data.j())
                .map(|j| mean_and_variance(data.column(j)).0)
                .collect()
        };
        Ok(self)
    }

    pub fn with_uniform_b0(mut self, b0: f64) -> Self {
        let j = self.b0.len();
        self.b0 = vec![b0; j];
        self
    }

    pub fn validate(&self, j: usize) -> Result<()> {
        fn bad(name: &'static str, reason: impl Into<String>) -> VbError {
            VbError::InvalidHyperparameter {
                name,
                reason: reason.into(),
            }
        }
        fn positive(name: &'static str, v: f64) -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(bad(name, format!("must be finite and > 0, got {v}")))
            }
        }
        if self.k_max < 1 {
            return Err(bad("k_max", "must be at least 1"));
        }
        positive("alpha0", self.alpha0)?;
        positive("beta0", self.beta0)?;
        positive("a0", self.a0)?;
        positive("d0", self.d0)?;
        positive("epsilon", self.epsilon)?;
        if self.m0.len() != j {
            return Err(bad(
                "m0",
                format!("expected {j} entries, got {}", self.m0.len()),
            ));
        }
        if let Some(v) = self.m0.iter().find(|v| !v.is_finite()) {
            return Err(bad("m0", format!("entries must be finite, got {v}")));
        }
        if self.b0.len() != j {
            return Err(bad(
                "b0",
                format!("expected {j} entries, got {}", self.b0.len()),
            ));
        }
        for &v in &self.b0 {
            positive("b0", v)?;
        }
        if !(self.c_init > 0.0 && self.c_init <= 1.0) {
            return Err(bad(
                "c_init",
                format!("must lie in (0, 1], got {}", self.c_init),
            ));
        }
        if self.max_iterations < 1 {
            return Err(bad("max_iterations", "must be at least 1"));
        }
        if self.restarts < 1 {
            return Err(bad("restarts", "must be at least 1"));
        }
        Ok(())
    }
}

/// All mutable variational quantities of one fit.
#[derive(Debug, Clone, PartialEq)]
pub struct VariationalState {
    /// Responsibilities, N x K.
    pub r: Array2<f64>,
    /// Expected component counts N_k = Σ_n r_nk, refreshed with `r`.
    pub nk: Array1<f64>,
    /// Selection weights E[γ_j].
    pub c: Array1<f64>,
    /// Dirichlet posterior parameters.
    pub alpha: Array1<f64>,
    /// Gaussian-Gamma posterior parameters, K x J.
    pub beta: Array2<f64>,
    pub m: Array2<f64>,
    pub a: Array2<f64>,
    pub b: Array2<f64>,
    pub null: NullParams,
    pub temperature: f64,
}

impl VariationalState {
    pub fn k(&self) -> usize {
        self.alpha.len()
    }

    pub fn j(&self) -> usize {
        self.c.len()
    }
}

/// Draws flat-Dirichlet responsibilities and sets every other parameter to
/// its prior value. Pure in `(data, hyper, schedule, seed)`.
pub fn init_state(
    data: &DataMatrix,
    hyper: &Hyperparameters,
    schedule: &TemperatureSchedule,
    seed: u64,
) -> Result<VariationalState> {
    hyper.validate(data.j())?;
    let null = fit_null_params(data)?;
    let temperature = schedule.temperature(0)?;
    let (n, j, k) = (data.n(), data.j(), hyper.k_max);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut r = Array2::zeros((n, k));
    for mut row in r.axis_iter_mut(Axis(0)) {
        let mut total = 0.0;
        for v in row.iter_mut() {
            let draw: f64 = Exp1.sample(&mut rng);
            *v = draw;
            total += draw;
        }
        row.mapv_inplace(|v| v / total);
    }
    let nk = r.sum_axis(Axis(0));

    let m0 = Array1::from(hyper.m0.clone());
    let b0 = Array1::from(hyper.b0.clone());
    let broadcast = |row: &Array1<f64>| {
        row.broadcast((k, j))
            .expect("length-J row broadcasts to K x J")
            .to_owned()
    };

    Ok(VariationalState {
        r,
        nk,
        c: Array1::from_elem(j, hyper.c_init),
        alpha: Array1::from_elem(k, hyper.alpha0),
        beta: Array2::from_elem((k, j), hyper.beta0),
        m: broadcast(&m0),
        a: Array2::from_elem((k, j), hyper.a0),
        b: broadcast(&b0),
        null,
        temperature,
    })
}
