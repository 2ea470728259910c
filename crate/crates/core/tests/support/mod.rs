//! Reference implementations shared by the integration suites. Each one is
//! a direct transcription of the update or metric it checks, written
//! without the caching and reuse of the library code.
#![allow(dead_code)]

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vbvarsel::engine::{update_component_params, update_mixture_weights};
use vbvarsel::special::digamma;
use vbvarsel::{init_state, DataMatrix, Hyperparameters, TemperatureSchedule, VariationalState};

pub const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// A state that has already been through one M-step, so components differ.
pub fn warmed_state(data: &DataMatrix, h: &Hyperparameters, seed: u64) -> VariationalState {
    let mut s = init_state(data, h, &TemperatureSchedule::untempered(), seed).unwrap();
    update_mixture_weights(&mut s, h, 1.0).unwrap();
    update_component_params(&mut s, data, h, 1.0).unwrap();
    s
}

pub fn random_small(seed: u64, n: usize, j: usize) -> DataMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = Array2::from_shape_fn((n, j), |(i, _)| {
        let centre = if i % 2 == 0 { -1.5 } else { 1.5 };
        centre + rng.random_range(-1.0..1.0)
    });
    DataMatrix::new(values).unwrap()
}

/// The untempered updates written without any temperature, in the same
/// floating-point association as the tempered code.
pub mod untempered {
    use super::*;

    pub fn alpha(s: &VariationalState, h: &Hyperparameters) -> Array1<f64> {
        s.nk.mapv(|nk| nk + h.alpha0)
    }

    pub fn params(
        s: &VariationalState,
        data: &DataMatrix,
        h: &Hyperparameters,
    ) -> [Array2<f64>; 4] {
        let (k_max, j_max) = (s.k(), data.j());
        let mut out = [
            Array2::zeros((k_max, j_max)),
            Array2::zeros((k_max, j_max)),
            Array2::zeros((k_max, j_max)),
            Array2::zeros((k_max, j_max)),
        ];
        for k in 0..k_max {
            for j in 0..j_max {
                let c = s.c[j];
                let nk = s.nk[k];
                let col = data.column(j);
                let sum: f64 = col.iter().zip(s.r.column(k)).map(|(x, r)| r * x).sum();
                let (mean, var) = if nk <= 0.0 {
                    (0.0, 0.0)
                } else {
                    let mean = sum / nk;
                    let spread: f64 = col
                        .iter()
                        .zip(s.r.column(k))
                        .map(|(x, r)| r * (x - mean) * (x - mean))
                        .sum();
                    (mean, spread / nk)
                };
                let nk_eff = if nk <= 0.0 { 0.0 } else { nk };
                let ws = nk_eff * mean;
                let cn = c * nk_eff;
                let beta = cn + h.beta0;
                out[0][[k, j]] = beta;
                out[1][[k, j]] = h.m0[j] + c * (ws - nk_eff * h.m0[j]) / beta;
                out[2][[k, j]] = 0.5 * cn + h.a0;
                let shrink = h.beta0 * cn / (h.beta0 + cn);
                let dev = mean - h.m0[j];
                out[3][[k, j]] = h.b0[j] + 0.5 * (cn * var + shrink * dev * dev);
            }
        }
        out
    }

    fn density_parts(s: &VariationalState, k: usize, j: usize) -> (f64, f64) {
        let (a, b) = (s.a[[k, j]], s.b[[k, j]]);
        (
            -0.5 * LN_2PI + 0.5 * (digamma(a) - b.ln()) - 0.5 / s.beta[[k, j]],
            0.5 * (a / b),
        )
    }

    fn null_density(s: &VariationalState, j: usize, x: f64) -> f64 {
        s.null.ln_density(j, x)
    }

    pub fn responsibilities(s: &VariationalState, data: &DataMatrix) -> Array2<f64> {
        let k_max = s.k();
        let psi_sum = digamma(s.alpha.sum());
        let mut r = Array2::zeros((data.n(), k_max));
        for n in 0..data.n() {
            let mut log_rho = vec![0.0; k_max];
            for (k, slot) in log_rho.iter_mut().enumerate() {
                let mut acc = digamma(s.alpha[k]) - psi_sum;
                for j in 0..data.j() {
                    let x = data.values()[[n, j]];
                    let (offset, hp) = density_parts(s, k, j);
                    let d = x - s.m[[k, j]];
                    acc += s.c[j] * (offset - hp * d * d) + (1.0 - s.c[j]) * null_density(s, j, x);
                }
                *slot = acc;
            }
            let max = log_rho.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let w: Vec<f64> = log_rho.iter().map(|l| (l - max).exp()).collect();
            let total: f64 = w.iter().sum();
            for k in 0..k_max {
                r[[n, k]] = w[k] / total;
            }
        }
        r
    }

    pub fn selection(s: &VariationalState, data: &DataMatrix, h: &Hyperparameters) -> Array1<f64> {
        let mut c = s.c.clone();
        for j in 0..data.j() {
            let (mut sel, mut null) = (0.0, 0.0);
            for n in 0..data.n() {
                let x = data.values()[[n, j]];
                let mut mass = 0.0;
                for k in 0..s.k() {
                    let (offset, hp) = density_parts(s, k, j);
                    let d = x - s.m[[k, j]];
                    sel += s.r[[n, k]] * (offset - hp * d * d);
                    mass += s.r[[n, k]];
                }
                null += mass * null_density(s, j, x);
            }
            let cj = s.c[j];
            let total = digamma(2.0 * h.d0 + 1.0);
            let e1 = digamma(cj + h.d0) - total;
            let e2 = digamma((1.0 - cj) + h.d0) - total;
            let z = (e1 + sel) - (e2 + null);
            c[j] = if z >= 0.0 {
                1.0 / (1.0 + (-z).exp())
            } else {
                z.exp() / (1.0 + z.exp())
            };
        }
        c
    }
}

/// Direct transcription of one annealed sweep with no shared helpers.
pub struct NaiveSweep {
    pub r: Array2<f64>,
    pub c: Array1<f64>,
    pub alpha: Array1<f64>,
    pub beta: Array2<f64>,
    pub m: Array2<f64>,
    pub a: Array2<f64>,
    pub b: Array2<f64>,
}

pub fn naive_sweep(
    s: &VariationalState,
    x: &Array2<f64>,
    h: &Hyperparameters,
    t: f64,
) -> NaiveSweep {
    let (n_obs, n_cov) = x.dim();
    let k_max = s.k();
    let e_ln_f = |k: usize, j: usize, v: f64| {
        let e_ln_tau = digamma(s.a[[k, j]]) - s.b[[k, j]].ln();
        let e_quad = s.a[[k, j]] / s.b[[k, j]] * (v - s.m[[k, j]]).powi(2) + 1.0 / s.beta[[k, j]];
        0.5 * e_ln_tau - 0.5 * LN_2PI - 0.5 * e_quad
    };
    let ln_f0 = |j: usize, v: f64| {
        let tau = s.null.tau0[j];
        0.5 * tau.ln() - 0.5 * LN_2PI - 0.5 * tau * (v - s.null.mu0[j]).powi(2)
    };

    let alpha_total: f64 = s.alpha.sum();
    let mut r = Array2::zeros((n_obs, k_max));
    for n in 0..n_obs {
        let mut rho = vec![0.0; k_max];
        for k in 0..k_max {
            let mut v = digamma(s.alpha[k]) - digamma(alpha_total);
            for j in 0..n_cov {
                v += s.c[j] * e_ln_f(k, j, x[[n, j]]) + (1.0 - s.c[j]) * ln_f0(j, x[[n, j]]);
            }
            rho[k] = (v / t).exp();
        }
        let z: f64 = rho.iter().sum();
        for k in 0..k_max {
            r[[n, k]] = rho[k] / z;
        }
    }

    let mut c = Array1::zeros(n_cov);
    for j in 0..n_cov {
        let cj = s.c[j];
        let e_ln_delta =
            digamma((cj + h.d0 + t - 1.0) / t) - digamma((2.0 * h.d0 + 1.0 + 2.0 * t - 2.0) / t);
        let e_ln_1m = digamma((1.0 - cj + h.d0 + t - 1.0) / t)
            - digamma((2.0 * h.d0 + 1.0 + 2.0 * t - 2.0) / t);
        let mut ln_eta1 = e_ln_delta;
        let mut ln_eta2 = e_ln_1m;
        for n in 0..n_obs {
            for k in 0..k_max {
                ln_eta1 += r[[n, k]] * e_ln_f(k, j, x[[n, j]]);
                ln_eta2 += r[[n, k]] * ln_f0(j, x[[n, j]]);
            }
        }
        let (e1, e2) = ((ln_eta1 / t).exp(), (ln_eta2 / t).exp());
        c[j] = e1 / (e1 + e2);
    }

    let nk: Vec<f64> = (0..k_max)
        .map(|k| (0..n_obs).map(|n| r[[n, k]]).sum())
        .collect();
    let alpha = Array1::from_iter(nk.iter().map(|&v| (v + h.alpha0 + t - 1.0) / t));
    let mut beta = Array2::zeros((k_max, n_cov));
    let mut m = Array2::zeros((k_max, n_cov));
    let mut a = Array2::zeros((k_max, n_cov));
    let mut b = Array2::zeros((k_max, n_cov));
    for k in 0..k_max {
        for j in 0..n_cov {
            let sum_rx: f64 = (0..n_obs).map(|n| r[[n, k]] * x[[n, j]]).sum();
            let xbar = sum_rx / nk[k];
            let skj: f64 = (0..n_obs)
                .map(|n| r[[n, k]] * (x[[n, j]] - xbar).powi(2))
                .sum::<f64>()
                / nk[k];
            let cj = c[j];
            beta[[k, j]] = (cj * nk[k] + h.beta0) / t;
            m[[k, j]] = (cj * sum_rx + h.m0[j] * h.beta0) / (t * beta[[k, j]]);
            a[[k, j]] = (0.5 * cj * nk[k] + h.a0 + t - 1.0) / t;
            b[[k, j]] = h.b0[j] / t
                + (cj * nk[k] * skj
                    + h.beta0 * cj * nk[k] / (h.beta0 + cj * nk[k]) * (xbar - h.m0[j]).powi(2))
                    / (2.0 * t);
        }
    }
    NaiveSweep {
        r,
        c,
        alpha,
        beta,
        m,
        a,
        b,
    }
}

pub fn assert_close(name: &str, got: &[f64], want: &[f64]) {
    assert_eq!(got.len(), want.len());
    for (i, (g, w)) in got.iter().zip(want).enumerate() {
        let tol = 1e-10 * w.abs().max(1.0);
        assert!((g - w).abs() <= tol, "{name}[{i}]: {g} vs {w}");
    }
}

/// ARI from explicit pair classification: n11 pairs together in both,
/// n00 apart in both, n10 and n01 split.
pub fn ari_by_pairs(a: &[usize], b: &[usize]) -> f64 {
    let (mut n11, mut n00, mut n10, mut n01) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..a.len() {
        for j in (i + 1)..a.len() {
            match (a[i] == a[j], b[i] == b[j]) {
                (true, true) => n11 += 1,
                (false, false) => n00 += 1,
                (true, false) => n10 += 1,
                (false, true) => n01 += 1,
            }
        }
    }
    let num = 2 * (n00 * n11 - n01 * n10);
    let den = (n00 + n01) * (n01 + n11) + (n00 + n10) * (n10 + n11);
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}
