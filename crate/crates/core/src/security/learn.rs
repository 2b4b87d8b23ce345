//! Small learners for the adversaries: ridge regression, logistic
//! regression and a one-hidden-layer regressor.

use alloc::vec::Vec;

use crate::codec::nn::{Activation, Network};
use crate::codec::Adam;
use crate::linalg::solve_spd;
use crate::rng::Stream;
use crate::Result;
use rand::seq::SliceRandom;

/// Per-feature affine standardisation fitted on training rows.
#[derive(Debug, Clone)]
pub(crate) struct Standardizer {
    mean: Vec<f64>,
    inv_std: Vec<f64>,
}

impl Standardizer {
    pub(crate) fn fit(rows: &[Vec<f64>]) -> Self {
        let d = rows.first().map_or(0, |r| r.len());
        let n = rows.len().max(1) as f64;
        let mut mean = alloc::vec![0.0; d];
        let mut sq = alloc::vec![0.0; d];
        for r in rows {
            for j in 0..d {
                mean[j] += r[j] / n;
                sq[j] += r[j] * r[j] / n;
            }
        }
        let inv_std = (0..d)
            .map(|j| {
                let var = sq[j] - mean[j] * mean[j];
                if var > 1e-12 {
                    1.0 / libm::sqrt(var)
                } else {
                    0.0
                }
            })
            .collect();
        Standardizer { mean, inv_std }
    }

    pub(crate) fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(&self.mean)
            .zip(&self.inv_std)
            .map(|((v, m), s)| (v - m) * s)
            .collect()
    }
}

/// Multi-output linear model `y = W·x + b` on standardised inputs.
#[derive(Debug, Clone)]
pub(crate) struct Ridge {
    scaler: Standardizer,
    /// d×o, row-major.
    weights: Vec<f64>,
    bias: Vec<f64>,
    outputs: usize,
}

impl Ridge {
    pub(crate) fn fit(x: &[Vec<f64>], y: &[Vec<f64>], lambda: f64) -> Result<Self> {
        let scaler = Standardizer::fit(x);
        let xs: Vec<Vec<f64>> = x.iter().map(|r| scaler.apply(r)).collect();
        let d = xs.first().map_or(0, |r| r.len());
        let o = y.first().map_or(0, |r| r.len());
        let n = x.len() as f64;
        let mut bias = alloc::vec![0.0; o];
        for r in y {
            bias.iter_mut().zip(r).for_each(|(b, v)| *b += v / n);
        }
        // Inputs are centred, so the intercept decouples.
        let mut gram = alloc::vec![0.0; d * d];
        let mut rhs = alloc::vec![0.0; d * o];
        for (xr, yr) in xs.iter().zip(y) {
            for i in 0..d {
                let xi = xr[i];
                if xi == 0.0 {
                    continue;
                }
                for j in 0..=i {
                    gram[i * d + j] += xi * xr[j];
                }
                for (t, (&yv, &b)) in yr.iter().zip(&bias).enumerate() {
                    rhs[i * o + t] += xi * (yv - b);
                }
            }
        }
        for i in 0..d {
            for j in 0..i {
                gram[j * d + i] = gram[i * d + j];
            }
            gram[i * d + i] += lambda * n;
        }
        let weights = solve_spd(&gram, d, &rhs, o)?;
        Ok(Ridge {
            scaler,
            weights,
            bias,
            outputs: o,
        })
    }

    pub(crate) fn predict(&self, row: &[f64]) -> Vec<f64> {
        let x = self.scaler.apply(row);
        let mut out = self.bias.clone();
        for (i, &xi) in x.iter().enumerate() {
            let w = &self.weights[i * self.outputs..(i + 1) * self.outputs];
            out.iter_mut().zip(w).for_each(|(o, w)| *o += xi * w);
        }
        out
    }
}

fn sigmoid(t: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-t))
}

/// Binary logistic regression trained by full-batch Adam on standardised
/// features with a small L2 penalty.
#[derive(Debug, Clone)]
pub(crate) struct Logistic {
    scaler: Standardizer,
    weights: Vec<f64>,
    bias: f64,
}

impl Logistic {
    pub(crate) fn fit(x: &[Vec<f64>], labels: &[bool], epochs: usize, learning_rate: f64) -> Self {
        let scaler = Standardizer::fit(x);
        let xs: Vec<Vec<f64>> = x.iter().map(|r| scaler.apply(r)).collect();
        let d = xs.first().map_or(0, |r| r.len());
        let n = xs.len().max(1) as f64;
        let mut params = alloc::vec![0.0; d + 1];
        let mut adam = Adam::new(d + 1, learning_rate);
        let mut grad = alloc::vec![0.0; d + 1];
        for _ in 0..epochs {
            grad.iter_mut().for_each(|g| *g = 0.0);
            for (r, &label) in xs.iter().zip(labels) {
                let t = r.iter().zip(&params).map(|(a, w)| a * w).sum::<f64>() + params[d];
                let e = sigmoid(t) - if label { 1.0 } else { 0.0 };
                for j in 0..d {
                    grad[j] += e * r[j] / n;
                }
                grad[d] += e / n;
            }
            for j in 0..d {
                grad[j] += 1e-3 * params[j];
            }
            adam.step(&mut params, &grad);
        }
        let bias = params.pop().unwrap_or(0.0);
        Logistic {
            scaler,
            weights: params,
            bias,
        }
    }

    /// Log-odds of label `true`.
    pub(crate) fn score(&self, row: &[f64]) -> f64 {
        self.scaler
            .apply(row)
            .iter()
            .zip(&self.weights)
            .map(|(a, w)| a * w)
            .sum::<f64>()
            + self.bias
    }
}

/// One-hidden-layer tanh regressor trained with mini-batch Adam and early
/// stopping on a held-out slice of the training rows.
#[derive(Debug, Clone)]
pub(crate) struct MlpRegressor {
    scaler: Standardizer,
    net: Network,
    target_mean: Vec<f64>,
    target_scale: f64,
}

pub(crate) struct MlpSettings {
    pub hidden: usize,
    pub epochs: usize,
    pub batch: usize,
    pub learning_rate: f64,
    pub patience: usize,
}

impl MlpRegressor {
    pub(crate) fn fit(x: &[Vec<f64>], y: &[Vec<f64>], cfg: &MlpSettings, rng: &mut Stream) -> Result<Self> {
        let scaler = Standardizer::fit(x);
        let d = x.first().map_or(0, |r| r.len());
        let o = y.first().map_or(0, |r| r.len());
        let n = x.len() as f64;
        let mut target_mean = alloc::vec![0.0; o];
        for r in y {
            target_mean.iter_mut().zip(r).for_each(|(m, v)| *m += v / n);
        }
        let var = y
            .iter()
            .flat_map(|r| r.iter().zip(&target_mean).map(|(v, m)| (v - m) * (v - m)))
            .sum::<f64>()
            / (n * o.max(1) as f64);
        let target_scale = if var > 0.0 { libm::sqrt(var) } else { 1.0 };
        let mut model = MlpRegressor {
            scaler,
            net: Network::new(&[d, cfg.hidden, o], Activation::Tanh, Activation::Identity),
            target_mean,
            target_scale,
        };
        model.net.init_xavier(rng, 1.0);
        // Output bias at zero means the untrained model predicts the mean.
        let xs: Vec<Vec<f64>> = x.iter().map(|r| model.scaler.apply(r)).collect();
        let ys: Vec<Vec<f64>> = y.iter().map(|r| model.normalise(r)).collect();

        let hold = (xs.len() / 5).max(1).min(xs.len().saturating_sub(1));
        let (train_idx, val_idx): (Vec<usize>, Vec<usize>) = {
            let mut all: Vec<usize> = (0..xs.len()).collect();
            all.shuffle(rng);
            let val = all.split_off(all.len() - hold);
            (all, val)
        };
        let val_loss = |net: &Network| -> f64 {
            let mut total = 0.0;
            for &i in &val_idx {
                let p = net.forward(&xs[i]);
                total += p.iter().zip(&ys[i]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
            }
            total / val_idx.len().max(1) as f64
        };
        let mut adam = Adam::new(model.net.param_count(), cfg.learning_rate);
        let mut best = (val_loss(&model.net), model.net.clone());
        let mut stagnant = 0;
        let mut order = train_idx;
        let mut grad = alloc::vec![0.0; model.net.param_count()];
        for _ in 0..cfg.epochs {
            order.shuffle(rng);
            for chunk in order.chunks(cfg.batch.max(1)) {
                grad.iter_mut().for_each(|g| *g = 0.0);
                let scale = 2.0 / (chunk.len() * o.max(1)) as f64;
                for &i in chunk {
                    let trace = model.net.forward_trace(&xs[i]);
                    let g_out: Vec<f64> = trace.output().iter().zip(&ys[i]).map(|(a, b)| scale * (a - b)).collect();
                    model.net.backward(&trace, &g_out, &mut grad);
                }
                let mut params = model.net.params();
                adam.step(&mut params, &grad);
                model.net.set_params(&params)?;
            }
            let v = val_loss(&model.net);
            if v < best.0 {
                best = (v, model.net.clone());
                stagnant = 0;
            } else {
                stagnant += 1;
                if stagnant >= cfg.patience {
                    break;
                }
            }
        }
        model.net = best.1;
        Ok(model)
    }

    fn normalise(&self, y: &[f64]) -> Vec<f64> {
        y.iter()
            .zip(&self.target_mean)
            .map(|(v, m)| (v - m) / self.target_scale)
            .collect()
    }

    pub(crate) fn predict(&self, row: &[f64]) -> Vec<f64> {
        self.net
            .forward(&self.scaler.apply(row))
            .iter()
            .zip(&self.target_mean)
            .map(|(v, m)| v * self.target_scale + m)
            .collect()
    }
}
