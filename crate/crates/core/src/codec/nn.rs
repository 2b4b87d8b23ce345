//! Fully connected layers with hand-written backpropagation.

use alloc::vec::Vec;

use rand_distr::{Distribution, StandardNormal};

use crate::rng::Stream;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Tanh,
    Sigmoid,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Tanh => libm::tanh(x),
            Activation::Sigmoid => 1.0 / (1.0 + libm::exp(-x)),
        }
    }

    /// Derivative expressed through the activation's output `y`.
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Tanh => 1.0 - y * y,
            Activation::Sigmoid => y * (1.0 - y),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major `outputs × inputs`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize, activation: Activation) -> Self {
        Dense {
            inputs,
            outputs,
            weights: alloc::vec![0.0; inputs * outputs],
            bias: alloc::vec![0.0; outputs],
            activation,
        }
    }

    fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.inputs)
            .zip(&self.bias)
            .map(|(row, b)| self.activation.apply(row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b))
            .collect()
    }

    fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Network {
    pub layers: Vec<Dense>,
}

/// Per-layer inputs plus the final output of one forward pass.
#[derive(Debug, Clone)]
pub struct Trace {
    values: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.values.last().map(|v| v.as_slice()).unwrap_or(&[])
    }
}

impl Network {
    /// `sizes = [in, h1, …, out]`; hidden layers use `hidden`, the last
    /// layer uses `output`.
    pub fn new(sizes: &[usize], hidden: Activation, output: Activation) -> Self {
        let n = sizes.len().saturating_sub(1);
        let layers = (0..n)
            .map(|i| Dense::zeros(sizes[i], sizes[i + 1], if i + 1 == n { output } else { hidden }))
            .collect();
        Network { layers }
    }

    /// Xavier-normal weights, zero biases; the last layer's weights are
    /// multiplied by `output_gain`.
    pub fn init_xavier(&mut self, rng: &mut Stream, output_gain: f64) {
        let last = self.layers.len().saturating_sub(1);
        for (i, layer) in self.layers.iter_mut().enumerate() {
            let gain = if i == last { output_gain } else { 1.0 };
            let std = gain * libm::sqrt(2.0 / (layer.inputs + layer.outputs) as f64);
            for w in &mut layer.weights {
                let g: f64 = StandardNormal.sample(rng);
                *w = g * std;
            }
            layer.bias.iter_mut().for_each(|b| *b = 0.0);
        }
    }

    pub fn input_len(&self) -> usize {
        self.layers.first().map_or(0, |l| l.inputs)
    }

    pub fn output_len(&self) -> usize {
        self.layers.last().map_or(0, |l| l.outputs)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Dense::param_count).sum()
    }

    /// Flattened parameters, layer by layer, weights before biases.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn set_params(&mut self, params: &[f64]) -> crate::Result<()> {
        crate::error::check_len("network parameters", self.param_count(), params.len())?;
        let mut at = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&params[at..at + nw]);
            at += nw;
            let nb = l.bias.len();
            l.bias.copy_from_slice(&params[at..at + nb]);
            at += nb;
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut cur = x.to_vec();
        for l in &self.layers {
            cur = l.forward(&cur);
        }
        cur
    }

    pub fn forward_trace(&self, x: &[f64]) -> Trace {
        let mut values = Vec::with_capacity(self.layers.len() + 1);
        values.push(x.to_vec());
        for l in &self.layers {
            let next = l.forward(values.last().unwrap());
            values.push(next);
        }
        Trace { values }
    }

    /// Accumulates `∂loss/∂params` into `grad_params` and returns
    /// `∂loss/∂input`.
    pub fn backward(&self, trace: &Trace, grad_output: &[f64], grad_params: &mut [f64]) -> Vec<f64> {
        let mut offsets = Vec::with_capacity(self.layers.len());
        let mut at = 0;
        for l in &self.layers {
            offsets.push(at);
            at += l.param_count();
        }
        let mut grad = grad_output.to_vec();
        for (li, l) in self.layers.iter().enumerate().rev() {
            let input = &trace.values[li];
            let output = &trace.values[li + 1];
            let delta: Vec<f64> = grad
                .iter()
                .zip(output)
                .map(|(g, &y)| g * l.activation.derivative_from_output(y))
                .collect();
            let base = offsets[li];
            let (gw, gb) = grad_params[base..base + l.param_count()].split_at_mut(l.weights.len());
            let mut grad_in = alloc::vec![0.0; l.inputs];
            for (o, &dlt) in delta.iter().enumerate() {
                if dlt == 0.0 {
                    continue;
                }
                gb[o] += dlt;
                let row = &l.weights[o * l.inputs..(o + 1) * l.inputs];
                let grow = &mut gw[o * l.inputs..(o + 1) * l.inputs];
                for i in 0..l.inputs {
                    grow[i] += dlt * input[i];
                    grad_in[i] += dlt * row[i];
                }
            }
            grad = grad_in;
        }
        grad
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{self, Domain};

    #[test]
    fn backward_matches_finite_differences() {
        let mut net = Network::new(&[3, 4, 2], Activation::Tanh, Activation::Sigmoid);
        net.init_xavier(&mut rng::stream(1, Domain::Init, 0), 1.5);
        let x = [0.3, -0.7, 0.1];
        let target = [0.2, 0.9];
        let loss = |n: &Network, x: &[f64]| -> f64 {
            n.forward(x).iter().zip(&target).map(|(a, b)| (a - b) * (a - b)).sum()
        };
        let trace = net.forward_trace(&x);
        let g_out: Vec<f64> = trace.output().iter().zip(&target).map(|(a, b)| 2.0 * (a - b)).collect();
        let mut g_params = alloc::vec![0.0; net.param_count()];
        let g_in = net.backward(&trace, &g_out, &mut g_params);

        let h = 1e-6;
        let p0 = net.params();
        for i in 0..p0.len() {
            let mut plus = net.clone();
            let mut pp = p0.clone();
            pp[i] += h;
            plus.set_params(&pp).unwrap();
            let mut minus = net.clone();
            pp[i] -= 2.0 * h;
            minus.set_params(&pp).unwrap();
            let fd = (loss(&plus, &x) - loss(&minus, &x)) / (2.0 * h);
            assert!((fd - g_params[i]).abs() < 1e-7, "param {i}: {fd} vs {}", g_params[i]);
        }
        for i in 0..3 {
            let mut xp = x;
            xp[i] += h;
            let mut xm = x;
            xm[i] -= h;
            let fd = (loss(&net, &xp) - loss(&net, &xm)) / (2.0 * h);
            assert!((fd - g_in[i]).abs() < 1e-7);
        }
    }

    #[test]
    fn params_round_trip() {
        let mut net = Network::new(&[2, 3, 1], Activation::Tanh, Activation::Identity);
        net.init_xavier(&mut rng::stream(2, Domain::Init, 0), 1.0);
        let p = net.params();
        let mut other = Network::new(&[2, 3, 1], Activation::Tanh, Activation::Identity);
        other.set_params(&p).unwrap();
        assert_eq!(other, net);
        assert!(other.set_params(&p[1..]).is_err());
    }
}
