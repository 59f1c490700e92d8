use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpConfig {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub learning_rate: f64,
    /// L2 penalty on weights (not biases).
    pub l2: f64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            hidden: vec![32, 16],
            epochs: 2000,
            learning_rate: 0.1,
            l2: 1e-3,
        }
    }
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    fn from_rows(x: &[Vec<f64>]) -> Self {
        let cols = x.first().map_or(0, |r| r.len());
        Self {
            rows: x.len(),
            cols,
            data: x.iter().flatten().copied().collect(),
        }
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Layer {
    /// `inputs × outputs`
    w: Mat,
    b: Vec<f64>,
}

impl Layer {
    /// `x · w + b` for every row of `x`.
    fn affine(&self, x: &Mat) -> Mat {
        let mut z = Mat::zeros(x.rows, self.w.cols);
        for i in 0..x.rows {
            let out = z.row_mut(i);
            out.copy_from_slice(&self.b);
            for (k, &xv) in x.row(i).iter().enumerate() {
                for (o, &wv) in out.iter_mut().zip(self.w.row(k)) {
                    *o += xv * wv;
                }
            }
        }
        z
    }
}

/// Feed-forward classifier: ReLU hidden layers and a two-way softmax
/// output whose second column is the probability of survival.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Layer>,
    pub seed: u64,
}

struct Forward {
    /// Layer inputs; `acts[0]` is the data matrix.
    acts: Vec<Mat>,
    /// Pre-activations of the hidden layers.
    pre: Vec<Mat>,
    probs: Mat,
}

fn softmax_rows(mut z: Mat) -> Mat {
    for i in 0..z.rows {
        let row = z.row_mut(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut s = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            s += *v;
        }
        for v in row.iter_mut() {
            *v /= s;
        }
    }
    z
}

impl Mlp {
    /// He-initialised network with the given hidden widths.
    pub fn new(inputs: usize, hidden: &[usize], seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut widths = vec![inputs];
        widths.extend_from_slice(hidden);
        widths.push(2);
        let layers = widths
            .windows(2)
            .map(|w| {
                let normal = Normal::new(0.0, (2.0 / w[0].max(1) as f64).sqrt()).expect("valid std");
                Layer {
                    w: Mat {
                        rows: w[0],
                        cols: w[1],
                        data: (0..w[0] * w[1]).map(|_| normal.sample(&mut rng)).collect(),
                    },
                    b: vec![0.0; w[1]],
                }
            })
            .collect();
        Self { layers, seed }
    }

    fn forward(&self, x: Mat) -> Forward {
        let mut acts = vec![x];
        let mut pre = Vec::new();
        let last = self.layers.len() - 1;
        for (k, l) in self.layers.iter().enumerate() {
            let z = l.affine(&acts[k]);
            if k == last {
                let probs = softmax_rows(z);
                return Forward { acts, pre, probs };
            }
            let mut a = z.clone();
            a.data.iter_mut().for_each(|v| *v = v.max(0.0));
            acts.push(a);
            pre.push(z);
        }
        unreachable!("network has an output layer")
    }

    /// Probability of survival per row.
    pub fn predict(&self, x: &[Vec<f64>]) -> Vec<f64> {
        let f = self.forward(Mat::from_rows(x));
        (0..f.probs.rows).map(|i| f.probs.at(i, 1)).collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.data.len() + l.b.len()).sum()
    }

    /// All weights and biases, layer by layer.
    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            p.extend(&l.w.data);
            p.extend(&l.b);
        }
        p
    }

    pub fn set_params(&mut self, p: &[f64]) {
        let mut k = 0;
        for l in &mut self.layers {
            for v in l.w.data.iter_mut().chain(l.b.iter_mut()) {
                *v = p[k];
                k += 1;
            }
        }
    }

    /// Mean cross-entropy plus `l2/2 · Σ w²`, and its gradient in
    /// [`Mlp::params`] order. `labels[i]` is true for survival.
    pub fn loss_and_grad(&self, x: &[Vec<f64>], labels: &[bool], l2: f64) -> (f64, Vec<f64>) {
        let n = x.len() as f64;
        let f = self.forward(Mat::from_rows(x));
        let mut loss = 0.0;
        let mut delta = f.probs.clone();
        for (i, &alive) in labels.iter().enumerate() {
            let c = usize::from(alive);
            loss -= f.probs.at(i, c).max(1e-300).ln();
            delta.data[i * 2 + c] -= 1.0;
        }
        loss /= n;
        delta.data.iter_mut().for_each(|v| *v /= n);
        loss += 0.5 * l2 * self.layers.iter().flat_map(|l| &l.w.data).map(|w| w * w).sum::<f64>();

        let mut grads: Vec<(Mat, Vec<f64>)> = Vec::with_capacity(self.layers.len());
        for k in (0..self.layers.len()).rev() {
            let l = &self.layers[k];
            let a = &f.acts[k];
            let mut gw = l.w.clone();
            gw.data.iter_mut().for_each(|v| *v *= l2);
            let mut gb = vec![0.0; l.w.cols];
            for i in 0..a.rows {
                let d = delta.row(i);
                for (o, dv) in gb.iter_mut().zip(d) {
                    *o += dv;
                }
                for (r, &av) in a.row(i).iter().enumerate() {
                    for (o, dv) in gw.row_mut(r).iter_mut().zip(d) {
                        *o += av * dv;
                    }
                }
            }
            if k > 0 {
                let z = &f.pre[k - 1];
                let mut back = Mat::zeros(delta.rows, l.w.rows);
                for i in 0..delta.rows {
                    let d = delta.row(i);
                    for r in 0..l.w.rows {
                        if z.at(i, r) > 0.0 {
                            back.data[i * l.w.rows + r] = l.w.row(r).iter().zip(d).map(|(w, dv)| w * dv).sum();
                        }
                    }
                }
                delta = back;
            }
            grads.push((gw, gb));
        }
        grads.reverse();
        let mut flat = Vec::with_capacity(self.param_count());
        for (gw, gb) in grads {
            flat.extend(gw.data);
            flat.extend(gb);
        }
        (loss, flat)
    }
}

/// Full-batch gradient descent from a seeded initialisation.
pub fn train_classifier(x: &[Vec<f64>], labels: &[bool], cfg: &MlpConfig, seed: u64) -> Result<Mlp> {
    if x.len() != labels.len() || x.is_empty() {
        return Err(Error::InvalidInput("feature rows and labels differ in length".into()));
    }
    if labels.iter().all(|&l| l) || labels.iter().all(|&l| !l) {
        return Err(Error::SingleClass);
    }
    let mut net = Mlp::new(x[0].len(), &cfg.hidden, seed);
    let mut p = net.params();
    for _ in 0..cfg.epochs {
        let (_, g) = net.loss_and_grad(x, labels, cfg.l2);
        for (pi, gi) in p.iter_mut().zip(&g) {
            *pi -= cfg.learning_rate * gi;
        }
        net.set_params(&p);
    }
    Ok(net)
}
