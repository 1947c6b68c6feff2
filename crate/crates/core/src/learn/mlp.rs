//! Fixed-topology feed-forward network over a flat parameter slice, with
//! hand-written reverse mode.

use serde::{Deserialize, Serialize};

/// Layer sizes including input and output. Hidden layers use tanh, the
/// output layer is linear. Parameters are laid out per layer as a
/// row-major `out × in` weight block followed by `out` biases.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mlp {
    pub sizes: Vec<usize>,
}

/// Per-layer activations kept for the backward pass.
#[derive(Debug, Clone, Default)]
pub struct MlpCache {
    acts: Vec<Vec<f64>>,
}

impl MlpCache {
    pub fn output(&self) -> &[f64] {
        self.acts.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

impl Mlp {
    pub fn new(input: usize, hidden: &[usize], output: usize) -> Self {
        let mut sizes = vec![input];
        sizes.extend_from_slice(hidden);
        sizes.push(output);
        Self { sizes }
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("non-empty")
    }

    pub fn param_count(&self) -> usize {
        self.sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    fn layers(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        let mut offset = 0;
        self.sizes.windows(2).map(move |w| {
            let o = offset;
            offset += w[0] * w[1] + w[1];
            (o, w[0], w[1])
        })
    }

    pub fn forward(&self, p: &[f64], x: &[f64], cache: &mut MlpCache) {
        debug_assert_eq!(p.len(), self.param_count());
        let n_layers = self.sizes.len() - 1;
        cache.acts.resize(n_layers + 1, Vec::new());
        cache.acts[0].clear();
        cache.acts[0].extend_from_slice(x);
        for (l, (off, n_in, n_out)) in self.layers().enumerate() {
            let (w, b) = p[off..off + n_in * n_out + n_out].split_at(n_in * n_out);
            let (prev, rest) = cache.acts.split_at_mut(l + 1);
            let input = &prev[l];
            let out = &mut rest[0];
            out.clear();
            for o in 0..n_out {
                let row = &w[o * n_in..(o + 1) * n_in];
                let z = b[o] + row.iter().zip(input).map(|(a, b)| a * b).sum::<f64>();
                out.push(if l + 1 < n_layers { z.tanh() } else { z });
            }
        }
    }

    /// Accumulates `d loss / d params` into `grad` given `d loss / d output`.
    pub fn backward(&self, p: &[f64], cache: &MlpCache, d_out: &[f64], grad: &mut [f64]) {
        let n_layers = self.sizes.len() - 1;
        let layers: Vec<_> = self.layers().collect();
        let mut delta = d_out.to_vec();
        for l in (0..n_layers).rev() {
            let (off, n_in, n_out) = layers[l];
            let input = &cache.acts[l];
            if l + 1 < n_layers {
                let act = &cache.acts[l + 1];
                for (d, a) in delta.iter_mut().zip(act) {
                    *d *= 1.0 - a * a;
                }
            }
            let (gw, gb) = grad[off..off + n_in * n_out + n_out].split_at_mut(n_in * n_out);
            for o in 0..n_out {
                let d = delta[o];
                gb[o] += d;
                if d != 0.0 {
                    for (g, x) in gw[o * n_in..(o + 1) * n_in].iter_mut().zip(input) {
                        *g += d * x;
                    }
                }
            }
            if l > 0 {
                let w = &p[off..off + n_in * n_out];
                let mut next = vec![0.0; n_in];
                for o in 0..n_out {
                    let d = delta[o];
                    if d != 0.0 {
                        for (n, wv) in next.iter_mut().zip(&w[o * n_in..(o + 1) * n_in]) {
                            *n += d * wv;
                        }
                    }
                }
                delta = next;
            }
        }
    }

    /// Uniform fan-in initialisation; the output layer is scaled by
    /// `out_gain`. Biases start at zero.
    pub fn init(&self, p: &mut [f64], out_gain: f64, rng: &mut impl rand::Rng) {
        let n_layers = self.sizes.len() - 1;
        for (l, (off, n_in, n_out)) in self.layers().enumerate() {
            let gain = if l + 1 == n_layers { out_gain } else { 1.0 };
            let bound = gain * (3.0 / n_in as f64).sqrt();
            for v in &mut p[off..off + n_in * n_out] {
                *v = rng.gen_range(-bound..=bound);
            }
            for v in &mut p[off + n_in * n_out..off + n_in * n_out + n_out] {
                *v = 0.0;
            }
        }
    }
}
