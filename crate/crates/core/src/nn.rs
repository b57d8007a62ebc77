//! Parameter storage, layer initialization, and adaptive-moment optimizers.

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::tensor::{Tape, Var};

/// Ordered, named collection of parameter matrices. Order is fixed at
/// construction and defines checkpoint layout and gradient indexing.
#[derive(Debug, Clone)]
pub struct ParamSet {
    names: Vec<String>,
    values: Vec<Array2<f64>>,
}

impl ParamSet {
    pub fn new() -> Self {
        ParamSet {
            names: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Registers a parameter and returns its index.
    pub fn register(&mut self, name: &str, value: Array2<f64>) -> usize {
        assert!(
            !self.names.iter().any(|n| n == name),
            "duplicate parameter name `{name}`"
        );
        self.names.push(name.to_string());
        self.values.push(value);
        self.values.len() - 1
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn name(&self, idx: usize) -> &str {
        &self.names[idx]
    }

    pub fn value(&self, idx: usize) -> &Array2<f64> {
        &self.values[idx]
    }

    pub fn value_mut(&mut self, idx: usize) -> &mut Array2<f64> {
        &mut self.values[idx]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn shapes(&self) -> Vec<(usize, usize)> {
        self.values.iter().map(|v| v.dim()).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Array2<f64>)> {
        self.names.iter().map(|s| s.as_str()).zip(self.values.iter())
    }

    /// Total scalar count, for flattened gradient checks.
    pub fn num_scalars(&self) -> usize {
        self.values.iter().map(|v| v.len()).sum()
    }

    /// Flatten all parameters into one vector (row-major, registration order).
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_scalars());
        for v in &self.values {
            out.extend(v.iter().cloned());
        }
        out
    }

    /// Overwrite all parameters from a flat vector produced by [`flatten`].
    pub fn unflatten(&mut self, flat: &[f64]) {
        let mut k = 0;
        for v in &mut self.values {
            for x in v.iter_mut() {
                *x = flat[k];
                k += 1;
            }
        }
        assert_eq!(k, flat.len());
    }
}

impl Default for ParamSet {
    fn default() -> Self {
        Self::new()
    }
}

/// Fully connected layer handle: parameter indices into a [`ParamSet`].
#[derive(Debug, Clone, Copy)]
pub struct Linear {
    pub w: usize,
    pub b: usize,
}

impl Linear {
    /// Xavier-uniform weights, zero bias.
    pub fn init(ps: &mut ParamSet, name: &str, fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let mut w = Array2::zeros((fan_in, fan_out));
        for x in w.iter_mut() {
            *x = rng.gen_range(-bound..bound);
        }
        let wi = ps.register(&format!("{name}.w"), w);
        let bi = ps.register(&format!("{name}.b"), Array2::zeros((1, fan_out)));
        Linear { w: wi, b: bi }
    }

    /// `x @ W + b` on the tape.
    pub fn forward(&self, tape: &mut Tape, ps: &ParamSet, x: Var) -> Var {
        let w = tape.param(self.w, ps.value(self.w));
        let b = tape.param(self.b, ps.value(self.b));
        let y = tape.matmul(x, w);
        tape.add_row(y, b)
    }

    /// Tape-free forward for hot inference paths.
    pub fn forward_data(&self, ps: &ParamSet, x: &Array2<f64>) -> Array2<f64> {
        x.dot(ps.value(self.w)) + ps.value(self.b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam,
    RAdam,
}

/// Adam / RAdam with per-parameter first and second moments.
#[derive(Debug, Clone)]
pub struct AdaptiveMoment {
    pub kind: OptimizerKind,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    pub m: Vec<Array2<f64>>,
    pub v: Vec<Array2<f64>>,
}

impl AdaptiveMoment {
    pub fn new(kind: OptimizerKind, params: &ParamSet) -> Self {
        AdaptiveMoment {
            kind,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: params.shapes().iter().map(|&(a, b)| Array2::zeros((a, b))).collect(),
            v: params.shapes().iter().map(|&(a, b)| Array2::zeros((a, b))).collect(),
        }
    }

    pub fn step(&mut self, params: &mut ParamSet, grads: &[Array2<f64>], lr: f64) {
        self.t += 1;
        let t = self.t as f64;
        let b1 = self.beta1;
        let b2 = self.beta2;
        let bias1 = 1.0 - b1.powf(t);
        let bias2 = 1.0 - b2.powf(t);

        // RAdam rectification term (Liu et al. 2020).
        let rho_inf = 2.0 / (1.0 - b2) - 1.0;
        let rho_t = rho_inf - 2.0 * t * b2.powf(t) / bias2;
        let rect = if rho_t > 4.0 {
            Some(
                ((rho_t - 4.0) * (rho_t - 2.0) * rho_inf / ((rho_inf - 4.0) * (rho_inf - 2.0) * rho_t))
                    .sqrt(),
            )
        } else {
            None
        };

        for i in 0..params.len() {
            let g = &grads[i];
            self.m[i].zip_mut_with(g, |m, &gv| *m = b1 * *m + (1.0 - b1) * gv);
            self.v[i].zip_mut_with(g, |v, &gv| *v = b2 * *v + (1.0 - b2) * gv * gv);
            let p = params.value_mut(i);
            match self.kind {
                OptimizerKind::Adam => {
                    for ((pv, &mv), &vv) in p.iter_mut().zip(self.m[i].iter()).zip(self.v[i].iter()) {
                        let mh = mv / bias1;
                        let vh = vv / bias2;
                        *pv -= lr * mh / (vh.sqrt() + self.eps);
                    }
                }
                OptimizerKind::RAdam => {
                    for ((pv, &mv), &vv) in p.iter_mut().zip(self.m[i].iter()).zip(self.v[i].iter()) {
                        let mh = mv / bias1;
                        match rect {
                            Some(r) => {
                                let vh = (vv / bias2).sqrt() + self.eps;
                                *pv -= lr * r * mh / vh;
                            }
                            None => *pv -= lr * mh,
                        }
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_for;

    #[test]
    fn adam_minimizes_a_quadratic() {
        let mut rng = rng_for(3, "nn-test");
        let mut ps = ParamSet::new();
        let lin = Linear::init(&mut ps, "l", 2, 1, &mut rng);
        let mut opt = AdaptiveMoment::new(OptimizerKind::Adam, &ps);
        // minimize ||x @ W + b - y||^2 for a fixed linear target
        let x = ndarray::array![[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
        let y = ndarray::array![[2.0], [-1.0], [1.0]];
        let mut last = f64::INFINITY;
        for _ in 0..400 {
            let mut tape = Tape::new();
            let xv = tape.constant(x.clone());
            let yv = tape.constant(y.clone());
            let pred = lin.forward(&mut tape, &ps, xv);
            let diff = tape.sub(pred, yv);
            let sq = tape.square(diff);
            let loss = tape.sum_all(sq);
            last = tape.scalar_value(loss);
            let grads = tape.param_grads(loss, &ps.shapes());
            opt.step(&mut ps, &grads, 0.05);
        }
        assert!(last < 1e-4, "loss stayed at {last}");
    }

    #[test]
    fn radam_step_is_finite_and_determinisic() {
        let mut rng = rng_for(5, "nn-test");
        let mut run = || {
            let mut rng2 = rng_for(5, "inner");
            let mut ps = ParamSet::new();
            let lin = Linear::init(&mut ps, "l", 3, 3, &mut rng2);
            let mut opt = AdaptiveMoment::new(OptimizerKind::RAdam, &ps);
            for step in 0..10 {
                let mut tape = Tape::new();
                let x = tape.constant(ndarray::Array2::from_elem((2, 3), 0.5 + step as f64 * 0.1));
                let h = lin.forward(&mut tape, &ps, x);
                let sq = tape.square(h);
                let loss = tape.sum_all(sq);
                let grads = tape.param_grads(loss, &ps.shapes());
                opt.step(&mut ps, &grads, 1e-2);
            }
            ps.flatten()
        };
        let a = run();
        let b = run();
        assert_eq!(a, b);
        assert!(a.iter().all(|v| v.is_finite()));
        let _ = rng.gen::<u64>();
    }
}
