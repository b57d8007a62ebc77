//! Reverse-mode automatic differentiation on `f64` matrices.
//!
//! A [`Tape`] records every operation of one forward pass; [`Tape::backward`]
//! walks the record in reverse and accumulates gradients. Values are plain
//! `ndarray::Array2<f64>` — scalars are `1x1`, row vectors `1xn`, column
//! vectors `mx1`. All kernels are single-threaded and evaluate in a fixed
//! order, so identical inputs give bit-identical outputs and gradients.
//!
//! Model parameters live outside the tape (see [`crate::nn::ParamSet`]); each
//! training step creates fresh parameter leaves with [`Tape::param`] and reads
//! the accumulated gradients back with [`Tape::param_grads`].

use ndarray::{s, Array2, Axis};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    MatMul(usize, usize),
    /// (m,n) + (1,n) broadcast over rows.
    AddRow(usize, usize),
    /// (m,n) - (m,1) broadcast over columns.
    SubCol(usize, usize),
    /// (m,n) * (m,1) broadcast over columns.
    MulCol(usize, usize),
    /// (m,n) * (1,n) broadcast over rows.
    MulRow(usize, usize),
    Scale(usize, f64),
    AddScalar(usize, f64),
    Relu(usize),
    Tanh(usize),
    Exp(usize),
    Ln(usize),
    Sqrt(usize),
    Square(usize),
    Softplus(usize),
    Powf(usize, f64),
    SumAll(usize),
    /// Sum over rows -> (1,n).
    SumRows(usize),
    /// Sum over columns -> (m,1).
    SumCols(usize),
    SelectRows(usize, Vec<usize>),
    SelectEntries(usize, Vec<(usize, usize)>),
    ConcatCols(usize, usize),
    SliceCols(usize, usize, usize),
    Reshape(usize, usize, usize),
    /// Row-wise log-sum-exp -> (m,1), computed with max subtraction.
    LogSumExpRows(usize),
    /// Center each row to zero mean, then scale to unit L2 norm.
    StandardizeRows(usize),
    MinPair(usize, usize),
    Clamp(usize, f64, f64),
    /// Repeat a (1,n) row m times -> (m,n).
    BroadcastRows(usize, usize),
}

struct Node {
    value: Array2<f64>,
    op: Op,
}

/// Growable record of one forward computation.
pub struct Tape {
    nodes: Vec<Node>,
    /// (node index, parameter index) pairs for gradient readout.
    param_links: Vec<(usize, usize)>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            param_links: Vec::new(),
        }
    }

    fn push(&mut self, value: Array2<f64>, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    /// Constant input; receives no gradient readout.
    pub fn constant(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn scalar(&mut self, v: f64) -> Var {
        self.constant(Array2::from_elem((1, 1), v))
    }

    /// Parameter leaf; its gradient is reported under `param_index` by
    /// [`Tape::param_grads`].
    pub fn param(&mut self, param_index: usize, value: &Array2<f64>) -> Var {
        let v = self.push(value.clone(), Op::Leaf);
        self.param_links.push((v.0, param_index));
        v
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        let d = self.nodes[v.0].value.dim();
        (d.0, d.1)
    }

    pub fn scalar_value(&self, v: Var) -> f64 {
        debug_assert_eq!(self.shape(v), (1, 1));
        self.nodes[v.0].value[(0, 0)]
    }

    // ---- arithmetic -----------------------------------------------------

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        debug_assert_eq!(self.shape(a), self.shape(b));
        let v = &self.nodes[a.0].value + &self.nodes[b.0].value;
        self.push(v, Op::Add(a.0, b.0))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        debug_assert_eq!(self.shape(a), self.shape(b));
        let v = &self.nodes[a.0].value - &self.nodes[b.0].value;
        self.push(v, Op::Sub(a.0, b.0))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        debug_assert_eq!(self.shape(a), self.shape(b));
        let v = &self.nodes[a.0].value * &self.nodes[b.0].value;
        self.push(v, Op::Mul(a.0, b.0))
    }

    pub fn div(&mut self, a: Var, b: Var) -> Var {
        debug_assert_eq!(self.shape(a), self.shape(b));
        let v = &self.nodes[a.0].value / &self.nodes[b.0].value;
        self.push(v, Op::Div(a.0, b.0))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.nodes[a.0].value.dot(&self.nodes[b.0].value);
        self.push(v, Op::MatMul(a.0, b.0))
    }

    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        debug_assert_eq!(self.shape(row).0, 1);
        debug_assert_eq!(self.shape(a).1, self.shape(row).1);
        let v = &self.nodes[a.0].value + &self.nodes[row.0].value;
        self.push(v, Op::AddRow(a.0, row.0))
    }

    pub fn sub_col(&mut self, a: Var, col: Var) -> Var {
        debug_assert_eq!(self.shape(col).1, 1);
        debug_assert_eq!(self.shape(a).0, self.shape(col).0);
        let v = &self.nodes[a.0].value - &self.nodes[col.0].value;
        self.push(v, Op::SubCol(a.0, col.0))
    }

    pub fn mul_col(&mut self, a: Var, col: Var) -> Var {
        debug_assert_eq!(self.shape(col).1, 1);
        debug_assert_eq!(self.shape(a).0, self.shape(col).0);
        let v = &self.nodes[a.0].value * &self.nodes[col.0].value;
        self.push(v, Op::MulCol(a.0, col.0))
    }

    pub fn mul_row(&mut self, a: Var, row: Var) -> Var {
        debug_assert_eq!(self.shape(row).0, 1);
        debug_assert_eq!(self.shape(a).1, self.shape(row).1);
        let v = &self.nodes[a.0].value * &self.nodes[row.0].value;
        self.push(v, Op::MulRow(a.0, row.0))
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        let v = &self.nodes[a.0].value * k;
        self.push(v, Op::Scale(a.0, k))
    }

    pub fn add_scalar(&mut self, a: Var, k: f64) -> Var {
        let v = &self.nodes[a.0].value + k;
        self.push(v, Op::AddScalar(a.0, k))
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.scale(a, -1.0)
    }

    // ---- elementwise nonlinearities -------------------------------------

    pub fn relu(&mut self, a: Var) -> Var {
        let v = self.nodes[a.0].value.mapv(|x| if x > 0.0 { x } else { 0.0 });
        self.push(v, Op::Relu(a.0))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.nodes[a.0].value.mapv(f64::tanh);
        self.push(v, Op::Tanh(a.0))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let v = self.nodes[a.0].value.mapv(f64::exp);
        self.push(v, Op::Exp(a.0))
    }

    pub fn ln(&mut self, a: Var) -> Var {
        let v = self.nodes[a.0].value.mapv(f64::ln);
        self.push(v, Op::Ln(a.0))
    }

    pub fn sqrt(&mut self, a: Var) -> Var {
        let v = self.nodes[a.0].value.mapv(f64::sqrt);
        self.push(v, Op::Sqrt(a.0))
    }

    pub fn square(&mut self, a: Var) -> Var {
        let v = self.nodes[a.0].value.mapv(|x| x * x);
        self.push(v, Op::Square(a.0))
    }

    /// `ln(1 + e^x)`, evaluated as `max(x,0) + ln(1+e^{-|x|})` for stability.
    pub fn softplus(&mut self, a: Var) -> Var {
        let v = self
            .nodes[a.0]
            .value
            .mapv(|x| x.max(0.0) + (-x.abs()).exp().ln_1p());
        self.push(v, Op::Softplus(a.0))
    }

    pub fn powf(&mut self, a: Var, p: f64) -> Var {
        let v = self.nodes[a.0].value.mapv(|x| x.powf(p));
        self.push(v, Op::Powf(a.0, p))
    }

    // ---- reductions ------------------------------------------------------

    pub fn sum_all(&mut self, a: Var) -> Var {
        let v = Array2::from_elem((1, 1), self.nodes[a.0].value.sum());
        self.push(v, Op::SumAll(a.0))
    }

    pub fn mean_all(&mut self, a: Var) -> Var {
        let (m, n) = self.shape(a);
        let s = self.sum_all(a);
        self.scale(s, 1.0 / (m * n) as f64)
    }

    pub fn sum_rows(&mut self, a: Var) -> Var {
        let v = self
            .nodes[a.0]
            .value
            .sum_axis(Axis(0))
            .insert_axis(Axis(0))
            .into_dimensionality()
            .unwrap();
        self.push(v, Op::SumRows(a.0))
    }

    pub fn sum_cols(&mut self, a: Var) -> Var {
        let v = self
            .nodes[a.0]
            .value
            .sum_axis(Axis(1))
            .insert_axis(Axis(1))
            .into_dimensionality()
            .unwrap();
        self.push(v, Op::SumCols(a.0))
    }

    /// Mean over rows -> (1,n).
    pub fn mean_rows(&mut self, a: Var) -> Var {
        let m = self.shape(a).0;
        let s = self.sum_rows(a);
        self.scale(s, 1.0 / m as f64)
    }

    // ---- structural ------------------------------------------------------

    pub fn select_rows(&mut self, a: Var, rows: &[usize]) -> Var {
        let src = &self.nodes[a.0].value;
        let n = src.dim().1;
        let mut v = Array2::zeros((rows.len(), n));
        for (i, &r) in rows.iter().enumerate() {
            v.row_mut(i).assign(&src.row(r));
        }
        self.push(v, Op::SelectRows(a.0, rows.to_vec()))
    }

    pub fn select_entries(&mut self, a: Var, entries: &[(usize, usize)]) -> Var {
        let src = &self.nodes[a.0].value;
        let mut v = Array2::zeros((entries.len(), 1));
        for (i, &(r, c)) in entries.iter().enumerate() {
            v[(i, 0)] = src[(r, c)];
        }
        self.push(v, Op::SelectEntries(a.0, entries.to_vec()))
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Var {
        let (m, na) = self.shape(a);
        let (mb, nb) = self.shape(b);
        debug_assert_eq!(m, mb);
        let mut v = Array2::zeros((m, na + nb));
        v.slice_mut(s![.., ..na]).assign(&self.nodes[a.0].value);
        v.slice_mut(s![.., na..]).assign(&self.nodes[b.0].value);
        self.push(v, Op::ConcatCols(a.0, b.0))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Var {
        let v = self.nodes[a.0].value.slice(s![.., start..end]).to_owned();
        self.push(v, Op::SliceCols(a.0, start, end))
    }

    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> Var {
        let v = self
            .nodes[a.0]
            .value
            .clone()
            .into_shape_with_order((rows, cols))
            .expect("reshape: element count mismatch");
        self.push(v, Op::Reshape(a.0, rows, cols))
    }

    pub fn broadcast_rows(&mut self, a: Var, m: usize) -> Var {
        debug_assert_eq!(self.shape(a).0, 1);
        let n = self.shape(a).1;
        let mut v = Array2::zeros((m, n));
        for mut row in v.rows_mut() {
            row.assign(&self.nodes[a.0].value.row(0));
        }
        self.push(v, Op::BroadcastRows(a.0, m))
    }

    // ---- fused numerics --------------------------------------------------

    pub fn logsumexp_rows(&mut self, a: Var) -> Var {
        let src = &self.nodes[a.0].value;
        let m = src.dim().0;
        let mut v = Array2::zeros((m, 1));
        for (i, row) in src.rows().into_iter().enumerate() {
            let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let s: f64 = row.iter().map(|&x| (x - mx).exp()).sum();
            v[(i, 0)] = mx + s.ln();
        }
        self.push(v, Op::LogSumExpRows(a.0))
    }

    /// Rows centered to zero mean and scaled to unit L2 norm. The caller must
    /// guarantee nonzero per-row variance; see [`standardized_rows`].
    pub fn standardize_rows(&mut self, a: Var) -> Var {
        let v = standardized_rows(&self.nodes[a.0].value);
        self.push(v, Op::StandardizeRows(a.0))
    }

    pub fn min_pair(&mut self, a: Var, b: Var) -> Var {
        debug_assert_eq!(self.shape(a), self.shape(b));
        let va = &self.nodes[a.0].value;
        let vb = &self.nodes[b.0].value;
        let mut v = va.clone();
        v.zip_mut_with(vb, |x, &y| *x = x.min(y));
        self.push(v, Op::MinPair(a.0, b.0))
    }

    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Var {
        let v = self.nodes[a.0].value.mapv(|x| x.clamp(lo, hi));
        self.push(v, Op::Clamp(a.0, lo, hi))
    }

    // ---- backward --------------------------------------------------------

    /// Back-propagate from scalar node `root`. Returns per-node gradients.
    fn backward_internal(&self, root: Var) -> Vec<Option<Array2<f64>>> {
        assert_eq!(
            self.shape(root),
            (1, 1),
            "backward root must be a scalar node"
        );
        let mut grads: Vec<Option<Array2<f64>>> = vec![None; self.nodes.len()];
        grads[root.0] = Some(Array2::from_elem((1, 1), 1.0));

        for i in (0..=root.0).rev() {
            let g = match grads[i].take() {
                Some(g) => g,
                None => continue,
            };
            self.accumulate_parents(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        grads
    }

    fn accumulate_parents(&self, i: usize, g: &Array2<f64>, grads: &mut [Option<Array2<f64>>]) {
        let add_to = |grads: &mut [Option<Array2<f64>>], idx: usize, delta: Array2<f64>| {
            match &mut grads[idx] {
                Some(acc) => *acc += &delta,
                slot @ None => *slot = Some(delta),
            }
        };
        match &self.nodes[i].op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                add_to(grads, *a, g.clone());
                add_to(grads, *b, g.clone());
            }
            Op::Sub(a, b) => {
                add_to(grads, *a, g.clone());
                add_to(grads, *b, -g);
            }
            Op::Mul(a, b) => {
                add_to(grads, *a, g * &self.nodes[*b].value);
                add_to(grads, *b, g * &self.nodes[*a].value);
            }
            Op::Div(a, b) => {
                let vb = &self.nodes[*b].value;
                add_to(grads, *a, g / vb);
                let va = &self.nodes[*a].value;
                add_to(grads, *b, -(g * va) / (vb * vb));
            }
            Op::MatMul(a, b) => {
                add_to(grads, *a, g.dot(&self.nodes[*b].value.t()));
                add_to(grads, *b, self.nodes[*a].value.t().dot(g));
            }
            Op::AddRow(a, r) => {
                add_to(grads, *a, g.clone());
                let gr = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                add_to(grads, *r, gr);
            }
            Op::SubCol(a, c) => {
                add_to(grads, *a, g.clone());
                let gc = -g.sum_axis(Axis(1)).insert_axis(Axis(1));
                add_to(grads, *c, gc);
            }
            Op::MulCol(a, c) => {
                let vc = &self.nodes[*c].value;
                add_to(grads, *a, g * vc);
                let ga = g * &self.nodes[*a].value;
                add_to(grads, *c, ga.sum_axis(Axis(1)).insert_axis(Axis(1)));
            }
            Op::MulRow(a, r) => {
                let vr = &self.nodes[*r].value;
                add_to(grads, *a, g * vr);
                let ga = g * &self.nodes[*a].value;
                add_to(grads, *r, ga.sum_axis(Axis(0)).insert_axis(Axis(0)));
            }
            Op::Scale(a, k) => add_to(grads, *a, g * *k),
            Op::AddScalar(a, _) => add_to(grads, *a, g.clone()),
            Op::Relu(a) => {
                let mask = self.nodes[*a].value.mapv(|x| if x > 0.0 { 1.0 } else { 0.0 });
                add_to(grads, *a, g * &mask);
            }
            Op::Tanh(a) => {
                let y = &self.nodes[i].value;
                add_to(grads, *a, g * &y.mapv(|t| 1.0 - t * t));
            }
            Op::Exp(a) => add_to(grads, *a, g * &self.nodes[i].value),
            Op::Ln(a) => add_to(grads, *a, g / &self.nodes[*a].value),
            Op::Sqrt(a) => {
                let y = &self.nodes[i].value;
                add_to(grads, *a, g / &(y * 2.0));
            }
            Op::Square(a) => add_to(grads, *a, g * &(&self.nodes[*a].value * 2.0)),
            Op::Softplus(a) => {
                let sig = self.nodes[*a].value.mapv(|x| 1.0 / (1.0 + (-x).exp()));
                add_to(grads, *a, g * &sig);
            }
            Op::Powf(a, p) => {
                let d = self.nodes[*a].value.mapv(|x| p * x.powf(p - 1.0));
                add_to(grads, *a, g * &d);
            }
            Op::SumAll(a) => {
                let (m, n) = self.nodes[*a].value.dim();
                add_to(grads, *a, Array2::from_elem((m, n), g[(0, 0)]));
            }
            Op::SumRows(a) => {
                let (m, n) = self.nodes[*a].value.dim();
                let mut ga = Array2::zeros((m, n));
                for mut row in ga.rows_mut() {
                    row.assign(&g.row(0));
                }
                add_to(grads, *a, ga);
            }
            Op::SumCols(a) => {
                let (m, n) = self.nodes[*a].value.dim();
                let mut ga = Array2::zeros((m, n));
                for (r, mut row) in ga.rows_mut().into_iter().enumerate() {
                    row.fill(g[(r, 0)]);
                }
                add_to(grads, *a, ga);
            }
            Op::SelectRows(a, rows) => {
                let (m, n) = self.nodes[*a].value.dim();
                let mut ga = Array2::zeros((m, n));
                for (i, &r) in rows.iter().enumerate() {
                    let mut dst = ga.row_mut(r);
                    dst += &g.row(i);
                }
                add_to(grads, *a, ga);
            }
            Op::SelectEntries(a, entries) => {
                let (m, n) = self.nodes[*a].value.dim();
                let mut ga = Array2::zeros((m, n));
                for (i, &(r, c)) in entries.iter().enumerate() {
                    ga[(r, c)] += g[(i, 0)];
                }
                add_to(grads, *a, ga);
            }
            Op::ConcatCols(a, b) => {
                let na = self.nodes[*a].value.dim().1;
                add_to(grads, *a, g.slice(s![.., ..na]).to_owned());
                add_to(grads, *b, g.slice(s![.., na..]).to_owned());
            }
            Op::SliceCols(a, start, end) => {
                let (m, n) = self.nodes[*a].value.dim();
                let mut ga = Array2::zeros((m, n));
                ga.slice_mut(s![.., *start..*end]).assign(g);
                add_to(grads, *a, ga);
            }
            Op::Reshape(a, _, _) => {
                let (m, n) = self.nodes[*a].value.dim();
                let ga = g.clone().into_shape_with_order((m, n)).unwrap();
                add_to(grads, *a, ga);
            }
            Op::LogSumExpRows(a) => {
                let x = &self.nodes[*a].value;
                let y = &self.nodes[i].value;
                let mut ga = Array2::zeros(x.dim());
                for (r, row) in x.rows().into_iter().enumerate() {
                    let gr = g[(r, 0)];
                    for (c, &xv) in row.iter().enumerate() {
                        ga[(r, c)] = gr * (xv - y[(r, 0)]).exp();
                    }
                }
                add_to(grads, *a, ga);
            }
            Op::StandardizeRows(a) => {
                let x = &self.nodes[*a].value;
                let z = &self.nodes[i].value;
                let n = x.dim().1 as f64;
                let mut ga = Array2::zeros(x.dim());
                for (r, xrow) in x.rows().into_iter().enumerate() {
                    let mean = xrow.sum() / n;
                    let norm: f64 = xrow.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>().sqrt();
                    let zr = z.row(r);
                    let gr = g.row(r);
                    let dot: f64 = gr.iter().zip(zr.iter()).map(|(&gv, &zv)| gv * zv).sum();
                    // d/dx of (x - mean)/norm: project out the z direction, then recenter.
                    let mut tmp: Vec<f64> = gr
                        .iter()
                        .zip(zr.iter())
                        .map(|(&gv, &zv)| (gv - dot * zv) / norm)
                        .collect();
                    let tmean: f64 = tmp.iter().sum::<f64>() / n;
                    for t in &mut tmp {
                        *t -= tmean;
                    }
                    for (c, t) in tmp.into_iter().enumerate() {
                        ga[(r, c)] = t;
                    }
                }
                add_to(grads, *a, ga);
            }
            Op::MinPair(a, b) => {
                let va = &self.nodes[*a].value;
                let vb = &self.nodes[*b].value;
                let mask_a = ndarray::Zip::from(va).and(vb).map_collect(|&x, &y| if x <= y { 1.0 } else { 0.0 });
                add_to(grads, *a, g * &mask_a);
                add_to(grads, *b, g * &mask_a.mapv(|m| 1.0 - m));
            }
            Op::Clamp(a, lo, hi) => {
                let mask = self.nodes[*a].value.mapv(|x| if x > *lo && x < *hi { 1.0 } else { 0.0 });
                add_to(grads, *a, g * &mask);
            }
            Op::BroadcastRows(a, _) => {
                let ga = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                add_to(grads, *a, ga);
            }
        }
    }

    /// Back-propagate from scalar `root` and return gradients for the
    /// parameter leaves, indexed by the `param_index` passed to [`Tape::param`].
    /// Parameters never touched by the forward pass get zero gradients of the
    /// shapes given in `shapes`.
    pub fn param_grads(&self, root: Var, shapes: &[(usize, usize)]) -> Vec<Array2<f64>> {
        let grads = self.backward_internal(root);
        let mut out: Vec<Array2<f64>> = shapes.iter().map(|&(m, n)| Array2::zeros((m, n))).collect();
        for &(node, pidx) in &self.param_links {
            if let Some(g) = &grads[node] {
                out[pidx] += g;
            }
        }
        out
    }

    /// Gradient of `root` with respect to an arbitrary node (testing hook).
    pub fn grad_of(&self, root: Var, v: Var) -> Option<Array2<f64>> {
        self.backward_internal(root)[v.0].clone()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Center each row to zero mean and scale to unit L2 norm. Shared by the
/// differentiable path and the plain-data graph builder so both produce
/// bit-identical similarity values. Rows with zero variance yield NaN; callers
/// validate first.
pub fn standardized_rows(x: &Array2<f64>) -> Array2<f64> {
    let (m, n) = x.dim();
    let mut out = Array2::zeros((m, n));
    for (r, row) in x.rows().into_iter().enumerate() {
        let mean = row.sum() / n as f64;
        let mut norm2 = 0.0;
        for &v in row.iter() {
            let c = v - mean;
            norm2 += c * c;
        }
        let norm = norm2.sqrt();
        for (c, &v) in row.iter().enumerate() {
            out[(r, c)] = (v - mean) / norm;
        }
    }
    out
}

/// Pearson correlation of two equal-length vectors via the shared
/// standardization kernel.
pub fn pearson(u: &[f64], v: &[f64]) -> f64 {
    debug_assert_eq!(u.len(), v.len());
    let n = u.len();
    let mut x = Array2::zeros((2, n));
    for i in 0..n {
        x[(0, i)] = u[i];
        x[(1, i)] = v[i];
    }
    let z = standardized_rows(&x);
    let mut dot = 0.0;
    for i in 0..n {
        dot += z[(0, i)] * z[(1, i)];
    }
    dot
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    /// Central finite difference of `f` at `x`, perturbing every entry.
    fn fd_grad(x: &Array2<f64>, f: impl Fn(&Array2<f64>) -> f64, h: f64) -> Array2<f64> {
        let mut g = Array2::zeros(x.dim());
        let mut xp = x.clone();
        for idx in 0..x.len() {
            let (m, _n) = x.dim();
            let (r, c) = (idx % m, idx / m);
            // iterate in logical order instead
            let _ = (r, c);
            let (rr, cc) = (idx / x.dim().1, idx % x.dim().1);
            let orig = xp[(rr, cc)];
            xp[(rr, cc)] = orig + h;
            let fp = f(&xp);
            xp[(rr, cc)] = orig - h;
            let fm = f(&xp);
            xp[(rr, cc)] = orig;
            g[(rr, cc)] = (fp - fm) / (2.0 * h);
        }
        g
    }

    fn max_rel_err(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
        let mut worst = 0.0f64;
        for (x, y) in a.iter().zip(b.iter()) {
            let denom = x.abs().max(y.abs()).max(1e-6);
            worst = worst.max((x - y).abs() / denom);
        }
        worst
    }

    /// Exercises every op against finite differences through a composite
    /// scalar function of a single input matrix.
    #[test]
    fn all_ops_match_finite_differences() {
        let x0 = array![[0.3, -0.7, 1.2], [0.9, 0.4, -0.5], [-1.1, 0.8, 0.2]];
        let w = array![[0.5, -0.2], [0.1, 0.7], [-0.4, 0.3]];

        type Builder = Box<dyn Fn(&mut Tape, Var) -> Var>;
        let cases: Vec<(&str, Builder)> = vec![
            ("matmul+tanh", {
                let w = w.clone();
                Box::new(move |t: &mut Tape, x: Var| {
                    let wv = t.constant(w.clone());
                    let y = t.matmul(x, wv);
                    let y = t.tanh(y);
                    t.sum_all(y)
                })
            }),
            ("mul/div/add/sub", Box::new(|t, x| {
                let a = t.add_scalar(x, 2.5);
                let b = t.mul(x, a);
                let c = t.div(b, a);
                let d = t.sub(c, x);
                let e = t.add(d, b);
                t.sum_all(e)
            })),
            ("exp/ln/sqrt/square", Box::new(|t, x| {
                let p = t.square(x);
                let p = t.add_scalar(p, 0.5);
                let l = t.ln(p);
                let s = t.sqrt(p);
                let e = t.exp(l);
                let a = t.add(l, s);
                let a = t.add(a, e);
                t.sum_all(a)
            })),
            ("softplus/powf/relu", Box::new(|t, x| {
                let sp = t.softplus(x);
                let pw = t.powf(sp, 1.7);
                let r = t.relu(x);
                let y = t.add(pw, r);
                t.sum_all(y)
            })),
            ("rows/cols broadcasts", Box::new(|t, x| {
                let row = t.sum_rows(x);
                let col = t.sum_cols(x);
                let a = t.add_row(x, row);
                let b = t.sub_col(a, col);
                let c = t.mul_col(b, col);
                let d = t.mul_row(c, row);
                t.sum_all(d)
            })),
            ("select/concat/slice/reshape", Box::new(|t, x| {
                let sel = t.select_rows(x, &[2, 0, 0]);
                let cat = t.concat_cols(sel, x);
                let sl = t.slice_cols(cat, 1, 5);
                let rs = t.reshape(sl, 4, 3);
                let en = t.select_entries(rs, &[(0, 1), (3, 2), (2, 0)]);
                let sq = t.square(en);
                t.sum_all(sq)
            })),
            ("logsumexp", Box::new(|t, x| {
                let y = t.scale(x, 3.0);
                let l = t.logsumexp_rows(y);
                t.sum_all(l)
            })),
            ("standardize+matmul", Box::new(|t, x| {
                let z = t.standardize_rows(x);
                let zt = t.select_rows(z, &[1, 2, 0]);
                let m = t.mul(z, zt);
                let sims = t.sum_cols(m);
                let s3 = t.scale(sims, 2.0);
                let l = t.logsumexp_rows(s3);
                t.sum_all(l)
            })),
            ("minpair/clamp", Box::new(|t, x| {
                let a = t.scale(x, 1.3);
                let b = t.add_scalar(x, 0.11);
                let m = t.min_pair(a, b);
                let c = t.clamp(m, -0.8, 0.9);
                let s = t.square(c);
                t.sum_all(s)
            })),
            ("broadcast_rows", Box::new(|t, x| {
                let r = t.mean_rows(x);
                let b = t.broadcast_rows(r, 5);
                let s = t.square(b);
                t.sum_all(s)
            })),
        ];

        for (name, build) in &cases {
            let eval = |xm: &Array2<f64>| {
                let mut t = Tape::new();
                let x = t.param(0, xm);
                let y = build(&mut t, x);
                t.scalar_value(y)
            };
            let mut t = Tape::new();
            let x = t.param(0, &x0);
            let y = build(&mut t, x);
            let analytic = t.param_grads(y, &[x0.dim()]).remove(0);
            let numeric = fd_grad(&x0, eval, 1e-6);
            let err = max_rel_err(&analytic, &numeric);
            assert!(err < 1e-7, "op case `{name}`: rel err {err}");
        }
    }

    #[test]
    fn pearson_matches_hand_value() {
        // corr((1,2,3),(1,2,4)) = 9 / (2*sqrt(21))
        let r = pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]);
        let expect = 9.0 / (2.0 * 21.0_f64.sqrt());
        assert!((r - expect).abs() < 1e-12);
        assert!((pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]) - 1.0).abs() < 1e-12);
        assert!((pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn grad_accumulates_over_reused_nodes() {
        // y = x*x + x  => dy/dx = 2x + 1
        let x0 = array![[1.5]];
        let mut t = Tape::new();
        let x = t.param(0, &x0);
        let sq = t.mul(x, x);
        let y = t.add(sq, x);
        let s = t.sum_all(y);
        let g = t.param_grads(s, &[(1, 1)]).remove(0);
        assert!((g[(0, 0)] - 4.0).abs() < 1e-12);
    }
}
