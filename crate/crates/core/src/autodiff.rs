//! A small reverse-mode automatic differentiation tape over `f64` matrices.
//!
//! Every value is a 2-D array; row and column vectors are `1 x n` / `n x 1`
//! matrices and scalars are `1 x 1`. Nodes are appended in evaluation order,
//! so the backward sweep is a single reverse pass over the node list.

use ndarray::{s, Array2, Axis};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    MatMulT(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    AddRow(Var, Var),
    MulRow(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    SoftmaxRows(Var),
    LogSoftmaxRows(Var),
    Standardize(Var),
    SliceCols(Var, usize),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    MaxPoolRanges(Var, Array2<usize>),
    NormalizeRows(Var, Vec<f64>, f64),
    ScaleRows(Var, Var),
    MaxNormalize(Var, (usize, usize)),
    Gather(Var, Vec<(usize, usize)>),
    DotConst(Var, Array2<f64>),
    LnEps(Var, f64),
    MeanRows(Var),
    SelectRows(Var, Vec<usize>),
    Combine(Vec<(Var, f64)>),
}

#[derive(Debug, Clone)]
struct Node {
    value: Array2<f64>,
    op: Op,
}

/// Recorded computation graph.
#[derive(Debug, Default, Clone)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of one scalar output with respect to every node on the tape.
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Array2<f64>>>,
}

impl Gradients {
    /// Gradient for `v`; `None` when `v` does not influence the output.
    pub fn get(&self, v: Var) -> Option<&Array2<f64>> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }
}

fn accumulate(slot: &mut Option<Array2<f64>>, delta: Array2<f64>) {
    match slot {
        Some(g) => *g += &delta,
        None => *slot = Some(delta),
    }
}

fn softmax_rows(x: &Array2<f64>) -> Array2<f64> {
    let mut out = x.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    out
}

fn log_softmax_rows(x: &Array2<f64>) -> Array2<f64> {
    let mut out = x.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        row.mapv_inplace(|v| v - lse);
    }
    out
}

/// Variance floor used by [`Tape::standardize`].
pub const STANDARDIZE_EPS: f64 = 1e-5;

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Array2<f64>, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        &self.nodes[v.0].value
    }

    /// Scalar value of a `1 x 1` node.
    pub fn scalar(&self, v: Var) -> f64 {
        let value = self.value(v);
        debug_assert_eq!(value.dim(), (1, 1));
        value[[0, 0]]
    }

    pub fn leaf(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).dot(self.value(b));
        self.push(v, Op::MatMul(a, b))
    }

    /// `a * b^T`
    pub fn matmul_t(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).dot(&self.value(b).t());
        self.push(v, Op::MatMulT(a, b))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let v = self.value(a).t().to_owned();
        self.push(v, Op::Transpose(a))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) + self.value(b);
        self.push(v, Op::Add(a, b))
    }

    /// Adds the `1 x c` row `r` to every row of `a`.
    pub fn add_row(&mut self, a: Var, r: Var) -> Var {
        let v = self.value(a) + self.value(r);
        self.push(v, Op::AddRow(a, r))
    }

    /// Multiplies every row of `a` elementwise by the `1 x c` row `r`.
    pub fn mul_row(&mut self, a: Var, r: Var) -> Var {
        let v = self.value(a) * self.value(r);
        self.push(v, Op::MulRow(a, r))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) * self.value(b);
        self.push(v, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a) * c;
        self.push(v, Op::Scale(a, c))
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a) + c;
        self.push(v, Op::AddScalar(a))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let v = softmax_rows(self.value(a));
        self.push(v, Op::SoftmaxRows(a))
    }

    pub fn log_softmax_rows(&mut self, a: Var) -> Var {
        let v = log_softmax_rows(self.value(a));
        self.push(v, Op::LogSoftmaxRows(a))
    }

    /// Per-row zero mean and unit variance (no affine part).
    pub fn standardize(&mut self, a: Var) -> Var {
        let mut v = self.value(a).clone();
        for mut row in v.rows_mut() {
            let n = row.len() as f64;
            let mean = row.sum() / n;
            let var = row.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            let inv = 1.0 / (var + STANDARDIZE_EPS).sqrt();
            row.mapv_inplace(|x| (x - mean) * inv);
        }
        self.push(v, Op::Standardize(a))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Var {
        let v = self.value(a).slice(s![.., start..start + len]).to_owned();
        self.push(v, Op::SliceCols(a, start))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let views: Vec<_> = parts.iter().map(|p| self.value(*p).view()).collect();
        let v = ndarray::concatenate(Axis(1), &views).expect("concat_cols: row counts differ");
        self.push(v, Op::ConcatCols(parts.to_vec()))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        let views: Vec<_> = parts.iter().map(|p| self.value(*p).view()).collect();
        let v = ndarray::concatenate(Axis(0), &views).expect("concat_rows: col counts differ");
        self.push(v, Op::ConcatRows(parts.to_vec()))
    }

    /// Row `i` of the output is the columnwise max of rows
    /// `ranges[i].0..=ranges[i].1` of `a`. Ties resolve to the first row.
    pub fn max_pool_ranges(&mut self, a: Var, ranges: &[(usize, usize)]) -> Var {
        let x = self.value(a);
        let cols = x.ncols();
        let mut out = Array2::zeros((ranges.len(), cols));
        let mut arg = Array2::zeros((ranges.len(), cols));
        for (i, &(s, t)) in ranges.iter().enumerate() {
            for c in 0..cols {
                let mut best = s;
                for r in s + 1..=t {
                    if x[[r, c]] > x[[best, c]] {
                        best = r;
                    }
                }
                out[[i, c]] = x[[best, c]];
                arg[[i, c]] = best;
            }
        }
        self.push(out, Op::MaxPoolRanges(a, arg))
    }

    /// Divides each row by `max(norm, eps)`. With `eps = 0` a zero row
    /// produces non-finite values; callers validate beforehand.
    pub fn normalize_rows(&mut self, a: Var, eps: f64) -> Var {
        let mut v = self.value(a).clone();
        let mut norms = Vec::with_capacity(v.nrows());
        for mut row in v.rows_mut() {
            let norm = row.dot(&row).sqrt();
            let denom = norm.max(eps);
            row.mapv_inplace(|x| x / denom);
            norms.push(norm);
        }
        self.push(v, Op::NormalizeRows(a, norms, eps))
    }

    /// Row `i` of `a` times the scalar `m[i]`, where `m` is `n x 1`.
    pub fn scale_rows(&mut self, a: Var, m: Var) -> Var {
        let v = self.value(a) * self.value(m);
        self.push(v, Op::ScaleRows(a, m))
    }

    /// Divides every entry by the largest entry. Input must be positive.
    pub fn max_normalize(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let mut arg = (0, 0);
        for ((r, c), &v) in x.indexed_iter() {
            if v > x[arg] {
                arg = (r, c);
            }
        }
        let m = x[arg];
        let v = x / m;
        self.push(v, Op::MaxNormalize(a, arg))
    }

    /// Collects `a[idx[j]]` into a `rows x cols` matrix in row-major order.
    pub fn gather(&mut self, a: Var, idx: Vec<(usize, usize)>, rows: usize, cols: usize) -> Var {
        assert_eq!(idx.len(), rows * cols, "gather: index count");
        let x = self.value(a);
        let data: Vec<f64> = idx.iter().map(|&(r, c)| x[[r, c]]).collect();
        let v = Array2::from_shape_vec((rows, cols), data).expect("gather shape");
        self.push(v, Op::Gather(a, idx))
    }

    /// `sum(a * w)` for a constant `w` of the same shape, as a `1 x 1` node.
    pub fn dot_const(&mut self, a: Var, w: Array2<f64>) -> Var {
        let v = (self.value(a) * &w).sum();
        self.push(Array2::from_elem((1, 1), v), Op::DotConst(a, w))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let w = Array2::ones(self.value(a).raw_dim());
        self.dot_const(a, w)
    }

    /// `ln(a + eps)` elementwise.
    pub fn ln_eps(&mut self, a: Var, eps: f64) -> Var {
        let v = self.value(a).mapv(|x| (x + eps).ln());
        self.push(v, Op::LnEps(a, eps))
    }

    /// Mean over rows, giving a `1 x c` row.
    pub fn mean_rows(&mut self, a: Var) -> Var {
        let v = self
            .value(a)
            .mean_axis(Axis(0))
            .expect("mean_rows of empty matrix")
            .insert_axis(Axis(0));
        self.push(v, Op::MeanRows(a))
    }

    pub fn select_rows(&mut self, a: Var, rows: &[usize]) -> Var {
        let v = self.value(a).select(Axis(0), rows);
        self.push(v, Op::SelectRows(a, rows.to_vec()))
    }

    /// `sum_i c_i * a_i` over same-shaped nodes.
    pub fn combine(&mut self, terms: &[(Var, f64)]) -> Var {
        assert!(!terms.is_empty(), "combine: no terms");
        let mut v = self.value(terms[0].0) * terms[0].1;
        for &(a, c) in &terms[1..] {
            v.scaled_add(c, self.value(a));
        }
        self.push(v, Op::Combine(terms.to_vec()))
    }

    /// Reverse sweep from the scalar `output`.
    pub fn backward(&self, output: Var) -> Gradients {
        assert_eq!(self.value(output).dim(), (1, 1), "backward needs a scalar");
        let mut grads: Vec<Option<Array2<f64>>> = vec![None; output.0 + 1];
        grads[output.0] = Some(Array2::ones((1, 1)));
        for i in (0..=output.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    let da = g.dot(&self.value(*b).t());
                    let db = self.value(*a).t().dot(&g);
                    accumulate(&mut grads[a.0], da);
                    accumulate(&mut grads[b.0], db);
                }
                Op::MatMulT(a, b) => {
                    let da = g.dot(self.value(*b));
                    let db = g.t().dot(self.value(*a));
                    accumulate(&mut grads[a.0], da);
                    accumulate(&mut grads[b.0], db);
                }
                Op::Transpose(a) => accumulate(&mut grads[a.0], g.t().to_owned()),
                Op::Add(a, b) => {
                    accumulate(&mut grads[a.0], g.clone());
                    accumulate(&mut grads[b.0], g.clone());
                }
                Op::AddRow(a, r) => {
                    let dr = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                    accumulate(&mut grads[a.0], g.clone());
                    accumulate(&mut grads[r.0], dr);
                }
                Op::MulRow(a, r) => {
                    let da = &g * self.value(*r);
                    let dr = (&g * self.value(*a)).sum_axis(Axis(0)).insert_axis(Axis(0));
                    accumulate(&mut grads[a.0], da);
                    accumulate(&mut grads[r.0], dr);
                }
                Op::Mul(a, b) => {
                    let da = &g * self.value(*b);
                    let db = &g * self.value(*a);
                    accumulate(&mut grads[a.0], da);
                    accumulate(&mut grads[b.0], db);
                }
                Op::Scale(a, c) => accumulate(&mut grads[a.0], &g * *c),
                Op::AddScalar(a) => accumulate(&mut grads[a.0], g.clone()),
                Op::SoftmaxRows(a) => {
                    let y = &node.value;
                    let mut dx = &g * y;
                    for (mut row, yrow) in dx.rows_mut().into_iter().zip(y.rows()) {
                        let dot = row.sum();
                        row.zip_mut_with(&yrow, |d, &yv| *d -= yv * dot);
                    }
                    accumulate(&mut grads[a.0], dx);
                }
                Op::LogSoftmaxRows(a) => {
                    let p = node.value.mapv(f64::exp);
                    let mut dx = g.clone();
                    for (mut row, prow) in dx.rows_mut().into_iter().zip(p.rows()) {
                        let total: f64 = row.sum();
                        row.zip_mut_with(&prow, |d, &pv| *d -= pv * total);
                    }
                    accumulate(&mut grads[a.0], dx);
                }
                Op::Standardize(a) => {
                    let x = self.value(*a);
                    let y = &node.value;
                    let mut dx = Array2::zeros(x.raw_dim());
                    for r in 0..x.nrows() {
                        let xr = x.row(r);
                        let n = xr.len() as f64;
                        let mean = xr.sum() / n;
                        let var = xr.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                        let inv = 1.0 / (var + STANDARDIZE_EPS).sqrt();
                        let gr = g.row(r);
                        let yr = y.row(r);
                        let g_mean = gr.sum() / n;
                        let gy_mean = gr.dot(&yr) / n;
                        for c in 0..xr.len() {
                            dx[[r, c]] = inv * (gr[c] - g_mean - yr[c] * gy_mean);
                        }
                    }
                    accumulate(&mut grads[a.0], dx);
                }
                Op::SliceCols(a, start) => {
                    let mut dx = Array2::zeros(self.value(*a).raw_dim());
                    dx.slice_mut(s![.., *start..*start + g.ncols()]).assign(&g);
                    accumulate(&mut grads[a.0], dx);
                }
                Op::ConcatCols(parts) => {
                    let mut offset = 0;
                    for p in parts {
                        let w = self.value(*p).ncols();
                        let dp = g.slice(s![.., offset..offset + w]).to_owned();
                        accumulate(&mut grads[p.0], dp);
                        offset += w;
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut offset = 0;
                    for p in parts {
                        let h = self.value(*p).nrows();
                        let dp = g.slice(s![offset..offset + h, ..]).to_owned();
                        accumulate(&mut grads[p.0], dp);
                        offset += h;
                    }
                }
                Op::MaxPoolRanges(a, arg) => {
                    let mut dx = Array2::zeros(self.value(*a).raw_dim());
                    for ((i, c), &r) in arg.indexed_iter() {
                        dx[[r, c]] += g[[i, c]];
                    }
                    accumulate(&mut grads[a.0], dx);
                }
                Op::NormalizeRows(a, norms, eps) => {
                    let y = &node.value;
                    let mut dx = g.clone();
                    for (r, &norm) in norms.iter().enumerate() {
                        let denom = norm.max(*eps);
                        let gy = if norm >= *eps {
                            g.row(r).dot(&y.row(r))
                        } else {
                            0.0
                        };
                        let mut row = dx.row_mut(r);
                        row.zip_mut_with(&y.row(r), |d, &yv| *d = (*d - yv * gy) / denom);
                    }
                    accumulate(&mut grads[a.0], dx);
                }
                Op::ScaleRows(a, m) => {
                    let da = &g * self.value(*m);
                    let dm = (&g * self.value(*a)).sum_axis(Axis(1)).insert_axis(Axis(1));
                    accumulate(&mut grads[a.0], da);
                    accumulate(&mut grads[m.0], dm);
                }
                Op::MaxNormalize(a, arg) => {
                    let x = self.value(*a);
                    let m = x[*arg];
                    let mut dx = &g / m;
                    let coupling = (&g * x).sum() / (m * m);
                    dx[*arg] -= coupling;
                    accumulate(&mut grads[a.0], dx);
                }
                Op::Gather(a, idx) => {
                    let mut dx = Array2::zeros(self.value(*a).raw_dim());
                    for (gv, &(r, c)) in g.iter().zip(idx) {
                        dx[[r, c]] += gv;
                    }
                    accumulate(&mut grads[a.0], dx);
                }
                Op::DotConst(a, w) => accumulate(&mut grads[a.0], w * g[[0, 0]]),
                Op::LnEps(a, eps) => {
                    let dx = &g / &self.value(*a).mapv(|x| x + eps);
                    accumulate(&mut grads[a.0], dx);
                }
                Op::MeanRows(a) => {
                    let x = self.value(*a);
                    let n = x.nrows() as f64;
                    let dx = Array2::from_shape_fn(x.raw_dim(), |(_, c)| g[[0, c]] / n);
                    accumulate(&mut grads[a.0], dx);
                }
                Op::SelectRows(a, rows) => {
                    let mut dx = Array2::zeros(self.value(*a).raw_dim());
                    for (i, &r) in rows.iter().enumerate() {
                        let mut target = dx.row_mut(r);
                        target += &g.row(i);
                    }
                    accumulate(&mut grads[a.0], dx);
                }
                Op::Combine(terms) => {
                    for &(a, c) in terms {
                        accumulate(&mut grads[a.0], &g * c);
                    }
                }
            }
            grads[i] = Some(g);
        }
        Gradients { grads }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Array2<f64> {
        Array2::from_shape_fn((r, c), |_| rng.random_range(-1.0..1.0))
    }

    /// Central-difference check of `d f / d input` for a graph builder `f`.
    fn check(input: Array2<f64>, f: impl Fn(&mut Tape, Var) -> Var) {
        let mut tape = Tape::new();
        let x = tape.leaf(input.clone());
        let out = f(&mut tape, x);
        let grads = tape.backward(out);
        let analytic = grads.get(x).cloned().unwrap_or_else(|| Array2::zeros(input.raw_dim()));
        let h = 1e-5;
        let eval = |m: &Array2<f64>| {
            let mut t = Tape::new();
            let v = t.leaf(m.clone());
            let o = f(&mut t, v);
            t.scalar(o)
        };
        for idx in 0..input.len() {
            let (r, c) = (idx / input.ncols(), idx % input.ncols());
            let mut plus = input.clone();
            plus[[r, c]] += h;
            let mut minus = input.clone();
            minus[[r, c]] -= h;
            let numeric = (eval(&plus) - eval(&minus)) / (2.0 * h);
            let a = analytic[[r, c]];
            assert!(
                (a - numeric).abs() <= 1e-6 * (1.0 + a.abs().max(numeric.abs())),
                "entry ({r},{c}): analytic {a} numeric {numeric}"
            );
        }
    }

    fn weights(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Array2<f64> {
        random(rng, r, c)
    }

    #[test]
    fn elementary_ops_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let w = weights(&mut rng, 4, 3);
        let m = random(&mut rng, 3, 5);
        let x0 = random(&mut rng, 4, 3);

        check(x0.clone(), |t, x| {
            let mm = t.leaf(m.clone());
            let y = t.matmul(x, mm);
            t.dot_const(y, weights(&mut ChaCha8Rng::seed_from_u64(1), 4, 5))
        });
        check(x0.clone(), |t, x| {
            let y = t.matmul_t(x, x);
            let y = t.transpose(y);
            t.dot_const(y, weights(&mut ChaCha8Rng::seed_from_u64(2), 4, 4))
        });
        check(x0.clone(), |t, x| {
            let y = t.softmax_rows(x);
            t.dot_const(y, w.clone())
        });
        check(x0.clone(), |t, x| {
            let y = t.log_softmax_rows(x);
            t.dot_const(y, w.clone())
        });
        check(x0.clone(), |t, x| {
            let y = t.standardize(x);
            t.dot_const(y, w.clone())
        });
        check(x0.clone(), |t, x| {
            let y = t.normalize_rows(x, 1e-8);
            t.dot_const(y, w.clone())
        });
        check(x0.clone(), |t, x| {
            let y = t.max_pool_ranges(x, &[(0, 2), (1, 3), (2, 2)]);
            t.dot_const(y, weights(&mut ChaCha8Rng::seed_from_u64(3), 3, 3))
        });
        check(x0.clone(), |t, x| {
            let p = t.softmax_rows(x);
            let y = t.max_normalize(p);
            t.dot_const(y, w.clone())
        });
        check(x0.clone(), |t, x| {
            let a = t.slice_cols(x, 1, 2);
            let b = t.slice_cols(x, 0, 1);
            let y = t.concat_cols(&[a, b]);
            let z = t.concat_rows(&[y, y]);
            t.dot_const(z, weights(&mut ChaCha8Rng::seed_from_u64(4), 8, 3))
        });
        check(x0.clone(), |t, x| {
            let col = t.slice_cols(x, 0, 1);
            let y = t.scale_rows(x, col);
            t.dot_const(y, w.clone())
        });
        check(x0.clone(), |t, x| {
            let y = t.gather(x, vec![(0, 0), (3, 2), (0, 0), (1, 1)], 2, 2);
            let y = t.log_softmax_rows(y);
            t.dot_const(y, array![[1.0, -2.0], [0.5, 3.0]])
        });
        check(x0.clone(), |t, x| {
            let p = t.softmax_rows(x);
            let y = t.ln_eps(p, 1e-12);
            t.dot_const(y, w.clone())
        });
        check(x0.clone(), |t, x| {
            let r = t.mean_rows(x);
            let y = t.mul_row(x, r);
            let y = t.add_row(y, r);
            let z = t.select_rows(y, &[3, 0, 3]);
            let z = t.mul(z, z);
            t.dot_const(z, weights(&mut ChaCha8Rng::seed_from_u64(5), 3, 3))
        });
        check(x0, |t, x| {
            let a = t.scale(x, 2.5);
            let b = t.add_scalar(x, 1.0);
            let c = t.combine(&[(a, 0.5), (b, -1.5)]);
            let c = t.mul(c, b);
            let d = t.add(c, x);
            t.sum(d)
        });
    }

    #[test]
    fn unused_leaf_has_no_gradient() {
        let mut tape = Tape::new();
        let a = tape.leaf(array![[1.0]]);
        let b = tape.leaf(array![[2.0]]);
        let out = tape.scale(b, 3.0);
        let grads = tape.backward(out);
        assert!(grads.get(a).is_none());
        assert_eq!(grads.get(b).unwrap()[[0, 0]], 3.0);
    }

    #[test]
    fn softmax_rows_are_distributions() {
        let mut tape = Tape::new();
        let x = tape.leaf(array![[1000.0, 0.0], [-3.0, -3.0]]);
        let y = tape.softmax_rows(x);
        let v = tape.value(y);
        assert!((v[[0, 0]] - 1.0).abs() < 1e-12);
        assert!((v[[1, 0]] - 0.5).abs() < 1e-12);
    }
}
