//! Reverse-mode automatic differentiation over row-major matrices.
//!
//! A [`Tape`] records every operation of one forward pass. Parameters are
//! referenced from a [`ParamStore`] rather than copied, so building a tape
//! for a single decoding step is cheap.

use std::collections::HashMap;

use crate::params::ParamStore;
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op<T> {
    Constant,
    Param(usize),
    MatMul(Var, Var),
    Linear(Var, Var, Option<Var>),
    Add(Var, Var),
    Sub(Var, Var),
    AddRow(Var, Var),
    AddN(Vec<Var>),
    Mul(Var, Var),
    Scale(Var, T),
    MulConst(Var, Vec<T>),
    Mish(Var),
    Sigmoid(Var),
    Tanh(Var),
    LeakyRelu(Var, T),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    SliceCols(Var, usize),
    Gather(Var, Vec<usize>),
    SegmentSum(Var, Vec<usize>),
    SegmentSoftmax(Var, Vec<usize>),
    HeadDot(Var, Var, usize),
    HeadScale(Var, Var, usize),
    SumRows(Var),
    MaxRows(Var, Vec<usize>),
    CrossEntropy(Var, Vec<bool>, usize),
    BceLogits(Var, Vec<T>),
}

struct Node<T> {
    rows: usize,
    cols: usize,
    /// Empty for parameters, whose values live in the store.
    value: Vec<T>,
    op: Op<T>,
    needs_grad: bool,
}

/// Parameter gradients, aligned with the store they were computed for.
#[derive(Debug, Clone, PartialEq)]
pub struct Grads<T> {
    pub data: Vec<Vec<T>>,
}

impl<T: Scalar> Grads<T> {
    pub fn zeros_like(params: &ParamStore<T>) -> Grads<T> {
        Grads { data: params.tensors().iter().map(|t| vec![T::zero(); t.len()]).collect() }
    }

    pub fn add_assign(&mut self, other: &Grads<T>) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += *y;
            }
        }
    }

    pub fn scale(&mut self, s: T) {
        for a in &mut self.data {
            for x in a.iter_mut() {
                *x *= s;
            }
        }
    }

    pub fn norm(&self) -> T {
        let mut acc = T::zero();
        for a in &self.data {
            for &x in a {
                acc += x * x;
            }
        }
        acc.sqrt()
    }
}

pub struct Tape<'p, T: Scalar> {
    params: &'p ParamStore<T>,
    nodes: Vec<Node<T>>,
    param_vars: HashMap<usize, Var>,
}

/// `c += a · b` for `a: n×k`, `b: k×m`.
fn gemm_acc<T: Scalar>(a: &[T], b: &[T], c: &mut [T], n: usize, k: usize, m: usize) {
    for i in 0..n {
        let crow = &mut c[i * m..(i + 1) * m];
        for p in 0..k {
            let x = a[i * k + p];
            if x == T::zero() {
                continue;
            }
            let brow = &b[p * m..(p + 1) * m];
            for (cv, &bv) in crow.iter_mut().zip(brow) {
                *cv += x * bv;
            }
        }
    }
}

/// `da += g · bᵀ` for `g: n×m`, `b: k×m`.
fn gemm_nt_acc<T: Scalar>(g: &[T], b: &[T], da: &mut [T], n: usize, k: usize, m: usize) {
    for i in 0..n {
        let grow = &g[i * m..(i + 1) * m];
        for p in 0..k {
            let brow = &b[p * m..(p + 1) * m];
            let mut s = T::zero();
            for (&x, &y) in grow.iter().zip(brow) {
                s += x * y;
            }
            da[i * k + p] += s;
        }
    }
}

/// `db += aᵀ · g` for `a: n×k`, `g: n×m`.
fn gemm_tn_acc<T: Scalar>(a: &[T], g: &[T], db: &mut [T], n: usize, k: usize, m: usize) {
    for i in 0..n {
        let grow = &g[i * m..(i + 1) * m];
        for p in 0..k {
            let x = a[i * k + p];
            if x == T::zero() {
                continue;
            }
            let drow = &mut db[p * m..(p + 1) * m];
            for (d, &gv) in drow.iter_mut().zip(grow) {
                *d += x * gv;
            }
        }
    }
}

pub fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

pub fn softplus<T: Scalar>(x: T) -> T {
    x.max(T::zero()) + (-x.abs()).exp().ln_1p()
}

pub fn mish<T: Scalar>(x: T) -> T {
    x * softplus(x).tanh()
}

fn mish_grad<T: Scalar>(x: T) -> T {
    let t = softplus(x).tanh();
    t + x * (T::one() - t * t) * sigmoid(x)
}

/// Log-softmax over the entries where `mask` is true; masked entries get
/// negative infinity.
pub fn masked_log_softmax<T: Scalar>(logits: &[T], mask: &[bool]) -> Vec<T> {
    let mx = logits
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(&x, _)| x)
        .fold(T::neg_infinity(), T::max);
    let mut z = T::zero();
    for (&x, &m) in logits.iter().zip(mask) {
        if m {
            z += (x - mx).exp();
        }
    }
    let lse = mx + z.ln();
    logits.iter().zip(mask).map(|(&x, &m)| if m { x - lse } else { T::neg_infinity() }).collect()
}

impl<'p, T: Scalar> Tape<'p, T> {
    pub fn new(params: &'p ParamStore<T>) -> Tape<'p, T> {
        Tape { params, nodes: Vec::new(), param_vars: HashMap::new() }
    }

    pub fn params(&self) -> &'p ParamStore<T> {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        let n = &self.nodes[v.0];
        (n.rows, n.cols)
    }

    pub fn value(&self, v: Var) -> &[T] {
        match self.nodes[v.0].op {
            Op::Param(id) => &self.params.tensors()[id].data,
            _ => &self.nodes[v.0].value,
        }
    }

    /// The single entry of a 1×1 node.
    pub fn scalar(&self, v: Var) -> T {
        debug_assert_eq!(self.shape(v), (1, 1));
        self.value(v)[0]
    }

    fn push(&mut self, rows: usize, cols: usize, value: Vec<T>, op: Op<T>, needs_grad: bool) -> Var {
        debug_assert!(matches!(op, Op::Param(_)) || value.len() == rows * cols);
        self.nodes.push(Node { rows, cols, value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn ng(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    pub fn constant(&mut self, rows: usize, cols: usize, value: Vec<T>) -> Var {
        assert_eq!(value.len(), rows * cols, "constant shape");
        self.push(rows, cols, value, Op::Constant, false)
    }

    pub fn zeros(&mut self, rows: usize, cols: usize) -> Var {
        self.constant(rows, cols, vec![T::zero(); rows * cols])
    }

    pub fn param(&mut self, id: usize) -> Var {
        if let Some(&v) = self.param_vars.get(&id) {
            return v;
        }
        let t = &self.params.tensors()[id];
        let v = self.push(t.rows, t.cols, Vec::new(), Op::Param(id), true);
        self.param_vars.insert(id, v);
        v
    }

    pub fn param_named(&mut self, name: &str) -> Var {
        let id = self.params.id(name).unwrap_or_else(|| panic!("unknown parameter {name}"));
        self.param(id)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let ((n, k), (k2, m)) = (self.shape(a), self.shape(b));
        assert_eq!(k, k2, "matmul inner dimension");
        let mut out = vec![T::zero(); n * m];
        gemm_acc(self.value(a), self.value(b), &mut out, n, k, m);
        let ng = self.ng(a) || self.ng(b);
        self.push(n, m, out, Op::MatMul(a, b), ng)
    }

    /// `x · w + b` with `b` broadcast over rows.
    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Var {
        let ((n, k), (k2, m)) = (self.shape(x), self.shape(w));
        assert_eq!(k, k2, "linear input width");
        let mut out = vec![T::zero(); n * m];
        if let Some(b) = b {
            assert_eq!(self.shape(b), (1, m), "linear bias shape");
            let bv = self.value(b);
            for row in out.chunks_mut(m) {
                row.copy_from_slice(bv);
            }
        }
        gemm_acc(self.value(x), self.value(w), &mut out, n, k, m);
        let ng = self.ng(x) || self.ng(w) || b.is_some_and(|b| self.ng(b));
        self.push(n, m, out, Op::Linear(x, w, b), ng)
    }

    fn zip_map(&self, a: Var, b: Var, f: impl Fn(T, T) -> T) -> Vec<T> {
        assert_eq!(self.shape(a), self.shape(b), "elementwise shape");
        self.value(a).iter().zip(self.value(b)).map(|(&x, &y)| f(x, y)).collect()
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let out = self.zip_map(a, b, |x, y| x + y);
        let (r, c) = self.shape(a);
        let ng = self.ng(a) || self.ng(b);
        self.push(r, c, out, Op::Add(a, b), ng)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let out = self.zip_map(a, b, |x, y| x - y);
        let (r, c) = self.shape(a);
        let ng = self.ng(a) || self.ng(b);
        self.push(r, c, out, Op::Sub(a, b), ng)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let out = self.zip_map(a, b, |x, y| x * y);
        let (r, c) = self.shape(a);
        let ng = self.ng(a) || self.ng(b);
        self.push(r, c, out, Op::Mul(a, b), ng)
    }

    /// Adds the 1×m row `b` to every row of `a`.
    pub fn add_row(&mut self, a: Var, b: Var) -> Var {
        let (r, c) = self.shape(a);
        assert_eq!(self.shape(b), (1, c), "add_row shape");
        let bv = self.value(b);
        let out: Vec<T> = self.value(a).chunks(c).flat_map(|row| row.iter().zip(bv).map(|(&x, &y)| x + y)).collect();
        let ng = self.ng(a) || self.ng(b);
        self.push(r, c, out, Op::AddRow(a, b), ng)
    }

    pub fn add_n(&mut self, xs: &[Var]) -> Var {
        assert!(!xs.is_empty(), "add_n of nothing");
        let (r, c) = self.shape(xs[0]);
        let mut out = vec![T::zero(); r * c];
        for &x in xs {
            assert_eq!(self.shape(x), (r, c), "add_n shape");
            for (o, &v) in out.iter_mut().zip(self.value(x)) {
                *o += v;
            }
        }
        let ng = xs.iter().any(|&x| self.ng(x));
        self.push(r, c, out, Op::AddN(xs.to_vec()), ng)
    }

    pub fn scale(&mut self, a: Var, s: T) -> Var {
        let out = self.value(a).iter().map(|&x| x * s).collect();
        let (r, c) = self.shape(a);
        let ng = self.ng(a);
        self.push(r, c, out, Op::Scale(a, s), ng)
    }

    /// Elementwise product with a constant of the same shape (dropout masks).
    pub fn mul_const(&mut self, a: Var, k: Vec<T>) -> Var {
        let (r, c) = self.shape(a);
        assert_eq!(k.len(), r * c, "mul_const shape");
        let out = self.value(a).iter().zip(&k).map(|(&x, &y)| x * y).collect();
        let ng = self.ng(a);
        self.push(r, c, out, Op::MulConst(a, k), ng)
    }

    fn map(&mut self, a: Var, f: impl Fn(T) -> T, op: Op<T>) -> Var {
        let out = self.value(a).iter().map(|&x| f(x)).collect();
        let (r, c) = self.shape(a);
        let ng = self.ng(a);
        self.push(r, c, out, op, ng)
    }

    pub fn mish(&mut self, a: Var) -> Var {
        self.map(a, mish, Op::Mish(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.map(a, sigmoid, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.map(a, |x| x.tanh(), Op::Tanh(a))
    }

    pub fn leaky_relu(&mut self, a: Var, slope: T) -> Var {
        self.map(a, |x| if x > T::zero() { x } else { x * slope }, Op::LeakyRelu(a, slope))
    }

    pub fn concat_cols(&mut self, xs: &[Var]) -> Var {
        let r = self.shape(xs[0]).0;
        let widths: Vec<usize> = xs.iter().map(|&x| self.shape(x).1).collect();
        let c: usize = widths.iter().sum();
        let mut out = Vec::with_capacity(r * c);
        for i in 0..r {
            for (&x, &w) in xs.iter().zip(&widths) {
                assert_eq!(self.shape(x).0, r, "concat_cols rows");
                out.extend_from_slice(&self.value(x)[i * w..(i + 1) * w]);
            }
        }
        let ng = xs.iter().any(|&x| self.ng(x));
        self.push(r, c, out, Op::ConcatCols(xs.to_vec()), ng)
    }

    pub fn concat_rows(&mut self, xs: &[Var]) -> Var {
        let c = self.shape(xs[0]).1;
        let mut out = Vec::new();
        let mut r = 0;
        for &x in xs {
            assert_eq!(self.shape(x).1, c, "concat_rows cols");
            r += self.shape(x).0;
            out.extend_from_slice(self.value(x));
        }
        let ng = xs.iter().any(|&x| self.ng(x));
        self.push(r, c, out, Op::ConcatRows(xs.to_vec()), ng)
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Var {
        let (r, c) = self.shape(a);
        assert!(start + len <= c, "slice_cols range");
        let v = self.value(a);
        let out = (0..r).flat_map(|i| v[i * c + start..i * c + start + len].iter().copied()).collect();
        let ng = self.ng(a);
        self.push(r, len, out, Op::SliceCols(a, start), ng)
    }

    /// Rows of `a` selected (with repetition) by `idx`.
    pub fn gather(&mut self, a: Var, idx: &[usize]) -> Var {
        let (r, c) = self.shape(a);
        let v = self.value(a);
        let mut out = Vec::with_capacity(idx.len() * c);
        for &i in idx {
            assert!(i < r, "gather index {i} out of {r}");
            out.extend_from_slice(&v[i * c..(i + 1) * c]);
        }
        let ng = self.ng(a);
        self.push(idx.len(), c, out, Op::Gather(a, idx.to_vec()), ng)
    }

    /// Row `i` of the result sums the rows `e` of `a` with `seg[e] == i`.
    pub fn segment_sum(&mut self, a: Var, seg: &[usize], n: usize) -> Var {
        let (r, c) = self.shape(a);
        assert_eq!(seg.len(), r, "segment_sum length");
        let v = self.value(a);
        let mut out = vec![T::zero(); n * c];
        for (e, &s) in seg.iter().enumerate() {
            for (o, &x) in out[s * c..(s + 1) * c].iter_mut().zip(&v[e * c..(e + 1) * c]) {
                *o += x;
            }
        }
        let ng = self.ng(a);
        self.push(n, c, out, Op::SegmentSum(a, seg.to_vec()), ng)
    }

    /// Softmax of each column of `a` within each segment.
    pub fn segment_softmax(&mut self, a: Var, seg: &[usize], n: usize) -> Var {
        let (r, c) = self.shape(a);
        assert_eq!(seg.len(), r, "segment_softmax length");
        let v = self.value(a);
        let mut mx = vec![T::neg_infinity(); n * c];
        for (e, &s) in seg.iter().enumerate() {
            for j in 0..c {
                mx[s * c + j] = mx[s * c + j].max(v[e * c + j]);
            }
        }
        let mut out: Vec<T> = Vec::with_capacity(r * c);
        let mut z = vec![T::zero(); n * c];
        for (e, &s) in seg.iter().enumerate() {
            for j in 0..c {
                let x = (v[e * c + j] - mx[s * c + j]).exp();
                z[s * c + j] += x;
                out.push(x);
            }
        }
        for (e, &s) in seg.iter().enumerate() {
            for j in 0..c {
                out[e * c + j] /= z[s * c + j];
            }
        }
        let ng = self.ng(a);
        self.push(r, c, out, Op::SegmentSoftmax(a, seg.to_vec()), ng)
    }

    /// Per-head dot products of matching rows: `E×D, E×D -> E×heads`.
    pub fn head_dot(&mut self, a: Var, b: Var, heads: usize) -> Var {
        let (r, c) = self.shape(a);
        assert_eq!(self.shape(b), (r, c), "head_dot shape");
        assert_eq!(c % heads, 0, "head_dot heads");
        let w = c / heads;
        let (av, bv) = (self.value(a), self.value(b));
        let mut out = Vec::with_capacity(r * heads);
        for e in 0..r {
            for h in 0..heads {
                let mut s = T::zero();
                for j in h * w..(h + 1) * w {
                    s += av[e * c + j] * bv[e * c + j];
                }
                out.push(s);
            }
        }
        let ng = self.ng(a) || self.ng(b);
        self.push(r, heads, out, Op::HeadDot(a, b, heads), ng)
    }

    /// Scales each head block of the rows of `v` (`E×D`) by `alpha` (`E×heads`).
    pub fn head_scale(&mut self, v: Var, alpha: Var, heads: usize) -> Var {
        let (r, c) = self.shape(v);
        assert_eq!(self.shape(alpha), (r, heads), "head_scale shape");
        let w = c / heads;
        let (vv, av) = (self.value(v), self.value(alpha));
        let out = (0..r * c).map(|i| vv[i] * av[(i / c) * heads + (i % c) / w]).collect();
        let ng = self.ng(v) || self.ng(alpha);
        self.push(r, c, out, Op::HeadScale(v, alpha, heads), ng)
    }

    pub fn sum_rows(&mut self, a: Var) -> Var {
        let (r, c) = self.shape(a);
        let v = self.value(a);
        let mut out = vec![T::zero(); c];
        for i in 0..r {
            for (o, &x) in out.iter_mut().zip(&v[i * c..(i + 1) * c]) {
                *o += x;
            }
        }
        let ng = self.ng(a);
        self.push(1, c, out, Op::SumRows(a), ng)
    }

    /// Columnwise maximum; ties go to the lowest row.
    pub fn max_rows(&mut self, a: Var) -> Var {
        let (r, c) = self.shape(a);
        assert!(r > 0, "max_rows of an empty matrix");
        let v = self.value(a);
        let mut arg = vec![0usize; c];
        for i in 1..r {
            for j in 0..c {
                if v[i * c + j] > v[arg[j] * c + j] {
                    arg[j] = i;
                }
            }
        }
        let out = (0..c).map(|j| v[arg[j] * c + j]).collect();
        let ng = self.ng(a);
        self.push(1, c, out, Op::MaxRows(a, arg), ng)
    }

    /// Cross-entropy of a 1×C logit row against `target`, with the softmax
    /// restricted to `mask`.
    pub fn cross_entropy(&mut self, logits: Var, mask: &[bool], target: usize) -> Var {
        let (r, c) = self.shape(logits);
        assert_eq!((r, mask.len()), (1, c), "cross_entropy shape");
        assert!(mask[target], "cross_entropy target {target} is masked");
        let lp = masked_log_softmax(self.value(logits), mask);
        let ng = self.ng(logits);
        self.push(1, 1, vec![-lp[target]], Op::CrossEntropy(logits, mask.to_vec(), target), ng)
    }

    /// Summed binary cross-entropy of `sigmoid(z)` against labels `y`.
    pub fn bce_logits(&mut self, z: Var, y: &[T]) -> Var {
        let zv = self.value(z);
        assert_eq!(zv.len(), y.len(), "bce_logits length");
        let mut s = T::zero();
        for (&x, &t) in zv.iter().zip(y) {
            s += x.max(T::zero()) - x * t + (-x.abs()).exp().ln_1p();
        }
        let ng = self.ng(z);
        self.push(1, 1, vec![s], Op::BceLogits(z, y.to_vec()), ng)
    }

    /// Back-propagates from the 1×1 node `root` and returns parameter
    /// gradients.
    pub fn backward(&self, root: Var) -> Grads<T> {
        let mut grads = Grads::zeros_like(self.params);
        self.backward_into(root, &mut grads);
        grads
    }

    /// As [`Tape::backward`], accumulating into `out`.
    pub fn backward_into(&self, root: Var, out: &mut Grads<T>) {
        assert_eq!(self.shape(root), (1, 1), "backward from a non-scalar");
        let mut g: Vec<Vec<T>> = vec![Vec::new(); self.nodes.len()];
        g[root.0] = vec![T::one()];
        for i in (0..=root.0).rev() {
            if g[i].is_empty() || !self.nodes[i].needs_grad {
                continue;
            }
            let gi = std::mem::take(&mut g[i]);
            self.propagate(i, &gi, &mut g, out);
        }
    }

    fn acc<'g>(&self, g: &'g mut [Vec<T>], v: Var) -> Option<&'g mut Vec<T>> {
        let n = &self.nodes[v.0];
        if !n.needs_grad {
            return None;
        }
        let slot = &mut g[v.0];
        if slot.is_empty() {
            *slot = vec![T::zero(); n.rows * n.cols];
        }
        Some(slot)
    }

    fn propagate(&self, i: usize, gi: &[T], g: &mut [Vec<T>], out: &mut Grads<T>) {
        let node = &self.nodes[i];
        let (rows, cols) = (node.rows, node.cols);
        match &node.op {
            Op::Constant => {}
            Op::Param(id) => {
                for (o, &x) in out.data[*id].iter_mut().zip(gi) {
                    *o += x;
                }
            }
            Op::MatMul(a, b) | Op::Linear(a, b, _) => {
                let (n, k) = self.shape(*a);
                let m = cols;
                if self.ng(*a) {
                    let bv = self.value(*b);
                    let da = self.acc(g, *a).unwrap();
                    gemm_nt_acc(gi, bv, da, n, k, m);
                }
                if self.ng(*b) {
                    let av = self.value(*a);
                    let db = self.acc(g, *b).unwrap();
                    gemm_tn_acc(av, gi, db, n, k, m);
                }
                if let Op::Linear(_, _, Some(bias)) = &node.op {
                    if let Some(db) = self.acc(g, *bias) {
                        for row in gi.chunks(m) {
                            for (d, &x) in db.iter_mut().zip(row) {
                                *d += x;
                            }
                        }
                    }
                }
            }
            Op::Add(a, b) => {
                for (v, s) in [(*a, T::one()), (*b, T::one())] {
                    if let Some(d) = self.acc(g, v) {
                        for (d, &x) in d.iter_mut().zip(gi) {
                            *d += s * x;
                        }
                    }
                }
            }
            Op::Sub(a, b) => {
                for (v, s) in [(*a, T::one()), (*b, -T::one())] {
                    if let Some(d) = self.acc(g, v) {
                        for (d, &x) in d.iter_mut().zip(gi) {
                            *d += s * x;
                        }
                    }
                }
            }
            Op::AddN(xs) => {
                for &v in xs {
                    if let Some(d) = self.acc(g, v) {
                        for (d, &x) in d.iter_mut().zip(gi) {
                            *d += x;
                        }
                    }
                }
            }
            Op::AddRow(a, b) => {
                if let Some(d) = self.acc(g, *a) {
                    for (d, &x) in d.iter_mut().zip(gi) {
                        *d += x;
                    }
                }
                if let Some(d) = self.acc(g, *b) {
                    for row in gi.chunks(cols) {
                        for (d, &x) in d.iter_mut().zip(row) {
                            *d += x;
                        }
                    }
                }
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                if let Some(d) = self.acc(g, *a) {
                    for ((d, &x), &y) in d.iter_mut().zip(gi).zip(bv.iter()) {
                        *d += x * y;
                    }
                }
                if let Some(d) = self.acc(g, *b) {
                    for ((d, &x), &y) in d.iter_mut().zip(gi).zip(av.iter()) {
                        *d += x * y;
                    }
                }
            }
            Op::Scale(a, s) => {
                let s = *s;
                if let Some(d) = self.acc(g, *a) {
                    for (d, &x) in d.iter_mut().zip(gi) {
                        *d += s * x;
                    }
                }
            }
            Op::MulConst(a, k) => {
                if let Some(d) = self.acc(g, *a) {
                    for ((d, &x), &y) in d.iter_mut().zip(gi).zip(k) {
                        *d += x * y;
                    }
                }
            }
            Op::Mish(a) | Op::Sigmoid(a) | Op::Tanh(a) | Op::LeakyRelu(a, _) => {
                let xs = self.value(*a);
                let ys = &node.value;
                if let Some(d) = self.acc(g, *a) {
                    for j in 0..d.len() {
                        let local = match node.op {
                            Op::Mish(_) => mish_grad(xs[j]),
                            Op::Sigmoid(_) => ys[j] * (T::one() - ys[j]),
                            Op::Tanh(_) => T::one() - ys[j] * ys[j],
                            Op::LeakyRelu(_, s) => {
                                if xs[j] > T::zero() {
                                    T::one()
                                } else {
                                    s
                                }
                            }
                            _ => unreachable!(),
                        };
                        d[j] += gi[j] * local;
                    }
                }
            }
            Op::ConcatCols(xs) => {
                let mut off = 0;
                for &v in xs {
                    let w = self.shape(v).1;
                    if let Some(d) = self.acc(g, v) {
                        for r in 0..rows {
                            for j in 0..w {
                                d[r * w + j] += gi[r * cols + off + j];
                            }
                        }
                    }
                    off += w;
                }
            }
            Op::ConcatRows(xs) => {
                let mut off = 0;
                for &v in xs {
                    let len = self.shape(v).0 * cols;
                    if let Some(d) = self.acc(g, v) {
                        for (d, &x) in d.iter_mut().zip(&gi[off..off + len]) {
                            *d += x;
                        }
                    }
                    off += len;
                }
            }
            Op::SliceCols(a, start) => {
                let c = self.shape(*a).1;
                let start = *start;
                if let Some(d) = self.acc(g, *a) {
                    for r in 0..rows {
                        for j in 0..cols {
                            d[r * c + start + j] += gi[r * cols + j];
                        }
                    }
                }
            }
            Op::Gather(a, idx) => {
                if let Some(d) = self.acc(g, *a) {
                    for (e, &r) in idx.iter().enumerate() {
                        for j in 0..cols {
                            d[r * cols + j] += gi[e * cols + j];
                        }
                    }
                }
            }
            Op::SegmentSum(a, seg) => {
                if let Some(d) = self.acc(g, *a) {
                    for (e, &s) in seg.iter().enumerate() {
                        for j in 0..cols {
                            d[e * cols + j] += gi[s * cols + j];
                        }
                    }
                }
            }
            Op::SegmentSoftmax(a, seg) => {
                let y = &node.value;
                let n = seg.iter().max().map_or(0, |m| m + 1);
                let mut dot = vec![T::zero(); n * cols];
                for (e, &s) in seg.iter().enumerate() {
                    for j in 0..cols {
                        dot[s * cols + j] += gi[e * cols + j] * y[e * cols + j];
                    }
                }
                if let Some(d) = self.acc(g, *a) {
                    for (e, &s) in seg.iter().enumerate() {
                        for j in 0..cols {
                            d[e * cols + j] += y[e * cols + j] * (gi[e * cols + j] - dot[s * cols + j]);
                        }
                    }
                }
            }
            Op::HeadDot(a, b, heads) => {
                let c = self.shape(*a).1;
                let w = c / heads;
                let (av, bv) = (self.value(*a), self.value(*b));
                for (v, other) in [(*a, &bv), (*b, &av)] {
                    if let Some(d) = self.acc(g, v) {
                        for e in 0..rows {
                            for j in 0..c {
                                d[e * c + j] += gi[e * heads + j / w] * other[e * c + j];
                            }
                        }
                    }
                }
            }
            Op::HeadScale(v, alpha, heads) => {
                let heads = *heads;
                let w = cols / heads;
                let (vv, av) = (self.value(*v), self.value(*alpha));
                if let Some(d) = self.acc(g, *v) {
                    for i in 0..rows * cols {
                        d[i] += gi[i] * av[(i / cols) * heads + (i % cols) / w];
                    }
                }
                if let Some(d) = self.acc(g, *alpha) {
                    for i in 0..rows * cols {
                        d[(i / cols) * heads + (i % cols) / w] += gi[i] * vv[i];
                    }
                }
            }
            Op::SumRows(a) => {
                if let Some(d) = self.acc(g, *a) {
                    for row in d.chunks_mut(cols) {
                        for (d, &x) in row.iter_mut().zip(gi) {
                            *d += x;
                        }
                    }
                }
            }
            Op::MaxRows(a, arg) => {
                if let Some(d) = self.acc(g, *a) {
                    for j in 0..cols {
                        d[arg[j] * cols + j] += gi[j];
                    }
                }
            }
            Op::CrossEntropy(a, mask, target) => {
                let lp = masked_log_softmax(self.value(*a), mask);
                let target = *target;
                if let Some(d) = self.acc(g, *a) {
                    for j in 0..d.len() {
                        if mask[j] {
                            let p = lp[j].exp();
                            let y = if j == target { T::one() } else { T::zero() };
                            d[j] += gi[0] * (p - y);
                        }
                    }
                }
            }
            Op::BceLogits(z, y) => {
                let zv = self.value(*z);
                if let Some(d) = self.acc(g, *z) {
                    for j in 0..d.len() {
                        d[j] += gi[0] * (sigmoid(zv[j]) - y[j]);
                    }
                }
            }
        }
    }
}
