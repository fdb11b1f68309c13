use ndarray::{s, Array2, Axis, Zip};

use crate::{Result, Scalar, TensorError};

/// Handle to a node recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(pub(crate) usize);

impl Var {
    pub fn id(self) -> usize {
        self.0
    }
}

/// Owned snapshot of a node: its value, gradient (if any) and tape position.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T: Scalar> {
    pub value: Array2<T>,
    pub grad: Option<Array2<T>>,
    pub node_id: Option<usize>,
}

impl<T: Scalar> Tensor<T> {
    pub fn shape(&self) -> [usize; 2] {
        [self.value.nrows(), self.value.ncols()]
    }
}

#[derive(Debug, Clone)]
pub(crate) enum Op<T: Scalar> {
    Leaf,
    MatMul {
        a: usize,
        b: usize,
    },
    Add {
        a: usize,
        b: usize,
    },
    Sub {
        a: usize,
        b: usize,
    },
    Mul {
        a: usize,
        b: usize,
    },
    /// `scale * x + shift`; only the scale matters for the gradient.
    Affine {
        x: usize,
        scale: T,
    },
    Concat {
        parts: Vec<usize>,
    },
    SliceCols {
        x: usize,
        start: usize,
    },
    GatherRows {
        table: usize,
        rows: Vec<usize>,
    },
    Sigmoid(usize),
    Tanh(usize),
    Softplus(usize),
    Softmax(usize),
    CosineRows {
        a: usize,
        b: usize,
        eps: T,
    },
    PowerNormalize {
        w: usize,
        gamma: usize,
    },
    CircularConv {
        w: usize,
        kernel: usize,
    },
    ColumnMix {
        coeffs: usize,
        terms: Vec<(usize, usize)>,
    },
    EraseAdd {
        memory: usize,
        weights: usize,
        col: usize,
        erase: usize,
        add: usize,
    },
    Sum(usize),
    CrossEntropy {
        logits: usize,
        targets: Vec<usize>,
        weights: Vec<T>,
        probs: Array2<T>,
    },
    BceWithLogits {
        logits: usize,
        targets: Array2<T>,
        scale: T,
    },
}

#[derive(Debug, Clone)]
pub(crate) struct Node<T: Scalar> {
    pub(crate) value: Array2<T>,
    pub(crate) op: Op<T>,
    pub(crate) requires_grad: bool,
    pub(crate) grad: Option<Array2<T>>,
}

/// Define-by-run record of every operation in one forward pass.
///
/// Nodes are appended in execution order, so parents always precede their
/// children. A tape is meant to be rebuilt for every training step.
#[derive(Debug, Clone, Default)]
pub struct Tape<T: Scalar = f64> {
    pub(crate) nodes: Vec<Node<T>>,
    differentiated: bool,
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new(), differentiated: false }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Records a value that never receives a gradient.
    pub fn constant(&mut self, value: Array2<T>) -> Result<Var> {
        check_finite("constant", &value)?;
        Ok(self.push_raw(value, Op::Leaf, false))
    }

    /// Records a trainable leaf; its gradient is populated by [`Tape::backward`].
    pub fn param(&mut self, value: Array2<T>) -> Result<Var> {
        check_finite("param", &value)?;
        Ok(self.push_raw(value, Op::Leaf, true))
    }

    pub fn zeros(&mut self, rows: usize, cols: usize) -> Var {
        self.push_raw(Array2::zeros((rows, cols)), Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Array2<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> [usize; 2] {
        let value = &self.nodes[v.0].value;
        [value.nrows(), value.ncols()]
    }

    /// Scalar value of a `1 × 1` node.
    pub fn scalar(&self, v: Var) -> T {
        self.nodes[v.0].value[[0, 0]]
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn grad(&self, v: Var) -> Option<&Array2<T>> {
        self.nodes[v.0].grad.as_ref()
    }

    pub fn tensor(&self, v: Var) -> Tensor<T> {
        let node = &self.nodes[v.0];
        Tensor { value: node.value.clone(), grad: node.grad.clone(), node_id: Some(v.0) }
    }

    /// Clears all gradients so that [`Tape::backward`] may run again.
    pub fn zero_grad(&mut self) {
        for node in &mut self.nodes {
            node.grad = None;
        }
        self.differentiated = false;
    }

    pub(crate) fn check(&self, v: Var) -> Result<()> {
        if v.0 < self.nodes.len() {
            Ok(())
        } else {
            Err(TensorError::UnknownVar(v.0))
        }
    }

    pub(crate) fn push_raw(&mut self, value: Array2<T>, op: Op<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node { value, op, requires_grad, grad: None });
        Var(self.nodes.len() - 1)
    }

    /// Records `value` produced by `op`, inheriting gradient tracking from `parents`.
    pub(crate) fn push_op(&mut self, value: Array2<T>, op: Op<T>, parents: &[usize]) -> Var {
        let requires_grad = parents.iter().any(|&p| self.nodes[p].requires_grad);
        self.push_raw(value, op, requires_grad)
    }

    /// Reverse sweep from a scalar `loss`, populating `grad` on every node the
    /// loss depends on through gradient-tracking parents.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        self.check(loss)?;
        if self.differentiated {
            return Err(TensorError::BackwardTwice);
        }
        let shape = self.shape(loss);
        if shape != [1, 1] {
            return Err(TensorError::NonScalarLoss(shape.to_vec()));
        }
        self.differentiated = true;

        let mut grads: Vec<Option<Array2<T>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Array2::from_elem((1, 1), T::one()));

        for id in (0..=loss.0).rev() {
            let Some(g) = grads[id].take() else { continue };
            if !self.nodes[id].requires_grad {
                continue;
            }
            self.propagate(id, &g, &mut grads);
            self.nodes[id].grad = Some(g);
        }
        Ok(())
    }

    fn propagate(&self, id: usize, g: &Array2<T>, grads: &mut [Option<Array2<T>>]) {
        let nodes = &self.nodes;
        let val = |i: usize| &nodes[i].value;
        let mut acc = |i: usize, contribution: Array2<T>| {
            if !nodes[i].requires_grad {
                return;
            }
            match &mut grads[i] {
                Some(existing) => *existing += &contribution,
                slot @ None => *slot = Some(contribution),
            }
        };
        let wants = |i: usize| nodes[i].requires_grad;
        let out = &nodes[id].value;

        match &nodes[id].op {
            Op::Leaf => {}
            Op::MatMul { a, b } => {
                if wants(*a) {
                    acc(*a, g.dot(&val(*b).t()));
                }
                if wants(*b) {
                    acc(*b, val(*a).t().dot(g));
                }
            }
            Op::Add { a, b } => {
                acc(*a, reduce_to(g, val(*a)));
                acc(*b, reduce_to(g, val(*b)));
            }
            Op::Sub { a, b } => {
                acc(*a, reduce_to(g, val(*a)));
                if wants(*b) {
                    acc(*b, reduce_to(g, val(*b)).mapv(|x| -x));
                }
            }
            Op::Mul { a, b } => {
                if wants(*a) {
                    acc(*a, reduce_to(&(g * val(*b)), val(*a)));
                }
                if wants(*b) {
                    acc(*b, reduce_to(&(g * val(*a)), val(*b)));
                }
            }
            Op::Affine { x, scale } => acc(*x, g * *scale),
            Op::Concat { parts } => {
                let mut start = 0;
                for &p in parts {
                    let width = val(p).ncols();
                    if wants(p) {
                        acc(p, g.slice(s![.., start..start + width]).to_owned());
                    }
                    start += width;
                }
            }
            Op::SliceCols { x, start } => {
                let mut dx = Array2::zeros(val(*x).raw_dim());
                dx.slice_mut(s![.., *start..*start + g.ncols()]).assign(g);
                acc(*x, dx);
            }
            Op::GatherRows { table, rows } => {
                let mut dt = Array2::zeros(val(*table).raw_dim());
                for (i, &r) in rows.iter().enumerate() {
                    let mut row = dt.row_mut(r);
                    row += &g.row(i);
                }
                acc(*table, dt);
            }
            Op::Sigmoid(x) => acc(*x, Zip::from(g).and(out).map_collect(|&g, &y| g * y * (T::one() - y))),
            Op::Tanh(x) => acc(*x, Zip::from(g).and(out).map_collect(|&g, &y| g * (T::one() - y * y))),
            Op::Softplus(x) => acc(*x, Zip::from(g).and(val(*x)).map_collect(|&g, &x| g * sigmoid(x))),
            Op::Softmax(x) => {
                let mut dx = Array2::zeros(out.raw_dim());
                for ((mut dr, gr), yr) in dx.rows_mut().into_iter().zip(g.rows()).zip(out.rows()) {
                    let dot: T = gr.iter().zip(yr.iter()).map(|(&g, &y)| g * y).sum();
                    Zip::from(&mut dr).and(&gr).and(&yr).for_each(|d, &g, &y| *d = y * (g - dot));
                }
                acc(*x, dx);
            }
            Op::CosineRows { a, b, eps } => {
                let (av, bv) = (val(*a), val(*b));
                let mut da = Array2::zeros(av.raw_dim());
                let mut db = Array2::zeros(bv.raw_dim());
                for i in 0..av.nrows() {
                    let (ar, br) = (av.row(i), bv.row(i));
                    let na = norm(ar.iter().copied());
                    let nb = norm(br.iter().copied());
                    let dot: T = ar.iter().zip(br.iter()).map(|(&x, &y)| x * y).sum();
                    let denom = na * nb + *eps;
                    let gi = g[[i, 0]];
                    for j in 0..av.ncols() {
                        let a_hat = if na > T::zero() { ar[j] / na } else { T::zero() };
                        let b_hat = if nb > T::zero() { br[j] / nb } else { T::zero() };
                        da[[i, j]] = gi * (br[j] / denom - dot * nb * a_hat / (denom * denom));
                        db[[i, j]] = gi * (ar[j] / denom - dot * na * b_hat / (denom * denom));
                    }
                }
                acc(*a, da);
                acc(*b, db);
            }
            Op::PowerNormalize { w, gamma } => {
                let (wv, gv) = (val(*w), val(*gamma));
                let mut dw = Array2::zeros(wv.raw_dim());
                let mut dg = Array2::zeros(gv.raw_dim());
                for i in 0..wv.nrows() {
                    let gam = gv[[i, 0]];
                    let powered: Vec<T> = wv.row(i).iter().map(|&x| x.powf(gam)).collect();
                    let total: T = powered.iter().copied().sum();
                    let dot: T = g.row(i).iter().zip(out.row(i).iter()).map(|(&g, &y)| g * y).sum();
                    let mut dgam = T::zero();
                    for j in 0..wv.ncols() {
                        let du = (g[[i, j]] - dot) / total;
                        let x = wv[[i, j]];
                        dw[[i, j]] = du * gam * x.powf(gam - T::one());
                        if x > T::zero() {
                            dgam += du * powered[j] * x.ln();
                        }
                    }
                    dg[[i, 0]] = dgam;
                }
                acc(*w, dw);
                acc(*gamma, dg);
            }
            Op::CircularConv { w, kernel } => {
                let (wv, kv) = (val(*w), val(*kernel));
                let n = wv.ncols() as isize;
                let radius = (kv.ncols() / 2) as isize;
                let mut dw = Array2::zeros(wv.raw_dim());
                let mut dk = Array2::zeros(kv.raw_dim());
                for r in 0..wv.nrows() {
                    for i in 0..n {
                        let gi = g[[r, i as usize]];
                        for (k, offset) in (-radius..=radius).enumerate() {
                            let src = (i - offset).rem_euclid(n) as usize;
                            dw[[r, src]] += gi * kv[[r, k]];
                            dk[[r, k]] += gi * wv[[r, src]];
                        }
                    }
                }
                acc(*w, dw);
                acc(*kernel, dk);
            }
            Op::ColumnMix { coeffs, terms } => {
                let cv = val(*coeffs);
                let mut dc = if wants(*coeffs) { Some(Array2::zeros(cv.raw_dim())) } else { None };
                for &(col, term) in terms {
                    let c = cv.slice(s![.., col..col + 1]);
                    if wants(term) {
                        acc(term, g * &c);
                    }
                    if let Some(dc) = dc.as_mut() {
                        let rowdots = (g * val(term)).sum_axis(Axis(1));
                        let mut dcol = dc.column_mut(col);
                        dcol += &rowdots;
                    }
                }
                if let Some(dc) = dc {
                    acc(*coeffs, dc);
                }
            }
            Op::EraseAdd { memory, weights, col, erase, add } => {
                let (m, e, a) = (val(*memory), val(*erase), val(*add));
                let wc = val(*weights).slice(s![.., *col..*col + 1]).to_owned();
                if wants(*memory) {
                    let keep = (&wc * e).mapv(|x| T::one() - x);
                    acc(*memory, g * &keep);
                }
                if wants(*erase) {
                    acc(*erase, (g * m * &wc).mapv(|x| -x));
                }
                if wants(*add) {
                    acc(*add, g * &wc);
                }
                if wants(*weights) {
                    let inner = a - &(m * e);
                    let rowdots = (g * &inner).sum_axis(Axis(1));
                    let mut dw = Array2::zeros(val(*weights).raw_dim());
                    dw.column_mut(*col).assign(&rowdots);
                    acc(*weights, dw);
                }
            }
            Op::Sum(x) => acc(*x, Array2::from_elem(val(*x).raw_dim(), g[[0, 0]])),
            Op::CrossEntropy { logits, targets, weights, probs } => {
                let scale = g[[0, 0]];
                let mut dz = probs.clone();
                for (i, (&t, &w)) in targets.iter().zip(weights).enumerate() {
                    dz[[i, t]] -= T::one();
                    dz.row_mut(i).mapv_inplace(|x| x * w * scale);
                }
                acc(*logits, dz);
            }
            Op::BceWithLogits { logits, targets, scale } => {
                let s = g[[0, 0]] * *scale;
                acc(*logits, Zip::from(val(*logits)).and(targets).map_collect(|&z, &y| s * (sigmoid(z) - y)));
            }
        }
    }
}

/// Sums a broadcast gradient back down to the shape of the operand it came from.
fn reduce_to<T: Scalar>(g: &Array2<T>, operand: &Array2<T>) -> Array2<T> {
    let mut out = g.clone();
    if operand.nrows() == 1 && out.nrows() != 1 {
        out = out.sum_axis(Axis(0)).insert_axis(Axis(0));
    }
    if operand.ncols() == 1 && out.ncols() != 1 {
        out = out.sum_axis(Axis(1)).insert_axis(Axis(1));
    }
    out
}

pub(crate) fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

pub(crate) fn norm<T: Scalar>(xs: impl Iterator<Item = T>) -> T {
    xs.map(|x| x * x).sum::<T>().sqrt()
}

pub(crate) fn check_finite<T: Scalar>(op: &'static str, value: &Array2<T>) -> Result<()> {
    if value.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(TensorError::NonFinite { op })
    }
}
