//! Forward operations. Every method validates shapes, computes the value and
//! records the node; the matching gradient lives in `Tape::propagate`.

use ndarray::{concatenate, s, Array2, Axis, Zip};

use crate::tape::{check_finite, norm, sigmoid, Op};
use crate::{Result, Scalar, Tape, TensorError, Var};

fn mismatch(op: &'static str, lhs: [usize; 2], rhs: [usize; 2]) -> TensorError {
    TensorError::ShapeMismatch { op, lhs: lhs.to_vec(), rhs: rhs.to_vec() }
}

fn invalid(op: &'static str, reason: impl Into<String>) -> TensorError {
    TensorError::InvalidArgument { op, reason: reason.into() }
}

/// Shape of a 2-D broadcast between `a` and `b`; each axis must match or be 1.
fn broadcast(a: [usize; 2], b: [usize; 2]) -> Option<[usize; 2]> {
    let axis = |x: usize, y: usize| match (x, y) {
        _ if x == y => Some(x),
        (1, y) => Some(y),
        (x, 1) => Some(x),
        _ => None,
    };
    Some([axis(a[0], b[0])?, axis(a[1], b[1])?])
}

impl<T: Scalar> Tape<T> {
    fn binary_shapes(&self, op: &'static str, a: Var, b: Var) -> Result<[usize; 2]> {
        self.check(a)?;
        self.check(b)?;
        let (sa, sb) = (self.shape(a), self.shape(b));
        broadcast(sa, sb).ok_or_else(|| mismatch(op, sa, sb))
    }

    fn broadcast_value(&self, v: Var, shape: [usize; 2]) -> ndarray::ArrayView2<'_, T> {
        self.value(v).broadcast((shape[0], shape[1])).expect("shape checked by binary_shapes")
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check(a)?;
        self.check(b)?;
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa[1] != sb[0] {
            return Err(mismatch("matmul", sa, sb));
        }
        let value = self.value(a).dot(self.value(b));
        Ok(self.push_op(value, Op::MatMul { a: a.0, b: b.0 }, &[a.0, b.0]))
    }

    /// Element-wise sum with 2-D broadcasting (e.g. `B × n` plus a `1 × n` bias).
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let shape = self.binary_shapes("add", a, b)?;
        let value = &self.broadcast_value(a, shape) + &self.broadcast_value(b, shape);
        Ok(self.push_op(value, Op::Add { a: a.0, b: b.0 }, &[a.0, b.0]))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let shape = self.binary_shapes("sub", a, b)?;
        let value = &self.broadcast_value(a, shape) - &self.broadcast_value(b, shape);
        Ok(self.push_op(value, Op::Sub { a: a.0, b: b.0 }, &[a.0, b.0]))
    }

    /// Element-wise (Hadamard) product with 2-D broadcasting.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let shape = self.binary_shapes("mul", a, b)?;
        let value = &self.broadcast_value(a, shape) * &self.broadcast_value(b, shape);
        Ok(self.push_op(value, Op::Mul { a: a.0, b: b.0 }, &[a.0, b.0]))
    }

    /// `scale * x + shift`.
    pub fn affine(&mut self, x: Var, scale: T, shift: T) -> Result<Var> {
        self.check(x)?;
        let value = self.value(x).mapv(|v| scale * v + shift);
        Ok(self.push_op(value, Op::Affine { x: x.0, scale }, &[x.0]))
    }

    pub fn scale(&mut self, x: Var, factor: T) -> Result<Var> {
        self.affine(x, factor, T::zero())
    }

    /// `1 - x`.
    pub fn one_minus(&mut self, x: Var) -> Result<Var> {
        self.affine(x, -T::one(), T::one())
    }

    /// Concatenates along columns; all parts must have the same row count.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts.first().ok_or_else(|| invalid("concat", "no inputs"))?;
        self.check(first)?;
        let rows = self.shape(first)[0];
        for &p in parts {
            self.check(p)?;
            if self.shape(p)[0] != rows {
                return Err(mismatch("concat", self.shape(first), self.shape(p)));
            }
        }
        let views: Vec<_> = parts.iter().map(|&p| self.value(p).view()).collect();
        let value = concatenate(Axis(1), &views).expect("row counts checked");
        let ids: Vec<usize> = parts.iter().map(|p| p.0).collect();
        Ok(self.push_op(value, Op::Concat { parts: ids.clone() }, &ids))
    }

    /// Columns `start .. start + width` of `x`.
    pub fn slice_cols(&mut self, x: Var, start: usize, width: usize) -> Result<Var> {
        self.check(x)?;
        let shape = self.shape(x);
        if start + width > shape[1] || width == 0 {
            return Err(invalid(
                "slice_cols",
                format!("columns {start}..{} out of range for {shape:?}", start + width),
            ));
        }
        let value = self.value(x).slice(s![.., start..start + width]).to_owned();
        Ok(self.push_op(value, Op::SliceCols { x: x.0, start }, &[x.0]))
    }

    /// Row-index gather: output row `i` is `table[rows[i]]`.
    pub fn gather_rows(&mut self, table: Var, rows: &[usize]) -> Result<Var> {
        self.check(table)?;
        let shape = self.shape(table);
        if let Some(&bad) = rows.iter().find(|&&r| r >= shape[0]) {
            return Err(invalid("gather_rows", format!("row {bad} out of range for {shape:?}")));
        }
        if rows.is_empty() {
            return Err(invalid("gather_rows", "no rows selected"));
        }
        let value = self.value(table).select(Axis(0), rows);
        let op = Op::GatherRows { table: table.0, rows: rows.to_vec() };
        Ok(self.push_op(value, op, &[table.0]))
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var> {
        self.check(x)?;
        let value = self.value(x).mapv(sigmoid);
        Ok(self.push_op(value, Op::Sigmoid(x.0), &[x.0]))
    }

    pub fn tanh(&mut self, x: Var) -> Result<Var> {
        self.check(x)?;
        let value = self.value(x).mapv(|v| v.tanh());
        Ok(self.push_op(value, Op::Tanh(x.0), &[x.0]))
    }

    /// `ln(1 + e^x)`, computed without overflow.
    pub fn softplus(&mut self, x: Var) -> Result<Var> {
        self.check(x)?;
        let value = self.value(x).mapv(|v| v.max(T::zero()) + (-v.abs()).exp().ln_1p());
        Ok(self.push_op(value, Op::Softplus(x.0), &[x.0]))
    }

    /// Row-wise softmax with max subtraction.
    pub fn softmax(&mut self, x: Var) -> Result<Var> {
        self.check(x)?;
        check_finite("softmax", self.value(x))?;
        let mut value = self.value(x).clone();
        for mut row in value.rows_mut() {
            let max = row.fold(T::neg_infinity(), |m, &v| m.max(v));
            row.mapv_inplace(|v| (v - max).exp());
            let total: T = row.sum();
            row.mapv_inplace(|v| v / total);
        }
        Ok(self.push_op(value, Op::Softmax(x.0), &[x.0]))
    }

    /// Row-wise cosine similarity `a·b / (|a||b| + eps)`, producing a `B × 1` column.
    pub fn cosine_rows(&mut self, a: Var, b: Var, eps: T) -> Result<Var> {
        self.check(a)?;
        self.check(b)?;
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(mismatch("cosine_rows", sa, sb));
        }
        check_finite("cosine_rows", self.value(a))?;
        check_finite("cosine_rows", self.value(b))?;
        let (av, bv) = (self.value(a), self.value(b));
        let value = Array2::from_shape_fn((sa[0], 1), |(i, _)| {
            let (ar, br) = (av.row(i), bv.row(i));
            let dot: T = ar.iter().zip(br.iter()).map(|(&x, &y)| x * y).sum();
            dot / (norm(ar.iter().copied()) * norm(br.iter().copied()) + eps)
        });
        let op = Op::CosineRows { a: a.0, b: b.0, eps };
        Ok(self.push_op(value, op, &[a.0, b.0]))
    }

    /// Sharpening: row `i` becomes `w_i^γ_i / Σ_j w_ij^γ_i` for a `B × 1` exponent column.
    pub fn power_normalize(&mut self, w: Var, gamma: Var) -> Result<Var> {
        self.check(w)?;
        self.check(gamma)?;
        let (sw, sg) = (self.shape(w), self.shape(gamma));
        if sg != [sw[0], 1] {
            return Err(mismatch("power_normalize", sw, sg));
        }
        check_finite("power_normalize", self.value(w))?;
        check_finite("power_normalize", self.value(gamma))?;
        if self.value(w).iter().any(|&x| x < T::zero()) {
            return Err(invalid("power_normalize", "negative weight"));
        }
        let mut value = self.value(w).clone();
        for (mut row, &gam) in value.rows_mut().into_iter().zip(self.value(gamma).iter()) {
            row.mapv_inplace(|x| x.powf(gam));
            let total: T = row.sum();
            if !total.is_finite() || total <= T::zero() {
                return Err(invalid("power_normalize", "row sums to zero"));
            }
            row.mapv_inplace(|x| x / total);
        }
        let op = Op::PowerNormalize { w: w.0, gamma: gamma.0 };
        Ok(self.push_op(value, op, &[w.0, gamma.0]))
    }

    /// Circular convolution of each row of `w` (`B × N`) with a per-row shift
    /// kernel (`B × (2r+1)`, column `k` weighting shift `k - r`):
    /// `out[i] = Σ_k kernel[k] · w[(i - (k - r)) mod N]`.
    pub fn circular_conv(&mut self, w: Var, kernel: Var) -> Result<Var> {
        self.check(w)?;
        self.check(kernel)?;
        let (sw, sk) = (self.shape(w), self.shape(kernel));
        if sk[0] != sw[0] || sk[1] % 2 == 0 || sk[1] > sw[1] {
            return Err(mismatch("circular_conv", sw, sk));
        }
        let (wv, kv) = (self.value(w), self.value(kernel));
        let n = sw[1] as isize;
        let radius = (sk[1] / 2) as isize;
        let value = Array2::from_shape_fn((sw[0], sw[1]), |(r, i)| {
            (-radius..=radius)
                .enumerate()
                .map(|(k, offset)| kv[[r, k]] * wv[[r, (i as isize - offset).rem_euclid(n) as usize]])
                .sum()
        });
        let op = Op::CircularConv { w: w.0, kernel: kernel.0 };
        Ok(self.push_op(value, op, &[w.0, kernel.0]))
    }

    /// `Σ_t coeffs[:, col_t] ⊙ x_t`: a per-row weighted sum of same-shape terms,
    /// with weights taken from columns of `coeffs`.
    pub fn column_mix(&mut self, coeffs: Var, terms: &[(usize, Var)]) -> Result<Var> {
        self.check(coeffs)?;
        let sc = self.shape(coeffs);
        let &(_, first) = terms.first().ok_or_else(|| invalid("column_mix", "no terms"))?;
        self.check(first)?;
        let shape = self.shape(first);
        if shape[0] != sc[0] {
            return Err(mismatch("column_mix", sc, shape));
        }
        let mut value = Array2::zeros((shape[0], shape[1]));
        for &(col, term) in terms {
            self.check(term)?;
            if self.shape(term) != shape {
                return Err(mismatch("column_mix", shape, self.shape(term)));
            }
            if col >= sc[1] {
                return Err(invalid("column_mix", format!("column {col} out of range for {sc:?}")));
            }
            let c = self.value(coeffs).slice(s![.., col..col + 1]);
            Zip::from(&mut value).and(self.value(term)).and_broadcast(&c).for_each(|o, &x, &c| *o += c * x);
        }
        let ids: Vec<usize> = std::iter::once(coeffs.0).chain(terms.iter().map(|t| t.1 .0)).collect();
        let op = Op::ColumnMix { coeffs: coeffs.0, terms: terms.iter().map(|&(c, v)| (c, v.0)).collect() };
        Ok(self.push_op(value, op, &ids))
    }

    /// Erase/add write to one memory row: `m ⊙ (1 - w_col e) + w_col a`, where
    /// `w_col = weights[:, col]` is the write weight this row receives.
    pub fn erase_add(&mut self, memory: Var, weights: Var, col: usize, erase: Var, add: Var) -> Result<Var> {
        for v in [memory, weights, erase, add] {
            self.check(v)?;
        }
        let sm = self.shape(memory);
        for v in [erase, add] {
            if self.shape(v) != sm {
                return Err(mismatch("erase_add", sm, self.shape(v)));
            }
        }
        let sw = self.shape(weights);
        if sw[0] != sm[0] || col >= sw[1] {
            return Err(mismatch("erase_add", sm, sw));
        }
        let wc = self.value(weights).slice(s![.., col..col + 1]);
        let mut value = self.value(memory).clone();
        Zip::from(&mut value)
            .and(self.value(erase))
            .and(self.value(add))
            .and_broadcast(&wc)
            .for_each(|m, &e, &a, &w| *m = *m * (T::one() - w * e) + w * a);
        let op = Op::EraseAdd { memory: memory.0, weights: weights.0, col, erase: erase.0, add: add.0 };
        Ok(self.push_op(value, op, &[memory.0, weights.0, erase.0, add.0]))
    }

    /// Sum of all entries as a `1 × 1` node.
    pub fn sum(&mut self, x: Var) -> Var {
        let value = Array2::from_elem((1, 1), self.value(x).sum());
        self.push_op(value, Op::Sum(x.0), &[x.0])
    }

    /// `Σ_i weights[i] · -ln softmax(logits_i)[targets[i]]`.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[usize], weights: &[T]) -> Result<Var> {
        self.check(logits)?;
        let shape = self.shape(logits);
        if targets.len() != shape[0] || weights.len() != shape[0] {
            return Err(mismatch("cross_entropy", shape, [targets.len(), weights.len()]));
        }
        if let Some(&bad) = targets.iter().find(|&&t| t >= shape[1]) {
            return Err(invalid("cross_entropy", format!("class {bad} out of range")));
        }
        check_finite("cross_entropy", self.value(logits))?;
        let mut probs = self.value(logits).clone();
        let mut loss = T::zero();
        for ((mut row, &t), &w) in probs.rows_mut().into_iter().zip(targets).zip(weights) {
            let max = row.fold(T::neg_infinity(), |m, &v| m.max(v));
            let log_total = row.iter().map(|&v| (v - max).exp()).sum::<T>().ln();
            loss += w * (log_total + max - row[t]);
            row.mapv_inplace(|v| (v - max - log_total).exp());
        }
        let op = Op::CrossEntropy { logits: logits.0, targets: targets.to_vec(), weights: weights.to_vec(), probs };
        Ok(self.push_op(Array2::from_elem((1, 1), loss), op, &[logits.0]))
    }

    /// `scale · Σ BCE(sigmoid(logits), targets)`, evaluated from logits for stability.
    pub fn bce_with_logits(&mut self, logits: Var, targets: &Array2<T>, scale: T) -> Result<Var> {
        self.check(logits)?;
        let shape = self.shape(logits);
        if targets.dim() != (shape[0], shape[1]) {
            return Err(mismatch("bce_with_logits", shape, [targets.nrows(), targets.ncols()]));
        }
        check_finite("bce_with_logits", self.value(logits))?;
        let loss: T = Zip::from(self.value(logits))
            .and(targets)
            .fold(T::zero(), |acc, &z, &y| acc + z.max(T::zero()) - z * y + (-z.abs()).exp().ln_1p());
        let op = Op::BceWithLogits { logits: logits.0, targets: targets.clone(), scale };
        Ok(self.push_op(Array2::from_elem((1, 1), loss * scale), op, &[logits.0]))
    }
}
