//! The recording tape and its primitives.

use super::gauss::{gelu_with_slope, normal_cdf};
use super::gemm::{gemm, View, ViewMut};
use super::params::{Gradients, ParameterStore};
use super::spectral;
use super::{shape_err, AutodiffError, Result, Tensor};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

enum Value {
    Owned(Tensor),
    Param(usize),
}

enum Op {
    Const,
    Param,
    Affine {
        x: Var,
        w: Var,
        b: Option<Var>,
    },
    ChannelAffine {
        x: Var,
        w: Var,
        b: Option<Var>,
    },
    Gelu {
        x: Var,
        slope: Vec<f64>,
    },
    Relu {
        x: Var,
    },
    Add {
        a: Var,
        b: Var,
    },
    Scale {
        x: Var,
        alpha: f64,
    },
    Rdft {
        x: Var,
        modes: usize,
    },
    Irdft {
        x: Var,
        modes: usize,
    },
    ModeMix {
        x: Var,
        r: Var,
    },
    MatmulNt {
        a: Var,
        b: Var,
    },
    AddScalar {
        x: Var,
        s: Var,
    },
    Mask {
        x: Var,
        mask: Vec<f64>,
    },
    Reshape {
        x: Var,
    },
    PadRight {
        x: Var,
        pad: usize,
    },
    CropRight {
        x: Var,
        keep: usize,
    },
    SumSquares {
        x: Var,
    },
    RelativeL2 {
        pred: Var,
        target: Vec<f64>,
        diff_norm: Vec<f64>,
        target_norm: Vec<f64>,
    },
}

struct Node {
    value: Value,
    op: Op,
    needs_grad: bool,
}

/// Records primitives in execution order; [`Tape::backward`] replays them in
/// reverse. Parameters are read in place from the store the tape borrows.
pub struct Tape<'a> {
    params: &'a ParameterStore,
    nodes: Vec<Node>,
    param_vars: Vec<Option<Var>>,
    consumed: bool,
}

static NO_PARAMS: ParameterStore = ParameterStore::new();

/// `x * Phi(x)` with the exact Gaussian CDF.
pub fn gelu_scalar(x: f64) -> f64 {
    x * normal_cdf(x)
}

impl<'a> Tape<'a> {
    pub fn new(params: &'a ParameterStore) -> Self {
        Self {
            params,
            nodes: Vec::new(),
            param_vars: vec![None; params.len()],
            consumed: false,
        }
    }

    /// A tape with no parameters, for constant-only graphs.
    pub fn detached() -> Tape<'static> {
        Tape::new(&NO_PARAMS)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        match &self.nodes[v.0].value {
            Value::Owned(t) => t,
            Value::Param(i) => self.params.by_index(*i),
        }
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.value(v).shape()
    }

    fn ng(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value: Value::Owned(value),
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Const, false)
    }

    /// Registers the store entry `idx` (once) and returns its handle.
    pub fn param_at(&mut self, idx: usize) -> Var {
        if let Some(v) = self.param_vars[idx] {
            return v;
        }
        self.nodes.push(Node {
            value: Value::Param(idx),
            op: Op::Param,
            needs_grad: true,
        });
        let v = Var(self.nodes.len() - 1);
        self.param_vars[idx] = Some(v);
        v
    }

    pub fn param(&mut self, name: &str) -> Result<Var> {
        let idx = self
            .params
            .index_of(name)
            .ok_or_else(|| AutodiffError::UnknownParameter(name.to_string()))?;
        Ok(self.param_at(idx))
    }

    fn real(&self, v: Var, what: &str) -> Result<&Tensor> {
        let t = self.value(v);
        if t.is_complex() {
            return shape_err(format!("{what}: expected a real tensor"));
        }
        Ok(t)
    }

    fn complex(&self, v: Var, what: &str) -> Result<&Tensor> {
        let t = self.value(v);
        if !t.is_complex() {
            return shape_err(format!("{what}: expected a complex tensor"));
        }
        Ok(t)
    }

    fn bias_len(&self, b: Option<Var>, expected: usize, what: &str) -> Result<()> {
        if let Some(b) = b {
            let bt = self.real(b, what)?;
            if bt.shape() != [expected] {
                return shape_err(format!("{what}: bias shape {:?}, expected [{expected}]", bt.shape()));
            }
        }
        Ok(())
    }

    /// `x [batch, in] * w [in, out] + b [out]`.
    pub fn affine(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
        let (xt, wt) = (self.real(x, "affine")?, self.real(w, "affine")?);
        let (&[batch, fan_in], &[w_in, fan_out]) = (xt.shape(), wt.shape()) else {
            return shape_err(format!(
                "affine: expected rank-2 input and weight, got {:?} and {:?}",
                xt.shape(),
                wt.shape()
            ));
        };
        if fan_in != w_in {
            return shape_err(format!("affine: input width {fan_in} vs weight rows {w_in}"));
        }
        self.bias_len(b, fan_out, "affine")?;
        let mut out = vec![0.0; batch * fan_out];
        if let Some(b) = b {
            let bd = self.value(b).data();
            for row in out.chunks_exact_mut(fan_out) {
                row.copy_from_slice(bd);
            }
        }
        gemm(
            batch,
            fan_in,
            fan_out,
            1.0,
            View::row_major(xt.data(), fan_in),
            View::row_major(wt.data(), fan_out),
            1.0,
            ViewMut::row_major(&mut out, fan_out),
        );
        let ng = self.ng(x) || self.ng(w) || b.is_some_and(|b| self.ng(b));
        let value = Tensor::new(vec![batch, fan_out], out)?;
        Ok(self.push(value, Op::Affine { x, w, b }, ng))
    }

    /// Pointwise affine map over the channel axis: `x [batch, c_in, n]`,
    /// `w [c_in, c_out]`, `b [c_out]`, giving `[batch, c_out, n]`.
    pub fn channel_affine(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
        let (xt, wt) = (self.real(x, "channel_affine")?, self.real(w, "channel_affine")?);
        let (&[batch, c_in, n], &[w_in, c_out]) = (xt.shape(), wt.shape()) else {
            return shape_err(format!(
                "channel_affine: expected [batch, c, n] and [c_in, c_out], got {:?} and {:?}",
                xt.shape(),
                wt.shape()
            ));
        };
        if c_in != w_in {
            return shape_err(format!("channel_affine: {c_in} input channels vs weight rows {w_in}"));
        }
        self.bias_len(b, c_out, "channel_affine")?;
        let mut out = vec![0.0; batch * c_out * n];
        if let Some(b) = b {
            let bd = self.value(b).data();
            for (row, &bv) in out.chunks_exact_mut(n).zip(bd.iter().cycle()) {
                row.fill(bv);
            }
        }
        for bi in 0..batch {
            gemm(
                c_out,
                c_in,
                n,
                1.0,
                View::row_major(wt.data(), c_out).t(),
                View::at(xt.data(), bi * c_in * n, n, 1),
                1.0,
                ViewMut::at(&mut out, bi * c_out * n, n, 1),
            );
        }
        let ng = self.ng(x) || self.ng(w) || b.is_some_and(|b| self.ng(b));
        let value = Tensor::new(vec![batch, c_out, n], out)?;
        Ok(self.push(value, Op::ChannelAffine { x, w, b }, ng))
    }

    /// `0.5 x (1 + erf(x / sqrt 2))` elementwise.
    pub fn gelu(&mut self, x: Var) -> Result<Var> {
        let xt = self.real(x, "gelu")?;
        let ng = self.ng(x);
        let len = xt.numel();
        let mut out = vec![0.0; len];
        let mut slope = if ng { vec![0.0; len] } else { Vec::new() };
        if ng {
            gelu_with_slope(xt.data(), &mut out, &mut slope);
        } else {
            for (o, &v) in out.iter_mut().zip(xt.data()) {
                *o = gelu_scalar(v);
            }
        }
        let value = Tensor::new(xt.shape().to_vec(), out)?;
        Ok(self.push(value, Op::Gelu { x, slope }, ng))
    }

    /// `max(x, 0)`; the subgradient at 0 is 0.
    pub fn relu(&mut self, x: Var) -> Result<Var> {
        let xt = self.real(x, "relu")?;
        let out = xt.data().iter().map(|&v| v.max(0.0)).collect();
        let value = Tensor::new(xt.shape().to_vec(), out)?;
        let ng = self.ng(x);
        Ok(self.push(value, Op::Relu { x }, ng))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (at, bt) = (self.value(a), self.value(b));
        if at.shape() != bt.shape() || at.is_complex() != bt.is_complex() {
            return shape_err(format!("add: {:?} vs {:?}", at.shape(), bt.shape()));
        }
        let out = at.data().iter().zip(bt.data()).map(|(x, y)| x + y).collect();
        let value = Tensor::with_layout(at.shape().to_vec(), out, at.is_complex())?;
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(value, Op::Add { a, b }, ng))
    }

    pub fn scale(&mut self, x: Var, alpha: f64) -> Result<Var> {
        let xt = self.value(x);
        let out = xt.data().iter().map(|v| alpha * v).collect();
        let value = Tensor::with_layout(xt.shape().to_vec(), out, xt.is_complex())?;
        let ng = self.ng(x);
        Ok(self.push(value, Op::Scale { x, alpha }, ng))
    }

    /// Forward real DFT of `x [batch, c, n]` keeping modes `0..modes`.
    pub fn rdft_truncated(&mut self, x: Var, modes: usize) -> Result<Var> {
        let xt = self.real(x, "rdft")?;
        let &[batch, ch, n] = xt.shape() else {
            return shape_err(format!("rdft: expected [batch, c, n], got {:?}", xt.shape()));
        };
        spectral::check_modes(n, modes)?;
        let out = spectral::rdft_rows(xt.data(), batch * ch, n, modes);
        let value = Tensor::complex(vec![batch, ch, modes], out)?;
        let ng = self.ng(x);
        Ok(self.push(value, Op::Rdft { x, modes }, ng))
    }

    /// Inverse real DFT of `x [batch, c, modes]` to length `n`; missing modes
    /// are treated as zero.
    pub fn irdft(&mut self, x: Var, n: usize) -> Result<Var> {
        let xt = self.complex(x, "irdft")?;
        let &[batch, ch, modes] = xt.shape() else {
            return shape_err(format!("irdft: expected [batch, c, m], got {:?}", xt.shape()));
        };
        spectral::check_modes(n, modes)?;
        let out = spectral::irdft_rows(xt.data(), batch * ch, n, modes);
        let value = Tensor::new(vec![batch, ch, n], out)?;
        let ng = self.ng(x);
        Ok(self.push(value, Op::Irdft { x, modes }, ng))
    }

    /// Per-mode complex channel mixing: `Y[b, :, k] = R[k]^T X[b, :, k]` with
    /// `X [batch, c_in, m]` and `R [m, c_in, c_out]`.
    pub fn mode_mix(&mut self, x: Var, r: Var) -> Result<Var> {
        let (xt, rt) = (self.complex(x, "mode_mix")?, self.complex(r, "mode_mix")?);
        let (&[batch, c_in, modes], &[r_modes, r_in, c_out]) = (xt.shape(), rt.shape()) else {
            return shape_err(format!(
                "mode_mix: expected [batch, c_in, m] and [m, c_in, c_out], got {:?} and {:?}",
                xt.shape(),
                rt.shape()
            ));
        };
        if r_modes != modes || r_in != c_in {
            return shape_err(format!(
                "mode_mix: input {:?} does not conform to weights {:?}",
                xt.shape(),
                rt.shape()
            ));
        }
        let mut out = vec![0.0; batch * c_out * modes * 2];
        let (xd, rd) = (xt.data(), rt.data());
        let x_rs = 2 * c_in * modes;
        let y_rs = 2 * c_out * modes;
        for k in 0..modes {
            let xr = View::at(xd, 2 * k, x_rs, 2 * modes);
            let xi = View::at(xd, 2 * k + 1, x_rs, 2 * modes);
            let rr = View::at(rd, 2 * k * c_in * c_out, 2 * c_out, 2);
            let ri = View::at(rd, 2 * k * c_in * c_out + 1, 2 * c_out, 2);
            let (b, i, o) = (batch, c_in, c_out);
            gemm(b, i, o, 1.0, xr, rr, 0.0, ViewMut::at(&mut out, 2 * k, y_rs, 2 * modes));
            gemm(
                b,
                i,
                o,
                -1.0,
                xi,
                ri,
                1.0,
                ViewMut::at(&mut out, 2 * k, y_rs, 2 * modes),
            );
            gemm(
                b,
                i,
                o,
                1.0,
                xr,
                ri,
                0.0,
                ViewMut::at(&mut out, 2 * k + 1, y_rs, 2 * modes),
            );
            gemm(
                b,
                i,
                o,
                1.0,
                xi,
                rr,
                1.0,
                ViewMut::at(&mut out, 2 * k + 1, y_rs, 2 * modes),
            );
        }
        let value = Tensor::complex(vec![batch, c_out, modes], out)?;
        let ng = self.ng(x) || self.ng(r);
        Ok(self.push(value, Op::ModeMix { x, r }, ng))
    }

    /// `a [rows, k] * b [cols, k]^T`.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var> {
        let (at, bt) = (self.real(a, "matmul_nt")?, self.real(b, "matmul_nt")?);
        let (&[rows, k], &[cols, bk]) = (at.shape(), bt.shape()) else {
            return shape_err(format!(
                "matmul_nt: expected rank-2 operands, got {:?} and {:?}",
                at.shape(),
                bt.shape()
            ));
        };
        if k != bk {
            return shape_err(format!("matmul_nt: inner sizes {k} vs {bk}"));
        }
        let mut out = vec![0.0; rows * cols];
        gemm(
            rows,
            k,
            cols,
            1.0,
            View::row_major(at.data(), k),
            View::row_major(bt.data(), k).t(),
            0.0,
            ViewMut::row_major(&mut out, cols),
        );
        let value = Tensor::new(vec![rows, cols], out)?;
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(value, Op::MatmulNt { a, b }, ng))
    }

    /// Adds a single-element bias to every entry.
    pub fn add_scalar(&mut self, x: Var, s: Var) -> Result<Var> {
        let (xt, st) = (self.real(x, "add_scalar")?, self.real(s, "add_scalar")?);
        if st.numel() != 1 {
            return shape_err(format!("add_scalar: bias shape {:?}", st.shape()));
        }
        let sv = st.data()[0];
        let out = xt.data().iter().map(|v| v + sv).collect();
        let value = Tensor::new(xt.shape().to_vec(), out)?;
        let ng = self.ng(x) || self.ng(s);
        Ok(self.push(value, Op::AddScalar { x, s }, ng))
    }

    /// Multiplies every row along the last axis by the fixed `mask`.
    pub fn mask(&mut self, x: Var, mask: &[f64]) -> Result<Var> {
        let xt = self.real(x, "mask")?;
        let n = *xt.shape().last().unwrap_or(&0);
        if n != mask.len() {
            return shape_err(format!("mask: last axis {n} vs mask length {}", mask.len()));
        }
        let out = xt
            .data()
            .chunks_exact(n)
            .flat_map(|row| row.iter().zip(mask).map(|(v, m)| v * m))
            .collect();
        let value = Tensor::new(xt.shape().to_vec(), out)?;
        let ng = self.ng(x);
        Ok(self.push(value, Op::Mask { x, mask: mask.to_vec() }, ng))
    }

    pub fn reshape(&mut self, x: Var, shape: Vec<usize>) -> Result<Var> {
        let value = self.value(x).clone().reshaped(shape)?;
        let ng = self.ng(x);
        Ok(self.push(value, Op::Reshape { x }, ng))
    }

    /// Appends `pad` zeros along the last axis of a real tensor.
    pub fn pad_right(&mut self, x: Var, pad: usize) -> Result<Var> {
        let xt = self.real(x, "pad_right")?;
        let mut shape = xt.shape().to_vec();
        let Some(n) = shape.last().copied() else {
            return shape_err("pad_right: scalar input");
        };
        *shape.last_mut().unwrap() = n + pad;
        let mut out = Vec::with_capacity(xt.data().len() / n.max(1) * (n + pad));
        for row in xt.data().chunks_exact(n) {
            out.extend_from_slice(row);
            out.extend(std::iter::repeat_n(0.0, pad));
        }
        let value = Tensor::new(shape, out)?;
        let ng = self.ng(x);
        Ok(self.push(value, Op::PadRight { x, pad }, ng))
    }

    /// Keeps the first `keep` entries of the last axis.
    pub fn crop_right(&mut self, x: Var, keep: usize) -> Result<Var> {
        let xt = self.real(x, "crop_right")?;
        let mut shape = xt.shape().to_vec();
        let Some(n) = shape.last().copied() else {
            return shape_err("crop_right: scalar input");
        };
        if keep > n {
            return shape_err(format!("crop_right: keep {keep} exceeds length {n}"));
        }
        *shape.last_mut().unwrap() = keep;
        let out = xt
            .data()
            .chunks_exact(n)
            .flat_map(|row| row[..keep].iter().copied())
            .collect();
        let value = Tensor::new(shape, out)?;
        let ng = self.ng(x);
        Ok(self.push(value, Op::CropRight { x, keep }, ng))
    }

    /// `sum(x^2)` as a scalar.
    pub fn sum_squares(&mut self, x: Var) -> Result<Var> {
        let s = self.value(x).data().iter().map(|v| v * v).sum();
        let ng = self.ng(x);
        Ok(self.push(Tensor::scalar(s), Op::SumSquares { x }, ng))
    }

    /// Mean over the batch of `||pred_b - target_b|| / ||target_b||`.
    pub fn relative_l2_loss(&mut self, pred: Var, target: &Tensor) -> Result<Var> {
        let pt = self.real(pred, "relative_l2_loss")?;
        if pt.shape() != target.shape() || pt.shape().len() != 2 {
            return shape_err(format!(
                "relative_l2_loss: prediction {:?} vs target {:?}",
                pt.shape(),
                target.shape()
            ));
        }
        let (batch, n) = (pt.shape()[0], pt.shape()[1]);
        let mut diff_norm = Vec::with_capacity(batch);
        let mut target_norm = Vec::with_capacity(batch);
        for (b, (p, t)) in pt.data().chunks_exact(n).zip(target.data().chunks_exact(n)).enumerate() {
            let tn = t.iter().map(|v| v * v).sum::<f64>().sqrt();
            if tn == 0.0 {
                return Err(AutodiffError::DegenerateTarget { sample: b });
            }
            let dn = p.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            diff_norm.push(dn);
            target_norm.push(tn);
        }
        let loss = diff_norm.iter().zip(&target_norm).map(|(d, t)| d / t).sum::<f64>() / batch as f64;
        let ng = self.ng(pred);
        let op = Op::RelativeL2 {
            pred,
            target: target.data().to_vec(),
            diff_norm,
            target_norm,
        };
        Ok(self.push(Tensor::scalar(loss), op, ng))
    }

    /// Reverse pass from a scalar `loss`. May only be called once per tape.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients> {
        if self.consumed {
            return Err(AutodiffError::StaleTape);
        }
        let lt = self.value(loss);
        if lt.numel() != 1 || lt.is_complex() {
            return Err(AutodiffError::NonScalarLoss(lt.shape().to_vec()));
        }
        self.consumed = true;

        let mut grads: Vec<Option<Vec<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(vec![1.0]);
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            if !self.nodes[i].needs_grad {
                continue;
            }
            if let Op::Param = self.nodes[i].op {
                grads[i] = Some(g);
                continue;
            }
            self.backprop_node(i, &g, &mut grads)?;
        }

        let out = (0..self.params.len())
            .map(|idx| {
                let shape = self.params.by_index(idx);
                match self.param_vars[idx].and_then(|v| grads[v.0].take()) {
                    Some(g) => Tensor::with_layout(shape.shape().to_vec(), g, shape.is_complex()),
                    None => Ok(shape.zeros_like()),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Gradients::new(out))
    }

    fn backprop_node(&self, i: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) -> Result<()> {
        let node = &self.nodes[i];
        match &node.op {
            Op::Const | Op::Param => {}
            Op::Affine { x, w, b } => {
                let (xt, wt) = (self.value(*x), self.value(*w));
                let (batch, fan_in) = (xt.shape()[0], xt.shape()[1]);
                let fan_out = wt.shape()[1];
                if self.ng(*x) {
                    let dx = slot(grads, *x, batch * fan_in);
                    gemm(
                        batch,
                        fan_out,
                        fan_in,
                        1.0,
                        View::row_major(g, fan_out),
                        View::row_major(wt.data(), fan_out).t(),
                        1.0,
                        ViewMut::row_major(dx, fan_in),
                    );
                }
                if self.ng(*w) {
                    let dw = slot(grads, *w, fan_in * fan_out);
                    gemm(
                        fan_in,
                        batch,
                        fan_out,
                        1.0,
                        View::row_major(xt.data(), fan_in).t(),
                        View::row_major(g, fan_out),
                        1.0,
                        ViewMut::row_major(dw, fan_out),
                    );
                }
                if let Some(b) = b.filter(|b| self.ng(*b)) {
                    let db = slot(grads, b, fan_out);
                    for row in g.chunks_exact(fan_out) {
                        for (d, v) in db.iter_mut().zip(row) {
                            *d += v;
                        }
                    }
                }
            }
            Op::ChannelAffine { x, w, b } => {
                let (xt, wt) = (self.value(*x), self.value(*w));
                let (batch, c_in, n) = (xt.shape()[0], xt.shape()[1], xt.shape()[2]);
                let c_out = wt.shape()[1];
                if self.ng(*x) {
                    let dx = slot(grads, *x, batch * c_in * n);
                    for bi in 0..batch {
                        gemm(
                            c_in,
                            c_out,
                            n,
                            1.0,
                            View::row_major(wt.data(), c_out),
                            View::at(g, bi * c_out * n, n, 1),
                            1.0,
                            ViewMut::at(dx, bi * c_in * n, n, 1),
                        );
                    }
                }
                if self.ng(*w) {
                    let dw = slot(grads, *w, c_in * c_out);
                    for bi in 0..batch {
                        gemm(
                            c_in,
                            n,
                            c_out,
                            1.0,
                            View::at(xt.data(), bi * c_in * n, n, 1),
                            View::at(g, bi * c_out * n, n, 1).t(),
                            1.0,
                            ViewMut::row_major(dw, c_out),
                        );
                    }
                }
                if let Some(b) = b.filter(|b| self.ng(*b)) {
                    let db = slot(grads, b, c_out);
                    for (row_idx, row) in g.chunks_exact(n).enumerate() {
                        db[row_idx % c_out] += row.iter().sum::<f64>();
                    }
                }
            }
            Op::Gelu { x, slope } => {
                let contrib = g.iter().zip(slope).map(|(gv, d)| gv * d).collect();
                accumulate(grads, *x, contrib);
            }
            Op::Relu { x } => {
                let xd = self.value(*x).data();
                let contrib = g
                    .iter()
                    .zip(xd)
                    .map(|(&gv, &xv)| if xv > 0.0 { gv } else { 0.0 })
                    .collect();
                accumulate(grads, *x, contrib);
            }
            Op::Add { a, b } => {
                for v in [*a, *b] {
                    if self.ng(v) {
                        accumulate(grads, v, g.to_vec());
                    }
                }
            }
            Op::Scale { x, alpha } => {
                accumulate(grads, *x, g.iter().map(|v| alpha * v).collect());
            }
            Op::Rdft { x, modes } => {
                let shape = self.value(*x).shape();
                let (rows, n) = (shape[0] * shape[1], shape[2]);
                accumulate(grads, *x, spectral::rdft_rows_adjoint(g, rows, n, *modes));
            }
            Op::Irdft { x, modes } => {
                let shape = self.value(*x).shape();
                let rows = shape[0] * shape[1];
                let n = node_shape(node)[2];
                accumulate(grads, *x, spectral::irdft_rows_adjoint(g, rows, n, *modes));
            }
            Op::ModeMix { x, r } => self.backprop_mode_mix(*x, *r, g, grads),
            Op::MatmulNt { a, b } => {
                let (at, bt) = (self.value(*a), self.value(*b));
                let (rows, k) = (at.shape()[0], at.shape()[1]);
                let cols = bt.shape()[0];
                if self.ng(*a) {
                    let da = slot(grads, *a, rows * k);
                    gemm(
                        rows,
                        cols,
                        k,
                        1.0,
                        View::row_major(g, cols),
                        View::row_major(bt.data(), k),
                        1.0,
                        ViewMut::row_major(da, k),
                    );
                }
                if self.ng(*b) {
                    let db = slot(grads, *b, cols * k);
                    gemm(
                        cols,
                        rows,
                        k,
                        1.0,
                        View::row_major(g, cols).t(),
                        View::row_major(at.data(), k),
                        1.0,
                        ViewMut::row_major(db, k),
                    );
                }
            }
            Op::AddScalar { x, s } => {
                if self.ng(*x) {
                    accumulate(grads, *x, g.to_vec());
                }
                if self.ng(*s) {
                    slot(grads, *s, 1)[0] += g.iter().sum::<f64>();
                }
            }
            Op::Mask { x, mask } => {
                let n = mask.len();
                let contrib = g
                    .chunks_exact(n)
                    .flat_map(|row| row.iter().zip(mask).map(|(gv, m)| gv * m))
                    .collect();
                accumulate(grads, *x, contrib);
            }
            Op::Reshape { x } => accumulate(grads, *x, g.to_vec()),
            Op::PadRight { x, pad } => {
                let n = *self.value(*x).shape().last().unwrap();
                let dx = slot(grads, *x, g.len() / (n + pad) * n);
                for (drow, grow) in dx.chunks_exact_mut(n).zip(g.chunks_exact(n + pad)) {
                    add_into(drow, &grow[..n]);
                }
            }
            Op::CropRight { x, keep } => {
                let xt = self.value(*x);
                let n = *xt.shape().last().unwrap();
                let dx = slot(grads, *x, xt.data().len());
                for (drow, grow) in dx.chunks_exact_mut(n).zip(g.chunks_exact(*keep)) {
                    add_into(&mut drow[..*keep], grow);
                }
            }
            Op::SumSquares { x } => {
                let xd = self.value(*x).data();
                let dx = slot(grads, *x, xd.len());
                for (d, v) in dx.iter_mut().zip(xd) {
                    *d += 2.0 * v * g[0];
                }
            }
            Op::RelativeL2 {
                pred,
                target,
                diff_norm,
                target_norm,
            } => {
                let pd = self.value(*pred).data();
                let batch = diff_norm.len();
                let n = pd.len() / batch;
                let dp = slot(grads, *pred, pd.len());
                for b in 0..batch {
                    // The norm is not differentiable at zero; use 0 there.
                    if diff_norm[b] == 0.0 {
                        continue;
                    }
                    let coef = g[0] / (diff_norm[b] * target_norm[b] * batch as f64);
                    let range = b * n..(b + 1) * n;
                    for ((d, p), t) in dp[range.clone()].iter_mut().zip(&pd[range.clone()]).zip(&target[range]) {
                        *d += coef * (p - t);
                    }
                }
            }
        }
        Ok(())
    }

    fn backprop_mode_mix(&self, x: Var, r: Var, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let (xt, rt) = (self.value(x), self.value(r));
        let (batch, c_in, modes) = (xt.shape()[0], xt.shape()[1], xt.shape()[2]);
        let c_out = rt.shape()[2];
        let (xd, rd) = (xt.data(), rt.data());
        let x_rs = 2 * c_in * modes;
        let y_rs = 2 * c_out * modes;
        let (b, i, o) = (batch, c_in, c_out);
        if self.ng(x) {
            let dx = slot(grads, x, xd.len());
            for k in 0..modes {
                let gr = View::at(g, 2 * k, y_rs, 2 * modes);
                let gi = View::at(g, 2 * k + 1, y_rs, 2 * modes);
                let rr_t = View::at(rd, 2 * k * i * o, 2 * o, 2).t();
                let ri_t = View::at(rd, 2 * k * i * o + 1, 2 * o, 2).t();
                // dXr = dYr Rr^T + dYi Ri^T ; dXi = dYi Rr^T - dYr Ri^T
                gemm(b, o, i, 1.0, gr, rr_t, 1.0, ViewMut::at(dx, 2 * k, x_rs, 2 * modes));
                gemm(b, o, i, 1.0, gi, ri_t, 1.0, ViewMut::at(dx, 2 * k, x_rs, 2 * modes));
                gemm(b, o, i, 1.0, gi, rr_t, 1.0, ViewMut::at(dx, 2 * k + 1, x_rs, 2 * modes));
                gemm(
                    b,
                    o,
                    i,
                    -1.0,
                    gr,
                    ri_t,
                    1.0,
                    ViewMut::at(dx, 2 * k + 1, x_rs, 2 * modes),
                );
            }
        }
        if self.ng(r) {
            let dr = slot(grads, r, rd.len());
            for k in 0..modes {
                let gr = View::at(g, 2 * k, y_rs, 2 * modes);
                let gi = View::at(g, 2 * k + 1, y_rs, 2 * modes);
                let xr_t = View::at(xd, 2 * k, x_rs, 2 * modes).t();
                let xi_t = View::at(xd, 2 * k + 1, x_rs, 2 * modes).t();
                let re = 2 * k * i * o;
                // dRr = Xr^T dYr + Xi^T dYi ; dRi = Xr^T dYi - Xi^T dYr
                gemm(i, b, o, 1.0, xr_t, gr, 1.0, ViewMut::at(dr, re, 2 * o, 2));
                gemm(i, b, o, 1.0, xi_t, gi, 1.0, ViewMut::at(dr, re, 2 * o, 2));
                gemm(i, b, o, 1.0, xr_t, gi, 1.0, ViewMut::at(dr, re + 1, 2 * o, 2));
                gemm(i, b, o, -1.0, xi_t, gr, 1.0, ViewMut::at(dr, re + 1, 2 * o, 2));
            }
        }
    }
}

fn node_shape(node: &Node) -> &[usize] {
    match &node.value {
        Value::Owned(t) => t.shape(),
        Value::Param(_) => &[],
    }
}

/// Adds `contrib` to the gradient of `v`, taking ownership when it is the
/// first contribution.
fn accumulate(grads: &mut [Option<Vec<f64>>], v: Var, contrib: Vec<f64>) {
    match &mut grads[v.0] {
        Some(acc) => add_into(acc, &contrib),
        empty => *empty = Some(contrib),
    }
}

fn slot(grads: &mut [Option<Vec<f64>>], v: Var, len: usize) -> &mut [f64] {
    grads[v.0].get_or_insert_with(|| vec![0.0; len])
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}
