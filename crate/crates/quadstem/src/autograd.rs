//! Minimal reverse-mode automatic differentiation over 2-D f64 arrays.
//!
//! The separation networks are small enough that a tape of dense array ops
//! covers everything: matrix products, elementwise nonlinearities, row
//! slicing/stacking for the dual-path sweeps, row-wise normalization, and
//! STFT/ISTFT primitives with hand-derived exact adjoints so the training
//! loss can reach back through the synthesis path to the mask decoders.

use std::cell::RefCell;
use std::rc::Rc;

use ndarray::{s, Array2, Axis};
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::dsp::stft::{frame_signal, istft_overlap_add, num_frames, StftConfig};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

enum Op {
    Leaf,
    MatMul(NodeId, NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    /// a (m,n) + row (1,n), broadcast over rows.
    AddRow(NodeId, NodeId),
    /// a (m,n) * row (1,n), broadcast over rows.
    MulRow(NodeId, NodeId),
    Tanh(NodeId),
    Sigmoid(NodeId),
    Scale(NodeId, f64),
    Rows(NodeId, usize, usize),
    Cols(NodeId, usize, usize),
    ConcatRows(Vec<NodeId>),
    Transpose(NodeId),
    /// out[i] = in[perm[i]]
    PermuteRows(NodeId, Rc<Vec<usize>>),
    /// Per-row zero-mean unit-variance normalization with variance floor.
    RowNorm(NodeId, f64),
    /// Mean of |x| over all elements, scalar output (1,1).
    MeanAbs(NodeId),
    /// Complex product with a constant spectrogram; both operand layouts are
    /// (2*n_bins, frames) with real rows stacked above imaginary rows.
    ComplexMulConst(NodeId, Rc<Array2<f64>>),
    /// (1, len) waveform -> (2*n_bins, frames) stacked re/im spectrogram.
    Stft(NodeId, StftConfig),
    /// (2*n_bins, frames) -> (1, out_len) waveform.
    Istft(NodeId, StftConfig, usize),
}

struct Node {
    value: Array2<f64>,
    op: Op,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

pub struct Gradients {
    grads: Vec<Option<Array2<f64>>>,
}

impl Gradients {
    pub fn get(&self, id: NodeId) -> Option<&Array2<f64>> {
        self.grads[id.0].as_ref()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn value(&self, id: NodeId) -> &Array2<f64> {
        &self.nodes[id.0].value
    }

    fn push(&mut self, value: Array2<f64>, op: Op) -> NodeId {
        self.nodes.push(Node { value, op });
        NodeId(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, value: Array2<f64>) -> NodeId {
        self.push(value, Op::Leaf)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a).dot(self.value(b));
        self.push(v, Op::MatMul(a, b))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a) + self.value(b);
        self.push(v, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a) - self.value(b);
        self.push(v, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a) * self.value(b);
        self.push(v, Op::Mul(a, b))
    }

    pub fn add_row(&mut self, a: NodeId, row: NodeId) -> NodeId {
        let v = self.value(a) + &self.value(row).row(0);
        self.push(v, Op::AddRow(a, row))
    }

    pub fn mul_row(&mut self, a: NodeId, row: NodeId) -> NodeId {
        let v = self.value(a) * &self.value(row).row(0);
        self.push(v, Op::MulRow(a, row))
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).mapv(f64::tanh);
        self.push(v, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).mapv(|x| 1.0 / (1.0 + (-x).exp()));
        self.push(v, Op::Sigmoid(a))
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        let v = self.value(a) * c;
        self.push(v, Op::Scale(a, c))
    }

    pub fn rows(&mut self, a: NodeId, r0: usize, r1: usize) -> NodeId {
        let v = self.value(a).slice(s![r0..r1, ..]).to_owned();
        self.push(v, Op::Rows(a, r0, r1))
    }

    pub fn cols(&mut self, a: NodeId, c0: usize, c1: usize) -> NodeId {
        let v = self.value(a).slice(s![.., c0..c1]).to_owned();
        self.push(v, Op::Cols(a, c0, c1))
    }

    pub fn concat_rows(&mut self, parts: Vec<NodeId>) -> NodeId {
        let views: Vec<_> = parts.iter().map(|&p| self.value(p).view()).collect();
        let v = ndarray::concatenate(Axis(0), &views).expect("concat_rows shape mismatch");
        self.push(v, Op::ConcatRows(parts))
    }

    pub fn transpose(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).t().to_owned();
        self.push(v, Op::Transpose(a))
    }

    pub fn permute_rows(&mut self, a: NodeId, perm: Rc<Vec<usize>>) -> NodeId {
        let src = self.value(a);
        let mut v = Array2::zeros(src.dim());
        for (i, &p) in perm.iter().enumerate() {
            v.row_mut(i).assign(&src.row(p));
        }
        self.push(v, Op::PermuteRows(a, perm))
    }

    pub fn row_norm(&mut self, a: NodeId, eps: f64) -> NodeId {
        let src = self.value(a);
        let n = src.ncols() as f64;
        let mut v = src.clone();
        for mut row in v.rows_mut() {
            let mean = row.sum() / n;
            let var = row.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
            let sigma = (var + eps).sqrt();
            row.mapv_inplace(|x| (x - mean) / sigma);
        }
        self.push(v, Op::RowNorm(a, eps))
    }

    pub fn mean_abs(&mut self, a: NodeId) -> NodeId {
        let src = self.value(a);
        let m = src.iter().map(|x| x.abs()).sum::<f64>() / src.len() as f64;
        self.push(Array2::from_elem((1, 1), m), Op::MeanAbs(a))
    }

    pub fn complex_mul_const(&mut self, mask: NodeId, mix: Rc<Array2<f64>>) -> NodeId {
        let m = self.value(mask);
        let v = complex_mul_stacked(m, &mix);
        self.push(v, Op::ComplexMulConst(mask, mix))
    }

    pub fn stft(&mut self, wave: NodeId, cfg: StftConfig) -> NodeId {
        let samples: Vec<f64> = self.value(wave).row(0).to_vec();
        let v = stft_stacked(&samples, &cfg);
        self.push(v, Op::Stft(wave, cfg))
    }

    pub fn istft(&mut self, spec: NodeId, cfg: StftConfig, out_len: usize) -> NodeId {
        let stacked = self.value(spec);
        let n_bins = cfg.n_bins();
        let n_frames = stacked.ncols();
        let re: Vec<Vec<f64>> = (0..n_frames)
            .map(|t| (0..n_bins).map(|k| stacked[[k, t]]).collect())
            .collect();
        let im: Vec<Vec<f64>> = (0..n_frames)
            .map(|t| (0..n_bins).map(|k| stacked[[n_bins + k, t]]).collect())
            .collect();
        let samples = istft_overlap_add(&re, &im, &cfg, out_len);
        let v = Array2::from_shape_vec((1, out_len), samples).unwrap();
        self.push(v, Op::Istft(spec, cfg, out_len))
    }

    /// Reverse accumulation from a scalar (1,1) root.
    pub fn backward(&self, root: NodeId) -> Gradients {
        let mut grads: Vec<Option<Array2<f64>>> = vec![None; self.nodes.len()];
        grads[root.0] = Some(Array2::ones(self.nodes[root.0].value.dim()));

        for i in (0..=root.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            match &self.nodes[i].op {
                Op::Leaf => {
                    grads[i] = Some(g);
                    continue;
                }
                Op::MatMul(a, b) => {
                    let da = g.dot(&self.value(*b).t());
                    let db = self.value(*a).t().dot(&g);
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, g.clone());
                    accumulate(&mut grads, *b, g);
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads, *b, -&g);
                    accumulate(&mut grads, *a, g);
                }
                Op::Mul(a, b) => {
                    let da = &g * self.value(*b);
                    let db = &g * self.value(*a);
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::AddRow(a, row) => {
                    let drow = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                    accumulate(&mut grads, *row, drow);
                    accumulate(&mut grads, *a, g);
                }
                Op::MulRow(a, row) => {
                    let r = self.value(*row).row(0).to_owned();
                    let da = &g * &r;
                    let drow = (&g * self.value(*a)).sum_axis(Axis(0)).insert_axis(Axis(0));
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *row, drow);
                }
                Op::Tanh(a) => {
                    let y = &self.nodes[i].value;
                    let da = &g * &y.mapv(|v| 1.0 - v * v);
                    accumulate(&mut grads, *a, da);
                }
                Op::Sigmoid(a) => {
                    let y = &self.nodes[i].value;
                    let da = &g * &y.mapv(|v| v * (1.0 - v));
                    accumulate(&mut grads, *a, da);
                }
                Op::Scale(a, c) => {
                    accumulate(&mut grads, *a, &g * *c);
                }
                Op::Rows(a, r0, _r1) => {
                    let mut da = Array2::zeros(self.value(*a).dim());
                    da.slice_mut(s![*r0..*r0 + g.nrows(), ..]).assign(&g);
                    accumulate(&mut grads, *a, da);
                }
                Op::Cols(a, c0, _c1) => {
                    let mut da = Array2::zeros(self.value(*a).dim());
                    da.slice_mut(s![.., *c0..*c0 + g.ncols()]).assign(&g);
                    accumulate(&mut grads, *a, da);
                }
                Op::ConcatRows(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let rows = self.value(p).nrows();
                        let slice = g.slice(s![offset..offset + rows, ..]).to_owned();
                        accumulate(&mut grads, p, slice);
                        offset += rows;
                    }
                }
                Op::Transpose(a) => {
                    accumulate(&mut grads, *a, g.t().to_owned());
                }
                Op::PermuteRows(a, perm) => {
                    let mut da = Array2::zeros(self.value(*a).dim());
                    for (j, &p) in perm.iter().enumerate() {
                        let mut row = da.row_mut(p);
                        row += &g.row(j);
                    }
                    accumulate(&mut grads, *a, da);
                }
                Op::RowNorm(a, eps) => {
                    let x = self.value(*a);
                    let y = &self.nodes[i].value;
                    let n = x.ncols() as f64;
                    let mut da = Array2::zeros(x.dim());
                    for r in 0..x.nrows() {
                        let xr = x.row(r);
                        let mean = xr.sum() / n;
                        let var = xr.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
                        let sigma = (var + *eps).sqrt();
                        let gr = g.row(r);
                        let yr = y.row(r);
                        let g_mean = gr.sum() / n;
                        let gy_mean = gr
                            .iter()
                            .zip(yr.iter())
                            .map(|(gi, yi)| gi * yi)
                            .sum::<f64>()
                            / n;
                        // Exact including the variance floor: with
                        // x_k - mean = y_k * sigma, the floor cancels and the
                        // standard layer-norm backward holds as-is.
                        for c in 0..x.ncols() {
                            da[[r, c]] = (gr[c] - g_mean - yr[c] * gy_mean) / sigma;
                        }
                    }
                    accumulate(&mut grads, *a, da);
                }
                Op::MeanAbs(a) => {
                    let x = self.value(*a);
                    let scale = g[[0, 0]] / x.len() as f64;
                    let da = x.mapv(|v| {
                        if v > 0.0 {
                            scale
                        } else if v < 0.0 {
                            -scale
                        } else {
                            0.0
                        }
                    });
                    accumulate(&mut grads, *a, da);
                }
                Op::ComplexMulConst(mask, mix) => {
                    let da = complex_mul_adjoint(&g, mix);
                    accumulate(&mut grads, *mask, da);
                }
                Op::Stft(wave, cfg) => {
                    let len = self.value(*wave).ncols();
                    let da = stft_adjoint(&g, cfg, len);
                    accumulate(&mut grads, *wave, da);
                }
                Op::Istft(spec, cfg, out_len) => {
                    let n_frames = self.value(*spec).ncols();
                    let da = istft_adjoint(&g, cfg, *out_len, n_frames);
                    accumulate(&mut grads, *spec, da);
                }
            }
        }
        Gradients { grads }
    }
}

fn accumulate(grads: &mut [Option<Array2<f64>>], id: NodeId, g: Array2<f64>) {
    match &mut grads[id.0] {
        Some(existing) => *existing += &g,
        slot => *slot = Some(g),
    }
}

/// Complex multiply in stacked-real layout: rows [0, nb) real, [nb, 2nb) imag.
fn complex_mul_stacked(mask: &Array2<f64>, mix: &Array2<f64>) -> Array2<f64> {
    let nb = mask.nrows() / 2;
    let t = mask.ncols();
    let mut out = Array2::zeros((2 * nb, t));
    for k in 0..nb {
        for j in 0..t {
            let (mr, mi) = (mask[[k, j]], mask[[nb + k, j]]);
            let (ar, ai) = (mix[[k, j]], mix[[nb + k, j]]);
            out[[k, j]] = mr * ar - mi * ai;
            out[[nb + k, j]] = mr * ai + mi * ar;
        }
    }
    out
}

fn complex_mul_adjoint(g: &Array2<f64>, mix: &Array2<f64>) -> Array2<f64> {
    let nb = g.nrows() / 2;
    let t = g.ncols();
    let mut out = Array2::zeros((2 * nb, t));
    for k in 0..nb {
        for j in 0..t {
            let (gr, gi) = (g[[k, j]], g[[nb + k, j]]);
            let (ar, ai) = (mix[[k, j]], mix[[nb + k, j]]);
            out[[k, j]] = gr * ar + gi * ai;
            out[[nb + k, j]] = -gr * ai + gi * ar;
        }
    }
    out
}

/// Forward STFT producing the stacked (2*n_bins, frames) layout.
pub fn stft_stacked(samples: &[f64], cfg: &StftConfig) -> Array2<f64> {
    let frames = frame_signal(samples, cfg);
    let n = cfg.n_fft;
    let n_bins = cfg.n_bins();
    let mut out = Array2::zeros((2 * n_bins, frames.len()));
    PLANNER.with(|p| {
        let fft = p.borrow_mut().plan_fft_forward(n);
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for (t, frame) in frames.iter().enumerate() {
            for (i, &x) in frame.iter().enumerate() {
                buf[i] = Complex64::new(x, 0.0);
            }
            fft.process(&mut buf);
            for k in 0..n_bins {
                out[[k, t]] = buf[k].re;
                out[[n_bins + k, t]] = buf[k].im;
            }
        }
    });
    out
}

/// Adjoint of the stacked STFT: spectrogram-shaped gradient to a waveform
/// gradient. The STFT is real-linear in the signal, so the adjoint is an
/// inverse DFT of the (half-weighted) gradient bins followed by windowed
/// overlap-add scatter.
fn stft_adjoint(g: &Array2<f64>, cfg: &StftConfig, len: usize) -> Array2<f64> {
    let n = cfg.n_fft;
    let n_bins = cfg.n_bins();
    let n_frames = g.ncols();
    debug_assert_eq!(n_frames, num_frames(len, cfg));
    let w = cfg.window_samples();
    let pad = if cfg.center_pad { n / 2 } else { 0 };
    let mut out = vec![0.0; len];
    PLANNER.with(|p| {
        let ifft = p.borrow_mut().plan_fft_inverse(n);
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for t in 0..n_frames {
            // Interior bins appear twice in the full Hermitian spectrum, so
            // their adjoint weight is 1/2 relative to the DC/Nyquist bins.
            for k in 0..n_bins {
                let c = if k == 0 || k == n / 2 { 1.0 } else { 0.5 };
                buf[k] = Complex64::new(g[[k, t]] * c, g[[n_bins + k, t]] * c);
            }
            for k in n_bins..n {
                buf[k] = buf[n - k].conj();
            }
            // rustfft's inverse is unnormalized, which is exactly the adjoint
            // scaling needed here.
            ifft.process(&mut buf);
            let start = t * cfg.hop;
            for i in 0..n {
                let idx = start + i;
                if idx >= pad && idx < pad + len {
                    out[idx - pad] += buf[i].re * w[i];
                }
            }
        }
    });
    Array2::from_shape_vec((1, len), out).unwrap()
}

/// Adjoint of the overlap-add ISTFT: waveform gradient to stacked
/// spectrogram gradient.
fn istft_adjoint(
    g: &Array2<f64>,
    cfg: &StftConfig,
    out_len: usize,
    n_frames: usize,
) -> Array2<f64> {
    let n = cfg.n_fft;
    let n_bins = cfg.n_bins();
    let w = cfg.window_samples();
    let pad = if cfg.center_pad { n / 2 } else { 0 };
    let total = n_frames.saturating_sub(1) * cfg.hop + n;

    // Window-square normalization used by the forward pass.
    let mut wsum = vec![0.0; total];
    for t in 0..n_frames {
        let start = t * cfg.hop;
        for i in 0..n {
            wsum[start + i] += w[i] * w[i];
        }
    }
    let mut u = vec![0.0; total];
    for i in 0..out_len {
        let idx = i + pad;
        if idx < total && wsum[idx] > 1e-10 {
            u[idx] = g[[0, i]] / wsum[idx];
        }
    }

    let mut out = Array2::zeros((2 * n_bins, n_frames));
    PLANNER.with(|p| {
        let fft = p.borrow_mut().plan_fft_forward(n);
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for t in 0..n_frames {
            let start = t * cfg.hop;
            for i in 0..n {
                buf[i] = Complex64::new(u[start + i] * w[i], 0.0);
            }
            fft.process(&mut buf);
            for k in 0..n_bins {
                let c = if k == 0 || k == n / 2 { 1.0 } else { 2.0 };
                out[[k, t]] = buf[k].re * c / n as f64;
                out[[n_bins + k, t]] = buf[k].im * c / n as f64;
            }
        }
    });
    out
}
