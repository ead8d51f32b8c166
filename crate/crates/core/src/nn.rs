//! Plain layers for the toy classifier: 3x3 same-padded convolution, ReLU,
//! a dense head and softmax cross-entropy.

use alloc::vec;
use alloc::vec::Vec;

use crate::math;

/// `3 x 3` convolution, stride 1, zero padding 1.
/// `weight` is `[out][in][3][3]`; `x` is `[in][h][w]`; returns `[out][h][w]`.
pub fn conv3x3_forward(x: &[f64], in_c: usize, h: usize, w: usize, weight: &[f64], bias: &[f64]) -> Vec<f64> {
    let out_c = bias.len();
    let plane = h * w;
    let mut out = vec![0.0; out_c * plane];
    for o in 0..out_c {
        let dst = &mut out[o * plane..(o + 1) * plane];
        dst.iter_mut().for_each(|v| *v = bias[o]);
        for i in 0..in_c {
            let src = &x[i * plane..(i + 1) * plane];
            let k = &weight[(o * in_c + i) * 9..(o * in_c + i + 1) * 9];
            for dy in 0..3 {
                for dx in 0..3 {
                    let kv = k[dy * 3 + dx];
                    for r in 0..h {
                        let sr = r as isize + dy as isize - 1;
                        if sr < 0 || sr >= h as isize {
                            continue;
                        }
                        let srow = &src[sr as usize * w..(sr as usize + 1) * w];
                        let drow = &mut dst[r * w..(r + 1) * w];
                        let (c_lo, c_hi) = (if dx == 0 { 1 } else { 0 }, if dx == 2 { w - 1 } else { w });
                        for c in c_lo..c_hi {
                            drow[c] += kv * srow[c + dx - 1];
                        }
                    }
                }
            }
        }
    }
    out
}

/// Backward of [`conv3x3_forward`]. Accumulates into `d_weight` and
/// `d_bias` and returns `dL/dx`.
#[allow(clippy::too_many_arguments)]
pub fn conv3x3_backward(
    x: &[f64],
    in_c: usize,
    h: usize,
    w: usize,
    weight: &[f64],
    d_out: &[f64],
    d_weight: &mut [f64],
    d_bias: &mut [f64],
) -> Vec<f64> {
    let out_c = d_bias.len();
    let plane = h * w;
    let mut dx = vec![0.0; in_c * plane];
    for o in 0..out_c {
        let g = &d_out[o * plane..(o + 1) * plane];
        d_bias[o] += g.iter().sum::<f64>();
        for i in 0..in_c {
            let src = &x[i * plane..(i + 1) * plane];
            let dsrc = &mut dx[i * plane..(i + 1) * plane];
            let base = (o * in_c + i) * 9;
            for dy in 0..3 {
                for ddx in 0..3 {
                    let kv = weight[base + dy * 3 + ddx];
                    let mut acc = 0.0;
                    for r in 0..h {
                        let sr = r as isize + dy as isize - 1;
                        if sr < 0 || sr >= h as isize {
                            continue;
                        }
                        let sr = sr as usize;
                        let (c_lo, c_hi) = (if ddx == 0 { 1 } else { 0 }, if ddx == 2 { w - 1 } else { w });
                        for c in c_lo..c_hi {
                            let gv = g[r * w + c];
                            acc += gv * src[sr * w + c + ddx - 1];
                            dsrc[sr * w + c + ddx - 1] += gv * kv;
                        }
                    }
                    d_weight[base + dy * 3 + ddx] += acc;
                }
            }
        }
    }
    dx
}

pub fn relu(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| v.max(0.0)).collect()
}

/// Zeroes `grad` wherever the pre-activation was not positive.
pub fn relu_backward(pre: &[f64], grad: &mut [f64]) {
    for (g, &p) in grad.iter_mut().zip(pre) {
        if p <= 0.0 {
            *g = 0.0;
        }
    }
}

/// `W x + b` with `W` row-major `out x in`.
pub fn dense_forward(x: &[f64], weight: &[f64], bias: &[f64]) -> Vec<f64> {
    weight
        .chunks_exact(x.len())
        .zip(bias)
        .map(|(row, b)| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b)
        .collect()
}

pub fn dense_backward(x: &[f64], weight: &[f64], d_out: &[f64], d_weight: &mut [f64], d_bias: &mut [f64]) -> Vec<f64> {
    let n = x.len();
    let mut dx = vec![0.0; n];
    for (o, &g) in d_out.iter().enumerate() {
        d_bias[o] += g;
        let row = &weight[o * n..(o + 1) * n];
        let drow = &mut d_weight[o * n..(o + 1) * n];
        for k in 0..n {
            drow[k] += g * x[k];
            dx[k] += g * row[k];
        }
    }
    dx
}

/// Cross-entropy of `softmax(logits)` against `label`, and its gradient
/// with respect to the logits.
pub fn softmax_cross_entropy(logits: &[f64], label: usize) -> (f64, Vec<f64>) {
    let mut p = vec![0.0; logits.len()];
    let (total, shift) = math::shifted_exp(logits, 1.0, &mut p);
    let loss = shift + math::ln(total) - logits[label];
    for v in p.iter_mut() {
        *v /= total;
    }
    p[label] -= 1.0;
    (loss, p)
}
