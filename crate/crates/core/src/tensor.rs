//! Dense row-major tensors and sliding-window placement.
//!
//! Window placements are numbered from 1 in the public `extract_window` API
//! (placement `(i, j)` covers rows `(i-1)*s1 .. (i-1)*s1 + k1`), while all
//! storage offsets and the internal helpers are 0-based.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Axis, Error, Result};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.is_empty() || shape.contains(&0) {
            return Err(Error::Shape(format!("invalid shape {shape:?}")));
        }
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(Error::Shape(format!("shape {shape:?} needs {len} elements, got {}", data.len())));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Result<Self> {
        let len = shape.iter().product();
        Self::new(shape, vec![0.0; len])
    }

    pub fn from_fn(shape: Vec<usize>, f: impl FnMut(usize) -> f64) -> Result<Self> {
        let len = shape.iter().product();
        Self::new(shape, (0..len).map(f).collect())
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Interprets the tensor as `C x H x W`; a 2-D tensor is one channel.
    pub fn dims3(&self) -> Result<(usize, usize, usize)> {
        match *self.shape.as_slice() {
            [h, w] => Ok((1, h, w)),
            [c, h, w] => Ok((c, h, w)),
            _ => Err(Error::Shape(format!("expected a 2-D or 3-D tensor, got shape {:?}", self.shape))),
        }
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let plane = self.shape[self.shape.len() - 2..].iter().product::<usize>();
        &self.data[c * plane..(c + 1) * plane]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [f64] {
        let plane = self.shape[self.shape.len() - 2..].iter().product::<usize>();
        &mut self.data[c * plane..(c + 1) * plane]
    }
}

/// Window extent `k1 x k2` and strides `s1 x s2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WindowSpec {
    pub k1: usize,
    pub k2: usize,
    pub s1: usize,
    pub s2: usize,
}

impl WindowSpec {
    pub fn new(k1: usize, k2: usize, s1: usize, s2: usize) -> Result<Self> {
        if k1 == 0 || k2 == 0 || s1 == 0 || s2 == 0 {
            return Err(Error::Param(format!("window {k1}x{k2} with stride {s1}x{s2} must be positive")));
        }
        Ok(Self { k1, k2, s1, s2 })
    }

    /// Square `k x k` window with stride `s` on both axes.
    pub fn square(k: usize, s: usize) -> Result<Self> {
        Self::new(k, k, s, s)
    }

    /// The 2x2 / stride 2 window used by every pooling block in the harness.
    pub fn halving() -> Self {
        Self { k1: 2, k2: 2, s1: 2, s2: 2 }
    }

    /// Number of entries `n = k1 * k2` in one window.
    pub fn len(&self) -> usize {
        self.k1 * self.k2
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat plane offsets (row-major, plane width `width`) of the window at
    /// 0-based placement `(i0, j0)`, in window order.
    pub fn offsets(&self, width: usize, i0: usize, j0: usize) -> impl Iterator<Item = usize> + '_ {
        let r0 = i0 * self.s1;
        let c0 = j0 * self.s2;
        (0..self.k1).flat_map(move |a| (0..self.k2).map(move |b| (r0 + a) * width + c0 + b))
    }
}

/// Number of window placements per axis: `floor((H-k1)/s1)+1`, `floor((W-k2)/s2)+1`.
/// Trailing rows and columns that do not fill a window are dropped.
pub fn output_size(h: usize, w: usize, spec: WindowSpec) -> Result<(usize, usize)> {
    if h < spec.k1 {
        return Err(Error::WindowTooLarge { axis: Axis::Height, dim: h, window: spec.k1 });
    }
    if w < spec.k2 {
        return Err(Error::WindowTooLarge { axis: Axis::Width, dim: w, window: spec.k2 });
    }
    Ok(((h - spec.k1) / spec.s1 + 1, (w - spec.k2) / spec.s2 + 1))
}

/// Copies the window at 0-based placement `(i0, j0)` of an `h x w` plane into `out`.
pub(crate) fn window_into(plane: &[f64], w: usize, spec: WindowSpec, i0: usize, j0: usize, out: &mut [f64]) {
    for (o, idx) in out.iter_mut().zip(spec.offsets(w, i0, j0)) {
        *o = plane[idx];
    }
}

/// Returns the `k1*k2` entries of window `(i, j)` (1-based) flattened row-major.
/// `x` must be a single `H x W` plane (2-D, or 3-D with one channel).
pub fn extract_window(x: &Tensor, spec: WindowSpec, i: usize, j: usize) -> Result<Vec<f64>> {
    let (c, h, w) = x.dims3()?;
    if c != 1 {
        return Err(Error::Shape(format!("extract_window expects one plane, got {c} channels")));
    }
    let (rows, cols) = output_size(h, w, spec)?;
    if i == 0 || j == 0 || i > rows || j > cols {
        return Err(Error::Index { i, j, rows, cols });
    }
    let mut out = vec![0.0; spec.len()];
    window_into(x.data(), w, spec, i - 1, j - 1, &mut out);
    Ok(out)
}

/// Applies `f(c, window)` to every placement of every channel, producing a
/// `C x H' x W'` tensor. Errors from `f` are annotated with the 0-based `(c, i, j)`.
pub fn map_windows<F>(x: &Tensor, spec: WindowSpec, mut f: F) -> Result<Tensor>
where
    F: FnMut(usize, &[f64]) -> Result<f64>,
{
    let (channels, h, w) = x.dims3()?;
    let (rows, cols) = output_size(h, w, spec)?;
    let mut out = Vec::with_capacity(channels * rows * cols);
    let mut buf = vec![0.0; spec.len()];
    for c in 0..channels {
        let plane = x.channel(c);
        for i in 0..rows {
            for j in 0..cols {
                window_into(plane, w, spec, i, j, &mut buf);
                let y = f(c, &buf).map_err(|e| Error::AtWindow { c, i, j, source: alloc::boxed::Box::new(e) })?;
                out.push(y);
            }
        }
    }
    Tensor::new(vec![channels, rows, cols], out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iota(h: usize, w: usize) -> Tensor {
        Tensor::from_fn(vec![h, w], |k| (k + 1) as f64).unwrap()
    }

    fn brute_force_placements(n: usize, k: usize, s: usize) -> usize {
        (0..n).filter(|&start| start % s == 0 && start + k <= n).count()
    }

    #[test]
    fn rejects_inconsistent_shapes() {
        assert!(Tensor::new(vec![2, 2], vec![0.0; 3]).is_err());
        assert!(Tensor::new(vec![2, 0], vec![]).is_err());
    }

    #[test]
    fn output_size_examples() {
        let spec = WindowSpec::halving();
        assert_eq!(output_size(6, 6, spec).unwrap(), (3, 3));
        assert_eq!(output_size(2, 2, spec).unwrap(), (1, 1));
        let expected = brute_force_placements(7, 2, 2);
        assert_eq!(expected, 3);
        assert_eq!(output_size(7, 7, spec).unwrap(), (expected, expected));
    }

    #[test]
    fn output_size_names_axis() {
        let spec = WindowSpec::new(3, 2, 1, 1).unwrap();
        assert_eq!(output_size(2, 5, spec), Err(Error::WindowTooLarge { axis: Axis::Height, dim: 2, window: 3 }));
        let spec = WindowSpec::new(1, 4, 1, 1).unwrap();
        assert!(matches!(output_size(5, 3, spec), Err(Error::WindowTooLarge { axis: Axis::Width, .. })));
    }

    #[test]
    fn output_size_matches_enumeration() {
        for n in 1..12 {
            for k in 1..=n {
                for s in 1..5 {
                    let spec = WindowSpec::square(k, s).unwrap();
                    let (r, c) = output_size(n, n, spec).unwrap();
                    assert_eq!(r, brute_force_placements(n, k, s));
                    assert_eq!(c, r);
                }
            }
        }
    }

    #[test]
    fn extract_window_examples() {
        let x = Tensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let spec = WindowSpec::halving();
        assert_eq!(extract_window(&x, spec, 1, 1).unwrap(), vec![1.0, 2.0, 3.0, 4.0]);

        let x = iota(4, 4);
        assert_eq!(extract_window(&x, spec, 2, 2).unwrap(), vec![11.0, 12.0, 15.0, 16.0]);

        let x = iota(3, 3);
        let spec = WindowSpec::square(2, 1).unwrap();
        assert_eq!(extract_window(&x, spec, 2, 2).unwrap(), vec![5.0, 6.0, 8.0, 9.0]);
    }

    #[test]
    fn extract_window_index_errors() {
        let x = iota(4, 4);
        let spec = WindowSpec::halving();
        assert!(matches!(extract_window(&x, spec, 0, 1), Err(Error::Index { .. })));
        assert!(matches!(extract_window(&x, spec, 3, 1), Err(Error::Index { .. })));
        assert!(matches!(extract_window(&x, spec, 1, 3), Err(Error::Index { .. })));
    }

    #[test]
    fn map_windows_examples() {
        let spec = WindowSpec::halving();
        let y =
            map_windows(&iota(4, 4), spec, |_, win| Ok(win.iter().copied().fold(f64::NEG_INFINITY, f64::max))).unwrap();
        assert_eq!(y.shape(), &[1, 2, 2]);
        assert_eq!(y.data(), &[6.0, 8.0, 14.0, 16.0]);

        let x = Tensor::from_fn(vec![3, 5, 4], |k| (k as f64).sin()).unwrap();
        let id = map_windows(&x, WindowSpec::square(1, 1).unwrap(), |_, win| Ok(win[0])).unwrap();
        assert_eq!(id.data(), x.data());

        let x = Tensor::new(vec![2, 4, 6], vec![2.5; 48]).unwrap();
        let mean = map_windows(&x, spec, |_, win| Ok(win.iter().sum::<f64>() / win.len() as f64)).unwrap();
        assert_eq!(mean.shape(), &[2, 2, 3]);
        assert!(mean.data().iter().all(|&v| v == 2.5));
    }

    #[test]
    fn map_windows_annotates_errors() {
        let x = iota(4, 4);
        let err = map_windows(&x, WindowSpec::halving(), |_, win| {
            if win[0] == 11.0 {
                Err(Error::Param("boom".into()))
            } else {
                Ok(0.0)
            }
        })
        .unwrap_err();
        assert!(matches!(err, Error::AtWindow { c: 0, i: 1, j: 1, .. }));
    }

    #[test]
    fn non_overlapping_windows_cover_each_element_once() {
        let (h, w) = (6, 8);
        let spec = WindowSpec::halving();
        let (rows, cols) = output_size(h, w, spec).unwrap();
        let mut hits = vec![0u32; h * w];
        for i in 0..rows {
            for j in 0..cols {
                for idx in spec.offsets(w, i, j) {
                    hits[idx] += 1;
                }
            }
        }
        assert!(hits.iter().all(|&n| n == 1));
    }
}
