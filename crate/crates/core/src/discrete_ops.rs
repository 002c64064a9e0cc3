//! Uniform grids, finite sampled sequences and the discrete operators acting
//! on them: restriction, discrete convolution, central differences and the
//! weighted `l^p_h` norms.
//!
//! Sequences are indexed by signed node index `-N..=N`; entries beyond the
//! grid are treated as zero everywhere.

use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Below this half-width the direct double loop beats the transform path.
pub const FAST_CONVOLUTION_THRESHOLD: usize = 32;

/// Uniform partition `x_i = i h`, `-N <= i <= N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    h: f64,
    n_half: usize,
}

impl Grid {
    pub fn new(h: f64, n_half: usize) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "mesh size must be positive, got {h}"
            )));
        }
        if n_half < 1 {
            return Err(Error::InvalidGrid("half-width N must be at least 1".into()));
        }
        Ok(Grid { h, n_half })
    }

    /// Grid covering `[-half_width, half_width]`; `half_width / h` must be an
    /// integer up to a relative rounding slack of `1e-9`.
    pub fn covering(half_width: f64, h: f64) -> Result<Self> {
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "domain half-width must be positive, got {half_width}"
            )));
        }
        let ratio = half_width / h;
        let n = ratio.round();
        if (ratio - n).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::InvalidGrid(format!(
                "half-width {half_width} is not an integer multiple of h = {h}"
            )));
        }
        Grid::new(h, n as usize)
    }

    #[inline]
    pub fn h(&self) -> f64 {
        self.h
    }

    #[inline]
    pub fn n_half(&self) -> usize {
        self.n_half
    }

    #[inline]
    pub fn len(&self) -> usize {
        2 * self.n_half + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn half_width(&self) -> f64 {
        self.n_half as f64 * self.h
    }

    /// Node `x_i` for signed index `i`.
    #[inline]
    pub fn node(&self, i: isize) -> f64 {
        i as f64 * self.h
    }

    /// Signed node indices in storage order.
    pub fn indices(&self) -> impl Iterator<Item = isize> + '_ {
        let n = self.n_half as isize;
        -n..=n
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        self.indices().map(|i| self.node(i))
    }

    fn check_same(&self, other: &Grid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch {
                h_left: self.h,
                n_left: self.n_half,
                h_right: other.h,
                n_right: other.n_half,
            })
        }
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "h={} N={} [-{}, {}]",
            self.h,
            self.n_half,
            self.half_width(),
            self.half_width()
        )
    }
}

/// Finite sequence on a grid; the solution vector of the truncated system.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSequence {
    grid: Grid,
    values: Vec<f64>,
}

pub type StateVector = SampledSequence;

impl SampledSequence {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                x: grid.node(i as isize - grid.n_half as isize),
                value: values[i],
            });
        }
        Ok(SampledSequence { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        SampledSequence {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    /// Sequence with entries given by signed index.
    pub fn from_fn(grid: Grid, mut f: impl FnMut(isize) -> f64) -> Result<Self> {
        let values = grid.indices().map(&mut f).collect();
        Self::new(grid, values)
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Entries in storage order `-N..=N`.
    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Entry at signed index `i`; zero off the grid.
    #[inline]
    pub fn get(&self, i: isize) -> f64 {
        let n = self.grid.n_half as isize;
        if i < -n || i > n {
            0.0
        } else {
            self.values[(i + n) as usize]
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.grid.nodes().zip(self.values.iter().copied())
    }

    /// Largest `|v_i|`, with its signed index.
    pub fn argmax_abs(&self) -> (isize, f64) {
        let n = self.grid.n_half as isize;
        self.values
            .iter()
            .enumerate()
            .fold((-n, 0.0), |(bi, bv), (k, v)| {
                if v.abs() > bv {
                    (k as isize - n, v.abs())
                } else {
                    (bi, bv)
                }
            })
    }
}

/// `(R w)_i = w(x_i)`.
pub fn restrict(function: impl Fn(f64) -> f64, grid: &Grid) -> Result<SampledSequence> {
    let values: Vec<f64> = grid.nodes().map(&function).collect();
    SampledSequence::new(*grid, values)
}

/// Which implementation of the discrete convolution to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub enum ConvolutionPath {
    /// Direct below [`FAST_CONVOLUTION_THRESHOLD`], transform-based above.
    #[default]
    Auto,
    Direct,
    Fast,
}

impl ConvolutionPath {
    pub fn use_fast(self, n_half: usize) -> bool {
        match self {
            ConvolutionPath::Auto => n_half >= FAST_CONVOLUTION_THRESHOLD,
            ConvolutionPath::Direct => false,
            ConvolutionPath::Fast => true,
        }
    }
}

impl std::str::FromStr for ConvolutionPath {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(ConvolutionPath::Auto),
            "off" | "direct" => Ok(ConvolutionPath::Direct),
            "on" | "fast" => Ok(ConvolutionPath::Fast),
            other => Err(Error::InvalidConfig(format!(
                "unknown convolution path {other:?} (expected auto, on or off)"
            ))),
        }
    }
}

/// `(w * v)_i = sum_j h w_{i-j} v_j` over `-N <= j <= N`, with `w` zero off
/// the grid.
pub fn discrete_convolution(w: &SampledSequence, v: &SampledSequence) -> Result<SampledSequence> {
    discrete_convolution_with(w, v, ConvolutionPath::Auto)
}

pub fn discrete_convolution_with(
    w: &SampledSequence,
    v: &SampledSequence,
    path: ConvolutionPath,
) -> Result<SampledSequence> {
    w.grid.check_same(&v.grid)?;
    let grid = w.grid;
    let mut out = vec![0.0; grid.len()];
    if path.use_fast(grid.n_half) {
        let conv = LagConvolver::new(w.values.clone(), grid.n_half, grid.n_half);
        let mut ws = conv.workspace();
        conv.apply_fast(&v.values, &mut out, &mut ws);
    } else {
        lag_convolution_direct(&w.values, grid.n_half, &v.values, grid.n_half, &mut out);
    }
    for o in out.iter_mut() {
        *o *= grid.h;
    }
    SampledSequence::new(grid, out)
}

/// `out_i = sum_j weights_{i-j} v_j` for `|i|, |j| <= n_half`, where
/// `weights` holds lags `-max_lag..=max_lag` and vanishes beyond.
pub(crate) fn lag_convolution_direct(
    weights: &[f64],
    max_lag: usize,
    v: &[f64],
    n_half: usize,
    out: &mut [f64],
) {
    debug_assert_eq!(weights.len(), 2 * max_lag + 1);
    debug_assert_eq!(v.len(), 2 * n_half + 1);
    let m = max_lag as isize;
    let n = n_half as isize;
    for (oi, o) in out.iter_mut().enumerate() {
        let i = oi as isize - n;
        // j in [-n, n] with |i - j| <= m
        let j_lo = (i - m).max(-n);
        let j_hi = (i + m).min(n);
        let mut acc = 0.0;
        for j in j_lo..=j_hi {
            acc += weights[(i - j + m) as usize] * v[(j + n) as usize];
        }
        *o = acc;
    }
}

/// Linear convolution against a fixed weight sequence, with the transform of
/// the weights cached for repeated application.
#[derive(Clone)]
pub struct LagConvolver {
    weights: Vec<f64>,
    max_lag: usize,
    n_half: usize,
    fft_len: usize,
    weights_hat: Vec<Complex<f64>>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for LagConvolver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LagConvolver")
            .field("max_lag", &self.max_lag)
            .field("n_half", &self.n_half)
            .field("fft_len", &self.fft_len)
            .finish()
    }
}

/// Scratch buffers for [`LagConvolver::apply_fast`].
pub struct ConvolutionWorkspace {
    buffer: Vec<Complex<f64>>,
    scratch: Vec<Complex<f64>>,
}

impl LagConvolver {
    /// `weights` covers lags `-max_lag..=max_lag`; inputs live on `-n_half..=n_half`.
    pub fn new(weights: Vec<f64>, max_lag: usize, n_half: usize) -> Self {
        assert_eq!(weights.len(), 2 * max_lag + 1);
        // full linear convolution has length 2 max_lag + 2 n_half + 1
        let fft_len = (2 * max_lag + 2 * n_half + 1).next_power_of_two();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(fft_len);
        let inverse = planner.plan_fft_inverse(fft_len);
        let mut weights_hat = vec![Complex::new(0.0, 0.0); fft_len];
        for (slot, &w) in weights_hat.iter_mut().zip(&weights) {
            slot.re = w;
        }
        let mut scratch = vec![Complex::new(0.0, 0.0); forward.get_inplace_scratch_len()];
        forward.process_with_scratch(&mut weights_hat, &mut scratch);
        LagConvolver {
            weights,
            max_lag,
            n_half,
            fft_len,
            weights_hat,
            forward,
            inverse,
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn fft_len(&self) -> usize {
        self.fft_len
    }

    pub fn workspace(&self) -> ConvolutionWorkspace {
        let scratch_len = self
            .forward
            .get_inplace_scratch_len()
            .max(self.inverse.get_inplace_scratch_len());
        ConvolutionWorkspace {
            buffer: vec![Complex::new(0.0, 0.0); self.fft_len],
            scratch: vec![Complex::new(0.0, 0.0); scratch_len],
        }
    }

    pub fn apply_direct(&self, v: &[f64], out: &mut [f64]) {
        lag_convolution_direct(&self.weights, self.max_lag, v, self.n_half, out);
    }

    pub fn apply_fast(&self, v: &[f64], out: &mut [f64], ws: &mut ConvolutionWorkspace) {
        let len = 2 * self.n_half + 1;
        debug_assert_eq!(v.len(), len);
        debug_assert_eq!(out.len(), len);
        let buf = &mut ws.buffer;
        for (k, slot) in buf.iter_mut().enumerate() {
            *slot = Complex::new(if k < len { v[k] } else { 0.0 }, 0.0);
        }
        self.forward.process_with_scratch(buf, &mut ws.scratch);
        for (b, w) in buf.iter_mut().zip(&self.weights_hat) {
            *b *= *w;
        }
        self.inverse.process_with_scratch(buf, &mut ws.scratch);
        // storage index a of weights is lag a - max_lag, storage index b of v
        // is node b - n_half; output node i sits at a + b = i + n_half + max_lag
        let scale = 1.0 / self.fft_len as f64;
        let offset = self.max_lag;
        for (k, o) in out.iter_mut().enumerate() {
            *o = buf[k + offset].re * scale;
        }
    }

    pub fn apply(
        &self,
        v: &[f64],
        out: &mut [f64],
        ws: &mut ConvolutionWorkspace,
        path: ConvolutionPath,
    ) {
        if path.use_fast(self.n_half) {
            self.apply_fast(v, out, ws);
        } else {
            self.apply_direct(v, out);
        }
    }
}

/// `(D w)_i = (w_{i+1} - w_{i-1}) / 2h`, with `w_{+-(N+1)} = 0`.
pub fn central_difference(w: &SampledSequence) -> SampledSequence {
    let grid = w.grid;
    let inv = 0.5 / grid.h;
    let values = grid
        .indices()
        .map(|i| (w.get(i + 1) - w.get(i - 1)) * inv)
        .collect();
    SampledSequence { grid, values }
}

/// Norm selector for [`lp_norm`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Norm {
    L1,
    L2,
    Inf,
}

/// `(sum_i h |w_i|^p)^{1/p}` for `p` in `{1, 2}`, `max_i |w_i|` for `p = inf`.
pub fn lp_norm(w: &SampledSequence, p: Norm) -> f64 {
    let h = w.grid.h;
    match p {
        Norm::L1 => h * w.values.iter().map(|v| v.abs()).sum::<f64>(),
        Norm::L2 => (h * w.values.iter().map(|v| v * v).sum::<f64>()).sqrt(),
        Norm::Inf => w.values.iter().fold(0.0, |m, v| m.max(v.abs())),
    }
}

/// `|reference - sum_i h f(x_i)|`, the rectangle-rule error over the grid.
pub fn quadrature_error_probe(function: impl Fn(f64) -> f64, reference: f64, grid: &Grid) -> f64 {
    let sum: f64 = grid.nodes().map(&function).sum::<f64>() * grid.h;
    (reference - sum).abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::bbm_kernel;

    fn grid(h: f64, n: usize) -> Grid {
        Grid::new(h, n).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(Grid::new(0.0, 3).is_err());
        assert!(Grid::new(-0.1, 3).is_err());
        assert!(Grid::new(0.1, 0).is_err());
        let g = Grid::covering(30.0, 0.25).unwrap();
        assert_eq!(g.n_half(), 120);
        assert_eq!(g.len(), 241);
        assert!(Grid::covering(30.0, 0.7).is_err());
        assert_eq!(Grid::covering(12.0, 0.05).unwrap().n_half(), 240);
    }

    #[test]
    fn restrict_examples() {
        let g = grid(0.7, 4);
        assert!(restrict(|_| 0.0, &g)
            .unwrap()
            .values()
            .iter()
            .all(|&v| v == 0.0));
        let k = bbm_kernel();
        let r = restrict(|x| k.evaluate(x), &grid(1.0, 1)).unwrap();
        let e = 0.5 * (-1.0f64).exp();
        assert_eq!(r.values(), &[e, 0.5, e]);
        let r = restrict(|x| x, &grid(0.5, 2)).unwrap();
        assert_eq!(r.values(), &[-1.0, -0.5, 0.0, 0.5, 1.0]);
        assert!(matches!(
            restrict(|x| 1.0 / x, &grid(0.5, 2)),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn convolution_with_discrete_delta_is_identity() {
        for path in [ConvolutionPath::Direct, ConvolutionPath::Fast] {
            let g = grid(0.3, 40);
            let delta =
                SampledSequence::from_fn(g, |i| if i == 0 { 1.0 / g.h() } else { 0.0 }).unwrap();
            let v = SampledSequence::from_fn(g, |i| (i as f64 * 0.37).sin()).unwrap();
            let out = discrete_convolution_with(&delta, &v, path).unwrap();
            for (a, b) in out.values().iter().zip(v.values()) {
                assert!((a - b).abs() < 1e-14, "{path:?}");
            }
        }
        // direct path reproduces v bit-for-bit
        let g = grid(0.5, 5);
        let delta = SampledSequence::from_fn(g, |i| if i == 0 { 2.0 } else { 0.0 }).unwrap();
        let v = SampledSequence::from_fn(g, |i| i as f64 * 1.25 - 0.3).unwrap();
        let out = discrete_convolution(&delta, &v).unwrap();
        assert_eq!(out.values(), v.values());
    }

    #[test]
    fn convolution_of_indicators() {
        let g = grid(0.5, 4);
        let w = SampledSequence::from_fn(g, |i| if i.abs() <= 1 { 1.0 } else { 0.0 }).unwrap();
        let v = SampledSequence::from_fn(g, |i| if i == 0 { 1.0 } else { 0.0 }).unwrap();
        let out = discrete_convolution(&w, &v).unwrap();
        for i in g.indices() {
            let expect = if i.abs() <= 1 { 0.5 } else { 0.0 };
            assert_eq!(out.get(i), expect);
        }
    }

    #[test]
    fn convolution_grid_mismatch() {
        let a = SampledSequence::zeros(grid(0.5, 4));
        let b = SampledSequence::zeros(grid(0.25, 4));
        assert!(matches!(
            discrete_convolution(&a, &b),
            Err(Error::GridMismatch { .. })
        ));
    }

    #[test]
    fn truncation_drops_out_of_range_lags() {
        let g = grid(1.0, 2);
        let w = SampledSequence::from_fn(g, |i| if i == 2 { 1.0 } else { 0.0 }).unwrap();
        let v = SampledSequence::from_fn(g, |_| 1.0).unwrap();
        let out = discrete_convolution(&w, &v).unwrap();
        // out_i = v_{i-2}, zero while i - 2 < -2
        assert_eq!(out.values(), &[0.0, 0.0, 1.0, 1.0, 1.0]);
        let w = SampledSequence::from_fn(g, |i| if i == -2 { 1.0 } else { 0.0 }).unwrap();
        let v = SampledSequence::from_fn(g, |i| i as f64).unwrap();
        let out = discrete_convolution(&w, &v).unwrap();
        // out_i = v_{i+2}, zero once i + 2 > 2
        assert_eq!(out.values(), &[0.0, 1.0, 2.0, 0.0, 0.0]);
    }

    #[test]
    fn central_difference_examples() {
        let g = grid(0.1, 20);
        let c = restrict(|_| 3.5, &g).unwrap();
        let d = central_difference(&c);
        let n = g.n_half() as isize;
        for i in -n + 1..n {
            assert_eq!(d.get(i), 0.0);
        }
        // boundary sees the zero extension
        assert_eq!(d.get(n), -3.5 / 0.2);

        let q = restrict(|x| x * x, &g).unwrap();
        let d = central_difference(&q);
        for i in -n + 1..n {
            assert!((d.get(i) - 2.0 * g.node(i)).abs() < 1e-12);
        }

        let s = restrict(f64::sin, &g).unwrap();
        let d = central_difference(&s);
        let bound = g.h() * g.h() / 6.0;
        for i in -n + 1..n {
            assert!((d.get(i) - g.node(i).cos()).abs() <= bound);
        }
    }

    #[test]
    fn norms() {
        let g = grid(0.5, 1);
        assert_eq!(lp_norm(&SampledSequence::zeros(g), Norm::L1), 0.0);
        assert_eq!(lp_norm(&SampledSequence::zeros(g), Norm::L2), 0.0);
        assert_eq!(lp_norm(&SampledSequence::zeros(g), Norm::Inf), 0.0);
        let single = SampledSequence::from_fn(g, |i| if i == 1 { -3.0 } else { 0.0 }).unwrap();
        assert_eq!(lp_norm(&single, Norm::L1), 1.5);
        let ones = SampledSequence::from_fn(g, |_| 1.0).unwrap();
        assert_eq!(lp_norm(&ones, Norm::Inf), 1.0);
        assert!((lp_norm(&ones, Norm::L2) - 1.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn sequence_rejects_non_finite() {
        let g = grid(1.0, 1);
        assert!(SampledSequence::new(g, vec![0.0, f64::NAN, 0.0]).is_err());
        assert!(SampledSequence::new(g, vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn fast_path_agrees_on_asymmetric_lag_ranges() {
        let weights: Vec<f64> = (0..41).map(|k| ((k * 7 % 13) as f64 - 6.0) * 0.1).collect();
        let v: Vec<f64> = (0..21).map(|k| ((k * 5 % 11) as f64 - 5.0) * 0.3).collect();
        let conv = LagConvolver::new(weights, 20, 10);
        let mut a = vec![0.0; 21];
        let mut b = vec![0.0; 21];
        conv.apply_direct(&v, &mut a);
        let mut ws = conv.workspace();
        conv.apply_fast(&v, &mut b, &mut ws);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-13);
        }
    }
}
