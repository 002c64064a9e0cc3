//! Convolution kernels.
//!
//! A [`Kernel`] pairs a point-evaluable profile with the measure-theoretic
//! metadata the error analysis consumes: `|mu|(R)` for `mu = beta'`,
//! optionally `|nu|(R)` for `nu = beta''`, the `L^1` norm, and a declared
//! smoothness class selecting the expected convergence order.
//!
//! Point values follow the right-continuous convention
//! `beta(x) = mu((-inf, x])`. The built-in kernels are continuous; tabulated
//! kernels declare their jumps explicitly.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, SQRT_2};
use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};

/// `|mu|(R)` for the Rosenau kernel, `coth(pi/2) / sqrt(2)`.
///
/// Cross-checked in the test suite against adaptive quadrature of
/// `|beta'(x)| = e^{-|x|/sqrt 2} |sin(|x|/sqrt 2)| / 2`, one period at a time.
pub const ROSENAU_DERIVATIVE_TV: f64 = 0.770_980_734_266_016_8;

/// `|nu|(R)` for the Rosenau kernel, `e^{-pi/4} (1 + coth(pi/2)) / sqrt(2)`.
///
/// `beta''` is continuous and has density
/// `e^{-|x|/sqrt 2} (sin(|x|/sqrt 2) - cos(|x|/sqrt 2)) / (2 sqrt 2)`; the
/// quadrature oracle integrates its absolute value between sign changes.
pub const ROSENAU_SECOND_DERIVATIVE_TV: f64 = 0.673_916_454_469_735_2;

/// `||beta||_{L^1}` for the Rosenau kernel. The kernel dips below zero on
/// `(3 pi / (2 sqrt 2), 7 pi / (2 sqrt 2))` and every later period, so this
/// exceeds the integral `beta_hat(0) = 1`; same quadrature oracle.
pub const ROSENAU_L1_NORM: f64 = 1.140_093_467_050_976_1;

/// Expected discretization order of the semi-discrete scheme for a kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SmoothnessClass {
    /// `beta'` is a finite measure: `O(h)`.
    OrderOne,
    /// `beta` in `W^{1,1}` and `beta''` a finite measure: `O(h^2)`.
    OrderTwo,
}

impl SmoothnessClass {
    pub fn expected_order(self) -> f64 {
        match self {
            SmoothnessClass::OrderOne => 1.0,
            SmoothnessClass::OrderTwo => 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Profile {
    Bbm,
    Rosenau,
    Tabulated(TabulatedKernel),
}

/// An immutable convolution kernel with its derivative-measure metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    name: String,
    profile: Profile,
    derivative_total_variation: f64,
    second_derivative_total_variation: Option<f64>,
    smoothness_class: SmoothnessClass,
    l1_norm: f64,
}

impl Kernel {
    /// The exponential kernel `e^{-|x|} / 2`, Green's function of `1 - D^2`.
    pub fn bbm() -> Self {
        Kernel {
            name: "bbm".to_string(),
            profile: Profile::Bbm,
            // beta' = -sign(x) beta
            derivative_total_variation: 1.0,
            // point mass of size 1 at the origin plus the density beta
            second_derivative_total_variation: Some(2.0),
            smoothness_class: SmoothnessClass::OrderTwo,
            l1_norm: 1.0,
        }
    }

    /// Green's function of `1 + D^4`.
    pub fn rosenau() -> Self {
        Kernel {
            name: "rosenau".to_string(),
            profile: Profile::Rosenau,
            derivative_total_variation: ROSENAU_DERIVATIVE_TV,
            second_derivative_total_variation: Some(ROSENAU_SECOND_DERIVATIVE_TV),
            smoothness_class: SmoothnessClass::OrderTwo,
            l1_norm: ROSENAU_L1_NORM,
        }
    }

    /// Wraps a table. `derivative_total_variation` of `None` takes the exact
    /// variation of the piecewise-linear interpolant.
    pub fn tabulated(
        table: TabulatedKernel,
        derivative_total_variation: Option<f64>,
        smoothness_class: SmoothnessClass,
    ) -> Result<Self> {
        let exact_tv = table.derivative_variation();
        let derivative_total_variation = derivative_total_variation.unwrap_or(exact_tv);
        if !(derivative_total_variation.is_finite() && derivative_total_variation >= 0.0) {
            return Err(Error::InvalidKernel(format!(
                "derivative total variation must be finite and nonnegative, got {derivative_total_variation}"
            )));
        }
        let second_derivative_total_variation = table.second_derivative_variation();
        if smoothness_class == SmoothnessClass::OrderTwo
            && second_derivative_total_variation.is_none()
        {
            return Err(Error::InvalidKernel(
                "OrderTwo requires a continuous table (beta'' must be a finite measure)".into(),
            ));
        }
        let l1_norm = table.l1_norm();
        Ok(Kernel {
            name: "tabulated".to_string(),
            profile: Profile::Tabulated(table),
            derivative_total_variation,
            second_derivative_total_variation,
            smoothness_class,
            l1_norm,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    #[inline]
    pub fn evaluate(&self, x: f64) -> f64 {
        match &self.profile {
            Profile::Bbm => 0.5 * (-x.abs()).exp(),
            Profile::Rosenau => {
                let y = x.abs() / SQRT_2;
                (-y).exp() * (y.cos() + y.sin()) / (2.0 * SQRT_2)
            }
            Profile::Tabulated(table) => table.evaluate(x),
        }
    }

    pub fn derivative_total_variation(&self) -> f64 {
        self.derivative_total_variation
    }

    pub fn second_derivative_total_variation(&self) -> Option<f64> {
        self.second_derivative_total_variation
    }

    pub fn smoothness_class(&self) -> SmoothnessClass {
        self.smoothness_class
    }

    pub fn l1_norm(&self) -> f64 {
        self.l1_norm
    }

    /// `int beta dx`, the Fourier transform at zero.
    pub fn integral(&self) -> f64 {
        match &self.profile {
            Profile::Bbm | Profile::Rosenau => 1.0,
            Profile::Tabulated(table) => table.integral(),
        }
    }

    /// Decay length scale of the kernel tails (`1` for BBM, `sqrt 2` for
    /// Rosenau); tabulated kernels have compact support and report `None`.
    pub fn decay_scale(&self) -> Option<f64> {
        match self.profile {
            Profile::Bbm => Some(1.0),
            Profile::Rosenau => Some(SQRT_2),
            Profile::Tabulated(_) => None,
        }
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} (|mu|={}, ||beta||_1={}, {:?})",
            self.name, self.derivative_total_variation, self.l1_norm, self.smoothness_class
        )
    }
}

pub fn bbm_kernel() -> Kernel {
    Kernel::bbm()
}

pub fn rosenau_kernel() -> Kernel {
    Kernel::rosenau()
}

/// Continuous piecewise-linear kernel from `(nodes, values)`; zero outside
/// the tabulated support.
pub fn tabulated_kernel(
    nodes: Vec<f64>,
    values: Vec<f64>,
    derivative_total_variation: f64,
    smoothness_class: SmoothnessClass,
) -> Result<Kernel> {
    let table = TabulatedKernel::new(nodes, values)?;
    Kernel::tabulated(table, Some(derivative_total_variation), smoothness_class)
}

/// Piecewise-linear kernel table with optional jumps at nodes.
///
/// Each node carries a value (taken at and to the right of the node) and a
/// left limit; they differ only at declared jumps. Outside
/// `[first, last)` the kernel is zero, so a nonzero last value is a jump
/// down to zero and evaluates to `0` at the last node itself.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedKernel {
    nodes: Vec<f64>,
    values: Vec<f64>,
    left_limits: Vec<f64>,
}

impl TabulatedKernel {
    pub fn new(nodes: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if nodes.len() != values.len() {
            return Err(Error::InvalidKernel(format!(
                "{} nodes but {} values",
                nodes.len(),
                values.len()
            )));
        }
        if nodes.len() < 2 {
            return Err(Error::InvalidKernel("need at least two nodes".into()));
        }
        if let Some(bad) = nodes.iter().chain(&values).find(|v| !v.is_finite()) {
            return Err(Error::InvalidKernel(format!(
                "non-finite table entry {bad}"
            )));
        }
        if let Some(w) = nodes.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::InvalidKernel(format!(
                "nodes must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        let left_limits = values.clone();
        Ok(TabulatedKernel {
            nodes,
            values,
            left_limits,
        })
    }

    /// Declares a jump at an existing node: `left_limit` is approached from
    /// the left, the stored value holds at the node and to its right.
    pub fn with_jump(mut self, at: f64, left_limit: f64) -> Result<Self> {
        if !left_limit.is_finite() {
            return Err(Error::InvalidKernel("non-finite left limit".into()));
        }
        let k = self
            .nodes
            .iter()
            .position(|&x| x == at)
            .ok_or_else(|| Error::InvalidKernel(format!("no node at {at} to attach a jump")))?;
        if k == 0 {
            return Err(Error::InvalidKernel(
                "left limit at the first node is always zero".into(),
            ));
        }
        self.left_limits[k] = left_limit;
        Ok(self)
    }

    /// Parses a two-column `abscissa value` table. `#` starts a comment. A
    /// repeated abscissa declares a jump: the first row is the left limit,
    /// the second the value at the node.
    pub fn parse(text: &str) -> Result<Self> {
        let mut nodes: Vec<f64> = Vec::new();
        let mut values: Vec<f64> = Vec::new();
        let mut jumps: Vec<(f64, f64)> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut cols = line.split_whitespace();
            let parse_col = |col: Option<&str>| -> Result<f64> {
                let col = col.ok_or_else(|| Error::Parse {
                    line: lineno + 1,
                    message: "expected two columns".into(),
                })?;
                col.parse::<f64>().map_err(|e| Error::Parse {
                    line: lineno + 1,
                    message: format!("{col:?}: {e}"),
                })
            };
            let x = parse_col(cols.next())?;
            let v = parse_col(cols.next())?;
            if cols.next().is_some() {
                return Err(Error::Parse {
                    line: lineno + 1,
                    message: "expected exactly two columns".into(),
                });
            }
            if nodes.last() == Some(&x) {
                if jumps.last().map(|j| j.0) == Some(x) {
                    return Err(Error::Parse {
                        line: lineno + 1,
                        message: format!("abscissa {x} appears more than twice"),
                    });
                }
                let left = values.pop().expect("nonempty");
                values.push(v);
                jumps.push((x, left));
            } else {
                nodes.push(x);
                values.push(v);
            }
        }
        let mut table = TabulatedKernel::new(nodes, values)?;
        for (x, left) in jumps {
            table = table.with_jump(x, left)?;
        }
        Ok(table)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
        Self::parse(&text)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn evaluate(&self, x: f64) -> f64 {
        let n = self.nodes.len();
        if !(x >= self.nodes[0] && x < self.nodes[n - 1]) {
            return 0.0;
        }
        // last k with nodes[k] <= x; k < n - 1 here
        let k = self.nodes.partition_point(|&node| node <= x) - 1;
        if x == self.nodes[k] {
            return self.values[k];
        }
        let (x0, x1) = (self.nodes[k], self.nodes[k + 1]);
        let (v0, v1) = (self.values[k], self.left_limits[k + 1]);
        let s = (x - x0) / (x1 - x0);
        v0 + s * (v1 - v0)
    }

    /// Exact `|beta'|(R)` of the interpolant, jumps and support edges included.
    pub fn derivative_variation(&self) -> f64 {
        let n = self.nodes.len();
        // jump up from zero at the first node, drop to zero at the last
        let mut tv = self.values[0].abs() + self.left_limits[n - 1].abs();
        for k in 0..n - 1 {
            tv += (self.left_limits[k + 1] - self.values[k]).abs();
        }
        for k in 1..n - 1 {
            tv += (self.values[k] - self.left_limits[k]).abs();
        }
        tv
    }

    /// `|beta''|(R)` when it is a finite measure, i.e. the interpolant is
    /// continuous (no interior jumps and zero at both ends).
    pub fn second_derivative_variation(&self) -> Option<f64> {
        let n = self.nodes.len();
        let continuous = self.values[0] == 0.0
            && self.left_limits[n - 1] == 0.0
            && (1..n - 1).all(|k| self.values[k] == self.left_limits[k]);
        if !continuous {
            return None;
        }
        let slopes: Vec<f64> = (0..n - 1)
            .map(|k| {
                (self.left_limits[k + 1] - self.values[k]) / (self.nodes[k + 1] - self.nodes[k])
            })
            .collect();
        let mut tv = slopes[0].abs() + slopes[n - 2].abs();
        tv += slopes.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>();
        Some(tv)
    }

    /// Exact integral of the interpolant.
    pub fn integral(&self) -> f64 {
        (0..self.nodes.len() - 1)
            .map(|k| {
                0.5 * (self.nodes[k + 1] - self.nodes[k])
                    * (self.values[k] + self.left_limits[k + 1])
            })
            .sum()
    }

    /// Exact `L^1` norm of the interpolant.
    pub fn l1_norm(&self) -> f64 {
        (0..self.nodes.len() - 1)
            .map(|k| {
                let dx = self.nodes[k + 1] - self.nodes[k];
                segment_abs_integral(self.values[k], self.left_limits[k + 1], dx)
            })
            .sum()
    }
}

fn segment_abs_integral(a: f64, b: f64, dx: f64) -> f64 {
    if a * b >= 0.0 {
        0.5 * dx * (a.abs() + b.abs())
    } else {
        // split at the zero crossing
        0.5 * dx * (a * a + b * b) / (a.abs() + b.abs())
    }
}

// keep the closed forms next to the stored constants
#[allow(dead_code)]
fn rosenau_closed_forms() -> (f64, f64) {
    let coth = 1.0 / FRAC_PI_2.tanh();
    (coth / SQRT_2, (-FRAC_PI_4).exp() * (1.0 + coth) / SQRT_2)
}
