//! The truncated semi-discrete system
//! `dv_i/dt = -sum_{j=-N}^{N} h Dbeta(x_i - x_j) f(v_j)`.
//!
//! The spatial derivative is carried by the kernel: the stencil
//! `Dbeta_h(k) = (beta((k+1)h) - beta((k-1)h)) / 2h` is sampled once over all
//! lags `-2N..=2N` that can occur between two nodes.

use std::fmt;

use crate::discrete_ops::{
    ConvolutionPath, ConvolutionWorkspace, Grid, LagConvolver, SampledSequence, StateVector,
};
use crate::error::{Error, Result};
use crate::kernel::Kernel;

pub const DEFAULT_BLOW_UP_THRESHOLD: f64 = 1e6;

/// Polynomial nonlinearity `f(u) = sum_k a_k u^{p_k}` with every `p_k >= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Nonlinearity {
    terms: Vec<(u32, f64)>,
}

impl Nonlinearity {
    pub fn polynomial(terms: Vec<(u32, f64)>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::InvalidNonlinearity("no terms".into()));
        }
        for &(p, a) in &terms {
            if p == 0 {
                return Err(Error::InvalidNonlinearity(
                    "constant term would break f(0) = 0".into(),
                ));
            }
            if !a.is_finite() {
                return Err(Error::InvalidNonlinearity(format!(
                    "coefficient {a} of u^{p}"
                )));
            }
        }
        let mut terms = terms;
        terms.sort_by_key(|t| t.0);
        Ok(Nonlinearity { terms })
    }

    /// `f(u) = u`.
    pub fn linear() -> Self {
        Nonlinearity {
            terms: vec![(1, 1.0)],
        }
    }

    /// `f(u) = u + u^{p+1}`, the generalized BBM nonlinearity.
    pub fn bbm(p: u32) -> Self {
        Nonlinearity {
            terms: vec![(1, 1.0), (p + 1, 1.0)],
        }
    }

    /// `f(u) = u - 10 u^3 + 12 u^5`, carrying the `sech` solitary wave.
    pub fn rosenau() -> Self {
        Nonlinearity {
            terms: vec![(1, 1.0), (3, -10.0), (5, 12.0)],
        }
    }

    /// Parses `"u - 10u^3 + 12 u^5"`-style specs. Terms are `[coef][*]u[^p]`.
    pub fn parse(spec: &str) -> Result<Self> {
        let cleaned: String = spec.chars().filter(|c| !c.is_whitespace()).collect();
        if cleaned.is_empty() {
            return Err(Error::InvalidNonlinearity("empty specification".into()));
        }
        let bad = |msg: &str| Error::InvalidNonlinearity(format!("{spec:?}: {msg}"));
        let mut terms = Vec::new();
        let mut rest = cleaned.as_str();
        while !rest.is_empty() {
            let (sign, body) = match rest.as_bytes()[0] {
                b'+' => (1.0, &rest[1..]),
                b'-' => (-1.0, &rest[1..]),
                _ if terms.is_empty() => (1.0, rest),
                _ => return Err(bad("expected + or - between terms")),
            };
            let end = body[1.min(body.len())..]
                .find(['+', '-'])
                .map(|k| k + 1)
                .unwrap_or(body.len());
            // exponent signs like 1e-3 are not supported; keep terms simple
            let term = &body[..end];
            rest = &body[end..];
            let upos = term.find('u').ok_or_else(|| bad("every term needs a u"))?;
            let coef_str = term[..upos].trim_end_matches('*');
            let coef = if coef_str.is_empty() {
                1.0
            } else {
                coef_str
                    .parse::<f64>()
                    .map_err(|_| bad("bad coefficient"))?
            };
            let power_str = &term[upos + 1..];
            let power = if power_str.is_empty() {
                1
            } else {
                power_str
                    .strip_prefix('^')
                    .ok_or_else(|| bad("expected ^ after u"))?
                    .parse::<u32>()
                    .map_err(|_| bad("bad exponent"))?
            };
            terms.push((power, sign * coef));
        }
        Nonlinearity::polynomial(terms)
    }

    pub fn terms(&self) -> &[(u32, f64)] {
        &self.terms
    }

    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        self.terms.iter().map(|&(p, a)| a * u.powi(p as i32)).sum()
    }

    /// `max_{|z| <= delta} |f(z)|`, sampled on 2001 points of `[-delta, delta]`.
    pub fn max_abs_on(&self, delta: f64) -> f64 {
        if delta <= 0.0 {
            return 0.0;
        }
        const SAMPLES: usize = 2000;
        (0..=SAMPLES)
            .map(|k| {
                let z = -delta + 2.0 * delta * k as f64 / SAMPLES as f64;
                self.eval(z).abs()
            })
            .fold(0.0, f64::max)
    }
}

impl fmt::Display for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, &(p, a)) in self.terms.iter().enumerate() {
            let sign = if a < 0.0 { "-" } else { "+" };
            if k == 0 {
                if a < 0.0 {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {sign} ")?;
            }
            if a.abs() != 1.0 {
                write!(f, "{}", a.abs())?;
            }
            write!(f, "u")?;
            if p != 1 {
                write!(f, "^{p}")?;
            }
        }
        Ok(())
    }
}

/// `f(v) = (f(v_i))`. Non-finite results are reported as blow-up.
pub fn apply_nonlinearity(nl: &Nonlinearity, state: &StateVector) -> Result<StateVector> {
    let mut values = Vec::with_capacity(state.values().len());
    for &v in state.values() {
        let fv = nl.eval(v);
        if !fv.is_finite() {
            return Err(Error::BlowUp {
                norm: f64::INFINITY,
                threshold: f64::INFINITY,
            });
        }
        values.push(fv);
    }
    SampledSequence::new(*state.grid(), values)
}

/// `sum_i h v_i`.
pub fn discrete_mass(state: &StateVector) -> f64 {
    state.grid().h() * state.values().iter().sum::<f64>()
}

/// Anything the time integrator can advance: `dy/dt = F(y)`.
pub trait OdeRhs {
    type Workspace;

    fn dim(&self) -> usize;

    fn workspace(&self) -> Self::Workspace;

    fn eval(&self, y: &[f64], dydt: &mut [f64], ws: &mut Self::Workspace) -> Result<()>;
}

/// The right-hand side of the truncated system on a fixed grid.
#[derive(Debug, Clone)]
pub struct TruncatedSystem {
    grid: Grid,
    stencil: Vec<f64>,
    nonlinearity: Nonlinearity,
    blow_up_threshold: f64,
    convolver: LagConvolver,
    path: ConvolutionPath,
}

/// Scratch space for one integration.
pub struct SystemWorkspace {
    fv: Vec<f64>,
    conv: ConvolutionWorkspace,
}

/// `Dbeta_h(k)` for `k` in `-2N..=2N`.
pub fn sample_stencil(kernel: &Kernel, grid: &Grid) -> Result<Vec<f64>> {
    let h = grid.h();
    let m = 2 * grid.n_half() as isize;
    (-m..=m)
        .map(|k| {
            let plus = kernel.evaluate((k + 1) as f64 * h);
            let minus = kernel.evaluate((k - 1) as f64 * h);
            let d = (plus - minus) / (2.0 * h);
            if d.is_finite() {
                Ok(d)
            } else {
                Err(Error::NonFinite {
                    x: k as f64 * h,
                    value: d,
                })
            }
        })
        .collect()
}

pub fn build_system(
    kernel: &Kernel,
    grid: Grid,
    nonlinearity: Nonlinearity,
    blow_up_threshold: f64,
) -> Result<TruncatedSystem> {
    if !(blow_up_threshold > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "blow-up threshold must be positive, got {blow_up_threshold}"
        )));
    }
    let stencil = sample_stencil(kernel, &grid)?;
    let weighted: f64 = grid.h() * stencil.iter().map(|s| s.abs()).sum::<f64>();
    assert!(
        weighted <= kernel.derivative_total_variation() + 1e-10,
        "stencil l1 norm {weighted} exceeds |mu|(R) = {} for {}",
        kernel.derivative_total_variation(),
        kernel.name()
    );
    Ok(TruncatedSystem::from_stencil(
        grid,
        stencil,
        nonlinearity,
        blow_up_threshold,
    ))
}

impl TruncatedSystem {
    /// Assembles a system from an explicit stencil over lags `-2N..=2N`.
    pub fn from_stencil(
        grid: Grid,
        stencil: Vec<f64>,
        nonlinearity: Nonlinearity,
        blow_up_threshold: f64,
    ) -> Self {
        let max_lag = 2 * grid.n_half();
        assert_eq!(
            stencil.len(),
            2 * max_lag + 1,
            "stencil must cover lags -2N..=2N"
        );
        // fold h into the weights once
        let weights: Vec<f64> = stencil.iter().map(|s| grid.h() * s).collect();
        let convolver = LagConvolver::new(weights, max_lag, grid.n_half());
        TruncatedSystem {
            grid,
            stencil,
            nonlinearity,
            blow_up_threshold,
            convolver,
            path: ConvolutionPath::Auto,
        }
    }

    pub fn with_path(mut self, path: ConvolutionPath) -> Self {
        self.path = path;
        self
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Stencil values for lags `-2N..=2N`.
    pub fn stencil(&self) -> &[f64] {
        &self.stencil
    }

    /// Stencil at signed lag `k`.
    pub fn stencil_at(&self, k: isize) -> f64 {
        let m = 2 * self.grid.n_half() as isize;
        if k.abs() > m {
            0.0
        } else {
            self.stencil[(k + m) as usize]
        }
    }

    /// `sum_k h |Dbeta_h(k)|`.
    pub fn stencil_l1_norm(&self) -> f64 {
        self.grid.h() * self.stencil.iter().map(|s| s.abs()).sum::<f64>()
    }

    pub fn nonlinearity(&self) -> &Nonlinearity {
        &self.nonlinearity
    }

    pub fn blow_up_threshold(&self) -> f64 {
        self.blow_up_threshold
    }

    pub fn path(&self) -> ConvolutionPath {
        self.path
    }

    /// `(B^N)_{ij} = h Dbeta(x_i - x_j)` as a dense row-major matrix.
    pub fn matrix(&self) -> Vec<Vec<f64>> {
        let h = self.grid.h();
        self.grid
            .indices()
            .map(|i| {
                self.grid
                    .indices()
                    .map(|j| h * self.stencil_at(i - j))
                    .collect()
            })
            .collect()
    }

    pub fn rhs(&self, state: &StateVector) -> Result<StateVector> {
        if state.grid() != &self.grid {
            let g = state.grid();
            return Err(Error::GridMismatch {
                h_left: self.grid.h(),
                n_left: self.grid.n_half(),
                h_right: g.h(),
                n_right: g.n_half(),
            });
        }
        let mut ws = OdeRhs::workspace(self);
        let mut out = vec![0.0; self.grid.len()];
        self.eval(state.values(), &mut out, &mut ws)?;
        SampledSequence::new(self.grid, out)
    }

    /// The truncated sum evaluated with an explicit path, bypassing the
    /// configured one.
    pub fn rhs_with(&self, state: &StateVector, path: ConvolutionPath) -> Result<StateVector> {
        self.clone().with_path(path).rhs(state)
    }
}

impl OdeRhs for TruncatedSystem {
    type Workspace = SystemWorkspace;

    fn dim(&self) -> usize {
        self.grid.len()
    }

    fn workspace(&self) -> SystemWorkspace {
        SystemWorkspace {
            fv: vec![0.0; self.grid.len()],
            conv: self.convolver.workspace(),
        }
    }

    fn eval(&self, y: &[f64], dydt: &mut [f64], ws: &mut SystemWorkspace) -> Result<()> {
        let norm = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !(norm <= self.blow_up_threshold) {
            return Err(Error::BlowUp {
                norm,
                threshold: self.blow_up_threshold,
            });
        }
        for (fv, &v) in ws.fv.iter_mut().zip(y) {
            *fv = self.nonlinearity.eval(v);
        }
        self.convolver.apply(&ws.fv, dydt, &mut ws.conv, self.path);
        let mut finite = true;
        for d in dydt.iter_mut() {
            *d = -*d;
            finite &= d.is_finite();
        }
        if !finite {
            return Err(Error::BlowUp {
                norm,
                threshold: self.blow_up_threshold,
            });
        }
        Ok(())
    }
}

/// Boundary-band amplitude `delta` and `eps(delta) = max_{|z|<=delta} |f(z)|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandDiagnostics {
    pub delta: f64,
    pub eps_delta: f64,
}

/// Largest `|v_i|` over the outermost `width` nodes on each side.
pub fn boundary_band(state: &StateVector, width: usize, nl: &Nonlinearity) -> BandDiagnostics {
    let v = state.values();
    let width = width.clamp(1, v.len().div_ceil(2));
    let delta = v[..width]
        .iter()
        .chain(&v[v.len() - width..])
        .fold(0.0f64, |m, x| m.max(x.abs()));
    BandDiagnostics {
        delta,
        eps_delta: nl.max_abs_on(delta),
    }
}
