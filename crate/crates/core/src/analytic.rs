//! Closed-form solitary waves and exponential decay envelopes.

use std::f64::consts::SQRT_2;

use crate::discrete_ops::{restrict, Grid, StateVector};
use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::system::Nonlinearity;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WaveFamily {
    /// `u = A sech^{2/p}(B (x - c t - x0))` for `f(u) = u + u^{p+1}` with
    /// the exponential kernel.
    GeneralizedBbm { p: u32, c: f64, x0: f64 },
    /// `u = sech(x - t/2 - x0)` for `f(u) = u - 10u^3 + 12u^5` with the
    /// Rosenau kernel.
    Rosenau { x0: f64 },
}

/// A travelling solitary wave with its derived amplitude, width and speed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolitaryWave {
    family: WaveFamily,
    amplitude: f64,
    width: f64,
    speed: f64,
}

impl SolitaryWave {
    pub fn generalized_bbm(p: u32, c: f64, x0: f64) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidConfig("BBM power p must be positive".into()));
        }
        if !(c > 1.0 && c.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "BBM wave speed must exceed 1, got {c}"
            )));
        }
        if !x0.is_finite() {
            return Err(Error::InvalidConfig("non-finite wave position".into()));
        }
        let pf = p as f64;
        let base = (pf + 2.0) * (c - 1.0) / 2.0;
        let amplitude = if p == 1 { base } else { base.powf(1.0 / pf) };
        let width = (pf / 2.0) * (1.0 - 1.0 / c).sqrt();
        Ok(SolitaryWave {
            family: WaveFamily::GeneralizedBbm { p, c, x0 },
            amplitude,
            width,
            speed: c,
        })
    }

    pub fn rosenau(x0: f64) -> Result<Self> {
        if !x0.is_finite() {
            return Err(Error::InvalidConfig("non-finite wave position".into()));
        }
        Ok(SolitaryWave {
            family: WaveFamily::Rosenau { x0 },
            amplitude: 1.0,
            width: 1.0,
            speed: 0.5,
        })
    }

    pub fn family(&self) -> WaveFamily {
        self.family
    }

    /// `A`.
    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    /// `B`.
    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn speed(&self) -> f64 {
        self.speed
    }

    pub fn position(&self) -> f64 {
        match self.family {
            WaveFamily::GeneralizedBbm { x0, .. } | WaveFamily::Rosenau { x0 } => x0,
        }
    }

    /// Same wave moved to a new initial position.
    pub fn translated_to(&self, x0: f64) -> Self {
        let mut wave = *self;
        wave.family = match self.family {
            WaveFamily::GeneralizedBbm { p, c, .. } => WaveFamily::GeneralizedBbm { p, c, x0 },
            WaveFamily::Rosenau { .. } => WaveFamily::Rosenau { x0 },
        };
        wave
    }

    /// Kernel and nonlinearity the wave solves.
    pub fn equation(&self) -> (Kernel, Nonlinearity) {
        match self.family {
            WaveFamily::GeneralizedBbm { p, .. } => (Kernel::bbm(), Nonlinearity::bbm(p)),
            WaveFamily::Rosenau { .. } => (Kernel::rosenau(), Nonlinearity::rosenau()),
        }
    }

    /// Exact value at `(x, t)`.
    #[inline]
    pub fn evaluate(&self, x: f64, t: f64) -> f64 {
        let xi = (x - self.position()) - self.speed * t;
        let sech = 1.0 / (self.width * xi).cosh();
        match self.family {
            WaveFamily::GeneralizedBbm { p, .. } => {
                let profile = match p {
                    1 => sech * sech,
                    2 => sech,
                    _ => sech.powf(2.0 / p as f64),
                };
                self.amplitude * profile
            }
            WaveFamily::Rosenau { .. } => sech,
        }
    }

    /// Exponential decay rate of the profile tails, `|u| ~ e^{-rate |x|}`.
    pub fn tail_rate(&self) -> f64 {
        match self.family {
            WaveFamily::GeneralizedBbm { p, .. } => 2.0 * self.width / p as f64,
            WaveFamily::Rosenau { .. } => 1.0,
        }
    }

    /// `sup { |u(x, t)| : |x| >= half_width, 0 <= t <= t_end }`.
    ///
    /// The profile decreases away from its crest, so the supremum is the
    /// amplitude once the crest leaves the interval and otherwise sits on
    /// the boundary at the time of closest approach.
    pub fn sup_outside(&self, half_width: f64, t_end: f64) -> f64 {
        let start = self.position();
        let end = start + self.speed * t_end;
        let (lo, hi) = (start.min(end), start.max(end));
        if lo <= -half_width || hi >= half_width {
            return self.amplitude;
        }
        let left = self
            .evaluate(-half_width, 0.0)
            .max(self.evaluate(-half_width, t_end));
        let right = self
            .evaluate(half_width, 0.0)
            .max(self.evaluate(half_width, t_end));
        left.max(right)
    }
}

pub fn evaluate_solitary(wave: &SolitaryWave, x: f64, t: f64) -> f64 {
    wave.evaluate(x, t)
}

/// `R u(., 0)` on the grid.
pub fn initial_data(wave: &SolitaryWave, grid: &Grid) -> Result<StateVector> {
    restrict(|x| wave.evaluate(x, 0.0), grid)
}

/// `R u(., t)` on the grid.
pub fn exact_state(wave: &SolitaryWave, grid: &Grid, t: f64) -> Result<StateVector> {
    restrict(|x| wave.evaluate(x, t), grid)
}

/// `|u(x, t)| <= C e^{-r |x| / s}` with `0 < r < 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayEnvelope {
    rate: f64,
    scale: f64,
    constant: f64,
}

pub const DEFAULT_DECAY_RATE: f64 = 0.9;

impl DecayEnvelope {
    pub fn new(rate: f64, scale: f64, constant: f64) -> Result<Self> {
        if !(rate > 0.0 && rate < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "decay rate r must satisfy 0 < r < 1, got {rate}"
            )));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "decay scale must be positive, got {scale}"
            )));
        }
        if !(constant > 0.0 && constant.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "envelope constant must be positive, got {constant}"
            )));
        }
        Ok(DecayEnvelope {
            rate,
            scale,
            constant,
        })
    }

    /// Scale `s` matching the kernel: `1` for BBM, `sqrt 2` for Rosenau.
    pub fn scale_for(kernel: &Kernel) -> f64 {
        kernel.decay_scale().unwrap_or(1.0)
    }

    /// Smallest `C` for which the envelope holds on `state`; a zero state
    /// gets `C = 1`.
    pub fn calibrate(state: &StateVector, rate: f64, scale: f64) -> Result<Self> {
        // validate r and s before scanning
        DecayEnvelope::new(rate, scale, 1.0)?;
        let log_c = state
            .iter()
            .filter(|(_, v)| *v != 0.0)
            .map(|(x, v)| v.abs().ln() + rate * x.abs() / scale)
            .fold(f64::NEG_INFINITY, f64::max);
        let constant = if log_c.is_finite() { log_c.exp() } else { 1.0 };
        DecayEnvelope::new(rate, scale, constant)
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn bound(&self, x: f64) -> f64 {
        self.constant * (-self.rate * x.abs() / self.scale).exp()
    }

    /// `|v| / (C e^{-r|x|/s})`, computed in log space.
    pub fn ratio(&self, x: f64, v: f64) -> f64 {
        if v == 0.0 {
            return 0.0;
        }
        (v.abs().ln() + self.rate * x.abs() / self.scale - self.constant.ln()).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayReport {
    pub holds: bool,
    pub worst_ratio: f64,
    /// Signed node index of the worst ratio.
    pub worst_index: isize,
    pub worst_x: f64,
}

pub fn check_decay(state: &StateVector, envelope: &DecayEnvelope) -> DecayReport {
    let n = state.grid().n_half() as isize;
    let (worst_index, worst_ratio) = state
        .values()
        .iter()
        .enumerate()
        .map(|(k, &v)| {
            let i = k as isize - n;
            (i, envelope.ratio(state.grid().node(i), v))
        })
        .fold(
            (0isize, 0.0f64),
            |best, cur| if cur.1 > best.1 { cur } else { best },
        );
    DecayReport {
        holds: worst_ratio <= 1.0,
        worst_ratio,
        worst_index,
        worst_x: state.grid().node(worst_index),
    }
}

/// Envelope scale for the Rosenau kernel.
pub const ROSENAU_DECAY_SCALE: f64 = SQRT_2;
