//! Adaptive Dormand–Prince 5(4) time stepping for the truncated system.
//!
//! Snapshots are delivered by clipping steps so that each requested time is
//! hit exactly; no dense-output interpolation is involved.

use crate::discrete_ops::{SampledSequence, StateVector};
use crate::error::{Error, Result};
use crate::system::{OdeRhs, TruncatedSystem};

// autonomous right-hand sides only, so the nodes c_i never enter
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
// fifth-order weights; also row 7 of the tableau (FSAL)
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// fifth minus embedded fourth order
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;

#[derive(Debug, Clone, PartialEq)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// `None` picks the step from the first two right-hand-side evaluations.
    pub initial_step: Option<f64>,
    pub max_step: f64,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            rel_tol: 1e-10,
            abs_tol: 1e-10,
            initial_step: None,
            max_step: f64::INFINITY,
            max_steps: 1_000_000,
        }
    }
}

impl IntegratorConfig {
    pub fn with_tolerances(rel_tol: f64, abs_tol: f64) -> Self {
        IntegratorConfig {
            rel_tol,
            abs_tol,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let in_unit = |v: f64| v > 0.0 && v < 1.0;
        if !in_unit(self.rel_tol) || !in_unit(self.abs_tol) {
            return Err(Error::InvalidConfig(format!(
                "tolerances must lie in (0, 1): rel_tol={}, abs_tol={}",
                self.rel_tol, self.abs_tol
            )));
        }
        if let Some(h0) = self.initial_step {
            if !(h0 > 0.0 && h0.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "initial step {h0} must be positive"
                )));
            }
        }
        if !(self.max_step > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "max step {} must be positive",
                self.max_step
            )));
        }
        if self.max_steps < 1 {
            return Err(Error::InvalidConfig("max_steps must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepStatistics {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evaluations: usize,
}

/// States at the requested output times.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<StateVector>,
    pub step_statistics: StepStatistics,
}

impl Trajectory {
    pub fn initial(&self) -> &StateVector {
        &self.states[0]
    }

    pub fn last(&self) -> &StateVector {
        self.states
            .last()
            .expect("trajectory holds at least the initial state")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("nonempty")
    }
}

/// Integrates the truncated system from `t = 0` to `t_end`, recording the
/// initial state, every time in `snapshots`, and `t_end`.
pub fn integrate(
    system: &TruncatedSystem,
    initial: &StateVector,
    t_end: f64,
    snapshots: &[f64],
    config: &IntegratorConfig,
) -> Result<Trajectory> {
    if initial.grid() != system.grid() {
        let (a, b) = (system.grid(), initial.grid());
        return Err(Error::GridMismatch {
            h_left: a.h(),
            n_left: a.n_half(),
            h_right: b.h(),
            n_right: b.n_half(),
        });
    }
    let grid = *initial.grid();
    let (times, states, stats) = integrate_raw(system, initial.values(), t_end, snapshots, config)?;
    let states = states
        .into_iter()
        .map(|v| SampledSequence::new(grid, v))
        .collect::<Result<Vec<_>>>()?;
    Ok(Trajectory {
        times,
        states,
        step_statistics: stats,
    })
}

/// Output times: `0`, the snapshots inside `(0, t_end)`, and `t_end`.
fn output_times(t_end: f64, snapshots: &[f64]) -> Result<Vec<f64>> {
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "t_end {t_end} must be finite and >= 0"
        )));
    }
    if snapshots.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidConfig("snapshot times must be sorted".into()));
    }
    if let Some(&bad) = snapshots.iter().find(|&&s| !(0.0..=t_end).contains(&s)) {
        return Err(Error::InvalidConfig(format!(
            "snapshot time {bad} outside [0, {t_end}]"
        )));
    }
    let mut times = vec![0.0];
    for &s in snapshots {
        if s > *times.last().unwrap() && s < t_end {
            times.push(s);
        }
    }
    if t_end > 0.0 {
        times.push(t_end);
    }
    Ok(times)
}

/// Slice-level driver for any [`OdeRhs`].
pub fn integrate_raw<S: OdeRhs>(
    system: &S,
    initial: &[f64],
    t_end: f64,
    snapshots: &[f64],
    config: &IntegratorConfig,
) -> Result<(Vec<f64>, Vec<Vec<f64>>, StepStatistics)> {
    config.validate()?;
    let times = output_times(t_end, snapshots)?;
    let dim = system.dim();
    assert_eq!(initial.len(), dim);
    if let Some(bad) = initial.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            x: f64::NAN,
            value: *bad,
        });
    }

    let mut ws = system.workspace();
    let mut stats = StepStatistics::default();
    let mut states = vec![initial.to_vec()];
    if times.len() == 1 {
        return Ok((times, states, stats));
    }

    let mut y = initial.to_vec();
    let mut k = vec![vec![0.0; dim]; 7];
    let mut y_stage = vec![0.0; dim];
    let mut y_new = vec![0.0; dim];
    system.eval(&y, &mut k[0], &mut ws)?;
    stats.rhs_evaluations += 1;

    let mut h = match config.initial_step {
        Some(h0) => h0,
        None => {
            stats.rhs_evaluations += 1;
            initial_step(system, &y, &k[0], config, &mut ws, &mut y_stage, &mut y_new)?
        }
    }
    .min(config.max_step);

    let mut t = 0.0;
    let mut last_rejected = false;
    for &target in &times[1..] {
        while t < target {
            if stats.accepted + stats.rejected >= config.max_steps {
                return Err(Error::StepFailure {
                    t,
                    reason: format!("exceeded {} steps", config.max_steps),
                });
            }
            let remaining = target - t;
            // clip onto the snapshot; absorb slivers below 1e-12 relative
            let (step, lands) = if h >= remaining * (1.0 - 1e-12) {
                (remaining, true)
            } else {
                (h, false)
            };
            if step <= 16.0 * f64::EPSILON * t.abs().max(1.0) {
                return Err(Error::StepFailure {
                    t,
                    reason: format!("step size {step:e} underflowed"),
                });
            }

            dopri_stages(system, &y, step, &mut k, &mut y_stage, &mut y_new, &mut ws)?;
            stats.rhs_evaluations += 6;

            let err = error_norm(&y, &y_new, &k, step, config);
            if err <= 1.0 {
                stats.accepted += 1;
                t = if lands { target } else { t + step };
                std::mem::swap(&mut y, &mut y_new);
                k.swap(0, 6);
                let factor = if err == 0.0 {
                    MAX_FACTOR
                } else {
                    (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR)
                };
                let factor = if last_rejected {
                    factor.min(1.0)
                } else {
                    factor
                };
                // a step clipped onto a snapshot says little about the natural size
                let proposal = if lands { h.max(step) } else { step } * factor;
                h = proposal.min(config.max_step);
                last_rejected = false;
            } else {
                stats.rejected += 1;
                let factor = if err.is_finite() {
                    (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, 1.0)
                } else {
                    MIN_FACTOR
                };
                h = step * factor;
                last_rejected = true;
            }
        }
        states.push(y.clone());
    }
    Ok((times, states, stats))
}

#[allow(clippy::too_many_arguments)]
fn dopri_stages<S: OdeRhs>(
    system: &S,
    y: &[f64],
    h: f64,
    k: &mut [Vec<f64>],
    y_stage: &mut [f64],
    y_new: &mut [f64],
    ws: &mut S::Workspace,
) -> Result<()> {
    let n = y.len();
    for i in 0..n {
        y_stage[i] = y[i] + h * A21 * k[0][i];
    }
    system.eval(y_stage, &mut k[1], ws)?;
    for i in 0..n {
        y_stage[i] = y[i] + h * (A31 * k[0][i] + A32 * k[1][i]);
    }
    system.eval(y_stage, &mut k[2], ws)?;
    for i in 0..n {
        y_stage[i] = y[i] + h * (A41 * k[0][i] + A42 * k[1][i] + A43 * k[2][i]);
    }
    system.eval(y_stage, &mut k[3], ws)?;
    for i in 0..n {
        y_stage[i] = y[i] + h * (A51 * k[0][i] + A52 * k[1][i] + A53 * k[2][i] + A54 * k[3][i]);
    }
    system.eval(y_stage, &mut k[4], ws)?;
    for i in 0..n {
        y_stage[i] = y[i]
            + h * (A61 * k[0][i] + A62 * k[1][i] + A63 * k[2][i] + A64 * k[3][i] + A65 * k[4][i]);
    }
    system.eval(y_stage, &mut k[5], ws)?;
    for i in 0..n {
        y_new[i] =
            y[i] + h * (B1 * k[0][i] + B3 * k[2][i] + B4 * k[3][i] + B5 * k[4][i] + B6 * k[5][i]);
    }
    system.eval(y_new, &mut k[6], ws)?;
    Ok(())
}

/// RMS of the embedded error scaled by `abs_tol + rel_tol max(|y|, |y_new|)`.
fn error_norm(y: &[f64], y_new: &[f64], k: &[Vec<f64>], h: f64, config: &IntegratorConfig) -> f64 {
    let n = y.len();
    let mut sum = 0.0;
    for i in 0..n {
        let e = h
            * (E1 * k[0][i]
                + E3 * k[2][i]
                + E4 * k[3][i]
                + E5 * k[4][i]
                + E6 * k[5][i]
                + E7 * k[6][i]);
        let scale = config.abs_tol + config.rel_tol * y[i].abs().max(y_new[i].abs());
        let r = e / scale;
        sum += r * r;
    }
    (sum / n as f64).sqrt()
}

/// Starting step from the size of `y`, `y'` and a finite-difference
/// estimate of `y''`.
fn initial_step<S: OdeRhs>(
    system: &S,
    y: &[f64],
    f0: &[f64],
    config: &IntegratorConfig,
    ws: &mut S::Workspace,
    y1: &mut [f64],
    f1: &mut [f64],
) -> Result<f64> {
    let n = y.len() as f64;
    let scale = |v: f64| config.abs_tol + config.rel_tol * v.abs();
    let rms = |it: &mut dyn Iterator<Item = f64>| (it.map(|v| v * v).sum::<f64>() / n).sqrt();
    let d0 = rms(&mut y.iter().map(|&v| v / scale(v)));
    let d1 = rms(&mut y.iter().zip(f0).map(|(&v, &f)| f / scale(v)));
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    for i in 0..y.len() {
        y1[i] = y[i] + h0 * f0[i];
    }
    system.eval(y1, f1, ws)?;
    let d2 = rms(&mut y
        .iter()
        .zip(f0)
        .zip(f1.iter())
        .map(|((&v, &a), &b)| (b - a) / scale(v)))
        / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    Ok((100.0 * h0).min(h1))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `y' = -y` on a single node.
    struct Decay;

    impl OdeRhs for Decay {
        type Workspace = ();
        fn dim(&self) -> usize {
            1
        }
        fn workspace(&self) {}
        fn eval(&self, y: &[f64], dydt: &mut [f64], _: &mut ()) -> Result<()> {
            dydt[0] = -y[0];
            Ok(())
        }
    }

    /// `y' = y^2`, blowing up at `t = 1` from `y(0) = 1`.
    struct Riccati(f64);

    impl OdeRhs for Riccati {
        type Workspace = ();
        fn dim(&self) -> usize {
            1
        }
        fn workspace(&self) {}
        fn eval(&self, y: &[f64], dydt: &mut [f64], _: &mut ()) -> Result<()> {
            if y[0].abs() > self.0 {
                return Err(Error::BlowUp {
                    norm: y[0].abs(),
                    threshold: self.0,
                });
            }
            dydt[0] = y[0] * y[0];
            Ok(())
        }
    }

    #[test]
    fn scalar_decay_at_default_tolerances() {
        let (times, states, stats) =
            integrate_raw(&Decay, &[1.0], 1.0, &[], &IntegratorConfig::default()).unwrap();
        assert_eq!(times, vec![0.0, 1.0]);
        assert!((states[1][0] - (-1.0f64).exp()).abs() < 1e-8);
        assert!(stats.accepted > 0);
    }

    #[test]
    fn snapshots_are_hit_exactly() {
        let snaps = [0.0, 0.1, 0.5, 0.5, 2.0];
        let (times, states, _) =
            integrate_raw(&Decay, &[2.0], 3.0, &snaps, &IntegratorConfig::default()).unwrap();
        assert_eq!(times, vec![0.0, 0.1, 0.5, 2.0, 3.0]);
        for (t, s) in times.iter().zip(&states) {
            assert!((s[0] - 2.0 * (-t).exp()).abs() < 1e-9, "t={t}");
        }
    }

    #[test]
    fn zero_end_time_returns_initial_state() {
        let (times, states, stats) =
            integrate_raw(&Decay, &[0.7], 0.0, &[0.0], &IntegratorConfig::default()).unwrap();
        assert_eq!(times, vec![0.0]);
        assert_eq!(states, vec![vec![0.7]]);
        assert_eq!(stats.accepted, 0);
    }

    #[test]
    fn rejects_bad_snapshots_and_config() {
        let cfg = IntegratorConfig::default();
        assert!(integrate_raw(&Decay, &[1.0], 1.0, &[0.5, 0.2], &cfg).is_err());
        assert!(integrate_raw(&Decay, &[1.0], 1.0, &[1.5], &cfg).is_err());
        let bad = IntegratorConfig::with_tolerances(0.0, 1e-8);
        assert!(matches!(
            integrate_raw(&Decay, &[1.0], 1.0, &[], &bad),
            Err(Error::InvalidConfig(_))
        ));
        let bad = IntegratorConfig {
            max_steps: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn blow_up_is_propagated() {
        let err = integrate_raw(
            &Riccati(1e6),
            &[1.0],
            2.0,
            &[],
            &IntegratorConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::BlowUp { .. }), "{err:?}");
    }

    #[test]
    fn step_budget_exhaustion() {
        let cfg = IntegratorConfig {
            max_steps: 3,
            ..Default::default()
        };
        let err = integrate_raw(&Decay, &[1.0], 100.0, &[], &cfg).unwrap_err();
        assert!(matches!(err, Error::StepFailure { .. }));
    }

    #[test]
    fn fixed_initial_step_and_max_step() {
        let cfg = IntegratorConfig {
            initial_step: Some(0.01),
            max_step: 0.05,
            ..Default::default()
        };
        let (_, states, stats) = integrate_raw(&Decay, &[1.0], 1.0, &[], &cfg).unwrap();
        assert!(stats.accepted >= 20);
        assert!((states[1][0] - (-1.0f64).exp()).abs() < 1e-9);
    }
}
