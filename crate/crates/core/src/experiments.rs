//! Error metrics, convergence rates and the three solitary-wave studies:
//! profile comparison, mesh refinement at fixed domain, and domain
//! truncation at fixed mesh size.
//!
//! Independent runs of a sweep go through [`crate::par::map`]; each run is
//! sequential and the records come back sorted by their sweep parameter.

use std::time::Instant;

use crate::analytic::{initial_data, DecayEnvelope, DecayReport, SolitaryWave};
use crate::discrete_ops::{restrict, ConvolutionPath, Grid, StateVector};
use crate::error::{Error, Result};
use crate::integrator::{integrate, IntegratorConfig, Trajectory};
use crate::kernel::Kernel;
use crate::par;
use crate::system::{
    boundary_band, build_system, discrete_mass, Nonlinearity, DEFAULT_BLOW_UP_THRESHOLD,
};

/// Error of one run at its final time.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRecord {
    pub h: f64,
    pub n_half: usize,
    pub t: f64,
    pub linf_error: f64,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub wall_seconds: f64,
    /// `|m(T) - m(0)| / |m(0)|` for the discrete mass `m = sum h v_i`.
    pub mass_drift: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateEstimate {
    pub h_pair: (f64, f64),
    pub rho: f64,
}

/// `max_i |u(x_i, t) - v_i|`.
pub fn linf_error(numeric: &StateVector, wave: &SolitaryWave, t: f64) -> f64 {
    numeric
        .iter()
        .map(|(x, v)| (wave.evaluate(x, t) - v).abs())
        .fold(0.0, f64::max)
}

/// `rho = log(E1 / E2) / log(h1 / h2)`.
pub fn convergence_rate(e1: &ErrorRecord, e2: &ErrorRecord) -> Result<RateEstimate> {
    if !(e1.h > 0.0 && e2.h > 0.0) || e1.h == e2.h {
        return Err(Error::InvalidStudy(format!(
            "rate needs two distinct positive mesh sizes, got {} and {}",
            e1.h, e2.h
        )));
    }
    for e in [e1, e2] {
        if e.linf_error == 0.0 {
            return Err(Error::DegenerateRate { h: e.h });
        }
    }
    Ok(RateEstimate {
        h_pair: (e1.h, e2.h),
        rho: (e1.linf_error / e2.linf_error).ln() / (e1.h / e2.h).ln(),
    })
}

/// Initial profile of a run.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialProfile {
    Solitary(SolitaryWave),
    /// `amplitude sech^2(width (x - x0))`, for kernels without exact waves.
    Pulse {
        amplitude: f64,
        width: f64,
        x0: f64,
    },
}

impl InitialProfile {
    pub fn evaluate(&self, x: f64) -> f64 {
        match self {
            InitialProfile::Solitary(wave) => wave.evaluate(x, 0.0),
            InitialProfile::Pulse {
                amplitude,
                width,
                x0,
            } => {
                let s = 1.0 / (width * (x - x0)).cosh();
                amplitude * s * s
            }
        }
    }
}

/// Kernel, nonlinearity, initial data and (when known) the exact solution.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub kernel: Kernel,
    pub nonlinearity: Nonlinearity,
    pub initial: InitialProfile,
    pub exact: Option<SolitaryWave>,
}

impl Problem {
    pub fn solitary(wave: SolitaryWave) -> Self {
        let (kernel, nonlinearity) = wave.equation();
        Problem {
            kernel,
            nonlinearity,
            initial: InitialProfile::Solitary(wave),
            exact: Some(wave),
        }
    }

    pub fn initial_state(&self, grid: &Grid) -> Result<StateVector> {
        match &self.initial {
            InitialProfile::Solitary(wave) => initial_data(wave, grid),
            profile => restrict(|x| profile.evaluate(x), grid),
        }
    }
}

/// Knobs shared by every study.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyOptions {
    pub integrator: IntegratorConfig,
    pub path: ConvolutionPath,
    pub blow_up_threshold: f64,
    /// Run independent sweep members concurrently (needs the `parallel` feature).
    pub parallel: bool,
}

impl Default for StudyOptions {
    fn default() -> Self {
        StudyOptions {
            integrator: IntegratorConfig::default(),
            path: ConvolutionPath::Auto,
            blow_up_threshold: DEFAULT_BLOW_UP_THRESHOLD,
            parallel: true,
        }
    }
}

/// A single integration with its cost.
#[derive(Debug, Clone)]
pub struct Run {
    pub trajectory: Trajectory,
    pub wall_seconds: f64,
}

impl Run {
    pub fn mass_drift(&self) -> f64 {
        relative_mass_drift(self.trajectory.initial(), self.trajectory.last())
    }
}

pub fn relative_mass_drift(initial: &StateVector, last: &StateVector) -> f64 {
    let m0 = discrete_mass(initial);
    let m1 = discrete_mass(last);
    if m0 == 0.0 {
        (m1 - m0).abs()
    } else {
        ((m1 - m0) / m0).abs()
    }
}

pub fn simulate(
    problem: &Problem,
    grid: Grid,
    t_end: f64,
    snapshots: &[f64],
    options: &StudyOptions,
) -> Result<Run> {
    let system = build_system(
        &problem.kernel,
        grid,
        problem.nonlinearity.clone(),
        options.blow_up_threshold,
    )?
    .with_path(options.path);
    let initial = problem.initial_state(&grid)?;
    let start = Instant::now();
    let trajectory = integrate(&system, &initial, t_end, snapshots, &options.integrator)?;
    Ok(Run {
        trajectory,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

fn record_for(run: &Run, grid: &Grid, linf_error: f64) -> ErrorRecord {
    let stats = run.trajectory.step_statistics;
    ErrorRecord {
        h: grid.h(),
        n_half: grid.n_half(),
        t: run.trajectory.final_time(),
        linf_error,
        accepted_steps: stats.accepted,
        rejected_steps: stats.rejected,
        wall_seconds: run.wall_seconds,
        mass_drift: run.mass_drift(),
    }
}

fn require_exact(problem: &Problem) -> Result<SolitaryWave> {
    problem.exact.ok_or_else(|| {
        Error::InvalidStudy("this study compares against an exact solitary wave".into())
    })
}

/// Initial, exact-final and numeric-final profiles of one run.
#[derive(Debug, Clone)]
pub struct ProfileStudy {
    pub run: Run,
    /// Exact solution at every output time, when known.
    pub exact: Option<Vec<StateVector>>,
    pub record: Option<ErrorRecord>,
}

impl ProfileStudy {
    pub fn initial(&self) -> &StateVector {
        self.run.trajectory.initial()
    }

    pub fn numeric_final(&self) -> &StateVector {
        self.run.trajectory.last()
    }

    pub fn exact_final(&self) -> Option<&StateVector> {
        self.exact.as_ref().and_then(|e| e.last())
    }

    /// Errors against the exact solution at every output time.
    pub fn errors(&self) -> Option<Vec<f64>> {
        let exact = self.exact.as_ref()?;
        Some(
            exact
                .iter()
                .zip(&self.run.trajectory.states)
                .map(|(e, v)| {
                    e.values()
                        .iter()
                        .zip(v.values())
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0, f64::max)
                })
                .collect(),
        )
    }
}

pub fn run_profile_study(
    problem: &Problem,
    half_width: f64,
    h: f64,
    t_end: f64,
    snapshots: &[f64],
    options: &StudyOptions,
) -> Result<ProfileStudy> {
    let grid = Grid::covering(half_width, h)?;
    let run = simulate(problem, grid, t_end, snapshots, options)?;
    let (exact, record) = match problem.exact {
        Some(wave) => {
            let exact = run
                .trajectory
                .times
                .iter()
                .map(|&t| restrict(|x| wave.evaluate(x, t), &grid))
                .collect::<Result<Vec<_>>>()?;
            let err = linf_error(run.trajectory.last(), &wave, run.trajectory.final_time());
            let record = record_for(&run, &grid, err);
            (Some(exact), Some(record))
        }
        None => (None, None),
    };
    Ok(ProfileStudy { run, exact, record })
}

/// One mesh size of a refinement sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinementRow {
    pub record: ErrorRecord,
    /// Rate against the previous (coarser) row.
    pub rate: Option<RateEstimate>,
}

fn check_decreasing(values: &[f64], what: &str) -> Result<()> {
    if values.is_empty() {
        return Err(Error::InvalidStudy(format!("empty {what} list")));
    }
    if values.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidStudy(format!(
            "{what} list must be strictly decreasing"
        )));
    }
    Ok(())
}

fn attach_rates(records: Vec<ErrorRecord>) -> Result<Vec<RefinementRow>> {
    let mut rows: Vec<RefinementRow> = Vec::with_capacity(records.len());
    for record in records {
        let rate = match rows.last() {
            Some(prev) => Some(convergence_rate(&prev.record, &record)?),
            None => None,
        };
        rows.push(RefinementRow { record, rate });
    }
    Ok(rows)
}

/// Errors at `t_end` for each mesh size on `[-half_width, half_width]`,
/// with successive rates. Without an exact solution each mesh is compared
/// against the next finer one (which must halve `h`); the finest mesh then
/// has no row.
pub fn run_h_refinement(
    problem: &Problem,
    half_width: f64,
    h_list: &[f64],
    t_end: f64,
    options: &StudyOptions,
) -> Result<Vec<RefinementRow>> {
    check_decreasing(h_list, "mesh size")?;
    let grids = h_list
        .iter()
        .map(|&h| Grid::covering(half_width, h))
        .collect::<Result<Vec<_>>>()?;
    let runs = par::map(&grids, options.parallel, |grid| {
        simulate(problem, *grid, t_end, &[], options)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let records = match problem.exact {
        Some(wave) => runs
            .iter()
            .zip(&grids)
            .map(|(run, grid)| {
                record_for(run, grid, linf_error(run.trajectory.last(), &wave, t_end))
            })
            .collect(),
        None => self_refinement_records(&runs, &grids)?,
    };
    attach_rates(records)
}

fn self_refinement_records(runs: &[Run], grids: &[Grid]) -> Result<Vec<ErrorRecord>> {
    let mut records = Vec::new();
    for k in 0..runs.len().saturating_sub(1) {
        let (coarse, fine) = (&grids[k], &grids[k + 1]);
        if fine.n_half() != 2 * coarse.n_half() {
            return Err(Error::InvalidStudy(
                "self-refinement needs each mesh size to halve the previous one".into(),
            ));
        }
        let cv = runs[k].trajectory.last();
        let fv = runs[k + 1].trajectory.last();
        let err = coarse
            .indices()
            .map(|i| (cv.get(i) - fv.get(2 * i)).abs())
            .fold(0.0, f64::max);
        records.push(record_for(&runs[k], coarse, err));
    }
    Ok(records)
}

/// One domain size of a truncation sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncationRow {
    pub record: ErrorRecord,
    /// Largest solution amplitude outside the computational domain.
    pub delta: f64,
    /// `max_{|z| <= delta} |f(z)|`.
    pub eps_delta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruncationStudy {
    pub rows: Vec<TruncationRow>,
    /// First `N` after which the error stops falling by at least 10%.
    pub plateau_onset: Option<usize>,
}

/// First `N_k` with `E(N_{k+1}) / E(N_k) > threshold`.
pub fn detect_plateau(rows: &[(usize, f64)], threshold: f64) -> Option<usize> {
    rows.windows(2)
        .find(|w| w[1].1 / w[0].1 > threshold)
        .map(|w| w[0].0)
}

pub const PLATEAU_RATIO: f64 = 0.9;

/// Errors at `t_end` on `[-N h, N h]` for each `N`, fixed `h`.
///
/// `delta` is the supremum of the exact solution outside the domain over
/// `[0, t_end]`; without an exact solution it falls back to the largest
/// numeric amplitude in the outer 5% of nodes over the run.
pub fn run_truncation_study(
    problem: &Problem,
    h: f64,
    n_list: &[usize],
    t_end: f64,
    options: &StudyOptions,
) -> Result<TruncationStudy> {
    if n_list.is_empty() || n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidStudy(
            "N list must be nonempty and strictly increasing".into(),
        ));
    }
    let wave = require_exact(problem)?;
    let grids = n_list
        .iter()
        .map(|&n| Grid::new(h, n))
        .collect::<Result<Vec<_>>>()?;
    let crest = wave
        .position()
        .abs()
        .max((wave.position() + wave.speed() * t_end).abs());
    if crest >= grids[0].half_width() {
        return Err(Error::InvalidStudy(format!(
            "wave crest reaches |x| = {crest}, outside the smallest domain [-{0}, {0}]",
            grids[0].half_width()
        )));
    }
    let rows = par::map(&grids, options.parallel, |grid| -> Result<TruncationRow> {
        let run = simulate(problem, *grid, t_end, &[], options)?;
        let err = linf_error(run.trajectory.last(), &wave, t_end);
        let delta = wave.sup_outside(grid.half_width(), t_end);
        Ok(TruncationRow {
            record: record_for(&run, grid, err),
            delta,
            eps_delta: problem.nonlinearity.max_abs_on(delta),
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let series: Vec<(usize, f64)> = rows
        .iter()
        .map(|r| (r.record.n_half, r.record.linf_error))
        .collect();
    Ok(TruncationStudy {
        plateau_onset: detect_plateau(&series, PLATEAU_RATIO),
        rows,
    })
}

/// Boundary-band diagnostics of a numeric run: the largest amplitude over the
/// outer `max(1, N/20)` nodes on each side across all output times.
pub fn numeric_band(run: &Run, nonlinearity: &Nonlinearity) -> (f64, f64) {
    let width = (run.trajectory.initial().grid().n_half() / 20).max(1);
    let delta = run
        .trajectory
        .states
        .iter()
        .map(|s| boundary_band(s, width, nonlinearity).delta)
        .fold(0.0, f64::max);
    (delta, nonlinearity.max_abs_on(delta))
}

/// Decay check at every output time, with `C` calibrated on the first state.
pub fn decay_series(
    trajectory: &Trajectory,
    rate: f64,
    scale: f64,
) -> Result<(DecayEnvelope, Vec<(f64, DecayReport)>)> {
    let envelope = DecayEnvelope::calibrate(trajectory.initial(), rate, scale)?;
    let reports = trajectory
        .times
        .iter()
        .zip(&trajectory.states)
        .map(|(&t, s)| (t, crate::analytic::check_decay(s, &envelope)))
        .collect();
    Ok((envelope, reports))
}

/// Evenly spaced output times `t_end k / count`, `k = 1..=count`.
pub fn uniform_snapshots(t_end: f64, count: usize) -> Vec<f64> {
    (1..=count)
        .map(|k| t_end * k as f64 / count as f64)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(h: f64, e: f64) -> ErrorRecord {
        ErrorRecord {
            h,
            n_half: 1,
            t: 1.0,
            linf_error: e,
            accepted_steps: 0,
            rejected_steps: 0,
            wall_seconds: 0.0,
            mass_drift: 0.0,
        }
    }

    #[test]
    fn rate_formula() {
        let r = convergence_rate(&synthetic(0.2, 0.04), &synthetic(0.1, 0.01)).unwrap();
        assert!((r.rho - 2.0).abs() < 1e-14);
        assert_eq!(r.h_pair, (0.2, 0.1));
        let r = convergence_rate(&synthetic(0.2, 0.2), &synthetic(0.1, 0.1)).unwrap();
        assert!((r.rho - 1.0).abs() < 1e-14);
        // h = 2^-k makes E(h) = h^2 exact in binary
        let r = convergence_rate(&synthetic(0.25, 0.0625), &synthetic(0.125, 0.015625)).unwrap();
        assert_eq!(r.rho, 2.0);
    }

    #[test]
    fn degenerate_rates() {
        assert!(matches!(
            convergence_rate(&synthetic(0.2, 0.0), &synthetic(0.1, 0.01)),
            Err(Error::DegenerateRate { h }) if h == 0.2
        ));
        assert!(matches!(
            convergence_rate(&synthetic(0.2, 0.1), &synthetic(0.2, 0.01)),
            Err(Error::InvalidStudy(_))
        ));
    }

    #[test]
    fn linf_error_examples() {
        let wave = SolitaryWave::generalized_bbm(1, 1.8, -18.0).unwrap();
        let g = Grid::covering(30.0, 0.25).unwrap();
        let exact = initial_data(&wave, &g).unwrap();
        assert_eq!(linf_error(&exact, &wave, 0.0), 0.0);
        let shifted = restrict(|x| wave.evaluate(x, 0.0) + 1e-3, &g).unwrap();
        assert!((linf_error(&shifted, &wave, 0.0) - 1e-3).abs() < 1e-15);
    }

    #[test]
    fn plateau_detection() {
        let rows = [
            (200, 1.0),
            (220, 0.3),
            (240, 0.1),
            (260, 0.095),
            (280, 0.094),
        ];
        assert_eq!(detect_plateau(&rows, 0.9), Some(240));
        assert_eq!(detect_plateau(&rows[..3], 0.9), None);
    }

    #[test]
    fn zero_time_profile_study() {
        let wave = SolitaryWave::rosenau(-2.5).unwrap();
        let study = run_profile_study(
            &Problem::solitary(wave),
            12.0,
            0.1,
            0.0,
            &[],
            &StudyOptions::default(),
        )
        .unwrap();
        assert_eq!(study.numeric_final(), study.initial());
        assert_eq!(study.record.unwrap().linf_error, 0.0);
    }

    #[test]
    fn zero_time_refinement_is_degenerate() {
        let wave = SolitaryWave::generalized_bbm(1, 1.8, -18.0).unwrap();
        let err = run_h_refinement(
            &Problem::solitary(wave),
            30.0,
            &[0.4, 0.2],
            0.0,
            &StudyOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::DegenerateRate { .. }));
    }

    #[test]
    fn sweep_validation() {
        let problem = Problem::solitary(SolitaryWave::rosenau(-2.5).unwrap());
        let opts = StudyOptions::default();
        assert!(run_h_refinement(&problem, 12.0, &[0.1, 0.2], 1.0, &opts).is_err());
        assert!(run_h_refinement(&problem, 12.0, &[0.7], 1.0, &opts).is_err());
        assert!(run_truncation_study(&problem, 0.1, &[100, 50], 1.0, &opts).is_err());
        // crest outside the smallest domain
        assert!(run_truncation_study(&problem, 0.1, &[20, 200], 1.0, &opts).is_err());
    }

    #[test]
    fn single_mesh_refinement_has_no_rate() {
        let problem = Problem::solitary(SolitaryWave::rosenau(-2.5).unwrap());
        let rows = run_h_refinement(&problem, 12.0, &[0.2], 0.5, &StudyOptions::default()).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].rate.is_none());
        assert!(rows[0].record.linf_error > 0.0);
    }

    #[test]
    fn self_refinement_without_exact_solution() {
        let mut problem = Problem::solitary(SolitaryWave::rosenau(-2.5).unwrap());
        problem.exact = None;
        let rows = run_h_refinement(
            &problem,
            12.0,
            &[0.4, 0.2, 0.1],
            2.0,
            &StudyOptions::default(),
        )
        .unwrap();
        assert_eq!(rows.len(), 2);
        let rho = rows[1].rate.unwrap().rho;
        assert!(rho > 1.5 && rho < 2.5, "rho = {rho}");
    }

    #[test]
    fn snapshots_helper() {
        assert_eq!(uniform_snapshots(2.0, 4), vec![0.5, 1.0, 1.5, 2.0]);
    }
}
