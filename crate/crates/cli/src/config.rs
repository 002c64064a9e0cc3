//! Run configuration: the TOML schema and its validation into a [`Plan`].
//!
//! ```toml
//! output_dir = "out/bbm"
//!
//! [equation]
//! kind = "bbm"        # bbm | rosenau | custom
//! p = 1
//! c = 1.8
//! x0 = -18.0
//!
//! [grid]
//! half_width = 30.0
//! h = 0.25
//! h_list = [0.4, 0.2, 0.1, 0.05]
//! n_list = [200, 250, 300]
//!
//! [time]
//! t_end = 20.0
//! snapshot_times = [10.0]
//!
//! [integrator]
//! rel_tol = 1e-10
//! abs_tol = 1e-10
//!
//! [decay]
//! rate = 0.9
//! snapshots = 20
//! ```
//!
//! A custom equation reads its kernel from a two-column table (relative
//! paths resolve against the config file) and starts from a `sech^2` pulse:
//!
//! ```toml
//! [equation]
//! kind = "custom"
//! kernel_file = "kernel.txt"
//! smoothness = "order-one"
//! nonlinearity = "u + 0.5u^2"
//! pulse = { amplitude = 1.0, width = 0.5, x0 = 0.0 }
//! ```

use anyhow::{anyhow, bail, ensure, Context, Result};
use nlwave::experiments::{InitialProfile, Problem, StudyOptions};
use nlwave::kernel::TabulatedKernel;
use nlwave::{
    DecayEnvelope, Grid, IntegratorConfig, Kernel, Nonlinearity, SmoothnessClass, SolitaryWave,
    DEFAULT_BLOW_UP_THRESHOLD,
};
use serde::Deserialize;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub equation: EquationConfig,
    pub grid: GridConfig,
    pub time: TimeConfig,
    #[serde(default)]
    pub integrator: IntegratorSection,
    #[serde(default)]
    pub decay: DecaySection,
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum EquationConfig {
    Bbm {
        #[serde(default = "one")]
        p: u32,
        c: f64,
        #[serde(default)]
        x0: f64,
    },
    Rosenau {
        #[serde(default)]
        x0: f64,
    },
    Custom {
        kernel_file: PathBuf,
        smoothness: Smoothness,
        /// `|mu|(R)`; computed from the table when absent.
        derivative_total_variation: Option<f64>,
        nonlinearity: String,
        pulse: PulseConfig,
    },
}

fn one() -> u32 {
    1
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Smoothness {
    OrderOne,
    OrderTwo,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseConfig {
    pub amplitude: f64,
    pub width: f64,
    #[serde(default)]
    pub x0: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub half_width: Option<f64>,
    pub h: Option<f64>,
    pub h_list: Option<Vec<f64>>,
    pub n_list: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub t_end: f64,
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSection {
    pub rel_tol: Option<f64>,
    pub abs_tol: Option<f64>,
    pub initial_step: Option<f64>,
    pub max_step: Option<f64>,
    pub max_steps: Option<usize>,
    pub blow_up_threshold: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecaySection {
    pub rate: Option<f64>,
    /// Envelope length scale; defaults to the kernel's own.
    pub scale: Option<f64>,
    /// Evenly spaced snapshots for the decay check; without it the check
    /// uses `time.snapshot_times`, or 20 snapshots when that is empty too.
    pub snapshots: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Converge,
    Truncation,
    Decay,
}

/// A fully validated run: everything a command needs, nothing left to check.
#[derive(Debug, Clone)]
pub struct Plan {
    pub problem: Problem,
    pub half_width: Option<f64>,
    pub h: Option<f64>,
    pub h_list: Vec<f64>,
    pub n_list: Vec<usize>,
    pub t_end: f64,
    pub snapshot_times: Vec<f64>,
    pub options: StudyOptions,
    pub decay_rate: f64,
    pub decay_scale: f64,
    pub decay_snapshots: Option<usize>,
    pub output_dir: Option<PathBuf>,
}

impl Plan {
    pub fn grid(&self) -> Grid {
        Grid::covering(self.half_width.unwrap(), self.h.unwrap()).expect("validated")
    }
}

pub fn load(path: &Path, command: Command) -> Result<Plan> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    let config: RunConfig =
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    validate(config, base, command).with_context(|| format!("invalid config {}", path.display()))
}

fn finite(name: &str, v: f64) -> Result<f64> {
    ensure!(v.is_finite(), "{name} must be finite, got {v}");
    Ok(v)
}

fn positive(name: &str, v: f64) -> Result<f64> {
    ensure!(v.is_finite() && v > 0.0, "{name} must be positive, got {v}");
    Ok(v)
}

fn problem_for(equation: &EquationConfig, base: &Path) -> Result<Problem> {
    Ok(match equation {
        EquationConfig::Bbm { p, c, x0 } => Problem::solitary(SolitaryWave::generalized_bbm(
            *p,
            finite("c", *c)?,
            finite("x0", *x0)?,
        )?),
        EquationConfig::Rosenau { x0 } => {
            Problem::solitary(SolitaryWave::rosenau(finite("x0", *x0)?)?)
        }
        EquationConfig::Custom {
            kernel_file,
            smoothness,
            derivative_total_variation,
            nonlinearity,
            pulse,
        } => {
            let file = base.join(kernel_file);
            let table = TabulatedKernel::load(&file)
                .with_context(|| format!("kernel file {}", file.display()))?;
            let class = match smoothness {
                Smoothness::OrderOne => SmoothnessClass::OrderOne,
                Smoothness::OrderTwo => SmoothnessClass::OrderTwo,
            };
            let kernel = Kernel::tabulated(table, *derivative_total_variation, class)?;
            let nonlinearity = Nonlinearity::parse(nonlinearity)?;
            finite("pulse.amplitude", pulse.amplitude)?;
            positive("pulse.width", pulse.width)?;
            finite("pulse.x0", pulse.x0)?;
            Problem {
                kernel,
                nonlinearity,
                initial: InitialProfile::Pulse {
                    amplitude: pulse.amplitude,
                    width: pulse.width,
                    x0: pulse.x0,
                },
                exact: None,
            }
        }
    })
}

fn validate(config: RunConfig, base: &Path, command: Command) -> Result<Plan> {
    let problem = problem_for(&config.equation, base)?;

    let g = &config.grid;
    let half_width = g
        .half_width
        .map(|w| positive("grid.half_width", w))
        .transpose()?;
    let h = g.h.map(|h| positive("grid.h", h)).transpose()?;
    if let (Some(w), Some(h)) = (half_width, h) {
        Grid::covering(w, h)?;
    }
    let h_list = g.h_list.clone().unwrap_or_default();
    for &hk in &h_list {
        positive("grid.h_list entry", hk)?;
        let w = half_width.ok_or_else(|| anyhow!("grid.h_list needs grid.half_width"))?;
        Grid::covering(w, hk)?;
    }
    ensure!(
        h_list.windows(2).all(|w| w[1] < w[0]),
        "grid.h_list must be strictly decreasing"
    );
    let n_list = g.n_list.clone().unwrap_or_default();
    ensure!(
        n_list.iter().all(|&n| n > 0),
        "grid.n_list entries must be positive"
    );
    ensure!(
        n_list.windows(2).all(|w| w[1] > w[0]),
        "grid.n_list must be strictly increasing"
    );

    let t_end = config.time.t_end;
    ensure!(
        t_end.is_finite() && t_end >= 0.0,
        "time.t_end must be finite and >= 0, got {t_end}"
    );
    let snapshot_times = config.time.snapshot_times.clone();
    for &s in &snapshot_times {
        ensure!(
            (0.0..=t_end).contains(&s),
            "snapshot time {s} outside [0, {t_end}]"
        );
    }
    ensure!(
        snapshot_times.windows(2).all(|w| w[1] >= w[0]),
        "time.snapshot_times must be sorted"
    );

    let defaults = IntegratorConfig::default();
    let i = &config.integrator;
    let integrator = IntegratorConfig {
        rel_tol: i.rel_tol.unwrap_or(defaults.rel_tol),
        abs_tol: i.abs_tol.unwrap_or(defaults.abs_tol),
        initial_step: i.initial_step,
        max_step: i.max_step.unwrap_or(defaults.max_step),
        max_steps: i.max_steps.unwrap_or(defaults.max_steps),
    };
    integrator.validate()?;
    let blow_up_threshold = positive(
        "integrator.blow_up_threshold",
        i.blow_up_threshold.unwrap_or(DEFAULT_BLOW_UP_THRESHOLD),
    )?;

    let decay_rate = config
        .decay
        .rate
        .unwrap_or(nlwave::analytic::DEFAULT_DECAY_RATE);
    let decay_scale = match config.decay.scale {
        Some(s) => s,
        None => DecayEnvelope::scale_for(&problem.kernel),
    };
    // checks 0 < r < 1 and s > 0
    DecayEnvelope::new(decay_rate, decay_scale, 1.0).context("decay section")?;
    let decay_snapshots = config.decay.snapshots;
    ensure!(
        decay_snapshots != Some(0),
        "decay.snapshots must be positive"
    );

    let plan = Plan {
        problem,
        half_width,
        h,
        h_list,
        n_list,
        t_end,
        snapshot_times,
        options: StudyOptions {
            integrator,
            blow_up_threshold,
            ..StudyOptions::default()
        },
        decay_rate,
        decay_scale,
        decay_snapshots,
        output_dir: config.output_dir,
    };
    require_for(&plan, command)?;
    Ok(plan)
}

/// Keys each command cannot run without.
fn require_for(plan: &Plan, command: Command) -> Result<()> {
    match command {
        Command::Simulate | Command::Decay => {
            ensure!(plan.half_width.is_some(), "grid.half_width is required");
            ensure!(plan.h.is_some(), "grid.h is required");
        }
        Command::Converge => {
            ensure!(!plan.h_list.is_empty(), "grid.h_list is required");
            if plan.problem.exact.is_none() {
                ensure!(
                    plan.h_list.len() >= 2,
                    "self-refinement of a custom equation needs at least two mesh sizes"
                );
                let halves = plan
                    .h_list
                    .windows(2)
                    .all(|w| (w[0] / w[1] - 2.0).abs() < 1e-12);
                ensure!(
                    halves,
                    "self-refinement needs each mesh size to halve the previous one"
                );
            }
        }
        Command::Truncation => {
            ensure!(plan.h.is_some(), "grid.h is required");
            ensure!(!plan.n_list.is_empty(), "grid.n_list is required");
            let Some(wave) = plan.problem.exact else {
                bail!("the truncation study needs an equation with an exact solitary wave");
            };
            let smallest = plan.n_list[0] as f64 * plan.h.unwrap();
            let crest = wave
                .position()
                .abs()
                .max((wave.position() + wave.speed() * plan.t_end).abs());
            ensure!(
                crest < smallest,
                "wave crest reaches |x| = {crest}, outside the smallest domain [-{smallest}, {smallest}]"
            );
        }
    }
    Ok(())
}
