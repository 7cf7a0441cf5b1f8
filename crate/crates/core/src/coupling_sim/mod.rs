//! Two one-DOF handles joined by a stiff virtual spring-damper.
//!
//! Positions are normalized: both handles start at 0 and hit end stops at
//! -1 (first interval) and +1 (second interval). Each handle obeys
//! `m ẍ = f + fc - c ẋ` with the coupling force
//! `fc_i = -k (x_i - x_j) - d (ẋ_i - ẋ_j)`. Integration is semi-implicit
//! Euler at a fixed step; the damping terms are taken implicitly through a
//! 2x2 solve so the stiff link stays stable at 1 kHz.

mod session;

use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agents::{individual_rt, AgentProfile, Negotiator, Percept};
use crate::error::{Error, Result};
use crate::trials::Choice;

pub use session::{derive_seed, run_session, session_trials, simulate_trial, with_workers, SeedStream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CouplingConfig {
    #[serde(rename = "dt_s")]
    pub dt: f64,
    #[serde(rename = "handle_mass_kg")]
    pub handle_mass: f64,
    /// Viscous damping to ground, N·s per unit.
    #[serde(rename = "handle_damping_ns")]
    pub handle_damping: f64,
    /// N per unit of position difference.
    #[serde(rename = "coupling_stiffness_n")]
    pub coupling_stiffness: f64,
    /// Defaults to `2 sqrt(k m)` when absent.
    #[serde(rename = "coupling_damping_ns", skip_serializing_if = "Option::is_none")]
    pub coupling_damping: Option<f64>,
    pub target_threshold: f64,
    #[serde(rename = "dwell_s")]
    pub dwell: f64,
    #[serde(rename = "timeout_s")]
    pub timeout: f64,
    /// Zone around the start position used for initiation times.
    pub initiation_threshold: f64,
}

impl Default for CouplingConfig {
    fn default() -> Self {
        Self {
            dt: 0.001,
            handle_mass: 0.05,
            handle_damping: 0.5,
            coupling_stiffness: 2000.0,
            coupling_damping: None,
            target_threshold: 0.95,
            dwell: 1.0,
            timeout: 30.0,
            initiation_threshold: 0.05,
        }
    }
}

impl CouplingConfig {
    pub fn coupling_damping(&self) -> f64 {
        self.coupling_damping
            .unwrap_or_else(|| 2.0 * (self.coupling_stiffness * self.handle_mass).sqrt())
    }

    pub fn validate(&self) -> Result<()> {
        let values = [
            self.dt,
            self.handle_mass,
            self.handle_damping,
            self.coupling_stiffness,
            self.coupling_damping(),
            self.target_threshold,
            self.dwell,
            self.timeout,
            self.initiation_threshold,
        ];
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("coupling config values must be finite"));
        }
        if self.dt <= 0.0 || self.handle_mass <= 0.0 || self.timeout <= 0.0 {
            return Err(Error::invalid("dt, handle mass and timeout must be positive"));
        }
        if self.handle_damping < 0.0 || self.coupling_stiffness < 0.0 || self.coupling_damping() < 0.0 {
            return Err(Error::invalid("damping and stiffness must be non-negative"));
        }
        if !(self.target_threshold > 0.0 && self.target_threshold < 1.0) {
            return Err(Error::invalid(format!(
                "target_threshold must lie in (0, 1), got {}",
                self.target_threshold
            )));
        }
        if !(self.initiation_threshold > 0.0 && self.initiation_threshold < 1.0) {
            return Err(Error::invalid(format!(
                "initiation_threshold must lie in (0, 1), got {}",
                self.initiation_threshold
            )));
        }
        if self.dwell < 0.0 {
            return Err(Error::invalid("dwell must be non-negative"));
        }
        Ok(())
    }

    fn steps(&self, seconds: f64) -> usize {
        (seconds / self.dt).round() as usize
    }
}

/// Keeps a handle inside the end stops, killing any outward velocity.
fn end_stop(x: &mut f64, v: &mut f64) {
    if *x > 1.0 {
        *x = 1.0;
        if *v > 0.0 {
            *v = 0.0;
        }
    } else if *x < -1.0 {
        *x = -1.0;
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

/// State of the coupled pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledHandles {
    mass: f64,
    damping: f64,
    stiffness: f64,
    link_damping: f64,
    dt: f64,
    pub x: [f64; 2],
    pub v: [f64; 2],
}

impl CoupledHandles {
    pub fn new(cfg: &CouplingConfig) -> Self {
        Self {
            mass: cfg.handle_mass,
            damping: cfg.handle_damping,
            stiffness: cfg.coupling_stiffness,
            link_damping: cfg.coupling_damping(),
            dt: cfg.dt,
            x: [0.0; 2],
            v: [0.0; 2],
        }
    }

    /// Force the link currently exerts on each handle; equal and opposite.
    pub fn coupling_force(&self) -> [f64; 2] {
        let fc = -self.stiffness * (self.x[0] - self.x[1]) - self.link_damping * (self.v[0] - self.v[1]);
        [fc, -fc]
    }

    pub fn display(&self) -> f64 {
        0.5 * (self.x[0] + self.x[1])
    }

    /// Kinetic energy plus spring energy.
    pub fn energy(&self) -> f64 {
        let r = self.x[0] - self.x[1];
        0.5 * self.mass * (self.v[0] * self.v[0] + self.v[1] * self.v[1]) + 0.5 * self.stiffness * r * r
    }

    pub fn step(&mut self, f: [f64; 2]) {
        let (m, dt, k) = (self.mass, self.dt, self.stiffness);
        let a = m + dt * (self.damping + self.link_damping);
        let b = dt * self.link_damping;
        let r = self.x[0] - self.x[1];
        let r1 = m * self.v[0] + dt * (f[0] - k * r);
        let r2 = m * self.v[1] + dt * (f[1] + k * r);
        let det = a * a - b * b;
        self.v = [(a * r1 + b * r2) / det, (b * r1 + a * r2) / det];
        for i in 0..2 {
            self.x[i] += dt * self.v[i];
            end_stop(&mut self.x[i], &mut self.v[i]);
        }
    }
}

/// A handle moving alone.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleHandle {
    mass: f64,
    damping: f64,
    dt: f64,
    pub x: f64,
    pub v: f64,
}

impl SingleHandle {
    pub fn new(cfg: &CouplingConfig) -> Self {
        Self {
            mass: cfg.handle_mass,
            damping: cfg.handle_damping,
            dt: cfg.dt,
            x: 0.0,
            v: 0.0,
        }
    }

    pub fn step(&mut self, f: f64) {
        self.v = (self.mass * self.v + self.dt * f) / (self.mass + self.dt * self.damping);
        self.x += self.dt * self.v;
        end_stop(&mut self.x, &mut self.v);
    }
}

/// State at one integration step. `f` is what the agents applied during the
/// step and `fc` the coupling force they felt when choosing it.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LogSample {
    pub x: [f64; 2],
    pub v: [f64; 2],
    pub f: [f64; 2],
    pub fc: [f64; 2],
}

impl LogSample {
    pub fn x_display(&self) -> f64 {
        0.5 * (self.x[0] + self.x[1])
    }

    pub fn v_display(&self) -> f64 {
        0.5 * (self.v[0] + self.v[1])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryLog {
    pub dt: f64,
    pub samples: Vec<LogSample>,
}

const LOG_HEADER: [&str; 10] = ["t", "x1", "x2", "v1", "v2", "f1", "f2", "fc1", "fc2", "x_display"];

impl TrajectoryLog {
    pub fn new(dt: f64) -> Self {
        Self { dt, samples: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    /// Largest position gap between the handles.
    pub fn max_gap(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| (s.x[0] - s.x[1]).abs())
            .fold(0.0, f64::max)
    }

    /// Largest `|fc1 + fc2|`; zero for a link obeying action-reaction.
    pub fn max_coupling_asymmetry(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| (s.fc[0] + s.fc[1]).abs())
            .fold(0.0, f64::max)
    }

    /// Time of the first sample where `member` applies a nonzero force.
    pub fn force_onset(&self, member: usize) -> Option<f64> {
        self.samples
            .iter()
            .position(|s| s.f[member] != 0.0)
            .map(|k| self.time(k))
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(LOG_HEADER)?;
        for (k, s) in self.samples.iter().enumerate() {
            w.write_record(
                [
                    self.time(k),
                    s.x[0],
                    s.x[1],
                    s.v[0],
                    s.v[1],
                    s.f[0],
                    s.f[1],
                    s.fc[0],
                    s.fc[1],
                    s.x_display(),
                ]
                .map(|v| v.to_string()),
            )?;
        }
        w.flush().map_err(|e| Error::io("<trajectory csv>", e))?;
        Ok(())
    }

    /// Reads a log written by [`TrajectoryLog::write_csv`]. The step size is
    /// taken from the second time stamp.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let header = rdr.headers()?.clone();
        if header.iter().ne(LOG_HEADER) {
            return Err(Error::invalid(format!("unexpected trajectory header {header:?}")));
        }
        let mut times = Vec::new();
        let mut samples = Vec::new();
        for row in rdr.records() {
            let row = row?;
            let mut vals = [0.0; 10];
            for (v, field) in vals.iter_mut().zip(row.iter()) {
                *v = field
                    .parse()
                    .map_err(|_| Error::invalid(format!("bad number {field:?} in trajectory")))?;
            }
            times.push(vals[0]);
            samples.push(LogSample {
                x: [vals[1], vals[2]],
                v: [vals[3], vals[4]],
                f: [vals[5], vals[6]],
                fc: [vals[7], vals[8]],
            });
        }
        let dt = match times.get(1) {
            Some(&t1) if t1 > times[0] => t1 - times[0],
            Some(_) => return Err(Error::invalid("trajectory time stamps must increase")),
            None => CouplingConfig::default().dt,
        };
        Ok(Self { dt, samples })
    }

    pub fn write_path(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    pub fn read_path(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(std::io::BufReader::new(file)).map_err(|e| match e {
            Error::InvalidArgument(reason) | Error::Config(reason) => Error::Malformed {
                path: path.to_path_buf(),
                reason,
            },
            other => other,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupOutcome {
    /// `None` when the dwell criterion was never met.
    pub choice: Option<Choice>,
    /// Seconds from group-phase start to dwell completion, or the timeout.
    pub decision_time: f64,
    pub completed: bool,
    pub log: TrajectoryLog,
}

/// Integrates the coupled pair under an arbitrary force policy until the
/// display has stayed beyond `target_threshold` on one side for `dwell`
/// seconds, or until the timeout. The policy receives the time and the
/// coupling forces currently acting on each handle.
pub fn run_coupled<F>(cfg: &CouplingConfig, mut policy: F) -> GroupOutcome
where
    F: FnMut(f64, [f64; 2]) -> [f64; 2],
{
    let mut plant = CoupledHandles::new(cfg);
    let max_steps = cfg.steps(cfg.timeout);
    let dwell_steps = cfg.steps(cfg.dwell).max(1);
    let mut log = TrajectoryLog::new(cfg.dt);
    log.samples.reserve(max_steps.min(8192) + 1);

    let mut held = 0usize;
    let mut side = None;
    let mut last_f = [0.0; 2];
    for k in 0..max_steps {
        let t = k as f64 * cfg.dt;
        let fc = plant.coupling_force();
        let f = policy(t, fc);
        log.samples.push(LogSample { x: plant.x, v: plant.v, f, fc });
        plant.step(f);
        last_f = f;

        let disp = plant.display();
        if disp.abs() >= cfg.target_threshold {
            let now = Choice::from_sign(disp);
            held = if now == side { held + 1 } else { 1 };
            side = now;
        } else {
            held = 0;
            side = None;
        }
        if held >= dwell_steps {
            log.samples.push(LogSample {
                x: plant.x,
                v: plant.v,
                f: last_f,
                fc: plant.coupling_force(),
            });
            return GroupOutcome {
                choice: side,
                decision_time: (k + 1) as f64 * cfg.dt,
                completed: true,
                log,
            };
        }
    }
    log.samples.push(LogSample {
        x: plant.x,
        v: plant.v,
        f: last_f,
        fc: plant.coupling_force(),
    });
    GroupOutcome {
        choice: None,
        decision_time: cfg.timeout,
        completed: false,
        log,
    }
}

/// Group phase of a disagreement trial: each agent runs its own
/// [`Negotiator`] on the coupling force it feels.
pub fn simulate_group_trial<R: Rng + ?Sized>(
    agents: [&AgentProfile; 2],
    percepts: [&Percept; 2],
    cfg: &CouplingConfig,
    rng: &mut R,
) -> Result<GroupOutcome> {
    cfg.validate()?;
    for a in agents {
        a.validate()?;
    }
    if percepts[0].choice == percepts[1].choice {
        return Err(Error::invalid("group phase requires disagreeing percepts"));
    }
    let mut n = [
        Negotiator::new(agents[0], percepts[0]),
        Negotiator::new(agents[1], percepts[1]),
    ];
    Ok(run_coupled(cfg, |t, fc| {
        [n[0].force(t, fc[0], rng), n[1].force(t, fc[1], rng)]
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HandleSample {
    pub x: f64,
    pub v: f64,
    pub f: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndividualOutcome {
    /// Always the percept's choice: nothing opposes a lone agent.
    pub choice: Choice,
    pub rt: f64,
    /// First exit from the initiation zone, if any.
    pub initiation_time: Option<f64>,
    /// Time the handle reached the target threshold.
    pub movement_end: Option<f64>,
    pub completed: bool,
    pub log: Vec<HandleSample>,
}

/// Individual phase: one handle, pushed toward the percept's choice from
/// `rt` onward until it reaches the target threshold.
pub fn simulate_individual_trial<R: Rng + ?Sized>(
    agent: &AgentProfile,
    percept: &Percept,
    cfg: &CouplingConfig,
    rng: &mut R,
) -> Result<IndividualOutcome> {
    cfg.validate()?;
    agent.validate()?;
    let rt = individual_rt(percept, agent, rng);
    let force = percept.choice.sign() * agent.force_magnitude(percept.confidence);
    let mut handle = SingleHandle::new(cfg);
    let max_steps = cfg.steps(cfg.timeout);
    let mut log = Vec::new();
    let mut initiation_time = None;
    for k in 0..max_steps {
        let t = k as f64 * cfg.dt;
        let f = if t >= rt { force } else { 0.0 };
        log.push(HandleSample { x: handle.x, v: handle.v, f });
        handle.step(f);
        let t_next = (k + 1) as f64 * cfg.dt;
        if initiation_time.is_none() && handle.x.abs() > cfg.initiation_threshold {
            initiation_time = Some(t_next);
        }
        if handle.x.abs() >= cfg.target_threshold {
            log.push(HandleSample { x: handle.x, v: handle.v, f });
            return Ok(IndividualOutcome {
                choice: percept.choice,
                rt,
                initiation_time,
                movement_end: Some(t_next),
                completed: true,
                log,
            });
        }
    }
    Ok(IndividualOutcome {
        choice: percept.choice,
        rt,
        initiation_time,
        movement_end: None,
        completed: false,
        log,
    })
}
