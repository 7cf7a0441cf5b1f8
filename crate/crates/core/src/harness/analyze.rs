use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use super::config::{validate_thresholds, SessionConfig};
use super::records::{load_records, read_rows, rows_by_dyad, RunDir};
use crate::analytics::{
    leadership_row, predictor_tally, LeadershipRow, Member, Predictor, Tally, DEFAULT_CROSSING_THRESHOLDS,
};
use crate::error::{Error, Result};
use crate::stats::{describe, t_test_one_sample, t_test_paired, t_test_two_sample, SampleSummary, TestFlavor};

/// Human first-crossing accuracies (%) at the default thresholds.
const CROSSING_REFERENCE: [f64; 7] = [88.5, 90.0, 91.9, 92.9, 93.7, 94.6, 95.7];

fn reference_accuracy(p: &Predictor) -> Option<f64> {
    match p {
        Predictor::FirstMover => Some(66.5),
        Predictor::PeakForce => Some(71.7),
        Predictor::MechanicalWork => Some(69.0),
        Predictor::FirstCrossing(t) => DEFAULT_CROSSING_THRESHOLDS
            .iter()
            .position(|d| d == t)
            .map(|i| CROSSING_REFERENCE[i]),
        _ => None,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PredictorRow {
    pub predictor: String,
    pub threshold: Option<f64>,
    pub accuracy: Option<f64>,
    pub n: usize,
    pub reference_human_value: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
struct LeadershipCsvRow {
    dyad: u32,
    block: u32,
    trial: u32,
    leader: u8,
    first_mover: Option<u8>,
    first_mover_onset: Option<u8>,
    crossing_member: Option<u8>,
    crossing_side: Option<crate::trials::Choice>,
    peak_leader_n: f64,
    peak_follower_n: f64,
    work_leader: f64,
    work_follower: f64,
    velo_l_ratio: Option<f64>,
    velo_f_ratio: Option<f64>,
    decision_time_s: f64,
}

impl From<&LeadershipRow> for LeadershipCsvRow {
    fn from(r: &LeadershipRow) -> Self {
        let num = |m: Option<Member>| m.map(Member::number);
        Self {
            dyad: r.dyad,
            block: r.block,
            trial: r.trial,
            leader: r.leader.number(),
            first_mover: num(r.first_mover),
            first_mover_onset: num(r.first_mover_onset),
            crossing_member: num(r.crossing_member),
            crossing_side: r.crossing_side,
            peak_leader_n: r.peak_leader,
            peak_follower_n: r.peak_follower,
            work_leader: r.work_leader,
            work_follower: r.work_follower,
            velo_l_ratio: r.velo_l_ratio,
            velo_f_ratio: r.velo_f_ratio,
            decision_time_s: r.decision_time,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
struct TimeRow {
    measure: &'static str,
    n: usize,
    mean_s: Option<f64>,
    std_s: Option<f64>,
    reference_human_value: Option<f64>,
}

impl TimeRow {
    fn new(measure: &'static str, s: Option<SampleSummary>, reference: Option<f64>) -> Self {
        Self {
            measure,
            n: s.map_or(0, |s| s.n),
            mean_s: s.map(|s| s.mean),
            std_s: s.map(|s| s.std),
            reference_human_value: reference,
        }
    }
}

/// Everything `analyze` computes, before it is written out.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub predictors: Vec<PredictorRow>,
    pub leadership: Vec<LeadershipRow>,
    pub individual_rt: Vec<f64>,
    pub group_time: Vec<f64>,
    pub individual_initiation: Vec<f64>,
    pub group_initiation: Vec<f64>,
    pub n_records: usize,
    pub n_disagreements: usize,
    pub group_timeouts: usize,
    pub x_thresh: f64,
}

fn predictor_set(thresholds: &[f64]) -> Vec<Predictor> {
    let mut out = vec![Predictor::FirstMover, Predictor::FirstMoverOnset];
    out.extend(thresholds.iter().map(|&t| Predictor::FirstCrossing(t)));
    out.extend([
        Predictor::PeakForce,
        Predictor::MechanicalWork,
        Predictor::FixedMember(Member::One),
    ]);
    out
}

/// Runs every analysis over a simulation directory, loading one dyad's
/// trajectories at a time.
pub fn analyze_run(run: &RunDir, thresholds: &[f64], movement_end: f64) -> Result<Analysis> {
    validate_thresholds(thresholds)?;
    let rows = read_rows(&run.records)?;
    let predictors = predictor_set(thresholds);
    let mut tallies = vec![Tally::default(); predictors.len()];
    let x_thresh = thresholds[0];
    let mut a = Analysis {
        predictors: Vec::new(),
        leadership: Vec::new(),
        individual_rt: Vec::new(),
        group_time: Vec::new(),
        individual_initiation: Vec::new(),
        group_initiation: Vec::new(),
        n_records: rows.len(),
        n_disagreements: 0,
        group_timeouts: 0,
        x_thresh,
    };
    let traj = run.trajectory_dir();
    for dyad_rows in rows_by_dyad(&rows).values() {
        let records = load_records(dyad_rows.iter().copied(), &traj)?;
        for (p, t) in predictors.iter().zip(tallies.iter_mut()) {
            t.merge(&predictor_tally(&records, *p)?);
        }
        for r in &records {
            a.individual_rt.extend(r.members.map(|m| m.rt));
            a.individual_initiation
                .extend(r.members.iter().filter_map(|m| m.initiation_time));
            if r.group.is_some() {
                a.n_disagreements += 1;
            }
            match r.completed_group() {
                Some(g) => {
                    a.group_time.push(g.decision_time);
                    if let Some(c) = crate::analytics::first_crossing(&g.log, x_thresh)? {
                        a.group_initiation.push(c.time);
                    }
                }
                None if r.group.is_some() => a.group_timeouts += 1,
                None => {}
            }
            if let Some(row) = leadership_row(r, x_thresh, movement_end)? {
                a.leadership.push(row);
            }
        }
    }
    a.predictors = predictors
        .iter()
        .zip(&tallies)
        .map(|(p, t)| PredictorRow {
            predictor: p.name().to_string(),
            threshold: p.threshold(),
            accuracy: t.accuracy().ok(),
            n: t.n,
            reference_human_value: reference_accuracy(p),
        })
        .collect();
    Ok(a)
}

fn test_json<T: Serialize>(r: Result<T>) -> Value {
    match r {
        Ok(v) => serde_json::to_value(v).unwrap_or(Value::Null),
        Err(e) => json!({ "error": e.to_string() }),
    }
}

fn mean_of(xs: &[f64]) -> Value {
    describe(xs).map_or(Value::Null, |s| json!(s.mean))
}

impl Analysis {
    pub fn stats_json(&self) -> Value {
        let pick = |f: fn(&LeadershipRow) -> f64| -> Vec<f64> { self.leadership.iter().map(f).collect() };
        let peak_l = pick(|r| r.peak_leader);
        let peak_f = pick(|r| r.peak_follower);
        let work_l = pick(|r| r.work_leader);
        let work_f = pick(|r| r.work_follower);
        let (ratio_l, ratio_f): (Vec<f64>, Vec<f64>) = self
            .leadership
            .iter()
            .filter_map(|r| Some((r.velo_l_ratio?, r.velo_f_ratio?)))
            .unzip();
        let dev_l: Vec<f64> = ratio_l.iter().map(|r| (r - 1.0).abs()).collect();
        let dev_f: Vec<f64> = ratio_f.iter().map(|r| (r - 1.0).abs()).collect();
        let two = |a: &[f64], b: &[f64]| {
            json!({
                "pooled": test_json(t_test_two_sample(a, b, TestFlavor::Pooled)),
                "welch": test_json(t_test_two_sample(a, b, TestFlavor::Welch)),
            })
        };
        json!({
            "n_records": self.n_records,
            "n_disagreements": self.n_disagreements,
            "n_completed_groups": self.group_time.len(),
            "group_timeouts": self.group_timeouts,
            "x_thresh": self.x_thresh,
            "peak_force": {
                "leader_mean_n": mean_of(&peak_l),
                "follower_mean_n": mean_of(&peak_f),
                "paired": test_json(t_test_paired(&peak_l, &peak_f)),
                "two_sample": two(&peak_l, &peak_f),
                "reference_human_value": "Leader 0.75 N vs Follower 0.43 N, t(676)=9.71",
            },
            "mechanical_work": {
                "leader_mean": mean_of(&work_l),
                "follower_mean": mean_of(&work_f),
                "paired": test_json(t_test_paired(&work_l, &work_f)),
                "two_sample": two(&work_l, &work_f),
                "follower_vs_zero": test_json(t_test_one_sample(&work_f, 0.0)),
                "reference_human_value": "Leader 0.30 J vs Follower -0.08 J, t(676)=15.7",
            },
            "decision_time": {
                "group_mean_s": mean_of(&self.group_time),
                "individual_mean_s": mean_of(&self.individual_rt),
                "group_vs_individual": two(&self.group_time, &self.individual_rt),
                "reference_human_value": "group 2856 ms (N=850) vs individual 881 ms (N=4352), t(850, 4352)=-23.84",
            },
            "initiation_time": {
                "group_mean_s": mean_of(&self.group_initiation),
                "individual_mean_s": mean_of(&self.individual_initiation),
                "group_vs_individual": two(&self.group_initiation, &self.individual_initiation),
            },
            "velocity_ratio": {
                "n": ratio_l.len(),
                "leader_mean": mean_of(&ratio_l),
                "follower_mean": mean_of(&ratio_f),
                "leader_vs_follower": test_json(t_test_paired(&ratio_l, &ratio_f)),
                "distance_from_one": test_json(t_test_paired(&dev_l, &dev_f)),
                "reference_human_value": "VeloL/VeloD 1.0788 vs VeloF/VeloD 1.1115 (N=1866), t=-2.92",
            },
        })
    }

    pub fn write(&self, out: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
        let csv_at = |name: &str| -> Result<(PathBuf, csv::Writer<BufWriter<File>>)> {
            let p = out.join(name);
            let f = File::create(&p).map_err(|e| Error::io(&p, e))?;
            Ok((
                p,
                csv::WriterBuilder::new()
                    .terminator(csv::Terminator::Any(b'\n'))
                    .from_writer(BufWriter::new(f)),
            ))
        };
        let mut written = Vec::new();

        let (p, mut w) = csv_at("predictors.csv")?;
        for r in &self.predictors {
            w.serialize(r)?;
        }
        w.flush().map_err(|e| Error::io(&p, e))?;
        written.push(p);

        let (p, mut w) = csv_at("leadership.csv")?;
        if self.leadership.is_empty() {
            w.write_record([
                "dyad", "block", "trial", "leader", "first_mover", "first_mover_onset",
                "crossing_member", "crossing_side", "peak_leader_n", "peak_follower_n",
                "work_leader", "work_follower", "velo_l_ratio", "velo_f_ratio", "decision_time_s",
            ])?;
        }
        for r in &self.leadership {
            w.serialize(LeadershipCsvRow::from(r))?;
        }
        w.flush().map_err(|e| Error::io(&p, e))?;
        written.push(p);

        let (p, mut w) = csv_at("times.csv")?;
        for row in [
            TimeRow::new("individual_rt", describe(&self.individual_rt), Some(0.881)),
            TimeRow::new("group_decision_time", describe(&self.group_time), Some(2.856)),
            TimeRow::new("individual_initiation", describe(&self.individual_initiation), None),
            TimeRow::new("group_initiation", describe(&self.group_initiation), None),
        ] {
            w.serialize(row)?;
        }
        w.flush().map_err(|e| Error::io(&p, e))?;
        written.push(p);

        let p = out.join("stats.json");
        let mut text = serde_json::to_string_pretty(&self.stats_json())?;
        text.push('\n');
        std::fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
        written.push(p);
        Ok(written)
    }
}

/// Thresholds and movement end from the config stored with the run.
pub fn run_settings(run: &RunDir, config: Option<&Path>) -> Result<(Vec<f64>, f64)> {
    let path = config
        .map(Path::to_path_buf)
        .unwrap_or_else(|| run.root.join(super::records::CONFIG_COPY));
    let (cfg, _) = SessionConfig::load(&path)?;
    Ok((cfg.thresholds, cfg.coupling.target_threshold))
}
