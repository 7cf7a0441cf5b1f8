//! `records.csv`, per-trial trajectory files and the run manifest.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analytics::{MemberOutcome, TrialRecord};
use crate::coupling_sim::{GroupOutcome, TrajectoryLog};
use crate::error::{Error, Result};
use crate::trials::{Choice, TrialSpec};

pub const RECORDS_FILE: &str = "records.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_COPY: &str = "config.toml";
pub const TRAJECTORY_DIR: &str = "trajectories";

pub const SEED_SCHEME: &str = "ChaCha8 per (dyad, block, trial, stream); seed = fold of SplitMix64 \
finalizers over [master, dyad, block, trial, stream, agent seed]; streams: 0 block shuffle \
(trial 0), 1 member 1, 2 member 2, 3 group phase";

/// One line of `records.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordRow {
    pub dyad: u32,
    pub block: u32,
    pub trial: u32,
    pub interval: u8,
    pub contrast: f64,
    pub position: u8,
    pub delta_c: f64,
    pub correct_answer: Choice,
    pub x1: f64,
    pub x2: f64,
    pub confidence1: f64,
    pub confidence2: f64,
    pub choice1: Choice,
    pub choice2: Choice,
    pub rt1: f64,
    pub rt2: f64,
    pub initiation1: Option<f64>,
    pub initiation2: Option<f64>,
    pub completed1: bool,
    pub completed2: bool,
    pub agreed: bool,
    pub group_choice: Option<Choice>,
    /// Empty on agreement trials.
    pub group_completed: Option<bool>,
    pub group_decision_time: Option<f64>,
    pub member1_correct: bool,
    pub member2_correct: bool,
    pub group_correct: Option<bool>,
}

impl RecordRow {
    pub fn from_record(r: &TrialRecord) -> Self {
        let [m1, m2] = r.members;
        Self {
            dyad: r.dyad,
            block: r.spec.block_index,
            trial: r.spec.trial_index,
            interval: r.spec.oddball_interval.number(),
            contrast: r.spec.oddball_contrast,
            position: r.spec.oddball_position,
            delta_c: r.spec.delta_contrast(),
            correct_answer: r.correct_answer(),
            x1: m1.x,
            x2: m2.x,
            confidence1: m1.confidence,
            confidence2: m2.confidence,
            choice1: m1.choice,
            choice2: m2.choice,
            rt1: m1.rt,
            rt2: m2.rt,
            initiation1: m1.initiation_time,
            initiation2: m2.initiation_time,
            completed1: m1.completed,
            completed2: m2.completed,
            agreed: r.agreed(),
            group_choice: r.group_choice(),
            group_completed: r.group.as_ref().map(|g| g.completed),
            group_decision_time: r.group.as_ref().map(|g| g.decision_time),
            member1_correct: r.member_correct(crate::analytics::Member::One),
            member2_correct: r.member_correct(crate::analytics::Member::Two),
            group_correct: r.group_correct(),
        }
    }

    pub fn spec(&self) -> Result<TrialSpec> {
        TrialSpec::new(
            self.block,
            self.trial,
            Choice::from_number(self.interval)?,
            self.contrast,
            self.position,
        )
    }

    /// Rebuilds the record; `log` must be given exactly for disagreement
    /// trials.
    pub fn to_record(&self, log: Option<TrajectoryLog>) -> Result<TrialRecord> {
        let member = |choice, x, confidence, rt, initiation_time, completed| MemberOutcome {
            choice,
            x,
            confidence,
            rt,
            initiation_time,
            completed,
        };
        let group = match (self.agreed, log) {
            (true, None) => None,
            (false, Some(log)) => Some(GroupOutcome {
                choice: self.group_choice,
                decision_time: self.group_decision_time.unwrap_or(f64::NAN),
                completed: self.group_completed.unwrap_or(false),
                log,
            }),
            (true, Some(_)) => return Err(Error::invalid("agreement trial with a group log")),
            (false, None) => return Err(Error::invalid("disagreement trial without a group log")),
        };
        Ok(TrialRecord {
            dyad: self.dyad,
            spec: self.spec()?,
            members: [
                member(self.choice1, self.x1, self.confidence1, self.rt1, self.initiation1, self.completed1),
                member(self.choice2, self.x2, self.confidence2, self.rt2, self.initiation2, self.completed2),
            ],
            group,
        })
    }

    /// Answer used for the dyad's psychometric curve: the shared choice on
    /// agreement, the negotiated one otherwise.
    pub fn dyad_choice(&self) -> Option<Choice> {
        if self.agreed {
            Some(self.choice1)
        } else if self.group_completed == Some(true) {
            self.group_choice
        } else {
            None
        }
    }
}

pub fn trajectory_file_name(dyad: u32, block: u32, trial: u32) -> String {
    format!("dyad{dyad}_block{block}_trial{trial}.csv")
}

/// Writer for `records.csv`, fed dyad by dyad.
pub struct RecordsWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> RecordsWriter<W> {
    pub fn new(out: W) -> Self {
        Self {
            inner: csv::WriterBuilder::new()
                .terminator(csv::Terminator::Any(b'\n'))
                .from_writer(out),
        }
    }

    pub fn write(&mut self, row: &RecordRow) -> Result<()> {
        self.inner.serialize(row)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.inner.flush().map_err(|e| Error::io("<records csv>", e))
    }
}

pub fn write_rows(path: &Path, rows: &[RecordRow]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = RecordsWriter::new(BufWriter::new(file));
    for r in rows {
        w.write(r)?;
    }
    w.finish()
}

pub fn read_rows(path: &Path) -> Result<Vec<RecordRow>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::Reader::from_reader(std::io::BufReader::new(file));
    let rows = rdr
        .deserialize()
        .collect::<std::result::Result<Vec<RecordRow>, _>>()
        .map_err(|e| Error::Malformed {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
    if rows.is_empty() {
        return Err(Error::invalid(format!("{} holds no records", path.display())));
    }
    Ok(rows)
}

/// Groups rows by dyad, keeping file order within each dyad.
pub fn rows_by_dyad(rows: &[RecordRow]) -> BTreeMap<u32, Vec<&RecordRow>> {
    let mut out: BTreeMap<u32, Vec<&RecordRow>> = BTreeMap::new();
    for r in rows {
        out.entry(r.dyad).or_default().push(r);
    }
    out
}

/// Rebuilds full records, reading group logs from `trajectory_dir`.
pub fn load_records<'a, I>(rows: I, trajectory_dir: &Path) -> Result<Vec<TrialRecord>>
where
    I: IntoIterator<Item = &'a RecordRow>,
{
    rows.into_iter()
        .map(|row| {
            let log = if row.agreed {
                None
            } else {
                let p = trajectory_dir.join(trajectory_file_name(row.dyad, row.block, row.trial));
                Some(TrajectoryLog::read_path(&p)?)
            };
            row.to_record(log)
        })
        .collect()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub toolkit: String,
    pub version: String,
    pub master_seed: u64,
    pub seed_scheme: String,
    pub config_file: String,
    pub config_sha256: String,
    pub records_file: String,
    pub records_sha256: String,
    pub n_dyads: usize,
    pub n_records: usize,
    pub n_trajectories: usize,
}

impl Manifest {
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Malformed {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
    }
}

/// A simulation output directory: records, trajectories, config copy and
/// manifest.
#[derive(Debug, Clone)]
pub struct RunDir {
    pub root: PathBuf,
    pub records: PathBuf,
}

impl RunDir {
    /// Accepts either the directory or the `records.csv` inside it.
    pub fn locate(records_or_dir: &Path) -> Self {
        if records_or_dir.is_dir() {
            Self {
                root: records_or_dir.to_path_buf(),
                records: records_or_dir.join(RECORDS_FILE),
            }
        } else {
            let root = records_or_dir
                .parent()
                .map(Path::to_path_buf)
                .unwrap_or_else(|| PathBuf::from("."));
            Self {
                root,
                records: records_or_dir.to_path_buf(),
            }
        }
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.root.join(MANIFEST_FILE)
    }

    pub fn trajectory_dir(&self) -> PathBuf {
        self.root.join(TRAJECTORY_DIR)
    }

    /// Checks the records and the config against the manifest. `config`
    /// overrides the config copy stored next to the records.
    pub fn verify(&self, config: Option<&Path>) -> Result<Manifest> {
        let manifest_path = self.manifest_path();
        if !manifest_path.exists() {
            return Err(Error::Manifest(format!(
                "no {MANIFEST_FILE} next to {}",
                self.records.display()
            )));
        }
        let manifest = Manifest::read(&manifest_path)?;
        let records_hash = sha256_file(&self.records)?;
        if records_hash != manifest.records_sha256 {
            return Err(Error::Manifest(format!(
                "{} does not match the manifest (sha256 {records_hash}, expected {})",
                self.records.display(),
                manifest.records_sha256
            )));
        }
        let config_path = config
            .map(Path::to_path_buf)
            .unwrap_or_else(|| self.root.join(&manifest.config_file));
        let config_hash = sha256_file(&config_path)?;
        if config_hash != manifest.config_sha256 {
            return Err(Error::Manifest(format!(
                "config {} does not match the manifest (sha256 {config_hash}, expected {})",
                config_path.display(),
                manifest.config_sha256
            )));
        }
        Ok(manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::AgentProfile;
    use crate::coupling_sim::{run_session, CouplingConfig};

    #[test]
    fn row_round_trip() {
        let a = AgentProfile::default();
        let recs = run_session([&a, &a], 2, 1, &CouplingConfig::default(), 4).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let rows: Vec<_> = recs.iter().map(RecordRow::from_record).collect();
        let path = dir.path().join(RECORDS_FILE);
        write_rows(&path, &rows).unwrap();
        assert_eq!(read_rows(&path).unwrap(), rows);

        let traj = dir.path().join(TRAJECTORY_DIR);
        std::fs::create_dir(&traj).unwrap();
        for r in &recs {
            if let Some(g) = &r.group {
                g.log
                    .write_path(&traj.join(trajectory_file_name(r.dyad, r.spec.block_index, r.spec.trial_index)))
                    .unwrap();
            }
        }
        let back = load_records(&rows, &traj).unwrap();
        assert_eq!(back, recs);
    }

    #[test]
    fn header_layout() {
        let dir = tempfile::tempdir().unwrap();
        let a = AgentProfile::default();
        let recs = run_session([&a, &a], 1, 1, &CouplingConfig::default(), 1).unwrap();
        let path = dir.path().join(RECORDS_FILE);
        write_rows(&path, &[RecordRow::from_record(&recs[0])]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with(
            "dyad,block,trial,interval,contrast,position,delta_c,correct_answer,x1,x2,"
        ));
        assert!(!text.contains('\r'));
    }

    #[test]
    fn hashes_are_hex_sha256() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
