//! File-level entry points behind the command line: simulate a session,
//! fit curves, analyze leadership, sweep the benefit curve and build cohort
//! figure data.

pub mod analyze;
pub mod config;
pub mod fits;
pub mod records;
pub mod report;

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde_json::json;

use crate::coupling_sim::{run_session, with_workers};
use crate::error::{Error, Result};

pub use analyze::{analyze_run, Analysis};
pub use config::SessionConfig;
pub use fits::{fit_dyad, DyadFits};
pub use records::{Manifest, RecordRow, RunDir};
pub use report::{benefit_sweep, SweepPoint};

use records::{
    rows_by_dyad, sha256_file, sha256_hex, trajectory_file_name, RecordsWriter, CONFIG_COPY,
    MANIFEST_FILE, RECORDS_FILE, SEED_SCHEME, TRAJECTORY_DIR,
};

fn create_dir(p: &Path) -> Result<()> {
    std::fs::create_dir_all(p).map_err(|e| Error::io(p, e))
}

/// Simulates every dyad in the config and writes records, trajectories, a
/// config copy and the manifest into `out` (or the config's `output_dir`).
pub fn cmd_simulate(config_path: &Path, out: Option<&Path>, workers: Option<usize>) -> Result<Manifest> {
    let (cfg, config_bytes) = SessionConfig::load(config_path)?;
    let out = out
        .map(Path::to_path_buf)
        .or_else(|| cfg.output_dir.clone())
        .ok_or_else(|| Error::Config("no output directory: pass --out or set output_dir".into()))?;
    let workers = workers.unwrap_or(cfg.workers);
    let traj_dir = out.join(TRAJECTORY_DIR);
    create_dir(&traj_dir)?;

    let records_path = out.join(RECORDS_FILE);
    let file = File::create(&records_path).map_err(|e| Error::io(&records_path, e))?;
    let mut writer = RecordsWriter::new(BufWriter::new(file));
    let (mut n_records, mut n_trajectories) = (0, 0);
    for (i, [a, b]) in cfg.dyads.iter().enumerate() {
        let dyad = i as u32 + 1;
        let records = with_workers(workers, || run_session([a, b], dyad, cfg.n_blocks, &cfg.coupling, cfg.master_seed))??;
        for r in &records {
            let row = RecordRow::from_record(r);
            writer.write(&row)?;
            if let Some(g) = &r.group {
                let name = trajectory_file_name(dyad, row.block, row.trial);
                g.log.write_path(&traj_dir.join(name))?;
                n_trajectories += 1;
            }
        }
        n_records += records.len();
    }
    writer.finish()?;

    let config_copy = out.join(CONFIG_COPY);
    std::fs::write(&config_copy, &config_bytes).map_err(|e| Error::io(&config_copy, e))?;
    let manifest = Manifest {
        toolkit: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        master_seed: cfg.master_seed,
        seed_scheme: SEED_SCHEME.into(),
        config_file: CONFIG_COPY.into(),
        config_sha256: sha256_hex(&config_bytes),
        records_file: RECORDS_FILE.into(),
        records_sha256: sha256_file(&records_path)?,
        n_dyads: cfg.dyads.len(),
        n_records,
        n_trajectories,
    };
    manifest.write(&out.join(MANIFEST_FILE))?;
    Ok(manifest)
}

/// Fits members and dyad for every dyad in `records` and writes `fits.json`.
pub fn cmd_fit(records: &Path, per_block: bool, out: Option<&Path>) -> Result<PathBuf> {
    let run = RunDir::locate(records);
    let rows = records::read_rows(&run.records)?;
    let dyads = rows_by_dyad(&rows)
        .values()
        .map(|rows| {
            let mut j = fits::DyadFitsJson::new(&fit_dyad(rows)?)?;
            if per_block {
                j.per_block = Some(fits::fit_blocks(rows));
            }
            Ok(j)
        })
        .collect::<Result<Vec<_>>>()?;
    let out = out.map(Path::to_path_buf).unwrap_or_else(|| run.root.clone());
    create_dir(&out)?;
    let path = out.join("fits.json");
    let mut text = serde_json::to_string_pretty(&json!({ "dyads": dyads }))?;
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Verifies the run against its manifest, then writes the leadership and
/// timing analyses.
pub fn cmd_analyze(
    records: &Path,
    thresholds: Option<&[f64]>,
    config: Option<&Path>,
    out: Option<&Path>,
) -> Result<Vec<PathBuf>> {
    let run = RunDir::locate(records);
    run.verify(config)?;
    let (cfg_thresholds, movement_end) = analyze::run_settings(&run, config)?;
    let thresholds = thresholds.map(<[f64]>::to_vec).unwrap_or(cfg_thresholds);
    let analysis = analyze_run(&run, &thresholds, movement_end)?;
    analysis.write(out.unwrap_or(&run.root))
}

/// Runs the benefit sweep and writes `benefit_curve.csv` into `out`.
pub fn cmd_sweep(ratios: &[f64], trials_per_level: u64, seed: u64, repetitions: usize, out: &Path) -> Result<PathBuf> {
    let points = benefit_sweep(ratios, trials_per_level, repetitions, seed)?;
    create_dir(out)?;
    let path = out.join("benefit_curve.csv");
    report::write_sweep(&path, &points)?;
    Ok(path)
}

/// Fits every dyad of a simulated cohort and writes the figure-data files.
pub fn cmd_report(cohort: &Path, out: Option<&Path>) -> Result<Vec<PathBuf>> {
    let run = RunDir::locate(cohort);
    run.verify(None)?;
    let rows = records::read_rows(&run.records)?;
    let by_dyad = rows_by_dyad(&rows);
    let mut all_fits = Vec::with_capacity(by_dyad.len());
    let mut observed = Vec::with_capacity(by_dyad.len());
    for rows in by_dyad.values() {
        all_fits.push(fit_dyad(rows)?);
        let points = |t: Result<crate::psychometrics::ResponseTable>| -> Result<Vec<(f64, f64)>> {
            let t = t?;
            Ok(t.levels().into_iter().zip(t.proportions()).collect())
        };
        observed.push([
            points(fits::member_table(rows, 0))?,
            points(fits::member_table(rows, 1))?,
            points(fits::dyad_table(rows))?,
        ]);
    }
    report::write_report(out.unwrap_or(&run.root), &all_fits, &observed)
}
