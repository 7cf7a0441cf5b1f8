//! Full trial pipeline and per-trial seeding.
//!
//! Every random draw of a trial comes from a ChaCha8 stream seeded by
//! [`derive_seed`] over `(master, dyad, block, trial, stream)`, so results do
//! not depend on how trials are spread across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{simulate_group_trial, simulate_individual_trial, CouplingConfig};
use crate::agents::{perceive, AgentProfile};
use crate::analytics::{MemberOutcome, TrialRecord};
use crate::error::{Error, Result};
use crate::trials::{generate_block, TrialSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedStream {
    /// Block shuffle; trial index 0.
    Block = 0,
    Member1 = 1,
    Member2 = 2,
    Group = 3,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds `parts` into `master` with SplitMix64 finalizers.
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(master), |h, &p| splitmix64(h ^ splitmix64(p)))
}

fn stream_rng(master: u64, dyad: u32, spec: &TrialSpec, stream: SeedStream, extra: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(
        master,
        &[
            dyad as u64,
            spec.block_index as u64,
            spec.trial_index as u64,
            stream as u64,
            extra,
        ],
    ))
}

/// Runs one trial: both individual phases and, on disagreement, the
/// coupled group phase.
pub fn simulate_trial(
    dyad_index: u32,
    spec: &TrialSpec,
    agents: [&AgentProfile; 2],
    cfg: &CouplingConfig,
    master_seed: u64,
) -> Result<TrialRecord> {
    let delta_c = spec.delta_contrast();
    let streams = [SeedStream::Member1, SeedStream::Member2];
    let mut percepts = Vec::with_capacity(2);
    let mut members = Vec::with_capacity(2);
    for (agent, stream) in agents.iter().zip(streams) {
        let mut rng = stream_rng(master_seed, dyad_index, spec, stream, agent.seed);
        let p = perceive(agent, delta_c, &mut rng);
        let ind = simulate_individual_trial(agent, &p, cfg, &mut rng)?;
        members.push(MemberOutcome {
            choice: ind.choice,
            x: p.x,
            confidence: p.confidence,
            rt: ind.rt,
            initiation_time: ind.initiation_time,
            completed: ind.completed,
        });
        percepts.push(p);
    }
    let group = if percepts[0].choice != percepts[1].choice {
        let mut rng = stream_rng(master_seed, dyad_index, spec, SeedStream::Group, 0);
        Some(simulate_group_trial(agents, [&percepts[0], &percepts[1]], cfg, &mut rng)?)
    } else {
        None
    };
    Ok(TrialRecord {
        dyad: dyad_index,
        spec: *spec,
        members: [members[0], members[1]],
        group,
    })
}

/// Trial specs of a session, blocks shuffled from the block stream.
pub fn session_trials(dyad_index: u32, n_blocks: u32, master_seed: u64) -> Result<Vec<TrialSpec>> {
    if n_blocks == 0 {
        return Err(Error::invalid("a session needs at least one block"));
    }
    let mut out = Vec::new();
    for block in 1..=n_blocks {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
            master_seed,
            &[dyad_index as u64, block as u64, 0, SeedStream::Block as u64],
        ));
        out.extend(generate_block(block, &mut rng)?);
    }
    Ok(out)
}

/// Simulates `n_blocks` blocks for one dyad. Trials run on the current
/// rayon pool; the output order is block-major regardless.
pub fn run_session(
    dyad: [&AgentProfile; 2],
    dyad_index: u32,
    n_blocks: u32,
    cfg: &CouplingConfig,
    master_seed: u64,
) -> Result<Vec<TrialRecord>> {
    cfg.validate()?;
    dyad[0].validate()?;
    dyad[1].validate()?;
    let specs = session_trials(dyad_index, n_blocks, master_seed)?;
    specs
        .par_iter()
        .map(|spec| simulate_trial(dyad_index, spec, dyad, cfg, master_seed))
        .collect()
}

/// Runs `f` on a dedicated pool of `workers` threads; 0 uses the global pool.
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if workers == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::invalid(format!("cannot start {workers} workers: {e}")))?;
    Ok(pool.install(f))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_differ_per_coordinate() {
        let base = derive_seed(7, &[1, 2, 3, 1]);
        assert_ne!(base, derive_seed(8, &[1, 2, 3, 1]));
        assert_ne!(base, derive_seed(7, &[2, 2, 3, 1]));
        assert_ne!(base, derive_seed(7, &[1, 3, 3, 1]));
        assert_ne!(base, derive_seed(7, &[1, 2, 4, 1]));
        assert_ne!(base, derive_seed(7, &[1, 2, 3, 2]));
        // order matters
        assert_ne!(derive_seed(7, &[1, 2]), derive_seed(7, &[2, 1]));
        assert_eq!(base, derive_seed(7, &[1, 2, 3, 1]));
    }

    #[test]
    fn session_shape() {
        let a = AgentProfile::default();
        let cfg = CouplingConfig::default();
        let recs = run_session([&a, &a], 1, 2, &cfg, 42).unwrap();
        assert_eq!(recs.len(), 32);
        for r in &recs {
            assert_eq!(r.group.is_some(), !r.agreed());
        }
        assert!(run_session([&a, &a], 1, 0, &cfg, 42).is_err());
    }

    #[test]
    fn same_seed_same_records_any_pool() {
        let a = AgentProfile::default();
        let b = AgentProfile::with_curve(8.0, 1.0);
        let cfg = CouplingConfig::default();
        let one = with_workers(1, || run_session([&a, &b], 3, 1, &cfg, 9)).unwrap().unwrap();
        let four = with_workers(4, || run_session([&a, &b], 3, 1, &cfg, 9)).unwrap().unwrap();
        assert_eq!(one, four);
    }
}
