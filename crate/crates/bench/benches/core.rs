use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use hapdyad_core::agents::perceive;
use hapdyad_core::coupling_sim::{run_session, simulate_group_trial};
use hapdyad_core::psychometrics::{fit_curve, simulate_responses};
use hapdyad_core::stats::t_cdf;
use hapdyad_core::{AgentProfile, CouplingConfig, PsychCurve, CANONICAL_LEVELS};

fn fitting(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let curve = PsychCurve::new(0.3, 5.0).unwrap();
    let table = simulate_responses(&curve, &CANONICAL_LEVELS, 2000, &mut rng).unwrap();
    c.bench_function("fit_curve", |b| b.iter(|| fit_curve(black_box(&table)).unwrap()));
    c.bench_function("t_cdf", |b| b.iter(|| t_cdf(black_box(1.7), black_box(13.0)).unwrap()));
}

fn coupling(c: &mut Criterion) {
    let agent = AgentProfile::default();
    let cfg = CouplingConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let p1 = perceive(&agent, 1.5, &mut rng);
    let p2 = loop {
        let p = perceive(&agent, 1.5, &mut rng);
        if p.choice != p1.choice {
            break p;
        }
    };
    c.bench_function("group_trial", |b| {
        b.iter(|| {
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            simulate_group_trial([&agent, &agent], [&p1, &p2], &cfg, &mut rng).unwrap()
        })
    });
    let mut g = c.benchmark_group("session");
    g.sample_size(10);
    g.bench_function("8_blocks", |b| b.iter(|| run_session([&agent, &agent], 1, 8, &cfg, 5).unwrap()));
    g.finish();
}

criterion_group!(benches, fitting, coupling);
criterion_main!(benches);
