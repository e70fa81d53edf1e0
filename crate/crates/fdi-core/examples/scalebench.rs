// scratch benchmark, not part of the repo
use fdi_core::dataset::{build_dataset, Edge, Role};
use fdi_core::distance::DistanceConfig;
use fdi_core::harness::{rep_sampling_seed, run_cell, ModelSpec};
use fdi_core::rng::rng_from;
use rand::Rng;

fn main() {
    // Facebook-scale: 4039 users, ~37K relationships, power-law-ish degrees
    let mut rng = rng_from(1);
    let mut edges = Vec::new();
    for u in 0..4039 {
        let deg = (1.0 / (1.0 - rng.gen_range(0.0..0.97f64))).min(60.0) as usize + 2;
        for _ in 0..deg {
            let f = (1283.0 * rng.gen_range(0.0f64..1.0).powf(2.0)) as u32;
            edges.push(Edge::new(format!("u{u:04}"), format!("f{f:04}"), 1.0));
        }
    }
    let raw = build_dataset(edges, Role::Training).unwrap();
    eprintln!("n={} N={} R={}", raw.len(), raw.space().len(), raw.relationship_count());
    let model = ModelSpec::Distance(DistanceConfig::default());
    let t0 = std::time::Instant::now();
    let out = run_cell(&raw, 0.8f64, 10, &model, rep_sampling_seed(1, 0, 0)).unwrap();
    eprintln!("one rep at p=0.8: {:?}, delta={:?} m={}", t0.elapsed(), out.delta, out.m_tilde);
    let t1 = std::time::Instant::now();
    for (pi, p) in [0.5f64, 0.9].into_iter().enumerate() {
        let out = run_cell(&raw, p, 10, &model, rep_sampling_seed(1, pi, 1)).unwrap();
        eprintln!("p={p}: delta={:?}", out.delta);
    }
    eprintln!("two more reps: {:?}", t1.elapsed());
    eprintln!("estimated 50-rep sweep: {:?}", t0.elapsed() * 50 / 3 + t1.elapsed() * 50 / 3);
}
