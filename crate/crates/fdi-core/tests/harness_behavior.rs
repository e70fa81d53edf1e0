//! Statistical behavior of the evaluation harness on synthetic data:
//! monotonicity of delta in p, replica exchangeability, and the effect of
//! combining feature families.

use fdi_core::dataset::{build_dataset, overlap, Edge, Role};
use fdi_core::distance::DistanceConfig;
use fdi_core::harness::{
    rep_sampling_seed, run_cell, sample_replica, sweep, KSpec, ModelSpec, SweepConfig,
};
use fdi_core::ingest::{extract_http_features, synth_generate, SynthSpec};
use fdi_core::rng::{mix, rng_from};
use rand::Rng;

fn synth_raw(seed: u64) -> fdi_core::Dataset64 {
    synth_generate(&SynthSpec {
        n_users: 40,
        n_features: 300,
        p_feature: 0.08f64,
        gamma_separation: None,
        seed,
    })
    .unwrap()
}

#[test]
fn delta_is_statistically_nondecreasing_in_p() {
    let raw = synth_raw(7);
    let model = ModelSpec::Distance(DistanceConfig::default());
    let ps = [0.5f64, 0.6, 0.7, 0.8, 0.9];
    let reps = 12;
    let mut means = Vec::new();
    for (p_idx, &p) in ps.iter().enumerate() {
        let mut total = 0.0;
        let mut used = 0usize;
        for rep in 0..reps {
            // paired seeds across p values: same rep index, same stream
            let out = run_cell(&raw, p, 4, &model, rep_sampling_seed(11, p_idx, rep)).unwrap();
            if let Some(d) = out.delta {
                total += d;
                used += 1;
            }
        }
        means.push(total / used as f64);
    }
    for pair in means.windows(2) {
        assert!(
            pair[1] - pair[0] >= -0.02,
            "mean delta dropped beyond noise: {means:?}"
        );
    }
}

#[test]
fn replica_roles_are_exchangeable() {
    // Swapping which replica plays training vs target leaves the delta
    // distribution unchanged; with paired seeds the means must agree up to
    // noise.
    let raw = synth_raw(21);
    let cfg = DistanceConfig::default();
    let k = 4;
    let p = 0.6f64;
    let mut fwd = Vec::new();
    let mut rev = Vec::new();
    for rep in 0..20u64 {
        let seed_a = mix(rep, 1);
        let seed_b = mix(rep, 2);
        let a = sample_replica(&raw, p, seed_a).unwrap();
        let b = sample_replica(&raw, p, seed_b).unwrap().with_role(Role::Target);
        for (training, target, bucket) in [
            (&a, &b, &mut fwd),
            (&b.clone().with_role(Role::Training), &a.clone().with_role(Role::Target), &mut rev),
        ] {
            let ov = overlap(training, target).unwrap();
            if ov.m_tilde() == 0 {
                continue;
            }
            let mut hits = 0usize;
            for user in ov.users() {
                let v = target.get(user).unwrap();
                if fdi_core::distance::topk_infer_distance(v, training, k, &cfg)
                    .unwrap()
                    .contains(user)
                {
                    hits += 1;
                }
            }
            bucket.push(hits as f64 / ov.m_tilde() as f64);
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let diff = (mean(&fwd) - mean(&rev)).abs();
    assert!(
        diff < 0.05,
        "role swap shifted mean delta by {diff} ({} vs {})",
        mean(&fwd),
        mean(&rev)
    );
}

#[test]
fn reported_deltas_are_valid_and_m_tilde_bounded() {
    let raw = synth_raw(33);
    let cfg = SweepConfig {
        p_grid: vec![0.3f64, 0.7],
        k_grid: vec![KSpec::Count(1), KSpec::Fraction(0.1)],
        model: ModelSpec::Binary,
        reps: 5,
        seed: 9,
    };
    let result = sweep(&raw, &cfg).unwrap();
    assert_eq!(result.cells.len(), 4);
    for cell in &result.cells {
        assert!((0.0..=1.0).contains(&cell.delta_mean));
        for rep in &cell.per_rep {
            if let Some(d) = rep.delta {
                assert!((0.0..=1.0).contains(&d));
            }
            assert!(rep.m_tilde <= raw.len());
        }
    }
}

#[test]
fn sweep_csv_shape() {
    let raw = synth_raw(5);
    let cfg = SweepConfig {
        p_grid: vec![0.8f64],
        k_grid: vec![KSpec::Count(2)],
        model: ModelSpec::Binary,
        reps: 1,
        seed: 1,
    };
    let result = sweep(&raw, &cfg).unwrap();
    let mut buf = Vec::new();
    result.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("p,k,delta_mean,delta_stddev,m_tilde_mean,reps_used")
    );
    assert_eq!(lines.count(), 1);
}

/// Synthetic browsing log where both feature families carry signal: each
/// user splits visits between personal hosts with personal path tokens and
/// a handful of shared hosts/paths.
fn synth_http_log(n_users: usize, seed: u64) -> Vec<(String, String)> {
    let mut rng = rng_from(seed);
    let mut log = Vec::new();
    for u in 0..n_users {
        let user = format!("u{u:02}");
        for _ in 0..30 {
            let (host, path) = if rng.gen_bool(0.7) {
                (
                    format!("site{u:02}n{}.example", rng.gen_range(0..3)),
                    format!("/sec{u:02}x{}?tag=u{u:02}t{}", rng.gen_range(0..4), rng.gen_range(0..6)),
                )
            } else {
                (
                    format!("shared{}.example", rng.gen_range(0..4)),
                    format!("/common?q=term{}", rng.gen_range(0..6)),
                )
            };
            log.push((user.clone(), format!("{host}{path}")));
        }
    }
    log
}

#[test]
fn combining_domain_and_path_features_does_not_hurt() {
    let log = synth_http_log(25, 77);
    let extract = extract_http_features::<f64>(&log);
    let domain_edges: Vec<Edge<f64>> = extract
        .edges
        .iter()
        .filter(|e| e.feature.starts_with("D:"))
        .cloned()
        .collect();
    let path_edges: Vec<Edge<f64>> = extract
        .edges
        .iter()
        .filter(|e| e.feature.starts_with("P:"))
        .cloned()
        .collect();

    let mean_delta = |edges: Vec<Edge<f64>>| -> f64 {
        let raw = build_dataset(edges, Role::Training).unwrap();
        let model = ModelSpec::Binary;
        let mut total = 0.0;
        let mut used = 0;
        for rep in 0..8 {
            let out = run_cell(&raw, 0.6f64, 3, &model, rep_sampling_seed(3, 0, rep)).unwrap();
            if let Some(d) = out.delta {
                total += d;
                used += 1;
            }
        }
        total / used as f64
    };

    let combined = mean_delta(extract.edges.clone());
    let domain_only = mean_delta(domain_edges);
    let path_only = mean_delta(path_edges);
    assert!(
        combined >= domain_only.max(path_only) - 0.02,
        "combined {combined} vs domain {domain_only} / path {path_only}"
    );
}
