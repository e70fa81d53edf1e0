use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use fdi_core::archive::{read_archive, write_archive};
use fdi_core::binary::{theorem1_check, BinaryParams};
use fdi_core::dataset::{build_dataset, Dataset, Edge, Role};
use fdi_core::detect::{detect_all, estimate_thresholds, DetectionMode};
use fdi_core::distance::{theorem2_check, Combiner, DistanceConfig, ModelWeights, SampledStats};
use fdi_core::distribution::{theorem3_check, TripleOptions};
use fdi_core::harness::{sweep, KSpec, ModelSpec, SweepConfig};
use fdi_core::ingest::{parse_http_log, parse_snap_ego, parse_tsv, MalformedLine};

use crate::manifest::Manifest;
use crate::util::{write_atomic, CliError, CliResult};
use crate::{Cli, CombinerArg, Command, IngestFormat, ModeArg, ModelArg, RoleArg, WeightsArg};

pub fn run(cli: Cli) -> CliResult<()> {
    let seed = cli.seed;
    let jobs = cli.jobs;
    match cli.command {
        Command::Ingest {
            format,
            role,
            strict,
            out,
            inputs,
        } => cmd_ingest(format, role, strict, &out, &inputs, seed),
        Command::Stats { data, out } => cmd_stats(&data, &out, seed),
        Command::Quantify {
            train,
            target,
            model,
            p,
            k,
            delta,
            xi,
            norm,
            combiner,
            weights,
            trials,
            slack,
            out,
        } => cmd_quantify(QuantifyArgs {
            train,
            target,
            model,
            p,
            k,
            delta,
            xi,
            norm,
            combiner,
            weights,
            trials,
            slack,
            out,
            seed,
            jobs,
        }),
        Command::Sweep {
            data,
            config,
            model,
            p,
            k,
            reps,
            combiner,
            norm,
            weights,
            out,
        } => cmd_sweep(SweepArgs {
            data,
            config,
            model,
            p,
            k,
            reps,
            combiner,
            norm,
            weights,
            out,
            seed,
            jobs,
        }),
        Command::Detect {
            train,
            target,
            mode,
            xi,
            p,
            trials,
            combiner,
            norm,
            weights,
            out,
        } => cmd_detect(DetectArgs {
            train,
            target,
            mode,
            xi,
            p,
            trials,
            combiner,
            norm,
            weights,
            out,
            seed,
        }),
    }
}

fn report_malformed(path: &Path, malformed: &[MalformedLine]) {
    for m in malformed.iter().take(20) {
        eprintln!("fdi: {}:{}: {}", path.display(), m.line, m.reason);
    }
    if malformed.len() > 20 {
        eprintln!("fdi: ... and {} more", malformed.len() - 20);
    }
}

fn cmd_ingest(
    format: IngestFormat,
    role: RoleArg,
    strict: bool,
    out: &Path,
    inputs: &[PathBuf],
    seed: u64,
) -> CliResult<()> {
    let role = match role {
        RoleArg::Training => Role::Training,
        RoleArg::Target => Role::Target,
    };
    let mut edges: Vec<Edge<f64>> = Vec::new();
    let mut total_malformed = 0usize;
    match format {
        IngestFormat::Tsv => {
            for input in inputs {
                let outcome = parse_tsv::<f64>(input)?;
                report_malformed(input, &outcome.malformed);
                total_malformed += outcome.malformed.len();
                if strict {
                    edges.extend(outcome.strict(&input.display().to_string())?);
                } else {
                    edges.extend(outcome.edges);
                }
            }
        }
        IngestFormat::Snap => {
            edges = parse_snap_ego(inputs)?;
        }
        IngestFormat::Http => {
            for input in inputs {
                let (extract, malformed) = parse_http_log::<f64>(input)?;
                report_malformed(input, &malformed);
                total_malformed += malformed.len();
                if strict && !malformed.is_empty() {
                    return Err(CliError::Core(fdi_core::Error::Parse {
                        path: input.display().to_string(),
                        count: malformed.len(),
                        first_line: malformed[0].line,
                        first_reason: malformed[0].reason.clone(),
                    }));
                }
                if extract.skipped > 0 {
                    eprintln!(
                        "fdi: {}: skipped {} records without a host",
                        input.display(),
                        extract.skipped
                    );
                }
                edges.extend(extract.edges);
            }
        }
    }
    if total_malformed > 0 {
        eprintln!("fdi: {total_malformed} malformed line(s) skipped");
    }
    let dataset = build_dataset(edges, role)?;
    write_archive(&dataset, out)?;

    let mut manifest = Manifest::new("ingest", seed);
    manifest.set(
        "format",
        match format {
            IngestFormat::Tsv => "tsv",
            IngestFormat::Snap => "snap",
            IngestFormat::Http => "http",
        },
    );
    manifest.set("role", role.as_str());
    manifest.set("strict", strict);
    for input in inputs {
        manifest.add_input(input)?;
    }
    manifest.write(&out.join("manifest.json"))?;

    println!(
        "ingested {} users, {} features, {} relationships -> {}",
        dataset.len(),
        dataset.space().len(),
        dataset.relationship_count(),
        out.display()
    );
    Ok(())
}

fn cmd_stats(data: &Path, out: &Path, seed: u64) -> CliResult<()> {
    let dataset: Dataset<f64> = read_archive(data)?;
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(["kind", "degree", "count"])
        .map_err(|e| CliError::Config(format!("csv: {e}")))?;
    for (kind, hist) in [
        ("user", dataset.user_degree_histogram()),
        ("feature", dataset.feature_degree_histogram()),
    ] {
        for (degree, count) in hist {
            wtr.write_record(&[kind.to_string(), degree.to_string(), count.to_string()])
                .map_err(|e| CliError::Config(format!("csv: {e}")))?;
        }
    }
    let bytes = wtr
        .into_inner()
        .map_err(|e| CliError::Config(format!("csv: {e}")))?;
    std::fs::create_dir_all(out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
    write_atomic(&out.join("stats.csv"), &bytes)?;

    let mut manifest = Manifest::new("stats", seed);
    manifest.add_input(data)?;
    manifest.write(&out.join("manifest.json"))?;
    Ok(())
}

fn combiner_of(arg: CombinerArg) -> Combiner {
    match arg {
        CombinerArg::Product => Combiner::Product,
        CombinerArg::Raw => Combiner::Raw,
        CombinerArg::LogProduct => Combiner::LogProduct,
    }
}

fn distance_config(
    combiner: CombinerArg,
    norm: f64,
    weights: WeightsArg,
    training: &Dataset<f64>,
) -> DistanceConfig<f64> {
    DistanceConfig {
        combiner: combiner_of(combiner),
        weights: match weights {
            WeightsArg::Unit => ModelWeights::Unit,
            WeightsArg::InverseFrequency => ModelWeights::inverse_frequency(training),
        },
        norm_p: norm,
    }
}

struct QuantifyArgs {
    train: PathBuf,
    target: PathBuf,
    model: ModelArg,
    p: f64,
    k: usize,
    delta: f64,
    xi: f64,
    norm: f64,
    combiner: CombinerArg,
    weights: WeightsArg,
    trials: usize,
    slack: f64,
    out: PathBuf,
    seed: u64,
    jobs: usize,
}

fn cmd_quantify(args: QuantifyArgs) -> CliResult<()> {
    let training: Dataset<f64> = read_archive(&args.train)?;
    let target: Dataset<f64> = read_archive(&args.target)?;
    let cfg = distance_config(args.combiner, args.norm, args.weights, &training);

    let report = match args.model {
        ModelArg::Binary => {
            let params =
                BinaryParams::new(args.p, training.space().len(), args.k, args.delta)?;
            theorem1_check(&training.binary_view(), &target.binary_view(), &params)?
        }
        ModelArg::Distance => {
            let stats = SampledStats {
                p: args.p,
                trials: args.trials,
                base_seed: args.seed,
                cfg: cfg.clone(),
            };
            theorem2_check(&training, &target, args.k, args.delta, &stats)?
        }
        ModelArg::Distribution => theorem3_check(
            &training,
            &target,
            args.k,
            args.delta,
            &cfg,
            args.xi,
            &TripleOptions {
                sampling: None,
                slack: args.slack,
            },
        )?,
    };

    std::fs::create_dir_all(&args.out)
        .map_err(|e| CliError::Io(format!("{}: {e}", args.out.display())))?;
    let mut csv_bytes = Vec::new();
    report.write_csv(&mut csv_bytes)?;
    write_atomic(&args.out.join("verdicts.csv"), &csv_bytes)?;

    let mut summary = report.summary_json();
    summary["p"] = args.p.into();
    summary["xi"] = args.xi.into();
    let mut text = serde_json::to_string_pretty(&summary)
        .map_err(|e| CliError::Config(format!("summary: {e}")))?;
    text.push('\n');
    write_atomic(&args.out.join("summary.json"), text.as_bytes())?;

    let mut manifest = Manifest::new("quantify", args.seed);
    manifest.set("model", model_name(args.model));
    manifest.set("p", args.p);
    manifest.set("k", args.k);
    manifest.set("delta", args.delta);
    manifest.set("xi", args.xi);
    manifest.set("norm", args.norm);
    manifest.set("combiner", combiner_name(args.combiner));
    manifest.set("weights", weights_name(args.weights));
    manifest.set("trials", args.trials);
    manifest.set("slack", args.slack);
    manifest.set("jobs", args.jobs);
    manifest.add_input(&args.train)?;
    manifest.add_input(&args.target)?;
    manifest.write(&args.out.join("manifest.json"))?;

    println!(
        "{}: {} of {} overlap users pass (required {}): {}",
        model_name(args.model),
        report.passed,
        report.m_tilde,
        report.required,
        if report.inferable {
            "inferable"
        } else {
            "not inferable"
        }
    );
    Ok(())
}

fn model_name(model: ModelArg) -> &'static str {
    match model {
        ModelArg::Binary => "binary",
        ModelArg::Distance => "distance",
        ModelArg::Distribution => "distribution",
    }
}

fn combiner_name(c: CombinerArg) -> &'static str {
    match c {
        CombinerArg::Product => "product",
        CombinerArg::Raw => "raw",
        CombinerArg::LogProduct => "log-product",
    }
}

fn weights_name(w: WeightsArg) -> &'static str {
    match w {
        WeightsArg::Unit => "unit",
        WeightsArg::InverseFrequency => "inverse-frequency",
    }
}

struct SweepArgs {
    data: PathBuf,
    config: Option<PathBuf>,
    model: Option<ModelArg>,
    p: Option<String>,
    k: Option<String>,
    reps: Option<usize>,
    combiner: Option<CombinerArg>,
    norm: Option<f64>,
    weights: Option<WeightsArg>,
    out: PathBuf,
    seed: u64,
    jobs: usize,
}

fn parse_p_grid(text: &str) -> CliResult<Vec<f64>> {
    text.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Config(format!("bad p value {tok:?}")))
        })
        .collect()
}

fn parse_k_grid(text: &str) -> CliResult<Vec<KSpec<f64>>> {
    text.split(',')
        .map(|tok| {
            let tok = tok.trim();
            let (body, forced_fraction) = match tok.strip_suffix('n') {
                Some(body) => (body, true),
                None => (tok, false),
            };
            if !forced_fraction {
                if let Ok(count) = body.parse::<usize>() {
                    return Ok(KSpec::Count(count));
                }
            }
            body.parse::<f64>()
                .map(KSpec::Fraction)
                .map_err(|_| CliError::Config(format!("bad K value {tok:?}")))
        })
        .collect()
}

fn cmd_sweep(args: SweepArgs) -> CliResult<()> {
    let file_config: BTreeMap<String, String> = match &args.config {
        Some(path) => crate::kv::load(path)?,
        None => BTreeMap::new(),
    };
    // flags win over file values
    let from_file = |key: &str| file_config.get(key).cloned();
    let p_text = args
        .p
        .or_else(|| from_file("p"))
        .ok_or_else(|| CliError::Config("missing p grid (flag --p or config key p)".into()))?;
    let k_text = args
        .k
        .or_else(|| from_file("k"))
        .ok_or_else(|| CliError::Config("missing K grid (flag --k or config key k)".into()))?;
    let model_text = args
        .model
        .map(|m| model_name(m).to_string())
        .or_else(|| from_file("model"))
        .unwrap_or_else(|| "distance".to_string());
    let reps = match args.reps {
        Some(r) => r,
        None => match from_file("reps") {
            Some(text) => text
                .parse()
                .map_err(|_| CliError::Config(format!("bad reps value {text:?}")))?,
            None => 10,
        },
    };
    let seed = match from_file("seed") {
        // an explicit config-file seed wins so manifest reruns reproduce
        Some(text) => text
            .parse()
            .map_err(|_| CliError::Config(format!("bad seed value {text:?}")))?,
        None => args.seed,
    };
    let combiner = match args.combiner {
        Some(c) => combiner_name(c).to_string(),
        None => from_file("combiner").unwrap_or_else(|| "product".into()),
    };
    let norm = match args.norm {
        Some(n) => n,
        None => match from_file("norm") {
            Some(text) => text
                .parse()
                .map_err(|_| CliError::Config(format!("bad norm value {text:?}")))?,
            None => 2.0,
        },
    };
    let weights = match args.weights {
        Some(w) => weights_name(w).to_string(),
        None => from_file("weights").unwrap_or_else(|| "unit".into()),
    };

    let raw: Dataset<f64> = read_archive(&args.data)?;
    let combiner_val: Combiner = combiner.parse()?;
    let weights_val = match weights.as_str() {
        "unit" => ModelWeights::Unit,
        "inverse-frequency" => ModelWeights::inverse_frequency(&raw),
        other => return Err(CliError::Config(format!("unknown weights {other:?}"))),
    };
    let cfg = DistanceConfig {
        combiner: combiner_val,
        weights: weights_val,
        norm_p: norm,
    };
    let model = match model_text.as_str() {
        "binary" => ModelSpec::Binary,
        "distance" => ModelSpec::Distance(cfg),
        "distribution" => ModelSpec::Distribution(cfg),
        other => return Err(CliError::Config(format!("unknown model {other:?}"))),
    };

    let sweep_config = SweepConfig {
        p_grid: parse_p_grid(&p_text)?,
        k_grid: parse_k_grid(&k_text)?,
        model,
        reps,
        seed,
    };
    let result = sweep(&raw, &sweep_config)?;

    std::fs::create_dir_all(&args.out)
        .map_err(|e| CliError::Io(format!("{}: {e}", args.out.display())))?;
    let mut csv_bytes = Vec::new();
    result.write_csv(&mut csv_bytes)?;
    write_atomic(&args.out.join("sweep.csv"), &csv_bytes)?;

    let mut manifest = Manifest::new("sweep", seed);
    manifest.set("p", p_text);
    manifest.set("k", k_text);
    manifest.set("model", model_text);
    manifest.set("reps", reps);
    manifest.set("seed", seed);
    manifest.set("combiner", combiner);
    manifest.set("norm", norm);
    manifest.set("weights", weights);
    manifest.set("jobs", args.jobs);
    manifest.add_input(&args.data)?;
    manifest.write(&args.out.join("manifest.json"))?;

    println!(
        "swept {} cells x {} reps -> {}",
        result.cells.len(),
        reps,
        args.out.display()
    );
    Ok(())
}

struct DetectArgs {
    train: PathBuf,
    target: PathBuf,
    mode: ModeArg,
    xi: f64,
    p: f64,
    trials: usize,
    combiner: CombinerArg,
    norm: f64,
    weights: WeightsArg,
    out: PathBuf,
    seed: u64,
}

fn cmd_detect(args: DetectArgs) -> CliResult<()> {
    let training: Dataset<f64> = read_archive(&args.train)?;
    let target: Dataset<f64> = read_archive(&args.target)?;
    let cfg = distance_config(args.combiner, args.norm, args.weights, &training);
    let mode = match args.mode {
        ModeArg::Distance => DetectionMode::Distance,
        ModeArg::Distribution => DetectionMode::Distribution,
    };
    let thresholds = estimate_thresholds(&training, args.p, args.trials, args.seed, &cfg)?
        .with_mode(mode)
        .with_xi(args.xi)?;
    let verdicts = detect_all(&target, &training, &thresholds, &cfg)?;

    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(["user", "mode", "statistic", "threshold", "verdict", "confidence"])
        .map_err(|e| CliError::Config(format!("csv: {e}")))?;
    let mut new_users = 0usize;
    let mut not_assessable = 0usize;
    for (user, verdict) in &verdicts {
        let record = match verdict {
            Ok(v) => {
                if v.is_new {
                    new_users += 1;
                }
                vec![
                    user.clone(),
                    mode.as_str().to_string(),
                    v.statistic.to_string(),
                    v.threshold.to_string(),
                    if v.is_new { "new" } else { "known" }.to_string(),
                    if v.low_confidence {
                        "low-confidence"
                    } else {
                        "ok"
                    }
                    .to_string(),
                ]
            }
            Err(_) => {
                not_assessable += 1;
                vec![
                    user.clone(),
                    mode.as_str().to_string(),
                    String::new(),
                    String::new(),
                    "not-assessable".to_string(),
                    "low-confidence".to_string(),
                ]
            }
        };
        wtr.write_record(&record)
            .map_err(|e| CliError::Config(format!("csv: {e}")))?;
    }
    let bytes = wtr
        .into_inner()
        .map_err(|e| CliError::Config(format!("csv: {e}")))?;
    std::fs::create_dir_all(&args.out)
        .map_err(|e| CliError::Io(format!("{}: {e}", args.out.display())))?;
    write_atomic(&args.out.join("detections.csv"), &bytes)?;

    let summary = serde_json::json!({
        "mode": mode.as_str(),
        "xi": args.xi,
        "mu_star_d": thresholds.mu_star_d,
        "mu_star_s": thresholds.mu_star_s,
        "samples": thresholds.samples,
        "targets": verdicts.len(),
        "new_users": new_users,
        "not_assessable": not_assessable,
    });
    let mut text = serde_json::to_string_pretty(&summary)
        .map_err(|e| CliError::Config(format!("summary: {e}")))?;
    text.push('\n');
    write_atomic(&args.out.join("summary.json"), text.as_bytes())?;

    let mut manifest = Manifest::new("detect", args.seed);
    manifest.set("mode", mode.as_str());
    manifest.set("xi", args.xi);
    manifest.set("p", args.p);
    manifest.set("trials", args.trials);
    manifest.set("combiner", combiner_name(args.combiner));
    manifest.set("norm", args.norm);
    manifest.set("weights", weights_name(args.weights));
    manifest.add_input(&args.train)?;
    manifest.add_input(&args.target)?;
    manifest.write(&args.out.join("manifest.json"))?;

    println!(
        "classified {} target users: {} new, {} not assessable -> {}",
        verdicts.len(),
        new_users,
        not_assessable,
        args.out.display()
    );
    Ok(())
}
