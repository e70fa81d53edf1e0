//! Parsers that turn external data into edge lists: generic TSV, SNAP
//! ego-network feature files, HTTP request logs, plus a synthetic generator
//! with planted structure. All file parsers accept gzip-compressed input
//! (detected from the magic bytes, not the extension).

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use rand::Rng;

use crate::binary::gamma_xor;
use crate::dataset::{Dataset, Edge, Role, SparseProfile};
use crate::error::{Error, Result};
use crate::num::Real;
use crate::rng::{mix, rng_from};

/// A line the parser could not use, with the reason.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MalformedLine {
    pub line: usize,
    pub reason: String,
}

/// Edges plus the lines that failed to parse.
#[derive(Debug, Clone)]
pub struct ParseOutcome<W> {
    pub edges: Vec<Edge<W>>,
    pub malformed: Vec<MalformedLine>,
}

impl<W> ParseOutcome<W> {
    /// Escalates malformed lines into a hard error (the `--strict` path).
    pub fn strict(self, path: &str) -> Result<Vec<Edge<W>>> {
        match self.malformed.first() {
            None => Ok(self.edges),
            Some(first) => Err(Error::Parse {
                path: path.to_string(),
                count: self.malformed.len(),
                first_line: first.line,
                first_reason: first.reason.clone(),
            }),
        }
    }
}

/// Opens a file, transparently decompressing gzip input.
pub fn open_maybe_gzip(path: &Path) -> Result<Box<dyn BufRead + Send>> {
    let path_str = path.display().to_string();
    let file = File::open(path).map_err(|e| Error::io(&path_str, e))?;
    let mut reader = BufReader::new(file);
    let magic = reader
        .fill_buf()
        .map_err(|e| Error::io(&path_str, e))?
        .get(..2)
        .map(|b| [b[0], b[1]]);
    if magic == Some([0x1f, 0x8b]) {
        Ok(Box::new(BufReader::new(flate2::bufread::GzDecoder::new(
            reader,
        ))))
    } else {
        Ok(Box::new(reader))
    }
}

/// Parses `user<TAB>feature[<TAB>weight]` lines; the weight defaults to 1.
/// Blank lines are skipped; anything else malformed is reported with its
/// line number.
pub fn parse_tsv<W: Real>(path: &Path) -> Result<ParseOutcome<W>> {
    parse_tsv_reader(open_maybe_gzip(path)?)
}

pub fn parse_tsv_reader<W: Real, R: BufRead>(reader: R) -> Result<ParseOutcome<W>> {
    let mut edges = Vec::new();
    let mut malformed = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io("<input>", e))?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let mut bad = |reason: &str| {
            malformed.push(MalformedLine {
                line: line_no,
                reason: reason.to_string(),
            })
        };
        match fields.as_slice() {
            [user, feature] | [user, feature, _] if user.is_empty() || feature.is_empty() => {
                bad("empty user or feature field")
            }
            [user, feature] => edges.push(Edge::new(*user, *feature, W::one())),
            [user, feature, weight] => match weight.parse::<f64>() {
                Ok(w) if w.is_finite() && w >= 0.0 => {
                    edges.push(Edge::new(*user, *feature, W::of(w)))
                }
                Ok(_) => bad("weight must be finite and non-negative"),
                Err(_) => bad("unparseable weight"),
            },
            _ => bad("expected 2 or 3 tab-separated fields"),
        }
    }
    Ok(ParseOutcome { edges, malformed })
}

/// Parses SNAP ego-network feature files.
///
/// Inputs may be `.feat` files (optionally gzipped) or directories, which
/// are scanned for `*.feat`/`*.feat.gz` in name order. For an ego file
/// `X.feat`, feature names come from `X.featnames` when present (the text
/// after the leading column index), otherwise they are synthesized as
/// `X:col`. A sibling `X.egofeat` holds the ego's own feature row without a
/// node id. One weight-1 edge is emitted per 1-bit; duplicate
/// (node, feature-name) pairs across egos collapse to a single edge.
pub fn parse_snap_ego<W: Real>(inputs: &[PathBuf]) -> Result<Vec<Edge<W>>> {
    let mut feat_files = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let mut found = Vec::new();
            let entries = std::fs::read_dir(input)
                .map_err(|e| Error::io(input.display().to_string(), e))?;
            for entry in entries {
                let path = entry
                    .map_err(|e| Error::io(input.display().to_string(), e))?
                    .path();
                let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
                if name.ends_with(".feat") || name.ends_with(".feat.gz") {
                    found.push(path);
                }
            }
            found.sort();
            feat_files.extend(found);
        } else {
            feat_files.push(input.clone());
        }
    }
    if feat_files.is_empty() {
        return Err(Error::Config("no .feat files found".into()));
    }

    let mut edges = Vec::new();
    let mut seen: HashSet<(String, String)> = HashSet::new();
    for feat_path in &feat_files {
        parse_one_ego(feat_path, &mut edges, &mut seen)?;
    }
    Ok(edges)
}

fn ego_stem(path: &Path) -> String {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
    name.trim_end_matches(".gz")
        .trim_end_matches(".feat")
        .to_string()
}

fn sibling(path: &Path, stem: &str, suffix: &str) -> Option<PathBuf> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    for candidate in [
        dir.join(format!("{stem}.{suffix}")),
        dir.join(format!("{stem}.{suffix}.gz")),
    ] {
        if candidate.is_file() {
            return Some(candidate);
        }
    }
    None
}

fn parse_one_ego<W: Real>(
    feat_path: &Path,
    edges: &mut Vec<Edge<W>>,
    seen: &mut HashSet<(String, String)>,
) -> Result<()> {
    let path_str = feat_path.display().to_string();
    let stem = ego_stem(feat_path);

    // feature names: "<idx> <name...>" per line, or synthesized
    let names: Option<Vec<String>> = match sibling(feat_path, &stem, "featnames") {
        Some(names_path) => {
            let mut names = Vec::new();
            for (i, line) in open_maybe_gzip(&names_path)?.lines().enumerate() {
                let line = line.map_err(|e| Error::io(names_path.display().to_string(), e))?;
                if line.is_empty() {
                    continue;
                }
                let name = match line.split_once(' ') {
                    Some((_, rest)) => rest.to_string(),
                    None => {
                        return Err(Error::Parse {
                            path: names_path.display().to_string(),
                            count: 1,
                            first_line: i + 1,
                            first_reason: "expected \"<index> <name>\"".into(),
                        })
                    }
                };
                names.push(name);
            }
            Some(names)
        }
        None => None,
    };

    let mut width: Option<usize> = names.as_ref().map(|n| n.len());
    let mut emit = |node: &str, bits: &[&str], line_no: usize, path: &str| -> Result<()> {
        match width {
            Some(w) if bits.len() != w => {
                return Err(Error::Parse {
                    path: path.to_string(),
                    count: 1,
                    first_line: line_no,
                    first_reason: format!("row width {} does not match {}", bits.len(), w),
                })
            }
            None => width = Some(bits.len()),
            _ => {}
        }
        for (col, bit) in bits.iter().enumerate() {
            let set = match *bit {
                "0" => false,
                "1" => true,
                other => {
                    return Err(Error::Parse {
                        path: path.to_string(),
                        count: 1,
                        first_line: line_no,
                        first_reason: format!("expected a 0/1 feature bit, got {other:?}"),
                    })
                }
            };
            if !set {
                continue;
            }
            let name = match &names {
                Some(names) => names[col].clone(),
                None => format!("{stem}:{col}"),
            };
            if seen.insert((node.to_string(), name.clone())) {
                edges.push(Edge::new(node, name, W::one()));
            }
        }
        Ok(())
    };

    for (i, line) in open_maybe_gzip(feat_path)?.lines().enumerate() {
        let line = line.map_err(|e| Error::io(&path_str, e))?;
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split_ascii_whitespace();
        let node = fields.next().ok_or_else(|| Error::Parse {
            path: path_str.clone(),
            count: 1,
            first_line: i + 1,
            first_reason: "empty row".into(),
        })?;
        let bits: Vec<&str> = fields.collect();
        emit(node, &bits, i + 1, &path_str)?;
    }

    // the ego's own features, if recorded
    if let Some(ego_path) = sibling(feat_path, &stem, "egofeat") {
        let ego_str = ego_path.display().to_string();
        for (i, line) in open_maybe_gzip(&ego_path)?.lines().enumerate() {
            let line = line.map_err(|e| Error::io(&ego_str, e))?;
            if line.is_empty() {
                continue;
            }
            let bits: Vec<&str> = line.split_ascii_whitespace().collect();
            emit(&stem, &bits, i + 1, &ego_str)?;
        }
    }
    Ok(())
}

/// Result of HTTP feature extraction.
#[derive(Debug, Clone)]
pub struct HttpExtract<W> {
    pub edges: Vec<Edge<W>>,
    /// Records whose URL had no recognisable host.
    pub skipped: usize,
}

const PATH_DELIMITERS: [char; 4] = ['/', '?', '=', '&'];

/// Extracts one domain feature (`D:<host>`) and a bag of path tokens
/// (`P:<token>`) per request; weights count occurrences across the log.
/// Tokens are produced by splitting the path and query on `/`, `?`, `=` and
/// `&`, verbatim (no case folding or percent-decoding).
pub fn extract_http_features<W: Real>(log: &[(String, String)]) -> HttpExtract<W> {
    let mut counts: IndexMap<(String, String), u64> = IndexMap::new();
    let mut skipped = 0usize;
    for (user, url) in log {
        let url = url.trim();
        let rest = match url.find("://") {
            Some(pos) => &url[pos + 3..],
            None => url,
        };
        let split_at = rest.find(PATH_DELIMITERS).unwrap_or(rest.len());
        let (host, tail) = rest.split_at(split_at);
        if host.is_empty() {
            skipped += 1;
            continue;
        }
        *counts
            .entry((user.clone(), format!("D:{host}")))
            .or_insert(0) += 1;
        for token in tail.split(PATH_DELIMITERS) {
            if token.is_empty() {
                continue;
            }
            *counts
                .entry((user.clone(), format!("P:{token}")))
                .or_insert(0) += 1;
        }
    }
    let edges = counts
        .into_iter()
        .map(|((user, feature), count)| Edge::new(user, feature, W::of(count as f64)))
        .collect();
    HttpExtract { edges, skipped }
}

/// Parses a `user<TAB>url` log file and extracts HTTP features.
pub fn parse_http_log<W: Real>(path: &Path) -> Result<(HttpExtract<W>, Vec<MalformedLine>)> {
    let mut log = Vec::new();
    let mut malformed = Vec::new();
    for (i, line) in open_maybe_gzip(path)?.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path.display().to_string(), e))?;
        if line.is_empty() {
            continue;
        }
        match line.split_once('\t') {
            Some((user, url)) if !user.is_empty() && !url.is_empty() => {
                log.push((user.to_string(), url.to_string()));
            }
            _ => malformed.push(MalformedLine {
                line: i + 1,
                reason: "expected \"user<TAB>url\"".into(),
            }),
        }
    }
    Ok((extract_http_features(&log), malformed))
}

/// Description of a synthetic binary dataset.
#[derive(Debug, Clone, Copy)]
pub struct SynthSpec<W> {
    pub n_users: usize,
    pub n_features: usize,
    /// Per-(user, feature) inclusion probability.
    pub p_feature: W,
    /// Optional minimum pairwise XOR distance, enforced by resampling.
    pub gamma_separation: Option<usize>,
    pub seed: u64,
}

/// Resampling attempts before [`synth_generate`] gives up on a separation.
pub const SYNTH_MAX_ATTEMPTS: usize = 10_000;

/// Generates a binary dataset with i.i.d. Bernoulli(p) relationships,
/// deterministically from the seed. With a separation target the whole
/// dataset is resampled until every user pair is at least that far apart.
pub fn synth_generate<W: Real>(spec: &SynthSpec<W>) -> Result<Dataset<W>> {
    let pf = spec.p_feature.as_f64();
    if !(pf > 0.0 && pf < 1.0) {
        return Err(Error::Config(format!(
            "p_feature must lie in (0, 1), got {pf}"
        )));
    }
    if spec.n_users == 0 || spec.n_features == 0 {
        return Err(Error::Config("n_users and n_features must be >= 1".into()));
    }
    if let Some(gamma) = spec.gamma_separation {
        if gamma > spec.n_features {
            return Err(Error::Config(
                "gamma_separation cannot exceed n_features".into(),
            ));
        }
    }
    let user_width = digits(spec.n_users - 1);
    let feat_width = digits(spec.n_features - 1);
    let space = std::sync::Arc::new(crate::dataset::FeatureSpace::from_ids(
        (0..spec.n_features)
            .map(|f| format!("f{f:0feat_width$}"))
            .collect(),
    )?);

    for attempt in 0..SYNTH_MAX_ATTEMPTS {
        let mut rng = rng_from(mix(spec.seed, attempt as u64));
        let mut profiles = Vec::with_capacity(spec.n_users);
        for u in 0..spec.n_users {
            let entries = (0..spec.n_features)
                .filter(|_| rng.gen_bool(pf))
                .map(|f| (f as u32, W::one()))
                .collect();
            profiles.push(SparseProfile::new(format!("u{u:0user_width$}"), entries)?);
        }
        let ds = Dataset::from_profiles(std::sync::Arc::clone(&space), profiles, Role::Training)?;
        match spec.gamma_separation {
            None => return Ok(ds),
            Some(gamma) => {
                if separation_met(&ds, gamma as u64)? {
                    return Ok(ds);
                }
            }
        }
    }
    Err(Error::InfeasibleSeparation {
        attempts: SYNTH_MAX_ATTEMPTS,
    })
}

fn separation_met<W: Real>(ds: &Dataset<W>, gamma: u64) -> Result<bool> {
    let profiles = ds.profiles();
    for i in 0..profiles.len() {
        for j in (i + 1)..profiles.len() {
            if gamma_xor(&profiles[i], &profiles[j])? < gamma {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

fn digits(x: usize) -> usize {
    if x == 0 {
        1
    } else {
        (x as f64).log10() as usize + 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::build_dataset;
    use std::io::Write;

    #[test]
    fn tsv_basic_lines() {
        let input = "bob\twww.google.com\t100\na\tx\n\na\n";
        let out: ParseOutcome<f64> = parse_tsv_reader(input.as_bytes()).unwrap();
        assert_eq!(out.edges.len(), 2);
        assert_eq!(out.edges[0], Edge::new("bob", "www.google.com", 100.0));
        assert_eq!(out.edges[1], Edge::new("a", "x", 1.0));
        assert_eq!(out.malformed.len(), 1);
        assert_eq!(out.malformed[0].line, 4);
    }

    #[test]
    fn tsv_strict_escalates() {
        let out: ParseOutcome<f64> = parse_tsv_reader("a\n".as_bytes()).unwrap();
        assert!(matches!(out.strict("x.tsv"), Err(Error::Parse { .. })));
    }

    #[test]
    fn tsv_rejects_bad_weights() {
        let out: ParseOutcome<f64> =
            parse_tsv_reader("a\tx\tnope\nb\ty\t-1\nc\tz\tinf\n".as_bytes()).unwrap();
        assert!(out.edges.is_empty());
        assert_eq!(out.malformed.len(), 3);
    }

    #[test]
    fn gzip_detection_by_magic_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("edges.tsv"); // no .gz extension on purpose
        let file = File::create(&path).unwrap();
        let mut enc = flate2::write::GzEncoder::new(file, flate2::Compression::default());
        enc.write_all(b"a\tx\t2\n").unwrap();
        enc.finish().unwrap();
        let out: ParseOutcome<f64> = parse_tsv(&path).unwrap();
        assert_eq!(out.edges, vec![Edge::new("a", "x", 2.0)]);
    }

    fn write_file(dir: &Path, name: &str, content: &str) -> PathBuf {
        let path = dir.join(name);
        std::fs::write(&path, content).unwrap();
        path
    }

    #[test]
    fn snap_row_with_names() {
        let dir = tempfile::tempdir().unwrap();
        write_file(dir.path(), "9.featnames", "0 f0\n1 f1\n2 f2\n");
        let feat = write_file(dir.path(), "9.feat", "7 0 1 1\n");
        let edges: Vec<Edge<f64>> = parse_snap_ego(&[feat]).unwrap();
        assert_eq!(
            edges,
            vec![Edge::new("7", "f1", 1.0), Edge::new("7", "f2", 1.0)]
        );
    }

    #[test]
    fn snap_width_mismatch_errors() {
        let dir = tempfile::tempdir().unwrap();
        write_file(dir.path(), "9.featnames", "0 f0\n1 f1\n");
        let feat = write_file(dir.path(), "9.feat", "7 0 1 1\n");
        assert!(matches!(
            parse_snap_ego::<f64>(&[feat]),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn snap_egofeat_and_cross_ego_dedup() {
        let dir = tempfile::tempdir().unwrap();
        write_file(dir.path(), "1.featnames", "0 shared\n1 own\n");
        write_file(dir.path(), "1.feat", "5 1 0\n");
        write_file(dir.path(), "1.egofeat", "1 1\n");
        write_file(dir.path(), "2.featnames", "0 shared\n");
        write_file(dir.path(), "2.feat", "5 1\n"); // duplicate (5, shared)
        let edges: Vec<Edge<f64>> = parse_snap_ego(&[dir.path().to_path_buf()]).unwrap();
        assert_eq!(
            edges,
            vec![
                Edge::new("5", "shared", 1.0),
                Edge::new("1", "shared", 1.0),
                Edge::new("1", "own", 1.0),
            ]
        );
        // weight-1 edges only: a binary view is a no-op
        let ds = build_dataset(edges, Role::Training).unwrap();
        assert_eq!(ds.binary_view(), ds);
    }

    #[test]
    fn snap_synthesized_names_without_featnames() {
        let dir = tempfile::tempdir().unwrap();
        let feat = write_file(dir.path(), "3.feat", "8 0 1\n");
        let edges: Vec<Edge<f64>> = parse_snap_ego(&[feat]).unwrap();
        assert_eq!(edges, vec![Edge::new("8", "3:1", 1.0)]);
    }

    #[test]
    fn http_example_request() {
        let log = vec![(
            "u".to_string(),
            "www.google.com/search?q=ndss+2016&ie=utf-8&oe=utf-8".to_string(),
        )];
        let out: HttpExtract<f64> = extract_http_features(&log);
        let find = |name: &str| {
            out.edges
                .iter()
                .find(|e| e.feature == name)
                .map(|e| e.weight)
        };
        assert_eq!(find("D:www.google.com"), Some(1.0));
        assert_eq!(find("P:search"), Some(1.0));
        assert_eq!(find("P:q"), Some(1.0));
        assert_eq!(find("P:ndss+2016"), Some(1.0));
        assert_eq!(find("P:ie"), Some(1.0));
        assert_eq!(find("P:utf-8"), Some(2.0));
        assert_eq!(find("P:oe"), Some(1.0));
        assert_eq!(out.edges.len(), 7);
        assert_eq!(out.skipped, 0);
    }

    #[test]
    fn http_bare_host_and_scheme() {
        let log = vec![
            ("u".to_string(), "host.com/".to_string()),
            ("u".to_string(), "https://host.com".to_string()),
            ("u".to_string(), "/pathonly".to_string()),
        ];
        let out: HttpExtract<f64> = extract_http_features(&log);
        assert_eq!(out.edges.len(), 1);
        assert_eq!(out.edges[0], Edge::new("u", "D:host.com", 2.0));
        assert_eq!(out.skipped, 1);
    }

    #[test]
    fn http_repeat_visits_accumulate() {
        let log: Vec<(String, String)> = (0..100)
            .map(|_| ("u".to_string(), "site.org/a".to_string()))
            .collect();
        let out: HttpExtract<f64> = extract_http_features(&log);
        assert!(out
            .edges
            .iter()
            .all(|e| e.weight == 100.0));
    }

    #[test]
    fn http_token_weight_matches_token_count() {
        let url = "x.com/a/b/c?d=e";
        let out: HttpExtract<f64> =
            extract_http_features(&[("u".to_string(), url.to_string())]);
        let token_weight: f64 = out
            .edges
            .iter()
            .filter(|e| e.feature.starts_with("P:"))
            .map(|e| e.weight)
            .sum();
        assert_eq!(token_weight, 5.0); // a, b, c, d, e
    }

    #[test]
    fn synth_is_deterministic() {
        let spec = SynthSpec {
            n_users: 4,
            n_features: 16,
            p_feature: 0.5f64,
            gamma_separation: None,
            seed: 99,
        };
        let a = synth_generate(&spec).unwrap();
        let b = synth_generate(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 4);
        assert_eq!(a.space().len(), 16);
    }

    #[test]
    fn synth_full_separation_forces_complements() {
        let spec = SynthSpec {
            n_users: 2,
            n_features: 4,
            p_feature: 0.5f64,
            gamma_separation: Some(4),
            seed: 5,
        };
        let ds = synth_generate(&spec).unwrap();
        let a = &ds.profiles()[0];
        let b = &ds.profiles()[1];
        assert_eq!(gamma_xor(a, b).unwrap(), 4);
        assert_eq!(a.len() + b.len(), 4);
    }

    #[test]
    fn synth_rejects_bad_spec() {
        let spec = SynthSpec {
            n_users: 2,
            n_features: 4,
            p_feature: 1.0f64,
            gamma_separation: None,
            seed: 0,
        };
        assert!(synth_generate(&spec).is_err());
        let spec = SynthSpec {
            n_users: 2,
            n_features: 4,
            p_feature: 0.5f64,
            gamma_separation: Some(5),
            seed: 0,
        };
        assert!(synth_generate(&spec).is_err());
    }
}
