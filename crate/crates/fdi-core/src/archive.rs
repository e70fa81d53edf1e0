//! The on-disk dataset archive: a directory with a feature table, a user
//! roster, sorted profile rows and a small metadata file. Writing the same
//! dataset twice produces byte-identical files.
//!
//! Layout:
//!   features.tsv  one feature id per line, in index order
//!   users.tsv     one user id per line, sorted (keeps empty profiles)
//!   profiles.tsv  user<TAB>feature_index<TAB>weight, users then indices sorted
//!   meta.json     role and counts
//!
//! Identifiers are escaped (`\\`, `\t`, `\n`) so arbitrary strings survive
//! the round trip.

use std::fs;
use std::io::{BufRead, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use crate::dataset::{Dataset, FeatureSpace, Role, SparseProfile};
use crate::error::{Error, Result};
use crate::ingest::open_maybe_gzip;
use crate::num::Real;

pub const FORMAT_VERSION: u32 = 1;

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out
}

fn unescape(s: &str) -> Result<String> {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            other => {
                return Err(Error::Config(format!(
                    "bad escape sequence \\{}",
                    other.map_or_else(String::new, |c| c.to_string())
                )))
            }
        }
    }
    Ok(out)
}

fn write_atomic(path: &Path, content: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp~");
    let path_str = path.display().to_string();
    {
        let mut file = BufWriter::new(
            fs::File::create(&tmp).map_err(|e| Error::io(tmp.display().to_string(), e))?,
        );
        file.write_all(content)
            .map_err(|e| Error::io(&path_str, e))?;
        file.flush().map_err(|e| Error::io(&path_str, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(&path_str, e))?;
    Ok(())
}

/// Writes a dataset archive into `dir`, creating it if needed.
pub fn write_archive<W: Real>(dataset: &Dataset<W>, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;

    let mut features = String::new();
    for id in dataset.space().ids() {
        features.push_str(&escape(id));
        features.push('\n');
    }
    write_atomic(&dir.join("features.tsv"), features.as_bytes())?;

    let mut users = String::new();
    let mut profiles = String::new();
    for profile in dataset.profiles() {
        let user = escape(profile.user());
        users.push_str(&user);
        users.push('\n');
        for &(idx, w) in profile.entries() {
            profiles.push_str(&format!("{user}\t{idx}\t{w}\n"));
        }
    }
    write_atomic(&dir.join("users.tsv"), users.as_bytes())?;
    write_atomic(&dir.join("profiles.tsv"), profiles.as_bytes())?;

    let meta = serde_json::json!({
        "format_version": FORMAT_VERSION,
        "role": dataset.role().as_str(),
        "n_users": dataset.len(),
        "n_features": dataset.space().len(),
        "relationships": dataset.relationship_count(),
    });
    let mut meta_text = serde_json::to_string_pretty(&meta)
        .map_err(|e| Error::Config(format!("meta serialization failed: {e}")))?;
    meta_text.push('\n');
    write_atomic(&dir.join("meta.json"), meta_text.as_bytes())?;
    Ok(())
}

/// Reads a dataset archive written by [`write_archive`].
pub fn read_archive<W: Real>(dir: &Path) -> Result<Dataset<W>> {
    let meta_path = dir.join("meta.json");
    let meta_text = fs::read_to_string(&meta_path)
        .map_err(|e| Error::io(meta_path.display().to_string(), e))?;
    let meta: serde_json::Value = serde_json::from_str(&meta_text)
        .map_err(|e| Error::Config(format!("bad meta.json: {e}")))?;
    let role: Role = meta["role"]
        .as_str()
        .ok_or_else(|| Error::Config("meta.json missing role".into()))?
        .parse()?;

    let mut ids = Vec::new();
    for line in open_maybe_gzip(&dir.join("features.tsv"))?.lines() {
        let line = line.map_err(|e| Error::io("features.tsv", e))?;
        ids.push(unescape(&line)?);
    }
    let space = Arc::new(FeatureSpace::from_ids(ids)?);

    let mut entries_by_user: std::collections::BTreeMap<String, Vec<(u32, W)>> =
        std::collections::BTreeMap::new();
    for line in open_maybe_gzip(&dir.join("users.tsv"))?.lines() {
        let line = line.map_err(|e| Error::io("users.tsv", e))?;
        entries_by_user.insert(unescape(&line)?, Vec::new());
    }
    let profiles_path = dir.join("profiles.tsv");
    for (i, line) in open_maybe_gzip(&profiles_path)?.lines().enumerate() {
        let line = line.map_err(|e| Error::io("profiles.tsv", e))?;
        if line.is_empty() {
            continue;
        }
        let parse = || -> Option<(String, u32, f64)> {
            let mut parts = line.split('\t');
            let user = parts.next()?;
            let idx = parts.next()?.parse().ok()?;
            let weight = parts.next()?.parse().ok()?;
            if parts.next().is_some() {
                return None;
            }
            Some((user.to_string(), idx, weight))
        };
        let (user, idx, weight) = parse().ok_or_else(|| Error::Parse {
            path: profiles_path.display().to_string(),
            count: 1,
            first_line: i + 1,
            first_reason: "expected user<TAB>index<TAB>weight".into(),
        })?;
        let user = unescape(&user)?;
        entries_by_user
            .get_mut(&user)
            .ok_or_else(|| Error::Config(format!("profile row for unknown user {user:?}")))?
            .push((idx, W::of(weight)));
    }
    let profiles = entries_by_user
        .into_iter()
        .map(|(user, entries)| SparseProfile::new(user, entries))
        .collect::<Result<Vec<_>>>()?;
    Dataset::from_profiles(space, profiles, role)
}
