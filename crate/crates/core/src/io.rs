//! On-disk formats.
//!
//! - Embeddings: `AASE` magic, `u32` n, `u32` d (little-endian), then n·d
//!   little-endian `f32` values row-major. The sidecar manifest lives at
//!   `<path>.json` and holds `ids`, `image_uris` and `identities`.
//! - Constraints: JSON Lines `{"a","b","relation","source","cycle"}` keyed by
//!   sample id; `source` defaults to `seed` and `cycle` to 0.
//! - Partitions: CSV with header `id,cluster,outlier`.
//!
//! Every writer goes through [`write_atomic`], so a failed run never leaves a
//! half-written output behind.

use std::collections::HashSet;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::model::{
    Constraint, ConstraintSource, EmbeddingSet, MethodTag, PairKey, Partition, Relation,
};
use crate::{Error, Result};

pub const EMBEDDINGS_MAGIC: &[u8; 4] = b"AASE";

/// Writes `bytes` to a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| Error::Invalid(format!("not a file path: {}", path.display())))?
        .to_string_lossy();
    let tmp = dir.join(format!(".{name}.tmp-{}", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    Ok(())
}

pub fn manifest_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    ids: Vec<String>,
    image_uris: Option<Vec<String>>,
    identities: Option<Vec<String>>,
}

pub fn encode_embeddings(e: &EmbeddingSet) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + 4 * e.as_flat().len());
    out.extend_from_slice(EMBEDDINGS_MAGIC);
    out.extend_from_slice(&(e.len() as u32).to_le_bytes());
    out.extend_from_slice(&(e.dim() as u32).to_le_bytes());
    for x in e.as_flat() {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

/// Parses the binary matrix. Returns `(n, d, values)`.
pub fn decode_matrix(bytes: &[u8]) -> std::result::Result<(usize, usize, Vec<f32>), String> {
    if bytes.len() < 12 {
        return Err(format!("header truncated ({} bytes)", bytes.len()));
    }
    if &bytes[..4] != EMBEDDINGS_MAGIC {
        return Err(format!("bad magic {:?}", &bytes[..4]));
    }
    let n = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let d = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let expected = n
        .checked_mul(d)
        .and_then(|v| v.checked_mul(4))
        .ok_or("matrix size overflows")?;
    let body = &bytes[12..];
    if body.len() != expected {
        return Err(format!(
            "matrix body is {} bytes, header promises {n} x {d} f32 = {expected}",
            body.len()
        ));
    }
    let values = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((n, d, values))
}

pub fn write_embeddings(path: &Path, e: &EmbeddingSet) -> Result<()> {
    write_atomic(path, &encode_embeddings(e))?;
    let manifest = Manifest {
        ids: e.ids().to_vec(),
        image_uris: e.image_uris().map(<[String]>::to_vec),
        identities: e.identities().map(<[String]>::to_vec),
    };
    let json = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    write_atomic(&manifest_path(path), &json)
}

pub fn read_embeddings(path: &Path) -> Result<EmbeddingSet> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (n, d, values) = decode_matrix(&bytes).map_err(|m| Error::format(path, m))?;
    let mpath = manifest_path(path);
    let text = fs::read_to_string(&mpath).map_err(|e| Error::io(&mpath, e))?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| Error::format(&mpath, e.to_string()))?;
    if manifest.ids.len() != n {
        return Err(Error::format(
            &mpath,
            format!("{} ids for {n} rows", manifest.ids.len()),
        ));
    }
    let mut e = EmbeddingSet::new(manifest.ids, d, values).map_err(|e| relabel(path, e))?;
    if let Some(uris) = manifest.image_uris {
        e = e.with_image_uris(uris).map_err(|e| relabel(&mpath, e))?;
    }
    if let Some(ids) = manifest.identities {
        e = e.with_identities(ids).map_err(|e| relabel(&mpath, e))?;
    }
    Ok(e)
}

fn relabel(path: &Path, e: Error) -> Error {
    match e {
        Error::Invalid(m) => Error::format(path, m),
        other => other,
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstraintLine {
    a: String,
    b: String,
    relation: Relation,
    #[serde(default = "seed_source")]
    source: ConstraintSource,
    #[serde(default)]
    cycle: usize,
}

fn seed_source() -> ConstraintSource {
    ConstraintSource::Seed
}

pub fn encode_constraints<'a>(
    constraints: impl IntoIterator<Item = &'a Constraint>,
    e: &EmbeddingSet,
) -> Vec<u8> {
    let mut out = Vec::new();
    for c in constraints {
        let line = ConstraintLine {
            a: e.id(c.pair.a()).to_string(),
            b: e.id(c.pair.b()).to_string(),
            relation: c.relation,
            source: c.source,
            cycle: c.cycle,
        };
        serde_json::to_writer(&mut out, &line).expect("constraint serializes");
        out.push(b'\n');
    }
    out
}

pub fn write_constraints(path: &Path, constraints: &[Constraint], e: &EmbeddingSet) -> Result<()> {
    write_atomic(path, &encode_constraints(constraints, e))
}

/// Reads constraints, resolving ids against `e`. Blank lines are skipped.
pub fn read_constraints(path: &Path, e: &EmbeddingSet) -> Result<Vec<Constraint>> {
    let f = fs::File::open(path).map_err(|err| Error::io(path, err))?;
    let mut out = Vec::new();
    for (lineno, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|err| Error::io(path, err))?;
        if line.trim().is_empty() {
            continue;
        }
        let at = |m: String| Error::format(path, format!("line {}: {m}", lineno + 1));
        let parsed: ConstraintLine = serde_json::from_str(&line).map_err(|x| at(x.to_string()))?;
        let lookup = |id: &str| {
            e.index_of(id)
                .ok_or_else(|| at(format!("unknown sample id {id:?}")))
        };
        let pair = PairKey::new(lookup(&parsed.a)?, lookup(&parsed.b)?)
            .ok_or_else(|| at("constraint pairs a sample with itself".into()))?;
        out.push(Constraint {
            pair,
            relation: parsed.relation,
            source: parsed.source,
            cycle: parsed.cycle,
        });
    }
    Ok(out)
}

pub fn encode_partition(p: &Partition, e: &EmbeddingSet) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["id", "cluster", "outlier"]).unwrap();
    for i in 0..p.len() {
        let label = p.label(i).to_string();
        let flag = if p.is_outlier(i) { "1" } else { "0" };
        w.write_record([e.id(i), label.as_str(), flag]).unwrap();
    }
    w.into_inner().expect("in-memory writer")
}

pub fn write_partition(path: &Path, p: &Partition, e: &EmbeddingSet) -> Result<()> {
    write_atomic(path, &encode_partition(p, e))
}

/// Reads a partition CSV. Rows may come in any order but must cover every
/// sample of `e` exactly once.
pub fn read_partition(path: &Path, e: &EmbeddingSet, method: MethodTag) -> Result<Partition> {
    let mut r = csv::Reader::from_path(path).map_err(|err| Error::format(path, err.to_string()))?;
    let headers = r
        .headers()
        .map_err(|err| Error::format(path, err.to_string()))?
        .clone();
    if headers.iter().collect::<Vec<_>>() != ["id", "cluster", "outlier"] {
        return Err(Error::format(
            path,
            format!("expected header id,cluster,outlier, got {headers:?}"),
        ));
    }
    let n = e.len();
    let mut labels = vec![usize::MAX; n];
    let mut outliers = vec![false; n];
    let mut seen = HashSet::with_capacity(n);
    for (row, rec) in r.records().enumerate() {
        let at = |m: String| Error::format(path, format!("row {}: {m}", row + 2));
        let rec = rec.map_err(|x| at(x.to_string()))?;
        let id = &rec[0];
        let i = e
            .index_of(id)
            .ok_or_else(|| at(format!("unknown sample id {id:?}")))?;
        if !seen.insert(i) {
            return Err(at(format!("sample {id:?} listed twice")));
        }
        labels[i] = rec[1]
            .trim()
            .parse()
            .map_err(|_| at(format!("bad cluster {:?}", &rec[1])))?;
        outliers[i] = match rec[2].trim() {
            "0" => false,
            "1" => true,
            other => return Err(at(format!("bad outlier flag {other:?}"))),
        };
    }
    if seen.len() != n {
        return Err(Error::format(
            path,
            format!("{} of {n} samples assigned", seen.len()),
        ));
    }
    Partition::new(&labels, outliers, method)
}

/// Serializes records as JSON Lines.
pub fn encode_jsonl<T: Serialize>(records: &[T]) -> Vec<u8> {
    let mut out = Vec::new();
    for r in records {
        serde_json::to_writer(&mut out, r).expect("record serializes");
        out.push(b'\n');
    }
    out
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("value serializes");
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}
