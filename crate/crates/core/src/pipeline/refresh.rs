use std::path::PathBuf;
use std::thread;
use std::time::{Duration, Instant};

use crate::io::{read_embeddings, write_constraints, write_partition};
use crate::model::EmbeddingSet;
use crate::{Error, Result};

use super::ALState;

/// Share of the distance to the cluster centroid removed by a synthetic refresh.
pub const SYNTHETIC_CONTRACTION: f64 = 0.1;

/// What happens to the embeddings between cycles.
#[derive(Debug, Clone, PartialEq)]
pub enum RefreshHook {
    /// Embeddings are left as they are.
    Static,
    /// Hands the refined partition and constraints to an outside trainer and
    /// waits for it to drop a replacement embeddings file.
    External {
        dir: PathBuf,
        replacement: PathBuf,
        timeout: Duration,
        poll: Duration,
    },
    /// Pulls every sample part of the way toward its cluster centroid.
    SyntheticRefresh,
}

impl RefreshHook {
    /// Embeddings for the cycle after `cycle`.
    pub fn apply(&self, state: &ALState, cycle: usize) -> Result<EmbeddingSet> {
        match self {
            RefreshHook::Static => Ok(state.embeddings.clone()),
            RefreshHook::SyntheticRefresh => contract(state),
            RefreshHook::External {
                dir,
                replacement,
                timeout,
                poll,
            } => {
                let e = &state.embeddings;
                std::fs::create_dir_all(dir).map_err(|err| Error::io(dir, err))?;
                write_partition(
                    &dir.join(format!("refresh_{cycle:02}_partition.csv")),
                    &state.current_partition,
                    e,
                )?;
                write_constraints(
                    &dir.join(format!("refresh_{cycle:02}_constraints.jsonl")),
                    state.store.constraints(),
                    e,
                )?;
                let started = Instant::now();
                while !replacement.exists() {
                    if started.elapsed() >= *timeout {
                        return Err(Error::RefreshTimeout {
                            path: replacement.clone(),
                            waited_ms: started.elapsed().as_millis() as u64,
                        });
                    }
                    thread::sleep(*poll);
                }
                let fresh = read_embeddings(replacement)?;
                if fresh.ids() != e.ids() {
                    return Err(Error::format(
                        replacement,
                        "replacement embeddings must list the same ids in the same order",
                    ));
                }
                // Move it aside so the next cycle waits for a new file.
                let mut consumed = replacement.as_os_str().to_owned();
                consumed.push(format!(".cycle{cycle:02}"));
                std::fs::rename(replacement, &consumed)
                    .map_err(|err| Error::io(replacement, err))?;
                let fresh = match e.identities() {
                    Some(ids) => fresh.with_identities(ids.to_vec())?,
                    None => fresh,
                };
                match e.image_uris() {
                    Some(uris) => fresh.with_image_uris(uris.to_vec()),
                    None => Ok(fresh),
                }
            }
        }
    }
}

fn contract(state: &ALState) -> Result<EmbeddingSet> {
    let e = &state.embeddings;
    let d = e.dim();
    let mut out = e.as_flat().to_vec();
    for members in state.current_partition.clusters() {
        let mut centroid = vec![0.0f64; d];
        for &i in &members {
            for (c, &x) in centroid.iter_mut().zip(e.row(i)) {
                *c += x as f64;
            }
        }
        let m = members.len() as f64;
        for &i in &members {
            for (k, c) in centroid.iter().enumerate() {
                let x = e.row(i)[k] as f64;
                out[i * d + k] = (x + SYNTHETIC_CONTRACTION * (c / m - x)) as f32;
            }
        }
    }
    e.with_vectors(out)
}
