use std::collections::HashMap;

use crate::{Error, Result};

/// `n` samples with `d`-dimensional features, stored row-major as `f32`
/// (the on-disk precision). Computations widen to `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    ids: Vec<String>,
    dim: usize,
    vectors: Vec<f32>,
    image_uris: Option<Vec<String>>,
    identities: Option<Vec<String>>,
    index: HashMap<String, usize>,
}

impl EmbeddingSet {
    pub fn new(ids: Vec<String>, dim: usize, vectors: Vec<f32>) -> Result<Self> {
        if ids.is_empty() {
            return Err(Error::Invalid("embedding set needs at least one sample".into()));
        }
        if dim == 0 {
            return Err(Error::Invalid("embedding dimension must be >= 1".into()));
        }
        if vectors.len() != ids.len() * dim {
            return Err(Error::Invalid(format!(
                "expected {} x {} = {} values, got {}",
                ids.len(),
                dim,
                ids.len() * dim,
                vectors.len()
            )));
        }
        if let Some(pos) = vectors.iter().position(|x| !x.is_finite()) {
            return Err(Error::Invalid(format!(
                "non-finite value in sample {}",
                pos / dim
            )));
        }
        let mut index = HashMap::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(Error::Invalid(format!("duplicate sample id {id:?}")));
            }
        }
        Ok(Self {
            ids,
            dim,
            vectors,
            image_uris: None,
            identities: None,
            index,
        })
    }

    /// Builds a set from `f64` rows with ids `"0"`, `"1"`, ...
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Invalid("ragged rows".into()));
        }
        let ids = (0..rows.len()).map(|i| i.to_string()).collect();
        let vectors = rows.iter().flatten().map(|&x| x as f32).collect();
        Self::new(ids, dim, vectors)
    }

    pub fn with_identities(mut self, identities: Vec<String>) -> Result<Self> {
        if identities.len() != self.len() {
            return Err(Error::Invalid(format!(
                "{} identities for {} samples",
                identities.len(),
                self.len()
            )));
        }
        self.identities = Some(identities);
        Ok(self)
    }

    pub fn with_image_uris(mut self, uris: Vec<String>) -> Result<Self> {
        if uris.len() != self.len() {
            return Err(Error::Invalid(format!(
                "{} image URIs for {} samples",
                uris.len(),
                self.len()
            )));
        }
        self.image_uris = Some(uris);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn id(&self, i: usize) -> &str {
        &self.ids[i]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_flat(&self) -> &[f32] {
        &self.vectors
    }

    pub fn image_uris(&self) -> Option<&[String]> {
        self.image_uris.as_deref()
    }

    pub fn image_uri(&self, i: usize) -> Option<&str> {
        self.image_uris.as_ref().map(|u| u[i].as_str())
    }

    pub fn identities(&self) -> Option<&[String]> {
        self.identities.as_deref()
    }

    /// Replaces the feature matrix, keeping ids and metadata.
    pub fn with_vectors(&self, vectors: Vec<f32>) -> Result<Self> {
        let mut next = Self::new(self.ids.clone(), self.dim, vectors)?;
        next.image_uris = self.image_uris.clone();
        next.identities = self.identities.clone();
        Ok(next)
    }

    /// Rows scaled to unit L2 norm, widened to `f64`.
    pub fn unit_rows(&self) -> Result<Vec<Vec<f64>>> {
        (0..self.len())
            .map(|i| {
                let row: Vec<f64> = self.row(i).iter().map(|&x| f64::from(x)).collect();
                let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm == 0.0 {
                    return Err(Error::ZeroVector(i));
                }
                Ok(row.into_iter().map(|x| x / norm).collect())
            })
            .collect()
    }

    /// Selects a subset of samples in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let ids = indices.iter().map(|&i| self.ids[i].clone()).collect();
        let vectors = indices
            .iter()
            .flat_map(|&i| self.row(i).iter().copied())
            .collect();
        let mut out = Self::new(ids, self.dim, vectors)?;
        out.identities = self
            .identities
            .as_ref()
            .map(|v| indices.iter().map(|&i| v[i].clone()).collect());
        out.image_uris = self
            .image_uris
            .as_ref()
            .map(|v| indices.iter().map(|&i| v[i].clone()).collect());
        Ok(out)
    }
}
