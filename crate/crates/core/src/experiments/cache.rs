//! On-disk memo of ground-truth distances and reference fits.
//!
//! Entries are JSON files named by the SHA-256 of their key, under the
//! directory in `FERMAT_CACHE_DIR`. Without that variable nothing is cached.
//! Unreadable entries are recomputed, never trusted.

use std::fs;
use std::path::{Path as FsPath, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::datasets::{reference_model_with, DatasetKind};
use crate::density::{GaussianMixture, GmmDocument};
use crate::error::Result;
use crate::geometry::GroundTruthQuality;

pub const CACHE_ENV: &str = "FERMAT_CACHE_DIR";

const FORMAT: u32 = 1;

#[derive(Clone, Debug, Default)]
pub struct Cache {
    dir: Option<PathBuf>,
}

/// Everything a cached ground-truth distance depends on.
#[derive(Serialize)]
pub struct GroundTruthKey<'a> {
    pub dataset: &'a DatasetKind,
    pub fitted_components: usize,
    pub fit_seed: u64,
    pub fit_samples: usize,
    pub start: &'a [f64],
    pub end: &'a [f64],
    pub beta: f64,
    pub quality: GroundTruthQuality,
}

#[derive(Serialize)]
struct ModelKey<'a> {
    dataset: &'a DatasetKind,
    components: usize,
    fit_seed: u64,
    fit_samples: usize,
}

fn digest<K: Serialize>(kind: &str, key: &K) -> String {
    let json = serde_json::to_string(key).expect("cache keys serialize");
    let mut h = Sha256::new();
    h.update(format!("{kind}/{FORMAT}/").as_bytes());
    h.update(json.as_bytes());
    hex::encode(h.finalize())
}

impl Cache {
    pub fn disabled() -> Self {
        Cache { dir: None }
    }

    pub fn at(dir: impl Into<PathBuf>) -> Self {
        Cache { dir: Some(dir.into()) }
    }

    /// Uses `FERMAT_CACHE_DIR` when it is set and non-empty.
    pub fn from_env() -> Self {
        match std::env::var_os(CACHE_ENV) {
            Some(d) if !d.is_empty() => Cache::at(d),
            _ => Cache::disabled(),
        }
    }

    pub fn dir(&self) -> Option<&FsPath> {
        self.dir.as_deref()
    }

    fn entry(&self, kind: &str, hash: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(kind).join(format!("{hash}.json")))
    }

    fn get_or_compute<K, V, F>(&self, kind: &str, key: &K, compute: F) -> Result<V>
    where
        K: Serialize,
        V: Serialize + DeserializeOwned,
        F: FnOnce() -> Result<V>,
    {
        let Some(path) = self.entry(kind, &digest(kind, key)) else {
            return compute();
        };
        if let Ok(text) = fs::read_to_string(&path) {
            if let Ok(v) = serde_json::from_str(&text) {
                return Ok(v);
            }
        }
        let v = compute()?;
        // a failed write only costs a recomputation later
        let _ = store(&path, &serde_json::to_string(&v).expect("cache values serialize"));
        Ok(v)
    }

    /// Log ground-truth distance for `key`.
    pub fn ground_truth<F>(&self, key: &GroundTruthKey<'_>, compute: F) -> Result<f64>
    where
        F: FnOnce() -> Result<f64>,
    {
        self.get_or_compute("ground_truth", key, compute)
    }

    /// [`reference_model_with`], memoized.
    pub fn reference_model(
        &self,
        kind: &DatasetKind,
        components: usize,
        fit_seed: u64,
        fit_samples: usize,
    ) -> Result<GaussianMixture> {
        if !kind.is_geometric() {
            return reference_model_with(kind, components, fit_seed, fit_samples);
        }
        // fresh fits go through the stored form too, so hits and misses agree
        // to the last bit
        let fit = || -> Result<GaussianMixture> {
            let m = reference_model_with(kind, components, fit_seed, fit_samples)?;
            let doc = GmmDocument::from(m);
            GaussianMixture::try_from(doc)
        };
        let key = ModelKey {
            dataset: kind,
            components,
            fit_seed,
            fit_samples,
        };
        self.get_or_compute("models", &key, fit)
    }
}

fn store(path: &FsPath, text: &str) -> std::io::Result<()> {
    let dir = path.parent().expect("cache entries live in a directory");
    fs::create_dir_all(dir)?;
    let tmp = scratch_path(dir);
    fs::write(&tmp, text)?;
    fs::rename(&tmp, path)
}

/// Unique scratch name; renaming it into place keeps concurrent writers from
/// exposing half-written entries.
fn scratch_path(dir: &FsPath) -> PathBuf {
    use std::sync::atomic::{AtomicU64, Ordering};
    static COUNTER: AtomicU64 = AtomicU64::new(0);
    let n = COUNTER.fetch_add(1, Ordering::Relaxed);
    dir.join(format!(".tmp-{}-{n}", std::process::id()))
}
