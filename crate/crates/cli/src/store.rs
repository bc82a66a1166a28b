//! In-memory, content-addressed image store for the service.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::SystemTime;

use sha2::{Digest, Sha256};

use orgb_core::LinearImage;

pub const DEFAULT_MAX_IMAGES: usize = 64;

/// Hex SHA-256 of `bytes`; the id of an uploaded file.
pub fn content_id(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub struct StoredImage {
    pub image: Arc<LinearImage>,
    pub name: Option<String>,
    pub created: SystemTime,
    last_used: AtomicU64,
}

/// Images keyed by content id, bounded by `max_images` with
/// least-recently-used eviction.
///
/// Lookups only need `&self`: recency is an atomic tick, so the store can sit
/// behind a read lock for every request except inserts.
pub struct SessionStore {
    max_images: usize,
    images: HashMap<String, StoredImage>,
    /// `(source id, offset digest)` -> corrected image id.
    corrected: HashMap<(String, String), String>,
    clock: AtomicU64,
}

impl SessionStore {
    pub fn new(max_images: usize) -> Self {
        Self {
            max_images: max_images.max(1),
            images: HashMap::new(),
            corrected: HashMap::new(),
            clock: AtomicU64::new(0),
        }
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    fn tick(&self) -> u64 {
        self.clock.fetch_add(1, Ordering::Relaxed) + 1
    }

    pub fn get(&self, id: &str) -> Option<&StoredImage> {
        let entry = self.images.get(id)?;
        entry.last_used.store(self.tick(), Ordering::Relaxed);
        Some(entry)
    }

    pub fn image(&self, id: &str) -> Option<Arc<LinearImage>> {
        self.get(id).map(|e| Arc::clone(&e.image))
    }

    pub fn contains(&self, id: &str) -> bool {
        self.images.contains_key(id)
    }

    /// Stores `image` under `id`. Re-inserting an existing id only refreshes
    /// its recency.
    pub fn insert(&mut self, id: String, image: LinearImage, name: Option<String>) {
        let now = self.tick();
        if let Some(existing) = self.images.get(&id) {
            existing.last_used.store(now, Ordering::Relaxed);
            return;
        }
        self.images.insert(
            id,
            StoredImage {
                image: Arc::new(image),
                name,
                created: SystemTime::now(),
                last_used: AtomicU64::new(now),
            },
        );
        self.evict();
    }

    fn evict(&mut self) {
        while self.images.len() > self.max_images {
            let oldest = self
                .images
                .iter()
                .min_by_key(|(id, e)| (e.last_used.load(Ordering::Relaxed), (*id).clone()))
                .map(|(id, _)| id.clone())
                .expect("store is non-empty");
            log::debug!("evicting image {oldest}");
            self.images.remove(&oldest);
            self.corrected
                .retain(|(src, _), dst| *src != oldest && *dst != oldest);
        }
    }

    pub fn corrected_id(&self, source: &str, offset_digest: &str) -> Option<String> {
        let id = self
            .corrected
            .get(&(source.to_string(), offset_digest.to_string()))?;
        self.contains(id).then(|| id.clone())
    }

    pub fn remember_corrected(&mut self, source: &str, offset_digest: &str, corrected: &str) {
        if self.contains(source) && self.contains(corrected) {
            self.corrected.insert(
                (source.to_string(), offset_digest.to_string()),
                corrected.to_string(),
            );
        }
    }
}
