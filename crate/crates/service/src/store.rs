//! In-memory scene store with optional write-through to a directory.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use rovi_core::simulator::WorldState;

#[derive(Debug, Default)]
pub struct SceneStore {
    scenes: RwLock<HashMap<String, Arc<WorldState>>>,
    next: AtomicU64,
    dir: Option<PathBuf>,
}

impl SceneStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Loads every `*.json` scene under `dir` and persists new scenes there.
    pub fn with_dir(dir: impl Into<PathBuf>, load: impl Fn(&str) -> Option<WorldState>) -> std::io::Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        let mut scenes = HashMap::new();
        let mut next = 0;
        for entry in std::fs::read_dir(&dir)? {
            let path = entry?.path();
            if path.extension().is_none_or(|e| e != "json") {
                continue;
            }
            let Some(id) = path.file_stem().and_then(|s| s.to_str()).map(str::to_string) else { continue };
            if let Some(world) = load(&std::fs::read_to_string(&path)?) {
                if let Some(n) = id.strip_prefix("scene-").and_then(|n| n.parse::<u64>().ok()) {
                    next = next.max(n);
                }
                scenes.insert(id, Arc::new(world));
            }
        }
        Ok(Self { scenes: RwLock::new(scenes), next: AtomicU64::new(next), dir: Some(dir) })
    }

    pub fn insert(&self, world: WorldState) -> std::io::Result<String> {
        let id = format!("scene-{}", self.next.fetch_add(1, Ordering::Relaxed) + 1);
        if let Some(dir) = &self.dir {
            std::fs::write(dir.join(format!("{id}.json")), world.to_json())?;
        }
        self.scenes.write().expect("store lock poisoned").insert(id.clone(), Arc::new(world));
        Ok(id)
    }

    pub fn get(&self, id: &str) -> Option<Arc<WorldState>> {
        self.scenes.read().expect("store lock poisoned").get(id).cloned()
    }

    pub fn len(&self) -> usize {
        self.scenes.read().expect("store lock poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
