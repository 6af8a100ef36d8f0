use serde::{Deserialize, Serialize};

/// Per-env episodic store. Each entry keeps the raw observation next to its
/// embedding so the embeddings can be recomputed when the encoder changes.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EpisodicMemory {
    pub raw: Vec<Vec<Vec<f64>>>,
    pub embeddings: Vec<Vec<Vec<f64>>>,
    pub cleared_on_done: bool,
}

impl EpisodicMemory {
    pub fn new(envs: usize) -> Self {
        Self {
            raw: vec![Vec::new(); envs],
            embeddings: vec![Vec::new(); envs],
            cleared_on_done: true,
        }
    }

    pub fn envs(&self) -> usize {
        self.raw.len()
    }

    pub fn len(&self, env: usize) -> usize {
        self.embeddings[env].len()
    }

    pub fn is_empty(&self, env: usize) -> bool {
        self.embeddings[env].is_empty()
    }

    pub fn push(&mut self, env: usize, raw: Vec<f64>, embedding: Vec<f64>) {
        self.raw[env].push(raw);
        self.embeddings[env].push(embedding);
    }

    pub fn embeddings(&self, env: usize) -> &[Vec<f64>] {
        &self.embeddings[env]
    }

    pub fn clear(&mut self, env: usize) {
        self.raw[env].clear();
        self.embeddings[env].clear();
    }

    pub fn on_done(&mut self, env: usize) {
        if self.cleared_on_done {
            self.clear(env);
        }
    }

    pub fn total_len(&self) -> usize {
        self.embeddings.iter().map(Vec::len).sum()
    }
}
