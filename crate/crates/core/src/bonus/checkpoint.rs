//! Binary checkpoints of a [`RewardModule`].
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! "RLXS" | u32 version | u32 header length | JSON header
//! networks    for each net in declaration order, each tensor (w0, b0, w1, ..)
//!             as u64 length + f64 values
//! optimisers  for each trained net: u64 step count, then first and second
//!             moments per tensor as above
//! moments     observations (live, snapshot), rewards, distillation errors:
//!             f64 count, mean, m2
//! memories    per env: u64 entries, each raw observation and embedding
//! ellipsoids  per env: the inverse matrix (E3B only)
//! log         u64 steps, each a per-env vector
//! rng         32-byte key, u64 stream, u128 word position
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Algorithm, BonusConfig, RewardModule};
use crate::diffkit::{Matrix, SeededRng};
use crate::normstats::RunningMoments;
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"RLXS";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    algorithm: Algorithm,
    config: BonusConfig,
    obs_dim: usize,
    n_actions: usize,
    n_envs: usize,
    seed: u64,
    watched: usize,
}

#[derive(Default)]
struct Writer(Vec<u8>);

impl Writer {
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn floats(&mut self, v: &[f64]) {
        self.u64(v.len() as u64);
        v.iter().for_each(|&x| self.f64(x));
    }

    fn moments(&mut self, m: &RunningMoments) {
        self.f64(m.count);
        self.floats(&m.mean);
        self.floats(&m.m2);
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn len(&mut self) -> Result<usize> {
        let n = self.u64()? as usize;
        if n > (self.buf.len() - self.pos) / 8 {
            return Err(Error::Checkpoint(format!("length {n} at byte {} exceeds the file", self.pos - 8)));
        }
        Ok(n)
    }

    fn floats(&mut self) -> Result<Vec<f64>> {
        let n = self.len()?;
        (0..n).map(|_| self.f64()).collect()
    }

    fn floats_into(&mut self, dst: &mut [f64], what: &str) -> Result<()> {
        let v = self.floats()?;
        if v.len() != dst.len() {
            return Err(Error::Checkpoint(format!("{what}: expected {} values, found {}", dst.len(), v.len())));
        }
        dst.copy_from_slice(&v);
        Ok(())
    }

    fn moments(&mut self, m: &mut RunningMoments, what: &str) -> Result<()> {
        m.count = self.f64()?;
        self.floats_into(&mut m.mean, what)?;
        self.floats_into(&mut m.m2, what)
    }
}

impl RewardModule {
    pub fn dump(&self) -> Result<Vec<u8>> {
        let header = serde_json::to_vec(&Header {
            algorithm: self.algorithm,
            config: self.config.clone(),
            obs_dim: self.obs_dim,
            n_actions: self.n_actions,
            n_envs: self.n_envs,
            seed: self.seed,
            watched: self.watched,
        })?;
        let mut w = Writer::default();
        w.0.extend_from_slice(MAGIC);
        w.0.extend_from_slice(&VERSION.to_le_bytes());
        w.0.extend_from_slice(&(header.len() as u32).to_le_bytes());
        w.0.extend_from_slice(&header);
        for (_, net) in self.nets.named() {
            net.tensors().iter().for_each(|t| w.floats(t));
        }
        for opt in self.nets.optimisers() {
            w.u64(opt.step_count);
            opt.first_moment.iter().chain(&opt.second_moment).for_each(|t| w.floats(t));
        }
        for m in [&self.obs_moments, &self.obs_snapshot, &self.reward_moments, &self.error_moments] {
            w.moments(m);
        }
        if let Some(mem) = &self.memory {
            for env in 0..self.n_envs {
                w.u64(mem.raw[env].len() as u64);
                for (r, e) in mem.raw[env].iter().zip(&mem.embeddings[env]) {
                    w.floats(r);
                    w.floats(e);
                }
            }
        }
        if let Some(ell) = &self.ellipsoid {
            ell.inv_c.iter().for_each(|m| w.floats(m.as_slice()));
        }
        w.u64(self.log.len() as u64);
        self.log.iter().for_each(|v| w.floats(v));
        let (key, stream, word_pos) = self.rng.state();
        w.0.extend_from_slice(&key);
        w.u64(stream);
        w.0.extend_from_slice(&word_pos.to_le_bytes());
        Ok(w.0)
    }

    pub fn load(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { buf: bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Checkpoint("bad magic, not a bonus checkpoint".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let hlen = r.u32()? as usize;
        let header: Header = serde_json::from_slice(r.take(hlen)?)
            .map_err(|e| Error::Checkpoint(format!("header: {e}")))?;
        let mut m = RewardModule::new(
            header.algorithm,
            header.config,
            header.obs_dim,
            header.n_actions,
            header.n_envs,
            header.seed,
        )?;
        m.watched = header.watched;
        for (i, net) in m.nets.ordered_mut().into_iter().enumerate() {
            for t in net.tensors_mut() {
                r.floats_into(t, &format!("network {i}"))?;
            }
        }
        for opt in m.nets.optimisers_mut() {
            opt.step_count = r.u64()?;
            for t in opt.first_moment.iter_mut().chain(opt.second_moment.iter_mut()) {
                r.floats_into(t, "optimiser")?;
            }
        }
        r.moments(&mut m.obs_moments, "observation moments")?;
        r.moments(&mut m.obs_snapshot, "observation snapshot")?;
        r.moments(&mut m.reward_moments, "reward moments")?;
        r.moments(&mut m.error_moments, "error moments")?;
        let n_envs = m.n_envs;
        if let Some(mem) = m.memory.as_mut() {
            for env in 0..n_envs {
                let entries = r.len()?;
                for _ in 0..entries {
                    let raw = r.floats()?;
                    let emb = r.floats()?;
                    mem.push(env, raw, emb);
                }
            }
        }
        if let Some(ell) = m.ellipsoid.as_mut() {
            let d = ell.dim;
            for inv in ell.inv_c.iter_mut() {
                *inv = Matrix::from_vec(d, d, r.floats()?).map_err(|e| Error::Checkpoint(e.to_string()))?;
            }
        }
        let steps = r.len()?;
        m.log = (0..steps).map(|_| r.floats()).collect::<Result<_>>()?;
        let key: [u8; 32] = r.take(32)?.try_into().expect("32 bytes");
        let stream = r.u64()?;
        let word_pos = u128::from_le_bytes(r.take(16)?.try_into().expect("16 bytes"));
        m.rng = SeededRng::from_state(key, stream, word_pos);
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.dump()?).map_err(|e| Error::io(path, e))
    }

    pub fn load_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::load(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
    }
}
