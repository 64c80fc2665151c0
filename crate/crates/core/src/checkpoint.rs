//! Binary tensor checkpoints (`WFTS`).
//!
//! Layout: magic `WFTS`, version byte, then records until end of file. A
//! record is the name length (u64 LE), the UTF-8 name, the rank (u64 LE),
//! each dimension (u64 LE) and the values as f32 LE. The model spec of a
//! checkpoint lives in a `<path>.spec` key-value sidecar.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rand::RngCore;

use crate::config;
use crate::error::{Error, Result};
use crate::models::{build_generator, critic_for, Critic, Generator, ModelParams, ModelSpec};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"WFTS";
pub const VERSION: u8 = 1;

const MAX_RANK: u64 = 8;

pub fn write_tensors<W: Write>(mut w: W, tensors: &[(String, Tensor)]) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&[VERSION])?;
    for (name, t) in tensors {
        w.write_all(&(name.len() as u64).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&(t.rank() as u64).to_le_bytes())?;
        for d in t.shape() {
            w.write_all(&(*d as u64).to_le_bytes())?;
        }
        for v in t.data() {
            w.write_all(&(*v as f32).to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_u64<R: Read>(r: &mut R, what: &str) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)
        .map_err(|_| Error::Format(format!("truncated checkpoint while reading {what}")))?;
    Ok(u64::from_le_bytes(b))
}

/// Reads every record. Fails without returning partial data on a bad
/// magic, unknown version or truncation.
pub fn read_tensors<R: Read>(r: R) -> Result<Vec<(String, Tensor)>> {
    let mut bytes = Vec::new();
    BufReader::new(r).read_to_end(&mut bytes)?;
    if bytes.len() < 5 || &bytes[..4] != MAGIC {
        return Err(Error::Format("not a WFTS checkpoint (bad magic)".into()));
    }
    if bytes[4] != VERSION {
        return Err(Error::Format(format!(
            "unsupported checkpoint version {}",
            bytes[4]
        )));
    }
    let mut cur = &bytes[5..];
    let mut out = Vec::new();
    while !cur.is_empty() {
        let len = read_u64(&mut cur, "name length")? as usize;
        if len > cur.len() {
            return Err(Error::Format("truncated checkpoint name".into()));
        }
        let name = std::str::from_utf8(&cur[..len])
            .map_err(|_| Error::Format("parameter name is not UTF-8".into()))?
            .to_string();
        cur = &cur[len..];
        let rank = read_u64(&mut cur, "rank")?;
        if rank == 0 || rank > MAX_RANK {
            return Err(Error::Format(format!("{name}: unsupported rank {rank}")));
        }
        let mut shape = Vec::with_capacity(rank as usize);
        for _ in 0..rank {
            shape.push(read_u64(&mut cur, "dimension")? as usize);
        }
        let n = shape
            .iter()
            .try_fold(1usize, |a, d| a.checked_mul(*d))
            .filter(|n| *n > 0 && n.checked_mul(4).is_some_and(|b| b <= cur.len()))
            .ok_or_else(|| Error::Format(format!("{name}: truncated or invalid tensor data")))?;
        let data = cur[..4 * n]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        cur = &cur[4 * n..];
        out.push((name, Tensor::new(shape, data)?));
    }
    Ok(out)
}

pub fn save_tensors(path: &Path, tensors: &[(String, Tensor)]) -> Result<()> {
    write_tensors(BufWriter::new(fs::File::create(path)?), tensors)
}

pub fn load_tensors(path: &Path) -> Result<Vec<(String, Tensor)>> {
    read_tensors(fs::File::open(path)?)
}

pub fn spec_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".spec");
    PathBuf::from(s)
}

/// Generator and critic parameters with the generator spec.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub spec: ModelSpec,
    pub tensors: Vec<(String, Tensor)>,
}

impl Checkpoint {
    pub fn from_models(spec: &ModelSpec, generator: &ModelParams, critic: &ModelParams) -> Self {
        let mut tensors = generator.named_tensors();
        tensors.extend(critic.named_tensors());
        Checkpoint {
            spec: spec.clone(),
            tensors,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        save_tensors(path, &self.tensors)?;
        fs::write(spec_path(path), config::to_kv_text(&self.spec.to_kv()))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let tensors = load_tensors(path)?;
        let sidecar = spec_path(path);
        let text = fs::read_to_string(&sidecar).map_err(|e| {
            Error::Format(format!("cannot read model spec {}: {e}", sidecar.display()))
        })?;
        let spec = ModelSpec::from_kv(&config::parse_kv(&text)?)?;
        Ok(Checkpoint { spec, tensors })
    }

    fn subset(&self, params: &ModelParams) -> Vec<(String, Tensor)> {
        self.tensors
            .iter()
            .filter(|(n, _)| params.by_name(n).is_some())
            .cloned()
            .collect()
    }

    /// Rebuilds the generator and loads its parameters.
    pub fn generator(&self, rng: &mut dyn RngCore) -> Result<Generator> {
        let mut g = build_generator(&self.spec, rng)?;
        let named = self.subset(&g.params);
        g.params.load_named(&named)?;
        Ok(g)
    }

    /// Rebuilds the matching critic and loads its parameters.
    pub fn critic(&self, rng: &mut dyn RngCore) -> Result<Critic> {
        let mut c = critic_for(&self.spec, rng)?;
        let named = self.subset(&c.params);
        c.params.load_named(&named)?;
        Ok(c)
    }

    pub fn spec_kv(&self) -> BTreeMap<String, String> {
        self.spec.to_kv()
    }
}
