//! Model checkpoint container: config, vocabulary hash, and every
//! parameter array under its canonical name, 64-bit little-endian.

use std::fs;
use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};

use super::params::{Array, BiGru, GruParams, ModelParams};
use super::{ModelConfig, Variant};

const MAGIC: &[u8; 8] = b"RRGRUCK1";

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub cfg: ModelConfig,
    pub seed: u64,
    pub vocab_hash: u64,
    pub vocab_size: usize,
    pub params: ModelParams,
}

fn variant_code(v: Variant) -> u8 {
    match v {
        Variant::Full => 0,
        Variant::RelationOnly => 1,
        Variant::NominalsOnly => 2,
        Variant::AttBgru => 3,
    }
}

fn variant_from_code(c: u8) -> Result<Variant> {
    Ok(match c {
        0 => Variant::Full,
        1 => Variant::RelationOnly,
        2 => Variant::NominalsOnly,
        3 => Variant::AttBgru,
        other => return Err(Error::Checkpoint(format!("unknown variant code {}", other))),
    })
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.push(variant_code(ckpt.cfg.variant));
    for v in [
        ckpt.cfg.d_e,
        ckpt.cfg.d_h,
        ckpt.cfg.k,
        ckpt.cfg.n_relations,
        ckpt.cfg.n_directional,
    ] {
        buf.extend_from_slice(&(v as u32).to_le_bytes());
    }
    buf.extend_from_slice(&ckpt.seed.to_le_bytes());
    buf.extend_from_slice(&ckpt.vocab_hash.to_le_bytes());
    buf.extend_from_slice(&(ckpt.vocab_size as u64).to_le_bytes());

    let arrays = ckpt.params.arrays();
    buf.extend_from_slice(&(arrays.len() as u32).to_le_bytes());
    for a in arrays {
        let name = a.name.as_bytes();
        buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
        buf.extend_from_slice(name);
        buf.extend_from_slice(&(a.rows as u64).to_le_bytes());
        buf.extend_from_slice(&(a.cols as u64).to_le_bytes());
        for x in &a.data {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    fs::write(path, buf).map_err(|e| Error::io(path.display(), e))
}

struct Reader<'a> {
    buf: &'a [u8],
    path: String,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.buf.len() < n {
            return Err(Error::Checkpoint(format!(
                "{}: truncated checkpoint",
                self.path
            )));
        }
        let (head, rest) = self.buf.split_at(n);
        self.buf = rest;
        Ok(head)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(8 * n)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

/// Load and validate: every expected array for the stored config must be
/// present with its exact shape; unknown names or shape drift fail.
pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let mut raw = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut raw))
        .map_err(|e| Error::io(path.display(), e))?;
    let mut r = Reader {
        buf: &raw,
        path: path.display().to_string(),
    };

    if r.take(8)? != MAGIC {
        return Err(Error::Checkpoint(format!(
            "{}: bad magic (not a checkpoint?)",
            path.display()
        )));
    }
    let variant = variant_from_code(r.u8()?)?;
    let cfg = ModelConfig {
        variant,
        d_e: r.u32()? as usize,
        d_h: r.u32()? as usize,
        k: r.u32()? as usize,
        n_relations: r.u32()? as usize,
        n_directional: r.u32()? as usize,
    };
    let seed = r.u64()?;
    let vocab_hash = r.u64()?;
    let vocab_size = r.u64()? as usize;

    let mut expected = shaped_params(&cfg, vocab_size);
    let mut filled: Vec<String> = Vec::new();
    let n_arrays = r.u32()? as usize;
    for _ in 0..n_arrays {
        let name_len = r.u32()? as usize;
        let name = String::from_utf8(r.take(name_len)?.to_vec())
            .map_err(|_| Error::Checkpoint(format!("{}: bad array name", path.display())))?;
        let rows = r.u64()? as usize;
        let cols = r.u64()? as usize;
        let data = r.f64s(rows * cols)?;
        let slot = expected
            .arrays_mut()
            .into_iter()
            .find(|a| a.name == name)
            .ok_or_else(|| {
                Error::Checkpoint(format!(
                    "{}: unexpected array {:?} for variant {}",
                    path.display(),
                    name,
                    cfg.variant.as_str()
                ))
            })?;
        if (slot.rows, slot.cols) != (rows, cols) {
            return Err(Error::Checkpoint(format!(
                "{}: array {:?} has shape {}x{}, expected {}x{}",
                path.display(),
                name,
                rows,
                cols,
                slot.rows,
                slot.cols
            )));
        }
        if filled.contains(&name) {
            return Err(Error::Checkpoint(format!(
                "{}: duplicate array {:?}",
                path.display(),
                name
            )));
        }
        slot.data = data;
        filled.push(name);
    }
    let missing: Vec<String> = expected
        .arrays()
        .into_iter()
        .map(|a| a.name.clone())
        .filter(|n| !filled.contains(n))
        .collect();
    if !missing.is_empty() {
        return Err(Error::Checkpoint(format!(
            "{}: missing arrays: {}",
            path.display(),
            missing.join(", ")
        )));
    }

    Ok(Checkpoint {
        cfg,
        seed,
        vocab_hash,
        vocab_size,
        params: expected,
    })
}

/// Zero-filled parameter set with the exact shapes of a config; load
/// target and shape reference.
fn shaped_params(cfg: &ModelConfig, vocab_size: usize) -> ModelParams {
    let (d_e, d_h) = (cfg.d_e, cfg.d_h);
    let gru = |prefix: &str| GruParams {
        w_r: Array::zeros(format!("{}.W_r", prefix), d_h, d_e),
        u_r: Array::zeros(format!("{}.U_r", prefix), d_h, d_h),
        w_z: Array::zeros(format!("{}.W_z", prefix), d_h, d_e),
        u_z: Array::zeros(format!("{}.U_z", prefix), d_h, d_h),
        w_h: Array::zeros(format!("{}.W", prefix), d_h, d_e),
        u_h: Array::zeros(format!("{}.U", prefix), d_h, d_h),
    };
    let bigru = |name: &str| BiGru {
        fwd: gru(&format!("{}.fwd", name)),
        bwd: gru(&format!("{}.bwd", name)),
    };
    let nominals = matches!(cfg.variant, Variant::Full | Variant::NominalsOnly);
    let relation = !matches!(cfg.variant, Variant::NominalsOnly);
    ModelParams {
        embeddings: Array::zeros("embeddings", d_e, vocab_size),
        gru_e1: nominals.then(|| bigru("gru.e1")),
        gru_e2: nominals.then(|| bigru("gru.e2")),
        gru_rel: relation.then(|| bigru("gru.rel")),
        w_att_fwd: relation.then(|| Array::zeros("w_att.fwd", d_h, 1)),
        w_att_bwd: relation.then(|| Array::zeros("w_att.bwd", d_h, 1)),
        w_c: Array::zeros("W_c", cfg.n_directional, cfg.v_fin_dim()),
        b_c: Array::zeros("b_c", cfg.n_directional, 1),
    }
}
