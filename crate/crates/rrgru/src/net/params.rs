//! Trainable parameter storage and its binding into a graph.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Graph, ParamSpec, Value};
use crate::corpus::EmbeddingMatrix;
use crate::error::{Error, Result};

use super::{ModelConfig, Variant};

/// A named dense parameter matrix (master copy, outside any graph).
#[derive(Debug, Clone, PartialEq)]
pub struct Array {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Array {
    pub fn zeros(name: impl Into<String>, rows: usize, cols: usize) -> Self {
        Array {
            name: name.into(),
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Uniform in +-sqrt(6 / (fan_in + fan_out)).
    fn glorot(name: impl Into<String>, rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = (6.0 / (rows + cols) as f64).sqrt();
        let data = (0..rows * cols).map(|_| rng.gen_range(-bound..=bound)).collect();
        Array {
            name: name.into(),
            rows,
            cols,
            data,
        }
    }

    fn uniform(
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        bound: f64,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let data = (0..rows * cols).map(|_| rng.gen_range(-bound..=bound)).collect();
        Array {
            name: name.into(),
            rows,
            cols,
            data,
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// The six weight matrices of one directional GRU (Eqs. 2-4 carry no bias
/// vectors).
#[derive(Debug, Clone, PartialEq)]
pub struct GruParams {
    pub w_r: Array,
    pub u_r: Array,
    pub w_z: Array,
    pub u_z: Array,
    pub w_h: Array,
    pub u_h: Array,
}

impl GruParams {
    fn init(prefix: &str, d_e: usize, d_h: usize, rng: &mut ChaCha8Rng) -> Self {
        GruParams {
            w_r: Array::glorot(format!("{}.W_r", prefix), d_h, d_e, rng),
            u_r: Array::glorot(format!("{}.U_r", prefix), d_h, d_h, rng),
            w_z: Array::glorot(format!("{}.W_z", prefix), d_h, d_e, rng),
            u_z: Array::glorot(format!("{}.U_z", prefix), d_h, d_h, rng),
            w_h: Array::glorot(format!("{}.W", prefix), d_h, d_e, rng),
            u_h: Array::glorot(format!("{}.U", prefix), d_h, d_h, rng),
        }
    }

    fn arrays(&self) -> [&Array; 6] {
        [&self.w_r, &self.u_r, &self.w_z, &self.u_z, &self.w_h, &self.u_h]
    }

    fn arrays_mut(&mut self) -> [&mut Array; 6] {
        [
            &mut self.w_r,
            &mut self.u_r,
            &mut self.w_z,
            &mut self.u_z,
            &mut self.w_h,
            &mut self.u_h,
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiGru {
    pub fwd: GruParams,
    pub bwd: GruParams,
}

impl BiGru {
    fn init(prefix: &str, d_e: usize, d_h: usize, rng: &mut ChaCha8Rng) -> Self {
        BiGru {
            fwd: GruParams::init(&format!("{}.fwd", prefix), d_e, d_h, rng),
            bwd: GruParams::init(&format!("{}.bwd", prefix), d_e, d_h, rng),
        }
    }
}

/// Every trainable array of one model variant. The three GRU layers have
/// separate parameters even where their ranges overlap; variants that do
/// not use a layer or the attention vectors simply do not have them.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub embeddings: Array, // d_e x |V|
    pub gru_e1: Option<BiGru>,
    pub gru_e2: Option<BiGru>,
    /// Relation layer; doubles as the whole-sentence layer for `att_bgru`.
    pub gru_rel: Option<BiGru>,
    pub w_att_fwd: Option<Array>,
    pub w_att_bwd: Option<Array>,
    pub w_c: Array, // n_directional x v_fin dim
    pub b_c: Array, // n_directional x 1
}

impl ModelParams {
    pub fn init(cfg: &ModelConfig, embeddings: &EmbeddingMatrix, rng: &mut ChaCha8Rng) -> Self {
        let (d_e, d_h) = (cfg.d_e, cfg.d_h);
        assert_eq!(embeddings.d_e, d_e, "embedding matrix dimension mismatch");
        let emb = Array {
            name: "embeddings".into(),
            rows: d_e,
            cols: embeddings.vocab_size,
            data: embeddings.data.clone(),
        };
        let nominals = matches!(cfg.variant, Variant::Full | Variant::NominalsOnly);
        let relation = !matches!(cfg.variant, Variant::NominalsOnly);
        ModelParams {
            embeddings: emb,
            gru_e1: nominals.then(|| BiGru::init("gru.e1", d_e, d_h, rng)),
            gru_e2: nominals.then(|| BiGru::init("gru.e2", d_e, d_h, rng)),
            gru_rel: relation.then(|| BiGru::init("gru.rel", d_e, d_h, rng)),
            w_att_fwd: relation.then(|| Array::uniform("w_att.fwd", d_h, 1, 0.01, rng)),
            w_att_bwd: relation.then(|| Array::uniform("w_att.bwd", d_h, 1, 0.01, rng)),
            w_c: Array::glorot("W_c", cfg.n_directional, cfg.v_fin_dim(), rng),
            b_c: Array::zeros("b_c", cfg.n_directional, 1),
        }
    }

    /// All arrays in canonical order (checkpoints, optimizer state, and
    /// graph binding rely on this order being stable).
    pub fn arrays(&self) -> Vec<&Array> {
        let mut out = vec![&self.embeddings];
        for gru in [&self.gru_e1, &self.gru_e2, &self.gru_rel].into_iter().flatten() {
            out.extend(gru.fwd.arrays());
            out.extend(gru.bwd.arrays());
        }
        if let Some(a) = &self.w_att_fwd {
            out.push(a);
        }
        if let Some(a) = &self.w_att_bwd {
            out.push(a);
        }
        out.push(&self.w_c);
        out.push(&self.b_c);
        out
    }

    pub fn arrays_mut(&mut self) -> Vec<&mut Array> {
        let mut out: Vec<&mut Array> = vec![&mut self.embeddings];
        for gru in [&mut self.gru_e1, &mut self.gru_e2, &mut self.gru_rel]
            .into_iter()
            .flatten()
        {
            out.extend(gru.fwd.arrays_mut());
            out.extend(gru.bwd.arrays_mut());
        }
        if let Some(a) = &mut self.w_att_fwd {
            out.push(a);
        }
        if let Some(a) = &mut self.w_att_bwd {
            out.push(a);
        }
        out.push(&mut self.w_c);
        out.push(&mut self.b_c);
        out
    }

    /// Arrays covered by the L2 penalty: GRU matrices, attention vectors,
    /// and the class embeddings; pretrained embeddings and the bias stay
    /// out.
    pub fn l2_array_names(&self) -> Vec<&str> {
        self.arrays()
            .into_iter()
            .map(|a| a.name.as_str())
            .filter(|n| *n != "embeddings" && *n != "b_c")
            .collect()
    }

    pub fn to_param_specs(&self) -> Vec<ParamSpec> {
        self.arrays()
            .into_iter()
            .map(|a| ParamSpec::new(a.name.clone(), a.rows, a.cols, a.data.clone()))
            .collect()
    }

    /// Insert every array as a graph leaf.
    pub fn bind(&self, g: &mut Graph) -> Result<BoundParams> {
        let values: Vec<Value> = self
            .arrays()
            .into_iter()
            .map(|a| g.leaf(a.rows, a.cols, &a.data))
            .collect::<Result<_>>()?;
        self.bind_values(&values)
    }

    /// Assemble a [`BoundParams`] from values in canonical array order
    /// (the order of [`ModelParams::arrays`]).
    pub fn bind_values(&self, values: &[Value]) -> Result<BoundParams> {
        let expect = self.arrays().len();
        if values.len() != expect {
            return Err(Error::Contract(format!(
                "bind_values: expected {} values, got {}",
                expect,
                values.len()
            )));
        }
        let mut it = values.iter().copied();
        let mut next = || it.next().expect("length checked");
        let embeddings = next();
        let mut bind_gru = |present: bool| -> Option<BoundBiGru> {
            present.then(|| BoundBiGru {
                fwd: BoundGru {
                    w_r: next(),
                    u_r: next(),
                    w_z: next(),
                    u_z: next(),
                    w_h: next(),
                    u_h: next(),
                },
                bwd: BoundGru {
                    w_r: next(),
                    u_r: next(),
                    w_z: next(),
                    u_z: next(),
                    w_h: next(),
                    u_h: next(),
                },
            })
        };
        let gru_e1 = bind_gru(self.gru_e1.is_some());
        let gru_e2 = bind_gru(self.gru_e2.is_some());
        let gru_rel = bind_gru(self.gru_rel.is_some());
        let w_att_fwd = self.w_att_fwd.as_ref().map(|_| next());
        let w_att_bwd = self.w_att_bwd.as_ref().map(|_| next());
        let w_c = next();
        let b_c = next();
        Ok(BoundParams {
            embeddings,
            gru_e1,
            gru_e2,
            gru_rel,
            w_att_fwd,
            w_att_bwd,
            w_c,
            b_c,
        })
    }
}

/// Graph handles for one binding of [`ModelParams`].
#[derive(Debug, Clone)]
pub struct BoundParams {
    pub embeddings: Value,
    pub gru_e1: Option<BoundBiGru>,
    pub gru_e2: Option<BoundBiGru>,
    pub gru_rel: Option<BoundBiGru>,
    pub w_att_fwd: Option<Value>,
    pub w_att_bwd: Option<Value>,
    pub w_c: Value,
    pub b_c: Value,
}

#[derive(Debug, Clone, Copy)]
pub struct BoundGru {
    pub w_r: Value,
    pub u_r: Value,
    pub w_z: Value,
    pub u_z: Value,
    pub w_h: Value,
    pub u_h: Value,
}

#[derive(Debug, Clone, Copy)]
pub struct BoundBiGru {
    pub fwd: BoundGru,
    pub bwd: BoundGru,
}

impl BoundParams {
    /// Values in the same canonical order as [`ModelParams::arrays`].
    pub fn values(&self) -> Vec<Value> {
        let mut out = vec![self.embeddings];
        for gru in [&self.gru_e1, &self.gru_e2, &self.gru_rel].into_iter().flatten() {
            for d in [&gru.fwd, &gru.bwd] {
                out.extend([d.w_r, d.u_r, d.w_z, d.u_z, d.w_h, d.u_h]);
            }
        }
        if let Some(v) = self.w_att_fwd {
            out.push(v);
        }
        if let Some(v) = self.w_att_bwd {
            out.push(v);
        }
        out.push(self.w_c);
        out.push(self.b_c);
        out
    }
}
