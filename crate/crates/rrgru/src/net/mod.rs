//! The model: range computation, masked bidirectional GRU layers,
//! nominal-position selection, per-direction attention pooling, the final
//! representation, class scoring, and the Other prediction rule.

mod checkpoint;
mod params;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use params::{Array, BiGru, BoundBiGru, BoundGru, BoundParams, GruParams, ModelParams};

use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Graph, Value};
use crate::corpus::{TokenizedExample, N_DIRECTIONAL, N_RELATIONS, OTHER_ID};
use crate::error::{Error, Result};
use crate::train::{apply_dropout, DropoutMode};

/// The four model variants reported for this architecture.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Nominals and relation: three range-restricted bidirectional layers.
    Full,
    /// Relation layer only.
    RelationOnly,
    /// The two nominal layers only, no attention.
    NominalsOnly,
    /// One bidirectional GRU over the whole sentence with attention.
    AttBgru,
}

impl Variant {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "full" => Some(Variant::Full),
            "relation_only" => Some(Variant::RelationOnly),
            "nominals_only" => Some(Variant::NominalsOnly),
            "att_bgru" => Some(Variant::AttBgru),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::RelationOnly => "relation_only",
            Variant::NominalsOnly => "nominals_only",
            Variant::AttBgru => "att_bgru",
        }
    }

    pub const ALL: [Variant; 4] = [
        Variant::Full,
        Variant::RelationOnly,
        Variant::NominalsOnly,
        Variant::AttBgru,
    ];
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub d_e: usize,
    pub d_h: usize,
    /// Nominal window half-width.
    pub k: usize,
    pub variant: Variant,
    pub n_relations: usize,
    pub n_directional: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            d_e: 100,
            d_h: 100,
            k: 3,
            variant: Variant::Full,
            n_relations: N_RELATIONS,
            n_directional: N_DIRECTIONAL,
        }
    }
}

impl ModelConfig {
    /// Dimension of the final representation for this variant.
    pub fn v_fin_dim(&self) -> usize {
        match self.variant {
            Variant::Full => 3 * self.d_h,
            Variant::NominalsOnly => 2 * self.d_h,
            Variant::RelationOnly | Variant::AttBgru => self.d_h,
        }
    }
}

/// Inclusive token-index interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub lo: usize,
    pub hi: usize,
}

impl Span {
    pub fn new(lo: usize, hi: usize) -> Self {
        debug_assert!(lo <= hi);
        Span { lo, hi }
    }

    pub fn len(&self) -> usize {
        self.hi - self.lo + 1
    }

    pub fn is_empty(&self) -> bool {
        false // inclusive by construction
    }

    pub fn contains(&self, t: usize) -> bool {
        self.lo <= t && t <= self.hi
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> {
        self.lo..=self.hi
    }
}

/// The three input ranges: a `p +- k` window around each nominal and the
/// span between the two nominals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RangeSet {
    pub e1: Span,
    pub e2: Span,
    pub rel: Span,
}

impl RangeSet {
    pub fn contains(&self, t: usize) -> bool {
        self.e1.contains(t) || self.e2.contains(t) || self.rel.contains(t)
    }
}

/// Window ranges clip at the sentence boundaries; the relation range runs
/// from the formerly-appearing nominal to the latterly-appearing one.
pub fn compute_ranges(ex: &TokenizedExample, cfg: &ModelConfig) -> RangeSet {
    let n = ex.len();
    debug_assert!(ex.p_e1 < n && ex.p_e2 < n && ex.p_e1 != ex.p_e2);
    let window = |p: usize| Span::new(p.saturating_sub(cfg.k), (p + cfg.k).min(n - 1));
    RangeSet {
        e1: window(ex.p_e1),
        e2: window(ex.p_e2),
        rel: Span::new(ex.p_e1.min(ex.p_e2), ex.p_e1.max(ex.p_e2)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dir {
    Fwd,
    Bwd,
}

/// Run one directional GRU over an embedded range. `inputs` are in
/// sentence order; the returned hidden states align with them. The initial
/// hidden state is the zero vector at the range's entry end.
pub fn gru_run(g: &mut Graph, inputs: &[Value], p: &BoundGru, dir: Dir) -> Result<Vec<Value>> {
    if inputs.is_empty() {
        return Err(Error::Contract("gru_run over an empty range".into()));
    }
    let d_h = g.shape(p.u_r).0;
    let mut h_prev = g.leaf_vec(&vec![0.0; d_h]);
    let mut hidden: Vec<Option<Value>> = vec![None; inputs.len()];
    let order: Vec<usize> = match dir {
        Dir::Fwd => (0..inputs.len()).collect(),
        Dir::Bwd => (0..inputs.len()).rev().collect(),
    };
    for t in order {
        let e = inputs[t];
        let wr_e = g.matmul(p.w_r, e)?;
        let ur_h = g.matmul(p.u_r, h_prev)?;
        let r_pre = g.add(wr_e, ur_h)?;
        let r = g.sigmoid(r_pre);

        let wz_e = g.matmul(p.w_z, e)?;
        let uz_h = g.matmul(p.u_z, h_prev)?;
        let z_pre = g.add(wz_e, uz_h)?;
        let z = g.sigmoid(z_pre);

        let rh = g.mul(r, h_prev)?;
        let w_e = g.matmul(p.w_h, e)?;
        let u_rh = g.matmul(p.u_h, rh)?;
        let h_pre = g.add(w_e, u_rh)?;
        let h_tilde = g.tanh(h_pre);

        let keep = g.mul(z, h_prev)?;
        let gate = g.one_minus(z);
        let take = g.mul(gate, h_tilde)?;
        let h = g.add(keep, take)?;

        hidden[t] = Some(h);
        h_prev = h;
    }
    Ok(hidden.into_iter().map(|h| h.expect("all positions visited")).collect())
}

/// Sum of the forward and backward hidden states at a nominal position.
pub fn nominal_vector(g: &mut Graph, h_fwd: Value, h_bwd: Value) -> Result<Value> {
    g.add(h_fwd, h_bwd)
}

/// Attention pooling over one direction's hidden matrix: weights are
/// `softmax(w_att^T tanh(H))`, the pooled vector is `H alpha^T`. Returns
/// `(v, alpha)`.
pub fn attention_pool(g: &mut Graph, cols: &[Value], w_att: Value) -> Result<(Value, Value)> {
    let h = g.hstack(cols)?;
    let m = g.tanh(h);
    let w_t = g.transpose(w_att);
    let scores = g.matmul(w_t, m)?;
    let alpha = g.softmax_rowvec(scores)?;
    let alpha_t = g.transpose(alpha);
    let v = g.matmul(h, alpha_t)?;
    Ok((v, alpha))
}

/// Per-direction hidden sequences over one layer's range.
#[derive(Debug, Clone)]
pub struct BiSeq {
    pub span: Span,
    pub fwd: Vec<Value>,
    pub bwd: Vec<Value>,
}

/// Everything one forward pass produces.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub ranges: RangeSet,
    pub h_e1: Option<BiSeq>,
    pub h_e2: Option<BiSeq>,
    /// Relation layer (or the whole-sentence layer for `att_bgru`).
    pub h_rel: Option<BiSeq>,
    pub alpha_fwd: Option<Value>,
    pub alpha_bwd: Option<Value>,
    pub v_e1: Option<Value>,
    pub v_e2: Option<Value>,
    pub v_rel: Option<Value>,
    pub v_fin: Value,
    pub s_c: Value,
}

/// Dropout rates at the three sites named by the training setup.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DropoutRates {
    pub embed: f64,
    pub hidden: f64,
    pub fin: f64,
}

/// Dropout behavior of one forward pass.
pub enum DropoutCtx<'a> {
    Infer,
    Train {
        rates: DropoutRates,
        rng: &'a mut ChaCha8Rng,
    },
}

#[derive(Clone, Copy)]
enum Site {
    Embed,
    Hidden,
    Fin,
}

impl DropoutCtx<'_> {
    fn apply(&mut self, g: &mut Graph, v: Value, site: Site) -> Result<Value> {
        match self {
            DropoutCtx::Infer => Ok(v),
            DropoutCtx::Train { rates, rng } => {
                let rate = match site {
                    Site::Embed => rates.embed,
                    Site::Hidden => rates.hidden,
                    Site::Fin => rates.fin,
                };
                apply_dropout(g, v, rate, DropoutMode::Train, rng)
            }
        }
    }
}

/// Full forward pass per the configured variant. Embeddings are looked up
/// only for positions inside the layer ranges, so tokens outside them
/// cannot influence the scores.
pub fn forward(
    g: &mut Graph,
    p: &BoundParams,
    cfg: &ModelConfig,
    ex: &TokenizedExample,
    dropout: &mut DropoutCtx,
) -> Result<ForwardTrace> {
    let n = ex.len();
    if n == 0 || ex.p_e1 >= n || ex.p_e2 >= n || ex.p_e1 == ex.p_e2 {
        return Err(Error::Contract(format!(
            "example {}: invalid nominal positions {}..{} in {} tokens",
            ex.id, ex.p_e1, ex.p_e2, n
        )));
    }
    let ranges = compute_ranges(ex, cfg);
    let whole = Span::new(0, n - 1);
    let rel_span = match cfg.variant {
        Variant::AttBgru => whole,
        _ => ranges.rel,
    };

    // Embedding lookup with dropout, restricted to positions some layer
    // actually reads, in ascending order.
    let mut embedded: Vec<Option<Value>> = vec![None; n];
    for t in 0..n {
        let needed = match cfg.variant {
            Variant::Full => ranges.contains(t),
            Variant::RelationOnly => rel_span.contains(t),
            Variant::NominalsOnly => ranges.e1.contains(t) || ranges.e2.contains(t),
            Variant::AttBgru => true,
        };
        if needed {
            let col = g.col(p.embeddings, ex.token_ids[t] as usize)?;
            embedded[t] = Some(dropout.apply(g, col, Site::Embed)?);
        }
    }
    let span_inputs = |embedded: &[Option<Value>], span: Span| -> Vec<Value> {
        span.iter()
            .map(|t| embedded[t].expect("position inside a layer range"))
            .collect()
    };

    let mut trace = ForwardTrace {
        ranges,
        h_e1: None,
        h_e2: None,
        h_rel: None,
        alpha_fwd: None,
        alpha_bwd: None,
        v_e1: None,
        v_e2: None,
        v_rel: None,
        v_fin: p.b_c, // placeholder, overwritten below
        s_c: p.b_c,
    };

    // Nominal layers: run both directions, select the hidden states at the
    // nominal position, and sum them.
    let mut nominal = |g: &mut Graph,
                       dropout: &mut DropoutCtx,
                       gru: &BoundBiGru,
                       span: Span,
                       p_en: usize|
     -> Result<(BiSeq, Value)> {
        let inputs = span_inputs(&embedded, span);
        let fwd = gru_run(g, &inputs, &gru.fwd, Dir::Fwd)?;
        let bwd = gru_run(g, &inputs, &gru.bwd, Dir::Bwd)?;
        let off = p_en - span.lo;
        let hf = dropout.apply(g, fwd[off], Site::Hidden)?;
        let hb = dropout.apply(g, bwd[off], Site::Hidden)?;
        let v = nominal_vector(g, hf, hb)?;
        Ok((BiSeq { span, fwd, bwd }, v))
    };

    if let Some(gru) = &p.gru_e1 {
        let (seq, v) = nominal(g, dropout, gru, ranges.e1, ex.p_e1)?;
        trace.h_e1 = Some(seq);
        trace.v_e1 = Some(v);
    }
    if let Some(gru) = &p.gru_e2 {
        let (seq, v) = nominal(g, dropout, gru, ranges.e2, ex.p_e2)?;
        trace.h_e2 = Some(seq);
        trace.v_e2 = Some(v);
    }

    if let Some(gru) = &p.gru_rel {
        let inputs = span_inputs(&embedded, rel_span);
        let fwd = gru_run(g, &inputs, &gru.fwd, Dir::Fwd)?;
        let bwd = gru_run(g, &inputs, &gru.bwd, Dir::Bwd)?;
        let mut fwd_cols = Vec::with_capacity(fwd.len());
        for &h in &fwd {
            fwd_cols.push(dropout.apply(g, h, Site::Hidden)?);
        }
        let mut bwd_cols = Vec::with_capacity(bwd.len());
        for &h in &bwd {
            bwd_cols.push(dropout.apply(g, h, Site::Hidden)?);
        }
        let w_att_fwd = p.w_att_fwd.ok_or_else(|| {
            Error::Contract("relation layer present but w_att.fwd missing".into())
        })?;
        let w_att_bwd = p.w_att_bwd.ok_or_else(|| {
            Error::Contract("relation layer present but w_att.bwd missing".into())
        })?;
        let (vf, af) = attention_pool(g, &fwd_cols, w_att_fwd)?;
        let (vb, ab) = attention_pool(g, &bwd_cols, w_att_bwd)?;
        trace.v_rel = Some(g.add(vf, vb)?);
        trace.alpha_fwd = Some(af);
        trace.alpha_bwd = Some(ab);
        trace.h_rel = Some(BiSeq {
            span: rel_span,
            fwd,
            bwd,
        });
    }

    trace.v_fin = match cfg.variant {
        Variant::Full => {
            let parts = [
                trace.v_e1.expect("full variant has e1 layer"),
                trace.v_rel.expect("full variant has rel layer"),
                trace.v_e2.expect("full variant has e2 layer"),
            ];
            g.concat(&parts)?
        }
        Variant::NominalsOnly => {
            let parts = [
                trace.v_e1.expect("nominals variant has e1 layer"),
                trace.v_e2.expect("nominals variant has e2 layer"),
            ];
            g.concat(&parts)?
        }
        Variant::RelationOnly | Variant::AttBgru => {
            trace.v_rel.expect("relation variant has rel layer")
        }
    };

    let v_in = dropout.apply(g, trace.v_fin, Site::Fin)?;
    let wv = g.matmul(p.w_c, v_in)?;
    trace.s_c = g.add(wv, p.b_c)?;
    Ok(trace)
}

/// The prediction rule: the max-valued directional class, except that a
/// score vector with every value negative predicts Other. Ties break to
/// the lowest index.
pub fn predict(scores: &[f64]) -> usize {
    let mut best = f64::NEG_INFINITY;
    let mut idx = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > best {
            best = s;
            idx = i;
        }
    }
    if best < 0.0 {
        OTHER_ID
    } else {
        idx
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{random_embeddings, Vocabulary};
    use rand::SeedableRng;

    fn example(n: usize, p_e1: usize, p_e2: usize) -> TokenizedExample {
        TokenizedExample {
            id: 1,
            token_ids: (0..n as u32).map(|i| i % 5).collect(),
            p_e1,
            p_e2,
            label_id: 0,
        }
    }

    fn tiny_cfg(variant: Variant) -> ModelConfig {
        ModelConfig {
            d_e: 2,
            d_h: 2,
            k: 1,
            variant,
            ..ModelConfig::default()
        }
    }

    fn tiny_params(cfg: &ModelConfig, seed: u64) -> ModelParams {
        let vocab = Vocabulary::new();
        let emb = random_embeddings(&vocab, cfg.d_e, seed);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        ModelParams::init(cfg, &emb, &mut rng)
    }

    #[test]
    fn ranges_of_the_phone_sentence() {
        let cfg = ModelConfig::default(); // k = 3
        let ex = example(11, 2, 8);
        let r = compute_ranges(&ex, &cfg);
        assert_eq!(r.e1, Span::new(0, 5));
        assert_eq!(r.e2, Span::new(5, 10));
        assert_eq!(r.rel, Span::new(2, 8));
    }

    #[test]
    fn ranges_clip_at_boundaries() {
        let cfg = ModelConfig::default();
        let mut ex = example(8, 0, 4);
        ex.p_e1 = 0;
        let r = compute_ranges(&ex, &cfg);
        assert_eq!(r.e1, Span::new(0, 3));
    }

    #[test]
    fn relation_range_follows_nominal_order() {
        let cfg = ModelConfig::default();
        let ex = example(10, 7, 3); // e2 before e1
        let r = compute_ranges(&ex, &cfg);
        assert_eq!(r.rel, Span::new(3, 7));
    }

    #[test]
    fn gru_with_zero_params_emits_zero_hidden_states() {
        let mut g = Graph::new();
        let zeros2 = vec![0.0; 4];
        let p = BoundGru {
            w_r: g.leaf(2, 2, &zeros2).unwrap(),
            u_r: g.leaf(2, 2, &zeros2).unwrap(),
            w_z: g.leaf(2, 2, &zeros2).unwrap(),
            u_z: g.leaf(2, 2, &zeros2).unwrap(),
            w_h: g.leaf(2, 2, &zeros2).unwrap(),
            u_h: g.leaf(2, 2, &zeros2).unwrap(),
        };
        let inputs: Vec<Value> = (0..4).map(|i| g.leaf_vec(&[i as f64, 1.0])).collect();
        for dir in [Dir::Fwd, Dir::Bwd] {
            let hs = gru_run(&mut g, &inputs, &p, dir).unwrap();
            for h in hs {
                assert_eq!(g.data(h), &[0.0, 0.0]);
            }
        }
    }

    #[test]
    fn gru_matches_scalar_recurrence_oracle() {
        // d_e = d_h = 1; independent plain-f64 evaluation of the update
        let (w_r, u_r, w_z, u_z, w_h, u_h) = (0.5, -0.3, 0.2, 0.4, 0.9, -0.7);
        let es = [1.0, -2.0, 0.5];
        let sigmoid = |x: f64| 1.0 / (1.0 + (-x).exp());
        let mut expect = Vec::new();
        let mut h = 0.0f64;
        for e in es {
            let r = sigmoid(w_r * e + u_r * h);
            let z = sigmoid(w_z * e + u_z * h);
            let ht = (w_h * e + u_h * (r * h)).tanh();
            h = z * h + (1.0 - z) * ht;
            expect.push(h);
        }

        let mut g = Graph::new();
        let p = BoundGru {
            w_r: g.leaf(1, 1, &[w_r]).unwrap(),
            u_r: g.leaf(1, 1, &[u_r]).unwrap(),
            w_z: g.leaf(1, 1, &[w_z]).unwrap(),
            u_z: g.leaf(1, 1, &[u_z]).unwrap(),
            w_h: g.leaf(1, 1, &[w_h]).unwrap(),
            u_h: g.leaf(1, 1, &[u_h]).unwrap(),
        };
        let inputs: Vec<Value> = es.iter().map(|&e| g.leaf_vec(&[e])).collect();
        let hs = gru_run(&mut g, &inputs, &p, Dir::Fwd).unwrap();
        for (h, want) in hs.iter().zip(&expect) {
            assert!((g.data(*h)[0] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn saturated_update_gate_carries_previous_hidden() {
        // large positive W_z pre-activation makes z ~ 1, so h_t ~ h_{t-1}
        // even though the candidate state is far from zero
        let mut g = Graph::new();
        let p = BoundGru {
            w_r: g.leaf(1, 1, &[0.0]).unwrap(),
            u_r: g.leaf(1, 1, &[0.0]).unwrap(),
            w_z: g.leaf(1, 1, &[50.0]).unwrap(),
            u_z: g.leaf(1, 1, &[0.0]).unwrap(),
            w_h: g.leaf(1, 1, &[2.0]).unwrap(),
            u_h: g.leaf(1, 1, &[0.0]).unwrap(),
        };
        let inputs: Vec<Value> = (0..3).map(|_| g.leaf_vec(&[1.0])).collect();
        let hs = gru_run(&mut g, &inputs, &p, Dir::Fwd).unwrap();
        let mut prev = 0.0;
        for h in hs {
            let cur = g.data(h)[0];
            assert!((cur - prev).abs() < 1e-6, "hidden state moved: {}", cur);
            prev = cur;
        }
    }

    #[test]
    fn empty_range_is_a_contract_error() {
        let mut g = Graph::new();
        let z = g.leaf(1, 1, &[0.0]).unwrap();
        let p = BoundGru {
            w_r: z,
            u_r: z,
            w_z: z,
            u_z: z,
            w_h: z,
            u_h: z,
        };
        assert!(matches!(
            gru_run(&mut g, &[], &p, Dir::Fwd),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn nominal_vector_sums_directions() {
        let mut g = Graph::new();
        let a = g.leaf_vec(&[1.0, 2.0]);
        let b = g.leaf_vec(&[3.0, 4.0]);
        let v = nominal_vector(&mut g, a, b).unwrap();
        assert_eq!(g.data(v), &[4.0, 6.0]);

        let za = g.leaf_vec(&[0.0, 0.0]);
        let zb = g.leaf_vec(&[0.0, 0.0]);
        let zv = nominal_vector(&mut g, za, zb).unwrap();
        assert_eq!(g.data(zv), &[0.0, 0.0]);
    }

    #[test]
    fn attention_single_column_is_identity() {
        let mut g = Graph::new();
        let c = g.leaf_vec(&[0.3, -0.7]);
        let w = g.leaf_vec(&[0.1, 0.2]);
        let (v, alpha) = attention_pool(&mut g, &[c], w).unwrap();
        assert_eq!(g.data(alpha), &[1.0]);
        assert_eq!(g.data(v), g.data(c));
    }

    #[test]
    fn zero_attention_vector_means_uniform_mean() {
        let mut g = Graph::new();
        let cols: Vec<Value> = vec![
            g.leaf_vec(&[1.0, 0.0]),
            g.leaf_vec(&[2.0, 2.0]),
            g.leaf_vec(&[3.0, 4.0]),
        ];
        let w = g.leaf_vec(&[0.0, 0.0]);
        let (v, alpha) = attention_pool(&mut g, &cols, w).unwrap();
        for &a in g.data(alpha) {
            assert!((a - 1.0 / 3.0).abs() < 1e-15);
        }
        assert!((g.data(v)[0] - 2.0).abs() < 1e-15);
        assert!((g.data(v)[1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn attention_matches_brute_force_recomputation() {
        use rand::Rng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let h: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect(); // 4 columns of dim 3
        let w: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();

        // oracle: exponentiate shifted scores, normalize, weighted-sum
        let scores: Vec<f64> = h
            .iter()
            .map(|col| col.iter().zip(&w).map(|(x, wi)| wi * x.tanh()).sum())
            .collect();
        let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = scores.iter().map(|s| (s - m).exp()).collect();
        let z: f64 = exps.iter().sum();
        let alpha_want: Vec<f64> = exps.iter().map(|e| e / z).collect();
        let mut v_want = vec![0.0; 3];
        for (col, a) in h.iter().zip(&alpha_want) {
            for (vi, x) in v_want.iter_mut().zip(col) {
                *vi += a * x;
            }
        }

        let mut g = Graph::new();
        let cols: Vec<Value> = h.iter().map(|c| g.leaf_vec(c)).collect();
        let wv = g.leaf_vec(&w);
        let (v, alpha) = attention_pool(&mut g, &cols, wv).unwrap();
        for (got, want) in g.data(alpha).iter().zip(&alpha_want) {
            assert!((got - want).abs() < 1e-12);
        }
        for (got, want) in g.data(v).iter().zip(&v_want) {
            assert!((got - want).abs() < 1e-12);
        }
        let total: f64 = g.data(alpha).iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_params_score_equals_bias() {
        let cfg = tiny_cfg(Variant::Full);
        let mut params = tiny_params(&cfg, 3);
        for a in params.arrays_mut() {
            a.data.fill(0.0);
        }
        for (i, v) in params.b_c.data.iter_mut().enumerate() {
            *v = i as f64 / 10.0 - 0.5;
        }
        let ex = example(7, 1, 4);
        let mut g = Graph::new();
        let bound = params.bind(&mut g).unwrap();
        let trace = forward(&mut g, &bound, &cfg, &ex, &mut DropoutCtx::Infer).unwrap();
        assert_eq!(g.data(trace.s_c), params.b_c.data.as_slice());
    }

    #[test]
    fn full_variant_shapes() {
        let cfg = ModelConfig::default(); // d_h = 100
        let params = tiny_params(&cfg, 4);
        let ex = example(11, 2, 8);
        let mut g = Graph::new();
        let bound = params.bind(&mut g).unwrap();
        let trace = forward(&mut g, &bound, &cfg, &ex, &mut DropoutCtx::Infer).unwrap();
        assert_eq!(g.shape(trace.v_fin), (300, 1));
        assert_eq!(g.shape(trace.s_c), (18, 1));
        for v in [trace.v_e1, trace.v_e2, trace.v_rel] {
            assert_eq!(g.shape(v.unwrap()), (100, 1));
        }
    }

    #[test]
    fn variant_consistency_full_vs_relation_only() {
        let cfg_full = tiny_cfg(Variant::Full);
        let cfg_rel = tiny_cfg(Variant::RelationOnly);
        let full = tiny_params(&cfg_full, 9);
        let mut rel = tiny_params(&cfg_rel, 10);
        // copy the shared pieces so the rel-layer computation is identical
        rel.embeddings = full.embeddings.clone();
        rel.gru_rel = full.gru_rel.clone();
        rel.w_att_fwd = full.w_att_fwd.clone();
        rel.w_att_bwd = full.w_att_bwd.clone();

        let ex = example(9, 2, 6);
        let run = |params: &ModelParams, cfg: &ModelConfig| {
            let mut g = Graph::new();
            let bound = params.bind(&mut g).unwrap();
            let t = forward(&mut g, &bound, cfg, &ex, &mut DropoutCtx::Infer).unwrap();
            g.data(t.v_rel.unwrap()).to_vec()
        };
        assert_eq!(run(&full, &cfg_full), run(&rel, &cfg_rel));
    }

    #[test]
    fn masking_mutation_outside_union_keeps_scores_bitwise() {
        let cfg = tiny_cfg(Variant::Full); // k = 1
        let params = tiny_params(&cfg, 11);
        let ex = example(12, 1, 4); // union covers 0..=5; tail is masked
        let run = |ex: &TokenizedExample| {
            let mut g = Graph::new();
            let bound = params.bind(&mut g).unwrap();
            let t = forward(&mut g, &bound, &cfg, ex, &mut DropoutCtx::Infer).unwrap();
            g.data(t.s_c).to_vec()
        };
        let base = run(&ex);
        for t in 6..12 {
            let mut mutated = ex.clone();
            mutated.token_ids[t] = (mutated.token_ids[t] + 3) % 5;
            assert_eq!(run(&mutated), base, "token {} leaked through the mask", t);
        }
    }

    #[test]
    fn predict_rule() {
        assert_eq!(predict(&[-1.0; 18]), OTHER_ID);

        let mut scores = [-1.0; 18];
        scores[3] = 5.0;
        assert_eq!(predict(&scores), 3);

        // max of exactly zero is NOT the exceptional all-negative case
        let mut zero_max = [-0.5; 18];
        zero_max[7] = 0.0;
        assert_eq!(predict(&zero_max), 7);
    }
}
