//! Shared fixtures for the integration suites: a synthetic corpus in the
//! official file format, the 20-sentence overfit set, and an independent
//! straight-line re-implementation of the forward scores.

#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rrgru::corpus::{parse_semeval_str, tokenize, TokenizedExample, Vocabulary};

/// (template with {A}/{B} slots, directional label); cue phrases are
/// unique per label so the task is learnable from lexical evidence.
const TEMPLATES: &[(&str, &str)] = &[
    ("the {A} caused the {B}", "Cause-Effect(e1,e2)"),
    ("the {A} resulted from the {B}", "Cause-Effect(e2,e1)"),
    ("the {A} is a part of the {B}", "Component-Whole(e1,e2)"),
    ("the {A} comprises a sturdy {B}", "Component-Whole(e2,e1)"),
    ("the {A} was inside the {B}", "Content-Container(e1,e2)"),
    ("the {A} was full of {B}", "Content-Container(e2,e1)"),
    ("the {A} moved into the {B}", "Entity-Destination(e1,e2)"),
    ("the {A} welcomed the arriving {B}", "Entity-Destination(e2,e1)"),
    ("the {A} came from the {B}", "Entity-Origin(e1,e2)"),
    ("the {A} is the source of the {B}", "Entity-Origin(e2,e1)"),
    ("the {A} is wielded by the {B}", "Instrument-Agency(e1,e2)"),
    ("the {A} operates with a {B}", "Instrument-Agency(e2,e1)"),
    ("the {A} belongs to the {B}", "Member-Collection(e1,e2)"),
    ("the {A} gathers many {B}", "Member-Collection(e2,e1)"),
    ("the {A} was about the {B}", "Message-Topic(e1,e2)"),
    ("the {A} was discussed in the {B}", "Message-Topic(e2,e1)"),
    ("the {A} was made by the {B}", "Product-Producer(e1,e2)"),
    ("the {A} manufactures the {B}", "Product-Producer(e2,e1)"),
    ("the {A} stood near the {B}", "Other"),
    ("the {A} appeared beside the {B}", "Other"),
];

const NOUNS: &[&str] = &[
    "machine", "bottle", "river", "garden", "engine", "letter", "farmer", "singer", "wheel",
    "basket", "village", "painter", "crowd", "story", "forest", "kitchen", "hammer", "worker",
    "artist", "signal", "market", "castle", "teacher", "bridge", "folder", "mixture", "parcel",
    "cellar", "writer", "orchard", "vessel", "miner", "choir", "fleet", "statue", "lantern",
];

const PREFIXES: &[&str] = &["", "yesterday", "reportedly", "after the meeting", "last week"];
const ADJECTIVES: &[&str] = &["", "old", "small", "bright", "heavy", "quiet", "rusty"];
const SUFFIXES: &[&str] = &["", "again", "as expected", "without any delay"];

/// A corpus of `n` blocks in the official SemEval text format, labels
/// drawn uniformly over the 20 templates (so every relation and Other
/// appear).
pub fn synthetic_corpus_text(n: usize, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = String::new();
    for i in 0..n {
        let (template, label) = TEMPLATES[rng.gen_range(0..TEMPLATES.len())];
        let a = NOUNS[rng.gen_range(0..NOUNS.len())];
        let b = NOUNS[rng.gen_range(0..NOUNS.len())];
        let adj_a = ADJECTIVES[rng.gen_range(0..ADJECTIVES.len())];
        let adj_b = ADJECTIVES[rng.gen_range(0..ADJECTIVES.len())];
        let wrap = |adj: &str, noun: &str, tag: u8| {
            let inner = if adj.is_empty() {
                noun.to_string()
            } else {
                format!("{} {}", adj, noun)
            };
            format!("<e{0}>{1}</e{0}>", tag, inner)
        };
        let mut sentence = template
            .replace("{A}", &wrap(adj_a, a, 1))
            .replace("{B}", &wrap(adj_b, b, 2));
        let prefix = PREFIXES[rng.gen_range(0..PREFIXES.len())];
        if !prefix.is_empty() {
            sentence = format!("{} {}", prefix, sentence);
        }
        let suffix = SUFFIXES[rng.gen_range(0..SUFFIXES.len())];
        if !suffix.is_empty() {
            sentence = format!("{} {}", sentence, suffix);
        }
        out.push_str(&format!("{}\t\"{}.\"\n{}\nComment:\n\n", i + 1, sentence, label));
    }
    out
}

/// Tokenize a corpus in official text format, growing a fresh vocabulary.
pub fn build_examples(text: &str) -> (Vec<TokenizedExample>, Vocabulary) {
    let raw = parse_semeval_str(text, "fixture").expect("fixture parses");
    let mut vocab = Vocabulary::new();
    let examples = raw
        .iter()
        .map(|ex| tokenize(ex, &mut vocab, false).expect("fixture tokenizes"))
        .collect();
    (examples, vocab)
}

/// Deterministic split into `n_train` + `n_valid` examples.
pub fn seeded_sample(
    examples: &[TokenizedExample],
    n_train: usize,
    n_valid: usize,
    seed: u64,
) -> (Vec<TokenizedExample>, Vec<TokenizedExample>) {
    assert!(examples.len() >= n_train + n_valid);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let train = order[..n_train].iter().map(|&i| examples[i].clone()).collect();
    let valid = order[n_train..n_train + n_valid]
        .iter()
        .map(|&i| examples[i].clone())
        .collect();
    (train, valid)
}

/// Twenty hand-written training sentences covering all nine relations,
/// both directions where natural, and Other.
pub fn twenty_sentences() -> String {
    let rows: Vec<(&str, &str)> = vec![
        ("The <e1>fire</e1> caused the <e2>damage</e2> in town.", "Cause-Effect(e1,e2)"),
        ("That <e1>collapse</e1> resulted from the <e2>quake</e2> itself.", "Cause-Effect(e2,e1)"),
        ("A <e1>wheel</e1> is a part of the <e2>wagon</e2> frame.", "Component-Whole(e1,e2)"),
        ("The <e1>house</e1> includes a small <e2>porch</e2> area.", "Component-Whole(e2,e1)"),
        ("The <e1>milk</e1> was inside the <e2>bottle</e2> all day.", "Content-Container(e1,e2)"),
        ("One <e1>crate</e1> was filled with fresh <e2>apples</e2> today.", "Content-Container(e2,e1)"),
        ("The <e1>letter</e1> was sent into the <e2>office</e2> quickly.", "Entity-Destination(e1,e2)"),
        ("The <e1>oil</e1> comes from the <e2>seeds</e2> after pressing.", "Entity-Origin(e1,e2)"),
        ("Juice <e1>flavor</e1> derived from ripe <e2>fruit</e2> peels.", "Entity-Origin(e1,e2)"),
        ("The <e1>writer</e1> works with a sharp <e2>pencil</e2> daily.", "Instrument-Agency(e2,e1)"),
        ("A <e1>chisel</e1> is used by the <e2>carver</e2> often.", "Instrument-Agency(e1,e2)"),
        ("Every <e1>singer</e1> belongs to the large <e2>choir</e2> group.", "Member-Collection(e1,e2)"),
        ("The <e1>fleet</e1> consists of many fast <e2>ships</e2> now.", "Member-Collection(e2,e1)"),
        ("Her <e1>lecture</e1> was about ancient <e2>history</e2> topics.", "Message-Topic(e1,e2)"),
        ("The <e1>news</e1> described the recent <e2>storm</e2> events.", "Message-Topic(e1,e2)"),
        ("The <e1>baker</e1> produced a warm <e2>loaf</e2> this morning.", "Product-Producer(e2,e1)"),
        ("A <e1>statue</e1> was made by the <e2>artist</e2> herself.", "Product-Producer(e1,e2)"),
        ("The <e1>dog</e1> sat near the old <e2>fence</e2> post.", "Other"),
        ("Some <e1>clouds</e1> drifted over the calm <e2>lake</e2> water.", "Other"),
        ("The <e1>train</e1> passed the empty <e2>station</e2> slowly.", "Other"),
    ];
    let mut out = String::new();
    for (i, (text, label)) in rows.iter().enumerate() {
        out.push_str(&format!("{}\t\"{}\"\n{}\nComment:\n\n", i + 1, text, label));
    }
    out
}

pub mod oracle {
    //! Straight-line evaluation of the score vector from raw arrays; no
    //! code shared with the engine or the model.

    use std::collections::HashMap;

    #[derive(Clone)]
    pub struct Mat {
        pub rows: usize,
        pub cols: usize,
        pub data: Vec<f64>,
    }

    fn sigmoid(x: f64) -> f64 {
        1.0 / (1.0 + (-x).exp())
    }

    fn matvec(m: &Mat, x: &[f64]) -> Vec<f64> {
        assert_eq!(m.cols, x.len());
        (0..m.rows)
            .map(|i| (0..m.cols).map(|j| m.data[i * m.cols + j] * x[j]).sum())
            .collect()
    }

    fn column(m: &Mat, j: usize) -> Vec<f64> {
        (0..m.rows).map(|i| m.data[i * m.cols + j]).collect()
    }

    #[allow(clippy::too_many_arguments)]
    fn gru_direction(
        arrays: &HashMap<String, Mat>,
        prefix: &str,
        embedded: &[Vec<f64>],
        forward_direction: bool,
    ) -> Vec<Vec<f64>> {
        let get = |suffix: &str| &arrays[&format!("{}.{}", prefix, suffix)];
        let (w_r, u_r) = (get("W_r"), get("U_r"));
        let (w_z, u_z) = (get("W_z"), get("U_z"));
        let (w, u) = (get("W"), get("U"));
        let d_h = w_r.rows;
        let t_len = embedded.len();
        let mut hidden = vec![vec![0.0; d_h]; t_len];
        let mut h_prev = vec![0.0; d_h];
        let order: Vec<usize> = if forward_direction {
            (0..t_len).collect()
        } else {
            (0..t_len).rev().collect()
        };
        for t in order {
            let e = &embedded[t];
            let r: Vec<f64> = matvec(w_r, e)
                .iter()
                .zip(matvec(u_r, &h_prev))
                .map(|(a, b)| sigmoid(a + b))
                .collect();
            let z: Vec<f64> = matvec(w_z, e)
                .iter()
                .zip(matvec(u_z, &h_prev))
                .map(|(a, b)| sigmoid(a + b))
                .collect();
            let rh: Vec<f64> = r.iter().zip(&h_prev).map(|(a, b)| a * b).collect();
            let h_tilde: Vec<f64> = matvec(w, e)
                .iter()
                .zip(matvec(u, &rh))
                .map(|(a, b)| (a + b).tanh())
                .collect();
            let h: Vec<f64> = z
                .iter()
                .zip(&h_prev)
                .zip(&h_tilde)
                .map(|((zi, hp), ht)| zi * hp + (1.0 - zi) * ht)
                .collect();
            hidden[t] = h.clone();
            h_prev = h;
        }
        hidden
    }

    fn attention(arrays: &HashMap<String, Mat>, w_att_name: &str, hidden: &[Vec<f64>]) -> Vec<f64> {
        let w_att = &arrays[w_att_name];
        let scores: Vec<f64> = hidden
            .iter()
            .map(|h| h.iter().zip(&w_att.data).map(|(x, w)| w * x.tanh()).sum())
            .collect();
        let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
        let z: f64 = exps.iter().sum();
        let d_h = hidden[0].len();
        let mut v = vec![0.0; d_h];
        for (h, e) in hidden.iter().zip(&exps) {
            let a = e / z;
            for (vi, x) in v.iter_mut().zip(h) {
                *vi += a * x;
            }
        }
        v
    }

    /// Score vector for one example, recomputed from first principles.
    pub fn forward_scores(
        arrays: &HashMap<String, Mat>,
        variant: &str,
        k: usize,
        token_ids: &[u32],
        p_e1: usize,
        p_e2: usize,
    ) -> Vec<f64> {
        let n = token_ids.len();
        let emb = &arrays["embeddings"];
        let embed_span = |lo: usize, hi: usize| -> Vec<Vec<f64>> {
            (lo..=hi)
                .map(|t| column(emb, token_ids[t] as usize))
                .collect()
        };
        let window = |p: usize| (p.saturating_sub(k), (p + k).min(n - 1));

        let nominal_vec = |layer: &str, p: usize| -> Vec<f64> {
            let (lo, hi) = window(p);
            let inputs = embed_span(lo, hi);
            let fwd = gru_direction(arrays, &format!("gru.{}.fwd", layer), &inputs, true);
            let bwd = gru_direction(arrays, &format!("gru.{}.bwd", layer), &inputs, false);
            fwd[p - lo]
                .iter()
                .zip(&bwd[p - lo])
                .map(|(a, b)| a + b)
                .collect()
        };

        let rel_vec = |lo: usize, hi: usize| -> Vec<f64> {
            let inputs = embed_span(lo, hi);
            let fwd = gru_direction(arrays, "gru.rel.fwd", &inputs, true);
            let bwd = gru_direction(arrays, "gru.rel.bwd", &inputs, false);
            let vf = attention(arrays, "w_att.fwd", &fwd);
            let vb = attention(arrays, "w_att.bwd", &bwd);
            vf.iter().zip(&vb).map(|(a, b)| a + b).collect()
        };

        let v_fin: Vec<f64> = match variant {
            "full" => {
                let v1 = nominal_vec("e1", p_e1);
                let vr = rel_vec(p_e1.min(p_e2), p_e1.max(p_e2));
                let v2 = nominal_vec("e2", p_e2);
                v1.into_iter().chain(vr).chain(v2).collect()
            }
            "relation_only" => rel_vec(p_e1.min(p_e2), p_e1.max(p_e2)),
            "nominals_only" => {
                let v1 = nominal_vec("e1", p_e1);
                let v2 = nominal_vec("e2", p_e2);
                v1.into_iter().chain(v2).collect()
            }
            "att_bgru" => rel_vec(0, n - 1),
            other => panic!("unknown variant {}", other),
        };

        let w_c = &arrays["W_c"];
        let b_c = &arrays["b_c"];
        matvec(w_c, &v_fin)
            .iter()
            .zip(&b_c.data)
            .map(|(a, b)| a + b)
            .collect()
    }
}

/// Extract raw arrays by name for the oracle.
pub fn arrays_of(params: &rrgru::net::ModelParams) -> std::collections::HashMap<String, oracle::Mat> {
    params
        .arrays()
        .into_iter()
        .map(|a| {
            (
                a.name.clone(),
                oracle::Mat {
                    rows: a.rows,
                    cols: a.cols,
                    data: a.data.clone(),
                },
            )
        })
        .collect()
}
