//! SemEval-2010 Task 8 ingestion: file parsing, tokenization with position
//! indicators kept as single words, vocabulary building, pretrained
//! embedding loading, label encoding, and k-fold splitting.

mod embeddings;
mod labels;

pub use embeddings::{load_embeddings, random_embeddings, CoverageStats, EmbeddingMatrix};
pub use labels::{
    Direction, LabelSet, N_DIRECTIONAL, N_LABELS, N_RELATIONS, OTHER_ID, RELATION_NAMES,
};

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const UNK_TOKEN: &str = "<unk>";
pub const E1_OPEN: &str = "<e1>";
pub const E1_CLOSE: &str = "</e1>";
pub const E2_OPEN: &str = "<e2>";
pub const E2_CLOSE: &str = "</e2>";

pub const UNK_ID: u32 = 0;

/// One sentence as read from the dataset file, markup still inline.
#[derive(Debug, Clone, PartialEq)]
pub struct RawExample {
    pub id: u32,
    pub text: String,
    pub label: String,
}

/// The unit of training and evaluation: token ids with nominal positions.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenizedExample {
    pub id: u32,
    pub token_ids: Vec<u32>,
    /// Index of the first content token inside the e1 span (0-based).
    pub p_e1: usize,
    pub p_e2: usize,
    pub label_id: usize,
}

impl TokenizedExample {
    pub fn len(&self) -> usize {
        self.token_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.token_ids.is_empty()
    }
}

/// Token-to-id map with reserved ids for the UNK token and the four
/// position indicators.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    tokens: Vec<String>,
    ids: HashMap<String, u32>,
}

impl Vocabulary {
    pub fn new() -> Self {
        let mut v = Vocabulary {
            tokens: Vec::new(),
            ids: HashMap::new(),
        };
        for t in [UNK_TOKEN, E1_OPEN, E1_CLOSE, E2_OPEN, E2_CLOSE] {
            v.intern(t);
        }
        v
    }

    fn intern(&mut self, token: &str) -> u32 {
        if let Some(&id) = self.ids.get(token) {
            return id;
        }
        let id = self.tokens.len() as u32;
        self.tokens.push(token.to_string());
        self.ids.insert(token.to_string(), id);
        id
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.ids.get(token).copied()
    }

    pub fn token(&self, id: u32) -> &str {
        &self.tokens[id as usize]
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &str)> {
        self.tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (i as u32, t.as_str()))
    }

    /// FNV-1a over tokens in id order; checkpoints carry this to refuse
    /// evaluation against a different vocabulary.
    pub fn hash64(&self) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        for t in &self.tokens {
            for b in t.as_bytes() {
                h ^= *b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
            h ^= 0xff;
            h = h.wrapping_mul(0x100000001b3);
        }
        h
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for (id, tok) in self.iter() {
            out.push_str(&format!("{}\t{}\n", id, tok));
        }
        fs::write(path, out).map_err(|e| Error::io(path.display(), e))
    }

    pub fn read_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path.display(), e))?;
        let mut v = Vocabulary {
            tokens: Vec::new(),
            ids: HashMap::new(),
        };
        for (lineno, line) in text.lines().enumerate() {
            let (id, tok) = line.split_once('\t').ok_or_else(|| Error::Parse {
                path: path.display().to_string(),
                line: lineno + 1,
                msg: "expected <id>\\t<token>".into(),
            })?;
            let id: u32 = id.parse().map_err(|_| Error::Parse {
                path: path.display().to_string(),
                line: lineno + 1,
                msg: format!("bad vocabulary id {:?}", id),
            })?;
            if id as usize != v.tokens.len() {
                return Err(Error::Parse {
                    path: path.display().to_string(),
                    line: lineno + 1,
                    msg: format!("non-contiguous vocabulary id {}", id),
                });
            }
            v.tokens.push(tok.to_string());
            v.ids.insert(tok.to_string(), id);
        }
        for t in [UNK_TOKEN, E1_OPEN, E1_CLOSE, E2_OPEN, E2_CLOSE] {
            if v.id(t).is_none() {
                return Err(Error::Parse {
                    path: path.display().to_string(),
                    line: 0,
                    msg: format!("vocabulary is missing reserved token {:?}", t),
                });
            }
        }
        Ok(v)
    }
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::new()
    }
}

// ── Dataset file parsing ─────────────────────────────────────────────

/// Parse the official SemEval-2010 Task 8 text format: blocks of a
/// numbered quoted sentence line, a relation line, a Comment line, and a
/// blank separator.
pub fn parse_semeval(path: &Path) -> Result<Vec<RawExample>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display(), e))?;
    parse_semeval_str(&text, &path.display().to_string())
}

pub fn parse_semeval_str(text: &str, path: &str) -> Result<Vec<RawExample>> {
    let labels = LabelSet::new();
    let lines: Vec<&str> = text.lines().map(|l| l.trim_end_matches('\r')).collect();
    let mut examples = Vec::new();
    let mut i = 0;
    while i < lines.len() {
        if lines[i].trim().is_empty() {
            i += 1;
            continue;
        }
        let lineno = i + 1;
        let (id, sentence) = parse_sentence_line(lines[i], path, lineno)?;

        let rel_line = lines.get(i + 1).copied().unwrap_or("");
        if rel_line.trim().is_empty() {
            return Err(Error::Parse {
                path: path.to_string(),
                line: lineno + 1,
                msg: "missing relation line".into(),
            });
        }
        let label = rel_line.trim();
        if labels.id(label).is_none() {
            return Err(Error::Label {
                path: path.to_string(),
                line: lineno + 1,
                label: label.to_string(),
            });
        }

        let comment_line = lines.get(i + 2).copied().unwrap_or("");
        if !comment_line.trim_start().starts_with("Comment") {
            return Err(Error::Parse {
                path: path.to_string(),
                line: lineno + 2,
                msg: "missing Comment line".into(),
            });
        }

        validate_markup(&sentence, path, lineno)?;
        examples.push(RawExample {
            id,
            text: sentence,
            label: label.to_string(),
        });
        i += 3;
    }
    Ok(examples)
}

/// Lenient variant for prediction input: the relation and Comment lines
/// are optional, and an absent label becomes Other.
pub fn parse_semeval_lenient(path: &Path) -> Result<Vec<RawExample>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display(), e))?;
    let labels = LabelSet::new();
    let path_str = path.display().to_string();
    let lines: Vec<&str> = text.lines().map(|l| l.trim_end_matches('\r')).collect();
    let mut examples = Vec::new();
    let mut i = 0;
    while i < lines.len() {
        if lines[i].trim().is_empty() {
            i += 1;
            continue;
        }
        let lineno = i + 1;
        let (id, sentence) = parse_sentence_line(lines[i], &path_str, lineno)?;
        validate_markup(&sentence, &path_str, lineno)?;
        i += 1;
        let mut label = "Other".to_string();
        if i < lines.len() && labels.id(lines[i].trim()).is_some() {
            label = lines[i].trim().to_string();
            i += 1;
        }
        if i < lines.len() && lines[i].trim_start().starts_with("Comment") {
            i += 1;
        }
        examples.push(RawExample {
            id,
            text: sentence,
            label,
        });
    }
    Ok(examples)
}

fn parse_sentence_line(line: &str, path: &str, lineno: usize) -> Result<(u32, String)> {
    let err = |msg: String| Error::Parse {
        path: path.to_string(),
        line: lineno,
        msg,
    };
    let (id, rest) = line
        .split_once('\t')
        .ok_or_else(|| err("expected <id>\\t\"<sentence>\"".into()))?;
    let id: u32 = id
        .trim()
        .parse()
        .map_err(|_| err(format!("bad sentence id {:?}", id)))?;
    let rest = rest.trim();
    if rest.len() < 2 || !rest.starts_with('"') || !rest.ends_with('"') {
        return Err(err("sentence is not double-quoted".into()));
    }
    Ok((id, rest[1..rest.len() - 1].to_string()))
}

fn validate_markup(sentence: &str, path: &str, lineno: usize) -> Result<()> {
    let err = |msg: String| Error::Parse {
        path: path.to_string(),
        line: lineno,
        msg,
    };
    for tag in [E1_OPEN, E1_CLOSE, E2_OPEN, E2_CLOSE] {
        if sentence.matches(tag).count() != 1 {
            return Err(err(format!("expected exactly one {}", tag)));
        }
    }
    let pos = |tag: &str| sentence.find(tag).unwrap();
    let (o1, c1, o2, c2) = (pos(E1_OPEN), pos(E1_CLOSE), pos(E2_OPEN), pos(E2_CLOSE));
    if !(o1 < c1 && o2 < c2 && (c1 < o2 || c2 < o1)) {
        return Err(err("nominal spans are not properly nested".into()));
    }
    Ok(())
}

// ── Tokenization ─────────────────────────────────────────────────────

const DETACH: [char; 10] = ['.', ',', '!', '?', ';', ':', '\'', '"', '(', ')'];

fn split_tokens(text: &str) -> Vec<String> {
    // space out the markup so indicators become standalone words
    let spaced = text
        .replace(E1_OPEN, &format!(" {} ", E1_OPEN))
        .replace(E1_CLOSE, &format!(" {} ", E1_CLOSE))
        .replace(E2_OPEN, &format!(" {} ", E2_OPEN))
        .replace(E2_CLOSE, &format!(" {} ", E2_CLOSE))
        .to_lowercase();
    let mut tokens = Vec::new();
    for word in spaced.split_whitespace() {
        let chars: Vec<char> = word.chars().collect();
        let mut lo = 0;
        let mut hi = chars.len();
        while lo < hi && DETACH.contains(&chars[lo]) {
            lo += 1;
        }
        while hi > lo && DETACH.contains(&chars[hi - 1]) {
            hi -= 1;
        }
        for &c in &chars[..lo] {
            tokens.push(c.to_string());
        }
        if lo < hi {
            tokens.push(chars[lo..hi].iter().collect());
        }
        for &c in &chars[hi..] {
            tokens.push(c.to_string());
        }
    }
    tokens
}

/// Turn a parsed sentence into token ids. Markup becomes indicator tokens;
/// `p_en` is the index of the first content token inside each span. When
/// `frozen` is set unseen tokens map to UNK instead of growing the
/// vocabulary.
pub fn tokenize(ex: &RawExample, vocab: &mut Vocabulary, frozen: bool) -> Result<TokenizedExample> {
    let labels = LabelSet::new();
    let label_id = labels.id(&ex.label).ok_or_else(|| Error::Contract(format!(
        "example {}: unknown label {:?}",
        ex.id, ex.label
    )))?;

    let tokens = split_tokens(&ex.text);
    let find = |tag: &str| tokens.iter().position(|t| t == tag);
    let o1 = find(E1_OPEN);
    let c1 = find(E1_CLOSE);
    let o2 = find(E2_OPEN);
    let c2 = find(E2_CLOSE);
    let (o1, c1, o2, c2) = match (o1, c1, o2, c2) {
        (Some(a), Some(b), Some(c), Some(d)) => (a, b, c, d),
        _ => {
            return Err(Error::Contract(format!(
                "example {}: missing nominal markup",
                ex.id
            )))
        }
    };
    if c1 == o1 + 1 || c2 == o2 + 1 {
        return Err(Error::Contract(format!(
            "example {}: empty nominal span",
            ex.id
        )));
    }
    let p_e1 = o1 + 1;
    let p_e2 = o2 + 1;
    debug_assert!(p_e1 < c1 && p_e2 < c2);

    let token_ids = tokens
        .iter()
        .map(|t| {
            if frozen {
                vocab.id(t).unwrap_or(UNK_ID)
            } else {
                vocab.intern(t)
            }
        })
        .collect();

    Ok(TokenizedExample {
        id: ex.id,
        token_ids,
        p_e1,
        p_e2,
        label_id,
    })
}

// ── K-fold splitting ─────────────────────────────────────────────────

/// Deterministic shuffle then k near-equal disjoint folds; element `i` of
/// the result uses fold `i` as validation and the rest as training.
pub fn kfold_split(
    examples: &[TokenizedExample],
    k: usize,
    seed: u64,
) -> Result<Vec<(Vec<TokenizedExample>, Vec<TokenizedExample>)>> {
    if k < 2 {
        return Err(Error::Contract(format!("kfold requires k >= 2, got {}", k)));
    }
    if examples.len() < k {
        return Err(Error::Contract(format!(
            "kfold requires at least k = {} examples, got {}",
            k,
            examples.len()
        )));
    }
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    let n = examples.len();
    let base = n / k;
    let extra = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for i in 0..k {
        let size = base + usize::from(i < extra);
        folds.push(&order[start..start + size]);
        start += size;
    }

    let mut out = Vec::with_capacity(k);
    for i in 0..k {
        let valid: Vec<TokenizedExample> = folds[i].iter().map(|&j| examples[j].clone()).collect();
        let train: Vec<TokenizedExample> = (0..k)
            .filter(|&f| f != i)
            .flat_map(|f| folds[f].iter().map(|&j| examples[j].clone()))
            .collect();
        out.push((train, valid));
    }
    Ok(out)
}

// ── Tokenized-corpus cache ───────────────────────────────────────────

/// Line format: `id \t space-joined token ids \t p_e1 \t p_e2 \t label_id`.
pub fn write_cache(path: &Path, examples: &[TokenizedExample]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path.display(), e))?;
    for ex in examples {
        let ids: Vec<String> = ex.token_ids.iter().map(|i| i.to_string()).collect();
        writeln!(
            f,
            "{}\t{}\t{}\t{}\t{}",
            ex.id,
            ids.join(" "),
            ex.p_e1,
            ex.p_e2,
            ex.label_id
        )
        .map_err(|e| Error::io(path.display(), e))?;
    }
    Ok(())
}

pub fn read_cache(path: &Path) -> Result<Vec<TokenizedExample>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display(), e))?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let err = |msg: String| Error::Parse {
            path: path.display().to_string(),
            line: lineno + 1,
            msg,
        };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 5 {
            return Err(err(format!("expected 5 fields, got {}", fields.len())));
        }
        let id = fields[0].parse().map_err(|_| err("bad id".into()))?;
        let token_ids = fields[1]
            .split(' ')
            .map(|t| t.parse::<u32>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| err("bad token id".into()))?;
        let p_e1 = fields[2].parse().map_err(|_| err("bad p_e1".into()))?;
        let p_e2 = fields[3].parse().map_err(|_| err("bad p_e2".into()))?;
        let label_id: usize = fields[4].parse().map_err(|_| err("bad label id".into()))?;
        if label_id >= N_LABELS {
            return Err(err(format!("label id {} out of range", label_id)));
        }
        out.push(TokenizedExample {
            id,
            token_ids,
            p_e1,
            p_e2,
            label_id,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const PHONE_BLOCK: &str = concat!(
        "1\t\"The <e1>phone</e1> went into the <e2>washer</e2>.\"\n",
        "Entity-Destination(e1,e2)\n",
        "Comment:\n",
        "\n",
    );

    #[test]
    fn parse_single_block() {
        let exs = parse_semeval_str(PHONE_BLOCK, "mem").unwrap();
        assert_eq!(exs.len(), 1);
        assert_eq!(exs[0].id, 1);
        assert_eq!(exs[0].label, "Entity-Destination(e1,e2)");
        assert!(exs[0].text.contains("went into the"));
    }

    #[test]
    fn parse_missing_relation_line_reports_line_number() {
        let text = "3\t\"A <e1>a</e1> b <e2>c</e2>.\"\n\nComment:\n";
        let err = parse_semeval_str(text, "mem").unwrap_err();
        match err {
            Error::Parse { line, ref msg, .. } => {
                assert_eq!(line, 2);
                assert!(msg.contains("relation"), "{}", msg);
            }
            other => panic!("unexpected {:?}", other),
        }
    }

    #[test]
    fn parse_unknown_relation_is_a_label_error() {
        let text = "3\t\"A <e1>a</e1> b <e2>c</e2>.\"\nMade-Up(e1,e2)\nComment:\n";
        let err = parse_semeval_str(text, "mem").unwrap_err();
        assert!(matches!(err, Error::Label { ref label, .. } if label == "Made-Up(e1,e2)"));
    }

    #[test]
    fn tokenize_phone_sentence_matches_expected_layout() {
        let exs = parse_semeval_str(PHONE_BLOCK, "mem").unwrap();
        let mut vocab = Vocabulary::new();
        let tok = tokenize(&exs[0], &mut vocab, false).unwrap();
        let tokens: Vec<&str> = tok.token_ids.iter().map(|&i| vocab.token(i)).collect();
        assert_eq!(
            tokens,
            vec![
                "the", "<e1>", "phone", "</e1>", "went", "into", "the", "<e2>", "washer",
                "</e2>", "."
            ]
        );
        assert_eq!(tok.p_e1, 2);
        assert_eq!(tok.p_e2, 8);
        // indicator immediately precedes the nominal position
        assert_eq!(vocab.token(tok.token_ids[tok.p_e1 - 1]), E1_OPEN);
        assert_eq!(vocab.token(tok.token_ids[tok.p_e2 - 1]), E2_OPEN);
    }

    #[test]
    fn tokenize_multiword_nominal_points_at_first_content_token() {
        let ex = RawExample {
            id: 7,
            text: "The <e1>coffee machine</e1> sits in the <e2>kitchen</e2>.".into(),
            label: "Component-Whole(e1,e2)".into(),
        };
        let mut vocab = Vocabulary::new();
        let tok = tokenize(&ex, &mut vocab, false).unwrap();
        assert_eq!(vocab.token(tok.token_ids[tok.p_e1]), "coffee");
    }

    #[test]
    fn tokenize_frozen_maps_novel_words_to_unk() {
        let ex = RawExample {
            id: 9,
            text: "a <e1>zyzzy</e1> near the <e2>house</e2>".into(),
            label: "Other".into(),
        };
        let mut vocab = Vocabulary::new();
        let tok = tokenize(&ex, &mut vocab, true).unwrap();
        assert_eq!(tok.token_ids[tok.p_e1], UNK_ID);
        assert_eq!(vocab.len(), 5); // unchanged: reserved tokens only
    }

    #[test]
    fn punctuation_detaches_from_both_ends() {
        assert_eq!(
            split_tokens("(Hello), \"world\"! don't..."),
            vec!["(", "hello", ")", ",", "\"", "world", "\"", "!", "don't", ".", ".", "."]
        );
    }

    #[test]
    fn kfold_singleton_folds() {
        let exs: Vec<TokenizedExample> = (0..10)
            .map(|i| TokenizedExample {
                id: i,
                token_ids: vec![1, 5, 2, 3, 6],
                p_e1: 2,
                p_e2: 4,
                label_id: 0,
            })
            .collect();
        let folds = kfold_split(&exs, 10, 42).unwrap();
        assert_eq!(folds.len(), 10);
        let mut seen = Vec::new();
        for (train, valid) in &folds {
            assert_eq!(valid.len(), 1);
            assert_eq!(train.len(), 9);
            seen.push(valid[0].id);
        }
        seen.sort_unstable();
        assert_eq!(seen, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn kfold_8000_gives_folds_of_800() {
        let exs: Vec<TokenizedExample> = (0..8000)
            .map(|i| TokenizedExample {
                id: i,
                token_ids: vec![1, 5, 2, 3, 6],
                p_e1: 2,
                p_e2: 4,
                label_id: (i % 19) as usize,
            })
            .collect();
        let folds = kfold_split(&exs, 10, 7).unwrap();
        for (train, valid) in &folds {
            assert_eq!(valid.len(), 800);
            assert_eq!(train.len(), 7200);
        }
    }

    #[test]
    fn kfold_is_seed_deterministic() {
        let exs: Vec<TokenizedExample> = (0..23)
            .map(|i| TokenizedExample {
                id: i,
                token_ids: vec![1, 5, 2, 3, 6],
                p_e1: 2,
                p_e2: 4,
                label_id: 0,
            })
            .collect();
        let a = kfold_split(&exs, 4, 99).unwrap();
        let b = kfold_split(&exs, 4, 99).unwrap();
        assert_eq!(a, b);
        assert!(matches!(kfold_split(&exs, 24, 0), Err(Error::Contract(_))));
    }

    #[test]
    fn cache_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.tsv");
        let exs = vec![
            TokenizedExample {
                id: 4,
                token_ids: vec![0, 1, 9, 2, 3, 12, 4],
                p_e1: 2,
                p_e2: 5,
                label_id: 18,
            },
            TokenizedExample {
                id: 5,
                token_ids: vec![1, 7, 2, 8, 3, 9, 4],
                p_e1: 1,
                p_e2: 5,
                label_id: 3,
            },
        ];
        write_cache(&path, &exs).unwrap();
        assert_eq!(read_cache(&path).unwrap(), exs);
    }

    #[test]
    fn reconstruction_preserves_word_order() {
        // round-trip: tokens minus indicators and case still spell the sentence
        let exs = parse_semeval_str(PHONE_BLOCK, "mem").unwrap();
        let mut vocab = Vocabulary::new();
        let tok = tokenize(&exs[0], &mut vocab, false).unwrap();
        let words: Vec<&str> = tok
            .token_ids
            .iter()
            .map(|&i| vocab.token(i))
            .filter(|t| ![E1_OPEN, E1_CLOSE, E2_OPEN, E2_CLOSE].contains(t))
            .collect();
        assert_eq!(
            words.join(" "),
            "the phone went into the washer ."
        );
    }
}
