//! Pretrained word-vector loading in the GloVe text format.

use std::fs;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::Vocabulary;

/// Dense `d_e x |V|` matrix, one column per vocabulary id, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub d_e: usize,
    pub vocab_size: usize,
    pub data: Vec<f64>,
}

impl EmbeddingMatrix {
    pub fn column(&self, id: u32) -> Vec<f64> {
        (0..self.d_e)
            .map(|r| self.data[r * self.vocab_size + id as usize])
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoverageStats {
    /// Vocabulary tokens found in the embedding file.
    pub found: usize,
    /// Vocabulary tokens initialized randomly (OOV, indicators, UNK).
    pub random: usize,
    pub vocab_size: usize,
}

/// Every column starts uniform in [-0.25, 0.25] from the seed; tokens
/// present in the file are then overwritten, so the result does not depend
/// on file line order.
pub fn random_embeddings(vocab: &Vocabulary, d_e: usize, seed: u64) -> EmbeddingMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocab_size = vocab.len();
    let mut data = vec![0.0; d_e * vocab_size];
    // column-by-column so each token's vector is a contiguous draw
    for j in 0..vocab_size {
        for r in 0..d_e {
            data[r * vocab_size + j] = rng.gen_range(-0.25..=0.25);
        }
    }
    EmbeddingMatrix {
        d_e,
        vocab_size,
        data,
    }
}

/// Load GloVe text vectors for in-vocabulary tokens; everything else keeps
/// its seeded random column.
pub fn load_embeddings(
    path: &Path,
    vocab: &Vocabulary,
    d_e: usize,
    seed: u64,
) -> Result<(EmbeddingMatrix, CoverageStats)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display(), e))?;
    let mut matrix = random_embeddings(vocab, d_e, seed);
    let mut covered = vec![false; vocab.len()];

    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let token = parts.next().unwrap();
        let values: Vec<&str> = parts.collect();
        if values.len() != d_e {
            return Err(Error::Format {
                path: path.display().to_string(),
                line: lineno + 1,
                msg: format!("expected {} values, got {}", d_e, values.len()),
            });
        }
        let id = match vocab.id(token) {
            Some(id) => id as usize,
            None => continue,
        };
        for (r, v) in values.iter().enumerate() {
            let x: f64 = v.parse().map_err(|_| Error::Format {
                path: path.display().to_string(),
                line: lineno + 1,
                msg: format!("bad number {:?}", v),
            })?;
            matrix.data[r * matrix.vocab_size + id] = x;
        }
        covered[id] = true;
    }

    let found = covered.iter().filter(|&&c| c).count();
    let stats = CoverageStats {
        found,
        random: vocab.len() - found,
        vocab_size: vocab.len(),
    };
    Ok((matrix, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::E1_OPEN;
    use std::io::Write;

    fn vocab_with(words: &[&str]) -> Vocabulary {
        let mut v = Vocabulary::new();
        for w in words {
            let ex = crate::corpus::RawExample {
                id: 0,
                text: format!("<e1>{}</e1> x <e2>y</e2>", w),
                label: "Other".into(),
            };
            crate::corpus::tokenize(&ex, &mut v, false).unwrap();
        }
        v
    }

    #[test]
    fn file_vector_is_copied_verbatim() {
        let vocab = vocab_with(&["the"]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vec.txt");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, "the 0.1 0.2 0.3").unwrap();
        writeln!(f, "unrelated 9.0 9.0 9.0").unwrap();
        drop(f);
        let (m, stats) = load_embeddings(&path, &vocab, 3, 1).unwrap();
        let id = vocab.id("the").unwrap();
        assert_eq!(m.column(id), vec![0.1, 0.2, 0.3]);
        assert_eq!(stats.found, 1);
        assert_eq!(stats.random, vocab.len() - 1);
    }

    #[test]
    fn indicator_tokens_get_bounded_random_columns() {
        let vocab = vocab_with(&["the"]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vec.txt");
        std::fs::write(&path, "the 0.5 0.5 0.5\n").unwrap();
        let (m, _) = load_embeddings(&path, &vocab, 3, 7).unwrap();
        let id = vocab.id(E1_OPEN).unwrap();
        for v in m.column(id) {
            assert!(v.abs() <= 0.25, "indicator entry {} out of bound", v);
        }
    }

    #[test]
    fn wrong_dimension_line_is_a_format_error() {
        let vocab = vocab_with(&["the"]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vec.txt");
        std::fs::write(&path, "the 0.5 0.5 0.5\nbad 1.0 2.0\n").unwrap();
        let err = load_embeddings(&path, &vocab, 3, 7).unwrap_err();
        match err {
            Error::Format { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {:?}", other),
        }
    }

    #[test]
    fn load_is_seed_deterministic_and_idempotent() {
        let vocab = vocab_with(&["alpha", "beta"]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vec.txt");
        std::fs::write(&path, "alpha 1.0 -1.0\n").unwrap();
        let (a, _) = load_embeddings(&path, &vocab, 2, 11).unwrap();
        let (b, _) = load_embeddings(&path, &vocab, 2, 11).unwrap();
        assert_eq!(a, b);
        let (c, _) = load_embeddings(&path, &vocab, 2, 12).unwrap();
        assert_ne!(a, c);
    }
}
