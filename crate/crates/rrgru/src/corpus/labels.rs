//! The 19-class label inventory: 9 relation types, each in two argument
//! orders, plus Other.

use std::collections::HashMap;

pub const N_RELATIONS: usize = 9;
pub const N_DIRECTIONAL: usize = 18;
/// Other is the distinguished catch-all; it has no classifier row.
pub const OTHER_ID: usize = 18;
pub const N_LABELS: usize = 19;

pub const RELATION_NAMES: [&str; N_RELATIONS] = [
    "Cause-Effect",
    "Component-Whole",
    "Content-Container",
    "Entity-Destination",
    "Entity-Origin",
    "Instrument-Agency",
    "Member-Collection",
    "Message-Topic",
    "Product-Producer",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    E1E2,
    E2E1,
}

/// Bidirectional map between label strings and ids. Directional ids are
/// `2*relation` for `(e1,e2)` and `2*relation + 1` for `(e2,e1)`;
/// [`OTHER_ID`] is always 18.
pub struct LabelSet {
    names: Vec<String>,
    ids: HashMap<String, usize>,
}

impl LabelSet {
    pub fn new() -> Self {
        let mut names = Vec::with_capacity(N_LABELS);
        for rel in RELATION_NAMES {
            names.push(format!("{}(e1,e2)", rel));
            names.push(format!("{}(e2,e1)", rel));
        }
        names.push("Other".to_string());
        let ids = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i))
            .collect();
        LabelSet { names, ids }
    }

    pub fn id(&self, label: &str) -> Option<usize> {
        self.ids.get(label).copied()
    }

    pub fn name(&self, id: usize) -> &str {
        &self.names[id]
    }

    /// Relation index and direction of a directional id; None for Other.
    pub fn relation_of(&self, id: usize) -> Option<(usize, Direction)> {
        if id >= N_DIRECTIONAL {
            return None;
        }
        let dir = if id % 2 == 0 {
            Direction::E1E2
        } else {
            Direction::E2E1
        };
        Some((id / 2, dir))
    }

    pub fn relation_name(&self, relation: usize) -> &str {
        RELATION_NAMES[relation]
    }
}

impl Default for LabelSet {
    fn default() -> Self {
        Self::new()
    }
}
