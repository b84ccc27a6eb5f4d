use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::LabeledSequence;

/// Character vocabulary with dense ids, most frequent first.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocab {
    chars: Vec<char>,
    counts: Vec<u64>,
    index: HashMap<char, u32>,
    min_count: u64,
}

/// On-disk form: characters and counts in id order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub(crate) struct VocabRecord {
    pub chars: Vec<char>,
    pub counts: Vec<u64>,
    pub min_count: u64,
}

impl Vocab {
    /// Keeps characters occurring at least `min_count` times, ordered by
    /// descending count with ties broken by code point. Labels are ignored.
    pub fn build<'a, I>(sequences: I, min_count: u64) -> Vocab
    where
        I: IntoIterator<Item = &'a LabeledSequence>,
    {
        let mut counts: BTreeMap<char, u64> = BTreeMap::new();
        for seq in sequences {
            for &c in seq.chars() {
                *counts.entry(c).or_default() += 1;
            }
        }
        Self::from_counts(counts, min_count)
    }

    pub fn from_counts(counts: impl IntoIterator<Item = (char, u64)>, min_count: u64) -> Vocab {
        let min_count = min_count.max(1);
        let mut kept: Vec<(char, u64)> = counts.into_iter().filter(|&(_, n)| n >= min_count).collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        let index = kept.iter().enumerate().map(|(i, &(c, _))| (c, i as u32)).collect();
        let (chars, counts) = kept.into_iter().unzip();
        Vocab {
            chars,
            counts,
            index,
            min_count,
        }
    }

    pub fn len(&self) -> usize {
        self.chars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chars.is_empty()
    }

    pub fn id(&self, c: char) -> Option<u32> {
        self.index.get(&c).copied()
    }

    pub fn char_of(&self, id: u32) -> Option<char> {
        self.chars.get(id as usize).copied()
    }

    pub fn count(&self, c: char) -> Option<u64> {
        self.id(c).map(|i| self.counts[i as usize])
    }

    pub fn count_of_id(&self, id: u32) -> u64 {
        self.counts[id as usize]
    }

    pub fn chars(&self) -> &[char] {
        &self.chars
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn min_count(&self) -> u64 {
        self.min_count
    }

    pub fn total_count(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub(crate) fn to_record(&self) -> VocabRecord {
        VocabRecord {
            chars: self.chars.clone(),
            counts: self.counts.clone(),
            min_count: self.min_count,
        }
    }

    pub(crate) fn from_record(record: VocabRecord) -> Option<Vocab> {
        if record.chars.len() != record.counts.len() {
            return None;
        }
        let index: HashMap<char, u32> = record.chars.iter().enumerate().map(|(i, &c)| (c, i as u32)).collect();
        if index.len() != record.chars.len() {
            return None;
        }
        Some(Vocab {
            chars: record.chars,
            counts: record.counts,
            index,
            min_count: record.min_count,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{strip_and_label, LabelConfig, RawDocument};
    use proptest::prelude::*;

    fn seqs(texts: &[&str]) -> Vec<LabeledSequence> {
        texts
            .iter()
            .map(|t| strip_and_label(&RawDocument::new("d", *t), &LabelConfig::default()))
            .collect()
    }

    #[test]
    fn build_examples() {
        let s = seqs(&["AA。BC"]);
        let v = Vocab::build(&s, 1);
        assert_eq!(v.chars(), &['A', 'B', 'C']);
        assert_eq!(v.count('A'), Some(2));
        assert_eq!(v.count('B'), Some(1));
        assert_eq!(v.count('C'), Some(1));

        let v = Vocab::build(&s, 2);
        assert_eq!(v.chars(), &['A']);

        assert!(Vocab::build(&[], 1).is_empty());
    }

    proptest! {
        #[test]
        fn ids_are_a_bijection(text in "[a-h甲乙丙]{0,60}", min_count in 1u64..4) {
            let s = seqs(&[text.as_str()]);
            let v = Vocab::build(&s, min_count);
            for (i, &c) in v.chars().iter().enumerate() {
                prop_assert_eq!(v.id(c), Some(i as u32));
                prop_assert_eq!(v.char_of(i as u32), Some(c));
                prop_assert!(v.count(c).unwrap() >= min_count);
            }
        }
    }
}
