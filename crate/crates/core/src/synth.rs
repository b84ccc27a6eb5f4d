//! Seeded rule corpora where a boundary follows exactly the designated
//! trigger characters.
//!
//! Sentences are runs of ordinary characters closed by one trigger and a
//! delimiter. Sentence openings lean on a small set of initial characters,
//! which gives the embeddings some distributional signal to work with.
//! Trigger characters never occur anywhere except sentence-finally, so the
//! gold label of a stripped character is a function of the character alone.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Corpus, Label, RawDocument};
use crate::error::{Error, Result};

/// Characters every generator draws ordinary sentence material from.
pub const BASE_ALPHABET: &str =
    "天地人王子曰不以其為有者於民大國無所可道君臣心言事行知德仁義禮學生死日月山水之與則此吾今古";
pub const TRIGGERS_A: &str = "也矣焉乎哉";
pub const TRIGGERS_B: &str = "兮耳已云夫";
pub const INITIALS_A: &str = "故是若";
pub const INITIALS_B: &str = "蓋凡昔";

const DELIMITERS: [(char, u32); 4] = [('。', 6), ('，', 3), ('？', 1), ('！', 1)];

#[derive(Debug, Clone, PartialEq)]
pub struct RuleGenerator {
    triggers: BTreeSet<char>,
    initials: Vec<char>,
    content: Vec<char>,
    /// Inclusive bounds on sentence length, trigger included.
    pub min_len: usize,
    pub max_len: usize,
    /// Probability that a sentence opens with an initial character.
    pub initial_rate: f64,
}

impl RuleGenerator {
    /// Ordinary characters are `alphabet` plus `initials`, minus the
    /// triggers.
    pub fn new(triggers: &str, initials: &str, alphabet: &str) -> Result<Self> {
        let triggers: BTreeSet<char> = triggers.chars().collect();
        if triggers.is_empty() {
            return Err(Error::config("a rule generator needs at least one trigger"));
        }
        let content: Vec<char> = alphabet
            .chars()
            .chain(initials.chars())
            .filter(|c| !triggers.contains(c))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        if content.is_empty() {
            return Err(Error::config("a rule generator needs non-trigger characters"));
        }
        let initials: Vec<char> = initials.chars().filter(|c| !triggers.contains(c)).collect();
        Ok(RuleGenerator {
            triggers,
            initials,
            content,
            min_len: 2,
            max_len: 8,
            initial_rate: 0.6,
        })
    }

    /// Triggers A. The other trigger set appears as ordinary characters.
    pub fn family_a() -> Self {
        let alphabet: String = [BASE_ALPHABET, TRIGGERS_B].concat();
        Self::new(TRIGGERS_A, INITIALS_A, &alphabet).expect("static sets are valid")
    }

    /// Triggers B, with trigger set A demoted to ordinary characters.
    pub fn family_b() -> Self {
        let alphabet: String = [BASE_ALPHABET, TRIGGERS_A].concat();
        Self::new(TRIGGERS_B, INITIALS_B, &alphabet).expect("static sets are valid")
    }

    pub fn triggers(&self) -> &BTreeSet<char> {
        &self.triggers
    }

    pub fn is_trigger(&self, c: char) -> bool {
        self.triggers.contains(&c)
    }

    /// Gold labels implied by the rule.
    pub fn rule_labels(&self, chars: &[char]) -> Vec<Label> {
        chars
            .iter()
            .map(|&c| {
                if self.is_trigger(c) {
                    Label::Boundary
                } else {
                    Label::NonBoundary
                }
            })
            .collect()
    }

    fn sentence(&self, rng: &mut ChaCha8Rng, out: &mut String) -> usize {
        let len = rng.random_range(self.min_len.max(1)..=self.max_len.max(self.min_len.max(1)));
        let quoted = rng.random_bool(0.05);
        if quoted {
            out.push('「');
        }
        for k in 0..len - 1 {
            let c = if k == 0 && !self.initials.is_empty() && rng.random_bool(self.initial_rate) {
                self.initials[rng.random_range(0..self.initials.len())]
            } else {
                self.content[rng.random_range(0..self.content.len())]
            };
            out.push(c);
        }
        let t: Vec<char> = self.triggers.iter().copied().collect();
        out.push(t[rng.random_range(0..t.len())]);
        let total: u32 = DELIMITERS.iter().map(|d| d.1).sum();
        let mut pick = rng.random_range(0..total);
        for (d, w) in DELIMITERS {
            if pick < w {
                out.push(d);
                break;
            }
            pick -= w;
        }
        if quoted {
            out.push('」');
        }
        len
    }

    /// A corpus of `docs` documents holding at least `content_chars`
    /// content characters between them, spread as evenly as sentences allow.
    pub fn generate(&self, name: &str, docs: usize, content_chars: usize, seed: u64) -> Corpus {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let docs = docs.max(1);
        let per_doc = content_chars.div_ceil(docs);
        let documents = (0..docs)
            .map(|d| {
                let mut text = String::new();
                let mut n = 0;
                while n < per_doc {
                    n += self.sentence(&mut rng, &mut text);
                    if rng.random_bool(0.1) {
                        text.push('\n');
                    }
                }
                RawDocument::new(format!("{name}{d:04}"), text)
            })
            .collect();
        Corpus::new(name, documents)
    }
}
