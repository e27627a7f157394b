use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Result, VlxError};

pub const UNK_TOKEN: &str = "<unk>";
pub const UNK_ID: usize = 0;

/// Ordered token list with the unknown-word token at index 0.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Vocab {
    tokens: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl Vocab {
    pub fn new(tokens: Vec<String>) -> Result<Self> {
        if tokens.first().map(String::as_str) != Some(UNK_TOKEN) {
            return Err(VlxError::Config(format!(
                "vocab must start with {UNK_TOKEN}"
            )));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(VlxError::Config(format!("duplicate vocab token `{t}`")));
            }
        }
        Ok(Self { tokens, index })
    }

    /// Sorted unique words of `texts`, preceded by the unknown token.
    pub fn from_texts<'a>(texts: impl IntoIterator<Item = &'a str>) -> Self {
        let words: BTreeSet<String> = texts.into_iter().flat_map(split_words).collect();
        let mut tokens = vec![UNK_TOKEN.to_string()];
        tokens.extend(words.into_iter().filter(|w| w != UNK_TOKEN));
        Self::new(tokens).expect("sorted unique words form a valid vocab")
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id(&self, word: &str) -> usize {
        self.index.get(word).copied().unwrap_or(UNK_ID)
    }
}

impl TryFrom<Vec<String>> for Vocab {
    type Error = VlxError;

    fn try_from(tokens: Vec<String>) -> Result<Self> {
        Vocab::new(tokens)
    }
}

impl From<Vocab> for Vec<String> {
    fn from(v: Vocab) -> Self {
        v.tokens
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TextInput {
    pub raw: String,
    pub tokens: Vec<usize>,
}

impl TextInput {
    pub fn unknown_count(&self) -> usize {
        self.tokens.iter().filter(|&&t| t == UNK_ID).count()
    }
}

/// Lowercased words, split on whitespace and punctuation.
pub fn split_words(raw: &str) -> Vec<String> {
    raw.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

pub fn tokenize(raw: &str, vocab: &Vocab) -> Result<TextInput> {
    if raw.trim().is_empty() {
        return Err(VlxError::Input("empty text".into()));
    }
    let tokens: Vec<usize> = split_words(raw).iter().map(|w| vocab.id(w)).collect();
    if tokens.is_empty() {
        return Err(VlxError::Input(format!("no words in `{raw}`")));
    }
    Ok(TextInput {
        raw: raw.to_string(),
        tokens,
    })
}
