use std::collections::{BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

const BUNDLED_STOP_WORDS: &str = include_str!("stopwords.txt");

pub fn bundled_stop_words() -> Vec<String> {
    BUNDLED_STOP_WORDS
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stemmer {
    Identity,
    /// Light plural stripping: `-ies → -y`, `-sses → -ss`, trailing `-s`
    /// dropped unless the word ends in `ss`, `us` or `is`. Words of three
    /// characters or fewer are left alone.
    #[default]
    Plural,
}

impl Stemmer {
    pub fn stem(self, word: &str) -> String {
        match self {
            Stemmer::Identity => word.to_string(),
            Stemmer::Plural => {
                if word.chars().count() <= 3 {
                    word.to_string()
                } else if let Some(stem) = word.strip_suffix("ies").filter(|s| s.chars().count() > 1) {
                    format!("{stem}y")
                } else if let Some(stem) = word.strip_suffix("sses") {
                    format!("{stem}ss")
                } else if word.ends_with('s')
                    && !(word.ends_with("ss") || word.ends_with("us") || word.ends_with("is"))
                {
                    word[..word.len() - 1].to_string()
                } else {
                    word.to_string()
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessConfig {
    /// Replaces the bundled list when set.
    pub stop_words: Option<Vec<String>>,
    /// Unigrams seen fewer times than this across the corpus are removed.
    pub rare_min_count: usize,
    pub stemmer: Stemmer,
    /// Bi- and tri-grams seen at least this often are appended.
    pub ngram_min_count: usize,
    pub max_ngram: usize,
    /// Documents with fewer unigram tokens after filtering are dropped.
    pub min_tokens: usize,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            stop_words: None,
            rare_min_count: 5,
            stemmer: Stemmer::Plural,
            ngram_min_count: 10,
            max_ngram: 3,
            min_tokens: 20,
        }
    }
}

/// One-hot bag of words for a retained document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenDocument {
    pub paper_id: String,
    pub tokens: BTreeSet<String>,
    /// Unigram occurrences after filtering.
    pub token_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DroppedDocument {
    pub paper_id: String,
    pub token_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessOutput {
    pub documents: Vec<TokenDocument>,
    pub dropped: Vec<DroppedDocument>,
    pub vocabulary: BTreeSet<String>,
}

/// Lowercases and splits on anything that is not a letter or digit.
pub fn tokenize(raw: &str) -> Vec<String> {
    raw.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// Corpus statistics gathered in one pass before documents are transformed.
#[derive(Debug, Clone)]
pub struct Preprocessor {
    config: PreprocessConfig,
    stop_words: HashSet<String>,
    unigram_counts: HashMap<String, usize>,
    ngram_counts: HashMap<String, usize>,
}

impl Preprocessor {
    pub fn fit<'a>(texts: impl IntoIterator<Item = &'a str>, config: &PreprocessConfig) -> Self {
        let stop_words: HashSet<String> = config
            .stop_words
            .clone()
            .unwrap_or_else(bundled_stop_words)
            .into_iter()
            .map(|w| w.to_lowercase())
            .collect();
        let mut pre = Self {
            config: config.clone(),
            stop_words,
            unigram_counts: HashMap::new(),
            ngram_counts: HashMap::new(),
        };
        let unstopped: Vec<Vec<String>> = texts.into_iter().map(|t| pre.without_stop_words(t)).collect();
        for doc in &unstopped {
            for t in doc {
                *pre.unigram_counts.entry(t.clone()).or_insert(0) += 1;
            }
        }
        for doc in &unstopped {
            let stemmed = pre.filter_and_stem(doc.clone());
            for gram in ngrams(&stemmed, pre.config.max_ngram) {
                *pre.ngram_counts.entry(gram).or_insert(0) += 1;
            }
        }
        pre
    }

    fn without_stop_words(&self, raw: &str) -> Vec<String> {
        tokenize(raw).into_iter().filter(|t| !self.stop_words.contains(t)).collect()
    }

    fn filter_and_stem(&self, tokens: Vec<String>) -> Vec<String> {
        tokens
            .into_iter()
            .filter(|t| self.unigram_counts.get(t).copied().unwrap_or(0) >= self.config.rare_min_count)
            .map(|t| self.config.stemmer.stem(&t))
            .collect()
    }

    /// `Err` carries the drop record when the document is too short.
    pub fn transform(&self, id: &str, raw: &str) -> Result<TokenDocument, DroppedDocument> {
        let tokens = self.filter_and_stem(self.without_stop_words(raw));
        if tokens.len() < self.config.min_tokens {
            return Err(DroppedDocument {
                paper_id: id.to_string(),
                token_count: tokens.len(),
            });
        }
        let mut set: BTreeSet<String> = tokens.iter().cloned().collect();
        for gram in ngrams(&tokens, self.config.max_ngram) {
            if self.ngram_counts.get(&gram).copied().unwrap_or(0) >= self.config.ngram_min_count {
                set.insert(gram);
            }
        }
        Ok(TokenDocument {
            paper_id: id.to_string(),
            tokens: set,
            token_count: tokens.len(),
        })
    }
}

/// Underscore-joined 2..=max_n grams of adjacent tokens.
fn ngrams(tokens: &[String], max_n: usize) -> Vec<String> {
    let mut out = Vec::new();
    for n in 2..=max_n {
        for w in tokens.windows(n) {
            out.push(w.join("_"));
        }
    }
    out
}

/// Fits corpus statistics and transforms every document.
pub fn preprocess_corpus(docs: &[(String, String)], config: &PreprocessConfig) -> PreprocessOutput {
    let pre = Preprocessor::fit(docs.iter().map(|(_, t)| t.as_str()), config);
    let mut documents = Vec::new();
    let mut dropped = Vec::new();
    for (id, text) in docs {
        match pre.transform(id, text) {
            Ok(d) => documents.push(d),
            Err(d) => dropped.push(d),
        }
    }
    let vocabulary = documents.iter().flat_map(|d| d.tokens.iter().cloned()).collect();
    PreprocessOutput {
        documents,
        dropped,
        vocabulary,
    }
}

/// Single-document convenience: the corpus statistics are the document's own.
pub fn preprocess_abstract(raw: &str, config: &PreprocessConfig) -> Option<TokenDocument> {
    Preprocessor::fit([raw], config).transform("", raw).ok()
}
