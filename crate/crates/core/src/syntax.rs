//! Language profiles and the classification of vocabulary tokens into
//! syntax categories.
//!
//! A vocabulary token is syntactic when its decoded text, after dropping at
//! most one leading space marker, is exactly a listed keyword or type, is
//! made only of whitespace lexemes, or can be segmented entirely into listed
//! delimiters and operators (whitespace pieces allowed in between). Every
//! other token, including subword fragments such as `"ret"`, is `Etc`.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::token::{TokenId, TokenSequence};

const PYTHON_PROFILE: &str = include_str!("../profiles/python.json");
const CPP_PROFILE: &str = include_str!("../profiles/cpp.json");
const JAVA_PROFILE: &str = include_str!("../profiles/java.json");

/// Languages shipped with the crate.
pub const BUILTIN_LANGUAGES: [&str; 3] = ["python", "cpp", "java"];

/// Leading characters tokenizers use to mark a preceding space.
const SPACE_MARKERS: [char; 3] = [' ', '\u{0120}', '\u{2581}'];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenCategory {
    Keyword,
    Whitespace,
    Type,
    Delimiter,
    Operator,
    Etc,
}

impl TokenCategory {
    pub const ALL: [TokenCategory; 6] = [
        TokenCategory::Keyword,
        TokenCategory::Whitespace,
        TokenCategory::Type,
        TokenCategory::Delimiter,
        TokenCategory::Operator,
        TokenCategory::Etc,
    ];

    pub fn is_syntax(self) -> bool {
        self != TokenCategory::Etc
    }

    pub fn name(self) -> &'static str {
        match self {
            TokenCategory::Keyword => "keyword",
            TokenCategory::Whitespace => "whitespace",
            TokenCategory::Type => "type",
            TokenCategory::Delimiter => "delimiter",
            TokenCategory::Operator => "operator",
            TokenCategory::Etc => "etc",
        }
    }

    fn slot(self) -> usize {
        self as usize
    }
}

impl fmt::Display for TokenCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error)]
pub enum SyntaxError {
    #[error("unknown language `{0}` (shipped: python, cpp, java)")]
    UnknownLanguage(String),
    #[error("profile `{language}`: the {category} list is empty")]
    EmptyCategory { language: String, category: &'static str },
    #[error("profile `{language}`: lexeme {lexeme:?} appears in both {first} and {second}")]
    Overlap {
        language: String,
        lexeme: String,
        first: &'static str,
        second: &'static str,
    },
    #[error("profile `{language}`: empty lexeme in {category}")]
    EmptyLexeme { language: String, category: &'static str },
    #[error("vocabulary is empty")]
    EmptyVocabulary,
    #[error("failed to read profile {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed profile: {0}")]
    Parse(#[from] serde_json::Error),
}

/// The five lexeme lists of one programming language.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LanguageProfile {
    pub language: String,
    pub keywords: Vec<String>,
    pub whitespace: Vec<String>,
    pub types: Vec<String>,
    pub delimiters: Vec<String>,
    pub operators: Vec<String>,
}

impl LanguageProfile {
    /// One of the shipped profiles: `python`, `cpp` or `java`.
    pub fn builtin(language: &str) -> Result<Self, SyntaxError> {
        let source = match language {
            "python" => PYTHON_PROFILE,
            "cpp" | "c++" => CPP_PROFILE,
            "java" => JAVA_PROFILE,
            other => return Err(SyntaxError::UnknownLanguage(other.to_string())),
        };
        Self::from_json(source)
    }

    pub fn from_json(source: &str) -> Result<Self, SyntaxError> {
        let profile: LanguageProfile = serde_json::from_str(source)?;
        profile.validate()?;
        Ok(profile)
    }

    pub fn from_file(path: &Path) -> Result<Self, SyntaxError> {
        let source = std::fs::read_to_string(path).map_err(|source| SyntaxError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&source)
    }

    /// A shipped language name, or else a path to a profile file.
    pub fn resolve(name_or_path: &str) -> Result<Self, SyntaxError> {
        match Self::builtin(name_or_path) {
            Err(SyntaxError::UnknownLanguage(_)) if Path::new(name_or_path).is_file() => {
                Self::from_file(Path::new(name_or_path))
            }
            other => other,
        }
    }

    fn lists(&self) -> [(&'static str, &[String]); 5] {
        [
            ("keywords", &self.keywords),
            ("whitespace", &self.whitespace),
            ("types", &self.types),
            ("delimiters", &self.delimiters),
            ("operators", &self.operators),
        ]
    }

    /// Non-empty lists, no empty lexemes, pairwise disjoint.
    pub fn validate(&self) -> Result<(), SyntaxError> {
        let lists = self.lists();
        for (category, list) in lists {
            if list.is_empty() {
                return Err(SyntaxError::EmptyCategory {
                    language: self.language.clone(),
                    category,
                });
            }
            if list.iter().any(String::is_empty) {
                return Err(SyntaxError::EmptyLexeme {
                    language: self.language.clone(),
                    category,
                });
            }
        }
        for (i, (first, a)) in lists.iter().enumerate() {
            for (second, b) in &lists[i + 1..] {
                if let Some(lexeme) = a.iter().find(|x| b.contains(x)) {
                    return Err(SyntaxError::Overlap {
                        language: self.language.clone(),
                        lexeme: lexeme.clone(),
                        first,
                        second,
                    });
                }
            }
        }
        Ok(())
    }

    /// Precomputed lookup sets for repeated classification.
    pub fn classifier(&self) -> Classifier {
        let set = |v: &[String]| v.iter().cloned().collect::<HashSet<_>>();
        Classifier {
            keywords: set(&self.keywords),
            types: set(&self.types),
            whitespace: self.whitespace.clone(),
            delimiters: self.delimiters.clone(),
            operators: self.operators.clone(),
        }
    }
}

/// Lookup tables built from a [`LanguageProfile`].
#[derive(Debug, Clone)]
pub struct Classifier {
    keywords: HashSet<String>,
    types: HashSet<String>,
    whitespace: Vec<String>,
    delimiters: Vec<String>,
    operators: Vec<String>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Piece {
    Space,
    Delim,
    Op,
}

impl Classifier {
    pub fn classify(&self, text: &str) -> TokenCategory {
        if text.is_empty() {
            return TokenCategory::Etc;
        }
        let normalized = normalize_marker(text);
        let text = normalized.as_str();
        if self.composed_of(text, &[Piece::Space]) {
            return TokenCategory::Whitespace;
        }
        let lexeme = strip_one_space(text);
        if self.keywords.contains(lexeme) {
            return TokenCategory::Keyword;
        }
        if self.types.contains(lexeme) {
            return TokenCategory::Type;
        }
        if self.delimiters.iter().any(|d| d == lexeme) {
            return TokenCategory::Delimiter;
        }
        if self.operators.iter().any(|o| o == lexeme) {
            return TokenCategory::Operator;
        }
        if self.composed_of(lexeme, &[Piece::Space, Piece::Delim]) {
            TokenCategory::Delimiter
        } else if self.composed_of(lexeme, &[Piece::Space, Piece::Op]) {
            TokenCategory::Operator
        } else if self.composed_of(lexeme, &[Piece::Space, Piece::Delim, Piece::Op]) {
            TokenCategory::Delimiter
        } else {
            TokenCategory::Etc
        }
    }

    fn pieces(&self, kind: Piece) -> &[String] {
        match kind {
            Piece::Space => &self.whitespace,
            Piece::Delim => &self.delimiters,
            Piece::Op => &self.operators,
        }
    }

    /// Whether `text` splits into pieces of the allowed kinds, with at least
    /// one non-whitespace piece unless whitespace is the only kind allowed.
    fn composed_of(&self, text: &str, kinds: &[Piece]) -> bool {
        let needs_punct = kinds != [Piece::Space];
        let bytes = text.len();
        // reach[i] = (reachable, reachable having used punctuation)
        let mut reach = vec![(false, false); bytes + 1];
        reach[0] = (true, false);
        for start in 0..bytes {
            let (ok, punct) = reach[start];
            if !ok || !text.is_char_boundary(start) {
                continue;
            }
            let rest = &text[start..];
            for &kind in kinds {
                for piece in self.pieces(kind) {
                    if rest.starts_with(piece.as_str()) {
                        let end = start + piece.len();
                        let used = punct || kind != Piece::Space;
                        reach[end].0 = true;
                        reach[end].1 |= used;
                    }
                }
            }
        }
        let (ok, punct) = reach[bytes];
        ok && (punct || !needs_punct)
    }
}

fn normalize_marker(text: &str) -> String {
    let mut chars = text.chars();
    match chars.next() {
        Some(c) if SPACE_MARKERS[1..].contains(&c) => format!(" {}", chars.as_str()),
        _ => text.to_string(),
    }
}

fn strip_one_space(text: &str) -> &str {
    match text.strip_prefix(' ') {
        Some(rest) if !rest.is_empty() => rest,
        _ => text,
    }
}

/// Classifies one lexeme under `profile`.
pub fn classify_lexeme(profile: &LanguageProfile, text: &str) -> TokenCategory {
    profile.classifier().classify(text)
}

/// A tokenizer vocabulary with every entry classified.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VocabularyProfile {
    language: String,
    decode: Vec<String>,
    categories: Vec<TokenCategory>,
}

impl VocabularyProfile {
    pub fn vocab_size(&self) -> usize {
        self.decode.len()
    }

    pub fn language(&self) -> &str {
        &self.language
    }

    pub fn decode_table(&self) -> &[String] {
        &self.decode
    }

    pub fn decode_token(&self, token: TokenId) -> Option<&str> {
        self.decode.get(token.index()).map(String::as_str)
    }

    /// Concatenated text of a token run. Unknown ids decode to nothing.
    pub fn decode(&self, tokens: &[TokenId]) -> String {
        tokens
            .iter()
            .filter_map(|&t| self.decode_token(t))
            .collect()
    }

    pub fn category(&self, token: TokenId) -> TokenCategory {
        self.categories
            .get(token.index())
            .copied()
            .unwrap_or(TokenCategory::Etc)
    }

    pub fn categories(&self) -> &[TokenCategory] {
        &self.categories
    }

    /// Membership in the syntax element set.
    pub fn is_syntax(&self, token: TokenId) -> bool {
        self.category(token).is_syntax()
    }

    pub fn syntax_set(&self) -> impl Iterator<Item = TokenId> + '_ {
        self.tokens_where(TokenCategory::is_syntax)
    }

    pub fn etc_tokens(&self) -> impl Iterator<Item = TokenId> + '_ {
        self.tokens_where(|c| !c.is_syntax())
    }

    fn tokens_where(
        &self,
        pred: impl Fn(TokenCategory) -> bool + 'static,
    ) -> impl Iterator<Item = TokenId> + '_ {
        self.categories
            .iter()
            .enumerate()
            .filter(move |(_, &c)| pred(c))
            .map(|(i, _)| TokenId(i as u32))
    }
}

/// Classifies every entry of `decode_table`; index `i` is token id `i`.
pub fn build_vocabulary_profile(
    profile: &LanguageProfile,
    decode_table: Vec<String>,
) -> Result<VocabularyProfile, SyntaxError> {
    if decode_table.is_empty() {
        return Err(SyntaxError::EmptyVocabulary);
    }
    let classifier = profile.classifier();
    let categories = decode_table.iter().map(|t| classifier.classify(t)).collect();
    Ok(VocabularyProfile {
        language: profile.language.clone(),
        decode: decode_table,
        categories,
    })
}

/// Token counts per category.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CategoryCounts([usize; 6]);

impl CategoryCounts {
    pub fn get(&self, category: TokenCategory) -> usize {
        self.0[category.slot()]
    }

    pub fn add(&mut self, category: TokenCategory) {
        self.0[category.slot()] += 1;
    }

    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn syntax_total(&self) -> usize {
        self.total() - self.get(TokenCategory::Etc)
    }

    pub fn iter(&self) -> impl Iterator<Item = (TokenCategory, usize)> + '_ {
        TokenCategory::ALL.iter().map(move |&c| (c, self.get(c)))
    }
}

impl Serialize for CategoryCounts {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut map = serializer.serialize_map(Some(6))?;
        for (category, count) in self.iter() {
            map.serialize_entry(category.name(), &count)?;
        }
        map.end()
    }
}

pub fn category_histogram(profile: &VocabularyProfile, seq: &TokenSequence) -> CategoryCounts {
    let mut counts = CategoryCounts::default();
    for &token in &seq.tokens {
        counts.add(profile.category(token));
    }
    counts
}
