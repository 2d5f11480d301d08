use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TokenScheme {
    Whitespace,
    /// Whitespace split, then every punctuation character becomes its own
    /// token. Any character that is neither alphanumeric nor whitespace counts
    /// as punctuation.
    #[default]
    PunctuationSplit,
}

impl FromStr for TokenScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "whitespace" | "ws" => Ok(TokenScheme::Whitespace),
            "punctuation-split" | "punct" => Ok(TokenScheme::PunctuationSplit),
            other => Err(Error::InvalidInput(format!("unknown tokenizer scheme `{other}`"))),
        }
    }
}

impl fmt::Display for TokenScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TokenScheme::Whitespace => "whitespace",
            TokenScheme::PunctuationSplit => "punctuation-split",
        })
    }
}

/// Ordered, non-empty text units.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenSequence(Vec<String>);

impl TokenSequence {
    pub fn new(tokens: Vec<String>) -> Result<Self> {
        if tokens.iter().any(String::is_empty) {
            return Err(Error::InvalidInput("empty token".into()));
        }
        Ok(Self(tokens))
    }

    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

fn is_punct(c: char) -> bool {
    !c.is_alphanumeric() && !c.is_whitespace()
}

pub fn tokenize(text: &str, scheme: TokenScheme) -> TokenSequence {
    let words = text.split_whitespace();
    let tokens = match scheme {
        TokenScheme::Whitespace => words.map(str::to_string).collect(),
        TokenScheme::PunctuationSplit => {
            let mut out = Vec::new();
            for word in words {
                let mut run = String::new();
                for c in word.chars() {
                    if is_punct(c) {
                        if !run.is_empty() {
                            out.push(std::mem::take(&mut run));
                        }
                        out.push(c.to_string());
                    } else {
                        run.push(c);
                    }
                }
                if !run.is_empty() {
                    out.push(run);
                }
            }
            out
        }
    };
    TokenSequence(tokens)
}
