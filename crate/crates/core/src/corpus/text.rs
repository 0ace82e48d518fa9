//! Whitespace + CJK tokenization, sentence segmentation and the interrogative
//! marker lexicon.

use serde::{Deserialize, Serialize};

use super::CorpusError;

/// Tokens that close a sentence.
pub const SENTENCE_END: [&str; 8] = [".", "?", "!", ";", "。", "？", "！", "；"];

pub fn is_sentence_end(token: &str) -> bool {
    SENTENCE_END.contains(&token)
}

pub fn is_cjk(c: char) -> bool {
    matches!(c as u32,
        0x3400..=0x4DBF
        | 0x4E00..=0x9FFF
        | 0xF900..=0xFAFF
        | 0x20000..=0x2A6DF
        | 0x3000..=0x303F
        | 0xFF00..=0xFF0F
        | 0xFF1A..=0xFF20)
}

pub fn contains_cjk(tokens: &[String]) -> bool {
    tokens.iter().any(|t| t.chars().any(is_cjk))
}

#[derive(Clone, Copy, PartialEq)]
enum Kind {
    None,
    Word,
    Number,
}

/// Splits text on whitespace, makes every CJK character its own token and
/// separates punctuation. Numerals (`12`, `7.5`, `30%`, `1/2`) stay whole;
/// a digit run directly after letters stays part of the word (`n1`).
pub fn tokenize(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut cur = String::new();
    let mut kind = Kind::None;

    let flush = |cur: &mut String, kind: &mut Kind, tokens: &mut Vec<String>| {
        if !cur.is_empty() {
            tokens.push(std::mem::take(cur));
        }
        *kind = Kind::None;
    };

    for (i, &c) in chars.iter().enumerate() {
        let next_digit = chars.get(i + 1).is_some_and(|n| n.is_ascii_digit());
        if c.is_whitespace() {
            flush(&mut cur, &mut kind, &mut tokens);
        } else if is_cjk(c) {
            flush(&mut cur, &mut kind, &mut tokens);
            tokens.push(c.to_string());
        } else if c.is_ascii_digit() {
            if kind == Kind::None {
                kind = Kind::Number;
            }
            cur.push(c);
        } else if kind == Kind::Number && (c == '.' || c == '/') && next_digit {
            cur.push(c);
        } else if kind == Kind::Number && c == '%' {
            cur.push(c);
            flush(&mut cur, &mut kind, &mut tokens);
        } else if c.is_alphanumeric() || c == '_' || (kind == Kind::Word && (c == '\'' || c == '-'))
        {
            if kind == Kind::Number {
                flush(&mut cur, &mut kind, &mut tokens);
            }
            kind = Kind::Word;
            cur.push(c);
        } else {
            flush(&mut cur, &mut kind, &mut tokens);
            tokens.push(c.to_string());
        }
    }
    flush(&mut cur, &mut kind, &mut tokens);
    tokens
}

/// Question-marker lexicon plus the phrases used when rewriting sentences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lexicon {
    /// Interrogative markers; multi-token markers are matched as a run.
    pub markers: Vec<String>,
    /// Phrase inserted in place of a numeral when a sentence becomes a question.
    pub question_phrase_en: String,
    pub question_phrase_zh: String,
}

impl Default for Lexicon {
    fn default() -> Self {
        Lexicon {
            markers: [
                "how many", "how much", "how", "what", "which", "who", "when", "where", "why",
                "?", "多少", "几", "什么", "哪", "？",
            ]
            .iter()
            .map(|s| s.to_string())
            .collect(),
            question_phrase_en: "how many".into(),
            question_phrase_zh: "多少".into(),
        }
    }
}

impl Lexicon {
    pub fn with_markers<I, S>(markers: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Lexicon {
            markers: markers.into_iter().map(Into::into).collect(),
            ..Lexicon::default()
        }
    }

    fn marker_tokens(&self) -> Vec<Vec<String>> {
        let mut out: Vec<Vec<String>> = self
            .markers
            .iter()
            .map(|m| tokenize(&m.to_lowercase()))
            .filter(|t| !t.is_empty())
            .collect();
        // longest first so "how many" wins over "how"
        out.sort_by_key(|t| std::cmp::Reverse(t.len()));
        out
    }

    /// First marker occurrence in `sentence` as `(start, len)`.
    pub fn find_marker(&self, sentence: &[String]) -> Option<(usize, usize)> {
        let lowered: Vec<String> = sentence.iter().map(|t| t.to_lowercase()).collect();
        let mut best: Option<(usize, usize)> = None;
        for marker in self.marker_tokens() {
            if let Some(start) = lowered
                .windows(marker.len())
                .position(|w| w == marker.as_slice())
            {
                let better = match best {
                    None => true,
                    Some((s, l)) => start < s || (start == s && marker.len() > l),
                };
                if better {
                    best = Some((start, marker.len()));
                }
            }
        }
        best
    }

    pub fn is_interrogative(&self, sentence: &[String]) -> bool {
        self.find_marker(sentence).is_some()
    }

    /// Question phrase tokens and the terminal mark for the record's script.
    pub fn question_phrase(&self, cjk: bool) -> (Vec<String>, String) {
        if cjk {
            (tokenize(&self.question_phrase_zh), "？".into())
        } else {
            (tokenize(&self.question_phrase_en), "?".into())
        }
    }
}

/// Segmented text: sentences and the index of the question sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct Segmented {
    pub sentences: Vec<Vec<String>>,
    pub question_index: usize,
}

/// Splits tokens into sentences at sentence-final punctuation (kept with the
/// sentence it closes). The question is the last sentence carrying a marker,
/// or the last sentence when none does. With `strict`, a text without any
/// marker is rejected.
pub fn segment_sentences(
    tokens: &[String],
    lexicon: &Lexicon,
    strict: bool,
) -> Result<Segmented, CorpusError> {
    let mut sentences: Vec<Vec<String>> = Vec::new();
    let mut cur = Vec::new();
    for tok in tokens {
        cur.push(tok.clone());
        if is_sentence_end(tok) {
            sentences.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        sentences.push(cur);
    }
    if sentences.is_empty() {
        return Err(CorpusError::EmptyText);
    }
    let marked = sentences
        .iter()
        .rposition(|s| lexicon.is_interrogative(s));
    let question_index = match marked {
        Some(i) => i,
        None if strict => return Err(CorpusError::NoQuestion),
        None => sentences.len() - 1,
    };
    Ok(Segmented {
        sentences,
        question_index,
    })
}
