//! Numeral → slot normalization for raw problems.

use std::collections::BTreeMap;

use crate::equation::{
    lex_equation, parse_plain_number, parse_slot_token, parse_tokens, EqToken, EquationTree, Leaf,
    SlotId, Slots,
};

use super::text::tokenize;
use super::CorpusError;

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizeOptions {
    /// Equation numerals allowed to stay literal when absent from the text.
    pub constants: Vec<f64>,
}

impl Default for NormalizeOptions {
    fn default() -> Self {
        NormalizeOptions {
            constants: vec![1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Normalized {
    pub tokens: Vec<String>,
    pub slots: Slots,
    /// Infix equation over slot tokens, e.g. `n2-n1-n1`.
    pub equation: String,
    pub tree: EquationTree,
    /// Fraction surfaces whose decimal slot value is not exact (`1/3`).
    pub inexact_fractions: Vec<String>,
}

/// Parses a text numeral: integer, decimal, percentage or `a/b` fraction.
pub fn parse_numeral(token: &str) -> Option<f64> {
    if let Some(pct) = token.strip_suffix('%') {
        return parse_plain_number(pct).map(|v| v / 100.0);
    }
    if let Some((num, den)) = token.split_once('/') {
        let num: u64 = num.parse().ok().filter(|_| num.bytes().all(|b| b.is_ascii_digit()))?;
        let den: u64 = den.parse().ok().filter(|_| den.bytes().all(|b| b.is_ascii_digit()))?;
        if den == 0 {
            return None;
        }
        return Some(num as f64 / den as f64);
    }
    parse_plain_number(token)
}

fn fraction_is_inexact(token: &str) -> bool {
    let Some((num, den)) = token.split_once('/') else {
        return false;
    };
    let (Ok(num), Ok(den)) = (num.parse::<u64>(), den.parse::<u64>()) else {
        return false;
    };
    // exact iff the reduced denominator has only factors 2 and 5
    let mut d = den / gcd(num, den).max(1);
    for p in [2, 5] {
        while d > 0 && d.is_multiple_of(p) {
            d /= p;
        }
    }
    d != 1
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn same_value(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

/// Replaces numerals in `raw_text` left to right by `n1..nk` (repeated values
/// share a slot) and rewrites `raw_equation` over those slots.
pub fn normalize_numbers(
    raw_text: &str,
    raw_equation: &str,
    options: &NormalizeOptions,
) -> Result<Normalized, CorpusError> {
    let mut tokens = tokenize(raw_text);
    if tokens.is_empty() {
        return Err(CorpusError::EmptyText);
    }

    let next_free = tokens
        .iter()
        .filter_map(|t| parse_slot_token(t))
        .map(|s| s.0)
        .max()
        .unwrap_or(0);
    let mut next = next_free + 1;
    let mut slots = Slots::new();
    let mut by_surface: BTreeMap<String, SlotId> = BTreeMap::new();
    let mut inexact_fractions = Vec::new();

    for tok in tokens.iter_mut() {
        let Some(value) = parse_numeral(tok) else {
            continue;
        };
        let slot = match slots.iter().find(|(_, v)| same_value(**v, value)) {
            Some((s, _)) => *s,
            None => {
                let s = SlotId(next);
                next += 1;
                slots.insert(s, value);
                s
            }
        };
        if fraction_is_inexact(tok) && !inexact_fractions.contains(tok) {
            inexact_fractions.push(tok.clone());
        }
        by_surface.insert(tok.clone(), slot);
        *tok = slot.to_string();
    }

    let lexed = lex_equation(raw_equation)?;
    let lexed = merge_text_fractions(lexed, &by_surface);
    let mut rewritten = Vec::with_capacity(lexed.len());
    for tok in lexed {
        let tok = match tok {
            EqToken::Number { value, surface } => {
                if let Some((s, _)) = slots.iter().find(|(_, v)| same_value(**v, value)) {
                    EqToken::Leaf(Leaf::Slot(*s))
                } else if options.constants.iter().any(|c| same_value(*c, value)) {
                    EqToken::Number { value, surface }
                } else {
                    return Err(CorpusError::UnmatchedNumeral(surface));
                }
            }
            other => other,
        };
        rewritten.push(tok);
    }
    let tree = parse_tokens(&rewritten)?;
    let equation: String = rewritten.iter().map(EqToken::surface).collect();

    Ok(Normalized {
        tokens,
        slots,
        equation,
        tree,
        inexact_fractions,
    })
}

/// Turns `a / b` (optionally parenthesized) into the slot of the text
/// fraction `a/b` when the text wrote exactly that fraction.
fn merge_text_fractions(tokens: Vec<EqToken>, by_surface: &BTreeMap<String, SlotId>) -> Vec<EqToken> {
    if !by_surface.keys().any(|k| k.contains('/')) {
        return tokens;
    }
    let mut out: Vec<EqToken> = Vec::with_capacity(tokens.len());
    let mut i = 0;
    while i < tokens.len() {
        if let (
            Some(EqToken::Number { surface: a, .. }),
            Some(EqToken::Op(crate::equation::Operator::Div)),
            Some(EqToken::Number { surface: b, .. }),
        ) = (tokens.get(i), tokens.get(i + 1), tokens.get(i + 2))
        {
            let preceded_by_div_or_pow = matches!(
                out.last(),
                Some(EqToken::Op(crate::equation::Operator::Div))
                    | Some(EqToken::Op(crate::equation::Operator::Pow))
            );
            if !preceded_by_div_or_pow {
                if let Some(slot) = by_surface.get(&format!("{a}/{b}")) {
                    out.push(EqToken::Leaf(Leaf::Slot(*slot)));
                    i += 3;
                    continue;
                }
            }
        }
        out.push(tokens[i].clone());
        i += 1;
    }
    out
}
