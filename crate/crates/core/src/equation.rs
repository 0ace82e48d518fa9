//! Binary equation trees over number slots.
//!
//! Infix strings are parsed with the usual precedence (`^` over `* /` over
//! `+ -`), `+ - * /` associate to the left and `^` to the right. Unary minus
//! is rewritten to `0 - x` so every operator node has exactly two children.
//! The prefix form (`* + n1 n2 n3`) is the stored representation and its
//! space-joined string is the template key.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Value substituted for the `PI` leaf.
pub const PI: f64 = std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EquationError {
    #[error("syntax error at token {position}: {reason}")]
    Syntax { position: usize, reason: String },
    #[error("unknown token `{0}`")]
    UnknownToken(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("no value for `{0}`")]
    MissingSlot(String),
    #[error("non-finite result")]
    NonFinite,
}

/// A number slot `n<k>`, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SlotId(pub u32);

impl SlotId {
    pub fn index(self) -> u32 {
        self.0
    }
}

impl fmt::Display for SlotId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

impl FromStr for SlotId {
    type Err = EquationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_slot_token(s).ok_or_else(|| EquationError::UnknownToken(s.to_string()))
    }
}

impl Serialize for SlotId {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SlotId {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Recognizes `n<digits>` (no leading zero unless the index is literally 0).
pub fn parse_slot_token(token: &str) -> Option<SlotId> {
    let digits = token.strip_prefix('n')?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    if digits.len() > 1 && digits.starts_with('0') {
        return None;
    }
    digits.parse().ok().map(SlotId)
}

/// Slot values, ordered by slot index.
pub type Slots = BTreeMap<SlotId, f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Operator {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl Operator {
    pub const ALL: [Operator; 5] = [
        Operator::Add,
        Operator::Sub,
        Operator::Mul,
        Operator::Div,
        Operator::Pow,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            Operator::Add => "+",
            Operator::Sub => "-",
            Operator::Mul => "*",
            Operator::Div => "/",
            Operator::Pow => "^",
        }
    }

    pub fn from_symbol(s: &str) -> Option<Self> {
        Some(match s {
            "+" => Operator::Add,
            "-" | "−" => Operator::Sub,
            "*" | "×" => Operator::Mul,
            "/" | "÷" => Operator::Div,
            "^" | "**" => Operator::Pow,
            _ => return None,
        })
    }

    fn precedence(self) -> u8 {
        match self {
            Operator::Add | Operator::Sub => 1,
            Operator::Mul | Operator::Div => 2,
            Operator::Pow => 3,
        }
    }

    fn right_associative(self) -> bool {
        matches!(self, Operator::Pow)
    }

    pub fn apply(self, a: f64, b: f64) -> Result<f64, EquationError> {
        let v = match self {
            Operator::Add => a + b,
            Operator::Sub => a - b,
            Operator::Mul => a * b,
            Operator::Div => {
                if b == 0.0 {
                    return Err(EquationError::DivisionByZero);
                }
                a / b
            }
            Operator::Pow => a.powf(b),
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EquationError::NonFinite)
        }
    }
}

impl fmt::Display for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// Leaf operands.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Leaf {
    Slot(SlotId),
    /// Literal constant, labelled by its decimal value.
    Const(f64),
    Pi,
    /// The distinguished unknown produced by equation inversion.
    Ans,
}

impl Leaf {
    pub fn token(&self) -> String {
        match self {
            Leaf::Slot(s) => s.to_string(),
            Leaf::Const(v) => format_constant(*v),
            Leaf::Pi => "PI".to_string(),
            Leaf::Ans => "ans".to_string(),
        }
    }

    fn from_token(token: &str) -> Option<Leaf> {
        if let Some(slot) = parse_slot_token(token) {
            return Some(Leaf::Slot(slot));
        }
        match token {
            "PI" | "pi" | "π" => return Some(Leaf::Pi),
            "ans" => return Some(Leaf::Ans),
            _ => {}
        }
        parse_plain_number(token).map(Leaf::Const)
    }
}

pub(crate) fn format_constant(v: f64) -> String {
    format!("{v}")
}

/// `digits[.digits]` only; percentages and fractions are handled by callers.
pub(crate) fn parse_plain_number(token: &str) -> Option<f64> {
    let mut parts = token.splitn(2, '.');
    let int = parts.next()?;
    if int.is_empty() || !int.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    if let Some(frac) = parts.next() {
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
    }
    token.parse().ok()
}

#[derive(Debug, Clone, PartialEq)]
pub enum EquationTree {
    Leaf(Leaf),
    Node {
        op: Operator,
        left: Box<EquationTree>,
        right: Box<EquationTree>,
    },
}

impl EquationTree {
    pub fn slot(index: u32) -> Self {
        EquationTree::Leaf(Leaf::Slot(SlotId(index)))
    }

    pub fn constant(v: f64) -> Self {
        EquationTree::Leaf(Leaf::Const(v))
    }

    pub fn ans() -> Self {
        EquationTree::Leaf(Leaf::Ans)
    }

    pub fn node(op: Operator, left: EquationTree, right: EquationTree) -> Self {
        EquationTree::Node {
            op,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    /// Node count `|E|`.
    pub fn size(&self) -> usize {
        match self {
            EquationTree::Leaf(_) => 1,
            EquationTree::Node { left, right, .. } => 1 + left.size() + right.size(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            EquationTree::Leaf(_) => 0,
            EquationTree::Node { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn slots(&self) -> BTreeSet<SlotId> {
        let mut out = BTreeSet::new();
        self.visit_leaves(&mut |leaf| {
            if let Leaf::Slot(s) = leaf {
                out.insert(*s);
            }
        });
        out
    }

    pub fn count_slot(&self, slot: SlotId) -> usize {
        let mut n = 0;
        self.visit_leaves(&mut |leaf| {
            if *leaf == Leaf::Slot(slot) {
                n += 1;
            }
        });
        n
    }

    pub fn visit_leaves<F: FnMut(&Leaf)>(&self, f: &mut F) {
        match self {
            EquationTree::Leaf(leaf) => f(leaf),
            EquationTree::Node { left, right, .. } => {
                left.visit_leaves(f);
                right.visit_leaves(f);
            }
        }
    }

    /// Rebuilds the tree with every leaf passed through `f`.
    pub fn map_leaves<F: Fn(&Leaf) -> EquationTree + Copy>(&self, f: F) -> EquationTree {
        match self {
            EquationTree::Leaf(leaf) => f(leaf),
            EquationTree::Node { op, left, right } => {
                EquationTree::node(*op, left.map_leaves(f), right.map_leaves(f))
            }
        }
    }

    /// Renames slots; slots missing from `mapping` are left alone.
    pub fn rename_slots(&self, mapping: &BTreeMap<SlotId, SlotId>) -> EquationTree {
        self.map_leaves(|leaf| match leaf {
            Leaf::Slot(s) => EquationTree::Leaf(Leaf::Slot(*mapping.get(s).unwrap_or(s))),
            other => EquationTree::Leaf(*other),
        })
    }

    pub fn to_prefix(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.size());
        self.write_prefix(&mut out);
        out
    }

    fn write_prefix(&self, out: &mut Vec<String>) {
        match self {
            EquationTree::Leaf(leaf) => out.push(leaf.token()),
            EquationTree::Node { op, left, right } => {
                out.push(op.symbol().to_string());
                left.write_prefix(out);
                right.write_prefix(out);
            }
        }
    }

    pub fn template_key(&self) -> String {
        self.to_prefix().join(" ")
    }

    pub fn from_prefix<S: AsRef<str>>(tokens: &[S]) -> Result<Self, EquationError> {
        let mut pos = 0;
        let tree = Self::read_prefix(tokens, &mut pos)?;
        if pos != tokens.len() {
            return Err(EquationError::Syntax {
                position: pos,
                reason: "trailing tokens after complete expression".into(),
            });
        }
        tree.check_zero_divisors()?;
        Ok(tree)
    }

    fn read_prefix<S: AsRef<str>>(tokens: &[S], pos: &mut usize) -> Result<Self, EquationError> {
        let Some(tok) = tokens.get(*pos) else {
            return Err(EquationError::Syntax {
                position: *pos,
                reason: "unexpected end of prefix expression".into(),
            });
        };
        let tok = tok.as_ref();
        *pos += 1;
        if let Some(op) = Operator::from_symbol(tok) {
            let left = Self::read_prefix(tokens, pos)?;
            let right = Self::read_prefix(tokens, pos)?;
            return Ok(EquationTree::node(op, left, right));
        }
        Leaf::from_token(tok)
            .map(EquationTree::Leaf)
            .ok_or_else(|| EquationError::UnknownToken(tok.to_string()))
    }

    fn check_zero_divisors(&self) -> Result<(), EquationError> {
        if let EquationTree::Node { op, left, right } = self {
            if matches!(op, Operator::Div | Operator::Pow)
                && matches!(**right, EquationTree::Leaf(Leaf::Const(v)) if v == 0.0)
            {
                return Err(EquationError::Syntax {
                    position: 0,
                    reason: format!("literal zero as right operand of `{op}`"),
                });
            }
            left.check_zero_divisors()?;
            right.check_zero_divisors()?;
        }
        Ok(())
    }

    pub fn evaluate(&self, slots: &Slots) -> Result<f64, EquationError> {
        self.eval_inner(slots, None)
    }

    /// Evaluates with a value bound to the `ans` leaf.
    pub fn evaluate_with_ans(&self, slots: &Slots, ans: f64) -> Result<f64, EquationError> {
        self.eval_inner(slots, Some(ans))
    }

    fn eval_inner(&self, slots: &Slots, ans: Option<f64>) -> Result<f64, EquationError> {
        match self {
            EquationTree::Leaf(Leaf::Slot(s)) => slots
                .get(s)
                .copied()
                .ok_or_else(|| EquationError::MissingSlot(s.to_string())),
            EquationTree::Leaf(Leaf::Const(v)) => Ok(*v),
            EquationTree::Leaf(Leaf::Pi) => Ok(PI),
            EquationTree::Leaf(Leaf::Ans) => {
                ans.ok_or_else(|| EquationError::MissingSlot("ans".into()))
            }
            EquationTree::Node { op, left, right } => {
                let a = left.eval_inner(slots, ans)?;
                let b = right.eval_inner(slots, ans)?;
                op.apply(a, b)
            }
        }
    }

    /// Infix rendering with the minimum parentheses needed to re-parse to the
    /// same tree.
    pub fn to_infix(&self) -> String {
        let mut s = String::new();
        self.write_infix(&mut s);
        s
    }

    fn write_infix(&self, out: &mut String) {
        match self {
            EquationTree::Leaf(leaf) => out.push_str(&leaf.token()),
            EquationTree::Node { op, left, right } => {
                let prec = op.precedence();
                let left_parens = match &**left {
                    EquationTree::Node { op: l, .. } => {
                        l.precedence() < prec || (l.precedence() == prec && op.right_associative())
                    }
                    _ => false,
                };
                let right_parens = match &**right {
                    EquationTree::Node { op: r, .. } => {
                        r.precedence() < prec
                            || (r.precedence() == prec && !op.right_associative())
                    }
                    _ => false,
                };
                wrap(out, left_parens, |o| left.write_infix(o));
                out.push_str(op.symbol());
                wrap(out, right_parens, |o| right.write_infix(o));
            }
        }
    }
}

fn wrap(out: &mut String, parens: bool, body: impl FnOnce(&mut String)) {
    if parens {
        out.push('(');
    }
    body(out);
    if parens {
        out.push(')');
    }
}

impl fmt::Display for EquationTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_infix())
    }
}

impl FromStr for EquationTree {
    type Err = EquationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_equation(s)
    }
}

/// Lexical token of an infix equation.
#[derive(Debug, Clone, PartialEq)]
pub enum EqToken {
    /// Numeral with its surface form; `value` already accounts for `%`.
    Number { value: f64, surface: String },
    Leaf(Leaf),
    Op(Operator),
    LParen,
    RParen,
}

impl EqToken {
    pub fn surface(&self) -> String {
        match self {
            EqToken::Number { surface, .. } => surface.clone(),
            EqToken::Leaf(l) => l.token(),
            EqToken::Op(op) => op.symbol().to_string(),
            EqToken::LParen => "(".into(),
            EqToken::RParen => ")".into(),
        }
    }
}

/// Splits an infix equation into tokens. A leading `x=` is dropped.
pub fn lex_equation(input: &str) -> Result<Vec<EqToken>, EquationError> {
    let mut body = input.trim();
    if let Some(rest) = body
        .strip_prefix("x=")
        .or_else(|| body.strip_prefix("X="))
        .or_else(|| body.strip_prefix("x ="))
    {
        body = rest.trim_start();
    }
    let chars: Vec<char> = body.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            if i + 1 < chars.len() && chars[i] == '.' && chars[i + 1].is_ascii_digit() {
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            let digits: String = chars[start..i].iter().collect();
            let mut value: f64 = digits
                .parse()
                .map_err(|_| EquationError::UnknownToken(digits.clone()))?;
            let mut surface = digits;
            if i < chars.len() && chars[i] == '%' {
                value /= 100.0;
                surface.push('%');
                i += 1;
            }
            tokens.push(EqToken::Number { value, surface });
            continue;
        }
        if c.is_alphabetic() {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            let leaf = match word.as_str() {
                "PI" | "pi" | "π" => Leaf::Pi,
                "ans" => Leaf::Ans,
                w => parse_slot_token(w)
                    .map(Leaf::Slot)
                    .ok_or_else(|| EquationError::UnknownToken(word.clone()))?,
            };
            tokens.push(EqToken::Leaf(leaf));
            continue;
        }
        let tok = match c {
            '(' | '[' | '（' => EqToken::LParen,
            ')' | ']' | '）' => EqToken::RParen,
            '*' if chars.get(i + 1) == Some(&'*') => {
                i += 1;
                EqToken::Op(Operator::Pow)
            }
            _ => match Operator::from_symbol(c.encode_utf8(&mut [0; 4])) {
                Some(op) => EqToken::Op(op),
                None => return Err(EquationError::UnknownToken(c.to_string())),
            },
        };
        tokens.push(tok);
        i += 1;
    }
    Ok(tokens)
}

/// Parses an infix equation string.
pub fn parse_equation(input: &str) -> Result<EquationTree, EquationError> {
    let tokens = lex_equation(input)?;
    parse_tokens(&tokens)
}

pub fn parse_tokens(tokens: &[EqToken]) -> Result<EquationTree, EquationError> {
    let mut parser = Parser { tokens, pos: 0 };
    let tree = parser.expression(0)?;
    if parser.pos != tokens.len() {
        return Err(parser.error("unexpected token"));
    }
    tree.check_zero_divisors()?;
    Ok(tree)
}

struct Parser<'a> {
    tokens: &'a [EqToken],
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, reason: &str) -> EquationError {
        EquationError::Syntax {
            position: self.pos,
            reason: reason.to_string(),
        }
    }

    fn expression(&mut self, min_prec: u8) -> Result<EquationTree, EquationError> {
        let mut lhs = self.unary()?;
        while let Some(EqToken::Op(op)) = self.tokens.get(self.pos) {
            let op = *op;
            let prec = op.precedence();
            if prec < min_prec {
                break;
            }
            self.pos += 1;
            let next_min = if op.right_associative() { prec } else { prec + 1 };
            let rhs = self.expression(next_min)?;
            lhs = EquationTree::node(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<EquationTree, EquationError> {
        match self.tokens.get(self.pos) {
            Some(EqToken::Op(Operator::Sub)) => {
                self.pos += 1;
                // binds tighter than * and /, looser than ^
                let operand = self.expression(Operator::Pow.precedence())?;
                Ok(EquationTree::node(
                    Operator::Sub,
                    EquationTree::constant(0.0),
                    operand,
                ))
            }
            Some(EqToken::Op(Operator::Add)) => {
                self.pos += 1;
                self.unary()
            }
            _ => self.primary(),
        }
    }

    fn primary(&mut self) -> Result<EquationTree, EquationError> {
        let tok = self
            .tokens
            .get(self.pos)
            .ok_or_else(|| self.error("unexpected end of input"))?;
        self.pos += 1;
        match tok {
            EqToken::Number { value, .. } => Ok(EquationTree::constant(*value)),
            EqToken::Leaf(leaf) => Ok(EquationTree::Leaf(*leaf)),
            EqToken::LParen => {
                let inner = self.expression(0)?;
                match self.tokens.get(self.pos) {
                    Some(EqToken::RParen) => {
                        self.pos += 1;
                        Ok(inner)
                    }
                    _ => Err(self.error("expected `)`")),
                }
            }
            EqToken::RParen => {
                self.pos -= 1;
                Err(self.error("unexpected `)`"))
            }
            EqToken::Op(_) => {
                self.pos -= 1;
                Err(self.error("operator without left operand"))
            }
        }
    }
}
