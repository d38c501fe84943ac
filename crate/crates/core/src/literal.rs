//! Literal values and hyperparameter search spaces, with their canonical
//! text forms.
//!
//! The canonical form is what ends up in generated scripts and what the
//! content files and form bindings use, so [`parse_literal`] accepts every
//! string [`Literal::canonical`] produces and returns an equal value.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Declared type of a parameter value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueType {
    Int,
    Float,
    Bool,
    String,
    List,
}

impl ValueType {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "int" => Self::Int,
            "float" => Self::Float,
            "bool" => Self::Bool,
            "string" => Self::String,
            "list" => Self::List,
            _ => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Int => "int",
            Self::Float => "float",
            Self::Bool => "bool",
            Self::String => "string",
            Self::List => "list",
        }
    }
}

impl fmt::Display for ValueType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A scalar or list value as written by the user or the content author.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Literal {
    Int(i64),
    Float(f64),
    Bool(bool),
    Str(String),
    List(Vec<Literal>),
}

impl Literal {
    /// Canonical text form: ints bare, floats with a decimal point,
    /// `True`/`False`, single-quoted strings, `[a, b]` lists.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        self.write_canonical(&mut out);
        out
    }

    fn write_canonical(&self, out: &mut String) {
        match self {
            Literal::Int(v) => out.push_str(&v.to_string()),
            Literal::Float(v) => out.push_str(&format_float(*v)),
            Literal::Bool(true) => out.push_str("True"),
            Literal::Bool(false) => out.push_str("False"),
            Literal::Str(s) => quote_into(s, out),
            Literal::List(items) => {
                out.push('[');
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    item.write_canonical(out);
                }
                out.push(']');
            }
        }
    }

    /// Whether this value is acceptable for a parameter of type `ty`.
    /// Integers are accepted where floats are declared.
    pub fn type_checks(&self, ty: ValueType) -> bool {
        match (self, ty) {
            (Literal::Int(_), ValueType::Int | ValueType::Float) => true,
            (Literal::Float(v), ValueType::Float) => v.is_finite(),
            (Literal::Bool(_), ValueType::Bool) => true,
            (Literal::Str(_), ValueType::String) => true,
            (Literal::List(items), ValueType::List) => items.iter().all(Literal::is_finite),
            _ => false,
        }
    }

    fn is_finite(&self) -> bool {
        match self {
            Literal::Float(v) => v.is_finite(),
            Literal::List(items) => items.iter().all(Literal::is_finite),
            _ => true,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Literal::Int(v) => Some(*v as f64),
            Literal::Float(v) => Some(*v),
            _ => None,
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical())
    }
}

fn format_float(v: f64) -> String {
    let s = format!("{v:?}");
    if s.contains('.') || !v.is_finite() {
        return s;
    }
    match s.find('e') {
        Some(idx) => format!("{}.0{}", &s[..idx], &s[idx..]),
        None => format!("{s}.0"),
    }
}

/// Writes `s` as a single-quoted string literal.
pub fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    quote_into(s, &mut out);
    out
}

fn quote_into(s: &str, out: &mut String) {
    out.push('\'');
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\'' => out.push_str("\\'"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('\'');
}

/// Search space for one hyperparameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HyperparamSpace {
    CategoricalList { values: Vec<Literal> },
    IntRange { min: i64, max: i64, step: i64 },
    FloatRange { min: f64, max: f64, step: f64 },
}

impl HyperparamSpace {
    /// Canonical text form; ranges use the target API's range constructors.
    pub fn canonical(&self) -> String {
        match self {
            HyperparamSpace::CategoricalList { values } => {
                Literal::List(values.clone()).canonical()
            }
            HyperparamSpace::IntRange { min, max, step } => {
                format!("IntegerRange({min}, {max}, step={step})")
            }
            HyperparamSpace::FloatRange { min, max, step } => format!(
                "FloatRange({}, {}, step={})",
                format_float(*min),
                format_float(*max),
                format_float(*step)
            ),
        }
    }

    /// Checks the space's own invariants: non-empty lists, `min < max`,
    /// positive step. Returns a description of the first violation.
    pub fn check(&self) -> Result<(), String> {
        match self {
            HyperparamSpace::CategoricalList { values } if values.is_empty() => {
                Err("categorical list must not be empty".into())
            }
            HyperparamSpace::CategoricalList { .. } => Ok(()),
            HyperparamSpace::IntRange { min, max, step } => {
                if min >= max {
                    Err(format!("range min {min} must be below max {max}"))
                } else if *step <= 0 {
                    Err(format!("range step {step} must be positive"))
                } else {
                    Ok(())
                }
            }
            HyperparamSpace::FloatRange { min, max, step } => {
                if !(min.is_finite() && max.is_finite() && step.is_finite()) {
                    Err("range bounds must be finite".into())
                } else if min >= max {
                    Err(format!("range min {min} must be below max {max}"))
                } else if *step <= 0.0 {
                    Err(format!("range step {step} must be positive"))
                } else {
                    Ok(())
                }
            }
        }
    }

    pub fn type_checks(&self, ty: ValueType) -> bool {
        match self {
            HyperparamSpace::CategoricalList { values } => values.iter().all(|v| v.type_checks(ty)),
            HyperparamSpace::IntRange { .. } => matches!(ty, ValueType::Int | ValueType::Float),
            HyperparamSpace::FloatRange { .. } => ty == ValueType::Float,
        }
    }

    /// Number of candidate values a grid search would enumerate.
    pub fn grid_points(&self) -> u64 {
        match self {
            HyperparamSpace::CategoricalList { values } => values.len() as u64,
            HyperparamSpace::IntRange { min, max, step } if *step > 0 => {
                ((max - min) / step) as u64 + 1
            }
            HyperparamSpace::FloatRange { min, max, step } if *step > 0.0 => {
                ((max - min) / step).floor() as u64 + 1
            }
            _ => 0,
        }
    }

    /// Import line the rendered form depends on, if any.
    pub fn required_import(&self) -> Option<&'static str> {
        match self {
            HyperparamSpace::CategoricalList { .. } => None,
            HyperparamSpace::IntRange { .. } => {
                Some("from photonai.optimization import IntegerRange")
            }
            HyperparamSpace::FloatRange { .. } => {
                Some("from photonai.optimization import FloatRange")
            }
        }
    }
}

impl fmt::Display for HyperparamSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical())
    }
}

/// A parameter default as declared in the content files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Space(HyperparamSpace),
    Fixed(Literal),
}

impl ParamValue {
    pub fn canonical(&self) -> String {
        match self {
            ParamValue::Fixed(l) => l.canonical(),
            ParamValue::Space(s) => s.canonical(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{message} at offset {offset} in `{input}`")]
pub struct LiteralError {
    pub input: String,
    pub offset: usize,
    pub message: String,
}

/// Parses the canonical literal syntax. Double-quoted strings and
/// lower-case `true`/`false` are accepted as well.
pub fn parse_literal(input: &str) -> Result<Literal, LiteralError> {
    let mut p = Parser::new(input);
    p.skip_ws();
    let lit = p.literal()?;
    p.skip_ws();
    p.expect_end()?;
    Ok(lit)
}

/// Parses a hyperparameter space: a bracketed list, `IntegerRange(a, b, step=s)`
/// or `FloatRange(a, b, step=s)`.
pub fn parse_space(input: &str) -> Result<HyperparamSpace, LiteralError> {
    let mut p = Parser::new(input);
    p.skip_ws();
    let space = if p.peek() == Some('[') {
        match p.literal()? {
            Literal::List(values) => HyperparamSpace::CategoricalList { values },
            _ => unreachable!("list literal"),
        }
    } else if p.eat_word("IntegerRange") {
        let (min, max, step) = p.range_args()?;
        match (min, max, step) {
            (Literal::Int(min), Literal::Int(max), Literal::Int(step)) => {
                HyperparamSpace::IntRange { min, max, step }
            }
            _ => return Err(p.error("IntegerRange takes integer bounds and step")),
        }
    } else if p.eat_word("FloatRange") {
        let (min, max, step) = p.range_args()?;
        match (min.as_f64(), max.as_f64(), step.as_f64()) {
            (Some(min), Some(max), Some(step)) => HyperparamSpace::FloatRange { min, max, step },
            _ => return Err(p.error("FloatRange takes numeric bounds and step")),
        }
    } else {
        return Err(p.error("expected a list, IntegerRange(..) or FloatRange(..)"));
    };
    p.skip_ws();
    p.expect_end()?;
    Ok(space)
}

struct Parser<'a> {
    input: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(input: &'a str) -> Self {
        Self { input, pos: 0 }
    }

    fn error(&self, message: &str) -> LiteralError {
        LiteralError {
            input: self.input.to_string(),
            offset: self.pos,
            message: message.to_string(),
        }
    }

    fn rest(&self) -> &'a str {
        &self.input[self.pos..]
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_whitespace()) {
            self.bump();
        }
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn eat_word(&mut self, word: &str) -> bool {
        let rest = self.rest();
        if !rest.starts_with(word) {
            return false;
        }
        let after = rest[word.len()..].chars().next();
        if matches!(after, Some(c) if c.is_alphanumeric() || c == '_') {
            return false;
        }
        self.pos += word.len();
        true
    }

    fn expect(&mut self, c: char) -> Result<(), LiteralError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.error(&format!("expected `{c}`")))
        }
    }

    fn expect_end(&self) -> Result<(), LiteralError> {
        if self.pos == self.input.len() {
            Ok(())
        } else {
            Err(self.error("unexpected trailing input"))
        }
    }

    fn literal(&mut self) -> Result<Literal, LiteralError> {
        match self.peek() {
            Some('[') => self.list(),
            Some(q @ ('\'' | '"')) => self.string(q).map(Literal::Str),
            Some(c) if c == '-' || c == '+' || c == '.' || c.is_ascii_digit() => self.number(),
            Some(_) => {
                if self.eat_word("True") || self.eat_word("true") {
                    Ok(Literal::Bool(true))
                } else if self.eat_word("False") || self.eat_word("false") {
                    Ok(Literal::Bool(false))
                } else {
                    Err(self.error("expected a literal"))
                }
            }
            None => Err(self.error("unexpected end of input")),
        }
    }

    fn list(&mut self) -> Result<Literal, LiteralError> {
        self.expect('[')?;
        let mut items = Vec::new();
        self.skip_ws();
        if self.eat(']') {
            return Ok(Literal::List(items));
        }
        loop {
            self.skip_ws();
            items.push(self.literal()?);
            self.skip_ws();
            if self.eat(',') {
                continue;
            }
            self.expect(']')?;
            return Ok(Literal::List(items));
        }
    }

    fn string(&mut self, quote: char) -> Result<String, LiteralError> {
        self.bump();
        let mut out = String::new();
        loop {
            match self.bump() {
                None => return Err(self.error("unterminated string")),
                Some(c) if c == quote => return Ok(out),
                Some('\\') => match self.bump() {
                    Some('n') => out.push('\n'),
                    Some('r') => out.push('\r'),
                    Some('t') => out.push('\t'),
                    Some(c @ ('\\' | '\'' | '"')) => out.push(c),
                    _ => return Err(self.error("invalid escape sequence")),
                },
                Some(c) => out.push(c),
            }
        }
    }

    fn number(&mut self) -> Result<Literal, LiteralError> {
        let start = self.pos;
        if matches!(self.peek(), Some('-' | '+')) {
            self.bump();
        }
        let mut is_float = false;
        while let Some(c) = self.peek() {
            match c {
                '0'..='9' => {}
                '.' => is_float = true,
                'e' | 'E' => {
                    is_float = true;
                    self.bump();
                    if matches!(self.peek(), Some('-' | '+')) {
                        self.bump();
                    }
                    continue;
                }
                _ => break,
            }
            self.bump();
        }
        let text = &self.input[start..self.pos];
        if is_float {
            match text.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(Literal::Float(v)),
                _ => Err(LiteralError {
                    input: self.input.to_string(),
                    offset: start,
                    message: format!("invalid float `{text}`"),
                }),
            }
        } else {
            text.parse::<i64>()
                .map(Literal::Int)
                .map_err(|_| LiteralError {
                    input: self.input.to_string(),
                    offset: start,
                    message: format!("invalid integer `{text}`"),
                })
        }
    }

    fn range_args(&mut self) -> Result<(Literal, Literal, Literal), LiteralError> {
        self.skip_ws();
        self.expect('(')?;
        self.skip_ws();
        let min = self.number()?;
        self.skip_ws();
        self.expect(',')?;
        self.skip_ws();
        let max = self.number()?;
        self.skip_ws();
        self.expect(',')?;
        self.skip_ws();
        if self.eat_word("step") {
            self.skip_ws();
            self.expect('=')?;
            self.skip_ws();
        }
        let step = self.number()?;
        self.skip_ws();
        self.expect(')')?;
        Ok((min, max, step))
    }
}
