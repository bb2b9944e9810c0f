//! Formula syntax for the single-modality language of common belief: atoms,
//! `top`, negation, conjunction, and the operator `C`, with `bot`, `|`, `->`,
//! and the diamond `<C>` as parse/print sugar over the primitive connectives.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Reserved words that can never be atom names.
pub const KEYWORDS: [&str; 3] = ["top", "bot", "C"];

/// Returns true when `name` is a lexically valid atom / state identifier:
/// `[a-z][a-zA-Z0-9_]*` and not a keyword.
pub fn is_valid_ident(name: &str) -> bool {
    let mut chars = name.chars();
    let head_ok = chars.next().is_some_and(|c| c.is_ascii_lowercase());
    head_ok && chars.all(|c| c.is_ascii_alphanumeric() || c == '_') && !KEYWORDS.contains(&name)
}

/// A formula of the common-belief language.
///
/// Only `Atom`, `Top`, `Neg`, `And`, and `C` are primitive. The derived forms
/// are desugared on construction and re-sugared by the printer:
/// `bot = ~top`, `a | b = ~(~a & ~b)`, `a -> b = ~(a & ~b)`, `<C> a = ~C~a`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Formula {
    Atom(String),
    Top,
    Neg(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    C(Box<Formula>),
}

impl Formula {
    /// Atom constructor; `name` must satisfy [`is_valid_ident`].
    pub fn atom(name: impl Into<String>) -> Self {
        let name = name.into();
        debug_assert!(is_valid_ident(&name), "invalid atom name {name:?}");
        Formula::Atom(name)
    }

    pub fn top() -> Self {
        Formula::Top
    }

    /// `bot`, desugared to `~top`.
    pub fn bot() -> Self {
        Formula::neg(Formula::Top)
    }

    // An associated constructor, not a negation of self.
    #[allow(clippy::should_implement_trait)]
    pub fn neg(f: Formula) -> Self {
        Formula::Neg(Box::new(f))
    }

    pub fn and(a: Formula, b: Formula) -> Self {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn c(f: Formula) -> Self {
        Formula::C(Box::new(f))
    }

    /// `a | b`, desugared to `~(~a & ~b)`.
    pub fn or(a: Formula, b: Formula) -> Self {
        Formula::neg(Formula::and(Formula::neg(a), Formula::neg(b)))
    }

    /// `a -> b`, desugared to `~(a & ~b)`.
    pub fn implies(a: Formula, b: Formula) -> Self {
        Formula::neg(Formula::and(a, Formula::neg(b)))
    }

    /// The diamond `<C> a`, desugared to `~C~a`.
    pub fn chat(f: Formula) -> Self {
        Formula::neg(Formula::c(Formula::neg(f)))
    }

    /// Views `~(a & ~b)` as the implication `a -> b`.
    pub fn as_implies(&self) -> Option<(&Formula, &Formula)> {
        if let Formula::Neg(x) = self {
            if let Formula::And(a, b) = &**x {
                if let Formula::Neg(r) = &**b {
                    return Some((a, r));
                }
            }
        }
        None
    }

    /// Views `~(~a & ~b)` as the disjunction `a | b`.
    pub fn as_or(&self) -> Option<(&Formula, &Formula)> {
        if let Formula::Neg(x) = self {
            if let Formula::And(a, b) = &**x {
                if let (Formula::Neg(l), Formula::Neg(r)) = (&**a, &**b) {
                    return Some((l, r));
                }
            }
        }
        None
    }

    /// Views `~C(psi)` as a diamond, returning `psi`.
    pub fn as_neg_c(&self) -> Option<&Formula> {
        if let Formula::Neg(x) = self {
            if let Formula::C(y) = &**x {
                return Some(y);
            }
        }
        None
    }

    /// Atom names occurring in the formula, sorted.
    pub fn atoms(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms(&self, out: &mut BTreeSet<String>) {
        match self {
            Formula::Atom(p) => {
                out.insert(p.clone());
            }
            Formula::Top => {}
            Formula::Neg(x) | Formula::C(x) => x.collect_atoms(out),
            Formula::And(a, b) => {
                a.collect_atoms(out);
                b.collect_atoms(out);
            }
        }
    }

    /// The set of subformulas (the formula itself included), closed under
    /// immediate subterms of the primitive constructors.
    pub fn subformulas(&self) -> BTreeSet<Formula> {
        let mut out = BTreeSet::new();
        self.collect_subformulas(&mut out);
        out
    }

    fn collect_subformulas(&self, out: &mut BTreeSet<Formula>) {
        if !out.insert(self.clone()) {
            return;
        }
        match self {
            Formula::Atom(_) | Formula::Top => {}
            Formula::Neg(x) | Formula::C(x) => x.collect_subformulas(out),
            Formula::And(a, b) => {
                a.collect_subformulas(out);
                b.collect_subformulas(out);
            }
        }
    }

    /// The proper closure: the smallest superset of `subformulas(self)` that
    /// contains `<C> top` (as `~C~top`) with its subformulas and has `~C psi`
    /// for every `C psi` it contains.
    pub fn proper_closure(&self) -> ClosureSet {
        let mut formulas = self.subformulas();
        Formula::chat(Formula::top()).collect_subformulas(&mut formulas);
        loop {
            let missing: Vec<Formula> = formulas
                .iter()
                .filter(|f| matches!(f, Formula::C(_)))
                .map(|f| Formula::neg(f.clone()))
                .filter(|neg| !formulas.contains(neg))
                .collect();
            if missing.is_empty() {
                break;
            }
            formulas.extend(missing);
        }
        let diamonds = formulas
            .iter()
            .filter(|f| f.as_neg_c().is_some())
            .cloned()
            .collect();
        ClosureSet { formulas, diamonds }
    }

    /// Parses a formula; equivalent to the `FromStr` impl.
    pub fn parse(src: &str) -> Result<Formula, ParseError> {
        Parser::new(src)?.parse_all()
    }
}

impl FromStr for Formula {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Formula::parse(s)
    }
}

/// A proper closure set: ordered formulas plus the index of its diamonds
/// (members of shape `~C psi`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClosureSet {
    formulas: BTreeSet<Formula>,
    diamonds: BTreeSet<Formula>,
}

impl ClosureSet {
    pub fn formulas(&self) -> impl Iterator<Item = &Formula> {
        self.formulas.iter()
    }

    /// The members of shape `~C psi`, in formula order.
    pub fn diamonds(&self) -> impl Iterator<Item = &Formula> {
        self.diamonds.iter()
    }

    pub fn contains(&self, f: &Formula) -> bool {
        self.formulas.contains(f)
    }

    pub fn len(&self) -> usize {
        self.formulas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.formulas.is_empty()
    }
}

/// A formula parse error with 1-based source position.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{col}: {message}")]
pub struct ParseError {
    pub line: u32,
    pub col: u32,
    pub message: String,
}

// ---------------------------------------------------------------------------
// Printing: re-sugars bot / <C> / | / -> and emits minimal parentheses.
// Unary binds tightest, then &, then |, then -> (right-associative);
// & and | associate to the left.

enum View<'a> {
    Atom(&'a str),
    Top,
    Bot,
    Neg(&'a Formula),
    C(&'a Formula),
    CHat(&'a Formula),
    And(&'a Formula, &'a Formula),
    Or(&'a Formula, &'a Formula),
    Implies(&'a Formula, &'a Formula),
}

fn view(f: &Formula) -> View<'_> {
    match f {
        Formula::Atom(s) => View::Atom(s),
        Formula::Top => View::Top,
        Formula::And(a, b) => View::And(a, b),
        Formula::C(x) => View::C(x),
        Formula::Neg(x) => match &**x {
            Formula::Top => View::Bot,
            Formula::C(y) => match &**y {
                Formula::Neg(z) => View::CHat(z),
                _ => View::Neg(x),
            },
            Formula::And(a, b) => match (&**a, &**b) {
                (Formula::Neg(l), Formula::Neg(r)) => View::Or(l, r),
                (_, Formula::Neg(r)) => View::Implies(a, r),
                _ => View::Neg(x),
            },
            _ => View::Neg(x),
        },
    }
}

fn prec(f: &Formula) -> u8 {
    match view(f) {
        View::Atom(_) | View::Top | View::Bot => 4,
        View::Neg(_) | View::C(_) | View::CHat(_) => 3,
        View::And(..) => 2,
        View::Or(..) => 1,
        View::Implies(..) => 0,
    }
}

fn write_child(f: &Formula, min: u8, out: &mut String) {
    if prec(f) < min {
        out.push('(');
        write_formula(f, out);
        out.push(')');
    } else {
        write_formula(f, out);
    }
}

fn write_formula(f: &Formula, out: &mut String) {
    match view(f) {
        View::Atom(s) => out.push_str(s),
        View::Top => out.push_str("top"),
        View::Bot => out.push_str("bot"),
        View::Neg(x) => {
            out.push('~');
            write_child(x, 3, out);
        }
        View::C(x) => {
            out.push_str("C ");
            write_child(x, 3, out);
        }
        View::CHat(x) => {
            out.push_str("<C> ");
            write_child(x, 3, out);
        }
        View::And(a, b) => {
            write_child(a, 2, out);
            out.push_str(" & ");
            write_child(b, 3, out);
        }
        View::Or(a, b) => {
            write_child(a, 1, out);
            out.push_str(" | ");
            write_child(b, 2, out);
        }
        View::Implies(a, b) => {
            write_child(a, 1, out);
            out.push_str(" -> ");
            write_child(b, 0, out);
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        write_formula(self, &mut out);
        f.write_str(&out)
    }
}

// ---------------------------------------------------------------------------
// Lexing and recursive-descent parsing.

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Top,
    Bot,
    Tilde,
    C,
    CHat,
    Amp,
    Pipe,
    Arrow,
    LParen,
    RParen,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Top => f.write_str("`top`"),
            Tok::Bot => f.write_str("`bot`"),
            Tok::Tilde => f.write_str("`~`"),
            Tok::C => f.write_str("`C`"),
            Tok::CHat => f.write_str("`<C>`"),
            Tok::Amp => f.write_str("`&`"),
            Tok::Pipe => f.write_str("`|`"),
            Tok::Arrow => f.write_str("`->`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
        }
    }
}

struct Parser {
    toks: Vec<(Tok, u32, u32)>,
    end: (u32, u32),
    pos: usize,
}

fn err(line: u32, col: u32, message: impl Into<String>) -> ParseError {
    ParseError {
        line,
        col,
        message: message.into(),
    }
}

impl Parser {
    fn new(src: &str) -> Result<Parser, ParseError> {
        let mut toks = Vec::new();
        let mut line = 1u32;
        let mut col = 1u32;
        let mut chars = src.chars().peekable();
        while let Some(&ch) = chars.peek() {
            let (tl, tc) = (line, col);
            let mut bump = |chars: &mut std::iter::Peekable<std::str::Chars>| {
                let c = chars.next();
                if c == Some('\n') {
                    line += 1;
                    col = 1;
                } else {
                    col += 1;
                }
                c
            };
            match ch {
                c if c.is_whitespace() => {
                    bump(&mut chars);
                }
                '~' => {
                    bump(&mut chars);
                    toks.push((Tok::Tilde, tl, tc));
                }
                '&' => {
                    bump(&mut chars);
                    toks.push((Tok::Amp, tl, tc));
                }
                '|' => {
                    bump(&mut chars);
                    toks.push((Tok::Pipe, tl, tc));
                }
                '(' => {
                    bump(&mut chars);
                    toks.push((Tok::LParen, tl, tc));
                }
                ')' => {
                    bump(&mut chars);
                    toks.push((Tok::RParen, tl, tc));
                }
                'C' => {
                    bump(&mut chars);
                    toks.push((Tok::C, tl, tc));
                }
                '-' => {
                    bump(&mut chars);
                    if chars.peek() == Some(&'>') {
                        bump(&mut chars);
                        toks.push((Tok::Arrow, tl, tc));
                    } else {
                        return Err(err(tl, tc, "expected `->`"));
                    }
                }
                '<' => {
                    bump(&mut chars);
                    if chars.peek() == Some(&'C') {
                        bump(&mut chars);
                        if chars.peek() == Some(&'>') {
                            bump(&mut chars);
                            toks.push((Tok::CHat, tl, tc));
                        } else {
                            return Err(err(tl, tc, "expected `<C>`"));
                        }
                    } else {
                        return Err(err(tl, tc, "expected `<C>`"));
                    }
                }
                c if c.is_ascii_lowercase() => {
                    let mut name = String::new();
                    while let Some(&c) = chars.peek() {
                        if c.is_ascii_alphanumeric() || c == '_' {
                            name.push(c);
                            bump(&mut chars);
                        } else {
                            break;
                        }
                    }
                    let tok = match name.as_str() {
                        "top" => Tok::Top,
                        "bot" => Tok::Bot,
                        _ => Tok::Ident(name),
                    };
                    toks.push((tok, tl, tc));
                }
                c => return Err(err(tl, tc, format!("unexpected character `{c}`"))),
            }
        }
        Ok(Parser {
            toks,
            end: (line, col),
            pos: 0,
        })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _, _)| t)
    }

    fn here(&self) -> (u32, u32) {
        self.toks
            .get(self.pos)
            .map(|&(_, l, c)| (l, c))
            .unwrap_or(self.end)
    }

    fn advance(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        self.pos += 1;
        t
    }

    fn parse_all(mut self) -> Result<Formula, ParseError> {
        let f = self.parse_implies()?;
        if let Some(t) = self.peek() {
            let (l, c) = self.here();
            return Err(err(l, c, format!("unexpected {t} after formula")));
        }
        Ok(f)
    }

    // phi "->" phi, right-associative, lowest precedence.
    fn parse_implies(&mut self) -> Result<Formula, ParseError> {
        let lhs = self.parse_or()?;
        if self.peek() == Some(&Tok::Arrow) {
            self.advance();
            let rhs = self.parse_implies()?;
            return Ok(Formula::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn parse_or(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.parse_and()?;
        while self.peek() == Some(&Tok::Pipe) {
            self.advance();
            let rhs = self.parse_and()?;
            lhs = Formula::or(lhs, rhs);
        }
        Ok(lhs)
    }

    fn parse_and(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.parse_unary()?;
        while self.peek() == Some(&Tok::Amp) {
            self.advance();
            let rhs = self.parse_unary()?;
            lhs = Formula::and(lhs, rhs);
        }
        Ok(lhs)
    }

    fn parse_unary(&mut self) -> Result<Formula, ParseError> {
        let (l, c) = self.here();
        match self.peek() {
            Some(Tok::Tilde) => {
                self.advance();
                Ok(Formula::neg(self.parse_unary()?))
            }
            Some(Tok::C) => {
                self.advance();
                Ok(Formula::c(self.parse_unary()?))
            }
            Some(Tok::CHat) => {
                self.advance();
                Ok(Formula::chat(self.parse_unary()?))
            }
            Some(Tok::Top) => {
                self.advance();
                Ok(Formula::Top)
            }
            Some(Tok::Bot) => {
                self.advance();
                Ok(Formula::bot())
            }
            Some(Tok::Ident(_)) => {
                if let Tok::Ident(name) = self.advance() {
                    Ok(Formula::Atom(name))
                } else {
                    unreachable!()
                }
            }
            Some(Tok::LParen) => {
                self.advance();
                let f = self.parse_implies()?;
                if self.peek() == Some(&Tok::RParen) {
                    self.advance();
                    Ok(f)
                } else {
                    let (l2, c2) = self.here();
                    Err(err(l2, c2, "expected `)`"))
                }
            }
            Some(t) => Err(err(l, c, format!("expected a formula, found {t}"))),
            None => Err(err(l, c, "expected a formula, found end of input")),
        }
    }
}
