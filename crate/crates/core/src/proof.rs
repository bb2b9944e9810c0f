//! Hilbert-style proof checking for the common-belief axiom system:
//! propositional tautology instances, the K / D / 4 / shift-reflexivity /
//! counting schemas, and the modus ponens and necessitation rules.

use std::fmt;

use thiserror::Error;

use crate::syntax::Formula;

/// The axiom schemas admitting metavariable instances.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AxiomSchema {
    K,
    D,
    Four,
    Cc,
    Cn,
}

impl fmt::Display for AxiomSchema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AxiomSchema::K => "k",
            AxiomSchema::D => "d",
            AxiomSchema::Four => "4",
            AxiomSchema::Cc => "cc",
            AxiomSchema::Cn => "cn",
        })
    }
}

impl std::str::FromStr for AxiomSchema {
    type Err = ProofError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "k" => Ok(AxiomSchema::K),
            "d" => Ok(AxiomSchema::D),
            "4" => Ok(AxiomSchema::Four),
            "cc" => Ok(AxiomSchema::Cc),
            "cn" => Ok(AxiomSchema::Cn),
            other => Err(ProofError::UnknownSchema(other.to_string())),
        }
    }
}

/// Why a proof line claims to hold. Cited line numbers are 1-based.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Justification {
    Prop,
    Axiom(AxiomSchema),
    Mp(usize, usize),
    Nec(usize),
}

impl fmt::Display for Justification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Justification::Prop => f.write_str("prop"),
            Justification::Axiom(s) => write!(f, "{s}"),
            Justification::Mp(i, j) => write!(f, "mp {i} {j}"),
            Justification::Nec(i) => write!(f, "nec {i}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProofLine {
    pub formula: Formula,
    pub justification: Justification,
}

/// A proof in the n-agent system; the agent count fixes which counting
/// axiom instances are admissible.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Proof {
    pub agent_count: usize,
    pub lines: Vec<ProofLine>,
}

impl Proof {
    pub fn new(agent_count: usize, lines: Vec<ProofLine>) -> Result<Self, ProofError> {
        if agent_count < 2 {
            return Err(ProofError::AgentCount(agent_count));
        }
        Ok(Proof { agent_count, lines })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProofError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("expected {expected} argument formulas, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("agent count must be at least 2, got {0}")]
    AgentCount(usize),
    #[error("unknown axiom schema `{0}`")]
    UnknownSchema(String),
}

/// Checker verdict; rejection names the first bad line (1-based).
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Accepted,
    Rejected { line: usize, reason: String },
}

impl Verdict {
    pub fn accepted(&self) -> bool {
        matches!(self, Verdict::Accepted)
    }
}

// ---------------------------------------------------------------------------
// Propositional skeletons.

fn collect_leaves<'f>(f: &'f Formula, out: &mut Vec<&'f Formula>) {
    match f {
        Formula::Atom(_) | Formula::C(_) => {
            if !out.contains(&f) {
                out.push(f);
            }
        }
        Formula::Top => {}
        Formula::Neg(x) => collect_leaves(x, out),
        Formula::And(a, b) => {
            collect_leaves(a, out);
            collect_leaves(b, out);
        }
    }
}

fn eval_skeleton(f: &Formula, leaves: &[&Formula], mask: u64) -> bool {
    match f {
        Formula::Atom(_) | Formula::C(_) => {
            let i = leaves.iter().position(|g| *g == f).expect("collected leaf");
            mask >> i & 1 == 1
        }
        Formula::Top => true,
        Formula::Neg(x) => !eval_skeleton(x, leaves, mask),
        Formula::And(a, b) => eval_skeleton(a, leaves, mask) && eval_skeleton(b, leaves, mask),
    }
}

/// True iff the propositional skeleton of `f` — maximal `C`-subformulas and
/// atoms read as propositional letters — is a truth-table tautology.
pub fn is_tautology_instance(f: &Formula) -> bool {
    let mut leaves = Vec::new();
    collect_leaves(f, &mut leaves);
    assert!(
        leaves.len() <= 24,
        "tautology check limited to 24 distinct leaves"
    );
    (0..1u64 << leaves.len()).all(|mask| eval_skeleton(f, &leaves, mask))
}

// ---------------------------------------------------------------------------
// Schema matching.

/// Splits a conjunction spine: `a & (b & c)` and `(a & b) & c` both yield
/// `[a, b, c]`.
fn flatten_and(f: &Formula) -> Vec<&Formula> {
    match f {
        Formula::And(a, b) => {
            let mut out = flatten_and(a);
            out.extend(flatten_and(b));
            out
        }
        _ => vec![f],
    }
}

/// Splits a disjunction spine through the `|` view, analogously.
fn flatten_or(f: &Formula) -> Vec<&Formula> {
    match f.as_or() {
        Some((a, b)) => {
            let mut out = flatten_or(a);
            out.extend(flatten_or(b));
            out
        }
        None => vec![f],
    }
}

fn match_k(f: &Formula) -> bool {
    let Some((ante, cons)) = f.as_implies() else {
        return false;
    };
    let Formula::C(body) = ante else { return false };
    let Some((a, b)) = body.as_implies() else {
        return false;
    };
    let Some((ca, cb)) = cons.as_implies() else {
        return false;
    };
    matches!((ca, cb), (Formula::C(x), Formula::C(y)) if **x == *a && **y == *b)
}

fn match_d(f: &Formula) -> bool {
    let Some((ante, cons)) = f.as_implies() else {
        return false;
    };
    let Formula::C(phi) = ante else { return false };
    match cons.as_neg_c() {
        Some(Formula::Neg(inner)) => **inner == **phi,
        _ => false,
    }
}

fn match_four(f: &Formula) -> bool {
    let Some((ante, cons)) = f.as_implies() else {
        return false;
    };
    let Formula::C(phi) = ante else { return false };
    match cons {
        Formula::C(outer) => matches!(&**outer, Formula::C(inner) if **inner == **phi),
        _ => false,
    }
}

fn match_cc(f: &Formula) -> bool {
    let Formula::C(body) = f else { return false };
    let Some((ante, cons)) = body.as_implies() else {
        return false;
    };
    matches!(ante, Formula::C(phi) if **phi == *cons)
}

/// Matches the n-agent counting axiom. Conjunction and disjunction chains
/// are compared after flattening, so any association of the written chains
/// is accepted; the pair order must be the canonical increasing (i, j).
fn match_cn(f: &Formula, n: usize) -> bool {
    if n < 2 {
        return false;
    }
    let Some((ante, cons)) = f.as_implies() else {
        return false;
    };
    let Formula::C(body) = ante else { return false };
    let disjuncts = flatten_or(cons);
    if disjuncts.len() != n + 1 {
        return false;
    }
    let mut phis = Vec::with_capacity(n + 1);
    for d in disjuncts {
        let Formula::C(inner) = d else { return false };
        phis.push(&**inner);
    }
    let conjuncts = flatten_and(body);
    if conjuncts.len() != n * (n + 1) / 2 {
        return false;
    }
    let mut k = 0;
    for i in 0..=n {
        for j in i + 1..=n {
            let want = Formula::or(Formula::c(phis[i].clone()), Formula::c(phis[j].clone()));
            if *conjuncts[k] != want {
                return false;
            }
            k += 1;
        }
    }
    true
}

/// True iff `f` is an instance of `schema` under uniform substitution.
/// Matching is syntactic; `n` is only consulted by the counting schema.
pub fn match_axiom(f: &Formula, schema: AxiomSchema, n: usize) -> bool {
    match schema {
        AxiomSchema::K => match_k(f),
        AxiomSchema::D => match_d(f),
        AxiomSchema::Four => match_four(f),
        AxiomSchema::Cc => match_cc(f),
        AxiomSchema::Cn => match_cn(f, n),
    }
}

fn or_chain(items: Vec<Formula>) -> Formula {
    items
        .into_iter()
        .rev()
        .reduce(|acc, x| Formula::or(x, acc))
        .expect("non-empty chain")
}

fn and_chain(items: Vec<Formula>) -> Formula {
    items
        .into_iter()
        .rev()
        .reduce(|acc, x| Formula::and(x, acc))
        .expect("non-empty chain")
}

/// Instantiates a schema: `k` takes two arguments, `d`/`4`/`cc` one, and
/// `cn` exactly n+1.
pub fn build_axiom(schema: AxiomSchema, n: usize, args: &[Formula]) -> Result<Formula, ProofError> {
    let want = |count: usize| {
        if args.len() == count {
            Ok(())
        } else {
            Err(ProofError::Arity {
                expected: count,
                got: args.len(),
            })
        }
    };
    match schema {
        AxiomSchema::K => {
            want(2)?;
            Ok(Formula::implies(
                Formula::c(Formula::implies(args[0].clone(), args[1].clone())),
                Formula::implies(Formula::c(args[0].clone()), Formula::c(args[1].clone())),
            ))
        }
        AxiomSchema::D => {
            want(1)?;
            Ok(Formula::implies(
                Formula::c(args[0].clone()),
                Formula::neg(Formula::c(Formula::neg(args[0].clone()))),
            ))
        }
        AxiomSchema::Four => {
            want(1)?;
            Ok(Formula::implies(
                Formula::c(args[0].clone()),
                Formula::c(Formula::c(args[0].clone())),
            ))
        }
        AxiomSchema::Cc => {
            want(1)?;
            Ok(Formula::c(Formula::implies(
                Formula::c(args[0].clone()),
                args[0].clone(),
            )))
        }
        AxiomSchema::Cn => build_cn(n, args),
    }
}

/// The canonical n-agent counting axiom instance over `args` (length n+1):
/// `C ⋀_{i<j} (C args_i | C args_j) -> ⋁_i C args_i`, chains nested to the
/// right in increasing (i, j) order.
pub fn build_cn(n: usize, args: &[Formula]) -> Result<Formula, ProofError> {
    if args.len() != n + 1 {
        return Err(ProofError::Arity {
            expected: n + 1,
            got: args.len(),
        });
    }
    let mut pairs = Vec::new();
    for i in 0..=n {
        for j in i + 1..=n {
            pairs.push(Formula::or(
                Formula::c(args[i].clone()),
                Formula::c(args[j].clone()),
            ));
        }
    }
    let cs = args.iter().map(|a| Formula::c(a.clone())).collect();
    Ok(Formula::implies(Formula::c(and_chain(pairs)), or_chain(cs)))
}

/// The dual counting instance:
/// `⋀_i <C> args_i -> <C> ⋁_{i<j} (<C> args_i & <C> args_j)`.
pub fn build_chat_n(n: usize, args: &[Formula]) -> Result<Formula, ProofError> {
    if args.len() != n + 1 {
        return Err(ProofError::Arity {
            expected: n + 1,
            got: args.len(),
        });
    }
    let diamonds: Vec<Formula> = args.iter().map(|a| Formula::chat(a.clone())).collect();
    let mut pairs = Vec::new();
    for i in 0..=n {
        for j in i + 1..=n {
            pairs.push(Formula::and(diamonds[i].clone(), diamonds[j].clone()));
        }
    }
    Ok(Formula::implies(
        and_chain(diamonds.clone()),
        Formula::chat(or_chain(pairs)),
    ))
}

// ---------------------------------------------------------------------------
// Checking and the proof file format.

/// Checks every line; accepts iff each is a recognized axiom instance or a
/// correct rule application to strictly earlier lines.
pub fn check_proof(p: &Proof) -> Verdict {
    for (idx, line) in p.lines.iter().enumerate() {
        let lineno = idx + 1;
        let reject = |reason: String| Verdict::Rejected {
            line: lineno,
            reason,
        };
        let cited = |i: usize| -> Result<&Formula, String> {
            if i == 0 || i > idx {
                Err(format!("citation {i} must name an earlier line"))
            } else {
                Ok(&p.lines[i - 1].formula)
            }
        };
        match &line.justification {
            Justification::Prop => {
                if !is_tautology_instance(&line.formula) {
                    return reject("not a propositional tautology instance".into());
                }
            }
            Justification::Axiom(schema) => {
                if !match_axiom(&line.formula, *schema, p.agent_count) {
                    return reject(format!("not an instance of schema {schema}"));
                }
            }
            Justification::Mp(i, j) => {
                let major = match cited(*i) {
                    Ok(f) => f,
                    Err(e) => return reject(e),
                };
                let minor = match cited(*j) {
                    Ok(f) => f,
                    Err(e) => return reject(e),
                };
                let Some((ante, cons)) = major.as_implies() else {
                    return reject(format!("line {i} is not an implication"));
                };
                if ante != minor {
                    return reject(format!(
                        "line {j} does not match the antecedent of line {i}"
                    ));
                }
                if *cons != line.formula {
                    return reject(format!("formula is not the consequent of line {i}"));
                }
            }
            Justification::Nec(i) => {
                let premise = match cited(*i) {
                    Ok(f) => f,
                    Err(e) => return reject(e),
                };
                let ok = matches!(&line.formula, Formula::C(inner) if **inner == *premise);
                if !ok {
                    return reject(format!("formula is not line {i} under C"));
                }
            }
        }
    }
    Verdict::Accepted
}

/// Parses the proof file format: one `<index>. <formula> ; <justification>`
/// per line, `#` comments and blank lines skipped, indices consecutive
/// from 1.
pub fn parse_proof_lines(src: &str) -> Result<Vec<ProofLine>, ProofError> {
    let mut out: Vec<ProofLine> = Vec::new();
    for (lineno, raw) in src.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| ProofError::Parse {
            line: lineno,
            message,
        };
        let Some((index, rest)) = line.split_once('.') else {
            return Err(err("expected `<index>. <formula> ; <justification>`".into()));
        };
        let index: usize = index
            .trim()
            .parse()
            .map_err(|_| err(format!("bad line index `{}`", index.trim())))?;
        if index != out.len() + 1 {
            return Err(err(format!(
                "line index {index} out of order; expected {}",
                out.len() + 1
            )));
        }
        let Some((formula_text, just_text)) = rest.split_once(';') else {
            return Err(err("missing `;` before the justification".into()));
        };
        let formula: Formula = formula_text
            .trim()
            .parse()
            .map_err(|e| err(format!("bad formula: {e}")))?;
        let toks: Vec<&str> = just_text.split_whitespace().collect();
        let justification = match toks.as_slice() {
            ["prop"] => Justification::Prop,
            [schema @ ("k" | "d" | "4" | "cc" | "cn")] => {
                Justification::Axiom(schema.parse().expect("schema names match FromStr"))
            }
            ["mp", i, j] => {
                let pi = i.parse().map_err(|_| err(format!("bad citation `{i}`")))?;
                let pj = j.parse().map_err(|_| err(format!("bad citation `{j}`")))?;
                Justification::Mp(pi, pj)
            }
            ["nec", i] => {
                Justification::Nec(i.parse().map_err(|_| err(format!("bad citation `{i}`")))?)
            }
            other => {
                return Err(err(format!("unknown justification `{}`", other.join(" "))));
            }
        };
        out.push(ProofLine {
            formula,
            justification,
        });
    }
    Ok(out)
}
