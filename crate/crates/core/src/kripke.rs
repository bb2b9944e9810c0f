//! Multi-agent and uni-modal Kripke models over bitset relations: frame
//! property checks, transitive / reflexive-transitive closure, generated
//! submodels, and the line-oriented model file format.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::syntax::is_valid_ident;

/// A set of state indices below a fixed universe size, stored as a bitset.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateSet {
    universe: usize,
    words: Vec<u64>,
}

impl StateSet {
    pub fn empty(universe: usize) -> Self {
        StateSet {
            universe,
            words: vec![0; universe.div_ceil(64)],
        }
    }

    pub fn full(universe: usize) -> Self {
        let mut s = StateSet::empty(universe);
        for w in &mut s.words {
            *w = u64::MAX;
        }
        s.mask_tail();
        s
    }

    pub fn from_indices(universe: usize, indices: impl IntoIterator<Item = usize>) -> Self {
        let mut s = StateSet::empty(universe);
        for i in indices {
            s.insert(i);
        }
        s
    }

    /// Clears bits at or above the universe bound so that derived equality
    /// and ordering see a canonical representation.
    fn mask_tail(&mut self) {
        let used = self.universe % 64;
        if used != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << used) - 1;
            }
        }
    }

    pub fn universe(&self) -> usize {
        self.universe
    }

    pub fn insert(&mut self, i: usize) {
        assert!(i < self.universe, "state index {i} out of range");
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn remove(&mut self, i: usize) {
        assert!(i < self.universe, "state index {i} out of range");
        self.words[i / 64] &= !(1 << (i % 64));
    }

    pub fn contains(&self, i: usize) -> bool {
        i < self.universe && self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn union_with(&mut self, other: &StateSet) {
        debug_assert_eq!(self.universe, other.universe);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    pub fn intersect_with(&mut self, other: &StateSet) {
        debug_assert_eq!(self.universe, other.universe);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= b;
        }
    }

    pub fn complement(&self) -> StateSet {
        let mut out = self.clone();
        for w in &mut out.words {
            *w = !*w;
        }
        out.mask_tail();
        out
    }

    pub fn is_subset(&self, other: &StateSet) -> bool {
        debug_assert_eq!(self.universe, other.universe);
        self.words
            .iter()
            .zip(&other.words)
            .all(|(a, b)| a & !b == 0)
    }

    pub fn intersects(&self, other: &StateSet) -> bool {
        debug_assert_eq!(self.universe, other.universe);
        self.words.iter().zip(&other.words).any(|(a, b)| a & b != 0)
    }

    pub fn iter(&self) -> StateSetIter<'_> {
        StateSetIter {
            words: &self.words,
            word_idx: 0,
            current: self.words.first().copied().unwrap_or(0),
        }
    }

    /// The smallest member, if any.
    pub fn min_member(&self) -> Option<usize> {
        self.iter().next()
    }
}

impl std::fmt::Debug for StateSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

pub struct StateSetIter<'a> {
    words: &'a [u64],
    word_idx: usize,
    current: u64,
}

impl Iterator for StateSetIter<'_> {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        loop {
            if self.current != 0 {
                let bit = self.current.trailing_zeros() as usize;
                self.current &= self.current - 1;
                return Some(self.word_idx * 64 + bit);
            }
            self.word_idx += 1;
            if self.word_idx >= self.words.len() {
                return None;
            }
            self.current = self.words[self.word_idx];
        }
    }
}

/// A binary relation over `n_states` states, one successor set per state.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Relation {
    n_states: usize,
    rows: Vec<StateSet>,
}

/// Outcome of a frame-property check, carrying a concrete counterexample
/// on failure.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PropertyCheck<W> {
    Holds,
    Fails(W),
}

impl<W> PropertyCheck<W> {
    pub fn holds(&self) -> bool {
        matches!(self, PropertyCheck::Holds)
    }

    pub fn witness(&self) -> Option<&W> {
        match self {
            PropertyCheck::Holds => None,
            PropertyCheck::Fails(w) => Some(w),
        }
    }
}

/// A counterexample to the n-agent frame property behind the pigeonhole
/// axiom: state `x` sees every entry of `ys` (a tuple of length n+1, values
/// may repeat) but no successor of `x` sees two of the `ys` positions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CnViolation {
    pub x: usize,
    pub ys: Vec<usize>,
}

impl Relation {
    pub fn empty(n_states: usize) -> Self {
        Relation {
            n_states,
            rows: vec![StateSet::empty(n_states); n_states],
        }
    }

    pub fn from_pairs(n_states: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut r = Relation::empty(n_states);
        for (x, y) in pairs {
            r.add(x, y);
        }
        r
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn add(&mut self, x: usize, y: usize) {
        assert!(x < self.n_states, "state index {x} out of range");
        self.rows[x].insert(y);
    }

    pub fn has(&self, x: usize, y: usize) -> bool {
        x < self.n_states && self.rows[x].contains(y)
    }

    pub fn successors(&self, x: usize) -> &StateSet {
        &self.rows[x]
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(x, row)| row.iter().map(move |y| (x, y)))
    }

    pub fn pair_count(&self) -> usize {
        self.rows.iter().map(StateSet::count).sum()
    }

    pub fn union(&self, other: &Relation) -> Relation {
        assert_eq!(self.n_states, other.n_states);
        let mut out = self.clone();
        for (row, other_row) in out.rows.iter_mut().zip(&other.rows) {
            row.union_with(other_row);
        }
        out
    }

    /// Relational composition: `(self ∘ other) x y` iff some `z` has
    /// `self x z` and `other z y`.
    pub fn compose(&self, other: &Relation) -> Relation {
        assert_eq!(self.n_states, other.n_states);
        let mut out = Relation::empty(self.n_states);
        for x in 0..self.n_states {
            for z in self.rows[x].iter() {
                out.rows[x].union_with(&other.rows[z]);
            }
        }
        out
    }

    /// Least transitive superset, by squaring to a fixpoint.
    pub fn transitive_closure(&self) -> Relation {
        let mut cur = self.clone();
        loop {
            let next = cur.union(&cur.compose(&cur));
            if next == cur {
                return cur;
            }
            cur = next;
        }
    }

    /// Transitive closure plus the identity over all states.
    pub fn reflexive_transitive_closure(&self) -> Relation {
        let mut out = self.transitive_closure();
        for (x, row) in out.rows.iter_mut().enumerate() {
            row.insert(x);
        }
        out
    }

    /// Seriality: every state has a successor. Witness: a state without one.
    pub fn check_serial(&self) -> PropertyCheck<usize> {
        match (0..self.n_states).find(|&x| self.rows[x].is_empty()) {
            Some(x) => PropertyCheck::Fails(x),
            None => PropertyCheck::Holds,
        }
    }

    /// Transitivity. Witness: `(x, y, z)` with `Rxy`, `Ryz`, not `Rxz`.
    pub fn check_transitive(&self) -> PropertyCheck<(usize, usize, usize)> {
        for x in 0..self.n_states {
            for y in self.rows[x].iter() {
                if !self.rows[y].is_subset(&self.rows[x]) {
                    let z = self.rows[y].iter().find(|&z| !self.rows[x].contains(z));
                    return PropertyCheck::Fails((x, y, z.expect("non-subset row")));
                }
            }
        }
        PropertyCheck::Holds
    }

    /// Euclideanness. Witness: `(x, y, z)` with `Rxy`, `Rxz`, not `Ryz`.
    pub fn check_euclidean(&self) -> PropertyCheck<(usize, usize, usize)> {
        for x in 0..self.n_states {
            for y in self.rows[x].iter() {
                if !self.rows[x].is_subset(&self.rows[y]) {
                    let z = self.rows[x].iter().find(|&z| !self.rows[y].contains(z));
                    return PropertyCheck::Fails((x, y, z.expect("non-subset row")));
                }
            }
        }
        PropertyCheck::Holds
    }

    /// Shift-reflexivity: `Rxy` implies `Ryy`. Witness: a pair violating it.
    pub fn check_shift_reflexive(&self) -> PropertyCheck<(usize, usize)> {
        for x in 0..self.n_states {
            for y in self.rows[x].iter() {
                if !self.rows[y].contains(y) {
                    return PropertyCheck::Fails((x, y));
                }
            }
        }
        PropertyCheck::Holds
    }

    /// The n-agent first-order frame property: whenever `x` sees all entries
    /// of a tuple `ys` of length n+1 (repetition allowed), some successor
    /// `z` of `x` sees two of the tuple positions.
    pub fn cn_frame_property(&self, n: usize) -> PropertyCheck<CnViolation> {
        assert!(n >= 1, "agent count must be at least 1");
        for x in 0..self.n_states {
            let succ: Vec<usize> = self.rows[x].iter().collect();
            if succ.is_empty() {
                continue;
            }
            // Odometer over successor tuples of length n+1.
            let mut idx = vec![0usize; n + 1];
            loop {
                let ys: Vec<usize> = idx.iter().map(|&i| succ[i]).collect();
                let ok = self.rows[x].iter().any(|z| {
                    let zrow = &self.rows[z];
                    (0..ys.len()).any(|i| {
                        zrow.contains(ys[i]) && (i + 1..ys.len()).any(|j| zrow.contains(ys[j]))
                    })
                });
                if !ok {
                    return PropertyCheck::Fails(CnViolation { x, ys });
                }
                let mut k = n + 1;
                loop {
                    if k == 0 {
                        break;
                    }
                    k -= 1;
                    idx[k] += 1;
                    if idx[k] < succ.len() {
                        break;
                    }
                    idx[k] = 0;
                    if k == 0 {
                        k = usize::MAX;
                        break;
                    }
                }
                if k == usize::MAX {
                    break;
                }
            }
        }
        PropertyCheck::Holds
    }
}

/// Frame-property verdicts for one agent's relation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AgentProperties {
    pub serial: PropertyCheck<usize>,
    pub transitive: PropertyCheck<(usize, usize, usize)>,
    pub euclidean: PropertyCheck<(usize, usize, usize)>,
}

impl AgentProperties {
    pub fn kd45(&self) -> bool {
        self.serial.holds() && self.transitive.holds() && self.euclidean.holds()
    }
}

/// Per-agent frame properties plus the aggregate KD45 verdict.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PropertyReport {
    pub agents: Vec<AgentProperties>,
    pub kd45: bool,
}

/// Errors from model construction, file parsing, and state lookups.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{0}")]
    Invalid(String),
    #[error("unknown state `{0}`")]
    UnknownState(String),
}

fn parse_err(line: usize, message: impl Into<String>) -> ModelError {
    ModelError::Parse {
        line,
        message: message.into(),
    }
}

/// A multi-agent Kripke model: ordered states, one relation per agent, and
/// an atom valuation.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct KripkeModel {
    states: Vec<String>,
    relations: Vec<Relation>,
    valuation: BTreeMap<String, StateSet>,
}

impl KripkeModel {
    pub fn new(
        states: Vec<String>,
        relations: Vec<Relation>,
        valuation: BTreeMap<String, StateSet>,
    ) -> Result<Self, ModelError> {
        if states.is_empty() {
            return Err(ModelError::Invalid(
                "a model needs at least one state".into(),
            ));
        }
        if relations.is_empty() {
            return Err(ModelError::Invalid(
                "a model needs at least one agent".into(),
            ));
        }
        let n = states.len();
        for (i, name) in states.iter().enumerate() {
            if !is_valid_ident(name) {
                return Err(ModelError::Invalid(format!("invalid state id `{name}`")));
            }
            if states[..i].contains(name) {
                return Err(ModelError::Invalid(format!("duplicate state id `{name}`")));
            }
        }
        for r in &relations {
            if r.n_states() != n {
                return Err(ModelError::Invalid(format!(
                    "relation is over {} states but the model has {n}",
                    r.n_states()
                )));
            }
        }
        for (atom, set) in &valuation {
            if !is_valid_ident(atom) {
                return Err(ModelError::Invalid(format!("invalid atom name `{atom}`")));
            }
            if set.universe() != n {
                return Err(ModelError::Invalid(format!(
                    "valuation of `{atom}` is over {} states but the model has {n}",
                    set.universe()
                )));
            }
        }
        Ok(KripkeModel {
            states,
            relations,
            valuation,
        })
    }

    /// Convenience constructor from named states, edges, and valuation.
    pub fn build(
        states: &[&str],
        relations: &[&[(&str, &str)]],
        valuation: &[(&str, &[&str])],
    ) -> Result<Self, ModelError> {
        let names: Vec<String> = states.iter().map(|s| s.to_string()).collect();
        let index = |name: &str| -> Result<usize, ModelError> {
            states
                .iter()
                .position(|s| *s == name)
                .ok_or_else(|| ModelError::UnknownState(name.into()))
        };
        let mut rels = Vec::new();
        for pairs in relations {
            let mut r = Relation::empty(states.len());
            for (x, y) in *pairs {
                r.add(index(x)?, index(y)?);
            }
            rels.push(r);
        }
        let mut val = BTreeMap::new();
        for (atom, members) in valuation {
            let mut set = StateSet::empty(states.len());
            for m in *members {
                set.insert(index(m)?);
            }
            val.insert(atom.to_string(), set);
        }
        KripkeModel::new(names, rels, val)
    }

    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn state_name(&self, i: usize) -> &str {
        &self.states[i]
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|s| s == name)
    }

    pub fn require_state(&self, name: &str) -> Result<usize, ModelError> {
        self.state_index(name)
            .ok_or_else(|| ModelError::UnknownState(name.into()))
    }

    pub fn agent_count(&self) -> usize {
        self.relations.len()
    }

    pub fn relation(&self, agent: usize) -> &Relation {
        &self.relations[agent]
    }

    pub fn relations(&self) -> &[Relation] {
        &self.relations
    }

    pub fn valuation(&self) -> &BTreeMap<String, StateSet> {
        &self.valuation
    }

    pub fn atom_states(&self, atom: &str) -> Option<&StateSet> {
        self.valuation.get(atom)
    }

    /// The set union of all agents' relations.
    pub fn union_relation(&self) -> Relation {
        let mut out = self.relations[0].clone();
        for r in &self.relations[1..] {
            out = out.union(r);
        }
        out
    }

    /// Per-agent seriality / transitivity / euclideanness plus the KD45
    /// aggregate.
    pub fn check_frame_properties(&self) -> PropertyReport {
        let agents: Vec<AgentProperties> = self
            .relations
            .iter()
            .map(|r| AgentProperties {
                serial: r.check_serial(),
                transitive: r.check_transitive(),
                euclidean: r.check_euclidean(),
            })
            .collect();
        let kd45 = agents.iter().all(AgentProperties::kd45);
        PropertyReport { agents, kd45 }
    }

    /// Restriction to the states reachable from `root` via the union
    /// relation (root included). State order is preserved.
    pub fn generated_submodel(&self, root: &str) -> Result<KripkeModel, ModelError> {
        let r = self.require_state(root)?;
        let closure = self.union_relation().transitive_closure();
        let mut keep = closure.successors(r).clone();
        keep.insert(r);
        let old_of_new: Vec<usize> = keep.iter().collect();
        let mut new_of_old = vec![usize::MAX; self.state_count()];
        for (new, &old) in old_of_new.iter().enumerate() {
            new_of_old[old] = new;
        }
        let states: Vec<String> = old_of_new.iter().map(|&o| self.states[o].clone()).collect();
        let relations: Vec<Relation> = self
            .relations
            .iter()
            .map(|rel| {
                Relation::from_pairs(
                    states.len(),
                    rel.pairs()
                        .filter(|&(x, y)| keep.contains(x) && keep.contains(y))
                        .map(|(x, y)| (new_of_old[x], new_of_old[y])),
                )
            })
            .collect();
        let valuation: BTreeMap<String, StateSet> = self
            .valuation
            .iter()
            .map(|(atom, set)| {
                let restricted = StateSet::from_indices(
                    states.len(),
                    set.iter()
                        .filter(|&s| keep.contains(s))
                        .map(|s| new_of_old[s]),
                );
                (atom.clone(), restricted)
            })
            .collect();
        KripkeModel::new(states, relations, valuation)
    }

    /// Views a one-agent model as uni-modal.
    pub fn to_uni_modal(&self) -> Option<UniModalModel> {
        if self.relations.len() != 1 {
            return None;
        }
        Some(UniModalModel {
            states: self.states.clone(),
            relation: self.relations[0].clone(),
            valuation: self.valuation.clone(),
        })
    }
}

/// A single-relation model, as used on the uni-modal side of the workbench.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct UniModalModel {
    states: Vec<String>,
    relation: Relation,
    valuation: BTreeMap<String, StateSet>,
}

impl UniModalModel {
    pub fn new(
        states: Vec<String>,
        relation: Relation,
        valuation: BTreeMap<String, StateSet>,
    ) -> Result<Self, ModelError> {
        let m = KripkeModel::new(states, vec![relation], valuation)?;
        Ok(m.to_uni_modal().expect("one relation by construction"))
    }

    /// Convenience constructor from named states, edges, and valuation.
    pub fn build(
        states: &[&str],
        relation: &[(&str, &str)],
        valuation: &[(&str, &[&str])],
    ) -> Result<Self, ModelError> {
        let m = KripkeModel::build(states, &[relation], valuation)?;
        Ok(m.to_uni_modal().expect("one relation by construction"))
    }

    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn state_name(&self, i: usize) -> &str {
        &self.states[i]
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|s| s == name)
    }

    pub fn require_state(&self, name: &str) -> Result<usize, ModelError> {
        self.state_index(name)
            .ok_or_else(|| ModelError::UnknownState(name.into()))
    }

    pub fn relation(&self) -> &Relation {
        &self.relation
    }

    pub fn valuation(&self) -> &BTreeMap<String, StateSet> {
        &self.valuation
    }

    pub fn atom_states(&self, atom: &str) -> Option<&StateSet> {
        self.valuation.get(atom)
    }

    /// The same model as a 1-agent Kripke model.
    pub fn to_kripke(&self) -> KripkeModel {
        KripkeModel {
            states: self.states.clone(),
            relations: vec![self.relation.clone()],
            valuation: self.valuation.clone(),
        }
    }

    /// Restriction to the states reachable from `root` (root included).
    pub fn generated_submodel(&self, root: &str) -> Result<UniModalModel, ModelError> {
        let sub = self.to_kripke().generated_submodel(root)?;
        Ok(sub.to_uni_modal().expect("one relation by construction"))
    }
}

// ---------------------------------------------------------------------------
// Model file format. Line-oriented:
//   states: s t u
//   agents: 2
//   rel 1: s->t t->t
//   val p: t
// `#` starts a comment; `# point: s` names a distinguished state.

/// Parses the model file format; returns the model and the state named by a
/// `# point:` comment, if present.
pub fn parse_model_file(src: &str) -> Result<(KripkeModel, Option<String>), ModelError> {
    let mut states: Option<(usize, Vec<String>)> = None;
    let mut agents: Option<usize> = None;
    let mut rels: BTreeMap<usize, Vec<(String, String, usize)>> = BTreeMap::new();
    let mut vals: BTreeMap<String, Vec<(String, usize)>> = BTreeMap::new();
    let mut point: Option<(String, usize)> = None;

    for (idx, raw) in src.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(name) = comment.trim().strip_prefix("point:") {
                if point.is_some() {
                    return Err(parse_err(lineno, "duplicate `# point:` comment"));
                }
                let name = name.trim();
                if name.is_empty() {
                    return Err(parse_err(lineno, "`# point:` names no state"));
                }
                point = Some((name.to_string(), lineno));
            }
            continue;
        }
        let Some((head, tail)) = line.split_once(':') else {
            return Err(parse_err(
                lineno,
                format!("expected `<keyword>:`, got `{line}`"),
            ));
        };
        let head = head.trim();
        let tail = tail.trim();
        if head == "states" {
            if states.is_some() {
                return Err(parse_err(lineno, "duplicate `states:` line"));
            }
            let ids: Vec<String> = tail.split_whitespace().map(str::to_string).collect();
            states = Some((lineno, ids));
        } else if head == "agents" {
            if agents.is_some() {
                return Err(parse_err(lineno, "duplicate `agents:` line"));
            }
            let n: usize = tail
                .parse()
                .map_err(|_| parse_err(lineno, format!("bad agent count `{tail}`")))?;
            if n == 0 {
                return Err(parse_err(lineno, "agent count must be at least 1"));
            }
            agents = Some(n);
        } else if let Some(num) = head.strip_prefix("rel ") {
            let i: usize = num
                .trim()
                .parse()
                .map_err(|_| parse_err(lineno, format!("bad relation index `{num}`")))?;
            let n = agents
                .ok_or_else(|| parse_err(lineno, "`agents:` must come before `rel` lines"))?;
            if i == 0 || i > n {
                return Err(parse_err(
                    lineno,
                    format!("relation index {i} out of range 1..={n}"),
                ));
            }
            if rels.contains_key(&i) {
                return Err(parse_err(lineno, format!("duplicate `rel {i}:` line")));
            }
            // Tolerate `s->t`, `s -> t`, and `s-> t` alike.
            let spaced = tail.replace("->", " -> ");
            let toks: Vec<&str> = spaced.split_whitespace().collect();
            let mut pairs = Vec::new();
            let mut k = 0;
            while k < toks.len() {
                if k + 2 >= toks.len() || toks[k + 1] != "->" {
                    return Err(parse_err(lineno, "expected `source->target` pairs"));
                }
                pairs.push((toks[k].to_string(), toks[k + 2].to_string(), lineno));
                k += 3;
            }
            rels.insert(i, pairs);
        } else if let Some(atom) = head.strip_prefix("val ") {
            let atom = atom.trim();
            if !is_valid_ident(atom) {
                return Err(parse_err(lineno, format!("invalid atom name `{atom}`")));
            }
            if vals.contains_key(atom) {
                return Err(parse_err(lineno, format!("duplicate `val {atom}:` line")));
            }
            let members: Vec<(String, usize)> = tail
                .split_whitespace()
                .map(|s| (s.to_string(), lineno))
                .collect();
            vals.insert(atom.to_string(), members);
        } else {
            return Err(parse_err(lineno, format!("unknown keyword `{head}`")));
        }
    }

    let (states_line, state_names) =
        states.ok_or_else(|| parse_err(src.lines().count() + 1, "missing `states:` line"))?;
    let n_agents =
        agents.ok_or_else(|| parse_err(src.lines().count() + 1, "missing `agents:` line"))?;
    let index = |name: &str, lineno: usize| -> Result<usize, ModelError> {
        state_names
            .iter()
            .position(|s| s == name)
            .ok_or_else(|| parse_err(lineno, format!("unknown state `{name}`")))
    };

    let mut relations = vec![Relation::empty(state_names.len()); n_agents];
    for (i, pairs) in &rels {
        for (x, y, lineno) in pairs {
            let (xi, yi) = (index(x, *lineno)?, index(y, *lineno)?);
            relations[i - 1].add(xi, yi);
        }
    }
    let mut valuation = BTreeMap::new();
    for (atom, members) in &vals {
        let mut set = StateSet::empty(state_names.len());
        for (name, lineno) in members {
            set.insert(index(name, *lineno)?);
        }
        valuation.insert(atom.clone(), set);
    }

    let point = match point {
        Some((name, lineno)) => {
            index(&name, lineno)?;
            Some(name)
        }
        None => None,
    };
    let model = KripkeModel::new(state_names, relations, valuation).map_err(|e| match e {
        ModelError::Invalid(msg) => parse_err(states_line, msg),
        other => other,
    })?;
    Ok((model, point))
}

/// Writes the model file format; inverse of [`parse_model_file`].
pub fn write_model_file(m: &KripkeModel, point: Option<&str>) -> String {
    let mut out = String::new();
    writeln!(out, "states: {}", m.states.join(" ")).unwrap();
    writeln!(out, "agents: {}", m.agent_count()).unwrap();
    for (i, rel) in m.relations.iter().enumerate() {
        let pairs: Vec<String> = rel
            .pairs()
            .map(|(x, y)| format!("{}->{}", m.states[x], m.states[y]))
            .collect();
        writeln!(out, "rel {}: {}", i + 1, pairs.join(" ")).unwrap();
    }
    for (atom, set) in &m.valuation {
        let members: Vec<&str> = set.iter().map(|s| m.states[s].as_str()).collect();
        writeln!(out, "val {}: {}", atom, members.join(" ")).unwrap();
    }
    if let Some(p) = point {
        debug_assert!(m.state_index(p).is_some(), "point `{p}` not a state");
        writeln!(out, "# point: {p}").unwrap();
    }
    out
}
