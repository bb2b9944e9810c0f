//! Bounded countermodel search over KD45 relation tuples: exhaustive
//! enumeration behind a blowup guard, deterministically sharded workers,
//! seeded random sampling, and desk-scale validity certification.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::kripke::{KripkeModel, Relation, StateSet};
use crate::semantics::{self, ClosureMode};
use crate::syntax::Formula;

/// How much of the bounded model space a search visits.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Budget {
    Exhaustive,
    Random { sample_count: usize, seed: u64 },
}

/// Bounds and mode for one search run.
#[derive(Clone, Debug)]
pub struct SearchConfig {
    pub agent_count: usize,
    pub max_states: usize,
    pub atoms: Vec<String>,
    pub budget: Budget,
    pub mode: ClosureMode,
    pub jobs: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SearchError {
    #[error(
        "exhaustive search is limited to 4 states, 3 agents, and 3 atoms \
         (requested {states} states, {agents} agents, {atoms} atoms)"
    )]
    BoundGuard {
        states: usize,
        agents: usize,
        atoms: usize,
    },
    #[error("formula atom `{0}` is not among the declared search atoms")]
    UndeclaredAtom(String),
    #[error("{0}")]
    Config(String),
}

/// Counters describing how much work a search did.
#[derive(Clone, Debug, Default)]
pub struct SearchStats {
    /// Raw relations pushed through the KD45 filter.
    pub relations_filtered: u64,
    /// KD45 relation tuples (frames) visited.
    pub frames_enumerated: u64,
    /// (frame, valuation) pairs actually evaluated.
    pub models_checked: u64,
    pub elapsed: Duration,
}

#[derive(Clone, Debug)]
pub enum SearchVerdict {
    Countermodel { model: KripkeModel, state: String },
    NoCountermodel,
}

#[derive(Clone, Debug)]
pub struct SearchOutcome {
    pub verdict: SearchVerdict,
    pub stats: SearchStats,
}

impl SearchOutcome {
    pub fn countermodel(&self) -> Option<(&KripkeModel, &str)> {
        match &self.verdict {
            SearchVerdict::Countermodel { model, state } => Some((model, state)),
            SearchVerdict::NoCountermodel => None,
        }
    }
}

/// Certification result: the bounds actually covered plus any refutation.
#[derive(Clone, Debug)]
pub struct CertifyReport {
    pub config: SearchConfig,
    pub countermodel: Option<(KripkeModel, String)>,
    pub stats: SearchStats,
}

impl CertifyReport {
    pub fn certified(&self) -> bool {
        self.countermodel.is_none()
    }
}

const MAX_EXHAUSTIVE_STATES: usize = 4;
const MAX_EXHAUSTIVE_AGENTS: usize = 3;
const MAX_EXHAUSTIVE_ATOMS: usize = 3;

impl SearchConfig {
    fn validate(&self, f: &Formula) -> Result<(), SearchError> {
        if self.agent_count == 0 {
            return Err(SearchError::Config("agent count must be at least 1".into()));
        }
        if self.max_states == 0 {
            return Err(SearchError::Config("max states must be at least 1".into()));
        }
        if self.jobs == 0 {
            return Err(SearchError::Config("jobs must be at least 1".into()));
        }
        for atom in f.atoms() {
            if !self.atoms.contains(&atom) {
                return Err(SearchError::UndeclaredAtom(atom));
            }
        }
        if self.budget == Budget::Exhaustive
            && (self.max_states > MAX_EXHAUSTIVE_STATES
                || self.agent_count > MAX_EXHAUSTIVE_AGENTS
                || self.atoms.len() > MAX_EXHAUSTIVE_ATOMS)
        {
            return Err(SearchError::BoundGuard {
                states: self.max_states,
                agents: self.agent_count,
                atoms: self.atoms.len(),
            });
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// KD45 relation enumeration. A relation over k states is a k*k-bit code,
// bit x*k+y standing for the pair (x, y); the KD45 ones are kept in
// ascending code order.

fn relation_from_code(code: u64, k: usize) -> Relation {
    Relation::from_pairs(
        k,
        (0..k * k)
            .filter(|i| code >> i & 1 == 1)
            .map(|i| (i / k, i % k)),
    )
}

fn kd45_codes(k: usize) -> Vec<u64> {
    assert!(
        (1..=MAX_EXHAUSTIVE_STATES).contains(&k),
        "state bound out of range"
    );
    (0..1u64 << (k * k))
        .filter(|&code| {
            let r = relation_from_code(code, k);
            r.check_serial().holds() && r.check_transitive().holds() && r.check_euclidean().holds()
        })
        .collect()
}

/// All serial-transitive-euclidean relations over `k` states, in ascending
/// code order. `k` is capped at the exhaustive state bound.
pub fn kd45_relations(k: usize) -> Vec<Relation> {
    kd45_codes(k)
        .iter()
        .map(|&c| relation_from_code(c, k))
        .collect()
}

/// Streams every KD45 relation tuple over `k` states for `n` agents as a
/// model with empty valuation, in lexicographic order of the per-agent
/// relation indices (first agent slowest).
pub fn enumerate_kd45(
    n: usize,
    k: usize,
) -> Result<impl Iterator<Item = KripkeModel>, SearchError> {
    if n == 0 || k == 0 {
        return Err(SearchError::Config(
            "agent and state counts must be at least 1".into(),
        ));
    }
    if k > MAX_EXHAUSTIVE_STATES || n > MAX_EXHAUSTIVE_AGENTS {
        return Err(SearchError::BoundGuard {
            states: k,
            agents: n,
            atoms: 0,
        });
    }
    let relations = kd45_relations(k);
    let states: Vec<String> = (0..k).map(|i| format!("s{i}")).collect();
    let mut idx = vec![0usize; n];
    let mut done = relations.is_empty();
    Ok(std::iter::from_fn(move || {
        if done {
            return None;
        }
        let model = KripkeModel::new(
            states.clone(),
            idx.iter().map(|&i| relations[i].clone()).collect(),
            std::collections::BTreeMap::new(),
        )
        .expect("enumerated model is well-formed");
        // Advance the odometer, last agent fastest.
        let mut pos = n;
        loop {
            if pos == 0 {
                done = true;
                break;
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < relations.len() {
                break;
            }
            idx[pos] = 0;
        }
        Some(model)
    }))
}

// ---------------------------------------------------------------------------
// Compiled evaluation. Formulas become postorder op lists; frames become
// per-state u64 successor rows of the closed union relation; a valuation is
// a u64 with bit a*k+s meaning atom a holds at state s.

#[derive(Clone, Copy, Debug)]
enum COp {
    Atom(usize),
    Top,
    Neg(usize),
    And(usize, usize),
    C(usize),
}

fn compile<'f>(
    f: &'f Formula,
    atoms: &[String],
    memo: &mut HashMap<&'f Formula, usize>,
    ops: &mut Vec<COp>,
) -> usize {
    if let Some(&i) = memo.get(f) {
        return i;
    }
    let op = match f {
        Formula::Atom(p) => COp::Atom(
            atoms
                .iter()
                .position(|a| a == p)
                .expect("atoms validated against the config"),
        ),
        Formula::Top => COp::Top,
        Formula::Neg(x) => {
            let i = compile(x, atoms, memo, ops);
            COp::Neg(i)
        }
        Formula::And(a, b) => {
            let i = compile(a, atoms, memo, ops);
            let j = compile(b, atoms, memo, ops);
            COp::And(i, j)
        }
        Formula::C(x) => {
            let i = compile(x, atoms, memo, ops);
            COp::C(i)
        }
    };
    ops.push(op);
    memo.insert(f, ops.len() - 1);
    ops.len() - 1
}

/// Rows of the union of the agents' relation codes, closed per `mode`.
fn closed_union_rows(codes: &[u64], k: usize, mode: ClosureMode) -> [u64; MAX_EXHAUSTIVE_STATES] {
    let mask = (1u64 << k) - 1;
    let mut rows = [0u64; MAX_EXHAUSTIVE_STATES];
    for (x, row) in rows.iter_mut().enumerate().take(k) {
        for code in codes {
            *row |= (code >> (x * k)) & mask;
        }
    }
    loop {
        let mut changed = false;
        for x in 0..k {
            let mut acc = rows[x];
            let mut targets = rows[x];
            while targets != 0 {
                let t = targets.trailing_zeros() as usize;
                targets &= targets - 1;
                acc |= rows[t];
            }
            if acc != rows[x] {
                rows[x] = acc;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    if mode == ClosureMode::ReflexiveTransitive {
        for (x, row) in rows.iter_mut().enumerate().take(k) {
            *row |= 1 << x;
        }
    }
    rows
}

fn eval_ops(ops: &[COp], rows: &[u64], k: usize, val: u64, scratch: &mut Vec<u64>) -> u64 {
    let full = (1u64 << k) - 1;
    scratch.clear();
    for op in ops {
        let v = match *op {
            COp::Atom(a) => (val >> (a * k)) & full,
            COp::Top => full,
            COp::Neg(x) => !scratch[x] & full,
            COp::And(x, y) => scratch[x] & scratch[y],
            COp::C(x) => {
                let body = scratch[x];
                let mut m = 0u64;
                for (s, row) in rows.iter().enumerate().take(k) {
                    if row & body == *row {
                        m |= 1 << s;
                    }
                }
                m
            }
        };
        scratch.push(v);
    }
    *scratch.last().expect("non-empty op list")
}

// ---------------------------------------------------------------------------
// Exhaustive search, sharded by the first agent's relation index. Shards of
// one wave run in parallel; waves are processed in ascending order and the
// lowest-index hit wins, so the outcome is independent of `jobs`.

struct BlockHit {
    rest: Vec<usize>,
    val: u64,
    state: usize,
}

struct BlockResult {
    hit: Option<BlockHit>,
    frames: u64,
    checked: u64,
}

fn scan_block(
    i1: usize,
    codes: &[u64],
    n: usize,
    k: usize,
    n_atoms: usize,
    mode: ClosureMode,
    ops: &[COp],
) -> BlockResult {
    let full = (1u64 << k) - 1;
    let val_count = 1u64 << (k * n_atoms);
    let mut rest = vec![0usize; n - 1];
    let mut frames = 0u64;
    let mut checked = 0u64;
    let mut scratch = Vec::with_capacity(ops.len());
    let mut tuple_codes = vec![0u64; n];
    tuple_codes[0] = codes[i1];
    loop {
        for (slot, &i) in tuple_codes.iter_mut().skip(1).zip(&rest) {
            *slot = codes[i];
        }
        frames += 1;
        let rows = closed_union_rows(&tuple_codes, k, mode);
        for val in 0..val_count {
            checked += 1;
            let mask = eval_ops(ops, &rows, k, val, &mut scratch);
            if mask != full {
                let state = (!mask & full).trailing_zeros() as usize;
                return BlockResult {
                    hit: Some(BlockHit {
                        rest: rest.clone(),
                        val,
                        state,
                    }),
                    frames,
                    checked,
                };
            }
        }
        // Advance the rest-of-agents odometer, last agent fastest.
        let mut pos = rest.len();
        loop {
            if pos == 0 {
                return BlockResult {
                    hit: None,
                    frames,
                    checked,
                };
            }
            pos -= 1;
            rest[pos] += 1;
            if rest[pos] < codes.len() {
                break;
            }
            rest[pos] = 0;
        }
    }
}

fn model_from_parts(
    k: usize,
    agent_codes: &[u64],
    atoms: &[String],
    val: u64,
) -> (KripkeModel, Vec<String>) {
    let states: Vec<String> = (0..k).map(|i| format!("s{i}")).collect();
    let relations: Vec<Relation> = agent_codes
        .iter()
        .map(|&c| relation_from_code(c, k))
        .collect();
    let valuation = atoms
        .iter()
        .enumerate()
        .map(|(a, name)| {
            let set = StateSet::from_indices(k, (0..k).filter(|s| val >> (a * k + s) & 1 == 1));
            (name.clone(), set)
        })
        .collect();
    let model = KripkeModel::new(states.clone(), relations, valuation)
        .expect("searched model is well-formed");
    (model, states)
}

fn verify_countermodel(model: &KripkeModel, state: &str, f: &Formula, mode: ClosureMode) {
    assert!(
        model.check_frame_properties().kd45,
        "internal error: countermodel is not KD45"
    );
    let holds = semantics::satisfies(model, state, f, mode).expect("witness state exists");
    assert!(
        !holds,
        "internal error: countermodel failed re-verification"
    );
}

fn search_exhaustive(f: &Formula, cfg: &SearchConfig) -> SearchOutcome {
    let start = Instant::now();
    let mut stats = SearchStats::default();
    let mut ops = Vec::new();
    compile(f, &cfg.atoms, &mut HashMap::new(), &mut ops);
    let n = cfg.agent_count;

    for k in 1..=cfg.max_states {
        stats.relations_filtered += 1 << (k * k);
        let codes = kd45_codes(k);
        let mut wave_start = 0;
        while wave_start < codes.len() {
            let wave: Vec<usize> = (wave_start..codes.len().min(wave_start + cfg.jobs)).collect();
            let results: Vec<(usize, BlockResult)> = std::thread::scope(|scope| {
                let handles: Vec<_> = wave
                    .iter()
                    .map(|&i1| {
                        let codes = &codes;
                        let ops = &ops;
                        scope.spawn(move || {
                            (
                                i1,
                                scan_block(i1, codes, n, k, cfg.atoms.len(), cfg.mode, ops),
                            )
                        })
                    })
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("search worker panicked"))
                    .collect()
            });
            let mut first_hit: Option<(usize, BlockHit)> = None;
            for (i1, block) in results {
                stats.frames_enumerated += block.frames;
                stats.models_checked += block.checked;
                if let Some(hit) = block.hit {
                    let better = first_hit.as_ref().is_none_or(|(best, _)| i1 < *best);
                    if better {
                        first_hit = Some((i1, hit));
                    }
                }
            }
            if let Some((i1, hit)) = first_hit {
                let mut agent_codes = vec![codes[i1]];
                agent_codes.extend(hit.rest.iter().map(|&i| codes[i]));
                let (model, states) = model_from_parts(k, &agent_codes, &cfg.atoms, hit.val);
                let state = states[hit.state].clone();
                verify_countermodel(&model, &state, f, cfg.mode);
                stats.elapsed = start.elapsed();
                return SearchOutcome {
                    verdict: SearchVerdict::Countermodel { model, state },
                    stats,
                };
            }
            wave_start += cfg.jobs;
        }
    }
    stats.elapsed = start.elapsed();
    SearchOutcome {
        verdict: SearchVerdict::NoCountermodel,
        stats,
    }
}

fn search_random(f: &Formula, cfg: &SearchConfig, sample_count: usize, seed: u64) -> SearchOutcome {
    use rand::{Rng, SeedableRng};

    let start = Instant::now();
    let mut stats = SearchStats::default();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..sample_count {
        let k = rng.gen_range(1..=cfg.max_states);
        let model = sampling::random_kd45_model(&mut rng, cfg.agent_count, k, &cfg.atoms);
        stats.frames_enumerated += 1;
        stats.models_checked += 1;
        let ext = semantics::extension(&model, f, cfg.mode);
        if ext != StateSet::full(k) {
            let state_idx = (0..k)
                .find(|&s| !ext.contains(s))
                .expect("non-full extension");
            let state = model.state_name(state_idx).to_string();
            verify_countermodel(&model, &state, f, cfg.mode);
            stats.elapsed = start.elapsed();
            return SearchOutcome {
                verdict: SearchVerdict::Countermodel { model, state },
                stats,
            };
        }
    }
    stats.elapsed = start.elapsed();
    SearchOutcome {
        verdict: SearchVerdict::NoCountermodel,
        stats,
    }
}

/// Searches the configured space for a model and state refuting `f`.
/// Exhaustive mode visits every KD45 relation tuple up to `max_states` and
/// every valuation of the declared atoms, in a fixed order; any returned
/// countermodel has been re-verified through the plain model checker.
pub fn find_countermodel(f: &Formula, cfg: &SearchConfig) -> Result<SearchOutcome, SearchError> {
    cfg.validate(f)?;
    Ok(match cfg.budget {
        Budget::Exhaustive => search_exhaustive(f, cfg),
        Budget::Random { sample_count, seed } => search_random(f, cfg, sample_count, seed),
    })
}

/// Wraps [`find_countermodel`] as a certification: valid up to the bounds,
/// or refuted by the returned countermodel.
pub fn certify_valid_up_to(f: &Formula, cfg: &SearchConfig) -> Result<CertifyReport, SearchError> {
    let outcome = find_countermodel(f, cfg)?;
    let countermodel = match outcome.verdict {
        SearchVerdict::Countermodel { model, state } => Some((model, state)),
        SearchVerdict::NoCountermodel => None,
    };
    Ok(CertifyReport {
        config: cfg.clone(),
        countermodel,
        stats: outcome.stats,
    })
}

/// Seeded random generators for models and formulas, shared by the random
/// search budget and the property-test suites.
pub mod sampling {
    use rand::Rng;

    use crate::kripke::{KripkeModel, Relation, StateSet};
    use crate::syntax::Formula;

    /// A digraph over `k` states with independent edge probability `p`.
    pub fn random_digraph(rng: &mut impl Rng, k: usize, p: f64) -> Relation {
        Relation::from_pairs(
            k,
            (0..k)
                .flat_map(|x| (0..k).map(move |y| (x, y)))
                .filter(|_| rng.gen_bool(p))
                .collect::<Vec<_>>(),
        )
    }

    /// A KD45 relation obtained by repairing random digraphs: add loops at
    /// successor-less states, close transitively, retry if the result is
    /// not euclidean.
    pub fn random_kd45_relation(rng: &mut impl Rng, k: usize) -> Relation {
        loop {
            let mut r = random_digraph(rng, k, 0.5);
            for x in 0..k {
                if r.successors(x).is_empty() {
                    r.add(x, x);
                }
            }
            let closed = r.transitive_closure();
            if closed.check_euclidean().holds() {
                return closed;
            }
        }
    }

    /// A KD45 model over `k` states with uniformly random valuation.
    pub fn random_kd45_model(
        rng: &mut impl Rng,
        n: usize,
        k: usize,
        atoms: &[String],
    ) -> KripkeModel {
        let states: Vec<String> = (0..k).map(|i| format!("s{i}")).collect();
        let relations: Vec<Relation> = (0..n).map(|_| random_kd45_relation(rng, k)).collect();
        let valuation = atoms
            .iter()
            .map(|a| {
                let set = StateSet::from_indices(k, (0..k).filter(|_| rng.gen_bool(0.5)));
                (a.clone(), set)
            })
            .collect();
        KripkeModel::new(states, relations, valuation).expect("sampled model is well-formed")
    }

    /// A random formula of nesting depth at most `depth` over `atoms`.
    pub fn random_formula(rng: &mut impl Rng, atoms: &[String], depth: usize) -> Formula {
        let leaf = |rng: &mut dyn rand::RngCore| {
            if atoms.is_empty() || rng.gen_range(0..5) == 0 {
                Formula::Top
            } else {
                Formula::atom(atoms[rng.gen_range(0..atoms.len())].clone())
            }
        };
        if depth == 0 {
            return leaf(rng);
        }
        match rng.gen_range(0..8) {
            0 => Formula::neg(random_formula(rng, atoms, depth - 1)),
            1 => Formula::c(random_formula(rng, atoms, depth - 1)),
            2 => Formula::chat(random_formula(rng, atoms, depth - 1)),
            3 => Formula::and(
                random_formula(rng, atoms, depth - 1),
                random_formula(rng, atoms, depth - 1),
            ),
            4 => Formula::or(
                random_formula(rng, atoms, depth - 1),
                random_formula(rng, atoms, depth - 1),
            ),
            5 => Formula::implies(
                random_formula(rng, atoms, depth - 1),
                random_formula(rng, atoms, depth - 1),
            ),
            _ => leaf(rng),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kripke::write_model_file;
    use crate::proof::{build_chat_n, build_cn};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn f(src: &str) -> Formula {
        src.parse().expect("formula")
    }

    fn atoms(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    fn exhaustive(n: usize, k: usize, ats: &[&str]) -> SearchConfig {
        SearchConfig {
            agent_count: n,
            max_states: k,
            atoms: atoms(ats),
            budget: Budget::Exhaustive,
            mode: ClosureMode::Transitive,
            jobs: 1,
        }
    }

    /// Naive pair-list property checks, independent of the Relation type.
    fn naive_is_kd45(pairs: &[(usize, usize)], k: usize) -> bool {
        let has = |x: usize, y: usize| pairs.contains(&(x, y));
        let serial = (0..k).all(|x| (0..k).any(|y| has(x, y)));
        let transitive = pairs
            .iter()
            .all(|&(x, y)| (0..k).all(|z| !has(y, z) || has(x, z)));
        let euclidean = pairs
            .iter()
            .all(|&(x, y)| (0..k).all(|z| !has(x, z) || has(y, z)));
        serial && transitive && euclidean
    }

    #[test]
    fn kd45_relation_counts_match_brute_force() {
        let mut counts = Vec::new();
        for k in 1..=4 {
            let fast = kd45_relations(k);
            let brute: Vec<u64> = (0..1u64 << (k * k))
                .filter(|&code| {
                    let pairs: Vec<(usize, usize)> = (0..k * k)
                        .filter(|i| code >> i & 1 == 1)
                        .map(|i| (i / k, i % k))
                        .collect();
                    naive_is_kd45(&pairs, k)
                })
                .collect();
            assert_eq!(fast.len(), brute.len(), "k={k}");
            for (r, code) in fast.iter().zip(&brute) {
                assert_eq!(r, &relation_from_code(*code, k), "k={k}");
            }
            counts.push(fast.len());
        }
        assert_eq!(counts, vec![1, 4, 17, 89]);
    }

    #[test]
    fn enumeration_examples_and_audit() {
        let single: Vec<KripkeModel> = enumerate_kd45(1, 1).unwrap().collect();
        assert_eq!(single.len(), 1);
        assert_eq!(
            single[0].relation(0).pairs().collect::<Vec<_>>(),
            vec![(0, 0)]
        );

        let n1k2: Vec<KripkeModel> = enumerate_kd45(1, 2).unwrap().collect();
        let n2k2: Vec<KripkeModel> = enumerate_kd45(2, 2).unwrap().collect();
        assert_eq!(n1k2.len(), 4);
        assert_eq!(n2k2.len(), n1k2.len() * n1k2.len());
        // Lowest relation code first: s0->s0, s1->s0.
        assert_eq!(
            n2k2[0].relation(0).pairs().collect::<Vec<_>>(),
            vec![(0, 0), (1, 0)]
        );
        for m in n1k2.iter().chain(&n2k2) {
            assert!(m.check_frame_properties().kd45);
        }
        for m in enumerate_kd45(1, 3).unwrap() {
            assert!(m.check_frame_properties().kd45);
        }
    }

    #[test]
    fn guards_reject_oversized_requests() {
        assert!(matches!(
            enumerate_kd45(4, 2),
            Err(SearchError::BoundGuard { .. })
        ));
        assert!(matches!(
            enumerate_kd45(2, 5),
            Err(SearchError::BoundGuard { .. })
        ));
        let mut cfg = exhaustive(2, 5, &["p"]);
        assert!(matches!(
            find_countermodel(&f("p"), &cfg),
            Err(SearchError::BoundGuard { .. })
        ));
        cfg.max_states = 2;
        assert!(matches!(
            find_countermodel(&f("q"), &cfg),
            Err(SearchError::UndeclaredAtom(_))
        ));
        cfg.atoms = atoms(&["p", "q", "r", "s"]);
        assert!(matches!(
            find_countermodel(&f("p"), &cfg),
            Err(SearchError::BoundGuard { .. })
        ));
    }

    /// Brute-force oracle: walk enumerate_kd45 and every valuation, checking
    /// with the plain semantics evaluator.
    fn brute_force_first_countermodel(
        g: &Formula,
        n: usize,
        max_states: usize,
        ats: &[&str],
        mode: ClosureMode,
    ) -> Option<(KripkeModel, String)> {
        for k in 1..=max_states {
            for frame in enumerate_kd45(n, k).unwrap() {
                for val in 0..1u64 << (k * ats.len()) {
                    let valuation: std::collections::BTreeMap<String, StateSet> = ats
                        .iter()
                        .enumerate()
                        .map(|(a, name)| {
                            (
                                name.to_string(),
                                StateSet::from_indices(
                                    k,
                                    (0..k).filter(|s| val >> (a * k + s) & 1 == 1),
                                ),
                            )
                        })
                        .collect();
                    let model = KripkeModel::new(
                        frame.states().to_vec(),
                        frame.relations().to_vec(),
                        valuation,
                    )
                    .unwrap();
                    let ext = semantics::extension(&model, g, mode);
                    if let Some(s) = (0..k).find(|&s| !ext.contains(s)) {
                        return Some((model.clone(), model.state_name(s).to_string()));
                    }
                }
            }
        }
        None
    }

    #[test]
    fn compiled_search_matches_brute_force_oracle() {
        let cases = [
            ("C p -> p", ClosureMode::Transitive),
            ("C p -> p", ClosureMode::ReflexiveTransitive),
            ("C p -> ~C~p", ClosureMode::Transitive),
            ("~C p -> C~C p", ClosureMode::Transitive),
            ("C (p -> q) -> (C p -> C q)", ClosureMode::Transitive),
        ];
        for (src, mode) in cases {
            let g = f(src);
            let mut cfg = exhaustive(2, 2, &["p", "q"]);
            cfg.mode = mode;
            let fast = find_countermodel(&g, &cfg).unwrap();
            let slow = brute_force_first_countermodel(&g, 2, 2, &["p", "q"], mode);
            match (fast.countermodel(), slow) {
                (None, None) => {}
                (Some((m1, s1)), Some((m2, s2))) => {
                    assert_eq!(m1, &m2, "{src}: different first countermodel");
                    assert_eq!(s1, s2, "{src}: different witness state");
                }
                (got, want) => {
                    panic!(
                        "{src}: verdicts differ: {:?} vs {:?}",
                        got.is_some(),
                        want.is_some()
                    )
                }
            }
        }
    }

    #[test]
    fn negative_introspection_fails_within_two_states() {
        let cfg = exhaustive(2, 3, &["p"]);
        let outcome = find_countermodel(&f("~C p -> C~C p"), &cfg).unwrap();
        let (model, state) = outcome.countermodel().expect("refuted");
        // The first countermodel in enumeration order needs only 2 states.
        assert_eq!(model.state_count(), 2);
        assert!(
            !semantics::satisfies(model, state, &f("~C p -> C~C p"), ClosureMode::Transitive)
                .unwrap()
        );
    }

    #[test]
    fn counting_axiom_separates_two_from_three_agents() {
        let args = [f("p1"), f("p2"), f("p3")];
        let chat2 = build_chat_n(2, &args).unwrap();

        // Hand-built three-agent star: w sees a distinct tine per agent.
        let star = KripkeModel::build(
            &["w", "t1", "t2", "t3"],
            &[
                &[("w", "t1"), ("t1", "t1"), ("t2", "t2"), ("t3", "t3")],
                &[("w", "t2"), ("t1", "t1"), ("t2", "t2"), ("t3", "t3")],
                &[("w", "t3"), ("t1", "t1"), ("t2", "t2"), ("t3", "t3")],
            ],
            &[("p1", &["t1"]), ("p2", &["t2"]), ("p3", &["t3"])],
        )
        .unwrap();
        assert!(star.check_frame_properties().kd45);
        assert!(!semantics::satisfies(&star, "w", &chat2, ClosureMode::Transitive).unwrap());

        // Certified for two agents up to 3 states...
        let cfg2 = exhaustive(2, 3, &["p1", "p2", "p3"]);
        let report = certify_valid_up_to(&chat2, &cfg2).unwrap();
        assert!(report.certified());

        // ...but refuted for three agents within 4 states.
        let mut cfg3 = exhaustive(3, 4, &["p1", "p2", "p3"]);
        cfg3.jobs = 3;
        let outcome = find_countermodel(&chat2, &cfg3).unwrap();
        let (model, state) = outcome.countermodel().expect("refuted for n=3");
        assert_eq!(model.state_count(), 4);
        assert!(!semantics::satisfies(model, state, &chat2, ClosureMode::Transitive).unwrap());
    }

    #[test]
    fn parallel_outcome_is_deterministic() {
        let g = f("C p -> p");
        let mut renders = Vec::new();
        for jobs in [1, 4] {
            let mut cfg = exhaustive(2, 3, &["p"]);
            cfg.jobs = jobs;
            let outcome = find_countermodel(&g, &cfg).unwrap();
            let (model, state) = outcome.countermodel().expect("T is refutable");
            renders.push(format!("{}{}", write_model_file(model, Some(state)), state));
        }
        assert_eq!(renders[0], renders[1]);
    }

    #[test]
    fn certification_examples() {
        let cfg = exhaustive(2, 3, &["p"]);
        assert!(certify_valid_up_to(&f("C p -> ~C~p"), &cfg)
            .unwrap()
            .certified());
        assert!(certify_valid_up_to(&f("C (C p -> p)"), &cfg)
            .unwrap()
            .certified());
        let t_report = certify_valid_up_to(&f("C p -> p"), &cfg).unwrap();
        assert!(!t_report.certified());
        let (model, state) = t_report.countermodel.as_ref().unwrap();
        assert!(model.check_frame_properties().kd45);
        assert!(
            !semantics::satisfies(model, state, &f("C p -> p"), ClosureMode::Transitive).unwrap()
        );
    }

    #[test]
    fn soundness_of_the_axioms_over_small_enumerations() {
        let c2 = build_cn(2, &[f("p1"), f("p2"), f("p3")]).unwrap();
        let chat2 = build_chat_n(2, &[f("p1"), f("p2"), f("p3")]).unwrap();
        let fixed = [
            f("C (p1 -> p2) -> (C p1 -> C p2)"),
            f("C p1 -> ~C~p1"),
            f("C p1 -> C C p1"),
            f("C (C p1 -> p1)"),
        ];
        for k in 1..=2 {
            for frame in enumerate_kd45(2, k).unwrap() {
                for val in 0..1u64 << (k * 3) {
                    let valuation: std::collections::BTreeMap<String, StateSet> =
                        ["p1", "p2", "p3"]
                            .iter()
                            .enumerate()
                            .map(|(a, name)| {
                                (
                                    name.to_string(),
                                    StateSet::from_indices(
                                        k,
                                        (0..k).filter(|s| val >> (a * k + s) & 1 == 1),
                                    ),
                                )
                            })
                            .collect();
                    let m = KripkeModel::new(
                        frame.states().to_vec(),
                        frame.relations().to_vec(),
                        valuation,
                    )
                    .unwrap();
                    for ax in fixed.iter().chain([&c2]) {
                        assert!(semantics::valid_on_model(&m, ax, ClosureMode::Transitive));
                    }
                    // The counting axiom and its dual agree pointwise.
                    assert_eq!(
                        semantics::extension(&m, &c2, ClosureMode::Transitive),
                        semantics::extension(&m, &chat2, ClosureMode::Transitive)
                    );
                }
            }
        }
    }

    #[test]
    fn closures_of_sampled_kd45_models_are_well_behaved() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let n = rng.gen_range(1..=3);
            let k = rng.gen_range(1..=5);
            let m = sampling::random_kd45_model(&mut rng, n, k, &atoms(&["p"]));
            assert!(m.check_frame_properties().kd45);
            let closed = m.union_relation().transitive_closure();
            assert!(closed.check_shift_reflexive().holds());
            assert!(closed.cn_frame_property(n).holds());
        }
    }

    #[test]
    fn random_budget_is_reproducible() {
        let g = f("C p -> p");
        let cfg = SearchConfig {
            agent_count: 2,
            max_states: 3,
            atoms: atoms(&["p"]),
            budget: Budget::Random {
                sample_count: 200,
                seed: 11,
            },
            mode: ClosureMode::Transitive,
            jobs: 1,
        };
        let a = find_countermodel(&g, &cfg).unwrap();
        let b = find_countermodel(&g, &cfg).unwrap();
        match (a.countermodel(), b.countermodel()) {
            (Some((m1, s1)), Some((m2, s2))) => {
                assert_eq!(
                    write_model_file(m1, Some(s1)),
                    write_model_file(m2, Some(s2))
                );
            }
            (None, None) => panic!("200 samples should refute the truth axiom"),
            _ => panic!("same seed, different verdicts"),
        }
    }

    #[test]
    fn random_formula_respects_depth_and_atoms() {
        fn depth_of(g: &Formula) -> usize {
            match g {
                Formula::Atom(_) | Formula::Top => 0,
                Formula::Neg(x) | Formula::C(x) => 1 + depth_of(x),
                Formula::And(a, b) => 1 + depth_of(a).max(depth_of(b)),
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ats = atoms(&["p", "q"]);
        for _ in 0..200 {
            let g = sampling::random_formula(&mut rng, &ats, 3);
            // Depth in primitive connectives: each sugar layer adds at
            // most 3 primitive nodes.
            assert!(depth_of(&g) <= 9);
            assert!(g.atoms().iter().all(|a| ats.contains(a)));
        }
    }
}
