//! Folds a certified uni-modal belief structure into a finite multi-agent
//! KD45 model that agrees with it at a chosen root: diamond witnesses are
//! extracted and merged down to one per agent (X-elimination), then each
//! witness seeds a branch of agent-alternating clusters.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use thiserror::Error;

use crate::bisim::{self, BisimError};
use crate::kripke::{
    CnViolation, KripkeModel, ModelError, PropertyCheck, Relation, StateSet, UniModalModel,
};
use crate::semantics::{self, ClosureMode};
use crate::syntax::{ClosureSet, Formula};

/// Frame-property audit of a prospective input; all five flags must hold
/// for the construction to be defined.
#[derive(Clone, Debug)]
pub struct FrameCertificate {
    pub serial: PropertyCheck<usize>,
    pub transitive: PropertyCheck<(usize, usize, usize)>,
    pub shift_reflexive: PropertyCheck<(usize, usize)>,
    pub cn_property: PropertyCheck<CnViolation>,
    /// Whether the root has at least two distinct successors.
    pub branching_root: bool,
}

impl FrameCertificate {
    pub fn all_hold(&self) -> bool {
        self.serial.holds()
            && self.transitive.holds()
            && self.shift_reflexive.holds()
            && self.cn_property.holds()
            && self.branching_root
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConstructError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Bisim(#[from] BisimError),
    #[error("construction needs at least 2 agents, got {0}")]
    AgentCount(usize),
    #[error("construction precondition failed: {0}")]
    Precondition(String),
    #[error(
        "padding impossible: root `{root}` has too few distinct successors \
         outside the witness set (need {needed} more)"
    )]
    PaddingImpossible { root: String, needed: usize },
}

/// One witness-merging step: a tuple of n+1 witnesses, the mediator that
/// sees two of them, and the pair it replaces.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MergeStep {
    pub tuple: Vec<String>,
    pub mediator: String,
    pub removed: (String, String),
}

/// The stages of X-elimination, from the initial diamond witnesses down to
/// exactly one state per agent.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EliminationTrace {
    /// One (diamond, witness) entry per closure diamond true at the root.
    pub witnesses: Vec<(Formula, String)>,
    /// X_0 and the set after each merge, pre-padding, ascending state order.
    pub stages: Vec<Vec<String>>,
    pub merges: Vec<MergeStep>,
    /// Root successors appended to reach one witness per agent.
    pub padded: Vec<String>,
    /// The final witness tuple, one state per agent, ascending state order.
    pub final_x: Vec<String>,
}

/// A state of the constructed model: a copy of input state `target`,
/// reached from a copy of `base`, inside the cluster entered by
/// `enter_agent` and left by `exit_agent` (agents 1-based).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClusterNode {
    pub base: String,
    pub target: String,
    pub enter_agent: usize,
    pub exit_agent: usize,
}

/// The folded model plus the bookkeeping needed to audit it.
#[derive(Clone, Debug)]
pub struct ConstructedModel {
    pub model: KripkeModel,
    pub root: String,
    /// Constructed state name -> originating cluster node.
    pub nodes: BTreeMap<String, ClusterNode>,
    pub trace: EliminationTrace,
    pub closure: ClosureSet,
}

/// Outcome of the three construction audits; failures are entries, not
/// errors.
#[derive(Clone, Debug)]
pub struct ConstructionReport {
    pub kd45: bool,
    pub nodes_checked: usize,
    /// Constructed states that are not bisimilar to their base.
    pub node_failures: Vec<String>,
    pub formulas_checked: usize,
    /// Closure members valued differently at the two roots.
    pub formula_failures: Vec<Formula>,
}

impl ConstructionReport {
    pub fn all_pass(&self) -> bool {
        self.kd45 && self.node_failures.is_empty() && self.formula_failures.is_empty()
    }
}

/// Checks the frame properties the construction relies on: seriality,
/// transitivity, shift-reflexivity, the n-agent mediator property, and a
/// branching root.
pub fn certify_input(
    m: &UniModalModel,
    root: &str,
    n: usize,
) -> Result<FrameCertificate, ModelError> {
    let root_idx = m.require_state(root)?;
    let r = m.relation();
    Ok(FrameCertificate {
        serial: r.check_serial(),
        transitive: r.check_transitive(),
        shift_reflexive: r.check_shift_reflexive(),
        cn_property: r.cn_frame_property(n),
        branching_root: r.successors(root_idx).count() >= 2,
    })
}

fn check_preconditions(m: &UniModalModel, cert: &FrameCertificate) -> Result<(), ConstructError> {
    let name = |i: usize| m.state_name(i).to_string();
    if let Some(&x) = cert.serial.witness() {
        return Err(ConstructError::Precondition(format!(
            "relation is not serial: state `{}` has no successor",
            name(x)
        )));
    }
    if let Some(&(x, y, z)) = cert.transitive.witness() {
        return Err(ConstructError::Precondition(format!(
            "relation is not transitive: `{}` -> `{}` -> `{}` without `{}` -> `{}`",
            name(x),
            name(y),
            name(z),
            name(x),
            name(z)
        )));
    }
    if let Some(&(x, y)) = cert.shift_reflexive.witness() {
        return Err(ConstructError::Precondition(format!(
            "relation is not shift-reflexive: `{}` -> `{}` but `{}` has no loop",
            name(x),
            name(y),
            name(y)
        )));
    }
    if let Some(v) = cert.cn_property.witness() {
        let ys: Vec<String> = v.ys.iter().map(|&y| name(y)).collect();
        return Err(ConstructError::Precondition(format!(
            "mediator property fails at `{}` for successors {}",
            name(v.x),
            ys.join(", ")
        )));
    }
    Ok(())
}

fn sorted_names(m: &UniModalModel, set: &BTreeSet<usize>) -> Vec<String> {
    set.iter().map(|&i| m.state_name(i).to_string()).collect()
}

/// Extracts one witness per closure diamond true at `root`, merges the
/// witness set down to at most `n` states through mediators, and pads it
/// with further root successors to exactly `n`.
pub fn x_elimination(
    m: &UniModalModel,
    root: &str,
    cl: &ClosureSet,
    n: usize,
) -> Result<EliminationTrace, ConstructError> {
    if n < 2 {
        return Err(ConstructError::AgentCount(n));
    }
    let root_idx = m.require_state(root)?;
    check_preconditions(m, &certify_input(m, root, n)?)?;

    let r = m.relation();
    let root_succ = r.successors(root_idx).clone();

    // X_0: for each diamond ~C psi of the closure true at the root, the
    // smallest root successor where psi fails.
    let mut witnesses = Vec::new();
    let mut x: BTreeSet<usize> = BTreeSet::new();
    for diamond in cl.diamonds() {
        if !semantics::satisfies_uni(m, root, diamond, ClosureMode::Transitive)? {
            continue;
        }
        let body = match diamond {
            Formula::Neg(inner) => match inner.as_ref() {
                Formula::C(psi) => psi.as_ref().clone(),
                _ => unreachable!("closure diamonds have shape ~C psi"),
            },
            _ => unreachable!("closure diamonds have shape ~C psi"),
        };
        let good = semantics::extension_uni(m, &Formula::neg(body), ClosureMode::Transitive);
        let witness = root_succ
            .iter()
            .find(|&s| good.contains(s))
            .expect("a true diamond has a witnessing successor");
        witnesses.push((diamond.clone(), m.state_name(witness).to_string()));
        x.insert(witness);
    }

    let mut stages = vec![sorted_names(m, &x)];
    let mut merges = Vec::new();

    // Merge: replace two members of an (n+1)-tuple by a mediator that sees
    // them both; the mediator property guarantees one exists.
    while x.len() > n {
        let tuple: Vec<usize> = x.iter().take(n + 1).copied().collect();
        let mut choice = None;
        'mediators: for z in root_succ.iter() {
            for i in 0..tuple.len() {
                for j in i + 1..tuple.len() {
                    if r.has(z, tuple[i]) && r.has(z, tuple[j]) {
                        choice = Some((z, tuple[i], tuple[j]));
                        break 'mediators;
                    }
                }
            }
        }
        let (z, a, b) = choice.expect("mediator property certified above");
        merges.push(MergeStep {
            tuple: tuple.iter().map(|&t| m.state_name(t).to_string()).collect(),
            mediator: m.state_name(z).to_string(),
            removed: (m.state_name(a).to_string(), m.state_name(b).to_string()),
        });
        x.remove(&a);
        x.remove(&b);
        x.insert(z);
        stages.push(sorted_names(m, &x));
    }

    // Pad with the smallest root successors outside the set.
    let mut padded = Vec::new();
    for s in root_succ.iter() {
        if x.len() >= n {
            break;
        }
        if x.insert(s) {
            padded.push(m.state_name(s).to_string());
        }
    }
    if x.len() < n {
        return Err(ConstructError::PaddingImpossible {
            root: root.to_string(),
            needed: n - x.len(),
        });
    }

    Ok(EliminationTrace {
        witnesses,
        stages,
        merges,
        padded,
        final_x: sorted_names(m, &x),
    })
}

/// The elimination trace as a line-oriented log.
pub fn render_trace(trace: &EliminationTrace) -> String {
    let mut out = String::new();
    for (diamond, witness) in &trace.witnesses {
        out.push_str(&format!("witness {diamond}: {witness}\n"));
    }
    for (i, stage) in trace.stages.iter().enumerate() {
        out.push_str(&format!("stage {i}: {}\n", stage.join(" ")));
        if let Some(step) = trace.merges.get(i) {
            out.push_str(&format!(
                "merge: tuple {}; mediator {}; removed {} {}\n",
                step.tuple.join(" "),
                step.mediator,
                step.removed.0,
                step.removed.1
            ));
        }
    }
    if !trace.padded.is_empty() {
        out.push_str(&format!("pad: {}\n", trace.padded.join(" ")));
    }
    out.push_str(&format!("final: {}\n", trace.final_x.join(" ")));
    out
}

/// The agent branch i alternates with, 1-based with wraparound.
fn alt(i: usize, n: usize) -> usize {
    i % n + 1
}

/// A cluster is identified by the input state it copies the successors of
/// and the ordered pair of agents that enter and leave it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct ClusterKey {
    base: usize,
    enter: usize,
    exit: usize,
}

/// Runs certification, X-elimination, and the cluster fold, producing an
/// n-agent model rooted at a fresh copy of `root`.
pub fn fold_construct(
    m: &UniModalModel,
    root: &str,
    cl: &ClosureSet,
    n: usize,
) -> Result<ConstructedModel, ConstructError> {
    let trace = x_elimination(m, root, cl, n)?;
    let r = m.relation();
    let branch_bases: Vec<usize> = trace
        .final_x
        .iter()
        .map(|name| m.require_state(name).expect("trace states exist"))
        .collect();

    // Clusters reachable from the root branches: leaving cluster (s, a, b)
    // through b lands in (z, b, a) for each successor z of s.
    let mut clusters: BTreeSet<ClusterKey> = BTreeSet::new();
    let mut queue: VecDeque<ClusterKey> = VecDeque::new();
    for (i, &base) in branch_bases.iter().enumerate() {
        let key = ClusterKey {
            base,
            enter: i + 1,
            exit: alt(i + 1, n),
        };
        if clusters.insert(key) {
            queue.push_back(key);
        }
    }
    while let Some(key) = queue.pop_front() {
        for z in r.successors(key.base).iter() {
            let child = ClusterKey {
                base: z,
                enter: key.exit,
                exit: key.enter,
            };
            if clusters.insert(child) {
                queue.push_back(child);
            }
        }
    }

    // Name the states: the root keeps its input name; a node copying
    // target z in cluster (s, a, b) is "s_z_a_b", uniquified if taken.
    let mut names: Vec<String> = vec![root.to_string()];
    let mut used: BTreeSet<String> = names.iter().cloned().collect();
    let mut index: BTreeMap<(ClusterKey, usize), usize> = BTreeMap::new();
    let mut nodes: BTreeMap<String, ClusterNode> = BTreeMap::new();
    for &key in &clusters {
        for target in r.successors(key.base).iter() {
            let base_name = m.state_name(key.base);
            let target_name = m.state_name(target);
            let stem = format!("{base_name}_{target_name}_{}_{}", key.enter, key.exit);
            let mut name = stem.clone();
            let mut suffix = 2;
            while !used.insert(name.clone()) {
                name = format!("{stem}_{suffix}");
                suffix += 1;
            }
            index.insert((key, target), names.len());
            names.push(name.clone());
            nodes.insert(
                name,
                ClusterNode {
                    base: base_name.to_string(),
                    target: target_name.to_string(),
                    enter_agent: key.enter,
                    exit_agent: key.exit,
                },
            );
        }
    }

    let total = names.len();
    let mut relations: Vec<Relation> = (0..n).map(|_| Relation::empty(total)).collect();

    // Root edges: agent i reaches the whole cluster of its branch witness.
    for (i, &base) in branch_bases.iter().enumerate() {
        let key = ClusterKey {
            base,
            enter: i + 1,
            exit: alt(i + 1, n),
        };
        for target in r.successors(base).iter() {
            relations[i].add(0, index[&(key, target)]);
        }
    }

    for &key in &clusters {
        let members: Vec<usize> = r
            .successors(key.base)
            .iter()
            .map(|target| index[&(key, target)])
            .collect();
        // The entering agent has universal access inside the cluster.
        for &u in &members {
            for &v in &members {
                relations[key.enter - 1].add(u, v);
            }
        }
        // The exiting agent takes each node to the whole cluster of the
        // state it copies.
        for target in r.successors(key.base).iter() {
            let u = index[&(key, target)];
            let child = ClusterKey {
                base: target,
                enter: key.exit,
                exit: key.enter,
            };
            for y in r.successors(target).iter() {
                relations[key.exit - 1].add(u, index[&(child, y)]);
            }
        }
        // Everyone else stays put.
        for agent in 1..=n {
            if agent != key.enter && agent != key.exit {
                for &u in &members {
                    relations[agent - 1].add(u, u);
                }
            }
        }
    }

    // Each state values atoms like the input state it copies.
    let valuation: BTreeMap<String, StateSet> = m
        .valuation()
        .iter()
        .map(|(atom, set)| {
            let mut out = StateSet::empty(total);
            if set.contains(m.require_state(root).expect("root exists")) {
                out.insert(0);
            }
            for (&(key, _), &i) in &index {
                if set.contains(key.base) {
                    out.insert(i);
                }
            }
            (atom.clone(), out)
        })
        .collect();

    let model =
        KripkeModel::new(names, relations, valuation).expect("constructed model is well-formed");
    Ok(ConstructedModel {
        model,
        root: root.to_string(),
        nodes,
        trace,
        closure: cl.clone(),
    })
}

/// Audits a constructed model against its input: the frame is KD45, every
/// constructed state is bisimilar to its base (comparing the closed union
/// of the output against the input relation), and every closure member has
/// the same value at the two roots.
pub fn verify_construction(
    input: &UniModalModel,
    root: &str,
    built: &ConstructedModel,
) -> Result<ConstructionReport, ConstructError> {
    input.require_state(root)?;
    let kd45 = built.model.check_frame_properties().kd45;

    let closed = UniModalModel::new(
        built.model.states().to_vec(),
        built.model.union_relation().transitive_closure(),
        built.model.valuation().clone(),
    )?
    .to_kripke();
    let input_k = input.to_kripke();
    let mut node_failures = Vec::new();
    for (name, node) in &built.nodes {
        if !bisim::are_bisimilar(&closed, name, &input_k, &node.base)? {
            node_failures.push(name.clone());
        }
    }

    let mut formula_failures = Vec::new();
    let mut formulas_checked = 0;
    for f in built.closure.formulas() {
        formulas_checked += 1;
        let out_value =
            semantics::satisfies(&built.model, &built.root, f, ClosureMode::Transitive)?;
        let in_value = semantics::satisfies_uni(input, root, f, ClosureMode::Transitive)?;
        if out_value != in_value {
            formula_failures.push(f.clone());
        }
    }

    Ok(ConstructionReport {
        kd45,
        nodes_checked: built.nodes.len(),
        node_failures,
        formulas_checked,
        formula_failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::search::sampling;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn f(src: &str) -> Formula {
        src.parse().expect("formula")
    }

    fn cl_of(src: &str) -> ClosureSet {
        f(src).proper_closure()
    }

    /// Transitive, shift-reflexive fork: s sees t (where p holds) and u.
    fn golden_input() -> UniModalModel {
        UniModalModel::build(
            &["s", "t", "u"],
            &[("s", "t"), ("s", "u"), ("t", "t"), ("u", "u")],
            &[("p", &["t"])],
        )
        .unwrap()
    }

    /// Like the fork but with an extra edge a -> b, giving two-node clusters.
    fn richer_input() -> UniModalModel {
        UniModalModel::build(
            &["w", "a", "b"],
            &[("w", "a"), ("w", "b"), ("a", "a"), ("a", "b"), ("b", "b")],
            &[("p", &["a"])],
        )
        .unwrap()
    }

    /// Three tines plus a mediator z that sees the first two.
    fn merge_input() -> UniModalModel {
        UniModalModel::build(
            &["w", "t1", "t2", "t3", "z"],
            &[
                ("w", "t1"),
                ("w", "t2"),
                ("w", "t3"),
                ("w", "z"),
                ("t1", "t1"),
                ("t2", "t2"),
                ("t3", "t3"),
                ("z", "z"),
                ("z", "t1"),
                ("z", "t2"),
            ],
            &[("p1", &["t1"]), ("p2", &["t2"]), ("p3", &["t3"])],
        )
        .unwrap()
    }

    /// Three reflexive tines; satisfies the mediator property for n=3 but
    /// not n=2.
    fn star_input() -> UniModalModel {
        UniModalModel::build(
            &["w", "t1", "t2", "t3"],
            &[
                ("w", "t1"),
                ("w", "t2"),
                ("w", "t3"),
                ("t1", "t1"),
                ("t2", "t2"),
                ("t3", "t3"),
            ],
            &[("p1", &["t1"]), ("p2", &["t2"]), ("p3", &["t3"])],
        )
        .unwrap()
    }

    #[test]
    fn certification_examples() {
        let cert = certify_input(&golden_input(), "s", 2).unwrap();
        assert!(cert.all_hold());
        assert!(cert.branching_root);

        let broken = UniModalModel::build(
            &["s", "t", "u"],
            &[("s", "t"), ("s", "u"), ("t", "t")],
            &[("p", &["t"])],
        )
        .unwrap();
        let cert = certify_input(&broken, "s", 2).unwrap();
        assert_eq!(cert.shift_reflexive.witness(), Some(&(0, 2)));
        assert!(!cert.all_hold());

        let cert = certify_input(&star_input(), "w", 2).unwrap();
        assert!(!cert.cn_property.holds());
        let cert = certify_input(&star_input(), "w", 3).unwrap();
        assert!(cert.all_hold());

        assert!(certify_input(&golden_input(), "missing", 2).is_err());
    }

    #[test]
    fn golden_elimination() {
        let m = golden_input();
        let trace = x_elimination(&m, "s", &cl_of("C p"), 2).unwrap();
        assert_eq!(
            trace.witnesses,
            vec![(f("~C p"), "u".to_string()), (f("<C>top"), "t".to_string())]
        );
        assert_eq!(trace.stages, vec![vec!["t".to_string(), "u".to_string()]]);
        assert!(trace.merges.is_empty());
        assert!(trace.padded.is_empty());
        assert_eq!(trace.final_x, vec!["t".to_string(), "u".to_string()]);
    }

    #[test]
    fn elimination_pads_from_remaining_successors() {
        let m = UniModalModel::build(
            &["w", "a", "b"],
            &[("w", "a"), ("w", "b"), ("a", "a"), ("b", "b")],
            &[],
        )
        .unwrap();
        let trace = x_elimination(&m, "w", &cl_of("top"), 2).unwrap();
        assert_eq!(trace.witnesses, vec![(f("<C>top"), "a".to_string())]);
        assert_eq!(trace.padded, vec!["b".to_string()]);
        assert_eq!(trace.final_x, vec!["a".to_string(), "b".to_string()]);
    }

    #[test]
    fn elimination_merges_through_a_mediator() {
        let m = merge_input();
        let trace = x_elimination(&m, "w", &cl_of("~C~p1 & ~C~p2 & ~C~p3"), 2).unwrap();
        assert_eq!(
            trace.stages,
            vec![
                vec!["t1".to_string(), "t2".to_string(), "t3".to_string()],
                vec!["t3".to_string(), "z".to_string()],
            ]
        );
        assert_eq!(
            trace.merges,
            vec![MergeStep {
                tuple: vec!["t1".to_string(), "t2".to_string(), "t3".to_string()],
                mediator: "z".to_string(),
                removed: ("t1".to_string(), "t2".to_string()),
            }]
        );
        assert_eq!(trace.final_x, vec!["t3".to_string(), "z".to_string()]);

        // Every initial witness stays reachable from every stage, and the
        // mediator really sees the pair it replaced.
        let r = m.relation();
        let reach = r.transitive_closure();
        for stage in &trace.stages {
            for (_, witness) in &trace.witnesses {
                let w = m.state_index(witness).unwrap();
                assert!(stage.iter().any(|s| {
                    let s = m.state_index(s).unwrap();
                    s == w || reach.has(s, w)
                }));
            }
        }
        for step in &trace.merges {
            let z = m.state_index(&step.mediator).unwrap();
            assert!(r.has(z, m.state_index(&step.removed.0).unwrap()));
            assert!(r.has(z, m.state_index(&step.removed.1).unwrap()));
        }
    }

    #[test]
    fn elimination_errors() {
        // Single non-branching successor: nothing to pad with.
        let lonely = UniModalModel::build(&["w", "x"], &[("w", "x"), ("x", "x")], &[]).unwrap();
        assert_eq!(
            x_elimination(&lonely, "w", &cl_of("top"), 2),
            Err(ConstructError::PaddingImpossible {
                root: "w".to_string(),
                needed: 1,
            })
        );

        // Not transitive: w -> a -> b without w -> b.
        let bent = UniModalModel::build(
            &["w", "a", "b"],
            &[("w", "a"), ("a", "a"), ("a", "b"), ("b", "b")],
            &[],
        )
        .unwrap();
        match x_elimination(&bent, "w", &cl_of("top"), 2) {
            Err(ConstructError::Precondition(msg)) => assert!(msg.contains("transitive")),
            other => panic!("expected precondition failure, got {other:?}"),
        }

        assert_eq!(
            x_elimination(&golden_input(), "s", &cl_of("top"), 1),
            Err(ConstructError::AgentCount(1))
        );
    }

    #[test]
    fn golden_fold() {
        let m = golden_input();
        let built = fold_construct(&m, "s", &cl_of("C p"), 2).unwrap();
        assert_eq!(
            built.model.states(),
            &["s", "t_t_1_2", "t_t_2_1", "u_u_1_2", "u_u_2_1"]
        );
        assert_eq!(
            built.model.relation(0).pairs().collect::<Vec<_>>(),
            vec![(0, 1), (1, 1), (2, 1), (3, 3), (4, 3)]
        );
        assert_eq!(
            built.model.relation(1).pairs().collect::<Vec<_>>(),
            vec![(0, 4), (1, 2), (2, 2), (3, 4), (4, 4)]
        );
        assert_eq!(
            built.model.atom_states("p"),
            Some(&StateSet::from_indices(5, [1, 2]))
        );
        assert!(built.model.check_frame_properties().kd45);

        // The closure reaches exactly the four cluster copies from the root.
        let closed = built.model.union_relation().transitive_closure();
        assert_eq!(
            closed.successors(0),
            &StateSet::from_indices(5, [1, 2, 3, 4])
        );

        // Common belief in p fails at both roots alike.
        assert!(
            !semantics::satisfies(&built.model, "s", &f("C p"), ClosureMode::Transitive).unwrap()
        );
        assert!(!semantics::satisfies_uni(&m, "s", &f("C p"), ClosureMode::Transitive).unwrap());

        let report = verify_construction(&m, "s", &built).unwrap();
        assert!(report.all_pass());
        assert_eq!(report.nodes_checked, 4);
        assert_eq!(report.formulas_checked, built.closure.len());
    }

    #[test]
    fn fold_size_stays_within_the_cluster_bound() {
        for (m, root, cl, n) in [
            (golden_input(), "s", cl_of("C p"), 2),
            (richer_input(), "w", cl_of("C p"), 2),
            (merge_input(), "w", cl_of("~C~p1 & ~C~p2 & ~C~p3"), 2),
            (star_input(), "w", cl_of("~C~p1 & ~C~p2 & ~C~p3"), 3),
        ] {
            let built = fold_construct(&m, root, &cl, n).unwrap();
            let pair_orderings = if n == 2 { 2 } else { 2 * n };
            assert!(built.model.state_count() <= 1 + m.relation().pair_count() * pair_orderings);
        }
    }

    #[test]
    fn star_fold_gives_the_third_agent_loops() {
        let m = star_input();
        let built = fold_construct(&m, "w", &cl_of("~C~p1 & ~C~p2 & ~C~p3"), 3).unwrap();
        assert_eq!(built.model.state_count(), 7);
        assert!(built.model.check_frame_properties().kd45);
        assert!(verify_construction(&m, "w", &built).unwrap().all_pass());

        // Inside the t1 clusters only agents 1 and 2 move; agent 3 idles.
        for name in ["t1_t1_1_2", "t1_t1_2_1"] {
            let i = built.model.state_index(name).unwrap();
            assert_eq!(
                built.model.relation(2).successors(i),
                &StateSet::from_indices(7, [i])
            );
        }
    }

    #[test]
    fn mutations_are_caught_by_the_audit() {
        let m = richer_input();
        let built = fold_construct(&m, "w", &cl_of("C p"), 2).unwrap();
        assert!(verify_construction(&m, "w", &built).unwrap().all_pass());

        // Deleting one intra-cluster edge breaks euclideanness.
        let i = built.model.state_index("a_a_1_2").unwrap();
        let j = built.model.state_index("a_b_1_2").unwrap();
        let mut damaged = built.clone();
        let relations: Vec<Relation> = built
            .model
            .relations()
            .iter()
            .enumerate()
            .map(|(agent, rel)| {
                Relation::from_pairs(
                    built.model.state_count(),
                    rel.pairs().filter(|&pair| agent != 0 || pair != (i, j)),
                )
            })
            .collect();
        damaged.model = KripkeModel::new(
            built.model.states().to_vec(),
            relations,
            built.model.valuation().clone(),
        )
        .unwrap();
        let report = verify_construction(&m, "w", &damaged).unwrap();
        assert!(!report.kd45);
        let frame = damaged.model.check_frame_properties();
        assert!(!frame.agents[0].euclidean.holds());

        // Flipping one node's valuation breaks its base bisimulation.
        let flipped_state = built.model.state_index("b_b_2_1").unwrap();
        let mut valuation = built.model.valuation().clone();
        valuation
            .get_mut("p")
            .expect("p is valued")
            .insert(flipped_state);
        let mut flipped = built.clone();
        flipped.model = KripkeModel::new(
            built.model.states().to_vec(),
            built.model.relations().to_vec(),
            valuation,
        )
        .unwrap();
        // The flipped node fails its base check (the closure links clusters,
        // so neighbours may be dragged down with it).
        let report = verify_construction(&m, "w", &flipped).unwrap();
        assert!(report.kd45);
        assert!(report.node_failures.contains(&"b_b_2_1".to_string()));
    }

    #[test]
    fn trace_renders_as_a_log() {
        let m = merge_input();
        let trace = x_elimination(&m, "w", &cl_of("~C~p1 & ~C~p2 & ~C~p3"), 2).unwrap();
        let log = render_trace(&trace);
        assert!(log.contains("witness <C> p1: t1"));
        assert!(log.contains("stage 0: t1 t2 t3"));
        assert!(log.contains("merge: tuple t1 t2 t3; mediator z; removed t1 t2"));
        assert!(log.contains("stage 1: t3 z"));
        assert!(log.contains("final: t3 z"));
    }

    #[test]
    fn random_certified_inputs_construct_and_verify() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let atom_names: Vec<String> = ["p", "q"].iter().map(|s| s.to_string()).collect();
        let mut accepted = 0;
        while accepted < 25 {
            let n = if accepted % 5 == 4 { 3 } else { 2 };
            let k = rng.gen_range(2..=4);
            let base = sampling::random_kd45_model(&mut rng, n, k, &atom_names);
            let closed = UniModalModel::new(
                base.states().to_vec(),
                base.union_relation().transitive_closure(),
                base.valuation().clone(),
            )
            .unwrap();
            // Pick a root with enough distinct successors for padding.
            let Some(root_idx) = (0..k).find(|&s| closed.relation().successors(s).count() >= n)
            else {
                continue;
            };
            let root = closed.state_name(root_idx).to_string();
            let cl = sampling::random_formula(&mut rng, &atom_names, 3).proper_closure();
            let built = fold_construct(&closed, &root, &cl, n).unwrap();
            let report = verify_construction(&closed, &root, &built).unwrap();
            assert!(
                report.all_pass(),
                "audit failed: kd45={} nodes={:?} formulas={:?}",
                report.kd45,
                report.node_failures,
                report.formula_failures
            );
            accepted += 1;
        }
    }
}
