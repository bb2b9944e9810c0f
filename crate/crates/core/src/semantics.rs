//! Satisfaction for the common-belief language on multi-agent and uni-modal
//! models. The operator `C` quantifies over the chosen closure of the union
//! relation; evaluation computes one extension per subformula.

use std::collections::HashMap;

use crate::kripke::{KripkeModel, ModelError, Relation, StateSet, UniModalModel};
use crate::syntax::Formula;

/// How the relation interpreting `C` is obtained from the union relation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClosureMode {
    Transitive,
    ReflexiveTransitive,
}

impl ClosureMode {
    pub fn close(self, r: &Relation) -> Relation {
        match self {
            ClosureMode::Transitive => r.transitive_closure(),
            ClosureMode::ReflexiveTransitive => r.reflexive_transitive_closure(),
        }
    }
}

/// Evaluates extensions bottom-up against a fixed interpreting relation,
/// memoizing per subformula.
struct Evaluator<'m, 'f> {
    n: usize,
    valuation: &'m std::collections::BTreeMap<String, StateSet>,
    relation: Relation,
    memo: HashMap<&'f Formula, StateSet>,
}

impl<'m, 'f> Evaluator<'m, 'f> {
    fn extension(&mut self, f: &'f Formula) -> StateSet {
        if let Some(hit) = self.memo.get(f) {
            return hit.clone();
        }
        let result = match f {
            // Atoms absent from the valuation are false everywhere.
            Formula::Atom(p) => self
                .valuation
                .get(p)
                .cloned()
                .unwrap_or_else(|| StateSet::empty(self.n)),
            Formula::Top => StateSet::full(self.n),
            Formula::Neg(x) => self.extension(x).complement(),
            Formula::And(a, b) => {
                let mut e = self.extension(a);
                e.intersect_with(&self.extension(b));
                e
            }
            Formula::C(x) => {
                let body = self.extension(x);
                StateSet::from_indices(
                    self.n,
                    (0..self.n).filter(|&s| self.relation.successors(s).is_subset(&body)),
                )
            }
        };
        self.memo.insert(f, result.clone());
        result
    }
}

fn extension_against(
    n: usize,
    valuation: &std::collections::BTreeMap<String, StateSet>,
    relation: Relation,
    f: &Formula,
) -> StateSet {
    Evaluator {
        n,
        valuation,
        relation,
        memo: HashMap::new(),
    }
    .extension(f)
}

/// The set of states satisfying `f`, reading `C` over the mode's closure of
/// the union relation.
pub fn extension(m: &KripkeModel, f: &Formula, mode: ClosureMode) -> StateSet {
    extension_against(
        m.state_count(),
        m.valuation(),
        mode.close(&m.union_relation()),
        f,
    )
}

/// Truth of `f` at the named state.
pub fn satisfies(
    m: &KripkeModel,
    state: &str,
    f: &Formula,
    mode: ClosureMode,
) -> Result<bool, ModelError> {
    let s = m.require_state(state)?;
    Ok(extension(m, f, mode).contains(s))
}

/// Truth of `f` at every state.
pub fn valid_on_model(m: &KripkeModel, f: &Formula, mode: ClosureMode) -> bool {
    extension(m, f, mode) == StateSet::full(m.state_count())
}

/// Uni-modal [`extension`]: the single relation plays the union.
pub fn extension_uni(m: &UniModalModel, f: &Formula, mode: ClosureMode) -> StateSet {
    extension_against(m.state_count(), m.valuation(), mode.close(m.relation()), f)
}

pub fn satisfies_uni(
    m: &UniModalModel,
    state: &str,
    f: &Formula,
    mode: ClosureMode,
) -> Result<bool, ModelError> {
    let s = m.require_state(state)?;
    Ok(extension_uni(m, f, mode).contains(s))
}

pub fn valid_on_model_uni(m: &UniModalModel, f: &Formula, mode: ClosureMode) -> bool {
    extension_uni(m, f, mode) == StateSet::full(m.state_count())
}

/// Uni-modal extension with `C` read over the relation exactly as stored,
/// with no closure applied. This is the raw Box semantics that first-order
/// frame correspondence speaks about; on transitive relations it coincides
/// with [`extension_uni`] in `Transitive` mode.
pub fn extension_uni_raw(m: &UniModalModel, f: &Formula) -> StateSet {
    extension_against(m.state_count(), m.valuation(), m.relation().clone(), f)
}

pub fn satisfies_uni_raw(m: &UniModalModel, state: &str, f: &Formula) -> Result<bool, ModelError> {
    let s = m.require_state(state)?;
    Ok(extension_uni_raw(m, f).contains(s))
}

pub fn valid_on_model_uni_raw(m: &UniModalModel, f: &Formula) -> bool {
    extension_uni_raw(m, f) == StateSet::full(m.state_count())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{fork_model, fork_model_q};
    use crate::kripke::KripkeModel;
    use proptest::prelude::*;

    fn f(src: &str) -> Formula {
        src.parse().expect("formula")
    }

    fn sat(m: &KripkeModel, state: &str, src: &str, mode: ClosureMode) -> bool {
        satisfies(m, state, &f(src), mode).unwrap()
    }

    #[test]
    fn fork_root_shows_the_depth_five_failure() {
        let m = fork_model();
        assert!(sat(&m, "s", "~C p & ~C~C p", ClosureMode::Transitive));
    }

    #[test]
    fn fork_root_satisfies_box_shift_instance() {
        let m = fork_model();
        assert!(sat(&m, "s", "C (C p -> p)", ClosureMode::Transitive));
    }

    #[test]
    fn closure_modes_diverge_on_fork() {
        let m = fork_model_q();
        assert!(sat(&m, "s", "C q", ClosureMode::Transitive));
        // The reflexive closure adds s itself, where q is false.
        assert!(!sat(&m, "s", "C q", ClosureMode::ReflexiveTransitive));
    }

    #[test]
    fn extension_examples() {
        let m = fork_model();
        let t = m.state_index("t").unwrap();
        assert_eq!(
            extension(&m, &f("p"), ClosureMode::Transitive),
            StateSet::from_indices(3, [t])
        );
        assert_eq!(
            extension(&m, &f("C p"), ClosureMode::Transitive),
            StateSet::from_indices(3, [t])
        );
        assert_eq!(
            extension(&m, &f("top"), ClosureMode::Transitive),
            StateSet::full(3)
        );
    }

    #[test]
    fn validity_examples() {
        let m = fork_model();
        assert!(valid_on_model(
            &m,
            &f("C (C p -> p)"),
            ClosureMode::Transitive
        ));
        assert!(valid_on_model(&m, &f("C p -> p"), ClosureMode::Transitive));
        assert!(!valid_on_model(
            &m,
            &f("~C p -> C~C p"),
            ClosureMode::Transitive
        ));
    }

    #[test]
    fn unknown_atom_is_false_and_unknown_state_errors() {
        let m = fork_model();
        assert!(extension(&m, &f("zz"), ClosureMode::Transitive).is_empty());
        assert!(satisfies(&m, "nope", &f("p"), ClosureMode::Transitive).is_err());
    }

    /// All serial-transitive-euclidean relations over two states.
    fn kd45_relations_on_two_states() -> Vec<Relation> {
        vec![
            Relation::from_pairs(2, [(0, 0), (1, 0)]),
            Relation::from_pairs(2, [(0, 1), (1, 1)]),
            Relation::from_pairs(2, [(0, 0), (1, 1)]),
            Relation::from_pairs(2, [(0, 0), (0, 1), (1, 0), (1, 1)]),
        ]
    }

    fn all_two_state_kd45_models() -> Vec<KripkeModel> {
        let rels = kd45_relations_on_two_states();
        let mut out = Vec::new();
        for r1 in &rels {
            for r2 in &rels {
                for pv in 0..4u32 {
                    for qv in 0..4u32 {
                        let set = |bits: u32| {
                            StateSet::from_indices(2, (0..2).filter(|i| bits >> i & 1 == 1))
                        };
                        let valuation = [("p".to_string(), set(pv)), ("q".to_string(), set(qv))]
                            .into_iter()
                            .collect();
                        out.push(
                            KripkeModel::new(
                                vec!["a".into(), "b".into()],
                                vec![r1.clone(), r2.clone()],
                                valuation,
                            )
                            .unwrap(),
                        );
                    }
                }
            }
        }
        out
    }

    #[test]
    fn axiom_instances_hold_on_every_small_kd45_model() {
        let axioms = [
            "C (p -> q) -> (C p -> C q)",
            "C p -> ~C~p",
            "C p -> C C p",
            "C (C p -> p)",
        ];
        let models = all_two_state_kd45_models();
        assert_eq!(models.len(), 256);
        for m in &models {
            assert!(m.check_frame_properties().kd45);
            for ax in axioms {
                assert!(
                    valid_on_model(m, &f(ax), ClosureMode::Transitive),
                    "{ax} fails on {m:?}"
                );
            }
        }
    }

    fn arb_formula(depth: u32) -> impl Strategy<Value = Formula> {
        let leaf = prop_oneof![
            Just(Formula::atom("p")),
            Just(Formula::atom("q")),
            Just(Formula::Top),
        ];
        leaf.prop_recursive(depth, 32, 2, |inner| {
            prop_oneof![
                inner.clone().prop_map(Formula::neg),
                inner.clone().prop_map(Formula::c),
                (inner.clone(), inner).prop_map(|(a, b)| Formula::and(a, b)),
            ]
        })
    }

    /// Random models over up to 4 states and atoms p, q; relations and
    /// valuations unconstrained.
    fn arb_model() -> impl Strategy<Value = KripkeModel> {
        (2usize..=4)
            .prop_flat_map(|n| {
                let edges = prop::collection::vec((0..n, 0..n), 0..=n * n);
                (
                    Just(n),
                    edges.clone(),
                    edges,
                    prop::collection::vec(prop::bool::ANY, n),
                    prop::collection::vec(prop::bool::ANY, n),
                )
            })
            .prop_map(|(n, e1, e2, pv, qv)| {
                let states: Vec<String> = (0..n).map(|i| format!("w{i}")).collect();
                let pick = |v: Vec<bool>| {
                    StateSet::from_indices(
                        n,
                        v.iter().enumerate().filter(|(_, b)| **b).map(|(i, _)| i),
                    )
                };
                let valuation = [("p".to_string(), pick(pv)), ("q".to_string(), pick(qv))]
                    .into_iter()
                    .collect();
                KripkeModel::new(
                    states,
                    vec![Relation::from_pairs(n, e1), Relation::from_pairs(n, e2)],
                    valuation,
                )
                .unwrap()
            })
    }

    proptest! {
        #[test]
        fn diamond_duality(m in arb_model(), body in arb_formula(3)) {
            let diamond = Formula::chat(body.clone());
            for mode in [ClosureMode::Transitive, ClosureMode::ReflexiveTransitive] {
                let closed = mode.close(&m.union_relation());
                let body_ext = extension(&m, &body, mode);
                let diamond_ext = extension(&m, &diamond, mode);
                for s in 0..m.state_count() {
                    let has_witness = closed.successors(s).iter().any(|t| body_ext.contains(t));
                    prop_assert_eq!(diamond_ext.contains(s), has_witness);
                }
            }
        }

        #[test]
        fn multi_agent_evaluation_matches_closure_uni_model(
            m in arb_model(),
            g in arb_formula(4),
        ) {
            for mode in [ClosureMode::Transitive, ClosureMode::ReflexiveTransitive] {
                let closed = mode.close(&m.union_relation());
                let uni = UniModalModel::new(
                    m.states().to_vec(),
                    closed,
                    m.valuation().clone(),
                ).unwrap();
                prop_assert_eq!(extension(&m, &g, mode), extension_uni_raw(&uni, &g));
                // Closing the already-closed relation changes nothing.
                prop_assert_eq!(
                    extension_uni(&uni, &g, ClosureMode::Transitive),
                    extension_uni_raw(&uni, &g)
                );
            }
        }

        #[test]
        fn reflexive_mode_validates_truth_axiom(m in arb_model(), g in arb_formula(3)) {
            let t_instance = Formula::implies(Formula::c(g.clone()), g);
            prop_assert!(valid_on_model(&m, &t_instance, ClosureMode::ReflexiveTransitive));
        }
    }
}
