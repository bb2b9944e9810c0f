//! Greatest bisimulations between multi-agent models: fixpoint computation,
//! bisimilarity queries, an independent clause-by-clause audit, and grafted
//! tree unfoldings for producing bisimilar-by-construction pairs.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::kripke::{KripkeModel, ModelError, PropertyCheck, Relation, StateSet};

/// A set of state-index pairs between two models.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BisimRelation {
    pairs: BTreeSet<(usize, usize)>,
}

impl BisimRelation {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        BisimRelation {
            pairs: pairs.into_iter().collect(),
        }
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.pairs.iter().copied()
    }

    pub fn contains(&self, left: usize, right: usize) -> bool {
        self.pairs.contains(&(left, right))
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BisimError {
    #[error("agent counts differ: {0} vs {1}")]
    AgentCountMismatch(usize, usize),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A concrete failure of one bisimulation clause at a related pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BisimViolation {
    Atoms {
        left: usize,
        right: usize,
        atom: String,
    },
    Forth {
        left: usize,
        right: usize,
        agent: usize,
        successor: usize,
    },
    Back {
        left: usize,
        right: usize,
        agent: usize,
        successor: usize,
    },
}

fn atoms_agree(m1: &KripkeModel, m2: &KripkeModel, x: usize, y: usize) -> Option<String> {
    m1.valuation()
        .keys()
        .chain(m2.valuation().keys())
        .find(|atom| {
            let in1 = m1.atom_states(atom).is_some_and(|s| s.contains(x));
            let in2 = m2.atom_states(atom).is_some_and(|s| s.contains(y));
            in1 != in2
        })
        .cloned()
}

/// The largest bisimulation between the two models: starts from all
/// atom-agreeing pairs and deletes Forth/Back violators until stable.
pub fn max_bisimulation(m1: &KripkeModel, m2: &KripkeModel) -> Result<BisimRelation, BisimError> {
    if m1.agent_count() != m2.agent_count() {
        return Err(BisimError::AgentCountMismatch(
            m1.agent_count(),
            m2.agent_count(),
        ));
    }
    let mut pairs: BTreeSet<(usize, usize)> = (0..m1.state_count())
        .flat_map(|x| (0..m2.state_count()).map(move |y| (x, y)))
        .filter(|&(x, y)| atoms_agree(m1, m2, x, y).is_none())
        .collect();
    loop {
        let survivors: BTreeSet<(usize, usize)> = pairs
            .iter()
            .copied()
            .filter(|&(x, y)| {
                (0..m1.agent_count()).all(|a| {
                    let forth = m1.relation(a).successors(x).iter().all(|x2| {
                        m2.relation(a)
                            .successors(y)
                            .iter()
                            .any(|y2| pairs.contains(&(x2, y2)))
                    });
                    let back = m2.relation(a).successors(y).iter().all(|y2| {
                        m1.relation(a)
                            .successors(x)
                            .iter()
                            .any(|x2| pairs.contains(&(x2, y2)))
                    });
                    forth && back
                })
            })
            .collect();
        if survivors.len() == pairs.len() {
            return Ok(BisimRelation { pairs });
        }
        pairs = survivors;
    }
}

/// Whether the two named states are related by the greatest bisimulation.
pub fn are_bisimilar(
    m1: &KripkeModel,
    s1: &str,
    m2: &KripkeModel,
    s2: &str,
) -> Result<bool, BisimError> {
    let x = m1.require_state(s1)?;
    let y = m2.require_state(s2)?;
    Ok(max_bisimulation(m1, m2)?.contains(x, y))
}

/// Audits a claimed bisimulation clause by clause, independently of the
/// fixpoint computation: every pair must satisfy Atoms, and each of its
/// transitions must have a matching transition landing back in `z`.
pub fn verify_bisimulation(
    m1: &KripkeModel,
    m2: &KripkeModel,
    z: &BisimRelation,
) -> PropertyCheck<BisimViolation> {
    for (x, y) in z.pairs() {
        if let Some(atom) = atoms_agree(m1, m2, x, y) {
            return PropertyCheck::Fails(BisimViolation::Atoms {
                left: x,
                right: y,
                atom,
            });
        }
        for a in 0..m1.agent_count().min(m2.agent_count()) {
            for x2 in m1.relation(a).successors(x).iter() {
                let matched = m2
                    .relation(a)
                    .successors(y)
                    .iter()
                    .any(|y2| z.contains(x2, y2));
                if !matched {
                    return PropertyCheck::Fails(BisimViolation::Forth {
                        left: x,
                        right: y,
                        agent: a,
                        successor: x2,
                    });
                }
            }
            for y2 in m2.relation(a).successors(y).iter() {
                let matched = m1
                    .relation(a)
                    .successors(x)
                    .iter()
                    .any(|x2| z.contains(x2, y2));
                if !matched {
                    return PropertyCheck::Fails(BisimViolation::Back {
                        left: x,
                        right: y,
                        agent: a,
                        successor: y2,
                    });
                }
            }
        }
    }
    PropertyCheck::Holds
}

/// Unfolds `m` from `root` into a tree of depth `depth`, grafting a full
/// copy of `m` at the frontier so the result is bisimilar to the original
/// by construction. Interior tree nodes are named `t0, t1, …` (breadth
/// first, root `t0`) and the grafted copies `g0, …`. Returns the unfolded
/// model and the name of its root.
pub fn unfold(
    m: &KripkeModel,
    root: &str,
    depth: usize,
) -> Result<(KripkeModel, String), ModelError> {
    let r = m.require_state(root)?;
    let k = m.state_count();
    let n_agents = m.agent_count();

    // Interior node i unfolds original state interior[i].0 at tree depth
    // interior[i].1; edges hold (agent, from-interior, target).
    enum Target {
        Interior(usize),
        Graft(usize),
    }
    let mut interior: Vec<(usize, usize)> = Vec::new();
    let mut edges: Vec<(usize, usize, Target)> = Vec::new();
    if depth > 0 {
        interior.push((r, 0));
        let mut next = 0;
        while next < interior.len() {
            let (s, d) = interior[next];
            for a in 0..n_agents {
                for t in m.relation(a).successors(s).iter() {
                    if d + 1 < depth {
                        interior.push((t, d + 1));
                        edges.push((a, next, Target::Interior(interior.len() - 1)));
                    } else {
                        edges.push((a, next, Target::Graft(t)));
                    }
                }
            }
            next += 1;
        }
    }

    let total = interior.len() + k;
    let graft_offset = interior.len();
    let mut states: Vec<String> = (0..interior.len()).map(|i| format!("t{i}")).collect();
    states.extend((0..k).map(|j| format!("g{j}")));

    let mut relations = vec![Relation::empty(total); n_agents];
    for (a, from, target) in edges {
        let to = match target {
            Target::Interior(i) => i,
            Target::Graft(j) => graft_offset + j,
        };
        relations[a].add(from, to);
    }
    for (a, rel) in relations.iter_mut().enumerate() {
        for (x, y) in m.relation(a).pairs() {
            rel.add(graft_offset + x, graft_offset + y);
        }
    }

    let valuation = m
        .valuation()
        .iter()
        .map(|(atom, set)| {
            let mut lifted = StateSet::empty(total);
            for (i, (s, _)) in interior.iter().enumerate() {
                if set.contains(*s) {
                    lifted.insert(i);
                }
            }
            for j in set.iter() {
                lifted.insert(graft_offset + j);
            }
            (atom.clone(), lifted)
        })
        .collect();

    let root_name = if depth > 0 {
        "t0".to_string()
    } else {
        format!("g{r}")
    };
    let model = KripkeModel::new(states, relations, valuation)?;
    Ok((model, root_name))
}
