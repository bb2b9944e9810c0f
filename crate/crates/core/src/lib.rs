//! Core algorithms for a common-belief workbench over multi-agent KD45
//! Kripke models: formula syntax, model checking through closure relations,
//! bisimulations, Hilbert proof checking, countermodel search, and the
//! cluster construction that folds belief structures into finite models.

pub mod bisim;
pub mod construct;
pub mod kripke;
pub mod proof;
pub mod search;
pub mod semantics;
pub mod syntax;

pub use bisim::{BisimError, BisimRelation, BisimViolation};
pub use construct::{
    ClusterNode, ConstructError, ConstructedModel, ConstructionReport, EliminationTrace,
    FrameCertificate, MergeStep,
};
pub use kripke::{
    AgentProperties, CnViolation, KripkeModel, ModelError, PropertyCheck, PropertyReport, Relation,
    StateSet, UniModalModel,
};
pub use proof::{AxiomSchema, Justification, Proof, ProofError, ProofLine, Verdict};
pub use search::{
    Budget, CertifyReport, SearchConfig, SearchError, SearchOutcome, SearchStats, SearchVerdict,
};
pub use semantics::ClosureMode;
pub use syntax::{ClosureSet, Formula, ParseError};
