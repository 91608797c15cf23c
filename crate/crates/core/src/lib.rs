/*!
Parse ambiguous sentences into a packed shared forest and ground every
constituent in a finite environment model.

The pipeline: [`load_environment`] and [`load_grammar`] read the two input
files, [`cky_parse`] builds the forest, [`annotate_forest`] attaches a
referent set to every node in one bottom-up pass, and [`filter_forest`] /
[`evaluate_truth`] / [`best_tree`] use those sets to discard ungrounded
readings or decide whether the sentence holds in the environment.

Referent sets stay sorted and deduplicated throughout, so every composition
step is a linear merge and whole-forest annotation stays polynomial in the
sentence length no matter how many trees the forest packs.
*/

pub mod annotate;
pub mod disambig;
pub mod env;
pub mod forest;
pub mod grammar;
pub mod referents;

/// Re-exported because tree and node counts in the public API are [`num_bigint::BigUint`].
pub use num_bigint;

pub use annotate::{annotate_forest, leaf_referents, AnnotateConfig, AnnotateError, AnnotatedForest, Annotation, QuantFlag};
pub use disambig::{
    best_tree, evaluate_tree, evaluate_truth, filter_forest, oracle_annotate, run_stats, AnnotatedTree,
    DisambigError, FilterReport, OracleError, RunStats, TruthVerdict,
};
pub use env::{load_environment, EnvError, EnvironmentDb, RefKind, ReferentId, RelationTable};
pub use forest::{cky_parse, ConjId, ConjNode, DisjId, DisjNode, Forest, ForestStats, ParseError, ParseTree, Span};
pub use grammar::{
    load_grammar, Category, CategoryId, CompositionOp, Grammar, GrammarError, LexEntry, QuantForce, SemPayload,
};
pub use referents::{
    compose_argument, compose_argument_support, compose_argument_universal, compose_modifier, compose_noun_noun,
    union_sets, AlgebraError, ReferentSet, ReferentTuple, MAX_ARITY,
};
