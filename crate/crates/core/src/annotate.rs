//! Bottom-up annotation of a packed forest with referent sets.
//!
//! Every conjunctive node gets the set its rule composes from its children;
//! every disjunctive node gets the union over its alternatives.  Each node
//! is visited once, so annotation costs one composition per forest node and
//! the whole pass stays polynomial even when the forest packs exponentially
//! many trees.
//!
//! Quantifiers denote nothing themselves.  A determiner entry carries a
//! flag instead, `det` attachment transfers the flag to the phrase, and an
//! argument attachment consumes a universally flagged argument with the
//! universal composition.  A universal flag that reaches any other
//! composition is an error: the grammar put the quantified phrase somewhere
//! the algebra cannot interpret.

use thiserror::Error;

use crate::env::EnvironmentDb;
use crate::forest::{ConjId, ConjNode, DisjId, Forest, Span};
use crate::grammar::{CategoryId, CompositionOp, Grammar, LexEntry, QuantForce, SemPayload};
use crate::referents::{self, AlgebraError, ReferentSet, ReferentTuple};

/// Quantifier state carried alongside a referent set.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum QuantFlag {
    Plain,
    Universal,
}

/// A referent set plus its quantifier state.
#[derive(Clone, PartialEq, Debug)]
pub struct Annotation {
    pub referents: ReferentSet,
    pub quant: QuantFlag,
}

impl Annotation {
    fn plain(referents: ReferentSet) -> Annotation {
        Annotation { referents, quant: QuantFlag::Plain }
    }
}

/// Knobs for annotation.  `proximity_threshold` is the distance bound used
/// by noun-noun composition.
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct AnnotateConfig {
    pub proximity_threshold: f64,
}

impl Default for AnnotateConfig {
    fn default() -> Self {
        AnnotateConfig { proximity_threshold: 1.0 }
    }
}

/// An algebra error located at the forest node that raised it.
#[derive(Error, Debug, Clone, PartialEq)]
#[error("cannot annotate {category}{span}: {source}")]
pub struct AnnotateError {
    pub category: String,
    pub span: Span,
    #[source]
    pub source: AlgebraError,
}

/// A forest with one [`Annotation`] per node, plus the inputs it was
/// annotated against.
#[derive(Debug)]
pub struct AnnotatedForest<'a> {
    forest: &'a Forest,
    grammar: &'a Grammar,
    db: &'a EnvironmentDb,
    config: AnnotateConfig,
    disj: Vec<Annotation>,
    conj: Vec<Annotation>,
    comparisons: u64,
}

/// What one lexical entry denotes in `db`.  Unknown relation names, unknown
/// constants, and keywords with no entities all denote the empty set; the
/// grammar validator reports them as warnings, annotation just proceeds.
pub fn leaf_referents(entry: &LexEntry, db: &EnvironmentDb) -> Annotation {
    match &entry.payload {
        SemPayload::TypePredicate(keyword) => Annotation::plain(db.entities_of_type(keyword)),
        SemPayload::Relation { name, .. } => {
            Annotation::plain(db.relation_set(name).unwrap_or_else(|_| ReferentSet::empty()))
        }
        SemPayload::Constant(id) => Annotation::plain(match db.lookup(id) {
            Some(r) => ReferentSet::singleton(ReferentTuple::single(r)),
            None => ReferentSet::empty(),
        }),
        SemPayload::Quantifier(force) => Annotation {
            referents: ReferentSet::empty(),
            quant: match force {
                QuantForce::Universal => QuantFlag::Universal,
                QuantForce::Existential => QuantFlag::Plain,
            },
        },
    }
}

fn forbid_universal(ann: &Annotation) -> Result<(), AlgebraError> {
    match ann.quant {
        QuantFlag::Universal => Err(AlgebraError::QuantifierMisplaced),
        QuantFlag::Plain => Ok(()),
    }
}

/// Composes two child annotations under one rule operator.  Shared by forest
/// annotation and by per-tree evaluation, so both interpret rules
/// identically.
pub(crate) fn apply_rule(
    op: CompositionOp,
    left: &Annotation,
    right: &Annotation,
    db: &EnvironmentDb,
    threshold: f64,
    cost: &mut u64,
) -> Result<Annotation, AlgebraError> {
    match op {
        CompositionOp::ModifierAttach => {
            forbid_universal(left)?;
            forbid_universal(right)?;
            Ok(Annotation::plain(referents::compose_modifier_counted(&left.referents, &right.referents, cost)?))
        }
        CompositionOp::ArgumentAttach => {
            forbid_universal(left)?;
            let set = match right.quant {
                QuantFlag::Universal => {
                    referents::compose_argument_universal_counted(&left.referents, &right.referents, cost)?
                }
                QuantFlag::Plain => referents::compose_argument_counted(&left.referents, &right.referents, cost)?,
            };
            Ok(Annotation::plain(set))
        }
        CompositionOp::NounNounProx => {
            forbid_universal(left)?;
            forbid_universal(right)?;
            // The right noun is the head; the left noun restricts it.
            Ok(Annotation::plain(referents::compose_noun_noun_counted(
                &right.referents,
                &left.referents,
                db,
                threshold,
                cost,
            )?))
        }
        CompositionOp::DetAttach => {
            // The determiner contributes only its flag; its own referent set
            // (always empty for quantifier entries) is dropped.
            forbid_universal(right)?;
            Ok(Annotation { referents: right.referents.clone(), quant: left.quant })
        }
    }
}

/// Annotates every node of `forest` against `db` in one bottom-up pass.
pub fn annotate_forest<'a>(
    forest: &'a Forest,
    grammar: &'a Grammar,
    db: &'a EnvironmentDb,
    config: &AnnotateConfig,
) -> Result<AnnotatedForest<'a>, AnnotateError> {
    let node_err = |category: CategoryId, span: Span, source: AlgebraError| AnnotateError {
        category: grammar.category(category).name.clone(),
        span,
        source,
    };
    let mut comparisons = 0u64;
    let mut conj_ann: Vec<Option<Annotation>> = vec![None; forest.conj_nodes().len()];
    let mut disj_ann: Vec<Annotation> = Vec::with_capacity(forest.disj_nodes().len());

    // Disjunctive ids ascend with span width, so children are always done.
    for node in forest.disj_nodes() {
        for &c in &node.alternatives {
            let ann = match *forest.conj(c) {
                ConjNode::Leaf { entry, .. } => leaf_referents(grammar.lex_entry(entry), db),
                ConjNode::Branch { rule, left, right } => apply_rule(
                    grammar.rule(rule).op,
                    &disj_ann[left.index()],
                    &disj_ann[right.index()],
                    db,
                    config.proximity_threshold,
                    &mut comparisons,
                )
                .map_err(|e| node_err(node.category, node.span, e))?,
            };
            conj_ann[c.index()] = Some(ann);
        }
        let alt_anns: Vec<&Annotation> =
            node.alternatives.iter().map(|c| conj_ann[c.index()].as_ref().unwrap()).collect();
        let sets: Vec<&ReferentSet> = alt_anns.iter().map(|a| &a.referents).collect();
        let referents = referents::union_sets_counted(&sets, &mut comparisons)
            .map_err(|e| node_err(node.category, node.span, e))?;
        let quant = match alt_anns.split_first() {
            Some((first, rest)) if rest.iter().all(|a| a.quant == first.quant) => first.quant,
            _ => QuantFlag::Plain,
        };
        disj_ann.push(Annotation { referents, quant });
    }

    Ok(AnnotatedForest {
        forest,
        grammar,
        db,
        config: *config,
        disj: disj_ann,
        conj: conj_ann.into_iter().map(|a| a.expect("every conjunctive node has a parent")).collect(),
        comparisons,
    })
}

impl<'a> AnnotatedForest<'a> {
    pub fn forest(&self) -> &'a Forest {
        self.forest
    }

    pub fn grammar(&self) -> &'a Grammar {
        self.grammar
    }

    pub fn db(&self) -> &'a EnvironmentDb {
        self.db
    }

    pub fn config(&self) -> &AnnotateConfig {
        &self.config
    }

    pub fn annotation(&self, id: DisjId) -> &Annotation {
        &self.disj[id.index()]
    }

    pub fn conj_annotation(&self, id: ConjId) -> &Annotation {
        &self.conj[id.index()]
    }

    /// Annotation of the constituent `category` over `span`, if packed.
    pub fn annotation_at(&self, category: CategoryId, span: Span) -> Option<&Annotation> {
        self.forest.lookup(category, span).map(|d| self.annotation(d))
    }

    /// Union of the root annotations: everything the whole sentence can
    /// denote.  Errors if the forest has no roots or roots disagree on
    /// arity.
    pub fn root_referents(&self) -> Result<ReferentSet, AlgebraError> {
        let sets: Vec<&ReferentSet> = self.forest.roots().iter().map(|&r| &self.annotation(r).referents).collect();
        referents::union_sets(&sets)
    }

    /// Element comparisons spent annotating, the measure the complexity
    /// bounds are stated in.
    pub fn comparisons(&self) -> u64 {
        self.comparisons
    }
}
