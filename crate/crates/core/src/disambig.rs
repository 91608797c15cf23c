//! Environment-based disambiguation over an annotated forest.
//!
//! Filtering removes ways of building a constituent that the environment
//! contradicts: a conjunctive node under a referential category whose set
//! came out empty, or an argument attachment under a non-referential
//! category whose argument child denotes nothing.  If that leaves no root
//! derivable, the whole forest is kept instead; a sentence that fails to
//! refer is odd, not unparseable.
//!
//! Truth evaluation asks whether anything at all witnesses the root.
//! Best-tree extraction unpacks one reading with as few ungrounded
//! constituents as possible, preferring lower attachments on ties.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigUint;
use num_traits::ToPrimitive;
use thiserror::Error;

use crate::annotate::{apply_rule, leaf_referents, AnnotateConfig, AnnotateError, AnnotatedForest, Annotation, QuantFlag};
use crate::env::EnvironmentDb;
use crate::forest::{ConjNode, Forest, ParseTree, Span};
use crate::grammar::{CategoryId, CompositionOp, Grammar};
use crate::referents::{self, AlgebraError, ReferentSet};

/// What filtering did to a forest.  On fallback nothing was removed and
/// `trees_after` equals `trees_before`.
#[derive(Clone, PartialEq, Debug)]
pub struct FilterReport {
    pub trees_before: BigUint,
    pub trees_after: BigUint,
    pub removed_conj_nodes: usize,
    pub fallback_used: bool,
}

/// Errors from truth evaluation.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum DisambigError {
    #[error("no parse")]
    NoParse,
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
}

/// Errors from the enumerating oracle.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum OracleError {
    #[error("forest packs {count} trees, above the oracle cap {cap}")]
    CapExceeded { count: BigUint, cap: usize },
    #[error(transparent)]
    Annotate(#[from] AnnotateError),
}

/// Truth verdict at the root: `holds` iff some referent witnesses it.
#[derive(Clone, PartialEq, Debug)]
pub struct TruthVerdict {
    pub holds: bool,
    pub witnesses: ReferentSet,
}

/// Removes environment-contradicted conjunctive nodes and prunes what can
/// no longer be built.  Falls back to the unfiltered forest if no root
/// survives.
pub fn filter_forest(af: &AnnotatedForest) -> (Forest, FilterReport) {
    let forest = af.forest();
    let grammar = af.grammar();
    let trees_before = forest.count_trees();

    let mut removed = vec![false; forest.conj_nodes().len()];
    for node in forest.disj_nodes() {
        let referential = grammar.is_referential(node.category);
        for &c in &node.alternatives {
            if referential {
                if af.conj_annotation(c).referents.is_empty() {
                    removed[c.index()] = true;
                }
            } else if let ConjNode::Branch { rule, right, .. } = *forest.conj(c) {
                if grammar.rule(rule).op == CompositionOp::ArgumentAttach
                    && af.annotation(right).referents.is_empty()
                {
                    removed[c.index()] = true;
                }
            }
        }
    }

    let filtered = forest.retain_conj(|c| !removed[c.index()]);
    if filtered.roots().is_empty() && !forest.roots().is_empty() {
        let report = FilterReport {
            trees_before: trees_before.clone(),
            trees_after: trees_before,
            removed_conj_nodes: 0,
            fallback_used: true,
        };
        return (forest.clone(), report);
    }
    let report = FilterReport {
        trees_after: filtered.count_trees(),
        removed_conj_nodes: forest.conj_nodes().len() - filtered.conj_nodes().len(),
        trees_before,
        fallback_used: false,
    };
    (filtered, report)
}

/// Whether the sentence holds in the environment: true iff the union of
/// root referent sets is non-empty.  Evaluates the unfiltered forest, so
/// every reading gets a chance to witness.
pub fn evaluate_truth(af: &AnnotatedForest) -> Result<TruthVerdict, DisambigError> {
    if af.forest().roots().is_empty() {
        return Err(DisambigError::NoParse);
    }
    let witnesses = af.root_referents()?;
    Ok(TruthVerdict { holds: !witnesses.is_empty(), witnesses })
}

/// Unpacks the reading with the fewest ungrounded constituents from the
/// filtered forest.  Ties prefer larger split points (lower attachment),
/// then rule declaration order.  `None` when nothing parses.
pub fn best_tree(af: &AnnotatedForest) -> Option<ParseTree> {
    let (filtered, _) = filter_forest(af);
    filtered.roots().first()?;

    let empty_here = |category: CategoryId, span: Span| -> u64 {
        let ann = af.annotation_at(category, span).expect("filtered nodes exist in the original forest");
        ann.referents.is_empty() as u64
    };

    // Per disjunctive node: cheapest alternative and its cost.
    let disj = filtered.disj_nodes();
    let mut cost: Vec<u64> = Vec::with_capacity(disj.len());
    let mut pick: Vec<usize> = Vec::with_capacity(disj.len());
    for node in disj {
        let mut best: Option<(u64, usize, usize)> = None; // (cost, split, alt index)
        for (i, &c) in node.alternatives.iter().enumerate() {
            let (alt_cost, split) = match *filtered.conj(c) {
                ConjNode::Leaf { .. } => (0, 0),
                ConjNode::Branch { left, right, .. } => {
                    (cost[left.index()] + cost[right.index()], filtered.disj(left).span.end)
                }
            };
            let better = match best {
                None => true,
                Some((bc, bs, _)) => alt_cost < bc || (alt_cost == bc && split > bs),
            };
            if better {
                best = Some((alt_cost, split, i));
            }
        }
        let (alt_cost, _, alt) = best.expect("disjunctive nodes have at least one alternative");
        cost.push(empty_here(node.category, node.span) + alt_cost);
        pick.push(alt);
    }

    let root = *filtered
        .roots()
        .iter()
        .min_by_key(|r| cost[r.index()])
        .expect("checked non-empty above");

    fn build(filtered: &Forest, pick: &[usize], d: crate::forest::DisjId) -> ParseTree {
        let node = filtered.disj(d);
        match *filtered.conj(node.alternatives[pick[d.index()]]) {
            ConjNode::Leaf { entry, token } => {
                ParseTree::Leaf { category: node.category, span: node.span, entry, token }
            }
            ConjNode::Branch { rule, left, right } => ParseTree::Branch {
                category: node.category,
                span: node.span,
                rule,
                children: Box::new((build(filtered, pick, left), build(filtered, pick, right))),
            },
        }
    }
    Some(build(&filtered, &pick, root))
}

/// One parse tree with every constituent's annotation, as per-tree
/// evaluation computes it (no sharing involved).
#[derive(Clone, PartialEq, Debug)]
pub struct AnnotatedTree {
    pub category: CategoryId,
    pub span: Span,
    pub annotation: Annotation,
    /// At existential argument attachments: the relation tuples that found a
    /// match, before stripping.  Display support for provenance output.
    pub support: Option<ReferentSet>,
    pub token: Option<usize>,
    pub children: Option<Box<(AnnotatedTree, AnnotatedTree)>>,
}

/// Evaluates one unpacked tree recursively with the same composition rules
/// the forest annotator uses.
pub fn evaluate_tree(
    tree: &ParseTree,
    grammar: &Grammar,
    db: &EnvironmentDb,
    config: &AnnotateConfig,
) -> Result<AnnotatedTree, AnnotateError> {
    let node_err = |category: CategoryId, span: Span, source: AlgebraError| AnnotateError {
        category: grammar.category(category).name.clone(),
        span,
        source,
    };
    match tree {
        ParseTree::Leaf { category, span, entry, token } => Ok(AnnotatedTree {
            category: *category,
            span: *span,
            annotation: leaf_referents(grammar.lex_entry(*entry), db),
            support: None,
            token: Some(*token),
            children: None,
        }),
        ParseTree::Branch { category, span, rule, children } => {
            let left = evaluate_tree(&children.0, grammar, db, config)?;
            let right = evaluate_tree(&children.1, grammar, db, config)?;
            let op = grammar.rule(*rule).op;
            let annotation =
                apply_rule(op, &left.annotation, &right.annotation, db, config.proximity_threshold, &mut 0)
                    .map_err(|e| node_err(*category, *span, e))?;
            let support = if op == CompositionOp::ArgumentAttach && right.annotation.quant == QuantFlag::Plain {
                Some(
                    referents::compose_argument_support(&left.annotation.referents, &right.annotation.referents)
                        .map_err(|e| node_err(*category, *span, e))?,
                )
            } else {
                None
            };
            Ok(AnnotatedTree {
                category: *category,
                span: *span,
                annotation,
                support,
                token: None,
                children: Some(Box::new((left, right))),
            })
        }
    }
}

/// Reference annotator: enumerates every tree (refusing above `cap`),
/// evaluates each recursively, and unions the results per constituent.
/// Exponential by design; exists to check [`crate::annotate_forest`], which
/// must agree on every `(category, span)` it produces.
pub fn oracle_annotate(
    forest: &Forest,
    grammar: &Grammar,
    db: &EnvironmentDb,
    config: &AnnotateConfig,
    cap: usize,
) -> Result<BTreeMap<(CategoryId, Span), ReferentSet>, OracleError> {
    let count = forest.count_trees();
    if count > cap.into() {
        return Err(OracleError::CapExceeded { count, cap });
    }
    let mut map: BTreeMap<(CategoryId, Span), ReferentSet> = BTreeMap::new();
    let node_err = |category: CategoryId, span: Span, source: AlgebraError| AnnotateError {
        category: grammar.category(category).name.clone(),
        span,
        source,
    };
    for tree in forest.enumerate_trees(cap) {
        let annotated = evaluate_tree(&tree, grammar, db, config)?;
        let mut stack = vec![&annotated];
        while let Some(node) = stack.pop() {
            let key = (node.category, node.span);
            let merged = match map.get(&key) {
                Some(existing) => referents::union_sets(&[existing, &node.annotation.referents])
                    .map_err(|e| node_err(node.category, node.span, e))?,
                None => node.annotation.referents.clone(),
            };
            map.insert(key, merged);
            if let Some(children) = &node.children {
                stack.push(&children.0);
                stack.push(&children.1);
            }
        }
    }
    Ok(map)
}

/// Headline numbers for one sentence run.
#[derive(Clone, PartialEq, Debug)]
pub struct RunStats {
    pub sentence: String,
    pub trees_before: BigUint,
    pub trees_after: BigUint,
    pub disj_nodes: usize,
    pub conj_nodes: usize,
    pub unshared_nodes: BigUint,
    /// Unshared nodes per forest node: what sharing saved.
    pub sharing_ratio: f64,
    /// Trees before filtering per tree after: what grounding removed.
    pub reduction_ratio: f64,
    pub fallback: bool,
}

fn big_to_f64(x: &BigUint) -> f64 {
    x.to_f64().unwrap_or(f64::INFINITY)
}

/// Collects [`RunStats`] from an annotated forest and its filter report.
pub fn run_stats(af: &AnnotatedForest, report: &FilterReport) -> RunStats {
    let stats = af.forest().forest_stats();
    let forest_nodes = stats.disj_count + stats.conj_count;
    let sharing_ratio = if forest_nodes == 0 {
        0.0
    } else {
        big_to_f64(&stats.unshared_node_count) / forest_nodes as f64
    };
    let reduction_ratio = if report.trees_after == 0u32.into() {
        0.0
    } else {
        big_to_f64(&report.trees_before) / big_to_f64(&report.trees_after)
    };
    RunStats {
        sentence: af.forest().tokens().join(" "),
        trees_before: report.trees_before.clone(),
        trees_after: report.trees_after.clone(),
        disj_nodes: stats.disj_count,
        conj_nodes: stats.conj_count,
        unshared_nodes: stats.unshared_node_count,
        sharing_ratio,
        reduction_ratio,
        fallback: report.fallback_used,
    }
}

impl RunStats {
    /// One tab-separated row: sentence, trees before and after, disjunctive,
    /// conjunctive, and unshared node counts, fallback flag.
    pub fn record(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.sentence,
            self.trees_before,
            self.trees_after,
            self.disj_nodes,
            self.conj_nodes,
            self.unshared_nodes,
            if self.fallback { "yes" } else { "no" }
        )
    }
}

impl fmt::Display for RunStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "sentence: {}", self.sentence)?;
        writeln!(f, "trees_before: {}", self.trees_before)?;
        writeln!(f, "trees_after: {}", self.trees_after)?;
        writeln!(f, "disj_nodes: {}", self.disj_nodes)?;
        writeln!(f, "conj_nodes: {}", self.conj_nodes)?;
        writeln!(f, "unshared_nodes: {}", self.unshared_nodes)?;
        writeln!(f, "sharing_ratio: {:.1}:1", self.sharing_ratio)?;
        writeln!(f, "reduction_ratio: {:.1}:1", self.reduction_ratio)?;
        write!(f, "fallback: {}", if self.fallback { "yes" } else { "no" })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotate::annotate_forest;
    use crate::env::load_environment;
    use crate::forest::cky_parse;
    use crate::grammar::load_grammar;

    const PANEL_ENV: &str = include_str!("../../../fixtures/panel.env");
    const PANEL_GR: &str = include_str!("../../../fixtures/panel.gr");
    const COOLANT_ENV: &str = include_str!("../../../fixtures/coolant.env");
    const COOLANT_GR: &str = include_str!("../../../fixtures/coolant.gr");

    const SENT1: [&str; 5] = ["button", "on", "handle", "beside", "adapter"];
    const SENT3: [&str; 5] = ["drained", "after", "test", "at", "3:00"];

    fn pipeline<'a>(
        g: &'a Grammar,
        db: &'a EnvironmentDb,
        f: &'a Forest,
    ) -> AnnotatedForest<'a> {
        annotate_forest(f, g, db, &AnnotateConfig::default()).unwrap()
    }

    #[test]
    fn filtering_keeps_only_the_grounded_attachment() {
        let g = load_grammar(PANEL_GR).unwrap();
        let db = load_environment(PANEL_ENV).unwrap();
        let f = cky_parse(&g, &SENT1).unwrap();
        let af = pipeline(&g, &db, &f);
        let (filtered, report) = filter_forest(&af);

        assert_eq!(report.trees_before, 2u32.into());
        assert_eq!(report.trees_after, 1u32.into());
        assert_eq!(report.removed_conj_nodes, 3);
        assert!(!report.fallback_used);
        assert_eq!(filtered.disj_nodes().len(), 9);
        assert_eq!(filtered.conj_nodes().len(), 9);

        let trees = filtered.enumerate_trees(10);
        assert_eq!(trees.len(), 1);
        assert_eq!(
            trees[0].bracket(&g, filtered.tokens()),
            "(NP (NP (NP button) (PP (P on) (NP handle))) (PP (P beside) (NP adapter)))"
        );
    }

    #[test]
    fn fully_grounded_forest_passes_filtering_untouched() {
        let g = load_grammar(PANEL_GR).unwrap();
        let mut env = String::from(PANEL_ENV);
        env.push_str("rel beside h1 a1\n");
        let db = load_environment(&env).unwrap();
        let f = cky_parse(&g, &SENT1).unwrap();
        let af = pipeline(&g, &db, &f);
        let (filtered, report) = filter_forest(&af);
        assert_eq!(report.trees_after, 2u32.into());
        assert_eq!(report.removed_conj_nodes, 0);
        assert!(!report.fallback_used);
        assert_eq!(&filtered, af.forest());
    }

    #[test]
    fn contradicted_forest_falls_back_whole() {
        let g = load_grammar(PANEL_GR).unwrap();
        // Same scene without buttons: every reading is ungrounded.
        let env = PANEL_ENV
            .lines()
            .filter(|l| !l.contains("button") && !l.starts_with("rel on b1") && !l.starts_with("rel beside b1"))
            .collect::<Vec<_>>()
            .join("\n");
        let db = load_environment(&env).unwrap();
        let f = cky_parse(&g, &SENT1).unwrap();
        let af = pipeline(&g, &db, &f);
        let (filtered, report) = filter_forest(&af);
        assert!(report.fallback_used);
        assert_eq!(report.removed_conj_nodes, 0);
        assert_eq!(report.trees_before, report.trees_after);
        assert_eq!(&filtered, af.forest());
    }

    #[test]
    fn truth_holds_when_some_reading_is_witnessed() {
        let g = load_grammar(COOLANT_GR).unwrap();
        let db = load_environment(COOLANT_ENV).unwrap();
        let f = cky_parse(&g, &SENT3).unwrap();
        let af = pipeline(&g, &db, &f);
        let verdict = evaluate_truth(&af).unwrap();
        assert!(verdict.holds);
        assert_eq!(verdict.witnesses.display(&db).to_string(), "{(s1,e1)}");
    }

    #[test]
    fn truth_fails_when_no_reading_is_witnessed() {
        let g = load_grammar(COOLANT_GR).unwrap();
        let env = COOLANT_ENV.lines().filter(|l| !l.starts_with("rel after")).collect::<Vec<_>>().join("\n");
        let db = load_environment(&env).unwrap();
        let f = cky_parse(&g, &SENT3).unwrap();
        let af = pipeline(&g, &db, &f);
        let verdict = evaluate_truth(&af).unwrap();
        assert!(!verdict.holds);
        assert!(verdict.witnesses.is_empty());
    }

    #[test]
    fn truth_needs_a_parse() {
        let g = load_grammar("cat S\ncat NP referential\nstart S\nlex button NP pred button\n").unwrap();
        let db = load_environment("entity b1 button\n").unwrap();
        let f = cky_parse(&g, &["button"]).unwrap();
        let af = pipeline(&g, &db, &f);
        assert_eq!(evaluate_truth(&af).unwrap_err(), DisambigError::NoParse);
    }

    #[test]
    fn best_tree_prefers_grounded_readings() {
        let g = load_grammar(PANEL_GR).unwrap();
        // Only the high attachment is grounded here: the handle is beside
        // the adapter, and the button is on that handle.
        let env = "entity b1 button\nentity h1 handle\nentity a1 adapter\n\
                   rel on b1 h1\nrel beside h1 a1\n";
        let db = load_environment(env).unwrap();
        let f = cky_parse(&g, &SENT1).unwrap();
        let af = pipeline(&g, &db, &f);
        let tree = best_tree(&af).unwrap();
        assert_eq!(
            tree.bracket(&g, f.tokens()),
            "(NP (NP button) (PP (P on) (NP (NP handle) (PP (P beside) (NP adapter)))))"
        );
    }

    #[test]
    fn best_tree_breaks_symmetric_ties_toward_low_attachment() {
        let g = load_grammar(PANEL_GR).unwrap();
        // Both attachments grounded and every constituent non-empty.
        let env = "entity b1 button\nentity h1 handle\nentity a1 adapter\n\
                   rel on b1 h1\nrel beside b1 a1\nrel beside h1 a1\n";
        let db = load_environment(env).unwrap();
        let f = cky_parse(&g, &SENT1).unwrap();
        let af = pipeline(&g, &db, &f);
        let tree = best_tree(&af).unwrap();
        assert_eq!(
            tree.bracket(&g, f.tokens()),
            "(NP (NP (NP button) (PP (P on) (NP handle))) (PP (P beside) (NP adapter)))"
        );
    }

    #[test]
    fn best_tree_is_absent_without_a_parse() {
        let g = load_grammar("cat S\ncat NP referential\nstart S\nlex button NP pred button\n").unwrap();
        let db = load_environment("entity b1 button\n").unwrap();
        let f = cky_parse(&g, &["button"]).unwrap();
        let af = pipeline(&g, &db, &f);
        assert!(best_tree(&af).is_none());
    }

    #[test]
    fn oracle_agrees_with_forest_annotation() {
        for (gr, env, sent) in [(PANEL_GR, PANEL_ENV, SENT1), (COOLANT_GR, COOLANT_ENV, SENT3)] {
            let g = load_grammar(gr).unwrap();
            let db = load_environment(env).unwrap();
            let f = cky_parse(&g, &sent).unwrap();
            let af = pipeline(&g, &db, &f);
            let map = oracle_annotate(&f, &g, &db, &AnnotateConfig::default(), 100).unwrap();
            assert!(!map.is_empty());
            for node in f.disj_nodes() {
                let got = &af.annotation_at(node.category, node.span).unwrap().referents;
                assert_eq!(map[&(node.category, node.span)], *got, "{}{}", g.category(node.category).name, node.span);
            }
        }
    }

    #[test]
    fn oracle_refuses_forests_above_its_cap() {
        let g = load_grammar(PANEL_GR).unwrap();
        let db = load_environment(PANEL_ENV).unwrap();
        let f = cky_parse(&g, &SENT1).unwrap();
        let err = oracle_annotate(&f, &g, &db, &AnnotateConfig::default(), 1).unwrap_err();
        assert_eq!(err, OracleError::CapExceeded { count: 2u32.into(), cap: 1 });
    }

    #[test]
    fn per_tree_evaluation_reports_argument_support() {
        let g = load_grammar(PANEL_GR).unwrap();
        let db = load_environment(PANEL_ENV).unwrap();
        let f = cky_parse(&g, &["button", "on", "handle"]).unwrap();
        let tree = f.enumerate_trees(1).pop().unwrap();
        let at = evaluate_tree(&tree, &g, &db, &AnnotateConfig::default()).unwrap();
        let pp = &at.children.as_ref().unwrap().1;
        assert_eq!(pp.annotation.referents.display(&db).to_string(), "{b1}");
        assert_eq!(pp.support.as_ref().unwrap().display(&db).to_string(), "{(b1,h1)}");
    }

    #[test]
    fn stats_summarize_the_run() {
        let g = load_grammar(PANEL_GR).unwrap();
        let db = load_environment(PANEL_ENV).unwrap();
        let f = cky_parse(&g, &SENT1).unwrap();
        let af = pipeline(&g, &db, &f);
        let (_, report) = filter_forest(&af);
        let stats = run_stats(&af, &report);
        assert_eq!(stats.record(), "button on handle beside adapter\t2\t1\t11\t12\t36\tno");
        let text = stats.to_string();
        assert!(text.contains("sharing_ratio: 1.6:1"));
        assert!(text.contains("reduction_ratio: 2.0:1"));
        assert!(text.ends_with("fallback: no"));

        let f = cky_parse(&g, &["button"]).unwrap();
        let af = pipeline(&g, &db, &f);
        let (_, report) = filter_forest(&af);
        let stats = run_stats(&af, &report);
        // A one-tree forest shares nothing: the ratio is exactly 1.
        assert_eq!(stats.sharing_ratio, 1.0);
        assert_eq!(stats.reduction_ratio, 1.0);
    }
}
