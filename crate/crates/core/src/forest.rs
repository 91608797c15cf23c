//! CKY parsing into a packed shared forest.
//!
//! The forest is an and-or graph: a disjunctive node stands for "this
//! category covers this span" and owns one conjunctive node per way of
//! building it (a lexical leaf, or a rule application over two child
//! disjunctive nodes).  Shared subspans appear once no matter how many
//! readings use them, which is what keeps the whole pipeline polynomial
//! while the number of trees grows exponentially.
//!
//! Arena order invariant: disjunctive ids ascend with span width, so the
//! children of any conjunctive node have smaller ids than its parent.
//! Bottom-up passes here and in the annotator just walk ids in order.

use std::collections::HashMap;
use std::fmt;

use num_bigint::BigUint;
use thiserror::Error;

use crate::grammar::{CategoryId, CompositionOp, Grammar};

/// Half-open token range `[start, end)`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Span {
        Span { start, end }
    }

    pub fn width(&self) -> usize {
        self.end - self.start
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{})", self.start, self.end)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct DisjId(u32);

impl DisjId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct ConjId(u32);

impl ConjId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// One way to build a constituent.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ConjNode {
    /// A word licensed by one lexical entry.
    Leaf { entry: usize, token: usize },
    /// A binary rule application.
    Branch { rule: usize, left: DisjId, right: DisjId },
}

/// One category over one span, with every way of building it.
/// Alternatives are ordered by (rule declaration index, split point).
#[derive(Clone, PartialEq, Debug)]
pub struct DisjNode {
    pub category: CategoryId,
    pub span: Span,
    pub alternatives: Vec<ConjId>,
}

/// A packed shared forest over one token sequence.
#[derive(Clone, PartialEq, Debug, Default)]
pub struct Forest {
    tokens: Vec<String>,
    disj: Vec<DisjNode>,
    conj: Vec<ConjNode>,
    roots: Vec<DisjId>,
    index: HashMap<(CategoryId, Span), DisjId>,
}

/// Errors from parsing.  A grammatical dead end is not an error: it yields
/// a forest with no roots.
#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("empty input")]
    EmptyInput,
    #[error("unknown word '{word}' at position {position}")]
    UnknownWord { word: String, position: usize },
}

/// Size figures for one forest.  `unshared_node_count` is what the same
/// trees would cost drawn separately, counting each constituent's and-or
/// pair; it equals `disj_count + conj_count` exactly when nothing is shared.
#[derive(Clone, PartialEq, Debug)]
pub struct ForestStats {
    pub disj_count: usize,
    pub conj_count: usize,
    pub tree_count: BigUint,
    pub unshared_node_count: BigUint,
}

/// One unpacked reading.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum ParseTree {
    Leaf { category: CategoryId, span: Span, entry: usize, token: usize },
    Branch { category: CategoryId, span: Span, rule: usize, children: Box<(ParseTree, ParseTree)> },
}

impl ParseTree {
    pub fn category(&self) -> CategoryId {
        match self {
            ParseTree::Leaf { category, .. } | ParseTree::Branch { category, .. } => *category,
        }
    }

    pub fn span(&self) -> Span {
        match self {
            ParseTree::Leaf { span, .. } | ParseTree::Branch { span, .. } => *span,
        }
    }

    /// Renders `(NP (NP button) (PP (P on) (NP handle)))`.
    pub fn bracket(&self, grammar: &Grammar, tokens: &[String]) -> String {
        match self {
            ParseTree::Leaf { category, token, .. } => {
                format!("({} {})", grammar.category(*category).name, tokens[*token])
            }
            ParseTree::Branch { category, children, .. } => format!(
                "({} {} {})",
                grammar.category(*category).name,
                children.0.bracket(grammar, tokens),
                children.1.bracket(grammar, tokens)
            ),
        }
    }
}

/// Parses `tokens` under `grammar` into a packed forest.  Every token must
/// have at least one lexical entry; a sentence no start category spans is a
/// rootless forest, not an error.
pub fn cky_parse<S: AsRef<str>>(grammar: &Grammar, tokens: &[S]) -> Result<Forest, ParseError> {
    if tokens.is_empty() {
        return Err(ParseError::EmptyInput);
    }
    let n = tokens.len();
    let mut forest = Forest {
        tokens: tokens.iter().map(|s| s.as_ref().to_string()).collect(),
        ..Forest::default()
    };

    for t in 0..n {
        let word = forest.tokens[t].clone();
        let entries = grammar.lexical_indices(&word);
        if entries.is_empty() {
            return Err(ParseError::UnknownWord { word, position: t + 1 });
        }
        for &entry in entries {
            let conj = forest.push_conj(ConjNode::Leaf { entry, token: t });
            forest.attach(grammar.lex_entry(entry).category, Span::new(t, t + 1), conj);
        }
    }

    for width in 2..=n {
        for start in 0..=(n - width) {
            let end = start + width;
            for (rule_idx, rule) in grammar.rules().iter().enumerate() {
                for split in start + 1..end {
                    let left = forest.index.get(&(rule.left, Span::new(start, split))).copied();
                    let right = forest.index.get(&(rule.right, Span::new(split, end))).copied();
                    if let (Some(left), Some(right)) = (left, right) {
                        let conj = forest.push_conj(ConjNode::Branch { rule: rule_idx, left, right });
                        forest.attach(rule.parent, Span::new(start, end), conj);
                    }
                }
            }
        }
    }

    let whole = Span::new(0, n);
    for &cat in grammar.start_categories() {
        if let Some(&d) = forest.index.get(&(cat, whole)) {
            forest.roots.push(d);
        }
    }

    Ok(forest.retain_conj(|_| true))
}

impl Forest {
    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn disj_nodes(&self) -> &[DisjNode] {
        &self.disj
    }

    pub fn conj_nodes(&self) -> &[ConjNode] {
        &self.conj
    }

    pub fn disj(&self, id: DisjId) -> &DisjNode {
        &self.disj[id.index()]
    }

    pub fn conj(&self, id: ConjId) -> &ConjNode {
        &self.conj[id.index()]
    }

    /// Root disjunctive nodes: start categories spanning the whole input.
    pub fn roots(&self) -> &[DisjId] {
        &self.roots
    }

    pub fn lookup(&self, category: CategoryId, span: Span) -> Option<DisjId> {
        self.index.get(&(category, span)).copied()
    }

    fn push_conj(&mut self, node: ConjNode) -> ConjId {
        self.conj.push(node);
        ConjId(self.conj.len() as u32 - 1)
    }

    fn attach(&mut self, category: CategoryId, span: Span, conj: ConjId) {
        let next = DisjId(self.disj.len() as u32);
        let id = *self.index.entry((category, span)).or_insert(next);
        if id == next {
            self.disj.push(DisjNode { category, span, alternatives: Vec::new() });
        }
        self.disj[id.index()].alternatives.push(conj);
    }

    /// Rebuilds the forest keeping only conjunctive nodes `keep` accepts,
    /// then drops underivable and unreachable nodes.  Node order, and with
    /// it the arena order invariant, is preserved.
    pub(crate) fn retain_conj(&self, keep: impl Fn(ConjId) -> bool) -> Forest {
        // Bottom-up: which nodes can still derive a complete subtree?
        let mut disj_ok = vec![false; self.disj.len()];
        let mut conj_ok = vec![false; self.conj.len()];
        for (d, node) in self.disj.iter().enumerate() {
            for &c in &node.alternatives {
                let viable = keep(c)
                    && match self.conj[c.index()] {
                        ConjNode::Leaf { .. } => true,
                        ConjNode::Branch { left, right, .. } => disj_ok[left.index()] && disj_ok[right.index()],
                    };
                if viable {
                    conj_ok[c.index()] = true;
                    disj_ok[d] = true;
                }
            }
        }

        // Top-down: which derivable nodes does some surviving root use?
        let mut disj_used = vec![false; self.disj.len()];
        let mut stack: Vec<DisjId> = self.roots.iter().copied().filter(|r| disj_ok[r.index()]).collect();
        while let Some(d) = stack.pop() {
            if std::mem::replace(&mut disj_used[d.index()], true) {
                continue;
            }
            for &c in &self.disj[d.index()].alternatives {
                if !conj_ok[c.index()] {
                    continue;
                }
                if let ConjNode::Branch { left, right, .. } = self.conj[c.index()] {
                    stack.push(left);
                    stack.push(right);
                }
            }
        }

        let mut out = Forest { tokens: self.tokens.clone(), ..Forest::default() };
        let mut disj_map: Vec<Option<DisjId>> = vec![None; self.disj.len()];
        let mut conj_map: Vec<Option<ConjId>> = vec![None; self.conj.len()];
        for (d, node) in self.disj.iter().enumerate() {
            if !disj_used[d] {
                continue;
            }
            let new_alts: Vec<ConjId> = node
                .alternatives
                .iter()
                .filter(|c| conj_ok[c.index()])
                .map(|&c| {
                    *conj_map[c.index()].get_or_insert_with(|| {
                        let remapped = match self.conj[c.index()] {
                            ConjNode::Leaf { entry, token } => ConjNode::Leaf { entry, token },
                            ConjNode::Branch { rule, left, right } => ConjNode::Branch {
                                rule,
                                left: disj_map[left.index()].expect("children precede parents"),
                                right: disj_map[right.index()].expect("children precede parents"),
                            },
                        };
                        out.conj.push(remapped);
                        ConjId(out.conj.len() as u32 - 1)
                    })
                })
                .collect();
            let id = DisjId(out.disj.len() as u32);
            disj_map[d] = Some(id);
            out.index.insert((node.category, node.span), id);
            out.disj.push(DisjNode { category: node.category, span: node.span, alternatives: new_alts });
        }
        out.roots = self
            .roots
            .iter()
            .filter_map(|r| disj_map[r.index()])
            .collect();
        out
    }

    /// Number of distinct trees the forest packs, over all roots.
    pub fn count_trees(&self) -> BigUint {
        let counts = self.tree_counts();
        self.roots.iter().map(|r| &counts[r.index()]).sum()
    }

    pub fn count_trees_at(&self, node: DisjId) -> BigUint {
        self.tree_counts()[node.index()].clone()
    }

    fn tree_counts(&self) -> Vec<BigUint> {
        let mut counts: Vec<BigUint> = Vec::with_capacity(self.disj.len());
        for node in &self.disj {
            let mut total = BigUint::from(0u32);
            for &c in &node.alternatives {
                total += match self.conj[c.index()] {
                    ConjNode::Leaf { .. } => BigUint::from(1u32),
                    ConjNode::Branch { left, right, .. } => &counts[left.index()] * &counts[right.index()],
                };
            }
            counts.push(total);
        }
        counts
    }

    /// Unpacks at most `limit` trees, roots in order, alternatives in
    /// (rule, split) order, left child varying slowest.  Deterministic, and
    /// a prefix of what a larger limit returns.
    pub fn enumerate_trees(&self, limit: usize) -> Vec<ParseTree> {
        let mut out = Vec::new();
        for &root in &self.roots {
            if out.len() >= limit {
                break;
            }
            let remaining = limit - out.len();
            out.extend(self.trees_at(root, remaining));
        }
        out
    }

    pub fn trees_at(&self, node: DisjId, limit: usize) -> Vec<ParseTree> {
        let d = &self.disj[node.index()];
        let mut out = Vec::new();
        for &c in &d.alternatives {
            if out.len() >= limit {
                break;
            }
            match self.conj[c.index()] {
                ConjNode::Leaf { entry, token } => {
                    out.push(ParseTree::Leaf { category: d.category, span: d.span, entry, token });
                }
                ConjNode::Branch { rule, left, right } => {
                    let remaining = limit - out.len();
                    let lefts = self.trees_at(left, remaining);
                    let rights = self.trees_at(right, remaining);
                    'product: for l in &lefts {
                        for r in &rights {
                            if out.len() >= limit {
                                break 'product;
                            }
                            out.push(ParseTree::Branch {
                                category: d.category,
                                span: d.span,
                                rule,
                                children: Box::new((l.clone(), r.clone())),
                            });
                        }
                    }
                }
            }
        }
        out
    }

    /// Counts nodes and trees, and what the unpacked trees would cost.
    /// The unshared count is computed by dynamic programming, never by
    /// enumeration, so it is exact even for astronomically many trees.
    pub fn forest_stats(&self) -> ForestStats {
        let zero = BigUint::from(0u32);
        // Per disjunctive node: (tree count, total unfolded nodes over all
        // its trees, counting 2 per constituent for the and-or pair).
        let mut acc: Vec<(BigUint, BigUint)> = Vec::with_capacity(self.disj.len());
        for node in &self.disj {
            let mut count = zero.clone();
            let mut nodes = zero.clone();
            for &c in &node.alternatives {
                match self.conj[c.index()] {
                    ConjNode::Leaf { .. } => {
                        count += 1u32;
                        nodes += 2u32;
                    }
                    ConjNode::Branch { left, right, .. } => {
                        let (lc, ln) = &acc[left.index()];
                        let (rc, rn) = &acc[right.index()];
                        let combos = lc * rc;
                        nodes += 2u32 * &combos + rc * ln + lc * rn;
                        count += combos;
                    }
                }
            }
            acc.push((count, nodes));
        }
        let tree_count: BigUint = self.roots.iter().map(|r| &acc[r.index()].0).sum();
        let unshared: BigUint = self.roots.iter().map(|r| &acc[r.index()].1).sum();
        ForestStats {
            disj_count: self.disj.len(),
            conj_count: self.conj.len(),
            tree_count,
            unshared_node_count: unshared,
        }
    }

    /// Graphviz rendering: boxes for disjunctive nodes (doubled border on
    /// roots), small circles for conjunctive nodes, plain words.
    pub fn to_dot(&self, grammar: &Grammar) -> String {
        let escape = |s: &str| s.replace('\\', "\\\\").replace('"', "\\\"");
        let mut out = String::from("digraph forest {\n  rankdir=TB;\n");
        for (i, node) in self.disj.iter().enumerate() {
            let peripheries = if self.roots.contains(&DisjId(i as u32)) { 2 } else { 1 };
            out.push_str(&format!(
                "  d{i} [shape=box, peripheries={peripheries}, label=\"{}{}\"];\n",
                escape(&grammar.category(node.category).name),
                node.span
            ));
        }
        for (i, _) in self.conj.iter().enumerate() {
            out.push_str(&format!("  c{i} [shape=circle, label=\"\", width=0.12];\n"));
        }
        for (t, word) in self.tokens.iter().enumerate() {
            out.push_str(&format!("  t{t} [shape=plaintext, label=\"{}\"];\n", escape(word)));
        }
        for (i, node) in self.disj.iter().enumerate() {
            for &c in &node.alternatives {
                out.push_str(&format!("  d{i} -> c{};\n", c.index()));
            }
        }
        for (i, node) in self.conj.iter().enumerate() {
            match node {
                ConjNode::Leaf { token, .. } => out.push_str(&format!("  c{i} -> t{token};\n")),
                ConjNode::Branch { left, right, .. } => {
                    out.push_str(&format!("  c{i} -> d{};\n  c{i} -> d{};\n", left.index(), right.index()))
                }
            }
        }
        out.push_str("}\n");
        out
    }

    /// The composition op of a branch, from its rule.
    pub fn branch_op(&self, conj: ConjId, grammar: &Grammar) -> Option<CompositionOp> {
        match self.conj[conj.index()] {
            ConjNode::Branch { rule, .. } => Some(grammar.rule(rule).op),
            ConjNode::Leaf { .. } => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::load_grammar;

    const PANEL_GR: &str = include_str!("../../../fixtures/panel.gr");

    fn panel_grammar() -> Grammar {
        load_grammar(PANEL_GR).unwrap()
    }

    fn words(s: &str) -> Vec<&str> {
        s.split_whitespace().collect()
    }

    #[test]
    fn packs_the_two_attachment_readings() {
        let g = panel_grammar();
        let f = cky_parse(&g, &words("button on handle beside adapter")).unwrap();
        assert_eq!(f.count_trees(), 2u32.into());
        assert_eq!(f.disj_nodes().len(), 11);
        assert_eq!(f.conj_nodes().len(), 12);
        assert_eq!(f.roots().len(), 1);
        let root = f.disj(f.roots()[0]);
        assert_eq!(g.category(root.category).name, "NP");
        assert_eq!(root.span, Span::new(0, 5));
        assert_eq!(root.alternatives.len(), 2);
    }

    #[test]
    fn enumeration_is_deterministic_and_ordered() {
        let g = panel_grammar();
        let f = cky_parse(&g, &words("button on handle beside adapter")).unwrap();
        let trees = f.enumerate_trees(10);
        assert_eq!(trees.len(), 2);
        let brackets: Vec<String> = trees.iter().map(|t| t.bracket(&g, f.tokens())).collect();
        // Split 1 before split 3: high attachment enumerates first.
        assert_eq!(
            brackets,
            [
                "(NP (NP button) (PP (P on) (NP (NP handle) (PP (P beside) (NP adapter)))))",
                "(NP (NP (NP button) (PP (P on) (NP handle))) (PP (P beside) (NP adapter)))",
            ]
        );
        assert_eq!(f.enumerate_trees(1), trees[..1]);
        assert!(f.enumerate_trees(0).is_empty());
        let again = cky_parse(&g, &words("button on handle beside adapter")).unwrap();
        assert_eq!(f, again);
    }

    #[test]
    fn attachment_chains_count_catalan_trees() {
        let g = panel_grammar();
        for (k, expected) in [(1usize, 1u32), (2, 2), (3, 5), (4, 14)] {
            let mut sentence = vec!["button"];
            for _ in 0..k {
                sentence.extend_from_slice(&["on", "handle"]);
            }
            let f = cky_parse(&g, &sentence).unwrap();
            assert_eq!(f.count_trees(), expected.into(), "k = {k}");
            assert_eq!(f.enumerate_trees(usize::MAX).len(), expected as usize);
        }
    }

    #[test]
    fn unparseable_sentence_yields_rootless_forest() {
        let g = load_grammar("cat S\ncat NP referential\nstart S\nlex button NP pred button\n").unwrap();
        let f = cky_parse(&g, &words("button button")).unwrap();
        assert!(f.roots().is_empty());
        assert_eq!(f.count_trees(), 0u32.into());
        assert!(f.enumerate_trees(10).is_empty());
        // Pruning drops everything no root reaches.
        assert_eq!(f.disj_nodes().len(), 0);
        assert_eq!(f.conj_nodes().len(), 0);
    }

    #[test]
    fn reports_unknown_words_and_empty_input() {
        let g = panel_grammar();
        assert_eq!(
            cky_parse(&g, &words("button on xyzzy")).unwrap_err(),
            ParseError::UnknownWord { word: "xyzzy".into(), position: 3 }
        );
        assert_eq!(cky_parse(&g, &Vec::<&str>::new()).unwrap_err(), ParseError::EmptyInput);
    }

    #[test]
    fn stats_count_unshared_nodes_by_dp() {
        let g = panel_grammar();
        let f = cky_parse(&g, &words("button")).unwrap();
        let s = f.forest_stats();
        assert_eq!(s.tree_count, 1u32.into());
        // One tree, nothing shared: unfolding costs exactly the forest.
        assert_eq!(s.unshared_node_count, (s.disj_count + s.conj_count).into());

        let f = cky_parse(&g, &words("button on handle beside adapter")).unwrap();
        let s = f.forest_stats();
        assert_eq!((s.disj_count, s.conj_count), (11, 12));
        // Two trees of 9 constituents each, 2 nodes per constituent.
        assert_eq!(s.unshared_node_count, 36u32.into());
    }

    #[test]
    fn lookup_finds_packed_constituents() {
        let g = panel_grammar();
        let f = cky_parse(&g, &words("button on handle beside adapter")).unwrap();
        let np = g.category_id("NP").unwrap();
        let pp = g.category_id("PP").unwrap();
        assert!(f.lookup(np, Span::new(2, 5)).is_some());
        assert!(f.lookup(pp, Span::new(1, 3)).is_some());
        assert!(f.lookup(pp, Span::new(0, 5)).is_none());
    }

    #[test]
    fn dot_export_names_every_node() {
        let g = panel_grammar();
        let f = cky_parse(&g, &words("button on handle")).unwrap();
        let dot = f.to_dot(&g);
        assert!(dot.starts_with("digraph forest {"));
        assert!(dot.contains("label=\"NP[0,3)\""));
        assert!(dot.contains("peripheries=2"));
        assert!(dot.contains("shape=circle"));
        assert!(dot.contains("label=\"button\""));
        assert!(dot.contains("d0 -> c0;"));
    }

    #[test]
    fn span_displays_half_open() {
        assert_eq!(Span::new(0, 5).to_string(), "[0,5)");
        assert_eq!(Span::new(2, 3).width(), 1);
    }
}
