//! Binary grammar with per-rule composition operators and a grounded
//! lexicon.
//!
//! Grammar files are line oriented:
//!
//! ```text
//! cat   <Name> [referential]
//! start <Name>
//! rule  <Parent> -> <Left> <Right> : modifier|argument|nounnoun|det
//! lex   <word> <Category> pred <keyword>
//! lex   <word> <Category> rel <name> <arity>
//! lex   <word> <Category> const <id>
//! lex   <word> <Category> quant universal|existential
//! ```
//!
//! `#` starts a comment.  Categories are resolved in a first pass, so `cat`
//! lines may appear anywhere in the file.  The `referential` flag marks
//! categories that denote things in the environment; disambiguation filters
//! lean on it, so grammars must set it deliberately.

use std::collections::HashMap;

use thiserror::Error;

use crate::env::EnvironmentDb;
use crate::referents::MAX_ARITY;

/// Index of a category in declaration order.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct CategoryId(u16);

impl CategoryId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, PartialEq, Debug)]
pub struct Category {
    pub name: String,
    pub referential: bool,
}

/// Quantifier force carried by a determiner lexical entry.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum QuantForce {
    Universal,
    Existential,
}

/// What a lexical entry denotes.
#[derive(Clone, PartialEq, Debug)]
pub enum SemPayload {
    /// All entities declared with this type keyword.
    TypePredicate(String),
    /// A named relation of the environment.
    Relation { name: String, arity: usize },
    /// One specific referent by id.
    Constant(String),
    /// No denotation of its own; flags the phrase it attaches to.
    Quantifier(QuantForce),
}

#[derive(Clone, PartialEq, Debug)]
pub struct LexEntry {
    pub word: String,
    pub category: CategoryId,
    pub payload: SemPayload,
}

/// How a binary rule combines its children's referent sets.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum CompositionOp {
    /// Parent keeps left tuples whose first element the right child mentions.
    ModifierAttach,
    /// Left relation consumes the right child as its last argument.
    ArgumentAttach,
    /// Right noun restricted to entities near the left noun's entities.
    NounNounProx,
    /// Left determiner flags the right noun phrase.
    DetAttach,
}

impl CompositionOp {
    fn keyword(self) -> &'static str {
        match self {
            CompositionOp::ModifierAttach => "modifier",
            CompositionOp::ArgumentAttach => "argument",
            CompositionOp::NounNounProx => "nounnoun",
            CompositionOp::DetAttach => "det",
        }
    }
}

#[derive(Clone, PartialEq, Debug)]
pub struct Rule {
    pub parent: CategoryId,
    pub left: CategoryId,
    pub right: CategoryId,
    pub op: CompositionOp,
}

/// Loaded grammar: categories, binary rules, start symbols, and lexicon.
#[derive(Clone, PartialEq, Debug, Default)]
pub struct Grammar {
    categories: Vec<Category>,
    by_name: HashMap<String, CategoryId>,
    rules: Vec<Rule>,
    start: Vec<CategoryId>,
    lexicon: Vec<LexEntry>,
    by_word: HashMap<String, Vec<usize>>,
}

/// Errors from loading a grammar file.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum GrammarError {
    #[error("line {line}: duplicate category `{name}`")]
    DuplicateCategory { name: String, line: usize },
    #[error("line {line}: unknown category `{name}`")]
    UnknownCategory { name: String, line: usize },
    #[error("line {line}: unknown composition op `{name}`")]
    UnknownOp { name: String, line: usize },
    #[error("grammar declares no start category")]
    NoStart,
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
}

impl Grammar {
    pub fn categories(&self) -> &[Category] {
        &self.categories
    }

    pub fn category(&self, id: CategoryId) -> &Category {
        &self.categories[id.index()]
    }

    pub fn category_id(&self, name: &str) -> Option<CategoryId> {
        self.by_name.get(name).copied()
    }

    pub fn is_referential(&self, id: CategoryId) -> bool {
        self.category(id).referential
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn rule(&self, index: usize) -> &Rule {
        &self.rules[index]
    }

    /// Start categories in declaration order.
    pub fn start_categories(&self) -> &[CategoryId] {
        &self.start
    }

    pub fn lexicon(&self) -> &[LexEntry] {
        &self.lexicon
    }

    pub fn lex_entry(&self, index: usize) -> &LexEntry {
        &self.lexicon[index]
    }

    /// All lexical entries for a word, in declaration order.
    pub fn lexical_lookup(&self, word: &str) -> Vec<&LexEntry> {
        self.lexical_indices(word).iter().map(|&i| &self.lexicon[i]).collect()
    }

    pub fn lexical_indices(&self, word: &str) -> &[usize] {
        self.by_word.get(word).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Cross-checks the lexicon against an environment.  Returns warnings in
    /// lexicon order; an empty list means every entry can denote something.
    pub fn validate_against_env(&self, db: &EnvironmentDb) -> Vec<String> {
        let mut warnings = Vec::new();
        for entry in &self.lexicon {
            let word = &entry.word;
            match &entry.payload {
                SemPayload::TypePredicate(keyword) => {
                    if db.entities_of_type(keyword).is_empty() {
                        warnings.push(format!("lex `{word}`: no entity of type `{keyword}`"));
                    }
                }
                SemPayload::Relation { name, arity } => match db.relation(name) {
                    None => warnings.push(format!("lex `{word}`: relation `{name}` not present in environment")),
                    Some(table) if table.arity != *arity => warnings.push(format!(
                        "lex `{word}`: relation `{name}` has arity {} in environment, {arity} in grammar",
                        table.arity
                    )),
                    Some(_) => {}
                },
                SemPayload::Constant(id) => {
                    if db.lookup(id).is_none() {
                        warnings.push(format!("lex `{word}`: unknown referent id `{id}`"));
                    }
                }
                SemPayload::Quantifier(_) => {}
            }
        }
        warnings
    }

    /// Renders the grammar back into the input format.  Loading the output
    /// yields an equal grammar.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for cat in &self.categories {
            if cat.referential {
                out.push_str(&format!("cat {} referential\n", cat.name));
            } else {
                out.push_str(&format!("cat {}\n", cat.name));
            }
        }
        for &id in &self.start {
            out.push_str(&format!("start {}\n", self.category(id).name));
        }
        for rule in &self.rules {
            out.push_str(&format!(
                "rule {} -> {} {} : {}\n",
                self.category(rule.parent).name,
                self.category(rule.left).name,
                self.category(rule.right).name,
                rule.op.keyword()
            ));
        }
        for entry in &self.lexicon {
            let cat = &self.category(entry.category).name;
            match &entry.payload {
                SemPayload::TypePredicate(k) => out.push_str(&format!("lex {} {cat} pred {k}\n", entry.word)),
                SemPayload::Relation { name, arity } => {
                    out.push_str(&format!("lex {} {cat} rel {name} {arity}\n", entry.word))
                }
                SemPayload::Constant(id) => out.push_str(&format!("lex {} {cat} const {id}\n", entry.word)),
                SemPayload::Quantifier(QuantForce::Universal) => {
                    out.push_str(&format!("lex {} {cat} quant universal\n", entry.word))
                }
                SemPayload::Quantifier(QuantForce::Existential) => {
                    out.push_str(&format!("lex {} {cat} quant existential\n", entry.word))
                }
            }
        }
        out
    }
}

/// Parses a grammar file.  Errors carry 1-based line numbers.
pub fn load_grammar(text: &str) -> Result<Grammar, GrammarError> {
    let malformed = |line: usize, msg: String| GrammarError::Malformed { line, msg };
    let mut grammar = Grammar::default();

    // First pass: categories only, so later lines can refer forward.
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("");
        let fields: Vec<&str> = content.split_whitespace().collect();
        if fields.first() != Some(&"cat") {
            continue;
        }
        let referential = match fields.len() {
            2 => false,
            3 if fields[2] == "referential" => true,
            _ => return Err(malformed(line, "expected `cat <Name> [referential]`".into())),
        };
        let name = fields[1];
        if grammar.by_name.contains_key(name) {
            return Err(GrammarError::DuplicateCategory { name: name.to_string(), line });
        }
        let id = CategoryId(grammar.categories.len() as u16);
        grammar.by_name.insert(name.to_string(), id);
        grammar.categories.push(Category { name: name.to_string(), referential });
    }

    let resolve = |grammar: &Grammar, name: &str, line: usize| -> Result<CategoryId, GrammarError> {
        grammar.category_id(name).ok_or_else(|| GrammarError::UnknownCategory { name: name.to_string(), line })
    };

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("");
        let fields: Vec<&str> = content.split_whitespace().collect();
        match fields.first() {
            None | Some(&"cat") => continue,
            Some(&"start") => {
                if fields.len() != 2 {
                    return Err(malformed(line, "expected `start <Name>`".into()));
                }
                let id = resolve(&grammar, fields[1], line)?;
                if !grammar.start.contains(&id) {
                    grammar.start.push(id);
                }
            }
            Some(&"rule") => {
                if fields.len() != 7 || fields[2] != "->" || fields[5] != ":" {
                    return Err(malformed(line, "expected `rule <Parent> -> <Left> <Right> : <op>`".into()));
                }
                let parent = resolve(&grammar, fields[1], line)?;
                let left = resolve(&grammar, fields[3], line)?;
                let right = resolve(&grammar, fields[4], line)?;
                let op = match fields[6] {
                    "modifier" => CompositionOp::ModifierAttach,
                    "argument" => CompositionOp::ArgumentAttach,
                    "nounnoun" => CompositionOp::NounNounProx,
                    "det" => CompositionOp::DetAttach,
                    other => return Err(GrammarError::UnknownOp { name: other.to_string(), line }),
                };
                grammar.rules.push(Rule { parent, left, right, op });
            }
            Some(&"lex") => {
                if fields.len() < 5 {
                    return Err(malformed(line, "expected `lex <word> <Category> <payload...>`".into()));
                }
                let word = fields[1];
                let category = resolve(&grammar, fields[2], line)?;
                let payload = match (fields[3], &fields[4..]) {
                    ("pred", [keyword]) => SemPayload::TypePredicate(keyword.to_string()),
                    ("rel", [name, arity]) => {
                        let arity: usize = arity
                            .parse()
                            .map_err(|_| malformed(line, format!("bad relation arity `{arity}`")))?;
                        if !(2..=MAX_ARITY).contains(&arity) {
                            return Err(malformed(line, format!("relation arity {arity} outside 2..={MAX_ARITY}")));
                        }
                        SemPayload::Relation { name: name.to_string(), arity }
                    }
                    ("const", [id]) => SemPayload::Constant(id.to_string()),
                    ("quant", ["universal"]) => SemPayload::Quantifier(QuantForce::Universal),
                    ("quant", ["existential"]) => SemPayload::Quantifier(QuantForce::Existential),
                    ("quant", [other]) => {
                        return Err(malformed(line, format!("unknown quantifier force `{other}`")))
                    }
                    (kind, _) => return Err(malformed(line, format!("bad lexical payload `{kind}`"))),
                };
                let index = grammar.lexicon.len();
                grammar.lexicon.push(LexEntry { word: word.to_string(), category, payload });
                grammar.by_word.entry(word.to_string()).or_default().push(index);
            }
            Some(other) => return Err(malformed(line, format!("unknown directive `{other}`"))),
        }
    }

    if grammar.start.is_empty() {
        return Err(GrammarError::NoStart);
    }
    Ok(grammar)
}

#[cfg(test)]
mod tests {
    use super::*;

    const PANEL: &str = include_str!("../../../fixtures/panel.gr");
    const COOLANT: &str = include_str!("../../../fixtures/coolant.gr");

    #[test]
    fn loads_attachment_grammar() {
        let g = load_grammar(PANEL).unwrap();
        assert_eq!(g.rules().len(), 2);
        assert_eq!(g.lexicon().len(), 5);
        let np = g.category_id("NP").unwrap();
        let p = g.category_id("P").unwrap();
        assert!(g.is_referential(np));
        assert!(!g.is_referential(p));
        assert_eq!(g.start_categories(), [np]);
        assert_eq!(g.rules()[0].op, CompositionOp::ModifierAttach);
        assert_eq!(g.rules()[1].op, CompositionOp::ArgumentAttach);
    }

    #[test]
    fn lexical_lookup_preserves_declaration_order() {
        let g = load_grammar(PANEL).unwrap();
        let entries = g.lexical_lookup("on");
        assert_eq!(entries.len(), 1);
        assert_eq!(entries[0].payload, SemPayload::Relation { name: "on".into(), arity: 2 });
        assert!(g.lexical_lookup("xyzzy").is_empty());

        let ambiguous = "cat N referential\nstart N\nlex saw N pred saw\nlex saw N rel saw 2\n";
        let g = load_grammar(ambiguous).unwrap();
        assert_eq!(g.lexical_lookup("saw").len(), 2);
        assert!(matches!(g.lexical_lookup("saw")[0].payload, SemPayload::TypePredicate(_)));
    }

    #[test]
    fn categories_resolve_regardless_of_declaration_position() {
        let g = load_grammar("start NP\nrule NP -> NP PP : modifier\ncat NP referential\ncat PP\n").unwrap();
        assert_eq!(g.rules().len(), 1);
    }

    #[test]
    fn rejects_bad_inputs() {
        let e = load_grammar("cat NP\ncat NP\nstart NP\n").unwrap_err();
        assert_eq!(e, GrammarError::DuplicateCategory { name: "NP".into(), line: 2 });

        let e = load_grammar("cat NP\nstart NP\nrule NP -> NP PP : modifier\n").unwrap_err();
        assert_eq!(e, GrammarError::UnknownCategory { name: "PP".into(), line: 3 });

        let e = load_grammar("cat NP\nstart NP\nrule NP -> NP NP : glue\n").unwrap_err();
        assert_eq!(e, GrammarError::UnknownOp { name: "glue".into(), line: 3 });

        assert_eq!(load_grammar("cat NP\n").unwrap_err(), GrammarError::NoStart);
        assert_eq!(load_grammar("").unwrap_err(), GrammarError::NoStart);

        assert!(matches!(load_grammar("cat NP\nstart NP\nlex b NP pred\n").unwrap_err(),
            GrammarError::Malformed { line: 3, .. }));
        assert!(matches!(load_grammar("cat NP\nstart NP\nlex on NP rel on 1\n").unwrap_err(),
            GrammarError::Malformed { line: 3, .. }));
        assert!(matches!(load_grammar("cat NP\nstart NP\nlex on NP rel on 9\n").unwrap_err(),
            GrammarError::Malformed { line: 3, .. }));
        assert!(matches!(load_grammar("cat NP\nstart NP\nlex e NP quant most\n").unwrap_err(),
            GrammarError::Malformed { line: 3, .. }));
        assert!(matches!(load_grammar("rule NP\n").unwrap_err(), GrammarError::Malformed { line: 1, .. }));
    }

    #[test]
    fn serialization_round_trips() {
        for text in [PANEL, COOLANT] {
            let g = load_grammar(text).unwrap();
            let reloaded = load_grammar(&g.to_text()).unwrap();
            assert_eq!(g, reloaded);
        }
        let quant = "cat NP referential\ncat DET\nstart NP\nrule NP -> DET NP : det\n\
                     lex every DET quant universal\nlex a DET quant existential\nlex b NP pred button\n";
        let g = load_grammar(quant).unwrap();
        assert_eq!(g, load_grammar(&g.to_text()).unwrap());
    }

    #[test]
    fn validates_lexicon_against_environment() {
        let db = crate::env::load_environment(include_str!("../../../fixtures/panel.env")).unwrap();
        let g = load_grammar(PANEL).unwrap();
        assert!(g.validate_against_env(&db).is_empty());

        let speculative = "cat NP referential\ncat P\nstart NP\n\
                           lex widget NP pred widget\nlex under P rel under 2\nlex on P rel on 3\n\
                           lex noon NP const tnoon\n";
        let g = load_grammar(speculative).unwrap();
        let warnings = g.validate_against_env(&db);
        assert_eq!(warnings.len(), 4);
        assert!(warnings[0].contains("no entity of type `widget`"));
        assert!(warnings[1].contains("relation `under` not present"));
        assert!(warnings[2].contains("arity 2 in environment, 3 in grammar"));
        assert!(warnings[3].contains("unknown referent id `tnoon`"));
    }
}
