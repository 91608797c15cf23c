//! Shared plumbing for the integration suites: a seeded random instance
//! generator and an exponential all-parses reference parser that shares no
//! code with the forest builder.
//!
//! Each test binary compiles this module separately and uses a different
//! subset of it.
#![allow(dead_code)]

use std::collections::HashMap;
use std::fmt::Write as _;

use groundparse::{cky_parse, load_environment, load_grammar, CategoryId, EnvironmentDb, Forest, Grammar};
use rand::prelude::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

const NOUNS: [&str; 5] = ["gear", "pipe", "valve", "bolt", "drum"];
const PREPS: [&str; 3] = ["near", "with", "under"];
const VERBS: [&str; 2] = ["move", "lift"];

/// Randomized quantifier-free grammar + environment + parseable sentence.
/// Tree counts stay at or below [`TREE_CAP`] so exhaustive reference runs
/// stay cheap.
pub struct Instance {
    pub grammar: Grammar,
    pub db: EnvironmentDb,
    pub tokens: Vec<String>,
    pub forest: Forest,
}

pub const TREE_CAP: usize = 500;

/// Draws instances until one parses with an acceptable tree count.  The
/// sentence is sampled from the grammar itself, so a parse always exists;
/// resampling only bounds ambiguity.
pub fn random_instance(rng: &mut ChaCha8Rng) -> Instance {
    for _ in 0..200 {
        let (grammar_text, env_text) = random_files(rng);
        let grammar = load_grammar(&grammar_text).expect("generated grammar loads");
        let db = load_environment(&env_text).expect("generated environment loads");
        let Some(tokens) = sample_sentence(&grammar, rng) else { continue };
        let forest = cky_parse(&grammar, &tokens).expect("sampled words are in the lexicon");
        assert!(!forest.roots().is_empty(), "sampled derivation must parse: {tokens:?}");
        if forest.count_trees() > TREE_CAP.into() {
            continue;
        }
        return Instance { grammar, db, tokens, forest };
    }
    panic!("no acceptable instance in 200 draws");
}

fn random_files(rng: &mut ChaCha8Rng) -> (String, String) {
    let noun_count = rng.random_range(2..=4);
    let nouns: Vec<&str> = NOUNS.choose_multiple(rng, noun_count).copied().collect();
    let prep_count = rng.random_range(1..=2);
    let preps: Vec<&str> = PREPS.choose_multiple(rng, prep_count).copied().collect();
    let verb_count = rng.random_range(0..=2);
    let verbs: Vec<&str> = VERBS.choose_multiple(rng, verb_count).copied().collect();
    let noun_noun = rng.random_bool(0.5);

    let mut env = String::new();
    let entity_count = rng.random_range(4..=12);
    let mut entity_names = Vec::new();
    for i in 1..=entity_count {
        let name = format!("e{i}");
        // Types come from the full pool, so some nouns may denote nothing.
        let ty = NOUNS.choose(rng).unwrap();
        if rng.random_bool(0.7) {
            let coord = |rng: &mut ChaCha8Rng| rng.random_range(0..=8) as f64 * 0.5;
            let (x, y, z) = (coord(rng), coord(rng), coord(rng));
            writeln!(env, "entity {name} {ty} {x} {y} {z}").unwrap();
        } else {
            writeln!(env, "entity {name} {ty}").unwrap();
        }
        entity_names.push(name);
    }
    let mut all_names = entity_names.clone();
    for i in 1..=rng.random_range(0..=3) {
        let a = rng.random_range(0..=50);
        let b = a + rng.random_range(0..=50);
        writeln!(env, "situation s{i} {a} {b}").unwrap();
        all_names.push(format!("s{i}"));
    }
    if rng.random_bool(0.5) {
        writeln!(env, "timepoint t1 {}", rng.random_range(0..=100_000)).unwrap();
        all_names.push("t1".to_string());
    }
    for rel in preps.iter().chain(verbs.iter()) {
        // A missing table leaves the relation's leaves empty.
        if rng.random_bool(0.15) {
            continue;
        }
        for _ in 0..rng.random_range(1..=8) {
            let a = all_names.choose(rng).unwrap();
            let b = all_names.choose(rng).unwrap();
            writeln!(env, "rel {rel} {a} {b}").unwrap();
        }
    }

    let mut gr = String::new();
    gr.push_str("cat NP referential\ncat PP referential\ncat P\n");
    if !verbs.is_empty() {
        gr.push_str("cat VP referential\ncat V\n");
    }
    gr.push_str("start NP\n");
    if !verbs.is_empty() {
        gr.push_str("start VP\n");
    }
    gr.push_str("rule NP -> NP PP : modifier\nrule PP -> P NP : argument\n");
    if !verbs.is_empty() {
        gr.push_str("rule VP -> V NP : argument\nrule VP -> VP PP : modifier\n");
    }
    if noun_noun {
        gr.push_str("rule NP -> NP NP : nounnoun\n");
    }
    for noun in &nouns {
        writeln!(gr, "lex {noun} NP pred {noun}").unwrap();
    }
    if rng.random_bool(0.3) {
        // One lexically ambiguous noun: two entries, distinct type keywords.
        let word = nouns.choose(rng).unwrap();
        let other = NOUNS.iter().find(|n| n != &word).unwrap();
        writeln!(gr, "lex {word} NP pred {other}").unwrap();
    }
    if rng.random_bool(0.3) {
        let target = entity_names.choose(rng).unwrap();
        writeln!(gr, "lex unit NP const {target}").unwrap();
    }
    for prep in &preps {
        writeln!(gr, "lex {prep} P rel {prep} 2").unwrap();
    }
    for verb in &verbs {
        writeln!(gr, "lex {verb} V rel {verb} 2").unwrap();
    }
    (gr, env)
}

/// Samples token strings by expanding a random derivation from a random
/// start category.  The draw only counts when it lands within one token of
/// its budget, which keeps sentence lengths spread over the whole 1..=8
/// range instead of collapsing onto short derivations.
fn sample_sentence(grammar: &Grammar, rng: &mut ChaCha8Rng) -> Option<Vec<String>> {
    let start = *grammar.start_categories().choose(rng)?;
    // Max of two draws skews long; a draw landing far under its budget is
    // rejected so realized lengths track the skew.
    let budget = rng.random_range(1..=8).max(rng.random_range(1..=8));
    let mut tokens = Vec::new();
    let complete = expand(grammar, rng, start, budget, &mut tokens);
    (complete && tokens.len() + 2 >= budget).then_some(tokens)
}

fn expand(
    grammar: &Grammar,
    rng: &mut ChaCha8Rng,
    cat: CategoryId,
    budget: usize,
    out: &mut Vec<String>,
) -> bool {
    let words: Vec<&str> = grammar
        .lexicon()
        .iter()
        .filter(|e| e.category == cat)
        .map(|e| e.word.as_str())
        .collect();
    let rules: Vec<usize> = (0..grammar.rules().len())
        .filter(|&r| grammar.rule(r).parent == cat)
        .collect();
    let branch = budget >= 2 && !rules.is_empty() && (words.is_empty() || rng.random_bool(0.85));
    if branch {
        let rule = grammar.rule(*rules.choose(rng).unwrap());
        // A child that can only ever be a leaf gets exactly one token, so
        // the recursive side keeps the slack.
        let terminal = |c: CategoryId| grammar.rules().iter().all(|r| r.parent != c);
        let left_budget = if terminal(rule.left) {
            1
        } else if terminal(rule.right) {
            budget - 1
        } else {
            rng.random_range(1..budget)
        };
        expand(grammar, rng, rule.left, left_budget, out)
            && expand(grammar, rng, rule.right, budget - left_budget, out)
    } else if let Some(word) = words.choose(rng) {
        out.push(word.to_string());
        true
    } else {
        false
    }
}

/// Exhaustive reference parser: every bracketed tree of every start category
/// over the full span, by plain recursive descent with span memoization.
/// Exponential output size; callers keep sentences short.
pub fn naive_parses(grammar: &Grammar, tokens: &[String]) -> Vec<String> {
    let mut memo: HashMap<(CategoryId, usize, usize), Vec<String>> = HashMap::new();
    let mut out = Vec::new();
    for &start in grammar.start_categories() {
        out.extend(derive(grammar, tokens, start, 0, tokens.len(), &mut memo));
    }
    out
}

fn derive(
    grammar: &Grammar,
    tokens: &[String],
    cat: CategoryId,
    i: usize,
    j: usize,
    memo: &mut HashMap<(CategoryId, usize, usize), Vec<String>>,
) -> Vec<String> {
    if let Some(hit) = memo.get(&(cat, i, j)) {
        return hit.clone();
    }
    let name = &grammar.category(cat).name;
    let mut found = Vec::new();
    if j == i + 1 {
        for &entry in grammar.lexical_indices(&tokens[i]) {
            if grammar.lex_entry(entry).category == cat {
                found.push(format!("({name} {})", tokens[i]));
            }
        }
    }
    for r in 0..grammar.rules().len() {
        let rule = grammar.rule(r);
        if rule.parent != cat {
            continue;
        }
        for k in i + 1..j {
            let lefts = derive(grammar, tokens, rule.left, i, k, memo);
            if lefts.is_empty() {
                continue;
            }
            let rights = derive(grammar, tokens, rule.right, k, j, memo);
            for l in &lefts {
                for rt in &rights {
                    found.push(format!("({name} {l} {rt})"));
                }
            }
        }
    }
    memo.insert((cat, i, j), found.clone());
    found
}
