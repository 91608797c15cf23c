//! Shared input builders for the benchmarks.

use groundparse::{
    load_environment, load_grammar, EnvironmentDb, Grammar, ReferentId, ReferentSet, ReferentTuple,
};

pub const PANEL_GR: &str = include_str!("../../../fixtures/panel.gr");
pub const PANEL_ENV: &str = include_str!("../../../fixtures/panel.env");

pub fn panel_grammar() -> Grammar {
    load_grammar(PANEL_GR).expect("bundled grammar loads")
}

pub fn panel_env() -> EnvironmentDb {
    load_environment(PANEL_ENV).expect("bundled environment loads")
}

/// `button` followed by `k` attachment modifiers; the classic ambiguity
/// chain with Catalan-many readings.
pub fn chain_tokens(k: usize) -> Vec<String> {
    let mut tokens = vec!["button".to_string()];
    for _ in 0..k {
        tokens.push("on".to_string());
        tokens.push("handle".to_string());
    }
    tokens
}

/// `n` pair tuples `(2i, 2i+1)`: firsts are the even numbers, so a modifier
/// set over every fourth id matches half of them.
pub fn relation_pairs(n: u32) -> ReferentSet {
    ReferentSet::from_tuples(
        (0..n)
            .map(|i| ReferentTuple::pair(ReferentId::from_raw(2 * i), ReferentId::from_raw(2 * i + 1)))
            .collect(),
    )
    .expect("uniform arity")
}

/// `n` pair tuples whose last elements cycle through 64 high ids, matching
/// [`argument_half`] on 32 of them.
pub fn relation_clustered(n: u32) -> ReferentSet {
    ReferentSet::from_tuples(
        (0..n)
            .map(|i| {
                ReferentTuple::pair(ReferentId::from_raw(i), ReferentId::from_raw(1_000_000 + i % 64))
            })
            .collect(),
    )
    .expect("uniform arity")
}

pub fn argument_half() -> ReferentSet {
    singletons((0..32).map(|i| 1_000_000 + i))
}

/// Singleton set over every fourth id below `4n`.
pub fn modifier_quarter(n: u32) -> ReferentSet {
    singletons((0..n).map(|i| 4 * i))
}

pub fn singletons(ids: impl Iterator<Item = u32>) -> ReferentSet {
    ReferentSet::from_tuples(ids.map(|i| ReferentTuple::single(ReferentId::from_raw(i))).collect())
        .expect("uniform arity")
}
