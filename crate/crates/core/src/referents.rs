//! Referent tuples, referent sets, and the composition operations that
//! combine them during annotation.
//!
//! Every set keeps its tuples sorted in canonical order with no duplicates,
//! so each composition is a linear merge over its operands.  Argument
//! composition matches on the *last* tuple element; for that, a set lazily
//! builds one alternate index ordered by last element, kept for the set's
//! lifetime.  The `*_counted` variants report how many element comparisons a
//! call performed (index construction is charged to the first call that
//! forces it), which is what the complexity checks and benchmarks measure.
//!
//! A set with no tuples has no arity; any non-empty set has exactly one.

use std::cell::Cell;
use std::fmt;
use std::sync::OnceLock;

use arrayvec::ArrayVec;
use thiserror::Error;

use crate::env::{EnvironmentDb, ReferentId};

/// Largest supported tuple width, which also caps relation arity.
pub const MAX_ARITY: usize = 4;

/// An ordered tuple of 1 to [`MAX_ARITY`] referents, stored inline.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct ReferentTuple(ArrayVec<ReferentId, MAX_ARITY>);

impl ReferentTuple {
    pub fn single(id: ReferentId) -> ReferentTuple {
        let mut v = ArrayVec::new();
        v.push(id);
        ReferentTuple(v)
    }

    pub fn pair(a: ReferentId, b: ReferentId) -> ReferentTuple {
        let mut v = ArrayVec::new();
        v.push(a);
        v.push(b);
        ReferentTuple(v)
    }

    /// Builds a tuple from a slice; fails on arity 0 or above [`MAX_ARITY`].
    pub fn try_from_slice(ids: &[ReferentId]) -> Result<ReferentTuple, AlgebraError> {
        if ids.is_empty() || ids.len() > MAX_ARITY {
            return Err(AlgebraError::BadTupleArity { found: ids.len() });
        }
        Ok(ReferentTuple(ids.iter().copied().collect()))
    }

    pub fn arity(&self) -> usize {
        self.0.len()
    }

    pub fn first(&self) -> ReferentId {
        self.0[0]
    }

    pub fn last(&self) -> ReferentId {
        self.0[self.0.len() - 1]
    }

    /// The tuple with its last element removed.  Never called on 1-tuples;
    /// composition checks arity beforehand.
    fn prefix(&self) -> ReferentTuple {
        ReferentTuple(self.0[..self.0.len() - 1].iter().copied().collect())
    }

    pub fn get(&self, i: usize) -> Option<ReferentId> {
        self.0.get(i).copied()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, ReferentId> {
        self.0.iter()
    }
}

impl FromIterator<ReferentId> for ReferentTuple {
    /// Panics if the iterator yields more than [`MAX_ARITY`] items; loaders
    /// validate arity before building tuples.
    fn from_iter<I: IntoIterator<Item = ReferentId>>(iter: I) -> ReferentTuple {
        ReferentTuple(iter.into_iter().collect())
    }
}

/// A sorted, deduplicated set of same-arity tuples.
#[derive(Clone, Debug, Default)]
pub struct ReferentSet {
    arity: Option<usize>,
    tuples: Vec<ReferentTuple>,
    // Tuple indices reordered by (last element, tuple); built on first use.
    by_last: OnceLock<Vec<u32>>,
}

impl PartialEq for ReferentSet {
    fn eq(&self, other: &Self) -> bool {
        self.arity == other.arity && self.tuples == other.tuples
    }
}

impl Eq for ReferentSet {}

/// Errors from set construction and composition.
#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum AlgebraError {
    #[error("mixed tuple arities in one set: {expected} and {found}")]
    MixedArity { expected: usize, found: usize },
    #[error("tuple arity {found} outside 1..={MAX_ARITY}")]
    BadTupleArity { found: usize },
    #[error("relation operand needs tuples of arity 2 or more, found {found}")]
    RelationArity { found: usize },
    #[error("argument operand needs 1-tuples, found arity {found}")]
    ArgumentArity { found: usize },
    #[error("modifier operand is unsaturated: found arity {found}, needs 1-tuples")]
    UnsaturatedModifier { found: usize },
    #[error("proximity operands need 1-tuples, found arity {found}")]
    ProximityArity { found: usize },
    #[error("universal quantifier ranges over an empty set")]
    VacuousUniversal,
    #[error("union of zero sets")]
    EmptyUnion,
    #[error("universally quantified constituent outside argument position")]
    QuantifierMisplaced,
}

impl ReferentSet {
    pub fn empty() -> ReferentSet {
        ReferentSet::default()
    }

    pub fn singleton(tuple: ReferentTuple) -> ReferentSet {
        ReferentSet::from_sorted_unique(vec![tuple])
    }

    /// Builds a set from arbitrary tuples: sorts, deduplicates, and checks
    /// that all tuples share one arity.
    pub fn from_tuples(mut tuples: Vec<ReferentTuple>) -> Result<ReferentSet, AlgebraError> {
        for t in &tuples {
            if t.arity() == 0 {
                return Err(AlgebraError::BadTupleArity { found: 0 });
            }
        }
        if let Some(first) = tuples.first() {
            let arity = first.arity();
            if let Some(bad) = tuples.iter().find(|t| t.arity() != arity) {
                return Err(AlgebraError::MixedArity { expected: arity, found: bad.arity() });
            }
        }
        tuples.sort_unstable();
        tuples.dedup();
        Ok(ReferentSet::from_sorted_unique(tuples))
    }

    /// Wraps tuples already in canonical order with no duplicates.
    pub(crate) fn from_sorted_unique(tuples: Vec<ReferentTuple>) -> ReferentSet {
        debug_assert!(tuples.windows(2).all(|w| w[0] < w[1]));
        let arity = tuples.first().map(ReferentTuple::arity);
        debug_assert!(tuples.iter().all(|t| Some(t.arity()) == arity));
        ReferentSet { arity, tuples, by_last: OnceLock::new() }
    }

    /// Arity of the tuples; `None` iff the set is empty.
    pub fn arity(&self) -> Option<usize> {
        self.arity
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, ReferentTuple> {
        self.tuples.iter()
    }

    pub fn tuples(&self) -> &[ReferentTuple] {
        &self.tuples
    }

    pub fn contains(&self, tuple: &ReferentTuple) -> bool {
        self.tuples.binary_search(tuple).is_ok()
    }

    /// Forces the last-element index now, so a later composition is not
    /// charged for building it.
    pub fn prepare_argument_index(&self) {
        let mut ignored = 0;
        self.last_view_counted(&mut ignored);
    }

    fn last_view_counted(&self, cost: &mut u64) -> &[u32] {
        let spent = Cell::new(0u64);
        let view = self.by_last.get_or_init(|| {
            let mut idx: Vec<u32> = (0..self.tuples.len() as u32).collect();
            idx.sort_unstable_by(|&x, &y| {
                spent.set(spent.get() + 1);
                let tx = &self.tuples[x as usize];
                let ty = &self.tuples[y as usize];
                (tx.last(), tx).cmp(&(ty.last(), ty))
            });
            idx
        });
        *cost += spent.get();
        view
    }

    /// Renders the set with referent names: `{b1, b2}` for 1-tuples,
    /// `{(s1,e1)}` for wider tuples, `{}` when empty.
    pub fn display<'a>(&'a self, db: &'a EnvironmentDb) -> DisplaySet<'a> {
        DisplaySet { set: self, db }
    }
}

pub struct DisplaySet<'a> {
    set: &'a ReferentSet,
    db: &'a EnvironmentDb,
}

impl fmt::Display for DisplaySet<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, tuple) in self.set.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            if tuple.arity() == 1 {
                f.write_str(self.db.name(tuple.first()))?;
            } else {
                f.write_str("(")?;
                for (j, &id) in tuple.iter().enumerate() {
                    if j > 0 {
                        f.write_str(",")?;
                    }
                    f.write_str(self.db.name(id))?;
                }
                f.write_str(")")?;
            }
        }
        f.write_str("}")
    }
}

fn check_modifier(modifier: &ReferentSet) -> Result<(), AlgebraError> {
    match modifier.arity {
        Some(a) if a != 1 => Err(AlgebraError::UnsaturatedModifier { found: a }),
        _ => Ok(()),
    }
}

fn check_argument(argument: &ReferentSet) -> Result<(), AlgebraError> {
    match argument.arity {
        Some(a) if a != 1 => Err(AlgebraError::ArgumentArity { found: a }),
        _ => Ok(()),
    }
}

fn check_relation(relation: &ReferentSet) -> Result<(), AlgebraError> {
    match relation.arity {
        Some(a) if a < 2 => Err(AlgebraError::RelationArity { found: a }),
        _ => Ok(()),
    }
}

/// Modifier composition: keeps the tuples of `relation` whose first element
/// appears in `modifier`.  Arity of the result equals the relation's.
pub fn compose_modifier(relation: &ReferentSet, modifier: &ReferentSet) -> Result<ReferentSet, AlgebraError> {
    compose_modifier_counted(relation, modifier, &mut 0)
}

pub fn compose_modifier_counted(
    relation: &ReferentSet,
    modifier: &ReferentSet,
    cost: &mut u64,
) -> Result<ReferentSet, AlgebraError> {
    check_modifier(modifier)?;
    if relation.is_empty() || modifier.is_empty() {
        return Ok(ReferentSet::empty());
    }
    let (r, m) = (&relation.tuples, &modifier.tuples);
    let mut out = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < r.len() && j < m.len() {
        *cost += 1;
        match r[i].first().cmp(&m[j].first()) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(r[i].clone());
                i += 1;
            }
        }
    }
    Ok(ReferentSet::from_sorted_unique(out))
}

/// Argument composition: for each tuple of `relation` whose last element
/// appears in `argument`, emits the tuple with that element stripped.
/// Result arity is the relation's minus one.
pub fn compose_argument(relation: &ReferentSet, argument: &ReferentSet) -> Result<ReferentSet, AlgebraError> {
    compose_argument_counted(relation, argument, &mut 0)
}

pub fn compose_argument_counted(
    relation: &ReferentSet,
    argument: &ReferentSet,
    cost: &mut u64,
) -> Result<ReferentSet, AlgebraError> {
    check_argument(argument)?;
    check_relation(relation)?;
    if relation.is_empty() || argument.is_empty() {
        return Ok(ReferentSet::empty());
    }
    let keep = argument_matches(relation, argument, cost);
    let r = &relation.tuples;
    let mut out: Vec<ReferentTuple> = Vec::new();
    for (idx, tuple) in r.iter().enumerate() {
        if !keep[idx] {
            continue;
        }
        let stripped = tuple.prefix();
        // Canonical order is prefix-major, so duplicates are adjacent here.
        if let Some(prev) = out.last() {
            *cost += 1;
            if *prev == stripped {
                continue;
            }
        }
        out.push(stripped);
    }
    Ok(ReferentSet::from_sorted_unique(out))
}

/// Marks which relation tuples have their last element in `argument`.
fn argument_matches(relation: &ReferentSet, argument: &ReferentSet, cost: &mut u64) -> Vec<bool> {
    let view = relation.last_view_counted(cost);
    let r = &relation.tuples;
    let a = &argument.tuples;
    let mut keep = vec![false; r.len()];
    let (mut vi, mut j) = (0, 0);
    while vi < view.len() && j < a.len() {
        *cost += 1;
        let idx = view[vi] as usize;
        match r[idx].last().cmp(&a[j].first()) {
            std::cmp::Ordering::Less => vi += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                keep[idx] = true;
                vi += 1;
            }
        }
    }
    keep
}

/// The unstripped face of argument composition: the relation tuples that
/// found a match.  Display-only support for provenance output.
pub fn compose_argument_support(relation: &ReferentSet, argument: &ReferentSet) -> Result<ReferentSet, AlgebraError> {
    check_argument(argument)?;
    check_relation(relation)?;
    if relation.is_empty() || argument.is_empty() {
        return Ok(ReferentSet::empty());
    }
    let keep = argument_matches(relation, argument, &mut 0);
    let kept = relation.tuples.iter().zip(&keep).filter(|(_, &k)| k).map(|(t, _)| t.clone()).collect();
    Ok(ReferentSet::from_sorted_unique(kept))
}

/// Universally quantified argument composition: emits a stripped prefix only
/// when *every* tuple of `argument` extends it in `relation`.  An empty
/// argument set is an error, not a vacuously true universal.
pub fn compose_argument_universal(relation: &ReferentSet, argument: &ReferentSet) -> Result<ReferentSet, AlgebraError> {
    compose_argument_universal_counted(relation, argument, &mut 0)
}

pub fn compose_argument_universal_counted(
    relation: &ReferentSet,
    argument: &ReferentSet,
    cost: &mut u64,
) -> Result<ReferentSet, AlgebraError> {
    if argument.is_empty() {
        return Err(AlgebraError::VacuousUniversal);
    }
    check_argument(argument)?;
    check_relation(relation)?;
    if relation.is_empty() {
        return Ok(ReferentSet::empty());
    }
    let r = &relation.tuples;
    let a = &argument.tuples;
    let mut out: Vec<ReferentTuple> = Vec::new();
    let mut i = 0;
    while i < r.len() {
        let prefix = r[i].prefix();
        let mut end = i + 1;
        while end < r.len() && {
            *cost += 1;
            r[end].prefix() == prefix
        } {
            end += 1;
        }
        // Within one prefix run the last elements are strictly ascending, so
        // a two-pointer walk decides whether the run covers all of `a`.
        let mut j = 0;
        let mut k = i;
        while j < a.len() && k < end {
            *cost += 1;
            match a[j].first().cmp(&r[k].last()) {
                std::cmp::Ordering::Equal => {
                    j += 1;
                    k += 1;
                }
                std::cmp::Ordering::Greater => k += 1,
                std::cmp::Ordering::Less => break,
            }
        }
        if j == a.len() {
            out.push(prefix);
        }
        i = end;
    }
    Ok(ReferentSet::from_sorted_unique(out))
}

/// Noun-noun proximity composition: keeps the entities of `modified` that
/// lie within `threshold` of some entity of `modifier`.  Referents that are
/// not entities or have no position never count as near.
pub fn compose_noun_noun(
    modified: &ReferentSet,
    modifier: &ReferentSet,
    db: &EnvironmentDb,
    threshold: f64,
) -> Result<ReferentSet, AlgebraError> {
    compose_noun_noun_counted(modified, modifier, db, threshold, &mut 0)
}

pub fn compose_noun_noun_counted(
    modified: &ReferentSet,
    modifier: &ReferentSet,
    db: &EnvironmentDb,
    threshold: f64,
    cost: &mut u64,
) -> Result<ReferentSet, AlgebraError> {
    for set in [modified, modifier] {
        if let Some(a) = set.arity {
            if a != 1 {
                return Err(AlgebraError::ProximityArity { found: a });
            }
        }
    }
    if modified.is_empty() || modifier.is_empty() {
        return Ok(ReferentSet::empty());
    }
    let mut out = Vec::new();
    for tuple in &modified.tuples {
        let x = tuple.first();
        let mut near = false;
        for other in &modifier.tuples {
            *cost += 1;
            if db.within_proximity(x, other.first(), threshold).unwrap_or(false) {
                near = true;
                break;
            }
        }
        if near {
            out.push(tuple.clone());
        }
    }
    Ok(ReferentSet::from_sorted_unique(out))
}

/// Union of one or more same-arity sets, merged pairwise in rounds.
pub fn union_sets(sets: &[&ReferentSet]) -> Result<ReferentSet, AlgebraError> {
    union_sets_counted(sets, &mut 0)
}

pub fn union_sets_counted(sets: &[&ReferentSet], cost: &mut u64) -> Result<ReferentSet, AlgebraError> {
    if sets.is_empty() {
        return Err(AlgebraError::EmptyUnion);
    }
    let mut arity: Option<usize> = None;
    for set in sets {
        if let Some(a) = set.arity {
            match arity {
                Some(expected) if expected != a => {
                    return Err(AlgebraError::MixedArity { expected, found: a });
                }
                _ => arity = Some(a),
            }
        }
    }
    let mut lists: Vec<Vec<ReferentTuple>> =
        sets.iter().filter(|s| !s.is_empty()).map(|s| s.tuples.clone()).collect();
    if lists.is_empty() {
        return Ok(ReferentSet::empty());
    }
    while lists.len() > 1 {
        let mut next = Vec::with_capacity(lists.len().div_ceil(2));
        let mut it = lists.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => next.push(merge_union(&a, &b, cost)),
                None => next.push(a),
            }
        }
        lists = next;
    }
    Ok(ReferentSet::from_sorted_unique(lists.pop().unwrap()))
}

fn merge_union(a: &[ReferentTuple], b: &[ReferentTuple], cost: &mut u64) -> Vec<ReferentTuple> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        *cost += 1;
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i].clone());
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j].clone());
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                out.push(a[i].clone());
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}
