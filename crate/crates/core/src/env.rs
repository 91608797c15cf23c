//! Environment model: the finite set of things a sentence can refer to.
//!
//! An environment is loaded from a line-oriented text file:
//!
//! ```text
//! entity    <id> <type_keyword> [<x> <y> <z>]
//! situation <id> <start_seconds> <end_seconds>
//! timepoint <id> <seconds>
//! rel       <name> <id1> <id2> [... <idk>]
//! ```
//!
//! `#` starts a comment, blank lines are skipped, and every referent id must
//! be declared before a `rel` line uses it.  After loading, referents are
//! handed out as [`ReferentId`] values assigned in (kind, name) order, so
//! comparing two ids as integers is the same as comparing the referents in
//! canonical order.  All set-algebra sortedness invariants rest on that.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use thiserror::Error;

use crate::referents::{ReferentSet, ReferentTuple, MAX_ARITY};

/// What sort of thing a referent is.  The variant order (entities, then
/// situations, then time points) fixes the canonical referent order.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum RefKind {
    Entity,
    Situation,
    TimePoint,
}

impl fmt::Display for RefKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RefKind::Entity => "entity",
            RefKind::Situation => "situation",
            RefKind::TimePoint => "timepoint",
        })
    }
}

/// Interned handle for one referent.  Only meaningful relative to the
/// [`EnvironmentDb`] that issued it; the integer order of handles from one
/// database equals the canonical (kind, name) order of the referents.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct ReferentId(u32);

impl ReferentId {
    /// Builds a handle from a raw index.  For tests and generators that
    /// fabricate sets without a database; everything else should get handles
    /// from [`EnvironmentDb::lookup`].
    pub fn from_raw(raw: u32) -> ReferentId {
        ReferentId(raw)
    }

    pub fn raw(self) -> u32 {
        self.0
    }
}

#[derive(Clone, PartialEq, Debug)]
enum ReferentData {
    Entity { type_keyword: String, position: Option<[f64; 3]> },
    Situation { interval: (f64, f64) },
    TimePoint { value: f64 },
}

/// One named relation: a set of same-arity referent tuples, sorted and
/// deduplicated.
#[derive(Clone, PartialEq, Debug)]
pub struct RelationTable {
    pub name: String,
    pub arity: usize,
    tuples: Vec<ReferentTuple>,
}

impl RelationTable {
    pub fn tuples(&self) -> &[ReferentTuple] {
        &self.tuples
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }
}

/// Loaded environment: referents indexed by id and name, plus the relation
/// tables.
#[derive(Clone, PartialEq, Debug, Default)]
pub struct EnvironmentDb {
    names: Vec<String>,
    data: Vec<ReferentData>,
    by_name: HashMap<String, ReferentId>,
    by_type: BTreeMap<String, Vec<ReferentId>>,
    relations: BTreeMap<String, RelationTable>,
}

/// Errors from loading or querying an environment.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum EnvError {
    #[error("line {line}: duplicate id `{name}`")]
    DuplicateId { name: String, line: usize },
    #[error("line {line}: unknown id `{name}`")]
    UnknownId { name: String, line: usize },
    #[error("line {line}: relation `{name}` arity mismatch: expected {expected}, found {found}")]
    ArityMismatch { name: String, expected: usize, found: usize, line: usize },
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("unknown relation `{0}`")]
    UnknownRelation(String),
    #[error("unknown referent id {0:?}")]
    UnknownReferent(ReferentId),
    #[error("`{0}` is not an entity")]
    NotAnEntity(String),
    #[error("entity `{0}` has no position")]
    NoPosition(String),
}

impl EnvironmentDb {
    /// Number of referents, |E|.
    pub fn size(&self) -> usize {
        self.names.len()
    }

    pub fn lookup(&self, name: &str) -> Option<ReferentId> {
        self.by_name.get(name).copied()
    }

    pub fn name(&self, id: ReferentId) -> &str {
        &self.names[id.0 as usize]
    }

    pub fn kind(&self, id: ReferentId) -> RefKind {
        match self.data[id.0 as usize] {
            ReferentData::Entity { .. } => RefKind::Entity,
            ReferentData::Situation { .. } => RefKind::Situation,
            ReferentData::TimePoint { .. } => RefKind::TimePoint,
        }
    }

    /// Entity type keyword, if `id` is an entity.
    pub fn type_keyword(&self, id: ReferentId) -> Option<&str> {
        match &self.data[id.0 as usize] {
            ReferentData::Entity { type_keyword, .. } => Some(type_keyword),
            _ => None,
        }
    }

    /// Spatial position, if `id` is an entity that declared one.
    pub fn position(&self, id: ReferentId) -> Option<[f64; 3]> {
        match &self.data[id.0 as usize] {
            ReferentData::Entity { position, .. } => *position,
            _ => None,
        }
    }

    /// (start, end) seconds, if `id` is a situation.
    pub fn interval(&self, id: ReferentId) -> Option<(f64, f64)> {
        match &self.data[id.0 as usize] {
            ReferentData::Situation { interval } => Some(*interval),
            _ => None,
        }
    }

    /// Seconds value, if `id` is a time point.
    pub fn time_value(&self, id: ReferentId) -> Option<f64> {
        match &self.data[id.0 as usize] {
            ReferentData::TimePoint { value } => Some(*value),
            _ => None,
        }
    }

    /// All referent ids in canonical order.
    pub fn ids(&self) -> impl Iterator<Item = ReferentId> + '_ {
        (0..self.names.len() as u32).map(ReferentId)
    }

    pub fn relations(&self) -> impl Iterator<Item = &RelationTable> {
        self.relations.values()
    }

    pub fn relation(&self, name: &str) -> Option<&RelationTable> {
        self.relations.get(name)
    }

    /// Set of 1-tuples over the entities declared with `keyword`; empty if no
    /// entity has that type.
    pub fn entities_of_type(&self, keyword: &str) -> ReferentSet {
        match self.by_type.get(keyword) {
            // by_type holds ids ascending, so the 1-tuples are already sorted.
            Some(ids) => ReferentSet::from_sorted_unique(ids.iter().map(|&id| ReferentTuple::single(id)).collect()),
            None => ReferentSet::empty(),
        }
    }

    /// The tuple set of a named relation.
    pub fn relation_set(&self, name: &str) -> Result<ReferentSet, EnvError> {
        let table = self.relations.get(name).ok_or_else(|| EnvError::UnknownRelation(name.to_string()))?;
        Ok(ReferentSet::from_sorted_unique(table.tuples.clone()))
    }

    /// Whether two entities lie within `threshold` of each other (Euclidean
    /// distance).  Symmetric in `a` and `b`; monotone in `threshold`.
    pub fn within_proximity(&self, a: ReferentId, b: ReferentId, threshold: f64) -> Result<bool, EnvError> {
        let pa = self.entity_position(a)?;
        let pb = self.entity_position(b)?;
        let d2: f64 = (0..3).map(|i| (pa[i] - pb[i]).powi(2)).sum();
        Ok(d2 <= threshold * threshold)
    }

    fn entity_position(&self, id: ReferentId) -> Result<[f64; 3], EnvError> {
        if id.0 as usize >= self.names.len() {
            return Err(EnvError::UnknownReferent(id));
        }
        match &self.data[id.0 as usize] {
            ReferentData::Entity { position: Some(p), .. } => Ok(*p),
            ReferentData::Entity { position: None, .. } => Err(EnvError::NoPosition(self.name(id).to_string())),
            _ => Err(EnvError::NotAnEntity(self.name(id).to_string())),
        }
    }

    /// Renders the environment back into the input format.  Loading the
    /// output yields an equal database.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for id in self.ids() {
            let name = self.name(id);
            match &self.data[id.0 as usize] {
                ReferentData::Entity { type_keyword, position } => {
                    match position {
                        Some([x, y, z]) => out.push_str(&format!("entity {name} {type_keyword} {x} {y} {z}\n")),
                        None => out.push_str(&format!("entity {name} {type_keyword}\n")),
                    }
                }
                ReferentData::Situation { interval: (s, e) } => {
                    out.push_str(&format!("situation {name} {s} {e}\n"));
                }
                ReferentData::TimePoint { value } => {
                    out.push_str(&format!("timepoint {name} {value}\n"));
                }
            }
        }
        for table in self.relations.values() {
            for tuple in &table.tuples {
                out.push_str(&format!("rel {}", table.name));
                for &id in tuple.iter() {
                    out.push(' ');
                    out.push_str(self.name(id));
                }
                out.push('\n');
            }
        }
        out
    }
}

struct Decl {
    name: String,
    data: ReferentData,
    kind: RefKind,
}

/// Parses an environment file.  Errors carry 1-based line numbers.
pub fn load_environment(text: &str) -> Result<EnvironmentDb, EnvError> {
    let mut decls: Vec<Decl> = Vec::new();
    let mut seen: HashMap<String, ()> = HashMap::new();
    // Relation name -> (arity, tuples as (names, line)).
    let mut rels: BTreeMap<String, (usize, Vec<(Vec<String>, usize)>)> = BTreeMap::new();

    let malformed = |line: usize, msg: &str| EnvError::Malformed { line, msg: msg.to_string() };
    let number = |line: usize, field: &str| -> Result<f64, EnvError> {
        let v: f64 = field.parse().map_err(|_| malformed(line, &format!("bad number `{field}`")))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(malformed(line, &format!("non-finite number `{field}`")))
        }
    };

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("");
        let fields: Vec<&str> = content.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        let mut declare = |name: &str, data: ReferentData, kind: RefKind| -> Result<(), EnvError> {
            if seen.insert(name.to_string(), ()).is_some() {
                return Err(EnvError::DuplicateId { name: name.to_string(), line });
            }
            decls.push(Decl { name: name.to_string(), data, kind });
            Ok(())
        };
        match fields[0] {
            "entity" => {
                let position = match fields.len() {
                    3 => None,
                    6 => Some([number(line, fields[3])?, number(line, fields[4])?, number(line, fields[5])?]),
                    _ => return Err(malformed(line, "expected `entity <id> <type> [<x> <y> <z>]`")),
                };
                declare(
                    fields[1],
                    ReferentData::Entity { type_keyword: fields[2].to_string(), position },
                    RefKind::Entity,
                )?;
            }
            "situation" => {
                if fields.len() != 4 {
                    return Err(malformed(line, "expected `situation <id> <start> <end>`"));
                }
                let start = number(line, fields[2])?;
                let end = number(line, fields[3])?;
                if start > end {
                    return Err(malformed(line, "situation start after end"));
                }
                declare(fields[1], ReferentData::Situation { interval: (start, end) }, RefKind::Situation)?;
            }
            "timepoint" => {
                if fields.len() != 3 {
                    return Err(malformed(line, "expected `timepoint <id> <seconds>`"));
                }
                let value = number(line, fields[2])?;
                declare(fields[1], ReferentData::TimePoint { value }, RefKind::TimePoint)?;
            }
            "rel" => {
                if fields.len() < 4 {
                    return Err(malformed(line, "expected `rel <name> <id1> <id2> [...]`"));
                }
                let name = fields[1];
                let ids: Vec<String> = fields[2..].iter().map(|s| s.to_string()).collect();
                if ids.len() > MAX_ARITY {
                    return Err(malformed(line, &format!("relation arity {} exceeds the supported maximum {MAX_ARITY}", ids.len())));
                }
                for id in &ids {
                    if !seen.contains_key(id.as_str()) {
                        return Err(EnvError::UnknownId { name: id.clone(), line });
                    }
                }
                match rels.get_mut(name) {
                    Some((arity, tuples)) => {
                        if *arity != ids.len() {
                            return Err(EnvError::ArityMismatch {
                                name: name.to_string(),
                                expected: *arity,
                                found: ids.len(),
                                line,
                            });
                        }
                        tuples.push((ids, line));
                    }
                    None => {
                        rels.insert(name.to_string(), (ids.len(), vec![(ids, line)]));
                    }
                }
            }
            other => return Err(malformed(line, &format!("unknown directive `{other}`"))),
        }
    }

    // Canonical handle assignment: sort declarations by (kind, name).
    decls.sort_by(|a, b| (a.kind, a.name.as_str()).cmp(&(b.kind, b.name.as_str())));

    let mut db = EnvironmentDb::default();
    for (i, decl) in decls.into_iter().enumerate() {
        let id = ReferentId(i as u32);
        if let ReferentData::Entity { type_keyword, .. } = &decl.data {
            db.by_type.entry(type_keyword.clone()).or_default().push(id);
        }
        db.by_name.insert(decl.name.clone(), id);
        db.names.push(decl.name);
        db.data.push(decl.data);
    }

    for (name, (arity, raw_tuples)) in rels {
        let mut tuples: Vec<ReferentTuple> = Vec::with_capacity(raw_tuples.len());
        for (ids, _line) in raw_tuples {
            let resolved = ids.iter().map(|n| db.by_name[n.as_str()]);
            tuples.push(ReferentTuple::from_iter(resolved));
        }
        tuples.sort_unstable();
        tuples.dedup();
        db.relations.insert(name.clone(), RelationTable { name, arity, tuples });
    }

    Ok(db)
}
