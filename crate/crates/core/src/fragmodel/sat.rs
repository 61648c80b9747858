//! Syntactic satisfiability of conjunctions of (possibly negated) atomics.
//!
//! Decided per attribute and conjoined across attributes. Integer, decimal
//! and date attributes are treated as discrete domains; text uses bounds plus
//! equality/exclusion sets and assumes a dense domain between distinct bounds.

use std::collections::{BTreeMap, BTreeSet};

use chrono::Datelike;

use super::key::{Cell, FragmentKey};
use crate::error::{Error, Result};
use crate::value::Value;
use crate::workload::{AtomicPredicate, CmpOp, PredicateSet};

#[derive(Debug, Clone)]
struct Discrete {
    lo: i128,
    hi: i128,
    eq: Option<i128>,
    excluded: BTreeSet<i128>,
}

#[derive(Debug, Clone, Default)]
struct TextState {
    lo: Option<(String, bool)>,
    hi: Option<(String, bool)>,
    eq: Option<String>,
    excluded: BTreeSet<String>,
    conflict: bool,
}

#[derive(Debug, Clone)]
enum AttrState {
    Discrete(Discrete),
    Text(TextState),
}

fn discrete(v: &Value) -> Option<i128> {
    match v {
        Value::Integer(i) => Some(*i as i128),
        Value::Decimal(d) => Some(d.scaled() as i128),
        Value::Date(d) => Some(d.num_days_from_ce() as i128),
        Value::Text(_) => None,
    }
}

impl AttrState {
    fn for_value(v: &Value) -> AttrState {
        match v {
            Value::Text(_) => AttrState::Text(TextState::default()),
            _ => AttrState::Discrete(Discrete {
                lo: i64::MIN as i128 - 1,
                hi: i64::MAX as i128 + 1,
                eq: None,
                excluded: BTreeSet::new(),
            }),
        }
    }

    fn add(&mut self, op: CmpOp, c: &Value) {
        match self {
            AttrState::Discrete(d) => {
                let Some(c) = discrete(c) else { return };
                match op {
                    CmpOp::Lt => d.hi = d.hi.min(c - 1),
                    CmpOp::Le => d.hi = d.hi.min(c),
                    CmpOp::Gt => d.lo = d.lo.max(c + 1),
                    CmpOp::Ge => d.lo = d.lo.max(c),
                    CmpOp::Eq => {
                        if d.eq.is_some_and(|e| e != c) {
                            d.lo = 1;
                            d.hi = 0;
                        }
                        d.eq = Some(c);
                    }
                    CmpOp::Ne => {
                        d.excluded.insert(c);
                    }
                }
            }
            AttrState::Text(t) => {
                let Value::Text(c) = c else { return };
                let tighter_hi = |cur: &Option<(String, bool)>, c: &str, incl: bool| match cur {
                    None => true,
                    Some((h, hi)) => c < h.as_str() || (c == h && *hi && !incl),
                };
                let tighter_lo = |cur: &Option<(String, bool)>, c: &str, incl: bool| match cur {
                    None => true,
                    Some((l, li)) => c > l.as_str() || (c == l && *li && !incl),
                };
                match op {
                    CmpOp::Lt | CmpOp::Le => {
                        let incl = op == CmpOp::Le;
                        if tighter_hi(&t.hi, c, incl) {
                            t.hi = Some((c.clone(), incl));
                        }
                    }
                    CmpOp::Gt | CmpOp::Ge => {
                        let incl = op == CmpOp::Ge;
                        if tighter_lo(&t.lo, c, incl) {
                            t.lo = Some((c.clone(), incl));
                        }
                    }
                    CmpOp::Eq => {
                        if t.eq.as_ref().is_some_and(|e| e != c) {
                            t.conflict = true;
                        }
                        t.eq = Some(c.clone());
                    }
                    CmpOp::Ne => {
                        t.excluded.insert(c.clone());
                    }
                }
            }
        }
    }

    fn satisfiable(&self) -> bool {
        match self {
            AttrState::Discrete(d) => {
                if d.lo > d.hi {
                    return false;
                }
                if let Some(e) = d.eq {
                    return e >= d.lo && e <= d.hi && !d.excluded.contains(&e);
                }
                let width = d.hi - d.lo + 1;
                let blocked = d.excluded.range(d.lo..=d.hi).count() as i128;
                width > blocked
            }
            AttrState::Text(t) => {
                if t.conflict {
                    return false;
                }
                let above_lo = |v: &str| match &t.lo {
                    None => true,
                    Some((l, incl)) => v > l.as_str() || (*incl && v == l),
                };
                let below_hi = |v: &str| match &t.hi {
                    None => true,
                    Some((h, incl)) => v < h.as_str() || (*incl && v == h),
                };
                if let Some(e) = &t.eq {
                    return above_lo(e) && below_hi(e) && !t.excluded.contains(e);
                }
                // nothing sorts below the empty string
                if let Some((h, false)) = &t.hi {
                    if h.is_empty() {
                        return false;
                    }
                }
                match (&t.lo, &t.hi) {
                    (Some((l, li)), Some((h, hi))) => {
                        if l > h {
                            false
                        } else if l == h {
                            *li && *hi && !t.excluded.contains(l)
                        } else {
                            true
                        }
                    }
                    _ => true,
                }
            }
        }
    }
}

/// Accumulates constraints grouped by `(relation, attribute)`.
#[derive(Debug, Clone, Default)]
pub struct Conjunction {
    attrs: BTreeMap<(String, String), AttrState>,
}

impl Conjunction {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `p` when `truth` holds, otherwise its negation.
    pub fn add(&mut self, p: &AtomicPredicate, truth: bool) {
        let op = if truth { p.op } else { p.op.negate() };
        let state = self
            .attrs
            .entry((p.relation.clone(), p.attribute.clone()))
            .or_insert_with(|| AttrState::for_value(&p.constant));
        state.add(op, &p.constant);
    }

    pub fn satisfiable(&self) -> bool {
        self.attrs.values().all(AttrState::satisfiable)
    }
}

/// Satisfiability of a list of signed atomics.
pub fn satisfiable(constraints: &[(&AtomicPredicate, bool)]) -> bool {
    let mut c = Conjunction::new();
    for (p, t) in constraints {
        c.add(p, *t);
    }
    c.satisfiable()
}

fn check_len(key: &FragmentKey, pset: &PredicateSet) -> Result<()> {
    if key.len() != pset.m() {
        return Err(Error::Consistency(format!(
            "key {key} has {} digits but '{}' has {} predicates",
            key.len(),
            pset.relation,
            pset.m()
        )));
    }
    Ok(())
}

/// Conjunction of the constraints a key places on its predicate set.
pub fn key_conjunction(key: &FragmentKey, pset: &PredicateSet) -> Result<Conjunction> {
    check_len(key, pset)?;
    let mut c = Conjunction::new();
    for (d, p) in key.digits().iter().zip(pset.iter()) {
        if *d != 2 {
            c.add(p, *d == 1);
        }
    }
    Ok(c)
}

/// Whether the region a key selects can hold any value assignment.
pub fn key_satisfiable(key: &FragmentKey, pset: &PredicateSet) -> Result<bool> {
    Ok(key_conjunction(key, pset)?.satisfiable())
}

/// All satisfiable cells of `pset`, in increasing bit-pattern order of the
/// depth-first enumeration. Prefixes that are already unsatisfiable are pruned.
pub fn satisfiable_cells(pset: &PredicateSet) -> Result<Vec<Cell>> {
    const LIMIT: usize = 1 << 20;
    if pset.m() > super::key::MAX_PREDICATES {
        return Err(Error::Unsupported(format!(
            "'{}' has {} predicates; at most {} are supported",
            pset.relation,
            pset.m(),
            super::key::MAX_PREDICATES
        )));
    }
    let mut out = Vec::new();
    let mut stack: Vec<(usize, u128, Conjunction)> = vec![(0, 0, Conjunction::new())];
    while let Some((depth, bits, conj)) = stack.pop() {
        if depth == pset.m() {
            out.push(Cell::new(bits, depth));
            if out.len() > LIMIT {
                return Err(Error::Unsupported(format!(
                    "'{}' has more than {LIMIT} satisfiable cells",
                    pset.relation
                )));
            }
            continue;
        }
        let p = &pset.predicates[depth];
        // push 1 first so that 0 pops first
        for bit in [true, false] {
            let mut next = conj.clone();
            next.add(p, bit);
            if next.satisfiable() {
                stack.push((depth + 1, bits | (bit as u128) << depth, next));
            }
        }
    }
    Ok(out)
}
