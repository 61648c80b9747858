use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::value::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CmpOp {
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = "<>")]
    Ne,
}

impl CmpOp {
    pub fn negate(self) -> CmpOp {
        match self {
            CmpOp::Lt => CmpOp::Ge,
            CmpOp::Le => CmpOp::Gt,
            CmpOp::Gt => CmpOp::Le,
            CmpOp::Ge => CmpOp::Lt,
            CmpOp::Eq => CmpOp::Ne,
            CmpOp::Ne => CmpOp::Eq,
        }
    }

    /// The operator with its operands swapped (`c < a` is `a > c`).
    pub fn flip(self) -> CmpOp {
        match self {
            CmpOp::Lt => CmpOp::Gt,
            CmpOp::Le => CmpOp::Ge,
            CmpOp::Gt => CmpOp::Lt,
            CmpOp::Ge => CmpOp::Le,
            other => other,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Eq => "=",
            CmpOp::Ne => "<>",
        }
    }

    pub fn is_range(self) -> bool {
        matches!(self, CmpOp::Lt | CmpOp::Le | CmpOp::Gt | CmpOp::Ge)
    }

    pub fn eval(self, lhs: &Value, rhs: &Value) -> bool {
        let ord = lhs.cmp(rhs);
        match self {
            CmpOp::Lt => ord.is_lt(),
            CmpOp::Le => ord.is_le(),
            CmpOp::Gt => ord.is_gt(),
            CmpOp::Ge => ord.is_ge(),
            CmpOp::Eq => ord.is_eq(),
            CmpOp::Ne => ord.is_ne(),
        }
    }
}

/// One comparison between an attribute and a constant.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AtomicPredicate {
    pub relation: String,
    pub attribute: String,
    pub op: CmpOp,
    pub constant: Value,
}

impl AtomicPredicate {
    pub fn new(
        relation: impl Into<String>,
        attribute: impl Into<String>,
        op: CmpOp,
        constant: Value,
    ) -> Self {
        AtomicPredicate {
            relation: relation.into(),
            attribute: attribute.into(),
            op,
            constant,
        }
    }

    /// Whether an attribute value satisfies the predicate.
    pub fn holds(&self, value: &Value) -> bool {
        self.op.eval(value, &self.constant)
    }

    pub fn negated(&self) -> AtomicPredicate {
        AtomicPredicate {
            op: self.op.negate(),
            ..self.clone()
        }
    }

    pub fn is_on(&self, relation: &str, attribute: &str) -> bool {
        self.relation == relation && self.attribute == attribute
    }
}

impl fmt::Display for AtomicPredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}.{} {} {}",
            self.relation,
            self.attribute,
            self.op.symbol(),
            self.constant.sql_literal()
        )
    }
}

/// Boolean filter tree; `Between` and `In` only exist before atomization.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredicateExpr {
    True,
    Atom(AtomicPredicate),
    And(Vec<PredicateExpr>),
    Or(Vec<PredicateExpr>),
    Not(Box<PredicateExpr>),
    Between {
        relation: String,
        attribute: String,
        low: Value,
        high: Value,
    },
    In {
        relation: String,
        attribute: String,
        values: Vec<Value>,
    },
}

impl PredicateExpr {
    /// Conjunction with nested ANDs flattened and TRUE dropped.
    pub fn and(parts: Vec<PredicateExpr>) -> PredicateExpr {
        let mut flat = Vec::new();
        for p in parts {
            match p {
                PredicateExpr::True => {}
                PredicateExpr::And(inner) => flat.extend(inner),
                other => flat.push(other),
            }
        }
        match flat.len() {
            0 => PredicateExpr::True,
            1 => flat.pop().unwrap(),
            _ => PredicateExpr::And(flat),
        }
    }

    pub fn or(parts: Vec<PredicateExpr>) -> PredicateExpr {
        let mut flat = Vec::new();
        for p in parts {
            match p {
                PredicateExpr::Or(inner) => flat.extend(inner),
                other => flat.push(other),
            }
        }
        match flat.len() {
            0 => PredicateExpr::Not(Box::new(PredicateExpr::True)),
            1 => flat.pop().unwrap(),
            _ => PredicateExpr::Or(flat),
        }
    }

    pub fn is_atomized(&self) -> bool {
        match self {
            PredicateExpr::True | PredicateExpr::Atom(_) => true,
            PredicateExpr::And(v) | PredicateExpr::Or(v) => v.iter().all(Self::is_atomized),
            PredicateExpr::Not(e) => e.is_atomized(),
            PredicateExpr::Between { .. } | PredicateExpr::In { .. } => false,
        }
    }

    /// Atomic leaves in tree order (BETWEEN/IN leaves expanded on the fly).
    pub fn atoms(&self) -> Vec<AtomicPredicate> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms(&self, out: &mut Vec<AtomicPredicate>) {
        match self {
            PredicateExpr::True => {}
            PredicateExpr::Atom(a) => out.push(a.clone()),
            PredicateExpr::And(v) | PredicateExpr::Or(v) => {
                v.iter().for_each(|e| e.collect_atoms(out))
            }
            PredicateExpr::Not(e) => e.collect_atoms(out),
            PredicateExpr::Between {
                relation,
                attribute,
                low,
                high,
            } => {
                out.push(AtomicPredicate::new(
                    relation.clone(),
                    attribute.clone(),
                    CmpOp::Ge,
                    low.clone(),
                ));
                out.push(AtomicPredicate::new(
                    relation.clone(),
                    attribute.clone(),
                    CmpOp::Le,
                    high.clone(),
                ));
            }
            PredicateExpr::In {
                relation,
                attribute,
                values,
            } => {
                for v in values {
                    out.push(AtomicPredicate::new(
                        relation.clone(),
                        attribute.clone(),
                        CmpOp::Eq,
                        v.clone(),
                    ));
                }
            }
        }
    }

    /// Number of atomic leaves (quals) the tree evaluates.
    pub fn qual_count(&self) -> usize {
        self.atoms().len()
    }

    /// Evaluate against a tuple; `lookup` resolves `(relation, attribute)`.
    pub fn eval<'a, F>(&self, lookup: &F) -> bool
    where
        F: Fn(&str, &str) -> &'a Value,
    {
        match self {
            PredicateExpr::True => true,
            PredicateExpr::Atom(a) => a.holds(lookup(&a.relation, &a.attribute)),
            PredicateExpr::And(v) => v.iter().all(|e| e.eval(lookup)),
            PredicateExpr::Or(v) => v.iter().any(|e| e.eval(lookup)),
            PredicateExpr::Not(e) => !e.eval(lookup),
            PredicateExpr::Between {
                relation,
                attribute,
                low,
                high,
            } => {
                let v = lookup(relation, attribute);
                v >= low && v <= high
            }
            PredicateExpr::In {
                relation,
                attribute,
                values,
            } => {
                let v = lookup(relation, attribute);
                values.iter().any(|c| c == v)
            }
        }
    }

    /// Disjunctive normal form over atomics with negations pushed into the
    /// operators. Each inner vector is a conjunction; an empty outer vector is
    /// FALSE and an empty inner vector is TRUE.
    pub fn dnf(&self) -> Vec<Vec<AtomicPredicate>> {
        self.dnf_signed(false)
    }

    fn dnf_signed(&self, negated: bool) -> Vec<Vec<AtomicPredicate>> {
        match (self, negated) {
            (PredicateExpr::True, false) => vec![vec![]],
            (PredicateExpr::True, true) => vec![],
            (PredicateExpr::Atom(a), false) => vec![vec![a.clone()]],
            (PredicateExpr::Atom(a), true) => vec![vec![a.negated()]],
            (PredicateExpr::Not(e), n) => e.dnf_signed(!n),
            (PredicateExpr::And(v), false) | (PredicateExpr::Or(v), true) => {
                let mut acc: Vec<Vec<AtomicPredicate>> = vec![vec![]];
                for e in v {
                    let part = e.dnf_signed(negated);
                    let mut next = Vec::with_capacity(acc.len() * part.len());
                    for left in &acc {
                        for right in &part {
                            let mut c = left.clone();
                            c.extend(right.iter().cloned());
                            next.push(c);
                        }
                    }
                    acc = next;
                    if acc.is_empty() {
                        break;
                    }
                }
                acc
            }
            (PredicateExpr::Or(v), false) | (PredicateExpr::And(v), true) => {
                v.iter().flat_map(|e| e.dnf_signed(negated)).collect()
            }
            (leaf @ (PredicateExpr::Between { .. } | PredicateExpr::In { .. }), n) => {
                crate::workload::atomize(leaf)
                    .expect("well-typed leaf")
                    .dnf_signed(n)
            }
        }
    }

    fn write_sql(&self, f: &mut fmt::Formatter<'_>, nested: bool) -> fmt::Result {
        match self {
            PredicateExpr::True => f.write_str("TRUE"),
            PredicateExpr::Atom(a) => write!(f, "{a}"),
            PredicateExpr::And(v) | PredicateExpr::Or(v) => {
                let sep = if matches!(self, PredicateExpr::And(_)) {
                    " AND "
                } else {
                    " OR "
                };
                if nested {
                    f.write_str("(")?;
                }
                for (i, e) in v.iter().enumerate() {
                    if i > 0 {
                        f.write_str(sep)?;
                    }
                    e.write_sql(f, true)?;
                }
                if nested {
                    f.write_str(")")?;
                }
                Ok(())
            }
            PredicateExpr::Not(e) => {
                f.write_str("NOT ")?;
                match **e {
                    PredicateExpr::Atom(_) | PredicateExpr::True => e.write_sql(f, true),
                    _ => {
                        f.write_str("(")?;
                        e.write_sql(f, false)?;
                        f.write_str(")")
                    }
                }
            }
            PredicateExpr::Between {
                relation,
                attribute,
                low,
                high,
            } => write!(
                f,
                "{relation}.{attribute} BETWEEN {} AND {}",
                low.sql_literal(),
                high.sql_literal()
            ),
            PredicateExpr::In {
                relation,
                attribute,
                values,
            } => {
                write!(f, "{relation}.{attribute} IN (")?;
                for (i, v) in values.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    f.write_str(&v.sql_literal())?;
                }
                f.write_str(")")
            }
        }
    }
}

impl fmt::Display for PredicateExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_sql(f, false)
    }
}

/// Equality join edge `left.attr = right.attr`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct JoinEdge {
    pub left_relation: String,
    pub left_attribute: String,
    pub right_relation: String,
    pub right_attribute: String,
}

impl JoinEdge {
    pub fn connects(&self, a: &str, b: &str) -> bool {
        (self.left_relation == a && self.right_relation == b)
            || (self.left_relation == b && self.right_relation == a)
    }

    /// The attribute this edge uses on `relation`.
    pub fn attribute_of(&self, relation: &str) -> Option<&str> {
        if self.left_relation == relation {
            Some(&self.left_attribute)
        } else if self.right_relation == relation {
            Some(&self.right_attribute)
        } else {
            None
        }
    }
}

impl fmt::Display for JoinEdge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}.{} = {}.{}",
            self.left_relation, self.left_attribute, self.right_relation, self.right_attribute
        )
    }
}

/// A parsed workload query: relations, join edges and per-relation filters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryShape {
    pub id: String,
    /// Relations in FROM order; this is also the join order.
    pub relations: Vec<String>,
    #[serde(default)]
    pub joins: Vec<JoinEdge>,
    #[serde(default)]
    pub filters: BTreeMap<String, PredicateExpr>,
    /// SELECT list, kept verbatim as opaque metadata.
    #[serde(default)]
    pub select: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub group_by: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub order_by: String,
}

impl QueryShape {
    pub fn filter(&self, relation: &str) -> &PredicateExpr {
        static TRUE: PredicateExpr = PredicateExpr::True;
        self.filters.get(relation).unwrap_or(&TRUE)
    }

    pub fn joins_between(&self, a: &str, b: &str) -> impl Iterator<Item = &JoinEdge> {
        let (a, b) = (a.to_string(), b.to_string());
        self.joins.iter().filter(move |e| e.connects(&a, &b))
    }

    /// SQL rendering accepted back by the parser.
    pub fn to_sql(&self) -> String {
        let mut s = format!("-- id: {}\nSELECT ", self.id);
        s.push_str(if self.select.is_empty() {
            "*"
        } else {
            &self.select
        });
        s.push_str("\nFROM ");
        s.push_str(&self.relations.join(", "));
        let mut conjuncts: Vec<String> = self.joins.iter().map(|j| j.to_string()).collect();
        for expr in self.filters.values() {
            match expr {
                PredicateExpr::True => {}
                PredicateExpr::And(parts) => {
                    for p in parts {
                        conjuncts.push(match p {
                            PredicateExpr::Or(_) => format!("({p})"),
                            _ => p.to_string(),
                        })
                    }
                }
                PredicateExpr::Or(_) => conjuncts.push(format!("({expr})")),
                other => conjuncts.push(other.to_string()),
            }
        }
        if !conjuncts.is_empty() {
            s.push_str("\nWHERE ");
            s.push_str(&conjuncts.join("\n  AND "));
        }
        if !self.group_by.is_empty() {
            s.push_str("\nGROUP BY ");
            s.push_str(&self.group_by);
        }
        if !self.order_by.is_empty() {
            s.push_str("\nORDER BY ");
            s.push_str(&self.order_by);
        }
        s.push_str(";\n");
        s
    }
}

/// Ordered, duplicate-free atomic predicates of one relation. The order fixes
/// digit positions of every fragment key over the relation.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PredicateSet {
    pub relation: String,
    pub predicates: Vec<AtomicPredicate>,
}

impl PredicateSet {
    pub fn new(relation: impl Into<String>) -> Self {
        PredicateSet {
            relation: relation.into(),
            predicates: Vec::new(),
        }
    }

    pub fn from_predicates(relation: impl Into<String>, preds: Vec<AtomicPredicate>) -> Self {
        let mut set = PredicateSet::new(relation);
        for p in preds {
            set.push(p);
        }
        set
    }

    /// Appends unless already present; returns whether it was added.
    pub fn push(&mut self, p: AtomicPredicate) -> bool {
        if self.predicates.contains(&p) {
            false
        } else {
            self.predicates.push(p);
            true
        }
    }

    pub fn m(&self) -> usize {
        self.predicates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.predicates.is_empty()
    }

    pub fn position(&self, p: &AtomicPredicate) -> Option<usize> {
        self.predicates.iter().position(|q| q == p)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, AtomicPredicate> {
        self.predicates.iter()
    }
}
