use crate::catalog::AttributeCatalogRecord;
use crate::value::Value;
use crate::workload::{AtomicPredicate, CmpOp, PredicateExpr};

/// Range selectivity used when an attribute has neither histogram nor MCVs.
pub const DEFAULT_RANGE_SELECTIVITY: f64 = 1.0 / 3.0;

/// Fraction of histogram mass strictly below `c`, interpolating linearly
/// inside the straddled bucket.
pub fn histogram_fraction(bounds: &[Value], c: &Value) -> f64 {
    let n = bounds.len();
    if n < 2 {
        return 0.5;
    }
    if c <= &bounds[0] {
        return 0.0;
    }
    if c >= &bounds[n - 1] {
        return 1.0;
    }
    // first boundary greater than c; c lies in bucket (i - 1, i)
    let i = bounds.partition_point(|b| b <= c);
    let lo = bounds[i - 1].as_scalar();
    let hi = bounds[i].as_scalar();
    let within = if hi > lo {
        ((c.as_scalar() - lo) / (hi - lo)).clamp(0.0, 1.0)
    } else {
        0.5
    };
    ((i - 1) as f64 + within) / (n - 1) as f64
}

/// Selectivity of one atomic comparison from an attribute's catalog record.
pub fn atom_selectivity(atom: &AtomicPredicate, rec: Option<&AttributeCatalogRecord>, reltuples: f64) -> f64 {
    let Some(rec) = rec else {
        return match atom.op {
            CmpOp::Eq => 0.005,
            CmpOp::Ne => 0.995,
            _ => DEFAULT_RANGE_SELECTIVITY,
        };
    };
    let distinct = rec.distinct(reltuples);
    let mcv_mass: f64 = rec.mcv_freqs.iter().sum();
    let rest = (1.0 - mcv_mass).max(0.0);
    let eq = || -> f64 {
        if let Some(i) = rec.mcv_values.iter().position(|v| v == &atom.constant) {
            return rec.mcv_freqs[i];
        }
        rest / (distinct - rec.mcv_values.len() as f64).max(1.0)
    };
    let sel = match atom.op {
        CmpOp::Eq => eq(),
        CmpOp::Ne => 1.0 - eq(),
        op => {
            let mcv_part: f64 = rec
                .mcv_values
                .iter()
                .zip(&rec.mcv_freqs)
                .filter(|(v, _)| op.eval(v, &atom.constant))
                .map(|(_, f)| f)
                .sum();
            let below = match &rec.histogram {
                Some(h) => histogram_fraction(h, &atom.constant),
                None if rec.mcv_values.is_empty() => return DEFAULT_RANGE_SELECTIVITY,
                None => match op {
                    CmpOp::Lt | CmpOp::Le => DEFAULT_RANGE_SELECTIVITY,
                    _ => 1.0 - DEFAULT_RANGE_SELECTIVITY,
                },
            };
            let frac = match op {
                CmpOp::Lt | CmpOp::Le => below,
                _ => 1.0 - below,
            };
            mcv_part + rest * frac
        }
    };
    sel.clamp(0.0, 1.0)
}

/// Selectivity of an atomized filter; `lookup` yields the record of the
/// attribute an atomic predicate reads.
pub fn estimate_selectivity<'a>(
    expr: &PredicateExpr,
    lookup: &dyn Fn(&AtomicPredicate) -> Option<&'a AttributeCatalogRecord>,
    reltuples: f64,
) -> f64 {
    let s = match expr {
        PredicateExpr::True => 1.0,
        PredicateExpr::Atom(a) => atom_selectivity(a, lookup(a), reltuples),
        PredicateExpr::And(v) => v
            .iter()
            .map(|e| estimate_selectivity(e, lookup, reltuples))
            .product(),
        PredicateExpr::Or(v) => v.iter().fold(0.0, |acc, e| {
            let s = estimate_selectivity(e, lookup, reltuples);
            (acc + s - acc * s).clamp(0.0, 1.0)
        }),
        PredicateExpr::Not(e) => 1.0 - estimate_selectivity(e, lookup, reltuples),
        // callers atomize first; expand on the fly otherwise
        other => match crate::workload::atomize(other) {
            Ok(e) => estimate_selectivity(&e, lookup, reltuples),
            Err(_) => DEFAULT_RANGE_SELECTIVITY,
        },
    };
    s.clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(mcv: Vec<(i64, f64)>, hist: Option<Vec<i64>>, stadistinct: f64) -> AttributeCatalogRecord {
        AttributeCatalogRecord {
            fragment: "r__".into(),
            attribute: "a".into(),
            stadistinct,
            width: 4.0,
            mcv_values: mcv.iter().map(|(v, _)| Value::Integer(*v)).collect(),
            mcv_freqs: mcv.iter().map(|(_, f)| *f).collect(),
            histogram: hist.map(|h| h.into_iter().map(Value::Integer).collect()),
        }
    }

    fn atom(op: CmpOp, v: i64) -> AtomicPredicate {
        AtomicPredicate::new("r", "a", op, Value::Integer(v))
    }

    #[test]
    fn mcv_and_histogram_rules() {
        let r = rec(vec![(7, 0.25)], None, 10.0);
        assert_eq!(atom_selectivity(&atom(CmpOp::Eq, 7), Some(&r), 100.0), 0.25);
        // miss: 0.75 spread over 9 remaining values
        assert!((atom_selectivity(&atom(CmpOp::Eq, 8), Some(&r), 100.0) - 0.75 / 9.0).abs() < 1e-12);

        let h = rec(vec![], Some(vec![0, 10, 20, 30]), -1.0);
        assert!((atom_selectivity(&atom(CmpOp::Lt, 15), Some(&h), 30.0) - 0.5).abs() < 1e-12);
        assert!((atom_selectivity(&atom(CmpOp::Ge, 15), Some(&h), 30.0) - 0.5).abs() < 1e-12);
        assert_eq!(atom_selectivity(&atom(CmpOp::Lt, -5), Some(&h), 30.0), 0.0);

        let none = rec(vec![], None, 4.0);
        assert_eq!(atom_selectivity(&atom(CmpOp::Lt, 1), Some(&none), 30.0), DEFAULT_RANGE_SELECTIVITY);
        assert_eq!(atom_selectivity(&atom(CmpOp::Eq, 1), Some(&none), 30.0), 0.25);
    }

    #[test]
    fn combinators() {
        let h = rec(vec![], Some(vec![0, 10, 20, 30]), -1.0);
        let lookup = |_: &AtomicPredicate| Some(&h);
        assert_eq!(estimate_selectivity(&PredicateExpr::True, &lookup, 30.0), 1.0);
        let a = PredicateExpr::Atom(atom(CmpOp::Lt, 15));
        let and = PredicateExpr::And(vec![a.clone(), a.clone()]);
        assert!((estimate_selectivity(&and, &lookup, 30.0) - 0.25).abs() < 1e-12);
        let or = PredicateExpr::Or(vec![a.clone(), a.clone()]);
        assert!((estimate_selectivity(&or, &lookup, 30.0) - 0.75).abs() < 1e-12);
        let not = PredicateExpr::Not(Box::new(a));
        assert!((estimate_selectivity(&not, &lookup, 30.0) - 0.5).abs() < 1e-12);
    }
}
