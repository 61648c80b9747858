//! Gene decoding: cell claiming, remainder grouping and budget merging.

use crate::fragmodel::{Cell, FragmentKey};

/// One relation's share of every gene, with its satisfiable cells and their
/// cardinalities.
#[derive(Debug, Clone)]
pub struct Slice {
    pub relation: String,
    pub pset: crate::workload::PredicateSet,
    pub start: usize,
    pub len: usize,
    pub cells: Vec<Cell>,
    pub cards: Vec<u64>,
}

/// A decoded fragment of one relation: its key and the satisfiable cells it
/// covers (indices into the slice's cell list).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Piece {
    pub key: FragmentKey,
    pub cells: Vec<usize>,
}

impl Slice {
    fn covered(&self, key: &FragmentKey) -> Vec<usize> {
        (0..self.cells.len())
            .filter(|&i| key.covers_unchecked(&self.cells[i]))
            .collect()
    }

    pub fn cardinality(&self, piece: &Piece) -> u64 {
        piece.cells.iter().map(|&i| self.cards[i]).sum()
    }

    /// First-wins claiming: a gene is kept only when it covers at least one
    /// satisfiable cell and none of its cells is already claimed. Unclaimed
    /// cells are then grouped greedily under generalized keys that cover no
    /// claimed cell.
    pub fn decode(&self, genes: &[FragmentKey]) -> Vec<Piece> {
        let n = self.cells.len();
        let mut owner: Vec<Option<usize>> = vec![None; n];
        let mut pieces: Vec<Piece> = Vec::new();
        for g in genes {
            let cov = self.covered(g);
            if cov.is_empty() || cov.iter().any(|&i| owner[i].is_some()) {
                continue;
            }
            for &i in &cov {
                owner[i] = Some(pieces.len());
            }
            pieces.push(Piece {
                key: g.clone(),
                cells: cov,
            });
        }
        for seed in 0..n {
            if owner[seed].is_some() {
                continue;
            }
            let id = pieces.len();
            let mut key = FragmentKey::from_cell(&self.cells[seed]);
            owner[seed] = Some(id);
            let mut members = vec![seed];
            for c in seed + 1..n {
                if owner[c].is_some() {
                    continue;
                }
                let g = key.generalize(&FragmentKey::from_cell(&self.cells[c]));
                let cov = self.covered(&g);
                if cov.iter().any(|&i| owner[i].is_some_and(|o| o != id)) {
                    continue;
                }
                for &i in &cov {
                    if owner[i].is_none() {
                        owner[i] = Some(id);
                        members.push(i);
                    }
                }
                key = g;
            }
            members.sort_unstable();
            pieces.push(Piece { key, cells: members });
        }
        pieces
    }

    /// Best merge candidate: the generalization of two pieces together with
    /// every piece it touches, provided each touched piece lies entirely
    /// inside it. Returns (combined cardinality, merged piece indices, key).
    pub fn best_merge(&self, pieces: &[Piece]) -> Option<(u64, Vec<usize>, FragmentKey)> {
        let mut best: Option<(u64, Vec<usize>, FragmentKey)> = None;
        for a in 0..pieces.len() {
            for b in a + 1..pieces.len() {
                let g = pieces[a].key.generalize(&pieces[b].key);
                let mut members = Vec::new();
                let mut ok = true;
                for (k, p) in pieces.iter().enumerate() {
                    let inside = p.cells.iter().filter(|&&i| g.covers_unchecked(&self.cells[i])).count();
                    if inside == p.cells.len() {
                        members.push(k);
                    } else if inside > 0 {
                        ok = false;
                        break;
                    }
                }
                if !ok {
                    continue;
                }
                let card: u64 = members.iter().map(|&k| self.cardinality(&pieces[k])).sum();
                if best.as_ref().map_or(true, |(c, m, _)| (card, members.len()) < (*c, m.len())) {
                    best = Some((card, members, g));
                }
            }
        }
        best
    }
}

/// Replaces the listed pieces with one piece under `key`.
pub fn apply_merge(pieces: &mut Vec<Piece>, members: &[usize], key: FragmentKey) {
    let mut cells = Vec::new();
    let mut at = usize::MAX;
    for &k in members.iter().rev() {
        cells.extend(pieces.remove(k).cells);
        at = k;
    }
    cells.sort_unstable();
    pieces.insert(at.min(pieces.len()), Piece { key, cells });
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fragmodel::satisfiable_cells;
    use crate::value::Value;
    use crate::workload::{AtomicPredicate, CmpOp, PredicateSet};

    fn slice(m: usize) -> Slice {
        let pset = PredicateSet::from_predicates(
            "r",
            (0..m)
                .map(|i| AtomicPredicate::new("r", format!("a{i}"), CmpOp::Lt, Value::Integer(5)))
                .collect(),
        );
        let cells = satisfiable_cells(&pset).unwrap();
        let cards = vec![1; cells.len()];
        Slice {
            relation: "r".into(),
            pset,
            start: 0,
            len: m,
            cells,
            cards,
        }
    }

    fn keys(s: &[&str]) -> Vec<FragmentKey> {
        s.iter().map(|k| k.parse().unwrap()).collect()
    }

    fn decoded(s: &Slice, genes: &[&str]) -> Vec<String> {
        let mut out: Vec<String> = s.decode(&keys(genes)).iter().map(|p| p.key.to_string()).collect();
        out.sort();
        out
    }

    #[test]
    fn claiming_and_remainders() {
        assert_eq!(decoded(&slice(1), &["1", "0"]), vec!["0", "1"]);
        assert_eq!(decoded(&slice(2), &["12", "11"]), vec!["02", "12"]);
        assert_eq!(decoded(&slice(2), &[]), vec!["22"]);
        // the remainder never swallows a claimed cell
        let d = decoded(&slice(2), &["11"]);
        assert_eq!(d.len(), 3);
        assert!(d.contains(&"11".to_string()));
        assert!(!d.contains(&"22".to_string()));
    }

    #[test]
    fn merging_respects_containment() {
        let s = slice(2);
        let mut pieces = s.decode(&keys(&["11", "10", "01", "00"]));
        let (card, members, key) = s.best_merge(&pieces).unwrap();
        assert_eq!(card, 2);
        assert_eq!(members.len(), 2);
        apply_merge(&mut pieces, &members, key);
        assert_eq!(pieces.len(), 3);
        let total: usize = pieces.iter().map(|p| p.cells.len()).sum();
        assert_eq!(total, 4);
    }
}
