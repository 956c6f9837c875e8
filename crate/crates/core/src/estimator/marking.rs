use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

/// Bulk marking: the fewest cells carrying a fraction `theta` of the total
/// indicator mass.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarkStrategy {
    pub theta: f64,
}

impl Default for MarkStrategy {
    fn default() -> Self {
        Self { theta: 0.3 }
    }
}

/// `indicators` holds `(cell, value ≥ 0)`. Largest first, ties by cell id.
pub fn mark(indicators: &[(usize, f64)], strategy: MarkStrategy) -> BTreeSet<usize> {
    let total: f64 = indicators.iter().map(|e| e.1).sum();
    let mut order: Vec<(usize, f64)> = indicators.to_vec();
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let goal = strategy.theta * total;
    let mut marked = BTreeSet::new();
    let mut acc = 0.0;
    for (c, v) in order {
        if acc >= goal && !marked.is_empty() {
            break;
        }
        if total == 0.0 {
            break;
        }
        marked.insert(c);
        acc += v;
    }
    marked
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_half() {
        let ind: Vec<_> = (0..7).map(|c| (c, 1.0)).collect();
        let m = mark(&ind, MarkStrategy { theta: 0.5 });
        assert_eq!(m, (0..4).collect());
    }

    #[test]
    fn dominant_cell() {
        let mut ind: Vec<_> = (0..100).map(|c| (c, 0.01 / 99.0)).collect();
        ind[42].1 = 0.99;
        assert_eq!(
            mark(&ind, MarkStrategy { theta: 0.3 }),
            BTreeSet::from([42])
        );
    }

    #[test]
    fn everything_and_nothing() {
        let ind: Vec<_> = (0..5).map(|c| (c, c as f64 + 1.0)).collect();
        assert_eq!(mark(&ind, MarkStrategy { theta: 1.0 }).len(), 5);
        let zero: Vec<_> = (0..5).map(|c| (c, 0.0)).collect();
        assert!(mark(&zero, MarkStrategy { theta: 0.5 }).is_empty());
    }
}
