//! Causal select / aggregate / selector-width over exact values.
//!
//! A selector row for query `q` only holds keys `0..=q`, so no query can see
//! a future key.

use num_rational::Rational64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Selector {
    rows: Vec<Vec<bool>>,
}

impl Selector {
    pub fn from_rows(rows: Vec<Vec<bool>>) -> Self {
        for (q, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), q + 1, "selector row {q} is not causal");
        }
        Selector { rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, q: usize, k: usize) -> bool {
        k <= q && self.rows[q][k]
    }

    pub fn row(&self, q: usize) -> &[bool] {
        &self.rows[q]
    }

    pub fn and(&self, other: &Selector) -> Selector {
        assert_eq!(self.len(), other.len());
        let rows = self
            .rows
            .iter()
            .zip(&other.rows)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| *x && *y).collect())
            .collect();
        Selector { rows }
    }

    /// Checks that no entry attends to a future key.
    pub fn is_causal(&self) -> bool {
        self.rows.iter().enumerate().all(|(q, r)| r.len() == q + 1)
    }
}

/// One query row: `pred(query, keys[k])` for `k <= q`.
pub fn select_row<K, Q>(keys: &[K], query: &Q, q: usize, pred: impl Fn(&Q, &K) -> bool) -> Vec<bool> {
    keys[..=q].iter().map(|k| pred(query, k)).collect()
}

pub fn select<K, Q>(keys: &[K], queries: &[Q], pred: impl Fn(&Q, &K) -> bool) -> Selector {
    assert_eq!(keys.len(), queries.len(), "keys and queries differ in length");
    let rows = queries.iter().enumerate().map(|(q, query)| select_row(keys, query, q, &pred)).collect();
    Selector { rows }
}

/// Mean of the selected values; zero when nothing is selected.
pub fn mean_row(row: &[bool], values: &[Rational64]) -> Rational64 {
    let mut sum = Rational64::from_integer(0);
    let mut n = 0i64;
    for (k, on) in row.iter().enumerate() {
        if *on {
            sum += values[k];
            n += 1;
        }
    }
    if n == 0 {
        sum
    } else {
        sum / n
    }
}

/// Value at the earliest selected key.
pub fn one_hot_row<'a, T>(row: &[bool], values: &'a [T]) -> Option<&'a T> {
    row.iter().position(|on| *on).map(|k| &values[k])
}

pub fn width_row(row: &[bool], max_width: Option<usize>) -> usize {
    let w = row.iter().filter(|on| **on).count();
    max_width.map_or(w, |m| w.min(m))
}

/// Mean (or earliest-selected with `one_hot`) aggregation per query.
/// Queries that select nothing read zero.
pub fn aggregate(sel: &Selector, values: &[Rational64], one_hot: bool) -> Vec<Rational64> {
    assert_eq!(sel.len(), values.len(), "selector and values differ in length");
    (0..sel.len())
        .map(|q| {
            let row = sel.row(q);
            if one_hot {
                one_hot_row(row, values).copied().unwrap_or_else(|| Rational64::from_integer(0))
            } else {
                mean_row(row, values)
            }
        })
        .collect()
}

/// Categorical one-hot aggregation; `None` where nothing is selected.
pub fn aggregate_one_hot<T: Clone>(sel: &Selector, values: &[T]) -> Vec<Option<T>> {
    (0..sel.len()).map(|q| one_hot_row(sel.row(q), values).cloned()).collect()
}

pub fn selector_width(sel: &Selector, max_width: Option<usize>) -> Vec<usize> {
    (0..sel.len()).map(|q| width_row(sel.row(q), max_width)).collect()
}
