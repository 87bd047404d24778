//! External clustering metrics: accuracy under the best one-to-one
//! cluster→label mapping, and normalized mutual information.

use std::collections::{BTreeMap, BTreeSet};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Counts of (predicted cluster, true label) pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    /// `counts[p][t]`, rows follow `pred_labels`, columns `true_labels`.
    counts: Vec<Vec<u64>>,
    pred_labels: Vec<usize>,
    true_labels: Vec<usize>,
    total: u64,
}

impl ContingencyTable {
    pub fn new(pred: &[usize], truth: &[usize]) -> Result<Self> {
        if pred.len() != truth.len() {
            return Err(Error::Input(format!(
                "prediction has {} labels, ground truth has {}",
                pred.len(),
                truth.len()
            )));
        }
        if pred.is_empty() {
            return Err(Error::Input("metrics need at least one point".into()));
        }
        let index = |labels: &[usize]| {
            let sorted: Vec<usize> = labels.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
            let map: BTreeMap<usize, usize> = sorted.iter().enumerate().map(|(i, &l)| (l, i)).collect();
            (sorted, map)
        };
        let (pred_labels, pred_index) = index(pred);
        let (true_labels, true_index) = index(truth);
        let mut counts = vec![vec![0u64; true_labels.len()]; pred_labels.len()];
        for (p, t) in pred.iter().zip(truth) {
            counts[pred_index[p]][true_index[t]] += 1;
        }
        Ok(Self {
            counts,
            pred_labels,
            true_labels,
            total: pred.len() as u64,
        })
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn pred_labels(&self) -> &[usize] {
        &self.pred_labels
    }

    pub fn true_labels(&self) -> &[usize] {
        &self.true_labels
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    fn row_sums(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    fn col_sums(&self) -> Vec<u64> {
        (0..self.true_labels.len())
            .map(|t| self.counts.iter().map(|r| r[t]).sum())
            .collect()
    }
}

/// Minimum-cost perfect matching on a square cost matrix.
///
/// Returns `perm` with row `i` matched to column `perm[i]`. O(n³) shortest
/// augmenting path with row/column potentials.
pub fn hungarian(cost: &Array2<f64>) -> Result<Vec<usize>> {
    let n = cost.nrows();
    if cost.ncols() != n {
        return Err(Error::Input(format!(
            "assignment needs a square cost matrix, got {}×{}",
            n,
            cost.ncols()
        )));
    }
    if cost.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("cost matrix has non-finite entries".into()));
    }
    if n == 0 {
        return Ok(Vec::new());
    }

    // 1-based with a virtual column 0, following the classic formulation.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut matched_row = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for row in 1..=n {
        matched_row[0] = row;
        let mut col0 = 0usize;
        let mut min_slack = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[col0] = true;
            let i0 = matched_row[col0];
            let mut delta = f64::INFINITY;
            let mut col1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let slack = cost[[i0 - 1, j - 1]] - u[i0] - v[j];
                if slack < min_slack[j] {
                    min_slack[j] = slack;
                    way[j] = col0;
                }
                if min_slack[j] < delta {
                    delta = min_slack[j];
                    col1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[matched_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_slack[j] -= delta;
                }
            }
            col0 = col1;
            if matched_row[col0] == 0 {
                break;
            }
        }
        loop {
            let col1 = way[col0];
            matched_row[col0] = matched_row[col1];
            col0 = col1;
            if col0 == 0 {
                break;
            }
        }
    }

    let mut perm = vec![0usize; n];
    for j in 1..=n {
        perm[matched_row[j] - 1] = j - 1;
    }
    Ok(perm)
}

/// Best one-to-one mapping from predicted clusters to true labels, as
/// `(cluster, label)` pairs, and the number of agreeing points.
pub fn best_mapping(table: &ContingencyTable) -> Result<(Vec<(usize, usize)>, u64)> {
    let rows = table.pred_labels.len();
    let cols = table.true_labels.len();
    let n = rows.max(cols);
    // padded cells carry zero benefit
    let mut cost = Array2::zeros((n, n));
    for (p, row) in table.counts.iter().enumerate() {
        for (t, &c) in row.iter().enumerate() {
            cost[[p, t]] = -(c as f64);
        }
    }
    let perm = hungarian(&cost)?;
    let mut mapping = Vec::new();
    let mut hits = 0;
    for (p, &t) in perm.iter().enumerate() {
        if p < rows && t < cols {
            mapping.push((table.pred_labels[p], table.true_labels[t]));
            hits += table.counts[p][t];
        }
    }
    Ok((mapping, hits))
}

/// Fraction of points whose cluster maps to their label under the best
/// one-to-one mapping.
pub fn accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    let table = ContingencyTable::new(pred, truth)?;
    let (_, hits) = best_mapping(&table)?;
    Ok(hits as f64 / table.total as f64)
}

fn entropy(counts: &[u64], total: f64) -> f64 {
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total;
            -p * p.ln()
        })
        .sum()
}

/// `2·I(C;Y) / (H(C) + H(Y))` with natural-log plug-in entropies.
///
/// Two constant partitions are identical and score 1.
pub fn nmi(pred: &[usize], truth: &[usize]) -> Result<f64> {
    let table = ContingencyTable::new(pred, truth)?;
    Ok(nmi_from_table(&table))
}

pub fn nmi_from_table(table: &ContingencyTable) -> f64 {
    let total = table.total as f64;
    let rows = table.row_sums();
    let cols = table.col_sums();
    let h_pred = entropy(&rows, total);
    let h_true = entropy(&cols, total);
    if h_pred + h_true == 0.0 {
        return 1.0;
    }
    let mut mi = 0.0;
    for (p, row) in table.counts.iter().enumerate() {
        for (t, &c) in row.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let joint = c as f64 / total;
            mi += joint * (c as f64 * total / (rows[p] as f64 * cols[t] as f64)).ln();
        }
    }
    (2.0 * mi / (h_pred + h_true)).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub acc: f64,
    pub nmi: f64,
    /// `(cluster, label)` pairs of the optimal matching.
    pub mapping: Vec<(usize, usize)>,
}

pub fn evaluate(pred: &[usize], truth: &[usize]) -> Result<MetricsReport> {
    let table = ContingencyTable::new(pred, truth)?;
    let (mapping, hits) = best_mapping(&table)?;
    Ok(MetricsReport {
        acc: hits as f64 / table.total as f64,
        nmi: nmi_from_table(&table),
        mapping,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn identity_dominant() {
        let cost = array![[0.0, 5.0, 5.0], [5.0, 0.0, 5.0], [5.0, 5.0, 0.0]];
        assert_eq!(hungarian(&cost).unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn anti_diagonal() {
        assert_eq!(hungarian(&array![[1.0, 0.0], [0.0, 1.0]]).unwrap(), vec![1, 0]);
    }

    #[test]
    fn hungarian_errors() {
        assert!(hungarian(&array![[1.0, f64::NAN], [0.0, 1.0]]).is_err());
        assert!(hungarian(&Array2::zeros((2, 3))).is_err());
        assert!(hungarian(&Array2::zeros((0, 0))).unwrap().is_empty());
    }

    #[test]
    fn perfect_and_renamed() {
        let truth = [0, 0, 1, 1, 2, 2];
        assert_eq!(accuracy(&truth, &truth).unwrap(), 1.0);
        assert_eq!(accuracy(&[7, 7, 3, 3, 5, 5], &truth).unwrap(), 1.0);
        assert!((nmi(&[7, 7, 3, 3, 5, 5], &truth).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_prediction() {
        let truth = [0, 1, 0, 1];
        assert_eq!(nmi(&[4, 4, 4, 4], &truth).unwrap(), 0.0);
        assert_eq!(accuracy(&[4, 4, 4, 4], &truth).unwrap(), 0.5);
        assert_eq!(nmi(&[1, 1], &[0, 0]).unwrap(), 1.0);
    }

    #[test]
    fn unequal_cluster_counts() {
        // three clusters against two labels: one cluster stays unmatched
        let pred = [0, 0, 1, 1, 2, 2];
        let truth = [0, 0, 1, 1, 1, 1];
        assert!((accuracy(&pred, &truth).unwrap() - 4.0 / 6.0).abs() < 1e-15);
        let report = evaluate(&pred, &truth).unwrap();
        assert_eq!(report.mapping.len(), 2);
    }

    #[test]
    fn length_mismatch() {
        assert!(matches!(accuracy(&[0, 1], &[0]), Err(Error::Input(_))));
        assert!(matches!(nmi(&[0], &[0, 1]), Err(Error::Input(_))));
        assert!(matches!(nmi(&[], &[]), Err(Error::Input(_))));
    }

    #[test]
    fn contingency_totals() {
        let t = ContingencyTable::new(&[0, 1, 1, 2], &[5, 5, 6, 6]).unwrap();
        let sum: u64 = t.counts().iter().flatten().sum();
        assert_eq!(sum, t.total());
        assert_eq!(t.true_labels(), &[5, 6]);
    }
}
