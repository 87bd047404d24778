use std::fmt::Write;

use deepkm::Error;
use ndarray::{Array1, Array2, ArrayView2, Axis};

/// Points on the top two principal axes.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    /// `N × 2` coordinates.
    pub coords: Array2<f64>,
    pub pred: Vec<usize>,
    pub truth: Option<Vec<usize>>,
    /// Variances along the two axes (covariance eigenvalues, `1/(N−1)` scaling).
    pub variances: [f64; 2],
    /// `l × 2` unit axes, one per column.
    pub axes: Array2<f64>,
}

impl Projection {
    /// Tab-separated `x y pred [truth]` with a header row.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from(if self.truth.is_some() { "x\ty\tpred\ttruth\n" } else { "x\ty\tpred\n" });
        for (i, row) in self.coords.rows().into_iter().enumerate() {
            let _ = write!(out, "{}\t{}\t{}", row[0], row[1], self.pred[i]);
            if let Some(t) = &self.truth {
                let _ = write!(out, "\t{}", t[i]);
            }
            out.push('\n');
        }
        out
    }
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in descending order (stable on ties) and the matching
/// unit eigenvectors as columns.
pub fn symmetric_eigen(matrix: &Array2<f64>) -> (Array1<f64>, Array2<f64>) {
    let n = matrix.nrows();
    let mut a = matrix.clone();
    let mut v = Array2::<f64>::eye(n);
    let scale = a.iter().map(|x| x * x).sum::<f64>().max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|p| (0..n).filter(move |&q| q != p).map(move |q| (p, q))).map(|(p, q)| a[[p, q]] * a[[p, q]]).sum();
        if off <= 1e-30 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[[p, q]];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[[k, p]], a[[k, q]]);
                    a[[k, p]] = c * akp - s * akq;
                    a[[k, q]] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[[p, k]], a[[q, k]]);
                    a[[p, k]] = c * apk - s * aqk;
                    a[[q, k]] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[[k, p]], v[[k, q]]);
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[[j, j]].total_cmp(&a[[i, i]]));
    let values = order.iter().map(|&i| a[[i, i]]).collect();
    let vectors = v.select(Axis(1), &order);
    (values, vectors)
}

/// Flips `axis` so its largest-magnitude entry is positive (first on ties).
fn orient(mut axis: ndarray::ArrayViewMut1<'_, f64>) {
    let mut best = 0;
    for (i, v) in axis.iter().enumerate() {
        if v.abs() > axis[best].abs() {
            best = i;
        }
    }
    if axis[best] < 0.0 {
        axis.mapv_inplace(|v| -v);
    }
}

/// Projects centered `latents` onto their top two principal axes.
///
/// One-dimensional inputs get a zero second coordinate.
pub fn project_2d(
    latents: ArrayView2<'_, f64>,
    pred: &[usize],
    truth: Option<&[usize]>,
) -> Result<Projection, Error> {
    let n = latents.nrows();
    if n < 2 {
        return Err(Error::Input(format!("projection needs at least 2 points, got {n}")));
    }
    if pred.len() != n || truth.is_some_and(|t| t.len() != n) {
        return Err(Error::Input("label count does not match the number of points".into()));
    }
    let mean = latents.mean_axis(Axis(0)).expect("n ≥ 2");
    let centered = &latents - &mean;
    let cov = centered.t().dot(&centered) / (n as f64 - 1.0);
    let (values, vectors) = symmetric_eigen(&cov);
    let l = latents.ncols();
    let mut axes = Array2::zeros((l, 2));
    for c in 0..l.min(2) {
        axes.column_mut(c).assign(&vectors.column(c));
        orient(axes.column_mut(c));
    }
    let coords = centered.dot(&axes);
    let variances = [values[0].max(0.0), if l > 1 { values[1].max(0.0) } else { 0.0 }];
    Ok(Projection {
        coords,
        pred: pred.to_vec(),
        truth: truth.map(<[usize]>::to_vec),
        variances,
        axes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn diagonal_matrix() {
        let (vals, vecs) = symmetric_eigen(&array![[1.0, 0.0], [0.0, 3.0]]);
        assert_eq!(vals.to_vec(), vec![3.0, 1.0]);
        assert_eq!(vecs[[1, 0]].abs(), 1.0);
    }

    #[test]
    fn too_few_points() {
        assert!(matches!(project_2d(array![[1.0, 2.0]].view(), &[0], None), Err(Error::Input(_))));
    }

    #[test]
    fn rank_one_has_flat_second_axis() {
        let pts = array![[1.0, 2.0, 3.0], [2.0, 4.0, 6.0], [-1.0, -2.0, -3.0], [0.5, 1.0, 1.5]];
        let p = project_2d(pts.view(), &[0, 0, 1, 1], None).unwrap();
        assert!(p.coords.column(1).iter().all(|v| v.abs() < 1e-9));
        // largest loading positive: x grows with the input
        assert!(p.coords[[1, 0]] > p.coords[[0, 0]]);
    }

    #[test]
    fn tsv_layout() {
        let pts = array![[0.0, 0.0], [2.0, 0.0]];
        let p = project_2d(pts.view(), &[1, 0], Some(&[0, 0])).unwrap();
        assert_eq!(p.to_tsv(), "x\ty\tpred\ttruth\n-1\t0\t1\t0\n1\t0\t0\t0\n");
    }
}
