use crate::error::{Error, Result};

/// Relative residual below which a column counts as an exact linear
/// combination of the others.
const COLLINEAR_TOL: f64 = 1e-10;

/// Variance inflation factors for the columns of an `n × p` design
/// (no intercept column; the auxiliary regressions include one).
///
/// `columns[j]` holds predictor `j`. Each VIF is `S_jj / RSS_j`, where `S` is
/// the centered cross-product matrix and `RSS_j` the residual of column `j`
/// after eliminating every other column from `S`. Pivots that are already
/// explained by earlier columns are skipped, so exact collinearity yields
/// `f64::INFINITY` for the affected columns instead of a singular solve.
pub fn vif(columns: &[Vec<f64>]) -> Result<Vec<f64>> {
    let p = columns.len();
    if p < 2 {
        return Err(Error::InvalidInput(format!(
            "VIF needs at least two predictors, got {p}"
        )));
    }
    let n = columns[0].len();
    if columns.iter().any(|c| c.len() != n) {
        return Err(Error::InvalidInput("design columns differ in length".into()));
    }
    if n <= p {
        return Err(Error::InvalidInput(format!(
            "VIF needs more rows than predictors ({n} <= {p})"
        )));
    }

    let centered: Vec<Vec<f64>> = columns
        .iter()
        .map(|c| {
            let m = c.iter().sum::<f64>() / n as f64;
            c.iter().map(|v| v - m).collect()
        })
        .collect();
    let mut s = vec![vec![0.0; p]; p];
    for i in 0..p {
        for j in i..p {
            let v: f64 = centered[i].iter().zip(&centered[j]).map(|(a, b)| a * b).sum();
            s[i][j] = v;
            s[j][i] = v;
        }
    }
    if let Some(j) = (0..p).find(|&j| s[j][j] == 0.0) {
        return Err(Error::Degenerate(format!("column {j} has zero variance")));
    }

    let mut out = Vec::with_capacity(p);
    for j in 0..p {
        let mut a = s.clone();
        for k in (0..p).filter(|&k| k != j) {
            let pivot = a[k][k];
            if pivot <= COLLINEAR_TOL * s[k][k] {
                continue;
            }
            for r in (0..p).filter(|&r| r != k) {
                let f = a[r][k] / pivot;
                if f == 0.0 {
                    continue;
                }
                for c in (0..p).filter(|&c| c != k) {
                    a[r][c] -= f * a[k][c];
                }
            }
            for c in 0..p {
                a[k][c] = 0.0;
                a[c][k] = 0.0;
            }
        }
        let rss = a[j][j];
        out.push(if rss <= COLLINEAR_TOL * s[j][j] {
            f64::INFINITY
        } else {
            (s[j][j] / rss).max(1.0)
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orthogonal_columns() {
        let x1 = vec![1.0, -1.0, 1.0, -1.0];
        let x2 = vec![1.0, 1.0, -1.0, -1.0];
        let v = vif(&[x1, x2]).unwrap();
        assert!((v[0] - 1.0).abs() < 1e-12 && (v[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn duplicated_column_is_infinite() {
        let x1 = vec![1.0, 2.0, 4.0, 3.0, 7.0];
        let x3 = vec![0.0, 1.0, 0.0, 1.0, 1.0];
        let v = vif(&[x1.clone(), x1, x3]).unwrap();
        assert!(v[0].is_infinite() && v[1].is_infinite());
        assert!(v[2].is_finite());
    }

    #[test]
    fn two_columns_closed_form() {
        // For two predictors VIF = 1 / (1 - r^2).
        let x1 = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let x2 = vec![1.2, 1.9, 3.4, 3.8, 5.3, 5.9];
        let r = crate::stats::pearson(&x1, &x2).unwrap().r;
        let v = vif(&[x1, x2]).unwrap();
        let expected = 1.0 / (1.0 - r * r);
        assert!((v[0] - expected).abs() < 1e-9 * expected);
        assert!((v[1] - expected).abs() < 1e-9 * expected);
    }

    #[test]
    fn single_predictor_rejected() {
        assert!(vif(&[vec![1.0, 2.0, 3.0]]).is_err());
    }
}
