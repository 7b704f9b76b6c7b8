//! Dense Bunch-Kaufman `P^T A P = L D L^T` with 1x1 and 2x2 pivots.

use nalgebra::DMatrix;

use super::PivotBlock;
use crate::error::{Error, Result};

pub(crate) struct DenseBk {
    pub perm: Vec<usize>,
    pub l: DMatrix<f64>,
    pub blocks: Vec<PivotBlock>,
}

pub(crate) fn factor(a: &DMatrix<f64>, tol: f64) -> Result<DenseBk> {
    let n = a.nrows();
    let alpha = (1.0 + 17f64.sqrt()) / 8.0;
    let mut w = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut blocks = Vec::new();
    let mut k = 0;
    while k < n {
        let absakk = w[(k, k)].abs();
        let (imax, colmax) = ((k + 1)..n)
            .map(|i| (i, w[(i, k)].abs()))
            .fold((k, 0.0f64), |best, cur| if cur.1 > best.1 { cur } else { best });
        if absakk.max(colmax) < tol {
            return Err(Error::Factorization { pivot: k });
        }
        let (kstep, kp) = if absakk >= alpha * colmax {
            (1, k)
        } else {
            let rowmax = (k..n).filter(|&j| j != imax).map(|j| w[(imax, j)].abs()).fold(0.0f64, f64::max);
            if absakk * rowmax >= alpha * colmax * colmax {
                (1, k)
            } else if w[(imax, imax)].abs() >= alpha * rowmax {
                (1, imax)
            } else {
                (2, imax)
            }
        };
        let kk = k + kstep - 1;
        if kp != kk {
            w.swap_rows(kk, kp);
            w.swap_columns(kk, kp);
            perm.swap(kk, kp);
        }
        if kstep == 1 {
            let dkk = w[(k, k)];
            if dkk.abs() < tol {
                return Err(Error::Factorization { pivot: k });
            }
            for j in (k + 1)..n {
                let ljk = w[(j, k)] / dkk;
                for i in j..n {
                    let v = w[(i, j)] - w[(i, k)] * ljk;
                    w[(i, j)] = v;
                    w[(j, i)] = v;
                }
            }
            for i in (k + 1)..n {
                w[(i, k)] /= dkk;
            }
            blocks.push(PivotBlock::One(dkk));
        } else {
            let (d11, d21, d22) = (w[(k, k)], w[(k + 1, k)], w[(k + 1, k + 1)]);
            let det = d11 * d22 - d21 * d21;
            if det.abs() < tol * d11.abs().max(d21.abs()).max(d22.abs()) {
                return Err(Error::Factorization { pivot: k });
            }
            let rows = (k + 2)..n;
            let l1: Vec<f64> = rows.clone().map(|i| (d22 * w[(i, k)] - d21 * w[(i, k + 1)]) / det).collect();
            let l2: Vec<f64> = rows.clone().map(|i| (d11 * w[(i, k + 1)] - d21 * w[(i, k)]) / det).collect();
            for (jj, j) in rows.clone().enumerate() {
                let (wj1, wj2) = (w[(j, k)], w[(j, k + 1)]);
                for (ii, i) in rows.clone().enumerate().skip(jj) {
                    let v = w[(i, j)] - l1[ii] * wj1 - l2[ii] * wj2;
                    w[(i, j)] = v;
                    w[(j, i)] = v;
                }
            }
            for (ii, i) in rows.enumerate() {
                w[(i, k)] = l1[ii];
                w[(i, k + 1)] = l2[ii];
            }
            blocks.push(PivotBlock::Two { a: d11, b: d21, c: d22 });
        }
        k += kstep;
    }

    let mut l = DMatrix::identity(n, n);
    let mut pos = 0;
    for blk in &blocks {
        let size = blk.size();
        for j in pos..pos + size {
            for i in (pos + size)..n {
                l[(i, j)] = w[(i, j)];
            }
        }
        pos += size;
    }
    Ok(DenseBk { perm, l, blocks })
}
