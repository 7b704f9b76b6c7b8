//! Dense spectral diagnostics for desk-scale matrices.
//!
//! Everything here works on `nalgebra` dense matrices and never touches the
//! sparse path, so it can serve as an independent oracle for the solver.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};

/// Default relative gap used to group eigenvalues into clusters.
pub const CLUSTER_GAP: f64 = 1e-8;

const MAX_SWEEPS: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub value: f64,
    pub multiplicity: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    /// Sorted ascending.
    pub eigenvalues: Vec<f64>,
    pub source_dim: usize,
    pub cluster_report: Vec<Cluster>,
}

impl Spectrum {
    pub fn from_eigenvalues(mut eigenvalues: Vec<f64>) -> Self {
        eigenvalues.sort_by(f64::total_cmp);
        let cluster_report = clusters(&eigenvalues, CLUSTER_GAP);
        Self { source_dim: eigenvalues.len(), eigenvalues, cluster_report }
    }

    /// Eigenvalues within `tol` (absolute) of `value`.
    pub fn count_near(&self, value: f64, tol: f64) -> usize {
        self.eigenvalues.iter().filter(|&&l| (l - value).abs() <= tol).count()
    }

    pub fn distinct(&self) -> usize {
        self.cluster_report.len()
    }

    pub fn min(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(f64::NAN)
    }

    pub fn max(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(f64::NAN)
    }

    /// Writes `index,eigenvalue` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "index,eigenvalue")?;
        for (i, l) in self.eigenvalues.iter().enumerate() {
            writeln!(w, "{i},{l:e}")?;
        }
        Ok(())
    }
}

/// Groups sorted eigenvalues: a new cluster starts whenever the gap to the
/// previous eigenvalue exceeds `rel_gap * max|lambda|`.
pub fn clusters(sorted: &[f64], rel_gap: f64) -> Vec<Cluster> {
    let scale = sorted.iter().fold(0.0f64, |m, l| m.max(l.abs()));
    let gap = rel_gap * scale;
    let mut out: Vec<(f64, usize)> = Vec::new();
    let mut prev = f64::NEG_INFINITY;
    for &l in sorted {
        match out.last_mut() {
            Some((sum, count)) if l - prev <= gap => {
                *sum += l;
                *count += 1;
            }
            _ => out.push((l, 1)),
        }
        prev = l;
    }
    out.into_iter().map(|(sum, count)| Cluster { value: sum / count as f64, multiplicity: count }).collect()
}

#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    pub spectrum: Spectrum,
    /// Column `j` is the eigenvector of `spectrum.eigenvalues[j]`.
    pub eigenvectors: DMatrix<f64>,
}

fn check_square(a: &DMatrix<f64>) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(dim_err(format!("expected a square matrix, got {}x{}", a.nrows(), a.ncols())));
    }
    Ok(())
}

fn off_diagonal_norm(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut s = 0.0;
    for j in 0..n {
        for i in 0..n {
            if i != j {
                s += a[(i, j)] * a[(i, j)];
            }
        }
    }
    s.sqrt()
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Only the lower
/// triangle is trusted; the input is symmetrized first.
pub fn sym_eig(a: &DMatrix<f64>) -> Result<EigenDecomposition> {
    check_square(a)?;
    let n = a.nrows();
    let mut w = DMatrix::from_fn(n, n, |i, j| if i >= j { a[(i, j)] } else { a[(j, i)] });
    let mut v = DMatrix::<f64>::identity(n, n);
    let scale = w.norm();
    let target = 1e-14 * scale;
    let mut converged = scale == 0.0;
    let mut sweeps = 0;
    while !converged {
        if off_diagonal_norm(&w) <= target {
            converged = true;
            break;
        }
        if sweeps == MAX_SWEEPS {
            break;
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = w[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let tau = (w[(q, q)] - w[(p, p)]) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + tau.hypot(1.0));
                let t = if tau == 0.0 { 1.0 } else { t };
                let c = 1.0 / t.hypot(1.0);
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (w[(k, p)], w[(k, q)]);
                    w[(k, p)] = c * akp - s * akq;
                    w[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (w[(p, k)], w[(q, k)]);
                    w[(p, k)] = c * apk - s * aqk;
                    w[(q, k)] = s * apk + c * aqk;
                }
                w[(p, q)] = 0.0;
                w[(q, p)] = 0.0;
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        return Err(Error::NoConvergence { sweeps });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| w[(i, i)].total_cmp(&w[(j, j)]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| w[(i, i)]).collect();
    let eigenvectors = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok(EigenDecomposition { spectrum: Spectrum::from_eigenvalues(eigenvalues), eigenvectors })
}

/// `|lambda|_max / |lambda|_min`; infinite when the smallest magnitude is
/// below `1e-300`.
pub fn condition_number(a: &DMatrix<f64>) -> Result<f64> {
    let eig = sym_eig(a)?;
    let mags: Vec<f64> = eig.spectrum.eigenvalues.iter().map(|l| l.abs()).collect();
    let lo = mags.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = mags.iter().copied().fold(0.0, f64::max);
    if lo < 1e-300 {
        return Ok(f64::INFINITY);
    }
    Ok(hi / lo)
}

fn spd_inverse(a: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    a.clone()
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::InvalidMatrix(format!("{what} is not symmetric positive definite")))
}

/// `A^T (A H^{-1} A^T)^{-1} A`.
pub fn projection_term(h: &DMatrix<f64>, a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_square(h)?;
    if a.ncols() != h.nrows() {
        return Err(dim_err("A must have as many columns as H"));
    }
    let hinv = spd_inverse(h, "H")?;
    let s = a * &hinv * a.transpose();
    let sinv = spd_inverse(&s, "A H^-1 A^T")?;
    Ok(a.transpose() * sinv * a)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankLemmaReport {
    pub n: usize,
    pub m1: usize,
    /// Eigenvalues of `Hbar_A` above the threshold.
    pub rank_hbar: usize,
    /// Eigenvalues of `H - Hbar_A` above the threshold.
    pub rank_complement: usize,
    /// `||(H - Hbar_A) H^{-1} A^T||_F / ||H||_2`.
    pub nullspace_residual: f64,
    pub pass: bool,
}

/// Counts the numerically nonzero eigenvalues of `Hbar_A` and of
/// `H - Hbar_A` (threshold `tol * lambda_max(H)`) and checks that the columns
/// of `H^{-1} A^T` lie in the null space of `H - Hbar_A`.
pub fn check_rank_lemmas(h: &DMatrix<f64>, a: &DMatrix<f64>, tol: f64) -> Result<RankLemmaReport> {
    let (n, m1) = (h.nrows(), a.nrows());
    let hbar = projection_term(h, a)?;
    let diff = h - &hbar;
    let h_eig = sym_eig(h)?;
    let lmax = h_eig.spectrum.eigenvalues.iter().fold(0.0f64, |m, l| m.max(l.abs()));
    let thresh = tol * lmax;
    let count = |m: &DMatrix<f64>| -> Result<usize> {
        Ok(sym_eig(m)?.spectrum.eigenvalues.iter().filter(|l| l.abs() > thresh).count())
    };
    let rank_hbar = count(&hbar)?;
    let rank_complement = count(&diff)?;
    let basis = spd_inverse(h, "H")? * a.transpose();
    let nullspace_residual = (&diff * basis).norm() / lmax;
    let pass = rank_hbar <= m1 && rank_complement <= n.saturating_sub(m1) && nullspace_residual <= 1e-9;
    Ok(RankLemmaReport { n, m1, rank_hbar, rank_complement, nullspace_residual, pass })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreconditionedSpectrum {
    pub spectrum: Spectrum,
    /// Eigenvalues within `tol` of one.
    pub unit_count: usize,
}

/// Spectrum of `P^{-1/2} K P^{-1/2}` for symmetric `K` and SPD `P`.
pub fn preconditioned_spectrum(k: &DMatrix<f64>, p: &DMatrix<f64>, tol: f64) -> Result<PreconditionedSpectrum> {
    check_square(k)?;
    if p.shape() != k.shape() {
        return Err(dim_err("preconditioner and operator shapes differ"));
    }
    let pe = sym_eig(p)?;
    if pe.spectrum.min() <= 0.0 {
        return Err(Error::InvalidPreconditioner("P is not positive definite".into()));
    }
    let q = &pe.eigenvectors;
    let inv_sqrt = DVector::from_iterator(p.nrows(), pe.spectrum.eigenvalues.iter().map(|l| 1.0 / l.sqrt()));
    let p_inv_half = q * DMatrix::from_diagonal(&inv_sqrt) * q.transpose();
    let m = &p_inv_half * k * &p_inv_half;
    let m = (&m + m.transpose()) * 0.5;
    let spectrum = sym_eig(&m)?.spectrum;
    let unit_count = spectrum.count_near(1.0, tol);
    Ok(PreconditionedSpectrum { spectrum, unit_count })
}

/// Dense `F = [-H, A^T; A, 0]`.
pub fn dense_f(h: &DMatrix<f64>, a: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, m1) = (h.nrows(), a.nrows());
    let mut f = DMatrix::zeros(n + m1, n + m1);
    f.view_mut((0, 0), (n, n)).copy_from(&(-h));
    f.view_mut((n, 0), (m1, n)).copy_from(a);
    f.view_mut((0, n), (n, m1)).copy_from(&a.transpose());
    f
}

/// Dense `K_F = D - [C 0] F^{-1} [C^T; 0]`, with `F^{-1}` formed explicitly.
pub fn dense_kf(h: &DMatrix<f64>, a: &DMatrix<f64>, c: &DMatrix<f64>, d: &[f64]) -> Result<DMatrix<f64>> {
    let (n, m1, m2) = (h.nrows(), a.nrows(), c.nrows());
    if c.ncols() != n || d.len() != m2 {
        return Err(dim_err("K_F: C or D does not conform"));
    }
    let finv = dense_f(h, a).try_inverse().ok_or_else(|| Error::InvalidMatrix("F is singular".into()))?;
    let mut cz = DMatrix::zeros(m2, n + m1);
    cz.view_mut((0, 0), (m2, n)).copy_from(c);
    let kf = DMatrix::from_diagonal(&DVector::from_column_slice(d)) - &cz * finv * cz.transpose();
    Ok((&kf + kf.transpose()) * 0.5)
}

/// Dense `D + C H^{-1} C^T`.
pub fn dense_ph_exact(h: &DMatrix<f64>, c: &DMatrix<f64>, d: &[f64]) -> Result<DMatrix<f64>> {
    let hinv = spd_inverse(h, "H")?;
    let p = DMatrix::from_diagonal(&DVector::from_column_slice(d)) + c * hinv * c.transpose();
    Ok((&p + p.transpose()) * 0.5)
}

/// Dense `D + C diag(H)^{-1} C^T`.
pub fn dense_ph_diag(h: &DMatrix<f64>, c: &DMatrix<f64>, d: &[f64]) -> DMatrix<f64> {
    let dh = DVector::from_iterator(h.nrows(), h.diagonal().iter().map(|v| 1.0 / v));
    DMatrix::from_diagonal(&DVector::from_column_slice(d)) + c * DMatrix::from_diagonal(&dh) * c.transpose()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sym(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
        let b = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>() - 0.5);
        &b + b.transpose()
    }

    #[test]
    fn diagonal_sorted() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0, 2.0]));
        assert_eq!(sym_eig(&a).unwrap().spectrum.eigenvalues, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn swap_matrix() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let e = sym_eig(&a).unwrap().spectrum.eigenvalues;
        assert!((e[0] + 1.0).abs() < 1e-15 && (e[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn reconstruction_and_orthogonality() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for n in [1, 2, 10, 25] {
            let a = random_sym(&mut rng, n);
            let eig = sym_eig(&a).unwrap();
            let q = &eig.eigenvectors;
            let lam = DMatrix::from_diagonal(&DVector::from_vec(eig.spectrum.eigenvalues.clone()));
            assert!((q * lam * q.transpose() - &a).amax() <= 1e-10);
            assert!((q.transpose() * q - DMatrix::identity(n, n)).amax() <= 1e-10);
            let reference = a.clone().symmetric_eigen();
            let mut want: Vec<f64> = reference.eigenvalues.iter().copied().collect();
            want.sort_by(f64::total_cmp);
            for (x, y) in eig.spectrum.eigenvalues.iter().zip(&want) {
                assert!((x - y).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn zero_and_empty() {
        assert_eq!(sym_eig(&DMatrix::zeros(3, 3)).unwrap().spectrum.eigenvalues, vec![0.0; 3]);
        assert!(sym_eig(&DMatrix::zeros(0, 0)).unwrap().spectrum.eigenvalues.is_empty());
        assert!(sym_eig(&DMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn cluster_grouping() {
        let c = clusters(&[1.0, 1.0 + 1e-12, 2.0, 3.0, 3.0], CLUSTER_GAP);
        assert_eq!(c.len(), 3);
        assert_eq!(c[0].multiplicity, 2);
        assert_eq!(c[2].multiplicity, 2);
    }

    #[test]
    fn conditioning() {
        assert_eq!(condition_number(&DMatrix::identity(4, 4)).unwrap(), 1.0);
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1e6]));
        assert!((condition_number(&d).unwrap() - 1e6).abs() < 1e-6);
        let s = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0]));
        assert!(condition_number(&s).unwrap().is_infinite());
    }

    #[test]
    fn rank_lemma_hand_cases() {
        let h = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 3.0, 5.0]));
        let r = check_rank_lemmas(&h, &DMatrix::identity(3, 3), 1e-10).unwrap();
        assert_eq!((r.rank_hbar, r.rank_complement), (3, 0));
        assert!(r.pass);

        let h = DMatrix::identity(2, 2);
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let hbar = projection_term(&h, &a).unwrap();
        assert_eq!(hbar, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]));
        let r = check_rank_lemmas(&h, &a, 1e-10).unwrap();
        assert_eq!((r.rank_hbar, r.rank_complement), (1, 1));
    }

    #[test]
    fn preconditioned_by_itself() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let b = DMatrix::from_fn(6, 6, |_, _| rng.random::<f64>());
        let p = b.transpose() * &b + DMatrix::identity(6, 6);
        let s = preconditioned_spectrum(&p, &p, 1e-8).unwrap();
        assert_eq!(s.unit_count, 6);
        assert_eq!(s.spectrum.distinct(), 1);
        assert!(preconditioned_spectrum(&p, &(-&p), 1e-8).is_err());
    }

    #[test]
    fn kf_hand_case() {
        let h = DMatrix::from_element(1, 1, 2.0);
        let a = DMatrix::from_element(1, 1, 1.0);
        let c = DMatrix::from_element(1, 1, 1.0);
        let kf = dense_kf(&h, &a, &c, &[0.7]).unwrap();
        assert!((kf[(0, 0)] - 0.7).abs() < 1e-15);
    }
}
