//! Residuals, reduced KKT matrices and the exact elimination/recovery
//! formulas shared by every strategy.
//!
//! With `D = S V^{-1}` and `r_a = r_i + V^{-1} r_c`, the first augmented
//! system reads
//!
//! ```text
//! [-H  A^T  C^T] [dx  ]     [r_g]
//! [ A   0    0 ] [dlam] = - [r_e]
//! [ C   0    D ] [dnu ]     [r_a]
//! ```
//!
//! and `ds = -V^{-1} r_c - D dnu`. Here `r_g = A^T lam + C^T nu - H x - c` is
//! the negated dual residual, which keeps every block right-hand side in
//! the uniform `-(...)` form above.

use serde::{Deserialize, Serialize};

use super::problem::QpProblem;
use super::IpmState;
use crate::costmodel::CostLedger;
use crate::error::{dim_err, Result};
use crate::factor::{self, ldlt_factor, FactorHandle, LdltOptions};
use crate::precond::assemble_saddle;
use crate::sparse::{spmm_btdb, spmv, DiagMat, SparseMat};

pub const LABEL_F: &str = "F";
pub const LABEL_KC: &str = "K_C";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub r_g: Vec<f64>,
    pub r_e: Vec<f64>,
    pub r_i: Vec<f64>,
    pub r_c: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    pub dx: Vec<f64>,
    pub dlam: Vec<f64>,
    pub dnu: Vec<f64>,
    pub ds: Vec<f64>,
}

impl Direction {
    pub fn is_finite(&self) -> bool {
        [&self.dx, &self.dlam, &self.dnu, &self.ds].iter().all(|v| v.iter().all(|x| x.is_finite()))
    }
}

pub(crate) fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub(crate) fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Residuals at `st` with centering target `sigma_mu`. Charges one product
/// with `H`, two with `A` and two with `C`.
pub fn residuals(p: &QpProblem, st: &IpmState, sigma_mu: f64, ledger: &mut CostLedger) -> Result<Residuals> {
    let hx = spmv(&p.h, &st.x, false, ledger)?;
    let ax = spmv(&p.a, &st.x, false, ledger)?;
    let atl = spmv(&p.a, &st.lam, true, ledger)?;
    let cx = spmv(&p.cmat, &st.x, false, ledger)?;
    let ctn = spmv(&p.cmat, &st.nu, true, ledger)?;
    let r_g = (0..p.n()).map(|i| atl[i] + ctn[i] - hx[i] - p.c[i]).collect();
    let r_e = ax.iter().zip(&p.b).map(|(v, bi)| v - bi).collect();
    let r_i = (0..p.m2()).map(|i| cx[i] - st.s[i] - p.d[i]).collect();
    let r_c = st.s.iter().zip(&st.nu).map(|(s, v)| s * v - sigma_mu).collect();
    Ok(Residuals { r_g, r_e, r_i, r_c })
}

/// `D = S V^{-1}`.
pub fn scaling(st: &IpmState) -> Result<DiagMat> {
    DiagMat::new(st.s.iter().zip(&st.nu).map(|(s, v)| s / v).collect())
}

/// `r_a = r_i + V^{-1} r_c`.
pub fn r_a(st: &IpmState, res: &Residuals) -> Vec<f64> {
    (0..st.s.len()).map(|i| res.r_i[i] + res.r_c[i] / st.nu[i]).collect()
}

/// `G = H + C^T D^{-1} C` (symmetric-lower), charging one `spmm`.
pub fn build_g(p: &QpProblem, d: &DiagMat, ledger: &mut CostLedger) -> Result<SparseMat> {
    if d.dim() != p.m2() {
        return Err(dim_err("D must have one entry per inequality"));
    }
    let ctdc = spmm_btdb(&p.cmat, &d.inverse()?, ledger)?;
    p.h.add(1.0, &ctdc, 1.0)
}

/// `K_C = [-G, A^T; A, 0]` from a precomputed `G`.
pub fn kc_from_g(p: &QpProblem, g: &SparseMat) -> Result<SparseMat> {
    let mut neg = g.clone();
    neg.scale(-1.0);
    assemble_saddle(&neg, Some(&p.a), None)
}

/// `K_C = [-(H + C^T D^{-1} C), A^T; A, 0]`.
pub fn build_kc(p: &QpProblem, d: &DiagMat, ledger: &mut CostLedger) -> Result<SparseMat> {
    kc_from_g(p, &build_g(p, d, ledger)?)
}

/// `F = [-H, A^T; A, 0]`.
pub fn build_f(p: &QpProblem) -> Result<SparseMat> {
    let mut neg = p.h.clone();
    neg.scale(-1.0);
    assemble_saddle(&neg, Some(&p.a), None)
}

/// Right-hand side `-(r_u, r_e)` of the augmented system with
/// `r_u = r_g - C^T D^{-1} r_a`; one product with `C^T`.
pub fn kc_rhs(p: &QpProblem, d: &DiagMat, res: &Residuals, ra: &[f64], ledger: &mut CostLedger) -> Result<Vec<f64>> {
    let dra: Vec<f64> = ra.iter().zip(d.values()).map(|(r, di)| r / di).collect();
    let ct = spmv(&p.cmat, &dra, true, ledger)?;
    let mut rhs: Vec<f64> = res.r_g.iter().zip(&ct).map(|(g, c)| -(g - c)).collect();
    rhs.extend(res.r_e.iter().map(|e| -e));
    Ok(rhs)
}

/// `dnu = -D^{-1}(r_a + C dx)`; one product with `C`.
pub fn kc_recover_dnu(p: &QpProblem, d: &DiagMat, ra: &[f64], dx: &[f64], ledger: &mut CostLedger) -> Result<Vec<f64>> {
    let cdx = spmv(&p.cmat, dx, false, ledger)?;
    Ok((0..p.m2()).map(|i| -(ra[i] + cdx[i]) / d.values()[i]).collect())
}

/// `ds = -V^{-1} r_c - D dnu`.
pub fn recover_ds(st: &IpmState, d: &DiagMat, res: &Residuals, dnu: &[f64]) -> Vec<f64> {
    (0..st.s.len()).map(|i| -res.r_c[i] / st.nu[i] - d.values()[i] * dnu[i]).collect()
}

/// `r_nu = -r_a + [C 0] F^{-1} [r_g; r_e]`; one solve with `F` and one
/// product with `C`.
pub fn kf_rhs(p: &QpProblem, f: &FactorHandle, res: &Residuals, ra: &[f64], ledger: &mut CostLedger) -> Result<Vec<f64>> {
    let mut rhs = res.r_g.clone();
    rhs.extend_from_slice(&res.r_e);
    let y = factor::solve(f, &rhs, ledger)?;
    let cy = spmv(&p.cmat, &y[..p.n()], false, ledger)?;
    Ok(ra.iter().zip(&cy).map(|(r, c)| c - r).collect())
}

/// `F [dx; dlam] = -[r_g + C^T dnu; r_e]`; one product with `C^T` and one
/// solve with `F`.
pub fn kf_recover(
    p: &QpProblem,
    f: &FactorHandle,
    res: &Residuals,
    dnu: &[f64],
    ledger: &mut CostLedger,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let ct = spmv(&p.cmat, dnu, true, ledger)?;
    let mut rhs: Vec<f64> = res.r_g.iter().zip(&ct).map(|(g, c)| -(g + c)).collect();
    rhs.extend(res.r_e.iter().map(|e| -e));
    let mut z = factor::solve(f, &rhs, ledger)?;
    let dlam = z.split_off(p.n());
    Ok((z, dlam))
}

/// Direct direction from an `LDL^T` factorization of `K_C`.
pub fn direct_kc_direction(
    p: &QpProblem,
    st: &IpmState,
    res: &Residuals,
    opts: &LdltOptions,
    ledger: &mut CostLedger,
) -> Result<Direction> {
    let d = scaling(st)?;
    let ra = r_a(st, res);
    let kc = build_kc(p, &d, ledger)?;
    let f = ldlt_factor(&kc, &LdltOptions { split: p.n(), ..*opts }, LABEL_KC, ledger)?;
    let rhs = kc_rhs(p, &d, res, &ra, ledger)?;
    let mut dx = factor::solve(&f, &rhs, ledger)?;
    let dlam = dx.split_off(p.n());
    let dnu = kc_recover_dnu(p, &d, &ra, &dx, ledger)?;
    let ds = recover_ds(st, &d, res, &dnu);
    Ok(Direction { dx, dlam, dnu, ds })
}

/// Relative residual of a direction in the first augmented system and the
/// largest violation of the linearized complementarity row
/// `V ds + S dnu = -r_c`, both uncharged.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectionCheck {
    pub augmented_relres: f64,
    pub complementarity: f64,
}

pub fn check_direction(p: &QpProblem, st: &IpmState, res: &Residuals, dir: &Direction) -> DirectionCheck {
    let ra = r_a(st, res);
    let hdx = p.h.mul_vec(&dir.dx, false);
    let atdl = p.a.mul_vec(&dir.dlam, true);
    let ctdn = p.cmat.mul_vec(&dir.dnu, true);
    let adx = p.a.mul_vec(&dir.dx, false);
    let cdx = p.cmat.mul_vec(&dir.dx, false);
    let mut resid = Vec::with_capacity(p.n() + p.m1() + p.m2());
    let mut rhs = Vec::with_capacity(resid.capacity());
    for i in 0..p.n() {
        resid.push(-hdx[i] + atdl[i] + ctdn[i] + res.r_g[i]);
        rhs.push(res.r_g[i]);
    }
    for i in 0..p.m1() {
        resid.push(adx[i] + res.r_e[i]);
        rhs.push(res.r_e[i]);
    }
    for i in 0..p.m2() {
        let di = st.s[i] / st.nu[i];
        resid.push(cdx[i] + di * dir.dnu[i] + ra[i]);
        rhs.push(ra[i]);
    }
    let den = norm2(&rhs);
    let augmented_relres = if den == 0.0 { norm2(&resid) } else { norm2(&resid) / den };
    let complementarity = (0..p.m2())
        .map(|i| (st.nu[i] * dir.ds[i] + st.s[i] * dir.dnu[i] + res.r_c[i]).abs() / (1.0 + res.r_c[i].abs()))
        .fold(0.0, f64::max);
    DirectionCheck { augmented_relres, complementarity }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::Symmetry;
    use nalgebra::{DMatrix, DVector};

    fn tiny() -> QpProblem {
        // n = 1, m1 = 1, m2 = 1: H = [2], A = [1], C = [1]
        let g = |v: f64| SparseMat::from_triplets(1, 1, &[(0, 0, v)], Symmetry::General).unwrap();
        QpProblem::new("tiny", SparseMat::from_diag(&[2.0]), vec![1.0], g(1.0), vec![1.0], g(1.0), vec![0.0]).unwrap()
    }

    fn state(x: f64, lam: f64, nu: f64, s: f64) -> IpmState {
        IpmState { x: vec![x], lam: vec![lam], nu: vec![nu], s: vec![s], mu: s * nu, k: 0, residuals: Residuals::default() }
    }

    #[test]
    fn kc_hand_case() {
        let p = tiny();
        let mut l = CostLedger::new();
        let kc = build_kc(&p, &DiagMat::identity(1), &mut l).unwrap();
        assert_eq!(kc.to_dense(), DMatrix::from_row_slice(2, 2, &[-3.0, 1.0, 1.0, 0.0]));
        assert_eq!(l.spmm_flops, 1);
        let f = build_f(&p).unwrap();
        assert_eq!(f.to_dense(), DMatrix::from_row_slice(2, 2, &[-2.0, 1.0, 1.0, 0.0]));
    }

    #[test]
    fn kc_without_c_coupling() {
        let mut p = tiny();
        p.cmat = SparseMat::zeros(1, 1);
        let mut l = CostLedger::new();
        let kc = build_kc(&p, &DiagMat::identity(1), &mut l).unwrap();
        assert_eq!(kc.to_dense(), build_f(&p).unwrap().to_dense());
    }

    #[test]
    fn residual_charges_and_values() {
        let p = tiny();
        let mut l = CostLedger::new();
        // x = 1 is feasible and optimal with lam = 3, nu = 0 (objective slope 2x + 1 = 3)
        let r = residuals(&p, &state(1.0, 3.0, 0.0, 1.0), 0.0, &mut l).unwrap();
        assert_eq!((r.r_g[0], r.r_e[0], r.r_i[0], r.r_c[0]), (0.0, 0.0, 0.0, 0.0));
        assert_eq!(l.spmv_flops, 2 * (1 + 2 * 1 + 2 * 1));
        let r = residuals(&p, &state(0.0, 0.0, 1.0, 1.0), 1.0, &mut l).unwrap();
        assert_eq!(r.r_c, vec![0.0]);
    }

    #[test]
    fn kkt_point_has_zero_residuals() {
        let p = tiny();
        let mut l = CostLedger::new();
        let st = state(1.0, 3.0, 1e-300, 1.0);
        let r = residuals(&p, &st, 0.0, &mut l).unwrap();
        assert!(norm_inf(&r.r_g) <= 1e-12 && norm_inf(&r.r_e) <= 1e-12 && norm_inf(&r.r_i) <= 1e-12);
    }

    #[test]
    fn direct_direction_solves_newton_system() {
        let p = tiny();
        let mut l = CostLedger::new();
        let st = state(0.3, 0.2, 0.7, 1.1);
        let res = residuals(&p, &st, 0.05, &mut l).unwrap();
        let dir = direct_kc_direction(&p, &st, &res, &LdltOptions::default(), &mut l).unwrap();
        let chk = check_direction(&p, &st, &res, &dir);
        assert!(chk.augmented_relres <= 1e-14 && chk.complementarity <= 1e-14, "{chk:?}");

        // dense oracle of the full 4x4 Newton system in (dx, dlam, dnu, ds)
        let k = DMatrix::from_row_slice(
            4,
            4,
            &[-2.0, 1.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, -1.0, 0.0, 0.0, st.s[0], st.nu[0]],
        );
        let rhs = DVector::from_vec(vec![-res.r_g[0], -res.r_e[0], -res.r_i[0], -res.r_c[0]]);
        let sol = k.lu().solve(&rhs).unwrap();
        let got = [dir.dx[0], dir.dlam[0], dir.dnu[0], dir.ds[0]];
        for i in 0..4 {
            assert!((sol[i] - got[i]).abs() <= 1e-13, "{i}: {} vs {}", sol[i], got[i]);
        }
    }
}
