//! Seeded synthetic QPs with `C = I` and `d = 0`.
//!
//! Random numbers come from ChaCha8 seeded with the user seed and switched
//! to a stream derived from `(purpose, n, m1)`. The Hessian stream only
//! depends on `n`, so all members of a family share `H`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ipm::{row_rank, QpProblem};
use crate::sparse::{SparseMat, Symmetry};

const RANK_RETRIES: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
enum Purpose {
    Hessian = 1,
    Equality = 2,
    Feasible = 3,
    Cost = 4,
}

fn stream(seed: u64, purpose: Purpose, n: usize, m1: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((purpose as u64) << 56) | ((n as u64 & 0xFF_FFFF) << 28) | (m1 as u64 & 0xFFF_FFFF));
    rng
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyQpSpec {
    pub n: usize,
    pub m1: usize,
    pub block_size: usize,
    /// Half-width of the band of `A`; `None` means `max(2, n / 16)`.
    pub band_width: Option<usize>,
    pub seed: u64,
}

impl SyQpSpec {
    pub fn new(n: usize, m1: usize, seed: u64) -> Self {
        Self { n, m1, block_size: 4, band_width: None, seed }
    }

    pub fn band(&self) -> usize {
        self.band_width.unwrap_or_else(|| (self.n / 16).max(2))
    }

    pub fn name(&self) -> String {
        format!("syqp-n{}-m{}-s{}", self.n, self.m1, self.seed)
    }
}

/// Block-diagonal SPD Hessian. Each block is `M^T M` with `M` uniform in
/// `[0, 1)`, shifted by `1e-8 * trace / block_size` on the diagonal. A final
/// partial block covers `n` not divisible by the block size.
pub fn syqp_hessian(n: usize, block_size: usize, seed: u64) -> SparseMat {
    let mut rng = stream(seed, Purpose::Hessian, n, 0);
    let mut trip = Vec::new();
    let mut start = 0;
    while start < n {
        let bs = block_size.min(n - start);
        let m: Vec<f64> = (0..bs * bs).map(|_| rng.random::<f64>()).collect();
        let mut blk = vec![0.0; bs * bs];
        for i in 0..bs {
            for j in 0..bs {
                blk[i * bs + j] = (0..bs).map(|k| m[k * bs + i] * m[k * bs + j]).sum();
            }
        }
        let trace: f64 = (0..bs).map(|i| blk[i * bs + i]).sum();
        let shift = 1e-8 * trace / block_size as f64;
        for j in 0..bs {
            for i in j..bs {
                let v = blk[i * bs + j] + if i == j { shift } else { 0.0 };
                trip.push((start + i, start + j, v));
            }
        }
        start += bs;
    }
    SparseMat::from_triplets(n, n, &trip, Symmetry::SymmetricLower).expect("block pattern is valid")
}

fn banded(rng: &mut ChaCha8Rng, m1: usize, n: usize, bw: usize, offset: usize) -> SparseMat {
    let mut trip = Vec::new();
    for i in 0..m1 {
        let centre = (i + offset) % n;
        let lo = centre.saturating_sub(bw);
        let hi = (centre + bw).min(n - 1);
        for j in lo..=hi {
            trip.push((i, j, rng.random::<f64>()));
        }
    }
    SparseMat::from_triplets(m1, n, &trip, Symmetry::General).expect("band pattern is valid")
}

/// Generates the synthetic problem. `b = A x_f` for a strictly positive
/// `x_f` drawn uniformly from `[0.5, 1.5)`, so the feasible set has an
/// interior point.
pub fn gen_syqp(spec: &SyQpSpec) -> Result<QpProblem> {
    let SyQpSpec { n, m1, block_size, seed, .. } = *spec;
    if n == 0 || m1 == 0 || m1 > n || block_size == 0 {
        return Err(Error::Generation(format!("need 1 <= m1 <= n and a positive block size (n = {n}, m1 = {m1})")));
    }
    let h = syqp_hessian(n, block_size, seed);
    let mut rng = stream(seed, Purpose::Equality, n, m1);
    let bw = spec.band();
    let mut a = None;
    for attempt in 0..RANK_RETRIES {
        let cand = banded(&mut rng, m1, n, bw, attempt);
        if row_rank(&cand) == m1 {
            a = Some(cand);
            break;
        }
    }
    let a = a.ok_or_else(|| Error::Generation(format!("no full-rank A after {RANK_RETRIES} attempts")))?;
    let mut frng = stream(seed, Purpose::Feasible, n, m1);
    let xf: Vec<f64> = (0..n).map(|_| 0.5 + frng.random::<f64>()).collect();
    let b = a.mul_vec(&xf, false);
    let mut crng = stream(seed, Purpose::Cost, n, m1);
    let c: Vec<f64> = (0..n).map(|_| crng.random::<f64>()).collect();
    let cmat = SparseMat::identity(n).expand_symmetric();
    QpProblem::new(spec.name(), h, c, a, b, cmat, vec![0.0; n])
}
