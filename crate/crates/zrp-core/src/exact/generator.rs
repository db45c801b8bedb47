//! Sparse generators over enumerated state spaces.
//!
//! Rows follow the state index; each row stores the outgoing jump rates
//! and a diagonal equal to minus their sum, so row sums vanish exactly by
//! construction.  The attached stationary vector is normalized over the
//! enumerated space, making the matrix self-adjoint in the weighted inner
//! product (validated in tests via detailed balance).

use nalgebra_sparse::CsrMatrix;

use crate::error::{CoreError, Result};
use crate::exact::index::{BoxIndex, EhatIndex, SimplexIndex};
use crate::numeric::Kahan;
use crate::zrp::{a_weight, g_rate, stationary_weight, ZrpModel};

pub struct SparseGenerator {
    speeded: bool,
    mat: CsrMatrix<f64>,
    mu: Vec<f64>,
}

impl SparseGenerator {
    #[inline]
    pub fn size(&self) -> usize {
        self.mat.nrows()
    }

    #[inline]
    pub fn speeded(&self) -> bool {
        self.speeded
    }

    #[inline]
    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn nnz(&self) -> usize {
        self.mat.nnz()
    }

    /// `out = L f`.
    pub fn apply_into(&self, f: &[f64], out: &mut [f64]) {
        assert_eq!(f.len(), self.size());
        assert_eq!(out.len(), self.size());
        for (i, slot) in out.iter_mut().enumerate() {
            let row = self.mat.row(i);
            let mut acc = 0.0;
            for (&j, &v) in row.col_indices().iter().zip(row.values()) {
                acc += v * f[j];
            }
            *slot = acc;
        }
    }

    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.size()];
        self.apply_into(f, &mut out);
        out
    }

    /// Row access: `(columns, values)` including the diagonal.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let offsets = self.mat.row_offsets();
        let (lo, hi) = (offsets[i], offsets[i + 1]);
        (&self.mat.col_indices()[lo..hi], &self.mat.values()[lo..hi])
    }

    /// Diagonal entry (total outgoing rate, negated).
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.size())
            .map(|i| {
                let row = self.mat.row(i);
                row.col_indices()
                    .iter()
                    .zip(row.values())
                    .find(|(&j, _)| j == i)
                    .map(|(_, &v)| v)
                    .unwrap_or(0.0)
            })
            .collect()
    }

    /// Dirichlet form `(1/2) sum_i mu_i sum_j rate_ij (f_j - f_i)^2`,
    /// accumulated edge by edge (every term nonnegative).
    pub fn dirichlet(&self, f: &[f64]) -> f64 {
        assert_eq!(f.len(), self.size());
        let mut acc = Kahan::new();
        for i in 0..self.size() {
            let row = self.mat.row(i);
            for (&j, &v) in row.col_indices().iter().zip(row.values()) {
                if j != i {
                    let df = f[j] - f[i];
                    acc.add(0.5 * self.mu[i] * v * df * df);
                }
            }
        }
        acc.value()
    }
}

/// Shared CSR construction: `row_fn` must push `(column, rate)` pairs for
/// the off-diagonal entries of one row.
fn build_csr(
    size: usize,
    weights: Vec<f64>,
    mut row_fn: impl FnMut(usize, &mut Vec<(usize, f64)>),
    speeded: bool,
    theta: f64,
) -> Result<SparseGenerator> {
    let scale = if speeded { theta } else { 1.0 };
    let mut indptr = Vec::with_capacity(size + 1);
    let mut indices: Vec<usize> = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    let mut scratch: Vec<(usize, f64)> = Vec::new();
    indptr.push(0usize);
    for i in 0..size {
        scratch.clear();
        row_fn(i, &mut scratch);
        let mut total = 0.0;
        for &(_, r) in scratch.iter() {
            debug_assert!(r > 0.0);
            total += r;
        }
        scratch.push((i, -total));
        scratch.sort_unstable_by_key(|&(j, _)| j);
        for &(j, r) in scratch.iter() {
            indices.push(j);
            values.push(r * scale);
        }
        indptr.push(indices.len());
    }
    // Normalize the stationary vector.
    let mut acc = Kahan::new();
    for &w in &weights {
        acc.add(w);
    }
    let total = acc.value();
    let mu: Vec<f64> = weights.into_iter().map(|w| w / total).collect();
    let mat = CsrMatrix::try_from_csr_data(size, size, indptr, indices, values)
        .map_err(|e| CoreError::numeric(format!("generator assembly: {e}")))?;
    Ok(SparseGenerator { speeded, mat, mu })
}

/// Generator over the full configuration space.
///
/// `speeded` multiplies every rate by `theta = n^2 log n`.
pub fn assemble_full(
    model: &ZrpModel,
    speeded: bool,
    cap: u64,
) -> Result<(SimplexIndex, SparseGenerator)> {
    let kappa = model.kappa();
    let idx = SimplexIndex::new(model.n(), kappa, cap)?;
    let size = idx.size() as usize;
    let mut weights = vec![0.0; size];
    idx.visit(|rank, eta| {
        weights[rank as usize] = stationary_weight(eta);
    });
    let walk = model.walk().clone();
    let mut eta = Vec::new();
    let mut sigma = vec![0u32; kappa];
    let gen = build_csr(
        size,
        weights,
        |i, row| {
            idx.unrank(i as u64, &mut eta);
            for x in 0..kappa {
                if eta[x] == 0 {
                    continue;
                }
                let gx = g_rate(eta[x]);
                for (y, r) in walk.neighbors(x) {
                    sigma.copy_from_slice(&eta);
                    sigma[x] -= 1;
                    sigma[y] += 1;
                    row.push((idx.rank(&sigma) as usize, gx * r));
                }
            }
        },
        speeded,
        model.theta(),
    )?;
    Ok((idx, gen))
}

/// Generator restricted to `{eta_y <= ell, y != x0}`: jumps that would
/// leave the set are removed in both directions, which preserves
/// reversibility.  Always unspeeded.
pub fn assemble_ehat(
    model: &ZrpModel,
    x0: usize,
    cap: u64,
) -> Result<(EhatIndex, SparseGenerator)> {
    let kappa = model.kappa();
    let ell = model.ell();
    let idx = EhatIndex::new(model.n(), kappa, x0, ell, cap)?;
    let size = idx.size() as usize;
    let mut weights = vec![0.0; size];
    idx.visit(|rank, eta| {
        weights[rank as usize] = stationary_weight(eta);
    });
    let walk = model.walk().clone();
    let mut eta = Vec::new();
    let mut sigma = vec![0u32; kappa];
    let gen = build_csr(
        size,
        weights,
        |i, row| {
            idx.config(i as u64, &mut eta);
            for x in 0..kappa {
                if eta[x] == 0 {
                    continue;
                }
                let gx = g_rate(eta[x]);
                for (y, r) in walk.neighbors(x) {
                    // The jump stays inside iff the target is the
                    // unconstrained site or keeps its cap.
                    if y != x0 && eta[y] >= ell {
                        continue;
                    }
                    sigma.copy_from_slice(&eta);
                    sigma[x] -= 1;
                    sigma[y] += 1;
                    row.push((idx.rank(&sigma) as usize, gx * r));
                }
            }
        },
        false,
        model.theta(),
    )?;
    Ok((idx, gen))
}

/// Independent birth-death chains on `{0..=ell}` per site other than a
/// reference site: birth rate 1 below the cap, death rate `g`.
pub fn assemble_birth_death(model: &ZrpModel, cap: u64) -> Result<(BoxIndex, SparseGenerator)> {
    let axes = model.kappa() - 1;
    let ell = model.ell();
    let idx = BoxIndex::new(vec![ell; axes], cap)?;
    let size = idx.size() as usize;
    let mut weights = vec![0.0; size];
    idx.visit(|rank, omega| {
        weights[rank as usize] = omega.iter().map(|&k| 1.0 / a_weight(k)).product();
    });
    let mut omega = Vec::new();
    let mut target = vec![0u32; axes];
    let gen = build_csr(
        size,
        weights,
        |i, row| {
            idx.unrank(i as u64, &mut omega);
            for x in 0..axes {
                if omega[x] < ell {
                    target.copy_from_slice(&omega);
                    target[x] += 1;
                    row.push((idx.rank(&target) as usize, 1.0));
                }
                if omega[x] > 0 {
                    target.copy_from_slice(&omega);
                    target[x] -= 1;
                    row.push((idx.rank(&target) as usize, g_rate(omega[x])));
                }
            }
        },
        false,
        model.theta(),
    )?;
    Ok((idx, gen))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::index::DEFAULT_STATE_CAP;
    use crate::walk::WalkSpec;

    fn model(n: u32, kappa: usize) -> ZrpModel {
        ZrpModel::new(n, WalkSpec::complete_unit(kappa).unwrap()).unwrap()
    }

    #[test]
    fn rows_sum_to_zero_exactly() {
        let m = model(12, 3);
        let (_, gen) = assemble_full(&m, false, DEFAULT_STATE_CAP).unwrap();
        for i in 0..gen.size() {
            let (_, vals) = gen.row(i);
            let s: f64 = vals.iter().sum();
            assert!(s.abs() < 1e-12, "row {i} sums to {s}");
        }
    }

    #[test]
    fn detailed_balance_in_the_weighted_inner_product() {
        let m = ZrpModel::new(
            14,
            WalkSpec::new(vec![
                vec![0.0, 2.0, 0.5],
                vec![2.0, 0.0, 1.0],
                vec![0.5, 1.0, 0.0],
            ])
            .unwrap(),
        )
        .unwrap();
        let (_, gen) = assemble_full(&m, false, DEFAULT_STATE_CAP).unwrap();
        let mu = gen.mu();
        for i in 0..gen.size() {
            let (cols, vals) = gen.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if j == i {
                    continue;
                }
                let back = {
                    let (cj, vj) = gen.row(j);
                    cj.iter()
                        .zip(vj)
                        .find(|(&c, _)| c == i)
                        .map(|(_, &v)| v)
                        .expect("reverse jump present")
                };
                let lhs = mu[i] * v;
                let rhs = mu[j] * back;
                assert!(
                    (lhs - rhs).abs() <= 1e-13 * lhs.abs().max(rhs.abs()),
                    "balance violated between {i} and {j}"
                );
            }
        }
    }

    #[test]
    fn stationary_vector_kills_the_generator() {
        let m = model(15, 3);
        let (_, gen) = assemble_full(&m, false, DEFAULT_STATE_CAP).unwrap();
        // mu L = 0 by reversibility: check sum_i mu_i L_ij = 0 column-wise
        // through the transpose action on the ones vector trick:
        // sum_i mu_i (L f)(i) = 0 for arbitrary f.
        let f: Vec<f64> = (0..gen.size()).map(|i| ((i * 31) % 17) as f64).collect();
        let lf = gen.apply(&f);
        let total: f64 = gen.mu().iter().zip(&lf).map(|(&m, &v)| m * v).sum();
        assert!(total.abs() < 1e-12);
    }

    #[test]
    fn speeded_rates_scale_by_theta() {
        let m = model(12, 3);
        let (_, slow) = assemble_full(&m, false, DEFAULT_STATE_CAP).unwrap();
        let (_, fast) = assemble_full(&m, true, DEFAULT_STATE_CAP).unwrap();
        let f: Vec<f64> = (0..slow.size()).map(|i| (i as f64).sin()).collect();
        let a = slow.apply(&f);
        let b = fast.apply(&f);
        for (x, y) in a.iter().zip(&b) {
            assert!((x * m.theta() - y).abs() <= 1e-9 * y.abs().max(1.0));
        }
    }

    #[test]
    fn restricted_generator_drops_exits_symmetrically() {
        let m = model(30, 3);
        let (idx, gen) = assemble_ehat(&m, 0, DEFAULT_STATE_CAP).unwrap();
        assert_eq!(idx.size(), 81);
        // Detailed balance survives the restriction.
        let mu = gen.mu();
        for i in 0..gen.size() {
            let (cols, vals) = gen.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if j == i {
                    continue;
                }
                let (cj, vj) = gen.row(j);
                let back = cj
                    .iter()
                    .zip(vj)
                    .find(|(&c, _)| c == i)
                    .map(|(_, &v)| v)
                    .expect("reverse jump present");
                assert!((mu[i] * v - mu[j] * back).abs() <= 1e-13 * (mu[i] * v).abs());
            }
        }
    }

    #[test]
    fn birth_death_chain_has_product_weights() {
        let m = model(30, 3);
        let (idx, gen) = assemble_birth_death(&m, DEFAULT_STATE_CAP).unwrap();
        assert_eq!(idx.size(), 81);
        // Single-axis marginal of mu matches 1/a up to normalization.
        let mut omega = Vec::new();
        let mut by_first = vec![0.0; 9];
        idx.visit(|rank, _| {
            idx.unrank(rank, &mut omega);
            by_first[omega[0] as usize] += gen.mu()[rank as usize];
        });
        let z: f64 = (0..=8u32).map(|k| 1.0 / a_weight(k)).sum();
        for (k, &p) in by_first.iter().enumerate() {
            let expect = 1.0 / a_weight(k as u32) / z;
            assert!((p - expect).abs() < 1e-12);
        }
    }
}
