//! Principal spectral gap of reversible generators by inverse power
//! iteration in the stationary inner product.

use nalgebra::{DMatrix, DVector};

use crate::error::{CoreError, Result};
use crate::exact::generator::SparseGenerator;
use crate::exact::solver::{dot_mu, mu_mean, pcg, project_mean};
use crate::numeric::Kahan;

/// Largest state count for which the shifted generator is factored densely.
pub const DENSE_GAP_CAP: usize = 2_000;

#[derive(Clone, Debug)]
pub struct GapReport {
    /// Smallest nonzero eigenvalue of the negated generator.
    pub gap: f64,
    pub iterations: usize,
    /// Infinity norm of `(-L)w - gap*w` relative to `gap * |w|_inf`.
    pub rel_residual: f64,
}

fn deterministic_start(size: usize, mu: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = (0..size).map(|i| ((i + 1) as f64).sin()).collect();
    project_mean(mu, &mut v);
    v
}

fn rayleigh(gen: &SparseGenerator, w: &[f64]) -> f64 {
    gen.dirichlet(w) / dot_mu(gen.mu(), w, w)
}

/// `max |(-L)w - lambda w| / (lambda max |w|)`.
fn eigen_residual(gen: &SparseGenerator, w: &[f64], lambda: f64) -> f64 {
    let mut lw = vec![0.0; w.len()];
    gen.apply_into(w, &mut lw);
    let wmax = w.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    let rmax = w
        .iter()
        .zip(&lw)
        .fold(0.0f64, |m, (&wi, &li)| m.max((-li - lambda * wi).abs()));
    rmax / (lambda * wmax)
}

/// Gap via a dense LU factorization of `-L + 1 mu^T`.
///
/// The rank-one term moves the constant eigenvector to eigenvalue one and
/// leaves the mean-zero subspace untouched, so repeated solves perform
/// inverse iteration toward the gap eigenvector.
fn gap_dense(gen: &SparseGenerator, tol: f64, max_iter: usize) -> Result<GapReport> {
    let size = gen.size();
    let mu = gen.mu().to_vec();
    let mut b = DMatrix::<f64>::zeros(size, size);
    for i in 0..size {
        let (cols, vals) = gen.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            b[(i, j)] -= v;
        }
        for j in 0..size {
            b[(i, j)] += mu[j];
        }
    }
    let lu = b.lu();
    let mut v = deterministic_start(size, &mu);
    let mut lambda = rayleigh(gen, &v);
    for it in 1..=max_iter {
        let w = lu
            .solve(&DVector::from_column_slice(&v))
            .ok_or_else(|| CoreError::numeric("gap: singular shifted generator"))?;
        let mut w = w.as_slice().to_vec();
        project_mean(&mu, &mut w);
        let norm = dot_mu(&mu, &w, &w).sqrt();
        if norm == 0.0 {
            return Err(CoreError::numeric("gap: iteration collapsed to zero"));
        }
        for x in w.iter_mut() {
            *x /= norm;
        }
        let next = rayleigh(gen, &w);
        let resid = eigen_residual(gen, &w, next);
        let stagnant = (next - lambda).abs() <= 1e-13 * next.max(f64::MIN_POSITIVE);
        v = w;
        lambda = next;
        if resid <= tol || (stagnant && resid <= 1e-3) {
            return Ok(GapReport {
                gap: lambda,
                iterations: it,
                rel_residual: resid,
            });
        }
    }
    Err(CoreError::numeric("gap: inverse iteration did not converge"))
}

/// Gap via conjugate-gradient inverse iteration on the mean-zero subspace.
fn gap_iterative(gen: &SparseGenerator, tol: f64, max_iter: usize) -> Result<GapReport> {
    let mu = gen.mu().to_vec();
    let diag = gen.diagonal();
    let precond: Vec<f64> = diag.iter().map(|&d| (-d).max(f64::MIN_POSITIVE)).collect();
    let op = |x: &[f64], y: &mut [f64]| {
        gen.apply_into(x, y);
        for v in y.iter_mut() {
            *v = -*v;
        }
    };
    let mut v = deterministic_start(gen.size(), &mu);
    let mut lambda = rayleigh(gen, &v);
    for it in 1..=max_iter {
        let (mut w, _) = pcg(&op, &mu, &v, Some(&precond), true, 1e-10, 200_000)?;
        project_mean(&mu, &mut w);
        let norm = dot_mu(&mu, &w, &w).sqrt();
        if norm == 0.0 {
            return Err(CoreError::numeric("gap: iteration collapsed to zero"));
        }
        for x in w.iter_mut() {
            *x /= norm;
        }
        let next = rayleigh(gen, &w);
        let resid = eigen_residual(gen, &w, next);
        let stagnant = (next - lambda).abs() <= 1e-13 * next.max(f64::MIN_POSITIVE);
        v = w;
        lambda = next;
        if resid <= tol || (stagnant && resid <= 1e-3) {
            return Ok(GapReport {
                gap: lambda,
                iterations: it,
                rel_residual: resid,
            });
        }
    }
    Err(CoreError::numeric("gap: inverse iteration did not converge"))
}

/// Principal gap of a reversible generator: the smallest nonzero
/// eigenvalue of `-L`, on whatever time scale `gen` carries.
pub fn principal_gap(gen: &SparseGenerator) -> Result<GapReport> {
    if gen.size() < 2 {
        return Err(CoreError::argument("gap: need at least two states"));
    }
    let mean = mu_mean(gen.mu(), &deterministic_start(gen.size(), gen.mu()));
    debug_assert!(mean.abs() < 1e-12);
    if gen.size() <= DENSE_GAP_CAP {
        gap_dense(gen, 1e-8, 400)
    } else {
        gap_iterative(gen, 1e-8, 400)
    }
}

/// Full-spectrum oracle for small reversible generators.
///
/// Symmetrizes `-L` by the similarity `D^{1/2} (-L) D^{-1/2}` with
/// `D = diag(mu)` and returns all eigenvalues in increasing order.
pub fn dense_spectrum(gen: &SparseGenerator) -> Result<Vec<f64>> {
    let size = gen.size();
    if size > DENSE_GAP_CAP {
        return Err(CoreError::resource("spectrum: state space too large"));
    }
    let mu = gen.mu();
    let mut s = DMatrix::<f64>::zeros(size, size);
    for i in 0..size {
        let (cols, vals) = gen.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            s[(i, j)] = -v * (mu[i] / mu[j]).sqrt();
        }
    }
    // Symmetrize exactly against round-off before the eigensolver.
    let st = s.transpose();
    let sym = (&s + &st) * 0.5;
    let skew = (&s - &st).abs().max();
    if skew > 1e-8 * sym.abs().max().max(1.0) {
        return Err(CoreError::numeric("spectrum: similarity not symmetric"));
    }
    let eig = sym.symmetric_eigenvalues();
    let mut vals: Vec<f64> = eig.iter().copied().collect();
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(vals)
}

/// Mean of the squared distance to the mean, for variance oracles.
pub fn mu_variance(v: &[f64], mu: &[f64]) -> f64 {
    let m = mu_mean(mu, v);
    let mut acc = Kahan::new();
    for (x, w) in v.iter().zip(mu) {
        acc.add(w * (x - m) * (x - m));
    }
    acc.value()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::generator::{assemble_birth_death, assemble_ehat, assemble_full};
    use crate::exact::index::DEFAULT_STATE_CAP;
    use crate::walk::WalkSpec;
    use crate::zrp::{g_rate, ZrpModel};

    fn model(n: u32, kappa: usize) -> ZrpModel {
        ZrpModel::new(n, WalkSpec::complete_unit(kappa).unwrap()).unwrap()
    }

    #[test]
    fn gap_matches_full_spectrum_on_a_small_simplex() {
        let m = model(20, 2);
        let (_, gen) = assemble_full(&m, false, DEFAULT_STATE_CAP).unwrap();
        let spectrum = dense_spectrum(&gen).unwrap();
        assert!(spectrum[0].abs() < 1e-9, "zero mode: {}", spectrum[0]);
        let rep = principal_gap(&gen).unwrap();
        assert!(
            (rep.gap - spectrum[1]).abs() < 1e-7 * spectrum[1],
            "gap {} vs eigenvalue {}",
            rep.gap,
            spectrum[1]
        );
        assert!(rep.rel_residual < 1e-5);
    }

    #[test]
    fn restricted_two_state_chain_has_explicit_gap() {
        // Width-one envelope over two sites holds two states; the gap of a
        // two-state chain with rates a and b is a + b.
        let n = 30;
        let m = ZrpModel::with_well_width(n, WalkSpec::complete_unit(2).unwrap(), 1, 0.4, 0.5)
            .unwrap();
        let (idx, gen) = assemble_ehat(&m, 0, DEFAULT_STATE_CAP).unwrap();
        assert_eq!(idx.size(), 2);
        let rep = principal_gap(&gen).unwrap();
        let expect = g_rate(n) + 1.0;
        assert!(
            (rep.gap - expect).abs() < 1e-9 * expect,
            "gap {} vs {}",
            rep.gap,
            expect
        );
    }

    #[test]
    fn birth_death_gap_matches_spectrum() {
        let m = model(200, 2);
        let (idx, gen) = assemble_birth_death(&m, DEFAULT_STATE_CAP).unwrap();
        assert_eq!(idx.size(), m.ell() as u64 + 1);
        let rep = principal_gap(&gen).unwrap();
        let spectrum = dense_spectrum(&gen).unwrap();
        assert!((rep.gap - spectrum[1]).abs() < 1e-7 * spectrum[1]);
    }

    #[test]
    fn iterative_and_dense_paths_agree() {
        let m = model(26, 3);
        let (idx, gen) = assemble_full(&m, false, DEFAULT_STATE_CAP).unwrap();
        assert!(idx.size() <= DENSE_GAP_CAP as u64);
        let dense = gap_dense(&gen, 1e-8, 400).unwrap();
        let iter = gap_iterative(&gen, 1e-8, 400).unwrap();
        assert!(
            (dense.gap - iter.gap).abs() < 1e-6 * dense.gap,
            "dense {} vs iterative {}",
            dense.gap,
            iter.gap
        );
    }

    #[test]
    fn variance_of_indicator_matches_bernoulli() {
        let mu = vec![0.25, 0.75];
        let v = vec![1.0, 0.0];
        assert!((mu_variance(&v, &mu) - 0.25 * 0.75).abs() < 1e-15);
    }
}
