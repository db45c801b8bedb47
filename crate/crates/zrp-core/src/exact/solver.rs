//! Linear solves against the sparse generator.
//!
//! Everything runs in the stationary-weighted inner product, where the
//! generator is self-adjoint and nonpositive.  The workhorse is a Jacobi
//! preconditioned conjugate gradient; a dense LU path covers small sizes
//! and serves as an independent cross-check.

use nalgebra::{DMatrix, DVector};

use crate::error::{CoreError, Result};
use crate::exact::generator::SparseGenerator;
use crate::exact::index::SimplexIndex;
use crate::metastable::LimitChain;
use crate::numeric::Kahan;
use crate::zrp::ZrpModel;

#[derive(Clone, Copy, Debug, Default)]
pub struct SolveReport {
    pub iterations: usize,
    pub rel_residual: f64,
    pub inf_residual: f64,
}

pub(crate) fn dot_mu(mu: &[f64], u: &[f64], v: &[f64]) -> f64 {
    let mut acc = Kahan::new();
    for i in 0..mu.len() {
        acc.add(mu[i] * u[i] * v[i]);
    }
    acc.value()
}

pub(crate) fn mu_mean(mu: &[f64], v: &[f64]) -> f64 {
    let mut num = Kahan::new();
    let mut den = Kahan::new();
    for i in 0..mu.len() {
        num.add(mu[i] * v[i]);
        den.add(mu[i]);
    }
    num.value() / den.value()
}

pub(crate) fn project_mean(mu: &[f64], v: &mut [f64]) {
    let mean = mu_mean(mu, v);
    for x in v.iter_mut() {
        *x -= mean;
    }
}

/// Preconditioned conjugate gradient for an operator that is symmetric
/// positive (semi)definite in the `mu`-weighted inner product.
///
/// `project` keeps iterates orthogonal to constants, which turns the
/// semidefinite case (generator with its one-dimensional kernel) into a
/// definite one.
pub fn pcg(
    op: &dyn Fn(&[f64], &mut [f64]),
    mu: &[f64],
    rhs: &[f64],
    jacobi: Option<&[f64]>,
    project: bool,
    tol_rel: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, SolveReport)> {
    let n = rhs.len();
    let mut b = rhs.to_vec();
    if project {
        project_mean(mu, &mut b);
    }
    let norm_b = dot_mu(mu, &b, &b).sqrt();
    let mut x = vec![0.0; n];
    if norm_b == 0.0 {
        return Ok((x, SolveReport::default()));
    }
    let precond = |r: &[f64], z: &mut [f64]| match jacobi {
        Some(d) => {
            for i in 0..r.len() {
                z[i] = r[i] / d[i];
            }
        }
        None => z.copy_from_slice(r),
    };
    let mut r = b.clone();
    let mut z = vec![0.0; n];
    precond(&r, &mut z);
    if project {
        project_mean(mu, &mut z);
    }
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot_mu(mu, &r, &z);
    let mut iterations = 0;
    let mut resid = norm_b;
    while resid > tol_rel * norm_b {
        if iterations >= max_iter {
            return Err(CoreError::numeric(format!(
                "pcg: no convergence after {max_iter} iterations (residual {:.3e} of {:.3e})",
                resid, norm_b
            )));
        }
        op(&p, &mut ap);
        let pap = dot_mu(mu, &p, &ap);
        if pap <= 0.0 {
            return Err(CoreError::numeric(format!(
                "pcg: operator lost definiteness (p.Ap = {pap:.3e})"
            )));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        iterations += 1;
        // Guard against residual drift on long runs.
        if iterations % 64 == 0 {
            op(&x, &mut ap);
            for i in 0..n {
                r[i] = b[i] - ap[i];
            }
        }
        if project {
            project_mean(mu, &mut r);
        }
        precond(&r, &mut z);
        if project {
            project_mean(mu, &mut z);
        }
        let rz_next = dot_mu(mu, &r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        resid = dot_mu(mu, &r, &r).sqrt();
    }
    // True residual, both norms.
    op(&x, &mut ap);
    let mut inf = 0.0f64;
    let mut acc = Kahan::new();
    for i in 0..n {
        let ri = b[i] - ap[i];
        inf = inf.max(ri.abs());
        acc.add(mu[i] * ri * ri);
    }
    Ok((
        x,
        SolveReport {
            iterations,
            rel_residual: acc.value().sqrt() / norm_b,
            inf_residual: inf,
        },
    ))
}

/// Result of the mean-field projection problem: the configuration-space
/// potential, its per-well averages, and diagnostics.
#[derive(Clone, Debug)]
pub struct PoissonSolution {
    pub lambda: f64,
    /// Potential over all configurations, in index order.
    pub potential: Vec<f64>,
    /// Stationary average of the potential over each well.
    pub well_means: Vec<f64>,
    /// `max_x |well_means[x] - f[x]|`.
    pub max_dev: f64,
    /// Dirichlet energy of the potential under the (speeded) generator.
    pub dirichlet: f64,
    pub report: SolveReport,
}

/// Size cap for the dense cross-check path.
pub const DENSE_SOLVE_CAP: usize = 2_500;

fn poisson_target(
    model: &ZrpModel,
    idx: &SimplexIndex,
    f: &[f64],
    lambda: f64,
) -> Result<Vec<f64>> {
    let kappa = model.kappa();
    if f.len() != kappa {
        return Err(CoreError::argument(format!(
            "poisson: site function has {} entries, model has {kappa}",
            f.len()
        )));
    }
    if lambda < 0.0 {
        return Err(CoreError::argument("poisson: lambda must be >= 0"));
    }
    let chain = LimitChain::from_walk(model.walk())?;
    let site_value: Vec<f64> = (0..kappa)
        .map(|x| -lambda * f[x] + chain.apply(f, x))
        .collect();
    let threshold = model.n() - model.ell();
    let mut target = vec![0.0; idx.size() as usize];
    idx.visit(|rank, eta| {
        for (x, &k) in eta.iter().enumerate() {
            if k >= threshold {
                target[rank as usize] = site_value[x];
                break;
            }
        }
    });
    Ok(target)
}

fn poisson_postprocess(
    model: &ZrpModel,
    idx: &SimplexIndex,
    gen: &SparseGenerator,
    f: &[f64],
    lambda: f64,
    mut potential: Vec<f64>,
    report: SolveReport,
) -> Result<PoissonSolution> {
    let kappa = model.kappa();
    let mu = gen.mu();
    let threshold = model.n() - model.ell();
    let mut num = vec![Kahan::new(); kappa];
    let mut den = vec![Kahan::new(); kappa];
    idx.visit(|rank, eta| {
        for (x, &k) in eta.iter().enumerate() {
            if k >= threshold {
                num[x].add(mu[rank as usize] * potential[rank as usize]);
                den[x].add(mu[rank as usize]);
                break;
            }
        }
    });
    let mut well_means: Vec<f64> = (0..kappa)
        .map(|x| num[x].value() / den[x].value())
        .collect();
    // Fix the additive constant so the well averages and the target have
    // the same total.
    let shift = (f.iter().sum::<f64>() - well_means.iter().sum::<f64>()) / kappa as f64;
    for v in potential.iter_mut() {
        *v += shift;
    }
    for v in well_means.iter_mut() {
        *v += shift;
    }
    let max_dev = well_means
        .iter()
        .zip(f)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let dirichlet = gen.dirichlet(&potential);
    Ok(PoissonSolution {
        lambda,
        potential,
        well_means,
        max_dev,
        dirichlet,
        report,
    })
}

/// Solve `(-lambda + L) F = G` over the full configuration space, where
/// `G` places `-lambda f(x) + (L_chain f)(x)` on the well of `x` and the
/// generator is the speeded one.
///
/// With `lambda = 0` the solution is fixed by projecting onto mean-zero
/// functions and shifting so the well averages of `F` sum to `sum f`.
pub fn solve_poisson(
    model: &ZrpModel,
    idx: &SimplexIndex,
    gen: &SparseGenerator,
    f: &[f64],
    lambda: f64,
) -> Result<PoissonSolution> {
    if !gen.speeded() {
        return Err(CoreError::argument("poisson: generator must be speeded"));
    }
    let target = poisson_target(model, idx, f, lambda)?;
    let n = target.len();
    let mu = gen.mu();
    // rhs of the positive-definite form: (lambda I - L) F = -G.
    let rhs: Vec<f64> = target.iter().map(|&g| -g).collect();
    let diag = gen.diagonal();
    let jacobi: Vec<f64> = diag.iter().map(|&d| lambda - d).collect();
    let op = |v: &[f64], out: &mut [f64]| {
        gen.apply_into(v, out);
        for i in 0..n {
            out[i] = lambda * v[i] - out[i];
        }
    };
    if lambda == 0.0 {
        // The target must be orthogonal to constants for solvability.
        let mean = mu_mean(mu, &rhs);
        let scale = rhs.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        if mean.abs() > 1e-8 * scale.max(1e-300) {
            return Err(CoreError::numeric(format!(
                "poisson: target has nonzero stationary mean {mean:.3e}"
            )));
        }
    }
    let (potential, report) = pcg(
        &op,
        mu,
        &rhs,
        Some(&jacobi),
        lambda == 0.0,
        1e-10,
        200_000,
    )?;
    // Hard invariant on the unprojected residual.
    let scale = target.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    if report.inf_residual > 1e-8 * scale.max(1e-300) {
        return Err(CoreError::numeric(format!(
            "poisson: residual {:.3e} exceeds 1e-8 * {scale:.3e}",
            report.inf_residual
        )));
    }
    poisson_postprocess(model, idx, gen, f, lambda, potential, report)
}

/// Dense LU variant of [`solve_poisson`] for cross-checks at small sizes.
pub fn solve_poisson_dense(
    model: &ZrpModel,
    idx: &SimplexIndex,
    gen: &SparseGenerator,
    f: &[f64],
    lambda: f64,
) -> Result<PoissonSolution> {
    let n = gen.size();
    if n > DENSE_SOLVE_CAP {
        return Err(CoreError::resource(format!(
            "dense poisson: {n} states exceed cap {DENSE_SOLVE_CAP}"
        )));
    }
    if !gen.speeded() {
        return Err(CoreError::argument("poisson: generator must be speeded"));
    }
    let target = poisson_target(model, idx, f, lambda)?;
    let mu = gen.mu();
    // A = lambda I - L, plus the rank-one term 1 mu^T when lambda = 0 to
    // pin the constant mode (the solution is then automatically mean
    // zero because the target is).
    let mut a = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let (cols, vals) = gen.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            a[(i, j)] = -v;
        }
        a[(i, i)] += lambda;
    }
    if lambda == 0.0 {
        for i in 0..n {
            for j in 0..n {
                a[(i, j)] += mu[j];
            }
        }
    }
    let rhs = DVector::from_iterator(n, target.iter().map(|&g| -g));
    let sol = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| CoreError::numeric("dense poisson: singular system"))?;
    let potential: Vec<f64> = sol.iter().cloned().collect();
    let report = SolveReport {
        iterations: 0,
        rel_residual: 0.0,
        inf_residual: 0.0,
    };
    poisson_postprocess(model, idx, gen, f, lambda, potential, report)
}

/// Equilibrium potential and capacity between two configuration sets.
#[derive(Clone, Debug)]
pub struct CapacitySolution {
    /// Dirichlet energy of the equilibrium potential.
    pub value: f64,
    /// Same quantity computed from the independent swapped solve.
    pub value_swapped: f64,
    pub potential: Vec<f64>,
    pub report: SolveReport,
}

/// Capacity between `{a}` and `{b}` under the given generator, via the
/// equilibrium potential (1 on `a`, 0 on `b`, harmonic elsewhere).
///
/// The swapped problem is solved independently; the two energies must
/// agree to 1e-8 relative or the call fails.
pub fn exact_capacity(
    idx: &SimplexIndex,
    gen: &SparseGenerator,
    in_a: &dyn Fn(&[u32]) -> bool,
    in_b: &dyn Fn(&[u32]) -> bool,
) -> Result<CapacitySolution> {
    let n = gen.size();
    let mut label = vec![0u8; n];
    let mut count_a = 0u64;
    let mut count_b = 0u64;
    let mut conflict = false;
    idx.visit(|rank, eta| {
        let a = in_a(eta);
        let b = in_b(eta);
        if a && b {
            conflict = true;
        }
        if a {
            label[rank as usize] = 1;
            count_a += 1;
        } else if b {
            label[rank as usize] = 2;
            count_b += 1;
        }
    });
    if conflict {
        return Err(CoreError::argument("capacity: source and sink overlap"));
    }
    if count_a == 0 || count_b == 0 {
        return Err(CoreError::argument(
            "capacity: source and sink must be nonempty",
        ));
    }
    let solve_one = |src: u8| -> Result<(Vec<f64>, SolveReport)> {
        let mu = gen.mu();
        let interior: Vec<bool> = label.iter().map(|&l| l == 0).collect();
        let mut rhs = vec![0.0; n];
        for i in 0..n {
            if !interior[i] {
                continue;
            }
            let (cols, vals) = gen.row(i);
            let mut acc = 0.0;
            for (&j, &v) in cols.iter().zip(vals) {
                if label[j] == src {
                    acc += v;
                }
            }
            rhs[i] = acc;
        }
        let diag = gen.diagonal();
        let jacobi: Vec<f64> = (0..n)
            .map(|i| if interior[i] { -diag[i] } else { 1.0 })
            .collect();
        let op = |v: &[f64], out: &mut [f64]| {
            gen.apply_into(v, out);
            for i in 0..n {
                out[i] = if interior[i] { -out[i] } else { 0.0 };
            }
        };
        let (sol, report) = pcg(&op, mu, &rhs, Some(&jacobi), false, 1e-12, 200_000)?;
        let mut h = vec![0.0; n];
        for i in 0..n {
            h[i] = if interior[i] {
                sol[i]
            } else if label[i] == src {
                1.0
            } else {
                0.0
            };
        }
        Ok((h, report))
    };
    let (h, report) = solve_one(1)?;
    let (h_swapped, _) = solve_one(2)?;
    let value = gen.dirichlet(&h);
    let value_swapped = gen.dirichlet(&h_swapped);
    if (value - value_swapped).abs() > 1e-8 * value.abs().max(value_swapped.abs()) {
        return Err(CoreError::numeric(format!(
            "capacity: direct {value:.12e} and swapped {value_swapped:.12e} solves disagree"
        )));
    }
    Ok(CapacitySolution {
        value,
        value_swapped,
        potential: h,
        report,
    })
}
