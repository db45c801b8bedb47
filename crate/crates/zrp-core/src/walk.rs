//! Potential theory for a single random walk on the site graph.
//!
//! The walk has a symmetric jump kernel `r(x,y)` on `kappa` sites and the
//! uniform mass `m(x) = 1/kappa` as its reversing measure.  Everything the
//! rest of the crate needs from the graph lives here: equilibrium
//! potentials, capacities, and the coefficient tables `b`, `u`, `z` that
//! feed the quadratic comparison functions.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Tolerance for the internal consistency checks (flux vs. Dirichlet
/// capacity, residuals of potential solves, table identities).
const CHECK_TOL: f64 = 1e-10;

/// Symmetric irreducible jump kernel on a finite site set.
///
/// Invariants enforced at construction: square shape, `kappa >= 2`,
/// nonnegative entries, zero diagonal, exact symmetry up to 1e-12 relative,
/// and connectivity of the positive-rate graph.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "WalkSpecDto", into = "WalkSpecDto")]
pub struct WalkSpec {
    kappa: usize,
    rates: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct WalkSpecDto {
    rates: Vec<Vec<f64>>,
}

impl TryFrom<WalkSpecDto> for WalkSpec {
    type Error = CoreError;
    fn try_from(dto: WalkSpecDto) -> Result<Self> {
        WalkSpec::new(dto.rates)
    }
}

impl From<WalkSpec> for WalkSpecDto {
    fn from(w: WalkSpec) -> Self {
        let k = w.kappa;
        WalkSpecDto {
            rates: (0..k)
                .map(|x| (0..k).map(|y| w.rate(x, y)).collect())
                .collect(),
        }
    }
}

impl WalkSpec {
    pub fn new(rates: Vec<Vec<f64>>) -> Result<Self> {
        let kappa = rates.len();
        if kappa < 2 {
            return Err(CoreError::argument(format!(
                "walk.rates: need at least 2 sites, got {kappa}"
            )));
        }
        let mut flat = vec![0.0; kappa * kappa];
        for (x, row) in rates.iter().enumerate() {
            if row.len() != kappa {
                return Err(CoreError::argument(format!(
                    "walk.rates[{x}]: expected {kappa} entries, got {}",
                    row.len()
                )));
            }
            for (y, &v) in row.iter().enumerate() {
                if !v.is_finite() || v < 0.0 {
                    return Err(CoreError::argument(format!(
                        "walk.rates[{x}][{y}]: rates must be finite and nonnegative, got {v}"
                    )));
                }
                if x == y && v != 0.0 {
                    return Err(CoreError::argument(format!(
                        "walk.rates[{x}][{x}]: diagonal must be zero, got {v}"
                    )));
                }
                flat[x * kappa + y] = v;
            }
        }
        // Symmetry: reject rather than repair.
        for x in 0..kappa {
            for y in (x + 1)..kappa {
                let a = flat[x * kappa + y];
                let b = flat[y * kappa + x];
                if (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1.0) {
                    return Err(CoreError::argument(format!(
                        "walk.rates: kernel must be symmetric, rates[{x}][{y}]={a} vs rates[{y}][{x}]={b}"
                    )));
                }
            }
        }
        let spec = WalkSpec { kappa, rates: flat };
        if !spec.is_connected() {
            return Err(CoreError::argument(
                "walk.rates: positive-rate graph must be connected",
            ));
        }
        Ok(spec)
    }

    /// Complete graph with unit rates.
    pub fn complete_unit(kappa: usize) -> Result<Self> {
        let rates = (0..kappa)
            .map(|x| {
                (0..kappa)
                    .map(|y| if x == y { 0.0 } else { 1.0 })
                    .collect()
            })
            .collect();
        WalkSpec::new(rates)
    }

    fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.kappa];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(x) = stack.pop() {
            for y in 0..self.kappa {
                if !seen[y] && self.rate(x, y) > 0.0 {
                    seen[y] = true;
                    stack.push(y);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    #[inline]
    pub fn kappa(&self) -> usize {
        self.kappa
    }

    #[inline]
    pub fn rate(&self, x: usize, y: usize) -> f64 {
        self.rates[x * self.kappa + y]
    }

    /// Total jump rate out of `x`.
    pub fn total_rate(&self, x: usize) -> f64 {
        (0..self.kappa).map(|y| self.rate(x, y)).sum()
    }

    /// Uniform reversing mass per site.
    #[inline]
    pub fn site_mass(&self) -> f64 {
        1.0 / self.kappa as f64
    }

    pub fn neighbors(&self, x: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (0..self.kappa)
            .map(move |y| (y, self.rate(x, y)))
            .filter(|&(_, r)| r > 0.0)
    }

    /// `(L f)(x) = sum_y r(x,y) (f(y) - f(x))`.
    pub fn apply_generator(&self, f: &[f64]) -> Vec<f64> {
        assert_eq!(f.len(), self.kappa);
        (0..self.kappa)
            .map(|x| {
                (0..self.kappa)
                    .map(|y| self.rate(x, y) * (f[y] - f[x]))
                    .sum()
            })
            .collect()
    }

    /// `D(f) = (1/2) sum_{x,y} m(x) r(x,y) (f(y)-f(x))^2`.
    pub fn dirichlet_form(&self, f: &[f64]) -> f64 {
        assert_eq!(f.len(), self.kappa);
        let m = self.site_mass();
        let mut d = 0.0;
        for x in 0..self.kappa {
            for y in 0..self.kappa {
                let df = f[y] - f[x];
                d += 0.5 * m * self.rate(x, y) * df * df;
            }
        }
        d
    }

    fn check_disjoint_nonempty(&self, a: &[usize], b: &[usize]) -> Result<()> {
        if a.is_empty() || b.is_empty() {
            return Err(CoreError::argument(
                "equilibrium potential: source and sink must be nonempty",
            ));
        }
        for &x in a.iter().chain(b.iter()) {
            if x >= self.kappa {
                return Err(CoreError::argument(format!(
                    "equilibrium potential: site {x} out of range (kappa={})",
                    self.kappa
                )));
            }
        }
        for &x in a {
            if b.contains(&x) {
                return Err(CoreError::argument(format!(
                    "equilibrium potential: site {x} appears in both source and sink"
                )));
            }
        }
        Ok(())
    }

    /// Equilibrium potential `h`: harmonic off `a ∪ b`, `1` on `a`, `0` on `b`.
    ///
    /// Solved densely; the residual of `L h` on the interior must come out
    /// below 1e-10 or the call fails.
    pub fn equilibrium_potential(&self, a: &[usize], b: &[usize]) -> Result<Vec<f64>> {
        self.check_disjoint_nonempty(a, b)?;
        let k = self.kappa;
        let mut h = vec![0.0; k];
        for &x in a {
            h[x] = 1.0;
        }
        let interior: Vec<usize> = (0..k)
            .filter(|x| !a.contains(x) && !b.contains(x))
            .collect();
        if !interior.is_empty() {
            let n = interior.len();
            let mut mat = DMatrix::<f64>::zeros(n, n);
            let mut rhs = DVector::<f64>::zeros(n);
            for (i, &x) in interior.iter().enumerate() {
                mat[(i, i)] = -self.total_rate(x);
                for (j, &y) in interior.iter().enumerate() {
                    if j != i {
                        mat[(i, j)] = self.rate(x, y);
                    }
                }
                let flux_to_a: f64 = a.iter().map(|&y| self.rate(x, y)).sum();
                rhs[i] = -flux_to_a;
            }
            let lu = mat.lu();
            let sol = lu.solve(&rhs).ok_or_else(|| {
                CoreError::numeric("equilibrium potential: singular interior system")
            })?;
            for (i, &x) in interior.iter().enumerate() {
                h[x] = sol[i];
            }
        }
        // Residual check on the interior.
        let lh = self.apply_generator(&h);
        for &x in &interior {
            if lh[x].abs() > CHECK_TOL {
                return Err(CoreError::numeric(format!(
                    "equilibrium potential: residual {} at site {x}",
                    lh[x]
                )));
            }
        }
        Ok(h)
    }

    /// Capacity between disjoint site sets, with the flux cross-check.
    ///
    /// The returned value is the Dirichlet form of the equilibrium
    /// potential.  Two independent flux evaluations
    /// `-sum_{x in a} m(x) (L h_{a,b})(x)` and
    /// `+sum_{x in a} m(x) (L h_{b,a})(x)` must agree with it to 1e-10.
    pub fn capacity(&self, a: &[usize], b: &[usize]) -> Result<f64> {
        let h_ab = self.equilibrium_potential(a, b)?;
        let h_ba = self.equilibrium_potential(b, a)?;
        let cap = self.dirichlet_form(&h_ab);
        let m = self.site_mass();
        let lh_ab = self.apply_generator(&h_ab);
        let lh_ba = self.apply_generator(&h_ba);
        let flux_out: f64 = a.iter().map(|&x| -m * lh_ab[x]).sum();
        let flux_in: f64 = a.iter().map(|&x| m * lh_ba[x]).sum();
        let scale = cap.abs().max(1.0);
        if (flux_out - cap).abs() > CHECK_TOL * scale
            || (flux_in - cap).abs() > CHECK_TOL * scale
        {
            return Err(CoreError::numeric(format!(
                "capacity cross-check failed: dirichlet={cap}, flux_out={flux_out}, flux_in={flux_in}"
            )));
        }
        Ok(cap)
    }

    /// Shortest route between two sites along positive-rate edges.
    ///
    /// Breadth-first with smallest-index tie-breaking, so the route is a
    /// deterministic function of the kernel.  Returns the vertex list
    /// including both endpoints.
    pub fn shortest_route(&self, from: usize, to: usize) -> Vec<usize> {
        assert!(from < self.kappa && to < self.kappa);
        if from == to {
            return vec![from];
        }
        let mut parent = vec![usize::MAX; self.kappa];
        let mut queue = std::collections::VecDeque::new();
        parent[from] = from;
        queue.push_back(from);
        while let Some(x) = queue.pop_front() {
            if x == to {
                break;
            }
            for y in 0..self.kappa {
                if self.rate(x, y) > 0.0 && parent[y] == usize::MAX {
                    parent[y] = x;
                    queue.push_back(y);
                }
            }
        }
        assert_ne!(parent[to], usize::MAX, "graph is connected");
        let mut route = vec![to];
        let mut cur = to;
        while cur != from {
            cur = parent[cur];
            route.push(cur);
        }
        route.reverse();
        route
    }

    /// Coefficient tables attached to a subset `a` of the sites other than
    /// `x0`.  See [`CoefficientTables`] for the definitions and the
    /// identities validated here.
    pub fn coefficient_tables(&self, x0: usize, a: &[usize]) -> Result<CoefficientTables> {
        let k = self.kappa;
        if x0 >= k {
            return Err(CoreError::argument(format!(
                "coefficient tables: x0={x0} out of range"
            )));
        }
        if a.is_empty() {
            return Err(CoreError::argument(
                "coefficient tables: subset must be nonempty",
            ));
        }
        let mut set: Vec<usize> = a.to_vec();
        set.sort_unstable();
        set.dedup();
        if set.len() != a.len() {
            return Err(CoreError::argument(
                "coefficient tables: subset has repeated sites",
            ));
        }
        if set.contains(&x0) {
            return Err(CoreError::argument(format!(
                "coefficient tables: subset must avoid the reference site {x0}"
            )));
        }
        if set.iter().any(|&x| x >= k) {
            return Err(CoreError::argument("coefficient tables: site out of range"));
        }
        let complement: Vec<usize> = (0..k).filter(|x| !set.contains(x)).collect();
        let m = self.site_mass();

        let mut b = vec![0.0; k * k];
        let mut u = vec![0.0; k * k];
        for &x in &set {
            let h = self.equilibrium_potential(&[x], &complement)?;
            let cap = self.capacity(&[x], &complement)?;
            let lh = self.apply_generator(&h);
            for &y in &set {
                b[x * k + y] = m * h[y] / cap;
            }
            for &y in &complement {
                u[x * k + y] = m * lh[y] / cap;
            }
        }

        // z_x = (1/2) sum_y r(x,y) [b_xx + b_yy - 2 b_xy], with b extended
        // by zero off the subset.
        let mut z = vec![0.0; k];
        for x in 0..k {
            let mut acc = 0.0;
            for y in 0..k {
                acc += self.rate(x, y) * (b[x * k + x] + b[y * k + y] - 2.0 * b[x * k + y]);
            }
            z[x] = 0.5 * acc;
        }

        let tables = CoefficientTables {
            kappa: k,
            x0,
            set,
            complement,
            b,
            u,
            z,
        };
        tables.validate(self)?;
        Ok(tables)
    }
}

/// Tables `b`, `u`, `z` for one subset `A` of the sites other than `x0`.
///
/// With `h_x` the equilibrium potential between `{x}` and the complement
/// `A^c` and `cap_x` the corresponding capacity:
///
/// - `b[x][y] = m(x) h_x(y) / cap_x` for `x, y` in `A`, zero otherwise;
/// - `u[x][y] = m(x) (L h_x)(y) / cap_x` for `x` in `A`, `y` in `A^c`;
/// - `z[x] = (1/2) sum_y r(x,y) (b[x][x] + b[y][y] - 2 b[x][y])`.
///
/// Validated identities (all to 1e-10): `b` is symmetric, each `u`-row sums
/// to one, and `(1/2) sum_y r(x,y) (b[y][y] - b[x][x])` equals `z[x] - 1`
/// on `A` and `z[x]` off `A`.
#[derive(Clone, Debug)]
pub struct CoefficientTables {
    kappa: usize,
    pub x0: usize,
    pub set: Vec<usize>,
    pub complement: Vec<usize>,
    b: Vec<f64>,
    u: Vec<f64>,
    z: Vec<f64>,
}

impl CoefficientTables {
    #[inline]
    pub fn b(&self, x: usize, y: usize) -> f64 {
        self.b[x * self.kappa + y]
    }

    #[inline]
    pub fn u(&self, x: usize, y: usize) -> f64 {
        self.u[x * self.kappa + y]
    }

    #[inline]
    pub fn z(&self, x: usize) -> f64 {
        self.z[x]
    }

    pub fn max_b(&self) -> f64 {
        self.b.iter().cloned().fold(0.0, f64::max)
    }

    pub fn min_diag_b(&self) -> f64 {
        self.set
            .iter()
            .map(|&x| self.b(x, x))
            .fold(f64::INFINITY, f64::min)
    }

    fn validate(&self, walk: &WalkSpec) -> Result<()> {
        let k = self.kappa;
        // Symmetry of b on A x A.
        for &x in &self.set {
            for &y in &self.set {
                if (self.b(x, y) - self.b(y, x)).abs() > CHECK_TOL {
                    return Err(CoreError::numeric(format!(
                        "coefficient tables: b asymmetric at ({x},{y}): {} vs {}",
                        self.b(x, y),
                        self.b(y, x)
                    )));
                }
            }
        }
        // Row sums of u over the complement.
        for &x in &self.set {
            let s: f64 = self.complement.iter().map(|&y| self.u(x, y)).sum();
            if (s - 1.0).abs() > CHECK_TOL {
                return Err(CoreError::numeric(format!(
                    "coefficient tables: u row for site {x} sums to {s}, expected 1"
                )));
            }
        }
        // Drift identity for z.
        for x in 0..k {
            let drift: f64 = (0..k)
                .map(|y| 0.5 * walk.rate(x, y) * (self.b(y, y) - self.b(x, x)))
                .sum();
            let expected = if self.set.contains(&x) {
                self.z(x) - 1.0
            } else {
                self.z(x)
            };
            if (drift - expected).abs() > CHECK_TOL {
                return Err(CoreError::numeric(format!(
                    "coefficient tables: drift identity failed at site {x}: {drift} vs {expected}"
                )));
            }
        }
        Ok(())
    }
}
