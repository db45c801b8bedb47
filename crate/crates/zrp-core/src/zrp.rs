//! The condensing zero-range model: rates, stationary measure, wells.
//!
//! A site holding `k` particles emits one at rate `g(k)` with
//! `g(0) = 0`, `g(1) = 1`, `g(k) = k/(k-1)`.  The stationary measure on
//! configurations with `n` particles is proportional to `1/a(eta)` with
//! `a(0) = 1`, `a(k) = k`, taken as a product over sites.  Because `g`
//! decreases toward one, nearly all mass concentrates on configurations
//! where a single site holds all but `O(n/log n)` particles; the families
//! of wells defined on [`ZrpModel`] grade how far a configuration is from
//! those condensed states.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::numeric::Kahan;
use crate::walk::WalkSpec;

/// Departure rate from a site holding `k` particles.
#[inline]
pub fn g_rate(k: u32) -> f64 {
    match k {
        0 => 0.0,
        1 => 1.0,
        k => k as f64 / (k - 1) as f64,
    }
}

/// Single-site stationary weight denominator: `a(0) = 1`, `a(k) = k`.
#[inline]
pub fn a_weight(k: u32) -> f64 {
    if k == 0 {
        1.0
    } else {
        k as f64
    }
}

/// Unnormalized stationary weight of a configuration, `prod_x 1/a(eta_x)`.
pub fn stationary_weight(eta: &[u32]) -> f64 {
    eta.iter().map(|&k| 1.0 / a_weight(k)).product()
}

/// Layered partition sums for the stationary measure.
///
/// `s(k, m)` is the sum of `prod 1/a` over configurations of `m` particles
/// on `k` sites; tables are built for `k < kappa` plus the single scalar
/// `s(kappa, n)` that normalizes the measure.  All sums are compensated.
#[derive(Clone, Debug)]
pub struct MeasureTables {
    n: u32,
    kappa: usize,
    /// `layers[k-1][m] = s(k, m)` for `k = 1..kappa-1`, `m = 0..=n`.
    layers: Vec<Vec<f64>>,
    /// `s(kappa, n)`.
    total: f64,
}

/// Cap on `n` for table construction; layers cost `O(n^2)` each.
pub const DEFAULT_TABLE_CAP: u32 = 100_000;

pub fn partition_tables(n: u32, kappa: usize) -> Result<MeasureTables> {
    partition_tables_capped(n, kappa, DEFAULT_TABLE_CAP)
}

pub fn partition_tables_capped(n: u32, kappa: usize, cap: u32) -> Result<MeasureTables> {
    if kappa < 2 {
        return Err(CoreError::argument(format!(
            "partition tables: need kappa >= 2, got {kappa}"
        )));
    }
    if n < 1 {
        return Err(CoreError::argument("partition tables: need n >= 1"));
    }
    if n > cap {
        return Err(CoreError::resource(format!(
            "partition tables: n={n} exceeds cap {cap}"
        )));
    }
    let len = n as usize + 1;
    let mut layers: Vec<Vec<f64>> = Vec::with_capacity(kappa - 1);
    let first: Vec<f64> = (0..len).map(|m| 1.0 / a_weight(m as u32)).collect();
    layers.push(first);
    for _k in 2..kappa {
        let prev = layers.last().unwrap();
        let mut next = vec![0.0; len];
        for (m, slot) in next.iter_mut().enumerate() {
            let mut acc = Kahan::new();
            for i in 0..=m {
                acc.add(prev[m - i] / a_weight(i as u32));
            }
            *slot = acc.value();
        }
        layers.push(next);
    }
    let last = layers.last().unwrap();
    let mut acc = Kahan::new();
    for i in 0..len {
        acc.add(last[len - 1 - i] / a_weight(i as u32));
    }
    let total = acc.value();
    Ok(MeasureTables {
        n,
        kappa,
        layers,
        total,
    })
}

impl MeasureTables {
    #[inline]
    pub fn n(&self) -> u32 {
        self.n
    }

    #[inline]
    pub fn kappa(&self) -> usize {
        self.kappa
    }

    /// `s(k, m)` for `1 <= k < kappa`.
    pub fn layer(&self, k: usize, m: u32) -> f64 {
        self.layers[k - 1][m as usize]
    }

    /// Normalizing sum `s(kappa, n)` of the stationary weights.
    #[inline]
    pub fn normalizer(&self) -> f64 {
        self.total
    }

    /// Scaled partition value `n * s(kappa, n) / (log n)^(kappa-1)`;
    /// converges to `kappa` as `n` grows.
    pub fn scaled_partition(&self) -> f64 {
        let n = self.n as f64;
        n * self.total / n.ln().powi(self.kappa as i32 - 1)
    }

    /// Marginal mass of one site holding exactly `j` particles.
    pub fn site_marginal(&self, j: u32) -> Result<f64> {
        if j > self.n {
            return Err(CoreError::argument(format!(
                "site marginal: occupation {j} exceeds n={}",
                self.n
            )));
        }
        Ok(1.0 / a_weight(j) * self.layer(self.kappa - 1, self.n - j) / self.total)
    }

    /// Mass of a threshold well `{eta_x >= n - p}` at one fixed site.
    ///
    /// `p` must be strictly below `n`; the well then excludes configurations
    /// where the site is not macroscopically occupied.
    pub fn well_probability(&self, p: u32) -> Result<f64> {
        if p >= self.n {
            return Err(CoreError::argument(format!(
                "well probability: width {p} must be below n={}",
                self.n
            )));
        }
        let mut acc = Kahan::new();
        // j = n term: the other sites are empty.
        acc.add(1.0 / self.n as f64);
        for j in (self.n - p)..self.n {
            acc.add(1.0 / j as f64 * self.layer(self.kappa - 1, self.n - j));
        }
        Ok(acc.value() / self.total)
    }

    /// Mass of `{eta_y <= ell for all y != x}` at one fixed site `x`.
    pub fn ehat_probability(&self, ell: u32) -> f64 {
        // Convolution layers with every coordinate capped at ell.
        let k_other = self.kappa - 1;
        let smax = ((k_other as u64 * ell as u64).min(self.n as u64)) as usize;
        let mut capped: Vec<f64> = (0..=smax)
            .map(|m| {
                if m as u32 <= ell {
                    1.0 / a_weight(m as u32)
                } else {
                    0.0
                }
            })
            .collect();
        for _k in 2..=k_other {
            let prev = capped;
            let mut next = vec![0.0; smax + 1];
            for (m, slot) in next.iter_mut().enumerate() {
                let mut acc = Kahan::new();
                let top = (m as u32).min(ell);
                for i in 0..=top {
                    acc.add(prev[m - i as usize] / a_weight(i));
                }
                *slot = acc.value();
            }
            capped = next;
        }
        let mut acc = Kahan::new();
        for (s, &w) in capped.iter().enumerate() {
            if w > 0.0 {
                acc.add(w / a_weight(self.n - s as u32));
            }
        }
        acc.value() / self.total
    }

    /// Mass left over once every threshold well of width `p` is removed:
    /// `1 - kappa * well_probability(p)`.
    pub fn bulk_remainder(&self, p: u32) -> Result<f64> {
        Ok(1.0 - self.kappa as f64 * self.well_probability(p)?)
    }
}

/// Position of a configuration relative to the tube around one well.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TubePosition {
    /// Inside the shallow well but outside the deep core.
    Interior,
    /// One jump away from the interior without being in it.
    Boundary,
    Outside,
}

/// Full classification of a configuration against the well families.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StateClass {
    /// Site whose `{eta_x >= n - ell}` well contains the state, if any.
    pub e_site: Option<usize>,
    /// Site whose deep well `{eta_x >= n - floor(n^gamma)}` contains it.
    pub d_site: Option<usize>,
    /// Sites whose shallow well `{eta_x >= n - floor(n/(log n)^beta)}`
    /// contains it (not necessarily unique at small `n`).
    pub w_sites: Vec<usize>,
    /// Whether every site other than `x0` holds at most `ell` particles.
    pub ehat_at_x0: bool,
    /// No `e`-well contains the state.
    pub in_bulk: bool,
    /// Position relative to the tube `W^{x0} minus D^{x0}` and its one-jump
    /// closure.
    pub tube: TubePosition,
}

/// A zero-range model instance: particle count, site kernel, well widths.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ZrpModel {
    n: u32,
    walk: WalkSpec,
    ell: u32,
    gamma: f64,
    beta: f64,
}

impl ZrpModel {
    /// Build with default exponents `gamma = min(0.4, 1/kappa)`,
    /// `beta = 0.5`.
    pub fn new(n: u32, walk: WalkSpec) -> Result<Self> {
        let gamma = (1.0 / walk.kappa() as f64).min(0.4);
        Self::with_params(n, walk, gamma, 0.5)
    }

    pub fn with_params(n: u32, walk: WalkSpec, gamma: f64, beta: f64) -> Result<Self> {
        if n < 2 {
            return Err(CoreError::argument("model: need n >= 2"));
        }
        let ell = (n as f64 / (n as f64).ln()).floor() as u32;
        Self::with_well_width(n, walk, ell, gamma, beta)
    }

    /// Full control over the main well width; used by oracle tests that
    /// need a width other than `floor(n/log n)`.
    pub fn with_well_width(
        n: u32,
        walk: WalkSpec,
        ell: u32,
        gamma: f64,
        beta: f64,
    ) -> Result<Self> {
        if n < 2 {
            return Err(CoreError::argument("model: need n >= 2"));
        }
        if !(0.0..1.0).contains(&gamma) || gamma <= 0.0 {
            return Err(CoreError::argument(format!(
                "model: gamma must lie in (0,1), got {gamma}"
            )));
        }
        if !(0.0..=1.0).contains(&beta) || beta <= 0.0 {
            return Err(CoreError::argument(format!(
                "model: beta must lie in (0,1], got {beta}"
            )));
        }
        if ell < 1 {
            return Err(CoreError::argument("model: well width must be >= 1"));
        }
        if 2 * ell >= n {
            return Err(CoreError::argument(format!(
                "model: wells of width {ell} overlap at n={n}; need 2*ell < n"
            )));
        }
        let model = ZrpModel {
            n,
            walk,
            ell,
            gamma,
            beta,
        };
        let d = model.deep_width();
        let w = model.shallow_width();
        if d >= w {
            return Err(CoreError::argument(format!(
                "model: deep width {d} must be below shallow width {w} (n={n}, gamma={gamma}, beta={beta})"
            )));
        }
        Ok(model)
    }

    #[inline]
    pub fn n(&self) -> u32 {
        self.n
    }

    #[inline]
    pub fn kappa(&self) -> usize {
        self.walk.kappa()
    }

    #[inline]
    pub fn walk(&self) -> &WalkSpec {
        &self.walk
    }

    /// Main well width `floor(n / log n)` (unless overridden).
    #[inline]
    pub fn ell(&self) -> u32 {
        self.ell
    }

    #[inline]
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    #[inline]
    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Deep well width `floor(n^gamma)`.
    pub fn deep_width(&self) -> u32 {
        (self.n as f64).powf(self.gamma).floor() as u32
    }

    /// Shallow well width `floor(n / (log n)^beta)`.
    pub fn shallow_width(&self) -> u32 {
        (self.n as f64 / (self.n as f64).ln().powf(self.beta)).floor() as u32
    }

    /// Relocation time scale `n^2 log n`.
    pub fn theta(&self) -> f64 {
        let n = self.n as f64;
        n * n * n.ln()
    }

    fn check_config(&self, eta: &[u32]) -> Result<()> {
        if eta.len() != self.kappa() {
            return Err(CoreError::argument(format!(
                "configuration has {} sites, model has {}",
                eta.len(),
                self.kappa()
            )));
        }
        let total: u64 = eta.iter().map(|&k| k as u64).sum();
        if total != self.n as u64 {
            return Err(CoreError::argument(format!(
                "configuration holds {total} particles, model has {}",
                self.n
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn in_threshold_well(&self, eta: &[u32], x: usize, p: u32) -> bool {
        eta[x] >= self.n - p
    }

    #[inline]
    pub fn in_e(&self, eta: &[u32], x: usize) -> bool {
        self.in_threshold_well(eta, x, self.ell)
    }

    #[inline]
    pub fn in_d(&self, eta: &[u32], x: usize) -> bool {
        self.in_threshold_well(eta, x, self.deep_width())
    }

    #[inline]
    pub fn in_w(&self, eta: &[u32], x: usize) -> bool {
        self.in_threshold_well(eta, x, self.shallow_width())
    }

    pub fn in_ehat(&self, eta: &[u32], x0: usize) -> bool {
        eta.iter()
            .enumerate()
            .all(|(y, &k)| y == x0 || k <= self.ell)
    }

    /// Interior of the tube: in the shallow well, out of the deep well.
    #[inline]
    pub fn in_tube_interior(&self, eta: &[u32], x0: usize) -> bool {
        self.in_w(eta, x0) && !self.in_d(eta, x0)
    }

    pub fn classify(&self, eta: &[u32], x0: usize) -> Result<StateClass> {
        self.check_config(eta)?;
        if x0 >= self.kappa() {
            return Err(CoreError::argument(format!("x0={x0} out of range")));
        }
        let e_site = (0..self.kappa()).find(|&x| self.in_e(eta, x));
        let d_site = (0..self.kappa()).find(|&x| self.in_d(eta, x));
        let w_sites: Vec<usize> = (0..self.kappa()).filter(|&x| self.in_w(eta, x)).collect();
        let ehat_at_x0 = self.in_ehat(eta, x0);
        let tube = if self.in_tube_interior(eta, x0) {
            TubePosition::Interior
        } else {
            // One jump into the interior makes it a boundary state.
            let mut boundary = false;
            let mut scratch = eta.to_vec();
            'outer: for x in 0..self.kappa() {
                if eta[x] == 0 {
                    continue;
                }
                for (y, _) in self.walk.neighbors(x) {
                    scratch[x] -= 1;
                    scratch[y] += 1;
                    let hit = self.in_tube_interior(&scratch, x0);
                    scratch[y] -= 1;
                    scratch[x] += 1;
                    if hit {
                        boundary = true;
                        break 'outer;
                    }
                }
            }
            if boundary {
                TubePosition::Boundary
            } else {
                TubePosition::Outside
            }
        };
        Ok(StateClass {
            e_site,
            d_site,
            w_sites,
            ehat_at_x0,
            in_bulk: e_site.is_none(),
            tube,
        })
    }
}
