//! The site-level Markov chain that the condensate location follows on
//! the `n^2 log n` time scale, and comparisons between sampled order
//! paths and that chain.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::simulate::OrderPath;
use crate::walk::WalkSpec;

/// Limit chain on sites: jump rate `6 kappa cap(x, y)` between every pair,
/// where `cap` is the pair capacity of the underlying walk.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LimitChain {
    kappa: usize,
    rates: Vec<f64>,
}

impl LimitChain {
    pub fn from_walk(walk: &WalkSpec) -> Result<Self> {
        let kappa = walk.kappa();
        let mut rates = vec![0.0; kappa * kappa];
        for x in 0..kappa {
            for y in (x + 1)..kappa {
                let cap = walk.capacity(&[x], &[y])?;
                let r = 6.0 * kappa as f64 * cap;
                rates[x * kappa + y] = r;
                rates[y * kappa + x] = r;
            }
        }
        Ok(LimitChain { kappa, rates })
    }

    #[inline]
    pub fn kappa(&self) -> usize {
        self.kappa
    }

    #[inline]
    pub fn rate(&self, x: usize, y: usize) -> f64 {
        self.rates[x * self.kappa + y]
    }

    pub fn total_rate(&self, x: usize) -> f64 {
        (0..self.kappa).map(|y| self.rate(x, y)).sum()
    }

    /// Mean holding time at a site.
    pub fn holding_mean(&self, x: usize) -> f64 {
        1.0 / self.total_rate(x)
    }

    /// Jump distribution out of `x`.
    pub fn embedded(&self, x: usize) -> Vec<f64> {
        let total = self.total_rate(x);
        (0..self.kappa).map(|y| self.rate(x, y) / total).collect()
    }

    /// `(L f)(x) = sum_y rate(x,y) (f(y) - f(x))`.
    pub fn apply(&self, f: &[f64], x: usize) -> f64 {
        (0..self.kappa)
            .map(|y| self.rate(x, y) * (f[y] - f[x]))
            .sum()
    }
}

/// Per-site summary of sampled sojourns against the limit chain.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SiteComparison {
    pub site: usize,
    /// Completed sojourns observed at this site.
    pub sojourns: u64,
    /// Empirical mean holding time, in `n^2 log n` units.
    pub mean_holding: f64,
    /// Half-width of the normal 95% interval around the mean.
    pub ci_half_width: f64,
    pub expected_holding: f64,
    /// Observed jump counts to each site.
    pub jump_counts: Vec<u64>,
    /// Total-variation distance between the empirical jump law and the
    /// embedded chain at this site.
    pub tv_embedded: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CompareReport {
    pub sites: Vec<SiteComparison>,
    pub max_tv: f64,
    pub total_transitions: u64,
    /// Fraction of simulated time spent outside every well.
    pub delta_fraction: f64,
}

/// Compare sampled order paths with the limit chain.
///
/// Only completed sojourns (those ended by a transition, not by the
/// horizon) enter the holding-time statistics.
pub fn compare(paths: &[OrderPath], chain: &LimitChain) -> Result<CompareReport> {
    let kappa = chain.kappa();
    let mut durations: Vec<Vec<f64>> = vec![Vec::new(); kappa];
    let mut jumps = vec![vec![0u64; kappa]; kappa];
    let mut time_total = 0.0;
    let mut time_delta = 0.0;
    let mut transitions = 0u64;
    for path in paths {
        time_total += path.total_time;
        time_delta += path.delta_time;
        let entries = &path.entries;
        for (i, &(site, sojourn)) in entries.iter().enumerate() {
            if site >= kappa {
                return Err(CoreError::argument(format!(
                    "compare: path visits site {site}, chain has {kappa}"
                )));
            }
            let completed = i + 1 < entries.len() || !path.censored;
            if completed && i + 1 < entries.len() {
                durations[site].push(sojourn);
                jumps[site][entries[i + 1].0] += 1;
                transitions += 1;
            } else if completed {
                // Final entry that ended exactly at a transition out of
                // the observation window: keep the duration, no jump.
                durations[site].push(sojourn);
            }
        }
    }
    let mut sites = Vec::with_capacity(kappa);
    let mut max_tv: f64 = 0.0;
    for x in 0..kappa {
        let n = durations[x].len() as u64;
        let mean = if n > 0 {
            durations[x].iter().sum::<f64>() / n as f64
        } else {
            f64::NAN
        };
        let ci = if n > 1 {
            let var = durations[x]
                .iter()
                .map(|&d| (d - mean) * (d - mean))
                .sum::<f64>()
                / (n as f64 - 1.0);
            1.96 * (var / n as f64).sqrt()
        } else {
            f64::INFINITY
        };
        let total_jumps: u64 = jumps[x].iter().sum();
        let embedded = chain.embedded(x);
        let tv = if total_jumps > 0 {
            0.5 * (0..kappa)
                .map(|y| (jumps[x][y] as f64 / total_jumps as f64 - embedded[y]).abs())
                .sum::<f64>()
        } else {
            f64::NAN
        };
        if tv.is_finite() {
            max_tv = max_tv.max(tv);
        }
        sites.push(SiteComparison {
            site: x,
            sojourns: n,
            mean_holding: mean,
            ci_half_width: ci,
            expected_holding: chain.holding_mean(x),
            jump_counts: jumps[x].clone(),
            tv_embedded: tv,
        });
    }
    Ok(CompareReport {
        sites,
        max_tv,
        total_transitions: transitions,
        delta_fraction: if time_total > 0.0 {
            time_delta / time_total
        } else {
            0.0
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn complete_graph_rates() {
        let w2 = WalkSpec::complete_unit(2).unwrap();
        let c2 = LimitChain::from_walk(&w2).unwrap();
        assert_abs_diff_eq!(c2.rate(0, 1), 6.0, epsilon = 1e-10);

        let w3 = WalkSpec::complete_unit(3).unwrap();
        let c3 = LimitChain::from_walk(&w3).unwrap();
        assert_abs_diff_eq!(c3.rate(0, 1), 9.0, epsilon = 1e-10);
        assert_abs_diff_eq!(c3.holding_mean(0), 1.0 / 18.0, epsilon = 1e-12);
    }

    #[test]
    fn relabeling_sites_permutes_the_chain() {
        let w = WalkSpec::new(vec![
            vec![0.0, 1.0, 0.5],
            vec![1.0, 0.0, 2.0],
            vec![0.5, 2.0, 0.0],
        ])
        .unwrap();
        let chain = LimitChain::from_walk(&w).unwrap();
        // Swap sites 0 and 2.
        let perm = [2usize, 1, 0];
        let wp = WalkSpec::new(
            (0..3)
                .map(|x| (0..3).map(|y| w.rate(perm[x], perm[y])).collect())
                .collect(),
        )
        .unwrap();
        let chain_p = LimitChain::from_walk(&wp).unwrap();
        for x in 0..3 {
            for y in 0..3 {
                assert_abs_diff_eq!(
                    chain_p.rate(x, y),
                    chain.rate(perm[x], perm[y]),
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn scaling_the_kernel_scales_the_chain() {
        let w = WalkSpec::new(vec![
            vec![0.0, 1.0, 0.5],
            vec![1.0, 0.0, 2.0],
            vec![0.5, 2.0, 0.0],
        ])
        .unwrap();
        let w3 = WalkSpec::new(
            (0..3)
                .map(|x| (0..3).map(|y| 3.0 * w.rate(x, y)).collect())
                .collect(),
        )
        .unwrap();
        let a = LimitChain::from_walk(&w).unwrap();
        let b = LimitChain::from_walk(&w3).unwrap();
        for x in 0..3 {
            for y in 0..3 {
                assert_abs_diff_eq!(b.rate(x, y), 3.0 * a.rate(x, y), epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn compare_reads_sojourns_and_jumps() {
        let chain = LimitChain::from_walk(&WalkSpec::complete_unit(2).unwrap()).unwrap();
        let paths = vec![OrderPath {
            entries: vec![(0, 0.2), (1, 0.1), (0, 0.3), (1, 0.4)],
            delta_time: 0.05,
            total_time: 1.05,
            events: 100,
            censored: true,
        }];
        let rep = compare(&paths, &chain).unwrap();
        assert_eq!(rep.total_transitions, 3);
        assert_eq!(rep.sites[0].sojourns, 2);
        assert_abs_diff_eq!(rep.sites[0].mean_holding, 0.25, epsilon = 1e-12);
        // Last (censored) sojourn at site 1 is dropped.
        assert_eq!(rep.sites[1].sojourns, 1);
        assert_abs_diff_eq!(rep.delta_fraction, 0.05 / 1.05, epsilon = 1e-12);
        // All observed jumps out of 0 go to 1: TV = 0 for a two-site chain.
        assert_abs_diff_eq!(rep.sites[0].tv_embedded, 0.0, epsilon = 1e-12);
    }
}
