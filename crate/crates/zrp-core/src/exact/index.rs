//! Dense enumeration of configuration spaces.
//!
//! Two index families: the full simplex of `n` particles on `kappa` sites
//! in lexicographic order, and box spaces (mixed radix) for restricted
//! chains where every coordinate is capped.

use crate::error::{CoreError, Result};

/// Default cap on enumerated state counts.
pub const DEFAULT_STATE_CAP: u64 = 2_000_000;

/// Lexicographic index of `{eta : sum eta = n}` over `kappa` sites.
///
/// Ranks are computed from cumulative counting tables, so both directions
/// cost `O(kappa)` (plus a binary search per coordinate when unranking).
#[derive(Clone, Debug)]
pub struct SimplexIndex {
    n: u32,
    kappa: usize,
    /// `counts[k][m]` = number of configurations of `m` particles on `k`
    /// sites, i.e. `C(m+k-1, k-1)`.
    counts: Vec<Vec<u64>>,
    size: u64,
}

impl SimplexIndex {
    pub fn new(n: u32, kappa: usize, cap: u64) -> Result<Self> {
        if kappa < 2 {
            return Err(CoreError::argument("state index: need kappa >= 2"));
        }
        let len = n as usize + 1;
        // Pascal recursion in u128, checked against the cap before casting.
        let mut wide: Vec<Vec<u128>> = vec![vec![0; len]; kappa + 1];
        wide[0][0] = 1;
        for k in 1..=kappa {
            wide[k][0] = 1;
            for m in 1..len {
                wide[k][m] = wide[k - 1][m] + wide[k][m - 1];
            }
        }
        let size_wide = wide[kappa][n as usize];
        if size_wide > cap as u128 {
            return Err(CoreError::resource(format!(
                "state index: {size_wide} configurations exceed cap {cap}"
            )));
        }
        let counts: Vec<Vec<u64>> = wide
            .into_iter()
            .map(|row| row.into_iter().map(|v| v as u64).collect())
            .collect();
        let size = counts[kappa][n as usize];
        Ok(SimplexIndex {
            n,
            kappa,
            counts,
            size,
        })
    }

    #[inline]
    pub fn n(&self) -> u32 {
        self.n
    }

    #[inline]
    pub fn kappa(&self) -> usize {
        self.kappa
    }

    #[inline]
    pub fn size(&self) -> u64 {
        self.size
    }

    /// Number of configurations of `m` particles on `k` sites.
    #[inline]
    fn count(&self, k: usize, m: u32) -> u64 {
        self.counts[k][m as usize]
    }

    /// Rank of a configuration in lexicographic order.
    pub fn rank(&self, eta: &[u32]) -> u64 {
        debug_assert_eq!(eta.len(), self.kappa);
        let mut r = 0u64;
        let mut rem = self.n;
        for i in 0..self.kappa - 1 {
            let sites_after = self.kappa - 1 - i;
            // Configurations whose value at position i is below eta[i]:
            // cumulative counts via one extra layer.
            r += self.count(sites_after + 1, rem) - self.count(sites_after + 1, rem - eta[i]);
            rem -= eta[i];
        }
        r
    }

    /// Configuration at a given rank.
    pub fn unrank(&self, rank: u64, out: &mut Vec<u32>) {
        debug_assert!(rank < self.size);
        out.clear();
        out.resize(self.kappa, 0);
        let mut r = rank;
        let mut rem = self.n;
        for i in 0..self.kappa - 1 {
            let sites_after = self.kappa - 1 - i;
            let total = self.count(sites_after + 1, rem);
            // Largest v with (configurations below value v) <= r.
            let below = |v: u32| total - self.count(sites_after + 1, rem - v);
            let mut lo = 0u32;
            let mut hi = rem;
            while lo < hi {
                let mid = (lo + hi + 1) / 2;
                if below(mid) <= r {
                    lo = mid;
                } else {
                    hi = mid - 1;
                }
            }
            out[i] = lo;
            r -= below(lo);
            rem -= lo;
        }
        out[self.kappa - 1] = rem;
    }

    /// In-place lexicographic successor; returns false after the last
    /// configuration.
    pub fn next_config(eta: &mut [u32]) -> bool {
        let k = eta.len();
        // Rightmost position before the last that can absorb one particle
        // from the suffix.
        let mut suffix: u32 = eta[k - 1];
        for i in (0..k - 1).rev() {
            if suffix > 0 {
                eta[i] += 1;
                for e in eta.iter_mut().take(k - 1).skip(i + 1) {
                    *e = 0;
                }
                eta[k - 1] = suffix - 1;
                return true;
            }
            suffix += eta[i];
        }
        false
    }

    /// Visit every configuration in rank order without allocating per
    /// state.
    pub fn visit(&self, mut f: impl FnMut(u64, &[u32])) {
        let mut eta = vec![0u32; self.kappa];
        eta[self.kappa - 1] = self.n;
        let mut rank = 0u64;
        loop {
            f(rank, &eta);
            rank += 1;
            if !Self::next_config(&mut eta) {
                break;
            }
        }
        debug_assert_eq!(rank, self.size);
    }
}

/// Mixed-radix index of a product box `prod_i {0..=widths[i]}`.
#[derive(Clone, Debug)]
pub struct BoxIndex {
    widths: Vec<u32>,
    strides: Vec<u64>,
    size: u64,
}

impl BoxIndex {
    pub fn new(widths: Vec<u32>, cap: u64) -> Result<Self> {
        if widths.is_empty() {
            return Err(CoreError::argument("box index: need at least one axis"));
        }
        let mut size: u64 = 1;
        let mut strides = vec![0u64; widths.len()];
        for (i, &w) in widths.iter().enumerate().rev() {
            strides[i] = size;
            size = size
                .checked_mul(w as u64 + 1)
                .filter(|&s| s <= cap)
                .ok_or_else(|| {
                    CoreError::resource(format!("box index: size exceeds cap {cap}"))
                })?;
        }
        Ok(BoxIndex {
            widths,
            strides,
            size,
        })
    }

    #[inline]
    pub fn size(&self) -> u64 {
        self.size
    }

    #[inline]
    pub fn axes(&self) -> usize {
        self.widths.len()
    }

    #[inline]
    pub fn width(&self, i: usize) -> u32 {
        self.widths[i]
    }

    pub fn rank(&self, coords: &[u32]) -> u64 {
        debug_assert_eq!(coords.len(), self.widths.len());
        coords
            .iter()
            .zip(&self.strides)
            .map(|(&c, &s)| c as u64 * s)
            .sum()
    }

    pub fn unrank(&self, rank: u64, out: &mut Vec<u32>) {
        debug_assert!(rank < self.size);
        out.clear();
        let mut r = rank;
        for &s in &self.strides {
            out.push((r / s) as u32);
            r %= s;
        }
    }

    pub fn visit(&self, mut f: impl FnMut(u64, &[u32])) {
        let k = self.widths.len();
        let mut coords = vec![0u32; k];
        let mut rank = 0u64;
        loop {
            f(rank, &coords);
            rank += 1;
            // Odometer increment.
            let mut i = k;
            loop {
                if i == 0 {
                    debug_assert_eq!(rank, self.size);
                    return;
                }
                i -= 1;
                if coords[i] < self.widths[i] {
                    coords[i] += 1;
                    break;
                }
                coords[i] = 0;
            }
        }
    }
}

/// The restricted space `{eta : eta_y <= ell for all y != x0}` seen as a
/// box over the sites other than `x0`.
#[derive(Clone, Debug)]
pub struct EhatIndex {
    pub x0: usize,
    n: u32,
    kappa: usize,
    boxed: BoxIndex,
    /// Sites other than `x0`, in increasing order (the box axes).
    others: Vec<usize>,
}

impl EhatIndex {
    pub fn new(n: u32, kappa: usize, x0: usize, ell: u32, cap: u64) -> Result<Self> {
        if x0 >= kappa {
            return Err(CoreError::argument("restricted index: x0 out of range"));
        }
        let others: Vec<usize> = (0..kappa).filter(|&y| y != x0).collect();
        if (others.len() as u64) * (ell as u64) > n as u64 {
            return Err(CoreError::argument(format!(
                "restricted index: box {}x{ell} does not fit below n={n}",
                others.len()
            )));
        }
        let boxed = BoxIndex::new(vec![ell; others.len()], cap)?;
        Ok(EhatIndex {
            x0,
            n,
            kappa,
            boxed,
            others,
        })
    }

    #[inline]
    pub fn size(&self) -> u64 {
        self.boxed.size()
    }

    pub fn rank(&self, eta: &[u32]) -> u64 {
        let coords: Vec<u32> = self.others.iter().map(|&y| eta[y]).collect();
        self.boxed.rank(&coords)
    }

    /// Full configuration (including the reference site) at a rank.
    pub fn config(&self, rank: u64, out: &mut Vec<u32>) {
        let mut coords = Vec::with_capacity(self.others.len());
        self.boxed.unrank(rank, &mut coords);
        out.clear();
        out.resize(self.kappa, 0);
        let mut used = 0u32;
        for (&y, &c) in self.others.iter().zip(&coords) {
            out[y] = c;
            used += c;
        }
        out[self.x0] = self.n - used;
    }

    pub fn visit(&self, mut f: impl FnMut(u64, &[u32])) {
        let mut eta = vec![0u32; self.kappa];
        let x0 = self.x0;
        let n = self.n;
        let others = self.others.clone();
        self.boxed.visit(|rank, coords| {
            let mut used = 0u32;
            for (&y, &c) in others.iter().zip(coords) {
                eta[y] = c;
                used += c;
            }
            eta[x0] = n - used;
            f(rank, &eta);
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simplex_size_matches_binomial() {
        let idx = SimplexIndex::new(10, 3, DEFAULT_STATE_CAP).unwrap();
        assert_eq!(idx.size(), 66); // C(12, 2)
        let idx = SimplexIndex::new(4, 5, DEFAULT_STATE_CAP).unwrap();
        assert_eq!(idx.size(), 70); // C(8, 4)
    }

    #[test]
    fn rank_unrank_round_trip_and_order() {
        let idx = SimplexIndex::new(7, 4, DEFAULT_STATE_CAP).unwrap();
        let mut seen = Vec::new();
        idx.visit(|rank, eta| {
            assert_eq!(idx.rank(eta), rank);
            let mut back = Vec::new();
            idx.unrank(rank, &mut back);
            assert_eq!(back.as_slice(), eta);
            seen.push(eta.to_vec());
        });
        assert_eq!(seen.len() as u64, idx.size());
        // Lexicographic order.
        for w in seen.windows(2) {
            assert!(w[0] < w[1]);
        }
        // Totals preserved.
        for eta in &seen {
            assert_eq!(eta.iter().sum::<u32>(), 7);
        }
    }

    #[test]
    fn simplex_cap_is_enforced() {
        assert!(SimplexIndex::new(10_000, 4, 1_000).is_err());
    }

    #[test]
    fn box_round_trip() {
        let b = BoxIndex::new(vec![3, 2, 4], DEFAULT_STATE_CAP).unwrap();
        assert_eq!(b.size(), 4 * 3 * 5);
        let mut count = 0u64;
        b.visit(|rank, coords| {
            assert_eq!(b.rank(coords), rank);
            let mut back = Vec::new();
            b.unrank(rank, &mut back);
            assert_eq!(back.as_slice(), coords);
            count += 1;
        });
        assert_eq!(count, b.size());
    }

    #[test]
    fn ehat_configs_cover_the_restricted_set() {
        let idx = EhatIndex::new(30, 3, 1, 8, DEFAULT_STATE_CAP).unwrap();
        assert_eq!(idx.size(), 81);
        let mut count = 0;
        idx.visit(|rank, eta| {
            assert_eq!(eta.iter().sum::<u32>(), 30);
            assert!(eta[0] <= 8 && eta[2] <= 8);
            assert_eq!(idx.rank(eta), rank);
            let mut back = Vec::new();
            idx.config(rank, &mut back);
            assert_eq!(back.as_slice(), eta);
            count += 1;
        });
        assert_eq!(count, 81);
    }

    #[test]
    fn ehat_rejects_oversized_boxes() {
        assert!(EhatIndex::new(20, 8, 0, 12, DEFAULT_STATE_CAP).is_err());
    }
}
