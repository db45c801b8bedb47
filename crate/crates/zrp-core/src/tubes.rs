//! Valley and tube geometry on the configuration space, ramp
//! approximations of the equilibrium potential between two wells, and the
//! variational upper bound on well-to-well capacities that they produce.

use std::cmp::Ordering;

use crate::cutoff::CutoffProfile;
use crate::error::{CoreError, Result};
use crate::exact::{assemble_full, DEFAULT_STATE_CAP};
use crate::walk::WalkSpec;
use crate::zrp::ZrpModel;

/// Tolerance on fractional occupancy thresholds: counts sitting exactly on
/// `n * frac` belong to the region even when the product lands just under
/// an integer in floating point.
const EDGE_TOL: f64 = 1e-9;

/// Membership tests for the coarse geography of the configuration space:
/// single-site valleys, two-site tubes, the junction segments of the tubes
/// that lie outside the valleys, and widened companions of each that leave
/// room for a transition collar.
#[derive(Clone, Copy, Debug)]
pub struct RegionAtlas {
    n: u32,
    kappa: usize,
    ell: u32,
    epsilon: f64,
}

impl RegionAtlas {
    /// Width must lie in `(0, 1/16]` and satisfy `1/n <= epsilon`, so the
    /// band between a valley floor and its rim spans at least one particle.
    pub fn new(model: &ZrpModel, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon <= 1.0 / 16.0) {
            return Err(CoreError::argument(format!(
                "region atlas: width must lie in (0, 1/16], got {epsilon}"
            )));
        }
        if (model.n() as f64) * epsilon < 1.0 {
            return Err(CoreError::argument(format!(
                "region atlas: need 1/n <= width, got n = {} width = {epsilon}",
                model.n()
            )));
        }
        Ok(RegionAtlas {
            n: model.n(),
            kappa: model.kappa(),
            ell: model.ell(),
            epsilon,
        })
    }

    #[inline]
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    #[inline]
    fn frac_at_least(&self, count: u64, frac: f64) -> bool {
        count as f64 >= self.n as f64 * frac - EDGE_TOL
    }

    /// Valley of `x`: all but a `2 epsilon` fraction sits on `x`.
    pub fn valley(&self, eta: &[u32], x: usize) -> bool {
        self.frac_at_least(eta[x] as u64, 1.0 - 2.0 * self.epsilon)
    }

    /// Widened valley, threshold lowered to a `4 epsilon` fraction.
    pub fn valley_wide(&self, eta: &[u32], x: usize) -> bool {
        self.frac_at_least(eta[x] as u64, 1.0 - 4.0 * self.epsilon)
    }

    /// Tube between `x` and `y`: at most a well width of mass elsewhere.
    pub fn tube(&self, eta: &[u32], x: usize, y: usize) -> bool {
        x != y && eta[x] + eta[y] >= self.n - self.ell
    }

    /// Widened tube, threshold lowered to a `3 epsilon` fraction of slack.
    pub fn tube_wide(&self, eta: &[u32], x: usize, y: usize) -> bool {
        x != y && self.frac_at_least(eta[x] as u64 + eta[y] as u64, 1.0 - 3.0 * self.epsilon)
    }

    /// Junction segment of the tube: inside the tube, outside both valleys.
    pub fn junction(&self, eta: &[u32], x: usize, y: usize) -> bool {
        self.tube(eta, x, y) && !self.valley(eta, x) && !self.valley(eta, y)
    }

    /// Widened junction, built from the widened tube and valleys.
    pub fn junction_wide(&self, eta: &[u32], x: usize, y: usize) -> bool {
        self.tube_wide(eta, x, y) && !self.valley_wide(eta, x) && !self.valley_wide(eta, y)
    }

    #[inline]
    fn clear_of_end(&self, count: u32) -> bool {
        self.frac_at_least(count as u64, 6.0 * self.epsilon)
    }

    /// Part of the junction near either end: one endpoint holds less than
    /// a `6 epsilon` fraction.
    pub fn junction_ends(&self, eta: &[u32], x: usize, y: usize) -> bool {
        self.junction(eta, x, y) && !(self.clear_of_end(eta[x]) && self.clear_of_end(eta[y]))
    }

    /// Middle of the junction: both endpoints hold a `6 epsilon` fraction.
    pub fn junction_middle(&self, eta: &[u32], x: usize, y: usize) -> bool {
        self.junction(eta, x, y) && self.clear_of_end(eta[x]) && self.clear_of_end(eta[y])
    }

    /// Union of all valleys and junctions; interpolants take their clean
    /// piecewise form here.
    pub fn core_support(&self, eta: &[u32]) -> bool {
        if (0..self.kappa).any(|x| self.valley(eta, x)) {
            return true;
        }
        self.pairs().any(|(x, y)| self.junction(eta, x, y))
    }

    /// Union of the widened valleys and junctions; interpolants vanish
    /// outside it.
    pub fn full_support(&self, eta: &[u32]) -> bool {
        if (0..self.kappa).any(|x| self.valley_wide(eta, x)) {
            return true;
        }
        self.pairs().any(|(x, y)| self.junction_wide(eta, x, y))
    }

    fn pairs(&self) -> impl Iterator<Item = (usize, usize)> {
        let k = self.kappa;
        (0..k).flat_map(move |x| (x + 1..k).map(move |y| (x, y)))
    }

    /// Site of the valley containing `eta`, if any: maximal occupancy with
    /// the lowest index winning ties.  Valleys are pairwise disjoint for
    /// widths up to 1/4, so at most one site qualifies.
    pub fn valley_site(&self, eta: &[u32]) -> Option<usize> {
        let mut best: Option<usize> = None;
        for x in 0..self.kappa {
            if self.valley(eta, x) && best.map_or(true, |b| eta[x] > eta[b]) {
                best = Some(x);
            }
        }
        best
    }

    /// Junction containing `eta`, if any, as an ordered pair `x < y`:
    /// maximal combined occupancy, lexicographic tie-break.
    pub fn junction_pair(&self, eta: &[u32]) -> Option<(usize, usize)> {
        let mut best: Option<(u32, usize, usize)> = None;
        for x in 0..self.kappa {
            for y in x + 1..self.kappa {
                if self.junction(eta, x, y) {
                    let s = eta[x] + eta[y];
                    if best.map_or(true, |(bs, _, _)| s > bs) {
                        best = Some((s, x, y));
                    }
                }
            }
        }
        best.map(|(_, x, y)| (x, y))
    }
}

/// Site enumeration for one unordered pair of wells `a < b`, sorted by the
/// walk's equilibrium potential between them (descending, site index
/// breaking ties), together with the potential values in that order.  The
/// `b -> a` orientation reuses the exact reversal, which forces the two
/// oriented ramps to sum to one.
struct PairOrder {
    order: Vec<usize>,
    h: Vec<f64>,
}

impl PairOrder {
    fn build(walk: &WalkSpec, a: usize, b: usize) -> Result<PairOrder> {
        let h = walk.equilibrium_potential(&[a], &[b])?;
        let mut order: Vec<usize> = (0..walk.kappa()).collect();
        order.sort_by(|&p, &q| {
            h[q].partial_cmp(&h[p])
                .unwrap_or(Ordering::Equal)
                .then_with(|| p.cmp(&q))
        });
        let vals = order.iter().map(|&z| h[z]).collect();
        Ok(PairOrder { order, h: vals })
    }

    /// Ramp value for the `a -> b` orientation (`reversed` flips it): the
    /// potential drop across each consecutive pair of sites, weighted by
    /// the smoothed step of the particle fraction accumulated so far.
    fn eval(&self, profile: &CutoffProfile, n_total: f64, eta: &[u32], reversed: bool) -> f64 {
        let k = self.order.len();
        let mut cum: u64 = 0;
        let mut acc = 0.0;
        for j in 0..k - 1 {
            let (z, dh) = if reversed {
                (self.order[k - 1 - j], self.h[k - 2 - j] - self.h[k - 1 - j])
            } else {
                (self.order[j], self.h[j] - self.h[j + 1])
            };
            cum += eta[z] as u64;
            acc += dh * profile.smooth_step(cum as f64 / n_total);
        }
        acc
    }
}

/// Ramp approximation of the equilibrium potential between wells `x` and
/// `y`, evaluated at `eta`: near 1 when the mass sits on `x`, near 0 when
/// it sits on `y`, and within `[0,1]` everywhere.  The two orientations
/// sum to one exactly.
pub fn pair_potential(
    walk: &WalkSpec,
    x: usize,
    y: usize,
    profile: &CutoffProfile,
    eta: &[u32],
) -> Result<f64> {
    let kappa = walk.kappa();
    if x >= kappa || y >= kappa || x == y {
        return Err(CoreError::argument(format!(
            "pair potential: need distinct sites below {kappa}, got ({x}, {y})"
        )));
    }
    if eta.len() != kappa {
        return Err(CoreError::argument(format!(
            "pair potential: configuration has {} sites, walk has {kappa}",
            eta.len()
        )));
    }
    let total: u64 = eta.iter().map(|&c| c as u64).sum();
    if total == 0 {
        return Err(CoreError::argument(
            "pair potential: empty configuration",
        ));
    }
    let (a, b, reversed) = if x < y { (x, y, false) } else { (y, x, true) };
    let po = PairOrder::build(walk, a, b)?;
    Ok(po.eval(profile, total as f64, eta, reversed))
}

/// Piecewise interpolant of prescribed per-well values `g`: equal to
/// `g[x]` on the valley of `x`, ramped between `g[x]` and `g[y]` along the
/// junction of each tube, faded out linearly across the widened collar,
/// and zero elsewhere.  Its Dirichlet form upper-bounds well-to-well
/// capacities.
pub struct WellInterpolant {
    atlas: RegionAtlas,
    profile: CutoffProfile,
    g: Vec<f64>,
    pairs: Vec<Option<PairOrder>>,
    kappa: usize,
    n: f64,
}

impl WellInterpolant {
    pub fn new(model: &ZrpModel, g: &[f64], profile: &CutoffProfile) -> Result<Self> {
        let kappa = model.kappa();
        if g.len() != kappa {
            return Err(CoreError::argument(format!(
                "well interpolant: {} well values for {kappa} sites",
                g.len()
            )));
        }
        let atlas = RegionAtlas::new(model, profile.epsilon())?;
        let mut pairs: Vec<Option<PairOrder>> = (0..kappa * kappa).map(|_| None).collect();
        for a in 0..kappa {
            for b in a + 1..kappa {
                pairs[a * kappa + b] = Some(PairOrder::build(model.walk(), a, b)?);
            }
        }
        Ok(WellInterpolant {
            atlas,
            profile: *profile,
            g: g.to_vec(),
            pairs,
            kappa,
            n: model.n() as f64,
        })
    }

    /// Tube formula for the pair holding `x` and `y`, oriented `a < b`:
    /// `g[b] + (g[a] - g[b]) * ramp`, which both orientations agree on.
    fn blend(&self, x: usize, y: usize, eta: &[u32]) -> f64 {
        let (a, b) = if x < y { (x, y) } else { (y, x) };
        let po = self.pairs[a * self.kappa + b]
            .as_ref()
            .expect("pair orders cover all unordered pairs");
        let u = po.eval(&self.profile, self.n, eta, false);
        self.g[b] + (self.g[a] - self.g[b]) * u
    }

    fn heaviest_pair(&self, eta: &[u32]) -> (usize, usize) {
        let mut best = (0usize, 1usize);
        let mut best_sum = eta[0] + eta[1];
        for x in 0..self.kappa {
            for y in x + 1..self.kappa {
                if eta[x] + eta[y] > best_sum {
                    best_sum = eta[x] + eta[y];
                    best = (x, y);
                }
            }
        }
        best
    }

    pub fn value(&self, eta: &[u32]) -> f64 {
        debug_assert_eq!(eta.len(), self.kappa);
        if let Some(x) = self.atlas.valley_site(eta) {
            return self.g[x];
        }
        if let Some((x, y)) = self.atlas.junction_pair(eta) {
            return self.blend(x, y, eta);
        }
        if self.atlas.full_support(eta) {
            // Collar between the widened and plain supports: evaluate the
            // tube formula for the heaviest pair, faded linearly from zero
            // at the widened-tube boundary over one width of combined
            // occupancy.  Anchoring the fade at the support boundary keeps
            // single-jump increments of order 1/n across it.
            let (x, y) = self.heaviest_pair(eta);
            let e = self.atlas.epsilon();
            let s = (eta[x] + eta[y]) as f64 / self.n;
            let fade = ((s - (1.0 - 3.0 * e)) / e).clamp(0.0, 1.0);
            return self.blend(x, y, eta) * fade;
        }
        0.0
    }
}

/// Interpolant value for prescribed well values `g` at a single
/// configuration.  Building a [`WellInterpolant`] once is cheaper when
/// evaluating many configurations.
pub fn v_g(model: &ZrpModel, g: &[f64], profile: &CutoffProfile, eta: &[u32]) -> Result<f64> {
    Ok(WellInterpolant::new(model, g, profile)?.value(eta))
}

/// Dirichlet form of the interpolant that is 1 on the valley of `x` and 0
/// on every other valley, summed exactly over the whole configuration
/// space with the speeded generator.  By the variational principle this
/// dominates the speeded capacity between the well of `x` and the rest,
/// whenever the wells sit inside the valleys.
pub fn capacity_upper_bound(model: &ZrpModel, x: usize, profile: &CutoffProfile) -> Result<f64> {
    if x >= model.kappa() {
        return Err(CoreError::argument(format!(
            "capacity upper bound: site {x} out of range for {} sites",
            model.kappa()
        )));
    }
    let mut g = vec![0.0; model.kappa()];
    g[x] = 1.0;
    let interp = WellInterpolant::new(model, &g, profile)?;
    let (idx, gen) = assemble_full(model, true, DEFAULT_STATE_CAP)?;
    let mut vals = vec![0.0; idx.size() as usize];
    idx.visit(|rank, eta| vals[rank as usize] = interp.value(eta));
    Ok(gen.dirichlet(&vals))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{exact_capacity, SimplexIndex};

    fn model(n: u32, kappa: usize) -> ZrpModel {
        ZrpModel::with_params(n, WalkSpec::complete_unit(kappa).unwrap(), 0.4, 0.5).unwrap()
    }

    /// Well width pinned to `ell` so the tube and valley thresholds nest
    /// the way the asymptotic regime has them.
    fn narrow_model(n: u32, kappa: usize, ell: u32) -> ZrpModel {
        ZrpModel::with_well_width(n, WalkSpec::complete_unit(kappa).unwrap(), ell, 0.4, 0.5)
            .unwrap()
    }

    fn profile(e: f64) -> CutoffProfile {
        CutoffProfile::new(e).unwrap()
    }

    #[test]
    fn atlas_rejects_bad_widths() {
        let m = model(60, 3);
        for bad in [0.0, -0.1, 0.07] {
            assert!(matches!(
                RegionAtlas::new(&m, bad),
                Err(CoreError::Argument { .. })
            ));
        }
        // Width below one particle's worth of mass.
        let tiny = model(20, 3);
        assert!(matches!(
            RegionAtlas::new(&tiny, 0.04),
            Err(CoreError::Argument { .. })
        ));
        assert!(RegionAtlas::new(&m, 0.05).is_ok());
    }

    #[test]
    fn regions_partition_the_support() {
        // Narrow wells put the geometry in the regime where junctions are
        // pairwise disjoint and keep clear of every valley.
        let n = 60;
        let m = narrow_model(n, 3, 3);
        let atlas = RegionAtlas::new(&m, 0.05).unwrap();
        let idx = SimplexIndex::new(n, 3, 1 << 20).unwrap();
        let lo = (n as f64 * 0.05).floor() as u32;
        let hi = (n as f64 * 0.9).ceil() as u32;
        let mut junction_states = 0u64;
        idx.visit(|_, eta| {
            let valleys: Vec<usize> = (0..3).filter(|&x| atlas.valley(eta, x)).collect();
            let mut junctions = Vec::new();
            for x in 0..3 {
                for y in x + 1..3 {
                    if atlas.junction(eta, x, y) {
                        junctions.push((x, y));
                    }
                }
            }
            assert!(valleys.len() <= 1, "valleys overlap at {eta:?}");
            assert!(junctions.len() <= 1, "junctions overlap at {eta:?}");
            assert!(
                valleys.is_empty() || junctions.is_empty(),
                "valley meets junction at {eta:?}"
            );
            let in_core = !valleys.is_empty() || !junctions.is_empty();
            assert_eq!(atlas.core_support(eta), in_core, "support mismatch at {eta:?}");
            if in_core {
                assert!(atlas.full_support(eta), "core escapes widened support at {eta:?}");
            }
            for &(x, y) in &junctions {
                junction_states += 1;
                // Both tube endpoints stay strictly between the width
                // fraction and the valley rim.
                for &z in &[x, y] {
                    assert!(eta[z] > lo && eta[z] < hi, "endpoint bound at {eta:?}");
                }
                // Ends and middle split the junction in two.
                let ends = atlas.junction_ends(eta, x, y);
                let mid = atlas.junction_middle(eta, x, y);
                assert!(ends != mid, "ends/middle must partition at {eta:?}");
                let both_clear = eta[x] >= 18 && eta[y] >= 18;
                assert_eq!(mid, both_clear, "middle threshold at {eta:?}");
            }
        });
        assert!(junction_states > 50, "junction sample too thin: {junction_states}");
    }

    #[test]
    fn two_site_ramp_reduces_to_one_step() {
        let walk = WalkSpec::complete_unit(2).unwrap();
        let p = profile(0.05);
        let n = 40u32;
        for k in 0..=n {
            let eta = [k, n - k];
            let fwd = pair_potential(&walk, 0, 1, &p, &eta).unwrap();
            let rev = pair_potential(&walk, 1, 0, &p, &eta).unwrap();
            assert!((fwd - p.smooth_step(k as f64 / n as f64)).abs() < 1e-14);
            assert!((rev - p.smooth_step((n - k) as f64 / n as f64)).abs() < 1e-12);
        }
    }

    #[test]
    fn ramp_is_one_inside_the_valley() {
        let walk = WalkSpec::new(vec![
            vec![0.0, 2.0, 0.5, 1.0],
            vec![2.0, 0.0, 1.0, 0.5],
            vec![0.5, 1.0, 0.0, 1.0],
            vec![1.0, 0.5, 1.0, 0.0],
        ])
        .unwrap();
        let p = profile(0.05);
        // 92% of the mass on site x pins every accumulated fraction past
        // the upper plateau.
        for x in 0..4 {
            for y in 0..4 {
                if x == y {
                    continue;
                }
                let mut eta = [2u32, 3, 2, 1];
                eta[x] = 92;
                let u = pair_potential(&walk, x, y, &p, &eta).unwrap();
                assert!((u - 1.0).abs() < 1e-12, "x={x} y={y} u={u}");
            }
        }
    }

    #[test]
    fn oriented_ramps_sum_to_one_everywhere() {
        let walk = WalkSpec::complete_unit(3).unwrap();
        let p = profile(0.05);
        let idx = SimplexIndex::new(60, 3, 1 << 20).unwrap();
        let mut worst = 0.0f64;
        idx.visit(|_, eta| {
            for x in 0..3 {
                for y in x + 1..3 {
                    let fwd = pair_potential(&walk, x, y, &p, eta).unwrap();
                    let rev = pair_potential(&walk, y, x, &p, eta).unwrap();
                    assert!((0.0..=1.0 + 1e-12).contains(&fwd));
                    worst = worst.max((fwd + rev - 1.0).abs());
                }
            }
        });
        assert!(worst < 1e-12, "orientation sum drifts: {worst}");
    }

    #[test]
    fn interpolant_hits_prescribed_values_and_vanishes_outside() {
        let m = model(60, 3);
        let p = profile(0.05);
        let g = [0.7, -1.0, 0.25];
        // Valley states report their well value.
        assert_eq!(v_g(&m, &g, &p, &[58, 1, 1]).unwrap(), 0.7);
        assert_eq!(v_g(&m, &g, &p, &[0, 55, 5]).unwrap(), -1.0);
        assert_eq!(v_g(&m, &g, &p, &[3, 3, 54]).unwrap(), 0.25);
        // Spread mass sits outside the widened support.
        assert_eq!(v_g(&m, &g, &p, &[20, 20, 20]).unwrap(), 0.0);
        assert_eq!(v_g(&m, &g, &p, &[22, 22, 16]).unwrap(), 0.0);
    }

    #[test]
    fn interpolant_is_bounded_and_orientation_free() {
        let m = model(60, 3);
        let p = profile(0.05);
        let g = [0.7, -1.0, 0.25];
        let sup = 1.0;
        let interp = WellInterpolant::new(&m, &g, &p).unwrap();
        let atlas = RegionAtlas::new(&m, 0.05).unwrap();
        let idx = SimplexIndex::new(60, 3, 1 << 20).unwrap();
        idx.visit(|_, eta| {
            let v = interp.value(eta);
            assert!(v.abs() <= 2.0 * sup + 1e-12, "unbounded at {eta:?}: {v}");
            // On a junction the tube formula agrees between orientations.
            for x in 0..3 {
                for y in x + 1..3 {
                    if atlas.junction(eta, x, y) {
                        let uf = pair_potential(m.walk(), x, y, &p, eta).unwrap();
                        let ur = pair_potential(m.walk(), y, x, &p, eta).unwrap();
                        let a = g[y] + (g[x] - g[y]) * uf;
                        let b = g[x] + (g[y] - g[x]) * ur;
                        assert!((a - b).abs() < 1e-12, "orientation gap at {eta:?}");
                    }
                }
            }
        });
    }

    /// Largest single-jump increment of the interpolant, scaled by `n`.
    fn lipschitz_scan(n: u32, ell: u32, g: &[f64], e: f64) -> f64 {
        let m = narrow_model(n, 3, ell);
        let p = profile(e);
        let interp = WellInterpolant::new(&m, g, &p).unwrap();
        let sup = g.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        let idx = SimplexIndex::new(n, 3, 1 << 22).unwrap();
        let mut worst = 0.0f64;
        idx.visit(|_, eta| {
            let base = interp.value(eta);
            for z in 0..3 {
                if eta[z] == 0 {
                    continue;
                }
                for w in 0..3 {
                    if w == z {
                        continue;
                    }
                    let mut moved = [eta[0], eta[1], eta[2]];
                    moved[z] -= 1;
                    moved[w] += 1;
                    let dv = (interp.value(&moved) - base).abs();
                    worst = worst.max(n as f64 * dv / sup);
                }
            }
        });
        worst
    }

    #[test]
    fn single_jump_increments_scale_like_one_over_n() {
        let g = [1.0, -0.3, 0.4];
        let c100 = lipschitz_scan(100, 5, &g, 0.05);
        let c200 = lipschitz_scan(200, 10, &g, 0.05);
        // Frozen envelope for the width-0.05 profile on three sites.
        assert!(c100 < 40.0, "n=100 constant {c100}");
        assert!(c200 < 40.0, "n=200 constant {c200}");
        // Doubling n leaves the scaled constant stable.
        assert!(c200 < 1.5 * c100 + 1.0, "instability: {c100} -> {c200}");
        assert!(c100 < 1.5 * c200 + 1.0, "instability: {c200} -> {c100}");
    }

    /// Speeded capacity between the well of `x` and the union of the
    /// others, computed exactly.
    fn well_capacity(m: &ZrpModel, x: usize) -> f64 {
        let (idx, gen) = assemble_full(m, true, DEFAULT_STATE_CAP).unwrap();
        let sol = exact_capacity(
            &idx,
            &gen,
            &|eta: &[u32]| m.in_e(eta, x),
            &|eta: &[u32]| (0..m.kappa()).any(|y| y != x && m.in_e(eta, y)),
        )
        .unwrap();
        sol.value
    }

    #[test]
    fn dirichlet_form_dominates_exact_capacity() {
        let p = profile(0.05);
        for n in [30u32, 60] {
            let m = model(n, 3);
            for x in 0..3 {
                let upper = capacity_upper_bound(&m, x, &p).unwrap();
                let exact = well_capacity(&m, x);
                assert!(
                    upper >= exact,
                    "n={n} x={x}: bound {upper} below capacity {exact}"
                );
                assert!(upper.is_finite() && upper > 0.0);
            }
        }
    }

    #[test]
    fn dirichlet_form_stays_bounded_in_n() {
        let p = profile(0.05);
        let mut values = Vec::new();
        for n in [30u32, 60, 120] {
            values.push(capacity_upper_bound(&model(n, 3), 0, &p).unwrap());
        }
        for &v in &values {
            assert!(v > 0.0 && v < 200.0, "bound escapes its envelope: {values:?}");
        }
    }

    #[test]
    fn shrinking_the_width_grows_the_bound_logarithmically() {
        // Narrower ramps climb over fewer states, paying at most the ratio
        // of the logarithms (with slack) in the Dirichlet form.
        let m = model(120, 3);
        let wide = capacity_upper_bound(&m, 0, &profile(0.05)).unwrap();
        let narrow = capacity_upper_bound(&m, 0, &profile(0.025)).unwrap();
        let factor = 1.0 + (2.0f64).ln() / (20.0f64).ln();
        assert!(
            narrow <= wide * factor * 2.0,
            "narrow {narrow} vs wide {wide}"
        );
    }
}
