//! Drift certificate on the shallow shell of a well.
//!
//! The certificate function is assembled from quadratic forms in the
//! occupations of the sites off the well center `x0`. Each nonempty
//! subset of those sites carries a form `P^A` built from the embedded
//! walk's return coefficients; a corrector `W_l` selects the cheapest
//! form at every scale `l`, and the candidate
//! `F_m = sum_{l=2}^m (1/l) sqrt(P - W_l)` is checked to have strictly
//! negative generator drift over the entire shell interior by exhaustive
//! enumeration.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::exact::{SimplexIndex, DEFAULT_STATE_CAP};
use crate::numeric::Kahan;
use crate::walk::{CoefficientTables, WalkSpec};
use crate::zrp::{g_rate, ZrpModel};

/// Relative spacing separating corrector constants of equal rank.
///
/// The spacing must be of order one, not merely nonzero: a state stops
/// switching active subsets once the scale passes the takeover point
/// `sqrt(form spread / constant gap)`, and the per-state count of
/// boundary scales stays bounded only when every takeover lands inside
/// the scan horizon. Hairline gaps push takeovers out by a factor
/// `1/sqrt(gap)` and the drift certificate never clears.
const C_SPACING: f64 = 3.0;

/// Relative tolerance for ties in the corrector minimum.
const ACTIVE_TOL: f64 = 1e-10;

/// Per-subset constants of the quadratic family on the off-center sites.
///
/// Subsets are stored as site bitmasks, ordered by (size, mask); the
/// full off-center set is always last and carries no corrector constant.
/// Every inequality the constants must satisfy is asserted at build
/// time, so a bad instantiation fails loudly rather than corrupting the
/// certificate downstream.
#[derive(Clone, Debug)]
pub struct ConstantsLedger {
    kappa: usize,
    x0: usize,
    subsets: Vec<u32>,
    slot: Vec<usize>,
    tables: Vec<CoefficientTables>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    c: Vec<f64>,
    max_b: f64,
    gamma1: f64,
}

impl ConstantsLedger {
    pub fn kappa(&self) -> usize {
        self.kappa
    }

    pub fn x0(&self) -> usize {
        self.x0
    }

    /// Subset bitmasks in (size, mask) order; the last one is the full
    /// off-center set.
    pub fn subsets(&self) -> &[u32] {
        &self.subsets
    }

    /// Position of the full off-center set (always the last slot).
    pub fn full_slot(&self) -> usize {
        self.subsets.len() - 1
    }

    /// Number of proper nonempty subsets (everything but the last slot).
    pub fn n_proper(&self) -> usize {
        self.subsets.len() - 1
    }

    pub fn slot_of(&self, mask: u32) -> Option<usize> {
        self.slot
            .get(mask as usize)
            .copied()
            .filter(|&i| i != usize::MAX)
    }

    pub fn tables(&self, slot: usize) -> &CoefficientTables {
        &self.tables[slot]
    }

    pub fn alpha(&self, slot: usize) -> f64 {
        self.alpha[slot]
    }

    pub fn beta(&self, slot: usize) -> f64 {
        self.beta[slot]
    }

    /// Corrector constant; defined on proper nonempty subsets only.
    pub fn c(&self, slot: usize) -> f64 {
        debug_assert!(slot < self.n_proper());
        self.c[slot]
    }

    /// Largest return coefficient over all subsets.
    pub fn max_b(&self) -> f64 {
        self.max_b
    }

    /// Occupation threshold factor: an active subset at scale `l` can
    /// only hold sites with fewer than `gamma1 * l` particles.
    pub fn gamma1(&self) -> f64 {
        self.gamma1
    }
}

/// Build the constants ledger for the well at `x0`.
///
/// `alpha_B` dominates the restricted quadratic forms (strictly above
/// every diagonal coefficient), `beta_B` absorbs the constant defect of
/// `t^2 <= 2t(t-1) + 1`, and the corrector constants `c_A` grow along
/// the subset-size recursion with deterministic rank perturbations that
/// keep them pairwise distinct.
pub fn build_ledger(walk: &WalkSpec, x0: usize) -> Result<ConstantsLedger> {
    let kappa = walk.kappa();
    if x0 >= kappa {
        return Err(CoreError::argument(format!(
            "constants ledger: x0={x0} out of range for {kappa} sites"
        )));
    }
    let s0: Vec<usize> = (0..kappa).filter(|&x| x != x0).collect();
    let mut subsets: Vec<u32> = (1u32..(1 << s0.len()))
        .map(|bits| {
            let mut mask = 0u32;
            for (i, &site) in s0.iter().enumerate() {
                if bits & (1 << i) != 0 {
                    mask |= 1 << site;
                }
            }
            mask
        })
        .collect();
    subsets.sort_by_key(|m| (m.count_ones(), *m));

    let mut slot = vec![usize::MAX; 1 << kappa];
    let mut tables = Vec::with_capacity(subsets.len());
    for (i, &mask) in subsets.iter().enumerate() {
        slot[mask as usize] = i;
        let sites: Vec<usize> = (0..kappa).filter(|&x| mask & (1 << x) != 0).collect();
        tables.push(walk.coefficient_tables(x0, &sites)?);
    }

    let mut max_b = 0.0f64;
    for t in &tables {
        for &z in &t.set {
            for &w in &t.set {
                max_b = max_b.max(t.b(z, w));
            }
        }
    }

    let c0 = (kappa * kappa) as f64;
    let mut alpha = Vec::with_capacity(subsets.len());
    let mut beta = Vec::with_capacity(subsets.len());
    for t in &tables {
        let diag_max = t
            .set
            .iter()
            .map(|&x| t.b(x, x))
            .fold(0.0f64, f64::max);
        alpha.push((2.0 * c0 * max_b).max(diag_max * 1.125));
        beta.push(c0 * kappa as f64 * max_b + 1.0);
    }
    for (i, t) in tables.iter().enumerate() {
        for &x in &t.set {
            if alpha[i] <= t.b(x, x) {
                return Err(CoreError::model(
                    "constants ledger: alpha fails to dominate a diagonal coefficient",
                ));
            }
        }
    }

    // Corrector constants along the size recursion. Rank within each
    // size group spreads otherwise equal values apart.
    let full_mask = *subsets.last().expect("nonempty site set");
    let n_proper = subsets.len() - 1;
    let mut c = vec![f64::NAN; subsets.len()];
    let mut group_size = 0;
    let mut rank = 0u32;
    for i in 0..n_proper {
        let mask = subsets[i];
        let size = mask.count_ones();
        if size != group_size {
            group_size = size;
            rank = 0;
        }
        if size == 1 {
            c[i] = 1.0 + rank as f64 * C_SPACING;
        } else {
            let mut base = 0.0f64;
            for j in 0..i {
                let amask = subsets[j];
                if amask & mask == amask && amask != mask {
                    let ta = &tables[j];
                    for &x in &ta.set {
                        base = base.max(2.0 * alpha[i] * c[j] / ta.b(x, x) + beta[i]);
                    }
                }
            }
            let picked = base * (1.0 + (1.0 + rank as f64) * C_SPACING);
            if picked <= base {
                return Err(CoreError::model(
                    "constants ledger: corrector constant failed to clear its floor",
                ));
            }
            c[i] = picked;
        }
        rank += 1;
    }
    let mut sorted: Vec<f64> = c[..n_proper].to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite corrector constants"));
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(CoreError::model(
            "constants ledger: corrector constants collide",
        ));
    }
    let _ = full_mask;

    // Threshold so that any site loaded to gamma1 * l makes the scaled
    // form positive: eta_x >= gamma*l with gamma >= 2, l >= 2 gives
    // P^A >= b_xx (gamma l)(gamma l - 1)/2 >= b_xx gamma^2 l^2 / 4.
    let mut gamma1 = 2.0f64;
    for i in 0..n_proper {
        let t = &tables[i];
        let diag_min = t
            .set
            .iter()
            .map(|&x| t.b(x, x))
            .fold(f64::INFINITY, f64::min);
        gamma1 = gamma1.max(2.0 * (c[i] / diag_min).sqrt() + 2.0);
    }

    Ok(ConstantsLedger {
        kappa,
        x0,
        subsets,
        slot,
        tables,
        alpha,
        beta,
        c,
        max_b,
        gamma1,
    })
}

/// Evaluators for the quadratic family and the assembled certificate.
pub struct QuadraticFamily<'a> {
    ledger: &'a ConstantsLedger,
}

impl<'a> QuadraticFamily<'a> {
    pub fn new(ledger: &'a ConstantsLedger) -> Self {
        QuadraticFamily { ledger }
    }

    pub fn ledger(&self) -> &ConstantsLedger {
        self.ledger
    }

    /// Pure quadratic part: half the full double sum of `b` against the
    /// occupations of the subset.
    pub fn q_form(&self, slot: usize, eta: &[u32]) -> f64 {
        let t = self.ledger.tables(slot);
        let mut acc = 0.0;
        for &x in &t.set {
            for &y in &t.set {
                acc += t.b(x, y) * eta[x] as f64 * eta[y] as f64;
            }
        }
        0.5 * acc
    }

    /// Linear part: half the diagonal of `b` against the occupations.
    pub fn u_form(&self, slot: usize, eta: &[u32]) -> f64 {
        let t = self.ledger.tables(slot);
        let mut acc = 0.0;
        for &x in &t.set {
            acc += t.b(x, x) * eta[x] as f64;
        }
        0.5 * acc
    }

    /// Centered form: nonnegative, vanishing only when no subset site
    /// holds two particles and no pair is jointly occupied.
    pub fn p_form(&self, slot: usize, eta: &[u32]) -> f64 {
        let t = self.ledger.tables(slot);
        let set = &t.set;
        let mut acc = 0.0;
        for (i, &x) in set.iter().enumerate() {
            let ex = eta[x] as f64;
            acc += 0.5 * t.b(x, x) * ex * (ex - 1.0);
            for &y in &set[i + 1..] {
                acc += t.b(x, y) * ex * eta[y] as f64;
            }
        }
        acc
    }

    /// Scaled form `P^A - c_A l^2` for a proper nonempty subset.
    pub fn p_ell(&self, slot: usize, eta: &[u32], ell: u32) -> f64 {
        debug_assert!(slot < self.ledger.n_proper());
        self.p_form(slot, eta) - self.ledger.c(slot) * (ell as f64) * (ell as f64)
    }

    /// Corrector value at scale `ell` (minimum over proper subsets and
    /// the empty set, whose scaled form is identically zero).
    pub fn w_value(&self, eta: &[u32], ell: u32) -> f64 {
        let mut best = 0.0f64;
        for slot in 0..self.ledger.n_proper() {
            best = best.min(self.p_ell(slot, eta, ell));
        }
        best
    }

    /// Corrector value plus every argmin subset (bitmask 0 encodes the
    /// empty set; ties within a relative tolerance are all reported).
    pub fn w_corrector(&self, eta: &[u32], ell: u32) -> (f64, Vec<u32>) {
        let best = self.w_value(eta, ell);
        let tol = ACTIVE_TOL * (1.0 + best.abs());
        let mut active = Vec::new();
        if 0.0 <= best + tol {
            active.push(0);
        }
        for slot in 0..self.ledger.n_proper() {
            if self.p_ell(slot, eta, ell) <= best + tol {
                active.push(self.ledger.subsets()[slot]);
            }
        }
        (best, active)
    }

    /// Radicand `P - W_l` at scale `ell`; strictly positive on the shell.
    pub fn h_ell(&self, eta: &[u32], ell: u32) -> f64 {
        self.p_form(self.ledger.full_slot(), eta) - self.w_value(eta, ell)
    }

    /// Certificate value `F_m = sum_{l=2}^m (1/l) sqrt(P - W_l)`.
    pub fn f_m(&self, eta: &[u32], m: u32) -> Result<f64> {
        if m < 2 {
            return Err(CoreError::argument("certificate: need scale m >= 2"));
        }
        Ok(*self.f_checkpoints(eta, &[m])?.last().expect("one checkpoint"))
    }

    /// Certificate values at several scales in one sweep; `ms` must be
    /// strictly increasing with first entry >= 2.
    pub fn f_checkpoints(&self, eta: &[u32], ms: &[u32]) -> Result<Vec<f64>> {
        debug_assert!(!ms.is_empty() && ms[0] >= 2);
        debug_assert!(ms.windows(2).all(|w| w[0] < w[1]));
        let p = self.p_form(self.ledger.full_slot(), eta);
        let mut acc = Kahan::new();
        let mut out = Vec::with_capacity(ms.len());
        let mut next = 0;
        for ell in 2..=*ms.last().expect("nonempty scale list") {
            let rad = p - self.w_value(eta, ell);
            if rad <= 0.0 {
                return Err(CoreError::model(format!(
                    "certificate: nonpositive radicand {rad} at scale {ell}, eta={eta:?}; \
                     the system size is below the validity threshold"
                )));
            }
            acc.add(rad.sqrt() / ell as f64);
            if ms[next] == ell {
                out.push(acc.value());
                next += 1;
            }
        }
        Ok(out)
    }
}

/// Fitted linear envelope of the certificate over the shell interior.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Sandwich {
    pub c1: f64,
    pub c2: f64,
}

/// Outcome of the exhaustive shell scan.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SuperharmonicReport {
    pub n: u32,
    pub kappa: usize,
    pub x0: usize,
    /// Scanned depths `s = n - eta[x0]`: closure range, inclusive.
    pub window: (u32, u32),
    /// Interior states evaluated.
    pub states_scanned: u64,
    /// Smallest dyadic scale whose worst depth-weighted drift is
    /// strictly negative; `None` when no scanned scale certifies.
    pub m_found: Option<u32>,
    /// Worst drift `(n - eta[x0]) * (L F_m)(eta)` at the reported scale
    /// (the largest scanned scale when none certifies).
    pub margin: f64,
    pub worst_eta: Vec<u32>,
    /// Worst depth-weighted drift per scanned scale.
    pub margins: Vec<(u32, f64)>,
    /// Envelope `c1 * s <= F_m <= c2 * s` fitted over the interior.
    pub sandwich: Sandwich,
    /// Max per-state count of corrector-boundary scales `l <= m_max`.
    pub boundary_count_l: u32,
    /// Same count taken up to `2 m_max`.
    pub boundary_count_2l: u32,
    /// States whose first boundary scale lies beyond `m_max`; zero means
    /// the set of boundary states has stabilized within the horizon.
    pub boundary_fresh_after_l: u64,
    /// Max of `|P_l^B - W_l| / l` over boundary events, taken across
    /// active sets of neighboring states.
    pub boundary_gap_ratio: f64,
    /// Interior states where the per-subset drift floor
    /// `(L P^A)(eta) >= #{x in A : eta_x = 1}` fails while all sites off
    /// `A` hold at least two particles.
    pub drift_floor_violations: u64,
    /// (state, subset, site) triples where the unit-rate site drift of
    /// the subset form deviates from its closed form (`1 - eta_x` for a
    /// departure site inside the subset, the exit-weighted subset load
    /// otherwise).
    pub site_identity_violations: u64,
    /// Interior states where the full form leaves its quadratic envelope
    /// `c1 s^2 <= P <= c2 s^2` in the depth `s`.
    pub form_bracket_violations: u64,
    /// (state, scale) pairs where the corrector leaves `[-c_max l^2, 0]`.
    pub corrector_bound_violations: u64,
    /// (state, scale, subset) triples where an active subset holds a
    /// site loaded to `gamma1 * l` or more.
    pub occupancy_threshold_violations: u64,
    /// (state, scale) pairs deep enough that every active subset must
    /// provably contain all empty sites at this system size.
    pub empty_site_checks: u64,
    /// Among those, active subsets missing an empty site.
    pub empty_site_violations: u64,
}

struct Layer {
    base: u64,
    size: u64,
    idx: Option<SimplexIndex>,
}

impl Layer {
    fn rank(&self, comp: &[u32]) -> u64 {
        match &self.idx {
            Some(si) => si.rank(comp),
            None => 0,
        }
    }

    fn visit(&self, mut f: impl FnMut(u64, &[u32]), s: u32) {
        match &self.idx {
            Some(si) => si.visit(|r, comp| f(r, comp)),
            None => f(0, &[s]),
        }
    }
}

/// Exhaustively certify negative drift of the assembled certificate on
/// the shell interior of the well at `x0`.
///
/// Scales are scanned dyadically (2, 4, ..., up to `m_max`). The drift
/// uses the unspeeded generator; margins carry the depth weight
/// `n - eta[x0]`. Failure to certify is reported, not raised.
pub fn superharmonic_check(model: &ZrpModel, x0: usize, m_max: u32) -> Result<SuperharmonicReport> {
    let kappa = model.kappa();
    let n = model.n();
    if x0 >= kappa {
        return Err(CoreError::argument(format!(
            "shell scan: x0={x0} out of range for {kappa} sites"
        )));
    }
    if m_max < 2 {
        return Err(CoreError::argument("shell scan: need m_max >= 2"));
    }
    let d = model.deep_width();
    let w = model.shallow_width();
    if w < d + 3 {
        return Err(CoreError::argument(format!(
            "shell scan: window [{}, {}] has empty interior",
            d + 1,
            w
        )));
    }
    let ledger = build_ledger(model.walk(), x0)?;
    let family = QuadraticFamily::new(&ledger);
    let walk = model.walk();
    let s0: Vec<usize> = (0..kappa).filter(|&x| x != x0).collect();
    let mut pos = vec![usize::MAX; kappa];
    for (i, &site) in s0.iter().enumerate() {
        pos[site] = i;
    }
    let m1 = kappa - 1;

    // Depth layers s = n - eta[x0]; closure [d+1, w], interior excludes
    // the two extreme layers. Only jumps at x0 change s, so every
    // neighbor of an interior state stays inside the closure.
    let s_lo = d + 1;
    let s_hi = w;
    let mut layers = Vec::with_capacity((s_hi - s_lo + 1) as usize);
    let mut base = 0u64;
    for s in s_lo..=s_hi {
        let (size, idx) = if m1 == 1 {
            (1, None)
        } else {
            let si = SimplexIndex::new(s, m1, DEFAULT_STATE_CAP)?;
            (si.size(), Some(si))
        };
        layers.push(Layer { base, size, idx });
        base += size;
        if base > DEFAULT_STATE_CAP {
            return Err(CoreError::resource(format!(
                "shell scan: window holds more than {DEFAULT_STATE_CAP} states"
            )));
        }
    }
    let total = base as usize;
    let loc = |s: u32, comp: &[u32]| -> usize {
        let l = &layers[(s - s_lo) as usize];
        (l.base + l.rank(comp)) as usize
    };

    let ms: Vec<u32> = {
        let mut v = Vec::new();
        let mut m = 2u32;
        while m <= m_max {
            v.push(m);
            m *= 2;
        }
        v
    };
    let n_dy = ms.len();
    let top = *ms.last().expect("m_max >= 2");
    let n_sub = ledger.subsets().len();
    let full = ledger.full_slot();
    let c_proper: Vec<f64> = (0..ledger.n_proper()).map(|i| ledger.c(i)).collect();

    // Pass 1: quadratic forms and certificate checkpoints on the closure,
    // plus the per-state raw material for the later scale checks: depth,
    // empty-site mask, and per-subset peak occupancy.
    let np = n_sub - 1;
    let lam_full = ledger.tables(full).min_diag_b();
    let c_lo = 0.75 * lam_full / (2.0 * m1 as f64);
    let c_hi = ledger.max_b() / 2.0;
    let mut p_vals = vec![0.0f64; total * n_sub];
    let mut f_vals = vec![0.0f64; total * n_dy];
    let mut depth = vec![0u32; total];
    let mut zero_mask = vec![0u32; total];
    let mut occ_max = vec![0u32; total * np];
    let mut form_bracket_violations = 0u64;
    let mut eta = vec![0u32; kappa];
    let mut failure: Option<CoreError> = None;
    for (li, layer) in layers.iter().enumerate() {
        let s = s_lo + li as u32;
        layer.visit(
            |r, comp| {
                if failure.is_some() {
                    return;
                }
                eta[x0] = n - s;
                for (i, &site) in s0.iter().enumerate() {
                    eta[site] = comp[i];
                }
                let id = (layer.base + r) as usize;
                for j in 0..n_sub {
                    p_vals[id * n_sub + j] = family.p_form(j, &eta);
                }
                depth[id] = s;
                let mut zm = 0u32;
                for &site in &s0 {
                    if eta[site] == 0 {
                        zm |= 1 << site;
                    }
                }
                zero_mask[id] = zm;
                for j in 0..np {
                    let peak = ledger.tables(j).set.iter().map(|&z| eta[z]).max();
                    occ_max[id * np + j] = peak.unwrap_or(0);
                }
                let p = p_vals[id * n_sub + full];
                let sf = s as f64;
                let slack = 1e-9 * (1.0 + p);
                if p < c_lo * sf * sf - slack || p > c_hi * sf * sf + slack {
                    form_bracket_violations += 1;
                }
                let mut acc = Kahan::new();
                let mut next = 0;
                for ell in 2..=top {
                    let t = ell as f64 * ell as f64;
                    let mut wmin = 0.0f64;
                    for j in 0..n_sub - 1 {
                        wmin = wmin.min(p_vals[id * n_sub + j] - c_proper[j] * t);
                    }
                    let rad = p - wmin;
                    if rad <= 0.0 {
                        failure = Some(CoreError::model(format!(
                            "shell scan: nonpositive radicand at scale {ell}, eta={eta:?}"
                        )));
                        return;
                    }
                    acc.add(rad.sqrt() / ell as f64);
                    if next < n_dy && ms[next] == ell {
                        f_vals[id * n_dy + next] = acc.value();
                        next += 1;
                    }
                }
            },
            s,
        );
        if let Some(e) = failure.take() {
            return Err(e);
        }
    }

    // Pass 2: interior sweep. Neighbor lists double as the generator
    // stencil (with jump weights) and the boundary stencil (ids only).
    let lo_int = layers[1].base as usize;
    let hi_int = layers[layers.len() - 1].base as usize;
    let n_int = hi_int - lo_int;
    let mut nb_off: Vec<u32> = Vec::with_capacity(n_int + 1);
    nb_off.push(0);
    let mut nb_flat: Vec<(u32, f64)> = Vec::with_capacity(n_int * kappa);
    let mut margins = vec![f64::NEG_INFINITY; n_dy];
    let mut worst = vec![0usize; n_dy];
    let mut drift_floor_violations = 0u64;
    let mut site_identity_violations = 0u64;
    let out_deg: Vec<usize> = (0..kappa)
        .map(|x| (0..kappa).filter(|&y| walk.rate(x, y) > 0.0).count())
        .collect();
    let mut comp2 = vec![0u32; m1];
    for li in 1..layers.len() - 1 {
        let s = s_lo + li as u32;
        let layer = &layers[li];
        layer.visit(
            |r, comp| {
                eta[x0] = n - s;
                for (i, &site) in s0.iter().enumerate() {
                    eta[site] = comp[i];
                }
                let id = (layer.base + r) as usize;
                for x in 0..kappa {
                    if eta[x] == 0 {
                        continue;
                    }
                    let gx = g_rate(eta[x]);
                    for y in 0..kappa {
                        let rate = walk.rate(x, y);
                        if rate <= 0.0 {
                            continue;
                        }
                        comp2.copy_from_slice(comp);
                        let s2 = if x == x0 {
                            comp2[pos[y]] += 1;
                            s + 1
                        } else if y == x0 {
                            comp2[pos[x]] -= 1;
                            s - 1
                        } else {
                            comp2[pos[x]] -= 1;
                            comp2[pos[y]] += 1;
                            s
                        };
                        debug_assert!((s_lo..=s_hi).contains(&s2));
                        nb_flat.push((loc(s2, &comp2) as u32, gx * rate));
                    }
                }
                let row = nb_off.len() - 1;
                let start = nb_off[row] as usize;
                nb_off.push(nb_flat.len() as u32);
                let stencil = &nb_flat[start..];

                // Unit-rate drift of every subset form per departure site,
                // against its closed form. Stencil entries for one site are
                // contiguous and carry weight g(eta_x) r(x, y), so dividing
                // by g(eta_x) recovers the unit-rate sum.
                let mut cur = 0usize;
                for x in 0..kappa {
                    if eta[x] == 0 {
                        continue;
                    }
                    let gx = g_rate(eta[x]);
                    for j in 0..n_sub {
                        let mut acc = Kahan::new();
                        for &(id2, wt) in &stencil[cur..cur + out_deg[x]] {
                            acc.add(
                                wt * (p_vals[id2 as usize * n_sub + j]
                                    - p_vals[id * n_sub + j]),
                            );
                        }
                        let lhs = acc.value() / gx;
                        let tb = ledger.tables(j);
                        let rhs = if ledger.subsets()[j] & (1 << x) != 0 {
                            1.0 - eta[x] as f64
                        } else {
                            tb.set.iter().map(|&z| tb.u(z, x) * eta[z] as f64).sum()
                        };
                        if (lhs - rhs).abs() > 1e-9 * (1.0 + rhs.abs()) {
                            site_identity_violations += 1;
                        }
                    }
                    cur += out_deg[x];
                }

                for (k, margin) in margins.iter_mut().enumerate() {
                    let mut lf = Kahan::new();
                    let me = f_vals[id * n_dy + k];
                    for &(id2, wt) in stencil {
                        lf.add(wt * (f_vals[id2 as usize * n_dy + k] - me));
                    }
                    let v = s as f64 * lf.value();
                    if v > *margin {
                        *margin = v;
                        worst[k] = id;
                    }
                }

                // Drift floor per proper subset: applies when every site
                // off the subset holds at least two particles (the well
                // center always does on the shell).
                for (j, &mask) in ledger.subsets()[..n_sub - 1].iter().enumerate() {
                    let applies = s0
                        .iter()
                        .all(|&x| mask & (1 << x) != 0 || eta[x] >= 2);
                    if !applies {
                        continue;
                    }
                    let mut lp = Kahan::new();
                    let me = p_vals[id * n_sub + j];
                    for &(id2, wt) in stencil {
                        lp.add(wt * (p_vals[id2 as usize * n_sub + j] - me));
                    }
                    let ones = s0
                        .iter()
                        .filter(|&&x| mask & (1 << x) != 0 && eta[x] == 1)
                        .count();
                    if lp.value() < ones as f64 - 1e-9 {
                        drift_floor_violations += 1;
                    }
                }
            },
            s,
        );
    }

    let m_found = ms
        .iter()
        .zip(&margins)
        .find(|(_, &v)| v < 0.0)
        .map(|(&m, _)| m);
    let k_sel = match m_found {
        Some(m) => ms.iter().position(|&x| x == m).expect("scale scanned"),
        None => n_dy - 1,
    };

    // Sandwich fit at the selected scale over the interior.
    let mut c1 = f64::INFINITY;
    let mut c2 = 0.0f64;
    for li in 1..layers.len() - 1 {
        let s = (s_lo + li as u32) as f64;
        let layer = &layers[li];
        for r in 0..layer.size {
            let ratio = f_vals[(layer.base + r) as usize * n_dy + k_sel] / s;
            c1 = c1.min(ratio);
            c2 = c2.max(ratio);
        }
    }

    // Pass 3: corrector-boundary statistics. A state is on the boundary
    // at scale l when one of its active subsets stops being active at
    // some neighbor inside the closure.
    let l_one = m_max;
    let l_two = 2 * m_max;
    let c_max = c_proper.iter().copied().fold(0.0f64, f64::max);
    let lam_proper = (0..np)
        .map(|j| ledger.tables(j).min_diag_b())
        .fold(f64::INFINITY, f64::min);
    let g1 = ledger.gamma1();
    let mut count = vec![0u32; n_int];
    let mut first = vec![0u32; n_int];
    let mut boundary_count_l = 0u32;
    let mut boundary_gap_ratio = 0.0f64;
    let mut corrector_bound_violations = 0u64;
    let mut occupancy_threshold_violations = 0u64;
    let mut empty_site_checks = 0u64;
    let mut empty_site_violations = 0u64;
    let mut active = vec![0u128; total];
    let mut w_all = vec![0.0f64; total];
    for ell in 2..=l_two {
        let t = ell as f64 * ell as f64;
        for id in 0..total {
            let row = &p_vals[id * n_sub..(id + 1) * n_sub];
            let mut wmin = 0.0f64;
            for j in 0..n_sub - 1 {
                wmin = wmin.min(row[j] - c_proper[j] * t);
            }
            let tol = ACTIVE_TOL * (1.0 + wmin.abs());
            let mut mask = 0u128;
            if 0.0 <= wmin + tol {
                mask |= 1;
            }
            for j in 0..n_sub - 1 {
                if row[j] - c_proper[j] * t <= wmin + tol {
                    mask |= 1 << (j + 1);
                }
            }
            active[id] = mask;
            w_all[id] = wmin;

            if wmin < -c_max * t - 1e-9 * (1.0 + c_max * t) {
                corrector_bound_violations += 1;
            }
            // Active subsets only hold lightly loaded sites.
            let mut bits = mask >> 1;
            while bits != 0 {
                let j = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                if occ_max[id * np + j] as f64 >= g1 * ell as f64 {
                    occupancy_threshold_violations += 1;
                }
            }
            // Every active subset must hold the empty sites, provably so
            // once the depth-driven growth of any form missing one beats
            // the largest scale offset. Unit slack keeps the activation
            // tolerance out of the comparison.
            let zm = zero_mask[id];
            if np > 0 && zm != 0 {
                let sf = depth[id] as f64;
                if 0.5 * lam_proper * (sf * sf / m1 as f64 - sf) > c_max * t + 1.0 {
                    empty_site_checks += 1;
                    let mut mb = mask;
                    while mb != 0 {
                        let bit = mb.trailing_zeros() as usize;
                        mb &= mb - 1;
                        if bit == 0 || ledger.subsets()[bit - 1] & zm != zm {
                            empty_site_violations += 1;
                        }
                    }
                }
            }
        }
        for ii in 0..n_int {
            let id = lo_int + ii;
            let me = active[id];
            let stencil = &nb_flat[nb_off[ii] as usize..nb_off[ii + 1] as usize];
            let mut on_boundary = false;
            for &(id2, _) in stencil {
                let there = active[id2 as usize];
                if me & !there != 0 {
                    on_boundary = true;
                }
                // Gap between this state's corrector and the scaled form
                // of any subset active only at the neighbor.
                let mut extra = there & !me;
                while extra != 0 {
                    let bit = extra.trailing_zeros() as usize;
                    extra &= extra - 1;
                    let v = if bit == 0 {
                        0.0
                    } else {
                        p_vals[id * n_sub + (bit - 1)] - c_proper[bit - 1] * t
                    };
                    let ratio = (v - w_all[id]).abs() / ell as f64;
                    boundary_gap_ratio = boundary_gap_ratio.max(ratio);
                }
            }
            if on_boundary {
                count[ii] += 1;
                if first[ii] == 0 {
                    first[ii] = ell;
                }
            }
        }
        if ell == l_one {
            boundary_count_l = count.iter().copied().max().unwrap_or(0);
        }
    }
    let boundary_count_2l = count.iter().copied().max().unwrap_or(0);
    let boundary_fresh_after_l = first.iter().filter(|&&f| f > l_one).count() as u64;

    // Reconstruct the worst configuration at the selected scale.
    let worst_id = worst[k_sel] as u64;
    let li = match layers.binary_search_by(|l| l.base.cmp(&worst_id)) {
        Ok(i) => i,
        Err(i) => i - 1,
    };
    let s = s_lo + li as u32;
    let mut worst_eta = vec![0u32; kappa];
    worst_eta[x0] = n - s;
    match &layers[li].idx {
        Some(si) => {
            let mut comp = Vec::new();
            si.unrank(worst_id - layers[li].base, &mut comp);
            for (i, &site) in s0.iter().enumerate() {
                worst_eta[site] = comp[i];
            }
        }
        None => worst_eta[s0[0]] = s,
    }

    Ok(SuperharmonicReport {
        n,
        kappa,
        x0,
        window: (s_lo, s_hi),
        states_scanned: n_int as u64,
        m_found,
        margin: margins[k_sel],
        worst_eta,
        margins: ms.iter().copied().zip(margins).collect(),
        sandwich: Sandwich { c1, c2 },
        boundary_count_l,
        boundary_count_2l,
        boundary_fresh_after_l,
        boundary_gap_ratio,
        drift_floor_violations,
        site_identity_violations,
        form_bracket_violations,
        corrector_bound_violations,
        occupancy_threshold_violations,
        empty_site_checks,
        empty_site_violations,
    })
}
