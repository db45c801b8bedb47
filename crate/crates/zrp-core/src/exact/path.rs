//! Canonical configuration paths that move one particle between two sites
//! while staying inside the envelope around a fixed origin.
//!
//! The particle travels along a fixed shortest route.  A direct march can
//! overfill a route site that already holds the maximal envelope occupancy,
//! so saturated stretches are handled by a detour: the furthest particle of
//! the stretch moves forward first, the stretch shifts one slot, and the
//! travelling particle then steps into the freed site.  Every route edge is
//! used exactly once, so the path length equals the route length.

use crate::error::{CoreError, Result};
use crate::zrp::ZrpModel;

/// Path from `eta` to the configuration with one particle moved from `x0`
/// to `x`, as a list of configurations starting at `eta`.
///
/// Both endpoints must lie in the envelope `{eta_y <= ell for y != x0}`;
/// consecutive configurations differ by one jump along an edge of the walk.
pub fn comparison_path(
    model: &ZrpModel,
    x0: usize,
    eta: &[u32],
    x: usize,
) -> Result<Vec<Vec<u32>>> {
    let kappa = model.kappa();
    let ell = model.ell();
    if x0 >= kappa || x >= kappa {
        return Err(CoreError::argument("comparison path: site out of range"));
    }
    if eta.len() != kappa {
        return Err(CoreError::argument(
            "comparison path: configuration has the wrong number of sites",
        ));
    }
    if eta.iter().map(|&k| k as u64).sum::<u64>() != model.n() as u64 {
        return Err(CoreError::argument(
            "comparison path: configuration does not carry n particles",
        ));
    }
    if (0..kappa).any(|y| y != x0 && eta[y] > ell) {
        return Err(CoreError::argument(
            "comparison path: configuration outside the envelope",
        ));
    }
    if x == x0 {
        return Ok(vec![eta.to_vec()]);
    }
    if eta[x0] == 0 {
        return Err(CoreError::argument(
            "comparison path: no particle at the origin site",
        ));
    }
    if eta[x] >= ell {
        return Err(CoreError::argument(
            "comparison path: moved particle would overfill the target",
        ));
    }

    let route = model.walk().shortest_route(x0, x);
    let m = route.len() - 1;

    // Decide the order in which route edges fire.  Saturation is read off
    // the starting configuration: a stretch keeps its occupancies until the
    // travelling particle reaches it.
    let mut order: Vec<usize> = Vec::with_capacity(m);
    let mut i = 0usize;
    while i < m {
        match (i + 1..m).find(|&k| eta[route[k]] == ell) {
            None => {
                order.extend(i..m);
                i = m;
            }
            Some(p) => {
                let mut q = p;
                while q + 1 < m && eta[route[q + 1]] == ell {
                    q += 1;
                }
                order.extend(i..p - 1);
                order.extend((p..=q).rev());
                order.push(p - 1);
                i = q + 1;
            }
        }
    }
    debug_assert_eq!(order.len(), m);

    let mut path = Vec::with_capacity(m + 1);
    let mut cur = eta.to_vec();
    path.push(cur.clone());
    for &k in &order {
        debug_assert!(model.walk().rate(route[k], route[k + 1]) > 0.0);
        cur[route[k]] -= 1;
        cur[route[k + 1]] += 1;
        debug_assert!((0..kappa).all(|y| y == x0 || cur[y] <= ell));
        path.push(cur.clone());
    }
    debug_assert_eq!(path.last().unwrap()[x], eta[x] + 1);
    debug_assert_eq!(path.last().unwrap()[x0], eta[x0] - 1);
    Ok(path)
}
