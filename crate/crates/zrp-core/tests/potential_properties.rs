//! Property tests for the site-walk potential theory on randomly drawn
//! connected kernels.

use proptest::prelude::*;
use zrp_core::walk::WalkSpec;

/// Random symmetric kernel on `k` sites.  Consecutive sites are always
/// linked, so the walk is irreducible; the remaining pairs carry a rate
/// with probability ~1/2.
fn connected_spec(k: usize) -> impl Strategy<Value = WalkSpec> {
    let path = prop::collection::vec(0.2f64..2.0, k - 1);
    let extra = prop::collection::vec(
        prop::option::weighted(0.5, 0.1f64..2.0),
        (k * (k - 1)) / 2 - (k - 1),
    );
    (path, extra).prop_map(move |(path, extra)| {
        let mut rates = vec![vec![0.0; k]; k];
        let mut it = extra.into_iter();
        for i in 0..k {
            for j in i + 1..k {
                let r = if j == i + 1 {
                    path[i]
                } else {
                    it.next().unwrap().unwrap_or(0.0)
                };
                rates[i][j] = r;
                rates[j][i] = r;
            }
        }
        WalkSpec::new(rates).unwrap()
    })
}

fn any_spec() -> impl Strategy<Value = WalkSpec> {
    (2usize..=8).prop_flat_map(connected_spec)
}

/// Split the sites into two disjoint nonempty groups from a label vector.
/// The first site is pinned to one group and the last to the other, so
/// neither can come out empty.
fn two_groups(labels: &[u8]) -> (Vec<usize>, Vec<usize>) {
    let mut labels = labels.to_vec();
    labels[0] = 0;
    let last = labels.len() - 1;
    labels[last] = 1;
    let a = labels
        .iter()
        .enumerate()
        .filter(|&(_, &l)| l == 0)
        .map(|(i, _)| i)
        .collect();
    let b = labels
        .iter()
        .enumerate()
        .filter(|&(_, &l)| l == 1)
        .map(|(i, _)| i)
        .collect();
    (a, b)
}

proptest! {
    #[test]
    fn capacity_is_symmetric(
        spec in any_spec(),
        labels in prop::collection::vec(0u8..3, 8),
    ) {
        let (a, b) = two_groups(&labels[..spec.kappa()]);
        let ab = spec.capacity(&a, &b).unwrap();
        let ba = spec.capacity(&b, &a).unwrap();
        prop_assert!((ab - ba).abs() <= 1e-10 * (1.0 + ab.abs()),
            "cap({a:?},{b:?}) = {ab} vs {ba}");
        prop_assert!(ab > 0.0);
    }

    #[test]
    fn single_site_potentials_are_reciprocal(
        spec in any_spec(),
        labels in prop::collection::vec(0u8..3, 8),
    ) {
        // Groups: 0-labelled sites stay free, 1-labelled form the target.
        let (free, target) = two_groups(&labels[..spec.kappa()]);
        prop_assume!(free.len() >= 2);
        let x = free[0];
        let y = free[1];
        let hx = spec.equilibrium_potential(&[x], &target).unwrap();
        let hy = spec.equilibrium_potential(&[y], &target).unwrap();
        let cx = spec.capacity(&[x], &target).unwrap();
        let cy = spec.capacity(&[y], &target).unwrap();
        let lhs = hx[y] / cx;
        let rhs = hy[x] / cy;
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()),
            "reciprocity {lhs} vs {rhs}");
        for &v in hx.iter().chain(hy.iter()) {
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&v));
        }
    }

    // coefficient_tables validates the u-row sums and the z identity
    // internally; building the tables on random subsets exercises both.
    #[test]
    fn coefficient_tables_validate_on_random_subsets(
        spec in any_spec(),
        labels in prop::collection::vec(0u8..3, 8),
        x0_pick in 0usize..8,
    ) {
        let k = spec.kappa();
        let x0 = x0_pick % k;
        let mut a: Vec<usize> =
            (0..k).filter(|&x| x != x0 && labels[x] > 0).collect();
        if a.is_empty() {
            a.push(if x0 == 0 { 1 } else { 0 });
        }
        let tables = spec.coefficient_tables(x0, &a).unwrap();
        for &x in &a {
            let row: f64 = tables.complement.iter().map(|&y| tables.u(x, y)).sum();
            prop_assert!((row - 1.0).abs() <= 1e-10, "u row sum {row}");
        }
    }

    #[test]
    fn diagonal_coefficients_grow_with_the_subset(
        spec in any_spec(),
        labels in prop::collection::vec(0u8..3, 8),
        x0_pick in 0usize..8,
    ) {
        // label 2 puts a site in the small subset, labels {1,2} in the
        // large one; the reference site stays out of both.
        let k = spec.kappa();
        let x0 = x0_pick % k;
        let mut small: Vec<usize> =
            (0..k).filter(|&x| x != x0 && labels[x] == 2).collect();
        if small.is_empty() {
            small.push(if x0 == 0 { 1 } else { 0 });
        }
        let large: Vec<usize> =
            (0..k).filter(|&x| x != x0 && (labels[x] > 0 || small.contains(&x))).collect();
        let ts = spec.coefficient_tables(x0, &small).unwrap();
        let tl = spec.coefficient_tables(x0, &large).unwrap();
        for x in 0..k {
            for y in 0..k {
                prop_assert!(ts.b(x, y) <= tl.b(x, y) + 1e-10,
                    "b[{x}][{y}] fell: {} -> {}", ts.b(x, y), tl.b(x, y));
            }
        }
    }
}
