//! Sampling contracts that cut across modules: replica prefixes are
//! stable under batch growth, and the dense equilibrium potentials agree
//! with brute-force hitting frequencies of the site walk.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use zrp_core::simulate::{run_well_paths, SimConfig, StartCondition};
use zrp_core::walk::WalkSpec;
use zrp_core::zrp::ZrpModel;

// Adding replicas must not disturb the ones already scheduled: replica i
// is a function of (model, start, seed, i) only.
#[test]
fn replica_outputs_are_prefix_stable() {
    let model = ZrpModel::new(50, WalkSpec::complete_unit(3).unwrap()).unwrap();
    let start = StartCondition::WellEquilibrium(0);
    let short = SimConfig {
        seed: 11,
        replicas: 2,
        horizon_theta: 1.5,
        ..SimConfig::default()
    };
    let long = SimConfig {
        replicas: 5,
        ..short.clone()
    };
    let few = run_well_paths(&model, &start, &short).unwrap();
    let many = run_well_paths(&model, &start, &long).unwrap();
    assert_eq!(few.len(), 2);
    assert_eq!(many.len(), 5);
    for (a, b) in few.iter().zip(&many) {
        assert_eq!(a.entries, b.entries);
        assert_eq!(a.delta_time, b.delta_time);
        assert_eq!(a.total_time, b.total_time);
        assert_eq!(a.events, b.events);
    }
}

/// Frequency of hitting site `goal` before site `trap`, starting from
/// `from`, over the embedded jump chain of the walk.
fn hit_frequency(
    spec: &WalkSpec,
    from: usize,
    goal: usize,
    trap: usize,
    samples: u64,
    rng: &mut ChaCha12Rng,
) -> f64 {
    let mut hits = 0u64;
    for _ in 0..samples {
        let mut at = from;
        while at != goal && at != trap {
            let total = spec.total_rate(at);
            let mut draw = rng.gen_range(0.0..total);
            for (y, r) in spec.neighbors(at) {
                if draw < r {
                    at = y;
                    break;
                }
                draw -= r;
            }
        }
        if at == goal {
            hits += 1;
        }
    }
    hits as f64 / samples as f64
}

#[test]
fn equilibrium_potentials_match_hitting_frequencies() {
    let mut rng = ChaCha12Rng::seed_from_u64(40);
    let samples = 100_000u64;
    for _ in 0..3 {
        // Random connected kernel on four sites.
        let mut rates = vec![vec![0.0; 4]; 4];
        for i in 0..4 {
            for j in i + 1..4 {
                let r = if j == i + 1 || rng.gen_bool(0.5) {
                    rng.gen_range(0.2..2.0)
                } else {
                    0.0
                };
                rates[i][j] = r;
                rates[j][i] = r;
            }
        }
        let spec = WalkSpec::new(rates).unwrap();
        let h = spec.equilibrium_potential(&[0], &[3]).unwrap();
        for from in [1usize, 2] {
            let freq = hit_frequency(&spec, from, 0, 3, samples, &mut rng);
            let sigma = (h[from] * (1.0 - h[from]) / samples as f64).sqrt();
            assert!(
                (freq - h[from]).abs() <= 3.0 * sigma + 1e-9,
                "from {from}: frequency {freq} vs potential {} (sigma {sigma})",
                h[from]
            );
        }
    }
}
