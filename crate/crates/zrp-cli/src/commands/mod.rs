//! One function per subcommand.  Every command reads the shared
//! configuration, sweeps the configured system sizes where that makes
//! sense, and returns long-format rows plus an optional structured
//! report.

use zrp_core::cutoff::CutoffProfile;
use zrp_core::exact::{assemble_ehat, assemble_full, exact_capacity, principal_gap, solve_poisson};
use zrp_core::metastable::{compare, LimitChain};
use zrp_core::simulate::{run_well_paths, OrderPath, SimConfig, StartCondition};
use zrp_core::tubes::capacity_upper_bound;
use zrp_core::zrp::partition_tables;
use zrp_core::Result;

use crate::config::ExperimentConfig;
use crate::output::{row, Artifacts};

/// Potentials and capacities of the site walk, plus the induced limit
/// rates.  These are size-free, so the `n` column carries the site count.
pub fn walk(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let mut art = Artifacts::new("walk", cfg);
    let spec = &cfg.walk;
    let k = spec.kappa();
    let chain = LimitChain::from_walk(spec)?;
    for x in 0..k {
        for y in (x + 1)..k {
            let cap = spec.capacity(&[x], &[y])?;
            art.push(row(k as u32, format!("capacity_{x}_{y}"), cap));
            art.push(row(
                k as u32,
                format!("limit_rate_{x}_{y}"),
                chain.rate(x, y),
            ));
            let h = spec.equilibrium_potential(&[x], &[y])?;
            for (z, &v) in h.iter().enumerate() {
                art.push(row(k as u32, format!("potential_{x}_{y}_at_{z}"), v));
            }
        }
    }
    for x in 0..k {
        art.push(row(k as u32, format!("holding_mean_{x}"), chain.holding_mean(x)));
    }
    Ok(art)
}

/// Partition normalization and well masses over the size sweep.
pub fn measure(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let mut art = Artifacts::new("measure", cfg);
    for &n in &cfg.n_list {
        let model = cfg.model(n)?;
        let tables = partition_tables(n, model.kappa())?;
        art.push(row(n, "z_scaled", tables.scaled_partition()));
        art.push(row(n, "mu_well", tables.well_probability(model.ell())?));
        art.push(row(n, "mu_deep", tables.well_probability(model.deep_width())?));
        art.push(row(
            n,
            "mu_shallow",
            tables.well_probability(model.shallow_width())?,
        ));
        art.push(row(n, "mu_delta", tables.bulk_remainder(model.ell())?));
        art.push(row(n, "ell", model.ell() as f64));
    }
    Ok(art)
}

/// Poisson sweep: how closely the lifted solution tracks the site
/// function, and the energy it pays.
pub fn poisson(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let mut art = Artifacts::new("poisson", cfg);
    let f = cfg.site_function();
    for &n in &cfg.n_list {
        let model = cfg.model(n)?;
        let (idx, gen) = assemble_full(&model, true, cfg.state_cap())?;
        let sol = solve_poisson(&model, &idx, &gen, &f, cfg.lambda)?;
        art.push(row(n, "max_dev", sol.max_dev));
        art.push(row(n, "dirichlet", sol.dirichlet));
        art.push(row(n, "iterations", sol.report.iterations as f64));
        for (x, &m) in sol.well_means.iter().enumerate() {
            art.push(row(n, format!("well_mean_{x}"), m));
        }
    }
    Ok(art)
}

/// Exact well-to-rest capacity against its variational upper bound and
/// the sharp limit-rate prediction.
pub fn capacity(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let mut art = Artifacts::new("capacity", cfg);
    let profile = CutoffProfile::new(cfg.epsilon)?;
    let chain = LimitChain::from_walk(&cfg.walk)?;
    let x0 = cfg.x0;
    let sharp: f64 = (0..cfg.walk.kappa())
        .filter(|&y| y != x0)
        .map(|y| chain.rate(x0, y))
        .sum::<f64>()
        / cfg.walk.kappa() as f64;
    for &n in &cfg.n_list {
        let model = cfg.model(n)?;
        let (idx, gen) = assemble_full(&model, true, cfg.state_cap())?;
        let exact = exact_capacity(
            &idx,
            &gen,
            &|eta: &[u32]| model.in_e(eta, x0),
            &|eta: &[u32]| (0..model.kappa()).any(|y| y != x0 && model.in_e(eta, y)),
        )?;
        let upper = capacity_upper_bound(&model, x0, &profile)?;
        art.push(row(n, "cap_exact", exact.value));
        art.push(row(n, "cap_upper", upper));
        art.push(row(n, "cap_ratio_to_sharp", exact.value / sharp));
    }
    art.push(row(0, "cap_sharp", sharp));
    Ok(art)
}

/// Relaxation of the chain restricted to one well, against the square of
/// the well width.
pub fn gap(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let mut art = Artifacts::new("gap", cfg);
    for &n in &cfg.n_list {
        let model = cfg.model(n)?;
        let (_, gen) = assemble_ehat(&model, cfg.x0, cfg.state_cap())?;
        let report = principal_gap(&gen)?;
        let ell2 = (model.ell() as f64).powi(2);
        art.push(row(n, "gap", report.gap));
        art.push(row(n, "gap_times_ell_sq", report.gap * ell2));
        art.push(row(n, "ell", model.ell() as f64));
    }
    Ok(art)
}

fn sample_paths(cfg: &ExperimentConfig, n: u32) -> Result<Vec<OrderPath>> {
    let model = cfg.model(n)?;
    let sim = SimConfig {
        seed: cfg.seed,
        replicas: cfg.replicas,
        horizon_theta: cfg.t_max,
        ..SimConfig::default()
    };
    run_well_paths(&model, &StartCondition::WellEquilibrium(cfg.x0), &sim)
}

/// Kinetic Monte Carlo sweep: condensate order paths and the time spent
/// between wells.
pub fn simulate(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let mut art = Artifacts::new("simulate", cfg);
    for &n in &cfg.n_list {
        let paths = sample_paths(cfg, n)?;
        let total: f64 = paths.iter().map(|p| p.total_time).sum();
        let delta: f64 = paths.iter().map(|p| p.delta_time).sum();
        let events: u64 = paths.iter().map(|p| p.events).sum();
        let transitions: u64 = paths
            .iter()
            .map(|p| (p.entries.len() as u64).saturating_sub(1))
            .sum();
        art.push(row(n, "delta_fraction", delta / total));
        art.push(row(n, "transitions", transitions as f64));
        art.push(row(n, "events", events as f64));
        art.push(row(n, "time_theta", total));
    }
    Ok(art)
}

/// Sampled order process against the limit chain: jump law in total
/// variation, holding means per site.
pub fn compare_cmd(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let mut art = Artifacts::new("compare", cfg);
    let chain = LimitChain::from_walk(&cfg.walk)?;
    let mut reports = Vec::new();
    for &n in &cfg.n_list {
        let paths = sample_paths(cfg, n)?;
        let rep = compare(&paths, &chain)?;
        art.push(row(n, "max_tv", rep.max_tv));
        art.push(row(n, "delta_fraction", rep.delta_fraction));
        art.push(row(n, "transitions", rep.total_transitions as f64));
        for site in &rep.sites {
            art.push(row(n, format!("tv_{}", site.site), site.tv_embedded));
            art.push(row(
                n,
                format!("holding_mean_{}", site.site),
                site.mean_holding,
            ));
            art.push(row(
                n,
                format!("holding_expected_{}", site.site),
                site.expected_holding,
            ));
        }
        reports.push((n, rep));
    }
    art.attach_report(&reports)?;
    Ok(art)
}

/// Certificate scan for drift toward the deep well.
pub fn superharmonic(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let mut art = Artifacts::new("superharmonic", cfg);
    let mut reports = Vec::new();
    for &n in &cfg.n_list {
        let model = cfg.model(n)?;
        let rep = zrp_core::superharmonic::superharmonic_check(&model, cfg.x0, cfg.m_max)?;
        art.push(row(
            n,
            "m_found",
            rep.m_found.map(|m| m as f64).unwrap_or(-1.0),
        ));
        art.push(row(n, "margin", rep.margin));
        art.push(row(n, "sandwich_c1", rep.sandwich.c1));
        art.push(row(n, "sandwich_c2", rep.sandwich.c2));
        art.push(row(n, "boundary_count_l", rep.boundary_count_l as f64));
        art.push(row(n, "boundary_count_2l", rep.boundary_count_2l as f64));
        for &(m, margin) in &rep.margins {
            art.push(row(n, format!("margin_at_{m}"), margin));
        }
        reports.push(rep);
    }
    art.attach_report(&reports)?;
    Ok(art)
}

/// Every subcommand in sequence, sharing one configuration.
pub fn all(cfg: &ExperimentConfig) -> Result<Vec<Artifacts>> {
    Ok(vec![
        walk(cfg)?,
        measure(cfg)?,
        poisson(cfg)?,
        capacity(cfg)?,
        gap(cfg)?,
        simulate(cfg)?,
        compare_cmd(cfg)?,
        superharmonic(cfg)?,
    ])
}
