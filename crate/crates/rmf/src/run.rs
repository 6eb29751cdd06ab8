//! Run orchestration behind the `rmf` binary: executes a subcommand against
//! a parsed [`RunConfig`], accumulates a [`ResultBundle`], writes it to the
//! output directory (partial results are written with a failure manifest),
//! and maps errors to stable exit codes.

use std::path::{Path, PathBuf};

use crate::config::RunConfig;
use crate::error::RmfError;
use crate::fields::{compute_densities, solve_fields, OrbitalSet};
use crate::hamiltonian::{build_hamiltonian, check_operator_bounds, validate_regime, Species};
use crate::report::{write_bundle, DescentRecord, Manifest, ResultBundle, Results};
use crate::retraction::gram_normalize;
use crate::scf::{scf_solve, SCFReport};
use crate::testutil::random_field;
use crate::variational::{
    commutator_descent_step, concentration_profile, energy, energy_split_route,
    subadditivity_probe, DensityMatrixPair,
};

/// Exit codes: 0 converged + all assertions pass, 2 schema error, 3 regime
/// refusal, 4 SCF non-convergence, 5 post-hoc assertion failure, 1 anything
/// else.
pub fn exit_code(err: &RmfError) -> i32 {
    match err {
        RmfError::Config(_) | RmfError::InvalidParams(_) | RmfError::InvalidLattice(_) => 2,
        RmfError::RegimeViolation(_) => 3,
        RmfError::ScfNonConvergence(_) | RmfError::NewtonDivergence { .. } => 4,
        RmfError::PostHoc(_) => 5,
        _ => 1,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    Validate,
    ProbeSubadditivity,
    ProbeDescent,
    CheckBounds,
    Spectrum,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// proceed despite a regime violation (recorded, not fatal)
    pub override_regime: bool,
    /// write field and density snapshots
    pub dump_fields: bool,
    /// overrides config output.directory
    pub out_dir: Option<PathBuf>,
}

/// Executes `cmd` and writes the bundle. On error the partial bundle is
/// still written, with the error text as the manifest status.
pub fn run(
    cmd: Command,
    config: &RunConfig,
    opts: &RunOptions,
) -> Result<ResultBundle, RmfError> {
    config.validate()?;
    let mut results = Results::default();
    let mut snapshots = None;
    let outcome = compute(cmd, config, opts, &mut results, &mut snapshots);
    let mut manifest = Manifest::new(config.echo_toml());
    match &outcome {
        Ok(()) => manifest.finish("ok"),
        Err(e) => manifest.finish(&e.to_string()),
    }
    let bundle = ResultBundle { manifest, results, snapshots };
    let dir = opts
        .out_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from(&config.output.directory));
    write_bundle(Path::new(&dir), &bundle)?;
    outcome.map(|_| bundle)
}

fn compute(
    cmd: Command,
    config: &RunConfig,
    opts: &RunOptions,
    results: &mut Results,
    snapshots: &mut Option<(crate::fields::MesonFieldSet, crate::fields::DensitySet)>,
) -> Result<(), RmfError> {
    let params = &config.model;
    let spec = config.lattice.to_spec()?;
    let regime = validate_regime(params);
    results.regime = Some(regime);
    if !regime.all_ok() && !opts.override_regime {
        return Err(RmfError::RegimeViolation(regime.failure_summary()));
    }
    if cmd == Command::Validate {
        return Ok(());
    }

    if cmd == Command::CheckBounds {
        return bounds_battery(config, results);
    }

    // every remaining subcommand starts from a ground-state solve
    let mut scf_cfg = config.scf;
    scf_cfg.allow_regime_violation = opts.override_regime;
    let report = scf_solve(params, &spec, &scf_cfg)?;
    record_solve(&report, params, results)?;

    if opts.dump_fields || config.output.dump_fields {
        let rho = compute_densities(&report.orbitals)?;
        let fields = solve_fields(&rho, params);
        *snapshots = Some((fields, rho));
    }

    match cmd {
        Command::Solve => {
            post_hoc_checks(&report, params, &scf_cfg)?;
            run_probes(config, &report, results)?;
        }
        Command::Spectrum => {}
        Command::ProbeSubadditivity => {
            let pairs = effective_lambda_pairs(config);
            probe_subadditivity(config, &pairs, results)?;
        }
        Command::ProbeDescent => {
            probe_descent(config, &report, results)?;
        }
        _ => unreachable!("validate and check-bounds handled above"),
    }
    Ok(())
}

fn record_solve(
    report: &SCFReport,
    params: &crate::fields::ModelParams,
    results: &mut Results,
) -> Result<(), RmfError> {
    results.converged = report.converged;
    results.iterations = report.iterations;
    results.total_energy = report.total_energy;
    results.energy = Some(energy(&report.orbitals, params)?);
    results.epsilons_p = report.epsilons_p.clone();
    results.epsilons_n = report.epsilons_n.clone();
    results.el_residual_max = report.el_residual_max;
    results.commutator_residual_p = report.commutator_residual.0;
    results.commutator_residual_n = report.commutator_residual.1;
    results.degenerate_fermi_level = report.degenerate_fermi_level;
    results.history = report.history.clone();
    for (species, out) in [
        (Species::Proton, &mut results.spectrum_p),
        (Species::Neutron, &mut results.spectrum_n),
    ] {
        let data = build_hamiltonian(species, &report.orbitals, params)?.eig()?;
        *out = data.eigenvalues;
    }
    if !report.converged {
        return Err(RmfError::ScfNonConvergence(format!(
            "not converged after {} iterations",
            report.iterations
        )));
    }
    Ok(())
}

fn post_hoc_checks(
    report: &SCFReport,
    params: &crate::fields::ModelParams,
    scf_cfg: &crate::scf::SCFConfig,
) -> Result<(), RmfError> {
    if report.el_residual_max > scf_cfg.tol_el {
        return Err(RmfError::PostHoc(format!(
            "EL residual {:.3e} exceeds {:.3e}",
            report.el_residual_max, scf_cfg.tol_el
        )));
    }
    let (cp, cn) = report.commutator_residual;
    if cp.max(cn) > 1e-8 {
        return Err(RmfError::PostHoc(format!(
            "density-matrix commutator residual {:.3e} exceeds 1e-8",
            cp.max(cn)
        )));
    }
    let split = energy_split_route(&report.orbitals, params)?;
    let diff = (split - report.total_energy).abs();
    if diff > 1e-10 * report.total_energy.abs().max(1.0) {
        return Err(RmfError::PostHoc(format!(
            "two-route energy disagreement {diff:.3e} exceeds 1e-10 relative"
        )));
    }
    Ok(())
}

/// Default lambda pairs for `probe-subadditivity` when the config lists
/// none: the trivial split and the even split.
fn effective_lambda_pairs(config: &RunConfig) -> Vec<[f64; 2]> {
    if config.probes.subadditivity_lambdas.is_empty() {
        vec![[1.0, 0.0], [0.5, 0.5]]
    } else {
        config.probes.subadditivity_lambdas.clone()
    }
}

/// Expands a (proton weight, neutron weight) pair into the per-orbital
/// lambda vector, protons first.
fn expand_lambda(pair: [f64; 2], z: usize, n: usize) -> Vec<f64> {
    let mut lambda = vec![pair[0]; z];
    lambda.extend(std::iter::repeat(pair[1]).take(n));
    lambda
}

fn probe_subadditivity(
    config: &RunConfig,
    pairs: &[[f64; 2]],
    results: &mut Results,
) -> Result<(), RmfError> {
    let spec = config.lattice.to_spec()?;
    for &pair in pairs {
        let lambda = expand_lambda(pair, config.model.z, config.model.n);
        let report = subadditivity_probe(&config.model, &spec, &config.scf, &lambda)?;
        results.subadditivity.push(report);
    }
    Ok(())
}

fn probe_descent(
    config: &RunConfig,
    report: &SCFReport,
    results: &mut Results,
) -> Result<(), RmfError> {
    let params = &config.model;
    let unit = |set: &[crate::lattice::SpinorField]| -> Vec<crate::lattice::SpinorField> {
        set.iter()
            .map(|f| {
                let n = f.norm_l2();
                f.scaled(num_complex::Complex64::new(1.0 / n, 0.0))
            })
            .collect()
    };
    let gamma = DensityMatrixPair::new(
        unit(&report.orbitals.protons),
        unit(&report.orbitals.neutrons),
    )?;
    let spec = *report.orbitals.spec();
    let e0 = energy(&gamma.as_orbitals(spec)?, params)?.total;
    for &eps in &config.probes.descent_epsilons {
        let (stepped, prediction) = commutator_descent_step(&gamma, params, eps)?;
        let e1 = energy(&stepped.as_orbitals(spec)?, params)?.total;
        results.descent.push(DescentRecord {
            epsilon: eps,
            predicted_first_order: prediction.predicted_first_order,
            measured_change: e1 - e0,
        });
    }
    Ok(())
}

fn bounds_battery(config: &RunConfig, results: &mut Results) -> Result<(), RmfError> {
    let params = &config.model;
    let spec = config.lattice.to_spec()?;
    let id_p = nalgebra::DMatrix::identity(params.z, params.z);
    let id_n = nalgebra::DMatrix::identity(params.n, params.n);
    for trial in 0..config.probes.bounds_trials.max(1) {
        let base = config.seed.wrapping_mul(1000).wrapping_add(trial as u64 * 100);
        let protons: Vec<_> = (0..params.z).map(|i| random_field(spec, base + i as u64)).collect();
        let neutrons: Vec<_> =
            (0..params.n).map(|i| random_field(spec, base + 50 + i as u64)).collect();
        let orbitals = OrbitalSet::new(
            spec,
            gram_normalize(&protons, &id_p)?,
            gram_normalize(&neutrons, &id_n)?,
        )?;
        let bounds = check_operator_bounds(&orbitals, params)?;
        let ok = bounds.ok(1e-8);
        results.bounds.push(bounds);
        if !ok {
            return Err(RmfError::PostHoc(format!(
                "operator bound violated on random trial {trial}"
            )));
        }
    }
    Ok(())
}

fn run_probes(
    config: &RunConfig,
    report: &SCFReport,
    results: &mut Results,
) -> Result<(), RmfError> {
    if !config.probes.subadditivity_lambdas.is_empty() {
        probe_subadditivity(config, &config.probes.subadditivity_lambdas.clone(), results)?;
    }
    for &radius in &config.probes.concentration_radii {
        results.concentration.push(concentration_profile(&report.orbitals, radius)?);
    }
    if !config.probes.descent_epsilons.is_empty() && config.probes.check_bounds {
        // descent sweep is part of the dedicated subcommand; under `solve`
        // it only runs together with the bound battery to keep the default
        // solve fast
        probe_descent(config, report, results)?;
    }
    if config.probes.check_bounds {
        bounds_battery(config, results)?;
    }
    Ok(())
}
