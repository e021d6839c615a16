//! Run orchestration: build the equilibrium, march the configured modes,
//! measure everything, and write the artifacts.
//!
//! All outputs are deterministic functions of (config bytes, seed): no
//! timestamps, no machine identifiers, and sweep aggregation happens in
//! case-index order regardless of the parallel schedule.

use std::fs;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{build_initial, RunConfig, SCHEMA_VERSION};
use crate::diagnostics::{
    check_localized_decay, check_lyapunov, combine_ladder, find_rho, fit_rate, EnergyTrace,
    LocalizedDecayReport, LyapunovReport, RateFit, Sampler,
};
use crate::dynamics::{Checkpoint, ModeSolver, ModeState, SolverBackend};
use crate::error::{Error, Result};
use crate::grid::{SpectralOps, ZGrid};
use crate::multiplier::Multiplier;
use crate::oracle::couette_exact_field;
use crate::partition::{build_partition, localized_data, LocalViscosity, Partition, PartitionReport};
use crate::profiles::{
    build_equilibrium, build_profile, validate_profile, AdmissibilityReport, ShearEquilibrium,
};

/// Exit-status contract: 0 success, 1 admissibility failure, 2 numerical
/// check failure, 3 IO/config error (the CLI maps errors to 3 or 2 via
/// [`exit_code_for`]).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Success,
    AdmissibilityFailure,
    NumericalFailure,
}

impl RunStatus {
    pub fn code(self) -> i32 {
        match self {
            RunStatus::Success => 0,
            RunStatus::AdmissibilityFailure => 1,
            RunStatus::NumericalFailure => 2,
        }
    }

    fn worst(self, other: RunStatus) -> RunStatus {
        if other.code() > self.code() {
            other
        } else {
            self
        }
    }

    fn label(self) -> &'static str {
        match self {
            RunStatus::Success => "success",
            RunStatus::AdmissibilityFailure => "admissibility-failure",
            RunStatus::NumericalFailure => "numerical-failure",
        }
    }
}

/// Exit code for an error escaping a command: numerical failures map to 2,
/// everything else (IO, config, shape) to 3.
pub fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Normalization { .. } => 1,
        Error::SingularSolve(_)
        | Error::IntervalTooShort { .. }
        | Error::ExtensionRatio { .. }
        | Error::TooManyIntervals(_)
        | Error::CoefficientSearch { .. }
        | Error::NonPositiveEnergy(_) => 2,
        _ => 3,
    }
}

/// Everything derived from a config before any mode is marched.
pub struct Prepared {
    pub config: RunConfig,
    pub hash: String,
    pub eq: ShearEquilibrium,
    pub grid: ZGrid,
    pub admissibility: AdmissibilityReport,
    pub localized: Option<(Partition, Vec<LocalViscosity>)>,
    pub partition_error: Option<String>,
}

pub fn prepare(config: RunConfig, hash: String) -> Result<Prepared> {
    config.validate()?;
    let kind = config.profile.kind()?;
    let profile = build_profile(kind, config.profile.l_y, config.profile.n_y)?;
    let sigma = config.equilibrium.resolve_sigma(profile.sup_mu())?;
    let eq = build_equilibrium(profile, sigma)?;
    let admissibility = validate_profile(&eq);
    let (lo, hi) = eq.z_image();
    let center = config.grid.z_center.unwrap_or(0.5 * (lo + hi));
    let grid = ZGrid::with_center(config.grid.n_z, config.grid.l_z, center)?;
    let (localized, partition_error) = match build_partition(eq.profile()) {
        Ok(part) => match localized_data(&eq, &part) {
            Ok(data) => (Some((part, data)), None),
            Err(e) => (None, Some(e.to_string())),
        },
        Err(e) => (None, Some(e.to_string())),
    };
    Ok(Prepared {
        config,
        hash,
        eq,
        grid,
        admissibility,
        localized,
        partition_error,
    })
}

/// Everything measured while marching one wavenumber.
pub struct ModeOutcome {
    pub k: i64,
    pub trace: EnergyTrace,
    pub lyapunov: LyapunovReport,
    /// max over samples of (comparison_lhs - comparison_rhs) / ||W||.
    pub comparison_max_excess: f64,
    /// Relative L^2 error against the exact constant-viscosity evolution;
    /// present only when the profile admits the closed form.
    pub oracle_rel_error: Option<f64>,
    pub hn_rho: Option<f64>,
    pub hn_error: Option<String>,
    pub rate_fit: Option<RateFit>,
    pub interval_fits: Vec<Option<RateFit>>,
    pub theta_reports: Vec<LocalizedDecayReport>,
    pub final_state: ModeState,
    pub steps: usize,
    pub backend: SolverBackend,
    pub flagged: bool,
}

/// March one mode from the configured initial data and measure everything.
pub fn run_mode(prep: &Prepared, k: i64, w0: &[Complex64]) -> Result<ModeOutcome> {
    let config = &prep.config;
    let coeffs = prep.eq.sample_coefficients(prep.grid.points());
    let mut solver = ModeSolver::new(&prep.grid, &coeffs, k, config.solver.backend()?)?;
    let localized = prep.localized.as_ref().map(|(p, d)| (p, d.as_slice()));
    if config.energy.partitioned && localized.is_none() {
        return Err(Error::Config(format!(
            "partitioned energy requested but the partition failed: {}",
            prep.partition_error.as_deref().unwrap_or("unknown")
        )));
    }
    let order = config.energy.hn_order;
    let mut sampler = Sampler::new(
        &prep.grid,
        &coeffs,
        localized,
        k,
        config.energy.partitioned,
        order,
    )?;

    let dt = config.time.dt;
    let steps = (config.time.t_final / dt).round().max(1.0) as usize;
    let stride = config.time.output_stride;

    let mut state = ModeState {
        k,
        t: 0.0,
        w_hat: w0.to_vec(),
        provenance: format!("config:{}", prep.hash),
    };
    let mut samples = Vec::new();
    let mut terms_series: Vec<Vec<f64>> = Vec::new();
    let mut comparison_max = f64::NEG_INFINITY;

    for step in 0..=steps {
        if step % stride == 0 || step == steps {
            let stream = solver.solve_stream(state.t, &state.w_hat)?;
            let sample = sampler.sample(&state, &stream)?;
            let scale = sample.l2.sqrt();
            let excess = if scale > 0.0 {
                (sample.comparison_lhs - sample.comparison_rhs) / scale
            } else {
                0.0
            };
            comparison_max = comparison_max.max(excess);
            terms_series.push(sampler.hn_terms(state.t, &state.w_hat)?);
            samples.push(sample);
        }
        if step < steps {
            state = solver.step(&state, dt)?;
        }
    }

    // calibrate the derivative ladder on the finished trace, then recombine
    // the en columns; a failed search is reported, not fatal
    let times: Vec<f64> = samples.iter().map(|s| s.t).collect();
    let (hn_rho, hn_error) = match find_rho(&terms_series, &times, order) {
        Ok((rho, _)) => (Some(rho), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let rho = hn_rho.unwrap_or(1.0);
    sampler.set_rho(rho);
    for (sample, terms) in samples.iter_mut().zip(&terms_series) {
        sample.en = (0..=order)
            .map(|l| combine_ladder(&terms[..=l], rho))
            .collect();
    }

    let trace = EnergyTrace {
        samples,
        hn_order: order,
        intervals: sampler.intervals(),
        partitioned: config.energy.partitioned,
    };
    let tol = config.checks.lyapunov_tol_factor * trace.samples[0].ea;
    let lyapunov = check_lyapunov(&trace, tol);

    // exact reference for constant viscosity with unit slope (z = y)
    let oracle_rel_error = if prep.eq.profile().kind_label() == "constant"
        && (prep.eq.sigma() / prep.eq.sup_mu() - 1.0).abs() < 1e-12
    {
        let mu = prep.eq.sup_mu();
        let mut ops = SpectralOps::new(&prep.grid);
        let w0_spec = ops.dft(w0)?;
        let exact = couette_exact_field(mu, k as f64, prep.grid.freqs(), state.t, &w0_spec);
        let final_spec = ops.dft(&state.w_hat)?;
        let err_sq: f64 = final_spec
            .iter()
            .zip(&exact)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        let ref_sq: f64 = exact.iter().map(|v| v.norm_sqr()).sum();
        if ref_sq > 0.0 {
            Some((err_sq / ref_sq).sqrt())
        } else {
            None
        }
    } else {
        None
    };

    let fit_window = config.fit.as_ref().map(|f| {
        if f.scaled {
            let scale = prep.eq.nu().powf(-1.0 / 3.0);
            (f.window[0] * scale, f.window[1] * scale)
        } else {
            (f.window[0], f.window[1])
        }
    });
    let l2s: Vec<f64> = trace.samples.iter().map(|s| s.l2).collect();
    let rate_fit = match fit_window {
        Some(window) => Some(fit_rate(&times, &l2s, window)?),
        None => None,
    };
    let interval_fits: Vec<Option<RateFit>> = match fit_window {
        Some(window) => (0..trace.intervals)
            .map(|j| {
                let series: Vec<f64> = trace.samples.iter().map(|s| s.e_loc[j]).collect();
                fit_rate(&times, &series, window).ok()
            })
            .collect(),
        None => Vec::new(),
    };

    let theta_reports: Vec<LocalizedDecayReport> = match localized {
        Some((part, _)) => config
            .checks
            .theta_probes
            .iter()
            .map(|p| check_localized_decay(&trace, &prep.eq, part, &p.intervals, p.theta))
            .collect::<Result<_>>()?,
        None if config.checks.theta_probes.is_empty() => Vec::new(),
        None => {
            return Err(Error::Config(
                "theta probes need a partition, which failed to build".into(),
            ))
        }
    };

    Ok(ModeOutcome {
        k,
        lyapunov,
        comparison_max_excess: comparison_max,
        oracle_rel_error,
        hn_rho,
        hn_error,
        rate_fit,
        interval_fits,
        theta_reports,
        steps,
        backend: solver.backend(),
        flagged: solver.flagged(),
        final_state: state,
        trace,
    })
}

/// Per-mode slice of the manifest.
#[derive(Debug, Clone, Serialize)]
pub struct ModeSummary {
    pub k: i64,
    pub backend: String,
    /// True when nu k^2 is no longer small against nu^{1/3}: the heat term
    /// competes with the enhanced rate and fits should not be trusted.
    pub flagged: bool,
    pub steps: usize,
    pub samples: usize,
    pub final_t: f64,
    pub final_l2: f64,
    pub oracle_rel_error: Option<f64>,
    pub comparison_max_excess: f64,
    pub hn_rho: Option<f64>,
    pub hn_error: Option<String>,
    pub lyapunov: LyapunovReport,
    pub rate_fit: Option<RateFit>,
    pub interval_fits: Vec<Option<RateFit>>,
    pub theta: Vec<LocalizedDecayReport>,
}

impl ModeSummary {
    fn new(outcome: &ModeOutcome) -> Self {
        ModeSummary {
            k: outcome.k,
            backend: format!("{:?}", outcome.backend),
            flagged: outcome.flagged,
            steps: outcome.steps,
            samples: outcome.trace.samples.len(),
            final_t: outcome.final_state.t,
            final_l2: outcome.trace.samples.last().map(|s| s.l2).unwrap_or(0.0),
            oracle_rel_error: outcome.oracle_rel_error,
            comparison_max_excess: outcome.comparison_max_excess,
            hn_rho: outcome.hn_rho,
            hn_error: outcome.hn_error.clone(),
            lyapunov: outcome.lyapunov.clone(),
            rate_fit: outcome.rate_fit,
            interval_fits: outcome.interval_fits.clone(),
            theta: outcome.theta_reports.clone(),
        }
    }
}

/// Versioned description of one finished run.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub config_hash: String,
    pub profile: String,
    pub sigma: f64,
    pub nu: f64,
    pub u_inf: f64,
    pub window_g: f64,
    pub admissibility: AdmissibilityReport,
    pub admissibility_overridden: bool,
    pub partition: Option<PartitionReport>,
    pub partition_error: Option<String>,
    pub modes: Vec<ModeSummary>,
    pub status: String,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n")?;
    Ok(())
}

/// `validate` subcommand: admissibility + partition reports, exit by pass.
pub fn cmd_validate(config: RunConfig, hash: String, out_dir: &Path) -> Result<RunStatus> {
    let prep = prepare(config, hash)?;
    fs::create_dir_all(out_dir)?;
    let partition = match &prep.localized {
        Some((part, _)) => Some(crate::partition::report(&prep.eq, part)?),
        None => None,
    };
    #[derive(Serialize)]
    struct ValidateOutput<'a> {
        schema_version: u32,
        config_hash: &'a str,
        report: &'a AdmissibilityReport,
        partition: Option<&'a PartitionReport>,
        partition_error: Option<&'a str>,
    }
    write_json(
        &out_dir.join("admissibility.json"),
        &ValidateOutput {
            schema_version: SCHEMA_VERSION,
            config_hash: &prep.hash,
            report: &prep.admissibility,
            partition: partition.as_ref(),
            partition_error: prep.partition_error.as_deref(),
        },
    )?;
    Ok(if prep.admissibility.overall {
        RunStatus::Success
    } else {
        RunStatus::AdmissibilityFailure
    })
}

/// `run` subcommand: march every configured mode, write traces, checkpoints,
/// the manifest, and optional SVG plots.
pub fn cmd_run(
    config: RunConfig,
    hash: String,
    out_dir: &Path,
    override_admissibility: bool,
) -> Result<RunStatus> {
    run_all(config, hash, out_dir, override_admissibility).map(|(status, _)| status)
}

/// Body shared by `run` and each sweep case.
pub fn run_all(
    config: RunConfig,
    hash: String,
    out_dir: &Path,
    override_admissibility: bool,
) -> Result<(RunStatus, Manifest)> {
    let prep = prepare(config, hash)?;
    fs::create_dir_all(out_dir)?;

    let mut manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        config_hash: prep.hash.clone(),
        profile: prep.eq.profile().kind_label().to_string(),
        sigma: prep.eq.sigma(),
        nu: prep.eq.nu(),
        u_inf: prep.eq.u_inf(),
        window_g: prep.eq.window_g(),
        admissibility: prep.admissibility.clone(),
        admissibility_overridden: false,
        partition: match &prep.localized {
            Some((part, _)) => Some(crate::partition::report(&prep.eq, part)?),
            None => None,
        },
        partition_error: prep.partition_error.clone(),
        modes: Vec::new(),
        status: RunStatus::Success.label().to_string(),
    };

    if !prep.admissibility.overall {
        if !override_admissibility {
            manifest.status = RunStatus::AdmissibilityFailure.label().to_string();
            write_json(&out_dir.join("manifest.json"), &manifest)?;
            return Ok((RunStatus::AdmissibilityFailure, manifest));
        }
        manifest.admissibility_overridden = true;
    }

    let w0 = build_initial(&prep.config.initial, &prep.grid)?;
    let mut status = RunStatus::Success;
    let mut ks = prep.config.modes.k.clone();
    ks.dedup();
    for &k in &ks {
        let outcome = run_mode(&prep, k, &w0)?;
        let mut csv = Vec::new();
        outcome.trace.write_csv(&mut csv)?;
        fs::write(out_dir.join(format!("trace_k{k}.csv")), csv)?;
        write_json(
            &out_dir.join(format!("checkpoint_k{k}.json")),
            &Checkpoint::from_state(&outcome.final_state),
        )?;
        if prep.config.output.svg {
            let svg = render_energy_svg(&outcome.trace);
            fs::write(out_dir.join(format!("energy_k{k}.svg")), svg)?;
        }
        if prep.config.checks.enforce_lyapunov && !outcome.lyapunov.passed_full {
            status = status.worst(RunStatus::NumericalFailure);
        }
        manifest.modes.push(ModeSummary::new(&outcome));
    }

    manifest.status = status.label().to_string();
    write_json(&out_dir.join("manifest.json"), &manifest)?;
    Ok((status, manifest))
}

/// `sweep` subcommand: the cross product of sweep.mu0 and sweep.k, one run
/// directory per case plus an aggregate rate table, merged in case order.
pub fn cmd_sweep(
    config: RunConfig,
    hash: String,
    out_dir: &Path,
    override_admissibility: bool,
) -> Result<RunStatus> {
    let sweep = config
        .sweep
        .clone()
        .ok_or_else(|| Error::Config("sweep subcommand needs a [sweep] table".into()))?;
    let mut cases = Vec::new();
    for &mu0 in &sweep.mu0 {
        for &k in &sweep.k {
            cases.push((cases.len(), mu0, k));
        }
    }
    fs::create_dir_all(out_dir)?;

    let results: Vec<Result<(RunStatus, Manifest)>> = cases
        .par_iter()
        .map(|&(idx, mu0, k)| {
            let mut case_config = config.clone();
            case_config.profile.mu0 = Some(mu0);
            case_config.modes.k = vec![k];
            case_config.sweep = None;
            run_all(
                case_config,
                hash.clone(),
                &out_dir.join(format!("case_{idx:03}")),
                override_admissibility,
            )
        })
        .collect();

    let mut status = RunStatus::Success;
    let mut table = String::from("case,mu0,k,rate,r_squared\n");
    for (&(idx, mu0, k), result) in cases.iter().zip(results) {
        let (case_status, manifest) = result?;
        status = status.worst(case_status);
        let fit = manifest.modes.first().and_then(|m| m.rate_fit);
        match fit {
            Some(f) => table.push_str(&format!(
                "{idx},{mu0:.12e},{k},{:.12e},{:.12e}\n",
                f.rate, f.r_squared
            )),
            None => table.push_str(&format!("{idx},{mu0:.12e},{k},,\n")),
        }
    }
    fs::write(out_dir.join("aggregate.csv"), table)?;
    Ok(status)
}

/// `multiplier-table` subcommand: m(t, k, xi) on a rectangular (t, xi) grid
/// for the configured equilibrium.
pub fn cmd_multiplier_table(
    config: RunConfig,
    hash: String,
    out_dir: &Path,
    k: i64,
    t_range: (f64, f64, usize),
    xi_range: (f64, f64, usize),
) -> Result<RunStatus> {
    let prep = prepare(config, hash)?;
    let table = Multiplier::new(prep.eq.nu(), prep.eq.u_inf())?;
    if k == 0 {
        return Err(Error::ZeroWavenumber);
    }
    if t_range.2 < 2 || xi_range.2 < 2 {
        return Err(Error::Config("ranges need at least 2 samples".into()));
    }
    fs::create_dir_all(out_dir)?;
    let mut out = String::from("t,xi,m\n");
    for i in 0..t_range.2 {
        let t = t_range.0
            + (t_range.1 - t_range.0) * i as f64 / (t_range.2 - 1) as f64;
        for j in 0..xi_range.2 {
            let xi = xi_range.0
                + (xi_range.1 - xi_range.0) * j as f64 / (xi_range.2 - 1) as f64;
            let m = table.value(t, k, xi)?;
            out.push_str(&format!("{t:.12e},{xi:.12e},{m:.12e}\n"));
        }
    }
    fs::write(out_dir.join("multiplier.csv"), out)?;
    Ok(RunStatus::Success)
}

/// `fit` subcommand: least-squares decay rate of one column of a trace CSV.
pub fn cmd_fit(csv_path: &Path, column: &str, window: (f64, f64)) -> Result<RateFit> {
    let text = fs::read_to_string(csv_path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Config("trace CSV is empty".into()))?;
    let names: Vec<&str> = header.split(',').collect();
    let t_col = names
        .iter()
        .position(|&n| n == "t")
        .ok_or_else(|| Error::Config("trace CSV has no t column".into()))?;
    let v_col = names.iter().position(|&n| n == column).ok_or_else(|| {
        Error::Config(format!(
            "trace CSV has no column \"{column}\" (columns: {})",
            names.join(" ")
        ))
    })?;
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let parse = |idx: usize| -> Result<f64> {
            fields
                .get(idx)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Config(format!("bad CSV field at row {}, col {idx}", i + 2)))
        };
        times.push(parse(t_col)?);
        values.push(parse(v_col)?);
    }
    fit_rate(&times, &values, window)
}

/// Minimal deterministic SVG: log10 of l2 and ea against time.
pub fn render_energy_svg(trace: &EnergyTrace) -> String {
    const W: f64 = 640.0;
    const H: f64 = 420.0;
    const ML: f64 = 60.0;
    const MR: f64 = 15.0;
    const MT: f64 = 15.0;
    const MB: f64 = 45.0;

    let points: Vec<(f64, f64, f64)> = trace
        .samples
        .iter()
        .filter(|s| s.l2 > 0.0 && s.ea > 0.0)
        .map(|s| (s.t, s.l2.log10(), s.ea.log10()))
        .collect();
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {W} {H}\" \
         font-family=\"monospace\" font-size=\"12\">\n\
         <rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n"
    ));
    if points.len() < 2 {
        svg.push_str("<text x=\"20\" y=\"40\">not enough positive samples</text>\n</svg>\n");
        return svg;
    }
    let (t0, t1) = (points[0].0, points[points.len() - 1].0);
    let mut lo = f64::MAX;
    let mut hi = f64::MIN;
    for &(_, a, b) in &points {
        lo = lo.min(a).min(b);
        hi = hi.max(a).max(b);
    }
    if hi - lo < 1e-12 {
        hi = lo + 1.0;
    }
    let x = |t: f64| ML + (W - ML - MR) * (t - t0) / (t1 - t0).max(1e-300);
    let y = |v: f64| H - MB - (H - MT - MB) * (v - lo) / (hi - lo);
    let polyline = |vals: &mut dyn Iterator<Item = (f64, f64)>, color: &str| {
        let pts: Vec<String> = vals
            .map(|(t, v)| format!("{:.2},{:.2}", x(t), y(v)))
            .collect();
        format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" \
             points=\"{}\"/>\n",
            pts.join(" ")
        )
    };
    svg.push_str(&format!(
        "<line x1=\"{ML}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"black\"/>\n\
         <line x1=\"{ML}\" y1=\"{MT}\" x2=\"{ML}\" y2=\"{:.2}\" stroke=\"black\"/>\n",
        H - MB,
        W - MR,
        H - MB,
        H - MB
    ));
    svg.push_str(&polyline(&mut points.iter().map(|&(t, a, _)| (t, a)), "#1f77b4"));
    svg.push_str(&polyline(&mut points.iter().map(|&(t, _, b)| (t, b)), "#d62728"));
    svg.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\">t</text>\n\
         <text x=\"8\" y=\"{:.2}\" transform=\"rotate(-90 8 {:.2})\">log10 energy</text>\n\
         <text x=\"{:.2}\" y=\"{MT}\" dy=\"12\" fill=\"#1f77b4\">l2</text>\n\
         <text x=\"{:.2}\" y=\"{MT}\" dy=\"26\" fill=\"#d62728\">ea</text>\n\
         <text x=\"{ML}\" y=\"{:.2}\" dy=\"30\" font-size=\"10\">t in [{t0:.3}, {t1:.3}], \
         log10 in [{lo:.3}, {hi:.3}]</text>\n",
        0.5 * (W + ML),
        H - 10.0,
        0.5 * H,
        0.5 * H,
        W - 80.0,
        W - 80.0,
        H - MB
    ));
    svg.push_str("</svg>\n");
    svg
}
