//! The five subcommands. Each one computes its outputs in memory first, so a
//! failure never leaves partial files behind.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use super::config::{ConfigError, RunConfig};
use super::output::{csv, num, Outputs, Report};
use crate::analysis::{analyze_entanglement, calibrate_dephasing, magnetization, phase_grid};
use crate::error::Error;
use crate::ising::{prepare_initial, run_adiabatic, run_adiabatic_to, spectrum_and_gap, IsingConfig, Orientation};
use crate::measurement::{fit_populations, simulate_shots};
use crate::phonon::{effective_coupling_analytic, run_closed_loop};
use crate::populations::Populations;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    Ramp,
    Parity,
    Phonon,
    Detect,
    Gap,
}

impl Subcommand {
    pub const ALL: [Subcommand; 5] =
        [Subcommand::Ramp, Subcommand::Parity, Subcommand::Phonon, Subcommand::Detect, Subcommand::Gap];

    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Ramp => "ramp",
            Subcommand::Parity => "parity",
            Subcommand::Phonon => "phonon",
            Subcommand::Detect => "detect",
            Subcommand::Gap => "gap",
        }
    }
}

impl fmt::Display for Subcommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Subcommand {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Subcommand::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown subcommand {s:?}"))
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(#[from] ConfigError),

    #[error("numerical failure: {0}")]
    Numerical(#[from] Error),

    #[error("cannot write outputs: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Numerical(_) | CliError::Io(_) => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    /// Signed J(T)/B_x at the end of this run.
    pub ratio: f64,
    pub populations: Populations,
    pub magnetization: f64,
    pub eigenstate_overlap: f64,
    pub non_adiabatic: bool,
}

/// Ramp fractions of J_max at which each sweep run stops.
pub fn sweep_fractions(cfg: &RunConfig) -> Vec<f64> {
    match &cfg.sweep.ratios {
        Some(list) => {
            let full = cfg.ising.j_max / cfg.ising.bx;
            list.iter().map(|r| r / full).collect()
        }
        None => (1..=cfg.sweep.points).map(|k| k as f64 / cfg.sweep.points as f64).collect(),
    }
}

fn clean(p: Populations) -> Populations {
    let [a, b, c] = p.as_array().map(|x| x.max(0.0));
    let s = a + b + c;
    Populations { p_dd: a / s, p_uu: b / s, p_mixed: c / s }
}

/// One independent evolution per sweep point, each stopped where the ramp
/// reaches that point's coupling.
pub fn ramp_sweep(cfg: &RunConfig) -> Result<Vec<SweepRow>, Error> {
    sweep_fractions(cfg)
        .par_iter()
        .map(|&f| {
            let t_stop = cfg.schedule.time_for_fraction(f)?;
            let run = run_adiabatic_to(&cfg.ising, &cfg.schedule, cfg.orientation, &cfg.integrator, t_stop)?;
            let cp = run.final_checkpoint();
            let populations = clean(cp.populations);
            Ok(SweepRow {
                ratio: cp.ratio,
                magnetization: magnetization(&populations)?,
                populations,
                eigenstate_overlap: cp.eigenstate_overlap,
                non_adiabatic: run.non_adiabatic,
            })
        })
        .collect()
}

fn ramp(cfg: &RunConfig) -> Result<Outputs, CliError> {
    let rows = ramp_sweep(cfg)?;
    let mut out = Outputs::default();
    if let Some(r) = rows.iter().find(|r| r.non_adiabatic) {
        out.warnings.push(format!(
            "eigenstate overlap fell below 0.9 (first at J/Bx = {:.4}); the ramp is not adiabatic",
            r.ratio
        ));
    }
    let body = rows.iter().map(|r| {
        vec![
            num(r.ratio),
            num(r.populations.p_dd),
            num(r.populations.p_uu),
            num(r.populations.p_mixed),
            num(r.magnetization),
            num(r.eigenstate_overlap),
        ]
    });
    out.add("ramp.csv", csv(&["ratio", "P_dd", "P_uu", "P_mixed", "magnetization", "eigenstate_overlap"], body));
    Ok(out)
}

fn require_two_spins(cfg: &RunConfig, what: &str) -> Result<(), CliError> {
    if cfg.ising.n_spins != 2 {
        return Err(ConfigError::Invalid(format!("{what} needs ising.n_spins = 2, got {}", cfg.ising.n_spins)).into());
    }
    Ok(())
}

fn parity(cfg: &RunConfig) -> Result<Outputs, CliError> {
    require_two_spins(cfg, "parity")?;
    let phis = phase_grid(cfg.parity.points);
    let branch = cfg.branch();
    let (gamma, report) = match cfg.parity.target_contrast {
        Some(target) => {
            let cal = calibrate_dephasing(&cfg.ising, &cfg.schedule, branch, &cfg.integrator, target, &phis)?;
            (cal.gamma, cal.report)
        }
        None => {
            let run = run_adiabatic(&cfg.ising, &cfg.schedule, cfg.orientation, &cfg.integrator)?;
            (cfg.ising.gamma_dephasing, analyze_entanglement(&run.final_state, branch, &phis)?)
        }
    };
    let mut out = Outputs::default();
    let body = report.scan.phi_values.iter().zip(&report.scan.parity_values).map(|(p, v)| vec![num(*p), num(*v)]);
    out.add("parity.csv", csv(&["phi_rad", "parity"], body));
    let mut text = Report::default();
    text.float("gamma_dephasing", gamma).raw(&report.to_report());
    out.add("parity_report.txt", text.finish());
    Ok(out)
}

fn phonon(cfg: &RunConfig) -> Result<Outputs, CliError> {
    let p = &cfg.phonon.params;
    let spin = prepare_initial(Orientation::PlusX, 2)?;
    let run = run_closed_loop(p, cfg.phonon.n_loops, &spin, cfg.phonon.dt)?;
    let analytic = effective_coupling_analytic(p)?;
    let numeric = run.zz_rate();
    let [h0, h1] = run.single_spin_rates();

    let mut out = Outputs::default();
    let body = run.trajectory.iter().map(|s| vec![num(s.time * 1e6), num(s.spin_purity), num(s.mean_phonon)]);
    out.add("phonon.csv", csv(&["time_us", "spin_purity", "mean_phonon"], body));
    let relative = if analytic.j_eff != 0.0 { (numeric - analytic.j_eff).abs() / analytic.j_eff.abs() } else { numeric.abs() };
    let mut text = Report::default();
    text.float("g_up_rad_s", p.g_up)
        .float("g_down_rad_s", p.g_down())
        .float("delta_rad_s", p.delta)
        .float("loop_duration_us", p.loop_duration() * 1e6)
        .int("n_loops", cfg.phonon.n_loops)
        .int("fock_levels", p.fock_levels)
        .float("J_eff_analytic_rad_s", analytic.j_eff)
        .float("J_eff_numeric_rad_s", numeric)
        .float("J_eff_relative_difference", relative)
        .float("single_spin_rate_0_analytic_rad_s", analytic.single_spin_rates[0])
        .float("single_spin_rate_1_analytic_rad_s", analytic.single_spin_rates[1])
        .float("single_spin_rate_0_numeric_rad_s", h0)
        .float("single_spin_rate_1_numeric_rad_s", h1)
        .float("enhancement", analytic.enhancement)
        .float("final_spin_purity", run.spin_purity)
        .float("final_mean_phonon", run.mean_phonon);
    out.add("phonon_report.txt", text.finish());
    Ok(out)
}

fn detect(cfg: &RunConfig) -> Result<Outputs, CliError> {
    let truth = match cfg.detect.populations {
        Some(p) => p,
        None => {
            require_two_spins(cfg, "detect without detect.p_* values")?;
            let run = run_adiabatic(&cfg.ising, &cfg.schedule, cfg.orientation, &cfg.integrator)?;
            clean(run.final_checkpoint().populations)
        }
    };
    let hist = simulate_shots(&truth, &cfg.detect.model, cfg.detect.n_shots, cfg.seed)?;
    let fit = fit_populations(&hist, &cfg.detect.model)?;

    let mut out = Outputs::default();
    out.add("histogram.csv", hist.to_csv());
    let mut text = Report::default();
    let est = fit.populations;
    text.float("P_dd", est.p_dd)
        .float("P_uu", est.p_uu)
        .float("P_mixed", est.p_mixed)
        .float("stderr_P_dd", fit.stderr[0])
        .float("stderr_P_uu", fit.stderr[1])
        .float("stderr_P_mixed", fit.stderr[2])
        .float("loglik", fit.loglik)
        .int("n_shots", fit.n_shots)
        .int("iterations", fit.iterations)
        .float("true_P_dd", truth.p_dd)
        .float("true_P_uu", truth.p_uu)
        .float("true_P_mixed", truth.p_mixed)
        .int("seed", cfg.seed);
    out.add("detect_report.txt", text.finish());
    Ok(out)
}

/// `(n_spins, gap)` over the configured range of chain lengths.
pub fn gap_table(cfg: &RunConfig) -> Result<Vec<(usize, f64)>, Error> {
    (cfg.gap.n_min..=cfg.gap.n_max)
        .into_par_iter()
        .map(|n| {
            let ising = IsingConfig { n_spins: n, ..cfg.ising.clone() };
            Ok((n, spectrum_and_gap(&ising, cfg.gap.j_over_bx)?.gap))
        })
        .collect()
}

/// Least-squares slope of `ln gap` against N.
pub fn log_gap_slope(table: &[(usize, f64)]) -> Option<f64> {
    if table.len() < 2 || table.iter().any(|(_, g)| *g <= 0.0) {
        return None;
    }
    let n = table.len() as f64;
    let mx = table.iter().map(|(k, _)| *k as f64).sum::<f64>() / n;
    let my = table.iter().map(|(_, g)| g.ln()).sum::<f64>() / n;
    let sxy: f64 = table.iter().map(|(k, g)| (*k as f64 - mx) * (g.ln() - my)).sum();
    let sxx: f64 = table.iter().map(|(k, _)| (*k as f64 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

fn gap(cfg: &RunConfig) -> Result<Outputs, CliError> {
    let table = gap_table(cfg)?;
    let mut out = Outputs::default();
    let body = table.iter().map(|(n, g)| vec![n.to_string(), num(*g)]);
    out.add("gap.csv", csv(&["n_spins", "gap_rad_s"], body));
    let mut text = Report::default();
    text.float("j_over_bx", cfg.gap.j_over_bx);
    if let Some(slope) = log_gap_slope(&table) {
        text.float("slope_ln_gap_per_spin", slope);
        if cfg.gap.j_over_bx != 0.0 {
            text.float("expected_slope", (1.0 / cfg.gap.j_over_bx.abs()).ln());
        }
    }
    out.add("gap_report.txt", text.finish());
    Ok(out)
}

/// Computes a subcommand's outputs without touching the filesystem.
pub fn build_outputs(sub: Subcommand, cfg: &RunConfig) -> Result<Outputs, CliError> {
    match sub {
        Subcommand::Ramp => ramp(cfg),
        Subcommand::Parity => parity(cfg),
        Subcommand::Phonon => phonon(cfg),
        Subcommand::Detect => detect(cfg),
        Subcommand::Gap => gap(cfg),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub written: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

pub fn run_command(sub: Subcommand, cfg: &RunConfig) -> Result<RunSummary, CliError> {
    let outputs = build_outputs(sub, cfg)?;
    let written = outputs.write_all(&cfg.out_dir)?;
    Ok(RunSummary { written, warnings: outputs.warnings })
}
