//! Magnetization, parity scans, contrast fits and the entanglement
//! fidelity bound.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::Write as _;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::ising::{
    rotate_state, run_adiabatic, Integrator, IsingConfig, Orientation, RampSchedule, RotationPulse,
};
use crate::populations::Populations;
use crate::quantum::{BasisShape, QuantumState, StateRef};

pub const DEFAULT_PHASE_POINTS: usize = 24;
/// rf phase of the analysis pulse at φ = 0. With this reference the
/// ferromagnetic cat state `(|↑↑⟩+|↓↓⟩)/√2` oscillates as `+cos 2φ`.
pub const ANALYSIS_PHASE_REFERENCE: f64 = FRAC_PI_2;

const MIN_PHASE_POINTS: usize = 8;
const PARITY_TOL: f64 = 1e-9;

pub fn magnetization(probs: &Populations) -> Result<f64> {
    probs.validate()?;
    Ok((probs.p_dd + probs.p_uu).clamp(0.0, 1.0))
}

/// `n` phases uniform over `[0, 2π)`.
pub fn phase_grid(n: usize) -> Vec<f64> {
    (0..n).map(|k| 2.0 * PI * k as f64 / n as f64).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParityScan {
    pub phi_values: Vec<f64>,
    pub parity_values: Vec<f64>,
}

impl ParityScan {
    pub fn new(phi_values: Vec<f64>, parity_values: Vec<f64>) -> Result<Self> {
        if phi_values.len() != parity_values.len() {
            return Err(Error::DimensionMismatch { expected: phi_values.len(), got: parity_values.len() });
        }
        if let Some(p) = parity_values.iter().find(|p| !(p.abs() <= 1.0 + PARITY_TOL)) {
            return Err(Error::OutOfRange(format!("parity {p} outside [-1, 1]")));
        }
        Ok(Self { phi_values, parity_values })
    }

    pub fn len(&self) -> usize {
        self.phi_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi_values.is_empty()
    }
}

fn require_two_spins(shape: BasisShape) -> Result<()> {
    if shape != BasisShape::spins(2) {
        return Err(Error::UnsupportedSize(format!(
            "parity needs exactly 2 spins without a Fock factor, got {} spins x {} levels",
            shape.n_spins, shape.fock_levels
        )));
    }
    Ok(())
}

/// Parity `P_↓↓ + P_↑↑ − P_↑↓ − P_↓↑` after an analysis π/2 pulse at each
/// phase, applied to both spins.
pub fn parity_scan<'a>(state: impl Into<StateRef<'a>>, phi_values: &[f64]) -> Result<ParityScan> {
    let state = state.into();
    require_two_spins(state.shape())?;
    let rho = QuantumState::Mixed(state.to_density());
    let mut parity = Vec::with_capacity(phi_values.len());
    for &phi in phi_values {
        let pulse = RotationPulse::new(FRAC_PI_2, phi + ANALYSIS_PHASE_REFERENCE);
        let p = rotate_state(&rho, pulse)?.spin_populations();
        parity.push(p[0] + p[3] - p[1] - p[2]);
    }
    ParityScan::new(phi_values.to_vec(), parity)
}

/// Least-squares fit of `A cos 2φ + B sin 2φ + offset`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContrastFit {
    /// `√(A²+B²)`, carrying the sign of `A` when `B` is not resolved from zero.
    pub contrast: f64,
    pub stderr: f64,
    pub cos_amplitude: f64,
    pub sin_amplitude: f64,
    pub offset: f64,
}

pub fn fit_contrast(scan: &ParityScan) -> Result<ContrastFit> {
    let n = scan.len();
    if n < MIN_PHASE_POINTS {
        return Err(Error::DegeneratePhaseGrid(format!("{n} points, need at least {MIN_PHASE_POINTS}")));
    }
    let (lo, hi) = scan
        .phi_values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &p| (lo.min(p), hi.max(p)));
    let span = (hi - lo) * n as f64 / (n - 1) as f64;
    if !(span >= PI - 1e-9) {
        return Err(Error::DegeneratePhaseGrid(format!("phases cover {span:.4} rad, need a full period of 2φ (π)")));
    }

    let mut xtx = Matrix3::<f64>::zeros();
    let mut xty = Vector3::<f64>::zeros();
    for (&phi, &y) in scan.phi_values.iter().zip(&scan.parity_values) {
        let row = Vector3::new((2.0 * phi).cos(), (2.0 * phi).sin(), 1.0);
        xtx += row * row.transpose();
        xty += row * y;
    }
    let inv = xtx
        .try_inverse()
        .filter(|m| m.iter().all(|x| x.is_finite()) && xtx.determinant().abs() > 1e-9 * (n as f64).powi(3))
        .ok_or_else(|| Error::DegeneratePhaseGrid("cos 2φ, sin 2φ and offset are not independent on this grid".into()))?;
    let beta = inv * xty;
    let (a, b, offset) = (beta[0], beta[1], beta[2]);

    let rss: f64 = scan
        .phi_values
        .iter()
        .zip(&scan.parity_values)
        .map(|(&phi, &y)| (y - a * (2.0 * phi).cos() - b * (2.0 * phi).sin() - offset).powi(2))
        .sum();
    let sigma2 = if n > 3 { rss / (n - 3) as f64 } else { 0.0 };
    let cov = inv * sigma2;
    let (var_a, var_b, cov_ab) = (cov[(0, 0)], cov[(1, 1)], cov[(0, 1)]);
    let stderr_b = var_b.max(0.0).sqrt();

    let magnitude = a.hypot(b);
    let contrast = if b.abs() < stderr_b.max(1e-9) { magnitude.copysign(a) } else { magnitude };
    let stderr = if magnitude > 0.0 {
        ((a * a * var_a + 2.0 * a * b * cov_ab + b * b * var_b) / (magnitude * magnitude)).max(0.0).sqrt()
    } else {
        var_a.max(var_b).max(0.0).sqrt()
    };
    Ok(ContrastFit { contrast, stderr, cos_amplitude: a, sin_amplitude: b, offset })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Ferro,
    Antiferro,
}

impl Branch {
    pub fn orientation(self) -> Orientation {
        match self {
            Branch::Ferro => Orientation::PlusX,
            Branch::Antiferro => Orientation::MinusX,
        }
    }

    /// Population of the two target configurations.
    pub fn population(self, probs: &Populations) -> f64 {
        match self {
            Branch::Ferro => probs.p_dd + probs.p_uu,
            Branch::Antiferro => probs.p_mixed,
        }
    }
}

/// `F ≥ P/2 + C/2`, with `P` the target-pair population and `C` the signed contrast.
pub fn fidelity_bound(population: f64, contrast: f64, _branch: Branch) -> Result<f64> {
    if !(0.0..=1.0).contains(&population) {
        return Err(Error::OutOfRange(format!("population {population} outside [0, 1]")));
    }
    if !(-1.0..=1.0).contains(&contrast) {
        return Err(Error::OutOfRange(format!("contrast {contrast} outside [-1, 1]")));
    }
    Ok((population + contrast) / 2.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntanglementReport {
    pub branch: Branch,
    pub population: f64,
    pub scan: ParityScan,
    pub fit: ContrastFit,
    pub fidelity: f64,
}

impl EntanglementReport {
    /// `key=value` lines.
    pub fn to_report(&self) -> String {
        let mut out = String::new();
        let branch = match self.branch {
            Branch::Ferro => "ferro",
            Branch::Antiferro => "antiferro",
        };
        let _ = writeln!(out, "branch={branch}");
        let _ = writeln!(out, "population={:.15e}", self.population);
        let _ = writeln!(out, "C={:.15e}", self.fit.contrast);
        let _ = writeln!(out, "stderr_C={:.15e}", self.fit.stderr);
        let _ = writeln!(out, "offset={:.15e}", self.fit.offset);
        let _ = writeln!(out, "F={:.15e}", self.fidelity);
        out
    }
}

/// Parity scan, contrast and fidelity bound for a final state. On the
/// antiferromagnetic branch a π/2 pulse at phase 0 first maps
/// `|↑↓⟩+|↓↑⟩` onto `|↑↑⟩+|↓↓⟩`.
pub fn analyze_entanglement(state: &QuantumState, branch: Branch, phi_values: &[f64]) -> Result<EntanglementReport> {
    require_two_spins(state.shape())?;
    let population = Branch::population(branch, &Populations::from_spin_populations(&state.spin_populations()));
    let population = population.clamp(0.0, 1.0);
    let analysed = match branch {
        Branch::Ferro => state.clone(),
        Branch::Antiferro => rotate_state(state, RotationPulse::new(FRAC_PI_2, 0.0))?,
    };
    let scan = parity_scan(&analysed, phi_values)?;
    let fit = fit_contrast(&scan)?;
    let fidelity = fidelity_bound(population, fit.contrast.clamp(-1.0, 1.0), branch)?;
    Ok(EntanglementReport { branch, population, scan, fit, fidelity })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DephasingCalibration {
    pub gamma: f64,
    pub report: EntanglementReport,
}

const CALIBRATION_TOL: f64 = 1e-3;
const CALIBRATION_MAX_GAMMA: f64 = 1e6;

/// Bisects the σ^z dephasing rate until the final-state contrast equals
/// `target_contrast` within 1e-3.
pub fn calibrate_dephasing(
    config: &IsingConfig,
    schedule: &RampSchedule,
    branch: Branch,
    integrator: &Integrator,
    target_contrast: f64,
    phi_values: &[f64],
) -> Result<DephasingCalibration> {
    let contrast_at = |gamma: f64| -> Result<EntanglementReport> {
        let cfg = IsingConfig { gamma_dephasing: gamma, ..config.clone() };
        let run = run_adiabatic(&cfg, schedule, branch.orientation(), integrator)?;
        analyze_entanglement(&run.final_state, branch, phi_values)
    };
    let ideal = contrast_at(0.0)?;
    if ideal.fit.contrast < target_contrast {
        return Err(Error::OutOfRange(format!(
            "ideal contrast {:.4} is already below the target {target_contrast}",
            ideal.fit.contrast
        )));
    }
    let mut lo = (0.0, ideal);
    let mut hi_gamma = 100.0;
    let mut hi = contrast_at(hi_gamma)?;
    while hi.fit.contrast > target_contrast {
        lo = (hi_gamma, hi);
        hi_gamma *= 2.0;
        if hi_gamma > CALIBRATION_MAX_GAMMA {
            return Err(Error::OutOfRange(format!("contrast {target_contrast} not reached below gamma = {CALIBRATION_MAX_GAMMA}")));
        }
        hi = contrast_at(hi_gamma)?;
    }
    let mut hi = (hi_gamma, hi);
    for _ in 0..60 {
        for (g, r) in [&lo, &hi] {
            if (r.fit.contrast - target_contrast).abs() < CALIBRATION_TOL {
                return Ok(DephasingCalibration { gamma: *g, report: r.clone() });
            }
        }
        let mid = 0.5 * (lo.0 + hi.0);
        let r = contrast_at(mid)?;
        if r.fit.contrast > target_contrast {
            lo = (mid, r);
        } else {
            hi = (mid, r);
        }
    }
    Err(Error::OutOfRange(format!("dephasing calibration to contrast {target_contrast} did not converge")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{CVector, DensityMatrix, StateVector};
    use num_complex::Complex64;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn two_spin(amps: [(f64, f64); 4]) -> StateVector {
        let v = CVector::from_iterator(4, amps.iter().map(|&(r, i)| Complex64::new(r, i)));
        StateVector::normalized(v, BasisShape::spins(2)).unwrap()
    }

    fn bell_plus() -> StateVector {
        two_spin([(1.0, 0.0), (0.0, 0.0), (0.0, 0.0), (1.0, 0.0)])
    }

    #[test]
    fn magnetization_values() {
        let m = magnetization(&Populations::new(0.49, 0.49, 0.02).unwrap()).unwrap();
        assert!((m - 0.98).abs() < 1e-12);
        assert_eq!(magnetization(&Populations::new(0.25, 0.25, 0.5).unwrap()).unwrap(), 0.5);
        assert!(magnetization(&Populations { p_dd: 0.6, p_uu: 0.6, p_mixed: 0.0 }).is_err());
    }

    #[test]
    fn bell_state_parity_is_cos_two_phi() {
        let phis = phase_grid(16);
        let scan = parity_scan(&bell_plus(), &phis).unwrap();
        for (phi, p) in phis.iter().zip(&scan.parity_values) {
            assert!((p - (2.0 * phi).cos()).abs() < 1e-12);
        }
        let fit = fit_contrast(&scan).unwrap();
        assert!((fit.contrast - 1.0).abs() < 1e-9);
    }

    #[test]
    fn pure_and_density_scans_agree() {
        let psi = two_spin([(0.3, 0.1), (0.2, -0.4), (0.0, 0.5), (0.6, 0.2)]);
        let phis = phase_grid(12);
        let a = parity_scan(&psi, &phis).unwrap();
        let b = parity_scan(&DensityMatrix::from_pure(&psi), &phis).unwrap();
        for (x, y) in a.parity_values.iter().zip(&b.parity_values) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn incoherent_mixture_has_no_contrast() {
        let rho = DensityMatrix::mixture(&[
            (0.5, StateVector::basis(BasisShape::spins(2), 0).unwrap()),
            (0.5, StateVector::basis(BasisShape::spins(2), 3).unwrap()),
        ])
        .unwrap();
        let fit = fit_contrast(&parity_scan(&rho, &phase_grid(24)).unwrap()).unwrap();
        assert!(fit.contrast.abs() < 1e-9);
    }

    #[test]
    fn wrong_size_rejected() {
        let psi = StateVector::basis(BasisShape::spins(3), 0).unwrap();
        assert!(matches!(parity_scan(&psi, &[0.0]), Err(Error::UnsupportedSize(_))));
    }

    #[test]
    fn synthetic_cosine_fit() {
        let phis = phase_grid(16);
        let ys: Vec<f64> = phis.iter().map(|p| 0.78 * (2.0 * p).cos()).collect();
        let fit = fit_contrast(&ParityScan::new(phis, ys).unwrap()).unwrap();
        assert!((fit.contrast - 0.78).abs() < 1e-6);
        assert!(fit.offset.abs() < 1e-12);
    }

    #[test]
    fn constant_scan_has_zero_contrast() {
        let phis = phase_grid(16);
        let fit = fit_contrast(&ParityScan::new(phis, vec![0.3; 16]).unwrap()).unwrap();
        assert!(fit.contrast.abs() <= fit.stderr + 1e-12);
        assert!((fit.offset - 0.3).abs() < 1e-12);
    }

    #[test]
    fn degenerate_grids_rejected() {
        let short = phase_grid(7);
        assert!(matches!(
            fit_contrast(&ParityScan::new(short, vec![0.0; 7]).unwrap()),
            Err(Error::DegeneratePhaseGrid(_))
        ));
        let narrow: Vec<f64> = (0..10).map(|k| 0.1 * k as f64).collect();
        assert!(fit_contrast(&ParityScan::new(narrow, vec![0.0; 10]).unwrap()).is_err());
        let repeated: Vec<f64> = (0..10).map(|k| if k % 2 == 0 { 0.0 } else { PI }).collect();
        assert!(fit_contrast(&ParityScan::new(repeated, vec![0.0; 10]).unwrap()).is_err());
    }

    #[test]
    fn fidelity_bound_values() {
        let f = fidelity_bound(0.98, 0.78, Branch::Ferro).unwrap();
        assert!((f - 0.88).abs() < 1e-12);
        assert_eq!(fidelity_bound(1.0, 1.0, Branch::Ferro).unwrap(), 1.0);
        let af = fidelity_bound(0.95, 0.65, Branch::Antiferro).unwrap();
        assert!((af - 0.80).abs() < 1e-12);
        assert!(fidelity_bound(1.2, 0.5, Branch::Ferro).is_err());
        assert!(fidelity_bound(0.5, 1.5, Branch::Ferro).is_err());
    }

    #[test]
    fn antiferro_mapping_matches_bell() {
        let psi_plus = two_spin([(0.0, 0.0), (1.0, 0.0), (1.0, 0.0), (0.0, 0.0)]);
        let phis = phase_grid(24);
        let af = analyze_entanglement(&QuantumState::Pure(psi_plus), Branch::Antiferro, &phis).unwrap();
        let fe = analyze_entanglement(&QuantumState::Pure(bell_plus()), Branch::Ferro, &phis).unwrap();
        assert!((af.fit.contrast - fe.fit.contrast).abs() < 1e-9);
        assert!((af.fidelity - 1.0).abs() < 1e-9);
        assert!((af.population - 1.0).abs() < 1e-12);
    }

    #[test]
    fn report_lines() {
        let phis = phase_grid(24);
        let r = analyze_entanglement(&QuantumState::Pure(bell_plus()), Branch::Ferro, &phis).unwrap();
        let text = r.to_report();
        let keys: Vec<&str> = text.lines().map(|l| l.split('=').next().unwrap()).collect();
        assert_eq!(keys, ["branch", "population", "C", "stderr_C", "offset", "F"]);
    }

    #[test]
    fn minus_one_phase_product_state() {
        let s = FRAC_1_SQRT_2;
        let psi = two_spin([(s, 0.0), (0.0, 0.0), (0.0, 0.0), (-s, 0.0)]);
        let fit = fit_contrast(&parity_scan(&psi, &phase_grid(24)).unwrap()).unwrap();
        assert!((fit.contrast + 1.0).abs() < 1e-9);
    }
}
