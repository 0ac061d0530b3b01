//! Time-dependent transverse-field Ising model, the ramp J(t), rf rotation
//! pulses, and the adiabatic run from the paramagnet into (anti-)ferromagnetic order.
//!
//! The simulated Hamiltonian is
//! `H(t) = s·B_x Σ σ^x_i + f(t)·J_max Σ_bonds σ^z_i σ^z_j + B_z Σ σ^z_i`
//! with `s = ±1` the field sign and `f` the normalised ramp.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{DMatrix, Matrix2, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::populations::Populations;
use crate::quantum::{
    build_many_body_operator, evolve, evolve_density, hermitian_eigen, Axis, BasisShape, CMatrix,
    OperatorTerm, QuantumState, StateRef, StateVector,
};

/// `2π × 4.24 kHz`.
pub const DEFAULT_BX: f64 = 2.0 * PI * 4.24e3;
/// |J_max| / B_x reached at the end of the ramp.
pub const DEFAULT_J_OVER_BX: f64 = 5.2;

const CONVERGENCE_LIMIT: f64 = 1e-7;
const ADIABATIC_WARNING: f64 = 0.9;
const MAX_SPECTRUM_SPINS: usize = 10;
const MAX_DENSITY_SPINS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coupling {
    NearestNeighbour,
    AllPairs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldSign {
    Positive,
    Negative,
}

impl FieldSign {
    pub fn value(self) -> f64 {
        match self {
            FieldSign::Positive => 1.0,
            FieldSign::Negative => -1.0,
        }
    }
}

/// Physical parameters, all in rad/s except the dephasing rate (1/s).
///
/// `j_max < 0` is ferromagnetic. With the default negative field sign the
/// `|→…→⟩` state is the ground state of the field term.
#[derive(Debug, Clone, PartialEq)]
pub struct IsingConfig {
    pub n_spins: usize,
    pub bx: f64,
    pub j_max: f64,
    pub bz_bias: f64,
    pub coupling: Coupling,
    pub gamma_dephasing: f64,
    pub field_sign: FieldSign,
}

impl Default for IsingConfig {
    fn default() -> Self {
        Self {
            n_spins: 2,
            bx: DEFAULT_BX,
            j_max: -DEFAULT_J_OVER_BX * DEFAULT_BX,
            bz_bias: 0.0,
            coupling: Coupling::NearestNeighbour,
            gamma_dephasing: 0.0,
            field_sign: FieldSign::Negative,
        }
    }
}

impl IsingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_spins < 2 {
            return Err(Error::InvalidParameter(format!("n_spins must be >= 2, got {}", self.n_spins)));
        }
        for (name, v) in [("B_x", self.bx), ("J_max", self.j_max), ("B_z", self.bz_bias)] {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} is not finite")));
            }
        }
        if self.bx < 0.0 {
            return Err(Error::InvalidParameter("B_x must be non-negative".into()));
        }
        if !(self.gamma_dephasing >= 0.0) || !self.gamma_dephasing.is_finite() {
            return Err(Error::NegativeRate(self.gamma_dephasing));
        }
        Ok(())
    }

    pub fn shape(&self) -> BasisShape {
        BasisShape::spins(self.n_spins)
    }

    pub fn bonds(&self) -> Vec<(usize, usize)> {
        let n = self.n_spins;
        match self.coupling {
            Coupling::NearestNeighbour => (0..n.saturating_sub(1)).map(|i| (i, i + 1)).collect(),
            Coupling::AllPairs => (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect(),
        }
    }

    /// Field plus bias part, independent of time.
    fn static_terms(&self) -> Result<CMatrix> {
        let mut terms = Vec::with_capacity(2 * self.n_spins);
        for i in 0..self.n_spins {
            terms.push(OperatorTerm::single(self.field_sign.value() * self.bx, i, Axis::X));
            terms.push(OperatorTerm::single(self.bz_bias, i, Axis::Z));
        }
        build_many_body_operator(&terms, self.n_spins, 1)
    }

    /// `Σ_bonds σ^z σ^z` with unit coupling.
    fn coupling_operator(&self) -> Result<CMatrix> {
        let terms: Vec<OperatorTerm> =
            self.bonds().into_iter().map(|(i, j)| OperatorTerm::pair(1.0, i, j, Axis::Z)).collect();
        build_many_body_operator(&terms, self.n_spins, 1)
    }

    /// Static Hamiltonian with coupling `j` (rad/s) on every bond.
    pub fn hamiltonian(&self, j: f64) -> Result<CMatrix> {
        self.validate()?;
        Ok(self.static_terms()? + self.coupling_operator()? * Complex64::new(j, 0.0))
    }
}

/// Ramp profile: linear from 0 to `linear_end_fraction` on `[0, t_linear_end]`,
/// then `c·(e^{α t} − β)²` with t in µs, normalised to 1 at `t_total`.
#[derive(Debug, Clone, PartialEq)]
pub struct RampSchedule {
    /// Seconds.
    pub t_total: f64,
    /// Seconds.
    pub t_linear_end: f64,
    pub linear_end_fraction: f64,
    /// Per microsecond.
    pub alpha: f64,
    pub beta: f64,
    pub n_steps: usize,
}

impl Default for RampSchedule {
    fn default() -> Self {
        Self {
            t_total: 125e-6,
            t_linear_end: 50e-6,
            linear_end_fraction: 5e-4,
            alpha: 0.026,
            beta: 4.0,
            n_steps: 50,
        }
    }
}

impl RampSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_total > 0.0) || !self.t_total.is_finite() {
            return Err(Error::InvalidParameter("ramp t_total must be positive".into()));
        }
        if !(self.t_linear_end >= 0.0 && self.t_linear_end <= self.t_total) {
            return Err(Error::InvalidParameter("ramp t_linear_end must lie in [0, t_total]".into()));
        }
        if !(0.0..=1.0).contains(&self.linear_end_fraction) {
            return Err(Error::InvalidParameter("ramp linear_end_fraction must lie in [0, 1]".into()));
        }
        if self.n_steps == 0 {
            return Err(Error::InvalidParameter("ramp n_steps must be >= 1".into()));
        }
        if !self.alpha.is_finite() || !self.beta.is_finite() || self.exp_arm(self.t_total) == 0.0 {
            return Err(Error::InvalidParameter("ramp exponential cannot be normalised".into()));
        }
        Ok(())
    }

    fn exp_arm(&self, t: f64) -> f64 {
        let x = (self.alpha * t * 1e6).exp() - self.beta;
        x * x
    }

    /// Fraction of J_max at time `t` (seconds).
    pub fn value(&self, t: f64) -> Result<f64> {
        self.validate()?;
        if !(0.0..=self.t_total).contains(&t) {
            return Err(Error::TimeOutOfRange { t, t_total: self.t_total });
        }
        Ok(self.fraction_unchecked(t))
    }

    fn fraction_unchecked(&self, t: f64) -> f64 {
        if t <= self.t_linear_end {
            if self.t_linear_end == 0.0 {
                return 0.0;
            }
            self.linear_end_fraction * t / self.t_linear_end
        } else {
            self.exp_arm(t) / self.exp_arm(self.t_total)
        }
    }

    /// Earliest time on the rising branch at which the ramp reaches `fraction`.
    pub fn time_for_fraction(&self, fraction: f64) -> Result<f64> {
        self.validate()?;
        if !(0.0..=1.0).contains(&fraction) {
            return Err(Error::OutOfRange(format!("ramp fraction {fraction} outside [0, 1]")));
        }
        if fraction == 1.0 {
            return Ok(self.t_total);
        }
        if fraction <= self.linear_end_fraction && self.linear_end_fraction > 0.0 {
            return Ok(self.t_linear_end * fraction / self.linear_end_fraction);
        }
        let arm = (fraction * self.exp_arm(self.t_total)).sqrt();
        let t = (self.beta + arm).ln() / self.alpha * 1e-6;
        if !(t >= self.t_linear_end) || !t.is_finite() {
            return Err(Error::OutOfRange(format!("ramp never reaches fraction {fraction}")));
        }
        Ok(t.min(self.t_total))
    }

    /// Same shape over `factor` times the duration.
    pub fn stretched(&self, factor: f64) -> Self {
        Self {
            t_total: self.t_total * factor,
            t_linear_end: self.t_linear_end * factor,
            alpha: self.alpha / factor,
            ..self.clone()
        }
    }

    /// `k·T/n_steps` for `k = 1..=n_steps`.
    pub fn checkpoints(&self) -> Vec<f64> {
        (1..=self.n_steps)
            .map(|k| self.t_total * k as f64 / self.n_steps as f64)
            .collect()
    }
}

/// rf rotation `R(Θ, φ) = cos(Θ/2) I − i sin(Θ/2)(cos φ σ^x + sin φ σ^y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationPulse {
    pub theta: f64,
    pub phi: f64,
}

impl RotationPulse {
    pub fn new(theta: f64, phi: f64) -> Self {
        Self { theta, phi }
    }

    /// Pulse produced by a field `bx` (rad/s) applied for `duration`: Θ/2 = B_x t.
    pub fn from_duration(bx: f64, duration: f64, phi: f64) -> Self {
        Self::new(2.0 * bx * duration, phi)
    }

    /// Time for a field `bx` to rotate by `theta`.
    pub fn duration_for(bx: f64, theta: f64) -> f64 {
        theta / (2.0 * bx)
    }

    pub fn matrix(&self) -> Matrix2<Complex64> {
        let (s, c) = (0.5 * self.theta).sin_cos();
        let diag = Complex64::new(c, 0.0);
        let off = Complex64::new(0.0, -s) * Complex64::from_polar(1.0, -self.phi);
        let off_conj = Complex64::new(0.0, -s) * Complex64::from_polar(1.0, self.phi);
        // row/col order (↑, ↓): σ^x cos φ + σ^y sin φ = [[0, e^{-iφ}], [e^{iφ}, 0]]
        Matrix2::new(diag, off, off_conj, diag)
    }
}

/// Applies the same pulse to every spin.
pub fn rotate(state: &StateVector, pulse: RotationPulse) -> Result<StateVector> {
    let u = pulse.matrix();
    (0..state.shape().n_spins).try_fold(state.clone(), |acc, site| acc.apply_local(site, &u))
}

/// [`rotate`] for pure or mixed states.
pub fn rotate_state(state: &QuantumState, pulse: RotationPulse) -> Result<QuantumState> {
    let u = pulse.matrix();
    (0..state.shape().n_spins).try_fold(state.clone(), |acc, site| acc.apply_local(site, &u))
}

/// Paramagnetic starting orientation along ±x.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    PlusX,
    MinusX,
}

impl Orientation {
    pub fn preparation_pulse(self) -> RotationPulse {
        match self {
            Orientation::PlusX => RotationPulse::new(FRAC_PI_2, -FRAC_PI_2),
            Orientation::MinusX => RotationPulse::new(FRAC_PI_2, FRAC_PI_2),
        }
    }
}

/// `|↓…↓⟩` rotated by `R(π/2, ∓π/2)`.
pub fn prepare_initial(orientation: Orientation, n_spins: usize) -> Result<StateVector> {
    let shape = BasisShape::new(n_spins, 1)?;
    let all_down = StateVector::basis(shape, shape.spin_dim() - 1)?;
    rotate(&all_down, orientation.preparation_pulse())
}

/// Step control for [`run_adiabatic`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integrator {
    /// Seconds.
    pub dt: f64,
    /// Re-run at `dt/2` and fail if the final state moves by more than 1e-7.
    pub self_check: bool,
}

impl Default for Integrator {
    fn default() -> Self {
        Self { dt: 10e-9, self_check: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub time: f64,
    /// Signed J(t)/B_x.
    pub ratio: f64,
    pub populations: Populations,
    /// Weight on the instantaneous eigenstate (or degenerate eigenspace)
    /// that the initial state occupies at t = 0, tracked by energy rank.
    pub eigenstate_overlap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdiabaticRun {
    pub checkpoints: Vec<Checkpoint>,
    pub final_state: QuantumState,
    /// Final eigenstate overlap fell below 0.9.
    pub non_adiabatic: bool,
    /// Final-state change when dt was halved, if the self-check ran.
    pub convergence_change: Option<f64>,
}

impl AdiabaticRun {
    pub fn final_checkpoint(&self) -> &Checkpoint {
        self.checkpoints.last().expect("runs always record at least one checkpoint")
    }
}

struct RampHamiltonian {
    fixed: CMatrix,
    coupling: CMatrix,
    j_max: f64,
    schedule: RampSchedule,
}

impl RampHamiltonian {
    fn new(config: &IsingConfig, schedule: &RampSchedule) -> Result<Self> {
        Ok(Self {
            fixed: config.static_terms()?,
            coupling: config.coupling_operator()?,
            j_max: config.j_max,
            schedule: schedule.clone(),
        })
    }

    fn coupling_at(&self, t: f64) -> f64 {
        self.schedule.fraction_unchecked(t.clamp(0.0, self.schedule.t_total)) * self.j_max
    }

    fn at(&self, t: f64) -> CMatrix {
        &self.fixed + &self.coupling * Complex64::new(self.coupling_at(t), 0.0)
    }
}

/// Projection of `state` onto the eigenspace of `h` at energy rank `rank`.
fn eigenspace_weight(h: &CMatrix, state: StateRef<'_>, rank: usize) -> f64 {
    let (values, vectors) = hermitian_eigen(h);
    let scale = values.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    let target = values[rank];
    let rho = state.to_density();
    values
        .iter()
        .enumerate()
        .filter(|(_, v)| (*v - target).abs() <= 1e-9 * scale)
        .map(|(k, _)| {
            let v = vectors.column(k);
            (v.adjoint() * rho.entries() * v)[(0, 0)].re
        })
        .sum()
}

fn followed_rank(h: &CMatrix, state: &StateVector) -> usize {
    let (_, vectors) = hermitian_eigen(h);
    (0..vectors.ncols())
        .map(|k| (k, vectors.column(k).dotc(state.amplitudes()).norm_sqr()))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(k, _)| k)
        .unwrap_or(0)
}

fn propagate(
    config: &IsingConfig,
    ham: &RampHamiltonian,
    initial: &StateVector,
    dt: f64,
    stops: &[f64],
) -> Result<Vec<QuantumState>> {
    let mut out = Vec::with_capacity(stops.len());
    let mut t = 0.0;
    let mut current = if config.gamma_dephasing > 0.0 {
        QuantumState::Mixed(initial.to_density())
    } else {
        QuantumState::Pure(initial.clone())
    };
    for &stop in stops {
        current = match current {
            QuantumState::Pure(psi) => QuantumState::Pure(evolve(&psi, |s| ham.at(s), t, stop, dt)?),
            QuantumState::Mixed(rho) => QuantumState::Mixed(evolve_density(
                &rho,
                |s| ham.at(s),
                t,
                stop,
                dt,
                config.gamma_dephasing,
            )?),
        };
        out.push(current.clone());
        t = stop;
    }
    Ok(out)
}

/// Adiabatic ramp with populations recorded at every schedule checkpoint.
pub fn run_adiabatic(
    config: &IsingConfig,
    schedule: &RampSchedule,
    orientation: Orientation,
    integrator: &Integrator,
) -> Result<AdiabaticRun> {
    schedule.validate()?;
    run_with_stops(config, schedule, orientation, integrator, &schedule.checkpoints())
}

/// Adiabatic ramp terminated at `t_stop`, recording only the final state.
pub fn run_adiabatic_to(
    config: &IsingConfig,
    schedule: &RampSchedule,
    orientation: Orientation,
    integrator: &Integrator,
    t_stop: f64,
) -> Result<AdiabaticRun> {
    schedule.validate()?;
    if !(t_stop > 0.0 && t_stop <= schedule.t_total) {
        return Err(Error::TimeOutOfRange { t: t_stop, t_total: schedule.t_total });
    }
    run_with_stops(config, schedule, orientation, integrator, &[t_stop])
}

fn run_with_stops(
    config: &IsingConfig,
    schedule: &RampSchedule,
    orientation: Orientation,
    integrator: &Integrator,
    stops: &[f64],
) -> Result<AdiabaticRun> {
    config.validate()?;
    if !(config.bx > 0.0) {
        return Err(Error::InvalidParameter("B_x must be positive for an adiabatic run".into()));
    }
    if config.gamma_dephasing > 0.0 && config.n_spins > MAX_DENSITY_SPINS {
        return Err(Error::UnsupportedSize(format!(
            "dephasing needs the density-matrix path, limited to {MAX_DENSITY_SPINS} spins (got {})",
            config.n_spins
        )));
    }
    let ham = RampHamiltonian::new(config, schedule)?;
    let initial = prepare_initial(orientation, config.n_spins)?;
    let states = propagate(config, &ham, &initial, integrator.dt, stops)?;

    let convergence_change = if integrator.self_check {
        let fine = propagate(config, &ham, &initial, 0.5 * integrator.dt, &stops[stops.len() - 1..])?;
        let change = states[states.len() - 1].distance(&fine[0]);
        if change > CONVERGENCE_LIMIT {
            return Err(Error::NotConverged { change, limit: CONVERGENCE_LIMIT });
        }
        Some(change)
    } else {
        None
    };

    let rank = followed_rank(&ham.at(0.0), &initial);
    let checkpoints: Vec<Checkpoint> = stops
        .iter()
        .zip(&states)
        .map(|(&time, state)| Checkpoint {
            time,
            ratio: ham.coupling_at(time) / config.bx,
            populations: Populations::from_spin_populations(&state.spin_populations()),
            eigenstate_overlap: eigenspace_weight(&ham.at(time), state.as_ref(), rank),
        })
        .collect();
    let non_adiabatic = checkpoints.last().is_some_and(|c| c.eigenstate_overlap < ADIABATIC_WARNING);
    Ok(AdiabaticRun {
        checkpoints,
        final_state: states.into_iter().last().expect("at least one stop"),
        non_adiabatic,
        convergence_change,
    })
}

/// Exact spectrum of the static Hamiltonian.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Column k belongs to `eigenvalues[k]`.
    pub eigenvectors: CMatrix,
    /// Splitting of the two lowest levels: for |J| ≫ B_x the tunnelling
    /// splitting between the all-up and all-down configurations.
    pub gap: f64,
}

/// Spectrum at coupling `j` (rad/s).
pub fn spectrum_with_coupling(config: &IsingConfig, j: f64) -> Result<Spectrum> {
    if config.n_spins > MAX_SPECTRUM_SPINS {
        return Err(Error::UnsupportedSize(format!(
            "exact diagonalisation limited to {MAX_SPECTRUM_SPINS} spins (got {})",
            config.n_spins
        )));
    }
    let h = config.hamiltonian(j)?;
    let (eigenvalues, eigenvectors) = if h.iter().all(|z| z.im == 0.0) {
        let real = DMatrix::from_fn(h.nrows(), h.ncols(), |r, c| h[(r, c)].re);
        let eig = SymmetricEigen::new(real);
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let vectors = CMatrix::from_fn(h.nrows(), h.ncols(), |r, c| {
            Complex64::new(eig.eigenvectors[(r, order[c])], 0.0)
        });
        (values, vectors)
    } else {
        hermitian_eigen(&h)
    };
    let gap = eigenvalues[1] - eigenvalues[0];
    Ok(Spectrum { eigenvalues, eigenvectors, gap })
}

/// Spectrum at `J = j_over_bx · B_x`.
pub fn spectrum_and_gap(config: &IsingConfig, j_over_bx: f64) -> Result<Spectrum> {
    spectrum_with_coupling(config, j_over_bx * config.bx)
}
