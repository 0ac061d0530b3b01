//! Walking-wave state-dependent force on two spins coupled to the stretch mode.
//!
//! In the frame rotating at the mode frequency the drive is
//! `H(t) = Σ_i ĝ_i (a e^{iδt} + a† e^{−iδt})`, with `ĝ_i` diagonal in the
//! σ^z basis of ion i: `b_i g_up` on `|↑⟩` and `b_i g_down` on `|↓⟩`.
//! Each spin configuration traces a closed loop in phase space every
//! `2π/|δ|` and picks up a phase quadratic in its net force.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quantum::{evolve_observed, partial_trace, BasisShape, CMatrix, Keep, StateVector};

pub const DEFAULT_OMEGA_STRETCH: f64 = 2.0 * PI * 3.7e6;
pub const OMEGA_COM: f64 = 2.0 * PI * 2.1e6;
pub const DEFAULT_DELTA: f64 = -2.0 * PI * 250e3;
/// Reachable coupling used to calibrate `g_up`.
pub const DEFAULT_TARGET_J: f64 = 2.0 * PI * 22.1e3;
/// `F_↓ / F_↑`.
pub const FORCE_RATIO: f64 = -1.5;

const MIN_FOCK_LEVELS: usize = 8;
const OVERFLOW_LIMIT: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct WalkingWaveParams {
    pub omega_stretch: f64,
    /// Drive frequency is `omega_stretch + delta`.
    pub delta: f64,
    /// Spin-↑ coupling strength (rad/s), Lamb-Dicke factor included.
    pub g_up: f64,
    pub force_ratio: f64,
    /// Stretch-mode participation of each ion.
    pub mode_amplitudes: [f64; 2],
    pub fock_levels: usize,
    pub lamb_dicke: f64,
}

impl Default for WalkingWaveParams {
    fn default() -> Self {
        let base = Self {
            omega_stretch: DEFAULT_OMEGA_STRETCH,
            delta: DEFAULT_DELTA,
            g_up: 0.0,
            force_ratio: FORCE_RATIO,
            mode_amplitudes: [FRAC_1_SQRT_2, -FRAC_1_SQRT_2],
            fock_levels: 12,
            lamb_dicke: 0.1,
        };
        let g_up = base.g_up_for(DEFAULT_TARGET_J);
        Self { g_up, ..base }
    }
}

impl WalkingWaveParams {
    pub fn validate(&self) -> Result<()> {
        if self.fock_levels < MIN_FOCK_LEVELS {
            return Err(Error::InvalidParameter(format!(
                "fock_levels must be >= {MIN_FOCK_LEVELS}, got {}",
                self.fock_levels
            )));
        }
        if self.delta == 0.0 {
            return Err(Error::ZeroDetuning);
        }
        if !(self.delta.abs() < self.omega_stretch) {
            return Err(Error::InvalidParameter("|delta| must be below omega_stretch".into()));
        }
        if self.force_ratio != FORCE_RATIO {
            return Err(Error::InvalidParameter(format!(
                "force ratio is fixed at {FORCE_RATIO}, got {}",
                self.force_ratio
            )));
        }
        if !self.g_up.is_finite() || self.mode_amplitudes.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidParameter("non-finite coupling".into()));
        }
        Ok(())
    }

    pub fn g_down(&self) -> f64 {
        self.force_ratio * self.g_up
    }

    /// Sets `g_up = lamb_dicke × force` (force amplitude in rad/s).
    pub fn with_force(self, force: f64) -> Self {
        Self { g_up: self.lamb_dicke * force, ..self }
    }

    /// `g_up` whose σ^zσ^z coupling has magnitude `target_j`.
    pub fn g_up_for(&self, target_j: f64) -> f64 {
        let [b1, b2] = self.mode_amplitudes;
        let half_diff = (target_j.abs() * self.delta.abs() / (2.0 * (b1 * b2).abs())).sqrt();
        2.0 * half_diff / (1.0 - self.force_ratio)
    }

    pub fn calibrated(self, target_j: f64) -> Self {
        let g_up = self.g_up_for(target_j);
        Self { g_up, ..self }
    }

    /// One phase-space loop, `2π/|δ|`.
    pub fn loop_duration(&self) -> f64 {
        2.0 * PI / self.delta.abs()
    }

    pub fn shape(&self) -> BasisShape {
        BasisShape { n_spins: 2, fock_levels: self.fock_levels }
    }

    /// Net force on a spin configuration (bit 0 = ↑, spin 0 most significant).
    fn config_force(&self, config: usize) -> f64 {
        (0..2)
            .map(|site| {
                let b = self.mode_amplitudes[site];
                let up = (config >> (1 - site)) & 1 == 0;
                b * if up { self.g_up } else { self.g_down() }
            })
            .sum()
    }

    fn hamiltonian_unchecked(&self, t: f64) -> CMatrix {
        let f_levels = self.fock_levels;
        let dim = 4 * f_levels;
        let mut h = CMatrix::zeros(dim, dim);
        let drive = Complex64::from_polar(1.0, self.delta * t);
        for config in 0..4 {
            let force = self.config_force(config);
            let base = config * f_levels;
            for n in 1..f_levels {
                let amp = drive * (force * (n as f64).sqrt());
                // a e^{iδt}: |n−1⟩⟨n|
                h[(base + n - 1, base + n)] = amp;
                h[(base + n, base + n - 1)] = amp.conj();
            }
        }
        h
    }
}

pub fn build_walking_wave_hamiltonian(params: &WalkingWaveParams, t: f64) -> Result<CMatrix> {
    params.validate()?;
    Ok(params.hamiltonian_unchecked(t))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopSample {
    pub time: f64,
    pub spin_purity: f64,
    pub mean_phonon: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoop {
    pub final_state: StateVector,
    pub duration: f64,
    pub spin_purity: f64,
    pub mean_phonon: f64,
    /// Accumulated energy phase `E(s)·t` of each configuration relative to
    /// ↑↑, ordered ↑↑, ↑↓, ↓↑, ↓↓.
    pub phases: [f64; 4],
    /// Starts at t = 0, one sample per integrator step.
    pub trajectory: Vec<LoopSample>,
}

impl ClosedLoop {
    /// σ^zσ^z coefficient implied by the phases.
    pub fn zz_rate(&self) -> f64 {
        let [uu, ud, du, dd] = self.phases;
        (uu + dd - ud - du) / (4.0 * self.duration)
    }

    /// σ^z coefficients of ion 0 and ion 1 implied by the phases.
    pub fn single_spin_rates(&self) -> [f64; 2] {
        let [uu, ud, du, dd] = self.phases;
        [
            (uu + ud - du - dd) / (4.0 * self.duration),
            (uu + du - ud - dd) / (4.0 * self.duration),
        ]
    }
}

fn top_population(psi: &StateVector) -> f64 {
    let fock = psi.fock_populations();
    fock.iter().rev().take(2).sum()
}

fn overflow_guard(psi: &StateVector, fock_levels: usize) -> Result<()> {
    let population = top_population(psi);
    if population > OVERFLOW_LIMIT {
        return Err(Error::FockOverflow { population, fock_levels });
    }
    Ok(())
}

fn mean_phonon(psi: &StateVector) -> f64 {
    psi.fock_populations().iter().enumerate().map(|(n, p)| n as f64 * p).sum()
}

/// Drives `n_loops` full loops from `initial_spin ⊗ |0⟩`.
pub fn run_closed_loop(
    params: &WalkingWaveParams,
    n_loops: usize,
    initial_spin: &StateVector,
    dt: f64,
) -> Result<ClosedLoop> {
    params.validate()?;
    if n_loops == 0 {
        return Err(Error::InvalidParameter("n_loops must be >= 1".into()));
    }
    if initial_spin.shape() != BasisShape::spins(2) {
        return Err(Error::InvalidShape("closed loop expects a two-spin state without Fock factor".into()));
    }
    let duration = n_loops as f64 * params.loop_duration();
    let fock_levels = params.fock_levels;
    let h = |t: f64| params.hamiltonian_unchecked(t);
    let spins = Keep::Spins(vec![0, 1]);

    let joint = initial_spin.with_fock_ground(fock_levels)?;
    let mut trajectory = vec![LoopSample { time: 0.0, spin_purity: 1.0, mean_phonon: 0.0 }];
    trajectory[0].spin_purity = partial_trace(&joint, &spins)?.purity();
    let final_state = evolve_observed(&joint, h, 0.0, duration, dt, |t, psi| {
        overflow_guard(psi, fock_levels)?;
        trajectory.push(LoopSample {
            time: t,
            spin_purity: partial_trace(psi, &spins)?.purity(),
            mean_phonon: mean_phonon(psi),
        });
        Ok(())
    })?;

    let mut args = [0.0; 4];
    for (config, arg) in args.iter_mut().enumerate() {
        let start = StateVector::basis(params.shape(), config * fock_levels)?;
        let index = config * fock_levels;
        let mut last = 0.0_f64;
        let mut unwrapped = 0.0_f64;
        evolve_observed(&start, h, 0.0, duration, dt, |_, psi| {
            overflow_guard(psi, fock_levels)?;
            let now = psi.amplitudes()[index].arg();
            let mut step = now - last;
            step -= 2.0 * PI * (step / (2.0 * PI)).round();
            unwrapped += step;
            last = now;
            Ok(())
        })?;
        *arg = unwrapped;
    }
    let phases = args.map(|a| -(a - args[0]));

    Ok(ClosedLoop {
        spin_purity: partial_trace(&final_state, &spins)?.purity(),
        mean_phonon: mean_phonon(&final_state),
        final_state,
        duration,
        phases,
        trajectory,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveCoupling {
    /// σ^zσ^z coefficient, rad/s.
    pub j_eff: f64,
    /// σ^z coefficient per ion (B_z-like), rad/s.
    pub single_spin_rates: [f64; 2],
    /// `|ω_stretch / δ|`.
    pub enhancement: f64,
}

/// Second-order (Magnus) effective couplings. Writing `ĝ_i = ḡ_i + Δ_i σ^z_i`,
/// `J = 2 Δ_0 Δ_1 / δ` and `h_i = 2 (Σ_k ḡ_k) Δ_i / δ`.
pub fn effective_coupling_analytic(params: &WalkingWaveParams) -> Result<EffectiveCoupling> {
    if params.delta == 0.0 {
        return Err(Error::ZeroDetuning);
    }
    let mean: Vec<f64> =
        params.mode_amplitudes.iter().map(|b| b * 0.5 * (params.g_up + params.g_down())).collect();
    let diff: Vec<f64> =
        params.mode_amplitudes.iter().map(|b| b * 0.5 * (params.g_up - params.g_down())).collect();
    let total_mean: f64 = mean.iter().sum();
    Ok(EffectiveCoupling {
        j_eff: 2.0 * diff[0] * diff[1] / params.delta,
        single_spin_rates: [
            2.0 * total_mean * diff[0] / params.delta,
            2.0 * total_mean * diff[1] / params.delta,
        ],
        enhancement: (params.omega_stretch / params.delta).abs(),
    })
}

/// σ^zσ^z coefficient read off the configuration phases after one loop.
pub fn extract_coupling_numeric(params: &WalkingWaveParams, dt: f64) -> Result<f64> {
    let up_up = StateVector::basis(BasisShape::spins(2), 0)?;
    Ok(run_closed_loop(params, 1, &up_up, dt)?.zz_rate())
}
