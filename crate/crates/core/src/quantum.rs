//! Dense complex linear algebra on the spin ⊗ Fock product space.
//!
//! Basis ordering: spin 0 is the most significant factor, `|↑⟩` (bit 0)
//! precedes `|↓⟩` (bit 1) on every site, and the Fock level is the least
//! significant factor. A full basis index is `spin_config * fock_levels + n`.
//! All energies are angular frequencies in rad/s (ħ = 1), times in seconds.

use std::str::FromStr;

use nalgebra::{DMatrix, DVector, Matrix2, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

const NORM_TOL: f64 = 1e-9;
const HERMITIAN_TOL: f64 = 1e-8;
const DENSITY_HERMITIAN_TOL: f64 = 1e-10;
const EIGEN_FLOOR: f64 = -1e-9;
const MAX_SPINS: usize = 16;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Shape of the product basis: `n_spins` qubits times `fock_levels` oscillator levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BasisShape {
    pub n_spins: usize,
    pub fock_levels: usize,
}

impl BasisShape {
    pub fn new(n_spins: usize, fock_levels: usize) -> Result<Self> {
        if fock_levels == 0 {
            return Err(Error::InvalidShape("fock_levels must be at least 1".into()));
        }
        if n_spins > MAX_SPINS {
            return Err(Error::InvalidShape(format!(
                "{n_spins} spins exceeds the dense limit of {MAX_SPINS}"
            )));
        }
        Ok(Self { n_spins, fock_levels })
    }

    /// Spins only, no oscillator factor.
    pub const fn spins(n_spins: usize) -> Self {
        Self { n_spins, fock_levels: 1 }
    }

    pub fn spin_dim(&self) -> usize {
        1 << self.n_spins
    }

    pub fn dim(&self) -> usize {
        self.spin_dim() * self.fock_levels
    }

    pub fn spin_config(&self, index: usize) -> usize {
        index / self.fock_levels
    }

    pub fn fock_level(&self, index: usize) -> usize {
        index % self.fock_levels
    }

    /// 0 for `|↑⟩`, 1 for `|↓⟩`.
    pub fn spin_bit(&self, config: usize, site: usize) -> usize {
        (config >> (self.n_spins - 1 - site)) & 1
    }
}

/// Pauli axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "x" => Ok(Axis::X),
            "y" => Ok(Axis::Y),
            "z" => Ok(Axis::Z),
            other => Err(Error::InvalidAxis(other.to_string())),
        }
    }
}

impl Axis {
    /// Action on a single-site bit: (output bit, amplitude).
    fn act(self, bit: usize) -> (usize, Complex64) {
        match (self, bit) {
            (Axis::X, b) => (b ^ 1, ONE),
            (Axis::Y, 0) => (1, I),
            (Axis::Y, _) => (0, -I),
            (Axis::Z, 0) => (0, ONE),
            (Axis::Z, _) => (1, -ONE),
        }
    }

    pub fn matrix(self) -> Matrix2<Complex64> {
        match self {
            Axis::X => Matrix2::new(ZERO, ONE, ONE, ZERO),
            Axis::Y => Matrix2::new(ZERO, -I, I, ZERO),
            Axis::Z => Matrix2::new(ONE, ZERO, ZERO, -ONE),
        }
    }
}

/// `coefficient × Π σ_site^axis`, coefficient in rad/s.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorTerm {
    pub coefficient: f64,
    pub factors: Vec<(usize, Axis)>,
}

impl OperatorTerm {
    pub fn new(coefficient: f64, factors: Vec<(usize, Axis)>) -> Self {
        Self { coefficient, factors }
    }

    pub fn single(coefficient: f64, site: usize, axis: Axis) -> Self {
        Self::new(coefficient, vec![(site, axis)])
    }

    pub fn pair(coefficient: f64, i: usize, j: usize, axis: Axis) -> Self {
        Self::new(coefficient, vec![(i, axis), (j, axis)])
    }

    fn validate(&self, n_spins: usize) -> Result<()> {
        for (k, &(site, _)) in self.factors.iter().enumerate() {
            if site >= n_spins {
                return Err(Error::SiteOutOfRange { site, n_spins });
            }
            if self.factors[..k].iter().any(|&(s, _)| s == site) {
                return Err(Error::DuplicateSite(site));
            }
        }
        Ok(())
    }
}

/// Sum of Kronecker-embedded Pauli products, identity on the Fock factor.
pub fn build_many_body_operator(
    terms: &[OperatorTerm],
    n_spins: usize,
    fock_levels: usize,
) -> Result<CMatrix> {
    let shape = BasisShape::new(n_spins, fock_levels)?;
    let dim = shape.dim();
    let mut out = CMatrix::zeros(dim, dim);
    for term in terms {
        term.validate(n_spins)?;
        if term.coefficient == 0.0 {
            continue;
        }
        for config in 0..shape.spin_dim() {
            let mut target = config;
            let mut amp = Complex64::new(term.coefficient, 0.0);
            for &(site, axis) in &term.factors {
                let shift = n_spins - 1 - site;
                let (bit, a) = axis.act((config >> shift) & 1);
                target = (target & !(1 << shift)) | (bit << shift);
                amp *= a;
            }
            for n in 0..fock_levels {
                out[(target * fock_levels + n, config * fock_levels + n)] += amp;
            }
        }
    }
    Ok(out)
}

/// `I ⊗ … ⊗ u ⊗ … ⊗ I` with `u` on `site`, identity on the other spins and the Fock factor.
pub fn embed_local(u: &Matrix2<Complex64>, site: usize, shape: BasisShape) -> Result<CMatrix> {
    if site >= shape.n_spins {
        return Err(Error::SiteOutOfRange { site, n_spins: shape.n_spins });
    }
    let left = CMatrix::identity(1 << site, 1 << site);
    let right_dim = (1 << (shape.n_spins - 1 - site)) * shape.fock_levels;
    let right = CMatrix::identity(right_dim, right_dim);
    let local = CMatrix::from_fn(2, 2, |r, c| u[(r, c)]);
    Ok(left.kronecker(&local).kronecker(&right))
}

/// Largest `|M_ij − conj(M_ji)|`.
pub fn hermitian_asymmetry(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for r in 0..n {
        for c in r..n {
            worst = worst.max((m[(r, c)] - m[(c, r)].conj()).norm());
        }
    }
    worst
}

/// Eigenvalues (ascending) and matching eigenvector columns of a Hermitian matrix.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = CMatrix::from_fn(m.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// `exp(−i H dt)` through the eigendecomposition of `H`.
pub fn step_propagator(h: &CMatrix, dt: f64) -> Result<CMatrix> {
    let asym = hermitian_asymmetry(h);
    if asym > HERMITIAN_TOL {
        return Err(Error::NonHermitian(asym));
    }
    let eig = SymmetricEigen::new(h.clone());
    let mut scaled = eig.eigenvectors.clone();
    for (k, lambda) in eig.eigenvalues.iter().enumerate() {
        let phase = Complex64::from_polar(1.0, -lambda * dt);
        for r in 0..scaled.nrows() {
            scaled[(r, k)] *= phase;
        }
    }
    Ok(scaled * eig.eigenvectors.adjoint())
}

/// Pure state over a [`BasisShape`].
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amplitudes: CVector,
    shape: BasisShape,
}

impl StateVector {
    pub fn new(amplitudes: CVector, shape: BasisShape) -> Result<Self> {
        if amplitudes.len() != shape.dim() {
            return Err(Error::DimensionMismatch { expected: shape.dim(), got: amplitudes.len() });
        }
        let norm_sqr = amplitudes.norm_squared();
        if (norm_sqr - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized(norm_sqr));
        }
        Ok(Self { amplitudes, shape })
    }

    /// Rescales to unit norm.
    pub fn normalized(amplitudes: CVector, shape: BasisShape) -> Result<Self> {
        let norm = amplitudes.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::NotNormalized(norm * norm));
        }
        Self::new(amplitudes / Complex64::new(norm, 0.0), shape)
    }

    pub fn basis(shape: BasisShape, index: usize) -> Result<Self> {
        if index >= shape.dim() {
            return Err(Error::DimensionMismatch { expected: shape.dim(), got: index });
        }
        let mut amps = CVector::zeros(shape.dim());
        amps[index] = ONE;
        Ok(Self { amplitudes: amps, shape })
    }

    /// Product of single-spin states, each given as `[⟨↑|ψ⟩, ⟨↓|ψ⟩]`.
    pub fn spin_product(sites: &[[Complex64; 2]]) -> Result<Self> {
        let shape = BasisShape::new(sites.len(), 1)?;
        let amps = CVector::from_fn(shape.dim(), |config, _| {
            sites
                .iter()
                .enumerate()
                .fold(ONE, |acc, (site, s)| acc * s[shape.spin_bit(config, site)])
        });
        Self::normalized(amps, shape)
    }

    /// `|self⟩ ⊗ |0⟩` on a spin ⊗ Fock space with `fock_levels` levels.
    pub fn with_fock_ground(&self, fock_levels: usize) -> Result<Self> {
        if self.shape.fock_levels != 1 {
            return Err(Error::InvalidShape("state already carries a Fock factor".into()));
        }
        let shape = BasisShape::new(self.shape.n_spins, fock_levels)?;
        let mut amps = CVector::zeros(shape.dim());
        for (config, a) in self.amplitudes.iter().enumerate() {
            amps[config * fock_levels] = *a;
        }
        Ok(Self { amplitudes: amps, shape })
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn shape(&self) -> BasisShape {
        self.shape
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.norm_squared()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Complex64 {
        self.amplitudes.dotc(&other.amplitudes)
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Probabilities of each spin configuration, summed over Fock levels.
    pub fn spin_populations(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.shape.spin_dim()];
        for (k, a) in self.amplitudes.iter().enumerate() {
            out[self.shape.spin_config(k)] += a.norm_sqr();
        }
        out
    }

    pub fn fock_populations(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.shape.fock_levels];
        for (k, a) in self.amplitudes.iter().enumerate() {
            out[self.shape.fock_level(k)] += a.norm_sqr();
        }
        out
    }

    pub fn expectation(&self, op: &CMatrix) -> Complex64 {
        self.amplitudes.dotc(&(op * &self.amplitudes))
    }

    /// Applies a 2×2 operator to one spin. The operator is not checked for unitarity.
    pub fn apply_local(&self, site: usize, u: &Matrix2<Complex64>) -> Result<StateVector> {
        let shape = self.shape;
        if site >= shape.n_spins {
            return Err(Error::SiteOutOfRange { site, n_spins: shape.n_spins });
        }
        let stride = shape.fock_levels << (shape.n_spins - 1 - site);
        let mut amps = self.amplitudes.clone();
        for k in 0..shape.dim() {
            if k & stride != 0 {
                continue;
            }
            let (up, down) = (self.amplitudes[k], self.amplitudes[k + stride]);
            amps[k] = u[(0, 0)] * up + u[(0, 1)] * down;
            amps[k + stride] = u[(1, 0)] * up + u[(1, 1)] * down;
        }
        Ok(Self { amplitudes: amps, shape })
    }

    pub(crate) fn apply_matrix(&self, m: &CMatrix) -> StateVector {
        Self { amplitudes: m * &self.amplitudes, shape: self.shape }
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix {
            entries: &self.amplitudes * self.amplitudes.adjoint(),
            shape: self.shape,
        }
    }
}

/// Mixed state over a [`BasisShape`].
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    entries: CMatrix,
    shape: BasisShape,
}

impl DensityMatrix {
    /// Validates Hermiticity (1e-10), unit trace (1e-9) and eigenvalues ≥ −1e-9.
    pub fn new(entries: CMatrix, shape: BasisShape) -> Result<Self> {
        let dim = shape.dim();
        if entries.nrows() != dim || entries.ncols() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: entries.nrows() });
        }
        let asym = hermitian_asymmetry(&entries);
        if asym > DENSITY_HERMITIAN_TOL {
            return Err(Error::InvalidDensityMatrix(format!("asymmetry {asym:e}")));
        }
        let trace = entries.trace();
        if (trace - ONE).norm() > NORM_TOL {
            return Err(Error::InvalidDensityMatrix(format!("trace {trace}")));
        }
        let rho = Self { entries, shape };
        let min = rho.eigenvalues().first().copied().unwrap_or(0.0);
        if min < EIGEN_FLOOR {
            return Err(Error::InvalidDensityMatrix(format!("negative eigenvalue {min:e}")));
        }
        Ok(rho)
    }

    pub fn from_pure(state: &StateVector) -> Self {
        state.to_density()
    }

    /// Convex combination of pure states; weights must be non-negative and sum to 1.
    pub fn mixture(components: &[(f64, StateVector)]) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::InvalidDensityMatrix("empty mixture".into()))?;
        let shape = first.1.shape();
        let mut entries = CMatrix::zeros(shape.dim(), shape.dim());
        for (w, psi) in components {
            if *w < 0.0 || psi.shape() != shape {
                return Err(Error::InvalidDensityMatrix("bad mixture component".into()));
            }
            entries += psi.to_density().entries * Complex64::new(*w, 0.0);
        }
        Self::new(entries, shape)
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn shape(&self) -> BasisShape {
        self.shape
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn trace(&self) -> Complex64 {
        self.entries.trace()
    }

    /// `Tr ρ²`.
    pub fn purity(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigen(&self.entries).0
    }

    pub fn populations(&self) -> Vec<f64> {
        (0..self.dim()).map(|k| self.entries[(k, k)].re).collect()
    }

    pub fn spin_populations(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.shape.spin_dim()];
        for k in 0..self.dim() {
            out[self.shape.spin_config(k)] += self.entries[(k, k)].re;
        }
        out
    }

    /// `Re Tr(ρ O)`.
    pub fn expectation(&self, op: &CMatrix) -> f64 {
        (&self.entries * op).trace().re
    }

    /// `U ρ U†`.
    pub fn conjugate_by(&self, u: &CMatrix) -> DensityMatrix {
        Self {
            entries: u * &self.entries * u.adjoint(),
            shape: self.shape,
        }
    }

    pub fn apply_local(&self, site: usize, u: &Matrix2<Complex64>) -> Result<DensityMatrix> {
        Ok(self.conjugate_by(&embed_local(u, site, self.shape)?))
    }
}

/// Borrowed view of either state representation.
#[derive(Debug, Clone, Copy)]
pub enum StateRef<'a> {
    Pure(&'a StateVector),
    Mixed(&'a DensityMatrix),
}

impl<'a> From<&'a StateVector> for StateRef<'a> {
    fn from(s: &'a StateVector) -> Self {
        StateRef::Pure(s)
    }
}

impl<'a> From<&'a DensityMatrix> for StateRef<'a> {
    fn from(r: &'a DensityMatrix) -> Self {
        StateRef::Mixed(r)
    }
}

impl<'a> From<&'a QuantumState> for StateRef<'a> {
    fn from(q: &'a QuantumState) -> Self {
        match q {
            QuantumState::Pure(s) => StateRef::Pure(s),
            QuantumState::Mixed(r) => StateRef::Mixed(r),
        }
    }
}

impl StateRef<'_> {
    pub fn shape(&self) -> BasisShape {
        match self {
            StateRef::Pure(s) => s.shape(),
            StateRef::Mixed(r) => r.shape(),
        }
    }

    pub fn spin_populations(&self) -> Vec<f64> {
        match self {
            StateRef::Pure(s) => s.spin_populations(),
            StateRef::Mixed(r) => r.spin_populations(),
        }
    }

    pub fn to_density(&self) -> DensityMatrix {
        match self {
            StateRef::Pure(s) => s.to_density(),
            StateRef::Mixed(r) => (*r).clone(),
        }
    }
}

/// Owned state, pure or mixed.
#[derive(Debug, Clone, PartialEq)]
pub enum QuantumState {
    Pure(StateVector),
    Mixed(DensityMatrix),
}

impl QuantumState {
    pub fn as_ref(&self) -> StateRef<'_> {
        self.into()
    }

    pub fn shape(&self) -> BasisShape {
        self.as_ref().shape()
    }

    pub fn spin_populations(&self) -> Vec<f64> {
        self.as_ref().spin_populations()
    }

    pub fn to_density(&self) -> DensityMatrix {
        self.as_ref().to_density()
    }

    pub fn apply_local(&self, site: usize, u: &Matrix2<Complex64>) -> Result<QuantumState> {
        Ok(match self {
            QuantumState::Pure(s) => QuantumState::Pure(s.apply_local(site, u)?),
            QuantumState::Mixed(r) => QuantumState::Mixed(r.apply_local(site, u)?),
        })
    }

    /// Largest entry-wise difference between the two density matrices.
    pub fn distance(&self, other: &QuantumState) -> f64 {
        let (a, b) = (self.to_density(), other.to_density());
        (a.entries() - b.entries()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// Subsystem kept by [`partial_trace`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Keep {
    /// These spins, in the listed order; the Fock factor and other spins are traced out.
    Spins(Vec<usize>),
    /// The oscillator; all spins are traced out.
    Fock,
}

/// Maps a full basis index to (kept index, traced index).
type IndexSplit = Box<dyn Fn(usize) -> (usize, usize)>;

pub fn partial_trace<'a>(state: impl Into<StateRef<'a>>, keep: &Keep) -> Result<DensityMatrix> {
    let state = state.into();
    let shape = state.shape();
    let rho = state.to_density();

    let (reduced_shape, split): (BasisShape, IndexSplit) = match keep {
        Keep::Spins(sites) => {
            if sites.is_empty() {
                return Err(Error::InvalidSelector("no spins selected".into()));
            }
            for (k, &site) in sites.iter().enumerate() {
                if site >= shape.n_spins {
                    return Err(Error::InvalidSelector(format!(
                        "spin {site} not in a {}-spin state",
                        shape.n_spins
                    )));
                }
                if sites[..k].contains(&site) {
                    return Err(Error::InvalidSelector(format!("spin {site} listed twice")));
                }
            }
            let sites = sites.clone();
            let traced_sites: Vec<usize> = (0..shape.n_spins).filter(|s| !sites.contains(s)).collect();
            let reduced = BasisShape::new(sites.len(), 1)?;
            let split = move |index: usize| {
                let config = shape.spin_config(index);
                let kept = sites.iter().fold(0, |acc, &s| (acc << 1) | shape.spin_bit(config, s));
                let rest = traced_sites.iter().fold(0, |acc, &s| (acc << 1) | shape.spin_bit(config, s));
                (kept, rest * shape.fock_levels + shape.fock_level(index))
            };
            (reduced, Box::new(split))
        }
        Keep::Fock => {
            let reduced = BasisShape::new(0, shape.fock_levels)?;
            let split = move |index: usize| (shape.fock_level(index), shape.spin_config(index));
            (reduced, Box::new(split))
        }
    };

    let dim = shape.dim();
    let parts: Vec<(usize, usize)> = (0..dim).map(split).collect();
    let mut out = CMatrix::zeros(reduced_shape.dim(), reduced_shape.dim());
    for i in 0..dim {
        for j in 0..dim {
            if parts[i].1 == parts[j].1 {
                out[(parts[i].0, parts[j].0)] += rho.entries[(i, j)];
            }
        }
    }
    Ok(DensityMatrix { entries: out, shape: reduced_shape })
}

/// Exact σ^z dephasing channel on every spin for a time `dt`:
/// `ρ_ab → ρ_ab · exp(−2γ dt · #sites where a and b differ)`.
pub fn dephase_step(rho: &DensityMatrix, gamma: f64, dt: f64) -> Result<DensityMatrix> {
    if gamma < 0.0 || !gamma.is_finite() {
        return Err(Error::NegativeRate(gamma));
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidTimeStep(dt));
    }
    if gamma * dt >= 0.1 {
        return Err(Error::StepTooLarge(gamma * dt));
    }
    if gamma == 0.0 {
        return Ok(rho.clone());
    }
    let shape = rho.shape;
    let n = shape.n_spins;
    let factors: Vec<f64> = (0..=n).map(|k| (-2.0 * gamma * dt * k as f64).exp()).collect();
    let mut entries = rho.entries.clone();
    for r in 0..rho.dim() {
        for c in 0..rho.dim() {
            let differ = (shape.spin_config(r) ^ shape.spin_config(c)).count_ones() as usize;
            if differ > 0 {
                entries[(r, c)] *= factors[differ];
            }
        }
    }
    Ok(DensityMatrix { entries, shape })
}

fn step_grid(t0: f64, t1: f64, dt: f64) -> Result<(usize, f64)> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidTimeStep(dt));
    }
    if !(t1 >= t0) || !t0.is_finite() || !t1.is_finite() {
        return Err(Error::InvalidInterval { t0, t1 });
    }
    let span = t1 - t0;
    if span == 0.0 {
        return Ok((0, 0.0));
    }
    let steps = ((span / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    Ok((steps, span / steps as f64))
}

fn check_dim(h: &CMatrix, dim: usize) -> Result<()> {
    if h.nrows() != dim || h.ncols() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: h.nrows() });
    }
    Ok(())
}

/// Schrödinger propagation with a piecewise-constant Hamiltonian sampled at
/// each step's midpoint. Steps are uniform and no longer than `dt`.
pub fn evolve<F>(state: &StateVector, hamiltonian: F, t0: f64, t1: f64, dt: f64) -> Result<StateVector>
where
    F: Fn(f64) -> CMatrix,
{
    evolve_observed(state, hamiltonian, t0, t1, dt, |_, _| Ok(()))
}

/// [`evolve`] with a callback after every step, given the time reached and the state.
pub fn evolve_observed<F, O>(
    state: &StateVector,
    hamiltonian: F,
    t0: f64,
    t1: f64,
    dt: f64,
    mut observe: O,
) -> Result<StateVector>
where
    F: Fn(f64) -> CMatrix,
    O: FnMut(f64, &StateVector) -> Result<()>,
{
    let (steps, h) = step_grid(t0, t1, dt)?;
    let mut psi = state.clone();
    for k in 0..steps {
        let mid = t0 + (k as f64 + 0.5) * h;
        let ham = hamiltonian(mid);
        check_dim(&ham, psi.dim())?;
        psi = psi.apply_matrix(&step_propagator(&ham, h)?);
        observe(t0 + (k + 1) as f64 * h, &psi)?;
    }
    Ok(psi)
}

/// Density-matrix propagation with σ^z dephasing at rate `gamma` on every spin,
/// Strang-split as dephase(h/2) · U · dephase(h/2) per step.
pub fn evolve_density<F>(
    rho: &DensityMatrix,
    hamiltonian: F,
    t0: f64,
    t1: f64,
    dt: f64,
    gamma: f64,
) -> Result<DensityMatrix>
where
    F: Fn(f64) -> CMatrix,
{
    let (steps, h) = step_grid(t0, t1, dt)?;
    let mut out = rho.clone();
    for k in 0..steps {
        let mid = t0 + (k as f64 + 0.5) * h;
        let ham = hamiltonian(mid);
        check_dim(&ham, out.dim())?;
        let u = step_propagator(&ham, h)?;
        out = dephase_step(&out, gamma, 0.5 * h)?;
        out = out.conjugate_by(&u);
        out = dephase_step(&out, gamma, 0.5 * h)?;
    }
    Ok(out)
}
