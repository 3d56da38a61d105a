//! Dense N-qubit state simulation restricted to planar (x–y) spin measurements.
//!
//! Basis indices put party 1 in the most significant bit; bit value 0 is spin-up.
//! Measurement outcomes use the ±1 eigenvalue convention, and outcome index bit 1
//! stands for −1.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported party count (density matrix side 1024).
pub const MAX_PARTIES: usize = 10;
/// Tolerance for normalization, trace and hermiticity checks.
pub const NORM_TOL: f64 = 1e-12;
/// Eigenvalues may dip this far below zero before a state is rejected.
pub const PSD_TOL: f64 = 1e-10;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Azimuthal angle of a spin-measurement direction in the x–y plane.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PlanarAngle(f64);

impl PlanarAngle {
    /// σ_x direction.
    pub const X: PlanarAngle = PlanarAngle(0.0);
    /// σ_y direction.
    pub const Y: PlanarAngle = PlanarAngle(PI / 2.0);

    /// Panics if `radians` is not finite.
    pub fn new(radians: f64) -> Self {
        assert!(radians.is_finite(), "planar angle must be finite, got {radians}");
        PlanarAngle(radians)
    }

    pub fn radians(self) -> f64 {
        self.0
    }

    /// Angle reduced to [0, 2π).
    pub fn normalized(self) -> f64 {
        self.0.rem_euclid(2.0 * PI)
    }

    /// True when both angles name the same direction modulo 2π.
    pub fn same_direction(self, other: PlanarAngle, tol: f64) -> bool {
        let d = (self.0 - other.0).rem_euclid(2.0 * PI);
        d < tol || 2.0 * PI - d < tol
    }
}

impl From<f64> for PlanarAngle {
    fn from(radians: f64) -> Self {
        PlanarAngle::new(radians)
    }
}

/// Spin direction on the Bloch sphere, used only by the out-of-plane adversary probe.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlochDirection {
    pub azimuth: f64,
    /// Angle from +z; π/2 is the x–y plane.
    pub polar: f64,
}

impl BlochDirection {
    pub fn planar(azimuth: PlanarAngle) -> Self {
        BlochDirection { azimuth: azimuth.radians(), polar: PI / 2.0 }
    }
}

fn check_party_count(n: usize, min: usize) -> Result<()> {
    if n < min || n > MAX_PARTIES {
        return Err(Error::InvalidPartyCount(n));
    }
    Ok(())
}

/// Pure N-qubit state.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    pub fn new(n: usize, amps: Vec<Complex64>) -> Result<Self> {
        check_party_count(n, 1)?;
        if amps.len() != 1 << n {
            return Err(Error::Shape { expected: 1 << n, actual: amps.len() });
        }
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidConfig(format!("state norm {norm} differs from 1")));
        }
        Ok(StateVector { n, amps })
    }

    pub fn parties(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn to_density(&self) -> DensityMatrix {
        let dim = self.amps.len();
        let mut entries = vec![ZERO; dim * dim];
        for (i, a) in self.amps.iter().enumerate() {
            for (j, b) in self.amps.iter().enumerate() {
                entries[i * dim + j] = a * b.conj();
            }
        }
        DensityMatrix { n: self.n, dim, entries }
    }

    /// Born-rule distribution for planar measurements at `angles`.
    pub fn distribution(&self, angles: &[PlanarAngle]) -> Result<OutcomeDistribution> {
        if angles.len() != self.n {
            return Err(Error::Shape { expected: self.n, actual: angles.len() });
        }
        let mut amps = self.amps.clone();
        for (party, angle) in angles.iter().enumerate() {
            let gate = measurement_rotation(*angle);
            let stride = 1 << (self.n - 1 - party);
            for base in 0..amps.len() {
                if base & stride != 0 {
                    continue;
                }
                let (a0, a1) = (amps[base], amps[base | stride]);
                amps[base] = gate[0][0] * a0 + gate[0][1] * a1;
                amps[base | stride] = gate[1][0] * a0 + gate[1][1] * a1;
            }
        }
        Ok(OutcomeDistribution::normalized(self.n, amps.iter().map(|a| a.norm_sqr()).collect()))
    }

    fn kron(&self, other: &StateVector) -> StateVector {
        let mut amps = Vec::with_capacity(self.amps.len() * other.amps.len());
        for a in &self.amps {
            for b in &other.amps {
                amps.push(a * b);
            }
        }
        StateVector { n: self.n + other.n, amps }
    }
}

/// Mixed N-qubit state as a dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    n: usize,
    dim: usize,
    entries: Vec<Complex64>,
}

impl DensityMatrix {
    /// Validates hermiticity and unit trace. Positivity is checked separately by
    /// [`DensityMatrix::is_positive_semidefinite`].
    pub fn from_entries(n: usize, entries: Vec<Complex64>) -> Result<Self> {
        check_party_count(n, 1)?;
        let dim = 1usize << n;
        if entries.len() != dim * dim {
            return Err(Error::Shape { expected: dim * dim, actual: entries.len() });
        }
        let rho = DensityMatrix { n, dim, entries };
        if !rho.is_hermitian() {
            return Err(Error::InvalidConfig("density matrix is not Hermitian".into()));
        }
        let tr = rho.trace();
        if (tr.re - 1.0).abs() > NORM_TOL || tr.im.abs() > NORM_TOL {
            return Err(Error::InvalidConfig(format!("density matrix trace {tr} differs from 1")));
        }
        Ok(rho)
    }

    pub fn maximally_mixed(n: usize) -> Result<Self> {
        check_party_count(n, 1)?;
        let dim = 1usize << n;
        let mut entries = vec![ZERO; dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = Complex64::new(1.0 / dim as f64, 0.0);
        }
        Ok(DensityMatrix { n, dim, entries })
    }

    pub fn parties(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * self.dim + col]
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self.entry(i, i)).sum()
    }

    pub fn is_hermitian(&self) -> bool {
        (0..self.dim).all(|i| {
            (i..self.dim).all(|j| (self.entry(i, j) - self.entry(j, i).conj()).norm() <= NORM_TOL)
        })
    }

    /// Checks that every eigenvalue is at least `-PSD_TOL` via a Cholesky attempt on ρ + tol·𝕀.
    pub fn is_positive_semidefinite(&self) -> bool {
        let d = self.dim;
        let mut l = vec![ZERO; d * d];
        for j in 0..d {
            let mut diag = self.entry(j, j).re + PSD_TOL;
            for k in 0..j {
                diag -= l[j * d + k].norm_sqr();
            }
            if diag <= 0.0 {
                return false;
            }
            let ljj = diag.sqrt();
            l[j * d + j] = Complex64::new(ljj, 0.0);
            for i in j + 1..d {
                let mut s = self.entry(i, j);
                for k in 0..j {
                    s -= l[i * d + k] * l[j * d + k].conj();
                }
                l[i * d + j] = s / ljj;
            }
        }
        true
    }

    /// Convex combination `w·self + (1−w)·other`.
    pub fn mix(&self, w: f64, other: &DensityMatrix) -> Result<DensityMatrix> {
        if other.n != self.n {
            return Err(Error::Shape { expected: self.n, actual: other.n });
        }
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a * w + b * (1.0 - w))
            .collect();
        Ok(DensityMatrix { n: self.n, dim: self.dim, entries })
    }

    fn rotate_qubit(&mut self, party: usize, gate: &[[Complex64; 2]; 2]) {
        let d = self.dim;
        let stride = 1 << (self.n - 1 - party);
        // rows: ρ ← Uρ
        for r in 0..d {
            if r & stride != 0 {
                continue;
            }
            let (r0, r1) = (r * d, (r | stride) * d);
            for c in 0..d {
                let (a, b) = (self.entries[r0 + c], self.entries[r1 + c]);
                self.entries[r0 + c] = gate[0][0] * a + gate[0][1] * b;
                self.entries[r1 + c] = gate[1][0] * a + gate[1][1] * b;
            }
        }
        // columns: ρ ← ρU†
        for c in 0..d {
            if c & stride != 0 {
                continue;
            }
            let c1 = c | stride;
            for r in 0..d {
                let (a, b) = (self.entries[r * d + c], self.entries[r * d + c1]);
                self.entries[r * d + c] = gate[0][0].conj() * a + gate[0][1].conj() * b;
                self.entries[r * d + c1] = gate[1][0].conj() * a + gate[1][1].conj() * b;
            }
        }
    }
}

/// Rows are the bras ⟨+φ| and ⟨−φ| of the planar observable at φ.
fn measurement_rotation(angle: PlanarAngle) -> [[Complex64; 2]; 2] {
    let phase = Complex64::from_polar(FRAC_1_SQRT_2, -angle.radians());
    let s = Complex64::new(FRAC_1_SQRT_2, 0.0);
    [[s, phase], [s, -phase]]
}

/// (|↑…↑⟩ + |↓…↓⟩)/√2.
pub fn ghz_state(n: usize) -> Result<StateVector> {
    check_party_count(n, 2)?;
    let mut amps = vec![ZERO; 1 << n];
    amps[0] = Complex64::new(FRAC_1_SQRT_2, 0.0);
    amps[(1 << n) - 1] = Complex64::new(FRAC_1_SQRT_2, 0.0);
    Ok(StateVector { n, amps })
}

/// v·|GHZ⟩⟨GHZ| + (1−v)·𝕀/2^n.
pub fn werner_density(n: usize, v: f64) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::InvalidVisibility(v));
    }
    let ghz = ghz_state(n)?.to_density();
    ghz.mix(v, &DensityMatrix::maximally_mixed(n)?)
}

/// cos φ·σ_x + sin φ·σ_y.
pub fn planar_observable(angle: PlanarAngle) -> [[Complex64; 2]; 2] {
    let (s, c) = angle.radians().sin_cos();
    [[ZERO, Complex64::new(c, -s)], [Complex64::new(c, s), ZERO]]
}

/// Tensor product of the +1 eigenstates of the planar observables at `directions`.
pub fn product_state(directions: &[PlanarAngle]) -> Result<DensityMatrix> {
    let bloch: Vec<_> = directions.iter().map(|d| BlochDirection::planar(*d)).collect();
    product_state_bloch(&bloch)
}

/// Tensor product of spin-up states along arbitrary Bloch directions.
pub fn product_state_bloch(directions: &[BlochDirection]) -> Result<DensityMatrix> {
    check_party_count(directions.len(), 1)?;
    let single = |d: &BlochDirection| StateVector {
        n: 1,
        amps: vec![
            Complex64::new((d.polar / 2.0).cos(), 0.0),
            Complex64::from_polar((d.polar / 2.0).sin(), d.azimuth),
        ],
    };
    let mut psi = single(&directions[0]);
    for d in &directions[1..] {
        psi = psi.kron(&single(d));
    }
    Ok(psi.to_density())
}

/// Born-rule distribution of planar measurement outcomes on `state`.
pub fn joint_distribution(state: &DensityMatrix, angles: &[PlanarAngle]) -> Result<OutcomeDistribution> {
    if angles.len() != state.n {
        return Err(Error::Shape { expected: state.n, actual: angles.len() });
    }
    let mut rotated = state.clone();
    for (party, angle) in angles.iter().enumerate() {
        rotated.rotate_qubit(party, &measurement_rotation(*angle));
    }
    let probs = (0..rotated.dim).map(|i| rotated.entry(i, i).re).collect();
    Ok(OutcomeDistribution::normalized(state.n, probs))
}

/// ⟨⊗ᵢ (cos φᵢ σ_x + sin φᵢ σ_y)⟩.
pub fn expectation(state: &DensityMatrix, angles: &[PlanarAngle]) -> Result<f64> {
    Ok(joint_distribution(state, angles)?.correlator())
}

/// Probabilities over {+1,−1}^n, indexed with party 1 as the most significant bit.
#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeDistribution {
    n: usize,
    probs: Vec<f64>,
}

impl OutcomeDistribution {
    pub fn new(n: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != 1 << n {
            return Err(Error::Shape { expected: 1 << n, actual: probs.len() });
        }
        if let Some(&p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::Domain(p));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidConfig(format!("probabilities sum to {total}")));
        }
        Ok(OutcomeDistribution { n, probs })
    }

    /// Point mass on one outcome tuple.
    pub fn point(outcomes: &[i8]) -> Self {
        let n = outcomes.len();
        let mut probs = vec![0.0; 1 << n];
        probs[outcome_index(outcomes)] = 1.0;
        OutcomeDistribution { n, probs }
    }

    pub fn uniform(n: usize) -> Self {
        OutcomeDistribution { n, probs: vec![1.0 / (1u64 << n) as f64; 1 << n] }
    }

    fn normalized(n: usize, mut probs: Vec<f64>) -> Self {
        for p in probs.iter_mut() {
            *p = p.max(0.0);
        }
        let total: f64 = probs.iter().sum();
        for p in probs.iter_mut() {
            *p /= total;
        }
        OutcomeDistribution { n, probs }
    }

    pub fn parties(&self) -> usize {
        self.n
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    pub fn probability(&self, outcomes: &[i8]) -> f64 {
        self.probs[outcome_index(outcomes)]
    }

    pub fn iter(&self) -> impl Iterator<Item = (Vec<i8>, f64)> + '_ {
        self.probs.iter().enumerate().map(|(i, &p)| (outcome_tuple(i, self.n), p))
    }

    /// E[Πᵢ outcomeᵢ].
    pub fn correlator(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(i, p)| if i.count_ones() % 2 == 0 { *p } else { -*p })
            .sum()
    }

    /// P(party's outcome = +1).
    pub fn marginal_up(&self, party: usize) -> f64 {
        let bit = 1 << (self.n - 1 - party);
        self.probs.iter().enumerate().filter(|(i, _)| i & bit == 0).map(|(_, p)| p).sum()
    }

    /// Pointwise convex combination `w·self + (1−w)·other`.
    pub fn mix(&self, w: f64, other: &OutcomeDistribution) -> OutcomeDistribution {
        let probs = self.probs.iter().zip(&other.probs).map(|(a, b)| w * a + (1.0 - w) * b).collect();
        OutcomeDistribution { n: self.n, probs }
    }

    /// Index of a tuple drawn from the distribution.
    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        // rounding left u above the last cumulative sum
        self.probs.iter().rposition(|p| *p > 0.0).unwrap_or(0)
    }
}

/// Draws one outcome tuple from `dist`.
pub fn sample_outcomes<R: Rng + ?Sized>(dist: &OutcomeDistribution, rng: &mut R) -> Vec<i8> {
    outcome_tuple(dist.sample_index(rng), dist.n)
}

/// Maps a ±1 tuple to its index (+1 → bit 0, party 1 most significant).
pub fn outcome_index(outcomes: &[i8]) -> usize {
    outcomes.iter().fold(0, |acc, &o| (acc << 1) | usize::from(o < 0))
}

pub fn outcome_tuple(index: usize, n: usize) -> Vec<i8> {
    (0..n).map(|p| if index >> (n - 1 - p) & 1 == 0 { 1 } else { -1 }).collect()
}

/// Key-bit encoding of an outcome: +1 → 0, −1 → 1.
pub fn outcome_bit(outcome: i8) -> u8 {
    u8::from(outcome < 0)
}
