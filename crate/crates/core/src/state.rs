//! Multiqubit pure states.
//!
//! Amplitudes are stored in the computational basis with qubit 0 (the first
//! party) as the most significant bit of the basis index.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{param, Result};

const NORM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// Builds a state from raw amplitudes, normalizing them.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let len = amplitudes.len();
        if len < 2 || !len.is_power_of_two() {
            return param(format!("amplitude count {len} is not a power of two >= 2"));
        }
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return param("amplitudes have zero or non-finite norm");
        }
        Ok(Self {
            n_qubits: len.trailing_zeros() as usize,
            amplitudes: amplitudes.into_iter().map(|a| a / norm).collect(),
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Applies a 2x2 matrix `[[u00, u01], [u10, u11]]` to one qubit.
    pub fn apply_single_qubit(&mut self, qubit: usize, u: [[Complex64; 2]; 2]) -> Result<()> {
        if qubit >= self.n_qubits {
            return param(format!(
                "qubit {qubit} out of range for {} qubits",
                self.n_qubits
            ));
        }
        let stride = 1usize << (self.n_qubits - 1 - qubit);
        for base in 0..self.amplitudes.len() {
            if base & stride != 0 {
                continue;
            }
            let a0 = self.amplitudes[base];
            let a1 = self.amplitudes[base | stride];
            self.amplitudes[base] = u[0][0] * a0 + u[0][1] * a1;
            self.amplitudes[base | stride] = u[1][0] * a0 + u[1][1] * a1;
        }
        Ok(())
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr() - 1.0).abs() <= NORM_TOL
    }
}

/// Named state families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NamedState {
    /// `cos(alpha)|0..0> + sin(alpha)|1..1>`, `alpha` in radians.
    Ghz {
        alpha: f64,
    },
    W,
    Dicke {
        excitations: usize,
    },
    LinearCluster,
    RingCluster,
    Product,
}

impl NamedState {
    pub fn ghz_degrees(alpha_deg: f64) -> Self {
        NamedState::Ghz {
            alpha: alpha_deg.to_radians(),
        }
    }
}

pub fn make_named_state(family: NamedState, n_qubits: usize) -> Result<StateVector> {
    if n_qubits < 2 {
        return param(format!(
            "named states need at least 2 qubits, got {n_qubits}"
        ));
    }
    if n_qubits > 30 {
        return param(format!("{n_qubits} qubits is too many to store"));
    }
    let dim = 1usize << n_qubits;
    let mut amps = vec![Complex64::new(0.0, 0.0); dim];
    match family {
        NamedState::Ghz { alpha } => {
            if !alpha.is_finite() {
                return param("GHZ angle must be finite");
            }
            amps[0] = Complex64::new(alpha.cos(), 0.0);
            amps[dim - 1] = Complex64::new(alpha.sin(), 0.0);
        }
        NamedState::W => return make_named_state(NamedState::Dicke { excitations: 1 }, n_qubits),
        NamedState::Dicke { excitations } => {
            if excitations < 1 || excitations >= n_qubits {
                return param(format!(
                    "Dicke excitations must be in 1..={} for {n_qubits} qubits, got {excitations}",
                    n_qubits - 1
                ));
            }
            for (idx, a) in amps.iter_mut().enumerate() {
                if idx.count_ones() as usize == excitations {
                    *a = Complex64::new(1.0, 0.0);
                }
            }
        }
        NamedState::LinearCluster | NamedState::RingCluster => {
            let mut edges: Vec<(usize, usize)> = (0..n_qubits - 1).map(|i| (i, i + 1)).collect();
            if family == NamedState::RingCluster {
                if n_qubits < 3 {
                    return param("ring cluster needs at least 3 qubits");
                }
                edges.push((n_qubits - 1, 0));
            }
            let bit = |idx: usize, q: usize| (idx >> (n_qubits - 1 - q)) & 1;
            for (idx, a) in amps.iter_mut().enumerate() {
                let parity: usize = edges.iter().map(|&(i, j)| bit(idx, i) & bit(idx, j)).sum();
                *a = Complex64::new(if parity.is_multiple_of(2) { 1.0 } else { -1.0 }, 0.0);
            }
        }
        NamedState::Product => amps[0] = Complex64::new(1.0, 0.0),
    }
    StateVector::from_amplitudes(amps)
}

/// Haar-random pure state: i.i.d. complex Gaussian amplitudes, normalized.
pub fn sample_random_pure_state<R: Rng + ?Sized>(n_qubits: usize, rng: &mut R) -> StateVector {
    assert!(
        (1..=30).contains(&n_qubits),
        "qubit count {n_qubits} out of range"
    );
    let dim = 1usize << n_qubits;
    loop {
        let amps: Vec<Complex64> = (0..dim)
            .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        if let Ok(state) = StateVector::from_amplitudes(amps) {
            return state;
        }
    }
}
