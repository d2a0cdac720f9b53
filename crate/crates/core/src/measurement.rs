//! Dichotomic single-qubit observables and per-party measurement setups.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, UnitSphere};

use crate::error::{param, Result};

/// A ±1-valued qubit observable `n·σ`, identified by its unit Bloch vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observable {
    bloch: [f64; 3],
}

impl Observable {
    /// Accepts any non-zero vector and normalizes it.
    pub fn new(bloch: [f64; 3]) -> Result<Self> {
        let norm = bloch.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return param("Bloch vector must be non-zero and finite");
        }
        Ok(Self {
            bloch: bloch.map(|x| x / norm),
        })
    }

    pub const fn x() -> Self {
        Self {
            bloch: [1.0, 0.0, 0.0],
        }
    }

    pub const fn y() -> Self {
        Self {
            bloch: [0.0, 1.0, 0.0],
        }
    }

    pub const fn z() -> Self {
        Self {
            bloch: [0.0, 0.0, 1.0],
        }
    }

    pub fn bloch(&self) -> [f64; 3] {
        self.bloch
    }

    /// Rows are `<φ+|` and `<φ-|`, the conjugated eigenvectors of `n·σ` for
    /// outcomes +1 and -1. Applying this matrix to a qubit turns outcome
    /// amplitudes into computational basis amplitudes.
    pub(crate) fn outcome_bras(&self) -> [[Complex64; 2]; 2] {
        let [nx, ny, nz] = self.bloch;
        let cos_half = ((1.0 + nz) / 2.0).max(0.0).sqrt();
        let sin_half = ((1.0 - nz) / 2.0).max(0.0).sqrt();
        let rho = nx.hypot(ny);
        let phase = if rho > 0.0 {
            Complex64::new(nx / rho, ny / rho)
        } else {
            Complex64::new(1.0, 0.0)
        };
        // |φ+> = (cos, e^{iφ} sin), |φ-> = (sin, -e^{iφ} cos)
        let plus = [Complex64::new(cos_half, 0.0), phase * sin_half];
        let minus = [Complex64::new(sin_half, 0.0), -phase * cos_half];
        [
            [plus[0].conj(), plus[1].conj()],
            [minus[0].conj(), minus[1].conj()],
        ]
    }
}

/// Haar-random observable: a uniformly distributed Bloch direction.
pub fn sample_random_observable<R: Rng + ?Sized>(rng: &mut R) -> Observable {
    let v: [f64; 3] = UnitSphere.sample(rng);
    Observable::new(v).expect("unit sphere sample is non-zero")
}

/// Settings per party: `settings[i][k]` is the k-th observable of party i.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSetup {
    settings: Vec<Vec<Observable>>,
}

impl MeasurementSetup {
    pub fn new(settings: Vec<Vec<Observable>>) -> Result<Self> {
        if settings.is_empty() {
            return param("a measurement setup needs at least one party");
        }
        if let Some(i) = settings.iter().position(|s| s.is_empty()) {
            return param(format!("party {i} has no settings"));
        }
        Ok(Self { settings })
    }

    /// Fresh random observables for every party and setting.
    pub fn random<R: Rng + ?Sized>(shape: &[usize], rng: &mut R) -> Result<Self> {
        Self::new(
            shape
                .iter()
                .map(|&m| (0..m).map(|_| sample_random_observable(rng)).collect())
                .collect(),
        )
    }

    pub fn n_parties(&self) -> usize {
        self.settings.len()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.settings.iter().map(Vec::len).collect()
    }

    pub fn party(&self, i: usize) -> &[Observable] {
        &self.settings[i]
    }
}
