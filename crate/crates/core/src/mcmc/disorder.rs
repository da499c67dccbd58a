use serde::Serialize;

use crate::rng::{stream, Purpose};
use crate::scalar::{truncate, DisorderLaw};

/// Quenched disorder `ω_x`, one value per interior site in domain order.
/// Values are a function of `(law, seed, replica, volume, cutoff)` alone.
#[derive(Clone, Debug, Serialize)]
pub struct DisorderField {
    law: DisorderLaw,
    seed: u64,
    replica: u64,
    /// `Some(K)` when values were replaced by `ω̄ = ω 1_{|ω| ≤ K}`.
    cutoff: Option<f64>,
    values: Vec<f64>,
}

impl DisorderField {
    pub fn generate(law: DisorderLaw, seed: u64, replica: u64, volume: usize) -> Self {
        let mut rng = stream(seed, Purpose::Disorder, replica, 0);
        let values = (0..volume).map(|_| law.sample(&mut rng)).collect();
        Self {
            law,
            seed,
            replica,
            cutoff: None,
            values,
        }
    }

    /// All-zero disorder, the `β = 0` model.
    pub fn zero(volume: usize) -> Self {
        Self {
            law: DisorderLaw::Rademacher,
            seed: 0,
            replica: 0,
            cutoff: None,
            values: vec![0.0; volume],
        }
    }

    /// `ω̄_x = ω_x 1_{|ω_x| ≤ cutoff}`.
    pub fn truncated(&self, cutoff: f64) -> Self {
        Self {
            cutoff: Some(cutoff),
            values: self.values.iter().map(|&w| truncate(w, cutoff)).collect(),
            ..self.clone()
        }
    }

    pub fn law(&self) -> DisorderLaw {
        self.law
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn replica(&self) -> u64 {
        self.replica
    }

    pub fn is_truncated(&self) -> bool {
        self.cutoff.is_some()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regeneration_is_bit_identical() {
        let a = DisorderField::generate(DisorderLaw::Normal, 9, 2, 500);
        let b = DisorderField::generate(DisorderLaw::Normal, 9, 2, 500);
        assert!(a.values().iter().zip(b.values()).all(|(x, y)| x.to_bits() == y.to_bits()));
        let c = DisorderField::generate(DisorderLaw::Normal, 9, 3, 500);
        assert_ne!(a.values()[0], c.values()[0]);
    }

    #[test]
    fn truncation_zeroes_large_values() {
        let a = DisorderField::generate(DisorderLaw::Normal, 1, 0, 2000);
        let t = a.truncated(1.5);
        assert!(t.is_truncated());
        for (w, v) in a.values().iter().zip(t.values()) {
            assert_eq!(*v, if w.abs() <= 1.5 { *w } else { 0.0 });
        }
    }
}
