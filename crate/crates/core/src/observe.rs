//! Sensor placement masks, model input assembly and the naive baseline.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::chebnet::INPUT_CHANNELS;
use crate::error::{Error, Result};
use crate::scenegen::Scaler;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationMask {
    pub bits: Vec<bool>,
    pub ratio: f64,
    pub seed: u64,
}

/// `ceil(ratio * n)`, robust to products like `0.1 * 30 = 3.0000000000000004`.
pub fn observed_count(n: usize, ratio: f64) -> usize {
    ((ratio * n as f64) - 1e-9).ceil().max(1.0) as usize
}

/// Chooses `ceil(ratio * n)` observed nodes uniformly without replacement.
pub fn generate_mask(n: usize, ratio: f64, seed: u64) -> Result<ObservationMask> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::InvalidRatio(ratio));
    }
    if n == 0 {
        return Err(Error::EmptyMask);
    }
    let count = observed_count(n, ratio).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bits = vec![false; n];
    for i in rand::seq::index::sample(&mut rng, n, count) {
        bits[i] = true;
    }
    Ok(ObservationMask { bits, ratio, seed })
}

impl ObservationMask {
    pub fn from_bits(bits: Vec<bool>) -> Result<Self> {
        let observed = bits.iter().filter(|b| **b).count();
        if observed == 0 {
            return Err(Error::EmptyMask);
        }
        let ratio = observed as f64 / bits.len() as f64;
        Ok(Self { bits, ratio, seed: 0 })
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn observed(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn observed_nodes(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.bits[i]).collect()
    }

    pub fn value(&self, i: usize) -> f64 {
        if self.bits[i] {
            1.0
        } else {
            0.0
        }
    }
}

/// `n x 2` input: standardized pressure times mask, and the mask.
pub fn assemble_input(pressures: &[f64], mask: &ObservationMask, scaler: &Scaler) -> Result<Array2<f64>> {
    if pressures.len() != mask.len() {
        return Err(Error::dims(mask.len(), pressures.len()));
    }
    let mut x = Array2::zeros((pressures.len(), INPUT_CHANNELS));
    for (i, &p) in pressures.iter().enumerate() {
        let m = mask.value(i);
        x[[i, 0]] = scaler.scale_in(p)? * m;
        x[[i, 1]] = m;
    }
    Ok(x)
}

/// Observed values are kept; every unobserved node gets their mean.
pub fn naive_predict(pressures: &[f64], mask: &ObservationMask) -> Result<Vec<f64>> {
    if pressures.len() != mask.len() {
        return Err(Error::dims(mask.len(), pressures.len()));
    }
    let observed: Vec<f64> = mask.observed_nodes().iter().map(|&i| pressures[i]).collect();
    if observed.is_empty() {
        return Err(Error::EmptyMask);
    }
    let mean = observed.iter().sum::<f64>() / observed.len() as f64;
    Ok(pressures
        .iter()
        .zip(&mask.bits)
        .map(|(&p, &b)| if b { p } else { mean })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mask_counts() {
        assert_eq!(generate_mask(22, 0.05, 1).unwrap().observed(), 2);
        assert_eq!(generate_mask(22, 0.8, 1).unwrap().observed(), 18);
        assert_eq!(generate_mask(30, 0.1, 1).unwrap().observed(), 3);
        assert!(generate_mask(10, 1.0, 5).unwrap().bits.iter().all(|b| *b));
        assert_eq!(generate_mask(22, 0.2, 9).unwrap(), generate_mask(22, 0.2, 9).unwrap());
        assert!(matches!(generate_mask(5, 0.0, 1), Err(Error::InvalidRatio(_))));
        assert!(matches!(generate_mask(5, 1.5, 1), Err(Error::InvalidRatio(_))));
    }

    #[test]
    fn naive_examples() {
        let mask = ObservationMask::from_bits(vec![true, false, true, false]).unwrap();
        let p = naive_predict(&[50.0, 1.0, 60.0, 2.0], &mask).unwrap();
        assert_eq!(p, vec![50.0, 55.0, 60.0, 55.0]);
        let one = ObservationMask::from_bits(vec![false, true, false]).unwrap();
        assert_eq!(naive_predict(&[3.0, 80.0, 4.0], &one).unwrap(), vec![80.0; 3]);
        assert!(matches!(
            ObservationMask::from_bits(vec![false, false]),
            Err(Error::EmptyMask)
        ));
    }

    #[test]
    fn input_channels() {
        let scaler = Scaler {
            mean: 50.0,
            std: 10.0,
            min: 0.0,
            max: 100.0,
        };
        let mask = ObservationMask::from_bits(vec![true, false, true]).unwrap();
        let x = assemble_input(&[50.0, 90.0, 70.0], &mask, &scaler).unwrap();
        assert_eq!(x.column(0).to_vec(), vec![0.0, 0.0, 2.0]);
        assert_eq!(x.column(1).to_vec(), vec![1.0, 0.0, 1.0]);
        assert!(assemble_input(&[1.0], &mask, &scaler).is_err());
    }
}
