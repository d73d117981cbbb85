//! Summation strategies for pairwise kernel sums.

use nalgebra::{Matrix3, Vector3};

/// How pairwise contributions are accumulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Summation {
    /// Ascending source index with Neumaier-compensated accumulation.
    #[default]
    Reproducible,
    /// Plain accumulation; reductions across sources may be reordered.
    Fast,
}

/// Neumaier compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct Compensated {
    sum: f64,
    carry: f64,
}

impl Compensated {
    #[inline]
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.carry += (self.sum - t) + value;
        } else {
            self.carry += (value - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Accumulator for a fixed number of scalar lanes.
#[derive(Debug, Clone, Copy)]
pub struct Accumulator<const L: usize> {
    mode: Summation,
    plain: [f64; L],
    comp: [Compensated; L],
}

impl<const L: usize> Accumulator<L> {
    pub fn new(mode: Summation) -> Self {
        Accumulator {
            mode,
            plain: [0.0; L],
            comp: [Compensated::default(); L],
        }
    }

    #[inline]
    pub fn add(&mut self, lane: usize, value: f64) {
        match self.mode {
            Summation::Reproducible => self.comp[lane].add(value),
            Summation::Fast => self.plain[lane] += value,
        }
    }

    #[inline]
    pub fn get(&self, lane: usize) -> f64 {
        match self.mode {
            Summation::Reproducible => self.comp[lane].value(),
            Summation::Fast => self.plain[lane],
        }
    }

    #[inline]
    pub fn add_vec(&mut self, offset: usize, v: &Vector3<f64>) {
        for i in 0..3 {
            self.add(offset + i, v[i]);
        }
    }

    #[inline]
    pub fn add_mat(&mut self, offset: usize, m: &Matrix3<f64>) {
        for c in 0..3 {
            for r in 0..3 {
                self.add(offset + 3 * c + r, m[(r, c)]);
            }
        }
    }

    pub fn vec(&self, offset: usize) -> Vector3<f64> {
        Vector3::new(self.get(offset), self.get(offset + 1), self.get(offset + 2))
    }

    pub fn mat(&self, offset: usize) -> Matrix3<f64> {
        Matrix3::from_fn(|r, c| self.get(offset + 3 * c + r))
    }
}

/// Sums a slice in index order under the given mode.
pub fn sum_slice(values: &[f64], mode: Summation) -> f64 {
    let mut acc = Accumulator::<1>::new(mode);
    for &v in values {
        acc.add(0, v);
    }
    acc.get(0)
}
