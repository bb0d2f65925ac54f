//! Gaussian radial-basis-function network with three output channels.

use nalgebra::{DMatrix, DVector, Vector3};

use crate::error::{DpError, Result};

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// Width multiplier applied to the mean nearest-neighbour center distance.
pub const WIDTH_FACTOR: f64 = 1.5;

#[derive(Debug, Clone, PartialEq)]
pub struct RbfNetwork {
    /// One center per row.
    pub centers: DMatrix<f64>,
    pub widths: DVector<f64>,
    /// `n_nodes x 3`.
    pub weights: DMatrix<f64>,
}

impl RbfNetwork {
    /// Network with Halton-placed centers and zero weights.
    pub fn new(ranges: &[(f64, f64)], n_nodes: usize, seed: u64) -> Result<Self> {
        let (centers, widths) = build_centers(ranges, n_nodes, seed)?;
        Ok(Self {
            weights: DMatrix::zeros(n_nodes, 3),
            centers,
            widths,
        })
    }

    pub fn n_inputs(&self) -> usize {
        self.centers.ncols()
    }

    pub fn n_nodes(&self) -> usize {
        self.centers.nrows()
    }

    pub fn basis(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        basis_eval(&self.centers, &self.widths, z)
    }

    pub fn output(&self, z: &DVector<f64>) -> Result<Vector3<f64>> {
        nn_output(&self.weights, &self.basis(z)?)
    }
}

fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut scale = inv;
    let mut acc = 0.0;
    while index > 0 {
        acc += (index % base) as f64 * scale;
        index /= base;
        scale *= inv;
    }
    acc
}

/// Halton placement inside the box given by `ranges`; the seed offsets the sequence start.
///
/// Widths are `WIDTH_FACTOR` times the mean nearest-neighbour distance, shared by all nodes.
pub fn build_centers(ranges: &[(f64, f64)], n_nodes: usize, seed: u64) -> Result<(DMatrix<f64>, DVector<f64>)> {
    if ranges.is_empty() || ranges.len() > PRIMES.len() {
        return Err(DpError::Config(format!("RBF input count {} unsupported", ranges.len())));
    }
    if n_nodes == 0 {
        return Err(DpError::Config("RBF network needs at least one node".into()));
    }
    if let Some((lo, hi)) = ranges
        .iter()
        .find(|(lo, hi)| !(lo <= hi) || !lo.is_finite() || !hi.is_finite())
    {
        return Err(DpError::Config(format!("empty RBF center range [{lo}, {hi}]")));
    }
    let offset = 1 + seed % 1_000_003;
    let centers = DMatrix::from_fn(n_nodes, ranges.len(), |i, j| {
        let (lo, hi) = ranges[j];
        lo + (hi - lo) * radical_inverse(offset + i as u64, PRIMES[j])
    });
    let width = WIDTH_FACTOR * mean_nearest_distance(&centers);
    let width = if width > 0.0 { width } else { 1.0 };
    Ok((centers, DVector::from_element(n_nodes, width)))
}

fn mean_nearest_distance(centers: &DMatrix<f64>) -> f64 {
    let n = centers.nrows();
    if n < 2 {
        return 0.0;
    }
    let total: f64 = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j != i)
                .map(|j| (centers.row(i) - centers.row(j)).norm())
                .fold(f64::INFINITY, f64::min)
        })
        .sum();
    total / n as f64
}

pub fn basis_eval(centers: &DMatrix<f64>, widths: &DVector<f64>, z: &DVector<f64>) -> Result<DVector<f64>> {
    if z.len() != centers.ncols() || widths.len() != centers.nrows() {
        return Err(DpError::Shape(format!(
            "RBF input of length {} for {} x {} centers",
            z.len(),
            centers.nrows(),
            centers.ncols()
        )));
    }
    Ok(DVector::from_fn(centers.nrows(), |i, _| {
        let d2: f64 = centers
            .row(i)
            .iter()
            .zip(z.iter())
            .map(|(c, x)| (x - c) * (x - c))
            .sum();
        (-d2 / (widths[i] * widths[i])).exp()
    }))
}

/// `W^T S`.
pub fn nn_output(weights: &DMatrix<f64>, basis: &DVector<f64>) -> Result<Vector3<f64>> {
    if weights.ncols() != 3 || weights.nrows() != basis.len() {
        return Err(DpError::Shape(format!(
            "weights {} x {} against {} basis values",
            weights.nrows(),
            weights.ncols(),
            basis.len()
        )));
    }
    let out = weights.tr_mul(basis);
    Ok(Vector3::new(out[0], out[1], out[2]))
}
