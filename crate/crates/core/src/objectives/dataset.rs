//! In-memory datasets for the logistic and MLP objectives.

use std::path::Path;

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::objectives::idx;

/// A labeled dataset. `y` holds the +1/-1 targets used by the binary
/// objectives; `labels` keeps the original class ids for partition schemes
/// that need them.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub x: Array2<f64>,
    pub y: Array1<f64>,
    pub labels: Vec<usize>,
}

impl Dataset {
    pub fn n_samples(&self) -> usize {
        self.x.nrows()
    }

    pub fn dimension(&self) -> usize {
        self.x.ncols()
    }

    /// Two Gaussian blobs at +/- (separation/2) along a random direction.
    /// Classes alternate so any prefix is roughly balanced.
    pub fn synthetic_two_class(n: usize, d: usize, separation: f64, seed: u64) -> Result<Self> {
        if n < 2 || d == 0 {
            return Err(Error::InvalidObjective(format!(
                "synthetic dataset needs n >= 2 and d >= 1, got n={n}, d={d}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut direction: Array1<f64> =
            Array1::from_iter((0..d).map(|_| StandardNormal.sample(&mut rng)));
        let norm = direction.dot(&direction).sqrt();
        if norm < 1e-12 {
            direction[0] = 1.0;
        } else {
            direction /= norm;
        }

        let mut x = Array2::zeros((n, d));
        let mut y = Array1::zeros(n);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let class = i % 2;
            let sign = if class == 0 { 1.0 } else { -1.0 };
            for j in 0..d {
                let noise: f64 = StandardNormal.sample(&mut rng);
                x[[i, j]] = sign * 0.5 * separation * direction[j] + noise;
            }
            y[i] = sign;
            labels.push(class);
        }
        Ok(Dataset { x, y, labels })
    }

    /// Loads a binary classification set from IDX image/label files, keeping
    /// only samples of the two requested classes. Pixels are scaled to
    /// [0, 1].
    pub fn binary_from_idx(
        images: &Path,
        labels: &Path,
        class_pos: usize,
        class_neg: usize,
        limit: Option<usize>,
    ) -> Result<Self> {
        let (imgs, rows, cols) = idx::read_images(images)?;
        let lbls = idx::read_labels(labels)?;
        if imgs.len() != lbls.len() {
            return Err(Error::IdxFormat(format!(
                "image count {} does not match label count {}",
                imgs.len(),
                lbls.len()
            )));
        }
        let d = rows * cols;
        let mut rows_out: Vec<(Vec<f64>, f64, usize)> = Vec::new();
        for (img, &lbl) in imgs.iter().zip(lbls.iter()) {
            let lbl = lbl as usize;
            if lbl != class_pos && lbl != class_neg {
                continue;
            }
            let pixels: Vec<f64> = img.iter().map(|&p| p as f64 / 255.0).collect();
            let y = if lbl == class_pos { 1.0 } else { -1.0 };
            rows_out.push((pixels, y, lbl));
            if let Some(cap) = limit {
                if rows_out.len() >= cap {
                    break;
                }
            }
        }
        if rows_out.len() < 2 {
            return Err(Error::InvalidObjective(format!(
                "too few samples of classes {class_pos}/{class_neg}: {}",
                rows_out.len()
            )));
        }
        let n = rows_out.len();
        let mut x = Array2::zeros((n, d));
        let mut y = Array1::zeros(n);
        let mut labels_out = Vec::with_capacity(n);
        for (i, (pixels, target, lbl)) in rows_out.into_iter().enumerate() {
            for (j, p) in pixels.into_iter().enumerate() {
                x[[i, j]] = p;
            }
            y[i] = target;
            labels_out.push(lbl);
        }
        Ok(Dataset {
            x,
            y,
            labels: labels_out,
        })
    }

    /// Seeded Gaussian features with random +/-1 targets, for tests that
    /// only need shape, not structure.
    pub fn random_unstructured(n: usize, d: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::from_shape_fn((n, d), |_| StandardNormal.sample(&mut rng));
        let y = Array1::from_shape_fn(n, |_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 });
        let labels = y.iter().map(|&v| if v > 0.0 { 1 } else { 0 }).collect();
        Dataset { x, y, labels }
    }
}
