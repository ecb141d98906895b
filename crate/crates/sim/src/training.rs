//! Reference cone/non-cone SVM trained on rendered patches.
//!
//! Training uses the Pegasos stochastic sub-gradient solver with an
//! unregularised bias. The result is deterministic for a given seed.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use conetrack_core::vision::{hog_descriptor, ConeColor, HogConfig, SvmModel, VisionError};

use crate::patch::{patch_size, render_patch, PatchKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub lambda: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Ranges at which example patches are rendered (m).
    pub ranges: Vec<f64>,
    pub lightings: Vec<f64>,
    pub focal: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            lambda: 1e-4,
            epochs: 30,
            seed: 11,
            ranges: (3..=20).map(f64::from).collect(),
            lightings: vec![0.3, 0.6, 1.0],
            focal: 600.0,
        }
    }
}

/// Labelled descriptors: `+1` for cones, `−1` for tyre stacks, walls and bare ground.
pub fn training_set(hog: &HogConfig, cfg: &TrainingConfig) -> Result<Vec<(Vec<f64>, f64)>, VisionError> {
    let kinds = [
        (PatchKind::Cone(ConeColor::Red), 1.0),
        (PatchKind::Cone(ConeColor::Blue), 1.0),
        (PatchKind::Cone(ConeColor::Yellow), 1.0),
        (PatchKind::TyreStack, -1.0),
        (PatchKind::Wall, -1.0),
        (PatchKind::Background, -1.0),
    ];
    let mut out = Vec::new();
    let mut seed = cfg.seed.wrapping_mul(1_000_003);
    for &range in &cfg.ranges {
        let (w, h) = patch_size(range, cfg.focal);
        for &lighting in &cfg.lightings {
            for &(kind, label) in &kinds {
                seed = seed.wrapping_add(1);
                let patch = render_patch(kind, w, h, lighting, seed);
                out.push((hog_descriptor(&patch.to_gray(), hog)?, label));
            }
        }
    }
    Ok(out)
}

/// Pegasos: step `1/(λt)` on the hinge sub-gradient, one sample at a time.
pub fn pegasos(samples: &[(Vec<f64>, f64)], lambda: f64, epochs: usize, seed: u64) -> (Vec<f64>, f64) {
    let dim = samples.first().map_or(0, |s| s.0.len());
    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = 0usize;
    for _ in 0..epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (lambda * t as f64);
            let (x, y) = (&samples[i].0, samples[i].1);
            let margin = y * (w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + b);
            w.iter_mut().for_each(|wi| *wi *= 1.0 - eta * lambda);
            if margin < 1.0 {
                w.iter_mut().zip(x).for_each(|(wi, xi)| *wi += eta * y * xi);
                // the bias is not shrunk, so give it a bounded step
                b += y * eta.min(1.0) * 0.1;
            }
        }
    }
    (w, b)
}

pub fn train_reference_model(hog: &HogConfig, cfg: &TrainingConfig) -> Result<SvmModel, VisionError> {
    hog.validate()?;
    let samples = training_set(hog, cfg)?;
    let (w, b) = pegasos(&samples, cfg.lambda, cfg.epochs, cfg.seed);
    SvmModel::new(hog.config_hash(), w, b)
}
