//! Deterministic weight and family generation for ensembles.
//!
//! Every sample's randomness comes from a ChaCha stream keyed by
//! `(config seed, sample id)`, so runs are reproducible independent of
//! sample order or thread count.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sparseform_core::dyadic::{Carrier, Grid, StepFn};
use sparseform_core::error::Result;
use sparseform_core::sparse::{random_sparse_family, SparseFamily};

use crate::config::{EnsembleSpec, ExperimentConfig, FamilySpec, WeightSpec};

const SEED_STRIDE: u64 = 0x9E37_79B9_7F4A_7C15;

/// Independent stream for sample `i` under the given master seed; `salt`
/// separates the different consumers (w, sigma, family, optimizer).
pub fn sample_rng(seed: u64, i: u64, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(
        seed ^ SEED_STRIDE.wrapping_mul(2 * i + 1) ^ salt.wrapping_mul(0xD1B5_4A32_D192_ED03),
    )
}

/// Realize one generator spec on the grid. Strictly positive by
/// construction; only `lognormal` draws from the stream.
pub fn build_weight(spec: &WeightSpec, grid: Grid, rng: &mut ChaCha8Rng) -> Result<StepFn> {
    let leaves = grid.leaf_count();
    let values: Vec<f64> = match spec {
        WeightSpec::Constant { c } => vec![*c; leaves],
        WeightSpec::Power { a } => {
            let scale = grid.leaf_measure();
            (0..leaves).map(|k| ((k as f64 + 0.5) * scale).powf(*a)).collect()
        }
        WeightSpec::Lognormal { mu, sigma } => (0..leaves)
            .map(|_| {
                let z: f64 = rng.sample(StandardNormal);
                (mu + sigma * z).exp()
            })
            .collect(),
        WeightSpec::Spike { base, height, position } => {
            let mut v = vec![*base; leaves];
            v[*position] = *height;
            v
        }
    };
    StepFn::new(grid, values)
}

/// The crossed generator menu: per-sample parameters drawn from the stream,
/// kinds rotated so consecutive samples cover the lognormal/spike/power
/// pairs evenly.
fn crossed_spec(slot: usize, rng: &mut ChaCha8Rng, leaves: usize) -> WeightSpec {
    match slot % 3 {
        0 => {
            let sigma = 0.3 + 0.5 * rng.gen::<f64>();
            WeightSpec::Lognormal { mu: 0.0, sigma }
        }
        1 => {
            let height = 2f64.powi(rng.gen_range(1..=5));
            let position = rng.gen_range(0..leaves);
            WeightSpec::Spike { base: 1.0, height, position }
        }
        _ => {
            let a = [-1.2, -0.6, 0.5, 0.9, 1.5][rng.gen_range(0..5)];
            WeightSpec::Power { a }
        }
    }
}

/// One generated `(w, sigma)` instance plus its human-readable label.
pub struct SamplePair {
    pub w: StepFn,
    pub sigma: StepFn,
    pub label: String,
}

pub fn sample_pair(config: &ExperimentConfig, grid: Grid, i: usize) -> Result<SamplePair> {
    let mut rng_w = sample_rng(config.seed, i as u64, 1);
    let mut rng_s = sample_rng(config.seed, i as u64, 2);
    let (spec_w, spec_s) = match &config.weights {
        EnsembleSpec::Fixed { w, sigma } => (w.clone(), sigma.clone()),
        EnsembleSpec::Crossed => {
            let leaves = grid.leaf_count();
            // rotate so the 3x3 kind grid is covered every nine samples
            (crossed_spec(i, &mut rng_w, leaves), crossed_spec(i / 3 + 1, &mut rng_s, leaves))
        }
    };
    let w = build_weight(&spec_w, grid, &mut rng_w)?;
    let sigma = build_weight(&spec_s, grid, &mut rng_s)?;
    let label = format!("{}x{}", spec_w.label(), spec_s.label());
    Ok(SamplePair { w, sigma, label })
}

/// The family for sample `i`: seeded thinning or the leftmost chain, always
/// Lebesgue-sparse at factor 1/2.
pub fn sample_family(config: &ExperimentConfig, grid: Grid, i: usize) -> Result<SparseFamily> {
    match &config.family {
        FamilySpec::Random { density } => {
            let seed = sample_rng(config.seed, i as u64, 3).gen::<u64>();
            random_sparse_family(grid, Carrier::Lebesgue, 0.5, *density, seed)
        }
        FamilySpec::Chain => {
            let cubes = (0..=grid.depth())
                .map(|l| sparseform_core::dyadic::Cube::new(l, 0))
                .collect::<Result<Vec<_>>>()?;
            SparseFamily::verified(grid, cubes, Carrier::Lebesgue, 0.5)
        }
    }
}
