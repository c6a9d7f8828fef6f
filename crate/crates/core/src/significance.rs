//! Almost Stochastic Order (ASO) comparison of score samples.
//!
//! The violation ratio compares the empirical quantile functions of two
//! samples on a fixed grid; `epsilon_min` lowers it by a bootstrap confidence
//! margin. A sample A is almost stochastically dominant over B when
//! `epsilon_min(A, B)` is strictly below the threshold (0.5 by default).

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSample {
    #[serde(rename = "model")]
    pub model_id: String,
    pub scores: Vec<f64>,
}

impl ScoreSample {
    pub fn new(model_id: impl Into<String>, scores: Vec<f64>) -> Result<Self> {
        let s = ScoreSample {
            model_id: model_id.into(),
            scores,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.scores.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "model {:?} needs at least 2 scores",
                self.model_id
            )));
        }
        if self.scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "model {:?} has a non-finite score",
                self.model_id
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsoResult {
    pub epsilon_hat: f64,
    pub sigma_boot: f64,
    pub epsilon_min: f64,
    pub alpha: f64,
    pub dominant: bool,
}

#[derive(Debug, Clone)]
pub struct AsoOptions {
    pub grid_size: usize,
    pub bootstrap_iters: usize,
    pub threshold: f64,
    pub seed: u64,
}

impl Default for AsoOptions {
    fn default() -> Self {
        AsoOptions {
            grid_size: 1000,
            bootstrap_iters: 1000,
            threshold: 0.5,
            seed: 0,
        }
    }
}

pub const MIN_BOOTSTRAP_ITERS: usize = 100;

/// Nearest-rank quantile of an ascending slice: element ⌈t·n⌉ (1-based).
fn quantile(sorted: &[f64], t: f64) -> f64 {
    let n = sorted.len();
    let rank = (t * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

fn violation_ratio_sorted(a: &[f64], b: &[f64], grid_size: usize) -> f64 {
    let mut violation = 0.0;
    let mut total = 0.0;
    for i in 1..=grid_size {
        let t = (i as f64 - 0.5) / grid_size as f64;
        let diff = quantile(b, t) - quantile(a, t);
        let sq = diff * diff;
        if diff > 0.0 {
            violation += sq;
        }
        total += sq;
    }
    if total == 0.0 {
        0.5
    } else {
        violation / total
    }
}

/// Share of the squared quantile gap where B lies above A. Higher scores are better,
/// so 0 means A is never worse than B; identical quantile functions give 0.5.
pub fn violation_ratio(a: &ScoreSample, b: &ScoreSample, grid_size: usize) -> Result<f64> {
    a.validate()?;
    b.validate()?;
    if grid_size == 0 {
        return Err(Error::InvalidInput("grid size must be positive".into()));
    }
    Ok(violation_ratio_sorted(&sorted(&a.scores), &sorted(&b.scores), grid_size))
}

pub fn aso(a: &ScoreSample, b: &ScoreSample, alpha: f64, options: &AsoOptions) -> Result<AsoResult> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidInput(format!("alpha {alpha} outside (0, 1)")));
    }
    if options.bootstrap_iters < MIN_BOOTSTRAP_ITERS {
        return Err(Error::InvalidInput(format!(
            "at least {MIN_BOOTSTRAP_ITERS} bootstrap iterations required, got {}",
            options.bootstrap_iters
        )));
    }
    let epsilon_hat = violation_ratio(a, b, options.grid_size)?;

    // Draw every resample index up front so the result does not depend on
    // how the replicates are scheduled.
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let (na, nb) = (a.scores.len(), b.scores.len());
    let draws: Vec<(Vec<usize>, Vec<usize>)> = (0..options.bootstrap_iters)
        .map(|_| {
            let ia = (0..na).map(|_| rng.random_range(0..na)).collect();
            let ib = (0..nb).map(|_| rng.random_range(0..nb)).collect();
            (ia, ib)
        })
        .collect();
    let replicates: Vec<f64> = draws
        .par_iter()
        .map(|(ia, ib)| {
            let ra = sorted(&ia.iter().map(|&i| a.scores[i]).collect::<Vec<_>>());
            let rb = sorted(&ib.iter().map(|&i| b.scores[i]).collect::<Vec<_>>());
            violation_ratio_sorted(&ra, &rb, options.grid_size)
        })
        .collect();
    let mean = replicates.iter().sum::<f64>() / replicates.len() as f64;
    let var = replicates.iter().map(|r| (r - mean).powi(2)).sum::<f64>()
        / (replicates.len() - 1) as f64;
    let sigma_boot = var.sqrt();

    let z = Normal::standard().inverse_cdf(1.0 - alpha);
    let epsilon_min = (epsilon_hat - z * sigma_boot).clamp(0.0, 1.0);
    Ok(AsoResult {
        epsilon_hat,
        sigma_boot,
        epsilon_min,
        alpha,
        dominant: epsilon_min < options.threshold,
    })
}

pub fn bonferroni(alpha: f64, comparisons: usize) -> Result<f64> {
    if comparisons == 0 {
        return Err(Error::InvalidInput("Bonferroni correction needs m >= 1".into()));
    }
    Ok(alpha / comparisons as f64)
}

#[derive(Debug, Clone, Serialize)]
pub struct AsoMatrix {
    pub models: Vec<String>,
    /// Significance level before correction.
    pub alpha: f64,
    pub adjusted_alpha: f64,
    pub comparisons: usize,
    /// `cells[i][j]` compares model i (as A) against model j (as B); `None` on the diagonal.
    pub cells: Vec<Vec<Option<AsoResult>>>,
}

impl AsoMatrix {
    /// Tab-separated grid of `epsilon_min`; dominant cells carry a trailing `*`.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("A\\B");
        for m in &self.models {
            out.push('\t');
            out.push_str(m);
        }
        out.push('\n');
        for (i, row) in self.cells.iter().enumerate() {
            out.push_str(&self.models[i]);
            for cell in row {
                out.push('\t');
                match cell {
                    None => out.push('-'),
                    Some(r) => {
                        out.push_str(&format!("{:.4}", r.epsilon_min));
                        if r.dominant {
                            out.push('*');
                        }
                    }
                }
            }
            out.push('\n');
        }
        out
    }
}

/// ASO for every ordered pair, with alpha divided by the number of ordered pairs.
pub fn compare_all(samples: &[ScoreSample], alpha: f64, options: &AsoOptions) -> Result<AsoMatrix> {
    if samples.len() < 2 {
        return Err(Error::InvalidInput("need at least 2 score samples".into()));
    }
    let mut seen = HashSet::new();
    for s in samples {
        if !seen.insert(s.model_id.as_str()) {
            return Err(Error::InvalidInput(format!("duplicate model id {:?}", s.model_id)));
        }
    }
    let n = samples.len();
    let comparisons = n * (n - 1);
    let adjusted = bonferroni(alpha, comparisons)?;
    let mut cells = vec![vec![None; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                cells[i][j] = Some(aso(&samples[i], &samples[j], adjusted, options)?);
            }
        }
    }
    Ok(AsoMatrix {
        models: samples.iter().map(|s| s.model_id.clone()).collect(),
        alpha,
        adjusted_alpha: adjusted,
        comparisons,
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(id: &str, xs: &[f64]) -> ScoreSample {
        ScoreSample::new(id, xs.to_vec()).unwrap()
    }

    #[test]
    fn full_dominance_has_no_violation() {
        let a = sample("a", &[1.0, 1.0, 1.0]);
        let b = sample("b", &[0.0, 0.0, 0.0]);
        assert_eq!(violation_ratio(&a, &b, 1000).unwrap(), 0.0);
        assert_eq!(violation_ratio(&b, &a, 1000).unwrap(), 1.0);
    }

    #[test]
    fn identical_samples_give_one_half() {
        let a = sample("a", &[0.4, 0.5, 0.45]);
        assert_eq!(violation_ratio(&a, &a, 1000).unwrap(), 0.5);
    }

    #[test]
    fn nearest_rank_quantile() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&xs, 0.0005), 1.0);
        assert_eq!(quantile(&xs, 0.25), 1.0);
        assert_eq!(quantile(&xs, 0.2505), 2.0);
        assert_eq!(quantile(&xs, 0.9995), 4.0);
    }

    #[test]
    fn separated_samples_dominate() {
        let a = sample("a", &[0.80, 0.81, 0.82, 0.83, 0.84]);
        let b = sample("b", &[0.40, 0.41, 0.42, 0.43, 0.44]);
        let r = aso(&a, &b, 0.05, &AsoOptions::default()).unwrap();
        assert_eq!(r.epsilon_hat, 0.0);
        assert!(r.epsilon_min < 0.05);
        assert!(r.dominant);
        let back = aso(&b, &a, 0.05, &AsoOptions::default()).unwrap();
        assert!(!back.dominant);
    }

    #[test]
    fn constant_identical_samples_never_dominate() {
        let a = sample("a", &[0.5, 0.5, 0.5]);
        let r = aso(&a, &a, 0.05, &AsoOptions::default()).unwrap();
        assert_eq!(r.epsilon_hat, 0.5);
        assert_eq!(r.epsilon_min, 0.5);
        assert!(!r.dominant);
    }

    #[test]
    fn rejects_bad_parameters() {
        let a = sample("a", &[0.5, 0.6]);
        let few = AsoOptions {
            bootstrap_iters: 99,
            ..AsoOptions::default()
        };
        assert!(aso(&a, &a, 0.05, &few).is_err());
        assert!(aso(&a, &a, 0.0, &AsoOptions::default()).is_err());
        assert!(aso(&a, &a, 1.0, &AsoOptions::default()).is_err());
        assert!(ScoreSample::new("x", vec![1.0]).is_err());
        assert!(ScoreSample::new("x", vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn bonferroni_examples() {
        assert_eq!(bonferroni(0.05, 1).unwrap(), 0.05);
        assert!((bonferroni(0.05, 21).unwrap() - 0.002_380_952_380_952_381).abs() < 1e-15);
        assert!((bonferroni(0.05, 5).unwrap() - 0.01).abs() < 1e-15);
        assert!(bonferroni(0.05, 0).is_err());
    }

    #[test]
    fn matrix_shape_and_duplicates() {
        let opts = AsoOptions {
            bootstrap_iters: 100,
            grid_size: 100,
            ..AsoOptions::default()
        };
        let s = vec![sample("x", &[0.9, 0.91, 0.92]), sample("y", &[0.1, 0.11, 0.12])];
        let m = compare_all(&s, 0.05, &opts).unwrap();
        assert_eq!(m.comparisons, 2);
        assert!(m.cells[0][0].is_none() && m.cells[1][1].is_none());
        assert!(m.cells[0][1].unwrap().dominant);
        assert!(!m.cells[1][0].unwrap().dominant);
        assert!(m.to_tsv().starts_with("A\\B\tx\ty\nx\t-\t0.0000*\n"));
        let dup = vec![sample("x", &[0.1, 0.2]), sample("x", &[0.3, 0.4])];
        assert!(compare_all(&dup, 0.05, &opts).is_err());
        assert!(compare_all(&dup[..1], 0.05, &opts).is_err());
    }
}
