//! Accuracy metrics and cross-validation: random layer-level splits and
//! leave-networks-out splits over whole networks.
//!
//! Every fold draws its randomness from a stream derived from (seed, fold
//! index), so parallel and serial execution, and repeated runs, agree
//! exactly.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::EnergyDataset;
use crate::error::{Error, Result};
use crate::predictor::{self, ModelKind};
use crate::regression::{self, RegressionModel};

pub const DEFAULT_SEED: u64 = 42;

/// How train and test sets are formed.
#[derive(Debug, Clone, PartialEq)]
pub enum SplitMode {
    /// Shuffle individual rows; `ratio` is the train fraction.
    RandomLayers { ratio: f64, repeats: usize },
    /// Partition the networks into folds of `test_networks` held-out nets.
    LeaveNetworksOut { test_networks: usize, folds: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitPlan {
    pub mode: SplitMode,
    pub seed: u64,
}

impl SplitPlan {
    pub fn random_layers(ratio: f64, repeats: usize, seed: u64) -> Result<SplitPlan> {
        if !ratio.is_finite() || ratio <= 0.0 || ratio >= 1.0 {
            return Err(Error::invalid(
                "split plan",
                format!("ratio must lie in (0,1), found {ratio}"),
            ));
        }
        if repeats == 0 {
            return Err(Error::invalid("split plan", "repeats must be positive"));
        }
        Ok(SplitPlan {
            mode: SplitMode::RandomLayers { ratio, repeats },
            seed,
        })
    }

    pub fn leave_networks_out(test_networks: usize, folds: usize, seed: u64) -> Result<SplitPlan> {
        if test_networks == 0 || folds == 0 {
            return Err(Error::invalid(
                "split plan",
                "test_networks and folds must be positive",
            ));
        }
        Ok(SplitPlan {
            mode: SplitMode::LeaveNetworksOut {
                test_networks,
                folds,
            },
            seed,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricKind {
    RelAcc,
    RmspeAcc,
}

impl MetricKind {
    pub fn label(&self) -> &'static str {
        match self {
            MetricKind::RelAcc => "relacc",
            MetricKind::RmspeAcc => "rmspe",
        }
    }
}

/// Per-fold accuracies with their mean and sample standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub metric: MetricKind,
    pub seed: u64,
    pub per_fold: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

/// What gets fitted inside each fold.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelRecipe {
    /// One pooled regression over all training rows on the named feature
    /// columns; accuracy is averaged per test row.
    PooledLayers { features: Vec<String> },
    /// One single-feature model per layer-type bucket; per-kind predictions
    /// are summed per network and accuracy is scored on network totals.
    LayerTypeTotals,
}

/// Relative accuracy in percent: `100 - |predicted - measured|/measured * 100`.
/// Unbounded below; no clamping.
pub fn relative_accuracy(predicted: f64, measured: f64) -> Result<f64> {
    if !measured.is_finite() || measured <= 0.0 {
        return Err(Error::invalid(
            "relative_accuracy",
            format!("measured energy must be positive, found {measured}"),
        ));
    }
    Ok(100.0 - (predicted - measured).abs() / measured * 100.0)
}

/// `100 - RMSPE` over (predicted, measured) pairs.
pub fn rmspe_accuracy(pairs: &[(f64, f64)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::invalid("rmspe_accuracy", "no pairs"));
    }
    let mut sum_sq = 0.0;
    for &(predicted, measured) in pairs {
        if !measured.is_finite() || measured <= 0.0 {
            return Err(Error::invalid(
                "rmspe_accuracy",
                format!("measured energy must be positive, found {measured}"),
            ));
        }
        let ratio = (predicted - measured) / measured;
        sum_sq += ratio * ratio;
    }
    Ok(100.0 - 100.0 * (sum_sq / pairs.len() as f64).sqrt())
}

/// Sample (n-1) standard deviation; 0 for fewer than two values.
pub fn sample_std(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (ss / (values.len() - 1) as f64).sqrt()
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Deterministic per-fold generator: one ChaCha stream per fold index.
fn fold_rng(seed: u64, fold: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(fold as u64 + 1);
    rng
}

fn subset_dataset(dataset: &EnergyDataset, indices: &[usize]) -> Result<EnergyDataset> {
    EnergyDataset::new(
        dataset.provenance.clone(),
        dataset.feature_names.clone(),
        indices.iter().map(|&i| dataset.rows[i].clone()).collect(),
    )
}

fn score_fold(metric: MetricKind, pairs: &[(f64, f64)]) -> Result<f64> {
    match metric {
        MetricKind::RelAcc => {
            let accs: Vec<f64> = pairs
                .iter()
                .map(|&(p, m)| relative_accuracy(p, m))
                .collect::<Result<_>>()?;
            Ok(mean(&accs))
        }
        MetricKind::RmspeAcc => rmspe_accuracy(pairs),
    }
}

fn pooled_model(
    dataset: &EnergyDataset,
    indices: &[usize],
    features: &[String],
) -> Result<RegressionModel> {
    let sub = subset_dataset(dataset, indices)?;
    let x = sub.feature_matrix(features)?;
    regression::fit_ols(features, &x, &sub.energies(), 1)
}

/// (predicted, measured) pairs for one fold under the recipe.
fn fold_pairs(
    dataset: &EnergyDataset,
    recipe: &ModelRecipe,
    train: &[usize],
    test: &[usize],
) -> Result<Vec<(f64, f64)>> {
    if train.is_empty() || test.is_empty() {
        return Err(Error::invalid(
            "cross_validate",
            "degenerate fold: empty train or test set",
        ));
    }
    match recipe {
        ModelRecipe::PooledLayers { features } => {
            let model = pooled_model(dataset, train, features)?;
            let mut pairs = Vec::with_capacity(test.len());
            for &i in test {
                let row = &dataset.rows[i];
                let x: Vec<f64> = features
                    .iter()
                    .map(|n| {
                        dataset
                            .feature_index(n)
                            .map(|j| row.features[j])
                            .ok_or_else(|| {
                                Error::invalid("cross_validate", format!("no feature column '{n}'"))
                            })
                    })
                    .collect::<Result<_>>()?;
                pairs.push((model.predict(&x), row.energy_mj));
            }
            Ok(pairs)
        }
        ModelRecipe::LayerTypeTotals => {
            let train_set = subset_dataset(dataset, train)?;

            // Train one model per kind that appears in the test rows.
            let mut kinds: Vec<ModelKind> = Vec::new();
            for &i in test {
                let kind = ModelKind::from_label(&dataset.rows[i].layer_kind).ok_or_else(|| {
                    Error::invalid(
                        "cross_validate",
                        format!("unmodelled layer kind '{}'", dataset.rows[i].layer_kind),
                    )
                })?;
                if !kinds.contains(&kind) {
                    kinds.push(kind);
                }
            }
            kinds.sort();
            let mut models = Vec::new();
            for kind in kinds {
                let model = predictor::train_layer_type_model(&train_set, kind).map_err(|e| {
                    Error::invalid("cross_validate", format!("degenerate fold: {e}"))
                })?;
                models.push((kind, model));
            }

            // Sum per-kind predictions and measurements per test network.
            let mut networks: Vec<String> = Vec::new();
            for &i in test {
                let net = dataset.rows[i].network.clone();
                if !networks.contains(&net) {
                    networks.push(net);
                }
            }
            networks.sort();
            let mut pairs = Vec::with_capacity(networks.len());
            for net in networks {
                let mut predicted = 0.0;
                let mut measured = 0.0;
                for &i in test {
                    let row = &dataset.rows[i];
                    if row.network != net {
                        continue;
                    }
                    let kind = ModelKind::from_label(&row.layer_kind).expect("checked above");
                    let (_, model) = models
                        .iter()
                        .find(|(k, _)| *k == kind)
                        .expect("model trained for every test kind");
                    let j = dataset
                        .feature_index(kind.feature_name())
                        .expect("feature checked during training");
                    predicted += model.predict(&[row.features[j]]);
                    measured += row.energy_mj;
                }
                pairs.push((predicted, measured));
            }
            Ok(pairs)
        }
    }
}

/// Run the plan: fit the recipe on each fold's training rows, score the test
/// rows, and report mean and sample standard deviation across folds.
pub fn cross_validate(
    dataset: &EnergyDataset,
    plan: &SplitPlan,
    recipe: &ModelRecipe,
    metric: MetricKind,
) -> Result<EvalReport> {
    let n = dataset.rows.len();
    let mut per_fold = Vec::new();

    match &plan.mode {
        SplitMode::RandomLayers { ratio, repeats } => {
            if n < 2 {
                return Err(Error::invalid(
                    "cross_validate",
                    format!("need at least 2 rows, found {n}"),
                ));
            }
            let n_train = ((*ratio * n as f64).round() as usize).clamp(1, n - 1);
            for fold in 0..*repeats {
                let mut indices: Vec<usize> = (0..n).collect();
                indices.shuffle(&mut fold_rng(plan.seed, fold));
                let (train, test) = indices.split_at(n_train);
                let pairs = fold_pairs(dataset, recipe, train, test)?;
                per_fold.push(score_fold(metric, &pairs)?);
            }
        }
        SplitMode::LeaveNetworksOut {
            test_networks,
            folds,
        } => {
            let mut networks = dataset.networks();
            let n_net = networks.len();
            if n_net < *folds {
                return Err(Error::invalid(
                    "cross_validate",
                    format!("network count {n_net} is less than fold count {folds}"),
                ));
            }
            let expected_folds = n_net.div_ceil(*test_networks);
            if *folds != expected_folds {
                return Err(Error::invalid(
                    "cross_validate",
                    format!(
                        "{folds} folds of {test_networks} test networks do not partition {n_net} networks (expected {expected_folds} folds)"
                    ),
                ));
            }
            networks.shuffle(&mut fold_rng(plan.seed, 0));
            for (fold, test_nets) in networks.chunks(*test_networks).enumerate() {
                let _ = fold;
                let mut train = Vec::new();
                let mut test = Vec::new();
                for (i, row) in dataset.rows.iter().enumerate() {
                    if test_nets.contains(&row.network) {
                        test.push(i);
                    } else {
                        train.push(i);
                    }
                }
                let pairs = fold_pairs(dataset, recipe, &train, &test)?;
                per_fold.push(score_fold(metric, &pairs)?);
            }
        }
    }

    Ok(EvalReport {
        metric,
        seed: plan.seed,
        mean: mean(&per_fold),
        std: sample_std(&per_fold),
        per_fold,
    })
}
