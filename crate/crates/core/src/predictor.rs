//! Layer-type energy models: train a single-feature regression per layer
//! kind, predict per-kind and whole-network inference energy, and persist
//! model bundles as JSON.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::EnergyDataset;
use crate::error::{Error, Result};
use crate::features::{self, AggregateKind, FeatureVector, MAC_SUM, OP_SUM};
use crate::model::ConvNetModel;
use crate::regression::{self, RegressionModel};

pub const BUNDLE_FORMAT: &str = "convwatt-bundle";
pub const BUNDLE_VERSION: u32 = 1;

/// The three modelled layer-type buckets. Max and average pooling share one
/// Pool model whose feature is the combined op count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ModelKind {
    Conv,
    Pool,
    Fc,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Conv, ModelKind::Pool, ModelKind::Fc];

    pub fn label(&self) -> &'static str {
        match self {
            ModelKind::Conv => "Conv",
            ModelKind::Pool => "Pool",
            ModelKind::Fc => "Fc",
        }
    }

    /// The aggregate feature this kind's model is trained on.
    pub fn feature_name(&self) -> &'static str {
        match self {
            ModelKind::Conv | ModelKind::Fc => MAC_SUM,
            ModelKind::Pool => OP_SUM,
        }
    }

    pub fn from_label(label: &str) -> Option<ModelKind> {
        match label {
            "Conv" | "DepthwiseConv" => Some(ModelKind::Conv),
            "Fc" => Some(ModelKind::Fc),
            "Pool" | "MaxPool" | "AvgPool" => Some(ModelKind::Pool),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BundleMetadata {
    pub seed: u64,
    pub dataset_sha256: String,
    pub tool_version: String,
}

/// Trained per-kind models for one hardware-software combination.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyModelBundle {
    pub provenance: String,
    pub models: BTreeMap<ModelKind, RegressionModel>,
    pub metadata: BundleMetadata,
}

impl EnergyModelBundle {
    pub fn new(
        provenance: impl Into<String>,
        models: BTreeMap<ModelKind, RegressionModel>,
        metadata: BundleMetadata,
    ) -> Result<EnergyModelBundle> {
        let provenance = provenance.into();
        if provenance.is_empty() {
            return Err(Error::invalid("model bundle", "empty provenance label"));
        }
        Ok(EnergyModelBundle {
            provenance,
            models,
            metadata,
        })
    }
}

/// Fit `energy ~ intercept + slope * aggregate` for one layer-type bucket
/// over the dataset rows of that kind.
pub fn train_layer_type_model(dataset: &EnergyDataset, kind: ModelKind) -> Result<RegressionModel> {
    let ctx = format!("train_layer_type_model({})", kind.label());
    let feature = kind.feature_name();
    let idx = dataset
        .feature_index(feature)
        .ok_or_else(|| Error::invalid(&ctx, format!("dataset has no '{feature}' column")))?;

    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for row in &dataset.rows {
        if ModelKind::from_label(&row.layer_kind) == Some(kind) {
            xs.push(vec![row.features[idx]]);
            ys.push(row.energy_mj);
        }
    }
    if xs.len() < 2 {
        return Err(Error::invalid(
            &ctx,
            format!("need at least 2 rows of kind {}, found {}", kind.label(), xs.len()),
        ));
    }
    let first = xs[0][0];
    if xs.iter().all(|x| x[0] == first) {
        return Err(Error::invalid(&ctx, format!("zero-variance '{feature}' feature")));
    }
    regression::fit_ols(&[feature.to_string()], &xs, &ys, 1)
}

/// Evaluate a layer-type model on an aggregate vector with a matching schema.
/// Negative estimates are returned as-is; callers decide how to warn.
pub fn predict_layer_type(model: &RegressionModel, aggregate: &FeatureVector) -> Result<f64> {
    model.predict_named(&aggregate.names, &aggregate.values)
}

/// A layer kind present in the network but not covered by the bundle.
#[derive(Debug, Clone, PartialEq)]
pub struct UncoveredKind {
    pub kind: String,
    pub layer_count: usize,
    /// Aggregate feature total when one is defined for the kind.
    pub feature: Option<(String, f64)>,
}

/// Per-kind and total energy estimate for one network.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyEstimate {
    pub network: String,
    pub provenance: String,
    /// Predictions in fixed (Conv, Pool, Fc) order; only kinds present in
    /// both the network and the bundle appear.
    pub per_kind: Vec<(ModelKind, f64)>,
    pub total: f64,
    pub uncovered: Vec<UncoveredKind>,
    pub warnings: Vec<String>,
}

/// Predict whole-network inference energy: aggregate features per layer-type
/// bucket, apply each bundle model whose kind is present, and sum. Kinds
/// present in the network but missing from the bundle are reported as
/// uncovered rather than silently dropped.
pub fn predict_total(bundle: &EnergyModelBundle, model: &ConvNetModel) -> Result<EnergyEstimate> {
    if bundle.models.is_empty() {
        return Err(Error::invalid("predict_total", "bundle contains no models"));
    }
    let aggregates = features::network_layer_type_aggregate(model)?;

    // Fold the four aggregate buckets into the three modelled kinds.
    let mut totals: BTreeMap<ModelKind, (f64, usize)> = BTreeMap::new();
    let mut counts: BTreeMap<AggregateKind, usize> = BTreeMap::new();
    for layer in &model.layers {
        match &layer.kind {
            crate::model::LayerKind::Conv | crate::model::LayerKind::DepthwiseConv => {
                *counts.entry(AggregateKind::Conv).or_insert(0) += 1
            }
            crate::model::LayerKind::Fc => *counts.entry(AggregateKind::Fc).or_insert(0) += 1,
            crate::model::LayerKind::MaxPool => {
                *counts.entry(AggregateKind::MaxPool).or_insert(0) += 1
            }
            crate::model::LayerKind::AvgPool => {
                *counts.entry(AggregateKind::AvgPool).or_insert(0) += 1
            }
            crate::model::LayerKind::Other(_) => {}
        }
    }
    for (agg_kind, vector) in &aggregates {
        let kind = ModelKind::from_label(agg_kind.label()).expect("aggregate kinds are modelled");
        let value = vector.values[0];
        let entry = totals.entry(kind).or_insert((0.0, 0));
        entry.0 += value;
        entry.1 += counts.get(agg_kind).copied().unwrap_or(0);
    }

    let mut per_kind = Vec::new();
    let mut uncovered = Vec::new();
    let mut warnings = Vec::new();
    for kind in ModelKind::ALL {
        let Some(&(sum, layer_count)) = totals.get(&kind) else {
            continue;
        };
        match bundle.models.get(&kind) {
            Some(m) => {
                let aggregate = FeatureVector::new(
                    vec![kind.feature_name().to_string()],
                    vec![sum],
                    1,
                    features::FeatureOrigin::LayerTypeAggregate(match kind {
                        ModelKind::Conv => AggregateKind::Conv,
                        ModelKind::Fc => AggregateKind::Fc,
                        ModelKind::Pool => AggregateKind::MaxPool,
                    }),
                )?;
                let value = predict_layer_type(m, &aggregate)?;
                if value < 0.0 {
                    warnings.push(format!(
                        "predicted energy for {} is negative ({value} mJ); the aggregate lies far below the training range",
                        kind.label()
                    ));
                }
                per_kind.push((kind, value));
            }
            None => uncovered.push(UncoveredKind {
                kind: kind.label().to_string(),
                layer_count,
                feature: Some((kind.feature_name().to_string(), sum)),
            }),
        }
    }

    // Kinds with no cost model at all (LRN, ReLU, Concat, ...) are uncovered
    // by construction.
    let mut other_counts: BTreeMap<String, usize> = BTreeMap::new();
    for layer in &model.layers {
        if let crate::model::LayerKind::Other(label) = &layer.kind {
            *other_counts.entry(label.clone()).or_insert(0) += 1;
        }
    }
    for (kind, layer_count) in other_counts {
        uncovered.push(UncoveredKind {
            kind,
            layer_count,
            feature: None,
        });
    }

    let total = per_kind.iter().fold(0.0, |acc, (_, v)| acc + v);
    Ok(EnergyEstimate {
        network: model.name.clone(),
        provenance: bundle.provenance.clone(),
        per_kind,
        total,
        uncovered,
        warnings,
    })
}

/// Warning text when a bundle is applied to data from another provenance.
pub fn check_provenance(bundle: &EnergyModelBundle, label: &str) -> Option<String> {
    if bundle.provenance != label {
        Some(format!(
            "provenance mismatch: bundle trained on '{}', data labelled '{}'",
            bundle.provenance, label
        ))
    } else {
        None
    }
}

/// Warning text when a bundle's recorded training-dataset digest differs.
pub fn check_dataset_digest(bundle: &EnergyModelBundle, sha256: &str) -> Option<String> {
    if bundle.metadata.dataset_sha256 != sha256 {
        Some(format!(
            "dataset digest mismatch: bundle recorded {}, found {}",
            bundle.metadata.dataset_sha256, sha256
        ))
    } else {
        None
    }
}

// ---------------------------------------------------------------------------
// Bundle persistence
// ---------------------------------------------------------------------------
//
// Floats are serialized as shortest-round-trip decimal strings so a load is
// bit-exact regardless of JSON number handling.

#[derive(Serialize, Deserialize)]
struct RawBundle {
    format: String,
    version: u32,
    provenance: String,
    models: BTreeMap<String, RawModelEntry>,
    metadata: RawMetadata,
}

#[derive(Serialize, Deserialize)]
struct RawModelEntry {
    feature_names: Vec<String>,
    coefficients: Vec<String>,
    intercept: String,
    n_train: usize,
    rss: String,
    bic: String,
    degree: u8,
}

#[derive(Serialize, Deserialize)]
struct RawMetadata {
    seed: u64,
    dataset_sha256: String,
    tool_version: String,
}

fn float_to_string(v: f64) -> String {
    format!("{v:?}")
}

fn float_from_string(ctx: &str, s: &str) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|_| Error::invalid(ctx, format!("malformed decimal '{s}'")))
}

/// Serialize a bundle to its JSON document form.
pub fn bundle_to_json(bundle: &EnergyModelBundle) -> String {
    let raw = RawBundle {
        format: BUNDLE_FORMAT.to_string(),
        version: BUNDLE_VERSION,
        provenance: bundle.provenance.clone(),
        models: bundle
            .models
            .iter()
            .map(|(kind, m)| {
                (
                    kind.label().to_string(),
                    RawModelEntry {
                        feature_names: m.feature_names.clone(),
                        coefficients: m.coefficients.iter().map(|&c| float_to_string(c)).collect(),
                        intercept: float_to_string(m.intercept),
                        n_train: m.n_train,
                        rss: float_to_string(m.rss),
                        bic: float_to_string(m.bic),
                        degree: m.degree,
                    },
                )
            })
            .collect(),
        metadata: RawMetadata {
            seed: bundle.metadata.seed,
            dataset_sha256: bundle.metadata.dataset_sha256.clone(),
            tool_version: bundle.metadata.tool_version.clone(),
        },
    };
    let mut text = serde_json::to_string_pretty(&raw).expect("bundle serialization");
    text.push('\n');
    text
}

/// Parse a bundle document, checking format name and version.
pub fn bundle_from_json(text: &str) -> Result<EnergyModelBundle> {
    let raw: RawBundle = serde_json::from_str(text)
        .map_err(|e| Error::syntax("<bundle>", e.line() as u64, e.to_string()))?;
    if raw.format != BUNDLE_FORMAT {
        return Err(Error::invalid(
            "load_bundle",
            format!("unknown format '{}', expected '{}'", raw.format, BUNDLE_FORMAT),
        ));
    }
    if raw.version != BUNDLE_VERSION {
        return Err(Error::invalid(
            "load_bundle",
            format!(
                "unsupported bundle version: expected {}, found {}",
                BUNDLE_VERSION, raw.version
            ),
        ));
    }
    let mut models = BTreeMap::new();
    for (label, entry) in raw.models {
        let kind = ModelKind::from_label(&label).ok_or_else(|| {
            Error::invalid("load_bundle", format!("unknown model kind '{label}'"))
        })?;
        let ctx = format!("load_bundle({label})");
        if entry.feature_names.len() != entry.coefficients.len() {
            return Err(Error::invalid(
                &ctx,
                format!(
                    "{} feature names but {} coefficients",
                    entry.feature_names.len(),
                    entry.coefficients.len()
                ),
            ));
        }
        let coefficients = entry
            .coefficients
            .iter()
            .map(|s| float_from_string(&ctx, s))
            .collect::<Result<Vec<f64>>>()?;
        models.insert(
            kind,
            RegressionModel {
                feature_names: entry.feature_names,
                coefficients,
                intercept: float_from_string(&ctx, &entry.intercept)?,
                n_train: entry.n_train,
                rss: float_from_string(&ctx, &entry.rss)?,
                bic: float_from_string(&ctx, &entry.bic)?,
                degree: entry.degree,
            },
        );
    }
    EnergyModelBundle::new(
        raw.provenance,
        models,
        BundleMetadata {
            seed: raw.metadata.seed,
            dataset_sha256: raw.metadata.dataset_sha256,
            tool_version: raw.metadata.tool_version,
        },
    )
}

pub fn save_bundle(bundle: &EnergyModelBundle, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, bundle_to_json(bundle)).map_err(|e| Error::io(path, e))
}

pub fn load_bundle(path: impl AsRef<Path>) -> Result<EnergyModelBundle> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    bundle_from_json(&text).map_err(|e| match e {
        Error::Syntax { line, message, .. } => {
            Error::syntax(path.display().to_string(), line, message)
        }
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::EnergyRow;
    use crate::model::{infer_shapes, LayerKind, LayerSpec};
    use std::collections::BTreeMap;

    fn aggregate_dataset(rows: &[(&str, &str, f64, f64, f64)]) -> EnergyDataset {
        EnergyDataset::new(
            "Test-Rig",
            vec![MAC_SUM.to_string(), OP_SUM.to_string()],
            rows.iter()
                .map(|(net, kind, energy, mac, op)| EnergyRow {
                    network: net.to_string(),
                    layer_kind: kind.to_string(),
                    layer_name: String::new(),
                    energy_mj: *energy,
                    features: vec![*mac, *op],
                })
                .collect(),
        )
        .unwrap()
    }

    fn metadata() -> BundleMetadata {
        BundleMetadata {
            seed: 42,
            dataset_sha256: "abc".into(),
            tool_version: "0.1.0".into(),
        }
    }

    #[test]
    fn two_point_exact_line() {
        let ds = aggregate_dataset(&[
            ("a", "Conv", 1000.0, 1e9, 0.0),
            ("b", "Conv", 2000.0, 2e9, 0.0),
        ]);
        let model = train_layer_type_model(&ds, ModelKind::Conv).unwrap();
        assert!((model.coefficients[0] - 1e-6).abs() < 1e-15);
        assert!(model.intercept.abs() < 1e-9);
    }

    #[test]
    fn single_row_is_rejected() {
        let ds = aggregate_dataset(&[("a", "Conv", 1000.0, 1e9, 0.0)]);
        assert!(train_layer_type_model(&ds, ModelKind::Conv).is_err());
    }

    #[test]
    fn zero_variance_is_rejected() {
        let ds = aggregate_dataset(&[
            ("a", "Conv", 1000.0, 5e8, 0.0),
            ("b", "Conv", 1200.0, 5e8, 0.0),
        ]);
        let err = train_layer_type_model(&ds, ModelKind::Conv).unwrap_err();
        assert!(err.to_string().contains("zero-variance"), "{err}");
    }

    #[test]
    fn training_residuals_sum_to_zero() {
        // Measured Conv energies for three networks on one platform.
        let ds = aggregate_dataset(&[
            ("GoogleNet", "Conv", 6325.22, 1_581_647_872.0, 0.0),
            ("AlexNet", "Conv", 2875.25, 665_784_864.0, 0.0),
            ("VGG_CNN_S", "Conv", 9177.43, 2_541_337_632.0, 0.0),
        ]);
        let model = train_layer_type_model(&ds, ModelKind::Conv).unwrap();
        let residual_sum: f64 = ds
            .rows
            .iter()
            .map(|r| r.energy_mj - model.predict(&[r.features[0]]))
            .sum();
        let scale: f64 = ds.rows.iter().map(|r| r.energy_mj.abs()).sum();
        assert!(residual_sum.abs() <= 1e-6 * scale, "{residual_sum}");
    }

    fn slope_model(kind: ModelKind, slope: f64, intercept: f64) -> RegressionModel {
        RegressionModel {
            feature_names: vec![kind.feature_name().to_string()],
            coefficients: vec![slope],
            intercept,
            n_train: 2,
            rss: 0.0,
            bic: 0.0,
            degree: 1,
        }
    }

    #[test]
    fn predict_layer_type_values() {
        let model = slope_model(ModelKind::Conv, 1e-6, 0.0);
        let aggregate = FeatureVector::new(
            vec![MAC_SUM.to_string()],
            vec![665_784_864.0],
            1,
            crate::features::FeatureOrigin::LayerTypeAggregate(AggregateKind::Conv),
        )
        .unwrap();
        let prediction = predict_layer_type(&model, &aggregate).unwrap();
        assert!((prediction - 665.784864).abs() < 1e-9);

        let zero = FeatureVector::new(
            vec![MAC_SUM.to_string()],
            vec![0.0],
            1,
            crate::features::FeatureOrigin::LayerTypeAggregate(AggregateKind::Conv),
        )
        .unwrap();
        let with_intercept = slope_model(ModelKind::Conv, 1e-6, 12.5);
        assert_eq!(predict_layer_type(&with_intercept, &zero).unwrap(), 12.5);
    }

    #[test]
    fn predict_layer_type_rejects_schema_mismatch() {
        let model = slope_model(ModelKind::Conv, 1e-6, 0.0);
        let aggregate = FeatureVector::new(
            vec![OP_SUM.to_string()],
            vec![100.0],
            1,
            crate::features::FeatureOrigin::LayerTypeAggregate(AggregateKind::MaxPool),
        )
        .unwrap();
        assert!(predict_layer_type(&model, &aggregate).is_err());
    }

    fn conv_only_network() -> ConvNetModel {
        infer_shapes(ConvNetModel {
            name: "conv-only".into(),
            layers: vec![LayerSpec::conv("c1", (10, 10, 3), (3, 3), 1, 0, 8)],
            metadata: BTreeMap::new(),
        })
        .unwrap()
    }

    #[test]
    fn total_is_single_kind_prediction() {
        let mut models = BTreeMap::new();
        models.insert(ModelKind::Conv, slope_model(ModelKind::Conv, 2e-6, 1.0));
        let bundle = EnergyModelBundle::new("Test-Rig", models, metadata()).unwrap();
        let estimate = predict_total(&bundle, &conv_only_network()).unwrap();
        assert_eq!(estimate.per_kind.len(), 1);
        assert_eq!(estimate.total, estimate.per_kind[0].1);
        assert!(estimate.uncovered.is_empty());
    }

    #[test]
    fn uncovered_kinds_are_listed() {
        let mut network = conv_only_network();
        network.layers.push(LayerSpec {
            name: "norm1".into(),
            kind: LayerKind::Other("LRN".into()),
            input: crate::model::Dims::new(8, 8, 8),
            kernel: None,
            stride: 1,
            padding: 0,
            output_channels: 8,
            groups: 1,
            output: Some(crate::model::Dims::new(8, 8, 8)),
        });
        network.layers.push(LayerSpec::pool(
            "pool1",
            LayerKind::MaxPool,
            (8, 8, 8),
            (2, 2),
            2,
            0,
        ));
        let network = infer_shapes(network).unwrap();

        let mut models = BTreeMap::new();
        models.insert(ModelKind::Conv, slope_model(ModelKind::Conv, 2e-6, 1.0));
        let bundle = EnergyModelBundle::new("Test-Rig", models, metadata()).unwrap();
        let estimate = predict_total(&bundle, &network).unwrap();

        let labels: Vec<&str> = estimate.uncovered.iter().map(|u| u.kind.as_str()).collect();
        assert_eq!(labels, vec!["Pool", "LRN"]);
        let pool = &estimate.uncovered[0];
        assert_eq!(pool.layer_count, 1);
        assert_eq!(pool.feature.as_ref().unwrap().0, OP_SUM);
        assert!(estimate.total > 0.0);
    }

    #[test]
    fn total_sums_per_kind_predictions_exactly() {
        // Intercept-only models pin the per-kind predictions so the total
        // must equal their fixed-order sum bit-for-bit.
        let mut models = BTreeMap::new();
        models.insert(ModelKind::Conv, slope_model(ModelKind::Conv, 0.0, 5783.59));
        models.insert(ModelKind::Pool, slope_model(ModelKind::Pool, 0.0, 1079.29));
        models.insert(ModelKind::Fc, slope_model(ModelKind::Fc, 0.0, 182.73));
        let bundle = EnergyModelBundle::new("Eigen-TX1", models, metadata()).unwrap();

        let network = infer_shapes(ConvNetModel {
            name: "googlenet-like".into(),
            layers: vec![
                LayerSpec::conv("c1", (28, 28, 64), (3, 3), 1, 1, 128),
                LayerSpec::pool("p1", LayerKind::MaxPool, (28, 28, 128), (3, 3), 2, 0),
                {
                    let mut fc = LayerSpec::conv("fc", (1, 1, 1024), (1, 1), 1, 0, 1000);
                    fc.kind = LayerKind::Fc;
                    fc
                },
            ],
            metadata: BTreeMap::new(),
        })
        .unwrap();

        let estimate = predict_total(&bundle, &network).unwrap();
        assert_eq!(
            estimate.per_kind,
            vec![
                (ModelKind::Conv, 5783.59),
                (ModelKind::Pool, 1079.29),
                (ModelKind::Fc, 182.73),
            ]
        );
        assert_eq!(estimate.total, 5783.59 + 1079.29 + 182.73);
        assert!((estimate.total - 7045.61).abs() < 1e-9);
    }

    #[test]
    fn negative_prediction_is_reported_with_warning() {
        let mut models = BTreeMap::new();
        models.insert(ModelKind::Conv, slope_model(ModelKind::Conv, 1e-9, -50.0));
        let bundle = EnergyModelBundle::new("Test-Rig", models, metadata()).unwrap();
        let estimate = predict_total(&bundle, &conv_only_network()).unwrap();
        assert!(estimate.per_kind[0].1 < 0.0);
        assert_eq!(estimate.warnings.len(), 1);
        assert!(estimate.warnings[0].contains("negative"), "{}", estimate.warnings[0]);
    }

    #[test]
    fn empty_network_has_empty_estimate() {
        let mut models = BTreeMap::new();
        models.insert(ModelKind::Conv, slope_model(ModelKind::Conv, 2e-6, 5.0));
        let bundle = EnergyModelBundle::new("Test-Rig", models, metadata()).unwrap();
        let network = ConvNetModel {
            name: "empty".into(),
            layers: vec![],
            metadata: BTreeMap::new(),
        };
        let estimate = predict_total(&bundle, &network).unwrap();
        assert!(estimate.per_kind.is_empty());
        assert_eq!(estimate.total, 0.0);
        assert!(estimate.uncovered.is_empty());
    }

    #[test]
    fn prediction_linear_in_aggregate() {
        let model = slope_model(ModelKind::Conv, 3e-7, 4.0);
        let v = |mac: f64| {
            FeatureVector::new(
                vec![MAC_SUM.to_string()],
                vec![mac],
                1,
                crate::features::FeatureOrigin::LayerTypeAggregate(AggregateKind::Conv),
            )
            .unwrap()
        };
        let one = predict_layer_type(&model, &v(1e9)).unwrap();
        let two = predict_layer_type(&model, &v(2e9)).unwrap();
        assert_eq!(two - one, 3e-7 * 1e9);
    }

    #[test]
    fn bundle_round_trip_is_field_exact() {
        let ds = aggregate_dataset(&[
            ("a", "Conv", 1013.7, 9.41e8, 0.0),
            ("b", "Conv", 2251.9, 2.03e9, 0.0),
            ("c", "Conv", 3100.2, 2.99e9, 0.0),
            ("a", "Pool", 55.0, 0.0, 1.2e6),
            ("b", "Pool", 91.5, 0.0, 2.9e6),
        ]);
        let mut models = BTreeMap::new();
        models.insert(ModelKind::Conv, train_layer_type_model(&ds, ModelKind::Conv).unwrap());
        models.insert(ModelKind::Pool, train_layer_type_model(&ds, ModelKind::Pool).unwrap());
        let bundle = EnergyModelBundle::new("Test-Rig", models, metadata()).unwrap();

        let reloaded = bundle_from_json(&bundle_to_json(&bundle)).unwrap();
        assert_eq!(bundle, reloaded);
    }

    #[test]
    fn unknown_version_is_rejected() {
        let mut models = BTreeMap::new();
        models.insert(ModelKind::Conv, slope_model(ModelKind::Conv, 1e-6, 0.0));
        let bundle = EnergyModelBundle::new("Test-Rig", models, metadata()).unwrap();
        let text = bundle_to_json(&bundle).replace("\"version\": 1", "\"version\": 99");
        let err = bundle_from_json(&text).unwrap_err();
        assert!(err.to_string().contains("expected 1, found 99"), "{err}");
    }

    #[test]
    fn provenance_and_digest_warnings() {
        let mut models = BTreeMap::new();
        models.insert(ModelKind::Conv, slope_model(ModelKind::Conv, 1e-6, 0.0));
        let bundle = EnergyModelBundle::new("Eigen-TX1", models, metadata()).unwrap();
        assert!(check_provenance(&bundle, "Eigen-TX1").is_none());
        let warning = check_provenance(&bundle, "OpenBLAS-TX1").unwrap();
        assert!(warning.contains("provenance mismatch"), "{warning}");
        assert!(check_dataset_digest(&bundle, "abc").is_none());
        assert!(check_dataset_digest(&bundle, "def").is_some());
    }
}
