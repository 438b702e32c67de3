//! Subcommand implementations.

use std::fs;
use std::path::{Path, PathBuf};

use convwatt_core::dataset::EnergyDataset;
use convwatt_core::evaluation::{
    self, EvalReport, MetricKind, ModelRecipe, SplitPlan,
};
use convwatt_core::features::{self, AggregateKind};
use convwatt_core::model;
use convwatt_core::predictor::{self, BundleMetadata, EnergyModelBundle, ModelKind};
use convwatt_core::regression::{self, SelectionPath, EXHAUSTIVE_LIMIT};
use convwatt_core::trace;
use convwatt_core::util::sha256_hex;
use convwatt_core::{Error, Result};

use crate::output::{fmt_f64, write_output, CsvDoc};

/// Collects what the reproducibility footer reports.
pub struct RunContext {
    pub seed: Option<u64>,
    inputs: Vec<(String, String)>,
}

impl RunContext {
    pub fn new() -> RunContext {
        RunContext {
            seed: None,
            inputs: Vec::new(),
        }
    }

    /// Read an input file, remembering its digest for the footer.
    fn read_input(&mut self, path: &Path) -> Result<Vec<u8>> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        self.inputs
            .push((path.display().to_string(), sha256_hex(&bytes)));
        Ok(bytes)
    }

    pub fn print_footer(&self) {
        eprintln!(
            "convwatt {} seed={}",
            env!("CARGO_PKG_VERSION"),
            self.seed
                .map(|s| s.to_string())
                .unwrap_or_else(|| "-".to_string())
        );
        for (path, digest) in &self.inputs {
            eprintln!("  input {} sha256={}", path, &digest[..12]);
        }
    }
}

fn load_model_tracked(ctx: &mut RunContext, path: &Path) -> Result<model::ConvNetModel> {
    let bytes = ctx.read_input(path)?;
    let text = String::from_utf8(bytes)
        .map_err(|_| Error::invalid(path.display().to_string(), "not valid UTF-8"))?;
    let parsed = model::parse_model(&text).map_err(|e| match e {
        Error::Syntax { line, message, .. } => {
            Error::syntax(path.display().to_string(), line, message)
        }
        other => other,
    })?;
    model::infer_shapes(parsed)
}

fn load_trace_tracked(ctx: &mut RunContext, path: &Path) -> Result<trace::PowerTrace> {
    ctx.read_input(path)?;
    trace::load_power_trace(path)
}

fn load_annotations_tracked(ctx: &mut RunContext, path: &Path) -> Result<trace::AnnotationLog> {
    ctx.read_input(path)?;
    trace::load_annotations(path)
}

fn load_dataset_tracked(
    ctx: &mut RunContext,
    path: &Path,
    provenance: &str,
) -> Result<(EnergyDataset, String)> {
    let bytes = ctx.read_input(path)?;
    let digest = sha256_hex(&bytes);
    Ok((EnergyDataset::load_csv(path, provenance)?, digest))
}

// ---------------------------------------------------------------------------
// features
// ---------------------------------------------------------------------------

pub fn features(ctx: &mut RunContext, model_path: &Path, degree: u8, out: Option<&Path>) -> Result<()> {
    let network = load_model_tracked(ctx, model_path)?;

    // Column set: per-layer features at the requested degree, then the two
    // aggregate columns used by the per-kind rows.
    let feature_names: Vec<String> = {
        let base: Vec<String> = features::BASE_FEATURES.iter().map(|s| s.to_string()).collect();
        match degree {
            1 => base,
            2 => features::expand_degree2(&base, &vec![0.0; base.len()]).0,
            other => {
                return Err(Error::invalid("features", format!("unsupported degree {other}")))
            }
        }
    };
    let mut header: Vec<&str> = vec!["network", "row_type", "layer_kind", "layer_name"];
    header.extend(feature_names.iter().map(|s| s.as_str()));
    header.push(features::MAC_SUM);
    header.push(features::OP_SUM);
    let mut doc = CsvDoc::new(&header);

    for layer in network.layers.iter().filter(|l| l.kind.is_conv_family()) {
        let vector = features::layer_feature_vector(layer, degree)?;
        let mut row = vec![
            network.name.clone(),
            "layer".to_string(),
            layer.kind.label().to_string(),
            layer.name.clone(),
        ];
        row.extend(vector.values.iter().map(|&v| fmt_f64(v)));
        row.push(String::new());
        row.push(String::new());
        doc.row(&row);
    }

    let aggregates = features::network_layer_type_aggregate(&network)?;
    for (kind, vector) in &aggregates {
        let mut row = vec![
            network.name.clone(),
            "aggregate".to_string(),
            kind.label().to_string(),
            String::new(),
        ];
        row.extend(std::iter::repeat_n(String::new(), feature_names.len()));
        match kind {
            AggregateKind::Conv | AggregateKind::Fc => {
                row.push(fmt_f64(vector.values[0]));
                row.push(String::new());
            }
            AggregateKind::MaxPool | AggregateKind::AvgPool => {
                row.push(String::new());
                row.push(fmt_f64(vector.values[0]));
            }
        }
        doc.row(&row);
    }

    write_output(out, &doc.into_string())
}

// ---------------------------------------------------------------------------
// integrate
// ---------------------------------------------------------------------------

pub fn integrate(
    ctx: &mut RunContext,
    trace_path: &Path,
    annotations: Option<&Path>,
    begin: Option<f64>,
    end: Option<f64>,
    out: Option<&Path>,
) -> Result<()> {
    let power = load_trace_tracked(ctx, trace_path)?;

    match (annotations, begin, end) {
        (Some(ann_path), None, None) => {
            let log = load_annotations_tracked(ctx, ann_path)?;
            let per_layer = trace::per_layer_energy(&power, &log)?;
            if per_layer.skipped > 0 {
                eprintln!(
                    "warning: skipped {} annotation(s) outside the trace span",
                    per_layer.skipped
                );
            }
            let mut doc = CsvDoc::new(&[
                "row_type",
                "layer_name",
                "layer_kind",
                "run_id",
                "begin_us",
                "end_us",
                "energy_mj",
                "runs",
                "mean_mj",
                "std_mj",
            ]);
            for row in &per_layer.rows {
                doc.row(&[
                    "window".to_string(),
                    row.layer_name.clone(),
                    row.layer_kind.clone(),
                    row.run_id.to_string(),
                    fmt_f64(row.begin_us),
                    fmt_f64(row.end_us),
                    fmt_f64(row.energy_mj),
                    String::new(),
                    String::new(),
                    String::new(),
                ]);
            }
            for s in &per_layer.summaries {
                doc.row(&[
                    "summary".to_string(),
                    s.layer_name.clone(),
                    s.layer_kind.clone(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    s.runs.to_string(),
                    fmt_f64(s.mean_mj),
                    fmt_f64(s.std_mj),
                ]);
            }
            write_output(out, &doc.into_string())
        }
        (None, Some(begin), Some(end)) => {
            let energy = trace::integrate_energy(&power, begin, end)?;
            let mut doc = CsvDoc::new(&["begin_us", "end_us", "energy_mj"]);
            doc.row(&[fmt_f64(begin), fmt_f64(end), fmt_f64(energy)]);
            write_output(out, &doc.into_string())
        }
        _ => Err(Error::invalid(
            "integrate",
            "pass either --annotations or both --begin and --end",
        )),
    }
}

// ---------------------------------------------------------------------------
// breakdown
// ---------------------------------------------------------------------------

pub fn breakdown(
    ctx: &mut RunContext,
    trace_path: &Path,
    annotations_path: &Path,
    out: Option<&Path>,
) -> Result<()> {
    let power = load_trace_tracked(ctx, trace_path)?;
    let log = load_annotations_tracked(ctx, annotations_path)?;
    let per_layer = trace::per_layer_energy(&power, &log)?;
    if per_layer.skipped > 0 {
        eprintln!(
            "warning: skipped {} annotation(s) outside the trace span",
            per_layer.skipped
        );
    }
    let table = trace::layer_type_breakdown(&per_layer.rows)?;

    let mut doc = CsvDoc::new(&["layer_kind", "energy_mj", "time_s", "energy_pct", "time_pct"]);
    for row in &table.rows {
        doc.row(&[
            row.layer_kind.clone(),
            fmt_f64(row.energy_mj),
            fmt_f64(row.time_s),
            fmt_f64(row.energy_pct),
            fmt_f64(row.time_pct),
        ]);
    }
    doc.row(&[
        "TOTAL".to_string(),
        fmt_f64(table.total_energy_mj),
        fmt_f64(table.total_time_s),
        fmt_f64(100.0),
        fmt_f64(100.0),
    ]);
    write_output(out, &doc.into_string())
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

fn parse_kinds(raw: &str) -> Result<Vec<ModelKind>> {
    raw.split(',')
        .map(|s| {
            let s = s.trim();
            ModelKind::from_label(s)
                .ok_or_else(|| Error::invalid("train", format!("unknown layer kind '{s}'")))
        })
        .collect()
}

pub fn train(
    ctx: &mut RunContext,
    dataset_path: &Path,
    provenance: &str,
    kinds: Option<&str>,
    seed: u64,
    out: &Path,
) -> Result<()> {
    let (dataset, digest) = load_dataset_tracked(ctx, dataset_path, provenance)?;

    let kinds: Vec<ModelKind> = match kinds {
        Some(raw) => parse_kinds(raw)?,
        None => {
            // Every modelled kind with at least one row; training still
            // requires two.
            ModelKind::ALL
                .into_iter()
                .filter(|kind| {
                    dataset
                        .rows
                        .iter()
                        .any(|r| ModelKind::from_label(&r.layer_kind) == Some(*kind))
                })
                .collect()
        }
    };
    if kinds.is_empty() {
        return Err(Error::invalid("train", "no trainable layer kinds in the dataset"));
    }

    let mut models = std::collections::BTreeMap::new();
    for kind in kinds {
        let model = predictor::train_layer_type_model(&dataset, kind)?;
        eprintln!(
            "trained {}: slope {} mJ/{}, intercept {} mJ, n={}",
            kind.label(),
            model.coefficients[0],
            kind.feature_name(),
            model.intercept,
            model.n_train
        );
        models.insert(kind, model);
    }

    let bundle = EnergyModelBundle::new(
        provenance,
        models,
        BundleMetadata {
            seed,
            dataset_sha256: digest,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        },
    )?;
    write_output(Some(out), &predictor::bundle_to_json(&bundle))
}

// ---------------------------------------------------------------------------
// predict
// ---------------------------------------------------------------------------

pub fn predict(
    ctx: &mut RunContext,
    bundle_path: &Path,
    model_path: &Path,
    provenance: Option<&str>,
    out: Option<&Path>,
) -> Result<()> {
    ctx.read_input(bundle_path)?;
    let bundle = predictor::load_bundle(bundle_path)?;
    let network = load_model_tracked(ctx, model_path)?;

    if let Some(label) = provenance {
        if let Some(warning) = predictor::check_provenance(&bundle, label) {
            eprintln!("warning: {warning}");
        }
    }

    let estimate = predictor::predict_total(&bundle, &network)?;
    for warning in &estimate.warnings {
        eprintln!("warning: {warning}");
    }

    let mut doc = CsvDoc::new(&[
        "network",
        "provenance",
        "row_type",
        "kind",
        "energy_mj",
        "layer_count",
        "feature_name",
        "feature_total",
    ]);
    for (kind, energy) in &estimate.per_kind {
        doc.row(&[
            estimate.network.clone(),
            estimate.provenance.clone(),
            "prediction".to_string(),
            kind.label().to_string(),
            fmt_f64(*energy),
            String::new(),
            String::new(),
            String::new(),
        ]);
    }
    doc.row(&[
        estimate.network.clone(),
        estimate.provenance.clone(),
        "total".to_string(),
        String::new(),
        fmt_f64(estimate.total),
        String::new(),
        String::new(),
        String::new(),
    ]);
    for u in &estimate.uncovered {
        doc.row(&[
            estimate.network.clone(),
            estimate.provenance.clone(),
            "uncovered".to_string(),
            u.kind.clone(),
            String::new(),
            u.layer_count.to_string(),
            u.feature.as_ref().map(|(n, _)| n.clone()).unwrap_or_default(),
            u.feature.as_ref().map(|(_, v)| fmt_f64(*v)).unwrap_or_default(),
        ]);
    }
    write_output(out, &doc.into_string())
}

// ---------------------------------------------------------------------------
// select-features
// ---------------------------------------------------------------------------

fn selection_csv(path: &SelectionPath) -> String {
    let mut doc = CsvDoc::new(&["size", "bic", "selected", "features"]);
    for (i, entry) in path.entries.iter().enumerate() {
        doc.row(&[
            entry.size.to_string(),
            fmt_f64(entry.bic),
            if i == path.selected { "1" } else { "0" }.to_string(),
            entry.feature_names.join(";"),
        ]);
    }
    doc.into_string()
}

pub fn select_features(
    ctx: &mut RunContext,
    dataset_path: &Path,
    provenance: &str,
    degree: u8,
    method: &str,
    max_size: Option<usize>,
    out: Option<&Path>,
) -> Result<()> {
    let (dataset, _) = load_dataset_tracked(ctx, dataset_path, provenance)?;
    let dataset = match degree {
        1 => dataset,
        2 => dataset.expand_degree2(),
        other => {
            return Err(Error::invalid(
                "select-features",
                format!("unsupported degree {other}"),
            ))
        }
    };

    let x = dataset.feature_matrix(&dataset.feature_names)?;
    let y = dataset.energies();
    let m = dataset.feature_names.len();
    let method = match method {
        "auto" if m <= EXHAUSTIVE_LIMIT => "exhaustive",
        "auto" => "stepwise",
        other => other,
    };
    eprintln!("selecting over {m} candidate feature(s) with the {method} search");
    let path = match method {
        "exhaustive" => regression::best_subset_exhaustive(&dataset.feature_names, &x, &y, degree)?,
        "stepwise" => regression::forward_stepwise(&dataset.feature_names, &x, &y, degree, max_size)?,
        other => return Err(Error::invalid("select-features", format!("unknown method '{other}'"))),
    };
    let selected = path.selected_entry();
    eprintln!(
        "selected {} feature(s) at BIC {}: {}",
        selected.size,
        selected.bic,
        selected.feature_names.join(";")
    );
    write_output(out, &selection_csv(&path))
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

fn report_rows(doc: &mut CsvDoc, report: &EvalReport) {
    for (i, acc) in report.per_fold.iter().enumerate() {
        doc.row(&[
            report.metric.label().to_string(),
            report.seed.to_string(),
            (i + 1).to_string(),
            fmt_f64(*acc),
        ]);
    }
    doc.row(&[
        report.metric.label().to_string(),
        report.seed.to_string(),
        "mean".to_string(),
        fmt_f64(report.mean),
    ]);
    doc.row(&[
        report.metric.label().to_string(),
        report.seed.to_string(),
        "std".to_string(),
        fmt_f64(report.std),
    ]);
}

#[allow(clippy::too_many_arguments)]
pub fn evaluate(
    ctx: &mut RunContext,
    dataset_path: &Path,
    provenance: &str,
    split: &str,
    ratio: f64,
    repeats: usize,
    test_networks: usize,
    seed: u64,
    metric: &str,
    feature_list: Option<&str>,
    out: Option<&Path>,
) -> Result<()> {
    let (dataset, _) = load_dataset_tracked(ctx, dataset_path, provenance)?;

    let (plan, recipe) = match split {
        "random" => {
            let features = match feature_list {
                Some(raw) => raw.split(',').map(|s| s.trim().to_string()).collect(),
                None => dataset.feature_names.clone(),
            };
            (
                SplitPlan::random_layers(ratio, repeats, seed)?,
                ModelRecipe::PooledLayers { features },
            )
        }
        "networks" => {
            let n_net = dataset.networks().len();
            if test_networks == 0 || n_net == 0 {
                return Err(Error::invalid("evaluate", "no networks to split"));
            }
            let folds = n_net.div_ceil(test_networks);
            (
                SplitPlan::leave_networks_out(test_networks, folds, seed)?,
                ModelRecipe::LayerTypeTotals,
            )
        }
        other => return Err(Error::invalid("evaluate", format!("unknown split '{other}'"))),
    };

    let metrics: Vec<MetricKind> = match metric {
        "relacc" => vec![MetricKind::RelAcc],
        "rmspe" => vec![MetricKind::RmspeAcc],
        "both" => vec![MetricKind::RelAcc, MetricKind::RmspeAcc],
        other => return Err(Error::invalid("evaluate", format!("unknown metric '{other}'"))),
    };

    let mut doc = CsvDoc::new(&["metric", "seed", "fold", "accuracy_pct"]);
    for metric in metrics {
        let report = evaluation::cross_validate(&dataset, &plan, &recipe, metric)?;
        eprintln!(
            "{}: {:.2} +/- {:.2} over {} fold(s)",
            report.metric.label(),
            report.mean,
            report.std,
            report.per_fold.len()
        );
        report_rows(&mut doc, &report);
    }
    write_output(out, &doc.into_string())
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

/// Demo trace/annotation pairs shipped under `data/demo`, with the
/// provenance labels used by the prediction table.
const DEMO_COMBOS: [(&str, &str); 3] = [
    ("googlenet_eigen_tx1", "Eigen-TX1"),
    ("googlenet_eigen_snapdragon820", "Eigen-Snapdragon820"),
    ("googlenet_openblas_tx1", "OpenBLAS-TX1"),
];

fn breakdown_csv(ctx: &mut RunContext, data_dir: &Path, combo: &str) -> Result<String> {
    let power = load_trace_tracked(ctx, &data_dir.join(format!("demo/{combo}_power.csv")))?;
    let log =
        load_annotations_tracked(ctx, &data_dir.join(format!("demo/{combo}_annotations.csv")))?;
    let per_layer = trace::per_layer_energy(&power, &log)?;
    let table = trace::layer_type_breakdown(&per_layer.rows)?;
    let mut doc = CsvDoc::new(&["layer_kind", "energy_mj", "time_s", "energy_pct", "time_pct"]);
    for row in &table.rows {
        doc.row(&[
            row.layer_kind.clone(),
            fmt_f64(row.energy_mj),
            fmt_f64(row.time_s),
            fmt_f64(row.energy_pct),
            fmt_f64(row.time_pct),
        ]);
    }
    Ok(doc.into_string())
}

/// Parsed rows of `demo/aggregate_predictions.csv`.
pub struct PredictionRow {
    pub provenance: String,
    pub total_pred_mj: f64,
    pub total_meas_mj: f64,
}

pub fn load_prediction_rows(path: &Path) -> Result<Vec<PredictionRow>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(std::io::BufReader::new(file));
    let headers = reader
        .headers()
        .map_err(|e| Error::syntax(path.display().to_string(), 1, e.to_string()))?
        .clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::syntax(path.display().to_string(), 1, format!("missing column '{name}'")))
    };
    let (c_prov, c_pred, c_meas) = (
        col("provenance")?,
        col("total_pred_mj")?,
        col("total_meas_mj")?,
    );
    let mut rows = Vec::new();
    for record in reader.records() {
        let record =
            record.map_err(|e| Error::syntax(path.display().to_string(), 0, e.to_string()))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let parse = |idx: usize| -> Result<f64> {
            record
                .get(idx)
                .unwrap_or("")
                .trim()
                .parse()
                .map_err(|_| Error::syntax(path.display().to_string(), line, "malformed number".to_string()))
        };
        rows.push(PredictionRow {
            provenance: record.get(c_prov).unwrap_or("").to_string(),
            total_pred_mj: parse(c_pred)?,
            total_meas_mj: parse(c_meas)?,
        });
    }
    Ok(rows)
}

fn prediction_metrics_csv(ctx: &mut RunContext, data_dir: &Path) -> Result<String> {
    let path = data_dir.join("demo/aggregate_predictions.csv");
    ctx.read_input(&path)?;
    let rows = load_prediction_rows(&path)?;

    let mut provenances: Vec<String> = Vec::new();
    for row in &rows {
        if !provenances.contains(&row.provenance) {
            provenances.push(row.provenance.clone());
        }
    }

    let mut doc = CsvDoc::new(&[
        "provenance",
        "networks",
        "rmspe_accuracy_pct",
        "relacc_mean_pct",
        "relacc_std_pct",
    ]);
    for provenance in provenances {
        let pairs: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r.provenance == provenance)
            .map(|r| (r.total_pred_mj, r.total_meas_mj))
            .collect();
        let rmspe = evaluation::rmspe_accuracy(&pairs)?;
        let accs: Vec<f64> = pairs
            .iter()
            .map(|&(p, m)| evaluation::relative_accuracy(p, m))
            .collect::<Result<_>>()?;
        let mean = accs.iter().sum::<f64>() / accs.len() as f64;
        let std = evaluation::sample_std(&accs);
        doc.row(&[
            provenance,
            pairs.len().to_string(),
            fmt_f64(rmspe),
            fmt_f64(mean),
            fmt_f64(std),
        ]);
    }
    Ok(doc.into_string())
}

pub fn report(ctx: &mut RunContext, data_dir: &Path, out_dir: Option<&Path>) -> Result<()> {
    let mut tables: Vec<(PathBuf, String)> = Vec::new();
    for (combo, _) in DEMO_COMBOS {
        tables.push((
            PathBuf::from(format!("breakdown_{combo}.csv")),
            breakdown_csv(ctx, data_dir, combo)?,
        ));
    }
    tables.push((
        PathBuf::from("prediction_metrics.csv"),
        prediction_metrics_csv(ctx, data_dir)?,
    ));

    match out_dir {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            for (name, content) in &tables {
                write_output(Some(&dir.join(name)), content)?;
            }
            Ok(())
        }
        None => {
            let mut combined = String::new();
            for (name, content) in &tables {
                combined.push_str(&format!("# file: {}\n", name.display()));
                combined.push_str(content);
            }
            write_output(None, &combined)
        }
    }
}
