//! Power-trace ingestion, per-layer energy integration and layer-type
//! breakdown reports.
//!
//! Energy uses a right-endpoint rectangular rule: each sample interval
//! [t_i, t_{i+1}] contributes P_{i+1} * dt, with dt clipped to the requested
//! window. Clipping is pro-rata, so any contiguous partition of a span sums
//! to the energy of the whole span.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Microjoule-per-unit factor for mW * us.
const MW_US_TO_MJ: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerSample {
    /// Microseconds; strictly increasing within a trace.
    pub t_us: f64,
    /// Milliwatts; never negative.
    pub power_mw: f64,
}

/// A sampled power signal.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerTrace {
    pub samples: Vec<PowerSample>,
    /// Nominal sampling rate in Hz; descriptive only, integration uses the
    /// actual timestamps.
    pub nominal_rate_hz: f64,
}

pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 1000.0;

impl PowerTrace {
    pub fn new(samples: Vec<PowerSample>) -> Result<PowerTrace> {
        validate_samples(&samples)?;
        Ok(PowerTrace {
            samples,
            nominal_rate_hz: DEFAULT_SAMPLE_RATE_HZ,
        })
    }

    pub fn span(&self) -> (f64, f64) {
        (
            self.samples.first().map(|s| s.t_us).unwrap_or(0.0),
            self.samples.last().map(|s| s.t_us).unwrap_or(0.0),
        )
    }
}

fn validate_samples(samples: &[PowerSample]) -> Result<()> {
    if samples.len() < 2 {
        return Err(Error::invalid(
            "power trace",
            format!("need at least 2 samples, found {}", samples.len()),
        ));
    }
    for (i, s) in samples.iter().enumerate() {
        if !s.t_us.is_finite() || !s.power_mw.is_finite() {
            return Err(Error::invalid("power trace", format!("non-finite sample {i}")));
        }
        if s.power_mw < 0.0 {
            return Err(Error::invalid(
                "power trace",
                format!("negative power {} at sample {}", s.power_mw, i),
            ));
        }
        if i > 0 && s.t_us <= samples[i - 1].t_us {
            return Err(Error::invalid(
                "power trace",
                format!("non-monotonic timestamp at sample {i}"),
            ));
        }
    }
    Ok(())
}

/// One timestamped layer-execution interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Annotation {
    pub layer_name: String,
    pub layer_kind: String,
    pub begin_us: f64,
    pub end_us: f64,
    pub run_id: u32,
}

/// Timestamped layer intervals; entries sharing a run id must not overlap.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationLog {
    pub entries: Vec<Annotation>,
}

impl AnnotationLog {
    pub fn new(entries: Vec<Annotation>) -> Result<AnnotationLog> {
        for (i, e) in entries.iter().enumerate() {
            if !e.begin_us.is_finite() || !e.end_us.is_finite() || e.end_us <= e.begin_us {
                return Err(Error::invalid(
                    "annotation log",
                    format!(
                        "entry {} ('{}'): end {} must be greater than begin {}",
                        i, e.layer_name, e.end_us, e.begin_us
                    ),
                ));
            }
        }
        // Same-run entries must not overlap.
        let mut by_run: Vec<(u32, f64, f64, usize)> = entries
            .iter()
            .enumerate()
            .map(|(i, e)| (e.run_id, e.begin_us, e.end_us, i))
            .collect();
        by_run.sort_by(|a, b| (a.0, a.1).partial_cmp(&(b.0, b.1)).unwrap());
        for pair in by_run.windows(2) {
            let (run_a, _, end_a, idx_a) = pair[0];
            let (run_b, begin_b, _, idx_b) = pair[1];
            if run_a == run_b && begin_b < end_a {
                return Err(Error::invalid(
                    "annotation log",
                    format!("entries {idx_a} and {idx_b} overlap within run {run_a}"),
                ));
            }
        }
        Ok(AnnotationLog { entries })
    }
}

// ---------------------------------------------------------------------------
// CSV loading
// ---------------------------------------------------------------------------

/// Seconds-to-microseconds factor keyed by header suffix.
fn time_scale(header: &str, base: &str) -> Option<f64> {
    if header == format!("{base}_us") {
        Some(1.0)
    } else if header == format!("{base}_s") {
        Some(1e6)
    } else {
        None
    }
}

fn csv_reader(path: &Path) -> Result<csv::Reader<std::io::BufReader<fs::File>>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(std::io::BufReader::new(file)))
}

fn field<T: std::str::FromStr>(
    path: &Path,
    line: u64,
    record: &csv::StringRecord,
    idx: usize,
    what: &str,
) -> Result<T> {
    let raw = record.get(idx).ok_or_else(|| {
        Error::syntax(path.display().to_string(), line, format!("missing {what}"))
    })?;
    raw.trim().parse::<T>().map_err(|_| {
        Error::syntax(
            path.display().to_string(),
            line,
            format!("malformed {what}: '{raw}'"),
        )
    })
}

/// Load a power trace CSV with header `timestamp_us,power_mw` (or
/// `timestamp_s` for second-resolution files).
pub fn load_power_trace(path: impl AsRef<Path>) -> Result<PowerTrace> {
    let path = path.as_ref();
    let mut reader = csv_reader(path)?;
    let headers = reader
        .headers()
        .map_err(|e| Error::syntax(path.display().to_string(), 1, e.to_string()))?
        .clone();
    if headers.len() != 2 || headers.get(1) != Some("power_mw") {
        return Err(Error::syntax(
            path.display().to_string(),
            1,
            format!("expected header 'timestamp_us,power_mw', found '{}'", headers.iter().collect::<Vec<_>>().join(",")),
        ));
    }
    let scale = time_scale(headers.get(0).unwrap_or(""), "timestamp").ok_or_else(|| {
        Error::syntax(
            path.display().to_string(),
            1,
            format!("unrecognised timestamp column '{}'", headers.get(0).unwrap_or("")),
        )
    })?;

    let mut samples = Vec::new();
    for record in reader.records() {
        let record =
            record.map_err(|e| Error::syntax(path.display().to_string(), 0, e.to_string()))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let t: f64 = field(path, line, &record, 0, "timestamp")?;
        let p: f64 = field(path, line, &record, 1, "power")?;
        if p < 0.0 {
            return Err(Error::syntax(
                path.display().to_string(),
                line,
                format!("negative power {p}"),
            ));
        }
        if let Some(last) = samples.last() {
            let last: &PowerSample = last;
            if t * scale <= last.t_us {
                return Err(Error::syntax(
                    path.display().to_string(),
                    line,
                    "non-monotonic timestamp".to_string(),
                ));
            }
        }
        samples.push(PowerSample {
            t_us: t * scale,
            power_mw: p,
        });
    }
    PowerTrace::new(samples)
}

/// Load an annotation CSV with header
/// `layer_name,layer_kind,begin_us,end_us,run_id` (or `begin_s`/`end_s`).
pub fn load_annotations(path: impl AsRef<Path>) -> Result<AnnotationLog> {
    let path = path.as_ref();
    let mut reader = csv_reader(path)?;
    let headers = reader
        .headers()
        .map_err(|e| Error::syntax(path.display().to_string(), 1, e.to_string()))?
        .clone();
    let expected_fixed = ["layer_name", "layer_kind"];
    if headers.len() != 5
        || headers.get(0) != Some(expected_fixed[0])
        || headers.get(1) != Some(expected_fixed[1])
        || headers.get(4) != Some("run_id")
    {
        return Err(Error::syntax(
            path.display().to_string(),
            1,
            "expected header 'layer_name,layer_kind,begin_us,end_us,run_id'".to_string(),
        ));
    }
    let begin_scale = time_scale(headers.get(2).unwrap_or(""), "begin");
    let end_scale = time_scale(headers.get(3).unwrap_or(""), "end");
    let (begin_scale, end_scale) = match (begin_scale, end_scale) {
        (Some(b), Some(e)) if b == e => (b, e),
        _ => {
            return Err(Error::syntax(
                path.display().to_string(),
                1,
                "begin/end columns must both be '_us' or both '_s'".to_string(),
            ))
        }
    };

    let mut entries = Vec::new();
    for record in reader.records() {
        let record =
            record.map_err(|e| Error::syntax(path.display().to_string(), 0, e.to_string()))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let begin: f64 = field(path, line, &record, 2, "begin")?;
        let end: f64 = field(path, line, &record, 3, "end")?;
        let run_id: u32 = field(path, line, &record, 4, "run_id")?;
        let entry = Annotation {
            layer_name: record.get(0).unwrap_or("").to_string(),
            layer_kind: record.get(1).unwrap_or("").to_string(),
            begin_us: begin * begin_scale,
            end_us: end * end_scale,
            run_id,
        };
        if !entry.begin_us.is_finite() || !entry.end_us.is_finite() || entry.end_us <= entry.begin_us
        {
            return Err(Error::syntax(
                path.display().to_string(),
                line,
                format!("end {} must be greater than begin {}", end, begin),
            ));
        }
        entries.push(entry);
    }
    AnnotationLog::new(entries)
}

// ---------------------------------------------------------------------------
// Integration
// ---------------------------------------------------------------------------

/// Energy in millijoules over [begin, end], which must overlap the trace span.
pub fn integrate_energy(trace: &PowerTrace, begin_us: f64, end_us: f64) -> Result<f64> {
    if !begin_us.is_finite() || !end_us.is_finite() || end_us <= begin_us {
        return Err(Error::invalid(
            "integrate_energy",
            format!("degenerate window [{begin_us}, {end_us}]"),
        ));
    }
    let (t_first, t_last) = trace.span();
    if end_us <= t_first || begin_us >= t_last {
        return Err(Error::invalid(
            "integrate_energy",
            format!(
                "window [{begin_us}, {end_us}] lies outside trace span [{t_first}, {t_last}]"
            ),
        ));
    }

    let mut energy_mj = 0.0;
    for pair in trace.samples.windows(2) {
        let (lo, hi) = (pair[0].t_us, pair[1].t_us);
        let dt = hi.min(end_us) - lo.max(begin_us);
        if dt > 0.0 {
            energy_mj += pair[1].power_mw * dt * MW_US_TO_MJ;
        }
    }
    Ok(energy_mj)
}

/// One integrated annotation entry.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerEnergyRow {
    pub layer_name: String,
    pub layer_kind: String,
    pub run_id: u32,
    pub begin_us: f64,
    pub end_us: f64,
    pub energy_mj: f64,
}

impl LayerEnergyRow {
    pub fn duration_s(&self) -> f64 {
        (self.end_us - self.begin_us) * 1e-6
    }
}

/// Mean and sample standard deviation over the runs of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerEnergySummary {
    pub layer_name: String,
    pub layer_kind: String,
    pub runs: usize,
    pub mean_mj: f64,
    pub std_mj: f64,
    pub mean_duration_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerLayerEnergy {
    pub rows: Vec<LayerEnergyRow>,
    pub summaries: Vec<LayerEnergySummary>,
    /// Annotations skipped because they fell entirely outside the trace span.
    pub skipped: usize,
}

fn sample_std(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (ss / (values.len() - 1) as f64).sqrt()
}

/// Integrate every annotation window. Entries outside the trace span are
/// skipped and counted; callers should surface the count as a warning.
pub fn per_layer_energy(trace: &PowerTrace, log: &AnnotationLog) -> Result<PerLayerEnergy> {
    let (t_first, t_last) = trace.span();
    let mut rows = Vec::new();
    let mut skipped = 0usize;
    for entry in &log.entries {
        if entry.end_us <= t_first || entry.begin_us >= t_last {
            skipped += 1;
            continue;
        }
        let energy_mj = integrate_energy(trace, entry.begin_us, entry.end_us)?;
        rows.push(LayerEnergyRow {
            layer_name: entry.layer_name.clone(),
            layer_kind: entry.layer_kind.clone(),
            run_id: entry.run_id,
            begin_us: entry.begin_us,
            end_us: entry.end_us,
            energy_mj,
        });
    }

    // Group by (name, kind) in first-appearance order.
    let mut order: Vec<(String, String)> = Vec::new();
    for row in &rows {
        let key = (row.layer_name.clone(), row.layer_kind.clone());
        if !order.contains(&key) {
            order.push(key);
        }
    }
    let summaries = order
        .into_iter()
        .map(|(name, kind)| {
            let energies: Vec<f64> = rows
                .iter()
                .filter(|r| r.layer_name == name && r.layer_kind == kind)
                .map(|r| r.energy_mj)
                .collect();
            let durations: Vec<f64> = rows
                .iter()
                .filter(|r| r.layer_name == name && r.layer_kind == kind)
                .map(|r| r.duration_s())
                .collect();
            LayerEnergySummary {
                layer_name: name,
                layer_kind: kind,
                runs: energies.len(),
                mean_mj: energies.iter().sum::<f64>() / energies.len() as f64,
                std_mj: sample_std(&energies),
                mean_duration_s: durations.iter().sum::<f64>() / durations.len() as f64,
            }
        })
        .collect();

    Ok(PerLayerEnergy {
        rows,
        summaries,
        skipped,
    })
}

/// Per-kind share of total energy and time.
#[derive(Debug, Clone, PartialEq)]
pub struct BreakdownRow {
    pub layer_kind: String,
    pub energy_mj: f64,
    pub time_s: f64,
    pub energy_pct: f64,
    pub time_pct: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BreakdownTable {
    pub rows: Vec<BreakdownRow>,
    pub total_energy_mj: f64,
    pub total_time_s: f64,
}

/// Sum energy and time per layer kind (first-appearance order) and express
/// each as a percentage of the totals.
pub fn layer_type_breakdown(rows: &[LayerEnergyRow]) -> Result<BreakdownTable> {
    if rows.is_empty() {
        return Err(Error::invalid("layer_type_breakdown", "no rows"));
    }
    let mut kinds: Vec<String> = Vec::new();
    for row in rows {
        if !kinds.contains(&row.layer_kind) {
            kinds.push(row.layer_kind.clone());
        }
    }
    let total_energy: f64 = rows.iter().map(|r| r.energy_mj).sum();
    let total_time: f64 = rows.iter().map(|r| r.duration_s()).sum();
    if total_energy <= 0.0 {
        return Err(Error::invalid("layer_type_breakdown", "zero total energy"));
    }

    let table_rows = kinds
        .into_iter()
        .map(|kind| {
            let energy: f64 = rows
                .iter()
                .filter(|r| r.layer_kind == kind)
                .map(|r| r.energy_mj)
                .sum();
            let time: f64 = rows
                .iter()
                .filter(|r| r.layer_kind == kind)
                .map(|r| r.duration_s())
                .sum();
            BreakdownRow {
                layer_kind: kind,
                energy_mj: energy,
                time_s: time,
                energy_pct: 100.0 * energy / total_energy,
                time_pct: if total_time > 0.0 {
                    100.0 * time / total_time
                } else {
                    0.0
                },
            }
        })
        .collect();

    Ok(BreakdownTable {
        rows: table_rows,
        total_energy_mj: total_energy,
        total_time_s: total_time,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant_trace(power_mw: f64, step_us: f64, n: usize) -> PowerTrace {
        PowerTrace::new(
            (0..n)
                .map(|i| PowerSample {
                    t_us: i as f64 * step_us,
                    power_mw,
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn constant_power_times_duration() {
        // 1000 mW sampled every 1 ms over a 10 ms window.
        let trace = constant_trace(1000.0, 1000.0, 11);
        let e = integrate_energy(&trace, 0.0, 10_000.0).unwrap();
        assert!((e - 10.0).abs() < 1e-12, "{e}");
    }

    #[test]
    fn right_endpoint_rule_single_interval() {
        let trace = PowerTrace::new(vec![
            PowerSample { t_us: 0.0, power_mw: 0.0 },
            PowerSample { t_us: 1000.0, power_mw: 2000.0 },
        ])
        .unwrap();
        let e = integrate_energy(&trace, 0.0, 1000.0).unwrap();
        assert!((e - 2.0).abs() < 1e-12, "{e}");
    }

    #[test]
    fn linear_ramp_full_window() {
        // 0 -> 1000 mW over 1 s at 1 kHz; right-endpoint sum is 500.5 mJ.
        let trace = PowerTrace::new(
            (0..=1000)
                .map(|i| PowerSample {
                    t_us: i as f64 * 1000.0,
                    power_mw: i as f64,
                })
                .collect(),
        )
        .unwrap();
        let e = integrate_energy(&trace, 0.0, 1_000_000.0).unwrap();
        assert!((e - 500.5).abs() < 1e-9, "{e}");
    }

    #[test]
    fn one_khz_trace_metadata() {
        // 2.06 s at 1 kHz: 2060 samples, default nominal rate.
        let trace = constant_trace(1500.0, 1000.0, 2060);
        assert_eq!(trace.samples.len(), 2060);
        assert_eq!(trace.nominal_rate_hz, 1000.0);
    }

    #[test]
    fn rejects_degenerate_and_disjoint_windows() {
        let trace = constant_trace(1.0, 1000.0, 3);
        assert!(integrate_energy(&trace, 500.0, 500.0).is_err());
        assert!(integrate_energy(&trace, 5000.0, 6000.0).is_err());
    }

    #[test]
    fn window_growth_never_decreases_energy() {
        let trace = constant_trace(7.0, 1000.0, 20);
        let mut last = 0.0;
        for end in [2_000.0, 5_000.0, 11_000.0, 19_000.0] {
            let e = integrate_energy(&trace, 0.0, end).unwrap();
            assert!(e >= last);
            last = e;
        }
    }

    #[test]
    fn annotation_validation() {
        let bad = AnnotationLog::new(vec![Annotation {
            layer_name: "l".into(),
            layer_kind: "Conv".into(),
            begin_us: 10.0,
            end_us: 10.0,
            run_id: 1,
        }]);
        assert!(bad.is_err());

        let overlapping = AnnotationLog::new(vec![
            Annotation {
                layer_name: "a".into(),
                layer_kind: "Conv".into(),
                begin_us: 0.0,
                end_us: 100.0,
                run_id: 1,
            },
            Annotation {
                layer_name: "b".into(),
                layer_kind: "Conv".into(),
                begin_us: 50.0,
                end_us: 150.0,
                run_id: 1,
            },
        ]);
        assert!(overlapping.is_err());

        // Same interval in different runs is fine.
        let ok = AnnotationLog::new(vec![
            Annotation {
                layer_name: "a".into(),
                layer_kind: "Conv".into(),
                begin_us: 0.0,
                end_us: 100.0,
                run_id: 1,
            },
            Annotation {
                layer_name: "a".into(),
                layer_kind: "Conv".into(),
                begin_us: 0.0,
                end_us: 100.0,
                run_id: 2,
            },
        ]);
        assert!(ok.is_ok());
    }

    #[test]
    fn full_cover_annotation_equals_total() {
        let trace = constant_trace(500.0, 1000.0, 21);
        let log = AnnotationLog::new(vec![Annotation {
            layer_name: "all".into(),
            layer_kind: "Conv".into(),
            begin_us: 0.0,
            end_us: 20_000.0,
            run_id: 1,
        }])
        .unwrap();
        let per = per_layer_energy(&trace, &log).unwrap();
        let total = integrate_energy(&trace, 0.0, 20_000.0).unwrap();
        assert_eq!(per.rows.len(), 1);
        assert!((per.rows[0].energy_mj - total).abs() < 1e-12);
    }

    #[test]
    fn back_to_back_windows_conserve_energy() {
        let trace = PowerTrace::new(
            (0..=50)
                .map(|i| PowerSample {
                    t_us: i as f64 * 997.0,
                    power_mw: (i % 7) as f64 * 113.0,
                })
                .collect(),
        )
        .unwrap();
        let (lo, hi) = trace.span();
        let mid = lo + (hi - lo) * 0.37;
        let total = integrate_energy(&trace, lo, hi).unwrap();
        let a = integrate_energy(&trace, lo, mid).unwrap();
        let b = integrate_energy(&trace, mid, hi).unwrap();
        assert!(((a + b) - total).abs() <= 1e-9 * total.abs().max(1.0));
    }

    #[test]
    fn identical_runs_have_zero_std() {
        let trace = constant_trace(250.0, 1000.0, 101);
        let entries: Vec<Annotation> = (1..=5)
            .map(|run| Annotation {
                layer_name: "conv1".into(),
                layer_kind: "Conv".into(),
                begin_us: 10_000.0,
                end_us: 30_000.0,
                run_id: run,
            })
            .collect();
        let per = per_layer_energy(&trace, &AnnotationLog::new(entries).unwrap()).unwrap();
        assert_eq!(per.summaries.len(), 1);
        let s = &per.summaries[0];
        assert_eq!(s.runs, 5);
        assert_eq!(s.std_mj, 0.0);
        assert!((s.mean_mj - 5.0).abs() < 1e-12, "{}", s.mean_mj);
    }

    #[test]
    fn out_of_span_annotations_are_skipped() {
        let trace = constant_trace(100.0, 1000.0, 11);
        let log = AnnotationLog::new(vec![
            Annotation {
                layer_name: "pre".into(),
                layer_kind: "Setup".into(),
                begin_us: -5000.0,
                end_us: -1000.0,
                run_id: 1,
            },
            Annotation {
                layer_name: "conv".into(),
                layer_kind: "Conv".into(),
                begin_us: 0.0,
                end_us: 10_000.0,
                run_id: 1,
            },
        ])
        .unwrap();
        let per = per_layer_energy(&trace, &log).unwrap();
        assert_eq!(per.skipped, 1);
        assert_eq!(per.rows.len(), 1);
    }

    fn write_temp(name: &str, content: &str) -> std::path::PathBuf {
        let path = std::env::temp_dir().join(format!("convwatt-trace-{}-{}", std::process::id(), name));
        std::fs::write(&path, content).unwrap();
        path
    }

    #[test]
    fn loads_three_sample_trace_file() {
        let path = write_temp(
            "three.csv",
            "timestamp_us,power_mw\n0,100.0\n1000,110.0\n2000,105.0\n",
        );
        let trace = load_power_trace(&path).unwrap();
        std::fs::remove_file(&path).ok();
        assert_eq!(trace.samples.len(), 3);
        assert_eq!(trace.nominal_rate_hz, 1000.0);
    }

    #[test]
    fn trace_loader_accepts_second_timestamps() {
        let path = write_temp(
            "seconds.csv",
            "timestamp_s,power_mw\n0.0,100.0\n0.001,110.0\n0.002,105.0\n",
        );
        let trace = load_power_trace(&path).unwrap();
        std::fs::remove_file(&path).ok();
        assert_eq!(trace.samples[1].t_us, 1000.0);
    }

    #[test]
    fn trace_loader_rejects_bad_rows() {
        let negative = write_temp("neg.csv", "timestamp_us,power_mw\n0,100.0\n1000,-5.0\n");
        let err = load_power_trace(&negative).unwrap_err();
        std::fs::remove_file(&negative).ok();
        assert!(err.to_string().contains("negative power"), "{err}");
        assert!(err.to_string().contains(":3"), "row number reported: {err}");

        let backwards = write_temp("mono.csv", "timestamp_us,power_mw\n1000,1.0\n500,1.0\n");
        let err = load_power_trace(&backwards).unwrap_err();
        std::fs::remove_file(&backwards).ok();
        assert!(err.to_string().contains("non-monotonic"), "{err}");
    }

    #[test]
    fn annotation_loader_rejects_inverted_window() {
        let path = write_temp(
            "ann.csv",
            "layer_name,layer_kind,begin_us,end_us,run_id\nconv1,Conv,5000,5000,1\n",
        );
        let err = load_annotations(&path).unwrap_err();
        std::fs::remove_file(&path).ok();
        assert!(err.to_string().contains("greater than begin"), "{err}");
    }

    #[test]
    fn breakdown_single_kind_is_100_percent() {
        let rows = vec![LayerEnergyRow {
            layer_name: "c".into(),
            layer_kind: "Conv".into(),
            run_id: 1,
            begin_us: 0.0,
            end_us: 1000.0,
            energy_mj: 3.5,
        }];
        let table = layer_type_breakdown(&rows).unwrap();
        assert_eq!(table.rows.len(), 1);
        assert_eq!(table.rows[0].energy_pct, 100.0);
    }

    #[test]
    fn breakdown_percentages_are_scale_invariant() {
        let rows = vec![
            LayerEnergyRow {
                layer_name: "c".into(),
                layer_kind: "Conv".into(),
                run_id: 1,
                begin_us: 0.0,
                end_us: 2000.0,
                energy_mj: 6.0,
            },
            LayerEnergyRow {
                layer_name: "p".into(),
                layer_kind: "MaxPool".into(),
                run_id: 1,
                begin_us: 2000.0,
                end_us: 3000.0,
                energy_mj: 2.0,
            },
        ];
        let scaled: Vec<LayerEnergyRow> = rows
            .iter()
            .map(|r| LayerEnergyRow {
                energy_mj: r.energy_mj * 17.0,
                ..r.clone()
            })
            .collect();
        let a = layer_type_breakdown(&rows).unwrap();
        let b = layer_type_breakdown(&scaled).unwrap();
        for (ra, rb) in a.rows.iter().zip(&b.rows) {
            assert!((ra.energy_pct - rb.energy_pct).abs() < 1e-9);
        }
        let pct_sum: f64 = a.rows.iter().map(|r| r.energy_pct).sum();
        assert!((pct_sum - 100.0).abs() < 0.1);
    }
}
