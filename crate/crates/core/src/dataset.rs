//! Energy datasets: rows pairing measured energy with feature values, loaded
//! from CSV. One dataset carries one provenance label (the hardware-software
//! combination it was measured on) and one feature schema.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::features;

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyRow {
    pub network: String,
    pub layer_kind: String,
    pub layer_name: String,
    pub energy_mj: f64,
    pub features: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyDataset {
    pub provenance: String,
    pub feature_names: Vec<String>,
    pub rows: Vec<EnergyRow>,
}

/// Fixed leading columns of a dataset CSV; the remaining columns are the
/// feature schema.
pub const FIXED_COLUMNS: [&str; 4] = ["network", "layer_kind", "layer_name", "energy_mj"];

impl EnergyDataset {
    pub fn new(
        provenance: impl Into<String>,
        feature_names: Vec<String>,
        rows: Vec<EnergyRow>,
    ) -> Result<EnergyDataset> {
        let provenance = provenance.into();
        if provenance.is_empty() {
            return Err(Error::invalid("energy dataset", "empty provenance label"));
        }
        for (i, row) in rows.iter().enumerate() {
            if !row.energy_mj.is_finite() || row.energy_mj <= 0.0 {
                return Err(Error::invalid(
                    "energy dataset",
                    format!("row {}: energy must be positive, found {}", i, row.energy_mj),
                ));
            }
            if row.features.len() != feature_names.len() {
                return Err(Error::invalid(
                    "energy dataset",
                    format!(
                        "row {}: {} feature values for {} columns",
                        i,
                        row.features.len(),
                        feature_names.len()
                    ),
                ));
            }
            if row.features.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(
                    "energy dataset",
                    format!("row {i}: non-finite feature value"),
                ));
            }
        }
        Ok(EnergyDataset {
            provenance,
            feature_names,
            rows,
        })
    }

    /// Load a CSV with header `network,layer_kind,layer_name,energy_mj` plus
    /// one column per feature.
    pub fn load_csv(path: impl AsRef<Path>, provenance: impl Into<String>) -> Result<EnergyDataset> {
        let path = path.as_ref();
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(std::io::BufReader::new(file));
        let headers = reader
            .headers()
            .map_err(|e| Error::syntax(path.display().to_string(), 1, e.to_string()))?
            .clone();
        if headers.len() < FIXED_COLUMNS.len()
            || !FIXED_COLUMNS
                .iter()
                .enumerate()
                .all(|(i, c)| headers.get(i) == Some(*c))
        {
            return Err(Error::syntax(
                path.display().to_string(),
                1,
                format!(
                    "expected header to start with '{}'",
                    FIXED_COLUMNS.join(",")
                ),
            ));
        }
        let feature_names: Vec<String> = headers
            .iter()
            .skip(FIXED_COLUMNS.len())
            .map(|s| s.to_string())
            .collect();

        let mut rows = Vec::new();
        for record in reader.records() {
            let record =
                record.map_err(|e| Error::syntax(path.display().to_string(), 0, e.to_string()))?;
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            if record.len() != headers.len() {
                return Err(Error::syntax(
                    path.display().to_string(),
                    line,
                    format!("expected {} fields, found {}", headers.len(), record.len()),
                ));
            }
            let energy_mj: f64 = record
                .get(3)
                .unwrap_or("")
                .trim()
                .parse()
                .map_err(|_| {
                    Error::syntax(
                        path.display().to_string(),
                        line,
                        format!("malformed energy_mj: '{}'", record.get(3).unwrap_or("")),
                    )
                })?;
            let mut feature_values = Vec::with_capacity(feature_names.len());
            for (i, name) in feature_names.iter().enumerate() {
                let raw = record.get(FIXED_COLUMNS.len() + i).unwrap_or("");
                let v: f64 = raw.trim().parse().map_err(|_| {
                    Error::syntax(
                        path.display().to_string(),
                        line,
                        format!("malformed feature '{name}': '{raw}'"),
                    )
                })?;
                feature_values.push(v);
            }
            rows.push(EnergyRow {
                network: record.get(0).unwrap_or("").to_string(),
                layer_kind: record.get(1).unwrap_or("").to_string(),
                layer_name: record.get(2).unwrap_or("").to_string(),
                energy_mj,
                features: feature_values,
            });
        }
        EnergyDataset::new(provenance, feature_names, rows)
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    /// Distinct network names in sorted order.
    pub fn networks(&self) -> Vec<String> {
        let mut names: Vec<String> = self.rows.iter().map(|r| r.network.clone()).collect();
        names.sort();
        names.dedup();
        names
    }

    /// Feature matrix restricted to the named columns, in the given order.
    pub fn feature_matrix(&self, names: &[String]) -> Result<Vec<Vec<f64>>> {
        let indices: Vec<usize> = names
            .iter()
            .map(|n| {
                self.feature_index(n).ok_or_else(|| {
                    Error::invalid("energy dataset", format!("no feature column '{n}'"))
                })
            })
            .collect::<Result<_>>()?;
        Ok(self
            .rows
            .iter()
            .map(|row| indices.iter().map(|&i| row.features[i]).collect())
            .collect())
    }

    pub fn energies(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.energy_mj).collect()
    }

    /// Degree-2 polynomial expansion of the feature schema (squares and
    /// pairwise cross terms appended after the base columns).
    pub fn expand_degree2(&self) -> EnergyDataset {
        let rows = self
            .rows
            .iter()
            .map(|row| {
                let (_, values) = features::expand_degree2(&self.feature_names, &row.features);
                EnergyRow {
                    features: values,
                    ..row.clone()
                }
            })
            .collect();
        let (names, _) = features::expand_degree2(
            &self.feature_names,
            &vec![0.0; self.feature_names.len()],
        );
        EnergyDataset {
            provenance: self.provenance.clone(),
            feature_names: names,
            rows,
        }
    }
}
