//! Ordinary least squares with BIC scoring and feature-subset selection.
//!
//! Fitting centres the response and every feature column, scales the centred
//! columns to unit RMS for conditioning, and solves the scaled system through
//! a rank-revealing SVD. Linearly dependent columns therefore get the
//! minimum-norm solution instead of failing, and the intercept is recovered
//! from the column means rather than taking part in the norm minimisation.

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// RSS clamp so perfect fits keep a finite BIC.
pub const RSS_EPSILON: f64 = 1e-12;

/// Subset counts above this are refused by the exhaustive search.
pub const EXHAUSTIVE_LIMIT: usize = 15;

/// A fitted linear model: `energy = intercept + sum(coefficients * features)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionModel {
    pub feature_names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub n_train: usize,
    pub rss: f64,
    pub bic: f64,
    pub degree: u8,
}

impl RegressionModel {
    /// Number of features, excluding the intercept.
    pub fn complexity(&self) -> usize {
        self.feature_names.len()
    }

    /// Predict from values given in the model's own feature order.
    pub fn predict(&self, features: &[f64]) -> f64 {
        self.intercept
            + self
                .coefficients
                .iter()
                .zip(features)
                .map(|(c, x)| c * x)
                .sum::<f64>()
    }

    /// Predict after checking that the caller's schema matches the model's.
    pub fn predict_named(&self, names: &[String], values: &[f64]) -> Result<f64> {
        if names != self.feature_names.as_slice() {
            return Err(Error::invalid(
                "predict",
                format!(
                    "feature schema mismatch: model [{}] vs input [{}]",
                    self.feature_names.join(","),
                    names.join(",")
                ),
            ));
        }
        Ok(self.predict(values))
    }
}

/// Deviance-form BIC: `n*ln(max(rss, eps)/n) + k*ln(n)`, lower is better.
/// `k_coeffs` counts every estimated coefficient including the intercept.
pub fn bic_score(n: usize, rss: f64, k_coeffs: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("bic_score", "n must be positive"));
    }
    if !rss.is_finite() || rss < 0.0 {
        return Err(Error::invalid("bic_score", format!("invalid rss {rss}")));
    }
    let n_f = n as f64;
    Ok(n_f * (rss.max(RSS_EPSILON) / n_f).ln() + k_coeffs as f64 * n_f.ln())
}

fn check_finite(context: &str, values: &[f64]) -> Result<()> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid(context, "non-finite input"));
    }
    Ok(())
}

/// Least-squares fit of `y` on the named columns of `rows` (row-major, one
/// entry per observation). `m = 0` fits the intercept alone.
pub fn fit_ols(
    feature_names: &[String],
    rows: &[Vec<f64>],
    y: &[f64],
    degree: u8,
) -> Result<RegressionModel> {
    let n = y.len();
    let m = feature_names.len();
    if n == 0 {
        return Err(Error::invalid("fit_ols", "no observations"));
    }
    if rows.len() != n {
        return Err(Error::invalid(
            "fit_ols",
            format!("{} feature rows for {} responses", rows.len(), n),
        ));
    }
    check_finite("fit_ols", y)?;
    for row in rows {
        if row.len() != m {
            return Err(Error::invalid(
                "fit_ols",
                format!("feature row of length {} for {} columns", row.len(), m),
            ));
        }
        check_finite("fit_ols", row)?;
    }

    let y_mean = y.iter().sum::<f64>() / n as f64;

    let mut means = vec![0.0; m];
    for row in rows {
        for (j, v) in row.iter().enumerate() {
            means[j] += v;
        }
    }
    for mean in &mut means {
        *mean /= n as f64;
    }

    // Unit-RMS scaling of the centred columns; columns that centre to
    // (numerically) zero are excluded and keep a zero coefficient.
    let mut scales = vec![0.0; m];
    let mut raw_rms = vec![0.0; m];
    for row in rows {
        for j in 0..m {
            let c = row[j] - means[j];
            scales[j] += c * c;
            raw_rms[j] += row[j] * row[j];
        }
    }
    let mut active: Vec<usize> = Vec::new();
    for j in 0..m {
        scales[j] = (scales[j] / n as f64).sqrt();
        raw_rms[j] = (raw_rms[j] / n as f64).sqrt();
        if scales[j] > 1e-13 * (raw_rms[j] + 1.0) {
            active.push(j);
        }
    }

    let mut coefficients = vec![0.0; m];
    if !active.is_empty() {
        let a = DMatrix::from_fn(n, active.len(), |i, k| {
            let j = active[k];
            (rows[i][j] - means[j]) / scales[j]
        });
        let b = DVector::from_fn(n, |i, _| y[i] - y_mean);
        let svd = a.svd(true, true);
        let max_sv = svd.singular_values.iter().cloned().fold(0.0, f64::max);
        let eps = (max_sv * f64::EPSILON * n.max(active.len()) as f64).max(f64::MIN_POSITIVE);
        let beta = svd
            .solve(&b, eps)
            .map_err(|e| Error::invalid("fit_ols", e))?;
        for (k, &j) in active.iter().enumerate() {
            coefficients[j] = beta[k] / scales[j];
        }
    }

    let intercept = y_mean
        - coefficients
            .iter()
            .zip(&means)
            .map(|(c, mu)| c * mu)
            .sum::<f64>();

    let mut rss = 0.0;
    for (row, &yi) in rows.iter().zip(y) {
        let pred = intercept
            + coefficients
                .iter()
                .zip(row)
                .map(|(c, x)| c * x)
                .sum::<f64>();
        let r = yi - pred;
        rss += r * r;
    }

    let bic = bic_score(n, rss, m + 1)?;
    Ok(RegressionModel {
        feature_names: feature_names.to_vec(),
        coefficients,
        intercept,
        n_train: n,
        rss,
        bic,
        degree,
    })
}

/// The best subset found at one size.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionEntry {
    pub size: usize,
    /// Feature names sorted alphabetically; the tie-break key.
    pub feature_names: Vec<String>,
    pub bic: f64,
}

/// Best subset per examined size, plus the overall minimum-BIC entry.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionPath {
    pub entries: Vec<SelectionEntry>,
    pub selected: usize,
}

impl SelectionPath {
    pub fn selected_entry(&self) -> &SelectionEntry {
        &self.entries[self.selected]
    }

    fn finish(entries: Vec<SelectionEntry>) -> Result<SelectionPath> {
        if entries.is_empty() {
            return Err(Error::invalid("feature selection", "empty path"));
        }
        let mut selected = 0;
        for (i, e) in entries.iter().enumerate() {
            let best = &entries[selected];
            if e.bic < best.bic
                || (e.bic == best.bic
                    && (e.size, &e.feature_names) < (best.size, &best.feature_names))
            {
                selected = i;
            }
        }
        Ok(SelectionPath { entries, selected })
    }
}

/// Columns of the named subset, sorted by feature name so the fit (and its
/// floating-point result) is independent of the candidate input order.
fn subset_design(
    names: &[String],
    rows: &[Vec<f64>],
    subset: &[usize],
) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut ordered: Vec<usize> = subset.to_vec();
    ordered.sort_by(|&a, &b| names[a].cmp(&names[b]));
    let sub_names: Vec<String> = ordered.iter().map(|&j| names[j].clone()).collect();
    let sub_rows: Vec<Vec<f64>> = rows
        .iter()
        .map(|row| ordered.iter().map(|&j| row[j]).collect())
        .collect();
    (sub_names, sub_rows)
}

/// Exhaustive best-subset search over at most [`EXHAUSTIVE_LIMIT`] candidates.
/// For every size k the minimum-BIC subset of that size is recorded; ties go
/// to the lexicographically smallest feature-name tuple.
pub fn best_subset_exhaustive(
    feature_names: &[String],
    rows: &[Vec<f64>],
    y: &[f64],
    degree: u8,
) -> Result<SelectionPath> {
    let m = feature_names.len();
    if m == 0 {
        return Err(Error::invalid("best_subset_exhaustive", "no candidate features"));
    }
    if m > EXHAUSTIVE_LIMIT {
        return Err(Error::invalid(
            "best_subset_exhaustive",
            format!("{m} candidates exceed the exhaustive limit of {EXHAUSTIVE_LIMIT}; use forward_stepwise"),
        ));
    }

    let mut entries = Vec::with_capacity(m);
    for k in 1..=m {
        let mut best: Option<SelectionEntry> = None;
        for subset in (0..m).combinations(k) {
            let (sub_names, sub_rows) = subset_design(feature_names, rows, &subset);
            let model = fit_ols(&sub_names, &sub_rows, y, degree)?;
            let candidate = SelectionEntry {
                size: k,
                feature_names: sub_names,
                bic: model.bic,
            };
            let better = match &best {
                None => true,
                Some(b) => {
                    candidate.bic < b.bic
                        || (candidate.bic == b.bic && candidate.feature_names < b.feature_names)
                }
            };
            if better {
                best = Some(candidate);
            }
        }
        entries.push(best.expect("at least one subset per size"));
    }
    SelectionPath::finish(entries)
}

/// Greedy forward selection: at each size add the candidate whose addition
/// gives the lowest BIC. The path is recorded through `max_size` (default:
/// all candidates) even past the point where BIC stops improving, so the
/// whole curve can be plotted; `selected` is the minimum along the path.
pub fn forward_stepwise(
    feature_names: &[String],
    rows: &[Vec<f64>],
    y: &[f64],
    degree: u8,
    max_size: Option<usize>,
) -> Result<SelectionPath> {
    let m = feature_names.len();
    if m == 0 {
        return Err(Error::invalid("forward_stepwise", "no candidate features"));
    }
    let limit = max_size.unwrap_or(m).min(m).max(1);

    // Candidates are visited in name order so ties resolve to the
    // lexicographically smallest addition.
    let mut remaining: Vec<usize> = (0..m).collect();
    remaining.sort_by(|&a, &b| feature_names[a].cmp(&feature_names[b]));
    let mut current: Vec<usize> = Vec::new();
    let mut entries = Vec::with_capacity(limit);

    for size in 1..=limit {
        let mut best: Option<(usize, SelectionEntry)> = None;
        for (pos, &candidate) in remaining.iter().enumerate() {
            let mut subset = current.clone();
            subset.push(candidate);
            let (sub_names, sub_rows) = subset_design(feature_names, rows, &subset);
            let model = fit_ols(&sub_names, &sub_rows, y, degree)?;
            let entry = SelectionEntry {
                size,
                feature_names: sub_names,
                bic: model.bic,
            };
            let better = match &best {
                None => true,
                Some((_, b)) => entry.bic < b.bic,
            };
            if better {
                best = Some((pos, entry));
            }
        }
        let (pos, entry) = best.expect("at least one candidate remains");
        current.push(remaining.remove(pos));
        entries.push(entry);
    }
    SelectionPath::finish(entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(list: &[&str]) -> Vec<String> {
        list.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn exact_line_through_origin() {
        let model = fit_ols(
            &names(&["x"]),
            &[vec![1.0], vec![2.0], vec![3.0]],
            &[2.0, 4.0, 6.0],
            1,
        )
        .unwrap();
        assert!((model.coefficients[0] - 2.0).abs() < 1e-12);
        assert!(model.intercept.abs() < 1e-12);
        assert!(model.rss < 1e-20);
    }

    #[test]
    fn constant_response_gives_intercept_only() {
        let rows = vec![vec![1.0, 9.0], vec![2.0, 4.0], vec![3.0, 7.0], vec![4.0, 1.0]];
        let model = fit_ols(&names(&["a", "b"]), &rows, &[5.0, 5.0, 5.0, 5.0], 1).unwrap();
        assert!((model.intercept - 5.0).abs() < 1e-12);
        for c in &model.coefficients {
            assert!(c.abs() < 1e-12, "{c}");
        }
    }

    #[test]
    fn intercept_only_fit() {
        let model = fit_ols(&[], &[vec![], vec![], vec![]], &[1.0, 2.0, 6.0], 1).unwrap();
        assert!((model.intercept - 3.0).abs() < 1e-12);
        assert!((model.rss - 14.0).abs() < 1e-12);
    }

    #[test]
    fn recovers_planted_coefficients() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let (n, m) = (20, 3);
        let planted = [3.5, -2.0, 0.75];
        let intercept = 11.0;
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..m).map(|_| rng.random_range(-5.0..5.0)).collect())
            .collect();
        let y: Vec<f64> = rows
            .iter()
            .map(|r| intercept + r.iter().zip(planted).map(|(x, c)| x * c).sum::<f64>())
            .collect();
        let model = fit_ols(&names(&["a", "b", "c"]), &rows, &y, 1).unwrap();
        for (got, want) in model.coefficients.iter().zip(planted) {
            assert!((got - want).abs() < 1e-8 * want.abs().max(1.0), "{got} vs {want}");
        }
        assert!((model.intercept - intercept).abs() < 1e-8);
    }

    #[test]
    fn duplicated_column_keeps_predictions() {
        let rows_single: Vec<Vec<f64>> =
            (0..10).map(|i| vec![i as f64]).collect();
        let rows_dup: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, i as f64]).collect();
        let y: Vec<f64> = (0..10).map(|i| 1.5 + 0.5 * i as f64).collect();
        let single = fit_ols(&names(&["x"]), &rows_single, &y, 1).unwrap();
        let dup = fit_ols(&names(&["x", "x2"]), &rows_dup, &y, 1).unwrap();
        for i in 0..10 {
            let a = single.predict(&rows_single[i]);
            let b = dup.predict(&rows_dup[i]);
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn residuals_orthogonal_to_design() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let (n, m) = (40, 4);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..m).map(|_| rng.random_range(0.0..100.0)).collect())
            .collect();
        let y: Vec<f64> = rows
            .iter()
            .map(|r| 2.0 * r[0] - r[1] + 0.1 * r[2] + rng.random_range(-3.0..3.0))
            .collect();
        let model = fit_ols(&names(&["a", "b", "c", "d"]), &rows, &y, 1).unwrap();
        let residuals: Vec<f64> = rows
            .iter()
            .zip(&y)
            .map(|(r, &yi)| yi - model.predict(r))
            .collect();
        let r_norm = residuals.iter().map(|r| r * r).sum::<f64>().sqrt();
        for j in 0..m {
            let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            let col_norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
            let dot: f64 = residuals.iter().zip(&col).map(|(r, c)| r * c).sum();
            assert!(
                dot.abs() <= 1e-6 * r_norm * col_norm + 1e-9,
                "column {j}: residual dot {dot}"
            );
        }
    }

    #[test]
    fn bic_hand_value() {
        let bic = bic_score(100, 100.0, 2).unwrap();
        assert!((bic - 2.0 * 100.0_f64.ln()).abs() < 1e-9, "{bic}");
        assert!((bic - 9.21034037).abs() < 1e-6);
    }

    #[test]
    fn bic_zero_rss_is_finite() {
        let bic = bic_score(10, 0.0, 2).unwrap();
        assert!(bic.is_finite());
        assert!(bic < 0.0);
    }

    #[test]
    fn bic_penalises_extra_coefficients() {
        let small = bic_score(50, 12.5, 2).unwrap();
        let large = bic_score(50, 12.5, 3).unwrap();
        assert!(large > small);
    }

    #[test]
    fn bic_rejects_empty_sample() {
        assert!(bic_score(0, 1.0, 1).is_err());
    }

    fn single_predictor_data() -> (Vec<String>, Vec<Vec<f64>>, Vec<f64>) {
        // y depends on A alone; B and C are noise-free distractors.
        let rows: Vec<Vec<f64>> = (0..12)
            .map(|i| {
                let i = i as f64;
                vec![i, (i * 7.0) % 5.0, (i * 3.0) % 11.0]
            })
            .collect();
        let y: Vec<f64> = rows.iter().map(|r| 3.0 * r[0]).collect();
        (names(&["A", "B", "C"]), rows, y)
    }

    #[test]
    fn exhaustive_selects_the_predictive_feature() {
        let (n, rows, y) = single_predictor_data();
        let path = best_subset_exhaustive(&n, &rows, &y, 1).unwrap();
        assert_eq!(path.entries.len(), 3);
        let selected = path.selected_entry();
        assert_eq!(selected.size, 1);
        assert_eq!(selected.feature_names, vec!["A"]);
    }

    #[test]
    fn duplicate_column_does_not_grow_the_selection() {
        let (mut n, mut rows, y) = single_predictor_data();
        n.push("A2".into());
        for row in &mut rows {
            let a = row[0];
            row.push(a);
        }
        let path = best_subset_exhaustive(&n, &rows, &y, 1).unwrap();
        assert_eq!(path.selected_entry().size, 1);
    }

    #[test]
    fn stepwise_first_step_picks_the_predictor() {
        let (n, rows, y) = single_predictor_data();
        let path = forward_stepwise(&n, &rows, &y, 1, None).unwrap();
        assert_eq!(path.entries[0].feature_names, vec!["A"]);
        assert_eq!(path.entries.len(), 3);
    }

    #[test]
    fn stepwise_never_beats_exhaustive() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        for _ in 0..10 {
            let m = rng.random_range(3..=6);
            let n_rows = rng.random_range(12..=24);
            let feature_names: Vec<String> = (0..m).map(|j| format!("f{j}")).collect();
            let rows: Vec<Vec<f64>> = (0..n_rows)
                .map(|_| (0..m).map(|_| rng.random_range(-4.0..4.0)).collect())
                .collect();
            let y: Vec<f64> = rows
                .iter()
                .map(|r| r[0] * 2.0 - r[1 % m] + rng.random_range(-0.5..0.5))
                .collect();
            let ex = best_subset_exhaustive(&feature_names, &rows, &y, 1).unwrap();
            let fw = forward_stepwise(&feature_names, &rows, &y, 1, None).unwrap();
            assert!(
                fw.selected_entry().bic >= ex.selected_entry().bic - 1e-9,
                "stepwise {} vs exhaustive {}",
                fw.selected_entry().bic,
                ex.selected_entry().bic
            );
        }
    }

    #[test]
    fn stepwise_walks_a_90_candidate_expansion() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(41);
        // 12 base columns expanded to 90 candidates, the way a degree-2
        // feature study presents them.
        let base: Vec<String> = (0..12).map(|j| format!("b{j:02}")).collect();
        let n_rows = 40;
        let rows: Vec<Vec<f64>> = (0..n_rows)
            .map(|_| {
                let values: Vec<f64> = (0..12).map(|_| rng.random_range(0.5..4.0)).collect();
                crate::features::expand_degree2(&base, &values).1
            })
            .collect();
        let names = crate::features::expand_degree2(&base, &[0.0; 12]).0;
        assert_eq!(names.len(), 90);
        let y: Vec<f64> = rows
            .iter()
            .map(|r| 3.0 * r[0] + 0.5 * r[20] + rng.random_range(-0.1..0.1))
            .collect();

        let path = forward_stepwise(&names, &rows, &y, 2, None).unwrap();
        assert_eq!(path.entries.len(), 90);
        for (i, entry) in path.entries.iter().enumerate() {
            assert_eq!(entry.size, i + 1);
        }
        // The running best BIC never worsens along the path, and the
        // selected entry is the overall minimum.
        let mut best = f64::INFINITY;
        for entry in &path.entries {
            best = best.min(entry.bic);
        }
        assert_eq!(path.selected_entry().bic, best);
        assert!(path.entries[..=path.selected]
            .iter()
            .scan(f64::INFINITY, |acc, e| {
                let prev = *acc;
                *acc = acc.min(e.bic);
                Some(*acc <= prev)
            })
            .all(|ok| ok));
    }

    #[test]
    fn selection_invariant_to_candidate_order() {
        let (n, rows, y) = single_predictor_data();
        let reordered_names: Vec<String> = vec![n[2].clone(), n[0].clone(), n[1].clone()];
        let reordered_rows: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| vec![r[2], r[0], r[1]])
            .collect();
        let a = best_subset_exhaustive(&n, &rows, &y, 1).unwrap();
        let b = best_subset_exhaustive(&reordered_names, &reordered_rows, &y, 1).unwrap();
        for (ea, eb) in a.entries.iter().zip(&b.entries) {
            assert_eq!(ea.feature_names, eb.feature_names);
            assert_eq!(ea.bic, eb.bic);
        }
        assert_eq!(a.selected, b.selected);
    }

    #[test]
    fn exhaustive_refuses_too_many_candidates() {
        let m = EXHAUSTIVE_LIMIT + 1;
        let feature_names: Vec<String> = (0..m).map(|j| format!("f{j}")).collect();
        let rows = vec![vec![0.0; m]; 4];
        let err = best_subset_exhaustive(&feature_names, &rows, &[1.0, 2.0, 3.0, 4.0], 1)
            .unwrap_err();
        assert!(err.to_string().contains("exceed"), "{err}");
    }

    #[test]
    fn adding_a_feature_never_increases_rss() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        for _ in 0..20 {
            let n_rows = 15;
            let rows: Vec<Vec<f64>> = (0..n_rows)
                .map(|_| (0..3).map(|_| rng.random_range(-2.0..2.0)).collect())
                .collect();
            let y: Vec<f64> = (0..n_rows).map(|_| rng.random_range(-1.0..1.0)).collect();
            let small = fit_ols(
                &names(&["a", "b"]),
                &rows.iter().map(|r| r[..2].to_vec()).collect::<Vec<_>>(),
                &y,
                1,
            )
            .unwrap();
            let large = fit_ols(&names(&["a", "b", "c"]), &rows, &y, 1).unwrap();
            assert!(
                large.rss <= small.rss * (1.0 + 1e-9) + 1e-12,
                "{} vs {}",
                large.rss,
                small.rss
            );
        }
    }

    #[test]
    fn bic_recomputable_from_model_fields() {
        let (n, rows, y) = single_predictor_data();
        let model = fit_ols(&n, &rows, &y, 1).unwrap();
        let recomputed = bic_score(model.n_train, model.rss, model.complexity() + 1).unwrap();
        assert!((model.bic - recomputed).abs() < 1e-9);
    }
}
