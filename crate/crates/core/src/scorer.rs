//! A small logistic-regression scorer and a seeded, group-stratified split,
//! enough to turn raw covariates into the scores the optimizer needs.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dataset, Record};

/// Prefix of the one-hot group indicators added when `include_group` is set.
pub const GROUP_FEATURE_PREFIX: &str = "group=";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub learning_rate: f64,
    pub iterations: usize,
    pub l2: f64,
    /// Adds one indicator per group (all but the first) to the features.
    pub include_group: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self { learning_rate: 0.1, iterations: 2000, l2: 1e-4, include_group: false }
    }
}

/// `weights[0]` is the intercept; `weights[j + 1]` goes with `feature_names[j]`
/// after standardization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub feature_names: Vec<String>,
    pub weights: Vec<f64>,
    pub feature_means: Vec<f64>,
    pub feature_stddevs: Vec<f64>,
    /// Constant columns left out of the fit.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dropped: Vec<String>,
}

/// Logistic loss and its gradient, averaged over rows, plus `l2/2 |w|^2` on the
/// non-intercept weights. `x` holds standardized rows without an intercept column.
pub fn loss_and_gradient(w: &[f64], x: &[Vec<f64>], y: &[f64], l2: f64) -> (f64, Vec<f64>) {
    let n = x.len() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; w.len()];
    for (row, &t) in x.iter().zip(y) {
        let z = w[0] + row.iter().zip(&w[1..]).map(|(a, b)| a * b).sum::<f64>();
        // log(1 + e^z) computed without overflow
        loss += z.max(0.0) + (-z.abs()).exp().ln_1p() - t * z;
        let r = sigmoid(z) - t;
        grad[0] += r;
        for (g, v) in grad[1..].iter_mut().zip(row) {
            *g += r * v;
        }
    }
    loss /= n;
    for g in grad.iter_mut() {
        *g /= n;
    }
    for (g, wj) in grad[1..].iter_mut().zip(&w[1..]) {
        loss += 0.5 * l2 * wj * wj;
        *g += l2 * wj;
    }
    (loss, grad)
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn feature_names(ds: &Dataset, include_group: bool) -> Vec<String> {
    let mut names = ds.feature_names().to_vec();
    if include_group {
        names.extend(ds.groups().iter().skip(1).map(|g| format!("{GROUP_FEATURE_PREFIX}{g}")));
    }
    names
}

fn raw_value(r: &Record, name: &str) -> Result<f64> {
    if let Some(g) = name.strip_prefix(GROUP_FEATURE_PREFIX) {
        if !r.features.contains_key(name) {
            return Ok(f64::from(u8::from(r.group == g)));
        }
    }
    r.features.get(name).copied().ok_or_else(|| Error::MissingFeature(name.to_string()))
}

/// Fits by full-batch gradient descent and returns the loss after every step.
pub fn fit_with_history(train: &Dataset, config: &FitConfig) -> Result<(LogisticModel, Vec<f64>)> {
    if !(config.learning_rate > 0.0 && config.learning_rate.is_finite()) || config.l2 < 0.0 {
        return Err(Error::Usage("learning rate must be positive and l2 non-negative".into()));
    }
    let labels: Vec<f64> = train.records().iter().map(|r| f64::from(r.label)).collect();
    let positives = labels.iter().filter(|&&y| y == 1.0).count();
    if positives == 0 || positives == labels.len() {
        return Err(Error::InvalidDataset("fitting needs both label classes".into()));
    }
    let all = feature_names(train, config.include_group);
    let raw: Vec<Vec<f64>> =
        train.records().iter().map(|r| all.iter().map(|f| raw_value(r, f)).collect()).collect::<Result<_>>()?;

    let n = raw.len() as f64;
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    let (mut means, mut stddevs) = (Vec::new(), Vec::new());
    for (j, name) in all.iter().enumerate() {
        let mean = raw.iter().map(|row| row[j]).sum::<f64>() / n;
        let var = raw.iter().map(|row| (row[j] - mean).powi(2)).sum::<f64>() / n;
        let sd = var.sqrt();
        if sd > 1e-12 * (1.0 + mean.abs()) {
            kept.push(j);
            means.push(mean);
            stddevs.push(sd);
        } else {
            dropped.push(name.clone());
        }
    }
    let x: Vec<Vec<f64>> = raw
        .iter()
        .map(|row| kept.iter().zip(means.iter().zip(&stddevs)).map(|(&j, (m, s))| (row[j] - m) / s).collect())
        .collect();

    let mut w = vec![0.0; kept.len() + 1];
    let mut history = Vec::with_capacity(config.iterations);
    for iteration in 0..config.iterations {
        let (loss, grad) = loss_and_gradient(&w, &x, &labels, config.l2);
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Divergence { iteration });
        }
        history.push(loss);
        for (wj, g) in w.iter_mut().zip(&grad) {
            *wj -= config.learning_rate * g;
        }
    }
    let (loss, _) = loss_and_gradient(&w, &x, &labels, config.l2);
    if !loss.is_finite() {
        return Err(Error::Divergence { iteration: config.iterations });
    }
    history.push(loss);
    let model = LogisticModel {
        feature_names: kept.iter().map(|&j| all[j].clone()).collect(),
        weights: w,
        feature_means: means,
        feature_stddevs: stddevs,
        dropped,
    };
    Ok((model, history))
}

pub fn fit(train: &Dataset, config: &FitConfig) -> Result<LogisticModel> {
    fit_with_history(train, config).map(|(m, _)| m)
}

impl LogisticModel {
    /// Probability of `label == 1`, kept strictly inside (0, 1).
    pub fn predict(&self, record: &Record) -> Result<f64> {
        let mut z = self.weights[0];
        for (((name, w), m), s) in
            self.feature_names.iter().zip(&self.weights[1..]).zip(&self.feature_means).zip(&self.feature_stddevs)
        {
            z += w * (raw_value(record, name)? - m) / s;
        }
        Ok(sigmoid(z).clamp(f64::EPSILON, 1.0 - f64::EPSILON))
    }

    /// The dataset with every score replaced by this model's prediction.
    pub fn score_dataset(&self, ds: &Dataset) -> Result<Dataset> {
        let scores: Vec<f64> = ds.records().iter().map(|r| self.predict(r)).collect::<Result<_>>()?;
        ds.with_scores(&scores)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let m: Self = toml::from_str(text)?;
        let k = m.feature_names.len();
        if m.weights.len() != k + 1 || m.feature_means.len() != k || m.feature_stddevs.len() != k {
            return Err(Error::InvalidDataset("model parameter lengths do not match its features".into()));
        }
        if m.feature_stddevs.iter().any(|s| s.is_nan() || *s <= 0.0) {
            return Err(Error::InvalidDataset("model standard deviations must be positive".into()));
        }
        Ok(m)
    }
}

pub fn predict(model: &LogisticModel, record: &Record) -> Result<f64> {
    model.predict(record)
}

/// Seeded shuffle within each group, then the first `round(n * fraction)` records
/// of the group go to training (at least one record on each side). Record order
/// within each split follows the input.
pub fn split(ds: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Usage(format!("train fraction {train_fraction} must lie strictly between 0 and 1")));
    }
    let mut by_group: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, r) in ds.records().iter().enumerate() {
        by_group.entry(r.group.as_str()).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_train = vec![false; ds.len()];
    for (g, idx) in by_group.iter_mut() {
        if idx.len() < 2 {
            return Err(Error::Stratification(format!("group `{g}` has {} record(s); at least 2 needed", idx.len())));
        }
        idx.shuffle(&mut rng);
        let k = ((idx.len() as f64 * train_fraction).round() as usize).clamp(1, idx.len() - 1);
        for &i in &idx[..k] {
            in_train[i] = true;
        }
    }
    let pick = |side: bool| -> Result<Dataset> {
        let records = ds.records().iter().zip(&in_train).filter(|(_, &t)| t == side).map(|(r, _)| r.clone()).collect();
        Dataset::with_groups(records, ds.groups().clone(), ds.legit_names().to_vec(), ds.feature_names().to_vec())
    };
    Ok((pick(true)?, pick(false)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(i: usize, y: u8, g: &str, x: f64) -> Record {
        Record::new(i.to_string(), None, y, g).unwrap().with_feature("x", x)
    }

    fn ds(records: Vec<Record>) -> Dataset {
        Dataset::new(records, vec![], vec!["x".into()]).unwrap()
    }

    #[test]
    fn split_sizes_and_determinism() {
        let d = ds((0..9).map(|i| rec(i, (i % 2) as u8, "a", i as f64)).collect());
        let (tr, te) = split(&d, 2.0 / 3.0, 7).unwrap();
        assert_eq!((tr.len(), te.len()), (6, 3));
        let (tr2, _) = split(&d, 2.0 / 3.0, 7).unwrap();
        assert_eq!(tr, tr2);
        let (tr3, _) = split(&d, 2.0 / 3.0, 8).unwrap();
        assert_ne!(tr, tr3);
    }

    #[test]
    fn split_is_stratified() {
        let mut recs: Vec<Record> = (0..30).map(|i| rec(i, 0, "a", 0.0)).collect();
        recs.extend((30..45).map(|i| rec(i, 1, "b", 0.0)));
        let (tr, te) = split(&ds(recs), 2.0 / 3.0, 1).unwrap();
        assert_eq!(tr.group_records("a").count(), 20);
        assert_eq!(tr.group_records("b").count(), 10);
        assert_eq!(te.group_records("b").count(), 5);
    }

    #[test]
    fn split_rejects_tiny_groups() {
        let d = ds(vec![rec(0, 0, "a", 0.0), rec(1, 1, "a", 1.0), rec(2, 1, "b", 1.0)]);
        assert!(matches!(split(&d, 0.5, 0), Err(Error::Stratification(_))));
        assert!(matches!(split(&d, 1.0, 0), Err(Error::Usage(_))));
    }

    #[test]
    fn zero_weights_predict_half() {
        let m = LogisticModel {
            feature_names: vec!["x".into()],
            weights: vec![0.0, 0.0],
            feature_means: vec![3.0],
            feature_stddevs: vec![2.0],
            dropped: vec![],
        };
        assert_eq!(m.predict(&rec(0, 0, "a", 100.0)).unwrap(), 0.5);
        let missing = Record::new("z", None, 0, "a").unwrap();
        assert!(matches!(m.predict(&missing), Err(Error::MissingFeature(f)) if f == "x"));
    }

    #[test]
    fn separable_pair() {
        let d = ds(vec![rec(0, 0, "a", -1.0), rec(1, 1, "a", 1.0)]);
        let m = fit(&d, &FitConfig::default()).unwrap();
        let p0 = m.predict(&d.records()[0]).unwrap();
        let p1 = m.predict(&d.records()[1]).unwrap();
        assert!(p0 < 0.5 && p1 > 0.5);
        assert!(p0 > 0.0 && p1 < 1.0);
    }

    #[test]
    fn constant_feature_is_dropped() {
        let recs = (0..10).map(|i| rec(i, (i % 3 == 0) as u8, "a", 4.0).with_feature("c", i as f64)).collect();
        let d = Dataset::new(recs, vec![], vec!["x".into(), "c".into()]).unwrap();
        let m = fit(&d, &FitConfig::default()).unwrap();
        assert_eq!(m.dropped, vec!["x".to_string()]);
        assert_eq!(m.feature_names, vec!["c".to_string()]);
    }

    #[test]
    fn huge_step_diverges() {
        let recs = (0..20).map(|i| rec(i, (i >= 10) as u8, "a", i as f64 * 1e150)).collect();
        let cfg = FitConfig { learning_rate: 1e300, iterations: 50, ..FitConfig::default() };
        assert!(matches!(fit(&ds(recs), &cfg), Err(Error::Divergence { .. })));
    }

    #[test]
    fn loss_settles() {
        let recs = (0..40).map(|i| rec(i, ((i * 7) % 5 < 2) as u8, "a", (i as f64).sin())).collect();
        let (_, h) = fit_with_history(&ds(recs), &FitConfig::default()).unwrap();
        let tail = &h[h.len() - h.len() / 10..];
        assert!(tail.windows(2).all(|w| w[1] <= w[0] + 1e-15));
    }

    #[test]
    fn model_toml_round_trip() {
        let recs = (0..12).map(|i| rec(i, (i % 2) as u8, if i < 6 { "a" } else { "b" }, i as f64)).collect();
        let cfg = FitConfig { include_group: true, ..FitConfig::default() };
        let m = fit(&ds(recs), &cfg).unwrap();
        assert_eq!(m.feature_names, vec!["x".to_string(), "group=b".to_string()]);
        let back = LogisticModel::from_toml(&m.to_toml().unwrap()).unwrap();
        assert_eq!(m, back);
    }
}
