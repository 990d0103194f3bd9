//! Dataset schema, CSV loading with manifest sidecars, and person-disjoint
//! split protocols.
//!
//! A feature file is a CSV with columns
//! `subject_id,session_id,window_start_s,label,<feature names...>` plus a
//! JSON manifest sidecar at `<path>.manifest.json` recording the dataset
//! name, the feature-registry hash, the subject roster, and class counts.
//! Loading re-derives all of those from the CSV and refuses files whose
//! sidecar disagrees.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::rng;

/// Binary target: 0 = calm, 1 = stress.
pub const N_CLASSES: usize = 2;

const FIXED_COLUMNS: [&str; 4] = ["subject_id", "session_id", "window_start_s", "label"];

/// SHA-256 over the newline-joined feature names; identifies a feature
/// registry so models and datasets can refuse mismatched columns.
pub fn registry_hash_of(names: &[String]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(names.join("\n").as_bytes());
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Sidecar document describing a feature file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub name: String,
    pub registry_hash: String,
    pub n_rows: u64,
    pub n_features: u64,
    pub subjects: Vec<String>,
    /// Class counts indexed by label (0 = calm, 1 = stress).
    pub class_counts: Vec<u64>,
}

pub fn manifest_path(csv_path: &Path) -> PathBuf {
    let mut os = csv_path.as_os_str().to_owned();
    os.push(".manifest.json");
    PathBuf::from(os)
}

/// Windowed feature rows with per-row subject/session provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureDataset {
    pub name: String,
    pub features: Array2<f64>,
    pub labels: Vec<usize>,
    pub subject_ids: Vec<String>,
    pub session_ids: Vec<String>,
    pub window_starts: Vec<f64>,
    pub feature_names: Vec<String>,
    pub registry_hash: String,
}

impl FeatureDataset {
    /// Build and validate a dataset. The registry hash is derived from the
    /// feature names; synthetic generators override it with their
    /// `synthetic:<spec-hash>` convention via [`FeatureDataset::with_registry_hash`].
    pub fn new(
        name: impl Into<String>,
        features: Array2<f64>,
        labels: Vec<usize>,
        subject_ids: Vec<String>,
        session_ids: Vec<String>,
        window_starts: Vec<f64>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        let n = features.nrows();
        if n == 0 {
            return Err(Error::Empty("dataset has no rows".into()));
        }
        if labels.len() != n
            || subject_ids.len() != n
            || session_ids.len() != n
            || window_starts.len() != n
        {
            return Err(Error::ShapeMismatch(format!(
                "row metadata lengths do not all equal {n}"
            )));
        }
        if feature_names.len() != features.ncols() {
            return Err(Error::ShapeMismatch(format!(
                "{} feature names for {} columns",
                feature_names.len(),
                features.ncols()
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for name in &feature_names {
            if name.is_empty() || !seen.insert(name) {
                return Err(Error::Schema(format!(
                    "feature names must be non-empty and unique; offender {name:?}"
                )));
            }
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= N_CLASSES) {
            return Err(Error::Data(format!("label {bad} is not binary")));
        }
        if subject_ids.iter().any(|s| s.is_empty()) {
            return Err(Error::Data("empty subject id".into()));
        }
        if !features.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("feature matrix".into()));
        }
        let registry_hash = registry_hash_of(&feature_names);
        Ok(Self {
            name: name.into(),
            features,
            labels,
            subject_ids,
            session_ids,
            window_starts,
            feature_names,
            registry_hash,
        })
    }

    /// Replace the derived registry hash with a generator-defined identity
    /// (`synthetic:<spec-hash>`). Such a hash is carried by the manifest
    /// instead of being recomputable from the column names.
    pub fn with_registry_hash(mut self, hash: impl Into<String>) -> Self {
        self.registry_hash = hash.into();
        self
    }

    pub fn n_rows(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    /// Sorted distinct subject ids.
    pub fn unique_subjects(&self) -> Vec<String> {
        let mut subjects: Vec<String> = self.subject_ids.clone();
        subjects.sort();
        subjects.dedup();
        subjects
    }

    /// Counts per class, indexed by label.
    pub fn class_counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; N_CLASSES];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }

    /// Row indices grouped by subject, subjects in sorted order. This is the
    /// person-as-domain environment structure.
    pub fn environments(&self) -> Vec<(String, Vec<usize>)> {
        let mut by_subject: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, s) in self.subject_ids.iter().enumerate() {
            by_subject.entry(s).or_default().push(i);
        }
        by_subject
            .into_iter()
            .map(|(s, rows)| (s.to_string(), rows))
            .collect()
    }

    pub fn rows_for_subjects(&self, subjects: &[String]) -> Vec<usize> {
        (0..self.n_rows())
            .filter(|&i| subjects.contains(&self.subject_ids[i]))
            .collect()
    }

    /// New dataset consisting of the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Empty("row selection is empty".into()));
        }
        if let Some(&bad) = rows.iter().find(|&&i| i >= self.n_rows()) {
            return Err(Error::Data(format!("row index {bad} out of range")));
        }
        let features = Array2::from_shape_fn((rows.len(), self.n_features()), |(i, j)| {
            self.features[[rows[i], j]]
        });
        Ok(Self {
            name: self.name.clone(),
            features,
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
            subject_ids: rows.iter().map(|&i| self.subject_ids[i].clone()).collect(),
            session_ids: rows.iter().map(|&i| self.session_ids[i].clone()).collect(),
            window_starts: rows.iter().map(|&i| self.window_starts[i]).collect(),
            feature_names: self.feature_names.clone(),
            registry_hash: self.registry_hash.clone(),
        })
    }

    pub fn subset_by_subjects(&self, subjects: &[String]) -> Result<Self> {
        self.select_rows(&self.rows_for_subjects(subjects))
    }

    pub fn manifest(&self) -> DatasetManifest {
        DatasetManifest {
            name: self.name.clone(),
            registry_hash: self.registry_hash.clone(),
            n_rows: self.n_rows() as u64,
            n_features: self.n_features() as u64,
            subjects: self.unique_subjects(),
            class_counts: self.class_counts(),
        }
    }

    /// Write the CSV and its manifest sidecar. Floats are written in
    /// shortest round-trip form, so write→load is exact.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut writer = csv::Writer::from_path(path)?;
        let mut header: Vec<&str> = FIXED_COLUMNS.to_vec();
        header.extend(self.feature_names.iter().map(|s| s.as_str()));
        writer.write_record(&header)?;
        for i in 0..self.n_rows() {
            let mut record = vec![
                self.subject_ids[i].clone(),
                self.session_ids[i].clone(),
                format!("{}", self.window_starts[i]),
                format!("{}", self.labels[i]),
            ];
            record.extend(self.features.row(i).iter().map(|v| format!("{v}")));
            writer.write_record(&record)?;
        }
        writer.flush()?;
        let manifest = serde_json::to_string_pretty(&self.manifest())?;
        std::fs::write(manifest_path(path), manifest)?;
        Ok(())
    }

    /// Load a feature file, validating the schema and cross-checking every
    /// manifest field against the CSV contents.
    pub fn load(path: &Path) -> Result<Self> {
        let manifest_file = manifest_path(path);
        let manifest_text = std::fs::read_to_string(&manifest_file).map_err(|e| {
            Error::Schema(format!(
                "missing manifest sidecar {}: {e}",
                manifest_file.display()
            ))
        })?;
        let manifest: DatasetManifest = serde_json::from_str(&manifest_text)
            .map_err(|e| Error::Schema(format!("{}: {e}", manifest_file.display())))?;

        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(path)?;
        let header = reader.headers()?.clone();
        if header.len() < FIXED_COLUMNS.len() + 1 {
            return Err(Error::Schema(format!(
                "{}: header has {} columns, need at least {}",
                path.display(),
                header.len(),
                FIXED_COLUMNS.len() + 1
            )));
        }
        for (i, expect) in FIXED_COLUMNS.iter().enumerate() {
            if &header[i] != *expect {
                return Err(Error::Schema(format!(
                    "{}: column {i} is {:?}, expected {expect:?}",
                    path.display(),
                    &header[i]
                )));
            }
        }
        let feature_names: Vec<String> = header
            .iter()
            .skip(FIXED_COLUMNS.len())
            .map(|s| s.to_string())
            .collect();

        let mut subject_ids = Vec::new();
        let mut session_ids = Vec::new();
        let mut window_starts = Vec::new();
        let mut labels = Vec::new();
        let mut flat = Vec::new();
        for (row_idx, record) in reader.records().enumerate() {
            let record = record?;
            if record.len() != header.len() {
                return Err(Error::Schema(format!(
                    "{}: row {} has {} fields, header has {}",
                    path.display(),
                    row_idx + 1,
                    record.len(),
                    header.len()
                )));
            }
            subject_ids.push(record[0].to_string());
            session_ids.push(record[1].to_string());
            window_starts.push(parse_float(path, row_idx, &FIXED_COLUMNS[2], &record[2])?);
            labels.push(record[3].parse::<usize>().map_err(|_| {
                Error::Schema(format!(
                    "{}: row {} column label: {:?} is not an integer class",
                    path.display(),
                    row_idx + 1,
                    &record[3]
                ))
            })?);
            for (j, field) in record.iter().skip(FIXED_COLUMNS.len()).enumerate() {
                flat.push(parse_float(path, row_idx, &feature_names[j], field)?);
            }
        }
        let n = subject_ids.len();
        let features = Array2::from_shape_vec((n, feature_names.len()), flat)
            .map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
        let mut dataset = Self::new(
            manifest.name.clone(),
            features,
            labels,
            subject_ids,
            session_ids,
            window_starts,
            feature_names,
        )?;
        if manifest.registry_hash.starts_with("synthetic:") {
            // Generator-defined identity: not recomputable from column names.
            dataset = dataset.with_registry_hash(manifest.registry_hash.clone());
        } else if dataset.registry_hash != manifest.registry_hash {
            return Err(Error::HashMismatch {
                expected: manifest.registry_hash,
                found: dataset.registry_hash,
            });
        }
        let derived = dataset.manifest();
        if derived != manifest {
            return Err(Error::Schema(format!(
                "{}: manifest disagrees with file contents ({:?} vs {:?})",
                path.display(),
                manifest,
                derived
            )));
        }
        Ok(dataset)
    }

    /// Load several feature files that must all share one feature registry.
    pub fn load_all(paths: &[PathBuf]) -> Result<Vec<Self>> {
        let mut out: Vec<Self> = Vec::with_capacity(paths.len());
        for path in paths {
            let ds = Self::load(path)?;
            if let Some(first) = out.first() {
                if ds.registry_hash != first.registry_hash {
                    return Err(Error::HashMismatch {
                        expected: first.registry_hash.clone(),
                        found: ds.registry_hash,
                    });
                }
            }
            out.push(ds);
        }
        Ok(out)
    }
}

fn parse_float(path: &Path, row_idx: usize, column: &str, field: &str) -> Result<f64> {
    let v: f64 = field.parse().map_err(|_| {
        Error::Schema(format!(
            "{}: row {} column {column}: {field:?} is not a number",
            path.display(),
            row_idx + 1
        ))
    })?;
    if !v.is_finite() {
        return Err(Error::NonFinite(format!(
            "{}: row {} column {column}",
            path.display(),
            row_idx + 1
        )));
    }
    Ok(v)
}

/// Person-disjoint subject assignment for one fold.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub protocol: String,
    pub seed: u64,
    pub train: Vec<String>,
    /// Carved from training subjects when a run needs a tuning slice; may be
    /// empty in a freshly generated plan.
    pub validation: Vec<String>,
    pub test: Vec<String>,
}

impl SplitPlan {
    /// No subject may appear in more than one of train/validation/test.
    pub fn check_person_disjoint(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for (side, subjects) in [
            ("train", &self.train),
            ("validation", &self.validation),
            ("test", &self.test),
        ] {
            for s in subjects {
                if !seen.insert(s.clone()) {
                    return Err(Error::Data(format!(
                        "subject {s:?} appears in {side} and another side of the split"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let plan: SplitPlan = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        plan.check_person_disjoint()?;
        Ok(plan)
    }
}

/// Uniform random subject partition: `n_train_subjects` train, the rest test.
pub fn person_disjoint_split(
    dataset: &FeatureDataset,
    n_train_subjects: usize,
    seed: u64,
) -> Result<SplitPlan> {
    let mut subjects = dataset.unique_subjects();
    if n_train_subjects == 0 || n_train_subjects >= subjects.len() {
        return Err(Error::InvalidConfig(format!(
            "need 0 < train subjects < {}, got {n_train_subjects}",
            subjects.len()
        )));
    }
    subjects.shuffle(&mut rng::stream(seed, rng::salt::SPLIT, 0));
    let test = subjects.split_off(n_train_subjects);
    let plan = SplitPlan {
        protocol: "person-disjoint-holdout".into(),
        seed,
        train: subjects,
        validation: Vec::new(),
        test,
    };
    plan.check_person_disjoint()?;
    Ok(plan)
}

/// Subject-independent k-fold: subjects shuffled once, split into k
/// near-equal groups; fold i tests group i and trains on the others.
pub fn kfold_person_disjoint(
    dataset: &FeatureDataset,
    k: usize,
    seed: u64,
) -> Result<Vec<SplitPlan>> {
    let mut subjects = dataset.unique_subjects();
    if k < 2 || k > subjects.len() {
        return Err(Error::InvalidConfig(format!(
            "need 2 <= k <= {} subjects, got k = {k}",
            subjects.len()
        )));
    }
    subjects.shuffle(&mut rng::stream(seed, rng::salt::SPLIT, 0));
    let n = subjects.len();
    let mut plans = Vec::with_capacity(k);
    for fold in 0..k {
        let start = fold * n / k;
        let end = (fold + 1) * n / k;
        let test: Vec<String> = subjects[start..end].to_vec();
        let train: Vec<String> = subjects[..start]
            .iter()
            .chain(&subjects[end..])
            .cloned()
            .collect();
        let plan = SplitPlan {
            protocol: format!("person-disjoint-{k}fold/{fold}"),
            seed,
            train,
            validation: Vec::new(),
            test,
        };
        plan.check_person_disjoint()?;
        plans.push(plan);
    }
    Ok(plans)
}
