//! Importance-based weight pruning and mask algebra.
//!
//! A [`Mask`] marks, for every weight entry, whether it survives pruning
//! (1 = keep, 0 = pruned). Biases are never pruned. Importance of a weight is
//! `|gradient| * |weight|`; the lowest-scoring `ceil(prune_fraction * J)`
//! entries are pruned, ranked either over the whole network or within each
//! layer. Per-subject masks combine by elementwise intersection: a weight
//! survives only if every subject kept it.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use crate::data::FeatureDataset;
use crate::error::{Error, Result};
use crate::losses::{combined_loss, EnvironmentBatch, IrmVariant, LossWeights};
use crate::net::{Gradients, NetworkArch, NetworkParams};

const MASK_MAGIC: &str = "HHISS-MASK v1";

/// How pruning candidates are ranked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ranking {
    /// Pool all weight entries and prune the globally lowest-scoring ones.
    Global,
    /// Prune the lowest-scoring fraction within each layer separately.
    PerLayer,
}

/// Keep/prune bits for every weight entry of a network, one 0/1 matrix per
/// weight layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    layers: Vec<Array2<u8>>,
}

impl Mask {
    pub fn all_ones(arch: &NetworkArch) -> Self {
        let layers = (0..arch.n_layers())
            .map(|l| Array2::ones(arch.layer_shape(l)))
            .collect();
        Self { layers }
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn layer(&self, l: usize) -> &Array2<u8> {
        &self.layers[l]
    }

    pub fn layer_mut(&mut self, l: usize) -> &mut Array2<u8> {
        &mut self.layers[l]
    }

    pub fn check_arch(&self, arch: &NetworkArch) -> Result<()> {
        if self.layers.len() != arch.n_layers() {
            return Err(Error::ShapeMismatch(format!(
                "mask has {} layers, architecture has {}",
                self.layers.len(),
                arch.n_layers()
            )));
        }
        for (l, m) in self.layers.iter().enumerate() {
            if m.dim() != arch.layer_shape(l) {
                return Err(Error::ShapeMismatch(format!(
                    "mask layer {l} has shape {:?}, expected {:?}",
                    m.dim(),
                    arch.layer_shape(l)
                )));
            }
        }
        Ok(())
    }

    /// Total weight entries covered by the mask.
    pub fn total(&self) -> usize {
        self.layers.iter().map(|m| m.len()).sum()
    }

    /// Entries with a keep bit.
    pub fn kept_count(&self) -> usize {
        self.layers
            .iter()
            .map(|m| m.iter().filter(|&&b| b != 0).count())
            .sum()
    }

    /// Kept fraction in `[0, 1]`.
    pub fn retention(&self) -> f64 {
        self.kept_count() as f64 / self.total() as f64
    }

    /// Elementwise AND: keep only what both masks keep.
    pub fn intersect(&self, other: &Mask) -> Result<Mask> {
        if self.layers.len() != other.layers.len() {
            return err_layer_count(self.layers.len(), other.layers.len());
        }
        let mut layers = Vec::with_capacity(self.layers.len());
        for (l, (a, b)) in self.layers.iter().zip(&other.layers).enumerate() {
            if a.dim() != b.dim() {
                return Err(Error::ShapeMismatch(format!(
                    "mask layer {l} shapes differ: {:?} vs {:?}",
                    a.dim(),
                    b.dim()
                )));
            }
            layers.push(Zip::from(a).and(b).map_collect(|&x, &y| x & y));
        }
        Ok(Mask { layers })
    }

    /// Intersection of one or more masks.
    pub fn intersect_all(masks: &[Mask]) -> Result<Mask> {
        let Some((first, rest)) = masks.split_first() else {
            return Err(Error::Empty("no masks to intersect".into()));
        };
        let mut out = first.clone();
        for m in rest {
            out = out.intersect(m)?;
        }
        Ok(out)
    }

    /// True if every entry this mask keeps is also kept by `other`.
    pub fn is_subset_of(&self, other: &Mask) -> bool {
        self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.dim() == b.dim() && a.iter().zip(b.iter()).all(|(&x, &y)| x <= y))
    }

    /// One 0/1 string per layer, row-major.
    pub fn to_bit_strings(&self) -> Vec<String> {
        self.layers
            .iter()
            .map(|m| m.iter().map(|&b| if b == 0 { '0' } else { '1' }).collect())
            .collect()
    }

    pub fn from_bit_strings(arch: &NetworkArch, lines: &[String]) -> Result<Self> {
        if lines.len() != arch.n_layers() {
            return err_layer_count(lines.len(), arch.n_layers());
        }
        let mut layers = Vec::with_capacity(lines.len());
        for (l, line) in lines.iter().enumerate() {
            let (n_in, n_out) = arch.layer_shape(l);
            if line.len() != n_in * n_out {
                return Err(Error::Schema(format!(
                    "mask layer {l} has {} bits, expected {}",
                    line.len(),
                    n_in * n_out
                )));
            }
            let bits: Vec<u8> = line
                .chars()
                .map(|c| match c {
                    '0' => Ok(0u8),
                    '1' => Ok(1u8),
                    other => Err(Error::Schema(format!(
                        "mask layer {l} contains {other:?}; only 0/1 allowed"
                    ))),
                })
                .collect::<Result<_>>()?;
            layers.push(Array2::from_shape_vec((n_in, n_out), bits).expect("validated length"));
        }
        Ok(Self { layers })
    }
}

fn err_layer_count<T>(got: usize, want: usize) -> Result<T> {
    Err(Error::ShapeMismatch(format!(
        "mask layer count mismatch: {got} vs {want}"
    )))
}

/// Elementwise `|gradient| * |weight|` per layer.
pub fn importance_scores(
    params: &NetworkParams,
    grads: &Gradients,
) -> Result<Vec<Array2<f64>>> {
    if grads.weights.len() != params.layers().len() {
        return err_layer_count(grads.weights.len(), params.layers().len());
    }
    if !grads.is_finite() {
        return Err(Error::NonFinite("importance gradient".into()));
    }
    let mut scores = Vec::with_capacity(params.layers().len());
    for (l, (layer, g)) in params.layers().iter().zip(&grads.weights).enumerate() {
        if g.dim() != layer.weights.dim() {
            return Err(Error::ShapeMismatch(format!(
                "gradient shape mismatch at layer {l}"
            )));
        }
        scores.push(
            Zip::from(&layer.weights)
                .and(g)
                .map_collect(|&w, &gr| w.abs() * gr.abs()),
        );
    }
    Ok(scores)
}

/// Number of entries pruned at fraction `prune_fraction` out of `n`:
/// `ceil(prune_fraction * n)`, guarded so float noise on an exactly integral
/// product cannot bump the count by one.
pub fn prune_count(prune_fraction: f64, n: usize) -> usize {
    let target = prune_fraction * n as f64 - 1e-9;
    if target <= 0.0 {
        0
    } else {
        (target.ceil() as usize).min(n)
    }
}

/// Build the mask that prunes the lowest-importance weights.
///
/// Ties are broken by flat position (layer by layer, row-major), lower
/// positions pruned first, so the result is deterministic.
pub fn prune_mask(
    scores: &[Array2<f64>],
    prune_fraction: f64,
    ranking: Ranking,
) -> Result<Mask> {
    if !(0.0..1.0).contains(&prune_fraction) {
        return Err(Error::InvalidConfig(format!(
            "prune fraction must be in [0, 1), got {prune_fraction}"
        )));
    }
    if scores.is_empty() {
        return Err(Error::Empty("no score layers".into()));
    }
    for (l, s) in scores.iter().enumerate() {
        if !s.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite(format!("importance scores at layer {l}")));
        }
    }
    let mut layers: Vec<Array2<u8>> = scores.iter().map(|s| Array2::ones(s.dim())).collect();
    match ranking {
        Ranking::Global => {
            let total: usize = scores.iter().map(|s| s.len()).sum();
            let n_prune = prune_count(prune_fraction, total);
            let mut flat: Vec<(f64, usize)> = Vec::with_capacity(total);
            let mut offset = 0usize;
            for s in scores {
                for (i, &v) in s.iter().enumerate() {
                    flat.push((v, offset + i));
                }
                offset += s.len();
            }
            flat.sort_unstable_by(|a, b| {
                a.0.partial_cmp(&b.0)
                    .expect("scores checked finite")
                    .then(a.1.cmp(&b.1))
            });
            let mut bounds = Vec::with_capacity(scores.len());
            let mut start = 0usize;
            for s in scores {
                bounds.push((start, s.len()));
                start += s.len();
            }
            for &(_, idx) in flat.iter().take(n_prune) {
                let l = bounds
                    .iter()
                    .rposition(|&(b, _)| b <= idx)
                    .expect("index within bounds");
                let inner = idx - bounds[l].0;
                let cols = layers[l].ncols();
                layers[l][[inner / cols, inner % cols]] = 0;
            }
        }
        Ranking::PerLayer => {
            for (s, mask) in scores.iter().zip(&mut layers) {
                let n_prune = prune_count(prune_fraction, s.len());
                let mut flat: Vec<(f64, usize)> =
                    s.iter().enumerate().map(|(i, &v)| (v, i)).collect();
                flat.sort_unstable_by(|a, b| {
                    a.0.partial_cmp(&b.0)
                        .expect("scores checked finite")
                        .then(a.1.cmp(&b.1))
                });
                let cols = mask.ncols();
                for &(_, idx) in flat.iter().take(n_prune) {
                    mask[[idx / cols, idx % cols]] = 0;
                }
            }
        }
    }
    Ok(Mask { layers })
}

/// Per-subject mask computation settings.
#[derive(Debug, Clone)]
pub struct MaskSettings {
    pub prune_fraction: f64,
    pub ranking: Ranking,
    pub weights: LossWeights,
    pub variant: IrmVariant,
}

/// One retention mask per training subject, subjects in sorted order.
///
/// Each subject's importance gradient comes from a single eval-mode
/// forward/backward over all of that subject's rows with the combined loss
/// (the soft-label term participates when teacher logits are supplied), so
/// the masks are independent of batch order and dropout draws.
pub fn subject_masks(
    params: &NetworkParams,
    dataset: &FeatureDataset,
    teacher_logits: Option<&Array2<f64>>,
    settings: &MaskSettings,
) -> Result<Vec<(String, Mask)>> {
    if let Some(teacher) = teacher_logits {
        if teacher.nrows() != dataset.n_rows() {
            return Err(Error::ShapeMismatch(format!(
                "{} teacher rows for {} dataset rows",
                teacher.nrows(),
                dataset.n_rows()
            )));
        }
    }
    let mut out = Vec::new();
    for (subject, rows) in dataset.environments() {
        let slice = dataset.select_rows(&rows)?;
        let (logits, cache) = params.forward_eval(&slice.features)?;
        let env = EnvironmentBatch {
            env_id: subject.clone(),
            logits,
            labels: slice.labels.clone(),
        };
        let teacher_rows = teacher_logits.map(|t| {
            Array2::from_shape_fn((rows.len(), t.ncols()), |(i, j)| t[[rows[i], j]])
        });
        let loss = combined_loss(
            std::slice::from_ref(&env),
            teacher_rows.as_ref(),
            &settings.weights,
            settings.variant,
        )?;
        let grads = params.backward(&cache, &loss.grad)?;
        let scores = importance_scores(params, &grads)?;
        let mask = prune_mask(&scores, settings.prune_fraction, settings.ranking)?;
        out.push((subject, mask));
    }
    Ok(out)
}

/// Write a mask as plain text: magic line, layer shapes, total weight count,
/// the prune fraction that produced it, its retention, then one 0/1 line per
/// layer (row-major).
pub fn save_mask_file(path: &Path, mask: &Mask, prune_fraction: f64) -> Result<()> {
    let mut out = String::new();
    writeln!(out, "{MASK_MAGIC}").expect("string write");
    let shapes: Vec<String> = mask
        .layers
        .iter()
        .map(|m| format!("{}x{}", m.nrows(), m.ncols()))
        .collect();
    writeln!(out, "shapes={}", shapes.join(",")).expect("string write");
    writeln!(out, "weights={}", mask.total()).expect("string write");
    writeln!(out, "prune_fraction={prune_fraction}").expect("string write");
    writeln!(out, "retention={}", mask.retention()).expect("string write");
    for line in mask.to_bit_strings() {
        writeln!(out, "{line}").expect("string write");
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Read a mask written by [`save_mask_file`]; returns the mask and the prune
/// fraction recorded in the header. The recorded retention must match the
/// bits exactly.
pub fn load_mask_file(path: &Path) -> Result<(Mask, f64)> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let schema = |msg: &str| Error::Schema(format!("{}: {msg}", path.display()));
    if lines.next() != Some(MASK_MAGIC) {
        return Err(schema("not a mask file"));
    }
    let shapes_line = lines
        .next()
        .and_then(|l| l.strip_prefix("shapes="))
        .ok_or_else(|| schema("missing shapes header"))?;
    let shapes: Vec<(usize, usize)> = shapes_line
        .split(',')
        .map(|tok| {
            let (r, c) = tok
                .split_once('x')
                .ok_or_else(|| schema(&format!("bad shape token {tok:?}")))?;
            let parse = |s: &str| {
                s.parse::<usize>()
                    .map_err(|_| schema(&format!("bad shape token {tok:?}")))
            };
            Ok((parse(r)?, parse(c)?))
        })
        .collect::<Result<_>>()?;
    let total_weights: usize = lines
        .next()
        .and_then(|l| l.strip_prefix("weights="))
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| schema("missing weights header"))?;
    if total_weights != shapes.iter().map(|&(r, c)| r * c).sum::<usize>() {
        return Err(schema("weights header does not match shapes"));
    }
    let prune_fraction: f64 = lines
        .next()
        .and_then(|l| l.strip_prefix("prune_fraction="))
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| schema("missing prune_fraction header"))?;
    let retention: f64 = lines
        .next()
        .and_then(|l| l.strip_prefix("retention="))
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| schema("missing retention header"))?;
    let mut layers = Vec::with_capacity(shapes.len());
    for (l, (rows, cols)) in shapes.iter().enumerate() {
        let line = lines
            .next()
            .ok_or_else(|| schema(&format!("missing bits for layer {l}")))?;
        if line.len() != rows * cols {
            return Err(schema(&format!(
                "layer {l} has {} bits, expected {}",
                line.len(),
                rows * cols
            )));
        }
        let bits: Vec<u8> = line
            .chars()
            .map(|c| match c {
                '0' => Ok(0u8),
                '1' => Ok(1u8),
                other => Err(schema(&format!("layer {l} contains {other:?}"))),
            })
            .collect::<Result<_>>()?;
        layers.push(Array2::from_shape_vec((*rows, *cols), bits).expect("validated length"));
    }
    let mask = Mask { layers };
    if mask.retention() != retention {
        return Err(schema("retention header does not match mask bits"));
    }
    Ok((mask, prune_fraction))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::NetworkParams;
    use crate::rng;
    use ndarray::array;
    use proptest::prelude::*;

    fn mask_from(bits: Vec<Array2<u8>>) -> Mask {
        Mask { layers: bits }
    }

    #[test]
    fn prune_count_handles_float_noise() {
        assert_eq!(prune_count(0.0, 50), 0);
        assert_eq!(prune_count(0.5, 8), 4);
        assert_eq!(prune_count(0.5, 7), 4);
        assert_eq!(prune_count(0.25, 100), 25);
        assert_eq!(prune_count(0.8, 100), 80);
        // 0.07 * 100 floats to 7.000000000000001; the count must still be 7.
        assert_eq!(prune_count(0.07, 100), 7);
        assert_eq!(prune_count(0.29, 100), 29);
    }

    #[test]
    fn importance_is_grad_times_weight() {
        let arch = NetworkArch::new(vec![2, 2]).unwrap();
        let mut params = NetworkParams::init(arch, &mut rng::stream(0, rng::salt::INIT, 0));
        params.layers_mut()[0].weights = array![[2.0, -3.0], [0.0, 1.0]];
        let grads = crate::net::Gradients {
            weights: vec![array![[-0.5, 2.0], [4.0, -1.0]]],
            bias: vec![ndarray::Array1::zeros(2)],
            input: Array2::zeros((1, 2)),
        };
        let scores = importance_scores(&params, &grads).unwrap();
        assert_eq!(scores[0], array![[1.0, 6.0], [0.0, 1.0]]);
    }

    #[test]
    fn global_pruning_takes_lowest_scores() {
        let scores = vec![array![[4.0, 1.0], [3.0, 2.0]]];
        let mask = prune_mask(&scores, 0.5, Ranking::Global).unwrap();
        assert_eq!(mask.layer(0), &array![[1u8, 0], [1, 0]]);
        assert_eq!(mask.kept_count(), 2);
    }

    #[test]
    fn ties_prune_earliest_flat_positions() {
        let scores = vec![array![[1.0, 1.0], [1.0, 1.0]]];
        let mask = prune_mask(&scores, 0.5, Ranking::Global).unwrap();
        assert_eq!(mask.layer(0), &array![[0u8, 0], [1, 1]]);
    }

    #[test]
    fn global_and_per_layer_differ_on_skewed_layers() {
        let scores = vec![
            Array2::from_elem((2, 2), 10.0),
            Array2::from_elem((2, 2), 1.0),
        ];
        let global = prune_mask(&scores, 0.5, Ranking::Global).unwrap();
        assert_eq!(global.layer(0), &Array2::<u8>::ones((2, 2)));
        assert_eq!(global.layer(1), &Array2::<u8>::zeros((2, 2)));
        let per_layer = prune_mask(&scores, 0.5, Ranking::PerLayer).unwrap();
        assert_eq!(per_layer.layer(0).iter().filter(|&&b| b == 1).count(), 2);
        assert_eq!(per_layer.layer(1).iter().filter(|&&b| b == 1).count(), 2);
    }

    #[test]
    fn intersection_keeps_only_common_bits() {
        let a = mask_from(vec![array![[1u8, 1], [0, 0]]]);
        let b = mask_from(vec![array![[1u8, 0], [1, 0]]]);
        let and = a.intersect(&b).unwrap();
        assert_eq!(and.layer(0), &array![[1u8, 0], [0, 0]]);
        assert_eq!(and.retention(), 0.25);
        assert!(and.is_subset_of(&a));
        assert!(and.is_subset_of(&b));
        // Commutative and idempotent.
        assert_eq!(and, b.intersect(&a).unwrap());
        assert_eq!(and, and.intersect(&and).unwrap());
    }

    #[test]
    fn mask_file_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mask.txt");
        let mask = mask_from(vec![array![[1u8, 0], [1, 1]], array![[0u8], [1]]]);
        save_mask_file(&path, &mask, 0.25).unwrap();
        let (back, k) = load_mask_file(&path).unwrap();
        assert_eq!(back, mask);
        assert_eq!(k, 0.25);

        let text = std::fs::read_to_string(&path).unwrap();
        std::fs::write(&path, text.replace("1011", "1111")).unwrap();
        assert!(matches!(load_mask_file(&path), Err(Error::Schema(_))));
    }

    fn two_subject_dataset(identical: bool) -> FeatureDataset {
        let n = 8;
        let features = Array2::from_shape_fn((n, 3), |(i, j)| {
            let row = if identical { i % 4 } else { i };
            (row * 3 + j) as f64 * 0.31 - 1.2
        });
        FeatureDataset::new(
            "toy",
            features,
            (0..n).map(|i| i % 2).collect(),
            (0..n).map(|i| format!("subj-{}", i / 4)).collect(),
            vec!["s".into(); n],
            (0..n).map(|i| i as f64).collect(),
            vec!["a".into(), "b".into(), "c".into()],
        )
        .unwrap()
    }

    fn toy_settings(prune_fraction: f64) -> MaskSettings {
        MaskSettings {
            prune_fraction,
            ranking: Ranking::Global,
            weights: LossWeights::default(),
            variant: IrmVariant::Norm,
        }
    }

    #[test]
    fn identical_subjects_get_identical_masks() {
        let arch = NetworkArch::new(vec![3, 5, 2]).unwrap();
        let params = NetworkParams::init(arch, &mut rng::stream(13, rng::salt::INIT, 0));
        let dataset = two_subject_dataset(true);
        let masks = subject_masks(&params, &dataset, None, &toy_settings(0.5)).unwrap();
        assert_eq!(masks.len(), 2);
        assert_eq!(masks[0].0, "subj-0");
        assert_eq!(masks[0].1, masks[1].1);
        let expected_retention =
            1.0 - prune_count(0.5, masks[0].1.total()) as f64 / masks[0].1.total() as f64;
        assert_eq!(masks[0].1.retention(), expected_retention);

        // Distinct data generally produces distinct masks.
        let distinct = two_subject_dataset(false);
        let masks = subject_masks(&params, &distinct, None, &toy_settings(0.5)).unwrap();
        assert_ne!(masks[0].1, masks[1].1);
    }

    #[test]
    fn subject_mask_scores_match_finite_difference_gradients() {
        let arch = NetworkArch::new(vec![3, 4, 2]).unwrap();
        let mut params = NetworkParams::init(arch, &mut rng::stream(5, rng::salt::INIT, 0));
        let dataset = two_subject_dataset(false);
        let subject = dataset.subset_by_subjects(&["subj-0".to_string()]).unwrap();
        let settings = toy_settings(0.5);

        // Analytic path, exactly as subject_masks computes it.
        let (logits, cache) = params.forward_eval(&subject.features).unwrap();
        let env = EnvironmentBatch {
            env_id: "subj-0".into(),
            logits,
            labels: subject.labels.clone(),
        };
        let loss = combined_loss(
            std::slice::from_ref(&env),
            None,
            &settings.weights,
            settings.variant,
        )
        .unwrap();
        let grads = params.backward(&cache, &loss.grad).unwrap();
        let scores = importance_scores(&params, &grads).unwrap();

        // Finite-difference oracle over every weight.
        let objective = |p: &NetworkParams| {
            let (z, _) = p.forward_eval(&subject.features).unwrap();
            let env = EnvironmentBatch {
                env_id: "subj-0".into(),
                logits: z,
                labels: subject.labels.clone(),
            };
            combined_loss(
                std::slice::from_ref(&env),
                None,
                &settings.weights,
                settings.variant,
            )
            .unwrap()
            .total
        };
        let h = 1e-5;
        for l in 0..params.layers().len() {
            let dim = params.layers()[l].weights.dim();
            for i in 0..dim.0 {
                for j in 0..dim.1 {
                    let w = params.layers()[l].weights[[i, j]];
                    params.layers_mut()[l].weights[[i, j]] = w + h;
                    let up = objective(&params);
                    params.layers_mut()[l].weights[[i, j]] = w - h;
                    let down = objective(&params);
                    params.layers_mut()[l].weights[[i, j]] = w;
                    let fd_score = (((up - down) / (2.0 * h)) * w).abs();
                    assert!(
                        (scores[l][[i, j]] - fd_score).abs() < 1e-6,
                        "layer {l} ({i},{j}): analytic {} vs oracle {fd_score}",
                        scores[l][[i, j]]
                    );
                }
            }
        }
    }

    #[test]
    fn teacher_term_shifts_subject_masks() {
        let arch = NetworkArch::new(vec![3, 6, 2]).unwrap();
        let params = NetworkParams::init(arch, &mut rng::stream(23, rng::salt::INIT, 0));
        let dataset = two_subject_dataset(false);
        // A teacher that contradicts every label, with a dominant weight,
        // flips the sign structure of the combined gradient and must
        // reshape the importance ranking, and with it the masks. (A teacher
        // that merely agrees with the labels only rescales the gradient and
        // leaves the ranking alone.)
        let teacher = Array2::from_shape_fn((dataset.n_rows(), 2), |(i, j)| {
            if (i + j) % 2 == 0 { -8.0 } else { 8.0 }
        });
        let mut strong = toy_settings(0.5);
        strong.weights.lambda = 30.0;
        let without = subject_masks(&params, &dataset, None, &toy_settings(0.5)).unwrap();
        let with = subject_masks(&params, &dataset, Some(&teacher), &strong).unwrap();
        assert_ne!(without, with);

        let misaligned = Array2::zeros((3, 2));
        assert!(subject_masks(&params, &dataset, Some(&misaligned), &toy_settings(0.5)).is_err());
    }

    proptest! {
        #[test]
        fn random_intersections_obey_retention_bounds(
            bits_a in proptest::collection::vec(0u8..=1, 24),
            bits_b in proptest::collection::vec(0u8..=1, 24),
        ) {
            let a = mask_from(vec![Array2::from_shape_vec((4, 6), bits_a).unwrap()]);
            let b = mask_from(vec![Array2::from_shape_vec((4, 6), bits_b).unwrap()]);
            let and = a.intersect(&b).unwrap();
            prop_assert!(and.is_subset_of(&a));
            prop_assert!(and.is_subset_of(&b));
            let (ra, rb, r) = (a.retention(), b.retention(), and.retention());
            prop_assert!(r <= ra.min(rb) + 1e-12);
            prop_assert!(r >= (ra + rb - 1.0).max(0.0) - 1e-12);
        }

        #[test]
        fn pruned_count_is_exact(fraction in 0.0f64..0.95, rows in 1usize..8, cols in 1usize..8) {
            let scores = vec![Array2::from_shape_fn((rows, cols), |(i, j)| (i * cols + j) as f64)];
            let mask = prune_mask(&scores, fraction, Ranking::Global).unwrap();
            let expected_pruned = prune_count(fraction, rows * cols);
            prop_assert_eq!(mask.total() - mask.kept_count(), expected_pruned);
        }
    }
}
