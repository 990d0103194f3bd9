//! Loss terms and their exact logit gradients.
//!
//! Every loss returns the scalar value together with `d loss / d logits`, so
//! the trainer can sum weighted gradients at the logit level and run a single
//! backward pass per batch.
//!
//! The invariance penalty treats a scalar multiplier `w` on the logits as a
//! dummy classifier fixed at 1: with per-row cross entropy risk
//! `r(w) = mean_i ce(w * z_i, y_i)`, the penalty is the magnitude of
//! `g = dr/dw` at `w = 1` (or `g^2` for the squared variant). A model whose
//! per-environment risk is stationary in `w` gets zero penalty.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shape of the invariance penalty applied per environment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IrmVariant {
    /// `|dr/dw|` — the default.
    Norm,
    /// `(dr/dw)^2`.
    Squared,
}

/// A loss value with its gradient with respect to the logits.
#[derive(Debug, Clone)]
pub struct LossGrad {
    pub loss: f64,
    pub grad: Array2<f64>,
}

/// Row-wise softmax, stabilized by max subtraction.
pub fn softmax(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    out
}

/// Teacher soft targets: softmax of the teacher's raw logits, no temperature.
pub fn teacher_soft_targets(teacher_logits: &Array2<f64>) -> Array2<f64> {
    softmax(teacher_logits)
}

fn check_batch(logits: &Array2<f64>, labels: &[usize]) -> Result<()> {
    if logits.nrows() == 0 {
        return Err(Error::Empty("loss over an empty batch".into()));
    }
    if labels.len() != logits.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "{} labels for {} logit rows",
            labels.len(),
            logits.nrows()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= logits.ncols()) {
        return Err(Error::Data(format!(
            "label {bad} out of range for {} classes",
            logits.ncols()
        )));
    }
    if !logits.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("logits".into()));
    }
    Ok(())
}

fn log_sum_exp_rows(logits: &Array2<f64>) -> Vec<f64> {
    logits
        .rows()
        .into_iter()
        .map(|row| {
            let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            max + row.iter().map(|&v| (v - max).exp()).sum::<f64>().ln()
        })
        .collect()
}

/// Mean cross entropy; gradient is `(softmax - onehot) / n`.
///
/// Row losses are evaluated in max-shifted coordinates (`ln Σ e^(z - m)`
/// minus the shifted label logit) rather than as `lse(z) - z_y`, so a
/// saturated row's tiny loss is not destroyed by cancellation against the
/// large logit.
pub fn cross_entropy(logits: &Array2<f64>, labels: &[usize]) -> Result<LossGrad> {
    check_batch(logits, labels)?;
    let n = logits.nrows() as f64;
    let loss = labels
        .iter()
        .enumerate()
        .map(|(i, &y)| {
            let row = logits.row(i);
            let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            let sum: f64 = row.iter().map(|&v| (v - max).exp()).sum();
            sum.ln() - (row[y] - max)
        })
        .sum::<f64>()
        / n;
    let mut grad = softmax(logits);
    for (i, &y) in labels.iter().enumerate() {
        grad[[i, y]] -= 1.0;
    }
    grad.mapv_inplace(|v| v / n);
    Ok(LossGrad { loss, grad })
}

/// Invariance penalty of one environment's batch, with its exact logit
/// gradient.
pub fn irm_penalty(
    logits: &Array2<f64>,
    labels: &[usize],
    variant: IrmVariant,
) -> Result<LossGrad> {
    check_batch(logits, labels)?;
    let (n_rows, n_cols) = logits.dim();
    let n = n_rows as f64;
    let p = softmax(logits);

    // g = mean_i (<z_i, p_i> - z_{i, y_i})
    let mut z_dot_p = vec![0.0; n_rows];
    let mut g = 0.0;
    for i in 0..n_rows {
        let zp: f64 = logits
            .row(i)
            .iter()
            .zip(p.row(i).iter())
            .map(|(&z, &q)| z * q)
            .sum();
        z_dot_p[i] = zp;
        g += zp - logits[[i, labels[i]]];
    }
    g /= n;

    // dg/dz_{ic} = (p_{ic} - [c == y_i] + p_{ic} * (z_{ic} - <z_i, p_i>)) / n
    let mut dg = Array2::zeros(logits.dim());
    for i in 0..n_rows {
        for c in 0..n_cols {
            let indicator = if c == labels[i] { 1.0 } else { 0.0 };
            dg[[i, c]] =
                (p[[i, c]] - indicator + p[[i, c]] * (logits[[i, c]] - z_dot_p[i])) / n;
        }
    }

    Ok(match variant {
        IrmVariant::Norm => {
            let sign = if g > 0.0 {
                1.0
            } else if g < 0.0 {
                -1.0
            } else {
                0.0
            };
            LossGrad {
                loss: g.abs(),
                grad: dg * sign,
            }
        }
        IrmVariant::Squared => LossGrad {
            loss: g * g,
            grad: dg * (2.0 * g),
        },
    })
}

/// One environment's slice of a minibatch: the logits and labels of a single
/// subject's rows.
#[derive(Debug, Clone)]
pub struct EnvironmentBatch {
    pub env_id: String,
    pub logits: Array2<f64>,
    pub labels: Vec<usize>,
}

/// Weights of the two regularization terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    /// Invariance-penalty weight.
    pub beta: f64,
    /// Soft-label (continuous-label) weight.
    pub lambda: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            beta: 0.3,
            lambda: 0.5,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "beta must be finite and >= 0, got {}",
                self.beta
            )));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "lambda must be finite and >= 0, got {}",
                self.lambda
            )));
        }
        Ok(())
    }
}

/// Value and per-term breakdown of the combined objective, with its gradient
/// over the stacked logits (environment blocks in input order).
#[derive(Debug, Clone)]
pub struct CombinedLoss {
    pub total: f64,
    pub cross_entropy: f64,
    /// Sum of per-environment penalties, unweighted. Zero (not computed)
    /// when `beta == 0`.
    pub penalty_sum: f64,
    /// Soft-label term, unweighted. Zero (not computed) when `lambda == 0`
    /// or no teacher logits are given.
    pub soft_label: f64,
    pub grad: Array2<f64>,
}

/// The full training objective: pooled cross entropy over every row, plus
/// `beta` times the per-environment invariance penalties, plus `lambda`
/// times the soft-label term against the teacher.
///
/// The environment batches partition the minibatch; `teacher_logits`, when
/// given, must align row-wise with the environments stacked in order. A term
/// whose weight is zero is skipped entirely — not computed and added with
/// weight zero — so runs with `beta == 0` or `lambda == 0` are exactly the
/// reduced objectives.
pub fn combined_loss(
    envs: &[EnvironmentBatch],
    teacher_logits: Option<&Array2<f64>>,
    weights: &LossWeights,
    variant: IrmVariant,
) -> Result<CombinedLoss> {
    weights.validate()?;
    if envs.is_empty() {
        return Err(Error::Empty("no environment batches".into()));
    }
    let n_cols = envs[0].logits.ncols();
    let total_rows: usize = envs.iter().map(|e| e.logits.nrows()).sum();
    let mut stacked = Array2::zeros((total_rows, n_cols));
    let mut stacked_labels = Vec::with_capacity(total_rows);
    let mut offset = 0;
    for env in envs {
        if env.logits.ncols() != n_cols {
            return Err(Error::ShapeMismatch(format!(
                "environment {} has {} classes, expected {n_cols}",
                env.env_id,
                env.logits.ncols()
            )));
        }
        check_batch(&env.logits, &env.labels)?;
        stacked
            .slice_mut(ndarray::s![offset..offset + env.logits.nrows(), ..])
            .assign(&env.logits);
        stacked_labels.extend_from_slice(&env.labels);
        offset += env.logits.nrows();
    }

    let ce = cross_entropy(&stacked, &stacked_labels)?;
    let mut grad = ce.grad;
    let mut penalty_sum = 0.0;
    if weights.beta > 0.0 {
        let mut offset = 0;
        for env in envs {
            let n_env = env.logits.nrows();
            let p = irm_penalty(&env.logits, &env.labels, variant)?;
            penalty_sum += p.loss;
            let mut block = grad.slice_mut(ndarray::s![offset..offset + n_env, ..]);
            block += &(p.grad * weights.beta);
            offset += n_env;
        }
    }
    let mut soft = 0.0;
    if weights.lambda > 0.0 {
        if let Some(teacher) = teacher_logits {
            if teacher.dim() != stacked.dim() {
                return Err(Error::ShapeMismatch(format!(
                    "teacher logits {:?} do not align with {:?} stacked rows",
                    teacher.dim(),
                    stacked.dim()
                )));
            }
            let targets = teacher_soft_targets(teacher);
            let s = soft_label_loss(&stacked, &targets)?;
            soft = s.loss;
            grad += &(s.grad * weights.lambda);
        }
    }
    Ok(CombinedLoss {
        total: ce.loss + weights.beta * penalty_sum + weights.lambda * soft,
        cross_entropy: ce.loss,
        penalty_sum,
        soft_label: soft,
        grad,
    })
}

/// Cross entropy against a fixed soft target distribution
/// (`-mean_i sum_c q_ic log p_ic`); gradient is `(softmax - q) / n`.
pub fn soft_label_loss(
    student_logits: &Array2<f64>,
    teacher_probs: &Array2<f64>,
) -> Result<LossGrad> {
    if student_logits.nrows() == 0 {
        return Err(Error::Empty("loss over an empty batch".into()));
    }
    if student_logits.dim() != teacher_probs.dim() {
        return Err(Error::ShapeMismatch(format!(
            "student logits {:?} vs teacher targets {:?}",
            student_logits.dim(),
            teacher_probs.dim()
        )));
    }
    if !student_logits.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("student logits".into()));
    }
    if !teacher_probs.iter().all(|v| v.is_finite() && *v >= 0.0) {
        return Err(Error::NonFinite("teacher targets".into()));
    }
    let n = student_logits.nrows() as f64;
    let lse = log_sum_exp_rows(student_logits);
    let mut loss = 0.0;
    for i in 0..student_logits.nrows() {
        for c in 0..student_logits.ncols() {
            loss += teacher_probs[[i, c]] * (lse[i] - student_logits[[i, c]]);
        }
    }
    loss /= n;
    let grad = (softmax(student_logits) - teacher_probs) / n;
    Ok(LossGrad { loss, grad })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::Rng;

    /// Central finite difference of a scalar loss over every logit entry.
    fn finite_diff<F: Fn(&Array2<f64>) -> f64>(
        logits: &Array2<f64>,
        h: f64,
        f: F,
    ) -> Array2<f64> {
        let mut out = Array2::zeros(logits.dim());
        let mut z = logits.clone();
        for i in 0..logits.nrows() {
            for j in 0..logits.ncols() {
                let orig = z[[i, j]];
                z[[i, j]] = orig + h;
                let up = f(&z);
                z[[i, j]] = orig - h;
                let down = f(&z);
                z[[i, j]] = orig;
                out[[i, j]] = (up - down) / (2.0 * h);
            }
        }
        out
    }

    fn random_batch(seed: u64, rows: usize, cols: usize) -> (Array2<f64>, Vec<usize>) {
        let mut rng = crate::rng::stream(seed, crate::rng::salt::SHUFFLE, 0);
        let logits = Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-3.0..3.0));
        let labels = (0..rows).map(|_| rng.gen_range(0..cols)).collect();
        (logits, labels)
    }

    #[test]
    fn cross_entropy_hand_values() {
        // Confident correct prediction: loss = ln(1 + e^-20).
        let lg = cross_entropy(&array![[10.0, -10.0]], &[0]).unwrap();
        assert_abs_diff_eq!(lg.loss, (1.0 + (-20.0f64).exp()).ln(), epsilon = 1e-18);

        // Uniform logits: loss = ln 2, grad = (p - onehot) / n.
        let lg = cross_entropy(&array![[0.0, 0.0]], &[0]).unwrap();
        assert_abs_diff_eq!(lg.loss, 2.0f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(lg.grad[[0, 0]], -0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(lg.grad[[0, 1]], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn cross_entropy_gradient_matches_finite_differences() {
        let (logits, labels) = random_batch(42, 7, 3);
        let lg = cross_entropy(&logits, &labels).unwrap();
        let fd = finite_diff(&logits, 1e-6, |z| cross_entropy(z, &labels).unwrap().loss);
        for (a, b) in lg.grad.iter().zip(fd.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-8);
        }
    }

    #[test]
    fn penalty_hand_value() {
        // One row, logits (0, 2), label 1: g = 2*sigmoid(2) - 2.
        let lg = irm_penalty(&array![[0.0, 2.0]], &[1], IrmVariant::Norm).unwrap();
        let sigma2 = 1.0 / (1.0 + (-2.0f64).exp());
        assert_abs_diff_eq!(lg.loss, (2.0 * sigma2 - 2.0).abs(), epsilon = 1e-15);
        assert_abs_diff_eq!(lg.loss, 0.23840584404423537, epsilon = 1e-12);

        let sq = irm_penalty(&array![[0.0, 2.0]], &[1], IrmVariant::Squared).unwrap();
        assert_abs_diff_eq!(sq.loss, lg.loss * lg.loss, epsilon = 1e-15);
    }

    #[test]
    fn penalty_is_zero_at_stationary_risk() {
        // Uniform logits make the risk stationary in the dummy classifier.
        let logits = array![[0.0, 0.0], [0.0, 0.0]];
        for variant in [IrmVariant::Norm, IrmVariant::Squared] {
            let lg = irm_penalty(&logits, &[0, 1], variant).unwrap();
            assert_eq!(lg.loss, 0.0);
            assert!(lg.grad.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn penalty_gradient_matches_finite_differences() {
        for seed in [1u64, 2, 3] {
            let (logits, labels) = random_batch(seed, 9, 2);
            for variant in [IrmVariant::Norm, IrmVariant::Squared] {
                let lg = irm_penalty(&logits, &labels, variant).unwrap();
                let fd = finite_diff(&logits, 1e-6, |z| {
                    irm_penalty(z, &labels, variant).unwrap().loss
                });
                for (a, b) in lg.grad.iter().zip(fd.iter()) {
                    assert_abs_diff_eq!(a, b, epsilon = 1e-6);
                }
            }
        }
    }

    #[test]
    fn soft_labels_reduce_to_cross_entropy_on_onehot_targets() {
        let (logits, labels) = random_batch(8, 5, 2);
        let mut onehot = Array2::zeros(logits.dim());
        for (i, &y) in labels.iter().enumerate() {
            onehot[[i, y]] = 1.0;
        }
        let soft = soft_label_loss(&logits, &onehot).unwrap();
        let ce = cross_entropy(&logits, &labels).unwrap();
        assert_abs_diff_eq!(soft.loss, ce.loss, epsilon = 1e-12);
        for (a, b) in soft.grad.iter().zip(ce.grad.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn soft_label_gradient_matches_finite_differences() {
        let (teacher, _) = random_batch(11, 6, 2);
        let targets = teacher_soft_targets(&teacher);
        let (student, _) = random_batch(12, 6, 2);
        let lg = soft_label_loss(&student, &targets).unwrap();
        let fd = finite_diff(&student, 1e-6, |z| {
            soft_label_loss(z, &targets).unwrap().loss
        });
        for (a, b) in lg.grad.iter().zip(fd.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-8);
        }
    }

    #[test]
    fn penalty_is_invariant_to_per_row_logit_shifts() {
        let (logits, labels) = random_batch(21, 6, 2);
        let mut shifted = logits.clone();
        for (i, mut row) in shifted.rows_mut().into_iter().enumerate() {
            row += 0.5 * (i as f64 + 1.0);
        }
        for variant in [IrmVariant::Norm, IrmVariant::Squared] {
            let a = irm_penalty(&logits, &labels, variant).unwrap();
            let b = irm_penalty(&shifted, &labels, variant).unwrap();
            assert_abs_diff_eq!(a.loss, b.loss, epsilon = 1e-12);
        }
    }

    #[test]
    fn self_distillation_loss_equals_teacher_entropy() {
        let (teacher, _) = random_batch(5, 4, 2);
        let q = teacher_soft_targets(&teacher);
        let at_teacher = soft_label_loss(&teacher, &q).unwrap();
        let entropy = -q
            .rows()
            .into_iter()
            .map(|row| row.iter().map(|&p| p * p.ln()).sum::<f64>())
            .sum::<f64>()
            / q.nrows() as f64;
        assert_abs_diff_eq!(at_teacher.loss, entropy, epsilon = 1e-12);

        // ...and that entropy is the minimum over students.
        let (other, _) = random_batch(6, 4, 2);
        assert!(soft_label_loss(&other, &q).unwrap().loss >= at_teacher.loss);
    }

    #[test]
    fn saturated_teacher_reduces_to_hard_labels() {
        let n = 4;
        let teacher = Array2::from_shape_fn((n, 2), |(_, c)| if c == 0 { 30.0 } else { -30.0 });
        let (student, _) = random_batch(14, n, 2);
        let soft = soft_label_loss(&student, &teacher_soft_targets(&teacher)).unwrap();
        let hard = cross_entropy(&student, &vec![0; n]).unwrap();
        assert_abs_diff_eq!(soft.loss, hard.loss, epsilon = 1e-9);
    }

    fn toy_envs() -> (Vec<EnvironmentBatch>, Array2<f64>) {
        let env_a = EnvironmentBatch {
            env_id: "a".into(),
            logits: array![[0.3, -0.2], [1.1, 0.4]],
            labels: vec![0, 1],
        };
        let env_b = EnvironmentBatch {
            env_id: "b".into(),
            logits: array![[-0.6, 0.9], [0.0, 0.2], [2.0, -1.0]],
            labels: vec![1, 1, 0],
        };
        let teacher = array![
            [0.5, -0.5],
            [0.8, 0.1],
            [-0.3, 0.7],
            [0.1, 0.1],
            [1.5, -0.4]
        ];
        (vec![env_a, env_b], teacher)
    }

    #[test]
    fn combined_loss_matches_hand_summed_terms() {
        let (envs, teacher) = toy_envs();
        let weights = LossWeights::default();
        let out = combined_loss(&envs, Some(&teacher), &weights, IrmVariant::Norm).unwrap();

        let mut stacked = Array2::zeros((5, 2));
        stacked.slice_mut(ndarray::s![0..2, ..]).assign(&envs[0].logits);
        stacked.slice_mut(ndarray::s![2..5, ..]).assign(&envs[1].logits);
        let labels = [0usize, 1, 1, 1, 0];
        let ce = cross_entropy(&stacked, &labels).unwrap();
        let pen_a = irm_penalty(&envs[0].logits, &envs[0].labels, IrmVariant::Norm).unwrap();
        let pen_b = irm_penalty(&envs[1].logits, &envs[1].labels, IrmVariant::Norm).unwrap();
        let soft = soft_label_loss(&stacked, &teacher_soft_targets(&teacher)).unwrap();

        let expect = ce.loss + 0.3 * (pen_a.loss + pen_b.loss) + 0.5 * soft.loss;
        assert_abs_diff_eq!(out.total, expect, epsilon = 1e-12);
        assert_abs_diff_eq!(out.cross_entropy, ce.loss, epsilon = 1e-15);
        assert_abs_diff_eq!(out.penalty_sum, pen_a.loss + pen_b.loss, epsilon = 1e-15);
        assert_abs_diff_eq!(out.soft_label, soft.loss, epsilon = 1e-15);

        // Gradient blocks: pooled CE + beta * env penalty + lambda * soft.
        let mut expect_grad = ce.grad + soft.grad * 0.5;
        expect_grad
            .slice_mut(ndarray::s![0..2, ..])
            .scaled_add(0.3, &pen_a.grad);
        expect_grad
            .slice_mut(ndarray::s![2..5, ..])
            .scaled_add(0.3, &pen_b.grad);
        for (g, e) in out.grad.iter().zip(expect_grad.iter()) {
            assert_abs_diff_eq!(g, e, epsilon = 1e-12);
        }
    }

    #[test]
    fn combined_loss_with_zero_weights_is_exactly_pooled_cross_entropy() {
        let (envs, teacher) = toy_envs();
        let weights = LossWeights { beta: 0.0, lambda: 0.0 };
        let out = combined_loss(&envs, Some(&teacher), &weights, IrmVariant::Norm).unwrap();
        let mut stacked = Array2::zeros((5, 2));
        stacked.slice_mut(ndarray::s![0..2, ..]).assign(&envs[0].logits);
        stacked.slice_mut(ndarray::s![2..5, ..]).assign(&envs[1].logits);
        let ce = cross_entropy(&stacked, &[0, 1, 1, 1, 0]).unwrap();
        assert_eq!(out.total, ce.loss);
        assert_eq!(out.grad, ce.grad);
        assert_eq!(out.penalty_sum, 0.0);
        assert_eq!(out.soft_label, 0.0);
    }

    #[test]
    fn combined_loss_is_environment_order_invariant() {
        let (envs, teacher) = toy_envs();
        let weights = LossWeights::default();
        let forward = combined_loss(&envs, Some(&teacher), &weights, IrmVariant::Norm).unwrap();

        let swapped = vec![envs[1].clone(), envs[0].clone()];
        let mut teacher_swapped = Array2::zeros(teacher.dim());
        teacher_swapped
            .slice_mut(ndarray::s![0..3, ..])
            .assign(&teacher.slice(ndarray::s![2..5, ..]));
        teacher_swapped
            .slice_mut(ndarray::s![3..5, ..])
            .assign(&teacher.slice(ndarray::s![0..2, ..]));
        let backward =
            combined_loss(&swapped, Some(&teacher_swapped), &weights, IrmVariant::Norm).unwrap();
        assert_abs_diff_eq!(forward.total, backward.total, epsilon = 1e-12);
    }

    #[test]
    fn combined_loss_is_monotone_in_weights() {
        let (envs, teacher) = toy_envs();
        let at = |beta: f64, lambda: f64| {
            combined_loss(
                &envs,
                Some(&teacher),
                &LossWeights { beta, lambda },
                IrmVariant::Norm,
            )
            .unwrap()
            .total
        };
        assert!(at(0.3, 0.5) >= at(0.1, 0.5));
        assert!(at(0.3, 0.5) >= at(0.3, 0.2));
        assert!(at(0.6, 0.5) >= at(0.3, 0.5));
    }

    #[test]
    fn combined_loss_rejects_misaligned_teacher() {
        let (envs, _) = toy_envs();
        let teacher = Array2::zeros((4, 2));
        let err = combined_loss(
            &envs,
            Some(&teacher),
            &LossWeights::default(),
            IrmVariant::Norm,
        )
        .unwrap_err();
        assert!(matches!(err, Error::ShapeMismatch(_)));
    }

    #[test]
    fn invalid_batches_are_rejected() {
        assert!(matches!(
            cross_entropy(&Array2::zeros((0, 2)), &[]),
            Err(Error::Empty(_))
        ));
        assert!(matches!(
            cross_entropy(&array![[0.0, 0.0]], &[2]),
            Err(Error::Data(_))
        ));
        assert!(matches!(
            cross_entropy(&array![[0.0, 0.0]], &[0, 1]),
            Err(Error::ShapeMismatch(_))
        ));
        assert!(matches!(
            irm_penalty(&array![[f64::NAN, 0.0]], &[0], IrmVariant::Norm),
            Err(Error::NonFinite(_))
        ));
        assert!(matches!(
            soft_label_loss(&array![[0.0, 0.0]], &Array2::zeros((2, 2))),
            Err(Error::ShapeMismatch(_))
        ));
    }
}
