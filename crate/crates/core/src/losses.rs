//! Mask-branch losses, their analytic gradients, and a central-difference
//! gradient verifier.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::TargetMask;

/// Clamp applied to predictions before taking logarithms.
pub const BCE_EPSILON: f64 = 1e-7;

/// Predicted mask values, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionMask {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl PredictionMask {
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != height * width {
            return Err(Error::Format(format!(
                "{} values given for a {height}x{width} prediction",
                values.len()
            )));
        }
        Ok(Self {
            height,
            width,
            values,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
}

/// Loss value with its gradient with respect to each predicted value.
#[derive(Debug, Clone, PartialEq)]
pub struct LossOutput {
    pub loss: f64,
    pub grad: Vec<f64>,
}

fn check_shapes(target: &TargetMask, pred: &PredictionMask) -> Result<()> {
    if target.dims() != pred.dims() {
        return Err(Error::Dimension {
            expected: target.dims(),
            actual: pred.dims(),
        });
    }
    Ok(())
}

/// Euclidean loss for Scored targets: `sum((t - p)^2) / (2HW)`.
pub fn smask_loss(target: &TargetMask, pred: &PredictionMask) -> Result<LossOutput> {
    check_shapes(target, pred)?;
    let n = pred.values.len() as f64;
    let mut loss = 0.0;
    let grad = target
        .values()
        .iter()
        .zip(&pred.values)
        .map(|(&t, &p)| {
            let r = p - t as f64;
            loss += r * r;
            r / n
        })
        .collect();
    Ok(LossOutput {
        loss: loss / (2.0 * n),
        grad,
    })
}

/// Binary cross-entropy for Thick targets, averaged over pixels. Predictions
/// are clamped to `[eps, 1 - eps]`; the gradient is evaluated at the clamped
/// value.
pub fn tmask_loss(target: &TargetMask, pred: &PredictionMask) -> Result<LossOutput> {
    check_shapes(target, pred)?;
    if let Some(t) = target.values().iter().find(|&&t| t != 0.0 && t != 1.0) {
        return Err(Error::Domain(format!("Thick target value {t} is not binary")));
    }
    let n = pred.values.len() as f64;
    let mut loss = 0.0;
    let grad = target
        .values()
        .iter()
        .zip(&pred.values)
        .map(|(&t, &p)| {
            let p = p.clamp(BCE_EPSILON, 1.0 - BCE_EPSILON);
            if t == 1.0 {
                loss -= p.ln();
                -1.0 / (p * n)
            } else {
                loss -= (1.0 - p).ln();
                1.0 / ((1.0 - p) * n)
            }
        })
        .collect();
    Ok(LossOutput { loss: loss / n, grad })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 1.0,
            gamma: 1.0,
            delta: 1.0,
        }
    }
}

/// `alpha*rpn + beta*rcn + gamma*mask`, plus `delta*imask` for the variant
/// that also trains an instance-mask branch.
pub fn total_loss(
    l_rpn: f64,
    l_rcn: f64,
    l_mask: f64,
    l_imask: f64,
    weights: &LossWeights,
    plus_variant: bool,
) -> Result<f64> {
    for (name, v) in [
        ("alpha", weights.alpha),
        ("beta", weights.beta),
        ("gamma", weights.gamma),
        ("delta", weights.delta),
        ("rpn loss", l_rpn),
        ("rcn loss", l_rcn),
        ("mask loss", l_mask),
        ("instance mask loss", l_imask),
    ] {
        if v.is_nan() || v < 0.0 {
            return Err(Error::Domain(format!("{name} = {v} is negative or NaN")));
        }
    }
    let mut total = weights.alpha * l_rpn + weights.beta * l_rcn + weights.gamma * l_mask;
    if plus_variant {
        total += weights.delta * l_imask;
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Smask,
    Tmask,
}

impl LossKind {
    pub fn evaluate(self, target: &TargetMask, pred: &PredictionMask) -> Result<LossOutput> {
        match self {
            LossKind::Smask => smask_loss(target, pred),
            LossKind::Tmask => tmask_loss(target, pred),
        }
    }
}

/// Largest relative error between the analytic gradient and central
/// differences of the loss, over pixels whose analytic gradient exceeds
/// `1e-12` in magnitude. 0 when no pixel qualifies.
pub fn finite_diff_check(
    kind: LossKind,
    target: &TargetMask,
    pred: &PredictionMask,
    step: f64,
) -> Result<f64> {
    if step.is_nan() || step <= 0.0 {
        return Err(Error::Domain(format!("step {step} must be positive")));
    }
    let analytic = kind.evaluate(target, pred)?.grad;
    let mut probe = pred.clone();
    let mut worst = 0.0f64;
    for (i, &g) in analytic.iter().enumerate() {
        if g.abs() <= 1e-12 {
            continue;
        }
        let x = pred.values[i];
        let (hi, lo) = (x + step, x - step);
        probe.values[i] = hi;
        let up = kind.evaluate(target, &probe)?.loss;
        probe.values[i] = lo;
        let down = kind.evaluate(target, &probe)?.loss;
        probe.values[i] = x;
        // divide by the step actually taken after rounding
        let numeric = (up - down) / (hi - lo);
        worst = worst.max((numeric - g).abs() / g.abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn target(h: usize, w: usize, v: &[f32]) -> TargetMask {
        TargetMask::from_values(h, w, v.to_vec()).unwrap()
    }

    fn pred(h: usize, w: usize, v: &[f64]) -> PredictionMask {
        PredictionMask::new(h, w, v.to_vec()).unwrap()
    }

    #[test]
    fn smask_cases() {
        let t = target(2, 2, &[0.5, 1.0, 0.0, 0.25]);
        let out = smask_loss(&t, &pred(2, 2, &[0.5, 1.0, 0.0, 0.25])).unwrap();
        assert_eq!(out.loss, 0.0);
        assert!(out.grad.iter().all(|&g| g == 0.0));

        let out = smask_loss(&target(1, 1, &[1.0]), &pred(1, 1, &[0.0])).unwrap();
        assert_eq!(out.loss, 0.5);
        assert_eq!(out.grad, vec![-1.0]);

        let t = target(2, 2, &[0.0; 4]);
        let out = smask_loss(&t, &pred(2, 2, &[0.1, 0.0, 0.0, 0.3])).unwrap();
        assert!((out.loss - 0.0125).abs() < 1e-15);
    }

    #[test]
    fn tmask_cases() {
        let t = target(2, 3, &[1.0, 0.0, 0.0, 1.0, 1.0, 0.0]);
        let out = tmask_loss(&t, &pred(2, 3, &[0.5; 6])).unwrap();
        assert!((out.loss - std::f64::consts::LN_2).abs() < 1e-12);

        let out = tmask_loss(&target(1, 1, &[1.0]), &pred(1, 1, &[0.9])).unwrap();
        assert!((out.loss - 0.105_360_515_657_826_3).abs() < 1e-12);

        let out = tmask_loss(&target(1, 1, &[1.0]), &pred(1, 1, &[1.0])).unwrap();
        assert!(out.loss > 0.0 && (out.loss - 1e-7).abs() < 1e-12);
    }

    #[test]
    fn tmask_rejects_soft_target() {
        let t = target(1, 2, &[0.95, 1.0]);
        assert!(matches!(tmask_loss(&t, &pred(1, 2, &[0.5, 0.5])), Err(Error::Domain(_))));
    }

    #[test]
    fn shape_mismatch() {
        let t = TargetMask::zeros(2, 2);
        let p = pred(1, 4, &[0.0; 4]);
        assert!(matches!(smask_loss(&t, &p), Err(Error::Dimension { .. })));
        assert!(matches!(tmask_loss(&t, &p), Err(Error::Dimension { .. })));
    }

    #[test]
    fn totals() {
        let ones = LossWeights::default();
        assert_eq!(total_loss(1.0, 2.0, 3.0, 100.0, &ones, false).unwrap(), 6.0);
        let no_mask = LossWeights { gamma: 0.0, ..ones };
        assert_eq!(
            total_loss(1.0, 2.0, 3.0, 0.0, &no_mask, false).unwrap(),
            total_loss(1.0, 2.0, 30.0, 0.0, &no_mask, false).unwrap()
        );
        let w = LossWeights {
            alpha: 1.0,
            beta: 1.0,
            gamma: 0.5,
            delta: 0.5,
        };
        assert_eq!(total_loss(1.0, 1.0, 2.0, 2.0, &w, true).unwrap(), 4.0);
        assert!(total_loss(-1.0, 1.0, 1.0, 1.0, &ones, false).is_err());
        assert!(total_loss(1.0, 1.0, 1.0, 1.0, &LossWeights { beta: -0.1, ..ones }, false).is_err());
    }

    #[test]
    fn gradient_check_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let t: Vec<f32> = (0..64).map(|_| rng.random_range(0.0..1.0)).collect();
        let p: Vec<f64> = t
            .iter()
            .map(|&t| {
                let off = rng.random_range(0.05..0.5) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                t as f64 + off
            })
            .collect();
        let err = finite_diff_check(LossKind::Smask, &target(8, 8, &t), &pred(8, 8, &p), 1e-5).unwrap();
        assert!(err < 1e-8, "{err}");

        let t: Vec<f32> = (0..64).map(|_| if rng.random_bool(0.5) { 1.0 } else { 0.0 }).collect();
        let p: Vec<f64> = (0..64).map(|_| rng.random_range(0.1..0.9)).collect();
        let err = finite_diff_check(LossKind::Tmask, &target(8, 8, &t), &pred(8, 8, &p), 1e-5).unwrap();
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn gradient_check_zero_grad() {
        let t = target(2, 2, &[0.2, 0.4, 0.6, 0.8]);
        let p = pred(2, 2, &[0.2f32 as f64, 0.4f32 as f64, 0.6f32 as f64, 0.8f32 as f64]);
        assert_eq!(finite_diff_check(LossKind::Smask, &t, &p, 1e-5).unwrap(), 0.0);
    }

    #[test]
    fn zero_residual_padding_rescales() {
        let t = target(2, 2, &[0.0, 1.0, 0.5, 0.25]);
        let p = pred(2, 2, &[0.1, 0.7, 0.5, 0.3]);
        let base = smask_loss(&t, &p).unwrap().loss;
        let mut tv = t.values().to_vec();
        tv.extend([0.0; 4]);
        let mut pv = p.values().to_vec();
        pv.extend([0.0; 4]);
        let padded = smask_loss(&target(2, 4, &tv), &pred(2, 4, &pv)).unwrap().loss;
        assert!((padded - base * 4.0 / 8.0).abs() < 1e-15);
    }
}
