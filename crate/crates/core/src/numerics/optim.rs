//! Adam with a linear warmup / linear decay learning-rate schedule.

use crate::error::{Error, Result};
use crate::numerics::tensor::{Parameter, Tensor};

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

/// Optimizer state over one flat parameter set. The schedule ramps the
/// learning rate linearly from 0 over `warmup_fraction * total_steps` steps,
/// then decays it linearly back to 0 at `total_steps`.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub m: Tensor,
    pub v: Tensor,
    pub step: u64,
    pub base_lr: f64,
    pub warmup_fraction: f64,
    pub total_steps: u64,
}

impl AdamState {
    pub fn new(
        param_count: usize,
        base_lr: f64,
        warmup_fraction: f64,
        total_steps: u64,
    ) -> Result<Self> {
        if base_lr < 0.0 {
            return Err(Error::Config("learning rate must be nonnegative".into()));
        }
        if !(0.0..=1.0).contains(&warmup_fraction) {
            return Err(Error::Config("warmup fraction must be in [0, 1]".into()));
        }
        if total_steps == 0 {
            return Err(Error::Config("schedule needs at least one step".into()));
        }
        Ok(AdamState {
            m: Tensor::zeros(vec![param_count]),
            v: Tensor::zeros(vec![param_count]),
            step: 0,
            base_lr,
            warmup_fraction,
            total_steps,
        })
    }

    /// Scheduled learning rate at a given step index.
    pub fn effective_lr(&self, step: u64) -> f64 {
        let t = step as f64;
        let total = self.total_steps as f64;
        let warmup = self.warmup_fraction * total;
        let lr = if t < warmup {
            self.base_lr * t / warmup
        } else if total > warmup {
            self.base_lr * (total - t) / (total - warmup)
        } else {
            0.0
        };
        lr.max(0.0)
    }
}

/// One Adam update over `params` (in the fixed order the caller supplies).
/// Gradients must already hold the batch-mean gradient; they are zeroed
/// after the update.
pub fn adam_step(params: &mut [&mut Parameter], state: &mut AdamState) -> Result<()> {
    let total: usize = params.iter().map(|p| p.numel()).sum();
    if total != state.m.numel() {
        return Err(Error::Dimension(format!(
            "optimizer state sized for {} values, parameters hold {}",
            state.m.numel(),
            total
        )));
    }
    if state.step > state.total_steps {
        return Err(Error::Schedule(format!(
            "step {} exceeds schedule of {} total steps",
            state.step, state.total_steps
        )));
    }
    let lr = state.effective_lr(state.step);
    let t = (state.step + 1) as i32;
    let bc1 = 1.0 - BETA1.powi(t);
    let bc2 = 1.0 - BETA2.powi(t);

    let mut offset = 0;
    for p in params.iter_mut() {
        let n = p.numel();
        for i in 0..n {
            let g = p.grad.data[i];
            let m = &mut state.m.data[offset + i];
            let v = &mut state.v.data[offset + i];
            *m = BETA1 * *m + (1.0 - BETA1) * g;
            *v = BETA2 * *v + (1.0 - BETA2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            p.value.data[i] -= lr * m_hat / (v_hat.sqrt() + EPS);
        }
        p.value.check_finite()?;
        p.zero_grad();
        offset += n;
    }
    state.step += 1;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_param(x: f64) -> Parameter {
        Parameter::new(Tensor::scalar(x))
    }

    #[test]
    fn zero_gradient_is_identity_on_parameters() {
        let mut p = single_param(1.5);
        let mut state = AdamState::new(1, 0.1, 0.0, 10).unwrap();
        for _ in 0..5 {
            adam_step(&mut [&mut p], &mut state).unwrap();
        }
        assert_eq!(p.value.data[0], 1.5);
    }

    #[test]
    fn warmup_step_zero_leaves_parameters_unchanged() {
        let mut p = single_param(2.0);
        let mut state = AdamState::new(1, 0.1, 0.5, 10).unwrap();
        p.grad.data[0] = 1.0;
        adam_step(&mut [&mut p], &mut state).unwrap();
        assert_eq!(p.value.data[0], 2.0);
        assert_eq!(state.step, 1);
        // Gradients are consumed either way.
        assert_eq!(p.grad.data[0], 0.0);
    }

    #[test]
    fn constant_gradient_decreases_parameter_past_warmup() {
        // No warmup, so every step moves. Compare against an independent
        // simulation of the Adam recurrence with the same schedule.
        let mut p = single_param(1.0);
        let mut state = AdamState::new(1, 0.01, 0.0, 10).unwrap();

        let (mut m, mut v) = (0.0f64, 0.0f64);
        let mut x = 1.0f64;
        let mut expected = Vec::new();
        for t in 0..10u64 {
            let lr = 0.01 * (10.0 - t as f64) / 10.0;
            m = 0.9 * m + 0.1 * 1.0;
            v = 0.999 * v + 0.001 * 1.0;
            let m_hat = m / (1.0 - 0.9f64.powi(t as i32 + 1));
            let v_hat = v / (1.0 - 0.999f64.powi(t as i32 + 1));
            x -= lr * m_hat / (v_hat.sqrt() + 1e-8);
            expected.push(x);
        }

        let mut prev = p.value.data[0];
        for step in 0..10 {
            p.grad.data[0] = 1.0;
            adam_step(&mut [&mut p], &mut state).unwrap();
            let cur = p.value.data[0];
            assert!(cur < prev, "step {step}: {cur} should be below {prev}");
            assert!((cur - expected[step]).abs() < 1e-12);
            prev = cur;
        }
    }

    #[test]
    fn stepping_past_schedule_errors() {
        let mut p = single_param(0.0);
        let mut state = AdamState::new(1, 0.1, 0.0, 2).unwrap();
        adam_step(&mut [&mut p], &mut state).unwrap();
        adam_step(&mut [&mut p], &mut state).unwrap();
        // step == total_steps acts as a zero-lr step and is allowed once.
        adam_step(&mut [&mut p], &mut state).unwrap();
        let res = adam_step(&mut [&mut p], &mut state);
        assert!(matches!(res, Err(Error::Schedule(_))));
    }

    #[test]
    fn schedule_shape() {
        let state = AdamState::new(1, 1.0, 0.1, 100).unwrap();
        assert_eq!(state.effective_lr(0), 0.0);
        assert!((state.effective_lr(5) - 0.5).abs() < 1e-12);
        assert!((state.effective_lr(10) - 1.0).abs() < 1e-12);
        assert!((state.effective_lr(55) - 0.5).abs() < 1e-12);
        assert_eq!(state.effective_lr(100), 0.0);
    }
}
