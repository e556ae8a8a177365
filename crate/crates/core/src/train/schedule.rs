use alloc::format;

use crate::error::{Error, Result};

/// Learning rate at `step`: linear warmup `0 → lr` over `warmup_steps`, then
/// cosine decay `lr → lr_end` reaching `lr_end` at `total_steps`.
pub fn cosine_schedule(
    step: usize,
    total_steps: usize,
    warmup_steps: usize,
    lr: f64,
    lr_end: f64,
) -> Result<f64> {
    if warmup_steps >= total_steps {
        return Err(Error::InvalidSchedule(format!(
            "warmup ({warmup_steps}) must be shorter than the run ({total_steps})"
        )));
    }
    if step > total_steps {
        return Err(Error::InvalidSchedule(format!(
            "step {step} past the end ({total_steps})"
        )));
    }
    if !(lr >= 0.0 && lr_end >= 0.0 && lr_end <= lr) {
        return Err(Error::InvalidSchedule(format!(
            "need 0 <= lr_end ({lr_end}) <= lr ({lr})"
        )));
    }
    if step < warmup_steps {
        return Ok(lr * step as f64 / warmup_steps as f64);
    }
    let progress = (step - warmup_steps) as f64 / (total_steps - warmup_steps) as f64;
    let cosine = 0.5 * (1.0 + libm::cos(core::f64::consts::PI * progress));
    Ok(lr_end + (lr - lr_end) * cosine)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints() {
        let f = |s| cosine_schedule(s, 100, 10, 2e-5, 1e-6).unwrap();
        assert_eq!(f(0), 0.0);
        assert_eq!(f(10), 2e-5);
        assert_eq!(f(100), 1e-6);
        assert!((f(5) - 1e-5).abs() < 1e-20);
        assert!((f(55) - (1e-6 + 0.5 * (2e-5 - 1e-6))).abs() < 1e-18);
        assert_eq!(cosine_schedule(0, 10, 0, 1.0, 0.5).unwrap(), 1.0);
    }

    #[test]
    fn monotone_after_warmup() {
        let lrs: alloc::vec::Vec<f64> = (10..=100)
            .map(|s| cosine_schedule(s, 100, 10, 1.0, 0.1).unwrap())
            .collect();
        assert!(lrs.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn invalid() {
        assert!(cosine_schedule(0, 10, 10, 1.0, 0.1).is_err());
        assert!(cosine_schedule(11, 10, 1, 1.0, 0.1).is_err());
        assert!(cosine_schedule(0, 10, 1, 0.1, 1.0).is_err());
    }
}
