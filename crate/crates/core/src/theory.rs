//! Closed-form convergence bounds for BRWP under strong log-concavity.
//!
//! Remainders of order `h³` are dropped; callers that compare against
//! measurements add an explicit slack.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub alpha: f64,
    pub beta: f64,
    pub h: f64,
    /// `T = s·h`.
    pub s: f64,
    pub kl0: f64,
    pub m0: f64,
}

impl BoundInputs {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta), ("h", self.h)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(format!("{name} must be positive, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.s) {
            return Err(Error::param(format!("s must lie in [0, 1], got {}", self.s)));
        }
        if !(self.kl0 >= 0.0) || !(self.m0 >= 0.0) {
            return Err(Error::param("KL₀ and M₀ must be nonnegative"));
        }
        Ok(())
    }

    /// Per-step contraction factor `1 − 2αh + (1+2s)α²h²`.
    pub fn contraction(&self) -> f64 {
        let ah = self.alpha * self.h;
        1.0 - 2.0 * ah + (1.0 + 2.0 * self.s) * ah * ah
    }
}

/// One-step KL bound
/// `[1 − 2αh + (1+2s)α²h²]·KL_k + (h²s/2)·M₀·e^{−4αhk}`.
pub fn kl_one_step_bound(kl_k: f64, k: usize, inp: &BoundInputs) -> Result<f64> {
    inp.validate()?;
    let h = inp.h;
    Ok(inp.contraction() * kl_k + 0.5 * h * h * inp.s * inp.m0 * (-4.0 * inp.alpha * h * k as f64).exp())
}

/// KL bound after `k` steps:
/// `exp[−αkh(2 − (1+2s)αh)]·KL₀ + (h²/2)·s·M₀·max(e^{−4αkh}, e^{−αkh(2−(1+2s)αh)}) / |D|`
/// with `D = e^{−4αh} − (1 − 2αh + (1+2s)α²h²)`.
///
/// The bias term bounds the exact geometric sum
/// `(e^{−4αkh} − q^k)/D` in magnitude, so it stays valid whichever sign
/// `D` takes. When `D > 0` it reduces to `e^{−4αkh}/D`.
pub fn kl_k_bound(k: usize, inp: &BoundInputs) -> Result<f64> {
    inp.validate()?;
    let (a, h, s) = (inp.alpha, inp.h, inp.s);
    let kf = k as f64;
    let decay = (-a * kf * h * (2.0 - (1.0 + 2.0 * s) * a * h)).exp();
    let denom = (-4.0 * a * h).exp() - inp.contraction();
    if denom.abs() < 1e-12 {
        return Err(Error::param(format!("bias denominator {denom:e} is degenerate")));
    }
    let bias_decay = (-4.0 * a * kf * h).exp().max(decay);
    Ok(decay * inp.kl0 + 0.5 * h * h * s * inp.m0 * bias_decay / denom.abs())
}

/// Bias denominator `e^{−4αh} − (1 − 2αh + (1+2s)α²h²)` as written.
pub fn bias_denominator(inp: &BoundInputs) -> f64 {
    (-4.0 * inp.alpha * inp.h).exp() - inp.contraction()
}

/// Iterations `⌈|ln δ|/(2α√δ)⌉` to reach KL ≤ δ with `h = √δ`.
pub fn sampling_complexity(delta: f64, alpha: f64) -> Result<u64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::param(format!("delta must lie in (0, 1), got {delta}")));
    }
    if !(alpha > 0.0) {
        return Err(Error::param("alpha must be positive"));
    }
    if delta.sqrt() >= max_stepsize(alpha) {
        return Err(Error::param(format!(
            "√δ = {} exceeds the maximal stepsize 2/(3α)",
            delta.sqrt()
        )));
    }
    Ok((delta.ln().abs() / (2.0 * alpha * delta.sqrt())).ceil() as u64)
}

/// Stepsize `1/(3α)` with the fastest contraction.
pub fn optimal_stepsize(alpha: f64) -> f64 {
    1.0 / (3.0 * alpha)
}

/// Largest stepsize `2/(3α)` for which the contraction factor is below 1.
pub fn max_stepsize(alpha: f64) -> f64 {
    2.0 / (3.0 * alpha)
}

/// Iterates `a_{k+1} = (1−c₁h)a_k + h²c₂e^{−c₃kh}` and checks
/// `a_k ≤ (1−c₁h)^k a₀ + h²c₂·max(e^{−c₃kh}, (1−c₁h)^k)/|e^{−c₃h} − (1−c₁h)|`
/// for every `k ≤ k_max`.
pub fn sequence_bound_check(c1: f64, c2: f64, c3: f64, h: f64, a0: f64, k_max: usize) -> Result<bool> {
    if !(c1 > 0.0 && c3 > 0.0 && h > 0.0 && c2 >= 0.0) {
        return Err(Error::param("c₁, c₃, h must be positive and c₂ nonnegative"));
    }
    let q = 1.0 - c1 * h;
    if c1 * h >= 1.0 {
        return Err(Error::param(format!("c₁h = {} must be below 1", c1 * h)));
    }
    let denom = (-c3 * h).exp() - q;
    if denom.abs() < 1e-12 {
        return Err(Error::param("e^{−c₃h} coincides with 1 − c₁h"));
    }
    let mut a = a0;
    let mut qk = 1.0;
    for k in 0..=k_max {
        let e = (-c3 * h * k as f64).exp();
        let bound = qk * a0 + h * h * c2 * e.max(qk) / denom.abs();
        if a > bound * (1.0 + 1e-12) + f64::MIN_POSITIVE {
            return Ok(false);
        }
        a = q * a + h * h * c2 * e;
        qk *= q;
    }
    Ok(true)
}

/// `d_TV ≤ √(KL/2)`.
pub fn pinsker_tv_bound(kl: f64) -> Result<f64> {
    if !(kl >= 0.0) {
        return Err(Error::param("KL must be nonnegative"));
    }
    Ok((kl / 2.0).sqrt())
}

/// `W₂ ≤ √(2KL/α)`.
pub fn talagrand_w2_bound(kl: f64, alpha: f64) -> Result<f64> {
    if !(kl >= 0.0) {
        return Err(Error::param("KL must be nonnegative"));
    }
    if !(alpha > 0.0) {
        return Err(Error::param("alpha must be positive"));
    }
    Ok((2.0 * kl / alpha).sqrt())
}
