//! Station control loop: a phase-frequency detector driving a PI controller
//! and a voltage-controlled oscillator. The open-loop transfer function is
//! `G(ω) = (K_P + K_I/jω) · K_PFD · K_VCO / jω`.

use num_complex::Complex64;

/// Loop constants of one station.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PllParams {
    /// Proportional gain (dimensionless).
    pub k_p: f64,
    /// Integral gain (rad/s).
    pub k_i: f64,
    /// Phase-frequency detector gain (V/rad).
    pub k_pfd: f64,
    /// VCO tuning sensitivity (rad/(s·V)).
    pub k_vco: f64,
}

impl Default for PllParams {
    /// Reference loop constants used throughout the frequency-domain studies.
    fn default() -> Self {
        PllParams {
            k_p: 800.0,
            k_i: 2.5e5,
            k_pfd: 0.06,
            k_vco: 32.0,
        }
    }
}

impl PllParams {
    pub fn validate(&self) -> crate::error::Result<()> {
        if !(self.k_pfd > 0.0 && self.k_vco > 0.0) {
            return Err(crate::Error::InvalidArgument(format!(
                "k_pfd and k_vco must be > 0 (got {}, {})",
                self.k_pfd, self.k_vco
            )));
        }
        if self.k_p < 0.0 || self.k_i < 0.0 || (self.k_p == 0.0 && self.k_i == 0.0) {
            return Err(crate::Error::InvalidArgument(
                "k_p, k_i must be >= 0 and not both zero".into(),
            ));
        }
        Ok(())
    }

    /// Open-loop gain G(ω) at angular frequency `omega` > 0 (rad/s).
    pub fn open_loop_gain(&self, omega: f64) -> Complex64 {
        assert!(omega > 0.0, "open_loop_gain has a pole at omega = 0");
        let jw = Complex64::new(0.0, omega);
        (self.k_p + self.k_i / jw) * self.k_pfd * self.k_vco / jw
    }

    /// Gain-shape-preserving rescale: multiplies `k_p` by `factor` and `k_i`
    /// by `factor²`, which moves the unity-gain frequency and the PI corner
    /// down together by `factor`.
    pub fn scaled(&self, factor: f64) -> PllParams {
        assert!(factor > 0.0);
        PllParams {
            k_p: self.k_p * factor,
            k_i: self.k_i * factor * factor,
            ..*self
        }
    }

    /// Rescales the gains so the loop stays comfortably inside the servo
    /// bandwidth bound set by the longest round-trip delay `max_delay` (s).
    ///
    /// A station loop sees its own correction come back after the adjacent
    /// round trips, so its unity-gain frequency must sit well below
    /// 1/(4·round-trip). The high-frequency crossover of the two-path loop
    /// is ω_u ≈ 2·k_p·k_pfd·k_vco; this targets ω_u ≤ 0.2/max_delay and
    /// never scales the gains up.
    pub fn delay_safe(&self, max_delay: f64) -> PllParams {
        assert!(max_delay >= 0.0);
        if max_delay == 0.0 || self.k_p == 0.0 {
            return *self;
        }
        let omega_u = 2.0 * self.k_p * self.k_pfd * self.k_vco;
        let target = 0.2 / max_delay;
        if omega_u <= target {
            *self
        } else {
            self.scaled(target / omega_u)
        }
    }

    /// Phase margin (degrees) of the two-round-trip loop
    /// `L(ω) = G(ω)·(e^{−j2ωτ₀} + e^{−j2ωτ₁})`, found at the unity-gain
    /// frequency by bisection. Negative margin means an unstable loop.
    pub fn phase_margin_deg(&self, tau0: f64, tau1: f64) -> f64 {
        // |L| is not monotone through the delay-comb nulls, but its envelope
        // 2|G| is; bracket the first crossing of the envelope.
        let mut lo: f64 = 1e-6;
        let mut hi: f64 = 1e9;
        for _ in 0..200 {
            let mid = (lo * hi).sqrt();
            if 2.0 * self.open_loop_gain(mid).norm() > 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let w_u = (lo * hi).sqrt();
        // Unwrapped phase: arg G is in (-180°, -90°]; the delay pair
        // e^{-j2ωτ₀}+e^{-j2ωτ₁} = 2cos(ω(τ₀-τ₁))·e^{-jω(τ₀+τ₁)} contributes
        // a linear (unbounded) lag plus a possible sign flip.
        let mut phase = self.open_loop_gain(w_u).arg() - w_u * (tau0 + tau1);
        if (w_u * (tau0 - tau1)).cos() < 0.0 {
            phase -= std::f64::consts::PI;
        }
        180.0 + phase.to_degrees()
    }
}
