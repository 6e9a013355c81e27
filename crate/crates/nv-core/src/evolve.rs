//! Time evolution of scattering data.
//!
//! The data moves by a pure phase: each sample picks up exp(i tau (k^3 +
//! conj(k)^3)). The exponent is real, so moduli are preserved and phases for
//! successive times compose additively.

use crate::scatter::ScatteringData;
use num_complex::Complex64;

/// exp(i tau (k^3 + conj(k)^3)) = exp(2 i tau Re k^3)
fn phase(k: Complex64, tau: f64) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * tau * (k * k * k).re)
}

/// Advance scattering data by `tau`. Masks and exceptional flags carry over;
/// the time tag accumulates.
pub fn evolve(sd: &ScatteringData, tau: f64) -> ScatteringData {
    let m = sd.kgrid.m();
    let mut t = sd.t.clone();
    for i in 0..m {
        for j in 0..m {
            if sd.mask[[i, j]] {
                t[[i, j]] *= phase(sd.kgrid.k(i, j), tau);
            }
        }
    }
    let ray_t = sd
        .ray_k
        .iter()
        .zip(&sd.ray_t)
        .map(|(&k, &tv)| tv * phase(k, tau))
        .collect();
    ScatteringData {
        kgrid: sd.kgrid.clone(),
        t,
        mask: sd.mask.clone(),
        exceptional: sd.exceptional.clone(),
        ray_k: sd.ray_k.clone(),
        ray_t,
        ray_exceptional: sd.ray_exceptional.clone(),
        tau: sd.tau + tau,
    }
}
