//! Direct pseudo-spectral integrator for the evolution equation, used to
//! cross-check the scattering route at short times, plus the closed-form
//! linear-part solution.

use crate::error::{Error, Result, Stage};
use crate::fft::Fft2;
use crate::field::{Field, Grid};
use crate::spectral::u_multiplier;
use ndarray::Array2;
use num_complex::Complex64;

/// reality is enforced each step; anything above this is instability
const IMAG_LIMIT: f64 = 1e-8;

struct Ops {
    grid: Grid,
    fft: Fft2,
    /// symbol of the linear part, -i (zeta^3 + conj(zeta)^3) / 8
    lin: Array2<Complex64>,
    dbar: Array2<Complex64>,
    d: Array2<Complex64>,
    uhat: Array2<Complex64>,
    /// 2/3-rule dealias mask, per axis
    keep: Array2<f64>,
}

impl Ops {
    fn new(grid: Grid) -> Ops {
        let n = grid.n();
        let mut lin = Array2::from_elem((n, n), Complex64::ZERO);
        let mut dbar = lin.clone();
        let mut d = lin.clone();
        for i in 0..n {
            for j in 0..n {
                let z = grid.zeta(i, j);
                let zb = z.conj();
                lin[[i, j]] = Complex64::new(0.0, -0.125) * (z * z * z + zb * zb * zb);
                dbar[[i, j]] = Complex64::new(0.0, 0.5) * z;
                d[[i, j]] = Complex64::new(0.0, 0.5) * zb;
            }
        }
        let cut = n as f64 / 3.0;
        let idx = |i: usize| -> f64 {
            if i < n / 2 {
                i as f64
            } else {
                i as f64 - n as f64
            }
        };
        let keep = Array2::from_shape_fn((n, n), |(i, j)| {
            if idx(i).abs() <= cut && idx(j).abs() <= cut {
                1.0
            } else {
                0.0
            }
        });
        Ops {
            grid,
            fft: Fft2::new(n),
            lin,
            dbar,
            d,
            uhat: u_multiplier(grid),
            keep,
        }
    }

    /// -3 dbar(conj(u) q) - 3 d(u q), evaluated pseudo-spectrally on the
    /// dealiased modes of the spectrum `qh`.
    fn nonlinear(&mut self, qh: &Array2<Complex64>) -> Array2<Complex64> {
        let n = self.grid.n();
        let mut q = Array2::from_shape_fn((n, n), |(i, j)| qh[[i, j]] * self.keep[[i, j]]);
        let mut u = Array2::from_shape_fn((n, n), |(i, j)| q[[i, j]] * self.uhat[[i, j]]);
        self.fft.inverse(&mut q);
        self.fft.inverse(&mut u);
        let mut p1 = Array2::from_shape_fn((n, n), |(i, j)| u[[i, j]].conj() * q[[i, j]]);
        let mut p2 = Array2::from_shape_fn((n, n), |(i, j)| u[[i, j]] * q[[i, j]]);
        self.fft.forward(&mut p1);
        self.fft.forward(&mut p2);
        Array2::from_shape_fn((n, n), |(i, j)| {
            let k = self.keep[[i, j]];
            -3.0 * (self.dbar[[i, j]] * p1[[i, j]] + self.d[[i, j]] * p2[[i, j]]) * k
        })
    }
}

#[derive(Debug)]
pub struct OracleRun {
    /// real solution at the final time
    pub q: Field,
    /// largest imaginary contamination seen before any re-realification
    pub max_imag: f64,
    pub steps: usize,
}

/// Step count from the dispersion-limited step rule dt <= 4 (h/pi)^3.
pub fn default_steps(grid: Grid, tau: f64) -> usize {
    let dt_max = 4.0 * (grid.spacing() / std::f64::consts::PI).powi(3);
    ((tau.abs() / dt_max).ceil() as usize).max(1)
}

/// Integrating-factor RK4 for the full evolution: exact propagation of the
/// cubic-dispersion part in Fourier space, pseudo-spectral nonlinear terms,
/// re-realification each step.
pub fn step_nv(q0: &Field, tau: f64, steps: usize) -> Result<OracleRun> {
    if steps == 0 {
        return Err(Error::config("the integrator needs at least one step"));
    }
    let grid = q0.grid;
    let n = grid.n();
    let mut ops = Ops::new(grid);
    let dt = tau / steps as f64;
    let e = ops.lin.mapv(|l| (l * (dt / 2.0)).exp());
    let e2 = e.mapv(|v| v * v);

    let mut qh = q0.values.clone();
    ops.fft.forward(&mut qh);
    // the centered grid's Nyquist lines have no conjugate partner; drop them
    for j in 0..n {
        qh[[n / 2, j]] = Complex64::ZERO;
        qh[[j, n / 2]] = Complex64::ZERO;
    }

    let mut max_imag = 0.0_f64;
    for step in 0..steps {
        let k1 = ops.nonlinear(&qh);
        let s2 = Array2::from_shape_fn((n, n), |(i, j)| {
            e[[i, j]] * (qh[[i, j]] + 0.5 * dt * k1[[i, j]])
        });
        let k2 = ops.nonlinear(&s2);
        let s3 = Array2::from_shape_fn((n, n), |(i, j)| {
            e[[i, j]] * qh[[i, j]] + 0.5 * dt * k2[[i, j]]
        });
        let k3 = ops.nonlinear(&s3);
        let s4 = Array2::from_shape_fn((n, n), |(i, j)| {
            e2[[i, j]] * qh[[i, j]] + dt * e[[i, j]] * k3[[i, j]]
        });
        let k4 = ops.nonlinear(&s4);
        for i in 0..n {
            for j in 0..n {
                qh[[i, j]] = e2[[i, j]] * qh[[i, j]]
                    + (dt / 6.0)
                        * (e2[[i, j]] * k1[[i, j]]
                            + 2.0 * e[[i, j]] * (k2[[i, j]] + k3[[i, j]])
                            + k4[[i, j]]);
            }
        }
        let mut q = qh.clone();
        ops.fft.inverse(&mut q);
        let mut step_imag = 0.0_f64;
        let mut finite = true;
        for v in q.iter() {
            step_imag = step_imag.max(v.im.abs());
            finite &= v.re.is_finite() && v.im.is_finite();
        }
        if !finite {
            return Err(Error::numerical(
                Stage::Verify,
                format!("integrator produced non-finite values at step {}/{}", step + 1, steps),
            ));
        }
        if step_imag > IMAG_LIMIT {
            return Err(Error::numerical(
                Stage::Verify,
                format!(
                    "integrator lost reality at step {}/{}: max imaginary part {:.2e}",
                    step + 1,
                    steps,
                    step_imag
                ),
            ));
        }
        max_imag = max_imag.max(step_imag);
        qh = q.mapv(|v| Complex64::new(v.re, 0.0));
        ops.fft.forward(&mut qh);
    }

    let mut q = qh;
    ops.fft.inverse(&mut q);
    let values = q.mapv(|v| Complex64::new(v.re, 0.0));
    Ok(OracleRun {
        q: Field { grid, values },
        max_imag,
        steps,
    })
}

/// Exact solution with the nonlinear terms dropped:
/// multiply the spectrum by exp(-i tau (zeta^3 + conj(zeta)^3) / 8).
pub fn linear_solution(q0: &Field, tau: f64) -> Field {
    let grid = q0.grid;
    let n = grid.n();
    let mut fft = Fft2::new(n);
    let mut qh = q0.values.clone();
    fft.forward(&mut qh);
    for i in 0..n {
        for j in 0..n {
            let z = grid.zeta(i, j);
            let zb = z.conj();
            let phase = Complex64::new(0.0, -0.125 * tau) * (z * z * z + zb * zb * zb);
            qh[[i, j]] *= phase.exp();
        }
    }
    fft.inverse(&mut qh);
    Field { grid, values: qh }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cgo::CgoParams;
    use crate::evolve::evolve;
    use crate::potentials::{build_potential, PotentialSpec};
    use crate::scatter::{scattering_transform, KGrid};

    fn gaussian(grid: Grid, amp: f64, width: f64) -> Field {
        let values = Array2::from_shape_fn((grid.n(), grid.n()), |(i, j)| {
            let r = grid.point(i, j).norm();
            Complex64::new(amp * (-(r / width).powi(2)).exp(), 0.0)
        });
        Field { grid, values }
    }

    #[test]
    fn zero_state_stays_zero() {
        let grid = Grid::new(4.0, 16).unwrap();
        let zero = Field {
            grid,
            values: Array2::from_elem((16, 16), Complex64::ZERO),
        };
        let run = step_nv(&zero, 0.05, 5).unwrap();
        assert_eq!(run.max_imag, 0.0);
        for v in run.q.values.iter() {
            assert_eq!(*v, Complex64::ZERO);
        }
    }

    #[test]
    fn linear_solution_identity_and_isometry() {
        let grid = Grid::new(4.0, 64).unwrap();
        let q0 = gaussian(grid, 0.8, 0.9);
        let same = linear_solution(&q0, 0.0);
        let mut worst = 0.0_f64;
        for (a, b) in same.values.iter().zip(q0.values.iter()) {
            worst = worst.max((a - b).norm());
        }
        assert!(worst <= 1e-12);

        let moved = linear_solution(&q0, 0.07);
        let l2 = |f: &Field| -> f64 {
            f.values.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
        };
        assert!((l2(&moved) - l2(&q0)).abs() <= 1e-12 * l2(&q0));
    }

    #[test]
    fn small_amplitude_follows_linear_solution() {
        let grid = Grid::new(4.0, 64).unwrap();
        let q0 = gaussian(grid, 1e-3, 0.8);
        let tau = 0.05;
        let steps = default_steps(grid, tau);
        let run = step_nv(&q0, tau, steps).unwrap();
        let lin = linear_solution(&q0, tau);
        let mut dev = 0.0_f64;
        for (a, b) in run.q.values.iter().zip(lin.values.iter()) {
            dev = dev.max((a.re - b.re).abs());
        }
        assert!(dev / 1e-3 <= SMALL_AMP_BOUND, "dev {:.3e}", dev / 1e-3);
    }

    #[test]
    fn full_amplitude_invariants() {
        let grid = Grid::new(4.0, 64).unwrap();
        let q0 = build_potential(grid, &PotentialSpec::default()).unwrap();
        let tau = 0.05;
        let run = step_nv(&q0, tau, default_steps(grid, tau)).unwrap();

        let mean0: Complex64 = q0.values.iter().sum();
        let mean1: Complex64 = run.q.values.iter().sum();
        assert!((mean1 - mean0).norm() <= 1e-8 * mean0.norm());
        assert!(run.max_imag <= IMAG_LIMIT);

        // the flow does move the state
        let mut moved = 0.0_f64;
        let mut sup = 0.0_f64;
        for (a, b) in run.q.values.iter().zip(q0.values.iter()) {
            moved = moved.max((a - b).norm());
            sup = sup.max(b.norm());
        }
        assert!(moved > 0.1 * sup);
    }

    #[test]
    fn step_halving_shows_high_order() {
        let grid = Grid::new(4.0, 64).unwrap();
        let q0 = build_potential(grid, &PotentialSpec::default()).unwrap();
        let tau = 0.05;
        let qa = step_nv(&q0, tau, 100).unwrap().q;
        let qb = step_nv(&q0, tau, 200).unwrap().q;
        let qc = step_nv(&q0, tau, 400).unwrap().q;
        let diff = |a: &Field, b: &Field| -> f64 {
            a.values
                .iter()
                .zip(b.values.iter())
                .map(|(x, y)| (x - y).norm())
                .fold(0.0_f64, f64::max)
        };
        let d1 = diff(&qb, &qa);
        let d2 = diff(&qc, &qb);
        assert!(d2 <= 0.1 * d1, "d1 {d1:.3e} d2 {d2:.3e}");
    }

    #[test]
    fn blowup_is_reported() {
        let grid = Grid::new(4.0, 16).unwrap();
        let q0 = gaussian(grid, 1e3, 1.0);
        let err = step_nv(&q0, 1.0, 3).unwrap_err();
        assert!(matches!(err, Error::Numerical { .. }));
    }

    /// Phase-law self-test: the scattering transform of the linearly evolved
    /// weak field matches the evolved scattering transform of the initial
    /// field at the paired frequency.
    #[test]
    fn born_level_phase_consistency() {
        let grid = Grid::new(4.0, 64).unwrap();
        let q0 = gaussian(grid, 1e-3, 0.8);
        let tau = 0.05;
        let kgrid = KGrid::snapped(4.0, 16, 3.0, None).unwrap();
        let params = CgoParams::default();
        let direct = scattering_transform(&linear_solution(&q0, tau), &kgrid, &params).unwrap();
        let moved = evolve(&scattering_transform(&q0, &kgrid, &params).unwrap(), tau);
        let scale = moved.max_abs_t();
        let m = kgrid.m();
        let mut worst = 0.0_f64;
        for i in 0..m {
            for j in 0..m {
                if moved.mask[[i, j]] && direct.mask[[i, j]] {
                    worst = worst.max((moved.t[[i, j]] - direct.t[[i, j]]).norm());
                }
            }
        }
        assert!(worst / scale <= 5e-2, "phase-law defect {:.3e}", worst / scale);
    }

    const SMALL_AMP_BOUND: f64 = 2.0e-4;
}
