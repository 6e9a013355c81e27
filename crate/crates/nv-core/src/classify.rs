//! Criticality classification of a potential: the smallest eigenvalue of the
//! quadratic form of -dbar d + q decides supercritical vs not; the positive
//! solution of (I + G*(q .)) psi = 1 and its log-growth coefficient separate
//! critical from subcritical.

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::Fft2;
use crate::field::{Field, Grid};
use crate::gmres::{gmres, GmresOutcome};
use crate::spectral::{apply_multiplier_inplace, Conv2};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criticality {
    Critical,
    Subcritical,
    Supercritical,
    /// Form-level answer only: not supercritical, refinement pending.
    CriticalOrSubcritical,
    Indeterminate,
}

impl std::fmt::Display for Criticality {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Criticality::Critical => "critical",
            Criticality::Subcritical => "subcritical",
            Criticality::Supercritical => "supercritical",
            Criticality::CriticalOrSubcritical => "critical-or-subcritical",
            Criticality::Indeterminate => "indeterminate",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone)]
pub struct ClassificationReport {
    pub lambda_min: f64,
    pub class_guess: Criticality,
    pub a_est: Option<f64>,
    pub c_inf_est: Option<f64>,
    pub small_k_slope: Option<f64>,
    pub eigen_iterations: usize,
    pub eigen_residual: f64,
}

/// Absolute eigenvalue tolerance from the configured relative factor:
/// factor * sup|q| with a floor so q = 0 still classifies cleanly.
pub fn eigen_tolerance(q: &Field, factor: f64) -> f64 {
    (factor * q.sup()).max(1e-10)
}

struct FormOperator {
    n: usize,
    q: Array2<f64>,
    lap_mult: Array2<Complex64>,
    pre_mult: Array2<Complex64>,
    fft: Fft2,
    buf: Array2<Complex64>,
}

impl FormOperator {
    fn new(q: &Field) -> FormOperator {
        let grid = q.grid;
        let n = grid.n();
        let lap_mult = Array2::from_shape_fn((n, n), |(i, j)| {
            Complex64::new(0.25 * grid.zeta(i, j).norm_sqr(), 0.0)
        });
        let pre_mult = lap_mult.mapv(|v| Complex64::new(1.0 / (v.re + 1.0), 0.0));
        FormOperator {
            n,
            q: q.values.mapv(|v| v.re),
            lap_mult,
            pre_mult,
            fft: Fft2::new(n),
            buf: Array2::zeros((n, n)),
        }
    }

    /// (quarter-Laplacian + q) acting on a real vector.
    fn apply(&mut self, v: &[f64], out: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            for j in 0..n {
                self.buf[[i, j]] = Complex64::new(v[i * n + j], 0.0);
            }
        }
        apply_multiplier_inplace(&mut self.buf, &self.lap_mult.view(), &mut self.fft);
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = self.buf[[i, j]].re + self.q[[i, j]] * v[i * n + j];
            }
        }
    }

    /// Fourier preconditioner (quarter-Laplacian + 1)^-1.
    fn precondition(&mut self, v: &[f64], out: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            for j in 0..n {
                self.buf[[i, j]] = Complex64::new(v[i * n + j], 0.0);
            }
        }
        apply_multiplier_inplace(&mut self.buf, &self.pre_mult.view(), &mut self.fft);
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = self.buf[[i, j]].re;
            }
        }
    }
}

fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Jacobi eigenvalue sweep for a symmetric matrix of size <= 3; returns the
/// smallest eigenvalue and its eigenvector.
fn smallest_eig_small(mut s: [[f64; 3]; 3], size: usize) -> (f64, [f64; 3]) {
    let mut v = [[0.0; 3]; 3];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _ in 0..50 {
        let mut off = 0.0;
        for p in 0..size {
            for q in (p + 1)..size {
                off += s[p][q].abs();
            }
        }
        if off < 1e-15 {
            break;
        }
        for p in 0..size {
            for q in (p + 1)..size {
                if s[p][q].abs() < 1e-18 {
                    continue;
                }
                let theta = 0.5 * (s[q][q] - s[p][p]) / s[p][q];
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..size {
                    let (skp, skq) = (s[k][p], s[k][q]);
                    s[k][p] = c * skp - sn * skq;
                    s[k][q] = sn * skp + c * skq;
                }
                for k in 0..size {
                    let (spk, sqk) = (s[p][k], s[q][k]);
                    s[p][k] = c * spk - sn * sqk;
                    s[q][k] = sn * spk + c * sqk;
                }
                for k in 0..3 {
                    let (vkp, vkq) = (v[k][p], v[k][q]);
                    v[k][p] = c * vkp - sn * vkq;
                    v[k][q] = sn * vkp + c * vkq;
                }
            }
        }
    }
    let mut best = 0;
    for i in 1..size {
        if s[i][i] < s[best][best] {
            best = i;
        }
    }
    (
        s[best][best],
        [v[0][best], v[1][best], v[2][best]],
    )
}

#[derive(Debug, Clone, Copy)]
pub struct EigenOutcome {
    pub lambda: f64,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

/// Smallest eigenvalue of -dbar d + q on the periodic box by locally optimal
/// preconditioned conjugate gradients (single vector, Rayleigh-Ritz over
/// {x, preconditioned residual, previous direction}).
pub fn smallest_eigenvalue(q: &Field, tol_abs: f64, max_iter: usize) -> EigenOutcome {
    let mut op = FormOperator::new(q);
    let n2 = q.grid.n() * q.grid.n();

    // deterministic start: constant vector plus a fixed low-frequency ripple
    // (the constant alone is an eigenvector of the laplacian part)
    let mut x: Vec<f64> = (0..n2)
        .map(|i| 1.0 + 0.01 * ((i as f64 * 0.7).sin() + (i as f64 * 0.013).cos()))
        .collect();
    let s = 1.0 / norm(&x);
    x.iter_mut().for_each(|v| *v *= s);
    let mut ax = vec![0.0; n2];
    op.apply(&x, &mut ax);
    let mut lambda = dot(&x, &ax);
    let mut p: Option<(Vec<f64>, Vec<f64>)> = None; // (p, A p)
    let mut w = vec![0.0; n2];
    let mut aw = vec![0.0; n2];
    let mut resid = f64::INFINITY;

    for it in 0..max_iter {
        // r = A x - lambda x
        let mut r: Vec<f64> = ax.iter().zip(&x).map(|(a, b)| a - lambda * b).collect();
        resid = norm(&r);
        if resid <= tol_abs {
            return EigenOutcome {
                lambda,
                iterations: it,
                residual: resid,
                converged: true,
            };
        }
        op.precondition(&r.clone(), &mut r);
        w.copy_from_slice(&r);
        // orthonormalize w against x
        let c = dot(&x, &w);
        for (wv, xv) in w.iter_mut().zip(&x) {
            *wv -= c * xv;
        }
        let wn = norm(&w);
        if wn < 1e-14 {
            return EigenOutcome {
                lambda,
                iterations: it,
                residual: resid,
                converged: resid <= tol_abs,
            };
        }
        w.iter_mut().for_each(|v| *v /= wn);
        op.apply(&w, &mut aw);

        // optional third basis vector from the previous step
        let mut basis_p: Option<(Vec<f64>, Vec<f64>)> = None;
        if let Some((pv, apv)) = &p {
            let mut pb = pv.clone();
            let mut apb = apv.clone();
            let cx = dot(&x, &pb);
            let cw = dot(&w, &pb);
            for i in 0..n2 {
                pb[i] -= cx * x[i] + cw * w[i];
                apb[i] -= cx * ax[i] + cw * aw[i];
            }
            let pn = norm(&pb);
            if pn > 1e-10 {
                pb.iter_mut().for_each(|v| *v /= pn);
                apb.iter_mut().for_each(|v| *v /= pn);
                basis_p = Some((pb, apb));
            }
        }

        let size = if basis_p.is_some() { 3 } else { 2 };
        let (pb, apb) = basis_p.unwrap_or((vec![], vec![]));
        let vs: [&[f64]; 3] = [&x, &w, &pb];
        let avs: [&[f64]; 3] = [&ax, &aw, &apb];
        let mut s_mat = [[0.0; 3]; 3];
        for i in 0..size {
            for j in i..size {
                let v = dot(vs[i], avs[j]);
                s_mat[i][j] = v;
                s_mat[j][i] = v;
            }
        }
        let (theta, coef) = smallest_eig_small(s_mat, size);

        let mut xn = vec![0.0; n2];
        let mut axn = vec![0.0; n2];
        let mut pn_new = vec![0.0; n2];
        let mut apn_new = vec![0.0; n2];
        for i in 0..n2 {
            let mut xv = coef[0] * x[i] + coef[1] * w[i];
            let mut axv = coef[0] * ax[i] + coef[1] * aw[i];
            let mut pv = coef[1] * w[i];
            let mut apv = coef[1] * aw[i];
            if size == 3 {
                xv += coef[2] * pb[i];
                axv += coef[2] * apb[i];
                pv += coef[2] * pb[i];
                apv += coef[2] * apb[i];
            }
            xn[i] = xv;
            axn[i] = axv;
            pn_new[i] = pv;
            apn_new[i] = apv;
        }
        let xnn = norm(&xn);
        xn.iter_mut().for_each(|v| *v /= xnn);
        axn.iter_mut().for_each(|v| *v /= xnn);
        x = xn;
        ax = axn;
        lambda = theta;
        let pnn = norm(&pn_new);
        if pnn > 1e-14 {
            pn_new.iter_mut().for_each(|v| *v /= pnn);
            apn_new.iter_mut().for_each(|v| *v /= pnn);
            p = Some((pn_new, apn_new));
        } else {
            p = None;
        }
    }
    EigenOutcome {
        lambda,
        iterations: max_iter,
        residual: resid,
        converged: false,
    }
}

/// Form-level classification: supercritical iff lambda_min < -tol_eig.
pub fn classify_by_form(q: &Field, tol_eig: f64) -> ClassificationReport {
    let out = smallest_eigenvalue(q, 1e-9, 1500);
    let class_guess = if !out.converged {
        Criticality::Indeterminate
    } else if out.lambda < -tol_eig {
        Criticality::Supercritical
    } else {
        Criticality::CriticalOrSubcritical
    };
    ClassificationReport {
        lambda_min: out.lambda,
        class_guess,
        a_est: None,
        c_inf_est: None,
        small_k_slope: None,
        eigen_iterations: out.iterations,
        eigen_residual: out.residual,
    }
}

/// Green's function convolution for -dbar d: kernel -(2/pi) log|z| on the
/// zero-padded doubled grid. The singular cell gets its exact cell average
/// -(2/pi)(log h + c0) with c0 = pi/4 - 3/2 - (log 2)/2.
pub fn log_kernel_conv(grid: Grid) -> Conv2 {
    let n = grid.n();
    let h = grid.spacing();
    let big = 2 * n;
    let c0 = std::f64::consts::FRAC_PI_4 - 1.5 - 0.5 * std::f64::consts::LN_2;
    let mut kernel: Array2<Complex64> = Array2::from_shape_fn((big, big), |(i, j)| {
        let si = if i < n { i as f64 } else { i as f64 - big as f64 };
        let sj = if j < n { j as f64 } else { j as f64 - big as f64 };
        let r = (si * si + sj * sj).sqrt() * h;
        let v = if r == 0.0 {
            -(2.0 / std::f64::consts::PI) * (h.ln() + c0)
        } else {
            -(2.0 / std::f64::consts::PI) * r.ln()
        };
        Complex64::new(v, 0.0)
    });
    let mut fft = Fft2::new(big);
    fft.forward(&mut kernel);
    Conv2::new(n, &kernel, h * h)
}

#[derive(Debug, Clone)]
pub struct PositiveSolution {
    pub psi: Field,
    pub a_est: f64,
    pub c_inf_est: f64,
    pub solve: GmresOutcome,
}

/// Solve psi + G*(q psi) = 1 and extract the log-growth coefficient from the
/// annulus L/2 <= |x| <= 3L/4 and the disk average over |x| < 3L/4.
pub fn positive_solution(q: &Field) -> Result<PositiveSolution> {
    let grid = q.grid;
    let n = grid.n();
    let mut conv = log_kernel_conv(grid);
    let qv = q.values.mapv(|v| v.re);
    let n2 = n * n;
    let mut cbuf: Array2<Complex64> = Array2::zeros((n, n));
    let mut cres: Array2<Complex64> = Array2::zeros((n, n));

    let b = vec![1.0f64; n2];
    let mut psi_vec = vec![1.0f64; n2];
    let out = gmres(
        |v: &[f64], out: &mut [f64]| {
            for i in 0..n {
                for j in 0..n {
                    cbuf[[i, j]] = Complex64::new(qv[[i, j]] * v[i * n + j], 0.0);
                }
            }
            conv.apply(&cbuf.view(), &mut cres);
            for i in 0..n {
                for j in 0..n {
                    out[i * n + j] = v[i * n + j] + cres[[i, j]].re;
                }
            }
        },
        &b,
        &mut psi_vec,
        1e-10,
        300,
        30,
    );
    if !out.converged {
        return Err(Error::numerical(
            crate::error::Stage::Classify,
            format!("positive-solution solve stalled at residual {:.3e}", out.residual),
        ));
    }
    let psi = Field::from_values(
        grid,
        Array2::from_shape_fn((n, n), |(i, j)| Complex64::new(psi_vec[i * n + j], 0.0)),
    );

    // fit psi ~ a log|x| + c on the annulus, rejecting nonpositive values
    let l = grid.half_width();
    let (r_lo, r_hi) = (0.5 * l, 0.75 * l);
    let (mut s_ll, mut s_l, mut s_1, mut s_ly, mut s_y) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let mut count = 0usize;
    for i in 0..n {
        for j in 0..n {
            let r = grid.point(i, j).norm();
            if r >= r_lo && r <= r_hi {
                let y = psi.values[[i, j]].re;
                if y <= 0.0 {
                    return Err(Error::ClassificationConflict(format!(
                        "positive solution is nonpositive ({y:.3e}) at |x| = {r:.3}; \
                         potential is supercritical or the domain truncates it"
                    )));
                }
                let ll = r.ln();
                s_ll += ll * ll;
                s_l += ll;
                s_1 += 1.0;
                s_ly += ll * y;
                s_y += y;
                count += 1;
            }
        }
    }
    if count < 16 {
        return Err(Error::config("annulus for the log fit has too few samples"));
    }
    let det = s_ll * s_1 - s_l * s_l;
    let a_est = (s_ly * s_1 - s_l * s_y) / det;

    // disk average (1 / pi R^2) integral psi over |x| < R, R = 3L/4
    let rr = 0.75 * l;
    let h2 = grid.spacing() * grid.spacing();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            if grid.point(i, j).norm() < rr {
                acc += psi.values[[i, j]].re;
            }
        }
    }
    let c_inf_est = acc * h2 / (std::f64::consts::PI * rr * rr);

    Ok(PositiveSolution {
        psi,
        a_est,
        c_inf_est,
        solve: out,
    })
}

/// Threshold on the fitted log coefficient separating critical (a ~ 0) from
/// subcritical (a > 0) after the form test has excluded supercritical.
pub const LOG_COEF_THRESHOLD: f64 = 0.02;

/// Full classification: form eigenvalue, then positive-solution refinement
/// for the non-supercritical case.
pub fn classify(q: &Field, tol_eig_factor: f64) -> Result<ClassificationReport> {
    let tol = eigen_tolerance(q, tol_eig_factor);
    let mut report = classify_by_form(q, tol);
    if report.class_guess != Criticality::CriticalOrSubcritical {
        return Ok(report);
    }
    let pos = positive_solution(q)?;
    report.a_est = Some(pos.a_est);
    report.c_inf_est = Some(pos.c_inf_est);
    report.class_guess = if pos.a_est.abs() <= LOG_COEF_THRESHOLD {
        Criticality::Critical
    } else if pos.a_est > 0.0 {
        Criticality::Subcritical
    } else {
        Criticality::Indeterminate
    };
    Ok(report)
}
