//! Complex geometrical optics solutions: mu(., k) with (I - S_k(q .)) mu = 1,
//! where S_k is the Faddeev Green's operator applied as a frequency multiplier
//! on the zero-padded doubled box.

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result, Stage};
use crate::field::{Field, Grid};
use crate::gmres::gmres;
use crate::spectral::Conv2;

/// Faddeev symbol -4 / (zeta (conj(zeta) + 2k)) on the doubled-box frequency
/// lattice, with both singular cells replaced by exact cell averages: the
/// zero cell integrates the symbol over its cell in closed form (disk part)
/// plus midpoint quadrature (corner remainder), and the cell at -2 conj(k),
/// when it is a lattice point, is the conjugate of the zero cell.
pub fn faddeev_multiplier(grid: Grid, k: Complex64) -> Result<Array2<Complex64>> {
    let dg = grid.doubled();
    let big = dg.n();
    let dxi = std::f64::consts::PI / grid.half_width() / 2.0;
    let mut mult = Array2::from_shape_fn((big, big), |(i, j)| {
        let zeta = dg.zeta(i, j);
        let denom = zeta * (zeta.conj() + 2.0 * k);
        if denom == Complex64::ZERO {
            Complex64::ZERO
        } else {
            -4.0 / denom
        }
    });

    let a = dxi / 2.0;
    let area = (2.0 * a) * (2.0 * a);
    // integral over the centered disk |zeta| < a: closed form, zero unless
    // the inner singularity at -2 conj(k) falls outside radius 2|k| >= a
    let ising = if 2.0 * k.norm() < a {
        -8.0 * std::f64::consts::PI * (a / (2.0 * k.norm())).ln()
    } else {
        0.0
    };
    let g = 64usize;
    let mut icorner = Complex64::ZERO;
    let cell_h = 2.0 * a / g as f64;
    for i in 0..g {
        let t1 = (i as f64 + 0.5) * cell_h - a;
        for j in 0..g {
            let t2 = (j as f64 + 0.5) * cell_h - a;
            let zz = Complex64::new(t1, t2);
            if zz.norm() > a {
                icorner += -4.0 / (zz * (zz.conj() + 2.0 * k));
            }
        }
    }
    icorner *= cell_h * cell_h;
    mult[[0, 0]] = (ising + icorner) / area;

    let zs = -2.0 * k.conj();
    let i1 = zs.re / dxi;
    let i2 = zs.im / dxi;
    if (i1 - i1.round()).abs() < 1e-9 && (i2 - i2.round()).abs() < 1e-9 {
        let wrap = |v: f64| (((v.round() as i64) % big as i64 + big as i64) % big as i64) as usize;
        let (j1, j2) = (wrap(i1), wrap(i2));
        if (j1, j2) != (0, 0) {
            mult[[j1, j2]] = mult[[0, 0]].conj();
        }
    }
    if mult.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::numerical(
            Stage::Forward,
            format!("faddeev multiplier not finite at k = {k}"),
        ));
    }
    Ok(mult)
}

#[derive(Debug, Clone, Copy)]
pub struct CgoParams {
    pub tol: f64,
    pub max_iter: usize,
    /// sup|mu| above which (or on non-convergence) the point is flagged as
    /// (numerically) exceptional.
    pub blowup_threshold: f64,
}

impl Default for CgoParams {
    fn default() -> Self {
        CgoParams {
            tol: 1e-8,
            max_iter: 300,
            blowup_threshold: 1e6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CgoResult {
    pub k: Complex64,
    pub mu: Field,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub exceptional: bool,
}

/// Solve (I - S_k(q .)) mu = 1 by GMRES on mu - 1. Non-convergence or a
/// blown-up solution is reported through the `exceptional` flag rather than
/// an error so that k-grid sweeps can record and continue.
pub fn solve_cgo(q: &Field, k: Complex64, params: &CgoParams) -> Result<CgoResult> {
    let grid = q.grid;
    let n = grid.n();
    let mult = faddeev_multiplier(grid, k)?;
    let mut conv = Conv2::new(n, &mult, 1.0);
    let n2 = n * n;

    let mut src: Array2<Complex64> = Array2::zeros((n, n));
    let mut dst: Array2<Complex64> = Array2::zeros((n, n));

    // rhs = S_k(q * 1)
    for i in 0..n {
        for j in 0..n {
            src[[i, j]] = q.values[[i, j]];
        }
    }
    conv.apply(&src.view(), &mut dst);
    let b: Vec<Complex64> = dst.iter().copied().collect();

    let mut sol = vec![Complex64::ZERO; n2];
    let out = gmres(
        |v: &[Complex64], out: &mut [Complex64]| {
            for i in 0..n {
                for j in 0..n {
                    src[[i, j]] = q.values[[i, j]] * v[i * n + j];
                }
            }
            conv.apply(&src.view(), &mut dst);
            for (idx, o) in out.iter_mut().enumerate() {
                *o = v[idx] - dst.as_slice().unwrap()[idx];
            }
        },
        &b,
        &mut sol,
        params.tol,
        params.max_iter,
        30,
    );

    let mu = Field::from_values(
        grid,
        Array2::from_shape_fn((n, n), |(i, j)| Complex64::new(1.0, 0.0) + sol[i * n + j]),
    );
    if !mu.is_finite() {
        return Err(Error::numerical(
            Stage::Forward,
            format!("cgo solution not finite at k = {k}"),
        ));
    }
    let exceptional = !out.converged || mu.sup() > params.blowup_threshold;
    Ok(CgoResult {
        k,
        mu,
        residual: out.residual,
        iterations: out.iterations,
        converged: out.converged,
        exceptional,
    })
}

/// Scattering coefficient t(k) = h^2 sum e_k q mu.
pub fn scattering_coefficient(q: &Field, mu: &Field, k: Complex64) -> Complex64 {
    let grid = q.grid;
    let h2 = grid.spacing() * grid.spacing();
    let mut acc = Complex64::ZERO;
    for i in 0..grid.n() {
        for j in 0..grid.n() {
            let x = grid.point(i, j);
            let phase = Complex64::from_polar(1.0, 2.0 * (k * x).re);
            acc += phase * q.values[[i, j]] * mu.values[[i, j]];
        }
    }
    acc * h2
}
