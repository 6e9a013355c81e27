//! Reassembly of the potential from scattering data.
//!
//! The moment fields a1, a2 are produced by per-point solves on a box of
//! twice the delivered half-width. The doubling serves two purposes: every
//! data frequency -2 conj(k) falls exactly on the frequency lattice of the
//! assembly grid, and the radial window that restores periodicity before
//! differentiation can roll off entirely outside the delivered core, which
//! sits in the plateau where windowed and true derivatives agree.

use crate::dbar::{DbarContext, DbarOptions};
use crate::error::{Error, Result};
use crate::evolve::evolve;
use crate::fft::Fft2;
use crate::field::{Field, Grid};
use crate::scatter::ScatteringData;
use crate::spectral::{
    apply_multiplier, deriv_multiplier, u_multiplier, DerivKind, RadialWindow,
};
use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;

/// start of the window roll-off, as a fraction of the doubled half-width
pub const WINDOW_PLATEAU_FRAC: f64 = 0.72;
/// end of the roll-off; the window vanishes outside this radius
pub const WINDOW_END_FRAC: f64 = 0.92;

#[derive(Debug, Clone, Copy)]
pub struct ReconstructOptions {
    pub dbar: DbarOptions,
    /// half-width of the delivered box
    pub half_width: f64,
    /// delivered core resolution; the assembly grid doubles it
    pub n_sub: usize,
    /// bound on the imaginary contamination of the recovered potential
    pub reality_tol: f64,
}

impl Default for ReconstructOptions {
    fn default() -> Self {
        ReconstructOptions {
            dbar: DbarOptions::default(),
            half_width: 4.0,
            n_sub: 64,
            reality_tol: 1e-3,
        }
    }
}

/// Moment fields and windowed potential on the doubled assembly grid.
pub struct Assembly {
    pub grid: Grid,
    pub window: RadialWindow,
    pub a1: Array2<Complex64>,
    pub a2: Array2<Complex64>,
    /// i dbar_w a1
    pub q: Array2<Complex64>,
    /// i d_w a1
    pub u: Array2<Complex64>,
    pub tau: f64,
    core: Grid,
}

impl Assembly {
    /// sup |Im q| / sup |q| over the assembly box
    pub fn reality_defect(&self) -> f64 {
        let sup = self.q.iter().map(|v| v.norm()).fold(0.0_f64, f64::max);
        if sup == 0.0 {
            return 0.0;
        }
        let sup_im = self.q.iter().map(|v| v.im.abs()).fold(0.0_f64, f64::max);
        sup_im / sup
    }

    fn crop(&self, values: &Array2<Complex64>) -> Field {
        let n = self.core.n();
        let off = n / 2;
        Field {
            grid: self.core,
            values: Array2::from_shape_fn((n, n), |(i, j)| values[[off + i, off + j]]),
        }
    }

    /// recovered potential on the delivered core grid
    pub fn q_core(&self) -> Field {
        self.crop(&self.q)
    }

    pub fn u_core(&self) -> Field {
        self.crop(&self.u)
    }
}

/// Solve the moment fields over the doubled box at absolute time `tau`.
pub fn assemble(sd: &ScatteringData, tau: f64, opts: &ReconstructOptions) -> Result<Assembly> {
    let core = Grid::new(opts.half_width, opts.n_sub)?;
    let grid = Grid::new(2.0 * opts.half_width, 2 * opts.n_sub)?;
    let moved = evolve(sd, tau - sd.tau);
    let n2 = grid.n();

    let rows: Vec<Result<Vec<(Complex64, Complex64)>>> = (0..n2)
        .into_par_iter()
        .map_init(
            || DbarContext::new(&moved, opts.dbar),
            |ctx, i| {
                (0..n2)
                    .map(|j| {
                        let r = ctx.solve(grid.point(i, j))?;
                        Ok((r.a1, r.a2))
                    })
                    .collect()
            },
        )
        .collect();

    let mut a1 = Array2::from_elem((n2, n2), Complex64::ZERO);
    let mut a2 = Array2::from_elem((n2, n2), Complex64::ZERO);
    for (i, row) in rows.into_iter().enumerate() {
        for (j, (v1, v2)) in row?.into_iter().enumerate() {
            a1[[i, j]] = v1;
            a2[[i, j]] = v2;
        }
    }

    let window = RadialWindow::new(grid, WINDOW_PLATEAU_FRAC, WINDOW_END_FRAC);
    let mut fft = Fft2::new(n2);
    let i_unit = Complex64::new(0.0, 1.0);
    let mut q = window.derivative(&a1.view(), DerivKind::Dbar, &mut fft);
    q.mapv_inplace(|v| i_unit * v);
    let mut u = window.derivative(&a1.view(), DerivKind::D, &mut fft);
    u.mapv_inplace(|v| i_unit * v);

    Ok(Assembly {
        grid,
        window,
        a1,
        a2,
        q,
        u,
        tau,
        core,
    })
}

/// Potential and auxiliary field at time `tau`, cropped to the delivered box.
pub struct Reconstruction {
    pub q: Field,
    pub u: Field,
    pub reality_defect: f64,
    pub tau: f64,
}

pub fn reconstruct(
    sd: &ScatteringData,
    tau: f64,
    opts: &ReconstructOptions,
) -> Result<Reconstruction> {
    let asm = assemble(sd, tau, opts)?;
    let defect = asm.reality_defect();
    if defect > opts.reality_tol {
        return Err(Error::SymmetryViolation {
            defect,
            tol: opts.reality_tol,
        });
    }
    Ok(Reconstruction {
        q: asm.q_core(),
        u: asm.u_core(),
        reality_defect: defect,
        tau,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct IdentityDefects {
    pub d1: f64,
    pub d2: f64,
}

/// Consistency of the two moment fields: both sides of
/// i D a2 = D(-D a1 + (i/2) a1^2) for the two first derivatives, compared on
/// the window plateau and normalised by the right-hand side there.
pub fn identity_defects(asm: &Assembly) -> IdentityDefects {
    let n = asm.grid.n();
    let mut fft = Fft2::new(n);
    let w = &asm.window;
    let i_unit = Complex64::new(0.0, 1.0);

    let da1 = w.derivative(&asm.a1.view(), DerivKind::D, &mut fft);
    let g = Array2::from_shape_fn((n, n), |(i, j)| {
        let a = asm.a1[[i, j]];
        -da1[[i, j]] + 0.5 * i_unit * a * a
    });

    let sup_plateau = |f: &Array2<Complex64>| {
        let mut sup = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                if w.in_plateau(i, j) {
                    sup = sup.max(f[[i, j]].norm());
                }
            }
        }
        sup
    };
    let defect = |lhs: &Array2<Complex64>, rhs: &Array2<Complex64>| {
        let diff = Array2::from_shape_fn((n, n), |(i, j)| lhs[[i, j]] - rhs[[i, j]]);
        sup_plateau(&diff) / sup_plateau(rhs)
    };

    let mut lhs1 = w.derivative(&asm.a2.view(), DerivKind::Dbar, &mut fft);
    lhs1.mapv_inplace(|v| i_unit * v);
    let rhs1 = w.derivative(&g.view(), DerivKind::Dbar, &mut fft);
    let mut lhs2 = w.derivative(&asm.a2.view(), DerivKind::D, &mut fft);
    lhs2.mapv_inplace(|v| i_unit * v);
    let rhs2 = w.derivative(&g.view(), DerivKind::D, &mut fft);

    IdentityDefects {
        d1: defect(&lhs1, &rhs1),
        d2: defect(&lhs2, &rhs2),
    }
}

/// Defect between the windowed-derivative route to u and the multiplier
/// route applied to the real part of q, relative sup over the plateau.
pub fn u_cross_defect(asm: &Assembly) -> f64 {
    let n = asm.grid.n();
    let mut fft = Fft2::new(n);
    let q_re = asm.q.mapv(|v| Complex64::new(v.re, 0.0));
    let u2 = apply_multiplier(&q_re, &u_multiplier(asm.grid).view(), &mut fft);
    let mut num = 0.0_f64;
    let mut den = 0.0_f64;
    for i in 0..n {
        for j in 0..n {
            if asm.window.in_plateau(i, j) {
                num = num.max((asm.u[[i, j]] - u2[[i, j]]).norm());
                den = den.max(u2[[i, j]].norm());
            }
        }
    }
    num / den
}

#[derive(Debug, Clone, Copy)]
pub struct NvResidual {
    /// relative sup over the delivered core box
    pub core: f64,
    /// relative sup over the full assembly box
    pub global: f64,
    /// sup of the time derivative, the normalisation
    pub scale: f64,
}

/// Residual of the evolution equation at time `tau`: the time derivative is
/// a centered difference of reconstructions at tau +- dtau, the spatial
/// terms are plain spectral derivatives of the real part on the assembly
/// grid, where the windowed fields vanish at the frame.
pub fn nv_residual(
    sd: &ScatteringData,
    tau: f64,
    dtau: f64,
    opts: &ReconstructOptions,
) -> Result<NvResidual> {
    let plus = assemble(sd, tau + dtau, opts)?;
    let minus = assemble(sd, tau - dtau, opts)?;
    let center = assemble(sd, tau, opts)?;
    let grid = center.grid;
    let n = grid.n();
    let mut fft = Fft2::new(n);

    let q = center.q.mapv(|v| Complex64::new(v.re, 0.0));
    let dq = Array2::from_shape_fn((n, n), |(i, j)| {
        Complex64::new(
            (plus.q[[i, j]].re - minus.q[[i, j]].re) / (2.0 * dtau),
            0.0,
        )
    });
    let u = apply_multiplier(&q, &u_multiplier(grid).view(), &mut fft);

    let m_dbar = deriv_multiplier(grid, DerivKind::Dbar);
    let m_d = deriv_multiplier(grid, DerivKind::D);
    let m_dbar3 = deriv_multiplier(grid, DerivKind::Dbar3);
    let m_d3 = deriv_multiplier(grid, DerivKind::D3);

    let t1 = apply_multiplier(&q, &m_dbar3.view(), &mut fft);
    let t2 = apply_multiplier(&q, &m_d3.view(), &mut fft);
    let uq_conj = Array2::from_shape_fn((n, n), |(i, j)| u[[i, j]].conj() * q[[i, j]]);
    let uq = Array2::from_shape_fn((n, n), |(i, j)| u[[i, j]] * q[[i, j]]);
    let t3 = apply_multiplier(&uq_conj, &m_dbar.view(), &mut fft);
    let t4 = apply_multiplier(&uq, &m_d.view(), &mut fft);

    let scale = dq.iter().map(|v| v.norm()).fold(0.0_f64, f64::max);
    let n_sub = n / 2;
    let off = n_sub / 2;
    let mut sup_core = 0.0_f64;
    let mut sup_global = 0.0_f64;
    for i in 0..n {
        for j in 0..n {
            let r = (dq[[i, j]]
                - (t1[[i, j]] + t2[[i, j]]
                    - 3.0 * (t3[[i, j]] + t4[[i, j]])))
            .norm();
            sup_global = sup_global.max(r);
            if i >= off && i < off + n_sub && j >= off && j < off + n_sub {
                sup_core = sup_core.max(r);
            }
        }
    }

    Ok(NvResidual {
        core: sup_core / scale,
        global: sup_global / scale,
        scale,
    })
}
