//! Spectral calculus: derivatives, multiplier application, zero-padded
//! convolutions, the solid Cauchy transform, and smooth analysis windows.
//!
//! Convention: fhat(xi) = integral e^{-i x.xi} f dm, so on the complexified
//! frequency zeta = xi1 + i xi2 the Wirtinger derivatives become the
//! multipliers d -> i conj(zeta)/2 and dbar -> i zeta/2.

use ndarray::{Array2, ArrayView2};
use num_complex::Complex64;

use crate::fft::Fft2;
use crate::field::{Field, Grid};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivKind {
    D,
    Dbar,
    D3,
    Dbar3,
}

/// Frequency-domain multiplier for one Wirtinger derivative (or its cube).
pub fn deriv_multiplier(grid: Grid, kind: DerivKind) -> Array2<Complex64> {
    let half_i = Complex64::new(0.0, 0.5);
    Array2::from_shape_fn((grid.n(), grid.n()), |(i, j)| {
        let zeta = grid.zeta(i, j);
        match kind {
            DerivKind::D => half_i * zeta.conj(),
            DerivKind::Dbar => half_i * zeta,
            DerivKind::D3 => (half_i * zeta.conj()).powu(3),
            DerivKind::Dbar3 => (half_i * zeta).powu(3),
        }
    })
}

/// In-place ifft(mult * fft(values)).
pub fn apply_multiplier_inplace(
    values: &mut Array2<Complex64>,
    mult: &ArrayView2<Complex64>,
    fft: &mut Fft2,
) {
    fft.forward(values);
    *values *= mult;
    fft.inverse(values);
}

pub fn apply_multiplier(
    values: &Array2<Complex64>,
    mult: &ArrayView2<Complex64>,
    fft: &mut Fft2,
) -> Array2<Complex64> {
    let mut out = values.clone();
    apply_multiplier_inplace(&mut out, mult, fft);
    out
}

/// Spectral Wirtinger derivative of a periodic-representable field.
pub fn spectral_derivative(f: &Field, kind: DerivKind) -> Field {
    let mut fft = Fft2::new(f.grid.n());
    let mult = deriv_multiplier(f.grid, kind);
    Field {
        grid: f.grid,
        values: apply_multiplier(&f.values, &mult.view(), &mut fft),
    }
}

/// Zero-padded convolution: a fixed frequency multiplier on the doubled grid
/// applied to an m x m input embedded in the top-left corner, result cropped
/// back to m x m. The stored multiplier is kept transposed so the two
/// transposes inside the padded transforms cancel out of the hot path.
pub struct Conv2 {
    m: usize,
    fft: Fft2,
    mult_t: Array2<Complex64>,
    buf: Array2<Complex64>,
}

impl Clone for Conv2 {
    fn clone(&self) -> Self {
        Conv2 {
            m: self.m,
            fft: self.fft.clone(),
            mult_t: self.mult_t.clone(),
            buf: Array2::zeros(self.buf.dim()),
        }
    }
}

impl Conv2 {
    /// `mult` lives on the doubled (2m x 2m) frequency lattice in natural
    /// layout; `scale` multiplies the result (quadrature cell area etc.).
    pub fn new(m: usize, mult: &Array2<Complex64>, scale: f64) -> Conv2 {
        let big = 2 * m;
        assert_eq!(mult.dim(), (big, big));
        let norm = scale / (big * big) as f64;
        let mult_t = Array2::from_shape_fn((big, big), |(i, j)| mult[[j, i]] * norm);
        Conv2 {
            m,
            fft: Fft2::new(big),
            mult_t,
            buf: Array2::zeros((big, big)),
        }
    }

    pub fn input_size(&self) -> usize {
        self.m
    }

    pub fn apply(&mut self, src: &ArrayView2<Complex64>, dst: &mut Array2<Complex64>) {
        let m = self.m;
        assert_eq!(src.dim(), (m, m));
        self.buf.fill(Complex64::ZERO);
        self.buf.slice_mut(ndarray::s![..m, ..m]).assign(src);
        self.fft.forward_padded_t(&mut self.buf, m);
        self.buf *= &self.mult_t;
        self.fft.inverse_cropped_t(&mut self.buf, m);
        dst.assign(&self.buf.slice(ndarray::s![..m, ..m]));
    }

    pub fn apply_alloc(&mut self, src: &ArrayView2<Complex64>) -> Array2<Complex64> {
        let mut out = Array2::zeros((self.m, self.m));
        self.apply(src, &mut out);
        out
    }
}

/// Combined multiplier for the solid Cauchy transform on a size-`m`,
/// spacing-`d` lattice: FFT of the sampled kernel 1/(pi z) on the doubled
/// lattice (zero at the origin cell) plus the self-cell gradient correction
/// -(1/pi) d, all scaled by the cell area d^2.
pub fn cauchy_conv(m: usize, d: f64) -> Conv2 {
    let big = 2 * m;
    let mut kernel: Array2<Complex64> = Array2::from_shape_fn((big, big), |(i, j)| {
        let si = if i < m { i as f64 } else { i as f64 - big as f64 };
        let sj = if j < m { j as f64 } else { j as f64 - big as f64 };
        let z = Complex64::new(si * d, sj * d);
        if z == Complex64::ZERO {
            Complex64::ZERO
        } else {
            1.0 / (std::f64::consts::PI * z)
        }
    });
    let mut fft = Fft2::new(big);
    fft.forward(&mut kernel);
    // frequency lattice of the doubled box: spacing pi/(m d)
    let fstep = std::f64::consts::PI / (m as f64 * d);
    for i in 0..big {
        let fi = if i < m { i as f64 } else { i as f64 - big as f64 } * fstep;
        for j in 0..big {
            let fj = if j < m { j as f64 } else { j as f64 - big as f64 } * fstep;
            let zeta = Complex64::new(fi, fj);
            let dmult = Complex64::new(0.0, 0.5) * zeta.conj();
            kernel[[i, j]] -= dmult / std::f64::consts::PI;
        }
    }
    Conv2::new(m, &kernel, d * d)
}

/// Solid Cauchy transform of a field (convolution with 1/(pi z)); the right
/// inverse of dbar on functions decaying inside the box.
pub fn cauchy_transform(f: &Field) -> Field {
    let mut conv = cauchy_conv(f.grid.n(), f.grid.spacing());
    Field {
        grid: f.grid,
        values: conv.apply_alloc(&f.values.view()),
    }
}

/// Multiplier conj(zeta)/zeta with the zero mode set to 0; inverts dbar
/// against d so that u = apply(q) solves dbar u = d q.
pub fn u_multiplier(grid: Grid) -> Array2<Complex64> {
    Array2::from_shape_fn((grid.n(), grid.n()), |(i, j)| {
        let zeta = grid.zeta(i, j);
        if zeta == Complex64::ZERO {
            Complex64::ZERO
        } else {
            zeta.conj() / zeta
        }
    })
}

/// Smooth radial cutoff: identically 1 for r <= r0, identically 0 for
/// r >= r1, a C-infinity ramp between. Used to restore periodicity before
/// spectral differentiation of fields with slowly decaying tails; the
/// product rule D(W f) - f DW recovers W Df exactly, so derivatives are
/// untouched wherever W = 1.
pub struct RadialWindow {
    pub grid: Grid,
    pub w: Array2<f64>,
    dw: Array2<Complex64>,
    dbarw: Array2<Complex64>,
    mult_d: Array2<Complex64>,
    mult_dbar: Array2<Complex64>,
    plateau_radius: f64,
}

fn ramp_down(t: f64) -> f64 {
    if t <= 0.0 {
        1.0
    } else if t >= 1.0 {
        0.0
    } else {
        let e0 = (-1.0 / (1.0 - t)).exp();
        let e1 = (-1.0 / t).exp();
        e0 / (e0 + e1)
    }
}

impl RadialWindow {
    pub fn new(grid: Grid, r0_frac: f64, r1_frac: f64) -> RadialWindow {
        let l = grid.half_width();
        let (r0, r1) = (r0_frac * l, r1_frac * l);
        let w = Array2::from_shape_fn((grid.n(), grid.n()), |(i, j)| {
            let r = grid.point(i, j).norm();
            ramp_down((r - r0) / (r1 - r0))
        });
        let mut fft = Fft2::new(grid.n());
        let mult_d = deriv_multiplier(grid, DerivKind::D);
        let mult_dbar = deriv_multiplier(grid, DerivKind::Dbar);
        let wc = w.mapv(|v| Complex64::new(v, 0.0));
        let dw = apply_multiplier(&wc, &mult_d.view(), &mut fft);
        let dbarw = apply_multiplier(&wc, &mult_dbar.view(), &mut fft);
        RadialWindow {
            grid,
            w,
            dw,
            dbarw,
            mult_d,
            mult_dbar,
            plateau_radius: r0,
        }
    }

    pub fn plateau_radius(&self) -> f64 {
        self.plateau_radius
    }

    pub fn in_plateau(&self, i: usize, j: usize) -> bool {
        self.grid.point(i, j).norm() <= self.plateau_radius
    }

    /// Windowed derivative D(W f) - f (D W); equals W Df for periodic-smooth
    /// f and stays accurate for fields whose tails break periodicity.
    pub fn derivative(
        &self,
        f: &ArrayView2<Complex64>,
        kind: DerivKind,
        fft: &mut Fft2,
    ) -> Array2<Complex64> {
        let (mult, dwin) = match kind {
            DerivKind::D => (&self.mult_d, &self.dw),
            DerivKind::Dbar => (&self.mult_dbar, &self.dbarw),
            _ => panic!("windowed derivative supports first derivatives only"),
        };
        let mut wf = Array2::from_shape_fn(f.dim(), |(i, j)| f[[i, j]] * self.w[[i, j]]);
        apply_multiplier_inplace(&mut wf, &mult.view(), fft);
        ndarray::Zip::from(&mut wf)
            .and(f)
            .and(dwin)
            .for_each(|out, &fv, &dv| *out -= fv * dv);
        wf
    }
}

/// Spectral resampling of a periodic field to a new grid size over the same
/// box (zero-pad or crop the spectrum).
pub fn resample(f: &Field, n_new: usize) -> Field {
    let n = f.grid.n();
    let grid_new = Grid::new(f.grid.half_width(), n_new).expect("valid resample target");
    if n_new == n {
        return f.clone();
    }
    let mut spec = f.values.clone();
    let mut fft = Fft2::new(n);
    fft.forward(&mut spec);
    let keep = n.min(n_new) / 2;
    let mut out: Array2<Complex64> = Array2::zeros((n_new, n_new));
    for bi in 0..2 {
        for bj in 0..2 {
            for i in 0..keep {
                for j in 0..keep {
                    let (si, sj) = (
                        if bi == 0 { i } else { n - keep + i },
                        if bj == 0 { j } else { n - keep + j },
                    );
                    let (di, dj) = (
                        if bi == 0 { i } else { n_new - keep + i },
                        if bj == 0 { j } else { n_new - keep + j },
                    );
                    out[[di, dj]] = spec[[si, sj]];
                }
            }
        }
    }
    let mut fft_new = Fft2::new(n_new);
    fft_new.inverse(&mut out);
    let scale = (n_new * n_new) as f64 / (n * n) as f64;
    out.mapv_inplace(|v| v * scale);
    Field {
        grid: grid_new,
        values: out,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Field;

    fn smooth_bump(r: f64, r0: f64, r1: f64) -> f64 {
        ramp_down((r - r0) / (r1 - r0))
    }

    #[test]
    fn derivative_of_constant_is_zero() {
        let g = Grid::new(4.0, 64).unwrap();
        let f = Field::from_fn(g, |_| Complex64::new(2.5, -1.0));
        for kind in [DerivKind::D, DerivKind::Dbar, DerivKind::D3, DerivKind::Dbar3] {
            assert!(spectral_derivative(&f, kind).sup() < 1e-12);
        }
    }

    #[test]
    fn dbar_of_conjugate_coordinate_bump() {
        // f = conj(x) * cutoff; dbar f = 1 on the cutoff interior
        let g = Grid::new(4.0, 256).unwrap();
        let f = Field::from_fn(g, |x| {
            x.conj() * smooth_bump(x.norm(), 1.0, 2.8)
        });
        let df = spectral_derivative(&f, DerivKind::Dbar);
        let mut err = 0.0_f64;
        for i in 0..g.n() {
            for j in 0..g.n() {
                if g.point(i, j).norm() <= 1.0 {
                    err = err.max((df.values[[i, j]] - Complex64::new(1.0, 0.0)).norm());
                }
            }
        }
        assert!(err < 1e-6, "interior error {err:.3e}");
    }

    #[test]
    fn dbar_of_gaussian_closed_form() {
        // dbar exp(-|x|^2) = -x exp(-|x|^2)
        let g = Grid::new(4.0, 256).unwrap();
        let f = Field::from_fn(g, |x| Complex64::new((-x.norm_sqr()).exp(), 0.0));
        let df = spectral_derivative(&f, DerivKind::Dbar);
        let exact = Field::from_fn(g, |x| -x * (-x.norm_sqr()).exp());
        // limited by the e^{-16} periodization tail of the gaussian, not the FFT
        assert!(df.sup_diff(&exact) < 1e-6);
    }

    #[test]
    fn cube_matches_triple_application() {
        let g = Grid::new(4.0, 64).unwrap();
        let f = Field::from_fn(g, |x| Complex64::new((-x.norm_sqr()).exp(), 0.1) * x);
        let d3 = spectral_derivative(&f, DerivKind::D3);
        let ddd = spectral_derivative(
            &spectral_derivative(&spectral_derivative(&f, DerivKind::D), DerivKind::D),
            DerivKind::D,
        );
        let scale = ddd.sup();
        assert!(d3.sup_diff(&ddd) <= 1e-10 * scale.max(1.0));
    }

    #[test]
    fn cauchy_of_zero_is_zero() {
        let g = Grid::new(4.0, 64).unwrap();
        let p = cauchy_transform(&Field::zeros(g));
        assert_eq!(p.sup(), 0.0);
    }

    #[test]
    fn cauchy_of_radial_profile_matches_quadrature() {
        // for radial f the transform is (2/z) * integral_0^|z| f(r) r dr;
        // profile: mollified unit-disk indicator
        let g = Grid::new(4.0, 256).unwrap();
        let prof = |r: f64| smooth_bump(r, 0.8, 1.0);
        let f = Field::from_fn(g, |x| Complex64::new(prof(x.norm()), 0.0));
        let p = cauchy_transform(&f);
        let radial_int = |rho: f64| {
            // Simpson on [0, rho]
            let steps = 400;
            let h = rho / steps as f64;
            let mut acc = 0.0;
            for s in 0..steps {
                let a = s as f64 * h;
                let m = a + 0.5 * h;
                let b = a + h;
                acc += h / 6.0 * (prof(a) * a + 4.0 * prof(m) * m + prof(b) * b);
            }
            acc
        };
        let mut worst = 0.0_f64;
        for &(i, j) in &[
            (128usize, 140usize), // |z| ~ 0.75 (inside)
            (140, 128),
            (150, 150), // ring region
            (128, 170), // |z| ~ 2.6 (outside)
            (170, 170),
            (100, 128),
            (90, 150),
        ] {
            let z = g.point(i, j);
            let exact = 2.0 * radial_int(z.norm()) / z;
            worst = worst.max((p.values[[i, j]] - exact).norm() / exact.norm());
        }
        assert!(worst < 1e-2, "worst rel error {worst:.3e}");
    }

    #[test]
    fn cauchy_inverts_dbar_of_gaussian() {
        // f = dbar g with g gaussian: P f recovers g up to boundary tails
        let g = Grid::new(4.0, 256).unwrap();
        let gauss = Field::from_fn(g, |x| Complex64::new((-2.0 * x.norm_sqr()).exp(), 0.0));
        let f = spectral_derivative(&gauss, DerivKind::Dbar);
        let p = cauchy_transform(&f);
        assert!(p.sup_diff(&gauss) < 1e-6);
    }

    #[test]
    fn dbar_cauchy_identity_on_random_smooth_fields() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let g = Grid::new(4.0, 256).unwrap();
        let win = RadialWindow::new(g, 0.55, 0.92);
        let mut fft = Fft2::new(g.n());
        for _ in 0..20 {
            let mut f = Field::zeros(g);
            for _ in 0..8 {
                let c = Complex64::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                );
                let w: f64 = rng.random_range(0.3..0.8);
                let a = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                for i in 0..g.n() {
                    for j in 0..g.n() {
                        let x = g.point(i, j);
                        f.values[[i, j]] += a * (-(x - c).norm_sqr() / (w * w)).exp();
                    }
                }
            }
            let p = cauchy_transform(&f);
            // P f decays like c/z, not periodically: differentiate windowed
            let back = win.derivative(&p.values.view(), DerivKind::Dbar, &mut fft);
            let mut err = 0.0_f64;
            for i in 0..g.n() {
                for j in 0..g.n() {
                    if win.in_plateau(i, j) {
                        err = err.max((back[[i, j]] - f.values[[i, j]]).norm());
                    }
                }
            }
            assert!(err <= 1e-4 * f.sup(), "identity defect {:.3e}", err / f.sup());
        }
    }

    #[test]
    fn u_multiplier_solves_constraint() {
        // u with dbar u = d q, checked spectrally
        let g = Grid::new(4.0, 128).unwrap();
        let q = Field::from_fn(g, |x| Complex64::new((-x.norm_sqr()).exp(), 0.0));
        let mut fft = Fft2::new(g.n());
        let u = Field {
            grid: g,
            values: apply_multiplier(&q.values, &u_multiplier(g).view(), &mut fft),
        };
        let lhs = spectral_derivative(&u, DerivKind::Dbar);
        let rhs = spectral_derivative(&q, DerivKind::D);
        assert!(lhs.sup_diff(&rhs) < 1e-12 * rhs.sup().max(1.0));
    }

    #[test]
    fn resample_preserves_bandlimited_fields() {
        let g = Grid::new(4.0, 64).unwrap();
        let f = Field::from_fn(g, |x| Complex64::new((2.0 * x.re).cos() * (x.im).sin(), 0.3));
        let up = resample(&f, 128);
        let back = resample(&up, 64);
        assert!(f.sup_diff(&back) < 1e-12);
        // upsampled field interpolates the original samples
        for i in 0..g.n() {
            for j in 0..g.n() {
                assert!((up.values[[2 * i, 2 * j]] - f.values[[i, j]]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn windowed_derivative_matches_plain_on_compact_fields() {
        let g = Grid::new(4.0, 128).unwrap();
        let win = RadialWindow::new(g, 0.55, 0.92);
        let mut fft = Fft2::new(g.n());
        let f = Field::from_fn(g, |x| x * Complex64::new((-2.0 * x.norm_sqr()).exp(), 0.0));
        let plain = spectral_derivative(&f, DerivKind::Dbar);
        let windowed = win.derivative(&f.values.view(), DerivKind::Dbar, &mut fft);
        let mut err = 0.0_f64;
        for i in 0..g.n() {
            for j in 0..g.n() {
                if win.in_plateau(i, j) {
                    err = err.max((windowed[[i, j]] - plain.values[[i, j]]).norm());
                }
            }
        }
        assert!(err < 2e-8, "plateau error {err:.3e}");
    }
}
