//! Restarted GMRES over real or complex vectors.
//!
//! The dbar problem is only real-linear (it conjugates its argument), so it
//! is solved in stacked real/imaginary form with the f64 instantiation; the
//! CGO problem is complex-linear and uses the Complex64 one.

use num_complex::Complex64;

pub trait Scalar:
    Copy
    + PartialEq
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<Output = Self>
    + std::ops::Div<Output = Self>
    + std::ops::Neg<Output = Self>
    + std::ops::AddAssign
    + std::ops::SubAssign
{
    const ZERO: Self;
    const ONE: Self;
    fn conj(self) -> Self;
    fn abs(self) -> f64;
    fn from_f64(x: f64) -> Self;
    fn is_finite_scalar(self) -> bool;
}

impl Scalar for f64 {
    const ZERO: Self = 0.0;
    const ONE: Self = 1.0;
    fn conj(self) -> Self {
        self
    }
    fn abs(self) -> f64 {
        f64::abs(self)
    }
    fn from_f64(x: f64) -> Self {
        x
    }
    fn is_finite_scalar(self) -> bool {
        self.is_finite()
    }
}

impl Scalar for Complex64 {
    const ZERO: Self = Complex64::new(0.0, 0.0);
    const ONE: Self = Complex64::new(1.0, 0.0);
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
    fn abs(self) -> f64 {
        self.norm()
    }
    fn from_f64(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn is_finite_scalar(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

fn dot<S: Scalar>(u: &[S], v: &[S]) -> S {
    let mut acc = S::ZERO;
    for (a, b) in u.iter().zip(v) {
        acc += a.conj() * *b;
    }
    acc
}

fn norm<S: Scalar>(v: &[S]) -> f64 {
    v.iter().map(|a| a.abs() * a.abs()).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Copy)]
pub struct GmresOutcome {
    pub iterations: usize,
    /// Final residual relative to |b|.
    pub residual: f64,
    pub converged: bool,
}

/// Solve A x = b with restarted GMRES (modified Gram-Schmidt Arnoldi, Givens
/// least squares). `x` holds the initial guess on entry and the solution on
/// exit; tolerance is relative to |b|.
pub fn gmres<S: Scalar>(
    mut apply: impl FnMut(&[S], &mut [S]),
    b: &[S],
    x: &mut [S],
    tol: f64,
    max_iter: usize,
    restart: usize,
) -> GmresOutcome {
    let n = b.len();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        x.fill(S::ZERO);
        return GmresOutcome {
            iterations: 0,
            residual: 0.0,
            converged: true,
        };
    }
    let mut work = vec![S::ZERO; n];
    let mut total_iters = 0usize;
    let mut resid;

    while total_iters < max_iter {
        // r = b - A x
        apply(x, &mut work);
        let mut r: Vec<S> = b.iter().zip(&work).map(|(bi, wi)| *bi - *wi).collect();
        let rnorm = norm(&r);
        resid = rnorm / bnorm;
        if resid <= tol {
            return GmresOutcome {
                iterations: total_iters,
                residual: resid,
                converged: true,
            };
        }
        let inv = S::from_f64(1.0 / rnorm);
        for v in &mut r {
            *v = *v * inv;
        }
        let cycle = restart.min(max_iter - total_iters);
        let mut basis: Vec<Vec<S>> = vec![r];
        let mut h = vec![vec![S::ZERO; cycle]; cycle + 1];
        let mut cs = vec![S::ZERO; cycle];
        let mut sn = vec![S::ZERO; cycle];
        let mut g = vec![S::ZERO; cycle + 1];
        g[0] = S::from_f64(rnorm);
        let mut filled = 0usize;

        for i in 0..cycle {
            apply(&basis[i], &mut work);
            let mut w = work.clone();
            for j in 0..=i {
                let hij = dot(&basis[j], &w);
                h[j][i] = hij;
                for (wv, bv) in w.iter_mut().zip(&basis[j]) {
                    *wv -= hij * *bv;
                }
            }
            let wnorm = norm(&w);
            h[i + 1][i] = S::from_f64(wnorm);
            // apply accumulated rotations to the new column
            for j in 0..i {
                let t = cs[j].conj() * h[j][i] + sn[j].conj() * h[j + 1][i];
                h[j + 1][i] = -sn[j] * h[j][i] + cs[j] * h[j + 1][i];
                h[j][i] = t;
            }
            // new rotation zeroing h[i+1][i]
            let (c, s) = {
                let h0 = h[i][i];
                let h1 = h[i + 1][i];
                let t = (h0.abs() * h0.abs() + h1.abs() * h1.abs()).sqrt();
                if t == 0.0 {
                    (S::ONE, S::ZERO)
                } else if h0.abs() == 0.0 {
                    (S::ZERO, S::ONE)
                } else {
                    let phase = h0 * S::from_f64(1.0 / h0.abs());
                    (
                        S::from_f64(h0.abs() / t),
                        phase.conj() * h1 * S::from_f64(1.0 / t),
                    )
                }
            };
            cs[i] = c;
            sn[i] = s;
            let t = c.conj() * h[i][i] + s.conj() * h[i + 1][i];
            h[i][i] = t;
            h[i + 1][i] = S::ZERO;
            let gt = c.conj() * g[i] + s.conj() * g[i + 1];
            g[i + 1] = -s * g[i] + c * g[i + 1];
            g[i] = gt;

            filled = i + 1;
            total_iters += 1;
            resid = g[i + 1].abs() / bnorm;
            if resid <= tol || wnorm == 0.0 || total_iters >= max_iter {
                break;
            }
            let invw = S::from_f64(1.0 / wnorm);
            for wv in &mut w {
                *wv = *wv * invw;
            }
            basis.push(w);
        }

        // back substitution for the y minimizing |g - H y|
        let mut y = vec![S::ZERO; filled];
        for i in (0..filled).rev() {
            let mut acc = g[i];
            for j in (i + 1)..filled {
                acc -= h[i][j] * y[j];
            }
            y[i] = acc / h[i][i];
        }
        for (i, yi) in y.iter().enumerate() {
            for (xv, bv) in x.iter_mut().zip(&basis[i]) {
                *xv += *yi * *bv;
            }
        }
        if resid <= tol {
            return GmresOutcome {
                iterations: total_iters,
                residual: resid,
                converged: true,
            };
        }
    }
    // recompute the true residual for the report
    apply(x, &mut work);
    let rnorm = {
        let mut acc = 0.0;
        for (bi, wi) in b.iter().zip(&work) {
            let d = *bi - *wi;
            acc += d.abs() * d.abs();
        }
        acc.sqrt()
    };
    GmresOutcome {
        iterations: total_iters,
        residual: rnorm / bnorm,
        converged: rnorm / bnorm <= tol,
    }
}
