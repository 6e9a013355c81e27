//! Test potentials: the conductivity-type (critical) family and its signed
//! compact perturbations, which move the potential into the subcritical
//! (positive bump) or supercritical (negative bump) class.

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::Fft2;
use crate::field::{Field, Grid};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PotentialFamily {
    /// q = (dbar d sqrt(sigma)) / sqrt(sigma) with sigma = 1 + beta * bump.
    Conductivity,
    /// Conductivity potential plus eps times the same bump profile.
    Perturbed,
}

#[derive(Debug, Clone, Copy)]
pub struct PotentialSpec {
    pub family: PotentialFamily,
    pub beta: f64,
    pub center: Complex64,
    pub radius: f64,
    pub eps: f64,
}

impl Default for PotentialSpec {
    fn default() -> Self {
        PotentialSpec {
            family: PotentialFamily::Conductivity,
            beta: 0.5,
            center: Complex64::ZERO,
            radius: 1.0,
            eps: 0.0,
        }
    }
}

/// Gaussian-capped bump: exp(-(r/R)^2 / (1 - (r/2R)^2)) for r < 2R, else 0.
/// Behaves like exp(-(r/R)^2) near the center and is C-infinity with compact
/// support of radius 2R.
pub fn bump_profile(r: f64, radius: f64) -> f64 {
    let s = (r / (2.0 * radius)).powi(2);
    if s < 1.0 {
        (-(r / radius).powi(2) / (1.0 - s)).exp()
    } else {
        0.0
    }
}

/// The bump of `spec` sampled over `grid` (unit amplitude).
pub fn bump_field(grid: Grid, spec: &PotentialSpec) -> Field {
    Field::from_fn(grid, |x| {
        Complex64::new(bump_profile((x - spec.center).norm(), spec.radius), 0.0)
    })
}

fn check_support(grid: Grid, spec: &PotentialSpec) -> Result<()> {
    let reach = spec.center.norm() + 2.0 * spec.radius;
    if reach > grid.half_width() / 2.0 + 1e-12 {
        return Err(Error::config(format!(
            "potential support radius {reach:.3} exceeds L/2 = {:.3}; \
             enlarge the domain or shrink the bump",
            grid.half_width() / 2.0
        )));
    }
    Ok(())
}

/// Conductivity sigma = 1 + beta * bump for the spec; errors if sigma is not
/// strictly positive.
pub fn conductivity_sigma(grid: Grid, spec: &PotentialSpec) -> Result<Array2<f64>> {
    check_support(grid, spec)?;
    let b = bump_field(grid, spec);
    let sigma = b.values.mapv(|v| 1.0 + spec.beta * v.re);
    if sigma.iter().any(|&s| s <= 0.0) {
        return Err(Error::config(format!(
            "conductivity is not positive (beta = {})",
            spec.beta
        )));
    }
    Ok(sigma)
}

/// The critical potential q = (dbar d sqrt(sigma)) / sqrt(sigma), real by
/// construction, compactly supported with sigma.
pub fn conductivity_potential(grid: Grid, spec: &PotentialSpec) -> Result<Field> {
    let sigma = conductivity_sigma(grid, spec)?;
    let psi = sigma.mapv(|s| Complex64::new(s.sqrt(), 0.0));
    // dbar d has the multiplier -(|zeta|^2)/4
    let mut lap = psi.clone();
    let mut fft = Fft2::new(grid.n());
    let mult = Array2::from_shape_fn((grid.n(), grid.n()), |(i, j)| {
        Complex64::new(-0.25 * grid.zeta(i, j).norm_sqr(), 0.0)
    });
    crate::spectral::apply_multiplier_inplace(&mut lap, &mult.view(), &mut fft);
    let mut q = Field {
        grid,
        values: ndarray::Zip::from(&lap)
            .and(&psi)
            .map_collect(|l, p| l / p),
    };
    debug_assert!(q.sup_imag() < 1e-12 * q.sup().max(1.0));
    q.realify();
    Ok(q)
}

/// q + eps * bump; the bump must be nonnegative (its sign is carried by eps).
pub fn perturb(q: &Field, bump: &Field, eps: f64) -> Result<Field> {
    if bump.values.iter().any(|v| v.re < 0.0) {
        return Err(Error::config("perturbation bump must be nonnegative"));
    }
    assert_eq!(q.grid, bump.grid);
    Ok(Field {
        grid: q.grid,
        values: ndarray::Zip::from(&q.values)
            .and(&bump.values)
            .map_collect(|a, b| a + eps * b),
    })
}

/// Build the potential a spec describes (conductivity base, plus the eps
/// perturbation for the perturbed family).
pub fn build_potential(grid: Grid, spec: &PotentialSpec) -> Result<Field> {
    let base = conductivity_potential(grid, spec)?;
    match spec.family {
        PotentialFamily::Conductivity => Ok(base),
        PotentialFamily::Perturbed => perturb(&base, &bump_field(grid, spec), spec.eps),
    }
}

/// sqrt(sigma) as a field, for construction-identity checks.
pub fn sqrt_sigma(grid: Grid, spec: &PotentialSpec) -> Result<Field> {
    let sigma = conductivity_sigma(grid, spec)?;
    Ok(Field {
        grid,
        values: sigma.mapv(|s| Complex64::new(s.sqrt(), 0.0)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{spectral_derivative, DerivKind};

    #[test]
    fn zero_beta_gives_zero_potential() {
        let g = Grid::new(4.0, 128).unwrap();
        let spec = PotentialSpec {
            beta: 0.0,
            ..Default::default()
        };
        let q = conductivity_potential(g, &spec).unwrap();
        assert!(q.sup() < 1e-14);
    }

    #[test]
    fn construction_identity_holds_spectrally() {
        // (-dbar d + q) sqrt(sigma) = 0 by construction
        let g = Grid::new(4.0, 128).unwrap();
        let spec = PotentialSpec::default();
        let q = conductivity_potential(g, &spec).unwrap();
        let psi = sqrt_sigma(g, &spec).unwrap();
        let lap = spectral_derivative(&spectral_derivative(&psi, DerivKind::D), DerivKind::Dbar);
        let mut resid = 0.0_f64;
        for i in 0..g.n() {
            for j in 0..g.n() {
                let r = -lap.values[[i, j]] + q.values[[i, j]] * psi.values[[i, j]];
                resid = resid.max(r.norm());
            }
        }
        assert!(resid <= 1e-8 * q.sup(), "residual {resid:.3e}");
    }

    #[test]
    fn weak_form_pairing_vanishes() {
        // <(-dbar d + q) sqrt(sigma), phi> = <sqrt(sigma), -dbar d phi> + <q sqrt(sigma), phi>
        let g = Grid::new(4.0, 128).unwrap();
        let spec = PotentialSpec::default();
        let q = conductivity_potential(g, &spec).unwrap();
        let psi = sqrt_sigma(g, &spec).unwrap();
        let phi = Field::from_fn(g, |x| Complex64::new((-(x - Complex64::new(0.3, -0.2)).norm_sqr()).exp(), 0.0));
        let lap_phi = spectral_derivative(&spectral_derivative(&phi, DerivKind::D), DerivKind::Dbar);
        let h2 = g.spacing() * g.spacing();
        let mut acc = Complex64::ZERO;
        for i in 0..g.n() {
            for j in 0..g.n() {
                acc += psi.values[[i, j]] * (-lap_phi.values[[i, j]])
                    + q.values[[i, j]] * psi.values[[i, j]] * phi.values[[i, j]];
            }
        }
        let pairing = (acc * h2).norm();
        assert!(pairing <= 1e-6, "pairing {pairing:.3e}");
    }

    #[test]
    fn perturb_adds_scaled_bump() {
        let g = Grid::new(4.0, 64).unwrap();
        let spec = PotentialSpec::default();
        let q = conductivity_potential(g, &spec).unwrap();
        let b = bump_field(g, &spec);
        let same = perturb(&q, &b, 0.0).unwrap();
        assert!(q.sup_diff(&same) == 0.0);
        let shifted = perturb(&q, &b, 0.25).unwrap();
        let mut expect = q.clone();
        expect
            .values
            .zip_mut_with(&b.values, |a, c| *a += 0.25 * c);
        assert!(shifted.sup_diff(&expect) < 1e-15);
    }

    #[test]
    fn negative_bump_rejected() {
        let g = Grid::new(4.0, 64).unwrap();
        let q = Field::zeros(g);
        let bad = Field::from_fn(g, |x| Complex64::new(-bump_profile(x.norm(), 1.0), 0.0));
        assert!(perturb(&q, &bad, 0.1).is_err());
    }

    #[test]
    fn nonpositive_sigma_rejected() {
        let g = Grid::new(4.0, 64).unwrap();
        let spec = PotentialSpec {
            beta: -1.0,
            ..Default::default()
        };
        assert!(conductivity_potential(g, &spec).is_err());
    }

    #[test]
    fn oversized_support_rejected() {
        let g = Grid::new(4.0, 64).unwrap();
        let spec = PotentialSpec {
            radius: 1.5,
            ..Default::default()
        };
        assert!(conductivity_potential(g, &spec).is_err());
    }

    #[test]
    fn bump_properties() {
        // compact support of radius 2R, gaussian-like core
        assert_eq!(bump_profile(2.0, 1.0), 0.0);
        assert_eq!(bump_profile(2.5, 1.0), 0.0);
        assert!((bump_profile(0.0, 1.0) - 1.0).abs() < 1e-15);
        assert!(bump_profile(0.1, 1.0) < 1.0);
        // near the center it tracks exp(-r^2/R^2)
        let r = 0.05;
        assert!((bump_profile(r, 1.0) - (-r * r).exp()).abs() < 1e-5);
    }
}
