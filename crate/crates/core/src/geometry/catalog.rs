//! Built-in submanifolds with known reach.

use std::f64::consts::PI;
use std::sync::Arc;

use super::chart::{Chart, LinearChart, PolarChart, SphericalChart, ToroidalChart};
use super::constraint::{FlatConstraint, SphereConstraint, TorusConstraint};
use super::Submanifold;
use crate::error::{Error, Result};
use crate::Vector;

/// `R^m x {0} ⊂ R^d`. Its reach is infinite.
pub fn flat(m: usize, d: usize) -> Result<Submanifold> {
    if m == 0 || m >= d {
        return Err(Error::InvalidArgument(format!("flat({m},{d}) needs 0 < m < d")));
    }
    let c = Arc::new(FlatConstraint { dim: m, ambient_dim: d });
    Ok(Submanifold::implicit(format!("flat({m},{d})"), c, f64::INFINITY)?.with_sampler(
        m,
        Arc::new(move |u: &[f64]| {
            let mut q = Vector::zeros(d);
            for (i, s) in u.iter().enumerate() {
                q[i] = 4.0 * s - 2.0;
            }
            q
        }),
    ))
}

/// Circle of radius `r` centred at the origin of `R^2`, given implicitly.
pub fn circle(r: f64) -> Result<Submanifold> {
    sphere(r, 2).map(|s| rename(s, format!("circle({r})")))
}

/// The same circle given by its polar chart.
pub fn circle_parametric(r: f64) -> Result<Submanifold> {
    check_radius(r)?;
    let chart: Arc<dyn Chart> = Arc::new(PolarChart { radius: r });
    Ok(Submanifold::parametric(format!("circle({r})"), vec![chart], r)?.with_sampler(
        1,
        Arc::new(move |u: &[f64]| {
            let (s, c) = (2.0 * PI * u[0]).sin_cos();
            Vector::from_vec(vec![r * c, r * s])
        }),
    ))
}

/// Sphere of radius `r` in `R^d`.
pub fn sphere(r: f64, d: usize) -> Result<Submanifold> {
    check_radius(r)?;
    if d < 2 {
        return Err(Error::InvalidArgument(format!("sphere needs d >= 2, got {d}")));
    }
    let c = Arc::new(SphereConstraint { radius: r, ambient_dim: d });
    let base = Submanifold::implicit(format!("sphere({r},{d})"), c, r)?;
    Ok(match d {
        2 => base.with_sampler(
            1,
            Arc::new(move |u: &[f64]| {
                let (s, c) = (2.0 * PI * u[0]).sin_cos();
                Vector::from_vec(vec![r * c, r * s])
            }),
        ),
        3 => base.with_sampler(
            2,
            Arc::new(move |u: &[f64]| {
                // equal-area parametrisation
                let z = 1.0 - 2.0 * u[0];
                let rho = (1.0 - z * z).max(0.0).sqrt();
                let (s, c) = (2.0 * PI * u[1]).sin_cos();
                Vector::from_vec(vec![r * rho * c, r * rho * s, r * z])
            }),
        ),
        _ => base.with_sampler(
            d,
            Arc::new(move |u: &[f64]| {
                let x = Vector::from_iterator(u.len(), u.iter().map(|s| 2.0 * s - 1.0));
                let n = x.norm();
                if n < 1e-3 {
                    Vector::from_element(u.len(), f64::NAN)
                } else {
                    x * (r / n)
                }
            }),
        ),
    })
}

/// Torus of revolution in `R^3` with centre-line radius `major` and tube radius `minor`.
pub fn torus(major: f64, minor: f64) -> Result<Submanifold> {
    check_radius(minor)?;
    if major <= minor {
        return Err(Error::InvalidArgument(format!("torus needs R > r, got R = {major}, r = {minor}")));
    }
    let c = Arc::new(TorusConstraint { major, minor });
    let reach = minor.min(major - minor);
    Ok(Submanifold::implicit(format!("torus({major},{minor})"), c, reach)?.with_sampler(
        2,
        Arc::new(move |u: &[f64]| {
            let (sa, ca) = (2.0 * PI * u[0]).sin_cos();
            let (sb, cb) = (2.0 * PI * u[1]).sin_cos();
            let ring = major + minor * cb;
            Vector::from_vec(vec![ring * ca, ring * sa, minor * sb])
        }),
    ))
}

/// The adapted chart that accompanies a catalog manifold.
pub fn default_chart(manifold: &Submanifold) -> Option<Arc<dyn Chart>> {
    let name = manifold.name();
    let args = parse_args(name)?;
    Some(match name.split('(').next()? {
        "flat" => Arc::new(LinearChart::identity(manifold.ambient_dim(), manifold.dim())),
        "circle" => Arc::new(PolarChart { radius: args[0] }),
        "sphere" if manifold.ambient_dim() == 2 => Arc::new(PolarChart { radius: args[0] }),
        "sphere" if manifold.ambient_dim() == 3 => Arc::new(SphericalChart { radius: args[0] }),
        "torus" => Arc::new(ToroidalChart { major: args[0], minor: args[1] }),
        _ => return None,
    })
}

fn parse_args(name: &str) -> Option<Vec<f64>> {
    let inner = name.split_once('(')?.1.strip_suffix(')')?;
    inner.split(',').map(|s| s.trim().parse().ok()).collect()
}

fn check_radius(r: f64) -> Result<()> {
    if r > 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("radius must be positive and finite, got {r}")))
    }
}

fn rename(mut s: Submanifold, name: String) -> Submanifold {
    s.name = name;
    s
}
