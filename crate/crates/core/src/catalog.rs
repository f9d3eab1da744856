//! Name-addressable built-ins: `flat(m,d)`, `circle(r)`, `sphere(r,d)`,
//! `torus(R,r)` and the Hamiltonians `free`, `rotation`, `transport(c)`,
//! `abs`, `tangent_kinetic(M)`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::{catalog as manifolds, Submanifold};
use crate::hamiltonian::{catalog as hamiltonians, HamiltonianField};

pub const MANIFOLDS: &[(&str, &str)] = &[
    ("flat(m,d)", "R^m x {0} in R^d, infinite reach"),
    ("circle(r)", "circle of radius r in R^2, reach r"),
    ("sphere(r,d)", "sphere of radius r in R^d, reach r"),
    ("torus(R,r)", "torus of revolution in R^3, reach min(r, R - r)"),
];

pub const HAMILTONIANS: &[(&str, &str)] = &[
    ("free", "|p|^2 / 2"),
    ("rotation", "<p, J q> with J the quarter turn of the (q1, q2) plane"),
    ("transport(c)", "<c, p>"),
    ("abs", "|p|"),
    ("tangent_kinetic(M)", "|P_q p|^2 / 2 with P the tangent projector at the closest point of M"),
];

/// Splits `name(args)` into the name and its top-level comma-separated arguments.
pub fn split_call(spec: &str) -> Result<(&str, Vec<&str>)> {
    let spec = spec.trim();
    let Some(open) = spec.find('(') else {
        return Ok((spec, Vec::new()));
    };
    let inner = spec[open + 1..]
        .strip_suffix(')')
        .ok_or_else(|| Error::UnknownCatalogEntry(format!("unbalanced parentheses in `{spec}`")))?;
    let mut args = Vec::new();
    let (mut depth, mut start) = (0i32, 0);
    for (i, ch) in inner.char_indices() {
        match ch {
            '(' | '[' => depth += 1,
            ')' | ']' => depth -= 1,
            ',' if depth == 0 => {
                args.push(inner[start..i].trim());
                start = i + 1;
            }
            _ => {}
        }
    }
    if !inner.trim().is_empty() {
        args.push(inner[start..].trim());
    }
    Ok((spec[..open].trim(), args))
}

fn numbers(spec: &str, args: &[&str]) -> Result<Vec<f64>> {
    args.iter()
        .flat_map(|a| a.trim_matches(|c| c == '[' || c == ']').split(','))
        .map(|a| {
            a.trim().parse::<f64>().map_err(|_| Error::UnknownCatalogEntry(format!("bad number `{a}` in `{spec}`")))
        })
        .collect()
}

fn arity(spec: &str, values: &[f64], n: usize) -> Result<()> {
    if values.len() == n {
        Ok(())
    } else {
        Err(Error::UnknownCatalogEntry(format!("`{spec}` takes {n} argument(s), got {}", values.len())))
    }
}

fn as_count(spec: &str, x: f64) -> Result<usize> {
    if x >= 1.0 && x.fract() == 0.0 && x <= 16.0 {
        Ok(x as usize)
    } else {
        Err(Error::UnknownCatalogEntry(format!("`{spec}`: dimension {x} is not a small positive integer")))
    }
}

/// Builds a catalog manifold from its name.
pub fn manifold(spec: &str) -> Result<Submanifold> {
    let (name, args) = split_call(spec)?;
    let v = numbers(spec, &args)?;
    match name {
        "flat" => {
            arity(spec, &v, 2)?;
            manifolds::flat(as_count(spec, v[0])?, as_count(spec, v[1])?)
        }
        "circle" => {
            arity(spec, &v, 1)?;
            manifolds::circle(v[0])
        }
        "sphere" => {
            arity(spec, &v, 2)?;
            manifolds::sphere(v[0], as_count(spec, v[1])?)
        }
        "torus" => {
            arity(spec, &v, 2)?;
            manifolds::torus(v[0], v[1])
        }
        _ => Err(Error::UnknownCatalogEntry(format!("no manifold named `{spec}`"))),
    }
}

/// Builds a catalog Hamiltonian on `R^dim`. `tangent_kinetic` without an
/// argument uses `context`.
pub fn hamiltonian(spec: &str, dim: usize, context: Option<Arc<Submanifold>>) -> Result<HamiltonianField> {
    let (name, args) = split_call(spec)?;
    let h = match name {
        "free" if args.is_empty() => hamiltonians::free(dim),
        "rotation" if args.is_empty() => hamiltonians::rotation(dim)?,
        "abs" if args.is_empty() => hamiltonians::abs(dim),
        "transport" => {
            let c = numbers(spec, &args)?;
            arity(spec, &c, dim)?;
            hamiltonians::transport(c)
        }
        "tangent_kinetic" => {
            let m = match (args.as_slice(), context) {
                ([inner], _) => Arc::new(manifold(inner)?),
                ([], Some(m)) => m,
                _ => {
                    return Err(Error::UnknownCatalogEntry(format!("`{spec}` needs a manifold argument")));
                }
            };
            hamiltonians::tangent_kinetic(m)
        }
        _ => return Err(Error::UnknownCatalogEntry(format!("no Hamiltonian named `{spec}`"))),
    };
    if h.dim() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: h.dim() });
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_nested_calls() {
        assert_eq!(split_call("free").unwrap(), ("free", vec![]));
        assert_eq!(split_call("torus(2, 0.5)").unwrap(), ("torus", vec!["2", "0.5"]));
        assert_eq!(split_call("tangent_kinetic(circle(1))").unwrap(), ("tangent_kinetic", vec!["circle(1)"]));
        assert_eq!(split_call("transport([1,0])").unwrap(), ("transport", vec!["[1,0]"]));
        assert!(split_call("circle(1").is_err());
    }

    #[test]
    fn builds_catalog_entries() {
        let m = manifold("sphere(2,3)").unwrap();
        assert_eq!((m.dim(), m.ambient_dim(), m.theta()), (2, 3, 2.0));
        assert_eq!(manifold("flat(1, 2)").unwrap().theta(), f64::INFINITY);
        assert_eq!(manifold("torus(2,0.5)").unwrap().name(), "torus(2,0.5)");
        assert!(matches!(manifold("klein(1)"), Err(Error::UnknownCatalogEntry(_))));
        assert!(manifold("circle(1,2)").is_err());
        assert!(manifold("flat(1.5,2)").is_err());

        let t = hamiltonian("transport(1, 0)", 2, None).unwrap();
        assert_eq!(t.value(&[0.0, 0.0], &[3.0, 4.0]), 3.0);
        assert_eq!(hamiltonian("transport([0.5,2])", 2, None).unwrap().value(&[0.0, 0.0], &[2.0, 1.0]), 3.0);
        assert!(hamiltonian("transport(1)", 2, None).is_err());
        assert!(hamiltonian("rotation", 1, None).is_err());
        let tk = hamiltonian("tangent_kinetic(circle(1))", 2, None).unwrap();
        assert!((tk.value(&[1.5, 0.0], &[3.0, 4.0]) - 8.0).abs() < 1e-12);
        assert!(tk.value(&[2.0, 0.0], &[3.0, 4.0]).is_nan());
        assert!(hamiltonian("tangent_kinetic", 2, None).is_err());
        assert!(hamiltonian("tangent_kinetic", 2, Some(Arc::new(manifold("circle(1)").unwrap()))).is_ok());
        assert!(hamiltonian("magnetic", 2, None).is_err());
        for (name, _) in HAMILTONIANS {
            assert!(!name.is_empty());
        }
    }
}
