//! Builtin model geometries addressed by strings of the form `name:key=value,…@NxNxN`.

use super::expr::Expr;
use super::structure::{admissible_coframe, Structure};
use crate::error::{CrError, Result};
use crate::fields::{Chart, CoordForm, Field};
use crate::jet::Jet;
use crate::sampling::halton;
use num_complex::Complex64 as C64;
use std::f64::consts::PI;
use std::sync::Arc;

/// Parsed geometry string.
#[derive(Clone, Debug, PartialEq)]
pub struct GeometrySpec {
    pub name: String,
    pub params: Vec<(String, String)>,
    pub dims: Option<Vec<usize>>,
}

impl GeometrySpec {
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        let (head, dims) = match s.rsplit_once('@') {
            Some((h, d)) => {
                let dims = d
                    .split('x')
                    .map(|v| v.trim().parse::<usize>().map_err(|_| CrError::Catalog(format!("bad dimensions {d:?}"))))
                    .collect::<Result<Vec<_>>>()?;
                (h, Some(dims))
            }
            None => (s, None),
        };
        let (name, rest) = head.split_once(':').unwrap_or((head, ""));
        let mut params = Vec::new();
        for kv in rest.split(',').filter(|p| !p.trim().is_empty()) {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| CrError::Catalog(format!("parameter {kv:?} is not key=value")))?;
            params.push((k.trim().to_string(), v.trim().to_string()));
        }
        if name.is_empty() {
            return Err(CrError::Catalog("empty geometry name".into()));
        }
        Ok(Self { name: name.trim().to_string(), params, dims })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.params.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn get_f64(&self, key: &str, default: f64) -> Result<f64> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| CrError::Catalog(format!("{key}={v} is not a number"))),
        }
    }

    pub fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        for (k, _) in &self.params {
            if !allowed.contains(&k.as_str()) {
                return Err(CrError::Catalog(format!("{} does not take parameter {k:?}", self.name)));
            }
        }
        Ok(())
    }
}

/// A contact form, a unitary base coframe and an initial deformation of it.
#[derive(Clone, Debug)]
pub struct Model {
    pub name: String,
    pub chart: Arc<Chart>,
    pub theta: CoordForm,
    pub theta1: CoordForm,
    pub beta: Field,
}

impl Model {
    pub fn deformation(&self) -> DeformationState {
        DeformationState { theta: self.theta.clone(), theta1_base: self.theta1.clone(), beta: self.beta.clone() }
    }

    pub fn structure(&self) -> Result<Structure> {
        self.deformation().structure()
    }
}

/// θ¹ = αθ¹₀ + βθ¹̄₀ with α = (1+|β|²)^{1/2}, a gauge-fixed parametrization of CR structures on ker θ.
#[derive(Clone, Debug)]
pub struct DeformationState {
    pub theta: CoordForm,
    pub theta1_base: CoordForm,
    pub beta: Field,
}

impl DeformationState {
    pub fn alpha(&self) -> Field {
        let b2 = (&self.beta * &self.beta.conj()).re();
        b2.add_constant(C64::new(1.0, 0.0)).sqrt().with_weight(0)
    }

    pub fn theta1(&self) -> CoordForm {
        let a = self.alpha();
        let beta = self.beta.clone().with_weight(0);
        self.theta1_base
            .mul_field(&a)
            .add(&self.theta1_base.conj().mul_field(&beta))
            .expect("same chart")
    }

    pub fn structure(&self) -> Result<Structure> {
        Structure::solve(&self.theta, &self.theta1())
    }
}

fn real(chart: &Arc<Chart>, f: impl Fn(&[f64]) -> f64) -> Field {
    Field::from_fn(chart, |x| C64::new(f(x), 0.0))
}

fn dims3(spec: &GeometrySpec, default: usize) -> Result<[usize; 3]> {
    match &spec.dims {
        None => Ok([default; 3]),
        Some(d) if d.len() == 1 => Ok([d[0]; 3]),
        Some(d) if d.len() == 3 => Ok([d[0], d[1], d[2]]),
        Some(d) => Err(CrError::Catalog(format!("{} needs 1 or 3 dimensions, got {d:?}", spec.name))),
    }
}

/// Rototranslation torus: θ = cos(nz)dx + sin(nz)dy on (ℝ/2πℤ)³.
pub fn t3_roto(n: u32, dims: [usize; 3]) -> Result<Model> {
    if n == 0 {
        return Err(CrError::Catalog("t3-roto needs n ≥ 1".into()));
    }
    let c = Chart::periodic3(dims, [2.0 * PI; 3])?;
    let nf = n as f64;
    let theta = CoordForm::one_form(&c, vec![real(&c, |x| (nf * x[2]).cos()), real(&c, |x| (nf * x[2]).sin()), Field::zeros(&c)]);
    let raw = CoordForm::one_form(
        &c,
        vec![
            Field::from_fn(&c, |x| C64::new(0.0, -(nf * x[2]).sin())),
            Field::from_fn(&c, |x| C64::new(0.0, (nf * x[2]).cos())),
            Field::real_constant(&c, 1.0),
        ],
    );
    let (theta1, _) = admissible_coframe(&theta, &raw)?;
    Ok(Model { name: format!("t3-roto:n={n}"), beta: Field::zeros(&c), chart: c, theta, theta1 })
}

/// Flat Heisenberg group, θ = dt + x dy, sampled as Taylor jets at scattered points.
pub fn heis_flat(points: usize, order: usize) -> Result<Model> {
    let pts: Vec<[f64; 3]> = (1..=points)
        .map(|k| [2.0 * halton(k, 2) - 1.0, 2.0 * halton(k, 3) - 1.0, 2.0 * halton(k, 5) - 1.0])
        .collect();
    let c = Chart::pointset(pts, order)?;
    let js = c.jets().unwrap().clone();
    let x = Field::from_jets(&c, |p| Jet::variable(&js, 0, p[0]).coefficients().to_vec());
    let theta = CoordForm::one_form(&c, vec![Field::zeros(&c), x, Field::real_constant(&c, 1.0)]);
    let raw = CoordForm::one_form(
        &c,
        vec![Field::real_constant(&c, 1.0), Field::constant(&c, C64::new(0.0, 1.0)), Field::zeros(&c)],
    );
    let (theta1, _) = admissible_coframe(&theta, &raw)?;
    Ok(Model { name: "heis-flat".into(), beta: Field::zeros(&c), chart: c, theta, theta1 })
}

/// Heisenberg nilmanifold with a Reeb-invariant deformation β(x, y) of the flat structure.
pub fn nil_invariant(beta: &Expr, dims: &[usize]) -> Result<Model> {
    let c = match dims {
        [n] => Chart::invariant2([*n, *n], [2.0 * PI; 2], 2.0 * PI)?,
        [nx, ny] => Chart::invariant2([*nx, *ny], [2.0 * PI; 2], 2.0 * PI)?,
        [nx, ny, nt] => Chart::nil3([*nx, *ny, *nt], [2.0 * PI; 3])?,
        _ => return Err(CrError::Catalog(format!("nil-invariant needs 1 to 3 dimensions, got {dims:?}"))),
    };
    let theta = CoordForm::one_form(&c, vec![Field::zeros(&c), Field::zeros(&c), Field::real_constant(&c, 1.0)]);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let theta1 = CoordForm::one_form(
        &c,
        vec![Field::real_constant(&c, h), Field::constant(&c, C64::new(0.0, h)), Field::zeros(&c)],
    );
    let beta = Field::from_fn(&c, |x| beta.eval(&[x[0], x[1], 0.0]));
    Ok(Model { name: "nil-invariant".into(), chart: c, theta, theta1, beta })
}

/// Round S³ as SU(2) with its left-invariant coframe; θ = e².
pub fn s3_homogeneous() -> Result<Model> {
    let c = Chart::homogeneous_su2();
    let theta = CoordForm::one_form(&c, vec![Field::zeros(&c), Field::zeros(&c), Field::real_constant(&c, 1.0)]);
    let raw = CoordForm::one_form(
        &c,
        vec![Field::real_constant(&c, 1.0), Field::constant(&c, C64::new(0.0, 1.0)), Field::zeros(&c)],
    );
    let (theta1, _) = admissible_coframe(&theta, &raw)?;
    Ok(Model { name: "s3-homogeneous".into(), beta: Field::zeros(&c), chart: c, theta, theta1 })
}

/// Names of the intrinsic (chart-based) catalog entries.
pub const INTRINSIC: [&str; 4] = ["t3-roto", "heis-flat", "nil-invariant", "s3-homogeneous"];

/// Build an intrinsic catalog model from a geometry string.
pub fn model(spec: &str) -> Result<Model> {
    let g = GeometrySpec::parse(spec)?;
    match g.name.as_str() {
        "t3-roto" => {
            g.check_keys(&["n"])?;
            let n = g.get_f64("n", 1.0)?;
            if n <= 0.0 || n.fract() != 0.0 {
                return Err(CrError::Catalog(format!("t3-roto needs a positive integer n, got {n}")));
            }
            t3_roto(n as u32, dims3(&g, 32)?)
        }
        "heis-flat" => {
            g.check_keys(&["points", "order"])?;
            let p = g.get_f64("points", 16.0)? as usize;
            let o = g.get_f64("order", 6.0)? as usize;
            heis_flat(p.max(1), o.max(4))
        }
        "nil-invariant" => {
            g.check_keys(&["beta"])?;
            let e = Expr::parse(g.get("beta").unwrap_or("0"))?;
            nil_invariant(&e, g.dims.as_deref().unwrap_or(&[32, 32]))
        }
        "s3-homogeneous" => {
            g.check_keys(&[])?;
            s3_homogeneous()
        }
        other => Err(CrError::Catalog(format!("unknown intrinsic geometry {other:?}"))),
    }
}
