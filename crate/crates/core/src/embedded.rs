//! Real hypersurfaces M = {γ = 0} in ℂ²: the contact form θ = −i∂γ, an adapted coframe and the
//! Webster connection at points of M, the vector fields Y_f, ∂̄_b on ambient (1,0)-valued
//! sections, and the infinitesimal deformation of J under the flow of 2Re Y_f.
//!
//! Everything is evaluated pointwise from Taylor jets in the real coordinates (x₁, y₁, x₂, y₂),
//! either exact (closed-form γ) or fitted by central differences.

use crate::error::{CrError, Result};
use crate::jet::{Jet, JetSpace};
use crate::phstructure::GeometrySpec;
use crate::sampling::{halton, rng};
use nalgebra::{Matrix2, Matrix4, Vector4};
use num_complex::Complex64 as C64;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::fmt;
use std::sync::{Arc, OnceLock};

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// A point of ℂ² in real coordinates (x₁, y₁, x₂, y₂).
pub type Point = [f64; 4];

/// Largest |Y_f(p)| for which p + Y_f(p) is treated as a small perturbation of M.
pub const TUBULAR_RADIUS: f64 = 0.25;
/// Default step of the difference fallback.
pub const DIFFERENCE_STEP: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Perturbation {
    /// Re(z₁²z̄₂)
    Cubic,
    /// |z₁|⁴
    Quartic,
}

/// Closed-form defining functions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Hypersurface {
    /// |z₁|² + |z₂|² − 1
    Sphere,
    /// a₁|z₁|² + a₂|z₂|² − 1
    Ellipsoid { a1: f64, a2: f64 },
    /// |z₁|² + |z₂|² − 1 + ε·perturbation
    Perturbed { eps: f64, mode: Perturbation },
}

impl fmt::Display for Hypersurface {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Sphere => write!(f, "sphere"),
            Self::Ellipsoid { a1, a2 } => write!(f, "ellipsoid:a1={a1},a2={a2}"),
            Self::Perturbed { eps, mode } => {
                let m = match mode {
                    Perturbation::Cubic => "cubic",
                    Perturbation::Quartic => "quartic",
                };
                write!(f, "perturbed:eps={eps},mode={m}")
            }
        }
    }
}

fn space(order: usize) -> Arc<JetSpace> {
    static CACHE: [OnceLock<Arc<JetSpace>>; 8] = [const { OnceLock::new() }; 8];
    match CACHE.get(order) {
        Some(c) => c.get_or_init(|| JetSpace::new(4, order)).clone(),
        None => JetSpace::new(4, order),
    }
}

/// (Jet space, z₁, z₂) expanded around p.
fn local_coordinates(p: &Point, order: usize) -> (Arc<JetSpace>, Jet, Jet) {
    let space = space(order);
    let v = |k: usize| Jet::variable(&space, k, p[k]);
    let z1 = &v(0) + &v(1).scale(I);
    let z2 = &v(2) + &v(3).scale(I);
    (space, z1, z2)
}

impl Hypersurface {
    /// `sphere`, `ellipsoid:a1=1,a2=2`, `perturbed:eps=0.01,mode=cubic|quartic`.
    pub fn parse(text: &str) -> Result<Self> {
        let g = GeometrySpec::parse(text)?;
        if g.dims.is_some() {
            return Err(CrError::Catalog(format!("{}: hypersurfaces take no grid dimensions", g.name)));
        }
        match g.name.as_str() {
            "sphere" => {
                g.check_keys(&[])?;
                Ok(Self::Sphere)
            }
            "ellipsoid" => {
                g.check_keys(&["a1", "a2"])?;
                let a1 = g.get_f64("a1", 1.0)?;
                let a2 = g.get_f64("a2", 2.0)?;
                if !(a1 > 0.0 && a2 > 0.0) {
                    return Err(CrError::Catalog("ellipsoid weights must be positive".into()));
                }
                Ok(Self::Ellipsoid { a1, a2 })
            }
            "perturbed" | "sphere-perturbed" => {
                g.check_keys(&["eps", "mode"])?;
                let eps = g.get_f64("eps", 0.01)?;
                let mode = match g.get("mode").unwrap_or("cubic") {
                    "cubic" => Perturbation::Cubic,
                    "quartic" => Perturbation::Quartic,
                    m => return Err(CrError::Catalog(format!("unknown perturbation mode {m}"))),
                };
                Ok(Self::Perturbed { eps, mode })
            }
            other => Err(CrError::Catalog(format!("unknown hypersurface {other}"))),
        }
    }

    /// γ as a function of the complex coordinates.
    pub fn gamma_of(&self, z1: &Jet, z2: &Jet) -> Jet {
        let n1 = z1 * &z1.conj();
        let n2 = z2 * &z2.conj();
        let one = Jet::real(z1.space(), 1.0);
        match *self {
            Self::Sphere => &(&n1 + &n2) - &one,
            Self::Ellipsoid { a1, a2 } => &(&n1.scale(a1.into()) + &n2.scale(a2.into())) - &one,
            Self::Perturbed { eps, mode } => {
                let extra = match mode {
                    Perturbation::Cubic => (&(z1 * z1) * &z2.conj()).re(),
                    Perturbation::Quartic => &n1 * &n1,
                };
                &(&(&n1 + &n2) - &one) + &extra.scale(eps.into())
            }
        }
    }

    pub fn gamma(&self, p: &Point) -> f64 {
        let (_, z1, z2) = local_coordinates(p, 0);
        self.gamma_of(&z1, &z2).value().re
    }

    pub fn gradient(&self, p: &Point) -> [f64; 4] {
        let (space, z1, z2) = local_coordinates(p, 1);
        let g = self.gamma_of(&z1, &z2);
        std::array::from_fn(|k| g.coefficients()[space.unit_index(k)].re)
    }

    /// Damped Newton steps along ∇γ until |γ| ≤ 1e-13.
    pub fn project(&self, p: &Point) -> Result<Point> {
        let mut q = *p;
        for _ in 0..60 {
            let g = self.gamma(&q);
            if g.abs() <= 1e-13 {
                return Ok(q);
            }
            let grad = self.gradient(&q);
            let n2: f64 = grad.iter().map(|v| v * v).sum();
            if !(n2 > 1e-24) {
                return Err(CrError::Projection(g.abs()));
            }
            let mut step = 1.0;
            loop {
                let trial: Point = std::array::from_fn(|k| q[k] - step * g * grad[k] / n2);
                if self.gamma(&trial).abs() < g.abs() || step < 1e-3 {
                    q = trial;
                    break;
                }
                step *= 0.5;
            }
        }
        let g = self.gamma(&q);
        if g.abs() <= 1e-10 {
            Ok(q)
        } else {
            Err(CrError::Projection(g.abs()))
        }
    }

    /// Low-discrepancy points of S³ (Hopf coordinates from a Halton sequence) projected to M.
    pub fn samples(&self, count: usize) -> Result<Vec<Point>> {
        (1..=count)
            .into_par_iter()
            .map(|k| {
                let u = halton(k, 2);
                let a = 2.0 * std::f64::consts::PI * halton(k, 3);
                let b = 2.0 * std::f64::consts::PI * halton(k, 5);
                let (s, c) = (u.sqrt(), (1.0 - u).sqrt());
                self.project(&[s * a.cos(), s * a.sin(), c * b.cos(), c * b.sin()])
            })
            .collect()
    }
}

/// A complex function on ℂ², written in terms of z₁, z₂ and their conjugates.
#[derive(Clone)]
pub struct TestFunction {
    pub name: String,
    f: Arc<dyn Fn(&Jet, &Jet) -> Jet + Send + Sync>,
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TestFunction({})", self.name)
    }
}

impl TestFunction {
    pub fn new(name: &str, f: impl Fn(&Jet, &Jet) -> Jet + Send + Sync + 'static) -> Self {
        Self { name: name.to_string(), f: Arc::new(f) }
    }

    pub fn eval(&self, z1: &Jet, z2: &Jet) -> Jet {
        (self.f)(z1, z2)
    }

    pub fn value(&self, p: &Point) -> C64 {
        let (_, z1, z2) = local_coordinates(p, 0);
        self.eval(&z1, &z2).value()
    }

    /// c·self
    pub fn scaled(&self, c: C64) -> Self {
        let f = self.f.clone();
        Self::new(&format!("{c}*{}", self.name), move |a, b| f(a, b).scale(c))
    }

    /// a·f + b·g
    pub fn combine(a: C64, f: &TestFunction, b: C64, g: &TestFunction) -> Self {
        let (ff, gg) = (f.f.clone(), g.f.clone());
        Self::new(&format!("{a}*{}+{b}*{}", f.name, g.name), move |x, y| &ff(x, y).scale(a) + &gg(x, y).scale(b))
    }

    /// Seeded random complex combination of all monomials of degree ≤ 2 in z₁, z₂, z̄₁, z̄₂.
    pub fn random_quadratic(seed: u64) -> Self {
        let mut r = rng(seed);
        let c: Vec<C64> = (0..15).map(|_| C64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0))).collect();
        Self::new(&format!("random-quadratic:seed={seed}"), move |z1, z2| {
            let one = Jet::real(z1.space(), 1.0);
            let m = [one, z1.clone(), z2.clone(), z1.conj(), z2.conj()];
            let mut acc = Jet::real(z1.space(), 0.0);
            let mut k = 0;
            for a in 0..5 {
                for b in a..5 {
                    acc = &acc + &(&m[a] * &m[b]).scale(c[k]);
                    k += 1;
                }
            }
            acc
        })
    }

    /// Named functions: `one`, `i`, `z1`, `z2`, `z1bar`, `z1z2`, `z1sq`, `z1barsq`, `z1z2bar`, `absz1sq`,
    /// `random-quadratic[:seed=N]`.
    pub fn parse(text: &str) -> Result<Self> {
        let g = GeometrySpec::parse(text)?;
        let f = match g.name.as_str() {
            "one" => Self::new("one", |z1, _| Jet::real(z1.space(), 1.0)),
            "i" => Self::new("i", |z1, _| Jet::constant(z1.space(), I)),
            "z1" => Self::new("z1", |z1, _| z1.clone()),
            "z2" => Self::new("z2", |_, z2| z2.clone()),
            "z1bar" => Self::new("z1bar", |z1, _| z1.conj()),
            "z1z2" => Self::new("z1z2", |z1, z2| z1 * z2),
            "z1sq" => Self::new("z1sq", |z1, _| z1 * z1),
            "z1barsq" => Self::new("z1barsq", |z1, _| &z1.conj() * &z1.conj()),
            "z1z2bar" => Self::new("z1z2bar", |z1, z2| z1 * &z2.conj()),
            "absz1sq" => Self::new("absz1sq", |z1, _| z1 * &z1.conj()),
            "random-quadratic" => {
                g.check_keys(&["seed"])?;
                let seed = g.get_f64("seed", 0.0)? as u64;
                return Ok(Self::random_quadratic(seed));
            }
            other => return Err(CrError::Catalog(format!("unknown test function {other}"))),
        };
        g.check_keys(&[])?;
        Ok(f)
    }
}

/// How ambient derivatives are obtained.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Differentiation {
    /// Jets of the closed-form expressions.
    Exact,
    /// Central differences of point values; jets are truncated at third order.
    Difference { step: f64 },
}

impl Differentiation {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Exact => "exact",
            Self::Difference { .. } => "difference",
        }
    }
}

/// Taylor jet of g at p from nested central differences (error O(h²) per coefficient).
fn difference_jet(space: &Arc<JetSpace>, p: &Point, h: f64, g: &dyn Fn(&Point) -> C64) -> Jet {
    fn nested(p: &Point, alpha: &mut [u8; 4], h: f64, g: &dyn Fn(&Point) -> C64) -> C64 {
        match alpha.iter().position(|&a| a > 0) {
            None => g(p),
            Some(k) => {
                alpha[k] -= 1;
                let mut hi = *p;
                hi[k] += h;
                let mut lo = *p;
                lo[k] -= h;
                let d = (nested(&hi, alpha, h, g) - nested(&lo, alpha, h, g)) / (2.0 * h);
                alpha[k] += 1;
                d
            }
        }
    }
    let coef = (0..space.len())
        .map(|i| {
            let e = space.exponents(i);
            let mut alpha = [e[0], e[1], e[2], e[3]];
            let fact: f64 = alpha.iter().map(|&a| (1..=a as u64).product::<u64>() as f64).product();
            nested(p, &mut alpha, h, g) / fact
        })
        .collect();
    Jet::from_coefficients(space, coef)
}

/// Jets of γ and f at p on a common space.
fn ambient_jets(geom: &Hypersurface, f: Option<&TestFunction>, p: &Point, order: usize, diff: Differentiation) -> (Jet, Option<Jet>) {
    match diff {
        Differentiation::Exact => {
            let (_, z1, z2) = local_coordinates(p, order);
            (geom.gamma_of(&z1, &z2), f.map(|f| f.eval(&z1, &z2)))
        }
        Differentiation::Difference { step } => {
            let space = space(order.min(3));
            let g = difference_jet(&space, p, step, &|q| C64::new(geom.gamma(q), 0.0));
            let fj = f.map(|f| difference_jet(&space, p, step, &|q| f.value(q)));
            (g, fj)
        }
    }
}

// Real-coordinate calculus on ℝ⁴ = ℂ² with jet coefficients. A 1-form or vector is four
// components in the (x₁, y₁, x₂, y₂) basis; a 2-form is six components on dx^a∧dx^b, a < b.

type Vec4 = [Jet; 4];
type Form2 = [Jet; 6];
const PAIRS: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

/// a₁dz₁ + a₂dz₂ in the real basis.
fn form_from_dz(a: &[Jet; 2]) -> Vec4 {
    [a[0].clone(), a[0].scale(I), a[1].clone(), a[1].scale(I)]
}

/// v₁∂_{z₁} + v₂∂_{z₂} in the real basis.
fn vector_from_dz(v: &[Jet; 2]) -> Vec4 {
    let h = C64::new(0.5, 0.0);
    let hi = C64::new(0.0, -0.5);
    [v[0].scale(h), v[0].scale(hi), v[1].scale(h), v[1].scale(hi)]
}

fn conj4(v: &Vec4) -> Vec4 {
    std::array::from_fn(|k| v[k].conj())
}

fn d1(w: &Vec4) -> Form2 {
    PAIRS.map(|(a, b)| &w[b].partial(a) - &w[a].partial(b))
}

fn eval1(w: &Vec4, v: &Vec4) -> Jet {
    let mut acc = &w[0] * &v[0];
    for k in 1..4 {
        acc = &acc + &(&w[k] * &v[k]);
    }
    acc
}

fn eval2(c: &Form2, v: &Vec4, w: &Vec4) -> Jet {
    let mut acc = Jet::real(v[0].space(), 0.0);
    for (k, &(a, b)) in PAIRS.iter().enumerate() {
        acc = &acc + &(&c[k] * &(&(&v[a] * &w[b]) - &(&v[b] * &w[a])));
    }
    acc
}

/// Directional derivative V(g).
fn apply(v: &Vec4, g: &Jet) -> Jet {
    let mut acc = &v[0] * &g.partial(0);
    for k in 1..4 {
        acc = &acc + &(&v[k] * &g.partial(k));
    }
    acc
}

/// (1,0) vectors (V₀, Z₁) dual to the (1,0) forms (θ, θ¹), given by their dz-components.
fn dual_pair(theta: &[Jet; 2], theta1: &[Jet; 2]) -> ([Jet; 2], [Jet; 2]) {
    let det = &(&theta[0] * &theta1[1]) - &(&theta[1] * &theta1[0]);
    let inv = det.recip();
    let v0 = [&theta1[1] * &inv, -&(&theta1[0] * &inv)];
    let z1 = [-&(&theta[1] * &inv), &theta[0] * &inv];
    (v0, z1)
}

/// Adapted coframe near a point of M: dθ = iθ¹∧θ¹̄ + f₁θ¹∧θ̄ + ρθ∧θ̄ with f₁ = 0 on M.
#[derive(Clone, Debug)]
pub struct AdaptedFrame {
    pub point: Point,
    pub differentiation: Differentiation,
    /// dz-components of θ = −i∂γ.
    pub theta: [Jet; 2],
    /// dz-components of θ¹.
    pub theta1: [Jet; 2],
    /// ∂z-components of the dual vectors V₀ (= iζ) and Z₁.
    pub v0: [Jet; 2],
    pub z1: [Jet; 2],
    /// −i dθ(Z₁, Z₁̄) of the initial coframe at p, i.e. the Levi form before normalization.
    pub levi: f64,
    /// ρ and f₁ at p.
    pub rho: C64,
    pub f1: C64,
    /// Jet of γ, kept for tangency and projection checks.
    pub gamma: Jet,
}

impl AdaptedFrame {
    fn real_vectors(&self) -> (Vec4, Vec4) {
        (vector_from_dz(&self.v0), vector_from_dz(&self.z1))
    }

    /// Max over pairs of real tangent vectors (Re Z₁, Im Z₁, 2Re V₀) of
    /// |dθ − iθ¹∧θ¹̄ − ρθ∧θ̄| at p.
    pub fn structure_residual(&self) -> f64 {
        let th = form_from_dz(&self.theta);
        let th1 = form_from_dz(&self.theta1);
        let dth = d1(&th);
        let (v0, z1) = self.real_vectors();
        let re = |v: &Vec4| -> Vec4 { std::array::from_fn(|k| (&v[k] + &v[k].conj()).scale(C64::new(0.5, 0.0))) };
        let im = |v: &Vec4| -> Vec4 { std::array::from_fn(|k| (&v[k] - &v[k].conj()).scale(C64::new(0.0, -0.5))) };
        let t: Vec4 = std::array::from_fn(|k| &v0[k] + &v0[k].conj());
        let tests = [re(&z1), im(&z1), t];
        let mut worst: f64 = 0.0;
        for a in 0..3 {
            for b in (a + 1)..3 {
                let (x, y) = (&tests[a], &tests[b]);
                let lhs = eval2(&dth, x, y).value();
                let w = |f: &Vec4, g: &Vec4| eval1(f, x).value() * eval1(g, y).value() - eval1(f, y).value() * eval1(g, x).value();
                let rhs = I * w(&th1, &conj4(&th1)) + self.rho * w(&th, &conj4(&th));
                worst = worst.max((lhs - rhs).norm());
            }
        }
        worst
    }
}

/// Build the adapted coframe at p ∈ M from jets of order `order` (three or more).
pub fn adapted_coframe(geom: &Hypersurface, p: &Point, order: usize, diff: Differentiation) -> Result<AdaptedFrame> {
    let (gamma, _) = ambient_jets(geom, None, p, order, diff);
    frame_from_gamma(gamma, p, diff)
}

fn frame_from_gamma(gamma: Jet, p: &Point, diff: Differentiation) -> Result<AdaptedFrame> {
    let half = C64::new(0.5, 0.0);
    let gz = [
        (&gamma.partial(0) - &gamma.partial(1).scale(I)).scale(half),
        (&gamma.partial(2) - &gamma.partial(3).scale(I)).scale(half),
    ];
    let theta = [gz[0].scale(-I), gz[1].scale(-I)];
    // any (1,0) form independent of θ; the normalization below fixes it up to phase
    let raw = [&gz[1].conj() + &theta[0].scale(C64::new(0.25, 0.0)), &(-&gz[0].conj()) + &theta[1].scale(C64::new(0.25, 0.0))];
    let th = form_from_dz(&theta);
    let dth = d1(&th);
    let (v0, z1) = dual_pair(&theta, &raw);
    let (rv0, rz1) = (vector_from_dz(&v0), vector_from_dz(&z1));
    let h = eval2(&dth, &rz1, &conj4(&rz1)).scale(-I).re();
    let levi = h.value().re;
    if !(levi > 0.0) {
        return Err(CrError::LeviForm(levi));
    }
    let g = eval2(&dth, &rv0, &conj4(&rz1));
    let u = h.sqrt();
    let v = g.div(&u).scale(-I);
    let theta1 = [&(&u * &raw[0]) + &(&v * &theta[0]), &(&u * &raw[1]) + &(&v * &theta[1])];
    let (v0, z1) = dual_pair(&theta, &theta1);
    let (rv0, rz1) = (vector_from_dz(&v0), vector_from_dz(&z1));
    let rho = eval2(&dth, &rv0, &conj4(&rv0)).value();
    let f1 = eval2(&dth, &rz1, &conj4(&rv0)).value();
    Ok(AdaptedFrame { point: *p, differentiation: diff, theta, theta1, v0, z1, levi, rho, f1, gamma })
}

/// Webster connection and torsion of (θ, θ¹) at p:
/// dθ¹ = θ¹∧ω + Aθ∧θ¹̄ + λθ∧θ̄ with ω + ω̄ = 0 at p.
#[derive(Clone, Debug, Serialize)]
pub struct ConnectionAt {
    /// Torsion A¹₁̄ = A₁̄₁̄.
    pub torsion: C64,
    /// ω on the basis (θ, θ¹, θ̄, θ¹̄).
    pub omega: [C64; 4],
    pub lambda: C64,
    /// ω(T) on M, T = 2Re V₀ the Reeb field.
    pub omega_reeb: C64,
    /// Max coefficient of ω + ω̄ restricted to TM (where θ = θ̄).
    pub skew_defect: f64,
}

/// Coefficients c_ab = dθ¹(E_a, E_b) on the frame (V₀, Z₁, V̄₀, Z̄₁), as jets.
fn dtheta1_coefficients(fr: &AdaptedFrame) -> [[Jet; 4]; 4] {
    let dth1 = d1(&form_from_dz(&fr.theta1));
    let (v0, z1) = fr.real_vectors();
    let e = [v0.clone(), z1.clone(), conj4(&v0), conj4(&z1)];
    std::array::from_fn(|a| std::array::from_fn(|b| eval2(&dth1, &e[a], &e[b])))
}

pub fn connection_at(fr: &AdaptedFrame) -> ConnectionAt {
    let c = dtheta1_coefficients(fr);
    let v = |a: usize, b: usize| c[a][b].value();
    let (c01, c02, c03, c12, c13) = (v(0, 1), v(0, 2), v(0, 3), v(1, 2), v(1, 3));
    let omega = [-c01, -c13.conj(), c12, c13];
    let omega_reeb = omega[0] + omega[2];
    let skew = [omega_reeb + omega_reeb.conj(), omega[1] + omega[3].conj()];
    ConnectionAt { torsion: c03, omega, omega_reeb, lambda: c02, skew_defect: skew.iter().fold(0.0, |m, z| m.max(z.norm())) }
}

pub fn connection_torsion_at(geom: &Hypersurface, p: &Point, diff: Differentiation) -> Result<ConnectionAt> {
    Ok(connection_at(&adapted_coframe(geom, p, 3, diff)?))
}

/// Summary statistics over samples.
#[derive(Clone, Debug, Default, Serialize)]
pub struct SampleStats {
    pub count: usize,
    pub max: f64,
    pub mean: f64,
    pub median: f64,
    pub q90: f64,
    pub min: f64,
}

impl SampleStats {
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self::default();
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let q = |t: f64| v[((v.len() - 1) as f64 * t).round() as usize];
        Self { count: v.len(), max: v[v.len() - 1], mean: v.iter().sum::<f64>() / v.len() as f64, median: q(0.5), q90: q(0.9), min: v[0] }
    }
}

/// Frame, connection and the jet of f at one sample.
struct Local {
    frame: AdaptedFrame,
    conn: ConnectionAt,
    f: Jet,
}

impl Local {
    fn new(geom: &Hypersurface, f: &TestFunction, p: &Point, order: usize, diff: Differentiation) -> Result<Self> {
        let (gamma, fj) = ambient_jets(geom, Some(f), p, order, diff);
        let frame = frame_from_gamma(gamma, p, diff)?;
        let conn = connection_at(&frame);
        Ok(Self { frame, conn, f: fj.expect("function jet requested") })
    }

    fn zbar(&self) -> Vec4 {
        conj4(&vector_from_dz(&self.frame.z1))
    }

    /// f,₁̄ as a jet.
    fn f_1bar(&self) -> Jet {
        apply(&self.zbar(), &self.f)
    }

    /// (𝔇_J f)₁̄¹ = f,₁̄₁̄ − iA₁̄₁̄f at p.
    fn frak_d(&self) -> C64 {
        let f1 = self.f_1bar();
        let f11 = apply(&self.zbar(), &f1).value() + self.conn.omega[3] * f1.value();
        f11 - I * self.conn.torsion * self.f.value()
    }

    /// ∂z-components of Y_f = fV₀ + if,₁̄Z₁ as jets.
    fn y(&self) -> [Jet; 2] {
        let g = self.f_1bar().scale(I);
        std::array::from_fn(|l| &(&self.f * &self.frame.v0[l]) + &(&g * &self.frame.z1[l]))
    }

    /// ∂̄_bY_f(Z₁̄) = Z₁̄(Y^ℓ)∂_{z_ℓ} at p.
    fn dbar_y(&self) -> [C64; 2] {
        let zb = self.zbar();
        self.y().map(|y| apply(&zb, &y).value())
    }

    fn pair(form: &[Jet; 2], v: &[C64; 2]) -> C64 {
        form[0].value() * v[0] + form[1].value() * v[1]
    }
}

/// Y_f at one point with its characterizing residuals.
#[derive(Clone, Debug, Serialize)]
pub struct YfValue {
    /// ∂z-components of Y_f(p).
    pub y: [C64; 2],
    /// |θ(Y_f) − f|.
    pub contraction: f64,
    /// |dθ(Y_f, Z₁̄) + f,₁̄|, i.e. Y_f⌟dθ = −∂̄_b f mod θ̄.
    pub dtheta: f64,
    /// |dγ(2Re Y_f) + 2Im f|; 2Re Y_f is tangent to M when f is real.
    pub normal: f64,
}

pub fn vector_yf(geom: &Hypersurface, f: &TestFunction, p: &Point, diff: Differentiation) -> Result<YfValue> {
    let l = Local::new(geom, f, p, 3, diff)?;
    let y = l.y();
    let yv = y.clone().map(|c| c.value());
    let th = form_from_dz(&l.frame.theta);
    let dth = d1(&th);
    let contraction = (Local::pair(&l.frame.theta, &yv) - l.f.value()).norm();
    let dtheta = (eval2(&dth, &vector_from_dz(&y), &l.zbar()).value() + l.f_1bar().value()).norm();
    let grad = geom.gradient(p);
    let dgamma = grad[0] * yv[0].re + grad[1] * yv[0].im + grad[2] * yv[1].re + grad[3] * yv[1].im;
    let normal = (dgamma + 2.0 * l.f.value().im).abs();
    Ok(YfValue { y: yv, contraction, dtheta, normal })
}

/// (𝔇_J f)₁̄¹ at p.
pub fn frak_d_at(geom: &Hypersurface, f: &TestFunction, p: &Point, diff: Differentiation) -> Result<C64> {
    Ok(Local::new(geom, f, p, 3, diff)?.frak_d())
}

/// Residuals of ∂̄_bY_f = i𝔇_Jf over samples.
#[derive(Clone, Debug, Serialize)]
pub struct DbarReport {
    pub geometry: String,
    pub function: String,
    pub differentiation: Differentiation,
    /// max(|θ(∂̄_bY_f(Z₁̄))|, |θ¹(∂̄_bY_f(Z₁̄)) − i𝔇_Jf|) per sample.
    pub residual: SampleStats,
    /// |𝔇_Jf| per sample.
    pub frak_d: SampleStats,
    /// Y_f characterization residuals, max of both per sample.
    pub yf: SampleStats,
}

pub fn dbar_b_check(geom: &Hypersurface, f: &TestFunction, samples: &[Point], diff: Differentiation) -> Result<DbarReport> {
    let rows: Vec<(f64, f64, f64)> = samples
        .par_iter()
        .map(|p| {
            let l = Local::new(geom, f, p, 3, diff)?;
            let w = l.dbar_y();
            let d = l.frak_d();
            let r = Local::pair(&l.frame.theta, &w).norm().max((Local::pair(&l.frame.theta1, &w) - I * d).norm());
            let y = vector_yf(geom, f, p, diff)?;
            Ok((r, d.norm(), y.contraction.max(y.dtheta)))
        })
        .collect::<Result<_>>()?;
    let col = |k: usize| rows.iter().map(|r| [r.0, r.1, r.2][k]).collect::<Vec<_>>();
    Ok(DbarReport {
        geometry: geom.to_string(),
        function: f.name.clone(),
        differentiation: diff,
        residual: SampleStats::of(&col(0)),
        frak_d: SampleStats::of(&col(1)),
        yf: SampleStats::of(&col(2)),
    })
}

/// The perturbed points χ_f(p) = p + Y_f(p) and the CR defect of χ_f.
#[derive(Clone, Debug, Serialize)]
pub struct ChiReport {
    pub images: Vec<Point>,
    /// |(1,0)-part of dχ_f(Z₁̄)| / |dχ_f(Z₁̄)| per sample; zero exactly when χ_f is CR.
    pub defect: SampleStats,
}

pub fn chi_embedding(geom: &Hypersurface, f: &TestFunction, samples: &[Point], diff: Differentiation) -> Result<ChiReport> {
    let rows: Vec<(Point, f64)> = samples
        .par_iter()
        .map(|p| {
            let l = Local::new(geom, f, p, 3, diff)?;
            let y = l.y();
            let yv = y.clone().map(|c| c.value());
            if (yv[0].norm_sqr() + yv[1].norm_sqr()).sqrt() > TUBULAR_RADIUS {
                return Err(CrError::Tubular);
            }
            let image = [p[0] + yv[0].re, p[1] + yv[0].im, p[2] + yv[1].re, p[3] + yv[1].im];
            let zb = l.zbar();
            let z = vector_from_dz(&l.frame.z1);
            let holo: f64 = y.iter().map(|c| apply(&zb, c).value().norm_sqr()).sum();
            // (0,1)-part: Z₁̄(z̄_ℓ + Ȳ^ℓ) = conj(Z₁^ℓ + Z₁Y^ℓ)
            let anti: f64 = (0..2).map(|k| (l.frame.z1[k].value() + apply(&z, &y[k]).value()).norm_sqr()).sum();
            Ok((image, (holo / (holo + anti)).sqrt()))
        })
        .collect::<Result<_>>()?;
    let defects: Vec<f64> = rows.iter().map(|r| r.1).collect();
    Ok(ChiReport { images: rows.into_iter().map(|r| r.0).collect(), defect: SampleStats::of(&defects) })
}

/// Finite-difference Lie transport of J along X_f = 2Re Y_f against 4Re 𝔇_Jf (up to the
/// pullback sign), at one point.
#[derive(Clone, Debug, Serialize)]
pub struct TangencyReport {
    pub point: Point,
    /// 𝔇_Jf from ∂̄_bY_f (route 1, −iθ¹(∂̄_bY_f(Z₁̄))) and from second covariant derivatives (route 2).
    pub route_y: C64,
    pub route_cov: C64,
    pub route_agreement: f64,
    pub eps: [f64; 2],
    /// max-entry error of (J_ε − J_{−ε})/2ε against −4Re 𝔇_Jf on ξ, at each ε.
    pub errors: [f64; 2],
    pub order: f64,
}

/// J on ℝ⁴: ∂x ↦ ∂y, ∂y ↦ −∂x.
fn standard_j() -> Matrix4<f64> {
    Matrix4::new(0.0, -1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0)
}

fn jacobian(v: &Vec4) -> Matrix4<f64> {
    Matrix4::from_fn(|a, b| v[a].partial(b).value().re)
}

fn real_part(v: &Vec4) -> Vec4 {
    std::array::from_fn(|k| &v[k] + &v[k].conj())
}

/// J_ε on ξ_p in the basis (e, Je), e = 2Re Z₁: pull back J by the flow map of X to order ε³ and
/// project along 2Re V₀ and the normal.
fn pulled_back_j(s: &Matrix4<f64>, basis: &Matrix4<f64>, binv: &Matrix4<f64>) -> Result<Matrix2<f64>> {
    let sinv = s.try_inverse().ok_or_else(|| CrError::Unsupported("singular flow differential".into()))?;
    let m = binv * sinv * standard_j() * s * basis;
    Ok(m.fixed_view::<2, 2>(0, 0).into_owned())
}

pub fn tangency_check(geom: &Hypersurface, f: &TestFunction, p: &Point, eps: f64) -> Result<TangencyReport> {
    let l = Local::new(geom, f, p, 5, Differentiation::Exact)?;
    let w = l.dbar_y();
    let route_y = -I * Local::pair(&l.frame.theta1, &w);
    let route_cov = l.frak_d();

    let x = real_part(&vector_from_dz(&l.y()));
    let x2: Vec4 = std::array::from_fn(|k| apply(&x, &x[k]));
    let x3: Vec4 = std::array::from_fn(|k| apply(&x, &x2[k]));
    let (d1m, d2m, d3m) = (jacobian(&x), jacobian(&x2), jacobian(&x3));
    let flow = |e: f64| Matrix4::identity() + d1m * e + d2m * (e * e / 2.0) + d3m * (e * e * e / 6.0);

    let col = |v: &Vec4| Vector4::from_fn(|k, _| v[k].value().re);
    let (v0, z1) = l.frame.real_vectors();
    let e = col(&real_part(&z1));
    let je = standard_j() * e;
    let t = col(&real_part(&v0));
    let n = Vector4::from(geom.gradient(p));
    let basis = Matrix4::from_columns(&[e, je, t, n]);
    let binv = basis.try_inverse().ok_or_else(|| CrError::Unsupported("degenerate frame".into()))?;

    let d = route_cov;
    // d/dε of the pullback dφ_ε⁻¹ J dφ_ε is [J, ∇X] = −4Re 𝔇_Jf on ξ; the pushforward has the opposite sign.
    let expected = Matrix2::new(d.re, d.im, d.im, -d.re) * -2.0;
    let mut errors = [0.0; 2];
    let eps_pair = [eps, eps / 2.0];
    for (k, &h) in eps_pair.iter().enumerate() {
        let lie = (pulled_back_j(&flow(h), &basis, &binv)? - pulled_back_j(&flow(-h), &basis, &binv)?) / (2.0 * h);
        errors[k] = (lie - expected).amax();
    }
    Ok(TangencyReport {
        point: *p,
        route_y,
        route_cov,
        route_agreement: (route_y - route_cov).norm(),
        eps: eps_pair,
        errors,
        order: (errors[0] / errors[1]).log2(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_frame_and_connection() {
        let geom = Hypersurface::Sphere;
        for p in geom.samples(20).unwrap() {
            let fr = adapted_coframe(&geom, &p, 3, Differentiation::Exact).unwrap();
            assert!(fr.structure_residual() < 1e-12, "{}", fr.structure_residual());
            assert!(fr.f1.norm() < 1e-12);
            let c = connection_at(&fr);
            assert!(c.torsion.norm() < 1e-12 && c.skew_defect < 1e-12);
        }
    }

    fn max_torsion(g: &Hypersurface, pts: &[Point]) -> f64 {
        pts.iter()
            .map(|q| {
                let q = g.project(q).unwrap();
                let c = connection_torsion_at(g, &q, Differentiation::Exact).unwrap();
                assert!(c.skew_defect < 1e-10);
                c.torsion.norm()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn perturbed_torsion_scales_with_eps() {
        let p = Hypersurface::Sphere.samples(8).unwrap();
        let ratio = |mode| {
            let a = max_torsion(&Hypersurface::Perturbed { eps: 0.01, mode }, &p);
            let b = max_torsion(&Hypersurface::Perturbed { eps: 0.005, mode }, &p);
            (a / b).log2()
        };
        // Re(z₁²z̄₂) is removable by a holomorphic change of coordinates to first order.
        assert!((ratio(Perturbation::Quartic) - 1.0).abs() < 0.1);
        assert!((ratio(Perturbation::Cubic) - 2.0).abs() < 0.1);
    }

    #[test]
    fn ellipsoid_levi_form_positive() {
        let geom = Hypersurface::Ellipsoid { a1: 1.0, a2: 2.0 };
        for p in geom.samples(30).unwrap() {
            // Σ γ_{j k̄} w_j w̄_k with w = (γ_{z₂}, −γ_{z₁}) spanning T₁,₀M, by second differences of γ.
            let h = 1e-4;
            let g = |d: [f64; 4]| geom.gamma(&std::array::from_fn(|k| p[k] + d[k]));
            let second = |a: usize, b: usize| {
                let e = |k: usize, s: f64| std::array::from_fn::<f64, 4, _>(|j| if j == k { s } else { 0.0 });
                let add = |x: [f64; 4], y: [f64; 4]| std::array::from_fn::<f64, 4, _>(|j| x[j] + y[j]);
                (g(add(e(a, h), e(b, h))) - g(add(e(a, h), e(b, -h))) - g(add(e(a, -h), e(b, h))) + g(add(e(a, -h), e(b, -h)))) / (4.0 * h * h)
            };
            let grad = geom.gradient(&p);
            let gz = [C64::new(grad[0], -grad[1]) * 0.5, C64::new(grad[2], -grad[3]) * 0.5];
            let w = [gz[1], -gz[0]];
            let mut levi = C64::new(0.0, 0.0);
            for j in 0..2 {
                for k in 0..2 {
                    // γ_{z_j z̄_k} = ¼(∂x_j − i∂y_j)(∂x_k + i∂y_k)γ
                    let (xj, yj, xk, yk) = (2 * j, 2 * j + 1, 2 * k, 2 * k + 1);
                    let c = C64::new(second(xj, xk) + second(yj, yk), second(xj, yk) - second(yj, xk)) * 0.25;
                    levi += c * w[j] * w[k].conj();
                }
            }
            assert!(levi.re > 0.0 && levi.im.abs() < 1e-6 * levi.re);
            let fr = adapted_coframe(&geom, &p, 3, Differentiation::Exact).unwrap();
            assert!(fr.levi > 0.0);
            assert!(fr.structure_residual() < 1e-10);
        }
    }

    #[test]
    fn sphere_frame_matches_closed_form() {
        let geom = Hypersurface::Sphere;
        for p in geom.samples(20).unwrap() {
            let fr = adapted_coframe(&geom, &p, 3, Differentiation::Exact).unwrap();
            let (z1, z2) = (C64::new(p[0], p[1]), C64::new(p[2], p[3]));
            let v = [fr.z1[0].value(), fr.z1[1].value()];
            // Z₁ ∝ z̄₂∂₁ − z̄₁∂₂
            assert!((v[0] * (-z1.conj()) - v[1] * z2.conj()).norm() < 1e-12);
            assert!(v[0].norm() + v[1].norm() > 0.1);
        }
    }

    #[test]
    fn dbar_identity_on_sphere() {
        let geom = Hypersurface::Sphere;
        let pts = geom.samples(200).unwrap();
        let fns = ["z1z2bar", "absz1sq", "random-quadratic:seed=3"];
        for name in fns {
            let f = TestFunction::parse(name).unwrap();
            let r = dbar_b_check(&geom, &f, &pts, Differentiation::Exact).unwrap();
            assert!(r.residual.max < 1e-5 && r.yf.max < 1e-10, "{name}: {r:?}");
            let d = dbar_b_check(&geom, &f, &pts[..40], Differentiation::Difference { step: DIFFERENCE_STEP }).unwrap();
            assert!(d.residual.max < 1e-3, "{name}: {d:?}");
        }
    }

    #[test]
    fn kernel_witnesses() {
        let geom = Hypersurface::Sphere;
        let pts = geom.samples(50).unwrap();
        let norm = |name: &str| dbar_b_check(&geom, &TestFunction::parse(name).unwrap(), &pts, Differentiation::Exact).unwrap().frak_d;
        for name in ["z1", "z2", "z1z2", "z1sq", "z1bar", "z1z2bar"] {
            assert!(norm(name).max < 1e-6, "{name}");
        }
        assert!(norm("z1barsq").max > 0.1);
    }

    #[test]
    fn difference_path_converges() {
        let geom = Hypersurface::Perturbed { eps: 0.2, mode: Perturbation::Quartic };
        let f = TestFunction::parse("random-quadratic:seed=5").unwrap();
        let p = geom.project(&Hypersurface::Sphere.samples(3).unwrap()[1]).unwrap();
        let exact = frak_d_at(&geom, &f, &p, Differentiation::Exact).unwrap();
        let err = |step| (frak_d_at(&geom, &f, &p, Differentiation::Difference { step }).unwrap() - exact).norm();
        let (a, b) = (err(2e-2), err(1e-2));
        assert!((a / b).log2() > 1.8, "{a} {b}");
        assert!(err(DIFFERENCE_STEP) < 1e-3);
    }

    #[test]
    fn yf_is_contact_and_real_part_tangent() {
        let geom = Hypersurface::Ellipsoid { a1: 1.0, a2: 2.0 };
        let f = TestFunction::parse("absz1sq").unwrap();
        for p in geom.samples(10).unwrap() {
            let y = vector_yf(&geom, &f, &p, Differentiation::Exact).unwrap();
            assert!(y.contraction < 1e-12 && y.dtheta < 1e-12);
            // real f: 2Re Y_f is tangent to M
            assert!(y.normal < 1e-8);
        }
    }

    #[test]
    fn chi_is_cr_exactly_on_kernel() {
        let geom = Hypersurface::Sphere;
        let pts = geom.samples(30).unwrap();
        let defect = |name: &str, e: f64| {
            let f = TestFunction::parse(name).unwrap().scaled(C64::new(e, 0.0));
            chi_embedding(&geom, &f, &pts, Differentiation::Exact).unwrap().defect.max
        };
        assert!(defect("z1", 0.01) < 1e-6);
        let (a, b) = (defect("z1barsq", 0.01), defect("z1barsq", 0.005));
        assert!(a > 1e-3 && ((a / b).log2() - 1.0).abs() < 0.1);
        let big = TestFunction::parse("one").unwrap().scaled(C64::new(10.0, 0.0));
        assert!(matches!(chi_embedding(&geom, &big, &pts, Differentiation::Exact), Err(CrError::Tubular)));
    }

    #[test]
    fn transport_matches_frak_d() {
        for geom in [Hypersurface::Sphere, Hypersurface::Ellipsoid { a1: 1.0, a2: 2.0 }] {
            for p in geom.samples(4).unwrap() {
                for name in ["z1barsq", "random-quadratic:seed=11"] {
                    let t = tangency_check(&geom, &TestFunction::parse(name).unwrap(), &p, 1e-3).unwrap();
                    assert!(t.route_agreement < 1e-10);
                    assert!(t.order > 1.8 && t.errors[1] < 1e-4, "{geom} {name}: {t:?}");
                }
            }
        }
    }
}
