use crate::error::{CrError, Result};
use crate::fields::{apply_vector, Chart, CoordForm, Field};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Threshold below which |θ∧dθ| counts as degenerate.
pub const CONTACT_FLOOR: f64 = 1e-12;
/// Allowed |θ¹(T)| relative to |θ¹| for a raw (1,0)-form.
pub const ANNIHILATION_TOL: f64 = 1e-8;

/// Direction of a covariant derivative.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dir {
    /// Along Z₁ (raises weight by one).
    One,
    /// Along Z₁̄ (lowers weight by one).
    Bar,
    /// Along T.
    Zero,
}

/// Max-norm residuals of the defining identities of a solved structure.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct StructureResiduals {
    /// dθ − iθ¹∧θ¹̄
    pub normalization: f64,
    /// |θ(T) − 1|, |T⌟dθ|, |θ¹(T)| combined.
    pub reeb: f64,
    /// dθ¹ − θ¹∧ω₁¹ − A¹₁̄ θ∧θ¹̄
    pub structure: f64,
    /// Real part of ω₁¹(T) before projection.
    pub re_omega0: f64,
    /// Imaginary part of W before projection.
    pub im_w: f64,
    /// dω₁¹ − Wθ¹∧θ¹̄ − 2i Im(A₁₁,₁̄ θ¹∧θ)
    pub curvature: f64,
}

impl StructureResiduals {
    pub fn max(&self) -> f64 {
        [self.normalization, self.reeb, self.structure, self.re_omega0, self.im_w, self.curvature]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

/// Contact form, unitary coframe and the derived connection, torsion and curvature.
#[derive(Clone, Debug)]
pub struct Structure {
    pub chart: Arc<Chart>,
    pub theta: CoordForm,
    pub theta1: CoordForm,
    /// Reeb field T in frame components.
    pub reeb: Vec<Field>,
    pub z1: Vec<Field>,
    pub z1bar: Vec<Field>,
    /// ω₁¹(T), ω₁¹(Z₁), ω₁¹(Z₁̄).
    pub omega0: Field,
    pub omega1: Field,
    pub omega1bar: Field,
    pub omega: CoordForm,
    /// Torsion A₁₁ (weight 2).
    pub a11: Field,
    /// Tanaka–Webster curvature (weight 0, real).
    pub w: Field,
    pub residuals: StructureResiduals,
}

fn cross(a: &[Field], b: &[Field]) -> Vec<Field> {
    vec![
        &a[1] * &b[2] - &a[2] * &b[1],
        &a[2] * &b[0] - &a[0] * &b[2],
        &a[0] * &b[1] - &a[1] * &b[0],
    ]
}

fn dot3(a: &[Field], b: &[Field]) -> Field {
    &a[0] * &b[0] + &a[1] * &b[1] + &a[2] * &b[2]
}

fn coeffs(f: &CoordForm) -> Vec<Field> {
    (0..3).map(|a| f.coeff(a).clone()).collect()
}

fn require_3d(chart: &Chart) -> Result<()> {
    if chart.dim() != 3 {
        return Err(CrError::Unsupported(format!("structures live on 3-dimensional charts, got {}", chart.kind())));
    }
    Ok(())
}

/// Reeb field of a contact form from the kernel of dθ, normalized by θ(T) = 1.
pub fn reeb_field(theta: &CoordForm) -> Result<Vec<Field>> {
    require_3d(theta.chart())?;
    let dt = theta.d()?;
    let v = vec![dt.get(0b110).clone(), -dt.get(0b101), dt.get(0b011).clone()];
    let th = theta.eval1(&v);
    if th.min_abs() < CONTACT_FLOOR {
        return Err(CrError::DegenerateContact(th.min_abs()));
    }
    let inv = th.recip();
    Ok(v.iter().map(|c| (c * &inv).with_weight(0)).collect())
}

/// Rescale a raw (1,0)-form by a positive function so that dθ = iθ¹∧θ¹̄.
///
/// Returns the normalized form and the scale factor.
pub fn admissible_coframe(theta: &CoordForm, raw: &CoordForm) -> Result<(CoordForm, Field)> {
    require_3d(theta.chart())?;
    let t = reeb_field(theta)?;
    let leak = raw.eval1(&t).norm_inf();
    let size = raw.norm_inf().max(f64::MIN_POSITIVE);
    if leak > ANNIHILATION_TOL * size {
        return Err(CrError::CoframeResidual(leak / size));
    }
    let dtheta = theta.d()?;
    let vol = theta.wedge(&dtheta)?.top()?.clone();
    if vol.min_abs() < CONTACT_FLOOR {
        return Err(CrError::DegenerateContact(vol.min_abs()));
    }
    let refv = theta.wedge(&raw.wedge(&raw.conj())?)?.top()?.scale(I);
    let s2 = vol.div(&refv).re();
    let s = s2.sqrt();
    Ok((raw.mul_field(&s), s))
}

/// Dual frame (T, Z₁) of the coframe (θ, θ¹, θ¹̄).
pub fn dual_frame(theta: &CoordForm, theta1: &CoordForm) -> Result<(Vec<Field>, Vec<Field>)> {
    let r0 = coeffs(theta);
    let r1 = coeffs(theta1);
    let r2: Vec<Field> = r1.iter().map(|f| f.conj().with_weight(0)).collect();
    let c0 = cross(&r1, &r2);
    let c1 = cross(&r2, &r0);
    let det = dot3(&r0, &c0);
    if det.min_abs() < CONTACT_FLOOR {
        return Err(CrError::SingularCoframe(det.min_abs()));
    }
    let inv = det.recip();
    let t = c0.iter().map(|c| (c * &inv).with_weight(0)).collect();
    let z = c1.iter().map(|c| (c * &inv).with_weight(0)).collect();
    Ok((t, z))
}

impl Structure {
    /// Solve the structure equations for a normalized coframe.
    pub fn solve(theta: &CoordForm, theta1: &CoordForm) -> Result<Structure> {
        let chart = theta.chart().clone();
        require_3d(&chart)?;
        let (reeb, z1) = dual_frame(theta, theta1)?;
        let z1bar: Vec<Field> = z1.iter().map(|f| f.conj().with_weight(0)).collect();
        let theta1bar = theta1.conj();
        let dtheta = theta.d()?;
        let dtheta1 = theta1.d()?;

        let c01 = dtheta1.eval2(&reeb, &z1);
        let c01b = dtheta1.eval2(&reeb, &z1bar);
        let c11b = dtheta1.eval2(&z1, &z1bar);

        let a1b1b = c01b.with_weight(-2);
        let a11 = a1b1b.conj();
        let raw0 = -&c01;
        let re_omega0 = raw0.re().norm_inf();
        let scale = 1.0 + c01.norm_inf();
        if re_omega0 > 1e-6 * scale {
            return Err(CrError::Inconsistent(re_omega0));
        }
        let omega0 = raw0.im().scale(I);
        let omega1bar = c11b.clone();
        let omega1 = -&c11b.conj().with_weight(0);
        let omega = theta.mul_field(&omega0).add(&theta1.mul_field(&omega1))?.add(&theta1bar.mul_field(&omega1bar))?;

        let domega = omega.d()?;
        let w_raw = domega.eval2(&z1, &z1bar);
        let im_w = w_raw.im().norm_inf();
        let w = w_raw.re().with_weight(0);

        let mut s = Structure {
            chart,
            theta: theta.clone(),
            theta1: theta1.clone(),
            reeb,
            z1,
            z1bar,
            omega0,
            omega1,
            omega1bar,
            omega,
            a11,
            w,
            residuals: StructureResiduals::default(),
        };

        let normalization = dtheta.sub(&theta1.wedge(&theta1bar)?.scale(I))?.norm_inf();
        let one = Field::real_constant(&s.chart, 1.0);
        let reeb_res = (&theta.eval1(&s.reeb) - &one)
            .norm_inf()
            .max(theta1.eval1(&s.reeb).norm_inf())
            .max(dtheta.eval2(&s.reeb, &s.z1).norm_inf());
        let torsion_term = theta.wedge(&theta1bar)?.mul_field(&a1b1b);
        let structure = dtheta1.sub(&theta1.wedge(&s.omega)?)?.sub(&torsion_term)?.norm_inf();
        let a_bar = s.cov(&s.a11, Dir::Bar)?;
        let th1_th = theta1.wedge(theta)?;
        let th1b_th = theta1bar.wedge(theta)?;
        let curv = domega
            .sub(&theta1.wedge(&theta1bar)?.mul_field(&s.w))?
            .sub(&th1_th.mul_field(&a_bar))?
            .add(&th1b_th.mul_field(&a_bar.conj()))?
            .norm_inf();
        s.residuals = StructureResiduals {
            normalization,
            reeb: reeb_res,
            structure,
            re_omega0,
            im_w,
            curvature: curv,
        };
        Ok(s)
    }

    /// Raw (1,0)-form to structure: normalize then solve.
    pub fn from_raw(theta: &CoordForm, raw: &CoordForm) -> Result<Structure> {
        let (theta1, _) = admissible_coframe(theta, raw)?;
        Self::solve(theta, &theta1)
    }

    pub fn theta1bar(&self) -> CoordForm {
        self.theta1.conj()
    }

    /// A₁̄₁̄ = conj(A₁₁), weight −2.
    pub fn a1b1b(&self) -> Field {
        self.a11.conj()
    }

    /// Covariant derivative of a weight-k coefficient in one direction.
    pub fn cov(&self, c: &Field, dir: Dir) -> Result<Field> {
        let k = c.weight();
        let (vec, om, dk) = match dir {
            Dir::One => (&self.z1, &self.omega1, 1),
            Dir::Bar => (&self.z1bar, &self.omega1bar, -1),
            Dir::Zero => (&self.reeb, &self.omega0, 0),
        };
        let d = apply_vector(vec, c)?;
        let out = if k == 0 { d } else { &d - &(om * c).scale_re(k as f64) };
        Ok(out.with_weight(k + dk))
    }

    /// Iterated covariant derivative, indices applied left to right.
    pub fn cov_path(&self, c: &Field, dirs: &[Dir]) -> Result<Field> {
        let mut cur = c.clone();
        for &d in dirs {
            cur = self.cov(&cur, d)?;
        }
        Ok(cur)
    }

    /// Contact volume θ∧dθ, oriented so that its mean coefficient is positive.
    pub fn volume(&self) -> Result<CoordForm> {
        let v = self.theta.wedge(&self.theta.d()?)?;
        let sign = if v.top()?.mean().re < 0.0 { -1.0 } else { 1.0 };
        Ok(v.scale(C64::new(sign, 0.0)))
    }
}
