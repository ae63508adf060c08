//! Admissible coframes, the structure equations, covariant calculus and the model catalog.

pub mod catalog;
pub mod expr;
mod identities;
mod structure;
pub mod transport;

pub use catalog::{model, DeformationState, GeometrySpec, Model};
pub use identities::{bianchi_residual, commutation_residuals, reeb_lie_residual, verify_identities, IdentityReport};
pub use structure::{admissible_coframe, dual_frame, reeb_field, Dir, Structure, StructureResiduals};

use crate::error::Result;
use crate::fields::Field;

/// Structure of the same CR structure with contact form e^{2f}θ.
pub fn rescale_contact_form(s: &Structure, f: &Field) -> Result<Structure> {
    let f = f.re().with_weight(0);
    let theta = s.theta.mul_field(&f.scale_re(2.0).exp());
    let t = reeb_field(&theta)?;
    let ratio = s.theta1.eval1(&t).div(&s.theta.eval1(&t));
    let raw = s.theta1.sub(&s.theta.mul_field(&ratio))?;
    let (theta1, _) = admissible_coframe(&theta, &raw)?;
    Structure::solve(&theta, &theta1)
}

#[cfg(test)]
mod tests {
    use super::catalog::*;
    use super::*;
    use crate::fields::Chart;
    use num_complex::Complex64 as C64;

    fn close(f: &Field, c: C64, tol: f64) -> bool {
        f.values().iter().all(|v| (v - c).norm() <= tol)
    }

    #[test]
    fn rototranslation_scale_is_sqrt_half_n() {
        for n in [1u32, 2, 3] {
            let m = t3_roto(n, [16; 3]).unwrap();
            let s = (n as f64 / 2.0).sqrt();
            // dz coefficient of the normalized form equals the scale
            assert!(close(m.theta1.coeff(2), C64::new(s, 0.0), 1e-12));
        }
    }

    #[test]
    fn rototranslation_invariants() {
        let n = 2.0;
        let s = t3_roto(2, [16; 3]).unwrap().structure().unwrap();
        assert!(s.residuals.max() < 1e-10, "{:?}", s.residuals);
        assert!(close(&s.w, C64::new(n / 2.0, 0.0), 1e-10));
        assert!(s.a11.values().iter().all(|v| (v.norm() - n / 2.0).abs() < 1e-10));
        assert!(close(&s.omega0, C64::new(0.0, -n / 2.0), 1e-10));
        assert!(s.omega1.norm_inf() < 1e-10);
        let a0 = s.cov(&s.a11, Dir::Zero).unwrap();
        let want = s.a11.scale(C64::new(0.0, n));
        assert!(a0.dist_inf(&want) < 1e-10);
        assert!(s.cov(&s.a11, Dir::Bar).unwrap().norm_inf() < 1e-10);
    }

    #[test]
    fn heisenberg_pointset_is_flat() {
        let m = heis_flat(8, 6).unwrap();
        assert!(close(m.theta1.coeff(0), C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0), 1e-14));
        let s = m.structure().unwrap();
        assert!(s.a11.norm_inf() < 1e-12 && s.w.norm_inf() < 1e-12);
        assert!(s.omega0.norm_inf() < 1e-12 && s.omega1.norm_inf() < 1e-12);
    }

    #[test]
    fn normalized_input_is_fixed() {
        let m = t3_roto(1, [8; 3]).unwrap();
        let (again, scale) = admissible_coframe(&m.theta, &m.theta1).unwrap();
        assert!(close(&scale, C64::new(1.0, 0.0), 1e-13));
        assert!(again.sub(&m.theta1).unwrap().norm_inf() < 1e-13);
    }

    #[test]
    fn su2_is_round() {
        let s = s3_homogeneous().unwrap().structure().unwrap();
        assert!(s.a11.norm_inf() < 1e-14);
        assert!(close(&s.w, C64::new(1.0, 0.0), 1e-14));
    }

    #[test]
    fn degenerate_contact_form_is_rejected() {
        let c = Chart::periodic3([8; 3], [1.0; 3]).unwrap();
        let z = Field::zeros(&c);
        let dx = crate::fields::CoordForm::one_form(&c, vec![Field::real_constant(&c, 1.0), z.clone(), z.clone()]);
        let raw = crate::fields::CoordForm::one_form(&c, vec![z.clone(), Field::real_constant(&c, 1.0), Field::constant(&c, C64::new(0.0, 1.0))]);
        assert!(admissible_coframe(&dx, &raw).is_err());
    }

    #[test]
    fn constant_rescale_scales_curvature() {
        let s = t3_roto(1, [16; 3]).unwrap().structure().unwrap();
        let c = 0.3;
        let r = rescale_contact_form(&s, &Field::real_constant(&s.chart, c)).unwrap();
        let k = (-2.0 * c).exp();
        assert!(close(&r.w, C64::new(0.5 * k, 0.0), 1e-10));
        assert!(r.a11.values().iter().all(|v| (v.norm() - 0.5 * k).abs() < 1e-10));
        let same = rescale_contact_form(&s, &Field::zeros(&s.chart)).unwrap();
        assert!(same.a11.dist_inf(&s.a11) < 1e-12 && same.w.dist_inf(&s.w) < 1e-12);
    }

    #[test]
    fn catalog_strings() {
        let g = GeometrySpec::parse("nil-invariant:beta=0.1*exp(i*x)@16x16").unwrap();
        assert_eq!(g.dims, Some(vec![16, 16]));
        assert_eq!(g.get("beta"), Some("0.1*exp(i*x)"));
        assert!(model("t3-roto:n=0").is_err());
        assert!(model("t3-roto:m=1").is_err());
        assert!(model("klein-bottle").is_err());
        let w = model("t3-roto:n=2@16").unwrap().structure().unwrap().w;
        assert!(close(&w, C64::new(1.0, 0.0), 1e-10));
    }
}
