use super::structure::{Dir, Structure};
use super::transport::{EndoMatrix, Transport};
use crate::error::Result;
use crate::fields::{Field, Frame};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

/// Max-norm residuals of the commutation relations, the Bianchi identity and L_T J = 2J∘A.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct IdentityReport {
    /// C,01 − C,10 − (C,1̄ A₁₁ − k C A₁₁,₁̄), maximized over test fields and weights.
    pub commute_01: f64,
    /// C,01̄ − C,1̄0 − (C,1 A₁̄₁̄ + k C A₁̄₁̄,₁).
    pub commute_0b: f64,
    /// C,11̄ − C,1̄1 − (i C,0 + k C W).
    pub commute_1b: f64,
    /// W,0 − A₁₁,₁̄₁̄ − A₁̄₁̄,₁₁.
    pub bianchi: f64,
    /// |(L_T J − 2J∘A)| on the 11 and 11̄ components; absent on non-coordinate frames.
    pub reeb_lie: Option<f64>,
}

impl IdentityReport {
    pub fn max(&self) -> f64 {
        [self.commute_01, self.commute_0b, self.commute_1b, self.bianchi, self.reeb_lie.unwrap_or(0.0)]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

/// Residuals of the three commutation relations for one coefficient of weight `c.weight()`.
pub fn commutation_residuals(s: &Structure, c: &Field) -> Result<[f64; 3]> {
    use Dir::*;
    let k = c.weight() as f64;
    let i = C64::new(0.0, 1.0);
    let a = &s.a11;
    let ab = s.a1b1b();
    let a_1b = s.cov(a, Bar)?;
    let ab_1 = s.cov(&ab, One)?;

    let lhs1 = &s.cov_path(c, &[Zero, One])? - &s.cov_path(c, &[One, Zero])?;
    let rhs1 = &(&s.cov(c, Bar)? * a) - &(c * &a_1b).scale_re(k);
    let lhs2 = &s.cov_path(c, &[Zero, Bar])? - &s.cov_path(c, &[Bar, Zero])?;
    let rhs2 = &(&s.cov(c, One)? * &ab) + &(c * &ab_1).scale_re(k);
    let lhs3 = &s.cov_path(c, &[One, Bar])? - &s.cov_path(c, &[Bar, One])?;
    let rhs3 = &s.cov(c, Zero)?.scale(i) + &(c * &s.w).scale_re(k);
    Ok([(lhs1 - rhs1).norm_inf(), (lhs2 - rhs2).norm_inf(), (lhs3 - rhs3).norm_inf()])
}

/// W,0 − (A₁₁,₁̄₁̄ + A₁̄₁̄,₁₁).
pub fn bianchi_residual(s: &Structure) -> Result<f64> {
    use Dir::*;
    let lhs = s.cov(&s.w, Zero)?;
    let rhs = &s.cov_path(&s.a11, &[Bar, Bar])? + &s.cov_path(&s.a1b1b(), &[One, One])?;
    Ok((lhs - rhs).norm_inf())
}

/// |L_T J − 2J∘A| on frame components, by Lie transport with step `eps`.
pub fn reeb_lie_residual(s: &Structure, eps: f64) -> Result<f64> {
    let j = EndoMatrix::of_structure(s);
    let l = Transport::new(&j, &s.reeb)?.lie_derivative(eps)?;
    // 2J∘A has 11-component −2iA₁₁ and vanishing 11̄-component.
    let want11 = s.a11.scale(C64::new(0.0, -2.0));
    let r11 = (l.component11(s) - want11).norm_inf();
    let r1b = l.component11bar(s).norm_inf();
    Ok(r11.max(r1b))
}

/// Check the commutation relations on each test field at weights −2..=2, the Bianchi identity,
/// and (on coordinate frames) the Reeb-flow identity with transport step `eps`.
pub fn verify_identities(s: &Structure, test_fields: &[Field], eps: f64) -> Result<IdentityReport> {
    let mut r = IdentityReport { bianchi: bianchi_residual(s)?, ..Default::default() };
    for f in test_fields {
        for k in -2..=2 {
            let c = f.clone().with_weight(k);
            let [a, b, d] = commutation_residuals(s, &c)?;
            r.commute_01 = r.commute_01.max(a);
            r.commute_0b = r.commute_0b.max(b);
            r.commute_1b = r.commute_1b.max(d);
        }
    }
    if s.chart.frame() == Frame::Coordinate {
        r.reeb_lie = Some(reeb_lie_residual(s, eps)?);
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phstructure::catalog::*;
    use crate::sampling::{band_limited, rng};

    #[test]
    fn flat_heisenberg_passes_everything() {
        let s = heis_flat(6, 6).unwrap().structure().unwrap();
        let js = s.chart.jets().unwrap().clone();
        let f = Field::from_jets(&s.chart, |p| {
            let x = crate::jet::Jet::variable(&js, 0, p[0]);
            let y = crate::jet::Jet::variable(&js, 1, p[1]);
            (&x + &y).scale(C64::new(0.0, 1.0)).exp().coefficients().to_vec()
        });
        let r = verify_identities(&s, &[f], 1e-3).unwrap();
        assert!(r.max() < 1e-10, "{r:?}");
    }

    #[test]
    fn rototranslation_commutators() {
        let s = t3_roto(1, [16; 3]).unwrap().structure().unwrap();
        let f = band_limited(&s.chart, 2, &mut rng(3));
        let r = verify_identities(&s, &[f], 1e-3).unwrap();
        assert!(r.commute_01 < 1e-8 && r.commute_0b < 1e-8 && r.commute_1b < 1e-8, "{r:?}");
        assert!(r.bianchi < 1e-10);
        assert!(r.reeb_lie.unwrap() < 1e-5, "{r:?}");
    }

    #[test]
    fn invariant_nilmanifold_commutators() {
        let e = crate::phstructure::expr::Expr::parse("0.1*exp(i*x)").unwrap();
        let s = nil_invariant(&e, &[16, 16]).unwrap().structure().unwrap();
        assert!(s.a11.norm_inf() < 1e-10);
        let f = band_limited(&s.chart, 2, &mut rng(5));
        let r = verify_identities(&s, &[f], 1e-3).unwrap();
        assert!(r.max() < 1e-8, "{r:?}");
    }
}
