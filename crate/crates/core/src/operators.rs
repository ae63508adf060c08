//! Cartan tensor, D_J and its adjoint, F_J, 𝔇_J, L_α, contact Hamiltonian fields and the action.

use crate::error::Result;
use crate::fields::{integrate, CoordForm, Field};
use crate::phstructure::transport::{EndoMatrix, Transport};
use crate::phstructure::{Dir, Structure};
use num_complex::Complex64 as C64;

pub use crate::phstructure::transport::EndoMatrix as FrameMatrix;

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Frame components of an endomorphism of ξ:
/// E = E₁₁ θ¹⊗Z₁̄ + E₁₁̄ θ¹⊗Z₁ + E₁̄₁ θ¹̄⊗Z₁̄ + E₁̄₁̄ θ¹̄⊗Z₁.
#[derive(Clone, Debug)]
pub struct EndomorphismField {
    pub e11: Field,
    pub e11b: Field,
    pub e1b1: Field,
    pub e1b1b: Field,
}

impl EndomorphismField {
    /// Real endomorphism anticommuting with J, determined by E₁₁.
    pub fn anti_commuting(e11: Field) -> Self {
        let z = Field::zeros(e11.chart());
        let e11 = e11.with_weight(2);
        let e1b1b = e11.conj();
        Self { e11, e11b: z.clone(), e1b1: z, e1b1b }
    }

    /// J itself: E₁₁̄ = i, E₁̄₁ = −i.
    pub fn complex_structure(s: &Structure) -> Self {
        let z = Field::zeros(&s.chart);
        Self {
            e11: z.clone().with_weight(2),
            e11b: Field::constant(&s.chart, I),
            e1b1: Field::constant(&s.chart, -I),
            e1b1b: z.with_weight(-2),
        }
    }

    /// Components of a frame-matrix endomorphism in the frame of `s`.
    pub fn from_matrix(k: &EndoMatrix, s: &Structure) -> Self {
        let kz = k.apply(&s.z1);
        let kzb = k.apply(&s.z1bar);
        let th1b = s.theta1bar();
        Self {
            e11: th1b.eval1(&kz).with_weight(2),
            e11b: s.theta1.eval1(&kz).with_weight(0),
            e1b1: th1b.eval1(&kzb).with_weight(0),
            e1b1b: s.theta1.eval1(&kzb).with_weight(-2),
        }
    }

    /// J∘E.
    pub fn compose_j(&self) -> Self {
        Self {
            e11: self.e11.scale(-I),
            e11b: self.e11b.scale(I),
            e1b1: self.e1b1.scale(-I),
            e1b1b: self.e1b1b.scale(I),
        }
    }

    pub fn add(&self, o: &Self) -> Self {
        Self { e11: &self.e11 + &o.e11, e11b: &self.e11b + &o.e11b, e1b1: &self.e1b1 + &o.e1b1, e1b1b: &self.e1b1b + &o.e1b1b }
    }

    pub fn sub(&self, o: &Self) -> Self {
        Self { e11: &self.e11 - &o.e11, e11b: &self.e11b - &o.e11b, e1b1: &self.e1b1 - &o.e1b1, e1b1b: &self.e1b1b - &o.e1b1b }
    }

    pub fn max_norm(&self) -> f64 {
        [&self.e11, &self.e11b, &self.e1b1, &self.e1b1b].iter().map(|f| f.norm_inf()).fold(0.0, f64::max)
    }

    /// |E∘J + J∘E|: the 11̄ and 1̄1 components.
    pub fn anticommutator_norm(&self) -> f64 {
        self.e11b.norm_inf().max(self.e1b1.norm_inf())
    }

    /// |K² + I| for a candidate complex structure.
    pub fn square_defect(&self) -> f64 {
        // On the basis (Z₁, Z₁̄): K Z₁ = K₁₁̄ Z₁ + K₁₁ Z₁̄, K Z₁̄ = K₁̄₁̄ Z₁ + K₁̄₁ Z₁̄.
        let one = Field::real_constant(self.e11.chart(), 1.0);
        let a = &(&(&self.e11b * &self.e11b) + &(&self.e11 * &self.e1b1b)) + &one;
        let b = &(&self.e11b * &self.e11) + &(&self.e11 * &self.e1b1);
        let c = &(&self.e1b1b * &self.e11b) + &(&self.e1b1 * &self.e1b1b);
        let d = &(&(&self.e1b1 * &self.e1b1) + &(&self.e1b1b * &self.e11)) + &one;
        [a, b, c, d].iter().map(|f| f.norm_inf()).fold(0.0, f64::max)
    }
}

/// Q₁₁ = W,₁₁/6 + (i/2)WA₁₁ − A₁₁,₀ − (2i/3)A₁₁,₁̄₁.
pub fn cartan_tensor(s: &Structure) -> Result<Field> {
    use Dir::*;
    let w11 = s.cov_path(&s.w, &[One, One])?.scale_re(1.0 / 6.0);
    let wa = (&s.w * &s.a11).scale(I * 0.5);
    let a0 = s.cov(&s.a11, Zero)?;
    let a1b1 = s.cov_path(&s.a11, &[Bar, One])?.scale(I * (2.0 / 3.0));
    Ok((&(&(&w11 + &wa) - &a0) - &a1b1).with_weight(2))
}

/// (D_J f)₁₁ = f,₁₁ + iA₁₁f.
pub fn dj11(s: &Structure, f: &Field) -> Result<Field> {
    let f = f.clone().with_weight(0);
    let f11 = s.cov_path(&f, &[Dir::One, Dir::One])?;
    Ok((&f11 + &(&s.a11 * &f).scale(I)).with_weight(2))
}

pub fn op_dj(s: &Structure, f: &Field) -> Result<EndomorphismField> {
    Ok(EndomorphismField::anti_commuting(dj11(s, &f.re())?))
}

/// D_J*E = E₁₁,₁̄₁̄ + E₁̄₁̄,₁₁ − iA₁̄₁̄E₁₁ + iA₁₁E₁̄₁̄.
pub fn op_dj_star(s: &Structure, e: &EndomorphismField) -> Result<Field> {
    use Dir::*;
    let a = s.cov_path(&e.e11, &[Bar, Bar])?;
    let b = s.cov_path(&e.e1b1b, &[One, One])?;
    let c = (&s.a1b1b() * &e.e11).scale(-I);
    let d = (&s.a11 * &e.e1b1b).scale(I);
    Ok((&(&(&a + &b) + &c) + &d).with_weight(0))
}

/// F_J K = (iK₁₁̄K₁₁,₁̄₁̄ + iK₁̄₁̄K₁₁,₁̄₁) + conjugate.
pub fn op_fj(s: &Structure, k: &EndomorphismField) -> Result<Field> {
    use Dir::*;
    let k11 = k.e11.clone().with_weight(2);
    let t1 = &k.e11b * &s.cov_path(&k11, &[Bar, Bar])?;
    let t2 = &k.e1b1b * &s.cov_path(&k11, &[Bar, One])?;
    let z = (&t1 + &t2).scale(I);
    Ok((&z + &z.conj()).with_weight(0))
}

/// (𝔇_J h)₁̄₁̄ = h,₁̄₁̄ − iA₁̄₁̄h (weight −2).
pub fn op_frak_d(s: &Structure, h: &Field) -> Result<Field> {
    let h = h.clone().with_weight(0);
    let hbb = s.cov_path(&h, &[Dir::Bar, Dir::Bar])?;
    Ok((&hbb - &(&s.a1b1b() * &h).scale(I)).with_weight(-2))
}

/// 2Re𝔇_J h as an endomorphism: E₁̄₁̄ = 𝔇h, E₁₁ = conj(𝔇h).
pub fn two_re_frak_d(s: &Structure, h: &Field) -> Result<EndomorphismField> {
    let d = op_frak_d(s, h)?;
    Ok(EndomorphismField::anti_commuting(d.conj()))
}

/// L_α C = −C,₁₁̄ − C,₁̄₁ + iαC,₀ on weight-2 fields.
pub fn op_l_alpha(s: &Structure, c: &Field, alpha: C64) -> Result<Field> {
    use Dir::*;
    let c = c.clone().with_weight(2);
    let a = s.cov_path(&c, &[One, Bar])?;
    let b = s.cov_path(&c, &[Bar, One])?;
    let t = s.cov(&c, Zero)?.scale(I * alpha);
    Ok((&t - &(&a + &b)).with_weight(2))
}

/// X_f = −fT + i(Z₁f)Z₁̄ − i(Z₁̄f)Z₁ in frame components.
pub fn contact_field(s: &Structure, f: &Field) -> Result<Vec<Field>> {
    let f = f.re().with_weight(0);
    let z1f = s.cov(&f, Dir::One)?.with_weight(0);
    let zbf = s.cov(&f, Dir::Bar)?.with_weight(0);
    Ok((0..3)
        .map(|a| {
            let t = -&(&f * &s.reeb[a]);
            let u = (&z1f * &s.z1bar[a]).scale(I);
            let v = (&zbf * &s.z1[a]).scale(I);
            (&(&t + &u) - &v).re().with_weight(0)
        })
        .collect())
}

/// ½ L_{X_f} J by Lie transport with step `eps` (coordinate frames only).
pub fn half_lie_of_j(s: &Structure, f: &Field, eps: f64) -> Result<EndomorphismField> {
    let x = contact_field(s, f)?;
    let j = EndoMatrix::of_structure(s);
    let l = Transport::new(&j, &x)?.lie_derivative(eps)?;
    let e = EndomorphismField::from_matrix(&l, s);
    Ok(EndomorphismField {
        e11: e.e11.scale_re(0.5),
        e11b: e.e11b.scale_re(0.5),
        e1b1: e.e1b1.scale_re(0.5),
        e1b1b: e.e1b1b.scale_re(0.5),
    })
}

/// −∫ W θ∧dθ with the positively oriented contact volume.
pub fn action_energy(s: &Structure) -> Result<f64> {
    Ok(-integrate(&s.w, &s.volume()?)?)
}

/// ∫ f·conj(g) θ∧dθ.
pub fn pair_functions(f: &Field, g: &Field, vol: &CoordForm) -> Result<C64> {
    let p = f * &g.conj();
    let re = integrate(&p.re(), vol)?;
    let im = integrate(&p.im(), vol)?;
    Ok(C64::new(re, im))
}

/// 2Re∫E₁₁ conj(F₁₁) θ∧dθ.
pub fn pair_endomorphisms(e: &EndomorphismField, f: &EndomorphismField, vol: &CoordForm) -> Result<f64> {
    Ok(2.0 * pair_functions(&e.e11, &f.e11, vol)?.re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phstructure::catalog::*;
    use crate::sampling::{band_limited, band_limited_real, rng};

    #[test]
    fn rototranslation_cartan_tensor() {
        for n in [1u32, 2] {
            let s = t3_roto(n, [16; 3]).unwrap().structure().unwrap();
            let q = cartan_tensor(&s).unwrap();
            let want = -3.0 * (n * n) as f64 / 8.0;
            assert!(q.values().iter().all(|v| (v - C64::new(want, 0.0)).norm() < 1e-9), "{:?}", q.value(0));
        }
    }

    #[test]
    fn constants_under_dj() {
        let s = t3_roto(1, [16; 3]).unwrap().structure().unwrap();
        let one = Field::real_constant(&s.chart, 1.0);
        let d = dj11(&s, &one).unwrap();
        assert!(d.dist_inf(&s.a11.scale(I)) < 1e-12);
        let flat = heis_flat(4, 6).unwrap().structure().unwrap();
        assert!(dj11(&flat, &Field::real_constant(&flat.chart, 1.0)).unwrap().norm_inf() < 1e-14);
    }

    #[test]
    fn fj_of_j_vanishes_and_fj_is_real() {
        let s = t3_roto(1, [16; 3]).unwrap().structure().unwrap();
        let j = EndomorphismField::complex_structure(&s);
        assert!(op_fj(&s, &j).unwrap().norm_inf() < 1e-12);
        let k = EndomorphismField::from_matrix(&EndoMatrix::of_structure(&s), &s);
        assert!(k.e11.norm_inf() < 1e-12 && (k.e11b.value(0) - I).norm() < 1e-12);
        let mut r = rng(11);
        let mut kr = EndomorphismField::anti_commuting(band_limited(&s.chart, 2, &mut r));
        kr.e11b = band_limited(&s.chart, 2, &mut r);
        kr.e1b1 = kr.e11b.conj();
        assert!(op_fj(&s, &kr).unwrap().im().norm_inf() < 1e-10);
    }

    #[test]
    fn dj_adjoint_pairing() {
        let mut m = t3_roto(1, [16; 3]).unwrap();
        for amp in [0.0, 0.05] {
            // a deformation makes ω₁¹(Z₁) nonzero, which exposes weight bookkeeping
            m.beta = band_limited(&m.chart, 1, &mut rng(6)).scale_re(amp);
            let s = m.structure().unwrap();
            let vol = s.volume().unwrap();
            let mut r = rng(2);
            let f = band_limited_real(&s.chart, 3, &mut r);
            let e = EndomorphismField::anti_commuting(band_limited(&s.chart, 3, &mut r));
            let lhs = pair_endomorphisms(&op_dj(&s, &f).unwrap(), &e, &vol).unwrap();
            let rhs = pair_functions(&f, &op_dj_star(&s, &e).unwrap(), &vol).unwrap();
            assert!((lhs - rhs.re).abs() < 1e-8 * lhs.abs().max(1.0), "{lhs} {rhs}");
            assert!(rhs.im.abs() < 1e-8 * lhs.abs().max(1.0));
        }
    }

    #[test]
    fn l_alpha_on_torsion_and_constants() {
        let s = t3_roto(2, [16; 3]).unwrap().structure().unwrap();
        assert!(op_l_alpha(&s, &s.a11, C64::new(0.0, 0.0)).unwrap().norm_inf() < 1e-10);
        let flat = heis_flat(4, 6).unwrap().structure().unwrap();
        let c = Field::constant(&flat.chart, C64::new(1.0, 2.0));
        assert!(op_l_alpha(&flat, &c, C64::new(0.3, -1.0)).unwrap().norm_inf() < 1e-14);
    }

    #[test]
    fn energy_of_rototranslation() {
        let s = t3_roto(2, [16; 3]).unwrap().structure().unwrap();
        let want = -(1.0) * 2.0 * (2.0 * std::f64::consts::PI).powi(3);
        assert!((action_energy(&s).unwrap() - want).abs() < 1e-9 * want.abs());
    }

    #[test]
    fn contact_field_of_one_is_minus_reeb() {
        let s = t3_roto(1, [8; 3]).unwrap().structure().unwrap();
        let x = contact_field(&s, &Field::real_constant(&s.chart, 1.0)).unwrap();
        for a in 0..3 {
            assert!(x[a].dist_inf(&-&s.reeb[a]) < 1e-14);
        }
    }
    #[test]
    fn dj_is_half_lie_derivative_along_contact_field() {
        let s = t3_roto(1, [16; 3]).unwrap().structure().unwrap();
        let f = band_limited_real(&s.chart, 2, &mut rng(8)).scale_re(0.5);
        let want = dj11(&s, &f).unwrap();
        let err = |eps: f64| (&half_lie_of_j(&s, &f, eps).unwrap().e11 - &want).norm_inf();
        let (e1, e2) = (err(2e-3), err(1e-3));
        assert!(e2 < 1e-4 && (e1 / e2).log2() > 1.8, "{e1} {e2}");
        assert!(half_lie_of_j(&s, &f, 1e-3).unwrap().anticommutator_norm() < 1e-4);
    }

    #[test]
    fn two_re_frak_d_splits_into_dj() {
        let s = t3_roto(1, [16; 3]).unwrap().structure().unwrap();
        let mut r = rng(4);
        let g = band_limited_real(&s.chart, 3, &mut r);
        let f = band_limited_real(&s.chart, 3, &mut r);
        let h = &g + &f.scale(I);
        let lhs = two_re_frak_d(&s, &h).unwrap();
        let rhs = op_dj(&s, &f).unwrap().compose_j().add(&op_dj(&s, &g).unwrap());
        assert!(lhs.sub(&rhs).max_norm() < 1e-10);
    }
}
