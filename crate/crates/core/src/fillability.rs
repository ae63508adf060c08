//! Fillability certificates u with u,₁₁ + iA₁₁u = iE₁₁, the ambient almost complex structure on
//! M × [t₀, t₁] built from a flow history, and the algebraic jet-matching problem.

use crate::error::{CrError, Result};
use crate::fields::{Axis, Chart, CoordForm, Field, Frame};
use crate::operators::pair_functions;
use crate::flows::{Flow, FlowState};
use crate::phstructure::{Dir, Structure};
use nalgebra::{DMatrix, DVector, Matrix4};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use std::sync::Arc;

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Iteration controls for the certificate solve.
#[derive(Clone, Debug)]
pub struct CertificateOptions {
    /// Stop when ‖b − Lu‖₂ ≤ tol·‖b‖₂.
    pub tol: f64,
    /// A stalled iteration still counts as a certificate when ‖b − Lu‖₂ ≤ accept·‖b‖₂.
    pub accept: f64,
    pub max_iter: usize,
    /// Give up when the best residual improved by less than 1% over this many iterations.
    pub stall_window: usize,
    pub initial: Option<Field>,
}

impl Default for CertificateOptions {
    fn default() -> Self {
        Self { tol: 1e-13, accept: 1e-8, max_iter: 2000, stall_window: 200, initial: None }
    }
}

/// A solution attempt of u,₁₁ + iA₁₁u = iE₁₁ on one slice.
#[derive(Clone, Debug)]
pub struct Certificate {
    pub u: Field,
    /// Max norm of the residual, recomputed with covariant derivatives.
    pub residual_max: f64,
    /// L² norm of the residual against the contact volume.
    pub residual_l2: f64,
    /// Max norm of b − Lu as seen by the solver's own operator.
    pub solver_residual: f64,
    /// min |Re u|.
    pub margin: f64,
    pub iterations: usize,
    /// False when the iteration stalled above tolerance: no certificate at this tolerance.
    pub converged: bool,
}

/// Certificate residual u,₁₁ + iA₁₁u − iE₁₁ (weight 2).
pub fn certificate_residual(s: &Structure, e11: &Field, u: &Field) -> Result<Field> {
    let u = u.clone().with_weight(0);
    let u11 = s.cov_path(&u, &[Dir::One, Dir::One])?;
    let lhs = &u11 + &(&s.a11 * &u).scale(I);
    Ok((&lhs - &e11.scale(I)).with_weight(2))
}

/// The map u ↦ Z₁Z₁u − ω₁Z₁u + iA₁₁u on raw nodal data, with its exact adjoint for Σ conj(a)·b.
struct CertificateOperator {
    chart: Arc<Chart>,
    z1: Vec<Vec<C64>>,
    omega1: Vec<C64>,
    ia: Vec<C64>,
}

impl CertificateOperator {
    fn new(s: &Structure) -> Result<Self> {
        let chart = s.chart.clone();
        if !chart.is_grid() || chart.axes().iter().any(|a| matches!(a, Axis::Interval { .. })) {
            return Err(CrError::Unsupported(format!("certificate solve on a {} chart", chart.kind())));
        }
        Ok(Self {
            z1: s.z1.iter().map(|f| f.values()).collect(),
            omega1: s.omega1.values(),
            ia: s.a11.scale(I).values(),
            chart,
        })
    }

    fn z(&self, v: &[C64]) -> Result<Vec<C64>> {
        let mut out = vec![C64::new(0.0, 0.0); v.len()];
        for (a, za) in self.z1.iter().enumerate() {
            let d = self.chart.frame_derivative(v, a)?;
            out.par_iter_mut().zip(d.par_iter().zip(za)).for_each(|(o, (d, z))| *o += z * d);
        }
        Ok(out)
    }

    fn z_adjoint(&self, w: &[C64]) -> Result<Vec<C64>> {
        let mut out = vec![C64::new(0.0, 0.0); w.len()];
        for (a, za) in self.z1.iter().enumerate() {
            let m: Vec<C64> = w.par_iter().zip(za).map(|(w, z)| z.conj() * w).collect();
            let d = self.chart.frame_derivative_adjoint(&m, a)?;
            out.par_iter_mut().zip(d.par_iter()).for_each(|(o, d)| *o += d);
        }
        Ok(out)
    }

    fn apply(&self, u: &[C64]) -> Result<Vec<C64>> {
        let u1 = self.z(u)?;
        let mut out = self.z(&u1)?;
        out.par_iter_mut().enumerate().for_each(|(i, o)| *o += self.ia[i] * u[i] - self.omega1[i] * u1[i]);
        Ok(out)
    }

    fn adjoint(&self, w: &[C64]) -> Result<Vec<C64>> {
        let mut v = self.z_adjoint(w)?;
        v.par_iter_mut().enumerate().for_each(|(i, x)| *x -= self.omega1[i].conj() * w[i]);
        let mut out = self.z_adjoint(&v)?;
        out.par_iter_mut().enumerate().for_each(|(i, o)| *o += self.ia[i].conj() * w[i]);
        Ok(out)
    }
}

fn norm2(v: &[C64]) -> f64 {
    v.par_iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn axpy(y: &mut [C64], a: C64, x: &[C64]) {
    y.par_iter_mut().zip(x.par_iter()).for_each(|(y, x)| *y += a * x);
}

/// Least-squares solve of u,₁₁ + iA₁₁u = iE₁₁ by conjugate gradients on the normal equations.
///
/// Stagnation above tolerance is an outcome (`converged == false`), not an error.
pub fn solve_certificate(s: &Structure, e11: &Field, opts: &CertificateOptions) -> Result<Certificate> {
    let op = CertificateOperator::new(s)?;
    let b = e11.scale(I).values();
    let mut x = match &opts.initial {
        Some(u) => {
            u.check_chart(e11)?;
            u.values()
        }
        None => vec![C64::new(0.0, 0.0); b.len()],
    };
    let lx = op.apply(&x)?;
    let mut r: Vec<C64> = b.iter().zip(&lx).map(|(b, l)| b - l).collect();
    let bnorm = norm2(&b).max(f64::MIN_POSITIVE);
    let mut z = op.adjoint(&r)?;
    let mut p = z.clone();
    let mut zz = norm2(&z).powi(2);
    let (mut best, mut best_at) = (norm2(&r), 0);
    let mut iterations = 0;
    let mut converged = best <= opts.tol * bnorm;
    while !converged && iterations < opts.max_iter && zz > 0.0 {
        let w = op.apply(&p)?;
        let ww = norm2(&w).powi(2);
        if !(ww > 0.0) {
            break;
        }
        let alpha = C64::new(zz / ww, 0.0);
        axpy(&mut x, alpha, &p);
        axpy(&mut r, -alpha, &w);
        z = op.adjoint(&r)?;
        let zz_new = norm2(&z).powi(2);
        let beta = zz_new / zz;
        zz = zz_new;
        p.par_iter_mut().zip(z.par_iter()).for_each(|(p, z)| *p = z + *p * beta);
        iterations += 1;
        let rn = norm2(&r);
        if rn <= opts.tol * bnorm {
            converged = true;
        } else if rn < 0.99 * best {
            best = rn;
            best_at = iterations;
        } else if iterations - best_at >= opts.stall_window {
            break;
        }
    }
    let u = Field::new(&s.chart, x, 0);
    let lu = op.apply(u.data())?;
    let true_r: Vec<C64> = lu.iter().zip(&b).map(|(l, b)| l - b).collect();
    let solver_residual = true_r.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let res = certificate_residual(s, e11, &u)?;
    let residual_l2 = pair_functions(&res, &res, &s.volume()?)?.re.max(0.0).sqrt();
    let converged = converged || norm2(&true_r) <= opts.accept * bnorm;
    Ok(Certificate {
        margin: u.re().min_abs(),
        residual_max: res.norm_inf(),
        residual_l2,
        solver_residual,
        iterations,
        converged,
        u,
    })
}

/// One time slice of a flow history with its velocity E₁₁.
#[derive(Clone)]
pub struct Slice {
    pub t: f64,
    pub structure: Structure,
    pub e11: Field,
}

/// Run `flow` from `start` and keep `nslices` equally spaced slices over [t, t + horizon],
/// taking `substeps` integrator steps between slices.
pub fn flow_slices(flow: &Flow, start: &FlowState, horizon: f64, nslices: usize, substeps: usize) -> Result<Vec<Slice>> {
    if nslices < 5 {
        return Err(CrError::Slices(format!("need at least 5 slices, got {nslices}")));
    }
    let dt = horizon / ((nslices - 1) * substeps.max(1)) as f64;
    let mut st = start.clone();
    let mut out = Vec::with_capacity(nslices);
    for k in 0..nslices {
        if k > 0 {
            for _ in 0..substeps.max(1) {
                st = flow.step(&st, dt)?;
            }
        }
        let s = flow.structure(&st.beta, &st.lambda)?;
        let (e11, _) = flow.rhs(&s)?;
        out.push(Slice { t: st.t, e11: e11.with_weight(2), structure: s });
    }
    Ok(out)
}

/// a = 1/Re u, b = −Im u/Re u and γ¹ = ia⁻¹b,₁̄ − ia⁻²(b − i)a,₁̄ on one slice.
pub fn ambient_coefficients(s: &Structure, u: &Field) -> Result<(Field, Field, Field)> {
    let f = u.re().with_weight(0);
    let a = f.recip();
    let b = -&u.im().div(&f);
    let ai = a.recip();
    let bm = b.add_constant(-I);
    let t1 = (&ai * &s.cov(&b, Dir::Bar)?).scale(I);
    let t2 = (&(&(&ai * &ai) * &bm) * &s.cov(&a, Dir::Bar)?).scale(I);
    Ok((a, b, (&t1 - &t2).with_weight(-1)))
}

/// γ¹,₁̄ + iE₁̄₁̄ + a⁻¹(b − i)A₁̄₁̄, which vanishes when u is an exact certificate.
pub fn ambient_relation_residual(s: &Structure, e11: &Field, u: &Field) -> Result<Field> {
    let (a, b, gamma) = ambient_coefficients(s, u)?;
    let g1 = s.cov(&gamma, Dir::Bar)?;
    let e = e11.conj().scale(I);
    let t = &(&a.recip() * &b.add_constant(-I)) * &s.a1b1b();
    Ok((&(&g1 + &e) + &t).with_weight(-2))
}

/// Θ¹ = θ¹ + γ¹dt and η = aθ + (b − i)dt in coordinate components on M × [t₀, t₁].
#[derive(Clone, Debug)]
pub struct AmbientStructure {
    pub chart: Arc<Chart>,
    pub a: Field,
    pub b: Field,
    pub gamma: Field,
    pub theta1: CoordForm,
    pub eta: CoordForm,
}

/// Stack per-slice fields into one field on the spacetime chart (time is the fastest axis).
fn stack(chart: &Arc<Chart>, slices: &[Field]) -> Field {
    let nt = slices.len();
    let cols: Vec<Vec<C64>> = slices.iter().map(|f| f.values()).collect();
    let data = (0..chart.nnodes()).map(|i| cols[i % nt][i / nt]).collect();
    Field::new(chart, data, 0)
}

/// Assemble the ambient structure from equally spaced slices and one certificate per slice.
pub fn build_ambient(slices: &[Slice], certs: &[Certificate], delta: f64) -> Result<AmbientStructure> {
    let nt = slices.len();
    if nt < 5 || certs.len() != nt {
        return Err(CrError::Slices(format!("{nt} slices with {} certificates; need ≥ 5 and one each", certs.len())));
    }
    let (t0, t1) = (slices[0].t, slices[nt - 1].t);
    let h = (t1 - t0) / (nt - 1) as f64;
    if !(h > 0.0) || slices.iter().enumerate().any(|(k, sl)| (sl.t - t0 - k as f64 * h).abs() > 1e-9 * (t1 - t0)) {
        return Err(CrError::Slices("slices are not equally spaced in time".into()));
    }
    if let Some(c) = certs.iter().find(|c| !(c.margin >= delta)) {
        return Err(CrError::Margin { margin: c.margin, threshold: delta });
    }
    let space = slices[0].structure.chart.clone();
    if space.frame() != Frame::Coordinate || !space.axes().iter().all(|a| matches!(a, Axis::Periodic { .. })) {
        return Err(CrError::Unsupported(format!("ambient structure over a {} chart", space.kind())));
    }
    let mut n = [0; 3];
    let mut len = [0.0; 3];
    for (i, ax) in space.axes().iter().enumerate() {
        if let Axis::Periodic { n: k, length } = *ax {
            n[i] = k;
            len[i] = length;
        }
    }
    let chart = Chart::spacetime(n, len, nt, t0, t1)?;
    let per: Vec<(Field, Field, Field)> =
        slices.par_iter().zip(certs).map(|(sl, c)| ambient_coefficients(&sl.structure, &c.u)).collect::<Result<_>>()?;
    let col = |g: &dyn Fn(usize) -> Field| stack(&chart, &(0..nt).map(g).collect::<Vec<_>>());
    let a = col(&|k| per[k].0.clone());
    let b = col(&|k| per[k].1.clone());
    let gamma = col(&|k| per[k].2.clone());
    let mut th1: Vec<Field> = (0..3).map(|i| col(&|k| slices[k].structure.theta1.coeff(i).clone())).collect();
    th1.push(gamma.clone());
    let mut eta: Vec<Field> = (0..3).map(|i| &a * &col(&|k| slices[k].structure.theta.coeff(i).clone())).collect();
    eta.push(b.add_constant(-I));
    Ok(AmbientStructure {
        theta1: CoordForm::one_form(&chart, th1),
        eta: CoordForm::one_form(&chart, eta),
        chart,
        a,
        b,
        gamma,
    })
}

/// (‖η∧Θ¹∧dη‖∞, ‖η∧Θ¹∧dΘ¹‖∞) as coefficients of dx∧dy∧dz∧dt.
pub fn integrability_residuals(amb: &AmbientStructure) -> Result<(f64, f64)> {
    let base = amb.eta.wedge(&amb.theta1)?;
    let r1 = base.wedge(&amb.eta.d()?)?.top()?.norm_inf();
    let r2 = base.wedge(&amb.theta1.d()?)?.top()?.norm_inf();
    Ok((r1, r2))
}

/// Solution of η′Ĵ − Ĵη′ = C.
#[derive(Clone, Debug)]
pub struct JetMatch {
    pub eta: Matrix4<f64>,
    pub residual: f64,
}

fn max_abs(m: &Matrix4<f64>) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

/// Minimum-norm solution of η′Ĵ − Ĵη′ = C from the 16-unknown Kronecker system.
///
/// Needs Ĵ² = −I and ĴC + CĴ = 0; without anticommutation there is no solution.
pub fn match_jets(j: &Matrix4<f64>, c: &Matrix4<f64>) -> Result<JetMatch> {
    let scale = max_abs(j).max(1.0);
    let sq = max_abs(&(j * j + Matrix4::identity()));
    if sq > 1e-12 * scale * scale {
        return Err(CrError::NotComplexStructure(sq));
    }
    let anti = max_abs(&(j * c + c * j));
    if anti > 1e-10 * scale * max_abs(c).max(1.0) {
        return Err(CrError::UnsolvableJet(anti));
    }
    let jd = DMatrix::from_column_slice(4, 4, j.as_slice());
    let id = DMatrix::<f64>::identity(4, 4);
    // vec(XĴ) = (Ĵᵀ ⊗ I)vec X and vec(ĴX) = (I ⊗ Ĵ)vec X, column-major
    let m = jd.transpose().kronecker(&id) - id.kronecker(&jd);
    let svd = m.svd(true, true);
    let cut = 1e-10 * svd.singular_values.max();
    let x = svd.solve(&DVector::from_column_slice(c.as_slice()), cut).map_err(|e| CrError::Unsupported(e.to_string()))?;
    let eta = Matrix4::from_column_slice(x.as_slice());
    let residual = max_abs(&(eta * j - j * eta - c));
    Ok(JetMatch { eta, residual })
}

/// The canonical structure Ĵ₀ = [[0, −I], [I, 0]] in 2×2 blocks.
pub fn canonical_j() -> Matrix4<f64> {
    let mut j = Matrix4::zeros();
    for k in 0..2 {
        j[(k, k + 2)] = -1.0;
        j[(k + 2, k)] = 1.0;
    }
    j
}

/// Anticommuting right-hand side [[a, b], [b, −a]] for Ĵ₀.
pub fn canonical_rhs(a: &nalgebra::Matrix2<f64>, b: &nalgebra::Matrix2<f64>) -> Matrix4<f64> {
    let mut c = Matrix4::zeros();
    c.fixed_view_mut::<2, 2>(0, 0).copy_from(a);
    c.fixed_view_mut::<2, 2>(0, 2).copy_from(b);
    c.fixed_view_mut::<2, 2>(2, 0).copy_from(b);
    c.fixed_view_mut::<2, 2>(2, 2).copy_from(&-a);
    c
}

/// With η′ = [[u, v], [w, s]] solving against Ĵ₀ and C = [[a, b], [b, −a]]:
/// max of |v + w − a| and |s − u − b|.
pub fn block_relation_defect(eta: &Matrix4<f64>, c: &Matrix4<f64>) -> f64 {
    let blk = |m: &Matrix4<f64>, r: usize, k: usize| m.fixed_view::<2, 2>(r, k).into_owned();
    let (u, v, w, s) = (blk(eta, 0, 0), blk(eta, 0, 2), blk(eta, 2, 0), blk(eta, 2, 2));
    let (a, b) = (blk(c, 0, 0), blk(c, 0, 2));
    let d1 = (v + w - a).abs().max();
    let d2 = (s - u - b).abs().max();
    d1.max(d2)
}

/// ‖J″J + 2(J′)² + JJ″‖, zero along any curve of complex structures.
pub fn second_jet_defect(j: &Matrix4<f64>, j1: &Matrix4<f64>, j2: &Matrix4<f64>) -> f64 {
    max_abs(&(j2 * j + 2.0 * j1 * j1 + j * j2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phstructure::catalog::*;
    use crate::phstructure::expr::Expr;

    #[test]
    fn torsion_certificate_is_minus_one() {
        let s = t3_roto(1, [16; 3]).unwrap().structure().unwrap();
        let c = solve_certificate(&s, &-&s.a11, &CertificateOptions::default()).unwrap();
        assert!(c.converged);
        assert!(c.u.add_constant(C64::new(1.0, 0.0)).norm_inf() < 1e-7);
        assert!(c.residual_max < 1e-9);
        assert!((c.residual_max - c.solver_residual).abs() < 1e-10);
        assert!((c.margin - 1.0).abs() < 1e-7);
    }

    #[test]
    fn torsion_free_zero_velocity() {
        let e = Expr::parse("0.1*exp(i*x)").unwrap();
        let s = nil_invariant(&e, &[16, 16]).unwrap().structure().unwrap();
        let zero = Field::zeros(&s.chart).with_weight(2);
        let one = Field::real_constant(&s.chart, 1.0);
        assert!(certificate_residual(&s, &zero, &one).unwrap().norm_inf() < 1e-12);
        let c = solve_certificate(&s, &zero, &CertificateOptions::default()).unwrap();
        assert!(c.converged && c.residual_max < 1e-12);
        let opts = CertificateOptions { initial: Some(one), ..Default::default() };
        let c = solve_certificate(&s, &zero, &opts).unwrap();
        assert!(c.residual_max < 1e-12 && (c.margin - 1.0).abs() < 1e-12);
    }

    fn torsion_history(n: usize, nslices: usize) -> Vec<Slice> {
        let m = t3_roto(1, [n; 3]).unwrap();
        let (flow, st) = Flow::from_model(&m, crate::flows::FlowKind::Torsion).unwrap();
        let spacing = 0.1 / (nslices - 1) as f64;
        let sub = (spacing / flow.max_dt()).ceil().max(4.0) as usize;
        flow_slices(&flow, &st, 0.1, nslices, sub).unwrap()
    }

    fn minus_one_certificates(slices: &[Slice]) -> Vec<Certificate> {
        slices.iter().map(|sl| solve_certificate(&sl.structure, &sl.e11, &CertificateOptions::default()).unwrap()).collect()
    }

    #[test]
    fn torsion_flow_ambient_is_integrable() {
        let slices = torsion_history(16, 9);
        let certs = minus_one_certificates(&slices);
        for c in &certs {
            assert!(c.u.add_constant(C64::new(1.0, 0.0)).norm_inf() < 1e-7);
        }
        for sl in &slices {
            let res = ambient_relation_residual(&sl.structure, &sl.e11, &certs[0].u).unwrap();
            assert!(res.norm_inf() < 1e-10);
        }
        let amb = build_ambient(&slices, &certs, 1e-3).unwrap();
        assert!(amb.gamma.norm_inf() < 1e-10);
        let (r1, r2) = integrability_residuals(&amb).unwrap();
        assert!(r1 < 1e-6 && r2 < 1e-6, "{r1} {r2}");

        let mut bad = certs.clone();
        for c in &mut bad {
            c.u = &c.u + &Field::from_fn(c.u.chart(), |x| C64::new(0.05 * x[0].sin(), 0.0));
        }
        let (b1, b2) = integrability_residuals(&build_ambient(&slices, &bad, 1e-3).unwrap()).unwrap();
        assert!(b1 + b2 > 1e-3);
    }

    #[test]
    fn static_slices_measure_torsion() {
        let s = t3_roto(1, [8; 3]).unwrap().structure().unwrap();
        let slices: Vec<Slice> = (0..5)
            .map(|k| Slice { t: 0.01 * k as f64, structure: s.clone(), e11: Field::zeros(&s.chart).with_weight(2) })
            .collect();
        let one = Certificate {
            u: Field::real_constant(&s.chart, 1.0),
            residual_max: 0.0,
            residual_l2: 0.0,
            solver_residual: 0.0,
            margin: 1.0,
            iterations: 0,
            converged: true,
        };
        let amb = build_ambient(&slices, &vec![one; 5], 1e-3).unwrap();
        let (r1, r2) = integrability_residuals(&amb).unwrap();
        // η∧θ¹∧dθ¹ = −i dt∧θ¹∧A₁₁θ∧θ¹̄ and |θ∧dθ| = 1 on T³(1)
        assert!(r1 < 1e-12, "{r1}");
        assert!((r2 - 0.5).abs() < 1e-12, "{r2}");
    }

    #[test]
    fn ambient_rejects_bad_input() {
        let slices = torsion_history(8, 5);
        let mut certs = minus_one_certificates(&slices);
        assert!(matches!(build_ambient(&slices, &certs, 2.0), Err(CrError::Margin { .. })));
        assert!(build_ambient(&slices[..4], &certs[..4], 1e-3).is_err());
        let mut uneven = slices.clone();
        uneven[2].t += 1e-3;
        assert!(build_ambient(&uneven, &certs, 1e-3).is_err());
        certs.pop();
        assert!(build_ambient(&slices, &certs, 1e-3).is_err());
    }

    #[test]
    fn gauge_fixed_certificate_on_torsion_free_slice() {
        use crate::operators::{op_fj, EndomorphismField};
        use crate::phstructure::transport::EndoMatrix;
        let m = nil_invariant(&Expr::parse("0.1*exp(i*x)").unwrap(), &[32, 32]).unwrap();
        let other = nil_invariant(&Expr::parse("0.2*exp(i*y) + 0.05*exp(-i*x)").unwrap(), &[32, 32]).unwrap();
        let (mut flow, _) = Flow::from_model(&m, crate::flows::FlowKind::GaugeFixed).unwrap();
        flow.reference = Some(EndoMatrix::of_structure(&other.structure().unwrap()));
        let s = m.structure().unwrap();
        let e11 = flow.rhs(&s).unwrap().0.with_weight(2);
        let k = EndomorphismField::from_matrix(flow.reference.as_ref().unwrap(), &s);
        let f = op_fj(&s, &k).unwrap();
        assert!(f.norm_inf() > 1e-3);
        // u = −W/6 − (i/12)F_J K solves the equation when A = 0
        let u = (&s.w.scale_re(-1.0 / 6.0) - &f.scale(C64::new(0.0, 1.0 / 12.0))).add_constant(C64::new(-1.0, 0.0));
        let r = certificate_residual(&s, &e11, &u).unwrap().norm_inf();
        assert!(r < 1e-8, "{r}");
        let flipped = &s.w.scale_re(-1.0 / 6.0) + &f.scale(C64::new(0.0, 1.0 / 12.0));
        assert!(certificate_residual(&s, &e11, &flipped).unwrap().norm_inf() > 1e-4);
        let rel = ambient_relation_residual(&s, &e11, &u).unwrap().norm_inf();
        assert!(rel < 1e-6, "{rel}");
        let c = solve_certificate(&s, &e11, &CertificateOptions::default()).unwrap();
        assert!(c.converged && c.residual_max < 1e-8);
    }

    fn random_matrix(rng: &mut impl rand::Rng, scale: f64) -> Matrix4<f64> {
        Matrix4::from_fn(|_, _| rng.gen_range(-scale..scale))
    }

    #[test]
    fn jets_in_canonical_basis() {
        use nalgebra::Matrix2;
        let mut rng = crate::sampling::rng(11);
        let j0 = canonical_j();
        assert!(match_jets(&j0, &Matrix4::zeros()).unwrap().eta.norm() == 0.0);
        for _ in 0..20 {
            let a = Matrix2::from_fn(|_, _| rand::Rng::gen_range(&mut rng, -1.0..1.0));
            let b = Matrix2::from_fn(|_, _| rand::Rng::gen_range(&mut rng, -1.0..1.0));
            let c = canonical_rhs(&a, &b);
            let m = match_jets(&j0, &c).unwrap();
            assert!(m.residual < 1e-12);
            assert!(block_relation_defect(&m.eta, &c) < 1e-12);
        }
        assert!(matches!(match_jets(&j0, &Matrix4::identity()), Err(CrError::UnsolvableJet(_))));
        assert!(matches!(match_jets(&Matrix4::identity(), &Matrix4::zeros()), Err(CrError::NotComplexStructure(_))));
    }

    #[test]
    fn jets_in_conjugated_basis() {
        let mut rng = crate::sampling::rng(12);
        for _ in 0..50 {
            let g = Matrix4::identity() + random_matrix(&mut rng, 0.3);
            let gi = g.try_inverse().unwrap();
            let j = g * canonical_j() * gi;
            let x = random_matrix(&mut rng, 1.0);
            // J′ = [X, J] is tangent to the complex structures at J
            let c = x * j - j * x;
            let m = match_jets(&j, &c).unwrap();
            assert!(m.residual < 1e-12, "{}", m.residual);
            let j2 = x * c - c * x;
            assert!(second_jet_defect(&j, &c, &j2) < 1e-12);
        }
    }
}
