//! The acceptance criteria as runnable checks with pinned tolerances.

use crate::embedded::{self, Differentiation, Hypersurface, TestFunction};
use crate::error::Result;
use crate::fields::{CoordForm, Field};
use crate::fillability::{
    build_ambient, canonical_j, flow_slices, integrability_residuals, match_jets, solve_certificate, Certificate,
    CertificateOptions,
};
use crate::flows::{Flow, FlowKind, Termination};
use crate::operators::{
    cartan_tensor, half_lie_of_j, op_dj, op_dj_star, op_l_alpha, pair_endomorphisms, pair_functions, two_re_frak_d,
    dj11, EndomorphismField,
};
use crate::phstructure::catalog::{heis_flat, nil_invariant, s3_homogeneous, t3_roto, Model};
use crate::phstructure::expr::Expr;
use crate::phstructure::{bianchi_residual, commutation_residuals, reeb_lie_residual};
use crate::phstructure::{Dir, Structure};
use crate::sampling::{band_limited, band_limited_real, rng};
use crate::CrError;
use nalgebra::Matrix4;
use num_complex::Complex64 as C64;
use rand::Rng;
use serde::Serialize;
use std::collections::BTreeMap;
use std::time::Instant;

const I: C64 = C64 { re: 0.0, im: 1.0 };

pub const CRITERIA: usize = 12;

/// Outcome of one criterion.
#[derive(Clone, Debug, Serialize)]
pub struct CriterionResult {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub seconds: f64,
    /// Measured quantities keyed by name.
    pub metrics: BTreeMap<String, f64>,
    /// Failure reason or notes.
    pub detail: String,
}

impl CriterionResult {
    /// One-line summary.
    pub fn line(&self) -> String {
        let status = if self.passed { "PASS" } else { "FAIL" };
        let metrics: Vec<String> = self.metrics.iter().map(|(k, v)| format!("{k}={v:.3e}")).collect();
        let mut s = format!("[{status}] {:>2} {} ({:.1}s) {}", self.id, self.name, self.seconds, metrics.join(" "));
        if !self.detail.is_empty() {
            s.push_str(" | ");
            s.push_str(&self.detail);
        }
        s
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SelftestReport {
    pub criteria: Vec<CriterionResult>,
    pub seconds: f64,
    pub passed: bool,
}

/// Collects metrics and named pass conditions for one criterion.
#[derive(Default)]
struct Check {
    metrics: BTreeMap<String, f64>,
    failures: Vec<String>,
    notes: Vec<String>,
}

impl Check {
    fn metric(&mut self, name: &str, v: f64) {
        self.metrics.insert(name.to_string(), v);
    }

    /// Record `v` and require v ≤ limit.
    fn at_most(&mut self, name: &str, v: f64, limit: f64) {
        self.metric(name, v);
        if !(v <= limit) {
            self.failures.push(format!("{name} = {v:.3e} > {limit:.1e}"));
        }
    }

    /// Record `v` and require v ≥ limit.
    fn at_least(&mut self, name: &str, v: f64, limit: f64) {
        self.metric(name, v);
        if !(v >= limit) {
            self.failures.push(format!("{name} = {v:.3e} < {limit:.1e}"));
        }
    }

    fn within(&mut self, name: &str, v: f64, lo: f64, hi: f64) {
        self.metric(name, v);
        if !(lo..=hi).contains(&v) {
            self.failures.push(format!("{name} = {v:.3e} outside [{lo}, {hi}]"));
        }
    }

    fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }
}

pub fn criterion_name(id: usize) -> &'static str {
    match id {
        1 => "catalog invariants",
        2 => "identity suite",
        3 => "operator duality and transport",
        4 => "2Re frak-D splitting",
        5 => "Cartan-flow consistency",
        6 => "gauge-fixed Cartan flow stays torsion-free",
        7 => "fillability certificate and ambient integrability",
        8 => "jet matcher",
        9 => "dbar_b Y_f = i frak-D f on S3",
        10 => "route agreement and Lie transport on S3",
        11 => "energy monotonicity of the coupled flow",
        12 => "full selftest budget",
        _ => "unknown",
    }
}

/// Run criterion `id` (1..=11). Criterion 12 is a property of the whole run; see [`run_all`].
pub fn run_criterion(id: usize, seed: u64) -> CriterionResult {
    let start = Instant::now();
    let mut c = Check::default();
    let outcome = match id {
        1 => catalog_invariants(&mut c),
        2 => identity_suite(&mut c, seed),
        3 => duality(&mut c, seed),
        4 => splitting(&mut c, seed),
        5 => cartan_consistency(&mut c),
        6 => gauge_fixed(&mut c),
        7 => certificate(&mut c),
        8 => jets(&mut c, seed),
        9 => dbar_identity(&mut c, seed),
        10 => routes(&mut c, seed),
        11 => energy(&mut c),
        _ => Err(CrError::Unsupported(format!("no criterion {id}"))),
    };
    if let Err(e) = outcome {
        c.failures.push(format!("error: {e}"));
    }
    finish(id, c, start)
}

fn finish(id: usize, c: Check, start: Instant) -> CriterionResult {
    let mut detail = c.failures.clone();
    detail.extend(c.notes);
    CriterionResult {
        id,
        name: criterion_name(id),
        passed: c.failures.is_empty(),
        seconds: start.elapsed().as_secs_f64(),
        metrics: c.metrics,
        detail: detail.join("; "),
    }
}

/// Run criteria 1..=11, then criterion 12 on the whole run: at most `budget` seconds and every
/// other criterion passing (the selftest exit status is zero exactly then).
pub fn run_all(seed: u64, budget: f64, mut progress: impl FnMut(&CriterionResult)) -> SelftestReport {
    let start = Instant::now();
    let mut criteria = Vec::with_capacity(CRITERIA);
    for id in 1..CRITERIA {
        let r = run_criterion(id, seed);
        progress(&r);
        criteria.push(r);
    }
    let seconds = start.elapsed().as_secs_f64();
    let mut c = Check::default();
    c.at_most("total_seconds", seconds, budget);
    let failed: Vec<String> = criteria.iter().filter(|r| !r.passed).map(|r| r.id.to_string()).collect();
    c.metric("failed_criteria", failed.len() as f64);
    if !failed.is_empty() {
        c.failures.push(format!("nonzero exit: criteria {} failed", failed.join(", ")));
    }
    let mut last = finish(CRITERIA, c, start);
    last.seconds = seconds;
    progress(&last);
    criteria.push(last);
    let passed = criteria.iter().all(|r| r.passed);
    SelftestReport { criteria, seconds, passed }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn deformed_t3(seed: u64, n: usize, amp: f64) -> Result<Structure> {
    let mut m = t3_roto(1, [n; 3])?;
    m.beta = band_limited(&m.chart, 2, &mut rng(seed)).scale_re(amp);
    m.structure()
}

fn catalog_invariants(c: &mut Check) -> Result<()> {
    let start = Instant::now();
    for n in [1u32, 2] {
        let s = t3_roto(n, [32; 3])?.structure()?;
        let nf = n as f64;
        let q = cartan_tensor(&s)?;
        let worst = |f: &Field, want: f64, abs: bool| {
            f.values().iter().map(|v| rel(if abs { v.norm() } else { v.re }, want).max(if abs { 0.0 } else { v.im.abs() })).fold(0.0, f64::max)
        };
        c.at_most(&format!("t3_{n}_w_rel"), worst(&s.w, nf / 2.0, false), 1e-6);
        c.at_most(&format!("t3_{n}_a_rel"), worst(&s.a11, nf / 2.0, true), 1e-6);
        c.at_most(&format!("t3_{n}_q_rel"), worst(&q, 3.0 * nf * nf / 8.0, true), 1e-6);
    }
    let flat = heis_flat(16, 6)?.structure()?;
    c.at_most("heisenberg_a", flat.a11.norm_inf(), 1e-8);
    let sphere = s3_homogeneous()?.structure()?;
    c.at_most("s3_a", sphere.a11.norm_inf(), 1e-8);
    c.at_most("s3_q", cartan_tensor(&sphere)?.norm_inf(), 1e-8);
    c.at_most("seconds", start.elapsed().as_secs_f64(), 30.0);
    Ok(())
}

/// |d(f·ω) − df∧ω − f dω| and |d(α∧β) − dα∧β + α∧dβ| for one-forms α, β.
fn leibniz(f: &Field, a: &CoordForm, b: &CoordForm) -> Result<f64> {
    let fa = a.mul_field(f);
    let lhs = fa.d()?;
    let rhs = CoordForm::function(f.clone()).d()?.wedge(a)?.add(&a.d()?.mul_field(f))?;
    let r1 = lhs.sub(&rhs)?.norm_inf();
    let lhs = a.wedge(b)?.d()?;
    let rhs = a.d()?.wedge(b)?.sub(&a.wedge(&b.d()?)?)?;
    Ok(r1.max(lhs.sub(&rhs)?.norm_inf()))
}

fn identity_suite(c: &mut Check, seed: u64) -> Result<()> {
    let start = Instant::now();
    const TRIALS: usize = 100;
    const STRUCTURES: u64 = 4;
    let mut structures = vec![t3_roto(1, [32; 3])?.structure()?];
    for k in 1..STRUCTURES {
        structures.push(deformed_t3(seed.wrapping_add(1000 + k), 32, 0.01)?);
    }
    let (mut commute, mut bianchi, mut reeb, mut eqs, mut dd, mut leib) = (0f64, 0f64, 0f64, 0f64, 0f64, 0f64);
    for s in &structures {
        eqs = eqs.max(s.residuals.normalization.max(s.residuals.structure).max(s.residuals.curvature));
        bianchi = bianchi.max(bianchi_residual(s)?);
        reeb = reeb.max(reeb_lie_residual(s, 1e-3)?);
    }
    let mut r = rng(seed);
    for trial in 0..TRIALS {
        let s = &structures[trial % structures.len()];
        let f = band_limited(&s.chart, 2, &mut r);
        // weights −2..=2 in turn
        let k = (trial % 5) as i32 - 2;
        let [a, b, d] = commutation_residuals(s, &f.clone().with_weight(k))?;
        commute = commute.max(a).max(b).max(d);
        let one = |r: &mut _| CoordForm::one_form(&s.chart, (0..3).map(|_| band_limited(&s.chart, 2, r)).collect());
        let (a, b) = (one(&mut r), one(&mut r));
        dd = dd.max(CoordForm::function(f.clone()).d()?.d()?.norm_inf()).max(a.d()?.d()?.norm_inf());
        leib = leib.max(leibniz(&f, &a, &b)?);
    }
    c.at_most("commutators", commute, 1e-6);
    c.at_most("bianchi", bianchi, 1e-6);
    c.at_most("structure_equations", eqs, 1e-6);
    c.at_most("d_squared", dd, 1e-6);
    c.at_most("leibniz", leib, 1e-6);
    // the Reeb identity goes through an O(ε²) Lie transport, reported but not pinned here
    c.metric("reeb_lie_transport", reeb);
    c.metric("trials", TRIALS as f64);
    c.at_most("seconds", start.elapsed().as_secs_f64(), 120.0);
    Ok(())
}

fn duality(c: &mut Check, seed: u64) -> Result<()> {
    let mut r = rng(seed ^ 0x33);
    let mut dj_rel: f64 = 0.0;
    let mut l_rel: f64 = 0.0;
    for s in [t3_roto(1, [32; 3])?.structure()?, deformed_t3(seed ^ 0x34, 32, 0.01)?] {
        let vol = s.volume()?;
        let f = band_limited_real(&s.chart, 3, &mut r);
        let e = EndomorphismField::anti_commuting(band_limited(&s.chart, 3, &mut r));
        let lhs = pair_endomorphisms(&op_dj(&s, &f)?, &e, &vol)?;
        let rhs = pair_functions(&f, &op_dj_star(&s, &e)?, &vol)?.re;
        dj_rel = dj_rel.max((lhs - rhs).abs() / lhs.abs().max(rhs.abs()));

        let cf = band_limited(&s.chart, 3, &mut r).with_weight(2);
        let df = band_limited(&s.chart, 3, &mut r).with_weight(2);
        let alpha = C64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0));
        let lhs = pair_functions(&op_l_alpha(&s, &cf, alpha)?, &df, &vol)?;
        let rhs = pair_functions(&cf, &op_l_alpha(&s, &df, alpha.conj())?, &vol)?;
        l_rel = l_rel.max((lhs - rhs).norm() / lhs.norm().max(rhs.norm()));
    }
    c.at_most("dj_adjoint_rel", dj_rel, 1e-6);
    c.at_most("l_alpha_adjoint_rel", l_rel, 1e-6);

    let s = t3_roto(1, [32; 3])?.structure()?;
    let f = band_limited_real(&s.chart, 2, &mut r).scale_re(0.5);
    let want = dj11(&s, &f)?;
    let err = |eps: f64| -> Result<f64> { Ok((&half_lie_of_j(&s, &f, eps)?.e11 - &want).norm_inf()) };
    let (e1, e2) = (err(2e-3)?, err(1e-3)?);
    c.metric("transport_err_2e-3", e1);
    c.metric("transport_err_1e-3", e2);
    c.at_least("transport_order", (e1 / e2).log2(), 1.8);
    Ok(())
}

fn splitting(c: &mut Check, seed: u64) -> Result<()> {
    let mut r = rng(seed ^ 0x44);
    let mut worst: f64 = 0.0;
    for s in [t3_roto(1, [32; 3])?.structure()?, deformed_t3(seed ^ 0x45, 32, 0.01)?] {
        for _ in 0..4 {
            let g = band_limited_real(&s.chart, 3, &mut r);
            let f = band_limited_real(&s.chart, 3, &mut r);
            let h = &g + &f.scale(I);
            let lhs = two_re_frak_d(&s, &h)?;
            let rhs = op_dj(&s, &f)?.compose_j().add(&op_dj(&s, &g)?);
            worst = worst.max(lhs.sub(&rhs).max_norm());
        }
    }
    c.at_most("componentwise", worst, 1e-7);
    Ok(())
}

fn cartan_consistency(c: &mut Check) -> Result<()> {
    let m = t3_roto(1, [32; 3])?;
    let (flow, st) = Flow::from_model(&m, FlowKind::Cartan)?;
    let s0 = flow.structure(&st.beta, &st.lambda)?;
    let q0 = s0.cov(&cartan_tensor(&s0)?, Dir::Zero)?;
    // Keeping α real rotates θ¹ by φ = −Im(μβ̄)/α, which adds −2iφA₁₁ to Ȧ₁₁ measured on slices.
    let mu = flow.rhs(&s0)?.0.conj().scale(-I).with_weight(0);
    let beta = st.beta.clone().with_weight(0);
    let phi = (&mu * &beta.conj()).im().div(&m.deformation().alpha()).scale_re(-1.0);
    let want = &(-&q0) - &(&phi * &s0.a11).scale(2.0 * I);
    let err = |dt: f64| -> Result<f64> {
        let s1 = flow.structure(&flow.step(&st, dt)?.beta, &st.lambda)?;
        Ok((&(&s1.a11 - &s0.a11).scale_re(1.0 / dt) - &want).norm_inf())
    };
    let (e1, e2) = (err(1e-4)?, err(5e-5)?);
    c.metric("err_dt_1e-4", e1);
    c.metric("err_dt_5e-5", e2);
    c.within("halving_ratio", e1 / e2, 1.6, 2.4);
    Ok(())
}

fn gauge_fixed(c: &mut Check) -> Result<()> {
    let start = Instant::now();
    let m = nil_invariant(&Expr::parse("0.1*exp(i*x)")?, &[64, 64])?;
    let (flow, st) = Flow::from_model(&m, FlowKind::GaugeFixed)?;
    let dt = flow.max_dt();
    let out = flow.run(&st, dt, 100, None)?;
    if let Termination::Aborted(why) = &out.termination {
        c.failures.push(format!("flow aborted: {why}"));
    }
    c.metric("dt", dt);
    c.metric("steps", (out.history.len() - 1) as f64);
    c.metric("beta_change", (&out.state.beta - &st.beta).norm_inf());
    c.at_most("max_torsion", out.history.iter().map(|r| r.norm_a).fold(0.0, f64::max), 1e-6);
    c.at_most("seconds", start.elapsed().as_secs_f64(), 300.0);
    Ok(())
}

fn certificate(c: &mut Check) -> Result<()> {
    let opts = CertificateOptions::default();
    let s = t3_roto(1, [32; 3])?.structure()?;
    let cert = solve_certificate(&s, &-&s.a11, &opts)?;
    c.at_most("u_plus_one", cert.u.add_constant(C64::new(1.0, 0.0)).norm_inf(), 1e-7);

    let m: Model = t3_roto(1, [32; 3])?;
    let (flow, st) = Flow::from_model(&m, FlowKind::Torsion)?;
    const SLICES: usize = 9;
    const HORIZON: f64 = 0.1;
    let spacing = HORIZON / (SLICES - 1) as f64;
    let sub = (spacing / flow.max_dt()).ceil().max(4.0) as usize;
    let slices = flow_slices(&flow, &st, HORIZON, SLICES, sub)?;
    let certs: Vec<Certificate> =
        slices.iter().map(|sl| solve_certificate(&sl.structure, &sl.e11, &opts)).collect::<Result<_>>()?;
    let worst_u = certs.iter().map(|k| k.u.add_constant(C64::new(1.0, 0.0)).norm_inf()).fold(0.0, f64::max);
    c.at_most("slice_u_plus_one", worst_u, 1e-7);
    let (r1, r2) = integrability_residuals(&build_ambient(&slices, &certs, 1e-3)?)?;
    c.at_most("r1", r1, 1e-6);
    c.at_most("r2", r2, 1e-6);

    let mut bad = certs;
    for k in &mut bad {
        k.u = &k.u + &Field::from_fn(k.u.chart(), |x| C64::new(0.05 * x[0].sin(), 0.0));
    }
    let (b1, b2) = integrability_residuals(&build_ambient(&slices, &bad, 1e-3)?)?;
    c.at_least("perturbed_r1_plus_r2", b1 + b2, 1e-3);
    Ok(())
}

fn jets(c: &mut Check, seed: u64) -> Result<()> {
    let mut r = rng(seed ^ 0x88);
    let random = |s: f64, r: &mut rand_chacha::ChaCha8Rng| Matrix4::from_fn(|_, _| r.gen_range(-s..s));
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let g = Matrix4::identity() + random(0.3, &mut r);
        let gi = g.try_inverse().ok_or_else(|| CrError::Unsupported("singular basis change".into()))?;
        let j = g * canonical_j() * gi;
        let x = random(1.0, &mut r);
        let rhs = x * j - j * x;
        worst = worst.max(match_jets(&j, &rhs)?.residual);
    }
    c.at_most("max_residual", worst, 1e-12);
    let mut rejected = 0;
    for _ in 0..100 {
        let g = Matrix4::identity() + random(0.3, &mut r);
        let j = g * canonical_j() * g.try_inverse().unwrap_or_else(Matrix4::identity);
        if matches!(match_jets(&j, &random(1.0, &mut r)), Err(CrError::UnsolvableJet(_))) {
            rejected += 1;
        }
    }
    c.within("rejected_of_100", rejected as f64, 100.0, 100.0);
    Ok(())
}

fn dbar_identity(c: &mut Check, seed: u64) -> Result<()> {
    let geom = Hypersurface::Sphere;
    let pts = geom.samples(200)?;
    let fns = [TestFunction::parse("z1z2bar")?, TestFunction::parse("absz1sq")?, TestFunction::random_quadratic(seed)];
    let (mut exact, mut diff): (f64, f64) = (0.0, 0.0);
    for f in &fns {
        exact = exact.max(embedded::dbar_b_check(&geom, f, &pts, Differentiation::Exact)?.residual.max);
        let d = Differentiation::Difference { step: embedded::DIFFERENCE_STEP };
        diff = diff.max(embedded::dbar_b_check(&geom, f, &pts, d)?.residual.max);
    }
    c.at_most("residual_exact", exact, 1e-5);
    c.at_most("residual_difference", diff, 1e-3);
    let frak_d = |name: &str| -> Result<f64> {
        Ok(embedded::dbar_b_check(&geom, &TestFunction::parse(name)?, &pts, Differentiation::Exact)?.frak_d.max)
    };
    c.at_most("kernel_z1", frak_d("z1")?, 1e-6);
    c.at_most("kernel_z2", frak_d("z2")?, 1e-6);
    c.at_least("witness_z1bar", frak_d("z1bar")?, 0.1);
    let sq = frak_d("z1barsq")?;
    c.metric("witness_z1barsq", sq);
    c.note(format!(
        "z1bar lies in Ker frak-D on the round sphere (its (0,1)-derivative is a multiple of z2, which is CR); z1bar^2 reaches {sq:.3}"
    ));
    Ok(())
}

fn routes(c: &mut Check, seed: u64) -> Result<()> {
    let geom = Hypersurface::Sphere;
    let pts = geom.samples(50)?;
    let fns = [
        TestFunction::parse("z1z2bar")?,
        TestFunction::parse("absz1sq")?,
        TestFunction::parse("z1barsq")?,
        TestFunction::random_quadratic(seed),
    ];
    let (mut agree, mut min_order, mut worst_err): (f64, f64, f64) = (0.0, f64::INFINITY, 0.0);
    for (k, p) in pts.iter().enumerate() {
        for (i, f) in fns.iter().enumerate() {
            let t = embedded::tangency_check(&geom, f, p, 1e-3)?;
            // entries of 4Im(∂̄_bY_f) and 4Re 𝔇_Jf on (e, Je) are 2(Re, Im) of each route
            let d = t.route_y - t.route_cov;
            agree = agree.max(2.0 * d.re.abs().max(d.im.abs()));
            // convergence order is meaningful where 𝔇_Jf is not in the kernel
            if i >= 2 && k % 5 == 0 {
                min_order = min_order.min(t.order);
                worst_err = worst_err.max(t.errors[1]);
            }
        }
    }
    c.at_most("route_agreement", agree, 1e-5);
    c.metric("transport_err_eps_5e-4", worst_err);
    c.at_least("transport_min_order", min_order, 1.8);
    Ok(())
}

fn energy(c: &mut Check) -> Result<()> {
    let m = t3_roto(1, [32; 3])?;
    let (flow, st) = Flow::from_model(&m, FlowKind::CoupledTorsion)?;
    const DT: f64 = 1e-3;
    let out = flow.run(&st, DT, 50, None)?;
    if let Termination::Aborted(why) = &out.termination {
        c.failures.push(format!("flow aborted: {why}"));
    }
    let worst = out.history.windows(2).map(|w| w[1].energy - w[0].energy).fold(f64::NEG_INFINITY, f64::max);
    c.metric("energy_start", out.history[0].energy);
    c.metric("energy_end", out.history.last().map_or(f64::NAN, |r| r.energy));
    c.at_most("max_increment", worst, 10.0 * DT * DT);
    Ok(())
}
