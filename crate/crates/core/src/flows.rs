//! Torsion, Cartan, gauge-fixed Cartan and coupled torsion flows on a deformation parameter β.
//!
//! The evolving CR structure is θ¹ = αθ¹₀ + βθ¹̄₀ with α real. A velocity J̇ = 2E with E
//! anticommuting with J moves the coframe by θ̇¹ = −iE₁̄₁̄θ¹̄; keeping α real costs a
//! phase rotation of θ¹, which gives β̇ = αμ − i(Im(μβ̄)/α)β with μ = −iE₁̄₁̄.

use crate::error::{CrError, Result};
use crate::fields::{io::write_field, Axis, CoordForm, Field};
use crate::operators::{action_energy, cartan_tensor, dj11, op_fj, EndomorphismField};
use crate::phstructure::transport::EndoMatrix;
use crate::phstructure::{rescale_contact_form, DeformationState, Model, Structure};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

const I: C64 = C64 { re: 0.0, im: 1.0 };

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlowKind {
    /// E = −A.
    Torsion,
    /// E₁₁ = iQ₁₁.
    Cartan,
    /// E = Q − (1/12) D_J F_J K with a frozen reference K.
    GaugeFixed,
    /// E = −A together with θ = e^{2λ}θ₀, λ̇ = W.
    CoupledTorsion,
}

impl FlowKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "torsion" => Ok(Self::Torsion),
            "cartan" => Ok(Self::Cartan),
            "gauge-fixed" => Ok(Self::GaugeFixed),
            "coupled-torsion" => Ok(Self::CoupledTorsion),
            other => Err(CrError::Catalog(format!("unknown flow kind {other:?}"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Torsion => "torsion",
            Self::Cartan => "cartan",
            Self::GaugeFixed => "gauge-fixed",
            Self::CoupledTorsion => "coupled-torsion",
        }
    }

    /// Differential order of the velocity in β, which sets the time-step guard.
    pub fn order(&self) -> i32 {
        match self {
            Self::Torsion => 1,
            // λ̇ = W is second order in β
            Self::CoupledTorsion => 2,
            Self::Cartan | Self::GaugeFixed => 4,
        }
    }
}

/// One row of the diagnostics series.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub norm_a: f64,
    pub norm_q: f64,
    pub energy: f64,
    pub res21: f64,
    pub res24: f64,
    pub extra: Option<f64>,
}

impl DiagnosticsRecord {
    pub fn is_finite(&self) -> bool {
        [self.t, self.norm_a, self.norm_q, self.energy, self.res21, self.res24].iter().all(|v| v.is_finite())
            && self.extra.map_or(true, f64::is_finite)
    }
}

pub const CSV_HEADER: &str = "t,normA,normQ,energy,res21,res24,extra";

/// Time, deformation β and contact factor λ, with the structure solved at this state cached.
#[derive(Clone, Debug)]
pub struct FlowState {
    pub t: f64,
    pub beta: Field,
    pub lambda: Field,
    structure: Option<Arc<Structure>>,
}

impl FlowState {
    pub fn new(t: f64, beta: Field, lambda: Field) -> Self {
        Self { t, beta, lambda, structure: None }
    }
}

/// Fixed data of a flow run.
#[derive(Clone, Debug)]
pub struct Flow {
    pub kind: FlowKind,
    pub theta0: CoordForm,
    pub theta1_base: CoordForm,
    /// Reference structure K as a frame matrix, captured at t = 0.
    pub reference: Option<EndoMatrix>,
    /// Guard constant c in dt ≤ c·h^order.
    pub guard: f64,
    /// Abort when any structure residual exceeds this.
    pub abort_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "status", content = "reason")]
pub enum Termination {
    Completed,
    Aborted(String),
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub state: FlowState,
    pub history: Vec<DiagnosticsRecord>,
    pub termination: Termination,
}

/// Default guard constants for first- and fourth-order kinds.
pub fn default_guard(kind: FlowKind) -> f64 {
    if kind.order() == 1 {
        0.5
    } else {
        0.1
    }
}

impl Flow {
    /// Flow starting from a catalog model; K = J₀ for the gauge-fixed kind.
    pub fn from_model(model: &Model, kind: FlowKind) -> Result<(Flow, FlowState)> {
        let mut flow = Flow {
            kind,
            theta0: model.theta.clone(),
            theta1_base: model.theta1.clone(),
            reference: None,
            guard: default_guard(kind),
            abort_residual: 1e-3,
        };
        let state = FlowState::new(0.0, model.beta.clone(), Field::zeros(&model.chart));
        if kind == FlowKind::GaugeFixed {
            let s = flow.structure(&state.beta, &state.lambda)?;
            flow.reference = Some(EndoMatrix::of_structure(&s));
        }
        Ok((flow, state))
    }

    pub fn spacing(&self) -> f64 {
        self.theta0
            .chart()
            .axes()
            .iter()
            .filter_map(|a| match a {
                Axis::Periodic { .. } => Some(a.spacing()),
                _ => None,
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest admissible time step.
    pub fn max_dt(&self) -> f64 {
        self.guard * self.spacing().powi(self.kind.order())
    }

    pub fn check_dt(&self, dt: f64) -> Result<()> {
        let limit = self.max_dt();
        if !(dt > 0.0) || dt > limit {
            return Err(CrError::StepGuard { dt, limit });
        }
        Ok(())
    }

    pub fn structure(&self, beta: &Field, lambda: &Field) -> Result<Structure> {
        let d = DeformationState { theta: self.theta0.clone(), theta1_base: self.theta1_base.clone(), beta: beta.clone() };
        let s = d.structure()?;
        if self.kind == FlowKind::CoupledTorsion {
            rescale_contact_form(&s, lambda)
        } else {
            Ok(s)
        }
    }

    /// Velocity E₁₁ and, for the coupled kind, λ̇.
    pub fn rhs(&self, s: &Structure) -> Result<(Field, Option<Field>)> {
        match self.kind {
            FlowKind::Torsion => Ok((-&s.a11, None)),
            FlowKind::CoupledTorsion => Ok((-&s.a11, Some(s.w.clone()))),
            FlowKind::Cartan => Ok((cartan_tensor(s)?.scale(I), None)),
            FlowKind::GaugeFixed => {
                let k = self.reference.as_ref().ok_or(CrError::MissingReference)?;
                let kf = EndomorphismField::from_matrix(k, s);
                let f = op_fj(s, &kf)?;
                let gauge = dj11(s, &f)?.scale_re(1.0 / 12.0);
                Ok((&cartan_tensor(s)?.scale(I) - &gauge, None))
            }
        }
    }

    fn velocity(&self, beta: &Field, s: &Structure) -> Result<(Field, Option<Field>)> {
        let (e11, h) = self.rhs(s)?;
        let mu = e11.conj().scale(-I).with_weight(0);
        let beta = beta.clone().with_weight(0);
        let b2 = (&beta * &beta.conj()).re();
        let alpha = b2.add_constant(C64::new(1.0, 0.0)).sqrt();
        let phase = (&mu * &beta.conj()).im().div(&alpha);
        let bdot = &(&alpha * &mu) - &(&phase * &beta).scale(I);
        Ok((bdot.with_weight(0), h.map(|h| h.re().with_weight(0))))
    }

    fn solved(&self, st: &FlowState) -> Result<Arc<Structure>> {
        match &st.structure {
            Some(s) => Ok(s.clone()),
            None => Ok(Arc::new(self.structure(&st.beta, &st.lambda)?)),
        }
    }

    /// One classical RK4 step.
    pub fn step(&self, st: &FlowState, dt: f64) -> Result<FlowState> {
        self.check_dt(dt)?;
        let abort = |reason: String| CrError::FlowAborted { t: st.t, reason };
        let s0 = self.solved(st)?;
        let lam = |l: &Field, k: &Option<Field>, c: f64| match k {
            Some(v) => l + &v.scale_re(c),
            None => l.clone(),
        };
        let (k1, h1) = self.velocity(&st.beta, &s0)?;
        let b2 = &st.beta + &k1.scale_re(dt / 2.0);
        let l2 = lam(&st.lambda, &h1, dt / 2.0);
        let (k2, h2) = self.velocity(&b2, &self.structure(&b2, &l2)?)?;
        let b3 = &st.beta + &k2.scale_re(dt / 2.0);
        let l3 = lam(&st.lambda, &h2, dt / 2.0);
        let (k3, h3) = self.velocity(&b3, &self.structure(&b3, &l3)?)?;
        let b4 = &st.beta + &k3.scale_re(dt);
        let l4 = lam(&st.lambda, &h3, dt);
        let (k4, h4) = self.velocity(&b4, &self.structure(&b4, &l4)?)?;

        let incr = &(&k1 + &k4) + &(&k2 + &k3).scale_re(2.0);
        let beta = (&st.beta + &incr.scale_re(dt / 6.0)).dealias();
        let lambda = match (h1, h2, h3, h4) {
            (Some(a), Some(b), Some(c), Some(d)) => {
                let inc = &(&a + &d) + &(&b + &c).scale_re(2.0);
                (&st.lambda + &inc.scale_re(dt / 6.0)).re().dealias()
            }
            _ => st.lambda.clone(),
        };
        if beta.data().iter().chain(lambda.data()).any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(abort("non-finite state".into()));
        }
        let s = self.structure(&beta, &lambda).map_err(|e| abort(e.to_string()))?;
        let r = s.residuals.max();
        if !(r <= self.abort_residual) {
            return Err(abort(format!("structure residual {r:.3e} above {:.1e}", self.abort_residual)));
        }
        Ok(FlowState { t: st.t + dt, beta, lambda, structure: Some(Arc::new(s)) })
    }

    /// Diagnostics of a state.
    pub fn record(&self, st: &FlowState) -> Result<DiagnosticsRecord> {
        let s = self.solved(st)?;
        let energy = action_energy(&s).unwrap_or(f64::NAN);
        Ok(DiagnosticsRecord {
            t: st.t,
            norm_a: s.a11.norm_inf(),
            norm_q: cartan_tensor(&s)?.norm_inf(),
            energy,
            res21: s.residuals.normalization,
            res24: s.residuals.curvature,
            extra: None,
        })
    }

    /// Take `steps` steps of size `dt`, recording diagnostics before the first and after each step.
    ///
    /// A failed step ends the run with the last good state; this is an outcome, not an error.
    pub fn run(&self, start: &FlowState, dt: f64, steps: usize, snapshots: Option<(&Path, usize)>) -> Result<RunOutcome> {
        self.check_dt(dt)?;
        let mut st = start.clone();
        st.structure = Some(self.solved(&st)?);
        let mut history = vec![self.record(&st)?];
        for n in 0..steps {
            match self.step(&st, dt) {
                Ok(next) => st = next,
                Err(e) => return Ok(RunOutcome { state: st, history, termination: Termination::Aborted(e.to_string()) }),
            }
            let rec = self.record(&st)?;
            if !rec.is_finite() {
                history.push(rec);
                return Ok(RunOutcome { state: st, history, termination: Termination::Aborted("non-finite diagnostics".into()) });
            }
            history.push(rec);
            if let Some((dir, every)) = snapshots {
                if every > 0 && (n + 1) % every == 0 {
                    write_snapshot(dir, n + 1, &st)?;
                }
            }
        }
        Ok(RunOutcome { state: st, history, termination: Termination::Completed })
    }
}

pub fn write_snapshot(dir: &Path, step: usize, st: &FlowState) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_field(&dir.join(format!("beta_{step:06}.bin")), &st.beta)?;
    write_field(&dir.join(format!("lambda_{step:06}.bin")), &st.lambda)?;
    Ok(())
}

fn fmt_num(v: f64) -> String {
    format!("{v:.17e}")
}

pub fn write_csv(path: &Path, history: &[DiagnosticsRecord]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_csv_to(&mut f, history)?;
    f.flush()?;
    Ok(())
}

/// Header line and one row per record, numbers in round-trip exponent form.
pub fn write_csv_to(f: &mut impl Write, history: &[DiagnosticsRecord]) -> Result<()> {
    writeln!(f, "{CSV_HEADER}")?;
    for r in history {
        let extra = r.extra.map(fmt_num).unwrap_or_default();
        writeln!(
            f,
            "{},{},{},{},{},{},{}",
            fmt_num(r.t),
            fmt_num(r.norm_a),
            fmt_num(r.norm_q),
            fmt_num(r.energy),
            fmt_num(r.res21),
            fmt_num(r.res24),
            extra
        )?;
    }
    Ok(())
}

/// β(t) for the torsion flow on the rototranslation torus T³(n) started at β = 0.
///
/// The data stays constant in space, β stays real, and the flow reduces to a scalar ODE
/// solved by β(t) = sinh(½ ln(1 − nt)); the torsion |A₁₁| = (n/2)/(1 − nt) blows up at t = 1/n.
pub fn rototranslation_torsion_beta(n: f64, t: f64) -> f64 {
    (0.5 * (1.0 - n * t).ln()).sinh()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phstructure::catalog::*;

    #[test]
    fn torsion_flow_on_rototranslation_matches_closed_form() {
        let m = t3_roto(1, [8; 3]).unwrap();
        let (flow, st) = Flow::from_model(&m, FlowKind::Torsion).unwrap();
        let out = flow.run(&st, 0.01, 20, None).unwrap();
        assert_eq!(out.termination, Termination::Completed);
        let want = rototranslation_torsion_beta(1.0, out.state.t);
        let b = out.state.beta.values();
        assert!(b.iter().all(|v| (v - C64::new(want, 0.0)).norm() < 1e-8), "{} vs {want}", b[0]);
    }

    #[test]
    fn round_sphere_is_stationary() {
        let m = s3_homogeneous().unwrap();
        for kind in [FlowKind::Torsion, FlowKind::Cartan, FlowKind::GaugeFixed] {
            let (flow, st) = Flow::from_model(&m, kind).unwrap();
            let out = flow.run(&st, 0.1, 3, None).unwrap();
            assert!(out.state.beta.norm_inf() < 1e-14);
            assert!(out.history.iter().all(|r| (r.norm_a + r.norm_q) < 1e-12));
        }
    }

    #[test]
    fn gauge_fixed_starts_like_cartan() {
        let e = crate::phstructure::expr::Expr::parse("0.1*exp(i*x)").unwrap();
        let m = nil_invariant(&e, &[16, 16]).unwrap();
        let (g, st) = Flow::from_model(&m, FlowKind::GaugeFixed).unwrap();
        let (c, _) = Flow::from_model(&m, FlowKind::Cartan).unwrap();
        let s = g.structure(&st.beta, &st.lambda).unwrap();
        let (eg, _) = g.rhs(&s).unwrap();
        let (ec, _) = c.rhs(&s).unwrap();
        assert!(eg.dist_inf(&ec) < 1e-12);
    }

    #[test]
    fn guard_rejects_large_steps() {
        let m = t3_roto(1, [16; 3]).unwrap();
        let (flow, st) = Flow::from_model(&m, FlowKind::Cartan).unwrap();
        assert!(matches!(flow.step(&st, 1.0), Err(CrError::StepGuard { .. })));
    }

    #[test]
    fn csv_has_fixed_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        let r = DiagnosticsRecord { t: 0.0, norm_a: 1.0, norm_q: 2.0, energy: -3.0, res21: 0.0, res24: 0.0, extra: None };
        write_csv(&p, &[r]).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("t,normA,normQ,energy,res21,res24,extra\n"));
    }
}
