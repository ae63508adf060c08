//! Subcommand pipelines. Each writes `<command>.json` into the output directory.

use crate::config::{EmbedSettings, FillSettings, FlowSettings, InvariantsSettings, SelftestSettings};
use crate::{Failure, Output, Summary, SCHEMA};
use crlab_core::embedded::{self, Differentiation, Hypersurface, SampleStats, TestFunction};
use crlab_core::fields::io::write_field;
use crlab_core::fillability::{build_ambient, flow_slices, integrability_residuals, solve_certificate, Certificate, CertificateOptions};
use crlab_core::flows::{write_csv_to, DiagnosticsRecord, Flow, FlowKind, Termination};
use crlab_core::operators::{action_energy, cartan_tensor};
use crlab_core::phstructure::{model, GeometrySpec, StructureResiduals};
use crlab_core::selftest::{self, SelftestReport};
use crlab_core::{CrError, Field, C64};
use serde::Serialize;
use std::io::Write;
use std::time::Instant;

const HYPERSURFACES: [&str; 4] = ["sphere", "ellipsoid", "perturbed", "sphere-perturbed"];

fn stats(f: &Field, g: impl Fn(C64) -> f64) -> SampleStats {
    SampleStats::of(&f.values().into_iter().map(g).collect::<Vec<_>>())
}

#[derive(Serialize)]
struct IntrinsicInvariants {
    geometry: String,
    chart: String,
    nodes: usize,
    w: SampleStats,
    abs_a11: SampleStats,
    abs_q11: SampleStats,
    /// Integral of W against the contact volume; absent on charts without quadrature.
    energy: Option<f64>,
    residuals: StructureResiduals,
    within_tolerance: bool,
}

#[derive(Serialize)]
struct EmbeddedInvariants {
    geometry: String,
    samples: usize,
    abs_torsion: SampleStats,
    skew_defect: SampleStats,
    within_tolerance: bool,
}

pub fn invariants(s: &InvariantsSettings, out: &Output) -> Result<(), Failure> {
    let name = GeometrySpec::parse(&s.geometry)?.name;
    if HYPERSURFACES.contains(&name.as_str()) {
        let geom = Hypersurface::parse(&s.geometry)?;
        let pts = geom.samples(s.samples)?;
        let conn: Vec<_> =
            pts.iter().map(|p| embedded::connection_torsion_at(&geom, p, Differentiation::Exact)).collect::<Result<_, CrError>>()?;
        let skew = SampleStats::of(&conn.iter().map(|c| c.skew_defect).collect::<Vec<_>>());
        let result = EmbeddedInvariants {
            geometry: geom.to_string(),
            samples: pts.len(),
            abs_torsion: SampleStats::of(&conn.iter().map(|c| c.torsion.norm()).collect::<Vec<_>>()),
            within_tolerance: skew.max <= s.tolerances.structure,
            skew_defect: skew,
        };
        return out.summary(&Summary::new("invariants", s, result));
    }
    let m = model(&s.geometry)?;
    let st = m.structure()?;
    let q = cartan_tensor(&st)?;
    let result = IntrinsicInvariants {
        geometry: s.geometry.clone(),
        chart: st.chart.kind().to_string(),
        nodes: st.chart.nnodes(),
        w: stats(&st.w, |v| v.re),
        abs_a11: stats(&st.a11, |v| v.norm()),
        abs_q11: stats(&q, |v| v.norm()),
        energy: action_energy(&st).ok(),
        within_tolerance: st.residuals.max() <= s.tolerances.structure,
        residuals: st.residuals.clone(),
    };
    out.summary(&Summary::new("invariants", s, result))
}

#[derive(Serialize)]
struct FlowResult {
    kind: &'static str,
    dt: f64,
    guard_dt: f64,
    steps_requested: usize,
    steps_taken: usize,
    termination: Termination,
    initial: DiagnosticsRecord,
    last: DiagnosticsRecord,
    max_norm_a: f64,
    csv: &'static str,
    snapshots: Option<&'static str>,
}

#[derive(Serialize)]
struct SnapshotManifest<'a> {
    schema: u32,
    config_hash: &'a str,
    every: usize,
    fields: Vec<String>,
}

fn comment_line(command: &str, hash: &str, tolerances: &serde_json::Value) -> String {
    format!("# crlab {command} schema={SCHEMA} config_hash={hash} tolerances={tolerances}")
}

pub fn flow(s: &FlowSettings, out: &Output) -> Result<(), Failure> {
    let kind = FlowKind::parse(&s.flow)?;
    let m = model(&s.geometry)?;
    let (mut flow, start) = Flow::from_model(&m, kind)?;
    flow.abort_residual = s.tolerances.abort_residual;
    // without --dt, the largest step below the guard that lands on t_end
    let dt = s.dt.unwrap_or_else(|| s.t_end / (s.t_end / flow.max_dt()).ceil().max(1.0));
    flow.check_dt(dt)?;
    let steps = (s.t_end / dt - 1e-9).ceil().max(1.0) as usize;
    let snap_dir = out.path("snapshots");
    let snapshots = (s.snapshot_every > 0).then_some((snap_dir.as_path(), s.snapshot_every));
    let run = flow.run(&start, dt, steps, snapshots)?;

    let summary = Summary::new("flow", s, ());
    let mut csv = std::io::BufWriter::new(std::fs::File::create(out.path("flow.csv"))?);
    writeln!(csv, "{}", comment_line("flow", &summary.config_hash, &summary.tolerances))?;
    write_csv_to(&mut csv, &run.history)?;
    csv.flush()?;
    let taken = run.history.len() - 1;
    if s.snapshot_every > 0 {
        let fields = (1..=taken)
            .filter(|n| n % s.snapshot_every == 0)
            .flat_map(|n| [format!("beta_{n:06}.bin"), format!("lambda_{n:06}.bin")])
            .collect();
        std::fs::create_dir_all(&snap_dir)?;
        let manifest = SnapshotManifest { schema: SCHEMA, config_hash: &summary.config_hash, every: s.snapshot_every, fields };
        std::fs::write(snap_dir.join("manifest.json"), serde_json::to_string_pretty(&manifest).map_err(|e| Failure::Runtime(e.to_string()))?)?;
    }
    let result = FlowResult {
        kind: kind.name(),
        dt,
        guard_dt: flow.max_dt(),
        steps_requested: steps,
        steps_taken: taken,
        termination: run.termination.clone(),
        initial: run.history[0].clone(),
        last: run.history[taken].clone(),
        max_norm_a: run.history.iter().map(|r| r.norm_a).fold(0.0, f64::max),
        csv: "flow.csv",
        snapshots: (s.snapshot_every > 0).then_some("snapshots"),
    };
    out.summary(&Summary::new("flow", s, result))?;
    match run.termination {
        Termination::Completed => Ok(()),
        Termination::Aborted(why) => Err(Failure::Aborted(format!("flow aborted after {taken} steps: {why}"))),
    }
}

#[derive(Serialize)]
struct SliceReport {
    t: f64,
    residual_max: f64,
    residual_l2: f64,
    margin: f64,
    iterations: usize,
    converged: bool,
}

#[derive(Serialize)]
struct FillResult {
    flow: &'static str,
    rhs: &'static str,
    slices: usize,
    substeps: usize,
    dt: f64,
    /// min over slices of min |Re u|.
    margin: f64,
    certificates_converged: bool,
    /// "built", or why the ambient structure could not be assembled.
    ambient: String,
    r1: Option<f64>,
    r2: Option<f64>,
    within_tolerance: bool,
    per_slice: Vec<SliceReport>,
}

pub fn fill(s: &FillSettings, out: &Output) -> Result<(), Failure> {
    let kind = FlowKind::parse(&s.flow)?;
    let rhs_kind = FlowKind::parse(s.rhs.as_deref().unwrap_or(&s.flow))?;
    if rhs_kind == FlowKind::CoupledTorsion {
        return Err(Failure::Usage("rhs must be torsion, cartan or gauge-fixed".into()));
    }
    let m = model(&s.geometry)?;
    let (flow, start) = Flow::from_model(&m, kind)?;
    let spacing = s.horizon / (s.slices - 1) as f64;
    let substeps = (spacing / flow.max_dt()).ceil().max(4.0) as usize;
    let mut slices = flow_slices(&flow, &start, s.horizon, s.slices, substeps)?;
    if rhs_kind != kind {
        let (rhs_flow, _) = Flow::from_model(&m, rhs_kind)?;
        for sl in &mut slices {
            sl.e11 = rhs_flow.rhs(&sl.structure)?.0.with_weight(2);
        }
    }
    let opts = CertificateOptions { tol: s.tolerances.solver, accept: s.tolerances.accept, ..Default::default() };
    let certs: Vec<Certificate> = slices.iter().map(|sl| solve_certificate(&sl.structure, &sl.e11, &opts)).collect::<Result<_, CrError>>()?;
    if s.snapshots {
        let dir = out.path("certificates");
        std::fs::create_dir_all(&dir)?;
        for (k, c) in certs.iter().enumerate() {
            write_field(&dir.join(format!("u_{k:03}.bin")), &c.u)?;
        }
    }
    let (ambient, r1, r2) = match build_ambient(&slices, &certs, s.delta) {
        Ok(amb) => {
            let (r1, r2) = integrability_residuals(&amb)?;
            ("built".to_string(), Some(r1), Some(r2))
        }
        Err(e @ (CrError::Margin { .. } | CrError::Slices(_) | CrError::Unsupported(_))) => (e.to_string(), None, None),
        Err(e) => return Err(e.into()),
    };
    let converged = certs.iter().all(|c| c.converged);
    let tol = s.tolerances.integrability;
    let result = FillResult {
        flow: kind.name(),
        rhs: rhs_kind.name(),
        slices: slices.len(),
        substeps,
        dt: spacing / substeps as f64,
        margin: certs.iter().map(|c| c.margin).fold(f64::INFINITY, f64::min),
        certificates_converged: converged,
        within_tolerance: converged && r1.is_some_and(|r| r <= tol) && r2.is_some_and(|r| r <= tol),
        ambient,
        r1,
        r2,
        per_slice: slices
            .iter()
            .zip(&certs)
            .map(|(sl, c)| SliceReport {
                t: sl.t,
                residual_max: c.residual_max,
                residual_l2: c.residual_l2,
                margin: c.margin,
                iterations: c.iterations,
                converged: c.converged,
            })
            .collect(),
    };
    out.summary(&Summary::new("fill", s, result))
}

#[derive(Serialize)]
struct ChiResult {
    geometry: String,
    function: String,
    scale: f64,
    differentiation: Differentiation,
    /// Relative (1,0)-part of dχ_f(Z₁̄); zero where χ_f is CR.
    defect: SampleStats,
    cr_within_tolerance: bool,
}

#[derive(Serialize)]
struct TangencyResult {
    geometry: String,
    function: String,
    eps: [f64; 2],
    abs_frak_d: SampleStats,
    route_agreement: SampleStats,
    transport_error: SampleStats,
    /// Convergence order over samples with |𝔇_J f| ≥ 1e-3.
    order: Option<SampleStats>,
    within_tolerance: bool,
}

#[derive(Serialize)]
struct DbarResult {
    #[serde(flatten)]
    report: embedded::DbarReport,
    within_tolerance: bool,
}

pub fn embed(s: &EmbedSettings, out: &Output) -> Result<(), Failure> {
    let geom = Hypersurface::parse(&s.gamma)?;
    let f = TestFunction::parse(s.function.as_deref().unwrap_or("z1barsq"))?;
    let diff = match s.differentiation.as_str() {
        "exact" => Differentiation::Exact,
        _ => Differentiation::Difference { step: s.step },
    };
    let pts = geom.samples(s.samples)?;
    let eps = s.eps.unwrap_or(1e-3);
    let residual_tol = s.tolerances.residual.unwrap_or(1e-5);
    match s.check.as_str() {
        "lemma62" => {
            let report = embedded::dbar_b_check(&geom, &f, &pts, diff)?;
            let ok = report.residual.max <= residual_tol;
            out.summary(&Summary::new("embed", s, DbarResult { report, within_tolerance: ok }))
        }
        "chi" => {
            let scaled = f.scaled(C64::new(eps, 0.0));
            let r = embedded::chi_embedding(&geom, &scaled, &pts, diff).map_err(|e| match e {
                CrError::Tubular => Failure::Usage(format!("{e} at scale {eps}; lower --eps")),
                e => e.into(),
            })?;
            let result = ChiResult {
                geometry: geom.to_string(),
                function: f.name.clone(),
                scale: eps,
                differentiation: diff,
                cr_within_tolerance: r.defect.max <= residual_tol,
                defect: r.defect,
            };
            out.summary(&Summary::new("embed", s, result))
        }
        _ => {
            let reports: Vec<_> = pts.iter().map(|p| embedded::tangency_check(&geom, &f, p, eps)).collect::<Result<_, CrError>>()?;
            let agreement: Vec<f64> = reports
                .iter()
                .map(|t| {
                    let d = t.route_y - t.route_cov;
                    2.0 * d.re.abs().max(d.im.abs())
                })
                .collect();
            let orders: Vec<f64> = reports.iter().filter(|t| t.route_cov.norm() >= 1e-3).map(|t| t.order).collect();
            let agreement = SampleStats::of(&agreement);
            let order = (!orders.is_empty()).then(|| SampleStats::of(&orders));
            let ok = agreement.max <= s.tolerances.agreement && order.as_ref().is_none_or(|o| o.min >= s.tolerances.order);
            let result = TangencyResult {
                geometry: geom.to_string(),
                function: f.name.clone(),
                eps: reports.first().map_or([eps, eps / 2.0], |t| t.eps),
                abs_frak_d: SampleStats::of(&reports.iter().map(|t| t.route_cov.norm()).collect::<Vec<_>>()),
                route_agreement: agreement,
                transport_error: SampleStats::of(&reports.iter().map(|t| t.errors[1]).collect::<Vec<_>>()),
                order,
                within_tolerance: ok,
            };
            out.summary(&Summary::new("embed", s, result))
        }
    }
}

pub fn selftest(s: &SelftestSettings, out: &Output) -> Result<(), Failure> {
    let budget = s.tolerances.budget_seconds;
    let full = s.criteria.is_empty() || s.criteria.contains(&selftest::CRITERIA);
    let report = if full {
        selftest::run_all(s.seed, budget, |r| eprintln!("{}", r.line()))
    } else {
        let start = Instant::now();
        let criteria: Vec<_> = s
            .criteria
            .iter()
            .map(|&id| {
                let r = selftest::run_criterion(id, s.seed);
                eprintln!("{}", r.line());
                r
            })
            .collect();
        let passed = criteria.iter().all(|r| r.passed);
        SelftestReport { criteria, seconds: start.elapsed().as_secs_f64(), passed }
    };
    let failed: Vec<String> = report.criteria.iter().filter(|r| !r.passed).map(|r| r.id.to_string()).collect();
    eprintln!("selftest: {}/{} passed in {:.1}s", report.criteria.len() - failed.len(), report.criteria.len(), report.seconds);
    let passed = report.passed;
    out.summary(&Summary::new("selftest", s, report))?;
    if passed {
        Ok(())
    } else {
        Err(Failure::Tolerance(format!("criteria {} failed", failed.join(", "))))
    }
}
