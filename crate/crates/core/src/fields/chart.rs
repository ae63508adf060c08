use crate::error::{CrError, Result};
use crate::jet::JetSpace;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Axis {
    /// Uniform periodic grid, differentiated spectrally.
    Periodic { n: usize, length: f64 },
    /// A direction along which all data is constant; contributes its length to integrals.
    Fiber { length: f64 },
    /// Closed interval sampled uniformly, differentiated by 4th-order differences.
    Interval { n: usize, t0: f64, t1: f64 },
}

impl Axis {
    pub fn nodes(&self) -> usize {
        match *self {
            Axis::Periodic { n, .. } | Axis::Interval { n, .. } => n,
            Axis::Fiber { .. } => 1,
        }
    }

    pub fn spacing(&self) -> f64 {
        match *self {
            Axis::Periodic { n, length } => length / n as f64,
            Axis::Fiber { length } => length,
            Axis::Interval { n, t0, t1 } => (t1 - t0) / (n - 1) as f64,
        }
    }

    pub fn coord(&self, i: usize) -> f64 {
        match *self {
            Axis::Periodic { .. } => i as f64 * self.spacing(),
            Axis::Fiber { .. } => 0.0,
            Axis::Interval { t0, .. } => t0 + i as f64 * self.spacing(),
        }
    }
}

/// Basis of vector fields in which derivatives and form components are expressed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Frame {
    /// e^a = dx^a.
    Coordinate,
    /// e⁰ = dx, e¹ = dy, e² = dt + x dy, dual E₀ = ∂x, E₁ = ∂y − x∂t, E₂ = ∂t.
    Heisenberg,
    /// Left-invariant coframe on SU(2) with de⁰ = e¹∧e², de¹ = e²∧e⁰, de² = e⁰∧e¹.
    Su2,
}

impl Frame {
    /// Structure constants: d(e^a) as a list of (b, c, coefficient) with b < c.
    pub fn d_coframe(&self, a: usize) -> Vec<(usize, usize, f64)> {
        match (self, a) {
            (Frame::Coordinate, _) => vec![],
            (Frame::Heisenberg, 2) => vec![(0, 1, 1.0)],
            (Frame::Heisenberg, _) => vec![],
            (Frame::Su2, 0) => vec![(1, 2, 1.0)],
            (Frame::Su2, 1) => vec![(0, 2, -1.0)],
            (Frame::Su2, _) => vec![(0, 1, 1.0)],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChartKind {
    Periodic3,
    Invariant2,
    Spacetime,
    Pointset,
    /// Homogeneous model: every field is constant, frame derivatives vanish.
    Homogeneous,
    /// Periodic 3-grid carrying the Heisenberg frame (t-independent data only).
    Nil3,
}

impl fmt::Display for ChartKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ChartKind::Periodic3 => "periodic3",
            ChartKind::Invariant2 => "invariant2",
            ChartKind::Spacetime => "spacetime",
            ChartKind::Pointset => "pointset",
            ChartKind::Homogeneous => "homogeneous",
            ChartKind::Nil3 => "nil3",
        };
        f.write_str(s)
    }
}

type Plan = (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>);

pub struct Chart {
    kind: ChartKind,
    names: Vec<String>,
    axes: Vec<Axis>,
    frame: Frame,
    shape: Vec<usize>,
    points: Vec<[f64; 3]>,
    jets: Option<Arc<JetSpace>>,
    plans: Vec<Option<Plan>>,
}

impl fmt::Debug for Chart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Chart({}, {:?}, {:?})", self.kind, self.shape, self.frame)
    }
}

impl PartialEq for Chart {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
            && self.axes == other.axes
            && self.frame == other.frame
            && self.points == other.points
            && self.jets.as_ref().map(|j| (j.nvars(), j.order()))
                == other.jets.as_ref().map(|j| (j.nvars(), j.order()))
    }
}

fn check_periodic(n: usize) -> Result<()> {
    if n < 8 || n % 2 != 0 {
        return Err(CrError::InvalidChart(format!("periodic axis needs an even node count ≥ 8, got {n}")));
    }
    Ok(())
}

impl Chart {
    fn build(kind: ChartKind, names: &[&str], axes: Vec<Axis>, frame: Frame) -> Arc<Self> {
        let shape: Vec<usize> = axes.iter().map(|a| a.nodes()).collect();
        let mut planner = FftPlanner::new();
        let plans = axes
            .iter()
            .map(|a| match a {
                Axis::Periodic { n, .. } => Some((planner.plan_fft_forward(*n), planner.plan_fft_inverse(*n))),
                _ => None,
            })
            .collect();
        Arc::new(Self {
            kind,
            names: names.iter().map(|s| s.to_string()).collect(),
            axes,
            frame,
            shape,
            points: Vec::new(),
            jets: None,
            plans,
        })
    }

    pub fn periodic3(n: [usize; 3], length: [f64; 3]) -> Result<Arc<Self>> {
        for &k in &n {
            check_periodic(k)?;
        }
        let axes = (0..3).map(|i| Axis::Periodic { n: n[i], length: length[i] }).collect();
        Ok(Self::build(ChartKind::Periodic3, &["x", "y", "z"], axes, Frame::Coordinate))
    }

    /// Reeb-invariant fields on the Heisenberg nilmanifold: x, y periodic, t carried analytically.
    pub fn invariant2(n: [usize; 2], length: [f64; 2], fiber: f64) -> Result<Arc<Self>> {
        check_periodic(n[0])?;
        check_periodic(n[1])?;
        let axes = vec![
            Axis::Periodic { n: n[0], length: length[0] },
            Axis::Periodic { n: n[1], length: length[1] },
            Axis::Fiber { length: fiber },
        ];
        Ok(Self::build(ChartKind::Invariant2, &["x", "y", "t"], axes, Frame::Heisenberg))
    }

    /// Heisenberg frame on a full periodic 3-grid. E₁ = ∂y − x∂t is only meaningful for t-independent data.
    pub fn nil3(n: [usize; 3], length: [f64; 3]) -> Result<Arc<Self>> {
        for &k in &n {
            check_periodic(k)?;
        }
        let axes = (0..3).map(|i| Axis::Periodic { n: n[i], length: length[i] }).collect();
        Ok(Self::build(ChartKind::Nil3, &["x", "y", "t"], axes, Frame::Heisenberg))
    }

    pub fn spacetime(n: [usize; 3], length: [f64; 3], nt: usize, t0: f64, t1: f64) -> Result<Arc<Self>> {
        for &k in &n {
            check_periodic(k)?;
        }
        if nt < 5 {
            return Err(CrError::InvalidChart(format!("time axis needs ≥ 5 nodes, got {nt}")));
        }
        if t1 <= t0 {
            return Err(CrError::InvalidChart("empty time interval".into()));
        }
        let mut axes: Vec<Axis> = (0..3).map(|i| Axis::Periodic { n: n[i], length: length[i] }).collect();
        axes.push(Axis::Interval { n: nt, t0, t1 });
        Ok(Self::build(ChartKind::Spacetime, &["x", "y", "z", "t"], axes, Frame::Coordinate))
    }

    /// Left-invariant data on SU(2) ≅ S³: three fiber directions of total volume 16π².
    pub fn homogeneous_su2() -> Arc<Self> {
        let side = (16.0 * std::f64::consts::PI.powi(2)).cbrt();
        let axes = vec![Axis::Fiber { length: side }; 3];
        Self::build(ChartKind::Homogeneous, &["e0", "e1", "e2"], axes, Frame::Su2)
    }

    /// Scattered points in ℝ³; each field value is a Taylor jet of the given order around its point.
    pub fn pointset(points: Vec<[f64; 3]>, order: usize) -> Result<Arc<Self>> {
        if points.is_empty() {
            return Err(CrError::InvalidChart("pointset without points".into()));
        }
        let mut c = Self::build(ChartKind::Pointset, &["x", "y", "t"], Vec::new(), Frame::Coordinate);
        let c_mut = Arc::get_mut(&mut c).expect("fresh chart");
        c_mut.shape = vec![points.len()];
        c_mut.points = points;
        c_mut.jets = Some(JetSpace::new(3, order));
        Ok(c)
    }

    pub fn kind(&self) -> ChartKind {
        self.kind
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    /// Number of coordinate directions (3, or 4 on spacetime charts).
    pub fn dim(&self) -> usize {
        if self.kind == ChartKind::Pointset {
            3
        } else {
            self.axes.len()
        }
    }

    pub fn nnodes(&self) -> usize {
        self.shape.iter().product()
    }

    /// Stored coefficients per node (1 on grids, the jet size on pointsets).
    pub fn ncoef(&self) -> usize {
        self.jets.as_ref().map_or(1, |j| j.len())
    }

    pub fn jets(&self) -> Option<&Arc<JetSpace>> {
        self.jets.as_ref()
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    pub fn is_grid(&self) -> bool {
        self.kind != ChartKind::Pointset
    }

    /// Coordinates of a node.
    pub fn node_coords(&self, node: usize) -> Vec<f64> {
        if self.kind == ChartKind::Pointset {
            return self.points[node].to_vec();
        }
        let mut rem = node;
        let mut out = vec![0.0; self.axes.len()];
        for ax in (0..self.axes.len()).rev() {
            let n = self.shape[ax];
            out[ax] = self.axes[ax].coord(rem % n);
            rem /= n;
        }
        out
    }

    /// Product of axis spacings (fiber axes contribute their length).
    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(|a| a.spacing()).product()
    }

    fn stride(&self, axis: usize) -> usize {
        self.shape[axis + 1..].iter().product()
    }

    fn lines(&self, axis: usize) -> (usize, usize, usize) {
        let n = self.shape[axis];
        let s = self.stride(axis);
        (n, s, self.nnodes() / n)
    }

    fn for_lines(&self, data: &[C64], axis: usize, f: impl Fn(&mut [C64]) + Sync) -> Vec<C64> {
        let (n, s, nlines) = self.lines(axis);
        let block = n * s;
        let results: Vec<Vec<C64>> = (0..nlines)
            .into_par_iter()
            .map(|l| {
                let base = (l / s) * block + l % s;
                let mut buf: Vec<C64> = (0..n).map(|i| data[base + i * s]).collect();
                f(&mut buf);
                buf
            })
            .collect();
        let mut out = vec![C64::new(0.0, 0.0); data.len()];
        for (l, buf) in results.into_iter().enumerate() {
            let base = (l / s) * block + l % s;
            for (i, v) in buf.into_iter().enumerate() {
                out[base + i * s] = v;
            }
        }
        out
    }

    /// Apply a Fourier multiplier m(k) along a periodic axis (k is the signed integer wavenumber).
    pub fn spectral_multiply(&self, data: &[C64], axis: usize, m: impl Fn(i64) -> C64 + Sync) -> Vec<C64> {
        let (fwd, inv) = self.plans[axis].clone().expect("periodic axis");
        let n = self.shape[axis];
        let norm = 1.0 / n as f64;
        self.for_lines(data, axis, |buf| {
            fwd.process(buf);
            for (k, v) in buf.iter_mut().enumerate() {
                let kk = if k <= n / 2 { k as i64 } else { k as i64 - n as i64 };
                *v *= m(kk) * norm;
            }
            inv.process(buf);
        })
    }

    fn resolved(n: usize, k: i64) -> bool {
        3 * k.unsigned_abs() as usize <= n && 2 * k.unsigned_abs() as usize != n
    }

    /// Coordinate partial derivative of nodal data.
    pub fn partial(&self, data: &[C64], axis: usize) -> Result<Vec<C64>> {
        if let Some(js) = &self.jets {
            if axis >= 3 {
                return Err(CrError::Axis { axis, chart: self.kind.to_string() });
            }
            let m = js.len();
            let mut out = vec![C64::new(0.0, 0.0); data.len()];
            out.par_chunks_mut(m).zip(data.par_chunks(m)).for_each(|(o, d)| js.deriv_into(d, axis, o));
            return Ok(out);
        }
        let ax = *self.axes.get(axis).ok_or(CrError::Axis { axis, chart: self.kind.to_string() })?;
        match ax {
            Axis::Periodic { n, length } => {
                let f = 2.0 * std::f64::consts::PI / length;
                Ok(self.spectral_multiply(data, axis, |k| {
                    if Self::resolved(n, k) {
                        C64::new(0.0, f * k as f64)
                    } else {
                        C64::new(0.0, 0.0)
                    }
                }))
            }
            Axis::Fiber { .. } => Ok(vec![C64::new(0.0, 0.0); data.len()]),
            Axis::Interval { .. } => {
                let h = ax.spacing();
                Ok(self.for_lines(data, axis, |buf| fd4(buf, h)))
            }
        }
    }

    /// Derivative along the frame vector E_a.
    pub fn frame_derivative(&self, data: &[C64], a: usize) -> Result<Vec<C64>> {
        match self.frame {
            Frame::Coordinate => self.partial(data, a),
            Frame::Su2 => Ok(vec![C64::new(0.0, 0.0); data.len()]),
            Frame::Heisenberg => {
                if a != 1 || matches!(self.axes[2], Axis::Fiber { .. }) {
                    return self.partial(data, a);
                }
                let dy = self.partial(data, 1)?;
                let dt = self.partial(data, 2)?;
                Ok((0..data.len()).map(|i| dy[i] - self.node_coords(i)[0] * dt[i]).collect())
            }
        }
    }

    /// Adjoint of `frame_derivative` for the plain sum inner product over nodes.
    pub fn frame_derivative_adjoint(&self, data: &[C64], a: usize) -> Result<Vec<C64>> {
        if !self.is_grid() || self.axes.iter().any(|x| matches!(x, Axis::Interval { .. })) {
            return Err(CrError::Unsupported("adjoint derivative needs a periodic chart".into()));
        }
        match self.frame {
            Frame::Su2 => Ok(vec![C64::new(0.0, 0.0); data.len()]),
            Frame::Heisenberg if a == 1 && !matches!(self.axes[2], Axis::Fiber { .. }) => {
                let dy = self.partial(data, 1)?;
                let xf: Vec<C64> = (0..data.len()).map(|i| data[i] * self.node_coords(i)[0]).collect();
                let dt = self.partial(&xf, 2)?;
                Ok((0..data.len()).map(|i| dt[i] - dy[i]).collect())
            }
            _ => Ok(self.partial(data, a)?.into_iter().map(|v| -v).collect()),
        }
    }

    /// 2/3-rule truncation along every periodic axis.
    pub fn dealias(&self, data: &[C64]) -> Vec<C64> {
        let mut out = data.to_vec();
        for (axis, ax) in self.axes.iter().enumerate() {
            if let Axis::Periodic { n, .. } = *ax {
                out = self.spectral_multiply(&out, axis, |k| {
                    if Self::resolved(n, k) {
                        C64::new(1.0, 0.0)
                    } else {
                        C64::new(0.0, 0.0)
                    }
                });
            }
        }
        out
    }

    /// Restriction of a spacetime chart to its spatial slice.
    pub fn spatial_slice(&self) -> Result<Arc<Self>> {
        if self.kind != ChartKind::Spacetime {
            return Err(CrError::Unsupported("spatial slice of a non-spacetime chart".into()));
        }
        let mut n = [0; 3];
        let mut l = [0.0; 3];
        for i in 0..3 {
            if let Axis::Periodic { n: k, length } = self.axes[i] {
                n[i] = k;
                l[i] = length;
            }
        }
        Self::periodic3(n, l)
    }
}

fn fd4(buf: &mut [C64], h: f64) {
    let f = buf.to_vec();
    let n = f.len();
    let c = 1.0 / (12.0 * h);
    for i in 2..n - 2 {
        buf[i] = (f[i - 2] - f[i - 1] * 8.0 + f[i + 1] * 8.0 - f[i + 2]) * c;
    }
    let edge0 = |g: &dyn Fn(usize) -> C64| (g(0) * -25.0 + g(1) * 48.0 - g(2) * 36.0 + g(3) * 16.0 - g(4) * 3.0) * c;
    let edge1 = |g: &dyn Fn(usize) -> C64| (g(0) * -3.0 - g(1) * 10.0 + g(2) * 18.0 - g(3) * 6.0 + g(4)) * c;
    buf[0] = edge0(&|i| f[i]);
    buf[1] = edge1(&|i| f[i]);
    buf[n - 1] = -edge0(&|i| f[n - 1 - i]);
    buf[n - 2] = -edge1(&|i| f[n - 1 - i]);
}
