use super::chart::{Chart, Frame};
use super::field::Field;
use crate::error::{CrError, Result};
use num_complex::Complex64 as C64;
use std::sync::Arc;

/// Multi-indices of degree `p` in `dim` directions, as sorted bit masks.
pub fn masks(dim: usize, p: usize) -> Vec<u8> {
    (0u8..(1 << dim)).filter(|m| m.count_ones() as usize == p).collect()
}

/// Sign of e^a ∧ e^b relative to e^{a∪b}; zero if the masks overlap.
pub fn wedge_sign(a: u8, b: u8) -> f64 {
    if a & b != 0 {
        return 0.0;
    }
    let mut swaps = 0;
    for i in 0..8 {
        if a & (1 << i) != 0 {
            swaps += (b & ((1u8 << i) - 1)).count_ones();
        }
    }
    if swaps % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

type ConstForm = Vec<(u8, f64)>;

fn const_wedge(a: &ConstForm, b: &ConstForm) -> ConstForm {
    let mut out: ConstForm = Vec::new();
    for &(ma, ca) in a {
        for &(mb, cb) in b {
            let s = wedge_sign(ma, mb);
            if s == 0.0 {
                continue;
            }
            let m = ma | mb;
            match out.iter_mut().find(|(k, _)| *k == m) {
                Some(e) => e.1 += s * ca * cb,
                None => out.push((m, s * ca * cb)),
            }
        }
    }
    out.retain(|&(_, c)| c != 0.0);
    out
}

/// d(e^I) for the constant coframe monomial e^I.
fn d_coframe_monomial(frame: Frame, mask: u8) -> ConstForm {
    if mask == 0 {
        return vec![];
    }
    let first = mask.trailing_zeros() as usize;
    let rest = mask & !(1 << first);
    let de: ConstForm = frame.d_coframe(first).into_iter().map(|(b, c, v)| ((1u8 << b) | (1u8 << c), v)).collect();
    let mut out = const_wedge(&de, &vec![(rest, 1.0)]);
    let tail = const_wedge(&vec![(1u8 << first, 1.0)], &d_coframe_monomial(frame, rest));
    for (m, c) in tail {
        match out.iter_mut().find(|(k, _)| *k == m) {
            Some(e) => e.1 -= c,
            None => out.push((m, -c)),
        }
    }
    out.retain(|&(_, c)| c != 0.0);
    out
}

/// Differential form with one component field per multi-index of the chart's frame basis.
#[derive(Clone, Debug)]
pub struct CoordForm {
    chart: Arc<Chart>,
    degree: usize,
    masks: Vec<u8>,
    comps: Vec<Field>,
}

impl CoordForm {
    pub fn zero(chart: &Arc<Chart>, degree: usize) -> Self {
        let masks = masks(chart.dim(), degree);
        let comps = masks.iter().map(|_| Field::zeros(chart)).collect();
        Self { chart: chart.clone(), degree, masks, comps }
    }

    pub fn function(f: Field) -> Self {
        Self { chart: f.chart().clone(), degree: 0, masks: vec![0], comps: vec![f] }
    }

    /// 1-form Σ c_a e^a.
    pub fn one_form(chart: &Arc<Chart>, comps: Vec<Field>) -> Self {
        assert_eq!(comps.len(), chart.dim());
        Self { chart: chart.clone(), degree: 1, masks: masks(chart.dim(), 1), comps }
    }

    pub fn from_components(chart: &Arc<Chart>, degree: usize, entries: Vec<(u8, Field)>) -> Self {
        let mut f = Self::zero(chart, degree);
        for (m, c) in entries {
            *f.get_mut(m) = c;
        }
        f
    }

    pub fn chart(&self) -> &Arc<Chart> {
        &self.chart
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn masks(&self) -> &[u8] {
        &self.masks
    }

    pub fn components(&self) -> &[Field] {
        &self.comps
    }

    fn pos(&self, mask: u8) -> usize {
        self.masks.iter().position(|&m| m == mask).expect("mask of wrong degree")
    }

    pub fn get(&self, mask: u8) -> &Field {
        &self.comps[self.pos(mask)]
    }

    pub fn get_mut(&mut self, mask: u8) -> &mut Field {
        let p = self.pos(mask);
        &mut self.comps[p]
    }

    /// Component along e^a of a 1-form.
    pub fn coeff(&self, a: usize) -> &Field {
        self.get(1 << a)
    }

    /// Coefficient of the top-degree monomial.
    pub fn top(&self) -> Result<&Field> {
        if self.degree != self.chart.dim() {
            return Err(CrError::Degree(format!("degree {} is not top degree {}", self.degree, self.chart.dim())));
        }
        Ok(&self.comps[0])
    }

    fn check(&self, other: &CoordForm) -> Result<()> {
        if !(Arc::ptr_eq(&self.chart, &other.chart) || *self.chart == *other.chart) {
            return Err(CrError::ChartMismatch("forms on different charts".into()));
        }
        Ok(())
    }

    fn zip(&self, other: &CoordForm, f: impl Fn(&Field, &Field) -> Field) -> Result<CoordForm> {
        self.check(other)?;
        if self.degree != other.degree {
            return Err(CrError::Degree(format!("{} vs {}", self.degree, other.degree)));
        }
        let comps = self.comps.iter().zip(&other.comps).map(|(a, b)| f(a, b)).collect();
        Ok(CoordForm { chart: self.chart.clone(), degree: self.degree, masks: self.masks.clone(), comps })
    }

    pub fn add(&self, other: &CoordForm) -> Result<CoordForm> {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &CoordForm) -> Result<CoordForm> {
        self.zip(other, |a, b| a - b)
    }

    pub fn map(&self, f: impl Fn(&Field) -> Field) -> CoordForm {
        CoordForm {
            chart: self.chart.clone(),
            degree: self.degree,
            masks: self.masks.clone(),
            comps: self.comps.iter().map(f).collect(),
        }
    }

    pub fn conj(&self) -> CoordForm {
        self.map(|c| c.conj().with_weight(0))
    }

    pub fn scale(&self, s: C64) -> CoordForm {
        self.map(|c| c.scale(s))
    }

    /// Multiply every component by a function.
    pub fn mul_field(&self, f: &Field) -> CoordForm {
        self.map(|c| (c * f).with_weight(0))
    }

    pub fn wedge(&self, other: &CoordForm) -> Result<CoordForm> {
        self.check(other)?;
        let p = self.degree + other.degree;
        if p > self.chart.dim() {
            return Err(CrError::Degree(format!("wedge degree {p} exceeds dimension {}", self.chart.dim())));
        }
        let mut out = CoordForm::zero(&self.chart, p);
        for (ma, a) in self.masks.iter().zip(&self.comps) {
            for (mb, b) in other.masks.iter().zip(&other.comps) {
                let s = wedge_sign(*ma, *mb);
                if s == 0.0 {
                    continue;
                }
                let term = (a * b).scale_re(s);
                let slot = out.get_mut(ma | mb);
                *slot = (&*slot + &term).with_weight(0);
            }
        }
        Ok(out)
    }

    pub fn d(&self) -> Result<CoordForm> {
        let dim = self.chart.dim();
        if self.degree >= dim {
            return Ok(CoordForm::zero(&self.chart, dim));
        }
        let frame = self.chart.frame();
        let mut out = CoordForm::zero(&self.chart, self.degree + 1);
        for (m, c) in self.masks.iter().zip(&self.comps) {
            for a in 0..dim {
                let s = wedge_sign(1 << a, *m);
                if s == 0.0 {
                    continue;
                }
                let da = c.frame_derivative(a)?.scale_re(s);
                let slot = out.get_mut(m | (1 << a));
                *slot = (&*slot + &da).with_weight(0);
            }
            for (mm, v) in d_coframe_monomial(frame, *m) {
                let slot = out.get_mut(mm);
                *slot = (&*slot + &c.scale_re(v)).with_weight(0);
            }
        }
        Ok(out)
    }

    /// Contraction of a 1-form with a vector field given in frame components.
    pub fn eval1(&self, x: &[Field]) -> Field {
        assert_eq!(self.degree, 1);
        let mut acc = Field::zeros(&self.chart);
        for a in 0..self.chart.dim() {
            acc = &acc + &(self.coeff(a) * &x[a]);
        }
        acc.with_weight(0)
    }

    /// Φ(X, Y) for a 2-form.
    pub fn eval2(&self, x: &[Field], y: &[Field]) -> Field {
        assert_eq!(self.degree, 2);
        let mut acc = Field::zeros(&self.chart);
        for (m, c) in self.masks.iter().zip(&self.comps) {
            let a = m.trailing_zeros() as usize;
            let b = 7 - (m.leading_zeros() as usize);
            let pair = &(&x[a] * &y[b]) - &(&x[b] * &y[a]);
            acc = &acc + &(c * &pair);
        }
        acc.with_weight(0)
    }

    pub fn norm_inf(&self) -> f64 {
        self.comps.iter().map(|c| c.norm_inf()).fold(0.0, f64::max)
    }
}

/// Apply a vector field (frame components) to a function: X f = Σ X^a E_a f.
pub fn apply_vector(x: &[Field], f: &Field) -> Result<Field> {
    let mut acc = Field::zeros(f.chart());
    for (a, xa) in x.iter().enumerate() {
        acc = &acc + &(xa * &f.frame_derivative(a)?);
    }
    Ok(acc.with_weight(f.weight()))
}
