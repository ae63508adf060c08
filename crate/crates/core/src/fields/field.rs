use super::chart::Chart;
use crate::error::{CrError, Result};
use num_complex::Complex64 as C64;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

/// Complex field on a chart with a covariant weight k.
///
/// On grid charts `data` holds one value per node. On pointset charts it holds a
/// Taylor jet per node and products are jet products.
#[derive(Clone, Debug)]
pub struct Field {
    chart: Arc<Chart>,
    data: Vec<C64>,
    weight: i32,
}

impl Field {
    pub fn new(chart: &Arc<Chart>, data: Vec<C64>, weight: i32) -> Self {
        assert_eq!(data.len(), chart.nnodes() * chart.ncoef(), "field length does not match chart");
        Self { chart: chart.clone(), data, weight }
    }

    pub fn zeros(chart: &Arc<Chart>) -> Self {
        Self::constant(chart, C64::new(0.0, 0.0))
    }

    pub fn constant(chart: &Arc<Chart>, c: C64) -> Self {
        let m = chart.ncoef();
        let mut data = vec![C64::new(0.0, 0.0); chart.nnodes() * m];
        for node in 0..chart.nnodes() {
            data[node * m] = c;
        }
        Self::new(chart, data, 0)
    }

    pub fn real_constant(chart: &Arc<Chart>, c: f64) -> Self {
        Self::constant(chart, C64::new(c, 0.0))
    }

    /// Sample a closure at grid nodes. On pointset charts use [`Field::from_jets`].
    pub fn from_fn(chart: &Arc<Chart>, f: impl Fn(&[f64]) -> C64) -> Self {
        assert!(chart.is_grid(), "from_fn needs a grid chart");
        let data = (0..chart.nnodes()).map(|i| f(&chart.node_coords(i))).collect();
        Self::new(chart, data, 0)
    }

    /// Build a pointset field from a closure that returns the jet coefficients at each point.
    pub fn from_jets(chart: &Arc<Chart>, f: impl Fn(&[f64]) -> Vec<C64>) -> Self {
        let mut data = Vec::with_capacity(chart.nnodes() * chart.ncoef());
        for i in 0..chart.nnodes() {
            let c = f(&chart.node_coords(i));
            assert_eq!(c.len(), chart.ncoef());
            data.extend(c);
        }
        Self::new(chart, data, 0)
    }

    pub fn chart(&self) -> &Arc<Chart> {
        &self.chart
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    pub fn weight(&self) -> i32 {
        self.weight
    }

    pub fn with_weight(mut self, k: i32) -> Self {
        self.weight = k;
        self
    }

    fn same_chart(&self, other: &Field) {
        assert!(
            Arc::ptr_eq(&self.chart, &other.chart) || *self.chart == *other.chart,
            "fields live on different charts"
        );
    }

    pub fn check_chart(&self, other: &Field) -> Result<()> {
        if Arc::ptr_eq(&self.chart, &other.chart) || *self.chart == *other.chart {
            Ok(())
        } else {
            Err(CrError::ChartMismatch(format!("{:?} vs {:?}", self.chart, other.chart)))
        }
    }

    fn map(&self, f: impl Fn(C64) -> C64) -> Field {
        Field { chart: self.chart.clone(), data: self.data.iter().map(|&v| f(v)).collect(), weight: self.weight }
    }

    /// Values at the nodes (the constant jet coefficient on pointsets).
    pub fn values(&self) -> Vec<C64> {
        let m = self.chart.ncoef();
        self.data.iter().step_by(m).copied().collect()
    }

    pub fn value(&self, node: usize) -> C64 {
        self.data[node * self.chart.ncoef()]
    }

    pub fn norm_inf(&self) -> f64 {
        self.values().iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn min_abs(&self) -> f64 {
        self.values().iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min)
    }

    pub fn mean(&self) -> C64 {
        let v = self.values();
        v.iter().sum::<C64>() / v.len() as f64
    }

    pub fn conj(&self) -> Field {
        let mut f = self.map(|v| v.conj());
        f.weight = -self.weight;
        f
    }

    pub fn re(&self) -> Field {
        self.map(|v| C64::new(v.re, 0.0))
    }

    pub fn im(&self) -> Field {
        self.map(|v| C64::new(v.im, 0.0))
    }

    pub fn scale(&self, s: C64) -> Field {
        self.map(|v| v * s)
    }

    pub fn scale_re(&self, s: f64) -> Field {
        self.map(|v| v * s)
    }

    pub fn add_constant(&self, c: C64) -> Field {
        let mut out = self.clone();
        let m = self.chart.ncoef();
        for node in 0..self.chart.nnodes() {
            out.data[node * m] += c;
        }
        out
    }

    fn unary_jet(&self, grid: impl Fn(C64) -> C64, jet: impl Fn(&crate::jet::JetSpace, &[C64], &mut [C64])) -> Field {
        match self.chart.jets() {
            None => self.map(grid),
            Some(js) => {
                let m = js.len();
                let mut data = vec![C64::new(0.0, 0.0); self.data.len()];
                for (o, a) in data.chunks_mut(m).zip(self.data.chunks(m)) {
                    jet(js, a, o);
                }
                Field { chart: self.chart.clone(), data, weight: self.weight }
            }
        }
    }

    pub fn recip(&self) -> Field {
        let mut f = self.unary_jet(|v| 1.0 / v, |s, a, o| s.recip_into(a, o));
        f.weight = -self.weight;
        f
    }

    /// Principal square root (weight is halved).
    pub fn sqrt(&self) -> Field {
        let mut f = self.unary_jet(|v| v.sqrt(), |s, a, o| s.powf_into(a, 0.5, o));
        f.weight = self.weight / 2;
        f
    }

    pub fn exp(&self) -> Field {
        self.unary_jet(|v| v.exp(), |s, a, o| s.exp_into(a, o))
    }

    pub fn powf(&self, p: f64) -> Field {
        self.unary_jet(|v| v.powf(p), |s, a, o| s.powf_into(a, p, o))
    }

    pub fn div(&self, other: &Field) -> Field {
        self * &other.recip()
    }

    /// Coordinate partial derivative (weight unchanged).
    pub fn partial(&self, axis: usize) -> Result<Field> {
        let data = self.chart.partial(&self.data, axis)?;
        Ok(Field { chart: self.chart.clone(), data, weight: self.weight })
    }

    /// Derivative along the chart frame vector E_a (weight unchanged).
    pub fn frame_derivative(&self, a: usize) -> Result<Field> {
        let data = self.chart.frame_derivative(&self.data, a)?;
        Ok(Field { chart: self.chart.clone(), data, weight: self.weight })
    }

    pub fn dealias(&self) -> Field {
        if !self.chart.is_grid() {
            return self.clone();
        }
        Field { chart: self.chart.clone(), data: self.chart.dealias(&self.data), weight: self.weight }
    }

    /// Max norm of the difference of nodal values.
    pub fn dist_inf(&self, other: &Field) -> f64 {
        self.same_chart(other);
        (self - other).norm_inf()
    }

    /// Plain ℓ² inner product Σ conj(other)·self over stored data.
    pub fn dot(&self, other: &Field) -> C64 {
        self.data.iter().zip(&other.data).map(|(a, b)| b.conj() * a).sum()
    }
}

impl Add for &Field {
    type Output = Field;
    fn add(self, rhs: &Field) -> Field {
        self.same_chart(rhs);
        Field {
            chart: self.chart.clone(),
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
            weight: self.weight,
        }
    }
}

impl Sub for &Field {
    type Output = Field;
    fn sub(self, rhs: &Field) -> Field {
        self.same_chart(rhs);
        Field {
            chart: self.chart.clone(),
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
            weight: self.weight,
        }
    }
}

impl Mul for &Field {
    type Output = Field;
    fn mul(self, rhs: &Field) -> Field {
        self.same_chart(rhs);
        let weight = self.weight + rhs.weight;
        let data = match self.chart.jets() {
            None => self.data.iter().zip(&rhs.data).map(|(a, b)| a * b).collect(),
            Some(js) => {
                let m = js.len();
                let mut out = vec![C64::new(0.0, 0.0); self.data.len()];
                for ((o, a), b) in out.chunks_mut(m).zip(self.data.chunks(m)).zip(rhs.data.chunks(m)) {
                    js.mul_into(a, b, o);
                }
                out
            }
        };
        Field { chart: self.chart.clone(), data, weight }
    }
}

impl Neg for &Field {
    type Output = Field;
    fn neg(self) -> Field {
        self.scale_re(-1.0)
    }
}

macro_rules! owned_ops {
    ($tr:ident, $m:ident) => {
        impl $tr for Field {
            type Output = Field;
            fn $m(self, rhs: Field) -> Field {
                (&self).$m(&rhs)
            }
        }
        impl $tr<&Field> for Field {
            type Output = Field;
            fn $m(self, rhs: &Field) -> Field {
                (&self).$m(rhs)
            }
        }
        impl $tr<Field> for &Field {
            type Output = Field;
            fn $m(self, rhs: Field) -> Field {
                self.$m(&rhs)
            }
        }
    };
}
owned_ops!(Add, add);
owned_ops!(Sub, sub);
owned_ops!(Mul, mul);

impl Neg for Field {
    type Output = Field;
    fn neg(self) -> Field {
        -&self
    }
}
