//! Frame-matrix endomorphism fields and their Lie derivative along a vector field,
//! computed by pulling back along a Taylor-expanded flow map and central differencing.

use super::structure::Structure;
use crate::error::{CrError, Result};
use crate::fields::{Field, Frame};
use num_complex::Complex64 as C64;

/// Endomorphism of the tangent bundle as a 3×3 matrix of fields, `m[3a+b] = K^a_b`.
#[derive(Clone, Debug)]
pub struct EndoMatrix {
    pub m: Vec<Field>,
}

impl EndoMatrix {
    pub fn get(&self, a: usize, b: usize) -> &Field {
        &self.m[3 * a + b]
    }

    /// The CR structure J = iθ¹⊗Z₁ − iθ¹̄⊗Z₁̄ of a solved structure.
    pub fn of_structure(s: &Structure) -> Self {
        let i = C64::new(0.0, 1.0);
        let mut m = Vec::with_capacity(9);
        for a in 0..3 {
            for b in 0..3 {
                let t = (&s.z1[a] * s.theta1.coeff(b)).scale(i);
                m.push((&t + &t.conj()).re().with_weight(0));
            }
        }
        Self { m }
    }

    pub fn apply(&self, v: &[Field]) -> Vec<Field> {
        (0..3)
            .map(|a| (0..3).fold(Field::zeros(v[0].chart()), |acc, b| &acc + &(self.get(a, b) * &v[b])).with_weight(0))
            .collect()
    }

    /// K₁₁ = θ¹̄(K Z₁), weight 2.
    pub fn component11(&self, s: &Structure) -> Field {
        s.theta1.conj().eval1(&self.apply(&s.z1)).with_weight(2)
    }

    /// K₁₁̄ = θ¹(K Z₁), weight 0.
    pub fn component11bar(&self, s: &Structure) -> Field {
        s.theta1.eval1(&self.apply(&s.z1)).with_weight(0)
    }

    fn compose(&self, other: &EndoMatrix) -> EndoMatrix {
        let mut m = Vec::with_capacity(9);
        for a in 0..3 {
            for b in 0..3 {
                let mut acc = Field::zeros(self.m[0].chart());
                for c in 0..3 {
                    acc = &acc + &(self.get(a, c) * other.get(c, b));
                }
                m.push(acc.with_weight(0));
            }
        }
        EndoMatrix { m }
    }

    fn inverse(&self) -> EndoMatrix {
        let g = |a: usize, b: usize| self.get(a, b);
        let cof = |a0: usize, a1: usize, b0: usize, b1: usize| &(g(a0, b0) * g(a1, b1)) - &(g(a0, b1) * g(a1, b0));
        // adjugate: inv[a][b] = cofactor(b, a) / det
        let c = [
            [cof(1, 2, 1, 2), -cof(1, 2, 0, 2), cof(1, 2, 0, 1)],
            [-cof(0, 2, 1, 2), cof(0, 2, 0, 2), -cof(0, 2, 0, 1)],
            [cof(0, 1, 1, 2), -cof(0, 1, 0, 2), cof(0, 1, 0, 1)],
        ];
        let det = &(&(g(0, 0) * &c[0][0]) + &(g(0, 1) * &c[0][1])) + &(g(0, 2) * &c[0][2]);
        let inv = det.recip();
        let mut m = Vec::with_capacity(9);
        for a in 0..3 {
            for b in 0..3 {
                m.push((&c[b][a] * &inv).with_weight(0));
            }
        }
        EndoMatrix { m }
    }

    fn combine(&self, other: &EndoMatrix, s: f64, t: f64) -> EndoMatrix {
        EndoMatrix { m: self.m.iter().zip(&other.m).map(|(a, b)| &a.scale_re(s) + &b.scale_re(t)).collect() }
    }

    pub fn max_norm(&self) -> f64 {
        self.m.iter().map(|f| f.norm_inf()).fold(0.0, f64::max)
    }
}

fn directional(x: &[Field], y: &[Field]) -> Result<Vec<Field>> {
    y.iter()
        .map(|yc| {
            let mut acc = Field::zeros(yc.chart());
            for (a, xa) in x.iter().enumerate() {
                acc = &acc + &(xa * &yc.partial(a)?);
            }
            Ok(acc.with_weight(0))
        })
        .collect()
}

/// Precomputed data to pull an endomorphism field back along the flow of X.
pub struct Transport {
    j: EndoMatrix,
    dj: Vec<Vec<Field>>,
    ddj: Vec<Vec<Field>>,
    dddj: Vec<Vec<Field>>,
    y: [Vec<Field>; 3],
}

fn pair(a: usize, b: usize) -> usize {
    let (a, b) = if a <= b { (a, b) } else { (b, a) };
    [[0, 1, 2], [1, 3, 4], [2, 4, 5]][a][b]
}

fn triple(a: usize, b: usize, c: usize) -> usize {
    let mut v = [a, b, c];
    v.sort();
    // lexicographic index of the sorted triple among the 10 multisets
    const T: [[usize; 3]; 10] =
        [[0, 0, 0], [0, 0, 1], [0, 0, 2], [0, 1, 1], [0, 1, 2], [0, 2, 2], [1, 1, 1], [1, 1, 2], [1, 2, 2], [2, 2, 2]];
    T.iter().position(|t| *t == v).unwrap()
}

impl Transport {
    /// Works on coordinate frames only, where frame components are coordinate components.
    pub fn new(j: &EndoMatrix, x: &[Field]) -> Result<Self> {
        let chart = x[0].chart();
        if chart.frame() != Frame::Coordinate {
            return Err(CrError::Unsupported("Lie transport needs a coordinate frame".into()));
        }
        let mut dj = Vec::new();
        let mut ddj = Vec::new();
        let mut dddj = Vec::new();
        for f in &j.m {
            let d1: Vec<Field> = (0..3).map(|a| f.partial(a)).collect::<Result<_>>()?;
            let mut d2 = Vec::with_capacity(6);
            for (a, b) in [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)] {
                d2.push(d1[a].partial(b)?);
            }
            let mut d3 = Vec::with_capacity(10);
            for t in [[0, 0, 0], [0, 0, 1], [0, 0, 2], [0, 1, 1], [0, 1, 2], [0, 2, 2], [1, 1, 1], [1, 1, 2], [1, 2, 2], [2, 2, 2]] {
                d3.push(d2[pair(t[0], t[1])].partial(t[2])?);
            }
            dj.push(d1);
            ddj.push(d2);
            dddj.push(d3);
        }
        let y1: Vec<Field> = x.iter().map(|f| f.clone().with_weight(0)).collect();
        let y2 = directional(x, &y1)?;
        let y3 = directional(x, &y2)?;
        Ok(Self { j: j.clone(), dj, ddj, dddj, y: [y1, y2, y3] })
    }

    /// φ_ε^*J = (dφ_ε)^{-1} J(φ_ε) dφ_ε with φ_ε Taylor-expanded to third order.
    pub fn pullback(&self, eps: f64) -> Result<EndoMatrix> {
        let c = [eps, eps * eps / 2.0, eps.powi(3) / 6.0];
        let delta: Vec<Field> = (0..3)
            .map(|a| (&(&self.y[0][a].scale_re(c[0]) + &self.y[1][a].scale_re(c[1])) + &self.y[2][a].scale_re(c[2])).with_weight(0))
            .collect();
        let mut g = Vec::with_capacity(9);
        for a in 0..3 {
            for b in 0..3 {
                let mut e = delta[a].partial(b)?;
                if a == b {
                    e = e.add_constant(C64::new(1.0, 0.0));
                }
                g.push(e.with_weight(0));
            }
        }
        let g = EndoMatrix { m: g };
        let mut shifted = Vec::with_capacity(9);
        for (k, f) in self.j.m.iter().enumerate() {
            let mut acc = f.clone();
            for a in 0..3 {
                acc = &acc + &(&delta[a] * &self.dj[k][a]);
                for b in 0..3 {
                    let dd = (&delta[a] * &delta[b]).scale_re(0.5);
                    acc = &acc + &(&dd * &self.ddj[k][pair(a, b)]);
                    for cc in 0..3 {
                        let ddd = (&(&delta[a] * &delta[b]) * &delta[cc]).scale_re(1.0 / 6.0);
                        acc = &acc + &(&ddd * &self.dddj[k][triple(a, b, cc)]);
                    }
                }
            }
            shifted.push(acc.with_weight(0));
        }
        let js = EndoMatrix { m: shifted };
        Ok(g.inverse().compose(&js).compose(&g))
    }

    /// Central difference (φ_ε^*J − φ_{−ε}^*J)/(2ε) ≈ L_X J.
    pub fn lie_derivative(&self, eps: f64) -> Result<EndoMatrix> {
        let p = self.pullback(eps)?;
        let m = self.pullback(-eps)?;
        Ok(p.combine(&m, 0.5 / eps, -0.5 / eps))
    }
}
