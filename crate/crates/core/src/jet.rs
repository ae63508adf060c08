//! Truncated multivariate Taylor arithmetic.
//!
//! A jet stores the Taylor coefficients of a complex function of `nvars` real
//! variables around a base point, up to total degree `order`. Products,
//! quotients and analytic functions are exact up to that degree; a partial
//! derivative lowers the number of trustworthy degrees by one. Pointset charts
//! and the ambient calculus on hypersurfaces are built on this.

use num_complex::Complex64 as C64;
use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

/// Monomial bookkeeping shared by all jets of a given shape.
pub struct JetSpace {
    nvars: usize,
    order: usize,
    exps: Vec<Vec<u8>>,
    degree: Vec<usize>,
    mul_table: Vec<(u32, u32, u32)>,
    deriv: Vec<Vec<(u32, u32, f64)>>,
    unit: Vec<u32>,
}

impl fmt::Debug for JetSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "JetSpace(nvars={}, order={})", self.nvars, self.order)
    }
}

impl JetSpace {
    pub fn new(nvars: usize, order: usize) -> Arc<Self> {
        let mut exps: Vec<Vec<u8>> = Vec::new();
        for d in 0..=order {
            let mut cur = vec![0u8; nvars];
            enumerate(nvars, d, 0, &mut cur, &mut exps);
        }
        let index: HashMap<Vec<u8>, usize> =
            exps.iter().enumerate().map(|(i, e)| (e.clone(), i)).collect();
        let degree: Vec<usize> = exps.iter().map(|e| e.iter().map(|&x| x as usize).sum()).collect();

        let mut mul_table = Vec::new();
        for i in 0..exps.len() {
            for j in 0..exps.len() {
                if degree[i] + degree[j] > order {
                    continue;
                }
                let m: Vec<u8> = exps[i].iter().zip(&exps[j]).map(|(a, b)| a + b).collect();
                mul_table.push((i as u32, j as u32, index[&m] as u32));
            }
        }

        let mut deriv = vec![Vec::new(); nvars];
        let mut unit = vec![0u32; nvars];
        for (v, table) in deriv.iter_mut().enumerate() {
            for (src, e) in exps.iter().enumerate() {
                if e[v] == 0 {
                    continue;
                }
                let mut m = e.clone();
                m[v] -= 1;
                table.push((src as u32, index[&m] as u32, e[v] as f64));
            }
            let mut u = vec![0u8; nvars];
            u[v] = 1;
            if order >= 1 {
                unit[v] = index[&u] as u32;
            }
        }

        Arc::new(Self { nvars, order, exps, degree, mul_table, deriv, unit })
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Number of stored coefficients.
    pub fn len(&self) -> usize {
        self.exps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exps.is_empty()
    }

    pub fn exponents(&self, i: usize) -> &[u8] {
        &self.exps[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.degree[i]
    }

    /// Index of the first-degree monomial in variable `v`.
    pub fn unit_index(&self, v: usize) -> usize {
        self.unit[v] as usize
    }

    pub fn mul_into(&self, a: &[C64], b: &[C64], out: &mut [C64]) {
        out.iter_mut().for_each(|x| *x = C64::new(0.0, 0.0));
        for &(i, j, k) in &self.mul_table {
            out[k as usize] += a[i as usize] * b[j as usize];
        }
    }

    pub fn deriv_into(&self, a: &[C64], v: usize, out: &mut [C64]) {
        out.iter_mut().for_each(|x| *x = C64::new(0.0, 0.0));
        for &(src, dst, f) in &self.deriv[v] {
            out[dst as usize] = a[src as usize] * f;
        }
    }

    /// Σ_k g[k]·(a − a₀)^k, i.e. composition of a power series at a₀ with `a`.
    pub fn compose_into(&self, a: &[C64], g: &[C64], out: &mut [C64]) {
        let n = self.len();
        let mut nil = a.to_vec();
        nil[0] = C64::new(0.0, 0.0);
        let mut pw = vec![C64::new(0.0, 0.0); n];
        pw[0] = C64::new(1.0, 0.0);
        let mut tmp = vec![C64::new(0.0, 0.0); n];
        out.iter_mut().for_each(|x| *x = C64::new(0.0, 0.0));
        for (k, gk) in g.iter().enumerate().take(self.order + 1) {
            if k > 0 {
                self.mul_into(&pw, &nil, &mut tmp);
                std::mem::swap(&mut pw, &mut tmp);
            }
            for (o, p) in out.iter_mut().zip(&pw) {
                *o += gk * p;
            }
        }
    }

    pub fn recip_into(&self, a: &[C64], out: &mut [C64]) {
        let a0 = a[0];
        let inv = 1.0 / a0;
        let mut g = Vec::with_capacity(self.order + 1);
        let mut c = inv;
        for _ in 0..=self.order {
            g.push(c);
            c *= -inv;
        }
        self.compose_into(a, &g, out);
    }

    pub fn powf_into(&self, a: &[C64], p: f64, out: &mut [C64]) {
        let a0 = a[0];
        let mut g = Vec::with_capacity(self.order + 1);
        // binom(p, k) a0^(p-k)
        let mut binom = 1.0;
        for k in 0..=self.order {
            g.push(binom * a0.powf(p - k as f64));
            binom *= (p - k as f64) / (k as f64 + 1.0);
        }
        self.compose_into(a, &g, out);
    }

    pub fn exp_into(&self, a: &[C64], out: &mut [C64]) {
        let e0 = a[0].exp();
        let mut g = Vec::with_capacity(self.order + 1);
        let mut fact = 1.0;
        for k in 0..=self.order {
            if k > 0 {
                fact *= k as f64;
            }
            g.push(e0 / fact);
        }
        self.compose_into(a, &g, out);
    }
}

fn enumerate(nvars: usize, remaining: usize, pos: usize, cur: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
    if pos + 1 == nvars {
        cur[pos] = remaining as u8;
        out.push(cur.clone());
        cur[pos] = 0;
        return;
    }
    for k in (0..=remaining).rev() {
        cur[pos] = k as u8;
        enumerate(nvars, remaining - k, pos + 1, cur, out);
    }
    cur[pos] = 0;
}

/// An owned jet value.
#[derive(Clone)]
pub struct Jet {
    space: Arc<JetSpace>,
    coef: Vec<C64>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Jet({:?}, value={})", self.space, self.coef[0])
    }
}

impl Jet {
    pub fn constant(space: &Arc<JetSpace>, c: C64) -> Self {
        let mut coef = vec![C64::new(0.0, 0.0); space.len()];
        coef[0] = c;
        Self { space: space.clone(), coef }
    }

    pub fn real(space: &Arc<JetSpace>, c: f64) -> Self {
        Self::constant(space, C64::new(c, 0.0))
    }

    /// The coordinate function `x_v` expanded around a point whose `v`-th coordinate is `at`.
    pub fn variable(space: &Arc<JetSpace>, v: usize, at: f64) -> Self {
        let mut j = Self::real(space, at);
        if space.order() >= 1 {
            j.coef[space.unit_index(v)] = C64::new(1.0, 0.0);
        }
        j
    }

    pub fn from_coefficients(space: &Arc<JetSpace>, coef: Vec<C64>) -> Self {
        assert_eq!(coef.len(), space.len());
        Self { space: space.clone(), coef }
    }

    pub fn space(&self) -> &Arc<JetSpace> {
        &self.space
    }

    pub fn coefficients(&self) -> &[C64] {
        &self.coef
    }

    pub fn value(&self) -> C64 {
        self.coef[0]
    }

    pub fn conj(&self) -> Self {
        Self { space: self.space.clone(), coef: self.coef.iter().map(|c| c.conj()).collect() }
    }

    pub fn re(&self) -> Self {
        Self { space: self.space.clone(), coef: self.coef.iter().map(|c| C64::new(c.re, 0.0)).collect() }
    }

    pub fn im(&self) -> Self {
        Self { space: self.space.clone(), coef: self.coef.iter().map(|c| C64::new(c.im, 0.0)).collect() }
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { space: self.space.clone(), coef: self.coef.iter().map(|c| c * s).collect() }
    }

    pub fn partial(&self, v: usize) -> Self {
        let mut out = vec![C64::new(0.0, 0.0); self.coef.len()];
        self.space.deriv_into(&self.coef, v, &mut out);
        Self { space: self.space.clone(), coef: out }
    }

    fn unary(&self, f: impl Fn(&JetSpace, &[C64], &mut [C64])) -> Self {
        let mut out = vec![C64::new(0.0, 0.0); self.coef.len()];
        f(&self.space, &self.coef, &mut out);
        Self { space: self.space.clone(), coef: out }
    }

    pub fn recip(&self) -> Self {
        self.unary(|s, a, o| s.recip_into(a, o))
    }

    pub fn sqrt(&self) -> Self {
        self.unary(|s, a, o| s.powf_into(a, 0.5, o))
    }

    pub fn exp(&self) -> Self {
        self.unary(|s, a, o| s.exp_into(a, o))
    }

    pub fn powf(&self, p: f64) -> Self {
        self.unary(|s, a, o| s.powf_into(a, p, o))
    }

    pub fn div(&self, other: &Jet) -> Self {
        self * &other.recip()
    }
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        Jet { space: self.space.clone(), coef: self.coef.iter().zip(&rhs.coef).map(|(a, b)| a + b).collect() }
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        Jet { space: self.space.clone(), coef: self.coef.iter().zip(&rhs.coef).map(|(a, b)| a - b).collect() }
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        let mut out = vec![C64::new(0.0, 0.0); self.coef.len()];
        self.space.mul_into(&self.coef, &rhs.coef, &mut out);
        Jet { space: self.space.clone(), coef: out }
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(C64::new(-1.0, 0.0))
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr for Jet {
            type Output = Jet;
            fn $m(self, rhs: Jet) -> Jet {
                (&self).$m(&rhs)
            }
        }
        impl $tr<&Jet> for Jet {
            type Output = Jet;
            fn $m(self, rhs: &Jet) -> Jet {
                (&self).$m(rhs)
            }
        }
        impl $tr<Jet> for &Jet {
            type Output = Jet;
            fn $m(self, rhs: Jet) -> Jet {
                self.$m(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        -&self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: C64, b: C64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn monomial_count_matches_binomial() {
        let sp = JetSpace::new(3, 4);
        assert_eq!(sp.len(), 35);
        let sp = JetSpace::new(4, 3);
        assert_eq!(sp.len(), 35);
    }

    #[test]
    fn exp_of_linear_has_taylor_coefficients() {
        let sp = JetSpace::new(2, 5);
        let x = Jet::variable(&sp, 0, 0.3);
        let e = x.exp();
        // coefficient of dx^k is e^0.3 / k!
        let mut fact = 1.0;
        for k in 0..=5u8 {
            if k > 0 {
                fact *= k as f64;
            }
            let idx = (0..sp.len()).find(|&i| sp.exponents(i) == [k, 0]).unwrap();
            assert!(close(e.coefficients()[idx], C64::new(0.3f64.exp() / fact, 0.0), 1e-14));
        }
    }

    #[test]
    fn recip_and_sqrt_invert_products() {
        let sp = JetSpace::new(3, 4);
        let x = Jet::variable(&sp, 0, 0.7);
        let y = Jet::variable(&sp, 1, -0.2);
        let f = &(&x * &x) + &(&y * &Jet::real(&sp, 2.0)) + Jet::real(&sp, 3.0);
        let one = &f * &f.recip();
        assert!(close(one.value(), C64::new(1.0, 0.0), 1e-14));
        for c in &one.coefficients()[1..] {
            assert!(c.norm() < 1e-13);
        }
        let s = f.sqrt();
        let back = &s * &s;
        for (a, b) in back.coefficients().iter().zip(f.coefficients()) {
            assert!(close(*a, *b, 1e-13));
        }
    }

    #[test]
    fn partial_of_product_obeys_leibniz() {
        let sp = JetSpace::new(3, 5);
        let x = Jet::variable(&sp, 0, 0.1);
        let z = Jet::variable(&sp, 2, 0.4);
        let f = (&x * &z).exp();
        let g = &z * &z;
        let lhs = (&f * &g).partial(2);
        let rhs = &(&f.partial(2) * &g) + &(&f * &g.partial(2));
        // degree order-1 coefficients are trustworthy
        for i in 0..sp.len() {
            if sp.degree(i) < sp.order() {
                assert!(close(lhs.coefficients()[i], rhs.coefficients()[i], 1e-12));
            }
        }
    }
}
