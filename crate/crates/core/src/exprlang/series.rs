//! Truncated multivariate Taylor series.
//!
//! Used wherever derivatives deeper than second order are needed: directional
//! derivatives of Christoffel symbols, of the auxiliary coefficients built
//! from them, and of integrability rows.  A series carries an effective order
//! `ord`; differentiation lowers it by one and products truncate at the
//! smaller operand order.

use super::scalar::Scalar;
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// Monomial bookkeeping for `n` variables up to total degree `k`.
#[derive(Debug)]
pub struct Layout {
    pub n: usize,
    pub k: usize,
    exps: Vec<Vec<u8>>,
    deg: Vec<usize>,
    /// Number of monomials with degree `<= d`.
    upto: Vec<usize>,
    /// For each output monomial, the contributing `(i, j)` index pairs.
    pairs: Vec<Vec<(u32, u32)>>,
    /// `dmap[v][alpha] = (index of alpha + e_v, alpha_v + 1)` when in range.
    dmap: Vec<Vec<Option<(usize, f64)>>>,
}

impl Layout {
    fn new(n: usize, k: usize) -> Layout {
        let mut exps: Vec<Vec<u8>> = Vec::new();
        for d in 0..=k {
            let mut cur = vec![0u8; n];
            gen_degree(n, d, 0, &mut cur, &mut exps);
        }
        let deg: Vec<usize> = exps.iter().map(|e| e.iter().map(|&x| x as usize).sum()).collect();
        let mut upto = vec![0usize; k + 1];
        for d in 0..=k {
            upto[d] = deg.iter().filter(|&&x| x <= d).count();
        }
        let index: HashMap<Vec<u8>, usize> =
            exps.iter().enumerate().map(|(i, e)| (e.clone(), i)).collect();
        let m = exps.len();
        let mut pairs = vec![Vec::new(); m];
        for i in 0..m {
            for j in 0..m {
                if deg[i] + deg[j] > k {
                    continue;
                }
                let sum: Vec<u8> = exps[i].iter().zip(&exps[j]).map(|(a, b)| a + b).collect();
                pairs[index[&sum]].push((i as u32, j as u32));
            }
        }
        let mut dmap = vec![vec![None; m]; n];
        for v in 0..n {
            for a in 0..m {
                if deg[a] < k {
                    let mut e = exps[a].clone();
                    e[v] += 1;
                    dmap[v][a] = Some((index[&e], e[v] as f64));
                }
            }
        }
        Layout { n, k, exps, deg, upto, pairs, dmap }
    }

    pub fn len(&self) -> usize {
        self.exps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exps.is_empty()
    }

    pub fn exponents(&self, idx: usize) -> &[u8] {
        &self.exps[idx]
    }

    pub fn degree(&self, idx: usize) -> usize {
        self.deg[idx]
    }

    /// Shared layout for `(n, k)`.
    pub fn get(n: usize, k: usize) -> Arc<Layout> {
        static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<Layout>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut g = cache.lock().expect("layout cache poisoned");
        g.entry((n, k)).or_insert_with(|| Arc::new(Layout::new(n, k))).clone()
    }
}

fn gen_degree(n: usize, d: usize, pos: usize, cur: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
    if pos == n - 1 {
        cur[pos] = d as u8;
        out.push(cur.clone());
        return;
    }
    for a in (0..=d).rev() {
        cur[pos] = a as u8;
        gen_degree(n, d - a, pos + 1, cur, out);
    }
    cur[pos] = 0;
}

/// A truncated Taylor expansion about a fixed point, in local offsets.
#[derive(Clone)]
pub struct Taylor {
    lay: Arc<Layout>,
    ord: usize,
    c: Vec<f64>,
}

impl std::fmt::Debug for Taylor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Taylor(ord={}, c0={:e})", self.ord, self.c[0])
    }
}

impl Taylor {
    pub fn constant(lay: &Arc<Layout>, v: f64) -> Taylor {
        let mut c = vec![0.0; lay.len()];
        c[0] = v;
        Taylor { lay: lay.clone(), ord: lay.k, c }
    }

    pub fn variable(lay: &Arc<Layout>, i: usize, v: f64) -> Taylor {
        let mut t = Taylor::constant(lay, v);
        if lay.k > 0 {
            // degree-1 monomials follow the constant, ordered e_0, e_1, ...
            t.c[1 + i] = 1.0;
        }
        t
    }

    /// Seed all coordinates of `point` with expansions of order `k`.
    pub fn seed(point: &[f64], k: usize) -> Vec<Taylor> {
        let lay = Layout::get(point.len(), k);
        point.iter().enumerate().map(|(i, &v)| Taylor::variable(&lay, i, v)).collect()
    }

    pub fn order(&self) -> usize {
        self.ord
    }

    pub fn layout(&self) -> &Arc<Layout> {
        &self.lay
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.c[..self.lay.upto[self.ord]]
    }

    /// Largest coefficient magnitude among kept terms.
    pub fn max_abs(&self) -> f64 {
        self.coeffs().iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    fn live(&self) -> usize {
        self.lay.upto[self.ord]
    }

    /// Partial derivative in coordinate `v`; the order drops by one.
    pub fn partial(&self, v: usize) -> Taylor {
        assert!(self.ord > 0, "cannot differentiate an order-0 series");
        let ord = self.ord - 1;
        let live = self.lay.upto[ord];
        let mut c = vec![0.0; self.lay.len()];
        for (a, slot) in c.iter_mut().enumerate().take(live) {
            if let Some((src, f)) = self.lay.dmap[v][a] {
                *slot = f * self.c[src];
            }
        }
        Taylor { lay: self.lay.clone(), ord, c }
    }

    /// Gradient as `n` series of order `ord - 1`.
    pub fn gradient(&self) -> Vec<Taylor> {
        (0..self.lay.n).map(|v| self.partial(v)).collect()
    }

    /// Truncate to a lower order.
    pub fn truncate(&self, ord: usize) -> Taylor {
        let ord = ord.min(self.ord);
        let mut t = self.clone();
        let live = self.lay.upto[ord];
        for x in t.c.iter_mut().skip(live) {
            *x = 0.0;
        }
        t.ord = ord;
        t
    }

    fn zip(&self, o: &Taylor, f: impl Fn(f64, f64) -> f64) -> Taylor {
        let ord = self.ord.min(o.ord);
        let live = self.lay.upto[ord];
        let mut c = vec![0.0; self.lay.len()];
        for i in 0..live {
            c[i] = f(self.c[i], o.c[i]);
        }
        Taylor { lay: self.lay.clone(), ord, c }
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> Taylor {
        let live = self.live();
        let mut c = vec![0.0; self.lay.len()];
        for i in 0..live {
            c[i] = f(self.c[i]);
        }
        Taylor { lay: self.lay.clone(), ord: self.ord, c }
    }

    /// Evaluate `sum_m d[m] (self - self_0)^m` by Horner's rule.
    fn compose(&self, d: &[f64]) -> Taylor {
        let mut tail = self.clone();
        tail.c[0] = 0.0;
        let top = self.ord.min(d.len() - 1);
        let mut acc = Taylor::constant(&self.lay, d[top]).truncate(self.ord);
        for m in (0..top).rev() {
            acc = acc.mul(&tail);
            acc.c[0] += d[m];
        }
        // keep the value part bit-identical to the scalar builtin
        acc.c[0] = d[0];
        acc
    }
}

/// Univariate series helpers on coefficient vectors of length `k + 1`.
fn useries_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let k = a.len();
    (0..k).map(|m| (0..=m).map(|i| a[i] * b[m - i]).sum()).collect()
}

fn useries_recip(a: &[f64]) -> Vec<f64> {
    let k = a.len();
    let mut r = vec![0.0; k];
    r[0] = 1.0 / a[0];
    for m in 1..k {
        let s: f64 = (1..=m).map(|i| a[i] * r[m - i]).sum();
        r[m] = -s / a[0];
    }
    r
}

fn factorials(k: usize) -> Vec<f64> {
    let mut f = vec![1.0; k + 1];
    for i in 1..=k {
        f[i] = f[i - 1] * i as f64;
    }
    f
}

fn sincos_series(x0: f64, k: usize) -> (Vec<f64>, Vec<f64>) {
    let (s, c) = (x0.sin(), x0.cos());
    let fact = factorials(k);
    let mut ds = vec![0.0; k + 1];
    let mut dc = vec![0.0; k + 1];
    for m in 0..=k {
        // derivatives of sin cycle s, c, -s, -c
        let (dsin, dcos) = match m % 4 {
            0 => (s, c),
            1 => (c, -s),
            2 => (-s, -c),
            _ => (-c, s),
        };
        ds[m] = dsin / fact[m];
        dc[m] = dcos / fact[m];
    }
    (ds, dc)
}

impl Scalar for Taylor {
    fn lift(&self, c: f64) -> Self {
        Taylor::constant(&self.lay, c).truncate(self.ord)
    }
    fn value(&self) -> f64 {
        self.c[0]
    }
    fn add(&self, o: &Self) -> Self {
        self.zip(o, |a, b| a + b)
    }
    fn sub(&self, o: &Self) -> Self {
        self.zip(o, |a, b| a - b)
    }
    fn mul(&self, o: &Self) -> Self {
        let ord = self.ord.min(o.ord);
        let live = self.lay.upto[ord];
        let mut c = vec![0.0; self.lay.len()];
        for (k, slot) in c.iter_mut().enumerate().take(live) {
            let mut s = 0.0;
            for &(i, j) in &self.lay.pairs[k] {
                s += self.c[i as usize] * o.c[j as usize];
            }
            *slot = s;
        }
        Taylor { lay: self.lay.clone(), ord, c }
    }
    fn div(&self, o: &Self) -> Self {
        // solve q * o = self term by term in graded order
        let ord = self.ord.min(o.ord);
        let live = self.lay.upto[ord];
        let b0 = o.c[0];
        let mut q = vec![0.0; self.lay.len()];
        q[0] = self.c[0] / b0;
        for k in 1..live {
            let mut s = self.c[k];
            for &(i, j) in &self.lay.pairs[k] {
                if j != 0 {
                    s -= q[i as usize] * o.c[j as usize];
                }
            }
            q[k] = s / b0;
        }
        Taylor { lay: self.lay.clone(), ord, c: q }
    }
    fn neg(&self) -> Self {
        self.map(|x| -x)
    }
    fn scale(&self, c: f64) -> Self {
        self.map(|x| c * x)
    }
    fn sqrt(&self) -> Self {
        let x0 = self.c[0];
        let k = self.ord;
        let s = x0.sqrt();
        let mut d = vec![0.0; k + 1];
        d[0] = s;
        // binomial series of (x0 + t)^(1/2)
        let mut coef = s;
        for m in 1..=k {
            coef *= (0.5 - (m - 1) as f64) / (m as f64 * x0);
            d[m] = coef;
        }
        self.compose(&d)
    }
    fn exp(&self) -> Self {
        let e = self.c[0].exp();
        let fact = factorials(self.ord);
        let d: Vec<f64> = fact.iter().map(|f| e / f).collect();
        self.compose(&d)
    }
    fn ln(&self) -> Self {
        let x0 = self.c[0];
        let k = self.ord;
        let mut d = vec![0.0; k + 1];
        d[0] = x0.ln();
        for m in 1..=k {
            let sign = if m % 2 == 1 { 1.0 } else { -1.0 };
            d[m] = sign / (m as f64 * x0.powi(m as i32));
        }
        self.compose(&d)
    }
    fn sin(&self) -> Self {
        let (ds, _) = sincos_series(self.c[0], self.ord);
        let mut t = self.compose(&ds);
        t.c[0] = self.c[0].sin();
        t
    }
    fn cos(&self) -> Self {
        let (_, dc) = sincos_series(self.c[0], self.ord);
        let mut t = self.compose(&dc);
        t.c[0] = self.c[0].cos();
        t
    }
    fn tan(&self) -> Self {
        let (ds, dc) = sincos_series(self.c[0], self.ord);
        let mut d = useries_mul(&ds, &useries_recip(&dc));
        d[0] = self.c[0].tan();
        self.compose(&d)
    }
    fn atan(&self) -> Self {
        let x0 = self.c[0];
        let k = self.ord;
        // d/dt atan(x0 + t) = 1 / (1 + (x0 + t)^2)
        let mut q = vec![0.0; k.max(1)];
        q[0] = 1.0 + x0 * x0;
        if k > 1 {
            q[1] = 2.0 * x0;
        }
        if k > 2 {
            q[2] = 1.0;
        }
        let r = useries_recip(&q);
        let mut d = vec![0.0; k + 1];
        d[0] = x0.atan();
        for m in 1..=k {
            d[m] = r[m - 1] / m as f64;
        }
        self.compose(&d)
    }
    fn all_finite(&self) -> bool {
        self.coeffs().iter().all(|x| x.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_counts() {
        let l = Layout::get(3, 6);
        assert_eq!(l.len(), 84);
        assert_eq!(l.exponents(1), &[1, 0, 0]);
        assert_eq!(l.exponents(3), &[0, 0, 1]);
    }

    #[test]
    fn univariate_exp_coefficients() {
        let x = Taylor::seed(&[0.0], 5);
        let e = x[0].exp();
        let fact = [1.0, 1.0, 2.0, 6.0, 24.0, 120.0];
        for (m, f) in fact.iter().enumerate() {
            assert!((e.coeffs()[m] - 1.0 / f).abs() < 1e-15);
        }
    }

    #[test]
    fn division_inverts_multiplication() {
        let x = Taylor::seed(&[0.3, -0.2], 4);
        let a = x[0].sin().add(&x[1].scale(2.0));
        let b = x[1].exp().add(&x[0].mul(&x[0]));
        let q = a.mul(&b).div(&b);
        for (u, v) in q.coeffs().iter().zip(a.coeffs()) {
            assert!((u - v).abs() < 1e-13);
        }
    }

    #[test]
    fn partial_lowers_order() {
        let x = Taylor::seed(&[1.0, 2.0], 3);
        let f = x[0].mul(&x[0]).mul(&x[1]);
        let fx = f.partial(0);
        assert_eq!(fx.order(), 2);
        assert!((fx.value() - 4.0).abs() < 1e-15);
        let fxy = fx.partial(1);
        assert!((fxy.value() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn atan_and_tan_are_inverse() {
        let x = Taylor::seed(&[0.4], 6);
        let y = x[0].tan().atan();
        for (u, v) in y.coeffs().iter().zip(x[0].coeffs()) {
            assert!((u - v).abs() < 1e-12);
        }
        let s = x[0].sqrt().mul(&x[0].sqrt());
        for (u, v) in s.coeffs().iter().zip(x[0].coeffs()) {
            assert!((u - v).abs() < 1e-12);
        }
        let l = x[0].exp().ln();
        for (u, v) in l.coeffs().iter().zip(x[0].coeffs()) {
            assert!((u - v).abs() < 1e-12);
        }
    }
}
