//! Log-barrier Newton method for the convex max-min subproblem
//!
//!   maximize t  s.t.  t ≤ w_k·ln z_k(x),  x ≥ 0,  x_hc,i + x_lc,i ≤ 1,
//!
//! where each `z_k(x) = 1 + 2a·√x_s − Σ b_v·x_v − c0` is concave.

use nalgebra::{DMatrix, DVector};

/// One concave rate row after the quadratic transform.
#[derive(Debug, Clone)]
pub struct Row {
    pub signal: usize,
    pub a: f64,
    pub b: Vec<(usize, f64)>,
    pub c0: f64,
    pub w: f64,
}

impl Row {
    pub fn z(&self, x: &[f64]) -> f64 {
        1.0 + 2.0 * self.a * x[self.signal].sqrt() - self.b.iter().map(|&(v, b)| b * x[v]).sum::<f64>() - self.c0
    }

    pub fn f(&self, x: &[f64]) -> f64 {
        self.w * self.z(x).ln()
    }
}

#[derive(Debug, Clone)]
pub struct InnerSolution {
    pub x: Vec<f64>,
    pub t: f64,
    pub newton_steps: usize,
}

const GAP_TOL: f64 = 1e-11;
const TAU_GROWTH: f64 = 16.0;
const MAX_NEWTON: usize = 200;

struct Barrier<'a> {
    rows: &'a [Row],
    n_vars: usize,
}

impl Barrier<'_> {
    fn n_constraints(&self) -> usize {
        self.rows.len() + self.n_vars + self.n_vars / 2
    }

    /// Barrier objective, `None` outside the domain.
    fn value(&self, x: &[f64], t: f64, tau: f64) -> Option<f64> {
        let mut v = -tau * t;
        for r in self.rows {
            let z = r.z(x);
            if !(z > 0.0) {
                return None;
            }
            let u = r.w * z.ln() - t;
            if !(u > 0.0) {
                return None;
            }
            v -= u.ln();
        }
        for &xi in x {
            if !(xi > 0.0) {
                return None;
            }
            v -= xi.ln();
        }
        for i in 0..self.n_vars / 2 {
            let s = 1.0 - x[2 * i] - x[2 * i + 1];
            if !(s > 0.0) {
                return None;
            }
            v -= s.ln();
        }
        Some(v)
    }

    fn grad_hess(&self, x: &[f64], t: f64, tau: f64) -> (DVector<f64>, DMatrix<f64>) {
        let n = self.n_vars + 1;
        let ti = self.n_vars;
        let mut g = DVector::zeros(n);
        let mut h = DMatrix::zeros(n, n);
        g[ti] = -tau;
        let mut dz = vec![0.0; n];
        let mut gu = vec![0.0; n];
        let mut idx: Vec<usize> = Vec::with_capacity(n);
        for r in self.rows {
            let z = r.z(x);
            let u = r.w * z.ln() - t;
            idx.clear();
            let s = r.signal;
            let sq = x[s].sqrt();
            dz[s] = r.a / sq;
            idx.push(s);
            for &(v, b) in &r.b {
                if !idx.contains(&v) {
                    idx.push(v);
                }
                dz[v] -= b;
            }
            for &v in &idx {
                gu[v] = r.w * dz[v] / z;
            }
            gu[ti] = -1.0;
            idx.push(ti);
            // -ln(u): gradient -∇u/u, Hessian ∇u∇uᵀ/u² - H_u/u
            for &p in &idx {
                g[p] -= gu[p] / u;
            }
            let c_outer = r.w / (u * z * z);
            for &p in &idx {
                for &q in &idx {
                    let mut v = gu[p] * gu[q] / (u * u);
                    if p != ti && q != ti {
                        v += c_outer * dz[p] * dz[q];
                    }
                    h[(p, q)] += v;
                }
            }
            // H_z has a single entry: -a / (2 x_s^{3/2})
            h[(s, s)] += r.w / (u * z) * r.a / (2.0 * sq * x[s]);
            for &p in &idx {
                dz[p] = 0.0;
                gu[p] = 0.0;
            }
        }
        for (v, &xv) in x.iter().enumerate() {
            g[v] -= 1.0 / xv;
            h[(v, v)] += 1.0 / (xv * xv);
        }
        for i in 0..self.n_vars / 2 {
            let (p, q) = (2 * i, 2 * i + 1);
            let s = 1.0 - x[p] - x[q];
            g[p] += 1.0 / s;
            g[q] += 1.0 / s;
            let c = 1.0 / (s * s);
            h[(p, p)] += c;
            h[(q, q)] += c;
            h[(p, q)] += c;
            h[(q, p)] += c;
        }
        (g, h)
    }

    /// Damped Newton centering at fixed `tau`. Returns the step count.
    fn center(&self, x: &mut Vec<f64>, t: &mut f64, tau: f64) -> usize {
        let n = self.n_vars + 1;
        let mut steps = 0;
        let mut fx = self.value(x, *t, tau).expect("centering starts inside the domain");
        while steps < MAX_NEWTON {
            steps += 1;
            let (g, mut h) = self.grad_hess(x, *t, tau);
            let dir = loop {
                if let Some(ch) = h.clone().cholesky() {
                    break -ch.solve(&g);
                }
                let bump = 1e-12 * h.diagonal().amax().max(1.0);
                for d in 0..n {
                    h[(d, d)] += bump;
                }
            };
            let decrement = -g.dot(&dir);
            if !(decrement > 0.0) || decrement / 2.0 <= 1e-12 {
                break;
            }
            let mut s = 1.0;
            let mut trial = x.clone();
            loop {
                for v in 0..self.n_vars {
                    trial[v] = x[v] + s * dir[v];
                }
                let tt = *t + s * dir[self.n_vars];
                if let Some(ft) = self.value(&trial, tt, tau) {
                    if ft <= fx - 0.25 * s * decrement {
                        std::mem::swap(x, &mut trial);
                        *t = tt;
                        fx = ft;
                        break;
                    }
                }
                s *= 0.5;
                if s < 1e-16 {
                    return steps;
                }
            }
        }
        steps
    }
}

/// Nudge a feasible point strictly inside the power constraints.
fn interior(x0: &[f64]) -> Vec<f64> {
    const MARGIN: f64 = 1e-6;
    let mut x: Vec<f64> = x0.iter().map(|v| v.max(MARGIN)).collect();
    for pair in x.chunks_mut(2) {
        let s: f64 = pair.iter().sum();
        if s > 1.0 - MARGIN {
            pair.iter_mut().for_each(|v| *v *= (1.0 - MARGIN) / s);
        }
    }
    x
}

/// Maximize the smallest row value starting from the feasible `x0`.
pub fn maximize_min(rows: &[Row], x0: &[f64]) -> InnerSolution {
    let barrier = Barrier { rows, n_vars: x0.len() };
    let mut x = interior(x0);
    let fmin = rows.iter().map(|r| r.f(&x)).fold(f64::INFINITY, f64::min);
    let fmin = if fmin.is_finite() { fmin } else { 0.0 };
    let mut t = fmin - 0.1 * fmin.abs().max(1e-3);
    let m = barrier.n_constraints() as f64;
    let mut tau = m / (0.5 * fmin.abs().max(1e-3));
    let mut newton_steps = 0;
    loop {
        newton_steps += barrier.center(&mut x, &mut t, tau);
        if m / tau < GAP_TOL * t.abs().max(1e-3) {
            break;
        }
        tau *= TAU_GROWTH;
    }
    // the barrier keeps t strictly below every row; report the attained minimum
    let t = rows.iter().map(|r| r.f(&x)).fold(f64::INFINITY, f64::min);
    InnerSolution { x, t, newton_steps }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_variable_pair_balances_two_rows() {
        // row 0 grows with x0, row 1 with x1; budget x0 + x1 <= 1
        let rows = vec![
            Row {
                signal: 0,
                a: 1.0,
                b: vec![],
                c0: 0.0,
                w: 1.0,
            },
            Row {
                signal: 1,
                a: 1.0,
                b: vec![],
                c0: 0.0,
                w: 1.0,
            },
        ];
        let s = maximize_min(&rows, &[0.1, 0.2]);
        assert!((s.x[0] - 0.5).abs() < 1e-6, "{:?}", s.x);
        assert!((s.x[1] - 0.5).abs() < 1e-6);
        let expected = (1.0 + 2.0 * 0.5f64.sqrt()).ln();
        assert!((s.t - expected).abs() < 1e-9);
    }

    #[test]
    fn interference_pushes_power_down() {
        // z = 1 + 2√x0 - 3 x0: maximized at x0 = 1/9
        let rows = vec![Row {
            signal: 0,
            a: 1.0,
            b: vec![(0, 3.0)],
            c0: 0.0,
            w: 2.0,
        }];
        let s = maximize_min(&rows, &[0.5, 0.25]);
        assert!((s.x[0] - 1.0 / 9.0).abs() < 1e-6, "{:?}", s.x);
        assert!((s.t - 2.0 * (4.0f64 / 3.0).ln()).abs() < 1e-9);
    }
}
