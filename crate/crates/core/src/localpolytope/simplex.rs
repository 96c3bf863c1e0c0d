//! Phase-one revised simplex for `A x + r = b`, `x, r >= 0`, minimizing the
//! sum of the artificials `r`.
//!
//! The basis inverse is kept dense and refactored periodically. Pricing is
//! Dantzig's rule, switching to Bland's rule after a run of degenerate pivots.
//! Artificials that leave the basis are dropped for good.

use super::matrix::ConstraintMatrix;

const PIVOT_TOL: f64 = 1e-9;
const PRICE_TOL: f64 = 1e-11;
const REFACTOR_EVERY: usize = 200;
const STALL_LIMIT: usize = 30;

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct SimplexOptions {
    /// Stop as soon as the objective drops to this level.
    pub target: f64,
    pub max_iterations: usize,
}

#[derive(Clone, Debug)]
pub(crate) struct SimplexOutcome {
    pub objective: f64,
    /// Dual vector `c_B^T B^{-1}` at termination.
    pub dual: Vec<f64>,
    pub iterations: usize,
    pub hit_cap: bool,
    pub singular: bool,
}

struct State<'a> {
    mat: &'a ConstraintMatrix,
    b: &'a [f64],
    m: usize,
    /// Basic variable per row: `j < vars` structural, `vars + i` artificial.
    basis: Vec<usize>,
    binv: Vec<f64>,
    xb: Vec<f64>,
}

impl<'a> State<'a> {
    fn is_artificial(&self, v: usize) -> bool {
        v >= self.mat.vars()
    }

    /// Orders variables for Bland's rule: artificials first.
    fn bland_key(&self, v: usize) -> usize {
        if self.is_artificial(v) {
            v - self.mat.vars()
        } else {
            self.m + v
        }
    }

    fn objective(&self) -> f64 {
        self.basis
            .iter()
            .zip(&self.xb)
            .filter(|(&v, _)| self.is_artificial(v))
            .map(|(_, &x)| x.max(0.0))
            .sum()
    }

    fn dual(&self, y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        let m = self.m;
        for (i, &v) in self.basis.iter().enumerate() {
            if self.is_artificial(v) {
                let row = &self.binv[i * m..(i + 1) * m];
                for (yk, &bk) in y.iter_mut().zip(row) {
                    *yk += bk;
                }
            }
        }
    }

    /// `B^{-1} a` for a basis column given by its nonzero rows.
    fn ftran(&self, rows: &[usize], u: &mut [f64]) {
        let m = self.m;
        for (i, ui) in u.iter_mut().enumerate() {
            let row = &self.binv[i * m..(i + 1) * m];
            *ui = rows.iter().map(|&r| row[r]).sum();
        }
    }

    fn pivot(&mut self, r: usize, u: &[f64]) {
        let m = self.m;
        let piv = u[r];
        {
            let row_r = &mut self.binv[r * m..(r + 1) * m];
            row_r.iter_mut().for_each(|v| *v /= piv);
        }
        let row_r: Vec<f64> = self.binv[r * m..(r + 1) * m].to_vec();
        for (i, &ui) in u.iter().enumerate() {
            if i == r || ui == 0.0 {
                continue;
            }
            let row = &mut self.binv[i * m..(i + 1) * m];
            for (v, &w) in row.iter_mut().zip(&row_r) {
                *v -= ui * w;
            }
        }
        let theta = self.xb[r] / piv;
        for (i, &ui) in u.iter().enumerate() {
            if i != r {
                self.xb[i] -= theta * ui;
            }
        }
        self.xb[r] = theta;
    }

    /// Rebuilds `B^{-1}` and `x_B` from scratch by Gauss-Jordan elimination.
    fn refactor(&mut self) -> bool {
        let m = self.m;
        let mut a = vec![0.0_f64; m * m];
        let mut col = Vec::new();
        for (c, &v) in self.basis.iter().enumerate() {
            if self.is_artificial(v) {
                a[(v - self.mat.vars()) * m + c] = 1.0;
            } else {
                self.mat.column_into(v, &mut col);
                for &r in &col {
                    a[r * m + c] += 1.0;
                }
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for c in 0..m {
            let (p, best) = (c..m)
                .map(|r| (r, a[r * m + c].abs()))
                .fold((c, -1.0_f64), |acc, x| if x.1 > acc.1 { x } else { acc });
            if best < 1e-12 {
                return false;
            }
            if p != c {
                for k in 0..m {
                    a.swap(p * m + k, c * m + k);
                    inv.swap(p * m + k, c * m + k);
                }
            }
            let d = a[c * m + c];
            for k in 0..m {
                a[c * m + k] /= d;
                inv[c * m + k] /= d;
            }
            for r in 0..m {
                if r == c {
                    continue;
                }
                let f = a[r * m + c];
                if f == 0.0 {
                    continue;
                }
                for k in 0..m {
                    a[r * m + k] -= f * a[c * m + k];
                    inv[r * m + k] -= f * inv[c * m + k];
                }
            }
        }
        // The elimination inverts B with columns ordered as the basis, so row
        // i of `inv` belongs to basis position i.
        self.binv = inv;
        for i in 0..m {
            let row = &self.binv[i * m..(i + 1) * m];
            self.xb[i] = row.iter().zip(self.b).map(|(a, b)| a * b).sum();
        }
        true
    }
}

pub(crate) fn solve(mat: &ConstraintMatrix, b: &[f64], opts: SimplexOptions) -> SimplexOutcome {
    let m = mat.rows();
    let vars = mat.vars();
    let mut binv = vec![0.0; m * m];
    for i in 0..m {
        binv[i * m + i] = 1.0;
    }
    let mut st = State {
        mat,
        b,
        m,
        basis: (0..m).map(|i| vars + i).collect(),
        binv,
        xb: b.to_vec(),
    };

    let mut y = vec![0.0; m];
    let mut values = vec![0.0; vars];
    let mut u = vec![0.0; m];
    let mut col = Vec::with_capacity(mat.scenario().setting_tuples());
    let mut in_basis = vec![false; vars];

    let mut iterations = 0;
    let mut since_refactor = 0;
    let mut stalled = 0;
    let mut bland = false;
    let mut best_obj = st.objective();
    let mut hit_cap = false;
    let mut singular = false;
    let mut refresh_dual = true;

    loop {
        let obj = st.objective();
        if obj <= opts.target {
            break;
        }
        if iterations >= opts.max_iterations {
            hit_cap = true;
            break;
        }
        if refresh_dual {
            st.dual(&mut y);
            refresh_dual = false;
        }
        mat.strategy_values(&y, &mut values);
        // reduced cost of structural j is -y^T A_j; enter on the largest y^T A_j
        let entering = if bland {
            values.iter().enumerate().find(|(j, &v)| v > PRICE_TOL && !in_basis[*j]).map(|(j, _)| j)
        } else {
            let mut best: Option<(usize, f64)> = None;
            for (j, &v) in values.iter().enumerate() {
                if v > PRICE_TOL && !in_basis[j] && best.is_none_or(|(_, bv)| v > bv) {
                    best = Some((j, v));
                }
            }
            best.map(|(j, _)| j)
        };
        let Some(q) = entering else { break };

        mat.column_into(q, &mut col);
        st.ftran(&col, &mut u);

        let mut leave: Option<(usize, f64)> = None;
        for (i, &ui) in u.iter().enumerate() {
            if ui <= PIVOT_TOL {
                continue;
            }
            let ratio = st.xb[i].max(0.0) / ui;
            leave = match leave {
                None => Some((i, ratio)),
                Some((li, lr)) => {
                    let better = if ratio < lr - 1e-12 {
                        true
                    } else if ratio <= lr + 1e-12 {
                        let (vi, vl) = (st.basis[i], st.basis[li]);
                        st.bland_key(vi) < st.bland_key(vl)
                    } else {
                        false
                    };
                    if better {
                        Some((i, ratio))
                    } else {
                        Some((li, lr))
                    }
                }
            };
        }
        let Some((r, _)) = leave else {
            // Unbounded direction cannot occur in phase one; treat as stall.
            break;
        };

        let out = st.basis[r];
        let yq = values[q];
        st.pivot(r, &u);
        // y' = y - (y^T A_q) * (new row r of B^{-1})
        for (yk, &bk) in y.iter_mut().zip(&st.binv[r * m..(r + 1) * m]) {
            *yk -= yq * bk;
        }
        if !st.is_artificial(out) {
            in_basis[out] = false;
        }
        st.basis[r] = q;
        in_basis[q] = true;
        iterations += 1;
        since_refactor += 1;

        if since_refactor >= REFACTOR_EVERY {
            since_refactor = 0;
            if !st.refactor() {
                singular = true;
                break;
            }
            refresh_dual = true;
        }

        let obj = st.objective();
        if obj < best_obj - 1e-13 {
            best_obj = obj;
            stalled = 0;
            bland = false;
        } else {
            stalled += 1;
            if stalled >= STALL_LIMIT {
                bland = true;
            }
        }
    }

    if since_refactor > 0 && !singular && !st.refactor() {
        singular = true;
    }
    st.dual(&mut y);
    SimplexOutcome { objective: st.objective(), dual: y, iterations, hit_cap, singular }
}
