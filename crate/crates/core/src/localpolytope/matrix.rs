//! Implicit 0/1 constraint matrix of the local-model LP.
//!
//! Column `j` is a deterministic strategy: its base-`d` digits, read over
//! (party, setting) pairs with party 0 / setting 0 most significant, give the
//! outcome each party reports for each setting. Row `s * d^N + o` is the
//! (setting tuple, outcome tuple) pair. The matrix is never materialized.
//!
//! The full row set is rank deficient: per party, `p(d-1|x)` for `x > 0` is
//! fixed by normalization and `p(.|0)`. A reduced matrix keeps the joint rows
//! whose every party factor is independent, which is a row basis because the
//! matrix is a Kronecker product of single-party blocks.

use crate::quantum::Scenario;

#[derive(Clone, Debug)]
pub(crate) struct ConstraintMatrix {
    scenario: Scenario,
    /// Position of party p's setting 0 among all digits.
    offsets: Vec<usize>,
    total_digits: usize,
    vars: usize,
    rows: usize,
    /// Full row index of each kept row, when reduced.
    kept: Option<Vec<usize>>,
    /// Reduced index of each full row, `usize::MAX` if dropped.
    slot: Vec<usize>,
}

impl ConstraintMatrix {
    pub fn new(scenario: &Scenario, vars: usize) -> Self {
        let mut offsets = Vec::with_capacity(scenario.parties());
        let mut acc = 0;
        for &m in scenario.settings() {
            offsets.push(acc);
            acc += m;
        }
        Self {
            scenario: scenario.clone(),
            offsets,
            total_digits: acc,
            vars,
            rows: scenario.setting_tuples() * scenario.outcome_tuples(),
            kept: None,
            slot: Vec::new(),
        }
    }

    /// Matrix restricted to a row basis.
    pub fn reduced(scenario: &Scenario, vars: usize) -> Self {
        let mut mat = Self::new(scenario, vars);
        let kept = independent_rows(scenario);
        let mut slot = vec![usize::MAX; mat.rows];
        for (i, &r) in kept.iter().enumerate() {
            slot[r] = i;
        }
        mat.rows = kept.len();
        mat.kept = Some(kept);
        mat.slot = slot;
        mat
    }

    /// Full row index of each row of this matrix.
    pub fn full_row(&self, i: usize) -> usize {
        self.kept.as_ref().map_or(i, |k| k[i])
    }

    /// Entries of a full-length vector on this matrix's rows.
    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        match &self.kept {
            Some(k) => k.iter().map(|&r| full[r]).collect(),
            None => full.to_vec(),
        }
    }

    /// Full-length vector that is `y` on kept rows and zero elsewhere.
    pub fn expand(&self, y: &[f64]) -> Vec<f64> {
        match &self.kept {
            Some(k) => {
                let mut full = vec![0.0; self.slot.len()];
                for (&r, &v) in k.iter().zip(y) {
                    full[r] = v;
                }
                full
            }
            None => y.to_vec(),
        }
    }

    pub fn vars(&self) -> usize {
        self.vars
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    /// Outcome digits `assignment[p][k]` of strategy `j`.
    pub fn strategy(&self, j: usize) -> Vec<Vec<usize>> {
        let d = self.scenario.outcomes();
        let mut digits = vec![0; self.total_digits];
        let mut r = j;
        for slot in digits.iter_mut().rev() {
            *slot = r % d;
            r /= d;
        }
        self.offsets
            .iter()
            .zip(self.scenario.settings())
            .map(|(&off, &m)| digits[off..off + m].to_vec())
            .collect()
    }

    /// Row indices of the ones in column `j`, one per setting tuple.
    pub fn column_into(&self, j: usize, out: &mut Vec<usize>) {
        out.clear();
        let sc = &self.scenario;
        let assignment = self.strategy(j);
        let cols = sc.outcome_tuples();
        let mut a = vec![0; sc.parties()];
        for s in 0..sc.setting_tuples() {
            let x = sc.decode_settings(s);
            for (p, slot) in a.iter_mut().enumerate() {
                *slot = assignment[p][x[p]];
            }
            let r = s * cols + sc.encode_outcomes(&a);
            match self.kept {
                Some(_) if self.slot[r] == usize::MAX => {}
                Some(_) => out.push(self.slot[r]),
                None => out.push(r),
            }
        }
    }

    /// Computes `y^T A_j` for every column into `out`.
    ///
    /// Parties are contracted one at a time: fixing party p's assignment
    /// collapses its setting and outcome axes, so the total work is close to
    /// one addition per column.
    pub fn strategy_values(&self, y: &[f64], out: &mut [f64]) {
        debug_assert_eq!(y.len(), self.rows);
        debug_assert_eq!(out.len(), self.vars);
        let sc = &self.scenario;
        let n = sc.parties();
        let d = sc.outcomes();
        // one partially contracted table per intermediate party
        let mut levels: Vec<Vec<f64>> = (1..n)
            .map(|p| vec![0.0; sc.settings()[p..].iter().product::<usize>() * d.pow((n - p) as u32)])
            .collect();
        let mut digits: Vec<Vec<usize>> = sc.settings().iter().map(|&m| vec![0; m]).collect();
        let mut cursor = 0;
        if self.kept.is_some() {
            self.contract(0, &self.expand(y), &mut levels, &mut digits, out, &mut cursor);
        } else {
            self.contract(0, y, &mut levels, &mut digits, out, &mut cursor);
        }
        debug_assert_eq!(cursor, self.vars);
    }

    fn contract(
        &self,
        p: usize,
        t: &[f64],
        levels: &mut [Vec<f64>],
        digits: &mut [Vec<usize>],
        out: &mut [f64],
        cursor: &mut usize,
    ) {
        let sc = &self.scenario;
        let d = sc.outcomes();
        let m = sc.settings()[p];
        let (mine, rest_digits) = digits.split_first_mut().expect("one digit row per party");
        if rest_digits.is_empty() {
            // t[k][a] with k < m, a < d; out[digits] = sum_k t[k][a_k], filled
            // in place by prefix expansion (most significant digit first)
            let count = d.pow(m as u32);
            let dst = &mut out[*cursor..*cursor + count];
            dst[0] = 0.0;
            let mut len = 1;
            for k in 0..m {
                let row = &t[k * d..(k + 1) * d];
                for i in (0..len).rev() {
                    let base = dst[i];
                    for (a, &v) in row.iter().enumerate() {
                        dst[i * d + a] = base + v;
                    }
                }
                len *= d;
            }
            *cursor += count;
            return;
        }
        let s_rest: usize = sc.settings()[p + 1..].iter().product();
        let d_rest = d.pow(rest_digits.len() as u32);
        let stride = d * d_rest;
        let (next, deeper) = levels.split_first_mut().expect("one scratch table per intermediate party");
        mine.iter_mut().for_each(|v| *v = 0);
        for _ in 0..d.pow(m as u32) {
            next.iter_mut().for_each(|v| *v = 0.0);
            for (k, &a) in mine.iter().enumerate() {
                for sr in 0..s_rest {
                    let src = &t[(k * s_rest + sr) * stride + a * d_rest..][..d_rest];
                    for (v, &w) in next[sr * d_rest..(sr + 1) * d_rest].iter_mut().zip(src) {
                        *v += w;
                    }
                }
            }
            self.contract(p + 1, next, deeper, rest_digits, out, cursor);
            increment(mine, d);
        }
    }
}

/// Single-party row `(x, a)` is independent when `a < d - 1` or `x = 0`.
fn party_row_kept(x: usize, a: usize, d: usize) -> bool {
    a + 1 < d || x == 0
}

fn independent_rows(sc: &Scenario) -> Vec<usize> {
    let d = sc.outcomes();
    let cols = sc.outcome_tuples();
    let mut kept = Vec::new();
    for s in 0..sc.setting_tuples() {
        let x = sc.decode_settings(s);
        for o in 0..cols {
            let a = sc.decode_outcomes(o);
            if x.iter().zip(&a).all(|(&xp, &ap)| party_row_kept(xp, ap, d)) {
                kept.push(s * cols + o);
            }
        }
    }
    kept
}

/// Largest gap between a dropped entry of `b` and the value the kept entries
/// imply for it. Zero up to rounding exactly when `b` is normalized and
/// no-signaling.
pub(crate) fn implied_residual(sc: &Scenario, b: &[f64]) -> f64 {
    let d = sc.outcomes();
    let n = sc.parties();
    let cols = sc.outcome_tuples();
    // single-party expansion of (x, a) over kept rows: (setting, outcome, coefficient)
    let expand = |x: usize, a: usize| -> Vec<(usize, usize, f64)> {
        if party_row_kept(x, a, d) {
            return vec![(x, a, 1.0)];
        }
        let mut v = vec![(0, d - 1, 1.0)];
        for k in 0..d - 1 {
            v.push((0, k, 1.0));
            v.push((x, k, -1.0));
        }
        v
    };
    let mut worst = 0.0_f64;
    for s in 0..sc.setting_tuples() {
        let x = sc.decode_settings(s);
        for o in 0..cols {
            let a = sc.decode_outcomes(o);
            if x.iter().zip(&a).all(|(&xp, &ap)| party_row_kept(xp, ap, d)) {
                continue;
            }
            let factors: Vec<_> = (0..n).map(|p| expand(x[p], a[p])).collect();
            let mut idx = vec![0usize; n];
            let mut predicted = 0.0;
            'terms: loop {
                let mut coef = 1.0;
                let mut xs = vec![0; n];
                let mut os = vec![0; n];
                for p in 0..n {
                    let (xp, ap, c) = factors[p][idx[p]];
                    xs[p] = xp;
                    os[p] = ap;
                    coef *= c;
                }
                predicted += coef * b[sc.encode_settings(&xs) * cols + sc.encode_outcomes(&os)];
                for p in (0..n).rev() {
                    idx[p] += 1;
                    if idx[p] < factors[p].len() {
                        continue 'terms;
                    }
                    idx[p] = 0;
                }
                break;
            }
            worst = worst.max((predicted - b[s * cols + o]).abs());
        }
    }
    worst
}

/// Advances a most-significant-first base-`d` counter.
fn increment(digits: &mut [usize], d: usize) {
    for slot in digits.iter_mut().rev() {
        *slot += 1;
        if *slot < d {
            return;
        }
        *slot = 0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contraction_matches_explicit_columns() {
        for (settings, d) in [(vec![2, 2], 3), (vec![2, 3], 2), (vec![2, 1, 2], 2), (vec![1, 2, 2], 3)] {
            let sc = Scenario::new(settings, d).unwrap();
            let vars = sc.variable_count() as usize;
            let mat = ConstraintMatrix::new(&sc, vars);
            let y: Vec<f64> = (0..mat.rows()).map(|i| ((i * 37 + 11) % 17) as f64 - 8.0).collect();
            let mut fast = vec![0.0; vars];
            mat.strategy_values(&y, &mut fast);
            let mut col = Vec::new();
            for (j, &f) in fast.iter().enumerate() {
                mat.column_into(j, &mut col);
                assert_eq!(col.len(), sc.setting_tuples());
                let slow: f64 = col.iter().map(|&r| y[r]).sum();
                assert!((slow - f).abs() < 1e-12, "column {j}");
            }
        }
    }

    #[test]
    fn reduced_rows_have_full_rank_count() {
        for (settings, d) in [(vec![2, 2], 3), (vec![2, 2, 2], 3), (vec![3, 2], 2), (vec![1, 2, 2], 2)] {
            let sc = Scenario::new(settings.clone(), d).unwrap();
            let mat = ConstraintMatrix::reduced(&sc, sc.variable_count() as usize);
            let rank: usize = settings.iter().map(|m| m * (d - 1) + 1).product();
            assert_eq!(mat.rows(), rank);
            let y: Vec<f64> = (0..mat.rows()).map(|i| ((i * 13 + 5) % 11) as f64 - 5.0).collect();
            let mut fast = vec![0.0; mat.vars()];
            mat.strategy_values(&y, &mut fast);
            let mut col = Vec::new();
            for (j, &f) in fast.iter().enumerate() {
                mat.column_into(j, &mut col);
                let slow: f64 = col.iter().map(|&r| y[r]).sum();
                assert!((slow - f).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn residual_detects_signaling() {
        let sc = Scenario::new(vec![2, 2], 2).unwrap();
        let local = crate::quantum::Behavior::deterministic(sc.clone(), &[vec![0, 1], vec![1, 1]]).unwrap();
        assert!(implied_residual(&sc, local.table()) < 1e-15);
        // Alice's marginal depends on Bob's setting
        let mut t = vec![0.25; 16];
        t[0] = 0.5;
        t[1] = 0.0;
        assert!(implied_residual(&sc, &t) > 0.1);
    }

    #[test]
    fn digit_order_is_party_major() {
        let sc = Scenario::new(vec![2, 2], 2).unwrap();
        let mat = ConstraintMatrix::new(&sc, 16);
        assert_eq!(mat.strategy(1), vec![vec![0, 0], vec![0, 1]]);
        assert_eq!(mat.strategy(8), vec![vec![1, 0], vec![0, 0]]);
    }
}
