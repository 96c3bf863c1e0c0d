//! Independent locality oracle: Wolfe's minimum-norm-point algorithm over the
//! explicitly enumerated deterministic behaviors.
//!
//! The behavior is local iff its Euclidean distance to the convex hull of the
//! deterministic vertices vanishes. When it does not, the nearest point gives
//! a separating hyperplane, which is checked against every vertex.

use crate::error::{Error, Result};
use crate::quantum::Behavior;

/// Largest strategy count accepted by [`brute_force_local`].
pub const BRUTE_FORCE_CAP: u128 = 100_000;

const ZERO_TOL: f64 = 1e-12;
const DISTANCE_TOL: f64 = 1e-16;

/// Decides locality by vertex enumeration. Returns `true` when local.
pub fn brute_force_local(behavior: &Behavior) -> Result<bool> {
    let sc = behavior.scenario();
    let count = sc.variable_count();
    if count > BRUTE_FORCE_CAP {
        return Err(Error::Precondition(format!(
            "{count} deterministic strategies exceed the brute-force cap {BRUTE_FORCE_CAP}"
        )));
    }
    let b = behavior.table();
    let vertices = enumerate_vertices(behavior)?;
    let bb: f64 = b.iter().map(|v| v * v).sum();
    let vb: Vec<f64> = vertices.iter().map(|v| v.iter().map(|&r| b[r]).sum()).collect();
    // p_j = v_j - b; x . p_j = x . v_j - x . b
    let dot_p = |x: &[f64], j: usize| -> f64 {
        let xv: f64 = vertices[j].iter().map(|&r| x[r]).sum();
        xv - x.iter().zip(b).map(|(a, c)| a * c).sum::<f64>()
    };
    let gram = |i: usize, k: usize| -> f64 {
        let shared = count_shared(&vertices[i], &vertices[k]) as f64;
        shared - vb[i] - vb[k] + bb
    };

    let start = (0..vertices.len())
        .min_by(|&i, &k| gram(i, i).total_cmp(&gram(k, k)))
        .ok_or_else(|| Error::Precondition("scenario has no strategies".into()))?;
    let mut set = vec![start];
    let mut lam = vec![1.0];
    let mut x = point(&set, &lam, &vertices, b);
    let scale = (0..vertices.len()).map(|j| gram(j, j)).fold(1.0, f64::max);

    for _major in 0..100_000 {
        let xx: f64 = x.iter().map(|v| v * v).sum();
        if xx <= DISTANCE_TOL {
            return Ok(true);
        }
        let (j, xp) = (0..vertices.len())
            .map(|j| (j, dot_p(&x, j)))
            .min_by(|a, c| a.1.total_cmp(&c.1))
            .expect("nonempty");
        if xx - xp <= ZERO_TOL * scale || set.contains(&j) {
            break;
        }
        set.push(j);
        lam.push(0.0);
        loop {
            let alpha = affine_minimizer(&set, &gram)?;
            if alpha.iter().all(|&a| a > ZERO_TOL) {
                lam = alpha;
                break;
            }
            let mut theta = 1.0_f64;
            for (l, a) in lam.iter().zip(&alpha) {
                if *a <= ZERO_TOL && l - a > 0.0 {
                    theta = theta.min(l / (l - a));
                }
            }
            for (l, a) in lam.iter_mut().zip(&alpha) {
                *l += theta * (a - *l);
            }
            let mut k = 0;
            while k < set.len() {
                if lam[k] <= ZERO_TOL {
                    set.remove(k);
                    lam.remove(k);
                } else {
                    k += 1;
                }
            }
            let total: f64 = lam.iter().sum();
            lam.iter_mut().for_each(|l| *l /= total);
            if set.len() == 1 {
                lam[0] = 1.0;
                break;
            }
        }
        x = point(&set, &lam, &vertices, b);
    }

    let xx: f64 = x.iter().map(|v| v * v).sum();
    if xx <= DISTANCE_TOL {
        return Ok(true);
    }
    // Every vertex must lie on the far side of the hyperplane through the
    // nearest point.
    let gap = (0..vertices.len()).map(|j| dot_p(&x, j)).fold(f64::INFINITY, f64::min);
    Ok(gap <= 0.5 * xx)
}

fn count_shared(a: &[usize], b: &[usize]) -> usize {
    // both sorted ascending
    let (mut i, mut k, mut n) = (0, 0, 0);
    while i < a.len() && k < b.len() {
        match a[i].cmp(&b[k]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => k += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                k += 1;
            }
        }
    }
    n
}

fn point(set: &[usize], lam: &[f64], vertices: &[Vec<usize>], b: &[f64]) -> Vec<f64> {
    let mut x: Vec<f64> = b.iter().map(|v| -v).collect();
    for (&j, &l) in set.iter().zip(lam) {
        for &r in &vertices[j] {
            x[r] += l;
        }
    }
    x
}

/// Minimizes `|sum a_i p_i|` subject to `sum a_i = 1` over the current set.
fn affine_minimizer<G: Fn(usize, usize) -> f64>(set: &[usize], gram: &G) -> Result<Vec<f64>> {
    let n = set.len();
    let dim = n + 1;
    let mut a = vec![0.0; dim * (dim + 1)];
    let w = dim + 1;
    for i in 0..n {
        for k in 0..n {
            a[i * w + k] = gram(set[i], set[k]);
        }
        a[i * w + n] = 1.0;
        a[n * w + i] = 1.0;
    }
    a[n * w + dim] = 1.0;
    for c in 0..dim {
        let p = (c..dim).max_by(|&r, &s| a[r * w + c].abs().total_cmp(&a[s * w + c].abs())).unwrap_or(c);
        if a[p * w + c].abs() < 1e-14 {
            return Err(Error::Precondition("degenerate vertex set in min-norm search".into()));
        }
        if p != c {
            for k in 0..w {
                a.swap(p * w + k, c * w + k);
            }
        }
        let d = a[c * w + c];
        for k in c..w {
            a[c * w + k] /= d;
        }
        for r in 0..dim {
            if r != c {
                let f = a[r * w + c];
                if f != 0.0 {
                    for k in c..w {
                        a[r * w + k] -= f * a[c * w + k];
                    }
                }
            }
        }
    }
    Ok((0..n).map(|i| a[i * w + dim]).collect())
}

/// Nonzero table positions of every deterministic behavior of the scenario.
fn enumerate_vertices(behavior: &Behavior) -> Result<Vec<Vec<usize>>> {
    let sc = behavior.scenario().clone();
    let d = sc.outcomes();
    let m = sc.settings().to_vec();
    let mut assignment: Vec<Vec<usize>> = m.iter().map(|&mi| vec![0; mi]).collect();
    let mut out = Vec::new();
    loop {
        let v = Behavior::deterministic(sc.clone(), &assignment)?;
        out.push(v.table().iter().enumerate().filter(|(_, &p)| p > 0.5).map(|(i, _)| i).collect());
        // odometer over all (party, setting) digits
        let mut carry = true;
        'outer: for party in assignment.iter_mut().rev() {
            for digit in party.iter_mut().rev() {
                *digit += 1;
                if *digit < d {
                    carry = false;
                    break 'outer;
                }
                *digit = 0;
            }
        }
        if carry {
            return Ok(out);
        }
    }
}
