//! Small numerical kernels shared across modules: bisection, adaptive
//! Gauss–Kronrod quadrature and a Nelder–Mead simplex minimizer.

/// Bisection for the switching point of a monotone predicate.
///
/// `pred(lo)` must be false and `pred(hi)` true; returns the final bracket
/// `(lo, hi)` with `hi - lo <= tol`.
pub(crate) fn bisect<F: FnMut(f64) -> bool>(mut lo: f64, mut hi: f64, tol: f64, mut pred: F) -> (f64, f64) {
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    (lo, hi)
}

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5, 7).
const G_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gauss_kronrod_15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = GK_WEIGHTS[7] * fc;
    let mut gauss = G_WEIGHTS[3] * fc;
    for (i, (&x, &w)) in GK_NODES.iter().zip(GK_WEIGHTS.iter()).take(7).enumerate() {
        let pair = f(c - h * x) + f(c + h * x);
        kronrod += w * pair;
        if i % 2 == 1 {
            gauss += G_WEIGHTS[i / 2] * pair;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Adaptive 15-point Gauss–Kronrod integration of `f` over `[a, b]`.
///
/// Returns `(value, error_estimate)`; the error estimate is the sum of the
/// Kronrod–Gauss differences on the accepted panels.
pub(crate) fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, max_depth: u32) -> (f64, f64) {
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> (f64, f64) {
        let (v, e) = gauss_kronrod_15(f, a, b);
        if e <= tol || depth == 0 {
            return (v, e);
        }
        let m = 0.5 * (a + b);
        let (v1, e1) = rec(f, a, m, 0.5 * tol, depth - 1);
        let (v2, e2) = rec(f, m, b, 0.5 * tol, depth - 1);
        (v1 + v2, e1 + e2)
    }
    if b <= a {
        return (0.0, 0.0);
    }
    rec(f, a, b, tol, max_depth)
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct NelderMead {
    pub max_evals: usize,
    pub ftol: f64,
    pub xtol: f64,
}

/// Minimizes `f` starting from `x0` with an initial simplex of edge `step`.
pub(crate) fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    step: f64,
    opts: NelderMead,
) -> (Vec<f64>, f64) {
    let n = x0.len();
    let mut pts: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    pts.push(x0.to_vec());
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += step;
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(|p| f(p)).collect();
    let mut evals = n + 1;
    let mut centroid = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut trial2 = vec![0.0; n];

    while evals < opts.max_evals {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        let best = order[0];
        let worst = order[n];
        let second = order[n - 1];

        let spread = vals[worst] - vals[best];
        let size = pts
            .iter()
            .map(|p| p.iter().zip(&pts[best]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if spread <= opts.ftol && size <= opts.xtol {
            break;
        }

        centroid.iter_mut().for_each(|c| *c = 0.0);
        for &i in order.iter().take(n) {
            for (c, x) in centroid.iter_mut().zip(&pts[i]) {
                *c += x / n as f64;
            }
        }
        let along = |coef: f64, out: &mut Vec<f64>, worst_p: &[f64], centroid: &[f64]| {
            for k in 0..n {
                out[k] = centroid[k] + coef * (centroid[k] - worst_p[k]);
            }
        };

        along(1.0, &mut trial, &pts[worst], &centroid);
        let fr = f(&trial);
        evals += 1;
        if fr < vals[best] {
            along(2.0, &mut trial2, &pts[worst], &centroid);
            let fe = f(&trial2);
            evals += 1;
            if fe < fr {
                pts[worst].copy_from_slice(&trial2);
                vals[worst] = fe;
            } else {
                pts[worst].copy_from_slice(&trial);
                vals[worst] = fr;
            }
            continue;
        }
        if fr < vals[second] {
            pts[worst].copy_from_slice(&trial);
            vals[worst] = fr;
            continue;
        }
        let (coef, reference) = if fr < vals[worst] { (0.5, fr) } else { (-0.5, vals[worst]) };
        along(coef, &mut trial2, &pts[worst], &centroid);
        let fc = f(&trial2);
        evals += 1;
        if fc < reference {
            pts[worst].copy_from_slice(&trial2);
            vals[worst] = fc;
            continue;
        }
        // shrink toward the best vertex
        let best_p = pts[best].clone();
        for i in 0..=n {
            if i == best {
                continue;
            }
            for k in 0..n {
                pts[i][k] = best_p[k] + 0.5 * (pts[i][k] - best_p[k]);
            }
            vals[i] = f(&pts[i]);
            evals += 1;
        }
    }
    let best = (0..=n).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap_or(0);
    (pts[best].clone(), vals[best])
}
