// Central finite differences on vector-valued maps.

use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::geometry::wrap_difference;

fn diff(a: f64, b: f64, wrap: bool) -> f64 {
    if wrap {
        wrap_difference(a - b)
    } else {
        a - b
    }
}

/// Jacobian of `eval` at `z`. `inside` decides whether a stencil point may be
/// used; when only one side is admissible the difference is one-sided.
pub(crate) fn jacobian<E, I>(eval: E, z: &[f64], h: f64, wrap: &[bool], inside: I) -> DMatrix<f64>
where
    E: Fn(&[f64]) -> Vec<f64>,
    I: Fn(&[f64]) -> bool,
{
    let n = z.len();
    let center = eval(z);
    let rows = center.len();
    let mut j = DMatrix::zeros(rows, n);
    let mut w = z.to_vec();
    for c in 0..n {
        w[c] = z[c] + h;
        let fwd_ok = inside(&w);
        let fwd = fwd_ok.then(|| eval(&w));
        w[c] = z[c] - h;
        let bwd_ok = inside(&w);
        let bwd = bwd_ok.then(|| eval(&w));
        w[c] = z[c];
        for r in 0..rows {
            let wr = wrap.get(r).copied().unwrap_or(false);
            j[(r, c)] = match (&fwd, &bwd) {
                (Some(f), Some(b)) => diff(f[r], b[r], wr) / (2.0 * h),
                (Some(f), None) => diff(f[r], center[r], wr) / h,
                (None, Some(b)) => diff(center[r], b[r], wr) / h,
                (None, None) => f64::NAN,
            };
        }
    }
    j
}

/// One Hessian per output component of `eval`, by second-order central
/// differences.
pub(crate) fn hessians<E>(eval: E, z: &[f64], h: f64, wrap: &[bool]) -> Vec<DMatrix<f64>>
where
    E: Fn(&[f64]) -> Vec<f64>,
{
    let n = z.len();
    let center = eval(z);
    let rows = center.len();
    let mut out = alloc::vec![DMatrix::zeros(n, n); rows];
    let mut w = z.to_vec();
    for a in 0..n {
        w[a] = z[a] + h;
        let fp = eval(&w);
        w[a] = z[a] - h;
        let fm = eval(&w);
        w[a] = z[a];
        for r in 0..rows {
            let wr = wrap.get(r).copied().unwrap_or(false);
            out[r][(a, a)] = (diff(fp[r], center[r], wr) - diff(center[r], fm[r], wr)) / (h * h);
        }
        for b in (a + 1)..n {
            let mut eval_at = |da: f64, db: f64| {
                w[a] = z[a] + da;
                w[b] = z[b] + db;
                let v = eval(&w);
                w[a] = z[a];
                w[b] = z[b];
                v
            };
            let fpp = eval_at(h, h);
            let fpm = eval_at(h, -h);
            let fmp = eval_at(-h, h);
            let fmm = eval_at(-h, -h);
            for r in 0..rows {
                let wr = wrap.get(r).copied().unwrap_or(false);
                let v = (diff(fpp[r], fpm[r], wr) - diff(fmp[r], fmm[r], wr)) / (4.0 * h * h);
                out[r][(a, b)] = v;
                out[r][(b, a)] = v;
            }
        }
    }
    out
}

/// `∂M/∂x_j` for a matrix-valued `eval`, one matrix per coordinate.
pub(crate) fn matrix_derivative<E>(eval: E, x: &[f64], h: f64) -> Vec<DMatrix<f64>>
where
    E: Fn(&[f64]) -> DMatrix<f64>,
{
    let mut w = x.to_vec();
    (0..x.len())
        .map(|j| {
            w[j] = x[j] + h;
            let p = eval(&w);
            w[j] = x[j] - h;
            let m = eval(&w);
            w[j] = x[j];
            (p - m) / (2.0 * h)
        })
        .collect()
}
