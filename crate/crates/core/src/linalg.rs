//! Dense symmetric eigensolvers and a few small kernels.
//!
//! Two unrelated routes to the same spectrum live here: cyclic Jacobi (the
//! production path) and Householder tridiagonalization followed by Sturm
//! bisection (used to cross-check it). They share no code beyond the
//! symmetry check.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Jacobi stops once the off-diagonal Frobenius norm drops below this
/// fraction of the full Frobenius norm.
pub const JACOBI_OFF_TOL: f64 = 1e-12;
pub const JACOBI_SWEEP_CAP: usize = 100;

const SYMMETRY_RTOL: f64 = 1e-12;

pub fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    if !m.is_square() {
        return Err(Error::param(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let scale = m.amax().max(1.0);
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in 0..i {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    if worst > SYMMETRY_RTOL * scale {
        return Err(Error::NotSymmetric(worst));
    }
    Ok(())
}

fn off_norm_sq(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[(i, j)] * a[(i, j)];
            }
        }
    }
    s
}

/// Cyclic Jacobi eigendecomposition. Returns eigenvalues in ascending order
/// and, if requested, the matching orthonormal eigenvectors as columns.
pub fn jacobi_eigen(
    m: &DMatrix<f64>,
    want_vectors: bool,
) -> Result<(Vec<f64>, Option<DMatrix<f64>>)> {
    check_symmetric(m)?;
    let n = m.nrows();
    // symmetrize exactly so the rotations see a truly symmetric matrix
    let mut a = DMatrix::from_fn(n, n, |i, j| 0.5 * (m[(i, j)] + m[(j, i)]));
    let mut v = want_vectors.then(|| DMatrix::<f64>::identity(n, n));

    let total = a.norm();
    let target = (JACOBI_OFF_TOL * total).powi(2);
    let mut sweeps = 0;
    while off_norm_sq(&a) > target {
        if sweeps == JACOBI_SWEEP_CAP {
            return Err(Error::NoConvergence {
                cap: JACOBI_SWEEP_CAP,
            });
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + theta.hypot(1.0));
                let c = 1.0 / t.hypot(1.0);
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                if let Some(v) = v.as_mut() {
                    for k in 0..n {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = c * vkp - s * vkq;
                        v[(k, q)] = s * vkp + c * vkq;
                    }
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = v.map(|v| DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]));
    Ok((values, vectors))
}

/// Householder reduction of a symmetric matrix to tridiagonal form.
/// Returns `(diagonal, subdiagonal)`.
pub fn tridiagonalize(m: &DMatrix<f64>) -> Result<(Vec<f64>, Vec<f64>)> {
    check_symmetric(m)?;
    let n = m.nrows();
    let mut a = m.clone();
    for k in 0..n.saturating_sub(2) {
        let x: Vec<f64> = (k + 1..n).map(|i| a[(i, k)]).collect();
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let alpha = if x[0] > 0.0 { -norm } else { norm };
        let mut v = x;
        v[0] -= alpha;
        let vnorm_sq: f64 = v.iter().map(|t| t * t).sum();
        if vnorm_sq == 0.0 {
            continue;
        }
        // A <- H A H with H = I - 2 v v^T / (v^T v), acting on rows/cols k+1..
        let m_sub = n - k - 1;
        let idx = |i: usize| k + 1 + i;
        // p = A v * 2/(v^T v) over the full columns k.. (column k included)
        let beta = 2.0 / vnorm_sq;
        let mut p = vec![0.0; n];
        for (r, pr) in p.iter_mut().enumerate().skip(k) {
            *pr = beta * (0..m_sub).map(|j| a[(r, idx(j))] * v[j]).sum::<f64>();
        }
        let vp: f64 = (0..m_sub).map(|j| v[j] * p[idx(j)]).sum();
        let kfac = 0.5 * beta * vp;
        // w = p - kfac * v on the trailing block
        let mut w = p.clone();
        for j in 0..m_sub {
            w[idx(j)] -= kfac * v[j];
        }
        for i in 0..m_sub {
            for j in 0..m_sub {
                let (ri, cj) = (idx(i), idx(j));
                a[(ri, cj)] -= v[i] * w[cj] + w[ri] * v[j];
            }
        }
        // column/row k: only the first entry survives
        a[(k + 1, k)] = alpha;
        a[(k, k + 1)] = alpha;
        for i in 1..m_sub {
            a[(idx(i), k)] = 0.0;
            a[(k, idx(i))] = 0.0;
        }
    }
    let d = (0..n).map(|i| a[(i, i)]).collect();
    let e = (1..n).map(|i| a[(i, i - 1)]).collect();
    Ok((d, e))
}

/// Number of eigenvalues of the symmetric tridiagonal (d, e) strictly less
/// than `x`, from the signs of the LDL^T pivots.
pub fn sturm_count(d: &[f64], e: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0f64;
    for i in 0..d.len() {
        let off = if i == 0 { 0.0 } else { e[i - 1] * e[i - 1] / q };
        q = d[i] - x - off;
        if q == 0.0 {
            q = -f64::EPSILON * (x.abs() + 1.0);
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Ascending eigenvalues by tridiagonalization and Sturm-sequence bisection.
pub fn bisection_eigenvalues(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    let (d, e) = tridiagonalize(m)?;
    let n = d.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    // Gershgorin interval
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r = if i > 0 { e[i - 1].abs() } else { 0.0 } + if i + 1 < n { e[i].abs() } else { 0.0 };
        lo = lo.min(d[i] - r);
        hi = hi.max(d[i] + r);
    }
    let pad = 1e-12 * (lo.abs().max(hi.abs()).max(1.0));
    lo -= pad;
    hi += pad;

    let mut out = Vec::with_capacity(n);
    for idx in 0..n {
        // smallest x with count(x) > idx
        let (mut a, mut b) = (lo, hi);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            if sturm_count(&d, &e, mid) > idx {
                b = mid;
            } else {
                a = mid;
            }
        }
        out.push(0.5 * (a + b));
    }
    Ok(out)
}

/// Matrix exponential by Taylor series with scaling and squaring.
pub fn expm(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let norm = m.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let scaled = m / 2f64.powi(squarings);
    let mut result = DMatrix::<f64>::identity(n, n);
    let mut term = DMatrix::<f64>::identity(n, n);
    for j in 1..=30 {
        term = &term * &scaled / j as f64;
        result += &term;
        if term.amax() < 1e-18 * result.amax() {
            break;
        }
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

/// Iteration cap per eigenvalue in [`hessenberg_qr_eigenvalues`].
pub const HQR_ITER_CAP: usize = 60;

/// Eigenvalues of a general real matrix as `(re, im)` pairs: Hessenberg
/// reduction, then Francis double-shift QR with exceptional shifts every ten
/// stalled iterations. Complex pairs come out adjacent, negative imaginary
/// part first.
pub fn hessenberg_qr_eigenvalues(m: &DMatrix<f64>) -> Result<Vec<(f64, f64)>> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::param("matrix must be square"));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut a = nalgebra::linalg::Hessenberg::new(m.clone()).h();
    let mut wr = vec![0.0; n];
    let mut wi = vec![0.0; n];
    let mut anorm = 0.0;
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            anorm += a[(i, j)].abs();
        }
    }
    let eps = f64::EPSILON;
    let sign = |a: f64, b: f64| if b >= 0.0 { a.abs() } else { -a.abs() };
    let mut nn = n as isize - 1;
    let mut t = 0.0;
    macro_rules! at {
        ($i:expr, $j:expr) => {
            a[(($i) as usize, ($j) as usize)]
        };
    }
    while nn >= 0 {
        let mut its = 0;
        loop {
            // find a negligible subdiagonal entry
            let mut l = nn;
            while l >= 1 {
                let mut s = at!(l - 1, l - 1).abs() + at!(l, l).abs();
                if s == 0.0 {
                    s = anorm;
                }
                if at!(l, l - 1).abs() <= eps * s {
                    at!(l, l - 1) = 0.0;
                    break;
                }
                l -= 1;
            }
            let mut x = at!(nn, nn);
            if l == nn {
                wr[nn as usize] = x + t;
                wi[nn as usize] = 0.0;
                nn -= 1;
                break;
            }
            let mut y = at!(nn - 1, nn - 1);
            let mut w = at!(nn, nn - 1) * at!(nn - 1, nn);
            if l == nn - 1 {
                let p = 0.5 * (y - x);
                let q = p * p + w;
                let mut z = q.abs().sqrt();
                x += t;
                let (i, j) = ((nn - 1) as usize, nn as usize);
                if q >= 0.0 {
                    z = p + sign(z, p);
                    wr[i] = x + z;
                    wr[j] = if z != 0.0 { x - w / z } else { x + z };
                    wi[i] = 0.0;
                    wi[j] = 0.0;
                } else {
                    wr[i] = x + p;
                    wr[j] = x + p;
                    wi[i] = -z;
                    wi[j] = z;
                }
                nn -= 2;
                break;
            }
            if its == HQR_ITER_CAP {
                return Err(Error::NoConvergence { cap: HQR_ITER_CAP });
            }
            if its > 0 && its % 10 == 0 {
                t += x;
                for i in 0..=nn {
                    at!(i, i) -= x;
                }
                let s = at!(nn, nn - 1).abs() + at!(nn - 1, nn - 2).abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            its += 1;
            let (mut p, mut q, mut r);
            let mut m = nn - 2;
            loop {
                let z = at!(m, m);
                let rr = x - z;
                let ss = y - z;
                p = (rr * ss - w) / at!(m + 1, m) + at!(m, m + 1);
                q = at!(m + 1, m + 1) - z - rr - ss;
                r = at!(m + 2, m + 1);
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let u = at!(m, m - 1).abs() * (q.abs() + r.abs());
                let v = p.abs() * (at!(m - 1, m - 1).abs() + z.abs() + at!(m + 1, m + 1).abs());
                if u <= eps * v {
                    break;
                }
                m -= 1;
            }
            for i in (m + 2)..=nn {
                at!(i, i - 2) = 0.0;
                if i != m + 2 {
                    at!(i, i - 3) = 0.0;
                }
            }
            let mut k = m;
            while k < nn {
                if k != m {
                    p = at!(k, k - 1);
                    q = at!(k + 1, k - 1);
                    r = if k + 1 != nn { at!(k + 2, k - 1) } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x != 0.0 {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                let s = sign((p * p + q * q + r * r).sqrt(), p);
                if s != 0.0 {
                    if k == m {
                        if l != m {
                            at!(k, k - 1) = -at!(k, k - 1);
                        }
                    } else {
                        at!(k, k - 1) = -s * x;
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    let z = r / s;
                    q /= p;
                    r /= p;
                    for j in k..=nn {
                        let mut pp = at!(k, j) + q * at!(k + 1, j);
                        if k + 1 != nn {
                            pp += r * at!(k + 2, j);
                            at!(k + 2, j) -= pp * z;
                        }
                        at!(k + 1, j) -= pp * y;
                        at!(k, j) -= pp * x;
                    }
                    let mmin = if nn < k + 3 { nn } else { k + 3 };
                    for i in l..=mmin {
                        let mut pp = x * at!(i, k) + y * at!(i, k + 1);
                        if k + 1 != nn {
                            pp += z * at!(i, k + 2);
                            at!(i, k + 2) -= pp * r;
                        }
                        at!(i, k + 1) -= pp * q;
                        at!(i, k) -= pp;
                    }
                }
                k += 1;
            }
        }
    }
    Ok(wr.into_iter().zip(wi).collect())
}
