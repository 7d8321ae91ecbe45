//! Small dense linear-algebra kernels: Householder least squares (real and
//! complex) and polynomial roots via the companion matrix.
//!
//! Systems here are k x k or 2k x k with k <= 64, so everything is plain
//! row-major `Vec` storage and O(k^3) algorithms.

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Least squares min ||Ax - b||_2 for a real m x n matrix (m >= n), row-major.
///
/// Householder QR without pivoting. A numerically zero diagonal entry of R is
/// treated as a dropped direction (coefficient 0) rather than an error, so the
/// solver never emits NaN/Inf on rank-deficient input.
pub fn lstsq_real(a: &[f64], m: usize, n: usize, b: &[f64]) -> Vec<f64> {
    assert_eq!(a.len(), m * n);
    assert_eq!(b.len(), m);
    assert!(m >= n);
    let mut r = a.to_vec();
    let mut y = b.to_vec();
    for j in 0..n {
        // Householder vector for column j below the diagonal.
        let norm: f64 = (j..m).map(|i| r[i * n + j] * r[i * n + j]).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let alpha = if r[j * n + j] >= 0.0 { -norm } else { norm };
        let mut v = vec![0.0; m - j];
        v[0] = r[j * n + j] - alpha;
        for i in j + 1..m {
            v[i - j] = r[i * n + j];
        }
        let vtv: f64 = v.iter().map(|x| x * x).sum();
        if vtv == 0.0 {
            continue;
        }
        r[j * n + j] = alpha;
        for i in j + 1..m {
            r[i * n + j] = 0.0;
        }
        for col in j + 1..n {
            let dot: f64 = (j..m).map(|i| v[i - j] * r[i * n + col]).sum();
            let f = 2.0 * dot / vtv;
            for i in j..m {
                r[i * n + col] -= f * v[i - j];
            }
        }
        let dot: f64 = (j..m).map(|i| v[i - j] * y[i]).sum();
        let f = 2.0 * dot / vtv;
        for i in j..m {
            y[i] -= f * v[i - j];
        }
    }
    back_substitute_real(&r, n, &y)
}

fn back_substitute_real(r: &[f64], n: usize, y: &[f64]) -> Vec<f64> {
    let max_diag = (0..n).map(|j| r[j * n + j].abs()).fold(0.0f64, f64::max);
    let tol = max_diag * (n as f64) * f64::EPSILON;
    let mut x = vec![0.0; n];
    for j in (0..n).rev() {
        let mut s = y[j];
        for col in j + 1..n {
            s -= r[j * n + col] * x[col];
        }
        x[j] = if r[j * n + j].abs() <= tol { 0.0 } else { s / r[j * n + j] };
    }
    x
}

/// Rank check used by the unregularized ridge path: true iff QR of `a` has a
/// numerically zero diagonal entry.
pub fn is_rank_deficient_real(a: &[f64], m: usize, n: usize) -> bool {
    let mut r = a.to_vec();
    for j in 0..n {
        let norm: f64 = (j..m).map(|i| r[i * n + j] * r[i * n + j]).sum::<f64>().sqrt();
        if norm == 0.0 {
            return true;
        }
        let alpha = if r[j * n + j] >= 0.0 { -norm } else { norm };
        let mut v = vec![0.0; m - j];
        v[0] = r[j * n + j] - alpha;
        for i in j + 1..m {
            v[i - j] = r[i * n + j];
        }
        let vtv: f64 = v.iter().map(|x| x * x).sum();
        r[j * n + j] = alpha;
        for i in j + 1..m {
            r[i * n + j] = 0.0;
        }
        if vtv == 0.0 {
            continue;
        }
        for col in j + 1..n {
            let dot: f64 = (j..m).map(|i| v[i - j] * r[i * n + col]).sum();
            let f = 2.0 * dot / vtv;
            for i in j..m {
                r[i * n + col] -= f * v[i - j];
            }
        }
    }
    let max_diag = (0..n).map(|j| r[j * n + j].abs()).fold(0.0f64, f64::max);
    let tol = max_diag * (n as f64) * f64::EPSILON;
    (0..n).any(|j| r[j * n + j].abs() <= tol.max(f64::MIN_POSITIVE))
}

/// Complex least squares min ||Ax - b||_2, Householder QR, same conventions as
/// [`lstsq_real`].
pub fn lstsq_complex(a: &[C64], m: usize, n: usize, b: &[C64]) -> Vec<C64> {
    assert_eq!(a.len(), m * n);
    assert_eq!(b.len(), m);
    assert!(m >= n);
    let mut r = a.to_vec();
    let mut y = b.to_vec();
    for j in 0..n {
        let norm: f64 = (j..m).map(|i| r[i * n + j].norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let pivot = r[j * n + j];
        let phase = if pivot.norm() == 0.0 { C64::new(1.0, 0.0) } else { pivot / pivot.norm() };
        let alpha = -phase * norm;
        let mut v = vec![C64::new(0.0, 0.0); m - j];
        v[0] = pivot - alpha;
        for i in j + 1..m {
            v[i - j] = r[i * n + j];
        }
        let vtv: f64 = v.iter().map(|x| x.norm_sqr()).sum();
        if vtv == 0.0 {
            continue;
        }
        r[j * n + j] = alpha;
        for i in j + 1..m {
            r[i * n + j] = C64::new(0.0, 0.0);
        }
        for col in j + 1..n {
            let dot: C64 = (j..m).map(|i| v[i - j].conj() * r[i * n + col]).sum();
            let f = dot * (2.0 / vtv);
            for i in j..m {
                r[i * n + col] -= f * v[i - j];
            }
        }
        let dot: C64 = (j..m).map(|i| v[i - j].conj() * y[i]).sum();
        let f = dot * (2.0 / vtv);
        for i in j..m {
            y[i] -= f * v[i - j];
        }
    }
    let max_diag = (0..n).map(|j| r[j * n + j].norm()).fold(0.0f64, f64::max);
    let tol = max_diag * (n as f64) * f64::EPSILON;
    let mut x = vec![C64::new(0.0, 0.0); n];
    for j in (0..n).rev() {
        let mut s = y[j];
        for col in j + 1..n {
            s -= r[j * n + col] * x[col];
        }
        x[j] = if r[j * n + j].norm() <= tol { C64::new(0.0, 0.0) } else { s / r[j * n + j] };
    }
    x
}

pub fn is_rank_deficient_complex(a: &[C64], m: usize, n: usize) -> bool {
    // Reuse the solver's factorization by solving against a zero rhs and
    // checking R's diagonal directly.
    let mut r = a.to_vec();
    for j in 0..n {
        let norm: f64 = (j..m).map(|i| r[i * n + j].norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return true;
        }
        let pivot = r[j * n + j];
        let phase = if pivot.norm() == 0.0 { C64::new(1.0, 0.0) } else { pivot / pivot.norm() };
        let alpha = -phase * norm;
        let mut v = vec![C64::new(0.0, 0.0); m - j];
        v[0] = pivot - alpha;
        for i in j + 1..m {
            v[i - j] = r[i * n + j];
        }
        let vtv: f64 = v.iter().map(|x| x.norm_sqr()).sum();
        r[j * n + j] = alpha;
        for i in j + 1..m {
            r[i * n + j] = C64::new(0.0, 0.0);
        }
        if vtv == 0.0 {
            continue;
        }
        for col in j + 1..n {
            let dot: C64 = (j..m).map(|i| v[i - j].conj() * r[i * n + col]).sum();
            let f = dot * (2.0 / vtv);
            for i in j..m {
                r[i * n + col] -= f * v[i - j];
            }
        }
    }
    let max_diag = (0..n).map(|j| r[j * n + j].norm()).fold(0.0f64, f64::max);
    let tol = max_diag * (n as f64) * f64::EPSILON;
    (0..n).any(|j| r[j * n + j].norm() <= tol.max(f64::MIN_POSITIVE))
}

/// All roots (with multiplicity) of the monic polynomial
/// `x^n + c[n-1] x^(n-1) + ... + c[0]`, as eigenvalues of the companion
/// matrix. Roots are sorted by real part, then imaginary part.
pub fn companion_roots(coeffs: &[C64]) -> Result<Vec<C64>> {
    let n = coeffs.len();
    if coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(Error::BadInput("non-finite polynomial coefficient".into()));
    }
    let mut roots = match n {
        0 => Vec::new(),
        1 => vec![-coeffs[0]],
        2 => quadratic_roots(coeffs[1], coeffs[0]),
        _ => {
            // Companion matrix: subdiagonal ones, last column -c.
            let mut h = vec![C64::new(0.0, 0.0); n * n];
            for i in 1..n {
                h[i * n + (i - 1)] = C64::new(1.0, 0.0);
            }
            for i in 0..n {
                h[i * n + (n - 1)] = -coeffs[i];
            }
            balance(&mut h, n);
            hessenberg_eigenvalues(&mut h, n)
        }
    };
    roots.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).unwrap());
    Ok(roots)
}

fn quadratic_roots(c1: C64, c0: C64) -> Vec<C64> {
    // x^2 + c1 x + c0; stable form avoids cancellation in the larger root.
    let disc = (c1 * c1 - 4.0 * c0).sqrt();
    let q = if (c1 + disc).norm() >= (c1 - disc).norm() { -(c1 + disc) * 0.5 } else { -(c1 - disc) * 0.5 };
    if q.norm() == 0.0 {
        vec![C64::new(0.0, 0.0), -c1]
    } else {
        vec![q, c0 / q]
    }
}

/// Parlett-Reinsch balancing by powers of two; a diagonal similarity, so the
/// Hessenberg pattern and the eigenvalues are preserved exactly.
fn balance(h: &mut [C64], n: usize) {
    loop {
        let mut converged = true;
        for i in 0..n {
            let mut r: f64 = (0..n).filter(|&j| j != i).map(|j| h[i * n + j].norm()).sum();
            let mut c: f64 = (0..n).filter(|&j| j != i).map(|j| h[j * n + i].norm()).sum();
            if r == 0.0 || c == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0f64;
            while c < r / 2.0 && f < 1e150 {
                f *= 2.0;
                c *= 2.0;
                r /= 2.0;
            }
            while c > r * 2.0 && f > 1e-150 {
                f /= 2.0;
                c /= 2.0;
                r *= 2.0;
            }
            if c + r < 0.95 * s {
                converged = false;
                for j in 0..n {
                    h[i * n + j] /= f;
                    h[j * n + i] *= f;
                }
            }
        }
        if converged {
            break;
        }
    }
}

/// Complex Givens rotation G = [[c, s], [-conj(s), c]] with real c >= 0 such
/// that G * [a, b]^T = [r, 0]^T.
fn givens(a: C64, b: C64) -> (f64, C64, C64) {
    if b.norm() == 0.0 {
        return (1.0, C64::new(0.0, 0.0), a);
    }
    if a.norm() == 0.0 {
        return (0.0, b.conj() / b.norm(), C64::new(b.norm(), 0.0));
    }
    let t = (a.norm_sqr() + b.norm_sqr()).sqrt();
    let c = a.norm() / t;
    let phase = a / a.norm();
    let s = phase * b.conj() / t;
    (c, s, phase * t)
}

/// Eigenvalues of an upper Hessenberg complex matrix by explicitly shifted QR
/// with deflation. Destroys `h`.
fn hessenberg_eigenvalues(h: &mut [C64], n: usize) -> Vec<C64> {
    let mut eigs = Vec::with_capacity(n);
    let mut hi = n;
    let mut stall = 0usize;
    let max_stall = 40;
    while hi > 0 {
        // Zero out negligible subdiagonals, then deflate from the bottom.
        for i in 1..hi {
            let bound = f64::EPSILON * (h[(i - 1) * n + (i - 1)].norm() + h[i * n + i].norm());
            if h[i * n + (i - 1)].norm() <= bound.max(f64::MIN_POSITIVE) {
                h[i * n + (i - 1)] = C64::new(0.0, 0.0);
            }
        }
        if hi == 1 || h[(hi - 1) * n + (hi - 2)].norm() == 0.0 {
            eigs.push(h[(hi - 1) * n + (hi - 1)]);
            hi -= 1;
            stall = 0;
            continue;
        }
        // Active block [lo, hi): walk up until a zero subdiagonal.
        let mut lo = hi - 1;
        while lo > 0 && h[lo * n + (lo - 1)].norm() != 0.0 {
            lo -= 1;
        }
        stall += 1;
        let mu = if stall % 15 == 0 {
            // Exceptional shift to break symmetry-induced stalls.
            h[(hi - 1) * n + (hi - 1)] + 0.75 * h[(hi - 1) * n + (hi - 2)].norm()
        } else {
            wilkinson_shift(
                h[(hi - 2) * n + (hi - 2)],
                h[(hi - 2) * n + (hi - 1)],
                h[(hi - 1) * n + (hi - 2)],
                h[(hi - 1) * n + (hi - 1)],
            )
        };
        if stall > max_stall {
            // Numerical dead end; accept the trailing diagonal entry. Not
            // observed in practice at these sizes, but never hang.
            eigs.push(h[(hi - 1) * n + (hi - 1)]);
            hi -= 1;
            stall = 0;
            continue;
        }
        for i in lo..hi {
            h[i * n + i] -= mu;
        }
        // QR by Givens sweeps on the Hessenberg block, then RQ.
        let mut rots = Vec::with_capacity(hi - lo);
        for i in lo..hi - 1 {
            let (c, s, r) = givens(h[i * n + i], h[(i + 1) * n + i]);
            h[i * n + i] = r;
            h[(i + 1) * n + i] = C64::new(0.0, 0.0);
            for col in i + 1..hi {
                let x = h[i * n + col];
                let y = h[(i + 1) * n + col];
                h[i * n + col] = c * x + s * y;
                h[(i + 1) * n + col] = -s.conj() * x + c * y;
            }
            rots.push((c, s));
        }
        for (idx, &(c, s)) in rots.iter().enumerate() {
            let i = lo + idx;
            let row_end = (i + 2).min(hi);
            for row in lo..row_end {
                let x = h[row * n + i];
                let y = h[row * n + (i + 1)];
                h[row * n + i] = c * x + s.conj() * y;
                h[row * n + (i + 1)] = -s * x + c * y;
            }
        }
        for i in lo..hi {
            h[i * n + i] += mu;
        }
    }
    eigs
}

fn wilkinson_shift(a: C64, b: C64, c: C64, d: C64) -> C64 {
    // Eigenvalue of [[a,b],[c,d]] closest to d.
    let tr = a + d;
    let disc = ((a - d) * (a - d) + 4.0 * b * c).sqrt();
    let l1 = (tr + disc) * 0.5;
    let l2 = (tr - disc) * 0.5;
    if (l1 - d).norm() <= (l2 - d).norm() {
        l1
    } else {
        l2
    }
}

/// Lower Cholesky factor of a symmetric positive-definite matrix, or `None`
/// if a pivot is not positive.
pub fn cholesky(a: &[f64], n: usize) -> Option<Vec<f64>> {
    assert_eq!(a.len(), n * n);
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for p in 0..j {
                s -= l[i * n + p] * l[j * n + p];
            }
            if i == j {
                if s <= 0.0 {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Some(l)
}

/// Horner evaluation of the monic polynomial `x^n + c[n-1] x^(n-1) + ... + c[0]`.
pub fn monic_eval(coeffs: &[C64], x: C64) -> C64 {
    let mut acc = C64::new(1.0, 0.0);
    for &c in coeffs.iter().rev() {
        acc = acc * x + c;
    }
    acc
}
