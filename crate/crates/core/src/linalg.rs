//! SVD kernels for the spectral code.
//!
//! nalgebra 0.35's `SVD::new(.., compute_u = true, ..)` returns wrong factors
//! for exactly rank-deficient inputs (a constant 5x5 matrix recomposes with
//! an error of ~8), which is the normal case for noiseless Hankel matrices.
//! Square Hankel matrices are symmetric, so [`symmetric_svd`] derives the SVD
//! from the symmetric eigendecomposition instead; [`jacobi_svd`] is a slower
//! general-purpose route kept as an independent reference.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// `A = U diag(s) Vᵀ` with singular values sorted nonincreasing. Only the
/// left factor is kept.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: DMatrix<f64>,
    pub singular_values: Vec<f64>,
}

/// SVD of a symmetric matrix: singular values are `|lambda|`, left singular
/// vectors are the eigenvectors (signs are irrelevant for subspace use).
pub fn symmetric_svd(a: &DMatrix<f64>) -> Svd {
    let eig = a.clone().symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].abs().total_cmp(&eig.eigenvalues[i].abs()));
    let singular_values = order.iter().map(|&i| eig.eigenvalues[i].abs()).collect();
    let u = DMatrix::from_fn(a.nrows(), n, |r, c| eig.eigenvectors[(r, order[c])]);
    Svd { u, singular_values }
}

/// `|lambda|` of a symmetric matrix, nonincreasing.
pub fn symmetric_singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = match symmetric_eigenvalues(a) {
        Some(l) => l,
        None => a.symmetric_eigenvalues().iter().copied().collect(),
    };
    s.iter_mut().for_each(|x| *x = x.abs());
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

const QL_ITERATIONS: usize = 60;

/// Eigenvalues of a symmetric matrix (unordered): Householder reduction to
/// tridiagonal form, then implicit QL. `None` if QL fails to converge.
pub fn symmetric_eigenvalues(a: &DMatrix<f64>) -> Option<Vec<f64>> {
    let n = a.nrows();
    // Row-major lower triangle is read; symmetric so the layout is moot.
    let mut m: Vec<f64> = a.as_slice().to_vec();
    let at = |i: usize, j: usize| i * n + j;
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    for i in (1..n).rev() {
        let l = i - 1;
        let mut h = 0.0;
        if l > 0 {
            let scale: f64 = (0..=l).map(|k| m[at(i, k)].abs()).sum();
            if scale == 0.0 {
                e[i] = m[at(i, l)];
            } else {
                for k in 0..=l {
                    m[at(i, k)] /= scale;
                    h += m[at(i, k)] * m[at(i, k)];
                }
                let f = m[at(i, l)];
                let g = if f >= 0.0 { -h.sqrt() } else { h.sqrt() };
                e[i] = scale * g;
                h -= f * g;
                m[at(i, l)] = f - g;
                let mut f = 0.0;
                for j in 0..=l {
                    let mut g = 0.0;
                    for k in 0..=j {
                        g += m[at(j, k)] * m[at(i, k)];
                    }
                    for k in j + 1..=l {
                        g += m[at(k, j)] * m[at(i, k)];
                    }
                    e[j] = g / h;
                    f += e[j] * m[at(i, j)];
                }
                let hh = f / (h + h);
                for j in 0..=l {
                    let f = m[at(i, j)];
                    let g = e[j] - hh * f;
                    e[j] = g;
                    for k in 0..=j {
                        m[at(j, k)] -= f * e[k] + g * m[at(i, k)];
                    }
                }
            }
        } else {
            e[i] = m[at(i, l)];
        }
    }
    for (i, di) in d.iter_mut().enumerate() {
        *di = m[at(i, i)];
    }

    // Implicit QL on (d, e), e shifted so e[i] couples d[i] and d[i + 1].
    // Deflation is judged against the whole matrix: eigenvalues below
    // eps * |T| are noise, and chasing them relatively crawls into subnormals.
    for i in 1..n {
        e[i - 1] = e[i];
    }
    if n > 0 {
        e[n - 1] = 0.0;
    }
    let norm = d.iter().zip(&e).map(|(x, y)| x.abs() + y.abs()).fold(0.0, f64::max);
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut mm = l;
            while mm + 1 < n {
                let dd = d[mm].abs() + d[mm + 1].abs();
                if e[mm].abs() <= f64::EPSILON * dd || e[mm].abs() <= f64::EPSILON * norm {
                    break;
                }
                mm += 1;
            }
            if mm == l {
                break;
            }
            iter += 1;
            if iter > QL_ITERATIONS {
                return None;
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[mm] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            for i in (l..mm).rev() {
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[mm] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[mm] = 0.0;
        }
    }
    Some(d)
}

const SUBSPACE_SWEEPS: usize = 40;

/// Orthonormal eigenvectors of a symmetric matrix for its `k` eigenvalues of
/// largest magnitude, ordered by `|lambda|`; `sigma` are the matrix's
/// singular values. Subspace iteration with a Rayleigh-Ritz rotation per
/// sweep, falling back to the full decomposition when the gap below the
/// `k`-th value is too narrow or the iteration stalls.
pub fn dominant_eigenvectors(a: &DMatrix<f64>, k: usize, sigma: &[f64]) -> DMatrix<f64> {
    let n = a.nrows();
    let full = || symmetric_svd(a).u.columns(0, k.min(n)).into_owned();
    if k == 0 || k >= n || sigma[0] == 0.0 || sigma[k] > 0.5 * sigma[k - 1] {
        return full();
    }
    let tol = 1e-13 * sigma[0];
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let omega = DMatrix::<f64>::from_fn(n, k, |_, _| rand::Rng::sample(&mut rng, StandardNormal));
    let mut q = (a * omega).qr().q();
    for _ in 0..SUBSPACE_SWEEPS {
        let z = a * &q;
        let t = q.transpose() * &z;
        let eig = ((&t + t.transpose()) * 0.5).symmetric_eigen();
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[j].abs().total_cmp(&eig.eigenvalues[i].abs()));
        let v = DMatrix::from_fn(k, k, |r, c| eig.eigenvectors[(r, order[c])]);
        let u = &q * &v;
        let au = &z * &v;
        let converged = order
            .iter()
            .enumerate()
            .all(|(c, &i)| (au.column(c) - u.column(c) * eig.eigenvalues[i]).norm() <= tol);
        if converged {
            return u;
        }
        q = au.qr().q();
    }
    full()
}

const MAX_SWEEPS: usize = 80;

/// One-sided (Hestenes) Jacobi. Requires `nrows >= ncols`.
pub fn jacobi_svd(a: &DMatrix<f64>) -> Svd {
    let (m, n) = a.shape();
    assert!(m >= n, "jacobi_svd expects a tall or square matrix");
    // Column-major copy so column pairs are contiguous slices.
    let mut w: Vec<f64> = a.as_slice().to_vec();
    let tol = f64::EPSILON * m as f64;

    let mut norms: Vec<f64> = (0..n).map(|j| dot(col(&w, m, j), col(&w, m, j))).collect();
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n.saturating_sub(1) {
            for q in p + 1..n {
                let alpha = norms[p];
                let beta = norms[q];
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                let gamma = dot(col(&w, m, p), col(&w, m, q));
                if gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (lo, hi) = w.split_at_mut(q * m);
                let cp = &mut lo[p * m..(p + 1) * m];
                let cq = &mut hi[..m];
                for (xp, xq) in cp.iter_mut().zip(cq.iter_mut()) {
                    let (vp, vq) = (*xp, *xq);
                    *xp = c * vp - s * vq;
                    *xq = s * vp + c * vq;
                }
                norms[p] = alpha - t * gamma;
                norms[q] = beta + t * gamma;
            }
        }
        // Refresh norms to stop drift from the incremental updates.
        for (j, nj) in norms.iter_mut().enumerate() {
            *nj = dot(col(&w, m, j), col(&w, m, j));
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let sigma: Vec<f64> = norms.iter().map(|x| x.max(0.0).sqrt()).collect();
    order.sort_by(|&i, &j| sigma[j].total_cmp(&sigma[i]));

    let mut u = DMatrix::zeros(m, n);
    let mut singular_values = Vec::with_capacity(n);
    for (dst, &src) in order.iter().enumerate() {
        let s = sigma[src];
        singular_values.push(s);
        if s > 0.0 {
            let c = col(&w, m, src);
            for r in 0..m {
                u[(r, dst)] = c[r] / s;
            }
        }
    }
    Svd { u, singular_values }
}

fn col(w: &[f64], m: usize, j: usize) -> &[f64] {
    &w[j * m..(j + 1) * m]
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
