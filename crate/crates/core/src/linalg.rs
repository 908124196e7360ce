//! Dense Hermitian eigensolvers and a block preconditioned eigensolver
//! (LOBPCG) for large operators available only through matrix-vector
//! products.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EigenError {
    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("invalid eigenproblem: {0}")]
    Invalid(String),
}

/// Eigenvalues (ascending) and matching eigenvectors of a real symmetric matrix.
pub fn symmetric_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Eigenvalues (ascending) and eigenvectors of a complex Hermitian matrix.
pub fn hermitian_eigen(m: DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let eig = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Lowest eigenpairs found by [`lobpcg`].
#[derive(Clone, Debug)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<C64>>,
    pub residuals: Vec<f64>,
    pub iterations: usize,
}

/// Options for [`lobpcg`]. Convergence means every wanted residual
/// `‖Av − λv‖` (with `‖v‖ = 1`) is below `tol`.
#[derive(Clone, Debug)]
pub struct LobpcgOptions {
    pub wanted: usize,
    pub tol: f64,
    pub max_iter: usize,
}

/// Replaces a set of columns by an orthonormal basis of their span,
/// discarding numerically dependent directions.
fn orthonormalize(s: &mut Vec<Vec<C64>>) {
    for _pass in 0..2 {
        for v in s.iter_mut() {
            let nrm = norm(v);
            if nrm > 0.0 {
                for x in v.iter_mut() {
                    *x /= nrm;
                }
            }
        }
        let m = s.len();
        let gram = DMatrix::from_fn(m, m, |i, j| dot(&s[i], &s[j]));
        let gram = (&gram + gram.adjoint()) * C64::new(0.5, 0.0);
        let (vals, vecs) = hermitian_eigen(gram);
        let top = vals.last().copied().unwrap_or(0.0).max(0.0);
        let keep: Vec<usize> = (0..m).filter(|&k| vals[k] > 1e-10 * top).collect();
        let len = s[0].len();
        let mut ns = Vec::with_capacity(keep.len());
        for &k in &keep {
            let scale = 1.0 / vals[k].sqrt();
            let mut v = vec![C64::new(0.0, 0.0); len];
            for i in 0..m {
                let c = vecs[(i, k)] * scale;
                for (t, x) in v.iter_mut().zip(&s[i]) {
                    *t += c * x;
                }
            }
            ns.push(v);
        }
        *s = ns;
    }
}

/// Locally optimal block preconditioned conjugate gradient for the lowest
/// eigenpairs of a Hermitian operator.
///
/// `apply` evaluates the operator, `precondition` (optional) maps residuals
/// to search directions. `initial` supplies the starting block; it must
/// contain at least `opts.wanted` vectors (extra vectors act as guards).
pub fn lobpcg<A, P>(
    apply: A,
    precondition: Option<P>,
    initial: Vec<Vec<C64>>,
    opts: &LobpcgOptions,
) -> Result<EigenPairs, EigenError>
where
    A: Fn(&[C64]) -> Vec<C64>,
    P: Fn(&[C64]) -> Vec<C64>,
{
    let wanted = opts.wanted;
    if wanted == 0 || initial.len() < wanted {
        return Err(EigenError::Invalid(format!(
            "need at least {wanted} starting vectors, got {}",
            initial.len()
        )));
    }
    let block = initial.len();
    let n = initial[0].len();
    if block >= n {
        return Err(EigenError::Invalid("block larger than the problem dimension".into()));
    }
    let mut x = initial;
    orthonormalize(&mut x);
    let mut ax: Vec<Vec<C64>> = x.iter().map(|v| apply(v)).collect();
    if x.len() < wanted {
        return Err(EigenError::Invalid("starting vectors are linearly dependent".into()));
    }
    let mut p: Vec<Vec<C64>> = Vec::new();
    let mut values = vec![0.0; x.len()];
    let mut worst = f64::INFINITY;
    let mut residuals = vec![f64::INFINITY; wanted];

    for iter in 0..=opts.max_iter {
        // Rayleigh-Ritz on the current block keeps X an eigenbasis of its span.
        let m = x.len();
        let h = DMatrix::from_fn(m, m, |i, j| dot(&x[i], &ax[j]));
        let h = (&h + h.adjoint()) * C64::new(0.5, 0.0);
        let (vals, vecs) = hermitian_eigen(h);
        let (nx, nax) = combine(&x, &ax, &vecs, m);
        x = nx;
        ax = nax;
        values = vals;

        let r: Vec<Vec<C64>> = x
            .iter()
            .zip(&ax)
            .zip(&values)
            .map(|((v, av), &lam)| av.iter().zip(v).map(|(a, b)| a - b * lam).collect())
            .collect();
        for k in 0..wanted {
            residuals[k] = norm(&r[k]);
        }
        worst = residuals.iter().cloned().fold(0.0, f64::max);
        if worst <= opts.tol {
            return Ok(EigenPairs {
                values: values[..wanted].to_vec(),
                vectors: x[..wanted].to_vec(),
                residuals,
                iterations: iter,
            });
        }
        if iter == opts.max_iter {
            break;
        }
        let mut w: Vec<Vec<C64>> = Vec::with_capacity(m);
        for (k, rk) in r.iter().enumerate() {
            let rn = norm(rk);
            if k < wanted && rn <= 0.1 * opts.tol {
                continue;
            }
            if rn == 0.0 {
                continue;
            }
            let mut d = match &precondition {
                Some(pc) => pc(rk),
                None => rk.clone(),
            };
            // Project out the current block so the basis stays well conditioned.
            for xv in &x {
                let c = dot(xv, &d);
                for (t, xx) in d.iter_mut().zip(xv) {
                    *t -= c * xx;
                }
            }
            w.push(d);
        }
        let mut s: Vec<Vec<C64>> = x.clone();
        s.extend(w);
        s.extend(p.iter().cloned());
        orthonormalize(&mut s);
        // Images are recomputed rather than propagated so rounding errors
        // cannot accumulate across iterations.
        let a_s: Vec<Vec<C64>> = s.iter().map(|v| apply(v)).collect();
        let dim = s.len();
        let h = DMatrix::from_fn(dim, dim, |i, j| dot(&s[i], &a_s[j]));
        let h = (&h + h.adjoint()) * C64::new(0.5, 0.0);
        let (_, vecs) = hermitian_eigen(h);
        let keep = m.min(dim);
        let (nx, nax) = combine(&s, &a_s, &vecs, keep);

        // New search direction: the part of the update orthogonal to the old block.
        let mut np = Vec::with_capacity(keep);
        for v in &nx {
            let mut d = v.clone();
            for xo in &x {
                let c = dot(xo, v);
                for (t, xx) in d.iter_mut().zip(xo) {
                    *t -= c * xx;
                }
            }
            if norm(&d) > 1e-14 {
                np.push(d);
            }
        }
        p = np;
        x = nx;
        ax = nax;
    }
    Err(EigenError::NoConvergence { iterations: opts.max_iter, residual: worst })
}

fn combine(
    s: &[Vec<C64>],
    a_s: &[Vec<C64>],
    coeffs: &DMatrix<C64>,
    count: usize,
) -> (Vec<Vec<C64>>, Vec<Vec<C64>>) {
    let len = s[0].len();
    let mut out = Vec::with_capacity(count);
    let mut aout = Vec::with_capacity(count);
    for k in 0..count {
        let mut v = vec![C64::new(0.0, 0.0); len];
        let mut av = vec![C64::new(0.0, 0.0); len];
        for i in 0..s.len() {
            let c = coeffs[(i, k)];
            for (t, x) in v.iter_mut().zip(&s[i]) {
                *t += c * x;
            }
            for (t, x) in av.iter_mut().zip(&a_s[i]) {
                *t += c * x;
            }
        }
        out.push(v);
        aout.push(av);
    }
    (out, aout)
}

/// Smallest singular value-free operator norm of a Hermitian matrix: the
/// largest absolute eigenvalue.
pub fn hermitian_norm(m: &DMatrix<C64>) -> f64 {
    let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let (vals, _) = hermitian_eigen(h);
    vals.iter().fold(0.0, |acc: f64, v| acc.max(v.abs()))
}

/// Spectral norm (largest singular value) of a complex matrix.
pub fn operator_norm(m: &DMatrix<C64>) -> f64 {
    m.clone().singular_values().iter().cloned().fold(0.0, f64::max)
}

pub fn to_dvector(v: &[C64]) -> DVector<C64> {
    DVector::from_column_slice(v)
}
