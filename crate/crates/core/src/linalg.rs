//! Restarted GMRES with right preconditioning.

#[derive(Clone, Copy, Debug)]
pub struct GmresOptions {
    pub restart: usize,
    pub max_iters: usize,
    /// Stop once the Euclidean residual norm falls below this value.
    pub tol: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct GmresOutcome {
    pub iterations: usize,
    pub residual_norm: f64,
    pub converged: bool,
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solves `A x = b`, updating `x` in place. The iterate is `x0 + M y` with the
/// Krylov space built for `A M`.
pub fn gmres<A, M>(apply: A, precond: M, b: &[f64], x: &mut [f64], opts: &GmresOptions) -> GmresOutcome
where
    A: Fn(&[f64]) -> Vec<f64>,
    M: Fn(&[f64]) -> Vec<f64>,
{
    let n = b.len();
    let m = opts.restart.max(1);
    let mut total = 0;
    let residual = |x: &[f64]| -> Vec<f64> {
        let ax = apply(x);
        b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect()
    };
    let mut r = residual(x);
    let mut beta = norm2(&r);
    loop {
        if beta <= opts.tol {
            return GmresOutcome {
                iterations: total,
                residual_norm: beta,
                converged: true,
            };
        }
        if total >= opts.max_iters {
            return GmresOutcome {
                iterations: total,
                residual_norm: beta,
                converged: false,
            };
        }
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        basis.push(r.iter().map(|v| v / beta).collect());
        // Hessenberg columns after rotation, stored column-wise.
        let mut hcols: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut cs: Vec<f64> = Vec::with_capacity(m);
        let mut sn: Vec<f64> = Vec::with_capacity(m);
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k = 0;
        while k < m && total < opts.max_iters {
            let z = precond(&basis[k]);
            let mut w = apply(&z);
            let mut col = vec![0.0; k + 2];
            // modified Gram-Schmidt with one reorthogonalisation pass
            for _ in 0..2 {
                for (j, vj) in basis.iter().enumerate() {
                    let hij = dot(&w, vj);
                    col[j] += hij;
                    for (wi, vi) in w.iter_mut().zip(vj) {
                        *wi -= hij * vi;
                    }
                }
            }
            let hn = norm2(&w);
            col[k + 1] = hn;
            for j in 0..k {
                let t = cs[j] * col[j] + sn[j] * col[j + 1];
                col[j + 1] = -sn[j] * col[j] + cs[j] * col[j + 1];
                col[j] = t;
            }
            let denom = col[k].hypot(col[k + 1]);
            let (c, s) = if denom == 0.0 { (1.0, 0.0) } else { (col[k] / denom, col[k + 1] / denom) };
            col[k] = denom;
            col[k + 1] = 0.0;
            g[k + 1] = -s * g[k];
            g[k] *= c;
            cs.push(c);
            sn.push(s);
            hcols.push(col);
            total += 1;
            k += 1;
            if g[k].abs() <= opts.tol || hn == 0.0 {
                break;
            }
            basis.push(w.iter().map(|v| v / hn).collect());
        }
        // back substitution
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for j in (i + 1)..k {
                s -= hcols[j][i] * y[j];
            }
            y[i] = s / hcols[i][i];
        }
        let mut update = vec![0.0; n];
        for (yj, vj) in y.iter().zip(&basis) {
            for (u, v) in update.iter_mut().zip(vj) {
                *u += yj * v;
            }
        }
        let dx = precond(&update);
        for (xi, d) in x.iter_mut().zip(&dx) {
            *xi += d;
        }
        r = residual(x);
        let new_beta = norm2(&r);
        if k == 0 || new_beta >= beta {
            // stagnation: nothing more to gain from another cycle
            return GmresOutcome {
                iterations: total,
                residual_norm: new_beta,
                converged: new_beta <= opts.tol,
            };
        }
        beta = new_beta;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_nonsymmetric_system() {
        let a = [[4.0, 1.0, 0.0], [2.0, 5.0, 1.0], [0.0, 3.0, 6.0]];
        let apply = |x: &[f64]| -> Vec<f64> {
            (0..3).map(|i| (0..3).map(|j| a[i][j] * x[j]).sum()).collect()
        };
        let xs = [1.0, -2.0, 0.5];
        let b = apply(&xs);
        let mut x = vec![0.0; 3];
        let out = gmres(
            apply,
            |v: &[f64]| v.to_vec(),
            &b,
            &mut x,
            &GmresOptions { restart: 2, max_iters: 100, tol: 1e-13 },
        );
        assert!(out.converged);
        for i in 0..3 {
            assert!((x[i] - xs[i]).abs() < 1e-12);
        }
    }
}
