//! Oracles shared by the integration tests.

/// Gaussian elimination with partial pivoting.
pub fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs())).unwrap();
        a.swap(k, p);
        b.swap(k, p);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            for j in k..n {
                a[i][j] -= f * a[k][j];
            }
            b[i] -= f * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| a[k][j] * x[j]).sum();
        x[k] = (b[k] - s) / a[k][k];
    }
    x
}

/// Newton on `F_i = -lap u + H(Du) + lambda - R_i`, `sum u = 0`, 1D.
pub fn hjb_newton_oracle(r: &[f64], gamma: f64) -> (Vec<f64>, f64) {
    let n = r.len();
    let h = 1.0 / n as f64;
    let hp = |p: f64| if p == 0.0 { 0.0 } else { p.abs().powf(gamma - 2.0) * p };
    let hv = |p: f64| p.abs().powf(gamma) / gamma;
    let mut x = vec![0.0; n + 1];
    for _ in 0..50 {
        let mut f = vec![0.0; n + 1];
        let mut j = vec![vec![0.0; n + 1]; n + 1];
        for i in 0..n {
            let (ip, im) = ((i + 1) % n, (i + n - 1) % n);
            let p = (x[ip] - x[im]) / (2.0 * h);
            f[i] = -(x[ip] - 2.0 * x[i] + x[im]) / (h * h) + hv(p) + x[n] - r[i];
            j[i][i] += 2.0 / (h * h);
            j[i][ip] += -1.0 / (h * h) + hp(p) / (2.0 * h);
            j[i][im] += -1.0 / (h * h) - hp(p) / (2.0 * h);
            j[i][n] = 1.0;
        }
        f[n] = x[..n].iter().sum();
        j[n][..n].fill(1.0);
        let d = dense_solve(j, f.iter().map(|v| -v).collect());
        for (xi, di) in x.iter_mut().zip(&d) {
            *xi += di;
        }
        if d.iter().fold(0.0f64, |a, v| a.max(v.abs())) < 1e-15 {
            break;
        }
    }
    let lambda = x[n];
    x.truncate(n);
    (x, lambda)
}
