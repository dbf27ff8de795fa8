//! Reference computations written independently of the library: plain loops
//! and textbook algorithms over `Vec`s, no shared helpers.

#![allow(dead_code, clippy::needless_range_loop)]

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns
/// eigenvalues in non-increasing order with matching eigenvectors.
pub fn jacobi_eigen(a: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut a = a.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let frob: f64 = a.iter().flatten().map(|x| x * x).sum();
    for _ in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in 0..n {
                if p != q {
                    off += a[p][q] * a[p][q];
                }
            }
        }
        if off <= 1e-32 * frob {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                let t = sign / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vkp, vkq) = (row[p], row[q]);
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j][j].partial_cmp(&a[i][i]).unwrap());
    let values = order.iter().map(|&i| a[i][i]).collect();
    let vectors = order.iter().map(|&i| (0..n).map(|k| v[k][i]).collect()).collect();
    (values, vectors)
}

/// Gaussian elimination with partial pivoting.
pub fn solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .map(|(r, &bi)| {
            let mut r = r.clone();
            r.push(bi);
            r
        })
        .collect();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap())
            .unwrap();
        m.swap(col, piv);
        for row in (col + 1)..n {
            let f = m[row][col] / m[col][col];
            for k in col..=n {
                m[row][k] -= f * m[col][k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = ((i + 1)..n).map(|k| m[i][k] * x[k]).sum();
        x[i] = (m[i][n] - s) / m[i][i];
    }
    x
}

/// Least-squares coefficients from the normal equations `X'X b = X'y` on
/// the raw (uncentered) design.
pub fn normal_equations(x: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let p = x[0].len();
    let mut xtx = vec![vec![0.0; p]; p];
    let mut xty = vec![0.0; p];
    for (row, &yi) in x.iter().zip(y) {
        for a in 0..p {
            xty[a] += row[a] * yi;
            for b in 0..p {
                xtx[a][b] += row[a] * row[b];
            }
        }
    }
    solve(&xtx, &xty)
}

/// Haversine distance in km on the 6371.0088 km sphere.
pub fn haversine_km(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let r = 6371.0088;
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let dp = p2 - p1;
    let dl = (lon2 - lon1).to_radians();
    let a = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * r * a.sqrt().asin()
}

/// Spherical law of cosines distance in km.
pub fn law_of_cosines_km(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let r = 6371.0088;
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let c = p1.sin() * p2.sin() + p1.cos() * p2.cos() * (lon2 - lon1).to_radians().cos();
    r * c.clamp(-1.0, 1.0).acos()
}

/// Ordinary kriging prediction from the bordered system
/// `[[S, 1], [1', 0]] [w; m] = [c0; 1]` with `S_ij = C(d_ij) + delta_ij (tau_i + jitter)`.
/// Returns the prediction and the weights.
pub fn bordered_kriging(
    sites: &[(f64, f64)],
    values: &[f64],
    tau: &[f64],
    sill: f64,
    range: f64,
    jitter: f64,
    target: (f64, f64),
) -> (f64, Vec<f64>) {
    let n = sites.len();
    let cov = |a: (f64, f64), b: (f64, f64)| sill * (-haversine_km(a.0, a.1, b.0, b.1) / range).exp();
    let mut a = vec![vec![0.0; n + 1]; n + 1];
    let mut b = vec![0.0; n + 1];
    for i in 0..n {
        for j in 0..n {
            a[i][j] = if i == j {
                sill + tau[i] + jitter
            } else {
                cov(sites[i], sites[j])
            };
        }
        a[i][n] = 1.0;
        a[n][i] = 1.0;
        b[i] = cov(sites[i], target);
    }
    b[n] = 1.0;
    let sol = solve(&a, &b);
    let w = sol[..n].to_vec();
    let pred = w.iter().zip(values).map(|(wi, v)| wi * v).sum();
    (pred, w)
}

/// One variogram bin from the all-pairs double loop.
#[derive(Debug, Clone, Copy)]
pub struct PairBin {
    pub index: usize,
    pub distance: f64,
    pub pairs: usize,
    pub gamma: f64,
    pub raw_gamma: f64,
}

/// Equal-width bins from 0 to `cutoff` (default half the largest distance),
/// each pair contributing `(u_i - u_j)^2 - tau_i - tau_j` over twice the count.
pub fn all_pairs_variogram(
    sites: &[(f64, f64)],
    u: &[f64],
    tau: &[f64],
    n_bins: usize,
    cutoff: Option<f64>,
    min_pairs: usize,
) -> Vec<PairBin> {
    let n = sites.len();
    let d = |i: usize, j: usize| haversine_km(sites[i].0, sites[i].1, sites[j].0, sites[j].1);
    let mut dmax: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            dmax = dmax.max(d(i, j));
        }
    }
    let cutoff = cutoff.unwrap_or(dmax / 2.0);
    let width = cutoff / n_bins as f64;
    let mut out = Vec::new();
    for b in 0..n_bins {
        let (mut c, mut ds, mut sq, mut nug) = (0usize, 0.0, 0.0, 0.0);
        for i in 0..n {
            for j in (i + 1)..n {
                let h = d(i, j);
                if h > cutoff {
                    continue;
                }
                let bin = ((h / width).floor() as usize).min(n_bins - 1);
                if bin != b {
                    continue;
                }
                c += 1;
                ds += h;
                sq += (u[i] - u[j]) * (u[i] - u[j]);
                nug += tau[i] + tau[j];
            }
        }
        if c >= min_pairs.max(1) {
            out.push(PairBin {
                index: b,
                distance: ds / c as f64,
                pairs: c,
                gamma: (sq - nug) / (2.0 * c as f64),
                raw_gamma: sq / (2.0 * c as f64),
            });
        }
    }
    out
}

/// Local linear estimate at `x0` from the weighted least-squares problem
/// `min sum K((x_i - x0)/h) (y_i - a - b (x_i - x0))^2`, Epanechnikov kernel.
pub fn local_linear_wls(x: &[f64], y: &[f64], x0: f64, h: f64) -> f64 {
    let mut xtwx = vec![vec![0.0; 2]; 2];
    let mut xtwy = vec![0.0; 2];
    for (&xi, &yi) in x.iter().zip(y) {
        let z = (xi - x0) / h;
        let k = if z.abs() < 1.0 { 0.75 * (1.0 - z * z) } else { 0.0 };
        let row = [1.0, xi - x0];
        for a in 0..2 {
            xtwy[a] += k * row[a] * yi;
            for b in 0..2 {
                xtwx[a][b] += k * row[a] * row[b];
            }
        }
    }
    solve(&xtwx, &xtwy)[0]
}

pub fn rrmse_loop(imputed: &[f64], observed: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..observed.len() {
        let e = (imputed[i] - observed[i]) / observed[i];
        s += e * e;
    }
    (s / observed.len() as f64).sqrt()
}

/// `phi[k][w]` indexed by component then wavelength.
pub fn rmspe_loop(u: &[f64], xi: &[f64], phi: &[Vec<f64>]) -> f64 {
    let m = phi[0].len();
    let mut s = 0.0;
    for w in 0..m {
        let mut e = 0.0;
        for k in 0..u.len() {
            e += (u[k] - xi[k]) * phi[k][w];
        }
        s += e * e;
    }
    (s / m as f64).sqrt()
}

/// `v' R v` by a triple loop.
pub fn quadratic_form(r: &[Vec<f64>], v: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..v.len() {
        for j in 0..v.len() {
            s += v[i] * r[i][j] * v[j];
        }
    }
    s
}

pub fn median(v: &[f64]) -> f64 {
    let mut v = v.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Trimmed mean by explicit sort and slice.
pub fn trimmed_mean(values: &[f64], trim: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let g = (trim * v.len() as f64) as usize;
    let kept = &v[g..v.len() - g];
    kept.iter().sum::<f64>() / kept.len() as f64
}
