//! Brute-force references shared by the integration and acceptance tests.
#![allow(dead_code)]

/// Right-hand side of the rate equations written out term by term.
fn rhs(gq: f64, gqt: &[f64], gt: f64, p_th: f64, p: &[f64]) -> Vec<f64> {
    let pq = p[0];
    let mut d = vec![0.0; p.len()];
    d[0] = -gq * (pq - p_th);
    for (i, &g) in gqt.iter().enumerate() {
        let pt = p[i + 1];
        d[0] -= g * (pq - pt);
        d[i + 1] = g * (pq - pt) - gt * (pt - p_th);
    }
    d
}

/// Classic fixed-step RK4 from `p0` to time `t`.
pub fn rk4(gq: f64, gqt: &[f64], gt: f64, p_th: f64, p0: &[f64], t: f64, steps: usize) -> Vec<f64> {
    let h = t / steps as f64;
    let mut p = p0.to_vec();
    let axpy = |p: &[f64], k: &[f64], a: f64| -> Vec<f64> { p.iter().zip(k).map(|(x, y)| x + a * y).collect() };
    for _ in 0..steps {
        let k1 = rhs(gq, gqt, gt, p_th, &p);
        let k2 = rhs(gq, gqt, gt, p_th, &axpy(&p, &k1, h / 2.0));
        let k3 = rhs(gq, gqt, gt, p_th, &axpy(&p, &k2, h / 2.0));
        let k4 = rhs(gq, gqt, gt, p_th, &axpy(&p, &k3, h));
        for j in 0..p.len() {
            p[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
    }
    p
}

/// RK4 with a step small enough that the global error is far below 1e-10
/// for the fastest mode (`h·λ_max ≤ 0.01`).
pub fn rk4_auto(gq: f64, gqt: &[f64], gt: f64, p_th: f64, p0: &[f64], t: f64) -> Vec<f64> {
    let lam = gq + gt + 2.0 * gqt.iter().sum::<f64>() + gqt.iter().cloned().fold(0.0, f64::max);
    let steps = ((t * lam / 0.01).ceil() as usize).max(1);
    rk4(gq, gqt, gt, p_th, p0, t, steps)
}

/// TLS population right after the qubit drops, from the jump-rate balance.
///
/// Before the jump qubit and TLSs are independent, each excited with
/// probability p_th. Given an excited qubit, it drops through the bath at
/// rate Γq(1 − p_th) and through TLS j at rate Γqt_j(1 − p_th), the latter
/// leaving TLS j excited. Any other channel leaves TLS i at p_th.
pub fn post_jump_tls(gq: f64, gqt: &[f64], p_th: f64, i: usize) -> f64 {
    let total = (gq + gqt.iter().sum::<f64>()) * (1.0 - p_th);
    let via_i = gqt[i] * (1.0 - p_th) / total;
    via_i + (1.0 - via_i) * p_th
}

/// Generator of the joint qubit + TLS Markov chain; bit 0 of a state index
/// is the qubit, bit `i + 1` is TLS `i`. `q[a][b]` is the rate a → b.
fn joint_generator(gq: f64, gqt: &[f64], gt: f64, p_th: f64) -> Vec<Vec<f64>> {
    let n = 1usize << (gqt.len() + 1);
    let mut q = vec![vec![0.0; n]; n];
    let flip = |q: &mut Vec<Vec<f64>>, a: usize, bit: usize, g: f64| {
        let up = a & (1 << bit) == 0;
        q[a][a ^ (1 << bit)] += g * if up { p_th } else { 1.0 - p_th };
    };
    for a in 0..n {
        flip(&mut q, a, 0, gq);
        for (i, &g) in gqt.iter().enumerate() {
            flip(&mut q, a, i + 1, gt);
            let (qb, tb) = (a & 1, (a >> (i + 1)) & 1);
            if qb != tb {
                q[a][a ^ 1 ^ (1 << (i + 1))] += g;
            }
        }
        q[a][a] = -q[a].iter().sum::<f64>();
    }
    q
}

fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut c = vec![vec![0.0; n]; n];
    for i in 0..n {
        for k in 0..n {
            for j in 0..n {
                c[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    c
}

/// exp(Q t) by scaling and squaring of a Taylor series.
fn expm(q: &[Vec<f64>], t: f64) -> Vec<Vec<f64>> {
    let n = q.len();
    let norm = q.iter().map(|r| r.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max) * t;
    let s = norm.max(1e-300).log2().ceil().max(0.0) as i32 + 4;
    let h = t / 2f64.powi(s);
    let mut term: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| f64::from(i == j)).collect()).collect();
    let mut sum = term.clone();
    let a: Vec<Vec<f64>> = q.iter().map(|r| r.iter().map(|x| x * h).collect()).collect();
    for k in 1..30 {
        term = matmul(&term, &a).into_iter().map(|r| r.into_iter().map(|x| x / k as f64).collect()).collect();
        for i in 0..n {
            for j in 0..n {
                sum[i][j] += term[i][j];
            }
        }
    }
    for _ in 0..s {
        sum = matmul(&sum, &sum);
    }
    sum
}

/// Exact stroboscopic conditioned averages of the joint chain in its
/// stationary state: qubit excitation at lags `0..n_lags` after `pattern`,
/// and each TLS population at lag 0.
pub fn strobe_conditioned(
    gq: f64,
    gqt: &[f64],
    gt: f64,
    p_th: f64,
    dt: f64,
    pattern: &[u8],
    n_lags: usize,
) -> (Vec<f64>, Vec<f64>) {
    let n = 1usize << (gqt.len() + 1);
    let t = expm(&joint_generator(gq, gqt, gt, p_th), dt);
    let step = |v: &[f64]| -> Vec<f64> { (0..n).map(|j| (0..n).map(|i| v[i] * t[i][j]).sum()).collect() };
    let mask = |v: &mut Vec<f64>, s: u8| {
        for (a, x) in v.iter_mut().enumerate() {
            if (a & 1) as u8 != s {
                *x = 0.0;
            }
        }
    };
    let ones = |a: usize| a.count_ones() as i32;
    let mut v: Vec<f64> = (0..n).map(|a| p_th.powi(ones(a)) * (1.0 - p_th).powi(gqt.len() as i32 + 1 - ones(a))).collect();
    mask(&mut v, pattern[0]);
    for &s in &pattern[1..] {
        v = step(&v);
        mask(&mut v, s);
    }
    let z: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= z);
    let hidden = (0..gqt.len()).map(|i| (0..n).filter(|a| a >> (i + 1) & 1 == 1).map(|a| v[a]).sum()).collect();
    let mut qubit = Vec::with_capacity(n_lags);
    for _ in 0..n_lags {
        qubit.push((0..n).filter(|a| a & 1 == 1).map(|a| v[a]).sum());
        v = step(&v);
    }
    (qubit, hidden)
}

/// Stationary probability that `pattern` occurs at a given strobe window.
pub fn strobe_pattern_probability(gq: f64, gqt: &[f64], gt: f64, p_th: f64, dt: f64, pattern: &[u8]) -> f64 {
    let n = 1usize << (gqt.len() + 1);
    let t = expm(&joint_generator(gq, gqt, gt, p_th), dt);
    let ones = |a: usize| a.count_ones() as i32;
    let mut v: Vec<f64> = (0..n).map(|a| p_th.powi(ones(a)) * (1.0 - p_th).powi(gqt.len() as i32 + 1 - ones(a))).collect();
    for (k, &s) in pattern.iter().enumerate() {
        if k > 0 {
            v = (0..n).map(|j| (0..n).map(|i| v[i] * t[i][j]).sum()).collect();
        }
        for (a, x) in v.iter_mut().enumerate() {
            if (a & 1) as u8 != s {
                *x = 0.0;
            }
        }
    }
    v.iter().sum()
}
