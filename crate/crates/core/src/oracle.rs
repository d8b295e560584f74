//! Independent reference computations used by the self-test.

/// `min_σ Σ (a_i - b_σ(i))²` by enumerating all permutations (Heap's algorithm).
pub fn brute_force_g2(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = b.len();
    let mut perm: Vec<usize> = (0..n).collect();
    let cost = |p: &[usize]| a.iter().zip(p).map(|(x, &k)| (x - b[k]).powi(2)).sum::<f64>();
    let mut best = cost(&perm);
    let mut c = vec![0usize; n];
    let mut i = 1;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            best = best.min(cost(&perm));
            c[i] += 1;
            i = 1;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    best
}

/// Number of eigenvalues below `x` of the symmetric tridiagonal matrix with
/// diagonal `d` and off-diagonal `e` (Sturm sequence).
fn sturm_count(d: &[f64], e: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = d[0] - x;
    if q < 0.0 {
        count += 1;
    }
    for k in 1..d.len() {
        let qq = if q == 0.0 { f64::EPSILON * (e[k - 1].abs() + 1.0) } else { q };
        q = d[k] - x - e[k - 1] * e[k - 1] / qq;
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// The `k` smallest eigenvalues of `-d²/ds²` on `[0, θ]` with Dirichlet
/// conditions, from the second-difference matrix on `n` interior points.
pub fn fd_dirichlet_eigenvalues(theta: f64, n: usize, k: usize) -> Vec<f64> {
    let h = theta / (n + 1) as f64;
    let d = vec![2.0 / (h * h); n];
    let e = vec![-1.0 / (h * h); n - 1];
    let upper = 4.0 / (h * h);
    (0..k)
        .map(|idx| {
            let (mut lo, mut hi) = (0.0, upper);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if sturm_count(&d, &e, mid) > idx {
                    hi = mid;
                } else {
                    lo = mid;
                }
                if hi - lo <= 1e-15 * hi {
                    break;
                }
            }
            0.5 * (lo + hi)
        })
        .collect()
}

/// Golden-section minimizer of a unimodal function on `[a, b]`.
pub fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    while (b - a).abs() > tol {
        if f(c) < f(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - g * (b - a);
        d = a + g * (b - a);
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn permutation_minimum() {
        assert_eq!(brute_force_g2(&[0.0, 2.0], &[3.0, 1.0]), 2.0);
        assert_eq!(brute_force_g2(&[5.0], &[1.0]), 16.0);
        assert_eq!(brute_force_g2(&[1.0, 2.0, 3.0], &[3.0, 1.0, 2.0]), 0.0);
    }

    #[test]
    fn second_difference_spectrum() {
        let n = 200;
        let th = 2.0;
        let ev = fd_dirichlet_eigenvalues(th, n, 3);
        let h = th / (n + 1) as f64;
        for (k, v) in ev.iter().enumerate() {
            let exact = 4.0 / (h * h) * ((k + 1) as f64 * std::f64::consts::PI * h / (2.0 * th)).sin().powi(2);
            assert!((v - exact).abs() < 1e-9 * exact);
        }
    }

    #[test]
    fn golden_section() {
        let (x, fx) = golden_min(|x| (x - 0.3).powi(2) + 1.0, -1.0, 1.0, 1e-10);
        // flatness near the minimum limits the location to about sqrt(eps)
        assert!((x - 0.3).abs() < 1e-6 && (fx - 1.0).abs() < 1e-12);
    }
}
