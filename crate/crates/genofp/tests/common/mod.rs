//! Independent oracles used by the integration and acceptance suites.
//!
//! Nothing here shares code with the implementation paths under test: the
//! normal CDF is computed by quadrature, the entropic transport optimum by
//! Newton's method on the dual, and the unregularized optimum by brute-force
//! vertex enumeration of the transportation polytope.

#![allow(dead_code)]

/// Standard normal CDF via adaptive Simpson quadrature of the density.
pub fn quadrature_normal_cdf(z: f64) -> f64 {
    fn density(t: f64) -> f64 {
        (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt()
    }
    fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    fn adaptive(a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, eps: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = density(lm);
        let frm = density(rm);
        let left = simpson(a, m, fa, flm, fm);
        let right = simpson(m, b, fm, frm, fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * eps {
            left + right + (left + right - whole) / 15.0
        } else {
            adaptive(a, m, fa, flm, fm, left, eps / 2.0, depth - 1)
                + adaptive(m, b, fm, frm, fb, right, eps / 2.0, depth - 1)
        }
    }
    if z < -12.0 {
        return 0.0;
    }
    if z > 12.0 {
        return 1.0;
    }
    let (a, b) = (0.0f64, z.abs());
    let fa = density(a);
    let fb = density(b);
    let fm = density(0.5 * (a + b));
    let whole = simpson(a, b, fa, fm, fb);
    let integral = adaptive(a, b, fa, fm, fb, whole, 1e-14, 40);
    if z >= 0.0 {
        0.5 + integral
    } else {
        0.5 - integral
    }
}

/// Independent coding of the odds-ratio p-value chain.
///
/// Returns (odds_ratio, z, p). Callers must pass non-degenerate counts.
pub fn pvalue_oracle(control: [u32; 3], case: [u32; 3]) -> (f64, f64, f64) {
    let c0 = f64::from(control[0]);
    let c12 = f64::from(control[1]) + f64::from(control[2]);
    let s0 = f64::from(case[0]);
    let s12 = f64::from(case[1]) + f64::from(case[2]);
    assert!(c0 > 0.0 && c12 > 0.0 && s0 > 0.0 && s12 > 0.0, "degenerate counts");
    let or = (c0 * s12) / (s0 * c12);
    let std_err = (1.0 / s12 + 1.0 / s0 + 1.0 / c12 + 1.0 / c0).sqrt();
    let z = or.ln() / std_err;
    let az = z.abs();
    let p = quadrature_normal_cdf(-az) + 1.0 - quadrature_normal_cdf(az);
    (or, z, p)
}

/// Solves a dense linear system by Gaussian elimination with partial
/// pivoting. Returns None when the matrix is (numerically) singular.
fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| {
            a[i][col]
                .abs()
                .partial_cmp(&a[j][col].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if a[pivot][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in 0..n {
            if row == col {
                continue;
            }
            let factor = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

/// Exact optimum of `min <G,cost> - H(G)/lambda` over the transportation
/// polytope, via Newton's method on the smooth dual. Requires strictly
/// positive marginals.
pub fn entropic_oracle(
    source: &[f64; 3],
    target: &[f64; 3],
    cost: &[[f64; 3]; 3],
    lambda: f64,
) -> [[f64; 3]; 3] {
    assert!(source.iter().all(|&v| v > 0.0) && target.iter().all(|&v| v > 0.0));
    // variables x = (phi[0..3], psi[0..2]); gauge psi[2] = 0
    // G_ij = exp(lambda*(phi_i + psi_j - cost_ij) - 1)
    let plan = |x: &[f64; 5]| -> [[f64; 3]; 3] {
        let psi = [x[3], x[4], 0.0];
        let mut g = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                g[i][j] = (lambda * (x[i] + psi[j] - cost[i][j]) - 1.0).exp();
            }
        }
        g
    };
    let dual_value = |x: &[f64; 5]| -> f64 {
        let g = plan(x);
        let mass: f64 = g.iter().flatten().sum();
        x[0] * source[0] + x[1] * source[1] + x[2] * source[2]
            + x[3] * target[0]
            + x[4] * target[1]
            - mass / lambda
    };
    let mut x = [
        source[0].ln() / lambda + 1.0 / lambda,
        source[1].ln() / lambda + 1.0 / lambda,
        source[2].ln() / lambda + 1.0 / lambda,
        target[0].ln() / lambda,
        target[1].ln() / lambda,
    ];
    // Levenberg damping handles the (numerically) disconnected-support case
    // where the dual Hessian is singular, e.g. near-diagonal plans at large
    // lambda.
    let mut mu = 1e-12f64;
    for _ in 0..2000 {
        let g = plan(&x);
        let row_sums: [f64; 3] = std::array::from_fn(|i| g[i].iter().sum());
        let col_sums: [f64; 3] = std::array::from_fn(|j| (0..3).map(|i| g[i][j]).sum());
        let grad = [
            source[0] - row_sums[0],
            source[1] - row_sums[1],
            source[2] - row_sums[2],
            target[0] - col_sums[0],
            target[1] - col_sums[1],
        ];
        if grad.iter().all(|v| v.abs() < 1e-14) {
            return g;
        }
        // negated Hessian of the concave dual, plus damping
        let mut h = vec![vec![0.0; 5]; 5];
        for i in 0..3 {
            h[i][i] = lambda * row_sums[i] + mu;
            for j in 0..2 {
                h[i][3 + j] = lambda * g[i][j];
                h[3 + j][i] = lambda * g[i][j];
            }
        }
        for j in 0..2 {
            h[3 + j][3 + j] = lambda * col_sums[j] + mu;
        }
        let Some(step) = solve_linear(h, grad.to_vec()) else {
            mu = (mu * 10.0).max(1e-9);
            continue;
        };
        // backtracking line search on the dual value
        let base = dual_value(&x);
        let slope: f64 = grad.iter().zip(&step).map(|(g, s)| g * s).sum();
        let mut t = 1.0f64;
        let mut accepted = false;
        while t > 1e-14 {
            let mut candidate = x;
            for k in 0..5 {
                candidate[k] += t * step[k];
            }
            let value = dual_value(&candidate);
            if value.is_finite() && value >= base + 1e-4 * t * slope {
                x = candidate;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if accepted {
            mu = (mu * 0.25).max(1e-12);
        } else {
            mu *= 10.0;
            if mu > 1e6 {
                break;
            }
        }
    }
    plan(&x)
}

/// Minimum transport cost and the optimal-vertex set of the 3x3
/// transportation polytope, by brute-force basis enumeration.
pub struct LpSolution {
    pub min_cost: f64,
    pub optimal_vertices: Vec<[[f64; 3]; 3]>,
}

pub fn lp_oracle(source: &[f64; 3], target: &[f64; 3], cost: &[[f64; 3]; 3]) -> LpSolution {
    // constraints: 3 row sums, first 2 column sums (the third is implied)
    let cells: Vec<(usize, usize)> = (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).collect();
    let mut vertices: Vec<[[f64; 3]; 3]> = Vec::new();
    let mut best = f64::INFINITY;
    // choose 5 basic cells out of 9
    for mask in 0u32..(1 << 9) {
        if mask.count_ones() != 5 {
            continue;
        }
        let basis: Vec<(usize, usize)> = cells
            .iter()
            .enumerate()
            .filter(|(k, _)| mask & (1 << k) != 0)
            .map(|(_, &c)| c)
            .collect();
        let mut a = vec![vec![0.0; 5]; 5];
        let mut rhs = vec![0.0; 5];
        for (row, (constraint_kind, idx)) in (0..3)
            .map(|i| (0, i))
            .chain((0..2).map(|j| (1, j)))
            .enumerate()
        {
            rhs[row] = if constraint_kind == 0 {
                source[idx]
            } else {
                target[idx]
            };
            for (col, &(i, j)) in basis.iter().enumerate() {
                let touches = if constraint_kind == 0 { i == idx } else { j == idx };
                if touches {
                    a[row][col] = 1.0;
                }
            }
        }
        let Some(solution) = solve_linear(a, rhs) else {
            continue;
        };
        if solution.iter().any(|&v| v < -1e-9) {
            continue;
        }
        let mut g = [[0.0; 3]; 3];
        for (col, &(i, j)) in basis.iter().enumerate() {
            g[i][j] = solution[col].max(0.0);
        }
        // implied third column constraint must hold
        let col2: f64 = (0..3).map(|i| g[i][2]).sum();
        if (col2 - target[2]).abs() > 1e-7 {
            continue;
        }
        let c: f64 = (0..3)
            .flat_map(|i| (0..3).map(move |j| (i, j)))
            .map(|(i, j)| g[i][j] * cost[i][j])
            .sum();
        if c < best - 1e-9 {
            best = c;
            vertices.clear();
            vertices.push(g);
        } else if (c - best).abs() <= 1e-9 {
            let duplicate = vertices.iter().any(|v| {
                (0..3).all(|i| (0..3).all(|j| (v[i][j] - g[i][j]).abs() < 1e-9))
            });
            if !duplicate {
                vertices.push(g);
            }
        }
    }
    LpSolution {
        min_cost: best,
        optimal_vertices: vertices,
    }
}

/// Deterministic pseudo-random stream for test inputs (xorshift64*).
pub struct TestRng(u64);

impl TestRng {
    pub fn new(seed: u64) -> Self {
        TestRng(seed.max(1))
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.0;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.0 = x;
        x.wrapping_mul(0x2545F4914F6CDD1D)
    }

    pub fn unit_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: u32, hi: u32) -> u32 {
        lo + (self.next_u64() % u64::from(hi - lo)) as u32
    }

    /// A strictly positive probability 3-vector.
    pub fn simplex_point(&mut self) -> [f64; 3] {
        loop {
            let a = self.unit_f64();
            let b = self.unit_f64();
            let c = self.unit_f64();
            let total = a + b + c;
            if total > 0.0 {
                let point = [a / total, b / total, c / total];
                if point.iter().all(|&v| v > 0.01) {
                    return point;
                }
            }
        }
    }
}
