//! Small dense linear programs: maximize `c·x` subject to `A x <= b` with free `x`.

#[derive(Clone, Debug, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, value: f64 },
    Unbounded,
    Infeasible,
}

const EPS: f64 = 1e-11;

struct Tableau {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let cols = self.cols;
        let inv = 1.0 / self.at(pr, pc);
        for c in 0..cols {
            self.data[pr * cols + c] *= inv;
        }
        for r in 0..self.rows {
            if r == pr {
                continue;
            }
            let f = self.at(r, pc);
            if f != 0.0 {
                for c in 0..cols {
                    let v = self.data[pr * cols + c];
                    if v != 0.0 {
                        self.data[r * cols + c] -= f * v;
                    }
                }
            }
        }
        self.basis[pr] = pc;
    }

    /// Runs the simplex on objective row `obj` (last row holds reduced costs, minimization form).
    /// Columns `>= allowed` never enter. Returns false when unbounded.
    fn run(&mut self, allowed: usize) -> bool {
        let m = self.rows - 1;
        let rhs = self.cols - 1;
        let scale = (0..m).map(|r| self.at(r, rhs).abs()).fold(1.0, f64::max);
        for _ in 0..50_000 {
            // Bland: first column with negative reduced cost.
            let Some(pc) = (0..allowed).find(|&c| self.at(m, c) < -EPS) else {
                return true;
            };
            let mut best: Option<(usize, f64)> = None;
            for r in 0..m {
                let a = self.at(r, pc);
                if a > EPS {
                    let ratio = self.at(r, rhs) / a;
                    match best {
                        None => best = Some((r, ratio)),
                        Some((br, bv)) => {
                            if ratio < bv - EPS * scale || (ratio <= bv + EPS * scale && self.basis[r] < self.basis[br])
                            {
                                best = Some((r, ratio));
                            }
                        }
                    }
                }
            }
            match best {
                None => return false,
                Some((pr, _)) => self.pivot(pr, pc),
            }
        }
        true
    }
}

/// Maximizes `c·x` over `{x : a_i·x <= b_i}` with all variables free.
pub fn maximize(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> LpOutcome {
    let n = c.len();
    let m = a.len();
    assert_eq!(b.len(), m);
    if m == 0 {
        return if c.iter().all(|v| v.abs() <= EPS) {
            LpOutcome::Optimal { x: vec![0.0; n], value: 0.0 }
        } else {
            LpOutcome::Unbounded
        };
    }
    let negative: Vec<usize> = (0..m).filter(|&i| b[i] < 0.0).collect();
    let n_art = negative.len();
    // columns: x+ (n), x- (n), slack (m), artificial (n_art), rhs
    let cols = 2 * n + m + n_art + 1;
    let rows = m + 1;
    let mut t = Tableau { rows, cols, data: vec![0.0; rows * cols], basis: vec![0; m] };
    let rhs = cols - 1;
    let mut art = 0;
    for i in 0..m {
        let sign = if b[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            t.data[i * cols + j] = sign * a[i][j];
            t.data[i * cols + n + j] = -sign * a[i][j];
        }
        t.data[i * cols + 2 * n + i] = sign;
        t.data[i * cols + rhs] = sign * b[i];
        if b[i] < 0.0 {
            t.data[i * cols + 2 * n + m + art] = 1.0;
            t.basis[i] = 2 * n + m + art;
            art += 1;
        } else {
            t.basis[i] = 2 * n + i;
        }
    }
    let structural = 2 * n + m;
    if n_art > 0 {
        // phase one: minimize the sum of artificials
        for &i in &negative {
            for col in 0..cols {
                t.data[m * cols + col] -= t.data[i * cols + col];
            }
        }
        for k in 0..n_art {
            t.data[m * cols + structural + k] = 0.0;
        }
        t.run(structural);
        let scale = b.iter().fold(1.0_f64, |s, v| s.max(v.abs()));
        if -t.at(m, rhs) > 1e-9 * scale {
            return LpOutcome::Infeasible;
        }
        // drive remaining artificials out of the basis
        for r in 0..m {
            if t.basis[r] >= structural {
                if let Some(pc) = (0..structural).find(|&col| t.at(r, col).abs() > 1e-9) {
                    t.pivot(r, pc);
                }
            }
        }
    }
    // phase two objective: minimize -c·x
    for col in 0..cols {
        t.data[m * cols + col] = 0.0;
    }
    for j in 0..n {
        t.data[m * cols + j] = -c[j];
        t.data[m * cols + n + j] = c[j];
    }
    for r in 0..m {
        let bc = t.basis[r];
        let f = t.at(m, bc);
        if f != 0.0 {
            for col in 0..cols {
                t.data[m * cols + col] -= f * t.data[r * cols + col];
            }
        }
    }
    if !t.run(structural) {
        return LpOutcome::Unbounded;
    }
    let mut x = vec![0.0; n];
    for r in 0..m {
        let bc = t.basis[r];
        let v = t.at(r, rhs);
        if bc < n {
            x[bc] += v;
        } else if bc < 2 * n {
            x[bc - n] -= v;
        }
    }
    let value = c.iter().zip(&x).map(|(a, b)| a * b).sum();
    LpOutcome::Optimal { x, value }
}
