//! Self-contained dense linear feasibility solver.
//!
//! Phase-1 simplex with Bland's rule on a dense tableau. Problems here are
//! tiny (tens of variables, tens of constraints), so no factorization or
//! sparsity machinery is warranted. Returns a feasible point or `None`.

const TOL: f64 = 1e-9;

/// Relation of one linear constraint `coeffs . x (op) rhs`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpOp {
    Eq,
    Ge,
}

#[derive(Debug, Clone)]
pub struct LpConstraint {
    pub coeffs: Vec<f64>,
    pub op: LpOp,
    pub rhs: f64,
}

impl LpConstraint {
    pub fn eq(coeffs: Vec<f64>, rhs: f64) -> Self {
        Self {
            coeffs,
            op: LpOp::Eq,
            rhs,
        }
    }

    pub fn ge(coeffs: Vec<f64>, rhs: f64) -> Self {
        Self {
            coeffs,
            op: LpOp::Ge,
            rhs,
        }
    }
}

/// Searches for `x` with `x[i] >= lower_bound` satisfying every constraint.
///
/// The bound is handled by the substitution `x = y + lower_bound`, `y >= 0`.
/// Any returned point is re-checked against the original system before
/// being reported feasible.
pub fn solve_feasibility(
    num_vars: usize,
    constraints: &[LpConstraint],
    lower_bound: f64,
) -> Option<Vec<f64>> {
    let m = constraints.len();
    let num_slacks = constraints.iter().filter(|c| c.op == LpOp::Ge).count();
    let n_total = num_vars + num_slacks + m; // structural + slacks + artificials
    let width = n_total + 1; // last column is the rhs

    // Tableau rows: structural coeffs | slack coeffs | artificial coeffs | rhs
    let mut tab = vec![0.0f64; m * width];
    let mut basis = vec![0usize; m];
    let mut slack_idx = 0usize;
    for (r, c) in constraints.iter().enumerate() {
        assert_eq!(c.coeffs.len(), num_vars, "constraint arity mismatch");
        let shift: f64 = c.coeffs.iter().map(|a| a * lower_bound).sum();
        let mut rhs = c.rhs - shift;
        let mut row = vec![0.0f64; width];
        row[..num_vars].copy_from_slice(&c.coeffs);
        if c.op == LpOp::Ge {
            row[num_vars + slack_idx] = -1.0;
            slack_idx += 1;
        }
        // Normalize to rhs >= 0 so the artificial basis is feasible.
        if rhs < 0.0 {
            rhs = -rhs;
            for v in row.iter_mut() {
                *v = -*v;
            }
        }
        row[num_vars + num_slacks + r] = 1.0;
        row[n_total] = rhs;
        tab[r * width..(r + 1) * width].copy_from_slice(&row);
        basis[r] = num_vars + num_slacks + r;
    }

    // Phase-1 objective: minimize the sum of artificials. Reduced costs are
    // kept in an explicit row: z[j] = sum over rows of artificial basis.
    let mut obj = vec![0.0f64; width];
    for r in 0..m {
        for j in 0..width {
            obj[j] += tab[r * width + j];
        }
    }

    let artificial_start = num_vars + num_slacks;
    let max_iters = 50 * (m + n_total).max(100);
    for _ in 0..max_iters {
        // Bland's rule: smallest-index column with positive reduced cost.
        let mut entering = None;
        for j in 0..n_total {
            if j >= artificial_start {
                continue; // never re-enter artificials
            }
            if obj[j] > TOL {
                entering = Some(j);
                break;
            }
        }
        let Some(e) = entering else { break };

        // Ratio test, Bland tie-break on the leaving basis variable.
        let mut leave: Option<(usize, f64)> = None;
        for r in 0..m {
            let a = tab[r * width + e];
            if a > TOL {
                let ratio = tab[r * width + n_total] / a;
                match leave {
                    None => leave = Some((r, ratio)),
                    Some((lr, lratio)) => {
                        if ratio < lratio - TOL
                            || ((ratio - lratio).abs() <= TOL && basis[r] < basis[lr])
                        {
                            leave = Some((r, ratio));
                        }
                    }
                }
            }
        }
        let Some((lr, _)) = leave else {
            return None; // unbounded phase-1 cannot happen; treat as failure
        };

        // Pivot on (lr, e).
        let pivot = tab[lr * width + e];
        for j in 0..width {
            tab[lr * width + j] /= pivot;
        }
        for r in 0..m {
            if r != lr {
                let factor = tab[r * width + e];
                if factor != 0.0 {
                    for j in 0..width {
                        tab[r * width + j] -= factor * tab[lr * width + j];
                    }
                }
            }
        }
        let factor = obj[e];
        for j in 0..width {
            obj[j] -= factor * tab[lr * width + j];
        }
        basis[lr] = e;
    }

    // Residual phase-1 objective is the infeasibility.
    if obj[n_total] > 1e-7 {
        return None;
    }

    let mut y = vec![0.0f64; num_vars];
    for (r, &b) in basis.iter().enumerate() {
        if b < num_vars {
            y[b] = tab[r * width + n_total];
        }
    }
    let x: Vec<f64> = y.iter().map(|v| v.max(0.0) + lower_bound).collect();

    // Defensive recheck against the original system.
    for c in constraints {
        let lhs: f64 = c.coeffs.iter().zip(&x).map(|(a, v)| a * v).sum();
        let ok = match c.op {
            LpOp::Eq => (lhs - c.rhs).abs() <= 1e-6,
            LpOp::Ge => lhs >= c.rhs - 1e-6,
        };
        if !ok {
            return None;
        }
    }
    Some(x)
}
