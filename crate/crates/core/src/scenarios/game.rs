//! Quadratic connectivity game
//! `h_i(u) = |u_i - s_i|^2 + c Σ_{j≠i} |u_i - u_j|^2` with planar actions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Residual bound a Nash solution must meet.
pub const NASH_RESIDUAL_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameParams {
    /// Source position of each agent, metres.
    pub sources: Vec<[f64; 2]>,
    pub coupling: f64,
}

impl GameParams {
    pub fn default_sources() -> Vec<[f64; 2]> {
        vec![[-4.0, -8.0], [-12.0, -3.0], [1.0, 7.0], [16.0, 8.0]]
    }

    pub fn n(&self) -> usize {
        self.sources.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.sources.is_empty() {
            return Err(Error::Param("the game needs at least one agent".into()));
        }
        if !(self.coupling >= 0.0) || !self.coupling.is_finite() {
            return Err(Error::Param(format!("coupling must be nonnegative, got {}", self.coupling)));
        }
        if self.sources.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Param("source positions must be finite".into()));
        }
        Ok(())
    }
}

impl Default for GameParams {
    fn default() -> Self {
        Self {
            sources: Self::default_sources(),
            coupling: 0.25,
        }
    }
}

/// Cost of agent `i` at stacked positions `u = (u_1^1, u_1^2, u_2^1, ...)`.
pub fn eval_cost<T: Scalar>(g: &GameParams, i: usize, u: &[T]) -> Result<T> {
    let n = g.n();
    if i >= n {
        return Err(Error::Index { index: i, len: n });
    }
    if u.len() != 2 * n {
        return Err(Error::Dimension {
            expected: 2 * n,
            got: u.len(),
        });
    }
    Ok(cost_unchecked(g, i, u))
}

pub(crate) fn cost_unchecked<T: Scalar>(g: &GameParams, i: usize, u: &[T]) -> T {
    let sq = |a: T, b: T| (a - b) * (a - b);
    let (ui1, ui2) = (u[2 * i], u[2 * i + 1]);
    let s = g.sources[i];
    let own = sq(ui1, T::lit(s[0])) + sq(ui2, T::lit(s[1]));
    let mut coupled = T::zero();
    for j in (0..g.n()).filter(|&j| j != i) {
        coupled += sq(ui1, u[2 * j]) + sq(ui2, u[2 * j + 1]);
    }
    own + T::lit(g.coupling) * coupled
}

/// `∇_{u_i} h_i(u)` for every agent, stacked.
pub fn pseudo_gradient(g: &GameParams, u: &[f64]) -> Vec<f64> {
    let n = g.n();
    let mut out = vec![0.0; 2 * n];
    for i in 0..n {
        for k in 0..2 {
            let mut v = 2.0 * (u[2 * i + k] - g.sources[i][k]);
            for j in (0..n).filter(|&j| j != i) {
                v += 2.0 * g.coupling * (u[2 * i + k] - u[2 * j + k]);
            }
            out[2 * i + k] = v;
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NashSolution {
    /// Stacked equilibrium positions, metres.
    pub u_star: Vec<f64>,
    /// `max_i |∇_{u_i} h_i(u*)|`.
    pub residual: f64,
}

impl NashSolution {
    pub fn position(&self, i: usize) -> [f64; 2] {
        [self.u_star[2 * i], self.u_star[2 * i + 1]]
    }
}

/// Solves `(1 + c(N-1)) u_i - c Σ_{j≠i} u_j = s_i` per coordinate by
/// Gaussian elimination with partial pivoting.
pub fn solve_nash_quadratic(g: &GameParams) -> Result<NashSolution> {
    g.validate()?;
    let n = g.n();
    let c = g.coupling;
    let diag = 1.0 + c * (n as f64 - 1.0);
    let mut u_star = vec![0.0; 2 * n];
    for k in 0..2 {
        let mut a: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { diag } else { -c }).collect())
            .collect();
        let mut b: Vec<f64> = g.sources.iter().map(|s| s[k]).collect();
        let x = gauss_solve(&mut a, &mut b)?;
        for i in 0..n {
            u_star[2 * i + k] = x[i];
        }
    }
    let residual = pseudo_gradient(g, &u_star)
        .chunks(2)
        .map(|p| p[0].hypot(p[1]))
        .fold(0.0, f64::max);
    if !(residual <= NASH_RESIDUAL_TOL * (1.0 + max_abs(&g.sources))) {
        return Err(Error::SingularSystem);
    }
    Ok(NashSolution { u_star, residual })
}

fn max_abs(s: &[[f64; 2]]) -> f64 {
    s.iter().flatten().fold(0.0, |m: f64, v| m.max(v.abs()))
}

fn gauss_solve(a: &mut [Vec<f64>], b: &mut [f64]) -> Result<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .expect("nonempty range");
        if a[piv][col].abs() < 1e-300 {
            return Err(Error::SingularSystem);
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[r][k] -= f * a[col][k];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let mut s = b[r];
        for k in r + 1..n {
            s -= a[r][k] * x[k];
        }
        x[r] = s / a[r][r];
    }
    Ok(x)
}
