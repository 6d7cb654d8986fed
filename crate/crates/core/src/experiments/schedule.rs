//! Iteration schedule `Δ_i = ln(i³/ε)/c`, `t_i = t_{i−1} + Δ_i`, with error
//! budget `ε̂_i = ε Σ_{j≤i} 1/j²`.

use serde::Serialize;

use crate::error::{range, Result};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Schedule {
    pub n: usize,
    pub eps: f64,
    pub c: f64,
    /// `Δ_1, ..., Δ_{2n−1}`.
    pub deltas: Vec<f64>,
    /// Cumulative `t_1, ..., t_{2n−1}`.
    pub times: Vec<f64>,
    pub error_budget: Vec<f64>,
    /// `(1/c) ∫_0^{2n} ln(x³/ε) dx`.
    pub integral_bound: f64,
    pub within_integral_bound: bool,
}

impl Schedule {
    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("schedule has at least one step")
    }
}

/// `∫_0^x ln(s³/ε) ds = 3(x ln x − x) − x ln ε`.
pub fn integral_of_log_cube(x: f64, eps: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    3.0 * (x * x.ln() - x) - x * eps.ln()
}

pub fn mixing_schedule(n: usize, eps: f64, c: f64) -> Result<Schedule> {
    if n == 0 {
        return Err(range("n must be at least 1"));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(range(format!("eps must lie in (0, 1), got {eps}")));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(range(format!("c must be positive, got {c}")));
    }
    let steps = 2 * n - 1;
    let deltas: Vec<f64> = (1..=steps)
        .map(|i| ((i as f64).powi(3) / eps).ln() / c)
        .collect();
    let mut times = Vec::with_capacity(steps);
    let mut t = 0.0;
    for d in &deltas {
        t += d;
        times.push(t);
    }
    let mut error_budget = Vec::with_capacity(steps);
    let mut s = 0.0;
    for j in 1..=steps {
        s += 1.0 / (j as f64).powi(2);
        error_budget.push(eps * s);
    }
    let integral_bound = integral_of_log_cube(2.0 * n as f64, eps) / c;
    let within_integral_bound = t <= integral_bound;
    Ok(Schedule {
        n,
        eps,
        c,
        deltas,
        times,
        error_budget,
        integral_bound,
        within_integral_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn small_schedule() {
        let s = mixing_schedule(2, 0.25, 1.0).unwrap();
        assert_relative_eq!(s.deltas[0], 4f64.ln(), epsilon = 1e-12);
        assert_relative_eq!(s.deltas[1], 32f64.ln(), epsilon = 1e-12);
        assert_relative_eq!(s.deltas[2], 108f64.ln(), epsilon = 1e-12);
        assert!((s.final_time() - 9.53416).abs() < 1e-5);
        assert!(s.within_integral_bound);
        let s = mixing_schedule(2, 0.1, 1.0).unwrap();
        assert!((s.error_budget[2] - 0.13611).abs() < 1e-5);
    }

    #[test]
    fn single_step_exceeds_integral() {
        // ln 4 > 3(2 ln 2 − 2) + 2 ln 4
        let s = mixing_schedule(1, 0.25, 1.0).unwrap();
        assert!(!s.within_integral_bound);
    }

    #[test]
    fn integral_bound_holds_from_two() {
        for n in 2..=4096 {
            let s = mixing_schedule(n, 0.25, 1.0).unwrap();
            assert!(s.within_integral_bound, "n = {n}");
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(mixing_schedule(0, 0.25, 1.0).is_err());
        assert!(mixing_schedule(2, 1.0, 1.0).is_err());
        assert!(mixing_schedule(2, 0.25, 0.0).is_err());
    }
}
