//! Random-walk transition model and stationary-distribution solver.
//!
//! The transition matrix over n nodes is built from the interaction
//! parameters x_ij, 1 <= i < j <= n:
//!
//! ```text
//! P[j,i] = x_ij / (n-1)          for i < j
//! P[i,j] = 1/(n-1) - P[j,i]      for i != j
//! P[i,i] = 1 - sum_{j != i} P[i,j]
//! ```
//!
//! At each step the walker at node j picks one of the other n-1 nodes
//! uniformly; if it picks i it moves there with probability x_ij and stays
//! put otherwise. The stationary vector pi solves pi P = pi with sum pi = 1,
//! and its derivative with respect to each x_ij solves the linear system
//! obtained by differentiating the equilibrium equation, subject to the
//! zero-sum constraint.
//!
//! Solves are dense and direct: one balance equation is replaced by the
//! normalization row and the resulting matrix is LU-factored once per
//! parameter point. The factorization serves the stationary solve and all
//! n(n-1)/2 derivative right-hand sides. Dense storage targets n <= 500.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::pair::Pair;

const ROW_SUM_TOL: f64 = 1e-12;
const STATIONARY_RESIDUAL_TOL: f64 = 1e-10;

/// Interaction parameters x_ij in [0,1], one per unordered node pair.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionVector {
    n: usize,
    values: Vec<f64>,
}

impl InteractionVector {
    /// Values in lexicographic pair order; rejects n < 2, wrong length, and
    /// out-of-range entries.
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self> {
        if n < 2 {
            return Err(Error::NodeCount(n));
        }
        let expected = Pair::count(n);
        if values.len() != expected {
            return Err(Error::ParameterCount {
                n,
                expected,
                got: values.len(),
            });
        }
        for (k, &v) in values.iter().enumerate() {
            if !(0.0..=1.0).contains(&v) {
                let p = Pair::from_index(k, n);
                return Err(Error::ParameterRange {
                    i: p.i(),
                    j: p.j(),
                    value: v,
                });
            }
        }
        Ok(InteractionVector { n, values })
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(Pair) -> f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::NodeCount(n));
        }
        let values = Pair::all(n).map(&mut f).collect();
        Self::new(n, values)
    }

    pub fn constant(n: usize, value: f64) -> Result<Self> {
        Self::from_fn(n, |_| value)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, pair: Pair) -> f64 {
        self.values[pair.index(self.n)]
    }

    pub fn set(&mut self, pair: Pair, value: f64) -> Result<()> {
        pair.validate(self.n)?;
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::ParameterRange {
                i: pair.i(),
                j: pair.j(),
                value,
            });
        }
        self.values[pair.index(self.n)] = value;
        Ok(())
    }

    /// Values in lexicographic pair order.
    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Row-stochastic transition matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    n: usize,
    entries: DMatrix<f64>,
}

impl TransitionMatrix {
    /// Validates row sums (within 1e-12) and entry range.
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        let n = entries.nrows();
        if n < 2 || entries.ncols() != n {
            return Err(Error::InvalidTransitionMatrix(format!(
                "expected square matrix with n >= 2, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        for r in 0..n {
            let mut sum = 0.0;
            for c in 0..n {
                let v = entries[(r, c)];
                if !(-ROW_SUM_TOL..=1.0 + ROW_SUM_TOL).contains(&v) {
                    return Err(Error::InvalidTransitionMatrix(format!(
                        "entry ({},{}) = {v} outside [0,1]",
                        r + 1,
                        c + 1
                    )));
                }
                sum += v;
            }
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::InvalidTransitionMatrix(format!(
                    "row {} sums to {sum}, expected 1",
                    r + 1
                )));
            }
        }
        Ok(TransitionMatrix { n, entries })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Entry P[i,j] with 1-based node ids.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i - 1, j - 1)]
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    fn describe(&self) -> String {
        if self.n <= 12 {
            let rows: Vec<String> = (0..self.n)
                .map(|r| {
                    let cells: Vec<String> =
                        (0..self.n).map(|c| format!("{:.6}", self.entries[(r, c)])).collect();
                    cells.join(",")
                })
                .collect();
            format!("{}x{} transition matrix [{}]", self.n, self.n, rows.join("; "))
        } else {
            format!("{}x{} transition matrix", self.n, self.n)
        }
    }
}

/// Derivative of the transition matrix with respect to one x_ij.
///
/// Exactly four cells are structurally nonzero: (i,i) and (j,i) carry
/// +1/(n-1), (i,j) and (j,j) carry -1/(n-1). Every row sums to zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionDerivative {
    n: usize,
    pair: Pair,
    magnitude: f64,
}

impl TransitionDerivative {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn pair(&self) -> Pair {
        self.pair
    }

    /// The four nonzero cells as (row, column, value) with 1-based ids.
    pub fn cells(&self) -> [(usize, usize, f64); 4] {
        let (i, j, m) = (self.pair.i(), self.pair.j(), self.magnitude);
        [(i, i, m), (j, i, m), (i, j, -m), (j, j, -m)]
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.n, self.n);
        for (r, c, v) in self.cells() {
            d[(r - 1, c - 1)] = v;
        }
        d
    }
}

/// Transition model seam: maps interaction parameters to a transition
/// matrix and its per-parameter derivative. Only the random-walk form
/// ships; the trait is the extension point for other link functions.
pub trait TransitionModel {
    fn transition(&self, x: &InteractionVector) -> TransitionMatrix;
    fn derivative(&self, n: usize, pair: Pair) -> Result<TransitionDerivative>;
}

/// The random-walk (PageRank-style) transition model described above.
#[derive(Debug, Clone, Copy, Default)]
pub struct RandomWalkModel;

impl TransitionModel for RandomWalkModel {
    fn transition(&self, x: &InteractionVector) -> TransitionMatrix {
        let n = x.n();
        let inv = 1.0 / (n - 1) as f64;
        let mut p = DMatrix::zeros(n, n);
        for pair in Pair::all(n) {
            let (i, j) = (pair.i() - 1, pair.j() - 1);
            let toward_i = x.get(pair) * inv;
            p[(j, i)] = toward_i;
            p[(i, j)] = inv - toward_i;
        }
        for r in 0..n {
            let off: f64 = (0..n).filter(|&c| c != r).map(|c| p[(r, c)]).sum();
            // Row sums are exactly 1 up to rounding; clamp the diagonal into [0,1].
            p[(r, r)] = (1.0 - off).clamp(0.0, 1.0);
        }
        TransitionMatrix { n, entries: p }
    }

    fn derivative(&self, n: usize, pair: Pair) -> Result<TransitionDerivative> {
        if n < 2 {
            return Err(Error::NodeCount(n));
        }
        pair.validate(n)?;
        Ok(TransitionDerivative {
            n,
            pair,
            magnitude: 1.0 / (n - 1) as f64,
        })
    }
}

/// Build the random-walk transition matrix from interaction parameters.
pub fn build_transition(x: &InteractionVector) -> TransitionMatrix {
    RandomWalkModel.transition(x)
}

/// Derivative of the random-walk transition matrix with respect to x_ij.
pub fn transition_derivative(n: usize, pair: Pair) -> Result<TransitionDerivative> {
    RandomWalkModel.derivative(n, pair)
}

/// Constrained balance system: (I - P)^T with the last row replaced by the
/// normalization row of ones. The dropped balance equation is implied by
/// the others, so the system is nonsingular whenever the chain has a
/// unique stationary distribution.
struct ConstrainedSolver {
    n: usize,
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    description: String,
}

impl ConstrainedSolver {
    fn new(p: &TransitionMatrix) -> Self {
        let n = p.n;
        let mut b = DMatrix::zeros(n, n);
        for r in 0..n - 1 {
            for c in 0..n {
                // row r of (I - P)^T is column r of I - P
                b[(r, c)] = if c == r { 1.0 } else { 0.0 } - p.entries[(c, r)];
            }
        }
        for c in 0..n {
            b[(n - 1, c)] = 1.0;
        }
        ConstrainedSolver {
            n,
            lu: b.lu(),
            description: p.describe(),
        }
    }

    fn solve(&self, rhs: &mut DVector<f64>) -> Result<()> {
        if !self.lu.solve_mut(rhs) || rhs.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularSystem {
                matrix: self.description.clone(),
            });
        }
        Ok(())
    }
}

/// Solve pi P = pi, sum pi = 1 by direct elimination.
///
/// Fails with a singular-system error when the chain lacks a unique
/// stationary distribution (e.g. reducible chains produced by boundary
/// parameters), or when the solution does not satisfy the equilibrium
/// equation to within 1e-10 in the infinity norm.
pub fn stationary(p: &TransitionMatrix) -> Result<Vec<f64>> {
    let solver = ConstrainedSolver::new(p);
    let n = p.n;
    let mut rhs = DVector::zeros(n);
    rhs[n - 1] = 1.0;
    solver.solve(&mut rhs)?;

    let mut residual = 0.0f64;
    for c in 0..n {
        let mut acc = -rhs[c];
        for r in 0..n {
            acc += rhs[r] * p.entries[(r, c)];
        }
        residual = residual.max(acc.abs());
    }
    if !(residual <= STATIONARY_RESIDUAL_TOL) {
        return Err(Error::ResidualTooLarge {
            residual,
            tolerance: STATIONARY_RESIDUAL_TOL,
            matrix: p.describe(),
        });
    }
    Ok(rhs.iter().copied().collect())
}

/// Power-iteration cross-check for the stationary vector. Not the default
/// solve path; requires an aperiodic chain to converge.
pub fn stationary_power(p: &TransitionMatrix, tol: f64, max_iterations: usize) -> Result<Vec<f64>> {
    let n = p.n;
    let mut pi = vec![1.0 / n as f64; n];
    let mut next = vec![0.0; n];
    for _ in 0..max_iterations {
        for c in 0..n {
            next[c] = (0..n).map(|r| pi[r] * p.entries[(r, c)]).sum();
        }
        let norm: f64 = next.iter().sum();
        for v in next.iter_mut() {
            *v /= norm;
        }
        let delta = pi
            .iter()
            .zip(next.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        std::mem::swap(&mut pi, &mut next);
        if delta < tol {
            return Ok(pi);
        }
    }
    Err(Error::PowerIterationDiverged { max_iterations })
}

/// Stationary vector together with its derivative with respect to every
/// interaction parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct StationarySolution {
    n: usize,
    pi: Vec<f64>,
    /// Flat [pair_count x n] matrix; row k is the derivative vector for the
    /// pair with lexicographic index k.
    dpi: Vec<f64>,
}

impl StationarySolution {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    /// Derivative vector of pi with respect to x_ij for one pair.
    pub fn dpi(&self, pair: Pair) -> &[f64] {
        let k = pair.index(self.n);
        &self.dpi[k * self.n..(k + 1) * self.n]
    }
}

/// Solve the derivative systems for all pairs.
///
/// Differentiating the equilibrium equation gives, for each pair (i,j),
///
/// ```text
/// dpi/dx_ij (I - P) = pi dP/dx_ij,    sum_k dpi_k/dx_ij = 0.
/// ```
///
/// For the random-walk model the right-hand side is
/// (pi_i + pi_j)/(n-1) * (e_i - e_j), so n-1 unit solves against one LU
/// factorization cover every pair by linearity.
pub fn stationary_derivatives(
    p: &TransitionMatrix,
    pi: &[f64],
    x: &InteractionVector,
) -> Result<StationarySolution> {
    let n = p.n;
    assert_eq!(x.n(), n, "interaction vector does not match matrix size");
    assert_eq!(pi.len(), n, "stationary vector does not match matrix size");

    let solver = ConstrainedSolver::new(p);
    // unit[k] solves B u = e_{k+1} (constraint row entry zeroed); the
    // response for the dropped unit vector e_n is identically zero.
    let mut units: Vec<DVector<f64>> = Vec::with_capacity(n - 1);
    for k in 0..n - 1 {
        let mut rhs = DVector::zeros(n);
        rhs[k] = 1.0;
        solver.solve(&mut rhs)?;
        units.push(rhs);
    }

    let inv = 1.0 / (n - 1) as f64;
    let mut dpi = vec![0.0; Pair::count(n) * n];
    for pair in Pair::all(n) {
        let (i, j) = (pair.i(), pair.j());
        let gamma = (pi[i - 1] + pi[j - 1]) * inv;
        let row = &mut dpi[pair.index(n) * n..(pair.index(n) + 1) * n];
        let ui = &units[i - 1];
        if j < n {
            let uj = &units[j - 1];
            for k in 0..n {
                row[k] = gamma * (ui[k] - uj[k]);
            }
        } else {
            for k in 0..n {
                row[k] = gamma * ui[k];
            }
        }
    }
    Ok(StationarySolution {
        n,
        pi: pi.to_vec(),
        dpi,
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    fn vec3(x12: f64, x13: f64, x23: f64) -> InteractionVector {
        InteractionVector::new(3, vec![x12, x13, x23]).unwrap()
    }

    /// Table-1 parameter point used throughout the tests.
    pub(crate) fn table1() -> InteractionVector {
        vec3(0.7, 0.35, 0.6)
    }

    #[test]
    fn interaction_vector_validation() {
        assert!(matches!(
            InteractionVector::new(1, vec![]),
            Err(Error::NodeCount(1))
        ));
        assert!(matches!(
            InteractionVector::new(3, vec![0.5; 2]),
            Err(Error::ParameterCount { .. })
        ));
        assert!(matches!(
            InteractionVector::new(2, vec![1.5]),
            Err(Error::ParameterRange { .. })
        ));
    }

    #[test]
    fn symmetric_two_node_pair_gives_uniform_rows() {
        let x = InteractionVector::new(2, vec![0.5]).unwrap();
        let p = build_transition(&x);
        for r in 1..=2 {
            for c in 1..=2 {
                assert_eq!(p.get(r, c), 0.5);
            }
        }
    }

    #[test]
    fn three_node_transition_rows() {
        let p = build_transition(&table1());
        let expected = [
            [0.525, 0.15, 0.325],
            [0.35, 0.45, 0.2],
            [0.175, 0.3, 0.525],
        ];
        for r in 0..3 {
            for c in 0..3 {
                assert!((p.get(r + 1, c + 1) - expected[r][c]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn boundary_parameter_gives_absorbing_structure() {
        let x = InteractionVector::new(2, vec![1.0]).unwrap();
        let p = build_transition(&x);
        assert_eq!(p.get(1, 1), 1.0);
        assert_eq!(p.get(1, 2), 0.0);
        assert_eq!(p.get(2, 1), 1.0);
        assert_eq!(p.get(2, 2), 0.0);
    }

    #[test]
    fn derivative_cells_n2() {
        let d = transition_derivative(2, Pair::new(1, 2).unwrap()).unwrap();
        let dense = d.to_dense();
        assert_eq!(dense[(0, 0)], 1.0);
        assert_eq!(dense[(1, 0)], 1.0);
        assert_eq!(dense[(0, 1)], -1.0);
        assert_eq!(dense[(1, 1)], -1.0);
    }

    #[test]
    fn derivative_cells_n3() {
        let d = transition_derivative(3, Pair::new(1, 3).unwrap()).unwrap();
        let dense = d.to_dense();
        assert_eq!(dense[(0, 0)], 0.5);
        assert_eq!(dense[(2, 0)], 0.5);
        assert_eq!(dense[(0, 2)], -0.5);
        assert_eq!(dense[(2, 2)], -0.5);
        assert_eq!(dense[(1, 1)], 0.0);
    }

    #[test]
    fn derivative_rows_sum_to_zero() {
        for n in 2..=7 {
            for pair in Pair::all(n) {
                let dense = transition_derivative(n, pair).unwrap().to_dense();
                for r in 0..n {
                    let s: f64 = (0..n).map(|c| dense[(r, c)]).sum();
                    assert_eq!(s, 0.0);
                }
            }
        }
    }

    #[test]
    fn derivative_rejects_bad_input() {
        assert!(transition_derivative(3, Pair::new(2, 4).unwrap()).is_err());
    }

    #[test]
    fn stationary_uniform_matrix() {
        let n = 5;
        let p = TransitionMatrix::new(DMatrix::from_element(n, n, 1.0 / n as f64)).unwrap();
        let pi = stationary(&p).unwrap();
        for v in pi {
            assert!((v - 0.2).abs() < 1e-14);
        }
    }

    #[test]
    fn stationary_table1() {
        let pi = stationary(&build_transition(&table1())).unwrap();
        assert!((pi[0] - 0.3477).abs() < 5e-5);
        assert!((pi[1] - 0.2916).abs() < 5e-5);
        assert!((pi[2] - 0.3607).abs() < 5e-5);
    }

    #[test]
    fn stationary_two_node_closed_form() {
        let x = InteractionVector::new(2, vec![0.7]).unwrap();
        let pi = stationary(&build_transition(&x)).unwrap();
        assert!((pi[0] - 0.7).abs() < 1e-14);
        assert!((pi[1] - 0.3).abs() < 1e-14);
    }

    #[test]
    fn stationary_boundary_absorbing() {
        // x = 1 makes node 1 absorbing; the unique stationary vector is (1,0).
        let x = InteractionVector::new(2, vec![1.0]).unwrap();
        let pi = stationary(&build_transition(&x)).unwrap();
        assert!((pi[0] - 1.0).abs() < 1e-14);
        assert!(pi[1].abs() < 1e-14);
    }

    #[test]
    fn power_iteration_matches_direct_solve() {
        let p = build_transition(&table1());
        let direct = stationary(&p).unwrap();
        let power = stationary_power(&p, 1e-13, 100_000).unwrap();
        for (a, b) in direct.iter().zip(power.iter()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn two_node_derivative_closed_form() {
        for &x12 in &[0.1, 0.5, 0.9] {
            let x = InteractionVector::new(2, vec![x12]).unwrap();
            let p = build_transition(&x);
            let pi = stationary(&p).unwrap();
            let sol = stationary_derivatives(&p, &pi, &x).unwrap();
            let d = sol.dpi(Pair::new(1, 2).unwrap());
            assert!((d[0] - 1.0).abs() < 1e-12);
            assert!((d[1] + 1.0).abs() < 1e-12);
        }
    }

    /// Central finite difference of the stationary vector, step h.
    pub(crate) fn finite_difference(x: &InteractionVector, pair: Pair, h: f64) -> Vec<f64> {
        let mut plus = x.clone();
        plus.set(pair, x.get(pair) + h).unwrap();
        let mut minus = x.clone();
        minus.set(pair, x.get(pair) - h).unwrap();
        let pp = stationary(&build_transition(&plus)).unwrap();
        let pm = stationary(&build_transition(&minus)).unwrap();
        pp.iter().zip(pm.iter()).map(|(a, b)| (a - b) / (2.0 * h)).collect()
    }

    #[test]
    fn table1_derivative_matches_finite_difference() {
        let x = table1();
        let p = build_transition(&x);
        let pi = stationary(&p).unwrap();
        let sol = stationary_derivatives(&p, &pi, &x).unwrap();
        let pair = Pair::new(1, 3).unwrap();
        let fd = finite_difference(&x, pair, 1e-6);
        for (a, b) in sol.dpi(pair).iter().zip(fd.iter()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn table1_linear_extrapolation_reproduces_estimation_one() {
        // pi(x + 0.02 e_{1,3}) ~ pi + 0.02 dpi/dx_{1,3}, compared against the
        // perturbed stationary vector (0.3582, 0.2897, 0.3521).
        let x = table1();
        let p = build_transition(&x);
        let pi = stationary(&p).unwrap();
        let sol = stationary_derivatives(&p, &pi, &x).unwrap();
        let d = sol.dpi(Pair::new(1, 3).unwrap());
        let predicted: Vec<f64> = pi.iter().zip(d.iter()).map(|(p, d)| p + 0.02 * d).collect();
        let expected = [0.3582, 0.2897, 0.3521];
        for (a, b) in predicted.iter().zip(expected.iter()) {
            assert!((a - b).abs() < 2e-3);
        }
    }

    #[test]
    fn derivative_vectors_sum_to_zero() {
        let x = InteractionVector::new(4, vec![0.3, 0.8, 0.45, 0.62, 0.2, 0.55]).unwrap();
        let p = build_transition(&x);
        let pi = stationary(&p).unwrap();
        let sol = stationary_derivatives(&p, &pi, &x).unwrap();
        for pair in Pair::all(4) {
            let s: f64 = sol.dpi(pair).iter().sum();
            assert!(s.abs() < 1e-10);
        }
    }
}
