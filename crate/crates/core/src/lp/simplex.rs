//! Dense revised simplex for bounded-variable LPs.
//!
//! min c·x subject to A x = b, l ≤ x ≤ u, with finite lower bounds. Two
//! phases with one artificial per row; Bland's rule for both pricing and the
//! ratio test so the pivot sequence is a pure function of the input.

use std::fmt;

use thiserror::Error;

pub const TOLERANCE: f64 = 1e-9;
/// Basis inverse is rebuilt from scratch after this many pivots.
pub const REFACTOR_INTERVAL: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Optimal => "optimal",
            Status::Infeasible => "infeasible",
            Status::Unbounded => "unbounded",
            Status::IterationLimit => "iteration-limit",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimplexError {
    #[error("variable {0} has lower bound {1} above upper bound {2}")]
    BadBounds(usize, f64, f64),
    #[error("variable {0} needs a finite lower bound")]
    InfiniteLower(usize),
    #[error("constraint references variable {0}, which does not exist")]
    UnknownVariable(usize),
    #[error("basis matrix became singular during refactorization")]
    SingularBasis,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearProgram {
    cost: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    rows: Vec<Vec<(usize, f64)>>,
    rhs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: Status,
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    /// max |A x − b| at the reported x.
    pub max_residual: f64,
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_variable(&mut self, cost: f64, lower: f64, upper: f64) -> usize {
        self.cost.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.cost.len() - 1
    }

    /// Add Σ coeff·x = rhs. Repeated variables are summed.
    pub fn add_constraint(&mut self, coeffs: Vec<(usize, f64)>, rhs: f64) -> usize {
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(coeffs.len());
        for (j, a) in coeffs {
            match merged.iter_mut().find(|(k, _)| *k == j) {
                Some((_, v)) => *v += a,
                None => merged.push((j, a)),
            }
        }
        merged.retain(|(_, a)| *a != 0.0);
        self.rows.push(merged);
        self.rhs.push(rhs);
        self.rows.len() - 1
    }

    pub fn num_variables(&self) -> usize {
        self.cost.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, i: usize) -> (&[(usize, f64)], f64) {
        (&self.rows[i], self.rhs[i])
    }

    pub fn cost(&self, j: usize) -> f64 {
        self.cost[j]
    }

    pub fn bounds(&self, j: usize) -> (f64, f64) {
        (self.lower[j], self.upper[j])
    }

    pub fn residual(&self, x: &[f64]) -> f64 {
        self.rows
            .iter()
            .zip(&self.rhs)
            .map(|(row, b)| (row.iter().map(|(j, a)| a * x[*j]).sum::<f64>() - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.cost.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    pub fn solve(&self) -> Result<LpSolution, SimplexError> {
        let n = self.num_variables();
        for j in 0..n {
            if !self.lower[j].is_finite() {
                return Err(SimplexError::InfiniteLower(j));
            }
            if self.lower[j] > self.upper[j] {
                return Err(SimplexError::BadBounds(j, self.lower[j], self.upper[j]));
            }
        }
        for row in &self.rows {
            if let Some((j, _)) = row.iter().find(|(j, _)| *j >= n) {
                return Err(SimplexError::UnknownVariable(*j));
            }
        }
        if self.rows.is_empty() {
            if (0..n).any(|j| self.cost[j] < 0.0 && self.upper[j].is_infinite()) {
                let x = self.lower.clone();
                return Ok(LpSolution { status: Status::Unbounded, objective: f64::NEG_INFINITY, x, iterations: 0, max_residual: 0.0 });
            }
            let x: Vec<f64> = (0..n).map(|j| if self.cost[j] < 0.0 { self.upper[j] } else { self.lower[j] }).collect();
            return Ok(LpSolution { status: Status::Optimal, objective: self.objective(&x), x, iterations: 0, max_residual: 0.0 });
        }
        Tableau::new(self).run(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum State {
    Basic,
    AtLower,
    AtUpper,
}

/// Working state in shifted coordinates x' = x − l, so every variable lives
/// in [0, range].
struct Tableau {
    m: usize,
    n: usize,
    cols: Vec<Vec<(usize, f64)>>,
    range: Vec<f64>,
    b: Vec<f64>,
    basis: Vec<usize>,
    state: Vec<State>,
    binv: Vec<f64>,
    xb: Vec<f64>,
    iterations: usize,
    limit: usize,
    since_refactor: usize,
}

enum Phase {
    Done,
    Unbounded,
    Limit,
}

impl Tableau {
    fn new(lp: &LinearProgram) -> Self {
        let n = lp.num_variables();
        let m = lp.num_constraints();
        let mut b: Vec<f64> = lp.rhs.clone();
        for (i, row) in lp.rows.iter().enumerate() {
            for (j, a) in row {
                b[i] -= a * lp.lower[*j];
            }
        }
        let sign: Vec<f64> = b.iter().map(|v| if *v < 0.0 { -1.0 } else { 1.0 }).collect();
        let mut cols = vec![Vec::new(); n + m];
        for (i, row) in lp.rows.iter().enumerate() {
            for (j, a) in row {
                cols[*j].push((i, a * sign[i]));
            }
        }
        for (i, s) in sign.iter().enumerate() {
            b[i] *= s;
            cols[n + i].push((i, 1.0));
        }
        let mut range: Vec<f64> = (0..n).map(|j| lp.upper[j] - lp.lower[j]).collect();
        range.extend(std::iter::repeat(f64::INFINITY).take(m));
        let mut state = vec![State::AtLower; n + m];
        for s in state.iter_mut().skip(n) {
            *s = State::Basic;
        }
        let mut binv = vec![0.0; m * m];
        for i in 0..m {
            binv[i * m + i] = 1.0;
        }
        Self {
            m,
            n,
            cols,
            range,
            xb: b.clone(),
            b,
            basis: (n..n + m).collect(),
            state,
            binv,
            iterations: 0,
            limit: 10 * (n + m),
            since_refactor: 0,
        }
    }

    fn value(&self, j: usize) -> f64 {
        match self.state[j] {
            State::AtUpper => self.range[j],
            _ => 0.0,
        }
    }

    fn column(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let mut w = vec![0.0; m];
        for &(r, a) in &self.cols[j] {
            for (i, wi) in w.iter_mut().enumerate() {
                *wi += self.binv[i * m + r] * a;
            }
        }
        w
    }

    fn refactor(&mut self) -> Result<(), SimplexError> {
        let m = self.m;
        let mut a = vec![0.0; m * m];
        for (k, &j) in self.basis.iter().enumerate() {
            for &(r, v) in &self.cols[j] {
                a[r * m + k] = v;
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for c in 0..m {
            let p = (c..m)
                .max_by(|&x, &y| a[x * m + c].abs().total_cmp(&a[y * m + c].abs()).then(y.cmp(&x)))
                .expect("non-empty range");
            if a[p * m + c].abs() < 1e-12 {
                return Err(SimplexError::SingularBasis);
            }
            if p != c {
                for k in 0..m {
                    a.swap(p * m + k, c * m + k);
                    inv.swap(p * m + k, c * m + k);
                }
            }
            let d = a[c * m + c];
            for k in 0..m {
                a[c * m + k] /= d;
                inv[c * m + k] /= d;
            }
            for r in 0..m {
                if r == c {
                    continue;
                }
                let f = a[r * m + c];
                if f != 0.0 {
                    for k in 0..m {
                        a[r * m + k] -= f * a[c * m + k];
                        inv[r * m + k] -= f * inv[c * m + k];
                    }
                }
            }
        }
        self.binv = inv;
        self.recompute_xb();
        self.since_refactor = 0;
        Ok(())
    }

    fn recompute_xb(&mut self) {
        let m = self.m;
        let mut r = self.b.clone();
        for j in 0..self.n + self.m {
            if self.state[j] == State::AtUpper {
                for &(i, a) in &self.cols[j] {
                    r[i] -= a * self.range[j];
                }
            }
        }
        for i in 0..m {
            self.xb[i] = (0..m).map(|k| self.binv[i * m + k] * r[k]).sum();
        }
    }

    fn pivot(&mut self, r: usize, w: &[f64]) {
        let m = self.m;
        let pr = w[r];
        for k in 0..m {
            self.binv[r * m + k] /= pr;
        }
        for i in 0..m {
            if i == r || w[i] == 0.0 {
                continue;
            }
            let f = w[i];
            for k in 0..m {
                self.binv[i * m + k] -= f * self.binv[r * m + k];
            }
        }
    }

    fn iterate(&mut self, cost: &[f64]) -> Result<Phase, SimplexError> {
        let m = self.m;
        loop {
            if self.iterations >= self.limit {
                return Ok(Phase::Limit);
            }
            if self.since_refactor >= REFACTOR_INTERVAL {
                self.refactor()?;
            }
            let mut y = vec![0.0; m];
            for (i, &bj) in self.basis.iter().enumerate() {
                let cb = cost[bj];
                if cb != 0.0 {
                    for k in 0..m {
                        y[k] += cb * self.binv[i * m + k];
                    }
                }
            }
            let entering = (0..self.n + self.m).find_map(|j| {
                if self.state[j] == State::Basic || self.range[j] <= 0.0 {
                    return None;
                }
                let d = cost[j] - self.cols[j].iter().map(|&(i, a)| y[i] * a).sum::<f64>();
                match self.state[j] {
                    State::AtLower if d < -TOLERANCE => Some((j, 1.0)),
                    State::AtUpper if d > TOLERANCE => Some((j, -1.0)),
                    _ => None,
                }
            });
            let Some((j, sigma)) = entering else {
                return Ok(Phase::Done);
            };
            self.iterations += 1;

            let w = self.column(j);
            let mut best: Option<(f64, usize, usize, State)> = None;
            for i in 0..m {
                let delta = sigma * w[i];
                let bi = self.basis[i];
                let (theta, to) = if delta > TOLERANCE {
                    ((self.xb[i] / delta).max(0.0), State::AtLower)
                } else if delta < -TOLERANCE && self.range[bi].is_finite() {
                    (((self.range[bi] - self.xb[i]) / -delta).max(0.0), State::AtUpper)
                } else {
                    continue;
                };
                let better = match best {
                    None => true,
                    Some((t, _, b, _)) => theta < t || (theta == t && bi < b),
                };
                if better {
                    best = Some((theta, i, bi, to));
                }
            }

            let flip = self.range[j];
            match best {
                Some((theta, _, _, _)) if flip <= theta => self.bound_flip(j, sigma, &w),
                None if flip.is_finite() => self.bound_flip(j, sigma, &w),
                None => return Ok(Phase::Unbounded),
                Some((theta, r, leaving, to)) => {
                    for i in 0..m {
                        self.xb[i] -= sigma * theta * w[i];
                    }
                    let entering_value = if sigma > 0.0 { theta } else { self.range[j] - theta };
                    self.pivot(r, &w);
                    self.state[leaving] = to;
                    self.state[j] = State::Basic;
                    self.basis[r] = j;
                    self.xb[r] = entering_value;
                    self.since_refactor += 1;
                }
            }
        }
    }

    fn bound_flip(&mut self, j: usize, sigma: f64, w: &[f64]) {
        let step = self.range[j];
        for (x, wi) in self.xb.iter_mut().zip(w) {
            *x -= sigma * step * wi;
        }
        self.state[j] = if sigma > 0.0 { State::AtUpper } else { State::AtLower };
    }

    /// Pivot basic artificials out where some structural column allows it.
    fn expel_artificials(&mut self) {
        let m = self.m;
        for r in 0..m {
            if self.basis[r] < self.n {
                continue;
            }
            let candidate = (0..self.n).find(|&j| {
                self.state[j] != State::Basic && self.range[j] > 0.0 && {
                    let v: f64 = self.cols[j].iter().map(|&(i, a)| self.binv[r * m + i] * a).sum();
                    v.abs() > 1e-7
                }
            });
            if let Some(j) = candidate {
                let w = self.column(j);
                let leaving = self.basis[r];
                let value = self.value(j);
                self.pivot(r, &w);
                self.state[leaving] = State::AtLower;
                self.state[j] = State::Basic;
                self.basis[r] = j;
                self.xb[r] = value;
                self.since_refactor += 1;
            }
        }
    }

    fn run(mut self, lp: &LinearProgram) -> Result<LpSolution, SimplexError> {
        let (n, m) = (self.n, self.m);
        let mut phase1 = vec![0.0; n + m];
        for c in phase1.iter_mut().skip(n) {
            *c = 1.0;
        }
        let scale = 1.0 + self.b.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let outcome = self.iterate(&phase1)?;
        self.refactor()?;
        let infeasibility: f64 = (0..m).filter(|&i| self.basis[i] >= n).map(|i| self.xb[i].max(0.0)).sum();
        let finish = |t: &Tableau, status: Status| {
            let x: Vec<f64> = (0..n)
                .map(|j| {
                    let v = match t.state[j] {
                        State::Basic => t.xb[t.basis.iter().position(|&b| b == j).expect("basic var in basis")],
                        _ => t.value(j),
                    };
                    lp.lower[j] + v
                })
                .collect();
            LpSolution {
                status,
                objective: lp.objective(&x),
                max_residual: lp.residual(&x),
                iterations: t.iterations,
                x,
            }
        };
        if matches!(outcome, Phase::Limit) {
            return Ok(finish(&self, Status::IterationLimit));
        }
        if infeasibility > TOLERANCE * scale {
            return Ok(finish(&self, Status::Infeasible));
        }

        self.expel_artificials();
        for j in n..n + m {
            self.range[j] = 0.0;
        }
        self.refactor()?;
        let mut phase2 = lp.cost.clone();
        phase2.extend(std::iter::repeat(0.0).take(m));
        let status = match self.iterate(&phase2)? {
            Phase::Done => Status::Optimal,
            Phase::Unbounded => Status::Unbounded,
            Phase::Limit => Status::IterationLimit,
        };
        self.refactor()?;
        Ok(finish(&self, status))
    }
}
