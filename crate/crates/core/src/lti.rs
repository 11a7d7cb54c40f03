//! Continuous-time LTI systems: transfer functions, controllable-canonical
//! state-space realizations, and fixed-step time integration.
//!
//! Plants are expressed as ratios of polynomials in the Laplace variable and
//! realized in state-space form for simulation. Integration is classical RK4
//! under zero-order-hold input, sub-stepped so the internal step never
//! exceeds 1 ms regardless of the control-loop period.

pub use num_complex::Complex64;
use thiserror::Error;

/// Largest internal integration step, in seconds. Control steps larger than
/// this are split so the fast servo pole at -10 rad/s stays well resolved.
pub const MAX_INTEGRATION_STEP: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum LtiError {
    #[error("denominator must be non-empty with a nonzero leading coefficient")]
    DegenerateDenominator,
    #[error("numerator must be non-empty")]
    EmptyNumerator,
    #[error("numerator degree {num_degree} exceeds denominator degree {den_degree}")]
    ImproperSystem {
        num_degree: usize,
        den_degree: usize,
    },
    #[error("transfer function evaluated at a pole: s = {0}")]
    EvaluationAtPole(Complex64),
    #[error("state integration diverged at t = {time} s")]
    Diverged { time: f64 },
}

/// Ratio of two real polynomials in `s`, coefficients highest power first.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferFunction {
    num: Vec<f64>,
    den: Vec<f64>,
}

impl TransferFunction {
    /// Builds a proper transfer function. Leading zero coefficients of the
    /// numerator are trimmed; the denominator's leading coefficient must be
    /// nonzero and the trimmed numerator degree must not exceed the
    /// denominator degree.
    pub fn new(num: Vec<f64>, den: Vec<f64>) -> Result<Self, LtiError> {
        if num.is_empty() {
            return Err(LtiError::EmptyNumerator);
        }
        if den.is_empty() || den[0] == 0.0 || !den.iter().all(|c| c.is_finite()) {
            return Err(LtiError::DegenerateDenominator);
        }
        if !num.iter().all(|c| c.is_finite()) {
            return Err(LtiError::EmptyNumerator);
        }
        let leading = num.iter().position(|&c| c != 0.0).unwrap_or(num.len() - 1);
        let num: Vec<f64> = num[leading..].to_vec();
        if num.len() > den.len() {
            return Err(LtiError::ImproperSystem {
                num_degree: num.len() - 1,
                den_degree: den.len() - 1,
            });
        }
        Ok(Self { num, den })
    }

    pub fn numerator(&self) -> &[f64] {
        &self.num
    }

    pub fn denominator(&self) -> &[f64] {
        &self.den
    }

    /// System order = denominator degree.
    pub fn order(&self) -> usize {
        self.den.len() - 1
    }

    /// Evaluates num(s)/den(s) at a complex frequency.
    pub fn evaluate(&self, s: Complex64) -> Result<Complex64, LtiError> {
        let den = polyval(&self.den, s);
        if den.norm() == 0.0 {
            return Err(LtiError::EvaluationAtPole(s));
        }
        Ok(polyval(&self.num, s) / den)
    }

    /// Controllable canonical realization with zero initial state.
    pub fn to_state_space(&self) -> StateSpaceModel {
        StateSpaceModel::from_transfer_function(self)
    }
}

fn polyval(coeffs: &[f64], s: Complex64) -> Complex64 {
    coeffs
        .iter()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * s + c)
}

/// Single-input single-output state-space model `x' = Ax + Bu`,
/// `y = Cx + Du`, carrying its own integration state.
#[derive(Debug, Clone)]
pub struct StateSpaceModel {
    a: Vec<f64>, // n x n, row major
    b: Vec<f64>, // n
    c: Vec<f64>, // n
    d: f64,
    state: Vec<f64>,
    elapsed: f64,
    n: usize,
}

impl StateSpaceModel {
    fn from_transfer_function(tf: &TransferFunction) -> Self {
        let n = tf.order();
        let norm = tf.den[0];
        let den: Vec<f64> = tf.den.iter().map(|c| c / norm).collect();
        let mut num = vec![0.0; den.len() - tf.num.len()];
        num.extend(tf.num.iter().map(|c| c / norm));

        let d = num[0];
        let mut a = vec![0.0; n * n];
        for j in 0..n {
            a[j] = -den[j + 1];
        }
        for i in 1..n {
            a[i * n + i - 1] = 1.0;
        }
        let mut b = vec![0.0; n];
        if n > 0 {
            b[0] = 1.0;
        }
        let c: Vec<f64> = (0..n).map(|j| num[j + 1] - d * den[j + 1]).collect();

        Self {
            a,
            b,
            c,
            d,
            state: vec![0.0; n],
            elapsed: 0.0,
            n,
        }
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }

    /// Time integrated so far, in seconds.
    pub fn elapsed(&self) -> f64 {
        self.elapsed
    }

    /// Returns the state (and clock) to the zero initial condition.
    pub fn reset(&mut self) {
        self.state.iter_mut().for_each(|x| *x = 0.0);
        self.elapsed = 0.0;
    }

    /// Output y = Cx + Du for the current state.
    pub fn output(&self, input: f64) -> f64 {
        dot(&self.c, &self.state) + self.d * input
    }

    /// Output rate dy/dt = C(Ax + Bu), valid for strictly proper systems
    /// under piecewise-constant input. Used by the rate-gyro feedback path.
    pub fn derivative_output(&self, input: f64) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.n {
            let mut xi_dot = self.b[i] * input;
            for j in 0..self.n {
                xi_dot += self.a[i * self.n + j] * self.state[j];
            }
            acc += self.c[i] * xi_dot;
        }
        acc
    }

    /// Advances the state by `dt` seconds under zero-order-hold `input`
    /// using RK4 sub-steps of at most [`MAX_INTEGRATION_STEP`]. Returns the
    /// output after the step.
    pub fn step(&mut self, input: f64, dt: f64) -> Result<f64, LtiError> {
        assert!(dt > 0.0, "integration step must be positive");
        if self.n == 0 {
            self.elapsed += dt;
            return Ok(self.d * input);
        }
        let substeps = (dt / MAX_INTEGRATION_STEP).ceil().max(1.0) as usize;
        let h = dt / substeps as f64;

        let n = self.n;
        let mut k1 = vec![0.0; n];
        let mut k2 = vec![0.0; n];
        let mut k3 = vec![0.0; n];
        let mut k4 = vec![0.0; n];
        let mut tmp = vec![0.0; n];

        for _ in 0..substeps {
            deriv(&self.a, &self.b, n, &self.state, input, &mut k1);
            axpy(&self.state, h / 2.0, &k1, &mut tmp);
            deriv(&self.a, &self.b, n, &tmp, input, &mut k2);
            axpy(&self.state, h / 2.0, &k2, &mut tmp);
            deriv(&self.a, &self.b, n, &tmp, input, &mut k3);
            axpy(&self.state, h, &k3, &mut tmp);
            deriv(&self.a, &self.b, n, &tmp, input, &mut k4);
            for i in 0..n {
                self.state[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            self.elapsed += h;
            if !self.state.iter().all(|x| x.is_finite()) {
                return Err(LtiError::Diverged { time: self.elapsed });
            }
        }
        Ok(self.output(input))
    }

    /// Transfer function of the realization at `s`: C(sI - A)^-1 B + D,
    /// computed by a dense complex solve.
    pub fn frequency_response(&self, s: Complex64) -> Complex64 {
        let n = self.n;
        if n == 0 {
            return Complex64::new(self.d, 0.0);
        }
        // Assemble (sI - A) | B and eliminate with partial pivoting.
        let mut m = vec![Complex64::new(0.0, 0.0); n * n];
        let mut rhs: Vec<Complex64> = self.b.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        for i in 0..n {
            for j in 0..n {
                m[i * n + j] = -Complex64::new(self.a[i * n + j], 0.0);
            }
            m[i * n + i] += s;
        }
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&r1, &r2| {
                    m[r1 * n + col]
                        .norm()
                        .partial_cmp(&m[r2 * n + col].norm())
                        .unwrap()
                })
                .unwrap();
            if pivot != col {
                for j in 0..n {
                    m.swap(col * n + j, pivot * n + j);
                }
                rhs.swap(col, pivot);
            }
            let diag = m[col * n + col];
            for row in col + 1..n {
                let factor = m[row * n + col] / diag;
                for j in col..n {
                    let v = m[col * n + j];
                    m[row * n + j] -= factor * v;
                }
                let r = rhs[col];
                rhs[row] -= factor * r;
            }
        }
        let mut x = vec![Complex64::new(0.0, 0.0); n];
        for row in (0..n).rev() {
            let mut acc = rhs[row];
            for j in row + 1..n {
                acc -= m[row * n + j] * x[j];
            }
            x[row] = acc / m[row * n + row];
        }
        let mut y = Complex64::new(self.d, 0.0);
        for (&ci, &xi) in self.c.iter().zip(&x) {
            y += Complex64::new(ci, 0.0) * xi;
        }
        y
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn deriv(a: &[f64], b: &[f64], n: usize, state: &[f64], input: f64, out: &mut [f64]) {
    for i in 0..n {
        let mut acc = b[i] * input;
        for j in 0..n {
            acc += a[i * n + j] * state[j];
        }
        out[i] = acc;
    }
}

fn axpy(x: &[f64], alpha: f64, dx: &[f64], out: &mut [f64]) {
    for ((o, &xi), &di) in out.iter_mut().zip(x).zip(dx) {
        *o = xi + alpha * di;
    }
}

/// Fixed plant models for the Boeing 747-400 pitch loop.
pub struct PlantCatalog;

impl PlantCatalog {
    /// Pitch angle over elevator deflection, 4th order.
    pub fn pitch_747() -> TransferFunction {
        TransferFunction::new(
            vec![-1.69144, -0.84341, -0.0099096],
            vec![1.0, 1.17103, 1.55405, 0.012538, 0.0072771],
        )
        .expect("catalog constant")
    }

    /// First-order elevator servo, 10/(s + 10).
    pub fn servo_747() -> TransferFunction {
        TransferFunction::new(vec![10.0], vec![1.0, 10.0]).expect("catalog constant")
    }

    /// Short-period approximation with a free integrator from elevator to
    /// pitch angle.
    pub fn short_period() -> TransferFunction {
        TransferFunction::new(vec![11.7304, 22.578], vec![1.0, 4.9676, 12.941, 0.0])
            .expect("catalog constant")
    }

    pub fn names() -> &'static [&'static str] {
        &["pitch_747", "servo_747", "short_period"]
    }

    pub fn by_name(name: &str) -> Option<TransferFunction> {
        match name {
            "pitch_747" => Some(Self::pitch_747()),
            "servo_747" => Some(Self::servo_747()),
            "short_period" => Some(Self::short_period()),
            _ => None,
        }
    }
}
