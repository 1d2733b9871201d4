//! Test functions for the martingale problem. A function belongs to the
//! transmission class for weight `lambda` when
//! `lambda * f'(0+) = (1 - lambda) * f'(0-)`; membership is what decides
//! whether the compensated process is a martingale for a given interface.

type ScalarFn = Box<dyn Fn(f64) -> f64 + Send + Sync>;

/// Piecewise-C2 function with one-sided first derivatives recorded at the
/// interface. `second` evaluates the one-sided second derivative, taking the
/// minus branch at exactly 0 to match the path-functional convention
/// `sgn(0) = -1`.
pub struct TestFunction {
    name: String,
    f: ScalarFn,
    second: ScalarFn,
    d1_minus: f64,
    d1_plus: f64,
}

impl TestFunction {
    pub fn new(
        name: impl Into<String>,
        f: ScalarFn,
        second: ScalarFn,
        d1_minus: f64,
        d1_plus: f64,
    ) -> Self {
        TestFunction {
            name: name.into(),
            f,
            second,
            d1_minus,
            d1_plus,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn value(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    pub fn second(&self, x: f64) -> f64 {
        (self.second)(x)
    }

    pub fn d1_minus(&self) -> f64 {
        self.d1_minus
    }

    pub fn d1_plus(&self) -> f64 {
        self.d1_plus
    }

    /// Transmission-class membership for weight `lambda`, relative tolerance
    /// against the larger one-sided slope.
    pub fn in_transmission_class(&self, lambda: f64, tol: f64) -> bool {
        let lhs = lambda * self.d1_plus;
        let rhs = (1.0 - lambda) * self.d1_minus;
        let scale = self.d1_minus.abs().max(self.d1_plus.abs()).max(1e-300);
        (lhs - rhs).abs() <= tol * scale
    }

    /// Constant function; belongs to every transmission class.
    pub fn constant(c: f64) -> Self {
        TestFunction::new(
            format!("constant[{c}]"),
            Box::new(move |_| c),
            Box::new(|_| 0.0),
            0.0,
            0.0,
        )
    }

    /// Kink with independent one-sided slopes, `f(0) = 0`.
    pub fn piecewise_linear(slope_minus: f64, slope_plus: f64) -> Self {
        TestFunction::new(
            format!("linear[{slope_minus},{slope_plus}]"),
            Box::new(move |x| if x <= 0.0 { slope_minus * x } else { slope_plus * x }),
            Box::new(|_| 0.0),
            slope_minus,
            slope_plus,
        )
    }

    /// Linear member of the transmission class for `lambda`: slopes
    /// `(lambda, 1 - lambda)`.
    pub fn transmission_linear(lambda: f64) -> Self {
        let mut f = TestFunction::piecewise_linear(lambda, 1.0 - lambda);
        f.name = format!("transmission-linear[{lambda}]");
        f
    }

    /// Transmission-class member with curvature on both sides:
    /// `lambda x + q_minus x^2` left, `(1 - lambda) x + q_plus x^2` right.
    pub fn transmission_quadratic(lambda: f64, q_minus: f64, q_plus: f64) -> Self {
        TestFunction::new(
            format!("transmission-quadratic[{lambda},{q_minus},{q_plus}]"),
            Box::new(move |x| {
                if x <= 0.0 {
                    lambda * x + q_minus * x * x
                } else {
                    (1.0 - lambda) * x + q_plus * x * x
                }
            }),
            Box::new(move |x| if x <= 0.0 { 2.0 * q_minus } else { 2.0 * q_plus }),
            lambda,
            1.0 - lambda,
        )
    }

    /// Smooth bump `exp(-(x - center)^2 / (2 width^2))`; belongs to the
    /// class for `lambda = 1/2` only (equal one-sided slopes).
    pub fn gaussian(center: f64, width: f64) -> Self {
        assert!(width > 0.0, "gaussian width must be positive");
        let g = move |x: f64| {
            let z = (x - center) / width;
            (-0.5 * z * z).exp()
        };
        let d1 = move |x: f64| -((x - center) / (width * width)) * g(x);
        let d2 = move |x: f64| {
            let z = (x - center) / width;
            (z * z - 1.0) / (width * width) * g(x)
        };
        let slope0 = d1(0.0);
        TestFunction::new(
            format!("gaussian[{center},{width}]"),
            Box::new(g),
            Box::new(d2),
            slope0,
            slope0,
        )
    }
}

impl std::fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TestFunction")
            .field("name", &self.name)
            .field("d1_minus", &self.d1_minus)
            .field("d1_plus", &self.d1_plus)
            .finish()
    }
}
