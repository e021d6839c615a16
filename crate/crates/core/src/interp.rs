//! Monotone cubic Hermite interpolation (Fritsch-Carlson).
//!
//! Used in two places: inverting the strictly increasing background shear
//! U(y) to get y as a function of the shear coordinate z, and evaluating
//! tabulated viscosity profiles between samples. Monotone data produces a
//! monotone interpolant, so the inverse map never folds back, and positive
//! viscosity samples never undershoot through zero.
//!
//! Node slopes follow the classic recipe: a weighted harmonic mean of the
//! adjacent secants in the interior (zero at local extrema), and a clamped
//! three-point estimate at the ends. Queries outside the node range clamp to
//! the end values, i.e. the interpolant extends as a constant.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub(crate) struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl Pchip {
    /// Build the interpolant from strictly increasing abscissae.
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::LengthMismatch {
                context: "pchip nodes",
                left: x.len(),
                right: y.len(),
            });
        }
        if x.len() < 2 {
            return Err(Error::TooFewPoints {
                context: "pchip nodes",
                needed: 2,
                got: x.len(),
            });
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config(
                "pchip abscissae must be strictly increasing".into(),
            ));
        }

        let n = x.len();
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();

        let mut d = vec![0.0; n];
        if n == 2 {
            d[0] = delta[0];
            d[1] = delta[0];
        } else {
            for i in 1..n - 1 {
                if delta[i - 1] * delta[i] <= 0.0 {
                    d[i] = 0.0;
                } else {
                    let w1 = 2.0 * h[i] + h[i - 1];
                    let w2 = h[i] + 2.0 * h[i - 1];
                    d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
                }
            }
            d[0] = edge_slope(h[0], h[1], delta[0], delta[1]);
            d[n - 1] = edge_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        }

        Ok(Pchip { x, y, d })
    }

    fn segment(&self, xq: f64) -> usize {
        // Index i with x[i] <= xq < x[i+1], clamped into range.
        let pos = self.x.partition_point(|&v| v <= xq);
        pos.clamp(1, self.x.len() - 1) - 1
    }

    /// Interpolated value; constant beyond the node range.
    pub fn eval(&self, xq: f64) -> f64 {
        let n = self.x.len();
        if xq <= self.x[0] {
            return self.y[0];
        }
        if xq >= self.x[n - 1] {
            return self.y[n - 1];
        }
        let i = self.segment(xq);
        let h = self.x[i + 1] - self.x[i];
        let t = (xq - self.x[i]) / h;
        let (t2, t3) = (t * t, t * t * t);
        self.y[i] * (2.0 * t3 - 3.0 * t2 + 1.0)
            + h * self.d[i] * (t3 - 2.0 * t2 + t)
            + self.y[i + 1] * (-2.0 * t3 + 3.0 * t2)
            + h * self.d[i + 1] * (t3 - t2)
    }

    /// First derivative; zero beyond the node range.
    pub fn eval_deriv(&self, xq: f64) -> f64 {
        let n = self.x.len();
        if xq <= self.x[0] || xq >= self.x[n - 1] {
            return 0.0;
        }
        let i = self.segment(xq);
        let h = self.x[i + 1] - self.x[i];
        let t = (xq - self.x[i]) / h;
        let t2 = t * t;
        (self.y[i] * (6.0 * t2 - 6.0 * t) / h)
            + self.d[i] * (3.0 * t2 - 4.0 * t + 1.0)
            + (self.y[i + 1] * (-6.0 * t2 + 6.0 * t) / h)
            + self.d[i + 1] * (3.0 * t2 - 2.0 * t)
    }

    /// Second derivative of the piecewise cubic; zero beyond the node range.
    /// The interpolant is only C^1, so this jumps at interior nodes.
    pub fn eval_second_deriv(&self, xq: f64) -> f64 {
        let n = self.x.len();
        if xq <= self.x[0] || xq >= self.x[n - 1] {
            return 0.0;
        }
        let i = self.segment(xq);
        let h = self.x[i + 1] - self.x[i];
        let t = (xq - self.x[i]) / h;
        (self.y[i] * (12.0 * t - 6.0) / (h * h))
            + self.d[i] * (6.0 * t - 4.0) / h
            + (self.y[i + 1] * (-12.0 * t + 6.0) / (h * h))
            + self.d[i + 1] * (6.0 * t - 2.0) / h
    }

    /// Node range covered by the interpolant.
    pub fn range(&self) -> (f64, f64) {
        (self.x[0], *self.x.last().unwrap())
    }
}

/// Non-centered three-point slope estimate, clamped for shape preservation.
/// `h0`/`delta0` belong to the interval adjacent to the boundary node.
fn edge_slope(h0: f64, h1: f64, delta0: f64, delta1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * delta0 - h0 * delta1) / (h0 + h1);
    if d * delta0 <= 0.0 {
        0.0
    } else if delta0 * delta1 < 0.0 && d.abs() > 3.0 * delta0.abs() {
        3.0 * delta0
    } else {
        d
    }
}
