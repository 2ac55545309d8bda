// SPDX-License-Identifier: Apache-2.0

//! Monotone piecewise-cubic Hermite interpolation with flat extrapolation.

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

fn same_sign(a: f64, b: f64) -> bool {
    (a > 0.0 && b > 0.0) || (a < 0.0 && b < 0.0)
}

fn end_slope(h0: f64, h1: f64, s0: f64, s1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * s0 - h0 * s1) / (h0 + h1);
    if !same_sign(d, s0) {
        0.0
    } else if !same_sign(s0, s1) && d.abs() > 3.0 * s0.abs() {
        3.0 * s0
    } else {
        d
    }
}

impl Pchip {
    pub fn new(x: &[f64], y: &[f64]) -> Self {
        let n = x.len();
        let mut d = vec![0.0; n];
        if n >= 2 {
            let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
            let s: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
            if n == 2 {
                d[0] = s[0];
                d[1] = s[0];
            } else {
                for k in 1..n - 1 {
                    if same_sign(s[k - 1], s[k]) {
                        let w1 = 2.0 * h[k] + h[k - 1];
                        let w2 = h[k] + 2.0 * h[k - 1];
                        d[k] = (w1 + w2) / (w1 / s[k - 1] + w2 / s[k]);
                    }
                }
                d[0] = end_slope(h[0], h[1], s[0], s[1]);
                d[n - 1] = end_slope(h[n - 2], h[n - 3], s[n - 2], s[n - 3]);
            }
        }
        Self {
            x: x.to_vec(),
            y: y.to_vec(),
            d,
        }
    }

    /// Value at `t`; constant beyond either end. Knots within a relative
    /// `1e-12` of `t` return their stored value exactly.
    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        let (lo, hi) = (self.x[0], self.x[n - 1]);
        if t <= lo {
            return self.y[0];
        }
        if t >= hi {
            return self.y[n - 1];
        }
        let k = self.x.partition_point(|v| *v <= t) - 1;
        let eps = 1e-12 * hi.abs().max(1.0);
        if (t - self.x[k]).abs() <= eps {
            return self.y[k];
        }
        if (self.x[k + 1] - t).abs() <= eps {
            return self.y[k + 1];
        }
        let h = self.x[k + 1] - self.x[k];
        let s = (t - self.x[k]) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.y[k] + h10 * h * self.d[k] + h01 * self.y[k + 1] + h11 * h * self.d[k + 1]
    }
}
