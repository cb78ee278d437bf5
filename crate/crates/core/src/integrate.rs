//! One-dimensional quadrature on finite and semi-infinite ranges, built on
//! tanh-sinh (double exponential) rules.

use quadrature::double_exponential;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error_estimate: f64,
}

impl std::ops::Add for Integral {
    type Output = Integral;

    fn add(self, rhs: Integral) -> Integral {
        Integral {
            value: self.value + rhs.value,
            error_estimate: self.error_estimate + rhs.error_estimate,
        }
    }
}

/// `int_a^b f` split into `panels` equal pieces.
pub fn finite(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize, tol: f64) -> Integral {
    let panels = panels.max(1);
    let width = (b - a) / panels as f64;
    let per_panel = tol / panels as f64;
    (0..panels)
        .map(|i| {
            let lo = a + i as f64 * width;
            let hi = if i + 1 == panels { b } else { lo + width };
            let out = double_exponential::integrate(&f, lo, hi, per_panel);
            Integral {
                value: out.integral,
                error_estimate: out.error_estimate,
            }
        })
        .fold(
            Integral {
                value: 0.0,
                error_estimate: 0.0,
            },
            |acc, x| acc + x,
        )
}

/// `int_y^inf f(t) dt` for an integrand decaying like `t^(-decay)`.
///
/// The substitution `t = y * u^(-p)` with `p = 1 / (decay - 1)` maps the
/// range onto `(0, 1]` and turns the power-law tail into a bounded integrand.
pub fn upper_tail(f: impl Fn(f64) -> f64, y: f64, decay: f64, tol: f64) -> Result<Integral> {
    if !(y > 0.0) || !y.is_finite() {
        return Err(Error::domain(format!("tail integral needs a finite lower limit > 0, got {y}")));
    }
    if !(decay > 1.0) {
        return Err(Error::domain(format!(
            "integrand decaying like t^-{decay} is not integrable at infinity"
        )));
    }
    let p = 1.0 / (decay - 1.0);
    let g = |u: f64| {
        if u <= 0.0 {
            return 0.0;
        }
        let t = y * u.powf(-p);
        if !t.is_finite() {
            return 0.0;
        }
        f(t) * p * t / u
    };
    Ok(finite(g, 0.0, 1.0, 4, tol))
}

/// `int_y^inf f(t) dt` for any `y >= 0`: the piece below `1` is integrated
/// directly and the rest through [`upper_tail`].
pub fn from(f: impl Fn(f64) -> f64, y: f64, decay: f64, tol: f64) -> Result<Integral> {
    if !(y >= 0.0) {
        return Err(Error::domain(format!("lower limit must be >= 0, got {y}")));
    }
    if y >= 1.0 {
        return upper_tail(f, y, decay, tol);
    }
    let head = finite(&f, y, 1.0, 4, tol / 2.0);
    Ok(head + upper_tail(&f, 1.0, decay, tol / 2.0)?)
}
