//! Haldane filling factors and the equilibria they induce.
//!
//! Equilibria solve `y / F(y) = exp((μ − |v − u|²)/T)`. The inversion is
//! carried out in the logistic variable `t = ln(y / (1 − αy))`, where
//! `d ln(y/F)/dt` lies in `[α, 1]`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field::DistributionField;
use crate::grid::PhaseGrid;

/// Slack allowed on `[0, 1/α]` before an argument is rejected.
pub const DOMAIN_TOL: f64 = 1e-12;

const TINY: f64 = 1e-300;

/// Exclusion parameter and optional regularization level.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatisticsParam {
    alpha: f64,
    j_level: Option<f64>,
}

impl StatisticsParam {
    pub fn new(alpha: f64, j_level: Option<f64>) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(invalid("alpha", format!("{alpha} not in (0, 1]")));
        }
        if let Some(j) = j_level {
            if !(j >= 1.0 && j.is_finite()) {
                return Err(invalid("j_level", format!("{j} must be >= 1")));
            }
        }
        Ok(Self { alpha, j_level })
    }

    /// Exact statistics, no regularization.
    pub fn exact(alpha: f64) -> Result<Self> {
        Self::new(alpha, None)
    }

    pub fn regularized(alpha: f64, j_level: f64) -> Result<Self> {
        Self::new(alpha, Some(j_level))
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn j_level(&self) -> Option<f64> {
        self.j_level
    }

    pub fn ceiling(&self) -> f64 {
        1.0 / self.alpha
    }

    pub fn with_j_level(&self, j_level: Option<f64>) -> Result<Self> {
        Self::new(self.alpha, j_level)
    }

    fn inv_j(&self) -> f64 {
        self.j_level.map_or(0.0, |j| 1.0 / j)
    }

    /// Validates and clamps an occupation into `[0, 1/α]`.
    pub fn clamp_occupation(&self, y: f64) -> Result<f64> {
        let top = self.ceiling();
        if !y.is_finite() || y < -DOMAIN_TOL || y > top + DOMAIN_TOL {
            return Err(Error::OutOfRange {
                value: y,
                ceiling: top,
            });
        }
        Ok(y.clamp(0.0, top))
    }

    /// The filling factor in use: `F_j` when a level is set, else `F_α`.
    /// The argument must already lie in `[0, 1/α]`.
    #[inline]
    pub fn factor(&self, y: f64) -> f64 {
        raw_factor(self.alpha, self.inv_j(), y)
    }

    /// `F(y) / (1 − αy)`, set to 0 at saturation.
    #[inline]
    pub fn residual(&self, y: f64) -> f64 {
        let a = self.alpha;
        let rest = 1.0 - a * y;
        if rest <= 0.0 {
            return 0.0;
        }
        if a == 1.0 {
            return 1.0;
        }
        let num = 1.0 + (1.0 - a) * y;
        let den = self.inv_j() + rest;
        ((1.0 - a) * (num / den).ln()).exp()
    }

    /// `ln(y / F(y))`; `-inf` at 0 and `+inf` at saturation.
    pub fn log_ratio(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let rest = 1.0 - self.alpha * y;
        if rest <= 0.0 {
            return f64::INFINITY;
        }
        y.ln() - rest.ln() - self.residual(y).ln()
    }

    /// Log-ratio as a function of the logistic variable, with its derivative.
    #[inline]
    fn log_ratio_t(&self, t: f64) -> (f64, f64, f64) {
        let (y, rest) = logistic(self.alpha, t);
        let a = self.alpha;
        if a == 1.0 {
            return (t, 1.0, y);
        }
        let eps = self.inv_j();
        let num = 1.0 + (1.0 - a) * y;
        // ln(ε + 1 − αy) and (1 − αy)/(ε + 1 − αy), safe when 1 − αy underflows
        let (ln_den, frac) = if eps == 0.0 {
            (ln_rest(a, t), 1.0)
        } else {
            let den = eps + rest;
            (den.ln(), rest / den)
        };
        let g = t - (1.0 - a) * (num.ln() - ln_den);
        let d = 1.0 - y * (1.0 - a) * ((1.0 - a) * rest / num + a * frac);
        (g, d, y)
    }

    fn log_ratio_at_half(&self) -> f64 {
        self.log_ratio_t(0.0).0
    }

    /// Solves `ln(y/F(y)) = eta` by bisection to width 1e-8 followed by
    /// Newton polish, at most 200 steps in total.
    pub fn invert_log_ratio(&self, eta: f64) -> Result<f64> {
        if eta == f64::NEG_INFINITY {
            return Ok(0.0);
        }
        if eta == f64::INFINITY {
            return Ok(self.ceiling());
        }
        if !eta.is_finite() {
            return Err(Error::RootNotFound {
                iterations: 0,
                target: eta,
            });
        }
        let s = eta - self.log_ratio_at_half();
        let (mut lo, mut hi) = if s >= 0.0 { (s, s / self.alpha) } else { (s / self.alpha, s) };
        // widen by a few ulps so the root is strictly inside
        lo -= 1e-12 * (1.0 + lo.abs());
        hi += 1e-12 * (1.0 + hi.abs());
        let max_steps = 200;
        let mut steps = 0;
        while steps < max_steps {
            let (ylo, _) = logistic(self.alpha, lo);
            let (yhi, _) = logistic(self.alpha, hi);
            if yhi - ylo <= 1e-8 * (1.0 + ylo.abs()) && hi - lo <= 1e-8 * (1.0 + lo.abs()).max(1.0) {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if self.log_ratio_t(mid).0 < eta {
                lo = mid;
            } else {
                hi = mid;
            }
            steps += 1;
        }
        let mut t = 0.5 * (lo + hi);
        while steps < max_steps {
            let (g, d, _) = self.log_ratio_t(t);
            let r = g - eta;
            if r == 0.0 {
                break;
            }
            let next = t - r / d;
            let next = if next >= lo && next <= hi { next } else { 0.5 * (lo + hi) };
            let done = (next - t).abs() <= 1e-15 * (1.0 + t.abs());
            t = next;
            steps += 1;
            if done {
                break;
            }
        }
        let (g, _, y) = self.log_ratio_t(t);
        if logistic(self.alpha, t).1 == 0.0 {
            // the distance to saturation underflows
            return Ok(y);
        }
        if (g - eta).abs() <= 1e-12 * (1.0 + eta.abs()) {
            Ok(y)
        } else {
            Err(Error::RootNotFound {
                iterations: steps,
                target: eta,
            })
        }
    }

    /// Fast inversion used inside the collision loop: safeguarded Newton
    /// on the same bracket. Returns `(y, F(y))`.
    #[inline]
    pub(crate) fn invert_fast(&self, eta: f64) -> (f64, f64) {
        if self.alpha == 1.0 {
            let (y, rest) = logistic(1.0, eta);
            return (y, rest);
        }
        let s = eta - self.log_ratio_at_half();
        let (mut lo, mut hi) = if s >= 0.0 { (s, s / self.alpha) } else { (s / self.alpha, s) };
        let mut t = 0.5 * (lo + hi);
        for _ in 0..100 {
            let (g, d, _) = self.log_ratio_t(t);
            let r = g - eta;
            if r == 0.0 {
                break;
            }
            if r < 0.0 {
                lo = t;
            } else {
                hi = t;
            }
            let mut next = t - r / d;
            if !(next >= lo && next <= hi) {
                next = 0.5 * (lo + hi);
            }
            let done = (next - t).abs() <= 1e-15 * (1.0 + t.abs());
            t = next;
            if done {
                break;
            }
        }
        let (y, _) = logistic(self.alpha, t);
        // F = y exp(-eta) keeps y/F consistent with the target
        (y, y * (-eta).exp())
    }
}

/// `ln(1 − αy)` from the logistic variable.
#[inline]
fn ln_rest(alpha: f64, t: f64) -> f64 {
    if t > 0.0 {
        -t - ((-t).exp() + alpha).ln()
    } else {
        -(alpha * t.exp()).ln_1p()
    }
}

/// `y` and `1 − αy` from the logistic variable, without cancellation.
#[inline]
fn logistic(alpha: f64, t: f64) -> (f64, f64) {
    if t > 0.0 {
        let e = (-t).exp();
        let d = e + alpha;
        (1.0 / d, e / d)
    } else {
        let e = t.exp();
        let d = 1.0 + alpha * e;
        (e / d, 1.0 / d)
    }
}

#[inline]
fn guarded_pow(base: f64, exponent: f64) -> f64 {
    if base <= TINY {
        if exponent > 0.0 {
            0.0
        } else if exponent == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        (exponent * base.ln()).exp()
    }
}

#[inline]
fn raw_factor(alpha: f64, inv_j: f64, y: f64) -> f64 {
    let rest = 1.0 - alpha * y;
    if rest <= 0.0 {
        return 0.0;
    }
    if alpha == 1.0 {
        return rest;
    }
    let up = 1.0 + (1.0 - alpha) * y;
    if inv_j == 0.0 {
        guarded_pow(rest, alpha) * guarded_pow(up, 1.0 - alpha)
    } else {
        rest * ((1.0 - alpha) * (up.ln() - (inv_j + rest).ln())).exp()
    }
}

/// `F_α(y) = (1 − αy)^α (1 + (1 − α)y)^{1−α}`.
pub fn filling_factor(s: &StatisticsParam, y: f64) -> Result<f64> {
    let y = s.clamp_occupation(y)?;
    Ok(raw_factor(s.alpha, 0.0, y))
}

/// `F_j(y) = (1 − αy)(1/j + 1 − αy)^{α−1}(1 + (1 − α)y)^{1−α}`.
pub fn filling_factor_regularized(s: &StatisticsParam, y: f64) -> Result<f64> {
    let j = s
        .j_level
        .ok_or_else(|| invalid("j_level", "regularized factor needs a level"))?;
    let y = s.clamp_occupation(y)?;
    Ok(raw_factor(s.alpha, 1.0 / j, y))
}

/// `y / F(y)` for the active filling factor; strictly increasing.
pub fn occupation_ratio(s: &StatisticsParam, y: f64) -> Result<f64> {
    if !(y > 0.0 && y < s.ceiling()) {
        return Err(Error::OutOfRange {
            value: y,
            ceiling: s.ceiling(),
        });
    }
    Ok(y / s.factor(y))
}

/// Parameters of an equilibrium `y/F(y) = exp((μ − |v − u|²)/T)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSpec {
    pub mu: f64,
    pub temperature: f64,
    pub bulk_velocity: [f64; 3],
}

impl EquilibriumSpec {
    pub fn new(mu: f64, temperature: f64, bulk_velocity: [f64; 3]) -> Result<Self> {
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(invalid("temperature", format!("{temperature} must be positive")));
        }
        if !mu.is_finite() || bulk_velocity.iter().any(|u| !u.is_finite()) {
            return Err(invalid("mu", "equilibrium parameters must be finite"));
        }
        Ok(Self {
            mu,
            temperature,
            bulk_velocity,
        })
    }

    pub fn exponent(&self, v: &[f64; 3]) -> f64 {
        let d = [
            v[0] - self.bulk_velocity[0],
            v[1] - self.bulk_velocity[1],
            v[2] - self.bulk_velocity[2],
        ];
        (self.mu - (d[0] * d[0] + d[1] * d[1] + d[2] * d[2])) / self.temperature
    }

    /// Occupation at one velocity.
    pub fn occupation(&self, s: &StatisticsParam, v: &[f64; 3]) -> Result<f64> {
        s.invert_log_ratio(self.exponent(v))
    }
}

/// Equilibrium sampled at every node, constant in x.
pub fn equilibrium_field(
    s: &StatisticsParam,
    e: &EquilibriumSpec,
    g: &Arc<PhaseGrid>,
) -> Result<DistributionField> {
    let profile = g
        .velocities()
        .iter()
        .map(|v| e.occupation(s, v))
        .collect::<Result<Vec<_>>>()
        .map_err(|err| Error::Config(format!("equilibrium root finding failed: {err}")))?;
    let mut f = DistributionField::zeros(g.clone(), s.alpha);
    for cell in 0..g.num_cells() {
        f.cell_mut(cell).copy_from_slice(&profile);
    }
    f.check_invariants(0)?;
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn st(a: f64) -> StatisticsParam {
        StatisticsParam::exact(a).unwrap()
    }

    #[test]
    fn examples() {
        assert_eq!(filling_factor(&st(0.5), 0.0).unwrap(), 1.0);
        assert_eq!(filling_factor(&st(1.0), 0.3).unwrap(), 0.7);
        assert!((filling_factor(&st(0.5), 1.0).unwrap() - 0.866_025_403_784_438_6).abs() < 1e-15);
        assert_eq!(filling_factor(&st(0.3), 1.0 / 0.3).unwrap(), 0.0);

        let r1 = StatisticsParam::regularized(1.0, 7.0).unwrap();
        assert_eq!(filling_factor_regularized(&r1, 0.3).unwrap(), 0.7);
        let r = StatisticsParam::regularized(0.5, 10.0).unwrap();
        assert!((filling_factor_regularized(&r, 0.0).unwrap() - 1.1f64.powf(-0.5)).abs() < 1e-15);
        assert_eq!(filling_factor_regularized(&r, 2.0).unwrap(), 0.0);

        assert_eq!(occupation_ratio(&st(1.0), 0.5).unwrap(), 1.0);
        assert!((occupation_ratio(&st(0.5), 1.0).unwrap() - 1.154_700_538_379_251_7).abs() < 1e-14);
    }

    #[test]
    fn domain_checks() {
        let s = st(0.5);
        assert!(filling_factor(&s, -1e-13).is_ok());
        assert!(filling_factor(&s, -1e-11).is_err());
        assert!(filling_factor(&s, 2.0 + 1e-11).is_err());
        assert!(occupation_ratio(&s, 0.0).is_err());
        assert!(StatisticsParam::exact(0.0).is_err());
        assert!(StatisticsParam::regularized(0.5, 0.5).is_err());
    }

    #[test]
    fn equilibrium_examples() {
        let fd = st(1.0);
        let e = EquilibriumSpec::new(0.0, 1.0, [0.0; 3]).unwrap();
        assert!((e.occupation(&fd, &[0.0; 3]).unwrap() - 0.5).abs() < 1e-15);
        let s = st(0.5);
        let eta = occupation_ratio(&s, 1.0).unwrap().ln();
        assert!((s.invert_log_ratio(eta).unwrap() - 1.0).abs() < 1e-13);
        assert!(s.invert_log_ratio(-700.0).unwrap() < 1e-300);
    }

    #[test]
    fn regularized_limit() {
        // the gap is (1−α)·F/(j(1−αy)) to first order, which exceeds 1e-6
        // next to saturation once α drops below about 0.15
        for &a in &[0.2, 0.5, 0.9, 1.0] {
            let exact = st(a);
            let big = StatisticsParam::regularized(a, 1e9).unwrap();
            for i in 0..1000 {
                let y = i as f64 / 999.0 / a;
                let d = (exact.factor(y) - big.factor(y)).abs();
                assert!(d <= 1e-6, "alpha={a} y={y} diff={d}");
            }
        }
    }

    #[test]
    fn fast_and_bracketed_inversions_agree() {
        for &a in &[0.05, 0.3, 0.5, 0.99, 1.0] {
            for j in [None, Some(6.0)] {
                let s = StatisticsParam::new(a, j).unwrap();
                for k in -80..=80 {
                    let eta = k as f64 * 0.5;
                    let y0 = s.invert_log_ratio(eta).unwrap();
                    let (y1, f1) = s.invert_fast(eta);
                    assert!((y0 - y1).abs() <= 1e-13 * y0.max(1e-300), "a={a} eta={eta} {y0:e} {y1:e}");
                    let rest = 1.0 - a * y1;
                    if y1 > 0.0 && rest > 1e-6 {
                        // F(y) inherits the rounding of 1 − αy
                        let tol = 1e-12 + 1e-15 / rest;
                        assert!((f1 - s.factor(y1)).abs() <= tol * f1.max(1e-300));
                    }
                }
            }
        }
    }

    proptest! {
        #[test]
        fn ratio_is_increasing(a in 0.01f64..=1.0, u in 0.001f64..0.999, w in 0.001f64..0.999) {
            let s = st(a);
            let (y1, y2) = (u.min(w) / a, u.max(w) / a);
            prop_assume!(y2 - y1 > 1e-9 / a);
            prop_assert!(occupation_ratio(&s, y1).unwrap() < occupation_ratio(&s, y2).unwrap());
        }

        #[test]
        fn round_trip(a in 0.01f64..=1.0, mu in -5.0f64..5.0, t in 0.2f64..5.0, v in -6.0f64..6.0) {
            let s = st(a);
            let e = EquilibriumSpec::new(mu, t, [0.3, 0.0, -0.1]).unwrap();
            let arg = e.exponent(&[v, 0.5, 0.0]);
            let y = e.occupation(&s, &[v, 0.5, 0.0]).unwrap();
            // 1 − αy carries no digits once y sits within rounding of 1/α
            prop_assume!(y > 0.0 && 1.0 - a * y > 1e-6);
            let back = occupation_ratio(&s, y).unwrap().ln();
            prop_assert!((back - arg).abs() <= 1e-10 * (1.0 + arg.abs()));
        }

        #[test]
        fn detailed_balance(
            a in 0.05f64..=1.0,
            v in prop::array::uniform3(-3.0f64..3.0),
            w in prop::array::uniform3(-3.0f64..3.0),
            th in 0.0f64..std::f64::consts::PI,
            ph in 0.0f64..std::f64::consts::TAU,
        ) {
            let s = StatisticsParam::regularized(a, 6.0).unwrap();
            let e = EquilibriumSpec::new(0.2, 1.3, [0.1, -0.2, 0.0]).unwrap();
            let n = [th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()];
            let (vp, wp) = crate::collision::collision_geometry(&v, &w, &n).unwrap();
            let y = |x: &[f64; 3]| e.occupation(&s, x).unwrap();
            let (f, fs, fp, fps) = (y(&v), y(&w), y(&vp), y(&wp));
            let lhs = fp * fps * s.factor(f) * s.factor(fs);
            let rhs = f * fs * s.factor(fp) * s.factor(fps);
            prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(rhs.abs()));
        }
    }
}
