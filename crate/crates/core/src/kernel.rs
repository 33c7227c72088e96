//! Collision kernels `B(u, cos θ)` with speed and angular cutoffs, and a
//! validator that measures them against the standing hypotheses.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::quadrature::composite_gauss;

type KernelFn = dyn Fn(f64, f64) -> f64 + Send + Sync;

#[derive(Clone)]
enum Model {
    /// `B0 · 1{u ≥ γ} · band(cos θ)`.
    Band,
    /// `c · min(γ^{−3−η}, u^{−3−η}) · 1{u ≥ γ} · band(cos θ)`.
    Soft { c: f64, eta: f64 },
    Custom(Arc<KernelFn>),
}

/// A collision kernel together with its cutoff parameters.
#[derive(Clone)]
pub struct KernelSpec {
    model: Model,
    b0: f64,
    gamma: f64,
    gamma_prime: f64,
}

impl fmt::Debug for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match &self.model {
            Model::Band => "band".to_string(),
            Model::Soft { c, eta } => format!("soft(c={c}, eta={eta})"),
            Model::Custom(_) => "custom".to_string(),
        };
        f.debug_struct("KernelSpec")
            .field("model", &name)
            .field("b0", &self.b0)
            .field("gamma", &self.gamma)
            .field("gamma_prime", &self.gamma_prime)
            .finish()
    }
}

fn check_cutoffs(gamma: f64, gamma_prime: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(invalid("gamma", format!("{gamma} must be positive")));
    }
    if !(gamma_prime > 0.0 && gamma_prime < 0.5) {
        return Err(invalid("gamma_prime", format!("{gamma_prime} not in (0, 1/2)")));
    }
    Ok(())
}

/// Bounded band kernel, constant on its support.
pub fn make_maxwellian_type_kernel(b0: f64, gamma: f64, gamma_prime: f64) -> Result<KernelSpec> {
    if !(b0 > 0.0 && b0.is_finite()) {
        return Err(invalid("B0", format!("{b0} must be positive")));
    }
    check_cutoffs(gamma, gamma_prime)?;
    Ok(KernelSpec {
        model: Model::Band,
        b0,
        gamma,
        gamma_prime,
    })
}

/// Kernel decaying like `u^{−3−η}` at large relative speed.
pub fn make_soft_kernel(c: f64, eta: f64, gamma: f64, gamma_prime: f64) -> Result<KernelSpec> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(invalid("c", format!("{c} must be positive")));
    }
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(invalid("eta", format!("{eta} must be positive")));
    }
    check_cutoffs(gamma, gamma_prime)?;
    Ok(KernelSpec {
        model: Model::Soft { c, eta },
        b0: c * gamma.powf(-3.0 - eta),
        gamma,
        gamma_prime,
    })
}

impl KernelSpec {
    /// Arbitrary kernel. `b0` is the claimed bound; the validator checks it.
    pub fn custom<F>(b: F, b0: f64, gamma: f64, gamma_prime: f64) -> Result<Self>
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        if !(b0 >= 0.0 && b0.is_finite()) {
            return Err(invalid("B0", format!("{b0} must be finite and >= 0")));
        }
        check_cutoffs(gamma, gamma_prime)?;
        Ok(Self {
            model: Model::Custom(Arc::new(b)),
            b0,
            gamma,
            gamma_prime,
        })
    }

    /// `B ≡ 0`; turns the solver into free transport.
    pub fn zero() -> Self {
        Self {
            model: Model::Custom(Arc::new(|_, _| 0.0)),
            b0: 0.0,
            gamma: 0.1,
            gamma_prime: 0.1,
        }
    }

    pub fn b0(&self) -> f64 {
        self.b0
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn gamma_prime(&self) -> f64 {
        self.gamma_prime
    }

    pub fn is_soft(&self) -> bool {
        matches!(self.model, Model::Soft { .. })
    }

    /// `(c, η)` of a soft kernel.
    pub fn soft_params(&self) -> Option<(f64, f64)> {
        match self.model {
            Model::Soft { c, eta } => Some((c, eta)),
            _ => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self.model {
            Model::Band => "band",
            Model::Soft { .. } => "soft",
            Model::Custom(_) => "custom",
        }
    }

    /// Angular band indicator `γ′ ≤ |cos θ| ≤ 1 − γ′`.
    #[inline]
    pub fn band(&self, cos_theta: f64) -> f64 {
        let a = cos_theta.abs();
        if a >= self.gamma_prime && a <= 1.0 - self.gamma_prime {
            1.0
        } else {
            0.0
        }
    }

    /// Speed factor of a separable kernel; `None` for custom kernels.
    #[inline]
    pub fn speed_factor(&self, u: f64) -> Option<f64> {
        match self.model {
            Model::Band => Some(if u >= self.gamma { self.b0 } else { 0.0 }),
            Model::Soft { c, eta } => Some(if u >= self.gamma {
                c * u.max(self.gamma).powf(-3.0 - eta)
            } else {
                0.0
            }),
            Model::Custom(_) => None,
        }
    }

    /// `B(u, cos θ)`.
    #[inline]
    pub fn eval(&self, u: f64, cos_theta: f64) -> f64 {
        match &self.model {
            Model::Custom(b) => b(u, cos_theta),
            _ => self.speed_factor(u).unwrap_or(0.0) * self.band(cos_theta),
        }
    }

    /// `B1(u)` of a soft kernel.
    pub fn soft_speed_factor(&self, u: f64) -> Option<f64> {
        self.is_soft().then(|| self.speed_factor(u).unwrap_or(0.0))
    }
}

/// Outcome of [`validate_kernel`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KernelCertificate {
    pub b0_ok: bool,
    pub cutoff_ok: bool,
    /// `(Γ, c_Γ)` pairs.
    pub lower_bound: Vec<(f64, f64)>,
    pub soft_ok: Option<bool>,
    pub samples: usize,
    pub max_sampled: f64,
}

impl KernelCertificate {
    pub fn lower_bound_ok(&self) -> bool {
        self.lower_bound.iter().all(|&(_, c)| c > 0.0)
    }

    pub fn passes(&self) -> bool {
        self.b0_ok && self.cutoff_ok && self.lower_bound_ok() && self.soft_ok.unwrap_or(true)
    }

    /// Line-oriented `key = value` report.
    pub fn report(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("passes = {}\n", self.passes()));
        s.push_str(&format!("b0_ok = {}\n", self.b0_ok));
        s.push_str(&format!("cutoff_ok = {}\n", self.cutoff_ok));
        match self.soft_ok {
            Some(ok) => s.push_str(&format!("soft_ok = {ok}\n")),
            None => s.push_str("soft_ok = not-applicable\n"),
        }
        s.push_str(&format!("samples = {}\n", self.samples));
        s.push_str(&format!("max_sampled = {:e}\n", self.max_sampled));
        for (g, c) in &self.lower_bound {
            s.push_str(&format!("c_gamma[{g}] = {c:.15e}\n"));
        }
        s
    }
}

/// Radical inverse in base `b`.
fn halton(mut i: usize, b: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= b as f64;
        r += f * (i % b) as f64;
        i /= b;
    }
    r
}

/// Number of u-samples for the infimum over `[γ, Γ]`.
pub const INF_SAMPLES: usize = 512;

/// Checks the bound, the cutoff zeros and (for soft kernels) the decay on a
/// Halton point set, and measures `c_Γ = ∫ inf_{u∈[γ,Γ]} B(u, θ) dn`.
pub fn validate_kernel(ks: &KernelSpec, gammas: &[f64], n_samples: usize) -> KernelCertificate {
    let n_samples = n_samples.max(1000);
    let gp = ks.gamma_prime;
    let u_max = gammas.iter().copied().fold(4.0 * ks.gamma, f64::max) * 1.5;

    let mut b0_ok = true;
    let mut cutoff_ok = true;
    let mut max_sampled: f64 = 0.0;
    for i in 1..=n_samples {
        let u = u_max * halton(i, 2);
        let c = -1.0 + 2.0 * halton(i, 3);
        let b = ks.eval(u, c);
        max_sampled = max_sampled.max(b);
        if !(b >= 0.0 && b <= ks.b0 * (1.0 + 1e-12)) {
            b0_ok = false;
        }
        let a = c.abs();
        let outside = a < gp || 1.0 - a < gp || u < ks.gamma;
        if outside && b != 0.0 {
            cutoff_ok = false;
        }
    }
    // explicit cutoff edges
    for &c in &[0.0, gp * 0.5, -gp * 0.5, 1.0, -1.0, 1.0 - gp * 0.5] {
        if ks.eval(1.0 + ks.gamma, c) != 0.0 {
            cutoff_ok = false;
        }
    }
    if ks.eval(0.5 * ks.gamma, 0.5) != 0.0 {
        cutoff_ok = false;
    }

    let soft_ok = ks.soft_params().map(|(c, eta)| {
        let lo = ks.gamma.ln();
        let hi = (100.0 * u_max.max(ks.gamma * 10.0)).ln();
        let decay_ok = (0..1000).all(|i| {
            let u = (lo + (hi - lo) * i as f64 / 999.0).exp();
            let b1 = ks.soft_speed_factor(u).unwrap_or(0.0);
            b1 >= 0.0 && b1 * u.powf(3.0 + eta) <= c * (1.0 + 1e-12)
        });
        let b2_ok = (0..=200).all(|i| {
            let b2 = ks.band(-1.0 + i as f64 / 100.0);
            (0.0..=1.0).contains(&b2)
        });
        decay_ok && b2_ok
    });

    let rule = composite_gauss(-1.0, 1.0, &[-1.0 + gp, -gp, gp, 1.0 - gp], 16);
    let lower_bound = gammas
        .iter()
        .map(|&big| {
            let us = inf_samples(ks.gamma, big);
            let integral: f64 = rule
                .iter()
                .map(|&(c, w)| {
                    let inf = us.iter().map(|&u| ks.eval(u, c)).fold(f64::INFINITY, f64::min);
                    w * inf
                })
                .sum();
            (big, 2.0 * PI * integral)
        })
        .collect();

    KernelCertificate {
        b0_ok,
        cutoff_ok,
        lower_bound,
        soft_ok,
        samples: n_samples,
        max_sampled,
    }
}

/// Geometric samples on `[γ, Γ]`, both ends included.
fn inf_samples(gamma: f64, big: f64) -> Vec<f64> {
    if big <= gamma {
        return vec![gamma];
    }
    let (lo, hi) = (gamma.ln(), big.ln());
    let mut us: Vec<f64> = (0..INF_SAMPLES)
        .map(|i| (lo + (hi - lo) * i as f64 / (INF_SAMPLES - 1) as f64).exp())
        .collect();
    us[0] = gamma;
    us[INF_SAMPLES - 1] = big;
    us
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn band_examples() {
        let k = make_maxwellian_type_kernel(1.0, 0.1, 0.1).unwrap();
        assert_eq!(k.eval(1.0, 0.5), 1.0);
        assert_eq!(k.eval(1.0, 0.05), 0.0);
        assert_eq!(k.eval(0.05, 0.5), 0.0);
        assert_eq!(k.eval(1.0, 0.95), 0.0);
    }

    #[test]
    fn band_lower_bound_is_band_measure() {
        let k = make_maxwellian_type_kernel(1.0, 0.1, 0.1).unwrap();
        let cert = validate_kernel(&k, &[1.0, 10.0, 100.0], 4096);
        assert!(cert.passes(), "{}", cert.report());
        let expected = 4.0 * PI * (1.0 - 2.0 * 0.1);
        for &(_, c) in &cert.lower_bound {
            assert!((c - expected).abs() <= 1e-12 * expected);
        }
    }

    #[test]
    fn soft_examples_and_slope() {
        let (c, eta, g) = (0.5, 1.0, 0.1);
        let k = make_soft_kernel(c, eta, g, 0.1).unwrap();
        assert_eq!(k.eval(0.05, 0.5), 0.0);
        let b1 = k.soft_speed_factor(2.0 * g).unwrap();
        assert!((b1 - c * (2.0 * g).powi(-4)).abs() <= 1e-12 * b1);
        assert!((k.b0() - c * g.powi(-4)).abs() <= 1e-9);

        let gammas = [2.0, 4.0, 8.0, 16.0];
        let cert = validate_kernel(&k, &gammas, 2000);
        assert!(cert.passes(), "{}", cert.report());
        let xs: Vec<f64> = gammas.iter().map(|x| x.ln()).collect();
        let ys: Vec<f64> = cert.lower_bound.iter().map(|p| p.1.ln()).collect();
        let (slope, _) = crate::quadrature::linear_fit(&xs, &ys);
        assert!((slope + 4.0).abs() <= 0.1, "slope {slope}");
    }

    #[test]
    fn zero_kernel_fails_lower_bound() {
        let cert = validate_kernel(&KernelSpec::zero(), &[10.0], 1000);
        assert!(!cert.lower_bound_ok());
        assert!(!cert.passes());
    }

    #[test]
    fn bad_custom_kernel_is_caught() {
        let k = KernelSpec::custom(|_, _| 2.0, 1.0, 0.1, 0.1).unwrap();
        let cert = validate_kernel(&k, &[10.0], 1000);
        assert!(!cert.b0_ok && !cert.cutoff_ok);
    }

    #[test]
    fn validator_is_deterministic() {
        let k = make_soft_kernel(1.0, 0.5, 0.2, 0.05).unwrap();
        assert_eq!(validate_kernel(&k, &[3.0, 9.0], 1500), validate_kernel(&k, &[3.0, 9.0], 1500));
    }
}
