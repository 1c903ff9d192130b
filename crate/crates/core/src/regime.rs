//! Validity checks for the perturbative light and spin series and for the
//! extreme-paraxial (large Fresnel number) approximation.
//!
//! "≪ 1" is taken as value < 0.1; the raw values are always reported.

use std::fmt;
use thiserror::Error;

pub const THRESHOLD: f64 = 0.1;
/// Relative tolerance between a supplied OD and ρλ²L.
pub const OD_TOLERANCE: f64 = 0.2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegimeError {
    #[error("scenario field '{0}' must be positive")]
    NonPositive(&'static str),
    #[error("optical depth {given} inconsistent with rho*lambda^2*L = {derived} (> 20%)")]
    InconsistentOd { given: f64, derived: f64 },
    #[error("optical depth missing: supply 'od' or 'rho'")]
    MissingOd,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scenario {
    pub kappa: f64,
    pub n_p: f64,
    pub n_a: f64,
    pub od: f64,
    /// Smallest setup dimension (m).
    pub d: f64,
    /// Ensemble length (m).
    pub length: f64,
    pub lambda: f64,
    pub delta: f64,
    pub gamma: f64,
    /// Beam waist (m).
    pub w: f64,
}

impl Scenario {
    /// Validates positivity and resolves OD from `od` and/or ρλ²L.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        kappa: f64,
        n_p: f64,
        n_a: f64,
        od: Option<f64>,
        rho: Option<f64>,
        d: f64,
        length: f64,
        lambda: f64,
        delta: f64,
        gamma: f64,
        w: f64,
    ) -> Result<Self, RegimeError> {
        if !(kappa >= 0.0) {
            return Err(RegimeError::NonPositive("kappa"));
        }
        for (name, v) in [
            ("n_p", n_p),
            ("n_a", n_a),
            ("d", d),
            ("length", length),
            ("lambda", lambda),
            ("delta", delta),
            ("gamma", gamma),
            ("w", w),
        ] {
            if !(v > 0.0) {
                return Err(RegimeError::NonPositive(name));
            }
        }
        let derived = rho.map(|r| r * lambda * lambda * length);
        let od = match (od, derived) {
            (Some(g), Some(dv)) => {
                if (g - dv).abs() > OD_TOLERANCE * g {
                    return Err(RegimeError::InconsistentOd { given: g, derived: dv });
                }
                g
            }
            (Some(g), None) => g,
            (None, Some(dv)) => dv,
            (None, None) => return Err(RegimeError::MissingOd),
        };
        if !(od > 0.0) {
            return Err(RegimeError::NonPositive("od"));
        }
        Ok(Self { kappa, n_p, n_a, od, d, length, lambda, delta, gamma, w })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub threshold: f64,
    /// Positive when passing: threshold − value (or value − threshold for
    /// lower bounds).
    pub margin: f64,
    pub pass: bool,
}

impl Check {
    fn upper(name: &'static str, value: f64) -> Self {
        Self { name, value, threshold: THRESHOLD, margin: THRESHOLD - value, pass: value < THRESHOLD }
    }
}

/// κ/√N_P, κ²/√N_P, (κ²/OD)(N_A/N_P).
pub fn check_light_series(s: &Scenario) -> [Check; 3] {
    let k2 = s.kappa * s.kappa;
    [
        Check::upper("kappa/sqrt(N_P)", s.kappa / s.n_p.sqrt()),
        Check::upper("kappa^2/sqrt(N_P)", k2 / s.n_p.sqrt()),
        Check::upper("kappa^2/OD*N_A/N_P", k2 / s.od * s.n_a / s.n_p),
    ]
}

/// κ/√N_A, κ²/OD, κ²√(d/(L·OD)), κ²√(Δ/γ)√(λ/(L·OD)).
pub fn check_spin_series(s: &Scenario) -> [Check; 4] {
    let k2 = s.kappa * s.kappa;
    [
        Check::upper("kappa/sqrt(N_A)", s.kappa / s.n_a.sqrt()),
        Check::upper("kappa^2/OD", k2 / s.od),
        Check::upper("kappa^2*sqrt(d/(L*OD))", k2 * (s.d / (s.length * s.od)).sqrt()),
        Check::upper(
            "kappa^2*sqrt(delta/gamma)*sqrt(lambda/(L*OD))",
            k2 * (s.delta / s.gamma).sqrt() * (s.lambda / (s.length * s.od)).sqrt(),
        ),
    ]
}

/// F = w²/(λL); pass iff F ≥ 10(1 + m + n).
pub fn check_fresnel(s: &Scenario, m: usize, n: usize) -> Check {
    fresnel_check(s.w * s.w / (s.lambda * s.length), m + n)
}

pub fn fresnel_check(f: f64, order: usize) -> Check {
    let need = 10.0 * (1 + order) as f64;
    Check { name: "fresnel", value: f, threshold: need, margin: f - need, pass: f >= need }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegimeReport {
    pub light: [Check; 3],
    pub spin: [Check; 4],
    pub fresnel: Check,
    pub verdict: bool,
}

impl RegimeReport {
    pub fn checks(&self) -> impl Iterator<Item = &Check> {
        self.light.iter().chain(self.spin.iter()).chain(std::iter::once(&self.fresnel))
    }
}

pub fn regime_report(s: &Scenario, m: usize, n: usize) -> RegimeReport {
    let light = check_light_series(s);
    let spin = check_spin_series(s);
    let fresnel = check_fresnel(s, m, n);
    let verdict = light.iter().chain(spin.iter()).all(|c| c.pass) && fresnel.pass;
    RegimeReport { light, spin, fresnel, verdict }
}

impl fmt::Display for RegimeReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<48} {:>12} {:>10} {:>6}", "check", "value", "threshold", "pass")?;
        for c in self.checks() {
            writeln!(f, "{:<48} {:>12.4e} {:>10.3e} {:>6}", c.name, c.value, c.threshold, c.pass)?;
        }
        write!(f, "verdict: {}", if self.verdict { "PASS" } else { "FAIL" })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn anchor(kappa: f64, n_p: f64) -> Scenario {
        // d = L, Δ/γ = 10³, λ/L = 1e−5
        Scenario::new(kappa, n_p, 1e6, Some(30.0), None, 0.01, 0.01, 1e-7, 1e3, 1.0, 1e-3).unwrap()
    }

    #[test]
    fn experimental_anchor_light() {
        let c = check_light_series(&anchor(1.0, 1e8));
        assert!((c[0].value - 1e-4).abs() < 1e-18);
        assert!((c[1].value - 1e-4).abs() < 1e-18);
        assert!((c[2].value - 1.0 / 3000.0).abs() < 1e-15);
        assert!(c.iter().all(|c| c.pass));
    }

    #[test]
    fn spin_anchor_with_marginal_third() {
        let c = check_spin_series(&anchor(1.0, 1e8));
        let expect = [1e-3, 1.0 / 30.0, (1.0f64 / 30.0).sqrt(), 1e3f64.sqrt() * (1e-5f64 / 30.0).sqrt()];
        for (c, e) in c.iter().zip(expect) {
            assert!((c.value - e).abs() < 1e-12 * e);
        }
        assert_eq!(c.map(|c| c.pass), [true, true, false, true]);
    }

    #[test]
    fn thresholds() {
        assert!(!check_light_series(&anchor(10.0, 100.0))[0].pass);
        let zero = regime_report(&anchor(0.0, 1e8), 0, 0);
        assert!(zero.light.iter().chain(zero.spin.iter()).all(|c| c.value == 0.0 && c.pass));
        assert!(fresnel_check(1e4, 0).pass);
        assert!(!fresnel_check(5.0, 1).pass);
        assert!(fresnel_check(30.0, 2).pass);
    }

    #[test]
    fn od_resolution() {
        let mk = |od, rho| Scenario::new(1.0, 1e8, 1e6, od, rho, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0);
        assert_eq!(mk(None, Some(25.0)).unwrap().od, 25.0);
        assert!(mk(Some(30.0), Some(25.0)).is_ok());
        assert!(matches!(mk(Some(30.0), Some(20.0)), Err(RegimeError::InconsistentOd { .. })));
        assert_eq!(mk(None, None), Err(RegimeError::MissingOd));
    }

    proptest! {
        #[test]
        fn verdict_is_conjunction(kappa in 0.0..20.0f64, lnp in 0.0..12.0f64, f in 1.0..1e5f64, order in 0usize..200) {
            let s = Scenario::new(kappa, 10f64.powf(lnp), 1e6, Some(30.0), None, 0.01, 0.01, 1e-7, 10.0, 1.0, (f * 1e-9f64).sqrt()).unwrap();
            let r = regime_report(&s, order, 0);
            prop_assert_eq!(r.verdict, r.checks().all(|c| c.pass));
        }

        #[test]
        fn more_photons_never_hurt(kappa in 0.0..20.0f64, lnp in 0.0..12.0f64, factor in 1.0..100.0f64) {
            let a = check_light_series(&anchor(kappa, 10f64.powf(lnp)));
            let b = check_light_series(&anchor(kappa, 10f64.powf(lnp) * factor));
            for (x, y) in a.iter().zip(b.iter()) {
                prop_assert!(!x.pass || y.pass);
            }
        }

        #[test]
        fn kappa_squared_scaling(kappa in 0.01..20.0f64) {
            let a = check_spin_series(&anchor(kappa, 1e8));
            let b = check_spin_series(&anchor(2.0 * kappa, 1e8));
            for i in 1..4 {
                prop_assert_eq!(b[i].value, 4.0 * a[i].value);
            }
        }
    }
}
