//! Closed-form reference solution for constant viscosity.
//!
//! With mu constant the equilibrium is plane Couette flow, the stream
//! coupling terms vanish, and each moving-frame Fourier coefficient obeys
//!
//!   d/dt What(t, xi) = -mu (k^2 + (xi - kt)^2) What(t, xi),
//!
//! which integrates to
//!
//!   What(t, xi) = What(0, xi) exp(-mu [k^2 t + (xi^3 - (xi - kt)^3) / (3k)]).
//!
//! The cumulative exponent grows like mu k^2 t^3 / 3 once the moving
//! frequency has swept past the origin, which is the mechanism behind the
//! mu^{1/3}-accelerated decay the solver is built to measure. Time steppers
//! are validated against this formula mode by mode.

use num_complex::Complex64;

/// Parameters of one Fourier coefficient of the constant-viscosity problem.
#[derive(Debug, Clone, Copy)]
pub struct CouetteParams {
    pub mu: f64,
    pub k: f64,
    pub xi: f64,
}

/// Exponent E(t) >= 0 such that What(t) = What(0) exp(-E(t)).
pub fn decay_exponent(p: &CouetteParams, t: f64) -> f64 {
    let swept = p.xi - p.k * t;
    p.mu * (p.k * p.k * t + (p.xi.powi(3) - swept.powi(3)) / (3.0 * p.k))
}

/// Exact coefficient value at time t from initial value `w0`.
pub fn couette_exact(p: &CouetteParams, t: f64, w0: Complex64) -> Complex64 {
    w0 * (-decay_exponent(p, t)).exp()
}

/// Exact evolution of a full spectrum over a frequency ladder.
pub fn couette_exact_field(
    mu: f64,
    k: f64,
    freqs: &[f64],
    t: f64,
    w0_hat: &[Complex64],
) -> Vec<Complex64> {
    freqs
        .iter()
        .zip(w0_hat)
        .map(|(&xi, &w0)| couette_exact(&CouetteParams { mu, k, xi }, t, w0))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simpson_exponent(p: &CouetteParams, t: f64) -> f64 {
        // integrate mu (k^2 + (xi - k tau)^2) with composite Simpson
        let n = 40_000;
        let h = t / n as f64;
        let f = |tau: f64| {
            let d = p.xi - p.k * tau;
            p.mu * (p.k * p.k + d * d)
        };
        let mut sum = f(0.0) + f(t);
        for i in 1..n {
            sum += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
        }
        sum * h / 3.0
    }

    #[test]
    fn starts_from_the_initial_value() {
        let p = CouetteParams {
            mu: 1e-3,
            k: 2.0,
            xi: 1.5,
        };
        let w0 = Complex64::new(0.3, -0.7);
        assert_eq!(couette_exact(&p, 0.0, w0), w0);
    }

    #[test]
    fn anchor_value_at_ten_time_units() {
        // mu = 1e-3, k = 1, xi = 0, t = 10:
        // E = 1e-3 (10 + 1000/3) = 0.343333...
        let p = CouetteParams {
            mu: 1e-3,
            k: 1.0,
            xi: 0.0,
        };
        let e = decay_exponent(&p, 10.0);
        assert!((e - 0.343333333333333).abs() < 1e-12);
        let w = couette_exact(&p, 10.0, Complex64::new(1.0, 0.0));
        assert!((w.re - (-0.343333333333333f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn closed_form_matches_quadrature() {
        for &(mu, k, xi, t) in &[
            (1e-3, 1.0, 0.0, 10.0),
            (1e-2, 2.0, 3.0, 4.0),
            (5e-4, -1.0, -2.5, 7.0),
            (1.0, 3.0, 0.7, 1.2),
        ] {
            let p = CouetteParams { mu, k, xi };
            let closed = decay_exponent(&p, t);
            let quad = simpson_exponent(&p, t);
            assert!(
                (closed - quad).abs() < 1e-10 * quad.abs().max(1.0),
                "mu={mu} k={k} xi={xi} t={t}: {closed} vs {quad}"
            );
        }
    }

    #[test]
    fn amplitude_never_grows() {
        let p = CouetteParams {
            mu: 2e-3,
            k: 1.0,
            xi: 5.0,
        };
        let w0 = Complex64::new(0.0, 1.0);
        let mut last = w0.norm();
        for i in 1..=200 {
            let t = i as f64 * 0.1;
            let now = couette_exact(&p, t, w0).norm();
            assert!(now <= last + 1e-15);
            assert!(now <= w0.norm());
            last = now;
        }
    }

    #[test]
    fn field_variant_matches_scalar() {
        let freqs = [-2.0, -0.5, 0.0, 1.0, 3.5];
        let w0: Vec<Complex64> = (0..freqs.len())
            .map(|i| Complex64::new(i as f64 + 0.5, -(i as f64)))
            .collect();
        let out = couette_exact_field(1e-3, 2.0, &freqs, 3.0, &w0);
        for ((&xi, &w0i), &got) in freqs.iter().zip(&w0).zip(&out) {
            let p = CouetteParams {
                mu: 1e-3,
                k: 2.0,
                xi,
            };
            assert_eq!(got, couette_exact(&p, 3.0, w0i));
        }
    }
}
