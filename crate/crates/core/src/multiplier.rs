//! Time-dependent Fourier multiplier that tracks resonance passage.
//!
//! For a mode k and vertical frequency xi, the critical time is t = xi/k:
//! there the moving-frame frequency xi - kt crosses zero and dissipation
//! momentarily stalls. The symbol m(t,k,xi) prices that stall in advance. It
//! equals 1 long before the crossing, decays inside the window
//! |t - xi/k| < G with
//!
//!   d/dt log m = -(nu^{1/3} + u / (1 + u^2 (t - xi/k)^2)),
//!
//! and freezes at the terminal constant c = exp(-0.2 - 2 arctan(uG)) after
//! the window, where G = 0.1 nu^{-1/3}, nu is the weakest local dissipation
//! mu (U')^2 and u the smallest shear slope. Because the loss per crossing is
//! bounded below by c >= exp(-0.2 - pi), conjugating the dynamics by the
//! diagonal operator A = F^{-1} m F turns the Lyapunov functional ||A W||^2
//! into one that decays monotonically straight through every resonance.
//!
//! The closed form used here integrates the defining rate exactly, so no
//! trajectory of the symbol is ever produced by numerical integration; the
//! unit tests cross-check against adaptive quadrature instead.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::SpectralOps;

/// Scalar data of the symbol for one (nu, u) pair.
#[derive(Debug, Clone)]
pub struct Multiplier {
    nu: f64,
    u: f64,
    g: f64,
    c: f64,
    nu_cbrt: f64,
    atan_ug: f64,
}

/// Which velocity weight accompanies the quadratic dissipation weight.
///
/// The two published forms differ only in the resonance factor: variant A
/// uses 1/(1 + u^2 (xi - kt)^2), variant B uses u/(1 + u^2 (xi/k - t)^2).
/// Both are computed and reported; neither is privileged.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightVariant {
    A,
    B,
}

impl std::str::FromStr for WeightVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "a" | "A" => Ok(WeightVariant::A),
            "b" | "B" => Ok(WeightVariant::B),
            other => Err(Error::Config(format!(
                "unknown weight variant {other:?}; expected \"a\" or \"b\""
            ))),
        }
    }
}

impl Multiplier {
    /// Build the symbol data for dissipation floor `nu` and slope floor `u`.
    pub fn new(nu: f64, u: f64) -> Result<Self> {
        if !(nu.is_finite() && nu > 0.0) {
            return Err(Error::Config(format!(
                "multiplier needs nu > 0, got {nu}"
            )));
        }
        if !(u.is_finite() && u > 0.0) {
            return Err(Error::Config(format!("multiplier needs u > 0, got {u}")));
        }
        let nu_cbrt = nu.cbrt();
        let g = 0.1 / nu_cbrt;
        let atan_ug = (u * g).atan();
        let c = (-0.2 - 2.0 * atan_ug).exp();
        Ok(Multiplier {
            nu,
            u,
            g,
            c,
            nu_cbrt,
            atan_ug,
        })
    }

    /// Dissipation floor nu.
    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// Slope floor u.
    pub fn u(&self) -> f64 {
        self.u
    }

    /// Half-width G = 0.1 nu^{-1/3} of the resonance window.
    pub fn window(&self) -> f64 {
        self.g
    }

    /// Terminal value c = exp(-0.2 - 2 arctan(uG)); never below exp(-0.2 - pi).
    pub fn floor(&self) -> f64 {
        self.c
    }

    /// Symbol value m(t, k, xi); rejects k = 0, for which no critical time
    /// exists.
    pub fn value(&self, t: f64, k: i64, xi: f64) -> Result<f64> {
        if k == 0 {
            return Err(Error::ZeroWavenumber);
        }
        Ok(self.value_unchecked(t, k as f64, xi))
    }

    /// Symbol value with k already validated nonzero.
    #[inline]
    pub fn value_unchecked(&self, t: f64, k: f64, xi: f64) -> f64 {
        let s = t - xi / k;
        if s <= -self.g {
            1.0
        } else if s >= self.g {
            self.c
        } else {
            (-(self.nu_cbrt * (s + self.g) + (self.u * s).atan() + self.atan_ug)).exp()
        }
    }

    /// Fill `out` with m(t, k, xi_j) over a frequency ladder.
    pub fn symbol_into(&self, t: f64, k: i64, freqs: &[f64], out: &mut [f64]) -> Result<()> {
        if k == 0 {
            return Err(Error::ZeroWavenumber);
        }
        if freqs.len() != out.len() {
            return Err(Error::LengthMismatch {
                context: "symbol_into",
                left: freqs.len(),
                right: out.len(),
            });
        }
        let kf = k as f64;
        for (o, &xi) in out.iter_mut().zip(freqs) {
            *o = self.value_unchecked(t, kf, xi);
        }
        Ok(())
    }

    /// Apply A = F^{-1} m F to a physical buffer in place.
    pub fn apply(&self, ops: &mut SpectralOps, t: f64, k: i64, buf: &mut [Complex64]) -> Result<()> {
        if k == 0 {
            return Err(Error::ZeroWavenumber);
        }
        let kf = k as f64;
        ops.apply_multiplier(buf, |xi| {
            Complex64::new(self.value_unchecked(t, kf, xi), 0.0)
        });
        Ok(())
    }

    /// Apply A^{-1} (division by the symbol, which is bounded below by c).
    pub fn apply_inverse(
        &self,
        ops: &mut SpectralOps,
        t: f64,
        k: i64,
        buf: &mut [Complex64],
    ) -> Result<()> {
        if k == 0 {
            return Err(Error::ZeroWavenumber);
        }
        let kf = k as f64;
        ops.apply_multiplier(buf, |xi| {
            Complex64::new(1.0 / self.value_unchecked(t, kf, xi), 0.0)
        });
        Ok(())
    }

    /// True where the frequency is inside the active window |xi/k - t| < G.
    pub fn resonant_indicator(&self, t: f64, k: i64, freqs: &[f64]) -> Result<Vec<bool>> {
        if k == 0 {
            return Err(Error::ZeroWavenumber);
        }
        let kf = k as f64;
        Ok(freqs
            .iter()
            .map(|&xi| (xi / kf - t).abs() < self.g)
            .collect())
    }

    /// Dissipation weight w(t, k, xi) for the requested variant.
    #[inline]
    pub fn weight(&self, variant: WeightVariant, t: f64, k: f64, xi: f64) -> f64 {
        let d = xi - k * t;
        let quad = self.nu_cbrt + self.nu * d * d;
        match variant {
            WeightVariant::A => quad + 1.0 / (1.0 + self.u * self.u * d * d),
            WeightVariant::B => {
                let s = xi / k - t;
                quad + self.u / (1.0 + self.u * self.u * s * s)
            }
        }
    }

    /// Multiply a physical buffer by the weight, in place.
    pub fn apply_weight(
        &self,
        ops: &mut SpectralOps,
        variant: WeightVariant,
        t: f64,
        k: i64,
        buf: &mut [Complex64],
    ) -> Result<()> {
        if k == 0 {
            return Err(Error::ZeroWavenumber);
        }
        let kf = k as f64;
        ops.apply_multiplier(buf, |xi| {
            Complex64::new(self.weight(variant, t, kf, xi), 0.0)
        });
        Ok(())
    }
}
