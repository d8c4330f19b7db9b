//! Standard-normal primitives and the single-threshold truncation constants
//! used by every selection formula in the crate.
//!
//! Participation is modelled as a standard-normal liability `X` exceeding the
//! threshold `t = Φ⁻¹(1 − α)`. Everything downstream only needs three numbers
//! derived from `α`: the threshold, the Mills-type ratio `φ(t)/α` (the mean of
//! `X` among participants) and `ξ(α)`, the variance reduction of `X`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest participation rate accepted. Below this the threshold sits in a
/// region where the truncation constants stop being meaningful in `f64`.
pub const MIN_ALPHA: f64 = 1e-6;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal density.
#[inline]
pub fn std_normal_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal CDF, computed through `erfc` so that the lower tail keeps
/// full relative precision.
#[inline]
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Upper tail `1 − Φ(x)` without cancellation.
#[inline]
pub fn std_normal_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

/// Inverse standard normal CDF.
///
/// Wichura's AS241 (PPND16) rational approximation followed by one Halley
/// step against the `erfc`-based CDF. Rejects `p` outside the open unit
/// interval.
pub fn std_normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid("p", format!("quantile requires 0 < p < 1, got {p}")));
    }
    let x = as241(p);
    // Refine on whichever tail is represented more accurately.
    let (err, sign) = if p < 0.5 {
        (std_normal_cdf(x) - p, 1.0)
    } else {
        (std_normal_sf(x) - (1.0 - p), -1.0)
    };
    let u = sign * err / std_normal_pdf(x);
    let refined = x - u / (1.0 + 0.5 * x * u);
    Ok(if refined.is_finite() { refined } else { x })
}

#[allow(clippy::excessive_precision, clippy::inconsistent_digit_grouping)]
fn as241(p: f64) -> f64 {
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q
            * (((((((r * 2509.080_928_730_122_7 + 33430.575_583_588_128) * r
                + 67265.770_927_008_7)
                * r
                + 45921.953_931_549_87)
                * r
                + 13731.693_765_509_461)
                * r
                + 1971.590_950_306_551_3)
                * r
                + 133.141_667_891_784_38)
                * r
                + 3.387_132_872_796_366_5)
            / (((((((r * 5226.495_278_852_545 + 28729.085_735_721_943) * r
                + 39307.895_800_092_71)
                * r
                + 21213.794_301_586_597)
                * r
                + 5394.196_021_424_751)
                * r
                + 687.187_007_492_057_9)
                * r
                + 42.313_330_701_600_91)
                * r
                + 1.0);
    }
    let mut r = if q < 0.0 { p } else { 1.0 - p };
    r = (-r.ln()).sqrt();
    let val = if r <= 5.0 {
        r -= 1.6;
        (((((((r * 7.745_450_142_783_414e-4 + 0.022_723_844_989_269_184) * r
            + 0.241_780_725_177_450_6)
            * r
            + 1.270_458_252_452_368_4)
            * r
            + 3.647_848_324_763_204_5)
            * r
            + 5.769_497_221_460_691)
            * r
            + 4.630_337_846_156_546)
            * r
            + 1.423_437_110_749_683_5)
            / (((((((r * 1.050_750_071_644_416_9e-9 + 5.475_938_084_995_345e-4) * r
                + 0.015_198_666_563_616_457)
                * r
                + 0.148_103_976_427_480_08)
                * r
                + 0.689_767_334_985_1)
                * r
                + 1.676_384_830_183_803_8)
                * r
                + 2.053_191_626_637_759)
                * r
                + 1.0)
    } else {
        r -= 5.0;
        (((((((r * 2.010_334_399_292_288_1e-7 + 2.711_555_568_743_487_6e-5) * r
            + 0.001_242_660_947_388_078_4)
            * r
            + 0.026_532_189_526_576_124)
            * r
            + 0.296_560_571_828_504_9)
            * r
            + 1.784_826_539_917_291_3)
            * r
            + 5.463_784_911_164_114)
            * r
            + 6.657_904_643_501_103)
            / (((((((r * 2.044_263_103_389_939_7e-15 + 1.421_511_758_316_446e-7) * r
                + 1.846_318_317_510_054_8e-5)
                * r
                + 7.868_691_311_456_133e-4)
                * r
                + 0.014_875_361_290_850_615)
                * r
                + 0.136_929_880_922_735_8)
                * r
                + 0.599_832_206_555_888)
                * r
                + 1.0)
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

/// Truncation constants for a participation rate `alpha`.
///
/// Immutable once built; construct through [`SelectionContext::new`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionContext {
    alpha: f64,
    t_alpha: f64,
    phi_t: f64,
    mills: f64,
    xi: f64,
}

impl SelectionContext {
    /// Builds the context for `alpha ∈ [1e-6, 1]`.
    ///
    /// `alpha == 1` means no selection: the threshold is `-∞` and both the
    /// Mills ratio and `ξ` are exactly zero, so every bias formula collapses
    /// to the identity.
    pub fn new(alpha: f64) -> Result<Self> {
        if !alpha.is_finite() || alpha <= 0.0 || alpha > 1.0 {
            return Err(Error::invalid("alpha", format!("must lie in (0, 1], got {alpha}")));
        }
        if alpha < MIN_ALPHA {
            return Err(Error::invalid(
                "alpha",
                format!("{alpha} is below the supported minimum {MIN_ALPHA}"),
            ));
        }
        if alpha == 1.0 {
            return Ok(Self {
                alpha,
                t_alpha: f64::NEG_INFINITY,
                phi_t: 0.0,
                mills: 0.0,
                xi: 0.0,
            });
        }
        // Φ⁻¹(1 − α) = −Φ⁻¹(α) keeps precision for small α.
        let t_alpha = -std_normal_quantile(alpha)?;
        let phi_t = std_normal_pdf(t_alpha);
        let mills = phi_t / alpha;
        let xi = mills * (mills - t_alpha);
        Ok(Self { alpha, t_alpha, phi_t, mills, xi })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Participation threshold on the liability scale.
    pub fn t_alpha(&self) -> f64 {
        self.t_alpha
    }

    /// `φ(t_α)`.
    pub fn phi_t(&self) -> f64 {
        self.phi_t
    }

    /// `φ(t_α)/α`, the mean liability among participants.
    pub fn mills(&self) -> f64 {
        self.mills
    }

    /// `ξ(α) = mills² − t_α·mills`.
    pub fn xi(&self) -> f64 {
        self.xi
    }

    pub fn is_unselected(&self) -> bool {
        self.alpha == 1.0
    }

    /// Variance of the liability among participants, `1 − ξ(α)`.
    pub fn truncated_variance(&self) -> f64 {
        1.0 - self.xi
    }
}

/// `Var(X | X > t_α)` for a standard normal liability.
pub fn truncated_variance(alpha: f64) -> Result<f64> {
    Ok(SelectionContext::new(alpha)?.truncated_variance())
}

/// `Var` of a half-normal; handy closed form for `alpha = 0.5`.
pub fn half_normal_variance() -> f64 {
    1.0 - 2.0 / PI
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn pdf_reference_values() {
        assert_abs_diff_eq!(std_normal_pdf(0.0), 0.398_942_280_4, epsilon = 1e-10);
        assert_eq!(std_normal_pdf(1.0), std_normal_pdf(-1.0));
        // mpmath, 40 digits
        assert_abs_diff_eq!(
            std_normal_pdf(1.598),
            0.111_276_127_318_886_77,
            epsilon = 1e-16
        );
    }

    #[test]
    fn cdf_and_quantile_basics() {
        assert_eq!(std_normal_cdf(0.0), 0.5);
        assert_eq!(std_normal_quantile(0.5).unwrap(), 0.0);
        // mpmath root of Φ(x) = 0.945
        assert_abs_diff_eq!(
            std_normal_quantile(0.945).unwrap(),
            1.598_193_139_922_817_6,
            epsilon = 1e-14
        );
        for bad in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(std_normal_quantile(bad).is_err());
        }
    }

    #[test]
    fn context_edge_cases() {
        let c = SelectionContext::new(1.0).unwrap();
        assert_eq!(c.xi(), 0.0);
        assert_eq!(c.mills(), 0.0);
        assert!(c.is_unselected());
        assert_eq!(truncated_variance(1.0).unwrap(), 1.0);
        for bad in [0.0, -0.2, 1.0 + 1e-12, 5e-7, f64::NAN] {
            assert!(SelectionContext::new(bad).is_err(), "{bad}");
        }
        assert!(SelectionContext::new(MIN_ALPHA).is_ok());
    }

    #[test]
    fn half_normal_identity() {
        let c = SelectionContext::new(0.5).unwrap();
        assert_eq!(c.t_alpha(), 0.0);
        assert_abs_diff_eq!(c.xi(), 2.0 / PI, epsilon = 1e-15);
        assert_abs_diff_eq!(truncated_variance(0.5).unwrap(), half_normal_variance(), epsilon = 1e-15);
    }

    #[test]
    fn ukbb_rate_constants() {
        // mpmath at 40 digits
        let c = SelectionContext::new(0.055).unwrap();
        assert_abs_diff_eq!(c.t_alpha(), 1.598_193_139_922_817_6, epsilon = 1e-13);
        assert_abs_diff_eq!(c.mills(), 2.022_577_937_217_025, epsilon = 1e-13);
        assert_abs_diff_eq!(c.xi(), 0.858_351_327_897_582_8, epsilon = 1e-13);
    }

    #[test]
    fn xi_bounds_and_monotone() {
        let mut prev = f64::INFINITY;
        let mut alpha = 0.001;
        while alpha < 1.0 {
            let c = SelectionContext::new(alpha).unwrap();
            assert!(c.mills() > 0.0 && c.mills() > c.t_alpha());
            assert!((0.0..1.0).contains(&c.xi()), "xi({alpha}) = {}", c.xi());
            assert!(c.xi() < prev, "xi not decreasing at {alpha}");
            prev = c.xi();
            alpha += 0.001;
        }
        let near_one = SelectionContext::new(1.0 - 1e-9).unwrap();
        assert!(near_one.xi() < 1e-7);
    }

    #[test]
    fn quantile_inverts_cdf() {
        // Only the lower tail is representable to 1e-12 once mapped through
        // the CDF; the upper tail is checked through the symmetric identity.
        let mut x: f64 = -8.0;
        while x <= 8.0 {
            let back = if x <= 0.0 {
                std_normal_quantile(std_normal_cdf(x)).unwrap()
            } else {
                -std_normal_quantile(std_normal_cdf(-x)).unwrap()
            };
            assert!((back - x).abs() <= 1e-12, "x={x} back={back}");
            x += 0.01;
        }
        // Direct round trip where Φ(x) still resolves the difference.
        let mut x: f64 = 0.0;
        while x <= 3.0 {
            let back = std_normal_quantile(std_normal_cdf(x)).unwrap();
            assert!((back - x).abs() <= 1e-12, "x={x} back={back}");
            x += 0.01;
        }
    }
}
