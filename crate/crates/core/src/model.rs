//! Population-scale parameterization of participation and phenotypes, and the
//! forward "apparent" quantities an unadjusted analysis of participants
//! estimates.
//!
//! All quantities are on the population-standardized scale: `X` (liability)
//! and every `Y` have mean zero and unit variance in the invited population.
//! Each variable splits into an additive genetic part and an orthogonal
//! remainder, `X = G_x + ε_x`, `Y = G_y + ε_y`.

use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::truncnorm::SelectionContext;

/// Participation heritability used for the reference curves.
pub const CURVE_H2_X: f64 = 0.125;
/// Phenotype heritability used for the reference curves.
pub const CURVE_H2_Y: f64 = 0.5;

/// Eigenvalues above this (negative) bound count as non-negative.
pub const PSD_TOLERANCE: f64 = -1e-10;

fn check_unit(name: &str, v: f64, lo: f64, hi: f64) -> Result<()> {
    if !v.is_finite() || v < lo || v > hi {
        return Err(Error::invalid(name, format!("must lie in [{lo}, {hi}], got {v}")));
    }
    Ok(())
}

/// Heritability of the participation liability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParticipationParams {
    h2_x: f64,
}

impl ParticipationParams {
    pub fn new(h2_x: f64) -> Result<Self> {
        if !h2_x.is_finite() || h2_x <= 0.0 || h2_x >= 1.0 {
            return Err(Error::invalid("h2_x", format!("must lie in (0, 1), got {h2_x}")));
        }
        Ok(Self { h2_x })
    }

    pub fn h2_x(&self) -> f64 {
        self.h2_x
    }
}

/// One phenotype relative to participation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhenotypeParams {
    h2_y: f64,
    rho_g: f64,
    rho_e: f64,
}

/// Covariances of a phenotype with the liability components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiabilityCovariances {
    /// `ρ_G = Cov(G_x, G_y)`.
    pub genetic: f64,
    /// `ρ_E = Cov(ε_x, ε_y)`.
    pub environmental: f64,
    /// Phenotypic correlation `ρ = ρ_G + ρ_E`.
    pub total: f64,
}

impl PhenotypeParams {
    pub fn new(h2_y: f64, rho_g: f64, rho_e: f64) -> Result<Self> {
        check_unit("h2_y", h2_y, 0.0, 1.0)?;
        check_unit("rho_g", rho_g, -1.0, 1.0)?;
        check_unit("rho_e", rho_e, -1.0, 1.0)?;
        Ok(Self { h2_y, rho_g, rho_e })
    }

    pub fn h2_y(&self) -> f64 {
        self.h2_y
    }

    pub fn rho_g(&self) -> f64 {
        self.rho_g
    }

    pub fn rho_e(&self) -> f64 {
        self.rho_e
    }

    pub fn covariances(&self, part: &ParticipationParams) -> LiabilityCovariances {
        let h2_x = part.h2_x;
        let genetic = self.rho_g * (h2_x * self.h2_y).sqrt();
        let environmental = self.rho_e * ((1.0 - h2_x) * (1.0 - self.h2_y)).sqrt();
        LiabilityCovariances { genetic, environmental, total: genetic + environmental }
    }
}

/// Coefficients of the orthogonal reparameterization
/// `G_y = a·G_x + G_w`, `ε_y = b·ε_x + ε_w`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReparamCoeffs {
    pub a: f64,
    pub b: f64,
    /// Coefficient of `G_x` in the genetic component seen among participants.
    pub a_prime: f64,
    pub var_gw: f64,
    pub var_ew: f64,
}

/// Two phenotypes together with their mutual genetic and non-genetic
/// correlations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairParams {
    y1: PhenotypeParams,
    y2: PhenotypeParams,
    varphi_g: f64,
    varphi_e: f64,
}

impl PairParams {
    /// Validates ranges and that both the genetic correlation matrix of
    /// `(G_x, G_y1, G_y2)` and the non-genetic one of `(ε_x, ε_y1, ε_y2)` are
    /// positive semidefinite.
    pub fn new(
        y1: PhenotypeParams,
        y2: PhenotypeParams,
        varphi_g: f64,
        varphi_e: f64,
    ) -> Result<Self> {
        check_unit("varphi_g", varphi_g, -1.0, 1.0)?;
        check_unit("varphi_e", varphi_e, -1.0, 1.0)?;
        check_psd("genetic", &[y1.rho_g, y2.rho_g], &[(0, 1, varphi_g)])?;
        check_psd("non-genetic", &[y1.rho_e, y2.rho_e], &[(0, 1, varphi_e)])?;
        Ok(Self { y1, y2, varphi_g, varphi_e })
    }

    pub fn y1(&self) -> &PhenotypeParams {
        &self.y1
    }

    pub fn y2(&self) -> &PhenotypeParams {
        &self.y2
    }

    pub fn varphi_g(&self) -> f64 {
        self.varphi_g
    }

    pub fn varphi_e(&self) -> f64 {
        self.varphi_e
    }

    /// Genetic covariance `φ_G = φ_g·√(h²_y1·h²_y2)`.
    pub fn varphi_big_g(&self) -> f64 {
        self.varphi_g * (self.y1.h2_y * self.y2.h2_y).sqrt()
    }
}

/// Checks that the correlation matrix of the liability component and `k`
/// phenotype components is PSD. `with_x[i]` is the correlation of phenotype
/// `i` with the liability; `pairs` lists `(i, j, corr)` between phenotypes.
pub(crate) fn check_psd(
    block: &'static str,
    with_x: &[f64],
    pairs: &[(usize, usize, f64)],
) -> Result<()> {
    let corr = correlation_matrix(with_x, pairs);
    let min = SymmetricEigen::new(corr)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if min < PSD_TOLERANCE {
        return Err(Error::NotPsd { block, min_eigenvalue: min });
    }
    Ok(())
}

pub(crate) fn correlation_matrix(
    with_x: &[f64],
    pairs: &[(usize, usize, f64)],
) -> nalgebra::DMatrix<f64> {
    let k = with_x.len() + 1;
    let mut m = nalgebra::DMatrix::<f64>::identity(k, k);
    for (i, &r) in with_x.iter().enumerate() {
        m[(0, i + 1)] = r;
        m[(i + 1, 0)] = r;
    }
    for &(i, j, r) in pairs {
        m[(i + 1, j + 1)] = r;
        m[(j + 1, i + 1)] = r;
    }
    m
}

fn selection_denominators(h2_x: f64, rho: f64, sel: &SelectionContext) -> Result<(f64, f64)> {
    let xi = sel.xi();
    let dx = 1.0 - xi * h2_x;
    let dy = 1.0 - xi * rho * rho;
    if dx <= 0.0 {
        return Err(Error::Degenerate(format!("1 - xi*h2_x = {dx} is not positive")));
    }
    if dy <= 0.0 {
        return Err(Error::Degenerate(format!("1 - xi*rho^2 = {dy} is not positive")));
    }
    Ok((dx, dy))
}

/// Variance of `Y` explained by its genetic component among participants,
/// on the population scale (the numerator of the apparent heritability).
pub fn apparent_genetic_variance(
    part: &ParticipationParams,
    y: &PhenotypeParams,
    sel: &SelectionContext,
) -> Result<f64> {
    let c = y.covariances(part);
    let (dx, _) = selection_denominators(part.h2_x, c.total, sel)?;
    let xi = sel.xi();
    Ok(y.h2_y - xi * c.genetic * (c.genetic + 2.0 * c.environmental)
        + xi * xi * part.h2_x * c.environmental * c.environmental / dx)
}

/// Heritability an unadjusted analysis of participants targets, `h²_{y,PB}`.
pub fn apparent_h2(
    part: &ParticipationParams,
    y: &PhenotypeParams,
    sel: &SelectionContext,
) -> Result<f64> {
    let c = y.covariances(part);
    let (_, dy) = selection_denominators(part.h2_x, c.total, sel)?;
    Ok(apparent_genetic_variance(part, y, sel)? / dy)
}

/// Apparent genetic correlation of two phenotypes among participants,
/// `φ_{g,PB}`.
pub fn apparent_pair_gcor(
    part: &ParticipationParams,
    pair: &PairParams,
    sel: &SelectionContext,
) -> Result<f64> {
    let xi = sel.xi();
    let h2_x = part.h2_x;
    let c1 = pair.y1.covariances(part);
    let c2 = pair.y2.covariances(part);
    let (dx, dy1) = selection_denominators(h2_x, c1.total, sel)?;
    let (_, dy2) = selection_denominators(h2_x, c2.total, sel)?;
    let h1 = apparent_h2(part, &pair.y1, sel)?;
    let h2 = apparent_h2(part, &pair.y2, sel)?;
    if h1 <= 0.0 || h2 <= 0.0 {
        return Err(Error::Degenerate(format!(
            "apparent heritabilities must be positive, got {h1} and {h2}"
        )));
    }
    let numerator = pair.varphi_big_g()
        - xi * (c1.environmental * c2.genetic
            + c2.environmental * c1.genetic
            + c1.genetic * c2.genetic)
        + xi * xi * h2_x * c1.environmental * c2.environmental / dx;
    Ok(numerator / ((dy1 * dy2).sqrt() * (h1 * h2).sqrt()))
}

/// Apparent genetic correlation between participation and a phenotype,
/// `ρ_{g,PB}`.
pub fn apparent_participation_gcor(
    part: &ParticipationParams,
    y: &PhenotypeParams,
    sel: &SelectionContext,
) -> Result<f64> {
    let xi = sel.xi();
    let h2_x = part.h2_x;
    let c = y.covariances(part);
    let (dx, dy) = selection_denominators(h2_x, c.total, sel)?;
    let h_pb = apparent_h2(part, y, sel)?;
    if h_pb <= 0.0 {
        return Err(Error::Degenerate(format!("apparent heritability is {h_pb}")));
    }
    Ok((c.genetic - xi * h2_x * c.total) / ((dy * dx).sqrt() * (h2_x * h_pb).sqrt()))
}

/// Mean of `Y` among participants in units of its participant standard
/// deviation, `δ = ρ·φ(t_α) / (α·√(1 − ξρ²))`.
pub fn mean_shift(
    y: &PhenotypeParams,
    part: &ParticipationParams,
    sel: &SelectionContext,
) -> Result<f64> {
    let rho = y.covariances(part).total;
    let (_, dy) = selection_denominators(part.h2_x, rho, sel)?;
    Ok(rho * sel.mills() / dy.sqrt())
}

pub fn reparam(
    part: &ParticipationParams,
    y: &PhenotypeParams,
    sel: &SelectionContext,
) -> Result<ReparamCoeffs> {
    let h2_x = part.h2_x;
    let h2_y = y.h2_y;
    let (dx, _) = selection_denominators(h2_x, y.covariances(part).total, sel)?;
    let a = y.rho_g * (h2_y / h2_x).sqrt();
    let b = y.rho_e * ((1.0 - h2_y) / (1.0 - h2_x)).sqrt();
    // Regression of Y on (G_x, G_w) among participants: ε_x leaks into the
    // G_x coefficient through Cov(G_x, ε_x | sel) = −ξ h²_x (1 − h²_x).
    let a_prime = a - sel.xi() * b * (1.0 - h2_x) / dx;
    Ok(ReparamCoeffs {
        a,
        b,
        a_prime,
        var_gw: (1.0 - y.rho_g * y.rho_g) * h2_y,
        var_ew: (1.0 - y.rho_e * y.rho_e) * (1.0 - h2_y),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    const ALPHAS: [f64; 6] = [0.02, 0.055, 0.1, 0.25, 0.5, 1.0];

    fn part() -> ParticipationParams {
        ParticipationParams::new(CURVE_H2_X).unwrap()
    }

    fn sel(a: f64) -> SelectionContext {
        SelectionContext::new(a).unwrap()
    }

    #[test]
    fn parameter_validation() {
        assert!(ParticipationParams::new(0.0).is_err());
        assert!(ParticipationParams::new(1.0).is_err());
        assert!(PhenotypeParams::new(1.1, 0.0, 0.0).is_err());
        assert!(PhenotypeParams::new(0.5, -1.2, 0.0).is_err());
        let y = PhenotypeParams::new(0.5, 0.9, 0.9).unwrap();
        let z = PhenotypeParams::new(0.5, -0.9, -0.9).unwrap();
        // Both strongly tied to X with opposite signs cannot be positively
        // correlated with each other.
        let err = PairParams::new(y, z, 0.9, 0.0).unwrap_err();
        assert!(matches!(err, Error::NotPsd { block: "genetic", .. }));
        assert!(PairParams::new(y, z, -0.9, -0.9).is_ok());
    }

    #[test]
    fn reparam_identities() {
        let y = PhenotypeParams::new(0.5, 0.3, 0.3).unwrap();
        let r = reparam(&part(), &y, &sel(0.1)).unwrap();
        assert_eq!(r.a.signum(), r.b.signum());
        assert_abs_diff_eq!(r.var_gw + r.a * r.a * CURVE_H2_X, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(r.var_ew + r.b * r.b * (1.0 - CURVE_H2_X), 0.5, epsilon = 1e-15);
        assert!(r.a_prime < r.a);
        let r1 = reparam(&part(), &y, &sel(1.0)).unwrap();
        assert_eq!(r1.a_prime, r1.a);
    }

    #[test]
    fn independent_phenotype_is_untouched() {
        let y = PhenotypeParams::new(0.5, 0.0, 0.0).unwrap();
        for a in ALPHAS {
            assert_abs_diff_eq!(apparent_h2(&part(), &y, &sel(a)).unwrap(), 0.5, epsilon = 1e-15);
            assert_eq!(mean_shift(&y, &part(), &sel(a)).unwrap(), 0.0);
        }
    }

    #[test]
    fn no_selection_is_identity() {
        let y1 = PhenotypeParams::new(0.5, 0.3, 0.3).unwrap();
        let y2 = PhenotypeParams::new(0.4, -0.2, 0.1).unwrap();
        let pair = PairParams::new(y1, y2, 0.4, 0.2).unwrap();
        let s = sel(1.0);
        assert_abs_diff_eq!(apparent_h2(&part(), &y1, &s).unwrap(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(apparent_pair_gcor(&part(), &pair, &s).unwrap(), 0.4, epsilon = 1e-15);
        assert_abs_diff_eq!(
            apparent_participation_gcor(&part(), &y2, &s).unwrap(),
            -0.2,
            epsilon = 1e-15
        );
    }

    #[test]
    fn self_pair_has_unit_correlation() {
        let y = PhenotypeParams::new(0.5, 0.3, 0.3).unwrap();
        let pair = PairParams::new(y, y, 1.0, 1.0).unwrap();
        for a in ALPHAS {
            assert_abs_diff_eq!(
                apparent_pair_gcor(&part(), &pair, &sel(a)).unwrap(),
                1.0,
                epsilon = 1e-13
            );
        }
    }

    #[test]
    fn non_genetic_correlation_inflates_heritability() {
        let y = PhenotypeParams::new(0.5, 0.0, 0.5).unwrap();
        let h = apparent_h2(&part(), &y, &sel(0.1)).unwrap();
        assert!(h > 0.5, "{h}");
        let g = apparent_participation_gcor(&part(), &y, &sel(0.1)).unwrap();
        assert!(g < 0.0);
    }

    #[test]
    fn direction_of_bias_on_grid() {
        for a in [0.02, 0.055, 0.1, 0.25, 0.5] {
            for r in [-0.9, -0.5, -0.1, 0.1, 0.5, 0.9] {
                let genetic_only = PhenotypeParams::new(0.5, r, 0.0).unwrap();
                assert!(apparent_h2(&part(), &genetic_only, &sel(a)).unwrap() <= 0.5);
                let env_only = PhenotypeParams::new(0.5, 0.0, r).unwrap();
                assert!(apparent_h2(&part(), &env_only, &sel(a)).unwrap() >= 0.5);
                let g = apparent_participation_gcor(&part(), &env_only, &sel(a)).unwrap();
                assert_eq!(g.signum(), -r.signum());
            }
        }
    }

    #[test]
    fn mean_shift_increases_with_rho() {
        let p = part();
        for a in [0.02, 0.1, 0.5] {
            let s = sel(a);
            let mut prev = f64::NEG_INFINITY;
            for i in 0..=200 {
                let rho_e = -1.0 + i as f64 * 0.01;
                let y = PhenotypeParams::new(0.5, 0.4, rho_e).unwrap();
                let d = mean_shift(&y, &p, &s).unwrap();
                assert!(d > prev);
                prev = d;
            }
        }
    }

    #[test]
    fn bias_grows_as_participation_falls() {
        let p = part();
        let grid = [-0.8, -0.3, 0.3, 0.8];
        let alphas: Vec<f64> = (0..50).map(|i| 1.0 - i as f64 * 0.0196).collect();
        for &rg in &grid {
            for &re in &grid {
                let y1 = PhenotypeParams::new(CURVE_H2_Y, rg, re).unwrap();
                let y2 = PhenotypeParams::new(CURVE_H2_Y, rg * 0.5, re).unwrap();
                let vg = 0.5 * rg * rg + 0.3 * ((1.0 - rg * rg) * (1.0 - 0.25 * rg * rg)).sqrt();
                let pair = PairParams::new(y1, y2, vg, re * re).unwrap();
                let mut prev = [0.0f64; 3];
                for &a in &alphas {
                    let s = sel(a);
                    let cur = [
                        (apparent_h2(&p, &y1, &s).unwrap() - CURVE_H2_Y).abs(),
                        (apparent_participation_gcor(&p, &y1, &s).unwrap() - rg).abs(),
                        (apparent_pair_gcor(&p, &pair, &s).unwrap() - vg).abs(),
                    ];
                    // The pair correlation bias is only checked for moderate
                    // non-genetic correlation; see the test below.
                    let checked = if re.abs() <= 0.5 { 3 } else { 2 };
                    for k in 0..checked {
                        assert!(cur[k] >= prev[k] - 1e-14, "rg={rg} re={re} a={a} k={k}");
                    }
                    prev = cur;
                }
            }
        }
    }

    #[test]
    fn pair_gcor_bias_can_peak_at_moderate_participation() {
        // With strong non-genetic correlation and weak genetic correlation of
        // opposite sign to nothing in particular, |φ_g,PB − φ_g| reaches its
        // maximum near α ≈ 0.25 and then shrinks slightly.
        let p = part();
        let (rg, re) = (0.3, 0.8);
        let y1 = PhenotypeParams::new(CURVE_H2_Y, rg, re).unwrap();
        let y2 = PhenotypeParams::new(CURVE_H2_Y, rg * 0.5, re).unwrap();
        let vg = 0.5 * rg * rg + 0.3 * ((1.0 - rg * rg) * (1.0 - 0.25 * rg * rg)).sqrt();
        let pair = PairParams::new(y1, y2, vg, re * re).unwrap();
        let bias = |a: f64| (apparent_pair_gcor(&p, &pair, &sel(a)).unwrap() - vg).abs();
        assert!(bias(0.25) > bias(1.0));
        assert!(bias(0.05) < bias(0.25));
    }

    proptest! {
        #[test]
        fn participation_gcor_is_special_case_of_pair_gcor(
            h2_x in 0.02f64..0.98,
            h2_y in 0.02f64..0.98,
            rho_g in -0.95f64..0.95,
            rho_e in -0.95f64..0.95,
            ai in 0usize..6,
        ) {
            let p = ParticipationParams::new(h2_x).unwrap();
            let s = SelectionContext::new(ALPHAS[ai]).unwrap();
            let y = PhenotypeParams::new(h2_y, rho_g, rho_e).unwrap();
            let as_x = PhenotypeParams::new(h2_x, 1.0, 1.0).unwrap();
            let pair = PairParams::new(as_x, y, rho_g, rho_e).unwrap();
            let direct = apparent_participation_gcor(&p, &y, &s).unwrap();
            let via_pair = apparent_pair_gcor(&p, &pair, &s).unwrap();
            prop_assert!((direct - via_pair).abs() <= 1e-12, "{direct} vs {via_pair}");
        }

        #[test]
        fn apparent_values_stay_in_range(
            h2_x in 0.01f64..0.99,
            h2_y in 0.01f64..0.99,
            rho_g in -1.0f64..1.0,
            rho_e in -1.0f64..1.0,
            alpha in 0.001f64..1.0,
        ) {
            let p = ParticipationParams::new(h2_x).unwrap();
            let s = SelectionContext::new(alpha).unwrap();
            let y = PhenotypeParams::new(h2_y, rho_g, rho_e).unwrap();
            let h = apparent_h2(&p, &y, &s).unwrap();
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&h));
            let g = apparent_participation_gcor(&p, &y, &s).unwrap();
            prop_assert!(g.abs() <= 1.0 + 1e-9);
        }
    }
}
