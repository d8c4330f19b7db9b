//! Inverse problem: turn estimates computed on participants into
//! population-scale heritability and genetic correlations.
//!
//! The chain for one phenotype is
//!
//! 1. `ρ̂` from the observed mean shift `δ̂` ([`rho_from_delta`]),
//! 2. the sample genetic covariance with participation `ρ̂_G` and its
//!    adjusted version `ρ̃_G` ([`adjust_participation_gcov`]),
//! 3. `h̃²_y` ([`adjust_h2`]), then `ρ̃_g` and `ρ̃_e`.
//!
//! Pairs reuse the per-phenotype `ρ̂` and `ρ̃_G` ([`adjust_pair_gcov`]).
//! Participation heritability `ĥ²_x` is always an external input.
//!
//! Out-of-range results are returned unclamped inside a [`Flagged`] value so
//! that jackknife pseudo-values stay unbiased; clamp only for display.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::truncnorm::{std_normal_pdf, std_normal_quantile, SelectionContext};

/// A point estimate plus an optional range warning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Flagged {
    pub value: f64,
    pub warning: Option<String>,
}

impl Flagged {
    fn checked(value: f64, lo: f64, hi: f64, what: &str) -> Self {
        let warning = (value < lo || value > hi)
            .then(|| format!("{what} {value:.6} outside [{lo}, {hi}]"));
        Self { value, warning }
    }

    /// Value clamped into `[lo, hi]`, for human-readable tables.
    pub fn display_value(&self, lo: f64, hi: f64) -> f64 {
        self.value.clamp(lo, hi)
    }
}

fn require_finite(name: &str, v: f64) -> Result<()> {
    if !v.is_finite() {
        return Err(Error::invalid(name, format!("must be finite, got {v}")));
    }
    Ok(())
}

fn participation_denominator(h2_x_hat: f64, sel: &SelectionContext) -> Result<f64> {
    let d = 1.0 - sel.xi() * h2_x_hat;
    if d <= 0.0 {
        return Err(Error::Degenerate(format!("1 - xi*h2_x = {d} is not positive")));
    }
    Ok(d)
}

/// Phenotypic correlation with participation implied by a standardized mean
/// shift, `ρ̂ = αδ̂ / √(ξα²δ̂² + φ(t_α)²)`.
///
/// Requires actual selection (`α < 1`); without it the mean shift carries no
/// information about `ρ`.
pub fn rho_from_delta(delta_hat: f64, sel: &SelectionContext) -> Result<f64> {
    require_finite("delta", delta_hat)?;
    if sel.is_unselected() {
        return Err(Error::invalid(
            "alpha",
            "the mean shift does not identify rho when alpha = 1",
        ));
    }
    let ad = sel.alpha() * delta_hat;
    let phi = sel.phi_t();
    Ok(ad / (sel.xi() * ad * ad + phi * phi).sqrt())
}

/// Sample genetic covariance of participation and a phenotype,
/// `ρ̂_G = ρ̂_g·√((1 − ξĥ²_x)·ĥ²_x·ĥ²_y)`.
pub fn unadjusted_participation_gcov(
    rho_g_hat: f64,
    h2_x_hat: f64,
    h2_y_hat: f64,
    sel: &SelectionContext,
) -> Result<f64> {
    let dx = participation_denominator(h2_x_hat, sel)?;
    let v = dx * h2_x_hat * h2_y_hat;
    if v < 0.0 {
        return Err(Error::Degenerate(format!(
            "cannot form a genetic covariance from h2_x={h2_x_hat}, h2_y={h2_y_hat}"
        )));
    }
    Ok(rho_g_hat * v.sqrt())
}

/// Inverse of [`unadjusted_participation_gcov`]: the unadjusted genetic
/// correlation corresponding to a sample genetic covariance.
pub fn participation_gcor_from_gcov(
    gcov_hat: f64,
    h2_x_hat: f64,
    h2_y_hat: f64,
    sel: &SelectionContext,
) -> Result<f64> {
    let dx = participation_denominator(h2_x_hat, sel)?;
    let v = dx * h2_x_hat * h2_y_hat;
    if v <= 0.0 {
        return Err(Error::Degenerate(format!(
            "sample genetic variance product {v} is not positive"
        )));
    }
    Ok(gcov_hat / v.sqrt())
}

/// Adjusted genetic covariance of participation and a phenotype,
/// `ρ̃_G = √(1 − ξρ̂²)·ρ̂_G + ξρ̂ĥ²_x`.
pub fn adjust_participation_gcov(
    rho_g_hat: f64,
    h2_x_hat: f64,
    h2_y_hat: f64,
    rho_hat: f64,
    sel: &SelectionContext,
) -> Result<f64> {
    let rho_big_g_hat = unadjusted_participation_gcov(rho_g_hat, h2_x_hat, h2_y_hat, sel)?;
    let xi = sel.xi();
    let dy = 1.0 - xi * rho_hat * rho_hat;
    if dy <= 0.0 {
        return Err(Error::Degenerate(format!("1 - xi*rho^2 = {dy} is not positive")));
    }
    Ok(dy.sqrt() * rho_big_g_hat + xi * rho_hat * h2_x_hat)
}

/// Adjusted heritability `h̃²_y`.
pub fn adjust_h2(
    h2_y_hat: f64,
    rho_hat: f64,
    rho_big_g_tilde: f64,
    h2_x_hat: f64,
    sel: &SelectionContext,
) -> Result<Flagged> {
    let xi = sel.xi();
    let dx = participation_denominator(h2_x_hat, sel)?;
    let resid = rho_big_g_tilde - xi * rho_hat * h2_x_hat;
    let v = h2_y_hat * (1.0 - xi * rho_hat * rho_hat) + 2.0 * xi * rho_hat * rho_big_g_tilde
        - xi * xi * rho_hat * rho_hat * h2_x_hat
        - xi / dx * resid * resid;
    Ok(Flagged::checked(v, 0.0, 1.0, "adjusted h2"))
}

/// Adjusted genetic correlation with participation,
/// `ρ̃_g = ρ̃_G / √(ĥ²_x·h̃²_y)`.
pub fn adjust_participation_gcor(
    rho_big_g_tilde: f64,
    h2_x_hat: f64,
    h2_y_tilde: f64,
) -> Result<Flagged> {
    let d = h2_x_hat * h2_y_tilde;
    if !(d > 0.0) {
        return Err(Error::Degenerate(format!(
            "h2_x * adjusted h2_y = {d} leaves the genetic correlation undefined"
        )));
    }
    Ok(Flagged::checked(rho_big_g_tilde / d.sqrt(), -1.0, 1.0, "adjusted rho_g"))
}

/// Adjusted non-genetic correlation with participation,
/// `ρ̃_e = (ρ̂ − ρ̃_G) / √((1 − ĥ²_x)(1 − h̃²_y))`.
pub fn adjust_rho_e(
    rho_hat: f64,
    rho_big_g_tilde: f64,
    h2_x_hat: f64,
    h2_y_tilde: f64,
) -> Result<f64> {
    let d = (1.0 - h2_x_hat) * (1.0 - h2_y_tilde);
    if !(d > 0.0) {
        return Err(Error::Degenerate(format!(
            "(1 - h2_x)(1 - adjusted h2_y) = {d} leaves rho_e undefined"
        )));
    }
    Ok((rho_hat - rho_big_g_tilde) / d.sqrt())
}

/// Adjusted genetic correlation of two phenotypes,
/// `φ̃_g = φ̃_G / √(h̃²_y1·h̃²_y2)`.
pub fn adjust_pair_gcor(varphi_big_g_tilde: f64, h2_y1_tilde: f64, h2_y2_tilde: f64) -> Result<Flagged> {
    let d = h2_y1_tilde * h2_y2_tilde;
    if !(d > 0.0) {
        return Err(Error::Degenerate(format!(
            "product of adjusted heritabilities {d} is not positive"
        )));
    }
    Ok(Flagged::checked(varphi_big_g_tilde / d.sqrt(), -1.0, 1.0, "adjusted varphi_g"))
}

/// Unadjusted inputs for one phenotype.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhenotypeEstimates {
    pub h2_y: f64,
    pub rho_g: f64,
    /// Observed mean shift in participant-SD units.
    pub delta: Option<f64>,
}

/// Per-phenotype output of the adjustment chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjustedPhenotype {
    /// `ρ̂`, or `None` without selection.
    pub rho_hat: Option<f64>,
    pub rho_big_g_hat: f64,
    pub rho_big_g_tilde: f64,
    pub h2_y: Flagged,
    pub rho_g: Flagged,
    /// Not identifiable when `α = 1`.
    pub rho_e: Option<f64>,
    /// Input-side warnings, e.g. a negative unadjusted heritability.
    pub input_warnings: Vec<String>,
}

impl AdjustedPhenotype {
    pub fn warnings(&self) -> Vec<String> {
        let mut w = self.input_warnings.clone();
        w.extend(self.h2_y.warning.iter().cloned());
        w.extend(self.rho_g.warning.iter().cloned());
        w
    }
}

fn resolve_rho_hat(est: &PhenotypeEstimates, sel: &SelectionContext) -> Result<Option<f64>> {
    if sel.is_unselected() {
        return Ok(None);
    }
    let delta = est
        .delta
        .ok_or_else(|| Error::MissingInput("mean shift (delta) for phenotype".into()))?;
    rho_from_delta(delta, sel).map(Some)
}

/// Runs the full single-phenotype chain.
pub fn adjust_phenotype(
    est: &PhenotypeEstimates,
    h2_x_hat: f64,
    sel: &SelectionContext,
) -> Result<AdjustedPhenotype> {
    require_finite("h2_y", est.h2_y)?;
    require_finite("rho_g", est.rho_g)?;
    require_finite("h2_x", h2_x_hat)?;
    let mut input_warnings = Vec::new();
    if !(0.0..=1.0).contains(&est.h2_y) {
        input_warnings.push(format!("unadjusted h2 {} outside [0, 1]", est.h2_y));
    }
    if est.rho_g.abs() > 1.0 {
        input_warnings.push(format!("unadjusted rho_g {} outside [-1, 1]", est.rho_g));
    }
    let rho_hat = resolve_rho_hat(est, sel)?;
    let rho = rho_hat.unwrap_or(0.0);
    let rho_big_g_hat = unadjusted_participation_gcov(est.rho_g, h2_x_hat, est.h2_y, sel)?;
    let rho_big_g_tilde = adjust_participation_gcov(est.rho_g, h2_x_hat, est.h2_y, rho, sel)?;
    let h2_y = adjust_h2(est.h2_y, rho, rho_big_g_tilde, h2_x_hat, sel)?;
    let rho_g = adjust_participation_gcor(rho_big_g_tilde, h2_x_hat, h2_y.value)?;
    let rho_e = match rho_hat {
        Some(r) => Some(adjust_rho_e(r, rho_big_g_tilde, h2_x_hat, h2_y.value)?),
        None => None,
    };
    Ok(AdjustedPhenotype { rho_hat, rho_big_g_hat, rho_big_g_tilde, h2_y, rho_g, rho_e, input_warnings })
}

/// Adjusted genetic covariance of two phenotypes, `φ̃_G`.
///
/// The cross terms use each phenotype's adjusted covariance with
/// participation, `ρ̃_G`, which makes this the exact inverse of the forward
/// apparent pair correlation (and reduces to [`adjust_h2`] for a phenotype
/// paired with itself).
pub fn adjust_pair_gcov(
    varphi_g_hat: f64,
    y1: &PhenotypeEstimates,
    y2: &PhenotypeEstimates,
    h2_x_hat: f64,
    sel: &SelectionContext,
) -> Result<f64> {
    require_finite("varphi_g", varphi_g_hat)?;
    let a1 = adjust_phenotype(y1, h2_x_hat, sel)?;
    let a2 = adjust_phenotype(y2, h2_x_hat, sel)?;
    pair_gcov_from_parts(varphi_g_hat, y1, &a1, y2, &a2, h2_x_hat, sel)
}

pub(crate) fn pair_gcov_from_parts(
    varphi_g_hat: f64,
    y1: &PhenotypeEstimates,
    a1: &AdjustedPhenotype,
    y2: &PhenotypeEstimates,
    a2: &AdjustedPhenotype,
    h2_x_hat: f64,
    sel: &SelectionContext,
) -> Result<f64> {
    let xi = sel.xi();
    let dx = participation_denominator(h2_x_hat, sel)?;
    let r1 = a1.rho_hat.unwrap_or(0.0);
    let r2 = a2.rho_hat.unwrap_or(0.0);
    let g1 = a1.rho_big_g_tilde;
    let g2 = a2.rho_big_g_tilde;
    let prod = y1.h2_y * y2.h2_y;
    if prod < 0.0 {
        return Err(Error::Degenerate(format!(
            "unadjusted heritability product {prod} is negative"
        )));
    }
    let varphi_big_g_hat = varphi_g_hat * prod.sqrt();
    let scale = ((1.0 - xi * r1 * r1) * (1.0 - xi * r2 * r2)).sqrt();
    Ok(scale * varphi_big_g_hat + xi * (r1 * g2 + r2 * g1)
        - xi * xi * r1 * r2 * h2_x_hat
        - xi / dx * (g1 - xi * r1 * h2_x_hat) * (g2 - xi * r2 * h2_x_hat))
}

/// Output of the pairwise chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjustedPair {
    pub varphi_big_g_tilde: f64,
    pub varphi_g: Flagged,
}

/// Pairwise chain given both phenotypes' already adjusted results.
pub fn adjust_pair(
    varphi_g_hat: f64,
    y1: (&PhenotypeEstimates, &AdjustedPhenotype),
    y2: (&PhenotypeEstimates, &AdjustedPhenotype),
    h2_x_hat: f64,
    sel: &SelectionContext,
) -> Result<AdjustedPair> {
    require_finite("varphi_g", varphi_g_hat)?;
    let g = pair_gcov_from_parts(varphi_g_hat, y1.0, y1.1, y2.0, y2.1, h2_x_hat, sel)?;
    let varphi_g = adjust_pair_gcor(g, y1.1.h2_y.value, y2.1.h2_y.value)?;
    Ok(AdjustedPair { varphi_big_g_tilde: g, varphi_g })
}

/// Observed-scale to liability-scale heritability for a binary trait with
/// population prevalence `K` and sample prevalence `P`:
/// `h²_obs · K²(1−K)² / (P(1−P)·φ(Φ⁻¹(1−K))²)`.
pub fn observed_to_liability_h2(
    h2_obs: f64,
    sample_prevalence: f64,
    population_prevalence: f64,
) -> Result<f64> {
    require_finite("h2_obs", h2_obs)?;
    for (name, v) in [
        ("sample_prevalence", sample_prevalence),
        ("population_prevalence", population_prevalence),
    ] {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::invalid(name, format!("must lie in (0, 1), got {v}")));
        }
    }
    let k = population_prevalence;
    let p = sample_prevalence;
    let z = std_normal_pdf(std_normal_quantile(1.0 - k)?);
    Ok(h2_obs * (k * (1.0 - k)).powi(2) / (p * (1.0 - p) * z * z))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{self, PairParams, ParticipationParams, PhenotypeParams};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn sel(a: f64) -> SelectionContext {
        SelectionContext::new(a).unwrap()
    }

    /// Feeds exact forward-model outputs into the chain.
    fn forward(
        part: &ParticipationParams,
        y: &PhenotypeParams,
        s: &SelectionContext,
    ) -> PhenotypeEstimates {
        PhenotypeEstimates {
            h2_y: model::apparent_h2(part, y, s).unwrap(),
            rho_g: model::apparent_participation_gcor(part, y, s).unwrap(),
            delta: Some(model::mean_shift(y, part, s).unwrap()),
        }
    }

    #[test]
    fn rho_from_delta_basics() {
        let s = sel(0.1);
        assert_eq!(rho_from_delta(0.0, &s).unwrap(), 0.0);
        assert_eq!(rho_from_delta(0.7, &s).unwrap(), -rho_from_delta(-0.7, &s).unwrap());
        assert_abs_diff_eq!(rho_from_delta(1e6, &s).unwrap(), 1.0 / s.xi().sqrt(), epsilon = 1e-9);
        assert!(rho_from_delta(0.1, &sel(1.0)).is_err());
        let part = ParticipationParams::new(0.125).unwrap();
        let y = PhenotypeParams::new(0.5, 0.4, 0.4).unwrap();
        let rho = y.covariances(&part).total;
        let d = model::mean_shift(&y, &part, &s).unwrap();
        assert_abs_diff_eq!(rho_from_delta(d, &s).unwrap(), rho, epsilon = 1e-12);
    }

    #[test]
    fn rho_from_delta_bmi_row() {
        // mpmath evaluation at 40 digits
        let r = rho_from_delta(-0.138, &sel(0.055)).unwrap();
        assert_abs_diff_eq!(r, -0.068_093_844_552_322_5, epsilon = 1e-13);
    }

    #[test]
    fn gcov_edge_cases() {
        let s1 = sel(1.0);
        let g = adjust_participation_gcov(0.3, 0.125, 0.5, 0.0, &s1).unwrap();
        assert_abs_diff_eq!(g, 0.3 * (0.125f64 * 0.5).sqrt(), epsilon = 1e-15);
        let s = sel(0.1);
        let g = adjust_participation_gcov(0.0, 0.125, 0.5, 0.2, &s).unwrap();
        assert_abs_diff_eq!(g, s.xi() * 0.2 * 0.125, epsilon = 1e-15);
        assert!(g > 0.0);
    }

    #[test]
    fn chain_recovers_forward_model() {
        let part = ParticipationParams::new(0.125).unwrap();
        let y = PhenotypeParams::new(0.5, 0.3, 0.2).unwrap();
        let s = sel(0.1);
        let est = forward(&part, &y, &s);
        let adj = adjust_phenotype(&est, 0.125, &s).unwrap();
        assert_abs_diff_eq!(adj.rho_big_g_tilde, 0.3 * (0.125f64 * 0.5).sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(adj.h2_y.value, 0.5, epsilon = 1e-10);
        assert_abs_diff_eq!(adj.rho_g.value, 0.3, epsilon = 1e-10);
        assert_abs_diff_eq!(adj.rho_e.unwrap(), 0.2, epsilon = 1e-10);
        assert!(adj.warnings().is_empty());
    }

    #[test]
    fn no_selection_is_identity() {
        let est = PhenotypeEstimates { h2_y: 0.31, rho_g: -0.2, delta: None };
        let adj = adjust_phenotype(&est, 0.1, &sel(1.0)).unwrap();
        assert_abs_diff_eq!(adj.h2_y.value, 0.31, epsilon = 1e-15);
        assert_abs_diff_eq!(adj.rho_g.value, -0.2, epsilon = 1e-15);
        assert!(adj.rho_e.is_none());
    }

    #[test]
    fn missing_delta_is_an_error() {
        let est = PhenotypeEstimates { h2_y: 0.31, rho_g: -0.2, delta: None };
        assert!(matches!(adjust_phenotype(&est, 0.1, &sel(0.2)), Err(Error::MissingInput(_))));
    }

    #[test]
    fn small_pieces() {
        assert_eq!(adjust_participation_gcor(0.0, 0.1, 0.3).unwrap().value, 0.0);
        let neg = adjust_participation_gcor(-0.01, 0.1, 0.3).unwrap();
        assert!(neg.value < 0.0);
        assert!(adjust_participation_gcor(0.1, 0.1, 0.0).is_err());
        assert_eq!(adjust_rho_e(0.2, 0.2, 0.1, 0.3).unwrap(), 0.0);
        assert!(adjust_rho_e(0.2, 0.1, 0.1, 1.0).is_err());
        assert_eq!(adjust_pair_gcor(0.0, 0.2, 0.3).unwrap().value, 0.0);
        assert_abs_diff_eq!(adjust_pair_gcor(0.3, 0.3, 0.3).unwrap().value, 1.0, epsilon = 1e-15);
        let out = adjust_pair_gcor(0.5, 0.3, 0.3).unwrap();
        assert!(out.value > 1.0 && out.warning.is_some());
        assert_eq!(out.display_value(-1.0, 1.0), 1.0);
    }

    #[test]
    fn pair_chain_round_trip_and_self_pair() {
        let part = ParticipationParams::new(0.125).unwrap();
        let y1 = PhenotypeParams::new(0.5, 0.3, 0.3).unwrap();
        let y2 = PhenotypeParams::new(0.4, -0.2, 0.25).unwrap();
        let pair = PairParams::new(y1, y2, 0.4, 0.2).unwrap();
        for a in [0.02, 0.055, 0.1, 0.25, 0.5] {
            let s = sel(a);
            let e1 = forward(&part, &y1, &s);
            let e2 = forward(&part, &y2, &s);
            let phi_hat = model::apparent_pair_gcor(&part, &pair, &s).unwrap();
            let g = adjust_pair_gcov(phi_hat, &e1, &e2, 0.125, &s).unwrap();
            assert_abs_diff_eq!(g, pair.varphi_big_g(), epsilon = 1e-10);
            let a1 = adjust_phenotype(&e1, 0.125, &s).unwrap();
            let a2 = adjust_phenotype(&e2, 0.125, &s).unwrap();
            let out = adjust_pair(phi_hat, (&e1, &a1), (&e2, &a2), 0.125, &s).unwrap();
            assert_abs_diff_eq!(out.varphi_g.value, 0.4, epsilon = 1e-10);

            let self_g = adjust_pair_gcov(1.0, &e1, &e1, 0.125, &s).unwrap();
            assert_abs_diff_eq!(self_g, a1.h2_y.value, epsilon = 1e-10);
            let self_pair = adjust_pair(1.0, (&e1, &a1), (&e1, &a1), 0.125, &s).unwrap();
            assert_abs_diff_eq!(self_pair.varphi_g.value, 1.0, epsilon = 1e-10);
        }
        let s1 = sel(1.0);
        let e = PhenotypeEstimates { h2_y: 0.3, rho_g: 0.1, delta: None };
        let f = PhenotypeEstimates { h2_y: 0.2, rho_g: 0.4, delta: None };
        let g = adjust_pair_gcov(0.25, &e, &f, 0.1, &s1).unwrap();
        assert_abs_diff_eq!(g, 0.25 * (0.3f64 * 0.2).sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn adjusted_values_are_continuous_in_delta() {
        let s = sel(0.055);
        let mut prev: Option<AdjustedPhenotype> = None;
        for i in -400..=400 {
            let est = PhenotypeEstimates { h2_y: 0.25, rho_g: -0.2, delta: Some(i as f64 * 0.001) };
            let cur = adjust_phenotype(&est, 0.1, &s).unwrap();
            if let Some(p) = prev {
                assert!((cur.h2_y.value - p.h2_y.value).abs() < 1e-3);
                assert!((cur.rho_g.value - p.rho_g.value).abs() < 1e-3);
                assert!((cur.rho_e.unwrap() - p.rho_e.unwrap()).abs() < 1e-3);
            }
            prev = Some(cur);
        }
    }

    #[test]
    fn liability_scale_conversion() {
        let f = observed_to_liability_h2(1.0, 0.5, 0.5).unwrap();
        assert_abs_diff_eq!(f, 0.25 / std_normal_pdf(0.0).powi(2), epsilon = 1e-14);
        assert_abs_diff_eq!(f, PI / 2.0, epsilon = 1e-14);
        let k: f64 = 0.2;
        let z = std_normal_pdf(std_normal_quantile(0.8).unwrap());
        assert_abs_diff_eq!(
            observed_to_liability_h2(1.0, k, k).unwrap(),
            k * (1.0 - k) / (z * z),
            epsilon = 1e-14
        );
        assert!(observed_to_liability_h2(0.1, 0.0, 0.2).is_err());
        assert!(observed_to_liability_h2(0.1, 0.3, 1.0).is_err());
    }
}
