//! `forward-curves`: apparent heritability, participation genetic
//! correlation, pair genetic correlation and mean shift over a grid of
//! selection rates and genetic architectures.
//!
//! Configuration (all keys optional, lists comma separated):
//!
//! ```text
//! [curves]
//! h2x = 0.125
//! h2y = 0.5
//! alphas = 0.05, 0.1, 0.5, 1
//! rho_g = -0.5, 0, 0.5
//! rho_e = -0.5, 0, 0.5
//! varphi_g = -0.5, 0, 0.5
//! varphi_e = 0, 0.5
//! ```
//!
//! Grid points that are not valid parameter sets are kept as rows with an
//! empty `apparent` value and a warning.

use anyhow::Result;
use partbias_core::io::formats::csv_to_string;
use partbias_core::io::Config;
use partbias_core::model::{
    apparent_h2, apparent_pair_gcor, apparent_participation_gcor, mean_shift, CURVE_H2_X, CURVE_H2_Y,
};
use partbias_core::{PairParams, ParticipationParams, PhenotypeParams, SelectionContext};

use crate::manifest::Run;
use crate::settings::{self, num};
use crate::Cli;

pub const H2_FILE: &str = "curves_h2.csv";
pub const PARTICIPATION_FILE: &str = "curves_participation_gcor.csv";
pub const PAIR_FILE: &str = "curves_pair_gcor.csv";
pub const MEAN_SHIFT_FILE: &str = "curves_mean_shift.csv";

pub const PHENOTYPE_HEADER: [&str; 8] =
    ["alpha", "h2_x", "h2_y", "rho_g", "rho_e", "population", "apparent", "warning"];
pub const PAIR_HEADER: [&str; 12] = [
    "alpha", "h2_x", "h2_y", "rho_g1", "rho_e1", "rho_g2", "rho_e2", "varphi_g", "varphi_e", "population",
    "apparent", "warning",
];

#[derive(Debug, Clone, PartialEq)]
pub struct CurveGrid {
    pub h2x: Vec<f64>,
    pub h2y: Vec<f64>,
    pub alphas: Vec<f64>,
    pub rho_g: Vec<f64>,
    pub rho_e: Vec<f64>,
    pub varphi_g: Vec<f64>,
    pub varphi_e: Vec<f64>,
}

impl Default for CurveGrid {
    fn default() -> Self {
        Self {
            h2x: vec![CURVE_H2_X],
            h2y: vec![CURVE_H2_Y],
            alphas: (1..=100).map(|i| i as f64 / 100.0).collect(),
            rho_g: vec![-0.5, 0.0, 0.5],
            rho_e: vec![-0.5, 0.0, 0.5],
            varphi_g: vec![-0.5, 0.0, 0.5],
            varphi_e: vec![0.0, 0.5],
        }
    }
}

impl CurveGrid {
    pub fn from_config(cfg: Option<&Config>) -> Result<Self> {
        let mut g = Self::default();
        let Some(cfg) = cfg else { return Ok(g) };
        let Some(sec) = cfg.section("curves") else { return Ok(g) };
        for (key, slot) in [
            ("h2x", &mut g.h2x),
            ("h2y", &mut g.h2y),
            ("alphas", &mut g.alphas),
            ("rho_g", &mut g.rho_g),
            ("rho_e", &mut g.rho_e),
            ("varphi_g", &mut g.varphi_g),
            ("varphi_e", &mut g.varphi_e),
        ] {
            if let Some(v) = sec.f64_list(cfg, key)? {
                if v.is_empty() {
                    return Err(settings::invalid(key, "empty list").into());
                }
                *slot = v;
            }
        }
        Ok(g)
    }

    fn architectures(&self) -> Vec<(f64, f64)> {
        self.rho_g.iter().flat_map(|&g| self.rho_e.iter().map(move |&e| (g, e))).collect()
    }
}

/// Curve tables as CSV text, in file order `h2`, participation, pair, mean shift.
pub struct Curves {
    pub h2: String,
    pub participation: String,
    pub pair: String,
    pub mean_shift: String,
    pub skipped: usize,
}

fn phenotype_row(
    alpha: f64,
    hx: f64,
    hy: f64,
    (rg, re): (f64, f64),
    population: impl Fn(&PhenotypeParams) -> f64,
    apparent: impl Fn(&ParticipationParams, &PhenotypeParams, &SelectionContext) -> partbias_core::Result<f64>,
) -> (Vec<String>, bool) {
    let mut row = vec![num(alpha), num(hx), num(hy), num(rg), num(re)];
    let value = ParticipationParams::new(hx)
        .and_then(|p| PhenotypeParams::new(hy, rg, re).map(|y| (p, y)))
        .and_then(|(p, y)| {
            let sel = SelectionContext::new(alpha)?;
            Ok((population(&y), apparent(&p, &y, &sel)?))
        });
    match value {
        Ok((pop, app)) => {
            row.extend([num(pop), num(app), String::new()]);
            (row, true)
        }
        Err(e) => {
            row.extend([String::new(), String::new(), e.to_string()]);
            (row, false)
        }
    }
}

pub fn compute(grid: &CurveGrid) -> Result<Curves> {
    let archs = grid.architectures();
    let mut h2 = Vec::new();
    let mut part = Vec::new();
    let mut shift = Vec::new();
    let mut pair = Vec::new();
    let mut skipped = 0;
    for &hx in &grid.h2x {
        for &hy in &grid.h2y {
            for &arch in &archs {
                for &alpha in &grid.alphas {
                    let (r, ok) = phenotype_row(alpha, hx, hy, arch, |y| y.h2_y(), apparent_h2);
                    skipped += usize::from(!ok);
                    h2.push(r);
                    part.push(phenotype_row(alpha, hx, hy, arch, |y| y.rho_g(), apparent_participation_gcor).0);
                    shift.push(phenotype_row(alpha, hx, hy, arch, |_| 0.0, |p, y, s| mean_shift(y, p, s)).0);
                }
            }
            for (i, &a1) in archs.iter().enumerate() {
                for &a2 in &archs[i..] {
                    for &vg in &grid.varphi_g {
                        for &ve in &grid.varphi_e {
                            for &alpha in &grid.alphas {
                                let mut row = [hx, hy, a1.0, a1.1, a2.0, a2.1, vg, ve].map(num).to_vec();
                                row.insert(0, num(alpha));
                                let value = (|| {
                                    let p = ParticipationParams::new(hx)?;
                                    let y1 = PhenotypeParams::new(hy, a1.0, a1.1)?;
                                    let y2 = PhenotypeParams::new(hy, a2.0, a2.1)?;
                                    let pp = PairParams::new(y1, y2, vg, ve)?;
                                    let sel = SelectionContext::new(alpha)?;
                                    apparent_pair_gcor(&p, &pp, &sel)
                                })();
                                match value {
                                    Ok(v) => row.extend([num(vg), num(v), String::new()]),
                                    Err(e) => {
                                        skipped += 1;
                                        row.extend([String::new(), String::new(), e.to_string()]);
                                    }
                                }
                                pair.push(row);
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(Curves {
        h2: csv_to_string(&PHENOTYPE_HEADER, &h2)?,
        participation: csv_to_string(&PHENOTYPE_HEADER, &part)?,
        pair: csv_to_string(&PAIR_HEADER, &pair)?,
        mean_shift: csv_to_string(&PHENOTYPE_HEADER, &shift)?,
        skipped,
    })
}

pub fn run(cli: &Cli) -> Result<()> {
    let cfg = settings::load(cli)?;
    let grid = CurveGrid::from_config(cfg.as_ref())?;
    let mut run = Run::start(&cli.out_dir, cli.command.name(), cli.config.as_deref())?;
    let c = compute(&grid)?;
    if c.skipped > 0 {
        run.warn(format!("{} grid points are not valid parameter sets and were skipped", c.skipped));
    }
    run.write(H2_FILE, &c.h2)?;
    run.write(PARTICIPATION_FILE, &c.participation)?;
    run.write(PAIR_FILE, &c.pair)?;
    run.write(MEAN_SHIFT_FILE, &c.mean_shift)?;
    run.finish()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_has_unit_alpha_row_equal_to_population() {
        let c = compute(&CurveGrid::default()).unwrap();
        for line in c.h2.lines().skip(1).filter(|l| l.starts_with("1,")) {
            let f: Vec<&str> = line.split(',').collect();
            let (pop, app): (f64, f64) = (f[5].parse().unwrap(), f[6].parse().unwrap());
            assert!((pop - app).abs() < 1e-14, "{line}");
        }
        assert_eq!(c.skipped, 0);
    }

    #[test]
    fn invalid_points_become_warning_rows() {
        let grid = CurveGrid {
            rho_g: vec![0.9],
            rho_e: vec![0.0],
            varphi_g: vec![-0.9],
            varphi_e: vec![0.0],
            alphas: vec![0.5],
            ..CurveGrid::default()
        };
        let c = compute(&grid).unwrap();
        assert_eq!(c.skipped, 1);
        let row = c.pair.lines().nth(1).unwrap();
        assert!(row.contains("positive semidefinite"), "{row}");
    }
}
