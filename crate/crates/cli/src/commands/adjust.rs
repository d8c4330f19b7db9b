//! `adjust`: LDSC on participant and participation summary statistics,
//! followed by the participation-bias adjustment with jackknife SEs.
//!
//! ```text
//! [participation]
//! alpha = 0.055
//! h2x = 0.08
//! h2x_se = 0.01               # optional delta-method add-on
//! sumstats = participation.sumstats
//! [ldsc]
//! ld = ldscores.l2
//! blocks = 200
//! m = 5000                    # defaults to the number of regression SNPs
//! h2_intercept = free         # or a number
//! gcov_intercept = free
//! [meanshift]
//! table = meanshift.csv       # optional when every phenotype sets delta
//! [phenotype.BMI]
//! sumstats = bmi.sumstats
//! delta = -0.138              # overrides the table
//! binary = no
//! [pair.BMI:height]
//! intercept = 0.12            # optional fixed cross-trait intercept
//! ```

use anyhow::Result;
use partbias_core::analysis::{run_analysis, AnalysisOptions, AnalysisReport, Estimate};
use partbias_core::io::formats::csv_to_string;
use partbias_core::io::{read_ldscores, read_meanshift, read_sumstats, results_to_csv, results_to_jsonl, ResultRow};
use partbias_core::ldsc::{Intercept, LdscOptions, DEFAULT_BLOCKS};
use partbias_core::truncnorm::std_normal_sf;
use partbias_core::Error;

use crate::manifest::Run;
use crate::settings::{self, num};
use crate::Cli;

pub const RESULTS_CSV: &str = "results.csv";
pub const RESULTS_JSONL: &str = "results.jsonl";
pub const PVALUES_FILE: &str = "pvalues.csv";
pub const PAIR_FILE: &str = "pair_gcor.csv";
pub const PAIR_MATRIX_FILE: &str = "pair_gcor_matrix.csv";
pub const SUMMARY_FILE: &str = "summary.json";

pub const PVALUES_HEADER: [&str; 8] = [
    "phenotype",
    "estimate_type",
    "z_original",
    "p_original",
    "p_original_bonferroni",
    "z_adjusted",
    "p_adjusted",
    "p_adjusted_bonferroni",
];

/// Two-sided normal-approximation p-value of `value / se`.
pub fn p_value(value: f64, se: f64) -> Option<(f64, f64)> {
    if se.is_nan() || se <= 0.0 || !value.is_finite() {
        return None;
    }
    let z = value / se;
    Some((z, (2.0 * std_normal_sf(z.abs())).min(1.0)))
}

/// Rows of the results table: `h2`, `rho_g` and `rho_e` per phenotype, then
/// `varphi_g` per pair under the name `A:B`.
pub fn result_rows(report: &AnalysisReport, notes: &[Vec<String>]) -> Vec<ResultRow> {
    let mut rows = Vec::new();
    for (i, p) in report.phenotypes.iter().enumerate() {
        let pick = |key: &str| -> String {
            p.warnings.iter().filter(|w| w.contains(key)).cloned().collect::<Vec<_>>().join("; ")
        };
        let mut h2_warn = vec![pick(" h2 ")];
        h2_warn.extend(notes.get(i).into_iter().flatten().cloned());
        let h2_warn: Vec<String> = h2_warn.into_iter().filter(|w| !w.is_empty()).collect();
        let row = |t: &str, o: Option<Estimate>, a: Option<Estimate>, w: String| ResultRow {
            phenotype: p.name.clone(),
            estimate_type: t.to_string(),
            original: o.map(|e| e.value),
            adjusted: a.map(|e| e.value),
            se_original: o.map(|e| e.se),
            se_adjusted: a.map(|e| e.se),
            warning: w,
        };
        rows.push(row("h2", Some(p.h2_original), Some(p.h2_adjusted), h2_warn.join("; ")));
        rows.push(row("rho_g", Some(p.rho_g_original), Some(p.rho_g_adjusted), pick(" rho_g ")));
        let re_warn = if p.rho_e_adjusted.is_none() { "not identifiable without selection".into() } else { String::new() };
        rows.push(row("rho_e", None, p.rho_e_adjusted, re_warn));
    }
    for q in &report.pairs {
        rows.push(ResultRow {
            phenotype: format!("{}:{}", report.phenotypes[q.first].name, report.phenotypes[q.second].name),
            estimate_type: "varphi_g".into(),
            original: Some(q.varphi_g_original.value),
            adjusted: Some(q.varphi_g_adjusted.value),
            se_original: Some(q.varphi_g_original.se),
            se_adjusted: Some(q.varphi_g_adjusted.se),
            warning: q.warnings.join("; "),
        });
    }
    rows
}

/// p-values per result row, with Bonferroni correction over the rows that
/// share an estimate type.
pub fn pvalue_table(rows: &[ResultRow]) -> Result<String> {
    let opt = |v: Option<f64>| v.map(num).unwrap_or_default();
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let tests = rows.iter().filter(|x| x.estimate_type == r.estimate_type).count() as f64;
            let o = r.original.zip(r.se_original).and_then(|(v, s)| p_value(v, s));
            let a = r.adjusted.zip(r.se_adjusted).and_then(|(v, s)| p_value(v, s));
            let bonf = |p: Option<(f64, f64)>| p.map(|(_, p)| (p * tests).min(1.0));
            vec![
                r.phenotype.clone(),
                r.estimate_type.clone(),
                opt(o.map(|x| x.0)),
                opt(o.map(|x| x.1)),
                opt(bonf(o)),
                opt(a.map(|x| x.0)),
                opt(a.map(|x| x.1)),
                opt(bonf(a)),
            ]
        })
        .collect();
    Ok(csv_to_string(&PVALUES_HEADER, &body)?)
}

/// Pair genetic correlations as a square matrix: adjusted above the
/// diagonal, unadjusted below, 1 on it.
pub fn pair_matrix(report: &AnalysisReport) -> Result<String> {
    let names: Vec<&str> = report.phenotypes.iter().map(|p| p.name.as_str()).collect();
    let k = names.len();
    let mut m = vec![vec![String::new(); k]; k];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = "1".into();
    }
    for q in &report.pairs {
        let (a, b) = (q.first.min(q.second), q.first.max(q.second));
        m[a][b] = num(q.varphi_g_adjusted.value);
        m[b][a] = num(q.varphi_g_original.value);
    }
    let mut header = vec!["phenotype"];
    header.extend(&names);
    let body: Vec<Vec<String>> = names
        .iter()
        .zip(m)
        .map(|(n, r)| std::iter::once(n.to_string()).chain(r).collect())
        .collect();
    Ok(csv_to_string(&header, &body)?)
}

pub fn run(cli: &Cli) -> Result<()> {
    let cfg = settings::require(cli)?;
    let mut run = Run::start(&cli.out_dir, cli.command.name(), cli.config.as_deref())?;
    let sel = settings::selection(&cfg)?;
    let h2x = settings::h2x(&cfg)?;
    let part_sec = settings::section(&cfg, "participation")?;
    let h2x_se = part_sec.f64(&cfg, "h2x_se")?;
    let part_path = settings::require_path(&cfg, part_sec, "sumstats")?;
    let ldsc_sec = settings::section(&cfg, "ldsc")?;
    let ld_path = settings::require_path(&cfg, ldsc_sec, "ld")?;
    let blocks = match cli.blocks {
        Some(b) => b,
        None => ldsc_sec.usize(&cfg, "blocks")?.unwrap_or(DEFAULT_BLOCKS),
    };
    let ldsc = LdscOptions {
        m: ldsc_sec.f64(&cfg, "m")?,
        blocks,
        h2_intercept: settings::intercept(&cfg, ldsc_sec, "h2_intercept", Intercept::Free)?,
        gcov_intercept: settings::intercept(&cfg, ldsc_sec, "gcov_intercept", Intercept::Free)?,
    };

    let table = match cfg.section("meanshift").and_then(|s| s.str("table")) {
        Some(t) => {
            let path = cfg.resolve(t);
            run.input(&path)?;
            read_meanshift(&path)?
        }
        None => Vec::new(),
    };
    for r in &table {
        if (r.alpha - sel.alpha()).abs() > 1e-12 {
            run.warn(format!(
                "mean shift for {} was recorded with alpha {} but the analysis uses {}",
                r.phenotype,
                r.alpha,
                sel.alpha()
            ));
        }
    }

    run.input(&part_path)?;
    let participation = read_sumstats(&part_path, "participation")?;
    run.input(&ld_path)?;
    let ld = read_ldscores(&ld_path)?;
    let mut stats = Vec::new();
    let mut deltas = Vec::new();
    let mut notes = Vec::new();
    for (name, sec) in settings::phenotypes(&cfg)? {
        let path = settings::require_path(&cfg, sec, "sumstats")?;
        run.input(&path)?;
        stats.push(read_sumstats(&path, &name)?);
        let delta = match sec.f64(&cfg, "delta")? {
            Some(d) => Some(d),
            None => table.iter().find(|r| r.phenotype == name).map(|r| r.delta),
        };
        deltas.push(delta);
        let mut n = Vec::new();
        if sec.bool(&cfg, "binary")?.unwrap_or(false) {
            n.push("binary trait: delta is a standardized prevalence difference".to_string());
        }
        notes.push(n);
    }
    let mut opts = AnalysisOptions::new(ldsc, h2x);
    opts.h2_x_se = h2x_se;
    for (a, b, sec) in settings::pairs(&cfg)? {
        for n in [&a, &b] {
            if !stats.iter().any(|s| &s.trait_name == n) {
                return Err(Error::InvalidParameter {
                    name: "pair".into(),
                    reason: format!("[pair.{a}:{b}] names unknown phenotype `{n}`"),
                }
                .into());
            }
        }
        if let Some(c) = sec.f64(&cfg, "intercept")? {
            opts.pair_intercepts.push((a, b, c));
        }
    }

    let report = run_analysis(&participation, &stats, &deltas, &ld, &sel, &opts)?;
    let flips = report.sign_flips();
    if flips.is_empty() {
        log::info!("no genetic correlation with participation changed sign after adjustment");
    } else {
        run.warn(format!("genetic correlation with participation changed sign for {}", flips.join(", ")));
    }
    let rows = result_rows(&report, &notes);
    run.write(RESULTS_CSV, &results_to_csv(&rows)?)?;
    run.write(RESULTS_JSONL, &results_to_jsonl(&rows)?)?;
    run.write(PVALUES_FILE, &pvalue_table(&rows)?)?;
    if !report.pairs.is_empty() {
        let pair_rows: Vec<ResultRow> = rows.iter().filter(|r| r.estimate_type == "varphi_g").cloned().collect();
        run.write(PAIR_FILE, &results_to_csv(&pair_rows)?)?;
        run.write(PAIR_MATRIX_FILE, &pair_matrix(&report)?)?;
    }
    let summary = serde_json::json!({
        "alpha": report.alpha,
        "h2_x": report.h2_x,
        "h2_x_se": h2x_se,
        "n_snps": report.n_snps,
        "blocks": report.blocks,
        "sign_flips": flips,
        "phenotypes": report.phenotypes,
        "pairs": report.pairs,
    });
    run.write(SUMMARY_FILE, &(serde_json::to_string_pretty(&summary)? + "\n"))?;
    run.finish()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p_values_are_two_sided() {
        let (z, p) = p_value(1.959963984540054, 1.0).unwrap();
        assert!((z - 1.959963984540054).abs() < 1e-15);
        assert!((p - 0.05).abs() < 1e-12);
        assert!(p_value(1.0, 0.0).is_none());
        assert_eq!(p_value(0.0, 1.0).unwrap().1, 1.0);
    }

    #[test]
    fn bonferroni_counts_rows_of_the_same_type() {
        let row = |name: &str, t: &str, v: f64| ResultRow {
            phenotype: name.into(),
            estimate_type: t.into(),
            original: Some(v),
            adjusted: None,
            se_original: Some(1.0),
            se_adjusted: None,
            warning: String::new(),
        };
        let rows = vec![row("A", "h2", 3.0), row("A:B", "varphi_g", 3.0), row("A:C", "varphi_g", 3.0)];
        let t = pvalue_table(&rows).unwrap();
        let lines: Vec<Vec<&str>> = t.lines().skip(1).map(|l| l.split(',').collect()).collect();
        let p: f64 = lines[0][3].parse().unwrap();
        let b0: f64 = lines[0][4].parse().unwrap();
        let b1: f64 = lines[1][4].parse().unwrap();
        assert_eq!(b0, p);
        assert!((b1 - 2.0 * p).abs() < 1e-15);
        assert_eq!(lines[0][6], "");
    }
}
