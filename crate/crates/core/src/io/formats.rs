//! Readers and writers for summary statistics, LD scores, mean-shift tables,
//! cohort tables and analysis results.
//!
//! Floating-point values are written with Rust's shortest round-trip
//! formatting, so re-reading a file reproduces the in-memory values exactly.

use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::preprocess::{MeanShiftRecord, PhenotypeTable};
use crate::error::{Error, Result};
use crate::ldsc::{LdScores, SumStats, SumStatsRecord};

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse { path: path_str(path), line, message: message.into() }
}

/// Header of a whitespace-delimited table: required column positions, with
/// a warning for every column that is not used.
fn header_positions(path: &Path, header: &str, required: &[&str]) -> Result<Vec<usize>> {
    let cols: Vec<String> = header.split_whitespace().map(|c| c.to_ascii_uppercase()).collect();
    let mut pos = Vec::with_capacity(required.len());
    for r in required {
        match cols.iter().position(|c| c == r) {
            Some(i) => pos.push(i),
            None => {
                return Err(Error::MissingColumn { path: path_str(path), column: r.to_string() })
            }
        }
    }
    for c in &cols {
        if !required.contains(&c.as_str()) {
            log::warn!("{}: ignoring column {c}", path.display());
        }
    }
    Ok(pos)
}

fn open_lines(path: &Path) -> Result<impl Iterator<Item = (usize, std::io::Result<String>)>> {
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(BufReader::new(f).lines().enumerate().map(|(i, l)| (i + 1, l)))
}

fn parse_f64(path: &Path, line: usize, col: &str, s: &str) -> Result<f64> {
    s.parse::<f64>().map_err(|_| parse_err(path, line, format!("{col}: cannot parse `{s}` as a number")))
}

/// Reads `SNP A1 A2 N Z` (any order, tab or space separated, header case
/// ignored). Blank lines are skipped.
pub fn read_sumstats(path: &Path, trait_name: &str) -> Result<SumStats> {
    let mut lines = open_lines(path)?;
    let (_, header) = lines.next().ok_or_else(|| parse_err(path, 1, "empty file"))?;
    let header = header.map_err(|e| Error::io(path, e))?;
    let pos = header_positions(path, &header, &["SNP", "A1", "A2", "N", "Z"])?;
    let width = pos.iter().max().copied().unwrap_or(0) + 1;
    let mut records = Vec::new();
    for (ln, line) in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() < width {
            return Err(parse_err(path, ln, format!("expected at least {width} fields, found {}", f.len())));
        }
        let n = parse_f64(path, ln, "N", f[pos[3]])?;
        let z = parse_f64(path, ln, "Z", f[pos[4]])?;
        records.push(SumStatsRecord {
            snp: f[pos[0]].to_string(),
            a1: f[pos[1]].to_string(),
            a2: f[pos[2]].to_string(),
            n,
            z,
        });
    }
    SumStats::new(trait_name, records).map_err(|e| parse_err(path, 0, e.to_string()))
}

pub fn sumstats_to_string(stats: &SumStats) -> String {
    let mut s = String::from("SNP\tA1\tA2\tN\tZ\n");
    for r in &stats.records {
        s.push_str(&format!("{}\t{}\t{}\t{}\t{}\n", r.snp, r.a1, r.a2, r.n, r.z));
    }
    s
}

pub fn write_sumstats(path: &Path, stats: &SumStats) -> Result<()> {
    write_string(path, &sumstats_to_string(stats))
}

/// Reads `SNP L2`; other columns (CHR, BP, …) are ignored.
pub fn read_ldscores(path: &Path) -> Result<LdScores> {
    let mut lines = open_lines(path)?;
    let (_, header) = lines.next().ok_or_else(|| parse_err(path, 1, "empty file"))?;
    let header = header.map_err(|e| Error::io(path, e))?;
    let pos = header_positions(path, &header, &["SNP", "L2"])?;
    let width = pos.iter().max().copied().unwrap_or(0) + 1;
    let mut snps = Vec::new();
    let mut l2 = Vec::new();
    for (ln, line) in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() < width {
            return Err(parse_err(path, ln, format!("expected at least {width} fields, found {}", f.len())));
        }
        snps.push(f[pos[0]].to_string());
        l2.push(parse_f64(path, ln, "L2", f[pos[1]])?);
    }
    LdScores::new(snps, l2).map_err(|e| parse_err(path, 0, e.to_string()))
}

pub fn ldscores_to_string(ld: &LdScores) -> String {
    let mut s = String::from("SNP\tL2\n");
    for (snp, l) in ld.snps.iter().zip(&ld.l2) {
        s.push_str(&format!("{snp}\t{l}\n"));
    }
    s
}

pub fn write_ldscores(path: &Path, ld: &LdScores) -> Result<()> {
    write_string(path, &ldscores_to_string(ld))
}

pub fn write_string(path: &Path, content: &str) -> Result<()> {
    fs::write(path, content).map_err(|e| Error::io(path, e))
}

/// Renders a CSV table in memory (fields quoted only when needed).
pub fn csv_to_string(header: &[&str], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(|e| Error::Numeric(e.to_string()))?;
    for r in rows {
        w.write_record(r).map_err(|e| Error::Numeric(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Numeric(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Numeric(e.to_string()))
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    write_string(path, &csv_to_string(header, rows)?)
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        kind => parse_err(path, line, format!("{kind:?}")),
    }
}

fn csv_reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).map_err(|e| csv_err(path, e))
}

fn csv_columns(path: &Path, r: &mut csv::Reader<fs::File>, required: &[&str]) -> Result<Vec<usize>> {
    let headers: Vec<String> = r.headers().map_err(|e| csv_err(path, e))?.iter().map(str::to_string).collect();
    required
        .iter()
        .map(|c| {
            headers
                .iter()
                .position(|h| h.eq_ignore_ascii_case(c))
                .ok_or_else(|| Error::MissingColumn { path: path_str(path), column: c.to_string() })
        })
        .collect()
}

pub const MEANSHIFT_HEADER: [&str; 5] = ["phenotype", "delta", "alpha", "n_sample", "n_reference"];

pub fn read_meanshift(path: &Path) -> Result<Vec<MeanShiftRecord>> {
    let mut r = csv_reader(path)?;
    let pos = csv_columns(path, &mut r, &MEANSHIFT_HEADER)?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let get = |i: usize| rec.get(pos[i]).unwrap_or("");
        let delta = parse_f64(path, line, "delta", get(1))?;
        let alpha = parse_f64(path, line, "alpha", get(2))?;
        let count = |i: usize, name: &str| {
            get(i).parse::<usize>().map_err(|_| parse_err(path, line, format!("{name}: bad count `{}`", get(i))))
        };
        if !delta.is_finite() {
            return Err(parse_err(path, line, "delta must be finite"));
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(parse_err(path, line, format!("alpha {alpha} outside (0, 1]")));
        }
        out.push(MeanShiftRecord {
            phenotype: get(0).to_string(),
            delta,
            alpha,
            n_sample: count(3, "n_sample")?,
            n_reference: count(4, "n_reference")?,
        });
    }
    Ok(out)
}

pub fn meanshift_to_string(records: &[MeanShiftRecord]) -> Result<String> {
    let rows: Vec<Vec<String>> = records
        .iter()
        .map(|r| {
            vec![
                r.phenotype.clone(),
                r.delta.to_string(),
                r.alpha.to_string(),
                r.n_sample.to_string(),
                r.n_reference.to_string(),
            ]
        })
        .collect();
    csv_to_string(&MEANSHIFT_HEADER, &rows)
}

pub fn write_meanshift(path: &Path, records: &[MeanShiftRecord]) -> Result<()> {
    write_string(path, &meanshift_to_string(records)?)
}

/// Cohort table: CSV with a header of column names; empty cells and `NA`
/// are missing.
pub fn read_phenotype_table(path: &Path) -> Result<PhenotypeTable> {
    let mut r = csv_reader(path)?;
    let columns: Vec<String> = r.headers().map_err(|e| csv_err(path, e))?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let row = rec
            .iter()
            .zip(&columns)
            .map(|(cell, col)| match cell {
                "" | "NA" | "na" | "NaN" => Ok(None),
                s => parse_f64(path, line, col, s).map(Some),
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(PhenotypeTable { columns, rows })
}

pub fn phenotype_table_to_string(t: &PhenotypeTable) -> Result<String> {
    let header: Vec<&str> = t.columns.iter().map(String::as_str).collect();
    let rows: Vec<Vec<String>> = t
        .rows
        .iter()
        .map(|r| r.iter().map(|v| v.map(|x| x.to_string()).unwrap_or_default()).collect())
        .collect();
    csv_to_string(&header, &rows)
}

/// One line of the results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub phenotype: String,
    pub estimate_type: String,
    pub original: Option<f64>,
    pub adjusted: Option<f64>,
    pub se_original: Option<f64>,
    pub se_adjusted: Option<f64>,
    pub warning: String,
}

pub const RESULTS_HEADER: [&str; 7] =
    ["phenotype", "estimate_type", "original", "adjusted", "se_original", "se_adjusted", "warning"];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn results_to_csv(rows: &[ResultRow]) -> Result<String> {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.phenotype.clone(),
                r.estimate_type.clone(),
                opt(r.original),
                opt(r.adjusted),
                opt(r.se_original),
                opt(r.se_adjusted),
                r.warning.clone(),
            ]
        })
        .collect();
    csv_to_string(&RESULTS_HEADER, &body)
}

pub fn results_to_jsonl(rows: &[ResultRow]) -> Result<String> {
    let mut s = String::new();
    for r in rows {
        s.push_str(&serde_json::to_string(r).map_err(|e| Error::Numeric(e.to_string()))?);
        s.push('\n');
    }
    Ok(s)
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    let mut r = csv_reader(path)?;
    let pos = csv_columns(path, &mut r, &RESULTS_HEADER)?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let get = |i: usize| rec.get(pos[i]).unwrap_or("");
        let num = |i: usize| -> Result<Option<f64>> {
            match get(i) {
                "" => Ok(None),
                s => parse_f64(path, line, RESULTS_HEADER[i], s).map(Some),
            }
        };
        out.push(ResultRow {
            phenotype: get(0).to_string(),
            estimate_type: get(1).to_string(),
            original: num(2)?,
            adjusted: num(3)?,
            se_original: num(4)?,
            se_adjusted: num(5)?,
            warning: get(6).to_string(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn stats() -> SumStats {
        let recs = vec![
            SumStatsRecord { snp: "rs1".into(), a1: "A".into(), a2: "G".into(), n: 1000.0, z: 0.1 + 0.2 },
            SumStatsRecord { snp: "rs2".into(), a1: "c".into(), a2: "t".into(), n: 999.5, z: -1e-300 },
            SumStatsRecord { snp: "rs3".into(), a1: "A".into(), a2: "C".into(), n: 2.0, z: 1.0 / 3.0 },
        ];
        SumStats::new("t", recs).unwrap()
    }

    #[test]
    fn sumstats_round_trip_is_exact() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("s.tsv");
        let s = stats();
        write_sumstats(&p, &s).unwrap();
        let back = read_sumstats(&p, "t").unwrap();
        assert_eq!(back, s);
        let p2 = dir.path().join("s2.tsv");
        write_sumstats(&p2, &back).unwrap();
        assert_eq!(fs::read(&p).unwrap(), fs::read(&p2).unwrap());
    }

    #[test]
    fn header_variants_parse() {
        let dir = tempdir().unwrap();
        let tab = dir.path().join("tab.txt");
        fs::write(&tab, "snp\ta1\ta2\tn\tz\nrs1\tA\tG\t100\t1.5\n").unwrap();
        let space = dir.path().join("space.txt");
        fs::write(&space, "CHR  SNP A2 A1   Z N\n1 rs1  G  A 1.5 100\n\n").unwrap();
        let a = read_sumstats(&tab, "x").unwrap();
        let b = read_sumstats(&space, "x").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn missing_column_is_named() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("bad.txt");
        fs::write(&p, "SNP A1 A2 Z\nrs1 A G 1\n").unwrap();
        match read_sumstats(&p, "x") {
            Err(Error::MissingColumn { column, .. }) => assert_eq!(column, "N"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("bad.txt");
        fs::write(&p, "SNP A1 A2 N Z\nrs1 A G 10 1\nrs2 A G ten 1\n").unwrap();
        match read_sumstats(&p, "x") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn ldscores_and_meanshift_round_trip() {
        let dir = tempdir().unwrap();
        let ld = LdScores::new(vec!["a".into(), "b".into()], vec![1.0, 2.5000000000000004]).unwrap();
        let p = dir.path().join("ld.tsv");
        write_ldscores(&p, &ld).unwrap();
        assert_eq!(read_ldscores(&p).unwrap(), ld);
        let ms = vec![MeanShiftRecord {
            phenotype: "BMI, adult".into(),
            delta: -0.138,
            alpha: 0.055,
            n_sample: 10,
            n_reference: 12,
        }];
        let p = dir.path().join("ms.csv");
        write_meanshift(&p, &ms).unwrap();
        assert_eq!(read_meanshift(&p).unwrap(), ms);
    }

    #[test]
    fn results_round_trip() {
        let dir = tempdir().unwrap();
        let rows = vec![ResultRow {
            phenotype: "y".into(),
            estimate_type: "h2".into(),
            original: Some(0.1 + 0.2),
            adjusted: Some(-1.5e-17),
            se_original: None,
            se_adjusted: Some(0.03),
            warning: "adjusted h2 -0.000000 outside [0, 1]".into(),
        }];
        let p = dir.path().join("r.csv");
        write_string(&p, &results_to_csv(&rows).unwrap()).unwrap();
        assert_eq!(read_results(&p).unwrap(), rows);
        let line = results_to_jsonl(&rows).unwrap();
        let back: ResultRow = serde_json::from_str(line.trim()).unwrap();
        assert_eq!(back, rows[0]);
    }

    #[test]
    fn phenotype_table_missing_values() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("t.csv");
        fs::write(&p, "bmi,age\n25.1,NA\n,40\n").unwrap();
        let t = read_phenotype_table(&p).unwrap();
        assert_eq!(t.rows, vec![vec![Some(25.1), None], vec![None, Some(40.0)]]);
    }
}
