//! CSV ingestion and emission.
//!
//! Input schema: header `group,x,y[,se][,r]`. One row per (group, x) carries
//! the group mean with optional standard error and replication count;
//! repeated (group, x) rows are treated as raw replicates and reduced to
//! mean, standard error, and count on load.

use std::collections::BTreeMap;
use std::path::Path;

use tubeband::{ContrastBand, GroupSample};

use crate::json::fmt_sig;
use crate::CliError;

const SIG: usize = 6;

#[derive(Debug, Clone)]
pub struct Dataset {
    pub points: Vec<f64>,
    pub samples: Vec<GroupSample>,
}

struct RawRow {
    x: f64,
    y: f64,
    se: Option<f64>,
    r: Option<u32>,
}

pub fn read_data_csv(path: &Path) -> Result<Dataset, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::usage(format!("cannot read data {}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::usage(format!("bad CSV header: {e}")))?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let (gi, xi, yi) = match (col("group"), col("x"), col("y")) {
        (Some(g), Some(x), Some(y)) => (g, x, y),
        _ => {
            return Err(CliError::usage(
                "data CSV must have columns group,x,y (se and r optional)".into(),
            ))
        }
    };
    let sei = col("se");
    let ri = col("r");

    let mut order: Vec<String> = Vec::new();
    let mut rows: BTreeMap<String, Vec<RawRow>> = BTreeMap::new();
    for (lineno, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::usage(format!("CSV row {}: {e}", lineno + 2)))?;
        let group = record
            .get(gi)
            .ok_or_else(|| CliError::usage(format!("CSV row {}: missing group", lineno + 2)))?
            .to_string();
        let parse = |idx: usize, name: &str| -> Result<f64, CliError> {
            record
                .get(idx)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| CliError::usage(format!("CSV row {}: bad {name}", lineno + 2)))
        };
        let x = parse(xi, "x")?;
        let y = parse(yi, "y")?;
        let se = match sei {
            Some(i) => match record.get(i) {
                None | Some("") => None,
                Some(s) => Some(s.parse().map_err(|_| {
                    CliError::usage(format!("CSV row {}: bad se", lineno + 2))
                })?),
            },
            None => None,
        };
        let r = match ri {
            Some(i) => match record.get(i) {
                None | Some("") => None,
                Some(s) => Some(s.parse().map_err(|_| {
                    CliError::usage(format!("CSV row {}: bad r", lineno + 2))
                })?),
            },
            None => None,
        };
        if !rows.contains_key(&group) {
            order.push(group.clone());
        }
        rows.entry(group).or_default().push(RawRow { x, y, se, r });
    }
    if order.is_empty() {
        return Err(CliError::usage("data CSV contains no rows".into()));
    }

    let mut samples = Vec::with_capacity(order.len());
    let mut points: Option<Vec<f64>> = None;
    for group in &order {
        let group_rows = &rows[group];
        let sample = reduce_group(group, group_rows)?;
        let xs: Vec<f64> = {
            let mut xs: Vec<f64> = group_rows.iter().map(|r| r.x).collect();
            xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            xs.dedup();
            xs
        };
        match &points {
            None => points = Some(xs),
            Some(existing) => {
                if *existing != xs {
                    return Err(CliError::usage(format!(
                        "group {group} has different design points than the first group \
                         (the balanced design requires identical x across groups)"
                    )));
                }
            }
        }
        samples.push(sample);
    }
    Ok(Dataset {
        points: points.unwrap(),
        samples,
    })
}

fn reduce_group(group: &str, raw: &[RawRow]) -> Result<GroupSample, CliError> {
    let mut by_x: BTreeMap<u64, Vec<&RawRow>> = BTreeMap::new();
    for row in raw {
        by_x.entry(row.x.to_bits()).or_default().push(row);
    }
    let replicated = by_x.values().any(|v| v.len() > 1);
    let mut means = Vec::with_capacity(by_x.len());
    let mut ses = Vec::with_capacity(by_x.len());
    let mut reps: Option<u32> = None;
    let mut has_se = false;
    let mut entries: Vec<(f64, &Vec<&RawRow>)> = by_x
        .values()
        .map(|v| (v[0].x, v))
        .collect();
    entries.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    for (_, bucket) in entries {
        if replicated {
            // raw replicates: reduce to mean and standard error of the mean
            let r = bucket.len() as u32;
            let mean = bucket.iter().map(|row| row.y).sum::<f64>() / r as f64;
            let ss: f64 = bucket.iter().map(|row| (row.y - mean).powi(2)).sum();
            means.push(mean);
            ses.push(ss.sqrt() / r as f64);
            has_se = true;
            match reps {
                None => reps = Some(r),
                Some(prev) if prev != r => {
                    return Err(CliError::usage(format!(
                        "group {group}: unequal replicate counts across x ({prev} vs {r})"
                    )))
                }
                _ => {}
            }
        } else {
            let row = bucket[0];
            means.push(row.y);
            if let Some(se) = row.se {
                ses.push(se);
                has_se = true;
            } else {
                ses.push(0.0);
            }
            if let Some(r) = row.r {
                match reps {
                    None => reps = Some(r),
                    Some(prev) if prev != r => {
                        return Err(CliError::usage(format!(
                            "group {group}: inconsistent r column ({prev} vs {r})"
                        )))
                    }
                    _ => {}
                }
            }
        }
    }
    let mut sample = GroupSample::new(group, reps.unwrap_or(1), means);
    if has_se {
        sample = sample.with_std_errors(ses);
    }
    Ok(sample)
}

fn write_file(path: &Path, content: &str) -> Result<(), CliError> {
    std::fs::write(path, content)
        .map_err(|e| CliError::usage(format!("cannot write {}: {e}", path.display())))
}

/// A band as a plain four-column table; keeps re-emission byte-faithful.
#[derive(Debug, Clone, PartialEq)]
pub struct BandTable {
    pub xs: Vec<f64>,
    pub center: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl From<&ContrastBand> for BandTable {
    fn from(band: &ContrastBand) -> Self {
        BandTable {
            xs: band.xs.clone(),
            center: band.center.clone(),
            lower: band.lower(),
            upper: band.upper(),
        }
    }
}

pub fn write_band_csv(path: &Path, table: &BandTable) -> Result<(), CliError> {
    let mut out = String::from("x,center,lower,upper\n");
    for i in 0..table.xs.len() {
        out.push_str(&format!(
            "{},{},{},{}\n",
            fmt_sig(table.xs[i], SIG),
            fmt_sig(table.center[i], SIG),
            fmt_sig(table.lower[i], SIG),
            fmt_sig(table.upper[i], SIG)
        ));
    }
    write_file(path, &out)
}

/// Re-ingest an emitted band CSV (used by the round-trip contract).
pub fn read_band_csv(path: &Path) -> Result<BandTable, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("");
    if header != "x,center,lower,upper" {
        return Err(CliError::usage(format!("unexpected band header `{header}`")));
    }
    let mut table = BandTable {
        xs: Vec::new(),
        center: Vec::new(),
        lower: Vec::new(),
        upper: Vec::new(),
    };
    for line in lines {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 4 {
            return Err(CliError::usage(format!("bad band row `{line}`")));
        }
        let parse = |s: &str| -> Result<f64, CliError> {
            s.parse()
                .map_err(|_| CliError::usage(format!("bad number `{s}` in band CSV")))
        };
        table.xs.push(parse(cells[0])?);
        table.center.push(parse(cells[1])?);
        table.lower.push(parse(cells[2])?);
        table.upper.push(parse(cells[3])?);
    }
    Ok(table)
}

pub fn write_scan_csv(path: &Path, xs: &[f64], chi2: &[f64], threshold: f64) -> Result<(), CliError> {
    let mut out = String::from("x,chi2,threshold\n");
    for (x, v) in xs.iter().zip(chi2) {
        out.push_str(&format!(
            "{},{},{}\n",
            fmt_sig(*x, SIG),
            fmt_sig(*v, SIG),
            fmt_sig(threshold, SIG)
        ));
    }
    write_file(path, &out)
}

pub fn write_kappa_csv(path: &Path, sweep: &[(f64, f64)]) -> Result<(), CliError> {
    let mut out = String::from("x,kappa\n");
    for (x, k) in sweep {
        out.push_str(&format!("{},{}\n", fmt_sig(*x, SIG), fmt_sig(*k, SIG)));
    }
    write_file(path, &out)
}

pub fn write_selection_csv(
    path: &Path,
    entries: &[tubeband::inference::SelectionEntry],
) -> Result<(), CliError> {
    let mut out = String::from("degree,m,l,aic,bic\n");
    for e in entries {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            e.degree,
            e.m,
            fmt_sig(e.l, SIG),
            fmt_sig(e.aic, SIG),
            fmt_sig(e.bic, SIG)
        ));
    }
    write_file(path, &out)
}

pub fn write_fitted_csv(
    path: &Path,
    group_ids: &[String],
    grid: &[f64],
    fitted: &[Vec<f64>],
) -> Result<(), CliError> {
    let mut out = String::from("group,x,fitted\n");
    for (g, series) in group_ids.iter().zip(fitted) {
        for (x, v) in grid.iter().zip(series) {
            out.push_str(&format!("{g},{},{}\n", fmt_sig(*x, SIG), fmt_sig(*v, SIG)));
        }
    }
    write_file(path, &out)
}

pub fn write_sigma_csv(path: &Path, points: &[f64], variance: &[f64]) -> Result<(), CliError> {
    let mut out = String::from("x,sigma2\n");
    for (x, v) in points.iter().zip(variance) {
        out.push_str(&format!("{},{}\n", fmt_sig(*x, SIG), fmt_sig(*v, SIG)));
    }
    write_file(path, &out)
}

pub fn write_tail_curve_csv(
    path: &Path,
    rows: &[(f64, f64, f64, f64)],
) -> Result<(), CliError> {
    let mut out = String::from("b,tube,mc,mc_stderr\n");
    for (b, tube, mc, se) in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            fmt_sig(*b, SIG),
            fmt_sig(*tube, SIG),
            fmt_sig(*mc, SIG),
            fmt_sig(*se, SIG)
        ));
    }
    write_file(path, &out)
}

pub fn write_coverage_curve_csv(path: &Path, rows: &[(f64, f64, f64)]) -> Result<(), CliError> {
    let mut out = String::from("nominal_alpha,actual_alpha,stderr\n");
    for (nominal, actual, se) in rows {
        out.push_str(&format!(
            "{},{},{}\n",
            fmt_sig(*nominal, SIG),
            fmt_sig(*actual, SIG),
            fmt_sig(*se, SIG)
        ));
    }
    write_file(path, &out)
}

pub fn write_table_row_csv(
    path: &Path,
    model: &str,
    amplitude: f64,
    m: usize,
    result: &tubeband::CoverageResult,
    delta: f64,
    bound: f64,
) -> Result<(), CliError> {
    let mut out = String::from(
        "model,amplitude,m,coverage,stderr,delta,delta_bound,critical_value,seed,replications\n",
    );
    out.push_str(&format!(
        "{model},{},{m},{},{},{},{},{},{},{}\n",
        fmt_sig(amplitude, SIG),
        fmt_sig(result.coverage, SIG),
        fmt_sig(result.stderr, SIG),
        fmt_sig(delta, SIG),
        fmt_sig(bound, SIG),
        fmt_sig(result.critical_value, SIG),
        result.seed,
        result.replications
    ));
    write_file(path, &out)
}

pub fn write_widths_csv(path: &Path, rows: &[(usize, f64)]) -> Result<(), CliError> {
    let mut out = String::from("m,width\n");
    for (m, w) in rows {
        out.push_str(&format!("{m},{}\n", fmt_sig(*w, SIG)));
    }
    write_file(path, &out)
}
