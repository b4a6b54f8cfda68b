//! Table ingestion and report emission.
//!
//! Inputs are UTF-8, comma-delimited, with a header row:
//!
//! * two-class: `feature,<positive class>,<negative class>`
//! * multi-class: `feature,<class 1>,...,<class c>`
//!
//! Every value is `P(feature present | class)` as a decimal in `[0, 1]`.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::engine::EngineConfig;
use crate::error::{Error, Result};
use crate::model::{check_probability, ClassPriors, Feature, FeatureTable};
use crate::region::NoImprovementRegion;
use crate::selector::{SelectionTrace, StoppingRule};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableKind {
    TwoClass,
    MultiClass,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LoadedTable {
    TwoClass(FeatureTable),
    MultiClass(MultiClassTable),
}

/// Per-feature presence probabilities for any number of classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiClassTable {
    features: Vec<String>,
    classes: Vec<String>,
    /// `probs[j][k] = P(feature j present | class k)`
    probs: Vec<Vec<f64>>,
}

impl MultiClassTable {
    pub fn new(features: Vec<String>, classes: Vec<String>, probs: Vec<Vec<f64>>) -> Result<Self> {
        if classes.len() < 2 {
            return Err(Error::TooFewClasses(classes.len()));
        }
        if features.is_empty() {
            return Err(Error::EmptyTable);
        }
        let mut seen = HashSet::new();
        for c in &classes {
            if !seen.insert(c.as_str()) {
                return Err(Error::DuplicateClass(c.clone()));
            }
        }
        let mut seen = HashSet::new();
        for (row, (name, p)) in features.iter().zip(&probs).enumerate() {
            if name.trim().is_empty() {
                return Err(Error::EmptyFeatureName(row));
            }
            if !seen.insert(name.as_str()) {
                return Err(Error::DuplicateFeature(name.clone()));
            }
            if p.len() != classes.len() {
                return Err(Error::InvalidConfig(format!(
                    "feature `{name}` has {} values for {} classes",
                    p.len(),
                    classes.len()
                )));
            }
            for &v in p {
                check_probability(name, v)?;
            }
        }
        if probs.len() != features.len() {
            return Err(Error::InvalidConfig("one probability row per feature is required".into()));
        }
        Ok(Self { features, classes, probs })
    }

    pub fn features(&self) -> &[String] {
        &self.features
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn probs(&self) -> &[Vec<f64>] {
        &self.probs
    }
}

/// Two-class view of a multi-class table: the target class against the
/// unweighted mean of all other classes (equal prevalences among them).
pub fn collapse_multiclass(table: &MultiClassTable, target: &str) -> Result<FeatureTable> {
    let t = table
        .classes
        .iter()
        .position(|c| c == target)
        .ok_or_else(|| Error::UnknownClass(target.to_string()))?;
    let others = (table.classes.len() - 1) as f64;
    let features = table
        .features
        .iter()
        .zip(&table.probs)
        .map(|(name, p)| {
            let rest: f64 = p.iter().enumerate().filter(|&(k, _)| k != t).map(|(_, v)| v).sum();
            Feature::new(name.clone(), p[t], (rest / others).clamp(0.0, 1.0))
        })
        .collect();
    FeatureTable::new(features)
}

fn parse_error(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

struct Rows {
    header: Vec<String>,
    /// `(line, cells)`
    rows: Vec<(usize, Vec<String>)>,
}

fn read_rows(reader: impl Read) -> Result<Rows> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut header = None;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_error(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.iter().all(str::is_empty) {
            continue;
        }
        let cells: Vec<String> = rec.iter().map(str::to_string).collect();
        if header.is_none() {
            header = Some(cells);
        } else {
            rows.push((line, cells));
        }
    }
    let header = header.ok_or_else(|| parse_error(1, "empty input: a header row is required"))?;
    if rows.is_empty() {
        return Err(parse_error(2, "no feature rows after the header"));
    }
    Ok(Rows { header, rows })
}

fn parse_value(line: usize, feature: &str, cell: &str) -> Result<f64> {
    let v: f64 = cell
        .parse()
        .map_err(|_| parse_error(line, format!("`{cell}` for feature `{feature}` is not a decimal number")))?;
    if !v.is_finite() {
        return Err(parse_error(line, format!("`{cell}` for feature `{feature}` is not finite")));
    }
    check_probability(feature, v)?;
    Ok(v)
}

fn parse_matrix(rows: &Rows, columns: usize) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut names = Vec::with_capacity(rows.rows.len());
    let mut values = Vec::with_capacity(rows.rows.len());
    let mut seen = HashSet::new();
    for (line, cells) in &rows.rows {
        if cells.len() != columns {
            return Err(parse_error(*line, format!("expected {columns} columns, found {}", cells.len())));
        }
        let name = &cells[0];
        if name.is_empty() {
            return Err(parse_error(*line, "empty feature name"));
        }
        if !seen.insert(name.clone()) {
            return Err(Error::DuplicateFeature(name.clone()));
        }
        let row = cells[1..]
            .iter()
            .map(|c| parse_value(*line, name, c))
            .collect::<Result<Vec<_>>>()?;
        names.push(name.clone());
        values.push(row);
    }
    Ok((names, values))
}

pub fn read_two_class(reader: impl Read) -> Result<FeatureTable> {
    let rows = read_rows(reader)?;
    if rows.header.len() != 3 {
        return Err(parse_error(
            1,
            format!("two-class header needs 3 columns (feature, class 1, class 2), found {}", rows.header.len()),
        ));
    }
    let (names, values) = parse_matrix(&rows, 3)?;
    FeatureTable::new(
        names
            .into_iter()
            .zip(values)
            .map(|(n, v)| Feature::new(n, v[0], v[1]))
            .collect(),
    )
}

pub fn read_multi_class(reader: impl Read) -> Result<MultiClassTable> {
    let rows = read_rows(reader)?;
    if rows.header.len() < 3 {
        return Err(parse_error(
            1,
            format!("multi-class header needs a feature column and at least 2 classes, found {} columns", rows.header.len()),
        ));
    }
    let classes: Vec<String> = rows.header[1..].to_vec();
    let (names, values) = parse_matrix(&rows, rows.header.len())?;
    MultiClassTable::new(names, classes, values)
}

pub fn load_table(path: impl AsRef<Path>, kind: TableKind) -> Result<LoadedTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    match kind {
        TableKind::TwoClass => read_two_class(file).map(LoadedTable::TwoClass),
        TableKind::MultiClass => read_multi_class(file).map(LoadedTable::MultiClass),
    }
}

/// Writes a two-class table in the input format; values use the shortest
/// decimal that reads back to the same `f64`.
pub fn write_two_class(table: &FeatureTable, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(["feature", "positive", "negative"]).map_err(io)?;
    for f in table.features() {
        w.write_record([f.name.as_str(), &f.p_pos.to_string(), &f.p_neg.to_string()])
            .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

/// SHA-256 over the table content, in the canonical two-class text form.
pub fn fingerprint(table: &FeatureTable) -> String {
    let mut buf = Vec::new();
    write_two_class(table, &mut buf).expect("writing to memory");
    format!("sha256:{}", hex::encode(Sha256::digest(&buf)))
}

/// Echo of everything that shaped a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub strategy: String,
    pub input: Option<String>,
    pub multiclass_target: Option<String>,
    pub priors: ClassPriors,
    pub stop: StoppingRule,
    pub engine: EngineConfig,
    pub clamp_epsilon: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub fingerprint: String,
    pub config: RunConfig,
    pub trace: SelectionTrace,
    /// Omitted unless the caller asks for it, so that reruns are byte-identical.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generated_at: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    /// Tab-separated, percentages to two decimals.
    Tabular,
    /// Pretty-printed JSON with full precision.
    Structured,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RenderOptions {
    /// Highlight forced steps with ANSI colour.
    pub color: bool,
}

/// `100 x` to two decimals. Formatting works on the exact binary value, so
/// exact ties round half to even.
pub fn percent(x: f64) -> String {
    format!("{:.2}", 100.0 * x)
}

fn percent_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".to_string(), percent)
}

pub const TABULAR_COLUMNS: [&str; 7] = [
    "step",
    "feature",
    "error_pct",
    "sensitivity_pct",
    "specificity_pct",
    "reduction",
    "forced",
];

pub fn render_tabular(report: &RunReport, opts: RenderOptions) -> String {
    let tr = &report.trace;
    let mut s = String::new();
    let _ = writeln!(s, "# strategy\t{}", report.config.strategy);
    let _ = writeln!(s, "# fingerprint\t{}", report.fingerprint);
    let _ = writeln!(s, "# priors\t{}\t{}", tr.priors.positive(), tr.priors.negative());
    let _ = writeln!(s, "# initial_error_pct\t{}", percent(tr.initial_error.error));
    let stop = serde_json::to_value(tr.stop_reason).expect("enum serializes");
    let _ = writeln!(s, "# stop_reason\t{}", stop.as_str().unwrap_or_default());
    if let Some(ts) = &report.generated_at {
        let _ = writeln!(s, "# generated_at\t{ts}");
    }
    let _ = writeln!(s, "{}", TABULAR_COLUMNS.join("\t"));
    for (k, step) in tr.steps.iter().enumerate() {
        let row = format!(
            "{}\t{}\t{}\t{}\t{}\t{:.6}\t{}",
            k + 1,
            step.feature_name,
            percent(step.cumulative_error),
            percent_opt(step.sensitivity),
            percent_opt(step.specificity),
            step.reduction,
            if step.forced { "yes" } else { "no" }
        );
        if opts.color && step.forced {
            let _ = writeln!(s, "\x1b[33m{row}\x1b[0m");
        } else {
            let _ = writeln!(s, "{row}");
        }
    }
    s
}

pub fn emit_report(report: &RunReport, format: ReportFormat, opts: RenderOptions, mut out: impl Write) -> Result<()> {
    match format {
        ReportFormat::Tabular => out.write_all(render_tabular(report, opts).as_bytes())?,
        ReportFormat::Structured => {
            serde_json::to_writer_pretty(&mut out, report).map_err(|e| Error::Io(e.to_string()))?;
            out.write_all(b"\n")?;
        }
    }
    Ok(())
}

pub fn parse_structured_report(reader: impl Read) -> Result<RunReport> {
    serde_json::from_reader(reader).map_err(|e| parse_error(e.line(), e.to_string()))
}

/// `(c, d)` point of every feature with its selection flag. With a region,
/// trailing `#` lines carry `alpha_lo`, `alpha_hi` (or `none`) and the
/// boundary segments clipped to the unit square as `#segment,c0,d0,c1,d1`.
pub fn emit_scatter(
    table: &FeatureTable,
    selected: &[usize],
    region: Option<&NoImprovementRegion>,
    out: impl Write,
) -> Result<()> {
    table.validate_subset(selected)?;
    let chosen: HashSet<usize> = selected.iter().copied().collect();
    let io = |e: csv::Error| Error::Io(e.to_string());
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["feature", "c", "d", "selected"]).map_err(io)?;
    for (j, f) in table.features().iter().enumerate() {
        let flag = if chosen.contains(&j) { "1" } else { "0" };
        w.write_record([f.name.as_str(), &f.p_pos.to_string(), &f.p_neg.to_string(), flag])
            .map_err(io)?;
    }
    w.flush()?;
    let mut out = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    if let Some(r) = region {
        let show = |a: Option<f64>| a.map_or_else(|| "none".to_string(), |v| v.to_string());
        writeln!(out, "#alpha_lo,{}", show(r.alpha_lo()))?;
        writeln!(out, "#alpha_hi,{}", show(r.alpha_hi()))?;
        for s in r.boundary_segments() {
            writeln!(out, "#segment,{},{},{},{}", s.from.0, s.from.1, s.to.0, s.to.1)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const THREE_FEATURES: &str = "feature,omega1,omega2\nx1,0.3,0.1\nx2,0.4,0.6\nx3,0.8,0.7\n";

    #[test]
    fn reads_two_class() {
        let t = read_two_class(THREE_FEATURES.as_bytes()).unwrap();
        assert_eq!(t, FeatureTable::from_triples([("x1", 0.3, 0.1), ("x2", 0.4, 0.6), ("x3", 0.8, 0.7)]).unwrap());
    }

    #[test]
    fn empty_input_is_a_parse_error() {
        assert!(matches!(read_two_class("".as_bytes()), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(read_two_class("feature,a,b\n".as_bytes()), Err(Error::Parse { .. })));
    }

    #[test]
    fn out_of_range_names_feature() {
        let err = read_two_class("feature,a,b\nx1,0.3,0.1\nx2,1.2,0.5\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::ProbabilityOutOfRange { ref feature, value } if feature == "x2" && value == 1.2));
    }

    #[test]
    fn bad_number_reports_line() {
        let err = read_two_class("feature,a,b\nx1,0.3,0.1\nx2,abc,0.5\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err:?}");
        let err = read_two_class("feature,a,b\nx1,0.3\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err:?}");
    }

    #[test]
    fn duplicate_names_rejected() {
        let err = read_two_class("feature,a,b\nx1,0.3,0.1\nx1,0.2,0.5\n".as_bytes()).unwrap_err();
        assert_eq!(err, Error::DuplicateFeature("x1".into()));
    }

    #[test]
    fn collapse_averages_other_classes() {
        let m = read_multi_class("feature,A,B,C\nf,0.9,0.2,0.4\n".as_bytes()).unwrap();
        let t = collapse_multiclass(&m, "A").unwrap();
        assert_eq!(t.features()[0].p_pos, 0.9);
        assert!((t.features()[0].p_neg - 0.3).abs() < 1e-15);
        assert_eq!(collapse_multiclass(&m, "Z"), Err(Error::UnknownClass("Z".into())));
    }

    #[test]
    fn collapse_two_classes_is_identity() {
        let m = read_multi_class(THREE_FEATURES.as_bytes()).unwrap();
        let t = collapse_multiclass(&m, "omega1").unwrap();
        assert_eq!(t, read_two_class(THREE_FEATURES.as_bytes()).unwrap());
    }

    #[test]
    fn collapse_constant_others() {
        let classes: Vec<String> = (0..63).map(|k| format!("c{k}")).collect();
        let mut row = vec![0.37; 63];
        row[0] = 0.8;
        let m = MultiClassTable::new(vec!["f".into()], classes, vec![row]).unwrap();
        let t = collapse_multiclass(&m, "c0").unwrap();
        assert!((t.features()[0].p_neg - 0.37).abs() < 1e-15);
    }

    #[test]
    fn multiclass_needs_two_classes() {
        assert!(read_multi_class("feature,A\nf,0.5\n".as_bytes()).is_err());
        assert_eq!(
            read_multi_class("feature,A,A\nf,0.5,0.2\n".as_bytes()),
            Err(Error::DuplicateClass("A".into()))
        );
    }

    #[test]
    fn percent_rounds_half_even() {
        assert_eq!(percent(0.22), "22.00");
        assert_eq!(percent(0.123), "12.30");
        assert_eq!(percent(0.00125), "0.12");
        assert_eq!(percent(0.00375), "0.38");
    }

    #[test]
    fn scatter_rows() {
        let t = read_two_class(THREE_FEATURES.as_bytes()).unwrap();
        let mut buf = Vec::new();
        emit_scatter(&t, &[0], None, &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s, "feature,c,d,selected\nx1,0.3,0.1,1\nx2,0.4,0.6,0\nx3,0.8,0.7,0\n");
        let mut buf = Vec::new();
        emit_scatter(&t, &[], None, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().lines().skip(1).all(|l| l.ends_with(",0")));
    }

    #[test]
    fn scatter_with_region() {
        let t = FeatureTable::from_triples([("x1", 0.15, 0.75), ("x2", 0.9, 0.3)]).unwrap();
        let r = NoImprovementRegion::from_alphas(Some(0.5), None).unwrap();
        let mut buf = Vec::new();
        emit_scatter(&t, &[0], Some(&r), &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.contains("x1,0.15,0.75,1\nx2,0.9,0.3,0\n"));
        assert!(s.contains("#alpha_lo,0.5\n#alpha_hi,none\n"));
        assert!(s.contains("#segment,0,0,0.5,1\n"));
        assert!(s.contains("#segment,1,1,0.5,0\n"));
    }

    #[test]
    fn fingerprint_tracks_content() {
        let t = read_two_class(THREE_FEATURES.as_bytes()).unwrap();
        let u = t.map_probabilities(|p| p * 0.5).unwrap();
        assert_eq!(fingerprint(&t), fingerprint(&t.clone()));
        assert_ne!(fingerprint(&t), fingerprint(&u));
        assert!(fingerprint(&t).starts_with("sha256:"));
    }
}
